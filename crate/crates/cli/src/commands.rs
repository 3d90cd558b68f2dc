use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ecqs::code::{effective_model, f_g, f_tot, kl_report, Code};
use ecqs::dynamics::{build_liouvillian, stroboscopic_evolve};
use ecqs::linalg::DensityMatrix;
use ecqs::noise::{ecqs_possible, h0_in_span, jump_modes, lindblad_span_basis, CorrelationMatrix, NoiseModel};
use ecqs::recovery::RecoveryChannel;
use ecqs::search::{scan_surface, search_code, SearchConfig};
use ecqs::sensing::{compare_schemes_with, estimate_correlation, DEFAULT_T_MAX_T2, FORMULA_ID};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::output::{emit, read_input, write_atomic, InputDigest, RunManifest};
use crate::Command;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    numerical: bool,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { kind: "validation", message: message.into(), numerical: false }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: "usage", message: message.into(), numerical: false }
    }

    pub fn exit_code(&self) -> u8 {
        if self.numerical {
            2
        } else {
            1
        }
    }
}

impl From<ecqs::Error> for CliError {
    fn from(e: ecqs::Error) -> Self {
        Self { kind: e.kind(), message: e.to_string(), numerical: e.is_numerical() }
    }
}

/// Everything a subcommand produces before it is written out.
struct Run {
    primary: Vec<u8>,
    seed: Option<u64>,
}

struct Context {
    inputs: Vec<InputDigest>,
}

impl Context {
    fn load<T: DeserializeOwned>(&mut self, path: &Path, what: &str) -> Result<T, CliError> {
        let bytes = read_input(path, &mut self.inputs)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError {
            kind: "parse",
            message: format!("{what} {}: {e}", path.display()),
            numerical: false,
        })
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("result serializes");
    v.push(b'\n');
    v
}

pub fn run(command: Command) -> Result<(), CliError> {
    let start = Instant::now();
    let mut ctx = Context { inputs: Vec::new() };
    let (name, params, out, result) = match &command {
        Command::Jumps(a) => ("jumps", to_value(a), a.out.out.clone(), jumps(&mut ctx, &a.model)),
        Command::Check(a) => ("check", to_value(a), a.out.out.clone(), check(&mut ctx, &a.model, &a.code)),
        Command::Search(a) => ("search", to_value(a), a.out.out.clone(), search(&mut ctx, a)),
        Command::Scan(a) => ("scan", to_value(a), a.out.out.clone(), scan(a)),
        Command::Simulate(a) => ("simulate", to_value(a), a.out.out.clone(), simulate(&mut ctx, a)),
        Command::Sensitivity(a) => ("sensitivity", to_value(a), a.out.out.clone(), sensitivity(a)),
        Command::EstimateC(a) => ("estimate-c", to_value(a), a.out.out.clone(), estimate(&mut ctx, a)),
    };
    let run = result?;
    let manifest = RunManifest {
        command: name.to_string(),
        params,
        seed: run.seed,
        version: VERSION.to_string(),
        inputs: ctx.inputs,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    emit(out.as_deref(), &run.primary, &manifest)
}

fn to_value<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn jumps(ctx: &mut Context, model: &Path) -> Result<Run, CliError> {
    let m: NoiseModel = ctx.load(model, "noise model")?;
    let modes = jump_modes(&m);
    let basis = lindblad_span_basis(&modes);
    let listed: Vec<_> = modes
        .iter()
        .map(|md| json!({ "lam": md.lam, "v": md.v.as_slice(), "vanishing": md.is_zero() }))
        .collect();
    let report = json!({
        "n": m.n(),
        "modes": listed,
        "ecqs": ecqs_possible(&m),
        "h0_in_span": h0_in_span(&m, &basis),
    });
    Ok(Run { primary: to_json(&report), seed: None })
}

fn load_pair(ctx: &mut Context, model: &Path, code: &Path) -> Result<(NoiseModel, Code), CliError> {
    let m: NoiseModel = ctx.load(model, "noise model")?;
    let c: Code = ctx.load(code, "code")?;
    if c.n() != m.n() {
        return Err(ecqs::Error::Dimension(format!("code has {} qubits, model has {}", c.n(), m.n())).into());
    }
    Ok((m, c))
}

fn check(ctx: &mut Context, model: &Path, code: &Path) -> Result<Run, CliError> {
    let (m, c) = load_pair(ctx, model, code)?;
    let modes = jump_modes(&m);
    let kl = kl_report(&c, &modes);
    let report = json!({
        "kl": kl,
        "f_tot": f_tot(&c, &lindblad_span_basis(&modes)),
        "f_g": f_g(&c, &m),
        "effective": effective_model(&c, &m)?,
    });
    Ok(Run { primary: to_json(&report), seed: None })
}

fn search(ctx: &mut Context, a: &crate::SearchArgs) -> Result<Run, CliError> {
    let m: NoiseModel = ctx.load(&a.model, "noise model")?;
    let cfg = SearchConfig {
        eps: a.eps,
        gain_min: a.gain_min,
        restarts: a.restarts,
        seed: a.seed,
        ..SearchConfig::default()
    };
    let result = search_code(&m, &cfg)?;
    if let (Some(path), Some(code)) = (&a.code_out, &result.code) {
        write_atomic(path, &to_json(code))?;
    }
    Ok(Run { primary: to_json(&result), seed: Some(a.seed) })
}

fn scan(a: &crate::ScanArgs) -> Result<Run, CliError> {
    let cfg = SearchConfig {
        eps: a.eps,
        gain_min: a.gain_min,
        restarts: a.restarts,
        seed: a.seed,
        ..SearchConfig::default()
    };
    let rows = match a.jobs {
        Some(0) => return Err(CliError::validation("--jobs must be at least 1")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| CliError::validation(format!("cannot start worker pool: {e}")))?
            .install(|| scan_surface(a.grid, &cfg))?,
        None => scan_surface(a.grid, &cfg)?,
    };
    let mut s = format!(
        "# scan grid={} eps={} gain_min={} restarts={} seed={} version={VERSION}\nc12,c23,c13,class,f_tot,f_g,evaluations\n",
        a.grid, a.eps, a.gain_min, a.restarts, a.seed
    );
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", r.c12, r.c23, r.c13, r.class, r.f_tot, r.f_g, r.evaluations);
    }
    Ok(Run { primary: s.into_bytes(), seed: Some(a.seed) })
}

fn simulate(ctx: &mut Context, a: &crate::SimulateArgs) -> Result<Run, CliError> {
    let (m, code) = load_pair(ctx, &a.model, &a.code)?;
    let rec: RecoveryChannel = match &a.recovery {
        Some(p) => ctx.load(p, "recovery")?,
        None => RecoveryChannel::for_model(&code, &m, a.eps)?,
    };
    let gen = build_liouvillian(&m)?;
    let rho0 = DensityMatrix::pure(&code.plus_state(a.phi));
    let run = stroboscopic_evolve(&rho0, &gen, &rec, a.dt, a.steps)?;
    let mut s = format!(
        "# simulate dt={} steps={} phi={} t2={} omega0={} branches={} version={VERSION}\ntime,coherence,phase,p0,p1,leakage\n",
        a.dt,
        a.steps,
        a.phi,
        m.t2(),
        m.omega0(),
        rec.branches()
    );
    for sample in run.logical_trace(&code)? {
        let p0 = sample.rho_l[(0, 0)].re;
        let p1 = sample.rho_l[(1, 1)].re;
        let _ = writeln!(s, "{},{},{},{},{},{}", sample.time, sample.coherence, sample.phase, p0, p1, 1.0 - p0 - p1);
    }
    Ok(Run { primary: s.into_bytes(), seed: None })
}

fn sensitivity(a: &crate::SensitivityArgs) -> Result<Run, CliError> {
    if a.gamma_steps == 0 {
        return Err(CliError::validation("--gamma-steps must be at least 1"));
    }
    if !(a.gamma_min <= a.gamma_max) {
        return Err(CliError::validation(format!("--gamma-min {} exceeds --gamma-max {}", a.gamma_min, a.gamma_max)));
    }
    let base = NoiseModel::new(CorrelationMatrix::identity(3)?, a.t2, 1.0)?;
    let t_max = a.t_max.unwrap_or(DEFAULT_T_MAX_T2 * a.t2);
    let grid: Vec<f64> = if a.gamma_steps == 1 {
        vec![a.gamma_min]
    } else {
        let step = (a.gamma_max - a.gamma_min) / (a.gamma_steps - 1) as f64;
        (0..a.gamma_steps).map(|k| a.gamma_min + step * k as f64).collect()
    };
    let rows = compare_schemes_with(&grid, &base, t_max)?;
    let mut s = format!(
        "# sensitivity t2={} t_max={t_max} formula={FORMULA_ID} parallel_qubits=3 version={VERSION}\ngamma,eta_parallel,eta_ghz,eta_active,t_opt_parallel,t_opt_ghz,t_opt_active\n",
        a.t2
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.gamma, r.eta_parallel, r.eta_ghz, r.eta_active, r.t_opt_parallel, r.t_opt_ghz, r.t_opt_active
        );
    }
    Ok(Run { primary: s.into_bytes(), seed: None })
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::validation(format!("invalid {what} '{s}'"))))
        .collect()
}

fn parse_pairs(raw: &str) -> Result<Vec<(usize, usize)>, CliError> {
    let items: Vec<String> = parse_list(raw, "pair")?;
    if items.is_empty() {
        return Err(CliError::validation("--pairs is empty"));
    }
    items
        .iter()
        .map(|p| {
            let (i, j) = p.split_once('-').ok_or_else(|| CliError::validation(format!("pair '{p}' is not of the form i-j")))?;
            let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| CliError::validation(format!("invalid pair '{p}'")));
            Ok((parse(i)?, parse(j)?))
        })
        .collect()
}

fn estimate(ctx: &mut Context, a: &crate::EstimateArgs) -> Result<Run, CliError> {
    let m: NoiseModel = ctx.load(&a.model, "noise model")?;
    let pairs = parse_pairs(&a.pairs)?;
    let ts: Vec<f64> = parse_list(&a.t_samples, "sample time")?;
    let estimates = pairs
        .iter()
        .map(|&(i, j)| estimate_correlation(i, j, &m, &ts))
        .collect::<ecqs::Result<Vec<_>>>()?;
    Ok(Run { primary: to_json(&estimates), seed: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_and_lists() {
        assert_eq!(parse_pairs("0-1, 1-2").unwrap(), vec![(0, 1), (1, 2)]);
        assert!(parse_pairs("01").is_err());
        assert!(parse_pairs("").is_err());
        assert_eq!(parse_list::<f64>("0,0.5, 1", "t").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_list::<f64>("0,x", "t").is_err());
    }

    #[test]
    fn error_codes() {
        let num: CliError = ecqs::Error::Consistency("x".into()).into();
        assert_eq!(num.exit_code(), 2);
        let val: CliError = ecqs::Error::Validation("x".into()).into();
        assert_eq!(val.exit_code(), 1);
        assert_eq!(CliError::usage("x").exit_code(), 1);
    }
}
