//! Numerical search for sensing codes and classification of correlation matrices.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{f_diagonal, f_g, f_tot, kl_report, Code};
use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::noise::{det3, jump_modes, lindblad_span_basis, singular_c13, CorrelationMatrix, NoiseModel};
use crate::optimize::{bfgs, BfgsOptions};

/// Largest register the search accepts.
pub const SEARCH_MAX_QUBITS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Accept when `F_tot ≤ eps²`.
    pub eps: f64,
    /// Accept only when `F_G > gain_min²`.
    pub gain_min: f64,
    /// Total number of local solves.
    pub restarts: usize,
    /// Iteration cap per local solve.
    pub local_iters: usize,
    pub seed: u64,
    /// Number of ×10 ramps of the gain-penalty weight.
    pub penalty_rounds: usize,
    pub hop_sigma: f64,
    pub temperature: f64,
    /// Extra hops spent looking for a decoherence-free code after the first active one.
    pub dfs_hops: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            gain_min: 0.1,
            restarts: 200,
            local_iters: 500,
            seed: 0,
            penalty_rounds: 3,
            hop_sigma: 0.3,
            temperature: 0.1,
            dfs_hops: 10,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Validation(format!("eps = {} must be positive", self.eps)));
        }
        if !(self.gain_min >= 0.0) || !self.gain_min.is_finite() {
            return Err(Error::Validation(format!("gain_min = {} must be non-negative", self.gain_min)));
        }
        if self.restarts == 0 {
            return Err(Error::Validation("restarts must be at least 1".into()));
        }
        if self.local_iters == 0 || self.penalty_rounds == 0 {
            return Err(Error::Validation("local_iters and penalty_rounds must be at least 1".into()));
        }
        if !(self.hop_sigma > 0.0) || !(self.temperature > 0.0) {
            return Err(Error::Validation("hop_sigma and temperature must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classification {
    Dfs,
    Active,
    None,
    Invalid,
}

impl Classification {
    pub fn is_found(self) -> bool {
        matches!(self, Classification::Dfs | Classification::Active)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Dfs => "DFS",
            Classification::Active => "ACTIVE",
            Classification::None => "NONE",
            Classification::Invalid => "INVALID",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchResult {
    pub found: bool,
    pub code: Option<Code>,
    /// For an unsuccessful search, the values at the best point visited.
    pub f_tot: f64,
    pub f_g: f64,
    pub classification: Classification,
    pub evaluations: u64,
}

/// Penalized objective over the raw parameter vector
/// `[Re a, Im a, Re b, Im b]`.
struct Merit {
    dim: usize,
    span: Vec<Vec<f64>>,
    signal: Vec<f64>,
    /// Diagonals of the non-vanishing jump operators.
    modes: Vec<Vec<f64>>,
    gain_min_sq: f64,
    kappa: f64,
}

struct Eval {
    merit: f64,
    grad: Vec<f64>,
}

impl Merit {
    fn new(m: &NoiseModel, cfg: &SearchConfig) -> Self {
        let modes = jump_modes(m);
        let basis = lindblad_span_basis(&modes);
        Self {
            dim: 1 << m.n(),
            span: basis.diagonals()[1..].to_vec(),
            signal: m.signal_generator_diagonal(),
            modes: modes.iter().filter(|md| !md.is_zero()).map(|md| md.diagonal().to_vec()).collect(),
            gain_min_sq: cfg.gain_min * cfg.gain_min,
            kappa: 1e-3,
        }
    }

    fn split(&self, p: &[f64]) -> (Vec<C64>, Vec<C64>) {
        let d = self.dim;
        let a = (0..d).map(|i| C64::new(p[i], p[d + i])).collect();
        let b = (0..d).map(|i| C64::new(p[2 * d + i], p[3 * d + i])).collect();
        (a, b)
    }

    /// Orthonormal codewords `(x, y)` plus the intermediates needed for gradients.
    fn codewords(&self, a: &[C64], b: &[C64]) -> Option<Frame> {
        let na = norm(a);
        if !(na > 1e-12) {
            return None;
        }
        let x: Vec<C64> = a.iter().map(|z| z / na).collect();
        let c = inner(&x, b);
        let yp: Vec<C64> = b.iter().zip(&x).map(|(bi, xi)| bi - xi * c).collect();
        let ny = norm(&yp);
        if !(ny > 1e-12 * norm(b).max(1e-300)) || !(ny > 1e-300) {
            return None;
        }
        let y = yp.iter().map(|z| z / ny).collect();
        Some(Frame { na, ny, c, x, y })
    }

    /// `F_tot` plus the gain penalty. With `dfs` set, also the codeword
    /// variances of every jump operator, which vanish only on a
    /// decoherence-free code.
    fn evaluate(&self, p: &[f64], mu: f64, dfs: bool) -> Eval {
        let d = self.dim;
        let (a, b) = self.split(p);
        let Some(fr) = self.codewords(&a, &b) else {
            return Eval { merit: f64::INFINITY, grad: vec![0.0; 4 * d] };
        };
        let mut gx = vec![C64::new(0.0, 0.0); d];
        let mut gy = vec![C64::new(0.0, 0.0); d];
        let mut total = 0.0;
        for e in &self.span {
            let (fe, pe, qe) = f_diagonal(&fr.x, &fr.y, e);
            total += fe;
            accumulate(&mut gx, &mut gy, &fr.x, &fr.y, e, pe, qe, 1.0);
        }
        if dfs {
            for e in &self.modes {
                total += variance(&fr.x, e, &mut gx) + variance(&fr.y, e, &mut gy);
            }
        }
        let (fg, pg, qg) = f_diagonal(&fr.x, &fr.y, &self.signal);
        let short = (self.gain_min_sq - fg).max(0.0);
        total += mu * short * short;
        if short > 0.0 {
            accumulate(&mut gx, &mut gy, &fr.x, &fr.y, &self.signal, pg, qg, -2.0 * mu * short);
        }

        // Back through y = normalize(b − x x†b).
        let gyp = project_out(&gy, &fr.y, fr.ny);
        let xg = inner(&fr.x, &gyp);
        let mut ga: Vec<C64> = vec![C64::new(0.0, 0.0); d];
        let mut gb: Vec<C64> = gyp.iter().zip(&fr.x).map(|(g, xi)| g - xi * xg).collect();
        let gyp_x = inner(&gyp, &fr.x);
        for i in 0..d {
            gx[i] += -fr.c.conj() * gyp[i] - b[i] * gyp_x;
        }
        // Back through x = a/|a|.
        let gx_a = project_out(&gx, &fr.x, fr.na);
        for i in 0..d {
            ga[i] += gx_a[i];
        }

        let na2 = fr.na * fr.na;
        let nb2 = norm(&b).powi(2);
        let s = inner(&a, &b);
        total += self.kappa * ((na2 - 1.0).powi(2) + (nb2 - 1.0).powi(2) + s.norm_sqr());
        for i in 0..d {
            ga[i] += a[i] * (4.0 * self.kappa * (na2 - 1.0)) + b[i] * s.conj() * (2.0 * self.kappa);
            gb[i] += b[i] * (4.0 * self.kappa * (nb2 - 1.0)) + a[i] * s * (2.0 * self.kappa);
        }

        let mut grad = vec![0.0; 4 * d];
        for i in 0..d {
            grad[i] = ga[i].re;
            grad[d + i] = ga[i].im;
            grad[2 * d + i] = gb[i].re;
            grad[3 * d + i] = gb[i].im;
        }
        Eval { merit: total, grad }
    }

    fn code(&self, p: &[f64]) -> Option<Code> {
        let (a, b) = self.split(p);
        let fr = self.codewords(&a, &b)?;
        Code::orthonormalized(CVector::from_vec(fr.x), CVector::from_vec(fr.y)).ok()
    }
}

struct Frame {
    na: f64,
    ny: f64,
    c: C64,
    x: Vec<C64>,
    y: Vec<C64>,
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ conj(u_i) v_i`.
fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// `⟨e²⟩ − ⟨e⟩²` in state `v`, adding its gradient to `g`.
fn variance(v: &[C64], e: &[f64], g: &mut [C64]) -> f64 {
    let mean: f64 = v.iter().zip(e).map(|(z, w)| z.norm_sqr() * w).sum();
    let sq: f64 = v.iter().zip(e).map(|(z, w)| z.norm_sqr() * w * w).sum();
    for ((gi, z), w) in g.iter_mut().zip(v).zip(e) {
        *gi += z * (2.0 * (w * w - 2.0 * mean * w));
    }
    sq - mean * mean
}

/// Gradient through `u = w/|w|` given the gradient in `u`.
fn project_out(g: &[C64], u: &[C64], scale: f64) -> Vec<C64> {
    let r = inner(u, g).re;
    g.iter().zip(u).map(|(gi, ui)| (gi - ui * r) / scale).collect()
}

/// Adds `weight · ∇F_E` with respect to the codewords.
#[allow(clippy::too_many_arguments)]
fn accumulate(gx: &mut [C64], gy: &mut [C64], x: &[C64], y: &[C64], e: &[f64], p: f64, q: C64, weight: f64) {
    for b in 0..e.len() {
        let w = 4.0 * weight * e[b];
        gx[b] += (x[b] * p + y[b] * q.conj() * 2.0) * w;
        gy[b] += (-y[b] * p + x[b] * q * 2.0) * w;
    }
}

/// Outcome of one penalty-ramped local solve.
struct Candidate {
    params: Vec<f64>,
    merit: f64,
    f_tot: f64,
    f_g: f64,
}

struct Searcher<'a> {
    model: &'a NoiseModel,
    cfg: &'a SearchConfig,
    merit: Merit,
    evaluations: u64,
}

impl<'a> Searcher<'a> {
    fn local_solve(&mut self, start: Vec<f64>, dfs: bool) -> Candidate {
        let target = 1e-2 * self.cfg.eps * self.cfg.eps;
        let mut x = start;
        let mut mu = 1.0;
        let mut merit = f64::INFINITY;
        for round in 0..self.cfg.penalty_rounds {
            if round > 0 {
                mu *= 10.0;
            }
            let opts = BfgsOptions { max_iters: self.cfg.local_iters, target, grad_tol: 1e-14 };
            let merit_fn = &self.merit;
            let r = bfgs(
                |p| {
                    let e = merit_fn.evaluate(p, mu, dfs);
                    (e.merit, e.grad)
                },
                x,
                opts,
            );
            self.evaluations += r.evaluations;
            x = r.x;
            merit = r.value;
            let (ft, fg) = self.scores(&x);
            if fg > self.merit.gain_min_sq || ft > target {
                break;
            }
        }
        let (f_tot, f_g) = self.scores(&x);
        Candidate { params: x, merit, f_tot, f_g }
    }

    fn scores(&self, p: &[f64]) -> (f64, f64) {
        let (a, b) = self.merit.split(p);
        match self.merit.codewords(&a, &b) {
            Some(fr) => {
                let ft: f64 = self.merit.span.iter().map(|e| f_diagonal(&fr.x, &fr.y, e).0).sum();
                (ft, f_diagonal(&fr.x, &fr.y, &self.merit.signal).0)
            }
            None => (f64::INFINITY, 0.0),
        }
    }

    /// Replaces the two kets in `p` by their orthonormalized versions.
    fn reorthonormalize(&self, p: &mut [f64]) {
        let d = self.merit.dim;
        let (a, b) = self.merit.split(p);
        if let Some(fr) = self.merit.codewords(&a, &b) {
            for i in 0..d {
                p[i] = fr.x[i].re;
                p[d + i] = fr.x[i].im;
                p[2 * d + i] = fr.y[i].re;
                p[3 * d + i] = fr.y[i].im;
            }
        }
    }

    fn accepts(&self, cand: &Candidate) -> bool {
        cand.f_tot <= self.cfg.eps * self.cfg.eps && cand.f_g > self.merit.gain_min_sq
    }

    /// Keeps the candidate if it is acceptable and improves on what was found so far.
    fn consider(&self, cand: &Candidate, accepted: &mut Option<(Code, Classification)>) {
        if !self.accepts(cand) {
            return;
        }
        let Some(code) = self.merit.code(&cand.params) else {
            return;
        };
        let code = code.phase_fixed();
        let class = self.classify(&code);
        let better = match accepted {
            None => true,
            Some((_, Classification::Active)) => class == Classification::Dfs,
            Some(_) => false,
        };
        if better {
            *accepted = Some((code, class));
        }
    }

    fn classify(&self, code: &Code) -> Classification {
        if kl_report(code, &jump_modes(self.model)).dfs {
            Classification::Dfs
        } else {
            Classification::Active
        }
    }
}

/// Basin-hopping search for a code with `F_tot ≤ eps²` and `F_G > gain_min²`.
///
/// Stops at the first decoherence-free code. After the first active code it
/// spends `dfs_hops` more local solves around it on a merit that also
/// penalizes the codeword variance of each jump operator, in case a
/// decoherence-free code exists.
pub fn search_code(m: &NoiseModel, cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    if m.n() > SEARCH_MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "code search supports at most {SEARCH_MAX_QUBITS} qubits, model has {}",
            m.n()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = Searcher { model: m, cfg, merit: Merit::new(m, cfg), evaluations: 0 };
    let len = 4 * s.merit.dim;

    let mut start: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    s.reorthonormalize(&mut start);
    let first = s.local_solve(start, false);
    let energy = |c: &Candidate| (c.merit + 1e-300).ln();
    let mut center = first.params.clone();
    let mut center_energy = energy(&first);
    let mut best = (first.f_tot, first.f_g, first.merit);
    let mut accepted: Option<(Code, Classification)> = None;
    let mut hops_left: Option<usize> = None;

    s.consider(&first, &mut accepted);

    for _ in 1..cfg.restarts {
        match (&accepted, hops_left) {
            (Some((_, Classification::Dfs)), _) => break,
            (Some((code, _)), None) => {
                hops_left = Some(cfg.dfs_hops);
                // Refine around the active code with the variance-augmented merit.
                center = code_params(code);
                center_energy = f64::INFINITY;
            }
            _ => {}
        }
        if let Some(h) = hops_left.as_mut() {
            if *h == 0 {
                break;
            }
            *h -= 1;
        }
        let mut proposal: Vec<f64> = center
            .iter()
            .map(|v| v + cfg.hop_sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        s.reorthonormalize(&mut proposal);
        let cand = s.local_solve(proposal, hops_left.is_some());
        if cand.merit < best.2 {
            best = (cand.f_tot, cand.f_g, cand.merit);
        }
        s.consider(&cand, &mut accepted);
        let e = energy(&cand);
        let u: f64 = rng.random();
        if e <= center_energy || u < (-(e - center_energy) / cfg.temperature).exp() {
            center = cand.params;
            center_energy = e;
        }
    }

    let basis = lindblad_span_basis(&jump_modes(m));
    Ok(match accepted {
        Some((code, classification)) => SearchResult {
            found: true,
            f_tot: f_tot(&code, &basis),
            f_g: f_g(&code, m),
            code: Some(code),
            classification,
            evaluations: s.evaluations,
        },
        None => SearchResult {
            found: false,
            code: None,
            f_tot: best.0,
            f_g: best.1,
            classification: Classification::None,
            evaluations: s.evaluations,
        },
    })
}

fn code_params(code: &Code) -> Vec<f64> {
    let (x, y) = (code.ket0().amplitudes(), code.ket1().amplitudes());
    let mut p: Vec<f64> = x.iter().map(|z| z.re).collect();
    p.extend(x.iter().map(|z| z.im));
    p.extend(y.iter().map(|z| z.re));
    p.extend(y.iter().map(|z| z.im));
    p
}

/// Model used for correlation-space scans: uniform couplings, `T₂ = ω₀ = 1`.
pub fn triple_model(c12: f64, c23: f64, c13: f64) -> Result<NoiseModel> {
    NoiseModel::new(CorrelationMatrix::triple(c12, c23, c13)?, 1.0, 1.0)
}

/// Search result for one three-qubit correlation matrix.
pub fn classify_point_detailed(c12: f64, c23: f64, c13: f64, cfg: &SearchConfig) -> Result<SearchResult> {
    match triple_model(c12, c23, c13) {
        Ok(m) => search_code(&m, cfg),
        Err(Error::Validation(_)) => Ok(SearchResult {
            found: false,
            code: None,
            f_tot: f64::NAN,
            f_g: f64::NAN,
            classification: Classification::Invalid,
            evaluations: 0,
        }),
        Err(e) => Err(e),
    }
}

pub fn classify_point(c12: f64, c23: f64, c13: f64, cfg: &SearchConfig) -> Result<Classification> {
    classify_point_detailed(c12, c23, c13, cfg).map(|r| r.classification)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub c12: f64,
    pub c23: f64,
    pub c13: f64,
    pub class: Classification,
    pub f_tot: f64,
    pub f_g: f64,
    pub evaluations: u64,
}

impl ScanRow {
    pub fn max_off_diagonal(&self) -> f64 {
        self.c12.max(self.c23).max(self.c13)
    }

    pub fn determinant(&self) -> f64 {
        det3(self.c12, self.c23, self.c13)
    }
}

/// Points of the singular surface over a uniform `(c12, c23)` grid, row-major
/// with `c12` outermost; a double root appears once.
pub fn surface_points(grid_points: usize) -> Result<Vec<(f64, f64, f64)>> {
    if grid_points < 5 {
        return Err(Error::Validation(format!("grid needs at least 5 points per axis, got {grid_points}")));
    }
    let step = 2.0 / (grid_points - 1) as f64;
    let axis: Vec<f64> = (0..grid_points)
        .map(|k| if k + 1 == grid_points { 1.0 } else { -1.0 + step * k as f64 })
        .collect();
    let mut pts = Vec::new();
    for &c12 in &axis {
        for &c23 in &axis {
            let roots = singular_c13(c12, c23);
            for (i, &r) in roots.iter().enumerate() {
                if i > 0 && r == roots[0] {
                    continue;
                }
                pts.push((c12, c23, r));
            }
        }
    }
    Ok(pts)
}

/// Classifies every singular correlation matrix on the grid.
///
/// Points are independent and run on the current rayon pool; the output
/// order does not depend on the pool size.
pub fn scan_surface(grid_points: usize, cfg: &SearchConfig) -> Result<Vec<ScanRow>> {
    cfg.validate()?;
    let pts = surface_points(grid_points)?;
    pts.par_iter()
        .enumerate()
        .map(|(idx, &(c12, c23, c13))| {
            let point_cfg = SearchConfig { seed: cfg.seed ^ idx as u64, ..cfg.clone() };
            let r = classify_point_detailed(c12, c23, c13, &point_cfg)?;
            Ok(ScanRow { c12, c23, c13, class: r.classification, f_tot: r.f_tot, f_g: r.f_g, evaluations: r.evaluations })
        })
        .collect()
}
