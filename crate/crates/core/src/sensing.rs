//! Sensitivity of encoded and unencoded Ramsey sensing, and estimation of
//! pair correlations from GHZ-pair decay.
//!
//! Sensitivity uses the shot-noise-limited slope form
//! `η(t) = exp(Γ t) / (A √t)` for a single (logical) qubit whose coherence
//! decays at rate `Γ` while accumulating phase at `A` times the bare rate.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{effective_model, Code};
use crate::dynamics::{build_liouvillian, evolve, stroboscopic_evolve, DENSE_MAX_QUBITS};
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, StateVector};
use crate::noise::{CorrelationMatrix, NoiseModel};
use crate::recovery::{RecoveryChannel, DEFAULT_EPS};

/// Identifier written into output metadata.
pub const FORMULA_ID: &str = "eta=exp(gamma*t)/(gain*sqrt(t))";
/// Default cap on the interrogation time, in units of `T2`.
pub const DEFAULT_T_MAX_T2: f64 = 100.0;
/// Recovery period for cross-checking logical rates, in units of `T2`.
pub const CROSS_CHECK_DT_T2: f64 = 1e-3;
/// Relative tolerance of the logical-rate cross-check.
pub const CROSS_CHECK_TOL: f64 = 0.05;

/// Optimal sensitivity and interrogation time.
///
/// Returns `(η, t_opt)` with `t_opt = min(1/(2Γ), t_max)`.
pub fn sensitivity(gamma_eff: f64, gain: f64, t_max: f64) -> Result<(f64, f64)> {
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(Error::Validation(format!("gain {gain} must be positive: code is insensitive to the signal")));
    }
    if !(gamma_eff >= 0.0) || !gamma_eff.is_finite() {
        return Err(Error::Validation(format!("decay rate {gamma_eff} must be non-negative")));
    }
    if !(t_max > 0.0) {
        return Err(Error::Validation(format!("t_max = {t_max} must be positive")));
    }
    let t_opt = if gamma_eff > 0.0 { (0.5 / gamma_eff).min(t_max) } else { t_max };
    if !t_opt.is_finite() {
        return Err(Error::Validation("noiseless sensing needs a finite t_max".into()));
    }
    Ok(((gamma_eff * t_opt).exp() / (gain * t_opt.sqrt()), t_opt))
}

/// Sensitivities of three schemes at one correlation strength.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSensitivity {
    pub gamma: f64,
    pub eta_parallel: f64,
    pub eta_ghz: f64,
    pub eta_active: f64,
    pub t_opt_parallel: f64,
    pub t_opt_ghz: f64,
    pub t_opt_active: f64,
}

/// [`compare_schemes_with`] with `t_max = 100 T2`.
pub fn compare_schemes(gamma_grid: &[f64], m_base: &NoiseModel) -> Result<Vec<SchemeSensitivity>> {
    compare_schemes_with(gamma_grid, m_base, DEFAULT_T_MAX_T2 * m_base.t2())
}

/// Parallel, GHZ and actively corrected sensing on three qubits with
/// `c_ij = −γ/2`, taking `T2` and `ω0` from `m_base`.
///
/// The active scheme uses the single-excitation code in the limit of
/// continuous recovery.
pub fn compare_schemes_with(gamma_grid: &[f64], m_base: &NoiseModel, t_max: f64) -> Result<Vec<SchemeSensitivity>> {
    if let Some(g) = gamma_grid.iter().find(|g| !(0.0..1.0).contains(*g)) {
        return Err(Error::Validation(format!("gamma {g} outside [0, 1)")));
    }
    let (t2, omega0) = (m_base.t2(), m_base.omega0());
    let ghz = Code::ghz(3)?;
    let active = Code::single_excitation(3)?;
    gamma_grid
        .par_iter()
        .map(|&gamma| {
            let m = NoiseModel::new(CorrelationMatrix::anti_correlated_triple(gamma)?, t2, omega0)?;
            let (eta_p, t_p) = sensitivity(1.0 / t2, 1.0, t_max)?;
            let g = effective_model(&ghz, &m)?;
            let (eta_g, t_g) = sensitivity(g.gamma_eff, g.gain, t_max)?;
            let a = effective_model(&active, &m)?;
            let (eta_a, t_a) = sensitivity(a.gamma_eff, a.gain, t_max)?;
            Ok(SchemeSensitivity {
                gamma,
                eta_parallel: eta_p / 3f64.sqrt(),
                eta_ghz: eta_g,
                eta_active: eta_a,
                t_opt_parallel: t_p,
                t_opt_ghz: t_g,
                t_opt_active: t_a,
            })
        })
        .collect()
}

/// Pair correlation recovered from GHZ-pair decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub i: usize,
    pub j: usize,
    pub gamma_ij_fit: f64,
    pub c_hat: f64,
    pub stderr: f64,
}

/// Least-squares line `y = a + b x`; returns `(a, b, stderr of b)`.
fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("sample times must not all coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let stderr = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok((a, b, stderr))
}

/// Decay rate of `values(t) ∝ exp(−Γ t)`, with its standard error.
fn fit_decay(times: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    if let Some((t, v)) = times.iter().zip(values).find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit(format!("coherence {v:e} at t = {t} is not positive")));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (_, slope, stderr) = linear_fit(times, &logs)?;
    Ok((-slope, stderr))
}

/// Estimates `c_ij` from the decay of `(|0_i 0_j⟩ + |1_i 1_j⟩)/√2` under the
/// pair's reduced model, using `Γ_ij = (2/T2)(1 + c_ij)`.
///
/// Indices are zero-based. Sampling is noiseless.
pub fn estimate_correlation(i: usize, j: usize, m_true: &NoiseModel, t_samples: &[f64]) -> Result<CorrelationEstimate> {
    let n = m_true.n();
    if i >= n || j >= n || i == j {
        return Err(Error::Validation(format!("pair ({i}, {j}) invalid for {n} qubits")));
    }
    if t_samples.len() < 4 {
        return Err(Error::Validation(format!("need at least 4 sample times, got {}", t_samples.len())));
    }
    if let Some(t) = t_samples.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::Validation(format!("sample time {t} must be finite and non-negative")));
    }
    let c = m_true.corr().get(i, j);
    let sub = DMatrix::from_row_slice(2, 2, &[1.0, c, c, 1.0]);
    let corr = if m_true.corr().is_generalized() {
        CorrelationMatrix::generalized(sub)?
    } else {
        CorrelationMatrix::validate(sub)?
    };
    let h = vec![m_true.h()[i], m_true.h()[j]];
    let pair = NoiseModel::with_couplings(corr, m_true.t2(), m_true.omega0(), h)?;
    let gen = build_liouvillian(&pair)?;
    let rho0 = DensityMatrix::pure(&StateVector::uniform(&["00", "11"])?);
    let coherence = t_samples
        .iter()
        .map(|&t| evolve(&rho0, &gen, t).map(|rho| rho.matrix()[(0, 3)].norm()))
        .collect::<Result<Vec<f64>>>()?;
    let (rate, rate_err) = fit_decay(t_samples, &coherence)?;
    let t2 = m_true.t2();
    Ok(CorrelationEstimate { i, j, gamma_ij_fit: rate, c_hat: rate * t2 / 2.0 - 1.0, stderr: rate_err * t2 / 2.0 })
}

/// Logical dephasing rate and signal gain of `code` under `m`.
///
/// The rate from the effective model is checked against the decay of the
/// logical coherence under stroboscopic recovery with period `1e-3 T2`.
/// The check is skipped above [`DENSE_MAX_QUBITS`] qubits.
pub fn logical_rates(code: &Code, m: &NoiseModel) -> Result<(f64, f64)> {
    let em = effective_model(code, m)?;
    if m.n() > DENSE_MAX_QUBITS {
        return Ok((em.gamma_eff, em.gain));
    }
    let t2 = m.t2();
    let dt = CROSS_CHECK_DT_T2 * t2;
    let horizon = if em.gamma_eff > 0.0 { (1.0 / em.gamma_eff).min(10.0 * t2) } else { t2 };
    let steps = ((horizon / dt).round() as usize).max(4);
    let rec = RecoveryChannel::for_model(&em.code, m, DEFAULT_EPS)?;
    let gen = build_liouvillian(m)?;
    let rho0 = DensityMatrix::pure(&em.code.plus_state(0.0));
    let run = stroboscopic_evolve(&rho0, &gen, &rec, dt, steps)?;
    let trace = run.logical_trace(&em.code)?;
    let times: Vec<f64> = trace.iter().map(|s| s.time).collect();
    let coh: Vec<f64> = trace.iter().map(|s| s.coherence).collect();
    let (simulated, _) = fit_decay(&times, &coh)?;
    let floor = CROSS_CHECK_TOL * em.gamma_eff.max(0.1 / t2);
    if (simulated - em.gamma_eff).abs() > floor {
        return Err(Error::Consistency(format!(
            "logical rate {:.6e} disagrees with simulated decay {:.6e}",
            em.gamma_eff, simulated
        )));
    }
    Ok((em.gamma_eff, em.gain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn base(t2: f64) -> NoiseModel {
        NoiseModel::new(CorrelationMatrix::identity(3).unwrap(), t2, 1.0).unwrap()
    }

    fn gamma_model(gamma: f64) -> NoiseModel {
        NoiseModel::new(CorrelationMatrix::anti_correlated_triple(gamma).unwrap(), 1.0, 1.0).unwrap()
    }

    #[test]
    fn closed_form_optimum() {
        let t2 = 2.0;
        let (eta, t) = sensitivity(1.0 / t2, 1.0, 1e12).unwrap();
        assert!((t - t2 / 2.0).abs() < 1e-12);
        assert!((eta - (2.0 * E / t2).sqrt()).abs() < 1e-12);
        // Brute-force check of the minimum.
        let brute = (1..20000)
            .map(|k| k as f64 * 1e-3)
            .map(|s| (s / t2).exp() / s.sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(eta <= brute + 1e-12 && brute - eta < 1e-6);
    }

    #[test]
    fn noiseless_and_scaling() {
        let (eta, t) = sensitivity(0.0, 1.0, 10.0).unwrap();
        assert_eq!(t, 10.0);
        assert!((eta - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        let (a, _) = sensitivity(0.3, 1.0, 100.0).unwrap();
        let (b, _) = sensitivity(0.3, 2.0, 100.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-14);
        let (_, capped) = sensitivity(0.001, 1.0, 5.0).unwrap();
        assert_eq!(capped, 5.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(sensitivity(1.0, 0.0, 1.0), Err(Error::Validation(_))));
        assert!(matches!(sensitivity(1.0, -1.0, 1.0), Err(Error::Validation(_))));
        assert!(sensitivity(-1.0, 1.0, 1.0).is_err());
        assert!(sensitivity(1.0, 1.0, 0.0).is_err());
        assert!(sensitivity(0.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn monotone_on_grid() {
        let t_max = 50.0;
        for gi in 0..10 {
            let g = gi as f64 * 0.2;
            for ai in 1..10 {
                let a = ai as f64 * 0.3;
                let (e, _) = sensitivity(g, a, t_max).unwrap();
                let (e_gain, _) = sensitivity(g, a + 0.3, t_max).unwrap();
                let (e_rate, _) = sensitivity(g + 0.2, a, t_max).unwrap();
                assert!(e_gain <= e && e_rate >= e);
            }
        }
    }

    #[test]
    fn schemes_match_closed_forms() {
        let t2 = 1.5;
        let rows = compare_schemes(&[0.0, 0.25, 0.5, 0.75, 0.9], &base(t2)).unwrap();
        for r in &rows {
            let expected_parallel = (2.0 * E / (3.0 * t2)).sqrt();
            assert!((r.eta_parallel - expected_parallel).abs() < 1e-12);
            assert!((r.eta_active / r.eta_ghz - 1.0).abs() < 1e-9, "{r:?}");
            assert!((r.eta_active / r.eta_parallel - (1.0 - r.gamma).sqrt()).abs() < 1e-9);
            assert!((r.t_opt_active - 3.0 * t2 / (2.0 * (1.0 - r.gamma))).abs() < 1e-9);
        }
        assert!((rows[0].eta_active - rows[0].eta_parallel).abs() < 1e-12);
    }

    #[test]
    fn schemes_reject_gamma_one() {
        assert!(compare_schemes(&[0.5, 1.0], &base(1.0)).is_err());
    }

    #[test]
    fn fit_recovers_exponential() {
        let ts: Vec<f64> = (0..8).map(|k| k as f64 * 0.25).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 0.5 * (-1.7 * t).exp()).collect();
        let (rate, err) = fit_decay(&ts, &ys).unwrap();
        assert!((rate - 1.7).abs() < 1e-12 && err < 1e-10);
        let bad = [1.0, 0.5, 0.0, 0.1];
        assert!(matches!(fit_decay(&ts[..4], &bad), Err(Error::Fit(_))));
    }

    #[test]
    fn correlation_fixtures() {
        let ts: Vec<f64> = (0..6).map(|k| k as f64 * 0.2).collect();
        for (c, rate) in [(-0.5, 1.0), (-1.0, 0.0), (1.0, 4.0)] {
            let corr = CorrelationMatrix::triple(c, 0.0, 0.0);
            let m = match corr {
                Ok(k) => NoiseModel::new(k, 1.0, 0.7).unwrap(),
                Err(_) => continue,
            };
            let est = estimate_correlation(0, 1, &m, &ts).unwrap();
            assert!((est.gamma_ij_fit - rate).abs() < 1e-8, "{est:?}");
            assert!((est.c_hat - c).abs() < 1e-8);
            assert!(est.c_hat.abs() <= 1.0 + 3.0 * est.stderr + 1e-12);
        }
    }

    #[test]
    fn correlation_pair_of_three() {
        let m = NoiseModel::new(CorrelationMatrix::triple(0.2, -0.4, 0.5).unwrap(), 2.0, 1.0).unwrap();
        let ts = [0.0, 0.3, 0.6, 0.9, 1.2];
        let est = estimate_correlation(1, 2, &m, &ts).unwrap();
        assert!((est.c_hat + 0.4).abs() < 1e-8);
        assert!(estimate_correlation(1, 1, &m, &ts).is_err());
        assert!(estimate_correlation(0, 3, &m, &ts).is_err());
        assert!(estimate_correlation(0, 1, &m, &ts[..3]).is_err());
    }

    #[test]
    fn logical_rate_fixtures() {
        let w = Code::single_excitation(3).unwrap();
        let (rate, gain) = logical_rates(&w, &gamma_model(0.5)).unwrap();
        assert!((rate - 1.0 / 6.0).abs() < 1e-12);
        assert!((gain - 1.0).abs() < 1e-12);
        let (rate, gain) = logical_rates(&Code::ghz(3).unwrap(), &gamma_model(1.0)).unwrap();
        assert!(rate.abs() < 1e-12 && (gain - 3.0).abs() < 1e-12);
        let pair = Code::new(StateVector::basis(2, 0).unwrap(), StateVector::basis(2, 3).unwrap()).unwrap();
        let m = NoiseModel::new(CorrelationMatrix::validate(DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])).unwrap(), 1.0, 1.0)
            .unwrap();
        let (rate, gain) = logical_rates(&pair, &m).unwrap();
        assert!(rate.abs() < 1e-12 && (gain - 2.0).abs() < 1e-12);
    }

    #[test]
    fn uncorrelated_w_code_matches_gamma_zero() {
        let w = Code::single_excitation(3).unwrap();
        let m = NoiseModel::new(CorrelationMatrix::identity(3).unwrap(), 1.0, 1.0).unwrap();
        let (rate, _) = logical_rates(&w, &m).unwrap();
        assert!((rate - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn code_without_recovery_is_rejected() {
        // Either single-qubit Z swaps the Bell codewords up to sign, a logical error.
        let m = NoiseModel::new(CorrelationMatrix::identity(2).unwrap(), 1.0, 1.0).unwrap();
        let code = Code::new(StateVector::uniform(&["00", "11"]).unwrap(), StateVector::uniform(&["01", "10"]).unwrap()).unwrap();
        let r = logical_rates(&code, &m);
        assert!(matches!(r, Err(Error::NotCorrectable(_))), "{r:?}");
    }
}
