//! Transpose recovery channel.
//!
//! The channel measures in `{P_0 = P, P_1, …, P_rest}` and undoes branch `i`
//! with `U_i†`. Outside the error spaces it acts as the identity.

use serde::{Deserialize, Serialize};

use crate::code::{correctable_modes, hermitian_part, kl_report, Code, KlReport};
use crate::dynamics::Superoperator;
use crate::error::{Error, Result};
use crate::linalg::{
    complex_json, hermitian_eig, max_abs, max_abs_diff, polar_isometry, unitary_mapping, CMatrix,
    DensityMatrix,
};
use crate::noise::{jump_modes, JumpMode, NoiseModel};

/// Default KL residual accepted when building a channel.
pub const DEFAULT_EPS: f64 = 1e-5;
/// `M̃` eigenvalues at or below this do not get a correction branch.
pub const BRANCH_THRESHOLD: f64 = 1e-9;
const ORTHOGONALITY_TOL: f64 = 1e-9;
const COMPLETENESS_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRepr", into = "ChannelRepr")]
pub struct RecoveryChannel {
    dim: usize,
    projectors: Vec<CMatrix>,
    unitaries: Vec<CMatrix>,
    d: Vec<f64>,
    code: Option<Code>,
    kraus: Vec<CMatrix>,
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    dim: usize,
    #[serde(with = "complex_json::matrix_list")]
    projectors: Vec<CMatrix>,
    #[serde(with = "complex_json::matrix_list")]
    unitaries: Vec<CMatrix>,
    d: Vec<f64>,
    #[serde(default)]
    code: Option<Code>,
}

impl TryFrom<ChannelRepr> for RecoveryChannel {
    type Error = Error;
    fn try_from(r: ChannelRepr) -> Result<Self> {
        RecoveryChannel::from_parts(r.dim, r.projectors, r.unitaries, r.d, r.code)
    }
}

impl From<RecoveryChannel> for ChannelRepr {
    fn from(r: RecoveryChannel) -> Self {
        ChannelRepr { dim: r.dim, projectors: r.projectors, unitaries: r.unitaries, d: r.d, code: r.code }
    }
}

impl RecoveryChannel {
    /// Channel that leaves every state untouched.
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            projectors: Vec::new(),
            unitaries: Vec::new(),
            d: Vec::new(),
            code: None,
            kraus: vec![CMatrix::identity(dim, dim)],
        }
    }

    /// Validates a measurement-and-correct description and derives its Kraus operators.
    ///
    /// `d` lists the branch weights for `P_1, P_2, …`; `P_0` has none.
    pub fn from_parts(
        dim: usize,
        projectors: Vec<CMatrix>,
        unitaries: Vec<CMatrix>,
        d: Vec<f64>,
        code: Option<Code>,
    ) -> Result<Self> {
        if projectors.len() != unitaries.len() {
            return Err(Error::Validation(format!(
                "{} projectors but {} unitaries",
                projectors.len(),
                unitaries.len()
            )));
        }
        if !projectors.is_empty() && d.len() + 1 != projectors.len() {
            return Err(Error::Validation(format!(
                "{} branch weights for {} correction branches",
                d.len(),
                projectors.len() - 1
            )));
        }
        let id = CMatrix::identity(dim, dim);
        for (i, (p, u)) in projectors.iter().zip(&unitaries).enumerate() {
            if p.shape() != (dim, dim) || u.shape() != (dim, dim) {
                return Err(Error::Dimension(format!("branch {i} has the wrong size")));
            }
            if max_abs_diff(&(p * p), p) > ORTHOGONALITY_TOL || max_abs_diff(p, &p.adjoint()) > ORTHOGONALITY_TOL {
                return Err(Error::Validation(format!("P_{i} is not an orthogonal projector")));
            }
            if max_abs_diff(&(u.adjoint() * u), &id) > ORTHOGONALITY_TOL {
                return Err(Error::Validation(format!("U_{i} is not unitary")));
            }
            for (j, q) in projectors.iter().enumerate().take(i) {
                if max_abs(&(p * q)) > ORTHOGONALITY_TOL {
                    return Err(Error::NotCorrectable(format!("error spaces P_{j} and P_{i} overlap")));
                }
            }
        }
        if let (Some(code), Some(p0)) = (&code, projectors.first()) {
            if code.dim() != dim || max_abs_diff(p0, &code.projector()) > ORTHOGONALITY_TOL {
                return Err(Error::Validation("P_0 is not the code projector".into()));
            }
        }
        let mut kraus: Vec<CMatrix> = projectors.iter().zip(&unitaries).map(|(p, u)| u.adjoint() * p).collect();
        let rest = projectors.iter().fold(id.clone(), |acc, p| acc - p);
        if max_abs(&rest) > ORTHOGONALITY_TOL {
            kraus.push(rest);
        }
        let channel = Self { dim, projectors, unitaries, d, code, kraus };
        let residual = channel.completeness_residual();
        if residual > COMPLETENESS_TOL {
            return Err(Error::NumericalInstability(format!(
                "Kraus completeness residual {residual:.3e}"
            )));
        }
        Ok(channel)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn unitaries(&self) -> &[CMatrix] {
        &self.unitaries
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn code(&self) -> Option<&Code> {
        self.code.as_ref()
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// Number of correction branches besides the code itself.
    pub fn branches(&self) -> usize {
        self.projectors.len().saturating_sub(1)
    }

    /// `I − Σ_i P_i`.
    pub fn residual_projector(&self) -> CMatrix {
        self.projectors.iter().fold(CMatrix::identity(self.dim, self.dim), |acc, p| acc - p)
    }

    /// `‖Σ K†K − I‖_max`.
    pub fn completeness_residual(&self) -> f64 {
        let sum = self.kraus.iter().fold(CMatrix::zeros(self.dim, self.dim), |acc, k| acc + k.adjoint() * k);
        max_abs_diff(&sum, &CMatrix::identity(self.dim, self.dim))
    }

    pub fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        self.kraus.iter().fold(CMatrix::zeros(self.dim, self.dim), |acc, k| acc + k * rho * k.adjoint())
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "state dimension {} does not match channel dimension {}",
                rho.dim(),
                self.dim
            )));
        }
        DensityMatrix::new(self.apply_matrix(rho.matrix()))
            .map_err(|e| Error::NumericalInstability(format!("recovered state invalid: {e}")))
    }

    pub fn superoperator(&self) -> Superoperator {
        self.kraus.iter().fold(Superoperator::zero(self.dim), |acc, k| {
            acc.add(&Superoperator::sandwich(k, &k.adjoint()))
        })
    }

    /// Recovery for `code` under `m`.
    ///
    /// Uses every jump mode when the code satisfies the error-correction
    /// conditions for all of them within `eps`. Otherwise falls back to the
    /// combinations the code can correct, leaving the rest as logical noise.
    pub fn for_model(code: &Code, m: &NoiseModel, eps: f64) -> Result<Self> {
        let modes = jump_modes(m);
        let report = kl_report(code, &modes);
        if report.residual <= eps {
            return build_transpose_recovery(code, &report, &modes, eps);
        }
        let kept = correctable_modes(code, &modes, eps, m.t2())?;
        let report = kl_report(code, &kept);
        build_transpose_recovery(code, &report, &kept, eps)
    }
}

/// Builds the transpose channel from the eigendecomposition of `M̃`.
pub fn build_transpose_recovery(
    code: &Code,
    report: &KlReport,
    modes: &[JumpMode],
    eps: f64,
) -> Result<RecoveryChannel> {
    if report.residual > eps {
        return Err(Error::NotCorrectable(format!(
            "KL residual {:.3e} exceeds tolerance {eps:.1e}",
            report.residual
        )));
    }
    if report.m_tilde.nrows() != modes.len() {
        return Err(Error::Dimension(format!(
            "report covers {} modes but {} were given",
            report.m_tilde.nrows(),
            modes.len()
        )));
    }
    let dim = code.dim();
    let k = code.isometry();
    let id = CMatrix::identity(dim, dim);
    let mut isometries = vec![k.clone()];
    let mut weights = Vec::new();
    if !modes.is_empty() {
        let eig = hermitian_eig(&hermitian_part(&report.m_tilde))?;
        let overlap_tol = ORTHOGONALITY_TOL.max(10.0 * eps);
        for idx in 0..modes.len() {
            let di = eig.values[idx];
            if di <= BRANCH_THRESHOLD {
                continue;
            }
            let mut e = CMatrix::zeros(dim, dim);
            for (j, mode) in modes.iter().enumerate() {
                let shifted = mode.op_dimensionless.matrix() - &id * report.m[(0, j + 1)];
                e += shifted * eig.vectors[(j, idx)];
            }
            let mut q = polar_isometry(&e, &k, di)?;
            for (prev_idx, prev) in isometries.iter().enumerate() {
                let ov = max_abs(&(prev.adjoint() * &q));
                if ov > overlap_tol {
                    return Err(Error::NotCorrectable(format!(
                        "error spaces P_{prev_idx} and P_{} overlap ({ov:.3e})",
                        isometries.len()
                    )));
                }
            }
            for _ in 0..2 {
                for prev in &isometries {
                    let ov = prev.adjoint() * &q;
                    q -= prev * ov;
                }
            }
            q = polar_isometry(&id, &q, 1.0)?;
            isometries.push(q);
            weights.push(di);
        }
    }
    let projectors: Vec<CMatrix> = isometries.iter().map(|q| q * q.adjoint()).collect();
    let unitaries: Vec<CMatrix> = isometries
        .iter()
        .enumerate()
        .map(|(i, q)| if i == 0 { id.clone() } else { unitary_mapping(&k, q) })
        .collect();
    RecoveryChannel::from_parts(dim, projectors, unitaries, weights, Some(code.clone()))
}

/// Convenience wrapper pairing [`kl_report`] with [`build_transpose_recovery`].
pub fn recovery_from_modes(code: &Code, modes: &[JumpMode], eps: f64) -> Result<RecoveryChannel> {
    build_transpose_recovery(code, &kl_report(code, modes), modes, eps)
}
