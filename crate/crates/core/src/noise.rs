//! Spatially correlated dephasing environments.
//!
//! A [`NoiseModel`] couples `n` qubits to a field `ω(x, t) = ω₀ + δω(x, t)`
//! through `H = ½ Σ hᵢ ω(xᵢ, t) Zᵢ`, with white-noise fluctuations whose
//! spatial correlations form the matrix `C`. Diagonalizing `C` gives the
//! quantum-jump modes; a zero eigenvalue whose eigenvector overlaps `h` is
//! what lets an error-correcting code separate signal from noise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_json, from_real, hermitian_eig, z_diagonal, Operator, MAX_QUBITS};

/// Eigenvalues of `C` below this are treated as exactly zero.
pub const ZERO_EIGENVALUE: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Real symmetric positive-semidefinite correlation matrix.
///
/// Strict matrices have unit diagonal and entries in `[-1, 1]`. Generalized
/// matrices (produced by [`rescale_couplings`]) only keep symmetry and PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorrelationRepr", into = "CorrelationRepr")]
pub struct CorrelationMatrix {
    n: usize,
    c: DMatrix<f64>,
    generalized: bool,
}

#[derive(Serialize, Deserialize)]
struct CorrelationRepr {
    n: usize,
    #[serde(with = "complex_json::real_matrix")]
    c: DMatrix<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    generalized: bool,
}

impl TryFrom<CorrelationRepr> for CorrelationMatrix {
    type Error = Error;
    fn try_from(r: CorrelationRepr) -> Result<Self> {
        if r.c.nrows() != r.n {
            return Err(Error::Dimension(format!(
                "declared n = {} but matrix has {} rows",
                r.n,
                r.c.nrows()
            )));
        }
        if r.generalized {
            CorrelationMatrix::generalized(r.c)
        } else {
            CorrelationMatrix::validate(r.c)
        }
    }
}

impl From<CorrelationMatrix> for CorrelationRepr {
    fn from(m: CorrelationMatrix) -> Self {
        CorrelationRepr { n: m.n, c: m.c, generalized: m.generalized }
    }
}

impl CorrelationMatrix {
    /// Checks every invariant of a correlation matrix.
    pub fn validate(c: DMatrix<f64>) -> Result<Self> {
        let n = Self::check_shape(&c)?;
        for i in 0..n {
            if c[(i, i)] != 1.0 {
                return Err(Error::Validation(format!(
                    "diagonal entry c[{i}][{i}] = {} is not 1",
                    c[(i, i)]
                )));
            }
            for j in 0..n {
                if c[(i, j)].abs() > 1.0 {
                    return Err(Error::Validation(format!(
                        "entry c[{i}][{j}] = {} outside [-1, 1]",
                        c[(i, j)]
                    )));
                }
            }
        }
        Self::check_psd(&c)?;
        Ok(Self { n, c, generalized: false })
    }

    /// Symmetric PSD matrix without the unit-diagonal requirement.
    pub fn generalized(c: DMatrix<f64>) -> Result<Self> {
        Self::check_shape(&c)?;
        Self::check_psd(&c)?;
        Ok(Self { n: c.nrows(), c, generalized: true })
    }

    fn check_shape(c: &DMatrix<f64>) -> Result<usize> {
        let n = c.nrows();
        if n != c.ncols() {
            return Err(Error::Dimension(format!("correlation matrix is {}x{}", n, c.ncols())));
        }
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Dimension(format!("{n} qubits outside 1..={MAX_QUBITS}")));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("correlation matrix has non-finite entries".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                if (c[(i, j)] - c[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::Validation(format!(
                        "not symmetric: c[{i}][{j}] = {} but c[{j}][{i}] = {}",
                        c[(i, j)],
                        c[(j, i)]
                    )));
                }
            }
        }
        Ok(n)
    }

    fn check_psd(c: &DMatrix<f64>) -> Result<()> {
        let min = hermitian_eig(&from_real(c))?.values.min();
        if min < -PSD_TOL {
            return Err(Error::Validation(format!(
                "not positive semidefinite: minimum eigenvalue {min:.6e}"
            )));
        }
        Ok(())
    }

    /// `c_ij = c` for every pair `i ≠ j`.
    pub fn uniform(n: usize, off_diagonal: f64) -> Result<Self> {
        Self::validate(DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { off_diagonal }))
    }

    /// Three qubits with `c_ij = −γ/2`, `γ ∈ [0, 1]`.
    pub fn anti_correlated_triple(gamma: f64) -> Result<Self> {
        Self::uniform(3, -gamma / 2.0)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::uniform(n, 0.0)
    }

    /// Three-qubit matrix from its off-diagonal entries.
    pub fn triple(c12: f64, c23: f64, c13: f64) -> Result<Self> {
        Self::validate(DMatrix::from_row_slice(3, 3, &[1.0, c12, c13, c12, 1.0, c23, c13, c23, 1.0]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn is_generalized(&self) -> bool {
        self.generalized
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[(i, j)]
    }
}

/// Dephasing environment plus signal coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct NoiseModel {
    pub(crate) corr: CorrelationMatrix,
    pub(crate) t2: f64,
    pub(crate) omega0: f64,
    pub(crate) h: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    corr: CorrelationMatrix,
    t2: f64,
    omega0: f64,
    #[serde(default)]
    h: Option<Vec<f64>>,
}

impl TryFrom<ModelRepr> for NoiseModel {
    type Error = Error;
    fn try_from(r: ModelRepr) -> Result<Self> {
        let n = r.corr.n();
        NoiseModel::with_couplings(r.corr, r.t2, r.omega0, r.h.unwrap_or_else(|| vec![1.0; n]))
    }
}

impl From<NoiseModel> for ModelRepr {
    fn from(m: NoiseModel) -> Self {
        ModelRepr { corr: m.corr, t2: m.t2, omega0: m.omega0, h: Some(m.h) }
    }
}

impl NoiseModel {
    /// Uniform couplings `h = (1, …, 1)`.
    pub fn new(corr: CorrelationMatrix, t2: f64, omega0: f64) -> Result<Self> {
        let n = corr.n();
        Self::with_couplings(corr, t2, omega0, vec![1.0; n])
    }

    /// `t2` may be `f64::INFINITY` for noiseless dynamics.
    pub fn with_couplings(corr: CorrelationMatrix, t2: f64, omega0: f64, h: Vec<f64>) -> Result<Self> {
        if !(t2 > 0.0) {
            return Err(Error::Validation(format!("T2 = {t2} must be positive")));
        }
        if !omega0.is_finite() {
            return Err(Error::Validation("omega0 must be finite".into()));
        }
        if h.len() != corr.n() {
            return Err(Error::Dimension(format!(
                "coupling vector has length {}, expected {}",
                h.len(),
                corr.n()
            )));
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("coupling vector is not finite".into()));
        }
        Ok(Self { corr, t2, omega0, h })
    }

    pub fn n(&self) -> usize {
        self.corr.n()
    }

    pub fn corr(&self) -> &CorrelationMatrix {
        &self.corr
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// `1/(2T₂)`, zero for infinite `T₂`.
    pub fn rate_prefactor(&self) -> f64 {
        0.5 / self.t2
    }

    /// Diagonal of `G = ½ h·Z`.
    pub fn signal_generator_diagonal(&self) -> Vec<f64> {
        let half: Vec<f64> = self.h.iter().map(|x| 0.5 * x).collect();
        z_diagonal(self.n(), &half).expect("validated model")
    }

    /// `H₀ = ω₀ G`.
    pub fn hamiltonian(&self) -> Operator {
        let d: Vec<f64> = self.signal_generator_diagonal().iter().map(|g| self.omega0 * g).collect();
        Operator::from_real_diagonal(&d).expect("validated model")
    }

    /// Same model with different `ω₀` and `T₂`.
    pub fn with_rates(&self, t2: f64, omega0: f64) -> Result<Self> {
        Self::with_couplings(self.corr.clone(), t2, omega0, self.h.clone())
    }
}

/// One eigenmode of `C` and its jump operator.
#[derive(Clone, Debug)]
pub struct JumpMode {
    pub lam: f64,
    pub v: DVector<f64>,
    /// `√λ v·Z`.
    pub op_dimensionless: Operator,
    /// `√(λ/2T₂) v·Z`.
    pub op_physical: Operator,
    diag: Vec<f64>,
}

impl JumpMode {
    /// Mode for the operator `√lam · v·Z` with unit `v`.
    pub fn from_direction(lam: f64, v: DVector<f64>, t2: f64) -> Result<Self> {
        let n = v.len();
        let unit = z_diagonal(n, v.as_slice())?;
        let (w_dimless, w_phys) = if lam < ZERO_EIGENVALUE {
            (0.0, 0.0)
        } else {
            (lam.sqrt(), (lam * 0.5 / t2).sqrt())
        };
        let diag: Vec<f64> = unit.iter().map(|x| w_dimless * x).collect();
        let phys: Vec<f64> = unit.iter().map(|x| w_phys * x).collect();
        Ok(Self {
            lam,
            op_dimensionless: Operator::from_real_diagonal(&diag)?,
            op_physical: Operator::from_real_diagonal(&phys)?,
            v,
            diag,
        })
    }

    /// True when the jump operator vanishes.
    pub fn is_zero(&self) -> bool {
        self.lam < ZERO_EIGENVALUE
    }

    /// Diagonal of the dimensionless operator.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }
}

/// Jump modes of the model, eigenvalues ascending.
pub fn jump_modes(m: &NoiseModel) -> Vec<JumpMode> {
    let eig = hermitian_eig(&from_real(m.corr.matrix())).expect("validated correlation matrix");
    let n = m.n();
    (0..n)
        .map(|k| {
            let raw = eig.values[k];
            let lam = if raw < 1e-12 { 0.0 } else { raw };
            let v = DVector::from_iterator(n, eig.vectors.column(k).iter().map(|z| z.re));
            JumpMode::from_direction(lam, v, m.t2).expect("validated model")
        })
        .collect()
}

/// Outcome of the `h ∉ col(C)` test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcqsVerdict {
    pub possible: bool,
    /// `|Π_ker h|`.
    pub kernel_overlap: f64,
    pub threshold: f64,
}

/// Whether some code can satisfy the error-correction and signal conditions.
pub fn ecqs_possible(m: &NoiseModel) -> EcqsVerdict {
    let eig = hermitian_eig(&from_real(m.corr.matrix())).expect("validated correlation matrix");
    let h = DVector::from_column_slice(&m.h);
    let mut proj_sq = 0.0;
    for k in 0..m.n() {
        if eig.values[k] < ZERO_EIGENVALUE {
            let v = DVector::from_iterator(m.n(), eig.vectors.column(k).iter().map(|z| z.re));
            proj_sq += v.dot(&h).powi(2);
        }
    }
    let kernel_overlap = proj_sq.sqrt();
    let threshold = 1e-6 * h.norm();
    EcqsVerdict { possible: kernel_overlap > threshold, kernel_overlap, threshold }
}

/// Spanning set of the Lindblad span `{I, Lᵢ, Lᵢ†Lⱼ}` as real diagonals.
///
/// Elements are weighted by the mode eigenvalues. Each unordered pair
/// `i < j` stands for both `Lᵢ†Lⱼ` and `Lⱼ†Lᵢ` and carries an extra factor
/// `√2`, so sums of quadratic forms over the set do not depend on how a
/// degenerate eigenspace was split into modes.
#[derive(Clone, Debug)]
pub struct LindbladSpanBasis {
    n: usize,
    elements: Vec<Vec<f64>>,
}

impl LindbladSpanBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Diagonals; the first is the identity.
    pub fn diagonals(&self) -> &[Vec<f64>] {
        &self.elements
    }

    pub fn ops(&self) -> Vec<Operator> {
        self.elements
            .iter()
            .map(|d| Operator::from_real_diagonal(d).expect("valid dimension"))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

pub fn lindblad_span_basis(modes: &[JumpMode]) -> LindbladSpanBasis {
    let n = modes.first().map(|m| m.v.len()).unwrap_or(1);
    let dim = 1usize << n;
    let active: Vec<&JumpMode> = modes.iter().filter(|m| !m.is_zero()).collect();
    let mut candidates: Vec<Vec<f64>> = vec![vec![1.0; dim]];
    for m in &active {
        candidates.push(m.diagonal().to_vec());
    }
    for (a, ma) in active.iter().enumerate() {
        for mb in &active[a..] {
            let w = if std::ptr::eq(*ma, *mb) { 1.0 } else { std::f64::consts::SQRT_2 };
            candidates.push(
                ma.diagonal().iter().zip(mb.diagonal()).map(|(x, y)| w * x * y).collect(),
            );
        }
    }
    let mut elements: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let zero = cand.iter().all(|x| x.abs() < 1e-14);
        let dup = elements
            .iter()
            .any(|e| e.iter().zip(&cand).all(|(x, y)| (x - y).abs() < 1e-12));
        if !zero && !dup {
            elements.push(cand);
        }
    }
    LindbladSpanBasis { n, elements }
}

/// Least-squares test of whether `H₀` lies in the span.
///
/// Uses the direction `G = ½ h·Z`, so the answer does not depend on `ω₀`.
pub fn h0_in_span(m: &NoiseModel, basis: &LindbladSpanBasis) -> bool {
    let target = DVector::from_vec(m.signal_generator_diagonal());
    let target_norm = target.norm();
    if target_norm == 0.0 {
        return true;
    }
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for e in basis.diagonals() {
        let mut v = DVector::from_column_slice(e);
        let orig = v.norm();
        for _ in 0..2 {
            for u in &ortho {
                let ov = u.dot(&v);
                v -= u * ov;
            }
        }
        let nrm = v.norm();
        if nrm > 1e-10 * orig {
            ortho.push(v / nrm);
        }
    }
    let mut r = target.clone();
    for _ in 0..2 {
        for u in &ortho {
            let ov = u.dot(&r);
            r -= u * ov;
        }
    }
    r.norm() < 1e-8 * target_norm
}

/// Model with per-qubit couplings `h_new`.
///
/// With `D = diag(h_new ./ h)` the new model has `C' = D C D` and
/// `h' = D h = h_new`; for the default `h = (1, …, 1)` this is `D = diag(h_new)`.
pub fn rescale_couplings(m: &NoiseModel, h_new: &[f64]) -> Result<NoiseModel> {
    if h_new.len() != m.n() {
        return Err(Error::Dimension(format!(
            "coupling vector has length {}, expected {}",
            h_new.len(),
            m.n()
        )));
    }
    if let Some(i) = h_new.iter().position(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::Validation(format!("coupling h[{i}] must be finite and nonzero")));
    }
    if let Some(i) = m.h.iter().position(|&x| x == 0.0) {
        return Err(Error::Validation(format!("existing coupling h[{i}] is zero")));
    }
    let d: Vec<f64> = h_new.iter().zip(&m.h).map(|(a, b)| a / b).collect();
    let c = m.corr.matrix();
    let scaled = DMatrix::from_fn(m.n(), m.n(), |i, j| d[i] * c[(i, j)] * d[j]);
    let corr = CorrelationMatrix::generalized(scaled)?;
    NoiseModel::with_couplings(corr, m.t2, m.omega0, h_new.to_vec())
}

/// Values of `c13` that make the three-qubit correlation matrix singular.
///
/// Roots are `c12·c23 ± √((1−c12²)(1−c23²))`, `+` first; roots outside
/// `[-1, 1]` or giving a non-PSD matrix are dropped. A double root is
/// returned twice.
pub fn singular_c13(c12: f64, c23: f64) -> Vec<f64> {
    if c12.abs() > 1.0 || c23.abs() > 1.0 {
        return Vec::new();
    }
    let disc = ((1.0 - c12 * c12) * (1.0 - c23 * c23)).max(0.0).sqrt();
    [c12 * c23 + disc, c12 * c23 - disc]
        .into_iter()
        .filter_map(|r| {
            if r.abs() > 1.0 + 1e-12 {
                return None;
            }
            let r = r.clamp(-1.0, 1.0);
            CorrelationMatrix::triple(c12, c23, r).ok().map(|_| r)
        })
        .collect()
}

/// Determinant of the three-qubit correlation matrix.
pub fn det3(c12: f64, c23: f64, c13: f64) -> f64 {
    1.0 + 2.0 * c12 * c23 * c13 - c12 * c12 - c23 * c23 - c13 * c13
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{collective_z, max_abs_diff};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(c: CorrelationMatrix) -> NoiseModel {
        NoiseModel::new(c, 1.0, 1.0).unwrap()
    }

    #[test]
    fn validate_accepts_identity_and_minus_half() {
        assert!(CorrelationMatrix::identity(3).is_ok());
        assert!(CorrelationMatrix::uniform(3, -0.5).is_ok());
    }

    #[test]
    fn validate_rejects_violations() {
        let err = CorrelationMatrix::uniform(3, -0.9).unwrap_err();
        assert!(err.to_string().contains("positive semidefinite"), "{err}");
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        assert!(CorrelationMatrix::validate(asym).unwrap_err().to_string().contains("symmetric"));
        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.9]);
        assert!(CorrelationMatrix::validate(diag).unwrap_err().to_string().contains("diagonal"));
        let range = DMatrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
        assert!(CorrelationMatrix::validate(range).unwrap_err().to_string().contains("outside"));
    }

    #[test]
    fn jump_modes_gamma_one() {
        let m = model(CorrelationMatrix::anti_correlated_triple(1.0).unwrap());
        let modes = jump_modes(&m);
        let lams: Vec<f64> = modes.iter().map(|m| m.lam).collect();
        assert_eq!(lams[0], 0.0);
        assert!((lams[1] - 1.5).abs() < 1e-12 && (lams[2] - 1.5).abs() < 1e-12);
        let v = &modes[0].v;
        let s = 1.0 / 3f64.sqrt();
        assert!(v.iter().all(|x| (x.abs() - s).abs() < 1e-12));
        assert!(modes[0].is_zero());
        assert!(modes[0].diagonal().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn jump_modes_reconstruct_c() {
        let m = model(CorrelationMatrix::triple(0.3, -0.2, 0.1).unwrap());
        let modes = jump_modes(&m);
        let mut rec = DMatrix::zeros(3, 3);
        for md in &modes {
            rec += &md.v * md.v.transpose() * md.lam;
        }
        assert!((rec - m.corr().matrix()).abs().max() < 1e-10);
        let total: f64 = modes.iter().map(|m| m.lam).sum();
        assert!((total - 3.0).abs() < 1e-10);
    }

    #[test]
    fn jump_modes_two_qubit_cases() {
        let ident = jump_modes(&model(CorrelationMatrix::identity(2).unwrap()));
        assert!(ident.iter().all(|m| (m.lam - 1.0).abs() < 1e-12));
        let anti = jump_modes(&model(CorrelationMatrix::uniform(2, -1.0).unwrap()));
        assert_eq!(anti[0].lam, 0.0);
        assert!((anti[1].lam - 2.0).abs() < 1e-12);
        assert!((anti[1].v[0] + anti[1].v[1]).abs() < 1e-12);
    }

    #[test]
    fn physical_operator_prefactor() {
        let m = NoiseModel::new(CorrelationMatrix::identity(1).unwrap(), 4.0, 0.0).unwrap();
        let mode = &jump_modes(&m)[0];
        let d = mode.op_physical.real_diagonal().unwrap();
        assert!((d[0] - (1.0f64 / 8.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ecqs_fixtures() {
        let plus = ecqs_possible(&model(CorrelationMatrix::uniform(2, 1.0).unwrap()));
        assert!(!plus.possible);
        let minus = ecqs_possible(&model(CorrelationMatrix::uniform(2, -1.0).unwrap()));
        assert!(minus.possible);
        let g1 = ecqs_possible(&model(CorrelationMatrix::anti_correlated_triple(1.0).unwrap()));
        assert!(g1.possible);
        assert!((g1.kernel_overlap - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn span_single_qubit_dedups_identity() {
        let m = model(CorrelationMatrix::identity(1).unwrap());
        let basis = lindblad_span_basis(&jump_modes(&m));
        assert_eq!(basis.len(), 2);
        assert_eq!(basis.diagonals()[1], vec![1.0, -1.0]);
    }

    #[test]
    fn span_excludes_collective_direction_at_gamma_one() {
        let m = model(CorrelationMatrix::anti_correlated_triple(1.0).unwrap());
        let basis = lindblad_span_basis(&jump_modes(&m));
        let g = collective_z(3, &[1.0, 1.0, 1.0]).unwrap().into_matrix() / crate::linalg::c(3f64.sqrt(), 0.0);
        for op in basis.ops() {
            let overlap = (op.matrix().adjoint() * &g).trace().norm();
            assert!(overlap < 1e-10, "overlap {overlap}");
        }
        assert!(!h0_in_span(&m, &basis));
    }

    #[test]
    fn span_contains_h0_for_independent_noise() {
        let m = model(CorrelationMatrix::identity(3).unwrap());
        let basis = lindblad_span_basis(&jump_modes(&m));
        assert!(h0_in_span(&m, &basis));
    }

    #[test]
    fn rescale_identity_and_invariance() {
        let m = model(CorrelationMatrix::anti_correlated_triple(1.0).unwrap());
        let same = rescale_couplings(&m, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(same.corr().matrix(), m.corr().matrix());
        let r = rescale_couplings(&m, &[2.0, 1.0, 1.0]).unwrap();
        assert!(r.corr().is_generalized());
        assert_eq!(r.corr().get(0, 0), 4.0);
        assert!(ecqs_possible(&r).possible);
        let plus = model(CorrelationMatrix::uniform(2, 1.0).unwrap());
        let rp = rescale_couplings(&plus, &[3.0, 0.5]).unwrap();
        assert!(!ecqs_possible(&rp).possible);
        assert!(matches!(rescale_couplings(&m, &[1.0, 0.0, 1.0]), Err(Error::Validation(_))));
    }

    #[test]
    fn singular_roots() {
        let r = singular_c13(0.0, 0.0);
        assert_eq!(r.len(), 2);
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] + 1.0).abs() < 1e-15);
        let r = singular_c13(-0.5, -0.5);
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] + 0.5).abs() < 1e-15);
        let r = singular_c13(1.0, 0.0);
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn singular_roots_zero_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let a = rng.random_range(-1.0..1.0);
            let b = rng.random_range(-1.0..1.0);
            for r in singular_c13(a, b) {
                assert!(det3(a, b, r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let m = NoiseModel::with_couplings(
            CorrelationMatrix::triple(0.1, -0.3, 0.2).unwrap(),
            2.0,
            0.5,
            vec![1.0, 2.0, 0.5],
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: NoiseModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let gen = rescale_couplings(&m, &[1.0, 1.0, 3.0]).unwrap();
        let back: NoiseModel = serde_json::from_str(&serde_json::to_string(&gen).unwrap()).unwrap();
        assert_eq!(back, gen);
        let bad = r#"{"n": 2, "c": [[1.0, 2.0], [2.0, 1.0]]}"#;
        assert!(serde_json::from_str::<CorrelationMatrix>(bad).is_err());
    }

    #[test]
    fn h_default_is_ones() {
        let s = r#"{"corr": {"n": 2, "c": [[1.0, -1.0], [-1.0, 1.0]]}, "t2": 1.0, "omega0": 0.0}"#;
        let m: NoiseModel = serde_json::from_str(s).unwrap();
        assert_eq!(m.h(), &[1.0, 1.0]);
    }

    #[test]
    fn hamiltonian_is_collective() {
        let m = NoiseModel::new(CorrelationMatrix::identity(2).unwrap(), 1.0, 2.0).unwrap();
        let want = collective_z(2, &[1.0, 1.0]).unwrap().into_matrix();
        assert!(max_abs_diff(m.hamiltonian().matrix(), &want) < 1e-15);
    }
}
