//! Dense complex linear algebra and multi-qubit operator construction.
//!
//! Basis states of an `n`-qubit register are indexed by bitstrings with
//! qubit 1 as the most significant bit, so `|100⟩` has index 4. Every
//! operator in this crate follows that ordering.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const MAX_QUBITS: usize = 6;

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-9;

const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Number of qubits for a Hilbert-space dimension, if it is a power of two
/// within range.
pub fn qubit_count(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::Dimension(format!("dimension {dim} is not a power of two")));
    }
    let n = dim.trailing_zeros() as usize;
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "{n} qubits outside supported range 1..={MAX_QUBITS}"
        )));
    }
    Ok(n)
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "{n} qubits outside supported range 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// Eigenvalue of `Z_i` (0-based `qubit`) on basis state `index`.
#[inline]
pub fn z_sign(n: usize, qubit: usize, index: usize) -> f64 {
    if (index >> (n - 1 - qubit)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Diagonal of `Σ_i w_i Z_i`.
pub fn z_diagonal(n: usize, w: &[f64]) -> Result<Vec<f64>> {
    check_qubits(n)?;
    if w.len() != n {
        return Err(Error::Dimension(format!(
            "weight vector has length {}, expected {n}",
            w.len()
        )));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("weight vector is not finite".into()));
    }
    Ok((0..1usize << n)
        .map(|b| (0..n).map(|i| w[i] * z_sign(n, i, b)).sum())
        .collect())
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn from_real(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| c(x, 0.0))
}

pub fn diag_matrix(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(d.len(), d.iter().map(|&x| c(x, 0.0))))
}

/// Dense operator on an `n`-qubit register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct Operator {
    mat: CMatrix,
    hermitian: bool,
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr(#[serde(with = "complex_json::matrix")] CMatrix);

impl TryFrom<OperatorRepr> for Operator {
    type Error = Error;
    fn try_from(r: OperatorRepr) -> Result<Self> {
        Operator::new(r.0)
    }
}

impl From<Operator> for OperatorRepr {
    fn from(o: Operator) -> Self {
        OperatorRepr(o.mat)
    }
}

impl Operator {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, not square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        qubit_count(mat.nrows())?;
        let hermitian = hermiticity_defect(&mat) < HERMITIAN_TOL;
        Ok(Self { mat, hermitian })
    }

    /// Builds an operator that must be Hermitian.
    pub fn hermitian(mat: CMatrix) -> Result<Self> {
        let op = Self::new(mat)?;
        if !op.hermitian {
            return Err(Error::Validation(format!(
                "operator is not Hermitian (defect {:.3e})",
                hermiticity_defect(&op.mat)
            )));
        }
        Ok(op)
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_qubits(n)?;
        Ok(Self { mat: CMatrix::identity(1 << n, 1 << n), hermitian: true })
    }

    pub fn from_real_diagonal(d: &[f64]) -> Result<Self> {
        qubit_count(d.len())?;
        Ok(Self { mat: diag_matrix(d), hermitian: true })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Real diagonal, if the operator is diagonal with real entries.
    pub fn real_diagonal(&self) -> Option<Vec<f64>> {
        let n = self.dim();
        for j in 0..n {
            for i in 0..n {
                let z = self.mat[(i, j)];
                if (i != j && z.norm() > 0.0) || (i == j && z.im.abs() > HERMITIAN_TOL) {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.mat[(i, i)].re).collect())
    }
}

/// `Σ_i w_i Z_i` as a diagonal operator.
pub fn collective_z(n: usize, w: &[f64]) -> Result<Operator> {
    Operator::from_real_diagonal(&z_diagonal(n, w)?)
}

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct StateVector {
    amps: CVector,
}

#[derive(Serialize, Deserialize)]
struct StateRepr(#[serde(with = "complex_json::vector")] CVector);

impl TryFrom<StateRepr> for StateVector {
    type Error = Error;
    fn try_from(r: StateRepr) -> Result<Self> {
        StateVector::new(r.0)
    }
}

impl From<StateVector> for StateRepr {
    fn from(s: StateVector) -> Self {
        StateRepr(s.amps)
    }
}

impl StateVector {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(amps: CVector) -> Result<Self> {
        qubit_count(amps.len())?;
        let norm = amps.norm();
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::Validation(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: CVector) -> Result<Self> {
        qubit_count(amps.len())?;
        let norm = amps.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Validation("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(Self { amps: amps / c(norm, 0.0) })
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::Dimension(format!("basis index {index} out of range")));
        }
        let mut v = CVector::zeros(dim);
        v[index] = c(1.0, 0.0);
        Ok(Self { amps: v })
    }

    /// Uniform superposition of the given bitstrings (qubit 1 leftmost).
    pub fn uniform(bitstrings: &[&str]) -> Result<Self> {
        let n = bitstrings
            .first()
            .map(|s| s.len())
            .ok_or_else(|| Error::Validation("empty bitstring list".into()))?;
        check_qubits(n)?;
        let mut v = CVector::zeros(1 << n);
        for s in bitstrings {
            if s.len() != n {
                return Err(Error::Validation(format!("bitstring {s} has wrong length")));
            }
            let idx = usize::from_str_radix(s, 2)
                .map_err(|_| Error::Validation(format!("bad bitstring {s}")))?;
            v[idx] += c(1.0, 0.0);
        }
        Self::normalized(v)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }
}

/// Density matrix satisfying Hermiticity, unit trace and positivity.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Dimension("density matrix is not square".into()));
        }
        qubit_count(mat.nrows())?;
        let defect = hermiticity_defect(&mat);
        if defect > Self::HERMITIAN_TOL {
            return Err(Error::Validation(format!(
                "density matrix not Hermitian (defect {defect:.3e})"
            )));
        }
        let tr = mat.trace();
        if (tr - c(1.0, 0.0)).norm() > Self::TRACE_TOL {
            return Err(Error::Validation(format!("density matrix trace is {tr}")));
        }
        let min = hermitian_eig(&mat)?.values.min();
        if min < -Self::POSITIVITY_TOL {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { mat })
    }

    pub fn pure(state: &StateVector) -> Self {
        let v = state.amplitudes();
        Self { mat: v * v.adjoint() }
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        Ok(Self { mat: CMatrix::identity(dim, dim) / c(dim as f64, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// `⟨ψ|ρ|ψ⟩` for a pure reference state.
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> f64 {
        let v = psi.amplitudes();
        (v.adjoint() * &self.mat * v)[(0, 0)].re
    }
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: CMatrix,
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
///
/// Within a degenerate cluster (gap below [`DEGENERACY_GAP`]) the returned
/// basis is rebuilt from projected unit vectors, so it does not depend on
/// how the underlying solver happened to split the cluster. Each vector's
/// first significant component is made real and positive.
pub fn hermitian_eig(a: &CMatrix) -> Result<HermitianEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("matrix is not square".into()));
    }
    let scale = max_abs(a).max(1.0);
    let defect = hermiticity_defect(a);
    if defect > 1e-10 * scale {
        return Err(Error::Validation(format!("matrix is not Hermitian (defect {defect:.3e})")));
    }
    let sym = (a + a.adjoint()) * c(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    canonicalize_eigenbasis(values.as_slice(), &mut vectors, DEGENERACY_GAP * scale);
    Ok(HermitianEigen { values, vectors })
}

fn canonicalize_eigenbasis(values: &[f64], vectors: &mut CMatrix, gap: f64) {
    let n = values.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] < gap {
            end += 1;
        }
        if end - start > 1 {
            let cluster = vectors.columns(start, end - start).into_owned();
            let basis = projected_unit_basis(&cluster);
            vectors.columns_mut(start, end - start).copy_from(&basis);
        }
        start = end;
    }
    for k in 0..n {
        let mut col = vectors.column(k).into_owned();
        fix_phase(&mut col);
        vectors.set_column(k, &col);
    }
}

/// Orthonormal basis for the span of `cluster`'s columns built by
/// Gram–Schmidt on projected standard basis vectors.
fn projected_unit_basis(cluster: &CMatrix) -> CMatrix {
    let dim = cluster.nrows();
    let k = cluster.ncols();
    let proj = cluster * cluster.adjoint();
    let mut out: Vec<CVector> = Vec::with_capacity(k);
    let mut used = vec![false; dim];
    while out.len() < k {
        let residuals: Vec<(usize, CVector, f64)> = (0..dim)
            .filter(|&j| !used[j])
            .map(|j| {
                let mut v = proj.column(j).into_owned();
                for u in &out {
                    let ov = u.dotc(&v);
                    v -= u * ov;
                }
                let nrm = v.norm();
                (j, v, nrm)
            })
            .collect();
        let best = residuals.iter().fold(0.0f64, |m, r| m.max(r.2));
        if best < 1e-12 {
            break;
        }
        let (j, mut v, _) = residuals.into_iter().find(|r| r.2 >= 0.5 * best).unwrap();
        used[j] = true;
        for u in &out {
            let ov = u.dotc(&v);
            v -= u * ov;
        }
        let nrm = v.norm();
        out.push(v / c(nrm, 0.0));
    }
    if out.len() < k {
        return cluster.clone();
    }
    CMatrix::from_columns(&out)
}

pub(crate) fn fix_phase(v: &mut CVector) {
    let nrm = v.norm();
    if nrm == 0.0 {
        return;
    }
    if let Some(z) = v.iter().copied().find(|z| z.norm() > 1e-6 * nrm) {
        let phase = z.conj() / c(z.norm(), 0.0);
        *v *= phase;
    }
}

/// Extends orthonormal columns to a full unitary by Gram–Schmidt on the
/// standard basis vectors in ascending index order.
pub fn complete_unitary(cols: &CMatrix) -> CMatrix {
    let dim = cols.nrows();
    let mut basis: Vec<CVector> = cols.column_iter().map(|c| c.into_owned()).collect();
    for j in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = CVector::zeros(dim);
        v[j] = c(1.0, 0.0);
        for _ in 0..2 {
            for u in &basis {
                let ov = u.dotc(&v);
                v -= u * ov;
            }
        }
        let nrm = v.norm();
        if nrm > 1e-7 {
            basis.push(v / c(nrm, 0.0));
        }
    }
    CMatrix::from_columns(&basis)
}

/// Orthonormal basis (as columns) of the range of an orthogonal projector.
pub fn projector_range(p: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eig(p)?;
    let cols: Vec<CVector> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(k, _)| eig.vectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        return Err(Error::DegenerateCode("projector has empty range".into()));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// Unitary `U` with `a·P = √d·U·P`, for a projector `p`.
///
/// The part of `U` acting on the complement of `range(p)` is fixed by
/// [`complete_unitary`] on both the input and output sides.
pub fn polar_unitary(a: &CMatrix, p: &CMatrix, d: f64) -> Result<CMatrix> {
    let basis = projector_range(p)?;
    polar_unitary_on(a, &basis, d)
}

/// [`polar_unitary`] with the projector given by orthonormal columns.
pub fn polar_unitary_on(a: &CMatrix, basis: &CMatrix, d: f64) -> Result<CMatrix> {
    polar_isometry(a, basis, d).map(|q| unitary_mapping(basis, &q))
}

/// Isometry `Q` from the polar factorization `a·K = Q·(K†a†aK)^{1/2}`.
pub(crate) fn polar_isometry(a: &CMatrix, basis: &CMatrix, d: f64) -> Result<CMatrix> {
    if !(d > 0.0) {
        return Err(Error::Validation(format!("polar scale d = {d} must be positive")));
    }
    let ak = a * basis;
    let gram = ak.adjoint() * &ak;
    let eig = hermitian_eig(&gram)?;
    let min_sv = eig.values.min().max(0.0).sqrt();
    if min_sv < 1e-6 * d.sqrt() {
        return Err(Error::DegenerateCode(format!(
            "operator loses rank on the code (smallest singular value {min_sv:.3e})"
        )));
    }
    let inv_sqrt = DVector::from_iterator(
        eig.values.len(),
        eig.values.iter().map(|&v| c(1.0 / v.sqrt(), 0.0)),
    );
    let inv_half = &eig.vectors * CMatrix::from_diagonal(&inv_sqrt) * eig.vectors.adjoint();
    Ok(ak * inv_half)
}

/// Unitary sending the columns of `from` to the columns of `to`, completed
/// deterministically on the orthogonal complements.
pub(crate) fn unitary_mapping(from: &CMatrix, to: &CMatrix) -> CMatrix {
    let b_in = complete_unitary(from);
    let b_out = complete_unitary(to);
    b_out * b_in.adjoint()
}

/// Matrix exponential.
///
/// Diagonal inputs are exponentiated entrywise; everything else goes through
/// scaling and squaring with a Padé approximant.
pub fn matrix_exponential(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("matrix exponential of non-square matrix".into()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Validation("matrix has non-finite entries".into()));
    }
    let diagonal = (0..n).all(|j| (0..n).all(|i| i == j || a[(i, j)] == C64::new(0.0, 0.0)));
    if diagonal {
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = a[(i, i)].exp();
        }
        return Ok(out);
    }
    Ok(a.exp())
}

/// JSON encoding of complex arrays as nested `[re, im]` pairs.
pub mod complex_json {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub mod matrix {
        use super::*;

        pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
            let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
            let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
            let nr = rows.len();
            let nc = rows.first().map(|r| r.len()).unwrap_or(0);
            if rows.iter().any(|r| r.len() != nc) {
                return Err(serde::de::Error::custom("ragged complex matrix"));
            }
            Ok(CMatrix::from_fn(nr, nc, |i, j| c(rows[i][j][0], rows[i][j][1])))
        }
    }

    pub mod matrix_list {
        use super::*;

        #[derive(Serialize, Deserialize)]
        struct Wrap(#[serde(with = "super::matrix")] CMatrix);

        pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> std::result::Result<S::Ok, S::Error> {
            let w: Vec<Wrap> = ms.iter().cloned().map(Wrap).collect();
            w.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMatrix>, D::Error> {
            let w: Vec<Wrap> = Vec::deserialize(d)?;
            Ok(w.into_iter().map(|w| w.0).collect())
        }
    }

    pub mod vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &CVector, s: S) -> std::result::Result<S::Ok, S::Error> {
            let xs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
            xs.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CVector, D::Error> {
            let xs: Vec<[f64; 2]> = Vec::deserialize(d)?;
            Ok(CVector::from_iterator(xs.len(), xs.iter().map(|p| c(p[0], p[1]))))
        }
    }

    pub mod real_matrix {
        use super::*;

        pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
            let rows: Vec<Vec<f64>> =
                (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
            let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
            let nr = rows.len();
            let nc = rows.first().map(|r| r.len()).unwrap_or(0);
            if rows.iter().any(|r| r.len() != nc) {
                return Err(serde::de::Error::custom("ragged matrix"));
            }
            Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
        }
    }
}
