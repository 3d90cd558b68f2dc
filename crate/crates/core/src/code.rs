//! Two-dimensional codes and the quantities that decide whether they can
//! sense through correlated dephasing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, complex_json, hermitian_eig, CMatrix, CVector, Operator, StateVector, C64};
use crate::noise::{jump_modes, JumpMode, LindbladSpanBasis, NoiseModel};

/// Tolerance on `⟨x|y⟩ = δ_xy`.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Eigenvalues of `M̃` above this count toward its rank.
pub const RANK_TOL: f64 = 1e-8;
/// Off-diagonal size of the signal block above which the codewords are rotated.
pub const EIGENSTATE_TOL: f64 = 1e-8;

/// Logical basis states `|0_L⟩`, `|1_L⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodeRepr", into = "CodeRepr")]
pub struct Code {
    n: usize,
    ket0: StateVector,
    ket1: StateVector,
}

#[derive(Serialize, Deserialize)]
struct CodeRepr {
    n: usize,
    ket0: StateVector,
    ket1: StateVector,
}

impl TryFrom<CodeRepr> for Code {
    type Error = Error;
    fn try_from(r: CodeRepr) -> Result<Self> {
        let code = Code::new(r.ket0, r.ket1)?;
        if code.n != r.n {
            return Err(Error::Dimension(format!(
                "declared n = {} but codewords act on {} qubits",
                r.n, code.n
            )));
        }
        Ok(code)
    }
}

impl From<Code> for CodeRepr {
    fn from(c: Code) -> Self {
        CodeRepr { n: c.n, ket0: c.ket0, ket1: c.ket1 }
    }
}

impl Code {
    pub fn new(ket0: StateVector, ket1: StateVector) -> Result<Self> {
        if ket0.dim() != ket1.dim() {
            return Err(Error::Dimension(format!(
                "codewords have dimensions {} and {}",
                ket0.dim(),
                ket1.dim()
            )));
        }
        let overlap = ket0.inner(&ket1).norm();
        if overlap > ORTHONORMAL_TOL {
            return Err(Error::Validation(format!("codewords overlap: |<0_L|1_L>| = {overlap:.3e}")));
        }
        Ok(Self { n: ket0.n_qubits(), ket0, ket1 })
    }

    /// Normalizes `a`, then orthonormalizes `b` against it.
    pub fn orthonormalized(a: CVector, b: CVector) -> Result<Self> {
        let x = StateVector::normalized(a)?;
        let xa = x.amplitudes();
        let proj = xa.dotc(&b);
        let y = b - xa * proj;
        if y.norm() < 1e-12 {
            return Err(Error::DegenerateCode("codeword vectors are linearly dependent".into()));
        }
        let y = StateVector::normalized(y)?;
        Code::new(x, y)
    }

    /// `(|10…0⟩ + |010…0⟩ + … ) / √n` and its bitwise complement.
    pub fn single_excitation(n: usize) -> Result<Self> {
        let ones: Vec<String> = (0..n)
            .map(|k| (0..n).map(|q| if q == k { '1' } else { '0' }).collect())
            .collect();
        let flipped: Vec<String> = ones
            .iter()
            .map(|s| s.chars().map(|ch| if ch == '1' { '0' } else { '1' }).collect())
            .collect();
        let a: Vec<&str> = ones.iter().map(String::as_str).collect();
        let b: Vec<&str> = flipped.iter().map(String::as_str).collect();
        Code::new(StateVector::uniform(&a)?, StateVector::uniform(&b)?)
    }

    /// `|0…0⟩`, `|1…1⟩`.
    pub fn ghz(n: usize) -> Result<Self> {
        Code::new(StateVector::basis(n, 0)?, StateVector::basis(n, (1 << n) - 1)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.ket0.dim()
    }

    pub fn ket0(&self) -> &StateVector {
        &self.ket0
    }

    pub fn ket1(&self) -> &StateVector {
        &self.ket1
    }

    /// Isometry `K = [|0_L⟩ |1_L⟩]`, so that `P = K K†`.
    pub fn isometry(&self) -> CMatrix {
        CMatrix::from_columns(&[self.ket0.amplitudes().clone(), self.ket1.amplitudes().clone()])
    }

    pub fn projector(&self) -> CMatrix {
        let k = self.isometry();
        &k * k.adjoint()
    }

    /// `|0_L⟩⟨0_L| − |1_L⟩⟨1_L|`.
    pub fn logical_z(&self) -> CMatrix {
        let a = self.ket0.amplitudes();
        let b = self.ket1.amplitudes();
        a * a.adjoint() - b * b.adjoint()
    }

    /// `(|0_L⟩ + e^{iφ}|1_L⟩)/√2`.
    pub fn plus_state(&self, phi: f64) -> StateVector {
        let v = (self.ket0.amplitudes() + self.ket1.amplitudes() * C64::from_polar(1.0, phi))
            / c(std::f64::consts::SQRT_2, 0.0);
        StateVector::normalized(v).expect("orthonormal codewords")
    }

    /// Embeds `α|0_L⟩ + β|1_L⟩`.
    pub fn encode(&self, alpha: C64, beta: C64) -> Result<StateVector> {
        StateVector::normalized(self.ket0.amplitudes() * alpha + self.ket1.amplitudes() * beta)
    }

    /// Rotates each codeword so its first non-negligible amplitude is real and positive.
    pub fn phase_fixed(&self) -> Code {
        let fix = |s: &StateVector| {
            let a = s.amplitudes();
            let mut v = a.clone();
            if let Some(z) = a.iter().find(|z| z.norm() > 1e-12) {
                v *= z.conj() / c(z.norm(), 0.0);
            }
            StateVector::normalized(v).expect("unit vector")
        };
        Code { n: self.n, ket0: fix(&self.ket0), ket1: fix(&self.ket1) }
    }

    fn block(&self, e: &CMatrix) -> CMatrix {
        let k = self.isometry();
        k.adjoint() * e * k
    }
}

/// `|⟨x|E|x⟩ − ⟨y|E|y⟩|² + 4|⟨x|E|y⟩|²`.
pub fn f_e(code: &Code, e: &Operator) -> Result<f64> {
    if e.dim() != code.dim() {
        return Err(Error::Dimension(format!(
            "operator dimension {} does not match code dimension {}",
            e.dim(),
            code.dim()
        )));
    }
    let b = code.block(e.matrix());
    Ok((b[(0, 0)] - b[(1, 1)]).norm_sqr() + 4.0 * b[(0, 1)].norm_sqr())
}

/// `F_E` for a real diagonal `E`, together with the diagonal sums
/// `p = Σ e_b(|x_b|² − |y_b|²)` and `q = Σ e_b x̄_b y_b`.
pub(crate) fn f_diagonal(x: &[C64], y: &[C64], e: &[f64]) -> (f64, f64, C64) {
    let mut p = 0.0;
    let mut q = C64::new(0.0, 0.0);
    for b in 0..e.len() {
        p += e[b] * (x[b].norm_sqr() - y[b].norm_sqr());
        q += x[b].conj() * y[b] * e[b];
    }
    (p * p + 4.0 * q.norm_sqr(), p, q)
}

/// Sum of `F_E` over the non-identity elements of the span basis.
pub fn f_tot(code: &Code, basis: &LindbladSpanBasis) -> f64 {
    let x = code.ket0.amplitudes().as_slice();
    let y = code.ket1.amplitudes().as_slice();
    basis.diagonals()[1..].iter().map(|e| f_diagonal(x, y, e).0).sum()
}

/// `F_G` with `G = ½ h·Z`, the squared signal gain.
pub fn f_g(code: &Code, m: &NoiseModel) -> f64 {
    f_diagonal(
        code.ket0.amplitudes().as_slice(),
        code.ket1.amplitudes().as_slice(),
        &m.signal_generator_diagonal(),
    )
    .0
}

/// Error-correction conditions evaluated on a code.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KlReport {
    /// `m_ij` with index 0 the identity and `i ≥ 1` the modes in order.
    #[serde(with = "complex_json::matrix")]
    pub m: CMatrix,
    #[serde(with = "complex_json::matrix")]
    pub m_tilde: CMatrix,
    /// Largest spectral-norm deviation `‖P Lᵢ† Lⱼ P − m_ij P‖`.
    pub residual: f64,
    pub rank: usize,
    pub dfs: bool,
}

pub fn kl_report(code: &Code, modes: &[JumpMode]) -> KlReport {
    let k = code.isometry();
    let mut applied: Vec<CMatrix> = vec![k.clone()];
    for mode in modes {
        applied.push(mode.op_dimensionless.matrix() * &k);
    }
    let r = applied.len();
    let mut m = CMatrix::zeros(r, r);
    let mut residual: f64 = 0.0;
    for i in 0..r {
        for j in 0..r {
            let x = applied[i].adjoint() * &applied[j];
            let mij = (x[(0, 0)] + x[(1, 1)]) * 0.5;
            m[(i, j)] = mij;
            let dev = x - CMatrix::identity(2, 2) * mij;
            residual = residual.max(spectral_norm(&dev));
        }
    }
    let nm = r - 1;
    let m_tilde = CMatrix::from_fn(nm, nm, |i, j| m[(i + 1, j + 1)] - m[(0, i + 1)].conj() * m[(0, j + 1)]);
    let rank = if nm == 0 {
        0
    } else {
        hermitian_eig(&hermitian_part(&m_tilde))
            .expect("hermitian")
            .values
            .iter()
            .filter(|d| d.abs() > RANK_TOL)
            .count()
    };
    KlReport { m, m_tilde, residual, rank, dfs: rank <= 1 }
}

pub(crate) fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5, 0.0)
}

pub(crate) fn spectral_norm(a: &CMatrix) -> f64 {
    a.clone().singular_values().max()
}

/// Linear combinations of the modes that act trivially on the code to first order.
///
/// Solves `P L P ∝ P` for `L = Σ_k u_k L_k` with real `u`, and returns one mode
/// `w·Z` per orthonormal kernel vector `u`, where `w = Σ_k u_k √λ_k v_k`.
/// Singular values below `tol` count as kernel.
pub fn correctable_modes(code: &Code, modes: &[JumpMode], tol: f64, t2: f64) -> Result<Vec<JumpMode>> {
    let active: Vec<&JumpMode> = modes.iter().filter(|m| !m.is_zero()).collect();
    if active.is_empty() {
        return Ok(Vec::new());
    }
    let a = DMatrix::from_fn(3, active.len(), |r, col| {
        let x = code.block(active[col].op_dimensionless.matrix());
        match r {
            0 => (x[(0, 0)] - x[(1, 1)]).re,
            1 => x[(0, 1)].re,
            _ => x[(0, 1)].im,
        }
    });
    let gram = a.transpose() * &a;
    let eig = hermitian_eig(&crate::linalg::from_real(&gram))?;
    let n = code.n();
    let mut out = Vec::new();
    for idx in 0..active.len() {
        if eig.values[idx] >= tol * tol {
            continue;
        }
        let mut w = nalgebra::DVector::<f64>::zeros(n);
        for (col, mode) in active.iter().enumerate() {
            let u = eig.vectors[(col, idx)].re;
            w += &mode.v * (u * mode.lam.sqrt());
        }
        let norm = w.norm();
        if norm < 1e-12 {
            continue;
        }
        out.push(JumpMode::from_direction(norm * norm, w / norm, t2)?);
    }
    Ok(out)
}

/// Logical-level description of a code in the limit of fast recovery.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub alpha: f64,
    pub omega_l: f64,
    pub gain: f64,
    /// Coefficient of `Z_L` in each projected physical jump operator.
    pub l_eff_coeffs: Vec<C64>,
    pub gamma_eff: f64,
    /// True when the codewords were rotated or relabelled into the eigenbasis.
    pub rotated: bool,
    /// Codewords in which the logical Hamiltonian is diagonal.
    pub code: Code,
}

/// Effective Hamiltonian and logical dephasing of `code` under `m`'s full noise.
pub fn effective_model(code: &Code, m: &NoiseModel) -> Result<EffectiveModel> {
    effective_model_with_modes(code, m, &jump_modes(m))
}

pub fn effective_model_with_modes(code: &Code, m: &NoiseModel, modes: &[JumpMode]) -> Result<EffectiveModel> {
    if code.n() != m.n() {
        return Err(Error::Dimension(format!("code has {} qubits, model has {}", code.n(), m.n())));
    }
    let g = Operator::from_real_diagonal(&m.signal_generator_diagonal())?;
    let block = code.block(g.matrix());
    let scale = block.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let (eigen_code, rotated) = if block[(0, 1)].norm() > EIGENSTATE_TOL * scale {
        let eig = hermitian_eig(&hermitian_part(&block))?;
        let k = code.isometry();
        let hi = &k * eig.vectors.column(1);
        let lo = &k * eig.vectors.column(0);
        (Code::new(StateVector::normalized(hi)?, StateVector::normalized(lo)?)?, true)
    } else if block[(0, 0)].re < block[(1, 1)].re {
        (Code::new(code.ket1.clone(), code.ket0.clone())?, true)
    } else {
        (code.clone(), false)
    };
    let b = eigen_code.block(g.matrix());
    let (g0, g1) = (b[(0, 0)].re, b[(1, 1)].re);
    let gain = g0 - g1;
    let omega0 = m.omega0();
    let mut coeffs = Vec::with_capacity(modes.len());
    for mode in modes {
        let x = eigen_code.block(mode.op_physical.matrix());
        coeffs.push((x[(0, 0)] - x[(1, 1)]) * 0.5);
    }
    let gamma_eff = 2.0 * coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>();
    Ok(EffectiveModel {
        alpha: omega0 * (g0 + g1) / 2.0,
        omega_l: omega0 * gain,
        gain,
        l_eff_coeffs: coeffs,
        gamma_eff,
        rotated,
        code: eigen_code,
    })
}
