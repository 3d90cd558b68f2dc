//! Liouvillians, propagation and stroboscopic recovery.
//!
//! Density matrices are vectorized column-major, so the superoperator of
//! `ρ ↦ A ρ B` is `Bᵀ ⊗ A`.

use nalgebra::DVector;

use crate::code::Code;
use crate::error::{Error, Result};
use crate::linalg::{
    c, hermitian_eig, kron, matrix_exponential, z_diagonal, CMatrix, DensityMatrix, C64,
};
use crate::noise::{jump_modes, JumpMode, NoiseModel};
use crate::recovery::RecoveryChannel;

/// Largest register handled with dense superoperators.
pub const DENSE_MAX_QUBITS: usize = 4;
/// Choi eigenvalue floor for a channel.
pub const CHOI_TOL: f64 = 1e-8;
/// Trace-preservation tolerance for a channel.
pub const TP_TOL: f64 = 1e-8;
/// Largest number of states kept by a stroboscopic run.
pub const MAX_SAMPLES: usize = 200;

/// Linear map on vectorized `d × d` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    mat: CMatrix,
    dim: usize,
}

/// Complete positivity and trace preservation diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelCheck {
    pub choi_min_eigenvalue: f64,
    pub trace_residual: f64,
}

impl ChannelCheck {
    pub fn is_cptp(&self) -> bool {
        self.choi_min_eigenvalue >= -CHOI_TOL && self.trace_residual <= TP_TOL
    }
}

impl Superoperator {
    pub fn new(mat: CMatrix) -> Result<Self> {
        let n2 = mat.nrows();
        if n2 != mat.ncols() {
            return Err(Error::Dimension("superoperator matrix is not square".into()));
        }
        let dim = (n2 as f64).sqrt().round() as usize;
        if dim * dim != n2 {
            return Err(Error::Dimension(format!("superoperator size {n2} is not a square")));
        }
        Ok(Self { mat, dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: CMatrix::identity(dim * dim, dim * dim), dim }
    }

    pub fn zero(dim: usize) -> Self {
        Self { mat: CMatrix::zeros(dim * dim, dim * dim), dim }
    }

    /// `ρ ↦ A ρ B`.
    pub fn sandwich(a: &CMatrix, b: &CMatrix) -> Self {
        Self { mat: kron(&b.transpose(), a), dim: a.nrows() }
    }

    /// `ρ ↦ [H, ρ]`.
    pub fn commutator(h: &CMatrix) -> Self {
        let id = CMatrix::identity(h.nrows(), h.nrows());
        Self { mat: kron(&id, h) - kron(&h.transpose(), &id), dim: h.nrows() }
    }

    /// `Σ_k (L_k ρ L_k† − ½{L_k† L_k, ρ})`.
    pub fn dissipator(ops: &[CMatrix]) -> Result<Self> {
        let dim = ops.first().map(|l| l.nrows()).ok_or_else(|| {
            Error::Validation("dissipator needs at least one operator".into())
        })?;
        let id = CMatrix::identity(dim, dim);
        let mut mat = CMatrix::zeros(dim * dim, dim * dim);
        for l in ops {
            if l.nrows() != dim || l.ncols() != dim {
                return Err(Error::Dimension("jump operators have mismatched sizes".into()));
            }
            let ldl = l.adjoint() * l;
            mat += kron(&l.conjugate(), l);
            mat -= kron(&id, &ldl) * c(0.5, 0.0);
            mat -= kron(&ldl.transpose(), &id) * c(0.5, 0.0);
        }
        Ok(Self { mat, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = DVector::from_column_slice(rho.as_slice());
        let out = &self.mat * v;
        CMatrix::from_column_slice(self.dim, self.dim, out.as_slice())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator { mat: &self.mat * &other.mat, dim: self.dim }
    }

    pub fn scale(&self, s: C64) -> Superoperator {
        Superoperator { mat: &self.mat * s, dim: self.dim }
    }

    pub fn add(&self, other: &Superoperator) -> Superoperator {
        Superoperator { mat: &self.mat + &other.mat, dim: self.dim }
    }

    pub fn sub(&self, other: &Superoperator) -> Superoperator {
        Superoperator { mat: &self.mat - &other.mat, dim: self.dim }
    }

    /// `exp(t·self)`.
    pub fn exp(&self, t: f64) -> Result<Superoperator> {
        let m = matrix_exponential(&(&self.mat * c(t, 0.0)))?;
        Ok(Superoperator { mat: m, dim: self.dim })
    }

    /// Choi matrix `Σ_ab |a⟩⟨b| ⊗ S(|a⟩⟨b|)`.
    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        CMatrix::from_fn(d * d, d * d, |r, s| {
            let (a, i) = (r / d, r % d);
            let (b, j) = (s / d, s % d);
            self.mat[(i + j * d, a + b * d)]
        })
    }

    /// Largest deviation of `tr S(|a⟩⟨b|)` from `target·δ_ab`.
    fn trace_deviation(&self, target: f64) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                let col = a + b * d;
                let tr: C64 = (0..d).map(|i| self.mat[(i + i * d, col)]).sum();
                let want = if a == b { target } else { 0.0 };
                worst = worst.max((tr - c(want, 0.0)).norm());
            }
        }
        worst
    }

    /// For generators: how far `tr(S(ρ))` is from zero.
    pub fn generator_trace_residual(&self) -> f64 {
        self.trace_deviation(0.0)
    }

    pub fn channel_check(&self) -> Result<ChannelCheck> {
        let choi = self.choi();
        let herm = (&choi + choi.adjoint()) * c(0.5, 0.0);
        let min = hermitian_eig(&herm)?.values.min();
        Ok(ChannelCheck { choi_min_eigenvalue: min, trace_residual: self.trace_deviation(1.0) })
    }

    /// Logical action `ρ_L ↦ K† S(K ρ_L K†) K` for an isometry `K`.
    pub fn restrict(&self, k: &CMatrix) -> Superoperator {
        let embed = kron(&k.conjugate(), k);
        let project = kron(&k.transpose(), &k.adjoint());
        Superoperator { mat: project * &self.mat * embed, dim: k.ncols() }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }
}

fn check_dense(m: &NoiseModel) -> Result<()> {
    if m.n() > DENSE_MAX_QUBITS {
        return Err(Error::Dimension(format!(
            "dense superoperators support at most {DENSE_MAX_QUBITS} qubits, model has {}",
            m.n()
        )));
    }
    Ok(())
}

/// `ρ ↦ [H₀, ρ]`.
pub fn hamiltonian_part(m: &NoiseModel) -> Result<Superoperator> {
    check_dense(m)?;
    Ok(Superoperator::commutator(m.hamiltonian().matrix()))
}

/// Dissipator assembled from the physical jump operators.
pub fn dissipator_from_modes(modes: &[JumpMode]) -> Result<Superoperator> {
    let ops: Vec<CMatrix> = modes.iter().map(|m| m.op_physical.matrix().clone()).collect();
    Superoperator::dissipator(&ops)
}

/// `(1/2T₂) Σ_ij c_ij (Z_i ρ Z_j − ½{Z_i Z_j, ρ})`.
pub fn dissipator_pairwise(m: &NoiseModel) -> Result<Superoperator> {
    check_dense(m)?;
    let n = m.n();
    let dim = 1usize << n;
    let z: Vec<CMatrix> = (0..n)
        .map(|i| {
            let mut w = vec![0.0; n];
            w[i] = 1.0;
            crate::linalg::diag_matrix(&z_diagonal(n, &w).expect("valid register"))
        })
        .collect();
    let id = CMatrix::identity(dim, dim);
    let mut mat = CMatrix::zeros(dim * dim, dim * dim);
    let corr = m.corr().matrix();
    for i in 0..n {
        for j in 0..n {
            let cij = corr[(i, j)];
            if cij == 0.0 {
                continue;
            }
            let zz = &z[i] * &z[j];
            let term = kron(&z[j].transpose(), &z[i])
                - kron(&id, &zz) * c(0.5, 0.0)
                - kron(&zz.transpose(), &id) * c(0.5, 0.0);
            mat += term * c(cij, 0.0);
        }
    }
    Ok(Superoperator { mat: mat * c(m.rate_prefactor(), 0.0), dim })
}

/// `𝓛 = −i𝓗 + 𝓓`.
pub fn build_liouvillian(m: &NoiseModel) -> Result<Superoperator> {
    let (h, d) = liouvillian_parts(m)?;
    Ok(h.scale(c(0.0, -1.0)).add(&d))
}

/// The commutator and dissipator parts separately.
pub fn liouvillian_parts(m: &NoiseModel) -> Result<(Superoperator, Superoperator)> {
    check_dense(m)?;
    Ok((hamiltonian_part(m)?, dissipator_from_modes(&jump_modes(m))?))
}

fn validated(mat: CMatrix) -> Result<DensityMatrix> {
    DensityMatrix::new(mat).map_err(|e| Error::NumericalInstability(format!("evolved state invalid: {e}")))
}

/// `exp(𝓛t) ρ₀`.
pub fn evolve(rho0: &DensityMatrix, gen: &Superoperator, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Validation(format!("evolution time {t} must be finite and non-negative")));
    }
    if rho0.dim() != gen.dim() {
        return Err(Error::Dimension(format!(
            "state dimension {} does not match generator dimension {}",
            rho0.dim(),
            gen.dim()
        )));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    validated(gen.exp(t)?.apply(rho0.matrix()))
}

/// Right-hand side of the master equation without forming the superoperator.
///
/// Every operator involved is diagonal in the computational basis, so the
/// action on `ρ_ab` reduces to a scalar rate per entry.
#[derive(Clone, Debug)]
pub struct MatrixFreeLiouvillian {
    energies: Vec<f64>,
    jumps: Vec<Vec<f64>>,
}

impl MatrixFreeLiouvillian {
    pub fn new(m: &NoiseModel) -> Self {
        let energies = m.hamiltonian().real_diagonal().expect("diagonal Hamiltonian");
        let jumps = jump_modes(m)
            .into_iter()
            .filter(|j| !j.is_zero())
            .map(|j| j.op_physical.real_diagonal().expect("diagonal jump operator"))
            .collect();
        Self { energies, jumps }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.energies.len();
        CMatrix::from_fn(d, d, |a, b| {
            let mut rate = c(0.0, -(self.energies[a] - self.energies[b]));
            for l in &self.jumps {
                rate += c(l[a] * l[b] - 0.5 * (l[a] * l[a] + l[b] * l[b]), 0.0);
            }
            rate * rho[(a, b)]
        })
    }

    /// Fastest timescale, used to bound the integrator step.
    fn max_rate(&self) -> f64 {
        let spread = |v: &[f64]| {
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            hi - lo
        };
        let diss: f64 = self.jumps.iter().map(|l| spread(l).powi(2)).sum();
        spread(&self.energies) + diss
    }
}

/// Fourth-order Runge–Kutta propagation with step at most `T₂/1000`.
pub fn evolve_matrix_free(rho0: &DensityMatrix, m: &NoiseModel, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Validation(format!("evolution time {t} must be finite and non-negative")));
    }
    if rho0.dim() != 1 << m.n() {
        return Err(Error::Dimension("state does not match model".into()));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let rhs = MatrixFreeLiouvillian::new(m);
    let mut h_max = (m.t2() / 1000.0).min(t);
    let rate = rhs.max_rate();
    if rate > 0.0 {
        h_max = h_max.min(1e-2 / rate);
    }
    let steps = (t / h_max).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut rho = rho0.matrix().clone();
    let half = c(0.5 * h, 0.0);
    let full = c(h, 0.0);
    let sixth = c(h / 6.0, 0.0);
    for _ in 0..steps {
        let k1 = rhs.apply(&rho);
        let k2 = rhs.apply(&(&rho + &k1 * half));
        let k3 = rhs.apply(&(&rho + &k2 * half));
        let k4 = rhs.apply(&(&rho + &k3 * full));
        rho += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * sixth;
    }
    validated(rho)
}

/// Propagates with the dense generator when it fits, otherwise matrix-free.
pub fn evolve_model(rho0: &DensityMatrix, m: &NoiseModel, t: f64) -> Result<DensityMatrix> {
    if m.n() <= DENSE_MAX_QUBITS {
        evolve(rho0, &build_liouvillian(m)?, t)
    } else {
        evolve_matrix_free(rho0, m, t)
    }
}

/// Sampled trajectory of alternating free evolution and recovery.
#[derive(Clone, Debug)]
pub struct StroboscopicRun {
    pub dt: f64,
    pub steps: usize,
    pub states: Vec<DensityMatrix>,
    pub times: Vec<f64>,
}

/// Logical-level snapshot of a state.
#[derive(Clone, Debug)]
pub struct LogicalSample {
    pub time: f64,
    /// `K† ρ K`.
    pub rho_l: CMatrix,
    /// `2|⟨0_L|ρ|1_L⟩|`.
    pub coherence: f64,
    /// Unwrapped `−arg ⟨0_L|ρ|1_L⟩`.
    pub phase: f64,
}

impl StroboscopicRun {
    pub fn logical_trace(&self, code: &Code) -> Result<Vec<LogicalSample>> {
        if code.dim() != self.states.first().map(|s| s.dim()).unwrap_or(code.dim()) {
            return Err(Error::Dimension("code does not match run dimension".into()));
        }
        let k = code.isometry();
        let mut out: Vec<LogicalSample> = Vec::with_capacity(self.states.len());
        let mut prev: Option<f64> = None;
        for (rho, &time) in self.states.iter().zip(&self.times) {
            let rho_l = k.adjoint() * rho.matrix() * &k;
            let off = rho_l[(0, 1)];
            let raw = -off.arg();
            let phase = match prev {
                None => raw,
                Some(p) => {
                    let tau = std::f64::consts::TAU;
                    let mut x = raw;
                    while x - p > std::f64::consts::PI {
                        x -= tau;
                    }
                    while x - p < -std::f64::consts::PI {
                        x += tau;
                    }
                    x
                }
            };
            prev = Some(phase);
            out.push(LogicalSample { time, coherence: 2.0 * off.norm(), phase, rho_l });
        }
        Ok(out)
    }
}

/// Repeats `ρ ↦ 𝓡(exp(𝓛 dt) ρ)` for `steps` rounds.
pub fn stroboscopic_evolve(
    rho0: &DensityMatrix,
    gen: &Superoperator,
    rec: &RecoveryChannel,
    dt: f64,
    steps: usize,
) -> Result<StroboscopicRun> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Validation(format!("recovery period dt = {dt} must be positive")));
    }
    if rec.dim() != gen.dim() || rho0.dim() != gen.dim() {
        return Err(Error::Dimension("state, generator and recovery dimensions differ".into()));
    }
    let step = rec.superoperator().compose(&gen.exp(dt)?);
    let check = step.channel_check()?;
    if !check.is_cptp() {
        return Err(Error::NumericalInstability(format!(
            "step channel is not CPTP: Choi min eigenvalue {:.3e}, trace residual {:.3e}",
            check.choi_min_eigenvalue, check.trace_residual
        )));
    }
    let stride = steps.div_ceil(MAX_SAMPLES).max(1);
    let mut rho = rho0.matrix().clone();
    let mut states = vec![rho0.clone()];
    let mut times = vec![0.0];
    for k in 1..=steps {
        rho = step.apply(&rho);
        if k % stride == 0 || k == steps {
            states.push(validated(rho.clone())?);
            times.push(k as f64 * dt);
        }
    }
    Ok(StroboscopicRun { dt, steps, states, times })
}

/// Effective generator of stroboscopic recovery, by finite difference and analytically.
#[derive(Clone, Debug)]
pub struct EffectiveGenerator {
    pub dt: f64,
    /// `(𝓡 exp(𝓛 dt) − 𝓘)/dt`.
    pub finite_difference: Superoperator,
    /// `𝓡𝓛 = −i𝓡𝓗 + 𝓡𝓓`.
    pub analytic: Superoperator,
    /// Both generators restricted to the code, when the recovery has one.
    pub logical: Option<(Superoperator, Superoperator)>,
}

impl EffectiveGenerator {
    /// Frobenius distance between the two logical generators.
    pub fn logical_gap(&self) -> Option<f64> {
        self.logical.as_ref().map(|(fd, an)| fd.sub(an).norm())
    }
}

pub fn effective_generator(gen: &Superoperator, rec: &RecoveryChannel, dt: f64) -> Result<EffectiveGenerator> {
    if !(dt > 0.0) {
        return Err(Error::Validation(format!("dt = {dt} must be positive")));
    }
    if rec.dim() != gen.dim() {
        return Err(Error::Dimension("recovery and generator dimensions differ".into()));
    }
    let r = rec.superoperator();
    let fd = r
        .compose(&gen.exp(dt)?)
        .sub(&Superoperator::identity(gen.dim()))
        .scale(c(1.0 / dt, 0.0));
    let analytic = r.compose(gen);
    let logical = rec.code().map(|code| {
        let k = code.isometry();
        (fd.restrict(&k), analytic.restrict(&k))
    });
    Ok(EffectiveGenerator { dt, finite_difference: fd, analytic, logical })
}
