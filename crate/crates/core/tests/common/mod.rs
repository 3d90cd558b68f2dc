#![allow(dead_code)]

use ecqs::linalg::{CMatrix, C64};
use ecqs::noise::{CorrelationMatrix, NoiseModel};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Unit-diagonal Gram matrix of `rank` random directions.
pub fn random_correlation(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> CorrelationMatrix {
    let a: DMatrix<f64> = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
    let g = &a * a.transpose();
    let s: Vec<f64> = (0..n).map(|i| 1.0 / g[(i, i)].sqrt()).collect();
    let c = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (i.min(j), i.max(j));
        if a == b {
            1.0
        } else {
            (g[(a, b)] * s[a] * s[b]).clamp(-1.0, 1.0)
        }
    });
    CorrelationMatrix::validate(c).expect("Gram matrices are PSD")
}

pub fn gamma_model(gamma: f64) -> NoiseModel {
    NoiseModel::new(CorrelationMatrix::anti_correlated_triple(gamma).unwrap(), 1.0, 1.0).unwrap()
}

/// Random 2×2 density matrix.
pub fn random_qubit_state(rng: &mut ChaCha8Rng) -> CMatrix {
    let a = CMatrix::from_fn(2, 2, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}
