//! Shared helpers for in-crate unit tests: seeded RNGs, random model
//! instances, and central finite differences used as gradient oracles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::model::{ModelSpec, ParameterVector, Sample};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_params(spec: &ModelSpec, rng: &mut impl Rng) -> ParameterVector {
    ParameterVector {
        values: (0..spec.param_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    }
}

/// Random (spec, θ, sample) triple mixing both architectures and shapes.
pub fn random_instance(rng: &mut impl Rng) -> (ModelSpec, ParameterVector, Sample) {
    let input_dim = rng.random_range(1..6);
    let num_classes = rng.random_range(2..6);
    let spec = if rng.random_bool(0.5) {
        ModelSpec::Linear {
            input_dim,
            num_classes,
        }
    } else {
        ModelSpec::Mlp1 {
            input_dim,
            hidden_dim: rng.random_range(1..7),
            num_classes,
        }
    };
    let theta = random_params(&spec, rng);
    let sample = Sample {
        x: (0..input_dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
        y: rng.random_range(0..num_classes),
    };
    (spec, theta, sample)
}

/// Central finite-difference gradient of `f` at `x0`.
pub fn fd_grad(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x0.len());
    let mut x = x0.to_vec();
    for i in 0..x0.len() {
        x[i] = x0[i] + step;
        let hi = f(&x);
        x[i] = x0[i] - step;
        let lo = f(&x);
        x[i] = x0[i];
        out.push((hi - lo) / (2.0 * step));
    }
    out
}

/// |a − b| scaled by max(1, |a|, |b|); the `1` floor keeps near-zero
/// components from inflating the error.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0f64.max(a.abs()).max(b.abs())
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}
