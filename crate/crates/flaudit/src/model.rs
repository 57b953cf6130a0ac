//! Differentiable classifiers with hand-derived gradients.
//!
//! Two small architectures are supported: a multinomial linear classifier and
//! a one-hidden-layer MLP with tanh activation. Besides the training loss and
//! its parameter gradient, this module exposes the mixed second derivative
//! `x ↦ ∇ₓ⟨v, ∇_θ ℓ(x, y; θ)⟩`, which canary design needs to descend in input
//! space. All derivatives are closed-form; finite differences appear only in
//! tests as oracles.
//!
//! Everything here is a pure function of its arguments and safe to call from
//! any number of threads.

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::vecmath::dot;

/// Gradient norms below this are treated as degenerate when a normalized
/// gradient direction is required.
pub const DEGENERATE_GRADIENT_EPS: f64 = 1e-12;

/// Architecture and shape of a model; parameter count is a function of this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Multinomial logistic regression: logits = W·x + b.
    Linear { input_dim: usize, num_classes: usize },
    /// One hidden layer with tanh: logits = W2·tanh(W1·x + b1) + b2.
    ///
    /// tanh (rather than ReLU) keeps the mixed second derivative smooth
    /// everywhere, which the input-space canary optimization relies on.
    Mlp1 {
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
    },
}

impl ModelSpec {
    pub fn input_dim(&self) -> usize {
        match *self {
            ModelSpec::Linear { input_dim, .. } | ModelSpec::Mlp1 { input_dim, .. } => input_dim,
        }
    }

    pub fn num_classes(&self) -> usize {
        match *self {
            ModelSpec::Linear { num_classes, .. } | ModelSpec::Mlp1 { num_classes, .. } => {
                num_classes
            }
        }
    }

    /// Total number of parameters `d`.
    pub fn param_count(&self) -> usize {
        match *self {
            ModelSpec::Linear {
                input_dim,
                num_classes,
            } => (input_dim + 1) * num_classes,
            ModelSpec::Mlp1 {
                input_dim,
                hidden_dim,
                num_classes,
            } => (input_dim + 1) * hidden_dim + (hidden_dim + 1) * num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ModelSpec::Linear {
                input_dim,
                num_classes,
            } => input_dim >= 1 && num_classes >= 2,
            ModelSpec::Mlp1 {
                input_dim,
                hidden_dim,
                num_classes,
            } => input_dim >= 1 && hidden_dim >= 1 && num_classes >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(AuditError::Config(format!(
                "model spec out of range: {self:?}"
            )))
        }
    }

    fn check_sample(&self, s: &Sample) -> Result<()> {
        if s.x.len() != self.input_dim() {
            return Err(AuditError::DimensionMismatch(format!(
                "sample has {} features, model expects {}",
                s.x.len(),
                self.input_dim()
            )));
        }
        if s.y >= self.num_classes() {
            return Err(AuditError::DimensionMismatch(format!(
                "label {} out of range for {} classes",
                s.y,
                self.num_classes()
            )));
        }
        Ok(())
    }

    fn check_params(&self, theta: &ParameterVector) -> Result<()> {
        if theta.values.len() != self.param_count() {
            return Err(AuditError::DimensionMismatch(format!(
                "parameter vector has length {}, model expects {}",
                theta.values.len(),
                self.param_count()
            )));
        }
        Ok(())
    }
}

/// Flat model parameters θ ∈ R^d.
///
/// Layout for `Linear`: `[W row-major (one row per class), b]`.
/// Layout for `Mlp1`: `[W1 row-major (one row per hidden unit), b1,
/// W2 row-major (one row per class), b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Self {
            values: vec![0.0; spec.param_count()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One labelled input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: usize,
}

/// Gradient of the loss w.r.t. θ; same layout as [`ParameterVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
}

// Stable log-sum-exp and softmax over logits.
fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|&s| (s - m).exp()).sum::<f64>().ln()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&s| (s - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

// Parameter-block views for the two layouts.
struct LinearBlocks<'a> {
    w: &'a [f64], // num_classes × input_dim, row-major
    b: &'a [f64], // num_classes
}

fn linear_blocks<'a>(theta: &'a [f64], n: usize, k: usize) -> LinearBlocks<'a> {
    LinearBlocks {
        w: &theta[..k * n],
        b: &theta[k * n..],
    }
}

struct Mlp1Blocks<'a> {
    w1: &'a [f64], // hidden × input, row-major
    b1: &'a [f64], // hidden
    w2: &'a [f64], // classes × hidden, row-major
    b2: &'a [f64], // classes
}

fn mlp1_blocks<'a>(theta: &'a [f64], n: usize, h: usize, k: usize) -> Mlp1Blocks<'a> {
    let (w1, rest) = theta.split_at(h * n);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(k * h);
    Mlp1Blocks { w1, b1, w2, b2 }
}

fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for r in 0..rows {
        out[r] = dot(&m[r * cols..(r + 1) * cols], x);
    }
}

/// out += Mᵀ·x, with M given row-major as rows × cols.
fn matvec_t_acc(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        for c in 0..cols {
            out[c] += row[c] * x[r];
        }
    }
}

// Softmax Jacobian applied to a vector: P·z = p ⊙ z − p·⟨p, z⟩.
fn softmax_jacobian_apply(p: &[f64], z: &[f64]) -> Vec<f64> {
    let pz = dot(p, z);
    p.iter().zip(z).map(|(&pi, &zi)| pi * (zi - pz)).collect()
}

struct LinearForward {
    probs: Vec<f64>,
    loss: f64,
}

fn linear_forward(blocks: &LinearBlocks, n: usize, k: usize, s: &Sample) -> LinearForward {
    let mut logits = vec![0.0; k];
    matvec(blocks.w, k, n, &s.x, &mut logits);
    for c in 0..k {
        logits[c] += blocks.b[c];
    }
    let loss = log_sum_exp(&logits) - logits[s.y];
    LinearForward {
        probs: softmax(&logits),
        loss,
    }
}

struct Mlp1Forward {
    hidden: Vec<f64>, // tanh activations
    probs: Vec<f64>,
    loss: f64,
}

fn mlp1_forward(blocks: &Mlp1Blocks, n: usize, h: usize, k: usize, s: &Sample) -> Mlp1Forward {
    let mut pre = vec![0.0; h];
    matvec(blocks.w1, h, n, &s.x, &mut pre);
    let hidden: Vec<f64> = pre
        .iter()
        .zip(blocks.b1)
        .map(|(&a, &b)| (a + b).tanh())
        .collect();
    let mut logits = vec![0.0; k];
    matvec(blocks.w2, k, h, &hidden, &mut logits);
    for c in 0..k {
        logits[c] += blocks.b2[c];
    }
    let loss = log_sum_exp(&logits) - logits[s.y];
    Mlp1Forward {
        hidden,
        probs: softmax(&logits),
        loss,
    }
}

/// Cross-entropy of the softmax output against the sample's label.
pub fn loss(spec: &ModelSpec, theta: &ParameterVector, s: &Sample) -> Result<f64> {
    spec.check_params(theta)?;
    spec.check_sample(s)?;
    let value = match *spec {
        ModelSpec::Linear {
            input_dim: n,
            num_classes: k,
        } => linear_forward(&linear_blocks(&theta.values, n, k), n, k, s).loss,
        ModelSpec::Mlp1 {
            input_dim: n,
            hidden_dim: h,
            num_classes: k,
        } => mlp1_forward(&mlp1_blocks(&theta.values, n, h, k), n, h, k, s).loss,
    };
    Ok(value)
}

/// Analytic gradient of the loss w.r.t. θ.
pub fn param_grad(spec: &ModelSpec, theta: &ParameterVector, s: &Sample) -> Result<GradientVector> {
    spec.check_params(theta)?;
    spec.check_sample(s)?;
    let mut g = vec![0.0; spec.param_count()];
    match *spec {
        ModelSpec::Linear {
            input_dim: n,
            num_classes: k,
        } => {
            let blocks = linear_blocks(&theta.values, n, k);
            let fwd = linear_forward(&blocks, n, k, s);
            // d logits = p − onehot(y)
            for c in 0..k {
                let ds = fwd.probs[c] - if c == s.y { 1.0 } else { 0.0 };
                for j in 0..n {
                    g[c * n + j] = ds * s.x[j];
                }
                g[k * n + c] = ds;
            }
        }
        ModelSpec::Mlp1 {
            input_dim: n,
            hidden_dim: h,
            num_classes: k,
        } => {
            let blocks = mlp1_blocks(&theta.values, n, h, k);
            let fwd = mlp1_forward(&blocks, n, h, k, s);
            let ds: Vec<f64> = (0..k)
                .map(|c| fwd.probs[c] - if c == s.y { 1.0 } else { 0.0 })
                .collect();
            // Backprop through the output layer.
            let mut dh = vec![0.0; h];
            matvec_t_acc(blocks.w2, k, h, &ds, &mut dh);
            // Through tanh: da = dh ⊙ (1 − h²).
            let da: Vec<f64> = dh
                .iter()
                .zip(&fwd.hidden)
                .map(|(&dhi, &hi)| dhi * (1.0 - hi * hi))
                .collect();
            let (gw1, rest) = g.split_at_mut(h * n);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(k * h);
            for r in 0..h {
                for j in 0..n {
                    gw1[r * n + j] = da[r] * s.x[j];
                }
                gb1[r] = da[r];
            }
            for c in 0..k {
                for r in 0..h {
                    gw2[c * h + r] = ds[c] * fwd.hidden[r];
                }
                gb2[c] = ds[c];
            }
        }
    }
    Ok(GradientVector { values: g })
}

/// Mixed second derivative: ∇ₓ⟨v, ∇_θ ℓ(x, y; θ)⟩ for fixed v.
///
/// This is the Hessian block ∂²ℓ/∂x∂θ applied to v, derived in closed form
/// for both architectures; it is linear in v.
pub fn input_grad_of_param_dot(
    spec: &ModelSpec,
    theta: &ParameterVector,
    z: &Sample,
    v: &GradientVector,
) -> Result<Vec<f64>> {
    spec.check_params(theta)?;
    spec.check_sample(z)?;
    if v.values.len() != spec.param_count() {
        return Err(AuditError::DimensionMismatch(format!(
            "direction vector has length {}, model expects {}",
            v.values.len(),
            spec.param_count()
        )));
    }
    match *spec {
        ModelSpec::Linear {
            input_dim: n,
            num_classes: k,
        } => {
            let blocks = linear_blocks(&theta.values, n, k);
            let vb = linear_blocks(&v.values, n, k);
            let fwd = linear_forward(&blocks, n, k, z);
            let ds: Vec<f64> = (0..k)
                .map(|c| fwd.probs[c] - if c == z.y { 1.0 } else { 0.0 })
                .collect();
            // ⟨v, ∇_θℓ⟩ = ⟨ds, r⟩ with r_c = ⟨vW_c, x⟩ + vb_c, so
            // ∇ₓ = Wᵀ·(P·r) + vWᵀ·ds where P is the softmax Jacobian.
            let mut r = vec![0.0; k];
            matvec(vb.w, k, n, &z.x, &mut r);
            for c in 0..k {
                r[c] += vb.b[c];
            }
            let pr = softmax_jacobian_apply(&fwd.probs, &r);
            let mut out = vec![0.0; n];
            matvec_t_acc(blocks.w, k, n, &pr, &mut out);
            matvec_t_acc(vb.w, k, n, &ds, &mut out);
            Ok(out)
        }
        ModelSpec::Mlp1 {
            input_dim: n,
            hidden_dim: h,
            num_classes: k,
        } => {
            let blocks = mlp1_blocks(&theta.values, n, h, k);
            let vb = mlp1_blocks(&v.values, n, h, k);
            let fwd = mlp1_forward(&blocks, n, h, k, z);
            let p = &fwd.probs;
            let hid = &fwd.hidden;
            let t: Vec<f64> = hid.iter().map(|&hi| 1.0 - hi * hi).collect();
            let ds: Vec<f64> = (0..k)
                .map(|c| p[c] - if c == z.y { 1.0 } else { 0.0 })
                .collect();
            let mut dh = vec![0.0; h];
            matvec_t_acc(blocks.w2, k, h, &ds, &mut dh);
            let da: Vec<f64> = dh.iter().zip(&t).map(|(&x, &ti)| x * ti).collect();

            // ⟨v, ∇_θℓ⟩ = ⟨ds, α⟩ + ⟨da, β⟩ with
            //   α = vW2·h + vb2 and β = vW1·x + vb1.
            let mut alpha = vec![0.0; k];
            matvec(vb.w2, k, h, hid, &mut alpha);
            for c in 0..k {
                alpha[c] += vb.b2[c];
            }
            let mut beta = vec![0.0; h];
            matvec(vb.w1, h, n, &z.x, &mut beta);
            for r in 0..h {
                beta[r] += vb.b1[r];
            }

            // Differentiating both inner products through x gives four terms
            // routed through W1ᵀ plus one direct vW1ᵀ term:
            //   W1ᵀ[ t ⊙ (W2ᵀ(P·α) + vW2ᵀ·ds + W2ᵀ(P·(W2·(t⊙β))))
            //        − 2·β ⊙ dh ⊙ h ⊙ t ] + vW1ᵀ·da
            let pa = softmax_jacobian_apply(p, &alpha);
            let mut through_h = vec![0.0; h];
            matvec_t_acc(blocks.w2, k, h, &pa, &mut through_h);
            matvec_t_acc(vb.w2, k, h, &ds, &mut through_h);
            let tb: Vec<f64> = t.iter().zip(&beta).map(|(&ti, &bi)| ti * bi).collect();
            let mut w2tb = vec![0.0; k];
            matvec(blocks.w2, k, h, &tb, &mut w2tb);
            let pw2tb = softmax_jacobian_apply(p, &w2tb);
            matvec_t_acc(blocks.w2, k, h, &pw2tb, &mut through_h);

            let inner: Vec<f64> = (0..h)
                .map(|r| t[r] * through_h[r] - 2.0 * beta[r] * dh[r] * hid[r] * t[r])
                .collect();
            let mut out = vec![0.0; n];
            matvec_t_acc(blocks.w1, h, n, &inner, &mut out);
            matvec_t_acc(vb.w1, h, n, &da, &mut out);
            Ok(out)
        }
    }
}

/// ∇ₓ‖∇_θ ℓ(z)‖, computed as the mixed derivative applied to the normalized
/// parameter gradient. Errors when the gradient norm is below
/// [`DEGENERATE_GRADIENT_EPS`].
pub fn input_grad_of_grad_norm(
    spec: &ModelSpec,
    theta: &ParameterVector,
    z: &Sample,
) -> Result<Vec<f64>> {
    let g = param_grad(spec, theta, z)?;
    let norm = crate::vecmath::l2_norm(&g.values);
    if norm < DEGENERATE_GRADIENT_EPS {
        return Err(AuditError::DegenerateGradient {
            norm,
            threshold: DEGENERATE_GRADIENT_EPS,
        });
    }
    let unit = GradientVector {
        values: g.values.iter().map(|&x| x / norm).collect(),
    };
    input_grad_of_param_dot(spec, theta, z, &unit)
}
