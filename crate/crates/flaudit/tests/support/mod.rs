//! Shared helpers for integration tests: an independent high-precision
//! quadrature oracle for the subsampled-Gaussian Rényi divergence, finite
//! differences, and small statistics utilities.
//!
//! Nothing here touches the production accounting or autodiff paths; that is
//! the point.

#![allow(dead_code)]

/// Rényi divergence of order `alpha` between the subsampled-Gaussian mixture
/// p1 = (1−q)·N(0,σ²) + q·N(1,σ²) and the base p0 = N(0,σ²), computed by
/// composite Simpson quadrature of E_{p0}[(p1/p0)^α] in log space.
pub fn sgm_rdp_quadrature(sigma: f64, q: f64, alpha: f64) -> f64 {
    assert!(sigma > 0.0 && q > 0.0 && q <= 1.0 && alpha > 1.0);
    // log of the integrand: ln p0(x) + α·ln((1−q) + q·exp((2x−1)/(2σ²)))
    let log_f = |x: f64| -> f64 {
        let u = (2.0 * x - 1.0) / (2.0 * sigma * sigma);
        let log_ratio = if q == 1.0 {
            u
        } else if u > 30.0 {
            u + (q + (1.0 - q) * (-u).exp()).ln()
        } else {
            ((1.0 - q) + q * u.exp()).ln()
        };
        -x * x / (2.0 * sigma * sigma)
            - (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
            + alpha * log_ratio
    };
    // The integrand peaks between 0 and α; pad generously with Gaussian tails.
    let lo = -1.0 - 45.0 * sigma;
    let hi = alpha.max(1.0) + 45.0 * sigma + 1.0;
    let n = 400_001; // odd count for Simpson
    let h = (hi - lo) / (n - 1) as f64;
    let logs: Vec<f64> = (0..n).map(|i| log_f(lo + i as f64 * h)).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    for (i, &lf) in logs.iter().enumerate() {
        let w = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (lf - m).exp();
    }
    let log_integral = m + (acc * h / 3.0).ln();
    (log_integral / (alpha - 1.0)).max(0.0)
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

/// |a − b| scaled by max(1, |a|, |b|).
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

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Sample skewness (biased, moment-based), used for normality smoke checks.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}
