use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic sampling `t_j = j / N` of the unit time interval.
///
/// Index `N` wraps to `0`, which realizes the periodicity `G[0] = G[1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    samples: usize,
}

impl TimeGrid {
    pub fn new(samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::Domain(format!(
                "time grid needs at least 2 samples, got {samples}"
            )));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        1.0 / self.samples as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        (j % self.samples) as f64 / self.samples as f64
    }

    pub fn next(&self, j: usize) -> usize {
        (j + 1) % self.samples
    }

    pub fn prev(&self, j: usize) -> usize {
        (j + self.samples - 1) % self.samples
    }

    pub fn check_same(&self, other: &TimeGrid) -> Result<()> {
        if self.samples != other.samples {
            return Err(Error::GridMismatch {
                left: self.samples,
                right: other.samples,
            });
        }
        Ok(())
    }

    /// Periodic forward difference scaled by `N`.
    pub fn forward_difference(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.samples);
        let n = self.samples as f64;
        (0..self.samples)
            .map(|j| n * (values[self.next(j)] - values[j]))
            .collect()
    }
}

/// Checks that `p` is a valid time-integrability exponent, `1 < p <= inf`.
pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::Domain(format!("exponent p must satisfy 1 < p <= inf, got {p}")));
    }
    Ok(())
}

/// Discrete `L^p` norm over the time grid with the left-endpoint rule:
/// `((1/N) sum_j |v_j|^p)^(1/p)`, or `max_j |v_j|` when `p` is infinite.
pub fn lp_norm(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    // scale by the peak so large p does not overflow
    let mean = values.iter().map(|v| (v.abs() / peak).powf(p)).sum::<f64>() / values.len() as f64;
    peak * mean.powf(1.0 / p)
}

/// A subgradient of `lp_norm` with respect to each sample value (values assumed nonnegative).
pub fn lp_norm_gradient(values: &[f64], p: f64) -> Vec<f64> {
    let norm = lp_norm(values, p);
    let mut grad = vec![0.0; values.len()];
    if norm == 0.0 {
        return grad;
    }
    if p.is_infinite() {
        let (arg, _) = values.iter().enumerate().fold(
            (0, f64::MIN),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        );
        grad[arg] = 1.0;
        return grad;
    }
    let n = values.len() as f64;
    for (g, v) in grad.iter_mut().zip(values) {
        *g = (v / norm).powf(p - 1.0) / n;
    }
    grad
}
