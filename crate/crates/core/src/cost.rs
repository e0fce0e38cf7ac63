//! Transportation costs `tau`, their admissibility witnesses and the
//! subadditivity constant `rho(tau, m) = inf_{w in [m/2, m]} tau(w) / w`.
//!
//! Two kinds are supported: concave powers `s^alpha` with `0 < alpha <= 1`
//! and continuous piecewise-linear tables. Tables are checked for the cost
//! axioms at construction (zero at the origin, positive and nondecreasing
//! afterwards, subadditive on a geometric lattice of pairs).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

const SUBADDITIVITY_SLACK: f64 = 1e-12;
const LATTICE_SIZE: usize = 64;
const RHO_GRID: usize = 10_000;

/// Concave majorant `beta >= tau` used to certify admissibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Majorant {
    /// `coef * s^alpha`.
    Power { coef: f64, alpha: f64 },
    /// Piecewise-linear through `(s, beta(s))` pairs, starting at `s = 0`,
    /// constant past the last sample.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl Majorant {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Majorant::Power { coef, alpha } => coef * s.max(0.0).powf(*alpha),
            Majorant::Tabulated { samples } => interpolate(samples, s),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Majorant::Power { coef, alpha } => {
                if !(*coef > 0.0) || !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::InvalidCost(format!(
                        "power majorant needs coef > 0 and 0 < alpha <= 1, got {coef}, {alpha}"
                    )));
                }
            }
            Majorant::Tabulated { samples } => {
                if samples.len() < 2 || samples[0].0 != 0.0 {
                    return Err(Error::InvalidCost(
                        "tabulated majorant needs at least two samples starting at s = 0".into(),
                    ));
                }
                check_increasing(samples)?;
                // concavity: slopes nonincreasing and the constant tail needs a nonnegative last slope
                let slopes: Vec<f64> = samples
                    .windows(2)
                    .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                    .collect();
                if slopes.windows(2).any(|s| s[1] > s[0] + 1e-12) || slopes.last().copied().unwrap_or(0.0) < 0.0 {
                    return Err(Error::InvalidCost("tabulated majorant is not concave".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostKind {
    Power { alpha: f64 },
    Tabulated { samples: Vec<(f64, f64)> },
}

/// A subadditive, nondecreasing, lower semi-continuous transportation cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportCost {
    kind: CostKind,
    witness: Option<Majorant>,
}

/// Outcome of [`TransportCost::check_admissible`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub diagnostic: String,
}

impl TransportCost {
    /// `tau(s) = s^alpha`; the cost is its own concave majorant.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidCost(format!(
                "power exponent must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(Self {
            kind: CostKind::Power { alpha },
            witness: Some(Majorant::Power { coef: 1.0, alpha }),
        })
    }

    /// Piecewise-linear cost through `(s, tau(s))` pairs with strictly
    /// increasing `s`. A leading `(0, 0)` is implied when the first sample is
    /// positive.
    pub fn tabulated(pairs: Vec<(f64, f64)>, witness: Option<Majorant>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidCost("tabulated cost needs at least one sample".into()));
        }
        let mut samples = pairs;
        if samples[0].0 < 0.0 {
            return Err(Error::InvalidCost("tabulated cost has a negative abscissa".into()));
        }
        if samples[0].0 > 0.0 {
            samples.insert(0, (0.0, 0.0));
        } else if samples[0].1 != 0.0 {
            return Err(Error::InvalidCost("tau(0) must be 0".into()));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidCost("tabulated cost needs a positive sample".into()));
        }
        check_increasing(&samples)?;
        if samples[1].1 <= 0.0 {
            return Err(Error::InvalidCost("tau must be positive on (0, inf)".into()));
        }
        if samples.windows(2).any(|w| w[1].1 < w[0].1) {
            return Err(Error::InvalidCost("tau must be nondecreasing".into()));
        }
        if let Some(w) = &witness {
            w.validate()?;
        }
        let cost = Self {
            kind: CostKind::Tabulated { samples },
            witness,
        };
        cost.check_lattice()?;
        if let Some(w) = &cost.witness {
            let hi = cost.lattice_top();
            for s in geometric_lattice(hi) {
                if cost.value(s) > w.eval(s) + 1e-12 {
                    return Err(Error::InvalidCost(format!(
                        "admissibility witness is not a majorant at s = {s}"
                    )));
                }
            }
        }
        Ok(cost)
    }

    pub fn kind(&self) -> &CostKind {
        &self.kind
    }

    pub fn witness(&self) -> Option<&Majorant> {
        self.witness.as_ref()
    }

    /// `tau(s)` for `s >= 0`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if s.is_nan() || s < 0.0 {
            return Err(Error::Domain(format!("cost evaluated at negative mass {s}")));
        }
        Ok(self.value(s))
    }

    /// Unchecked evaluation; negative inputs are clamped to zero.
    pub fn value(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match &self.kind {
            CostKind::Power { alpha } => {
                if s == 0.0 {
                    0.0
                } else {
                    s.powf(*alpha)
                }
            }
            CostKind::Tabulated { samples } => interpolate(samples, s),
        }
    }

    /// Right derivative of `tau` at `s`, evaluated at `max(s, floor)`.
    pub fn slope(&self, s: f64, floor: f64) -> f64 {
        let s = s.max(floor).max(0.0);
        match &self.kind {
            CostKind::Power { alpha } => {
                if s == 0.0 {
                    f64::INFINITY
                } else {
                    alpha * s.powf(alpha - 1.0)
                }
            }
            CostKind::Tabulated { samples } => {
                let i = samples.partition_point(|&(x, _)| x <= s);
                if i >= samples.len() {
                    0.0
                } else {
                    let (a, b) = (samples[i - 1], samples[i]);
                    (b.1 - a.1) / (b.0 - a.0)
                }
            }
        }
    }

    /// Checks the integral condition `int_0^1 s^(1/n - 2) beta(s) ds < inf`.
    pub fn check_admissible(&self, n: usize) -> Result<Admissibility> {
        if n == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        match (&self.kind, &self.witness) {
            (CostKind::Power { alpha }, _) => {
                let threshold = 1.0 - 1.0 / n as f64;
                let admissible = *alpha > threshold;
                Ok(Admissibility {
                    admissible,
                    diagnostic: format!(
                        "power cost: alpha = {alpha} {} 1 - 1/n = {threshold}",
                        if admissible { ">" } else { "<=" }
                    ),
                })
            }
            (CostKind::Tabulated { .. }, None) => Err(Error::NoWitness),
            (CostKind::Tabulated { .. }, Some(beta)) => Ok(integral_test(beta, n)),
        }
    }

    /// `rho(tau, m) = inf_{w in [m/2, m]} tau(w) / w`.
    pub fn rho(&self, m: f64) -> Result<f64> {
        if m.is_nan() || m <= 0.0 {
            return Err(Error::Domain(format!("rho needs m > 0, got {m}")));
        }
        match &self.kind {
            // w^(alpha-1) is nonincreasing, so the infimum sits at w = m
            CostKind::Power { alpha } => Ok(m.powf(alpha - 1.0)),
            CostKind::Tabulated { .. } => {
                let lo = m / 2.0;
                let h = (m - lo) / RHO_GRID as f64;
                let inf = (0..=RHO_GRID)
                    .map(|i| {
                        let w = if i == RHO_GRID { m } else { lo + i as f64 * h };
                        self.value(w) / w
                    })
                    .fold(f64::INFINITY, f64::min);
                Ok(inf)
            }
        }
    }

    fn lattice_top(&self) -> f64 {
        match &self.kind {
            CostKind::Power { .. } => 2.0,
            CostKind::Tabulated { samples } => samples.last().map_or(1.0, |s| s.0).max(1.0) * 2.0,
        }
    }

    fn check_lattice(&self) -> Result<()> {
        let lattice = geometric_lattice(self.lattice_top());
        for (i, &a) in lattice.iter().enumerate() {
            for &b in &lattice[i..] {
                let lhs = self.value(a + b);
                let rhs = self.value(a) + self.value(b);
                if lhs > rhs + SUBADDITIVITY_SLACK {
                    return Err(Error::InvalidCost(format!(
                        "subadditivity fails: tau({a} + {b}) = {lhs} > {rhs}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// 64 geometric samples spanning `[1e-6 * hi, hi]`.
fn geometric_lattice(hi: f64) -> Vec<f64> {
    let lo = hi * 1e-6;
    let ratio = (hi / lo).powf(1.0 / (LATTICE_SIZE - 1) as f64);
    (0..LATTICE_SIZE).map(|i| lo * ratio.powi(i as i32)).collect()
}

fn check_increasing(samples: &[(f64, f64)]) -> Result<()> {
    if samples
        .iter()
        .any(|&(s, v)| !s.is_finite() || !v.is_finite() || v < 0.0)
    {
        return Err(Error::InvalidCost(
            "table entries must be finite and nonnegative".into(),
        ));
    }
    if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidCost("table abscissae must be strictly increasing".into()));
    }
    Ok(())
}

fn interpolate(samples: &[(f64, f64)], s: f64) -> f64 {
    let last = samples[samples.len() - 1];
    if s >= last.0 {
        return last.1;
    }
    let i = samples.partition_point(|&(x, _)| x <= s);
    let (a, b) = (samples[i - 1], samples[i]);
    a.1 + (b.1 - a.1) * (s - a.0) / (b.0 - a.0)
}

/// Integrates `s^(1/n-2) beta(s)` over dyadic shells down to `~1e-12` and
/// declares divergence when shell contributions stop decaying.
fn integral_test(beta: &Majorant, n: usize) -> Admissibility {
    const SHELLS: usize = 40;
    let gl = GaussLegendre::order8();
    let exponent = 1.0 / n as f64 - 2.0;
    // shell [2^{-m-1}, 2^{-m}], integrated in the variable u = ln s
    let shells: Vec<f64> = (0..SHELLS)
        .map(|m| {
            let hi = (-(m as f64) * std::f64::consts::LN_2).exp();
            let (a, b) = (hi.ln() - std::f64::consts::LN_2, hi.ln());
            gl.integrate(a, b, |u| {
                let s = u.exp();
                s.powf(exponent + 1.0) * beta.eval(s)
            })
        })
        .collect();
    let total: f64 = shells.iter().sum();
    let tail = &shells[SHELLS - 11..];
    let ratio = if tail[0] > 0.0 && tail[10] > 0.0 {
        (tail[10] / tail[0]).powf(0.1)
    } else if tail[10] == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let admissible = ratio < 1.0 - 1e-3;
    Admissibility {
        admissible,
        diagnostic: format!(
            "partial integral down to 2^-{SHELLS}: {total:.6e}; shell decay ratio {ratio:.6} ({})",
            if admissible { "converges" } else { "diverges" }
        ),
    }
}
