//! The `Lid_1` (Kantorovich–Rubinstein) distance between finite atomic
//! measures of equal total mass and the resulting lower bound on the energy.

use std::collections::HashMap;

use serde::Serialize;

use crate::cost::TransportCost;
use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::grid::{check_exponent, lp_norm, TimeGrid};
use crate::measures::{AtomicMeasurePath, SignedAtomicPath};
use crate::point::Point;

/// Atoms below this magnitude are dropped from the difference measure.
const ATOM_EPS: f64 = 1e-14;
const BALANCE_TOL: f64 = 1e-9;

/// A finite signed atomic measure.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedSignedMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl BalancedSignedMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(first) = points.first() {
            if points.iter().any(|p| p.dim() != first.dim()) {
                return Err(Error::Shape("points differ in dimension".into()));
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Shape("non-finite weight".into()));
        }
        Ok(Self { points, weights })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `Lid_1(m1, m2)`: the optimal transport cost between the positive and
/// negative parts of `m1 - m2` under Euclidean ground cost.
pub fn lid1(m1: &BalancedSignedMeasure, m2: &BalancedSignedMeasure) -> Result<f64> {
    let (t1, t2) = (m1.total(), m2.total());
    let scale = m1
        .weights
        .iter()
        .chain(&m2.weights)
        .map(|w| w.abs())
        .sum::<f64>()
        .max(1.0);
    if (t1 - t2).abs() > BALANCE_TOL * scale {
        return Err(Error::Unbalanced { left: t1, right: t2 });
    }
    let mut diff: Vec<(Point, f64)> = Vec::new();
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::new();
    for (sign, m) in [(1.0, m1), (-1.0, m2)] {
        for (p, w) in m.points.iter().zip(&m.weights) {
            let i = *slot.entry(p.key()).or_insert_with(|| {
                diff.push((p.clone(), 0.0));
                diff.len() - 1
            });
            diff[i].1 += sign * w;
        }
    }
    let pos: Vec<&(Point, f64)> = diff.iter().filter(|d| d.1 > ATOM_EPS).collect();
    let neg: Vec<&(Point, f64)> = diff.iter().filter(|d| d.1 < -ATOM_EPS).collect();
    if pos.is_empty() || neg.is_empty() {
        return Ok(0.0);
    }
    let mut net = FlowNetwork::new(pos.len() + neg.len());
    for (i, a) in pos.iter().enumerate() {
        for (j, b) in neg.iter().enumerate() {
            net.add_arc(i, pos.len() + j, f64::INFINITY, a.0.dist(&b.0));
        }
    }
    let supply: Vec<f64> = pos.iter().chain(&neg).map(|d| d.1).collect();
    let sol = net
        .solve(&supply)
        .ok_or_else(|| Error::Consistency("transport between balanced parts failed".into()))?;
    Ok(sol.cost)
}

/// Read access shared by probability and signed measure paths.
pub trait SampledPath {
    fn points(&self) -> &[Point];
    fn sample(&self, j: usize) -> Vec<f64>;
    fn grid(&self) -> TimeGrid;

    fn measure_at(&self, j: usize) -> BalancedSignedMeasure {
        BalancedSignedMeasure {
            points: self.points().to_vec(),
            weights: self.sample(j),
        }
    }
}

impl SampledPath for AtomicMeasurePath {
    fn points(&self) -> &[Point] {
        AtomicMeasurePath::points(self)
    }
    fn sample(&self, j: usize) -> Vec<f64> {
        AtomicMeasurePath::sample(self, j)
    }
    fn grid(&self) -> TimeGrid {
        AtomicMeasurePath::grid(self)
    }
}

impl SampledPath for SignedAtomicPath {
    fn points(&self) -> &[Point] {
        SignedAtomicPath::points(self)
    }
    fn sample(&self, j: usize) -> Vec<f64> {
        SignedAtomicPath::sample(self, j)
    }
    fn grid(&self) -> TimeGrid {
        SignedAtomicPath::grid(self)
    }
}

/// `t_j -> Lid_1(A[t_j], B[t_j])`.
pub fn lid1_series<A: SampledPath>(a: &A, b: &A) -> Result<Vec<f64>> {
    a.grid().check_same(&b.grid())?;
    (0..a.grid().len())
        .map(|j| lid1(&a.measure_at(j), &b.measure_at(j)))
        .collect()
}

/// Discrete `L^p` norm in time of [`lid1_series`].
pub fn lid1_path_norm<A: SampledPath>(a: &A, b: &A, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_norm(&lid1_series(a, b)?, p))
}

/// `rho(tau, 1) |Lid_1(mu+, mu-)|_p + lambda |Lid_1(nu+, nu-)|_p` and its parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBound {
    pub value: f64,
    pub lid1_term: f64,
    pub derivative_lid1_term: f64,
    pub rho: f64,
    /// Set when `rho(tau, 1) != 1`, where the placement of `rho` matters.
    pub rho_differs_from_one: bool,
}

/// Certified lower bound on the energy of every never-cyclic path between
/// `plus` and `minus`.
pub fn lower_bound(
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    tau: &TransportCost,
    p: f64,
    lambda: f64,
) -> Result<LowerBound> {
    check_exponent(p)?;
    let rho = tau.rho(1.0)?;
    let lid1_term = lid1_path_norm(plus, minus, p)?;
    let derivative_lid1_term = lid1_path_norm(&plus.derivative(), &minus.derivative(), p)?;
    Ok(LowerBound {
        value: rho * lid1_term + lambda * derivative_lid1_term,
        lid1_term,
        derivative_lid1_term,
        rho,
        rho_differs_from_one: (rho - 1.0).abs() > 1e-12,
    })
}
