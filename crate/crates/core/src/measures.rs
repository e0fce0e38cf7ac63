//! Time-periodic atomic probability-measure paths on a uniform grid.

use std::collections::BTreeMap;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cells::DyadicLevelSpec;
use crate::error::{Error, Result};
use crate::grid::{lp_norm, TimeGrid};
use crate::point::Point;
use crate::quadrature::GaussLegendre;

/// Tolerance for the per-sample mass condition.
pub const MASS_TOL: f64 = 1e-9;

/// Atoms at fixed points with nonnegative weights summing to one per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasurePath {
    points: Vec<Point>,
    /// `weights[i][j] = a_i(t_j)`.
    weights: Vec<Vec<f64>>,
    grid: TimeGrid,
}

/// Same shape as [`AtomicMeasurePath`], signed weights with zero total per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedAtomicPath {
    points: Vec<Point>,
    weights: Vec<Vec<f64>>,
    grid: TimeGrid,
}

fn check_shape(points: &[Point], weights: &[Vec<f64>], grid: TimeGrid) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::Shape("a measure path needs at least one atom".into()));
    }
    if weights.len() != points.len() {
        return Err(Error::Shape(format!(
            "{} points but {} weight rows",
            points.len(),
            weights.len()
        )));
    }
    let dim = points[0].dim();
    for (i, p) in points.iter().enumerate() {
        if p.dim() != dim {
            return Err(Error::Shape(format!(
                "point {i} has dimension {}, expected {dim}",
                p.dim()
            )));
        }
        if p.coords().iter().any(|c| !c.is_finite()) {
            return Err(Error::Shape(format!("point {i} has a non-finite coordinate")));
        }
    }
    for (i, row) in weights.iter().enumerate() {
        if row.len() != grid.len() {
            return Err(Error::Shape(format!(
                "weight row {i} has {} samples, grid has {}",
                row.len(),
                grid.len()
            )));
        }
        if let Some(j) = row.iter().position(|w| !w.is_finite()) {
            return Err(Error::Shape(format!("weight of atom {i} at sample {j} is not finite")));
        }
    }
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        if let Some(&first) = seen.get(&p.key()) {
            return Err(Error::DuplicatePoint { first, second: i });
        }
        seen.insert(p.key(), i);
    }
    Ok(dim)
}

impl AtomicMeasurePath {
    /// Validates a weight table. Per-sample sums within [`MASS_TOL`] of one are
    /// renormalized; larger deviations are rejected.
    pub fn new(points: Vec<Point>, mut weights: Vec<Vec<f64>>, grid: TimeGrid) -> Result<Self> {
        check_shape(&points, &weights, grid)?;
        for (i, row) in weights.iter().enumerate() {
            if let Some((j, &value)) = row.iter().enumerate().find(|(_, w)| **w < 0.0) {
                return Err(Error::NegativeWeight {
                    atom: i,
                    sample: j,
                    value,
                });
            }
        }
        for j in 0..grid.len() {
            let total: f64 = weights.iter().map(|row| row[j]).sum();
            if (total - 1.0).abs() > MASS_TOL {
                return Err(Error::MassCondition { sample: j, total });
            }
            if total != 1.0 {
                for row in weights.iter_mut() {
                    row[j] /= total;
                }
            }
        }
        Ok(Self { points, weights, grid })
    }

    /// Time-constant path.
    pub fn constant(points: Vec<Point>, masses: &[f64], grid: TimeGrid) -> Result<Self> {
        let weights = masses.iter().map(|&m| vec![m; grid.len()]).collect();
        Self::new(points, weights, grid)
    }

    pub fn dirac(point: Point, grid: TimeGrid) -> Self {
        Self {
            points: vec![point],
            weights: vec![vec![1.0; grid.len()]],
            grid,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weights of all atoms at sample `j`.
    pub fn sample(&self, j: usize) -> Vec<f64> {
        self.weights.iter().map(|row| row[j]).collect()
    }

    pub fn index_of(&self, point: &Point) -> Option<usize> {
        let key = point.key();
        self.points.iter().position(|p| p.key() == key)
    }

    /// Periodic forward difference `nu_i(t_j) = N (a_i(t_{j+1}) - a_i(t_j))`.
    pub fn derivative(&self) -> SignedAtomicPath {
        SignedAtomicPath {
            points: self.points.clone(),
            weights: self
                .weights
                .iter()
                .map(|row| self.grid.forward_difference(row))
                .collect(),
            grid: self.grid,
        }
    }

    /// Discrete `L^p` norm in time of the total variation of the derivative.
    pub fn sobolev_seminorm(&self, p: f64) -> Result<f64> {
        crate::grid::check_exponent(p)?;
        Ok(self.derivative().tv_lp_norm(p))
    }

    /// Same weights, every point moved by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Self {
        Self {
            points: self.points.iter().map(|p| p.translated(offset)).collect(),
            weights: self.weights.clone(),
            grid: self.grid,
        }
    }

    /// Applies `f` to every support point; fails if two images coincide.
    pub fn map_points(&self, f: impl Fn(&Point) -> Point) -> Result<Self> {
        let points: Vec<Point> = self.points.iter().map(f).collect();
        check_shape(&points, &self.weights, self.grid)?;
        Ok(Self {
            points,
            weights: self.weights.clone(),
            grid: self.grid,
        })
    }

    /// Aggregation onto the centers of the level-`k` cells of the standard
    /// root cell `[-2, 2)^n`.
    pub fn dyadic_project(&self, k: u32) -> Result<Self> {
        self.dyadic_project_with(&DyadicLevelSpec::standard(self.dim()), k)
    }

    pub fn dyadic_project_with(&self, spec: &DyadicLevelSpec, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("dyadic projection level must be at least 1".into()));
        }
        let cells = aggregate_cells(spec, k, &self.points, &self.weights, self.grid)?;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for cell in cells {
            if cell.weights.iter().any(|&w| w != 0.0) {
                points.push(cell.center);
                weights.push(cell.weights);
            }
        }
        Ok(Self {
            points,
            weights,
            grid: self.grid,
        })
    }

    /// Cube masses of the mollified measure `zeta_eps * mu` on the level-`k`
    /// cells of `[-2, 2)^n`, renormalized per sample.
    pub fn mollified_dyadic_project(&self, k: u32, eps: f64) -> Result<MollifiedProjection> {
        mollified_projection(self, &DyadicLevelSpec::standard(self.dim()), k, eps)
    }
}

impl SignedAtomicPath {
    pub fn new(points: Vec<Point>, weights: Vec<Vec<f64>>, grid: TimeGrid) -> Result<Self> {
        check_shape(&points, &weights, grid)?;
        for j in 0..grid.len() {
            let total: f64 = weights.iter().map(|row| row[j]).sum();
            let scale: f64 = weights.iter().map(|row| row[j].abs()).sum::<f64>().max(1.0);
            if total.abs() > MASS_TOL * scale {
                return Err(Error::MassCondition { sample: j, total });
            }
        }
        Ok(Self { points, weights, grid })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn sample(&self, j: usize) -> Vec<f64> {
        self.weights.iter().map(|row| row[j]).collect()
    }

    /// Total variation `sum_i |nu_i(t_j)|` at sample `j`.
    pub fn total_variation(&self, j: usize) -> f64 {
        self.weights.iter().map(|row| row[j].abs()).sum()
    }

    pub fn tv_lp_norm(&self, p: f64) -> f64 {
        let tv: Vec<f64> = (0..self.grid.len()).map(|j| self.total_variation(j)).collect();
        lp_norm(&tv, p)
    }

    /// Aggregation onto level-`k` cell centers, keeping every cell that holds an atom.
    pub fn dyadic_aggregate(&self, spec: &DyadicLevelSpec, k: u32) -> Result<Self> {
        let cells = aggregate_cells(spec, k, &self.points, &self.weights, self.grid)?;
        let (points, weights) = cells.into_iter().map(|c| (c.center, c.weights)).unzip();
        Ok(Self {
            points,
            weights,
            grid: self.grid,
        })
    }
}

/// Total weight of one dyadic cell per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMass {
    pub index: Vec<i64>,
    pub center: Point,
    pub weights: Vec<f64>,
}

/// Sums atom weights per level-`k` cell, for every cell containing an atom,
/// ordered by cell index.
pub fn aggregate_cells(
    spec: &DyadicLevelSpec,
    k: u32,
    points: &[Point],
    weights: &[Vec<f64>],
    grid: TimeGrid,
) -> Result<Vec<CellMass>> {
    spec.check_contains(points)?;
    let mut cells: BTreeMap<Vec<i64>, Vec<f64>> = BTreeMap::new();
    for (p, row) in points.iter().zip(weights) {
        let index = spec.cell_index(p.coords(), k).expect("containment checked");
        let acc = cells.entry(index).or_insert_with(|| vec![0.0; grid.len()]);
        for (a, w) in acc.iter_mut().zip(row) {
            *a += w;
        }
    }
    Ok(cells
        .into_iter()
        .map(|(index, weights)| CellMass {
            center: spec.center(k, &index),
            index,
            weights,
        })
        .collect())
}

/// Result of the mollified projection with the per-sample factors used to
/// restore unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedProjection {
    pub path: AtomicMeasurePath,
    pub renormalization: Vec<f64>,
}

/// The normalized bump `zeta(x) = exp(-1/(1-|x|^2)) / C_n` on the unit ball.
#[derive(Debug, Clone, Copy)]
pub struct Mollifier {
    dim: usize,
    norm: f64,
}

impl Mollifier {
    pub fn new(dim: usize) -> Self {
        let gl = GaussLegendre::order8();
        let radial = gl.integrate_composite(0.0, 1.0, 400, |r| {
            if r >= 1.0 {
                0.0
            } else {
                r.powi(dim as i32 - 1) * (-1.0 / (1.0 - r * r)).exp()
            }
        });
        Self {
            dim,
            norm: sphere_area(dim) * radial,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value at `x` of the unit-scale bump.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - r2)).exp() / self.norm
        }
    }

    /// Value of `zeta_eps(z) = eps^{-n} zeta(z / eps)`.
    pub fn eval_scaled(&self, z: &[f64], eps: f64) -> f64 {
        let x: Vec<f64> = z.iter().map(|v| v / eps).collect();
        self.eval(&x) / eps.powi(self.dim as i32)
    }

    /// Peak value `zeta(0)`.
    pub fn peak(&self) -> f64 {
        (-1.0f64).exp() / self.norm
    }
}

/// Surface area of the unit sphere in `R^n`, `2 pi^{n/2} / Gamma(n/2)`.
fn sphere_area(n: usize) -> f64 {
    // Gamma(n/2) by the recursion Gamma(x + 1) = x Gamma(x)
    let mut gamma = if n.is_multiple_of(2) {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut x = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < n as f64 / 2.0 - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma
}

fn max_panels(dim: usize) -> usize {
    match dim {
        1 => 256,
        2 => 32,
        _ => 8,
    }
}

/// Integral of `zeta_eps(z - x)` over the axis-aligned box `[lo, hi]`,
/// refining panels until successive estimates agree.
fn bump_box_mass(mollifier: &Mollifier, x: &[f64], eps: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let gl = GaussLegendre::order8();
    let f = |z: &[f64]| {
        let shifted: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
        mollifier.eval_scaled(&shifted, eps)
    };
    let mut panels = 1;
    let mut prev = gl.integrate_box(lo, hi, panels, &f);
    while panels < max_panels(x.len()) {
        panels *= 2;
        let next = gl.integrate_box(lo, hi, panels, &f);
        let done = (next - prev).abs() <= 1e-10 * next.abs().max(1e-6);
        prev = next;
        if done {
            break;
        }
    }
    prev
}

fn mollified_projection(
    path: &AtomicMeasurePath,
    spec: &DyadicLevelSpec,
    k: u32,
    eps: f64,
) -> Result<MollifiedProjection> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!(
            "mollification radius must lie in (0, 1), got {eps}"
        )));
    }
    if k == 0 {
        return Err(Error::Domain("dyadic projection level must be at least 1".into()));
    }
    let lower = spec.lower();
    let upper = spec.upper();
    for (index, p) in path.points().iter().enumerate() {
        let inside = p
            .coords()
            .iter()
            .zip(lower.iter().zip(&upper))
            .all(|(&c, (&l, &u))| c - eps >= l && c + eps < u);
        if !inside {
            return Err(Error::OutsideCell {
                index,
                lo: lower.iter().cloned().fold(f64::INFINITY, f64::min),
                hi: upper.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    let mollifier = Mollifier::new(path.dim());
    let side = spec.side(k);
    let grid = path.grid();
    let mut cells: BTreeMap<Vec<i64>, Vec<f64>> = BTreeMap::new();
    for (p, row) in path.points().iter().zip(path.weights()) {
        let x = p.coords();
        // index range of cells meeting the bounding box of the ball
        let ranges: Vec<(i64, i64)> = x
            .iter()
            .zip(&lower)
            .map(|(&c, &l)| {
                let a = ((c - eps - l) / side).floor() as i64;
                let b = ((c + eps - l) / side).floor() as i64;
                (a.max(0), b.min(spec.per_axis(k) - 1))
            })
            .collect();
        for index in box_indices(&ranges) {
            let (clo, chi) = spec.bounds(k, &index);
            let lo: Vec<f64> = clo.iter().zip(x).map(|(&a, &c)| a.max(c - eps)).collect();
            let hi: Vec<f64> = chi.iter().zip(x).map(|(&b, &c)| b.min(c + eps)).collect();
            if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
                continue;
            }
            let mass = bump_box_mass(&mollifier, x, eps, &lo, &hi);
            if mass == 0.0 {
                continue;
            }
            let acc = cells.entry(index).or_insert_with(|| vec![0.0; grid.len()]);
            for (a, w) in acc.iter_mut().zip(row) {
                *a += w * mass;
            }
        }
    }
    let mut renormalization = vec![1.0; grid.len()];
    for (j, factor) in renormalization.iter_mut().enumerate() {
        let total: f64 = cells.values().map(|w| w[j]).sum();
        *factor = 1.0 / total;
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (index, mut w) in cells {
        for (v, f) in w.iter_mut().zip(&renormalization) {
            *v *= f;
        }
        if w.iter().any(|&v| v != 0.0) {
            points.push(spec.center(k, &index));
            weights.push(w);
        }
    }
    Ok(MollifiedProjection {
        path: AtomicMeasurePath::new(points, weights, grid)?,
        renormalization,
    })
}

fn box_indices(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for &(a, b) in ranges {
        let mut next = Vec::new();
        for prefix in &out {
            for i in a..=b {
                let mut v = prefix.clone();
                v.push(i);
                next.push(v);
            }
        }
        out = next;
    }
    out
}
