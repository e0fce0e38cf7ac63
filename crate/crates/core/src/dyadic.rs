//! Multiscale flux constructions on the dyadic cells of `[x - 2s, x + 2s)^n`:
//! elementary and recursive fluxes, band fluxes between two levels with their
//! energy bounds, and the connector between two measure paths.

use serde::Serialize;

use crate::cells::{parent_index, DyadicLevelSpec};
use crate::cost::{Majorant, TransportCost};
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, TransportGraph};
use crate::measures::{aggregate_cells, AtomicMeasurePath};
use crate::point::Point;

/// A graph together with the dyadic level of every edge (`None` for edges
/// that belong to no level, such as the connector bridge).
#[derive(Debug, Clone, PartialEq)]
pub struct LeveledGraph {
    pub graph: TransportGraph,
    pub levels: Vec<Option<u32>>,
}

struct LeveledBuilder {
    builder: GraphBuilder,
    levels: Vec<Option<u32>>,
}

impl LeveledBuilder {
    fn new(dim: usize, path: &AtomicMeasurePath) -> Self {
        Self {
            builder: GraphBuilder::new(dim, path.grid()),
            levels: Vec::new(),
        }
    }

    fn edge(&mut self, tail: &Point, head: &Point, weights: &[f64], level: Option<u32>) -> Result<()> {
        let e = self.builder.edge(tail, head, weights)?;
        if e == self.levels.len() {
            self.levels.push(level);
        }
        Ok(())
    }

    fn build(self) -> Result<LeveledGraph> {
        Ok(LeveledGraph {
            graph: self.builder.build()?,
            levels: self.levels,
        })
    }
}

/// Edges from `x` to the `2^n` centers of the cubes `x + v + [-s, s)^n`,
/// weighted by the cube masses. Zero edges are kept.
pub fn elementary_flux(mu: &AtomicMeasurePath, s: f64, x: &Point) -> Result<TransportGraph> {
    let spec = DyadicLevelSpec::new(x.clone(), s)?;
    Ok(tree_flux(mu, 1, &spec, false)?.graph)
}

/// `G^k`: the elementary fluxes of every cell of levels `0..k`, merged. Lies in
/// `Path(delta_root, P^k(mu))`. Zero edges are kept.
pub fn recursive_flux(mu: &AtomicMeasurePath, k: u32, spec: &DyadicLevelSpec) -> Result<TransportGraph> {
    Ok(recursive_flux_leveled(mu, k, spec, false)?.graph)
}

/// [`recursive_flux`] with per-edge levels; `prune` keeps only nonempty cells.
pub fn recursive_flux_leveled(
    mu: &AtomicMeasurePath,
    k: u32,
    spec: &DyadicLevelSpec,
    prune: bool,
) -> Result<LeveledGraph> {
    if k == 0 {
        return Err(Error::Domain("recursive flux needs k >= 1".into()));
    }
    tree_flux(mu, k, spec, prune)
}

fn check_dims(mu: &AtomicMeasurePath, spec: &DyadicLevelSpec) -> Result<()> {
    if mu.dim() != spec.dim() {
        return Err(Error::Shape(format!(
            "measure dimension {} differs from cell dimension {}",
            mu.dim(),
            spec.dim()
        )));
    }
    spec.check_contains(mu.points())
}

/// Parent-to-child edges for levels `1..=k`, each weighted by the child cell mass.
fn tree_flux(mu: &AtomicMeasurePath, k: u32, spec: &DyadicLevelSpec, prune: bool) -> Result<LeveledGraph> {
    check_dims(mu, spec)?;
    let zero = vec![0.0; mu.grid().len()];
    let mut b = LeveledBuilder::new(mu.dim(), mu);
    for level in 1..=k {
        let cells = aggregate_cells(spec, level, mu.points(), mu.weights(), mu.grid())?;
        if prune {
            for c in cells.iter().filter(|c| c.weights.iter().any(|&w| w != 0.0)) {
                let parent = spec.center(level - 1, &parent_index(&c.index));
                b.edge(&parent, &c.center, &c.weights, Some(level))?;
            }
        } else {
            let mut filled = cells.into_iter().peekable();
            for index in spec.all_cells(level) {
                let weights = match filled.peek() {
                    Some(c) if c.index == index => filled.next().unwrap().weights,
                    _ => zero.clone(),
                };
                let parent = spec.center(level - 1, &parent_index(&index));
                b.edge(&parent, &spec.center(level, &index), &weights, Some(level))?;
            }
        }
    }
    b.build()
}

/// `G^{k,l}`: edges from every nonempty level-`(j+1)` cell center to its
/// parent center for `j = k..l-1`. Lies in `Path(P^l(mu), P^k(mu))` and is
/// never cyclic.
pub fn band_flux(mu: &AtomicMeasurePath, k: u32, l: u32, spec: &DyadicLevelSpec) -> Result<TransportGraph> {
    Ok(band_flux_leveled(mu, k, l, spec)?.graph)
}

pub fn band_flux_leveled(mu: &AtomicMeasurePath, k: u32, l: u32, spec: &DyadicLevelSpec) -> Result<LeveledGraph> {
    if k < 1 || k >= l {
        return Err(Error::LevelRange { k, l });
    }
    check_dims(mu, spec)?;
    let mut b = LeveledBuilder::new(mu.dim(), mu);
    for level in k + 1..=l {
        let cells = aggregate_cells(spec, level, mu.points(), mu.weights(), mu.grid())?;
        for c in cells.iter().filter(|c| c.weights.iter().any(|&w| w != 0.0)) {
            let parent = spec.center(level - 1, &parent_index(&c.index));
            b.edge(&c.center, &parent, &c.weights, Some(level))?;
        }
    }
    b.build()
}

/// Right-hand sides of the band-flux energy estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandBounds {
    /// `sqrt(n) sum_{j=k}^{l-1} 2^{j(n-1)} beta(2^{-jn})`.
    pub mass: f64,
    /// `sqrt(n) |mu'| sum_{j=k}^{l-1} 2^{-j}`.
    pub derivative: f64,
}

/// Both band-flux bounds, with the discrete Sobolev seminorm standing in for
/// `|mu'|`. Valid for supports inside `[-1, 1)^n`.
pub fn band_flux_bounds(
    k: u32,
    l: u32,
    n: usize,
    beta: &Majorant,
    mu: &AtomicMeasurePath,
    p: f64,
) -> Result<BandBounds> {
    if k < 1 || k >= l {
        return Err(Error::LevelRange { k, l });
    }
    let root_n = (n as f64).sqrt();
    let mass = root_n * (k..l).map(|j| level_mass_term(j, n, beta)).sum::<f64>();
    let geometric: f64 = (k..l).map(|j| 2f64.powi(-(j as i32))).sum();
    let derivative = root_n * mu.sobolev_seminorm(p)? * geometric;
    Ok(BandBounds { mass, derivative })
}

/// `2^{j(n-1)} beta(2^{-jn})`.
fn level_mass_term(j: u32, n: usize, beta: &Majorant) -> f64 {
    let jn = j as f64 * n as f64;
    2f64.powf(j as f64 * (n as f64 - 1.0)) * beta.eval(2f64.powf(-jn))
}

/// The glued path between two measure paths at level `k` and its boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct Connector {
    pub graph: LeveledGraph,
    /// `P^k(mu+)`.
    pub plus: AtomicMeasurePath,
    /// `P^k(mu-)` shifted by `2^{-k} e_1`.
    pub minus: AtomicMeasurePath,
    pub shift: Vec<f64>,
}

/// Transposed `G^k_{mu+}`, the bridge `0 -> 2^{-k} e_1` of unit weight and
/// `G^k_{mu-}` shifted by `2^{-k} e_1`, with zero edges pruned. The result lies
/// in `Path(P^k(mu+), shifted P^k(mu-))` and is never cyclic.
pub fn connector(plus: &AtomicMeasurePath, minus: &AtomicMeasurePath, k: u32) -> Result<Connector> {
    if k == 0 {
        return Err(Error::Domain("connector level must be at least 1".into()));
    }
    plus.grid().check_same(&minus.grid())?;
    if plus.dim() != minus.dim() {
        return Err(Error::Shape("measure paths differ in dimension".into()));
    }
    let dim = plus.dim();
    let spec = DyadicLevelSpec::standard(dim);
    let mut shift = vec![0.0; dim];
    shift[0] = 2f64.powi(-(k as i32));
    let source_tree = tree_flux(plus, k, &spec, true)?;
    let sink_tree = tree_flux(minus, k, &spec, true)?;
    let mut b = LeveledBuilder::new(dim, plus);
    let g = &source_tree.graph;
    for (e, (&(t, h), row)) in g.edges().iter().zip(g.weights()).enumerate() {
        b.edge(&g.vertices()[h], &g.vertices()[t], row, source_tree.levels[e])?;
    }
    let root = Point::origin(dim);
    b.edge(&root, &root.translated(&shift), &vec![1.0; plus.grid().len()], None)?;
    let g = &sink_tree.graph;
    for (e, (&(t, h), row)) in g.edges().iter().zip(g.weights()).enumerate() {
        b.edge(
            &g.vertices()[t].translated(&shift),
            &g.vertices()[h].translated(&shift),
            row,
            sink_tree.levels[e],
        )?;
    }
    Ok(Connector {
        graph: b.build()?,
        plus: plus.dyadic_project_with(&spec, k)?,
        minus: minus.dyadic_project_with(&spec, k)?.translated(&shift),
        shift,
    })
}

/// Upper estimate for the energy of [`connector`] output with supports in
/// `[-1, 1)^n`:
/// `tau(1) 2^{-k} + 2 sqrt(n) (2^n beta(2^{-n}) + sum_{j=1}^{k-1} 2^{j(n-1)} beta(2^{-jn}))
///  + 2 lambda sqrt(n) (|mu+'| + |mu-'|)`.
pub fn connector_energy_bound(
    tau: &TransportCost,
    beta: &Majorant,
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    k: u32,
    p: f64,
    lambda: f64,
) -> Result<f64> {
    let n = plus.dim();
    let root_n = (n as f64).sqrt();
    let top = 2f64.powi(n as i32) * beta.eval(2f64.powi(-(n as i32)));
    let levels: f64 = (1..k).map(|j| level_mass_term(j, n, beta)).sum();
    let bridge = tau.value(1.0) * 2f64.powi(-(k as i32));
    let derivative = plus.sobolev_seminorm(p)? + minus.sobolev_seminorm(p)?;
    Ok(bridge + 2.0 * root_n * (top + levels) + 2.0 * lambda * root_n * derivative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    fn pt(c: &[f64]) -> Point {
        Point(c.to_vec())
    }

    #[test]
    fn elementary_example() {
        let grid = TimeGrid::new(3).unwrap();
        let mu = AtomicMeasurePath::dirac(pt(&[0.5]), grid);
        let g = elementary_flux(&mu, 1.0, &pt(&[0.0])).unwrap();
        assert_eq!(g.edge_count(), 2);
        let e0 = g
            .edge_index(
                g.vertex_index(&pt(&[0.0])).unwrap(),
                g.vertex_index(&pt(&[-1.0])).unwrap(),
            )
            .unwrap();
        let e1 = g
            .edge_index(
                g.vertex_index(&pt(&[0.0])).unwrap(),
                g.vertex_index(&pt(&[1.0])).unwrap(),
            )
            .unwrap();
        assert_eq!(g.weights()[e0], vec![0.0; 3]);
        assert_eq!(g.weights()[e1], vec![1.0; 3]);
    }

    #[test]
    fn recursive_chain() {
        let grid = TimeGrid::new(2).unwrap();
        let mu = AtomicMeasurePath::dirac(pt(&[0.5]), grid);
        let spec = DyadicLevelSpec::standard(1);
        let g = recursive_flux(&mu, 2, &spec).unwrap();
        assert_eq!(g.edge_count(), 6);
        let a = g.vertex_index(&pt(&[0.0])).unwrap();
        let b = g.vertex_index(&pt(&[1.0])).unwrap();
        let c = g.vertex_index(&pt(&[0.5])).unwrap();
        assert_eq!(g.weights()[g.edge_index(a, b).unwrap()], vec![1.0; 2]);
        assert_eq!(g.weights()[g.edge_index(b, c).unwrap()], vec![1.0; 2]);
        let root = AtomicMeasurePath::dirac(pt(&[0.0]), grid);
        let leaf = mu.dyadic_project(2).unwrap();
        assert_eq!(g.kirchhoff_residual(&root, &leaf).unwrap(), 0.0);
    }

    #[test]
    fn band_bound_closed_form() {
        let grid = TimeGrid::new(2).unwrap();
        let mu = AtomicMeasurePath::dirac(pt(&[0.1, 0.1]), grid);
        let beta = Majorant::Power { coef: 1.0, alpha: 0.8 };
        let b = band_flux_bounds(1, 4, 2, &beta, &mu, 2.0).unwrap();
        let direct = 2f64.sqrt() * (2.0 * 2f64.powf(-1.6) + 4.0 * 2f64.powf(-3.2) + 8.0 * 2f64.powf(-4.8));
        assert!((b.mass - direct).abs() < 1e-12);
        assert!((b.mass - 1.9548).abs() < 1e-4);
        assert_eq!(b.derivative, 0.0);
        assert!(band_flux_bounds(2, 2, 2, &beta, &mu, 2.0).is_err());
    }

    #[test]
    fn connector_of_equal_diracs() {
        let grid = TimeGrid::new(4).unwrap();
        let mu = AtomicMeasurePath::dirac(pt(&[0.0, 0.0]), grid);
        let c = connector(&mu, &mu, 3).unwrap();
        assert!(c.graph.graph.kirchhoff_residual(&c.plus, &c.minus).unwrap() <= 1e-12);
        assert!(c.graph.graph.is_never_cyclic());
        assert_eq!(c.graph.graph.edge_count(), 7);
    }
}
