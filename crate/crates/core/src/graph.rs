//! Geometric directed graphs with periodic time-varying edge weights.
//!
//! Mass travels along edge direction: a vertex `y` satisfies the Kirchhoff
//! condition for boundary data `(a+, a-)` when
//! `a+(y) + sum_{In(y)} w = a-(y) + sum_{Out(y)} w` at every sample.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cost::TransportCost;
use crate::error::{Error, Result};
use crate::grid::{check_exponent, lp_norm, TimeGrid};
use crate::measures::AtomicMeasurePath;
use crate::point::Point;

/// Discrete transport path: vertices, directed edges and `w(e, t_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct TransportGraph {
    dim: usize,
    vertices: Vec<Point>,
    edges: Vec<(usize, usize)>,
    weights: Vec<Vec<f64>>,
    grid: TimeGrid,
}

/// Serialized form of a [`TransportGraph`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawGraph {
    pub dimension: usize,
    pub time_samples: usize,
    pub vertices: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<Vec<f64>>,
}

impl TryFrom<RawGraph> for TransportGraph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        TransportGraph::new(
            raw.dimension,
            raw.vertices.into_iter().map(Point).collect(),
            raw.edges.into_iter().map(|[a, b]| (a, b)).collect(),
            raw.weights,
            TimeGrid::new(raw.time_samples)?,
        )
    }
}

impl From<TransportGraph> for RawGraph {
    fn from(g: TransportGraph) -> Self {
        RawGraph {
            dimension: g.dim,
            time_samples: g.grid.len(),
            vertices: g.vertices.into_iter().map(|p| p.0).collect(),
            edges: g.edges.into_iter().map(|(a, b)| [a, b]).collect(),
            weights: g.weights,
        }
    }
}

impl TransportGraph {
    /// Validates and builds a graph. Parallel edges with the same direction
    /// are merged (weights added, first occurrence keeps its position).
    pub fn new(
        dim: usize,
        vertices: Vec<Point>,
        edges: Vec<(usize, usize)>,
        weights: Vec<Vec<f64>>,
        grid: TimeGrid,
    ) -> Result<Self> {
        if edges.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} edges but {} weight rows",
                edges.len(),
                weights.len()
            )));
        }
        let mut seen = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            if v.dim() != dim {
                return Err(Error::Shape(format!(
                    "vertex {i} has dimension {}, expected {dim}",
                    v.dim()
                )));
            }
            if v.coords().iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidGraph(format!("vertex {i} has a non-finite coordinate")));
            }
            if let Some(first) = seen.insert(v.key(), i) {
                return Err(Error::InvalidGraph(format!("vertices {first} and {i} coincide")));
            }
        }
        let mut merged: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        let mut merged_weights: Vec<Vec<f64>> = Vec::with_capacity(edges.len());
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        for (e, (&(a, b), row)) in edges.iter().zip(&weights).enumerate() {
            if a >= vertices.len() || b >= vertices.len() {
                return Err(Error::InvalidGraph(format!("edge {e} references a missing vertex")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("edge {e} is a self-loop")));
            }
            if row.len() != grid.len() {
                return Err(Error::Shape(format!(
                    "edge {e} has {} weight samples, grid has {}",
                    row.len(),
                    grid.len()
                )));
            }
            if let Some((j, &w)) = row.iter().enumerate().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "edge {e} has invalid weight {w} at sample t_{j}"
                )));
            }
            match lookup.get(&(a, b)) {
                Some(&k) => {
                    for (acc, w) in merged_weights[k].iter_mut().zip(row) {
                        *acc += w;
                    }
                }
                None => {
                    lookup.insert((a, b), merged.len());
                    merged.push((a, b));
                    merged_weights.push(row.clone());
                }
            }
        }
        Ok(Self {
            dim,
            vertices,
            edges: merged,
            weights: merged_weights,
            grid,
        })
    }

    pub fn empty(dim: usize, grid: TimeGrid) -> Self {
        Self {
            dim,
            vertices: Vec::new(),
            edges: Vec::new(),
            weights: Vec::new(),
            grid,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, p: &Point) -> Option<usize> {
        let key = p.key();
        self.vertices.iter().position(|v| v.key() == key)
    }

    pub fn edge_index(&self, tail: usize, head: usize) -> Option<usize> {
        self.edges.iter().position(|&e| e == (tail, head))
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edges[e];
        self.vertices[a].dist(&self.vertices[b])
    }

    pub fn lengths(&self) -> Vec<f64> {
        (0..self.edges.len()).map(|e| self.edge_length(e)).collect()
    }

    /// Same topology with new weights.
    pub fn with_weights(&self, weights: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.dim, self.vertices.clone(), self.edges.clone(), weights, self.grid)
    }

    /// Every edge reversed.
    pub fn transpose(&self) -> Self {
        Self {
            edges: self.edges.iter().map(|&(a, b)| (b, a)).collect(),
            ..self.clone()
        }
    }

    pub fn translated(&self, offset: &[f64]) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v.translated(offset)).collect(),
            ..self.clone()
        }
    }

    /// Drops edges whose weight vanishes at every sample; vertices are kept.
    pub fn prune_zero_edges(&self) -> Self {
        let keep: Vec<usize> = (0..self.edges.len())
            .filter(|&e| self.weights[e].iter().any(|&w| w != 0.0))
            .collect();
        Self {
            edges: keep.iter().map(|&e| self.edges[e]).collect(),
            weights: keep.iter().map(|&e| self.weights[e].clone()).collect(),
            ..self.clone()
        }
    }

    /// Drops vertices that no edge touches, except the listed points.
    pub fn drop_isolated_vertices(&self, keep: &[Point]) -> Self {
        let mut used = vec![false; self.vertices.len()];
        for &(a, b) in &self.edges {
            used[a] = true;
            used[b] = true;
        }
        for p in keep {
            if let Some(i) = self.vertex_index(p) {
                used[i] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if used[i] {
                remap[i] = vertices.len();
                vertices.push(v.clone());
            }
        }
        Self {
            vertices,
            edges: self.edges.iter().map(|&(a, b)| (remap[a], remap[b])).collect(),
            ..self.clone()
        }
    }

    /// Sum of two graphs on the same grid, identifying equal points.
    pub fn merge(&self, other: &TransportGraph) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let mut b = GraphBuilder::new(self.dim, self.grid);
        for g in [self, other] {
            for v in &g.vertices {
                b.vertex(v);
            }
            for (&(t, h), row) in g.edges.iter().zip(&g.weights) {
                b.edge(&g.vertices[t], &g.vertices[h], row)?;
            }
        }
        b.build()
    }

    /// Net outflow `sum_{Out(y)} w - sum_{In(y)} w` of every vertex at sample `j`.
    pub fn net_outflow(&self, j: usize) -> Vec<f64> {
        let mut net = vec![0.0; self.vertices.len()];
        for (&(a, b), row) in self.edges.iter().zip(&self.weights) {
            net[a] += row[j];
            net[b] -= row[j];
        }
        net
    }

    fn support_indices(&self, path: &AtomicMeasurePath) -> Result<Vec<Option<usize>>> {
        if path.dim() != self.dim {
            return Err(Error::Shape(format!(
                "measure dimension {} differs from graph dimension {}",
                path.dim(),
                self.dim
            )));
        }
        self.grid.check_same(&path.grid())?;
        path.points()
            .iter()
            .zip(path.weights())
            .map(|(p, row)| match self.vertex_index(p) {
                Some(i) => Ok(Some(i)),
                None if row.iter().all(|&w| w == 0.0) => Ok(None),
                None => Err(Error::NotAVertex(p.0.clone())),
            })
            .collect()
    }

    /// Largest Kirchhoff violation over vertices and samples; zero iff
    /// the graph is a transport path from `plus` to `minus`.
    pub fn kirchhoff_residual(&self, plus: &AtomicMeasurePath, minus: &AtomicMeasurePath) -> Result<f64> {
        let ip = self.support_indices(plus)?;
        let im = self.support_indices(minus)?;
        let mut worst: f64 = 0.0;
        for j in 0..self.grid.len() {
            // a+ - a- - (out - in) at every vertex
            let mut r: Vec<f64> = self.net_outflow(j).iter().map(|v| -v).collect();
            for (i, v) in ip.iter().enumerate() {
                if let Some(v) = v {
                    r[*v] += plus.weights()[i][j];
                }
            }
            for (i, v) in im.iter().enumerate() {
                if let Some(v) = v {
                    r[*v] -= minus.weights()[i][j];
                }
            }
            worst = r.iter().fold(worst, |m, x| m.max(x.abs()));
        }
        Ok(worst)
    }

    /// Elementary pieces of the edge set after merging collinear overlapping
    /// segments; each piece carries the edges covering it with their orientation.
    pub fn tv_pieces(&self) -> Vec<TvPiece> {
        let m = self.edges.len();
        let lengths = self.lengths();
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut y = x;
            while parent[y] != r {
                let next = parent[y];
                parent[y] = r;
                y = next;
            }
            r
        }
        for e in 0..m {
            for f in e + 1..m {
                if self.overlaps(e, f) {
                    let (a, b) = (find(&mut parent, e), find(&mut parent, f));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for e in 0..m {
            let r = find(&mut parent, e);
            let g = *slot.entry(r).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(e);
        }
        let mut pieces = Vec::new();
        for group in groups {
            if group.len() == 1 {
                pieces.push(TvPiece {
                    length: lengths[group[0]],
                    terms: vec![(group[0], 1.0)],
                });
                continue;
            }
            let (o, u) = self.unit_direction(group[0]);
            let proj = |p: &Point| {
                p.coords()
                    .iter()
                    .zip(&o)
                    .zip(&u)
                    .map(|((x, o), u)| (x - o) * u)
                    .sum::<f64>()
            };
            let spans: Vec<(usize, f64, f64, f64)> = group
                .iter()
                .map(|&e| {
                    let (a, b) = self.edges[e];
                    let (sa, sb) = (proj(&self.vertices[a]), proj(&self.vertices[b]));
                    (e, sa.min(sb), sa.max(sb), if sb > sa { 1.0 } else { -1.0 })
                })
                .collect();
            let mut cuts: Vec<f64> = spans.iter().flat_map(|s| [s.1, s.2]).collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let tol = 1e-12 * cuts.last().unwrap().abs().max(1.0);
            cuts.dedup_by(|b, a| (*b - *a).abs() <= tol);
            for w in cuts.windows(2) {
                let terms: Vec<(usize, f64)> = spans
                    .iter()
                    .filter(|s| s.1 <= w[0] + tol && s.2 >= w[1] - tol)
                    .map(|s| (s.0, s.3))
                    .collect();
                if !terms.is_empty() {
                    pieces.push(TvPiece {
                        length: w[1] - w[0],
                        terms,
                    });
                }
            }
        }
        pieces
    }

    fn unit_direction(&self, e: usize) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.edges[e];
        let o = self.vertices[a].0.clone();
        let len = self.edge_length(e);
        let u = self.vertices[b].0.iter().zip(&o).map(|(x, y)| (x - y) / len).collect();
        (o, u)
    }

    /// Whether edges `e` and `f` lie on one line and share a segment of positive length.
    fn overlaps(&self, e: usize, f: usize) -> bool {
        let (o, u) = self.unit_direction(e);
        let len = self.edge_length(e);
        let (c, d) = self.edges[f];
        let scale = len.max(self.edge_length(f)).max(1.0);
        let tol = 1e-12 * scale;
        let mut span = [0.0; 2];
        for (k, &v) in [c, d].iter().enumerate() {
            let rel: Vec<f64> = self.vertices[v].0.iter().zip(&o).map(|(x, y)| x - y).collect();
            let s: f64 = rel.iter().zip(&u).map(|(r, u)| r * u).sum();
            let off: f64 = rel.iter().zip(&u).map(|(r, u)| (r - s * u).powi(2)).sum::<f64>().sqrt();
            if off > tol {
                return false;
            }
            span[k] = s;
        }
        let (lo, hi) = (span[0].min(span[1]), span[0].max(span[1]));
        hi.min(len) - lo.max(0.0) > tol
    }

    /// Total variation of `G[t_j]` as a vector measure.
    pub fn tv_norm(&self, j: usize) -> f64 {
        tv_of(&self.tv_pieces(), |e| self.weights[e][j])
    }

    /// [`Self::tv_norm`] at every sample.
    pub fn tv_norms(&self) -> Vec<f64> {
        let pieces = self.tv_pieces();
        (0..self.grid.len())
            .map(|j| tv_of(&pieces, |e| self.weights[e][j]))
            .collect()
    }

    /// `S(t_j) = sum_e tau(w(e, t_j)) length(e)` per sample.
    pub fn s_tau(&self, tau: &TransportCost) -> Vec<f64> {
        let lengths = self.lengths();
        (0..self.grid.len())
            .map(|j| {
                self.weights
                    .iter()
                    .zip(&lengths)
                    .map(|(row, l)| tau.value(row[j]) * l)
                    .sum()
            })
            .collect()
    }

    /// The `M^tau_p` cost: discrete `L^p` norm in time of [`Self::s_tau`].
    pub fn m_tau_p(&self, tau: &TransportCost, p: f64) -> Result<f64> {
        check_exponent(p)?;
        Ok(lp_norm(&self.s_tau(tau), p))
    }

    pub fn derivative_graph(&self) -> DerivativeGraph {
        DerivativeGraph {
            lengths: self.lengths(),
            edges: self.edges.clone(),
            weights: self
                .weights
                .iter()
                .map(|row| self.grid.forward_difference(row))
                .collect(),
            grid: self.grid,
        }
    }

    /// Discrete `L^p` norm of `sum_e |w'(e, t_j)| length(e)`.
    pub fn derivative_lp_norm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        Ok(self.derivative_graph().lp_norm(p))
    }

    /// Largest excess of `||G[t_j] - G[t_l]||` over
    /// `||G'||_{L^p} |t_j - t_l|^{1 - 1/p}` across sample pairs.
    pub fn holder_check(&self, p: f64) -> Result<f64> {
        let norm = self.derivative_lp_norm(p)?;
        let pieces = self.tv_pieces();
        let exponent = if p.is_infinite() { 1.0 } else { 1.0 - 1.0 / p };
        let n = self.grid.len();
        let mut worst = f64::NEG_INFINITY;
        for j in 0..n {
            for l in j + 1..n {
                let diff = tv_of(&pieces, |e| self.weights[e][j] - self.weights[e][l]);
                let dt = self.grid.time(l) - self.grid.time(j);
                worst = worst.max(diff - norm * dt.powf(exponent));
            }
        }
        Ok(worst)
    }
}

/// A piece of the merged edge support with the edges (and orientation signs) covering it.
#[derive(Debug, Clone, PartialEq)]
pub struct TvPiece {
    pub length: f64,
    pub terms: Vec<(usize, f64)>,
}

fn tv_of(pieces: &[TvPiece], weight: impl Fn(usize) -> f64) -> f64 {
    pieces
        .iter()
        .map(|p| p.terms.iter().map(|&(e, s)| s * weight(e)).sum::<f64>().abs() * p.length)
        .sum()
}

/// Edge-wise forward differences `w'(e, t_j)` of a graph's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeGraph {
    pub edges: Vec<(usize, usize)>,
    pub lengths: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub grid: TimeGrid,
}

impl DerivativeGraph {
    /// `sum_e |w'(e, t_j)| length(e)` per sample.
    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|j| {
                self.weights
                    .iter()
                    .zip(&self.lengths)
                    .map(|(row, l)| row[j].abs() * l)
                    .sum()
            })
            .collect()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.magnitudes(), p)
    }
}

/// Incremental graph construction that identifies equal points and merges
/// repeated edges.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    dim: usize,
    grid: TimeGrid,
    vertices: Vec<Point>,
    lookup: HashMap<Vec<u64>, usize>,
    edges: Vec<(usize, usize)>,
    edge_lookup: HashMap<(usize, usize), usize>,
    weights: Vec<Vec<f64>>,
}

impl GraphBuilder {
    pub fn new(dim: usize, grid: TimeGrid) -> Self {
        Self {
            dim,
            grid,
            vertices: Vec::new(),
            lookup: HashMap::new(),
            edges: Vec::new(),
            edge_lookup: HashMap::new(),
            weights: Vec::new(),
        }
    }

    pub fn vertex(&mut self, p: &Point) -> usize {
        if let Some(&i) = self.lookup.get(&p.key()) {
            return i;
        }
        self.lookup.insert(p.key(), self.vertices.len());
        self.vertices.push(p.clone());
        self.vertices.len() - 1
    }

    pub fn edge(&mut self, tail: &Point, head: &Point, weights: &[f64]) -> Result<usize> {
        let a = self.vertex(tail);
        let b = self.vertex(head);
        self.edge_between(a, b, weights)
    }

    pub fn edge_between(&mut self, a: usize, b: usize, weights: &[f64]) -> Result<usize> {
        if a == b {
            return Err(Error::InvalidGraph(format!(
                "self-loop at {:?}",
                self.vertices[a].coords()
            )));
        }
        if weights.len() != self.grid.len() {
            return Err(Error::Shape(format!(
                "edge has {} weight samples, grid has {}",
                weights.len(),
                self.grid.len()
            )));
        }
        match self.edge_lookup.get(&(a, b)) {
            Some(&e) => {
                for (acc, w) in self.weights[e].iter_mut().zip(weights) {
                    *acc += w;
                }
                Ok(e)
            }
            None => {
                self.edge_lookup.insert((a, b), self.edges.len());
                self.edges.push((a, b));
                self.weights.push(weights.to_vec());
                Ok(self.edges.len() - 1)
            }
        }
    }

    pub fn build(self) -> Result<TransportGraph> {
        TransportGraph::new(self.dim, self.vertices, self.edges, self.weights, self.grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> Point {
        Point(c.to_vec())
    }

    fn single_edge(w: f64, n: usize) -> TransportGraph {
        let grid = TimeGrid::new(n).unwrap();
        TransportGraph::new(1, vec![pt(&[0.0]), pt(&[1.0])], vec![(0, 1)], vec![vec![w; n]], grid).unwrap()
    }

    #[test]
    fn kirchhoff_single_edge() {
        let grid = TimeGrid::new(4).unwrap();
        let plus = AtomicMeasurePath::dirac(pt(&[0.0]), grid);
        let minus = AtomicMeasurePath::dirac(pt(&[1.0]), grid);
        assert_eq!(single_edge(1.0, 4).kirchhoff_residual(&plus, &minus).unwrap(), 0.0);
        assert_eq!(single_edge(0.5, 4).kirchhoff_residual(&plus, &minus).unwrap(), 0.5);
        let stray = AtomicMeasurePath::dirac(pt(&[3.0]), grid);
        assert!(matches!(
            single_edge(1.0, 4).kirchhoff_residual(&plus, &stray),
            Err(Error::NotAVertex(_))
        ));
    }

    #[test]
    fn construction_rules() {
        let grid = TimeGrid::new(2).unwrap();
        let v = vec![pt(&[0.0]), pt(&[1.0])];
        let g = TransportGraph::new(
            1,
            v.clone(),
            vec![(0, 1), (0, 1)],
            vec![vec![0.25; 2], vec![0.5; 2]],
            grid,
        )
        .unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weights()[0], vec![0.75, 0.75]);
        assert!(TransportGraph::new(1, v.clone(), vec![(1, 1)], vec![vec![0.0; 2]], grid).is_err());
        assert!(TransportGraph::new(1, v.clone(), vec![(0, 1)], vec![vec![-0.1, 0.0]], grid).is_err());
        assert!(TransportGraph::new(1, vec![pt(&[0.0]), pt(&[0.0])], vec![], vec![], grid).is_err());
    }

    #[test]
    fn tv_examples() {
        let grid = TimeGrid::new(2).unwrap();
        let g = TransportGraph::new(1, vec![pt(&[0.0]), pt(&[2.0])], vec![(0, 1)], vec![vec![1.0; 2]], grid).unwrap();
        assert_eq!(g.tv_norm(0), 2.0);
        let anti = TransportGraph::new(
            2,
            vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0])],
            vec![(0, 1), (1, 0)],
            vec![vec![0.7; 2], vec![0.3; 2]],
            grid,
        )
        .unwrap();
        assert!((anti.tv_norm(0) - 0.4).abs() < 1e-15);
        // partial collinear overlap: [0,2] forward and [1,3] backward
        let overlap = TransportGraph::new(
            1,
            vec![pt(&[0.0]), pt(&[2.0]), pt(&[1.0]), pt(&[3.0])],
            vec![(0, 1), (3, 2)],
            vec![vec![1.0; 2], vec![1.0; 2]],
            grid,
        )
        .unwrap();
        assert!((overlap.tv_norm(0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn m_tau_p_examples() {
        let tau = TransportCost::power(0.5).unwrap();
        let g = TransportGraph::new(
            1,
            vec![pt(&[0.0]), pt(&[2.0])],
            vec![(0, 1)],
            vec![vec![1.0; 4]],
            TimeGrid::new(4).unwrap(),
        )
        .unwrap();
        assert!((g.m_tau_p(&tau, 2.0).unwrap() - 2.0).abs() < 1e-14);
        let half = single_edge(1.0, 8);
        let w: Vec<f64> = (0..8).map(|j| if j < 4 { 1.0 } else { 0.0 }).collect();
        let half = half.with_weights(vec![w]).unwrap();
        for p in [2.0, 3.0, 7.5] {
            assert!((half.m_tau_p(&tau, p).unwrap() - 0.5f64.powf(1.0 / p)).abs() < 1e-14);
        }
        assert!(g.m_tau_p(&tau, 1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let g = single_edge(0.0, 4)
            .with_weights(vec![vec![0.0, 1.0, 1.0, 0.0]])
            .unwrap();
        assert_eq!(g.derivative_graph().weights[0], vec![4.0, 0.0, -4.0, 0.0]);
        let two = single_edge(0.0, 2).with_weights(vec![vec![0.0, 1.0]]).unwrap();
        assert!((two.derivative_lp_norm(2.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(single_edge(0.3, 5).derivative_lp_norm(2.0).unwrap(), 0.0);
    }

    #[test]
    fn holder_alternating_weights() {
        let w: Vec<f64> = (0..6).map(|j| (j % 2) as f64).collect();
        let g = single_edge(0.0, 6).with_weights(vec![w]).unwrap();
        for p in [2.0, 4.0, f64::INFINITY] {
            assert!(g.holder_check(p).unwrap() <= 1e-12);
        }
        assert!(single_edge(0.4, 6).holder_check(2.0).unwrap() <= 0.0);
    }

    #[test]
    fn serde_round_trip() {
        let g = single_edge(0.5, 3);
        let json = serde_json::to_string(&g).unwrap();
        let back: TransportGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(g, back);
    }
}
