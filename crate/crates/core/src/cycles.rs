//! Directed cycles, order-dependent cycle decomposition, the energy
//! `E^{tau,p}_lambda` and cycle elimination.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cost::TransportCost;
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, TransportGraph};
use crate::grid::{check_exponent, lp_norm};
use crate::measures::AtomicMeasurePath;
use crate::point::Point;

/// Default bound on the number of enumerated cycles.
pub const DEFAULT_CYCLE_CAP: usize = 10;
/// Largest cycle count for which all orders are tried.
pub const EXHAUSTIVE_LIMIT: usize = 8;
/// Cycle count at which enumeration stops even when the heuristic is allowed.
const HARD_LIMIT: usize = 100_000;
/// Kirchhoff tolerance accepted by [`eliminate_cycles`].
pub const PATH_TOL: f64 = 1e-6;

/// A simple directed cycle, edges listed in traversal order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

impl Cycle {
    pub fn length(&self, g: &TransportGraph) -> f64 {
        self.edges.iter().map(|&e| g.edge_length(e)).sum()
    }

    fn sorted_edges(&self) -> Vec<usize> {
        let mut s = self.edges.clone();
        s.sort_unstable();
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyOptions {
    /// More cycles than this is an error unless `allow_heuristic` is set.
    pub cycle_cap: usize,
    /// Continue past the cap with the greedy order instead of failing.
    pub allow_heuristic: bool,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self {
            cycle_cap: DEFAULT_CYCLE_CAP,
            allow_heuristic: false,
        }
    }
}

/// Residual graph and per-cycle extracted trajectories for one order `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleDecomposition {
    pub cycles: Vec<Cycle>,
    /// `order[i]` is the cycle extracted at step `i`.
    pub order: Vec<usize>,
    /// `extracted[i][j] = W_{sigma,i}(t_j)`, the weight removed at step `i`.
    pub extracted: Vec<Vec<f64>>,
    /// `residual[e][j] = w_{sigma,0}(e, t_j)`.
    pub residual: Vec<Vec<f64>>,
}

impl CycleDecomposition {
    /// Adds the extracted cycle weights back onto the residual.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let mut w = self.residual.clone();
        for (step, &c) in self.order.iter().enumerate() {
            for &e in &self.cycles[c].edges {
                for (acc, x) in w[e].iter_mut().zip(&self.extracted[step]) {
                    *acc += x;
                }
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub m_tau_p: f64,
    /// The maximized derivative term (before multiplying by lambda).
    pub derivative_term: f64,
    pub total: f64,
    pub maximizing_order: Vec<usize>,
    /// Number of directed cycles, `None` when the graph is never cyclic and
    /// enumeration would exceed the cap.
    pub cycle_count: Option<usize>,
    /// Whether the maximum over orders was exhaustive.
    pub exact: bool,
}

impl TransportGraph {
    /// All simple directed cycles, sorted by their sorted edge indices.
    /// Exceeding `cap` is an error reporting the count (counted up to a
    /// fixed ceiling).
    pub fn enumerate_cycles(&self, cap: usize) -> Result<Vec<Cycle>> {
        self.enumerate_limited(cap, cap.saturating_mul(1000).clamp(cap + 1, HARD_LIMIT.max(cap + 1)))
    }

    fn enumerate_limited(&self, cap: usize, limit: usize) -> Result<Vec<Cycle>> {
        let mut lookup = HashMap::new();
        let n = self.vertex_count();
        let mut adj = vec![Vec::new(); n];
        for (e, &(a, b)) in self.edges().iter().enumerate() {
            lookup.insert((a, b), e);
            adj[a].push(b);
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
        }
        let raw = johnson(&adj, cap, limit).map_err(|found| Error::CycleExplosion { found, cap })?;
        let mut cycles: Vec<Cycle> = raw
            .into_iter()
            .map(|vertices| {
                let edges = (0..vertices.len())
                    .map(|i| lookup[&(vertices[i], vertices[(i + 1) % vertices.len()])])
                    .collect();
                Cycle { vertices, edges }
            })
            .collect();
        cycles.sort_by_key(|c| c.sorted_edges());
        Ok(cycles)
    }

    /// Whether the edges with positive weight at sample `j` contain a directed cycle.
    pub fn has_strong_cycle(&self, j: usize) -> bool {
        find_positive_cycle(self, &self.weights().iter().map(|r| r[j]).collect::<Vec<_>>()).is_some()
    }

    pub fn is_never_cyclic(&self) -> bool {
        (0..self.grid().len()).all(|j| !self.has_strong_cycle(j))
    }

    /// Decomposition for the order `sigma` (a permutation of cycle indices).
    pub fn decompose(&self, cycles: &[Cycle], sigma: &[usize]) -> Result<CycleDecomposition> {
        let mut seen = vec![false; cycles.len()];
        if sigma.len() != cycles.len()
            || sigma
                .iter()
                .any(|&i| i >= cycles.len() || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::InvalidPermutation(cycles.len()));
        }
        let n = self.grid().len();
        let mut residual = self.weights().to_vec();
        let mut extracted = vec![vec![0.0; n]; cycles.len()];
        for (step, &c) in sigma.iter().enumerate() {
            let edges = &cycles[c].edges;
            for j in 0..n {
                let m = edges.iter().map(|&e| residual[e][j]).fold(f64::INFINITY, f64::min);
                extracted[step][j] = m;
                for &e in edges {
                    residual[e][j] -= m;
                    if residual[e][j] < -1e-12 {
                        return Err(Error::Consistency(format!(
                            "negative residual {} on edge {e} at sample t_{j}",
                            residual[e][j]
                        )));
                    }
                }
            }
        }
        Ok(CycleDecomposition {
            cycles: cycles.to_vec(),
            order: sigma.to_vec(),
            extracted,
            residual,
        })
    }

    /// Energy with default options.
    pub fn energy(&self, tau: &TransportCost, p: f64, lambda: f64) -> Result<EnergyReport> {
        self.energy_with(tau, p, lambda, &EnergyOptions::default())
    }

    /// `M^tau_p(G) + lambda max_sigma (||G'_{sigma,0}|| + sum_i ||W'_{sigma,i}|| len(C_{sigma(i)}))`.
    pub fn energy_with(&self, tau: &TransportCost, p: f64, lambda: f64, opts: &EnergyOptions) -> Result<EnergyReport> {
        check_exponent(p)?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        let m = self.m_tau_p(tau, p)?;
        let (derivative_term, order, count, exact) = if self.is_never_cyclic() {
            // every extraction is zero, so the maximum is the plain derivative norm
            let count = self
                .enumerate_limited(opts.cycle_cap, opts.cycle_cap + 1)
                .ok()
                .map(|c| c.len());
            (
                self.derivative_lp_norm(p)?,
                (0..count.unwrap_or(0)).collect(),
                count,
                true,
            )
        } else {
            let cycles = self.cycles_for(opts)?;
            let (order, value, exact) = maximizing_order(self, &cycles, p)?;
            (value, order, Some(cycles.len()), exact)
        };
        Ok(EnergyReport {
            m_tau_p: m,
            derivative_term,
            total: m + lambda * derivative_term,
            maximizing_order: order,
            cycle_count: count,
            exact,
        })
    }

    fn cycles_for(&self, opts: &EnergyOptions) -> Result<Vec<Cycle>> {
        match self.enumerate_cycles(opts.cycle_cap) {
            Err(Error::CycleExplosion { .. }) if opts.allow_heuristic => self.enumerate_cycles(HARD_LIMIT),
            other => other,
        }
    }

    /// Cancels strong cycles sample by sample without enumerating them:
    /// repeatedly finds a directed cycle among positive edges and removes its
    /// minimum. Kirchhoff balances are unchanged; the result is never cyclic.
    pub fn cancel_strong_cycles(&self) -> TransportGraph {
        let n = self.grid().len();
        let mut weights = self.weights().to_vec();
        for j in 0..n {
            let mut col: Vec<f64> = weights.iter().map(|r| r[j]).collect();
            while let Some(cycle) = find_positive_cycle(self, &col) {
                let (arg, m) = cycle
                    .iter()
                    .map(|&e| (e, col[e]))
                    .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                for &e in &cycle {
                    col[e] = (col[e] - m).max(0.0);
                }
                col[arg] = 0.0;
            }
            for (row, v) in weights.iter_mut().zip(col) {
                row[j] = v;
            }
        }
        self.with_weights(weights)
            .expect("cancellation keeps weights nonnegative")
            .prune_zero_edges()
    }
}

/// The order maximizing the derivative term, its value and whether the
/// search was exhaustive.
fn maximizing_order(g: &TransportGraph, cycles: &[Cycle], p: f64) -> Result<(Vec<usize>, f64, bool)> {
    let lengths: Vec<f64> = cycles.iter().map(|c| c.length(g)).collect();
    let evaluate = |order: &[usize]| -> Result<f64> {
        let d = g.decompose(cycles, order)?;
        Ok(derivative_value(g, &d, &lengths, p))
    };
    if cycles.len() <= EXHAUSTIVE_LIMIT {
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut perm: Vec<usize> = (0..cycles.len()).collect();
        loop {
            let v = evaluate(&perm)?;
            if best.as_ref().is_none_or(|b| v > b.1) {
                best = Some((perm.clone(), v));
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        let (order, value) = best.expect("at least the identity order");
        return Ok((order, value, true));
    }
    // greedy: extract the cycle with the largest derivative contribution first
    let n = g.grid().len();
    let mut remaining = g.weights().to_vec();
    let mut left: Vec<usize> = (0..cycles.len()).collect();
    let mut order = Vec::with_capacity(cycles.len());
    while !left.is_empty() {
        let mut pick = (0, f64::NEG_INFINITY);
        for (slot, &c) in left.iter().enumerate() {
            let w: Vec<f64> = (0..n)
                .map(|j| {
                    cycles[c]
                        .edges
                        .iter()
                        .map(|&e| remaining[e][j])
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let score = lp_norm(&g.grid().forward_difference(&w), p) * lengths[c];
            if score > pick.1 {
                pick = (slot, score);
            }
        }
        let c = left.remove(pick.0);
        #[allow(clippy::needless_range_loop)]
        for j in 0..n {
            let m = cycles[c]
                .edges
                .iter()
                .map(|&e| remaining[e][j])
                .fold(f64::INFINITY, f64::min);
            for &e in &cycles[c].edges {
                remaining[e][j] -= m;
            }
        }
        order.push(c);
    }
    let value = evaluate(&order)?;
    Ok((order, value, false))
}

fn derivative_value(g: &TransportGraph, d: &CycleDecomposition, lengths: &[f64], p: f64) -> f64 {
    let grid = g.grid();
    let edge_lengths = g.lengths();
    let mut magnitude = vec![0.0; grid.len()];
    for (row, l) in d.residual.iter().zip(&edge_lengths) {
        for (m, v) in magnitude.iter_mut().zip(grid.forward_difference(row)) {
            *m += v.abs() * l;
        }
    }
    let mut total = lp_norm(&magnitude, p);
    for (step, &c) in d.order.iter().enumerate() {
        total += lp_norm(&grid.forward_difference(&d.extracted[step]), p) * lengths[c];
    }
    total
}

/// Lexicographic successor; false after the last permutation.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// A directed cycle (edge list) among edges with positive value in `col`.
fn find_positive_cycle(g: &TransportGraph, col: &[f64]) -> Option<Vec<usize>> {
    let n = g.vertex_count();
    let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if col[e] > 0.0 {
            out[a].push((b, e));
        }
    }
    // iterative DFS with colors; 1 = on stack, 2 = done
    let mut color = vec![0u8; n];
    let mut via = vec![usize::MAX; n];
    for s in 0..n {
        if color[s] != 0 {
            continue;
        }
        let mut stack = vec![(s, 0usize)];
        color[s] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < out[v].len() {
                let (w, e) = out[v][*next];
                *next += 1;
                if color[w] == 0 {
                    color[w] = 1;
                    via[w] = e;
                    stack.push((w, 0));
                } else if color[w] == 1 {
                    let mut cycle = vec![e];
                    let mut u = v;
                    while u != w {
                        let edge = via[u];
                        cycle.push(edge);
                        u = g.edges()[edge].0;
                    }
                    cycle.reverse();
                    return Some(cycle);
                }
            } else {
                color[v] = 2;
                stack.pop();
            }
        }
    }
    None
}

/// Johnson's enumeration of elementary circuits. Returns vertex sequences,
/// or the number found so far once it exceeds `cap` (counting up to `limit`).
fn johnson(adj: &[Vec<usize>], cap: usize, limit: usize) -> std::result::Result<Vec<Vec<usize>>, usize> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        in_comp: Vec<bool>,
        blocked: Vec<bool>,
        bset: Vec<Vec<usize>>,
        stack: Vec<usize>,
        found: Vec<Vec<usize>>,
        count: usize,
        limit: usize,
        start: usize,
    }

    fn unblock(st: &mut State, u: usize) {
        st.blocked[u] = false;
        while let Some(w) = st.bset[u].pop() {
            if st.blocked[w] {
                unblock(st, w);
            }
        }
    }

    fn circuit(st: &mut State, v: usize, keep: bool) -> bool {
        if st.count >= st.limit {
            return true;
        }
        let mut closed = false;
        st.stack.push(v);
        st.blocked[v] = true;
        for &w in &st.adj[v] {
            if !st.in_comp[w] {
                continue;
            }
            if w == st.start {
                st.count += 1;
                if keep {
                    st.found.push(st.stack.clone());
                }
                closed = true;
            } else if !st.blocked[w] && circuit(st, w, keep) {
                closed = true;
            }
        }
        if closed {
            unblock(st, v);
        } else {
            for &w in &st.adj[v] {
                if st.in_comp[w] && !st.bset[w].contains(&v) {
                    st.bset[w].push(v);
                }
            }
        }
        st.stack.pop();
        closed
    }

    let n = adj.len();
    let mut st = State {
        adj,
        in_comp: vec![false; n],
        blocked: vec![false; n],
        bset: vec![Vec::new(); n],
        stack: Vec::new(),
        found: Vec::new(),
        count: 0,
        limit,
        start: 0,
    };
    for s in 0..n {
        // strongly connected component of s within vertices >= s
        let forward = reach(adj, s, |v| v >= s, false);
        let backward = reach(adj, s, |v| v >= s, true);
        let comp: Vec<bool> = (0..n).map(|v| forward[v] && backward[v]).collect();
        if comp.iter().filter(|&&c| c).count() < 2 {
            continue;
        }
        st.in_comp = comp;
        st.start = s;
        for v in 0..n {
            st.blocked[v] = false;
            st.bset[v].clear();
        }
        let keep = st.count <= cap;
        circuit(&mut st, s, keep);
        if st.count >= st.limit {
            break;
        }
    }
    if st.count > cap {
        Err(st.count)
    } else {
        Ok(st.found)
    }
}

fn reach(adj: &[Vec<usize>], s: usize, allowed: impl Fn(usize) -> bool, reverse: bool) -> Vec<bool> {
    let n = adj.len();
    let mut radj: Vec<Vec<usize>>;
    let graph: &[Vec<usize>] = if reverse {
        radj = vec![Vec::new(); n];
        for (a, list) in adj.iter().enumerate() {
            for &b in list {
                radj[b].push(a);
            }
        }
        &radj
    } else {
        adj
    };
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for &w in &graph[v] {
            if allowed(w) && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Residual of the energy-maximizing decomposition with zero edges pruned.
///
/// The input must be a transport path from `plus` to `minus` (residual at most
/// [`PATH_TOL`]) and the two supports must be disjoint.
pub fn eliminate_cycles(
    g: &TransportGraph,
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    p: f64,
    opts: &EnergyOptions,
) -> Result<TransportGraph> {
    check_exponent(p)?;
    if shares_support(plus, minus) {
        return Err(Error::SharedSupport);
    }
    let residual = g.kirchhoff_residual(plus, minus)?;
    if residual > PATH_TOL {
        return Err(Error::NotAPath(residual));
    }
    if g.is_never_cyclic() {
        return Ok(g.prune_zero_edges());
    }
    let cycles = g.cycles_for(opts)?;
    let (order, _, _) = maximizing_order(g, &cycles, p)?;
    let d = g.decompose(&cycles, &order)?;
    Ok(g.with_weights(d.residual)?.prune_zero_edges())
}

/// Whether some point carries positive weight in both paths at some time.
pub fn shares_support(plus: &AtomicMeasurePath, minus: &AtomicMeasurePath) -> bool {
    let active = |a: &AtomicMeasurePath| -> Vec<Vec<u64>> {
        a.points()
            .iter()
            .zip(a.weights())
            .filter(|(_, row)| row.iter().any(|&w| w > 0.0))
            .map(|(p, _)| p.key())
            .collect()
    };
    let lhs = active(plus);
    active(minus).iter().any(|k| lhs.contains(k))
}

/// Moves every `minus` atom that coincides with a `plus` atom a distance
/// `delta` away and returns the moved path with the patch edges `x -> x'`
/// carrying the moved weight.
pub fn separate_supports(
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    delta: f64,
) -> Result<(AtomicMeasurePath, TransportGraph)> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "separation distance must be positive, got {delta}"
        )));
    }
    plus.grid().check_same(&minus.grid())?;
    let dim = plus.dim();
    let mut occupied: Vec<Point> = plus.points().to_vec();
    occupied.extend(minus.points().iter().cloned());
    let min_dist = min_pairwise(&occupied);
    if delta >= 0.5 * min_dist {
        return Err(Error::Domain(format!(
            "separation distance {delta} must be below half the minimum point distance {min_dist}"
        )));
    }
    let plus_keys: Vec<Vec<u64>> = plus.points().iter().map(|p| p.key()).collect();
    let mut points = minus.points().to_vec();
    let mut builder = GraphBuilder::new(dim, plus.grid());
    for (i, x) in minus.points().iter().enumerate() {
        if !plus_keys.contains(&x.key()) {
            continue;
        }
        let moved = (0..32)
            .map(|attempt| x.translated(&direction(dim, attempt).iter().map(|d| d * delta).collect::<Vec<_>>()))
            .find(|cand| {
                occupied
                    .iter()
                    .filter(|o| o.key() != x.key())
                    .all(|o| o.dist(cand) >= delta)
            })
            .ok_or_else(|| Error::Placement(x.0.clone()))?;
        builder.edge(x, &moved, &minus.weights()[i])?;
        occupied.push(moved.clone());
        points[i] = moved;
    }
    let moved_minus = AtomicMeasurePath::new(points, minus.weights().to_vec(), minus.grid())?;
    Ok((moved_minus, builder.build()?))
}

fn min_pairwise(points: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i].dist(&points[j]);
            if d > 0.0 {
                best = best.min(d);
            }
        }
    }
    best
}

/// Deterministic unit directions: the signed axes first, then a fixed
/// quasi-random sequence.
fn direction(dim: usize, attempt: usize) -> Vec<f64> {
    if attempt < 2 * dim {
        let mut v = vec![0.0; dim];
        v[attempt / 2] = if attempt.is_multiple_of(2) { 1.0 } else { -1.0 };
        return v;
    }
    let v: Vec<f64> = (0..dim)
        .map(|d| ((attempt + 1) as f64 * (d as f64 + 1.0) * 2.399_963_229_728_653).sin())
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    v.iter().map(|x| x / norm).collect()
}
