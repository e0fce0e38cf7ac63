use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::weights::{optimize_weights_with, WeightProblem};
use super::OptimizerConfig;
use crate::cost::{Majorant, TransportCost};
use crate::cycles::{eliminate_cycles, separate_supports, shares_support, EnergyOptions, EnergyReport};
use crate::dyadic::{connector, connector_energy_bound};
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, TransportGraph};
use crate::grid::check_exponent;
use crate::measures::AtomicMeasurePath;
use crate::point::Point;
use crate::wasserstein::{lower_bound, LowerBound};

/// Kirchhoff tolerance for returned witnesses.
const WITNESS_TOL: f64 = 1e-6;
/// Relative improvement a move must achieve to be accepted.
const IMPROVEMENT: f64 = 1e-9;

/// Energy of the level-`k` connector completed into a path between the
/// original measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Baseline {
    pub level: u32,
    /// Energy of the never-cyclic witness in `Path(mu+, mu-)`.
    pub energy: f64,
    /// Energy of the bare connector between the projected measures.
    pub connector_energy: f64,
    /// Closed-form estimate for the bare connector, when a concave majorant is known.
    pub connector_bound: Option<f64>,
    /// Whether the cost passes the admissibility test in this dimension.
    pub admissible: bool,
    pub witness: TransportGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineEntry {
    pub level: u32,
    pub energy: f64,
}

/// Bracket `[lower, upper]` for the distance together with the witness
/// realizing `upper`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub lower: f64,
    pub lower_detail: LowerBound,
    pub upper: f64,
    pub gap: f64,
    pub witness: TransportGraph,
    pub energy: EnergyReport,
    pub baseline_upper: Vec<BaselineEntry>,
    /// Energy of the shortest-path routing seed.
    pub transport_seed: f64,
    pub iterations_used: usize,
    pub accepted_moves: usize,
}

fn check_pair(plus: &AtomicMeasurePath, minus: &AtomicMeasurePath) -> Result<()> {
    plus.grid().check_same(&minus.grid())?;
    if plus.dim() != minus.dim() {
        return Err(Error::Shape(format!(
            "measure paths live in dimensions {} and {}",
            plus.dim(),
            minus.dim()
        )));
    }
    Ok(())
}

fn energy_options(cfg: &OptimizerConfig) -> EnergyOptions {
    EnergyOptions {
        cycle_cap: cfg.cycle_cap,
        allow_heuristic: false,
    }
}

fn majorant(tau: &TransportCost) -> Option<Majorant> {
    tau.witness().cloned()
}

/// Builds the level-`k` connector, attaches every atom to its cell center
/// (and the shifted centers to the target atoms), removes strong cycles and
/// evaluates the energy.
pub fn baseline_upper(
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    tau: &TransportCost,
    p: f64,
    lambda: f64,
    k: u32,
) -> Result<Baseline> {
    baseline_with(plus, minus, tau, p, lambda, k, crate::cycles::DEFAULT_CYCLE_CAP)
}

fn baseline_with(
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    tau: &TransportCost,
    p: f64,
    lambda: f64,
    k: u32,
    cap: usize,
) -> Result<Baseline> {
    check_pair(plus, minus)?;
    let n = plus.dim();
    let admissible = match tau.check_admissible(n) {
        Ok(a) => a.admissible,
        Err(Error::NoWitness) => false,
        Err(e) => return Err(e),
    };
    let c = connector(plus, minus, k)?;
    let bare = &c.graph.graph;
    let connector_energy = bare.energy(tau, p, lambda)?.total;
    let inside = plus
        .points()
        .iter()
        .chain(minus.points())
        .all(|x| x.coords().iter().all(|&v| (-1.0..1.0).contains(&v)));
    let connector_bound = match majorant(tau) {
        Some(beta) if inside => Some(connector_energy_bound(tau, &beta, plus, minus, k, p, lambda)?),
        _ => None,
    };
    let spec = crate::cells::DyadicLevelSpec::standard(n);
    let mut b = GraphBuilder::new(n, plus.grid());
    for v in bare.vertices() {
        b.vertex(v);
    }
    for (&(t, h), row) in bare.edges().iter().zip(bare.weights()) {
        b.edge(&bare.vertices()[t], &bare.vertices()[h], row)?;
    }
    for (x, row) in plus.points().iter().zip(plus.weights()) {
        let center = spec.center(
            k,
            &spec.cell_index(x.coords(), k).expect("connector checked containment"),
        );
        if center != *x && row.iter().any(|&w| w > 0.0) {
            b.edge(x, &center, row)?;
        }
    }
    for (y, row) in minus.points().iter().zip(minus.weights()) {
        let center = spec
            .center(
                k,
                &spec.cell_index(y.coords(), k).expect("connector checked containment"),
            )
            .translated(&c.shift);
        if center != *y && row.iter().any(|&w| w > 0.0) {
            b.edge(&center, y, row)?;
        }
    }
    let raw = b.build()?;
    let witness = make_never_cyclic(&raw, plus, minus, p, cap)?;
    let energy = witness.energy_with(
        tau,
        p,
        lambda,
        &EnergyOptions {
            cycle_cap: cap,
            allow_heuristic: false,
        },
    )?;
    Ok(Baseline {
        level: k,
        energy: energy.total,
        connector_energy,
        connector_bound,
        admissible,
        witness,
    })
}

/// Removes strong cycles from a path between `plus` and `minus`: cycle
/// elimination (after separating shared support points when needed), or
/// per-sample cancellation when there are too many cycles to enumerate.
pub fn make_never_cyclic(
    g: &TransportGraph,
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    p: f64,
    cap: usize,
) -> Result<TransportGraph> {
    if g.is_never_cyclic() {
        return Ok(g.prune_zero_edges());
    }
    let opts = EnergyOptions {
        cycle_cap: cap,
        allow_heuristic: false,
    };
    let attempt = if shares_support(plus, minus) {
        eliminate_separated(g, plus, minus, p, &opts)
    } else {
        eliminate_cycles(g, plus, minus, p, &opts)
    };
    match attempt {
        Ok(out) => Ok(out),
        Err(Error::CycleExplosion { .. } | Error::Placement(_) | Error::Domain(_)) => Ok(g.cancel_strong_cycles()),
        Err(e) => Err(e),
    }
}

fn eliminate_separated(
    g: &TransportGraph,
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    p: f64,
    opts: &EnergyOptions,
) -> Result<TransportGraph> {
    let mut all: Vec<Point> = g.vertices().to_vec();
    all.extend(plus.points().iter().cloned());
    all.extend(minus.points().iter().cloned());
    let mut closest = f64::INFINITY;
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let d = all[i].dist(&all[j]);
            if d > 0.0 {
                closest = closest.min(d);
            }
        }
    }
    let delta = (0.25 * closest).min(1e-6);
    let (moved, patch) = separate_supports(plus, minus, delta)?;
    let fresh: Vec<Point> = patch
        .edges()
        .iter()
        .map(|&(_, h)| patch.vertices()[h].clone())
        .collect();
    if fresh.iter().any(|x| g.vertex_index(x).is_some()) {
        return Err(Error::Placement(fresh[0].0.clone()));
    }
    let joined = g.merge(&patch)?;
    let out = eliminate_cycles(&joined, plus, &moved, p, opts)?;
    let mut b = GraphBuilder::new(g.dim(), g.grid());
    for v in out.vertices() {
        if !fresh.contains(v) {
            b.vertex(v);
        }
    }
    for (&(t, h), row) in out.edges().iter().zip(out.weights()) {
        if !fresh.contains(&out.vertices()[h]) {
            b.edge(&out.vertices()[t], &out.vertices()[h], row)?;
        }
    }
    b.build()
}

fn active_points(a: &AtomicMeasurePath) -> Vec<Point> {
    a.points()
        .iter()
        .zip(a.weights())
        .filter(|(_, row)| row.iter().any(|&w| w > 0.0))
        .map(|(p, _)| p.clone())
        .collect()
}

/// The complete digraph on the support points of both measures, each sample
/// routed along Euclidean shortest paths (an optimal `Lid_1` plan).
pub fn transport_seed(plus: &AtomicMeasurePath, minus: &AtomicMeasurePath) -> Result<TransportGraph> {
    check_pair(plus, minus)?;
    let mut b = GraphBuilder::new(plus.dim(), plus.grid());
    for x in active_points(plus).iter().chain(&active_points(minus)) {
        b.vertex(x);
    }
    let zero = vec![0.0; plus.grid().len()];
    let complete = {
        let vertices: Vec<Point> = b.clone().build()?.vertices().to_vec();
        for a in 0..vertices.len() {
            for c in 0..vertices.len() {
                if a != c {
                    b.edge_between(a, c, &zero)?;
                }
            }
        }
        b.build()?
    };
    let tau = TransportCost::power(1.0)?;
    let problem = WeightProblem::new(&complete, plus, minus, &tau, 2.0, 1.0)?;
    let lengths = complete.lengths();
    let weights = problem.route(|e, _| lengths[e])?;
    complete.with_weights(weights)
}

struct Search<'a> {
    plus: &'a AtomicMeasurePath,
    minus: &'a AtomicMeasurePath,
    tau: &'a TransportCost,
    p: f64,
    lambda: f64,
    cfg: &'a OptimizerConfig,
    terminals: Vec<Point>,
    rng: ChaCha8Rng,
    steiner_added: usize,
}

impl Search<'_> {
    /// Canonical never-cyclic form of a candidate and its energy.
    fn evaluate(&self, g: &TransportGraph) -> Result<Option<(TransportGraph, EnergyReport)>> {
        let clean = make_never_cyclic(g, self.plus, self.minus, self.p, self.cfg.cycle_cap)?
            .prune_zero_edges()
            .drop_isolated_vertices(&self.terminals);
        if clean.kirchhoff_residual(self.plus, self.minus)? > WITNESS_TOL || !clean.is_never_cyclic() {
            return Ok(None);
        }
        let e = clean.energy_with(self.tau, self.p, self.lambda, &energy_options(self.cfg))?;
        Ok(Some((clean, e)))
    }

    fn reweight(&mut self, g: &TransportGraph) -> Option<TransportGraph> {
        optimize_weights_with(
            g,
            self.plus,
            self.minus,
            self.tau,
            self.p,
            self.lambda,
            self.cfg,
            &mut self.rng,
        )
        .ok()
    }

    fn is_terminal(&self, v: &Point) -> bool {
        self.terminals.contains(v)
    }

    fn propose(&mut self, g: &TransportGraph) -> Option<TransportGraph> {
        let pairs = same_direction_pairs(g);
        let steiner: Vec<usize> = (0..g.vertex_count())
            .filter(|&v| !self.is_terminal(&g.vertices()[v]) && g.edges().iter().any(|&(a, b)| a == v || b == v))
            .collect();
        let roll: f64 = self.rng.random();
        if roll < 0.35 && !pairs.is_empty() && self.steiner_added < self.cfg.steiner_budget {
            let (v, e1, e2, outgoing) = pairs[self.rng.random_range(0..pairs.len())];
            let out = insert_steiner(g, self.tau, v, e1, e2, outgoing)?;
            self.steiner_added += 1;
            Some(out)
        } else if roll < 0.6 && !steiner.is_empty() {
            let v = steiner[self.rng.random_range(0..steiner.len())];
            let target = if self.rng.random::<bool>() {
                recenter(g, self.tau, v)
            } else {
                let incident: Vec<f64> = g
                    .edges()
                    .iter()
                    .enumerate()
                    .filter(|(_, &(a, b))| a == v || b == v)
                    .map(|(e, _)| g.edge_length(e))
                    .collect();
                let scale = self.cfg.perturbation * incident.iter().sum::<f64>() / incident.len().max(1) as f64;
                let normal = Normal::new(0.0, scale.max(1e-12)).ok()?;
                let offset: Vec<f64> = (0..g.dim()).map(|_| normal.sample(&mut self.rng)).collect();
                g.vertices()[v].translated(&offset)
            };
            move_vertex(g, v, target)
        } else if roll < 0.75 && g.vertex_count() >= 2 {
            let a = self.rng.random_range(0..g.vertex_count());
            let b = self.rng.random_range(0..g.vertex_count());
            if a == b || g.edge_index(a, b).is_some() || g.edge_index(b, a).is_some() {
                return None;
            }
            let mut edges = g.edges().to_vec();
            let mut weights = g.weights().to_vec();
            edges.push((a, b));
            weights.push(vec![0.0; g.grid().len()]);
            let grown = TransportGraph::new(g.dim(), g.vertices().to_vec(), edges, weights, g.grid()).ok()?;
            self.reweight(&grown)
        } else if roll < 0.85 && g.edge_count() > 1 {
            let mut order: Vec<(usize, f64)> = (0..g.edge_count())
                .map(|e| (e, g.weights()[e].iter().sum::<f64>()))
                .collect();
            order.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
            let pick = order[self.rng.random_range(0..order.len().min(3))].0;
            let keep: Vec<usize> = (0..g.edge_count()).filter(|&e| e != pick).collect();
            let shrunk = TransportGraph::new(
                g.dim(),
                g.vertices().to_vec(),
                keep.iter().map(|&e| g.edges()[e]).collect(),
                keep.iter().map(|&e| g.weights()[e].clone()).collect(),
                g.grid(),
            )
            .ok()?;
            self.reweight(&shrunk)
        } else {
            self.reweight(g)
        }
    }
}

/// `(vertex, edge, edge, outgoing)` for every pair of positive-flow edges
/// leaving (or entering) the same vertex.
fn same_direction_pairs(g: &TransportGraph) -> Vec<(usize, usize, usize, bool)> {
    let mut out = Vec::new();
    for v in 0..g.vertex_count() {
        for outgoing in [true, false] {
            let list: Vec<usize> = (0..g.edge_count())
                .filter(|&e| {
                    let (a, b) = g.edges()[e];
                    (if outgoing { a } else { b }) == v && g.weights()[e].iter().any(|&w| w > 0.0)
                })
                .collect();
            for i in 0..list.len() {
                for j in i + 1..list.len() {
                    out.push((v, list[i], list[j], outgoing));
                }
            }
        }
    }
    out
}

fn mean(row: &[f64]) -> f64 {
    row.iter().sum::<f64>() / row.len() as f64
}

/// Weighted geometric median by Weiszfeld iteration.
fn weighted_median(points: &[Point], weights: &[f64]) -> Point {
    let dim = points[0].dim();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return points[0].clone();
    }
    let mut x: Vec<f64> = (0..dim)
        .map(|d| points.iter().zip(weights).map(|(p, w)| p.0[d] * w).sum::<f64>() / total)
        .collect();
    for _ in 0..500 {
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        for (p, &w) in points.iter().zip(weights) {
            let d = Point(x.clone()).dist(p);
            if d < 1e-14 {
                return p.clone();
            }
            for (n, c) in num.iter_mut().zip(&p.0) {
                *n += w * c / d;
            }
            den += w / d;
        }
        let next: Vec<f64> = num.iter().map(|n| n / den).collect();
        let step = Point(next.clone()).dist(&Point(x.clone()));
        x = next;
        if step < 1e-15 {
            break;
        }
    }
    Point(x)
}

/// Replaces `v -> a`, `v -> b` (or `a -> v`, `b -> v`) by a branch through a
/// new vertex at the weighted Fermat point of `v`, `a`, `b`.
fn insert_steiner(
    g: &TransportGraph,
    tau: &TransportCost,
    v: usize,
    e1: usize,
    e2: usize,
    outgoing: bool,
) -> Option<TransportGraph> {
    let other = |e: usize| if outgoing { g.edges()[e].1 } else { g.edges()[e].0 };
    let (a, b) = (other(e1), other(e2));
    let w1 = &g.weights()[e1];
    let w2 = &g.weights()[e2];
    let trunk: Vec<f64> = w1.iter().zip(w2).map(|(x, y)| x + y).collect();
    let pts = [
        g.vertices()[v].clone(),
        g.vertices()[a].clone(),
        g.vertices()[b].clone(),
    ];
    let s = weighted_median(
        &pts,
        &[tau.value(mean(&trunk)), tau.value(mean(w1)), tau.value(mean(w2))],
    );
    if pts.iter().any(|q| q.dist(&s) < 1e-9) || g.vertex_index(&s).is_some() {
        return None;
    }
    let mut builder = GraphBuilder::new(g.dim(), g.grid());
    for x in g.vertices() {
        builder.vertex(x);
    }
    for (e, (&(t, h), row)) in g.edges().iter().zip(g.weights()).enumerate() {
        if e != e1 && e != e2 {
            builder.edge(&g.vertices()[t], &g.vertices()[h], row).ok()?;
        }
    }
    if outgoing {
        builder.edge(&pts[0], &s, &trunk).ok()?;
        builder.edge(&s, &pts[1], w1).ok()?;
        builder.edge(&s, &pts[2], w2).ok()?;
    } else {
        builder.edge(&s, &pts[0], &trunk).ok()?;
        builder.edge(&pts[1], &s, w1).ok()?;
        builder.edge(&pts[2], &s, w2).ok()?;
    }
    builder.build().ok()
}

/// Weighted median of the neighbours of `v`, weights `tau(mean flow)` per edge.
fn recenter(g: &TransportGraph, tau: &TransportCost, v: usize) -> Point {
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if a == v || b == v {
            pts.push(g.vertices()[if a == v { b } else { a }].clone());
            ws.push(tau.value(mean(&g.weights()[e])));
        }
    }
    if pts.is_empty() {
        return g.vertices()[v].clone();
    }
    weighted_median(&pts, &ws)
}

fn move_vertex(g: &TransportGraph, v: usize, target: Point) -> Option<TransportGraph> {
    if target.coords().iter().any(|c| !c.is_finite()) || g.vertex_index(&target).is_some() {
        return None;
    }
    let mut vertices = g.vertices().to_vec();
    vertices[v] = target;
    TransportGraph::new(g.dim(), vertices, g.edges().to_vec(), g.weights().to_vec(), g.grid()).ok()
}

/// Brackets the distance between `plus` and `minus`: seeds with the dyadic
/// baselines for `k = 1..=k_max` and the optimized shortest-path routing,
/// then improves the incumbent with Steiner insertions, vertex moves, edge
/// additions and removals, and weight re-optimization, accepting strictly
/// improving moves only.
pub fn local_search(
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    tau: &TransportCost,
    p: f64,
    lambda: f64,
    cfg: &OptimizerConfig,
) -> Result<DistanceReport> {
    cfg.validate()?;
    check_exponent(p)?;
    check_pair(plus, minus)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let lower = lower_bound(plus, minus, tau, p, lambda)?;
    let mut terminals = active_points(plus);
    for x in active_points(minus) {
        if !terminals.contains(&x) {
            terminals.push(x);
        }
    }
    let mut search = Search {
        plus,
        minus,
        tau,
        p,
        lambda,
        cfg,
        terminals,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        steiner_added: 0,
    };

    let mut baselines = Vec::new();
    let mut best: Option<(TransportGraph, EnergyReport)> = None;
    for k in 1..=cfg.k_max {
        let base = baseline_with(plus, minus, tau, p, lambda, k, cfg.cycle_cap)?;
        baselines.push(BaselineEntry {
            level: k,
            energy: base.energy,
        });
        if let Some(found) = search.evaluate(&base.witness)? {
            if best.as_ref().is_none_or(|b| found.1.total < b.1.total) {
                best = Some(found);
            }
        }
    }
    let seed = transport_seed(plus, minus)?;
    let seed = search.reweight(&seed).unwrap_or(seed);
    let mut transport_energy = f64::INFINITY;
    if let Some(found) = search.evaluate(&seed)? {
        transport_energy = found.1.total;
        if best.as_ref().is_none_or(|b| found.1.total < b.1.total) {
            best = Some(found);
        }
    }
    let (mut witness, mut energy) =
        best.ok_or_else(|| Error::Consistency("no seed produced a valid witness".into()))?;

    let mut iterations_used = 0;
    let mut accepted = 0;
    let mut stall = 0;
    while iterations_used < cfg.iterations && stall < cfg.stall && energy.total - lower.value > 1e-12 {
        iterations_used += 1;
        let improved = match search.propose(&witness) {
            Some(candidate) => match search.evaluate(&candidate)? {
                Some((g, e)) if e.total < energy.total * (1.0 - IMPROVEMENT) => {
                    witness = g;
                    energy = e;
                    true
                }
                _ => false,
            },
            None => false,
        };
        if improved {
            accepted += 1;
            stall = 0;
        } else {
            stall += 1;
        }
    }
    Ok(DistanceReport {
        lower: lower.value,
        lower_detail: lower.clone(),
        upper: energy.total,
        gap: energy.total - lower.value,
        witness,
        energy,
        baseline_upper: baselines,
        transport_seed: transport_energy,
        iterations_used,
        accepted_moves: accepted,
    })
}
