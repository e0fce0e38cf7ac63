use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::OptimizerConfig;
use crate::cost::TransportCost;
use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::graph::TransportGraph;
use crate::grid::{check_exponent, lp_norm, lp_norm_gradient};
use crate::measures::AtomicMeasurePath;

/// Weights below this are set to zero in returned graphs.
const WEIGHT_FLOOR: f64 = 1e-14;
const FEASIBLE_TOL: f64 = 1e-9;
const REROUTE_ROUNDS: usize = 20;
const DYKSTRA_ROUNDS: usize = 40;

/// Weights indexed `[edge][sample]`.
pub(crate) type Weights = Vec<Vec<f64>>;

/// The discretized energy of a fixed topology as a function of its weights.
pub(crate) struct WeightProblem<'a> {
    graph: &'a TransportGraph,
    tau: &'a TransportCost,
    p: f64,
    lambda: f64,
    lengths: Vec<f64>,
    /// `supply[j][v]`: required net outflow `a+ - a-` at vertex `v`.
    supply: Vec<Vec<f64>>,
}

impl<'a> WeightProblem<'a> {
    pub(crate) fn new(
        graph: &'a TransportGraph,
        plus: &AtomicMeasurePath,
        minus: &AtomicMeasurePath,
        tau: &'a TransportCost,
        p: f64,
        lambda: f64,
    ) -> Result<Self> {
        check_exponent(p)?;
        let n = graph.grid().len();
        graph.grid().check_same(&plus.grid())?;
        graph.grid().check_same(&minus.grid())?;
        let mut supply = vec![vec![0.0; graph.vertex_count()]; n];
        for (path, sign) in [(plus, 1.0), (minus, -1.0)] {
            for (pt, row) in path.points().iter().zip(path.weights()) {
                if row.iter().all(|&w| w == 0.0) {
                    continue;
                }
                let v = graph.vertex_index(pt).ok_or_else(|| Error::NotAVertex(pt.0.clone()))?;
                for (j, w) in row.iter().enumerate() {
                    supply[j][v] += sign * w;
                }
            }
        }
        Ok(Self {
            graph,
            tau,
            p,
            lambda,
            lengths: graph.lengths(),
            supply,
        })
    }

    fn samples(&self) -> usize {
        self.supply.len()
    }

    /// `M^tau_p + lambda |G'|_p` for the given weights.
    pub(crate) fn objective(&self, w: &Weights) -> f64 {
        let grid = self.graph.grid();
        let n = self.samples();
        let mut s = vec![0.0; n];
        let mut d = vec![0.0; n];
        for (row, l) in w.iter().zip(&self.lengths) {
            let diff = grid.forward_difference(row);
            for j in 0..n {
                s[j] += self.tau.value(row[j]) * l;
                d[j] += diff[j].abs() * l;
            }
        }
        lp_norm(&s, self.p) + self.lambda * lp_norm(&d, self.p)
    }

    pub(crate) fn residual(&self, w: &Weights) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, b) in self.supply.iter().enumerate() {
            let mut net = b.iter().map(|v| -v).collect::<Vec<f64>>();
            for (&(a, h), row) in self.graph.edges().iter().zip(w) {
                net[a] += row[j];
                net[h] -= row[j];
            }
            worst = net.iter().fold(worst, |m, v| m.max(v.abs()));
        }
        worst
    }

    /// Per-sample min-cost flows for `cost(edge, sample)`.
    pub(crate) fn route(&self, cost: impl Fn(usize, usize) -> f64) -> Result<Weights> {
        let m = self.graph.edge_count();
        let n = self.samples();
        let mut w = vec![vec![0.0; n]; m];
        let mut previous: Option<(Vec<f64>, usize)> = None;
        for j in 0..n {
            let costs: Vec<f64> = (0..m).map(|e| cost(e, j)).collect();
            if let Some((pc, pj)) = &previous {
                if *pc == costs && self.supply[*pj] == self.supply[j] {
                    let pj = *pj;
                    for row in w.iter_mut() {
                        row[j] = row[pj];
                    }
                    continue;
                }
            }
            let mut net = FlowNetwork::new(self.graph.vertex_count());
            for (&(a, b), &c) in self.graph.edges().iter().zip(&costs) {
                net.add_arc(a, b, f64::INFINITY, c);
            }
            let sol = net.solve(&self.supply[j]).ok_or(Error::Infeasible { sample: j })?;
            for (row, f) in w.iter_mut().zip(sol.flow) {
                row[j] = if f < WEIGHT_FLOOR { 0.0 } else { f };
            }
            previous = Some((costs, j));
        }
        Ok(w)
    }

    fn secant(&self, s: f64) -> f64 {
        // unused edges are priced as if they carried the whole unit mass
        if s > 1e-9 {
            self.tau.value(s) / s
        } else {
            self.tau.value(1.0)
        }
    }

    /// Repeated rerouting with costs linearized at the current weights (per
    /// sample and time-averaged); keeps the best objective seen in `best`.
    fn reroute(&self, start: &Weights, best: &mut (Weights, f64), jitter: Option<&mut ChaCha8Rng>) -> Result<()> {
        let m = self.graph.edge_count();
        let factors: Vec<f64> = match jitter {
            Some(rng) => (0..m).map(|_| 1.0 + 0.6 * (rng.random::<f64>() - 0.5)).collect(),
            None => vec![1.0; m],
        };
        let mut w = start.clone();
        for round in 0..REROUTE_ROUNDS {
            let f = |e: usize| if round == 0 { factors[e] } else { 1.0 };
            let per_sample = self.route(|e, j| self.secant(w[e][j]) * self.lengths[e] * f(e))?;
            let means: Vec<f64> = w.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
            let averaged = self.route(|e, _| self.secant(means[e]) * self.lengths[e] * f(e))?;
            let (a, b) = (self.objective(&per_sample), self.objective(&averaged));
            let (next, value) = if a <= b { (per_sample, a) } else { (averaged, b) };
            if value < best.1 {
                *best = (next.clone(), value);
            }
            if next == w {
                break;
            }
            w = next;
        }
        Ok(())
    }

    /// Block-coordinate projected subgradient on the smoothed objective.
    fn subgradient(&self, start: &Weights, cfg: &OptimizerConfig) -> Weights {
        let projector = Projector::new(self.graph);
        let grid = self.graph.grid();
        let n = self.samples();
        let m = self.graph.edge_count();
        let eps = cfg.tau_smoothing;
        let mut w = start.clone();
        let mut t = 0usize;
        for _ in 0..cfg.weight_sweeps {
            // linearize the time-coupled derivative term at the sweep start
            let s: Vec<f64> = (0..n)
                .map(|j| (0..m).map(|e| self.tau.value(w[e][j].max(eps)) * self.lengths[e]).sum())
                .collect();
            let gm = lp_norm_gradient(&s, self.p);
            let diffs: Vec<Vec<f64>> = w.iter().map(|r| grid.forward_difference(r)).collect();
            let mags: Vec<f64> = (0..n)
                .map(|j| (0..m).map(|e| diffs[e][j].abs() * self.lengths[e]).sum())
                .collect();
            let gd = lp_norm_gradient(&mags, self.p);
            for j in 0..n {
                let prev = grid.prev(j);
                for _ in 0..cfg.weight_steps {
                    let mut grad = vec![0.0; m];
                    for e in 0..m {
                        let l = self.lengths[e];
                        let d_prev = n as f64 * (w[e][j] - w[e][prev]);
                        let d_next = n as f64 * (w[e][grid.next(j)] - w[e][j]);
                        grad[e] = gm[j] * self.tau.slope(w[e][j], eps) * l
                            + self.lambda
                                * l
                                * n as f64
                                * (gd[prev] * d_prev.signum() * f64::from(d_prev != 0.0)
                                    - gd[j] * d_next.signum() * f64::from(d_next != 0.0));
                    }
                    let scale = grad.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
                    if scale == 0.0 || !scale.is_finite() {
                        break;
                    }
                    let step = cfg.step_size / (1.0 + t as f64).sqrt();
                    t += 1;
                    let moved: Vec<f64> = (0..m).map(|e| w[e][j] - step * grad[e] / scale).collect();
                    let projected = projector.project(&moved, &self.supply[j]);
                    for e in 0..m {
                        w[e][j] = projected[e];
                    }
                }
            }
        }
        w
    }
}

/// Projection onto `{w : B w = b, w >= 0}` by Dykstra's alternating scheme.
struct Projector {
    incidence: DMatrix<f64>,
    laplacian_pinv: DMatrix<f64>,
}

impl Projector {
    fn new(g: &TransportGraph) -> Self {
        let (v, m) = (g.vertex_count(), g.edge_count());
        let mut incidence = DMatrix::zeros(v, m);
        for (e, &(a, b)) in g.edges().iter().enumerate() {
            incidence[(a, e)] = 1.0;
            incidence[(b, e)] = -1.0;
        }
        let laplacian = &incidence * incidence.transpose();
        let laplacian_pinv = laplacian
            .clone()
            .pseudo_inverse(1e-10)
            .unwrap_or_else(|_| DMatrix::zeros(v, v));
        Self {
            incidence,
            laplacian_pinv,
        }
    }

    fn affine(&self, w: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let r = &self.incidence * w - b;
        w - self.incidence.transpose() * (&self.laplacian_pinv * r)
    }

    fn project(&self, w: &[f64], b: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(b);
        let mut x = DVector::from_column_slice(w);
        let mut p = DVector::zeros(x.len());
        let mut q = DVector::zeros(x.len());
        for _ in 0..DYKSTRA_ROUNDS {
            let y = self.affine(&(&x + &p), &b);
            p = &x + &p - &y;
            let shifted = &y + &q;
            let next = shifted.map(|v| v.max(0.0));
            q = shifted - &next;
            x = next;
        }
        x.iter().map(|&v| if v < WEIGHT_FLOOR { 0.0 } else { v }).collect()
    }
}

/// Minimizes the discretized energy over weights on the topology of `g`
/// (vertex and edge sets fixed), keeping every sample feasible for the
/// Kirchhoff conditions between `plus` and `minus`.
///
/// Candidates come from shortest-path routing, rerouting with costs
/// linearized at the current weights, and a block-coordinate projected
/// subgradient on the `tau`-smoothed energy; the best candidate is returned.
pub fn optimize_weights(
    g: &TransportGraph,
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    tau: &TransportCost,
    p: f64,
    lambda: f64,
    cfg: &OptimizerConfig,
) -> Result<TransportGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    optimize_weights_with(g, plus, minus, tau, p, lambda, cfg, &mut rng)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn optimize_weights_with(
    g: &TransportGraph,
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    tau: &TransportCost,
    p: f64,
    lambda: f64,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TransportGraph> {
    cfg.validate()?;
    let problem = WeightProblem::new(g, plus, minus, tau, p, lambda)?;
    let lengths = g.lengths();
    let shortest = problem.route(|e, _| lengths[e])?;
    let mut best = (shortest.clone(), problem.objective(&shortest));
    if problem.residual(&g.weights().to_vec()) <= FEASIBLE_TOL {
        let current = g.weights().to_vec();
        let value = problem.objective(&current);
        if value < best.1 {
            best = (current, value);
        }
    }
    let start = best.0.clone();
    problem.reroute(&start, &mut best, None)?;
    problem.reroute(&shortest, &mut best, None)?;
    for _ in 0..cfg.restarts {
        let start = best.0.clone();
        problem.reroute(&start, &mut best, Some(rng))?;
    }
    if cfg.weight_sweeps > 0 && cfg.weight_steps > 0 && g.edge_count() > 0 {
        let smooth = problem.subgradient(&best.0, cfg);
        if problem.residual(&smooth) <= FEASIBLE_TOL {
            let value = problem.objective(&smooth);
            if value < best.1 {
                best = (smooth.clone(), value);
            }
        }
        problem.reroute(&smooth, &mut best, None)?;
    }
    let weights = best
        .0
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|v| if v < WEIGHT_FLOOR { 0.0 } else { v })
                .collect()
        })
        .collect();
    g.with_weights(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::point::Point;

    fn pt(c: &[f64]) -> Point {
        Point(c.to_vec())
    }

    #[test]
    fn projection_lands_on_polytope() {
        let grid = TimeGrid::new(2).unwrap();
        let g = TransportGraph::new(
            2,
            vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0]), pt(&[0.5, 1.0])],
            vec![(0, 1), (0, 2), (2, 1)],
            vec![vec![0.0; 2]; 3],
            grid,
        )
        .unwrap();
        let proj = Projector::new(&g);
        let x = proj.project(&[0.9, 0.4, -0.2], &[1.0, -1.0, 0.0]);
        assert!(x.iter().all(|&v| v >= 0.0));
        assert!((x[0] + x[1] - 1.0).abs() < 1e-9);
        assert!((x[1] - x[2]).abs() < 1e-9);
    }

    #[test]
    fn single_edge_is_forced() {
        let grid = TimeGrid::new(4).unwrap();
        let g = TransportGraph::new(1, vec![pt(&[0.0]), pt(&[0.7])], vec![(0, 1)], vec![vec![0.0; 4]], grid).unwrap();
        let plus = AtomicMeasurePath::dirac(pt(&[0.0]), grid);
        let minus = AtomicMeasurePath::dirac(pt(&[0.7]), grid);
        let tau = TransportCost::power(0.5).unwrap();
        let out = optimize_weights(&g, &plus, &minus, &tau, 2.0, 0.1, &OptimizerConfig::default()).unwrap();
        assert_eq!(out.weights()[0], vec![1.0; 4]);
        let e = out.energy(&tau, 2.0, 0.1).unwrap();
        assert!((e.total - 0.7).abs() < 1e-12);
    }

    #[test]
    fn infeasible_topology_is_reported() {
        let grid = TimeGrid::new(2).unwrap();
        let g = TransportGraph::new(1, vec![pt(&[0.0]), pt(&[1.0])], vec![(1, 0)], vec![vec![0.0; 2]], grid).unwrap();
        let plus = AtomicMeasurePath::dirac(pt(&[0.0]), grid);
        let minus = AtomicMeasurePath::dirac(pt(&[1.0]), grid);
        let tau = TransportCost::power(0.5).unwrap();
        let err = optimize_weights(&g, &plus, &minus, &tau, 2.0, 0.1, &OptimizerConfig::default()).unwrap_err();
        assert_eq!(err, Error::Infeasible { sample: 0 });
    }
}
