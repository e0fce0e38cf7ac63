//! Uncapacitated/capacitated min-cost flow by successive shortest paths
//! (Dijkstra on reduced costs with node potentials).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Amounts below this (relative to the total supply) count as zero.
const FLOW_EPS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub cap: f64,
    pub cost: f64,
}

/// A directed network with nonnegative arc costs.
#[derive(Debug, Clone, Default)]
pub struct FlowNetwork {
    nodes: usize,
    arcs: Vec<Arc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Flow on every arc, in insertion order.
    pub flow: Vec<f64>,
    pub cost: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            arcs: Vec::new(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Adds an arc; `cap = f64::INFINITY` for an uncapacitated arc.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> usize {
        debug_assert!(
            cost >= 0.0 && cost.is_finite(),
            "arc costs must be finite and nonnegative"
        );
        self.arcs.push(Arc { from, to, cap, cost });
        self.arcs.len() - 1
    }

    /// Cheapest flow with net outflow `supply[v]` at every node (positive
    /// entries are sources, negative are sinks). `None` when the supplies
    /// cannot be routed or do not balance.
    pub fn solve(&self, supply: &[f64]) -> Option<FlowSolution> {
        assert_eq!(supply.len(), self.nodes);
        let total: f64 = supply.iter().filter(|&&s| s > 0.0).sum();
        let deficit: f64 = supply.iter().filter(|&&s| s < 0.0).map(|s| -s).sum();
        let scale = total.max(deficit).max(1.0);
        if (total - deficit).abs() > 1e-9 * scale {
            return None;
        }
        let eps = FLOW_EPS * scale;
        // residual graph: arc 2i forward, 2i + 1 backward
        let n = self.nodes + 2;
        let (src, snk) = (self.nodes, self.nodes + 1);
        let mut to = Vec::new();
        let mut cap = Vec::new();
        let mut cost = Vec::new();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut push = |a: usize, b: usize, c: f64, w: f64, adj: &mut Vec<Vec<usize>>| {
            adj[a].push(to.len());
            to.push(b);
            cap.push(c);
            cost.push(w);
            adj[b].push(to.len());
            to.push(a);
            cap.push(0.0);
            cost.push(-w);
        };
        for a in &self.arcs {
            push(a.from, a.to, a.cap, a.cost, &mut adj);
        }
        for (v, &s) in supply.iter().enumerate() {
            if s > 0.0 {
                push(src, v, s, 0.0, &mut adj);
            } else if s < 0.0 {
                push(v, snk, -s, 0.0, &mut adj);
            }
        }
        let mut potential = vec![0.0; n];
        let mut remaining = total.min(deficit);
        while remaining > eps {
            let mut dist = vec![f64::INFINITY; n];
            let mut via = vec![usize::MAX; n];
            let mut heap = BinaryHeap::new();
            dist[src] = 0.0;
            heap.push(Entry(0.0, src));
            while let Some(Entry(d, v)) = heap.pop() {
                if d > dist[v] {
                    continue;
                }
                for &r in &adj[v] {
                    if cap[r] <= eps {
                        continue;
                    }
                    let w = to[r];
                    let reduced = (cost[r] + potential[v] - potential[w]).max(0.0);
                    let nd = d + reduced;
                    if nd < dist[w] {
                        dist[w] = nd;
                        via[w] = r;
                        heap.push(Entry(nd, w));
                    }
                }
            }
            if !dist[snk].is_finite() {
                return None;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            let mut bottleneck = remaining;
            let mut v = snk;
            while v != src {
                let r = via[v];
                bottleneck = bottleneck.min(cap[r]);
                v = to[r ^ 1];
            }
            let mut v = snk;
            while v != src {
                let r = via[v];
                cap[r] -= bottleneck;
                cap[r ^ 1] += bottleneck;
                v = to[r ^ 1];
            }
            remaining -= bottleneck;
        }
        let flow: Vec<f64> = (0..self.arcs.len()).map(|i| cap[2 * i + 1]).collect();
        let cost = flow.iter().zip(&self.arcs).map(|(f, a)| f * a.cost).sum();
        Some(FlowSolution { flow, cost })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes_along_cheapest_path() {
        let mut net = FlowNetwork::new(3);
        net.add_arc(0, 2, f64::INFINITY, 3.0);
        net.add_arc(0, 1, f64::INFINITY, 1.0);
        net.add_arc(1, 2, f64::INFINITY, 1.0);
        let sol = net.solve(&[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(sol.flow, vec![0.0, 1.0, 1.0]);
        assert_eq!(sol.cost, 2.0);
    }

    #[test]
    fn respects_capacity() {
        let mut net = FlowNetwork::new(3);
        net.add_arc(0, 2, f64::INFINITY, 3.0);
        net.add_arc(0, 1, 0.25, 1.0);
        net.add_arc(1, 2, f64::INFINITY, 1.0);
        let sol = net.solve(&[1.0, 0.0, -1.0]).unwrap();
        assert!((sol.cost - (0.75 * 3.0 + 0.25 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn detects_infeasibility() {
        let mut net = FlowNetwork::new(3);
        net.add_arc(0, 1, f64::INFINITY, 1.0);
        assert!(net.solve(&[1.0, 0.0, -1.0]).is_none());
        assert!(net.solve(&[1.0, -0.5, 0.0]).is_none());
    }

    #[test]
    fn rerouting_uses_backward_arcs() {
        // classic instance where the greedy first path must be partially undone
        let mut net = FlowNetwork::new(4);
        net.add_arc(0, 1, 1.0, 1.0);
        net.add_arc(0, 2, 1.0, 2.0);
        net.add_arc(1, 3, 1.0, 2.0);
        net.add_arc(1, 2, 1.0, 0.0);
        net.add_arc(2, 3, 1.0, 1.0);
        let sol = net.solve(&[2.0, 0.0, 0.0, -2.0]).unwrap();
        assert!((sol.cost - 6.0).abs() < 1e-15);
    }
}
