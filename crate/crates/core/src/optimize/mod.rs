//! Upper bounds for the transport distance: dyadic baselines, weight
//! optimization on a fixed topology and a Steiner-point local search, bracketed
//! by the `Lid_1` lower bound.

mod probe;
mod search;
mod weights;

use serde::{Deserialize, Serialize};

pub use probe::{convergence_probe, metric_probe, ConvergenceStep, MetricReport, PairBracket, TriangleDefect};
pub use search::{
    baseline_upper, local_search, make_never_cyclic, transport_seed, Baseline, BaselineEntry, DistanceReport,
};
pub use weights::optimize_weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Deepest connector level used for seeding.
    pub k_max: u32,
    /// Maximum number of Steiner vertices the search may add.
    pub steiner_budget: usize,
    /// Candidate-move budget of the local search.
    pub iterations: usize,
    /// Consecutive rejected moves before stopping.
    pub stall: usize,
    /// Steiner perturbation scale relative to the mean incident edge length.
    pub perturbation: f64,
    pub seed: u64,
    /// Projected-subgradient steps per time sample and sweep.
    pub weight_steps: usize,
    /// Block-coordinate sweeps over the time samples per weight solve.
    pub weight_sweeps: usize,
    /// Initial subgradient step; step `t` uses `step_size / sqrt(1 + t)`.
    pub step_size: f64,
    /// `tau` is evaluated at `max(s, tau_smoothing)` for slopes.
    pub tau_smoothing: f64,
    /// Randomized restarts of the linearized-cost rerouting.
    pub restarts: usize,
    pub cycle_cap: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            k_max: 5,
            steiner_budget: 6,
            iterations: 2000,
            stall: 50,
            perturbation: 0.1,
            seed: 7,
            weight_steps: 2,
            weight_sweeps: 5,
            step_size: 0.05,
            tau_smoothing: 1e-6,
            restarts: 2,
            cycle_cap: crate::cycles::DEFAULT_CYCLE_CAP,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> crate::error::Result<()> {
        let ok = self.k_max >= 1
            && self.stall >= 1
            && self.perturbation > 0.0
            && self.step_size > 0.0
            && self.tau_smoothing > 0.0
            && self.cycle_cap >= 1;
        if ok {
            Ok(())
        } else {
            Err(crate::error::Error::Domain(format!(
                "invalid optimizer configuration: {self:?}"
            )))
        }
    }
}
