use serde::Serialize;

use super::search::{local_search, DistanceReport};
use super::OptimizerConfig;
use crate::cost::TransportCost;
use crate::error::{Error, Result};
use crate::measures::AtomicMeasurePath;
use crate::wasserstein::lower_bound;

const SYMMETRY_TOL: f64 = 1e-9;

/// Bracket for one ordered pair, with the values obtained after swapping the
/// roles of the two paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairBracket {
    pub i: usize,
    pub j: usize,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    /// Energy of the transposed witness, which lies in `Path(mu_j, mu_i)`.
    pub swapped_upper: f64,
    pub swapped_lower: f64,
    pub symmetric: bool,
}

/// `defect = U(i,k) - U(i,j) - U(j,k)`; a positive value beyond the summed
/// gaps would contradict the triangle inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleDefect {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub defect: f64,
    pub allowed: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub pairs: Vec<PairBracket>,
    /// Brackets of every instance against itself.
    pub identical: Vec<PairBracket>,
    pub triangles: Vec<TriangleDefect>,
    pub all_symmetric: bool,
    pub flagged_triangles: usize,
}

#[allow(clippy::too_many_arguments)]
fn bracket(
    i: usize,
    j: usize,
    a: &AtomicMeasurePath,
    b: &AtomicMeasurePath,
    tau: &TransportCost,
    p: f64,
    lambda: f64,
    cfg: &OptimizerConfig,
) -> Result<(PairBracket, DistanceReport)> {
    let r = local_search(a, b, tau, p, lambda, cfg)?;
    let swapped = r.witness.transpose();
    if swapped.kirchhoff_residual(b, a)? > 1e-6 {
        return Err(Error::Consistency(format!(
            "transposed witness of pair ({i}, {j}) is not a path"
        )));
    }
    let swapped_upper = swapped.energy(tau, p, lambda)?.total;
    let swapped_lower = lower_bound(b, a, tau, p, lambda)?.value;
    let close = |x: f64, y: f64| (x - y).abs() <= SYMMETRY_TOL * x.abs().max(y.abs()).max(1.0);
    let pair = PairBracket {
        i,
        j,
        lower: r.lower,
        upper: r.upper,
        gap: r.gap,
        swapped_upper,
        swapped_lower,
        symmetric: close(swapped_upper, r.upper) && close(swapped_lower, r.lower),
    };
    Ok((pair, r))
}

/// Brackets every pair of instances, checks symmetry through transposed
/// witnesses and reports triangle defects against the bracket widths.
pub fn metric_probe(
    instances: &[AtomicMeasurePath],
    tau: &TransportCost,
    p: f64,
    lambda: f64,
    cfg: &OptimizerConfig,
) -> Result<MetricReport> {
    if instances.len() < 3 {
        return Err(Error::Domain(format!(
            "metric probe needs at least 3 instances, got {}",
            instances.len()
        )));
    }
    let m = instances.len();
    let mut table = vec![vec![None; m]; m];
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let (pair, _) = bracket(i, j, &instances[i], &instances[j], tau, p, lambda, cfg)?;
            table[i][j] = Some((pair.upper, pair.gap));
            table[j][i] = Some((pair.swapped_upper, pair.gap));
            pairs.push(pair);
        }
    }
    let identical = (0..m)
        .map(|i| bracket(i, i, &instances[i], &instances[i], tau, p, lambda, cfg).map(|b| b.0))
        .collect::<Result<Vec<_>>>()?;
    let at = |a: usize, b: usize| table[a][b].expect("all pairs bracketed");
    let mut triangles = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                for (i, j, k) in [(a, b, c), (b, a, c), (a, c, b)] {
                    let (uik, gik) = at(i, k);
                    let (uij, gij) = at(i, j);
                    let (ujk, gjk) = at(j, k);
                    let defect = uik - uij - ujk;
                    let allowed = gij + gjk + gik;
                    triangles.push(TriangleDefect {
                        i,
                        j,
                        k,
                        defect,
                        allowed,
                        flagged: defect > allowed + 1e-9,
                    });
                }
            }
        }
    }
    Ok(MetricReport {
        all_symmetric: pairs.iter().all(|p| p.symmetric),
        flagged_triangles: triangles.iter().filter(|t| t.flagged).count(),
        pairs,
        identical,
        triangles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStep {
    pub m: u32,
    /// Translation length `2^-m`.
    pub amplitude: f64,
    pub upper: f64,
    pub lower: f64,
    pub lid1_term: f64,
    pub derivative_lid1_term: f64,
}

/// Brackets the distance between `base` and its translate by `2^-m e_1` for
/// each exponent `m`.
pub fn convergence_probe(
    base: &AtomicMeasurePath,
    tau: &TransportCost,
    p: f64,
    lambda: f64,
    cfg: &OptimizerConfig,
    exponents: &[u32],
) -> Result<Vec<ConvergenceStep>> {
    exponents
        .iter()
        .map(|&m| {
            let h = 0.5f64.powi(m as i32);
            let mut offset = vec![0.0; base.dim()];
            offset[0] = h;
            let moved = base.translated(&offset);
            let r = local_search(&moved, base, tau, p, lambda, cfg)?;
            Ok(ConvergenceStep {
                m,
                amplitude: h,
                upper: r.upper,
                lower: r.lower,
                lid1_term: r.lower_detail.lid1_term,
                derivative_lid1_term: r.lower_detail.derivative_lid1_term,
            })
        })
        .collect()
}
