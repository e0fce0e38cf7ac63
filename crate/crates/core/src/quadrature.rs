/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn order8() -> Self {
        let half = [
            (0.183_434_642_495_649_8, 0.362_683_783_378_362),
            (0.525_532_409_916_329, 0.313_706_645_877_887_3),
            (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
            (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
        ];
        let mut nodes = Vec::with_capacity(8);
        let mut weights = Vec::with_capacity(8);
        for &(x, w) in half.iter().rev() {
            nodes.push(-x);
            weights.push(w);
        }
        for &(x, w) in &half {
            nodes.push(x);
            weights.push(w);
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule with `panels` equal panels.
    pub fn integrate_composite(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let lo = a + i as f64 * h;
                self.integrate(lo, lo + h, &f)
            })
            .sum()
    }

    /// Tensor-product composite rule over an axis-aligned box, `panels` per axis.
    pub fn integrate_box(&self, lo: &[f64], hi: &[f64], panels: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let dim = lo.len();
        // 1-D composite nodes per axis
        let axes: Vec<Vec<(f64, f64)>> = (0..dim)
            .map(|d| {
                let h = (hi[d] - lo[d]) / panels as f64;
                (0..panels)
                    .flat_map(|i| {
                        let a = lo[d] + i as f64 * h;
                        self.mapped(a, a + h).collect::<Vec<_>>()
                    })
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        let mut total = 0.0;
        if dim == 0 {
            return 0.0;
        }
        loop {
            let mut w = 1.0;
            for d in 0..dim {
                let (xd, wd) = axes[d][idx[d]];
                x[d] = xd;
                w *= wd;
            }
            total += w * f(&x);
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dim {
                    return total;
                }
            }
        }
    }
}
