use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// Geometry of the nested half-open dyadic cubes tiling `[x - 2s, x + 2s)^n`.
///
/// Level `k >= 1` cells have side `s * 2^(2-k)`; the level-`k` cells are the
/// cubes `Q^{c, s 2^(1-k)}_i` hanging off the level-`(k-1)` centers `c`, so
/// cell `idx` at level `k` has parent `idx >> 1` (per axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicLevelSpec {
    pub root: Point,
    pub scale: f64,
}

impl DyadicLevelSpec {
    pub fn new(root: Point, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Domain(format!(
                "dyadic base scale must be positive, got {scale}"
            )));
        }
        Ok(Self { root, scale })
    }

    /// Root at the origin with unit base scale, i.e. the cell `[-2, 2)^n`.
    pub fn standard(dim: usize) -> Self {
        Self {
            root: Point::origin(dim),
            scale: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn side(&self, level: u32) -> f64 {
        self.scale * 4.0 / (1u64 << level) as f64
    }

    pub fn per_axis(&self, level: u32) -> i64 {
        1i64 << level
    }

    pub fn lower(&self) -> Vec<f64> {
        self.root.0.iter().map(|c| c - 2.0 * self.scale).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.root.0.iter().map(|c| c + 2.0 * self.scale).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.root.coords())
            .all(|(&v, &c)| v >= c - 2.0 * self.scale && v < c + 2.0 * self.scale)
    }

    pub fn cell_index(&self, x: &[f64], level: u32) -> Option<Vec<i64>> {
        if !self.contains(x) {
            return None;
        }
        let side = self.side(level);
        let count = self.per_axis(level);
        Some(
            x.iter()
                .zip(self.root.coords())
                .map(|(&v, &c)| {
                    let i = ((v - (c - 2.0 * self.scale)) / side).floor() as i64;
                    i.clamp(0, count - 1)
                })
                .collect(),
        )
    }

    pub fn center(&self, level: u32, index: &[i64]) -> Point {
        let side = self.side(level);
        Point(
            index
                .iter()
                .zip(self.root.coords())
                .map(|(&i, &c)| c - 2.0 * self.scale + (i as f64 + 0.5) * side)
                .collect(),
        )
    }

    pub fn bounds(&self, level: u32, index: &[i64]) -> (Vec<f64>, Vec<f64>) {
        let side = self.side(level);
        let lo: Vec<f64> = index
            .iter()
            .zip(self.root.coords())
            .map(|(&i, &c)| c - 2.0 * self.scale + i as f64 * side)
            .collect();
        let hi = lo.iter().map(|l| l + side).collect();
        (lo, hi)
    }

    /// Every cell index at `level`, in lexicographic order.
    pub fn all_cells(&self, level: u32) -> Vec<Vec<i64>> {
        let count = self.per_axis(level);
        let dim = self.dim();
        let total = (count as usize).pow(dim as u32);
        (0..total)
            .map(|mut flat| {
                let mut idx = vec![0i64; dim];
                for d in (0..dim).rev() {
                    idx[d] = (flat % count as usize) as i64;
                    flat /= count as usize;
                }
                idx
            })
            .collect()
    }

    pub fn check_contains(&self, points: &[Point]) -> Result<()> {
        for (index, p) in points.iter().enumerate() {
            if !self.contains(p.coords()) {
                return Err(Error::OutsideCell {
                    index,
                    lo: self.lower().iter().cloned().fold(f64::INFINITY, f64::min),
                    hi: self.upper().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                });
            }
        }
        Ok(())
    }
}

pub fn parent_index(index: &[i64]) -> Vec<i64> {
    index.iter().map(|i| i >> 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_geometry_in_one_dimension() {
        let spec = DyadicLevelSpec::standard(1);
        assert_eq!(spec.center(1, &[0]).0, vec![-1.0]);
        assert_eq!(spec.center(1, &[1]).0, vec![1.0]);
        let centers: Vec<f64> = (0..4).map(|i| spec.center(2, &[i]).0[0]).collect();
        assert_eq!(centers, vec![-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(spec.cell_index(&[0.5], 2), Some(vec![2]));
        assert_eq!(spec.cell_index(&[0.0], 1), Some(vec![1]));
        assert_eq!(spec.cell_index(&[2.0], 1), None);
        assert_eq!(spec.center(0, &[0]).0, vec![0.0]);
    }

    #[test]
    fn parents_nest() {
        let spec = DyadicLevelSpec::standard(2);
        for x in [[0.3, -1.7], [1.99, 0.0], [-2.0, 1.0]] {
            for k in 1..6 {
                let child = spec.cell_index(&x, k + 1).unwrap();
                assert_eq!(parent_index(&child), spec.cell_index(&x, k).unwrap());
            }
        }
    }
}
