use serde::{Deserialize, Serialize};

/// A point of `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn translated(&self, offset: &[f64]) -> Point {
        Point(self.0.iter().zip(offset).map(|(a, b)| a + b).collect())
    }

    /// Exact coordinate key usable for hashing; `-0.0` and `0.0` collapse.
    pub fn key(&self) -> Vec<u64> {
        self.0
            .iter()
            .map(|&c| if c == 0.0 { 0.0_f64.to_bits() } else { c.to_bits() })
            .collect()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}
