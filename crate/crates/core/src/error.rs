use thiserror::Error;

/// Errors raised by constructors and operations of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid transport cost: {0}")]
    InvalidCost(String),

    #[error("no admissibility witness")]
    NoWitness,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("negative weight {value} for atom {atom} at sample t_{sample}")]
    NegativeWeight { atom: usize, sample: usize, value: f64 },

    #[error("mass condition violated at sample t_{sample}: total weight {total}")]
    MassCondition { sample: usize, total: f64 },

    #[error("duplicate support point: atoms {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("point {index} lies outside the dyadic cell {lo}..{hi}")]
    OutsideCell { index: usize, lo: f64, hi: f64 },

    #[error("support point {0:?} is not a vertex of the graph")]
    NotAVertex(Vec<f64>),

    #[error("time grid mismatch: {left} vs {right} samples")]
    GridMismatch { left: usize, right: usize },

    #[error("cycle explosion: {found} directed cycles found, cap is {cap}")]
    CycleExplosion { found: usize, cap: usize },

    #[error("invalid permutation of {0} cycles")]
    InvalidPermutation(usize),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("source and target supports share points; apply separate_supports first")]
    SharedSupport,

    #[error("graph is not a transport path between the given measures (Kirchhoff residual {0})")]
    NotAPath(f64),

    #[error("could not place relocated atom near {0:?}")]
    Placement(Vec<f64>),

    #[error("unbalanced measures: totals {left} and {right}")]
    Unbalanced { left: f64, right: f64 },

    #[error("infeasible topology: no feasible flow at sample t_{sample}")]
    Infeasible { sample: usize },

    #[error("invalid level range: k = {k}, l = {l}")]
    LevelRange { k: u32, l: u32 },

    #[error("instance error at {path}: {message}")]
    Instance { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
