//! Instance files: JSON loading with field diagnostics, validation, load-time
//! normalization into `[-1, 1)^n`, and saving.

use std::fs;
use std::path::Path;

use branchflow::cost::{Majorant, TransportCost};
use branchflow::error::{Error, Result};
use branchflow::graph::TransportGraph;
use branchflow::grid::TimeGrid;
use branchflow::measures::AtomicMeasurePath;
use branchflow::point::Point;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: &str = "1";

/// Half-width of the box the normalized data is scaled into.
const FILL: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurePayload {
    pub points: Vec<Vec<f64>>,
    /// `k x N`, one row per atom.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphPayload {
    pub vertices: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    /// `|E| x N`, one row per edge.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Power {
        alpha: f64,
    },
    Tabulated {
        samples: Vec<(f64, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        witness: Option<Majorant>,
    },
}

impl CostSpec {
    pub fn build(&self) -> Result<TransportCost> {
        match self {
            CostSpec::Power { alpha } => TransportCost::power(*alpha),
            CostSpec::Tabulated { samples, witness } => TransportCost::tabulated(samples.clone(), witness.clone()),
        }
    }

    /// Parses `power:<alpha>`.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        match text.split_once(':') {
            Some(("power", a)) => a
                .trim()
                .parse()
                .map(|alpha| CostSpec::Power { alpha })
                .map_err(|e| format!("bad exponent {a:?}: {e}")),
            _ => Err(format!("expected power:<alpha>, got {text:?}")),
        }
    }
}

/// Exponent `p`, written as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Named(Infinity),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Infinity {
    #[serde(rename = "inf")]
    Inf,
}

impl Exponent {
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Named(Infinity::Inf) => f64::INFINITY,
        }
    }

    pub fn from_value(p: f64) -> Self {
        if p.is_infinite() {
            Exponent::Named(Infinity::Inf)
        } else {
            Exponent::Finite(p)
        }
    }

    pub fn parse(text: &str) -> std::result::Result<f64, String> {
        match text {
            "inf" | "infinity" => Ok(f64::INFINITY),
            _ => text.parse().map_err(|e| format!("bad exponent {text:?}: {e}")),
        }
    }
}

/// Affine map applied at load time: `stored = (original - offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub scale: f64,
    pub offset: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Self {
            scale: 1.0,
            offset: vec![0.0; dim],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.offset.iter().all(|&c| c == 0.0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.offset).map(|(v, o)| (v - o) / self.scale).collect()
    }

    /// Maps a normalized point back to original coordinates.
    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.offset).map(|(v, o)| v * self.scale + o).collect()
    }

    /// Identity when everything lies in `[-1, 1)^n`, otherwise centers the
    /// bounding box and scales its largest half-extent to 0.9.
    fn fit<'a>(dim: usize, points: impl Iterator<Item = &'a Vec<f64>>) -> Self {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for x in points {
            for d in 0..dim {
                lo[d] = lo[d].min(x[d]);
                hi[d] = hi[d].max(x[d]);
            }
        }
        if lo.iter().all(|&v| v >= -1.0) && hi.iter().all(|&v| v < 1.0) {
            return Self::identity(dim);
        }
        let offset: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let half = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max);
        Self {
            scale: if half > 0.0 { half / FILL } else { 1.0 },
            offset,
        }
    }
}

/// On-disk form of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: String,
    pub dimension: usize,
    pub time_samples: usize,
    pub mu_plus: MeasurePayload,
    pub mu_minus: MeasurePayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphPayload>,
    pub cost: CostSpec,
    pub p: Exponent,
    pub lambda: f64,
    /// Present when the coordinates in the file are already normalized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

/// A validated, normalized instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub mu_plus: AtomicMeasurePath,
    pub mu_minus: AtomicMeasurePath,
    pub graph: Option<TransportGraph>,
    pub cost_spec: CostSpec,
    pub cost: TransportCost,
    pub p: f64,
    pub lambda: f64,
    pub normalization: Normalization,
}

fn field(path: &str, message: impl ToString) -> Error {
    Error::Instance {
        path: path.to_string(),
        message: message.to_string(),
    }
}

fn in_unit_box(x: &[f64]) -> bool {
    x.iter().all(|&v| (-1.0..1.0).contains(&v))
}

fn measure(
    name: &str,
    m: &MeasurePayload,
    dim: usize,
    grid: TimeGrid,
    norm: &Normalization,
) -> Result<AtomicMeasurePath> {
    if m.points.is_empty() {
        return Err(field(&format!("{name}.points"), "a measure needs at least one atom"));
    }
    for (i, x) in m.points.iter().enumerate() {
        if x.len() != dim {
            return Err(field(
                &format!("{name}.points[{i}]"),
                format!("expected {dim} coordinates, got {}", x.len()),
            ));
        }
    }
    if m.weights.len() != m.points.len() {
        return Err(field(
            &format!("{name}.weights"),
            format!(
                "expected {} rows (one per atom), got {}",
                m.points.len(),
                m.weights.len()
            ),
        ));
    }
    for (i, row) in m.weights.iter().enumerate() {
        if row.len() != grid.len() {
            return Err(field(
                &format!("{name}.weights[{i}]"),
                format!("expected {} samples, got {}", grid.len(), row.len()),
            ));
        }
    }
    let points = m.points.iter().map(|x| Point(norm.apply(x))).collect();
    AtomicMeasurePath::new(points, m.weights.clone(), grid).map_err(|e| field(&format!("{name}.weights"), e))
}

impl Instance {
    pub fn from_file(file: &InstanceFile) -> Result<Self> {
        if file.version != FORMAT_VERSION {
            return Err(field(
                "version",
                format!("unsupported version {:?}, expected {FORMAT_VERSION:?}", file.version),
            ));
        }
        let dim = file.dimension;
        if dim == 0 {
            return Err(field("dimension", "must be at least 1"));
        }
        let grid = TimeGrid::new(file.time_samples).map_err(|e| field("time_samples", e))?;
        // coordinates in a file that carries its normalization are already normalized
        let (norm, apply) = match &file.normalization {
            Some(n) => {
                if n.offset.len() != dim || !(n.scale > 0.0) {
                    return Err(field(
                        "normalization",
                        "offset must have one entry per dimension and scale must be positive",
                    ));
                }
                (n.clone(), Normalization::identity(dim))
            }
            None => {
                let mut all = file
                    .mu_plus
                    .points
                    .iter()
                    .chain(&file.mu_minus.points)
                    .collect::<Vec<_>>();
                if let Some(g) = &file.graph {
                    all.extend(&g.vertices);
                }
                // wrong coordinate counts are reported with their field path below
                let fit = if all.iter().any(|x| x.len() != dim) {
                    Normalization::identity(dim)
                } else {
                    Normalization::fit(dim, all.into_iter())
                };
                (fit.clone(), fit)
            }
        };
        let mu_plus = measure("mu_plus", &file.mu_plus, dim, grid, &apply)?;
        let mu_minus = measure("mu_minus", &file.mu_minus, dim, grid, &apply)?;
        let graph = match &file.graph {
            None => None,
            Some(g) => {
                for (i, x) in g.vertices.iter().enumerate() {
                    if x.len() != dim {
                        return Err(field(
                            &format!("graph.vertices[{i}]"),
                            format!("expected {dim} coordinates"),
                        ));
                    }
                }
                for (e, &[a, b]) in g.edges.iter().enumerate() {
                    if a >= g.vertices.len() || b >= g.vertices.len() {
                        return Err(field(
                            &format!("graph.edges[{e}]"),
                            format!("vertex index out of range ({a}, {b})"),
                        ));
                    }
                }
                let graph = TransportGraph::new(
                    dim,
                    g.vertices.iter().map(|x| Point(apply.apply(x))).collect(),
                    g.edges.iter().map(|&[a, b]| (a, b)).collect(),
                    g.weights.clone(),
                    grid,
                )
                .map_err(|e| field("graph", e))?;
                Some(graph)
            }
        };
        if file.normalization.is_some() {
            let outside = mu_plus
                .points()
                .iter()
                .chain(mu_minus.points())
                .chain(graph.iter().flat_map(|g| g.vertices()))
                .find(|x| !in_unit_box(x.coords()));
            if let Some(x) = outside {
                return Err(field(
                    "normalization",
                    format!("normalized point {:?} lies outside [-1, 1)^n", x.0),
                ));
            }
        }
        let cost = file.cost.build().map_err(|e| field("cost", e))?;
        let p = file.p.value();
        if !(p > 1.0) {
            return Err(field("p", format!("exponent must be > 1 or \"inf\", got {p}")));
        }
        if !(file.lambda > 0.0 && file.lambda.is_finite()) {
            return Err(field(
                "lambda",
                format!("must be positive and finite, got {}", file.lambda),
            ));
        }
        Ok(Self {
            mu_plus,
            mu_minus,
            graph,
            cost_spec: file.cost.clone(),
            cost,
            p,
            lambda: file.lambda,
            normalization: norm,
        })
    }

    /// File form with normalized coordinates and the normalization record.
    pub fn to_file(&self) -> InstanceFile {
        let payload = |m: &AtomicMeasurePath| MeasurePayload {
            points: m.points().iter().map(|x| x.0.clone()).collect(),
            weights: m.weights().to_vec(),
        };
        InstanceFile {
            version: FORMAT_VERSION.to_string(),
            dimension: self.mu_plus.dim(),
            time_samples: self.mu_plus.grid().len(),
            mu_plus: payload(&self.mu_plus),
            mu_minus: payload(&self.mu_minus),
            graph: self.graph.as_ref().map(graph_payload),
            cost: self.cost_spec.clone(),
            p: Exponent::from_value(self.p),
            lambda: self.lambda,
            normalization: Some(self.normalization.clone()),
        }
    }

    pub fn dim(&self) -> usize {
        self.mu_plus.dim()
    }
}

pub fn graph_payload(g: &TransportGraph) -> GraphPayload {
    GraphPayload {
        vertices: g.vertices().iter().map(|x| x.0.clone()).collect(),
        edges: g.edges().iter().map(|&(a, b)| [a, b]).collect(),
        weights: g.weights().to_vec(),
    }
}

/// Parses instance JSON; syntax and schema errors carry the field path and
/// line/column.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: InstanceFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        field(
            if path.is_empty() || path == "." {
                "<root>"
            } else {
                &path
            },
            e.into_inner(),
        )
    })?;
    Instance::from_file(&file)
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).map_err(|e| field("<file>", format!("{}: {e}", path.display())))?;
    parse_instance(&text)
}

pub fn save_instance(instance: &Instance, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&instance.to_file()).map_err(|e| field("<root>", e))?;
    crate::output::write_atomic(path, text.as_bytes()).map_err(|e| field("<file>", format!("{}: {e}", path.display())))
}

/// Loads a graph from either instance-style payload JSON or the library's
/// graph JSON, normalizing with the instance transform.
pub fn parse_graph(text: &str, instance: &Instance) -> Result<TransportGraph> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let payload: GraphPayload = match serde_path_to_error::deserialize(de) {
        Ok(p) => p,
        Err(_) => {
            let de = &mut serde_json::Deserializer::from_str(text);
            let raw: branchflow::graph::RawGraph = serde_path_to_error::deserialize(de).map_err(|e| {
                let path = e.path().to_string();
                field(&format!("graph.{path}"), e.into_inner())
            })?;
            GraphPayload {
                vertices: raw.vertices,
                edges: raw.edges,
                weights: raw.weights,
            }
        }
    };
    let norm = &instance.normalization;
    TransportGraph::new(
        instance.dim(),
        payload.vertices.iter().map(|x| Point(norm.apply(x))).collect(),
        payload.edges.iter().map(|&[a, b]| (a, b)).collect(),
        payload.weights,
        instance.mu_plus.grid(),
    )
    .map_err(|e| field("graph", e))
}
