//! Command-line front end: instance I/O, subcommands and artifact export.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod export;
pub mod instance;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use branchflow::cells::DyadicLevelSpec;
use branchflow::cycles::EnergyOptions;
use branchflow::dyadic::{band_flux_bounds, band_flux_leveled, connector, recursive_flux_leveled, LeveledGraph};
use branchflow::graph::TransportGraph;
use branchflow::measures::AtomicMeasurePath;
use branchflow::optimize::{local_search, metric_probe, OptimizerConfig};
use branchflow::wasserstein::lower_bound;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use instance::{load_instance, parse_graph, CostSpec, Exponent, Instance};

#[derive(Debug, Parser)]
#[command(
    name = "branchflow",
    version,
    about = "Time-periodic branched transport: energies, constructions and distance bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an instance file and report its invariants.
    Validate(ValidateArgs),
    /// Energy report of the instance graph (or a separate graph file).
    Energy(EnergyArgs),
    /// Build a dyadic flux or connector graph.
    Construct(ConstructArgs),
    /// Bracket the distance between the two measure paths.
    Optimize(OptimizeArgs),
    /// Lower bound and the scaling-paths bound table.
    Bounds(BoundsArgs),
    /// Symmetry and triangle checks over three or more instances.
    ProbeMetric(ProbeArgs),
    /// CSV time series and SVG snapshots of a graph.
    ExportPlot(ExportArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Instance JSON file.
    pub instance: PathBuf,
    /// Write the JSON result here instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Kirchhoff tolerance for an embedded graph.
    #[arg(long, default_value_t = 1e-9)]
    pub tol_kirchhoff: f64,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Graph JSON to evaluate instead of the instance graph.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = branchflow::cycles::DEFAULT_CYCLE_CAP)]
    pub cycle_cap: usize,
    /// Continue with a greedy order when there are more cycles than the cap.
    #[arg(long)]
    pub allow_heuristic: bool,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_kirchhoff: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Construction {
    Recursive,
    Band,
    Connector,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "connector")]
    pub kind: Construction,
    /// Coarse level.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Fine level (band flux only).
    #[arg(long, default_value_t = 4)]
    pub l: u32,
    /// Measure path used by the recursive and band fluxes.
    #[arg(long, value_enum, default_value = "plus")]
    pub measure: Side,
    /// Annotate every edge with its dyadic level.
    #[arg(long)]
    pub trace_levels: bool,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_kirchhoff: f64,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Transport cost, `power:<alpha>`; defaults to the instance cost.
    #[arg(long, value_parser = CostSpec::parse)]
    pub tau: Option<CostSpec>,
    /// Time exponent, a number > 1 or `inf`.
    #[arg(long, value_parser = Exponent::parse)]
    pub p: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 5)]
    pub k_max: u32,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub steiner_budget: usize,
    #[arg(long, default_value_t = 50)]
    pub stall: usize,
    /// Allowed amount by which the lower bound may exceed the upper bound.
    #[arg(long, default_value_t = 1e-6)]
    pub tol_bracket: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_kirchhoff: f64,
}

impl SearchArgs {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            k_max: self.k_max,
            iterations: self.iters,
            seed: self.seed,
            steiner_budget: self.steiner_budget,
            stall: self.stall,
            ..OptimizerConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Also write the witness graph JSON here.
    #[arg(long)]
    pub witness: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Coarse level of the bound table.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Finest level of the bound table.
    #[arg(long, default_value_t = 4)]
    pub l_max: u32,
    /// Slack allowed between a measured band-flux mass and its bound.
    #[arg(long, default_value_t = 1e-9)]
    pub tol_bound: f64,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Instance files; their `mu_plus` paths are compared.
    #[arg(required = true, num_args = 3..)]
    pub instances: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Instance JSON file.
    pub instance: PathBuf,
    /// Graph JSON to plot instead of the instance graph.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Directory receiving the CSV and SVG files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Sample indices to draw as separate SVG frames.
    #[arg(long, value_delimiter = ',')]
    pub frames: Vec<usize>,
    /// Transport cost for the `s_tau` column; defaults to the instance cost.
    #[arg(long, value_parser = CostSpec::parse)]
    pub tau: Option<CostSpec>,
}

/// Outcome of a subcommand: the JSON document and whether an invariant was
/// violated.
struct Outcome {
    report: Value,
    violation: bool,
}

fn emit(report: &Value, output: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    match output {
        Some(path) => {
            output::write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn resolve(inst: &Instance, o: &Overrides) -> anyhow::Result<(branchflow::cost::TransportCost, f64, f64)> {
    let tau = match &o.tau {
        Some(spec) => spec.build()?,
        None => inst.cost.clone(),
    };
    Ok((tau, o.p.unwrap_or(inst.p), o.lambda.unwrap_or(inst.lambda)))
}

fn graph_of(inst: &Instance, file: Option<&Path>) -> anyhow::Result<TransportGraph> {
    match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(parse_graph(&text, inst)?)
        }
        None => inst.graph.clone().context("the instance has no graph; pass --graph"),
    }
}

fn validate(a: &ValidateArgs) -> anyhow::Result<Outcome> {
    let inst = load_instance(&a.common.instance)?;
    let admissibility = match inst.cost.check_admissible(inst.dim()) {
        Ok(adm) => to_value(&adm)?,
        Err(e) => json!({ "admissible": false, "diagnostic": e.to_string() }),
    };
    let mut violation = false;
    let graph = match &inst.graph {
        None => Value::Null,
        Some(g) => {
            let residual = g.kirchhoff_residual(&inst.mu_plus, &inst.mu_minus)?;
            violation = residual > a.tol_kirchhoff;
            json!({
                "vertices": g.vertex_count(),
                "edges": g.edge_count(),
                "kirchhoff_residual": residual,
                "never_cyclic": g.is_never_cyclic(),
            })
        }
    };
    Ok(Outcome {
        report: json!({
            "valid": !violation,
            "dimension": inst.dim(),
            "time_samples": inst.mu_plus.grid().len(),
            "atoms": [inst.mu_plus.len(), inst.mu_minus.len()],
            "normalization": inst.normalization,
            "admissibility": admissibility,
            "graph": graph,
        }),
        violation,
    })
}

fn energy(a: &EnergyArgs) -> anyhow::Result<Outcome> {
    let inst = load_instance(&a.common.instance)?;
    let g = graph_of(&inst, a.graph.as_deref())?;
    let residual = g.kirchhoff_residual(&inst.mu_plus, &inst.mu_minus)?;
    let opts = EnergyOptions {
        cycle_cap: a.cycle_cap,
        allow_heuristic: a.allow_heuristic,
    };
    let report = g.energy_with(&inst.cost, inst.p, inst.lambda, &opts)?;
    Ok(Outcome {
        report: json!({
            "energy": report,
            "kirchhoff_residual": residual,
            "normalization": inst.normalization,
        }),
        violation: residual > a.tol_kirchhoff,
    })
}

fn leveled_json(lg: &LeveledGraph, trace: bool) -> anyhow::Result<Value> {
    let mut v = to_value(&lg.graph)?;
    if trace {
        v["levels"] = to_value(&lg.levels)?;
    }
    Ok(v)
}

fn construct(a: &ConstructArgs) -> anyhow::Result<Outcome> {
    let inst = load_instance(&a.common.instance)?;
    let mu = match a.measure {
        Side::Plus => &inst.mu_plus,
        Side::Minus => &inst.mu_minus,
    };
    let spec = DyadicLevelSpec::standard(inst.dim());
    let (graph, source, target): (LeveledGraph, AtomicMeasurePath, AtomicMeasurePath) = match a.kind {
        Construction::Recursive => {
            let root = AtomicMeasurePath::dirac(spec.root.clone(), mu.grid());
            (
                recursive_flux_leveled(mu, a.k, &spec, true)?,
                root,
                mu.dyadic_project(a.k)?,
            )
        }
        Construction::Band => (
            band_flux_leveled(mu, a.k, a.l, &spec)?,
            mu.dyadic_project(a.l)?,
            mu.dyadic_project(a.k)?,
        ),
        Construction::Connector => {
            let c = connector(&inst.mu_plus, &inst.mu_minus, a.k)?;
            (c.graph, c.plus, c.minus)
        }
    };
    let residual = graph.graph.kirchhoff_residual(&source, &target)?;
    let never_cyclic = graph.graph.is_never_cyclic();
    Ok(Outcome {
        report: json!({
            "graph": leveled_json(&graph, a.trace_levels)?,
            "source": source,
            "target": target,
            "kirchhoff_residual": residual,
            "never_cyclic": never_cyclic,
            "normalization": inst.normalization,
        }),
        violation: residual > a.tol_kirchhoff || !never_cyclic,
    })
}

fn check_report(
    r: &branchflow::optimize::DistanceReport,
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    s: &SearchArgs,
) -> anyhow::Result<bool> {
    let residual = r.witness.kirchhoff_residual(plus, minus)?;
    Ok(r.lower > r.upper + s.tol_bracket || residual > s.tol_kirchhoff || !r.witness.is_never_cyclic())
}

fn optimize(a: &OptimizeArgs) -> anyhow::Result<Outcome> {
    let inst = load_instance(&a.common.instance)?;
    let (tau, p, lambda) = resolve(&inst, &a.overrides)?;
    let r = local_search(&inst.mu_plus, &inst.mu_minus, &tau, p, lambda, &a.search.config())?;
    let violation = check_report(&r, &inst.mu_plus, &inst.mu_minus, &a.search)?;
    if let Some(path) = &a.witness {
        emit(&to_value(&r.witness)?, Some(path))?;
    }
    let mut report = to_value(&r)?;
    report["normalization"] = to_value(&inst.normalization)?;
    Ok(Outcome { report, violation })
}

fn bounds(a: &BoundsArgs) -> anyhow::Result<Outcome> {
    let inst = load_instance(&a.common.instance)?;
    let (tau, p, lambda) = resolve(&inst, &a.overrides)?;
    let lower = lower_bound(&inst.mu_plus, &inst.mu_minus, &tau, p, lambda)?;
    let spec = DyadicLevelSpec::standard(inst.dim());
    let mut table = Vec::new();
    let mut violation = false;
    match tau.witness() {
        None => {}
        Some(beta) => {
            for (name, mu) in [("mu_plus", &inst.mu_plus), ("mu_minus", &inst.mu_minus)] {
                for l in a.k + 1..=a.l_max {
                    let b = band_flux_bounds(a.k, l, inst.dim(), beta, mu, p)?;
                    let g = band_flux_leveled(mu, a.k, l, &spec)?.graph;
                    let mass = g.m_tau_p(&tau, p)?;
                    let derivative = g.derivative_lp_norm(p)?;
                    let within = mass <= b.mass + a.tol_bound && derivative <= b.derivative + a.tol_bound;
                    violation |= !within;
                    table.push(json!({
                        "measure": name,
                        "k": a.k,
                        "l": l,
                        "mass_bound": b.mass,
                        "derivative_bound": b.derivative,
                        "mass": mass,
                        "derivative": derivative,
                        "within": within,
                    }));
                }
            }
        }
    }
    Ok(Outcome {
        report: json!({
            "lower_bound": lower.value,
            "lid1_term": lower.lid1_term,
            "derivative_lid1_term": lower.derivative_lid1_term,
            "rho": lower.rho,
            "rho_differs_from_one": lower.rho_differs_from_one,
            "scaling_paths": table,
            "normalization": inst.normalization,
        }),
        violation,
    })
}

fn probe(a: &ProbeArgs) -> anyhow::Result<Outcome> {
    let loaded = a
        .instances
        .iter()
        .map(|p| load_instance(p).with_context(|| format!("loading {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let (tau, p, lambda) = resolve(&loaded[0], &a.overrides)?;
    let paths: Vec<AtomicMeasurePath> = loaded.iter().map(|i| i.mu_plus.clone()).collect();
    let r = metric_probe(&paths, &tau, p, lambda, &a.search.config())?;
    let violation =
        !r.all_symmetric || r.flagged_triangles > 0 || r.pairs.iter().any(|b| b.lower > b.upper + a.search.tol_bracket);
    Ok(Outcome {
        report: to_value(&r)?,
        violation,
    })
}

fn export_plot(a: &ExportArgs) -> anyhow::Result<Outcome> {
    let inst = load_instance(&a.instance)?;
    let g = graph_of(&inst, a.graph.as_deref())?;
    let tau = match &a.tau {
        Some(spec) => spec.build()?,
        None => inst.cost.clone(),
    };
    let n = g.grid().len();
    if let Some(&bad) = a.frames.iter().find(|&&j| j >= n) {
        bail!("frame {bad} is out of range for {n} samples");
    }
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let write = |name: &str, bytes: &[u8]| -> anyhow::Result<PathBuf> {
        let path = a.out_dir.join(name);
        output::write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    };
    let mut files = vec![
        write(
            "samples.csv",
            &export::sample_csv(&g, &tau, &inst.mu_plus, &inst.mu_minus)?,
        )?,
        write("edges.csv", &export::edge_csv(&g, &tau))?,
        write(
            "graph.svg",
            export::svg(
                &g,
                &export::mean_weights(&g),
                &inst.mu_plus,
                &inst.mu_minus,
                "time-averaged weights",
            )
            .as_bytes(),
        )?,
    ];
    for &j in &a.frames {
        let title = format!("t = {}", g.grid().time(j));
        let svg = export::svg(
            &g,
            &export::sample_weights(&g, j),
            &inst.mu_plus,
            &inst.mu_minus,
            &title,
        );
        files.push(write(&format!("graph_t{j}.svg"), svg.as_bytes())?);
    }
    Ok(Outcome {
        report: json!({ "files": files, "samples": n, "edges": g.edge_count() }),
        violation: false,
    })
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on an error or invariant violation, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (outcome, output) = match &cli.command {
        Command::Validate(a) => (validate(a), a.common.output.as_deref()),
        Command::Energy(a) => (energy(a), a.common.output.as_deref()),
        Command::Construct(a) => (construct(a), a.common.output.as_deref()),
        Command::Optimize(a) => (optimize(a), a.common.output.as_deref()),
        Command::Bounds(a) => (bounds(a), a.common.output.as_deref()),
        Command::ProbeMetric(a) => (probe(a), a.output.as_deref()),
        Command::ExportPlot(a) => (export_plot(a), None),
    };
    match outcome.and_then(|o| emit(&o.report, output).map(|_| o.violation)) {
        Ok(false) => 0,
        Ok(true) => {
            eprintln!("error: invariant violation (see report)");
            1
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
