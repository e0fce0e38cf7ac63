//! CSV time series and SVG snapshots of a transport graph.

use std::fmt::Write as _;

use branchflow::cost::TransportCost;
use branchflow::error::Result;
use branchflow::graph::TransportGraph;
use branchflow::measures::AtomicMeasurePath;
use branchflow::wasserstein::lid1_series;

/// Column order of the per-edge CSV.
pub const EDGE_HEADER: [&str; 5] = ["t", "edge_id", "weight", "tv_norm", "s_tau"];
/// Column order of the per-sample CSV.
pub const SAMPLE_HEADER: [&str; 6] = ["t", "s_tau", "tv_norm", "derivative_tv", "lid1", "lid1_derivative"];

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// One row per (sample, edge).
pub fn edge_csv(g: &TransportGraph, tau: &TransportCost) -> Vec<u8> {
    let tv = g.tv_norms();
    let s = g.s_tau(tau);
    let grid = g.grid();
    let rows = (0..grid.len()).flat_map(|j| {
        let (tv, s) = (tv[j], s[j]);
        (0..g.edge_count()).map(move |e| {
            vec![
                grid.time(j).to_string(),
                e.to_string(),
                g.weights()[e][j].to_string(),
                tv.to_string(),
                s.to_string(),
            ]
        })
    });
    csv_bytes(&EDGE_HEADER, rows)
}

/// One row per time sample.
pub fn sample_csv(
    g: &TransportGraph,
    tau: &TransportCost,
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
) -> Result<Vec<u8>> {
    let tv = g.tv_norms();
    let s = g.s_tau(tau);
    let dtv = g.derivative_graph().magnitudes();
    let lid = lid1_series(plus, minus)?;
    let dlid = lid1_series(&plus.derivative(), &minus.derivative())?;
    let grid = g.grid();
    let rows = (0..grid.len()).map(|j| {
        [grid.time(j), s[j], tv[j], dtv[j], lid[j], dlid[j]]
            .iter()
            .map(f64::to_string)
            .collect()
    });
    Ok(csv_bytes(&SAMPLE_HEADER, rows))
}

const CANVAS: f64 = 480.0;
const MARGIN: f64 = 20.0;

/// Edges drawn in the first two coordinates (`y = 0` in one dimension) with
/// stroke width proportional to `weight[e]`; terminals of `plus` in blue,
/// of `minus` in red.
pub fn svg(
    g: &TransportGraph,
    weight: &[f64],
    plus: &AtomicMeasurePath,
    minus: &AtomicMeasurePath,
    title: &str,
) -> String {
    let xy = |c: &[f64]| (c[0], c.get(1).copied().unwrap_or(0.0));
    let all: Vec<(f64, f64)> = g
        .vertices()
        .iter()
        .chain(plus.points())
        .chain(minus.points())
        .map(|p| xy(p.coords()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let map = |(x, y): (f64, f64)| {
        let s = (CANVAS - 2.0 * MARGIN) / span;
        (MARGIN + (x - x0) * s, CANVAS - MARGIN - (y - y0) * s)
    };
    let heaviest = weight.iter().copied().fold(0.0, f64::max);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let _ = writeln!(out, "<title>{title}</title>");
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if weight[e] <= 0.0 {
            continue;
        }
        let (ax, ay) = map(xy(g.vertices()[a].coords()));
        let (bx, by) = map(xy(g.vertices()[b].coords()));
        let width = 0.5 + 7.5 * weight[e] / heaviest;
        let _ = writeln!(
            out,
            r#"<line x1="{ax:.3}" y1="{ay:.3}" x2="{bx:.3}" y2="{by:.3}" stroke="black" stroke-width="{width:.3}" stroke-linecap="round"/>"#
        );
    }
    for (m, colour) in [(plus, "#1f5fbf"), (minus, "#bf1f1f")] {
        for x in m.points() {
            let (cx, cy) = map(xy(x.coords()));
            let _ = writeln!(out, r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="4" fill="{colour}"/>"#);
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Time average of each edge weight.
pub fn mean_weights(g: &TransportGraph) -> Vec<f64> {
    g.weights()
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect()
}

pub fn sample_weights(g: &TransportGraph, j: usize) -> Vec<f64> {
    g.weights().iter().map(|row| row[j]).collect()
}
