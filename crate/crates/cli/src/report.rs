//! `report`: CSV tracks and static SVG plots of a tracking run.

use std::fmt::Write as _;
use std::path::Path;

use manipulant_core::control::{PriorityMode, StepRecord};
use nalgebra::{Matrix2, SymmetricEigen};
use serde_json::Value;

use crate::config::PipelineConfig;
use crate::provenance::{digest_file, write_file, Provenance};
use crate::CliError;

struct Run {
    header: Option<Value>,
    records: Vec<StepRecord>,
}

fn read_run(path: &Path) -> Result<Run, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    let mut header = None;
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| CliError::user(format!("{} line {}: {e}", path.display(), n + 1));
        let v: Value = serde_json::from_str(line).map_err(bad)?;
        if v.get("provenance").is_some() {
            header = Some(v);
        } else {
            records.push(serde_json::from_value(v).map_err(bad)?);
        }
    }
    if records.is_empty() {
        return Err(CliError::user(format!("{}: no steps", path.display())));
    }
    Ok(Run { header, records })
}

/// Side of the matrix whose upper triangle has `len` entries.
fn side(len: usize) -> Option<usize> {
    (1..=6).find(|d| d * (d + 1) / 2 == len)
}

fn entry(upper: &[f64], d: usize, i: usize, j: usize) -> f64 {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row r of the upper triangle holds d - r entries
    upper[i * d - i * i.saturating_sub(1) / 2 + (j - i)]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(width: u32, height: u32, prov: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n<metadata>{}</metadata>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        escape(prov)
    )
}

fn tracks_csv(run: &Run, prov: &str) -> String {
    let first = &run.records[0];
    let mut out = format!("# provenance: {prov}\nt,mode,spd_distance,pos_error");
    for i in 0..first.x.len() {
        write!(out, ",x{i}").unwrap();
    }
    for i in 0..first.q.len() {
        write!(out, ",q{i}").unwrap();
    }
    out.push('\n');
    for r in &run.records {
        let mode = match r.mode {
            PriorityMode::ManipulabilityFirst => "manipulability_first",
            PriorityMode::PositionFirst => "position_first",
        };
        write!(out, "{},{mode},{},{}", r.t, r.spd_distance, r.pos_error).unwrap();
        for v in r.x.iter().chain(&r.q) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn polyline(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    for (x, y) in points {
        write!(s, "{x:.2},{y:.2} ").unwrap();
    }
    s.trim_end().to_string()
}

/// Panel label, value and stroke colour.
type Series = (&'static str, fn(&StepRecord) -> f64, &'static str);

fn errors_svg(run: &Run, cfg: &PipelineConfig, prov: &str) -> String {
    let (w, h) = (cfg.report.width as f64, cfg.report.height as f64);
    let mut svg = svg_open(cfg.report.width, cfg.report.height, prov);
    let t0 = run.records[0].t;
    let t1 = run.records.last().unwrap().t.max(t0 + 1e-9);
    let (left, right) = (60.0, w - 20.0);
    let panel_h = (h - 60.0) / 2.0;
    let sx = |t: f64| left + (t - t0) / (t1 - t0) * (right - left);
    let series: [Series; 2] = [
        ("manipulability distance", |r| r.spd_distance, "#1f5fbf"),
        ("position error [m]", |r| r.pos_error, "#c0392b"),
    ];
    for (k, (label, get, color)) in series.iter().enumerate() {
        let top = 20.0 + k as f64 * (panel_h + 20.0);
        let bottom = top + panel_h;
        let max = run.records.iter().map(get).fold(0.0, f64::max).max(1e-12);
        let sy = |v: f64| bottom - v / max * (bottom - top);
        writeln!(
            svg,
            "<rect x=\"{left}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{panel_h:.2}\" fill=\"none\" stroke=\"#888\"/>",
            right - left
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\">{label}</text>",
            left + 6.0,
            top + 14.0
        )
        .unwrap();
        writeln!(svg, "<text x=\"4\" y=\"{:.2}\">{max:.3e}</text>", top + 10.0).unwrap();
        writeln!(svg, "<text x=\"4\" y=\"{bottom:.2}\">0</text>").unwrap();
        writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            polyline(run.records.iter().map(|r| (sx(r.t), sy(get(r)))))
        )
        .unwrap();
        for pair in run.records.windows(2) {
            if pair[0].mode != pair[1].mode {
                let x = sx(pair[1].t);
                writeln!(
                    svg,
                    "<line x1=\"{x:.2}\" y1=\"{top:.2}\" x2=\"{x:.2}\" y2=\"{bottom:.2}\" stroke=\"#555\" stroke-dasharray=\"4 3\"/>"
                )
                .unwrap();
            }
        }
    }
    writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">t [s]</text>",
        (left + right) / 2.0,
        h - 8.0
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

/// Semi-axes and orientation (degrees) of the ellipse of a 2x2 SPD block.
fn ellipse(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let e = SymmetricEigen::new(Matrix2::new(a, b, b, c));
    let (i, j) = if e.eigenvalues[0] >= e.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let v = e.eigenvectors.column(i);
    let angle = v[1].atan2(v[0]).to_degrees();
    (
        e.eigenvalues[i].max(0.0).sqrt(),
        e.eigenvalues[j].max(0.0).sqrt(),
        angle,
    )
}

fn ellipses_svg(run: &Run, cfg: &PipelineConfig, prov: &str) -> Result<String, CliError> {
    let d = side(run.records[0].m.len()).ok_or_else(|| CliError::user("run records carry malformed matrices"))?;
    let planes: Vec<(usize, usize, &str)> = match d {
        2 => vec![(0, 1, "xy")],
        _ => vec![(0, 1, "xy"), (0, 2, "xz"), (1, 2, "yz")],
    };
    let n = run.records.len();
    let snaps = cfg.report.snapshots.clamp(1, n);
    let picks: Vec<usize> = (0..snaps)
        .map(|k| if snaps == 1 { n - 1 } else { k * (n - 1) / (snaps - 1) })
        .collect();
    // one scale for every ellipse so sizes are comparable
    let mut largest: f64 = 1e-12;
    for &i in &picks {
        for m in [&run.records[i].m, &run.records[i].m_target] {
            for &(p, q, _) in &planes {
                let (a, _, _) = ellipse(entry(m, d, p, p), entry(m, d, p, q), entry(m, d, q, q));
                largest = largest.max(a);
            }
        }
    }
    let (w, h) = (cfg.report.width as f64, cfg.report.height as f64);
    let cell_w = (w - 50.0) / snaps as f64;
    let cell_h = (h - 30.0) / planes.len() as f64;
    let radius = 0.45 * cell_w.min(cell_h) / largest;
    let mut svg = svg_open(cfg.report.width, cfg.report.height, prov);
    for (row, &(p, q, name)) in planes.iter().enumerate() {
        let cy = 10.0 + (row as f64 + 0.5) * cell_h;
        writeln!(svg, "<text x=\"4\" y=\"{cy:.2}\">{name}</text>").unwrap();
        for (col, &i) in picks.iter().enumerate() {
            let cx = 50.0 + (col as f64 + 0.5) * cell_w;
            let r = &run.records[i];
            if row == 0 {
                writeln!(
                    svg,
                    "<text x=\"{cx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">t = {:.2}</text>",
                    h - 8.0,
                    r.t
                )
                .unwrap();
            }
            for (m, style) in [
                (&r.m_target, "stroke=\"#c0392b\" stroke-dasharray=\"5 3\""),
                (&r.m, "stroke=\"#1f5fbf\""),
            ] {
                let (a, b, angle) = ellipse(entry(m, d, p, p), entry(m, d, p, q), entry(m, d, q, q));
                // SVG y grows downwards
                writeln!(
                    svg,
                    "<ellipse cx=\"{cx:.2}\" cy=\"{cy:.2}\" rx=\"{:.2}\" ry=\"{:.2}\" transform=\"rotate({:.2} {cx:.2} {cy:.2})\" fill=\"none\" {style} stroke-width=\"1.5\"/>",
                    a * radius,
                    b * radius,
                    -angle
                )
                .unwrap();
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn report(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    if cfg.report.width < 100 || cfg.report.height < 100 {
        return Err(CliError::user("report width and height must be at least 100"));
    }
    let run = read_run(input)?;
    let mut prov = Provenance::new("report", cfg, vec![digest_file(input)?]).to_json();
    if let Some(source) = run.header.as_ref().and_then(|h| h.get("provenance")) {
        prov["source"] = source.clone();
    }
    let prov = serde_json::to_string(&prov).expect("provenance serializes");
    write_file(&out.join("tracks.csv"), tracks_csv(&run, &prov).as_bytes())?;
    write_file(&out.join("errors.svg"), errors_svg(&run, cfg, &prov).as_bytes())?;
    write_file(&out.join("ellipses.svg"), ellipses_svg(&run, cfg, &prov)?.as_bytes())?;
    Ok(())
}
