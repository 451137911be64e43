//! Static plot emission: trajectory overlays and policy-comparison bars.
//!
//! Plots are written as standalone SVG files; the underlying data is always
//! written as CSV next to the image so plots can be regenerated or redrawn
//! by external tooling. Output bytes are a pure function of the inputs.

use crate::cases::CaseSpec;
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::eval::{BenchmarkReport, EpisodeRecord};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const CELL: f64 = 14.0;
const MARGIN: f64 = 30.0;

fn svg_header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" \
         fill=\"white\"/>\n"
    )
}

/// Detection likelihood shading for a trajectory plot: probability of a
/// nonzero hit in each cell given the recorded source position.
fn detection_shade(case: &CaseSpec, record: &EpisodeRecord) -> Vec<(usize, usize, f64)> {
    let mut shades = Vec::new();
    for y in 0..case.grid.n_y {
        for x in 0..case.grid.n_x {
            if (x, y) == (record.source.x, record.source.y) {
                continue;
            }
            let rel = crate::env::RelState::new(
                x as isize - record.source.x as isize,
                y as isize - record.source.y as isize,
            );
            if let Ok(probs) = crate::env::hit_distribution(rel, &case.params) {
                let p_detect = 1.0 - probs[0];
                if p_detect > 1e-3 {
                    shades.push((x, y, p_detect.min(1.0)));
                }
            }
        }
    }
    shades
}

/// Renders a search trajectory: shaded detection likelihood, the path, the
/// starting circle, the source cross, and a star per nonzero-hit step.
pub fn trajectory_svg(record: &EpisodeRecord, case: Option<&CaseSpec>) -> String {
    let (n_x, n_y) = match case {
        Some(c) => (c.grid.n_x, c.grid.n_y),
        None => {
            let max_x = record.steps.iter().map(|s| s.pos.x).max().unwrap_or(0);
            let max_y = record.steps.iter().map(|s| s.pos.y).max().unwrap_or(0);
            (
                max_x.max(record.source.x).max(record.start.x) + 1,
                max_y.max(record.source.y).max(record.start.y) + 1,
            )
        }
    };
    let width = MARGIN * 2.0 + CELL * n_x as f64;
    let height = MARGIN * 2.0 + CELL * n_y as f64;
    // y axis points up: cell (x, y) renders at row (n_y - 1 - y).
    let px = |x: usize| MARGIN + CELL * (x as f64 + 0.5);
    let py = |y: usize| MARGIN + CELL * ((n_y - 1 - y) as f64 + 0.5);
    let mut svg = svg_header(width, height);
    if let Some(c) = case {
        for (x, y, p) in detection_shade(c, record) {
            let alpha = 0.12 + 0.55 * p;
            let _ = writeln!(
                svg,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"orange\" fill-opacity=\"{alpha:.3}\"/>",
                px(x) - CELL / 2.0,
                py(y) - CELL / 2.0,
            );
        }
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
         stroke=\"black\"/>",
        CELL * n_x as f64,
        CELL * n_y as f64
    );
    // Path polyline from the start through every visited cell.
    let mut points = format!("{:.1},{:.1}", px(record.start.x), py(record.start.y));
    for s in &record.steps {
        let _ = write!(points, " {:.1},{:.1}", px(s.pos.x), py(s.pos.y));
    }
    let _ = writeln!(
        svg,
        "<polyline points=\"{points}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>"
    );
    // Start circle.
    let _ = writeln!(
        svg,
        "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"{:.1}\" fill=\"none\" stroke=\"black\" \
         stroke-width=\"2\"/>",
        px(record.start.x),
        py(record.start.y),
        CELL * 0.45
    );
    // Source cross.
    let (sx, sy) = (px(record.source.x), py(record.source.y));
    let r = CELL * 0.45;
    let _ = writeln!(
        svg,
        "<path d=\"M {:.1} {:.1} L {:.1} {:.1} M {:.1} {:.1} L {:.1} {:.1}\" stroke=\"black\" \
         stroke-width=\"2\"/>",
        sx - r,
        sy - r,
        sx + r,
        sy + r,
        sx - r,
        sy + r,
        sx + r,
        sy - r
    );
    // Stars at detection steps.
    for s in &record.steps {
        if let Observation::Hits(h) = s.observation {
            if h > 0 {
                let (cx, cy) = (px(s.pos.x), py(s.pos.y));
                let _ = writeln!(
                    svg,
                    "<text x=\"{cx:.1}\" y=\"{:.1}\" font-size=\"{:.0}\" text-anchor=\"middle\" \
                     fill=\"crimson\">*</text>",
                    cy + CELL * 0.3,
                    CELL * 1.2
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Trajectory plot data: one CSV row per step.
pub fn trajectory_csv(record: &EpisodeRecord) -> String {
    let mut out = String::from("t,x,y,action,h\n");
    for s in &record.steps {
        let h = match s.observation {
            Observation::Terminal => "omega".to_string(),
            Observation::Hits(h) => h.to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.t,
            s.pos.x,
            s.pos.y,
            s.action.name(),
            h
        );
    }
    out
}

fn failure_color(pr_failure: f64) -> String {
    // Green for negligible failure probability, through yellow to red.
    let t = (pr_failure.max(1e-6).log10() + 6.0) / 6.0;
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t) as u8;
    let g = (200.0 * (1.0 - t) + 40.0) as u8;
    format!("rgb({r},{g},60)")
}

/// Renders a bar chart comparing mean search times, bars colored by the
/// probability of failure. Bar order follows report row order.
pub fn report_svg(reports: &[BenchmarkReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Empty("benchmark report".into()));
    }
    let bar_w = 60.0;
    let gap = 30.0;
    let plot_h = 260.0;
    let width = MARGIN * 2.0 + reports.len() as f64 * (bar_w + gap);
    let height = plot_h + 2.0 * MARGIN + 40.0;
    let max_t = reports
        .iter()
        .filter_map(|r| r.mean_t)
        .fold(1.0f64, f64::max);
    let mut svg = svg_header(width, height);
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        MARGIN + plot_h,
        width - MARGIN,
        MARGIN + plot_h
    );
    for (i, r) in reports.iter().enumerate() {
        let x = MARGIN + gap / 2.0 + i as f64 * (bar_w + gap);
        let label = format!("{}:{}", r.case, r.policy);
        match r.mean_t {
            Some(mean) => {
                let h = plot_h * mean / max_t;
                let _ = writeln!(
                    svg,
                    "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{bar_w}\" height=\"{h:.1}\" \
                     fill=\"{}\" stroke=\"black\"/>",
                    MARGIN + plot_h - h,
                    failure_color(r.pr_failure)
                );
                let _ = writeln!(
                    svg,
                    "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" \
                     text-anchor=\"middle\">{mean:.1}</text>",
                    x + bar_w / 2.0,
                    MARGIN + plot_h - h - 5.0
                );
            }
            None => {
                let _ = writeln!(
                    svg,
                    "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" \
                     text-anchor=\"middle\">all failed</text>",
                    x + bar_w / 2.0,
                    MARGIN + plot_h - 5.0
                );
            }
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{label}</text>",
            x + bar_w / 2.0,
            MARGIN + plot_h + 16.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes the trajectory plot and its data CSV; returns the written paths.
pub fn emit_trajectory_plot(
    record: &EpisodeRecord,
    case: Option<&CaseSpec>,
    out_dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    if record.steps.is_empty() {
        return Err(Error::Empty("trajectory has no steps".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let svg_path = out_dir.join(format!("{stem}.svg"));
    let csv_path = out_dir.join(format!("{stem}.csv"));
    std::fs::write(&svg_path, trajectory_svg(record, case))?;
    std::fs::write(&csv_path, trajectory_csv(record))?;
    Ok(vec![svg_path, csv_path])
}

/// Writes the comparison bars and their data CSV; returns the written paths.
pub fn emit_report_plot(
    reports: &[BenchmarkReport],
    out_dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    let svg = report_svg(reports)?; // errors before any file is written
    std::fs::create_dir_all(out_dir)?;
    let svg_path = out_dir.join(format!("{stem}.svg"));
    let csv_path = out_dir.join(format!("{stem}.csv"));
    std::fs::write(&svg_path, svg)?;
    std::fs::write(&csv_path, BenchmarkReport::csv_document(reports))?;
    Ok(vec![svg_path, csv_path])
}
