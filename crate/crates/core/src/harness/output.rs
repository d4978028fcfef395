use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::RunRecord;

const CSV_HEADER: &str = "t,r,y_true,y_measured,u";

/// CSV text with 12 significant digits per value.
pub fn render_csv(record: &RunRecord) -> String {
    let mut out = String::with_capacity(64 * (record.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for k in 0..record.len() {
        let _ = writeln!(
            out,
            "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
            record.t[k], record.r[k], record.y_true[k], record.y_measured[k], record.u[k]
        );
    }
    out
}

pub fn emit_csv(record: &RunRecord, path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(record)).map_err(|e| Error::io(path, e))
}

/// Parses text written by [`render_csv`] back into the five sequences.
pub fn parse_csv(text: &str) -> Result<RunRecord> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header `{CSV_HEADER}`"),
        });
    }
    let mut rec = RunRecord::default();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
        if values.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected 5 columns, found {}", values.len()),
            });
        }
        rec.t.push(values[0]);
        rec.r.push(values[1]);
        rec.y_true.push(values[2]);
        rec.y_measured.push(values[3]);
        rec.u.push(values[4]);
        rec.warnings.push(false);
    }
    Ok(rec)
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

/// Standalone SVG of the reference and the true output against time.
pub fn render_svg(record: &RunRecord, title: &str) -> String {
    let (t0, t1) = bounds(&record.t);
    let (mut lo, mut hi) = bounds(record.r.iter().chain(&record.y_true).copied().collect::<Vec<_>>().as_slice());
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    let x = |t: f64| MARGIN + (t - t0) / (t1 - t0) * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);
    let polyline = |values: &[f64]| {
        let mut pts = String::new();
        for (t, v) in record.t.iter().zip(values) {
            let _ = write!(pts, "{:.2},{:.2} ", x(*t), y(*v));
        }
        pts.trim_end().to_string()
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(s, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"##);
    let _ = writeln!(s, r##"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"##, WIDTH / 2.0, escape(title));
    // axes
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r##"<g stroke="black" stroke-width="1"><line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}"/></g>"##);
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (tv, vv) = (t0 + f * (t1 - t0), lo + f * (hi - lo));
        let _ = writeln!(s, r##"<text x="{:.2}" y="{}" text-anchor="middle">{:.4}</text>"##, x(tv), bottom + 16.0, trim(tv));
        let _ = writeln!(s, r##"<text x="{}" y="{:.2}" text-anchor="end">{:.4}</text>"##, left - 6.0, y(vv) + 4.0, trim(vv));
    }
    let _ = writeln!(s, r##"<text x="{}" y="{}" text-anchor="middle">time (s)</text>"##, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(s, r##"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">steam flow</text>"##, HEIGHT / 2.0, HEIGHT / 2.0);
    let _ = writeln!(
        s,
        r##"<polyline id="reference" fill="none" stroke="#1f77b4" stroke-width="1.5" stroke-dasharray="6 4" points="{}"/>"##,
        polyline(&record.r)
    );
    let _ = writeln!(
        s,
        r##"<polyline id="output" fill="none" stroke="#d62728" stroke-width="1.5" points="{}"/>"##,
        polyline(&record.y_true)
    );
    // legend
    let lx = right - 150.0;
    let _ = writeln!(s, r##"<g id="legend"><line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="#1f77b4" stroke-width="1.5" stroke-dasharray="6 4"/><text x="{}" y="{}">reference r</text>"##, top + 8.0, lx + 24.0, top + 8.0, lx + 30.0, top + 12.0);
    let _ = writeln!(s, r##"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="#d62728" stroke-width="1.5"/><text x="{}" y="{}">output y</text></g>"##, top + 26.0, lx + 24.0, top + 26.0, lx + 30.0, top + 30.0);
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(record: &RunRecord, path: &Path) -> Result<()> {
    let title = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    std::fs::write(path, render_svg(record, title)).map_err(|e| Error::io(path, e))
}

/// Finite min/max with a non-degenerate span.
fn bounds(values: &[f64]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn trim(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
