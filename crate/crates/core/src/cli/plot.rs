//! Static SVG line plots of a trace, one file per state component.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trace_csv::TraceTable;
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PlotStyle {
    /// Truth dotted, zonotope bounds solid, peak-to-peak bounds dashed.
    #[default]
    Bounds,
    /// Truth dotted, fused bounds solid.
    Fused,
}

struct Series<'a> {
    label: &'a str,
    values: Vec<f64>,
    dash: Option<&'a str>,
    color: &'a str,
}

/// Renders component `i` (0-based) as an SVG document.
pub fn render_component(table: &TraceTable, i: usize, style: PlotStyle) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::InvalidArgument("trace has no data rows".into()));
    }
    if i >= table.n {
        return Err(Error::InvalidArgument(format!("component {} out of range 1..={}", i + 1, table.n)));
    }
    let col = |f: fn(&super::trace_csv::TraceRow) -> &Vec<f64>| table.rows.iter().map(|r| f(r)[i]).collect::<Vec<_>>();
    let mut series =
        vec![Series { label: "true state", values: col(|r| &r.x_true), dash: Some("2,3"), color: "#000000" }];
    match style {
        PlotStyle::Bounds => {
            series.push(Series { label: "zonotope lower", values: col(|r| &r.lo_z), dash: None, color: "#1f5fbf" });
            series.push(Series { label: "zonotope upper", values: col(|r| &r.hi_z), dash: None, color: "#1f5fbf" });
            series.push(Series {
                label: "peak-to-peak lower",
                values: col(|r| &r.lo_p),
                dash: Some("8,4"),
                color: "#c0392b",
            });
            series.push(Series {
                label: "peak-to-peak upper",
                values: col(|r| &r.hi_p),
                dash: Some("8,4"),
                color: "#c0392b",
            });
        }
        PlotStyle::Fused => {
            series.push(Series { label: "fused lower", values: col(|r| &r.lo), dash: None, color: "#1f5fbf" });
            series.push(Series { label: "fused upper", values: col(|r| &r.hi), dash: None, color: "#1f5fbf" });
        }
    }

    let ks: Vec<f64> = table.rows.iter().map(|r| r.k as f64).collect();
    let (k0, k1) = (ks[0], *ks.last().expect("non-empty"));
    let finite = series.iter().flat_map(|s| s.values.iter().copied()).filter(|v| v.is_finite());
    let (mut y0, mut y1) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !y0.is_finite() {
        (y0, y1) = (-1.0, 1.0);
    }
    let pad = if y1 > y0 { 0.05 * (y1 - y0) } else { 1.0 };
    (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |k: f64| MARGIN + if k1 > k0 { (k - k0) / (k1 - k0) } else { 0.5 } * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#888888"/>"##,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">k</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(svg, r#"<text x="15" y="{}" font-size="12">x{}</text>"#, HEIGHT / 2.0, i + 1);
    for (v, anchor_y) in [(y0, HEIGHT - MARGIN), (y1, MARGIN)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{anchor_y:.1}" font-size="10" text-anchor="end">{v:.3}</text>"#,
            MARGIN - 4.0
        );
    }
    for (k, anchor_x) in [(k0, MARGIN), (k1, WIDTH - MARGIN)] {
        let _ = writeln!(
            svg,
            r#"<text x="{anchor_x:.1}" y="{}" font-size="10" text-anchor="middle">{k}</text>"#,
            HEIGHT - MARGIN + 14.0
        );
    }
    for (si, s) in series.iter().enumerate() {
        let points: Vec<String> = ks
            .iter()
            .zip(&s.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(&k, &v)| format!("{:.2},{:.2}", sx(k), sy(v)))
            .collect();
        let dash = s.dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2"{dash} points="{}"><title>{}</title></polyline>"#,
            s.color,
            points.join(" "),
            s.label
        );
        let ly = MARGIN + 12.0 + 14.0 * si as f64;
        let lx = WIDTH - MARGIN - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}"{dash}/><text x="{}" y="{}" font-size="10">{}</text>"#,
            lx + 20.0,
            s.color,
            lx + 25.0,
            ly + 3.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes `<stem>_x<i>.svg` (or `<stem>_fused_x<i>.svg`) for every component.
/// Nothing is written when the trace is empty.
pub fn write_plots(table: &TraceTable, out_dir: &Path, stem: &str, style: PlotStyle) -> Result<Vec<PathBuf>> {
    let docs = (0..table.n).map(|i| render_component(table, i, style)).collect::<Result<Vec<_>>>()?;
    if docs.is_empty() {
        return Err(Error::InvalidArgument("trace has no state components".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let tag = match style {
        PlotStyle::Bounds => "",
        PlotStyle::Fused => "_fused",
    };
    docs.into_iter()
        .enumerate()
        .map(|(i, doc)| {
            let path = out_dir.join(format!("{stem}{tag}_x{}.svg", i + 1));
            std::fs::write(&path, doc)?;
            Ok(path)
        })
        .collect()
}
