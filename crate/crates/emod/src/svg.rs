//! Plain SVG bar charts for the report.

use std::fmt::Write as _;

use crate::formats::{Layout, Result};
use crate::pipeline::Report;

const ROW: f64 = 18.0;
const LABEL: f64 = 190.0;
const BAR: f64 = 420.0;
const COLORS: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Horizontal bars, one per `(label, value, note)`, scaled to the largest value.
pub fn bar_chart(title: &str, unit: &str, rows: &[(String, f64, String)]) -> String {
    let height = 40.0 + ROW * rows.len() as f64 + 10.0;
    let width = LABEL + BAR + 140.0;
    let max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="8" y="20" font-size="14">{} ({})</text>"#, escape(title), escape(unit));
    for (i, (label, v, note)) in rows.iter().enumerate() {
        let y = 32.0 + ROW * i as f64;
        let w = if max > 0.0 { BAR * v / max } else { 0.0 };
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LABEL - 6.0, y + 12.0, escape(label));
        let _ = writeln!(s, r#"<rect x="{LABEL}" y="{y}" width="{w:.2}" height="{}" fill="{}"/>"#, ROW - 4.0, COLORS[0]);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}">{}</text>"#, LABEL + w + 4.0, y + 12.0, escape(note));
    }
    s.push_str("</svg>\n");
    s
}

/// One bar per row, split into class segments given as percentages.
pub fn stacked_chart(title: &str, classes: &[&str], rows: &[(String, f64, [f64; 8])]) -> String {
    let legend = 16.0 * classes.len() as f64;
    let height = 40.0 + ROW * rows.len() as f64 + legend + 20.0;
    let width = LABEL + BAR + 140.0;
    let max = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="8" y="20" font-size="14">{}</text>"#, escape(title));
    for (i, (label, v, shares)) in rows.iter().enumerate() {
        let y = 32.0 + ROW * i as f64;
        let total = if max > 0.0 { BAR * v / max } else { 0.0 };
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LABEL - 6.0, y + 12.0, escape(label));
        let mut x = LABEL;
        for (k, pct) in shares.iter().enumerate() {
            let w = total * pct / 100.0;
            if w > 0.0 {
                let _ = writeln!(s, r#"<rect x="{x:.2}" y="{y}" width="{w:.2}" height="{}" fill="{}"/>"#, ROW - 4.0, COLORS[k % 8]);
                x += w;
            }
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}">{:.3e} J</text>"#, x + 4.0, y + 12.0, v);
    }
    let top = 40.0 + ROW * rows.len() as f64 + 10.0;
    for (k, c) in classes.iter().enumerate() {
        let y = top + 16.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{LABEL}" y="{y}" width="10" height="10" fill="{}"/>"#, COLORS[k % 8]);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, LABEL + 14.0, y + 9.0, escape(c));
    }
    s.push_str("</svg>\n");
    s
}

fn write(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| crate::error::CliError::io(path, e))
}

pub fn write_charts(layout: &Layout, report: &Report) -> Result<()> {
    let ops: Vec<_> = report
        .ops
        .rows
        .iter()
        .take(30)
        .map(|r| (r.id.clone(), r.unit_cost_j * 1e6, format!("{:.1}% of energy", 100.0 * r.share)))
        .collect();
    write(&layout.svg("ops"), &bar_chart("Operations by unit cost", "µJ per execution", &ops))?;

    let mut blocks: Vec<_> = report.blocks.rows.iter().filter(|b| b.in_app_j > 0.0).collect();
    blocks.sort_by(|a, b| b.in_app_j.total_cmp(&a.in_app_j).then(a.block.cmp(&b.block)));
    let rows: Vec<_> = blocks.iter().take(20).map(|b| (format!("block {}", b.block), b.in_app_j, b.class_share)).collect();
    let classes: Vec<&str> = emod_core::opdict::OpClass::ALL.iter().map(|c| c.name()).collect();
    write(&layout.svg("blocks"), &stacked_chart("Blocks by in-application energy", &classes, &rows))?;

    if let Some(v) = &report.variants {
        let rows: Vec<_> = v.iter().map(|r| (r.name.clone(), r.energy_j * 1e3, format!("{:+.1}%", r.change_pct))).collect();
        write(&layout.svg("variants"), &bar_chart("Vertex upload variants", "mJ per second of frames", &rows))?;
    }
    Ok(())
}
