//! Minimal SVG figures: PTM heatmaps and grouped bar charts.

use std::fmt::Write;

const CELL: f64 = 22.0;
const PAD: f64 = 30.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue for −1, white for 0, red for +1.
fn diverging(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

pub struct Panel {
    pub title: String,
    pub matrix: Vec<Vec<f64>>,
}

/// Panels laid out row by row, `columns` per row, on a shared [−1, 1] scale.
pub fn heatmap_grid(title: &str, panels: &[Panel], columns: usize) -> String {
    let columns = columns.max(1);
    let n = panels.iter().map(|p| p.matrix.len()).max().unwrap_or(0) as f64;
    let panel_w = n * CELL + PAD;
    let panel_h = n * CELL + PAD + 14.0;
    let rows = panels.len().div_ceil(columns);
    let width = PAD + columns as f64 * panel_w;
    let height = 2.0 * PAD + rows as f64 * panel_h;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="18" font-size="13">{}</text>"#, escape(title));
    for (k, p) in panels.iter().enumerate() {
        let x0 = PAD + (k % columns) as f64 * panel_w;
        let y0 = PAD + (k / columns) as f64 * panel_h;
        let _ = writeln!(s, r#"<text x="{x0}" y="{}">{}</text>"#, y0 + 10.0, escape(&p.title));
        for (i, row) in p.matrix.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let _ = writeln!(
                    s,
                    r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}" stroke="#999" stroke-width="0.5"><title>{v:.4}</title></rect>"##,
                    x0 + j as f64 * CELL,
                    y0 + 16.0 + i as f64 * CELL,
                    diverging(v)
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bars on a log10 axis; non-positive values are drawn at the floor.
pub fn log_bar_chart(title: &str, groups: &[(String, Vec<f64>)], series: &[&str]) -> String {
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let bar_w = 18.0;
    let group_w = bar_w * series.len() as f64 + 24.0;
    let (plot_h, left, top) = (240.0, 60.0, 40.0);
    let width = left + groups.len().max(1) as f64 * group_w + 140.0;
    let height = top + plot_h + 70.0;
    let logs: Vec<f64> =
        groups.iter().flat_map(|(_, v)| v.iter()).filter(|v| **v > 0.0 && v.is_finite()).map(|v| v.log10()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (-1.0, 1.0) };
    let y_of = |v: f64| {
        let l = if v > 0.0 && v.is_finite() { v.log10() } else { lo };
        top + plot_h * (1.0 - (l - lo) / (hi - lo))
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="13">{}</text>"#, escape(title));
    let mut e = lo;
    while e <= hi {
        let y = y_of(10f64.powf(e));
        let _ = writeln!(s, r##"<line x1="{left}" x2="{}" y1="{y}" y2="{y}" stroke="#ddd"/>"##, width - 140.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{e}</text>"#, left - 4.0, y + 4.0);
        e += 1.0;
    }
    for (g, (label, values)) in groups.iter().enumerate() {
        let gx = left + 12.0 + g as f64 * group_w;
        for (k, &v) in values.iter().enumerate() {
            let y = y_of(v);
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{bar_w}" height="{}" fill="{}"><title>{v:e}</title></rect>"#,
                gx + k as f64 * bar_w,
                top + plot_h - y,
                COLORS[k % COLORS.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            gx + bar_w * values.len() as f64 / 2.0,
            top + plot_h + 16.0,
            escape(label)
        );
    }
    for (k, name) in series.iter().enumerate() {
        let y = top + 14.0 * k as f64;
        let lx = width - 130.0;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{y}" width="10" height="10" fill="{}"/>"#, COLORS[k % COLORS.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 14.0, y + 9.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}
