//! Minimal SVG line chart of power against sample size.

use std::collections::BTreeMap;
use std::fmt::Write;

use abroca::power::PowerCurve;

const W: f64 = 820.0;
const H: f64 = 520.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 230.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// One polyline per (effect size, group ratio, outcome ratio) condition, with
/// dashed reference lines at `alpha` and at power 0.8.
pub fn render_power_svg(curve: &PowerCurve, alpha: f64) -> String {
    // key by bit patterns to keep first-seen order stable and exact
    let mut order: Vec<(u64, u64, u64)> = Vec::new();
    let mut series: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &curve.rows {
        let Some(p) = row.power else { continue };
        let key = (row.cell.auc_diff.to_bits(), row.cell.ratio_group.to_bits(), row.cell.ratio_pos_case.to_bits());
        let idx = order.iter().position(|k| *k == key).unwrap_or_else(|| {
            order.push(key);
            order.len() - 1
        });
        series.entry(idx).or_default().push((row.cell.n_total as f64, p));
    }
    let xs = series.values().flatten().map(|p| p.0);
    let (mut x_min, mut x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !x_min.is_finite() {
        (x_min, x_max) = (0.0, 1.0);
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + (1.0 - y) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    // y grid and ticks
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"##,
            LEFT + plot_w,
            LEFT - 8.0,
            y + 4.0
        );
    }
    // x ticks
    for i in 0..=5 {
        let v = x_min + (x_max - x_min) * i as f64 / 5.0;
        let x = sx(v);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.0}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">total sample size (n_total)</text>"#,
        LEFT + plot_w / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">power</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (level, label) in [(0.8, "0.8".to_string()), (alpha, format!("α = {alpha}"))] {
        let y = sy(level);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#555" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}" fill="#555">{label}</text>"##,
            LEFT + plot_w,
            LEFT + plot_w + 4.0,
            y + 4.0
        );
    }
    for (idx, pts) in &series {
        let color = PALETTE[idx % PALETTE.len()];
        let mut pts = pts.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for (x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(*x), sy(*y));
        }
        let (d, g, o) = order[*idx];
        let ly = TOP + 10.0 + 18.0 * *idx as f64;
        let lx = W - RIGHT + 40.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">Δ={} g={} y={}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
            f64::from_bits(d),
            f64::from_bits(g),
            f64::from_bits(o)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use abroca::power::{Cell, PowerRow};

    fn row(n: usize, d: f64, p: Option<f64>) -> PowerRow {
        PowerRow {
            cell: Cell {
                n_total: n,
                auc_diff: d,
                ratio_group: 0.5,
                ratio_pos_case: 0.5,
            },
            power: p,
            mc_stderr: p.map(|_| 0.01),
            n_iter_power: 100,
            n_iter_test: 100,
            alpha: 0.05,
            baseline_auc: 0.725,
            error: None,
        }
    }

    #[test]
    fn one_polyline_per_condition() {
        let curve = PowerCurve {
            rows: vec![row(100, 0.1, Some(0.2)), row(200, 0.1, Some(0.4)), row(100, 0.2, Some(0.5)), row(200, 0.2, None)],
        };
        let svg = render_power_svg(&curve, 0.05);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg, render_power_svg(&curve, 0.05));
    }
}
