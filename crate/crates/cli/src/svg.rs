//! Hand-written SVG output: empowerment heatmaps and learning curves.

use std::fmt::Write as _;

use empower_core::empowerment::EmpowermentMap;
use empower_core::grid::{Cell, TabularMdp};
use empower_core::pipeline::CurvePoint;

const CELL: f64 = 40.0;
const VERSION_COMMENT: &str = concat!("<!-- empower-lab ", env!("CARGO_PKG_VERSION"), " -->");

/// Linear white-to-blue scale over `[lo, hi]`.
fn color(v: f64, lo: f64, hi: f64) -> String {
    let t = if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let lerp = |a: f64, b: f64| (a + t * (b - a)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(247.0, 8.0),
        lerp(251.0, 69.0),
        lerp(255.0, 148.0)
    )
}

/// One square per cell, walls in grey, free cells colored and annotated in bits.
pub fn heatmap(mdp: &TabularMdp, map: &EmpowermentMap) -> String {
    let layout = mdp.layout();
    let (w, h) = (layout.width() as f64 * CELL, layout.height() as f64 * CELL);
    let (lo, hi) = (map.min(), map.max());
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" font-family="monospace">"##,
        h + 30.0
    );
    let _ = writeln!(s, "{VERSION_COMMENT}");
    for row in 0..layout.height() {
        for col in 0..layout.width() {
            let (x, y) = (col as f64 * CELL, row as f64 * CELL);
            let fill = match (layout.cell(row, col), mdp.state_at(row, col)) {
                (Cell::Free, Some(state)) => color(map.values()[state], lo, hi),
                _ => "#555555".to_string(),
            };
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#ffffff"/>"##
            );
            if let Some(state) = mdp.state_at(row, col) {
                let v = map.values()[state];
                let ink = if hi > lo && (v - lo) / (hi - lo) > 0.6 {
                    "#ffffff"
                } else {
                    "#000000"
                };
                let _ = writeln!(
                    s,
                    r##"<text x="{}" y="{}" font-size="10" text-anchor="middle" fill="{ink}">{v:.2}</text>"##,
                    x + CELL / 2.0,
                    y + CELL / 2.0 + 3.0
                );
            }
        }
    }
    let _ = writeln!(
        s,
        r##"<text x="4" y="{}" font-size="12">{}: {lo:.4} to {hi:.4} bits</text>"##,
        h + 20.0,
        map.spec()
    );
    s.push_str("</svg>\n");
    s
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Mean return against environment steps, one line and std-of-mean band per group.
pub fn curves(points: &[CurvePoint], title: &str) -> String {
    let (w, h, m) = (720.0, 420.0, 50.0);
    let max_x = points.iter().map(|p| p.env_steps).max().unwrap_or(1).max(1) as f64;
    let max_y = points.iter().map(|p| p.mean + p.sem).fold(1.0f64, f64::max);
    let sx = |x: u64| m + x as f64 / max_x * (w - 2.0 * m);
    let sy = |y: f64| h - m - y / max_y * (h - 2.0 * m);
    let mut groups: Vec<&str> = points.iter().map(|p| p.group.as_str()).collect();
    groups.dedup();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif">"##
    );
    let _ = writeln!(s, "{VERSION_COMMENT}");
    let _ = writeln!(s, r##"<text x="{m}" y="24" font-size="14">{}</text>"##, escape(title));
    let _ = writeln!(
        s,
        r##"<path d="M{m} {} L{} {} M{m} {} L{m} {m}" stroke="#000000" fill="none"/>"##,
        h - m,
        w - m,
        h - m,
        h - m
    );
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" font-size="11" text-anchor="end">{max_x}</text>"##,
        w - m,
        h - m + 16.0
    );
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" font-size="11" text-anchor="end">{max_y:.1}</text>"##,
        m - 4.0,
        m + 4.0
    );
    let _ = writeln!(
        s,
        r##"<text x="{}" y="{}" font-size="11" text-anchor="middle">env_steps</text>"##,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r##"<text x="12" y="{}" font-size="11" transform="rotate(-90 12 {})">mean_return</text>"##,
        h / 2.0,
        h / 2.0
    );
    for (i, g) in groups.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let series: Vec<&CurvePoint> = points.iter().filter(|p| p.group == *g).collect();
        let upper: Vec<String> = series
            .iter()
            .map(|p| format!("{:.3},{:.3}", sx(p.env_steps), sy(p.mean + p.sem)))
            .collect();
        let lower: Vec<String> = series
            .iter()
            .rev()
            .map(|p| format!("{:.3},{:.3}", sx(p.env_steps), sy(p.mean - p.sem)))
            .collect();
        let line: Vec<String> = series
            .iter()
            .map(|p| format!("{:.3},{:.3}", sx(p.env_steps), sy(p.mean)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polygon class="band" points="{} {}" fill="{c}" fill-opacity="0.2" stroke="none"/>"##,
            upper.join(" "),
            lower.join(" ")
        );
        let _ = writeln!(
            s,
            r##"<polyline class="series" points="{}" fill="none" stroke="{c}" stroke-width="2"/>"##,
            line.join(" ")
        );
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="12" height="3" fill="{c}"/>"##,
            w - 250.0,
            ly - 4.0
        );
        let _ = writeln!(
            s,
            r##"<text class="legend" x="{}" y="{ly}" font-size="11">{}</text>"##,
            w - 232.0,
            escape(g)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
