//! Hand-written SVG scatter panels. Output depends only on the inputs, so
//! figures diff cleanly between runs.

use std::fmt::Write;

use bridger::numeric::Matrix;

const PANEL: f64 = 220.0;
const PAD: f64 = 12.0;
const TITLE: f64 = 22.0;

/// A row of square scatter panels sharing one coordinate frame. Only the
/// first two columns of each matrix are drawn.
pub fn scatter_panels(title: &str, panels: &[(String, &Matrix)]) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for (_, m) in panels {
        for r in m.iter_rows().filter(|r| r.len() >= 2) {
            for j in 0..2 {
                lo[j] = lo[j].min(r[j]);
                hi[j] = hi[j].max(r[j]);
            }
        }
    }
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    // Square frame around the bounding box with a 5% margin.
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * 1.1;
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let origin = [mid[0] - span / 2.0, mid[1] - span / 2.0];

    let width = panels.len() as f64 * (PANEL + PAD) + PAD;
    let height = PANEL + 2.0 * TITLE + PAD;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="15" font-size="14">{}</text>"#, escape(title));
    for (p, (label, m)) in panels.iter().enumerate() {
        let x0 = PAD + p as f64 * (PANEL + PAD);
        let y0 = TITLE + 4.0;
        let _ = writeln!(
            s,
            r##"<g><rect x="{x0:.1}" y="{y0:.1}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + PANEL / 2.0,
            y0 + PANEL + 16.0,
            escape(label)
        );
        let _ = write!(s, r##"<g fill="#1f5fa8" fill-opacity="0.45">"##);
        for r in m.iter_rows().filter(|r| r.len() >= 2) {
            let px = x0 + (r[0] - origin[0]) / span * PANEL;
            let py = y0 + PANEL - (r[1] - origin[1]) / span * PANEL;
            let _ = write!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="1.6"/>"#);
        }
        let _ = writeln!(s, "</g></g>");
    }
    s.push_str("</svg>\n");
    s
}

/// `n` step indices spread evenly over `0..=k`, always including both ends.
pub fn panel_steps(k: usize, n: usize) -> Vec<usize> {
    let n = n.max(2);
    let mut out: Vec<usize> = (0..n)
        .map(|i| ((i * k) as f64 / (n - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
