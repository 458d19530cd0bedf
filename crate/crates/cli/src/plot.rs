//! Static SVG line plot of anomaly scores with shaded labeled segments.

use std::fmt::Write;

use tsad_core::evaluation::label_segments;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 280.0;
const MARGIN: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Scores are drawn on a fixed `[0, 1]` axis.
pub fn score_svg(title: &str, scores: &[f64], labels: Option<&[u8]>, threshold: Option<f64>) -> String {
    let n = scores.len().max(2) as f64;
    let pw = WIDTH - 2.0 * MARGIN;
    let ph = HEIGHT - 2.0 * MARGIN;
    let x = |t: f64| MARGIN + pw * t / (n - 1.0);
    let y = |v: f64| MARGIN + ph * (1.0 - v.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN - 12.0,
        escape(title)
    );
    if let Some(labels) = labels {
        for seg in label_segments(labels) {
            let x0 = x(seg.start as f64);
            let x1 = x((seg.end - 1) as f64).max(x0 + 1.0);
            let _ = writeln!(
                s,
                r##"<rect x="{x0:.2}" y="{MARGIN}" width="{:.2}" height="{ph}" fill="#f4a6a6" fill-opacity="0.5"/>"##,
                x1 - x0
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for v in [0.0, 0.5, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.1}</text>"#,
            MARGIN - 4.0,
            y(v) + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 14.0,
        scores.len()
    );
    if let Some(th) = threshold.filter(|t| t.is_finite()) {
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
            WIDTH - MARGIN,
            y(th),
            y(th)
        );
    }
    if !scores.is_empty() {
        s.push_str(r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1" points=""##);
        for (t, &v) in scores.iter().enumerate() {
            let _ = write!(s, "{:.2},{:.2} ", x(t as f64), y(v));
        }
        s.push_str("\"/>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_title_and_draws_segments() {
        let svg = score_svg("a<b & c", &[0.1, 0.9, 0.8, 0.2], Some(&[0, 1, 1, 0]), Some(0.5));
        assert!(svg.contains("a&lt;b &amp; c"));
        assert_eq!(svg.matches("fill-opacity").count(), 1);
        assert!(svg.contains("<polyline"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
