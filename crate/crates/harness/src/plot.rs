//! Minimal SVG line plots for the diagnostic curves; no external process.

use std::fmt::Write as _;

pub struct Series<'a> {
    pub label: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
}

const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
const W: f64 = 720.0;
const H: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 30.0;
const MB: f64 = 50.0;

/// Render series as an SVG line plot. `log_y` plots log₁₀ of positive
/// values.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_y: bool) -> String {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    let ty = |y: f64| if log_y { y.max(1e-300).log10() } else { y };
    for s in series {
        for (&x, &y) in s.xs.iter().zip(s.ys) {
            if !x.is_finite() || !y.is_finite() {
                continue;
            }
            if log_y && y <= 0.0 {
                continue;
            }
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(ty(y));
            ymax = ymax.max(ty(y));
        }
    }
    if !xmin.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax - xmin).abs() < 1e-300 {
        xmax = xmin + 1.0;
    }
    if (ymax - ymin).abs() < 1e-300 {
        ymax = ymin + 1.0;
    }
    let px = |x: f64| ML + (x - xmin) / (xmax - xmin) * (W - ML - MR);
    let py = |y: f64| H - MB - (ty(y) - ymin) / (ymax - ymin) * (H - MT - MB);

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{W}" height="{H}" fill="white"/><text x="{}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        W / 2.0,
        title
    );
    // frame
    let _ = write!(
        svg,
        r#"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="#333"/>"#,
        W - ML - MR,
        H - MT - MB
    );
    // ticks
    for i in 0..=4 {
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        let xx = px(fx);
        let yy = H - MB - (fy - ymin) / (ymax - ymin) * (H - MT - MB);
        let _ = write!(
            svg,
            r#"<line x1="{xx}" y1="{}" x2="{xx}" y2="{}" stroke="#333"/><text x="{xx}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{:.3e}</text>"#,
            H - MB,
            H - MB + 4.0,
            H - MB + 16.0,
            fx
        );
        let label = if log_y {
            format!("1e{fy:.1}")
        } else {
            format!("{fy:.3e}")
        };
        let _ = write!(
            svg,
            r#"<line x1="{}" y1="{yy}" x2="{ML}" y2="{yy}" stroke="#333"/><text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="10">{label}</text>"#,
            ML - 4.0,
            ML - 6.0,
            yy + 3.0
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{xlabel}</text>"#,
        ML + (W - ML - MR) / 2.0,
        H - 10.0
    );
    let _ = write!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{ylabel}</text>"#,
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    );
    for (si, s) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let mut path = String::new();
        let mut pen_up = true;
        for (&x, &y) in s.xs.iter().zip(s.ys) {
            if !x.is_finite() || !y.is_finite() || (log_y && y <= 0.0) {
                pen_up = true;
                continue;
            }
            let cmd = if pen_up { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.2} {:.2} ", px(x), py(y));
            pen_up = false;
        }
        let _ = write!(
            svg,
            r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        let _ = write!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            ML + 8.0,
            MT + 16.0 + 14.0 * si as f64,
            s.label
        );
    }
    svg.push_str("</svg>");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_valid_svg() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [1.0, 0.1, 0.01];
        let svg = line_plot(
            "decay",
            "t",
            "norm",
            &[Series {
                label: "h1",
                xs: &xs,
                ys: &ys,
            }],
            true,
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>"));
        assert!(svg.contains("decay"));
    }
}
