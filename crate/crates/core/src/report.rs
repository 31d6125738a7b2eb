//! Least-squares trend fitting and scatter-plot SVG rendering.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination, 0 by definition when y is constant.
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares y = slope * x + intercept.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<TrendFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Parameter(format!("fit needs at least 2 points, got {n}")));
    }
    if points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Numeric("non-finite point in fit input".into()));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("all x values equal, fit is degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        0.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(TrendFit { slope, intercept, r_squared, n })
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Padded data range; a zero span widens to +-1 around the value.
fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Render a scatter panel with the fitted trend line drawn across the data's
/// x-range. Output is a standalone SVG document, byte-deterministic for
/// equal inputs.
pub fn emit_scatter_svg(
    points: &[(f64, f64)],
    fit: &TrendFit,
    title: &str,
    x_label: &str,
    y_label: &str,
) -> String {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let x_lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let line_ends = [
        (x_lo, fit.slope * x_lo + fit.intercept),
        (x_hi, fit.slope * x_hi + fit.intercept),
    ];
    // Vertical range covers both the points and the trend segment so the
    // line never leaves the plot rectangle.
    let y_lo = points
        .iter()
        .chain(&line_ends)
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min);
    let y_hi = points
        .iter()
        .chain(&line_ends)
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let (x_min, x_max) = padded_range(x_lo, x_hi);
    let (y_min, y_max) = padded_range(y_lo, y_hi);

    let plot_w = SVG_W - MARGIN_L - MARGIN_R;
    let plot_h = SVG_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">"
    );
    let _ = writeln!(svg, "  <title>{}</title>", xml_escape(title));
    let _ = writeln!(
        svg,
        "  <rect x=\"0\" y=\"0\" width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>"
    );
    // Axes.
    let _ = writeln!(
        svg,
        "  <line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>",
        MARGIN_T + plot_h
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    );
    // Five evenly spaced ticks per axis.
    for i in 0..5 {
        let f = i as f64 / 4.0;
        let xv = x_min + f * (x_max - x_min);
        let xp = sx(xv);
        let _ = writeln!(
            svg,
            "  <line x1=\"{xp:.2}\" y1=\"{0}\" x2=\"{xp:.2}\" y2=\"{1}\" stroke=\"black\"/>",
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 5.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{xp:.2}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{xv:.3}</text>",
            MARGIN_T + plot_h + 18.0
        );
        let yv = y_min + f * (y_max - y_min);
        let yp = sy(yv);
        let _ = writeln!(
            svg,
            "  <line x1=\"{}\" y1=\"{yp:.2}\" x2=\"{MARGIN_L}\" y2=\"{yp:.2}\" stroke=\"black\"/>",
            MARGIN_L - 5.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{yv:.3}</text>",
            MARGIN_L - 8.0,
            yp + 4.0
        );
    }
    // Axis labels and title.
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        SVG_H - 12.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>",
        MARGIN_T + plot_h / 2.0,
        xml_escape(y_label)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        xml_escape(title)
    );
    // Data points.
    for p in points {
        let _ = writeln!(
            svg,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"steelblue\"/>",
            sx(p.0),
            sy(p.1)
        );
    }
    // Trend segment across the data's x-range.
    let _ = writeln!(
        svg,
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"crimson\" stroke-width=\"1.5\"/>",
        sx(line_ends[0].0),
        sy(line_ends[0].1),
        sx(line_ends[1].0),
        sy(line_ends[1].1)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" font-size=\"13\">R&#178; = {:.3}</text>",
        MARGIN_L + 10.0,
        MARGIN_T + 18.0,
        fit.r_squared
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered_to_machine_precision() {
        let points: Vec<(f64, f64)> =
            (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let fit = linear_fit(&points).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.n, 10);
    }

    #[test]
    fn two_points_interpolate_exactly() {
        let fit = linear_fit(&[(1.0, 3.0), (4.0, 9.0)]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn constant_y_gives_zero_slope_and_zero_r2() {
        let fit = linear_fit(&[(0.0, 5.0), (1.0, 5.0), (2.0, 5.0)]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.intercept, 5.0);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(linear_fit(&[(1.0, 2.0)]).is_err());
        assert!(linear_fit(&[(3.0, 1.0), (3.0, 2.0), (3.0, 9.0)]).is_err());
        assert!(linear_fit(&[(0.0, 0.0), (f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn noisy_fit_against_closed_form_oracle() {
        // Deterministic pseudo-noise; oracle is the closed-form normal
        // equation computed independently below.
        let points: Vec<(f64, f64)> = (0..25)
            .map(|i| {
                let x = i as f64 * 0.37;
                let noise = ((i * 7919 + 13) % 101) as f64 / 101.0 - 0.5;
                (x, 1.7 * x - 4.2 + noise)
            })
            .collect();
        let fit = linear_fit(&points).unwrap();

        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        assert!((fit.slope - slope).abs() < 1e-10);
        assert!((fit.intercept - intercept).abs() < 1e-10);
        assert!(fit.r_squared > 0.9 && fit.r_squared < 1.0);
    }

    /// Minimal well-formedness scan: tags balance, attributes quoted.
    fn xml_well_formed(doc: &str) -> bool {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = doc.trim();
        if let Some(r) = rest.strip_prefix("<?xml") {
            match r.find("?>") {
                Some(i) => rest = r[i + 2..].trim_start(),
                None => return false,
            }
        }
        let mut roots = 0;
        while let Some(start) = rest.find('<') {
            let Some(end_rel) = rest[start..].find('>') else {
                return false;
            };
            let tag = &rest[start + 1..start + end_rel];
            rest = &rest[start + end_rel + 1..];
            if let Some(name) = tag.strip_prefix('/') {
                if stack.pop().as_deref() != Some(name.trim()) {
                    return false;
                }
                if stack.is_empty() {
                    roots += 1;
                }
            } else if !tag.ends_with('/') {
                let name = tag.split_whitespace().next().unwrap_or("");
                if name.is_empty() {
                    return false;
                }
                stack.push(name.to_string());
            } else if stack.is_empty() {
                roots += 1;
            }
            if tag.matches('"').count() % 2 != 0 {
                return false;
            }
        }
        stack.is_empty() && roots == 1
    }

    #[test]
    fn svg_is_well_formed_even_with_empty_title() {
        let points = [(0.0, 1.0), (1.0, 3.0), (2.0, 4.8)];
        let fit = linear_fit(&points).unwrap();
        let svg = emit_scatter_svg(&points, &fit, "", "", "");
        assert!(svg.starts_with("<?xml"));
        assert!(xml_well_formed(&svg), "not well-formed:\n{svg}");
        let escaped = emit_scatter_svg(&points, &fit, "a<b & c>d", "x", "y");
        assert!(xml_well_formed(&escaped));
        assert!(escaped.contains("a&lt;b &amp; c&gt;d"));
    }

    #[test]
    fn trend_line_endpoints_match_hand_transform() {
        let points = [(0.0, 0.0), (10.0, 20.0)];
        let fit = linear_fit(&points).unwrap();
        let svg = emit_scatter_svg(&points, &fit, "t", "x", "y");

        // Replicate the coordinate transform: x pads to [-0.5, 10.5],
        // y covers points and line (same here) padding to [-1, 21].
        let (x_min, x_max) = (-0.5, 10.5);
        let (y_min, y_max) = (-1.0, 21.0);
        let sx = |x: f64| 70.0 + (x - x_min) / (x_max - x_min) * 550.0;
        let sy = |y: f64| 40.0 + (1.0 - (y - y_min) / (y_max - y_min)) * 385.0;
        let want = format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"crimson\"",
            sx(0.0),
            sy(0.0),
            sx(10.0),
            sy(20.0)
        );
        assert!(svg.contains(&want), "missing `{want}` in:\n{svg}");
    }

    #[test]
    fn svg_emission_is_byte_deterministic() {
        let points = [(0.3, 1.7), (2.9, 3.1), (4.0, 9.9), (5.5, 7.2)];
        let fit = linear_fit(&points).unwrap();
        let a = emit_scatter_svg(&points, &fit, "panel", "params", "accuracy");
        let b = emit_scatter_svg(&points, &fit, "panel", "params", "accuracy");
        assert_eq!(a, b);
        assert!(a.contains("R&#178; ="));
    }
}
