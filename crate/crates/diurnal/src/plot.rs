//! Minimal SVG line plots for PR curves, score series and residual traces.
//!
//! Hand-rolled on purpose: the figures need nothing beyond polylines, axis
//! labels and event markers, and every figure is also emitted as raw CSV.

use std::fmt::Write as _;

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One polyline.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// A line plot with optional event markers along the bottom edge.
#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<PlotSeries>,
    /// X positions marked with a triangle at the bottom (event days).
    pub markers: Vec<f64>,
    /// Embedded as an SVG comment (configuration echo).
    pub meta: Option<String>,
}

fn finite_bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        None
    } else if lo == hi {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LinePlot {
    /// Renders the plot to an SVG document string.
    pub fn to_svg(&self) -> String {
        let (x0, x1) = finite_bounds(
            self.series
                .iter()
                .flat_map(|s| s.points.iter().map(|p| p.0))
                .chain(self.markers.iter().copied()),
        )
        .unwrap_or((0.0, 1.0));
        let (y0, y1) = finite_bounds(
            self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)),
        )
        .unwrap_or((0.0, 1.0));

        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = move |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
        let sy = move |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
        );
        if let Some(meta) = &self.meta {
            let _ = writeln!(svg, "<!-- meta: {} -->", escape(meta));
        }
        let _ = writeln!(
            svg,
            "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>",
            WIDTH / 2.0,
            escape(&self.title)
        );

        // axes
        let axis_bottom = MARGIN_TOP + plot_h;
        let axis_right = MARGIN_LEFT + plot_w;
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{axis_bottom}\" x2=\"{axis_right}\" y2=\"{axis_bottom}\" stroke=\"black\"/>"
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{axis_bottom}\" stroke=\"black\"/>"
        );
        for (value, anchor_x) in [(x0, MARGIN_LEFT), (x1, axis_right)] {
            let _ = writeln!(
                svg,
                "<text x=\"{anchor_x}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{value:.3}</text>",
                axis_bottom + 16.0
            );
        }
        for (value, y) in [(y0, axis_bottom), (y1, MARGIN_TOP + 4.0)] {
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{value:.3}</text>",
                MARGIN_LEFT - 6.0
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>",
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut path = String::new();
            for &(x, y) in series.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                let _ = write!(path, "{:.2},{:.2} ", sx(x), sy(y));
            }
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                path.trim_end()
            );
            let legend_y = MARGIN_TOP + 14.0 * (i as f64 + 1.0);
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{legend_y}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>",
                axis_right - 140.0,
                escape(&series.name)
            );
        }

        // event markers: small triangles along the bottom axis
        for &x in self.markers.iter().filter(|x| x.is_finite()) {
            let cx = sx(x);
            let _ = writeln!(
                svg,
                "<polygon points=\"{:.2},{} {:.2},{} {:.2},{}\" fill=\"#444\"/>",
                cx,
                axis_bottom - 7.0,
                cx - 4.0,
                axis_bottom - 1.0,
                cx + 4.0,
                axis_bottom - 1.0
            );
        }

        svg.push_str("</svg>\n");
        svg
    }
}
