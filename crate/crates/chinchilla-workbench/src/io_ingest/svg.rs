//! Minimal deterministic SVG line charts.
//!
//! Emits SVG 1.1 by direct string assembly with a fixed element order, so the
//! same series and style always produce the same bytes. Log axes get decade
//! ticks; non-finite points split a series into separate polyline segments.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotSeries {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        PlotSeries { label: label.into(), points }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub width: f64,
    pub height: f64,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle {
            title: String::new(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: false,
            log_y: false,
            width: 860.0,
            height: 520.0,
        }
    }
}

const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 64.0;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#4b0082", "#8b4513",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Axis coordinate in plot space (logs already applied where requested).
fn plottable(value: f64, log: bool) -> Option<f64> {
    if log {
        (value > 0.0 && value.is_finite()).then(|| value.log10())
    } else {
        value.is_finite().then_some(value)
    }
}

fn tick_label(value: f64, log: bool) -> String {
    if log {
        // `value` is an exponent here.
        return format!("1e{}", value.round() as i64);
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let magnitude = value.abs();
    if (1e-3..1e4).contains(&magnitude) {
        let s = format!("{value:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{value:e}")
    }
}

fn ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let first = lo.ceil() as i64;
        let last = hi.floor() as i64;
        if first > last {
            return vec![lo, hi];
        }
        let span = (last - first) as usize;
        let step = span / 10 + 1;
        return (first..=last).step_by(step).map(|e| e as f64).collect();
    }
    let n = 5;
    (0..n).map(|i| lo + (i as f64) * (hi - lo) / ((n - 1) as f64)).collect()
}

/// Renders the chart as an SVG document string.
pub fn svg_plot_string(series: &[PlotSeries], style: &PlotStyle) -> Result<String> {
    if series.is_empty() {
        return Err(Error::EmptyPlot);
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if let (Some(px), Some(py)) = (plottable(x, style.log_x), plottable(y, style.log_y)) {
                xs.push(px);
                ys.push(py);
            }
        }
    }
    let range = |vals: &[f64], fallback: (f64, f64)| -> (f64, f64) {
        if vals.is_empty() {
            return fallback;
        }
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.04 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x_lo, x_hi) = range(&xs, (0.0, 1.0));
    let (y_lo, y_hi) = range(&ys, (0.0, 1.0));

    let plot_w = style.width - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = style.height - MARGIN_TOP - MARGIN_BOTTOM;
    let to_px = |px: f64| MARGIN_LEFT + (px - x_lo) / (x_hi - x_lo) * plot_w;
    let to_py = |py: f64| MARGIN_TOP + plot_h - (py - y_lo) / (y_hi - y_lo) * plot_h;

    let mut out = String::with_capacity(16 * 1024);
    out.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" \
         version=\"1.1\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n",
        style.width, style.height, style.width, style.height
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{:.0}\" height=\"{:.0}\" fill=\"#ffffff\"/>\n",
        style.width, style.height
    ));
    if !style.title.is_empty() {
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
             text-anchor=\"middle\" font-weight=\"bold\">{}</text>\n",
            MARGIN_LEFT + plot_w / 2.0,
            xml_escape(&style.title)
        ));
    }

    // Grid lines and tick labels.
    for t in ticks(x_lo, x_hi, style.log_x) {
        let px = to_px(t);
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\" \
             stroke-width=\"1\"/>\n",
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        ));
        out.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">{}</text>\n",
            MARGIN_TOP + plot_h + 20.0,
            tick_label(t, style.log_x)
        ));
    }
    for t in ticks(y_lo, y_hi, style.log_y) {
        let py = to_py(t);
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"#dddddd\" \
             stroke-width=\"1\"/>\n",
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            py + 4.0,
            tick_label(t, style.log_y)
        ));
    }

    // Axes.
    out.push_str(&format!(
        "<line x1=\"{l:.2}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" stroke=\"#000000\" \
         stroke-width=\"1.5\"/>\n<line x1=\"{l:.2}\" y1=\"{t:.2}\" x2=\"{l:.2}\" y2=\"{b:.2}\" \
         stroke=\"#000000\" stroke-width=\"1.5\"/>\n",
        l = MARGIN_LEFT,
        r = MARGIN_LEFT + plot_w,
        t = MARGIN_TOP,
        b = MARGIN_TOP + plot_h
    ));
    let x_axis_label =
        if style.log_x { format!("{} (log scale)", style.x_label) } else { style.x_label.clone() };
    let y_axis_label =
        if style.log_y { format!("{} (log scale)", style.y_label) } else { style.y_label.clone() };
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        MARGIN_TOP + plot_h + 46.0,
        xml_escape(&x_axis_label)
    ));
    out.push_str(&format!(
        "<text x=\"20\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 20 {:.1})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        xml_escape(&y_axis_label)
    ));

    // Series polylines, split at unplottable points.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut segment: Vec<(f64, f64)> = Vec::new();
        let flush = |segment: &mut Vec<(f64, f64)>, out: &mut String| {
            if segment.len() >= 2 {
                let pts: Vec<String> =
                    segment.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                out.push_str(&format!(
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" \
                     points=\"{}\"/>\n",
                    pts.join(" ")
                ));
            }
            segment.clear();
        };
        for &(x, y) in &s.points {
            match (plottable(x, style.log_x), plottable(y, style.log_y)) {
                (Some(px), Some(py)) => segment.push((to_px(px), to_py(py))),
                _ => flush(&mut segment, &mut out),
            }
        }
        flush(&mut segment, &mut out);
    }

    // Legend.
    let legend_x = MARGIN_LEFT + plot_w + 14.0;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_TOP + 10.0 + 18.0 * i as f64;
        out.push_str(&format!(
            "<line x1=\"{legend_x:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"{color}\" stroke-width=\"2.5\"/>\n",
            legend_x + 20.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            legend_x + 26.0,
            y + 4.0,
            xml_escape(&s.label)
        ));
    }

    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders and writes the chart.
pub fn write_svg_plot(series: &[PlotSeries], style: &PlotStyle, path: &Path) -> Result<()> {
    let doc = svg_plot_string(series, style)?;
    std::fs::write(path, doc)?;
    Ok(())
}
