//! Static SVG plots for the benchmark artifacts: training loss curves,
//! per-start search trajectories, and feature-importance bars. Everything is
//! rendered by hand into self-contained SVG strings — no graphics
//! dependency, deterministic output.

use fsns_model::{EpochLoss, TrajectoryPoint};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 44.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    /// Bounds padded so flat lines stay visible and degenerate ranges open
    /// up to a unit span.
    fn around(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Frame {
        let mut frame = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for x in xs {
            if x.is_finite() {
                frame.x_min = frame.x_min.min(x);
                frame.x_max = frame.x_max.max(x);
            }
        }
        for y in ys {
            if y.is_finite() {
                frame.y_min = frame.y_min.min(y);
                frame.y_max = frame.y_max.max(y);
            }
        }
        if !frame.x_min.is_finite() || frame.x_min > frame.x_max {
            frame.x_min = 0.0;
            frame.x_max = 1.0;
        }
        if !frame.y_min.is_finite() || frame.y_min > frame.y_max {
            frame.y_min = 0.0;
            frame.y_max = 1.0;
        }
        if frame.x_max - frame.x_min < 1e-12 {
            frame.x_min -= 0.5;
            frame.x_max += 0.5;
        }
        if frame.y_max - frame.y_min < 1e-12 {
            frame.y_min -= 0.5;
            frame.y_max += 0.5;
        }
        let pad = (frame.y_max - frame.y_min) * 0.05;
        frame.y_min -= pad;
        frame.y_max += pad;
        frame
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn open_svg(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let mut out = format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{y_label}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 10.0,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
    );
    for tick in 0..=4 {
        let t = tick as f64 / 4.0;
        let x_value = frame.x_min + t * (frame.x_max - frame.x_min);
        let y_value = frame.y_min + t * (frame.y_max - frame.y_min);
        let x = frame.sx(x_value);
        let y = frame.sy(y_value);
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{x_value:.3}</text>\n",
            y0 + 4.0,
            y0 + 18.0
        ));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{x0}\" y2=\"{y}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y_value:.3}</text>\n",
            x0 - 4.0,
            x0 - 7.0,
            y + 4.0
        ));
    }
    out
}

fn polyline(points: &[(f64, f64)], frame: &Frame, color: &str, dash: bool) -> String {
    if points.is_empty() {
        return String::new();
    }
    let coords: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", frame.sx(x), frame.sy(y)))
        .collect();
    let dash_attr = if dash { " stroke-dasharray=\"5,3\"" } else { "" };
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash_attr} points=\"{}\"/>\n",
        coords.join(" ")
    )
}

fn legend_entry(index: usize, label: &str, color: &str, dash: bool) -> String {
    let x = WIDTH - MARGIN_RIGHT + 12.0;
    let y = MARGIN_TOP + 16.0 * (index as f64 + 1.0);
    let dash_attr = if dash { " stroke-dasharray=\"5,3\"" } else { "" };
    format!(
        "<line x1=\"{x}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"{dash_attr}/>\n\
         <text x=\"{}\" y=\"{}\">{label}</text>\n",
        y - 4.0,
        x + 22.0,
        y - 4.0,
        x + 28.0,
        y
    )
}

/// Loss-component curves over training epochs, one polyline per component.
pub fn loss_curves_svg(history: &[EpochLoss]) -> String {
    let components: [(&str, fn(&EpochLoss) -> f64); 5] = [
        ("total", |e| e.total),
        ("performance", |e| e.performance),
        ("reconstruction", |e| e.reconstruction),
        ("kl", |e| e.kl),
        ("redundancy", |e| e.redundancy),
    ];
    let frame = Frame::around(
        history.iter().map(|e| e.epoch as f64),
        history
            .iter()
            .flat_map(|e| components.iter().map(move |(_, get)| get(e))),
    );
    let mut svg = open_svg("training loss by epoch");
    svg.push_str(&axes(&frame, "epoch", "mean loss"));
    for (i, (label, get)) in components.iter().enumerate() {
        let points: Vec<(f64, f64)> = history
            .iter()
            .map(|e| (e.epoch as f64, get(e)))
            .filter(|&(_, y)| y.is_finite())
            .collect();
        svg.push_str(&polyline(&points, &frame, PALETTE[i], false));
        svg.push_str(&legend_entry(i, label, PALETTE[i], false));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Predicted performance (solid) and redundancy (dashed) along each start's
/// ascent trajectory.
pub fn trajectories_svg(trajectories: &[Vec<TrajectoryPoint>]) -> String {
    let frame = Frame::around(
        trajectories
            .iter()
            .flatten()
            .map(|point| point.step as f64),
        trajectories
            .iter()
            .flatten()
            .flat_map(|point| [point.v_hat, point.u_hat]),
    );
    let mut svg = open_svg("latent ascent trajectories");
    svg.push_str(&axes(&frame, "ascent step", "predicted score"));
    for (i, trajectory) in trajectories.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let v_points: Vec<(f64, f64)> = trajectory
            .iter()
            .map(|p| (p.step as f64, p.v_hat))
            .filter(|&(_, y)| y.is_finite())
            .collect();
        let u_points: Vec<(f64, f64)> = trajectory
            .iter()
            .map(|p| (p.step as f64, p.u_hat))
            .filter(|&(_, y)| y.is_finite())
            .collect();
        svg.push_str(&polyline(&v_points, &frame, color, false));
        svg.push_str(&polyline(&u_points, &frame, color, true));
    }
    svg.push_str(&legend_entry(0, "performance (solid)", "#444444", false));
    svg.push_str(&legend_entry(1, "redundancy (dashed)", "#444444", true));
    svg.push_str("</svg>\n");
    svg
}

/// Horizontal importance bars for the selected features.
pub fn importance_bars_svg(labels: &[String], values: &[f64]) -> String {
    assert_eq!(labels.len(), values.len(), "one label per bar");
    let mut svg = open_svg("feature importance of the selected subset");
    let max_value = values.iter().cloned().fold(0.0_f64, f64::max).max(1e-12);
    let bar_area_height = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let slot = if values.is_empty() {
        bar_area_height
    } else {
        bar_area_height / values.len() as f64
    };
    let bar_height = (slot * 0.7).min(28.0);
    for (i, (label, &value)) in labels.iter().zip(values).enumerate() {
        let y = MARGIN_TOP + slot * i as f64 + (slot - bar_height) / 2.0;
        let width = (value.max(0.0) / max_value) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT);
        svg.push_str(&format!(
            "<rect x=\"{MARGIN_LEFT}\" y=\"{y:.2}\" width=\"{width:.2}\" height=\"{bar_height:.2}\" fill=\"{}\"/>\n",
            PALETTE[i % PALETTE.len()]
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>\n",
            MARGIN_LEFT - 6.0,
            y + bar_height / 2.0 + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\">{value:.4}</text>\n",
            MARGIN_LEFT + width + 6.0,
            y + bar_height / 2.0 + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
