//! Hand-rolled SVG figures. Every figure is a pure function of table rows,
//! so re-rendering the same CSV yields byte-identical bytes: fixed canvas,
//! fixed palette, fixed decimal formatting, no timestamps, no randomness.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 42.0;
const MARGIN_B: f64 = 64.0;

pub const PALETTE: [&str; 6] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
];

/// One named series of (x, y) points.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Largest of 1, 2, 5 × 10^k not exceeding `x` (x > 0).
fn nice_step(x: f64) -> f64 {
    let mag = 10f64.powf(x.log10().floor());
    let frac = x / mag;
    if frac >= 5.0 {
        5.0 * mag
    } else if frac >= 2.0 {
        2.0 * mag
    } else {
        mag
    }
}

fn ticks(max: f64) -> Vec<f64> {
    if max <= 0.0 {
        return vec![0.0, 1.0];
    }
    let step = nice_step(max / 4.0);
    let mut out = Vec::new();
    let mut t = 0.0;
    while t <= max * (1.0 + 1e-9) {
        out.push(t);
        t += step;
    }
    if *out.last().unwrap() < max * (1.0 - 1e-9) {
        out.push(*out.last().unwrap() + step);
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.fract() == 0.0 && v.abs() < 1e7 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

struct Frame {
    svg: String,
    x0: f64,
    y0: f64, // bottom-left corner of the plot area
    w: f64,
    h: f64,
}

impl Frame {
    fn new(title: &str) -> Self {
        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
             width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\">\n",
            W = WIDTH,
            H = HEIGHT
        ));
        svg.push_str(&format!(
            "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"#ffffff\"/>\n",
            W = WIDTH,
            H = HEIGHT
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
            px(WIDTH / 2.0),
            esc(title)
        ));
        Frame {
            svg,
            x0: MARGIN_L,
            y0: HEIGHT - MARGIN_B,
            w: WIDTH - MARGIN_L - MARGIN_R,
            h: HEIGHT - MARGIN_T - MARGIN_B,
        }
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        self.svg.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"#222222\"/>\n\
             <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{yt}\" stroke=\"#222222\"/>\n",
            x0 = px(self.x0),
            y0 = px(self.y0),
            x1 = px(self.x0 + self.w),
            yt = px(self.y0 - self.h),
        ));
        self.svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            px(self.x0 + self.w / 2.0),
            px(HEIGHT - 16.0),
            esc(x_label)
        ));
        self.svg.push_str(&format!(
            "<text x=\"18\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
             transform=\"rotate(-90 18 {})\">{}</text>\n",
            px(self.y0 - self.h / 2.0),
            px(self.y0 - self.h / 2.0),
            esc(y_label)
        ));
    }

    fn y_ticks(&mut self, max: f64) -> f64 {
        let ts = ticks(max);
        let top = *ts.last().unwrap();
        for t in &ts {
            let y = self.y0 - t / top * self.h;
            self.svg.push_str(&format!(
                "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"#dddddd\"/>\n\
                 <text x=\"{xl}\" y=\"{yl}\" font-size=\"11\" text-anchor=\"end\">{v}</text>\n",
                x0 = px(self.x0),
                x1 = px(self.x0 + self.w),
                y = px(y),
                xl = px(self.x0 - 6.0),
                yl = px(y + 4.0),
                v = fmt_tick(*t)
            ));
        }
        top
    }

    fn legend(&mut self, names: &[String]) {
        for (i, name) in names.iter().enumerate() {
            let x = self.x0 + 10.0;
            let y = self.y0 - self.h + 14.0 + 18.0 * i as f64;
            self.svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n\
                 <text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n",
                px(x),
                px(y - 10.0),
                PALETTE[i % PALETTE.len()],
                px(x + 18.0),
                px(y),
                esc(name)
            ));
        }
    }

    fn finish(mut self, path: &Path) -> Result<()> {
        self.svg.push_str("</svg>\n");
        fs::write(path, self.svg)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}

/// Line chart over a numeric x axis (e.g. training step).
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()> {
    let mut frame = Frame::new(title);
    frame.axes(x_label, y_label);
    let x_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .fold(0.0f64, f64::max);
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0f64, f64::max);
    let y_top = frame.y_ticks(if y_max > 0.0 { y_max } else { 1.0 });
    let x_top = if x_max > 0.0 { x_max } else { 1.0 };

    // X ticks.
    for t in ticks(x_top) {
        if t > x_top * (1.0 + 1e-9) {
            break;
        }
        let x = frame.x0 + t / x_top * frame.w;
        frame.svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{y1}\" stroke=\"#222222\"/>\n\
             <text x=\"{x}\" y=\"{yl}\" font-size=\"11\" text-anchor=\"middle\">{v}</text>\n",
            x = px(x),
            y0 = px(frame.y0),
            y1 = px(frame.y0 + 4.0),
            yl = px(frame.y0 + 18.0),
            v = fmt_tick(t)
        ));
    }

    for (i, s) in series.iter().enumerate() {
        let mut d = String::new();
        for (j, (x, y)) in s.points.iter().enumerate() {
            let cx = frame.x0 + x / x_top * frame.w;
            let cy = frame.y0 - (y / y_top).min(1.0) * frame.h;
            d.push_str(if j == 0 { "M" } else { " L" });
            d.push_str(&format!("{} {}", px(cx), px(cy)));
        }
        frame.svg.push_str(&format!(
            "<path d=\"{d}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"/>\n",
            PALETTE[i % PALETTE.len()]
        ));
    }
    frame.legend(&series.iter().map(|s| s.name.clone()).collect::<Vec<_>>());
    frame.finish(path)
}

/// Line chart over labeled categories (e.g. train sizes, edit counts):
/// x positions are the category indices.
pub fn category_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    categories: &[String],
    series: &[(String, Vec<Option<f64>>)],
) -> Result<()> {
    let mut frame = Frame::new(title);
    frame.axes(x_label, y_label);
    let y_max = series
        .iter()
        .flat_map(|(_, ys)| ys.iter().flatten().copied())
        .fold(0.0f64, f64::max);
    let y_top = frame.y_ticks(if y_max > 0.0 { y_max } else { 1.0 });
    let n = categories.len().max(1);
    let gap = frame.w / n as f64;

    for (i, label) in categories.iter().enumerate() {
        let x = frame.x0 + (i as f64 + 0.5) * gap;
        frame.svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" text-anchor=\"middle\">{v}</text>\n",
            x = px(x),
            y = px(frame.y0 + 18.0),
            v = esc(label)
        ));
    }

    for (i, (_, ys)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut marks = String::new();
        let mut pen_down = false;
        for (j, y) in ys.iter().enumerate() {
            let Some(y) = y else {
                pen_down = false;
                continue;
            };
            let cx = frame.x0 + (j as f64 + 0.5) * gap;
            let cy = frame.y0 - (y / y_top).min(1.0) * frame.h;
            d.push_str(if pen_down { " L" } else { "M" });
            d.push_str(&format!("{} {}", px(cx), px(cy)));
            marks.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                px(cx),
                px(cy)
            ));
            pen_down = true;
        }
        frame.svg.push_str(&format!(
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n"
        ));
        frame.svg.push_str(&marks);
    }
    frame.legend(&series.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>());
    frame.finish(path)
}

/// Bars in series groups (e.g. per-stratum accuracy, one bar color per
/// model kind). `None` values render no bar.
pub fn grouped_bars(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    groups: &[String],
    series: &[(String, Vec<Option<f64>>)],
) -> Result<()> {
    let mut frame = Frame::new(title);
    frame.axes(x_label, y_label);
    let y_max = series
        .iter()
        .flat_map(|(_, ys)| ys.iter().flatten().copied())
        .fold(0.0f64, f64::max);
    let y_top = frame.y_ticks(if y_max > 0.0 { y_max } else { 1.0 });
    let n_groups = groups.len().max(1);
    let n_series = series.len().max(1);
    let group_w = frame.w / n_groups as f64;
    let bar_w = group_w * 0.8 / n_series as f64;

    for (g, label) in groups.iter().enumerate() {
        let x = frame.x0 + (g as f64 + 0.5) * group_w;
        frame.svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"11\" text-anchor=\"middle\">{v}</text>\n",
            x = px(x),
            y = px(frame.y0 + 18.0),
            v = esc(label)
        ));
    }
    for (s, (_, ys)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        for (g, y) in ys.iter().enumerate() {
            let Some(y) = y else { continue };
            let height = (y / y_top).min(1.0) * frame.h;
            let x = frame.x0 + g as f64 * group_w + group_w * 0.1 + s as f64 * bar_w;
            frame.svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>\n",
                px(x),
                px(frame.y0 - height),
                px(bar_w * 0.92),
                px(height)
            ));
        }
    }
    frame.legend(&series.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>());
    frame.finish(path)
}
