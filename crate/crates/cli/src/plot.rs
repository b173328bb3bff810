//! Self-contained SVG line, bar and strip plots plus 8-bit PGM heatmaps.
//! Output bytes depend only on the input values.

use std::fmt::Write as _;
use std::path::Path;

use plasmo::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Gray level used for every pixel of a constant map.
pub const MID_GRAY: u8 = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Plot log10 of y (all values must be positive).
    pub log_y: bool,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Linear map from a data interval onto a pixel interval; a degenerate data
/// interval is widened so constant data sits mid-axis.
struct Axis {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        Self { lo, hi, p0, p1 }
    }

    fn px(&self, v: f64) -> f64 {
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=4)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / 4.0)
            .collect()
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.to_string()
        }
    }
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn frame(
    out: &mut String,
    x: &Axis,
    y: &Axis,
    x_label: &str,
    y_label: &str,
    y_tick: impl Fn(f64) -> String,
) {
    let (left, right, top, bottom) = (
        MARGIN_LEFT,
        WIDTH - MARGIN_RIGHT,
        MARGIN_TOP,
        HEIGHT - MARGIN_BOTTOM,
    );
    let _ = writeln!(
        out,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for t in x.ticks() {
        let px = x.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#,
            bottom + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 19.0,
            tick_label(t)
        );
    }
    for t in y.ticks() {
        let py = y.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{left:.2}" y2="{py:.2}" stroke="black"/>"#,
            left - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 8.0,
            py + 4.0,
            y_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{0:.2}" text-anchor="middle" transform="rotate(-90 20 {0:.2})">{1}</text>"#,
        (top + bottom) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, labels: &[&str]) {
    let x = WIDTH - MARGIN_RIGHT + 15.0;
    for (k, label) in labels.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + 18.0 * k as f64;
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
            x + 20.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 26.0,
            y + 4.0,
            escape(label)
        );
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Line plot with one polyline per series and one circle marker per point.
pub fn line_svg(plot: &LinePlot) -> Result<String> {
    let points = || plot.series.iter().flat_map(|s| s.points.iter());
    if points().next().is_none() {
        return Err(Error::InvalidArgument(
            "nothing to plot: no data points".into(),
        ));
    }
    if let Some((x, y)) = points().find(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite point ({x}, {y})"
        )));
    }
    if plot.log_y && points().any(|(_, y)| *y <= 0.0) {
        return Err(Error::InvalidArgument(
            "log-scale plot needs positive values".into(),
        ));
    }
    let ty = |y: f64| if plot.log_y { y.log10() } else { y };
    let (xlo, xhi) = extent(points().map(|p| p.0));
    let (ylo, yhi) = extent(points().map(|p| ty(p.1)));
    let x = Axis::new(xlo, xhi, MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let y = Axis::new(ylo, yhi, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);

    let mut out = String::new();
    svg_open(&mut out, &plot.title);
    let log_y = plot.log_y;
    frame(&mut out, &x, &y, &plot.x_label, &plot.y_label, |t| {
        if log_y {
            tick_label(10f64.powf(t))
        } else {
            tick_label(t)
        }
    });
    for (k, s) in plot.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|&(a, b)| format!("{:.2},{:.2}", x.px(a), y.px(ty(b))))
            .collect();
        if coords.len() > 1 {
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
        }
        for &(a, b) in &s.points {
            let _ = writeln!(
                out,
                r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                x.px(a),
                y.px(ty(b))
            );
        }
    }
    legend(
        &mut out,
        &plot
            .series
            .iter()
            .map(|s| s.label.as_str())
            .collect::<Vec<_>>(),
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// Horizontal bars of mean |φ| per group, most important on top.
pub fn importance_svg(title: &str, bars: &[(String, f64)]) -> Result<String> {
    if bars.is_empty() {
        return Err(Error::InvalidArgument("nothing to plot: no groups".into()));
    }
    let top = bars.iter().fold(0.0f64, |m, (_, v)| m.max(*v));
    let x = Axis::new(
        0.0,
        if top > 0.0 { top } else { 1.0 },
        MARGIN_LEFT + 40.0,
        WIDTH - MARGIN_RIGHT,
    );
    let band = (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / bars.len() as f64;
    let mut out = String::new();
    svg_open(&mut out, title);
    for t in x.ticks() {
        let px = x.px(t);
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN_BOTTOM + 19.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">mean |SHAP value|</text>"#,
        (x.p0 + x.p1) / 2.0,
        HEIGHT - 18.0
    );
    for (k, (name, v)) in bars.iter().enumerate() {
        let y0 = MARGIN_TOP + band * k as f64 + 0.15 * band;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            x.p0,
            x.px(*v) - x.p0,
            0.7 * band,
            PALETTE[k % PALETTE.len()]
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x.p0 - 6.0,
            y0 + 0.35 * band + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One row of dots per group showing every instance's φ, groups ordered by
/// mean |φ|.
pub fn strip_svg(title: &str, groups: &[(String, Vec<f64>)]) -> Result<String> {
    if groups.iter().all(|(_, v)| v.is_empty()) {
        return Err(Error::InvalidArgument(
            "nothing to plot: no attributions".into(),
        ));
    }
    let (lo, hi) = extent(groups.iter().flat_map(|(_, v)| v.iter().copied()));
    let x = Axis::new(
        lo.min(0.0),
        hi.max(0.0),
        MARGIN_LEFT + 40.0,
        WIDTH - MARGIN_RIGHT,
    );
    let band = (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / groups.len() as f64;
    let mut out = String::new();
    svg_open(&mut out, title);
    for t in x.ticks() {
        let px = x.px(t);
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN_BOTTOM + 19.0,
            tick_label(t)
        );
    }
    let zero = x.px(0.0);
    let _ = writeln!(
        out,
        r#"<line x1="{zero:.2}" y1="{MARGIN_TOP:.2}" x2="{zero:.2}" y2="{:.2}" stroke="gray"/>"#,
        HEIGHT - MARGIN_BOTTOM
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">SHAP value</text>"#,
        (x.p0 + x.p1) / 2.0,
        HEIGHT - 18.0
    );
    for (k, (name, values)) in groups.iter().enumerate() {
        let mid = MARGIN_TOP + band * (k as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x.p0 - 6.0,
            mid + 4.0,
            escape(name)
        );
        for (i, v) in values.iter().enumerate() {
            // deterministic vertical jitter keeps overlapping dots visible
            let jitter = ((i * 37) % 21) as f64 / 20.0 - 0.5;
            let _ = writeln!(
                out,
                r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.6"/>"#,
                x.px(*v),
                mid + jitter * 0.5 * band,
                PALETTE[k % PALETTE.len()]
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Binary PGM of a row-major map, linearly scaled from the minimum (black)
/// to the maximum (white). A constant map is uniformly [`MID_GRAY`].
pub fn pgm(width: usize, height: usize, values: &[f64]) -> Result<(Vec<u8>, f64, f64)> {
    if width == 0 || height == 0 || values.len() != width * height {
        return Err(Error::InvalidArgument(format!(
            "map of {} values is not {width} × {height}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "map contains a non-finite value ({v})"
        )));
    }
    let (lo, hi) = extent(values.iter().copied());
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| {
        if hi > lo {
            ((v - lo) / (hi - lo) * 255.0).round() as u8
        } else {
            MID_GRAY
        }
    }));
    Ok((out, lo, hi))
}

/// Text sidecar describing the gray-level scaling of a PGM.
pub fn pgm_sidecar(source: &Path, width: usize, height: usize, lo: f64, hi: f64) -> String {
    let rule = if hi > lo {
        "gray = round(255 * (value - min) / (max - min)); black = min, white = max".to_string()
    } else {
        format!("constant map: every pixel is mid-gray ({MID_GRAY})")
    };
    format!(
        "source: {}\nsize: {width} x {height}\nscaling: linear\nmin: {}\nmax: {}\nrule: {rule}\nrows: top row = first CSV row (transverse axis), columns = propagation axis\n",
        source.display(),
        plasmo::format::sci9(lo),
        plasmo::format::sci9(hi),
    )
}
