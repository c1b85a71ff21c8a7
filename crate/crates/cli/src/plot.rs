//! Deterministic SVG rendering of experiment reports.

use std::fmt::Write as _;
use std::path::Path;

use nodal_core::{CensusReport64, FrequencyProfile64, ScalingFit64, SmallnessReport64};

use crate::error::PlotError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotFormat {
    Svg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

/// `y = prefactor · x^slope` on log axes, `y = slope · x + intercept` on linear ones.
#[derive(Clone, Debug, PartialEq)]
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Figure {
    Scatter {
        title: String,
        x_label: String,
        y_label: String,
        scale: Scale,
        points: Vec<(f64, f64)>,
        /// Join consecutive points.
        connect: bool,
        fit: Option<FitLine>,
    },
    Heatmap {
        title: String,
        /// Row-major cell values, rows along the first axis.
        values: Vec<Vec<f64>>,
    },
    Segments {
        title: String,
        bounds: [(f64, f64); 2],
        segments: Vec<[[f64; 2]; 2]>,
    },
}

pub trait Plottable {
    fn figure(&self) -> Figure;
}

impl Plottable for ScalingFit64 {
    fn figure(&self) -> Figure {
        Figure::Scatter {
            title: "nodal volume vs eigenvalue".into(),
            x_label: "lambda".into(),
            y_label: "volume".into(),
            scale: Scale::Log,
            points: self.points.clone(),
            connect: false,
            fit: Some(FitLine {
                slope: self.fitted_exponent,
                intercept: self.intercept,
                label: format!("slope = {:.4}", self.fitted_exponent),
            }),
        }
    }
}

impl Plottable for FrequencyProfile64 {
    fn figure(&self) -> Figure {
        Figure::Scatter {
            title: "frequency".into(),
            x_label: "r".into(),
            y_label: "beta".into(),
            scale: Scale::Linear,
            points: self.radii.iter().copied().zip(self.beta_values.iter().copied()).collect(),
            connect: true,
            fit: None,
        }
    }
}

impl Plottable for CensusReport64 {
    fn figure(&self) -> Figure {
        let values = self
            .index_matrix()
            .unwrap_or_else(|| vec![self.subcubes.iter().map(|s| s.index).collect()]);
        Figure::Heatmap {
            title: format!("subcube indices, {} bad of bound {:.2}", self.bad_count, self.bound),
            values,
        }
    }
}

impl Plottable for SmallnessReport64 {
    fn figure(&self) -> Figure {
        Figure::Scatter {
            title: format!("propagation of smallness ({})", self.family),
            x_label: "epsilon".into(),
            y_label: "sup on half cube".into(),
            scale: Scale::Log,
            points: self.samples.iter().map(|s| (s.epsilon, s.sup_half)).collect(),
            connect: false,
            fit: Some(FitLine {
                slope: self.fitted_alpha,
                intercept: self.fitted_c.ln(),
                label: format!("alpha = {:.4}", self.fitted_alpha),
            }),
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 64.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
        W / 2.0,
        escape(title)
    );
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Result<Self, PlotError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            if log && !(v > 0.0 && v.is_finite()) {
                return Err(PlotError::NotLogScalable(v));
            }
            if v.is_finite() {
                let t = if log { v.log10() } else { v };
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        if !lo.is_finite() {
            return Err(PlotError::NoFiniteData);
        }
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5_f64.max(lo.abs() * 0.05) };
        Ok(Self { lo: lo - pad, hi: hi + pad, log })
    }

    fn unit(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        (t - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..=4)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                let label = if self.log { format!("1e{t:.2}") } else { format!("{t:.4}") };
                (i as f64 / 4.0, label)
            })
            .collect()
    }
}

fn px(u: f64) -> f64 {
    MARGIN + u * (W - 2.0 * MARGIN)
}

fn py(u: f64) -> f64 {
    H - MARGIN - u * (H - 2.0 * MARGIN)
}

fn frame(out: &mut String, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for (u, label) in x.ticks() {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{label}</text>",
            px(u),
            H - MARGIN + 14.0
        );
    }
    for (u, label) in y.ticks() {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{label}</text>",
            MARGIN - 4.0,
            py(u) + 3.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        W / 2.0,
        H - 20.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" transform=\"rotate(-90 16 {:.1})\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn scatter(
    out: &mut String,
    (x_label, y_label): (&str, &str),
    scale: Scale,
    points: &[(f64, f64)],
    connect: bool,
    fit: Option<&FitLine>,
) -> Result<(), PlotError> {
    let log = scale == Scale::Log;
    let x = Axis::new(points.iter().map(|p| p.0), log)?;
    let y = Axis::new(points.iter().map(|p| p.1), log)?;
    frame(out, &x, &y, x_label, y_label);
    if connect {
        let path: Vec<String> = points
            .iter()
            .map(|&(a, b)| format!("{:.2},{:.2}", px(x.unit(a)), py(y.unit(b))))
            .collect();
        let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\"/>", path.join(" "));
    }
    for &(a, b) in points {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>",
            px(x.unit(a)),
            py(y.unit(b))
        );
    }
    if let Some(f) = fit {
        let (x0, x1) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
        let eval = |v: f64| if log { (f.intercept + f.slope * v.ln()).exp() } else { f.intercept + f.slope * v };
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"firebrick\" stroke-dasharray=\"6 3\"/>",
            px(x.unit(x0)),
            py(y.unit(eval(x0))),
            px(x.unit(x1)),
            py(y.unit(eval(x1)))
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"firebrick\">{}</text>",
            MARGIN + 8.0,
            MARGIN + 16.0,
            escape(&f.label)
        );
    }
    Ok(())
}

fn heatmap(out: &mut String, values: &[Vec<f64>]) -> Result<(), PlotError> {
    let finite: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rows = values.len();
    let cols = values.iter().map(Vec::len).max().unwrap_or(1);
    let ch = (H - 2.0 * MARGIN) / cols as f64;
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let shade = if v.is_finite() { (255.0 * (1.0 - t)).round() as u8 } else { 128 };
            // Row i runs along the first axis: draw it as column i, bottom to top.
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb(255,{shade},{shade})\" stroke=\"gray\" stroke-width=\"0.5\"/>",
                MARGIN + i as f64 * (W - 2.0 * MARGIN) / rows as f64,
                H - MARGIN - (j + 1) as f64 * ch,
                (W - 2.0 * MARGIN) / rows as f64,
                ch
            );
        }
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">index range [{lo:.4}, {hi:.4}]</text>",
        W / 2.0,
        H - 20.0
    );
    Ok(())
}

fn segments_plot(out: &mut String, bounds: &[(f64, f64); 2], segs: &[[[f64; 2]; 2]]) {
    let x = Axis { lo: bounds[0].0, hi: bounds[0].1, log: false };
    let y = Axis { lo: bounds[1].0, hi: bounds[1].1, log: false };
    frame(out, &x, &y, "x1", "x2");
    for s in segs {
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"0.6\"/>",
            px(x.unit(s[0][0])),
            py(y.unit(s[0][1])),
            px(x.unit(s[1][0])),
            py(y.unit(s[1][1]))
        );
    }
}

fn point_count(fig: &Figure) -> usize {
    match fig {
        Figure::Scatter { points, .. } => points.len(),
        Figure::Heatmap { values, .. } => values.iter().map(Vec::len).sum(),
        Figure::Segments { segments, .. } => 2 * segments.len(),
    }
}

pub fn render_svg(fig: &Figure) -> Result<String, PlotError> {
    let count = point_count(fig);
    if count < 2 {
        return Err(PlotError::TooFewPoints(count));
    }
    let mut out = String::new();
    match fig {
        Figure::Scatter { title, x_label, y_label, scale, points, connect, fit } => {
            header(&mut out, title);
            scatter(&mut out, (x_label, y_label), *scale, points, *connect, fit.as_ref())?;
        }
        Figure::Heatmap { title, values } => {
            header(&mut out, title);
            heatmap(&mut out, values)?;
        }
        Figure::Segments { title, bounds, segments } => {
            header(&mut out, title);
            segments_plot(&mut out, bounds, segments);
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders `report` and writes it to `path`.
pub fn emit_plot<P: Plottable + ?Sized>(report: &P, format: PlotFormat, path: &Path) -> Result<(), PlotError> {
    let PlotFormat::Svg = format;
    std::fs::write(path, render_svg(&report.figure())?)?;
    Ok(())
}
