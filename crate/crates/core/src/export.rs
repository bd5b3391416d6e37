//! CSV tables and small hand-written SVG plots.
//!
//! Numbers are printed with a fixed format so that identical runs give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::domain::Rect;
use crate::{Error, Result, C64};

/// Fixed-format number: 12 significant decimals in scientific notation.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.12e}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    /// Aligned plain-text rendering for terminal summaries.
    pub fn render(&self) -> String {
        let mut width: Vec<usize> = self.header.iter().map(String::len).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
            out.push_str(parts.join("  ").trim_end());
            out.push('\n');
        };
        line(&self.header, &mut out);
        for r in &self.rows {
            line(r, &mut out);
        }
        out
    }
}

/// File-name friendly form of a symbol id.
pub fn slug(id: &str) -> String {
    let mut s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

const W: f64 = 480.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Piecewise-linear colour map from dark blue through green to yellow.
fn colour(t: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 4] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.33, [49.0, 104.0, 142.0]),
        (0.66, [53.0, 183.0, 121.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let i = STOPS.iter().rposition(|s| s.0 <= t).unwrap_or(0).min(STOPS.len() - 2);
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let u = (t - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|k| (a.1[k] + u * (b.1[k] - a.1[k])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heatmap of row-major values (`iy * nx + ix`, `y` increasing upwards).
pub fn heatmap_svg(title: &str, rect: &Rect, nx: usize, ny: usize, values: &[f64]) -> String {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pw = W - 2.0 * MARGIN - 40.0;
    let ph = H - 2.0 * MARGIN;
    let (cw, ch) = (pw / nx as f64, ph / ny as f64);
    let mut s = header(title);
    for iy in 0..ny {
        for ix in 0..nx {
            let v = values[iy * nx + ix];
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                MARGIN + ix as f64 * cw,
                MARGIN + (ny - 1 - iy) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                colour((v - lo) / span)
            );
        }
    }
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"14\" height=\"{:.2}\" fill=\"{}\"/>",
            W - MARGIN - 20.0,
            MARGIN + (1.0 - t) * (ph - ph / 11.0),
            ph / 11.0 + 0.05,
            colour(t)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>",
        W - MARGIN - 40.0,
        MARGIN - 5.0,
        num_short(hi),
        W - MARGIN - 40.0,
        H - MARGIN + 14.0,
        num_short(lo)
    );
    axis_labels(&mut s, rect.x_min, rect.x_max, rect.y_min, rect.y_max, pw);
    s.push_str("</svg>\n");
    s
}

fn num_short(v: f64) -> String {
    format!("{v:.3e}")
}

fn axis_labels(s: &mut String, x0: f64, x1: f64, y0: f64, y1: f64, pw: f64) {
    let _ = writeln!(
        s,
        "<text x=\"{m}\" y=\"{yb}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n\
         <text x=\"{xr:.2}\" y=\"{yb}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>\n\
         <text x=\"{ml}\" y=\"{yt:.2}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>\n\
         <text x=\"{ml}\" y=\"{m}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>",
        num_short(x0),
        num_short(x1),
        num_short(y0),
        num_short(y1),
        m = MARGIN,
        yb = H - MARGIN + 14.0,
        xr = MARGIN + pw,
        ml = MARGIN - 4.0,
        yt = H - MARGIN,
    );
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// Polyline plot; with `log_y` non-positive values are dropped.
pub fn line_plot_svg(title: &str, series: &[Series], log_y: bool) -> String {
    let tf = |y: f64| if log_y { y.log10() } else { y };
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.0.is_finite() && p.1.is_finite() && (!log_y || p.1 > 0.0))
    };
    let x0 = pts().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x1 = pts().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y0 = pts().map(|p| tf(p.1)).fold(f64::INFINITY, f64::min);
    let y1 = pts().map(|p| tf(p.1)).fold(f64::NEG_INFINITY, f64::max);
    let xs = if x1 > x0 { x1 - x0 } else { 1.0 };
    let ys = if y1 > y0 { y1 - y0 } else { 1.0 };
    let pw = W - 2.0 * MARGIN - 100.0;
    let ph = H - 2.0 * MARGIN;
    let mut s = header(title);
    let _ = writeln!(
        s,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#888\"/>"
    );
    for (i, se) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = se
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite() && (!log_y || p.1 > 0.0))
            .map(|&(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    MARGIN + (x - x0) / xs * pw,
                    MARGIN + ph - (tf(y) - y0) / ys * ph
                )
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"{c}\">{}</text>",
            coords.join(" "),
            MARGIN + pw + 6.0,
            MARGIN + 12.0 * (i + 1) as f64,
            escape(&se.label)
        );
    }
    let (ly0, ly1) = if log_y {
        (10f64.powf(y0), 10f64.powf(y1))
    } else {
        (y0, y1)
    };
    axis_labels(&mut s, x0, x1, ly0, ly1, pw);
    s.push_str("</svg>\n");
    s
}

/// Points with their covering disks of the given radii.
pub fn disks_svg(title: &str, rect: &Rect, centers: &[C64], radii: &[f64]) -> String {
    let pw = W - 2.0 * MARGIN;
    let ph = H - 2.0 * MARGIN;
    let scale = (pw / rect.width()).min(ph / rect.height());
    let mut s = header(title);
    let map = |z: C64| {
        (
            MARGIN + (z.re - rect.x_min) * scale,
            MARGIN + (rect.y_max - z.im) * scale,
        )
    };
    let _ = writeln!(
        s,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#888\"/>",
        rect.width() * scale,
        rect.height() * scale
    );
    for (&z, &r) in centers.iter().zip(radii) {
        let (x, y) = map(z);
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{:.2}\" fill=\"#1f77b4\" fill-opacity=\"0.08\" stroke=\"#1f77b4\" stroke-width=\"0.4\"/>\n\
             <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.2\" fill=\"#d62728\"/>",
            r * scale
        );
    }
    s.push_str("</svg>\n");
    s
}
