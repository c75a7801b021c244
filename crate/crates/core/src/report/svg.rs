//! Minimal static SVG charts: scatter, line, bar and heatmap.
//!
//! Output is a pure function of the inputs except for an optional
//! `<!-- generated: ... -->` comment carrying a timestamp.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 480.0;
const ML: f64 = 70.0;
const MR: f64 = 160.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#ad494a",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(title: &str, stamp: Option<&str>, w: f64, h: f64) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    if let Some(t) = stamp {
        let _ = writeln!(s, "<!-- generated: {} -->", esc(t));
    }
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>", w / 2.0, esc(title));
    s
}

/// Linear map of `[lo, hi]` onto `[a, b]`; degenerate ranges map to the middle.
struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, a: f64, b: f64) -> Scale {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Scale { lo, hi, a, b }
    }

    fn fixed(lo: f64, hi: f64, a: f64, b: f64) -> Scale {
        Scale { lo, hi, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }
}

fn axes(s: &mut String, xs: &Scale, ys: &Scale, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (ML, W - MR, H - MB, MT);
    let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>");
    let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>");
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let xv = xs.lo + f * (xs.hi - xs.lo);
        let yv = ys.lo + f * (ys.hi - ys.lo);
        let (px, py) = (xs.map(xv), ys.map(yv));
        let _ = writeln!(s, "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", y0 + 16.0, tick(xv));
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", x0 - 6.0, py + 4.0, tick(yv));
    }
    let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", (x0 + x1) / 2.0, H - 12.0, esc(xlabel));
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(s: &mut String, entries: &[(String, &str)]) {
    let x = W - MR + 12.0;
    for (i, (name, col)) in entries.iter().enumerate().take(30) {
        let y = MT + 14.0 * i as f64;
        let _ = writeln!(s, "<rect x=\"{x}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{col}\"/>", y);
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\">{}</text>", x + 14.0, y + 9.0, esc(name));
    }
}

/// Point colors for [`scatter`].
pub enum Coloring<'a> {
    /// Category per point; `None` is drawn in light gray.
    Categories(&'a [Option<String>]),
    /// Continuous value per point on a blue to red ramp.
    Values(&'a [f64]),
}

fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (40.0 + 200.0 * t) as u8;
    let b = (240.0 - 200.0 * t) as u8;
    format!("#{r:02x}50{b:02x}")
}

pub fn scatter(title: &str, x: &[f64], y: &[f64], coloring: Coloring<'_>, stamp: Option<&str>) -> String {
    let mut s = header(title, stamp, W, H);
    let xs = Scale::new(x.iter().copied(), ML + 5.0, W - MR - 5.0);
    let ys = Scale::new(y.iter().copied(), H - MB - 5.0, MT + 5.0);
    axes(&mut s, &xs, &ys, "dim 1", "dim 2");
    match coloring {
        Coloring::Categories(cats) => {
            let mut names: Vec<&str> = cats.iter().flatten().map(String::as_str).collect();
            names.sort_unstable();
            names.dedup();
            // untagged points first so tagged ones are drawn on top
            let mut order: Vec<usize> = (0..x.len()).collect();
            order.sort_by_key(|&i| cats[i].is_some());
            for i in order {
                let col = match &cats[i] {
                    Some(c) => color(names.binary_search(&c.as_str()).unwrap_or(0)),
                    None => "#dddddd",
                };
                let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{col}\"/>", xs.map(x[i]), ys.map(y[i]));
            }
            let entries: Vec<(String, &str)> = names.iter().enumerate().map(|(i, n)| (n.to_string(), color(i))).collect();
            legend(&mut s, &entries);
        }
        Coloring::Values(vals) => {
            let vs = Scale::new(vals.iter().copied(), 0.0, 1.0);
            for i in 0..x.len() {
                let _ = writeln!(
                    s,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{}\"/>",
                    xs.map(x[i]),
                    ys.map(y[i]),
                    ramp(vs.map(vals[i]))
                );
            }
            legend(&mut s, &[(tick(vs.lo), "#2850f0"), (tick(vs.hi), "#f05028")]);
        }
    }
    s.push_str("</svg>\n");
    s
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], y_range: Option<(f64, f64)>, stamp: Option<&str>) -> String {
    let mut s = header(title, stamp, W, H);
    let xs = Scale::new(series.iter().flat_map(|p| p.points.iter().map(|q| q.0)), ML + 10.0, W - MR - 10.0);
    let ys = match y_range {
        Some((lo, hi)) => Scale::fixed(lo, hi, H - MB - 5.0, MT + 5.0),
        None => Scale::new(series.iter().flat_map(|p| p.points.iter().map(|q| q.1)), H - MB - 5.0, MT + 5.0),
    };
    axes(&mut s, &xs, &ys, xlabel, ylabel);
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", xs.map(x), ys.map(y)))
            .collect();
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>", pts.join(" "), color(i));
        for p in &pts {
            let (cx, cy) = p.split_once(',').expect("pair");
            let _ = writeln!(s, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"2.5\" fill=\"{}\"/>", color(i));
        }
    }
    let entries: Vec<(String, &str)> = series.iter().enumerate().map(|(i, p)| (p.name.clone(), color(i))).collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}

pub fn bar_chart(title: &str, ylabel: &str, bars: &[(String, f64)], y_range: (f64, f64), stamp: Option<&str>) -> String {
    let mut s = header(title, stamp, W, H);
    let ys = Scale::fixed(y_range.0, y_range.1, H - MB, MT + 5.0);
    let xs = Scale::fixed(0.0, bars.len().max(1) as f64, ML, W - MR);
    axes(&mut s, &xs, &ys, "", ylabel);
    let width = (W - MR - ML) / bars.len().max(1) as f64;
    for (i, (name, v)) in bars.iter().enumerate() {
        let top = ys.map(v.clamp(y_range.0, y_range.1));
        let x = ML + width * i as f64 + width * 0.1;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
            width * 0.8,
            (H - MB - top).max(0.0),
            color(i)
        );
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", x + width * 0.4, top - 4.0, tick(*v));
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", x + width * 0.4, H - MB + 30.0, esc(name));
    }
    s.push_str("</svg>\n");
    s
}

/// Square heatmap of `value(i, j)` for `i, j` in `order`, in `[0, 1]`.
/// When `order` exceeds `cap` rows it is thinned evenly.
pub fn heatmap(title: &str, n_order: &[usize], value: impl Fn(usize, usize) -> f64, cap: usize, stamp: Option<&str>) -> String {
    let rows: Vec<usize> = if n_order.len() > cap && cap > 0 {
        (0..cap).map(|i| n_order[i * n_order.len() / cap]).collect()
    } else {
        n_order.to_vec()
    };
    let side = 560.0;
    let mut s = header(title, stamp, side + 60.0, side + 60.0);
    let m = rows.len().max(1);
    let cell = side / m as f64;
    let _ = writeln!(s, "<g transform=\"translate(30,40)\">");
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in rows.iter().enumerate() {
            let v = value(i, j).clamp(0.0, 1.0);
            let g = (255.0 * (1.0 - v)) as u8;
            let _ = writeln!(
                s,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"#{g:02x}{g:02x}ff\"/>",
                b as f64 * cell,
                a as f64 * cell,
                cell,
                cell
            );
        }
    }
    s.push_str("</g>\n</svg>\n");
    s
}
