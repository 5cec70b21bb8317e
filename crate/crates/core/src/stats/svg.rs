use super::charts::histogram_bins;
use super::plot::{PlotKind, PlotOptions, PlotSpec, Series};
use super::summary::quantile_type7;
use super::{Result, StatsError};
use std::fmt::Write;

const PT_PER_IN: f64 = 72.0;

const VIRIDIS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];
const COOLWARM: [(f64, f64, f64); 3] = [(59.0, 76.0, 192.0), (221.0, 221.0, 221.0), (180.0, 4.0, 38.0)];
const GREYS: [(f64, f64, f64); 2] = [(255.0, 255.0, 255.0), (0.0, 0.0, 0.0)];

fn colour(map: &str, t: f64) -> String {
    let stops: &[(f64, f64, f64)] = match map {
        "coolwarm" | "RdBu_r" => &COOLWARM,
        "Greys" | "gray" | "grey" => &GREYS,
        _ => &VIRIDIS,
    };
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (stops.len() - 1) as f64;
    let i = (pos.floor() as usize).min(stops.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (stops[i], stops[i + 1]);
    let mix = |x: f64, y: f64| (x + f * (y - x)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn group_colour(map: &str, g: usize, n: usize) -> String {
    if n <= 1 {
        colour(map, 0.25)
    } else {
        colour(map, g as f64 / (n - 1) as f64 * 0.9)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn extent<'a>(vals: impl IntoIterator<Item = &'a f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi <= lo {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

#[derive(Clone, Copy)]
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xlo: f64,
    xhi: f64,
    ylo: f64,
    yhi: f64,
}

impl Frame {
    fn sx(&self, v: f64) -> f64 {
        self.x0 + (v - self.xlo) / (self.xhi - self.xlo) * self.w
    }
    fn sy(&self, v: f64) -> f64 {
        self.y0 + self.h - (v - self.ylo) / (self.yhi - self.ylo) * self.h
    }
}

struct Canvas<'a> {
    out: String,
    o: &'a PlotOptions,
}

impl<'a> Canvas<'a> {
    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, rotate: f64, s: &str, class: &str) {
        let rot = if rotate != 0.0 { format!(" transform=\"rotate({} {} {})\"", num(-rotate), num(x), num(y)) } else { String::new() };
        let _ = writeln!(
            self.out,
            "<text class=\"{class}\" x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"{anchor}\"{rot}>{}</text>",
            num(x),
            num(y),
            num(size),
            esc(s)
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, class: &str) {
        let _ = writeln!(
            self.out,
            "<rect class=\"{class}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"/>",
            num(x),
            num(y),
            num(w.max(0.0)),
            num(h.max(0.0))
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, class: &str) {
        let _ = writeln!(
            self.out,
            "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\"/>",
            num(x1),
            num(y1),
            num(x2),
            num(y2)
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(self.out, "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\"/>", num(x), num(y), num(r));
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, class: &str) {
        let p: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
        let _ = writeln!(self.out, "<polyline class=\"{class}\" points=\"{}\" fill=\"none\" stroke=\"{stroke}\"/>", p.join(" "));
    }

    /// Frame, grid, ticks and axis labels.
    fn axes(&mut self, f: &Frame, x_label: &str, y_label: &str, grid: bool) {
        let tick = self.o.tick_size;
        self.rect(f.x0, f.y0, f.w, f.h, "none\" stroke=\"#333333", "frame");
        for t in nice_ticks(f.xlo, f.xhi, 6) {
            let x = f.sx(t);
            if grid {
                self.line(x, f.y0, x, f.y0 + f.h, "#e5e5e5", "grid");
            }
            self.line(x, f.y0 + f.h, x, f.y0 + f.h + 4.0, "#333333", "tick");
            let rot = self.o.x_label_rotation;
            self.text(x, f.y0 + f.h + 6.0 + tick, tick, if rot != 0.0 { "end" } else { "middle" }, rot, &tick_label(t), "tick-label");
        }
        for t in nice_ticks(f.ylo, f.yhi, 6) {
            let y = f.sy(t);
            if grid {
                self.line(f.x0, y, f.x0 + f.w, y, "#e5e5e5", "grid");
            }
            self.line(f.x0 - 4.0, y, f.x0, y, "#333333", "tick");
            self.text(f.x0 - 6.0, y + tick / 3.0, tick, "end", self.o.y_label_rotation, &tick_label(t), "tick-label");
        }
        let ax = self.o.axis_font_size;
        if !x_label.is_empty() {
            self.text(f.x0 + f.w / 2.0, f.y0 + f.h + 2.5 * tick + 2.0 * ax, ax, "middle", 0.0, x_label, "axis-label");
        }
        if !y_label.is_empty() {
            let x = f.x0 - 4.0 * tick - ax;
            let y = f.y0 + f.h / 2.0;
            self.text(x, y, ax, "middle", 90.0, y_label, "axis-label");
        }
    }
}

fn need<'s>(spec: &'s PlotSpec, name: &str) -> Result<&'s [f64]> {
    spec.series(name)
        .and_then(Series::numbers)
        .ok_or_else(|| StatsError::Malformed(format!("{} plot needs a `{name}` series", spec.kind.as_str())))
}

fn groups(spec: &PlotSpec, n: usize) -> (Vec<usize>, Vec<String>) {
    match spec.series("group").or(spec.series("set")).and_then(Series::strings) {
        Some(l) if l.len() == n => {
            let mut names: Vec<String> = Vec::new();
            let idx = l
                .iter()
                .map(|s| match names.iter().position(|x| x == s) {
                    Some(i) => i,
                    None => {
                        names.push(s.clone());
                        names.len() - 1
                    }
                })
                .collect();
            (idx, names)
        }
        _ => (vec![0; n], Vec::new()),
    }
}

fn legend(c: &mut Canvas, f: &Frame, names: &[String], map: &str) {
    let fs = c.o.tick_size;
    for (g, name) in names.iter().enumerate() {
        let y = f.y0 + 8.0 + g as f64 * (fs + 4.0);
        let col = group_colour(map, g, names.len());
        c.rect(f.x0 + f.w - 90.0, y, fs * 0.8, fs * 0.8, &col, "legend-key");
        c.text(f.x0 + f.w - 90.0 + fs, y + fs * 0.8, fs, "start", 0.0, name, "legend");
    }
}

fn scatter(c: &mut Canvas, f: &Frame, xs: &[f64], ys: &[f64], g: &[usize], n_groups: usize, r: f64) {
    let map = c.o.colour_map.clone();
    for i in 0..xs.len().min(ys.len()) {
        let col = group_colour(&map, g.get(i).copied().unwrap_or(0), n_groups.max(1));
        c.circle(f.sx(xs[i]), f.sy(ys[i]), r, &col);
    }
}

fn bars(c: &mut Canvas, f: &Frame, edges: &[f64], counts: &[f64], fill: &str) {
    for (b, &cnt) in counts.iter().enumerate() {
        let (x1, x2) = (f.sx(edges[b]), f.sx(edges[b + 1]));
        let (ytop, ybase) = (f.sy(cnt), f.sy(0.0));
        c.rect(x1, ytop, x2 - x1, ybase - ytop, fill, "bar\" stroke=\"#ffffff");
    }
}

fn draw(c: &mut Canvas, spec: &PlotSpec, area: Frame) -> Result<()> {
    let map = c.o.colour_map.clone();
    match spec.kind {
        PlotKind::Histogram => {
            let edges = need(spec, "edges")?;
            let counts = need(spec, "counts")?;
            if edges.len() != counts.len() + 1 {
                return Err(StatsError::Malformed("histogram edges must be one longer than counts".into()));
            }
            let top = counts.iter().cloned().fold(0.0, f64::max).max(1.0) * 1.05;
            let f = Frame { xlo: edges[0], xhi: edges[edges.len() - 1], ylo: 0.0, yhi: top, ..area };
            c.axes(&f, &spec.x_label, &spec.y_label, true);
            bars(c, &f, edges, counts, &colour(&map, 0.35));
        }
        PlotKind::Heatmap => {
            let s = spec.series.iter().find(|s| matches!(s.data, super::SeriesData::Matrix { .. }))
                .ok_or_else(|| StatsError::Malformed("heatmap needs a matrix series".into()))?;
            let super::SeriesData::Matrix { rows, cols, values } = &s.data else { unreachable!() };
            let labels = spec.series("labels").and_then(Series::strings);
            let (lo, hi) = extent(values.iter());
            let (lo, hi) = if lo >= -1.05 && hi <= 1.05 { (-1.0, 1.0) } else { (lo, hi) };
            let (cw, ch) = (area.w / *cols as f64, area.h / *rows as f64);
            let fs = c.o.tick_size;
            for i in 0..*rows {
                for j in 0..*cols {
                    let v = values[i * cols + j];
                    let (x, y) = (area.x0 + j as f64 * cw, area.y0 + i as f64 * ch);
                    c.rect(x, y, cw, ch, &colour(&map, (v - lo) / (hi - lo)), "cell");
                    if *rows <= 20 {
                        c.text(x + cw / 2.0, y + ch / 2.0 + fs / 3.0, fs * 0.8, "middle", 0.0, &format!("{v:.2}"), "cell-value");
                    }
                }
            }
            if let Some(l) = labels {
                let rot = c.o.x_label_rotation;
                for (j, name) in l.iter().enumerate().take(*cols) {
                    let x = area.x0 + (j as f64 + 0.5) * cw;
                    c.text(x, area.y0 + area.h + fs + 4.0, fs, if rot != 0.0 { "end" } else { "middle" }, rot, name, "tick-label");
                }
                for (i, name) in l.iter().enumerate().take(*rows) {
                    let y = area.y0 + (i as f64 + 0.5) * ch + fs / 3.0;
                    c.text(area.x0 - 6.0, y, fs, "end", c.o.y_label_rotation, name, "tick-label");
                }
            }
            // colour bar
            let bx = area.x0 + area.w + 12.0;
            for k in 0..50 {
                let t = 1.0 - k as f64 / 50.0;
                c.rect(bx, area.y0 + k as f64 * area.h / 50.0, 12.0, area.h / 50.0 + 0.5, &colour(&map, t), "colourbar");
            }
            c.text(bx + 16.0, area.y0 + fs, fs, "start", 0.0, &tick_label(hi), "tick-label");
            c.text(bx + 16.0, area.y0 + area.h, fs, "start", 0.0, &tick_label(lo), "tick-label");
        }
        PlotKind::ScatterGrid => {
            let k = (spec.panels.len() as f64).sqrt().round() as usize;
            if k == 0 || k * k != spec.panels.len() {
                return Err(StatsError::Malformed("scatter grid needs k² panels".into()));
            }
            let gap = 8.0;
            let (pw, ph) = ((area.w - gap * (k - 1) as f64) / k as f64, (area.h - gap * (k - 1) as f64) / k as f64);
            let fs = c.o.tick_size;
            let fill = colour(&map, 0.35);
            for p in &spec.panels {
                let xs = need(spec, &p.x)?;
                let ys = need(spec, &p.y)?;
                let (x0, y0) = (area.x0 + p.col as f64 * (pw + gap), area.y0 + p.row as f64 * (ph + gap));
                let (xlo, xhi) = extent(xs.iter());
                c.rect(x0, y0, pw, ph, "none\" stroke=\"#333333", "frame");
                if p.kind == "histogram" {
                    let edges = histogram_bins(xs);
                    let mut counts = vec![0.0; edges.len() - 1];
                    let nb = counts.len();
                    let (lo, hi) = (edges[0], edges[nb]);
                    for &v in xs {
                        let b = (((v - lo) / (hi - lo)) * nb as f64).floor().max(0.0) as usize;
                        counts[b.min(nb - 1)] += 1.0;
                    }
                    let top = counts.iter().cloned().fold(1.0, f64::max) * 1.05;
                    let f = Frame { x0, y0, w: pw, h: ph, xlo: lo, xhi: hi, ylo: 0.0, yhi: top };
                    bars(c, &f, &edges, &counts, &fill);
                } else {
                    let (ylo, yhi) = extent(ys.iter());
                    let f = Frame { x0, y0, w: pw, h: ph, xlo, xhi, ylo, yhi };
                    scatter(c, &f, xs, ys, &[], 1, 1.5);
                }
                if p.row == k - 1 {
                    c.text(x0 + pw / 2.0, y0 + ph + fs + 4.0, fs, "middle", 0.0, &p.x, "axis-label");
                }
                if p.col == 0 {
                    c.text(x0 - 6.0, y0 + ph / 2.0, fs, "middle", 90.0, &p.y, "axis-label");
                }
            }
        }
        PlotKind::Scatter2d | PlotKind::Parity => {
            let (xname, yname) = if spec.kind == PlotKind::Parity { ("actual", "predicted") } else { ("x", "y") };
            let xs = need(spec, xname)?;
            let ys = need(spec, yname)?;
            if xs.len() != ys.len() {
                return Err(StatsError::Malformed("x and y differ in length".into()));
            }
            let (gidx, gnames) = groups(spec, xs.len());
            let f = if spec.kind == PlotKind::Parity {
                let (lo, hi) = extent(xs.iter().chain(ys.iter()));
                Frame { xlo: lo, xhi: hi, ylo: lo, yhi: hi, ..area }
            } else {
                let (xlo, xhi) = extent(xs.iter());
                let (ylo, yhi) = extent(ys.iter());
                Frame { xlo, xhi, ylo, yhi, ..area }
            };
            c.axes(&f, &spec.x_label, &spec.y_label, true);
            if spec.kind == PlotKind::Parity {
                c.line(f.sx(f.xlo), f.sy(f.ylo), f.sx(f.xhi), f.sy(f.yhi), "#d62728", "reference\" stroke-dasharray=\"6 4");
            }
            scatter(c, &f, xs, ys, &gidx, gnames.len(), 3.0);
            legend(c, &f, &gnames, &map);
        }
        PlotKind::Bar => {
            let values = need(spec, "values")?;
            let labels = spec.series("labels").and_then(Series::strings);
            let errors = spec.series("errors").and_then(Series::numbers);
            let lo = values.iter().zip(0..).map(|(v, i)| v - errors.map_or(0.0, |e| e[i])).fold(0.0, f64::min);
            let hi = values.iter().zip(0..).map(|(v, i)| v + errors.map_or(0.0, |e| e[i])).fold(0.0, f64::max);
            let pad = (hi - lo).max(1e-12) * 0.05;
            let n = values.len() as f64;
            let f = Frame { xlo: 0.0, xhi: n, ylo: lo - if lo < 0.0 { pad } else { 0.0 }, yhi: hi + pad, ..area };
            c.rect(f.x0, f.y0, f.w, f.h, "none\" stroke=\"#333333", "frame");
            for t in nice_ticks(f.ylo, f.yhi, 6) {
                let y = f.sy(t);
                c.line(f.x0, y, f.x0 + f.w, y, "#e5e5e5", "grid");
                c.text(f.x0 - 6.0, y + c.o.tick_size / 3.0, c.o.tick_size, "end", c.o.y_label_rotation, &tick_label(t), "tick-label");
            }
            let fill = colour(&map, 0.35);
            let fs = c.o.tick_size;
            let rot = c.o.x_label_rotation;
            for (i, &v) in values.iter().enumerate() {
                let (x1, x2) = (f.sx(i as f64 + 0.1), f.sx(i as f64 + 0.9));
                let (a, b) = (f.sy(v.max(0.0)), f.sy(v.min(0.0)));
                c.rect(x1, a, x2 - x1, b - a, &fill, "bar");
                let xm = (x1 + x2) / 2.0;
                if let Some(e) = errors {
                    c.line(xm, f.sy(v - e[i]), xm, f.sy(v + e[i]), "#333333", "error-bar");
                }
                if let Some(l) = labels.and_then(|l| l.get(i)) {
                    c.text(xm, f.y0 + f.h + fs + 4.0, fs, if rot != 0.0 { "end" } else { "middle" }, rot, l, "tick-label");
                }
            }
            let ax = c.o.axis_font_size;
            c.text(f.x0 - 4.0 * fs - ax, f.y0 + f.h / 2.0, ax, "middle", 90.0, &spec.y_label, "axis-label");
        }
        PlotKind::RocCurve => {
            let f = Frame { xlo: 0.0, xhi: 1.0, ylo: 0.0, yhi: 1.0, ..area };
            c.axes(&f, &spec.x_label, &spec.y_label, true);
            c.line(f.sx(0.0), f.sy(0.0), f.sx(1.0), f.sy(1.0), "#999999", "reference\" stroke-dasharray=\"6 4");
            let curves: Vec<(&str, &[f64])> = spec
                .series
                .iter()
                .filter_map(|s| s.name.strip_prefix("fpr").map(|suffix| (suffix, s)))
                .filter_map(|(suffix, s)| s.numbers().map(|v| (suffix, v)))
                .collect();
            if curves.is_empty() {
                return Err(StatsError::Malformed("roc_curve needs fpr/tpr series".into()));
            }
            let names: Vec<String> = curves.iter().map(|(s, _)| s.trim_start_matches('/').to_string()).collect();
            for (g, (suffix, fpr)) in curves.iter().enumerate() {
                let tpr = need(spec, &format!("tpr{suffix}"))?;
                let pts: Vec<(f64, f64)> = fpr.iter().zip(tpr).map(|(x, y)| (f.sx(*x), f.sy(*y))).collect();
                c.polyline(&pts, &group_colour(&map, g, curves.len()), "curve");
            }
            if names.iter().any(|n| !n.is_empty()) {
                legend(c, &f, &names, &map);
            }
        }
        PlotKind::Box => {
            let groups: Vec<&Series> = spec.series.iter().filter(|s| matches!(s.data, super::SeriesData::Vector { .. })).collect();
            let (lo, hi) = extent(groups.iter().flat_map(|s| s.numbers().unwrap().iter()));
            let f = Frame { xlo: 0.0, xhi: groups.len() as f64, ylo: lo, yhi: hi, ..area };
            c.rect(f.x0, f.y0, f.w, f.h, "none\" stroke=\"#333333", "frame");
            let fs = c.o.tick_size;
            for t in nice_ticks(lo, hi, 6) {
                c.text(f.x0 - 6.0, f.sy(t) + fs / 3.0, fs, "end", 0.0, &tick_label(t), "tick-label");
            }
            for (g, s) in groups.iter().enumerate() {
                let mut v = s.numbers().unwrap().to_vec();
                v.sort_by(f64::total_cmp);
                let q = |p| quantile_type7(&v, p);
                let (x1, x2) = (f.sx(g as f64 + 0.2), f.sx(g as f64 + 0.8));
                let xm = (x1 + x2) / 2.0;
                c.line(xm, f.sy(v[0]), xm, f.sy(v[v.len() - 1]), "#333333", "whisker");
                c.rect(x1, f.sy(q(0.75)), x2 - x1, f.sy(q(0.25)) - f.sy(q(0.75)), &group_colour(&map, g, groups.len()), "box");
                c.line(x1, f.sy(q(0.5)), x2, f.sy(q(0.5)), "#333333", "median");
                c.text(xm, f.y0 + f.h + fs + 4.0, fs, "middle", c.o.x_label_rotation, &s.name, "tick-label");
            }
        }
    }
    Ok(())
}

/// Deterministic SVG 1.1 document for a plot spec.
pub fn render_svg(spec: &PlotSpec) -> Result<Vec<u8>> {
    spec.validate()?;
    let o = &spec.options;
    let (w, h) = (o.width * PT_PER_IN, o.height * PT_PER_IN);
    let mut c = Canvas { out: String::new(), o };
    let _ = writeln!(c.out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        c.out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}in\" height=\"{}in\" viewBox=\"0 0 {} {}\" font-family=\"{}\" data-dpi=\"{}\" data-kind=\"{}\">",
        o.width,
        o.height,
        num(w),
        num(h),
        esc(&o.font_family),
        o.dpi,
        spec.kind.as_str()
    );
    c.rect(0.0, 0.0, w, h, "#ffffff", "background");
    c.text(w / 2.0, o.title_font_size * 1.5, o.title_font_size, "middle", 0.0, &spec.title, "title");
    let left = 5.0 * o.tick_size + 2.0 * o.axis_font_size + 10.0;
    let bottom = 4.0 * o.tick_size + 3.0 * o.axis_font_size + 10.0;
    let top = o.title_font_size * 2.5;
    let right = if spec.kind == PlotKind::Heatmap { 70.0 } else { 20.0 };
    let area = Frame {
        x0: left,
        y0: top,
        w: (w - left - right).max(10.0),
        h: (h - top - bottom).max(10.0),
        xlo: 0.0,
        xhi: 1.0,
        ylo: 0.0,
        yhi: 1.0,
    };
    draw(&mut c, spec, area)?;
    c.out.push_str("</svg>\n");
    Ok(c.out.into_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parity() -> PlotSpec {
        PlotSpec::new(PlotKind::Parity, "Parity", "Actual", "Predicted")
            .with_series(Series::vector("actual", vec![1.0, 2.0, 3.0]))
            .with_series(Series::vector("predicted", vec![1.1, 1.9, 3.2]))
            .with_series(Series::labels("set", vec!["train".into(), "train".into(), "test".into()]))
    }

    #[test]
    fn deterministic_and_parity_has_reference_line() {
        let a = render_svg(&parity()).unwrap();
        let b = render_svg(&parity()).unwrap();
        assert_eq!(a, b);
        let s = String::from_utf8(a).unwrap();
        assert!(s.contains("class=\"reference\""));
        assert!(s.contains("width=\"10in\""));
        assert!(s.contains("rotate(-45"));
    }

    #[test]
    fn empty_histogram_is_an_error() {
        let spec = PlotSpec::new(PlotKind::Histogram, "h", "x", "n")
            .with_series(Series::vector("edges", vec![]))
            .with_series(Series::vector("counts", vec![]));
        assert!(matches!(render_svg(&spec), Err(StatsError::EmptySeries(_))));
    }

    #[test]
    fn honours_font_options() {
        let mut spec = parity();
        spec.options.title_font_size = 21.0;
        spec.options.font_family = "serif".into();
        let s = String::from_utf8(render_svg(&spec).unwrap()).unwrap();
        assert!(s.contains("font-family=\"serif\""));
        assert!(s.contains("class=\"title\" x=\"360.00\" y=\"31.50\" font-size=\"21.00\""));
    }

    #[test]
    fn every_kind_renders() {
        let v = vec![0.1, 0.5, 0.9, 0.3];
        let specs = vec![
            PlotSpec::new(PlotKind::Histogram, "h", "x", "n")
                .with_series(Series::vector("edges", vec![0.0, 0.5, 1.0]))
                .with_series(Series::vector("counts", vec![2.0, 2.0])),
            PlotSpec::new(PlotKind::Heatmap, "m", "", "")
                .with_series(Series::matrix("correlation", 2, 2, vec![1.0, 0.2, 0.2, 1.0]))
                .with_series(Series::labels("labels", vec!["a".into(), "b".into()])),
            PlotSpec::new(PlotKind::Scatter2d, "s", "x", "y")
                .with_series(Series::vector("x", v.clone()))
                .with_series(Series::vector("y", v.clone())),
            PlotSpec::new(PlotKind::Bar, "b", "", "imp")
                .with_series(Series::vector("values", v.clone()))
                .with_series(Series::vector("errors", vec![0.01; 4])),
            PlotSpec::new(PlotKind::RocCurve, "r", "FPR", "TPR")
                .with_series(Series::vector("fpr", vec![0.0, 0.5, 1.0]))
                .with_series(Series::vector("tpr", vec![0.0, 0.8, 1.0])),
            PlotSpec::new(PlotKind::Box, "x", "", "").with_series(Series::vector("a", v)),
        ];
        for s in specs {
            let svg = String::from_utf8(render_svg(&s).unwrap()).unwrap();
            assert!(svg.ends_with("</svg>\n"), "{}", s.kind.as_str());
        }
    }
}
