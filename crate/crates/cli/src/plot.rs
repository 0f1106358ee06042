//! SVG line and bar charts for traces, spectra and support reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::run::{trace_files, CellTrace};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Log scale when the positive values span at least three decades.
pub fn wants_log(values: impl IntoIterator<Item = f64>) -> bool {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for v in values {
        if v > 0.0 && v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    hi > 0.0 && hi / lo >= 1e3
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(values: &[f64], log: bool, from: f64, to: f64) -> Self {
        let vals: Vec<f64> = values
            .iter()
            .copied()
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(|v| if log { v.log10() } else { v })
            .collect();
        let (mut lo, mut hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { log, lo, hi, from, to }
    }

    fn map(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut out = Vec::new();
            let mut e = self.lo;
            while e <= self.hi + 1e-9 {
                out.push((10f64.powf(e), format!("1e{}", e as i64)));
                e += step;
            }
            out
        } else {
            (0..=4)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let xs: Vec<f64> = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
        let ys: Vec<f64> = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).collect();
        let x_axis = Axis::new(&xs, wants_log(xs.iter().copied()), LEFT, WIDTH - RIGHT);
        let y_axis = Axis::new(&ys, wants_log(ys.iter().copied()), HEIGHT - BOTTOM, TOP);
        let mut svg = header(&self.title);
        frame(&mut svg, &x_axis, &y_axis, &self.x_label, &self.y_label);
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter_map(|&(x, y)| Some(format!("{:.2},{:.2}", x_axis.map(x)?, y_axis.map(y)?)))
                .collect();
            if pts.len() == 1 {
                let (x, y) = pts[0].split_once(',').expect("formatted pair");
                let _ = writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
            } else if !pts.is_empty() {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    pts.join(" ")
                );
            }
            legend(&mut svg, i, color, &s.name);
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn header(title: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    )
}

fn frame(svg: &mut String, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        svg,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for (v, label) in x.ticks() {
        if let Some(px) = x.map(v) {
            let _ = writeln!(svg, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/>"#, y0 + 4.0);
            let _ = writeln!(svg, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{label}</text>"#, y0 + 16.0);
        }
    }
    for (v, label) in y.ticks() {
        if let Some(py) = y.map(v) {
            let _ = writeln!(svg, r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 4.0);
            let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, x0 - 6.0, py + 4.0);
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(svg: &mut String, i: usize, color: &str, name: &str) {
    let y = TOP + 14.0 * i as f64 + 8.0;
    let x = WIDTH - RIGHT + 10.0;
    let _ = writeln!(svg, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 8.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(name));
}

/// Grouped bars, one group per category.
#[derive(Clone, Debug, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub categories: Vec<String>,
    pub groups: Vec<(String, Vec<f64>)>,
}

impl BarChart {
    pub fn render(&self) -> String {
        let max = self.groups.iter().flat_map(|g| g.1.iter().copied()).fold(0.0f64, f64::max).max(1e-300);
        let y = Axis { log: false, lo: 0.0, hi: max, from: HEIGHT - BOTTOM, to: TOP };
        let mut svg = header(&self.title);
        let (x0, x1, y0) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM);
        let _ = writeln!(
            svg,
            r#"<rect x="{x0}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - TOP
        );
        for (v, label) in y.ticks() {
            let py = y.map(v).unwrap_or(y0);
            let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, x0 - 6.0, py + 4.0);
        }
        let n_cat = self.categories.len().max(1) as f64;
        let slot = (x1 - x0) / n_cat;
        let bar = slot * 0.8 / self.groups.len().max(1) as f64;
        for (c, cat) in self.categories.iter().enumerate() {
            let cx = x0 + slot * (c as f64 + 0.1);
            for (g, (_, vals)) in self.groups.iter().enumerate() {
                let v = vals.get(c).copied().unwrap_or(0.0).max(0.0);
                let top = y.map(v).unwrap_or(y0);
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.2}" y="{top:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
                    cx + bar * g as f64,
                    y0 - top,
                    COLORS[g % COLORS.len()]
                );
            }
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
                x0 + slot * (c as f64 + 0.5),
                y0 + 16.0,
                escape(cat)
            );
        }
        for (g, (name, _)) in self.groups.iter().enumerate() {
            legend(&mut svg, g, COLORS[g % COLORS.len()], name);
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn mse_plots(dir: &Path, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let traces = dir.join("traces");
    let files = match trace_files(&traces) {
        Ok(f) => f,
        Err(_) => {
            log::warn!("no traces under {}; skipping MSE plots", traces.display());
            return Ok(());
        }
    };
    let mut groups: BTreeMap<(String, usize, u64), Vec<Series>> = BTreeMap::new();
    for path in files {
        let cell: CellTrace =
            match fs::read_to_string(&path).map_err(anyhow::Error::from).and_then(|t| Ok(serde_json::from_str(&t)?)) {
                Ok(c) => c,
                Err(e) => {
                    log::warn!("skipping unreadable trace {}: {e:#}", path.display());
                    continue;
                }
            };
        let r = &cell.record;
        let name = if r.winner.p > 0.0 { format!("{} p={}", r.method, r.winner.p) } else { r.method.to_string() };
        let points = r.steps.iter().map(|s| (s.n_active as f64, s.test_mse.unwrap_or(s.val_mse))).collect();
        groups.entry((cell.function.clone(), r.config.q, r.config.seed)).or_default().push(Series { name, points });
    }
    for ((function, q, seed), series) in groups {
        let plot = LinePlot {
            title: format!("{function}, q={q}, seed {seed}"),
            x_label: "active features".into(),
            y_label: "test MSE".into(),
            series,
        };
        let path = out.join(format!("mse_{function}_q{q}_s{seed}.svg"));
        fs::write(&path, plot.render())?;
        written.push(path);
    }
    Ok(())
}

fn diagnostic_plots(dir: &Path, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let diag = dir.join("diagnostics");
    let Ok(entries) = fs::read_dir(&diag) else {
        return Ok(());
    };
    let mut files: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    files.sort();
    for path in files {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let result = if let Some(base) = stem.strip_suffix("_spectrum") {
            spectrum_plot(&path, base)
        } else if let Some(base) = stem.strip_suffix("_support") {
            support_plot(&path, base)
        } else {
            continue;
        };
        match result {
            Ok(svg) => {
                let target = out.join(format!("{stem}.svg"));
                fs::write(&target, svg)?;
                written.push(target);
            }
            Err(e) => log::warn!("skipping {}: {e:#}", path.display()),
        }
    }
    Ok(())
}

fn spectrum_plot(path: &Path, base: &str) -> Result<String> {
    let mut r = csv::Reader::from_path(path)?;
    let (mut hi, mut lo) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let n: f64 = rec[2].parse()?;
        hi.push((n, rec[3].parse()?));
        lo.push((n, rec[4].parse()?));
    }
    Ok(LinePlot {
        title: format!("{base}: Gram spectrum"),
        x_label: "active features".into(),
        y_label: "eigenvalue / N_t".into(),
        series: vec![
            Series { name: "lambda_max".into(), points: hi },
            Series { name: "lambda_min".into(), points: lo },
        ],
    }
    .render())
}

fn support_plot(path: &Path, base: &str) -> Result<String> {
    let mut r = csv::Reader::from_path(path)?;
    let (mut cats, mut cos, mut sin) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        cats.push(format!("x{}", &rec[0]));
        cos.push(rec[1].parse()?);
        sin.push(rec[2].parse()?);
    }
    Ok(BarChart {
        title: format!("{base}: coefficient mass"),
        categories: cats,
        groups: vec![("cos".into(), cos), ("sin".into(), sin)],
    }
    .render())
}

/// Render every trace group, spectrum and support report under `dir` into `dir/plots`.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let out = dir.join("plots");
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    mse_plots(dir, &out, &mut written)?;
    diagnostic_plots(dir, &out, &mut written)?;
    Ok(written)
}
