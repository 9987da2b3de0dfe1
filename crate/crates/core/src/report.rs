//! Report rendering: EMP curve CSV, standalone SVG charts and the summary
//! document. Everything renders to strings; callers decide where to write.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::evalharness::ExperimentReport;
use crate::ranker::{FusionWeights, Setting};

/// `setting,n,emp,users` rows, settings in report order.
pub fn emp_curves_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("setting,n,emp,users\n");
    for r in &report.settings {
        for (i, e) in r.emp.iter().enumerate() {
            let _ = writeln!(out, "{},{},{:.6},{}", r.setting, i + 1, e, report.users_evaluated);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: Setting,
    pub emp_at_n: f64,
    pub weights: FusionWeights,
    pub validation_start_emp: Option<f64>,
    pub validation_tuned_emp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cutoff: chrono::NaiveDate,
    pub horizon: i64,
    pub n: usize,
    pub users_evaluated: usize,
    pub cold_users: usize,
    pub settings: Vec<SettingSummary>,
    /// Relative EMP@n improvement of full_with_r over jaccard.
    pub improvement_full_with_r_vs_jaccard: Option<f64>,
    /// Relative EMP@n improvement of full_with_r over opt_only.
    pub improvement_full_with_r_vs_opt_only: Option<f64>,
    pub improvement_full_with_r_vs_full_no_r: Option<f64>,
    pub inactive_recommendations: usize,
    pub peak_candidates: usize,
    pub mean_candidates: f64,
}

/// Summary at `n` (5 in the standard report).
pub fn summary(report: &ExperimentReport, n: usize) -> Summary {
    let rel = |b| report.relative_improvement(Setting::FullWithSeasonal, b, n);
    Summary {
        cutoff: report.cutoff,
        horizon: report.horizon,
        n,
        users_evaluated: report.users_evaluated,
        cold_users: report.cold_users,
        settings: report
            .settings
            .iter()
            .map(|r| SettingSummary {
                setting: r.setting,
                emp_at_n: r.emp.get(n.saturating_sub(1)).copied().unwrap_or(0.0),
                weights: r.weights,
                validation_start_emp: r.tuning.as_ref().map(|t| t.start_emp),
                validation_tuned_emp: r.tuning.as_ref().map(|t| t.tuned_emp),
            })
            .collect(),
        improvement_full_with_r_vs_jaccard: rel(Setting::Jaccard),
        improvement_full_with_r_vs_opt_only: rel(Setting::OptionOnly),
        improvement_full_with_r_vs_full_no_r: rel(Setting::FullNoSeasonal),
        inactive_recommendations: report.inactive_recommendations,
        peak_candidates: report.peak_candidates,
        mean_candidates: report.mean_candidates,
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 160.0, 40.0, 60.0); // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(points: impl Iterator<Item = (f64, f64)> + Clone, y_from_zero: bool) -> Self {
        let fold = |f: fn(f64, f64) -> f64, init, sel: fn(&(f64, f64)) -> f64| {
            points.clone().map(|p| sel(&p)).fold(init, f)
        };
        let mut x = (fold(f64::min, f64::INFINITY, |p| p.0), fold(f64::max, f64::NEG_INFINITY, |p| p.0));
        let mut y = (fold(f64::min, f64::INFINITY, |p| p.1), fold(f64::max, f64::NEG_INFINITY, |p| p.1));
        if !x.0.is_finite() {
            x = (0.0, 1.0);
            y = (0.0, 1.0);
        }
        if y_from_zero {
            y.0 = y.0.min(0.0);
        }
        if x.1 - x.0 <= 0.0 {
            x.1 = x.0 + 1.0;
        }
        if y.1 - y.0 <= 0.0 {
            y.1 = y.0 + 1.0;
        }
        Self { x, y }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN.0 + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN.0 - MARGIN.1)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN.3 - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - MARGIN.2 - MARGIN.3)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open_svg(out: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (WIDTH - MARGIN.1 + MARGIN.0) / 2.0,
        escape(title)
    );
    let (x0, x1) = (MARGIN.0, WIDTH - MARGIN.1);
    let (y0, y1) = (HEIGHT - MARGIN.3, MARGIN.2);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py + 4.0,
            tick(yv)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{x0}" y1="{py:.1}" x2="{x1}" y2="{py:.1}" stroke="#dddddd"/>"##
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 16.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v - v.round()).abs() < 1e-9 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Line chart of named series. The data table is embedded as a comment.
pub fn line_chart_svg(series: &[(String, Vec<(f64, f64)>)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let f = Frame::new(series.iter().flat_map(|(_, p)| p.iter().copied()), true);
    let mut out = String::new();
    open_svg(&mut out, title, xlabel, ylabel, &f);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", f.px(x), f.py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        let ly = MARGIN.2 + 20.0 + 20.0 * i as f64;
        let lx = WIDTH - MARGIN.1 + 15.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    out.push_str("<!-- data\nseries,x,y\n");
    for (name, pts) in series {
        for (x, y) in pts {
            let _ = writeln!(out, "{name},{x},{y:.6}");
        }
    }
    out.push_str("-->\n</svg>\n");
    out
}

/// Scatter plot with an identity reference line.
pub fn scatter_svg(points: &[(f64, f64)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let all = points.iter().flat_map(|&(x, y)| [(x, y), (y, x)]);
    let f = Frame::new(all, false);
    let mut out = String::new();
    open_svg(&mut out, title, xlabel, ylabel, &f);
    let lo = f.x.0.max(f.y.0);
    let hi = f.x.1.min(f.y.1);
    let _ = writeln!(
        out,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#999999" stroke-dasharray="4 3"/>"##,
        f.px(lo),
        f.py(lo),
        f.px(hi),
        f.py(hi)
    );
    for &(x, y) in points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{}" fill-opacity="0.6"/>"#,
            f.px(x),
            f.py(y),
            COLORS[0]
        );
    }
    out.push_str("<!-- data\nx,y\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y}");
    }
    out.push_str("-->\n</svg>\n");
    out
}

/// EMP@n curves, one line per setting.
pub fn emp_curves_svg(report: &ExperimentReport) -> String {
    let series: Vec<(String, Vec<(f64, f64)>)> = report
        .settings
        .iter()
        .map(|r| {
            (
                r.setting.to_string(),
                r.emp.iter().enumerate().map(|(i, &e)| ((i + 1) as f64, e)).collect(),
            )
        })
        .collect();
    line_chart_svg(&series, "EMP@n by setting", "n", "EMP@n")
}
