//! SVG line plots of the aggregate: cumulative regret with a standard-error
//! band, and surviving wrong scopes per structure-learning variant.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fmdp_core::agents::Algorithm;
use fmdp_core::environments::EnvSpec;

use crate::aggregate::{AggregateRow, AGGREGATE_FILE};
use crate::config::AgentSpec;
use crate::error::{HarnessError, Result};
use crate::experiment::RunManifest;
use crate::files::{read_csv, write_atomic};

pub const REGRET_SVG: &str = "regret.svg";
pub const WRONG_SCOPES_SVG: &str = "wrong_scopes.svg";

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const W: f64 = 760.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.0 {
        2.0
    } else if f < 7.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{}k", v / 1e3)
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Figure {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut x1 = f64::NEG_INFINITY;
        let (mut y0, mut y1) = (0.0f64, f64::NEG_INFINITY);
        for s in &self.series {
            for i in 0..s.x.len() {
                x1 = x1.max(s.x[i]);
                y0 = y0.min(s.mean[i] - s.se[i]);
                y1 = y1.max(s.mean[i] + s.se[i]);
            }
        }
        if !x1.is_finite() || x1 <= 0.0 {
            x1 = 1.0;
        }
        if !y1.is_finite() || y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let sy = nice_step(y1 - y0);
        (0.0, x1, (y0 / sy).floor() * sy, (y1 / sy).ceil() * sy)
    }

    pub fn to_svg(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let sx = nice_step(x1 - x0);
        let mut t = x0;
        while t <= x1 + 1e-9 * sx {
            let _ = writeln!(
                o,
                r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#ddd"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"##,
                px(t),
                TOP,
                TOP + ph,
                TOP + ph + 18.0,
                tick_label(t)
            );
            t += sx;
        }
        let sy = nice_step(y1 - y0);
        let mut t = y0;
        while t <= y1 + 1e-9 * sy {
            let _ = writeln!(
                o,
                r##"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="#ddd"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"##,
                LEFT,
                py(t),
                LEFT + pw,
                LEFT - 6.0,
                py(t) + 4.0,
                tick_label(t)
            );
            t += sy;
        }
        let _ = writeln!(
            o,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            o,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text transform="translate(20 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, s) in self.series.iter().enumerate() {
            let c = PALETTE[k % PALETTE.len()];
            let upper = s.x.iter().zip(&s.mean).zip(&s.se).map(|((&x, &m), &e)| (x, m + e));
            let lower = s.x.iter().zip(&s.mean).zip(&s.se).rev().map(|((&x, &m), &e)| (x, m - e));
            let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let line: Vec<String> = s.x.iter().zip(&s.mean).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(o, r#"<polygon points="{}" fill="{c}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
            let _ = writeln!(o, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.8"/>"#, line.join(" "));
            let ly = TOP + 10.0 + 20.0 * k as f64;
            let lx = LEFT + pw + 14.0;
            let _ = writeln!(
                o,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
                lx + 22.0,
                lx + 28.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        o.push_str("</svg>\n");
        o
    }
}

fn state_factors(dir: &Path) -> Option<usize> {
    let m = RunManifest::load(dir).ok()?;
    let built = m.config.env.parse::<EnvSpec>().ok()?.build().ok()?;
    Some(built.transition_scopes.len())
}

fn group(rows: &[AggregateRow]) -> Vec<(String, Vec<&AggregateRow>)> {
    let mut out: Vec<(String, Vec<&AggregateRow>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(a, _)| *a == r.agent) {
            Some((_, v)) => v.push(r),
            None => out.push((r.agent.clone(), vec![r])),
        }
    }
    out
}

/// The two figures for an aggregate table.
pub fn figures(rows: &[AggregateRow], num_factors: Option<usize>) -> Result<(Figure, Figure)> {
    if rows.is_empty() {
        return Err(HarnessError::Format("aggregate has no rows".into()));
    }
    let mut regret = Figure {
        title: "Cumulative regret".into(),
        x_label: "time steps".into(),
        y_label: "cumulative regret".into(),
        series: Vec::new(),
    };
    let mut wrong = Figure {
        title: "Surviving wrong scopes".into(),
        x_label: "time steps".into(),
        y_label: "# wrong scopes".into(),
        series: Vec::new(),
    };
    for (agent, rs) in group(rows) {
        let spec: AgentSpec = agent.parse()?;
        let name = spec.display_name(num_factors);
        let x: Vec<f64> = rs.iter().map(|r| r.t as f64).collect();
        regret.series.push(Series {
            name: name.clone(),
            x: x.clone(),
            mean: rs.iter().map(|r| r.regret_mean).collect(),
            se: rs.iter().map(|r| r.regret_se).collect(),
        });
        if spec.algorithm == Algorithm::SlfUcrl && rs.iter().all(|r| r.wrong_mean.is_some()) {
            wrong.series.push(Series {
                name,
                x,
                mean: rs.iter().map(|r| r.wrong_mean.unwrap()).collect(),
                se: rs.iter().map(|r| r.wrong_se.unwrap_or(0.0)).collect(),
            });
        }
    }
    Ok((regret, wrong))
}

/// Render both SVGs into `dir`; nothing is written unless both render.
pub fn render_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let rows: Vec<AggregateRow> = read_csv(&dir.join(AGGREGATE_FILE))?;
    let (regret, wrong) = figures(&rows, state_factors(dir))?;
    let out = vec![dir.join(REGRET_SVG), dir.join(WRONG_SCOPES_SVG)];
    let svgs = [regret.to_svg(), wrong.to_svg()];
    for (path, svg) in out.iter().zip(&svgs) {
        write_atomic(path, svg.as_bytes())?;
    }
    Ok(out)
}
