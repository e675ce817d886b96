//! SVG line plots of the transformed step metric against trial budget.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rpmcts::aggregation::StrategyKind;

use crate::error::{BenchError, Result};
use crate::metrics::{strategy_order, CellSummary};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 80.0;

const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#7f7f7f"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Writes `<env>.svg` into `out_dir` for every environment in `cells`.
/// Missing (strategy, budget) cells leave gaps in the lines and produce a
/// warning.
pub fn emit_plots(cells: &[CellSummary], max_steps: &BTreeMap<String, usize>, out_dir: &Path) -> Result<PlotOutput> {
    if cells.is_empty() {
        return Err(BenchError::Runtime("no results to plot".into()));
    }
    let mut by_env: BTreeMap<&str, Vec<&CellSummary>> = BTreeMap::new();
    for c in cells {
        by_env.entry(&c.env).or_default().push(c);
    }
    let mut rendered = Vec::new();
    let mut warnings = Vec::new();
    for (env, group) in by_env {
        let limit = *max_steps
            .get(env)
            .ok_or_else(|| BenchError::Config(format!("no step limit known for '{env}'")))?;
        let (svg, mut warn) = render(env, &group, limit)?;
        rendered.push((out_dir.join(format!("{env}.svg")), svg));
        warnings.append(&mut warn);
    }
    std::fs::create_dir_all(out_dir)?;
    for (path, svg) in &rendered {
        std::fs::write(path, svg)?;
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(PlotOutput { files: rendered.into_iter().map(|(p, _)| p).collect(), warnings })
}

fn render(env: &str, cells: &[&CellSummary], limit: usize) -> Result<(String, Vec<String>)> {
    let budgets: Vec<usize> = cells.iter().map(|c| c.trial_budget).collect::<BTreeSet<_>>().into_iter().collect();
    let mut series: BTreeMap<usize, BTreeMap<usize, &CellSummary>> = BTreeMap::new();
    for c in cells {
        series.entry(strategy_order(&c.strategy)?).or_default().insert(c.trial_budget, c);
    }
    let mut warnings = Vec::new();
    for (order, points) in &series {
        for b in budgets.iter().filter(|b| !points.contains_key(b)) {
            warnings.push(format!("{env}: no results for {} at budget {b}", StrategyKind::ALL[*order]));
        }
    }

    let value = |c: &CellSummary| limit as f64 - c.steps.mean;
    let (lo, hi) = cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
        (lo.min(limit as f64 - c.steps.ci_high), hi.max(limit as f64 - c.steps.ci_low))
    });
    let (lo, hi) = if hi - lo < 1e-9 { (lo - 1.0, hi + 1.0) } else { (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)) };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |b: usize| {
        let i = budgets.iter().position(|x| *x == b).unwrap() as f64;
        if budgets.len() == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i / (budgets.len() - 1) as f64
        }
    };
    let y_of = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{env}</text>"#, LEFT + plot_w / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT, LEFT + plot_w);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, LEFT - 6.0, y + 4.0);
    }
    for &b in &budgets {
        let x = x_of(b);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{b}</text>"#, TOP + plot_h + 18.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">trials per worker</text>"#,
        LEFT + plot_w / 2.0,
        TOP + plot_h + 38.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{limit} - steps (mean, 95% CI)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(
        s,
        r##"<text x="{LEFT}" y="{:.2}" fill="#555555">metric: {limit} (max episode steps) minus steps to finish; higher is better</text>"##,
        HEIGHT - 10.0
    );

    for (row, (order, points)) in series.iter().enumerate() {
        let color = COLORS[*order];
        // Contiguous runs of budgets with data.
        let mut runs: Vec<Vec<&CellSummary>> = vec![Vec::new()];
        for b in &budgets {
            match points.get(b) {
                Some(c) => runs.last_mut().unwrap().push(c),
                None if !runs.last().unwrap().is_empty() => runs.push(Vec::new()),
                None => {}
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            if run.len() == 1 {
                let c = run[0];
                let x = x_of(c.trial_budget);
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    y_of(limit as f64 - c.steps.ci_low),
                    y_of(limit as f64 - c.steps.ci_high)
                );
            } else {
                let upper = run.iter().map(|c| format!("{:.2},{:.2}", x_of(c.trial_budget), y_of(limit as f64 - c.steps.ci_low)));
                let lower = run.iter().rev().map(|c| format!("{:.2},{:.2}", x_of(c.trial_budget), y_of(limit as f64 - c.steps.ci_high)));
                let band: Vec<String> = upper.chain(lower).collect();
                let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
                let line: Vec<String> = run.iter().map(|c| format!("{:.2},{:.2}", x_of(c.trial_budget), y_of(value(c)))).collect();
                let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
            }
            for c in run {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    x_of(c.trial_budget),
                    y_of(value(c))
                );
            }
        }
        let ly = TOP + 10.0 + 20.0 * row as f64;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 26.0, ly + 4.0, StrategyKind::ALL[*order]);
    }
    s.push_str("</svg>\n");
    Ok((s, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::steps_metric;

    fn cell(strategy: &str, budget: usize, steps: &[usize]) -> CellSummary {
        CellSummary {
            env: "narrow_corridor".into(),
            strategy: strategy.into(),
            trial_budget: budget,
            steps: steps_metric(steps, 50).unwrap(),
            success_rate: 1.0,
            mean_return: 0.0,
            mean_inference_seconds: 0.0,
            mean_total_seconds: 0.0,
        }
    }

    fn limits() -> BTreeMap<String, usize> {
        [("narrow_corridor".to_string(), 50)].into_iter().collect()
    }

    #[test]
    fn empty_input_writes_nothing() {
        let dir = std::env::temp_dir().join(format!("rpmcts-plot-empty-{}", std::process::id()));
        assert!(emit_plots(&[], &limits(), &dir).is_err());
        assert!(!dir.exists());
    }

    #[test]
    fn single_point_has_whisker() {
        let (svg, warnings) = render("narrow_corridor", &[&cell("gpr2p", 15, &[10, 14])], 50).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("<polyline"));
        assert!(svg.contains("max episode steps"));
    }

    #[test]
    fn gaps_warn_and_legend_order_is_fixed() {
        let cells = [cell("single_thread", 15, &[20]), cell("gpr2p", 15, &[10]), cell("gpr2p", 30, &[9]), cell("gpr2p", 60, &[8]), cell("single_thread", 60, &[15])];
        let refs: Vec<&CellSummary> = cells.iter().collect();
        let (svg, warnings) = render("narrow_corridor", &refs, 50).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("single_thread") && warnings[0].contains("30"));
        assert!(svg.find(">gpr2p<").unwrap() < svg.find(">single_thread<").unwrap());
        let (again, _) = render("narrow_corridor", &refs, 50).unwrap();
        assert_eq!(svg, again);
    }
}
