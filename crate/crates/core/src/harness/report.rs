use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{RunReport, SweepRow};
use crate::bandit::theoretical_regret_bound;
use crate::error::{Error, Result};

/// Files written by [`write_outputs`].
pub const REPORT_FILES: [&str; 5] = ["records.csv", "regret.csv", "revenue_stages.csv", "summary.csv", "report.txt"];

/// Reference regret curve with unit constant at round `t` (evaluated at 2 for `t < 2`).
pub fn regret_bound_shape(t: usize, batch: usize, zooming_dim: u32) -> Result<f64> {
    theoretical_regret_bound(t.max(2) as f64, batch as u32, zooming_dim, 1.0)
}

/// Least-squares constant `C` of `curve ~ C * shape` over the second half.
pub fn fit_bound_constant(curve: &[f64], shape: &[f64]) -> f64 {
    let n = curve.len().min(shape.len());
    let (mut num, mut den) = (0.0, 0.0);
    for t in n / 2..n {
        num += curve[t] * shape[t];
        den += shape[t] * shape[t];
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn write_records_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record([
        "round",
        "strategy",
        "x0",
        "x1",
        "x2",
        "forecast",
        "bid",
        "spot_price",
        "dispatch",
        "imbalance_price",
        "generation",
        "revenue",
        "reward",
        "regret",
    ])
    .map_err(err)?;
    for r in &report.records {
        let o = &r.outcome;
        w.write_record([
            r.round.to_string(),
            r.strategy.clone(),
            num(r.context[0]),
            num(r.context[1]),
            num(r.context[2]),
            num(r.forecast),
            num(r.bid),
            num(o.spot_price),
            num(o.dispatch),
            num(o.imbalance_price),
            num(o.generation),
            num(o.revenue),
            num(r.reward),
            r.regret.map(num).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_regret_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["t", "series", "value"]).map_err(err)?;
    if let Some(r) = &report.regret {
        let bound = ("bound".to_string(), r.bound.clone());
        for (name, values) in r.series.iter().chain(std::iter::once(&bound)) {
            for (t, v) in values.iter().enumerate() {
                w.write_record([(t + 1).to_string(), name.clone(), num(*v)]).map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_stages_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["strategy", "market_stage", "avg_revenue"]).map_err(err)?;
    for s in &report.strategies {
        let n = s.decisions.max(1) as f64;
        w.write_record([s.name.as_str(), "day_ahead", &num(s.day_ahead_revenue / n)]).map_err(err)?;
        w.write_record([s.name.as_str(), "real_time", &num(s.real_time_revenue / n)]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn forecast_revenue(report: &RunReport) -> Option<f64> {
    report.strategy("forecast").map(|s| s.revenue)
}

fn write_summary_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record([
        "strategy",
        "auctions",
        "cumulative_revenue",
        "avg_revenue",
        "avg_revenue_half",
        "gain_vs_forecast_pct",
        "reward_clipped",
        "mean_decision_ms",
        "avg_regret",
    ])
    .map_err(err)?;
    let base = forecast_revenue(report);
    for s in &report.strategies {
        let gain = base.filter(|b| *b != 0.0).map(|b| 100.0 * (s.revenue - b) / b.abs());
        w.write_record([
            s.name.clone(),
            s.decisions.to_string(),
            num(s.revenue),
            num(s.avg_revenue()),
            num(s.avg_half_revenue()),
            gain.map(num).unwrap_or_default(),
            s.clipped.to_string(),
            num(s.mean_decision_time().as_secs_f64() * 1e3),
            s.cumulative_regret.map(|r| num(r / s.decisions.max(1) as f64)).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn report_text(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed {}  auctions {}  batch {}  wall time {:.1?}", report.seed, report.rounds, report.batch, report.elapsed);
    let base = forecast_revenue(report);
    let _ = writeln!(out, "\n{:<14}{:>18}{:>14}{:>12}{:>10}{:>12}", "strategy", "revenue", "avg/auction", "vs fcst %", "clipped", "ms/bid");
    for s in &report.strategies {
        let gain = base
            .filter(|b| *b != 0.0)
            .map(|b| format!("{:.3}", 100.0 * (s.revenue - b) / b.abs()))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<14}{:>18.0}{:>14.2}{:>12}{:>10}{:>12.4}",
            s.name,
            s.revenue,
            s.avg_revenue(),
            gain,
            s.clipped,
            s.mean_decision_time().as_secs_f64() * 1e3
        );
    }
    match &report.regret {
        Some(r) => {
            let _ = writeln!(
                out,
                "\nregret oracle: {} pooled auctions, {} filled context cells, mean standard error of mu* {:.5}",
                r.pool_size, r.filled_cells, r.mean_std_error
            );
            let fitted = r.fitted_to.as_deref().map(|n| format!(" (fitted to {n})")).unwrap_or_default();
            let _ = writeln!(out, "bound constant C = {:.5}{fitted}", r.bound_constant);
            for (name, v) in &r.series {
                let at = |k: usize| v.get(k.saturating_sub(1)).copied().unwrap_or(f64::NAN);
                let t = v.len();
                let _ = writeln!(out, "{name:<14} R(t)/t at T/8 {:.5}  T/2 {:.5}  T {:.5}", at(t / 8), at(t / 2), at(t));
            }
        }
        None => {
            let _ = writeln!(out, "\nno regret series");
        }
    }
    for note in &report.notes {
        let _ = writeln!(out, "note: {note}");
    }
    out
}

/// Writes every per-run output into `dir`.
pub fn write_outputs(dir: &Path, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_records_csv(&dir.join(REPORT_FILES[0]), report)?;
    write_regret_csv(&dir.join(REPORT_FILES[1]), report)?;
    write_stages_csv(&dir.join(REPORT_FILES[2]), report)?;
    write_summary_csv(&dir.join(REPORT_FILES[3]), report)?;
    let path = dir.join(REPORT_FILES[4]);
    fs::write(&path, report_text(report)).map_err(|e| Error::io(&path, e))
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["param", "value", "strategy", "avg_revenue", "avg_revenue_half", "std_error", "runs", "status"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.param.clone(),
            num(r.value),
            r.strategy.clone(),
            num(r.avg_revenue),
            num(r.avg_revenue_half),
            num(r.std_error),
            r.runs.to_string(),
            r.status.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
