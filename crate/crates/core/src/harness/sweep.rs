use log::warn;
use rayon::prelude::*;

use super::{run_experiment, ExperimentConfig, SweepParam};
use crate::error::{Error, Result};

/// Seed-averaged result of one strategy at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub strategy: String,
    /// Mean over seeds of the average revenue per auction.
    pub avg_revenue: f64,
    /// Same over the first half of the horizon.
    pub avg_revenue_half: f64,
    /// Standard error of `avg_revenue` across seeds.
    pub std_error: f64,
    pub runs: usize,
    /// `ok`, or the error of the failed runs.
    pub status: String,
}

type Cell = std::result::Result<Vec<(String, f64, f64)>, String>;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Runs `base` once per value and seed. Cells run concurrently; rows come back
/// ordered by value, then by strategy. A failed cell is reported in `status`
/// and the sweep carries on.
pub fn sweep(base: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let seeds = base.seed_list();
    let jobs: Vec<(usize, u64)> = (0..values.len()).flat_map(|v| seeds.iter().map(move |&s| (v, s))).collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(v, seed)| {
            let config = base.with_param(param, values[v]).map_err(|e| e.to_string())?;
            let report = run_experiment(&config, seed).map_err(|e| e.to_string())?;
            Ok(report
                .strategies
                .iter()
                .map(|s| (s.name.clone(), s.avg_revenue(), s.avg_half_revenue()))
                .collect())
        })
        .collect();

    let mut rows = Vec::new();
    for (v, &value) in values.iter().enumerate() {
        let mine: Vec<&Cell> = jobs.iter().zip(&cells).filter(|((jv, _), _)| *jv == v).map(|(_, c)| c).collect();
        let errors: Vec<&String> = mine.iter().filter_map(|c| c.as_ref().err()).collect();
        let ok: Vec<&Vec<(String, f64, f64)>> = mine.iter().filter_map(|c| c.as_ref().ok()).collect();
        for e in &errors {
            warn!("{} = {value}: {e}", param.as_str());
        }
        let status = match errors.first() {
            None => "ok".to_string(),
            Some(e) => format!("failed {}/{}: {e}", errors.len(), mine.len()),
        };
        let Some(first) = ok.first() else {
            rows.push(SweepRow {
                param: param.as_str().into(),
                value,
                strategy: String::new(),
                avg_revenue: f64::NAN,
                avg_revenue_half: f64::NAN,
                std_error: f64::NAN,
                runs: 0,
                status,
            });
            continue;
        };
        for (k, (name, _, _)) in first.iter().enumerate() {
            let full: Vec<f64> = ok.iter().map(|c| c[k].1).collect();
            let half: Vec<f64> = ok.iter().map(|c| c[k].2).collect();
            let (avg, se) = mean_se(&full);
            rows.push(SweepRow {
                param: param.as_str().into(),
                value,
                strategy: name.clone(),
                avg_revenue: avg,
                avg_revenue_half: mean_se(&half).0,
                std_error: se,
                runs: ok.len(),
                status: status.clone(),
            });
        }
    }
    Ok(rows)
}
