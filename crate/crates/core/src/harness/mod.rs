//! Experiment orchestration: the repeated-auction loop with delayed feedback,
//! regret accounting, reference bound curves, sweeps and CSV output.

mod config;
pub mod data;
mod oracle_value;
mod report;
mod sweep;

use std::time::{Duration, Instant};

use log::{debug, info};

pub use config::{ExperimentConfig, StrategyKind, SweepParam};
pub use data::{Dataset, Hour};
pub use oracle_value::{bid_grid, estimate_oracle_value, McPool, OracleEstimate, OracleValue, PoolSample};
pub use report::{fit_bound_constant, regret_bound_shape, write_outputs, write_records_csv, write_sweep_csv, REPORT_FILES};
pub use sweep::{sweep, SweepRow};

use crate::bandit::BanditConfig;
use crate::error::{Error, Result};
use crate::market::{simulate_round, MarketOutcome};
use crate::strategies::{
    BanditStrategy, BiddingStrategy, ContextMode, D1Prediction, DeviationBand, Feedback, ForecastStrategy,
    LinearStrategy, Observation, OracleStrategy, OracleTable,
};

/// Auctions per day; contexts of a whole day are revealed before its bids.
pub const DAY: usize = 24;

/// Decorrelated seed for one random stream of a run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub strategy: String,
    pub context: [f64; 3],
    pub forecast: f64,
    pub bid: f64,
    pub outcome: MarketOutcome,
    pub reward: f64,
    /// Instantaneous regret against the Monte-Carlo oracle.
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub name: String,
    pub revenue: f64,
    /// Revenue over the first half of the horizon.
    pub half_revenue: f64,
    pub day_ahead_revenue: f64,
    pub real_time_revenue: f64,
    pub reward_sum: f64,
    pub clipped: u64,
    pub decisions: usize,
    pub decision_time: Duration,
    pub cumulative_regret: Option<f64>,
}

impl StrategySummary {
    fn new(name: String) -> Self {
        Self {
            name,
            revenue: 0.0,
            half_revenue: 0.0,
            day_ahead_revenue: 0.0,
            real_time_revenue: 0.0,
            reward_sum: 0.0,
            clipped: 0,
            decisions: 0,
            decision_time: Duration::ZERO,
            cumulative_regret: None,
        }
    }

    pub fn avg_revenue(&self) -> f64 {
        self.revenue / self.decisions.max(1) as f64
    }

    pub fn avg_half_revenue(&self) -> f64 {
        self.half_revenue / (self.decisions / 2).max(1) as f64
    }

    pub fn mean_decision_time(&self) -> Duration {
        self.decision_time / self.decisions.max(1) as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurves {
    /// `R(t)/t` per strategy, `t = 1..=T`.
    pub series: Vec<(String, Vec<f64>)>,
    /// Reference curve `C * shape(t)`.
    pub bound: Vec<f64>,
    pub bound_constant: f64,
    /// Series the constant was fitted to.
    pub fitted_to: Option<String>,
    /// Mean standard error of `mu*` over the visited contexts.
    pub mean_std_error: f64,
    pub pool_size: usize,
    pub filled_cells: usize,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub seed: u64,
    pub rounds: usize,
    pub batch: usize,
    pub strategies: Vec<StrategySummary>,
    pub records: Vec<RoundRecord>,
    pub regret: Option<RegretCurves>,
    pub notes: Vec<String>,
    pub elapsed: Duration,
}

impl RunReport {
    pub fn strategy(&self, name: &str) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.name == name)
    }

    pub fn regret_series(&self, name: &str) -> Option<&[f64]> {
        self.regret.as_ref()?.series.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

fn build_strategy(
    kind: StrategyKind,
    config: &ExperimentConfig,
    seed: u64,
    slot: usize,
    table: Option<&OracleTable>,
) -> Result<Box<dyn BiddingStrategy>> {
    let dims: Vec<usize> = (0..config.context_dim).collect();
    let bandit = |mode: ContextMode| -> Result<Box<dyn BiddingStrategy>> {
        let bc = BanditConfig::new(config.context_dim + 1, config.horizon.max(2) as f64, config.batch, derive_seed(seed, 100 + slot as u64));
        Ok(Box::new(BanditStrategy::new(kind.as_str(), bc, mode)?))
    };
    Ok(match kind {
        StrategyKind::Forecast => Box::new(ForecastStrategy),
        StrategyKind::D1 => Box::new(D1Prediction::new(config.d1_step)?),
        StrategyKind::Linear => Box::new(LinearStrategy::new(dims, config.deviation, config.linear_window)?),
        StrategyKind::Oracle => Box::new(OracleStrategy::new(
            table.cloned().ok_or_else(|| Error::Invariant("oracle table missing".into()))?,
        )),
        StrategyKind::Bandit => bandit(ContextMode::Features(dims))?,
        StrategyKind::BanditBlind => bandit(ContextMode::Constant(config.context_dim))?,
    })
}

/// Oracle table and regret oracle for a run.
fn oracles(config: &ExperimentConfig, seed: u64, dataset: &Dataset) -> Result<(Option<OracleTable>, Option<OracleValue>, usize)> {
    let kinds = config.strategy_kinds()?;
    let wants_table = kinds.contains(&StrategyKind::Oracle);
    if !dataset.synthetic {
        // Recorded data: the table is fitted in-sample, no regret baseline.
        let table = if wants_table {
            Some(McPool::from_hours(&dataset.hours, config.deviation, config.regret_grid)?.oracle_table()?)
        } else {
            None
        };
        return Ok((table, None, 0));
    }
    if !(wants_table || config.regret) {
        return Ok((None, None, 0));
    }
    let started = Instant::now();
    let pool = McPool::generate(
        &config.generator()?,
        &config.features()?,
        config.deviation,
        config.regret_grid,
        config.warm_up,
        config.mc_samples,
        derive_seed(seed, data::STREAM_POOL_MARKET),
        derive_seed(seed, data::STREAM_POOL_FEATURES),
    )?;
    info!("Monte-Carlo pool of {} auctions in {:.1?}", pool.samples.len(), started.elapsed());
    let table = if wants_table { Some(pool.oracle_table()?) } else { None };
    let value = if config.regret {
        Some(pool.oracle_value(config.regret_grid, &config.reward_transform()?)?)
    } else {
        None
    };
    Ok((table, value, pool.samples.len()))
}

/// Runs every configured strategy on the auctions of `seed`.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    config.validate()?;
    let dataset = data::prepare(config, seed)?;
    let (table, value, pool_size) = oracles(config, seed, &dataset)?;
    let strategies = config
        .strategy_kinds()?
        .into_iter()
        .enumerate()
        .map(|(slot, kind)| build_strategy(kind, config, seed, slot, table.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let mut report = run_strategies(config, &dataset, strategies, value.as_ref())?;
    report.seed = seed;
    if let Some(r) = report.regret.as_mut() {
        r.pool_size = pool_size;
    }
    if !dataset.synthetic {
        report.notes.push("recorded data: no ground truth, so no regret series; compare revenues only".into());
    }
    Ok(report)
}

/// The auction loop over prepared data with caller-supplied strategies.
///
/// Day by day: the day's contexts are revealed, every strategy bids each
/// auction, outcomes are simulated, and learning strategies receive their
/// payoffs once per batch of `config.batch` auctions. The recorded markets of
/// a day are published to all strategies when the day ends.
pub fn run_strategies(
    config: &ExperimentConfig,
    dataset: &Dataset,
    mut strategies: Vec<Box<dyn BiddingStrategy>>,
    oracle: Option<&OracleValue>,
) -> Result<RunReport> {
    let started = Instant::now();
    let hours = &dataset.hours;
    let n = hours.len();
    let w = config.batch;
    let mut transforms = vec![config.reward_transform()?; strategies.len()];
    let mut summaries: Vec<StrategySummary> = strategies.iter().map(|s| StrategySummary::new(s.name().to_string())).collect();
    let mut pending: Vec<Vec<Feedback>> = vec![Vec::with_capacity(w); strategies.len()];
    let mut records = Vec::with_capacity(n * strategies.len());
    let mut regret_sums = vec![0.0; strategies.len()];
    let mut curves: Vec<Vec<f64>> = vec![Vec::new(); if oracle.is_some() { strategies.len() } else { 0 }];
    let mut se_sum = 0.0;

    for day in (0..n).step_by(DAY) {
        let end = (day + DAY).min(n);
        let observations = (day..end)
            .map(|t| {
                let f = &hours[t].forecast;
                Ok(Observation { round: t, band: DeviationBand::new(f.generation, config.deviation)?, context: f.context.as_array() })
            })
            .collect::<Result<Vec<_>>>()?;
        for obs in &observations {
            let t = obs.round;
            let state = &hours[t].truth.state;
            let reference = simulate_round(obs.band.forecast, state)?.revenue;
            let estimate = oracle.map(|o| o.estimate(&obs.context));
            if let Some(e) = estimate {
                se_sum += e.std_error;
            }
            for (i, s) in strategies.iter_mut().enumerate() {
                let clock = Instant::now();
                let decision = s.decide(obs)?;
                summaries[i].decision_time += clock.elapsed();
                let bid = decision.bid_volume;
                if !obs.band.contains(bid) {
                    return Err(Error::Invariant(format!("{} bid {bid} outside its band at round {t}", s.name())));
                }
                let outcome = simulate_round(bid, state)?;
                let reward = transforms[i].apply(outcome.revenue, reference);
                let regret = oracle.map(|o| o.regret(&obs.context, obs.band.to_unit(bid)));
                let sm = &mut summaries[i];
                sm.decisions += 1;
                sm.revenue += outcome.revenue;
                if t < n / 2 {
                    sm.half_revenue += outcome.revenue;
                }
                sm.day_ahead_revenue += outcome.day_ahead_revenue();
                sm.real_time_revenue += outcome.real_time_revenue();
                sm.reward_sum += reward;
                if let Some(r) = regret {
                    regret_sums[i] += r;
                    curves[i].push(regret_sums[i] / (t + 1) as f64);
                }
                if s.is_learning() {
                    pending[i].push(Feedback { round: t, bid, context: obs.context, outcome, reward });
                }
                records.push(RoundRecord {
                    round: t,
                    strategy: sm.name.clone(),
                    context: obs.context,
                    forecast: obs.band.forecast,
                    bid,
                    outcome,
                    reward,
                    regret,
                });
            }
            if (t + 1) % w == 0 || t + 1 == n {
                for (i, s) in strategies.iter_mut().enumerate() {
                    if !pending[i].is_empty() {
                        s.feedback(&pending[i])?;
                        pending[i].clear();
                    }
                }
            }
        }
        for t in day..end {
            for s in strategies.iter_mut() {
                s.market_revealed(t, &hours[t].truth.state);
            }
        }
        if day % (DAY * 30) == 0 {
            debug!("day {} of {}", day / DAY, n.div_ceil(DAY));
        }
    }

    for (i, sm) in summaries.iter_mut().enumerate() {
        sm.clipped = transforms[i].clipped();
        if oracle.is_some() {
            sm.cumulative_regret = Some(regret_sums[i]);
        }
    }
    let regret = match oracle {
        None => None,
        Some(o) => {
            let kinds: Vec<Option<StrategyKind>> = summaries.iter().map(|s| s.name.parse().ok()).collect();
            let series: Vec<(String, Vec<f64>)> = summaries.iter().map(|s| s.name.clone()).zip(curves).collect();
            let fit_index = kinds
                .iter()
                .position(|k| *k == Some(StrategyKind::Bandit))
                .or_else(|| kinds.iter().position(|k| *k == Some(StrategyKind::BanditBlind)))
                .or(if series.is_empty() { None } else { Some(0) });
            let shape: Vec<f64> = (1..=n).map(|t| regret_bound_shape(t, w, config.zooming_dim)).collect::<Result<_>>()?;
            let constant = match (config.bound_constant, fit_index) {
                (Some(c), _) => c,
                (None, Some(i)) => fit_bound_constant(&series[i].1, &shape),
                (None, None) => 0.0,
            };
            Some(RegretCurves {
                bound: shape.iter().map(|f| constant * f).collect(),
                bound_constant: constant,
                fitted_to: config.bound_constant.is_none().then(|| fit_index.map(|i| series[i].0.clone())).flatten(),
                series,
                mean_std_error: se_sum / n.max(1) as f64,
                pool_size: 0,
                filled_cells: o.filled_cells(),
            })
        }
    };
    Ok(RunReport {
        seed: config.seed,
        rounds: n,
        batch: w,
        strategies: summaries,
        records,
        regret,
        notes: Vec::new(),
        elapsed: started.elapsed(),
    })
}
