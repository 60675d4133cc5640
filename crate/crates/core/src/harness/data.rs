//! Hourly ground truth from the synthetic generator or from recorded CSV data.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::derive_seed;
use crate::error::{Error, Result};
use crate::features::{FeaturePipeline, Forecast};
use crate::market::generator::{price_slope, GeneratorConfig, GroundTruth, GroundTruthGenerator};
use crate::market::io::{curve_path, read_curves, read_market_csv, write_curves, write_market_csv, MarketRecord, MARKET_FILE};
use crate::market::{HourDrivers, MarketState};

/// Stream ids for [`derive_seed`].
pub const STREAM_MARKET: u64 = 1;
pub const STREAM_FEATURES: u64 = 2;
pub const STREAM_POOL_MARKET: u64 = 3;
pub const STREAM_POOL_FEATURES: u64 = 4;

/// One auction with its forecasts.
#[derive(Debug, Clone)]
pub struct Hour {
    pub truth: GroundTruth,
    pub forecast: Forecast,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub hours: Vec<Hour>,
    pub synthetic: bool,
}

/// First timestamp of generated data.
pub fn synthetic_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 7, 1, 0, 0, 0).unwrap()
}

pub fn synthetic_truths(generator: &GeneratorConfig, seed: u64, hours: usize) -> Result<Vec<GroundTruth>> {
    GroundTruthGenerator::new(generator.clone(), seed)?.take(hours).collect()
}

/// Writes `market.csv` and one curve file per hour.
pub fn write_dataset(dir: &Path, truths: &[GroundTruth], start: DateTime<Utc>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::with_capacity(truths.len());
    for (h, gt) in truths.iter().enumerate() {
        let timestamp = start + Duration::hours(h as i64);
        write_curves(&curve_path(dir, &timestamp), gt.state.supply(), gt.state.demand())?;
        records.push(MarketRecord {
            timestamp,
            spot_price: gt.spot_price,
            system_imbalance: gt.state.base_system_imbalance(),
            imbalance_price: gt.imbalance_price,
            wind_forecast: gt.generation_forecast,
            wind_actual: gt.state.realized_generation(),
            eta_s: Some(gt.spot_sensitivity),
            eta_i: Some(gt.imbalance_sensitivity),
        });
    }
    write_market_csv(&dir.join(MARKET_FILE), &records)
}

/// Least-squares slope of `y` on `x`; zero when `x` does not vary.
fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-12 * n {
        0.0
    } else {
        sxy / sxx
    }
}

/// Daily regression of the imbalance price on the system imbalance.
pub fn daily_imbalance_sensitivity(records: &[MarketRecord]) -> Vec<f64> {
    let mut days: BTreeMap<NaiveDate, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        days.entry(r.timestamp.date_naive()).or_default().push((r.system_imbalance, r.imbalance_price));
    }
    let slopes: BTreeMap<NaiveDate, f64> = days.iter().map(|(d, pts)| (*d, ols_slope(pts))).collect();
    records.iter().map(|r| slopes[&r.timestamp.date_naive()]).collect()
}

/// Reads recorded hours; missing sensitivities are estimated from the data.
pub fn load_truths(dir: &Path, slope_window: f64) -> Result<Vec<GroundTruth>> {
    let records = read_market_csv(&dir.join(MARKET_FILE))?;
    if records.is_empty() {
        return Err(Error::Data(format!("{}: no market rows", dir.join(MARKET_FILE).display())));
    }
    let eta_i_fit = records
        .iter()
        .any(|r| r.eta_i.is_none())
        .then(|| daily_imbalance_sensitivity(&records));
    let mut truths = Vec::with_capacity(records.len());
    for (h, r) in records.iter().enumerate() {
        let path = curve_path(dir, &r.timestamp);
        let (supply, demand) = read_curves(&path)?;
        let forecast = r.wind_forecast.max(0.0);
        let spot_sensitivity = match r.eta_s {
            Some(v) => v,
            None => price_slope(&supply, &demand, forecast, slope_window)?,
        };
        let eta_i = r.eta_i.or_else(|| eta_i_fit.as_ref().map(|f| f[h])).unwrap_or(0.0);
        let state = MarketState::new(
            supply,
            demand,
            HourDrivers {
                reference_bid: forecast,
                realized_generation: r.wind_actual.max(0.0),
                base_imbalance_price: r.imbalance_price,
                imbalance_sensitivity: eta_i,
                base_system_imbalance: r.system_imbalance,
                spot_sensitivity,
            },
        )
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        truths.push(GroundTruth {
            hour: h,
            state,
            generation_forecast: forecast,
            spot_price: r.spot_price,
            spot_sensitivity,
            imbalance_price: r.imbalance_price,
            imbalance_sensitivity: eta_i,
        });
    }
    Ok(truths)
}

/// Splits `truths` into warm-up and auctions and attaches forecasts.
pub fn forecast_hours(config: &ExperimentConfig, truths: Vec<GroundTruth>, rng: &mut ChaCha8Rng) -> Result<Vec<Hour>> {
    if truths.len() <= config.warm_up {
        return Err(Error::Data(format!(
            "{} hours of data do not cover the {}-hour warm-up",
            truths.len(),
            config.warm_up
        )));
    }
    let mut truths = truths.into_iter();
    let warm: Vec<GroundTruth> = truths.by_ref().take(config.warm_up).collect();
    let mut pipeline = FeaturePipeline::new(config.features()?, &warm, rng)?;
    truths
        .take(config.horizon)
        .map(|truth| Ok(Hour { forecast: pipeline.forecast(&truth, rng)?, truth }))
        .collect()
}

/// Ground truth and forecasts for one run.
pub fn prepare(config: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_FEATURES));
    match &config.data {
        None => {
            let truths = synthetic_truths(&config.generator()?, derive_seed(seed, STREAM_MARKET), config.warm_up + config.horizon)?;
            Ok(Dataset { hours: forecast_hours(config, truths, &mut rng)?, synthetic: true })
        }
        Some(dir) => {
            let truths = load_truths(dir, config.generator()?.slope_window)?;
            let hours = forecast_hours(config, truths, &mut rng)?;
            if hours.len() < config.horizon {
                debug!("data cover {} of {} requested auctions", hours.len(), config.horizon);
            }
            if hours.len() < config.batch {
                return Err(Error::Data(format!("{} auctions after warm-up, fewer than one batch", hours.len())));
            }
            Ok(Dataset { hours, synthetic: false })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_examples() {
        assert_eq!(ols_slope(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]), 2.0);
        assert_eq!(ols_slope(&[(1.0, 1.0), (1.0, 3.0)]), 0.0);
    }

    #[test]
    fn daily_fit_groups_by_utc_date() {
        let rec = |d: u32, h: u32, x: f64, y: f64| MarketRecord {
            timestamp: Utc.with_ymd_and_hms(2023, 1, d, h, 0, 0).unwrap(),
            spot_price: 0.0,
            system_imbalance: x,
            imbalance_price: y,
            wind_forecast: 0.0,
            wind_actual: 0.0,
            eta_s: None,
            eta_i: None,
        };
        let rows = [rec(1, 0, 0.0, 50.0), rec(1, 5, 100.0, 45.0), rec(2, 0, 0.0, 50.0), rec(2, 1, 100.0, 40.0)];
        let fit = daily_imbalance_sensitivity(&rows);
        assert!((fit[0] + 0.05).abs() < 1e-12 && (fit[1] + 0.05).abs() < 1e-12);
        assert!((fit[2] + 0.1).abs() < 1e-12 && (fit[3] + 0.1).abs() < 1e-12);
    }
}
