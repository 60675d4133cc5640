use std::collections::HashMap;

use log::warn;

use super::{forecast_bid, BiddingStrategy, DeviationBand, Observation, StrategyDecision};
use crate::error::{Error, Result};
use crate::market::{simulate_round, MarketState};

/// Candidate bids: the forecast, multiples of `step` away from it and both band
/// edges, ascending and clipped at zero.
pub fn d1_grid(band: &DeviationBand, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("grid step {step} must be positive")));
    }
    let dp = band.deviation;
    let mut offsets = vec![-dp, 0.0, dp];
    let mut k = 1.0;
    while k * step < dp {
        offsets.push(k * step);
        offsets.push(-k * step);
        k += 1.0;
    }
    let mut bids: Vec<f64> = offsets.into_iter().map(|o| band.clip(band.forecast + o)).collect();
    bids.sort_by(f64::total_cmp);
    bids.dedup();
    Ok(bids)
}

/// Maximizer of `value` over `bids`; ties go to the bid closest to `center`,
/// then to the lower bid.
pub(crate) fn argmax_near<F>(bids: &[f64], center: f64, mut value: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut best: Option<(f64, f64)> = None;
    for &b in bids {
        let v = value(b)?;
        let better = match best {
            None => true,
            Some((bb, bv)) => v > bv || (v == bv && (b - center).abs() < (bb - center).abs()),
        };
        if better {
            best = Some((b, v));
        }
    }
    best.map(|(b, _)| b).ok_or_else(|| Error::InvalidArgument("empty bid grid".into()))
}

/// Best bid on the grid had today's auction looked like `yesterday`.
pub fn d1_prediction(band: &DeviationBand, yesterday: &MarketState, step: f64) -> Result<StrategyDecision> {
    let bids = d1_grid(band, step)?;
    let bid = argmax_near(&bids, band.forecast, |b| Ok(simulate_round(b, yesterday)?.revenue))?;
    Ok(StrategyDecision { bid_volume: bid })
}

/// Replays the market of the same hour one day earlier.
#[derive(Debug, Clone)]
pub struct D1Prediction {
    /// Grid step as a fraction of the deviation.
    step_fraction: f64,
    lag: usize,
    states: HashMap<usize, MarketState>,
}

impl D1Prediction {
    pub fn new(step_fraction: f64) -> Result<Self> {
        if !(step_fraction > 0.0) {
            return Err(Error::Config(format!("D-1 grid step fraction {step_fraction} must be positive")));
        }
        Ok(Self { step_fraction, lag: 24, states: HashMap::new() })
    }
}

impl Default for D1Prediction {
    fn default() -> Self {
        Self::new(0.1).expect("valid default")
    }
}

impl BiddingStrategy for D1Prediction {
    fn name(&self) -> &str {
        "d1"
    }

    fn decide(&mut self, obs: &Observation) -> Result<StrategyDecision> {
        let Some(yesterday) = obs.round.checked_sub(self.lag).and_then(|r| self.states.get(&r)) else {
            return Ok(forecast_bid(obs.band.forecast));
        };
        match d1_prediction(&obs.band, yesterday, self.step_fraction * obs.band.deviation) {
            Ok(d) => Ok(d),
            Err(e) => {
                warn!("D-1 evaluation failed in round {}: {e}; bidding the forecast", obs.round);
                Ok(forecast_bid(obs.band.forecast))
            }
        }
    }

    fn market_revealed(&mut self, round: usize, state: &MarketState) {
        self.states.insert(round, state.clone());
        let lag = self.lag;
        self.states.retain(|&r, _| r + lag >= round);
    }
}
