//! Bidding strategies behind one interface.
//!
//! Every strategy bids a volume at price zero inside the deviation band
//! `[g - dp, g + dp]` around the generation forecast `g` (never below zero).

mod bandit;
mod d1;
mod linear;
pub mod lp;
mod oracle;

pub use bandit::{BanditStrategy, ContextMode};
pub use d1::{d1_grid, d1_prediction, D1Prediction};
pub use linear::{fit_linear_policy, linear_policy_bid, LinearPolicy, LinearStrategy, TrainingSample};
pub(crate) use oracle::{nearest_filled, CELLS};
pub use oracle::{build_oracle, oracle_bid, unit_grid, OracleSample, OracleStrategy, OracleTable, GRID_POINTS};

use crate::error::{Error, Result};
use crate::market::{MarketOutcome, MarketState};

/// Bids the strategy may choose from for one auction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationBand {
    pub forecast: f64,
    pub deviation: f64,
}

impl DeviationBand {
    pub fn new(forecast: f64, deviation: f64) -> Result<Self> {
        if !(deviation > 0.0) || !deviation.is_finite() {
            return Err(Error::InvalidArgument(format!("deviation {deviation} must be positive")));
        }
        if !(forecast >= 0.0) || !forecast.is_finite() {
            return Err(Error::InvalidArgument(format!("forecast {forecast} must be non-negative")));
        }
        Ok(Self { forecast, deviation })
    }

    pub fn low(&self) -> f64 {
        (self.forecast - self.deviation).max(0.0)
    }

    pub fn high(&self) -> f64 {
        self.forecast + self.deviation
    }

    pub fn clip(&self, bid: f64) -> f64 {
        bid.clamp(self.low(), self.high())
    }

    /// Maps a normalized bid in `[0, 1]` onto the band.
    pub fn from_unit(&self, u: f64) -> f64 {
        self.clip(self.forecast - self.deviation + 2.0 * self.deviation * u)
    }

    pub fn to_unit(&self, bid: f64) -> f64 {
        ((bid - self.forecast + self.deviation) / (2.0 * self.deviation)).clamp(0.0, 1.0)
    }

    pub fn contains(&self, bid: f64) -> bool {
        (self.low()..=self.high()).contains(&bid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyDecision {
    pub bid_volume: f64,
}

impl StrategyDecision {
    /// Clips `bid` into `band`.
    pub fn within(band: &DeviationBand, bid: f64) -> Self {
        Self { bid_volume: band.clip(bid) }
    }
}

/// What a strategy sees before bidding in one auction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub round: usize,
    pub band: DeviationBand,
    /// Normalized `[gamma_hat, imbalance price, imbalance sensitivity]` forecasts.
    pub context: [f64; 3],
}

/// Outcome of one auction, delivered to learning strategies at batch end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub round: usize,
    pub bid: f64,
    pub context: [f64; 3],
    pub outcome: MarketOutcome,
    /// Transformed reward in `[0, 0.5]`.
    pub reward: f64,
}

pub trait BiddingStrategy {
    fn name(&self) -> &str;

    fn decide(&mut self, obs: &Observation) -> Result<StrategyDecision>;

    /// Learning strategies receive their own payoffs, batch by batch.
    fn is_learning(&self) -> bool {
        false
    }

    fn feedback(&mut self, _batch: &[Feedback]) -> Result<()> {
        Ok(())
    }

    /// Publishes the recorded market of a finished auction.
    fn market_revealed(&mut self, _round: usize, _state: &MarketState) {}
}

pub fn forecast_bid(generation_forecast: f64) -> StrategyDecision {
    StrategyDecision { bid_volume: generation_forecast }
}

#[derive(Debug, Clone, Default)]
pub struct ForecastStrategy;

impl BiddingStrategy for ForecastStrategy {
    fn name(&self) -> &str {
        "forecast"
    }

    fn decide(&mut self, obs: &Observation) -> Result<StrategyDecision> {
        Ok(forecast_bid(obs.band.forecast))
    }
}
