//! Online bidding for a price-maker wind power producer.
//!
//! - [`bandit`]: Lipschitz contextual zooming bandit with delayed batched feedback.
//! - [`market`]: day-ahead clearing by curve intersection, real-time settlement
//!   and a seeded synthetic ground-truth generator.
//! - [`features`]: forecast emulation, context normalization and reward scaling.
//! - [`strategies`]: oracle, forecast, D-1, linear decision rule and bandit bidders.
//! - [`harness`]: experiment loop, regret accounting, sweeps and CSV output.

pub mod bandit;
pub mod error;
pub mod features;
pub mod harness;
pub mod market;
pub mod strategies;

pub use bandit::{
    confidence_radius, metric_distance, pre_index, theoretical_regret_bound, ActiveSet, Ball, BallId,
    BanditConfig, BidSampling, Point, Selection, ZoomingBandit,
};
pub use error::{Error, Result};
pub use features::{Context, FeatureConfig, FeaturePipeline, NoiseSpec, RewardTransform};
pub use harness::{run_experiment, sweep, ExperimentConfig, RoundRecord, RunReport, StrategyKind, SweepParam};
pub use market::{
    clear_day_ahead, revenue, settle_real_time, simulate_round, BidCurve, GeneratorConfig, GroundTruth,
    GroundTruthGenerator, HourDrivers, MarketOutcome, MarketState, Side,
};
pub use strategies::{
    BanditStrategy, BiddingStrategy, ContextMode, D1Prediction, DeviationBand, Feedback, ForecastStrategy,
    LinearStrategy, Observation, OracleStrategy, OracleTable, StrategyDecision,
};
