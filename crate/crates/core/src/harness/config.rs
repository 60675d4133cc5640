use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, NoiseSpec, RewardTransform};
use crate::market::generator::GeneratorConfig;

/// Bidding strategies the harness can field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Oracle,
    Forecast,
    D1,
    Linear,
    Bandit,
    /// Bandit fed a constant context: same space, no information.
    BanditBlind,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Oracle,
        StrategyKind::Forecast,
        StrategyKind::D1,
        StrategyKind::Linear,
        StrategyKind::Bandit,
        StrategyKind::BanditBlind,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Oracle => "oracle",
            StrategyKind::Forecast => "forecast",
            StrategyKind::D1 => "d1",
            StrategyKind::Linear => "linear",
            StrategyKind::Bandit => "bandit",
            StrategyKind::BanditBlind => "bandit-blind",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

/// Parameters one sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Deviation,
    ContextDim,
    Batch,
    Sigma,
    Xi,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::Deviation => "deviation",
            SweepParam::ContextDim => "context_dim",
            SweepParam::Batch => "batch",
            SweepParam::Sigma => "sigma",
            SweepParam::Xi => "xi",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "deviation" => SweepParam::Deviation,
            "context_dim" => SweepParam::ContextDim,
            "batch" => SweepParam::Batch,
            "sigma" => SweepParam::Sigma,
            "xi" => SweepParam::Xi,
            other => return Err(Error::Config(format!("cannot sweep {other:?}"))),
        })
    }
}

/// Flat experiment configuration. Every key is optional in the file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Auctions after the warm-up.
    pub horizon: usize,
    /// Feedback delay `W` in auctions.
    pub batch: usize,
    /// Maximum deviation from the generation forecast, MWh.
    pub deviation: f64,
    pub sigma: f64,
    pub xi: f64,
    pub nu: u32,
    /// Context coordinates the bandit and the linear rule see (0 to 3).
    pub context_dim: usize,
    pub strategies: Vec<String>,
    pub seed: u64,
    /// Seeds of a sweep; empty means `[seed]`.
    pub seeds: Vec<u64>,
    /// Hours of history before the first auction.
    pub warm_up: usize,
    /// Reward bounds are `+-deviation * price_scale` unless given explicitly.
    pub price_scale: f64,
    pub reward_low: Option<f64>,
    pub reward_high: Option<f64>,
    /// Bound constant; fitted to the regret curve when absent.
    pub bound_constant: Option<f64>,
    pub zooming_dim: u32,
    /// Computes the regret series against a Monte-Carlo oracle.
    pub regret: bool,
    /// Size of the Monte-Carlo pool behind the regret oracle and the oracle table.
    pub mc_samples: usize,
    /// Points of the normalized bid grid for regret estimation.
    pub regret_grid: usize,
    pub linear_window: usize,
    /// D-1 grid step as a fraction of the deviation.
    pub d1_step: f64,
    pub feature_window: usize,
    pub feature_tail: f64,
    pub bounds_every: usize,
    /// Directory holding `market.csv` and `curves/`; synthetic data when absent.
    pub data: Option<PathBuf>,

    pub gen_capacity: Option<f64>,
    pub gen_forecast_error_sd: Option<f64>,
    pub gen_premium_mean: Option<f64>,
    pub gen_premium_phi: Option<f64>,
    pub gen_premium_sd: Option<f64>,
    pub gen_eta_i_mean: Option<f64>,
    pub gen_eta_i_sd: Option<f64>,
    pub gen_other_imbalance_sd: Option<f64>,
    pub gen_step_jitter: Option<f64>,
    pub gen_elastic_scale: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            horizon: 15_252,
            batch: 24,
            deviation: 250.0,
            sigma: 0.05,
            xi: 0.0,
            nu: 5,
            context_dim: 3,
            strategies: ["oracle", "bandit", "d1", "forecast", "linear"].map(String::from).to_vec(),
            seed: 1,
            seeds: Vec::new(),
            warm_up: 2_160,
            price_scale: 40.0,
            reward_low: None,
            reward_high: None,
            bound_constant: None,
            zooming_dim: 4,
            regret: true,
            mc_samples: 100_000,
            regret_grid: 21,
            linear_window: 3_600,
            d1_step: 0.1,
            feature_window: 2_160,
            feature_tail: 0.01,
            bounds_every: 24,
            data: None,
            gen_capacity: None,
            gen_forecast_error_sd: None,
            gen_premium_mean: None,
            gen_premium_phi: None,
            gen_premium_sd: None,
            gen_eta_i_mean: None,
            gen_eta_i_sd: None,
            gen_other_imbalance_sd: None,
            gen_step_jitter: None,
            gen_elastic_scale: None,
        }
    }
}

fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    // Bare words are taken as strings so `data=runs/a` works unquoted.
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

impl ExperimentConfig {
    /// Parses flat `key = value` text; `#` starts a comment.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_str_with(text, &[])
    }

    /// Like [`ExperimentConfig::from_toml_str`], then applies `key=value`
    /// overrides in order.
    pub fn from_toml_str_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for item in overrides {
            let (key, value) = parse_override(item)?;
            table.insert(key, value);
        }
        let config: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config =
            Self::from_toml_str_with(&text, overrides).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Relative data paths are taken from the config file's directory.
        if let (Some(data), Some(dir)) = (&config.data, path.parent()) {
            if data.is_relative() && !dir.as_os_str().is_empty() {
                config.data = Some(dir.join(data));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch == 0 || self.horizon < self.batch {
            return bad(format!("need horizon >= batch >= 1, got horizon {} and batch {}", self.horizon, self.batch));
        }
        if !(self.deviation > 0.0) || !self.deviation.is_finite() {
            return bad(format!("deviation {} must be positive", self.deviation));
        }
        self.noise()?;
        if self.context_dim > 3 {
            return bad(format!("context_dim {} exceeds the 3 available features", self.context_dim));
        }
        let kinds = self.strategy_kinds()?;
        let unique: HashSet<_> = kinds.iter().collect();
        if unique.len() != kinds.len() {
            return bad("strategy listed twice".into());
        }
        self.reward_transform()?;
        if self.zooming_dim == 0 {
            return bad("zooming_dim must be positive".into());
        }
        if let Some(c) = self.bound_constant {
            if !(c > 0.0) {
                return bad(format!("bound_constant {c} must be positive"));
            }
        }
        if self.regret_grid < 2 {
            return bad("regret_grid needs at least 2 points".into());
        }
        if self.linear_window == 0 {
            return bad("linear_window must be positive".into());
        }
        if !(self.d1_step > 0.0 && self.d1_step <= 2.0) {
            return bad(format!("d1_step {} must lie in (0, 2]", self.d1_step));
        }
        if self.warm_up < 2 {
            return bad("warm_up needs at least 2 hours".into());
        }
        let synthetic = self.data.is_none();
        if synthetic && self.mc_samples == 0 && (self.regret || kinds.contains(&StrategyKind::Oracle)) {
            return bad("regret and the oracle strategy need mc_samples > 0".into());
        }
        if self.feature_window == 0 || self.bounds_every == 0 || !(0.0..0.5).contains(&self.feature_tail) {
            return bad("feature_window, bounds_every and feature_tail must be valid".into());
        }
        self.generator()?;
        Ok(())
    }

    pub fn strategy_kinds(&self) -> Result<Vec<StrategyKind>> {
        self.strategies.iter().map(|s| s.parse()).collect()
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.sigma, self.xi, self.nu).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn features(&self) -> Result<FeatureConfig> {
        Ok(FeatureConfig {
            noise: self.noise()?,
            window: self.feature_window,
            tail: self.feature_tail,
            update_every: self.bounds_every,
        })
    }

    pub fn reward_transform(&self) -> Result<RewardTransform> {
        let half = self.deviation * self.price_scale;
        let lo = self.reward_low.unwrap_or(-half);
        let hi = self.reward_high.unwrap_or(half);
        RewardTransform::new(lo, hi).map_err(|e| Error::Config(e.to_string()))
    }

    /// Synthetic generator settings after the `gen_*` overrides.
    pub fn generator(&self) -> Result<GeneratorConfig> {
        let mut g = GeneratorConfig::default();
        if let Some(v) = self.gen_capacity {
            g.capacity = v;
        }
        if let Some(v) = self.gen_forecast_error_sd {
            g.forecast_error.sd = v;
        }
        if let Some(v) = self.gen_premium_mean {
            g.imbalance_premium.mean = v;
        }
        if let Some(v) = self.gen_premium_phi {
            g.imbalance_premium.phi = v;
        }
        if let Some(v) = self.gen_premium_sd {
            g.imbalance_premium.sd = v;
        }
        if let Some(v) = self.gen_eta_i_mean {
            g.imbalance_sensitivity.mean = v;
        }
        if let Some(v) = self.gen_eta_i_sd {
            g.imbalance_sensitivity.sd = v;
        }
        if let Some(v) = self.gen_other_imbalance_sd {
            g.other_imbalance.sd = v;
        }
        if let Some(v) = self.gen_step_jitter {
            g.step_jitter = v;
        }
        if let Some(s) = self.gen_elastic_scale {
            g.elastic_demand.iter_mut().for_each(|b| b.0 *= s);
        }
        g.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(g)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    /// Copy with `param` set to `value`.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{} needs a whole number, got {v}", param.as_str())))
            }
        };
        match param {
            SweepParam::Deviation => c.deviation = value,
            SweepParam::ContextDim => c.context_dim = count(value)?,
            SweepParam::Batch => c.batch = count(value)?,
            SweepParam::Sigma => c.sigma = value,
            SweepParam::Xi => c.xi = value,
        }
        c.validate()?;
        Ok(c)
    }
}
