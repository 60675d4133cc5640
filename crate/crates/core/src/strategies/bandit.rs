use std::collections::HashMap;

use super::{BiddingStrategy, Feedback, Observation, StrategyDecision};
use crate::bandit::{BanditConfig, ZoomingBandit};
use crate::error::{Error, Result};

/// Which context the engine sees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContextMode {
    /// The listed coordinates of the observed context.
    Features(Vec<usize>),
    /// `n` coordinates fixed at 0.5: same space, no information.
    Constant(usize),
}

impl ContextMode {
    pub fn dim(&self) -> usize {
        match self {
            ContextMode::Features(d) => d.len(),
            ContextMode::Constant(n) => *n,
        }
    }

    fn project(&self, context: &[f64; 3]) -> Vec<f64> {
        match self {
            ContextMode::Features(d) => d.iter().map(|&i| context[i]).collect(),
            ContextMode::Constant(n) => vec![0.5; *n],
        }
    }
}

/// Zooming bandit bidding in the normalized deviation band.
#[derive(Debug, Clone)]
pub struct BanditStrategy {
    name: String,
    engine: ZoomingBandit,
    mode: ContextMode,
    /// Engine round of each auction awaiting feedback.
    rounds: HashMap<usize, u64>,
}

impl BanditStrategy {
    /// `config.dim` must be one more than the context dimension of `mode`.
    pub fn new(name: impl Into<String>, config: BanditConfig, mode: ContextMode) -> Result<Self> {
        if let ContextMode::Features(d) = &mode {
            if d.iter().any(|&i| i >= 3) {
                return Err(Error::Config("context feature index out of range".into()));
            }
        }
        if config.dim != mode.dim() + 1 {
            return Err(Error::Config(format!(
                "bandit dimension {} does not fit {} context coordinates",
                config.dim,
                mode.dim()
            )));
        }
        Ok(Self { name: name.into(), engine: ZoomingBandit::new(config)?, mode, rounds: HashMap::new() })
    }

    pub fn engine(&self) -> &ZoomingBandit {
        &self.engine
    }
}

impl BiddingStrategy for BanditStrategy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, obs: &Observation) -> Result<StrategyDecision> {
        let sel = self.engine.select(&self.mode.project(&obs.context))?;
        self.rounds.insert(obs.round, sel.round);
        Ok(StrategyDecision::within(&obs.band, obs.band.from_unit(sel.bid)))
    }

    fn is_learning(&self) -> bool {
        true
    }

    fn feedback(&mut self, batch: &[Feedback]) -> Result<()> {
        let payoffs = batch
            .iter()
            .map(|fb| {
                self.rounds
                    .remove(&fb.round)
                    .map(|r| (r, fb.reward))
                    .ok_or_else(|| Error::InvalidArgument(format!("no bandit decision for round {}", fb.round)))
            })
            .collect::<Result<Vec<_>>>()?;
        self.engine.observe_batch(&payoffs)?;
        Ok(())
    }
}
