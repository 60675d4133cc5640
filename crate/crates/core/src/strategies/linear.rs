use std::collections::VecDeque;

use log::debug;

use super::lp::solve_box_lp;
use super::{forecast_bid, BiddingStrategy, DeviationBand, Feedback, Observation, StrategyDecision};
use crate::error::{Error, Result};

/// One auction of the training window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub features: Vec<f64>,
    pub spot_price: f64,
    pub imbalance_price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicy {
    pub weights: Vec<f64>,
    pub window_length: usize,
}

/// Weights maximizing `sum (spot - imbalance) x.q` with `|x.q| <= deviation`
/// on every sample of the window.
pub fn fit_linear_policy(window: &[TrainingSample], deviation: f64) -> Result<LinearPolicy> {
    let rows: Vec<Vec<f64>> = window.iter().map(|s| s.features.clone()).collect();
    let dim = rows.first().map_or(0, Vec::len);
    let mut c = vec![0.0; dim];
    for s in window {
        let w = s.spot_price - s.imbalance_price;
        for (ci, xi) in c.iter_mut().zip(&s.features) {
            *ci += w * xi;
        }
    }
    let sol = solve_box_lp(&rows, &c, deviation)?;
    Ok(LinearPolicy { weights: sol.q, window_length: window.len() })
}

/// `forecast + clip(x.q, -dp, dp)`, kept inside the band.
pub fn linear_policy_bid(policy: &LinearPolicy, features: &[f64], band: &DeviationBand) -> Result<StrategyDecision> {
    if features.len() != policy.weights.len() {
        return Err(Error::InvalidArgument(format!(
            "policy has {} weights for {} features",
            policy.weights.len(),
            features.len()
        )));
    }
    let shift: f64 = features.iter().zip(&policy.weights).map(|(x, q)| x * q).sum();
    let dp = band.deviation;
    Ok(StrategyDecision::within(band, band.forecast + shift.clamp(-dp, dp)))
}

/// Linear decision rule refitted on a rolling window of its own outcomes. The
/// bias is a constant feature appended to the selected context coordinates.
#[derive(Debug, Clone)]
pub struct LinearStrategy {
    dims: Vec<usize>,
    deviation: f64,
    window_length: usize,
    window: VecDeque<TrainingSample>,
    policy: Option<LinearPolicy>,
}

impl LinearStrategy {
    pub fn new(dims: Vec<usize>, deviation: f64, window_length: usize) -> Result<Self> {
        if window_length == 0 || dims.iter().any(|&d| d >= 3) {
            return Err(Error::Config("linear rule needs a positive window and context indices below 3".into()));
        }
        Ok(Self { dims, deviation, window_length, window: VecDeque::new(), policy: None })
    }

    pub fn policy(&self) -> Option<&LinearPolicy> {
        self.policy.as_ref()
    }

    fn features(&self, context: &[f64; 3]) -> Vec<f64> {
        let mut f: Vec<f64> = self.dims.iter().map(|&d| context[d]).collect();
        f.push(1.0);
        f
    }
}

impl BiddingStrategy for LinearStrategy {
    fn name(&self) -> &str {
        "linear"
    }

    fn decide(&mut self, obs: &Observation) -> Result<StrategyDecision> {
        match &self.policy {
            Some(p) => linear_policy_bid(p, &self.features(&obs.context), &obs.band),
            None => Ok(forecast_bid(obs.band.forecast)),
        }
    }

    fn is_learning(&self) -> bool {
        true
    }

    fn feedback(&mut self, batch: &[Feedback]) -> Result<()> {
        for fb in batch {
            if self.window.len() == self.window_length {
                self.window.pop_front();
            }
            self.window.push_back(TrainingSample {
                features: self.features(&fb.context),
                spot_price: fb.outcome.spot_price,
                imbalance_price: fb.outcome.imbalance_price,
            });
        }
        if self.window.len() == self.window_length {
            let window: Vec<TrainingSample> = self.window.iter().cloned().collect();
            let policy = fit_linear_policy(&window, self.deviation)?;
            debug!("linear rule refitted: {:?}", policy.weights);
            self.policy = Some(policy);
        }
        Ok(())
    }
}
