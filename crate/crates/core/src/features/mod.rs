//! Forecast emulation, context normalization and reward scaling.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StudentT;

use crate::error::{Error, Result};
use crate::market::GroundTruth;

/// Forecast sensitivity of day-ahead revenue to the bid volume.
pub fn gamma_hat(spot_forecast: f64, generation_forecast: f64, spot_sensitivity_forecast: f64) -> f64 {
    spot_forecast + generation_forecast * spot_sensitivity_forecast
}

/// Student-t forecast noise: scale `sigma`, bias `xi`, `nu` degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub xi: f64,
    pub nu: u32,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { sigma: 0.05, xi: 0.0, nu: 5 }
    }
}

impl NoiseSpec {
    pub fn new(sigma: f64, xi: f64, nu: u32) -> Result<Self> {
        let s = Self { sigma, xi, nu };
        s.validate()?;
        Ok(s)
    }

    pub fn noiseless() -> Self {
        Self { sigma: 0.0, xi: 0.0, nu: 5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("noise sigma {} must be non-negative", self.sigma)));
        }
        if !self.xi.is_finite() {
            return Err(Error::InvalidArgument("noise bias must be finite".into()));
        }
        if self.nu < 1 {
            return Err(Error::InvalidArgument("degrees of freedom must be at least 1".into()));
        }
        Ok(())
    }
}

/// `true_value + t * sigma + xi` with `t ~ Student-t(nu)`.
///
/// A variate is drawn even when `sigma` is zero so that runs differing only in
/// the noise level consume the same random stream.
pub fn add_noise<R: Rng + ?Sized>(true_value: f64, spec: &NoiseSpec, rng: &mut R) -> f64 {
    let t: f64 = rng.sample(StudentT::new(spec.nu as f64).expect("nu >= 1"));
    true_value + t * spec.sigma + spec.xi
}

/// `(raw - low) / (high - low)` clipped to `[0, 1]`.
pub fn normalize(raw: f64, bounds: (f64, f64)) -> f64 {
    ((raw - bounds.0) / (bounds.1 - bounds.0)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationBounds {
    bounds: Vec<(f64, f64)>,
}

impl NormalizationBounds {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!("feature {k}: bounds ({lo}, {hi}) need low < high")));
            }
        }
        Ok(Self { bounds })
    }

    pub fn get(&self, feature: usize) -> (f64, f64) {
        self.bounds[feature]
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn as_slice(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.bounds).map(|(&x, &b)| normalize(x, b)).collect()
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(&next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

/// Empirical `(q, 1 - q)` bounds of each column of `rows`.
pub fn empirical_bounds(rows: &[Vec<f64>], tail: f64) -> Result<NormalizationBounds> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || dim == 0 {
        return Err(Error::InvalidArgument("no history to estimate bounds from".into()));
    }
    let mut col = Vec::with_capacity(rows.len());
    let mut bounds = Vec::with_capacity(dim);
    for k in 0..dim {
        col.clear();
        col.extend(rows.iter().map(|r| r[k]));
        col.sort_by(f64::total_cmp);
        let lo = quantile(&col, tail);
        let mut hi = quantile(&col, 1.0 - tail);
        if !(hi > lo) {
            hi = lo + lo.abs().max(1.0) * 1e-6;
        }
        bounds.push((lo, hi));
    }
    NormalizationBounds::new(bounds)
}

/// Clipped linear map of revenue differences onto `[0, 0.5]`, counting clips.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTransform {
    low: f64,
    high: f64,
    clipped: u64,
    applied: u64,
}

impl RewardTransform {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low < high) || !low.is_finite() || !high.is_finite() {
            return Err(Error::InvalidArgument(format!("reward bounds ({low}, {high}) need low < high")));
        }
        Ok(Self { low, high, clipped: 0, applied: 0 })
    }

    /// Symmetric bounds `±deviation * price_scale`.
    pub fn symmetric(deviation: f64, price_scale: f64) -> Result<Self> {
        Self::new(-deviation * price_scale, deviation * price_scale)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.low, self.high)
    }

    pub fn clipped(&self) -> u64 {
        self.clipped
    }

    pub fn applied(&self) -> u64 {
        self.applied
    }

    /// Transform without touching the counters.
    pub fn value(&self, revenue: f64, reference_revenue: f64) -> f64 {
        reward_transform(revenue, reference_revenue, (self.low, self.high)).0
    }

    pub fn apply(&mut self, revenue: f64, reference_revenue: f64) -> f64 {
        let (r, clipped) = reward_transform(revenue, reference_revenue, (self.low, self.high));
        self.applied += 1;
        self.clipped += clipped as u64;
        r
    }
}

/// Returns the reward in `[0, 0.5]` and whether the difference fell outside the bounds.
pub fn reward_transform(revenue: f64, reference_revenue: f64, bounds: (f64, f64)) -> (f64, bool) {
    let diff = revenue - reference_revenue;
    let u = (diff - bounds.0) / (bounds.1 - bounds.0);
    (0.5 * u.clamp(0.0, 1.0), !(0.0..=1.0).contains(&u))
}

/// Normalized forecast vector seen before an auction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Context {
    pub gamma_hat: f64,
    pub imbalance_price_forecast: f64,
    pub imbalance_sensitivity_forecast: f64,
}

impl Context {
    pub fn new(coords: [f64; 3]) -> Result<Self> {
        if coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::OutOfRange(format!("context {coords:?} outside the unit cube")));
        }
        Ok(Self {
            gamma_hat: coords[0],
            imbalance_price_forecast: coords[1],
            imbalance_sensitivity_forecast: coords[2],
        })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.gamma_hat, self.imbalance_price_forecast, self.imbalance_sensitivity_forecast]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub noise: NoiseSpec,
    /// Hours of history kept for the rolling normalization bounds.
    pub window: usize,
    /// Tail mass cut off at each end when estimating bounds.
    pub tail: f64,
    /// Hours between bound updates.
    pub update_every: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { noise: NoiseSpec::default(), window: 90 * 24, tail: 0.01, update_every: 24 }
    }
}

/// One hour of emulated forecasts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    pub generation: f64,
    pub spot_price: f64,
    pub spot_sensitivity: f64,
    pub imbalance_price: f64,
    pub imbalance_sensitivity: f64,
    /// `[gamma_hat, imbalance price, imbalance sensitivity]` before normalization.
    pub raw: [f64; 3],
    pub context: Context,
}

const FORECAST_QUANTITIES: usize = 4;

fn truth_vector(gt: &GroundTruth) -> [f64; FORECAST_QUANTITIES] {
    [gt.spot_price, gt.spot_sensitivity, gt.imbalance_price, gt.imbalance_sensitivity]
}

/// Turns ground truth into noisy normalized contexts.
///
/// Noise is applied to each forecast quantity on its normalized scale, where
/// the scale is the central range of the true values over the warm-up history.
/// Context bounds are re-estimated from the trailing window of noisy features.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    config: FeatureConfig,
    noise_scale: [(f64, f64); FORECAST_QUANTITIES],
    bounds: NormalizationBounds,
    history: VecDeque<Vec<f64>>,
    since_update: usize,
}

impl FeaturePipeline {
    /// `warm_up` seeds the noise scales and the first normalization bounds; its
    /// noisy features are drawn from `rng` like any later hour.
    pub fn new<R: Rng + ?Sized>(config: FeatureConfig, warm_up: &[GroundTruth], rng: &mut R) -> Result<Self> {
        config.noise.validate()?;
        if config.window == 0 || config.update_every == 0 || !(0.0..0.5).contains(&config.tail) {
            return Err(Error::Config("feature window, update interval and tail must be valid".into()));
        }
        let truths: Vec<Vec<f64>> = warm_up.iter().map(|gt| truth_vector(gt).to_vec()).collect();
        let scales = empirical_bounds(&truths, config.tail)?;
        let mut noise_scale = [(0.0, 1.0); FORECAST_QUANTITIES];
        for (k, s) in noise_scale.iter_mut().enumerate() {
            *s = scales.get(k);
        }
        let mut p = Self {
            config,
            noise_scale,
            bounds: NormalizationBounds::new(vec![(0.0, 1.0); 3])?,
            history: VecDeque::new(),
            since_update: 0,
        };
        for gt in warm_up {
            let q = p.noisy_quantities(gt, rng);
            p.push_history(Self::raw_features(gt, &q));
        }
        p.bounds = p.estimate_bounds()?;
        Ok(p)
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn bounds(&self) -> &NormalizationBounds {
        &self.bounds
    }

    fn noisy<R: Rng + ?Sized>(&self, k: usize, value: f64, rng: &mut R) -> f64 {
        let (lo, hi) = self.noise_scale[k];
        let range = hi - lo;
        lo + add_noise((value - lo) / range, &self.config.noise, rng) * range
    }

    /// Noisy `[spot, spot slope, imbalance price, imbalance slope]`.
    fn noisy_quantities<R: Rng + ?Sized>(&self, gt: &GroundTruth, rng: &mut R) -> [f64; FORECAST_QUANTITIES] {
        let t = truth_vector(gt);
        [
            self.noisy(0, t[0], rng),
            self.noisy(1, t[1], rng),
            self.noisy(2, t[2], rng),
            self.noisy(3, t[3], rng),
        ]
    }

    fn raw_features(gt: &GroundTruth, q: &[f64; FORECAST_QUANTITIES]) -> [f64; 3] {
        [gamma_hat(q[0], gt.generation_forecast, q[1]), q[2], q[3]]
    }

    fn push_history(&mut self, raw: [f64; 3]) {
        if self.history.len() == self.config.window {
            self.history.pop_front();
        }
        self.history.push_back(raw.to_vec());
    }

    fn estimate_bounds(&self) -> Result<NormalizationBounds> {
        let rows: Vec<Vec<f64>> = self.history.iter().cloned().collect();
        empirical_bounds(&rows, self.config.tail)
    }

    /// Forecasts for the next hour, normalized with the bounds in force.
    pub fn forecast<R: Rng + ?Sized>(&mut self, gt: &GroundTruth, rng: &mut R) -> Result<Forecast> {
        if self.since_update == self.config.update_every {
            self.bounds = self.estimate_bounds()?;
            self.since_update = 0;
        }
        let q = self.noisy_quantities(gt, rng);
        let raw = Self::raw_features(gt, &q);
        let n = self.bounds.normalize(&raw);
        let context = Context::new([n[0], n[1], n[2]])?;
        self.push_history(raw);
        self.since_update += 1;
        Ok(Forecast {
            generation: gt.generation_forecast,
            spot_price: q[0],
            spot_sensitivity: q[1],
            imbalance_price: q[2],
            imbalance_sensitivity: q[3],
            raw,
            context,
        })
    }
}
