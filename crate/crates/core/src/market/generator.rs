//! Seeded synthetic ground truth: AR(1) drivers feeding a merit-order market.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{clear_curves, BidCurve, HourDrivers, MarketState, PRICE_CAP, PRICE_FLOOR};
use crate::error::{Error, Result};

/// Mean, lag-one coefficient and innovation standard deviation of an AR(1) driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArSpec {
    pub mean: f64,
    pub phi: f64,
    pub sd: f64,
}

impl ArSpec {
    pub const fn new(mean: f64, phi: f64, sd: f64) -> Self {
        Self { mean, phi, sd }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.mean.is_finite() || !self.phi.is_finite() || !self.sd.is_finite() {
            return Err(Error::Config(format!("{name}: parameters must be finite")));
        }
        if self.phi.abs() >= 1.0 {
            return Err(Error::Config(format!("{name}: |phi| = {} must be below 1", self.phi.abs())));
        }
        if self.sd < 0.0 {
            return Err(Error::Config(format!("{name}: sd must be non-negative")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Ar1 {
    spec: ArSpec,
    x: f64,
}

impl Ar1 {
    fn new(spec: ArSpec) -> Self {
        Self { spec, x: spec.mean }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let eps: f64 = rng.sample(StandardNormal);
        let s = self.spec;
        self.x = s.mean + s.phi * (self.x - s.mean) + s.sd * eps;
        self.x
    }
}

/// Synthetic market parameters. Volumes in MWh, prices in EUR/MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    /// Installed wind capacity of the WPP.
    pub capacity: f64,
    /// Capacity factor of the forecast.
    pub wind: ArSpec,
    /// Forecast error as a fraction of capacity.
    pub forecast_error: ArSpec,
    pub load: ArSpec,
    pub load_daily_amplitude: f64,
    /// Other zero-marginal-cost supply.
    pub must_run: ArSpec,
    pub must_run_price: f64,
    /// Level that shifts the whole thermal stack.
    pub fuel_price: ArSpec,
    /// `(volume, price slope)` per thermal segment in merit order.
    pub thermal_segments: Vec<(f64, f64)>,
    /// Price of the first thermal MWh relative to the fuel level.
    pub thermal_offset: f64,
    /// Width of the steps a thermal segment is rendered with.
    pub step_volume: f64,
    /// Relative random variation of each step width.
    pub step_jitter: f64,
    pub scarcity_volume: f64,
    pub scarcity_price: f64,
    /// Price-responsive demand blocks `(volume, price)` on top of the inelastic load.
    pub elastic_demand: Vec<(f64, f64)>,
    pub imbalance_premium: ArSpec,
    pub imbalance_sensitivity: ArSpec,
    /// System imbalance of everyone but the WPP.
    pub other_imbalance: ArSpec,
    /// Volume window of the finite difference that measures the spot slope.
    pub slope_window: f64,
    /// Hours simulated and discarded before the first emitted state.
    pub burn_in: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            capacity: 20_000.0,
            wind: ArSpec::new(0.3, 0.97, 0.04),
            forecast_error: ArSpec::new(0.0, 0.8, 0.02),
            load: ArSpec::new(55_000.0, 0.9, 1_500.0),
            load_daily_amplitude: 8_000.0,
            must_run: ArSpec::new(12_000.0, 0.95, 600.0),
            must_run_price: 0.0,
            fuel_price: ArSpec::new(60.0, 0.995, 0.6),
            thermal_segments: vec![(20_000.0, 0.0004), (15_000.0, 0.001), (10_000.0, 0.003), (8_000.0, 0.01)],
            thermal_offset: -35.0,
            step_volume: 500.0,
            step_jitter: 0.2,
            scarcity_volume: 5_000.0,
            scarcity_price: 500.0,
            elastic_demand: vec![(2_000.0, 120.0), (2_000.0, 60.0), (2_000.0, 35.0), (1_000.0, -10.0)],
            imbalance_premium: ArSpec::new(0.0, 0.6, 30.0),
            imbalance_sensitivity: ArSpec::new(-0.03, 0.9, 0.004),
            other_imbalance: ArSpec::new(0.0, 0.7, 600.0),
            slope_window: 1_000.0,
            burn_in: 500,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("capacity", self.capacity),
            ("step_volume", self.step_volume),
            ("slope_window", self.slope_window),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("load_daily_amplitude", self.load_daily_amplitude),
            ("scarcity_volume", self.scarcity_volume),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.step_jitter) {
            return Err(Error::Config(format!("step_jitter {} outside [0, 1)", self.step_jitter)));
        }
        if self.thermal_segments.is_empty() || self.thermal_segments.len() > 10 {
            return Err(Error::Config(format!(
                "thermal_segments needs 1 to 10 segments, got {}",
                self.thermal_segments.len()
            )));
        }
        if self.thermal_segments.iter().any(|&(v, s)| !(v > 0.0) || !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config("thermal segments need positive volume and non-negative slope".into()));
        }
        if self.elastic_demand.iter().any(|&(v, p)| !(v > 0.0) || !p.is_finite()) {
            return Err(Error::Config("elastic demand blocks need positive volume and finite price".into()));
        }
        if self.elastic_demand.windows(2).any(|w| w[1].1 > w[0].1) {
            return Err(Error::Config("elastic demand prices must be non-increasing".into()));
        }
        for (name, spec) in [
            ("wind", &self.wind),
            ("forecast_error", &self.forecast_error),
            ("load", &self.load),
            ("must_run", &self.must_run),
            ("fuel_price", &self.fuel_price),
            ("imbalance_premium", &self.imbalance_premium),
            ("imbalance_sensitivity", &self.imbalance_sensitivity),
            ("other_imbalance", &self.other_imbalance),
        ] {
            spec.validate(name)?;
        }
        Ok(())
    }

    /// Steepest price increase per MWh along the thermal stack, allowing for
    /// step jitter.
    pub fn max_thermal_slope(&self) -> f64 {
        self.thermal_segments.iter().map(|s| s.1).fold(0.0, f64::max)
    }

    /// Total thermal volume.
    pub fn thermal_volume(&self) -> f64 {
        self.thermal_segments.iter().map(|s| s.0).sum()
    }
}

/// One synthetic hour: the market state plus the true values of every quantity
/// a forecaster would try to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub hour: usize,
    pub state: MarketState,
    pub generation_forecast: f64,
    pub spot_price: f64,
    pub spot_sensitivity: f64,
    pub imbalance_price: f64,
    pub imbalance_sensitivity: f64,
}

pub struct GroundTruthGenerator {
    config: GeneratorConfig,
    rng: ChaCha8Rng,
    hour: usize,
    wind: Ar1,
    forecast_error: Ar1,
    load: Ar1,
    must_run: Ar1,
    fuel: Ar1,
    premium: Ar1,
    eta_i: Ar1,
    other_imbalance: Ar1,
}

/// Price of the thermal stack at cumulative thermal volume `v` before the fuel shift.
fn stack_price(segments: &[(f64, f64)], v: f64) -> f64 {
    let mut price = 0.0;
    let mut left = v;
    for &(vol, slope) in segments {
        let take = left.min(vol);
        price += take * slope;
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    price
}

/// Finite-difference slope of the clearing price in the WPP's zero-price
/// volume over a `window` MWh wide stencil centred on `volume` (one-sided at 0).
pub fn price_slope(supply: &BidCurve, demand: &BidCurve, volume: f64, window: f64) -> Result<f64> {
    let half = 0.5 * window;
    let lo = (volume - half).max(0.0);
    let hi = volume + half;
    let p_lo = clear_curves(supply, demand, lo)?.price;
    let p_hi = clear_curves(supply, demand, hi)?.price;
    Ok((p_hi - p_lo) / (hi - lo))
}

impl GroundTruthGenerator {
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut g = Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            hour: 0,
            wind: Ar1::new(config.wind),
            forecast_error: Ar1::new(config.forecast_error),
            load: Ar1::new(config.load),
            must_run: Ar1::new(config.must_run),
            fuel: Ar1::new(config.fuel_price),
            premium: Ar1::new(config.imbalance_premium),
            eta_i: Ar1::new(config.imbalance_sensitivity),
            other_imbalance: Ar1::new(config.other_imbalance),
            config,
        };
        for _ in 0..g.config.burn_in {
            g.step_drivers();
        }
        Ok(g)
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    /// Hour-of-day of the next state.
    pub fn hour(&self) -> usize {
        self.hour
    }

    fn step_drivers(&mut self) -> [f64; 8] {
        let rng = &mut self.rng;
        [
            self.wind.step(rng),
            self.forecast_error.step(rng),
            self.load.step(rng),
            self.must_run.step(rng),
            self.fuel.step(rng),
            self.premium.step(rng),
            self.eta_i.step(rng),
            self.other_imbalance.step(rng),
        ]
    }

    fn supply_curve(&mut self, must_run: f64, fuel: f64) -> Result<BidCurve> {
        let c = &self.config;
        let mut blocks: Vec<(f64, f64)> = Vec::with_capacity(128);
        if must_run > 0.0 {
            blocks.push((must_run, c.must_run_price));
        }
        let total = c.thermal_volume();
        let base = fuel + c.thermal_offset;
        let mut v = 0.0;
        let mut last_price = f64::NEG_INFINITY;
        while v < total {
            let jitter = if c.step_jitter > 0.0 {
                self.rng.random_range(-c.step_jitter..c.step_jitter)
            } else {
                0.0
            };
            let width = (c.step_volume * (1.0 + jitter)).min(total - v);
            let mid = v + 0.5 * width;
            // Keeps the offer stack monotone when the fuel shift is negative.
            let price = (base + stack_price(&c.thermal_segments, mid))
                .clamp(PRICE_FLOOR, PRICE_CAP)
                .max(last_price);
            last_price = price;
            blocks.push((width, price));
            v += width;
        }
        if c.scarcity_volume > 0.0 {
            blocks.push((c.scarcity_volume, c.scarcity_price.max(last_price)));
        }
        // Backstop offer at the cap so the auction always clears.
        blocks.push((c.capacity + 20_000.0, PRICE_CAP));
        blocks.sort_by(|a, b| a.1.total_cmp(&b.1));
        BidCurve::from_blocks(super::Side::Supply, &blocks)
    }

    fn demand_curve(&self, load: f64) -> Result<BidCurve> {
        let mut blocks = Vec::with_capacity(self.config.elastic_demand.len() + 1);
        if load > 0.0 {
            blocks.push((load, PRICE_CAP));
        }
        blocks.extend(self.config.elastic_demand.iter().copied());
        BidCurve::from_blocks(super::Side::Demand, &blocks)
    }

    pub fn next_state(&mut self) -> Result<GroundTruth> {
        let [wind, err, load, must_run, fuel, premium, eta_i, other] = self.step_drivers();
        let c = &self.config;
        let hour = self.hour;
        self.hour += 1;

        let cap = c.capacity;
        let forecast = wind.clamp(0.0, 1.0) * cap;
        let generation = (forecast + err * cap).clamp(0.0, cap);
        let phase = 2.0 * std::f64::consts::PI * ((hour % 24) as f64 - 8.0) / 24.0;
        let load = (load + c.load_daily_amplitude * phase.sin()).max(0.0);
        let must_run = must_run.max(0.0);
        let eta_i = eta_i.min(0.0);

        let supply = self.supply_curve(must_run, fuel)?;
        let demand = self.demand_curve(load)?;
        let reference = clear_curves(&supply, &demand, forecast)?;
        let spot_sensitivity = price_slope(&supply, &demand, forecast, self.config.slope_window)?;

        let system_imbalance = other + (generation - reference.wpp_dispatch);
        let imbalance_price = (reference.price + eta_i * system_imbalance + premium).clamp(PRICE_FLOOR, PRICE_CAP);

        let state = MarketState::new(
            supply,
            demand,
            HourDrivers {
                reference_bid: forecast,
                realized_generation: generation,
                base_imbalance_price: imbalance_price,
                imbalance_sensitivity: eta_i,
                base_system_imbalance: system_imbalance,
                spot_sensitivity,
            },
        )?;
        Ok(GroundTruth {
            hour,
            spot_price: reference.price,
            state,
            generation_forecast: forecast,
            spot_sensitivity,
            imbalance_price,
            imbalance_sensitivity: eta_i,
        })
    }
}

impl Iterator for GroundTruthGenerator {
    type Item = Result<GroundTruth>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_state())
    }
}
