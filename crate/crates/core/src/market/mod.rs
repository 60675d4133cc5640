//! Day-ahead clearing and real-time settlement for one hourly auction pair.

mod clearing;
mod curve;
pub mod generator;
pub mod io;

pub use clearing::{clear_curves, Clearing, PRICE_CAP, PRICE_FLOOR};
pub use curve::{BidCurve, Side};
pub use generator::{GeneratorConfig, GroundTruth, GroundTruthGenerator};

use crate::error::{Error, Result};

/// Scalar drivers of one hour besides the curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourDrivers {
    /// Volume the WPP bid in the recorded market (its forecast). The base
    /// imbalance figures already contain the WPP imbalance under this bid.
    pub reference_bid: f64,
    pub realized_generation: f64,
    pub base_imbalance_price: f64,
    pub imbalance_sensitivity: f64,
    pub base_system_imbalance: f64,
    pub spot_sensitivity: f64,
}

/// Exogenous state of one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    supply: BidCurve,
    demand: BidCurve,
    drivers: HourDrivers,
    reference: Clearing,
}

impl MarketState {
    pub fn new(supply: BidCurve, demand: BidCurve, drivers: HourDrivers) -> Result<Self> {
        if supply.side() != Side::Supply || demand.side() != Side::Demand {
            return Err(Error::InvalidArgument("curves passed on the wrong sides".into()));
        }
        let d = &drivers;
        let scalars = [
            d.reference_bid,
            d.realized_generation,
            d.base_imbalance_price,
            d.imbalance_sensitivity,
            d.base_system_imbalance,
            d.spot_sensitivity,
        ];
        if scalars.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite market driver in {drivers:?}")));
        }
        if d.realized_generation < 0.0 || d.reference_bid < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "generation {} and reference bid {} must be non-negative",
                d.realized_generation, d.reference_bid
            )));
        }
        let reference = clear_curves(&supply, &demand, d.reference_bid)?;
        Ok(Self { supply, demand, drivers, reference })
    }

    pub fn supply(&self) -> &BidCurve {
        &self.supply
    }

    pub fn demand(&self) -> &BidCurve {
        &self.demand
    }

    pub fn drivers(&self) -> &HourDrivers {
        &self.drivers
    }

    pub fn realized_generation(&self) -> f64 {
        self.drivers.realized_generation
    }

    pub fn base_imbalance_price(&self) -> f64 {
        self.drivers.base_imbalance_price
    }

    pub fn imbalance_sensitivity(&self) -> f64 {
        self.drivers.imbalance_sensitivity
    }

    pub fn base_system_imbalance(&self) -> f64 {
        self.drivers.base_system_imbalance
    }

    pub fn spot_sensitivity(&self) -> f64 {
        self.drivers.spot_sensitivity
    }

    pub fn reference_bid(&self) -> f64 {
        self.drivers.reference_bid
    }

    /// Spot price of the recorded market, i.e. with the reference bid.
    pub fn reference_spot_price(&self) -> f64 {
        self.reference.price
    }

    pub fn reference_dispatch(&self) -> f64 {
        self.reference.wpp_dispatch
    }

    /// WPP imbalance contained in the base system imbalance.
    pub fn reference_imbalance(&self) -> f64 {
        self.drivers.realized_generation - self.reference.wpp_dispatch
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketOutcome {
    pub spot_price: f64,
    pub dispatch: f64,
    pub imbalance_price: f64,
    pub generation: f64,
    pub revenue: f64,
}

impl MarketOutcome {
    pub fn imbalance(&self) -> f64 {
        self.generation - self.dispatch
    }

    pub fn day_ahead_revenue(&self) -> f64 {
        self.spot_price * self.dispatch
    }

    pub fn real_time_revenue(&self) -> f64 {
        self.imbalance_price * (self.generation - self.dispatch)
    }
}

/// Clears the day-ahead auction with the WPP offering `wpp_bid_volume` at zero.
/// Returns `(spot price, dispatch)`.
pub fn clear_day_ahead(wpp_bid_volume: f64, state: &MarketState) -> Result<(f64, f64)> {
    let c = clear_curves(&state.supply, &state.demand, wpp_bid_volume)?;
    Ok((c.price, c.wpp_dispatch))
}

/// `base + sensitivity * delta`, clamped to the price limits.
pub fn imbalance_price(base: f64, sensitivity: f64, delta: f64) -> f64 {
    (base + sensitivity * delta).clamp(PRICE_FLOOR, PRICE_CAP)
}

pub fn settle_real_time(wpp_imbalance: f64, state: &MarketState) -> f64 {
    imbalance_price(
        state.base_imbalance_price(),
        state.imbalance_sensitivity(),
        wpp_imbalance - state.reference_imbalance(),
    )
}

pub fn revenue(spot_price: f64, dispatch: f64, imbalance_price: f64, generation: f64) -> f64 {
    spot_price * dispatch + imbalance_price * (generation - dispatch)
}

pub fn simulate_round(wpp_bid_volume: f64, state: &MarketState) -> Result<MarketOutcome> {
    let (spot_price, dispatch) = clear_day_ahead(wpp_bid_volume, state)?;
    let generation = state.realized_generation();
    let imbalance_price = settle_real_time(generation - dispatch, state);
    Ok(MarketOutcome {
        spot_price,
        dispatch,
        imbalance_price,
        generation,
        revenue: revenue(spot_price, dispatch, imbalance_price, generation),
    })
}
