//! Uniform-price clearing of one hourly auction by intersecting step curves.

use super::curve::BidCurve;
use crate::error::{Error, Result};

/// Hard price limits applied to every simulated price.
pub const PRICE_CAP: f64 = 4000.0;
pub const PRICE_FLOOR: f64 = -4000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearing {
    pub price: f64,
    /// Total matched volume.
    pub traded: f64,
    /// Accepted part of the zero-price WPP offer.
    pub wpp_dispatch: f64,
}

/// Supply blocks grouped by equal price, in ascending price order, with the WPP
/// volume merged into the zero-price tier. Returns the tiers and the index of
/// that tier (if any).
fn supply_tiers(supply: &BidCurve, wpp_volume: f64) -> (Vec<(f64, f64)>, Option<usize>) {
    let mut tiers: Vec<(f64, f64)> = Vec::with_capacity(supply.points().len() + 1);
    let mut inserted = wpp_volume <= 0.0;
    for (vol, price) in supply.blocks() {
        if !inserted && price > 0.0 {
            tiers.push((0.0, wpp_volume));
            inserted = true;
        }
        let mut vol = vol;
        if !inserted && price == 0.0 {
            vol += wpp_volume;
            inserted = true;
        }
        match tiers.last_mut() {
            Some(t) if t.0 == price => t.1 += vol,
            _ => tiers.push((price, vol)),
        }
    }
    if !inserted {
        tiers.push((0.0, wpp_volume));
    }
    let zero = tiers.iter().position(|t| t.0 == 0.0);
    (tiers, zero)
}

fn demand_tiers(demand: &BidCurve) -> Vec<(f64, f64)> {
    let mut tiers: Vec<(f64, f64)> = Vec::with_capacity(demand.points().len());
    for (vol, price) in demand.blocks() {
        match tiers.last_mut() {
            Some(t) if t.0 == price => t.1 += vol,
            _ => tiers.push((price, vol)),
        }
    }
    tiers
}

/// Clears `supply` (other participants) plus a WPP offer of `wpp_volume` at
/// price zero against `demand`.
///
/// The price is set by the partially accepted tier; when both curves switch
/// tiers at the same volume it is the midpoint of the range of prices that
/// clear the market. At price zero the WPP shares the marginal tier pro rata.
/// Demand bid at the price cap that exceeds all supply is a clearing error;
/// price-responsive demand is curtailed at its bid price instead.
pub fn clear_curves(supply: &BidCurve, demand: &BidCurve, wpp_volume: f64) -> Result<Clearing> {
    if !(wpp_volume >= 0.0) || !wpp_volume.is_finite() {
        return Err(Error::InvalidArgument(format!("bid volume {wpp_volume} must be finite and non-negative")));
    }
    let (s, zero_tier) = supply_tiers(supply, wpp_volume);
    let d = demand_tiers(demand);

    let (mut i, mut j) = (0usize, 0usize);
    let mut rem_s = s.first().map_or(0.0, |t| t.1);
    let mut rem_d = d.first().map_or(0.0, |t| t.1);
    let mut traded = 0.0;
    let mut below_zero = 0.0; // accepted volume priced strictly below zero
    while i < s.len() && j < d.len() && s[i].0 <= d[j].0 {
        let m = rem_s.min(rem_d);
        traded += m;
        if s[i].0 < 0.0 {
            below_zero += m;
        }
        rem_s -= m;
        rem_d -= m;
        if rem_s <= 0.0 {
            i += 1;
            rem_s = s.get(i).map_or(0.0, |t| t.1);
        }
        if rem_d <= 0.0 {
            j += 1;
            rem_d = d.get(j).map_or(0.0, |t| t.1);
        }
    }

    let supply_partial = i < s.len() && rem_s < s[i].1;
    let demand_partial = j < d.len() && rem_d < d[j].1;
    let price = if supply_partial {
        s[i].0
    } else if demand_partial {
        if i == s.len() && d[j].0 >= PRICE_CAP {
            return Err(Error::Clearing {
                supplied: traded,
                demanded: traded + rem_d + d[j + 1..].iter().map(|t| t.1).sum::<f64>(),
                price: d[j].0,
            });
        }
        d[j].0
    } else {
        let lo = [
            i.checked_sub(1).map_or(PRICE_FLOOR, |k| s[k].0),
            d.get(j).map_or(PRICE_FLOOR, |t| t.0),
        ];
        let hi = [
            s.get(i).map_or(PRICE_CAP, |t| t.0),
            j.checked_sub(1).map_or(PRICE_CAP, |k| d[k].0),
        ];
        0.5 * (lo[0].max(lo[1]) + hi[0].min(hi[1]))
    };

    let wpp_dispatch = if wpp_volume <= 0.0 || price < 0.0 {
        0.0
    } else if price > 0.0 {
        wpp_volume
    } else {
        let tier = zero_tier.expect("wpp volume sits in the zero tier");
        let accepted = (traded - below_zero).clamp(0.0, s[tier].1);
        wpp_volume * accepted / s[tier].1
    };
    Ok(Clearing {
        price: price.clamp(PRICE_FLOOR, PRICE_CAP),
        traded,
        wpp_dispatch,
    })
}
