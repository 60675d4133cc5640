use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Supply,
    Demand,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Supply => "supply",
            Side::Demand => "demand",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "supply" => Ok(Side::Supply),
            "demand" => Ok(Side::Demand),
            other => Err(Error::Data(format!("unknown curve side {other:?}"))),
        }
    }
}

/// Aggregated hourly bid curve as a monotone step function.
///
/// Breakpoint `k` is `(cumulative volume, price)`: the volume between the previous
/// breakpoint and this one is offered (supply) or bid (demand) at `price`.
#[derive(Debug, Clone, PartialEq)]
pub struct BidCurve {
    side: Side,
    points: Vec<(f64, f64)>,
}

impl BidCurve {
    pub fn new(side: Side, points: Vec<(f64, f64)>) -> Result<Self> {
        let mut prev = (0.0, match side {
            Side::Supply => f64::NEG_INFINITY,
            Side::Demand => f64::INFINITY,
        });
        for (k, &(vol, price)) in points.iter().enumerate() {
            if !vol.is_finite() || !price.is_finite() {
                return Err(Error::InvalidArgument(format!("{} breakpoint {k} is not finite", side.as_str())));
            }
            if vol <= prev.0 {
                return Err(Error::InvalidArgument(format!(
                    "{} cumulative volume must increase strictly (breakpoint {k}: {vol} after {})",
                    side.as_str(),
                    prev.0
                )));
            }
            let monotone = match side {
                Side::Supply => price >= prev.1,
                Side::Demand => price <= prev.1,
            };
            if !monotone {
                return Err(Error::InvalidArgument(format!(
                    "{} prices not monotone at breakpoint {k}",
                    side.as_str()
                )));
            }
            prev = (vol, price);
        }
        Ok(Self { side, points })
    }

    pub fn supply(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(Side::Supply, points)
    }

    pub fn demand(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(Side::Demand, points)
    }

    /// Builds a curve from `(volume, price)` blocks listed in merit order.
    pub fn from_blocks(side: Side, blocks: &[(f64, f64)]) -> Result<Self> {
        let mut cum = 0.0;
        let points = blocks
            .iter()
            .map(|&(v, p)| {
                cum += v;
                (cum, p)
            })
            .collect();
        Self::new(side, points)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn total_volume(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.0)
    }

    /// `(volume, price)` per step.
    pub fn blocks(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev = 0.0;
        self.points.iter().map(move |&(cum, p)| {
            let v = cum - prev;
            prev = cum;
            (v, p)
        })
    }

    /// Price of the step covering cumulative volume `v` (`None` beyond the curve).
    pub fn price_at(&self, v: f64) -> Option<f64> {
        if v < 0.0 {
            return None;
        }
        let k = self.points.partition_point(|&(cum, _)| cum < v);
        self.points.get(k).map(|p| p.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_monotonicity() {
        assert!(BidCurve::supply(vec![(10.0, 5.0), (20.0, 7.0)]).is_ok());
        assert!(BidCurve::supply(vec![(10.0, 5.0), (20.0, 4.0)]).is_err());
        assert!(BidCurve::demand(vec![(10.0, 5.0), (20.0, 7.0)]).is_err());
        assert!(BidCurve::supply(vec![(10.0, 5.0), (10.0, 6.0)]).is_err());
        assert!(BidCurve::supply(vec![(0.0, 5.0)]).is_err());
        assert!(BidCurve::supply(vec![(1.0, f64::NAN)]).is_err());
    }

    #[test]
    fn blocks_and_lookup() {
        let c = BidCurve::from_blocks(Side::Supply, &[(20.0, 0.0), (100.0, 50.0)]).unwrap();
        assert_eq!(c.points(), &[(20.0, 0.0), (120.0, 50.0)]);
        assert_eq!(c.blocks().collect::<Vec<_>>(), vec![(20.0, 0.0), (100.0, 50.0)]);
        assert_eq!(c.price_at(20.0), Some(0.0));
        assert_eq!(c.price_at(20.5), Some(50.0));
        assert_eq!(c.price_at(121.0), None);
        assert_eq!(c.total_volume(), 120.0);
    }
}
