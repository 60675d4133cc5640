//! Monte-Carlo estimates of the context-conditional reward landscape.
//!
//! A pool of auctions is drawn from an independent stream of the synthetic
//! generator. Each pooled auction is scored at every point of a normalized bid
//! grid, and samples are binned by the nearest cell of the `[0, 0.1, ..., 1]^3`
//! context grid. The best grid mean of a cell is the estimate of `mu*(x)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::Hour;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeaturePipeline, RewardTransform};
use crate::market::generator::{GeneratorConfig, GroundTruthGenerator};
use crate::market::simulate_round;
use crate::strategies::{nearest_filled, unit_grid, DeviationBand, OracleTable, CELLS};

/// Evenly spaced normalized bids `0, 1/(n-1), ..., 1`.
pub fn bid_grid(points: usize) -> Vec<f64> {
    (0..points).map(|k| k as f64 / (points - 1) as f64).collect()
}

/// One pooled auction scored on the pool grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSample {
    pub context: [f64; 3],
    /// Revenue of the forecast bid.
    pub reference_revenue: f64,
    pub revenues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McPool {
    /// Sorted normalized bids every sample is scored at.
    pub grid: Vec<f64>,
    pub samples: Vec<PoolSample>,
}

fn merge_grids(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = a.iter().chain(b).copied().collect();
    g.sort_by(f64::total_cmp);
    g.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    g
}

fn indices(grid: &[f64], wanted: &[f64]) -> Vec<usize> {
    wanted
        .iter()
        .map(|w| grid.iter().position(|g| (g - w).abs() < 1e-12).expect("grid holds every wanted point"))
        .collect()
}

impl McPool {
    /// Scores `hours` on the union of `regret_points` grid and the oracle grid.
    pub fn from_hours<'a, I>(hours: I, deviation: f64, regret_points: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Hour>,
    {
        let grid = merge_grids(&bid_grid(regret_points.max(2)), &unit_grid());
        let mut samples = Vec::new();
        for h in hours {
            samples.push(score(&grid, h.forecast.context.as_array(), h.forecast.generation, &h.truth.state, deviation)?);
        }
        Ok(Self { grid, samples })
    }

    /// Draws `samples` auctions after a `warm_up`-hour feature warm-up.
    #[allow(clippy::too_many_arguments)]
    pub fn generate(
        generator: &GeneratorConfig,
        features: &FeatureConfig,
        deviation: f64,
        regret_points: usize,
        warm_up: usize,
        samples: usize,
        market_seed: u64,
        feature_seed: u64,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidArgument("Monte-Carlo pool needs at least one sample".into()));
        }
        let grid = merge_grids(&bid_grid(regret_points.max(2)), &unit_grid());
        let mut gen = GroundTruthGenerator::new(generator.clone(), market_seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(feature_seed);
        let warm = gen.by_ref().take(warm_up).collect::<Result<Vec<_>>>()?;
        let mut pipeline = FeaturePipeline::new(features.clone(), &warm, &mut rng)?;
        let mut out = Vec::with_capacity(samples);
        for _ in 0..samples {
            let gt = gen.next_state()?;
            let f = pipeline.forecast(&gt, &mut rng)?;
            out.push(score(&grid, f.context.as_array(), f.generation, &gt.state, deviation)?);
        }
        Ok(Self { grid, samples: out })
    }

    /// Oracle table: best revenue per context cell on the unit grid.
    pub fn oracle_table(&self) -> Result<OracleTable> {
        let idx = indices(&self.grid, &unit_grid());
        let rows: Vec<([f64; 3], Vec<f64>)> = self
            .samples
            .iter()
            .map(|s| (s.context, idx.iter().map(|&i| s.revenues[i]).collect()))
            .collect();
        OracleTable::from_values(rows.iter().map(|(x, v)| (*x, v.as_slice())), unit_grid())
    }

    /// Regret oracle on the `points` grid with rewards from `transform`.
    pub fn oracle_value(&self, points: usize, transform: &RewardTransform) -> Result<OracleValue> {
        let grid = bid_grid(points);
        let idx = indices(&self.grid, &grid);
        let rows: Vec<([f64; 3], Vec<f64>)> = self
            .samples
            .iter()
            .map(|s| {
                let r = idx.iter().map(|&i| transform.value(s.revenues[i], s.reference_revenue)).collect();
                (s.context, r)
            })
            .collect();
        OracleValue::from_rewards(rows.iter().map(|(x, v)| (*x, v.as_slice())), grid)
    }
}

fn score(grid: &[f64], context: [f64; 3], forecast: f64, state: &crate::market::MarketState, deviation: f64) -> Result<PoolSample> {
    let band = DeviationBand::new(forecast, deviation)?;
    let revenues = grid
        .iter()
        .map(|&u| Ok(simulate_round(band.from_unit(u), state)?.revenue))
        .collect::<Result<Vec<f64>>>()?;
    Ok(PoolSample { context, reference_revenue: simulate_round(forecast, state)?.revenue, revenues })
}

/// Estimate of `mu*(x)` for the cell holding `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub mu_star: f64,
    /// Standard error of the mean reward at the best grid bid.
    pub std_error: f64,
    /// Best normalized grid bid.
    pub best_bid: f64,
    /// Samples behind the estimate (of the fallback cell when `x`'s is empty).
    pub samples: usize,
    pub cell: usize,
}

#[derive(Debug, Clone)]
struct CellStats {
    means: Vec<f64>,
    best: usize,
    std_error: f64,
    samples: usize,
}

/// Per-cell mean rewards on a normalized bid grid.
#[derive(Debug, Clone)]
pub struct OracleValue {
    grid: Vec<f64>,
    cells: Vec<Option<CellStats>>,
    fallback: Vec<usize>,
}

impl OracleValue {
    /// Bins `(context, rewards on grid)` samples by nearest context cell.
    pub fn from_rewards<'a, I>(samples: I, grid: Vec<f64>) -> Result<Self>
    where
        I: IntoIterator<Item = ([f64; 3], &'a [f64])>,
    {
        let nb = grid.len();
        if nb < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("bid grid needs two or more increasing points".into()));
        }
        let mut sum = vec![0.0; CELLS * nb];
        let mut sq = vec![0.0; CELLS * nb];
        let mut count = vec![0usize; CELLS];
        for (x, rewards) in samples {
            if rewards.len() != nb {
                return Err(Error::InvalidArgument(format!("{} rewards for {nb} grid bids", rewards.len())));
            }
            let c = OracleTable::nearest_cell(&x);
            count[c] += 1;
            for k in 0..nb {
                sum[c * nb + k] += rewards[k];
                sq[c * nb + k] += rewards[k] * rewards[k];
            }
        }
        if count.iter().all(|&n| n == 0) {
            return Err(Error::InvalidArgument("no Monte-Carlo samples".into()));
        }
        let cells: Vec<Option<CellStats>> = (0..CELLS)
            .map(|c| {
                let n = count[c];
                (n > 0).then(|| {
                    let means: Vec<f64> = (0..nb).map(|k| sum[c * nb + k] / n as f64).collect();
                    let mut best = 0;
                    for k in 1..nb {
                        if means[k] > means[best] {
                            best = k;
                        }
                    }
                    // A single draw says nothing about spread; fall back to the
                    // widest spread a [0, 0.5] reward can have.
                    let std_error = if n < 2 {
                        0.25
                    } else {
                        let m = means[best];
                        let var = ((sq[c * nb + best] - n as f64 * m * m) / (n - 1) as f64).max(0.0);
                        (var / n as f64).sqrt()
                    };
                    CellStats { means, best, std_error, samples: n }
                })
            })
            .collect();
        let filled: Vec<bool> = cells.iter().map(Option::is_some).collect();
        Ok(Self { grid, fallback: nearest_filled(&filled), cells })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn filled_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    fn stats(&self, x: &[f64; 3]) -> (usize, &CellStats) {
        let cell = self.fallback[OracleTable::nearest_cell(x)];
        (cell, self.cells[cell].as_ref().expect("fallback cells are filled"))
    }

    pub fn estimate(&self, x: &[f64; 3]) -> OracleEstimate {
        let (cell, s) = self.stats(x);
        OracleEstimate {
            mu_star: s.means[s.best],
            std_error: s.std_error,
            best_bid: self.grid[s.best],
            samples: s.samples,
            cell,
        }
    }

    /// Mean reward of normalized bid `u`, linear between grid points.
    pub fn mean_reward(&self, x: &[f64; 3], u: f64) -> f64 {
        let (_, s) = self.stats(x);
        let u = u.clamp(0.0, 1.0);
        let k = self.grid.partition_point(|&g| g <= u).clamp(1, self.grid.len() - 1);
        let (g0, g1) = (self.grid[k - 1], self.grid[k]);
        let w = (u - g0) / (g1 - g0);
        s.means[k - 1] + w * (s.means[k] - s.means[k - 1])
    }

    /// `mu*(x) - mu(u, x)`, never negative.
    pub fn regret(&self, x: &[f64; 3], u: f64) -> f64 {
        (self.estimate(x).mu_star - self.mean_reward(x, u)).max(0.0)
    }
}

/// `mu*(x)` from a fresh pool of `mc_samples` synthetic auctions.
#[allow(clippy::too_many_arguments)]
pub fn estimate_oracle_value(
    context: &[f64; 3],
    generator: &GeneratorConfig,
    features: &FeatureConfig,
    transform: &RewardTransform,
    deviation: f64,
    grid_points: usize,
    warm_up: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    let pool = McPool::generate(
        generator,
        features,
        deviation,
        grid_points,
        warm_up,
        mc_samples,
        super::derive_seed(seed, super::data::STREAM_POOL_MARKET),
        super::derive_seed(seed, super::data::STREAM_POOL_FEATURES),
    )?;
    Ok(pool.oracle_value(grid_points, transform)?.estimate(context))
}
