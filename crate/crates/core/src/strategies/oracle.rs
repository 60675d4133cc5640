//! Context-conditional best response estimated by brute force on a grid.

use std::fs;
use std::path::Path;

use super::{BiddingStrategy, DeviationBand, Observation, StrategyDecision};
use crate::error::{Error, Result};
use crate::market::{simulate_round, MarketState};

/// Points per axis of the context grid and of the normalized bid grid.
pub const GRID_POINTS: usize = 11;
pub(crate) const CELLS: usize = GRID_POINTS * GRID_POINTS * GRID_POINTS;
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    best: usize,
    samples: usize,
}

/// Best normalized bid per context cell of the `[0, 0.1, ..., 1]^3` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    bid_grid: Vec<f64>,
    cells: Vec<Option<Cell>>,
    /// Cell answering lookups for each cell: itself when filled, else the
    /// nearest filled one.
    fallback: Vec<usize>,
}

fn axis_nearest(v: f64) -> (usize, Option<usize>) {
    let scaled = v.clamp(0.0, 1.0) * (GRID_POINTS - 1) as f64;
    let lo = scaled.floor();
    let frac = scaled - lo;
    let lo = lo as usize;
    if (frac - 0.5).abs() <= TIE_EPS && lo + 1 < GRID_POINTS {
        (lo, Some(lo + 1))
    } else if frac > 0.5 {
        (lo + 1, None)
    } else {
        (lo, None)
    }
}

fn cell_id(ix: [usize; 3]) -> usize {
    (ix[0] * GRID_POINTS + ix[1]) * GRID_POINTS + ix[2]
}

fn cell_coords(id: usize) -> [usize; 3] {
    [id / (GRID_POINTS * GRID_POINTS), (id / GRID_POINTS) % GRID_POINTS, id % GRID_POINTS]
}

/// For every grid cell, itself when filled, else the nearest filled cell
/// (lowest id among equally near ones).
pub(crate) fn nearest_filled(filled: &[bool]) -> Vec<usize> {
    let ids: Vec<usize> = (0..filled.len()).filter(|&c| filled[c]).collect();
    (0..filled.len())
        .map(|c| {
            if filled[c] {
                return c;
            }
            let a = cell_coords(c);
            let dist = |f: usize| {
                let b = cell_coords(f);
                (0..3).map(|i| (a[i] as i64 - b[i] as i64).pow(2)).sum::<i64>()
            };
            ids.iter().copied().min_by_key(|&f| (dist(f), f)).unwrap_or(c)
        })
        .collect()
}

/// Normalized grid `[0, 0.1, ..., 1]`.
pub fn unit_grid() -> Vec<f64> {
    (0..GRID_POINTS).map(|k| k as f64 / (GRID_POINTS - 1) as f64).collect()
}

impl OracleTable {
    /// All nearest grid cells of `x` (several when `x` is equidistant).
    pub fn projection(x: &[f64; 3]) -> Vec<usize> {
        let axes = x.map(axis_nearest);
        let mut out = Vec::with_capacity(8);
        for a in [Some(axes[0].0), axes[0].1].into_iter().flatten() {
            for b in [Some(axes[1].0), axes[1].1].into_iter().flatten() {
                for c in [Some(axes[2].0), axes[2].1].into_iter().flatten() {
                    out.push(cell_id([a, b, c]));
                }
            }
        }
        out
    }

    /// The lowest of the nearest cells.
    pub fn nearest_cell(x: &[f64; 3]) -> usize {
        cell_id(x.map(|v| axis_nearest(v).0))
    }

    /// Builds the table from per-sample values of every grid bid. Each sample
    /// counts towards all of its nearest cells; ties between bids go to the
    /// lowest bid.
    pub fn from_values<'a, I>(samples: I, bid_grid: Vec<f64>) -> Result<Self>
    where
        I: IntoIterator<Item = ([f64; 3], &'a [f64])>,
    {
        let nb = bid_grid.len();
        if nb == 0 {
            return Err(Error::InvalidArgument("empty bid grid".into()));
        }
        let mut sums = vec![0.0; CELLS * nb];
        let mut counts = vec![0usize; CELLS];
        let mut any = false;
        for (x, values) in samples {
            if values.len() != nb {
                return Err(Error::InvalidArgument(format!("{} values for {nb} grid bids", values.len())));
            }
            any = true;
            for cell in Self::projection(&x) {
                counts[cell] += 1;
                for (s, v) in sums[cell * nb..(cell + 1) * nb].iter_mut().zip(values) {
                    *s += v;
                }
            }
        }
        if !any {
            return Err(Error::InvalidArgument("oracle dataset is empty".into()));
        }
        let cells: Vec<Option<Cell>> = (0..CELLS)
            .map(|c| {
                (counts[c] > 0).then(|| {
                    let row = &sums[c * nb..(c + 1) * nb];
                    let mut best = 0;
                    for k in 1..nb {
                        if row[k] > row[best] {
                            best = k;
                        }
                    }
                    Cell { best, samples: counts[c] }
                })
            })
            .collect();
        Ok(Self::with_cells(bid_grid, cells))
    }

    fn with_cells(bid_grid: Vec<f64>, cells: Vec<Option<Cell>>) -> Self {
        let filled: Vec<bool> = cells.iter().map(Option::is_some).collect();
        Self { bid_grid, cells, fallback: nearest_filled(&filled) }
    }

    pub fn bid_grid(&self) -> &[f64] {
        &self.bid_grid
    }

    pub fn is_filled(&self, cell: usize) -> bool {
        self.cells[cell].is_some()
    }

    pub fn filled_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn samples(&self, cell: usize) -> usize {
        self.cells[cell].map_or(0, |c| c.samples)
    }

    /// Stored best normalized bid of `cell`, `None` when unfilled.
    pub fn cell_bid(&self, cell: usize) -> Option<f64> {
        self.cells[cell].map(|c| self.bid_grid[c.best])
    }

    /// Best normalized bid for context `x`, falling back to the nearest filled cell.
    pub fn best_bid(&self, x: &[f64; 3]) -> f64 {
        let cell = self.fallback[Self::nearest_cell(x)];
        self.cell_bid(cell).expect("oracle tables always hold a filled cell")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["x0", "x1", "x2", "best_bid", "samples"]).map_err(|e| Error::csv(path, e))?;
        let step = (GRID_POINTS - 1) as f64;
        for c in 0..CELLS {
            let ix = cell_coords(c);
            w.write_record([
                (ix[0] as f64 / step).to_string(),
                (ix[1] as f64 / step).to_string(),
                (ix[2] as f64 / step).to_string(),
                self.cell_bid(c).map(|b| b.to_string()).unwrap_or_default(),
                self.samples(c).to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a table written by [`OracleTable::write_csv`] on the unit bid grid.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let grid = unit_grid();
        let mut cells = vec![None; CELLS];
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let bad = || Error::Data(format!("{}: malformed oracle row {rec:?}", path.display()));
            let x: Vec<f64> = (0..3)
                .map(|i| rec.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(bad))
                .collect::<Result<_>>()?;
            let cell = Self::nearest_cell(&[x[0], x[1], x[2]]);
            let samples: usize = rec.get(4).and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            let bid = rec.get(3).map(str::trim).unwrap_or("");
            if bid.is_empty() {
                continue;
            }
            let bid: f64 = bid.parse().map_err(|_| bad())?;
            let best = grid
                .iter()
                .position(|g| (g - bid).abs() < 1e-9)
                .ok_or_else(|| Error::Data(format!("{}: bid {bid} is not a grid point", path.display())))?;
            cells[cell] = Some(Cell { best, samples });
        }
        if cells.iter().all(Option::is_none) {
            return Err(Error::Data(format!("{}: oracle table has no filled cell", path.display())));
        }
        Ok(Self::with_cells(grid, cells))
    }
}

/// One auction of the oracle dataset.
#[derive(Debug, Clone)]
pub struct OracleSample<'a> {
    pub context: [f64; 3],
    pub forecast: f64,
    pub state: &'a MarketState,
}

/// Scores every grid bid with the simulated revenue of each sample and keeps
/// the best bid per context cell.
pub fn build_oracle(dataset: &[OracleSample<'_>], deviation: f64) -> Result<OracleTable> {
    let grid = unit_grid();
    let mut values = Vec::with_capacity(dataset.len());
    for s in dataset {
        let band = DeviationBand::new(s.forecast, deviation)?;
        let row = grid
            .iter()
            .map(|&u| Ok(simulate_round(band.from_unit(u), s.state)?.revenue))
            .collect::<Result<Vec<f64>>>()?;
        values.push((s.context, row));
    }
    OracleTable::from_values(values.iter().map(|(x, v)| (*x, v.as_slice())), grid)
}

pub fn oracle_bid(table: &OracleTable, context: &[f64; 3], band: &DeviationBand) -> StrategyDecision {
    StrategyDecision::within(band, band.from_unit(table.best_bid(context)))
}

#[derive(Debug, Clone)]
pub struct OracleStrategy {
    table: OracleTable,
}

impl OracleStrategy {
    pub fn new(table: OracleTable) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &OracleTable {
        &self.table
    }
}

impl BiddingStrategy for OracleStrategy {
    fn name(&self) -> &str {
        "oracle"
    }

    fn decide(&mut self, obs: &Observation) -> Result<StrategyDecision> {
        Ok(oracle_bid(&self.table, &obs.context, &obs.band))
    }
}
