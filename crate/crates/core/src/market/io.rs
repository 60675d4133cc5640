//! CSV files for recorded or generated market data.
//!
//! `market.csv` holds one row per hour:
//! `timestamp,spot_price,system_imbalance,imbalance_price,wind_forecast,wind_actual,eta_s,eta_i`
//! with optional (empty or absent) sensitivity columns. Each hour has a curve file
//! `curves/<timestamp>.csv` with rows `side,cum_volume,price`.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Utc};

use super::{BidCurve, Side};
use crate::error::{Error, Result};

pub const MARKET_FILE: &str = "market.csv";
pub const CURVE_DIR: &str = "curves";
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

const MARKET_HEADER: [&str; 8] = [
    "timestamp",
    "spot_price",
    "system_imbalance",
    "imbalance_price",
    "wind_forecast",
    "wind_actual",
    "eta_s",
    "eta_i",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MarketRecord {
    pub timestamp: DateTime<Utc>,
    pub spot_price: f64,
    pub system_imbalance: f64,
    pub imbalance_price: f64,
    pub wind_forecast: f64,
    pub wind_actual: f64,
    pub eta_s: Option<f64>,
    pub eta_i: Option<f64>,
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(s) {
        return Ok(ts.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .map(|n| n.and_utc())
        .map_err(|_| Error::Data(format!("bad timestamp {s:?}")))
}

pub fn curve_path(dir: &Path, ts: &DateTime<Utc>) -> PathBuf {
    dir.join(CURVE_DIR).join(format!("{}.csv", format_timestamp(ts)))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Data(format!("{}: missing column {name}", path.display())))
}

fn number(rec: &csv::StringRecord, idx: usize, name: &str, path: &Path) -> Result<f64> {
    let raw = rec.get(idx).unwrap_or("").trim();
    let v: f64 = raw.parse().map_err(|_| {
        Error::Data(format!(
            "{}: line {}: bad {name} value {raw:?}",
            path.display(),
            rec.position().map_or(0, |p| p.line())
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::Data(format!("{}: non-finite {name}", path.display())));
    }
    Ok(v)
}

fn optional(rec: &csv::StringRecord, idx: Option<usize>, name: &str, path: &Path) -> Result<Option<f64>> {
    match idx {
        Some(i) if !rec.get(i).unwrap_or("").trim().is_empty() => number(rec, i, name, path).map(Some),
        _ => Ok(None),
    }
}

pub fn read_market_csv(path: &Path) -> Result<Vec<MarketRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    let required: Vec<usize> = MARKET_HEADER[..6]
        .iter()
        .map(|n| column(&headers, n, path))
        .collect::<Result<_>>()?;
    let eta_s = column(&headers, "eta_s", path).ok();
    let eta_i = column(&headers, "eta_i", path).ok();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let num = |k: usize| number(&rec, required[k], MARKET_HEADER[k], path);
        let record = MarketRecord {
            timestamp: parse_timestamp(rec.get(required[0]).unwrap_or(""))?,
            spot_price: num(1)?,
            system_imbalance: num(2)?,
            imbalance_price: num(3)?,
            wind_forecast: num(4)?,
            wind_actual: num(5)?,
            eta_s: optional(&rec, eta_s, "eta_s", path)?,
            eta_i: optional(&rec, eta_i, "eta_i", path)?,
        };
        if record.wind_forecast < 0.0 || record.wind_actual < 0.0 {
            return Err(Error::Data(format!(
                "{}: negative wind volume at {}",
                path.display(),
                format_timestamp(&record.timestamp)
            )));
        }
        if let Some(prev) = out.last().map(|p: &MarketRecord| p.timestamp) {
            if record.timestamp <= prev {
                return Err(Error::Data(format!(
                    "{}: timestamps not strictly increasing at {}",
                    path.display(),
                    format_timestamp(&record.timestamp)
                )));
            }
        }
        out.push(record);
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{}: no rows", path.display())));
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_market_csv(path: &Path, records: &[MarketRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(MARKET_HEADER).map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.write_record([
            format_timestamp(&r.timestamp),
            r.spot_price.to_string(),
            r.system_imbalance.to_string(),
            r.imbalance_price.to_string(),
            r.wind_forecast.to_string(),
            r.wind_actual.to_string(),
            fmt_opt(r.eta_s),
            fmt_opt(r.eta_i),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads one hour's `(supply, demand)` curves.
pub fn read_curves(path: &Path) -> Result<(BidCurve, BidCurve)> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    let side_col = column(&headers, "side", path)?;
    let vol_col = column(&headers, "cum_volume", path)?;
    let price_col = column(&headers, "price", path)?;
    let (mut supply, mut demand) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let side: Side = rec.get(side_col).unwrap_or("").parse()?;
        let point = (
            number(&rec, vol_col, "cum_volume", path)?,
            number(&rec, price_col, "price", path)?,
        );
        match side {
            Side::Supply => supply.push(point),
            Side::Demand => demand.push(point),
        }
    }
    let wrap = |e: Error| Error::Data(format!("{}: {e}", path.display()));
    Ok((
        BidCurve::supply(supply).map_err(wrap)?,
        BidCurve::demand(demand).map_err(wrap)?,
    ))
}

pub fn write_curves(path: &Path, supply: &BidCurve, demand: &BidCurve) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["side", "cum_volume", "price"]).map_err(|e| Error::csv(path, e))?;
    for curve in [supply, demand] {
        for &(v, p) in curve.points() {
            w.write_record([curve.side().as_str(), &v.to_string(), &p.to_string()])
                .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
