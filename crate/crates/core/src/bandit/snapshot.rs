use std::io::{Read, Write};

use super::{ActiveSet, Ball, Point};
use crate::error::{Error, Result};

const SNAPSHOT: &str = "<active-set snapshot>";

pub(super) fn write<W: Write>(active: &ActiveSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "id".to_string(),
        "parent_id".into(),
        "radius".into(),
        "samples".into(),
        "reward_sum".into(),
    ];
    header.extend((0..active.dim()).map(|i| format!("c{i}")));
    w.write_record(&header).map_err(|e| Error::csv(SNAPSHOT, e))?;
    for b in active.balls() {
        let mut row = vec![
            b.id.to_string(),
            b.parent.map(|p| p.to_string()).unwrap_or_default(),
            b.radius().to_string(),
            b.samples.to_string(),
            b.reward_sum.to_string(),
        ];
        row.extend(b.center.coords().iter().map(|c| c.to_string()));
        w.write_record(&row).map_err(|e| Error::csv(SNAPSHOT, e))?;
    }
    w.flush().map_err(|e| Error::io(SNAPSHOT, e))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Data(format!("snapshot: bad {name} in row {:?}", rec)))
}

pub(super) fn read<R: Read>(input: R, horizon: f64) -> Result<ActiveSet> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::csv(SNAPSHOT, e))?.clone();
    if header.len() < 6 || &header[0] != "id" || &header[2] != "radius" {
        return Err(Error::Data(format!("snapshot: unexpected header {header:?}")));
    }
    let dim = header.len() - 5;
    let mut balls = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(SNAPSHOT, e))?;
        let radius: f64 = field(&rec, 2, "radius")?;
        let depth = -radius.log2();
        if !(depth >= 0.0) || depth.fract() != 0.0 {
            return Err(Error::Data(format!("snapshot: radius {radius} is not a power of two")));
        }
        let parent = match rec.get(1).map(str::trim) {
            Some("") | None => None,
            Some(_) => Some(field(&rec, 1, "parent_id")?),
        };
        let coords = (0..dim)
            .map(|i| field(&rec, 5 + i, "center"))
            .collect::<Result<Vec<f64>>>()?;
        balls.push(Ball {
            id: field(&rec, 0, "id")?,
            parent,
            center: Point::new(coords)?,
            depth: depth as u32,
            samples: field(&rec, 3, "samples")?,
            reward_sum: field(&rec, 4, "reward_sum")?,
        });
    }
    ActiveSet::from_balls(dim, horizon, balls)
}
