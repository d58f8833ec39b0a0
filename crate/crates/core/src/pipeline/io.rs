//! CSV formats: long-form series, interval forecasts and level lists.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Frequency, IntervalForecast, TimeSeries};

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    id: String,
    frequency: String,
    index: i64,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ForecastRow {
    id: String,
    level: String,
    step: usize,
    lower: f64,
    point: f64,
    upper: f64,
}

/// Parses levels given as percents (`80,95`) or fractions (`0.8,0.95`).
pub fn parse_levels(text: &str) -> Result<Vec<f64>> {
    let mut levels = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let v: f64 = part
            .parse()
            .map_err(|_| Error::Config(format!("bad level {part:?}")))?;
        levels.push(parse_level_value(v)?);
    }
    if levels.is_empty() {
        return Err(Error::Config("no levels given".into()));
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    Ok(levels)
}

fn parse_level_value(v: f64) -> Result<f64> {
    let level = if v >= 1.0 { v / 100.0 } else { v };
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level {v} outside (0, 100)")));
    }
    Ok(level)
}

/// Level as a percent, without decimals when it is a whole percent.
pub fn format_level(level: f64) -> String {
    let p = level * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round() as i64)
    } else {
        format!("{p}")
    }
}

/// Reads long-form series. Rows of one id must share a frequency and have
/// consecutive indices; ids keep their order of first appearance.
pub fn read_series(reader: impl Read, horizon: Option<usize>) -> Result<Vec<TimeSeries>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, (Frequency, Vec<(i64, f64)>)> = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: SeriesRow = row?;
        let freq: Frequency = row.frequency.parse()?;
        let entry = groups.entry(row.id.clone()).or_insert_with(|| {
            order.push(row.id.clone());
            (freq, Vec::new())
        });
        if entry.0 != freq {
            return Err(Error::InvalidSeries(format!("{}: mixed frequencies", row.id)));
        }
        entry.1.push((row.index, row.value));
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let (freq, mut points) = groups.remove(&id).expect("grouped above");
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[1].0 != w[0].0 + 1) {
            return Err(Error::InvalidSeries(format!("{id}: indices are not consecutive")));
        }
        let values = points.into_iter().map(|p| p.1).collect();
        let h = horizon.unwrap_or(freq.horizon());
        out.push(TimeSeries::new(id, values, freq, h)?);
    }
    Ok(out)
}

/// Writes long-form series with 1-based indices.
pub fn write_series<'a>(writer: impl Write, series: impl IntoIterator<Item = &'a TimeSeries>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in series {
        for (i, &value) in s.values().iter().enumerate() {
            w.serialize(SeriesRow {
                id: s.id().to_string(),
                frequency: s.frequency().as_str().to_string(),
                index: i as i64 + 1,
                value,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes forecasts with levels as percents and 1-based steps.
pub fn write_forecasts<'a>(
    writer: impl Write,
    forecasts: impl IntoIterator<Item = (&'a str, &'a [IntervalForecast])>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (id, list) in forecasts {
        for f in list {
            let level = format_level(f.level);
            for t in 0..f.horizon() {
                w.serialize(ForecastRow {
                    id: id.to_string(),
                    level: level.clone(),
                    step: t + 1,
                    lower: f.lower[t],
                    point: f.point[t],
                    upper: f.upper[t],
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Forecasts keyed by series id, levels ascending.
pub type ForecastTable = BTreeMap<String, Vec<IntervalForecast>>;

pub fn read_forecasts(reader: impl Read) -> Result<ForecastTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut raw: BTreeMap<String, BTreeMap<String, Vec<ForecastRow>>> = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: ForecastRow = row?;
        raw.entry(row.id.clone())
            .or_default()
            .entry(row.level.clone())
            .or_default()
            .push(row);
    }
    let mut out = ForecastTable::new();
    for (id, levels) in raw {
        let mut list = Vec::new();
        for (level_text, mut rows) in levels {
            let level = parse_level_value(
                level_text
                    .parse()
                    .map_err(|_| Error::Config(format!("bad level {level_text:?}")))?,
            )?;
            rows.sort_by_key(|r| r.step);
            if rows.iter().enumerate().any(|(i, r)| r.step != i + 1) {
                return Err(Error::InvalidSeries(format!("{id}: forecast steps are not 1..h")));
            }
            let lower = rows.iter().map(|r| r.lower).collect();
            let point = rows.iter().map(|r| r.point).collect();
            let upper = rows.iter().map(|r| r.upper).collect();
            list.push(IntervalForecast::new(level, lower, point, upper)?);
        }
        list.sort_by(|a, b| a.level.total_cmp(&b.level));
        out.insert(id, list);
    }
    Ok(out)
}
