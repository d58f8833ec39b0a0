//! Interval and point accuracy scores.
//!
//! Both scaled scores divide by the in-sample mean absolute seasonal
//! difference of the training data, which makes them scale free.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::MethodId;

/// Mean absolute seasonal difference of the training data.
pub fn seasonal_scale(train: &[f64], m: usize) -> Result<f64> {
    let m = m.max(1);
    if train.len() <= m {
        return Err(Error::SeriesTooShort {
            needed: m + 1,
            got: train.len(),
        });
    }
    let diffs: Vec<f64> = train[m..]
        .iter()
        .zip(train)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let scale = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let magnitude = train.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(scale > 1e-12 * magnitude) || scale == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(scale)
}

fn check_lengths(test: &[f64], others: &[&[f64]]) -> Result<()> {
    if test.is_empty() || others.iter().any(|o| o.len() != test.len()) {
        return Err(Error::InvalidSeries(
            "forecast and test lengths must match and be positive".into(),
        ));
    }
    Ok(())
}

/// Mean scaled interval score of central intervals with tail probability `alpha`.
pub fn msis(
    test: &[f64],
    lower: &[f64],
    upper: &[f64],
    train: &[f64],
    m: usize,
    alpha: f64,
) -> Result<f64> {
    check_lengths(test, &[lower, upper])?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    let scale = seasonal_scale(train, m)?;
    let penalty = 2.0 / alpha;
    let total: f64 = test
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(y, (l, u))| {
            let mut s = u - l;
            if y < l {
                s += penalty * (l - y);
            }
            if y > u {
                s += penalty * (y - u);
            }
            s
        })
        .sum();
    Ok(total / test.len() as f64 / scale)
}

/// Mean absolute scaled error.
pub fn mase(test: &[f64], point: &[f64], train: &[f64], m: usize) -> Result<f64> {
    check_lengths(test, &[point])?;
    let scale = seasonal_scale(train, m)?;
    let mae = test
        .iter()
        .zip(point)
        .map(|(y, p)| (y - p).abs())
        .sum::<f64>()
        / test.len() as f64;
    Ok(mae / scale)
}

/// Number of test values inside `[lower, upper]`, bounds inclusive.
pub fn covered_count(test: &[f64], lower: &[f64], upper: &[f64]) -> usize {
    test.iter()
        .zip(lower.iter().zip(upper))
        .filter(|(y, (l, u))| *y >= *l && *y <= *u)
        .count()
}

/// Pooled coverage counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub covered: usize,
    pub total: usize,
}

impl Coverage {
    pub fn add(&mut self, covered: usize, total: usize) {
        self.covered += covered;
        self.total += total;
    }

    pub fn merge(self, other: Coverage) -> Coverage {
        Coverage {
            covered: self.covered + other.covered,
            total: self.total + other.total,
        }
    }

    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.covered as f64 / self.total as f64
        }
    }
}

/// Absolute coverage difference: `|empirical coverage - level|`, with
/// `level` the nominal coverage (e.g. 0.95).
pub fn acd(coverage: Coverage, level: f64) -> f64 {
    (coverage.rate() - level).abs()
}

/// Scores of one method at one level on one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub msis: f64,
    pub log_msis: f64,
    pub mase: f64,
    pub covered: usize,
    pub horizon: usize,
}

impl ScoreEntry {
    /// Scores a forecast; `None` when the scale denominator is zero or the
    /// score is not strictly positive (the log would be undefined).
    pub fn compute(
        test: &[f64],
        lower: &[f64],
        point: &[f64],
        upper: &[f64],
        train: &[f64],
        m: usize,
        level: f64,
    ) -> Result<Option<ScoreEntry>> {
        let s = match msis(test, lower, upper, train, m, 1.0 - level) {
            Ok(v) => v,
            Err(Error::ZeroDenominator) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !(s > 0.0 && s.is_finite()) {
            return Ok(None);
        }
        let p = mase(test, point, train, m)?;
        Ok(Some(ScoreEntry {
            msis: s,
            log_msis: s.ln(),
            mase: p,
            covered: covered_count(test, lower, upper),
            horizon: test.len(),
        }))
    }
}

/// Scores per (series, method, level); missing entries are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub series: Vec<String>,
    pub methods: Vec<MethodId>,
    pub levels: Vec<f64>,
    /// Indexed `[series][method][level]`.
    pub entries: Vec<Vec<Vec<Option<ScoreEntry>>>>,
}

impl ScoreMatrix {
    pub fn new(methods: Vec<MethodId>, levels: Vec<f64>) -> Self {
        ScoreMatrix {
            series: Vec::new(),
            methods,
            levels,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, id: String, row: Vec<Vec<Option<ScoreEntry>>>) {
        self.series.push(id);
        self.entries.push(row);
    }

    pub fn get(&self, series: usize, method: usize, level: usize) -> Option<&ScoreEntry> {
        self.entries[series][method][level].as_ref()
    }

    /// Mean MSIS of one method at one level over series with a score, and
    /// the number of missing entries.
    pub fn mean_msis(&self, method: usize, level: usize) -> (f64, usize) {
        let mut sum = 0.0;
        let mut count = 0;
        let mut missing = 0;
        for row in &self.entries {
            match &row[method][level] {
                Some(e) => {
                    sum += e.msis;
                    count += 1;
                }
                None => missing += 1,
            }
        }
        (if count > 0 { sum / count as f64 } else { f64::NAN }, missing)
    }
}
