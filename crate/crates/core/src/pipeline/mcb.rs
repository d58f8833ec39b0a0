//! Multiple comparisons with the best, on mean ranks across series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 95% studentized range quantiles for infinite degrees of freedom divided
/// by sqrt(2), indexed by the number of models K = 2..=12.
pub const MCB_CRITICAL: [(usize, f64); 11] = [
    (2, 1.960),
    (3, 2.343),
    (4, 2.569),
    (5, 2.728),
    (6, 2.850),
    (7, 2.949),
    (8, 3.031),
    (9, 3.102),
    (10, 3.164),
    (11, 3.219),
    (12, 3.268),
];

pub const MIN_SERIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McbRow {
    pub name: String,
    pub mean_rank: f64,
    pub lower: f64,
    pub upper: f64,
    /// False when the interval overlaps the best model's interval.
    pub differs_from_best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McbResult {
    pub models: usize,
    pub series: usize,
    pub half_width: f64,
    pub best: String,
    pub rows: Vec<McbRow>,
}

pub fn critical_value(k: usize) -> Option<f64> {
    MCB_CRITICAL.iter().find(|(n, _)| *n == k).map(|(_, q)| *q)
}

/// Ranks within one row, lowest score first; ties share the average rank.
pub fn average_ranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// `scores[series][model]`; rows with a non-finite score are dropped.
pub fn mcb_test(names: &[String], scores: &[Vec<f64>]) -> Result<McbResult> {
    let k = names.len();
    if k < 2 {
        return Err(Error::InsufficientData("the comparison needs at least two models".into()));
    }
    let q = critical_value(k)
        .ok_or_else(|| Error::InsufficientData(format!("no critical value tabulated for {k} models")))?;
    let complete: Vec<&Vec<f64>> = scores
        .iter()
        .filter(|r| r.len() == k && r.iter().all(|v| v.is_finite()))
        .collect();
    let n = complete.len();
    if n < MIN_SERIES {
        return Err(Error::InsufficientData(format!(
            "{n} complete series, the comparison needs {MIN_SERIES}"
        )));
    }
    let mut sums = vec![0.0; k];
    for row in &complete {
        for (s, r) in sums.iter_mut().zip(average_ranks(row)) {
            *s += r;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let half_width = 0.5 * q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt();
    let best = (0..k).min_by(|&a, &b| means[a].total_cmp(&means[b])).expect("k >= 2");
    let rows = (0..k)
        .map(|i| McbRow {
            name: names[i].clone(),
            mean_rank: means[i],
            lower: means[i] - half_width,
            upper: means[i] + half_width,
            differs_from_best: means[i] - half_width > means[best] + half_width,
        })
        .collect();
    Ok(McbResult {
        models: k,
        series: n,
        half_width,
        best: names[best].clone(),
        rows,
    })
}
