//! Turning fitted log-MSIS into combination weights, selecting methods by
//! threshold ratio and combining their intervals.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::msis;
use crate::series::{Frequency, IntervalForecast};
use crate::stats::{mean, std_dev};

/// Slack when comparing weight ratios to a threshold, so ratios that are
/// equal in exact arithmetic (0.06 / 0.3 against 0.2) still qualify.
pub const RATIO_TOLERANCE: f64 = 1e-12;

/// Threshold ratios 0, 0.05, ..., 1.
pub fn default_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Unweighted mean of the selected methods.
    Mean,
    /// Softmax weights renormalized over the selected methods.
    Weighted,
    /// Softmax weights over the whole pool (threshold forced to 0).
    AllWeighted,
}

impl Mode {
    /// Modes whose threshold is searched.
    pub const SEARCHED: [Mode; 2] = [Mode::Mean, Mode::Weighted];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Mean => "mean",
            Mode::Weighted => "weighted",
            Mode::AllWeighted => "all-weighted",
        }
    }

    /// The mode whose searched threshold applies to this mode.
    pub fn search_mode(self) -> Option<Mode> {
        match self {
            Mode::AllWeighted => None,
            m => Some(m),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Mode::Mean),
            "weighted" => Ok(Mode::Weighted),
            "all-weighted" => Ok(Mode::AllWeighted),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Softmax of the negated z-scores of the fitted log-MSIS values. Lower
/// fitted values get strictly higher weight; zero spread gives uniform
/// weights.
pub fn adjusted_softmax(fitted: &[f64]) -> Result<Vec<f64>> {
    if fitted.is_empty() || fitted.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("fitted scores must be finite and nonempty".into()));
    }
    let n = fitted.len();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mu = mean(fitted);
    let sigma = std_dev(fitted);
    if !(sigma > 0.0) || fitted.iter().all(|v| *v == fitted[0]) {
        return Ok(vec![1.0 / n as f64; n]);
    }
    let z: Vec<f64> = fitted.iter().map(|x| (mu - x) / sigma).collect();
    let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / total).collect())
}

/// Indices whose weight ratio to the largest weight reaches `tr`.
pub fn select_by_threshold(weights: &[f64], tr: f64) -> Vec<usize> {
    let top = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    weights
        .iter()
        .enumerate()
        .filter(|(_, w)| *w / top >= tr - RATIO_TOLERANCE)
        .map(|(i, _)| i)
        .collect()
}

/// Combination weights over `subset` for the given mode.
pub fn subset_weights(weights: &[f64], subset: &[usize], mode: Mode) -> Vec<f64> {
    let n = subset.len() as f64;
    let uniform = subset.iter().all(|&i| weights[i] == weights[subset[0]]);
    if mode == Mode::Mean || uniform {
        return vec![1.0 / n; subset.len()];
    }
    let total: f64 = subset.iter().map(|&i| weights[i]).sum();
    subset.iter().map(|&i| weights[i] / total).collect()
}

/// Combines member intervals over `subset`; the point path is the midpoint
/// of the combined bounds. A single selected member is returned unchanged.
pub fn combine_intervals(
    members: &[&IntervalForecast],
    weights: &[f64],
    subset: &[usize],
    mode: Mode,
) -> Result<IntervalForecast> {
    let Some(&first) = subset.first() else {
        return Err(Error::Config("empty method subset".into()));
    };
    if weights.len() != members.len() || subset.iter().any(|&i| i >= members.len()) {
        return Err(Error::Config("weights, members and subset disagree".into()));
    }
    let level = members[first].level;
    let h = members[first].horizon();
    if subset
        .iter()
        .any(|&i| members[i].level != level || members[i].horizon() != h)
    {
        return Err(Error::LevelMismatch);
    }
    if subset.len() == 1 {
        return Ok(members[first].clone());
    }
    let w = subset_weights(weights, subset, mode);
    let mut lower = vec![0.0; h];
    let mut upper = vec![0.0; h];
    for (&i, &wi) in subset.iter().zip(&w) {
        for t in 0..h {
            lower[t] += wi * members[i].lower[t];
            upper[t] += wi * members[i].upper[t];
        }
    }
    // rounding can invert bounds that coincide in every member
    for t in 0..h {
        if lower[t] > upper[t] {
            let mid = 0.5 * (lower[t] + upper[t]);
            lower[t] = mid;
            upper[t] = mid;
        }
    }
    let point = combine_point(&lower, &upper);
    IntervalForecast::new(level, lower, point, upper)
}

/// Midpoint of the combined bounds.
pub fn combine_point(lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect()
}

/// One reference series as seen by the threshold search.
#[derive(Debug, Clone)]
pub struct ReferenceCase<'a> {
    pub frequency: Frequency,
    pub train: &'a [f64],
    pub test: &'a [f64],
    /// One forecast per pool method, all at the searched level.
    pub members: Vec<&'a IntervalForecast>,
    /// Fitted log-MSIS per member, same order.
    pub fitted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub frequency: Frequency,
    pub mode: Mode,
    pub tr: f64,
    pub mean_msis: f64,
    pub scored: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalThreshold {
    pub frequency: Frequency,
    pub mode: Mode,
    pub tr: f64,
    pub mean_msis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub level: f64,
    pub optimal: Vec<OptimalThreshold>,
    pub path: Vec<PathPoint>,
}

impl ThresholdResult {
    pub fn threshold(&self, frequency: Frequency, mode: Mode) -> Option<f64> {
        self.optimal
            .iter()
            .find(|o| o.frequency == frequency && o.mode == mode)
            .map(|o| o.tr)
    }

    /// Path as CSV with header `frequency,mode,tr,mean_msis`.
    pub fn path_csv(&self) -> String {
        let mut out = String::from("frequency,mode,tr,mean_msis\n");
        for p in &self.path {
            out.push_str(&format!("{},{},{},{}\n", p.frequency, p.mode, p.tr, p.mean_msis));
        }
        out
    }
}

/// Mean MSIS of the combined forecasts of `cases` at one threshold.
fn path_point(cases: &[&ReferenceCase<'_>], tr: f64, mode: Mode, alpha: f64) -> Result<(f64, usize, usize)> {
    let mut total = 0.0;
    let mut scored = 0;
    let mut excluded = 0;
    for case in cases {
        let weights = adjusted_softmax(&case.fitted)?;
        let subset = select_by_threshold(&weights, tr);
        let combined = combine_intervals(&case.members, &weights, &subset, mode)?;
        match msis(
            case.test,
            &combined.lower,
            &combined.upper,
            case.train,
            case.frequency.period(),
            alpha,
        ) {
            Ok(v) if v.is_finite() => {
                total += v;
                scored += 1;
            }
            Ok(_) | Err(Error::ZeroDenominator) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    let mean = if scored > 0 { total / scored as f64 } else { f64::NAN };
    Ok((mean, scored, excluded))
}

/// Searches the threshold ratio minimizing mean MSIS per frequency and mode.
/// Ties go to the smallest ratio.
pub fn search_threshold(
    cases: &[ReferenceCase<'_>],
    grid: &[f64],
    modes: &[Mode],
    level: f64,
) -> Result<ThresholdResult> {
    if grid.is_empty() || grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Config("threshold grid must be a nonempty subset of [0, 1]".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level {level} outside (0, 1)")));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let frequencies: BTreeSet<Frequency> = cases.iter().map(|c| c.frequency).collect();
    let alpha = 1.0 - level;

    let mut cells: Vec<(Frequency, Mode, f64)> = Vec::new();
    for &f in &frequencies {
        for &m in modes {
            cells.extend(grid.iter().map(|&t| (f, m, t)));
        }
    }
    let path: Vec<PathPoint> = cells
        .par_iter()
        .map(|&(frequency, mode, tr)| {
            let subset: Vec<&ReferenceCase<'_>> = cases.iter().filter(|c| c.frequency == frequency).collect();
            let (mean_msis, scored, excluded) = path_point(&subset, tr, mode, alpha)?;
            Ok(PathPoint {
                frequency,
                mode,
                tr,
                mean_msis,
                scored,
                excluded,
            })
        })
        .collect::<Result<_>>()?;

    let mut optimal = Vec::new();
    for &frequency in &frequencies {
        for &mode in modes {
            let mut best: Option<&PathPoint> = None;
            for p in path.iter().filter(|p| p.frequency == frequency && p.mode == mode) {
                if p.mean_msis.is_finite() && best.is_none_or(|b| p.mean_msis < b.mean_msis) {
                    best = Some(p);
                }
            }
            let best = best.ok_or_else(|| {
                Error::InsufficientData(format!("no scorable {frequency} series for the threshold search"))
            })?;
            optimal.push(OptimalThreshold {
                frequency,
                mode,
                tr: best.tr,
                mean_msis: best.mean_msis,
            });
        }
    }
    Ok(ThresholdResult { level, optimal, path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn interval(level: f64, lower: Vec<f64>, upper: Vec<f64>) -> IntervalForecast {
        let point = combine_point(&lower, &upper);
        IntervalForecast::new(level, lower, point, upper).unwrap()
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(adjusted_softmax(&[2.5, 2.5, 2.5]).unwrap(), vec![1.0 / 3.0; 3]);
        let w = adjusted_softmax(&[0.0, 2.0]).unwrap();
        // mu = 1, sigma = sqrt(2): weights e^{z}/(e^{z}+e^{-z}) with z = 1/sqrt(2)
        let z = 1.0 / 2f64.sqrt();
        let oracle = z.exp() / (z.exp() + (-z).exp());
        assert!((w[0] - oracle).abs() < 1e-15);
        assert!((w[0] - 0.8044).abs() < 1e-3 && (w[1] - 0.1956).abs() < 1e-3);
        assert!(adjusted_softmax(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let w = [0.3, 0.3, 0.2, 0.01, 0.06, 0.07, 0.03, 0.03];
        assert_eq!(select_by_threshold(&w, 0.2), vec![0, 1, 2, 4, 5]);
        assert_eq!(select_by_threshold(&w, 0.0).len(), 8);
        let w = adjusted_softmax(&[1.0, 0.2, 3.0, 0.9]).unwrap();
        assert_eq!(select_by_threshold(&w, 1.0), vec![1]);
    }

    #[test]
    fn combination_examples() {
        let a = interval(0.8, vec![0.0, 0.0], vec![2.0, 2.0]);
        let b = interval(0.8, vec![2.0, 2.0], vec![4.0, 4.0]);
        let c = combine_intervals(&[&a, &b], &[0.5, 0.5], &[0, 1], Mode::Weighted).unwrap();
        assert_eq!(c.lower, vec![1.0, 1.0]);
        assert_eq!(c.upper, vec![3.0, 3.0]);
        let single = combine_intervals(&[&a, &b], &[0.5, 0.5], &[1], Mode::Weighted).unwrap();
        assert_eq!(single, b);
        let x = interval(0.8, vec![0.0], vec![1.0]);
        let y = interval(0.8, vec![4.0], vec![5.0]);
        let c = combine_intervals(&[&x, &y], &[0.75, 0.25], &[0, 1], Mode::Weighted).unwrap();
        assert!((c.lower[0] - 1.0).abs() < 1e-15);
        // midpoint equals the weighted mean of member midpoints
        assert!((c.point[0] - (0.75 * 0.5 + 0.25 * 4.5)).abs() < 1e-15);
        let m = combine_intervals(&[&x, &y], &[0.75, 0.25], &[0, 1], Mode::Mean).unwrap();
        assert_eq!(m.lower, vec![2.0]);
        assert_eq!(combine_point(&[1.0, 3.0], &[3.0, 5.0]), vec![2.0, 4.0]);
        assert_eq!(combine_point(&[1.5], &[1.5]), vec![1.5]);
    }

    #[test]
    fn level_mismatch() {
        let a = interval(0.8, vec![0.0], vec![1.0]);
        let b = interval(0.95, vec![0.0], vec![1.0]);
        assert!(matches!(
            combine_intervals(&[&a, &b], &[0.5, 0.5], &[0, 1], Mode::Mean),
            Err(Error::LevelMismatch)
        ));
    }

    #[test]
    fn mode_parsing() {
        for m in [Mode::Mean, Mode::Weighted, Mode::AllWeighted] {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("best".parse::<Mode>().is_err());
    }

    fn case_data(n: usize) -> Vec<(Frequency, Vec<f64>, Vec<f64>, Vec<IntervalForecast>, Vec<f64>)> {
        // method 0 is always exact with zero width, method 1 is wide
        (0..n)
            .map(|i| {
                let freq = Frequency::ALL[i % 3];
                let train: Vec<f64> = (0..30).map(|t| 10.0 + ((t * 7 + i) % 5) as f64).collect();
                let h = freq.horizon();
                let test: Vec<f64> = (0..h).map(|t| 12.0 + (t % 2) as f64).collect();
                let exact = interval(0.95, test.clone(), test.clone());
                let wide = interval(
                    0.95,
                    test.iter().map(|v| v - 5.0).collect(),
                    test.iter().map(|v| v + 5.0).collect(),
                );
                (freq, train, test, vec![exact, wide], vec![0.0, 1.0])
            })
            .collect()
    }

    #[test]
    fn dominant_method_selects_tr_one() {
        let data = case_data(12);
        let cases: Vec<ReferenceCase<'_>> = data
            .iter()
            .map(|(f, tr, te, m, fit)| ReferenceCase {
                frequency: *f,
                train: tr,
                test: te,
                members: m.iter().collect(),
                fitted: fit.clone(),
            })
            .collect();
        let res = search_threshold(&cases, &[0.0, 1.0], &Mode::SEARCHED, 0.95).unwrap();
        for f in Frequency::ALL {
            assert_eq!(res.threshold(f, Mode::Weighted), Some(1.0));
            assert_eq!(res.threshold(f, Mode::Mean), Some(1.0));
        }
        assert_eq!(res.path.len(), 2 * 3 * 2);
        let res = search_threshold(&cases, &[0.0], &[Mode::Mean], 0.95).unwrap();
        assert!(res.optimal.iter().all(|o| o.tr == 0.0));
        let grid = default_grid();
        let res = search_threshold(&cases, &grid, &[Mode::Weighted], 0.95).unwrap();
        assert_eq!(res.path.len(), grid.len() * 3);
        assert_eq!(res.path_csv().lines().count(), grid.len() * 3 + 1);
    }

    fn fitted_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0..5.0f64, 2..10)
    }

    proptest! {
        #[test]
        fn softmax_is_affine_invariant(x in fitted_vec(), a in 0.01..100.0f64, b in -50.0..50.0f64) {
            let w = adjusted_softmax(&x).unwrap();
            let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let w2 = adjusted_softmax(&moved).unwrap();
            for (p, q) in w.iter().zip(&w2) {
                prop_assert!((p - q).abs() < 1e-12);
            }
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn softmax_reverses_order(x in fitted_vec()) {
            let w = adjusted_softmax(&x).unwrap();
            for i in 0..x.len() {
                for j in 0..x.len() {
                    if x[i] < x[j] {
                        prop_assert!(w[i] > w[j]);
                    }
                }
            }
            prop_assert!(w.iter().all(|p| *p > 0.0));
        }

        #[test]
        fn selection_is_monotone(x in fitted_vec(), t1 in 0.0..1.0f64, t2 in 0.0..1.0f64) {
            let w = adjusted_softmax(&x).unwrap();
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let wide = select_by_threshold(&w, lo);
            let narrow = select_by_threshold(&w, hi);
            prop_assert!(!narrow.is_empty());
            prop_assert!(narrow.iter().all(|i| wide.contains(i)));
        }

        #[test]
        fn combination_is_sandwiched(
            raw in prop::collection::vec((-10.0..10.0f64, 0.0..5.0f64), 2..6),
            x in fitted_vec(),
            tr in 0.0..1.0f64,
        ) {
            let n = raw.len().min(x.len());
            let members: Vec<IntervalForecast> = raw[..n]
                .iter()
                .map(|(l, w)| interval(0.9, vec![*l, l + 1.0], vec![l + w, l + 1.0 + 2.0 * w]))
                .collect();
            let refs: Vec<&IntervalForecast> = members.iter().collect();
            let w = adjusted_softmax(&x[..n]).unwrap();
            let subset = select_by_threshold(&w, tr);
            for mode in [Mode::Mean, Mode::Weighted] {
                let c = combine_intervals(&refs, &w, &subset, mode).unwrap();
                for t in 0..2 {
                    let lows: Vec<f64> = subset.iter().map(|&i| members[i].lower[t]).collect();
                    let ups: Vec<f64> = subset.iter().map(|&i| members[i].upper[t]).collect();
                    let eps = 1e-12;
                    prop_assert!(c.lower[t] >= lows.iter().cloned().fold(f64::INFINITY, f64::min) - eps);
                    prop_assert!(c.lower[t] <= lows.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + eps);
                    prop_assert!(c.upper[t] >= ups.iter().cloned().fold(f64::INFINITY, f64::min) - eps);
                    prop_assert!(c.upper[t] <= ups.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + eps);
                    prop_assert!(c.lower[t] <= c.upper[t]);
                }
            }
            let uniform = vec![1.0 / n as f64; n];
            let all: Vec<usize> = (0..n).collect();
            let a = combine_intervals(&refs, &uniform, &all, Mode::Weighted).unwrap();
            let b = combine_intervals(&refs, &uniform, &all, Mode::Mean).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
