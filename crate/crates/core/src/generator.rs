//! Reference series from randomly parameterized mixture autoregressions.
//!
//! Each series draws its own mixture specification: up to three Gaussian AR
//! components (with an optional multiplicative seasonal AR factor) mixed by
//! flat Dirichlet weights. At every step one component is picked at random
//! and its recursion over the shared history produces the next value. Every
//! series has its own ChaCha stream keyed by (seed, frequency, index), so the
//! output does not depend on thread scheduling.

use std::collections::BTreeMap;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, LogNormal, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Frequency, TimeSeries};
use crate::stats::{is_stationary, poly_mul};

/// Parameter distributions of the mixture specifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarParams {
    pub max_components: usize,
    pub max_order: usize,
    /// Standard deviation of the AR coefficient proposals.
    pub coef_sd: f64,
    /// Probability of a seasonal AR factor when `m > 1`.
    pub seasonal_prob: f64,
    pub seasonal_low: f64,
    pub seasonal_high: f64,
    /// Innovation scale is `|N(0,1)| + sigma_offset`.
    pub sigma_offset: f64,
    /// Rejections before proposals are shrunk toward zero.
    pub max_rejections: usize,
}

impl Default for MarParams {
    fn default() -> Self {
        MarParams {
            max_components: 3,
            max_order: 3,
            coef_sd: 0.5,
            seasonal_prob: 0.7,
            seasonal_low: -0.5,
            seasonal_high: 0.9,
            sigma_offset: 0.1,
            max_rejections: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarComponent {
    pub ar: Vec<f64>,
    /// Coefficient of the seasonal factor `(1 - Phi B^m)`; zero when absent.
    pub seasonal_ar: f64,
    pub sigma: f64,
}

impl MarComponent {
    /// Coefficients `c` of the expanded recursion `y_t = sum c_j y_{t-j} + e_t`.
    pub fn expanded(&self, m: usize) -> Vec<f64> {
        let mut poly = vec![1.0];
        poly.extend(self.ar.iter().map(|c| -c));
        if self.seasonal_ar != 0.0 && m > 1 {
            let mut s = vec![0.0; m + 1];
            s[0] = 1.0;
            s[m] = -self.seasonal_ar;
            poly = poly_mul(&poly, &s);
        }
        poly[1..].iter().map(|c| -c).collect()
    }

    pub fn is_stationary(&self, m: usize) -> bool {
        is_stationary(&self.expanded(m))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarSpec {
    pub frequency: Frequency,
    pub components: Vec<MarComponent>,
    pub weights: Vec<f64>,
}

impl MarSpec {
    pub fn period(&self) -> usize {
        self.frequency.period()
    }

    pub fn is_valid(&self) -> bool {
        let m = self.period();
        let total: f64 = self.weights.iter().sum();
        self.components.len() == self.weights.len()
            && !self.components.is_empty()
            && (total - 1.0).abs() < 1e-12
            && self.weights.iter().all(|w| *w >= 0.0)
            && self
                .components
                .iter()
                .all(|c| c.sigma > 0.0 && c.is_stationary(m))
    }
}

fn sample_component(
    m: usize,
    params: &MarParams,
    rng: &mut impl Rng,
) -> MarComponent {
    let order = rng.random_range(0..=params.max_order);
    let normal = Normal::new(0.0, params.coef_sd).expect("valid coefficient sd");
    let mut ar: Vec<f64> = Vec::new();
    for attempt in 0..=params.max_rejections {
        ar = (0..order).map(|_| normal.sample(rng)).collect();
        if is_stationary(&ar) {
            break;
        }
        if attempt == params.max_rejections {
            // deterministic shrinkage of the last proposal
            while !is_stationary(&ar) {
                for c in &mut ar {
                    *c *= 0.9;
                }
            }
        }
    }
    let seasonal_ar = if m > 1 && rng.random::<f64>() < params.seasonal_prob {
        rng.random_range(params.seasonal_low..params.seasonal_high)
    } else {
        0.0
    };
    let z: f64 = rng.sample(StandardNormal);
    MarComponent {
        ar,
        seasonal_ar,
        sigma: z.abs() + params.sigma_offset,
    }
}

pub fn sample_mar_spec(frequency: Frequency, params: &MarParams, rng: &mut impl Rng) -> MarSpec {
    let m = frequency.period();
    let k = rng.random_range(1..=params.max_components.max(1));
    let components: Vec<MarComponent> = (0..k).map(|_| sample_component(m, params, rng)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // make the weights sum to one exactly
    let rest: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - rest;
    MarSpec {
        frequency,
        components,
        weights,
    }
}

/// Simulates `length` observations after discarding a burn-in, then shifts
/// the series so its minimum sits 1% of the range above zero.
pub fn simulate_mar(
    spec: &MarSpec,
    length: usize,
    id: impl Into<String>,
    params: &MarParams,
    rng: &mut impl Rng,
) -> Result<TimeSeries> {
    let m = spec.period();
    let h = spec.frequency.horizon();
    if length < m + 2 + h {
        return Err(Error::SeriesTooShort {
            needed: m + 2 + h,
            got: length,
        });
    }
    let burn = (10 * params.max_order).max(5 * m);
    let recursions: Vec<Vec<f64>> = spec.components.iter().map(|c| c.expanded(m)).collect();
    let total = burn + length;
    let mut y = vec![0.0; total];
    for t in 0..total {
        let u: f64 = rng.random();
        let mut k = 0;
        let mut acc = spec.weights[0];
        while u >= acc && k + 1 < spec.weights.len() {
            k += 1;
            acc += spec.weights[k];
        }
        let e: f64 = rng.sample(StandardNormal);
        let mut v = spec.components[k].sigma * e;
        for (j, c) in recursions[k].iter().enumerate() {
            if t > j {
                v += c * y[t - j - 1];
            }
        }
        y[t] = v;
    }
    let mut values = y.split_off(burn);
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSimulation { index });
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let offset = 0.01 * (hi - lo).max(f64::MIN_POSITIVE);
    for v in &mut values {
        *v = *v - lo + offset;
    }
    TimeSeries::with_default_horizon(id, values, spec.frequency)
}

/// Log-normal training-length distribution truncated to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthLaw {
    pub median: f64,
    pub log_sd: f64,
    pub min: usize,
    pub max: usize,
}

/// Draws total series lengths (training period plus horizon).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum LengthSampler {
    /// Observed total lengths, sampled uniformly with replacement.
    Empirical { lengths: BTreeMap<Frequency, Vec<usize>> },
    /// Parametric training lengths per frequency.
    LogNormal { laws: BTreeMap<Frequency, LengthLaw> },
}

impl Default for LengthSampler {
    /// Training-length ranges and medians resembling the competition data.
    fn default() -> Self {
        let laws = BTreeMap::from([
            (Frequency::Yearly, LengthLaw { median: 29.0, log_sd: 0.5, min: 13, max: 835 }),
            (Frequency::Quarterly, LengthLaw { median: 88.0, log_sd: 0.45, min: 16, max: 866 }),
            (Frequency::Monthly, LengthLaw { median: 202.0, log_sd: 0.5, min: 42, max: 2794 }),
        ]);
        LengthSampler::LogNormal { laws }
    }
}

impl LengthSampler {
    /// Reads `frequency,length` rows (header optional). Lengths shorter than
    /// `m + 2 + h` are discarded.
    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut lengths: BTreeMap<Frequency, Vec<usize>> = BTreeMap::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let (Some(f), Some(l)) = (record.get(0), record.get(1)) else {
                return Err(Error::Config(format!("lengths file line {}: expected two fields", line + 1)));
            };
            let Ok(freq) = f.parse::<Frequency>() else {
                if line == 0 {
                    continue; // header
                }
                return Err(Error::Config(format!("lengths file line {}: unknown frequency {f}", line + 1)));
            };
            let len: usize = l
                .parse()
                .map_err(|_| Error::Config(format!("lengths file line {}: bad length {l}", line + 1)))?;
            if len >= freq.period() + 2 + freq.horizon() {
                lengths.entry(freq).or_default().push(len);
            }
        }
        Ok(LengthSampler::Empirical { lengths })
    }

    pub fn sample(&self, frequency: Frequency, rng: &mut impl Rng) -> Result<usize> {
        let h = frequency.horizon();
        let minimum = frequency.period() + 2 + h;
        match self {
            LengthSampler::Empirical { lengths } => {
                let pool = lengths
                    .get(&frequency)
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| Error::Config(format!("no usable {frequency} lengths")))?;
                Ok(pool[rng.random_range(0..pool.len())])
            }
            LengthSampler::LogNormal { laws } => {
                let law = laws
                    .get(&frequency)
                    .ok_or_else(|| Error::Config(format!("no {frequency} length law")))?;
                let dist = LogNormal::new(law.median.ln(), law.log_sd)
                    .map_err(|e| Error::Config(e.to_string()))?;
                let mut train = law.min;
                for _ in 0..100 {
                    let draw = dist.sample(rng).round();
                    if draw >= law.min as f64 && draw <= law.max as f64 {
                        train = draw as usize;
                        break;
                    }
                }
                Ok((train + h).max(minimum))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub yearly: usize,
    pub quarterly: usize,
    pub monthly: usize,
}

impl Counts {
    pub fn get(&self, frequency: Frequency) -> usize {
        match frequency {
            Frequency::Yearly => self.yearly,
            Frequency::Quarterly => self.quarterly,
            Frequency::Monthly => self.monthly,
        }
    }
}

/// Everything that determines a generated reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub counts: Counts,
    pub params: MarParams,
    pub lengths: LengthSampler,
}

fn series_rng(seed: u64, frequency: Frequency, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code = frequency.period() as u64;
    rng.set_stream((code << 40) | index as u64);
    rng
}

/// Identifier recording everything needed to regenerate one series.
pub fn series_id(frequency: Frequency, index: usize, seed: u64) -> String {
    format!("{}-{index:06}-s{seed}", frequency.as_str())
}

/// Generates one series of the set; exposed so a single member can be
/// regenerated from its id fields.
pub fn generate_one(config: &GeneratorConfig, frequency: Frequency, index: usize) -> Result<TimeSeries> {
    let mut rng = series_rng(config.seed, frequency, index);
    let spec = sample_mar_spec(frequency, &config.params, &mut rng);
    let length = config.lengths.sample(frequency, &mut rng)?;
    simulate_mar(&spec, length, series_id(frequency, index, config.seed), &config.params, &mut rng)
        .map_err(|e| match e {
            Error::NonFiniteSimulation { .. } => Error::InvalidSeries(format!(
                "{}: {e}",
                series_id(frequency, index, config.seed)
            )),
            other => other,
        })
}

/// Generates the requested number of series per frequency, yearly first.
pub fn generate_reference_set(config: &GeneratorConfig) -> Result<Vec<TimeSeries>> {
    if Frequency::ALL.iter().all(|f| config.counts.get(*f) == 0) {
        return Err(Error::Config("at least one series must be requested".into()));
    }
    let jobs: Vec<(Frequency, usize)> = Frequency::ALL
        .iter()
        .flat_map(|f| (0..config.counts.get(*f)).map(move |i| (*f, i)))
        .collect();
    jobs.par_iter()
        .map(|(f, i)| generate_one(config, *f, *i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::extract_features;
    use crate::stats::acf;

    fn config(seed: u64, n: usize) -> GeneratorConfig {
        GeneratorConfig {
            seed,
            counts: Counts {
                yearly: n,
                quarterly: n,
                monthly: n,
            },
            params: MarParams::default(),
            lengths: LengthSampler::default(),
        }
    }

    #[test]
    fn spec_sampling_is_deterministic() {
        let p = MarParams::default();
        let a = sample_mar_spec(Frequency::Monthly, &p, &mut ChaCha8Rng::seed_from_u64(3));
        let b = sample_mar_spec(Frequency::Monthly, &p, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn yearly_specs_have_no_seasonal_factor() {
        let p = MarParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s = sample_mar_spec(Frequency::Yearly, &p, &mut rng);
            assert!(s.components.iter().all(|c| c.seasonal_ar == 0.0));
        }
    }

    #[test]
    fn monthly_specs_are_all_valid() {
        let p = MarParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let s = sample_mar_spec(Frequency::Monthly, &p, &mut rng);
            assert!(s.is_valid(), "{s:?}");
        }
    }

    #[test]
    fn shrinkage_terminates_with_a_stationary_component() {
        let p = MarParams {
            coef_sd: 50.0,
            max_rejections: 0,
            ..MarParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let s = sample_mar_spec(Frequency::Quarterly, &p, &mut rng);
            assert!(s.is_valid());
        }
    }

    fn single(ar: Vec<f64>) -> MarSpec {
        MarSpec {
            frequency: Frequency::Yearly,
            components: vec![MarComponent {
                ar,
                seasonal_ar: 0.0,
                sigma: 1.0,
            }],
            weights: vec![1.0],
        }
    }

    #[test]
    fn white_noise_component_is_uncorrelated() {
        let p = MarParams::default();
        let s = simulate_mar(&single(vec![]), 200, "wn", &p, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(acf(s.values(), 1)[0].abs() < 2.0 / 200f64.sqrt());
    }

    #[test]
    fn ar1_component_is_persistent() {
        let p = MarParams::default();
        let s = simulate_mar(&single(vec![0.9]), 200, "ar", &p, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(acf(s.values(), 1)[0] > 0.6);
    }

    #[test]
    fn exact_length_and_positive_values() {
        let p = MarParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for len in [14, 57, 300] {
            let s = simulate_mar(&single(vec![0.3]), len, "x", &p, &mut rng).unwrap();
            assert_eq!(s.len(), len);
            assert!(s.values().iter().all(|v| *v > 0.0));
        }
        assert!(matches!(
            simulate_mar(&single(vec![]), 8, "x", &p, &mut rng),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn reference_set_shape_and_determinism() {
        let cfg = config(11, 5);
        let a = generate_reference_set(&cfg).unwrap();
        let b = generate_reference_set(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        let horizons: Vec<usize> = a.iter().map(|s| s.horizon()).collect();
        assert_eq!(&horizons[..5], &[6; 5]);
        assert_eq!(&horizons[5..10], &[8; 5]);
        assert_eq!(&horizons[10..], &[18; 5]);
        assert_eq!(a[7].id(), "quarterly-000002-s11");
        assert_eq!(generate_one(&cfg, Frequency::Quarterly, 2).unwrap(), a[7]);
    }

    #[test]
    fn lengths_respect_the_minimum() {
        let cfg = config(12, 500);
        for s in generate_reference_set(&cfg).unwrap() {
            assert!(s.len() >= s.period() + 2 + s.horizon());
        }
    }

    #[test]
    fn empirical_lengths_from_csv() {
        let text = "frequency,length\nyearly,30\nyearly,5\nmonthly,100\n";
        let sampler = LengthSampler::from_csv(text.as_bytes()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sampler.sample(Frequency::Yearly, &mut rng).unwrap(), 30);
        assert_eq!(sampler.sample(Frequency::Monthly, &mut rng).unwrap(), 100);
        assert!(sampler.sample(Frequency::Quarterly, &mut rng).is_err());
    }

    #[test]
    fn monthly_feature_diversity() {
        let cfg = GeneratorConfig {
            counts: Counts {
                yearly: 0,
                quarterly: 0,
                monthly: 500,
            },
            ..config(13, 0)
        };
        let set = generate_reference_set(&cfg).unwrap();
        let features: Vec<_> = set.iter().map(|s| extract_features(&s.split().unwrap().train)).collect();
        for name in ["x-acf1", "seasonal-strength"] {
            let vals: Vec<f64> = features.iter().map(|f| f.get(name).unwrap()).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= 0.05 && hi >= 0.8, "{name}: [{lo}, {hi}]");
        }
    }
}
