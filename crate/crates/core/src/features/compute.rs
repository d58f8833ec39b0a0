//! Individual feature computations, in registry order.

use nalgebra::DMatrix;

use super::stl::{decompose, StlDecomposition, StlParams};
use super::N_FEATURES;
use crate::methods::ar::fit_ar_aicc;
use crate::methods::arima::kpss_statistic;
use crate::methods::ets::{fit_spec, EtsSpec, Seasonality, Trend};
use crate::optim::{golden_section, to_bounded, NelderMead};
use crate::stats::{acf, diff, is_negligible_spread, mean, ols, pacf, r_squared, variance};

const ARCH_LAGS: usize = 12;

fn first(v: &[f64]) -> f64 {
    v.first().copied().unwrap_or(0.0)
}

fn mean_square(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|r| r * r).sum::<f64>() / v.len() as f64
    }
}

fn is_constant(x: &[f64]) -> bool {
    let mu = mean(x);
    let ss: f64 = x.iter().map(|v| (v - mu).powi(2)).sum();
    x.len() < 2 || is_negligible_spread(ss, x)
}

fn block_size(m: usize) -> usize {
    (2 * m).max(10)
}

fn lumpiness_and_stability(x: &[f64], m: usize) -> (f64, f64) {
    let b = block_size(m);
    let blocks: Vec<&[f64]> = x.chunks_exact(b).collect();
    if blocks.len() < 2 {
        return (0.0, 0.0);
    }
    let vars: Vec<f64> = blocks.iter().map(|c| variance(c)).collect();
    let means: Vec<f64> = blocks.iter().map(|c| mean(c)).collect();
    (variance(&vars), variance(&means))
}

fn crossing_points(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let below: Vec<bool> = x.iter().map(|v| *v <= med).collect();
    let crossings = below.windows(2).filter(|w| w[0] != w[1]).count();
    crossings as f64 / (n - 1) as f64
}

fn flat_spots(x: &[f64]) -> f64 {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    if !(width > 0.0) {
        return 0.0;
    }
    let bins: Vec<usize> = x
        .iter()
        .map(|v| (((v - lo) / width * 10.0).floor() as usize).min(9))
        .collect();
    let mut best = 1;
    let mut run = 1;
    for w in bins.windows(2) {
        run = if w[0] == w[1] { run + 1 } else { 1 };
        best = best.max(run);
    }
    best as f64 / x.len() as f64
}

/// Periodogram ordinates at the Fourier frequencies `2 pi k / n`, `k = 1..=kmax`.
fn periodogram(x: &[f64], kmax: usize) -> Vec<f64> {
    let n = x.len();
    let mu = mean(x);
    let nf = n as f64;
    (1..=kmax)
        .map(|k| {
            let w = 2.0 * std::f64::consts::PI * k as f64 / nf;
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = w * t as f64;
                re += (v - mu) * a.cos();
                im -= (v - mu) * a.sin();
            }
            (re * re + im * im) / (2.0 * std::f64::consts::PI * nf)
        })
        .collect()
}

fn spectral_entropy(x: &[f64]) -> f64 {
    let kmax = x.len() / 2;
    if kmax < 2 {
        return 0.0;
    }
    let spec = periodogram(x, kmax);
    let total: f64 = spec.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let h: f64 = spec
        .iter()
        .map(|s| s / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    h / (kmax as f64).ln()
}

/// Whittle estimate of the fractional difference `d` restricted to [0, 0.5].
fn whittle_d(x: &[f64]) -> f64 {
    let n = x.len();
    let kmax = (n - 1) / 2;
    if kmax < 2 {
        return 0.0;
    }
    let spec = periodogram(x, kmax);
    let freqs: Vec<f64> = (1..=kmax)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
        .collect();
    let log_g: Vec<f64> = freqs.iter().map(|w| (2.0 * (w / 2.0).sin()).abs().ln()).collect();
    let objective = |d: f64| {
        // spectral density |2 sin(w/2)|^(-2d), profiled over the scale
        let ratio: f64 = spec
            .iter()
            .zip(&log_g)
            .map(|(i, lg)| i * (2.0 * d * lg).exp())
            .sum::<f64>()
            / kmax as f64;
        let log_f: f64 = log_g.iter().map(|lg| -2.0 * d * lg).sum::<f64>() / kmax as f64;
        ratio.max(1e-300).ln() + log_f
    };
    golden_section(objective, 0.0, 0.5, 1e-6).0
}

fn lagged_r2(z: &[f64], lags: usize) -> f64 {
    let n = z.len();
    let lags = lags.min(n.saturating_sub(2) / 3);
    if lags == 0 || is_constant(z) {
        return 0.0;
    }
    let rows = n - lags;
    let x = DMatrix::from_fn(rows, lags + 1, |i, j| if j == 0 { 1.0 } else { z[lags + i - j] });
    let target = &z[lags..];
    match ols(&x, target) {
        Some((_, resid)) => r_squared(target, &resid),
        None => 0.0,
    }
}

fn squared_dev(x: &[f64]) -> Vec<f64> {
    let mu = mean(x);
    x.iter().map(|v| (v - mu).powi(2)).collect()
}

/// AR-prewhitened residuals, standardized to unit variance.
fn prewhiten(x: &[f64]) -> Vec<f64> {
    let resid: Vec<f64> = match fit_ar_aicc(x, 5) {
        Some(fit) => {
            let p = fit.order();
            (p..x.len())
                .map(|t| {
                    let pred: f64 = fit
                        .coefs
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c * (x[t - 1 - i] - fit.mean))
                        .sum();
                    x[t] - fit.mean - pred
                })
                .collect()
        }
        None => x.iter().map(|v| v - mean(x)).collect(),
    };
    let sd = variance(&resid).sqrt();
    if sd > 0.0 {
        resid.iter().map(|e| e / sd).collect()
    } else {
        resid
    }
}

/// Standardized residuals of a GARCH(1,1) fit to a zero-mean, unit-variance series.
fn garch_residuals(e: &[f64]) -> Vec<f64> {
    let n = e.len();
    let e2: Vec<f64> = e.iter().map(|v| v * v).collect();
    let v0 = mean(&e2).max(1e-12);
    let variances = |u: &[f64]| -> Vec<f64> {
        let a = to_bounded(u[0], 0.0, 1.0);
        let b = (1.0 - a) * to_bounded(u[1], 0.0, 1.0);
        let omega = v0 * (1.0 - a - b).max(1e-6);
        let mut h = vec![v0; n];
        for t in 1..n {
            h[t] = omega + a * e2[t - 1] + b * h[t - 1];
        }
        h
    };
    let nll = |u: &[f64]| -> f64 {
        variances(u)
            .iter()
            .zip(&e2)
            .map(|(h, s)| h.max(1e-300).ln() + s / h.max(1e-300))
            .sum::<f64>()
    };
    let best = NelderMead {
        max_evals: 400,
        tolerance: 1e-8,
        step: 0.5,
    }
    .minimize(nll, &[-2.0, 1.0]);
    variances(&best.x)
        .iter()
        .zip(e)
        .map(|(h, v)| v / h.max(1e-300).sqrt())
        .collect()
}

fn nonlinearity(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 8 {
        return 0.0;
    }
    let mu = mean(x);
    let sd = variance(x).sqrt();
    let z: Vec<f64> = x.iter().map(|v| (v - mu) / sd).collect();
    let rows = n - 1;
    let lin = DMatrix::from_fn(rows, 2, |i, j| if j == 0 { 1.0 } else { z[i] });
    let target = &z[1..];
    let Some((_, u)) = ols(&lin, target) else {
        return 0.0;
    };
    let aux = DMatrix::from_fn(rows, 4, |i, j| z[i].powi(j as i32));
    let Some((_, v)) = ols(&aux, &u) else {
        return 0.0;
    };
    let ssr0: f64 = u.iter().map(|e| e * e).sum();
    let ssr1: f64 = v.iter().map(|e| e * e).sum();
    if !(ssr0 > 0.0) {
        return 0.0;
    }
    let stat = rows as f64 * (1.0 - ssr1 / ssr0).max(0.0);
    10.0 * stat / n as f64
}

fn spike(r: &[f64]) -> f64 {
    let n = r.len();
    if n < 4 {
        return 0.0;
    }
    let s1: f64 = r.iter().sum();
    let s2: f64 = r.iter().map(|v| v * v).sum();
    let loo: Vec<f64> = r
        .iter()
        .map(|v| {
            let a = s1 - v;
            let b = s2 - v * v;
            (b - a * a / (n - 1) as f64) / (n - 2) as f64
        })
        .collect();
    variance(&loo)
}

/// Coefficients of the trend on orthonormal linear and quadratic polynomials.
fn linearity_curvature(trend: &[f64]) -> (f64, f64) {
    let n = trend.len();
    if n < 3 {
        return (0.0, 0.0);
    }
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let centre = |v: &[f64]| {
        let mu = mean(v);
        v.iter().map(|x| x - mu).collect::<Vec<f64>>()
    };
    let normalize = |v: Vec<f64>| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect::<Vec<f64>>()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let q1 = normalize(centre(&t));
    let sq: Vec<f64> = t.iter().map(|x| x * x).collect();
    let mut q2 = centre(&sq);
    let proj = dot(&q2, &q1);
    for (a, b) in q2.iter_mut().zip(&q1) {
        *a -= proj * b;
    }
    let q2 = normalize(q2);
    (dot(trend, &q1), dot(trend, &q2))
}

fn strength(component: &[f64], remainder: &[f64]) -> f64 {
    let combined: Vec<f64> = component.iter().zip(remainder).map(|(a, b)| a + b).collect();
    let vc = variance(&combined);
    if !(vc > 0.0) {
        return 0.0;
    }
    (1.0 - variance(remainder) / vc).clamp(0.0, 1.0)
}

/// Phillips-Perron Z-alpha statistic for a unit root in `x`.
pub fn pp_statistic(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return 0.0;
    }
    let y = &x[1..];
    let ylag = &x[..n - 1];
    let t = y.len() as f64;
    let (my, ml) = (mean(y), mean(ylag));
    let sxx: f64 = ylag.iter().map(|v| (v - ml).powi(2)).sum();
    if is_negligible_spread(sxx, ylag) {
        return 0.0;
    }
    let sxy: f64 = ylag.iter().zip(y).map(|(a, b)| (a - ml) * (b - my)).sum();
    let rho = sxy / sxx;
    let c = my - rho * ml;
    let u: Vec<f64> = ylag.iter().zip(y).map(|(a, b)| b - c - rho * a).collect();
    let ssr: f64 = u.iter().map(|e| e * e).sum();
    let s2 = ssr / (t - 2.0);
    let gamma0 = ssr / t;
    if !(s2 > 0.0) {
        return 0.0;
    }
    let lags = (4.0 * (t / 100.0).powf(0.25)).trunc() as usize;
    let mut lambda2 = gamma0;
    for j in 1..=lags.min(u.len() - 1) {
        let w = 1.0 - j as f64 / (lags as f64 + 1.0);
        let g: f64 = u[j..].iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() / t;
        lambda2 += 2.0 * w * g;
    }
    let se2 = s2 / sxx;
    t * (rho - 1.0) - 0.5 * (t * t * se2 / s2) * (lambda2 - gamma0)
}

fn decomposition(x: &[f64], m: usize) -> (StlDecomposition, bool) {
    let params = StlParams::default();
    if m > 1 {
        if let Ok(d) = decompose(x, m, &params) {
            return (d, true);
        }
    }
    let d = decompose(x, 1, &params).expect("non-seasonal decomposition cannot fail");
    (d, false)
}

fn extremes_position(seasonal: &[f64], m: usize) -> (f64, f64) {
    let cycle = &seasonal[..m];
    let mut imax = 0;
    let mut imin = 0;
    for (i, v) in cycle.iter().enumerate() {
        if *v > cycle[imax] {
            imax = i;
        }
        if *v < cycle[imin] {
            imin = i;
        }
    }
    ((imax + 1) as f64 / m as f64, (imin + 1) as f64 / m as f64)
}

/// All features in registry order, plus the degeneracy flag.
pub(super) fn all_features(x: &[f64], m: usize) -> (Vec<f64>, bool) {
    let n = x.len();
    let mut f = vec![0.0; N_FEATURES];
    f[24] = f64::from(u8::from(m > 1));
    f[25] = f64::from(u8::from(m == 4));
    f[26] = f64::from(u8::from(m == 12));
    f[42] = n as f64;
    f[17] = 0.5;
    if is_constant(x) {
        return (f, true);
    }

    let d1 = diff(x, 1);
    let d2 = diff(&d1, 1);
    let acf_x = acf(x, 10.max(m));
    let acf_d1 = acf(&d1, 10);
    let acf_d2 = acf(&d2, 10);
    let avail = |k: usize, len: usize| k.min(len.saturating_sub(1));

    f[0] = acf_x[0];
    f[1] = mean_square(&acf_x[..avail(10, n)]);
    f[2] = first(&acf_d1);
    f[3] = mean_square(&acf_d1[..avail(10, d1.len())]);
    f[4] = first(&acf_d2);
    f[5] = mean_square(&acf_d2[..avail(10, d2.len())]);
    if m > 1 && n > m {
        f[6] = acf_x[m - 1];
    }

    let sq = squared_dev(x);
    f[7] = lagged_r2(&sq, ARCH_LAGS);
    f[8] = crossing_points(x);
    f[9] = spectral_entropy(x);
    f[10] = flat_spots(x);
    let acf_sq = acf(&sq, ARCH_LAGS);
    f[11] = mean_square(&acf_sq[..avail(ARCH_LAGS, n)]);

    let w = prewhiten(x);
    if w.len() >= 8 && !is_constant(&w) {
        let w2: Vec<f64> = w.iter().map(|v| v * v).collect();
        f[13] = lagged_r2(&w2, ARCH_LAGS);
        let z = garch_residuals(&w);
        let z2: Vec<f64> = z.iter().map(|v| v * v).collect();
        let acf_z2 = acf(&z2, ARCH_LAGS);
        f[12] = mean_square(&acf_z2[..avail(ARCH_LAGS, z2.len())]);
        f[14] = lagged_r2(&z2, ARCH_LAGS);
    }

    if let Some(holt) = fit_spec(x, 1, EtsSpec::new(Trend::Additive, Seasonality::None)) {
        f[15] = holt.alpha;
        f[16] = holt.beta;
    }
    f[17] = 0.5 + whittle_d(x);
    let (lump, stab) = lumpiness_and_stability(x, m);
    f[18] = lump;
    f[19] = nonlinearity(x);

    let pacf_len = |len: usize| 5.min(len.saturating_sub(1));
    f[20] = mean_square(&pacf(x, pacf_len(n)));
    f[21] = mean_square(&pacf(&d1, pacf_len(d1.len())));
    f[22] = mean_square(&pacf(&d2, pacf_len(d2.len())));
    if m > 1 && n > m {
        f[23] = pacf(x, m)[m - 1];
    }

    let (stl, seasonal) = decomposition(x, m);
    f[27] = strength(&stl.trend, &stl.remainder);
    f[28] = spike(&stl.remainder);
    let (lin, curv) = linearity_curvature(&stl.trend);
    f[29] = lin;
    f[30] = curv;
    let acf_e = acf(&stl.remainder, 10);
    f[31] = acf_e[0];
    f[32] = mean_square(&acf_e[..avail(10, n)]);
    if seasonal {
        f[33] = strength(&stl.seasonal, &stl.remainder);
        let (peak, trough) = extremes_position(&stl.seasonal, m);
        f[34] = peak;
        f[35] = trough;
    }
    f[36] = stab;

    if m > 1 {
        if let Some(hw) = fit_spec(x, m, EtsSpec::new(Trend::Additive, Seasonality::Additive)) {
            f[37] = hw.alpha;
            f[38] = hw.beta;
            f[39] = hw.gamma;
        }
    }
    f[40] = kpss_statistic(x);
    f[41] = pp_statistic(x);
    (f, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{feature_index, REGISTRY};

    #[test]
    fn indices_match_registry() {
        let expected = [
            (17, "hurst"),
            (24, "nperiods"),
            (25, "seasonal-period-q"),
            (26, "seasonal-period-m"),
            (36, "stability"),
            (42, "series-length"),
        ];
        for (i, name) in expected {
            assert_eq!(feature_index(name).unwrap(), i);
            assert_eq!(REGISTRY[i].name, name);
        }
    }

    #[test]
    fn crossing_points_of_alternating_series() {
        assert_eq!(crossing_points(&[0.0, 1.0, 0.0, 1.0, 0.0]), 1.0);
        assert_eq!(crossing_points(&[0.0, 1.0, 2.0, 3.0]), 1.0 / 3.0);
    }

    #[test]
    fn flat_spots_longest_run() {
        let x = [0.0, 0.01, 0.02, 5.0, 10.0];
        assert!((flat_spots(&x) - 3.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn blocks_use_full_chunks_only() {
        let x: Vec<f64> = (0..25).map(|t| (t / 10) as f64).collect();
        let (lump, stab) = lumpiness_and_stability(&x, 1);
        assert_eq!(lump, 0.0);
        assert!((stab - 0.5).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_polynomial_coefficients() {
        let trend: Vec<f64> = (0..10).map(|t| 3.0 + 2.0 * t as f64).collect();
        let (lin, curv) = linearity_curvature(&trend);
        // norm of the centred index 0..9 is sqrt(82.5)
        assert!((lin - 2.0 * 82.5f64.sqrt()).abs() < 1e-9);
        assert!(curv.abs() < 1e-9);
    }

    #[test]
    fn spike_matches_direct_leave_one_out() {
        let r = [0.3, -1.2, 0.5, 2.0, -0.1, 0.7];
        let direct: Vec<f64> = (0..r.len())
            .map(|i| {
                let rest: Vec<f64> = r.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                variance(&rest)
            })
            .collect();
        assert!((spike(&r) - variance(&direct)).abs() < 1e-12);
    }

    #[test]
    fn entropy_of_a_single_frequency_is_low() {
        let x: Vec<f64> = (0..96)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin())
            .collect();
        assert!(spectral_entropy(&x) < 0.05);
    }

    #[test]
    fn pp_statistic_separates_stationary_and_walk() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let noise: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
        let walk: Vec<f64> = noise
            .iter()
            .scan(0.0, |s, e| {
                *s += e;
                Some(*s)
            })
            .collect();
        // 5% critical value of Z-alpha with a constant is about -14
        assert!(pp_statistic(&noise) < -100.0);
        assert!(pp_statistic(&walk) > -14.0);
    }
}
