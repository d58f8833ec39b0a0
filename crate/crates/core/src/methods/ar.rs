//! Autoregressive models fitted by least squares with AICc order selection.

use nalgebra::DMatrix;

use crate::methods::ets::aicc_from_sse;
use crate::stats::{mean, ols};

#[derive(Debug, Clone, PartialEq)]
pub struct ArFit {
    /// Process mean `mu` in `y_t - mu = sum phi_i (y_{t-i} - mu) + e_t`.
    pub mean: f64,
    pub coefs: Vec<f64>,
    pub sigma2: f64,
    pub aicc: f64,
}

impl ArFit {
    pub fn order(&self) -> usize {
        self.coefs.len()
    }

    /// Point forecasts continuing `history`.
    pub fn point(&self, history: &[f64], h: usize) -> Vec<f64> {
        let p = self.coefs.len();
        let mut buf: Vec<f64> = history[history.len().saturating_sub(p)..]
            .iter()
            .map(|v| v - self.mean)
            .collect();
        let mut out = Vec::with_capacity(h);
        for _ in 0..h {
            let len = buf.len();
            let next: f64 = self
                .coefs
                .iter()
                .enumerate()
                .map(|(i, c)| c * buf[len - 1 - i])
                .sum();
            buf.push(next);
            out.push(next + self.mean);
        }
        out
    }

    pub fn variance(&self, h: usize) -> Vec<f64> {
        let psi = psi_weights(&self.coefs, &[], h);
        let mut acc = 0.0;
        psi.iter()
            .map(|w| {
                acc += w * w;
                self.sigma2 * acc
            })
            .collect()
    }
}

/// MA(infinity) weights `psi_0..psi_{h-1}` of the ARMA model
/// `(1 - sum ar_i B^i) y = (1 + sum ma_j B^j) e`.
pub fn psi_weights(ar: &[f64], ma: &[f64], h: usize) -> Vec<f64> {
    let mut psi = vec![0.0; h];
    if h == 0 {
        return psi;
    }
    psi[0] = 1.0;
    for j in 1..h {
        let mut v = if j <= ma.len() { ma[j - 1] } else { 0.0 };
        for (i, a) in ar.iter().enumerate() {
            let lag = i + 1;
            if lag <= j {
                v += a * psi[j - lag];
            }
        }
        psi[j] = v;
    }
    psi
}

/// Fits AR(p) for `p = 0..=max_order` on a common estimation sample and
/// returns the lowest-AICc model.
pub fn fit_ar_aicc(y: &[f64], max_order: usize) -> Option<ArFit> {
    let n = y.len();
    if n < 3 {
        return None;
    }
    // keep at least ~10 residual degrees of freedom
    let max_order = max_order.min(n.saturating_sub(10) / 2);
    let start = max_order;
    let target = &y[start..];
    let mut best: Option<ArFit> = None;
    for p in 0..=max_order {
        let rows = n - start;
        let x = DMatrix::from_fn(rows, p + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                y[start + i - j]
            }
        });
        let Some((beta, resid)) = ols(&x, target) else {
            continue;
        };
        let sse: f64 = resid.iter().map(|e| e * e).sum();
        let coefs: Vec<f64> = beta.iter().skip(1).copied().collect();
        let phi_sum: f64 = coefs.iter().sum();
        let mu = if (1.0 - phi_sum).abs() > 1e-8 {
            beta[0] / (1.0 - phi_sum)
        } else {
            mean(y)
        };
        let k = p + 2;
        let aicc = aicc_from_sse(sse, target, k);
        let sigma2 = sse / (rows.saturating_sub(p + 1)).max(1) as f64;
        let fit = ArFit {
            mean: mu,
            coefs,
            sigma2,
            aicc,
        };
        if best.as_ref().is_none_or(|b| fit.aicc < b.aicc) {
            best = Some(fit);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn psi_of_ar1_is_geometric() {
        let psi = psi_weights(&[0.5], &[], 5);
        for (j, w) in psi.iter().enumerate() {
            assert!((w - 0.5f64.powi(j as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_of_ma1() {
        assert_eq!(psi_weights(&[], &[0.4], 3), vec![1.0, 0.4, 0.0]);
    }

    #[test]
    fn recovers_ar1() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut y = vec![0.0; 400];
        for t in 1..400 {
            y[t] = 0.7 * y[t - 1] + normal.sample(&mut rng);
        }
        let fit = fit_ar_aicc(&y, 5).unwrap();
        assert!(fit.order() >= 1);
        assert!((fit.coefs[0] - 0.7).abs() < 0.1);
    }

    #[test]
    fn white_noise_forecast_is_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(10.0, 1.0).unwrap();
        let y: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
        let fit = fit_ar_aicc(&y, 5).unwrap();
        let p = fit.point(&y, 4);
        for v in p {
            assert!((v - mean(&y)).abs() < 0.3);
        }
    }
}
