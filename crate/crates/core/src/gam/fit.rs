//! Penalized least squares with per-term GCV smoothing selection.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::basis::{quantile_knots, CrBasis};
use super::{GamModel, LinearTerm, SmoothTerm};
use crate::error::{Error, Result};
use crate::features::{registry_hash, FeatureDef, FeatureKind, FeatureVector, REGISTRY};
use crate::optim::golden_section;

/// Ridge added (relative to the mean diagonal of `X'X`) when the design is
/// rank-deficient outside the penalties' reach.
const RIDGE: f64 = 1e-8;
/// Smallest acceptable Cholesky pivot, relative to the diagonal entry.
const PIVOT_TOLERANCE: f64 = 1e-10;
/// Fewest distinct knots for a spline; sparser features enter linearly.
const MIN_KNOTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamConfig {
    pub basis_size: usize,
    pub log10_lambda_min: f64,
    pub log10_lambda_max: f64,
    pub max_cycles: usize,
    /// Stop cycling once a full pass improves GCV by less than this.
    pub tolerance: f64,
    pub min_rows: usize,
    /// Skips GCV selection and uses this λ for every smooth.
    pub fixed_lambda: Option<f64>,
}

impl Default for GamConfig {
    fn default() -> Self {
        GamConfig {
            basis_size: 10,
            log10_lambda_min: -6.0,
            log10_lambda_max: 8.0,
            max_cycles: 20,
            tolerance: 1e-6,
            min_rows: 200,
            fixed_lambda: None,
        }
    }
}

impl GamConfig {
    /// Integer powers of ten spanning the λ range.
    pub fn lambda_grid(&self) -> Vec<f64> {
        let lo = self.log10_lambda_min.ceil() as i32;
        let hi = self.log10_lambda_max.floor() as i32;
        (lo..=hi).map(|e| 10f64.powi(e)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub gcv: f64,
    /// Effective degrees of freedom per non-intercept term.
    pub edf: Vec<(String, f64)>,
    pub residual_variance: f64,
    /// True when the design was singular and the ridge fallback was used.
    pub ridge: bool,
    /// Features fitted linearly because they had too few distinct values.
    pub demoted: Vec<String>,
    /// Features left out because they were constant.
    pub dropped: Vec<String>,
    pub cycles: usize,
    pub rows: usize,
    /// Rows dropped because the response was not finite.
    pub missing_rows: usize,
    #[serde(skip)]
    pub fitted: Vec<f64>,
}

enum TermSpec {
    Linear { index: usize, centre: f64, dummy: bool },
    Smooth { index: usize, basis: CrBasis, constraint: DMatrix<f64> },
}

struct Term {
    spec: TermSpec,
    offset: usize,
    width: usize,
}

/// Square root of one scaled smoothing penalty, `S = root * root'`.
struct Penalty {
    offset: usize,
    root: DMatrix<f64>,
}

struct Design {
    x: DMatrix<f64>,
    terms: Vec<Term>,
    penalties: Vec<Penalty>,
    demoted: Vec<String>,
    dropped: Vec<String>,
}

fn distinct_count(sorted: &[f64]) -> usize {
    let mut count = 0;
    let mut last: Option<f64> = None;
    for &v in sorted {
        if last.is_none_or(|l| (v - l).abs() > 1e-12 * l.abs().max(1.0)) {
            count += 1;
            last = Some(v);
        }
    }
    count
}

/// Orthonormal basis of the complement of `c` (Householder reflection).
fn null_space(c: &DVector<f64>) -> DMatrix<f64> {
    let k = c.len();
    let norm = c.norm();
    let mut u = c.clone();
    u[0] += if c[0] < 0.0 { -norm } else { norm };
    let uu = u.dot(&u);
    let mut h = DMatrix::identity(k, k);
    if uu > 0.0 {
        h -= &u * u.transpose() * (2.0 / uu);
    }
    h.columns(1, k - 1).into_owned()
}

/// Largest basis size up to `wanted` that keeps the coefficient count within
/// the number of rows, but never below the smallest spline.
fn effective_basis_size(n: usize, columns: &[(usize, &FeatureDef, Vec<f64>)], wanted: usize) -> usize {
    let smooth = columns.iter().filter(|(_, d, _)| d.kind != FeatureKind::Dummy).count();
    if smooth == 0 {
        return wanted;
    }
    let linear = columns.len() - smooth;
    let room = n.saturating_sub(1 + linear) / smooth + 1;
    room.clamp(MIN_KNOTS, wanted.max(MIN_KNOTS))
}

fn build_design(rows: &[&[f64]], config: &GamConfig) -> Result<Design> {
    let n = rows.len();
    let mut columns = Vec::new();
    let mut dropped = Vec::new();
    for (index, def) in REGISTRY.iter().enumerate() {
        let column: Vec<f64> = rows.iter().map(|r| r[index]).collect();
        let mut sorted = column.clone();
        sorted.sort_by(f64::total_cmp);
        if distinct_count(&sorted) < 2 {
            dropped.push(def.name.to_string());
        } else {
            columns.push((index, def, column));
        }
    }
    let basis_size = effective_basis_size(n, &columns, config.basis_size);
    let mut specs = Vec::new();
    let mut demoted = Vec::new();
    for (index, def, column) in columns {
        let centre = column.iter().sum::<f64>() / n as f64;
        if def.kind == FeatureKind::Dummy {
            specs.push(TermSpec::Linear { index, centre: 0.0, dummy: true });
            continue;
        }
        let knots = quantile_knots(&column, basis_size);
        if knots.len() < MIN_KNOTS {
            demoted.push(def.name.to_string());
            specs.push(TermSpec::Linear { index, centre, dummy: false });
            continue;
        }
        let basis = CrBasis::new(knots)?;
        let mut sums = DVector::zeros(basis.size());
        for &v in &column {
            sums += basis.row(v);
        }
        let constraint = null_space(&sums);
        specs.push(TermSpec::Smooth { index, basis, constraint });
    }

    let mut terms = Vec::new();
    let mut p = 1;
    for spec in specs {
        let width = match &spec {
            TermSpec::Linear { .. } => 1,
            TermSpec::Smooth { constraint, .. } => constraint.ncols(),
        };
        terms.push(Term { spec, offset: p, width });
        p += width;
    }

    let mut x = DMatrix::zeros(n, p);
    let mut penalties = Vec::new();
    for i in 0..n {
        x[(i, 0)] = 1.0;
    }
    for term in &terms {
        match &term.spec {
            TermSpec::Linear { index, centre, .. } => {
                for (i, r) in rows.iter().enumerate() {
                    x[(i, term.offset)] = r[*index] - centre;
                }
            }
            TermSpec::Smooth { index, basis, constraint } => {
                for (i, r) in rows.iter().enumerate() {
                    let row = basis.row(r[*index]).transpose() * constraint;
                    x.view_mut((i, term.offset), (1, term.width)).copy_from(&row);
                }
                let block = x.columns(term.offset, term.width);
                let gram = block.transpose() * block;
                let s = constraint.transpose() * basis.penalty() * constraint;
                let s = (&s + s.transpose()) * 0.5;
                let scale = gram.norm() / s.norm();
                penalties.push(Penalty {
                    offset: term.offset,
                    root: penalty_root(&(s * scale)),
                });
            }
        }
    }
    Ok(Design { x, terms, penalties, demoted, dropped })
}

fn penalty_root(s: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(s.clone());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > 1e-10 * top)
        .collect();
    let mut root = DMatrix::zeros(s.nrows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let scaled = eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt();
        root.set_column(c, &scaled);
    }
    root
}

/// Normal-equation quantities shared by every GCV evaluation.
struct Search<'a> {
    q: DMatrix<f64>,
    a: DVector<f64>,
    yy: f64,
    n: f64,
    penalties: &'a [Penalty],
    ridge: f64,
}

/// GCV as a function of one term's λ with the others held fixed.
struct Line {
    eigen: DVector<f64>,
    g: DVector<f64>,
    gqb: DVector<f64>,
    d: DMatrix<f64>,
    b0a: f64,
    b0qb: f64,
    t0: f64,
    yy: f64,
    n: f64,
}

fn gcv_score(n: f64, rss: f64, trace: f64) -> f64 {
    let denom = n - trace;
    if denom <= 0.0 || !rss.is_finite() {
        return f64::INFINITY;
    }
    n * rss.max(0.0) / (denom * denom)
}

impl Line {
    fn gcv(&self, lambda: f64) -> f64 {
        let r = self.eigen.len();
        let w = DVector::from_fn(r, |k, _| lambda / (1.0 + lambda * self.eigen[k]));
        let v = w.component_mul(&self.g);
        let trace = self.t0 - (0..r).map(|k| w[k] * self.d[(k, k)]).sum::<f64>();
        let rss = self.yy - 2.0 * (self.b0a - v.dot(&self.g)) + self.b0qb - 2.0 * v.dot(&self.gqb)
            + v.dot(&(&self.d * &v));
        gcv_score(self.n, rss, trace)
    }
}

impl<'a> Search<'a> {
    fn new(design: &'a Design, y: &DVector<f64>) -> Self {
        let xt = design.x.transpose();
        Search {
            q: &xt * &design.x,
            a: &xt * y,
            yy: y.dot(y),
            n: y.len() as f64,
            penalties: &design.penalties,
            ridge: 0.0,
        }
    }

    fn matrix(&self, lambdas: &[f64], skip: Option<usize>) -> DMatrix<f64> {
        let mut m = self.q.clone();
        for (i, pen) in self.penalties.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let w = pen.root.nrows();
            let s = &pen.root * pen.root.transpose() * lambdas[i];
            let mut view = m.view_mut((pen.offset, pen.offset), (w, w));
            view += s;
        }
        for i in 0..m.nrows() {
            m[(i, i)] += self.ridge;
        }
        m
    }

    fn inverse(&self, m: DMatrix<f64>) -> Option<DMatrix<f64>> {
        let inv = m.cholesky()?.inverse();
        inv.iter().all(|v| v.is_finite()).then_some(inv)
    }

    fn needs_ridge(&self, lambdas: &[f64]) -> bool {
        let m = self.matrix(lambdas, None);
        let diag: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)]).collect();
        match m.cholesky() {
            None => true,
            Some(ch) => {
                let l = ch.l();
                (0..l.nrows()).any(|i| !(l[(i, i)] * l[(i, i)] > PIVOT_TOLERANCE * diag[i]))
            }
        }
    }

    /// Exact GCV for a full set of smoothing parameters.
    fn gcv(&self, lambdas: &[f64]) -> f64 {
        let Some(inv) = self.inverse(self.matrix(lambdas, None)) else {
            return f64::INFINITY;
        };
        let beta = &inv * &self.a;
        let trace = inv.component_mul(&self.q).sum();
        let rss = self.yy - 2.0 * beta.dot(&self.a) + beta.dot(&(&self.q * &beta));
        gcv_score(self.n, rss, trace)
    }

    fn line(&self, lambdas: &[f64], j: usize) -> Option<Line> {
        let inv = self.inverse(self.matrix(lambdas, Some(j)))?;
        let pen = &self.penalties[j];
        let w = pen.root.nrows();
        let g = inv.columns(pen.offset, w) * &pen.root;
        let c = pen.root.transpose() * g.rows(pen.offset, w);
        let eig = SymmetricEigen::new((&c + c.transpose()) * 0.5);
        let g = g * &eig.eigenvectors;
        let beta = &inv * &self.a;
        let qb = &self.q * &beta;
        let qg = &self.q * &g;
        Some(Line {
            eigen: eig.eigenvalues.map(|v| v.max(0.0)),
            g: g.transpose() * &self.a,
            gqb: g.transpose() * &qb,
            d: g.transpose() * qg,
            b0a: beta.dot(&self.a),
            b0qb: beta.dot(&qb),
            t0: inv.component_mul(&self.q).sum(),
            yy: self.yy,
            n: self.n,
        })
    }
}

/// Grid scan over integer powers of ten, then golden-section refinement
/// between the neighbours of the best grid point.
fn minimize_line(line: &Line, config: &GamConfig) -> (f64, f64) {
    let lo = config.log10_lambda_min;
    let hi = config.log10_lambda_max;
    let grid: Vec<f64> = config.lambda_grid().iter().map(|l| l.log10()).collect();
    let mut best = (lo, line.gcv(10f64.powf(lo)));
    for &e in grid.iter().chain(std::iter::once(&hi)) {
        let v = line.gcv(10f64.powf(e));
        if v < best.1 {
            best = (e, v);
        }
    }
    let (a, b) = ((best.0 - 1.0).max(lo), (best.0 + 1.0).min(hi));
    if b > a {
        let (e, v) = golden_section(|e| line.gcv(10f64.powf(e)), a, b, 1e-4);
        if v < best.1 {
            best = (e, v);
        }
    }
    (10f64.powf(best.0), best.1)
}

/// Fits one additive model of `y` on the feature rows.
pub fn fit_gam(
    features: &[FeatureVector],
    y: &[f64],
    label: &str,
    config: &GamConfig,
) -> Result<(GamModel, FitDiagnostics)> {
    if features.len() != y.len() {
        return Err(Error::Config(format!(
            "{} feature rows for {} responses",
            features.len(),
            y.len()
        )));
    }
    let keep: Vec<usize> = (0..y.len()).filter(|&i| y[i].is_finite()).collect();
    if keep.len() < config.min_rows {
        return Err(Error::InsufficientData(format!(
            "{label}: {} usable rows, need {}",
            keep.len(),
            config.min_rows
        )));
    }
    let rows: Vec<&[f64]> = keep.iter().map(|&i| features[i].values()).collect();
    let yv = DVector::from_iterator(keep.len(), keep.iter().map(|&i| y[i]));
    let design = build_design(&rows, config)?;
    let mut search = Search::new(&design, &yv);
    let np = design.penalties.len();

    let start = config.fixed_lambda.unwrap_or(1.0);
    let mut lambdas = vec![start; np];
    let ridge = search.needs_ridge(&lambdas);
    if ridge {
        let p = search.q.nrows();
        search.ridge = RIDGE * search.q.trace() / p as f64;
        log::debug!("{label}: singular design, ridge fallback");
    }

    let mut cycles = 0;
    if config.fixed_lambda.is_none() && np > 0 {
        let mut current = search.gcv(&lambdas);
        while cycles < config.max_cycles {
            let before = current;
            for j in 0..np {
                let Some(line) = search.line(&lambdas, j) else {
                    continue;
                };
                let here = line.gcv(lambdas[j]);
                let (lambda, value) = minimize_line(&line, config);
                if value < here {
                    lambdas[j] = lambda;
                    current = value;
                } else {
                    current = here;
                }
            }
            cycles += 1;
            if !(before - current >= config.tolerance) {
                break;
            }
        }
    }

    let (beta, r) = solve_penalized(&design, &yv, &lambdas, search.ridge)?;
    let fitted = &design.x * &beta;
    let rss = (&yv - &fitted).norm_squared();
    let inv = upper_inverse(&r)?;
    let minv = &inv * inv.transpose();
    let influence: Vec<f64> = (0..beta.len())
        .map(|i| minv.row(i).dot(&search.q.row(i)))
        .collect();
    let trace: f64 = influence.iter().sum();
    let n = yv.len() as f64;

    let mut linear = Vec::new();
    let mut smooths = Vec::new();
    let mut edf = Vec::new();
    let mut pen_index = 0;
    for term in &design.terms {
        let block = beta.rows(term.offset, term.width);
        let term_edf: f64 = influence[term.offset..term.offset + term.width].iter().sum();
        match &term.spec {
            TermSpec::Linear { index, centre, dummy } => {
                let name = REGISTRY[*index].name.to_string();
                edf.push((name.clone(), term_edf));
                linear.push(LinearTerm {
                    feature: name,
                    index: *index,
                    centre: *centre,
                    coef: block[0],
                    dummy: *dummy,
                });
            }
            TermSpec::Smooth { index, basis, constraint } => {
                let name = REGISTRY[*index].name.to_string();
                edf.push((name.clone(), term_edf));
                let coefs = (constraint * block).iter().copied().collect();
                smooths.push(SmoothTerm::new(name, *index, basis.clone(), coefs, lambdas[pen_index]));
                pen_index += 1;
            }
        }
    }

    let model = GamModel {
        label: label.to_string(),
        registry_hash: registry_hash(),
        intercept: beta[0],
        linear,
        smooths,
    };
    let diagnostics = FitDiagnostics {
        gcv: gcv_score(n, rss, trace),
        edf,
        residual_variance: rss / (n - trace).max(1.0),
        ridge,
        demoted: design.demoted,
        dropped: design.dropped,
        cycles,
        rows: keep.len(),
        missing_rows: y.len() - keep.len(),
        fitted: fitted.iter().copied().collect(),
    };
    Ok((model, diagnostics))
}

/// Solves the penalized problem through QR of the augmented design
/// `[X; sqrt(λ) root'; sqrt(ridge) I]`, which avoids squaring the condition
/// number for large λ.
fn solve_penalized(
    design: &Design,
    y: &DVector<f64>,
    lambdas: &[f64],
    ridge: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = design.x.nrows();
    let p = design.x.ncols();
    let extra: usize = design.penalties.iter().map(|pen| pen.root.ncols()).sum();
    let ridge_rows = if ridge > 0.0 { p } else { 0 };
    let mut a = DMatrix::zeros(n + extra + ridge_rows, p);
    a.rows_mut(0, n).copy_from(&design.x);
    let mut row = n;
    for (pen, &lambda) in design.penalties.iter().zip(lambdas) {
        let block = pen.root.transpose() * lambda.sqrt();
        a.view_mut((row, pen.offset), (block.nrows(), block.ncols())).copy_from(&block);
        row += block.nrows();
    }
    for i in 0..ridge_rows {
        a[(row + i, i)] = ridge.sqrt();
    }
    let mut b = DVector::zeros(a.nrows());
    b.rows_mut(0, n).copy_from(y);
    let qr = a.qr();
    qr.q_tr_mul(&mut b);
    let r = qr.r();
    let beta = r
        .solve_upper_triangular(&b.rows(0, p).into_owned())
        .filter(|v| v.iter().all(|x| x.is_finite()))
        .ok_or(Error::SingularDesign)?;
    Ok((beta, r))
}

fn upper_inverse(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = r.nrows();
    r.solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::SingularDesign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::feature_index;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Rows where only the listed features vary (uniform on [0,1]); the rest
    /// are constant and dropped, which keeps the design small.
    fn rows(n: usize, varying: &[&str], seed: u64) -> Vec<FeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Vec<usize> = varying.iter().map(|f| feature_index(f).unwrap()).collect();
        (0..n)
            .map(|_| {
                let mut v = vec![0.5; REGISTRY.len()];
                for &i in &idx {
                    v[i] = rng.random::<f64>();
                }
                FeatureVector::from_values(v).unwrap()
            })
            .collect()
    }

    fn response(rows: &[FeatureVector], f: impl Fn(&FeatureVector) -> f64, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        rows.iter().map(|r| f(r) + noise.sample(&mut rng)).collect()
    }

    fn effect_rmse(model: &GamModel, feature: &str, truth: impl Fn(f64) -> f64) -> f64 {
        let grid: Vec<f64> = (0..=50).map(|i| 0.02 + 0.96 * i as f64 / 50.0).collect();
        let effect = model.partial_effect(feature, &grid).unwrap();
        let t: Vec<f64> = grid.iter().map(|&g| truth(g)).collect();
        let tm = t.iter().sum::<f64>() / t.len() as f64;
        let em = effect.iter().map(|e| e.1).sum::<f64>() / t.len() as f64;
        let sq: f64 = effect.iter().zip(&t).map(|(e, t)| (e.1 - em - (t - tm)).powi(2)).sum();
        (sq / t.len() as f64).sqrt()
    }

    #[test]
    fn constant_response_gives_intercept_only() {
        let x = rows(300, &["x-acf1", "entropy", "hurst"], 1);
        let y = vec![3.0; 300];
        let (model, _) = fit_gam(&x, &y, "c", &GamConfig::default()).unwrap();
        assert!((model.intercept - 3.0).abs() < 1e-9);
        for s in &model.smooths {
            assert!(s.coefs.iter().all(|c| c.abs() < 1e-6), "{}", s.feature);
        }
        let effect = model.partial_effect("entropy", &[0.0, 0.3, 2.0]).unwrap();
        assert!(effect.iter().all(|e| e.1.abs() < 1e-6));
    }

    #[test]
    fn recovers_linear_and_sine_effects() {
        let x = rows(800, &["x-acf1", "seasonal-strength", "entropy", "lumpiness"], 2);
        let a = feature_index("x-acf1").unwrap();
        let s = feature_index("seasonal-strength").unwrap();
        let y = response(&x, |r| 2.0 * r.values()[a] + (3.0 * r.values()[s]).sin(), 0.01, 3);
        let (model, diag) = fit_gam(&x, &y, "r", &GamConfig::default()).unwrap();
        assert!(effect_rmse(&model, "x-acf1", |v| 2.0 * v) < 0.05);
        assert!(effect_rmse(&model, "seasonal-strength", |v| (3.0 * v).sin()) < 0.1);
        assert!(diag.gcv > 0.0);
        for (name, e) in &diag.edf {
            assert!(*e > 1.0 - 1e-6 && *e <= 9.0 + 1e-6, "{name}: {e}");
        }
    }

    #[test]
    fn huge_lambda_matches_linear_fit() {
        let names = ["x-acf1", "entropy", "curvature"];
        let x = rows(400, &names, 4);
        let y = response(&x, |r| (4.0 * r.values()[feature_index("entropy").unwrap()]).cos(), 0.1, 5);
        let config = GamConfig {
            fixed_lambda: Some(1e12),
            ..GamConfig::default()
        };
        let (model, _) = fit_gam(&x, &y, "l", &config).unwrap();
        let mut design = DMatrix::zeros(x.len(), names.len() + 1);
        for (i, r) in x.iter().enumerate() {
            design[(i, 0)] = 1.0;
            for (j, f) in names.iter().enumerate() {
                design[(i, j + 1)] = r.get(f).unwrap();
            }
        }
        let (coefs, _) = crate::stats::ols(&design, &y).unwrap();
        for (j, f) in names.iter().enumerate() {
            let e = model.partial_effect(f, &[0.2, 0.8]).unwrap();
            let slope = (e[1].1 - e[0].1) / 0.6;
            assert!((slope - coefs[j + 1]).abs() < 1e-4, "{f}: {slope} vs {}", coefs[j + 1]);
        }
    }

    #[test]
    fn prediction_consistency() {
        let x = rows(300, &["x-acf1", "hurst", "spike"], 6);
        let y = response(&x, |r| r.values()[17].powi(2), 0.05, 7);
        let (model, diag) = fit_gam(&x, &y, "p", &GamConfig::default()).unwrap();
        for (row, fitted) in x.iter().zip(&diag.fitted).take(50) {
            let p = model.predict(row).unwrap();
            assert!((p - fitted).abs() < 1e-9);
            let terms = model.term_values(row).unwrap();
            let sum = model.intercept + terms.iter().map(|t| t.1).sum::<f64>();
            assert!((p - sum).abs() < 1e-9);
        }
        let mut means = vec![0.5; REGISTRY.len()];
        for s in &model.smooths {
            means[s.index] = x.iter().map(|r| r.values()[s.index]).sum::<f64>() / x.len() as f64;
        }
        let at_means = FeatureVector::from_values(means.clone()).unwrap();
        let expected = model.intercept + model.smooths.iter().map(|s| s.value(means[s.index])).sum::<f64>();
        assert!((model.predict(&at_means).unwrap() - expected).abs() < 1e-6);
        let mut far = means;
        far[17] = 25.0;
        assert!(model.predict(&FeatureVector::from_values(far).unwrap()).unwrap().is_finite());
    }

    #[test]
    fn gcv_is_minimal_over_the_grid() {
        let x = rows(300, &["x-acf1", "entropy"], 8);
        let y = response(&x, |r| (5.0 * r.values()[feature_index("entropy").unwrap()]).sin(), 0.2, 9);
        let config = GamConfig::default();
        let (model, diag) = fit_gam(&x, &y, "g", &config).unwrap();
        let rows_ref: Vec<&[f64]> = x.iter().map(|r| r.values()).collect();
        let design = build_design(&rows_ref, &config).unwrap();
        let search = Search::new(&design, &DVector::from_vec(y.clone()));
        let chosen: Vec<f64> = model.smooths.iter().map(|s| s.lambda).collect();
        let best = search.gcv(&chosen);
        assert!((best - diag.gcv).abs() < 1e-9 * best);
        for j in 0..chosen.len() {
            for g in config.lambda_grid() {
                let mut l = chosen.clone();
                l[j] = g;
                assert!(search.gcv(&l) >= best - config.tolerance, "term {j} at {g}");
            }
        }
    }

    #[test]
    fn sparse_features_are_demoted_or_dropped() {
        let mut x = rows(250, &["x-acf1"], 10);
        let lin = feature_index("entropy").unwrap();
        for (i, r) in x.iter_mut().enumerate() {
            let mut v = r.values().to_vec();
            v[lin] = (i % 2) as f64;
            *r = FeatureVector::from_values(v).unwrap();
        }
        let y = response(&x, |r| r.values()[lin], 0.1, 11);
        let (model, diag) = fit_gam(&x, &y, "d", &GamConfig::default()).unwrap();
        assert_eq!(diag.demoted, vec!["entropy".to_string()]);
        assert!(diag.dropped.contains(&"hurst".to_string()));
        let term = model.linear.iter().find(|t| t.feature == "entropy").unwrap();
        assert!((term.coef - 1.0).abs() < 0.1);
    }

    #[test]
    fn basis_shrinks_with_few_rows() {
        let smooth = REGISTRY.iter().find(|d| d.kind != FeatureKind::Dummy).unwrap();
        let cols: Vec<(usize, &FeatureDef, Vec<f64>)> = (0..10).map(|i| (i, smooth, Vec::new())).collect();
        assert_eq!(effective_basis_size(10_000, &cols, 10), 10);
        assert_eq!(effective_basis_size(61, &cols, 10), 7);
        assert_eq!(effective_basis_size(5, &cols, 10), MIN_KNOTS);
    }

    #[test]
    fn collinear_dummies_use_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = feature_index("seasonal-period-q").unwrap();
        let m = feature_index("seasonal-period-m").unwrap();
        let np = feature_index("nperiods").unwrap();
        let mut x = rows(300, &["x-acf1"], 13);
        for r in x.iter_mut() {
            let mut v = r.values().to_vec();
            let kind = rng.random_range(0..3);
            v[q] = (kind == 1) as u8 as f64;
            v[m] = (kind == 2) as u8 as f64;
            v[np] = v[q] + v[m];
            *r = FeatureVector::from_values(v).unwrap();
        }
        let y = response(&x, |r| 1.0 + 0.5 * r.values()[m], 0.05, 14);
        let (model, diag) = fit_gam(&x, &y, "s", &GamConfig::default()).unwrap();
        assert!(diag.ridge);
        let monthly = model.predict(&x.iter().find(|r| r.values()[m] == 1.0).unwrap().clone()).unwrap();
        assert!(monthly.is_finite());
        let effect: f64 = ["nperiods", "seasonal-period-m"]
            .iter()
            .map(|f| model.linear.iter().find(|t| t.feature == *f).unwrap().coef)
            .sum();
        assert!((effect - 0.5).abs() < 0.05);
    }

    #[test]
    fn too_few_rows_and_missing_responses() {
        let x = rows(250, &["x-acf1"], 15);
        let mut y = vec![1.0; 250];
        assert!(matches!(
            fit_gam(&x[..199], &y[..199], "t", &GamConfig::default()),
            Err(Error::InsufficientData(_))
        ));
        for v in y.iter_mut().take(10) {
            *v = f64::NAN;
        }
        let (_, diag) = fit_gam(&x, &y, "t", &GamConfig::default()).unwrap();
        assert_eq!(diag.missing_rows, 10);
        assert_eq!(diag.rows, 240);
    }

    #[test]
    fn deterministic_and_round_trips() {
        let x = rows(300, &["x-acf1", "entropy", "spike"], 16);
        let y = response(&x, |r| r.values()[0] * 0.3, 0.1, 17);
        let (a, _) = fit_gam(&x, &y, "rt", &GamConfig::default()).unwrap();
        let (b, _) = fit_gam(&x, &y, "rt", &GamConfig::default()).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        let back: GamModel = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(a, back);
        for r in &x {
            assert_eq!(a.predict(r).unwrap().to_bits(), back.predict(r).unwrap().to_bits());
        }
    }

    #[test]
    fn registry_and_feature_errors() {
        let x = rows(250, &["x-acf1"], 18);
        let y = response(&x, |r| r.values()[0], 0.1, 19);
        let (mut model, _) = fit_gam(&x, &y, "e", &GamConfig::default()).unwrap();
        assert!(matches!(model.partial_effect("no-such", &[0.0]), Err(Error::UnknownFeature(_))));
        assert_eq!(model.partial_effect("x-acf1", &[0.4]).unwrap().len(), 1);
        model.registry_hash = "0".repeat(64);
        assert!(matches!(model.predict(&x[0]), Err(Error::RegistryMismatch { .. })));
    }
}
