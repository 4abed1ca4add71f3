//! Shared numerical primitives: least squares, rank correlation, multiple
//! comparison correction, deterministic bootstrap, and eigendecomposition.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{AuditError, Result};
use crate::exec;

/// Singular values below `cutoff_ratio * sigma_max` are treated as zero, so
/// perfectly collinear designs fall back to the minimum-norm solution
/// instead of failing. Collinear factors are the phenomenon under study.
const SV_CUTOFF_RATIO: f64 = 1e-10;

/// Ordinary least squares fit with an intercept term.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Coefficients; index 0 is the intercept.
    pub coefficients: DVector<f64>,
    pub r_squared: f64,
    pub residuals: DVector<f64>,
    pub design_columns: Vec<String>,
}

impl OlsFit {
    /// Coefficients excluding the intercept.
    pub fn weights(&self) -> Vec<f64> {
        self.coefficients.iter().skip(1).copied().collect()
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by n).
pub fn population_variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64
}

/// Sample variance (divides by n-1).
pub fn sample_variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Pearson correlation; NaN when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}

/// Least squares of `target` on `[1 | design]` via SVD pseudo-inverse.
///
/// `design` excludes the intercept column; the fit prepends it. Errors:
/// `Underdetermined` when rows <= columns (intercept included), and
/// `DegenerateTarget` when the target has zero variance (R^2 undefined).
pub fn ols(design: &DMatrix<f64>, target: &DVector<f64>) -> Result<OlsFit> {
    let names: Vec<String> = std::iter::once("intercept".to_string())
        .chain((1..=design.ncols()).map(|j| format!("x{j}")))
        .collect();
    ols_named(design, target, names)
}

/// [`ols`] with caller-supplied column descriptors (intercept included).
pub fn ols_named(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    names: Vec<String>,
) -> Result<OlsFit> {
    let m = design.nrows();
    let p_total = design.ncols() + 1;
    if m <= p_total {
        return Err(AuditError::Underdetermined {
            rows: m,
            cols: p_total,
        });
    }
    ols_min_norm(design, target, names)
}

/// Pseudo-inverse least squares without the row-count guard. Used where an
/// intentionally underdetermined fit is meaningful (rating-collapse
/// regressions interpolate exactly and report R^2 = 1).
pub fn ols_min_norm(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    names: Vec<String>,
) -> Result<OlsFit> {
    let m = design.nrows();
    if m != target.len() {
        return Err(AuditError::InvalidInput(format!(
            "design has {m} rows but target has {}",
            target.len()
        )));
    }
    if m == 0 {
        return Err(AuditError::Underdetermined { rows: 0, cols: design.ncols() + 1 });
    }
    let sst: f64 = {
        let my = target.iter().sum::<f64>() / m as f64;
        target.iter().map(|v| (v - my) * (v - my)).sum()
    };
    if sst <= 0.0 {
        return Err(AuditError::DegenerateTarget);
    }

    let mut x = DMatrix::zeros(m, design.ncols() + 1);
    for i in 0..m {
        x[(i, 0)] = 1.0;
        for j in 0..design.ncols() {
            x[(i, j + 1)] = design[(i, j)];
        }
    }
    let svd = x.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = SV_CUTOFF_RATIO * sigma_max.max(1.0);
    let beta = svd
        .solve(target, eps)
        .map_err(|e| AuditError::Degenerate(format!("svd solve failed: {e}")))?;
    let beta = DVector::from_iterator(x.ncols(), beta.iter().copied());
    let fitted = &x * &beta;
    let residuals = target - &fitted;
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    Ok(OlsFit {
        coefficients: beta,
        r_squared: 1.0 - sse / sst,
        residuals,
        design_columns: names,
    })
}

/// Correlation method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrMethod {
    Spearman,
    Pearson,
}

/// Symmetric correlation matrix with raw and Bonferroni-corrected p-values.
///
/// Constant columns produce NaN entries; averages skip them.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub values: DMatrix<f64>,
    pub p_values: DMatrix<f64>,
    pub corrected_p: DMatrix<f64>,
    pub method: CorrMethod,
}

impl CorrelationMatrix {
    /// Mean of defined off-diagonal entries.
    pub fn mean_off_diagonal(&self) -> f64 {
        let k = self.values.nrows();
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..k {
            for j in 0..k {
                if i != j && self.values[(i, j)].is_finite() {
                    total += self.values[(i, j)];
                    count += 1;
                }
            }
        }
        if count == 0 {
            f64::NAN
        } else {
            total / count as f64
        }
    }
}

/// Average ranks with ties sharing the mean rank (1-based).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN in ranks"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn t_approx_p_value(rho: f64, m: usize) -> f64 {
    if !rho.is_finite() {
        return f64::NAN;
    }
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (m - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Pairwise Spearman rank correlation over the columns of `matrix`, with
/// two-sided p-values from the t approximation and Bonferroni correction
/// over the k(k-1)/2 pairwise tests.
pub fn spearman_matrix(matrix: &DMatrix<f64>) -> Result<CorrelationMatrix> {
    let m = matrix.nrows();
    let k = matrix.ncols();
    if m < 3 {
        return Err(AuditError::InvalidInput(format!(
            "spearman needs at least 3 rows, got {m}"
        )));
    }
    let ranked: Vec<Vec<f64>> = exec::map_indexed(k, |j| {
        let col: Vec<f64> = matrix.column(j).iter().copied().collect();
        average_ranks(&col)
    });
    let tests = k * (k - 1) / 2;
    let mut values = DMatrix::from_element(k, k, f64::NAN);
    let mut p_values = DMatrix::from_element(k, k, f64::NAN);
    for i in 0..k {
        values[(i, i)] = 1.0;
        p_values[(i, i)] = 0.0;
        for j in (i + 1)..k {
            let rho = pearson(&ranked[i], &ranked[j]);
            let p = if rho.is_nan() {
                f64::NAN
            } else {
                t_approx_p_value(rho, m)
            };
            values[(i, j)] = rho;
            values[(j, i)] = rho;
            p_values[(i, j)] = p;
            p_values[(j, i)] = p;
        }
    }
    let corrected_p = p_values.map(|p| {
        if p.is_nan() {
            f64::NAN
        } else {
            (p * tests.max(1) as f64).min(1.0)
        }
    });
    Ok(CorrelationMatrix {
        values,
        p_values,
        corrected_p,
        method: CorrMethod::Spearman,
    })
}

/// Bonferroni correction: `min(1, p * tests)` per entry.
pub fn bonferroni(p: &[f64], tests: usize) -> Result<Vec<f64>> {
    if tests == 0 {
        return Err(AuditError::InvalidInput(
            "bonferroni requires tests >= 1".into(),
        ));
    }
    Ok(p.iter().map(|v| (v * tests as f64).min(1.0)).collect())
}

/// Bootstrap percentile interval.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// The statistic on the original data, not the resample mean.
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Successful per-iteration statistics, in iteration order.
    pub samples: Option<Vec<f64>>,
}

/// Deterministic RNG for one derived stream of a seeded computation.
pub fn derived_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw `rows` indices with replacement.
pub fn resample_indices(rng: &mut ChaCha8Rng, rows: usize) -> Vec<usize> {
    (0..rows).map(|_| rng.gen_range(0..rows)).collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over iid row resamples.
///
/// Each iteration draws its RNG from `(seed, iteration)` so results are
/// reproducible and independent of evaluation order; iterations where the
/// statistic fails are recorded as missing, and more than 10% missing is an
/// error.
pub fn bootstrap<F>(
    statistic: F,
    rows: usize,
    iterations: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapResult>
where
    F: Fn(&[usize]) -> Option<f64> + Sync + Send,
{
    if iterations == 0 {
        return Err(AuditError::InvalidInput(
            "bootstrap requires iterations >= 1".into(),
        ));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(AuditError::InvalidInput(format!(
            "confidence level must be in (0,1), got {level}"
        )));
    }
    if rows == 0 {
        return Err(AuditError::InvalidInput("bootstrap over zero rows".into()));
    }
    let original: Vec<usize> = (0..rows).collect();
    let point = statistic(&original)
        .ok_or_else(|| AuditError::Degenerate("statistic failed on the original data".into()))?;

    let draws: Vec<Option<f64>> = exec::map_indexed(iterations, |iter| {
        let mut rng = derived_rng(seed, iter as u64 + 1);
        let indices = resample_indices(&mut rng, rows);
        statistic(&indices)
    });
    let samples: Vec<f64> = draws.iter().copied().flatten().collect();
    let failed = iterations - samples.len();
    if failed * 10 > iterations {
        return Err(AuditError::BootstrapFailures {
            failed,
            total: iterations,
        });
    }
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapResult {
        point,
        lower: quantile_sorted(&sorted, alpha),
        upper: quantile_sorted(&sorted, 1.0 - alpha),
        iterations,
        seed,
        samples: Some(samples),
    })
}

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues come back descending; each eigenvector is flipped so its
/// largest-magnitude entry is positive.
pub fn eigendecompose_symmetric(matrix: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = matrix.nrows();
    if matrix.ncols() != k {
        return Err(AuditError::Degenerate("matrix is not square".into()));
    }
    for i in 0..k {
        for j in 0..k {
            if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-10 {
                return Err(AuditError::Degenerate(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let eigen = matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let mut eigenvalues = DVector::zeros(k);
    let mut eigenvectors = DMatrix::zeros(k, k);
    for (out_col, &src) in order.iter().enumerate() {
        eigenvalues[out_col] = eigen.eigenvalues[src];
        let mut col = eigen.eigenvectors.column(src).clone_owned();
        let dominant = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite"))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if col[dominant] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(out_col, &col);
    }
    Ok((eigenvalues, eigenvectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, proptest};

    fn vector(values: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(values)
    }

    #[test]
    fn ols_identity_line() {
        let design = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        let target = vector(&[0.0, 1.0, 2.0]);
        let fit = ols(&design, &target).unwrap();
        assert!((fit.coefficients[0]).abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_exact_linear_combination() {
        let mut rng = derived_rng(7, 0);
        let m = 50;
        let design = DMatrix::from_fn(m, 3, |_, _| rng.gen_range(-1.0..1.0));
        let target = DVector::from_fn(m, |i, _| {
            2.0 + 0.5 * design[(i, 0)] - 1.5 * design[(i, 1)] + 0.25 * design[(i, 2)]
        });
        let fit = ols(&design, &target).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ols_independent_target_has_near_zero_r2() {
        for seed in 0..5u64 {
            let mut rng = derived_rng(seed, 0);
            let m = 2000;
            let design = DMatrix::from_fn(m, 5, |_, _| rng.gen_range(-1.0..1.0));
            let target = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
            let fit = ols(&design, &target).unwrap();
            assert!(fit.r_squared < 0.01, "seed {seed}: R^2 = {}", fit.r_squared);
        }
    }

    #[test]
    fn ols_rejects_underdetermined_and_constant_target() {
        let design = DMatrix::from_column_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let target = vector(&[1.0, 2.0]);
        assert!(matches!(
            ols(&design, &target),
            Err(AuditError::Underdetermined { .. })
        ));
        let design = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let target = vector(&[2.0, 2.0, 2.0, 2.0]);
        assert!(matches!(
            ols(&design, &target),
            Err(AuditError::DegenerateTarget)
        ));
    }

    #[test]
    fn ols_survives_perfect_collinearity() {
        let mut rng = derived_rng(11, 0);
        let m = 40;
        let base = DMatrix::from_fn(m, 1, |_, _| rng.gen_range(-1.0..1.0));
        let mut design = DMatrix::zeros(m, 2);
        for i in 0..m {
            design[(i, 0)] = base[(i, 0)];
            design[(i, 1)] = 2.0 * base[(i, 0)]; // exact collinearity
        }
        let target = DVector::from_fn(m, |i, _| base[(i, 0)] * 3.0 + 1.0);
        let fit = ols(&design, &target).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spearman_self_and_negation() {
        let mut rng = derived_rng(3, 0);
        let col: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..10.0)).collect();
        let mut m = DMatrix::zeros(20, 2);
        for i in 0..20 {
            m[(i, 0)] = col[i];
            m[(i, 1)] = -col[i];
        }
        let corr = spearman_matrix(&m).unwrap();
        assert!((corr.values[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((corr.values[(0, 1)] + 1.0).abs() < 1e-12);
    }

    // Independent oracle: rank both columns (average ties), then apply the
    // textbook Pearson formula directly.
    fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
        let rx = average_ranks(x);
        let ry = average_ranks(y);
        let n = x.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let num: f64 = rx
            .iter()
            .zip(ry.iter())
            .map(|(a, b)| (a - mx) * (b - my))
            .sum();
        let dx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
        let dy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
        num / (dx * dy).sqrt()
    }

    #[test]
    fn spearman_matches_rank_then_pearson_oracle() {
        let mut rng = derived_rng(5, 0);
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut m = DMatrix::zeros(10, 2);
        for i in 0..10 {
            m[(i, 0)] = x[i];
            m[(i, 1)] = y[i];
        }
        let corr = spearman_matrix(&m).unwrap();
        assert!((corr.values[(0, 1)] - spearman_oracle(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn spearman_constant_column_is_nan_sentinel() {
        let mut m = DMatrix::zeros(10, 2);
        for i in 0..10 {
            m[(i, 0)] = 4.0;
            m[(i, 1)] = i as f64;
        }
        let corr = spearman_matrix(&m).unwrap();
        assert!(corr.values[(0, 1)].is_nan());
        assert!(corr.mean_off_diagonal().is_nan());
    }

    #[test]
    fn bonferroni_definition_and_cap() {
        let out = bonferroni(&[0.01, 0.2], 10).unwrap();
        assert!((out[0] - 0.1).abs() < 1e-15);
        assert_eq!(out[1], 1.0);
        assert!(bonferroni(&[0.1], 0).is_err());
        // k=5 factor matrix convention
        let k = 5;
        assert_eq!(k * (k - 1) / 2, 10);
    }

    #[test]
    fn bootstrap_constant_statistic_degenerate_interval() {
        let result = bootstrap(|_| Some(4.2), 10, 200, 1, 0.95).unwrap();
        assert_eq!(result.lower, 4.2);
        assert_eq!(result.upper, 4.2);
        assert_eq!(result.point, 4.2);
    }

    #[test]
    fn bootstrap_is_deterministic_under_seed() {
        let data: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let stat = |idx: &[usize]| Some(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
        let a = bootstrap(stat, data.len(), 300, 42, 0.95).unwrap();
        let b = bootstrap(stat, data.len(), 300, 42, 0.95).unwrap();
        assert_eq!(a.lower.to_bits(), b.lower.to_bits());
        assert_eq!(a.upper.to_bits(), b.upper.to_bits());
    }

    #[test]
    fn bootstrap_interval_width_tracks_analytic_se() {
        // mean of n=500 standard normal draws: 95% width should be near
        // 2 * 1.96 / sqrt(500)
        let mut rng = derived_rng(9, 0);
        let data: Vec<f64> = (0..500)
            .map(|_| {
                let d: f64 = rand_distr::Distribution::sample(
                    &rand_distr::StandardNormal,
                    &mut rng,
                );
                d
            })
            .collect();
        let stat =
            |idx: &[usize]| Some(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
        let result = bootstrap(stat, data.len(), 1000, 17, 0.95).unwrap();
        let width = result.upper - result.lower;
        let analytic = 2.0 * 1.96 / (500f64).sqrt();
        assert!(
            (width - analytic).abs() <= 0.2 * analytic,
            "width {width} vs analytic {analytic}"
        );
    }

    #[test]
    fn bootstrap_too_many_failures_is_an_error() {
        let stat = |idx: &[usize]| {
            // fail whenever index 0 is absent from the resample
            if idx.contains(&0) {
                Some(1.0)
            } else {
                None
            }
        };
        // With 2 rows, P(no zero) = 0.25 per iteration; ~25% failures.
        let err = bootstrap(stat, 2, 400, 5, 0.95).unwrap_err();
        assert!(matches!(err, AuditError::BootstrapFailures { .. }));
    }

    #[test]
    fn eigen_identity_and_diagonal() {
        let (vals, _) = eigendecompose_symmetric(&DMatrix::identity(4, 4)).unwrap();
        for v in vals.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let d = DMatrix::from_diagonal(&vector(&[1.0, 3.0, 2.0]));
        let (vals, vecs) = eigendecompose_symmetric(&d).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
        // axis-aligned with positive dominant entries
        assert!((vecs[(1, 0)] - 1.0).abs() < 1e-12);
        assert!((vecs[(2, 1)] - 1.0).abs() < 1e-12);
        assert!((vecs[(0, 2)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_random_correlation_matrix() {
        let mut rng = derived_rng(13, 0);
        let raw = DMatrix::from_fn(40, 5, |_, _| rng.gen_range(-1.0..1.0));
        let mut corr = DMatrix::identity(5, 5);
        for i in 0..5 {
            for j in (i + 1)..5 {
                let x: Vec<f64> = raw.column(i).iter().copied().collect();
                let y: Vec<f64> = raw.column(j).iter().copied().collect();
                let r = pearson(&x, &y);
                corr[(i, j)] = r;
                corr[(j, i)] = r;
            }
        }
        let (vals, vecs) = eigendecompose_symmetric(&corr).unwrap();
        let recon = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        let max_err = (&recon - &corr).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        assert!(max_err < 1e-8, "reconstruction error {max_err}");
    }

    #[test]
    fn eigen_rejects_non_symmetric() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 0.5;
        assert!(eigendecompose_symmetric(&m).is_err());
    }

    proptest! {
        #[test]
        fn r_squared_invariant_under_column_rescale(scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
            let mut rng = derived_rng(21, 0);
            let m = 30;
            let design = DMatrix::from_fn(m, 2, |_, _| rng.gen_range(-1.0..1.0));
            let target = DVector::from_fn(m, |i, _| {
                design[(i, 0)] - design[(i, 1)] + 0.1 * rng.gen_range(-1.0..1.0)
            });
            let mut rescaled = design.clone();
            for i in 0..m {
                rescaled[(i, 0)] = scale * design[(i, 0)] + shift;
            }
            let a = ols(&design, &target).unwrap();
            let b = ols(&rescaled, &target).unwrap();
            prop_assert!((a.r_squared - b.r_squared).abs() < 1e-9);
        }

        #[test]
        fn nested_design_never_loses_r_squared(seed in 0u64..20) {
            let mut rng = derived_rng(seed, 3);
            let m = 40;
            let design = DMatrix::from_fn(m, 3, |_, _| rng.gen_range(-1.0..1.0));
            let target = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
            let subset = design.columns(0, 2).clone_owned();
            let small = ols(&subset, &target).unwrap();
            let big = ols(&design, &target).unwrap();
            prop_assert!(big.r_squared >= small.r_squared - 1e-12);
        }

        #[test]
        fn spearman_invariant_under_monotone_transform(seed in 0u64..20) {
            let mut rng = derived_rng(seed, 4);
            let x: Vec<f64> = (0..15).map(|_| rng.gen_range(0.1..5.0)).collect();
            let y: Vec<f64> = (0..15).map(|_| rng.gen_range(0.1..5.0)).collect();
            let transformed: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            prop_assert!((spearman_oracle(&x, &y) - spearman_oracle(&transformed, &y)).abs() < 1e-12);
        }

        #[test]
        fn bonferroni_monotone_and_never_below_input(p in proptest::collection::vec(0.0f64..1.0, 1..8), tests in 1usize..20) {
            let out = bonferroni(&p, tests).unwrap();
            for (raw, corrected) in p.iter().zip(out.iter()) {
                prop_assert!(*corrected >= *raw - 1e-15);
                prop_assert!(*corrected <= 1.0);
            }
        }
    }
}
