//! Psychometric validity: internal consistency per factor (Cronbach's
//! alpha), discriminant validity via factor loadings (cross-loading ratios
//! with sigmoid normalization) and HTMT, and the unified score with its
//! sensitivity reading on the judgment scale.
//!
//! Scores live in a factor x question x observation cube. Items are
//! question columns; variances and correlations run across the observation
//! axis, where one observation series is a (model pair, judge, setting)
//! judgment stream. Item-pair correlations use different-question pairs
//! only, which keeps `htmt(i, i) = 1` and makes an exact duplicate factor
//! score exactly 1.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::exec;
use crate::judgment::{JudgmentSet, SampleMatrix};
use crate::stats;

/// Sigmoid center: the discriminant-validity threshold where primary
/// loadings around 0.40 against cross-loadings below 0.30 land.
pub const CLR_THRESHOLD: f64 = 1.5;

/// Factor x question x observation score array. NaN marks a missing cell.
#[derive(Debug, Clone)]
pub struct ScoreCube {
    pub factor_names: Vec<String>,
    pub question_ids: Vec<String>,
    pub observation_keys: Vec<String>,
    data: Vec<f64>,
}

impl ScoreCube {
    pub fn new(
        factor_names: Vec<String>,
        question_ids: Vec<String>,
        observation_keys: Vec<String>,
    ) -> ScoreCube {
        let len = factor_names.len() * question_ids.len() * observation_keys.len();
        ScoreCube {
            factor_names,
            question_ids,
            observation_keys,
            data: vec![f64::NAN; len],
        }
    }

    pub fn k(&self) -> usize {
        self.factor_names.len()
    }

    pub fn n(&self) -> usize {
        self.question_ids.len()
    }

    pub fn r(&self) -> usize {
        self.observation_keys.len()
    }

    #[inline]
    fn index(&self, factor: usize, question: usize, observation: usize) -> usize {
        (factor * self.n() + question) * self.r() + observation
    }

    pub fn get(&self, factor: usize, question: usize, observation: usize) -> f64 {
        self.data[self.index(factor, question, observation)]
    }

    pub fn set(&mut self, factor: usize, question: usize, observation: usize, value: f64) {
        let idx = self.index(factor, question, observation);
        self.data[idx] = value;
    }

    /// Observation series of one (factor, question) item.
    pub fn item_series(&self, factor: usize, question: usize) -> &[f64] {
        let start = self.index(factor, question, 0);
        &self.data[start..start + self.r()]
    }

    /// Build the cube from a sample matrix, averaging duplicate
    /// (question, observation) cells.
    pub fn from_sample(set: &JudgmentSet, sample: &SampleMatrix) -> Result<ScoreCube> {
        let k = set.k();
        let mut questions: Vec<String> = sample.question_ids.clone();
        questions.sort();
        questions.dedup();
        let mut observations: Vec<String> = sample
            .record_indices
            .iter()
            .map(|&idx| set.records[idx].observation_key())
            .collect();
        observations.sort();
        observations.dedup();
        if questions.len() < 2 {
            return Err(AuditError::InvalidInput(format!(
                "reliability needs at least 2 questions, got {}",
                questions.len()
            )));
        }
        if observations.len() < 3 {
            return Err(AuditError::InvalidInput(format!(
                "reliability needs at least 3 observation series, got {}",
                observations.len()
            )));
        }
        let q_index: BTreeMap<&str, usize> = questions
            .iter()
            .enumerate()
            .map(|(i, q)| (q.as_str(), i))
            .collect();
        let o_index: BTreeMap<&str, usize> = observations
            .iter()
            .enumerate()
            .map(|(i, o)| (o.as_str(), i))
            .collect();
        let mut cube = ScoreCube::new(set.criteria.clone(), questions.clone(), observations.clone());
        let mut counts = vec![0usize; cube.data.len()];
        let mut sums = vec![0.0f64; cube.data.len()];
        for (row, &rec_idx) in sample.record_indices.iter().enumerate() {
            let record = &set.records[rec_idx];
            let q = q_index[sample.question_ids[row].as_str()];
            let o = o_index[record.observation_key().as_str()];
            for f in 0..k {
                let idx = cube.index(f, q, o);
                sums[idx] += sample.factors[(row, f)];
                counts[idx] += 1;
            }
        }
        for (idx, count) in counts.iter().enumerate() {
            if *count > 0 {
                cube.data[idx] = sums[idx] / *count as f64;
            }
        }
        Ok(cube)
    }
}

/// Cronbach's alpha for one factor: items are question columns, variance is
/// taken across observation series that are complete for every item.
pub fn cronbach_alpha(cube: &ScoreCube, factor: usize) -> Result<f64> {
    let n = cube.n();
    let r = cube.r();
    if n < 2 {
        return Err(AuditError::InvalidInput(format!(
            "cronbach alpha needs at least 2 questions, got {n}"
        )));
    }
    let complete: Vec<usize> = (0..r)
        .filter(|&o| (0..n).all(|q| !cube.get(factor, q, o).is_nan()))
        .collect();
    if complete.len() < 3 {
        return Err(AuditError::Degenerate(format!(
            "factor {}: only {} complete observation series (need 3)",
            cube.factor_names[factor],
            complete.len()
        )));
    }
    let mut item_var_sum = 0.0;
    for q in 0..n {
        let series: Vec<f64> = complete.iter().map(|&o| cube.get(factor, q, o)).collect();
        item_var_sum += stats::sample_variance(&series);
    }
    let totals: Vec<f64> = complete
        .iter()
        .map(|&o| (0..n).map(|q| cube.get(factor, q, o)).sum::<f64>())
        .collect();
    let total_var = stats::sample_variance(&totals);
    if total_var <= 0.0 {
        return Err(AuditError::NoObservationVariance {
            factor: cube.factor_names[factor].clone(),
        });
    }
    let n_f = n as f64;
    Ok(n_f / (n_f - 1.0) * (1.0 - item_var_sum / total_var))
}

/// Loadings of observed factors on latent factors, varimax-rotated, with
/// latent columns matched to observed factors.
#[derive(Debug, Clone)]
pub struct LoadingsMatrix {
    /// k x k; column i is the latent factor matched to observed factor i.
    pub lambda: DMatrix<f64>,
    pub rotation: String,
    /// Observed factor i -> latent column index before reordering.
    pub assignment: Vec<usize>,
    /// Eigenvalues of the factor correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
    pub factor_names: Vec<String>,
}

fn pearson_complete(a: &[f64], b: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b.iter())
        .filter(|(x, y)| !x.is_nan() && !y.is_nan())
        .map(|(x, y)| (*x, *y))
        .collect();
    if pairs.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let rho = stats::pearson(&xs, &ys);
    rho.is_finite().then_some(rho)
}

/// Pooled factor-score correlation matrix: each factor flattened over the
/// question x observation grid.
fn pooled_correlation(cube: &ScoreCube) -> Result<DMatrix<f64>> {
    let k = cube.k();
    let cells = cube.n() * cube.r();
    let flat: Vec<Vec<f64>> = (0..k)
        .map(|f| {
            (0..cube.n())
                .flat_map(|q| cube.item_series(f, q).iter().copied())
                .collect()
        })
        .collect();
    debug_assert!(flat.iter().all(|v| v.len() == cells));
    let mut corr = DMatrix::identity(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let rho = pearson_complete(&flat[i], &flat[j]).ok_or_else(|| {
                AuditError::Degenerate(format!(
                    "correlation between factors {} and {} is undefined",
                    cube.factor_names[i], cube.factor_names[j]
                ))
            })?;
            corr[(i, j)] = rho;
            corr[(j, i)] = rho;
        }
    }
    Ok(corr)
}

/// Kaiser's varimax rotation via iterative pairwise column rotations.
fn varimax(loadings: &mut DMatrix<f64>) {
    let p = loadings.nrows() as f64;
    let k = loadings.ncols();
    if k < 2 {
        return;
    }
    for _sweep in 0..100 {
        let mut total_rotation = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
                for row in 0..loadings.nrows() {
                    let x = loadings[(row, i)];
                    let y = loadings[(row, j)];
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    a += u;
                    b += v;
                    c += u * u - v * v;
                    d += 2.0 * u * v;
                }
                let num = d - 2.0 * a * b / p;
                let den = c - (a * a - b * b) / p;
                if num == 0.0 && den == 0.0 {
                    continue;
                }
                let theta = 0.25 * num.atan2(den);
                if theta.abs() < 1e-12 {
                    continue;
                }
                total_rotation += theta.abs();
                let (sin, cos) = theta.sin_cos();
                for row in 0..loadings.nrows() {
                    let x = loadings[(row, i)];
                    let y = loadings[(row, j)];
                    loadings[(row, i)] = cos * x + sin * y;
                    loadings[(row, j)] = cos * y - sin * x;
                }
            }
        }
        if total_rotation < 1e-10 {
            break;
        }
    }
}

/// Max-|loading| assignment of latent columns to observed factors, solved
/// exactly by subset DP (the bipartite matching optimum).
fn best_assignment(lambda: &DMatrix<f64>) -> Vec<usize> {
    let k = lambda.nrows();
    let full = 1usize << k;
    let mut dp = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    dp[0] = 0.0;
    for mask in 0..full {
        if dp[mask] == f64::NEG_INFINITY {
            continue;
        }
        let row = (mask as u32).count_ones() as usize;
        if row == k {
            continue;
        }
        for col in 0..k {
            if mask & (1 << col) != 0 {
                continue;
            }
            let next = mask | (1 << col);
            let score = dp[mask] + lambda[(row, col)].abs();
            if score > dp[next] {
                dp[next] = score;
                choice[next] = col;
            }
        }
    }
    let mut mask = full - 1;
    let mut assignment = vec![0usize; k];
    for row in (0..k).rev() {
        let col = choice[mask];
        assignment[row] = col;
        mask &= !(1 << col);
    }
    assignment
}

fn loadings_from_correlation(corr: &DMatrix<f64>, factor_names: Vec<String>) -> Result<LoadingsMatrix> {
    let k = corr.nrows();
    let (eigenvalues, eigenvectors) = stats::eigendecompose_symmetric(corr)?;
    let mut lambda = DMatrix::zeros(k, k);
    for c in 0..k {
        let scale = eigenvalues[c].max(0.0).sqrt();
        for r in 0..k {
            lambda[(r, c)] = eigenvectors[(r, c)] * scale;
        }
    }
    varimax(&mut lambda);
    let assignment = best_assignment(&lambda);
    let mut reordered = DMatrix::zeros(k, k);
    for (observed, &latent) in assignment.iter().enumerate() {
        let mut col = lambda.column(latent).clone_owned();
        if col[observed] < 0.0 {
            col.neg_mut();
        }
        reordered.set_column(observed, &col);
    }
    Ok(LoadingsMatrix {
        lambda: reordered,
        rotation: "varimax".to_string(),
        assignment,
        eigenvalues: eigenvalues.iter().copied().collect(),
        factor_names,
    })
}

/// Principal-component extraction on the pooled factor correlation matrix,
/// varimax rotation, and latent-to-observed matching.
pub fn extract_loadings(cube: &ScoreCube) -> Result<LoadingsMatrix> {
    let corr = pooled_correlation(cube)?;
    loadings_from_correlation(&corr, cube.factor_names.clone())
}

/// Own-factor loading over the largest cross-loading. Returns infinity when
/// every cross-loading vanishes; the sigmoid step maps that to 1.
pub fn cross_loading_ratio(loadings: &LoadingsMatrix, factor: usize) -> f64 {
    let k = loadings.lambda.nrows();
    let own = loadings.lambda[(factor, factor)];
    let max_cross = (0..k)
        .filter(|&j| j != factor)
        .map(|j| loadings.lambda[(factor, j)].abs())
        .fold(0.0f64, f64::max);
    if max_cross < 1e-12 {
        f64::INFINITY
    } else {
        own / max_cross
    }
}

/// Sigmoid normalization centered at the CLR = 1.5 threshold.
pub fn sigmoid_normalize_clr(clr: f64) -> f64 {
    if clr.is_infinite() && clr > 0.0 {
        return 1.0;
    }
    1.0 / (1.0 + (-2.0 * (clr - CLR_THRESHOLD)).exp())
}

fn mean_item_correlation(
    cube: &ScoreCube,
    factor_a: usize,
    factor_b: usize,
) -> Result<f64> {
    let n = cube.n();
    let mut total = 0.0;
    let mut count = 0usize;
    for qa in 0..n {
        for qb in 0..n {
            if qa == qb {
                continue;
            }
            if let Some(rho) =
                pearson_complete(cube.item_series(factor_a, qa), cube.item_series(factor_b, qb))
            {
                total += rho;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(AuditError::Degenerate(format!(
            "no defined item correlations between factors {} and {}",
            cube.factor_names[factor_a], cube.factor_names[factor_b]
        )));
    }
    Ok(total / count as f64)
}

/// Heterotrait-monotrait ratio between two factors: mean different-question
/// item correlation across factors over the geometric mean of the
/// within-factor means.
pub fn htmt(cube: &ScoreCube, i: usize, j: usize) -> Result<f64> {
    if cube.n() < 2 {
        return Err(AuditError::InvalidInput(format!(
            "HTMT needs at least 2 question items, got {}",
            cube.n()
        )));
    }
    let within_i = mean_item_correlation(cube, i, i)?;
    if within_i <= 0.0 {
        return Err(AuditError::UnreliableTrait {
            factor: cube.factor_names[i].clone(),
            value: within_i,
        });
    }
    let within_j = mean_item_correlation(cube, j, j)?;
    if within_j <= 0.0 {
        return Err(AuditError::UnreliableTrait {
            factor: cube.factor_names[j].clone(),
            value: within_j,
        });
    }
    let cross = mean_item_correlation(cube, i, j)?;
    Ok(cross / (within_i * within_j).sqrt())
}

/// The unified psychometric report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsychometricReport {
    pub factor_names: Vec<String>,
    pub alpha: Vec<f64>,
    /// Raw cross-loading ratios; an infinite sentinel serializes as null.
    pub clr_raw: Vec<f64>,
    pub clr_norm: Vec<f64>,
    pub htmt: Vec<Vec<f64>>,
    /// (mean alpha + mean normalized CLR + (1 - mean off-diagonal HTMT)) / 3.
    pub unified: f64,
    /// sqrt(max(0, 1 - unified)) * score_range.
    pub sensitivity: f64,
    pub score_range: f64,
}

/// Compute every component and the unified score. Component errors
/// propagate with the factor identified.
pub fn psychometric_validity(cube: &ScoreCube, score_range: f64) -> Result<PsychometricReport> {
    let k = cube.k();
    if k < 2 {
        return Err(AuditError::InvalidInput(format!(
            "psychometric validity needs at least 2 factors, got {k}"
        )));
    }
    let alpha: Vec<f64> = exec::map_indexed(k, |f| cronbach_alpha(cube, f))
        .into_iter()
        .collect::<Result<_>>()?;
    let loadings = extract_loadings(cube)?;
    let clr_raw: Vec<f64> = (0..k).map(|f| cross_loading_ratio(&loadings, f)).collect();
    let clr_norm: Vec<f64> = clr_raw.iter().map(|&c| sigmoid_normalize_clr(c)).collect();

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
        .collect();
    let pair_values: Vec<f64> = exec::map_slice(&pairs, |&(i, j)| htmt(cube, i, j))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut htmt_matrix = vec![vec![1.0; k]; k];
    for (&(i, j), &value) in pairs.iter().zip(pair_values.iter()) {
        htmt_matrix[i][j] = value;
        htmt_matrix[j][i] = value;
    }
    let htmt_mean = pair_values.iter().sum::<f64>() / pairs.len() as f64;
    let alpha_mean = alpha.iter().sum::<f64>() / k as f64;
    let clr_mean = clr_norm.iter().sum::<f64>() / k as f64;
    let unified = (alpha_mean + clr_mean + (1.0 - htmt_mean)) / 3.0;
    Ok(PsychometricReport {
        factor_names: cube.factor_names.clone(),
        alpha,
        clr_raw,
        clr_norm,
        htmt: htmt_matrix,
        unified,
        sensitivity: (1.0 - unified).max(0.0).sqrt() * score_range,
        score_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cube_from_items(factors: Vec<Vec<Vec<f64>>>) -> ScoreCube {
        // factors[f][q] = observation series
        let k = factors.len();
        let n = factors[0].len();
        let r = factors[0][0].len();
        let mut cube = ScoreCube::new(
            (0..k).map(|f| format!("factor_{}", f + 1)).collect(),
            (0..n).map(|q| format!("q{q}")).collect(),
            (0..r).map(|o| format!("obs{o}")).collect(),
        );
        for (f, questions) in factors.iter().enumerate() {
            for (q, series) in questions.iter().enumerate() {
                for (o, value) in series.iter().enumerate() {
                    cube.set(f, q, o, *value);
                }
            }
        }
        cube
    }

    #[test]
    fn alpha_is_one_for_identical_items() {
        let series = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let cube = cube_from_items(vec![vec![series.clone(), series.clone(), series.clone()]]);
        let alpha = cronbach_alpha(&cube, 0).unwrap();
        assert!((alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_matches_hand_oracle() {
        // Spreadsheet-style recomputation of the same table, frozen:
        // item variances 5/3, 2, 19/12; total variance 14.25
        // alpha = 3/2 * (1 - 5.25/14.25) = 18/19
        let cube = cube_from_items(vec![vec![
            vec![1.0, 2.0, 3.0, 4.0],
            vec![2.0, 2.0, 3.0, 5.0],
            vec![1.0, 3.0, 3.0, 4.0],
        ]]);
        let alpha = cronbach_alpha(&cube, 0).unwrap();
        assert!((alpha - 0.947_368_421_052_631_5).abs() < 1e-12);
        assert!((alpha - 18.0 / 19.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_near_zero_for_independent_items() {
        let mut rng = stats::derived_rng(31, 0);
        let r = 5000;
        let items: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..r).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let cube = cube_from_items(vec![items]);
        let alpha = cronbach_alpha(&cube, 0).unwrap();
        assert!(alpha.abs() < 0.05, "alpha = {alpha}");
    }

    #[test]
    fn alpha_zero_total_variance_is_an_error() {
        let cube = cube_from_items(vec![vec![
            vec![3.0, 3.0, 3.0, 3.0],
            vec![3.0, 3.0, 3.0, 3.0],
        ]]);
        assert!(matches!(
            cronbach_alpha(&cube, 0),
            Err(AuditError::NoObservationVariance { .. })
        ));
    }

    #[test]
    fn identity_correlation_gives_axis_aligned_loadings() {
        let corr = DMatrix::identity(3, 3);
        let loadings =
            loadings_from_correlation(&corr, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        for i in 0..3 {
            assert!((loadings.lambda[(i, i)].abs() - 1.0).abs() < 1e-9);
            let clr = cross_loading_ratio(&loadings, i);
            assert!(clr.is_infinite());
            assert_eq!(sigmoid_normalize_clr(clr), 1.0);
        }
    }

    #[test]
    fn equicorrelation_eigenvalues_match_closed_form() {
        let k = 5;
        let rho = 0.95;
        let mut corr = DMatrix::from_element(k, k, rho);
        for i in 0..k {
            corr[(i, i)] = 1.0;
        }
        let names = (0..k).map(|i| format!("f{i}")).collect();
        let loadings = loadings_from_correlation(&corr, names).unwrap();
        assert!((loadings.eigenvalues[0] - (1.0 + (k as f64 - 1.0) * rho)).abs() < 1e-9);
        for e in &loadings.eigenvalues[1..] {
            assert!((e - (1.0 - rho)).abs() < 1e-9);
        }
        // collapse: varimax spreads the single latent into symmetric columns
        // with primary 0.617 over cross 0.394, so CLR sits at ~1.568 for
        // every factor, far below the axis-aligned regime's sentinel.
        let first = cross_loading_ratio(&loadings, 0);
        for i in 0..k {
            let clr = cross_loading_ratio(&loadings, i);
            assert!(clr.is_finite());
            assert!((clr - first).abs() < 1e-9, "factor {i}: clr = {clr}");
            assert!((1.3..1.7).contains(&clr), "factor {i}: clr = {clr}");
        }
    }

    #[test]
    fn communalities_do_not_exceed_one() {
        let mut corr = DMatrix::identity(4, 4);
        for i in 0..4 {
            for j in (i + 1)..4 {
                let rho = 0.3 + 0.1 * (i + j) as f64 / 4.0;
                corr[(i, j)] = rho;
                corr[(j, i)] = rho;
            }
        }
        let names = (0..4).map(|i| format!("f{i}")).collect();
        let loadings = loadings_from_correlation(&corr, names).unwrap();
        for i in 0..4 {
            let communality: f64 = (0..4).map(|j| loadings.lambda[(i, j)].powi(2)).sum();
            assert!((communality - 1.0).abs() < 1e-9, "row {i}: {communality}");
        }
    }

    #[test]
    fn clr_hand_value() {
        let lambda = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.4, 0.6]);
        let loadings = LoadingsMatrix {
            lambda,
            rotation: "none".into(),
            assignment: vec![0, 1],
            eigenvalues: vec![1.0, 1.0],
            factor_names: vec!["a".into(), "b".into()],
        };
        assert!((cross_loading_ratio(&loadings, 0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_endpoint_values() {
        assert_eq!(sigmoid_normalize_clr(1.5), 0.5);
        assert!((sigmoid_normalize_clr(0.0) - 0.047_425_873_177_566_78).abs() < 1e-12);
        assert!((sigmoid_normalize_clr(2.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(sigmoid_normalize_clr(f64::INFINITY), 1.0);
        // strictly increasing
        let mut prev = sigmoid_normalize_clr(0.0);
        for step in 1..50 {
            let next = sigmoid_normalize_clr(step as f64 * 0.1);
            assert!(next > prev);
            prev = next;
        }
    }

    #[test]
    fn htmt_exact_copy_is_one() {
        let q1 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 1.0];
        let q2 = vec![2.0, 2.0, 3.0, 5.0, 4.0, 1.0];
        let factor = vec![q1, q2];
        let cube = cube_from_items(vec![factor.clone(), factor]);
        let value = htmt(&cube, 0, 1).unwrap();
        assert!((value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn htmt_matches_hand_oracle() {
        let cube = cube_from_items(vec![
            vec![
                vec![1.0, 2.0, 3.0, 4.0, 5.0, 1.0],
                vec![2.0, 2.0, 3.0, 5.0, 4.0, 1.0],
            ],
            vec![
                vec![1.0, 3.0, 2.0, 5.0, 4.0, 2.0],
                vec![2.0, 3.0, 3.0, 4.0, 5.0, 1.0],
            ],
        ]);
        let value = htmt(&cube, 0, 1).unwrap();
        assert!((value - 1.070_315_296_276_678_2).abs() < 1e-12, "htmt = {value}");
    }

    #[test]
    fn htmt_independent_factors_is_small() {
        let mut rng = stats::derived_rng(33, 0);
        let r = 5000;
        let mut factors = Vec::new();
        for _ in 0..2 {
            let latent: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let items: Vec<Vec<f64>> = (0..2)
                .map(|_| {
                    latent
                        .iter()
                        .map(|l| l + 0.3 * rng.gen_range(-1.0..1.0))
                        .collect()
                })
                .collect();
            factors.push(items);
        }
        let cube = cube_from_items(factors);
        let value = htmt(&cube, 0, 1).unwrap();
        assert!(value.abs() < 0.05, "htmt = {value}");
    }

    #[test]
    fn htmt_unreliable_trait_is_an_error() {
        // items of factor 0 anticorrelate
        let cube = cube_from_items(vec![
            vec![
                vec![1.0, 2.0, 3.0, 4.0],
                vec![4.0, 3.0, 2.0, 1.0],
            ],
            vec![
                vec![1.0, 2.0, 3.0, 4.0],
                vec![1.0, 2.0, 3.0, 5.0],
            ],
        ]);
        match htmt(&cube, 0, 1) {
            Err(AuditError::UnreliableTrait { factor, .. }) => {
                assert_eq!(factor, "factor_1");
            }
            other => panic!("expected UnreliableTrait, got {other:?}"),
        }
    }

    fn separable_cube() -> ScoreCube {
        // alpha = 1 (identical items), cross-factor correlation exactly 0
        let f1 = vec![vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]];
        let f2 = vec![vec![3.0, 1.0, 4.0, 2.0], vec![3.0, 1.0, 4.0, 2.0]];
        cube_from_items(vec![f1, f2])
    }

    #[test]
    fn perfectly_separable_data_scores_one() {
        let report = psychometric_validity(&separable_cube(), 4.0).unwrap();
        assert!((report.alpha[0] - 1.0).abs() < 1e-12);
        assert!((report.alpha[1] - 1.0).abs() < 1e-12);
        assert_eq!(report.clr_norm, vec![1.0, 1.0]);
        assert!(report.htmt[0][1].abs() < 1e-12);
        assert!((report.unified - 1.0).abs() < 1e-12);
        assert!(report.sensitivity.abs() < 1e-6);
    }

    #[test]
    fn full_collapse_lowers_unified() {
        // every factor identical: alpha = 1, HTMT = 1, heavy cross-loading
        let item1 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 2.0];
        let item2 = vec![2.0, 2.0, 3.0, 5.0, 4.0, 1.0];
        let factor = vec![item1, item2];
        let cube = cube_from_items(vec![factor.clone(), factor.clone(), factor]);
        let report = psychometric_validity(&cube, 4.0).unwrap();
        for a in &report.alpha {
            assert!((a - report.alpha[0]).abs() < 1e-12);
        }
        assert!((report.htmt[0][1] - 1.0).abs() < 1e-12);
        // unified = (alpha_mean + clr_mean + 0) / 3 with HTMT mean 1
        let expected = (report.alpha.iter().sum::<f64>() / 3.0
            + report.clr_norm.iter().sum::<f64>() / 3.0)
            / 3.0;
        assert!((report.unified - expected).abs() < 1e-12);
        let separable = psychometric_validity(&separable_cube(), 4.0).unwrap();
        assert!(report.unified < separable.unified - 0.2);
        assert!(report.sensitivity > separable.sensitivity);
    }

    #[test]
    fn factor_relabeling_preserves_unified_score() {
        let f1 = vec![vec![1.0, 2.0, 3.0, 4.0, 2.0], vec![1.0, 3.0, 3.0, 4.0, 2.0]];
        let f2 = vec![vec![3.0, 1.0, 4.0, 2.0, 5.0], vec![3.0, 2.0, 4.0, 2.0, 5.0]];
        let f3 = vec![vec![2.0, 4.0, 1.0, 3.0, 3.0], vec![2.0, 4.0, 2.0, 3.0, 4.0]];
        let cube = cube_from_items(vec![f1.clone(), f2.clone(), f3.clone()]);
        let permuted = cube_from_items(vec![f3, f1, f2]);
        let a = psychometric_validity(&cube, 4.0).unwrap();
        let b = psychometric_validity(&permuted, 4.0).unwrap();
        assert!((a.unified - b.unified).abs() < 1e-9);
        assert!((a.sensitivity - b.sensitivity).abs() < 1e-9);
    }

    #[test]
    fn duplicate_factor_weakly_decreases_unified() {
        let f1 = vec![vec![1.0, 2.0, 3.0, 4.0, 2.0], vec![1.0, 3.0, 3.0, 4.0, 2.0]];
        let f2 = vec![vec![3.0, 1.0, 4.0, 2.0, 5.0], vec![3.0, 2.0, 4.0, 2.0, 5.0]];
        let base = psychometric_validity(&cube_from_items(vec![f1.clone(), f2.clone()]), 4.0)
            .unwrap();
        let with_dup =
            psychometric_validity(&cube_from_items(vec![f1.clone(), f2, f1]), 4.0).unwrap();
        assert!((with_dup.htmt[0][2] - 1.0).abs() < 1e-12);
        assert!(with_dup.unified <= base.unified + 1e-9);
    }

    #[test]
    fn htmt_matrix_is_symmetric_with_unit_diagonal() {
        let f1 = vec![vec![1.0, 2.0, 3.0, 4.0, 2.0], vec![1.0, 3.0, 3.0, 4.0, 2.0]];
        let f2 = vec![vec![3.0, 1.0, 4.0, 2.0, 5.0], vec![3.0, 2.0, 4.0, 2.0, 5.0]];
        let cube = cube_from_items(vec![f1, f2]);
        let report = psychometric_validity(&cube, 4.0).unwrap();
        assert_eq!(report.htmt[0][1], report.htmt[1][0]);
        // htmt(i, i) computed by the same formula equals 1
        assert!((htmt(&cube, 0, 0).unwrap() - 1.0).abs() < 1e-9);
    }
}
