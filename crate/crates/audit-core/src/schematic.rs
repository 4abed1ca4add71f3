//! Schematic adherence: how much of a judge's overall verdict is explained
//! by its own per-criterion scores.
//!
//! The linear model regresses the overall score on the k factor scores;
//! the polynomial model adds squares and pairwise interactions. The
//! adherence score is the better R^2 of the two, and the sensitivity
//! sqrt(1 - R^2) reads the unexplained share on the judgment scale.
//! Integration-bias metrics (weight disparity, weight entropy) and
//! context stability over question clusters describe how the factor
//! weights are distributed and how stable they are across contexts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::exec;
use crate::judgment::SampleMatrix;
use crate::stats::{self, OlsFit};

/// One term of the polynomial design with its fitted coefficient.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolyTerm {
    pub term: String,
    pub coefficient: f64,
}

/// Report of the variance decomposition and integration-bias metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchematicReport {
    pub criteria: Vec<String>,
    pub r2_linear: f64,
    pub r2_polynomial: f64,
    pub r2_schematic: f64,
    /// sqrt(1 - r2_schematic), in [0, 1].
    pub sensitivity: f64,
    /// 100 * (1 - r2_schematic).
    pub unexplained_percent: f64,
    /// Intercept followed by the k factor weights.
    pub linear_weights: Vec<f64>,
    pub polynomial_terms: Vec<PolyTerm>,
    pub weight_disparity: f64,
    pub weight_entropy: f64,
    pub context_stability: Option<f64>,
    /// Cluster id -> full coefficient vector (intercept first).
    pub cluster_weights: BTreeMap<String, Vec<f64>>,
}

/// Knobs for [`schematic_adherence`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchematicOptions {
    /// Degree of the non-linear model. Degree 2 is the full quadratic
    /// design; higher degrees add pure powers only.
    pub polynomial_degree: usize,
    /// Treat the context-stability denominator as counting ordered pairs
    /// (doubles the i<j sum) instead of applying the formula literally.
    pub cs_ordered_pairs: bool,
}

impl Default for SchematicOptions {
    fn default() -> Self {
        SchematicOptions {
            polynomial_degree: 2,
            cs_ordered_pairs: false,
        }
    }
}

fn factor_names(k: usize, criteria: Option<&[String]>) -> Vec<String> {
    match criteria {
        Some(names) if names.len() == k => names.to_vec(),
        _ => (1..=k).map(|j| format!("f{j}")).collect(),
    }
}

/// Fit the linear schematic model: overall on the k factor scores.
pub fn fit_linear_schema(sample: &SampleMatrix) -> Result<OlsFit> {
    let names: Vec<String> = std::iter::once("intercept".to_string())
        .chain((1..=sample.k()).map(|j| format!("f{j}")))
        .collect();
    stats::ols_named(&sample.factors, &sample.overall, names)
}

/// Build the polynomial design: linear terms, squares (and pure powers up
/// to `degree`), and pairwise interactions.
pub fn polynomial_design(
    factors: &DMatrix<f64>,
    degree: usize,
    names: &[String],
) -> (DMatrix<f64>, Vec<String>) {
    let m = factors.nrows();
    let k = factors.ncols();
    let mut columns: Vec<DVector<f64>> = Vec::new();
    let mut terms: Vec<String> = vec!["intercept".to_string()];
    for (j, name) in names.iter().enumerate().take(k) {
        columns.push(factors.column(j).clone_owned());
        terms.push(name.clone());
    }
    for power in 2..=degree.max(2) {
        for j in 0..k {
            columns.push(DVector::from_fn(m, |i, _| factors[(i, j)].powi(power as i32)));
            terms.push(format!("{}^{power}", names[j]));
        }
    }
    for j in 0..k {
        for l in (j + 1)..k {
            columns.push(DVector::from_fn(m, |i, _| factors[(i, j)] * factors[(i, l)]));
            terms.push(format!("{}*{}", names[j], names[l]));
        }
    }
    let design = DMatrix::from_fn(m, columns.len(), |i, c| columns[c][i]);
    (design, terms)
}

/// Fit the second-order schematic model (intercept, k linear, k squared,
/// k(k-1)/2 interaction terms for the default degree 2).
pub fn fit_polynomial_schema(sample: &SampleMatrix, degree: usize) -> Result<OlsFit> {
    let k = sample.k();
    let names = factor_names(k, None);
    let (design, terms) = polynomial_design(&sample.factors, degree, &names);
    let term_count = design.ncols() + 1; // intercept included
    if sample.m() <= term_count {
        return Err(AuditError::InvalidInput(format!(
            "polynomial fit needs more than {term_count} rows, got {}",
            sample.m()
        )));
    }
    stats::ols_min_norm(&design, &sample.overall, terms)
}

/// Population coefficient of variation of the absolute weights.
pub fn weight_disparity(weights: &[f64]) -> Result<f64> {
    let abs: Vec<f64> = weights.iter().map(|w| w.abs()).collect();
    let mu = stats::mean(&abs);
    if mu <= 0.0 {
        return Err(AuditError::NoFactorSignal);
    }
    Ok(stats::population_variance(&abs).sqrt() / mu)
}

/// Shannon entropy (natural log) of the normalized absolute weights.
pub fn weight_entropy(weights: &[f64]) -> Result<f64> {
    let abs: Vec<f64> = weights.iter().map(|w| w.abs()).collect();
    let total: f64 = abs.iter().sum();
    if total <= 0.0 {
        return Err(AuditError::NoFactorSignal);
    }
    let mut entropy = 0.0;
    for a in &abs {
        let p = a / total;
        if p > 0.0 {
            entropy -= p * p.ln();
        }
    }
    Ok(entropy)
}

/// Question clusters over per-question mean factor vectors.
#[derive(Debug, Clone)]
pub struct QuestionClusters {
    pub assignments: BTreeMap<String, usize>,
    pub c: usize,
    /// c x k centroid matrix.
    pub centroids: DMatrix<f64>,
}

fn question_means(sample: &SampleMatrix) -> (Vec<String>, DMatrix<f64>) {
    let k = sample.k();
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for i in 0..sample.m() {
        let entry = sums
            .entry(sample.question_ids[i].clone())
            .or_insert_with(|| (vec![0.0; k], 0));
        for j in 0..k {
            entry.0[j] += sample.factors[(i, j)];
        }
        entry.1 += 1;
    }
    let ids: Vec<String> = sums.keys().cloned().collect();
    let means = DMatrix::from_fn(ids.len(), k, |i, j| {
        let (sum, count) = &sums[&ids[i]];
        sum[j] / *count as f64
    });
    (ids, means)
}

fn squared_distance(a: &DMatrix<f64>, row_a: usize, b: &DMatrix<f64>, row_b: usize) -> f64 {
    let mut d = 0.0;
    for j in 0..a.ncols() {
        let diff = a[(row_a, j)] - b[(row_b, j)];
        d += diff * diff;
    }
    d
}

fn kmeans(points: &DMatrix<f64>, c: usize, rng: &mut rand_chacha::ChaCha8Rng) -> (Vec<usize>, DMatrix<f64>) {
    let n = points.nrows();
    let k = points.ncols();

    // k-means++ seeding
    let mut centroid_rows: Vec<usize> = vec![rng.gen_range(0..n)];
    while centroid_rows.len() < c {
        let dists: Vec<f64> = (0..n)
            .map(|i| {
                centroid_rows
                    .iter()
                    .map(|&cr| squared_distance(points, i, points, cr))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = dists.iter().sum();
        if total <= 0.0 {
            // all remaining points coincide with a centroid; pick round-robin
            let next = (0..n).find(|i| !centroid_rows.contains(i)).unwrap_or(0);
            centroid_rows.push(next);
            continue;
        }
        let mut draw = rng.gen_range(0.0..total);
        let mut chosen = n - 1;
        for (i, d) in dists.iter().enumerate() {
            if draw < *d {
                chosen = i;
                break;
            }
            draw -= d;
        }
        centroid_rows.push(chosen);
    }
    let mut centroids = DMatrix::from_fn(c, k, |i, j| points[(centroid_rows[i], j)]);

    let mut assignments = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, assigned) in assignments.iter_mut().enumerate() {
            let best = (0..c)
                .min_by(|&a, &b| {
                    squared_distance(points, i, &centroids, a)
                        .partial_cmp(&squared_distance(points, i, &centroids, b))
                        .expect("finite distances")
                })
                .expect("c >= 1");
            if *assigned != best {
                *assigned = best;
                changed = true;
            }
        }
        // recompute centroids; repopulate an empty cluster with the point
        // farthest from its assigned centroid
        let mut counts = vec![0usize; c];
        let mut next = DMatrix::zeros(c, k);
        for i in 0..n {
            counts[assignments[i]] += 1;
            for j in 0..k {
                next[(assignments[i], j)] += points[(i, j)];
            }
        }
        for cluster in 0..c {
            if counts[cluster] == 0 {
                let farthest = (0..n)
                    .max_by(|&a, &b| {
                        squared_distance(points, a, &centroids, assignments[a])
                            .partial_cmp(&squared_distance(points, b, &centroids, assignments[b]))
                            .expect("finite distances")
                    })
                    .expect("n >= 1");
                assignments[farthest] = cluster;
                counts[cluster] = 1;
                changed = true;
                for j in 0..k {
                    next[(cluster, j)] = points[(farthest, j)];
                }
            }
        }
        for cluster in 0..c {
            for j in 0..k {
                next[(cluster, j)] /= counts[cluster] as f64;
            }
        }
        centroids = next;
        if !changed {
            break;
        }
    }
    (assignments, centroids)
}

fn silhouette(points: &DMatrix<f64>, assignments: &[usize], c: usize) -> f64 {
    let n = points.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let mut mean_dist = vec![0.0f64; c];
        let mut counts = vec![0usize; c];
        for j in 0..n {
            if i == j {
                continue;
            }
            mean_dist[assignments[j]] += squared_distance(points, i, points, j).sqrt();
            counts[assignments[j]] += 1;
        }
        let own = assignments[i];
        if counts[own] == 0 {
            continue; // singleton cluster contributes 0
        }
        let a = mean_dist[own] / counts[own] as f64;
        let b = (0..c)
            .filter(|&cl| cl != own && counts[cl] > 0)
            .map(|cl| mean_dist[cl] / counts[cl] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}

/// k-means over per-question mean factor vectors. When `c` is absent, the
/// count is chosen by maximum silhouette over 2..=min(8, questions/10),
/// falling back to 2 when that range is empty.
pub fn cluster_questions(
    sample: &SampleMatrix,
    c: Option<usize>,
    seed: u64,
) -> Result<QuestionClusters> {
    let (ids, means) = question_means(sample);
    let q = ids.len();
    if q < 2 {
        return Err(AuditError::InvalidInput(format!(
            "clustering needs at least 2 distinct questions, got {q}"
        )));
    }
    let candidates: Vec<usize> = match c {
        Some(c) => {
            if c < 2 || c > q {
                return Err(AuditError::InvalidInput(format!(
                    "cluster count must satisfy 2 <= c <= {q}, got {c}"
                )));
            }
            vec![c]
        }
        None => {
            let upper = (q / 10).min(8);
            if upper < 2 {
                vec![2]
            } else {
                (2..=upper).collect()
            }
        }
    };
    let mut best: Option<(f64, usize, Vec<usize>, DMatrix<f64>)> = None;
    for cand in candidates {
        let mut rng = stats::derived_rng(seed, cand as u64);
        let (assignments, centroids) = kmeans(&means, cand, &mut rng);
        let score = if cand == 1 { 0.0 } else { silhouette(&means, &assignments, cand) };
        let better = match &best {
            None => true,
            Some((best_score, ..)) => score > *best_score + 1e-12,
        };
        if better {
            best = Some((score, cand, assignments, centroids));
        }
    }
    let (_, c, assignments, centroids) = best.expect("at least one candidate");
    Ok(QuestionClusters {
        assignments: ids.into_iter().zip(assignments).collect(),
        c,
        centroids,
    })
}

/// Context stability from per-cluster weight vectors (pure formula):
/// `1 - factor * sum_{i<j} ||b_i - b_j||_2` with `factor = 1/(c(c-1))`
/// literally, or `2/(c(c-1))` when `ordered_pairs` is set.
pub fn cs_from_weights(weights: &[Vec<f64>], ordered_pairs: bool) -> f64 {
    let c = weights.len();
    let mut sum = 0.0;
    for i in 0..c {
        for j in (i + 1)..c {
            let dist: f64 = weights[i]
                .iter()
                .zip(weights[j].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            sum += dist;
        }
    }
    let denom = (c * (c - 1)) as f64;
    let factor = if ordered_pairs { 2.0 / denom } else { 1.0 / denom };
    1.0 - factor * sum
}

/// Per-cluster linear fits and the context-stability score. Clusters with
/// too few rows (<= k+1) are dropped; fewer than 2 usable clusters is an
/// error. CS is reported raw and can be negative for divergent weights.
pub fn context_stability(
    sample: &SampleMatrix,
    clusters: &QuestionClusters,
    ordered_pairs: bool,
) -> Result<(f64, BTreeMap<String, Vec<f64>>)> {
    let k = sample.k();
    let mut rows_by_cluster: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..sample.m() {
        if let Some(&cluster) = clusters.assignments.get(&sample.question_ids[i]) {
            rows_by_cluster.entry(cluster).or_default().push(i);
        }
    }
    let usable: Vec<(usize, Vec<usize>)> = rows_by_cluster
        .into_iter()
        .filter(|(_, rows)| rows.len() > k + 1)
        .collect();
    if usable.len() < 2 {
        return Err(AuditError::Degenerate(format!(
            "fewer than 2 usable clusters ({} of {} have more than {} rows)",
            usable.len(),
            clusters.c,
            k + 1
        )));
    }
    let fits: Vec<Result<Vec<f64>>> = exec::map_slice(&usable, |(_, rows)| {
        let design = DMatrix::from_fn(rows.len(), k, |i, j| sample.factors[(rows[i], j)]);
        let target = DVector::from_fn(rows.len(), |i, _| sample.overall[rows[i]]);
        stats::ols(&design, &target).map(|fit| fit.coefficients.iter().copied().collect())
    });
    let mut cluster_weights = BTreeMap::new();
    let mut vectors = Vec::new();
    for ((cluster, _), fit) in usable.iter().zip(fits) {
        let beta = fit?;
        vectors.push(beta.clone());
        cluster_weights.insert(format!("cluster_{cluster}"), beta);
    }
    Ok((cs_from_weights(&vectors, ordered_pairs), cluster_weights))
}

/// Assemble the full schematic report. Context stability is computed when
/// `clusters` is provided.
pub fn schematic_adherence(
    sample: &SampleMatrix,
    criteria: Option<&[String]>,
    clusters: Option<&QuestionClusters>,
    options: &SchematicOptions,
) -> Result<SchematicReport> {
    let linear = fit_linear_schema(sample)?;
    let poly = fit_polynomial_schema(sample, options.polynomial_degree)?;
    let r2_schematic = linear.r_squared.max(poly.r_squared);
    let weights = linear.weights();
    let (context, cluster_weights) = match clusters {
        Some(clusters) => {
            let (cs, w) = context_stability(sample, clusters, options.cs_ordered_pairs)?;
            (Some(cs), w)
        }
        None => (None, BTreeMap::new()),
    };
    Ok(SchematicReport {
        criteria: factor_names(sample.k(), criteria),
        r2_linear: linear.r_squared,
        r2_polynomial: poly.r_squared,
        r2_schematic,
        sensitivity: (1.0 - r2_schematic).max(0.0).sqrt(),
        unexplained_percent: 100.0 * (1.0 - r2_schematic),
        linear_weights: linear.coefficients.iter().copied().collect(),
        polynomial_terms: poly
            .design_columns
            .iter()
            .zip(poly.coefficients.iter())
            .map(|(term, &coefficient)| PolyTerm {
                term: term.clone(),
                coefficient,
            })
            .collect(),
        weight_disparity: weight_disparity(&weights)?,
        weight_entropy: weight_entropy(&weights)?,
        context_stability: context,
        cluster_weights,
    })
}
