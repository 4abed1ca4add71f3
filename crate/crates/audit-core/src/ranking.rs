//! Arena-style rating aggregation: weighted Bradley-Terry maximum
//! likelihood, win-rate conversion, bootstrap intervals, and the collapse
//! regression showing how aggregation drives overall-on-factor R^2 to near
//! unity regardless of upstream judgment noise.
//!
//! Decisive verdicts (Likert 1/5) enter as weight-3 wins, weak preferences
//! (2/4) as weight-1 wins, and ties expand to two half-weight opposite wins
//! unless dropped. Ratings use the natural-log parameterization: the win
//! probability is the logistic of the rating difference. A weak L2 term
//! (epsilon = 1e-6) caps the perfect-separation pathology; the reported
//! table carries the epsilon used.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::exec;
use crate::judgment::{verdict_to_likert, JudgmentRecord, JudgmentSet};
use crate::schematic::polynomial_design;
use crate::stats;

/// Display scale for ELO-style output: rating * 400/ln(10) + 1000.
pub const ELO_SCALE: f64 = 400.0 / std::f64::consts::LN_10;
pub const ELO_OFFSET: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    WinA,
    WinB,
    Tie,
}

/// One weighted pairwise outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Battle {
    pub model_a: String,
    pub model_b: String,
    pub outcome: Outcome,
    pub weight: f64,
}

/// Which verdict column feeds the battles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BattleTarget {
    Overall,
    /// Index into the set's criteria.
    Factor(usize),
}

/// Solver and tie-policy knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BtOptions {
    pub tolerance: f64,
    pub max_iter: usize,
    pub l2_epsilon: f64,
    /// Drop ties instead of expanding them into half-weight wins.
    pub drop_ties: bool,
}

impl Default for BtOptions {
    fn default() -> Self {
        BtOptions {
            tolerance: 1e-8,
            max_iter: 10_000,
            l2_epsilon: 1e-6,
            drop_ties: false,
        }
    }
}

/// Anchored ratings with win rates against the baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingTable {
    pub baseline: String,
    /// Model -> rating; the baseline is exactly 0.
    pub ratings: BTreeMap<String, f64>,
    /// Model -> logistic(rating).
    pub win_rates: BTreeMap<String, f64>,
    /// Model -> percentile rating interval (bootstrap only).
    pub ci: BTreeMap<String, (f64, f64)>,
    /// Bootstrap iterations behind `ci` (0 for a plain MLE fit).
    pub iterations: usize,
    pub l2_epsilon: f64,
}

impl RatingTable {
    pub fn models(&self) -> Vec<String> {
        self.ratings.keys().cloned().collect()
    }

    pub fn elo_display(&self, model: &str) -> Option<f64> {
        self.ratings.get(model).map(|r| r * ELO_SCALE + ELO_OFFSET)
    }
}

/// Convert judgments to weighted battles: 1/5 are decisive (weight 3),
/// 2/4 weak wins (weight 1), 3 a tie (weight 1). Flagged fields read as 3.
pub fn judgments_to_battles(set: &JudgmentSet, target: BattleTarget) -> Vec<Battle> {
    set.records
        .iter()
        .map(|record| record_battle(record, target))
        .collect()
}

fn record_battle(record: &JudgmentRecord, target: BattleTarget) -> Battle {
    let verdict = match target {
        BattleTarget::Overall => record.overall_verdict,
        BattleTarget::Factor(idx) => record.factor_verdicts[idx],
    };
    let likert = verdict.map(verdict_to_likert).unwrap_or(3.0);
    let (outcome, weight) = match likert as i64 {
        1 => (Outcome::WinA, 3.0),
        2 => (Outcome::WinA, 1.0),
        4 => (Outcome::WinB, 1.0),
        5 => (Outcome::WinB, 3.0),
        _ => (Outcome::Tie, 1.0),
    };
    Battle {
        model_a: record.model_a.clone(),
        model_b: record.model_b.clone(),
        outcome,
        weight,
    }
}

struct PairData {
    models: Vec<String>,
    /// wins[i][j]: total weight of i beating j.
    wins: DMatrix<f64>,
}

fn aggregate(battles: &[Battle], drop_ties: bool) -> Result<PairData> {
    let mut models: Vec<String> = Vec::new();
    for battle in battles {
        models.push(battle.model_a.clone());
        models.push(battle.model_b.clone());
    }
    models.sort();
    models.dedup();
    if models.len() < 2 {
        return Err(AuditError::InvalidInput(
            "need at least two models to rank".into(),
        ));
    }
    let index: BTreeMap<&str, usize> = models
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_str(), i))
        .collect();
    let n = models.len();
    let mut wins = DMatrix::zeros(n, n);
    for battle in battles {
        let a = index[battle.model_a.as_str()];
        let b = index[battle.model_b.as_str()];
        match battle.outcome {
            Outcome::WinA => wins[(a, b)] += battle.weight,
            Outcome::WinB => wins[(b, a)] += battle.weight,
            Outcome::Tie => {
                if !drop_ties {
                    wins[(a, b)] += battle.weight / 2.0;
                    wins[(b, a)] += battle.weight / 2.0;
                }
            }
        }
    }
    Ok(PairData { models, wins })
}

fn connected_components(data: &PairData) -> Vec<Vec<String>> {
    let n = data.models.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in 0..n {
            if data.wins[(i, j)] > 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(data.models[i].clone());
    }
    groups.into_values().collect()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weighted Bradley-Terry maximum likelihood ratings anchored at the
/// baseline. Damped diagonal-Newton fixed point on the L2-regularized
/// log-likelihood; converged when the largest rating change drops below
/// `tolerance`.
pub fn bt_mle(battles: &[Battle], baseline: &str, options: &BtOptions) -> Result<RatingTable> {
    let data = aggregate(battles, options.drop_ties)?;
    if !data.models.iter().any(|m| m == baseline) {
        return Err(AuditError::InvalidInput(format!(
            "baseline model {baseline:?} does not appear in any battle"
        )));
    }
    let components = connected_components(&data);
    if components.len() > 1 {
        return Err(AuditError::DisconnectedGraph {
            components,
        });
    }
    let theta = solve_bt(&data, options)?;
    let base_idx = data.models.iter().position(|m| m == baseline).expect("checked");
    let mut ratings = BTreeMap::new();
    let mut win_rates = BTreeMap::new();
    for (i, model) in data.models.iter().enumerate() {
        let rating = theta[i] - theta[base_idx];
        ratings.insert(model.clone(), rating);
        win_rates.insert(model.clone(), logistic(rating));
    }
    Ok(RatingTable {
        baseline: baseline.to_string(),
        ratings,
        win_rates,
        ci: BTreeMap::new(),
        iterations: 0,
        l2_epsilon: options.l2_epsilon,
    })
}

fn solve_bt(data: &PairData, options: &BtOptions) -> Result<Vec<f64>> {
    let n = data.models.len();
    let eps = options.l2_epsilon;
    let win_totals: Vec<f64> = (0..n).map(|i| data.wins.row(i).sum()).collect();
    let mut theta = vec![0.0f64; n];
    for iteration in 0..options.max_iter {
        let snapshot = theta.clone();
        for i in 0..n {
            let mut expected = 0.0;
            let mut curvature = eps;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let pair_weight = data.wins[(i, j)] + data.wins[(j, i)];
                if pair_weight == 0.0 {
                    continue;
                }
                let p = logistic(theta[i] - theta[j]);
                expected += pair_weight * p;
                curvature += pair_weight * p * (1.0 - p);
            }
            let gradient = win_totals[i] - expected - eps * theta[i];
            theta[i] += (gradient / curvature).clamp(-10.0, 10.0);
        }
        // The likelihood is translation invariant; only the L2 term pins the
        // mean, and sum(gradient) = -eps * sum(theta), so the optimum has
        // mean exactly 0. Recentering solves that flat mode outright instead
        // of letting it crawl at eps-scale curvature.
        let mean = theta.iter().sum::<f64>() / n as f64;
        for t in theta.iter_mut() {
            *t -= mean;
        }
        let max_change = theta
            .iter()
            .zip(snapshot.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if max_change < options.tolerance {
            return Ok(theta);
        }
        if iteration + 1 == options.max_iter {
            return Err(AuditError::NoConvergence {
                iterations: options.max_iter,
                residual: max_change,
            });
        }
    }
    unreachable!("loop returns or errors")
}

/// Largest score-equation residual: |weighted wins - expected wins| over
/// models, which vanishes at the (unregularized) MLE.
pub fn score_equation_residual(battles: &[Battle], table: &RatingTable, drop_ties: bool) -> f64 {
    let data = match aggregate(battles, drop_ties) {
        Ok(data) => data,
        Err(_) => return f64::NAN,
    };
    let n = data.models.len();
    let theta: Vec<f64> = data
        .models
        .iter()
        .map(|m| table.ratings.get(m).copied().unwrap_or(f64::NAN))
        .collect();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut expected = 0.0;
        let mut observed = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let pair_weight = data.wins[(i, j)] + data.wins[(j, i)];
            expected += pair_weight * logistic(theta[i] - theta[j]);
            observed += data.wins[(i, j)];
        }
        worst = worst.max((observed - expected).abs());
    }
    worst
}

/// Recompute win rates from anchored ratings (logistic of the difference
/// to the baseline). Sorting by rating and by win rate agree.
pub fn ratings_to_winrates(table: &RatingTable) -> RatingTable {
    let mut out = table.clone();
    let base = table.ratings.get(&table.baseline).copied().unwrap_or(0.0);
    out.win_rates = table
        .ratings
        .iter()
        .map(|(m, r)| (m.clone(), logistic(r - base)))
        .collect();
    out
}

/// Bootstrap ratings by resampling judgment records with replacement, so a
/// tie's two half-wins always travel together. Confidence intervals are
/// percentile 95% per model over the iteration ratings; iterations where
/// the fit fails (graph disconnection) are recorded as missing.
pub fn bootstrap_ratings(
    set: &JudgmentSet,
    baseline: &str,
    iterations: usize,
    seed: u64,
    options: &BtOptions,
) -> Result<RatingTable> {
    let battles = judgments_to_battles(set, BattleTarget::Overall);
    let mut table = bt_mle(&battles, baseline, options)?;
    if iterations == 0 {
        return Ok(table);
    }
    let draws: Vec<Option<BTreeMap<String, f64>>> = exec::map_indexed(iterations, |iter| {
        let mut rng = stats::derived_rng(seed, iter as u64 + 1);
        let indices = stats::resample_indices(&mut rng, battles.len());
        let resampled: Vec<Battle> = indices.iter().map(|&i| battles[i].clone()).collect();
        bt_mle(&resampled, baseline, options)
            .ok()
            .map(|t| t.ratings)
    });
    let failed = draws.iter().filter(|d| d.is_none()).count();
    if failed * 10 > iterations {
        return Err(AuditError::BootstrapFailures {
            failed,
            total: iterations,
        });
    }
    let mut ci = BTreeMap::new();
    for model in table.models() {
        let mut values: Vec<f64> = draws
            .iter()
            .flatten()
            .filter_map(|ratings| ratings.get(&model).copied())
            .collect();
        if values.is_empty() {
            continue;
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite ratings"));
        ci.insert(
            model,
            (
                stats::quantile_sorted(&values, 0.025),
                stats::quantile_sorted(&values, 0.975),
            ),
        );
    }
    table.ci = ci;
    table.iterations = iterations;
    Ok(table)
}

/// Rating tables per factor and overall, plus the regression of overall
/// ratings on factor ratings across models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollapseReport {
    pub per_factor_ratings: BTreeMap<String, RatingTable>,
    pub overall_ratings: RatingTable,
    pub r2_linear: f64,
    pub r2_polynomial: f64,
    pub unexplained_percent: f64,
}

/// Fit per-factor and overall rating tables over the same model set, then
/// regress overall ratings on the k factor ratings (one row per model).
/// The quadratic fit deliberately permits the underdetermined case: with
/// few models it interpolates exactly and R^2 pegs at 1, which is the
/// masking effect under study.
pub fn collapse_analysis(
    set: &JudgmentSet,
    baseline: &str,
    options: &BtOptions,
) -> Result<CollapseReport> {
    let k = set.k();
    let factor_tables: Vec<Result<RatingTable>> = exec::map_indexed(k, |f| {
        let battles = judgments_to_battles(set, BattleTarget::Factor(f));
        bt_mle(&battles, baseline, options)
    });
    let mut per_factor = BTreeMap::new();
    for (name, table) in set.criteria.iter().zip(factor_tables) {
        per_factor.insert(name.clone(), table?);
    }
    let overall = bt_mle(
        &judgments_to_battles(set, BattleTarget::Overall),
        baseline,
        options,
    )?;
    let models = overall.models();
    if models.len() < k + 2 {
        return Err(AuditError::InsufficientModels {
            models: models.len(),
            required: k + 2,
        });
    }
    let design = DMatrix::from_fn(models.len(), k, |i, f| {
        per_factor[&set.criteria[f]].ratings[&models[i]]
    });
    let target = DVector::from_fn(models.len(), |i, _| overall.ratings[&models[i]]);
    let linear = stats::ols_named(
        &design,
        &target,
        std::iter::once("intercept".to_string())
            .chain(set.criteria.iter().cloned())
            .collect(),
    )?;
    let (poly_design, poly_terms) = polynomial_design(&design, 2, &set.criteria);
    let poly = stats::ols_min_norm(&poly_design, &target, poly_terms)?;
    let r2_linear = linear.r_squared;
    let r2_polynomial = poly.r_squared;
    Ok(CollapseReport {
        per_factor_ratings: per_factor,
        overall_ratings: overall,
        r2_linear,
        r2_polynomial,
        unexplained_percent: 100.0 * (1.0 - r2_linear.max(r2_polynomial)),
    })
}
