//! Multiple imputation of incomplete judgments.
//!
//! Missing cells (unflagged absent verdicts) are filled by chained
//! regression: each incomplete column is regressed on every other column
//! over the rows where it is observed, and missing entries get the
//! prediction plus Gaussian residual noise. Deviation-flagged cells count
//! as observed "no preference" (3) and are never imputed.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};

use crate::error::{AuditError, Result};
use crate::exec;
use crate::judgment::{verdict_to_likert, JudgmentSet, SampleMatrix};
use crate::stats;

const SWEEPS: usize = 5;

/// Result of multiple imputation: `imputations` complete matrices plus the
/// count of rows dropped because every cell was missing.
#[derive(Debug, Clone)]
pub struct ImputedSamples {
    pub matrices: Vec<SampleMatrix>,
    pub dropped_rows: usize,
}

struct CellGrid {
    /// m x (k+1) observed values; NaN marks a missing cell.
    values: DMatrix<f64>,
    question_ids: Vec<String>,
    record_indices: Vec<usize>,
    dropped_rows: usize,
}

fn observed_grid(set: &JudgmentSet) -> Result<CellGrid> {
    if set.records.is_empty() {
        return Err(AuditError::InvalidInput("empty judgment set".into()));
    }
    let k = set.k();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut question_ids = Vec::new();
    let mut record_indices = Vec::new();
    let mut dropped = 0usize;
    for (idx, record) in set.records.iter().enumerate() {
        let mut row = Vec::with_capacity(k + 1);
        for j in 0..k {
            let value = match record.factor_verdicts[j] {
                Some(v) => verdict_to_likert(v),
                None if record.factor_flags[j] => 3.0,
                None => f64::NAN,
            };
            row.push(value);
        }
        row.push(match record.overall_verdict {
            Some(v) => verdict_to_likert(v),
            None if record.overall_flag => 3.0,
            None => f64::NAN,
        });
        if row.iter().all(|v| v.is_nan()) {
            dropped += 1;
            continue;
        }
        rows.push(row);
        question_ids.push(record.question_id.clone());
        record_indices.push(idx);
    }
    if rows.is_empty() {
        return Err(AuditError::InvalidInput(
            "all records were fully missing".into(),
        ));
    }
    let m = rows.len();
    let values = DMatrix::from_fn(m, k + 1, |i, j| rows[i][j]);
    Ok(CellGrid {
        values,
        question_ids,
        record_indices,
        dropped_rows: dropped,
    })
}

fn column_mean_observed(values: &DMatrix<f64>, col: usize) -> f64 {
    let observed: Vec<f64> = values
        .column(col)
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .collect();
    if observed.is_empty() {
        3.0
    } else {
        stats::mean(&observed)
    }
}

fn impute_one(grid: &CellGrid, k: usize, seed: u64, stream: u64) -> SampleMatrix {
    let m = grid.values.nrows();
    let cols = k + 1;
    let mut rng = stats::derived_rng(seed, stream);
    let mut filled = grid.values.clone();
    let mut missing: Vec<Vec<usize>> = vec![Vec::new(); cols];
    for c in 0..cols {
        let init = column_mean_observed(&grid.values, c);
        for r in 0..m {
            if grid.values[(r, c)].is_nan() {
                filled[(r, c)] = init;
                missing[c].push(r);
            }
        }
    }
    let any_missing = missing.iter().any(|v| !v.is_empty());
    if any_missing {
        for _sweep in 0..SWEEPS {
            for (c, rows) in missing.iter().enumerate() {
                if rows.is_empty() {
                    continue;
                }
                chained_fill(&mut filled, &grid.values, c, rows, &mut rng);
            }
        }
    }
    let mut mask = vec![false; m * cols];
    for (c, rows) in missing.iter().enumerate() {
        for &r in rows {
            mask[r * cols + c] = true;
        }
    }
    SampleMatrix {
        factors: filled.columns(0, k).clone_owned(),
        overall: DVector::from_iterator(m, filled.column(k).iter().copied()),
        question_ids: grid.question_ids.clone(),
        imputed_mask: mask,
        record_indices: grid.record_indices.clone(),
    }
}

/// Regress column `c` on the other columns over rows where `c` is observed,
/// then fill its missing rows with prediction plus residual noise.
fn chained_fill(
    filled: &mut DMatrix<f64>,
    observed: &DMatrix<f64>,
    c: usize,
    missing_rows: &[usize],
    rng: &mut rand_chacha::ChaCha8Rng,
) {
    let m = filled.nrows();
    let cols = filled.ncols();
    let train_rows: Vec<usize> = (0..m).filter(|&r| !observed[(r, c)].is_nan()).collect();
    let predictors: Vec<usize> = (0..cols).filter(|&j| j != c).collect();

    let fallback_mean = {
        let obs: Vec<f64> = train_rows.iter().map(|&r| observed[(r, c)]).collect();
        stats::mean(&obs)
    };

    let fit = if train_rows.len() > predictors.len() + 2 {
        let design = DMatrix::from_fn(train_rows.len(), predictors.len(), |i, j| {
            filled[(train_rows[i], predictors[j])]
        });
        let target = DVector::from_fn(train_rows.len(), |i, _| observed[(train_rows[i], c)]);
        stats::ols(&design, &target).ok()
    } else {
        None
    };

    match fit {
        Some(fit) => {
            let df = train_rows.len().saturating_sub(predictors.len() + 1).max(1);
            let sse: f64 = fit.residuals.iter().map(|r| r * r).sum();
            let sigma = (sse / df as f64).sqrt();
            let noise = Normal::new(0.0, sigma.max(1e-12)).expect("finite sigma");
            for &r in missing_rows {
                let mut pred = fit.coefficients[0];
                for (j, &p) in predictors.iter().enumerate() {
                    pred += fit.coefficients[j + 1] * filled[(r, p)];
                }
                filled[(r, c)] = (pred + noise.sample(rng)).clamp(1.0, 5.0);
            }
        }
        None => {
            for &r in missing_rows {
                filled[(r, c)] = fallback_mean.clamp(1.0, 5.0);
            }
        }
    }
}

/// Produce `imputations` complete sample matrices. Each imputation draws its
/// noise from a stream derived from `(seed, imputation index)`, so repeated
/// calls are identical and the imputations are mutually independent.
/// Downstream analyses pool point estimates by averaging across the list.
pub fn impute_missing(set: &JudgmentSet, imputations: usize, seed: u64) -> Result<ImputedSamples> {
    if imputations < 1 {
        return Err(AuditError::InvalidInput(
            "imputations must be at least 1".into(),
        ));
    }
    let grid = observed_grid(set)?;
    let k = set.k();
    let matrices = exec::map_indexed(imputations, |t| impute_one(&grid, k, seed, t as u64 + 1));
    Ok(ImputedSamples {
        matrices,
        dropped_rows: grid.dropped_rows,
    })
}
