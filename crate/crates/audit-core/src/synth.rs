//! Seeded synthetic judgment generator with known ground truth.
//!
//! Each judgment draws a latent vector z in `latent_dim` dimensions, adds a
//! per-model latent quality effect and an optional transitive quality shift,
//! and maps the sum through the loadings matrix to continuous factor
//! scores. The overall score is the configured linear combination plus
//! optional interaction terms plus Gaussian noise. Scores discretize to the
//! 1-5 Likert scale through fixed quantile cuts (roughly 20% mass per bin),
//! and the analytic R^2 of the continuous model is reported alongside so
//! discretization loss stays visible.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::exec;
use crate::judgment::{
    likert_to_verdict, JudgmentRecord, JudgmentSet, VerdictLabel, RUBRIC_CRITERIA,
};
use crate::stats;

/// Standard-normal quantile cuts at 20/40/60/80% mass.
const LIKERT_CUTS: [f64; 4] = [
    -0.841_621_233_572_914_3,
    -0.253_347_103_135_799_7,
    0.253_347_103_135_799_7,
    0.841_621_233_572_914_3,
];

/// One interaction term `coefficient * f_j * f_l` of the generating model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InteractionTerm {
    pub j: usize,
    pub l: usize,
    pub coefficient: f64,
}

/// Ground-truth configuration of the generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub k: usize,
    pub questions: usize,
    /// Total model count including the baseline `model-00`; every record
    /// pairs the baseline with one of the other models.
    pub models: usize,
    pub true_weights: Vec<f64>,
    pub noise_sigma: f64,
    pub latent_dim: usize,
    /// k x latent_dim loadings.
    pub factor_loadings: Vec<Vec<f64>>,
    #[serde(default)]
    pub interaction_terms: Vec<InteractionTerm>,
    /// Per-model quality (length `models`); shifts both factor and overall
    /// means per pair to create a consistent ordering.
    #[serde(default)]
    pub transitive_quality: Option<Vec<f64>>,
    /// Spread of per-(model, latent) random quality effects. Positive
    /// values give observation series shared structure, which conditions
    /// the reliability statistics.
    #[serde(default)]
    pub model_effect_sigma: f64,
    #[serde(default)]
    pub missing_rate: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn identity_loadings(k: usize) -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    /// Single shared latent factor: every criterion loads on it equally.
    pub fn collapsed_loadings(k: usize) -> Vec<Vec<f64>> {
        (0..k).map(|_| vec![1.0]).collect()
    }

    /// A separable baseline: independent factors, equal weights.
    pub fn separable(k: usize, questions: usize, models: usize, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            k,
            questions,
            models,
            true_weights: vec![1.0 / k as f64; k],
            noise_sigma: 0.3,
            latent_dim: k,
            factor_loadings: SyntheticConfig::identity_loadings(k),
            interaction_terms: Vec::new(),
            transitive_quality: None,
            model_effect_sigma: 0.8,
            missing_rate: 0.0,
            seed,
        }
    }

    /// Full factor collapse: one latent dimension behind every criterion.
    pub fn collapsed(k: usize, questions: usize, models: usize, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            latent_dim: 1,
            factor_loadings: SyntheticConfig::collapsed_loadings(k),
            ..SyntheticConfig::separable(k, questions, models, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.questions == 0 {
            return Err(AuditError::InvalidInput(
                "k and questions must be positive".into(),
            ));
        }
        if self.models < 2 {
            return Err(AuditError::InvalidInput(
                "need at least 2 models (baseline plus one)".into(),
            ));
        }
        if self.true_weights.len() != self.k {
            return Err(AuditError::InvalidInput(format!(
                "true_weights has length {}, expected k = {}",
                self.true_weights.len(),
                self.k
            )));
        }
        if self.latent_dim == 0 || self.latent_dim > self.k {
            return Err(AuditError::InvalidInput(format!(
                "latent_dim must be in [1, {}], got {}",
                self.k, self.latent_dim
            )));
        }
        if self.factor_loadings.len() != self.k
            || self.factor_loadings.iter().any(|row| row.len() != self.latent_dim)
        {
            return Err(AuditError::InvalidInput(
                "factor_loadings must be k x latent_dim".into(),
            ));
        }
        if self
            .factor_loadings
            .iter()
            .any(|row| row.iter().all(|v| *v == 0.0))
        {
            return Err(AuditError::InvalidInput(
                "degenerate loadings: a factor has an all-zero row".into(),
            ));
        }
        if self.noise_sigma < 0.0 {
            return Err(AuditError::InvalidInput("noise_sigma must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(AuditError::InvalidInput(
                "missing_rate must be in [0, 1)".into(),
            ));
        }
        if let Some(t) = &self.transitive_quality {
            if t.len() != self.models {
                return Err(AuditError::InvalidInput(format!(
                    "transitive_quality has length {}, expected models = {}",
                    t.len(),
                    self.models
                )));
            }
        }
        for term in &self.interaction_terms {
            if term.j >= self.k || term.l >= self.k {
                return Err(AuditError::InvalidInput(format!(
                    "interaction term ({}, {}) out of range for k = {}",
                    term.j, term.l, self.k
                )));
            }
        }
        Ok(())
    }

    fn loadings_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.latent_dim, |i, j| self.factor_loadings[i][j])
    }

    /// Total covariance of the continuous factor scores over the generating
    /// mixture (latent draw, model effects, transitive shifts).
    pub fn factor_covariance(&self) -> DMatrix<f64> {
        let lambda = self.loadings_matrix();
        let mut cov = &lambda * lambda.transpose() * (1.0 + self.model_effect_sigma.powi(2));
        if let Some(t) = &self.transitive_quality {
            let deltas: Vec<f64> = (1..self.models).map(|m| t[m] - t[0]).collect();
            let var_delta = stats::population_variance(&deltas);
            let direction = &lambda * DVector::from_element(self.latent_dim, 1.0);
            cov += &direction * direction.transpose() * (var_delta / self.latent_dim as f64);
        }
        cov
    }

    fn factor_means(&self) -> DVector<f64> {
        match &self.transitive_quality {
            Some(t) => {
                let deltas: Vec<f64> = (1..self.models).map(|m| t[m] - t[0]).collect();
                let mean_delta = stats::mean(&deltas);
                let lambda = self.loadings_matrix();
                &lambda * DVector::from_element(self.latent_dim, 1.0)
                    * (mean_delta / (self.latent_dim as f64).sqrt())
            }
            None => DVector::zeros(self.k),
        }
    }

    /// Signal variance of the continuous overall score (linear part plus
    /// interaction terms via Isserlis on the centered covariance; exact for
    /// the pure-Gaussian and no-interaction cases).
    fn signal_variance(&self) -> f64 {
        let cov = self.factor_covariance();
        let beta = DVector::from_column_slice(&self.true_weights);
        let mut total = (beta.transpose() * &cov * &beta)[(0, 0)];
        for a in &self.interaction_terms {
            for b in &self.interaction_terms {
                total += a.coefficient
                    * b.coefficient
                    * (cov[(a.j, b.j)] * cov[(a.l, b.l)] + cov[(a.j, b.l)] * cov[(a.l, b.j)]);
            }
        }
        total
    }

    /// Pick the noise sigma that yields the requested continuous-model R^2.
    pub fn noise_sigma_for_r2(&self, target_r2: f64) -> f64 {
        assert!(target_r2 > 0.0 && target_r2 <= 1.0);
        (self.signal_variance() * (1.0 - target_r2) / target_r2).sqrt()
    }
}

/// HTMT regime implied by the generating covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HtmtRegime {
    Separable,
    Collapsed,
}

/// What the generator promises about its output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Variance ratio of the continuous generating model.
    pub analytic_r2: f64,
    pub expected_factor_correlation: Vec<Vec<f64>>,
    pub expected_htmt_regime: HtmtRegime,
    pub config: SyntheticConfig,
}

/// Generated set plus the continuous (pre-discretization) scores.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub set: JudgmentSet,
    pub truth: GroundTruth,
    /// m x k continuous factor scores, row-aligned with the records.
    pub continuous_factors: DMatrix<f64>,
    /// Length-m continuous overall scores.
    pub continuous_overall: DVector<f64>,
}

/// Variance ratio of the continuous generating model:
/// `Var(signal) / (Var(signal) + noise_sigma^2)`.
pub fn analytic_r2(config: &SyntheticConfig) -> f64 {
    if config.noise_sigma == 0.0 {
        return 1.0;
    }
    let signal = config.signal_variance();
    signal / (signal + config.noise_sigma.powi(2))
}

fn discretize(x: f64, mean: f64, std: f64) -> u8 {
    let z = (x - mean) / std;
    let mut bin = 1u8;
    for cut in LIKERT_CUTS {
        if z > cut {
            bin += 1;
        }
    }
    bin
}

fn verdict_text(criteria: &[String], verdicts: &[Option<VerdictLabel>], overall: Option<VerdictLabel>) -> String {
    let mut text = String::new();
    for (name, verdict) in criteria.iter().zip(verdicts.iter()) {
        if let Some(v) = verdict {
            text.push_str(&format!("{name}: {}\n", v.factor_form()));
        }
    }
    if let Some(v) = overall {
        text.push_str(&format!("My final verdict is {}", v.canonical()));
    }
    text
}

/// Generate the judgment set together with the continuous scores behind it.
pub fn generate_detailed(config: &SyntheticConfig) -> Result<GeneratedData> {
    config.validate()?;
    let k = config.k;
    let d = config.latent_dim;
    let lambda = config.loadings_matrix();
    let criteria: Vec<String> = if k == RUBRIC_CRITERIA.len() {
        RUBRIC_CRITERIA.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=k).map(|i| format!("factor_{i}")).collect()
    };

    // model quality effects in latent space; the baseline is the reference
    let mut global_rng = stats::derived_rng(config.seed, 0);
    let mut model_effects = DMatrix::zeros(config.models, d);
    for m in 1..config.models {
        for j in 0..d {
            let draw: f64 = StandardNormal.sample(&mut global_rng);
            model_effects[(m, j)] = draw * config.model_effect_sigma;
        }
    }
    let deltas: Vec<f64> = match &config.transitive_quality {
        Some(t) => (1..config.models).map(|m| t[m] - t[0]).collect(),
        None => vec![0.0; config.models - 1],
    };

    let cov = config.factor_covariance();
    let means = config.factor_means();
    let factor_stds: Vec<f64> = (0..k).map(|i| cov[(i, i)].sqrt().max(1e-9)).collect();
    let beta = DVector::from_column_slice(&config.true_weights);
    let overall_mean = {
        let mut mu = (beta.transpose() * &means)[(0, 0)];
        for term in &config.interaction_terms {
            mu += term.coefficient * (cov[(term.j, term.l)] + means[term.j] * means[term.l]);
        }
        mu
    };
    let overall_std = (config.signal_variance() + config.noise_sigma.powi(2))
        .sqrt()
        .max(1e-9);

    let m_total = config.questions * (config.models - 1);
    let rows: Vec<(JudgmentRecord, Vec<f64>, f64)> = exec::map_indexed(m_total, |idx| {
        let q = idx / (config.models - 1);
        let model = 1 + idx % (config.models - 1);
        let mut rng = stats::derived_rng(config.seed, idx as u64 + 1);
        let mut latent = DVector::zeros(d);
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            latent[j] = z + model_effects[(model, j)] + deltas[model - 1] / (d as f64).sqrt();
        }
        let factors = &lambda * &latent;
        let mut overall = (beta.transpose() * &factors)[(0, 0)];
        for term in &config.interaction_terms {
            overall += term.coefficient * factors[term.j] * factors[term.l];
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        overall += noise * config.noise_sigma;

        let mut verdicts: Vec<Option<VerdictLabel>> = (0..k)
            .map(|i| likert_to_verdict(discretize(factors[i], means[i], factor_stds[i])))
            .collect();
        let mut overall_verdict = likert_to_verdict(discretize(overall, overall_mean, overall_std));
        for verdict in verdicts.iter_mut() {
            if rng.gen_range(0.0..1.0) < config.missing_rate {
                *verdict = None;
            }
        }
        if rng.gen_range(0.0..1.0) < config.missing_rate {
            overall_verdict = None;
        }
        let record = JudgmentRecord {
            question_id: format!("q{q:05}"),
            model_a: "model-00".to_string(),
            model_b: format!("model-{model:02}"),
            judge: "synthetic-judge".to_string(),
            setting: "synthetic".to_string(),
            raw_text: Some(verdict_text(&criteria, &verdicts, overall_verdict)),
            factor_verdicts: verdicts,
            overall_verdict,
            factor_flags: vec![false; k],
            overall_flag: false,
        };
        (record, factors.iter().copied().collect(), overall)
    });

    let mut records = Vec::with_capacity(m_total);
    let mut continuous_factors = DMatrix::zeros(m_total, k);
    let mut continuous_overall = DVector::zeros(m_total);
    for (i, (record, factors, overall)) in rows.into_iter().enumerate() {
        for (j, value) in factors.iter().enumerate() {
            continuous_factors[(i, j)] = *value;
        }
        continuous_overall[i] = overall;
        records.push(record);
    }

    let corr: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt())
                .collect()
        })
        .collect();
    let mean_off_diag = if k > 1 {
        let mut total = 0.0;
        for (i, row) in corr.iter().enumerate() {
            for (j, value) in row.iter().enumerate() {
                if i != j {
                    total += value.abs();
                }
            }
        }
        total / (k * (k - 1)) as f64
    } else {
        0.0
    };
    let truth = GroundTruth {
        analytic_r2: analytic_r2(config),
        expected_factor_correlation: corr,
        expected_htmt_regime: if mean_off_diag >= 0.5 {
            HtmtRegime::Collapsed
        } else {
            HtmtRegime::Separable
        },
        config: config.clone(),
    };
    Ok(GeneratedData {
        set: JudgmentSet::new(records, criteria, 4.0)?,
        truth,
        continuous_factors,
        continuous_overall,
    })
}

/// Generate a judgment set with its ground-truth sidecar.
pub fn generate(config: &SyntheticConfig) -> Result<(JudgmentSet, GroundTruth)> {
    let data = generate_detailed(config)?;
    Ok((data.set, data.truth))
}
