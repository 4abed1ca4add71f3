//! Audit pipeline and report assembly: run load -> impute -> schematic ->
//! psychometric -> correlations -> deviations -> ranking -> collapse from a
//! setting spec, pool estimates across imputations, and emit canonical
//! JSON, markdown, and plot-data CSVs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canon;
use crate::error::{AuditError, ErrorKind, Result};
use crate::exec;
use crate::impute;
use crate::judgment::{
    build_sample_matrix, deviation_rates, load_judgments, GroupField, InputFormat, JudgmentSet,
    RUBRIC_CRITERIA,
};
use crate::psychometric::{psychometric_validity, PsychometricReport, ScoreCube};
use crate::ranking::{bootstrap_ratings, collapse_analysis, BtOptions, CollapseReport, RatingTable};
use crate::schematic::{
    cluster_questions, schematic_adherence, QuestionClusters, SchematicOptions, SchematicReport,
};
use crate::stats::{spearman_matrix, CorrelationMatrix};
use crate::synth;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metric knobs of a setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    pub bootstrap_iterations: usize,
    pub cluster_count: Option<usize>,
    pub drop_ties: bool,
    pub cs_ordered_pairs: bool,
    pub imputations: usize,
    pub seed: u64,
    /// Drop records carrying any deviation flag before the analysis stages
    /// (deviation rates are always computed first, on everything).
    pub exclude_deviation_rows: bool,
    pub polynomial_degree: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            bootstrap_iterations: 100,
            cluster_count: None,
            drop_ties: false,
            cs_ordered_pairs: false,
            imputations: 5,
            seed: 0,
            exclude_deviation_rows: false,
            polynomial_degree: 2,
        }
    }
}

/// A complete audit configuration: judge, rubric, question and model
/// filters, baseline, and metric options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SettingSpec {
    pub name: String,
    /// Keep only this judge's records (empty or absent keeps everything).
    #[serde(default)]
    pub judge: Option<String>,
    #[serde(default)]
    pub setting: Option<String>,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<String>,
    /// Keep only these question ids.
    #[serde(default)]
    pub question_filter: Option<Vec<String>>,
    /// Keep only records whose models are both in this set.
    #[serde(default)]
    pub models: Option<Vec<String>>,
    pub baseline: String,
    #[serde(default)]
    pub metrics: MetricOptions,
}

fn default_criteria() -> Vec<String> {
    RUBRIC_CRITERIA.iter().map(|s| s.to_string()).collect()
}

impl SettingSpec {
    pub fn from_yaml(text: &str) -> Result<SettingSpec> {
        serde_yaml::from_str(text)
            .map_err(|e| AuditError::InvalidInput(format!("setting spec: {e}")))
    }
}

fn stage_seed(seed: u64, stage: u64) -> u64 {
    seed.wrapping_add(stage.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Serializable view of the loadings matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadingsJson {
    pub factor_names: Vec<String>,
    pub lambda: Vec<Vec<f64>>,
    pub rotation: String,
    pub assignment: Vec<usize>,
    pub eigenvalues: Vec<f64>,
}

/// Serializable view of a correlation matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationJson {
    pub factor_names: Vec<String>,
    pub method: String,
    pub values: Vec<Vec<f64>>,
    pub p_values: Vec<Vec<f64>>,
    pub corrected_p: Vec<Vec<f64>>,
    pub mean_off_diagonal: f64,
}

fn correlation_json(corr: &CorrelationMatrix, names: &[String]) -> CorrelationJson {
    let k = corr.values.nrows();
    let to_rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| (0..k).map(|j| m[(i, j)]).collect())
            .collect()
    };
    CorrelationJson {
        factor_names: names.to_vec(),
        method: "spearman".to_string(),
        values: to_rows(&corr.values),
        p_values: to_rows(&corr.p_values),
        corrected_p: to_rows(&corr.corrected_p),
        mean_off_diagonal: corr.mean_off_diagonal(),
    }
}

/// Scalar summaries kept per imputation alongside the pooled report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImputationSummary {
    pub index: usize,
    pub r2_linear: f64,
    pub r2_polynomial: f64,
    pub r2_schematic: f64,
    pub schematic_sensitivity: f64,
    pub unified_psychometric: f64,
    pub psychometric_sensitivity: f64,
}

/// The assembled audit report. Every numeric field traces to one module
/// output; written reports are canonical JSON and byte-reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub tool_version: String,
    pub input_digest: String,
    pub setting: SettingSpec,
    pub records_total: usize,
    pub records_used: usize,
    pub rows_dropped_imputation: usize,
    pub imputed_cells: usize,
    pub deviations: Value,
    pub schematic: SchematicReport,
    pub psychometric: PsychometricReport,
    pub loadings: LoadingsJson,
    pub correlations: CorrelationJson,
    pub ranking: RatingTable,
    pub collapse: CollapseReport,
    pub per_imputation: Vec<ImputationSummary>,
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn pool_vectors(vectors: Vec<Vec<f64>>) -> Vec<f64> {
    let len = vectors[0].len();
    (0..len)
        .map(|i| mean_of(&vectors.iter().map(|v| v[i]).collect::<Vec<f64>>()))
        .collect()
}

fn pool_matrices(matrices: Vec<Vec<Vec<f64>>>) -> Vec<Vec<f64>> {
    let rows = matrices[0].len();
    (0..rows)
        .map(|r| pool_vectors(matrices.iter().map(|m| m[r].clone()).collect()))
        .collect()
}

fn pool_schematic(reports: Vec<SchematicReport>) -> SchematicReport {
    let first = reports[0].clone();
    let collect = |f: &dyn Fn(&SchematicReport) -> f64| -> Vec<f64> {
        reports.iter().map(f).collect()
    };
    let cs_values: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.context_stability)
        .collect();
    let mut cluster_weights = BTreeMap::new();
    for key in first.cluster_weights.keys() {
        let per: Vec<Vec<f64>> = reports
            .iter()
            .filter_map(|r| r.cluster_weights.get(key).cloned())
            .collect();
        if per.len() == reports.len() {
            cluster_weights.insert(key.clone(), pool_vectors(per));
        }
    }
    SchematicReport {
        criteria: first.criteria.clone(),
        r2_linear: mean_of(&collect(&|r| r.r2_linear)),
        r2_polynomial: mean_of(&collect(&|r| r.r2_polynomial)),
        r2_schematic: mean_of(&collect(&|r| r.r2_schematic)),
        sensitivity: mean_of(&collect(&|r| r.sensitivity)),
        unexplained_percent: mean_of(&collect(&|r| r.unexplained_percent)),
        linear_weights: pool_vectors(reports.iter().map(|r| r.linear_weights.clone()).collect()),
        polynomial_terms: first
            .polynomial_terms
            .iter()
            .enumerate()
            .map(|(i, term)| crate::schematic::PolyTerm {
                term: term.term.clone(),
                coefficient: mean_of(
                    &reports
                        .iter()
                        .map(|r| r.polynomial_terms[i].coefficient)
                        .collect::<Vec<f64>>(),
                ),
            })
            .collect(),
        weight_disparity: mean_of(&collect(&|r| r.weight_disparity)),
        weight_entropy: mean_of(&collect(&|r| r.weight_entropy)),
        context_stability: if cs_values.len() == reports.len() {
            Some(mean_of(&cs_values))
        } else {
            None
        },
        cluster_weights,
    }
}

fn pool_psychometric(reports: Vec<PsychometricReport>) -> PsychometricReport {
    let first = &reports[0];
    PsychometricReport {
        factor_names: first.factor_names.clone(),
        alpha: pool_vectors(reports.iter().map(|r| r.alpha.clone()).collect()),
        clr_raw: pool_vectors(reports.iter().map(|r| r.clr_raw.clone()).collect()),
        clr_norm: pool_vectors(reports.iter().map(|r| r.clr_norm.clone()).collect()),
        htmt: pool_matrices(reports.iter().map(|r| r.htmt.clone()).collect()),
        unified: mean_of(&reports.iter().map(|r| r.unified).collect::<Vec<f64>>()),
        sensitivity: mean_of(&reports.iter().map(|r| r.sensitivity).collect::<Vec<f64>>()),
        score_range: first.score_range,
    }
}

fn pool_loadings(loadings: Vec<LoadingsJson>) -> LoadingsJson {
    let first = loadings[0].clone();
    LoadingsJson {
        factor_names: first.factor_names,
        lambda: pool_matrices(loadings.iter().map(|l| l.lambda.clone()).collect()),
        rotation: first.rotation,
        assignment: first.assignment,
        eigenvalues: pool_vectors(loadings.iter().map(|l| l.eigenvalues.clone()).collect()),
    }
}

fn pool_correlations(correlations: Vec<CorrelationJson>) -> CorrelationJson {
    let first = correlations[0].clone();
    CorrelationJson {
        factor_names: first.factor_names,
        method: first.method,
        values: pool_matrices(correlations.iter().map(|c| c.values.clone()).collect()),
        p_values: pool_matrices(correlations.iter().map(|c| c.p_values.clone()).collect()),
        corrected_p: pool_matrices(correlations.iter().map(|c| c.corrected_p.clone()).collect()),
        mean_off_diagonal: mean_of(
            &correlations
                .iter()
                .map(|c| c.mean_off_diagonal)
                .collect::<Vec<f64>>(),
        ),
    }
}

fn filter_set(set: &JudgmentSet, setting: &SettingSpec) -> Result<JudgmentSet> {
    let records: Vec<_> = set
        .records
        .iter()
        .filter(|r| {
            setting
                .judge
                .as_ref()
                .map(|j| j.is_empty() || r.judge == *j)
                .unwrap_or(true)
                && setting
                    .setting
                    .as_ref()
                    .map(|s| s.is_empty() || r.setting == *s)
                    .unwrap_or(true)
                && setting
                    .question_filter
                    .as_ref()
                    .map(|qs| qs.contains(&r.question_id))
                    .unwrap_or(true)
                && setting
                    .models
                    .as_ref()
                    .map(|ms| ms.contains(&r.model_a) && ms.contains(&r.model_b))
                    .unwrap_or(true)
        })
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(AuditError::InvalidInput(format!(
            "setting {:?} matches no records",
            setting.name
        )));
    }
    JudgmentSet::new(records, set.criteria.clone(), set.score_range)
}

fn detect_format(path: &Path) -> InputFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => InputFormat::Csv,
        _ => InputFormat::JsonLines,
    }
}

/// Run the full audit pipeline. Stage failures abort with the stage named;
/// context stability is the one best-effort part: it is omitted (null) when
/// the data cannot support per-cluster fits.
pub fn run_audit(setting: &SettingSpec, data_path: &Path) -> Result<AuditReport> {
    let digest = canon::file_digest(data_path).map_err(|e| e.at_stage("load"))?;
    let set = load_judgments(data_path, detect_format(data_path))
        .map_err(|e| e.at_stage("load"))?;
    let records_total = set.records.len();
    let filtered = filter_set(&set, setting).map_err(|e| e.at_stage("filter"))?;

    let deviations = deviation_rates(&filtered, &[GroupField::Judge, GroupField::Setting])
        .map_err(|e| e.at_stage("deviations"))?;

    let analysis_set = if setting.metrics.exclude_deviation_rows {
        let kept: Vec<_> = filtered
            .records
            .iter()
            .filter(|r| !r.overall_flag && !r.factor_flags.iter().any(|f| *f))
            .cloned()
            .collect();
        JudgmentSet::new(kept, filtered.criteria.clone(), filtered.score_range)
            .map_err(|e| e.at_stage("filter"))?
    } else {
        filtered.clone()
    };

    let metrics = &setting.metrics;
    let imputed = impute::impute_missing(&analysis_set, metrics.imputations, metrics.seed)
        .map_err(|e| e.at_stage("impute"))?;

    // Clusters come from the pre-imputation numeric view so every
    // imputation shares one assignment and cluster weights stay poolable.
    let base_matrix = build_sample_matrix(&analysis_set).map_err(|e| e.at_stage("schematic"))?;
    let clusters: Option<QuestionClusters> =
        match cluster_questions(&base_matrix, metrics.cluster_count, stage_seed(metrics.seed, 7)) {
            Ok(clusters) => Some(clusters),
            Err(e) if e.kind() == ErrorKind::Numeric => None,
            Err(AuditError::InvalidInput(_)) => None,
            Err(e) => return Err(e.at_stage("schematic")),
        };

    let schematic_options = SchematicOptions {
        polynomial_degree: metrics.polynomial_degree,
        cs_ordered_pairs: metrics.cs_ordered_pairs,
    };

    struct PerImputation {
        schematic: SchematicReport,
        psychometric: PsychometricReport,
        loadings: LoadingsJson,
        correlations: CorrelationJson,
    }

    let per: Vec<Result<PerImputation>> = exec::map_slice(&imputed.matrices, |matrix| {
        let mut schematic = schematic_adherence(
            matrix,
            Some(&analysis_set.criteria),
            clusters.as_ref(),
            &schematic_options,
        );
        // per-cluster fits can fail on thin clusters; retry without CS
        if let Err(e) = &schematic {
            if clusters.is_some() && e.kind() == ErrorKind::Numeric {
                schematic = schematic_adherence(
                    matrix,
                    Some(&analysis_set.criteria),
                    None,
                    &schematic_options,
                );
            }
        }
        let schematic = schematic.map_err(|e| e.at_stage("schematic"))?;
        let cube = ScoreCube::from_sample(&analysis_set, matrix)
            .map_err(|e| e.at_stage("psychometric"))?;
        let psychometric = psychometric_validity(&cube, analysis_set.score_range)
            .map_err(|e| e.at_stage("psychometric"))?;
        let loadings_matrix = crate::psychometric::extract_loadings(&cube)
            .map_err(|e| e.at_stage("psychometric"))?;
        let k = loadings_matrix.lambda.nrows();
        let loadings = LoadingsJson {
            factor_names: loadings_matrix.factor_names.clone(),
            lambda: (0..k)
                .map(|i| (0..k).map(|j| loadings_matrix.lambda[(i, j)]).collect())
                .collect(),
            rotation: loadings_matrix.rotation.clone(),
            assignment: loadings_matrix.assignment.clone(),
            eigenvalues: loadings_matrix.eigenvalues.clone(),
        };
        let correlations = spearman_matrix(&matrix.factors)
            .map_err(|e| e.at_stage("correlations"))?;
        Ok(PerImputation {
            schematic,
            psychometric,
            loadings,
            correlations: correlation_json(&correlations, &analysis_set.criteria),
        })
    });
    let per: Vec<PerImputation> = per.into_iter().collect::<Result<_>>()?;

    let per_imputation: Vec<ImputationSummary> = per
        .iter()
        .enumerate()
        .map(|(index, p)| ImputationSummary {
            index,
            r2_linear: p.schematic.r2_linear,
            r2_polynomial: p.schematic.r2_polynomial,
            r2_schematic: p.schematic.r2_schematic,
            schematic_sensitivity: p.schematic.sensitivity,
            unified_psychometric: p.psychometric.unified,
            psychometric_sensitivity: p.psychometric.sensitivity,
        })
        .collect();

    let bt_options = BtOptions {
        drop_ties: metrics.drop_ties,
        ..BtOptions::default()
    };
    let ranking = bootstrap_ratings(
        &analysis_set,
        &setting.baseline,
        metrics.bootstrap_iterations,
        stage_seed(metrics.seed, 1),
        &bt_options,
    )
    .map_err(|e| e.at_stage("ranking"))?;
    let collapse = collapse_analysis(&analysis_set, &setting.baseline, &bt_options)
        .map_err(|e| e.at_stage("collapse"))?;

    let imputed_cells = imputed.matrices[0].imputed_count();
    let mut schematics = Vec::new();
    let mut psychometrics = Vec::new();
    let mut loadings = Vec::new();
    let mut correlations = Vec::new();
    for p in per {
        schematics.push(p.schematic);
        psychometrics.push(p.psychometric);
        loadings.push(p.loadings);
        correlations.push(p.correlations);
    }

    Ok(AuditReport {
        tool_version: TOOL_VERSION.to_string(),
        input_digest: digest,
        setting: setting.clone(),
        records_total,
        records_used: analysis_set.records.len(),
        rows_dropped_imputation: imputed.dropped_rows,
        imputed_cells,
        deviations: deviations.to_json(),
        schematic: pool_schematic(schematics),
        psychometric: pool_psychometric(psychometrics),
        loadings: pool_loadings(loadings),
        correlations: pool_correlations(correlations),
        ranking,
        collapse,
        per_imputation,
    })
}

/// Write the report as canonical JSON, atomically. Returns the digest of
/// the written bytes so callers can content-address it.
pub fn write_report(report: &AuditReport, path: &Path) -> Result<String> {
    canon::write_canonical_json(path, report)?;
    canon::file_digest(path)
}

fn csv_line(fields: &[String]) -> String {
    let escaped: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains(',') || f.contains('"') {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect();
    escaped.join(",")
}

fn fmt(value: f64) -> String {
    canon::format_float(value)
}

/// Write the four plot-data CSVs: variance decomposition, correlation
/// matrix, loadings heatmap, and per-model collapse ratings.
pub fn emit_plot_data(report: &AuditReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let judge = report.setting.judge.clone().unwrap_or_default();
    let setting_name = report.setting.name.clone();

    let mut variance = String::from("judge,setting,explained_linear,explained_poly,unexplained\n");
    variance.push_str(&csv_line(&[
        judge.clone(),
        setting_name.clone(),
        fmt(report.schematic.r2_linear),
        fmt(report.schematic.r2_polynomial),
        fmt(1.0 - report.schematic.r2_schematic),
    ]));
    variance.push('\n');
    let path = out_dir.join("variance_decomposition.csv");
    canon::write_atomic(&path, variance.as_bytes())?;
    written.push(path);

    let mut corr = String::from("row_factor,col_factor,spearman_rho,p_value,bonferroni_p\n");
    let names = &report.correlations.factor_names;
    for (i, row_name) in names.iter().enumerate() {
        for (j, col_name) in names.iter().enumerate() {
            corr.push_str(&csv_line(&[
                row_name.clone(),
                col_name.clone(),
                fmt(report.correlations.values[i][j]),
                fmt(report.correlations.p_values[i][j]),
                fmt(report.correlations.corrected_p[i][j]),
            ]));
            corr.push('\n');
        }
    }
    let path = out_dir.join("correlation_matrix.csv");
    canon::write_atomic(&path, corr.as_bytes())?;
    written.push(path);

    let mut loadings = String::from("observed_factor,latent_factor,loading\n");
    for (i, observed) in report.loadings.factor_names.iter().enumerate() {
        for (j, latent) in report.loadings.factor_names.iter().enumerate() {
            loadings.push_str(&csv_line(&[
                observed.clone(),
                format!("latent_{latent}"),
                fmt(report.loadings.lambda[i][j]),
            ]));
            loadings.push('\n');
        }
    }
    let path = out_dir.join("loadings.csv");
    canon::write_atomic(&path, loadings.as_bytes())?;
    written.push(path);

    let mut collapse = String::from("model,series,rating,win_rate\n");
    let overall = &report.collapse.overall_ratings;
    for model in overall.models() {
        collapse.push_str(&csv_line(&[
            model.clone(),
            "overall".to_string(),
            fmt(overall.ratings[&model]),
            fmt(overall.win_rates[&model]),
        ]));
        collapse.push('\n');
        for (factor, table) in &report.collapse.per_factor_ratings {
            collapse.push_str(&csv_line(&[
                model.clone(),
                factor.clone(),
                fmt(table.ratings[&model]),
                fmt(table.win_rates[&model]),
            ]));
            collapse.push('\n');
        }
    }
    let path = out_dir.join("collapse.csv");
    canon::write_atomic(&path, collapse.as_bytes())?;
    written.push(path);

    Ok(written)
}

/// Render a human-readable markdown summary of the report.
pub fn render_markdown(report: &AuditReport) -> String {
    let mut md = String::new();
    md.push_str(&format!("# Audit report: {}\n\n", report.setting.name));
    md.push_str(&format!(
        "- tool version: {}\n- input digest: `{}`\n- records: {} used of {} loaded\n- imputations: {} ({} cells imputed, {} rows dropped)\n\n",
        report.tool_version,
        report.input_digest,
        report.records_used,
        report.records_total,
        report.setting.metrics.imputations,
        report.imputed_cells,
        report.rows_dropped_imputation,
    ));
    md.push_str("## Schematic adherence\n\n");
    md.push_str("| metric | value |\n|---|---|\n");
    md.push_str(&format!("| linear R^2 | {} |\n", fmt(report.schematic.r2_linear)));
    md.push_str(&format!(
        "| polynomial R^2 | {} |\n",
        fmt(report.schematic.r2_polynomial)
    ));
    md.push_str(&format!(
        "| schematic R^2 | {} |\n",
        fmt(report.schematic.r2_schematic)
    ));
    md.push_str(&format!(
        "| unexplained (%) | {} |\n",
        fmt(report.schematic.unexplained_percent)
    ));
    md.push_str(&format!("| sensitivity | {} |\n", fmt(report.schematic.sensitivity)));
    md.push_str(&format!(
        "| weight disparity | {} |\n| weight entropy | {} |\n",
        fmt(report.schematic.weight_disparity),
        fmt(report.schematic.weight_entropy)
    ));
    if let Some(cs) = report.schematic.context_stability {
        md.push_str(&format!("| context stability | {} |\n", fmt(cs)));
    }
    md.push_str("\n## Psychometric validity\n\n");
    md.push_str("| factor | alpha | CLR (norm) |\n|---|---|---|\n");
    for (i, name) in report.psychometric.factor_names.iter().enumerate() {
        md.push_str(&format!(
            "| {name} | {} | {} |\n",
            fmt(report.psychometric.alpha[i]),
            fmt(report.psychometric.clr_norm[i])
        ));
    }
    md.push_str(&format!(
        "\n- unified score: {}\n- sensitivity (on a {}-wide scale): {}\n- mean off-diagonal Spearman: {}\n",
        fmt(report.psychometric.unified),
        fmt(report.psychometric.score_range),
        fmt(report.psychometric.sensitivity),
        fmt(report.correlations.mean_off_diagonal),
    ));
    md.push_str("\n## Ranking\n\n");
    md.push_str("| model | rating | elo | win rate | 95% CI |\n|---|---|---|---|---|\n");
    let ranking = &report.ranking;
    for model in ranking.models() {
        let ci = ranking
            .ci
            .get(&model)
            .map(|(lo, hi)| format!("[{}, {}]", fmt(*lo), fmt(*hi)))
            .unwrap_or_else(|| "-".to_string());
        md.push_str(&format!(
            "| {model} | {} | {} | {} | {ci} |\n",
            fmt(ranking.ratings[&model]),
            fmt(ranking.elo_display(&model).unwrap_or(f64::NAN)),
            fmt(ranking.win_rates[&model]),
        ));
    }
    md.push_str(&format!(
        "\n## Rating collapse\n\n- linear R^2 of overall on factor ratings: {}\n- polynomial R^2: {}\n- unexplained (%): {}\n",
        fmt(report.collapse.r2_linear),
        fmt(report.collapse.r2_polynomial),
        fmt(report.collapse.unexplained_percent),
    ));
    md
}

/// Write a generated synthetic dataset and its ground-truth sidecar.
pub fn write_synthetic(
    config: &synth::SyntheticConfig,
    out: &Path,
    truth_path: Option<&Path>,
) -> Result<synth::GroundTruth> {
    let (set, truth) = synth::generate(config)?;
    crate::judgment::write_judgments_jsonl(out, &set)?;
    if let Some(path) = truth_path {
        canon::write_canonical_json(path, &truth)?;
    }
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SyntheticConfig;

    fn synth_config() -> SyntheticConfig {
        SyntheticConfig {
            transitive_quality: Some((0..9).map(|m| m as f64 * 0.25).collect()),
            noise_sigma: 0.8,
            ..SyntheticConfig::separable(5, 60, 9, 41)
        }
    }

    fn setting() -> SettingSpec {
        SettingSpec {
            name: "synthetic-audit".into(),
            judge: None,
            setting: None,
            criteria: default_criteria(),
            question_filter: None,
            models: None,
            baseline: "model-00".into(),
            metrics: MetricOptions {
                bootstrap_iterations: 20,
                imputations: 2,
                seed: 5,
                ..MetricOptions::default()
            },
        }
    }

    #[test]
    fn audit_runs_end_to_end_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("judgments.jsonl");
        write_synthetic(&synth_config(), &data, None).unwrap();

        let report_a = run_audit(&setting(), &data).unwrap();
        let report_b = run_audit(&setting(), &data).unwrap();
        let json_a = canon::to_canonical_json(&report_a).unwrap();
        let json_b = canon::to_canonical_json(&report_b).unwrap();
        assert_eq!(json_a, json_b);

        assert_eq!(report_a.records_total, 60 * 8);
        assert!(report_a.schematic.r2_schematic > 0.0);
        assert!(report_a.ranking.ci.len() >= 8);
        assert!(report_a.collapse.r2_linear > 0.5);
        assert_eq!(report_a.per_imputation.len(), 2);
    }

    #[test]
    fn plot_data_files_have_documented_headers() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("judgments.jsonl");
        write_synthetic(&synth_config(), &data, None).unwrap();
        let report = run_audit(&setting(), &data).unwrap();
        let out = dir.path().join("plots");
        let files = emit_plot_data(&report, &out).unwrap();
        assert_eq!(files.len(), 4);
        let variance = std::fs::read_to_string(&files[0]).unwrap();
        assert!(variance.starts_with("judge,setting,explained_linear,explained_poly,unexplained\n"));
        let corr = std::fs::read_to_string(&files[1]).unwrap();
        assert!(corr.starts_with("row_factor,col_factor,spearman_rho,p_value,bonferroni_p\n"));
        // symmetric under (row, col) swap
        let mut cells = std::collections::BTreeMap::new();
        for line in corr.lines().skip(1) {
            let parts: Vec<&str> = line.split(',').collect();
            cells.insert((parts[0].to_string(), parts[1].to_string()), parts[2].to_string());
        }
        for ((a, b), rho) in &cells {
            assert_eq!(rho, &cells[&(b.clone(), a.clone())]);
        }
        let loadings = std::fs::read_to_string(&files[2]).unwrap();
        assert!(loadings.starts_with("observed_factor,latent_factor,loading\n"));
        let collapse = std::fs::read_to_string(&files[3]).unwrap();
        assert!(collapse.starts_with("model,series,rating,win_rate\n"));
        // unexplained column equals 100 * (1 - r2_schematic) / 100
        let row = variance.lines().nth(1).unwrap();
        let unexplained: f64 = row.split(',').next_back().unwrap().parse().unwrap();
        assert!(
            (unexplained - (1.0 - report.schematic.r2_schematic)).abs() < 1e-4,
            "{unexplained}"
        );
    }

    #[test]
    fn setting_spec_parses_yaml_with_defaults() {
        let yaml = r#"
name: setting1
judge: synthetic-judge
baseline: model-00
metrics:
  bootstrap_iterations: 50
  seed: 9
"#;
        let spec = SettingSpec::from_yaml(yaml).unwrap();
        assert_eq!(spec.name, "setting1");
        assert_eq!(spec.metrics.bootstrap_iterations, 50);
        assert_eq!(spec.metrics.imputations, 5);
        assert_eq!(spec.criteria.len(), 5);
    }

    #[test]
    fn filters_apply_and_empty_match_errors() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("judgments.jsonl");
        write_synthetic(&synth_config(), &data, None).unwrap();
        let mut spec = setting();
        spec.judge = Some("other-judge".into());
        let err = run_audit(&spec, &data).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Input);
        assert!(err.to_string().contains("filter"));
    }

    #[test]
    fn markdown_rendering_contains_key_sections() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("judgments.jsonl");
        write_synthetic(&synth_config(), &data, None).unwrap();
        let report = run_audit(&setting(), &data).unwrap();
        let md = render_markdown(&report);
        assert!(md.contains("## Schematic adherence"));
        assert!(md.contains("## Psychometric validity"));
        assert!(md.contains("## Ranking"));
        assert!(md.contains("## Rating collapse"));
    }
}
