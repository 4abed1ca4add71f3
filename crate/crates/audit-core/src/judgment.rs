//! Judgment records: verdict parsing, file ingestion, deviation accounting,
//! and the numeric sample matrix handed to the analysis modules.
//!
//! A verdict field can be in one of three states:
//! * observed — a label was extracted;
//! * deviation — extraction failed; the judgment exists but expresses no
//!   preference, so the numeric view records the Tie midpoint (3) and the
//!   field is counted in deviation rates;
//! * missing — the judgment is incomplete (no extraction was attempted).
//!   Missing cells also default to 3 in the plain numeric view but are the
//!   targets of multiple imputation.
//!
//! On load, a row that carries an explicit `deviation_flags` array is taken
//! at its word: absent verdicts not listed there are missing (incomplete).
//! Rows without the field get the conservative default: every absent or
//! unparseable verdict is a deviation.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use regex::Regex;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{AuditError, Result};

/// The rubric's five criteria, in rubric order.
pub const RUBRIC_CRITERIA: [&str; 5] = [
    "Correctness",
    "Completeness",
    "Safety",
    "Conciseness",
    "Style",
];

/// Likert scale width for the 1-5 verdict scale.
pub const DEFAULT_SCORE_RANGE: f64 = 4.0;

/// Maximum input file size accepted by the readers.
pub const MAX_FILE_BYTES: u64 = 2 * 1024 * 1024 * 1024;

/// Five-level pairwise preference label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictLabel {
    MuchBetterA,
    BetterA,
    Tie,
    BetterB,
    MuchBetterB,
}

impl VerdictLabel {
    pub const ALL: [VerdictLabel; 5] = [
        VerdictLabel::MuchBetterA,
        VerdictLabel::BetterA,
        VerdictLabel::Tie,
        VerdictLabel::BetterB,
        VerdictLabel::MuchBetterB,
    ];

    /// Canonical double-bracket form used for overall verdicts.
    pub fn canonical(&self) -> &'static str {
        match self {
            VerdictLabel::MuchBetterA => "[[A>>B]]",
            VerdictLabel::BetterA => "[[A>B]]",
            VerdictLabel::Tie => "[[A=B]]",
            VerdictLabel::BetterB => "[[B>A]]",
            VerdictLabel::MuchBetterB => "[[B>>A]]",
        }
    }

    /// Double-paren form used for factor verdicts.
    pub fn factor_form(&self) -> &'static str {
        match self {
            VerdictLabel::MuchBetterA => "((A>>B))",
            VerdictLabel::BetterA => "((A>B))",
            VerdictLabel::Tie => "((A=B))",
            VerdictLabel::BetterB => "((B>A))",
            VerdictLabel::MuchBetterB => "((B>>A))",
        }
    }

    fn from_token(token: &str) -> Option<VerdictLabel> {
        let compact: String = token.chars().filter(|c| !c.is_whitespace()).collect();
        match compact.as_str() {
            "A>>B" => Some(VerdictLabel::MuchBetterA),
            "A>B" => Some(VerdictLabel::BetterA),
            "A=B" | "B=A" => Some(VerdictLabel::Tie),
            "B>A" => Some(VerdictLabel::BetterB),
            "B>>A" => Some(VerdictLabel::MuchBetterB),
            _ => None,
        }
    }

    /// Parse a verdict string, accepting the canonical `[[..]]` form, the
    /// factor `((..))` form, or the bare token.
    pub fn parse_str(s: &str) -> Option<VerdictLabel> {
        let t = s.trim();
        let inner = t
            .strip_prefix("[[")
            .and_then(|r| r.strip_suffix("]]"))
            .or_else(|| t.strip_prefix("((").and_then(|r| r.strip_suffix("))")))
            .unwrap_or(t);
        VerdictLabel::from_token(inner)
    }
}

/// Likert mapping: 1 favors assistant A, 3 is a tie, 5 favors assistant B.
pub fn verdict_to_likert(label: VerdictLabel) -> f64 {
    match label {
        VerdictLabel::MuchBetterA => 1.0,
        VerdictLabel::BetterA => 2.0,
        VerdictLabel::Tie => 3.0,
        VerdictLabel::BetterB => 4.0,
        VerdictLabel::MuchBetterB => 5.0,
    }
}

/// Inverse of [`verdict_to_likert`] for integer scores 1..=5.
pub fn likert_to_verdict(score: u8) -> Option<VerdictLabel> {
    match score {
        1 => Some(VerdictLabel::MuchBetterA),
        2 => Some(VerdictLabel::BetterA),
        3 => Some(VerdictLabel::Tie),
        4 => Some(VerdictLabel::BetterB),
        5 => Some(VerdictLabel::MuchBetterB),
        _ => None,
    }
}

/// Which verdict pattern to look for in judge text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictMarker {
    /// `Criterion: ((A>B))` factor lines.
    FactorParens,
    /// `[[A>B]]` final-verdict labels.
    OverallBrackets,
}

const TOKEN_PATTERN: &str = r"(A\s*>>\s*B|A\s*>\s*B|A\s*=\s*B|B\s*>>\s*A|B\s*>\s*A)";

fn factor_regex(criterion: &str) -> Regex {
    let pat = format!(
        r"(?i){}\s*:?\s*\(\(\s*{}\s*\)\)",
        regex::escape(criterion),
        TOKEN_PATTERN
    );
    Regex::new(&pat).expect("static verdict pattern")
}

fn overall_regex() -> Regex {
    let pat = format!(r"\[\[\s*{TOKEN_PATTERN}\s*\]\]");
    Regex::new(&pat).expect("static verdict pattern")
}

/// Extract the last matching verdict from judge output.
///
/// Judges often restate partial verdicts while reasoning; the template puts
/// the final label at the end, so the last occurrence wins. `None` means
/// extraction failed and the caller records a deviation.
pub fn parse_verdict(
    text: &str,
    marker: VerdictMarker,
    criterion: Option<&str>,
) -> Option<VerdictLabel> {
    let re = match marker {
        VerdictMarker::FactorParens => factor_regex(criterion?),
        VerdictMarker::OverallBrackets => overall_regex(),
    };
    re.captures_iter(text)
        .last()
        .and_then(|cap| VerdictLabel::from_token(cap.get(1).map(|m| m.as_str())?))
}

/// Precompiled verdict patterns for bulk extraction.
pub struct VerdictParser {
    factor_res: Vec<(String, Regex)>,
    overall_re: Regex,
}

impl VerdictParser {
    pub fn new(criteria: &[String]) -> VerdictParser {
        VerdictParser {
            factor_res: criteria
                .iter()
                .map(|c| (c.clone(), factor_regex(c)))
                .collect(),
            overall_re: overall_regex(),
        }
    }

    pub fn factor(&self, index: usize, text: &str) -> Option<VerdictLabel> {
        self.factor_res[index]
            .1
            .captures_iter(text)
            .last()
            .and_then(|cap| VerdictLabel::from_token(cap.get(1).map(|m| m.as_str())?))
    }

    pub fn overall(&self, text: &str) -> Option<VerdictLabel> {
        self.overall_re
            .captures_iter(text)
            .last()
            .and_then(|cap| VerdictLabel::from_token(cap.get(1).map(|m| m.as_str())?))
    }
}

/// One pairwise judgment with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgmentRecord {
    pub question_id: String,
    pub model_a: String,
    pub model_b: String,
    pub judge: String,
    pub setting: String,
    /// Per-criterion verdicts, aligned with the owning set's criteria order.
    pub factor_verdicts: Vec<Option<VerdictLabel>>,
    pub overall_verdict: Option<VerdictLabel>,
    /// Deviation flag per criterion (extraction failed).
    pub factor_flags: Vec<bool>,
    pub overall_flag: bool,
    pub raw_text: Option<String>,
}

impl JudgmentRecord {
    /// Observation-series key: one series per (model pair, judge, setting).
    pub fn observation_key(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.model_a, self.model_b, self.judge, self.setting
        )
    }
}

/// An ordered collection of judgments sharing one criteria list.
#[derive(Debug, Clone)]
pub struct JudgmentSet {
    pub records: Vec<JudgmentRecord>,
    pub criteria: Vec<String>,
    pub score_range: f64,
}

impl JudgmentSet {
    pub fn new(records: Vec<JudgmentRecord>, criteria: Vec<String>, score_range: f64) -> Result<JudgmentSet> {
        if score_range <= 0.0 {
            return Err(AuditError::InvalidInput(format!(
                "score_range must be positive, got {score_range}"
            )));
        }
        for (i, rec) in records.iter().enumerate() {
            if rec.factor_verdicts.len() != criteria.len() || rec.factor_flags.len() != criteria.len() {
                return Err(AuditError::MalformedRow {
                    row: i + 1,
                    message: format!(
                        "record has {} factor verdicts, set has {} criteria",
                        rec.factor_verdicts.len(),
                        criteria.len()
                    ),
                });
            }
        }
        Ok(JudgmentSet {
            records,
            criteria,
            score_range,
        })
    }

    pub fn with_rubric(records: Vec<JudgmentRecord>) -> Result<JudgmentSet> {
        JudgmentSet::new(
            records,
            RUBRIC_CRITERIA.iter().map(|s| s.to_string()).collect(),
            DEFAULT_SCORE_RANGE,
        )
    }

    pub fn k(&self) -> usize {
        self.criteria.len()
    }

    /// Total flagged fields across all records (criteria plus overall).
    pub fn flagged_field_count(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.factor_flags.iter().filter(|f| **f).count() + usize::from(r.overall_flag))
            .sum()
    }
}

/// Input formats understood by [`load_judgments`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    JsonLines,
    Csv,
}

#[derive(Deserialize)]
struct RawRow {
    question_id: String,
    model_a: String,
    model_b: String,
    judge: String,
    setting: String,
    #[serde(default)]
    factor_verdicts: Option<BTreeMap<String, Option<String>>>,
    #[serde(default)]
    overall_verdict: Option<String>,
    #[serde(default)]
    deviation_flags: Option<Vec<String>>,
    #[serde(default)]
    raw_text: Option<String>,
}

fn criterion_index(name: &str) -> Result<usize> {
    RUBRIC_CRITERIA
        .iter()
        .position(|c| c.eq_ignore_ascii_case(name))
        .ok_or_else(|| AuditError::UnknownCriterion {
            found: name.to_string(),
            expected: RUBRIC_CRITERIA.join(", "),
        })
}

fn record_from_raw(raw: RawRow, row: usize, parser: &VerdictParser) -> Result<JudgmentRecord> {
    let k = RUBRIC_CRITERIA.len();
    let mut verdicts: Vec<Option<VerdictLabel>> = vec![None; k];
    let mut flags = vec![false; k];

    if let Some(map) = &raw.factor_verdicts {
        for (name, value) in map {
            let idx = criterion_index(name).map_err(|e| match e {
                AuditError::UnknownCriterion { found, expected } => AuditError::MalformedRow {
                    row,
                    message: format!("unknown criterion {found:?}; expected one of {expected}"),
                },
                other => other,
            })?;
            if let Some(text) = value {
                verdicts[idx] = VerdictLabel::parse_str(text);
                if verdicts[idx].is_none() {
                    return Err(AuditError::MalformedRow {
                        row,
                        message: format!("unrecognized verdict string {text:?} for {name}"),
                    });
                }
            }
        }
    }
    let mut overall = match &raw.overall_verdict {
        Some(text) => match VerdictLabel::parse_str(text) {
            Some(v) => Some(v),
            None => {
                return Err(AuditError::MalformedRow {
                    row,
                    message: format!("unrecognized overall verdict string {text:?}"),
                })
            }
        },
        None => None,
    };

    // Fall back to extraction from raw_text for fields the row did not carry.
    if let Some(text) = &raw.raw_text {
        for (i, verdict) in verdicts.iter_mut().enumerate() {
            if verdict.is_none() {
                *verdict = parser.factor(i, text);
            }
        }
        if overall.is_none() {
            overall = parser.overall(text);
        }
    }

    let mut overall_flag = false;
    match &raw.deviation_flags {
        Some(listed) => {
            // The writer's flag list is authoritative: absent verdicts not
            // listed here are incomplete (imputation targets), not failures.
            for name in listed {
                if name.eq_ignore_ascii_case("overall") {
                    overall_flag = true;
                } else {
                    let idx = criterion_index(name).map_err(|_| AuditError::MalformedRow {
                        row,
                        message: format!(
                            "unknown deviation flag {name:?}; expected one of {} or overall",
                            RUBRIC_CRITERIA.join(", ")
                        ),
                    })?;
                    flags[idx] = true;
                }
            }
        }
        None => {
            // No explicit flag list: every absent verdict is a deviation.
            for i in 0..k {
                if verdicts[i].is_none() {
                    flags[i] = true;
                }
            }
            if overall.is_none() {
                overall_flag = true;
            }
        }
    }

    // A flagged field expresses no preference; drop any stale verdict.
    for i in 0..k {
        if flags[i] {
            verdicts[i] = None;
        }
    }
    if overall_flag {
        overall = None;
    }

    Ok(JudgmentRecord {
        question_id: raw.question_id,
        model_a: raw.model_a,
        model_b: raw.model_b,
        judge: raw.judge,
        setting: raw.setting,
        factor_verdicts: verdicts,
        overall_verdict: overall,
        factor_flags: flags,
        overall_flag,
        raw_text: raw.raw_text,
    })
}

fn check_file_size(path: &Path) -> Result<()> {
    let meta = std::fs::metadata(path)?;
    if meta.len() > MAX_FILE_BYTES {
        return Err(AuditError::FileTooLarge {
            path: path.display().to_string(),
            size: meta.len(),
        });
    }
    Ok(())
}

/// Load a judgment file. Absent or unparseable verdicts are flagged as
/// deviations (and default to Tie in numeric views) unless the row carries
/// an explicit `deviation_flags` list; see the module docs.
pub fn load_judgments(path: &Path, format: InputFormat) -> Result<JudgmentSet> {
    check_file_size(path)?;
    let text = std::fs::read_to_string(path)?;
    let criteria: Vec<String> = RUBRIC_CRITERIA.iter().map(|s| s.to_string()).collect();
    let parser = VerdictParser::new(&criteria);
    let mut records = Vec::new();
    match format {
        InputFormat::JsonLines => {
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRow =
                    serde_json::from_str(line).map_err(|e| AuditError::MalformedRow {
                        row: lineno + 1,
                        message: e.to_string(),
                    })?;
                records.push(record_from_raw(raw, lineno + 1, &parser)?);
            }
        }
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            let headers = reader.headers()?.clone();
            for (idx, row) in reader.records().enumerate() {
                let row = row?;
                let raw = raw_from_csv(&headers, &row, idx + 2)?;
                records.push(record_from_raw(raw, idx + 2, &parser)?);
            }
        }
    }
    if records.is_empty() {
        return Err(AuditError::InvalidInput(format!(
            "no judgment records in {}",
            path.display()
        )));
    }
    JudgmentSet::with_rubric(records)
}

fn raw_from_csv(headers: &csv::StringRecord, row: &csv::StringRecord, rowno: usize) -> Result<RawRow> {
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    for (h, v) in headers.iter().zip(row.iter()) {
        fields.insert(h.to_ascii_lowercase(), v.to_string());
    }
    let required = |name: &str| -> Result<String> {
        fields
            .get(name)
            .filter(|v| !v.is_empty())
            .cloned()
            .ok_or_else(|| AuditError::MalformedRow {
                row: rowno,
                message: format!("missing required field {name:?}"),
            })
    };
    let mut factor_verdicts = BTreeMap::new();
    for name in RUBRIC_CRITERIA {
        let cell = fields.get(&name.to_ascii_lowercase()).cloned();
        factor_verdicts.insert(
            name.to_string(),
            cell.filter(|c| !c.is_empty()),
        );
    }
    for key in fields.keys() {
        let known = [
            "question_id",
            "model_a",
            "model_b",
            "judge",
            "setting",
            "overall",
            "overall_verdict",
            "raw_text",
        ];
        if !known.contains(&key.as_str())
            && !RUBRIC_CRITERIA
                .iter()
                .any(|c| c.eq_ignore_ascii_case(key))
        {
            return Err(AuditError::MalformedRow {
                row: rowno,
                message: format!(
                    "unknown column {key:?}; criterion columns must be one of {}",
                    RUBRIC_CRITERIA.join(", ")
                ),
            });
        }
    }
    Ok(RawRow {
        question_id: required("question_id")?,
        model_a: required("model_a")?,
        model_b: required("model_b")?,
        judge: required("judge")?,
        setting: required("setting")?,
        factor_verdicts: Some(factor_verdicts),
        overall_verdict: fields
            .get("overall")
            .or_else(|| fields.get("overall_verdict"))
            .filter(|v| !v.is_empty())
            .cloned(),
        deviation_flags: None,
        raw_text: fields.get("raw_text").filter(|v| !v.is_empty()).cloned(),
    })
}

/// Serialize a record to the JSONL object layout used by the readers.
pub fn record_to_json(record: &JudgmentRecord, criteria: &[String]) -> Value {
    let mut verdicts = serde_json::Map::new();
    let mut flags: Vec<String> = Vec::new();
    for (i, name) in criteria.iter().enumerate() {
        verdicts.insert(
            name.clone(),
            record.factor_verdicts[i]
                .map(|v| Value::String(v.canonical().to_string()))
                .unwrap_or(Value::Null),
        );
        if record.factor_flags[i] {
            flags.push(name.clone());
        }
    }
    if record.overall_flag {
        flags.push("overall".to_string());
    }
    json!({
        "question_id": record.question_id,
        "model_a": record.model_a,
        "model_b": record.model_b,
        "judge": record.judge,
        "setting": record.setting,
        "factor_verdicts": Value::Object(verdicts),
        "overall_verdict": record.overall_verdict.map(|v| Value::String(v.canonical().to_string())).unwrap_or(Value::Null),
        "deviation_flags": flags,
        "raw_text": record.raw_text.clone().map(Value::String).unwrap_or(Value::Null),
    })
}

/// Write a set as JSONL with one object per record.
pub fn write_judgments_jsonl(path: &Path, set: &JudgmentSet) -> Result<()> {
    let mut out = String::new();
    for record in &set.records {
        out.push_str(&serde_json::to_string(&record_to_json(record, &set.criteria))?);
        out.push('\n');
    }
    crate::canon::write_atomic(path, out.as_bytes())
}

/// Grouping keys for deviation-rate tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupField {
    Judge,
    Setting,
}

/// One row of the deviation-rate table.
#[derive(Debug, Clone)]
pub struct DeviationRow {
    pub judge: Option<String>,
    pub setting: Option<String>,
    pub total: usize,
    /// Flag counts per criterion, aligned with the set's criteria.
    pub criterion_counts: Vec<usize>,
    pub overall_count: usize,
}

impl DeviationRow {
    pub fn criterion_rates(&self) -> Vec<f64> {
        self.criterion_counts
            .iter()
            .map(|c| 100.0 * *c as f64 / self.total as f64)
            .collect()
    }

    pub fn overall_rate(&self) -> f64 {
        100.0 * self.overall_count as f64 / self.total as f64
    }

    /// Mean of the per-criterion percentages (the table's Average column).
    pub fn average_rate(&self) -> f64 {
        let rates = self.criterion_rates();
        rates.iter().sum::<f64>() / rates.len() as f64
    }
}

/// Deviation-rate table grouped by judge and/or setting.
#[derive(Debug, Clone)]
pub struct DeviationTable {
    pub criteria: Vec<String>,
    pub rows: Vec<DeviationRow>,
}

impl DeviationTable {
    /// Total flagged fields across all rows (criteria plus overall).
    pub fn total_flagged(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.criterion_counts.iter().sum::<usize>() + r.overall_count)
            .sum()
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut obj = serde_json::Map::new();
                if let Some(j) = &r.judge {
                    obj.insert("judge".into(), json!(j));
                }
                if let Some(s) = &r.setting {
                    obj.insert("setting".into(), json!(s));
                }
                for (name, rate) in self.criteria.iter().zip(r.criterion_rates()) {
                    obj.insert(name.clone(), json!(rate));
                }
                obj.insert("overall".into(), json!(r.overall_rate()));
                obj.insert("average".into(), json!(r.average_rate()));
                obj.insert("judgments".into(), json!(r.total));
                Value::Object(obj)
            })
            .collect();
        json!({ "criteria": self.criteria, "rows": rows })
    }
}

/// Percentage of extraction failures per group and criterion, mirroring the
/// judge/setting deviation table layout (five criteria plus an Average).
pub fn deviation_rates(set: &JudgmentSet, group_by: &[GroupField]) -> Result<DeviationTable> {
    if set.records.is_empty() {
        return Err(AuditError::InvalidInput("empty judgment set".into()));
    }
    let by_judge = group_by.contains(&GroupField::Judge);
    let by_setting = group_by.contains(&GroupField::Setting);
    let mut groups: BTreeMap<(Option<String>, Option<String>), DeviationRow> = BTreeMap::new();
    for record in &set.records {
        let key = (
            by_judge.then(|| record.judge.clone()),
            by_setting.then(|| record.setting.clone()),
        );
        let row = groups.entry(key.clone()).or_insert_with(|| DeviationRow {
            judge: key.0.clone(),
            setting: key.1.clone(),
            total: 0,
            criterion_counts: vec![0; set.k()],
            overall_count: 0,
        });
        row.total += 1;
        for (i, flag) in record.factor_flags.iter().enumerate() {
            if *flag {
                row.criterion_counts[i] += 1;
            }
        }
        if record.overall_flag {
            row.overall_count += 1;
        }
    }
    Ok(DeviationTable {
        criteria: set.criteria.clone(),
        rows: groups.into_values().collect(),
    })
}

/// Numeric design matrix of factor scores and overall scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    /// m x k factor scores, each in [1, 5].
    pub factors: DMatrix<f64>,
    /// Length-m overall scores in [1, 5].
    pub overall: DVector<f64>,
    pub question_ids: Vec<String>,
    /// Row-major m x (k+1) mask; column k is the overall score.
    pub imputed_mask: Vec<bool>,
    /// Original record index behind each row (rows can be dropped).
    pub record_indices: Vec<usize>,
}

impl SampleMatrix {
    pub fn m(&self) -> usize {
        self.factors.nrows()
    }

    pub fn k(&self) -> usize {
        self.factors.ncols()
    }

    pub fn is_imputed(&self, row: usize, col: usize) -> bool {
        self.imputed_mask[row * (self.k() + 1) + col]
    }

    pub fn imputed_count(&self) -> usize {
        self.imputed_mask.iter().filter(|b| **b).count()
    }
}

/// Build the plain numeric view: one row per record, flagged and missing
/// fields defaulted to the Tie midpoint, nothing imputed.
pub fn build_sample_matrix(set: &JudgmentSet) -> Result<SampleMatrix> {
    if set.records.is_empty() {
        return Err(AuditError::InvalidInput("empty judgment set".into()));
    }
    let m = set.records.len();
    let k = set.k();
    let mut factors = DMatrix::zeros(m, k);
    let mut overall = DVector::zeros(m);
    let mut question_ids = Vec::with_capacity(m);
    for (i, record) in set.records.iter().enumerate() {
        for j in 0..k {
            factors[(i, j)] = record.factor_verdicts[j]
                .map(verdict_to_likert)
                .unwrap_or(3.0);
        }
        overall[i] = record
            .overall_verdict
            .map(verdict_to_likert)
            .unwrap_or(3.0);
        question_ids.push(record.question_id.clone());
    }
    Ok(SampleMatrix {
        factors,
        overall,
        question_ids,
        imputed_mask: vec![false; m * (k + 1)],
        record_indices: (0..m).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(question: &str, overall: Option<VerdictLabel>) -> JudgmentRecord {
        JudgmentRecord {
            question_id: question.to_string(),
            model_a: "base".into(),
            model_b: "cand".into(),
            judge: "judge-1".into(),
            setting: "setting1".into(),
            factor_verdicts: vec![Some(VerdictLabel::Tie); 5],
            overall_verdict: overall,
            factor_flags: vec![false; 5],
            overall_flag: overall.is_none(),
            raw_text: None,
        }
    }

    #[test]
    fn canonical_round_trip_covers_likert_scale() {
        let mut seen = Vec::new();
        for label in VerdictLabel::ALL {
            let parsed = parse_verdict(label.canonical(), VerdictMarker::OverallBrackets, None)
                .expect("canonical string parses");
            assert_eq!(parsed, label);
            seen.push(verdict_to_likert(parsed));
        }
        assert_eq!(seen, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn parse_template_examples() {
        assert_eq!(
            parse_verdict(
                "My final verdict is tie: [[A=B]]",
                VerdictMarker::OverallBrackets,
                None
            ),
            Some(VerdictLabel::Tie)
        );
        assert_eq!(
            parse_verdict(
                "Completeness: ((A>>B))",
                VerdictMarker::FactorParens,
                Some("Completeness")
            ),
            Some(VerdictLabel::MuchBetterA)
        );
        assert_eq!(
            parse_verdict("no verdict here", VerdictMarker::OverallBrackets, None),
            None
        );
    }

    #[test]
    fn last_occurrence_wins() {
        let text = "Leaning [[A>B]] at first... My final verdict is [[B>>A]]";
        assert_eq!(
            parse_verdict(text, VerdictMarker::OverallBrackets, None),
            Some(VerdictLabel::MuchBetterB)
        );
        let text = "Style: ((A=B)) ... revised. Style: ((B>A))";
        assert_eq!(
            parse_verdict(text, VerdictMarker::FactorParens, Some("Style")),
            Some(VerdictLabel::BetterB)
        );
    }

    #[test]
    fn factor_parse_is_criterion_specific() {
        let text = "Correctness: ((A>B))\nStyle: ((B>A))";
        assert_eq!(
            parse_verdict(text, VerdictMarker::FactorParens, Some("Correctness")),
            Some(VerdictLabel::BetterA)
        );
        assert_eq!(
            parse_verdict(text, VerdictMarker::FactorParens, Some("Safety")),
            None
        );
    }

    #[test]
    fn build_matrix_defaults_and_bounds() {
        let mut rec = record("q1", Some(VerdictLabel::Tie));
        rec.factor_verdicts[0] = Some(VerdictLabel::MuchBetterB);
        let set = JudgmentSet::with_rubric(vec![rec, record("q2", None)]).unwrap();
        let sample = build_sample_matrix(&set).unwrap();
        assert_eq!(sample.m(), 2);
        assert_eq!(sample.factors[(0, 0)], 5.0);
        assert_eq!(sample.overall[0], 3.0);
        // flagged overall defaults to the midpoint, not an imputation
        assert_eq!(sample.overall[1], 3.0);
        assert!(!sample.is_imputed(1, 5));
        assert!(sample.factors.iter().all(|v| (1.0..=5.0).contains(v)));
    }

    #[test]
    fn deviation_rates_reproduce_flag_counts() {
        let mut records = Vec::new();
        for i in 0..1000 {
            let mut r = record(&format!("q{i}"), Some(VerdictLabel::Tie));
            if i == 0 {
                r.factor_flags[2] = true;
                r.factor_verdicts[2] = None;
            }
            records.push(r);
        }
        let set = JudgmentSet::with_rubric(records).unwrap();
        let table =
            deviation_rates(&set, &[GroupField::Judge, GroupField::Setting]).unwrap();
        assert_eq!(table.rows.len(), 1);
        let row = &table.rows[0];
        assert_eq!(row.judge.as_deref(), Some("judge-1"));
        assert_eq!(row.setting.as_deref(), Some("setting1"));
        assert!((row.criterion_rates()[2] - 0.1).abs() < 1e-12);
        assert!((row.average_rate() - 0.02).abs() < 1e-12);
        assert_eq!(table.total_flagged(), set.flagged_field_count());
    }

    #[test]
    fn deviation_rates_all_flagged() {
        let records: Vec<JudgmentRecord> = (0..4)
            .map(|i| {
                let mut r = record(&format!("q{i}"), None);
                r.factor_flags = vec![true; 5];
                r.factor_verdicts = vec![None; 5];
                r
            })
            .collect();
        let set = JudgmentSet::with_rubric(records).unwrap();
        let table = deviation_rates(&set, &[]).unwrap();
        assert_eq!(table.rows.len(), 1);
        for rate in table.rows[0].criterion_rates() {
            assert_eq!(rate, 100.0);
        }
        assert_eq!(table.rows[0].overall_rate(), 100.0);
    }

    #[test]
    fn dropping_raw_text_changes_nothing_numeric() {
        let mut with_text = record("q1", Some(VerdictLabel::BetterA));
        with_text.raw_text = Some("My final verdict is [[A>B]]".into());
        let mut without = with_text.clone();
        without.raw_text = None;
        let set_a = JudgmentSet::with_rubric(vec![with_text]).unwrap();
        let set_b = JudgmentSet::with_rubric(vec![without]).unwrap();
        let ma = build_sample_matrix(&set_a).unwrap();
        let mb = build_sample_matrix(&set_b).unwrap();
        assert_eq!(ma.factors, mb.factors);
        assert_eq!(ma.overall, mb.overall);
    }
}
