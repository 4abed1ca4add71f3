//! judge-audit: audit LLM-judged benchmarks from the command line.
//!
//! Exit codes: 0 success, 2 input error, 3 numeric/convergence error,
//! 4 network error (judge-run only).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use audit_core::canon;
use audit_core::error::{AuditError, ErrorKind};
use audit_core::judgment::{
    deviation_rates, load_judgments, write_judgments_jsonl, GroupField, InputFormat,
};
use audit_core::ranking::{bootstrap_ratings, collapse_analysis, BtOptions, RatingTable};
use audit_core::report::{
    emit_plot_data, render_markdown, run_audit, write_report, AuditReport, SettingSpec,
};
use audit_core::synth::SyntheticConfig;

#[derive(Parser)]
#[command(
    name = "judge-audit",
    version,
    about = "Reliability diagnostics for LLM-judged benchmarks"
)]
struct Cli {
    /// Override the seed used by every seeded stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Report format: canonical JSON only, or JSON plus markdown.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Worker threads for data-parallel stages (0 keeps the default).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a judgment file and write it back as normalized JSONL.
    Ingest {
        /// Input judgments (.jsonl or .csv).
        #[arg(long)]
        input: PathBuf,
        /// Normalized JSONL output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional deviation-rate table output (JSON).
        #[arg(long)]
        deviations: Option<PathBuf>,
    },
    /// Run the full audit pipeline from a setting file.
    Audit {
        /// Judgment data (.jsonl or .csv).
        #[arg(long)]
        data: PathBuf,
        /// Setting spec (YAML).
        #[arg(long)]
        setting: PathBuf,
        /// Output directory for report.json (and report.md with --format md).
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Bradley-Terry leaderboard with bootstrap confidence intervals.
    Rank {
        #[arg(long)]
        data: PathBuf,
        /// Baseline model anchored at rating 0.
        #[arg(long)]
        baseline: String,
        /// Verdict column to rank on: "overall" or a criterion name.
        #[arg(long, default_value = "overall")]
        target: String,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        /// Drop ties instead of expanding them to half-weight wins.
        #[arg(long)]
        drop_ties: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Rating-collapse analysis: overall ratings regressed on factor ratings.
    Collapse {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        baseline: String,
        #[arg(long)]
        drop_ties: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Generate a synthetic judgment dataset with ground truth.
    Synth {
        /// Generator config (YAML).
        #[arg(long)]
        config: PathBuf,
        /// Output JSONL path.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar JSON path (defaults to <out>.truth.json).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Submit judgment tasks to an OpenAI-compatible endpoint.
    JudgeRun {
        /// Endpoint config (YAML).
        #[arg(long)]
        config: PathBuf,
        /// Tasks file (JSONL).
        #[arg(long)]
        tasks: PathBuf,
        /// Output judgments (JSONL, appended).
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit plot-data CSVs (and markdown with --format md) from a report.
    Report {
        /// An audit report written by `audit`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

enum CliError {
    Core(AuditError),
    Client(judge_client::ClientError),
    Input(String),
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        CliError::Core(e)
    }
}

impl From<judge_client::ClientError> for CliError {
    fn from(e: judge_client::ClientError) -> Self {
        CliError::Client(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input | ErrorKind::Io => 2,
                ErrorKind::Numeric => 3,
            },
            CliError::Client(e) => {
                if e.is_network() {
                    4
                } else {
                    2
                }
            }
            CliError::Input(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Client(e) => e.to_string(),
            CliError::Input(m) => m.clone(),
        }
    }
}

fn detect_format(path: &Path) -> InputFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => InputFormat::Csv,
        _ => InputFormat::JsonLines,
    }
}

fn read_yaml(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn leaderboard_csv(table: &RatingTable) -> String {
    let mut csv = String::from("model,rating,elo_display,win_rate,ci_low,ci_high\n");
    let fmt = canon::format_float;
    for model in table.models() {
        let (lo, hi) = table
            .ci
            .get(&model)
            .copied()
            .unwrap_or((f64::NAN, f64::NAN));
        csv.push_str(&format!(
            "{model},{},{},{},{},{}\n",
            fmt(table.ratings[&model]),
            fmt(table.elo_display(&model).unwrap_or(f64::NAN)),
            fmt(table.win_rates[&model]),
            fmt(lo),
            fmt(hi),
        ));
    }
    csv
}

fn write_markdown_if_requested(
    format: Format,
    report: &AuditReport,
    out_dir: &Path,
) -> Result<(), CliError> {
    if format == Format::Md {
        let path = out_dir.join("report.md");
        canon::write_atomic(&path, render_markdown(report).as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.jobs > 0 {
        // ignore failure: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global();
    }
    match cli.command {
        Command::Ingest {
            input,
            out,
            deviations,
        } => {
            let set = load_judgments(&input, detect_format(&input))?;
            write_judgments_jsonl(&out, &set)?;
            println!("wrote {} ({} records)", out.display(), set.records.len());
            let table = deviation_rates(&set, &[GroupField::Judge, GroupField::Setting])?;
            if let Some(path) = deviations {
                canon::write_canonical_json(&path, &table.to_json())?;
                println!("wrote {}", path.display());
            }
            println!(
                "flagged fields: {} across {} records",
                set.flagged_field_count(),
                set.records.len()
            );
            Ok(())
        }
        Command::Audit {
            data,
            setting,
            out_dir,
        } => {
            let mut spec = SettingSpec::from_yaml(&read_yaml(&setting)?)?;
            if let Some(seed) = cli.seed {
                spec.metrics.seed = seed;
            }
            std::fs::create_dir_all(&out_dir).map_err(AuditError::from)?;
            let report = run_audit(&spec, &data)?;
            let path = out_dir.join("report.json");
            let digest = write_report(&report, &path)?;
            println!("wrote {} (sha256 {digest})", path.display());
            let mut weights = String::from("criterion,weight\n");
            weights.push_str(&format!(
                "intercept,{}\n",
                canon::format_float(report.schematic.linear_weights[0])
            ));
            for (name, weight) in report
                .schematic
                .criteria
                .iter()
                .zip(report.schematic.linear_weights.iter().skip(1))
            {
                weights.push_str(&format!("{name},{}\n", canon::format_float(*weight)));
            }
            let weights_path = out_dir.join("weights.csv");
            canon::write_atomic(&weights_path, weights.as_bytes())?;
            println!("wrote {}", weights_path.display());
            write_markdown_if_requested(cli.format, &report, &out_dir)?;
            Ok(())
        }
        Command::Rank {
            data,
            baseline,
            target,
            iterations,
            drop_ties,
            out_dir,
        } => {
            let set = load_judgments(&data, detect_format(&data))?;
            let set = match target.as_str() {
                "overall" => set,
                name => {
                    let idx = set
                        .criteria
                        .iter()
                        .position(|c| c.eq_ignore_ascii_case(name))
                        .ok_or_else(|| {
                            CliError::Input(format!(
                                "unknown target {name:?}; use overall or one of {}",
                                set.criteria.join(", ")
                            ))
                        })?;
                    // rank on a factor by substituting it for the overall verdict
                    let mut set = set;
                    for record in set.records.iter_mut() {
                        record.overall_verdict = record.factor_verdicts[idx];
                        record.overall_flag = record.factor_flags[idx];
                    }
                    set
                }
            };
            let options = BtOptions {
                drop_ties,
                ..BtOptions::default()
            };
            let table = bootstrap_ratings(&set, &baseline, iterations, cli.seed.unwrap_or(0), &options)?;
            std::fs::create_dir_all(&out_dir).map_err(AuditError::from)?;
            let json_path = out_dir.join("leaderboard.json");
            canon::write_canonical_json(&json_path, &table)?;
            let csv_path = out_dir.join("leaderboard.csv");
            canon::write_atomic(&csv_path, leaderboard_csv(&table).as_bytes())?;
            println!("wrote {}", json_path.display());
            println!("wrote {}", csv_path.display());
            Ok(())
        }
        Command::Collapse {
            data,
            baseline,
            drop_ties,
            out_dir,
        } => {
            let set = load_judgments(&data, detect_format(&data))?;
            let options = BtOptions {
                drop_ties,
                ..BtOptions::default()
            };
            let report = collapse_analysis(&set, &baseline, &options)?;
            std::fs::create_dir_all(&out_dir).map_err(AuditError::from)?;
            let path = out_dir.join("collapse.json");
            canon::write_canonical_json(&path, &report)?;
            println!("wrote {}", path.display());
            println!(
                "linear R^2 = {}, polynomial R^2 = {}, unexplained = {}%",
                canon::format_float(report.r2_linear),
                canon::format_float(report.r2_polynomial),
                canon::format_float(report.unexplained_percent)
            );
            Ok(())
        }
        Command::Synth { config, out, truth } => {
            let mut spec: SyntheticConfig = serde_yaml::from_str(&read_yaml(&config)?)
                .map_err(|e| CliError::Input(format!("synth config: {e}")))?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let truth_path = truth.unwrap_or_else(|| {
                let mut p = out.clone();
                p.set_extension("truth.json");
                p
            });
            let truth = audit_core::report::write_synthetic(&spec, &out, Some(&truth_path))?;
            println!("wrote {}", out.display());
            println!("wrote {}", truth_path.display());
            println!(
                "analytic R^2 = {}",
                canon::format_float(truth.analytic_r2)
            );
            Ok(())
        }
        Command::JudgeRun { config, tasks, out } => {
            let endpoint = judge_client::EndpointConfig::from_yaml(&read_yaml(&config)?)?;
            let tasks = judge_client::load_tasks(&tasks)?;
            let summary = judge_client::run_tasks(&tasks, &endpoint, &out)?;
            println!(
                "wrote {} records to {} ({} failed)",
                summary.written,
                out.display(),
                summary.failures.len()
            );
            for (question_id, error) in &summary.failures {
                eprintln!("task {question_id}: {error}");
            }
            if let Some((_, first)) = summary.failures.into_iter().next() {
                return Err(first.into());
            }
            Ok(())
        }
        Command::Report { report, out_dir } => {
            let text = std::fs::read_to_string(&report)
                .map_err(|e| CliError::Input(format!("{}: {e}", report.display())))?;
            let report: AuditReport = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("report parse: {e}")))?;
            let files = emit_plot_data(&report, &out_dir)?;
            for file in files {
                println!("wrote {}", file.display());
            }
            write_markdown_if_requested(cli.format, &report, &out_dir)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
