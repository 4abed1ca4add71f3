//! Data acquisition: render the pairwise judge prompt, submit it to an
//! OpenAI-compatible chat endpoint, and persist the parsed judgments as
//! records the analysis pipeline ingests directly.
//!
//! This crate is the toolkit's only networked component; nothing in the
//! analysis path touches it.

pub mod template;

use std::io::Write;
use std::path::Path;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use audit_core::judgment::{JudgmentRecord, VerdictParser, RUBRIC_CRITERIA};

/// Rough token estimate: four characters per token.
const CHARS_PER_TOKEN: usize = 4;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("prompt estimate {estimated} tokens exceeds the {budget}-token budget")]
    PromptTooLarge { estimated: usize, budget: usize },

    #[error("api key environment variable {0} is not set")]
    MissingKey(String),

    #[error("endpoint returned HTTP {status} (not retryable)")]
    Http { status: u16 },

    #[error("transport failure after {attempts} attempts for task {question_id}: {message}")]
    Exhausted {
        question_id: String,
        attempts: u32,
        message: String,
    },

    #[error("malformed endpoint reply: {0}")]
    BadReply(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl ClientError {
    /// True for failures that map to the network exit code.
    pub fn is_network(&self) -> bool {
        matches!(
            self,
            ClientError::Http { .. } | ClientError::Exhausted { .. } | ClientError::BadReply(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

/// Where and how to reach the judge.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// The key is read from this environment variable, never from files.
    pub api_key_env: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
    /// Toggles a template suffix asking for explicit reasoning and nothing
    /// else; activation details differ per provider.
    pub reasoning_enabled: bool,
    /// Prompt budget in estimated tokens, checked before any network call.
    pub prompt_budget_tokens: usize,
    /// Issue one prompt per criterion instead of a single pass.
    pub one_at_a_time: bool,
    /// In-flight request cap for batch runs.
    pub concurrency: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000/v1".to_string(),
            model: "judge".to_string(),
            api_key_env: "JUDGE_API_KEY".to_string(),
            temperature: 0.0,
            max_retries: 3,
            timeout_secs: 120,
            reasoning_enabled: false,
            prompt_budget_tokens: 24_000,
            one_at_a_time: false,
            concurrency: 4,
        }
    }
}

impl EndpointConfig {
    pub fn from_yaml(text: &str) -> Result<EndpointConfig> {
        serde_yaml::from_str(text).map_err(|e| ClientError::Config(e.to_string()))
    }
}

/// One pairwise judging job.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgmentTask {
    pub question_id: String,
    pub question_text: String,
    pub response_a: String,
    pub response_b: String,
    pub judge: String,
    pub setting: String,
}

fn validate_task(task: &JudgmentTask) -> Result<()> {
    if task.response_a.is_empty() || task.response_b.is_empty() {
        return Err(ClientError::InvalidTask(format!(
            "task {}: both responses must be non-empty",
            task.question_id
        )));
    }
    Ok(())
}

fn budget_check(prompt: &str, budget_tokens: usize) -> Result<()> {
    let estimated = prompt.len() / CHARS_PER_TOKEN;
    if estimated > budget_tokens {
        return Err(ClientError::PromptTooLarge {
            estimated,
            budget: budget_tokens,
        });
    }
    Ok(())
}

/// Render the full judge prompt for a task. The criteria appear in rubric
/// order; `token_budget` (estimated at four characters per token) is
/// enforced here, before any network call.
pub fn render_template(task: &JudgmentTask, token_budget: Option<usize>) -> Result<String> {
    validate_task(task)?;
    let prompt = template::JUDGE_TEMPLATE
        .replace("{question}", &task.question_text)
        .replace("{response_a}", &task.response_a)
        .replace("{response_b}", &task.response_b);
    if let Some(budget) = token_budget {
        budget_check(&prompt, budget)?;
    }
    Ok(prompt)
}

/// Render the focused single-criterion prompt (one-at-a-time ablation).
pub fn render_single_criterion(
    task: &JudgmentTask,
    criterion: &str,
    token_budget: Option<usize>,
) -> Result<String> {
    validate_task(task)?;
    let description = template::criterion_description(criterion).ok_or_else(|| {
        ClientError::InvalidTask(format!("unknown criterion {criterion:?}"))
    })?;
    let prompt = template::SINGLE_CRITERION_TEMPLATE
        .replace("{criterion_description}", description)
        .replace("{criterion}", criterion)
        .replace("{question}", &task.question_text)
        .replace("{response_a}", &task.response_a)
        .replace("{response_b}", &task.response_b);
    if let Some(budget) = token_budget {
        budget_check(&prompt, budget)?;
    }
    Ok(prompt)
}

fn agent(config: &EndpointConfig) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
        .build()
        .into()
}

fn chat_once(
    agent: &ureq::Agent,
    config: &EndpointConfig,
    api_key: &str,
    prompt: &str,
) -> std::result::Result<String, ChatFailure> {
    let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
    let body = json!({
        "model": config.model,
        "temperature": config.temperature,
        "messages": [{"role": "user", "content": prompt}],
    });
    let response = agent
        .post(&url)
        .header("authorization", &format!("Bearer {api_key}"))
        .send_json(&body);
    let mut response = match response {
        Ok(r) => r,
        Err(ureq::Error::StatusCode(status)) => {
            if (400..500).contains(&status) {
                return Err(ChatFailure::Fatal(ClientError::Http { status }));
            }
            return Err(ChatFailure::Retryable(format!("HTTP {status}")));
        }
        Err(e) => return Err(ChatFailure::Retryable(e.to_string())),
    };
    let value: serde_json::Value = response
        .body_mut()
        .read_json()
        .map_err(|e| ChatFailure::Retryable(format!("body read: {e}")))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(|s| s.to_string())
        .ok_or_else(|| {
            ChatFailure::Fatal(ClientError::BadReply(
                "no choices[0].message.content in reply".to_string(),
            ))
        })
}

enum ChatFailure {
    Retryable(String),
    Fatal(ClientError),
}

fn chat_with_retries(
    agent: &ureq::Agent,
    config: &EndpointConfig,
    api_key: &str,
    prompt: &str,
    question_id: &str,
) -> Result<String> {
    let attempts = config.max_retries.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        match chat_once(agent, config, api_key, prompt) {
            Ok(content) => return Ok(content),
            Err(ChatFailure::Fatal(e)) => return Err(e),
            Err(ChatFailure::Retryable(message)) => {
                last = message;
                if attempt + 1 < attempts {
                    std::thread::sleep(Duration::from_millis(100 << attempt.min(6)));
                }
            }
        }
    }
    Err(ClientError::Exhausted {
        question_id: question_id.to_string(),
        attempts,
        message: last,
    })
}

fn record_from_reply(task: &JudgmentTask, raw_text: String) -> JudgmentRecord {
    let criteria: Vec<String> = RUBRIC_CRITERIA.iter().map(|s| s.to_string()).collect();
    let parser = VerdictParser::new(&criteria);
    let verdicts: Vec<_> = (0..criteria.len())
        .map(|i| parser.factor(i, &raw_text))
        .collect();
    let overall = parser.overall(&raw_text);
    JudgmentRecord {
        question_id: task.question_id.clone(),
        model_a: "assistant-a".to_string(),
        model_b: "assistant-b".to_string(),
        judge: task.judge.clone(),
        setting: task.setting.clone(),
        factor_flags: verdicts.iter().map(|v| v.is_none()).collect(),
        overall_flag: overall.is_none(),
        factor_verdicts: verdicts,
        overall_verdict: overall,
        raw_text: Some(raw_text),
    }
}

/// Submit one task and parse the reply. Extraction failures become
/// deviation flags, not errors; transport failures retry with exponential
/// backoff and never leave a partial record.
pub fn request_judgment(task: &JudgmentTask, config: &EndpointConfig) -> Result<JudgmentRecord> {
    let api_key = std::env::var(&config.api_key_env)
        .map_err(|_| ClientError::MissingKey(config.api_key_env.clone()))?;
    let agent = agent(config);
    let budget = Some(config.prompt_budget_tokens);
    if config.one_at_a_time {
        let mut combined = String::new();
        for criterion in RUBRIC_CRITERIA {
            let prompt = render_single_criterion(task, criterion, budget)?;
            let reply = chat_with_retries(&agent, config, &api_key, &prompt, &task.question_id)?;
            combined.push_str(&reply);
            combined.push('\n');
        }
        // overall pass still uses the full template
        let prompt = with_reasoning(render_template(task, budget)?, config);
        let reply = chat_with_retries(&agent, config, &api_key, &prompt, &task.question_id)?;
        combined.push_str(&reply);
        Ok(record_from_reply(task, combined))
    } else {
        let prompt = with_reasoning(render_template(task, budget)?, config);
        let reply = chat_with_retries(&agent, config, &api_key, &prompt, &task.question_id)?;
        Ok(record_from_reply(task, reply))
    }
}

fn with_reasoning(prompt: String, config: &EndpointConfig) -> String {
    if config.reasoning_enabled {
        format!("{prompt}{}", template::REASONING_SUFFIX)
    } else {
        prompt
    }
}

/// Outcome of a batch run.
#[derive(Debug)]
pub struct RunSummary {
    pub written: usize,
    pub failures: Vec<(String, ClientError)>,
}

/// Load tasks from a JSONL file (one task object per line).
pub fn load_tasks(path: &Path) -> Result<Vec<JudgmentTask>> {
    let text = std::fs::read_to_string(path)?;
    let mut tasks = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let task: JudgmentTask = serde_json::from_str(line).map_err(|e| {
            ClientError::Config(format!("tasks line {}: {e}", lineno + 1))
        })?;
        tasks.push(task);
    }
    if tasks.is_empty() {
        return Err(ClientError::Config("no tasks in file".to_string()));
    }
    Ok(tasks)
}

/// Run a batch of tasks with at most `config.concurrency` requests in
/// flight. One writer appends each completed record as a JSONL line, so a
/// crashed run leaves only whole records behind.
pub fn run_tasks(tasks: &[JudgmentTask], config: &EndpointConfig, out: &Path) -> Result<RunSummary> {
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)?;
    let writer = Arc::new(Mutex::new(file));
    let criteria: Vec<String> = RUBRIC_CRITERIA.iter().map(|s| s.to_string()).collect();

    let (task_tx, task_rx) = mpsc::channel::<(usize, JudgmentTask)>();
    let task_rx = Arc::new(Mutex::new(task_rx));
    let (done_tx, done_rx) = mpsc::channel::<(usize, Result<()>)>();

    let workers = config.concurrency.max(1).min(tasks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let task_rx = Arc::clone(&task_rx);
            let done_tx = done_tx.clone();
            let writer = Arc::clone(&writer);
            let criteria = criteria.clone();
            scope.spawn(move || loop {
                let next = task_rx.lock().expect("rx lock").recv();
                let (index, task) = match next {
                    Ok(pair) => pair,
                    Err(_) => break,
                };
                let outcome = request_judgment(&task, config).and_then(|record| {
                    let line = serde_json::to_string(&audit_core::judgment::record_to_json(
                        &record, &criteria,
                    ))
                    .map_err(|e| ClientError::Config(e.to_string()))?;
                    let mut file = writer.lock().expect("writer lock");
                    writeln!(file, "{line}")?;
                    file.flush()?;
                    Ok(())
                });
                let _ = done_tx.send((index, outcome));
            });
        }
        drop(done_tx);
        for (index, task) in tasks.iter().enumerate() {
            let _ = task_tx.send((index, task.clone()));
        }
        drop(task_tx);

        let mut written = 0usize;
        let mut failures = Vec::new();
        for _ in 0..tasks.len() {
            match done_rx.recv() {
                Ok((index, Ok(()))) => {
                    let _ = index;
                    written += 1;
                }
                Ok((index, Err(e))) => failures.push((tasks[index].question_id.clone(), e)),
                Err(_) => break,
            }
        }
        Ok(RunSummary { written, failures })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task() -> JudgmentTask {
        JudgmentTask {
            question_id: "q1".into(),
            question_text: "Explain rainbows.".into(),
            response_a: "Light refracts.".into(),
            response_b: "Magic.".into(),
            judge: "judge-x".into(),
            setting: "setting1".into(),
        }
    }

    #[test]
    fn template_contains_criteria_in_rubric_order() {
        let prompt = render_template(&task(), None).unwrap();
        let mut last = 0;
        for heading in template::CRITERION_HEADINGS {
            let pos = prompt.find(heading).expect("heading present");
            assert!(pos > last, "{heading} out of order");
            last = pos;
        }
        assert!(prompt.contains("When in doubt, choose A=B"));
        assert!(prompt.contains("Explain rainbows."));
        assert!(prompt.contains("Light refracts."));
    }

    #[test]
    fn empty_response_is_rejected() {
        let mut bad = task();
        bad.response_a = String::new();
        assert!(matches!(
            render_template(&bad, None),
            Err(ClientError::InvalidTask(_))
        ));
    }

    #[test]
    fn oversized_prompt_fails_before_any_network_use() {
        let mut big = task();
        big.response_b = "x".repeat(100_000);
        assert!(matches!(
            render_template(&big, Some(1000)),
            Err(ClientError::PromptTooLarge { .. })
        ));
    }

    #[test]
    fn reply_parsing_flags_missing_fields() {
        let reply = "Correctness: ((A>B))\nCompleteness: ((A=B))\nConciseness: ((B>A))\n\
                     Style: ((A=B))\nMy final verdict is [[A>B]]";
        let record = record_from_reply(&task(), reply.to_string());
        assert!(!record.factor_flags[0]);
        assert!(record.factor_flags[2], "Safety should be flagged");
        assert!(!record.overall_flag);
        assert_eq!(
            record.overall_verdict,
            Some(audit_core::judgment::VerdictLabel::BetterA)
        );
    }

    #[test]
    fn rerunning_the_parser_on_persisted_text_is_identical() {
        let reply = "Correctness: ((A>>B))\nCompleteness: ((A>B))\nSafety: ((A=B))\n\
                     Conciseness: ((B>A))\nStyle: ((B>>A))\nMy final verdict is [[A=B]]";
        let a = record_from_reply(&task(), reply.to_string());
        let b = record_from_reply(&task(), a.raw_text.clone().unwrap());
        assert_eq!(a, b);
    }
}
