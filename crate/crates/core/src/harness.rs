//! Orchestration over task sets, metrics, persisted artifacts and cost tables.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{load_tasks, ood_sample_lists, DatasetError};
use crate::engine::{RunTrace, Session};
use crate::model::{outputs_equal, Example, InterpreterMode, Method, RuleForm, RunConfig, Task, TaskKind, Value};
use crate::proposer::{
    HttpBackend, LanguageModel, LmClient, LmError, ModelRates, RateTable, ResponseCache, ScriptedBackend, Templates,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0} predictions for {1} unseen examples")]
    LengthMismatch(usize, usize),
    #[error("no traces to aggregate")]
    Empty,
    #[error("traces mix runs: `{0}` and `{1}`")]
    MixedRuns(String, String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    Trace { path: PathBuf, line: usize, message: String },
    #[error("task `{task}` failed: {message}")]
    TaskFailed { task: String, message: String },
    #[error("template: {0}")]
    Template(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_owned(), source }
}

/// Fraction of predictions equal (after normalization) to the expected outputs.
pub fn task_accuracy(predictions: &[Value], unseen: &[Example]) -> Result<f64, HarnessError> {
    if predictions.len() != unseen.len() {
        return Err(HarnessError::LengthMismatch(predictions.len(), unseen.len()));
    }
    if unseen.is_empty() {
        return Ok(0.0);
    }
    let correct = predictions.iter().zip(unseen).filter(|(p, e)| outputs_equal(p, &e.output)).count();
    Ok(correct as f64 / unseen.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub kind: TaskKind,
    pub a_tau: f64,
    pub iterations_used: usize,
    pub api_calls: u64,
    pub tokens: u64,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_a_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset: TaskKind,
    pub tasks: usize,
    pub failed: usize,
    pub raw_accuracy: f64,
    pub task_accuracy: f64,
    pub mean_api_calls: f64,
    pub mean_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_raw_accuracy: Option<f64>,
}

/// Aggregate over one method/model run. Accuracies exclude failed tasks;
/// call and cost means include them, since their calls were spent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: Method,
    pub model: String,
    pub interpreter: InterpreterMode,
    pub per_task: Vec<TaskRow>,
    pub raw_accuracy: f64,
    pub task_accuracy: f64,
    pub mean_api_calls: f64,
    pub mean_cost: f64,
    pub tasks: usize,
    pub failed_tasks: usize,
    pub datasets: Vec<DatasetSummary>,
}

struct Means {
    c: f64,
    c_t: f64,
    calls: f64,
    cost: f64,
    ood: Option<f64>,
    failed: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn means(rows: &[&TaskRow]) -> Means {
    let ok: Vec<&&TaskRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let solved = ok.iter().filter(|r| r.a_tau == 1.0).count();
    let ood: Vec<f64> = ok.iter().filter_map(|r| r.ood_a_tau).collect();
    Means {
        c: mean(ok.iter().map(|r| r.a_tau)),
        c_t: if ok.is_empty() { 0.0 } else { solved as f64 / ok.len() as f64 },
        calls: mean(rows.iter().map(|r| r.api_calls as f64)),
        cost: mean(rows.iter().map(|r| r.cost)),
        ood: (!ood.is_empty()).then(|| mean(ood.into_iter())),
        failed: rows.len() - ok.len(),
    }
}

fn run_label(t: &RunTrace) -> String {
    format!("{}/{}/{:?}", t.method.as_str(), t.model, t.interpreter)
}

/// Build the report for one run from its traces; rows are ordered by task id.
pub fn aggregate(traces: &[RunTrace]) -> Result<Report, HarnessError> {
    aggregate_with(traces, |t| (t.a_tau, t.interpreter))
}

/// Report over the alternate-interpreter evaluations of a compare run.
pub fn aggregate_alt(traces: &[RunTrace]) -> Result<Option<Report>, HarnessError> {
    if traces.iter().any(|t| t.alt.is_none() && t.error.is_none()) {
        return Ok(None);
    }
    let alt_mode = traces.iter().find_map(|t| t.alt.as_ref().map(|a| a.interpreter));
    let Some(mode) = alt_mode else { return Ok(None) };
    aggregate_with(traces, |t| (t.alt.as_ref().map_or(0.0, |a| a.a_tau), mode)).map(Some)
}

fn aggregate_with(traces: &[RunTrace], pick: impl Fn(&RunTrace) -> (f64, InterpreterMode)) -> Result<Report, HarnessError> {
    let first = traces.first().ok_or(HarnessError::Empty)?;
    if let Some(other) = traces.iter().find(|t| run_label(t) != run_label(first)) {
        return Err(HarnessError::MixedRuns(run_label(first), run_label(other)));
    }
    let mut per_task: Vec<TaskRow> = traces
        .iter()
        .map(|t| TaskRow {
            task_id: t.task_id.clone(),
            kind: t.kind,
            a_tau: pick(t).0,
            iterations_used: t.iterations_used(),
            api_calls: t.ledger.api_calls,
            tokens: t.tokens,
            cost: t.ledger.estimated_cost,
            ood_a_tau: t.ood_a_tau,
            error: t.error.clone(),
        })
        .collect();
    per_task.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let all: Vec<&TaskRow> = per_task.iter().collect();
    let overall = means(&all);
    let mut by_kind: BTreeMap<TaskKind, Vec<&TaskRow>> = BTreeMap::new();
    for row in &per_task {
        by_kind.entry(row.kind).or_default().push(row);
    }
    let datasets = by_kind
        .into_iter()
        .map(|(dataset, rows)| {
            let m = means(&rows);
            DatasetSummary {
                dataset,
                tasks: rows.len(),
                failed: m.failed,
                raw_accuracy: m.c,
                task_accuracy: m.c_t,
                mean_api_calls: m.calls,
                mean_cost: m.cost,
                ood_raw_accuracy: m.ood,
            }
        })
        .collect();
    Ok(Report {
        method: first.method,
        model: first.model.clone(),
        interpreter: pick(first).1,
        tasks: per_task.len(),
        failed_tasks: overall.failed,
        raw_accuracy: overall.c,
        task_accuracy: overall.c_t,
        mean_api_calls: overall.calls,
        mean_cost: overall.cost,
        per_task,
        datasets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub dataset: TaskKind,
    pub method: Method,
    pub model: String,
    pub tasks: usize,
    pub mean_api_calls: f64,
    pub mean_cost: f64,
    pub mean_tokens: f64,
}

/// Mean calls, tokens and dollars per task for each (dataset, method, model).
pub fn cost_report(traces: &[RunTrace]) -> Vec<CostRow> {
    let mut groups: BTreeMap<(TaskKind, &str, &str), Vec<&RunTrace>> = BTreeMap::new();
    for t in traces {
        groups.entry((t.kind, t.method.as_str(), t.model.as_str())).or_default().push(t);
    }
    groups
        .into_values()
        .map(|ts| CostRow {
            dataset: ts[0].kind,
            method: ts[0].method,
            model: ts[0].model.clone(),
            tasks: ts.len(),
            mean_api_calls: mean(ts.iter().map(|t| t.ledger.api_calls as f64)),
            mean_cost: mean(ts.iter().map(|t| t.ledger.estimated_cost)),
            mean_tokens: mean(ts.iter().map(|t| t.tokens as f64)),
        })
        .collect()
}

pub const CSV_HEADER: [&str; 10] =
    ["method", "model", "interpreter", "dataset", "c", "c_t", "mean_api_calls", "mean_cost", "tasks", "failed"];

/// One CSV row per dataset of each report.
pub fn write_summary_csv<W: Write>(out: W, reports: &[&Report]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        let interpreter = match r.interpreter {
            InterpreterMode::Symbolic => "symbolic",
            InterpreterMode::Lm => "lm",
        };
        for d in &r.datasets {
            w.write_record([
                r.method.as_str().to_owned(),
                r.model.clone(),
                interpreter.to_owned(),
                d.dataset.as_str().to_owned(),
                d.raw_accuracy.to_string(),
                d.task_accuracy.to_string(),
                d.mean_api_calls.to_string(),
                d.mean_cost.to_string(),
                d.tasks.to_string(),
                d.failed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn traces_to_jsonl(traces: &[RunTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t).expect("trace serializes"));
        out.push('\n');
    }
    out
}

pub fn read_traces(path: &Path) -> Result<Vec<RunTrace>, HarnessError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut traces = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line)
            .map_err(|e| HarnessError::Trace { path: path.into(), line: i + 1, message: e.to_string() })?;
        traces.push(t);
    }
    Ok(traces)
}

/// Split traces by run (method, model, interpreter), keeping first-seen order.
pub fn group_runs(traces: Vec<RunTrace>) -> Vec<Vec<RunTrace>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<RunTrace>> = HashMap::new();
    for t in traces {
        let key = run_label(&t);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(t);
    }
    order.into_iter().map(|k| groups.remove(&k).expect("key recorded")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Http,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Scripted responses: `{"default": [...], "tasks": {"<id>": [...]}}`.
    pub script: Option<PathBuf>,
    /// Scripted backend answers every request with the task's ground truth.
    pub replay_truth: bool,
    pub requests_per_minute: u32,
    pub send_seed: bool,
    pub max_attempts: u32,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Http,
            script: None,
            replay_truth: false,
            requests_per_minute: 0,
            send_seed: false,
            max_attempts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub tasks: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub template_dir: Option<PathBuf>,
    pub workers: usize,
    pub strict: bool,
    pub compare_interpreters: bool,
    /// Add this many OOD examples to list tasks that carry a truth program
    /// but no OOD split.
    pub ood_samples: usize,
    pub run: RunConfig,
    pub backend: BackendConfig,
    /// Extra per-model prices merged over the built-in table.
    pub rates: BTreeMap<String, ModelRates>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            tasks: Vec::new(),
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            template_dir: None,
            workers: 1,
            strict: false,
            compare_interpreters: false,
            ood_samples: 0,
            run: RunConfig::default(),
            backend: BackendConfig::default(),
            rates: BTreeMap::new(),
        }
    }
}

impl HarnessConfig {
    /// Parse a TOML config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: HarnessConfig =
            toml::from_str(&text).map_err(|e| HarnessError::Config { path: path.into(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.tasks.iter_mut().for_each(fix);
        fix(&mut cfg.output_dir);
        cfg.cache_dir.as_mut().map(fix);
        cfg.template_dir.as_mut().map(fix);
        cfg.backend.script.as_mut().map(fix);
        Ok(cfg)
    }

    pub fn rate_table(&self) -> RateTable {
        let mut table = RateTable::default();
        table.0.extend(self.rates.clone());
        table
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    #[serde(default)]
    default: Vec<String>,
    #[serde(default)]
    tasks: BTreeMap<String, Vec<String>>,
}

/// What the truth-replay backend answers for a task.
pub fn truth_reply(task: &Task, form: RuleForm) -> Option<String> {
    match task.kind {
        TaskKind::MiniScan => task.truth_grammar.clone(),
        TaskKind::ListFn | TaskKind::MiniArc => {
            let program = task.truth_program.as_ref()?;
            Some(match form {
                RuleForm::Program => format!("Rule:\n```\n{program}\n```"),
                // natural-language hypotheses are translated; answer both prompts
                RuleForm::NaturalLanguage => format!("Rule: {program}\n\n```\n{program}\n```"),
            })
        }
        TaskKind::Acre => None,
    }
}

/// Scripted backend replaying every task's ground truth.
pub fn truth_backend(tasks: &[Task], form: RuleForm) -> ScriptedBackend {
    let replies: HashMap<String, String> =
        tasks.iter().filter_map(|t| truth_reply(t, form).map(|r| (t.id.clone(), r))).collect();
    ScriptedBackend::from_responder(move |_, ctx| {
        replies.get(ctx.task_id).cloned().ok_or_else(|| LmError::Scripted(format!("no truth for `{}`", ctx.task_id)))
    })
}

fn build_backend(cfg: &HarnessConfig, tasks: &[Task]) -> Result<Arc<dyn LanguageModel>, HarnessError> {
    let b = &cfg.backend;
    Ok(match b.kind {
        BackendKind::Http => Arc::new(HttpBackend::from_env(b.requests_per_minute).sending_seed(b.send_seed)),
        BackendKind::Scripted if b.replay_truth => Arc::new(truth_backend(tasks, cfg.run.rule_form)),
        BackendKind::Scripted => {
            let script: ScriptFile = match &b.script {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                    serde_json::from_str(&text)
                        .map_err(|e| HarnessError::Config { path: path.clone(), message: e.to_string() })?
                }
                None => ScriptFile::default(),
            };
            let mut backend = ScriptedBackend::new(script.default);
            for (task, queue) in script.tasks {
                backend = backend.with_task(&task, queue);
            }
            Arc::new(backend)
        }
    })
}

/// Artifacts of one harness run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub traces: Vec<RunTrace>,
    pub report: Report,
    pub alt_report: Option<Report>,
}

pub fn load_all_tasks(cfg: &HarnessConfig) -> Result<Vec<Task>, HarnessError> {
    let mut tasks = Vec::new();
    for path in &cfg.tasks {
        tasks.extend(load_tasks(path, None)?);
    }
    if cfg.ood_samples > 0 {
        for task in tasks.iter_mut().filter(|t| t.kind == TaskKind::ListFn && t.ood.is_none()) {
            if task.truth_program.is_some() {
                task.ood = Some(ood_sample_lists(task, cfg.ood_samples, None, cfg.run.seed)?);
            }
        }
    }
    Ok(tasks)
}

/// Run the configured method over `tasks` with a bounded worker pool.
/// Traces come back in task order regardless of scheduling.
pub fn run_tasks(
    cfg: &HarnessConfig,
    client: &LmClient,
    templates: &Templates,
    tasks: &[Task],
) -> Result<Vec<RunTrace>, HarnessError> {
    let session = Session { client, templates, cfg: &cfg.run, compare_interpreters: cfg.compare_interpreters };
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<RunTrace>>> = Mutex::new(vec![None; tasks.len()]);
    let workers = cfg.workers.clamp(1, tasks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                log::info!("running task {} ({}/{})", task.id, i + 1, tasks.len());
                let trace = session.run(task);
                if let Some(e) = &trace.error {
                    log::warn!("task {} failed: {e}", task.id);
                    if cfg.strict {
                        abort.store(true, Ordering::SeqCst);
                    }
                }
                slots.lock().expect("result slots poisoned")[i] = Some(trace);
            });
        }
    });
    let slots = slots.into_inner().expect("result slots poisoned");
    if cfg.strict {
        if let Some(t) = slots.iter().flatten().find(|t| t.error.is_some()) {
            return Err(HarnessError::TaskFailed {
                task: t.task_id.clone(),
                message: t.error.clone().unwrap_or_default(),
            });
        }
    }
    Ok(slots.into_iter().map(|t| t.expect("every task ran")).collect())
}

/// Write traces, report(s) and summary CSV into `dir`.
pub fn write_artifacts(dir: &Path, out: &RunOutput) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let traces = dir.join("traces.jsonl");
    std::fs::write(&traces, traces_to_jsonl(&out.traces)).map_err(io_err(&traces))?;
    let write_json = |name: &str, report: &Report| -> Result<(), HarnessError> {
        let path = dir.join(name);
        let mut text = serde_json::to_string_pretty(report).expect("report serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(io_err(&path))
    };
    write_json("report.json", &out.report)?;
    if let Some(alt) = &out.alt_report {
        write_json("report_alt.json", alt)?;
    }
    let csv_path = dir.join("summary.csv");
    let file = std::fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    let reports: Vec<&Report> = std::iter::once(&out.report).chain(out.alt_report.as_ref()).collect();
    write_summary_csv(file, &reports).map_err(|e| HarnessError::Io {
        path: csv_path.clone(),
        source: std::io::Error::other(e.to_string()),
    })
}

/// Load tasks, run, aggregate and persist.
pub fn run(cfg: &HarnessConfig) -> Result<RunOutput, HarnessError> {
    cfg.run.validate().map_err(|message| HarnessError::Config { path: "<run>".into(), message })?;
    let tasks = load_all_tasks(cfg)?;
    let templates = match &cfg.template_dir {
        Some(dir) => Templates::with_overrides(dir).map_err(|e| HarnessError::Template(e.to_string()))?,
        None => Templates::default(),
    };
    let mut client = LmClient::new(build_backend(cfg, &tasks)?)
        .with_rates(cfg.rate_table())
        .with_retry(crate::proposer::RetryPolicy { max_attempts: cfg.backend.max_attempts.max(1), ..Default::default() });
    if let Some(dir) = &cfg.cache_dir {
        client = client.with_cache(ResponseCache::new(dir).map_err(io_err(dir))?);
    }
    let traces = run_tasks(cfg, &client, &templates, &tasks)?;
    let report = aggregate(&traces)?;
    let alt_report = if cfg.compare_interpreters { aggregate_alt(&traces)? } else { None };
    let out = RunOutput { traces, report, alt_report };
    write_artifacts(&cfg.output_dir, &out)?;
    Ok(out)
}
