//! The propose / score / select / refine loop and the direct-prediction
//! baselines.

use serde::{Deserialize, Serialize};

use crate::interpreter::{compile, CompileError, CompiledRule, Translator};
use crate::model::{
    normalize_output, outputs_equal, parse_value, render_value, temperature_for, Example, Hypothesis, InterpreterMode,
    Label, Method, RunConfig, Side, Task, TaskKind, Value,
};
use crate::proposer::{
    base_bindings, dataset_text, extract_rule, inline_value, labeled, labeled_value, propose, render_examples, render_prompt,
    CostLedger, LmClient, LmRequest, LmTranslator, RequestContext, TemplateName, Templates,
};

/// One predicted output, or the reason there is none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Rendered output value.
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub correct: bool,
}

impl Prediction {
    pub fn judge(result: Result<Value, String>, expected: &Value) -> Self {
        match result {
            Ok(v) => Prediction { correct: outputs_equal(&v, expected), output: Some(render_value(&v)), error: None },
            Err(e) => Prediction { output: None, error: Some(e), correct: false },
        }
    }

    fn failed(reason: &str) -> Self {
        Prediction { output: None, error: Some(reason.to_owned()), correct: false }
    }
}

/// Fraction of correct predictions.
pub fn accuracy(predictions: &[Prediction]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    predictions.iter().filter(|p| p.correct).count() as f64 / predictions.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHypothesis {
    #[serde(flatten)]
    pub hypothesis: Hypothesis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation_source: Option<String>,
    pub score: f64,
    /// One entry per seen example, in seen order.
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: u32,
    pub candidates: Vec<ScoredHypothesis>,
    pub selected: usize,
    pub feedback: String,
}

/// Unseen-set evaluation through the interpreter not used by the run itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltEvaluation {
    pub interpreter: InterpreterMode,
    pub unseen_predictions: Vec<Prediction>,
    pub a_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub task_id: String,
    pub kind: TaskKind,
    pub method: Method,
    pub model: String,
    #[serde(rename = "T")]
    pub max_iterations: u32,
    #[serde(rename = "N")]
    pub samples: u32,
    pub interpreter: InterpreterMode,
    pub iterations: Vec<IterationRecord>,
    pub final_rule: Option<String>,
    pub final_hypothesis: Option<Hypothesis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_translation: Option<String>,
    pub unseen_predictions: Vec<Prediction>,
    pub a_tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_predictions: Option<Vec<Prediction>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_a_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt: Option<AltEvaluation>,
    #[serde(flatten)]
    pub ledger: CostLedger,
    pub tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunTrace {
    fn start(task: &Task, cfg: &RunConfig) -> Self {
        RunTrace {
            task_id: task.id.clone(),
            kind: task.kind,
            method: cfg.method,
            model: cfg.model_name.clone(),
            max_iterations: cfg.max_iterations,
            samples: cfg.samples_per_iteration,
            interpreter: cfg.interpreter_mode,
            iterations: Vec::new(),
            final_rule: None,
            final_hypothesis: None,
            final_translation: None,
            unseen_predictions: Vec::new(),
            a_tau: 0.0,
            ood_predictions: None,
            ood_a_tau: None,
            alt: None,
            ledger: CostLedger::default(),
            tokens: 0,
            error: None,
        }
    }

    fn finish(mut self, ledger: CostLedger) -> Self {
        self.tokens = ledger.tokens();
        self.ledger = ledger;
        self
    }

    /// Number of refinement iterations actually run.
    pub fn iterations_used(&self) -> usize {
        self.iterations.len()
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Score a hypothesis whose compilation has already been attempted.
pub fn score_compiled(
    h: &Hypothesis,
    compiled: &Result<CompiledRule, CompileError>,
    seen: &[Example],
) -> ScoredHypothesis {
    let (predictions, compile_error, translation_source) = match compiled {
        Ok(rule) => (
            seen.iter()
                .map(|e| Prediction::judge(rule.apply(&e.input).map_err(|err| err.to_string()), &e.output))
                .collect::<Vec<_>>(),
            None,
            rule.translation_source.clone(),
        ),
        Err(err) => (
            seen.iter().map(|_| Prediction::failed(&err.to_string())).collect(),
            Some(err.to_string()),
            err.translation_source().map(str::to_owned),
        ),
    };
    ScoredHypothesis {
        hypothesis: h.clone(),
        compile_error,
        translation_source,
        score: accuracy(&predictions),
        predictions,
    }
}

/// Compile `h` and score it on the seen examples. Failures score 0.
pub fn score(
    h: &Hypothesis,
    task: &Task,
    translator: Option<&dyn Translator>,
    ledger: &mut CostLedger,
) -> (ScoredHypothesis, Option<CompiledRule>) {
    let compiled = compile(h, task.kind, translator, ledger);
    let scored = score_compiled(h, &compiled, &task.seen);
    (scored, compiled.ok())
}

/// Index of the highest score; ties go to the earliest sample.
pub fn select_best(candidates: &[ScoredHypothesis]) -> usize {
    assert!(!candidates.is_empty(), "select_best needs at least one candidate");
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let b = &candidates[best];
        if c.score > b.score || (c.score == b.score && c.hypothesis.sample_index < b.hypothesis.sample_index) {
            best = i;
        }
    }
    best
}

/// One block per incorrectly predicted seen example, in seen order.
pub fn make_feedback(best: &ScoredHypothesis, seen: &[Example]) -> String {
    seen.iter()
        .zip(&best.predictions)
        .filter(|(_, p)| !p.correct)
        .map(|(e, p)| {
            let actual = p.output.clone().unwrap_or_else(|| "None".to_owned());
            let block = p.output.is_some() && e.output.is_multiline();
            format!(
                "{}\n{}\n{}",
                labeled_value("Input", &e.input),
                labeled_value("Expected output", &e.output),
                labeled("Actual output", &actual, block)
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn word_positions(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.char_indices()
        .filter(|&(i, c)| c.is_alphanumeric() && !text[..i].chars().next_back().is_some_and(char::is_alphanumeric))
        .map(move |(i, _)| {
            let end = text[i..].find(|c: char| !c.is_alphanumeric()).map_or(text.len(), |e| i + e);
            (i, &text[i..end])
        })
}

fn first_bracketed(text: &str) -> Option<&str> {
    let start = text.find('[')?;
    let mut depth = 0usize;
    for (i, c) in text[start..].char_indices() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Leniently read a predicted output from a model reply: the first valid
/// serialized value of the task's output type.
pub fn parse_reply(text: &str, kind: TaskKind) -> Result<Value, String> {
    let body = match text.rfind("Output:") {
        Some(i) => &text[i + 7..],
        None => text,
    };
    let fail = || format!("no {kind} output found in reply");
    match kind {
        TaskKind::Acre => word_positions(body)
            .find_map(|(_, w)| w.parse::<Label>().ok())
            .map(Value::Label)
            .ok_or_else(fail),
        TaskKind::MiniScan => body
            .lines()
            .map(|l| l.trim().trim_matches('`').trim())
            .find(|l| !l.is_empty())
            .map(Value::tokens)
            .ok_or_else(fail),
        TaskKind::ListFn => {
            let list = first_bracketed(body).ok_or_else(fail)?;
            parse_value(list, kind, Side::Out).map_err(|e| e.to_string())
        }
        TaskKind::MiniArc => {
            // first line holding a bracket decides between nested and row-per-line
            let lines: Vec<&str> = body.lines().collect();
            let start = lines.iter().position(|l| l.contains('[')).ok_or_else(fail)?;
            if let Some(at) = lines[start].find("[[") {
                let offset = lines[..start].iter().map(|l| l.len() + 1).sum::<usize>() + at;
                let nested = first_bracketed(&body[offset..]).ok_or_else(fail)?;
                return parse_value(nested, kind, Side::Out).map_err(|e| e.to_string());
            }
            let rows: Vec<&str> = lines[start..]
                .iter()
                .map(|l| l.trim())
                .take_while(|l| l.starts_with('['))
                .collect();
            parse_value(&rows.join("\n"), kind, Side::Out).map_err(|e| e.to_string())
        }
    }
}

/// Runs the configured method over single tasks.
pub struct Session<'a> {
    pub client: &'a LmClient,
    pub templates: &'a Templates,
    pub cfg: &'a RunConfig,
    /// Also evaluate final rules through the other interpreter.
    pub compare_interpreters: bool,
}

impl Session<'_> {
    pub fn run(&self, task: &Task) -> RunTrace {
        match self.cfg.method {
            Method::Refine => self.refine(task),
            Method::Sr => self.sr_refine(task),
            Method::Io => self.io_predict(task),
            Method::Sc => self.sc_predict(task),
        }
    }

    fn dataset(&self, kind: TaskKind) -> crate::proposer::DatasetText {
        dataset_text(kind, self.cfg.noisy_prompt, self.cfg.rule_form)
    }

    fn generation_prompt(&self, task: &Task) -> Result<String, String> {
        let mut b = base_bindings(&self.dataset(task.kind));
        b.insert("Examples", render_examples(&task.seen));
        render_prompt(self.templates.get(TemplateName::HypothesisGeneration), &b).map_err(|e| e.to_string())
    }

    /// The generation prompt followed by the refinement request, so the
    /// examples stay in view in a single message.
    fn refinement_prompt(&self, task: &Task, rule: &str, feedback: &str) -> Result<String, String> {
        let mut b = base_bindings(&self.dataset(task.kind));
        b.insert("Rule", rule.to_owned());
        b.insert("Feedback", feedback.to_owned());
        let refine = render_prompt(self.templates.get(TemplateName::HypothesisRefinement), &b).map_err(|e| e.to_string())?;
        Ok(format!("{}\n\n{refine}", self.generation_prompt(task)?))
    }

    fn request(&self, prompt: String, temperature: f64) -> LmRequest {
        LmRequest { model: self.cfg.model_name.clone(), prompt, temperature, max_tokens: self.cfg.max_tokens_rule }
    }

    /// Apply a rule through the language model: one greedy completion of the
    /// rule-application prompt, read leniently.
    pub fn lm_apply(
        &self,
        task_id: &str,
        rule_text: &str,
        input: &Value,
        kind: TaskKind,
        ledger: &mut CostLedger,
    ) -> Result<Value, String> {
        let mut b = base_bindings(&self.dataset(kind));
        b.insert("Rule", rule_text.to_owned());
        b.insert("Test input", inline_value(input));
        let prompt = render_prompt(self.templates.get(TemplateName::RuleApplication), &b).map_err(|e| e.to_string())?;
        let ctx = RequestContext { task_id, sample_index: 0, seed: self.cfg.seed };
        let reply = self.client.complete_into(&self.request(prompt, 0.0), &ctx, ledger).map_err(|e| e.to_string())?;
        parse_reply(&reply.text, kind).map(|v| normalize_output(&v))
    }

    fn lm_predictions(&self, task: &Task, rule: &str, examples: &[Example], ledger: &mut CostLedger) -> Vec<Prediction> {
        examples
            .iter()
            .map(|e| Prediction::judge(self.lm_apply(&task.id, rule, &e.input, task.kind, ledger), &e.output))
            .collect()
    }

    fn symbolic_predictions(compiled: Option<&CompiledRule>, examples: &[Example], why: &str) -> Vec<Prediction> {
        examples
            .iter()
            .map(|e| match compiled {
                Some(rule) => Prediction::judge(rule.apply(&e.input).map_err(|err| err.to_string()), &e.output),
                None => Prediction::failed(why),
            })
            .collect()
    }

    pub fn refine(&self, task: &Task) -> RunTrace {
        self.hypothesis_loop(task, false)
    }

    /// The refinement loop with the language model standing in for the
    /// symbolic interpreter, both for scoring and for the unseen examples.
    pub fn sr_refine(&self, task: &Task) -> RunTrace {
        self.hypothesis_loop(task, true)
    }

    fn hypothesis_loop(&self, task: &Task, lm_interpreter: bool) -> RunTrace {
        let cfg = self.cfg;
        let mut trace = RunTrace::start(task, cfg);
        let mut ledger = CostLedger::default();
        let translator =
            LmTranslator::new(self.client, self.templates, &cfg.model_name, cfg.max_tokens_translation, &task.id, cfg.seed);
        let n = cfg.samples_per_iteration;
        let temperature = temperature_for(n, cfg.temperature_multi);

        // (iteration index, candidate index) of the best hypothesis so far
        let mut best: Option<(usize, usize)> = None;
        let mut best_rule: Option<CompiledRule> = None;
        let mut anchor: Option<(usize, usize)> = None;

        for t in 1..=cfg.max_iterations {
            let prompt = match anchor {
                None => self.generation_prompt(task),
                Some((it, c)) => {
                    let record = &trace.iterations[it];
                    let cand = &record.candidates[c];
                    let feedback = make_feedback(cand, &task.seen);
                    self.refinement_prompt(task, cand.hypothesis.rule_text(), &feedback)
                }
            };
            let prompt = match prompt {
                Ok(p) => p,
                Err(e) => {
                    trace.error = Some(e);
                    return trace.finish(ledger);
                }
            };
            let first_sample = u64::from(t - 1) * u64::from(n);
            let texts = match propose(
                self.client,
                &cfg.model_name,
                &prompt,
                n,
                temperature,
                cfg.max_tokens_rule,
                &task.id,
                cfg.seed,
                first_sample,
                &mut ledger,
            ) {
                Ok(texts) => texts,
                Err(e) => {
                    trace.error = Some(format!("proposer failed at iteration {t}: {e}"));
                    return trace.finish(ledger);
                }
            };
            let mut candidates = Vec::with_capacity(texts.len());
            let mut rules = Vec::with_capacity(texts.len());
            for (i, text) in texts.iter().enumerate() {
                let mut h = extract_rule(text, task.kind, cfg.rule_form);
                h.iteration = t;
                h.sample_index = i as u32;
                if lm_interpreter {
                    let predictions = match &h.ill_formed {
                        Some(why) => task.seen.iter().map(|_| Prediction::failed(why)).collect(),
                        None => self.lm_predictions(task, h.rule_text(), &task.seen, &mut ledger),
                    };
                    candidates.push(ScoredHypothesis {
                        compile_error: h.ill_formed.clone(),
                        hypothesis: h,
                        translation_source: None,
                        score: accuracy(&predictions),
                        predictions,
                    });
                    rules.push(None);
                } else {
                    let (scored, rule) = score(&h, task, Some(&translator as &dyn Translator), &mut ledger);
                    candidates.push(scored);
                    rules.push(rule);
                }
            }
            let selected = select_best(&candidates);
            let sel_score = candidates[selected].score;
            // feedback is only built when another iteration will consume it
            let feedback = if sel_score < 1.0 && t < cfg.max_iterations {
                make_feedback(&candidates[selected], &task.seen)
            } else {
                String::new()
            };
            let it = trace.iterations.len();
            let improves = match best {
                None => true,
                Some((bi, bc)) => sel_score > trace.iterations[bi].candidates[bc].score,
            };
            if improves {
                best = Some((it, selected));
                best_rule = rules.swap_remove(selected);
            }
            trace.iterations.push(IterationRecord { t, candidates, selected, feedback });
            if sel_score >= 1.0 {
                break;
            }
            anchor = if cfg.carry_best { best } else { Some((it, selected)) };
        }

        let (bi, bc) = best.expect("at least one iteration ran");
        let chosen = trace.iterations[bi].candidates[bc].clone();
        let rule_text = chosen.hypothesis.rule_text().to_owned();
        let why = chosen.compile_error.clone().unwrap_or_else(|| "rule did not compile".to_owned());
        let symbolic_unseen = |rule: Option<&CompiledRule>| Self::symbolic_predictions(rule, &task.unseen, &why);

        let primary_lm = lm_interpreter || cfg.interpreter_mode == InterpreterMode::Lm;
        let lm_usable = chosen.hypothesis.ill_formed.is_none();
        let lm_unseen = |s: &Self, ledger: &mut CostLedger| {
            if lm_usable {
                s.lm_predictions(task, &rule_text, &task.unseen, ledger)
            } else {
                task.unseen.iter().map(|_| Prediction::failed(&why)).collect()
            }
        };
        trace.unseen_predictions = if primary_lm { lm_unseen(self, &mut ledger) } else { symbolic_unseen(best_rule.as_ref()) };
        trace.a_tau = accuracy(&trace.unseen_predictions);
        if let Some(ood) = &task.ood {
            let preds = if primary_lm {
                if lm_usable {
                    self.lm_predictions(task, &rule_text, ood, &mut ledger)
                } else {
                    ood.iter().map(|_| Prediction::failed(&why)).collect()
                }
            } else {
                Self::symbolic_predictions(best_rule.as_ref(), ood, &why)
            };
            trace.ood_a_tau = Some(accuracy(&preds));
            trace.ood_predictions = Some(preds);
        }
        if self.compare_interpreters && !lm_interpreter {
            let (interpreter, preds) = if primary_lm {
                (InterpreterMode::Symbolic, symbolic_unseen(best_rule.as_ref()))
            } else {
                (InterpreterMode::Lm, lm_unseen(self, &mut ledger))
            };
            trace.alt = Some(AltEvaluation { interpreter, a_tau: accuracy(&preds), unseen_predictions: preds });
        }
        trace.final_rule = Some(rule_text);
        trace.final_translation = chosen.translation_source.clone();
        trace.final_hypothesis = Some(chosen.hypothesis);
        trace.finish(ledger)
    }

    fn io_prompt(&self, task: &Task, input: &Value) -> Result<String, String> {
        let mut b = base_bindings(&self.dataset(task.kind));
        b.insert("Examples", render_examples(&task.seen));
        b.insert("Test input", inline_value(input));
        render_prompt(self.templates.get(TemplateName::IoPrediction), &b).map_err(|e| e.to_string())
    }

    /// Direct prediction: one greedy completion per unseen example.
    pub fn io_predict(&self, task: &Task) -> RunTrace {
        self.direct(task, 1)
    }

    /// Self-consistency: `N` samples per unseen example, majority vote.
    pub fn sc_predict(&self, task: &Task) -> RunTrace {
        self.direct(task, self.cfg.samples_per_iteration)
    }

    fn direct(&self, task: &Task, n: u32) -> RunTrace {
        let cfg = self.cfg;
        let mut trace = RunTrace::start(task, cfg);
        let mut ledger = CostLedger::default();
        let temperature = temperature_for(n, cfg.temperature_multi);
        let mut predictions = Vec::new();
        let mut examples: Vec<(&Example, bool)> = task.unseen.iter().map(|e| (e, false)).collect();
        if let Some(ood) = &task.ood {
            examples.extend(ood.iter().map(|e| (e, true)));
        }
        let mut ood_predictions = Vec::new();
        for (example, is_ood) in examples {
            let prompt = match self.io_prompt(task, &example.input) {
                Ok(p) => p,
                Err(e) => {
                    trace.error = Some(e);
                    return trace.finish(ledger);
                }
            };
            let replies = match propose(
                self.client,
                &cfg.model_name,
                &prompt,
                n,
                temperature,
                cfg.max_tokens_rule,
                &task.id,
                cfg.seed,
                0,
                &mut ledger,
            ) {
                Ok(r) => r,
                Err(e) => {
                    trace.error = Some(format!("prediction request failed: {e}"));
                    return trace.finish(ledger);
                }
            };
            let votes: Vec<Result<Value, String>> =
                replies.iter().map(|r| parse_reply(r, task.kind).map(|v| normalize_output(&v))).collect();
            let p = Prediction::judge(majority(&votes), &example.output);
            if is_ood {
                ood_predictions.push(p);
            } else {
                predictions.push(p);
            }
        }
        trace.a_tau = accuracy(&predictions);
        trace.unseen_predictions = predictions;
        if task.ood.is_some() {
            trace.ood_a_tau = Some(accuracy(&ood_predictions));
            trace.ood_predictions = Some(ood_predictions);
        }
        trace.finish(ledger)
    }
}

/// Most frequent parsed value by rendered form; ties go to the value sampled
/// first. Unparseable samples do not vote.
pub fn majority(votes: &[Result<Value, String>]) -> Result<Value, String> {
    let mut tally: Vec<(String, &Value, usize)> = Vec::new();
    for v in votes.iter().flatten() {
        let key = render_value(v);
        match tally.iter_mut().find(|(k, _, _)| *k == key) {
            Some(entry) => entry.2 += 1,
            None => tally.push((key, v, 1)),
        }
    }
    let mut best: Option<&(String, &Value, usize)> = None;
    for entry in &tally {
        if best.is_none_or(|b| entry.2 > b.2) {
            best = Some(entry);
        }
    }
    match best {
        Some((_, v, _)) => Ok((*v).clone()),
        None => Err(votes.iter().find_map(|v| v.as_ref().err().cloned()).unwrap_or_else(|| "no samples".into())),
    }
}
