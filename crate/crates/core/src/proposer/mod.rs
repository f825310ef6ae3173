//! Hypothesis generation: prompt assembly, language-model access and rule
//! extraction from free-form replies.

mod backend;
mod client;
mod templates;

use std::collections::HashMap;
use std::sync::Mutex;

pub use backend::{
    estimate_tokens, HttpBackend, LanguageModel, LmError, LmRequest, LmResponse, RateLimiter, RequestContext,
    ScriptedBackend, DEFAULT_BASE_URL, ENV_API_KEY, ENV_BASE_URL, ENV_MODEL,
};
pub use client::{cache_key, Completion, CostLedger, LmClient, ModelRates, RateTable, ResponseCache, RetryPolicy};
pub use templates::{
    base_bindings, dataset_text, inline_value, labeled, labeled_value, placeholders, render_examples, render_prompt, DatasetText,
    PromptTemplate, TemplateError, TemplateName, Templates, NOISY_NOTE,
};

use crate::blicket::first_balanced_object;
use crate::interpreter::{fenced_blocks, Translator};
use crate::model::{Hypothesis, HypothesisForm, RuleForm, TaskKind};

/// Draw `n` completions for one prompt. Sample `i` is requested with
/// `sample_index = first_sample + i`, so distinct samples never share a cache
/// entry. Misses are charged to `ledger`.
#[allow(clippy::too_many_arguments)]
pub fn propose(
    client: &LmClient,
    model: &str,
    prompt: &str,
    n: u32,
    temperature: f64,
    max_tokens: u32,
    task_id: &str,
    seed: u64,
    first_sample: u64,
    ledger: &mut CostLedger,
) -> Result<Vec<String>, LmError> {
    let req = LmRequest { model: model.to_owned(), prompt: prompt.to_owned(), temperature, max_tokens };
    (0..u64::from(n))
        .map(|i| {
            let ctx = RequestContext { task_id, sample_index: first_sample + i, seed };
            client.complete_into(&req, &ctx, ledger).map(|r| r.text)
        })
        .collect()
}

/// Byte offset just past the first `Rule:` marker (case-insensitive).
fn after_marker(text: &str) -> Option<usize> {
    if let Some(i) = text.find("Rule:") {
        return Some(i + 5);
    }
    text.to_ascii_lowercase().find("rule:").map(|i| i + 5)
}

fn strip_decoration(s: &str) -> &str {
    s.trim().trim_matches('*').trim()
}

fn is_numbered(line: &str, keyword: &str) -> bool {
    let line = line.trim().trim_start_matches(['-', '*', '`', ' ']);
    line.strip_prefix(keyword)
        .map(str::trim_start)
        .is_some_and(|rest| rest.starts_with(|c: char| c.is_ascii_digit()))
}

/// Pull the rule payload out of a proposer reply. Extraction failures yield a
/// hypothesis flagged ill-formed rather than an error.
pub fn extract_rule(text: &str, kind: TaskKind, form: RuleForm) -> Hypothesis {
    let (hform, payload) = match kind {
        TaskKind::Acre => (
            HypothesisForm::BlicketMap,
            after_marker(text)
                .ok_or("no `Rule:` marker")
                .and_then(|at| {
                    first_balanced_object(&text[at..])
                        .map(|(s, e)| text[at + s..at + e].to_owned())
                        .ok_or("no JSON object after `Rule:`")
                }),
        ),
        TaskKind::MiniScan => {
            let lines: Vec<&str> =
                text.lines().filter(|l| is_numbered(l, "Rule") || is_numbered(l, "Priority")).collect();
            let payload = if lines.iter().any(|l| is_numbered(l, "Rule")) {
                Ok(lines.iter().map(|l| l.trim()).collect::<Vec<_>>().join("\n"))
            } else {
                Err("no `Rule k:` lines")
            };
            (HypothesisForm::Grammar, payload)
        }
        TaskKind::ListFn | TaskKind::MiniArc => match form {
            RuleForm::NaturalLanguage => (
                HypothesisForm::NaturalLanguage,
                after_marker(text)
                    .map(|at| strip_decoration(&text[at..]).to_owned())
                    .filter(|s| !s.is_empty())
                    .ok_or("no rule text after `Rule:`"),
            ),
            RuleForm::Program => {
                let fenced = fenced_blocks(text).into_iter().map(|b| b.trim().to_owned()).find(|b| !b.is_empty());
                let payload = fenced
                    .or_else(|| after_marker(text).map(|at| strip_decoration(&text[at..]).to_owned()))
                    .filter(|s| !s.is_empty())
                    .ok_or("no program block");
                (HypothesisForm::Program, payload)
            }
        },
    };
    let (payload, ill_formed) = match payload {
        Ok(p) => (p, None),
        Err(reason) => (String::new(), Some(reason.to_owned())),
    };
    Hypothesis { raw_text: text.to_owned(), payload, form: hform, iteration: 1, sample_index: 0, ill_formed }
}

/// Translates natural-language list and grid rules with greedy decoding.
/// Replies are memoized per (rule text, kind, model).
pub struct LmTranslator<'a> {
    client: &'a LmClient,
    templates: &'a Templates,
    model: String,
    max_tokens: u32,
    task_id: String,
    seed: u64,
    memo: Mutex<HashMap<(String, TaskKind), String>>,
}

impl<'a> LmTranslator<'a> {
    pub fn new(client: &'a LmClient, templates: &'a Templates, model: &str, max_tokens: u32, task_id: &str, seed: u64) -> Self {
        LmTranslator {
            client,
            templates,
            model: model.to_owned(),
            max_tokens,
            task_id: task_id.to_owned(),
            seed,
            memo: Mutex::default(),
        }
    }

    pub fn prompt(&self, rule: &str, kind: TaskKind) -> Result<String, TemplateError> {
        let mut b = base_bindings(&dataset_text(kind, false, RuleForm::NaturalLanguage));
        b.insert("Rule", rule.to_owned());
        render_prompt(self.templates.get(TemplateName::HypothesisTranslation), &b)
    }
}

impl Translator for LmTranslator<'_> {
    fn translate(&self, rule: &str, kind: TaskKind, ledger: &mut CostLedger) -> Result<String, String> {
        let key = (rule.to_owned(), kind);
        if let Some(hit) = self.memo.lock().expect("translation memo poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let prompt = self.prompt(rule, kind).map_err(|e| e.to_string())?;
        let req = LmRequest { model: self.model.clone(), prompt, temperature: 0.0, max_tokens: self.max_tokens };
        let ctx = RequestContext { task_id: &self.task_id, sample_index: 0, seed: self.seed };
        let text = self.client.complete_into(&req, &ctx, ledger).map_err(|e| e.to_string())?.text;
        self.memo.lock().expect("translation memo poisoned").insert(key, text.clone());
        Ok(text)
    }
}
