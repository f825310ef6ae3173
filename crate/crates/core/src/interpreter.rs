//! Task interpreters: turn a hypothesis into an executable rule and apply it.

use thiserror::Error;

use crate::blicket::{parse_blicket_rule, BlicketError, BlicketRule};
use crate::model::{normalize_output, Hypothesis, HypothesisForm, TaskKind, Value};
use crate::proposer::CostLedger;
use crate::qcfg::{parse_grammar, DeriveError, Grammar, GrammarError};
use crate::sandbox::{eval_program, parse_program, EvalError, Limits, Program, SyntaxError};

/// Turns a natural-language rule into sandbox source. Calls that reach a
/// language model are charged to `ledger`.
pub trait Translator {
    fn translate(&self, rule: &str, kind: TaskKind, ledger: &mut CostLedger) -> Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("ill-formed hypothesis: {0}")]
    IllFormed(String),
    #[error("{form:?} hypotheses cannot be compiled for {kind} tasks")]
    FormMismatch { form: HypothesisForm, kind: TaskKind },
    #[error("natural-language rules need a translator")]
    NoTranslator,
    #[error("translation failed: {0}")]
    Translation(String),
    #[error(transparent)]
    Blicket(#[from] BlicketError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("program does not parse: {error}")]
    Program { error: SyntaxError, source_text: String },
}

impl CompileError {
    /// Program text produced by translation, when the failure happened after it.
    pub fn translation_source(&self) -> Option<&str> {
        match self {
            CompileError::Program { source_text, .. } => Some(source_text),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("input does not fit a {0} rule")]
    Input(&'static str),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error(transparent)]
    Sandbox(#[from] EvalError),
    #[error("{0}")]
    Lm(String),
}

#[derive(Debug, Clone)]
pub enum Executable {
    Blicket(BlicketRule),
    Grammar(Grammar),
    Program(Program),
}

/// A hypothesis in executable form. Application is pure and deterministic.
#[derive(Debug, Clone)]
pub struct CompiledRule {
    pub origin: Hypothesis,
    pub executable: Executable,
    pub translation_source: Option<String>,
    pub limits: Limits,
}

impl CompiledRule {
    pub fn apply(&self, input: &Value) -> Result<Value, ApplyError> {
        let out = match (&self.executable, input) {
            (Executable::Blicket(rule), Value::ObjectSet(objects)) => Value::Label(rule.apply(objects)),
            (Executable::Blicket(_), _) => return Err(ApplyError::Input("blicket")),
            (Executable::Grammar(g), Value::TokenSeq(tokens)) => Value::TokenSeq(g.derive(tokens)?),
            (Executable::Grammar(_), _) => return Err(ApplyError::Input("grammar")),
            (Executable::Program(p), Value::IntList(_) | Value::IntGrid(_)) => eval_program(p, input, &self.limits)?,
            (Executable::Program(_), _) => return Err(ApplyError::Input("program")),
        };
        Ok(normalize_output(&out))
    }
}

/// Parse the first block of `text` that is a valid program: fenced blocks
/// first, then the text after a `Program:` or `Rule:` marker, then single
/// lines, then the whole reply.
pub fn extract_program(text: &str) -> Result<Program, SyntaxError> {
    let mut candidates: Vec<String> = fenced_blocks(text);
    for marker in ["Program:", "Rule:"] {
        if let Some(i) = text.find(marker) {
            candidates.push(text[i + marker.len()..].to_owned());
        }
    }
    candidates.extend(text.lines().map(str::to_owned));
    let mut first_err = None;
    for c in candidates.iter().map(|c| c.trim()).filter(|c| !c.is_empty()) {
        match parse_program(c) {
            Ok(p) => return Ok(p),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    parse_program(text.trim()).map_err(|e| first_err.unwrap_or(e))
}

/// Contents of ``` fenced blocks, in order; the info string is dropped.
pub fn fenced_blocks(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let Some(close) = after[body_start..].find("```") else { break };
        out.push(after[body_start..body_start + close].to_owned());
        rest = &after[body_start + close + 3..];
    }
    out
}

/// Compile `h` for a task of kind `kind`. Natural-language list and grid
/// rules go through `translator` once; program-form rules never consume a
/// language-model call.
pub fn compile(
    h: &Hypothesis,
    kind: TaskKind,
    translator: Option<&dyn Translator>,
    ledger: &mut CostLedger,
) -> Result<CompiledRule, CompileError> {
    if let Some(reason) = &h.ill_formed {
        return Err(CompileError::IllFormed(reason.clone()));
    }
    let done = |executable, translation_source| CompiledRule {
        origin: h.clone(),
        executable,
        translation_source,
        limits: Limits::default(),
    };
    match (kind, h.form) {
        (TaskKind::Acre, HypothesisForm::BlicketMap) => {
            Ok(done(Executable::Blicket(parse_blicket_rule(&h.payload)?), None))
        }
        (TaskKind::MiniScan, HypothesisForm::Grammar) => Ok(done(Executable::Grammar(parse_grammar(&h.payload)?), None)),
        (TaskKind::ListFn | TaskKind::MiniArc, HypothesisForm::Program) => {
            let program = extract_program(&h.payload)
                .map_err(|error| CompileError::Program { error, source_text: h.payload.clone() })?;
            Ok(done(Executable::Program(program), None))
        }
        (TaskKind::ListFn | TaskKind::MiniArc, HypothesisForm::NaturalLanguage) => {
            let translator = translator.ok_or(CompileError::NoTranslator)?;
            let reply = translator.translate(h.rule_text(), kind, ledger).map_err(CompileError::Translation)?;
            let program =
                extract_program(&reply).map_err(|error| CompileError::Program { error, source_text: reply.clone() })?;
            let source = program.source().to_owned();
            Ok(done(Executable::Program(program), Some(source)))
        }
        (kind, form) => Err(CompileError::FormMismatch { form, kind }),
    }
}
