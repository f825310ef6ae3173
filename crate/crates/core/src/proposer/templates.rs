//! Prompt templates and the per-dataset strings bound into them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::model::{render_value, Example, RuleForm, TaskKind, Value};
use crate::sandbox::LANGUAGE_REFERENCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateName {
    HypothesisGeneration,
    HypothesisRefinement,
    HypothesisTranslation,
    RuleApplication,
    IoPrediction,
}

impl TemplateName {
    pub const ALL: [TemplateName; 5] = [
        TemplateName::HypothesisGeneration,
        TemplateName::HypothesisRefinement,
        TemplateName::HypothesisTranslation,
        TemplateName::RuleApplication,
        TemplateName::IoPrediction,
    ];

    /// File stem used for the shipped template and for overrides.
    pub fn file_stem(self) -> &'static str {
        match self {
            TemplateName::HypothesisGeneration => "hypothesis_generation",
            TemplateName::HypothesisRefinement => "hypothesis_refinement",
            TemplateName::HypothesisTranslation => "hypothesis_translation",
            TemplateName::RuleApplication => "rule_application",
            TemplateName::IoPrediction => "io_prediction",
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateName::HypothesisGeneration => include_str!("../../templates/hypothesis_generation.txt"),
            TemplateName::HypothesisRefinement => include_str!("../../templates/hypothesis_refinement.txt"),
            TemplateName::HypothesisTranslation => include_str!("../../templates/hypothesis_translation.txt"),
            TemplateName::RuleApplication => include_str!("../../templates/rule_application.txt"),
            TemplateName::IoPrediction => include_str!("../../templates/io_prediction.txt"),
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_stem())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: String,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template `{template}` has no binding for placeholder {{{placeholder}}}")]
    Unbound { template: TemplateName, placeholder: String },
    #[error("cannot read template override {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// The set of templates used by a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    by_name: BTreeMap<TemplateName, PromptTemplate>,
}

impl Default for Templates {
    fn default() -> Self {
        let by_name = TemplateName::ALL
            .into_iter()
            .map(|name| (name, PromptTemplate { name, body: name.builtin().to_owned() }))
            .collect();
        Templates { by_name }
    }
}

impl Templates {
    /// Shipped templates, with any `<stem>.txt` found in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut out = Templates::default();
        for name in TemplateName::ALL {
            let path = dir.join(format!("{}.txt", name.file_stem()));
            if path.exists() {
                let body = std::fs::read_to_string(&path)
                    .map_err(|source| TemplateError::Io { path: path.display().to_string(), source })?;
                out.by_name.insert(name, PromptTemplate { name, body });
            }
        }
        Ok(out)
    }

    pub fn get(&self, name: TemplateName) -> &PromptTemplate {
        &self.by_name[&name]
    }
}

/// Substitute `{Placeholder}` occurrences in one pass. Bound text is never
/// rescanned. An empty binding swallows one adjacent space, and a binding
/// that starts with a newline swallows the space before it, so that
/// "Input: {Test input}" renders a grid as "Input:\n[...]".
pub fn render_prompt(t: &PromptTemplate, bindings: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
    let body = t.body.as_str();
    let mut out = String::with_capacity(body.len() * 2);
    let mut i = 0;
    let mut skip_space = false;
    while i < body.len() {
        let rest = &body[i..];
        if let Some(name) = placeholder_at(rest) {
            let value = bindings
                .get(name)
                .ok_or_else(|| TemplateError::Unbound { template: t.name, placeholder: name.to_owned() })?;
            if value.is_empty() || value.starts_with('\n') {
                if out.ends_with(' ') {
                    out.pop();
                } else if value.is_empty() {
                    skip_space = true;
                }
            }
            out.push_str(value);
            i += name.len() + 2;
            continue;
        }
        let ch = rest.chars().next().expect("non-empty");
        if !(skip_space && ch == ' ') {
            out.push(ch);
        }
        skip_space = false;
        i += ch.len_utf8();
    }
    Ok(out)
}

fn placeholder_at(s: &str) -> Option<&str> {
    let inner = s.strip_prefix('{')?;
    let end = inner.find('}')?;
    let name = &inner[..end];
    let mut chars = name.chars();
    let ok = chars.next().is_some_and(|c| c.is_ascii_uppercase()) && chars.all(|c| c.is_ascii_alphabetic() || c == ' ');
    ok.then_some(name)
}

/// Placeholders that appear in a template body.
pub fn placeholders(body: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for (i, _) in body.match_indices('{') {
        if let Some(name) = placeholder_at(&body[i..]) {
            out.push(name);
        }
    }
    out
}

pub const NOISY_NOTE: &str =
    "Note that some examples may be noisy, and you should take this into account when proposing the rule.";

const ACRE_TASK: &str = "Each example is an input-output pair. The input is a list of objects. The presence of certain objects will trigger the light to turn on. The output is either \"on\" or \"off\", indicating the state of the light. For each object, determine whether it triggers the light to turn on, does not trigger it, or if it's undetermined.";
const ACRE_EXAMPLE: &str = "Each example is an input-output pair. The input is a list of objects. The presence of certain objects will trigger the light to turn on. The output is either \"on\", \"off\", or \"undetermined\", indicating the state of the light or if the state of the light cannot be determined. The rule indicates whether each object triggers the light to turn on, does not trigger it, or if it's undetermined.";
const ACRE_FORMAT: &str =
    "{\"object 1\": <\"on\"/\"off\"/\"undetermined\">, \"object 2\": <\"on\"/\"off\"/\"undetermined\">, ...}";
const SCAN_TASK: &str = "Your grammar rules should follow the format \"<input> -> <output>\". Use the prefix \"##\" to denote a nonterminal symbol. For instance, \"##A twice -> ##A ##A\". The left-hand side cannot contain repetitive nonterminal symbols; i.e., rules like \"##A ##A -> ##A twice\" or \"##A and ##A -> ##A twice\" are not allowed. Ensure that the number of unique nonterminal symbols on the left-hand side matches that on the right-hand side in your rules. For each rule, assign an integer as its priority. A higher priority indicates that the rule should be considered first when generating parses. Try to make your rules as minimal as possible.";
const SCAN_EXAMPLE: &str = "The grammar rules follow the format \"<input> -> <output>\". The \"##\" prefix denotes a nonterminal symbol. For instance, ##A twice -> ##A ##A. Each rule has an associated priority. A higher priority indicates that the rule should be considered first when generating parses. The output is a sequence of tokens joined by spaces.";
const SCAN_FORMAT: &str = "Rule 1: <Your rule>\nPriority 1: <Your priority>\n...";
const LIST_EXAMPLE: &str = "The input is a list of integers. The output is also a list of integers.";
const GRID_EXAMPLE: &str = "The input is a 2D grid of integers. The output is also a 2D grid of integers.";
const PROGRAM_TASK: &str = "Write the rule as a program in the sandbox language described below. The program is a single expression that reads its input from `xs` (a list) or `g` (a grid).";
const PROGRAM_FORMAT: &str = "<a sandbox-language program inside a fenced code block>";

/// Dataset-specific strings bound into every template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetText {
    pub task_description: String,
    pub example_description: String,
    pub feedback_description: String,
    pub rule_format: String,
}

/// Strings for `kind`. The noisy-example note applies to list tasks only.
pub fn dataset_text(kind: TaskKind, noisy: bool, form: RuleForm) -> DatasetText {
    let noisy_note = if noisy && kind == TaskKind::ListFn { NOISY_NOTE } else { "" };
    let (task, example, format) = match kind {
        TaskKind::Acre => (ACRE_TASK.to_owned(), ACRE_EXAMPLE, ACRE_FORMAT),
        TaskKind::MiniScan => (SCAN_TASK.to_owned(), SCAN_EXAMPLE, SCAN_FORMAT),
        TaskKind::ListFn | TaskKind::MiniArc => {
            let example = if kind == TaskKind::ListFn { LIST_EXAMPLE } else { GRID_EXAMPLE };
            match form {
                RuleForm::NaturalLanguage => (noisy_note.to_owned(), example, ""),
                RuleForm::Program => {
                    let mut task = format!("{PROGRAM_TASK}\n\n{LANGUAGE_REFERENCE}");
                    if !noisy_note.is_empty() {
                        task = format!("{noisy_note} {task}");
                    }
                    (task, example, PROGRAM_FORMAT)
                }
            }
        }
    };
    DatasetText {
        task_description: task,
        example_description: example.to_owned(),
        feedback_description: noisy_note.to_owned(),
        rule_format: format.to_owned(),
    }
}

/// "Label: value", or "Label:\nvalue" for block values such as grids.
pub fn labeled(label: &str, value: &str, block: bool) -> String {
    if block || value.contains('\n') {
        format!("{label}:\n{value}")
    } else {
        format!("{label}: {value}")
    }
}

/// Binding text for a value placed after "Input: " in a template.
pub fn inline_value(v: &Value) -> String {
    let text = render_value(v);
    if v.is_multiline() || text.contains('\n') {
        format!("\n{text}")
    } else {
        text
    }
}

pub fn labeled_value(label: &str, v: &Value) -> String {
    labeled(label, &render_value(v), v.is_multiline())
}

pub fn render_examples(examples: &[Example]) -> String {
    examples
        .iter()
        .map(|e| format!("{}\n{}", labeled_value("Input", &e.input), labeled_value("Output", &e.output)))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Start a binding map with the dataset strings filled in.
pub fn base_bindings(text: &DatasetText) -> BTreeMap<&'static str, String> {
    let mut b = BTreeMap::new();
    b.insert("Task description", text.task_description.clone());
    b.insert("Example description", text.example_description.clone());
    b.insert("Feedback description", text.feedback_description.clone());
    b.insert("Rule format", text.rule_format.clone());
    b.insert("Language reference", LANGUAGE_REFERENCE.trim_end().to_owned());
    b
}
