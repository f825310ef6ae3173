mod common;

use std::sync::{Arc, Mutex};

use inductor::engine::Session;
use inductor::model::{Example, Method, RuleForm, RunConfig, Task, TaskKind, Value};
use inductor::proposer::{LmClient, LmRequest, LmTranslator, ScriptedBackend, Templates, NOISY_NOTE};
use inductor::sandbox::LANGUAGE_REFERENCE;

use common::{grid_value, toks, WORKED_GRAMMAR};

/// Run one task and return every prompt sent, in order.
fn capture(task: &Task, run: RunConfig, replies: Vec<&'static str>) -> Vec<LmRequest> {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let backend = ScriptedBackend::from_responder(move |req, _| {
        let mut log = log.lock().unwrap();
        let reply = replies.get(log.len()).or(replies.last()).copied().unwrap_or("");
        log.push(req.clone());
        Ok(reply.to_owned())
    });
    let client = LmClient::new(Arc::new(backend));
    let templates = Templates::default();
    let session = Session { client: &client, templates: &templates, cfg: &run, compare_interpreters: false };
    let trace = session.run(task);
    assert!(trace.error.is_none(), "{:?}", trace.error);
    let out = seen.lock().unwrap().clone();
    out
}

fn single(method: Method) -> RunConfig {
    RunConfig { method, max_iterations: 1, samples_per_iteration: 1, ..RunConfig::default() }
}

fn list_task() -> Task {
    let ex = |i: Vec<i64>, o: Vec<i64>| Example::new(Value::IntList(i), Value::IntList(o));
    Task::new(
        "list",
        TaskKind::ListFn,
        vec![ex(vec![9, 7, 1, 8, 2, 3], vec![7, 1, 8]), ex(vec![5, 6, 7, 8], vec![6])],
        vec![ex(vec![1, 2, 3, 4, 5], vec![2, 3])],
    )
    .unwrap()
}

#[test]
fn acre_generation_prompt() {
    let task = Task::new(
        "acre",
        TaskKind::Acre,
        vec![Example::new(Value::objects(&["blue rubber sphere"]), Value::Label(inductor::model::Label::On))],
        vec![Example::new(Value::objects(&["red metal cube"]), Value::Label(inductor::model::Label::Off))],
    )
    .unwrap();
    let reqs = capture(&task, single(Method::Refine), vec![r#"Rule: {"blue rubber sphere": "on"}"#]);
    let expected = "Generate a rule that maps the following inputs to their corresponding outputs. \
Each example is an input-output pair. The input is a list of objects. The presence of certain objects will trigger the light to turn on. \
The output is either \"on\" or \"off\", indicating the state of the light. For each object, determine whether it triggers the light to turn on, \
does not trigger it, or if it's undetermined.\n\n\
Input: blue rubber sphere\nOutput: on\n\n\
Please format your rule as follows:\n\n\
Rule: {\"object 1\": <\"on\"/\"off\"/\"undetermined\">, \"object 2\": <\"on\"/\"off\"/\"undetermined\">, ...}";
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].prompt, expected);
    assert_eq!(reqs[0].temperature, 0.0);
}

#[test]
fn miniscan_generation_prompt() {
    let task = common::worked_scan_task();
    let reqs = capture(&task, single(Method::Refine), vec![WORKED_GRAMMAR]);
    let prompt = &reqs[0].prompt;
    assert!(prompt.starts_with(
        "Generate a rule that maps the following inputs to their corresponding outputs. Your grammar rules should follow the format \"<input> -> <output>\"."
    ));
    assert!(prompt.contains("Try to make your rules as minimal as possible.\n\nInput: siun\nOutput: BLUE\n\nInput: siun mcneilt\nOutput: BLUE BLUE BLUE\n\n"));
    assert!(prompt.ends_with("Please format your rule as follows:\n\nRule: Rule 1: <Your rule>\nPriority 1: <Your priority>\n..."));
}

#[test]
fn list_generation_prompt_without_task_text() {
    let reqs = capture(&list_task(), single(Method::Refine), vec!["Rule: drop the first and last two", "```\nslice(xs, 1, len(xs) - 2)\n```"]);
    assert_eq!(
        reqs[0].prompt,
        "Generate a rule that maps the following inputs to their corresponding outputs.\n\n\
Input: [9, 7, 1, 8, 2, 3]\nOutput: [7, 1, 8]\n\n\
Input: [5, 6, 7, 8]\nOutput: [6]\n\n\
Please format your rule as follows:\n\n\
Rule:"
    );
    // the second request translates the rule
    assert_eq!(
        reqs[1].prompt,
        format!(
            "You are an expert programmer in the sandbox language. Write a sandbox-language program for the following rule. \
The input is a list of integers. The output is also a list of integers.\n\n\
Rule: drop the first and last two\n\n{}\n\n\
Reply with the program alone inside a fenced code block.",
            LANGUAGE_REFERENCE.trim_end()
        )
    );
    assert_eq!(reqs[1].temperature, 0.0);
    assert_eq!(reqs.len(), 2);
}

#[test]
fn noisy_note_reaches_list_prompts_only() {
    let run = RunConfig { noisy_prompt: true, max_iterations: 2, ..single(Method::Refine) };
    let reqs = capture(&list_task(), run.clone(), vec!["Rule:\n```\nxs\n```"]);
    assert!(reqs[0].prompt.starts_with(&format!(
        "Generate a rule that maps the following inputs to their corresponding outputs. {NOISY_NOTE}\n\n"
    )));
    let refinement = reqs.iter().find(|r| r.prompt.contains("Your rule:")).expect("a refinement request");
    assert!(refinement.prompt.contains(&format!("corresponding outputs. {NOISY_NOTE} Please format")));

    let reqs = capture(&common::worked_scan_task(), run, vec![WORKED_GRAMMAR]);
    assert!(!reqs[0].prompt.contains(NOISY_NOTE));
}

#[test]
fn refinement_prompt_appends_feedback_to_generation_prompt() {
    let run = RunConfig { max_iterations: 2, rule_form: RuleForm::Program, ..single(Method::Refine) };
    let reqs = capture(&list_task(), run, vec!["Rule:\n```\nxs\n```", "Rule:\n```\nslice(xs, 1, len(xs) - 2)\n```"]);
    assert_eq!(reqs.len(), 2);
    let generation = &reqs[0].prompt;
    let suffix = "\n\nYour rule: xs\n\n\
This rule does not work for the following examples.\n\n\
Input: [9, 7, 1, 8, 2, 3]\nExpected output: [7, 1, 8]\nActual output: [9, 7, 1, 8, 2, 3]\n\n\
Input: [5, 6, 7, 8]\nExpected output: [6]\nActual output: [5, 6, 7, 8]\n\n\
Generate a new rule that maps the given inputs to their corresponding outputs. Please format your rule as follows:\n\n\
Rule: <a sandbox-language program inside a fenced code block>";
    assert_eq!(reqs[1].prompt, format!("{generation}{suffix}"));
}

#[test]
fn grid_io_prompt_puts_rows_on_their_own_lines() {
    let task = Task::new(
        "grid",
        TaskKind::MiniArc,
        vec![Example::new(grid_value(vec![vec![1, 0], vec![0, 1]]), grid_value(vec![vec![0, 1], vec![1, 0]]))],
        vec![Example::new(grid_value(vec![vec![2, 2]]), grid_value(vec![vec![2, 2]]))],
    )
    .unwrap();
    let reqs = capture(&task, single(Method::Io), vec!["Output:\n[2, 2]"]);
    assert_eq!(
        reqs[0].prompt,
        "Generate an output corresponding to the given input. The input is a 2D grid of integers. The output is also a 2D grid of integers.\n\n\
Input:\n[1, 0]\n[0, 1]\nOutput:\n[0, 1]\n[1, 0]\n\n\
Input:\n[2, 2]\nOutput:"
    );
}

#[test]
fn rule_application_prompt() {
    let task = common::worked_scan_task();
    let run = single(Method::Sr);
    let reqs = capture(&task, run, vec![WORKED_GRAMMAR, "Output: BLUE"]);
    let apply = &reqs[1];
    assert!(apply.prompt.starts_with(
        "Generate an output corresponding to the given input based on the rule. The grammar rules follow the format"
    ));
    assert!(apply.prompt.ends_with(&format!("\n\nRule: {WORKED_GRAMMAR}\n\nInput: siun\nOutput:")));
    assert_eq!(apply.temperature, 0.0);
    assert_eq!(toks("siun"), vec!["siun".to_string()]);
}

#[test]
fn translator_prompt_matches_the_one_sent() {
    let client = LmClient::new(Arc::new(ScriptedBackend::new(Vec::<String>::new())));
    let templates = Templates::default();
    let t = LmTranslator::new(&client, &templates, "m", 100, "x", 0);
    let p = t.prompt("reverse the list", TaskKind::MiniArc).unwrap();
    assert!(p.contains("The input is a 2D grid of integers."));
    assert!(p.contains("\n\nRule: reverse the list\n\n"));
}
