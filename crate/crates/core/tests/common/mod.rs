//! Fixtures and reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use inductor::model::{Example, Grid, Label, Task, TaskKind, Value};
use inductor::proposer::{LmClient, LmError, LmRequest, RequestContext, ScriptedBackend};
use inductor::qcfg::{Grammar, Symbol};
use rand::Rng;

pub type ListRef = fn(&[i64]) -> Option<Vec<i64>>;
pub type GridRef = fn(&[Vec<u8>]) -> Option<Vec<Vec<u8>>>;

/// Sandbox list programs paired with straightforward Rust versions. `None`
/// marks inputs the program must reject.
pub fn list_programs() -> Vec<(&'static str, ListRef)> {
    vec![
        ("slice(xs, 1, len(xs) - 2)", |xs| {
            if xs.len() < 2 {
                return None;
            }
            let j = xs.len() - 2;
            Some(if j > 1 { xs[1..j].to_vec() } else { vec![] })
        }),
        ("reverse(xs)", |xs| Some(xs.iter().rev().copied().collect())),
        ("sort(xs)", |xs| {
            let mut v = xs.to_vec();
            v.sort();
            Some(v)
        }),
        ("unique(xs)", |xs| {
            let mut out: Vec<i64> = Vec::new();
            for &x in xs {
                if !out.contains(&x) {
                    out.push(x);
                }
            }
            Some(out)
        }),
        ("map(xs, fn(v) v * 2)", |xs| Some(xs.iter().map(|v| v * 2).collect())),
        ("filter(xs, fn(v) v mod 2 == 0)", |xs| Some(xs.iter().copied().filter(|v| v % 2 == 0).collect())),
        ("filter(xs, fn(v) v > head(xs))", |xs| Some(xs.iter().copied().filter(|&v| v > xs[0]).collect())),
        ("concat(xs, reverse(xs))", |xs| Some(xs.iter().chain(xs.iter().rev()).copied().collect())),
        ("append(xs, len(xs))", |xs| {
            let mut v = xs.to_vec();
            v.push(xs.len() as i64);
            Some(v)
        }),
        ("if len(xs) == 0 then xs else tail(xs)", |xs| Some(xs.iter().skip(1).copied().collect())),
        ("[len(xs), sum(xs)]", |xs| Some(vec![xs.len() as i64, xs.iter().sum()])),
        ("remove_all(xs, head(xs))", |xs| {
            let first = *xs.first()?;
            Some(xs.iter().copied().filter(|&v| v != first).collect())
        }),
        ("replace(xs, 3, 0)", |xs| Some(xs.iter().map(|&v| if v == 3 { 0 } else { v }).collect())),
        ("repeat(max(xs), len(xs))", |xs| Some(vec![*xs.iter().max()?; xs.len()])),
        ("range(0, len(xs))", |xs| Some((0..xs.len() as i64).collect())),
        ("flatten(map(xs, fn(v) [v, v]))", |xs| Some(xs.iter().flat_map(|&v| [v, v]).collect())),
        ("if len(xs) > 3 then slice(xs, 0, 3) else reverse(xs)", |xs| {
            Some(if xs.len() > 3 { xs[..3].to_vec() } else { xs.iter().rev().copied().collect() })
        }),
        ("map(xs, fn(v) (v - 10) / 3 + (v - 10) mod 3)", |xs| Some(xs.iter().map(|v| (v - 10) / 3 + (v - 10) % 3).collect())),
        ("filter(xs, fn(v) count(xs, v) > 1)", |xs| {
            Some(xs.iter().copied().filter(|v| xs.iter().filter(|w| *w == v).count() > 1).collect())
        }),
        ("map(range(0, len(xs)), fn(i) index(xs, len(xs) - 1 - i))", |xs| Some(xs.iter().rev().copied().collect())),
        // drop the last occurrence of every value
        (
            "map(filter(range(0, len(xs)), fn(i) contains(slice(xs, i + 1, len(xs)), index(xs, i))), fn(i) index(xs, i))",
            |xs| Some((0..xs.len()).filter(|&i| xs[i + 1..].contains(&xs[i])).map(|i| xs[i]).collect()),
        ),
    ]
}

fn dims(g: &[Vec<u8>]) -> (usize, usize) {
    (g.len(), g[0].len())
}

pub fn grid_programs() -> Vec<(&'static str, GridRef)> {
    vec![
        ("transpose(g)", |g| {
            let (h, w) = dims(g);
            Some((0..w).map(|c| (0..h).map(|r| g[r][c]).collect()).collect())
        }),
        ("rotate90(g)", |g| {
            let (h, w) = dims(g);
            Some((0..w).map(|r| (0..h).map(|c| g[h - 1 - c][r]).collect()).collect())
        }),
        ("flip_h(g)", |g| Some(g.iter().map(|row| row.iter().rev().copied().collect()).collect())),
        ("flip_v(g)", |g| Some(g.iter().rev().cloned().collect())),
        ("recolor(g, 0, 1)", |g| Some(g.iter().map(|row| row.iter().map(|&v| if v == 0 { 1 } else { v }).collect()).collect())),
        ("map_cells(g, fn(v) 9 - v)", |g| Some(g.iter().map(|row| row.iter().map(|&v| 9 - v).collect()).collect())),
        ("translate(g, 1, -1, 0)", |g| {
            let (h, w) = dims(g);
            Some(
                (0..h)
                    .map(|r| {
                        (0..w)
                            .map(|c| if r >= 1 && c + 1 < w { g[r - 1][c + 1] } else { 0 })
                            .collect()
                    })
                    .collect(),
            )
        }),
        ("overlay(g, flip_h(g), 0)", |g| {
            Some(
                g.iter()
                    .map(|row| {
                        let flipped: Vec<u8> = row.iter().rev().copied().collect();
                        row.iter().zip(flipped).map(|(&b, t)| if t == 0 { b } else { t }).collect()
                    })
                    .collect(),
            )
        }),
        ("pad(g, index(dims(g), 0) + 1, index(dims(g), 1) + 2, 5)", |g| {
            let (h, w) = dims(g);
            Some(
                (0..h + 1)
                    .map(|r| (0..w + 2).map(|c| if r < h && c < w { g[r][c] } else { 5 }).collect())
                    .collect(),
            )
        }),
        ("crop(g, 1, 0, 1, index(dims(g), 1))", |g| g.get(1).map(|row| vec![row.clone()])),
    ]
}

pub fn random_list<R: Rng>(rng: &mut R) -> Vec<i64> {
    let len = rng.gen_range(0..=10);
    let hi = if rng.gen_bool(0.5) { 5 } else { 99 };
    (0..len).map(|_| rng.gen_range(0..=hi)).collect()
}

pub fn random_grid<R: Rng>(rng: &mut R) -> Vec<Vec<u8>> {
    let (h, w) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
    (0..h).map(|_| (0..w).map(|_| rng.gen_range(0..=9)).collect()).collect()
}

pub fn grid_value(rows: Vec<Vec<u8>>) -> Value {
    Value::IntGrid(Grid::new(rows).expect("rectangular grid"))
}

/// Light state for a panel under an object labelling: any `on` object lights
/// the machine; otherwise an undetermined or unlabelled object leaves it
/// undetermined; otherwise it is off.
pub fn blicket_oracle(labels: &HashMap<String, Label>, panel: &[String]) -> Label {
    let states: Vec<Option<Label>> = panel.iter().map(|o| labels.get(o).copied()).collect();
    if states.contains(&Some(Label::On)) {
        Label::On
    } else if states.iter().all(|s| *s == Some(Label::Off)) {
        Label::Off
    } else {
        Label::Undetermined
    }
}

/// First derivation of every span, filled bottom-up by span length. Rules are
/// tried from lowest to highest priority, then by position; nonterminal spans
/// are assigned left to right, shortest first.
pub fn chart_first_derivation(g: &Grammar, input: &[String]) -> Option<Vec<String>> {
    let n = input.len();
    if n == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..g.rules().len()).collect();
    order.sort_by_key(|&i| (g.rules()[i].priority, i));
    let mut chart: Vec<Vec<Option<Vec<String>>>> = vec![vec![None; n + 1]; n + 1];
    for len in 1..=n {
        for start in 0..=n - len {
            let end = start + len;
            'rules: for &r in &order {
                let rule = &g.rules()[r];
                let mut bindings: Vec<(String, (usize, usize))> = Vec::new();
                if let Some(out) = align(&rule.lhs, input, start, end, &chart, &mut bindings) {
                    let mut result = Vec::new();
                    for sym in &rule.rhs {
                        match sym {
                            Symbol::Terminal(t) => result.push(t.clone()),
                            Symbol::Nonterminal(name) => {
                                let (_, (s, e)) = out.iter().find(|(n, _)| n == name).expect("bound");
                                result.extend(chart[*s][*e].clone().expect("child parsed"));
                            }
                        }
                    }
                    chart[start][end] = Some(result);
                    break 'rules;
                }
            }
        }
    }
    chart[0][n].clone()
}

type Bindings = Vec<(String, (usize, usize))>;

fn align(
    lhs: &[Symbol],
    input: &[String],
    pos: usize,
    end: usize,
    chart: &[Vec<Option<Vec<String>>>],
    bound: &mut Bindings,
) -> Option<Bindings> {
    let Some((first, rest)) = lhs.split_first() else {
        return (pos == end).then(|| bound.clone());
    };
    if pos >= end {
        return None;
    }
    match first {
        Symbol::Terminal(t) => {
            if input[pos] == *t {
                align(rest, input, pos + 1, end, chart, bound)
            } else {
                None
            }
        }
        Symbol::Nonterminal(name) => {
            for stop in pos + 1..=end {
                if chart[pos][stop].is_none() {
                    continue;
                }
                bound.push((name.clone(), (pos, stop)));
                if let Some(found) = align(rest, input, stop, end, chart, bound) {
                    return Some(found);
                }
                bound.pop();
            }
            None
        }
    }
}

/// Grammar text and example pairs from the worked MiniSCAN example.
pub const WORKED_GRAMMAR: &str = "Rule 1: siun -> BLUE\nPriority 1: 2\nRule 2: ##A mcneilt -> ##A ##A ##A\nPriority 2: 1";

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

/// A small MiniSCAN task consistent with [`WORKED_GRAMMAR`].
pub fn worked_scan_task() -> Task {
    let ex = |i: &str, o: &str| Example::new(Value::tokens(i), Value::tokens(o));
    Task::new(
        "scan-worked",
        TaskKind::MiniScan,
        vec![ex("siun", "BLUE"), ex("siun mcneilt", "BLUE BLUE BLUE"), ex("siun mcneilt mcneilt", &"BLUE ".repeat(9))],
        vec![ex("siun mcneilt", "BLUE BLUE BLUE")],
    )
    .unwrap()
}

/// Synthetic ACRE-shaped tasks (6 seen, 4 unseen).
pub fn acre_tasks(count: usize) -> Vec<Task> {
    let objects = ["blue rubber sphere", "red metal cube", "green rubber cylinder", "yellow metal sphere"];
    (0..count)
        .map(|i| {
            let blicket = objects[i % objects.len()];
            let ex = |panel: &[&str]| {
                let label = if panel.contains(&blicket) { Label::On } else { Label::Off };
                Example::new(Value::objects(panel), Value::Label(label))
            };
            let seen = (0..6).map(|k| ex(&[objects[k % 4], objects[(k + 1) % 4]])).collect();
            let unseen = (0..4).map(|k| ex(&[objects[k]])).collect();
            Task::new(format!("acre-{i:03}"), TaskKind::Acre, seen, unseen).unwrap()
        })
        .collect()
}

/// List tasks built from truth programs over seeded random inputs.
pub fn list_tasks(programs: &[&str], seed: u64) -> Vec<Task> {
    use inductor::sandbox::{eval_program, parse_program, Limits};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    programs
        .iter()
        .enumerate()
        .map(|(i, src)| {
            let p = parse_program(src).unwrap();
            let mut examples = Vec::new();
            while examples.len() < 16 {
                let len = rng.gen_range(3..=8);
                let input = Value::IntList((0..len).map(|_| rng.gen_range(0..=99)).collect());
                if let Ok(out) = eval_program(&p, &input, &Limits::default()) {
                    examples.push(Example::new(input, out));
                }
            }
            let unseen = examples.split_off(8);
            let mut t = Task::new(format!("list-{i:02}"), TaskKind::ListFn, examples, unseen).unwrap();
            t.truth_program = Some(src.to_string());
            t
        })
        .collect()
}

pub type Responder = Box<dyn Fn(&LmRequest, &RequestContext) -> Result<String, LmError> + Send + Sync>;

pub fn scripted_client(responder: Responder) -> (LmClient, Arc<ScriptedBackend>) {
    let backend = Arc::new(ScriptedBackend::from_responder(responder));
    (LmClient::new(backend.clone()), backend)
}
