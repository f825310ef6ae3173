//! Task files, MiniSCAN generation, noise perturbation and OOD sampling.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Example, SchemaError, Task, TaskKind, Value};
use crate::qcfg::{Grammar, GrammarRule};
use crate::sandbox::{eval_program, parse_program, Limits};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("task `{task}` is {found}, expected {expected}")]
    KindMismatch { task: String, found: TaskKind, expected: TaskKind },
    #[error("task `{0}` has no truth program")]
    MissingTruthProgram(String),
    #[error("task `{task}`: truth program: {message}")]
    TruthProgram { task: String, message: String },
}

/// Differences from the expected per-kind split sizes.
pub fn count_warnings(task: &Task) -> Vec<String> {
    let (seen, unseen) = task.kind.default_counts();
    let mut out = Vec::new();
    if task.seen.len() != seen {
        out.push(format!("task `{}`: {} seen examples, expected {seen} for {}", task.id, task.seen.len(), task.kind));
    }
    if task.unseen.len() != unseen {
        out.push(format!(
            "task `{}`: {} unseen examples, expected {unseen} for {}",
            task.id,
            task.unseen.len(),
            task.kind
        ));
    }
    out
}

/// Parse a `{"tasks": [...]}` document.
pub fn tasks_from_json(doc: &Json, kind: Option<TaskKind>) -> Result<Vec<Task>, DatasetError> {
    let list = doc
        .get("tasks")
        .and_then(Json::as_array)
        .ok_or_else(|| DatasetError::Format("expected an object with a `tasks` array".into()))?;
    let mut tasks = Vec::with_capacity(list.len());
    for raw in list {
        let task = Task::from_json(raw)?;
        if let Some(expected) = kind.filter(|k| *k != task.kind) {
            return Err(DatasetError::KindMismatch { task: task.id, found: task.kind, expected });
        }
        for w in count_warnings(&task) {
            log::warn!("{w}");
        }
        tasks.push(task);
    }
    Ok(tasks)
}

/// Load and validate a task file. Split sizes that differ from the usual
/// counts for the kind are logged, not rejected.
pub fn load_tasks(path: &Path, kind: Option<TaskKind>) -> Result<Vec<Task>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.into(), source })?;
    let doc: Json = serde_json::from_str(&text).map_err(|source| DatasetError::Json { path: path.into(), source })?;
    tasks_from_json(&doc, kind)
}

pub fn tasks_to_json(tasks: &[Task]) -> Json {
    serde_json::json!({ "tasks": tasks.iter().map(Task::to_json).collect::<Vec<_>>() })
}

pub fn write_tasks(path: &Path, tasks: &[Task]) -> Result<(), DatasetError> {
    let mut text = serde_json::to_string_pretty(&tasks_to_json(tasks)).expect("task JSON serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| DatasetError::Io { path: path.into(), source })
}

/// Stable 64-bit seed from a base seed and a label.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 8 bytes"))
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Short English words the generator must never produce.
pub const STOPLIST: &[&str] = &[
    "bad", "bag", "ban", "bat", "bed", "bet", "big", "bin", "bit", "bob", "bud", "bug", "bun", "bus", "but", "dad",
    "dig", "dim", "din", "dog", "don", "dot", "dug", "fan", "fat", "fed", "fig", "fin", "fit", "fog", "fun", "fur",
    "gap", "gas", "get", "god", "got", "gum", "gun", "gut", "kid", "kin", "kit", "lab", "lad", "lap", "led", "leg",
    "let", "lid", "lip", "lit", "log", "lot", "mad", "man", "map", "mat", "men", "met", "mob", "mom", "mud", "mug",
    "nab", "nag", "nap", "net", "nod", "not", "nun", "nut", "pad", "pal", "pan", "pat", "peg", "pen", "pet", "pig",
    "pin", "pit", "pod", "pop", "pot", "pub", "pun", "pup", "put", "rag", "ram", "ran", "rap", "rat", "red", "rib",
    "rid", "rim", "rip", "rob", "rod", "rot", "rub", "rug", "run", "rut", "sad", "sat", "set", "sin", "sip", "sit",
    "sob", "sod", "son", "sun", "tab", "tag", "tan", "tap", "ten", "tin", "tip", "top", "tub", "tug", "van", "vet",
    "zip", "baby", "bake", "base", "bike", "bone", "dame", "data", "date", "dime", "dine", "dome", "done", "dose",
    "fade", "fame", "fate", "fine", "fire", "fume", "fuse", "gave", "game", "gate", "kite", "lake", "lame", "late",
    "line", "live", "lobe", "lone", "love", "make", "male", "mane", "mate", "mile", "mine", "mode", "mole", "mule",
    "name", "nine", "node", "nose", "note", "pale", "pane", "pike", "pile", "pine", "pole", "pope", "pose", "rage",
    "rake", "rate", "ride", "ripe", "rise", "robe", "rode", "role", "rope", "rose", "rule", "safe", "sake", "sale",
    "same", "site", "size", "sole", "some", "take", "tale", "tame", "tape", "time", "tide", "tile", "tone", "tube",
    "tune", "vase", "vote", "wake", "zone", "bale", "damn", "kill", "pass", "sell", "tell", "well", "bored",
    "solid", "salad", "robot", "lemon", "melon", "radio", "piano", "tomato", "potato", "banana", "pasta", "pizza",
    "sofa", "soda", "menu", "tuna", "lava", "kilo", "polo", "solo", "demo", "memo", "veto", "zero", "hero", "taco",
    "mama", "papa", "dada", "nana", "toga", "pita", "sumo", "kimono",
];

/// One pronounceable non-word: one or two consonant-vowel(-consonant)
/// syllables, 3 to 8 letters, never on the stoplist.
pub fn gen_pseudoword<R: Rng + ?Sized>(rng: &mut R) -> String {
    loop {
        let syllables = rng.gen_range(1..=2);
        let mut word = String::new();
        for _ in 0..syllables {
            word.push(*CONSONANTS.choose(rng).expect("non-empty") as char);
            word.push(*VOWELS.choose(rng).expect("non-empty") as char);
            if rng.gen_bool(0.5) {
                word.push(*CONSONANTS.choose(rng).expect("non-empty") as char);
            }
        }
        if (3..=8).contains(&word.len()) && !STOPLIST.contains(&word.as_str()) {
            return word;
        }
    }
}

/// Draws pseudowords that never repeat within one generator.
pub struct Lexicon<'r, R: Rng + ?Sized> {
    rng: &'r mut R,
    used: HashSet<String>,
}

impl<'r, R: Rng + ?Sized> Lexicon<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        Lexicon { rng, used: HashSet::new() }
    }

    pub fn fresh(&mut self) -> String {
        loop {
            let w = gen_pseudoword(self.rng);
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

pub const COLOR_WORDS: &[&str] = &["RED", "BLUE", "GREEN", "YELLOW", "PURPLE", "PINK", "ORANGE", "BLACK", "WHITE", "BROWN"];

/// Fixed English vocabulary used only when `english_inputs` is on.
const ENGLISH_PRIMITIVES: &[&str] = &["jump", "walk", "run", "look", "swim", "sing", "read", "fly"];
const ENGLISH_FUNCTIONS: [&str; 3] = ["thrice", "around", "after"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    ColorWords,
    Pseudowords,
}

impl std::str::FromStr for OutputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "colors" | "color_words" | "colour_words" => Ok(OutputMode::ColorWords),
            "pseudo" | "pseudowords" => Ok(OutputMode::Pseudowords),
            other => Err(format!("unknown output mode `{other}` (expected colors or pseudo)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiniScanSpec {
    pub primitive_count: usize,
    pub output_mode: OutputMode,
    pub seed: u64,
    /// Draw input words from a small English vocabulary instead of pseudowords.
    pub english_inputs: bool,
    pub seen_count: usize,
    pub unseen_count: usize,
}

impl Default for MiniScanSpec {
    fn default() -> Self {
        MiniScanSpec {
            primitive_count: 4,
            output_mode: OutputMode::ColorWords,
            seed: 0,
            english_inputs: false,
            seen_count: 14,
            unseen_count: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Cmd {
    Prim(usize),
    Triple(Box<Cmd>),
    Wrap(Box<Cmd>, Box<Cmd>),
    Swap(Box<Cmd>, Box<Cmd>),
}

impl Cmd {
    fn words(&self, prims: &[String], funcs: &[String; 3], out: &mut Vec<String>) {
        match self {
            Cmd::Prim(i) => out.push(prims[*i].clone()),
            Cmd::Triple(a) => {
                a.words(prims, funcs, out);
                out.push(funcs[0].clone());
            }
            Cmd::Wrap(a, b) | Cmd::Swap(a, b) => {
                a.words(prims, funcs, out);
                out.push(funcs[if matches!(self, Cmd::Wrap(..)) { 1 } else { 2 }].clone());
                b.words(prims, funcs, out);
            }
        }
    }

    /// A random command with exactly `k` function words; `op` fixes the
    /// outermost function when given.
    fn random<R: Rng + ?Sized>(rng: &mut R, k: usize, prims: usize, op: Option<usize>) -> Cmd {
        if k == 0 {
            return Cmd::Prim(rng.gen_range(0..prims));
        }
        match op.unwrap_or_else(|| rng.gen_range(0..3)) {
            0 => Cmd::Triple(Box::new(Cmd::random(rng, k - 1, prims, None))),
            op => {
                let left = rng.gen_range(0..k);
                let a = Box::new(Cmd::random(rng, left, prims, None));
                let b = Box::new(Cmd::random(rng, k - 1 - left, prims, None));
                if op == 1 {
                    Cmd::Wrap(a, b)
                } else {
                    Cmd::Swap(a, b)
                }
            }
        }
    }
}

/// The ground-truth grammar of a generated task: primitives bind tightest,
/// then the triple, wrap and swap functions.
pub fn miniscan_grammar(primitives: &[(String, String)], functions: &[String; 3]) -> Grammar {
    let mut rules: Vec<GrammarRule> = primitives.iter().map(|(w, o)| GrammarRule::new(w, o, 4)).collect();
    rules.push(GrammarRule::new(&format!("##A {}", functions[0]), "##A ##A ##A", 3));
    rules.push(GrammarRule::new(&format!("##A {} ##B", functions[1]), "##A ##B ##A", 2));
    rules.push(GrammarRule::new(&format!("##A {} ##B", functions[2]), "##B ##A", 1));
    Grammar::new(rules).expect("generated grammar is well formed")
}

/// Generate one MiniSCAN task. Input words, command structure and output
/// vocabulary come from separate seeded streams, so two specs differing only
/// in `output_mode` share their inputs.
pub fn gen_miniscan(spec: &MiniScanSpec) -> Task {
    let prim_count = spec.primitive_count.max(1);
    let mut word_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "miniscan/words"));
    let mut cmd_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "miniscan/commands"));
    let mut out_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "miniscan/outputs"));

    let mut lexicon = Lexicon::new(&mut word_rng);
    let (prim_words, func_words): (Vec<String>, [String; 3]) = if spec.english_inputs {
        let mut pool: Vec<&str> = ENGLISH_PRIMITIVES.to_vec();
        pool.shuffle(lexicon.rng);
        let mut prims: Vec<String> = pool.iter().take(prim_count).map(|s| s.to_string()).collect();
        while prims.len() < prim_count {
            prims.push(lexicon.fresh());
        }
        (prims, ENGLISH_FUNCTIONS.map(str::to_owned))
    } else {
        let prims = (0..prim_count).map(|_| lexicon.fresh()).collect();
        (prims, [lexicon.fresh(), lexicon.fresh(), lexicon.fresh()])
    };

    let outputs: Vec<String> = match spec.output_mode {
        OutputMode::ColorWords => {
            let mut palette: Vec<String> = COLOR_WORDS.iter().map(|s| s.to_string()).collect();
            palette.shuffle(&mut out_rng);
            let mut out: Vec<String> = palette.into_iter().take(prim_count).collect();
            let mut extra = 2;
            while out.len() < prim_count {
                out.push(format!("{}{extra}", COLOR_WORDS[out.len() % COLOR_WORDS.len()]));
                extra += 1;
            }
            out
        }
        OutputMode::Pseudowords => {
            // output words must not coincide with any input word
            let mut outs = Lexicon::new(&mut out_rng);
            outs.used.extend(prim_words.iter().cloned());
            outs.used.extend(func_words.iter().cloned());
            (0..prim_count).map(|_| outs.fresh()).collect()
        }
    };

    let primitives: Vec<(String, String)> = prim_words.iter().cloned().zip(outputs).collect();
    let grammar = miniscan_grammar(&primitives, &func_words);

    let mut commands: Vec<Cmd> = (0..prim_count).map(Cmd::Prim).collect();
    for op in 0..3 {
        for _ in 0..2 {
            commands.push(Cmd::random(&mut cmd_rng, 1, prim_count, Some(op)));
        }
    }
    let mut used: HashSet<Vec<String>> = HashSet::new();
    let mut examples: Vec<Example> = Vec::new();
    let mut push = |cmd: &Cmd, examples: &mut Vec<Example>| -> bool {
        let mut words = Vec::new();
        cmd.words(&prim_words, &func_words, &mut words);
        if used.contains(&words) {
            return false;
        }
        let Ok(out) = grammar.derive(&words) else { return false };
        used.insert(words.clone());
        examples.push(Example::new(Value::TokenSeq(words), Value::TokenSeq(out)));
        true
    };
    let mut fixed = commands.into_iter();
    let total = spec.seen_count + spec.unseen_count;
    let mut attempts = 0usize;
    while examples.len() < total && attempts < 100_000 {
        attempts += 1;
        let cmd = match fixed.next() {
            Some(c) => c,
            None => {
                // seen composites use two function words; unseen use two or three
                let k = if examples.len() < spec.seen_count { 2 } else { cmd_rng.gen_range(2..=3) };
                Cmd::random(&mut cmd_rng, k, prim_count, None)
            }
        };
        push(&cmd, &mut examples);
    }
    let unseen = examples.split_off(spec.seen_count.min(examples.len()));
    let mode = match spec.output_mode {
        OutputMode::ColorWords => "colors",
        OutputMode::Pseudowords => "pseudo",
    };
    let mut task = Task::new(format!("miniscan-{mode}-{}", spec.seed), TaskKind::MiniScan, examples, unseen)
        .expect("generated task is valid");
    task.truth_grammar = Some(grammar.to_text());
    task
}

/// `count` tasks with per-task seeds derived from `seed`.
pub fn gen_miniscan_set(count: usize, output_mode: OutputMode, seed: u64, english_inputs: bool) -> Vec<Task> {
    (0..count)
        .map(|i| {
            let spec = MiniScanSpec {
                output_mode,
                english_inputs,
                seed: derive_seed(seed, &format!("task/{i}")),
                ..MiniScanSpec::default()
            };
            let mut task = gen_miniscan(&spec);
            task.id = format!("miniscan-{i:03}");
            task
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub fraction: f64,
    pub seed: u64,
}

/// Number of seen exemplars a noise fraction selects.
pub fn noisy_count(fraction: f64, seen: usize) -> usize {
    ((fraction * seen as f64).round() as usize).min(seen)
}

fn other_value<R: Rng + ?Sized>(rng: &mut R, old: Option<i64>) -> i64 {
    loop {
        let v = rng.gen_range(0..=99);
        if Some(v) != old {
            return v;
        }
    }
}

/// Replace 1 or 2 output elements in `round(fraction * |seen|)` seen
/// exemplars of a list task. Empty outputs get one element inserted.
pub fn perturb_noise(task: &Task, spec: &NoiseSpec) -> Result<Task, DatasetError> {
    if task.kind != TaskKind::ListFn {
        return Err(DatasetError::KindMismatch { task: task.id.clone(), found: task.kind, expected: TaskKind::ListFn });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("noise/{}", task.id)));
    let mut out = task.clone();
    let k = noisy_count(spec.fraction, task.seen.len());
    let mut chosen = index::sample(&mut rng, task.seen.len(), k).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        let Value::IntList(items) = &mut out.seen[i].output else {
            unreachable!("validated listfn output")
        };
        if items.is_empty() {
            items.push(other_value(&mut rng, None));
            continue;
        }
        let changes = rng.gen_range(1..=2).min(items.len());
        for pos in index::sample(&mut rng, items.len(), changes) {
            items[pos] = other_value(&mut rng, Some(items[pos]));
        }
    }
    out.noisy_flag = true;
    Ok(out)
}

/// File name for a perturbed copy of `path`, e.g. `tasks.noise-0.25-s3.json`.
pub fn noise_sibling(path: &Path, spec: &NoiseSpec) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("tasks");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("json");
    path.with_file_name(format!("{stem}.noise-{}-s{}.{ext}", spec.fraction, spec.seed))
}

const OOD_ATTEMPTS: usize = 1000;

/// Sample `n` longer inputs for a list task and label them with its truth
/// program. `lengths` defaults to exactly twice the longest seen input.
pub fn ood_sample_lists(
    task: &Task,
    n: usize,
    lengths: Option<std::ops::RangeInclusive<usize>>,
    seed: u64,
) -> Result<Vec<Example>, DatasetError> {
    let source = task.truth_program.as_deref().ok_or_else(|| DatasetError::MissingTruthProgram(task.id.clone()))?;
    let program = parse_program(source)
        .map_err(|e| DatasetError::TruthProgram { task: task.id.clone(), message: e.to_string() })?;
    let lengths = lengths.unwrap_or_else(|| {
        let longest = task
            .seen
            .iter()
            .filter_map(|e| match &e.input {
                Value::IntList(xs) => Some(xs.len()),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let len = (2 * longest).max(1);
        len..=len
    });
    let limits = Limits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("ood/{}", task.id)));
    let mut out = Vec::with_capacity(n);
    let mut last_error = String::new();
    for _ in 0..n {
        let mut found = None;
        for _ in 0..OOD_ATTEMPTS {
            let len = rng.gen_range(lengths.clone());
            let input = Value::IntList((0..len).map(|_| rng.gen_range(0..=99)).collect());
            match eval_program(&program, &input, &limits) {
                Ok(output @ Value::IntList(_)) => {
                    found = Some(Example::new(input, output));
                    break;
                }
                Ok(other) => last_error = format!("program returned a {}", other.type_name()),
                Err(e) => last_error = e.to_string(),
            }
        }
        let ex = found.ok_or_else(|| DatasetError::TruthProgram {
            task: task.id.clone(),
            message: format!("no valid input in {OOD_ATTEMPTS} attempts (last error: {last_error})"),
        })?;
        out.push(ex);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Label;

    fn listfn_task(outputs: Vec<Vec<i64>>) -> Task {
        let seen = outputs.into_iter().map(|o| Example::new(Value::IntList(vec![1, 2, 3]), Value::IntList(o))).collect();
        let unseen = vec![Example::new(Value::IntList(vec![4]), Value::IntList(vec![4]))];
        Task::new("t", TaskKind::ListFn, seen, unseen).unwrap()
    }

    #[test]
    fn pseudowords_avoid_stoplist_and_fit_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let w = gen_pseudoword(&mut rng);
            assert!((3..=8).contains(&w.len()), "{w}");
            assert!(w.chars().all(|c| c.is_ascii_lowercase()));
            assert!(!STOPLIST.contains(&w.as_str()));
        }
    }

    #[test]
    fn lexicon_never_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut lex = Lexicon::new(&mut rng);
        let words: Vec<String> = (0..500).map(|_| lex.fresh()).collect();
        let unique: HashSet<&String> = words.iter().collect();
        assert_eq!(unique.len(), words.len());
    }

    #[test]
    fn miniscan_generation_shape() {
        let task = gen_miniscan(&MiniScanSpec { seed: 7, ..MiniScanSpec::default() });
        assert_eq!((task.seen.len(), task.unseen.len()), (14, 10));
        for e in task.seen.iter().chain(&task.unseen) {
            let Value::TokenSeq(out) = &e.output else { panic!() };
            assert!(out.iter().all(|t| COLOR_WORDS.contains(&t.as_str())), "{out:?}");
        }
        assert_eq!(task, gen_miniscan(&MiniScanSpec { seed: 7, ..MiniScanSpec::default() }));
    }

    #[test]
    fn familiarity_variant_shares_inputs() {
        let colors = gen_miniscan(&MiniScanSpec { seed: 3, ..MiniScanSpec::default() });
        let pseudo = gen_miniscan(&MiniScanSpec { seed: 3, output_mode: OutputMode::Pseudowords, ..MiniScanSpec::default() });
        let inputs = |t: &Task| t.seen.iter().map(|e| e.input.clone()).collect::<Vec<_>>();
        assert_eq!(inputs(&colors), inputs(&pseudo));
        assert_ne!(colors.seen, pseudo.seen);
    }

    #[test]
    fn noise_counts_follow_rounding() {
        assert_eq!(noisy_count(0.125, 8), 1);
        assert_eq!(noisy_count(0.25, 8), 2);
        assert_eq!(noisy_count(0.5, 8), 4);
        assert_eq!(noisy_count(1.0, 3), 3);
    }

    #[test]
    fn empty_outputs_gain_one_element() {
        let task = listfn_task(vec![vec![]; 8]);
        let noisy = perturb_noise(&task, &NoiseSpec { fraction: 0.5, seed: 0 }).unwrap();
        let grown = noisy.seen.iter().filter(|e| e.output != Value::IntList(vec![])).count();
        assert_eq!(grown, 4);
        assert!(noisy.noisy_flag);
    }

    #[test]
    fn noise_rejects_other_kinds() {
        let task = Task::new(
            "a",
            TaskKind::Acre,
            vec![Example::new(Value::objects(&["x"]), Value::Label(Label::On))],
            vec![Example::new(Value::objects(&["y"]), Value::Label(Label::Off))],
        )
        .unwrap();
        assert!(perturb_noise(&task, &NoiseSpec { fraction: 0.5, seed: 0 }).is_err());
    }

    #[test]
    fn ood_identity_and_trim() {
        let mut task = listfn_task(vec![vec![1]; 8]);
        task.truth_program = Some("xs".into());
        let ood = ood_sample_lists(&task, 5, Some(12..=12), 0).unwrap();
        assert!(ood.iter().all(|e| e.input == e.output));
        task.truth_program = Some("slice(xs, 1, len(xs) - 2)".into());
        let ood = ood_sample_lists(&task, 5, Some(12..=12), 0).unwrap();
        for e in &ood {
            let (Value::IntList(i), Value::IntList(o)) = (&e.input, &e.output) else { panic!() };
            assert_eq!(o.as_slice(), &i[1..10]);
        }
        let default = ood_sample_lists(&task, 1, None, 0).unwrap();
        assert!(matches!(&default[0].input, Value::IntList(xs) if xs.len() == 6));
        task.truth_program = None;
        assert!(matches!(ood_sample_lists(&task, 1, None, 0), Err(DatasetError::MissingTruthProgram(_))));
    }

    #[test]
    fn sibling_name_carries_spec() {
        let p = noise_sibling(Path::new("/d/list.json"), &NoiseSpec { fraction: 0.25, seed: 3 });
        assert_eq!(p, PathBuf::from("/d/list.noise-0.25-s3.json"));
    }
}
