//! Shared data model: values, examples, tasks, hypotheses and run configuration.
//!
//! Every interpreter, the refinement engine and the harness agree on output
//! equality through [`normalize_output`]: two predictions are the same exactly
//! when their normalized forms are structurally equal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

/// The four benchmark families a task can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "acre")]
    Acre,
    #[serde(rename = "miniscan")]
    MiniScan,
    #[serde(rename = "listfn")]
    ListFn,
    #[serde(rename = "miniarc")]
    MiniArc,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [TaskKind::Acre, TaskKind::MiniScan, TaskKind::ListFn, TaskKind::MiniArc];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Acre => "acre",
            TaskKind::MiniScan => "miniscan",
            TaskKind::ListFn => "listfn",
            TaskKind::MiniArc => "miniarc",
        }
    }

    /// Default (seen, unseen) counts per task.
    pub fn default_counts(self) -> (usize, usize) {
        match self {
            TaskKind::Acre => (6, 4),
            TaskKind::MiniScan => (14, 10),
            TaskKind::ListFn => (8, 8),
            TaskKind::MiniArc => (3, 3),
        }
    }

    /// Whether hypotheses for this kind go through the program sandbox.
    pub fn is_program_kind(self) -> bool {
        matches!(self, TaskKind::ListFn | TaskKind::MiniArc)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "acre" => Ok(TaskKind::Acre),
            "miniscan" => Ok(TaskKind::MiniScan),
            "listfn" | "list_functions" | "listfns" => Ok(TaskKind::ListFn),
            "miniarc" => Ok(TaskKind::MiniArc),
            other => Err(format!("unknown task kind `{other}`")),
        }
    }
}

/// Which side of an example a value sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    In,
    Out,
}

/// The light state of a Blicket machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    On,
    Off,
    Undetermined,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::On => "on",
            Label::Off => "off",
            Label::Undetermined => "undetermined",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "on" => Ok(Label::On),
            "off" => Ok(Label::Off),
            "undetermined" => Ok(Label::Undetermined),
            other => Err(format!("`{other}` is not one of on/off/undetermined")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("grid must have at least one row and one column")]
    Empty,
    #[error("row {row} has length {len}, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
    #[error("cell ({row}, {col}) has value {value}, outside 0-9")]
    OutOfPalette { row: usize, col: usize, value: i64 },
}

/// A rectangular grid of ARC palette colors (0-9).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Grid {
    rows: Vec<Vec<u8>>,
}

impl Grid {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self, GridError> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if width == 0 {
            return Err(GridError::Empty);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(GridError::Ragged { row: r, len: row.len(), expected: width });
            }
            if let Some((c, &v)) = row.iter().enumerate().find(|(_, &v)| v > 9) {
                return Err(GridError::OutOfPalette { row: r, col: c, value: i64::from(v) });
            }
        }
        Ok(Grid { rows })
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Result<Self, GridError> {
        let mut out = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            let mut cells = Vec::with_capacity(row.len());
            for (c, &v) in row.iter().enumerate() {
                if !(0..=9).contains(&v) {
                    return Err(GridError::OutOfPalette { row: r, col: c, value: v });
                }
                cells.push(v as u8);
            }
            out.push(cells);
        }
        Grid::new(out)
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn get(&self, r: usize, c: usize) -> Option<u8> {
        self.rows.get(r).and_then(|row| row.get(c)).copied()
    }

    pub fn into_rows(self) -> Vec<Vec<u8>> {
        self.rows
    }
}

/// An input or output of a task example.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    TokenSeq(Vec<String>),
    IntList(Vec<i64>),
    IntGrid(Grid),
    Label(Label),
    ObjectSet(Vec<String>),
}

impl Value {
    /// Build a token sequence from whitespace-separated text.
    pub fn tokens(text: &str) -> Value {
        Value::TokenSeq(text.split_whitespace().map(str::to_owned).collect())
    }

    pub fn objects<S: AsRef<str>>(objects: &[S]) -> Value {
        Value::ObjectSet(objects.iter().map(|o| o.as_ref().to_owned()).collect())
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::TokenSeq(_) => "token sequence",
            Value::IntList(_) => "integer list",
            Value::IntGrid(_) => "integer grid",
            Value::Label(_) => "label",
            Value::ObjectSet(_) => "object set",
        }
    }

    /// Whether this value is the right shape for `side` of a `kind` task.
    pub fn fits(&self, kind: TaskKind, side: Side) -> bool {
        matches!(
            (kind, side, self),
            (TaskKind::Acre, Side::In, Value::ObjectSet(_))
                | (TaskKind::Acre, Side::Out, Value::Label(_))
                | (TaskKind::MiniScan, _, Value::TokenSeq(_))
                | (TaskKind::ListFn, _, Value::IntList(_))
                | (TaskKind::MiniArc, _, Value::IntGrid(_))
        )
    }

    /// Rendered form spans several lines (grids).
    pub fn is_multiline(&self) -> bool {
        matches!(self, Value::IntGrid(_))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_value(self))
    }
}

fn render_int_row<T: fmt::Display>(items: &[T]) -> String {
    let inner: Vec<String> = items.iter().map(|v| v.to_string()).collect();
    format!("[{}]", inner.join(", "))
}

/// Serialize a value in the prompt/text format understood by [`parse_value`].
pub fn render_value(v: &Value) -> String {
    match v {
        Value::TokenSeq(tokens) => tokens.join(" "),
        Value::IntList(items) => render_int_row(items),
        Value::IntGrid(grid) => grid.rows().iter().map(|r| render_int_row(r)).collect::<Vec<_>>().join("\n"),
        Value::Label(label) => label.as_str().to_owned(),
        Value::ObjectSet(objects) => objects.join(", "),
    }
}

fn canonical_object(s: &str) -> String {
    s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Canonical form used for every output equality check.
pub fn normalize_output(v: &Value) -> Value {
    match v {
        Value::TokenSeq(tokens) => {
            Value::TokenSeq(tokens.iter().flat_map(|t| t.split_whitespace()).map(str::to_owned).collect())
        }
        Value::ObjectSet(objects) => Value::ObjectSet(objects.iter().map(|o| canonical_object(o)).collect()),
        other => other.clone(),
    }
}

/// Equality after normalization.
pub fn outputs_equal(a: &Value, b: &Value) -> bool {
    normalize_output(a) == normalize_output(b)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("format error at byte {position}: {message}")]
pub struct FormatError {
    pub position: usize,
    pub message: String,
}

impl FormatError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        FormatError { position, message: message.into() }
    }
}

/// Cursor over the text form of integer lists and grids.
struct IntScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> IntScanner<'a> {
    fn new(text: &'a str) -> Self {
        IntScanner { bytes: text.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<(), FormatError> {
        self.skip_ws();
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(FormatError::new(self.pos, format!("expected `{}`", b as char)))
        }
    }

    fn int(&mut self) -> Result<i64, FormatError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == digits {
            return Err(FormatError::new(start, "expected an integer"));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse().map_err(|_| FormatError::new(start, "integer out of range"))
    }

    fn int_list(&mut self) -> Result<Vec<i64>, FormatError> {
        self.expect(b'[')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(items);
        }
        loop {
            items.push(self.int()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(items);
                }
                _ => return Err(FormatError::new(self.pos, "expected `,` or `]`")),
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.bytes.len()
    }

    /// Is the next non-space content `[[` (a nested JSON-style grid)?
    fn nested_open(&self) -> bool {
        let mut i = self.pos;
        let mut seen_open = false;
        while let Some(&b) = self.bytes.get(i) {
            match b {
                b if b.is_ascii_whitespace() => {}
                b'[' if !seen_open => seen_open = true,
                b'[' => return true,
                _ => return false,
            }
            i += 1;
        }
        false
    }
}

fn parse_int_list(text: &str) -> Result<Vec<i64>, FormatError> {
    let mut sc = IntScanner::new(text);
    let items = sc.int_list()?;
    if !sc.at_end() {
        return Err(FormatError::new(sc.pos, "trailing text after list"));
    }
    Ok(items)
}

fn parse_grid(text: &str) -> Result<Grid, FormatError> {
    let mut sc = IntScanner::new(text);
    let mut rows = Vec::new();
    if sc.nested_open() {
        sc.expect(b'[')?;
        loop {
            rows.push(sc.int_list()?);
            sc.skip_ws();
            match sc.peek() {
                Some(b',') => sc.pos += 1,
                Some(b']') => {
                    sc.pos += 1;
                    break;
                }
                _ => return Err(FormatError::new(sc.pos, "expected `,` or `]`")),
            }
        }
    } else {
        loop {
            rows.push(sc.int_list()?);
            sc.skip_ws();
            if sc.peek() == Some(b',') {
                sc.pos += 1;
            }
            if sc.at_end() {
                break;
            }
        }
    }
    if !sc.at_end() {
        return Err(FormatError::new(sc.pos, "trailing text after grid"));
    }
    Grid::from_i64_rows(&rows).map_err(|e| FormatError::new(0, e.to_string()))
}

/// Parse the text form of a value for one side of a task kind.
pub fn parse_value(text: &str, kind: TaskKind, side: Side) -> Result<Value, FormatError> {
    match (kind, side) {
        (TaskKind::Acre, Side::In) => {
            let objects: Vec<String> =
                text.split([',', '\n']).map(canonical_object).filter(|o| !o.is_empty()).collect();
            if objects.is_empty() {
                return Err(FormatError::new(0, "expected at least one object"));
            }
            Ok(Value::ObjectSet(objects))
        }
        (TaskKind::Acre, Side::Out) => {
            text.parse::<Label>().map(Value::Label).map_err(|m| FormatError::new(0, m))
        }
        (TaskKind::MiniScan, _) => {
            let v = Value::tokens(text);
            match &v {
                Value::TokenSeq(t) if t.is_empty() => Err(FormatError::new(0, "expected at least one token")),
                _ => Ok(v),
            }
        }
        (TaskKind::ListFn, _) => parse_int_list(text).map(Value::IntList),
        (TaskKind::MiniArc, _) => parse_grid(text).map(Value::IntGrid),
    }
}

/// An input/output pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub input: Value,
    pub output: Value,
}

impl Example {
    pub fn new(input: Value, output: Value) -> Self {
        Example { input, output }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("task `{task}`: field `{field}`: {message}")]
pub struct SchemaError {
    pub task: String,
    pub field: String,
    pub message: String,
}

/// One induction problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub kind: TaskKind,
    pub seen: Vec<Example>,
    pub unseen: Vec<Example>,
    pub ood: Option<Vec<Example>>,
    /// Sandbox program computing the ground-truth function (list tasks).
    pub truth_program: Option<String>,
    /// Ground-truth grammar in the `Rule k:` / `Priority k:` text format.
    pub truth_grammar: Option<String>,
    pub noisy_flag: bool,
}

impl Task {
    pub fn new(id: impl Into<String>, kind: TaskKind, seen: Vec<Example>, unseen: Vec<Example>) -> Result<Self, SchemaError> {
        let task = Task {
            id: id.into(),
            kind,
            seen,
            unseen,
            ood: None,
            truth_program: None,
            truth_grammar: None,
            noisy_flag: false,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let err = |field: &str, message: String| SchemaError { task: self.id.clone(), field: field.into(), message };
        if self.seen.is_empty() {
            return Err(err("seen", "must contain at least one example".into()));
        }
        if self.unseen.is_empty() {
            return Err(err("unseen", "must contain at least one example".into()));
        }
        let splits = [("seen", Some(&self.seen)), ("unseen", Some(&self.unseen)), ("ood", self.ood.as_ref())];
        for (name, examples) in splits {
            for (i, ex) in examples.into_iter().flatten().enumerate() {
                if !ex.input.fits(self.kind, Side::In) {
                    return Err(err(name, format!("example {i}: input is a {}", ex.input.type_name())));
                }
                if !ex.output.fits(self.kind, Side::Out) {
                    return Err(err(name, format!("example {i}: output is a {}", ex.output.type_name())));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Json {
        let examples = |xs: &[Example]| -> Json {
            Json::Array(
                xs.iter()
                    .map(|e| serde_json::json!({"input": value_to_json(&e.input), "output": value_to_json(&e.output)}))
                    .collect(),
            )
        };
        let mut obj = serde_json::Map::new();
        obj.insert("id".into(), Json::String(self.id.clone()));
        obj.insert("kind".into(), Json::String(self.kind.as_str().into()));
        obj.insert("seen".into(), examples(&self.seen));
        obj.insert("unseen".into(), examples(&self.unseen));
        if let Some(ood) = &self.ood {
            obj.insert("ood".into(), examples(ood));
        }
        if let Some(p) = &self.truth_program {
            obj.insert("truth_program".into(), Json::String(p.clone()));
        }
        if let Some(g) = &self.truth_grammar {
            obj.insert("truth_grammar".into(), Json::String(g.clone()));
        }
        if self.noisy_flag {
            obj.insert("noisy".into(), Json::Bool(true));
        }
        Json::Object(obj)
    }

    pub fn from_json(json: &Json) -> Result<Task, SchemaError> {
        let id = json.get("id").and_then(Json::as_str).unwrap_or("<missing id>").to_owned();
        let err = |field: &str, message: String| SchemaError { task: id.clone(), field: field.into(), message };
        if json.get("id").and_then(Json::as_str).is_none() {
            return Err(err("id", "missing or not a string".into()));
        }
        let kind: TaskKind = json
            .get("kind")
            .and_then(Json::as_str)
            .ok_or_else(|| err("kind", "missing or not a string".into()))?
            .parse()
            .map_err(|m| err("kind", m))?;
        let examples = |field: &str, required: bool| -> Result<Option<Vec<Example>>, SchemaError> {
            let Some(raw) = json.get(field).filter(|v| !v.is_null()) else {
                return if required { Err(err(field, "missing".into())) } else { Ok(None) };
            };
            let arr = raw.as_array().ok_or_else(|| err(field, "not an array".into()))?;
            let mut out = Vec::with_capacity(arr.len());
            for (i, e) in arr.iter().enumerate() {
                let side = |name: &str, side: Side| -> Result<Value, SchemaError> {
                    let v = e.get(name).ok_or_else(|| err(field, format!("example {i}: missing `{name}`")))?;
                    value_from_json(v, kind, side).map_err(|m| err(field, format!("example {i}: {name}: {m}")))
                };
                out.push(Example::new(side("input", Side::In)?, side("output", Side::Out)?));
            }
            Ok(Some(out))
        };
        let text_field = |field: &str| -> Result<Option<String>, SchemaError> {
            match json.get(field) {
                None | Some(Json::Null) => Ok(None),
                Some(Json::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(err(field, "not a string".into())),
            }
        };
        let task = Task {
            id: id.clone(),
            kind,
            seen: examples("seen", true)?.unwrap_or_default(),
            unseen: examples("unseen", true)?.unwrap_or_default(),
            ood: examples("ood", false)?,
            truth_program: text_field("truth_program")?,
            truth_grammar: text_field("truth_grammar")?,
            noisy_flag: json.get("noisy").and_then(Json::as_bool).unwrap_or(false),
        };
        task.validate()?;
        Ok(task)
    }
}

/// JSON encoding of a value inside a task file.
pub fn value_to_json(v: &Value) -> Json {
    match v {
        Value::TokenSeq(tokens) => Json::String(tokens.join(" ")),
        Value::IntList(items) => Json::Array(items.iter().map(|&i| Json::from(i)).collect()),
        Value::IntGrid(grid) => Json::Array(
            grid.rows().iter().map(|r| Json::Array(r.iter().map(|&c| Json::from(c)).collect())).collect(),
        ),
        Value::Label(label) => Json::String(label.as_str().into()),
        Value::ObjectSet(objects) => Json::Array(objects.iter().map(|o| Json::String(o.clone())).collect()),
    }
}

fn json_int(v: &Json) -> Result<i64, String> {
    v.as_i64().ok_or_else(|| format!("`{v}` is not an integer"))
}

/// Decode a task-file JSON value for one side of a task kind.
pub fn value_from_json(v: &Json, kind: TaskKind, side: Side) -> Result<Value, String> {
    match (kind, side) {
        (TaskKind::Acre, Side::In) => {
            let arr = v.as_array().ok_or("expected an array of object descriptions")?;
            let mut objects = Vec::with_capacity(arr.len());
            for o in arr {
                let s = o.as_str().ok_or("object descriptions must be strings")?;
                let canon = canonical_object(s);
                if canon.is_empty() || canon.contains(',') {
                    return Err(format!("invalid object description `{s}`"));
                }
                objects.push(canon);
            }
            if objects.is_empty() {
                return Err("expected at least one object".into());
            }
            Ok(Value::ObjectSet(objects))
        }
        (TaskKind::Acre, Side::Out) => v.as_str().ok_or("expected a label string")?.parse().map(Value::Label),
        (TaskKind::MiniScan, _) => {
            let s = v.as_str().ok_or("expected a string of tokens")?;
            match Value::tokens(s) {
                Value::TokenSeq(t) if t.is_empty() => Err("expected at least one token".into()),
                tokens => Ok(tokens),
            }
        }
        (TaskKind::ListFn, _) => {
            let arr = v.as_array().ok_or("expected an array of integers")?;
            arr.iter().map(json_int).collect::<Result<_, _>>().map(Value::IntList)
        }
        (TaskKind::MiniArc, _) => {
            let arr = v.as_array().ok_or("expected an array of rows")?;
            let mut rows = Vec::with_capacity(arr.len());
            for row in arr {
                let cells = row.as_array().ok_or("grid rows must be arrays")?;
                rows.push(cells.iter().map(json_int).collect::<Result<Vec<_>, _>>()?);
            }
            Grid::from_i64_rows(&rows).map(Value::IntGrid).map_err(|e| e.to_string())
        }
    }
}

/// The representation a hypothesis is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisForm {
    NaturalLanguage,
    Program,
    Grammar,
    BlicketMap,
}

/// A proposed rule: verbatim proposer output plus the extracted payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    #[serde(rename = "text")]
    pub raw_text: String,
    pub payload: String,
    pub form: HypothesisForm,
    pub iteration: u32,
    pub sample_index: u32,
    /// Set when no rule could be extracted from `raw_text`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ill_formed: Option<String>,
}

impl Hypothesis {
    /// A hypothesis whose payload is given directly (scripted or hand-written rules).
    pub fn direct(payload: impl Into<String>, form: HypothesisForm) -> Self {
        let payload = payload.into();
        Hypothesis { raw_text: payload.clone(), payload, form, iteration: 1, sample_index: 0, ill_formed: None }
    }

    /// Text shown to the proposer when this rule is refined.
    pub fn rule_text(&self) -> &str {
        if self.ill_formed.is_some() || self.payload.trim().is_empty() {
            self.raw_text.trim()
        } else {
            self.payload.trim()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Io,
    Sc,
    Sr,
    Refine,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Io => "io",
            Method::Sc => "sc",
            Method::Sr => "sr",
            Method::Refine => "refine",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "io" => Ok(Method::Io),
            "sc" => Ok(Method::Sc),
            "sr" => Ok(Method::Sr),
            "refine" => Ok(Method::Refine),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpreterMode {
    Symbolic,
    Lm,
}

impl FromStr for InterpreterMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "symbolic" => Ok(InterpreterMode::Symbolic),
            "lm" => Ok(InterpreterMode::Lm),
            other => Err(format!("unknown interpreter `{other}`")),
        }
    }
}

/// How list and grid hypotheses are requested from the proposer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleForm {
    NaturalLanguage,
    Program,
}

/// Configuration of one method run over a task set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub max_iterations: u32,
    pub samples_per_iteration: u32,
    pub temperature_multi: f64,
    pub interpreter_mode: InterpreterMode,
    pub seed: u64,
    pub model_name: String,
    pub noisy_prompt: bool,
    /// Refine from the best hypothesis found so far rather than the last iteration's best.
    pub carry_best: bool,
    pub rule_form: RuleForm,
    pub max_tokens_rule: u32,
    pub max_tokens_translation: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Refine,
            max_iterations: 3,
            samples_per_iteration: 5,
            temperature_multi: 0.7,
            interpreter_mode: InterpreterMode::Symbolic,
            seed: 0,
            model_name: "gpt-4-0613".into(),
            noisy_prompt: false,
            carry_best: true,
            rule_form: RuleForm::NaturalLanguage,
            max_tokens_rule: 1024,
            max_tokens_translation: 2048,
        }
    }
}

impl RunConfig {
    /// Greedy decoding for a single sample, `temperature_multi` otherwise.
    pub fn sampling_temperature(&self) -> f64 {
        temperature_for(self.samples_per_iteration, self.temperature_multi)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations == 0 {
            return Err("max_iterations must be at least 1".into());
        }
        if self.samples_per_iteration == 0 {
            return Err("samples_per_iteration must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&self.temperature_multi) {
            return Err("temperature must lie in [0, 2]".into());
        }
        Ok(())
    }
}

pub fn temperature_for(n: u32, temperature_multi: f64) -> f64 {
    if n <= 1 {
        0.0
    } else {
        temperature_multi
    }
}
