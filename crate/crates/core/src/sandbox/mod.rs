//! A small, pure functional language over integers, integer lists and digit
//! grids. Programs see exactly one input, `xs` (list) or `g` (grid), and every
//! evaluation is bounded by [`Limits`].

mod eval;
mod syntax;

use thiserror::Error;

use crate::model::Value;

pub use syntax::Builtin;

/// Reference manual for the language, embedded in translation prompts.
pub const LANGUAGE_REFERENCE: &str = include_str!("../../docs/sandbox-language.md");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {position}: {message}")]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
    pub kind: SyntaxErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntaxErrorKind {
    Syntax,
    UnknownIdentifier,
}

impl std::fmt::Display for SyntaxErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SyntaxErrorKind::Syntax => "syntax error",
            SyntaxErrorKind::UnknownIdentifier => "unknown identifier",
        })
    }
}

impl SyntaxError {
    pub(crate) fn new(position: usize, message: impl Into<String>) -> Self {
        SyntaxError { position, message: message.into(), kind: SyntaxErrorKind::Syntax }
    }

    pub(crate) fn unknown(position: usize, message: impl Into<String>) -> Self {
        SyntaxError { position, message: message.into(), kind: SyntaxErrorKind::UnknownIdentifier }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("step limit of {0} exceeded")]
    StepLimit(u64),
    #[error("evaluation depth limit of {0} exceeded")]
    DepthLimit(usize),
    #[error("type error at offset {position}: {message}")]
    Type { position: usize, message: String },
    #[error("index out of bounds at offset {position}: {message}")]
    IndexOutOfBounds { position: usize, message: String },
    #[error("output size {size} exceeds limit of {limit} cells")]
    OutputSize { size: usize, limit: usize },
    #[error("division by zero at offset {0}")]
    DivisionByZero(usize),
    #[error("integer overflow at offset {0}")]
    Overflow(usize),
    #[error("input mismatch: {0}")]
    Input(String),
}

/// Resource bounds for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_steps: u64,
    pub max_depth: usize,
    pub max_output_cells: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steps: 100_000, max_depth: 64, max_output_cells: 4096 }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_steps == 0 || self.max_depth == 0 || self.max_output_cells == 0 {
            return Err("sandbox limits must all be positive".into());
        }
        Ok(())
    }
}

/// A parsed program. Immutable and freely shareable between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    source: String,
    root: syntax::Node,
    inputs: Vec<String>,
}

impl Program {
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Input variables the program refers to (`xs`, `g`, or neither).
    pub fn input_vars(&self) -> &[String] {
        &self.inputs
    }
}

pub fn parse_program(source: &str) -> Result<Program, SyntaxError> {
    let parsed = syntax::parse(source)?;
    Ok(Program { source: source.to_owned(), root: parsed.root, inputs: parsed.free_inputs })
}

/// Evaluate `p` on a list or grid input. The result has the same shape kind as
/// the input: lists map to lists and grids to grids.
pub fn eval_program(p: &Program, input: &Value, limits: &Limits) -> Result<Value, EvalError> {
    eval::run(p, input, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grid;

    fn run_list(src: &str, xs: &[i64]) -> Result<Vec<i64>, EvalError> {
        let p = parse_program(src).unwrap_or_else(|e| panic!("{src}: {e}"));
        match eval_program(&p, &Value::IntList(xs.to_vec()), &Limits::default())? {
            Value::IntList(v) => Ok(v),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn run_grid(src: &str, g: &[&[i64]]) -> Result<Vec<Vec<u8>>, EvalError> {
        let p = parse_program(src).unwrap_or_else(|e| panic!("{src}: {e}"));
        let grid = Grid::from_i64_rows(&g.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        match eval_program(&p, &Value::IntGrid(grid), &Limits::default())? {
            Value::IntGrid(out) => Ok(out.rows().to_vec()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn drop_first_and_last_two() {
        assert_eq!(run_list("slice(xs, 1, len(xs) - 2)", &[9, 7, 1, 8, 2, 3]).unwrap(), vec![7, 1, 8]);
        assert_eq!(run_list("slice(xs, 1, len(xs) - 2)", &[4, 4, 4]).unwrap(), Vec::<i64>::new());
        assert_eq!(run_list("xs", &[1, 2]).unwrap(), vec![1, 2]);
    }

    #[test]
    fn transpose_grid() {
        assert_eq!(run_grid("transpose(g)", &[&[1, 2], &[3, 4]]).unwrap(), vec![vec![1, 3], vec![2, 4]]);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = parse_program("map(xs, fn(v) v * 2").unwrap_err();
        assert_eq!(e.kind, SyntaxErrorKind::Syntax);
        assert_eq!(e.position, 19);
        let e = parse_program("frobnicate(xs)").unwrap_err();
        assert_eq!(e.kind, SyntaxErrorKind::UnknownIdentifier);
        assert_eq!(e.position, 0);
        assert_eq!(parse_program("map(xs, fn(v) w)").unwrap_err().kind, SyntaxErrorKind::UnknownIdentifier);
        assert!(parse_program("   ").is_err());
        assert!(parse_program("len(xs, xs)").is_err());
        assert!(parse_program("xs xs").is_err());
    }

    #[test]
    fn lambda_scope_does_not_leak() {
        assert!(parse_program("concat(map(xs, fn(v) v), [v])").is_err());
    }

    #[test]
    fn arithmetic_conventions() {
        assert_eq!(run_list("[7 / 2, -7 / 2, 7 mod 3, -7 % 3, 2 + 3 * 4, (2 + 3) * 4]", &[]).unwrap(), vec![
            3, -3, 1, -1, 14, 20
        ]);
        assert_eq!(run_list("[1 / 0]", &[]), Err(EvalError::DivisionByZero(3)));
        assert!(matches!(run_list("[9223372036854775807 + 1]", &[]), Err(EvalError::Overflow(_))));
    }

    #[test]
    fn slice_clamps_and_rejects_negative() {
        assert_eq!(run_list("slice(xs, 2, 100)", &[1, 2, 3, 4]).unwrap(), vec![3, 4]);
        assert_eq!(run_list("slice(xs, 3, 1)", &[1, 2, 3, 4]).unwrap(), Vec::<i64>::new());
        assert!(matches!(run_list("slice(xs, 0, len(xs) - 5)", &[1, 2]), Err(EvalError::IndexOutOfBounds { .. })));
        assert!(matches!(run_list("[index(xs, 100)]", &[1, 2]), Err(EvalError::IndexOutOfBounds { .. })));
    }

    #[test]
    fn list_builtins() {
        let xs = [3, 1, 3, 2];
        let cases: &[(&str, &[i64])] = &[
            ("[head(xs), last(xs), len(xs), sum(xs), min(xs), max(xs)]", &[3, 2, 4, 9, 1, 3]),
            ("tail(xs)", &[1, 3, 2]),
            ("init(xs)", &[3, 1, 3]),
            ("reverse(xs)", &[2, 3, 1, 3]),
            ("sort(xs)", &[1, 2, 3, 3]),
            ("unique(xs)", &[3, 1, 2]),
            ("concat(xs, [9])", &[3, 1, 3, 2, 9]),
            ("append(xs, 0)", &[3, 1, 3, 2, 0]),
            ("map(xs, fn(v) v * v)", &[9, 1, 9, 4]),
            ("filter(xs, fn(v) v > 1 and v != 2)", &[3, 3]),
            ("[count(xs, 3), if contains(xs, 2) then 1 else 0]", &[2, 1]),
            ("remove_all(xs, 3)", &[1, 2]),
            ("replace(xs, 3, 7)", &[7, 1, 7, 2]),
            ("repeat(head(xs), 2)", &[3, 3]),
            ("range(2, 5)", &[2, 3, 4]),
            ("range(5, 2)", &[]),
            ("flatten([xs, [0], []])", &[3, 1, 3, 2, 0]),
            ("map(xs, fn(v) sum(filter(xs, fn(w) w < v)))", &[3, 0, 3, 1]),
        ];
        for (src, want) in cases {
            assert_eq!(run_list(src, &xs).unwrap(), want.to_vec(), "{src}");
        }
        assert!(run_list("[head(xs)]", &[]).is_err());
        assert!(run_list("[min(xs)]", &[]).is_err());
    }

    #[test]
    fn grid_builtins() {
        let g: &[&[i64]] = &[&[1, 2, 0], &[3, 4, 0]];
        let cases: &[(&str, Vec<Vec<u8>>)] = &[
            ("rotate90(g)", vec![vec![3, 1], vec![4, 2], vec![0, 0]]),
            ("flip_h(g)", vec![vec![0, 2, 1], vec![0, 4, 3]]),
            ("flip_v(g)", vec![vec![3, 4, 0], vec![1, 2, 0]]),
            ("crop(g, 0, 1, 2, 2)", vec![vec![2, 0], vec![4, 0]]),
            ("pad(g, 3, 3, 9)", vec![vec![1, 2, 0], vec![3, 4, 0], vec![9, 9, 9]]),
            ("map_cells(g, fn(c) if c == 0 then 5 else c)", vec![vec![1, 2, 5], vec![3, 4, 5]]),
            ("recolor(g, 0, 8)", vec![vec![1, 2, 8], vec![3, 4, 8]]),
            ("translate(g, 1, 1, 0)", vec![vec![0, 0, 0], vec![0, 1, 2]]),
            ("overlay(g, recolor(g, 1, 0), 0)", vec![vec![1, 2, 0], vec![3, 4, 0]]),
            ("set_cell(g, 1, 2, 7)", vec![vec![1, 2, 0], vec![3, 4, 7]]),
            ("grid_from_rows(reverse(rows_as_lists(g)))", vec![vec![3, 4, 0], vec![1, 2, 0]]),
        ];
        for (src, want) in cases {
            assert_eq!(run_grid(src, g).unwrap(), *want, "{src}");
        }
        assert_eq!(
            run_grid("grid_from_rows([dims(g), [cell(g, 1, 1), count_color(g, 0)]])", g).unwrap(),
            vec![vec![2, 3], vec![4, 2]]
        );
        assert!(run_grid("grid_from_rows([row(g, 1), col(g, 2)])", g).unwrap_err().to_string().contains("ragged"));
        assert!(matches!(run_grid("map_cells(g, fn(c) c + 9)", g), Err(EvalError::Type { .. })));
        assert!(matches!(run_grid("crop(g, 1, 0, 2, 1)", g), Err(EvalError::IndexOutOfBounds { .. })));
    }

    #[test]
    fn limits_are_enforced() {
        let p = parse_program("map(range(0, 60), fn(a) sum(map(range(0, 60), fn(b) sum(range(0, 60)))))").unwrap();
        let small = Limits { max_steps: 1000, ..Limits::default() };
        assert_eq!(eval_program(&p, &Value::IntList(vec![]), &small), Err(EvalError::StepLimit(1000)));

        let p = parse_program("range(0, 5000)").unwrap();
        assert!(matches!(
            eval_program(&p, &Value::IntList(vec![]), &Limits::default()),
            Err(EvalError::OutputSize { size: 5000, .. })
        ));

        let deep = format!("{}xs{}", "reverse(".repeat(70), ")".repeat(70));
        let p = parse_program(&deep).unwrap();
        assert_eq!(eval_program(&p, &Value::IntList(vec![1]), &Limits::default()), Err(EvalError::DepthLimit(64)));
        let p = parse_program(&format!("{}xs{}", "reverse(".repeat(60), ")".repeat(60))).unwrap();
        assert!(eval_program(&p, &Value::IntList(vec![1]), &Limits::default()).is_ok());

        let nested = format!("{}1{}", "(".repeat(500), ")".repeat(500));
        assert!(parse_program(&nested).is_err());
        let nested = format!("{}1{}", "[(".repeat(48), ")]".repeat(48));
        assert!(parse_program(&nested).is_ok());
        assert!(parse_program(&format!("{}{}xs", "not ".repeat(45), "- ".repeat(45))).is_ok());
    }

    #[test]
    fn input_kind_mismatch_is_an_error() {
        let p = parse_program("transpose(g)").unwrap();
        assert!(matches!(eval_program(&p, &Value::IntList(vec![1]), &Limits::default()), Err(EvalError::Input(_))));
        let p = parse_program("len(xs)").unwrap();
        assert!(eval_program(&p, &Value::IntList(vec![1]), &Limits::default()).is_err());
    }

    #[test]
    fn closures_are_not_results() {
        assert!(matches!(run_list("fn(v) v", &[1]), Err(EvalError::Type { .. })));
        assert!(matches!(run_list("[fn(v) v]", &[1]), Err(EvalError::Type { .. })));
    }

    #[test]
    fn comments_and_symbolic_booleans() {
        assert_eq!(
            run_list("# keep the evens\nfilter(xs, fn(v) v % 2 == 0 && !(v == 4) || false)", &[1, 2, 4, 6]).unwrap(),
            vec![2, 6]
        );
    }

    #[test]
    fn every_builtin_is_documented() {
        for b in Builtin::ALL {
            assert!(LANGUAGE_REFERENCE.contains(&format!("`{}(", b.name())), "{} undocumented", b.name());
        }
    }
}
