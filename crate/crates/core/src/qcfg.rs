//! Quasi-synchronous grammar translation for MiniSCAN-style tasks.
//!
//! A rule pairs an input pattern with an output pattern that share
//! nonterminals (`##A`). Derivation is a deterministic top-down search:
//!
//! * at every span, rules are tried in ascending priority, then source order,
//!   so the lowest-priority rule matches outermost;
//! * nonterminal spans are assigned left to right, shortest first;
//! * the first alignment whose nonterminal spans all derive wins.
//!
//! Every left-hand side must contain a terminal and every nonterminal covers
//! at least one token, so each recursive call works on a strictly shorter
//! span and the search always terminates.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

pub const DEFAULT_MAX_DEPTH: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Terminal(String),
    Nonterminal(String),
}

impl Symbol {
    fn parse(token: &str) -> Symbol {
        let stripped = token.strip_prefix("##").or_else(|| token.strip_prefix('#'));
        match stripped {
            Some(id) if !id.is_empty() && id.chars().all(|c| c.is_alphanumeric() || c == '_') => {
                Symbol::Nonterminal(id.to_owned())
            }
            _ => Symbol::Terminal(token.to_owned()),
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Symbol::Terminal(_))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Terminal(t) => f.write_str(t),
            Symbol::Nonterminal(n) => write!(f, "##{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarRule {
    pub lhs: Vec<Symbol>,
    pub rhs: Vec<Symbol>,
    pub priority: i64,
    /// Position in source order.
    pub index: usize,
}

impl GrammarRule {
    pub fn new(lhs: &str, rhs: &str, priority: i64) -> Self {
        GrammarRule {
            lhs: lhs.split_whitespace().map(Symbol::parse).collect(),
            rhs: rhs.split_whitespace().map(Symbol::parse).collect(),
            priority,
            index: 0,
        }
    }

    fn nonterminals(side: &[Symbol]) -> impl Iterator<Item = &str> {
        side.iter().filter_map(|s| match s {
            Symbol::Nonterminal(n) => Some(n.as_str()),
            Symbol::Terminal(_) => None,
        })
    }

    pub fn is_primitive(&self) -> bool {
        self.lhs.iter().all(Symbol::is_terminal)
    }

    fn check(&self) -> Result<(), Constraint> {
        let mut seen = HashSet::new();
        for nt in Self::nonterminals(&self.lhs) {
            if !seen.insert(nt) {
                return Err(Constraint::RepeatedNonterminal(format!("##{nt}")));
            }
        }
        let rhs: HashSet<&str> = Self::nonterminals(&self.rhs).collect();
        if seen != rhs {
            return Err(Constraint::NonterminalMismatch);
        }
        if !self.lhs.iter().any(Symbol::is_terminal) {
            return Err(Constraint::NoTerminalOnLhs);
        }
        Ok(())
    }
}

impl fmt::Display for GrammarRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |s: &[Symbol]| s.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
        write!(f, "{} -> {}", side(&self.lhs), side(&self.rhs))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Constraint {
    #[error("nonterminal {0} repeated on the left-hand side")]
    RepeatedNonterminal(String),
    #[error("left- and right-hand sides use different nonterminals")]
    NonterminalMismatch,
    #[error("left-hand side has no terminal token")]
    NoTerminalOnLhs,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("no `Rule k:` lines found")]
    NoRules,
    #[error("rule {label} (index {index}): {constraint}")]
    Validation { index: usize, label: String, constraint: Constraint },
    #[error("grammar has no primitive (all-terminal) rule")]
    NoPrimitive,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error("input is empty")]
    EmptyInput,
    #[error("no derivation of `{0}` within the depth limit")]
    NoParse(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    rules: Vec<GrammarRule>,
    /// Rule indices in search order.
    order: Vec<usize>,
    pub max_depth: usize,
}

impl Grammar {
    /// Validate and index a rule list; `index` fields are reassigned to source order.
    pub fn new(rules: Vec<GrammarRule>) -> Result<Self, GrammarError> {
        let labels: Vec<String> = (1..=rules.len()).map(|k| k.to_string()).collect();
        Self::with_labels(rules, &labels)
    }

    fn with_labels(mut rules: Vec<GrammarRule>, labels: &[String]) -> Result<Self, GrammarError> {
        if rules.is_empty() {
            return Err(GrammarError::NoRules);
        }
        for (i, rule) in rules.iter_mut().enumerate() {
            rule.index = i;
            rule.check().map_err(|constraint| GrammarError::Validation {
                index: i,
                label: labels[i].clone(),
                constraint,
            })?;
        }
        if !rules.iter().any(GrammarRule::is_primitive) {
            return Err(GrammarError::NoPrimitive);
        }
        let mut order: Vec<usize> = (0..rules.len()).collect();
        order.sort_by_key(|&i| (rules[i].priority, i));
        Ok(Grammar { rules, order, max_depth: DEFAULT_MAX_DEPTH })
    }

    pub fn rules(&self) -> &[GrammarRule] {
        &self.rules
    }

    /// Render in the `Rule k:` / `Priority k:` text format.
    pub fn to_text(&self) -> String {
        let mut out = Vec::with_capacity(self.rules.len() * 2);
        for (k, rule) in self.rules.iter().enumerate() {
            out.push(format!("Rule {}: {}", k + 1, rule));
            out.push(format!("Priority {}: {}", k + 1, rule.priority));
        }
        out.join("\n")
    }

    /// Translate `input` with the deterministic search order.
    pub fn derive(&self, input: &[String]) -> Result<Vec<String>, DeriveError> {
        self.derive_with(input, true)
    }

    /// As [`Grammar::derive`], optionally without the span memo table.
    pub fn derive_with(&self, input: &[String], memoize: bool) -> Result<Vec<String>, DeriveError> {
        if input.is_empty() {
            return Err(DeriveError::EmptyInput);
        }
        let mut search = Search { grammar: self, tokens: input, memo: memoize.then(HashMap::new) };
        search
            .span(0, input.len(), 1)
            .map(|out| out.as_ref().clone())
            .ok_or_else(|| DeriveError::NoParse(input.join(" ")))
    }

    /// All distinct outputs, in search order, up to `limit`.
    ///
    /// Exhaustive and unmemoized: the cost grows with the number of
    /// derivations, so keep inputs short.
    pub fn enumerate_derivations(&self, input: &[String], limit: usize) -> Vec<Vec<String>> {
        if input.is_empty() || limit == 0 {
            return Vec::new();
        }
        let mut all = Enumerate { grammar: self, tokens: input }.span(0, input.len(), 1);
        all.truncate(limit);
        all
    }
}

pub fn derive(g: &Grammar, input: &[String]) -> Result<Vec<String>, DeriveError> {
    g.derive(input)
}

pub fn enumerate_derivations(g: &Grammar, input: &[String], limit: usize) -> Vec<Vec<String>> {
    g.enumerate_derivations(input, limit)
}

/// Every way to align `lhs` with `tokens[start..end]`, in search order.
/// Each alignment lists the `(start, end)` span of each lhs nonterminal.
fn alignments(lhs: &[Symbol], tokens: &[String], start: usize, end: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(
        lhs: &[Symbol],
        tokens: &[String],
        pos: usize,
        end: usize,
        bound: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        let Some((first, rest)) = lhs.split_first() else {
            if pos == end {
                out.push(bound.clone());
            }
            return;
        };
        // every remaining symbol consumes at least one token
        if end - pos < lhs.len() {
            return;
        }
        match first {
            Symbol::Terminal(t) => {
                if tokens[pos] == *t {
                    go(rest, tokens, pos + 1, end, bound, out);
                }
            }
            Symbol::Nonterminal(_) => {
                for len in 1..=(end - pos - rest.len()) {
                    bound.push((pos, pos + len));
                    go(rest, tokens, pos + len, end, bound, out);
                    bound.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    go(lhs, tokens, start, end, &mut Vec::new(), &mut out);
    out
}

fn substitute(rule: &GrammarRule, children: &[&[String]]) -> Vec<String> {
    let lhs_nts: Vec<&str> = GrammarRule::nonterminals(&rule.lhs).collect();
    let mut out = Vec::new();
    for sym in &rule.rhs {
        match sym {
            Symbol::Terminal(t) => out.push(t.clone()),
            Symbol::Nonterminal(n) => {
                let k = lhs_nts.iter().position(|m| m == n).expect("validated nonterminal sets");
                out.extend(children[k].iter().cloned());
            }
        }
    }
    out
}

/// Derivation per (start, end, depth); `None` records a failed span.
type SpanMemo = HashMap<(usize, usize, usize), Option<Rc<Vec<String>>>>;

struct Search<'a> {
    grammar: &'a Grammar,
    tokens: &'a [String],
    memo: Option<SpanMemo>,
}

impl Search<'_> {
    fn span(&mut self, start: usize, end: usize, depth: usize) -> Option<Rc<Vec<String>>> {
        if depth > self.grammar.max_depth {
            return None;
        }
        if let Some(hit) = self.memo.as_ref().and_then(|m| m.get(&(start, end, depth))) {
            return hit.clone();
        }
        let result = self.search(start, end, depth);
        if let Some(memo) = self.memo.as_mut() {
            memo.insert((start, end, depth), result.clone());
        }
        result
    }

    fn search(&mut self, start: usize, end: usize, depth: usize) -> Option<Rc<Vec<String>>> {
        let grammar = self.grammar;
        for &r in &grammar.order {
            let rule = &grammar.rules[r];
            'alignment: for spans in alignments(&rule.lhs, self.tokens, start, end) {
                let mut children = Vec::with_capacity(spans.len());
                for &(s, e) in &spans {
                    match self.span(s, e, depth + 1) {
                        Some(out) => children.push(out),
                        None => continue 'alignment,
                    }
                }
                let slices: Vec<&[String]> = children.iter().map(|c| c.as_slice()).collect();
                return Some(Rc::new(substitute(rule, &slices)));
            }
        }
        None
    }
}

struct Enumerate<'a> {
    grammar: &'a Grammar,
    tokens: &'a [String],
}

impl Enumerate<'_> {
    fn span(&self, start: usize, end: usize, depth: usize) -> Vec<Vec<String>> {
        if depth > self.grammar.max_depth {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for &r in &self.grammar.order {
            let rule = &self.grammar.rules[r];
            for spans in alignments(&rule.lhs, self.tokens, start, end) {
                let lists: Vec<Vec<Vec<String>>> = spans.iter().map(|&(s, e)| self.span(s, e, depth + 1)).collect();
                if lists.iter().any(Vec::is_empty) {
                    continue;
                }
                // odometer over child choices, leftmost child most significant
                let mut idx = vec![0usize; lists.len()];
                'combos: loop {
                    let slices: Vec<&[String]> = idx.iter().zip(&lists).map(|(&i, l)| l[i].as_slice()).collect();
                    let produced = substitute(rule, &slices);
                    if seen.insert(produced.clone()) {
                        out.push(produced);
                    }
                    let mut k = lists.len();
                    loop {
                        if k == 0 {
                            break 'combos;
                        }
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < lists[k].len() {
                            continue 'combos;
                        }
                        idx[k] = 0;
                    }
                }
            }
        }
        out
    }
}

fn parse_numbered<'a>(line: &'a str, keyword: &str) -> Option<(&'a str, &'a str)> {
    let rest = line.strip_prefix(keyword)?;
    let rest_trim = rest.trim_start();
    if rest_trim.len() == rest.len() {
        return None;
    }
    let digits = rest_trim.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest_trim.len());
    if digits == 0 {
        return None;
    }
    let (number, after) = rest_trim.split_at(digits);
    let body = after.trim_start().strip_prefix(':')?;
    Some((number, body.trim_matches(|c: char| c == '*' || c == '`' || c.is_whitespace())))
}

fn clean_line(line: &str) -> &str {
    let line = line.trim();
    let line = line.strip_prefix("- ").or_else(|| line.strip_prefix("* ")).unwrap_or(line);
    line.trim_matches('*').trim().trim_matches('`').trim()
}

/// Parse `Rule k: lhs -> rhs` / `Priority k: p` line pairs. Other lines are ignored.
pub fn parse_grammar(payload: &str) -> Result<Grammar, GrammarError> {
    let mut rules: Vec<(String, usize, String)> = Vec::new();
    let mut priorities: HashMap<String, (usize, String)> = HashMap::new();
    for (n, raw) in payload.lines().enumerate() {
        let line = clean_line(raw);
        let line_no = n + 1;
        if let Some((k, body)) = parse_numbered(line, "Rule") {
            if rules.iter().any(|(label, _, _)| label == k) {
                return Err(GrammarError::Format { line: line_no, message: format!("rule {k} defined twice") });
            }
            rules.push((k.to_owned(), line_no, body.to_owned()));
        } else if let Some((k, body)) = parse_numbered(line, "Priority") {
            priorities.insert(k.to_owned(), (line_no, body.to_owned()));
        }
    }
    if rules.is_empty() {
        return Err(GrammarError::NoRules);
    }
    let mut parsed = Vec::with_capacity(rules.len());
    let mut labels = Vec::with_capacity(rules.len());
    for (label, line, body) in rules {
        let (lhs, rhs) = body
            .split_once("->")
            .ok_or_else(|| GrammarError::Format { line, message: format!("rule {label} has no `->`") })?;
        let (pline, ptext) = priorities
            .get(&label)
            .ok_or_else(|| GrammarError::Format { line, message: format!("rule {label} has no priority") })?;
        let priority: i64 = ptext.trim().trim_end_matches('.').parse().map_err(|_| GrammarError::Format {
            line: *pline,
            message: format!("priority `{ptext}` is not an integer"),
        })?;
        let rule = GrammarRule::new(lhs, rhs, priority);
        if rule.lhs.is_empty() || rule.rhs.is_empty() {
            return Err(GrammarError::Format { line, message: format!("rule {label} has an empty side") });
        }
        parsed.push(rule);
        labels.push(label);
    }
    Grammar::with_labels(parsed, &labels)
}
