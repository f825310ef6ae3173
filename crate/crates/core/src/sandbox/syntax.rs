//! Lexer, AST and recursive-descent parser for the sandbox language.

use std::fmt;

use super::SyntaxError;

/// Maximum syntactic nesting accepted by the parser.
const MAX_NESTING: usize = 100;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    If,
    Then,
    Else,
    Fn,
    And,
    Or,
    Not,
    True,
    False,
    Mod,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Int(i) => return write!(f, "integer `{i}`"),
            Tok::Ident(s) => return write!(f, "identifier `{s}`"),
            Tok::If => "`if`",
            Tok::Then => "`then`",
            Tok::Else => "`else`",
            Tok::Fn => "`fn`",
            Tok::And => "`and`",
            Tok::Or => "`or`",
            Tok::Not => "`not`",
            Tok::True => "`true`",
            Tok::False => "`false`",
            Tok::Mod => "`mod`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Comma => "`,`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Slash => "`/`",
            Tok::Percent => "`%`",
            Tok::EqEq => "`==`",
            Tok::NotEq => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if b == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if b.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = src[start..i]
                .parse()
                .map_err(|_| SyntaxError::new(start, "integer literal out of range"))?;
            out.push((Tok::Int(n), start));
            continue;
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let tok = match &src[start..i] {
                "if" => Tok::If,
                "then" => Tok::Then,
                "else" => Tok::Else,
                "fn" => Tok::Fn,
                "and" => Tok::And,
                "or" => Tok::Or,
                "not" => Tok::Not,
                "true" => Tok::True,
                "false" => Tok::False,
                "mod" => Tok::Mod,
                word => Tok::Ident(word.to_owned()),
            };
            out.push((tok, start));
            continue;
        }
        let two = bytes.get(i + 1).copied();
        let (tok, len) = match (b, two) {
            (b'=', Some(b'=')) => (Tok::EqEq, 2),
            (b'!', Some(b'=')) => (Tok::NotEq, 2),
            (b'<', Some(b'=')) => (Tok::Le, 2),
            (b'>', Some(b'=')) => (Tok::Ge, 2),
            (b'&', Some(b'&')) => (Tok::And, 2),
            (b'|', Some(b'|')) => (Tok::Or, 2),
            (b'!', _) => (Tok::Not, 1),
            (b'<', _) => (Tok::Lt, 1),
            (b'>', _) => (Tok::Gt, 1),
            (b'(', _) => (Tok::LParen, 1),
            (b')', _) => (Tok::RParen, 1),
            (b'[', _) => (Tok::LBracket, 1),
            (b']', _) => (Tok::RBracket, 1),
            (b',', _) => (Tok::Comma, 1),
            (b'+', _) => (Tok::Plus, 1),
            (b'-', _) => (Tok::Minus, 1),
            (b'*', _) => (Tok::Star, 1),
            (b'/', _) => (Tok::Slash, 1),
            (b'%', _) => (Tok::Percent, 1),
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(SyntaxError::new(i, format!("unexpected character `{ch}`")));
            }
        };
        out.push((tok, start));
        i += len;
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

macro_rules! builtins {
    ($($variant:ident = $name:literal / $arity:literal),* $(,)?) => {
        /// Built-in functions, each with a fixed arity.
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum Builtin { $($variant),* }

        impl Builtin {
            pub const ALL: &'static [Builtin] = &[$(Builtin::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(Builtin::$variant => $name),* }
            }

            pub fn arity(self) -> usize {
                match self { $(Builtin::$variant => $arity),* }
            }

            pub fn lookup(name: &str) -> Option<Builtin> {
                match name { $($name => Some(Builtin::$variant),)* _ => None }
            }
        }
    };
}

builtins! {
    Head = "head" / 1,
    Tail = "tail" / 1,
    Last = "last" / 1,
    Init = "init" / 1,
    Len = "len" / 1,
    Reverse = "reverse" / 1,
    Sort = "sort" / 1,
    Unique = "unique" / 1,
    Concat = "concat" / 2,
    Append = "append" / 2,
    Slice = "slice" / 3,
    Index = "index" / 2,
    Map = "map" / 2,
    Filter = "filter" / 2,
    Count = "count" / 2,
    Contains = "contains" / 2,
    RemoveAll = "remove_all" / 2,
    Replace = "replace" / 3,
    Repeat = "repeat" / 2,
    Range = "range" / 2,
    Sum = "sum" / 1,
    Min = "min" / 1,
    Max = "max" / 1,
    Flatten = "flatten" / 1,
    Dims = "dims" / 1,
    Row = "row" / 2,
    Col = "col" / 2,
    Cell = "cell" / 3,
    SetCell = "set_cell" / 4,
    Transpose = "transpose" / 1,
    Rotate90 = "rotate90" / 1,
    FlipH = "flip_h" / 1,
    FlipV = "flip_v" / 1,
    Crop = "crop" / 5,
    Pad = "pad" / 4,
    MapCells = "map_cells" / 2,
    CountColor = "count_color" / 2,
    Recolor = "recolor" / 3,
    Translate = "translate" / 4,
    Overlay = "overlay" / 3,
    RowsAsLists = "rows_as_lists" / 1,
    GridFromRows = "grid_from_rows" / 1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    List(Vec<Node>),
    Unary(UnOp, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    If(Box<Node>, Box<Node>, Box<Node>),
    Lambda(String, Box<Node>),
    Call(Builtin, Vec<Node>),
}

/// An expression with the byte offset where it starts.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub expr: Expr,
    pub pos: usize,
}

/// Names the program may reference as its input.
pub const INPUT_VARS: [&str; 2] = ["xs", "g"];

pub struct Parsed {
    pub root: Node,
    pub free_inputs: Vec<String>,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    scopes: Vec<String>,
    free_inputs: Vec<String>,
    nesting: usize,
}

pub fn parse(src: &str) -> Result<Parsed, SyntaxError> {
    if src.trim().is_empty() {
        return Err(SyntaxError::new(0, "program is empty"));
    }
    let mut p = Parser { toks: lex(src)?, at: 0, scopes: Vec::new(), free_inputs: Vec::new(), nesting: 0 };
    let root = p.expr()?;
    let (tok, pos) = p.peek_full();
    if *tok != Tok::Eof {
        return Err(SyntaxError::new(pos, format!("unexpected {tok} after expression")));
    }
    Ok(Parsed { root, free_inputs: p.free_inputs })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_full(&self) -> (&Tok, usize) {
        let (t, p) = &self.toks[self.at];
        (t, *p)
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<usize, SyntaxError> {
        let (tok, pos) = self.peek_full();
        if *tok == want {
            self.bump();
            Ok(pos)
        } else {
            Err(SyntaxError::new(pos, format!("expected {want}, found {tok}")))
        }
    }

    fn enter(&mut self) -> Result<(), SyntaxError> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return Err(SyntaxError::new(self.pos(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Node, SyntaxError> {
        self.enter()?;
        let out = self.expr_inner();
        self.nesting -= 1;
        out
    }

    fn expr_inner(&mut self) -> Result<Node, SyntaxError> {
        let pos = self.pos();
        match self.peek() {
            Tok::If => {
                self.bump();
                let cond = self.expr()?;
                self.expect(Tok::Then)?;
                let then = self.expr()?;
                self.expect(Tok::Else)?;
                let other = self.expr()?;
                Ok(Node { expr: Expr::If(Box::new(cond), Box::new(then), Box::new(other)), pos })
            }
            Tok::Fn => {
                self.bump();
                self.expect(Tok::LParen)?;
                let (tok, ppos) = self.bump();
                let Tok::Ident(param) = tok else {
                    return Err(SyntaxError::new(ppos, format!("expected a parameter name, found {tok}")));
                };
                self.expect(Tok::RParen)?;
                self.scopes.push(param.clone());
                let body = self.expr();
                self.scopes.pop();
                Ok(Node { expr: Expr::Lambda(param, Box::new(body?)), pos })
            }
            _ => self.or(),
        }
    }

    fn binary_level(
        &mut self,
        next: fn(&mut Self) -> Result<Node, SyntaxError>,
        op_of: fn(&Tok) -> Option<BinOp>,
    ) -> Result<Node, SyntaxError> {
        let mut lhs = next(self)?;
        while let Some(op) = op_of(self.peek()) {
            let pos = self.bump().1;
            let rhs = next(self)?;
            lhs = Node { expr: Expr::Binary(op, Box::new(lhs), Box::new(rhs)), pos };
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Node, SyntaxError> {
        self.binary_level(Self::and, |t| (*t == Tok::Or).then_some(BinOp::Or))
    }

    fn and(&mut self) -> Result<Node, SyntaxError> {
        self.binary_level(Self::not, |t| (*t == Tok::And).then_some(BinOp::And))
    }

    fn not(&mut self) -> Result<Node, SyntaxError> {
        if *self.peek() == Tok::Not {
            let pos = self.bump().1;
            self.enter()?;
            let inner = self.not();
            self.nesting -= 1;
            return Ok(Node { expr: Expr::Unary(UnOp::Not, Box::new(inner?)), pos });
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Node, SyntaxError> {
        let lhs = self.add()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        let pos = self.bump().1;
        let rhs = self.add()?;
        Ok(Node { expr: Expr::Binary(op, Box::new(lhs), Box::new(rhs)), pos })
    }

    fn add(&mut self) -> Result<Node, SyntaxError> {
        self.binary_level(Self::mul, |t| match t {
            Tok::Plus => Some(BinOp::Add),
            Tok::Minus => Some(BinOp::Sub),
            _ => None,
        })
    }

    fn mul(&mut self) -> Result<Node, SyntaxError> {
        self.binary_level(Self::unary, |t| match t {
            Tok::Star => Some(BinOp::Mul),
            Tok::Slash => Some(BinOp::Div),
            Tok::Percent | Tok::Mod => Some(BinOp::Mod),
            _ => None,
        })
    }

    fn unary(&mut self) -> Result<Node, SyntaxError> {
        if *self.peek() == Tok::Minus {
            let pos = self.bump().1;
            self.enter()?;
            let inner = self.unary();
            self.nesting -= 1;
            let inner = inner?;
            if let Expr::Int(n) = inner.expr {
                return Ok(Node { expr: Expr::Int(-n), pos });
            }
            return Ok(Node { expr: Expr::Unary(UnOp::Neg, Box::new(inner)), pos });
        }
        self.primary()
    }

    fn args(&mut self, close: Tok) -> Result<Vec<Node>, SyntaxError> {
        let mut items = Vec::new();
        if *self.peek() == close {
            self.bump();
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            let (tok, pos) = self.peek_full();
            if *tok == Tok::Comma {
                self.bump();
            } else if *tok == close {
                self.bump();
                return Ok(items);
            } else {
                return Err(SyntaxError::new(pos, format!("expected `,` or {close}, found {tok}")));
            }
        }
    }

    fn primary(&mut self) -> Result<Node, SyntaxError> {
        let (tok, pos) = self.bump();
        let expr = match tok {
            Tok::Int(n) => Expr::Int(n),
            Tok::True => Expr::Bool(true),
            Tok::False => Expr::Bool(false),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                return Ok(inner);
            }
            Tok::LBracket => Expr::List(self.args(Tok::RBracket)?),
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    let builtin = Builtin::lookup(&name)
                        .ok_or_else(|| SyntaxError::unknown(pos, format!("unknown function `{name}`")))?;
                    self.bump();
                    let args = self.args(Tok::RParen)?;
                    if args.len() != builtin.arity() {
                        return Err(SyntaxError::new(
                            pos,
                            format!("`{name}` takes {} argument(s), got {}", builtin.arity(), args.len()),
                        ));
                    }
                    Expr::Call(builtin, args)
                } else if self.scopes.contains(&name) {
                    Expr::Var(name)
                } else if INPUT_VARS.contains(&name.as_str()) {
                    if !self.free_inputs.contains(&name) {
                        self.free_inputs.push(name.clone());
                    }
                    Expr::Var(name)
                } else if Builtin::lookup(&name).is_some() {
                    return Err(SyntaxError::new(pos, format!("builtin `{name}` must be called with arguments")));
                } else {
                    return Err(SyntaxError::unknown(pos, format!("unknown identifier `{name}`")));
                }
            }
            other => return Err(SyntaxError::new(pos, format!("unexpected {other}"))),
        };
        Ok(Node { expr, pos })
    }
}
