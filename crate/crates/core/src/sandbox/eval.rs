use std::rc::Rc;

use super::syntax::{BinOp, Builtin, Expr, Node, UnOp};
use super::{EvalError, Limits, Program};
use crate::model::{Grid, Value};

type R<T> = Result<T, EvalError>;

#[derive(Debug, Clone)]
enum V<'p> {
    Int(i64),
    Bool(bool),
    List(Rc<Vec<V<'p>>>),
    Grid(Rc<Cells>),
    Fn(Rc<Closure<'p>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Cells {
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl Cells {
    fn at(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.w + c]
    }
}

#[derive(Debug)]
struct Closure<'p> {
    param: &'p str,
    body: &'p Node,
    env: Env<'p>,
}

type Env<'p> = Option<Rc<Frame<'p>>>;

#[derive(Debug)]
struct Frame<'p> {
    name: &'p str,
    value: V<'p>,
    parent: Env<'p>,
}

fn lookup<'p>(env: &Env<'p>, name: &str) -> Option<V<'p>> {
    let mut cur = env.as_ref();
    while let Some(frame) = cur {
        if frame.name == name {
            return Some(frame.value.clone());
        }
        cur = frame.parent.as_ref();
    }
    None
}

fn type_name(v: &V) -> &'static str {
    match v {
        V::Int(_) => "int",
        V::Bool(_) => "bool",
        V::List(_) => "list",
        V::Grid(_) => "grid",
        V::Fn(_) => "function",
    }
}

fn type_err<T>(pos: usize, msg: impl Into<String>) -> R<T> {
    Err(EvalError::Type { position: pos, message: msg.into() })
}

fn oob<T>(pos: usize, msg: impl Into<String>) -> R<T> {
    Err(EvalError::IndexOutOfBounds { position: pos, message: msg.into() })
}

fn values_equal(a: &V, b: &V, pos: usize) -> R<bool> {
    Ok(match (a, b) {
        (V::Int(x), V::Int(y)) => x == y,
        (V::Bool(x), V::Bool(y)) => x == y,
        (V::Grid(x), V::Grid(y)) => x == y,
        (V::List(x), V::List(y)) => {
            if x.len() != y.len() {
                return Ok(false);
            }
            for (p, q) in x.iter().zip(y.iter()) {
                if !values_equal(p, q, pos)? {
                    return Ok(false);
                }
            }
            true
        }
        (V::Fn(_), _) | (_, V::Fn(_)) => return type_err(pos, "functions cannot be compared"),
        _ => false,
    })
}

struct Machine {
    limits: Limits,
    steps: u64,
    depth: usize,
}

impl Machine {
    fn tick(&mut self, n: u64) -> R<()> {
        self.steps = self.steps.saturating_add(n);
        if self.steps > self.limits.max_steps {
            return Err(EvalError::StepLimit(self.limits.max_steps));
        }
        Ok(())
    }

    fn sized(&mut self, size: usize) -> R<()> {
        if size > self.limits.max_output_cells {
            return Err(EvalError::OutputSize { size, limit: self.limits.max_output_cells });
        }
        self.tick(size as u64)
    }

    fn list<'p>(&mut self, items: Vec<V<'p>>) -> R<V<'p>> {
        self.sized(items.len())?;
        Ok(V::List(Rc::new(items)))
    }

    fn ints<'p>(&mut self, items: impl IntoIterator<Item = i64>) -> R<V<'p>> {
        let items: Vec<V<'p>> = items.into_iter().map(V::Int).collect();
        self.list(items)
    }

    fn grid<'p>(&mut self, h: usize, w: usize, data: Vec<u8>) -> R<V<'p>> {
        debug_assert_eq!(h * w, data.len());
        self.sized(data.len())?;
        Ok(V::Grid(Rc::new(Cells { h, w, data })))
    }

    fn eval<'p>(&mut self, node: &'p Node, env: &Env<'p>) -> R<V<'p>> {
        self.tick(1)?;
        if self.depth >= self.limits.max_depth {
            return Err(EvalError::DepthLimit(self.limits.max_depth));
        }
        self.depth += 1;
        let out = self.eval_node(node, env);
        self.depth -= 1;
        out
    }

    fn eval_node<'p>(&mut self, node: &'p Node, env: &Env<'p>) -> R<V<'p>> {
        let pos = node.pos;
        match &node.expr {
            Expr::Int(n) => Ok(V::Int(*n)),
            Expr::Bool(b) => Ok(V::Bool(*b)),
            Expr::Var(name) => match lookup(env, name) {
                Some(v) => Ok(v),
                None => Err(EvalError::Input(format!("`{name}` is not bound for this input"))),
            },
            Expr::List(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(item, env)?);
                }
                self.list(out)
            }
            Expr::Unary(UnOp::Neg, inner) => {
                let n = self.int(inner, env)?;
                n.checked_neg().map(V::Int).ok_or(EvalError::Overflow(pos))
            }
            Expr::Unary(UnOp::Not, inner) => Ok(V::Bool(!self.boolean(inner, env)?)),
            Expr::Binary(op, lhs, rhs) => self.binary(*op, lhs, rhs, env, pos),
            Expr::If(cond, then, other) => {
                if self.boolean(cond, env)? {
                    self.eval(then, env)
                } else {
                    self.eval(other, env)
                }
            }
            Expr::Lambda(param, body) => {
                Ok(V::Fn(Rc::new(Closure { param: param.as_str(), body, env: env.clone() })))
            }
            Expr::Call(builtin, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, env)?);
                }
                self.call_builtin(*builtin, vals, pos)
            }
        }
    }

    fn int<'p>(&mut self, node: &'p Node, env: &Env<'p>) -> R<i64> {
        match self.eval(node, env)? {
            V::Int(n) => Ok(n),
            other => type_err(node.pos, format!("expected int, found {}", type_name(&other))),
        }
    }

    fn boolean<'p>(&mut self, node: &'p Node, env: &Env<'p>) -> R<bool> {
        match self.eval(node, env)? {
            V::Bool(b) => Ok(b),
            other => type_err(node.pos, format!("expected bool, found {}", type_name(&other))),
        }
    }

    fn binary<'p>(&mut self, op: BinOp, lhs: &'p Node, rhs: &'p Node, env: &Env<'p>, pos: usize) -> R<V<'p>> {
        match op {
            BinOp::And => return Ok(V::Bool(self.boolean(lhs, env)? && self.boolean(rhs, env)?)),
            BinOp::Or => return Ok(V::Bool(self.boolean(lhs, env)? || self.boolean(rhs, env)?)),
            BinOp::Eq | BinOp::Ne => {
                let a = self.eval(lhs, env)?;
                let b = self.eval(rhs, env)?;
                let eq = values_equal(&a, &b, pos)?;
                return Ok(V::Bool(if op == BinOp::Eq { eq } else { !eq }));
            }
            _ => {}
        }
        let a = self.int(lhs, env)?;
        let b = self.int(rhs, env)?;
        let overflow = EvalError::Overflow(pos);
        Ok(match op {
            BinOp::Add => V::Int(a.checked_add(b).ok_or(overflow)?),
            BinOp::Sub => V::Int(a.checked_sub(b).ok_or(overflow)?),
            BinOp::Mul => V::Int(a.checked_mul(b).ok_or(overflow)?),
            BinOp::Div | BinOp::Mod if b == 0 => return Err(EvalError::DivisionByZero(pos)),
            BinOp::Div => V::Int(a.checked_div(b).ok_or(overflow)?),
            BinOp::Mod => V::Int(a.checked_rem(b).ok_or(overflow)?),
            BinOp::Lt => V::Bool(a < b),
            BinOp::Le => V::Bool(a <= b),
            BinOp::Gt => V::Bool(a > b),
            BinOp::Ge => V::Bool(a >= b),
            BinOp::And | BinOp::Or | BinOp::Eq | BinOp::Ne => unreachable!(),
        })
    }

    fn apply<'p>(&mut self, f: &Closure<'p>, arg: V<'p>) -> R<V<'p>> {
        let env = Some(Rc::new(Frame { name: f.param, value: arg, parent: f.env.clone() }));
        self.eval(f.body, &env)
    }

    fn apply_bool<'p>(&mut self, f: &Closure<'p>, arg: V<'p>, pos: usize) -> R<bool> {
        match self.apply(f, arg)? {
            V::Bool(b) => Ok(b),
            other => type_err(pos, format!("predicate returned {}, expected bool", type_name(&other))),
        }
    }

    fn call_builtin<'p>(&mut self, b: Builtin, args: Vec<V<'p>>, pos: usize) -> R<V<'p>> {
        let a = Args { vals: args, pos, name: b.name() };
        use Builtin::*;
        match b {
            Head => Ok(a.nonempty(0)?[0].clone()),
            Last => Ok(a.nonempty(0)?.last().cloned().expect("nonempty")),
            Tail => {
                let l = a.nonempty(0)?;
                self.list(l[1..].to_vec())
            }
            Init => {
                let l = a.nonempty(0)?;
                self.list(l[..l.len() - 1].to_vec())
            }
            Len => Ok(V::Int(a.list(0)?.len() as i64)),
            Reverse => {
                let l = a.list(0)?;
                self.list(l.iter().rev().cloned().collect())
            }
            Sort => {
                let mut xs = a.int_list(0)?;
                xs.sort_unstable();
                self.ints(xs)
            }
            Unique => {
                let l = a.list(0)?;
                let mut out: Vec<V<'p>> = Vec::new();
                for v in l.iter() {
                    self.tick(out.len() as u64)?;
                    let mut seen = false;
                    for u in &out {
                        if values_equal(u, v, pos)? {
                            seen = true;
                            break;
                        }
                    }
                    if !seen {
                        out.push(v.clone());
                    }
                }
                self.list(out)
            }
            Concat => {
                let (x, y) = (a.list(0)?, a.list(1)?);
                let mut out = Vec::with_capacity(x.len() + y.len());
                out.extend(x.iter().cloned());
                out.extend(y.iter().cloned());
                self.list(out)
            }
            Append => {
                let mut out = a.list(0)?.as_ref().clone();
                out.push(a.vals[1].clone());
                self.list(out)
            }
            Slice => {
                let l = a.list(0)?;
                let (i, j) = (a.index(1)?, a.index(2)?);
                let i = i.min(l.len());
                let j = j.min(l.len());
                self.list(if i < j { l[i..j].to_vec() } else { Vec::new() })
            }
            Index => {
                let l = a.list(0)?;
                let i = a.index(1)?;
                match l.get(i) {
                    Some(v) => Ok(v.clone()),
                    None => oob(pos, format!("index {i} in list of length {}", l.len())),
                }
            }
            Map => {
                let (l, f) = (a.list(0)?, a.func(1)?);
                let mut out = Vec::with_capacity(l.len());
                for v in l.iter() {
                    out.push(self.apply(&f, v.clone())?);
                }
                self.list(out)
            }
            Filter => {
                let (l, f) = (a.list(0)?, a.func(1)?);
                let mut out = Vec::new();
                for v in l.iter() {
                    if self.apply_bool(&f, v.clone(), pos)? {
                        out.push(v.clone());
                    }
                }
                self.list(out)
            }
            Count | Contains | RemoveAll => {
                let l = a.list(0)?;
                let target = &a.vals[1];
                self.tick(l.len() as u64)?;
                let mut keep = Vec::new();
                let mut hits = 0i64;
                for v in l.iter() {
                    if values_equal(v, target, pos)? {
                        hits += 1;
                    } else if b == RemoveAll {
                        keep.push(v.clone());
                    }
                }
                match b {
                    Count => Ok(V::Int(hits)),
                    Contains => Ok(V::Bool(hits > 0)),
                    _ => self.list(keep),
                }
            }
            Replace => {
                let l = a.list(0)?;
                let mut out = Vec::with_capacity(l.len());
                for v in l.iter() {
                    out.push(if values_equal(v, &a.vals[1], pos)? { a.vals[2].clone() } else { v.clone() });
                }
                self.list(out)
            }
            Repeat => {
                let n = a.index(1)?;
                self.sized(n)?;
                self.list(vec![a.vals[0].clone(); n])
            }
            Range => {
                let (lo, hi) = (a.int(0)?, a.int(1)?);
                let n = if hi > lo { (hi as i128 - lo as i128) as u128 } else { 0 };
                if n > self.limits.max_output_cells as u128 {
                    return Err(EvalError::OutputSize { size: n.min(usize::MAX as u128) as usize, limit: self.limits.max_output_cells });
                }
                self.ints(lo..hi.max(lo))
            }
            Sum => {
                let xs = a.int_list(0)?;
                self.tick(xs.len() as u64)?;
                xs.iter().try_fold(0i64, |acc, &x| acc.checked_add(x)).map(V::Int).ok_or(EvalError::Overflow(pos))
            }
            Min | Max => {
                let xs = a.int_list(0)?;
                let v = if b == Min { xs.iter().min() } else { xs.iter().max() };
                match v {
                    Some(&v) => Ok(V::Int(v)),
                    None => oob(pos, format!("`{}` of an empty list", b.name())),
                }
            }
            Flatten => {
                let l = a.list(0)?;
                let mut out = Vec::new();
                for (k, v) in l.iter().enumerate() {
                    match v {
                        V::List(inner) => {
                            out.extend(inner.iter().cloned());
                            self.sized(out.len())?;
                        }
                        other => {
                            return type_err(pos, format!("`flatten` element {k} is {}, expected list", type_name(other)))
                        }
                    }
                }
                self.list(out)
            }
            Dims => {
                let g = a.grid(0)?;
                self.ints([g.h as i64, g.w as i64])
            }
            Row => {
                let g = a.grid(0)?;
                let r = a.index(1)?;
                if r >= g.h {
                    return oob(pos, format!("row {r} of a grid with {} rows", g.h));
                }
                self.ints((0..g.w).map(|c| i64::from(g.at(r, c))))
            }
            Col => {
                let g = a.grid(0)?;
                let c = a.index(1)?;
                if c >= g.w {
                    return oob(pos, format!("column {c} of a grid with {} columns", g.w));
                }
                self.ints((0..g.h).map(|r| i64::from(g.at(r, c))))
            }
            Cell => {
                let g = a.grid(0)?;
                let (r, c) = a.coord(&g, 1)?;
                Ok(V::Int(i64::from(g.at(r, c))))
            }
            SetCell => {
                let g = a.grid(0)?;
                let (r, c) = a.coord(&g, 1)?;
                let v = a.color(3)?;
                let mut data = g.data.clone();
                data[r * g.w + c] = v;
                self.grid(g.h, g.w, data)
            }
            Transpose => {
                let g = a.grid(0)?;
                let data = (0..g.w).flat_map(|c| (0..g.h).map(move |r| (r, c))).map(|(r, c)| g.at(r, c)).collect();
                self.grid(g.w, g.h, data)
            }
            Rotate90 => {
                let g = a.grid(0)?;
                let data =
                    (0..g.w).flat_map(|r| (0..g.h).map(move |c| (r, c))).map(|(r, c)| g.at(g.h - 1 - c, r)).collect();
                self.grid(g.w, g.h, data)
            }
            FlipH => {
                let g = a.grid(0)?;
                let data = (0..g.h).flat_map(|r| (0..g.w).rev().map(move |c| (r, c))).map(|(r, c)| g.at(r, c)).collect();
                self.grid(g.h, g.w, data)
            }
            FlipV => {
                let g = a.grid(0)?;
                let data = (0..g.h).rev().flat_map(|r| (0..g.w).map(move |c| (r, c))).map(|(r, c)| g.at(r, c)).collect();
                self.grid(g.h, g.w, data)
            }
            Crop => {
                let g = a.grid(0)?;
                let (r0, c0, h, w) = (a.index(1)?, a.index(2)?, a.index(3)?, a.index(4)?);
                if h == 0 || w == 0 {
                    return oob(pos, "crop size must be at least 1x1");
                }
                if r0.saturating_add(h) > g.h || c0.saturating_add(w) > g.w {
                    return oob(pos, format!("crop ({r0}, {c0}) size {h}x{w} outside a {}x{} grid", g.h, g.w));
                }
                let data = (r0..r0 + h).flat_map(|r| (c0..c0 + w).map(move |c| (r, c))).map(|(r, c)| g.at(r, c)).collect();
                self.grid(h, w, data)
            }
            Pad => {
                let g = a.grid(0)?;
                let (h, w) = (a.index(1)?, a.index(2)?);
                let fill = a.color(3)?;
                if h < g.h || w < g.w {
                    return oob(pos, format!("pad to {h}x{w} is smaller than the {}x{} grid", g.h, g.w));
                }
                self.sized(h.saturating_mul(w))?;
                let data = (0..h)
                    .flat_map(|r| (0..w).map(move |c| (r, c)))
                    .map(|(r, c)| if r < g.h && c < g.w { g.at(r, c) } else { fill })
                    .collect();
                self.grid(h, w, data)
            }
            MapCells => {
                let (g, f) = (a.grid(0)?, a.func(1)?);
                let mut data = Vec::with_capacity(g.data.len());
                for &cell in &g.data {
                    match self.apply(&f, V::Int(i64::from(cell)))? {
                        V::Int(v) if (0..=9).contains(&v) => data.push(v as u8),
                        V::Int(v) => return type_err(pos, format!("grid cell value {v} outside 0-9")),
                        other => return type_err(pos, format!("cell function returned {}", type_name(&other))),
                    }
                }
                self.grid(g.h, g.w, data)
            }
            CountColor => {
                let g = a.grid(0)?;
                let v = a.int(1)?;
                self.tick(g.data.len() as u64)?;
                Ok(V::Int(g.data.iter().filter(|&&c| i64::from(c) == v).count() as i64))
            }
            Recolor => {
                let g = a.grid(0)?;
                let from = a.int(1)?;
                let to = a.color(2)?;
                let data = g.data.iter().map(|&c| if i64::from(c) == from { to } else { c }).collect();
                self.grid(g.h, g.w, data)
            }
            Translate => {
                let g = a.grid(0)?;
                let (dr, dc) = (a.int(1)?, a.int(2)?);
                let fill = a.color(3)?;
                let (h, w) = (g.h as i64, g.w as i64);
                let data = (0..h)
                    .flat_map(|r| (0..w).map(move |c| (r, c)))
                    .map(|(r, c)| {
                        let (sr, sc) = (r.saturating_sub(dr), c.saturating_sub(dc));
                        if (0..h).contains(&sr) && (0..w).contains(&sc) {
                            g.at(sr as usize, sc as usize)
                        } else {
                            fill
                        }
                    })
                    .collect();
                self.grid(g.h, g.w, data)
            }
            Overlay => {
                let (base, top) = (a.grid(0)?, a.grid(1)?);
                let clear = a.int(2)?;
                if (base.h, base.w) != (top.h, top.w) {
                    return type_err(
                        pos,
                        format!("overlay of a {}x{} grid onto a {}x{} grid", top.h, top.w, base.h, base.w),
                    );
                }
                let data =
                    base.data.iter().zip(&top.data).map(|(&b, &t)| if i64::from(t) == clear { b } else { t }).collect();
                self.grid(base.h, base.w, data)
            }
            RowsAsLists => {
                let g = a.grid(0)?;
                let mut rows = Vec::with_capacity(g.h);
                for r in 0..g.h {
                    rows.push(self.ints((0..g.w).map(|c| i64::from(g.at(r, c))))?);
                }
                self.list(rows)
            }
            GridFromRows => {
                let (h, w, data) = grid_from_list(&a.vals[0], pos)?;
                self.grid(h, w, data)
            }
        }
    }
}

fn grid_from_list(v: &V, pos: usize) -> R<(usize, usize, Vec<u8>)> {
    let V::List(rows) = v else {
        return type_err(pos, format!("expected a list of rows, found {}", type_name(v)));
    };
    let mut data = Vec::new();
    let mut width = None;
    for (r, row) in rows.iter().enumerate() {
        let V::List(cells) = row else {
            return type_err(pos, format!("grid row {r} is {}, expected list", type_name(row)));
        };
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return type_err(pos, format!("ragged rows: row {r} has {} cells, expected {w}", cells.len()))
            }
            _ => {}
        }
        for cell in cells.iter() {
            match cell {
                V::Int(x) if (0..=9).contains(x) => data.push(*x as u8),
                V::Int(x) => return type_err(pos, format!("grid cell value {x} outside 0-9")),
                other => return type_err(pos, format!("grid cell is {}, expected int", type_name(other))),
            }
        }
    }
    let w = width.unwrap_or(0);
    if w == 0 {
        return type_err(pos, "grid must have at least one row and one column");
    }
    Ok((rows.len(), w, data))
}

struct Args<'p> {
    vals: Vec<V<'p>>,
    pos: usize,
    name: &'static str,
}

impl<'p> Args<'p> {
    fn wrong<T>(&self, k: usize, want: &str) -> R<T> {
        type_err(
            self.pos,
            format!("argument {} of `{}` must be {want}, found {}", k + 1, self.name, type_name(&self.vals[k])),
        )
    }

    fn int(&self, k: usize) -> R<i64> {
        match &self.vals[k] {
            V::Int(n) => Ok(*n),
            _ => self.wrong(k, "an int"),
        }
    }

    fn index(&self, k: usize) -> R<usize> {
        let n = self.int(k)?;
        usize::try_from(n).or_else(|_| oob(self.pos, format!("negative index {n} in `{}`", self.name)))
    }

    fn color(&self, k: usize) -> R<u8> {
        let n = self.int(k)?;
        if (0..=9).contains(&n) {
            Ok(n as u8)
        } else {
            type_err(self.pos, format!("grid cell value {n} outside 0-9"))
        }
    }

    fn list(&self, k: usize) -> R<Rc<Vec<V<'p>>>> {
        match &self.vals[k] {
            V::List(l) => Ok(l.clone()),
            _ => self.wrong(k, "a list"),
        }
    }

    fn nonempty(&self, k: usize) -> R<Rc<Vec<V<'p>>>> {
        let l = self.list(k)?;
        if l.is_empty() {
            return oob(self.pos, format!("`{}` of an empty list", self.name));
        }
        Ok(l)
    }

    fn int_list(&self, k: usize) -> R<Vec<i64>> {
        let l = self.list(k)?;
        l.iter()
            .map(|v| match v {
                V::Int(n) => Ok(*n),
                other => type_err(self.pos, format!("`{}` needs a list of ints, found {}", self.name, type_name(other))),
            })
            .collect()
    }

    fn grid(&self, k: usize) -> R<Rc<Cells>> {
        match &self.vals[k] {
            V::Grid(g) => Ok(g.clone()),
            _ => self.wrong(k, "a grid"),
        }
    }

    fn func(&self, k: usize) -> R<Rc<Closure<'p>>> {
        match &self.vals[k] {
            V::Fn(f) => Ok(f.clone()),
            _ => self.wrong(k, "a function"),
        }
    }

    fn coord(&self, g: &Cells, k: usize) -> R<(usize, usize)> {
        let (r, c) = (self.index(k)?, self.index(k + 1)?);
        if r >= g.h || c >= g.w {
            return oob(self.pos, format!("cell ({r}, {c}) outside a {}x{} grid", g.h, g.w));
        }
        Ok((r, c))
    }
}

fn to_value(v: V, want_grid: bool, pos: usize) -> R<Value> {
    if want_grid {
        let (h, w, data) = match &v {
            V::Grid(g) => (g.h, g.w, g.data.clone()),
            V::List(_) => grid_from_list(&v, pos)?,
            other => return type_err(pos, format!("program returned {}, expected grid", type_name(other))),
        };
        let rows = data.chunks(w).map(<[u8]>::to_vec).collect::<Vec<_>>();
        debug_assert_eq!(rows.len(), h);
        let grid = Grid::new(rows).map_err(|e| EvalError::Type { position: pos, message: e.to_string() })?;
        return Ok(Value::IntGrid(grid));
    }
    let V::List(items) = &v else {
        return type_err(pos, format!("program returned {}, expected list", type_name(&v)));
    };
    items
        .iter()
        .map(|x| match x {
            V::Int(n) => Ok(*n),
            other => type_err(pos, format!("result list contains {}, expected int", type_name(other))),
        })
        .collect::<R<Vec<i64>>>()
        .map(Value::IntList)
}

pub(super) fn run(p: &Program, input: &Value, limits: &Limits) -> R<Value> {
    let (name, value, want_grid): (&'static str, V, bool) = match input {
        Value::IntList(xs) => ("xs", V::List(Rc::new(xs.iter().copied().map(V::Int).collect())), false),
        Value::IntGrid(g) => {
            let (h, w) = (g.height(), g.width());
            let data = g.rows().iter().flatten().copied().collect();
            ("g", V::Grid(Rc::new(Cells { h, w, data })), true)
        }
        other => return Err(EvalError::Input(format!("programs take a list or grid, not {}", other.type_name()))),
    };
    if let Some(bad) = p.inputs.iter().find(|v| v.as_str() != name) {
        return Err(EvalError::Input(format!("program reads `{bad}` but the input is bound to `{name}`")));
    }
    let env = Some(Rc::new(Frame { name, value, parent: None }));
    let mut m = Machine { limits: *limits, steps: 0, depth: 0 };
    let out = m.eval(&p.root, &env)?;
    to_value(out, want_grid, p.root.pos)
}
