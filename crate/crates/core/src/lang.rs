//! The Python-like user language: lexer, parser, pretty-printer and validator.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Diagnostic, ParseError, Pos};
use crate::value::CmpOp;

// ---------------------------------------------------------------------------
// AST

#[derive(Clone, Debug, PartialEq, Default)]
pub struct UserProgram {
    pub items: Vec<Stmt>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExtCall {
    LoadData,
    LoadParams,
    Init,
}

impl ExtCall {
    pub fn name(self) -> &'static str {
        match self {
            ExtCall::LoadData => "loadData",
            ExtCall::LoadParams => "loadParams",
            ExtCall::Init => "init",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    /// `X = e`, `X[i] = e`, `X[i][j] = e`
    Assign { name: String, indices: Vec<Expr>, value: Expr, pos: Pos },
    /// `(a, b) = loadData()` or `M = init()`
    External { names: Vec<String>, call: ExtCall, pos: Pos },
    For { var: String, lo: Expr, hi: Expr, body: Vec<Stmt>, pos: Pos },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReduceOp {
    And,
    Or,
    Sum,
    Mult,
    Count,
}

impl ReduceOp {
    pub fn name(self) -> &'static str {
        match self {
            ReduceOp::And => "reduce_and",
            ReduceOp::Or => "reduce_or",
            ReduceOp::Sum => "reduce_sum",
            ReduceOp::Mult => "reduce_mult",
            ReduceOp::Count => "reduce_count",
        }
    }

    fn from_name(s: &str) -> Option<ReduceOp> {
        Some(match s {
            "reduce_and" => ReduceOp::And,
            "reduce_or" => ReduceOp::Or,
            "reduce_sum" => ReduceOp::Sum,
            "reduce_mult" => ReduceOp::Mult,
            "reduce_count" => ReduceOp::Count,
            _ => return None,
        })
    }
}

/// `breakTies` (1-D), `breakTies1` (one true per row), `breakTies2` (one true per column).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TieAxis {
    Flat,
    One,
    Two,
}

impl TieAxis {
    pub fn name(self) -> &'static str {
        match self {
            TieAxis::Flat => "breakTies",
            TieAxis::One => "breakTies1",
            TieAxis::Two => "breakTies2",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comprehension {
    pub body: Expr,
    pub var: String,
    pub lo: Expr,
    pub hi: Expr,
    pub cond: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Bool(bool),
    Int(i64),
    Float(f64),
    Name(String),
    Index(Box<Expr>, Box<Expr>),
    /// `[None] * size`
    ArrayInit(Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Reduce(ReduceOp, Box<Comprehension>),
    Pow(Box<Expr>, Box<Expr>),
    Invert(Box<Expr>),
    ScalarMult(Box<Expr>, Box<Expr>),
    Dist(Box<Expr>, Box<Expr>),
    BreakTies(TieAxis, Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Expr {
        Expr { kind, pos }
    }

    /// Splits `X[a][b]` into `("X", [a, b])`.
    pub fn as_index_chain(&self) -> Option<(&str, Vec<&Expr>)> {
        match &self.kind {
            ExprKind::Name(n) => Some((n, vec![])),
            ExprKind::Index(b, i) => {
                let (n, mut v) = b.as_index_chain()?;
                v.push(i);
                Some((n, v))
            }
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Colon,
    Assign,
    Plus,
    Minus,
    Star,
    Cmp(CmpOp),
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Float(x) => write!(f, "`{x}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrack => f.write_str("`[`"),
            Tok::RBrack => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Assign => f.write_str("`=`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Cmp(op) => write!(f, "`{}`", op.symbol()),
            Tok::Newline => f.write_str("end of line"),
            Tok::Indent => f.write_str("indent"),
            Tok::Dedent => f.write_str("dedent"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut indents = vec![0usize];
    let mut depth = 0usize; // bracket nesting; newlines inside brackets are ignored
    for (ln, line) in src.lines().enumerate() {
        let ln = ln as u32 + 1;
        let bytes = line.as_bytes();
        let mut i = 0;
        if depth == 0 {
            while i < bytes.len() && bytes[i] == b' ' {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'\t' {
                return Err(ParseError::new(Pos::new(ln, i as u32 + 1), "tab in indentation"));
            }
            if i == bytes.len() || bytes[i] == b'#' {
                continue;
            }
            let cur = *indents.last().unwrap();
            if i > cur {
                indents.push(i);
                out.push((Tok::Indent, Pos::new(ln, 1)));
            } else {
                while i < *indents.last().unwrap() {
                    indents.pop();
                    out.push((Tok::Dedent, Pos::new(ln, 1)));
                }
                if i != *indents.last().unwrap() {
                    return Err(ParseError::new(Pos::new(ln, i as u32 + 1), "inconsistent dedent"));
                }
            }
        }
        while i < bytes.len() {
            let c = bytes[i];
            let pos = Pos::new(ln, i as u32 + 1);
            if c == b' ' || c == b'\t' || c == b'\r' {
                i += 1;
                continue;
            }
            if c == b'#' {
                break;
            }
            if c.is_ascii_alphabetic() || c == b'_' {
                let st = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(line[st..i].to_string()), pos));
                continue;
            }
            if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
                let st = i;
                let mut float = false;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    float = true;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let save = i;
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                        i += 1;
                    }
                    if i < bytes.len() && bytes[i].is_ascii_digit() {
                        float = true;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = save;
                    }
                }
                let txt = &line[st..i];
                let tok = if float {
                    Tok::Float(txt.parse().map_err(|_| ParseError::new(pos, "bad number"))?)
                } else {
                    Tok::Int(txt.parse().map_err(|_| ParseError::new(pos, "integer literal out of range"))?)
                };
                out.push((tok, pos));
                continue;
            }
            let two = &line[i..(i + 2).min(line.len())];
            let (tok, len) = match two {
                "<=" => (Tok::Cmp(CmpOp::Le), 2),
                ">=" => (Tok::Cmp(CmpOp::Ge), 2),
                "==" => (Tok::Cmp(CmpOp::Eq), 2),
                _ => match c {
                    b'<' => (Tok::Cmp(CmpOp::Lt), 1),
                    b'>' => (Tok::Cmp(CmpOp::Gt), 1),
                    b'=' => (Tok::Assign, 1),
                    b'(' => (Tok::LParen, 1),
                    b')' => (Tok::RParen, 1),
                    b'[' => (Tok::LBrack, 1),
                    b']' => (Tok::RBrack, 1),
                    b',' => (Tok::Comma, 1),
                    b':' => (Tok::Colon, 1),
                    b'+' => (Tok::Plus, 1),
                    b'-' => (Tok::Minus, 1),
                    b'*' => (Tok::Star, 1),
                    _ => {
                        return Err(ParseError::new(pos, format!("unexpected character `{}`", c as char)));
                    }
                },
            };
            match tok {
                Tok::LParen | Tok::LBrack => depth += 1,
                Tok::RParen | Tok::RBrack => {
                    depth = depth.checked_sub(1).ok_or_else(|| ParseError::new(pos, "unbalanced bracket"))?
                }
                _ => {}
            }
            out.push((tok, pos));
            i += len;
        }
        if depth == 0 && !matches!(out.last(), Some((Tok::Newline, _)) | None) {
            out.push((Tok::Newline, Pos::new(ln, line.len() as u32 + 1)));
        }
    }
    let end = Pos::new(src.lines().count() as u32 + 1, 1);
    if depth != 0 {
        return Err(ParseError::new(end, "unclosed bracket at end of input"));
    }
    while indents.len() > 1 {
        indents.pop();
        out.push((Tok::Dedent, end));
    }
    out.push((Tok::Eof, end));
    Ok(out)
}

// ---------------------------------------------------------------------------
// parser

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::new(self.pos(), msg))
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {t}, found {}", self.peek()))
        }
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn keyword(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_ident(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected an identifier, found {t}")),
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        while !matches!(self.peek(), Tok::Dedent | Tok::Eof) {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn ext_call(&mut self) -> Result<Option<ExtCall>, ParseError> {
        let call = match self.peek() {
            Tok::Ident(s) if s == "loadData" => ExtCall::LoadData,
            Tok::Ident(s) if s == "loadParams" => ExtCall::LoadParams,
            Tok::Ident(s) if s == "init" => ExtCall::Init,
            _ => return Ok(None),
        };
        if *self.peek_at(1) != Tok::LParen {
            return Ok(None);
        }
        self.bump();
        self.expect(Tok::LParen)?;
        self.expect(Tok::RParen)?;
        Ok(Some(call))
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.pos();
        if self.is_ident("for") {
            self.bump();
            let var = self.ident()?;
            self.keyword("in")?;
            let (lo, hi) = self.range()?;
            self.expect(Tok::Colon)?;
            self.expect(Tok::Newline)?;
            if *self.peek() != Tok::Indent {
                return self.err("expected an indented block");
            }
            self.bump();
            let body = self.block()?;
            self.expect(Tok::Dedent)?;
            return Ok(Stmt::For { var, lo, hi, body, pos });
        }
        // tuple binding of an external call
        if *self.peek() == Tok::LParen || matches!(self.peek_at(1), Tok::Comma) {
            let paren = *self.peek() == Tok::LParen;
            if paren {
                self.bump();
            }
            let mut names = vec![self.ident()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                names.push(self.ident()?);
            }
            if paren {
                self.expect(Tok::RParen)?;
            }
            self.expect(Tok::Assign)?;
            let Some(call) = self.ext_call()? else {
                return self.err("tuple assignment requires loadData(), loadParams() or init()");
            };
            self.expect(Tok::Newline)?;
            return Ok(Stmt::External { names, call, pos });
        }
        let name = self.ident()?;
        let mut indices = Vec::new();
        while *self.peek() == Tok::LBrack {
            self.bump();
            indices.push(self.expr()?);
            self.expect(Tok::RBrack)?;
        }
        self.expect(Tok::Assign)?;
        if indices.is_empty() {
            if let Some(call) = self.ext_call()? {
                self.expect(Tok::Newline)?;
                return Ok(Stmt::External { names: vec![name], call, pos });
            }
        }
        let value = self.expr()?;
        self.expect(Tok::Newline)?;
        Ok(Stmt::Assign { name, indices, value, pos })
    }

    fn range(&mut self) -> Result<(Expr, Expr), ParseError> {
        self.keyword("range")?;
        self.expect(Tok::LParen)?;
        let lo = self.expr()?;
        self.expect(Tok::Comma)?;
        let hi = self.expr()?;
        self.expect(Tok::RParen)?;
        Ok((lo, hi))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let a = self.sum()?;
        if let Tok::Cmp(op) = *self.peek() {
            let pos = self.pos();
            self.bump();
            let b = self.sum()?;
            if matches!(self.peek(), Tok::Cmp(_)) {
                return self.err("chained comparisons are not supported");
            }
            return Ok(Expr::new(ExprKind::Cmp(op, Box::new(a), Box::new(b)), pos));
        }
        Ok(a)
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut a = self.term()?;
        while *self.peek() == Tok::Plus {
            let pos = self.pos();
            self.bump();
            let b = self.term()?;
            a = Expr::new(ExprKind::Add(Box::new(a), Box::new(b)), pos);
        }
        Ok(a)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut a = self.unary()?;
        while *self.peek() == Tok::Star {
            let pos = self.pos();
            self.bump();
            let b = self.unary()?;
            a = Expr::new(ExprKind::Mul(Box::new(a), Box::new(b)), pos);
        }
        Ok(a)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        if *self.peek() == Tok::Minus {
            self.bump();
            return match self.bump() {
                Tok::Int(n) => Ok(Expr::new(ExprKind::Int(-n), pos)),
                Tok::Float(x) => Ok(Expr::new(ExprKind::Float(-x), pos)),
                _ => Err(ParseError::new(pos, "unary minus applies only to numeric literals")),
            };
        }
        self.primary()
    }

    fn call_args(&mut self, n: usize) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut v = vec![self.expr()?];
        for _ in 1..n {
            self.expect(Tok::Comma)?;
            v.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        Ok(v)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                ExprKind::Int(n)
            }
            Tok::Float(x) => {
                self.bump();
                ExprKind::Float(x)
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                return Ok(e);
            }
            Tok::LBrack => {
                self.bump();
                if self.is_ident("None") {
                    self.bump();
                    self.expect(Tok::RBrack)?;
                    self.expect(Tok::Star)?;
                    let size = self.unary()?;
                    ExprKind::ArrayInit(Box::new(size))
                } else {
                    return self.err("list literals and comprehensions may only appear as the argument of a reduce call");
                }
            }
            Tok::Ident(s) => {
                let s = s.clone();
                let is_call = *self.peek_at(1) == Tok::LParen;
                match s.as_str() {
                    "True" | "False" => {
                        self.bump();
                        ExprKind::Bool(s == "True")
                    }
                    _ if is_call && ReduceOp::from_name(&s).is_some() => {
                        self.bump();
                        let op = ReduceOp::from_name(&s).unwrap();
                        self.expect(Tok::LParen)?;
                        if *self.peek() != Tok::LBrack {
                            return self.err("reduce applied to a named array; use a list comprehension");
                        }
                        self.bump();
                        let body = self.expr()?;
                        self.keyword("for")?;
                        let var = self.ident()?;
                        self.keyword("in")?;
                        let (lo, hi) = self.range()?;
                        let cond = if self.is_ident("if") {
                            self.bump();
                            Some(self.expr()?)
                        } else {
                            None
                        };
                        self.expect(Tok::RBrack)?;
                        self.expect(Tok::RParen)?;
                        ExprKind::Reduce(op, Box::new(Comprehension { body, var, lo, hi, cond }))
                    }
                    "pow" | "scalar_mult" | "dist" if is_call => {
                        self.bump();
                        let mut a = self.call_args(2)?;
                        let b = Box::new(a.pop().unwrap());
                        let a = Box::new(a.pop().unwrap());
                        match s.as_str() {
                            "pow" => ExprKind::Pow(a, b),
                            "scalar_mult" => ExprKind::ScalarMult(a, b),
                            _ => ExprKind::Dist(a, b),
                        }
                    }
                    "invert" if is_call => {
                        self.bump();
                        ExprKind::Invert(Box::new(self.call_args(1)?.pop().unwrap()))
                    }
                    "breakTies" | "breakTies1" | "breakTies2" if is_call => {
                        self.bump();
                        let axis = match s.as_str() {
                            "breakTies" => TieAxis::Flat,
                            "breakTies1" => TieAxis::One,
                            _ => TieAxis::Two,
                        };
                        ExprKind::BreakTies(axis, Box::new(self.call_args(1)?.pop().unwrap()))
                    }
                    "loadData" | "loadParams" | "init" if is_call => {
                        return self.err(format!("`{s}()` may only appear on the right of an assignment"));
                    }
                    _ if is_call => return self.err(format!("unknown function `{s}`")),
                    _ => {
                        let name = self.ident()?;
                        let mut e = Expr::new(ExprKind::Name(name), pos);
                        while *self.peek() == Tok::LBrack {
                            let p = self.pos();
                            self.bump();
                            let i = self.expr()?;
                            self.expect(Tok::RBrack)?;
                            e = Expr::new(ExprKind::Index(Box::new(e), Box::new(i)), p);
                        }
                        return Ok(e);
                    }
                }
            }
            t => return self.err(format!("expected an expression, found {t}")),
        };
        Ok(Expr::new(kind, pos))
    }
}

const RESERVED: &[&str] = &["for", "in", "if", "range", "True", "False", "None"];

/// Parses a user program and checks that every range bound is a compile-time constant.
pub fn parse_user_program(text: &str) -> Result<UserProgram, ParseError> {
    let mut p = Parser { toks: lex(text)?, i: 0 };
    let items = p.block()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("unexpected {}", p.peek()));
    }
    let prog = UserProgram { items };
    let consts = constant_names(&prog);
    let mut bad = Vec::new();
    check_ranges(&prog.items, &consts, &mut bad);
    if let Some((pos, name)) = bad.into_iter().next() {
        return Err(ParseError::new(pos, format!("non-constant range bound `{name}`")));
    }
    Ok(prog)
}

/// Names usable as compile-time integers: external sizes/parameters and single constant assignments.
pub fn constant_names(p: &UserProgram) -> HashSet<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut lits: HashSet<&str> = HashSet::new();
    let mut out = HashSet::new();
    fn walk<'a>(v: &'a [Stmt], top: bool, counts: &mut HashMap<&'a str, usize>, lits: &mut HashSet<&'a str>, out: &mut HashSet<String>) {
        for s in v {
            match s {
                Stmt::Assign { name, indices, value, .. } => {
                    *counts.entry(name).or_default() += 1;
                    if top && indices.is_empty() && matches!(value.kind, ExprKind::Int(_)) {
                        lits.insert(name);
                    }
                }
                Stmt::External { names, call, .. } => {
                    for (i, n) in names.iter().enumerate() {
                        *counts.entry(n).or_default() += 1;
                        let constant = match call {
                            ExtCall::LoadParams => true,
                            ExtCall::LoadData => i == 1,
                            ExtCall::Init => false,
                        };
                        if constant && top {
                            lits.insert(n);
                        }
                    }
                }
                Stmt::For { var, body, .. } => {
                    *counts.entry(var).or_default() += 1;
                    walk(body, false, counts, lits, out);
                }
            }
        }
    }
    walk(&p.items, true, &mut counts, &mut lits, &mut out);
    for n in lits {
        if counts.get(n) == Some(&1) {
            out.insert(n.to_string());
        }
    }
    out
}

fn bound_ok(e: &Expr, consts: &HashSet<String>) -> Result<(), String> {
    match &e.kind {
        ExprKind::Int(_) => Ok(()),
        ExprKind::Name(n) if consts.contains(n) => Ok(()),
        ExprKind::Name(n) => Err(n.clone()),
        ExprKind::Add(a, b) | ExprKind::Mul(a, b) => {
            bound_ok(a, consts)?;
            bound_ok(b, consts)
        }
        _ => Err(pretty_expr(e)),
    }
}

fn check_ranges(v: &[Stmt], consts: &HashSet<String>, bad: &mut Vec<(Pos, String)>) {
    fn in_expr(e: &Expr, consts: &HashSet<String>, bad: &mut Vec<(Pos, String)>) {
        visit_expr(e, &mut |x| {
            if let ExprKind::Reduce(_, c) = &x.kind {
                for b in [&c.lo, &c.hi] {
                    if let Err(n) = bound_ok(b, consts) {
                        bad.push((b.pos, n));
                    }
                }
            }
        });
    }
    for s in v {
        match s {
            Stmt::Assign { indices, value, .. } => {
                for i in indices {
                    in_expr(i, consts, bad);
                }
                in_expr(value, consts, bad);
            }
            Stmt::External { .. } => {}
            Stmt::For { lo, hi, body, .. } => {
                for b in [lo, hi] {
                    if let Err(n) = bound_ok(b, consts) {
                        bad.push((b.pos, n));
                    }
                }
                check_ranges(body, consts, bad);
            }
        }
    }
}

/// Pre-order traversal of an expression and its sub-expressions.
pub fn visit_expr(e: &Expr, f: &mut dyn FnMut(&Expr)) {
    f(e);
    match &e.kind {
        ExprKind::Bool(_) | ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Name(_) => {}
        ExprKind::ArrayInit(a) | ExprKind::Invert(a) | ExprKind::BreakTies(_, a) => visit_expr(a, f),
        ExprKind::Index(a, b)
        | ExprKind::Cmp(_, a, b)
        | ExprKind::Add(a, b)
        | ExprKind::Mul(a, b)
        | ExprKind::Pow(a, b)
        | ExprKind::ScalarMult(a, b)
        | ExprKind::Dist(a, b) => {
            visit_expr(a, f);
            visit_expr(b, f);
        }
        ExprKind::Reduce(_, c) => {
            visit_expr(&c.body, f);
            visit_expr(&c.lo, f);
            visit_expr(&c.hi, f);
            if let Some(k) = &c.cond {
                visit_expr(k, f);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// pretty-printing

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Cmp(..) => 1,
        ExprKind::Add(..) => 2,
        ExprKind::Mul(..) | ExprKind::ArrayInit(_) => 3,
        ExprKind::Int(n) if *n < 0 => 4,
        ExprKind::Float(x) if x.is_sign_negative() => 4,
        _ => 5,
    }
}

fn write_expr(out: &mut String, e: &Expr, min: u8) {
    let paren = prec(e) < min;
    if paren {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Bool(b) => out.push_str(if *b { "True" } else { "False" }),
        ExprKind::Int(n) => out.push_str(&n.to_string()),
        ExprKind::Float(x) => out.push_str(&crate::value::fmt_num(*x)),
        ExprKind::Name(n) => out.push_str(n),
        ExprKind::Index(a, i) => {
            write_expr(out, a, 5);
            out.push('[');
            write_expr(out, i, 0);
            out.push(']');
        }
        ExprKind::ArrayInit(s) => {
            out.push_str("[None] * ");
            write_expr(out, s, 4);
        }
        ExprKind::Cmp(op, a, b) => {
            write_expr(out, a, 2);
            out.push_str(&format!(" {} ", op.symbol()));
            write_expr(out, b, 2);
        }
        ExprKind::Add(a, b) => {
            write_expr(out, a, 2);
            out.push_str(" + ");
            write_expr(out, b, 3);
        }
        ExprKind::Mul(a, b) => {
            write_expr(out, a, 3);
            out.push_str(" * ");
            write_expr(out, b, 4);
        }
        ExprKind::Reduce(op, c) => {
            out.push_str(op.name());
            out.push_str("([");
            write_expr(out, &c.body, 0);
            out.push_str(&format!(" for {} in range(", c.var));
            write_expr(out, &c.lo, 0);
            out.push_str(", ");
            write_expr(out, &c.hi, 0);
            out.push(')');
            if let Some(k) = &c.cond {
                out.push_str(" if ");
                write_expr(out, k, 0);
            }
            out.push_str("])");
        }
        ExprKind::Pow(a, b) | ExprKind::ScalarMult(a, b) | ExprKind::Dist(a, b) => {
            out.push_str(match &e.kind {
                ExprKind::Pow(..) => "pow(",
                ExprKind::ScalarMult(..) => "scalar_mult(",
                _ => "dist(",
            });
            write_expr(out, a, 0);
            out.push_str(", ");
            write_expr(out, b, 0);
            out.push(')');
        }
        ExprKind::Invert(a) => {
            out.push_str("invert(");
            write_expr(out, a, 0);
            out.push(')');
        }
        ExprKind::BreakTies(ax, a) => {
            out.push_str(ax.name());
            out.push('(');
            write_expr(out, a, 0);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

pub fn pretty_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_stmts(out: &mut String, v: &[Stmt], depth: usize) {
    for s in v {
        out.push_str(&"  ".repeat(depth));
        match s {
            Stmt::Assign { name, indices, value, .. } => {
                out.push_str(name);
                for i in indices {
                    out.push('[');
                    write_expr(out, i, 0);
                    out.push(']');
                }
                out.push_str(" = ");
                write_expr(out, value, 0);
            }
            Stmt::External { names, call, .. } => {
                if names.len() == 1 {
                    out.push_str(&names[0]);
                } else {
                    out.push('(');
                    out.push_str(&names.join(", "));
                    out.push(')');
                }
                out.push_str(&format!(" = {}()", call.name()));
            }
            Stmt::For { var, lo, hi, body, .. } => {
                out.push_str(&format!("for {var} in range("));
                write_expr(out, lo, 0);
                out.push_str(", ");
                write_expr(out, hi, 0);
                out.push_str("):\n");
                write_stmts(out, body, depth + 1);
                continue;
            }
        }
        out.push('\n');
    }
}

impl fmt::Display for UserProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_stmts(&mut s, &self.items, 0);
        f.write_str(&s)
    }
}

// ---------------------------------------------------------------------------
// validation

struct Validator<'a> {
    consts: &'a HashSet<String>,
    /// defined name -> array rank (0 for scalars), `None` when unknown
    defined: Vec<HashMap<String, Option<usize>>>,
    diags: Vec<Diagnostic>,
}

impl Validator<'_> {
    fn lookup(&self, n: &str) -> Option<Option<usize>> {
        self.defined.iter().rev().find_map(|s| s.get(n).copied())
    }

    fn define(&mut self, n: &str, rank: Option<usize>) {
        // keep the outermost binding so loop-local definitions stay visible afterwards
        for s in self.defined.iter_mut() {
            if let Some(r) = s.get_mut(n) {
                *r = rank;
                return;
            }
        }
        self.defined.last_mut().unwrap().insert(n.to_string(), rank);
    }

    fn diag(&mut self, rule: &'static str, pos: Pos, msg: String) {
        self.diags.push(Diagnostic { rule, pos, msg });
    }

    /// Returns the array rank of `e` (0 = base value).
    fn expr(&mut self, e: &Expr) -> Option<usize> {
        match &e.kind {
            ExprKind::Bool(_) | ExprKind::Int(_) | ExprKind::Float(_) => Some(0),
            ExprKind::Name(n) => match self.lookup(n) {
                Some(r) => r,
                None => {
                    self.diag("undefined-ident", e.pos, format!("`{n}` is used before it is defined"));
                    None
                }
            },
            ExprKind::Index(a, i) => {
                let r = self.expr(a);
                self.expr(i);
                match r {
                    Some(0) => {
                        self.diag("index-rank", e.pos, "indexing a non-array value".to_string());
                        None
                    }
                    Some(r) => Some(r - 1),
                    None => None,
                }
            }
            ExprKind::ArrayInit(s) => {
                self.expr(s);
                if bound_ok(s, self.consts).is_err() {
                    self.diag("array-size", s.pos, format!("array size `{}` is not a compile-time constant", pretty_expr(s)));
                }
                Some(1)
            }
            ExprKind::Reduce(_, c) => {
                for b in [&c.lo, &c.hi] {
                    self.expr(b);
                    if bound_ok(b, self.consts).is_err() {
                        self.diag("unbounded-loop", b.pos, format!("range bound `{}` is not a compile-time constant", pretty_expr(b)));
                    }
                }
                self.defined.push(HashMap::from([(c.var.clone(), Some(0))]));
                let r = self.expr(&c.body);
                if matches!(c.body.kind, ExprKind::ArrayInit(_)) || r.is_some_and(|r| r > 0) {
                    self.diag(
                        "comprehension-dim",
                        c.body.pos,
                        "list comprehensions may only build one-dimensional arrays of base values".to_string(),
                    );
                }
                if let Some(k) = &c.cond {
                    self.expr(k);
                }
                self.defined.pop();
                Some(0)
            }
            ExprKind::BreakTies(_, a) => self.expr(a),
            ExprKind::Cmp(_, a, b)
            | ExprKind::Add(a, b)
            | ExprKind::Mul(a, b)
            | ExprKind::Pow(a, b)
            | ExprKind::ScalarMult(a, b)
            | ExprKind::Dist(a, b) => {
                self.expr(a);
                self.expr(b);
                Some(0)
            }
            ExprKind::Invert(a) => {
                self.expr(a);
                Some(0)
            }
        }
    }

    fn stmts(&mut self, v: &[Stmt]) {
        for s in v {
            match s {
                Stmt::Assign { name, indices, value, pos } => {
                    for i in indices {
                        self.expr(i);
                    }
                    let r = self.expr(value);
                    if indices.is_empty() {
                        self.define(name, r);
                    } else {
                        match self.lookup(name) {
                            None => self.diag("undefined-ident", *pos, format!("element write to undefined array `{name}`")),
                            Some(Some(cur)) if indices.len() + r.unwrap_or(0) > cur => {
                                // `X[i] = [None] * n` extends the rank
                                self.define(name, Some(indices.len() + r.unwrap_or(0)));
                            }
                            _ => {}
                        }
                    }
                }
                Stmt::External { names, call, .. } => {
                    for (i, n) in names.iter().enumerate() {
                        let rank = match (call, i) {
                            (ExtCall::LoadData, 0) => 1,
                            (ExtCall::LoadData, 2) => 2,
                            (ExtCall::Init, _) => 1,
                            _ => 0,
                        };
                        self.define(n, Some(rank));
                    }
                }
                Stmt::For { var, lo, hi, body, .. } => {
                    for b in [lo, hi] {
                        self.expr(b);
                        if bound_ok(b, self.consts).is_err() {
                            self.diag("unbounded-loop", b.pos, format!("range bound `{}` is not a compile-time constant", pretty_expr(b)));
                        }
                    }
                    self.defined.push(HashMap::from([(var.clone(), Some(0))]));
                    self.stmts(body);
                    // definitions made inside the loop remain visible after it
                    let inner = self.defined.pop().unwrap();
                    for (k, r) in inner {
                        if k != *var {
                            self.define(&k, r);
                        }
                    }
                }
            }
        }
    }
}

/// Checks the static constraints; returns every violation found.
pub fn validate_user_program(p: &UserProgram) -> Result<(), Vec<Diagnostic>> {
    let consts = constant_names(p);
    let mut v = Validator { consts: &consts, defined: vec![HashMap::new()], diags: Vec::new() };
    v.stmts(&p.items);
    if v.diags.is_empty() {
        Ok(())
    } else {
        Err(v.diags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KMEDOIDS: &str = include_str!("../../../programs/kmedoids.py");
    const KMEANS: &str = include_str!("../../../programs/kmeans.py");
    const MCL: &str = include_str!("../../../programs/mcl.py");

    #[test]
    fn parses_clustering_programs() {
        for src in [KMEDOIDS, KMEANS, MCL] {
            let p = parse_user_program(src).unwrap();
            validate_user_program(&p).unwrap();
            let again = parse_user_program(&p.to_string()).unwrap();
            assert_eq!(p, again);
        }
        let p = parse_user_program(KMEDOIDS).unwrap();
        let loops = p.items.iter().filter(|s| matches!(s, Stmt::For { .. })).count();
        assert_eq!(loops, 1);
    }

    #[test]
    fn single_assignment() {
        let p = parse_user_program("M = 7\n").unwrap();
        assert_eq!(p.items.len(), 1);
        assert!(matches!(&p.items[0], Stmt::Assign { name, .. } if name == "M"));
    }

    #[test]
    fn rejects_non_constant_bounds() {
        let e = parse_user_program("for i in range(0,n):\n  M = i\n").unwrap_err();
        assert!(e.msg.contains("non-constant range bound"), "{e}");
        assert_eq!(e.pos.line, 1);
        let e = parse_user_program("n = 3\nn = 4\nfor i in range(0,n):\n  M = i\n").unwrap_err();
        assert!(e.msg.contains("non-constant"));
        assert!(parse_user_program("n = 3\nfor i in range(0,n):\n  M = i\n").is_ok());
    }

    #[test]
    fn rejects_reduce_over_named_array() {
        let e = parse_user_program("X = [None] * 2\nY = reduce_sum(X)\n").unwrap_err();
        assert!(e.msg.contains("named array"));
    }

    #[test]
    fn syntax_errors_have_positions() {
        let e = parse_user_program("M = 7\nM = (3 + \n").unwrap_err();
        assert!(e.pos.line >= 2);
        let e = parse_user_program("M = 7 $\n").unwrap_err();
        assert_eq!((e.pos.line, e.pos.col), (1, 7));
    }

    #[test]
    fn validation_reports_rules() {
        let p = parse_user_program("X = [None] * 2\nY = reduce_sum([X for i in range(0, 2)])\nZ = W + 1\n").unwrap();
        let d = validate_user_program(&p).unwrap_err();
        let rules: Vec<_> = d.iter().map(|d| d.rule).collect();
        assert!(rules.contains(&"comprehension-dim"));
        assert!(rules.contains(&"undefined-ident"));
    }

    #[test]
    fn implicit_line_joining_and_comments() {
        let src = "# header\nM = reduce_sum(\n   [i for i in range(0, 3)])  # trailing\n\nN = M\n";
        let p = parse_user_program(src).unwrap();
        assert_eq!(p.items.len(), 2);
    }
}
