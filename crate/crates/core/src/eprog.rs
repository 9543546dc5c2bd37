//! Event programs: declarations `EID := expr` under nested `forall` loops, with a text format.
//!
//! ```text
//! M_{0} := 7.0
//! forall i in 0..2:
//!   M_{1.(2*i)} := M_{1.(2*i-1)} + i
//! ```

use std::fmt;

use crate::eid::{EidPat, IExpr};
use crate::error::{ParseError, Pos};
use crate::value::{fmt_num, CmpOp, Ty};

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EventProgram {
    pub items: Vec<Item>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Decl(TDecl),
    Forall(Forall),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TDecl {
    pub lhs: EidPat,
    pub rhs: TExpr,
}

/// `forall var in lo..hi:` with `hi` exclusive.
#[derive(Clone, Debug, PartialEq)]
pub struct Forall {
    pub var: String,
    pub lo: IExpr,
    pub hi: IExpr,
    pub body: Vec<Item>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FoldOp {
    And,
    Or,
    Sum,
    Prod,
}

impl FoldOp {
    pub fn keyword(self) -> &'static str {
        match self {
            FoldOp::And => "and",
            FoldOp::Or => "or",
            FoldOp::Sum => "sum",
            FoldOp::Prod => "prod",
        }
    }
}

/// Untyped template expression; types are inferred while grounding.
#[derive(Clone, Debug, PartialEq)]
pub enum TExpr {
    Bool(bool),
    Num(f64),
    VecLit(Vec<f64>),
    Undef(Ty),
    /// Event identifier, random variable or loop counter.
    Name(EidPat),
    Not(Box<TExpr>),
    /// Conjunction; a numeric last operand makes it a guard `Φ ∧ CVAL`.
    And(Vec<TExpr>),
    Or(Vec<TExpr>),
    Add(Vec<TExpr>),
    Mul(Vec<TExpr>),
    /// `Φ ⊗ v`
    Guard(Box<TExpr>, Box<TExpr>),
    Atom(CmpOp, Box<TExpr>, Box<TExpr>),
    Inv(Box<TExpr>),
    Pow(Box<TExpr>, IExpr),
    Dist(Box<TExpr>, Box<TExpr>),
    Fold { op: FoldOp, var: String, lo: IExpr, hi: IExpr, body: Box<TExpr> },
}

impl TExpr {
    pub fn name(p: EidPat) -> TExpr {
        TExpr::Name(p)
    }
    pub fn not(e: TExpr) -> TExpr {
        TExpr::Not(Box::new(e))
    }
    pub fn guard(g: TExpr, v: TExpr) -> TExpr {
        TExpr::Guard(Box::new(g), Box::new(v))
    }
    pub fn atom(op: CmpOp, a: TExpr, b: TExpr) -> TExpr {
        TExpr::Atom(op, Box::new(a), Box::new(b))
    }
    pub fn dist(a: TExpr, b: TExpr) -> TExpr {
        TExpr::Dist(Box::new(a), Box::new(b))
    }
    pub fn fold(op: FoldOp, var: &str, lo: IExpr, hi: IExpr, body: TExpr) -> TExpr {
        TExpr::Fold { op, var: var.to_string(), lo, hi, body: Box::new(body) }
    }

    fn prec(&self) -> u8 {
        match self {
            TExpr::Or(v) if v.len() > 1 => 1,
            TExpr::And(v) if v.len() > 1 => 2,
            TExpr::Add(v) if v.len() > 1 => 3,
            TExpr::Mul(v) if v.len() > 1 => 4,
            TExpr::Guard(..) => 5,
            TExpr::Not(_) => 6,
            TExpr::Num(x) if *x < 0.0 || (*x == 0.0 && x.is_sign_negative()) => 6,
            _ => 7,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.prec();
        let paren = p < min;
        if paren {
            f.write_str("(")?;
        }
        let nary = |f: &mut fmt::Formatter<'_>, v: &[TExpr], op: &str, kw: &str, p: u8| -> fmt::Result {
            if v.len() < 2 {
                write!(f, "{kw}(")?;
                if let Some(e) = v.first() {
                    e.write(f, 0)?;
                }
                return f.write_str(")");
            }
            for (i, c) in v.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                c.write(f, p + 1)?;
            }
            Ok(())
        };
        match self {
            TExpr::Bool(b) => write!(f, "{b}")?,
            TExpr::Num(x) => f.write_str(&fmt_num(*x))?,
            TExpr::VecLit(v) => {
                f.write_str("vec(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(&fmt_num(*x))?;
                }
                f.write_str(")")?;
            }
            TExpr::Undef(Ty::Vector) => f.write_str("undefvec")?,
            TExpr::Undef(_) => f.write_str("undef")?,
            TExpr::Name(p) => write!(f, "{p}")?,
            TExpr::Not(a) => {
                f.write_str("!")?;
                a.write(f, 6)?;
            }
            TExpr::And(v) => nary(f, v, "&", "and", 2)?,
            TExpr::Or(v) => nary(f, v, "|", "or", 1)?,
            TExpr::Add(v) => nary(f, v, "+", "sum", 3)?,
            TExpr::Mul(v) => nary(f, v, "*", "prod", 4)?,
            TExpr::Guard(g, v) => {
                g.write(f, 6)?;
                f.write_str(" @ ")?;
                v.write(f, 5)?;
            }
            TExpr::Atom(op, a, b) => {
                f.write_str("[")?;
                a.write(f, 0)?;
                write!(f, " {} ", op.symbol())?;
                b.write(f, 0)?;
                f.write_str("]")?;
            }
            TExpr::Inv(a) => {
                f.write_str("inv(")?;
                a.write(f, 0)?;
                f.write_str(")")?;
            }
            TExpr::Pow(a, n) => {
                f.write_str("pow(")?;
                a.write(f, 0)?;
                write!(f, ", {n})")?;
            }
            TExpr::Dist(a, b) => {
                f.write_str("dist(")?;
                a.write(f, 0)?;
                f.write_str(", ")?;
                b.write(f, 0)?;
                f.write_str(")")?;
            }
            TExpr::Fold { op, var, lo, hi, body } => {
                write!(f, "{}({var} in {lo}..{hi}: ", op.keyword())?;
                body.write(f, 0)?;
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for TExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

impl fmt::Display for EventProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn items(f: &mut fmt::Formatter<'_>, v: &[Item], depth: usize) -> fmt::Result {
            for it in v {
                let pad = "  ".repeat(depth);
                match it {
                    Item::Decl(d) => writeln!(f, "{pad}{} := {}", d.lhs, d.rhs)?,
                    Item::Forall(l) => {
                        writeln!(f, "{pad}forall {} in {}..{}:", l.var, l.lo, l.hi)?;
                        items(f, &l.body, depth + 1)?;
                    }
                }
            }
            Ok(())
        }
        items(f, &self.items, 0)
    }
}

impl EventProgram {
    /// Counts declarations including those nested in loops (not instantiations).
    pub fn decl_count(&self) -> usize {
        fn count(v: &[Item]) -> usize {
            v.iter()
                .map(|i| match i {
                    Item::Decl(_) => 1,
                    Item::Forall(l) => count(&l.body),
                })
                .sum()
        }
        count(&self.items)
    }
}

// ---------------------------------------------------------------------------
// parsing

/// Parses the textual event-program format.
pub fn parse_event_program(text: &str) -> Result<EventProgram, ParseError> {
    let mut lines = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let body = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if body.trim().is_empty() {
            continue;
        }
        if body.contains('\t') {
            return Err(ParseError::new(Pos::new(no as u32 + 1, 1), "tabs are not allowed in indentation"));
        }
        let indent = body.len() - body.trim_start().len();
        lines.push((no as u32 + 1, indent, body.trim_end().to_string()));
    }
    let mut pos = 0;
    let items = parse_block(&lines, &mut pos, 0)?;
    if pos < lines.len() {
        let (no, ind, _) = &lines[pos];
        return Err(ParseError::new(Pos::new(*no, *ind as u32 + 1), "unexpected indentation"));
    }
    Ok(EventProgram { items })
}

fn parse_block(lines: &[(u32, usize, String)], pos: &mut usize, indent: usize) -> Result<Vec<Item>, ParseError> {
    let mut out = Vec::new();
    while *pos < lines.len() {
        let (no, ind, text) = &lines[*pos];
        if *ind < indent {
            break;
        }
        if *ind > indent {
            return Err(ParseError::new(Pos::new(*no, *ind as u32 + 1), "unexpected indentation"));
        }
        *pos += 1;
        let mut c = Cursor::new(text, *no);
        c.i = *ind;
        if c.peek_keyword("forall") {
            c.keyword("forall")?;
            let var = c.ident()?;
            c.keyword("in")?;
            let lo = c.iexpr()?;
            c.expect("..")?;
            let hi = c.iexpr()?;
            c.expect(":")?;
            c.end()?;
            let inner = match lines.get(*pos) {
                Some((_, i, _)) if *i > indent => *i,
                _ => return Err(c.err("expected an indented loop body")),
            };
            let body = parse_block(lines, pos, inner)?;
            out.push(Item::Forall(Forall { var, lo, hi, body }));
        } else {
            let lhs = c.eid()?;
            c.expect(":=")?;
            let rhs = c.expr()?;
            c.end()?;
            out.push(Item::Decl(TDecl { lhs, rhs }));
        }
    }
    Ok(out)
}

/// Parses a single expression (used for dataset event strings).
pub fn parse_texpr(text: &str) -> Result<TExpr, ParseError> {
    let mut c = Cursor::new(text, 1);
    let e = c.expr()?;
    c.end()?;
    Ok(e)
}

/// Parses one identifier pattern such as `InCl_{0.3}^{i,l}`.
pub fn parse_eid(text: &str) -> Result<EidPat, ParseError> {
    let mut c = Cursor::new(text, 1);
    let e = c.eid()?;
    c.end()?;
    Ok(e)
}

struct Cursor<'a> {
    s: &'a [u8],
    src: &'a str,
    i: usize,
    line: u32,
}

const KEYWORDS: &[&str] = &["true", "false", "undef", "undefvec", "forall", "in"];

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: u32) -> Self {
        Cursor { s: src.as_bytes(), src, i: 0, line }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(Pos::new(self.line, self.i as u32 + 1), msg)
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && (self.s[self.i] == b' ' || self.s[self.i] == b'\t') {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn at(&mut self, tok: &str) -> bool {
        self.ws();
        self.src[self.i..].starts_with(tok)
    }

    fn eat(&mut self, tok: &str) -> bool {
        if self.at(tok) {
            self.i += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{tok}`")))
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        if self.peek().is_some() {
            Err(self.err("unexpected trailing input"))
        } else {
            Ok(())
        }
    }

    fn word_at(&mut self) -> &'a str {
        self.ws();
        let s = self.s;
        let mut j = self.i;
        if j < s.len() && (s[j].is_ascii_alphabetic() || s[j] == b'_') {
            while j < s.len() && (s[j].is_ascii_alphanumeric() || s[j] == b'_') {
                // `_{` opens a label
                if s[j] == b'_' && s.get(j + 1) == Some(&b'{') {
                    break;
                }
                j += 1;
            }
        }
        &self.src[self.i..j]
    }

    fn peek_keyword(&mut self, kw: &str) -> bool {
        self.word_at() == kw
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.peek_keyword(kw) {
            self.i += kw.len();
            Ok(())
        } else {
            Err(self.err(format!("expected `{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let w = self.word_at();
        if w.is_empty() {
            return Err(self.err("expected an identifier"));
        }
        self.i += w.len();
        Ok(w.to_string())
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        self.ws();
        let st = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        self.src[st..self.i].parse().map_err(|_| self.err("expected an integer"))
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.ws();
        let st = self.i;
        if self.s.get(self.i) == Some(&b'-') {
            self.i += 1;
        }
        let s = self.s;
        let digits = |i: &mut usize| {
            while *i < s.len() && s[*i].is_ascii_digit() {
                *i += 1;
            }
        };
        digits(&mut self.i);
        // a `..` range is never part of a number
        if s.get(self.i) == Some(&b'.') && s.get(self.i + 1) != Some(&b'.') {
            self.i += 1;
            digits(&mut self.i);
        }
        if matches!(s.get(self.i), Some(b'e') | Some(b'E')) {
            let save = self.i;
            self.i += 1;
            if matches!(s.get(self.i), Some(b'+') | Some(b'-')) {
                self.i += 1;
            }
            let d0 = self.i;
            digits(&mut self.i);
            if self.i == d0 {
                self.i = save;
            }
        }
        let txt = &self.src[st..self.i];
        let txt = match txt {
            "inf" => "inf",
            t => t,
        };
        txt.parse().map_err(|_| {
            self.i = st;
            self.err("expected a number")
        })
    }

    // iexpr := term (('+'|'-') term)*
    fn iexpr(&mut self) -> Result<IExpr, ParseError> {
        let mut a = self.iterm()?;
        loop {
            if self.at("..") {
                return Ok(a);
            }
            if self.eat("+") {
                a = IExpr::Add(Box::new(a), Box::new(self.iterm()?));
            } else if self.eat("-") {
                a = IExpr::Sub(Box::new(a), Box::new(self.iterm()?));
            } else {
                return Ok(a);
            }
        }
    }

    fn iterm(&mut self) -> Result<IExpr, ParseError> {
        let mut a = self.ifactor()?;
        while self.eat("*") {
            a = IExpr::Mul(Box::new(a), Box::new(self.ifactor()?));
        }
        Ok(a)
    }

    fn ifactor(&mut self) -> Result<IExpr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let e = self.iexpr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(b'-') => {
                self.i += 1;
                if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    Ok(IExpr::Int(-self.int()?))
                } else {
                    Ok(IExpr::Neg(Box::new(self.ifactor()?)))
                }
            }
            Some(c) if c.is_ascii_digit() => Ok(IExpr::Int(self.int()?)),
            _ => Ok(IExpr::Var(self.ident()?)),
        }
    }

    fn label_comp(&mut self) -> Result<IExpr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let e = self.iexpr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(b'-') => {
                self.i += 1;
                Ok(IExpr::Int(-self.int()?))
            }
            Some(c) if c.is_ascii_digit() => Ok(IExpr::Int(self.int()?)),
            _ => Ok(IExpr::Var(self.ident()?)),
        }
    }

    fn eid(&mut self) -> Result<EidPat, ParseError> {
        let name = self.ident()?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(self.err(format!("`{name}` is reserved")));
        }
        let mut p = EidPat::plain(&name);
        if self.src[self.i..].starts_with("_{") {
            self.i += 2;
            loop {
                p.label.push(self.label_comp()?);
                if !self.eat(".") {
                    break;
                }
            }
            self.expect("}")?;
        }
        if self.src[self.i..].starts_with("^{") {
            self.i += 2;
            loop {
                p.index.push(self.iexpr()?);
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("}")?;
        }
        Ok(p)
    }

    fn expr(&mut self) -> Result<TExpr, ParseError> {
        self.nary("|", Self::and_expr, TExpr::Or)
    }

    fn and_expr(&mut self) -> Result<TExpr, ParseError> {
        self.nary("&", Self::add_expr, TExpr::And)
    }

    fn add_expr(&mut self) -> Result<TExpr, ParseError> {
        self.nary("+", Self::mul_expr, TExpr::Add)
    }

    fn mul_expr(&mut self) -> Result<TExpr, ParseError> {
        self.nary("*", Self::guard_expr, TExpr::Mul)
    }

    fn nary(
        &mut self,
        op: &str,
        sub: fn(&mut Self) -> Result<TExpr, ParseError>,
        mk: fn(Vec<TExpr>) -> TExpr,
    ) -> Result<TExpr, ParseError> {
        let first = sub(self)?;
        let mut v = vec![first];
        while self.eat(op) {
            v.push(sub(self)?);
        }
        Ok(if v.len() == 1 { v.pop().unwrap() } else { mk(v) })
    }

    fn guard_expr(&mut self) -> Result<TExpr, ParseError> {
        let g = self.unary()?;
        if self.eat("@") {
            let v = self.guard_expr()?;
            Ok(TExpr::guard(g, v))
        } else {
            Ok(g)
        }
    }

    fn unary(&mut self) -> Result<TExpr, ParseError> {
        if self.eat("!") {
            return Ok(TExpr::not(self.unary()?));
        }
        self.primary()
    }

    fn args(&mut self) -> Result<Vec<TExpr>, ParseError> {
        let mut v = Vec::new();
        if self.eat(")") {
            return Ok(v);
        }
        loop {
            v.push(self.expr()?);
            if self.eat(")") {
                return Ok(v);
            }
            self.expect(",")?;
        }
    }

    fn primary(&mut self) -> Result<TExpr, ParseError> {
        match self.peek() {
            None => return Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.i += 1;
                let e = self.expr()?;
                self.expect(")")?;
                return Ok(e);
            }
            Some(b'[') => {
                self.i += 1;
                let a = self.expr()?;
                let op = ["<=", ">=", "==", "<", ">", "="]
                    .iter()
                    .find(|t| self.eat(t))
                    .and_then(|t| CmpOp::from_symbol(t))
                    .ok_or_else(|| self.err("expected a comparison operator"))?;
                let b = self.expr()?;
                self.expect("]")?;
                return Ok(TExpr::atom(op, a, b));
            }
            Some(c) if c.is_ascii_digit() || c == b'-' || c == b'.' => return Ok(TExpr::Num(self.number()?)),
            _ => {}
        }
        let w = self.word_at();
        let save = self.i;
        let call = |c: &mut Self, w: &str| -> bool {
            c.i += w.len();
            if c.eat("(") {
                true
            } else {
                c.i = save;
                false
            }
        };
        match w {
            "true" => {
                self.i += 4;
                Ok(TExpr::Bool(true))
            }
            "false" => {
                self.i += 5;
                Ok(TExpr::Bool(false))
            }
            "undef" => {
                self.i += 5;
                Ok(TExpr::Undef(Ty::Scalar))
            }
            "undefvec" => {
                self.i += 8;
                Ok(TExpr::Undef(Ty::Vector))
            }
            "inf" => Ok(TExpr::Num(self.number()?)),
            "vec" if call(self, w) => {
                let mut v = Vec::new();
                if !self.eat(")") {
                    loop {
                        v.push(self.number()?);
                        if self.eat(")") {
                            break;
                        }
                        self.expect(",")?;
                    }
                }
                Ok(TExpr::VecLit(v))
            }
            "and" | "or" | "sum" | "prod" if call(self, w) => {
                let op = match w {
                    "and" => FoldOp::And,
                    "or" => FoldOp::Or,
                    "sum" => FoldOp::Sum,
                    _ => FoldOp::Prod,
                };
                // fold form `sum(p in lo..hi: body)`
                let mark = self.i;
                let is_fold = {
                    let id = self.word_at();
                    if !id.is_empty() {
                        self.i += id.len();
                        let r = self.peek_keyword("in");
                        self.i = mark;
                        r
                    } else {
                        false
                    }
                };
                if is_fold {
                    let var = self.ident()?;
                    self.keyword("in")?;
                    let lo = self.iexpr()?;
                    self.expect("..")?;
                    let hi = self.iexpr()?;
                    self.expect(":")?;
                    let body = self.expr()?;
                    self.expect(")")?;
                    return Ok(TExpr::fold(op, &var, lo, hi, body));
                }
                let args = self.args()?;
                Ok(match op {
                    FoldOp::And => TExpr::And(args),
                    FoldOp::Or => TExpr::Or(args),
                    FoldOp::Sum => TExpr::Add(args),
                    FoldOp::Prod => TExpr::Mul(args),
                })
            }
            "inv" if call(self, w) => {
                let a = self.expr()?;
                self.expect(")")?;
                Ok(TExpr::Inv(Box::new(a)))
            }
            "pow" if call(self, w) => {
                let a = self.expr()?;
                self.expect(",")?;
                let n = self.iexpr()?;
                self.expect(")")?;
                Ok(TExpr::Pow(Box::new(a), n))
            }
            "dist" if call(self, w) => {
                let a = self.expr()?;
                self.expect(",")?;
                let b = self.expr()?;
                self.expect(")")?;
                Ok(TExpr::dist(a, b))
            }
            "" => Err(self.err("expected an expression")),
            _ => Ok(TExpr::Name(self.eid()?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
M_{0} := 7.0
M_{1} := M_{0} + 2.0
M_{1.-1} := M_{1}
forall i in 0..2:
  M_{1.(2*i)} := M_{1.(2*i-1)} + i
  forall j in 0..3:
    M_{1.(2*i).j} := M_{1.(2*i).(j-1)} + 1.0
X^{0} := (x1 | x3) @ vec(0.0, 1.5)
S := sum(p in 0..4: InCl^{0,p} & dist(O^{1}, O^{p}))
C := and(p in 0..4: [S <= S]) & !x2
P := prod() + sum(a) + inv(pow(-2.5, -1))
";

    #[test]
    fn parse_print_fixpoint() {
        let p = parse_event_program(SAMPLE).unwrap();
        let printed = p.to_string();
        let q = parse_event_program(&printed).unwrap();
        assert_eq!(p, q);
        assert_eq!(printed, q.to_string());
        assert_eq!(p.decl_count(), 9);
    }

    #[test]
    fn eid_components() {
        let e = parse_eid("M_{1.(2*i).-1}^{i,l+1}").unwrap();
        assert_eq!(e.label.len(), 3);
        assert_eq!(e.label[2], IExpr::Int(-1));
        assert_eq!(e.to_string(), "M_{1.(2*i).-1}^{i,l+1}");
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_event_program("A := x1 &\n").unwrap_err();
        assert_eq!(err.pos.line, 1);
        let err = parse_event_program("A := x1\n    B := x2\n").unwrap_err();
        assert_eq!(err.pos.line, 2);
        assert!(parse_texpr("[a <= ]").is_err());
    }

    #[test]
    fn guard_is_right_associative() {
        let e = parse_texpr("a @ b @ 1.0").unwrap();
        match e {
            TExpr::Guard(_, v) => assert!(matches!(*v, TExpr::Guard(..))),
            _ => panic!(),
        }
    }
}
