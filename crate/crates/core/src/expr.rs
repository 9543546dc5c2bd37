//! Grounded expressions over Boolean random variables and their per-world semantics.

use std::collections::HashMap;
use std::fmt;

use crate::error::{EvalError, TypeError};
use crate::value::{fmt_num, CmpOp, Ty, Value};

/// Independent Boolean random variables with their probabilities of being true.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarTable {
    vars: Vec<(String, f64)>,
    index: HashMap<String, usize>,
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self, String> {
        let mut vt = VarTable::new();
        for (id, p) in pairs {
            vt.push(id, p)?;
        }
        Ok(vt)
    }

    pub fn push(&mut self, id: impl Into<String>, p: f64) -> Result<usize, String> {
        let id = id.into();
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("probability of `{id}` is {p}, outside [0,1]"));
        }
        if self.index.contains_key(&id) {
            return Err(format!("variable `{id}` declared twice"));
        }
        let i = self.vars.len();
        self.index.insert(id.clone(), i);
        self.vars.push((id, p));
        Ok(i)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn lookup(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.vars[i].0
    }

    /// Probability that variable `i` is true.
    pub fn p(&self, i: usize) -> f64 {
        self.vars[i].1
    }

    /// `P_x[b]`.
    pub fn p_of(&self, i: usize, b: bool) -> f64 {
        if b {
            self.vars[i].1
        } else {
            1.0 - self.vars[i].1
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.vars.iter().map(|(s, p)| (s.as_str(), *p))
    }
}

/// A (possibly partial) assignment of truth values, indexed like the `VarTable`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Valuation(pub Vec<Option<bool>>);

impl Valuation {
    pub fn empty(vt: &VarTable) -> Self {
        Valuation(vec![None; vt.len()])
    }

    /// Total valuation from the bits of `world` (bit `i` is variable `i`).
    pub fn from_bits(m: usize, world: u64) -> Self {
        Valuation((0..m).map(|i| Some(world >> i & 1 == 1)).collect())
    }

    /// Unlisted variables stay unassigned.
    pub fn from_named(vt: &VarTable, pairs: &[(&str, bool)]) -> Result<Self, EvalError> {
        let mut v = Valuation::empty(vt);
        for (id, b) in pairs {
            let i = vt.lookup(id).ok_or_else(|| EvalError::Unresolved(id.to_string()))?;
            v.0[i] = Some(*b);
        }
        Ok(v)
    }

    /// Completes unassigned variables with `fill`.
    pub fn completed(&self, fill: bool) -> Self {
        Valuation(self.0.iter().map(|b| Some(b.unwrap_or(fill))).collect())
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied().flatten()
    }

    pub fn is_total(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }
}

/// `Pr(ν) = ∏ P_x[ν(x)]` for a total valuation.
pub fn world_probability(nu: &Valuation, vt: &VarTable) -> Result<f64, EvalError> {
    if nu.0.len() != vt.len() {
        return Err(EvalError::Unassigned(format!(
            "valuation has {} entries for {} variables",
            nu.0.len(),
            vt.len()
        )));
    }
    let mut p = 1.0;
    for (i, b) in nu.0.iter().enumerate() {
        let b = b.ok_or_else(|| EvalError::Unassigned(vt.name(i).to_string()))?;
        p *= vt.p_of(i, b);
    }
    Ok(p)
}

/// Grounded expression. Boolean-typed trees are events, numeric ones c-values.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Bool(bool),
    Var(usize),
    /// Reference to a declaration by index.
    Ref(usize),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Atom(CmpOp, Box<Expr>, Box<Expr>),
    /// Constant value; a plain `v` stands for `⊤ ⊗ v`.
    Num(Value),
    /// `Φ ⊗ v` and `Φ ∧ CVAL`: the value when the event holds, otherwise undefined.
    Guard(Box<Expr>, Box<Expr>),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Inv(Box<Expr>),
    Pow(Box<Expr>, i32),
    Dist(Box<Expr>, Box<Expr>),
}

/// Event declarations share one expression type.
pub type EventExpr = Expr;
/// Conditional values share one expression type.
pub type CVal = Expr;

impl Expr {
    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }
    pub fn atom(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Atom(op, Box::new(a), Box::new(b))
    }
    pub fn guard(g: Expr, v: Expr) -> Expr {
        Expr::Guard(Box::new(g), Box::new(v))
    }
    pub fn scalar(x: f64) -> Expr {
        Expr::Num(Value::Scalar(Some(x)))
    }
    pub fn vector(v: Vec<f64>) -> Expr {
        Expr::Num(Value::Vector(Some(v)))
    }
    pub fn dist(a: Expr, b: Expr) -> Expr {
        Expr::Dist(Box::new(a), Box::new(b))
    }

    /// Visits direct children.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Bool(_) | Expr::Var(_) | Expr::Ref(_) | Expr::Num(_) => vec![],
            Expr::Not(a) | Expr::Inv(a) | Expr::Pow(a, _) => vec![a],
            Expr::And(v) | Expr::Or(v) | Expr::Sum(v) | Expr::Prod(v) => v.iter().collect(),
            Expr::Atom(_, a, b) | Expr::Guard(a, b) | Expr::Dist(a, b) => vec![a, b],
        }
    }

    /// Adds every variable index occurring in the tree (not through references).
    pub fn collect_vars(&self, out: &mut Vec<usize>) {
        if let Expr::Var(i) = self {
            out.push(*i);
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    pub fn collect_refs(&self, out: &mut Vec<usize>) {
        if let Expr::Ref(i) = self {
            out.push(*i);
        }
        for c in self.children() {
            c.collect_refs(out);
        }
    }

    /// Renders with variable and declaration names; output parses as event-program syntax.
    pub fn display<'a>(&'a self, names: &'a dyn Names) -> ExprDisplay<'a> {
        ExprDisplay { e: self, names }
    }
}

/// Name lookup used when rendering grounded expressions.
pub trait Names {
    fn var(&self, i: usize) -> String;
    fn decl(&self, i: usize) -> String;
}

pub struct ExprDisplay<'a> {
    e: &'a Expr,
    names: &'a dyn Names,
}

// Precedence levels, loosest first: | & + * @ !
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Or(v) if v.len() > 1 => 1,
        Expr::And(v) if v.len() > 1 => 2,
        Expr::Sum(v) if v.len() > 1 => 3,
        Expr::Prod(v) if v.len() > 1 => 4,
        Expr::Guard(..) => 5,
        Expr::Not(_) => 6,
        _ => 7,
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, names: &dyn Names, min: u8) -> fmt::Result {
    let p = prec(e);
    let paren = p < min;
    if paren {
        f.write_str("(")?;
    }
    let nary = |f: &mut fmt::Formatter<'_>, v: &[Expr], op: &str, kw: &str, p: u8| -> fmt::Result {
        match v.len() {
            0 => write!(f, "{kw}()"),
            1 => {
                write!(f, "{kw}(")?;
                write_expr(f, &v[0], names, 0)?;
                f.write_str(")")
            }
            _ => {
                for (i, c) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, " {op} ")?;
                    }
                    write_expr(f, c, names, p + 1)?;
                }
                Ok(())
            }
        }
    };
    match e {
        Expr::Bool(b) => write!(f, "{b}")?,
        Expr::Var(i) => f.write_str(&names.var(*i))?,
        Expr::Ref(i) => f.write_str(&names.decl(*i))?,
        Expr::Not(a) => {
            f.write_str("!")?;
            write_expr(f, a, names, 6)?;
        }
        Expr::And(v) => nary(f, v, "&", "and", 2)?,
        Expr::Or(v) => nary(f, v, "|", "or", 1)?,
        Expr::Sum(v) => nary(f, v, "+", "sum", 3)?,
        Expr::Prod(v) => nary(f, v, "*", "prod", 4)?,
        Expr::Atom(op, a, b) => {
            f.write_str("[")?;
            write_expr(f, a, names, 0)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, b, names, 0)?;
            f.write_str("]")?;
        }
        Expr::Num(v) => match v {
            Value::Scalar(Some(x)) => f.write_str(&fmt_num(*x))?,
            Value::Scalar(None) => f.write_str("undef")?,
            Value::Vector(None) => f.write_str("undefvec")?,
            other => write!(f, "{other}")?,
        },
        Expr::Guard(g, v) => {
            // right-associative
            write_expr(f, g, names, 6)?;
            f.write_str(" @ ")?;
            write_expr(f, v, names, 5)?;
        }
        Expr::Inv(a) => {
            f.write_str("inv(")?;
            write_expr(f, a, names, 0)?;
            f.write_str(")")?;
        }
        Expr::Pow(a, n) => {
            f.write_str("pow(")?;
            write_expr(f, a, names, 0)?;
            write!(f, ", {n})")?;
        }
        Expr::Dist(a, b) => {
            f.write_str("dist(")?;
            write_expr(f, a, names, 0)?;
            f.write_str(", ")?;
            write_expr(f, b, names, 0)?;
            f.write_str(")")?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.e, self.names, 0)
    }
}

/// A named grounded declaration.
#[derive(Clone, Debug, PartialEq)]
pub struct Decl {
    pub eid: String,
    pub ty: Ty,
    pub expr: Expr,
}

#[derive(Clone, Debug)]
enum Slot {
    Todo,
    Visiting,
    Done(Value),
}

/// Evaluates expressions under one total valuation, resolving references lazily.
pub struct Evaluator<'a> {
    decls: &'a [Decl],
    nu: &'a Valuation,
    memo: Vec<Slot>,
}

impl<'a> Evaluator<'a> {
    pub fn new(decls: &'a [Decl], nu: &'a Valuation) -> Self {
        Evaluator { decls, nu, memo: vec![Slot::Todo; decls.len()] }
    }

    pub fn eval_decl(&mut self, i: usize) -> Result<Value, EvalError> {
        match self.memo.get(i) {
            None => return Err(EvalError::Unresolved(format!("#{i}"))),
            Some(Slot::Done(v)) => return Ok(v.clone()),
            Some(Slot::Visiting) => return Err(EvalError::Cycle(self.decls[i].eid.clone())),
            Some(Slot::Todo) => {}
        }
        self.memo[i] = Slot::Visiting;
        let decls = self.decls;
        let v = self.eval(&decls[i].expr)?;
        self.memo[i] = Slot::Done(v.clone());
        Ok(v)
    }

    pub fn eval(&mut self, e: &Expr) -> Result<Value, EvalError> {
        let nu = self.nu;
        let mut lookup = |i: usize| -> Result<Value, EvalError> { self.eval_decl(i) };
        eval_with(e, nu, &mut lookup)
    }
}

/// Evaluates `e` under `nu`, resolving references through `lookup`.
pub fn eval_with(
    e: &Expr,
    nu: &Valuation,
    lookup: &mut dyn FnMut(usize) -> Result<Value, EvalError>,
) -> Result<Value, EvalError> {
    Ok(match e {
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Var(i) => Value::Bool(nu.get(*i).ok_or_else(|| EvalError::Unassigned(format!("#{i}")))?),
        Expr::Ref(i) => lookup(*i)?,
        Expr::Not(a) => Value::Bool(!eval_with(a, nu, lookup)?.as_bool()?),
        Expr::And(v) => {
            let mut r = true;
            for c in v {
                r &= eval_with(c, nu, lookup)?.as_bool()?;
            }
            Value::Bool(r)
        }
        Expr::Or(v) => {
            let mut r = false;
            for c in v {
                r |= eval_with(c, nu, lookup)?.as_bool()?;
            }
            Value::Bool(r)
        }
        Expr::Atom(op, a, b) => {
            let a = eval_with(a, nu, lookup)?;
            let b = eval_with(b, nu, lookup)?;
            Value::Bool(a.compare(*op, &b)?)
        }
        Expr::Num(v) => v.clone(),
        Expr::Guard(g, v) => {
            let g = eval_with(g, nu, lookup)?.as_bool()?;
            let v = eval_with(v, nu, lookup)?;
            if v.ty() == Ty::Bool {
                return Err(TypeError::new("guarded value must be numeric").into());
            }
            if g {
                v
            } else {
                Value::undef(v.ty())
            }
        }
        Expr::Sum(v) => fold(v, nu, lookup, Value::add)?,
        Expr::Prod(v) => fold(v, nu, lookup, Value::mul)?,
        Expr::Inv(a) => eval_with(a, nu, lookup)?.inv()?,
        Expr::Pow(a, n) => eval_with(a, nu, lookup)?.pow(*n)?,
        Expr::Dist(a, b) => {
            let a = eval_with(a, nu, lookup)?;
            let b = eval_with(b, nu, lookup)?;
            a.dist(&b)?
        }
    })
}

fn fold(
    v: &[Expr],
    nu: &Valuation,
    lookup: &mut dyn FnMut(usize) -> Result<Value, EvalError>,
    op: fn(&Value, &Value) -> Result<Value, TypeError>,
) -> Result<Value, EvalError> {
    let mut it = v.iter();
    let Some(first) = it.next() else {
        return Ok(Value::Scalar(None));
    };
    let mut acc = eval_with(first, nu, lookup)?;
    for c in it {
        let x = eval_with(c, nu, lookup)?;
        acc = op(&acc, &x)?;
    }
    Ok(acc)
}

/// `ν(e)` for an event; declarations in `env` resolve references.
pub fn eval_event(e: &Expr, nu: &Valuation, env: &[Decl]) -> Result<bool, EvalError> {
    Ok(eval_cval(e, nu, env)?.as_bool()?)
}

/// `ν(c)` for any expression; references resolve through `env` with cycle detection.
pub fn eval_cval(e: &Expr, nu: &Valuation, env: &[Decl]) -> Result<Value, EvalError> {
    let mut ev = Evaluator::new(env, nu);
    ev.eval(e)
}

/// Evaluates every declaration in order; references must point backwards.
pub fn eval_all(decls: &[Decl], nu: &Valuation) -> Result<Vec<Value>, EvalError> {
    let mut out: Vec<Value> = Vec::with_capacity(decls.len());
    for d in decls {
        let v = {
            let done = &out;
            let mut lookup = |i: usize| -> Result<Value, EvalError> {
                done.get(i).cloned().ok_or_else(|| EvalError::Unresolved(decls.get(i).map_or(format!("#{i}"), |d| d.eid.clone())))
            };
            eval_with(&d.expr, nu, &mut lookup)?
        };
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1() -> VarTable {
        VarTable::from_pairs([("x1", 0.6), ("x2", 0.5), ("x3", 0.7), ("x4", 0.4)]).unwrap()
    }

    #[test]
    fn example_world_events() {
        let vt = ex1();
        let nu = Valuation::from_named(&vt, &[("x1", true), ("x2", false), ("x3", true), ("x4", true)]).unwrap();
        let phi0 = Expr::Or(vec![Expr::Var(0), Expr::Var(2)]);
        let phi3 = Expr::And(vec![Expr::not(Expr::Var(1)), Expr::Var(3)]);
        assert!(eval_event(&phi0, &nu, &[]).unwrap());
        assert!(eval_event(&phi3, &nu, &[]).unwrap());
        assert!(eval_event(&Expr::Bool(true), &nu, &[]).unwrap());
    }

    #[test]
    fn atom_with_undefined_operand_is_true() {
        let vt = VarTable::from_pairs([("x", 0.5)]).unwrap();
        let nu = Valuation::from_named(&vt, &[("x", true)]).unwrap();
        let a = Expr::atom(
            CmpOp::Le,
            Expr::guard(Expr::Var(0), Expr::scalar(2.0)),
            Expr::guard(Expr::Bool(false), Expr::scalar(5.0)),
        );
        assert!(eval_event(&a, &nu, &[]).unwrap());
    }

    #[test]
    fn guarded_sum_and_disjunction_law() {
        let vt = VarTable::from_pairs([("a", 0.5), ("b", 0.5)]).unwrap();
        let nu = Valuation::from_named(&vt, &[("a", true), ("b", false)]).unwrap();
        let v = Expr::vector(vec![1.0, 2.0]);
        let w = Expr::vector(vec![10.0, 20.0]);
        let s = Expr::Sum(vec![Expr::guard(Expr::Var(0), v.clone()), Expr::guard(Expr::Var(1), w)]);
        assert_eq!(eval_cval(&s, &nu, &[]).unwrap(), Value::Vector(Some(vec![1.0, 2.0])));

        let both = Valuation::from_named(&vt, &[("a", true), ("b", true)]).unwrap();
        let lhs = Expr::guard(Expr::Or(vec![Expr::Var(0), Expr::Var(1)]), v.clone());
        let rhs = Expr::Sum(vec![Expr::guard(Expr::Var(0), v.clone()), Expr::guard(Expr::Var(1), v)]);
        assert_eq!(eval_cval(&lhs, &both, &[]).unwrap(), Value::Vector(Some(vec![1.0, 2.0])));
        assert_eq!(eval_cval(&rhs, &both, &[]).unwrap(), Value::Vector(Some(vec![2.0, 4.0])));
    }

    #[test]
    fn inverse_of_zero_difference() {
        let e = Expr::Prod(vec![
            Expr::scalar(5.0),
            Expr::Inv(Box::new(Expr::Sum(vec![Expr::scalar(3.0), Expr::scalar(-3.0)]))),
        ]);
        assert_eq!(eval_cval(&e, &Valuation(vec![]), &[]).unwrap(), Value::Scalar(None));
    }

    #[test]
    fn world_probabilities() {
        let vt = VarTable::from_pairs([("a", 0.5), ("b", 0.5)]).unwrap();
        for w in 0..4 {
            assert_eq!(world_probability(&Valuation::from_bits(2, w), &vt).unwrap(), 0.25);
        }
        let one = VarTable::from_pairs([("x", 0.7)]).unwrap();
        assert_eq!(world_probability(&Valuation::from_bits(1, 1), &one).unwrap(), 0.7);
        let vt = ex1();
        let nu = Valuation::from_named(&vt, &[("x1", true), ("x2", false), ("x3", true), ("x4", true)]).unwrap();
        let p = world_probability(&nu, &vt).unwrap();
        assert!((p - 0.6 * 0.5 * 0.7 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn resolution_errors() {
        let decls = vec![
            Decl { eid: "A".into(), ty: Ty::Bool, expr: Expr::Ref(1) },
            Decl { eid: "B".into(), ty: Ty::Bool, expr: Expr::Ref(0) },
        ];
        let nu = Valuation(vec![]);
        assert!(matches!(eval_event(&Expr::Ref(0), &nu, &decls), Err(EvalError::Cycle(_))));
        assert!(matches!(eval_event(&Expr::Ref(7), &nu, &decls), Err(EvalError::Unresolved(_))));
        let vt = VarTable::from_pairs([("x", 0.5)]).unwrap();
        assert!(Valuation::from_named(&vt, &[("y", true)]).is_err());
        let d = Expr::dist(Expr::scalar(1.0), Expr::scalar(2.0));
        assert!(matches!(eval_cval(&d, &nu, &[]), Err(EvalError::Type(_))));
    }
}
