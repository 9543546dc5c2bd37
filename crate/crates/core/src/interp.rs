//! Direct execution of a user program inside one possible world.
//!
//! Mutable variables, real arrays, and the same undefined-value algebra as the event semantics.
//! Used as an independent reference for the translator.

use std::collections::HashMap;

use crate::error::{EvalError, TypeError};
use crate::lang::{Comprehension, Expr, ExprKind, ExtCall, ReduceOp, Stmt, TieAxis, UserProgram};
use crate::translate::Bindings;
use crate::value::{Ty, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum IVal {
    /// `None` element of an array that was never written
    Unset,
    V(Value),
    Arr(Vec<IVal>),
}

impl IVal {
    pub fn value(&self) -> Option<&Value> {
        match self {
            IVal::V(v) => Some(v),
            _ => None,
        }
    }

    /// Element at a multi-index.
    pub fn at(&self, idx: &[usize]) -> Option<&IVal> {
        match idx.split_first() {
            None => Some(self),
            Some((&i, rest)) => match self {
                IVal::Arr(v) => v.get(i)?.at(rest),
                _ => None,
            },
        }
    }
}

fn terr(msg: impl Into<String>) -> EvalError {
    EvalError::Type(TypeError::new(msg))
}

struct Interp<'a> {
    b: &'a Bindings,
    present: &'a [bool],
    vars: HashMap<String, IVal>,
    counters: HashMap<String, i64>,
    objects: Option<String>,
}

/// Runs `p` in the world where object `l` exists iff `present[l]`; returns final variable values.
pub fn interpret(p: &UserProgram, b: &Bindings, present: &[bool]) -> Result<HashMap<String, IVal>, EvalError> {
    let mut it = Interp { b, present, vars: HashMap::new(), counters: HashMap::new(), objects: None };
    it.stmts(&p.items)?;
    Ok(it.vars)
}

impl Interp<'_> {
    fn stmts(&mut self, v: &[Stmt]) -> Result<(), EvalError> {
        for s in v {
            match s {
                Stmt::Assign { name, indices, value, .. } => {
                    let val = self.rhs(value)?;
                    if indices.is_empty() {
                        self.vars.insert(name.clone(), val);
                    } else {
                        let idx = indices.iter().map(|i| self.int(i)).collect::<Result<Vec<_>, _>>()?;
                        let slot = self.vars.get_mut(name).ok_or_else(|| EvalError::Unresolved(name.clone()))?;
                        *Self::slot(slot, &idx, name)? = val;
                    }
                }
                Stmt::External { names, call, .. } => self.external(names, *call)?,
                Stmt::For { var, lo, hi, body, .. } => {
                    let (lo, hi) = (self.int(lo)?, self.int(hi)?);
                    for i in lo..hi {
                        self.counters.insert(var.clone(), i);
                        self.stmts(body)?;
                    }
                    self.counters.remove(var);
                }
            }
        }
        Ok(())
    }

    fn slot<'v>(mut cur: &'v mut IVal, idx: &[i64], name: &str) -> Result<&'v mut IVal, EvalError> {
        for &i in idx {
            cur = match cur {
                IVal::Arr(v) => v.get_mut(i as usize).ok_or_else(|| terr(format!("index {i} out of range for `{name}`")))?,
                _ => return Err(terr(format!("`{name}` indexed too deeply"))),
            };
        }
        Ok(cur)
    }

    fn external(&mut self, names: &[String], call: ExtCall) -> Result<(), EvalError> {
        let b = self.b;
        match call {
            ExtCall::LoadData => {
                let objs = b
                    .points
                    .iter()
                    .zip(self.present)
                    .map(|(p, &here)| IVal::V(Value::Vector(here.then(|| p.coords.clone()))))
                    .collect();
                self.vars.insert(names[0].clone(), IVal::Arr(objs));
                self.vars.insert(names[1].clone(), IVal::V(Value::Scalar(Some(b.points.len() as f64))));
                self.objects = Some(names[0].clone());
                if let Some(m) = names.get(2) {
                    let w = b.matrix.as_ref().ok_or_else(|| EvalError::Unresolved("matrix".into()))?;
                    let rows = w
                        .iter()
                        .enumerate()
                        .map(|(i, r)| {
                            IVal::Arr(r.iter().enumerate().map(|(j, x)| IVal::V(Value::Scalar((self.present[i] && self.present[j]).then_some(*x)))).collect())
                        })
                        .collect();
                    self.vars.insert(m.clone(), IVal::Arr(rows));
                }
            }
            ExtCall::LoadParams => {
                for n in names {
                    let v = *b.params.get(n).ok_or_else(|| EvalError::Unresolved(n.clone()))?;
                    self.vars.insert(n.clone(), IVal::V(Value::Scalar(Some(v))));
                }
            }
            ExtCall::Init => {
                let o = self.objects.clone().ok_or_else(|| EvalError::Unresolved("objects".into()))?;
                let IVal::Arr(objs) = &self.vars[&o] else { unreachable!() };
                let m = b.medoids.iter().map(|&i| objs[i].clone()).collect();
                self.vars.insert(names[0].clone(), IVal::Arr(m));
            }
        }
        Ok(())
    }

    fn int(&mut self, e: &Expr) -> Result<i64, EvalError> {
        match self.eval(e)? {
            Value::Scalar(Some(x)) if x.fract() == 0.0 => Ok(x as i64),
            v => Err(terr(format!("expected an integer, found {v}"))),
        }
    }

    fn rhs(&mut self, e: &Expr) -> Result<IVal, EvalError> {
        match &e.kind {
            ExprKind::ArrayInit(n) => {
                let n = self.int(n)?;
                Ok(IVal::Arr(vec![IVal::Unset; n as usize]))
            }
            ExprKind::BreakTies(axis, a) => {
                let src = self.array(a)?;
                let b = |v: &IVal| -> Result<bool, EvalError> { Ok(v.value().ok_or_else(|| terr("unset element"))?.as_bool()?) };
                let mut out = src.clone();
                match axis {
                    TieAxis::Flat => {
                        let IVal::Arr(v) = &mut out else { return Err(terr("breakTies needs an array")) };
                        let mut seen = false;
                        for x in v.iter_mut() {
                            let t = b(x)?;
                            *x = IVal::V(Value::Bool(t && !seen));
                            seen |= t;
                        }
                    }
                    TieAxis::One | TieAxis::Two => {
                        let IVal::Arr(rows) = &src else { return Err(terr("breakTies needs an array")) };
                        let nr = rows.len();
                        let nc = match rows.first() {
                            Some(IVal::Arr(r)) => r.len(),
                            _ => 0,
                        };
                        let mut grid = vec![vec![false; nc]; nr];
                        for (i, g) in grid.iter_mut().enumerate() {
                            for (l, c) in g.iter_mut().enumerate() {
                                *c = b(src.at(&[i, l]).ok_or_else(|| terr("ragged array"))?)?;
                            }
                        }
                        let mut res = grid.clone();
                        if *axis == TieAxis::One {
                            for row in res.iter_mut() {
                                let mut seen = false;
                                for c in row.iter_mut() {
                                    let t = *c;
                                    *c = t && !seen;
                                    seen |= t;
                                }
                            }
                        } else {
                            for l in 0..nc {
                                let mut seen = false;
                                for row in res.iter_mut() {
                                    let t = row[l];
                                    row[l] = t && !seen;
                                    seen |= t;
                                }
                            }
                        }
                        out = IVal::Arr(res.into_iter().map(|r| IVal::Arr(r.into_iter().map(|x| IVal::V(Value::Bool(x))).collect())).collect());
                    }
                }
                Ok(out)
            }
            ExprKind::Name(n) if !self.counters.contains_key(n) && matches!(self.vars.get(n), Some(IVal::Arr(_))) => Ok(self.vars[n].clone()),
            _ => Ok(IVal::V(self.eval(e)?)),
        }
    }

    fn array(&mut self, e: &Expr) -> Result<IVal, EvalError> {
        match &e.kind {
            ExprKind::Name(n) => self.vars.get(n).cloned().ok_or_else(|| EvalError::Unresolved(n.clone())),
            _ => Err(terr("expected a named array")),
        }
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, EvalError> {
        Ok(match &e.kind {
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Int(n) => Value::Scalar(Some(*n as f64)),
            ExprKind::Float(x) => Value::Scalar(Some(*x)),
            ExprKind::Name(n) if self.counters.contains_key(n) => Value::Scalar(Some(self.counters[n] as f64)),
            ExprKind::Name(_) | ExprKind::Index(..) => {
                let (name, idx) = e.as_index_chain().unwrap();
                let idx = idx.into_iter().map(|i| self.int(i).map(|x| x as usize)).collect::<Result<Vec<_>, _>>()?;
                let v = self.vars.get(name).ok_or_else(|| EvalError::Unresolved(name.to_string()))?;
                match v.at(&idx) {
                    Some(IVal::V(v)) => v.clone(),
                    _ => return Err(terr(format!("`{name}` element is not a value"))),
                }
            }
            ExprKind::ArrayInit(_) | ExprKind::BreakTies(..) => return Err(terr("array expression in value position")),
            ExprKind::Cmp(op, a, b) => {
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                Value::Bool(a.compare(*op, &b)?)
            }
            ExprKind::Add(a, b) => {
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                match (&a, &b) {
                    (Value::Bool(x), Value::Bool(y)) => Value::Bool(*x || *y),
                    _ => a.add(&b)?,
                }
            }
            ExprKind::Mul(a, b) | ExprKind::ScalarMult(a, b) => {
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                match (&a, &b) {
                    (Value::Bool(x), Value::Bool(y)) => Value::Bool(*x && *y),
                    _ => a.mul(&b)?,
                }
            }
            ExprKind::Pow(a, n) => {
                let n = self.int(n)?;
                self.eval(a)?.pow(n as i32)?
            }
            ExprKind::Invert(a) => self.eval(a)?.inv()?,
            ExprKind::Dist(a, b) => {
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                a.dist(&b)?
            }
            ExprKind::Reduce(op, c) => self.reduce(*op, c)?,
        })
    }

    fn reduce(&mut self, op: ReduceOp, c: &Comprehension) -> Result<Value, EvalError> {
        let (lo, hi) = (self.int(&c.lo)?, self.int(&c.hi)?);
        let saved = self.counters.get(&c.var).copied();
        let mut acc: Option<Value> = None;
        let mut flag = op == ReduceOp::And;
        for i in lo..hi {
            self.counters.insert(c.var.clone(), i);
            let cond = match &c.cond {
                Some(k) => self.eval(k)?.as_bool()?,
                None => true,
            };
            let body = if op == ReduceOp::Count { Value::Scalar(Some(1.0)) } else { self.eval(&c.body)? };
            let term = match op {
                ReduceOp::And => {
                    flag &= !cond || body.as_bool()?;
                    continue;
                }
                ReduceOp::Or => {
                    flag |= cond && body.as_bool()?;
                    continue;
                }
                ReduceOp::Sum | ReduceOp::Count => {
                    if cond {
                        body
                    } else {
                        Value::undef(body.ty())
                    }
                }
                ReduceOp::Mult => {
                    if cond {
                        body
                    } else {
                        Value::Scalar(Some(1.0))
                    }
                }
            };
            acc = Some(match acc {
                None => term,
                Some(a) if op == ReduceOp::Mult => a.mul(&term)?,
                Some(a) => a.add(&term)?,
            });
        }
        match saved {
            Some(s) => self.counters.insert(c.var.clone(), s),
            None => self.counters.remove(&c.var),
        };
        Ok(match op {
            ReduceOp::And | ReduceOp::Or => Value::Bool(flag),
            _ => acc.unwrap_or(Value::undef(Ty::Scalar)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_user_program;

    #[test]
    fn versions_program_yields_seventeen() {
        let p = parse_user_program(include_str!("../../../programs/versions.py")).unwrap();
        let out = interpret(&p, &Bindings::default(), &[]).unwrap();
        assert_eq!(out["M"], IVal::V(Value::Scalar(Some(17.0))));
    }

    #[test]
    fn break_ties_keeps_first_true_per_column() {
        let src = "X = [None] * 2\nfor i in range(0,2):\n  X[i] = [None] * 2\n  for l in range(0,2):\n    X[i][l] = True\nY = breakTies2(X)\nZ = breakTies1(X)\n";
        let p = parse_user_program(src).unwrap();
        let out = interpret(&p, &Bindings::default(), &[]).unwrap();
        let t = |x: bool| IVal::V(Value::Bool(x));
        assert_eq!(out["Y"], IVal::Arr(vec![IVal::Arr(vec![t(true), t(true)]), IVal::Arr(vec![t(false), t(false)])]));
        assert_eq!(out["Z"], IVal::Arr(vec![IVal::Arr(vec![t(true), t(false)]), IVal::Arr(vec![t(true), t(false)])]));
    }

    #[test]
    fn empty_sum_is_undefined() {
        let p = parse_user_program("S = reduce_sum([1 for i in range(0, 3) if i >= 5])\n").unwrap();
        let out = interpret(&p, &Bindings::default(), &[]).unwrap();
        assert_eq!(out["S"], IVal::V(Value::Scalar(None)));
    }
}
