//! Event program -> flat list of grounded declarations.

use std::collections::HashMap;
use std::fmt;

use crate::eid::{EidPat, IExpr};
use crate::eprog::{EventProgram, FoldOp, Item, TExpr};
use crate::error::{GroundError, TypeError};
use crate::expr::{Decl, Expr, Names, VarTable};
use crate::value::{Ty, Value};

/// Where a grounded declaration came from, relative to the main loop of the program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    /// before the main loop
    Pre,
    /// `pos`-th declaration of iteration `iter`
    Body { iter: i64, pos: usize },
    /// after the main loop
    Post,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundedProgram {
    pub vars: VarTable,
    pub decls: Vec<Decl>,
    pub origins: Vec<Origin>,
    pub targets: Vec<usize>,
    /// counter name and range of the main loop, if any
    pub main_loop: Option<(String, i64, i64)>,
    /// position of the main loop among the top-level items
    pub main_item: Option<usize>,
    index: HashMap<String, usize>,
}

impl GroundedProgram {
    pub fn lookup(&self, eid: &str) -> Option<usize> {
        self.index.get(eid).copied()
    }

    /// Declaration indices whose EID matches the glob pattern, in declaration order.
    pub fn matching(&self, pattern: &str) -> Result<Vec<usize>, GroundError> {
        let pat = glob::Pattern::new(pattern).map_err(|_| GroundError::Pattern(pattern.to_string()))?;
        Ok((0..self.decls.len()).filter(|&i| pat.matches(&self.decls[i].eid)).collect())
    }

    /// Resolves target patterns. A wildcard pattern keeps only events; an exact name must be an event.
    pub fn select_targets(&mut self, patterns: &[String]) -> Result<(), GroundError> {
        let mut out: Vec<usize> = Vec::new();
        for p in patterns {
            let wild = p.contains(['*', '?', '[']);
            let hits = self.matching(p)?;
            if !wild {
                if let Some(&i) = hits.first() {
                    if self.decls[i].ty != Ty::Bool {
                        return Err(GroundError::NonBoolTarget(p.clone()));
                    }
                }
            }
            let hits: Vec<usize> = hits.into_iter().filter(|&i| self.decls[i].ty == Ty::Bool).collect();
            if hits.is_empty() {
                return Err(GroundError::NoTarget(p.clone()));
            }
            for h in hits {
                if !out.contains(&h) {
                    out.push(h);
                }
            }
        }
        self.targets = out;
        Ok(())
    }

    /// Appends a declaration built over existing ones (e.g. a co-occurrence event).
    pub fn push_decl(&mut self, eid: &str, expr: Expr) -> Result<usize, GroundError> {
        if self.index.contains_key(eid) {
            return Err(GroundError::Duplicate(eid.to_string()));
        }
        let ty = infer(&expr, &self.decls).map_err(|err| GroundError::Type { decl: eid.to_string(), err })?;
        self.decls.push(Decl { eid: eid.to_string(), ty, expr });
        self.origins.push(Origin::Post);
        self.index.insert(eid.to_string(), self.decls.len() - 1);
        Ok(self.decls.len() - 1)
    }

    /// Last family member by declaration order, e.g. the final version of `Centre`.
    pub fn last_family(&self, name: &str) -> Option<String> {
        self.decls.iter().rev().find_map(|d| {
            let (n, label, _) = crate::eid::split_eid(&d.eid)?;
            (n == name).then(|| crate::eid::eid_string(&n, &label, &[]))
        })
    }
}

impl Names for GroundedProgram {
    fn var(&self, i: usize) -> String {
        self.vars.name(i).to_string()
    }
    fn decl(&self, i: usize) -> String {
        self.decls[i].eid.clone()
    }
}

impl fmt::Display for GroundedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.decls {
            writeln!(f, "{} := {}", d.eid, d.expr.display(self))?;
        }
        Ok(())
    }
}

/// Type of a grounded expression given already-typed declarations.
pub fn infer(e: &Expr, decls: &[Decl]) -> Result<Ty, TypeError> {
    let num = |t: Ty| -> Result<Ty, TypeError> {
        if t == Ty::Bool {
            Err(TypeError::new("expected a numeric operand"))
        } else {
            Ok(t)
        }
    };
    let boolean = |t: Ty| -> Result<(), TypeError> {
        if t != Ty::Bool {
            Err(TypeError::new("expected an event operand"))
        } else {
            Ok(())
        }
    };
    Ok(match e {
        Expr::Bool(_) | Expr::Var(_) => Ty::Bool,
        Expr::Ref(i) => decls.get(*i).map(|d| d.ty).ok_or_else(|| TypeError::new("dangling reference"))?,
        Expr::Num(v) => v.ty(),
        Expr::Not(a) => {
            boolean(infer(a, decls)?)?;
            Ty::Bool
        }
        Expr::And(v) | Expr::Or(v) => {
            for c in v {
                boolean(infer(c, decls)?)?;
            }
            Ty::Bool
        }
        Expr::Atom(_, a, b) => {
            let (ta, tb) = (num(infer(a, decls)?)?, num(infer(b, decls)?)?);
            if ta != tb {
                return Err(TypeError::new("comparison of scalar with vector"));
            }
            Ty::Bool
        }
        Expr::Guard(g, v) => {
            boolean(infer(g, decls)?)?;
            num(infer(v, decls)?)?
        }
        Expr::Sum(v) => {
            let mut ty = None;
            for c in v {
                let t = num(infer(c, decls)?)?;
                if ty.is_some_and(|x| x != t) {
                    return Err(TypeError::new("sum mixes scalars and vectors"));
                }
                ty = Some(t);
            }
            ty.unwrap_or(Ty::Scalar)
        }
        Expr::Prod(v) => {
            let mut ty: Option<Ty> = None;
            for c in v {
                let t = num(infer(c, decls)?)?;
                ty = Some(match (ty, t) {
                    (None, t) => t,
                    (Some(Ty::Vector), Ty::Vector) => Ty::Scalar,
                    (Some(Ty::Scalar), t) => t,
                    (Some(_), _) => Ty::Vector,
                });
            }
            ty.unwrap_or(Ty::Scalar)
        }
        Expr::Inv(a) | Expr::Pow(a, _) => {
            if num(infer(a, decls)?)? != Ty::Scalar {
                return Err(TypeError::new("inverse and power need scalars"));
            }
            Ty::Scalar
        }
        Expr::Dist(a, b) => {
            if infer(a, decls)? != Ty::Vector || infer(b, decls)? != Ty::Vector {
                return Err(TypeError::new("dist needs vectors"));
            }
            Ty::Scalar
        }
    })
}

struct Gr<'a> {
    vars: &'a VarTable,
    decls: Vec<Decl>,
    index: HashMap<String, usize>,
    env: HashMap<String, i64>,
    /// per declaration: iteration of the top-level loop it was grounded in, and that loop's item index
    iter_of: Vec<Option<(usize, i64)>>,
}

/// Instantiates every declaration for every counter tuple, in program order.
pub fn ground(p: &EventProgram, vars: &VarTable) -> Result<GroundedProgram, GroundError> {
    let mut g = Gr { vars, decls: Vec::new(), index: HashMap::new(), env: HashMap::new(), iter_of: Vec::new() };
    let mut loop_sizes: Vec<(usize, usize)> = Vec::new();
    for (k, it) in p.items.iter().enumerate() {
        let before = g.decls.len();
        g.item(it, Some(k), None)?;
        if matches!(it, Item::Forall(_)) {
            loop_sizes.push((k, g.decls.len() - before));
        }
    }
    // main loop: the top-level loop with the most declarations (first on ties)
    let main = loop_sizes.iter().filter(|(_, n)| *n > 0).fold(None::<(usize, usize)>, |best, &(k, n)| match best {
        Some((_, bn)) if bn >= n => best,
        _ => Some((k, n)),
    });
    let mut origins = Vec::with_capacity(g.decls.len());
    let mut main_loop = None;
    let mut seen_main = false;
    let mut pos_in_iter: HashMap<i64, usize> = HashMap::new();
    for io in &g.iter_of {
        let o = match (main, io) {
            (Some((mk, _)), Some((k, t))) if *k == mk => {
                seen_main = true;
                let pos = pos_in_iter.entry(*t).or_default();
                *pos += 1;
                Origin::Body { iter: *t, pos: *pos - 1 }
            }
            _ if seen_main => Origin::Post,
            _ => Origin::Pre,
        };
        origins.push(o);
    }
    if let Some((mk, _)) = main {
        if let Item::Forall(f) = &p.items[mk] {
            let env = HashMap::new();
            let lo = f.lo.eval(&env).map_err(|msg| GroundError::Index { decl: format!("forall {}", f.var), msg })?;
            let hi = f.hi.eval(&env).map_err(|msg| GroundError::Index { decl: format!("forall {}", f.var), msg })?;
            main_loop = Some((f.var.clone(), lo, hi));
        }
    }
    Ok(GroundedProgram { vars: vars.clone(), decls: g.decls, origins, targets: Vec::new(), main_loop, main_item: main.map(|(k, _)| k), index: g.index })
}

impl Gr<'_> {
    fn item(&mut self, it: &Item, top: Option<usize>, iter: Option<(usize, i64)>) -> Result<(), GroundError> {
        match it {
            Item::Decl(d) => {
                let eid = d.lhs.ground(&self.env).map_err(|msg| GroundError::Index { decl: d.lhs.to_string(), msg })?;
                if self.index.contains_key(&eid) {
                    return Err(GroundError::Duplicate(eid));
                }
                let (expr, ty) = self.expr(&d.rhs, &eid)?;
                self.index.insert(eid.clone(), self.decls.len());
                self.decls.push(Decl { eid, ty, expr });
                self.iter_of.push(iter);
            }
            Item::Forall(f) => {
                let ctx = || format!("forall {}", f.var);
                let lo = f.lo.eval(&self.env).map_err(|msg| GroundError::Index { decl: ctx(), msg })?;
                let hi = f.hi.eval(&self.env).map_err(|msg| GroundError::Index { decl: ctx(), msg })?;
                let saved = self.env.get(&f.var).copied();
                for v in lo..hi {
                    self.env.insert(f.var.clone(), v);
                    let it_tag = match top {
                        Some(k) => Some((k, v)),
                        None => iter,
                    };
                    for b in &f.body {
                        self.item(b, None, it_tag)?;
                    }
                }
                match saved {
                    Some(s) => self.env.insert(f.var.clone(), s),
                    None => self.env.remove(&f.var),
                };
            }
        }
        Ok(())
    }

    fn ty_err(decl: &str, msg: impl Into<String>) -> GroundError {
        GroundError::Type { decl: decl.to_string(), err: TypeError::new(msg) }
    }

    fn expr(&mut self, e: &TExpr, decl: &str) -> Result<(Expr, Ty), GroundError> {
        let idx = |ie: &IExpr, env: &HashMap<String, i64>| ie.eval(env).map_err(|msg| GroundError::Index { decl: decl.to_string(), msg });
        Ok(match e {
            TExpr::Bool(b) => (Expr::Bool(*b), Ty::Bool),
            TExpr::Num(x) => (Expr::scalar(*x), Ty::Scalar),
            TExpr::VecLit(v) => (Expr::vector(v.clone()), Ty::Vector),
            TExpr::Undef(ty) => (Expr::Num(Value::undef(*ty)), *ty),
            TExpr::Name(p) => self.name(p, decl)?,
            TExpr::Not(a) => {
                let a = self.event(a, decl)?;
                (Expr::not(a), Ty::Bool)
            }
            TExpr::And(v) => {
                let mut xs = Vec::with_capacity(v.len());
                for c in v {
                    xs.push(self.expr(c, decl)?);
                }
                match xs.last() {
                    Some((_, t)) if *t != Ty::Bool => {
                        let (val, ty) = xs.pop().unwrap();
                        let mut gs = Vec::with_capacity(xs.len());
                        for (x, t) in xs {
                            if t != Ty::Bool {
                                return Err(Self::ty_err(decl, "only the last operand of `&` may be numeric"));
                            }
                            gs.push(x);
                        }
                        let g = if gs.len() == 1 { gs.pop().unwrap() } else { Expr::And(gs) };
                        (Expr::guard(g, val), ty)
                    }
                    _ => (Expr::And(xs.into_iter().map(|(x, _)| x).collect()), Ty::Bool),
                }
            }
            TExpr::Or(v) => {
                let xs = v.iter().map(|c| self.event(c, decl)).collect::<Result<Vec<_>, _>>()?;
                (Expr::Or(xs), Ty::Bool)
            }
            TExpr::Add(v) | TExpr::Mul(v) => {
                let xs = v.iter().map(|c| self.expr(c, decl).map(|(x, _)| x)).collect::<Result<Vec<_>, _>>()?;
                let x = if matches!(e, TExpr::Add(_)) { Expr::Sum(xs) } else { Expr::Prod(xs) };
                let ty = self.infer(&x, decl)?;
                (x, ty)
            }
            TExpr::Guard(g, v) => {
                let g = self.event(g, decl)?;
                let (v, _) = self.expr(v, decl)?;
                let x = Expr::guard(g, v);
                let ty = self.infer(&x, decl)?;
                (x, ty)
            }
            TExpr::Atom(op, a, b) => {
                let x = Expr::atom(*op, self.expr(a, decl)?.0, self.expr(b, decl)?.0);
                self.infer(&x, decl)?;
                (x, Ty::Bool)
            }
            TExpr::Inv(a) => {
                let x = Expr::Inv(Box::new(self.expr(a, decl)?.0));
                (x.clone(), self.infer(&x, decl)?)
            }
            TExpr::Pow(a, n) => {
                let n = idx(n, &self.env)?;
                let n = i32::try_from(n).map_err(|_| GroundError::Index { decl: decl.to_string(), msg: format!("exponent {n} out of range") })?;
                let x = Expr::Pow(Box::new(self.expr(a, decl)?.0), n);
                (x.clone(), self.infer(&x, decl)?)
            }
            TExpr::Dist(a, b) => {
                let x = Expr::dist(self.expr(a, decl)?.0, self.expr(b, decl)?.0);
                (x.clone(), self.infer(&x, decl)?)
            }
            TExpr::Fold { op, var, lo, hi, body } => {
                let lo = idx(lo, &self.env)?;
                let hi = idx(hi, &self.env)?;
                let saved = self.env.get(var).copied();
                let mut xs = Vec::new();
                let mut res = Ok(());
                for v in lo..hi {
                    self.env.insert(var.clone(), v);
                    match self.expr(body, decl) {
                        Ok((x, _)) => xs.push(x),
                        Err(e) => {
                            res = Err(e);
                            break;
                        }
                    }
                }
                match saved {
                    Some(s) => self.env.insert(var.clone(), s),
                    None => self.env.remove(var),
                };
                res?;
                let x = match op {
                    FoldOp::And => Expr::And(xs),
                    FoldOp::Or => Expr::Or(xs),
                    FoldOp::Sum => Expr::Sum(xs),
                    FoldOp::Prod => Expr::Prod(xs),
                };
                let ty = self.infer(&x, decl)?;
                (x, ty)
            }
        })
    }

    fn infer(&self, x: &Expr, decl: &str) -> Result<Ty, GroundError> {
        infer(x, &self.decls).map_err(|err| GroundError::Type { decl: decl.to_string(), err })
    }

    fn event(&mut self, e: &TExpr, decl: &str) -> Result<Expr, GroundError> {
        let (x, t) = self.expr(e, decl)?;
        if t != Ty::Bool {
            return Err(Self::ty_err(decl, format!("expected an event, found a {t} value")));
        }
        Ok(x)
    }

    fn name(&self, p: &EidPat, decl: &str) -> Result<(Expr, Ty), GroundError> {
        if p.is_plain() {
            if let Some(v) = self.env.get(&p.name) {
                return Ok((Expr::scalar(*v as f64), Ty::Scalar));
            }
        }
        let eid = p.ground(&self.env).map_err(|msg| GroundError::Index { decl: decl.to_string(), msg })?;
        if let Some(&i) = self.index.get(&eid) {
            return Ok((Expr::Ref(i), self.decls[i].ty));
        }
        if p.is_plain() {
            if let Some(i) = self.vars.lookup(&p.name) {
                return Ok((Expr::Var(i), Ty::Bool));
            }
        }
        Err(GroundError::Unresolved { name: eid, decl: decl.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eprog::parse_event_program;
    use crate::expr::{eval_all, Valuation};

    fn vt(n: usize) -> VarTable {
        VarTable::from_pairs((0..n).map(|i| (format!("x{i}"), 0.5))).unwrap()
    }

    #[test]
    fn loops_instantiate_per_counter() {
        let p = parse_event_program("forall i in 0..2:\n  D^{i} := x0 & x1\n").unwrap();
        let g = ground(&p, &vt(2)).unwrap();
        let eids: Vec<_> = g.decls.iter().map(|d| d.eid.as_str()).collect();
        assert_eq!(eids, ["D^{0}", "D^{1}"]);
    }

    #[test]
    fn duplicate_declaration_rejected() {
        let p = parse_event_program("M_{0} := 1.0\nM_{0} := 2.0\n").unwrap();
        assert_eq!(ground(&p, &vt(0)).unwrap_err(), GroundError::Duplicate("M_{0}".into()));
    }

    #[test]
    fn unresolved_reference_rejected() {
        let p = parse_event_program("A := B & x0\n").unwrap();
        assert!(matches!(ground(&p, &vt(1)).unwrap_err(), GroundError::Unresolved { .. }));
    }

    #[test]
    fn numeric_conjunct_becomes_guard() {
        let p = parse_event_program("S := x0 & x1 & 2.0\n").unwrap();
        let g = ground(&p, &vt(2)).unwrap();
        assert_eq!(g.decls[0].ty, Ty::Scalar);
        assert!(matches!(g.decls[0].expr, Expr::Guard(..)));
    }

    #[test]
    fn versioned_program_evaluates_to_seventeen() {
        let txt = "M_{0} := 7.0\nM_{1} := M_{0} + 2.0\nM_{1.-1} := M_{1}\nforall i in 0..2:\n  M_{1.(2*i)} := M_{1.(2*i-1)} + i\n  M_{1.(2*i).-1} := M_{1.(2*i)}\n  forall j in 0..3:\n    M_{1.(2*i).j} := M_{1.(2*i).(j-1)} + 1.0\n  M_{1.(2*i+1)} := M_{1.(2*i).2}\nM_{2} := M_{1.3}\nM_{3} := M_{2} + 1.0\n";
        let g = ground(&parse_event_program(txt).unwrap(), &vt(0)).unwrap();
        let vals = eval_all(&g.decls, &Valuation(vec![])).unwrap();
        let last = g.lookup("M_{3}").unwrap();
        assert_eq!(vals[last], Value::Scalar(Some(17.0)));
        assert_eq!(g.origins[0], Origin::Pre);
        assert_eq!(g.origins[3], Origin::Body { iter: 0, pos: 0 });
        assert_eq!(*g.origins.last().unwrap(), Origin::Post);
    }

    #[test]
    fn grounded_text_round_trips() {
        let txt = "forall i in 0..3:\n  A^{i} := x0 | !x1 & x2\n  S^{i} := A^{i} @ vec(1.0, 2.0) + x1 @ vec(0.5, 0.0)\n  C^{i} := [dist(S^{i}, vec(0.0, 0.0)) <= 2.0]\nT := and(k in 0..3: C^{k}) | or()\n";
        let g = ground(&parse_event_program(txt).unwrap(), &vt(3)).unwrap();
        let printed = g.to_string();
        let g2 = ground(&parse_event_program(&printed).unwrap(), &vt(3)).unwrap();
        assert_eq!(g.decls, g2.decls);
    }

    #[test]
    fn target_selection() {
        let p = parse_event_program("forall i in 0..2:\n  E^{i} := x0\n  V^{i} := x0 @ 1.0\n").unwrap();
        let mut g = ground(&p, &vt(1)).unwrap();
        g.select_targets(&["*".into()]).unwrap();
        assert_eq!(g.targets.len(), 2);
        assert_eq!(g.select_targets(&["V^{0}".into()]).unwrap_err(), GroundError::NonBoolTarget("V^{0}".into()));
        assert_eq!(g.select_targets(&["Q*".into()]).unwrap_err(), GroundError::NoTarget("Q*".into()));
    }
}
