//! User program -> event program.
//!
//! Every whole-variable assignment yields a fresh versioned identifier `X_{c1.c2...}`; array
//! elements become `X_{label}^{i,j}`; reduce calls become folds.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::eid::{EidPat, IExpr, Lin};
use crate::eprog::{EventProgram, FoldOp, Forall, Item, TDecl, TExpr};
use crate::error::{Pos, TranslateError};
use crate::lang::{constant_names, visit_expr, Comprehension, ExprKind, ExtCall, ReduceOp, Stmt, TieAxis, UserProgram};
use crate::lang::Expr as UExpr;
use crate::value::Ty;

/// Family name of the per-object events emitted by `loadData()`.
pub const PHI: &str = "Phi";

/// One input object: its lineage event and feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PointBinding {
    pub event: TExpr,
    pub coords: Vec<f64>,
}

/// Values supplied for the external calls.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bindings {
    pub points: Vec<PointBinding>,
    pub params: BTreeMap<String, f64>,
    /// Initial representative object per cluster, used by `init()`.
    pub medoids: Vec<usize>,
    /// Edge weights for a three-way `loadData()`.
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug)]
struct VarState {
    exists: bool,
    shape: Vec<usize>,
    ty: Option<Ty>,
}

#[derive(Clone, Debug)]
struct FrameVar {
    prefix: Vec<Lin>,
    c: i64,
    j: i64,
}

#[derive(Debug)]
struct Frame {
    var: String,
    lo: i64,
    vars: HashMap<String, FrameVar>,
}

struct Tr<'a> {
    b: &'a Bindings,
    consts: HashMap<String, f64>,
    immutable: HashSet<String>,
    top_count: HashMap<String, i64>,
    frames: Vec<Frame>,
    state: HashMap<String, VarState>,
    /// loop counters and comprehension variables in scope
    counters: Vec<String>,
    used_names: HashSet<String>,
    out: Vec<Vec<Item>>,
    objects: Option<String>,
}

fn err<T>(pos: Pos, msg: impl Into<String>) -> Result<T, TranslateError> {
    Err(TranslateError::At { pos, msg: msg.into() })
}

/// Number of whole-variable assignments per variable in `body`; a nested loop counts once.
fn assign_counts(body: &[Stmt]) -> Vec<(String, i64)> {
    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, i64> = HashMap::new();
    let mut bump = |n: &str, order: &mut Vec<String>| {
        if !counts.contains_key(n) {
            order.push(n.to_string());
        }
        *counts.entry(n.to_string()).or_default() += 1;
    };
    for s in body {
        match s {
            Stmt::Assign { name, indices, .. } if indices.is_empty() => bump(name, &mut order),
            Stmt::Assign { .. } => {}
            Stmt::External { names, .. } => names.iter().for_each(|n| bump(n, &mut order)),
            Stmt::For { body, .. } => {
                for (n, _) in assign_counts(body) {
                    bump(&n, &mut order);
                }
            }
        }
    }
    order.into_iter().map(|n| {
        let c = counts[&n];
        (n, c)
    }).collect()
}

fn total_assignments(v: &[Stmt], top: bool, out: &mut HashMap<String, (usize, bool)>) {
    for s in v {
        let mut note = |n: &str| {
            let e = out.entry(n.to_string()).or_insert((0, true));
            e.0 += 1;
            e.1 &= top;
        };
        match s {
            Stmt::Assign { name, indices, .. } if indices.is_empty() => note(name),
            Stmt::Assign { .. } => {}
            Stmt::External { names, .. } => names.iter().for_each(|n| note(n)),
            Stmt::For { body, .. } => total_assignments(body, false, out),
        }
    }
}

fn collect_names(v: &[Stmt], out: &mut HashSet<String>) {
    let add_expr = |e: &UExpr, out: &mut HashSet<String>| {
        visit_expr(e, &mut |x| match &x.kind {
            ExprKind::Name(n) => {
                out.insert(n.clone());
            }
            ExprKind::Reduce(_, c) => {
                out.insert(c.var.clone());
            }
            _ => {}
        })
    };
    for s in v {
        match s {
            Stmt::Assign { name, indices, value, .. } => {
                out.insert(name.clone());
                indices.iter().for_each(|i| add_expr(i, out));
                add_expr(value, out);
            }
            Stmt::External { names, .. } => out.extend(names.iter().cloned()),
            Stmt::For { var, lo, hi, body, .. } => {
                out.insert(var.clone());
                add_expr(lo, out);
                add_expr(hi, out);
                collect_names(body, out);
            }
        }
    }
}

/// Translates a validated program; `b` supplies the external data.
pub fn translate_to_event_program(p: &UserProgram, b: &Bindings) -> Result<EventProgram, TranslateError> {
    let mut totals = HashMap::new();
    total_assignments(&p.items, true, &mut totals);
    let immutable = totals.iter().filter(|(_, (c, top))| *c == 1 && *top).map(|(n, _)| n.clone()).collect();
    let mut used_names = HashSet::new();
    collect_names(&p.items, &mut used_names);
    used_names.insert(PHI.to_string());
    let mut tr = Tr {
        b,
        consts: HashMap::new(),
        immutable,
        top_count: HashMap::new(),
        frames: Vec::new(),
        state: HashMap::new(),
        counters: Vec::new(),
        used_names,
        out: vec![Vec::new()],
        objects: None,
    };
    let const_names = constant_names(p);
    for s in &p.items {
        match s {
            Stmt::Assign { name, indices, value, .. } if indices.is_empty() && const_names.contains(name) => {
                if let ExprKind::Int(n) = value.kind {
                    tr.consts.insert(name.clone(), n as f64);
                }
            }
            _ => {}
        }
    }
    tr.stmts(&p.items)?;
    Ok(EventProgram { items: tr.out.pop().unwrap() })
}

impl Tr<'_> {
    fn emit(&mut self, it: Item) {
        self.out.last_mut().unwrap().push(it);
    }

    fn fresh(&mut self, base: &str) -> String {
        let mut k = 0;
        loop {
            let cand = format!("{base}{k}");
            if !self.used_names.contains(&cand) {
                self.used_names.insert(cand.clone());
                return cand;
            }
            k += 1;
        }
    }

    fn release(&mut self, name: &str) {
        self.used_names.remove(name);
    }

    fn frame_of(&self, x: &str) -> Option<usize> {
        self.frames.iter().rposition(|f| f.vars.contains_key(x))
    }

    fn label_at(&self, fi: usize, x: &str, offset: i64) -> Vec<Lin> {
        let f = &self.frames[fi];
        let fv = &f.vars[x];
        let mut l = fv.prefix.clone();
        l.push(Lin::var(&f.var).plus(-f.lo).scale(fv.c).plus(fv.j + offset));
        l
    }

    /// Label of the current version of `x`.
    fn current_label(&self, x: &str) -> Vec<Lin> {
        if self.immutable.contains(x) {
            return vec![];
        }
        match self.frame_of(x) {
            Some(fi) => self.label_at(fi, x, -1),
            None => vec![Lin::konst(self.top_count.get(x).copied().unwrap_or(0) - 1)],
        }
    }

    /// Allocates the label of the next version of `x` at the current nesting level.
    fn next_label(&mut self, x: &str) -> Vec<Lin> {
        if self.immutable.contains(x) {
            return vec![];
        }
        match self.frame_of(x) {
            Some(fi) => {
                let l = self.label_at(fi, x, 0);
                self.frames[fi].vars.get_mut(x).unwrap().j += 1;
                l
            }
            None => {
                let c = self.top_count.entry(x.to_string()).or_default();
                let l = vec![Lin::konst(*c)];
                *c += 1;
                l
            }
        }
    }

    fn pat(name: &str, label: &[Lin], index: Vec<IExpr>) -> EidPat {
        EidPat { name: name.to_string(), label: label.iter().map(Lin::to_iexpr).collect(), index }
    }

    fn decl(&mut self, lhs: EidPat, rhs: TExpr) {
        self.emit(Item::Decl(TDecl { lhs, rhs }));
    }

    /// `dst^{a,b,..} := src^{a,b,..}` over the whole shape.
    fn copy_array(&mut self, dst: EidPat, src: EidPat, shape: &[usize]) {
        let vars: Vec<String> = (0..shape.len()).map(|_| self.fresh("cp")).collect();
        let idx: Vec<IExpr> = vars.iter().map(|v| IExpr::var(v)).collect();
        let mut d = dst;
        let mut s = src;
        d.index.extend(idx.iter().cloned());
        s.index.extend(idx);
        let mut item = Item::Decl(TDecl { lhs: d, rhs: TExpr::Name(s) });
        for (v, n) in vars.iter().zip(shape).rev() {
            item = Item::Forall(Forall { var: v.clone(), lo: IExpr::Int(0), hi: IExpr::Int(*n as i64), body: vec![item] });
        }
        self.emit(item);
        for v in vars {
            self.release(&v);
        }
    }

    fn const_int(&self, e: &UExpr) -> Result<i64, TranslateError> {
        let v = match &e.kind {
            ExprKind::Int(n) => *n as f64,
            ExprKind::Name(n) => match self.consts.get(n) {
                Some(v) => *v,
                None => return err(e.pos, format!("`{n}` is not a compile-time constant")),
            },
            ExprKind::Add(a, b) => (self.const_int(a)? + self.const_int(b)?) as f64,
            ExprKind::Mul(a, b) => (self.const_int(a)? * self.const_int(b)?) as f64,
            _ => return err(e.pos, "expected a constant integer expression"),
        };
        if v.fract() != 0.0 {
            return err(e.pos, format!("constant `{v}` is not an integer"));
        }
        Ok(v as i64)
    }

    fn index_expr(&self, e: &UExpr) -> Result<IExpr, TranslateError> {
        Ok(match &e.kind {
            ExprKind::Int(n) => IExpr::Int(*n),
            ExprKind::Name(n) if self.counters.contains(n) => IExpr::var(n),
            ExprKind::Name(_) => IExpr::Int(self.const_int(e)?),
            ExprKind::Add(a, b) => IExpr::Add(Box::new(self.index_expr(a)?), Box::new(self.index_expr(b)?)),
            ExprKind::Mul(a, b) => IExpr::Mul(Box::new(self.index_expr(a)?), Box::new(self.index_expr(b)?)),
            _ => return err(e.pos, "array indices must be loop counters, constants, or sums/products of them"),
        })
    }

    fn var_state(&self, n: &str, pos: Pos) -> Result<&VarState, TranslateError> {
        self.state.get(n).ok_or(TranslateError::At { pos, msg: format!("`{n}` is used before it is defined") })
    }

    fn expr(&mut self, e: &UExpr) -> Result<(TExpr, Ty), TranslateError> {
        let pos = e.pos;
        Ok(match &e.kind {
            ExprKind::Bool(b) => (TExpr::Bool(*b), Ty::Bool),
            ExprKind::Int(n) => (TExpr::Num(*n as f64), Ty::Scalar),
            ExprKind::Float(x) => (TExpr::Num(*x), Ty::Scalar),
            ExprKind::Name(n) if self.counters.contains(n) => (TExpr::Name(EidPat::plain(n)), Ty::Scalar),
            ExprKind::Name(_) | ExprKind::Index(..) => {
                let (name, idx) = e.as_index_chain().unwrap();
                let st = self.var_state(name, pos)?;
                if idx.len() != st.shape.len() {
                    return err(pos, format!("`{name}` has {} dimension(s) but is indexed with {}", st.shape.len(), idx.len()));
                }
                let ty = st.ty.ok_or(TranslateError::At { pos, msg: format!("`{name}` has no assigned elements") })?;
                let index = idx.iter().map(|i| self.index_expr(i)).collect::<Result<Vec<_>, _>>()?;
                let label = self.current_label(name);
                (TExpr::Name(Self::pat(name, &label, index)), ty)
            }
            ExprKind::ArrayInit(_) => return err(pos, "array initialisation must be assigned directly"),
            ExprKind::BreakTies(..) => return err(pos, "breakTies must be assigned directly"),
            ExprKind::Cmp(op, a, b) => {
                let (a, ta) = self.expr(a)?;
                let (b, tb) = self.expr(b)?;
                if ta == Ty::Bool || tb == Ty::Bool {
                    return err(pos, "comparisons need numeric operands");
                }
                (TExpr::atom(*op, a, b), Ty::Bool)
            }
            ExprKind::Add(a, b) => {
                let (a, ta) = self.expr(a)?;
                let (b, tb) = self.expr(b)?;
                match (ta, tb) {
                    (Ty::Bool, Ty::Bool) => (TExpr::Or(vec![a, b]), Ty::Bool),
                    (Ty::Scalar, Ty::Scalar) | (Ty::Vector, Ty::Vector) => (TExpr::Add(vec![a, b]), ta),
                    _ => return err(pos, format!("cannot add {ta} and {tb}")),
                }
            }
            ExprKind::Mul(a, b) | ExprKind::ScalarMult(a, b) => {
                let (a, ta) = self.expr(a)?;
                let (b, tb) = self.expr(b)?;
                let ty = match (ta, tb) {
                    (Ty::Bool, Ty::Bool) => return Ok((TExpr::And(vec![a, b]), Ty::Bool)),
                    (Ty::Scalar, Ty::Scalar) | (Ty::Vector, Ty::Vector) => Ty::Scalar,
                    (Ty::Scalar, Ty::Vector) | (Ty::Vector, Ty::Scalar) => Ty::Vector,
                    _ => return err(pos, format!("cannot multiply {ta} and {tb}")),
                };
                (TExpr::Mul(vec![a, b]), ty)
            }
            ExprKind::Pow(a, n) => {
                let (a, ta) = self.expr(a)?;
                if ta != Ty::Scalar {
                    return err(pos, "pow needs a scalar base");
                }
                (TExpr::Pow(Box::new(a), self.index_expr(n)?), Ty::Scalar)
            }
            ExprKind::Invert(a) => {
                let (a, ta) = self.expr(a)?;
                if ta != Ty::Scalar {
                    return err(pos, "invert needs a scalar");
                }
                (TExpr::Inv(Box::new(a)), Ty::Scalar)
            }
            ExprKind::Dist(a, b) => {
                let (a, ta) = self.expr(a)?;
                let (b, tb) = self.expr(b)?;
                if ta != Ty::Vector || tb != Ty::Vector {
                    return err(pos, "dist needs two vectors");
                }
                (TExpr::dist(a, b), Ty::Scalar)
            }
            ExprKind::Reduce(op, c) => self.reduce(*op, c, pos)?,
        })
    }

    fn reduce(&mut self, op: ReduceOp, c: &Comprehension, pos: Pos) -> Result<(TExpr, Ty), TranslateError> {
        let lo = self.const_int(&c.lo)?;
        let hi = self.const_int(&c.hi)?;
        self.counters.push(c.var.clone());
        let res = (|| {
            let cond = match &c.cond {
                Some(k) => {
                    let (k, tk) = self.expr(k)?;
                    if tk != Ty::Bool {
                        return err(pos, "comprehension filter must be Boolean");
                    }
                    Some(k)
                }
                None => None,
            };
            let (body, tb) = if op == ReduceOp::Count { (TExpr::Num(1.0), Ty::Scalar) } else { self.expr(&c.body)? };
            let (fop, term, ty) = match op {
                ReduceOp::And | ReduceOp::Or => {
                    if tb != Ty::Bool {
                        return err(pos, format!("{} needs Boolean elements", op.name()));
                    }
                    let t = match (op, cond) {
                        (_, None) => body,
                        (ReduceOp::And, Some(k)) => TExpr::Or(vec![TExpr::not(k), body]),
                        (_, Some(k)) => TExpr::And(vec![k, body]),
                    };
                    (if op == ReduceOp::And { FoldOp::And } else { FoldOp::Or }, t, Ty::Bool)
                }
                ReduceOp::Sum => {
                    if tb == Ty::Bool {
                        return err(pos, "reduce_sum needs numeric elements");
                    }
                    let t = match cond {
                        Some(k) => TExpr::And(vec![k, body]),
                        None => body,
                    };
                    (FoldOp::Sum, t, tb)
                }
                ReduceOp::Mult => {
                    if tb != Ty::Scalar {
                        return err(pos, "reduce_mult needs scalar elements");
                    }
                    let t = match cond {
                        Some(k) => TExpr::Add(vec![
                            TExpr::And(vec![k.clone(), body]),
                            TExpr::guard(TExpr::not(k), TExpr::Num(1.0)),
                        ]),
                        None => body,
                    };
                    (FoldOp::Prod, t, Ty::Scalar)
                }
                ReduceOp::Count => {
                    let t = TExpr::guard(cond.unwrap_or(TExpr::Bool(true)), TExpr::Num(1.0));
                    (FoldOp::Sum, t, Ty::Scalar)
                }
            };
            Ok((TExpr::fold(fop, &c.var, IExpr::Int(lo), IExpr::Int(hi), term), ty))
        })();
        self.counters.pop();
        res
    }

    fn stmts(&mut self, v: &[Stmt]) -> Result<(), TranslateError> {
        for s in v {
            match s {
                Stmt::Assign { name, indices, value, pos } => self.assign(name, indices, value, *pos)?,
                Stmt::External { names, call, pos } => self.external(names, *call, *pos)?,
                Stmt::For { var, lo, hi, body, pos } => self.for_loop(var, lo, hi, body, *pos)?,
            }
        }
        Ok(())
    }

    fn check_name(&self, name: &str, pos: Pos) -> Result<(), TranslateError> {
        if name == PHI {
            return err(pos, format!("`{PHI}` is reserved for object events"));
        }
        if self.counters.contains(&name.to_string()) {
            return err(pos, format!("cannot assign loop counter `{name}`"));
        }
        Ok(())
    }

    fn assign(&mut self, name: &str, indices: &[UExpr], value: &UExpr, pos: Pos) -> Result<(), TranslateError> {
        self.check_name(name, pos)?;
        if !indices.is_empty() {
            let st = self.var_state(name, pos)?.clone();
            if let ExprKind::ArrayInit(size) = &value.kind {
                if indices.len() != st.shape.len() {
                    return err(pos, "nested array initialisation must extend the innermost dimension");
                }
                let n = self.const_int(size)?;
                let st = self.state.get_mut(name).unwrap();
                match st.shape.get(indices.len()) {
                    None => st.shape.push(n as usize),
                    Some(&m) if m == n as usize => {}
                    Some(_) => return err(pos, "rows of an array must have equal length"),
                }
                // rank grows only once; subsequent rows re-check the size
                let _ = st;
                return Ok(());
            }
            if indices.len() != st.shape.len() {
                // shape may have been extended by a previous row initialisation
                return err(pos, format!("`{name}` has {} dimension(s) but {} indices were given", st.shape.len(), indices.len()));
            }
            let (rhs, ty) = self.expr(value)?;
            if let Some(t) = st.ty {
                if t != ty {
                    return err(pos, format!("element of `{name}` changes type from {t} to {ty}"));
                }
            }
            let index = indices.iter().map(|i| self.index_expr(i)).collect::<Result<Vec<_>, _>>()?;
            let label = self.current_label(name);
            self.decl(Self::pat(name, &label, index), rhs);
            self.state.get_mut(name).unwrap().ty = Some(ty);
            return Ok(());
        }
        match &value.kind {
            ExprKind::ArrayInit(size) => {
                let n = self.const_int(size)?;
                self.next_label(name);
                self.state.insert(name.to_string(), VarState { exists: true, shape: vec![n as usize], ty: None });
            }
            ExprKind::BreakTies(axis, arg) => {
                let ExprKind::Name(src) = &arg.kind else {
                    return err(arg.pos, "breakTies needs a named array");
                };
                let st = self.var_state(src, arg.pos)?.clone();
                if st.ty != Some(Ty::Bool) {
                    return err(arg.pos, "breakTies needs a Boolean array");
                }
                let want = if *axis == TieAxis::Flat { 1 } else { 2 };
                if st.shape.len() != want {
                    return err(arg.pos, format!("{} needs a {want}-dimensional array", axis.name()));
                }
                let src_label = self.current_label(src);
                let dst_label = self.next_label(name);
                self.break_ties(*axis, Self::pat(name, &dst_label, vec![]), Self::pat(src, &src_label, vec![]), &st.shape);
                self.state.insert(name.to_string(), VarState { exists: true, shape: st.shape.clone(), ty: Some(Ty::Bool) });
            }
            ExprKind::Name(src) if !self.counters.contains(src) && self.state.get(src).is_some_and(|s| !s.shape.is_empty()) => {
                let st = self.state[src].clone();
                let src_label = self.current_label(src);
                let dst_label = self.next_label(name);
                self.copy_array(Self::pat(name, &dst_label, vec![]), Self::pat(src, &src_label, vec![]), &st.shape);
                self.state.insert(name.to_string(), st);
            }
            _ => {
                let (rhs, ty) = self.expr(value)?;
                let label = self.next_label(name);
                self.decl(Self::pat(name, &label, vec![]), rhs);
                self.state.insert(name.to_string(), VarState { exists: true, shape: vec![], ty: Some(ty) });
            }
        }
        Ok(())
    }

    fn break_ties(&mut self, axis: TieAxis, dst: EidPat, src: EidPat, shape: &[usize]) {
        let vars: Vec<String> = (0..shape.len()).map(|_| self.fresh("bt")).collect();
        let q = self.fresh("q");
        let idx: Vec<IExpr> = vars.iter().map(|v| IExpr::var(v)).collect();
        let at = |ix: Vec<IExpr>| {
            let mut p = src.clone();
            p.index = ix;
            TExpr::Name(p)
        };
        // position that must be the first true one, and the indices of earlier competitors
        let (bound, earlier) = match axis {
            TieAxis::Flat => (idx[0].clone(), vec![IExpr::var(&q)]),
            TieAxis::One => (idx[1].clone(), vec![idx[0].clone(), IExpr::var(&q)]),
            TieAxis::Two => (idx[0].clone(), vec![IExpr::var(&q), idx[1].clone()]),
        };
        let rhs = TExpr::And(vec![
            at(idx.clone()),
            TExpr::fold(FoldOp::And, &q, IExpr::Int(0), bound, TExpr::not(at(earlier))),
        ]);
        let mut lhs = dst;
        lhs.index = idx;
        let mut item = Item::Decl(TDecl { lhs, rhs });
        for (v, n) in vars.iter().zip(shape).rev() {
            item = Item::Forall(Forall { var: v.clone(), lo: IExpr::Int(0), hi: IExpr::Int(*n as i64), body: vec![item] });
        }
        self.emit(item);
        for v in vars {
            self.release(&v);
        }
        self.release(&q);
    }

    fn external(&mut self, names: &[String], call: ExtCall, pos: Pos) -> Result<(), TranslateError> {
        for n in names {
            self.check_name(n, pos)?;
        }
        match call {
            ExtCall::LoadData => {
                if names.len() < 2 || names.len() > 3 {
                    return err(pos, "loadData() binds (objects, count) or (objects, count, matrix)");
                }
                let n = self.b.points.len();
                if n == 0 {
                    return Err(TranslateError::Binding("dataset has no points".into()));
                }
                let obj = &names[0];
                let label = self.next_label(obj);
                for (l, p) in self.b.points.iter().enumerate() {
                    let phi = EidPat { name: PHI.into(), label: vec![], index: vec![IExpr::Int(l as i64)] };
                    self.out.last_mut().unwrap().push(Item::Decl(TDecl { lhs: phi.clone(), rhs: p.event.clone() }));
                    let rhs = TExpr::guard(TExpr::Name(phi), TExpr::VecLit(p.coords.clone()));
                    self.out.last_mut().unwrap().push(Item::Decl(TDecl { lhs: Self::pat(obj, &label, vec![IExpr::Int(l as i64)]), rhs }));
                }
                self.state.insert(obj.clone(), VarState { exists: true, shape: vec![n], ty: Some(Ty::Vector) });
                self.objects = Some(obj.clone());
                self.scalar_const(&names[1], n as f64);
                if let Some(mname) = names.get(2) {
                    let m = self.b.matrix.as_ref().ok_or_else(|| TranslateError::Binding("matrix for loadData()".into()))?;
                    if m.len() != n || m.iter().any(|r| r.len() != n) {
                        return Err(TranslateError::Binding(format!("matrix must be {n}x{n}")));
                    }
                    let label = self.next_label(mname);
                    for (i, row) in m.iter().enumerate() {
                        for (j, w) in row.iter().enumerate() {
                            let phi = |k: usize| TExpr::Name(EidPat { name: PHI.into(), label: vec![], index: vec![IExpr::Int(k as i64)] });
                            let rhs = TExpr::guard(TExpr::And(vec![phi(i), phi(j)]), TExpr::Num(*w));
                            let lhs = Self::pat(mname, &label, vec![IExpr::Int(i as i64), IExpr::Int(j as i64)]);
                            self.decl(lhs, rhs);
                        }
                    }
                    self.state.insert(mname.clone(), VarState { exists: true, shape: vec![n, n], ty: Some(Ty::Scalar) });
                }
            }
            ExtCall::LoadParams => {
                for n in names {
                    let v = *self.b.params.get(n).ok_or_else(|| TranslateError::Binding(format!("parameter `{n}`")))?;
                    self.scalar_const(n, v);
                }
            }
            ExtCall::Init => {
                if names.len() != 1 {
                    return err(pos, "init() binds a single array");
                }
                let obj = self.objects.clone().ok_or_else(|| TranslateError::Binding("init() before loadData()".into()))?;
                let olabel = self.current_label(&obj);
                let n = self.b.points.len();
                if self.b.medoids.is_empty() {
                    return Err(TranslateError::Binding("initial medoids for init()".into()));
                }
                if let Some(bad) = self.b.medoids.iter().find(|&&m| m >= n) {
                    return Err(TranslateError::Binding(format!("initial medoid {bad} out of range")));
                }
                let name = &names[0];
                let label = self.next_label(name);
                for (i, &m) in self.b.medoids.iter().enumerate() {
                    let rhs = TExpr::Name(Self::pat(&obj, &olabel, vec![IExpr::Int(m as i64)]));
                    self.decl(Self::pat(name, &label, vec![IExpr::Int(i as i64)]), rhs);
                }
                self.state.insert(name.clone(), VarState { exists: true, shape: vec![self.b.medoids.len()], ty: Some(Ty::Vector) });
            }
        }
        Ok(())
    }

    fn scalar_const(&mut self, name: &str, v: f64) {
        if self.immutable.contains(name) {
            self.consts.insert(name.to_string(), v);
        }
        let label = self.next_label(name);
        self.decl(Self::pat(name, &label, vec![]), TExpr::Num(v));
        self.state.insert(name.to_string(), VarState { exists: true, shape: vec![], ty: Some(Ty::Scalar) });
    }

    fn for_loop(&mut self, var: &str, lo: &UExpr, hi: &UExpr, body: &[Stmt], pos: Pos) -> Result<(), TranslateError> {
        let lo = self.const_int(lo)?;
        let hi = self.const_int(hi)?;
        if self.counters.contains(&var.to_string()) {
            return err(pos, format!("loop counter `{var}` shadows an enclosing counter"));
        }
        if hi <= lo {
            return Ok(());
        }
        let counts = assign_counts(body);
        let mut fvars = HashMap::new();
        let mut entry_state = HashMap::new();
        for (x, c) in &counts {
            self.check_name(x, pos)?;
            let prefix = self.current_label(x);
            if let Some(st) = self.state.get(x).cloned() {
                if st.exists {
                    let mut entry = prefix.clone();
                    entry.push(Lin::konst(-1));
                    self.copy_array(Self::pat(x, &entry, vec![]), Self::pat(x, &prefix, vec![]), &st.shape);
                }
                entry_state.insert(x.clone(), st);
            }
            fvars.insert(x.clone(), FrameVar { prefix, c: *c, j: 0 });
        }
        self.frames.push(Frame { var: var.to_string(), lo, vars: fvars });
        self.counters.push(var.to_string());
        self.out.push(Vec::new());
        let res = self.stmts(body);
        let items = self.out.pop().unwrap();
        self.counters.pop();
        let frame = self.frames.pop().unwrap();
        res?;
        self.emit(Item::Forall(Forall { var: var.to_string(), lo: IExpr::Int(lo), hi: IExpr::Int(hi), body: items }));
        for (x, c) in &counts {
            let st = self.state.get(x).cloned().ok_or(TranslateError::At { pos, msg: format!("`{x}` never defined in loop") })?;
            if let Some(e) = entry_state.get(x) {
                if e.exists && (e.shape != st.shape || (e.ty.is_some() && st.ty.is_some() && e.ty != st.ty)) {
                    return err(pos, format!("`{x}` changes shape or type across loop iterations"));
                }
            }
            let mut last = frame.vars[x].prefix.clone();
            last.push(Lin::konst(c * (hi - lo) - 1));
            let next = self.next_label(x);
            self.copy_array(Self::pat(x, &next, vec![]), Self::pat(x, &last, vec![]), &st.shape);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_user_program;

    #[test]
    fn versioned_labels_match_reference_listing() {
        let p = parse_user_program(include_str!("../../../programs/versions.py")).unwrap();
        let ep = translate_to_event_program(&p, &Bindings::default()).unwrap();
        let expected = "\
M_{0} := 7.0
M_{1} := M_{0} + 2.0
M_{1.-1} := M_{1}
forall i in 0..2:
  M_{1.(2*i)} := M_{1.(2*i-1)} + i
  M_{1.(2*i).-1} := M_{1.(2*i)}
  forall j in 0..3:
    M_{1.(2*i).j} := M_{1.(2*i).(j-1)} + 1.0
  M_{1.(2*i+1)} := M_{1.(2*i).2}
M_{2} := M_{1.3}
M_{3} := M_{2} + 1.0
";
        assert_eq!(ep.to_string(), expected);
    }

    #[test]
    fn arrays_flatten_to_indexed_identifiers() {
        let src = "X = [None] * 2\nfor i in range(0,2):\n  X[i] = [None] * 3\n  for j in range(0,3):\n    X[i][j] = i + j\n";
        let p = parse_user_program(src).unwrap();
        let ep = translate_to_event_program(&p, &Bindings::default()).unwrap();
        let txt = ep.to_string();
        assert!(txt.contains("X^{i,j} := i + j"), "{txt}");
    }

    #[test]
    fn reduce_count_becomes_guarded_sum() {
        let src = "C = reduce_count([1 for l in range(0, 4) if l <= 1])\n";
        let p = parse_user_program(src).unwrap();
        let ep = translate_to_event_program(&p, &Bindings::default()).unwrap();
        assert_eq!(ep.to_string(), "C := sum(l in 0..4: [l <= 1.0] @ 1.0)\n");
    }

    #[test]
    fn missing_binding_is_reported() {
        let p = parse_user_program("(k, iter) = loadParams()\n").unwrap();
        let e = translate_to_event_program(&p, &Bindings::default()).unwrap_err();
        assert!(matches!(e, TranslateError::Binding(_)));
    }
}
