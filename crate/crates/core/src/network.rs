//! Event networks: hash-consed DAGs over grounded declarations.
//!
//! Unfolded networks give every grounded declaration its own nodes. Folded networks build the
//! main loop body once; body nodes carry one mask slot per iteration and loop nodes read the
//! previous iteration (or an initial value at iteration 0).

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::NetworkError;
use crate::expr::{Expr, VarTable};
use crate::ground::{GroundedProgram, Origin};
use crate::value::{fmt_num, CmpOp, Ty, Value};

pub type NodeId = u32;

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Var(usize),
    Const(Value),
    Not,
    And,
    Or,
    Atom(CmpOp),
    Guard,
    Sum,
    Prod,
    Inv,
    Pow(i32),
    Dist,
    /// children `[src, init]`: slot 0 reads `init`, slot t reads `src` at t-1
    Loop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeClass {
    /// single slot, independent of the loop
    Outside,
    /// one slot per iteration
    Body,
    /// single slot, reads body nodes at the last iteration
    Post,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub children: Vec<NodeId>,
    pub ty: Ty,
    pub class: NodeClass,
    /// vector length (1 for scalars and events)
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub eid: String,
    pub node: NodeId,
    pub slot: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventNetwork {
    pub nodes: Vec<Node>,
    pub parents: Vec<Vec<NodeId>>,
    pub targets: Vec<Target>,
    pub vars: VarTable,
    pub var_nodes: Vec<Option<NodeId>>,
    /// iterations represented by body slots (1 when unfolded)
    pub iterations: u32,
    pub folded: bool,
}

impl EventNetwork {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn slots_of(&self, n: NodeId) -> u32 {
        match self.nodes[n as usize].class {
            NodeClass::Body => self.iterations,
            _ => 1,
        }
    }

    /// Slot of `child` read by `parent` when `parent` is evaluated at iteration `t`.
    pub fn child_slot(&self, parent: NodeId, child_ix: usize, t: u32) -> Option<u32> {
        let p = &self.nodes[parent as usize];
        let c = p.children[child_ix];
        if p.kind == NodeKind::Loop {
            return match (child_ix, t) {
                (1, 0) => Some(0),
                (0, t) if t > 0 => Some(t - 1),
                _ => None,
            };
        }
        Some(match (p.class, self.nodes[c as usize].class) {
            (NodeClass::Body, NodeClass::Body) => t,
            (NodeClass::Post, NodeClass::Body) => self.iterations - 1,
            _ => 0,
        })
    }

    /// Line-oriented dump: `id kind class children...`, then one `target` line per target.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "network {} {}", if self.folded { "folded" } else { "unfolded" }, self.iterations);
        for (i, v) in self.vars.iter().enumerate() {
            let _ = writeln!(s, "var {i} {} {}", v.0, fmt_num(v.1));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            let kind = match &n.kind {
                NodeKind::Var(v) => format!("var:{v}"),
                NodeKind::Const(v) => format!("const:{}", const_token(v)),
                NodeKind::Not => "not".into(),
                NodeKind::And => "and".into(),
                NodeKind::Or => "or".into(),
                NodeKind::Atom(op) => format!("atom:{}", op.symbol()),
                NodeKind::Guard => "guard".into(),
                NodeKind::Sum => "sum".into(),
                NodeKind::Prod => "prod".into(),
                NodeKind::Inv => "inv".into(),
                NodeKind::Pow(k) => format!("pow:{k}"),
                NodeKind::Dist => "dist".into(),
                NodeKind::Loop => "loop".into(),
            };
            let class = match n.class {
                NodeClass::Outside => "o",
                NodeClass::Body => "b",
                NodeClass::Post => "p",
            };
            let _ = write!(s, "{i} {kind} {class} {} {}", ty_token(n.ty), n.dim);
            for c in &n.children {
                let _ = write!(s, " {c}");
            }
            s.push('\n');
        }
        for t in &self.targets {
            let _ = writeln!(s, "target {} {} {}", t.eid, t.node, t.slot);
        }
        s
    }

    /// Inverse of [`EventNetwork::dump`].
    pub fn from_dump(text: &str) -> Result<EventNetwork, NetworkError> {
        let bad = |line: usize, msg: &str| NetworkError::Dump { line: line + 1, msg: msg.to_string() };
        let mut lines = text.lines().enumerate();
        let (_, head) = lines.next().ok_or_else(|| bad(0, "empty dump"))?;
        let h: Vec<&str> = head.split_whitespace().collect();
        if h.len() != 3 || h[0] != "network" {
            return Err(bad(0, "expected `network <mode> <iterations>`"));
        }
        let folded = h[1] == "folded";
        let iterations: u32 = h[2].parse().map_err(|_| bad(0, "bad iteration count"))?;
        let mut vars = VarTable::new();
        let mut nodes = Vec::new();
        let mut targets = Vec::new();
        for (ln, line) in lines {
            let w: Vec<&str> = line.split_whitespace().collect();
            match w.first().copied() {
                Some("var") if w.len() == 4 => {
                    let p: f64 = w[3].parse().map_err(|_| bad(ln, "bad probability"))?;
                    vars.push(w[2], p).map_err(|e| bad(ln, &e))?;
                }
                Some("target") if w.len() == 4 => targets.push(Target {
                    eid: w[1].to_string(),
                    node: w[2].parse().map_err(|_| bad(ln, "bad node id"))?,
                    slot: w[3].parse().map_err(|_| bad(ln, "bad slot"))?,
                }),
                Some(_) if w.len() >= 5 => {
                    if w[0].parse::<usize>().ok() != Some(nodes.len()) {
                        return Err(bad(ln, "node ids must be consecutive"));
                    }
                    let (k, arg) = w[1].split_once(':').map_or((w[1], ""), |(a, b)| (a, b));
                    let kind = match k {
                        "var" => NodeKind::Var(arg.parse().map_err(|_| bad(ln, "bad var"))?),
                        "const" => NodeKind::Const(parse_const(arg).ok_or_else(|| bad(ln, "bad constant"))?),
                        "not" => NodeKind::Not,
                        "and" => NodeKind::And,
                        "or" => NodeKind::Or,
                        "atom" => NodeKind::Atom(CmpOp::from_symbol(arg).ok_or_else(|| bad(ln, "bad comparator"))?),
                        "guard" => NodeKind::Guard,
                        "sum" => NodeKind::Sum,
                        "prod" => NodeKind::Prod,
                        "inv" => NodeKind::Inv,
                        "pow" => NodeKind::Pow(arg.parse().map_err(|_| bad(ln, "bad exponent"))?),
                        "dist" => NodeKind::Dist,
                        "loop" => NodeKind::Loop,
                        _ => return Err(bad(ln, "unknown node kind")),
                    };
                    let class = match w[2] {
                        "o" => NodeClass::Outside,
                        "b" => NodeClass::Body,
                        "p" => NodeClass::Post,
                        _ => return Err(bad(ln, "bad class")),
                    };
                    let ty = match w[3] {
                        "bool" => Ty::Bool,
                        "scalar" => Ty::Scalar,
                        "vector" => Ty::Vector,
                        _ => return Err(bad(ln, "bad type")),
                    };
                    let dim = w[4].parse().map_err(|_| bad(ln, "bad dim"))?;
                    let children = w[5..].iter().map(|c| c.parse().map_err(|_| bad(ln, "bad child"))).collect::<Result<Vec<NodeId>, _>>()?;
                    nodes.push(Node { kind, children, ty, class, dim });
                }
                _ => return Err(bad(ln, "malformed line")),
            }
        }
        Ok(EventNetwork::assemble(nodes, targets, vars, iterations, folded))
    }

    fn assemble(nodes: Vec<Node>, targets: Vec<Target>, vars: VarTable, iterations: u32, folded: bool) -> EventNetwork {
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut var_nodes = vec![None; vars.len()];
        for (i, n) in nodes.iter().enumerate() {
            for &c in &n.children {
                if !parents[c as usize].contains(&(i as NodeId)) {
                    parents[c as usize].push(i as NodeId);
                }
            }
            if let NodeKind::Var(v) = n.kind {
                if v < var_nodes.len() {
                    var_nodes[v] = Some(i as NodeId);
                }
            }
        }
        EventNetwork { nodes, parents, targets, vars, var_nodes, iterations, folded }
    }
}

fn ty_token(t: Ty) -> &'static str {
    match t {
        Ty::Bool => "bool",
        Ty::Scalar => "scalar",
        Ty::Vector => "vector",
    }
}

fn const_token(v: &Value) -> String {
    match v {
        Value::Bool(b) => b.to_string(),
        Value::Scalar(Some(x)) => fmt_num(*x),
        Value::Scalar(None) => "u".into(),
        Value::Vector(None) => "uvec".into(),
        Value::Vector(Some(xs)) => format!("vec({})", xs.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",")),
    }
}

fn parse_const(s: &str) -> Option<Value> {
    Some(match s {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        "u" => Value::Scalar(None),
        "uvec" => Value::Vector(None),
        _ => match s.strip_prefix("vec(").and_then(|r| r.strip_suffix(')')) {
            Some("") => Value::Vector(Some(vec![])),
            Some(r) => Value::Vector(Some(r.split(',').map(|x| x.parse().ok()).collect::<Option<Vec<f64>>>()?)),
            None => Value::Scalar(Some(s.parse().ok()?)),
        },
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Pre,
    Body,
    Post,
}

struct Builder<'g> {
    g: &'g GroundedProgram,
    nodes: Vec<Node>,
    memo: HashMap<(String, Vec<NodeId>, NodeClass), NodeId>,
    decl_node: HashMap<usize, NodeId>,
    post_node: HashMap<usize, NodeId>,
    // folded-only state
    body_node: HashMap<usize, NodeId>,
    loop_memo: HashMap<(usize, NodeId), NodeId>,
    pending_loops: Vec<(NodeId, usize)>,
}

fn kind_key(k: &NodeKind) -> String {
    format!("{k:?}")
}

impl<'g> Builder<'g> {
    fn new(g: &'g GroundedProgram) -> Self {
        Builder {
            g,
            nodes: Vec::new(),
            memo: HashMap::new(),
            decl_node: HashMap::new(),
            post_node: HashMap::new(),
            body_node: HashMap::new(),
            loop_memo: HashMap::new(),
            pending_loops: Vec::new(),
        }
    }

    fn mk(&mut self, kind: NodeKind, children: Vec<NodeId>, ctx: Ctx) -> Result<NodeId, NetworkError> {
        let classes: Vec<NodeClass> = children.iter().map(|&c| self.nodes[c as usize].class).collect();
        let class = match ctx {
            Ctx::Pre => NodeClass::Outside,
            Ctx::Body if kind == NodeKind::Loop || classes.contains(&NodeClass::Body) => NodeClass::Body,
            Ctx::Post if classes.iter().any(|c| *c != NodeClass::Outside) => NodeClass::Post,
            _ => NodeClass::Outside,
        };
        let key = (kind_key(&kind), children.clone(), class);
        if let Some(&id) = self.memo.get(&key) {
            return Ok(id);
        }
        let cn = |i: usize| &self.nodes[children[i] as usize];
        let (ty, dim) = match &kind {
            NodeKind::Var(_) | NodeKind::Not | NodeKind::And | NodeKind::Or | NodeKind::Atom(_) => (Ty::Bool, 1),
            NodeKind::Const(v) => (v.ty(), if let Value::Vector(Some(x)) = v { x.len() } else { 1 }),
            NodeKind::Guard => (cn(1).ty, cn(1).dim),
            NodeKind::Sum => children.first().map_or((Ty::Scalar, 1), |_| (cn(0).ty, cn(0).dim)),
            NodeKind::Prod => {
                let mut acc: Option<(Ty, usize)> = None;
                for i in 0..children.len() {
                    let (t, d) = (cn(i).ty, cn(i).dim);
                    acc = Some(match (acc, t) {
                        (None, _) => (t, d),
                        (Some((Ty::Vector, _)), Ty::Vector) => (Ty::Scalar, 1),
                        (Some((Ty::Scalar, _)), Ty::Vector) => (Ty::Vector, d),
                        (Some(a), _) => a,
                    });
                }
                acc.unwrap_or((Ty::Scalar, 1))
            }
            NodeKind::Inv | NodeKind::Pow(_) | NodeKind::Dist => (Ty::Scalar, 1),
            // init decides the type; src is patched in later
            NodeKind::Loop => (cn(1).ty, cn(1).dim),
        };
        if ty == Ty::Vector && matches!(kind, NodeKind::Sum) && children.iter().any(|&c| self.nodes[c as usize].dim != dim) {
            return Err(NetworkError::Unsupported("vector sum with mismatched dimensions".into()));
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node { kind, children, ty, class, dim });
        self.memo.insert(key, id);
        Ok(id)
    }

    /// Builds `e`, resolving references through `resolve`.
    fn expr(&mut self, e: &Expr, ctx: Ctx, resolve: &mut dyn FnMut(&mut Self, usize) -> Result<NodeId, NetworkError>) -> Result<NodeId, NetworkError> {
        let mut kids = |b: &mut Self, v: &[&Expr]| -> Result<Vec<NodeId>, NetworkError> {
            v.iter().map(|c| b.expr(c, ctx, resolve)).collect()
        };
        Ok(match e {
            Expr::Ref(i) => return resolve(self, *i),
            Expr::Var(v) => self.mk(NodeKind::Var(*v), vec![], Ctx::Pre)?,
            Expr::Bool(b) => self.mk(NodeKind::Const(Value::Bool(*b)), vec![], Ctx::Pre)?,
            Expr::Num(v) => self.mk(NodeKind::Const(v.clone()), vec![], Ctx::Pre)?,
            _ => {
                let kind = match e {
                    Expr::Not(_) => NodeKind::Not,
                    Expr::And(_) => NodeKind::And,
                    Expr::Or(_) => NodeKind::Or,
                    Expr::Atom(op, ..) => NodeKind::Atom(*op),
                    Expr::Guard(..) => NodeKind::Guard,
                    Expr::Sum(_) => NodeKind::Sum,
                    Expr::Prod(_) => NodeKind::Prod,
                    Expr::Inv(_) => NodeKind::Inv,
                    Expr::Pow(_, n) => NodeKind::Pow(*n),
                    Expr::Dist(..) => NodeKind::Dist,
                    _ => unreachable!(),
                };
                let c = kids(self, &e.children())?;
                self.mk(kind, c, ctx)?
            }
        })
    }

    /// Node of a declaration outside the loop (or of any declaration when unfolded).
    fn pre_decl(&mut self, i: usize) -> Result<NodeId, NetworkError> {
        if let Some(&n) = self.decl_node.get(&i) {
            return Ok(n);
        }
        let g = self.g;
        let n = self.expr(&g.decls[i].expr, Ctx::Pre, &mut |b, j| b.pre_decl(j))?;
        self.decl_node.insert(i, n);
        Ok(n)
    }
}

/// One node set per grounded declaration reachable from the targets.
pub fn build_unfolded(g: &GroundedProgram) -> Result<EventNetwork, NetworkError> {
    let mut b = Builder::new(g);
    let mut targets = Vec::new();
    for &t in &g.targets {
        let node = b.pre_decl(t)?;
        targets.push(Target { eid: g.decls[t].eid.clone(), node, slot: 0 });
    }
    Ok(EventNetwork::assemble(b.nodes, targets, g.vars.clone(), 1, false))
}

/// Folded network for `g`. `probe` must be the same program grounded with at least three
/// iterations of the main loop; it supplies the loop-body template.
pub fn build_folded(g: &GroundedProgram, probe: &GroundedProgram) -> Result<EventNetwork, NetworkError> {
    let Some((_, lo, hi)) = g.main_loop.clone() else {
        return build_unfolded(g);
    };
    let t_count = (hi - lo) as u32;
    let fold_err = |m: String| NetworkError::Fold(m);
    let Some((_, plo, phi)) = probe.main_loop.clone() else {
        return Err(fold_err("probe program has no main loop".into()));
    };
    if plo != lo || phi - plo < 3 {
        return Err(fold_err("probe must cover three iterations from the same start".into()));
    }
    // probe declarations of the first three iterations, by position
    let mut iters: [Vec<usize>; 3] = Default::default();
    for (d, o) in probe.origins.iter().enumerate() {
        if let Origin::Body { iter, pos } = *o {
            let k = iter - lo;
            if (0..3).contains(&k) {
                if iters[k as usize].len() != pos {
                    return Err(fold_err("body positions out of order".into()));
                }
                iters[k as usize].push(d);
            }
        }
    }
    if iters[0].len() != iters[1].len() || iters[1].len() != iters[2].len() {
        return Err(fold_err("iterations declare different numbers of identifiers".into()));
    }
    let pre_count = probe.origins.iter().take_while(|o| **o == Origin::Pre).count();
    if g.origins.iter().take_while(|o| **o == Origin::Pre).count() != pre_count || g.decls[..pre_count] != probe.decls[..pre_count] {
        return Err(fold_err("probe differs from the program before the loop".into()));
    }
    let body_pos = |d: usize, k: i64| -> Option<usize> {
        match probe.origins[d] {
            Origin::Body { iter, pos } if iter == lo + k => Some(pos),
            _ => None,
        }
    };
    let mut b = Builder::new(g);

    fn template(
        b: &mut Builder<'_>,
        probe: &GroundedProgram,
        iters: &[Vec<usize>; 3],
        body_pos: &dyn Fn(usize, i64) -> Option<usize>,
        pos: usize,
    ) -> Result<NodeId, NetworkError> {
        if let Some(&n) = b.body_node.get(&pos) {
            return Ok(n);
        }
        let e = [&probe.decls[iters[0][pos]].expr, &probe.decls[iters[1][pos]].expr, &probe.decls[iters[2][pos]].expr];
        let n = walk(b, probe, iters, body_pos, e)?;
        b.body_node.insert(pos, n);
        Ok(n)
    }

    // walks the three iterations' expressions in lockstep
    fn walk(
        b: &mut Builder<'_>,
        probe: &GroundedProgram,
        iters: &[Vec<usize>; 3],
        body_pos: &dyn Fn(usize, i64) -> Option<usize>,
        e: [&Expr; 3],
    ) -> Result<NodeId, NetworkError> {
        let err = |m: &str| NetworkError::Fold(format!("{m} in `{}`", e[1].display(probe)));
        let [e0, e1, e2] = e;
        if let Expr::Ref(r1) = e1 {
            let (Expr::Ref(r0), Expr::Ref(r2)) = (e0, e2) else { return Err(err("iterations differ")) };
            if let Some(p) = body_pos(*r1, 1) {
                if body_pos(*r0, 0) != Some(p) || body_pos(*r2, 2) != Some(p) {
                    return Err(err("same-iteration reference differs across iterations"));
                }
                return template(b, probe, iters, body_pos, p);
            }
            if let Some(p) = body_pos(*r1, 0) {
                if body_pos(*r2, 1) != Some(p) {
                    return Err(err("previous-iteration reference differs across iterations"));
                }
                if probe.origins[*r0] != Origin::Pre {
                    return Err(err("first iteration does not read an initial value"));
                }
                let init = b.pre_decl(*r0)?;
                if let Some(&n) = b.loop_memo.get(&(p, init)) {
                    return Ok(n);
                }
                // src is patched once the template position exists
                let n = b.mk(NodeKind::Loop, vec![init, init], Ctx::Body)?;
                b.loop_memo.insert((p, init), n);
                b.pending_loops.push((n, p));
                return Ok(n);
            }
            if probe.origins[*r1] == Origin::Pre {
                if r0 != r1 || r2 != r1 {
                    return Err(err("reference before the loop differs across iterations"));
                }
                return b.pre_decl(*r1);
            }
            return Err(err("reference reaches more than one iteration back"));
        }
        if std::mem::discriminant(e0) != std::mem::discriminant(e1) || std::mem::discriminant(e2) != std::mem::discriminant(e1) {
            return Err(err("iterations differ in shape"));
        }
        let leaf_same = |x: &Expr| match (x, e1) {
            (Expr::Var(a), Expr::Var(b)) => a == b,
            (Expr::Bool(a), Expr::Bool(b)) => a == b,
            (Expr::Num(a), Expr::Num(b)) => a == b,
            (Expr::Atom(a, ..), Expr::Atom(b, ..)) => a == b,
            (Expr::Pow(_, a), Expr::Pow(_, b)) => a == b,
            _ => true,
        };
        if !leaf_same(e0) || !leaf_same(e2) {
            return Err(err("iterations differ in constants"));
        }
        let (c0, c1, c2) = (e0.children(), e1.children(), e2.children());
        if c0.len() != c1.len() || c2.len() != c1.len() {
            return Err(err("iterations differ in arity"));
        }
        match e1 {
            Expr::Var(_) | Expr::Bool(_) | Expr::Num(_) => b.expr(e1, Ctx::Pre, &mut |b, j| b.pre_decl(j)),
            _ => {
                let mut kids = Vec::with_capacity(c1.len());
                for i in 0..c1.len() {
                    kids.push(walk(b, probe, iters, body_pos, [c0[i], c1[i], c2[i]])?);
                }
                let kind = match e1 {
                    Expr::Not(_) => NodeKind::Not,
                    Expr::And(_) => NodeKind::And,
                    Expr::Or(_) => NodeKind::Or,
                    Expr::Atom(op, ..) => NodeKind::Atom(*op),
                    Expr::Guard(..) => NodeKind::Guard,
                    Expr::Sum(_) => NodeKind::Sum,
                    Expr::Prod(_) => NodeKind::Prod,
                    Expr::Inv(_) => NodeKind::Inv,
                    Expr::Pow(_, n) => NodeKind::Pow(*n),
                    Expr::Dist(..) => NodeKind::Dist,
                    _ => unreachable!(),
                };
                b.mk(kind, kids, Ctx::Body)
            }
        }
    }

    // last-iteration body declarations of the real program map to template positions
    let last_pos = |d: usize| match g.origins[d] {
        Origin::Body { iter, pos } if iter == hi - 1 => Some(pos),
        _ => None,
    };
    fn post(
        b: &mut Builder<'_>,
        probe: &GroundedProgram,
        iters: &[Vec<usize>; 3],
        body_pos: &dyn Fn(usize, i64) -> Option<usize>,
        last_pos: &dyn Fn(usize) -> Option<usize>,
        d: usize,
    ) -> Result<NodeId, NetworkError> {
        let g = b.g;
        match g.origins[d] {
            Origin::Pre => b.pre_decl(d),
            Origin::Body { .. } => match last_pos(d) {
                Some(p) => template(b, probe, iters, body_pos, p),
                None => Err(NetworkError::Fold(format!("`{}` is read after the loop but belongs to an earlier iteration", g.decls[d].eid))),
            },
            Origin::Post => {
                if let Some(&n) = b.post_node.get(&d) {
                    return Ok(n);
                }
                let n = b.expr(&g.decls[d].expr, Ctx::Post, &mut |b, j| post(b, probe, iters, body_pos, last_pos, j))?;
                b.post_node.insert(d, n);
                Ok(n)
            }
        }
    }

    let mut targets = Vec::new();
    for &t in &g.targets {
        let node = post(&mut b, probe, &iters, &body_pos, &last_pos, t)?;
        let slot = if b.nodes[node as usize].class == NodeClass::Body { t_count - 1 } else { 0 };
        targets.push(Target { eid: g.decls[t].eid.clone(), node, slot });
    }
    while let Some((n, p)) = b.pending_loops.pop() {
        let src = template(&mut b, probe, &iters, &body_pos, p)?;
        let (st, sd) = (b.nodes[src as usize].ty, b.nodes[src as usize].dim);
        let node = &mut b.nodes[n as usize];
        if node.ty != st || node.dim != sd {
            return Err(NetworkError::Fold("loop value changes type".into()));
        }
        node.children[0] = src;
    }
    Ok(EventNetwork::assemble(b.nodes, targets, g.vars.clone(), t_count, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eprog::parse_event_program;
    use crate::ground::ground;

    fn net(src: &str, targets: &[&str]) -> EventNetwork {
        let vt = VarTable::from_pairs((0..4).map(|i| (format!("x{i}"), 0.5))).unwrap();
        let mut g = ground(&parse_event_program(src).unwrap(), &vt).unwrap();
        g.select_targets(&targets.iter().map(|s| s.to_string()).collect::<Vec<_>>()).unwrap();
        build_unfolded(&g).unwrap()
    }

    #[test]
    fn shared_subexpression_has_one_node() {
        let n = net("A := x1 & x2\nB := x1 & x2 | x3\n", &["A", "B"]);
        let and = n.nodes.iter().position(|x| x.kind == NodeKind::And).unwrap();
        assert_eq!(n.nodes.iter().filter(|x| x.kind == NodeKind::And).count(), 1);
        assert_eq!(n.parents[and].len(), 1);
        assert_eq!(n.targets[0].node as usize, and);
    }

    #[test]
    fn node_ids_are_topological() {
        let n = net("A := x1 & x2\nB := !A | x3\nC := B & A\n", &["C"]);
        for (i, x) in n.nodes.iter().enumerate() {
            assert!(x.children.iter().all(|&c| (c as usize) < i));
        }
    }

    #[test]
    fn dump_round_trips() {
        let n = net("S := x0 @ vec(1.0, 2.0) + x1 @ vec(0.0, -1.5)\nA := [dist(S, vec(0.0, 0.0)) <= 2.0] & !x2\n", &["A"]);
        let d = n.dump();
        let back = EventNetwork::from_dump(&d).unwrap();
        assert_eq!(back, n);
        assert_eq!(back.dump(), d);
    }
}
