//! Per-slot masks: partial knowledge of node values under a partial valuation.
//!
//! Events carry a tri-state; numeric nodes carry componentwise bounds plus flags for whether the
//! value may be undefined and whether it may be defined. Changes are recorded on a trail so a
//! depth-first search can undo them.

use std::collections::BTreeSet;

use crate::network::{EventNetwork, NodeClass, NodeId, NodeKind};
use crate::value::{CmpOp, Value};

#[derive(Clone, Debug, PartialEq)]
pub struct Abs {
    pub may_undef: bool,
    pub may_def: bool,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Abs {
    pub fn undef() -> Abs {
        Abs { may_undef: true, may_def: false, lo: vec![], hi: vec![] }
    }

    pub fn point(v: &[f64]) -> Abs {
        Abs { may_undef: false, may_def: true, lo: v.to_vec(), hi: v.to_vec() }
    }

    fn from_value(v: &Value) -> Abs {
        match v {
            Value::Scalar(Some(x)) => Abs::point(&[*x]),
            Value::Vector(Some(x)) => Abs::point(x),
            _ => Abs::undef(),
        }
    }

    fn is_exact(&self) -> bool {
        !self.may_def || (!self.may_undef && self.lo == self.hi)
    }

    /// Whether `v` is a possible value.
    pub fn admits(&self, v: &Value) -> bool {
        match v {
            Value::Scalar(None) | Value::Vector(None) => self.may_undef,
            Value::Scalar(Some(x)) => self.may_def && self.lo[0] <= *x && *x <= self.hi[0],
            Value::Vector(Some(x)) => self.may_def && x.iter().enumerate().all(|(i, c)| self.lo[i] <= *c && *c <= self.hi[i]),
            Value::Bool(_) => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mask {
    B(Option<bool>),
    N(Abs),
}

impl Mask {
    pub fn is_full(&self) -> bool {
        match self {
            Mask::B(b) => b.is_some(),
            Mask::N(a) => a.is_exact(),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Mask::B(b) => *b,
            Mask::N(_) => None,
        }
    }

    fn abs(&self) -> &Abs {
        match self {
            Mask::N(a) => a,
            Mask::B(_) => panic!("numeric mask expected"),
        }
    }
}

fn fix_lo(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x
    }
}

fn fix_hi(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

fn imul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let c = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    let lo = c.iter().copied().map(fix_lo).fold(f64::INFINITY, f64::min);
    let hi = c.iter().copied().map(fix_hi).fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Interval product mirroring `Value::mul` on defined operands.
fn abs_mul(a: &Abs, b: &Abs) -> Abs {
    let may_undef = a.may_undef || b.may_undef;
    let (la, lb) = (a.lo.len(), b.lo.len());
    let (lo, hi) = if la == lb && la > 1 {
        // dot product: s = 0; s += x*y
        let (mut slo, mut shi) = (0.0, 0.0);
        for i in 0..la {
            let (l, h) = imul((a.lo[i], a.hi[i]), (b.lo[i], b.hi[i]));
            slo += l;
            shi += h;
        }
        (vec![fix_lo(slo)], vec![fix_hi(shi)])
    } else if la == 1 && lb == 1 {
        let (l, h) = imul((a.lo[0], a.hi[0]), (b.lo[0], b.hi[0]));
        (vec![l], vec![h])
    } else {
        let (s, v) = if la == 1 { (a, b) } else { (b, a) };
        let mut lo = Vec::with_capacity(v.lo.len());
        let mut hi = Vec::with_capacity(v.lo.len());
        for i in 0..v.lo.len() {
            let (l, h) = imul((s.lo[0], s.hi[0]), (v.lo[i], v.hi[i]));
            lo.push(l);
            hi.push(h);
        }
        (lo, hi)
    };
    Abs { may_undef, may_def: true, lo, hi }
}

#[derive(Clone, Debug)]
enum Trail {
    Mask(usize, Mask),
    Full(usize),
    Assign(usize),
}

/// Mask state of one search: one mask per (node, iteration) slot.
pub struct MaskState<'n> {
    net: &'n EventNetwork,
    base: Vec<usize>,
    slot_node: Vec<NodeId>,
    slot_t: Vec<u32>,
    masks: Vec<Mask>,
    full: Vec<bool>,
    assign: Vec<Option<bool>>,
    trail: Vec<Trail>,
    words: usize,
    cone: Vec<u64>,
    counts: Vec<u32>,
    target_slots: Vec<usize>,
    /// slot -> indices of targets on it
    slot_targets: Vec<Vec<usize>>,
    worklist: BTreeSet<(i64, NodeId, u32)>,
    pub propagations: u64,
}

impl<'n> MaskState<'n> {
    /// Masks under the empty valuation.
    pub fn new(net: &'n EventNetwork) -> Self {
        let mut base = Vec::with_capacity(net.len());
        let mut slot_node = Vec::new();
        let mut slot_t = Vec::new();
        for n in 0..net.len() as NodeId {
            base.push(slot_node.len());
            for t in 0..net.slots_of(n) {
                slot_node.push(n);
                slot_t.push(t);
            }
        }
        let nslots = slot_node.len();
        let m = net.vars.len();
        let words = m.div_ceil(64).max(1);
        let mut st = MaskState {
            net,
            base,
            slot_node,
            slot_t,
            masks: vec![Mask::B(None); nslots],
            full: vec![false; nslots],
            assign: vec![None; m],
            trail: Vec::new(),
            words,
            cone: vec![0; nslots * words],
            counts: vec![0; m],
            target_slots: Vec::new(),
            slot_targets: vec![Vec::new(); nslots],
            worklist: BTreeSet::new(),
            propagations: 0,
        };
        let mut order: Vec<usize> = (0..nslots).collect();
        order.sort_by_key(|&s| (st.tkey(st.slot_node[s], st.slot_t[s]), st.slot_node[s], st.slot_t[s]));
        for s in order {
            let (n, t) = (st.slot_node[s], st.slot_t[s]);
            st.masks[s] = st.compute(n, t);
            let node = &net.nodes[n as usize];
            if let NodeKind::Var(v) = node.kind {
                st.cone[s * words + v / 64] |= 1 << (v % 64);
            }
            for ci in 0..node.children.len() {
                if let Some(ct) = net.child_slot(n, ci, t) {
                    let cs = st.slot(node.children[ci], ct);
                    for w in 0..words {
                        st.cone[s * words + w] |= st.cone[cs * words + w];
                    }
                }
            }
            st.full[s] = st.masks[s].is_full();
            if !st.full[s] {
                st.bump_counts(s, 1);
            }
        }
        for (i, t) in net.targets.iter().enumerate() {
            let s = st.slot(t.node, t.slot);
            st.target_slots.push(s);
            st.slot_targets[s].push(i);
        }
        st
    }

    pub fn network(&self) -> &'n EventNetwork {
        self.net
    }

    fn slot(&self, n: NodeId, t: u32) -> usize {
        self.base[n as usize] + t as usize
    }

    fn tkey(&self, n: NodeId, t: u32) -> i64 {
        match self.net.nodes[n as usize].class {
            NodeClass::Outside => -1,
            NodeClass::Body => t as i64,
            NodeClass::Post => self.net.iterations as i64,
        }
    }

    fn bump_counts(&mut self, s: usize, up: i32) {
        for w in 0..self.words {
            let mut bits = self.cone[s * self.words + w];
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let v = w * 64 + b;
                if up > 0 {
                    self.counts[v] += 1;
                } else {
                    self.counts[v] -= 1;
                }
            }
        }
    }

    pub fn mask(&self, n: NodeId, t: u32) -> &Mask {
        &self.masks[self.slot(n, t)]
    }

    pub fn target_value(&self, i: usize) -> Option<bool> {
        self.masks[self.target_slots[i]].as_bool()
    }

    pub fn assigned(&self, v: usize) -> Option<bool> {
        self.assign[v]
    }

    /// Variables whose cone contains target `i` (for configuration checks).
    pub fn target_has_vars(&self, i: usize) -> bool {
        let s = self.target_slots[i];
        (0..self.words).any(|w| self.cone[s * self.words + w] != 0)
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                Trail::Mask(s, m) => self.masks[s] = m,
                Trail::Full(s) => {
                    self.full[s] = false;
                    self.bump_counts(s, 1);
                }
                Trail::Assign(v) => self.assign[v] = None,
            }
        }
    }

    /// Unassigned variable under the most not-yet-fully-masked slots; lowest index on ties.
    pub fn next_variable(&self) -> Option<usize> {
        let mut best: Option<(u32, usize)> = None;
        for v in 0..self.assign.len() {
            if self.assign[v].is_some() {
                continue;
            }
            let c = self.counts[v];
            if best.is_none_or(|(bc, _)| c > bc) {
                best = Some((c, v));
            }
        }
        best.map(|(_, v)| v)
    }

    /// Assigns `v := b` and propagates. Returns targets that became decided, with their values.
    pub fn assign(&mut self, v: usize, b: bool) -> Vec<(usize, bool)> {
        debug_assert!(self.assign[v].is_none());
        self.assign[v] = Some(b);
        self.trail.push(Trail::Assign(v));
        let mut decided = Vec::new();
        let Some(n) = self.net.var_nodes[v] else {
            return decided;
        };
        let s = self.slot(n, 0);
        self.set(s, Mask::B(Some(b)), &mut decided);
        while let Some((_, n, t)) = self.worklist.pop_first() {
            let s = self.slot(n, t);
            if self.full[s] {
                continue;
            }
            self.propagations += 1;
            let m = self.compute(n, t);
            if m != self.masks[s] {
                self.set(s, m, &mut decided);
            }
        }
        decided.sort_unstable();
        decided
    }

    fn set(&mut self, s: usize, m: Mask, decided: &mut Vec<(usize, bool)>) {
        let was = self.masks[s].as_bool();
        let old = std::mem::replace(&mut self.masks[s], m);
        self.trail.push(Trail::Mask(s, old));
        if !self.full[s] && self.masks[s].is_full() {
            self.full[s] = true;
            self.bump_counts(s, -1);
            self.trail.push(Trail::Full(s));
        }
        if was.is_none() {
            if let Some(b) = self.masks[s].as_bool() {
                for &i in &self.slot_targets[s] {
                    decided.push((i, b));
                }
            }
        }
        self.push_parents(s);
    }

    fn push_parents(&mut self, s: usize) {
        let (c, tc) = (self.slot_node[s], self.slot_t[s]);
        let net = self.net;
        let tn = net.iterations;
        let cclass = net.nodes[c as usize].class;
        for &p in &net.parents[c as usize] {
            let pn = &net.nodes[p as usize];
            let mut push = |t: u32| {
                let k = self.tkey(p, t);
                self.worklist.insert((k, p, t));
            };
            match (pn.class, cclass) {
                _ if pn.kind == NodeKind::Loop => {
                    if pn.children[0] == c && cclass == NodeClass::Body {
                        if tc + 1 < tn {
                            push(tc + 1);
                        }
                    } else {
                        push(0);
                    }
                }
                (NodeClass::Body, NodeClass::Body) => push(tc),
                (NodeClass::Body, _) => (0..tn).for_each(&mut push),
                (NodeClass::Post, NodeClass::Body) => {
                    if tc + 1 == tn {
                        push(0)
                    }
                }
                _ => push(0),
            }
        }
    }

    fn child(&self, n: NodeId, i: usize, t: u32) -> &Mask {
        let c = self.net.nodes[n as usize].children[i];
        let ct = self.net.child_slot(n, i, t).expect("child slot");
        &self.masks[self.slot(c, ct)]
    }

    /// Mask of slot `(n, t)` from its children.
    fn compute(&self, n: NodeId, t: u32) -> Mask {
        let node = &self.net.nodes[n as usize];
        let k = node.children.len();
        match &node.kind {
            NodeKind::Var(v) => Mask::B(self.assign[*v]),
            NodeKind::Const(Value::Bool(b)) => Mask::B(Some(*b)),
            NodeKind::Const(v) => Mask::N(Abs::from_value(v)),
            NodeKind::Not => Mask::B(self.child(n, 0, t).as_bool().map(|b| !b)),
            NodeKind::And | NodeKind::Or => {
                let absorbing = node.kind == NodeKind::Or;
                let mut all = true;
                for i in 0..k {
                    match self.child(n, i, t).as_bool() {
                        Some(b) if b == absorbing => return Mask::B(Some(absorbing)),
                        Some(_) => {}
                        None => all = false,
                    }
                }
                Mask::B(if all { Some(!absorbing) } else { None })
            }
            NodeKind::Loop => {
                let i = if t == 0 { 1 } else { 0 };
                self.child(n, i, t).clone()
            }
            NodeKind::Atom(op) => Mask::B(atom(*op, self.child(n, 0, t).abs(), self.child(n, 1, t).abs())),
            NodeKind::Guard => {
                let v = self.child(n, 1, t).abs();
                Mask::N(match self.child(n, 0, t).as_bool() {
                    Some(true) => v.clone(),
                    Some(false) => Abs::undef(),
                    None if !v.may_def => Abs::undef(),
                    None => Abs { may_undef: true, ..v.clone() },
                })
            }
            NodeKind::Sum => {
                let kids: Vec<&Abs> = (0..k).map(|i| self.child(n, i, t).abs()).collect();
                if !kids.iter().any(|a| a.may_def) {
                    return Mask::N(Abs::undef());
                }
                let dim = node.dim;
                let (mut lo, mut hi) = (vec![0.0; dim], vec![0.0; dim]);
                for a in &kids {
                    if !a.may_def {
                        continue;
                    }
                    for j in 0..dim {
                        if a.may_undef {
                            lo[j] += a.lo[j].min(0.0);
                            hi[j] += a.hi[j].max(0.0);
                        } else {
                            lo[j] += a.lo[j];
                            hi[j] += a.hi[j];
                        }
                    }
                }
                let may_undef = kids.iter().all(|a| a.may_undef);
                Mask::N(Abs { may_undef, may_def: true, lo: lo.into_iter().map(fix_lo).collect(), hi: hi.into_iter().map(fix_hi).collect() })
            }
            NodeKind::Prod => {
                let kids: Vec<&Abs> = (0..k).map(|i| self.child(n, i, t).abs()).collect();
                if kids.is_empty() || kids.iter().any(|a| !a.may_def) {
                    return Mask::N(Abs::undef());
                }
                let mut acc = kids[0].clone();
                for a in &kids[1..] {
                    acc = abs_mul(&acc, a);
                }
                acc.may_undef = kids.iter().any(|a| a.may_undef);
                Mask::N(acc)
            }
            NodeKind::Inv => {
                let a = self.child(n, 0, t).abs();
                if !a.may_def || (a.lo[0] == 0.0 && a.hi[0] == 0.0) {
                    return Mask::N(Abs::undef());
                }
                Mask::N(if a.lo[0] <= 0.0 && 0.0 <= a.hi[0] {
                    Abs { may_undef: true, may_def: true, lo: vec![f64::NEG_INFINITY], hi: vec![f64::INFINITY] }
                } else {
                    Abs { may_undef: a.may_undef, may_def: true, lo: vec![fix_lo(1.0 / a.hi[0])], hi: vec![fix_hi(1.0 / a.lo[0])] }
                })
            }
            NodeKind::Pow(e) => {
                let a = self.child(n, 0, t).abs();
                if !a.may_def {
                    return Mask::N(Abs::undef());
                }
                let (l, h) = (a.lo[0], a.hi[0]);
                if *e < 0 && l == 0.0 && h == 0.0 {
                    return Mask::N(Abs::undef());
                }
                let straddles = l <= 0.0 && 0.0 <= h;
                if *e < 0 && straddles {
                    return Mask::N(Abs { may_undef: true, may_def: true, lo: vec![f64::NEG_INFINITY], hi: vec![f64::INFINITY] });
                }
                let mut c = vec![l.powi(*e), h.powi(*e)];
                if straddles && *e > 0 {
                    c.push(0.0);
                }
                let lo = c.iter().copied().map(fix_lo).fold(f64::INFINITY, f64::min);
                let hi = c.iter().copied().map(fix_hi).fold(f64::NEG_INFINITY, f64::max);
                Mask::N(Abs { may_undef: a.may_undef, may_def: true, lo: vec![lo], hi: vec![hi] })
            }
            NodeKind::Dist => {
                let (a, b) = (self.child(n, 0, t).abs(), self.child(n, 1, t).abs());
                if !a.may_def || !b.may_def {
                    return Mask::N(Abs::undef());
                }
                let (mut slo, mut shi) = (0.0f64, 0.0f64);
                for j in 0..a.lo.len() {
                    let (dl, dh) = (a.lo[j] - b.hi[j], a.hi[j] - b.lo[j]);
                    let (ql, qh) = if dl >= 0.0 {
                        (dl * dl, dh * dh)
                    } else if dh <= 0.0 {
                        (dh * dh, dl * dl)
                    } else {
                        (0.0, (dl * dl).max(dh * dh))
                    };
                    slo += fix_lo(ql);
                    shi += fix_hi(qh);
                }
                Mask::N(Abs { may_undef: a.may_undef || b.may_undef, may_def: true, lo: vec![fix_lo(slo.sqrt())], hi: vec![fix_hi(shi.sqrt())] })
            }
        }
    }
}

fn atom(op: CmpOp, a: &Abs, b: &Abs) -> Option<bool> {
    if !a.may_def || !b.may_def {
        return Some(true);
    }
    let maybe_undef = a.may_undef || b.may_undef;
    if a.lo.len() > 1 || b.lo.len() > 1 {
        // vectors compare with `=` only
        let all_point = (0..a.lo.len()).all(|j| a.lo[j] == a.hi[j] && b.lo[j] == b.hi[j] && a.lo[j] == b.lo[j]);
        if all_point {
            return Some(true);
        }
        let disjoint = (0..a.lo.len()).any(|j| a.hi[j] < b.lo[j] || b.hi[j] < a.lo[j]);
        return if disjoint && !maybe_undef { Some(false) } else { None };
    }
    let (al, ah, bl, bh) = (a.lo[0], a.hi[0], b.lo[0], b.hi[0]);
    let (holds, fails) = match op {
        CmpOp::Le => (ah <= bl, al > bh),
        CmpOp::Lt => (ah < bl, al >= bh),
        CmpOp::Ge => (al >= bh, ah < bl),
        CmpOp::Gt => (al > bh, ah <= bl),
        CmpOp::Eq => (al == ah && bl == bh && al == bl, ah < bl || bh < al),
    };
    if holds {
        Some(true)
    } else if fails && !maybe_undef {
        Some(false)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eprog::parse_event_program;
    use crate::expr::VarTable;
    use crate::ground::ground;
    use crate::network::build_unfolded;

    fn setup(src: &str, targets: &[&str], m: usize) -> EventNetwork {
        let vt = VarTable::from_pairs((0..m).map(|i| (format!("x{i}"), 0.5))).unwrap();
        let mut g = ground(&parse_event_program(src).unwrap(), &vt).unwrap();
        g.select_targets(&targets.iter().map(|s| s.to_string()).collect::<Vec<_>>()).unwrap();
        build_unfolded(&g).unwrap()
    }

    fn node_of(net: &EventNetwork, kind: NodeKind) -> NodeId {
        net.nodes.iter().position(|n| n.kind == kind).unwrap() as NodeId
    }

    #[test]
    fn conjunction_absorbs_false() {
        let net = setup("A := x0 & x1\n", &["A"], 2);
        let mut ms = MaskState::new(&net);
        let d = ms.assign(0, false);
        assert_eq!(d, vec![(0, false)]);
        ms.undo(0);
        assert_eq!(ms.target_value(0), None);
        assert!(ms.assign(0, true).is_empty());
    }

    #[test]
    fn sum_bounds_tighten() {
        let net = setup("S := x0 @ 2.0 + x1 @ 3.0\nA := [S <= 10.0]\n", &["A"], 2);
        let s = node_of(&net, NodeKind::Sum);
        let mut ms = MaskState::new(&net);
        let b = |ms: &MaskState, s| match ms.mask(s, 0) {
            Mask::N(a) => (a.lo[0], a.hi[0]),
            _ => unreachable!(),
        };
        assert_eq!(b(&ms, s), (0.0, 5.0));
        ms.assign(0, true);
        assert_eq!(b(&ms, s), (2.0, 5.0));
        ms.assign(1, false);
        assert_eq!(b(&ms, s), (2.0, 2.0));
        assert_eq!(ms.target_value(0), Some(true));
    }

    #[test]
    fn fig4_style_masking() {
        // Phi0 = x0 | x2, Phi1 = x1, Phi3 = !x1 & x3
        let net = setup("P0 := x0 | x2\nP1 := x1\nP3 := !x1 & x3\n", &["P0", "P1", "P3"], 4);
        let mut ms = MaskState::new(&net);
        let mut d = ms.assign(0, true);
        d.extend(ms.assign(1, true));
        d.sort();
        assert_eq!(d, vec![(0, true), (1, true), (2, false)]);
    }

    #[test]
    fn variable_order_prefers_shared_variables() {
        let net = setup("A := x1 & x2\nB := x1 & x3\n", &["A", "B"], 4);
        let mut ms = MaskState::new(&net);
        assert_eq!(ms.next_variable(), Some(1));
        ms.assign(1, true);
        assert_eq!(ms.next_variable(), Some(2));
    }

    #[test]
    fn undefined_operand_makes_comparison_true() {
        let net = setup("A := [x0 @ 2.0 <= x1 @ 5.0]\n", &["A"], 2);
        let mut ms = MaskState::new(&net);
        assert_eq!(ms.target_value(0), Some(true));
        let net = setup("A := [x0 @ 7.0 <= 5.0]\n", &["A"], 1);
        ms = MaskState::new(&net);
        assert_eq!(ms.target_value(0), None);
        assert_eq!(ms.assign(0, false), vec![(0, true)]);
    }
}
