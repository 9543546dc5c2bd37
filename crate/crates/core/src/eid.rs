//! Event identifiers: a name, dotted version labels and array indices, e.g. `M_{1.(2*i).-1}^{i,l}`.

use std::collections::HashMap;
use std::fmt;

/// Integer index arithmetic over loop counters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IExpr {
    Int(i64),
    Var(String),
    Add(Box<IExpr>, Box<IExpr>),
    Sub(Box<IExpr>, Box<IExpr>),
    Mul(Box<IExpr>, Box<IExpr>),
    Neg(Box<IExpr>),
}

impl IExpr {
    pub fn var(s: &str) -> IExpr {
        IExpr::Var(s.to_string())
    }

    pub fn eval(&self, env: &HashMap<String, i64>) -> Result<i64, String> {
        Ok(match self {
            IExpr::Int(n) => *n,
            IExpr::Var(v) => *env.get(v).ok_or_else(|| format!("unbound index variable `{v}`"))?,
            IExpr::Add(a, b) => a.eval(env)? + b.eval(env)?,
            IExpr::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            IExpr::Mul(a, b) => a.eval(env)? * b.eval(env)?,
            IExpr::Neg(a) => -a.eval(env)?,
        })
    }

    /// Replaces variables bound in `env`, folding constant subterms.
    pub fn subst(&self, env: &HashMap<String, i64>) -> IExpr {
        match self {
            IExpr::Var(v) => env.get(v).map_or_else(|| self.clone(), |n| IExpr::Int(*n)),
            IExpr::Int(_) => self.clone(),
            _ => match Lin::from_iexpr(self) {
                Some(l) => l.subst(env).to_iexpr(),
                None => self.clone(),
            },
        }
    }

    fn prec(&self) -> u8 {
        match self {
            IExpr::Add(..) | IExpr::Sub(..) => 1,
            IExpr::Mul(..) => 2,
            IExpr::Neg(_) => 3,
            IExpr::Int(n) if *n < 0 => 3,
            _ => 4,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.prec() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            IExpr::Int(n) => write!(f, "{n}")?,
            IExpr::Var(v) => f.write_str(v)?,
            IExpr::Add(a, b) => {
                a.write(f, 1)?;
                f.write_str("+")?;
                b.write(f, 2)?;
            }
            IExpr::Sub(a, b) => {
                a.write(f, 1)?;
                f.write_str("-")?;
                b.write(f, 2)?;
            }
            IExpr::Mul(a, b) => {
                a.write(f, 2)?;
                f.write_str("*")?;
                b.write(f, 3)?;
            }
            IExpr::Neg(a) => {
                f.write_str("-")?;
                a.write(f, 4)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }

    /// True for a bare integer or variable (printed without parentheses in labels).
    pub fn is_simple(&self) -> bool {
        matches!(self, IExpr::Int(_) | IExpr::Var(_))
    }
}

impl fmt::Display for IExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

/// Linear form `Σ c_v·v + k`, used to build and normalise label arithmetic.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Lin {
    pub terms: Vec<(String, i64)>,
    pub k: i64,
}

impl Lin {
    pub fn konst(k: i64) -> Lin {
        Lin { terms: vec![], k }
    }

    pub fn var(v: &str) -> Lin {
        Lin { terms: vec![(v.to_string(), 1)], k: 0 }
    }

    pub fn add(mut self, o: &Lin) -> Lin {
        for (v, c) in &o.terms {
            match self.terms.iter_mut().find(|(w, _)| w == v) {
                Some(t) => t.1 += c,
                None => self.terms.push((v.clone(), *c)),
            }
        }
        self.k += o.k;
        self.terms.retain(|(_, c)| *c != 0);
        self
    }

    pub fn scale(mut self, s: i64) -> Lin {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.k *= s;
        self.terms.retain(|(_, c)| *c != 0);
        self
    }

    pub fn plus(self, k: i64) -> Lin {
        self.add(&Lin::konst(k))
    }

    pub fn as_const(&self) -> Option<i64> {
        self.terms.is_empty().then_some(self.k)
    }

    pub fn from_iexpr(e: &IExpr) -> Option<Lin> {
        Some(match e {
            IExpr::Int(n) => Lin::konst(*n),
            IExpr::Var(v) => Lin::var(v),
            IExpr::Add(a, b) => Lin::from_iexpr(a)?.add(&Lin::from_iexpr(b)?),
            IExpr::Sub(a, b) => Lin::from_iexpr(a)?.add(&Lin::from_iexpr(b)?.scale(-1)),
            IExpr::Neg(a) => Lin::from_iexpr(a)?.scale(-1),
            IExpr::Mul(a, b) => {
                let (a, b) = (Lin::from_iexpr(a)?, Lin::from_iexpr(b)?);
                match (a.as_const(), b.as_const()) {
                    (Some(c), _) => b.scale(c),
                    (_, Some(c)) => a.scale(c),
                    _ => return None,
                }
            }
        })
    }

    pub fn subst(&self, env: &HashMap<String, i64>) -> Lin {
        let mut out = Lin::konst(self.k);
        for (v, c) in &self.terms {
            match env.get(v) {
                Some(n) => out.k += c * n,
                None => out = out.add(&Lin { terms: vec![(v.clone(), *c)], k: 0 }),
            }
        }
        out
    }

    /// Canonical tree: terms in order, then the constant (`2*i-1`, `j`, `-1`).
    pub fn to_iexpr(&self) -> IExpr {
        let mut acc: Option<IExpr> = None;
        for (v, c) in &self.terms {
            let mag = c.unsigned_abs() as i64;
            let t = if mag == 1 {
                IExpr::Var(v.clone())
            } else {
                IExpr::Mul(Box::new(IExpr::Int(mag)), Box::new(IExpr::Var(v.clone())))
            };
            acc = Some(match (acc, *c < 0) {
                (None, false) => t,
                (None, true) => IExpr::Neg(Box::new(t)),
                (Some(a), false) => IExpr::Add(Box::new(a), Box::new(t)),
                (Some(a), true) => IExpr::Sub(Box::new(a), Box::new(t)),
            });
        }
        match acc {
            None => IExpr::Int(self.k),
            Some(a) if self.k > 0 => IExpr::Add(Box::new(a), Box::new(IExpr::Int(self.k))),
            Some(a) if self.k < 0 => IExpr::Sub(Box::new(a), Box::new(IExpr::Int(-self.k))),
            Some(a) => a,
        }
    }
}

/// Symbolic event identifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EidPat {
    pub name: String,
    pub label: Vec<IExpr>,
    pub index: Vec<IExpr>,
}

impl EidPat {
    pub fn plain(name: &str) -> EidPat {
        EidPat { name: name.to_string(), label: vec![], index: vec![] }
    }

    pub fn is_plain(&self) -> bool {
        self.label.is_empty() && self.index.is_empty()
    }

    /// Grounded identifier string under `env`.
    pub fn ground(&self, env: &HashMap<String, i64>) -> Result<String, String> {
        let label = self.label.iter().map(|e| e.eval(env)).collect::<Result<Vec<_>, _>>()?;
        let index = self.index.iter().map(|e| e.eval(env)).collect::<Result<Vec<_>, _>>()?;
        Ok(eid_string(&self.name, &label, &index))
    }

    pub fn subst(&self, env: &HashMap<String, i64>) -> EidPat {
        EidPat {
            name: self.name.clone(),
            label: self.label.iter().map(|e| e.subst(env)).collect(),
            index: self.index.iter().map(|e| e.subst(env)).collect(),
        }
    }
}

impl fmt::Display for EidPat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.label.is_empty() {
            f.write_str("_{")?;
            for (i, c) in self.label.iter().enumerate() {
                if i > 0 {
                    f.write_str(".")?;
                }
                if c.is_simple() {
                    write!(f, "{c}")?;
                } else {
                    write!(f, "({c})")?;
                }
            }
            f.write_str("}")?;
        }
        if !self.index.is_empty() {
            f.write_str("^{")?;
            for (i, c) in self.index.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

/// Canonical grounded identifier text.
pub fn eid_string(name: &str, label: &[i64], index: &[i64]) -> String {
    let mut s = name.to_string();
    if !label.is_empty() {
        s.push_str("_{");
        s.push_str(&label.iter().map(i64::to_string).collect::<Vec<_>>().join("."));
        s.push('}');
    }
    if !index.is_empty() {
        s.push_str("^{");
        s.push_str(&index.iter().map(i64::to_string).collect::<Vec<_>>().join(","));
        s.push('}');
    }
    s
}

/// Splits a grounded identifier into name, label and index (inverse of `eid_string`).
pub fn split_eid(s: &str) -> Option<(String, Vec<i64>, Vec<i64>)> {
    let (head, index) = match s.find("^{") {
        Some(p) => (&s[..p], parse_ints(s[p + 2..].strip_suffix('}')?, ',')?),
        None => (s, vec![]),
    };
    let (name, label) = match head.find("_{") {
        Some(p) => (&head[..p], parse_ints(head[p + 2..].strip_suffix('}')?, '.')?),
        None => (head, vec![]),
    };
    Some((name.to_string(), label, index))
}

fn parse_ints(s: &str, sep: char) -> Option<Vec<i64>> {
    s.split(sep).map(|p| p.trim().parse().ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_forms_render_canonically() {
        let two_i = Lin::var("i").scale(2);
        assert_eq!(two_i.clone().to_iexpr().to_string(), "2*i");
        assert_eq!(two_i.clone().plus(-1).to_iexpr().to_string(), "2*i-1");
        assert_eq!(two_i.plus(1).to_iexpr().to_string(), "2*i+1");
        assert_eq!(Lin::konst(-1).to_iexpr().to_string(), "-1");
        assert_eq!(Lin::var("j").plus(-1).to_iexpr().to_string(), "j-1");
    }

    #[test]
    fn eid_display_and_grounding() {
        let p = EidPat {
            name: "M".into(),
            label: vec![IExpr::Int(1), Lin::var("i").scale(2).to_iexpr(), IExpr::Int(-1)],
            index: vec![IExpr::var("i"), IExpr::var("l")],
        };
        assert_eq!(p.to_string(), "M_{1.(2*i).-1}^{i,l}");
        let env = HashMap::from([("i".to_string(), 1), ("l".to_string(), 3)]);
        let g = p.ground(&env).unwrap();
        assert_eq!(g, "M_{1.2.-1}^{1,3}");
        assert_eq!(split_eid(&g).unwrap(), ("M".to_string(), vec![1, 2, -1], vec![1, 3]));
    }

    #[test]
    fn subst_folds_constants() {
        let e = Lin::var("i").scale(2).plus(1).to_iexpr();
        let env = HashMap::from([("i".to_string(), 1)]);
        assert_eq!(e.subst(&env), IExpr::Int(3));
    }
}
