//! Values with the distinguished undefined elements `u` (scalars) and `𝐮` (vectors).

use std::fmt;

use crate::error::TypeError;

/// A real number or `u`. `None` is the undefined element.
pub type ExtScalar = Option<f64>;
/// A feature vector or `𝐮`. `None` is the undefined element.
pub type ExtVector = Option<Vec<f64>>;

/// Static type of an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ty {
    Bool,
    Scalar,
    Vector,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Bool => "bool",
            Ty::Scalar => "scalar",
            Ty::Vector => "vector",
        })
    }
}

/// Comparison operator of an atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Le,
    Ge,
    Eq,
    Lt,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        Some(match s {
            "<=" => CmpOp::Le,
            ">=" => CmpOp::Ge,
            "==" | "=" => CmpOp::Eq,
            "<" => CmpOp::Lt,
            ">" => CmpOp::Gt,
            _ => return None,
        })
    }

    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
        }
    }
}

/// Result of evaluating an expression in one world.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Bool(bool),
    Scalar(ExtScalar),
    Vector(ExtVector),
}

impl Value {
    pub fn ty(&self) -> Ty {
        match self {
            Value::Bool(_) => Ty::Bool,
            Value::Scalar(_) => Ty::Scalar,
            Value::Vector(_) => Ty::Vector,
        }
    }

    pub fn undef(ty: Ty) -> Value {
        match ty {
            Ty::Bool => Value::Bool(false),
            Ty::Scalar => Value::Scalar(None),
            Ty::Vector => Value::Vector(None),
        }
    }

    pub fn is_undef(&self) -> bool {
        matches!(self, Value::Scalar(None) | Value::Vector(None))
    }

    pub fn as_bool(&self) -> Result<bool, TypeError> {
        match self {
            Value::Bool(b) => Ok(*b),
            v => Err(TypeError::new(format!("expected bool, found {}", v.ty()))),
        }
    }

    /// `+` with `u + x = x` and `𝐮 + 𝐱 = 𝐱`.
    pub fn add(&self, other: &Value) -> Result<Value, TypeError> {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Ok(Value::Scalar(match (a, b) {
                (None, x) | (x, None) => *x,
                (Some(a), Some(b)) => Some(a + b),
            })),
            (Value::Vector(a), Value::Vector(b)) => Ok(Value::Vector(match (a, b) {
                (None, x) | (x, None) => x.clone(),
                (Some(a), Some(b)) => Some(vec_add(a, b)?),
            })),
            (a, b) => Err(TypeError::new(format!("cannot add {} and {}", a.ty(), b.ty()))),
        }
    }

    /// `·` with `u · x = u`, `u · 𝐱 = 𝐮`, `a · 𝐮 = 𝐮` and `𝐮 · 𝐱 = u` (dot product).
    pub fn mul(&self, other: &Value) -> Result<Value, TypeError> {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Ok(Value::Scalar(match (a, b) {
                (Some(a), Some(b)) => Some(a * b),
                _ => None,
            })),
            (Value::Scalar(a), Value::Vector(v)) | (Value::Vector(v), Value::Scalar(a)) => {
                Ok(Value::Vector(match (a, v) {
                    (Some(a), Some(v)) => Some(v.iter().map(|x| a * x).collect()),
                    _ => None,
                }))
            }
            (Value::Vector(a), Value::Vector(b)) => Ok(Value::Scalar(match (a, b) {
                (Some(a), Some(b)) => Some(dot(a, b)?),
                _ => None,
            })),
            (a, b) => Err(TypeError::new(format!("cannot multiply {} and {}", a.ty(), b.ty()))),
        }
    }

    /// Inverse with `0⁻¹ = u`.
    pub fn inv(&self) -> Result<Value, TypeError> {
        match self {
            Value::Scalar(a) => Ok(Value::Scalar(scalar_inv(*a))),
            v => Err(TypeError::new(format!("cannot invert {}", v.ty()))),
        }
    }

    pub fn pow(&self, n: i32) -> Result<Value, TypeError> {
        match self {
            Value::Scalar(a) => Ok(Value::Scalar(scalar_pow(*a, n))),
            v => Err(TypeError::new(format!("cannot raise {} to a power", v.ty()))),
        }
    }

    /// Euclidean distance; `u` if either side is `𝐮`.
    pub fn dist(&self, other: &Value) -> Result<Value, TypeError> {
        match (self, other) {
            (Value::Vector(a), Value::Vector(b)) => Ok(Value::Scalar(match (a, b) {
                (Some(a), Some(b)) => Some(euclid(a, b)?),
                _ => None,
            })),
            (a, b) => Err(TypeError::new(format!("dist needs vectors, found {} and {}", a.ty(), b.ty()))),
        }
    }

    /// Atom semantics: TRUE when either side is undefined.
    pub fn compare(&self, op: CmpOp, other: &Value) -> Result<bool, TypeError> {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Ok(match (a, b) {
                (Some(a), Some(b)) => op.holds(*a, *b),
                _ => true,
            }),
            (Value::Vector(a), Value::Vector(b)) if op == CmpOp::Eq => Ok(match (a, b) {
                (Some(a), Some(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x == y),
                _ => true,
            }),
            (a, b) => Err(TypeError::new(format!(
                "cannot compare {} {} {}",
                a.ty(),
                op.symbol(),
                b.ty()
            ))),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Scalar(None) | Value::Vector(None) => f.write_str("u"),
            Value::Scalar(Some(x)) => write!(f, "{}", fmt_num(*x)),
            Value::Vector(Some(v)) => {
                f.write_str("vec(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", fmt_num(*x))?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Shortest round-trippable rendering, always with a decimal point.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

pub fn scalar_inv(a: ExtScalar) -> ExtScalar {
    match a {
        Some(x) if x != 0.0 => Some(1.0 / x),
        _ => None,
    }
}

pub fn scalar_pow(a: ExtScalar, n: i32) -> ExtScalar {
    match a {
        Some(x) if n < 0 && x == 0.0 => None,
        Some(x) => Some(x.powi(n)),
        None => None,
    }
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), TypeError> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(TypeError::new(format!("vector length mismatch: {} vs {}", a.len(), b.len())))
    }
}

fn vec_add(a: &[f64], b: &[f64]) -> Result<Vec<f64>, TypeError> {
    same_len(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| x + y).collect())
}

fn dot(a: &[f64], b: &[f64]) -> Result<f64, TypeError> {
    same_len(a, b)?;
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    Ok(s)
}

/// Euclidean distance; the mask code mirrors this exact operation order.
pub fn euclid(a: &[f64], b: &[f64]) -> Result<f64, TypeError> {
    same_len(a, b)?;
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    Ok(s.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Value {
        Value::Scalar(Some(x))
    }
    const U: Value = Value::Scalar(None);

    #[test]
    fn undefined_scalar_algebra() {
        assert_eq!(U.add(&s(3.0)).unwrap(), s(3.0));
        assert_eq!(s(3.0).add(&U).unwrap(), s(3.0));
        assert_eq!(U.mul(&s(3.0)).unwrap(), U);
        assert_eq!(s(0.0).inv().unwrap(), U);
        // 5 · (3 − 3)⁻¹ = u
        assert_eq!(s(5.0).mul(&s(3.0).add(&s(-3.0)).unwrap().inv().unwrap()).unwrap(), U);
    }

    #[test]
    fn undefined_vector_algebra() {
        let uu = Value::Vector(None);
        let x = Value::Vector(Some(vec![1.0, 2.0]));
        assert_eq!(U.mul(&x).unwrap(), uu);
        assert_eq!(uu.add(&x).unwrap(), x);
        assert_eq!(s(2.0).mul(&uu).unwrap(), uu);
        assert_eq!(uu.mul(&x).unwrap(), U);
        assert_eq!(x.mul(&x).unwrap(), s(5.0));
        assert_eq!(uu.dist(&x).unwrap(), U);
    }

    #[test]
    fn comparisons_with_undefined_hold() {
        assert!(s(2.0).compare(CmpOp::Le, &U).unwrap());
        assert!(U.compare(CmpOp::Gt, &s(2.0)).unwrap());
        assert!(!s(3.0).compare(CmpOp::Le, &s(2.0)).unwrap());
        assert!(s(2.0).dist(&s(1.0)).is_err());
    }

    #[test]
    fn number_rendering_round_trips() {
        for x in [0.0, 1.0, -2.5, 0.1, 1e-300, 123456789.0] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_num(7.0), "7.0");
    }
}
