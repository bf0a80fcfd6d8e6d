//! Exact symbolic scalar fields on chart coordinates.
//!
//! Every field the engine touches (metric entries, distribution spans,
//! conformal factors) is an immutable expression tree over coordinates
//! `x0..x{n-1}`. Differentiation is exact and structural, so curvature
//! and divergence computations downstream never rely on finite
//! differences. Trees are reference counted and freely shared across
//! threads.

mod parse;

pub use parse::parse_expr;

use crate::error::{GeomError, Result};
use std::fmt;
use std::sync::Arc;

/// Exponent of a power node, kept exact.
///
/// Invariant: `den > 0` and `gcd(num, den) == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "rational exponent with zero denominator");
        let (mut num, mut den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd(num.unsigned_abs(), den.unsigned_abs());
        if g > 1 {
            num /= g as i64;
            den /= g as i64;
        }
        Rational { num, den }
    }

    pub fn integer(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exponent decremented by one, used by the power rule.
    fn minus_one(&self) -> Self {
        Rational::new(self.num - self.den, self.den)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, PartialEq)]
enum Node {
    Const(f64),
    Coord(usize),
    Neg(ScalarExpr),
    Add(ScalarExpr, ScalarExpr),
    Mul(ScalarExpr, ScalarExpr),
    Div(ScalarExpr, ScalarExpr),
    Pow(ScalarExpr, Rational),
    Exp(ScalarExpr),
    Log(ScalarExpr),
    Sin(ScalarExpr),
    Cos(ScalarExpr),
    Sinh(ScalarExpr),
    Cosh(ScalarExpr),
    Sqrt(ScalarExpr),
}

/// Immutable scalar expression; cloning shares the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr(Arc<Node>);

impl ScalarExpr {
    pub fn constant(c: f64) -> Self {
        ScalarExpr(Arc::new(Node::Const(c)))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn coord(axis: usize) -> Self {
        ScalarExpr(Arc::new(Node::Coord(axis)))
    }

    fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    // Constructors fold constants eagerly. Folding performs the identical
    // f64 operation the evaluator would, so folded and unfolded trees
    // evaluate bit-for-bit equal.

    pub fn neg(&self) -> Self {
        match &*self.0 {
            Node::Const(c) => Self::constant(-c),
            Node::Neg(e) => e.clone(),
            _ => ScalarExpr(Arc::new(Node::Neg(self.clone()))),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Self::constant(a + b),
            (Some(0.0), None) => rhs.clone(),
            (None, Some(0.0)) => self.clone(),
            _ => ScalarExpr(Arc::new(Node::Add(self.clone(), rhs.clone()))),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Self::constant(a * b),
            (Some(0.0), None) | (None, Some(0.0)) => Self::zero(),
            (Some(1.0), None) => rhs.clone(),
            (None, Some(1.0)) => self.clone(),
            _ => ScalarExpr(Arc::new(Node::Mul(self.clone(), rhs.clone()))),
        }
    }

    pub fn div(&self, rhs: &Self) -> Self {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => Self::constant(a / b),
            (Some(0.0), None) => Self::zero(),
            (None, Some(1.0)) => self.clone(),
            _ => ScalarExpr(Arc::new(Node::Div(self.clone(), rhs.clone()))),
        }
    }

    pub fn pow(&self, exponent: Rational) -> Self {
        if exponent.num == 0 {
            return Self::one();
        }
        if exponent == Rational::integer(1) {
            return self.clone();
        }
        if let Some(c) = self.as_const() {
            if let Some(v) = pow_value(c, exponent) {
                return Self::constant(v);
            }
        }
        ScalarExpr(Arc::new(Node::Pow(self.clone(), exponent)))
    }

    pub fn powi(&self, n: i64) -> Self {
        self.pow(Rational::integer(n))
    }

    pub fn exp(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.exp()),
            None => ScalarExpr(Arc::new(Node::Exp(self.clone()))),
        }
    }

    pub fn log(&self) -> Self {
        match self.as_const() {
            Some(c) if c > 0.0 => Self::constant(c.ln()),
            _ => ScalarExpr(Arc::new(Node::Log(self.clone()))),
        }
    }

    pub fn sin(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.sin()),
            None => ScalarExpr(Arc::new(Node::Sin(self.clone()))),
        }
    }

    pub fn cos(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.cos()),
            None => ScalarExpr(Arc::new(Node::Cos(self.clone()))),
        }
    }

    pub fn sinh(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.sinh()),
            None => ScalarExpr(Arc::new(Node::Sinh(self.clone()))),
        }
    }

    pub fn cosh(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.cosh()),
            None => ScalarExpr(Arc::new(Node::Cosh(self.clone()))),
        }
    }

    pub fn sqrt(&self) -> Self {
        match self.as_const() {
            Some(c) if c >= 0.0 => Self::constant(c.sqrt()),
            _ => ScalarExpr(Arc::new(Node::Sqrt(self.clone()))),
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match &*self.0 {
            Node::Const(_) => None,
            Node::Coord(i) => Some(*i),
            Node::Neg(u)
            | Node::Pow(u, _)
            | Node::Exp(u)
            | Node::Log(u)
            | Node::Sin(u)
            | Node::Cos(u)
            | Node::Sinh(u)
            | Node::Cosh(u)
            | Node::Sqrt(u) => u.max_coord(),
            Node::Add(u, v) | Node::Mul(u, v) | Node::Div(u, v) => {
                match (u.max_coord(), v.max_coord()) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                }
            }
        }
    }

    /// Replace each coordinate `x{i}` by `subs[i]`; the substitution
    /// composes expression trees, e.g. pulling a metric entry back
    /// through a map.
    pub fn substitute(&self, subs: &[ScalarExpr]) -> Result<Self> {
        Ok(match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Coord(i) => subs
                .get(*i)
                .cloned()
                .ok_or(GeomError::CoordinateOutOfRange {
                    axis: *i,
                    dim: subs.len(),
                })?,
            Node::Neg(u) => u.substitute(subs)?.neg(),
            Node::Add(u, v) => u.substitute(subs)?.add(&v.substitute(subs)?),
            Node::Mul(u, v) => u.substitute(subs)?.mul(&v.substitute(subs)?),
            Node::Div(u, v) => u.substitute(subs)?.div(&v.substitute(subs)?),
            Node::Pow(u, r) => u.substitute(subs)?.pow(*r),
            Node::Exp(u) => u.substitute(subs)?.exp(),
            Node::Log(u) => u.substitute(subs)?.log(),
            Node::Sin(u) => u.substitute(subs)?.sin(),
            Node::Cos(u) => u.substitute(subs)?.cos(),
            Node::Sinh(u) => u.substitute(subs)?.sinh(),
            Node::Cosh(u) => u.substitute(subs)?.cosh(),
            Node::Sqrt(u) => u.substitute(subs)?.sqrt(),
        })
    }

    /// Evaluate at a point. Domain violations are reported, never NaN.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        let guard = |op: &'static str, value: f64| GeomError::DomainGuardViolated {
            op,
            value,
            point: point.to_vec(),
        };
        match &*self.0 {
            Node::Const(c) => Ok(*c),
            Node::Coord(i) => {
                if *i < point.len() {
                    Ok(point[*i])
                } else {
                    Err(GeomError::CoordinateOutOfRange {
                        axis: *i,
                        dim: point.len(),
                    })
                }
            }
            Node::Neg(u) => Ok(-u.eval(point)?),
            Node::Add(u, v) => Ok(u.eval(point)? + v.eval(point)?),
            Node::Mul(u, v) => Ok(u.eval(point)? * v.eval(point)?),
            Node::Div(u, v) => {
                let d = v.eval(point)?;
                if d == 0.0 {
                    return Err(guard("div", d));
                }
                Ok(u.eval(point)? / d)
            }
            Node::Pow(u, r) => {
                let b = u.eval(point)?;
                pow_value(b, *r).ok_or_else(|| guard("pow", b))
            }
            Node::Exp(u) => Ok(u.eval(point)?.exp()),
            Node::Log(u) => {
                let a = u.eval(point)?;
                if a <= 0.0 {
                    return Err(guard("log", a));
                }
                Ok(a.ln())
            }
            Node::Sin(u) => Ok(u.eval(point)?.sin()),
            Node::Cos(u) => Ok(u.eval(point)?.cos()),
            Node::Sinh(u) => Ok(u.eval(point)?.sinh()),
            Node::Cosh(u) => Ok(u.eval(point)?.cosh()),
            Node::Sqrt(u) => {
                let a = u.eval(point)?;
                if a < 0.0 {
                    return Err(guard("sqrt", a));
                }
                Ok(a.sqrt())
            }
        }
    }

    /// Exact partial derivative with respect to `x{axis}`.
    pub fn differentiate(&self, axis: usize) -> Self {
        match &*self.0 {
            Node::Const(_) => Self::zero(),
            Node::Coord(i) => {
                if *i == axis {
                    Self::one()
                } else {
                    Self::zero()
                }
            }
            Node::Neg(u) => u.differentiate(axis).neg(),
            Node::Add(u, v) => u.differentiate(axis).add(&v.differentiate(axis)),
            // Product rule: (uv)' = u'v + uv'
            Node::Mul(u, v) => u
                .differentiate(axis)
                .mul(v)
                .add(&u.mul(&v.differentiate(axis))),
            // Quotient rule: (u/v)' = (u'v - uv') / v^2
            Node::Div(u, v) => u
                .differentiate(axis)
                .mul(v)
                .sub(&u.mul(&v.differentiate(axis)))
                .div(&v.powi(2)),
            // Power rule with exact rational exponent.
            Node::Pow(u, r) => Self::constant(r.as_f64())
                .mul(&u.pow(r.minus_one()))
                .mul(&u.differentiate(axis)),
            Node::Exp(u) => self.clone().mul(&u.differentiate(axis)),
            Node::Log(u) => u.differentiate(axis).div(u),
            Node::Sin(u) => u.cos().mul(&u.differentiate(axis)),
            Node::Cos(u) => u.sin().neg().mul(&u.differentiate(axis)),
            Node::Sinh(u) => u.cosh().mul(&u.differentiate(axis)),
            Node::Cosh(u) => u.sinh().mul(&u.differentiate(axis)),
            Node::Sqrt(u) => u
                .differentiate(axis)
                .div(&Self::constant(2.0).mul(&u.sqrt())),
        }
    }
}

/// Shared power semantics for evaluation and constant folding.
/// Returns None on a domain violation.
fn pow_value(base: f64, r: Rational) -> Option<f64> {
    if r.is_integer() {
        if base == 0.0 && r.num < 0 {
            return None;
        }
        // i32 saturation is fine: |exponents| in practice are tiny.
        return Some(base.powi(r.num.clamp(i32::MIN as i64, i32::MAX as i64) as i32));
    }
    if base > 0.0 {
        Some(base.powf(r.as_f64()))
    } else if base == 0.0 && r.num > 0 {
        Some(0.0)
    } else {
        None
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => write!(f, "{c}"),
            Node::Coord(i) => write!(f, "x{i}"),
            Node::Neg(u) => write!(f, "-({u})"),
            Node::Add(u, v) => write!(f, "({u} + {v})"),
            Node::Mul(u, v) => write!(f, "({u} * {v})"),
            Node::Div(u, v) => write!(f, "({u} / {v})"),
            Node::Pow(u, r) => {
                if r.is_integer() {
                    write!(f, "({u})^{}", r.num)
                } else {
                    write!(f, "({u})^({}/{})", r.num, r.den)
                }
            }
            Node::Exp(u) => write!(f, "exp({u})"),
            Node::Log(u) => write!(f, "log({u})"),
            Node::Sin(u) => write!(f, "sin({u})"),
            Node::Cos(u) => write!(f, "cos({u})"),
            Node::Sinh(u) => write!(f, "sinh({u})"),
            Node::Cosh(u) => write!(f, "cosh({u})"),
            Node::Sqrt(u) => write!(f, "sqrt({u})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> ScalarExpr {
        ScalarExpr::coord(0)
    }

    #[test]
    fn derivative_of_square_at_three() {
        let d = x().powi(2).differentiate(0);
        assert_eq!(d.eval(&[3.0]).unwrap(), 6.0);
    }

    #[test]
    fn derivative_of_sine_at_zero() {
        let d = x().sin().differentiate(0);
        assert_eq!(d.eval(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn derivative_of_log_warp_factor() {
        // d/dt log(2 + sin t) = cos t / (2 + sin t), value 1/2 at t = 0.
        let f = ScalarExpr::constant(2.0).add(&x().sin()).log();
        let d = f.differentiate(0);
        assert_eq!(d.eval(&[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn log_guard_fires_at_zero() {
        let e = x().log();
        match e.eval(&[0.0]) {
            Err(GeomError::DomainGuardViolated { op: "log", .. }) => {}
            other => panic!("expected log guard, got {other:?}"),
        }
    }

    #[test]
    fn sqrt_guard_fires_on_negative() {
        let e = x().sqrt();
        assert!(matches!(
            e.eval(&[-1.0]),
            Err(GeomError::DomainGuardViolated { op: "sqrt", .. })
        ));
        assert_eq!(e.eval(&[4.0]).unwrap(), 2.0);
    }

    #[test]
    fn division_by_zero_guard() {
        let e = ScalarExpr::one().div(&x());
        assert!(matches!(
            e.eval(&[0.0]),
            Err(GeomError::DomainGuardViolated { op: "div", .. })
        ));
    }

    #[test]
    fn fractional_power_guard_and_value() {
        let e = x().pow(Rational::new(3, 2));
        assert!((e.eval(&[2.0]).unwrap() - 2.0f64.powf(1.5)).abs() < 1e-15);
        assert!(matches!(
            e.eval(&[-1.0]),
            Err(GeomError::DomainGuardViolated { op: "pow", .. })
        ));
    }

    #[test]
    fn integer_power_of_negative_base_is_fine() {
        let e = x().powi(3);
        assert_eq!(e.eval(&[-2.0]).unwrap(), -8.0);
    }

    #[test]
    fn power_rule_with_rational_exponent() {
        // d/dx x^(1/2) = 1/(2 sqrt x): 0.25 at x = 4.
        let d = x().pow(Rational::new(1, 2)).differentiate(0);
        assert!((d.eval(&[4.0]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn chain_rule_through_exp() {
        // d/dx exp(x^2) = 2x exp(x^2).
        let d = x().powi(2).exp().differentiate(0);
        let x0 = 0.7f64;
        let expected = 2.0 * x0 * (x0 * x0).exp();
        assert!((d.eval(&[x0]).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn hyperbolic_derivatives() {
        let dsinh = x().sinh().differentiate(0);
        let dcosh = x().cosh().differentiate(0);
        let t = 0.3;
        assert!((dsinh.eval(&[t]).unwrap() - t.cosh()).abs() < 1e-15);
        assert!((dcosh.eval(&[t]).unwrap() - t.sinh()).abs() < 1e-15);
    }

    #[test]
    fn constant_folding_matches_unfolded_evaluation() {
        // Folding uses the same f64 ops as eval, so values are identical.
        let folded = ScalarExpr::constant(2.0)
            .mul(&ScalarExpr::constant(3.0))
            .add(&ScalarExpr::constant(0.25).sin());
        assert_eq!(folded.eval(&[]).unwrap(), 2.0 * 3.0 + 0.25f64.sin());
        assert!(folded.as_const().is_some());
    }

    #[test]
    fn zero_and_one_elimination() {
        let e = x().mul(&ScalarExpr::one()).add(&ScalarExpr::zero());
        assert_eq!(e, x());
        assert!(x().mul(&ScalarExpr::zero()).is_zero());
    }

    #[test]
    fn rational_reduction_and_sign() {
        let r = Rational::new(4, -6);
        assert_eq!((r.num, r.den), (-2, 3));
        assert!(Rational::new(9, 3).is_integer());
    }

    #[test]
    fn max_coord_tracks_both_branches() {
        let e = ScalarExpr::coord(2).mul(&x().sin());
        assert_eq!(e.max_coord(), Some(2));
        assert_eq!(ScalarExpr::one().max_coord(), None);
    }

    #[test]
    fn substitution_composes_trees() {
        // f(x0, x1) = x0^2 + sin(x1); substitute x0 = x1*x1, x1 = exp(x0).
        let f = x().powi(2).add(&ScalarExpr::coord(1).sin());
        let subs = [ScalarExpr::coord(1).mul(&ScalarExpr::coord(1)), x().exp()];
        let g = f.substitute(&subs).unwrap();
        let (a, b) = (0.3f64, 0.8f64);
        let expected = (b * b).powi(2) + a.exp().sin();
        assert!((g.eval(&[a, b]).unwrap() - expected).abs() < 1e-15);
        // Derivatives flow through the substituted tree.
        let dg = g.differentiate(0);
        let h = 1e-6;
        let fd = (g.eval(&[a + h, b]).unwrap() - g.eval(&[a - h, b]).unwrap()) / (2.0 * h);
        assert!((dg.eval(&[a, b]).unwrap() - fd).abs() < 1e-8);
        // Out-of-range coordinate in the substitution list is an error.
        assert!(matches!(
            ScalarExpr::coord(5).substitute(&subs),
            Err(GeomError::CoordinateOutOfRange { axis: 5, dim: 2 })
        ));
    }

    #[test]
    fn coordinate_out_of_range_is_reported() {
        let e = ScalarExpr::coord(3);
        assert!(matches!(
            e.eval(&[0.0, 0.0]),
            Err(GeomError::CoordinateOutOfRange { axis: 3, dim: 2 })
        ));
    }

    #[test]
    fn expressions_are_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<ScalarExpr>();
    }

    #[test]
    fn shared_evaluation_across_threads() {
        let e = x().sin().mul(&x().cos()).exp();
        let expected = e.eval(&[0.4]).unwrap();
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let e = e.clone();
                std::thread::spawn(move || e.eval(&[0.4]).unwrap())
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), expected);
        }
    }
}
