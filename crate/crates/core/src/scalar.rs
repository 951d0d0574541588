//! Coefficient fields used throughout: exact rationals, IEEE doubles, and
//! forward-mode duals carrying first-order sensitivities (nestable).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub type Q = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Exact,
    Floating,
}

pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const KIND: ScalarKind;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(n: i64) -> Self;
    fn from_ratio(p: i64, q: i64) -> Self {
        Self::from_i64(p) / Self::from_i64(q)
    }
    /// Lossy embedding of a double. Exact scalars convert the binary value exactly.
    fn from_f64(x: f64) -> Self;
    /// Primal value as a double.
    fn to_f64(&self) -> f64;
    /// True when the primal value is exactly zero.
    fn is_zero(&self) -> bool;
    /// True when the value and every carried sensitivity are exactly zero,
    /// i.e. the quantity may be dropped from a sum without changing anything.
    fn is_exact_zero(&self) -> bool {
        Self::KIND == ScalarKind::Exact && self.is_zero()
    }
    /// Real cube root, `sign(x)|x|^(1/3)`. `None` when not representable.
    fn cbrt(&self) -> Option<Self>;
    fn sqrt(&self) -> Option<Self>;

    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return Self::one() / self.powi(-n);
        }
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    fn recip(&self) -> Self {
        Self::one() / self.clone()
    }

    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Floating;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn from_ratio(p: i64, q: i64) -> Self {
        p as f64 / q as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_exact_zero(&self) -> bool {
        *self == 0.0
    }
    fn cbrt(&self) -> Option<Self> {
        Some(f64::cbrt(*self))
    }
    fn sqrt(&self) -> Option<Self> {
        if *self < 0.0 {
            None
        } else {
            Some(f64::sqrt(*self))
        }
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

/// Double-double floating scalar (about 32 significant digits), for
/// pipelines whose cancellations exhaust double precision.
///
/// Wraps `twofloat::TwoFloat` for addition, multiplication and roots, but
/// divides by long division with two correction steps: the crate's own
/// quotient is only accurate to double precision.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DD(pub twofloat::TwoFloat);

impl Add for DD {
    type Output = DD;
    fn add(self, rhs: DD) -> DD {
        DD(self.0 + rhs.0)
    }
}

impl Sub for DD {
    type Output = DD;
    fn sub(self, rhs: DD) -> DD {
        DD(self.0 - rhs.0)
    }
}

impl Mul for DD {
    type Output = DD;
    fn mul(self, rhs: DD) -> DD {
        DD(self.0 * rhs.0)
    }
}

impl Div for DD {
    type Output = DD;
    fn div(self, rhs: DD) -> DD {
        let b = rhs.0;
        let q1 = self.0.hi() / b.hi();
        let r = self.0 - b * q1;
        let q2 = r.hi() / b.hi();
        let r = r - b * q2;
        let q3 = r.hi() / b.hi();
        DD(twofloat::TwoFloat::from(q1) + q2 + q3)
    }
}

impl Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD(-self.0)
    }
}

impl Scalar for DD {
    const KIND: ScalarKind = ScalarKind::Floating;
    fn zero() -> Self {
        DD(0.0.into())
    }
    fn one() -> Self {
        DD(1.0.into())
    }
    fn from_i64(n: i64) -> Self {
        DD(n.into())
    }
    fn from_f64(x: f64) -> Self {
        DD(x.into())
    }
    fn to_f64(&self) -> f64 {
        self.0.hi() + self.0.lo()
    }
    fn is_zero(&self) -> bool {
        self.0.hi() == 0.0 && self.0.lo() == 0.0
    }
    fn is_exact_zero(&self) -> bool {
        Scalar::is_zero(self)
    }
    fn cbrt(&self) -> Option<Self> {
        // the Newton step divides by the square of the estimate
        Some(if Scalar::is_zero(self) { *self } else { DD(self.0.cbrt()) })
    }
    fn sqrt(&self) -> Option<Self> {
        if self.0.hi() < 0.0 {
            None
        } else {
            Some(DD(self.0.sqrt()))
        }
    }
}

fn exact_root(n: &BigInt, k: u32) -> Option<BigInt> {
    let r = if k == 3 { n.cbrt() } else { n.sqrt() };
    if num_traits::pow(r.clone(), k as usize) == *n {
        Some(r)
    } else {
        None
    }
}

impl Scalar for Q {
    const KIND: ScalarKind = ScalarKind::Exact;
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(n: i64) -> Self {
        Q::from_integer(n.into())
    }
    fn from_ratio(p: i64, q: i64) -> Self {
        Q::new(p.into(), q.into())
    }
    fn from_f64(x: f64) -> Self {
        Q::from_float(x).expect("finite double")
    }
    fn to_f64(&self) -> f64 {
        self.to_f64_lossy()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn cbrt(&self) -> Option<Self> {
        let n = exact_root(self.numer(), 3)?;
        let d = exact_root(self.denom(), 3)?;
        Some(Q::new(n, d))
    }
    fn sqrt(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let n = exact_root(self.numer(), 2)?;
        let d = exact_root(self.denom(), 2)?;
        Some(Q::new(n, d))
    }
}

pub trait LossyF64 {
    fn to_f64_lossy(&self) -> f64;
}

impl LossyF64 for Q {
    fn to_f64_lossy(&self) -> f64 {
        if let Some(x) = ToPrimitive::to_f64(self) {
            if x.is_finite() {
                return x;
            }
        }
        // Huge numerator/denominator: scale down by bit lengths first.
        let nb = self.numer().bits() as i64;
        let db = self.denom().bits() as i64;
        let shift = nb - db;
        let n: BigInt = self.numer().clone();
        let d: BigInt = self.denom().clone();
        let (n, d) = if shift > 0 {
            (n, d << (shift as usize))
        } else {
            (n << ((-shift) as usize), d)
        };
        let m = ToPrimitive::to_f64(&Q::new(n, d)).unwrap_or(f64::NAN);
        m * 2f64.powi(shift as i32)
    }
}

/// Forward-mode dual number: a primal value plus a gradient with one slot per
/// seeded input. Missing trailing slots are zero, so constants carry an empty
/// gradient. Nesting (`Dual<Dual<f64>>`) yields second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual<S> {
    pub re: S,
    pub eps: Vec<S>,
}

impl<S: Scalar> Dual<S> {
    pub fn constant(re: S) -> Self {
        Dual { re, eps: Vec::new() }
    }

    /// Input variable number `slot` out of `n`.
    pub fn variable(re: S, slot: usize, n: usize) -> Self {
        let mut eps = vec![S::zero(); n];
        eps[slot] = S::one();
        Dual { re, eps }
    }

    pub fn grad(&self, slot: usize) -> S {
        self.eps.get(slot).cloned().unwrap_or_else(S::zero)
    }

    fn zip(a: &[S], b: &[S], f: impl Fn(&S, &S) -> S) -> Vec<S> {
        let n = a.len().max(b.len());
        let z = S::zero();
        (0..n)
            .map(|i| f(a.get(i).unwrap_or(&z), b.get(i).unwrap_or(&z)))
            .collect()
    }

    /// Chain rule for a unary map with derivative `d` at the primal value.
    fn chain(&self, re: S, d: S) -> Self {
        Dual {
            re,
            eps: self.eps.iter().map(|e| e.clone() * d.clone()).collect(),
        }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual {
            re: self.re + o.re,
            eps: Self::zip(&self.eps, &o.eps, |a, b| a.clone() + b.clone()),
        }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual {
            re: self.re - o.re,
            eps: Self::zip(&self.eps, &o.eps, |a, b| a.clone() - b.clone()),
        }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let eps = Self::zip(&self.eps, &o.eps, |a, b| {
            a.clone() * o.re.clone() + self.re.clone() * b.clone()
        });
        Dual { re: self.re * o.re, eps }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = o.re.recip();
        let q = self.re.clone() * inv.clone();
        let eps = Self::zip(&self.eps, &o.eps, |a, b| {
            (a.clone() - q.clone() * b.clone()) * inv.clone()
        });
        Dual { re: q, eps }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            eps: self.eps.into_iter().map(|e| -e).collect(),
        }
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    const KIND: ScalarKind = S::KIND;
    fn zero() -> Self {
        Dual::constant(S::zero())
    }
    fn one() -> Self {
        Dual::constant(S::one())
    }
    fn from_i64(n: i64) -> Self {
        Dual::constant(S::from_i64(n))
    }
    fn from_ratio(p: i64, q: i64) -> Self {
        Dual::constant(S::from_ratio(p, q))
    }
    fn from_f64(x: f64) -> Self {
        Dual::constant(S::from_f64(x))
    }
    fn to_f64(&self) -> f64 {
        self.re.to_f64()
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero()
    }
    fn is_exact_zero(&self) -> bool {
        self.re.is_exact_zero() && self.eps.iter().all(|e| e.is_exact_zero())
    }
    fn cbrt(&self) -> Option<Self> {
        let r = self.re.cbrt()?;
        // d/dx x^(1/3) = 1 / (3 r^2)
        let d = (S::from_i64(3) * r.clone() * r.clone()).recip();
        Some(self.chain(r, d))
    }
    fn sqrt(&self) -> Option<Self> {
        let r = self.re.sqrt()?;
        let d = (S::from_i64(2) * r.clone()).recip();
        Some(self.chain(r, d))
    }
}

/// `x^(p/3)` with the real-cube-root convention: `(x^(1/3))^p`.
pub fn pow_third<S: Scalar>(x: &S, p: i32) -> Option<S> {
    Some(x.cbrt()?.powi(p))
}

/// Relative difference `|a - b| / max(1, |a|, |b|)`.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

pub fn q(p: i64, d: i64) -> Q {
    Q::new(p.into(), d.into())
}

pub fn qi(p: i64) -> Q {
    Q::from_integer(p.into())
}

/// Parse `"p/q"` or an integer string as an exact rational.
pub fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().ok()?;
    let d: BigInt = d.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Q::new(n, d))
}

pub fn format_rational(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// 17 significant digits, round-trip safe.
pub fn format_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_cube_root_only_for_perfect_cubes() {
        assert_eq!(Scalar::cbrt(&q(-8, 27)), Some(q(-2, 3)));
        assert_eq!(Scalar::cbrt(&q(2, 1)), None);
        assert_eq!(Scalar::sqrt(&q(9, 4)), Some(q(3, 2)));
        assert_eq!(Scalar::sqrt(&q(-9, 4)), None);
    }

    #[test]
    fn real_cube_root_of_negative_double() {
        let r = Scalar::cbrt(&-27.0f64).unwrap();
        assert!((r + 3.0).abs() < 1e-15);
        assert!((pow_third(&-8.0f64, 2).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn double_double_roots_and_precision() {
        let two = DD::from_i64(2);
        let r = Scalar::cbrt(&two).unwrap();
        assert!((r * r * r - two).to_f64().abs() < 1e-30);
        assert_eq!(Scalar::cbrt(&DD::zero()).map(|v| v.to_f64()), Some(0.0));
        assert!((Scalar::cbrt(&-DD::from_i64(27)).unwrap().to_f64() + 3.0).abs() < 1e-15);
        assert!(Scalar::sqrt(&-two).is_none());
        // 1 + 1e-20 survives in double-double but not in a double
        let tiny = DD::from_f64(1e-20);
        assert_eq!((DD::one() + tiny - DD::one()).to_f64(), 1e-20);
        let x = DD::from_f64(0.3159) / DD::from_i64(3);
        let back = (DD::one() / x) * x - DD::one();
        assert!(back.to_f64().abs() < 1e-30, "{:e}", back.to_f64());
    }

    #[test]
    fn dual_product_and_quotient_rules() {
        let x = Dual::variable(3.0, 0, 2);
        let y = Dual::variable(2.0, 1, 2);
        let f = x.clone() * x.clone() / y.clone();
        assert!((f.re - 4.5).abs() < 1e-15);
        assert!((f.grad(0) - 3.0).abs() < 1e-15);
        assert!((f.grad(1) + 2.25).abs() < 1e-15);
        let c = Scalar::cbrt(&x).unwrap();
        assert!((c.grad(0) - 1.0 / (3.0 * 9f64.cbrt())).abs() < 1e-14);
    }

    #[test]
    fn nested_dual_gives_second_derivative() {
        // f(x) = x^3 at x = 2: f'' = 12
        let inner = Dual::variable(2.0, 0, 1);
        let outer = Dual::variable(inner.clone(), 0, 1);
        let f = outer.clone() * outer.clone() * outer;
        assert!((f.grad(0).grad(0) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn huge_rationals_convert_to_double() {
        let big = Q::new(BigInt::from(3) << 2000usize, BigInt::from(1) << 1999usize);
        assert!((Scalar::to_f64(&big) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rational_strings_round_trip() {
        let x = parse_rational("-7/21").unwrap();
        assert_eq!(x, q(-1, 3));
        assert_eq!(format_rational(&x), "-1/3");
        assert_eq!(parse_rational("5").unwrap(), qi(5));
        assert!(parse_rational("1/0").is_none());
        assert_eq!(format_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
