//! Truncated power series in one, two or three variables.
//!
//! Storage is dense over the monomial simplex `|e| <= order`, holding raw
//! monomial coefficients. The public accessors speak the factorial
//! convention: `F = sum F_e x^e / e!`, so `deriv(e)` is the partial derivative
//! of multi-index `e` at the origin.

use crate::scalar::{format_f64, format_rational, parse_rational, Scalar, ScalarKind, Q};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("arity mismatch: {0} vs {1} variables")]
    ArityMismatch(usize, usize),
    #[error("substituted series must have zero constant term")]
    NonzeroConstant,
    #[error("implicit solve needs a nonvanishing v-derivative at the origin")]
    SingularImplicit,
    #[error("constant term is not a unit")]
    NotUnit,
    #[error("transform does not send the origin onto the graph (residual {0:e})")]
    OffGraph(f64),
    #[error("fractional power not representable in exact mode")]
    NotRepresentable,
    #[error("series JSON: {0}")]
    Json(String),
}

pub(crate) fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Number of monomials in `nvars` variables of total degree `< d`.
fn below(nvars: usize, d: usize) -> usize {
    if d == 0 {
        0
    } else {
        binom(d - 1 + nvars, nvars)
    }
}

/// Graded index of an exponent vector.
pub(crate) fn mono_index(e: &[usize]) -> usize {
    let n = e.len();
    if n == 0 {
        return 0;
    }
    let d: usize = e.iter().sum();
    below(n, d) + within(e)
}

fn within(e: &[usize]) -> usize {
    let n = e.len();
    if n <= 1 {
        return 0;
    }
    let r: usize = e[1..].iter().sum();
    below(n - 1, r) + within(&e[1..])
}

pub(crate) fn monomials(nvars: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binom(order + nvars, nvars));
    for d in 0..=order {
        degree_block(nvars, d, &mut Vec::new(), &mut out);
    }
    out
}

fn degree_block(n: usize, d: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if n == 1 {
        prefix.push(d);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=d).rev() {
        prefix.push(first);
        degree_block(n - 1, d - first, prefix, out);
        prefix.pop();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series<S> {
    nvars: usize,
    order: usize,
    c: Vec<S>,
}

/// Univariate series `sum F_i x^i / i!`.
pub type TruncatedSeries1<S> = Series<S>;
/// Bivariate series `sum F_{j,k} x^j y^k / (j! k!)`.
pub type TruncatedSeries2<S> = Series<S>;

impl<S: Scalar> Series<S> {
    pub fn zero(nvars: usize, order: usize) -> Self {
        Series {
            nvars,
            order,
            c: vec![S::zero(); binom(order + nvars, nvars)],
        }
    }

    pub fn constant(nvars: usize, order: usize, value: S) -> Self {
        let mut s = Self::zero(nvars, order);
        s.c[0] = value;
        s
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, order: usize, i: usize) -> Self {
        let mut s = Self::zero(nvars, order);
        if order >= 1 {
            let mut e = vec![0; nvars];
            e[i] = 1;
            s.c[mono_index(&e)] = S::one();
        }
        s
    }

    /// Build from derivative values (factorial convention).
    pub fn from_derivatives(nvars: usize, order: usize, mut f: impl FnMut(&[usize]) -> S) -> Self {
        let monos = monomials(nvars, order);
        let c = monos
            .iter()
            .map(|e| f(e) / S::from_i64(efact(e) as i64))
            .collect();
        Series { nvars, order, c }
    }

    pub fn from_derivatives1(order: usize, mut f: impl FnMut(usize) -> S) -> Self {
        Self::from_derivatives(1, order, |e| f(e[0]))
    }

    pub fn from_derivatives2(order: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        Self::from_derivatives(2, order, |e| f(e[0], e[1]))
    }

    /// Build from raw monomial coefficients.
    pub fn from_monomials(nvars: usize, order: usize, mut f: impl FnMut(&[usize]) -> S) -> Self {
        let c = monomials(nvars, order).iter().map(|e| f(e)).collect();
        Series { nvars, order, c }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> ScalarKind {
        S::KIND
    }

    /// Raw monomial coefficient; zero beyond the truncation order.
    pub fn mono(&self, e: &[usize]) -> S {
        assert_eq!(e.len(), self.nvars, "exponent arity");
        if e.iter().sum::<usize>() > self.order {
            return S::zero();
        }
        self.c[mono_index(e)].clone()
    }

    pub fn set_mono(&mut self, e: &[usize], v: S) {
        assert!(e.iter().sum::<usize>() <= self.order);
        let i = mono_index(e);
        self.c[i] = v;
    }

    /// Partial derivative of multi-index `e` at the origin.
    pub fn deriv(&self, e: &[usize]) -> S {
        self.mono(e) * S::from_i64(efact(e) as i64)
    }

    pub fn set_deriv(&mut self, e: &[usize], v: S) {
        self.set_mono(e, v / S::from_i64(efact(e) as i64));
    }

    pub fn d1(&self, i: usize) -> S {
        self.deriv(&[i])
    }

    pub fn d2(&self, j: usize, k: usize) -> S {
        self.deriv(&[j, k])
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> S {
        self.deriv(&[i, j, k])
    }

    /// Iterate `(exponent, raw coefficient)` in graded order.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<usize>, &S)> {
        monomials(self.nvars, self.order).into_iter().zip(self.c.iter())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Series<T> {
        Series {
            nvars: self.nvars,
            order: self.order,
            c: self.c.iter().map(f).collect(),
        }
    }

    pub fn to_f64(&self) -> Series<f64> {
        self.map(|x| x.to_f64())
    }

    /// Re-truncate to a lower order (or pad with zeros to a higher one).
    pub fn with_order(&self, order: usize) -> Self {
        Self::from_monomials(self.nvars, order, |e| self.mono(e))
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|x| x.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|x| x.abs_f64()).fold(0.0, f64::max)
    }

    fn check(&self, o: &Self) -> Result<(), SeriesError> {
        if self.nvars != o.nvars {
            Err(SeriesError::ArityMismatch(self.nvars, o.nvars))
        } else {
            Ok(())
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self, SeriesError> {
        self.check(o)?;
        Ok(self.add_raw(o))
    }

    pub fn sub(&self, o: &Self) -> Result<Self, SeriesError> {
        self.check(o)?;
        Ok(self.add_raw(&o.scale(&-S::one())))
    }

    pub fn mul(&self, o: &Self) -> Result<Self, SeriesError> {
        self.check(o)?;
        Ok(self.mul_raw(o))
    }

    pub fn scale(&self, k: &S) -> Self {
        self.map(|x| x.clone() * k.clone())
    }

    pub fn neg(&self) -> Self {
        self.map(|x| -x.clone())
    }

    pub(crate) fn add_raw(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        Self::from_monomials(self.nvars, order, |e| self.mono(e) + o.mono(e))
    }

    pub(crate) fn sub_raw(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        Self::from_monomials(self.nvars, order, |e| self.mono(e) - o.mono(e))
    }

    pub(crate) fn mul_raw(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        let n = self.nvars;
        let monos = monomials(n, order);
        let degs: Vec<usize> = monos.iter().map(|e| e.iter().sum()).collect();
        let mut out = vec![S::zero(); monos.len()];
        let mut buf = vec![0usize; n];
        for (ia, ea) in monos.iter().enumerate() {
            let ca = &self.c[ia];
            if ca.is_exact_zero() {
                continue;
            }
            for (ib, eb) in monos.iter().enumerate() {
                if degs[ia] + degs[ib] > order {
                    // graded order: every later monomial is at least as high
                    break;
                }
                let cb = &o.c[ib];
                if cb.is_exact_zero() {
                    continue;
                }
                for v in 0..n {
                    buf[v] = ea[v] + eb[v];
                }
                let idx = mono_index(&buf);
                out[idx] = out[idx].clone() + ca.clone() * cb.clone();
            }
        }
        Series { nvars: n, order, c: out }
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut acc = Self::constant(self.nvars, self.order, S::one());
        for _ in 0..k {
            acc = acc.mul_raw(self);
        }
        acc
    }

    /// Multiplicative inverse; requires a nonzero constant term. Loses no order.
    pub fn recip(&self) -> Result<Self, SeriesError> {
        let c0 = self.c[0].clone();
        if c0.is_zero() {
            return Err(SeriesError::NotUnit);
        }
        // 1/(c0 (1 + h)) = (1/c0) sum (-h)^i
        let inv0 = c0.recip();
        let mut h = self.scale(&inv0);
        h.c[0] = S::zero();
        let mh = h.neg();
        let mut acc = Self::constant(self.nvars, self.order, S::one());
        let mut p = acc.clone();
        for _ in 0..self.order {
            p = p.mul_raw(&mh);
            acc = acc.add_raw(&p);
        }
        Ok(acc.scale(&inv0))
    }

    pub fn div(&self, o: &Self) -> Result<Self, SeriesError> {
        self.check(o)?;
        Ok(self.mul_raw(&o.recip()?))
    }

    /// `self^(num/den)` for `den` in 1..=3, by the binomial series around the
    /// constant term (which must be nonzero, and positive when `den = 2`).
    pub fn pow_frac(&self, num: i64, den: u32) -> Result<Self, SeriesError> {
        let c0 = self.c[0].clone();
        if c0.is_zero() {
            return Err(SeriesError::NotUnit);
        }
        let root = match den {
            1 => Some(c0.clone()),
            2 => c0.sqrt(),
            3 => c0.cbrt(),
            _ => None,
        }
        .ok_or(SeriesError::NotUnit)?;
        let lead = root.powi(num as i32);
        let mut z = self.scale(&c0.recip());
        z.c[0] = S::zero();
        let alpha = S::from_ratio(num, den as i64);
        let mut coef = vec![S::one()];
        for k in 1..=self.order {
            let prev = coef[k - 1].clone();
            coef.push(prev * (alpha.clone() - S::from_i64(k as i64 - 1)) / S::from_i64(k as i64));
        }
        let mut acc = Self::constant(self.nvars, self.order, coef[self.order].clone());
        for k in (0..self.order).rev() {
            acc = acc.mul_raw(&z);
            acc.c[0] = acc.c[0].clone() + coef[k].clone();
        }
        Ok(acc.scale(&lead))
    }

    /// Partial derivative in variable `i`; the result has order one less.
    pub fn partial(&self, i: usize) -> Self {
        let order = self.order.saturating_sub(1);
        Self::from_monomials(self.nvars, order, |e| {
            let mut f = e.to_vec();
            f[i] += 1;
            self.mono(&f) * S::from_i64(f[i] as i64)
        })
    }

    /// Polynomial evaluation of the truncation at a point.
    pub fn eval(&self, pt: &[S]) -> S {
        assert_eq!(pt.len(), self.nvars);
        let mut acc = S::zero();
        for (e, c) in self.terms() {
            let mut m = c.clone();
            for (v, &k) in e.iter().enumerate() {
                if k > 0 {
                    m = m * pt[v].powi(k as i32);
                }
            }
            acc = acc + m;
        }
        acc
    }

    /// Substitute series `xs` (common arity, zero constant terms) for the variables.
    /// The result's order is the minimum of the orders involved; no order is lost.
    pub fn compose(&self, xs: &[Self]) -> Result<Self, SeriesError> {
        if xs.len() != self.nvars {
            return Err(SeriesError::ArityMismatch(self.nvars, xs.len()));
        }
        for x in xs {
            if !x.c[0].is_zero() {
                return Err(SeriesError::NonzeroConstant);
            }
        }
        self.compose_poly(xs)
    }

    /// Treat `self` as a polynomial and substitute `xs`, which may carry constant
    /// terms (exact for the polynomial, then truncated).
    pub fn compose_poly(&self, xs: &[Self]) -> Result<Self, SeriesError> {
        if xs.len() != self.nvars {
            return Err(SeriesError::ArityMismatch(self.nvars, xs.len()));
        }
        let m = xs[0].nvars;
        for x in xs {
            if x.nvars != m {
                return Err(SeriesError::ArityMismatch(m, x.nvars));
            }
        }
        let order = xs.iter().map(|x| x.order).min().unwrap_or(self.order);
        let xs: Vec<Self> = xs.iter().map(|x| x.with_order(order)).collect();
        // powers[v][k] = xs[v]^k
        let maxdeg = self.order;
        let powers: Vec<Vec<Self>> = xs
            .iter()
            .map(|x| {
                let mut p = vec![Self::constant(m, order, S::one())];
                for k in 1..=maxdeg {
                    let next = p[k - 1].mul_raw(x);
                    p.push(next);
                }
                p
            })
            .collect();
        let mut acc = Self::zero(m, order);
        for (e, c) in self.terms() {
            if c.is_exact_zero() {
                continue;
            }
            let mut term = Self::constant(m, order, c.clone());
            for (v, &k) in e.iter().enumerate() {
                if k > 0 {
                    term = term.mul_raw(&powers[v][k]);
                }
            }
            acc = acc.add_raw(&term);
        }
        Ok(acc)
    }

    /// Taylor re-expansion of the truncation about the point `h`.
    pub fn shift(&self, h: &[S]) -> Self {
        let xs: Vec<Self> = (0..self.nvars)
            .map(|i| {
                let mut x = Self::var(self.nvars, self.order, i);
                x.c[0] = h[i].clone();
                x
            })
            .collect();
        self.compose_poly(&xs).expect("arity checked")
    }
}

fn efact(e: &[usize]) -> u128 {
    e.iter().map(|&k| factorial(k)).product()
}

impl<S: Scalar> Series<S> {
    /// `F(X(s,t), Y(s,t))` for a bivariate `F`.
    pub fn compose2(&self, x: &Self, y: &Self) -> Result<Self, SeriesError> {
        if self.nvars != 2 {
            return Err(SeriesError::ArityMismatch(2, self.nvars));
        }
        self.compose(&[x.clone(), y.clone()])
    }
}

/// Solve `Phi(x_1..x_n, v) = 0` for `v = G(x)` with `G(0) = 0`.
///
/// Degree-by-degree Newton: the degree-`d` part of `Phi(x, G)` depends on the
/// degree-`d` coefficients of `G` only through `Phi_v(0) G_d`.
pub fn solve_implicit<S: Scalar>(phi: &Series<S>) -> Result<Series<S>, SeriesError> {
    let n = phi.nvars - 1;
    let order = phi.order;
    if !phi.c[0].is_zero() {
        return Err(SeriesError::NonzeroConstant);
    }
    let mut ev = vec![0; n + 1];
    ev[n] = 1;
    let pv = phi.mono(&ev);
    if pv.is_zero() {
        return Err(SeriesError::SingularImplicit);
    }
    let inv = pv.recip();
    // Phi = sum_i P_i(x) v^i
    let parts: Vec<Series<S>> = (0..=order)
        .map(|i| {
            Series::from_monomials(n, order, |e| {
                if e.iter().sum::<usize>() + i > order {
                    return S::zero();
                }
                let mut f = e.to_vec();
                f.push(i);
                phi.mono(&f)
            })
        })
        .collect();
    let monos = monomials(n, order);
    let mut g = Series::zero(n, order);
    for d in 1..=order {
        // residual Phi(x, G) with G known below degree d (Horner in v)
        let mut r = parts[order].clone();
        for i in (0..order).rev() {
            r = r.mul_raw(&g).add_raw(&parts[i]);
        }
        for (idx, e) in monos.iter().enumerate() {
            if e.iter().sum::<usize>() == d {
                g.c[idx] = g.c[idx].clone() - r.c[idx].clone() * inv.clone();
            }
        }
    }
    Ok(g)
}

/// Element of the affine group of 3-space in inverse form: source coordinates
/// `(x, y, u)` as functions of target coordinates `(s, t, v)`:
/// `x = a s + b t + c v + d`, `y = k s + l t + m v + n`, `u = p s + q t + r v + s0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransform3<S> {
    pub a: S,
    pub b: S,
    pub c: S,
    pub k: S,
    pub l: S,
    pub m: S,
    pub p: S,
    pub q: S,
    pub r: S,
    pub d: S,
    pub n: S,
    pub s0: S,
}

impl<S: Scalar> AffineTransform3<S> {
    pub fn identity() -> Self {
        Self::linear([[S::one(), S::zero(), S::zero()], [S::zero(), S::one(), S::zero()], [S::zero(), S::zero(), S::one()]])
    }

    pub fn linear(m: [[S; 3]; 3]) -> Self {
        let [[a, b, c], [k, l, mm], [p, q, r]] = m;
        AffineTransform3 {
            a,
            b,
            c,
            k,
            l,
            m: mm,
            p,
            q,
            r,
            d: S::zero(),
            n: S::zero(),
            s0: S::zero(),
        }
    }

    pub fn matrix(&self) -> [[S; 3]; 3] {
        [
            [self.a.clone(), self.b.clone(), self.c.clone()],
            [self.k.clone(), self.l.clone(), self.m.clone()],
            [self.p.clone(), self.q.clone(), self.r.clone()],
        ]
    }

    pub fn translation(&self) -> [S; 3] {
        [self.d.clone(), self.n.clone(), self.s0.clone()]
    }

    pub fn with_translation(mut self, t: [S; 3]) -> Self {
        let [d, n, s0] = t;
        self.d = d;
        self.n = n;
        self.s0 = s0;
        self
    }

    /// Determinant of the linear part.
    pub fn delta(&self) -> S {
        det3(&self.matrix())
    }

    /// `al - bk + (cl - bm) F_x + (am - ck) F_y`.
    pub fn lambda(&self, fx: &S, fy: &S) -> S {
        let (a, b, c, k, l, m) = (&self.a, &self.b, &self.c, &self.k, &self.l, &self.m);
        a.clone() * l.clone() - b.clone() * k.clone()
            + (c.clone() * l.clone() - b.clone() * m.clone()) * fx.clone()
            + (a.clone() * m.clone() - c.clone() * k.clone()) * fy.clone()
    }

    /// Transform equivalent to applying `self` first and `next` second:
    /// source = self(next(target)).
    pub fn then(&self, next: &Self) -> Self {
        let a = self.matrix();
        let b = next.matrix();
        let mut m: [[S; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| S::zero()));
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = S::zero();
                for k in 0..3 {
                    acc = acc + a[i][k].clone() * b[k][j].clone();
                }
                m[i][j] = acc;
            }
        }
        let tb = next.translation();
        let ta = self.translation();
        let t: [S; 3] = std::array::from_fn(|i| {
            let mut acc = ta[i].clone();
            for k in 0..3 {
                acc = acc + a[i][k].clone() * tb[k].clone();
            }
            acc
        });
        Self::linear(m).with_translation(t)
    }

    /// Map target coordinates to source coordinates.
    pub fn source_of(&self, st: [S; 3]) -> [S; 3] {
        let m = self.matrix();
        let t = self.translation();
        std::array::from_fn(|i| {
            let mut acc = t[i].clone();
            for k in 0..3 {
                acc = acc + m[i][k].clone() * st[k].clone();
            }
            acc
        })
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> AffineTransform3<T> {
        AffineTransform3 {
            a: f(&self.a),
            b: f(&self.b),
            c: f(&self.c),
            k: f(&self.k),
            l: f(&self.l),
            m: f(&self.m),
            p: f(&self.p),
            q: f(&self.q),
            r: f(&self.r),
            d: f(&self.d),
            n: f(&self.n),
            s0: f(&self.s0),
        }
    }
}

pub fn det3<S: Scalar>(m: &[[S; 3]; 3]) -> S {
    let t = |i: usize, j: usize| m[i][j].clone();
    t(0, 0) * (t(1, 1) * t(2, 2) - t(1, 2) * t(2, 1)) - t(0, 1) * (t(1, 0) * t(2, 2) - t(1, 2) * t(2, 0))
        + t(0, 2) * (t(1, 0) * t(2, 1) - t(1, 1) * t(2, 0))
}

/// Graph of the transformed surface: solves
/// `0 = -(p s + q t + r G + s0) + F(a s + b t + c G + d, k s + l t + m G + n)`.
pub fn apply_affine<S: Scalar>(f: &Series<S>, tr: &AffineTransform3<S>) -> Result<Series<S>, SeriesError> {
    if f.nvars != 2 {
        return Err(SeriesError::ArityMismatch(2, f.nvars));
    }
    let order = f.order;
    let base = if tr.d.is_exact_zero() && tr.n.is_exact_zero() {
        f.clone()
    } else {
        f.shift(&[tr.d.clone(), tr.n.clone()])
    };
    let resid = base.c[0].clone() - tr.s0.clone();
    check_on_graph(&resid, base.max_abs())?;
    let mut base = base;
    base.c[0] = S::zero();

    if tr.c.is_exact_zero() && tr.m.is_exact_zero() {
        // explicit: r G = F(as+bt, ks+lt) - p s - q t
        if tr.r.is_zero() {
            return Err(SeriesError::SingularImplicit);
        }
        let s = Series::var(2, order, 0);
        let t = Series::var(2, order, 1);
        let x = s.scale(&tr.a).add_raw(&t.scale(&tr.b));
        let y = s.scale(&tr.k).add_raw(&t.scale(&tr.l));
        let g = base
            .compose(&[x, y])?
            .sub_raw(&s.scale(&tr.p))
            .sub_raw(&t.scale(&tr.q));
        return Ok(g.scale(&tr.r.recip()));
    }
    let s = Series::var(3, order, 0);
    let t = Series::var(3, order, 1);
    let v = Series::var(3, order, 2);
    let x = s.scale(&tr.a).add_raw(&t.scale(&tr.b)).add_raw(&v.scale(&tr.c));
    let y = s.scale(&tr.k).add_raw(&t.scale(&tr.l)).add_raw(&v.scale(&tr.m));
    let lin = s.scale(&tr.p).add_raw(&t.scale(&tr.q)).add_raw(&v.scale(&tr.r));
    let phi = base.compose(&[x, y])?.sub_raw(&lin);
    solve_implicit(&phi)
}

fn check_on_graph<S: Scalar>(resid: &S, scale: f64) -> Result<(), SeriesError> {
    let ok = match S::KIND {
        ScalarKind::Exact => resid.is_zero(),
        ScalarKind::Floating => resid.abs_f64() <= 1e-12 * (1.0 + scale),
    };
    if ok {
        Ok(())
    } else {
        Err(SeriesError::OffGraph(resid.to_f64()))
    }
}

/// Planar affine map in inverse form: `x = a y + b v + e`, `u = c y + d v + f`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransform2<S> {
    pub a: S,
    pub b: S,
    pub c: S,
    pub d: S,
    pub e: S,
    pub f: S,
}

impl<S: Scalar> AffineTransform2<S> {
    pub fn linear(a: S, b: S, c: S, d: S) -> Self {
        AffineTransform2 { a, b, c, d, e: S::zero(), f: S::zero() }
    }

    pub fn identity() -> Self {
        Self::linear(S::one(), S::zero(), S::zero(), S::one())
    }

    pub fn det(&self) -> S {
        self.a.clone() * self.d.clone() - self.b.clone() * self.c.clone()
    }

    pub fn then(&self, next: &Self) -> Self {
        let (a1, b1, c1, d1) = (&self.a, &self.b, &self.c, &self.d);
        let (a2, b2, c2, d2) = (&next.a, &next.b, &next.c, &next.d);
        AffineTransform2 {
            a: a1.clone() * a2.clone() + b1.clone() * c2.clone(),
            b: a1.clone() * b2.clone() + b1.clone() * d2.clone(),
            c: c1.clone() * a2.clone() + d1.clone() * c2.clone(),
            d: c1.clone() * b2.clone() + d1.clone() * d2.clone(),
            e: self.e.clone() + a1.clone() * next.e.clone() + b1.clone() * next.f.clone(),
            f: self.f.clone() + c1.clone() * next.e.clone() + d1.clone() * next.f.clone(),
        }
    }
}

/// Curve twin of [`apply_affine`]: solves `0 = -(c y + d G + f) + F(a y + b G + e)`.
pub fn apply_affine_curve<S: Scalar>(f: &Series<S>, tr: &AffineTransform2<S>) -> Result<Series<S>, SeriesError> {
    if f.nvars != 1 {
        return Err(SeriesError::ArityMismatch(1, f.nvars));
    }
    let order = f.order;
    let mut base = if tr.e.is_exact_zero() { f.clone() } else { f.shift(&[tr.e.clone()]) };
    let resid = base.c[0].clone() - tr.f.clone();
    check_on_graph(&resid, base.max_abs())?;
    base.c[0] = S::zero();
    let y = Series::var(2, order, 0);
    let v = Series::var(2, order, 1);
    let x = y.scale(&tr.a).add_raw(&v.scale(&tr.b));
    let lin = y.scale(&tr.c).add_raw(&v.scale(&tr.d));
    let phi = base.compose(&[x])?.sub_raw(&lin);
    solve_implicit(&phi)
}

/// JSON exchange form; `value` holds the derivative `F_{j,k}` as `"p/q"` (exact)
/// or a decimal string (floating).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeriesJson {
    pub vars: usize,
    pub order: usize,
    pub coeffs: Vec<CoeffJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoeffJson {
    pub j: usize,
    #[serde(default)]
    pub k: usize,
    pub value: String,
}

/// A parsed series in whichever mode its strings selected.
#[derive(Debug, Clone, PartialEq)]
pub enum AnySeries {
    Exact(Series<Q>),
    Float(Series<f64>),
}

impl AnySeries {
    pub fn nvars(&self) -> usize {
        match self {
            AnySeries::Exact(s) => s.nvars(),
            AnySeries::Float(s) => s.nvars(),
        }
    }

    pub fn to_f64(&self) -> Series<f64> {
        match self {
            AnySeries::Exact(s) => s.to_f64(),
            AnySeries::Float(s) => s.clone(),
        }
    }
}

fn is_rational_literal(v: &str) -> bool {
    let v = v.trim();
    !v.is_empty()
        && !v.contains(['.', 'e', 'E'])
        && v.chars().all(|c| c.is_ascii_digit() || c == '/' || c == '-' || c == '+' || c == ' ')
}

impl SeriesJson {
    pub fn parse(text: &str) -> Result<AnySeries, SeriesError> {
        let js: SeriesJson = serde_json::from_str(text).map_err(|e| {
            SeriesError::Json(format!("line {} column {}: {}", e.line(), e.column(), e))
        })?;
        js.into_series()
    }

    pub fn into_series(&self) -> Result<AnySeries, SeriesError> {
        if self.vars != 1 && self.vars != 2 {
            return Err(SeriesError::Json(format!("vars must be 1 or 2, got {}", self.vars)));
        }
        let exact: Vec<bool> = self.coeffs.iter().map(|c| is_rational_literal(&c.value)).collect();
        let all_exact = exact.iter().all(|&b| b);
        let any_exact = exact.iter().any(|&b| b);
        // integers are admissible in either mode; only fractions force exactness
        let any_fraction = self.coeffs.iter().any(|c| c.value.contains('/'));
        if any_fraction && !all_exact {
            return Err(SeriesError::Json("rational and decimal coefficients may not be mixed".into()));
        }
        let _ = any_exact;
        for c in &self.coeffs {
            if c.j + c.k > self.order {
                return Err(SeriesError::Json(format!("coefficient ({},{}) exceeds order {}", c.j, c.k, self.order)));
            }
            if self.vars == 1 && c.k != 0 {
                return Err(SeriesError::Json("univariate series cannot have k != 0".into()));
            }
        }
        let idx = |c: &CoeffJson| if self.vars == 1 { vec![c.j] } else { vec![c.j, c.k] };
        if all_exact {
            let mut s = Series::<Q>::zero(self.vars, self.order);
            for c in &self.coeffs {
                let v = parse_rational(&c.value)
                    .ok_or_else(|| SeriesError::Json(format!("bad rational '{}'", c.value)))?;
                s.set_deriv(&idx(c), v);
            }
            Ok(AnySeries::Exact(s))
        } else {
            let mut s = Series::<f64>::zero(self.vars, self.order);
            for c in &self.coeffs {
                let v: f64 = c
                    .value
                    .trim()
                    .parse()
                    .map_err(|_| SeriesError::Json(format!("bad decimal '{}'", c.value)))?;
                s.set_deriv(&idx(c), v);
            }
            Ok(AnySeries::Float(s))
        }
    }

    pub fn from_exact(s: &Series<Q>) -> Self {
        Self::build(s, |x: &Q| format_rational(x))
    }

    pub fn from_float(s: &Series<f64>) -> Self {
        Self::build(s, |x: &f64| format_f64(*x))
    }

    fn build<S: Scalar>(s: &Series<S>, fmt: impl Fn(&S) -> String) -> Self {
        let mut coeffs = Vec::new();
        for (e, _) in s.terms() {
            let v = s.deriv(&e);
            if v.is_zero() {
                continue;
            }
            coeffs.push(CoeffJson {
                j: e[0],
                k: if e.len() > 1 { e[1] } else { 0 },
                value: fmt(&v),
            });
        }
        SeriesJson { vars: s.nvars(), order: s.order(), coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi};

    #[test]
    fn graded_index_is_a_bijection() {
        for n in 1..=3 {
            let monos = monomials(n, 7);
            assert_eq!(monos.len(), binom(7 + n, n));
            for (i, e) in monos.iter().enumerate() {
                assert_eq!(mono_index(e), i, "{e:?}");
            }
        }
    }

    #[test]
    fn difference_of_squares() {
        let one = Series::<Q>::constant(1, 2, qi(1));
        let x = Series::<Q>::var(1, 2, 0);
        let p = one.add(&x).unwrap().mul(&one.sub(&x).unwrap()).unwrap();
        assert_eq!(p.d1(0), qi(1));
        assert_eq!(p.d1(1), qi(0));
        assert_eq!(p.d1(2), qi(-2));
    }

    #[test]
    fn annihilator_and_arity() {
        let f = Series::<Q>::from_derivatives2(3, |j, k| qi((j + 2 * k) as i64));
        assert!(f.mul(&Series::zero(2, 3)).unwrap().is_zero());
        let g = Series::<Q>::var(1, 3, 0);
        assert_eq!(f.mul(&g), Err(SeriesError::ArityMismatch(2, 1)));
    }

    #[test]
    fn exp_squared_has_powers_of_two() {
        let e = Series::<Q>::from_derivatives1(4, |_| qi(1));
        let e2 = e.mul(&e).unwrap();
        // oracle: raw Cauchy convolution of 1/i!
        for n in 0..=4usize {
            let mut raw = qi(0);
            for i in 0..=n {
                raw += q(1, (1..=i as i64).product::<i64>().max(1)) * q(1, (1..=(n - i) as i64).product::<i64>().max(1));
            }
            assert_eq!(e2.mono(&[n]), raw);
            assert_eq!(e2.d1(n), qi(1 << n));
        }
    }

    #[test]
    fn binomial_composition() {
        let mut f = Series::<Q>::zero(2, 4);
        f.set_deriv(&[2, 0], qi(2)); // x^2
        let s = Series::<Q>::var(2, 4, 0);
        let t = Series::<Q>::var(2, 4, 1);
        let g = f.compose2(&s.add(&t).unwrap(), &Series::zero(2, 4)).unwrap();
        assert_eq!(g.mono(&[2, 0]), qi(1));
        assert_eq!(g.mono(&[1, 1]), qi(2));
        assert_eq!(g.mono(&[0, 2]), qi(1));
        let mut xy = Series::<Q>::zero(2, 4);
        xy.set_mono(&[1, 1], qi(1));
        assert_eq!(xy.compose2(&s, &t).unwrap(), xy);
        let bad = Series::<Q>::constant(2, 4, qi(1));
        assert_eq!(f.compose2(&bad, &t), Err(SeriesError::NonzeroConstant));
    }

    #[test]
    fn implicit_solve_examples() {
        // -v + s^2 = 0
        let mut phi = Series::<Q>::zero(2, 5);
        phi.set_mono(&[0, 1], qi(-1));
        phi.set_mono(&[2, 0], qi(1));
        let g = solve_implicit(&phi).unwrap();
        assert_eq!(g.mono(&[2]), qi(1));
        assert_eq!(g.mono(&[3]), qi(0));
        // -2v + s + v^2 = 0, fixed-point oracle v <- (s + v^2)/2
        let mut phi = Series::<Q>::zero(2, 3);
        phi.set_mono(&[0, 1], qi(-2));
        phi.set_mono(&[1, 0], qi(1));
        phi.set_mono(&[0, 2], qi(1));
        let g = solve_implicit(&phi).unwrap();
        let s = Series::<Q>::var(1, 3, 0);
        let mut v = Series::<Q>::zero(1, 3);
        for _ in 0..4 {
            v = s.add(&v.mul(&v).unwrap()).unwrap().scale(&q(1, 2));
        }
        assert_eq!(g, v);
        assert_eq!(g.mono(&[1]), q(1, 2));
        assert_eq!(g.mono(&[2]), q(1, 8));
        assert_eq!(g.mono(&[3]), q(1, 16));
        let mut flat = Series::<Q>::zero(2, 3);
        flat.set_mono(&[1, 0], qi(1));
        assert_eq!(solve_implicit(&flat), Err(SeriesError::SingularImplicit));
    }

    #[test]
    fn identity_transform_is_identity() {
        let f = Series::<Q>::from_derivatives2(5, |j, k| if j + k >= 2 { q((j * 3 + k) as i64, 7) } else { qi(0) });
        let g = apply_affine(&f, &AffineTransform3::identity()).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn shear_of_parabola() {
        // x = s, y = t, u = v + eps s  =>  G = s^2/2 - eps s exactly
        let mut f = Series::<Q>::zero(2, 4);
        f.set_deriv(&[2, 0], qi(1));
        let eps = q(1, 10);
        let mut tr = AffineTransform3::<Q>::identity();
        tr.p = eps.clone();
        let g = apply_affine(&f, &tr).unwrap();
        assert_eq!(g.d2(1, 0), -eps);
        assert_eq!(g.d2(2, 0), qi(1));
    }

    #[test]
    fn rotation_recovers_euclidean_curvature() {
        // graph with F1 = 3/4, F2 = 2; rotate by the angle whose tangent is F1
        // (cos = 4/5, sin = 3/5): x = cy - s v, u = s y + c v
        let f = Series::<Q>::from_derivatives1(4, |i| match i {
            1 => q(3, 4),
            2 => qi(2),
            3 => qi(1),
            _ => qi(0),
        });
        let tr = AffineTransform2::linear(q(4, 5), q(-3, 5), q(3, 5), q(4, 5));
        let g = apply_affine_curve(&f, &tr).unwrap();
        assert_eq!(g.d1(1), qi(0));
        // F2 / (1 + F1^2)^(3/2) = 2 / (125/64) = 128/125
        assert_eq!(g.d1(2), q(128, 125));
    }

    #[test]
    fn shift_matches_direct_evaluation() {
        let f = Series::<Q>::from_derivatives2(4, |j, k| qi((j as i64 - 2 * k as i64) + 1));
        let h = [q(1, 3), q(-1, 2)];
        let g = f.shift(&h);
        assert_eq!(g.mono(&[0, 0]), f.eval(&h));
        // derivative in x at h from the partial series
        assert_eq!(g.d2(1, 0), f.partial(0).eval(&h));
    }

    #[test]
    fn json_round_trip_and_mode_checks() {
        let text = r#"{"vars":2,"order":3,"coeffs":[{"j":2,"k":0,"value":"1"},{"j":2,"k":1,"value":"-1/3"}]}"#;
        let s = SeriesJson::parse(text).unwrap();
        let AnySeries::Exact(e) = &s else { panic!("exact") };
        assert_eq!(e.d2(2, 1), q(-1, 3));
        let back = SeriesJson::from_exact(e);
        assert_eq!(back.into_series().unwrap(), s);
        let mixed = r#"{"vars":2,"order":3,"coeffs":[{"j":2,"k":0,"value":"0.5"},{"j":2,"k":1,"value":"-1/3"}]}"#;
        assert!(SeriesJson::parse(mixed).is_err());
        let float = r#"{"vars":1,"order":3,"coeffs":[{"j":2,"value":"0.5"}]}"#;
        assert!(matches!(SeriesJson::parse(float).unwrap(), AnySeries::Float(_)));
        assert!(SeriesJson::parse("{\"vars\":2,").is_err());
    }
}
