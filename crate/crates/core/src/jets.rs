//! Jet coordinates, the parabolic relations `u_{j,k} = R_{j,k}` for `k >= 2`,
//! and total differentiation of jet functions by forward sensitivities.

use crate::jetpoly::{u, JetPolynomial, JetRational, Var};
use crate::scalar::{Dual, Scalar, Q};
use crate::series::{mono_index, Series, SeriesError};
use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("u20 vanishes: the parabolic relations are undefined")]
    DegenerateU20,
    #[error("jet order {have} is insufficient, {need} required")]
    InsufficientOrder { need: usize, have: usize },
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("normalization failed: {0}")]
    Normalize(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    X,
    Y,
}

/// All jet coordinates `u_{j,k}`, `j + k <= order`, at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint<S> {
    pub x: S,
    pub y: S,
    order: usize,
    u: Vec<S>,
}

impl<S: Scalar> JetPoint<S> {
    pub fn from_fn(x: S, y: S, order: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let len = (order + 1) * (order + 2) / 2;
        let mut u = vec![S::zero(); len];
        for d in 0..=order {
            for k in 0..=d {
                u[mono_index(&[d - k, k])] = f(d - k, k);
            }
        }
        JetPoint { x, y, order, u }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `u_{j,k}`. Panics beyond the stored order; call [`JetPoint::require`] first.
    pub fn u(&self, j: usize, k: usize) -> S {
        assert!(j + k <= self.order, "u{j}{k} beyond jet order {}", self.order);
        self.u[mono_index(&[j, k])].clone()
    }

    pub fn require(&self, need: usize) -> Result<(), JetError> {
        if self.order < need {
            Err(JetError::InsufficientOrder { need, have: self.order })
        } else {
            Ok(())
        }
    }

    pub fn value(&self, v: Var) -> S {
        match v {
            Var::X => self.x.clone(),
            Var::Y => self.y.clone(),
            Var::U(j, k) => self.u(j as usize, k as usize),
        }
    }

    /// The independent parabolic coordinates up to order `n`.
    pub fn parabolic(&self, n: usize) -> Result<ParabolicJet<S>, JetError> {
        self.require(n)?;
        Ok(ParabolicJet::from_fn(self.x.clone(), self.y.clone(), n, |j, k| self.u(j, k)))
    }

    /// Taylor series at the base point, in local coordinates centred there.
    pub fn to_series(&self) -> Series<S> {
        Series::from_derivatives2(self.order, |j, k| self.u(j, k))
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> JetPoint<T> {
        JetPoint { x: f(&self.x), y: f(&self.y), order: self.order, u: self.u.iter().map(f).collect() }
    }
}

/// Copy the Taylor coefficients of a bivariate series as jets at the origin.
pub fn jets_of_series<S: Scalar>(f: &Series<S>) -> JetPoint<S> {
    JetPoint::from_fn(S::zero(), S::zero(), f.order(), |j, k| f.d2(j, k))
}

/// The `3 + 2n` independent coordinates of the parabolic jet space:
/// `x, y, u, u_{j,0} (1 <= j <= n), u_{j,1} (0 <= j <= n-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicJet<S> {
    pub x: S,
    pub y: S,
    order: usize,
    u0: S,
    ux: Vec<S>,
    uy: Vec<S>,
}

impl<S: Scalar> ParabolicJet<S> {
    /// Build from a callback queried for `(0,0)`, `(j,0)` and `(j,1)` only.
    pub fn from_fn(x: S, y: S, order: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let u0 = f(0, 0);
        let ux = (1..=order).map(|j| f(j, 0)).collect();
        let uy = (0..order).map(|j| f(j, 1)).collect();
        ParabolicJet { x, y, order, u0, ux, uy }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        3 + 2 * self.order
    }

    /// Independent coordinate `u_{j,k}` (`k <= 1`).
    pub fn get(&self, j: usize, k: usize) -> S {
        match (j, k) {
            (0, 0) => self.u0.clone(),
            (j, 0) => self.ux[j - 1].clone(),
            (j, 1) => self.uy[j].clone(),
            _ => panic!("u{j}{k} is not an independent parabolic coordinate"),
        }
    }

    pub fn set(&mut self, j: usize, k: usize, v: S) {
        match (j, k) {
            (0, 0) => self.u0 = v,
            (j, 0) => self.ux[j - 1] = v,
            (j, 1) => self.uy[j] = v,
            _ => panic!("u{j}{k} is not an independent parabolic coordinate"),
        }
    }

    /// Coordinate variables in the order used by [`ParabolicJet::coords`].
    pub fn coord_vars(n: usize) -> Vec<Var> {
        let mut v = vec![Var::X, Var::Y, u(0, 0)];
        v.extend((1..=n).map(|j| u(j, 0)));
        v.extend((0..n).map(|j| u(j, 1)));
        v
    }

    pub fn coords(&self) -> Vec<S> {
        let mut v = vec![self.x.clone(), self.y.clone(), self.u0.clone()];
        v.extend(self.ux.iter().cloned());
        v.extend(self.uy.iter().cloned());
        v
    }

    pub fn from_coords(n: usize, c: &[S]) -> Self {
        assert_eq!(c.len(), 3 + 2 * n);
        ParabolicJet {
            x: c[0].clone(),
            y: c[1].clone(),
            order: n,
            u0: c[2].clone(),
            ux: c[3..3 + n].to_vec(),
            uy: c[3 + n..].to_vec(),
        }
    }

    pub fn truncate(&self, n: usize) -> Self {
        assert!(n <= self.order);
        ParabolicJet {
            x: self.x.clone(),
            y: self.y.clone(),
            order: n,
            u0: self.u0.clone(),
            ux: self.ux[..n].to_vec(),
            uy: self.uy[..n].to_vec(),
        }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> ParabolicJet<T> {
        ParabolicJet {
            x: f(&self.x),
            y: f(&self.y),
            order: self.order,
            u0: f(&self.u0),
            ux: self.ux.iter().map(&f).collect(),
            uy: self.uy.iter().map(&f).collect(),
        }
    }

    /// Fill all dependent jets up to `upto` from the vanishing of the Hessian
    /// determinant and its total derivatives.
    pub fn fill(&self, upto: usize) -> Result<JetPoint<S>, JetError> {
        if upto > self.order {
            return Err(JetError::InsufficientOrder { need: upto, have: self.order });
        }
        let mut jp = JetPoint::from_fn(self.x.clone(), self.y.clone(), upto, |j, k| if k <= 1 { self.get(j, k) } else { S::zero() });
        if upto < 2 {
            return Ok(jp);
        }
        let u20 = jp.u(2, 0);
        if u20.is_zero() {
            return Err(JetError::DegenerateU20);
        }
        let at = |jp: &JetPoint<S>, j: usize, k: usize| jp.u[mono_index(&[j, k])].clone();
        // Coefficient (a, b) of the Taylor expansion of H = F_xx F_yy - F_xy^2
        // determines u_{a, b+2}; the only occurrence of that unknown is
        // u_{2,0} u_{a,b+2}.
        for k in 2..=upto {
            for j in 0..=upto - k {
                let (a, b) = (j, k - 2);
                let mut acc = S::zero();
                for i in 0..=a {
                    for l in 0..=b {
                        let c = S::from_i64(binom(a, i) * binom(b, l));
                        let mut t = S::zero();
                        if i != 0 || l != 0 {
                            t = t + at(&jp, 2 + i, l) * at(&jp, a - i, b - l + 2);
                        }
                        t = t - at(&jp, 1 + i, 1 + l) * at(&jp, 1 + a - i, 1 + b - l);
                        acc = acc + c * t;
                    }
                }
                jp.u[mono_index(&[j, k])] = -acc / u20.clone();
            }
        }
        Ok(jp)
    }

    /// Truncated Taylor series of a parabolic surface with these jets.
    pub fn realize(&self, order: usize) -> Result<Series<S>, JetError> {
        Ok(self.fill(order)?.to_series())
    }
}

fn binom(n: usize, k: usize) -> i64 {
    crate::series::binom(n, k) as i64
}

type RelationTable = BTreeMap<(usize, usize), JetRational>;

fn relation_cache() -> &'static Mutex<RelationTable> {
    static CACHE: OnceLock<Mutex<RelationTable>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(BTreeMap::new()))
}

/// Symbolic `R_{j,k}` (`k >= 2`) expressing dependent jets through the
/// independent parabolic coordinates, generated by differentiating
/// `u_{0,2} = u_{1,1}^2 / u_{2,0}` and back-substituting. Cached.
pub fn relation(j: usize, k: usize) -> JetRational {
    assert!(k >= 2, "u{j}{k} is independent");
    let n = j + k;
    let mut cache = relation_cache().lock().expect("relation cache poisoned");
    if let Some(r) = cache.get(&(j, k)) {
        return r.clone();
    }
    for m in 2..=n {
        for kk in 2..=m {
            let jj = m - kk;
            if cache.contains_key(&(jj, kk)) {
                continue;
            }
            let r = if (jj, kk) == (0, 2) {
                JetRational::new(JetPolynomial::var(u(1, 1)).pow(2), 1)
            } else if jj >= 1 {
                cache[&(jj - 1, kk)].total(0)
            } else {
                let d = cache[&(0, kk - 1)].total(1);
                let table = &*cache;
                d.substitute(&|v| match v {
                    Var::U(a, b) if b >= 2 => Some(table[&(a as usize, b as usize)].clone()),
                    _ => None,
                })
            };
            cache.insert((jj, kk), r);
        }
    }
    cache[&(j, k)].clone()
}

/// Replace every dependent coordinate `u_{j,k}` (`k >= 2`) by `R_{j,k}`.
pub fn parabolic_pushforward(p: &JetRational) -> JetRational {
    let deps: Vec<Var> = p.variables().into_iter().filter(|v| matches!(v, Var::U(_, k) if *k >= 2)).collect();
    if deps.is_empty() {
        return p.clone();
    }
    let table: BTreeMap<Var, JetRational> = deps
        .into_iter()
        .map(|v| match v {
            Var::U(a, b) => (v, relation(a as usize, b as usize)),
            _ => unreachable!(),
        })
        .collect();
    p.substitute(&|v| table.get(&v).cloned())
}

/// A smooth scalar function of jet coordinates, evaluable over any scalar
/// field (including sensitivity-carrying duals, nestable).
pub trait JetFunction {
    /// Highest jet order read.
    fn order(&self) -> usize;
    fn eval<S: Scalar>(&self, p: &JetPoint<S>) -> Result<S, JetError>;

    /// Convenience: fill a parabolic jet and evaluate.
    fn at<S: Scalar>(&self, p: &ParabolicJet<S>) -> Result<S, JetError> {
        self.eval(&p.fill(self.order().min(p.order()))?)
    }
}

impl<F: JetFunction> JetFunction for &F {
    fn order(&self) -> usize {
        (*self).order()
    }
    fn eval<S: Scalar>(&self, p: &JetPoint<S>) -> Result<S, JetError> {
        (*self).eval(p)
    }
}

/// Gradient of `f` with respect to the independent coordinates of order
/// `f.order()`, in [`ParabolicJet::coord_vars`] order, plus the value.
pub fn gradient<S: Scalar, F: JetFunction>(f: &F, p: &JetPoint<S>) -> Result<(S, Vec<S>), JetError> {
    let m = f.order().max(2);
    let pj = p.parabolic(m)?;
    let coords = pj.coords();
    let n = coords.len();
    let seeded: Vec<Dual<S>> = coords.into_iter().enumerate().map(|(i, c)| Dual::variable(c, i, n)).collect();
    let dj = ParabolicJet::from_coords(m, &seeded).fill(m)?;
    let v = f.eval(&dj)?;
    let grad = (0..n).map(|i| v.grad(i)).collect();
    Ok((v.re, grad))
}

/// `D_x f` or `D_y f` at a filled jet point of order at least `f.order() + 1`.
pub fn total_derivative_at<S: Scalar, F: JetFunction>(f: &F, dir: Dir, p: &JetPoint<S>) -> Result<S, JetError> {
    let m = f.order().max(2);
    p.require(m + 1)?;
    let (_, grad) = gradient(f, p)?;
    let vars = ParabolicJet::<S>::coord_vars(m);
    let mut acc = S::zero();
    for (g, v) in grad.into_iter().zip(vars) {
        let image = match (v, dir) {
            (Var::X, Dir::X) | (Var::Y, Dir::Y) => S::one(),
            (Var::X, Dir::Y) | (Var::Y, Dir::X) => S::zero(),
            (Var::U(j, k), Dir::X) => p.u(j as usize + 1, k as usize),
            (Var::U(j, k), Dir::Y) => p.u(j as usize, k as usize + 1),
        };
        acc = acc + g * image;
    }
    Ok(acc)
}

/// `D_x f` or `D_y f` at a parabolic jet (dependent jets filled internally).
pub fn total_derivative<S: Scalar, F: JetFunction>(f: &F, dir: Dir, p: &ParabolicJet<S>) -> Result<S, JetError> {
    let need = f.order().max(2) + 1;
    if p.order() < need {
        return Err(JetError::InsufficientOrder { need, have: p.order() });
    }
    total_derivative_at(f, dir, &p.fill(need)?)
}

/// The total derivative as a jet function in its own right (nestable).
#[derive(Debug, Clone)]
pub struct Total<F> {
    pub f: F,
    pub dir: Dir,
}

impl<F: JetFunction> JetFunction for Total<F> {
    fn order(&self) -> usize {
        self.f.order().max(2) + 1
    }
    fn eval<S: Scalar>(&self, p: &JetPoint<S>) -> Result<S, JetError> {
        total_derivative_at(&self.f, self.dir, p)
    }
}

/// A single jet coordinate viewed as a jet function.
#[derive(Debug, Clone, Copy)]
pub struct Coord(pub usize, pub usize);

impl JetFunction for Coord {
    fn order(&self) -> usize {
        self.0 + self.1
    }
    fn eval<S: Scalar>(&self, p: &JetPoint<S>) -> Result<S, JetError> {
        p.require(self.0 + self.1)?;
        Ok(p.u(self.0, self.1))
    }
}

/// A symbolic jet polynomial or rational function viewed as a jet function.
#[derive(Debug, Clone)]
pub struct Symbolic(pub JetRational);

impl JetFunction for Symbolic {
    fn order(&self) -> usize {
        self.0.num.max_jet_order().max(if self.0.den > 0 { 2 } else { 0 })
    }
    fn eval<S: Scalar>(&self, p: &JetPoint<S>) -> Result<S, JetError> {
        p.require(self.order())?;
        Ok(self.0.eval(&|v| p.value(v)))
    }
}

/// Exact value of a symbolic relation at a rational parabolic jet.
pub fn eval_relation(r: &JetRational, p: &ParabolicJet<Q>) -> Q {
    r.eval(&|v| match v {
        Var::X => p.x.clone(),
        Var::Y => p.y.clone(),
        Var::U(j, k) => p.get(j as usize, k as usize),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetpoly::parse_poly;
    use crate::scalar::{q, qi};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_qjet(rng: &mut ChaCha8Rng, n: usize) -> ParabolicJet<Q> {
        loop {
            let p = ParabolicJet::from_fn(qi(0), qi(0), n, |_, _| q(rng.gen_range(-12..=12), rng.gen_range(1..=4)));
            if p.get(2, 0) != qi(0) {
                return p;
            }
        }
    }

    #[test]
    fn printed_u12_relation() {
        let printed = JetRational::new(parse_poly("2*u11*u21*u20 - u11^2*u30"), 2);
        assert_eq!(relation(1, 2), printed);
        assert_eq!(relation(0, 2), JetRational::new(parse_poly("u11^2"), 1));
    }

    #[test]
    fn relations_vanish_with_u11() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = random_qjet(&mut rng, 4);
        p.set(1, 1, qi(0));
        let jp = p.fill(3).unwrap();
        for (j, k) in [(0, 2), (0, 3), (1, 2)] {
            assert_eq!(jp.u(j, k), qi(0));
        }
    }

    #[test]
    fn numeric_fill_matches_symbolic_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let p = random_qjet(&mut rng, 6);
            let jp = p.fill(6).unwrap();
            for n in 2..=6 {
                for k in 2..=n {
                    assert_eq!(jp.u(n - k, k), eval_relation(&relation(n - k, k), &p), "u{}{}", n - k, k);
                }
            }
        }
    }

    #[test]
    fn cone_graph_jets() {
        // u = x^2 / (2 (1 - y)) = sum_k x^2 y^k / 2, so u_{2,k} = k!
        let p = ParabolicJet::from_fn(qi(0), qi(0), 6, |j, k| if j == 2 && k <= 1 { qi(1) } else { qi(0) });
        let jp = p.fill(6).unwrap();
        assert_eq!(jp.u(2, 2), qi(2));
        assert_eq!(jp.u(2, 3), qi(6));
        assert_eq!(jp.u(2, 4), qi(24));
        assert_eq!(jp.u(0, 4), qi(0));
        let s = Series::<Q>::from_monomials(2, 6, |e| if e[0] == 2 { q(1, 2) } else { qi(0) });
        let direct = jets_of_series(&s);
        assert_eq!(direct.u(2, 3), qi(6));
        assert_eq!(direct.to_series(), jp.to_series());
    }

    #[test]
    fn hessian_and_its_derivatives_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_qjet(&mut rng, 6);
        let jp = p.fill(6).unwrap();
        let h = parse_poly("u20*u02 - u11^2");
        let mut fs = vec![h.clone()];
        fs.push(h.total(0));
        fs.push(h.total(1));
        fs.push(h.total(0).total(1));
        fs.push(h.total(1).total(1).total(1));
        for f in fs {
            assert_eq!(f.eval(&|v| jp.value(v)), qi(0));
        }
    }

    #[test]
    fn total_derivative_chain_rule() {
        let f = Symbolic(JetRational::from_poly(parse_poly("u20^2")));
        let p = ParabolicJet::from_fn(0.0, 0.0, 4, |j, k| (j as f64) * 0.3 + (k as f64) * 0.7 + 0.1);
        let d = total_derivative(&f, Dir::X, &p).unwrap();
        assert!((d - 2.0 * p.get(2, 0) * p.get(3, 0)).abs() < 1e-14);
        let err = total_derivative(&f, Dir::X, &p.truncate(2)).unwrap_err();
        assert_eq!(err, JetError::InsufficientOrder { need: 3, have: 2 });
    }

    #[test]
    fn total_derivatives_match_symbolic_and_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_qjet(&mut rng, 6);
        let f = Symbolic(JetRational::new(parse_poly("u21*u11 - u30*u10^2 + x*u01"), 1));
        let jp = p.fill(6).unwrap();
        for dir in [Dir::X, Dir::Y] {
            let d = total_derivative(&f, dir, &p).unwrap();
            let sym = f.0.total(if dir == Dir::X { 0 } else { 1 });
            assert_eq!(d, sym.eval(&|v| jp.value(v)));
        }
        let xy = Total { f: Total { f: f.clone(), dir: Dir::Y }, dir: Dir::X };
        let yx = Total { f: Total { f, dir: Dir::X }, dir: Dir::Y };
        assert_eq!(xy.eval(&jp).unwrap(), yx.eval(&jp).unwrap());
    }

    #[test]
    fn pushforward_leaves_independent_expressions() {
        let r = JetRational::from_poly(parse_poly("u11*u30"));
        assert_eq!(parabolic_pushforward(&r), r);
        let r = JetRational::from_poly(parse_poly("u02"));
        assert_eq!(parabolic_pushforward(&r), relation(0, 2));
    }
}
