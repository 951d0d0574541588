//! Developable surfaces: the normalized cylinder, cone and tangential
//! families realized as graphs `u = F(x, y)`, classification of graphed
//! surfaces by point type and the vanishing of `S` and `W`, and the torsion
//! witness of a tangential directrix.

use crate::invariants::{a_factor, point_type, w_numerator, zero_test, PointType, ZeroTest};
use crate::jets::{jets_of_series, JetError, JetPoint};
use crate::scalar::Scalar;
use crate::series::{Series, SeriesError, TruncatedSeries1, TruncatedSeries2};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("degenerate family: {0}")]
    Degenerate(String),
    #[error("family series of order {have} is too short, {need} required")]
    InsufficientOrder { need: usize, have: usize },
    #[error("mixed point types: {first:?} at the origin but {other:?} at ({}, {})", at[0], at[1])]
    MixedType { first: PointType, other: PointType, at: [f64; 2] },
    #[error("tolerance cannot separate zero from nonzero: {0}")]
    AmbiguousTolerance(String),
    #[error("sample grid and jet criterion disagree on whether {0} vanishes identically")]
    CriteriaDisagree(&'static str),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// A surface given directly or through one of the normalized developable
/// parametrizations.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceFamily<S> {
    /// `u = F(x, y)`.
    Graph { series: TruncatedSeries2<S> },
    /// `u = f(x)`, ruled by lines parallel to the `y`-axis.
    Cylinder { profile: TruncatedSeries1<S> },
    /// Apex `(0, 1, 0)`, directrix `(t, 0, c(t))` with `c(0) = c'(0) = 0`, `c'' (0) != 0`:
    /// `x = (1 - v) t`, `y = v`, `u = (1 - v) c(t)`, marked point `(t, v) = (0, 0)`.
    Cone { directrix_c: TruncatedSeries1<S> },
    /// Tangent lines of `(a(t), -1 + t, c(t))` with `a, c, a', c'` vanishing at 0:
    /// `x = a + v a'`, `y = -1 + t + v`, `u = c + v c'`, marked point `(t, v) = (0, 1)`.
    Tangential { a: TruncatedSeries1<S>, c: TruncatedSeries1<S> },
}

/// Kind of a developable (everywhere parabolic) surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DevelopableKind {
    Cylinder,
    Cone,
    Tangential,
}

impl DevelopableKind {
    pub fn label(self) -> &'static str {
        match self {
            DevelopableKind::Cylinder => "Cylinder",
            DevelopableKind::Cone => "Cone",
            DevelopableKind::Tangential => "Tangential",
        }
    }
}

/// The values behind a classification, for auditing borderline calls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witnesses {
    /// `S` at the origin.
    pub s: Option<f64>,
    /// `W` at the origin (when `S != 0` there).
    pub w: Option<f64>,
    /// Largest `|u20 u21 - u11 u30|` over the sample grid.
    pub s_numerator_grid_max: Option<f64>,
    /// Largest `|Wnum|` over the sample grid.
    pub w_numerator_grid_max: Option<f64>,
    /// Largest Taylor coefficient of `u20 u21 - u11 u30` at the origin.
    pub s_numerator_jet_max: Option<f64>,
    /// Largest Taylor coefficient of `Wnum` at the origin.
    pub w_numerator_jet_max: Option<f64>,
    pub samples: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub point_type: PointType,
    /// Set when the surface is parabolic at every sample.
    pub kind: Option<DevelopableKind>,
    /// `(x, y, u) -> (y, x, -u)` was applied so that `u20` dominates `u02`.
    pub swapped_xy: bool,
    pub witnesses: Witnesses,
}

fn need<S: Scalar>(s: &Series<S>, order: usize) -> Result<(), ClassifyError> {
    if s.order() < order {
        Err(ClassifyError::InsufficientOrder { need: order, have: s.order() })
    } else {
        Ok(())
    }
}

fn univariate<S: Scalar>(s: &Series<S>, what: &str) -> Result<(), ClassifyError> {
    if s.nvars() != 1 {
        return Err(ClassifyError::Degenerate(format!("{what} must be univariate, got {} variables", s.nvars())));
    }
    Ok(())
}

/// `g(t)` as a bivariate series in `(t, w)` of the given order.
fn lift<S: Scalar>(g: &Series<S>, order: usize) -> Series<S> {
    Series::from_monomials(2, order, |e| if e[1] == 0 { g.mono(&[e[0]]) } else { S::zero() })
}

/// Solve `u(t, w) = F(x(t, w), y(t, w))` for `F`, where `(x, y)` vanish at the
/// origin with an invertible linear part `L`: the map is reversed by the
/// fixed-point iteration `z = L^-1 ((x, y) - N(z))`, which gains one order per
/// step, and `F = u(z(x, y))`.
fn graph_of<S: Scalar>(px: &Series<S>, py: &Series<S>, pu: &Series<S>) -> Result<Series<S>, ClassifyError> {
    let order = px.order().min(py.order()).min(pu.order());
    let (l11, l12) = (px.mono(&[1, 0]), px.mono(&[0, 1]));
    let (l21, l22) = (py.mono(&[1, 0]), py.mono(&[0, 1]));
    let det = l11.clone() * l22.clone() - l12.clone() * l21.clone();
    if det.is_zero() {
        return Err(ClassifyError::Degenerate("the parametrization is not a graph over (x, y) at the marked point".into()));
    }
    let nonlinear = |p: &Series<S>| {
        let mut n = p.with_order(order);
        n.set_mono(&[1, 0], S::zero());
        n.set_mono(&[0, 1], S::zero());
        n
    };
    let (nx, ny) = (nonlinear(px), nonlinear(py));
    let x = Series::var(2, order, 0);
    let y = Series::var(2, order, 1);
    let inv = det.recip();
    let solve = |rx: &Series<S>, ry: &Series<S>| -> Result<(Series<S>, Series<S>), ClassifyError> {
        let zt = rx.scale(&l22).sub(&ry.scale(&l12))?.scale(&inv);
        let zw = ry.scale(&l11).sub(&rx.scale(&l21))?.scale(&inv);
        Ok((zt, zw))
    };
    let (mut zt, mut zw) = solve(&x, &y)?;
    // step k makes z exact through degree k, so it only needs that order
    for k in 2..=order {
        let z = [zt.with_order(k), zw.with_order(k)];
        let rx = x.with_order(k).sub(&nx.with_order(k).compose(&z)?)?;
        let ry = y.with_order(k).sub(&ny.with_order(k).compose(&z)?)?;
        let (t, w) = solve(&rx, &ry)?;
        (zt, zw) = (t.with_order(order), w.with_order(order));
    }
    Ok(pu.with_order(order).compose(&[zt, zw])?)
}

/// Taylor coefficients at the marked point of the graph `u = F(x, y)` of a
/// family, to the given order. Cone directrices need order `>= order`,
/// tangential `a, c` need order `>= order + 1` (the ruling uses `a'`, `c'`).
pub fn realize_graph<S: Scalar>(fam: &SurfaceFamily<S>, order: usize) -> Result<TruncatedSeries2<S>, ClassifyError> {
    match fam {
        SurfaceFamily::Graph { series } => {
            if series.nvars() != 2 {
                return Err(ClassifyError::Degenerate(format!("graph series must be bivariate, got {} variables", series.nvars())));
            }
            need(series, order)?;
            Ok(series.with_order(order))
        }
        SurfaceFamily::Cylinder { profile } => {
            univariate(profile, "cylinder profile")?;
            need(profile, order)?;
            if order >= 2 && profile.d1(2).is_zero() {
                return Err(ClassifyError::Degenerate("cylinder profile has f''(0) = 0".into()));
            }
            Ok(lift(profile, order))
        }
        SurfaceFamily::Cone { directrix_c: c } => {
            univariate(c, "cone directrix")?;
            need(c, order.max(2))?;
            if !c.d1(0).is_zero() || !c.d1(1).is_zero() {
                return Err(ClassifyError::Degenerate("cone directrix needs c(0) = c'(0) = 0".into()));
            }
            if c.d1(2).is_zero() {
                return Err(ClassifyError::Degenerate("cone directrix has c2 = 0".into()));
            }
            let t = Series::var(2, order, 0);
            let v = Series::var(2, order, 1);
            let one_minus_v = Series::constant(2, order, S::one()).sub(&v)?;
            let px = one_minus_v.mul(&t)?;
            let pu = one_minus_v.mul(&lift(c, order))?;
            graph_of(&px, &v, &pu)
        }
        SurfaceFamily::Tangential { a, c } => {
            univariate(a, "tangential a")?;
            univariate(c, "tangential c")?;
            need(a, order + 1)?;
            need(c, order + 1)?;
            for (name, g) in [("a", a), ("c", c)] {
                if !g.d1(0).is_zero() || !g.d1(1).is_zero() {
                    return Err(ClassifyError::Degenerate(format!("tangential {name} needs {name}(0) = {name}'(0) = 0")));
                }
            }
            if a.d1(2).is_zero() {
                return Err(ClassifyError::Degenerate("tangential family has a2 = 0".into()));
            }
            // w = v - 1 centres the marked point (t, v) = (0, 1)
            let t = Series::var(2, order, 0);
            let w = Series::var(2, order, 1);
            let one_plus_w = Series::constant(2, order, S::one()).add(&w)?;
            let ruled = |g: &Series<S>| -> Result<Series<S>, ClassifyError> {
                Ok(lift(g, order).add(&one_plus_w.mul(&lift(&g.partial(0), order))?)?)
            };
            graph_of(&ruled(a)?, &t.add(&w)?, &ruled(c)?)
        }
    }
}

/// `a3 c2 - a2 c3`; the tangential surface has `W^3 = 1 / (a3 c2 - a2 c3)`.
pub fn tangential_witness<S: Scalar>(a: &TruncatedSeries1<S>, c: &TruncatedSeries1<S>) -> S {
    a.d1(3) * c.d1(2) - a.d1(2) * c.d1(3)
}

/// `(1 + a'^2 + c'^2) (c'' a''' - a'' c''') / (a''^2 + c''^2)^2` at `t0` for the
/// space curve `(a(t), -1 + t, c(t))`; its zeros are the cuspidal-edge points
/// of the tangential surface.
pub fn torsion<S: Scalar>(a: &TruncatedSeries1<S>, c: &TruncatedSeries1<S>, t0: &S) -> Result<S, ClassifyError> {
    univariate(a, "a")?;
    univariate(c, "c")?;
    need(a, 3)?;
    need(c, 3)?;
    let (a, c) = (a.shift(std::slice::from_ref(t0)), c.shift(std::slice::from_ref(t0)));
    let den = a.d1(2) * a.d1(2) + c.d1(2) * c.d1(2);
    if den.is_zero() {
        return Err(ClassifyError::Degenerate("a'' and c'' both vanish: no osculating plane".into()));
    }
    let num = S::one() + a.d1(1) * a.d1(1) + c.d1(1) * c.d1(1);
    Ok(num * (c.d1(2) * a.d1(3) - a.d1(2) * c.d1(3)) / (den.clone() * den))
}

/// Geometric growth rate `rho` of the Taylor coefficients (at least 1):
/// degree-`d` monomial coefficients are about `M_2 rho^(d - 2)`.
pub fn coefficient_growth(f: &Series<f64>) -> f64 {
    let mut m = vec![0.0f64; f.order() + 1];
    for (e, c) in f.terms() {
        let d: usize = e.iter().sum();
        m[d] = m[d].max(c.abs());
    }
    let base = if f.order() >= 2 && m[2] > 0.0 { m[2] } else { 1.0 };
    (3..=f.order()).fold(1.0f64, |r, d| r.max((m[d] / base).powf(1.0 / (d - 2) as f64)))
}

/// A `3 x 3` grid of base points around the origin, spaced so that truncating
/// `f` perturbs fourth derivatives at the grid points by about
/// `0.1^(order - 3) tol` relative to their size.
pub fn sample_grid(f: &Series<f64>, tol: f64) -> Vec<[f64; 2]> {
    let order = f.order();
    let r = if order > 3 { (0.1 * tol.powf(1.0 / (order - 3) as f64)).min(0.1) / coefficient_growth(f) } else { 0.0 };
    let mut out = vec![[0.0, 0.0]];
    for i in -1..=1 {
        for j in -1..=1 {
            if i != 0 || j != 0 {
                out.push([i as f64 * r, j as f64 * r]);
            }
        }
    }
    out
}

fn deriv_series(f: &Series<f64>, j: usize, k: usize) -> Series<f64> {
    let mut g = f.clone();
    for _ in 0..j {
        g = g.partial(0);
    }
    for _ in 0..k {
        g = g.partial(1);
    }
    g
}

/// Product terms whose sum is a numerator: `(sign * coefficient, factors)`.
type Terms = &'static [(f64, &'static [(usize, usize)])];

const S_TERMS: Terms = &[(1.0, &[(2, 0), (2, 1)]), (-1.0, &[(1, 1), (3, 0)])];
const W_TERMS: Terms = &[
    (1.0, &[(2, 0), (2, 0), (3, 1)]),
    (-1.0, &[(2, 0), (4, 0), (1, 1)]),
    (2.0, &[(3, 0), (3, 0), (1, 1)]),
    (-2.0, &[(3, 0), (2, 1), (2, 0)]),
];

/// The numerator as a Taylor series at the origin, and the largest
/// coefficient among its individual terms (the cancellation scale).
fn numerator_series(f: &Series<f64>, terms: Terms) -> Result<(Series<f64>, f64), ClassifyError> {
    let mut acc: Option<Series<f64>> = None;
    let mut scale = 0.0f64;
    for (k, factors) in terms {
        let mut t = deriv_series(f, factors[0].0, factors[0].1);
        for &(j, l) in &factors[1..] {
            t = t.mul(&deriv_series(f, j, l))?;
        }
        let t = t.scale(k);
        scale = scale.max(t.max_abs());
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t)?,
        });
    }
    Ok((acc.expect("nonempty"), scale))
}

fn term_scale(p: &JetPoint<f64>, terms: Terms) -> f64 {
    terms
        .iter()
        .map(|(k, fs)| fs.iter().fold(k.abs(), |m, &(j, l)| m * p.u(j, l).abs()))
        .fold(0.0, f64::max)
}

/// `Some(true)` if every value tests as zero, `Some(false)` if any is clearly nonzero.
fn all_zero(tests: impl IntoIterator<Item = ZeroTest>) -> Option<bool> {
    let mut ambiguous = false;
    for t in tests {
        match t {
            ZeroTest::NonZero => return Some(false),
            ZeroTest::Ambiguous => ambiguous = true,
            ZeroTest::Zero => {}
        }
    }
    if ambiguous {
        None
    } else {
        Some(true)
    }
}

/// Decide `numerator == 0` identically: by the Taylor coefficients at the
/// origin and by the values on the grid. Both criteria must agree.
fn vanishes_identically(
    f: &Series<f64>,
    jets: &[JetPoint<f64>],
    terms: Terms,
    eval: fn(&JetPoint<f64>) -> f64,
    name: &'static str,
    tol: f64,
) -> Result<(bool, f64, f64), ClassifyError> {
    let (series, scale) = numerator_series(f, terms)?;
    let jet_max = series.max_abs();
    let by_jet = all_zero(series.terms().map(|(_, c)| zero_test(*c, scale, tol)));
    let values: Vec<(f64, f64)> = jets.iter().map(|p| (eval(p), term_scale(p, terms))).collect();
    let grid_max = values.iter().fold(0.0f64, |m, v| m.max(v.0.abs()));
    let by_grid = all_zero(values.iter().map(|&(v, s)| zero_test(v, s, tol)));
    match (by_jet, by_grid) {
        (Some(a), Some(b)) if a == b => Ok((a, grid_max, jet_max)),
        (Some(_), Some(_)) => Err(ClassifyError::CriteriaDisagree(name)),
        // one clear nonzero settles it; the other criterion only fell in the band
        (Some(false), None) | (None, Some(false)) => Ok((false, grid_max, jet_max)),
        _ => Err(ClassifyError::AmbiguousTolerance(format!(
            "{name}: grid max {grid_max:e}, jet max {jet_max:e}, tol {tol:e}"
        ))),
    }
}

/// Point type at every sample and, for parabolic surfaces, the developable
/// kind: `S == 0` identically gives a cylinder, otherwise `W == 0`
/// identically a cone and `W != 0` a tangential surface. `F` is the Taylor
/// series at the origin; `samples` are base points near it (the origin's own
/// jet is always used).
pub fn classify(f: &Series<f64>, samples: &[[f64; 2]], tol: f64) -> Result<Classification, ClassifyError> {
    if f.nvars() != 2 {
        return Err(ClassifyError::Degenerate(format!("surface series must be bivariate, got {} variables", f.nvars())));
    }
    need(f, 2)?;
    let mut points: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    points.extend(samples.iter().filter(|h| **h != [0.0, 0.0]));
    let ambiguous = |e: JetError| match e {
        JetError::Domain(m) => ClassifyError::AmbiguousTolerance(m),
        e => ClassifyError::Jet(e),
    };
    let origin = jets_of_series(f);
    let first = point_type(&origin, tol).map_err(ambiguous)?;
    for h in &points[1..] {
        let other = point_type(&jets_of_series(&f.shift(h)), tol).map_err(ambiguous)?;
        if other != first {
            return Err(ClassifyError::MixedType { first, other, at: *h });
        }
    }
    let mut witnesses = Witnesses {
        s: None,
        w: None,
        s_numerator_grid_max: None,
        w_numerator_grid_max: None,
        s_numerator_jet_max: None,
        w_numerator_jet_max: None,
        samples: points.len(),
        tol,
    };
    if first != PointType::Parabolic {
        return Ok(Classification { point_type: first, kind: None, swapped_xy: false, witnesses });
    }
    need(f, 4)?;
    let swapped_xy = origin.u(2, 0).abs() < origin.u(0, 2).abs();
    let (g, points) = if swapped_xy {
        let g = Series::from_derivatives2(f.order(), |j, k| -f.d2(k, j));
        (g, points.iter().map(|h| [h[1], h[0]]).collect())
    } else {
        (f.clone(), points)
    };
    let jets: Vec<JetPoint<f64>> = points.iter().map(|h| jets_of_series(&g.shift(h))).collect();
    let p0 = &jets[0];
    let (u20, a) = (p0.u(2, 0), a_factor(p0));
    witnesses.s = Some(a / (u20 * u20));
    let (s_zero, gmax, jmax) = vanishes_identically(&g, &jets, S_TERMS, a_factor, "S", tol)?;
    witnesses.s_numerator_grid_max = Some(gmax);
    witnesses.s_numerator_jet_max = Some(jmax);
    if s_zero {
        return Ok(Classification { point_type: first, kind: Some(DevelopableKind::Cylinder), swapped_xy, witnesses });
    }
    if a != 0.0 {
        witnesses.w = Some(w_numerator(p0) / (u20 * u20 * a.cbrt().powi(2)));
    }
    let (w_zero, gmax, jmax) = vanishes_identically(&g, &jets, W_TERMS, w_numerator, "W", tol)?;
    witnesses.w_numerator_grid_max = Some(gmax);
    witnesses.w_numerator_jet_max = Some(jmax);
    let kind = if w_zero { DevelopableKind::Cone } else { DevelopableKind::Tangential };
    Ok(Classification { point_type: first, kind: Some(kind), swapped_xy, witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::{eval_s, eval_w_cubed};
    use crate::sampling::rng;
    use crate::scalar::{q, qi, Q};
    use proptest::prelude::*;
    use rand::Rng;

    fn poly1(coeffs: &[Q], order: usize) -> Series<Q> {
        Series::from_monomials(1, order, |e| coeffs.get(e[0]).cloned().unwrap_or_else(|| qi(0)))
    }

    fn derivs1(d: &[Q], order: usize) -> Series<Q> {
        Series::from_derivatives1(order, |i| d.get(i).cloned().unwrap_or_else(|| qi(0)))
    }

    fn cone(c: &[Q], order: usize) -> Series<Q> {
        realize_graph(&SurfaceFamily::Cone { directrix_c: derivs1(c, order) }, order).unwrap()
    }

    fn tangential(a: &[Q], c: &[Q], order: usize) -> Series<Q> {
        let fam = SurfaceFamily::Tangential { a: derivs1(a, order + 1), c: derivs1(c, order + 1) };
        realize_graph(&fam, order).unwrap()
    }

    #[test]
    fn cone_table() {
        // c = c2 t^2/2 + ... with symbolic-looking distinct values
        let c = [qi(0), qi(0), q(3, 2), q(-5, 7), q(2, 3), q(11, 5)];
        let f = cone(&c, 5);
        for k in 0..=5 {
            assert_eq!(f.d2(0, k), qi(0));
        }
        for k in 0..=4 {
            assert_eq!(f.d2(1, k), qi(0));
        }
        assert_eq!(f.d2(2, 0), c[2]);
        assert_eq!(f.d2(3, 0), c[3]);
        assert_eq!(f.d2(4, 0), c[4]);
        assert_eq!(f.d2(2, 1), c[2]);
        assert_eq!(f.d2(3, 1), qi(2) * c[3].clone());
        assert_eq!(f.d2(2, 2), qi(2) * c[2].clone());
        // F = (1 - y) c(x / (1 - y)): F_{j,k} = c_j (j + k - 1)! / (j - 1)!
        assert_eq!(f.d2(2, 3), qi(6) * c[2].clone());
        assert_eq!(f.d2(5, 0), c[5]);
    }

    #[test]
    fn tangential_table() {
        let (a2, a3, a4, a5) = (q(3, 2), q(-1, 3), q(5, 4), q(2, 7));
        let (c2, c3, c4, c5) = (q(-2, 5), q(7, 3), q(1, 6), q(-3, 2));
        let a = [qi(0), qi(0), a2.clone(), a3.clone(), a4.clone(), a5.clone()];
        let c = [qi(0), qi(0), c2.clone(), c3.clone(), c4.clone(), c5.clone()];
        let f = tangential(&a, &c, 4);
        let z = qi(0);
        assert_eq!(f.d2(1, 0), c2.clone() / a2.clone());
        for (j, k) in [(0, 1), (1, 1), (0, 2), (1, 2), (0, 3), (1, 3), (0, 4)] {
            assert_eq!(f.d2(j, k), z, "F{j}{k}");
        }
        let f20 = (a2.clone() * c3.clone() - a3.clone() * c2.clone()) / a2.powi(3);
        assert_eq!(f.d2(2, 0), f20);
        assert_eq!(f.d2(2, 1), -f20.clone());
        assert_eq!(f.d2(2, 2), qi(2) * f20);
        let f30 = (-a2.clone() * a3.clone() * c2.clone() + qi(3) * a3.powi(2) * c2.clone() - a2.clone() * a4.clone() * c2.clone()
            + a2.powi(2) * c3.clone()
            - qi(3) * a2.clone() * a3.clone() * c3.clone()
            + a2.powi(2) * c4.clone())
            / a2.powi(5);
        assert_eq!(f.d2(3, 0), f30);
        // order-4 entries, from an independent symbolic solve of the identity
        let f31 = -(qi(3) * a2.powi(2) * c3.clone() + qi(2) * a2.powi(2) * c4.clone() - qi(3) * a2.clone() * a3.clone() * c2.clone()
            - qi(6) * a2.clone() * a3.clone() * c3.clone()
            - qi(2) * a2.clone() * a4.clone() * c2.clone()
            + qi(6) * a3.powi(2) * c2.clone())
            / a2.powi(5);
        assert_eq!(f.d2(3, 1), f31);
        let f40 = (qi(3) * a2.powi(3) * c3.clone() + qi(3) * a2.powi(3) * c4.clone() + a2.powi(3) * c5.clone()
            - qi(3) * a2.powi(2) * a3.clone() * c2.clone()
            - qi(10) * a2.powi(2) * a3.clone() * c3.clone()
            - qi(6) * a2.powi(2) * a3.clone() * c4.clone()
            - qi(3) * a2.powi(2) * a4.clone() * c2.clone()
            - qi(4) * a2.powi(2) * a4.clone() * c3.clone()
            - a2.powi(2) * a5.clone() * c2.clone()
            + qi(10) * a2.clone() * a3.powi(2) * c2.clone()
            + qi(15) * a2.clone() * a3.powi(2) * c3.clone()
            + qi(10) * a2.clone() * a3.clone() * a4.clone() * c2.clone()
            - qi(15) * a3.powi(3) * c2.clone())
            / a2.powi(7);
        assert_eq!(f.d2(4, 0), f40);
    }

    fn witness_jet(f: &Series<Q>) -> JetPoint<Q> {
        jets_of_series(f)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cone_w_vanishes_exactly(c in proptest::collection::vec((-9i64..=9, 1i64..=5), 5)) {
            let mut d = vec![qi(0), qi(0)];
            d.extend(c.iter().map(|&(p, r)| q(p, r)));
            prop_assume!(!d[2].is_zero());
            let p = witness_jet(&cone(&d, 6));
            prop_assert_eq!(eval_s(&p).unwrap(), qi(1));
            prop_assert_eq!(w_numerator(&p), qi(0));
            prop_assert_eq!(eval_w_cubed(&p).unwrap(), qi(0));
        }

        #[test]
        fn tangential_w_cubed_is_the_torsion_witness(
            a in proptest::collection::vec((-9i64..=9, 1i64..=5), 4),
            c in proptest::collection::vec((-9i64..=9, 1i64..=5), 4),
        ) {
            let mut ad = vec![qi(0), qi(0)];
            ad.extend(a.iter().map(|&(p, r)| q(p, r)));
            let mut cd = vec![qi(0), qi(0)];
            cd.extend(c.iter().map(|&(p, r)| q(p, r)));
            let (af, cf) = (derivs1(&ad, 6), derivs1(&cd, 6));
            let witness = tangential_witness(&af, &cf);
            prop_assume!(!ad[2].is_zero() && !witness.is_zero());
            let p = witness_jet(&tangential(&ad, &cd, 5));
            prop_assert_eq!(eval_s(&p).unwrap(), qi(-1));
            prop_assert_eq!(eval_w_cubed(&p).unwrap(), witness.recip());
        }
    }

    fn classify_kind(f: &Series<Q>) -> Option<DevelopableKind> {
        let tol = 1e-9;
        classify(&f.to_f64(), &sample_grid(&f.to_f64(), tol), tol).unwrap().kind
    }

    #[test]
    fn figure_examples() {
        // u = x^2 - x^3
        let cyl = Series::from_monomials(2, 8, |e| match (e[0], e[1]) {
            (2, 0) => qi(1),
            (3, 0) => qi(-1),
            _ => qi(0),
        });
        assert_eq!(classify_kind(&cyl), Some(DevelopableKind::Cylinder));
        // u = x^2 / (2 - 2y)
        let cone_graph = Series::from_monomials(2, 8, |e| if e[0] == 2 { q(1, 2) } else { qi(0) });
        assert_eq!(classify_kind(&cone_graph), Some(DevelopableKind::Cone));
        assert_eq!(cone_graph, cone(&[qi(0), qi(0), qi(1)], 8));
        // tangents of (t^2/2, t, t^3/6), realized to order 6
        let f = tangential(&[qi(0), qi(0), qi(1)], &[qi(0), qi(0), qi(0), qi(1)], 6);
        assert_eq!(classify_kind(&f), Some(DevelopableKind::Tangential));
        let w = classify(&f.to_f64(), &sample_grid(&f.to_f64(), 1e-9), 1e-9).unwrap().witnesses.w.unwrap();
        assert!((w + 1.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn cylinder_profile_has_no_y_dependence() {
        let prof = poly1(&[qi(0), qi(0), q(1, 2)], 5);
        let f = realize_graph(&SurfaceFamily::Cylinder { profile: prof }, 5).unwrap();
        let expected = Series::from_monomials(2, 5, |e| if e == [2, 0] { q(1, 2) } else { qi(0) });
        assert_eq!(f, expected);
    }

    #[test]
    fn non_parabolic_surfaces() {
        let ell = Series::from_monomials(2, 5, |e| if e == [2, 0] || e == [0, 2] { qi(1) } else { qi(0) });
        let c = classify(&ell.to_f64(), &sample_grid(&ell.to_f64(), 1e-9), 1e-9).unwrap();
        assert_eq!((c.point_type, c.kind), (PointType::Elliptic, None));
        // u^2 = x^2 + y^2 - 1 near (0, 0, 1)... as a graph: hyperbolic saddle xy
        let hyp = Series::from_monomials(2, 5, |e| if e == [1, 1] { qi(1) } else { qi(0) });
        let c = classify(&hyp.to_f64(), &[], 1e-9).unwrap();
        assert_eq!(c.point_type, PointType::Hyperbolic);
        let flat = Series::<f64>::zero(2, 5);
        assert_eq!(classify(&flat, &sample_grid(&flat, 1e-9), 1e-9).unwrap().point_type, PointType::Flat);
    }

    #[test]
    fn mixed_types_are_rejected() {
        // u = x^2/2 + y^3: parabolic at the origin, hyperbolic/elliptic nearby
        let f = Series::from_monomials(2, 5, |e| match (e[0], e[1]) {
            (2, 0) => 0.5,
            (0, 3) => 1.0,
            _ => 0.0,
        });
        let err = classify(&f, &[[0.0, 0.5]], 1e-9).unwrap_err();
        assert!(matches!(err, ClassifyError::MixedType { first: PointType::Parabolic, other: PointType::Elliptic, .. }), "{err}");
    }

    #[test]
    fn u20_free_orientation_is_swapped() {
        // cone x^2/(2 - 2y) with x and y exchanged
        let g = Series::from_monomials(2, 8, |e| if e[1] == 2 { q(1, 2) } else { qi(0) });
        let c = classify(&g.to_f64(), &sample_grid(&g.to_f64(), 1e-9), 1e-9).unwrap();
        assert!(c.swapped_xy);
        assert_eq!(c.kind, Some(DevelopableKind::Cone));
    }

    #[test]
    fn degenerate_families() {
        let flat_dir = derivs1(&[qi(0), qi(0), qi(0), qi(1)], 6);
        assert!(matches!(realize_graph(&SurfaceFamily::Cone { directrix_c: flat_dir }, 6), Err(ClassifyError::Degenerate(_))));
        let fam = SurfaceFamily::Tangential { a: derivs1(&[qi(0), qi(0), qi(0), qi(1)], 7), c: derivs1(&[qi(0), qi(0), qi(1)], 7) };
        assert!(matches!(realize_graph(&fam, 6), Err(ClassifyError::Degenerate(_))));
        let fam = SurfaceFamily::Tangential { a: derivs1(&[qi(0), qi(0), qi(1)], 6), c: derivs1(&[qi(0), qi(0), qi(1)], 6) };
        assert!(matches!(realize_graph(&fam, 6), Err(ClassifyError::InsufficientOrder { need: 7, have: 6 })));
        let off = derivs1(&[qi(0), qi(1), qi(1)], 6);
        assert!(matches!(realize_graph(&SurfaceFamily::Cone { directrix_c: off }, 6), Err(ClassifyError::Degenerate(_))));
    }

    #[test]
    fn torsion_examples() {
        let z = qi(0);
        let a = poly1(&[qi(0), qi(0), q(-1, 2)], 5);
        let c = poly1(&[qi(0), qi(0), qi(0), q(1, 6)], 5);
        assert_eq!(torsion(&a, &c, &z).unwrap(), qi(1));
        let c4 = poly1(&[qi(0), qi(0), qi(0), qi(0), q(1, 24)], 5);
        assert_eq!(torsion(&a, &c4, &z).unwrap(), qi(0));
        assert_ne!(torsion(&a, &c4, &q(1, 3)).unwrap(), qi(0));
        let planar = poly1(&[], 5);
        for t0 in [q(-1, 2), qi(0), q(3, 4)] {
            assert_eq!(torsion(&a, &planar, &t0).unwrap(), qi(0));
        }
        let line = poly1(&[qi(0), qi(1)], 5);
        assert!(matches!(torsion(&line, &planar, &z), Err(ClassifyError::Degenerate(_))));
        // the witness a3 c2 - a2 c3 and the torsion at 0 share their sign
        let (af, cf) = (derivs1(&[qi(0), qi(0), qi(2), qi(-1)], 5), derivs1(&[qi(0), qi(0), qi(1), qi(3)], 5));
        let tau = torsion(&af, &cf, &z).unwrap();
        assert_eq!(tau.to_f64().signum(), tangential_witness(&af, &cf).to_f64().signum());
    }

    fn random_derivs(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<Q> {
        let mut d = vec![qi(0), qi(0)];
        for _ in 2..=n {
            d.push(q(r.gen_range(-4..=4), r.gen_range(1..=3)));
        }
        d
    }

    #[test]
    fn round_trip_each_kind() {
        let mut r = rng(22);
        let order = 9;
        let mut done = [0usize; 3];
        while done.iter().any(|&k| k < 50) {
            let which = done.iter().position(|&k| k < 50).unwrap();
            let (fam, kind) = match which {
                0 => {
                    let p = derivs1(&random_derivs(&mut r, order), order);
                    if p.d1(2).is_zero() {
                        continue;
                    }
                    (SurfaceFamily::Cylinder { profile: p }, DevelopableKind::Cylinder)
                }
                1 => {
                    let c = derivs1(&random_derivs(&mut r, order), order);
                    if c.d1(2).is_zero() {
                        continue;
                    }
                    (SurfaceFamily::Cone { directrix_c: c }, DevelopableKind::Cone)
                }
                _ => {
                    let a = derivs1(&random_derivs(&mut r, order + 1), order + 1);
                    let c = derivs1(&random_derivs(&mut r, order + 1), order + 1);
                    if a.d1(2).is_zero() || tangential_witness(&a, &c).is_zero() {
                        continue;
                    }
                    (SurfaceFamily::Tangential { a, c }, DevelopableKind::Tangential)
                }
            };
            let f = realize_graph(&fam, order).unwrap();
            let tol = 1e-9;
            let got = classify(&f.to_f64(), &sample_grid(&f.to_f64(), tol), tol);
            assert!(matches!(&got, Ok(c) if c.kind == Some(kind)), "{got:?}\n{:?}", f.to_f64());
            done[which] += 1;
        }
    }
}
