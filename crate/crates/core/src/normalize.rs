//! Progressive power-series normalization: each loop applies one simple
//! special-affine matrix that sends the next Taylor coefficients to constants,
//! and the surviving coefficients are read off as differential invariants.
//! Generic over [`Scalar`] (branch decisions use the primal value), so the
//! pipeline itself is differentiable and serves as the oracle `inv(u_{j,k})`.

use crate::invariants::{zero_test, Sign, ZeroTest};
use crate::jets::{JetError, JetFunction, JetPoint, ParabolicJet};
use crate::scalar::{pow_third, Scalar};
use crate::series::{apply_affine, apply_affine_curve, AffineTransform2, AffineTransform3, Series};
use serde::Serialize;
use std::collections::BTreeMap;

/// Working truncation order: reads `Y = G_{7,0}` with one guard order.
pub const DEFAULT_ORDER: usize = 8;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizeOptions {
    pub tol: f64,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions { tol: DEFAULT_TOL }
    }
}

/// Branch reached by a normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormalBranch {
    /// Curve whose second derivative vanishes.
    FlatCurve,
    /// SL2 curve normal form `x^2/2 + 0 + G4 x^4/4! + ...`.
    Sl2,
    /// GL2 curve with vanishing `3 u2 u4 - 5 u3^2`.
    Parabola,
    /// GL2 curve normal form `x^2/2 ± x^4/4! + G5 x^5/5! + ...`.
    Gl2(Sign),
    /// Surface with `S = 0`: normalized through its GL2 cross-section.
    Cylinder(Option<Sign>),
    /// `S != 0`, `W = 0`, `X = 0`.
    ConeFlat,
    /// `S != 0`, `W = 0`, `X != 0` (`G_{6,0}` normalized to 0).
    Cone,
    /// `S != 0`, `W != 0`.
    Generic,
}

impl NormalBranch {
    pub fn label(self) -> String {
        match self {
            NormalBranch::FlatCurve => "FlatCurve".into(),
            NormalBranch::Sl2 => "SL2".into(),
            NormalBranch::Parabola => "Parabola".into(),
            NormalBranch::Gl2(s) => format!("{s:?}"),
            NormalBranch::Cylinder(None) => "Cylinder-branch/Parabola".into(),
            NormalBranch::Cylinder(Some(s)) => format!("Cylinder-branch/{s:?}"),
            NormalBranch::ConeFlat => "Cone-branch/X=0".into(),
            NormalBranch::Cone => "Cone-branch".into(),
            NormalBranch::Generic => "Generic".into(),
        }
    }
}

/// Composed transform acting on the original series.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform<S> {
    Surface(AffineTransform3<S>),
    Curve(AffineTransform2<S>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormResult<S> {
    pub branch: NormalBranch,
    pub series: Series<S>,
    pub transform: Transform<S>,
    /// Named invariant readings (`W`, `M`, `X`, `Y`, `G4`, ...).
    pub readings: BTreeMap<String, S>,
}

impl<S: Scalar> NormalFormResult<S> {
    /// Normal-form coefficient `G_{j,k}` (or `G_j` for curves).
    pub fn coeff(&self, j: usize, k: usize) -> S {
        if self.series.nvars() == 1 {
            self.series.d1(j)
        } else {
            self.series.d2(j, k)
        }
    }

    pub fn surface_transform(&self) -> Option<&AffineTransform3<S>> {
        match &self.transform {
            Transform::Surface(t) => Some(t),
            Transform::Curve(_) => None,
        }
    }

    pub fn curve_transform(&self) -> Option<&AffineTransform2<S>> {
        match &self.transform {
            Transform::Curve(t) => Some(t),
            Transform::Surface(_) => None,
        }
    }
}

fn err(msg: impl Into<String>) -> JetError {
    JetError::Normalize(msg.into())
}

fn cbrt<S: Scalar>(v: &S, p: i32) -> Result<S, JetError> {
    pow_third(v, p).ok_or_else(|| err("cube root not representable in this scalar field"))
}

fn sqrt<S: Scalar>(v: &S) -> Result<S, JetError> {
    v.sqrt().ok_or_else(|| err("square root not representable in this scalar field"))
}

fn abs<S: Scalar>(v: S) -> S {
    if v.to_f64() < 0.0 {
        -v
    } else {
        v
    }
}

/// Scale-aware zero decision on a coefficient, erroring inside the ambiguity band.
fn is_zero_at<S: Scalar>(v: &S, scale: f64, tol: f64, what: &str) -> Result<bool, JetError> {
    match zero_test(v.to_f64(), scale, tol) {
        ZeroTest::Zero => Ok(true),
        ZeroTest::NonZero => Ok(false),
        ZeroTest::Ambiguous => Err(err(format!("ambiguous branch: {what} = {:e} (tol {tol:e})", v.to_f64()))),
    }
}

fn order_scale<S: Scalar>(g: &Series<S>, upto: usize) -> f64 {
    let mut m = 0.0f64;
    for d in 2..=upto.min(g.order()) {
        for k in 0..=d {
            m = m.max(g.d2(d - k, k).abs_f64());
        }
    }
    m
}

fn curve_scale<S: Scalar>(g: &Series<S>, upto: usize) -> f64 {
    (2..=upto.min(g.order())).map(|d| g.d1(d).abs_f64()).fold(0.0, f64::max)
}

fn lin<S: Scalar>(m: [[S; 3]; 3]) -> AffineTransform3<S> {
    AffineTransform3::linear(m)
}

fn z<S: Scalar>() -> S {
    S::zero()
}

fn o<S: Scalar>() -> S {
    S::one()
}

struct Stage<S> {
    g: Series<S>,
    total: AffineTransform3<S>,
}

impl<S: Scalar> Stage<S> {
    fn apply(&mut self, t: AffineTransform3<S>) -> Result<(), JetError> {
        self.g = apply_affine(&self.g, &t)?;
        self.total = self.total.then(&t);
        Ok(())
    }
}

/// Normalize an SL2 curve: `G2 = 1`, `G3 = 0`; reads `G4..` as `G4`, `G5`, ...
pub fn normalize_curve_sl2<S: Scalar>(f: &Series<S>, opts: &NormalizeOptions) -> Result<NormalFormResult<S>, JetError> {
    let (mut g, mut total) = curve_loop0(f)?;
    let f2 = g.d1(2);
    if is_zero_at(&f2, curve_scale(&g, 2), opts.tol, "F2")? {
        return Err(err("F2 vanishes: flat curve"));
    }
    let a = cbrt(&f2, -1)?;
    let t1 = AffineTransform2::linear(a, z(), z(), cbrt(&f2, 1)?);
    g = apply_affine_curve(&g, &t1)?;
    total = total.then(&t1);
    if g.order() >= 3 {
        let t2 = AffineTransform2::linear(o(), -g.d1(3) / S::from_i64(3), z(), o());
        g = apply_affine_curve(&g, &t2)?;
        total = total.then(&t2);
    }
    let readings = (4..=g.order()).map(|k| (format!("G{k}"), g.d1(k))).collect();
    Ok(NormalFormResult { branch: NormalBranch::Sl2, series: g, transform: Transform::Curve(total), readings })
}

fn curve_loop0<S: Scalar>(f: &Series<S>) -> Result<(Series<S>, AffineTransform2<S>), JetError> {
    if f.nvars() != 1 {
        return Err(err("a curve needs a univariate series"));
    }
    let mut t0 = AffineTransform2::linear(o(), z(), if f.order() >= 1 { f.d1(1) } else { z() }, o());
    t0.f = f.d1(0);
    Ok((apply_affine_curve(f, &t0)?, t0))
}

/// Normalize a GL2 curve: `G2 = 1`, `G3 = 0`, `G4 = ±1` (or parabola);
/// reads `I5 = G5`, `G6`, `G7`, ...
pub fn normalize_curve_gl2<S: Scalar>(f: &Series<S>, opts: &NormalizeOptions) -> Result<NormalFormResult<S>, JetError> {
    let (mut g, mut total) = curve_loop0(f)?;
    let f2 = g.d1(2);
    if is_zero_at(&f2, curve_scale(&g, 2), opts.tol, "F2")? {
        return Err(err("F2 vanishes: flat curve"));
    }
    let t1 = AffineTransform2::linear(o(), z(), z(), f2);
    g = apply_affine_curve(&g, &t1)?;
    total = total.then(&t1);
    if g.order() >= 3 {
        let t2 = AffineTransform2::linear(o(), -g.d1(3) / S::from_i64(3), z(), o());
        g = apply_affine_curve(&g, &t2)?;
        total = total.then(&t2);
    }
    let mut branch = NormalBranch::Parabola;
    if g.order() >= 4 {
        let f4 = g.d1(4);
        if !is_zero_at(&f4, curve_scale(&g, 4), opts.tol, "F4")? {
            let sign = if f4.to_f64() > 0.0 { Sign::Plus } else { Sign::Minus };
            let m = abs(f4);
            let a = sqrt(&m)?.recip();
            let t3 = AffineTransform2::linear(a, z(), z(), m.recip());
            g = apply_affine_curve(&g, &t3)?;
            total = total.then(&t3);
            branch = NormalBranch::Gl2(sign);
        }
    }
    let first = if branch == NormalBranch::Parabola { 4 } else { 5 };
    let readings = (first..=g.order()).map(|k| (format!("G{k}"), g.d1(k))).collect();
    Ok(NormalFormResult { branch, series: g, transform: Transform::Curve(total), readings })
}

/// Maximum over the Taylor coefficients of `F_xx F_yy - F_xy^2` (relative to
/// the scale of the second-order part) — zero for parabolic surfaces.
pub fn parabolic_defect<S: Scalar>(f: &Series<S>) -> f64 {
    if f.order() < 2 {
        return 0.0;
    }
    let fxx = f.partial(0).partial(0);
    let fyy = f.partial(1).partial(1);
    let fxy = f.partial(0).partial(1);
    let h = match fxx.mul(&fyy).and_then(|a| a.sub(&fxy.mul(&fxy)?)) {
        Ok(h) => h.to_f64(),
        Err(_) => return f64::INFINITY,
    };
    let scale = 1.0 + fxx.to_f64().max_abs().max(fyy.to_f64().max_abs()).powi(2);
    h.max_abs() / scale
}

/// Normalize a parabolic surface (`u20 != 0`) through loops 0..5.
pub fn normalize_parabolic_surface<S: Scalar>(f: &Series<S>, opts: &NormalizeOptions) -> Result<NormalFormResult<S>, JetError> {
    if f.nvars() != 2 {
        return Err(err("a surface needs a bivariate series"));
    }
    if f.order() < 3 {
        return Err(JetError::InsufficientOrder { need: 3, have: f.order() });
    }
    let defect = parabolic_defect(f);
    if defect > opts.tol.max(1e-12) * 1e3 {
        return Err(err(format!("surface is not parabolic to the working order (Hessian defect {defect:e})")));
    }
    let tol = opts.tol;
    let n = f.order();
    let mut st = Stage { g: f.clone(), total: AffineTransform3::identity() };

    // Loop 0: translate to the origin and kill the tangent plane.
    let mut t0 = lin([[o(), z(), z()], [z(), o(), z()], [f.d2(1, 0), f.d2(0, 1), o()]]);
    t0.s0 = f.d2(0, 0);
    st.apply(t0)?;

    // Loop 1: G20 = 1, G11 = 0.
    let g20 = st.g.d2(2, 0);
    if is_zero_at(&g20, order_scale(&st.g, 2), tol, "u20")? {
        return Err(JetError::DegenerateU20);
    }
    let a = cbrt(&g20, -1)?;
    let b = -st.g.d2(1, 1) / g20.clone();
    st.apply(lin([[a, b, z()], [z(), o(), z()], [z(), z(), cbrt(&g20, 1)?]]))?;

    // Branch S: G21 vanishes iff S does.
    let g21 = st.g.d2(2, 1);
    if is_zero_at(&g21, order_scale(&st.g, 3), tol, "S")? {
        return normalize_cylinder(st, opts);
    }

    // Loop 2: G21 = 1, G30 = 0.
    let zz = cbrt(&g21, 1)?;
    let k = -st.g.d2(3, 0) / (S::from_i64(3) * zz.clone() * zz.clone());
    let l = zz.powi(-3);
    st.apply(lin([[zz.clone(), z(), z()], [k, l, z()], [z(), z(), zz.clone() * zz]]))?;
    let mut readings = BTreeMap::new();
    if n < 4 {
        return Ok(finish(st, NormalBranch::Generic, readings));
    }

    // Loop 3: G40 = 0; then W = G31.
    let m = -st.g.d2(4, 0) / S::from_i64(6);
    st.apply(lin([[o(), z(), z()], [z(), o(), m], [z(), z(), o()]]))?;
    let w = st.g.d2(3, 1);
    readings.insert("W".to_string(), w.clone());
    let w_zero = is_zero_at(&w, order_scale(&st.g, 4), tol, "W")?;
    if !w_zero {
        if n >= 5 {
            // Loop 4: G41 = 0; then M = G50.
            let c = st.g.d2(4, 1) / (S::from_i64(2) * w.clone());
            let m = S::from_ratio(2, 3) * c.clone() * w - c.clone() * c.clone() / S::from_i64(2);
            st.apply(lin([[o(), z(), c.clone()], [-c, o(), m], [z(), z(), o()]]))?;
            readings.insert("M".to_string(), st.g.d2(5, 0));
        }
        return Ok(finish(st, NormalBranch::Generic, readings));
    }
    if n < 5 {
        return Ok(finish(st, NormalBranch::ConeFlat, readings));
    }
    let x = st.g.d2(5, 0);
    readings.insert("X".to_string(), x.clone());
    if is_zero_at(&x, order_scale(&st.g, 5), tol, "X")? {
        return Ok(finish(st, NormalBranch::ConeFlat, readings));
    }
    if n >= 6 {
        // Loop 5: G60 = 0; then Y = G70.
        let c = st.g.d2(6, 0) / (S::from_i64(3) * x);
        let m = -c.clone() * c.clone() / S::from_i64(2);
        st.apply(lin([[o(), z(), c.clone()], [-c, o(), m], [z(), z(), o()]]))?;
        if n >= 7 {
            readings.insert("Y".to_string(), st.g.d2(7, 0));
        }
    }
    Ok(finish(st, NormalBranch::Cone, readings))
}

fn finish<S: Scalar>(st: Stage<S>, branch: NormalBranch, readings: BTreeMap<String, S>) -> NormalFormResult<S> {
    NormalFormResult { branch, series: st.g, transform: Transform::Surface(st.total), readings }
}

/// After loops 0-1 a cylinder is `G(s, t) = g(s)`; normalize `g` under GL2
/// and embed, compensating the determinant on `t`.
fn normalize_cylinder<S: Scalar>(mut st: Stage<S>, opts: &NormalizeOptions) -> Result<NormalFormResult<S>, JetError> {
    let n = st.g.order();
    let section = Series::from_derivatives1(n, |j| st.g.d2(j, 0));
    let cr = normalize_curve_gl2(&section, opts)?;
    let ct = cr.curve_transform().expect("curve transform").clone();
    let det = ct.det();
    let mut t = lin([[ct.a.clone(), z(), ct.b.clone()], [z(), det.recip(), z()], [ct.c.clone(), z(), ct.d.clone()]]);
    t.d = ct.e.clone();
    t.s0 = ct.f.clone();
    st.apply(t)?;
    let sign = match cr.branch {
        NormalBranch::Gl2(s) => Some(s),
        _ => None,
    };
    let readings = cr.readings;
    Ok(finish(st, NormalBranch::Cylinder(sign), readings))
}

/// Normalize a parabolic jet realized as a series of order `n`.
pub fn normalize_jet<S: Scalar>(p: &ParabolicJet<S>, n: usize, opts: &NormalizeOptions) -> Result<NormalFormResult<S>, JetError> {
    normalize_parabolic_surface(&p.realize(n)?, opts)
}

/// `I_{j,k}`: the normal-form coefficient `G_{j,k}` as a jet function of
/// order `j + k` (differentiable through the whole pipeline).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invariantized {
    pub j: usize,
    pub k: usize,
    pub tol: f64,
}

impl Invariantized {
    pub fn new(j: usize, k: usize) -> Self {
        Invariantized { j, k, tol: DEFAULT_TOL }
    }
}

impl JetFunction for Invariantized {
    fn order(&self) -> usize {
        (self.j + self.k).max(4)
    }
    fn eval<S: Scalar>(&self, p: &JetPoint<S>) -> Result<S, JetError> {
        let n = self.order();
        p.require(n)?;
        let f = Series::from_derivatives2(n, |j, k| p.u(j, k));
        let r = normalize_parabolic_surface(&f, &NormalizeOptions { tol: self.tol })?;
        Ok(r.coeff(self.j, self.k))
    }
}

/// `I_{j,k}` at a parabolic jet of order at least `j + k`.
pub fn invariantize<S: Scalar>(p: &ParabolicJet<S>, j: usize, k: usize) -> Result<S, JetError> {
    Invariantized::new(j, k).at(p)
}

/// The moving frame of SA2 on curve jets `(x, u, u1, u2, u3)`:
/// group parameters `(a, b, c, k, m)`.
pub fn sa2_moving_frame<S: Scalar>(x: &S, u: &[S]) -> Result<[S; 5], JetError> {
    if u.len() < 4 {
        return Err(JetError::InsufficientOrder { need: 3, have: u.len().saturating_sub(1) });
    }
    let (u0, u1, u2, u3) = (u[0].clone(), u[1].clone(), u[2].clone(), u[3].clone());
    if u2.is_zero() {
        return Err(err("u2 vanishes"));
    }
    let three = S::from_i64(3);
    let d53 = three.clone() * cbrt(&u2, 5)?;
    let d13 = cbrt(&u2, 1)?;
    let a = (three.clone() * u2.clone() * u2.clone() - u1.clone() * u3.clone()) / d53.clone();
    let b = u3.clone() / d53.clone();
    let c = (-three * x.clone() * u2.clone() * u2 + x.clone() * u1.clone() * u3.clone() - u0.clone() * u3) / d53;
    let k = -u1.clone() / d13.clone();
    let m = (-u0 + x.clone() * u1) / d13;
    Ok([a, b, c, k, m])
}

/// The prolonged fourth-order coordinate `v4` of SA2 at group parameters
/// `(a, b)` and jets `u1, u2, u3, u4`.
pub fn sa2_v4<S: Scalar>(a: &S, b: &S, u: &[S]) -> S {
    let (u1, u2, u3, u4) = (u[1].clone(), u[2].clone(), u[3].clone(), u[4].clone());
    let i = S::from_i64;
    let num = -i(10) * b.clone() * b.clone() * u1.clone() * u2.clone() * u3.clone()
        - i(10) * a.clone() * b.clone() * u2.clone() * u3
        + i(15) * b.clone() * b.clone() * u2.powi(3)
        + i(2) * a.clone() * b.clone() * u1.clone() * u4.clone()
        + b.clone() * b.clone() * u1.clone() * u1.clone() * u4.clone()
        + a.clone() * a.clone() * u4;
    num / (a.clone() + b.clone() * u1).powi(7)
}

/// Independent normal-form coefficients (`G_{j,0}`, `G_{j,1}`) of two surfaces
/// agree to `tol` relative, on the same branch.
pub fn equivalent<S: Scalar>(f: &Series<S>, g: &Series<S>, opts: &NormalizeOptions, tol: f64) -> Result<bool, JetError> {
    let a = normalize_parabolic_surface(f, opts)?;
    let b = normalize_parabolic_surface(g, opts)?;
    if a.branch != b.branch {
        return Ok(false);
    }
    let n = a.series.order().min(b.series.order());
    for j in 0..=n {
        for k in 0..=1 {
            if j + k > n {
                continue;
            }
            let (x, y) = (a.coeff(j, k).to_f64(), b.coeff(j, k).to_f64());
            if (x - y).abs() > tol * (1.0 + x.abs().max(y.abs())) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::{curve_f, curve_i5, eval_m, eval_w, eval_x, eval_y, gl2_sign};
    use crate::sampling::{random_curve_jet, random_parabolic_jet, rng, SurfaceBranch};
    use crate::scalar::rel_diff;

    fn deriv_scale(g: &Series<f64>) -> f64 {
        (0..=g.order()).flat_map(|d| (0..=d).map(move |k| (d - k, k))).map(|(j, k)| g.d2(j, k).abs()).fold(0.0, f64::max)
    }

    fn opts() -> NormalizeOptions {
        NormalizeOptions::default()
    }

    #[test]
    fn generic_readings_match_closed_forms() {
        let mut r = rng(1);
        for _ in 0..20 {
            let p = random_parabolic_jet(&mut r, 8, SurfaceBranch::Generic);
            let res = normalize_jet(&p, 8, &opts()).unwrap();
            assert_eq!(res.branch, NormalBranch::Generic);
            let full = p.fill(8).unwrap();
            let w = eval_w(&full).unwrap();
            let m = eval_m(&full).unwrap();
            assert!(rel_diff(res.readings["W"], w) < 1e-8, "W {} {w}", res.readings["W"]);
            assert!(rel_diff(res.readings["M"], m) < 1e-8, "M {} {m}", res.readings["M"]);
            for ((j, k), v) in [((2, 0), 1.0), ((1, 1), 0.0), ((2, 1), 1.0), ((3, 0), 0.0), ((4, 0), 0.0), ((4, 1), 0.0)] {
                let scale = 1.0 + deriv_scale(&res.series);
                assert!((res.coeff(j, k) - v).abs() < 1e-9 * scale, "G{j}{k} = {}", res.coeff(j, k));
            }
        }
    }

    #[test]
    fn cone_readings_match_closed_forms() {
        let mut r = rng(2);
        for _ in 0..20 {
            let p = random_parabolic_jet(&mut r, 8, SurfaceBranch::Cone);
            let res = normalize_jet(&p, 8, &opts()).unwrap();
            assert_eq!(res.branch, NormalBranch::Cone);
            let full = p.fill(8).unwrap();
            let x = eval_x(&full).unwrap();
            let y = eval_y(&full).unwrap();
            assert!(rel_diff(res.readings["X"], x) < 1e-8, "X {} {x}", res.readings["X"]);
            assert!(rel_diff(res.readings["Y"], y) < 1e-8, "Y {} {y}", res.readings["Y"]);
            assert!(res.coeff(6, 0).abs() < 1e-9 * (1.0 + deriv_scale(&res.series)), "{}", res.coeff(6, 0));
        }
    }

    #[test]
    fn composed_transform_round_trips() {
        let p = random_parabolic_jet(&mut rng(5), 8, SurfaceBranch::Generic);
        let f = p.realize(8).unwrap();
        let res = normalize_parabolic_surface(&f, &opts()).unwrap();
        let g = apply_affine(&f, res.surface_transform().unwrap()).unwrap();
        let diff = g.sub(&res.series).unwrap().max_abs();
        assert!(diff < 1e-9 * (1.0 + g.max_abs()), "{diff}");
        assert!((res.surface_transform().unwrap().delta() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cone_graph_is_its_own_normal_form() {
        let f = Series::from_derivatives2(8, |j, k| if j == 2 { (1..=k).product::<usize>() as f64 } else { 0.0 });
        let res = normalize_parabolic_surface(&f, &opts()).unwrap();
        assert_eq!(res.branch, NormalBranch::ConeFlat);
        assert!(res.series.sub(&f).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn sl2_curve_readings() {
        let mut r = rng(9);
        for _ in 0..20 {
            let u = random_curve_jet(&mut r, 8, None);
            let f = Series::from_derivatives1(8, |k| u[k]);
            let res = normalize_curve_sl2(&f, &opts()).unwrap();
            for k in 4..=7 {
                let want = curve_f(k, &u).unwrap();
                assert!(rel_diff(res.readings[&format!("G{k}")], want) < 1e-9, "G{k}");
            }
            assert!((res.coeff(2, 0) - 1.0).abs() < 1e-12 && res.coeff(3, 0).abs() < 1e-12);
        }
    }

    #[test]
    fn gl2_curve_readings() {
        let mut r = rng(10);
        for s in [1.0, -1.0] {
            for _ in 0..10 {
                let u = random_curve_jet(&mut r, 8, Some(s));
                let f = Series::from_derivatives1(8, |k| u[k]);
                let res = normalize_curve_gl2(&f, &opts()).unwrap();
                let sign = gl2_sign(&u);
                assert_eq!(res.branch, NormalBranch::Gl2(sign));
                assert!(rel_diff(res.readings["G5"], curve_i5(&u, sign).unwrap()) < 1e-9);
                assert!(rel_diff(res.readings["G6"], crate::invariants::curve_i6_gl2(&u).unwrap()) < 1e-9);
            }
        }
    }

    #[test]
    fn conic_and_already_normal_curves() {
        // u = 3 - sqrt(9 - 3 x^2) = x^2/2 + x^4/4! + 0 x^5 + ...
        let s = Series::from_monomials(1, 8, |e| match e[0] {
            0 => 9.0,
            2 => -3.0,
            _ => 0.0,
        });
        let f = Series::constant(1, 8, 3.0).sub(&s.pow_frac(1, 2).unwrap()).unwrap();
        let res = normalize_curve_gl2(&f, &opts()).unwrap();
        assert_eq!(res.branch, NormalBranch::Gl2(Sign::Plus));
        assert!(res.readings["G5"].abs() < 1e-12);
        let g = Series::from_derivatives1(6, |k| match k {
            2 | 4 => 1.0,
            _ => 0.0,
        });
        let res = normalize_curve_gl2(&g, &opts()).unwrap();
        assert_eq!(res.branch, NormalBranch::Gl2(Sign::Plus));
        assert_eq!(res.curve_transform().unwrap(), &AffineTransform2::identity());
    }

    #[test]
    fn moving_frame_gives_equiaffine_curvature() {
        let mut r = rng(12);
        for _ in 0..20 {
            let u = random_curve_jet(&mut r, 4, None);
            let x = 0.3;
            let [a, b, ..] = sa2_moving_frame(&x, &u).unwrap();
            let v4 = sa2_v4(&a, &b, &u);
            assert!(rel_diff(v4, curve_f(4, &u).unwrap()) < 1e-9);
        }
        let fr = sa2_moving_frame(&0.0, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(fr, [1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
