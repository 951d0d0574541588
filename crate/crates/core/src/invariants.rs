//! Closed-form (relative) differential invariants of parabolic surfaces and of
//! plane curves, generic over any [`Scalar`] so that total and invariant
//! derivatives apply directly through sensitivity propagation.

use crate::jets::{jets_of_series, JetError, JetFunction, JetPoint};
use crate::scalar::{pow_third, Dual, Scalar, ScalarKind};
use crate::series::{apply_affine, det3, AffineTransform3, Series};
use serde::Serialize;

/// Variables of [`M_NUMERATOR`], in exponent-vector order.
pub const M_VARS: [(usize, usize); 8] = [(1, 1), (2, 0), (2, 1), (3, 0), (3, 1), (4, 0), (4, 1), (5, 0)];

/// Numerator of the order-5 generic-branch invariant `M` as
/// `(coefficient, exponents over M_VARS)`; the denominator is
/// `36 u20^6 (u11 u30 - u20 u21)(u11 u20 u40 - 2 u11 u30^2 - u20^2 u31 + 2 u20 u21 u30)`.
pub const M_NUMERATOR: [(i64, [u8; 8]); 57] = [
    (45, [3, 4, 0, 1, 0, 0, 0, 2]),
    (-120, [3, 4, 0, 0, 0, 2, 0, 1]),
    (-126, [3, 3, 0, 2, 0, 1, 0, 1]),
    (820, [3, 3, 0, 1, 0, 3, 0, 0]),
    (192, [3, 2, 0, 4, 0, 0, 0, 1]),
    (-2195, [3, 2, 0, 3, 0, 2, 0, 0]),
    (2560, [3, 1, 0, 5, 0, 1, 0, 0]),
    (-1280, [3, 0, 0, 7, 0, 0, 0, 0]),
    (-45, [2, 5, 1, 0, 0, 0, 0, 2]),
    (-90, [2, 5, 0, 1, 0, 0, 1, 1]),
    (240, [2, 5, 0, 0, 1, 1, 0, 1]),
    (120, [2, 5, 0, 0, 0, 2, 1, 0]),
    (432, [2, 4, 1, 1, 0, 1, 0, 1]),
    (-420, [2, 4, 1, 0, 0, 3, 0, 0]),
    (-144, [2, 4, 0, 2, 1, 0, 0, 1]),
    (90, [2, 4, 0, 2, 0, 1, 1, 0]),
    (-2040, [2, 4, 0, 1, 1, 2, 0, 0]),
    (-456, [2, 3, 1, 3, 0, 0, 0, 1]),
    (1985, [2, 3, 1, 2, 0, 2, 0, 0]),
    (-120, [2, 3, 0, 4, 0, 0, 1, 0]),
    (4600, [2, 3, 0, 3, 1, 1, 0, 0]),
    (-4640, [2, 2, 1, 4, 0, 1, 0, 0]),
    (-3040, [2, 2, 0, 5, 1, 0, 0, 0]),
    (3840, [2, 1, 1, 6, 0, 0, 0, 0]),
    (90, [1, 6, 1, 0, 0, 0, 1, 1]),
    (45, [1, 6, 0, 1, 0, 0, 2, 0]),
    (-120, [1, 6, 0, 0, 2, 0, 0, 1]),
    (-240, [1, 6, 0, 0, 1, 1, 1, 0]),
    (-306, [1, 5, 2, 0, 0, 1, 0, 1]),
    (108, [1, 5, 1, 1, 1, 0, 0, 1]),
    (-360, [1, 5, 1, 1, 0, 1, 1, 0]),
    (840, [1, 5, 1, 0, 1, 2, 0, 0]),
    (180, [1, 5, 0, 2, 1, 0, 1, 0]),
    (1620, [1, 5, 0, 1, 2, 1, 0, 0]),
    (336, [1, 4, 2, 2, 0, 0, 0, 1]),
    (615, [1, 4, 2, 1, 0, 2, 0, 0]),
    (240, [1, 4, 1, 3, 0, 0, 1, 0]),
    (-5200, [1, 4, 1, 2, 1, 1, 0, 0]),
    (-2000, [1, 4, 0, 3, 2, 0, 0, 0]),
    (1600, [1, 3, 2, 3, 0, 1, 0, 0]),
    (6080, [1, 3, 1, 4, 1, 0, 0, 0]),
    (-3840, [1, 2, 2, 5, 0, 0, 0, 0]),
    (-45, [0, 7, 1, 0, 0, 0, 2, 0]),
    (120, [0, 7, 0, 0, 2, 0, 1, 0]),
    (36, [0, 6, 2, 0, 1, 0, 0, 1]),
    (270, [0, 6, 2, 0, 0, 1, 1, 0]),
    (-180, [0, 6, 1, 1, 1, 0, 1, 0]),
    (-420, [0, 6, 1, 0, 2, 1, 0, 0]),
    (-400, [0, 6, 0, 1, 3, 0, 0, 0]),
    (-72, [0, 5, 3, 1, 0, 0, 0, 1]),
    (-405, [0, 5, 3, 0, 0, 2, 0, 0]),
    (-120, [0, 5, 2, 2, 0, 0, 1, 0]),
    (600, [0, 5, 2, 1, 1, 1, 0, 0]),
    (2000, [0, 5, 1, 2, 2, 0, 0, 0]),
    (480, [0, 4, 3, 2, 0, 1, 0, 0]),
    (-3040, [0, 4, 2, 3, 1, 0, 0, 0]),
    (1280, [0, 3, 3, 4, 0, 0, 0, 0]),
];

/// Variables of [`Y_NUMERATOR`]: `u20, u30, u40, u50, u60, u70`.
pub const Y_VARS: [(usize, usize); 6] = [(2, 0), (3, 0), (4, 0), (5, 0), (6, 0), (7, 0)];

/// Order-7 polynomial of the cone-branch invariant
/// `Y = Poly * A^(5/3) / (18 u20^10 Xn)` with `Xn = 9 u20^2 u50 - 45 u20 u30 u40 + 40 u30^3`.
pub const Y_NUMERATOR: [(i64, [u8; 6]); 17] = [
    (11200, [0, 8, 0, 0, 0, 0]),
    (-12600, [3, 3, 1, 1, 0, 0]),
    (13230, [4, 1, 2, 1, 0, 0]),
    (1134, [5, 1, 0, 1, 1, 0]),
    (-3150, [4, 2, 1, 0, 1, 0]),
    (-810, [5, 1, 1, 0, 0, 1]),
    (-33600, [1, 6, 1, 0, 0, 0]),
    (-7875, [3, 2, 3, 0, 0, 0]),
    (-756, [4, 2, 0, 2, 0, 0]),
    (6720, [2, 5, 0, 1, 0, 0]),
    (31500, [2, 4, 2, 0, 0, 0]),
    (-4725, [4, 0, 4, 0, 0, 0]),
    (-189, [6, 0, 0, 0, 2, 0]),
    (1890, [5, 0, 2, 0, 1, 0]),
    (-2835, [5, 0, 1, 2, 0, 0]),
    (162, [6, 0, 0, 1, 0, 1]),
    (720, [4, 3, 0, 0, 0, 1]),
];

/// Variables of [`PICK_POLY`]: `u20, u11, u02, u30, u21, u12, u03`.
pub const PICK_VARS: [(usize, usize); 7] = [(2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

/// Cubic-form discriminant entering the Pick invariant.
pub const PICK_POLY: [(i64, [u8; 7]); 13] = [
    (-18, [1, 1, 1, 0, 1, 1, 0]),
    (12, [0, 2, 1, 1, 0, 1, 0]),
    (9, [2, 0, 1, 0, 0, 2, 0]),
    (9, [1, 0, 2, 0, 2, 0, 0]),
    (-6, [0, 1, 2, 1, 1, 0, 0]),
    (-6, [1, 0, 2, 1, 0, 1, 0]),
    (1, [0, 0, 3, 2, 0, 0, 0]),
    (12, [1, 2, 0, 0, 1, 0, 1]),
    (-8, [0, 3, 0, 1, 0, 0, 1]),
    (-6, [2, 1, 0, 0, 0, 1, 1]),
    (-6, [2, 0, 1, 0, 1, 0, 1]),
    (6, [1, 1, 1, 1, 0, 0, 1]),
    (1, [3, 0, 0, 0, 0, 0, 2]),
];

/// Evaluate a sparse polynomial table at jet coordinates.
pub fn eval_table<S: Scalar, const N: usize>(table: &[(i64, [u8; N])], vars: &[(usize, usize); N], p: &JetPoint<S>) -> S {
    let vals: Vec<S> = vars.iter().map(|&(j, k)| p.u(j, k)).collect();
    let mut acc = S::zero();
    for (c, e) in table {
        let mut t = S::from_i64(*c);
        for (v, &k) in vals.iter().zip(e.iter()) {
            if k > 0 {
                t = t * v.powi(k as i32);
            }
        }
        acc = acc + t;
    }
    acc
}

/// Largest absolute monomial of a table, the scale used by zero tests.
pub fn table_scale<S: Scalar, const N: usize>(table: &[(i64, [u8; N])], vars: &[(usize, usize); N], p: &JetPoint<S>) -> f64 {
    let vals: Vec<f64> = vars.iter().map(|&(j, k)| p.u(j, k).to_f64()).collect();
    table
        .iter()
        .map(|(c, e)| {
            let mut t = (*c as f64).abs();
            for (v, &k) in vals.iter().zip(e.iter()) {
                t *= v.abs().powi(k as i32);
            }
            t
        })
        .fold(0.0, f64::max)
}

fn nonzero<S: Scalar>(v: S, what: &str) -> Result<S, JetError> {
    if v.is_zero() {
        Err(JetError::Domain(format!("{what} vanishes")))
    } else {
        Ok(v)
    }
}

fn cbrt<S: Scalar>(v: &S, p: i32) -> Result<S, JetError> {
    pow_third(v, p).ok_or_else(|| JetError::Domain("cube root not representable in this scalar field".into()))
}

fn sqrt<S: Scalar>(v: &S) -> Result<S, JetError> {
    v.sqrt().ok_or_else(|| JetError::Domain("square root not representable in this scalar field".into()))
}

/// Hessian determinant `u20 u02 - u11^2`.
pub fn eval_h<S: Scalar>(p: &JetPoint<S>) -> Result<S, JetError> {
    p.require(2)?;
    Ok(p.u(2, 0) * p.u(0, 2) - p.u(1, 1) * p.u(1, 1))
}

/// `A = u20 u21 - u11 u30`, the numerator of `S`.
pub fn a_factor<S: Scalar>(p: &JetPoint<S>) -> S {
    p.u(2, 0) * p.u(2, 1) - p.u(1, 1) * p.u(3, 0)
}

/// Numerator of `W`: `u20^2 u31 - u20 u40 u11 + 2 u30^2 u11 - 2 u30 u21 u20`.
pub fn w_numerator<S: Scalar>(p: &JetPoint<S>) -> S {
    let (u20, u11, u30, u21, u40, u31) = (p.u(2, 0), p.u(1, 1), p.u(3, 0), p.u(2, 1), p.u(4, 0), p.u(3, 1));
    u20.clone() * u20.clone() * u31 - u20.clone() * u40 * u11.clone() + S::from_i64(2) * u30.clone() * u30.clone() * u11
        - S::from_i64(2) * u30 * u21 * u20
}

/// `9 u20^2 u50 - 45 u20 u30 u40 + 40 u30^3`, the numerator of `X`.
pub fn x_numerator<S: Scalar>(p: &JetPoint<S>) -> S {
    let (u20, u30, u40, u50) = (p.u(2, 0), p.u(3, 0), p.u(4, 0), p.u(5, 0));
    S::from_i64(9) * u20.clone() * u20.clone() * u50 - S::from_i64(45) * u20 * u30.clone() * u40
        + S::from_i64(40) * u30.clone() * u30.clone() * u30
}

/// Relative invariant `S = A / u20^2`.
pub fn eval_s<S: Scalar>(p: &JetPoint<S>) -> Result<S, JetError> {
    p.require(3)?;
    let u20 = nonzero(p.u(2, 0), "u20")?;
    Ok(a_factor(p) / (u20.clone() * u20))
}

/// `W = Wnum / (u20^2 A^(2/3))` with the real cube root.
pub fn eval_w<S: Scalar>(p: &JetPoint<S>) -> Result<S, JetError> {
    p.require(4)?;
    let u20 = nonzero(p.u(2, 0), "u20")?;
    let a = nonzero(a_factor(p), "u20 u21 - u11 u30")?;
    Ok(w_numerator(p) / (u20.clone() * u20 * cbrt(&a, 2)?))
}

/// `W^3 = Wnum^3 / (u20^6 A^2)`, rational whenever the jet is.
pub fn eval_w_cubed<S: Scalar>(p: &JetPoint<S>) -> Result<S, JetError> {
    p.require(4)?;
    let u20 = nonzero(p.u(2, 0), "u20")?;
    let a = nonzero(a_factor(p), "u20 u21 - u11 u30")?;
    Ok(w_numerator(p).powi(3) / (u20.powi(6) * a.clone() * a))
}

/// Cone-branch invariant `X = A Xn / (9 u20^6)`.
pub fn eval_x<S: Scalar>(p: &JetPoint<S>) -> Result<S, JetError> {
    p.require(5)?;
    let u20 = nonzero(p.u(2, 0), "u20")?;
    nonzero(a_factor(p), "u20 u21 - u11 u30")?;
    Ok(a_factor(p) * x_numerator(p) / (S::from_i64(9) * u20.powi(6)))
}

/// Cone-branch invariant of order 7, `Y = Poly A^(5/3) / (18 u20^10 Xn)`.
pub fn eval_y<S: Scalar>(p: &JetPoint<S>) -> Result<S, JetError> {
    p.require(7)?;
    let u20 = nonzero(p.u(2, 0), "u20")?;
    let a = nonzero(a_factor(p), "u20 u21 - u11 u30")?;
    let xn = nonzero(x_numerator(p), "X numerator")?;
    let poly = eval_table(&Y_NUMERATOR, &Y_VARS, p);
    Ok(poly * cbrt(&a, 5)? / (S::from_i64(18) * u20.powi(10) * xn))
}

/// Generic-branch invariant of order 5 (57-monomial numerator).
pub fn eval_m<S: Scalar>(p: &JetPoint<S>) -> Result<S, JetError> {
    p.require(5)?;
    let u20 = nonzero(p.u(2, 0), "u20")?;
    let (u11, u21, u30, u31, u40) = (p.u(1, 1), p.u(2, 1), p.u(3, 0), p.u(3, 1), p.u(4, 0));
    let f1 = nonzero(u11.clone() * u30.clone() - u20.clone() * u21.clone(), "u20 u21 - u11 u30")?;
    let f2 = u11.clone() * u20.clone() * u40 - S::from_i64(2) * u11 * u30.clone() * u30.clone() - u20.clone() * u20.clone() * u31
        + S::from_i64(2) * u20.clone() * u21 * u30;
    let f2 = nonzero(f2, "W numerator")?;
    let num = eval_table(&M_NUMERATOR, &M_VARS, p);
    Ok(num / (S::from_i64(36) * u20.powi(6) * f1 * f2))
}

/// The surface invariants as jet functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SurfaceInvariant {
    H,
    S,
    W,
    X,
    Y,
    M,
    /// `A = u20 u21 - u11 u30`.
    A,
    /// Numerator of `W`.
    WNumerator,
}

impl SurfaceInvariant {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceInvariant::H => "H",
            SurfaceInvariant::S => "S",
            SurfaceInvariant::W => "W",
            SurfaceInvariant::X => "X",
            SurfaceInvariant::Y => "Y",
            SurfaceInvariant::M => "M",
            SurfaceInvariant::A => "A",
            SurfaceInvariant::WNumerator => "Wnum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "H" => SurfaceInvariant::H,
            "S" => SurfaceInvariant::S,
            "W" => SurfaceInvariant::W,
            "X" => SurfaceInvariant::X,
            "Y" => SurfaceInvariant::Y,
            "M" => SurfaceInvariant::M,
            "A" => SurfaceInvariant::A,
            "Wnum" => SurfaceInvariant::WNumerator,
            _ => return None,
        })
    }
}

impl JetFunction for SurfaceInvariant {
    fn order(&self) -> usize {
        match self {
            SurfaceInvariant::H => 2,
            SurfaceInvariant::S | SurfaceInvariant::A => 3,
            SurfaceInvariant::W | SurfaceInvariant::WNumerator => 4,
            SurfaceInvariant::X | SurfaceInvariant::M => 5,
            SurfaceInvariant::Y => 7,
        }
    }

    fn eval<S: Scalar>(&self, p: &JetPoint<S>) -> Result<S, JetError> {
        match self {
            SurfaceInvariant::H => eval_h(p),
            SurfaceInvariant::S => eval_s(p),
            SurfaceInvariant::W => eval_w(p),
            SurfaceInvariant::X => eval_x(p),
            SurfaceInvariant::Y => eval_y(p),
            SurfaceInvariant::M => eval_m(p),
            SurfaceInvariant::A => {
                p.require(3)?;
                Ok(a_factor(p))
            }
            SurfaceInvariant::WNumerator => {
                p.require(4)?;
                Ok(w_numerator(p))
            }
        }
    }
}

/// Point type from the rank and signature of the Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointType {
    Flat,
    Parabolic,
    Elliptic,
    Hyperbolic,
}

/// Outcome of a scale-aware zero test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroTest {
    Zero,
    NonZero,
    /// Inside `(tol, 10 tol]` of the scale: too close to call.
    Ambiguous,
}

/// `|v| <= tol (1 + scale)` is zero, `|v| > 10 tol (1 + scale)` is nonzero.
pub fn zero_test(v: f64, scale: f64, tol: f64) -> ZeroTest {
    let t = tol * (1.0 + scale.abs());
    if !v.is_finite() {
        ZeroTest::NonZero
    } else if v.abs() <= t {
        ZeroTest::Zero
    } else if v.abs() <= 10.0 * t {
        ZeroTest::Ambiguous
    } else {
        ZeroTest::NonZero
    }
}

/// Point type at a jet, with a scale-aware zero test on the Hessian entries.
pub fn point_type(p: &JetPoint<f64>, tol: f64) -> Result<PointType, JetError> {
    p.require(2)?;
    let (a, b, c) = (p.u(2, 0), p.u(1, 1), p.u(0, 2));
    let entries = a.abs().max(b.abs()).max(c.abs());
    let flat = zero_test(entries, 0.0, tol);
    if flat == ZeroTest::Ambiguous {
        return Err(JetError::Domain(format!("Hessian magnitude {entries:e} within the ambiguity band")));
    }
    if flat == ZeroTest::Zero {
        return Ok(PointType::Flat);
    }
    let h = a * c - b * b;
    // H is quadratic in the entries: compare it with their squared magnitude
    match zero_test(h, entries * entries, tol) {
        ZeroTest::Zero => Ok(PointType::Parabolic),
        ZeroTest::Ambiguous => Err(JetError::Domain(format!("Hessian determinant {h:e} within the ambiguity band"))),
        ZeroTest::NonZero if h > 0.0 => Ok(PointType::Elliptic),
        ZeroTest::NonZero => Ok(PointType::Hyperbolic),
    }
}

/// Cubic discriminant of the Pick invariant.
pub fn pick_polynomial<S: Scalar>(p: &JetPoint<S>) -> Result<S, JetError> {
    p.require(3)?;
    Ok(eval_table(&PICK_POLY, &PICK_VARS, p))
}

fn check_signature<S: Scalar>(p: &JetPoint<S>, kind: PointType) -> Result<S, JetError> {
    let h = eval_h(p)?;
    let ok = match kind {
        PointType::Elliptic => h.to_f64() > 0.0,
        PointType::Hyperbolic => h.to_f64() < 0.0,
        _ => false,
    };
    if !ok {
        return Err(JetError::Domain(format!("Hessian determinant {:e} does not match a {kind:?} point", h.to_f64())));
    }
    Ok(if h.to_f64() < 0.0 { -h } else { h })
}

/// Pick invariant `|poly| / (32 |H|^(11/4))`, normalized so that the normal
/// form `(x^2 ± y^2)/2 + C(x^3 - 3xy^2)/6` gives `C^2/2`.
pub fn pick_invariant<S: Scalar>(p: &JetPoint<S>, kind: PointType) -> Result<S, JetError> {
    let h = check_signature(p, kind)?;
    let poly = pick_polynomial(p)?;
    let poly = if poly.to_f64() < 0.0 { -poly } else { poly };
    let q = sqrt(&sqrt(&h)?)?;
    Ok(poly / (S::from_i64(32) * q.powi(11)))
}

/// The displayed rendering `poly^2 / (512 |H|^(11/2))`; equals `2 Pick^2`.
pub fn pick_invariant_printed<S: Scalar>(p: &JetPoint<S>, kind: PointType) -> Result<S, JetError> {
    let h = check_signature(p, kind)?;
    let poly = pick_polynomial(p)?;
    let r = sqrt(&h)?;
    Ok(poly.clone() * poly / (S::from_i64(512) * h.powi(5) * r))
}

/// Branch of the parabolic branch tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Flat,
    #[serde(rename = "Cylinder-branch")]
    CylinderBranch,
    #[serde(rename = "Cone-branch")]
    ConeBranch,
    Generic,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Flat => "Flat",
            Branch::CylinderBranch => "Cylinder-branch",
            Branch::ConeBranch => "Cone-branch",
            Branch::Generic => "Generic",
        }
    }
}

/// Invariants present on the branch of a parabolic jet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub branch: Branch,
    pub h: f64,
    pub s: Option<f64>,
    pub w: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub m: Option<f64>,
    pub tol: f64,
}

fn decide(v: f64, scale: f64, tol: f64, what: &str) -> Result<bool, JetError> {
    match zero_test(v, scale, tol) {
        ZeroTest::Zero => Ok(true),
        ZeroTest::NonZero => Ok(false),
        ZeroTest::Ambiguous => Err(JetError::Domain(format!("{what} = {v:e} is within the ambiguity band (tol {tol:e})"))),
    }
}

/// Branch decision and the invariants defined on it. The jet must be
/// parabolic with `u20 != 0` (or flat).
pub fn invariant_report(p: &JetPoint<f64>, tol: f64) -> Result<InvariantReport, JetError> {
    let h = eval_h(p)?;
    let mut rep = InvariantReport { branch: Branch::Flat, h, s: None, w: None, x: None, y: None, m: None, tol };
    match point_type(p, tol)? {
        PointType::Flat => return Ok(rep),
        PointType::Parabolic => {}
        t => return Err(JetError::Domain(format!("{t:?} point: the branch tree applies to parabolic surfaces"))),
    }
    if p.u(2, 0).abs() <= tol * (1.0 + p.u(0, 2).abs()) {
        return Err(JetError::DegenerateU20);
    }
    p.require(4)?;
    let a = a_factor(p);
    let a_scale = (p.u(2, 0) * p.u(2, 1)).abs().max((p.u(1, 1) * p.u(3, 0)).abs());
    rep.s = Some(eval_s(p)?);
    if decide(a, a_scale, tol, "S numerator")? {
        rep.branch = Branch::CylinderBranch;
        return Ok(rep);
    }
    let wn = w_numerator(p);
    let w_scale = {
        let (u20, u11, u30, u21, u40, u31) = (p.u(2, 0), p.u(1, 1), p.u(3, 0), p.u(2, 1), p.u(4, 0), p.u(3, 1));
        [u20 * u20 * u31, u20 * u40 * u11, 2.0 * u30 * u30 * u11, 2.0 * u30 * u21 * u20].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };
    rep.w = Some(eval_w(p)?);
    if decide(wn, w_scale, tol, "W numerator")? {
        rep.branch = Branch::ConeBranch;
        if p.order() >= 5 {
            rep.x = Some(eval_x(p)?);
            let xs = {
                let (u20, u30, u40, u50) = (p.u(2, 0), p.u(3, 0), p.u(4, 0), p.u(5, 0));
                (9.0 * u20 * u20 * u50).abs().max((45.0 * u20 * u30 * u40).abs()).max((40.0 * u30.powi(3)).abs())
            };
            if p.order() >= 7 && !decide(x_numerator(p), xs, tol, "X numerator")? {
                rep.y = Some(eval_y(p)?);
            }
        }
    } else {
        rep.branch = Branch::Generic;
        if p.order() >= 5 {
            rep.m = Some(eval_m(p)?);
        }
    }
    Ok(rep)
}

/// Sign choice of the GL2 branches (`±x^4/4!` in the normal form).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn eps<S: Scalar>(self) -> S {
        match self {
            Sign::Plus => S::one(),
            Sign::Minus => -S::one(),
        }
    }
}

/// A smooth function of curve jets `u, u_x, u_xx, ...` (no explicit `x`).
pub trait CurveFunction {
    fn order(&self) -> usize;
    fn eval<S: Scalar>(&self, u: &[S]) -> Result<S, JetError>;
}

impl<F: CurveFunction> CurveFunction for &F {
    fn order(&self) -> usize {
        (*self).order()
    }
    fn eval<S: Scalar>(&self, u: &[S]) -> Result<S, JetError> {
        (*self).eval(u)
    }
}

fn require_curve<S>(u: &[S], need: usize) -> Result<(), JetError> {
    if u.len() <= need {
        Err(JetError::InsufficientOrder { need, have: u.len().saturating_sub(1) })
    } else {
        Ok(())
    }
}

/// `D_x f = sum_k (df/du_k) u_{k+1}`, needs jets up to `f.order() + 1`.
pub fn curve_total_derivative<S: Scalar, F: CurveFunction>(f: &F, u: &[S]) -> Result<S, JetError> {
    let m = f.order();
    require_curve(u, m + 1)?;
    let n = m + 1;
    let seeded: Vec<Dual<S>> = (0..n).map(|k| Dual::variable(u[k].clone(), k, n)).collect();
    let v = f.eval(&seeded)?;
    let mut acc = S::zero();
    for k in 0..n {
        acc = acc + v.grad(k) * u[k + 1].clone();
    }
    Ok(acc)
}

/// `D_x` of a curve function, as a curve function (nestable).
#[derive(Debug, Clone)]
pub struct CurveTotal<F>(pub F);

impl<F: CurveFunction> CurveFunction for CurveTotal<F> {
    fn order(&self) -> usize {
        self.0.order() + 1
    }
    fn eval<S: Scalar>(&self, u: &[S]) -> Result<S, JetError> {
        curve_total_derivative(&self.0, u)
    }
}

fn ci<S: Scalar>(n: i64) -> S {
    S::from_i64(n)
}

/// Numerators `N_k` of the SL2 invariants `F_k = N_k / (c_k u2^(e_k))`.
fn sl2_numerator<S: Scalar>(k: usize, u: &[S]) -> S {
    let (u2, u3) = (u[2].clone(), u[3].clone());
    match k {
        4 => ci::<S>(3) * u2 * u[4].clone() - ci::<S>(5) * u3.clone() * u3,
        5 => {
            ci::<S>(9) * u2.clone() * u2.clone() * u[5].clone() - ci::<S>(45) * u2 * u3.clone() * u[4].clone()
                + ci::<S>(40) * u3.powi(3)
        }
        6 => {
            ci::<S>(9) * u2.powi(3) * u[6].clone() - ci::<S>(63) * u2.clone() * u2.clone() * u3.clone() * u[5].clone()
                + ci::<S>(105) * u2 * u3.clone() * u3.clone() * u[4].clone()
                - ci::<S>(35) * u3.powi(4)
        }
        7 => {
            let (u4, u5, u6, u7) = (u[4].clone(), u[5].clone(), u[6].clone(), u[7].clone());
            ci::<S>(9) * u2.powi(4) * u7 - ci::<S>(84) * u2.powi(3) * u3.clone() * u6
                + ci::<S>(210) * u2.powi(2) * u3.powi(2) * u5
                - ci::<S>(105) * u2.powi(2) * u3.clone() * u4.powi(2)
                + ci::<S>(210) * u2 * u3.powi(3) * u4
                - ci::<S>(280) * u3.powi(5)
        }
        _ => unreachable!("SL2 invariants are tabulated for orders 4..=7"),
    }
}

/// SL2 invariant of order `k` in 4..=7 (`F4 = P`, `F5 = C`).
pub fn curve_f<S: Scalar>(k: usize, u: &[S]) -> Result<S, JetError> {
    if !(4..=7).contains(&k) {
        return Err(JetError::Domain(format!("no tabulated SL2 invariant of order {k}")));
    }
    require_curve(u, k)?;
    let u2 = nonzero(u[2].clone(), "u2")?;
    let num = sl2_numerator(k, u);
    Ok(match k {
        4 => num / (ci::<S>(3) * cbrt(&u2, 8)?),
        5 => num / (ci::<S>(9) * u2.powi(4)),
        6 => num / (ci::<S>(9) * cbrt(&u2, 16)?),
        _ => num / (ci::<S>(9) * cbrt(&u2, 20)?),
    })
}

/// Equi-affine curvature `P = (3 u2 u4 - 5 u3^2) / (3 u2^(8/3))`.
pub fn curve_p<S: Scalar>(u: &[S]) -> Result<S, JetError> {
    curve_f(4, u)
}

/// `C = (9 u2^2 u5 - 45 u2 u3 u4 + 40 u3^3) / (9 u2^4)`, vanishing exactly on conics.
pub fn curve_c<S: Scalar>(u: &[S]) -> Result<S, JetError> {
    curve_f(5, u)
}

/// GL2 invariant `I5 = sgn(u2) N5 / (sqrt(3) (eps (3 u2 u4 - 5 u3^2))^(3/2))`.
/// The factor `sgn(u2)` makes it invariant under orientation-reversing
/// elements too; it is 1 on the usual domain `u2 > 0`.
pub fn curve_i5<S: Scalar>(u: &[S], sign: Sign) -> Result<S, JetError> {
    require_curve(u, 5)?;
    let u2 = nonzero(u[2].clone(), "u2")?;
    let q = sign.eps::<S>() * sl2_numerator(4, u);
    if q.to_f64() <= 0.0 {
        return Err(JetError::Domain(format!("eps (3 u2 u4 - 5 u3^2) = {:e} is not positive", q.to_f64())));
    }
    let r = sqrt(&q)?;
    let v = sl2_numerator(5, u) / (sqrt(&ci::<S>(3))? * q * r);
    Ok(if u2.to_f64() < 0.0 { -v } else { v })
}

/// GL2 invariant `I6 = N6 / (3 u2 u4 - 5 u3^2)^2`.
pub fn curve_i6_gl2<S: Scalar>(u: &[S]) -> Result<S, JetError> {
    require_curve(u, 6)?;
    let q = nonzero(sl2_numerator(4, u), "3 u2 u4 - 5 u3^2")?;
    Ok(sl2_numerator(6, u) / (q.clone() * q))
}

/// GL2 branch of a curve jet from the sign of `3 u2 u4 - 5 u3^2`.
pub fn gl2_sign(u: &[f64]) -> Sign {
    if 3.0 * u[2] * u[4] - 5.0 * u[3] * u[3] >= 0.0 {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// Euclidean curvature `u_xx / (1 + u_x^2)^(3/2)`.
pub fn euclid_curvature<S: Scalar>(u1: &S, u2: &S) -> Result<S, JetError> {
    let w = S::one() + u1.clone() * u1.clone();
    Ok(u2.clone() / (w.clone() * sqrt(&w)?))
}

/// Curve invariants as curve functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveInvariant {
    /// SL2 invariant `F_k`, `k` in 4..=7.
    Sl2(usize),
    I5(Sign),
    I6Gl2,
}

impl CurveFunction for CurveInvariant {
    fn order(&self) -> usize {
        match self {
            CurveInvariant::Sl2(k) => *k,
            CurveInvariant::I5(_) => 5,
            CurveInvariant::I6Gl2 => 6,
        }
    }
    fn eval<S: Scalar>(&self, u: &[S]) -> Result<S, JetError> {
        match self {
            CurveInvariant::Sl2(k) => curve_f(*k, u),
            CurveInvariant::I5(s) => curve_i5(u, *s),
            CurveInvariant::I6Gl2 => curve_i6_gl2(u),
        }
    }
}

/// Invariants whose transfer under an affine map is checked by
/// [`relative_invariance_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransferInvariant {
    H,
    S,
    W,
    X,
    Y,
    M,
    Pick,
}

impl TransferInvariant {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "H" => TransferInvariant::H,
            "S" => TransferInvariant::S,
            "W" => TransferInvariant::W,
            "X" => TransferInvariant::X,
            "Y" => TransferInvariant::Y,
            "M" => TransferInvariant::M,
            "Pick" => TransferInvariant::Pick,
            _ => return None,
        })
    }
}

/// Forward form `(s, t, v) = M (x, y, u) + const` of a transform stored in
/// inverse form, together with the first derivatives of `F` at the source point.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFrame<S> {
    /// Rows `(a, b, c)`, `(k, l, m)`, `(p, q, r)` of the forward linear part.
    pub forward: [[S; 3]; 3],
    /// `delta = det M`.
    pub delta: S,
    /// `Lambda = (a + c F_x)(l + m F_y) - (k + m F_x)(b + c F_y)`.
    pub lambda: S,
    /// `Upsilon = (l + m F_y) F_xx - (k + m F_x) F_xy`.
    pub upsilon: S,
    /// `[[a + c F_x, k + m F_x], [b + c F_y, l + m F_y]]`.
    pub jacobian: [[S; 2]; 2],
}

fn inverse3<S: Scalar>(m: &[[S; 3]; 3]) -> Result<[[S; 3]; 3], JetError> {
    let det = det3(m);
    if det.is_zero() {
        return Err(JetError::Domain("singular affine transform".into()));
    }
    let c = |i: usize, j: usize| m[i % 3][j % 3].clone();
    // adjugate: inv[j][i] = cofactor(i, j) / det
    Ok(std::array::from_fn(|j| {
        std::array::from_fn(|i| (c(i + 1, j + 1) * c(i + 2, j + 2) - c(i + 1, j + 2) * c(i + 2, j + 1)) / det.clone())
    }))
}

/// Transfer quantities of `T` at the source point `T(0)` on the graph of `F`.
pub fn transfer_frame<S: Scalar>(fp: &JetPoint<S>, t: &AffineTransform3<S>) -> Result<TransferFrame<S>, JetError> {
    fp.require(2)?;
    let forward = inverse3(&t.matrix())?;
    let [[a, b, c], [k, l, m], _] = forward.clone();
    let (fx, fy) = (fp.u(1, 0), fp.u(0, 1));
    let j11 = a + c.clone() * fx.clone();
    let j12 = k + m.clone() * fx;
    let j21 = b + c * fy.clone();
    let j22 = l + m * fy;
    let lambda = j11.clone() * j22.clone() - j12.clone() * j21.clone();
    if lambda.is_zero() {
        return Err(JetError::Domain("Lambda vanishes: the image is not a graph".into()));
    }
    let upsilon = j22.clone() * fp.u(2, 0) - j12.clone() * fp.u(1, 1);
    Ok(TransferFrame { delta: det3(&forward), forward, lambda, upsilon, jacobian: [[j11, j12], [j21, j22]] })
}

/// Outcome of a transfer check: `g_value` against `factor * f_value`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferReport {
    pub name: TransferInvariant,
    pub f_value: f64,
    pub g_value: f64,
    /// Expected ratio `G-side / F-side`.
    pub factor: f64,
    /// `|g - factor f| / max(1, |g|, |factor f|)`; zero exactly on rational data.
    pub residual: f64,
    pub exact: bool,
    pub pass: bool,
}

/// Transform `F` by `T` (series module convention), recompute the invariant
/// at corresponding points and compare with the transfer law: `H` picks up
/// `delta^2 / Lambda^4`, `S` picks up `F_xx / Upsilon`, the absolute
/// invariants are unchanged. Exact scalars must agree exactly.
pub fn relative_invariance_check<S: Scalar>(
    name: TransferInvariant,
    f: &Series<S>,
    t: &AffineTransform3<S>,
    tol: f64,
) -> Result<TransferReport, JetError> {
    let g = apply_affine(f, t)?;
    let source = [t.d.clone(), t.n.clone()];
    let fp = jets_of_series(&f.shift(&source));
    let gp = jets_of_series(&g);
    let frame = transfer_frame(&fp, t)?;
    let kind = |p: &JetPoint<S>| -> Result<PointType, JetError> {
        Ok(if eval_h(p)?.to_f64() > 0.0 { PointType::Elliptic } else { PointType::Hyperbolic })
    };
    let (fv, gv, factor) = match name {
        TransferInvariant::H => {
            let l2 = frame.lambda.clone() * frame.lambda.clone();
            (eval_h(&fp)?, eval_h(&gp)?, frame.delta.clone() * frame.delta.clone() / (l2.clone() * l2))
        }
        TransferInvariant::S => {
            if frame.upsilon.is_zero() {
                return Err(JetError::Domain("Upsilon vanishes".into()));
            }
            (eval_s(&fp)?, eval_s(&gp)?, fp.u(2, 0) / frame.upsilon.clone())
        }
        TransferInvariant::W => (eval_w(&fp)?, eval_w(&gp)?, S::one()),
        TransferInvariant::X => (eval_x(&fp)?, eval_x(&gp)?, S::one()),
        TransferInvariant::Y => (eval_y(&fp)?, eval_y(&gp)?, S::one()),
        TransferInvariant::M => (eval_m(&fp)?, eval_m(&gp)?, S::one()),
        TransferInvariant::Pick => (pick_invariant(&fp, kind(&fp)?)?, pick_invariant(&gp, kind(&gp)?)?, S::one()),
    };
    let expected = factor.clone() * fv.clone();
    let diff = gv.clone() - expected.clone();
    let exact = S::KIND == ScalarKind::Exact;
    let residual = diff.abs_f64() / 1f64.max(gv.abs_f64()).max(expected.abs_f64());
    let pass = if exact { diff.is_zero() } else { residual <= tol };
    Ok(TransferReport { name, f_value: fv.to_f64(), g_value: gv.to_f64(), factor: factor.to_f64(), residual, exact, pass })
}

/// Residual matrix of the Hessian congruence
/// `J Hess(G) J^t - (delta / Lambda) Hess(F)` with `J` the transfer Jacobian.
pub fn hessian_congruence<S: Scalar>(f: &Series<S>, t: &AffineTransform3<S>) -> Result<[[S; 2]; 2], JetError> {
    let g = apply_affine(f, t)?;
    let fp = jets_of_series(&f.shift(&[t.d.clone(), t.n.clone()]));
    let gp = jets_of_series(&g);
    fp.require(2)?;
    gp.require(2)?;
    let fr = transfer_frame(&fp, t)?;
    let hg = [[gp.u(2, 0), gp.u(1, 1)], [gp.u(1, 1), gp.u(0, 2)]];
    let hf = [[fp.u(2, 0), fp.u(1, 1)], [fp.u(1, 1), fp.u(0, 2)]];
    let j = &fr.jacobian;
    let ratio = fr.delta.clone() / fr.lambda.clone();
    Ok(std::array::from_fn(|r| {
        std::array::from_fn(|c| {
            let mut acc = S::zero();
            for a in 0..2 {
                for b in 0..2 {
                    acc = acc + j[r][a].clone() * hg[a][b].clone() * j[c][b].clone();
                }
            }
            acc - ratio.clone() * hf[r][c].clone()
        })
    }))
}
