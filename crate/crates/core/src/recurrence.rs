//! Recurrence relations among differential invariants: Maurer–Cartan
//! invariants solved from the phantom Cramér systems, the invariant
//! derivations `D1`, `D2` (closed form, and read off the normalizing frame),
//! verification of the recurrence identities for surfaces and curves, and the
//! homogeneous models they single out.

use crate::invariants::{a_factor, curve_f, w_numerator, CurveFunction, CurveInvariant, Sign, SurfaceInvariant};
use crate::jetpoly::{JetPolynomial, Var};
use crate::jets::{total_derivative_at, Dir, JetError, JetFunction, JetPoint, ParabolicJet};
use crate::linalg::{solve, LinalgError};
use crate::normalize::{
    normalize_curve_gl2, normalize_curve_sl2, normalize_parabolic_surface, Invariantized, NormalBranch, NormalFormResult,
    NormalizeOptions, DEFAULT_TOL,
};
use crate::prolong::{gl2_curve_generators, prolong_curve, sa3_generators, sl2_curve_generators, VectorField};
use crate::sampling::impose_cone;
use crate::scalar::{pow_third, Scalar, Q};
use crate::series::Series;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

pub use crate::sampling::SurfaceBranch;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecurrenceError {
    #[error("singular Maurer–Cartan system: the point lies outside the {0} domain")]
    Singular(String),
    #[error("point is on branch {found}, not {expected}")]
    WrongBranch { expected: String, found: String },
    #[error("vanishing denominator: {0}")]
    Denominator(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

impl From<RecurrenceError> for JetError {
    fn from(e: RecurrenceError) -> Self {
        match e {
            RecurrenceError::Jet(j) => j,
            other => JetError::Domain(other.to_string()),
        }
    }
}

fn branch_label(b: SurfaceBranch) -> &'static str {
    match b {
        SurfaceBranch::Generic => "Generic",
        SurfaceBranch::Cone => "Cone-branch",
    }
}

// ---------------------------------------------------------------------------
// Surfaces: phantom systems
// ---------------------------------------------------------------------------

/// The six coordinates normalized to constants (beyond order zero and one).
pub fn phantoms(branch: SurfaceBranch) -> [(usize, usize); 6] {
    match branch {
        SurfaceBranch::Generic => [(2, 0), (1, 1), (3, 0), (2, 1), (4, 0), (4, 1)],
        SurfaceBranch::Cone => [(2, 0), (1, 1), (3, 0), (2, 1), (4, 0), (6, 0)],
    }
}

/// The generators `v1..v6` acting non-trivially on jets of order two and up.
pub fn recurrence_generators() -> Vec<VectorField> {
    sa3_generators().into_iter().take(6).collect()
}

fn surface_prolongations(j: usize, k: usize) -> Arc<Vec<JetPolynomial>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<JetPolynomial>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("prolongation cache poisoned");
    guard
        .entry((j, k))
        .or_insert_with(|| Arc::new(recurrence_generators().iter().map(|v| v.prolong(j, k)).collect()))
        .clone()
}

/// Row `(Phi_1^{j,k}, ..., Phi_6^{j,k})` invariantized at the normal-form jet.
pub fn prolongation_row<S: Scalar>(j: usize, k: usize, inv: &JetPoint<S>) -> Vec<S> {
    surface_prolongations(j, k).iter().map(|p| p.eval(&|v| inv.value(v))).collect()
}

/// The invariantized jet of a normal form: phantom coordinates set to their
/// constants, the others taken from `free(j, k)`; on the cone branch the
/// `u_{j,1}` are solved from `W ≡ 0` instead. Filled to `order`.
pub fn surface_normal_jet<S: Scalar>(
    branch: SurfaceBranch,
    order: usize,
    mut free: impl FnMut(usize, usize) -> S,
) -> Result<JetPoint<S>, JetError> {
    let ph = phantoms(branch);
    let mut p = ParabolicJet::from_fn(S::zero(), S::zero(), order, |j, k| {
        if j + k < 2 {
            S::zero()
        } else if (j, k) == (2, 0) || (j, k) == (2, 1) {
            S::one()
        } else if ph.contains(&(j, k)) {
            S::zero()
        } else {
            free(j, k)
        }
    });
    if branch == SurfaceBranch::Cone {
        impose_cone(&mut p)?;
    }
    p.fill(order)
}

/// Maurer–Cartan invariants with the linear system they solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MaurerCartan<S> {
    pub label: String,
    /// Phantom jet orders labelling the rows.
    pub phantoms: Vec<usize>,
    /// `matrix[row][sigma]`: invariantized prolongation coefficients.
    pub matrix: Vec<Vec<S>>,
    /// Right-hand sides `I_{J + e_i}`, one vector per derivation.
    pub rhs: Vec<Vec<S>>,
    /// Solutions `K_i^sigma` (surfaces: `K1`, `K2`; curves: `R`).
    pub k: Vec<Vec<S>>,
}

impl<S: Scalar> MaurerCartan<S> {
    /// Largest `|matrix K_i + rhs_i|` over all rows and derivations.
    pub fn residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (k, rhs) in self.k.iter().zip(&self.rhs) {
            for (row, r) in self.matrix.iter().zip(rhs) {
                let mut acc = r.clone();
                for (a, x) in row.iter().zip(k) {
                    acc = acc + a.clone() * x.clone();
                }
                worst = worst.max(acc.abs_f64());
            }
        }
        worst
    }

    pub fn k1(&self) -> &[S] {
        &self.k[0]
    }

    pub fn k2(&self) -> &[S] {
        &self.k[1]
    }
}

fn solve_system<S: Scalar>(m: &[Vec<S>], rhs: &[S], label: &str) -> Result<Vec<S>, RecurrenceError> {
    let neg: Vec<S> = rhs.iter().map(|r| -r.clone()).collect();
    solve(m, &neg).map_err(|e| match e {
        LinalgError::Singular => RecurrenceError::Singular(label.to_string()),
        LinalgError::Shape(s) => RecurrenceError::Denominator(s),
    })
}

/// Set up and solve `0 = I_{J+e_i} + sum_sigma Phi_sigma^J K_i^sigma` over the
/// phantoms `J`, at an invariantized jet of order at least 6 (generic) or 7 (cone).
pub fn mc_from_invariants<S: Scalar>(branch: SurfaceBranch, inv: &JetPoint<S>) -> Result<MaurerCartan<S>, RecurrenceError> {
    let need = match branch {
        SurfaceBranch::Generic => 6,
        SurfaceBranch::Cone => 7,
    };
    inv.require(need)?;
    let ph = phantoms(branch);
    let matrix: Vec<Vec<S>> = ph.iter().map(|&(j, k)| prolongation_row(j, k, inv)).collect();
    let rhs1: Vec<S> = ph.iter().map(|&(j, k)| inv.u(j + 1, k)).collect();
    let rhs2: Vec<S> = ph.iter().map(|&(j, k)| inv.u(j, k + 1)).collect();
    let label = branch_label(branch);
    let k1 = solve_system(&matrix, &rhs1, label)?;
    let k2 = solve_system(&matrix, &rhs2, label)?;
    Ok(MaurerCartan {
        label: label.to_string(),
        phantoms: ph.iter().map(|&(j, k)| j + k).collect(),
        matrix,
        rhs: vec![rhs1, rhs2],
        k: vec![k1, k2],
    })
}

fn check_branch<S>(r: &NormalFormResult<S>, branch: SurfaceBranch) -> Result<(), RecurrenceError> {
    let ok = matches!(
        (branch, r.branch),
        (SurfaceBranch::Generic, NormalBranch::Generic) | (SurfaceBranch::Cone, NormalBranch::Cone)
    );
    if ok {
        Ok(())
    } else {
        Err(RecurrenceError::WrongBranch { expected: branch_label(branch).to_string(), found: r.branch.label() })
    }
}

/// Normal form of a parabolic jet as an invariantized jet point: the
/// non-phantom coordinates are read from the normalized series, the phantoms
/// are substituted exactly and the dependent jets refilled.
pub fn invariantized_jet<S: Scalar>(branch: SurfaceBranch, p: &ParabolicJet<S>) -> Result<JetPoint<S>, RecurrenceError> {
    let n = p.order().min(crate::normalize::DEFAULT_ORDER + 1);
    let r = normalize_parabolic_surface(&p.realize(n)?, &NormalizeOptions::default())?;
    check_branch(&r, branch)?;
    Ok(surface_normal_jet(branch, n, |j, k| r.coeff(j, k))?)
}

/// Maurer–Cartan invariants of a parabolic jet (order at least 6 generic, 7 cone).
pub fn solve_mc_surface<S: Scalar>(branch: SurfaceBranch, p: &ParabolicJet<S>) -> Result<MaurerCartan<S>, RecurrenceError> {
    mc_from_invariants(branch, &invariantized_jet(branch, p)?)
}

/// The closed forms of `K1`, `K2` in terms of `W, M, I_{5,1}` (generic) or
/// `X, Y` (cone) read from the invariantized jet.
pub fn closed_form_mc<S: Scalar>(branch: SurfaceBranch, inv: &JetPoint<S>) -> Result<[Vec<S>; 2], RecurrenceError> {
    let r = S::from_ratio;
    match branch {
        SurfaceBranch::Generic => {
            let (w, m, i51) = (inv.u(3, 1), inv.u(5, 0), inv.u(5, 1));
            if w.is_zero() {
                return Err(RecurrenceError::Denominator("W".into()));
            }
            let q = (S::from_i64(2) * m.clone() - r(1, 2) * i51.clone()) / w.clone();
            let k1 = vec![r(-1, 3) * w.clone(), w.clone(), S::one(), q.clone(), -q, r(3, 2) * m - r(1, 3) * i51];
            let k2 = vec![S::zero(), S::one(), S::zero(), -w.clone(), r(4, 3) * w.clone(), r(-8, 9) * w.clone() * w];
            Ok([k1, k2])
        }
        SurfaceBranch::Cone => {
            let (x, y) = (inv.u(5, 0), inv.u(7, 0));
            if x.is_zero() {
                return Err(RecurrenceError::Denominator("X".into()));
            }
            let q = y / (S::from_i64(3) * x.clone());
            let k1 = vec![S::zero(), S::zero(), S::one(), -q.clone(), q, x / S::from_i64(6)];
            let k2 = vec![S::zero(), S::one(), S::zero(), S::zero(), S::zero(), S::zero()];
            Ok([k1, k2])
        }
    }
}

/// The recurrence prediction `D_i I_{j,k} = I_{(j,k)+e_i} + sum Phi^{j,k} K_i`.
pub fn predicted_derivative<S: Scalar>(mc: &MaurerCartan<S>, i: usize, j: usize, k: usize, inv: &JetPoint<S>) -> S {
    let next = if i == 1 { inv.u(j + 1, k) } else { inv.u(j, k + 1) };
    let row = prolongation_row(j, k, inv);
    row.into_iter().zip(&mc.k[i - 1]).fold(next, |acc, (a, x)| acc + a * x.clone())
}

/// Commutator coefficients `[D1, D2] = Z1 D1 + Z2 D2` built from the
/// horizontal parts of the generators at the origin.
pub fn commutator_coefficients<S: Scalar>(mc: &MaurerCartan<S>) -> (S, S) {
    let at0 = |p: &JetPolynomial, v: Var| -> S {
        p.partial(v).eval(&|_| S::zero())
    };
    let mut z1 = S::zero();
    let mut z2 = S::zero();
    for (s, g) in recurrence_generators().iter().enumerate() {
        z1 = z1 + at0(&g.xi, Var::X) * mc.k[1][s].clone() - at0(&g.xi, Var::Y) * mc.k[0][s].clone();
        z2 = z2 + at0(&g.eta, Var::X) * mc.k[1][s].clone() - at0(&g.eta, Var::Y) * mc.k[0][s].clone();
    }
    (z1, z2)
}

// ---------------------------------------------------------------------------
// Surfaces: invariant derivations
// ---------------------------------------------------------------------------

/// `D1 = alpha D_x + beta D_y`, `D2 = gamma D_x + delta D_y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantDerivationCoeffs<S> {
    pub alpha: S,
    pub beta: S,
    pub gamma: S,
    pub delta: S,
}

impl<S: Scalar> InvariantDerivationCoeffs<S> {
    pub fn det(&self) -> S {
        self.alpha.clone() * self.delta.clone() - self.beta.clone() * self.gamma.clone()
    }

    fn apply(&self, i: usize, dx: S, dy: S) -> S {
        if i == 1 {
            self.alpha.clone() * dx + self.beta.clone() * dy
        } else {
            self.gamma.clone() * dx + self.delta.clone() * dy
        }
    }
}

/// Closed-form coefficients on the generic branch (jets up to order 5).
pub fn invariant_derivatives<S: Scalar>(p: &JetPoint<S>) -> Result<InvariantDerivationCoeffs<S>, JetError> {
    p.require(5)?;
    let u = |j, k| p.u(j, k);
    let (u11, u20, u21, u30, u31, u40, u41, u50) = (u(1, 1), u(2, 0), u(2, 1), u(3, 0), u(3, 1), u(4, 0), u(4, 1), u(5, 0));
    let a = a_factor(p);
    let q = -w_numerator(p);
    if u20.is_zero() || a.is_zero() || q.is_zero() {
        return Err(JetError::Domain("invariant derivations need u20, A and the W numerator nonzero".into()));
    }
    let a23 = pow_third(&a, 2).ok_or_else(|| JetError::Domain("A^(2/3) not representable".into()))?;
    let i = |n: i64| S::from_i64(n);
    let num_alpha = i(12) * u30.clone() * u21.powi(2) * u20.powi(2) - i(6) * u31.clone() * u21.clone() * u20.powi(3)
        - i(44) * u30.powi(2) * u11.clone() * u21.clone() * u20.clone()
        + i(16) * u30.clone() * u31.clone() * u11.clone() * u20.powi(2)
        + i(15) * u40.clone() * u11.clone() * u21.clone() * u20.powi(2)
        - i(3) * u11.clone() * u41.clone() * u20.powi(3)
        + i(32) * u30.powi(3) * u11.powi(2)
        - i(25) * u40.clone() * u11.powi(2) * u30.clone() * u20.clone()
        + i(3) * u50.clone() * u11.powi(2) * u20.powi(2);
    let num_beta = i(20) * u20.clone() * u21.clone() * u30.powi(2) - i(10) * u30.clone() * u20.powi(2) * u31
        - i(9) * u20.powi(2) * u21 * u40.clone()
        + i(3) * u41 * u20.powi(3)
        - i(20) * u11.clone() * u30.powi(3)
        + i(19) * u30 * u11.clone() * u20.clone() * u40
        - i(3) * u11.clone() * u20.powi(2) * u50;
    let six = i(6);
    Ok(InvariantDerivationCoeffs {
        alpha: num_alpha / (six.clone() * u20.clone() * a23.clone() * q.clone()),
        beta: num_beta / (six * a23 * q),
        gamma: -(u20.clone() * u11) / a.clone(),
        delta: u20.clone() * u20 / a,
    })
}

/// Jet order read by the frame of a branch.
pub fn frame_order(branch: SurfaceBranch) -> usize {
    match branch {
        SurfaceBranch::Generic => 5,
        SurfaceBranch::Cone => 6,
    }
}

/// Coefficients read off the normalizing frame: `D1`, `D2` are the target
/// directions `d/ds`, `d/dt` of the composed transform, pulled back to `D_x, D_y`
/// (valid because the normal form has a horizontal tangent plane).
pub fn frame_derivatives<S: Scalar>(p: &JetPoint<S>, branch: SurfaceBranch) -> Result<InvariantDerivationCoeffs<S>, RecurrenceError> {
    let n = frame_order(branch);
    p.require(n)?;
    let f = Series::from_derivatives2(n, |j, k| p.u(j, k));
    let r = normalize_parabolic_surface(&f, &NormalizeOptions { tol: DEFAULT_TOL })?;
    check_branch(&r, branch)?;
    let t = r.surface_transform().expect("surface normalization yields a surface transform");
    Ok(InvariantDerivationCoeffs { alpha: t.a.clone(), beta: t.k.clone(), gamma: t.b.clone(), delta: t.l.clone() })
}

/// How `D1`, `D2` are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivation {
    /// The explicit `alpha, beta, gamma, delta` (generic branch only).
    ClosedForm,
    /// Read off the normalizing frame on the given branch.
    Frame(SurfaceBranch),
}

/// `D_i f` as a jet function in its own right (nestable for commutators).
#[derive(Debug, Clone)]
pub struct InvariantDerivative<F> {
    pub i: usize,
    pub f: F,
    pub derivation: Derivation,
}

impl<F: JetFunction> InvariantDerivative<F> {
    pub fn new(i: usize, f: F, derivation: Derivation) -> Self {
        assert!(i == 1 || i == 2, "invariant derivations are D1 and D2");
        InvariantDerivative { i, f, derivation }
    }
}

impl<F: JetFunction> JetFunction for InvariantDerivative<F> {
    fn order(&self) -> usize {
        let frame = match self.derivation {
            Derivation::ClosedForm => 5,
            Derivation::Frame(b) => frame_order(b),
        };
        (self.f.order().max(2) + 1).max(frame)
    }

    fn eval<S: Scalar>(&self, p: &JetPoint<S>) -> Result<S, JetError> {
        let c = match self.derivation {
            Derivation::ClosedForm => invariant_derivatives(p)?,
            Derivation::Frame(b) => frame_derivatives(p, b)?,
        };
        let dx = total_derivative_at(&self.f, Dir::X, p)?;
        let dy = total_derivative_at(&self.f, Dir::Y, p)?;
        Ok(c.apply(self.i, dx, dy))
    }
}

/// `D_i f` at a generic parabolic jet through the closed-form coefficients.
pub fn apply_d<S: Scalar, F: JetFunction>(i: usize, f: F, p: &ParabolicJet<S>) -> Result<S, JetError> {
    InvariantDerivative::new(i, f, Derivation::ClosedForm).at(p)
}

// ---------------------------------------------------------------------------
// Verification reports
// ---------------------------------------------------------------------------

/// One checked identity `lhs = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Magnitude of the largest term combined on either side.
    pub scale: f64,
    /// `|lhs - rhs| / max(1, |lhs|, |rhs|, scale)`.
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RecurrenceReport {
    pub checks: Vec<IdentityCheck>,
}

impl RecurrenceReport {
    pub fn push(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) {
        self.push_scaled(name, lhs, rhs, 0.0, tol);
    }

    /// Like [`push`](Self::push), measuring the residual against the largest
    /// term that cancels (roundoff in cancelling sums is relative to it).
    pub fn push_scaled(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, scale: f64, tol: f64) {
        let residual = (lhs - rhs).abs() / 1f64.max(lhs.abs()).max(rhs.abs()).max(scale.abs());
        self.checks.push(IdentityCheck { name: name.into(), lhs, rhs, scale, residual, pass: residual <= tol });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&IdentityCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

fn d<F: JetFunction>(i: usize, f: F, branch: SurfaceBranch) -> InvariantDerivative<F> {
    InvariantDerivative::new(i, f, Derivation::Frame(branch))
}

/// Check the printed recurrence identities of a branch at one parabolic jet
/// (order at least 8 generic, 9 cone). `I_{5,1}, I_{6,0}, I_{7,0}, I_{6,1},
/// I_{8,0}` come from the normalization pipeline; `D1, D2` from the frame.
pub fn verify_recurrences(branch: SurfaceBranch, p: &ParabolicJet<f64>, tol: f64) -> Result<RecurrenceReport, RecurrenceError> {
    let mut rep = RecurrenceReport::default();
    let inv = invariantized_jet(branch, p)?;
    let mc = mc_from_invariants(branch, &inv)?;
    let closed = closed_form_mc(branch, &inv)?;
    for (i, (num, cf)) in mc.k.iter().zip(&closed).enumerate() {
        for (s, (a, b)) in num.iter().zip(cf).enumerate() {
            rep.push(format!("K{}^{} Cramér = closed form", i + 1, s + 1), *a, *b, tol);
        }
    }
    rep.push("Cramér residual", mc.residual(), 0.0, 1e-9);
    let (z1, z2) = commutator_coefficients(&mc);
    let at = |f: &dyn Fn(&JetPoint<f64>) -> Result<f64, JetError>| -> Result<f64, JetError> { f(&p.fill(p.order())?) };
    let ev = |f: &dyn DynEval| -> Result<f64, RecurrenceError> { Ok(at(&|q| f.eval_f64(q))?) };
    match branch {
        SurfaceBranch::Generic => {
            let w = ev(&SurfaceInvariant::W)?;
            let m = ev(&SurfaceInvariant::M)?;
            let i51 = ev(&Invariantized::new(5, 1))?;
            let i60 = ev(&Invariantized::new(6, 0))?;
            let i61 = ev(&Invariantized::new(6, 1))?;
            let i70 = ev(&Invariantized::new(7, 0))?;
            let b = branch;
            let d1w = ev(&d(1, SurfaceInvariant::W, b))?;
            let d2w = ev(&d(2, SurfaceInvariant::W, b))?;
            let d1m = ev(&d(1, SurfaceInvariant::M, b))?;
            let d2m = ev(&d(2, SurfaceInvariant::M, b))?;
            rep.push("D1 W = -2/3 W^2", d1w, -2.0 / 3.0 * w * w, tol);
            rep.push("D2 W = 2 W", d2w, 2.0 * w, tol);
            rep.push("D2 M = I51 - M + 80/9 W^3", d2m, i51 - m + 80.0 / 9.0 * w.powi(3), tol);
            let s1m = i60.abs().max((14.0 * m * w).abs()).max((10.0 / 3.0 * i51 * w).abs());
            rep.push_scaled("D1 M = I60 - 14 M W + 10/3 I51 W", d1m, i60 - 14.0 * m * w + 10.0 / 3.0 * i51 * w, s1m, tol);
            let i60_rebuilt = d1m + 14.0 * m * w - 10.0 / 3.0 * (d2m + m - 80.0 / 9.0 * w.powi(3)) * w;
            rep.push("I51 generated by W, M, D2 M", d2m + m - 80.0 / 9.0 * w.powi(3), i51, tol);
            rep.push_scaled("I60 generated by W, M, D1 M, D2 M", i60_rebuilt, i60, s1m, tol);
            let i60f = Invariantized::new(6, 0);
            let d1i60 = ev(&d(1, i60f, b))?;
            let d2i60 = ev(&d(2, i60f, b))?;
            let quad = 1.5 / w * (7.0 * m - 2.0 * i51) * (4.0 * m - i51);
            rep.push_scaled(
                "D1 I60 = I70 - 3/(2W)(7M - 2 I51)(4M - I51) + 4/3 W I60",
                d1i60,
                i70 - quad + 4.0 / 3.0 * w * i60,
                i70.abs().max(quad.abs()).max((w * i60).abs()),
                tol,
            );
            let s2 = [i61, i60, 21.0 * w * m, 8.0 * w * i51].iter().fold(0.0f64, |a, b| a.max(b.abs()));
            rep.push_scaled("D2 I60 = I61 - I60 + 21 W M - 8 W I51", d2i60, i61 - i60 + 21.0 * w * m - 8.0 * w * i51, s2, tol);
            for (name, (j, k), val) in [("W", (3, 1), d1w), ("M", (5, 0), d1m)] {
                rep.push(format!("D1 {name} = Cramér recurrence"), val, predicted_derivative(&mc, 1, j, k, &inv), tol);
            }
            for (name, (j, k), val) in [("W", (3, 1), d2w), ("M", (5, 0), d2m)] {
                rep.push(format!("D2 {name} = Cramér recurrence"), val, predicted_derivative(&mc, 2, j, k, &inv), tol);
            }
            let c12 = ev(&d(1, d(2, SurfaceInvariant::W, b), b))?;
            let c21 = ev(&d(2, d(1, SurfaceInvariant::W, b), b))?;
            let comm = c12 - c21;
            rep.push("[D1,D2] W = 4/3 W^2", comm, 4.0 / 3.0 * w * w, tol);
            rep.push("[D1,D2] W = -D1 W + W/3 D2 W", comm, -d1w + w / 3.0 * d2w, tol);
            rep.push("[D1,D2] W = Z1 D1 W + Z2 D2 W (Cramér)", comm, z1 * d1w + z2 * d2w, tol);
            rep.push("Z1 = -1", z1, -1.0, tol);
            rep.push("Z2 = W/3", z2, w / 3.0, tol);
            let fp = p.fill(p.order())?;
            let cf = invariant_derivatives(&fp)?;
            let fr = frame_derivatives(&fp, b)?;
            rep.push("alpha closed form = frame", cf.alpha, fr.alpha, tol);
            rep.push("beta closed form = frame", cf.beta, fr.beta, tol);
            rep.push("gamma closed form = frame", cf.gamma, fr.gamma, tol);
            rep.push("delta closed form = frame", cf.delta, fr.delta, tol);
            let det_expected = fp.u(2, 0) / a_factor(&fp).cbrt().powi(2);
            rep.push("alpha delta - beta gamma = u20 / A^(2/3)", cf.det(), det_expected, tol);
        }
        SurfaceBranch::Cone => {
            let x = ev(&SurfaceInvariant::X)?;
            let y = ev(&SurfaceInvariant::Y)?;
            let i80 = ev(&Invariantized::new(8, 0))?;
            let b = branch;
            let d1x = ev(&d(1, SurfaceInvariant::X, b))?;
            let d2x = ev(&d(2, SurfaceInvariant::X, b))?;
            let d1y = ev(&d(1, SurfaceInvariant::Y, b))?;
            let d2y = ev(&d(2, SurfaceInvariant::Y, b))?;
            rep.push_scaled("D1 X = 0", d1x, 0.0, x, tol);
            rep.push("D2 X = 3 X", d2x, 3.0 * x, tol);
            rep.push("D2 Y = 5 Y", d2y, 5.0 * y, tol);
            let s1y = i80.abs().max(17.5 * x * x);
            rep.push_scaled("D1 Y = I80 - 35/2 X^2", d1y, i80 - 17.5 * x * x, s1y, tol);
            for (name, (j, k), v1, v2, s1) in [("X", (5, 0), d1x, d2x, x.abs()), ("Y", (7, 0), d1y, d2y, s1y)] {
                rep.push_scaled(format!("D1 {name} = Cramér recurrence"), v1, predicted_derivative(&mc, 1, j, k, &inv), s1, tol);
                rep.push(format!("D2 {name} = Cramér recurrence"), v2, predicted_derivative(&mc, 2, j, k, &inv), tol);
            }
            let c12 = ev(&d(1, d(2, SurfaceInvariant::X, b), b))?;
            let c21 = ev(&d(2, d(1, SurfaceInvariant::X, b), b))?;
            rep.push_scaled("[D1,D2] X = -D1 X", c12 - c21, -d1x, c12.abs().max(c21.abs()), tol);
            rep.push("Z1 = -1", z1, -1.0, tol);
            rep.push("Z2 = 0", z2, 0.0, tol);
        }
    }
    Ok(rep)
}

/// Object-safe evaluation of jet functions at doubles (for report tables).
trait DynEval {
    fn eval_f64(&self, p: &JetPoint<f64>) -> Result<f64, JetError>;
}

impl<F: JetFunction> DynEval for F {
    fn eval_f64(&self, p: &JetPoint<f64>) -> Result<f64, JetError> {
        let need = self.order();
        if p.order() < need {
            return Err(JetError::InsufficientOrder { need, have: p.order() });
        }
        self.eval(p)
    }
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

/// Group acting on plane curves for the curve recurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CurveGroup {
    /// Special affine group of the plane (normalized through SL2 loops).
    Sa2,
    /// General linear group with translations.
    Gl2,
}

impl CurveGroup {
    pub fn generators(self) -> Vec<VectorField> {
        match self {
            CurveGroup::Sa2 => sl2_curve_generators(),
            CurveGroup::Gl2 => gl2_curve_generators(),
        }
    }

    /// Phantom orders `u_1, ..., u_r`.
    pub fn phantoms(self) -> Vec<usize> {
        (1..=self.generators().len()).collect()
    }

    /// Jet order read by the normalizing frame.
    pub fn frame_order(self) -> usize {
        match self {
            CurveGroup::Sa2 => 3,
            CurveGroup::Gl2 => 4,
        }
    }

    fn normalize<S: Scalar>(self, u: &[S], order: usize) -> Result<NormalFormResult<S>, JetError> {
        if u.len() <= order {
            return Err(JetError::InsufficientOrder { need: order, have: u.len().saturating_sub(1) });
        }
        let f = Series::from_derivatives1(order, |j| u[j].clone());
        let opts = NormalizeOptions::default();
        match self {
            CurveGroup::Sa2 => normalize_curve_sl2(&f, &opts),
            CurveGroup::Gl2 => normalize_curve_gl2(&f, &opts),
        }
    }
}

fn curve_prolongations(group: CurveGroup, k: usize) -> Arc<Vec<JetPolynomial>> {
    static CACHE: OnceLock<Mutex<HashMap<(CurveGroup, usize), Arc<Vec<JetPolynomial>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("prolongation cache poisoned");
    guard
        .entry((group, k))
        .or_insert_with(|| Arc::new(group.generators().iter().map(|v| prolong_curve(v, k)).collect()))
        .clone()
}

/// `(Phi_1^k, ..., Phi_r^k)` at the normal-form curve jet `inv` (`x = 0`).
pub fn curve_prolongation_row<S: Scalar>(group: CurveGroup, k: usize, inv: &[S]) -> Vec<S> {
    curve_prolongations(group, k)
        .iter()
        .map(|p| {
            p.eval(&|v| match v {
                Var::U(j, 0) => inv[j as usize].clone(),
                _ => S::zero(),
            })
        })
        .collect()
}

/// Solve `0 = I_{k+1} + sum_kappa Phi_kappa^k R^kappa` over the phantoms, at a
/// normal-form curve jet `inv` (`inv[0..]` = `0, 0, 1, 0, I4, I5, ...`).
pub fn mc_curve_from_invariants<S: Scalar>(group: CurveGroup, inv: &[S]) -> Result<MaurerCartan<S>, RecurrenceError> {
    let ph = group.phantoms();
    let need = ph.len() + 1;
    if inv.len() <= need {
        return Err(JetError::InsufficientOrder { need, have: inv.len().saturating_sub(1) }.into());
    }
    let matrix: Vec<Vec<S>> = ph.iter().map(|&k| curve_prolongation_row(group, k, inv)).collect();
    let rhs: Vec<S> = ph.iter().map(|&k| inv[k + 1].clone()).collect();
    let label = format!("{group:?}");
    let r = solve_system(&matrix, &rhs, &label)?;
    Ok(MaurerCartan { label, phantoms: ph, matrix, rhs: vec![rhs], k: vec![r] })
}

/// Normal-form jet of a curve (`G_0 .. G_n`) under the group.
pub fn curve_invariantized_jet<S: Scalar>(group: CurveGroup, u: &[S]) -> Result<Vec<S>, RecurrenceError> {
    let n = u.len() - 1;
    let r = group.normalize(u, n)?;
    match (group, r.branch) {
        (CurveGroup::Sa2, NormalBranch::Sl2) | (CurveGroup::Gl2, NormalBranch::Gl2(_)) => {}
        (_, b) => {
            return Err(RecurrenceError::WrongBranch { expected: format!("{group:?}"), found: b.label() });
        }
    }
    Ok((0..=n).map(|k| r.coeff(k, 0)).collect())
}

/// Maurer–Cartan invariants of a curve jet `u_0..u_n` (`n >= 4` SA2, `n >= 5` GL2).
pub fn solve_mc_curve<S: Scalar>(group: CurveGroup, u: &[S]) -> Result<MaurerCartan<S>, RecurrenceError> {
    mc_curve_from_invariants(group, &curve_invariantized_jet(group, u)?)
}

/// Closed forms: SA2 `R = (0, P/3, -1)`; GL2 `R = (±I5/2, ±I5, ±1/3, -1)`.
pub fn closed_form_mc_curve<S: Scalar>(group: CurveGroup, inv: &[S]) -> Vec<S> {
    match group {
        CurveGroup::Sa2 => vec![S::zero(), inv[4].clone() / S::from_i64(3), -S::one()],
        CurveGroup::Gl2 => {
            let e = inv[4].clone();
            let i5 = inv[5].clone();
            vec![e.clone() * i5.clone() / S::from_i64(2), e.clone() * i5, e / S::from_i64(3), -S::one()]
        }
    }
}

/// Multiplier `lambda` of `D_x = lambda D_x` read off the normalizing frame
/// (the `x`-scaling of the composed transform).
pub fn curve_dx_multiplier<S: Scalar>(group: CurveGroup, u: &[S]) -> Result<S, JetError> {
    let r = group.normalize(u, group.frame_order())?;
    Ok(r.curve_transform().expect("curve normalization yields a curve transform").a.clone())
}

/// Closed forms of the multiplier: `u2^(-1/3)` (SA2) and
/// `sqrt(3) |u2| / sqrt(|3 u2 u4 - 5 u3^2|)` (GL2).
pub fn curve_dx_multiplier_closed<S: Scalar>(group: CurveGroup, u: &[S]) -> Result<S, JetError> {
    let u2 = u[2].clone();
    match group {
        CurveGroup::Sa2 => pow_third(&u2, -1).ok_or_else(|| JetError::Domain("u2^(-1/3) not representable".into())),
        CurveGroup::Gl2 => {
            let n4 = S::from_i64(3) * u2.clone() * u[4].clone() - S::from_i64(5) * u[3].clone() * u[3].clone();
            let abs = |v: S| if v.to_f64() < 0.0 { -v } else { v };
            let ratio = S::from_i64(3) * u2.clone() * u2 / abs(n4);
            ratio.sqrt().ok_or_else(|| JetError::Domain("multiplier not representable".into()))
        }
    }
}

/// `I_k`: the normal-form coefficient `G_k` as a curve function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveInvariantized {
    pub group: CurveGroup,
    pub k: usize,
}

impl CurveFunction for CurveInvariantized {
    fn order(&self) -> usize {
        self.k.max(self.group.frame_order())
    }
    fn eval<S: Scalar>(&self, u: &[S]) -> Result<S, JetError> {
        Ok(self.group.normalize(u, self.order())?.coeff(self.k, 0))
    }
}

/// `D_x f = lambda D_x f` with the frame multiplier (nestable).
#[derive(Debug, Clone)]
pub struct CurveInvariantDerivative<F> {
    pub group: CurveGroup,
    pub f: F,
}

impl<F: CurveFunction> CurveFunction for CurveInvariantDerivative<F> {
    fn order(&self) -> usize {
        (self.f.order() + 1).max(self.group.frame_order())
    }
    fn eval<S: Scalar>(&self, u: &[S]) -> Result<S, JetError> {
        let lambda = curve_dx_multiplier(self.group, u)?;
        Ok(lambda * crate::invariants::curve_total_derivative(&self.f, u)?)
    }
}

fn cdx<F: CurveFunction>(group: CurveGroup, f: F) -> CurveInvariantDerivative<F> {
    CurveInvariantDerivative { group, f }
}

fn curve_eval<F: CurveFunction>(f: &F, u: &[f64]) -> Result<f64, JetError> {
    let need = f.order();
    if u.len() <= need {
        return Err(JetError::InsufficientOrder { need, have: u.len().saturating_sub(1) });
    }
    f.eval(u)
}

/// Check the curve recurrences at a jet `u_0..u_n` (`n >= 8`).
pub fn verify_curve_recurrences(group: CurveGroup, u: &[f64], tol: f64) -> Result<RecurrenceReport, RecurrenceError> {
    let mut rep = RecurrenceReport::default();
    let inv = curve_invariantized_jet(group, u)?;
    let mc = mc_curve_from_invariants(group, &inv)?;
    for (s, (a, b)) in mc.k[0].iter().zip(closed_form_mc_curve(group, &inv)).enumerate() {
        rep.push(format!("R^{} Cramér = closed form", s + 1), *a, b, tol);
    }
    rep.push("Cramér residual", mc.residual(), 0.0, 1e-9);
    rep.push(
        "D_x multiplier: frame = closed form",
        curve_dx_multiplier(group, u)?,
        curve_dx_multiplier_closed(group, u)?,
        tol,
    );
    let dx = |k: usize| cdx(group, CurveInvariantized { group, k });
    let i = |k| CurveInvariantized { group, k };
    match group {
        CurveGroup::Sa2 => {
            let p = CurveInvariant::Sl2(4);
            let pv = curve_eval(&p, u)?;
            let d1 = curve_eval(&cdx(group, p), u)?;
            let d2 = curve_eval(&cdx(group, cdx(group, p)), u)?;
            let d3 = curve_eval(&cdx(group, cdx(group, cdx(group, p))), u)?;
            rep.push("I5 = D_x P", curve_eval(&i(5), u)?, d1, tol);
            rep.push("I6 = D_x^2 P + 5 P^2", curve_eval(&i(6), u)?, d2 + 5.0 * pv * pv, tol);
            rep.push("I7 = D_x^3 P + 17 D_x P P", curve_eval(&i(7), u)?, d3 + 17.0 * d1 * pv, tol);
            rep.push("P = closed-form F4", curve_f(4, u)?, inv[4], tol);
        }
        CurveGroup::Gl2 => {
            let e = inv[4];
            let i5 = curve_eval(&i(5), u)?;
            let i6 = curve_eval(&i(6), u)?;
            let i7 = curve_eval(&i(7), u)?;
            let d5 = curve_eval(&dx(5), u)?;
            let d6 = curve_eval(&dx(6), u)?;
            rep.push("I6 = D_x I5 ± 3/2 I5^2 + 5", i6, d5 + e * 1.5 * i5 * i5 + 5.0, tol);
            rep.push("I7 = D_x I6 ± 2 I5 I6 ± 7 I5", i7, d6 + e * 2.0 * i5 * i6 + e * 7.0 * i5, tol);
        }
    }
    let top = (u.len() - 2).min(7);
    let first = mc.phantoms.len() + 1;
    for k in first..top {
        let dk = curve_eval(&dx(k), u)?;
        let row = curve_prolongation_row(group, k, &inv);
        let corr: f64 = row.iter().zip(&mc.k[0]).map(|(a, r)| a * r).sum();
        rep.push(format!("I{} = D_x I{k} - sum Phi^{k} R (Cramér)", k + 1), inv[k + 1], dk - corr, tol);
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Homogeneous models
// ---------------------------------------------------------------------------

/// Normal-form coefficients `I_0..I_n` of the GL2-homogeneous curve with
/// `I5 = a`: the recurrences with every `D_x` term set to zero.
pub fn homogeneous_curve_coefficients<S: Scalar>(sign: Sign, a: S, n: usize) -> Result<Vec<S>, RecurrenceError> {
    let mut inv = vec![S::zero(), S::zero(), S::one(), S::zero(), sign.eps(), a];
    let mc = mc_curve_from_invariants(CurveGroup::Gl2, &inv)?;
    for k in 5..n {
        let row = curve_prolongation_row(CurveGroup::Gl2, k, &inv);
        let corr = row.into_iter().zip(&mc.k[0]).fold(S::zero(), |acc, (p, r)| acc + p * r.clone());
        inv.push(-corr);
    }
    inv.truncate(n + 1);
    Ok(inv)
}

/// `L = (±1 - a x/2 - u/3) d/dx + (±x - a u) d/du`.
pub fn homogeneous_tangent_field(sign: Sign, a: &Q) -> VectorField {
    let e = JetPolynomial::constant(sign.eps::<Q>());
    let x = JetPolynomial::var(Var::X);
    let u = JetPolynomial::var(Var::U(0, 0));
    let half = Q::new(1.into(), 2.into());
    let third = Q::new(1.into(), 3.into());
    let xi = e.sub(&x.scale(&(a.clone() * half))).sub(&u.scale(&third));
    let phi = x.scale(&sign.eps::<Q>()).sub(&u.scale(a));
    VectorField::new("L", xi, JetPolynomial::zero(), phi)
}

fn poly_on_series(p: &JetPolynomial, vars: &dyn Fn(Var) -> Series<Q>, nvars: usize, order: usize) -> Series<Q> {
    let mut acc = Series::zero(nvars, order);
    for (m, c) in p.terms() {
        let mut t = Series::constant(nvars, order, c.clone());
        for (v, e) in m.vars() {
            t = t.mul(&vars(v).pow(e as usize)).expect("same shape");
        }
        acc = acc.add(&t).expect("same shape");
    }
    acc
}

/// Taylor coefficients (orders `0..n-1`) of `phi - xi u'` for a field on the
/// graph `u = sum I_k x^k / k!` truncated at order `n = coeffs.len() - 1`.
pub fn curve_tangency_residual(field: &VectorField, coeffs: &[Q]) -> Vec<Q> {
    let n = coeffs.len() - 1;
    let u = Series::from_derivatives1(n, |k| coeffs[k].clone());
    let x = Series::var(1, n, 0);
    let vars = |v: Var| match v {
        Var::X => x.clone(),
        Var::U(0, 0) => u.clone(),
        _ => Series::zero(1, n),
    };
    let xi = poly_on_series(&field.xi, &vars, 1, n);
    let phi = poly_on_series(&field.phi, &vars, 1, n);
    let up = u.partial(0).with_order(n);
    let q = phi.sub(&xi.mul(&up).expect("same shape")).expect("same shape");
    (0..n).map(|k| q.mono(&[k])).collect()
}

/// Infinitesimal symmetries `e1, e2, e3` of the cone `u = x^2 / (2(1 - y))`.
pub fn cone_fields() -> [VectorField; 3] {
    let x = JetPolynomial::var(Var::X);
    let y = JetPolynomial::var(Var::Y);
    let u = JetPolynomial::var(Var::U(0, 0));
    let one_minus_y = JetPolynomial::int(1).sub(&y);
    let zero = JetPolynomial::zero;
    [
        VectorField::new("e1", u.neg(), x.clone(), zero()),
        VectorField::new("e2", one_minus_y.clone(), zero(), x),
        VectorField::new("e3", zero(), one_minus_y, u),
    ]
}

fn same_field(a: &VectorField, b: &VectorField) -> bool {
    a.xi == b.xi && a.eta == b.eta && a.phi == b.phi
}

fn scaled(v: &VectorField, k: i64) -> VectorField {
    let q = Q::from_integer(k.into());
    VectorField::new(&v.name, v.xi.scale(&q), v.eta.scale(&q), v.phi.scale(&q))
}

/// The bracket table `[e1,e2] = -e3`, `[e1,e3] = -e1`, `[e2,e3] = e2`, each
/// paired with whether the computed bracket matches.
pub fn cone_bracket_table() -> Vec<(&'static str, bool)> {
    let [e1, e2, e3] = cone_fields();
    vec![
        ("[e1,e2] = -e3", same_field(&e1.bracket(&e2), &scaled(&e3, -1))),
        ("[e1,e3] = -e1", same_field(&e1.bracket(&e3), &scaled(&e1, -1))),
        ("[e2,e3] = e2", same_field(&e2.bracket(&e3), &e2)),
    ]
}

/// Largest Taylor coefficient (total order below `n`) of `phi - xi u_x - eta u_y`
/// on the cone graph truncated at order `n`.
pub fn cone_tangency_residual(field: &VectorField, n: usize) -> Q {
    let g = Series::from_monomials(2, n, |e| {
        if e[0] == 2 {
            Q::new(1.into(), 2.into())
        } else {
            Q::from_integer(0.into())
        }
    });
    let x = Series::var(2, n, 0);
    let y = Series::var(2, n, 1);
    let vars = |v: Var| match v {
        Var::X => x.clone(),
        Var::Y => y.clone(),
        Var::U(0, 0) => g.clone(),
        _ => Series::zero(2, n),
    };
    let xi = poly_on_series(&field.xi, &vars, 2, n);
    let eta = poly_on_series(&field.eta, &vars, 2, n);
    let phi = poly_on_series(&field.phi, &vars, 2, n);
    let gx = g.partial(0).with_order(n);
    let gy = g.partial(1).with_order(n);
    let q = phi
        .sub(&xi.mul(&gx).expect("same shape"))
        .and_then(|s| s.sub(&eta.mul(&gy).expect("same shape")))
        .expect("same shape");
    let mut worst = Q::from_integer(0.into());
    for (e, c) in q.terms() {
        if e[0] + e[1] < n {
            let a = if *c < Q::from_integer(0.into()) { -c.clone() } else { c.clone() };
            if a > worst {
                worst = a;
            }
        }
    }
    worst
}

/// A homogeneity obstruction: on a homogeneous surface all invariant
/// derivatives vanish, yet the recurrence gives `D2 I = factor · I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityObstruction {
    pub branch: String,
    pub invariant: String,
    /// Exact `D2 I / I` from the Cramér recurrence.
    pub factor: String,
}

/// `D2 W = 2W` (generic) and `D2 X = 3X` (cone) from the recurrences with
/// rational invariant values: constant nonzero `W` or `X` is impossible.
pub fn homogeneity_obstructions() -> Result<Vec<HomogeneityObstruction>, RecurrenceError> {
    let qi = |n: i64| Q::from_integer(n.into());
    let mut out = Vec::new();
    for (branch, name, (j, k), val) in [
        (SurfaceBranch::Generic, "W", (3, 1), qi(5)),
        (SurfaceBranch::Cone, "X", (5, 0), qi(7)),
    ] {
        let inv = surface_normal_jet(branch, 8, |a, b| if (a, b) == (j, k) { val.clone() } else { qi((a + 2 * b) as i64 % 3) })?;
        let mc = mc_from_invariants(branch, &inv)?;
        let d2 = predicted_derivative(&mc, 2, j, k, &inv);
        out.push(HomogeneityObstruction {
            branch: branch_label(branch).into(),
            invariant: name.into(),
            factor: crate::scalar::format_rational(&(d2 / val)),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_curve_jet, random_parabolic_jet, rng};
    use crate::scalar::{q, rel_diff};

    fn qi(n: i64) -> Q {
        Q::from_integer(n.into())
    }

    #[test]
    fn generated_matrices_match_printed_fixtures() {
        // generic: W, M free; rows (2,0),(1,1),(3,0),(2,1),(4,0),(4,1)
        let (w, m) = (q(5, 7), q(-3, 2));
        let inv = surface_normal_jet(SurfaceBranch::Generic, 7, |j, k| match (j, k) {
            (3, 1) => w.clone(),
            (5, 0) => m.clone(),
            _ => q(1, 3),
        })
        .unwrap();
        let mc = mc_from_invariants(SurfaceBranch::Generic, &inv).unwrap();
        let i = |n: i64| qi(n);
        let printed = vec![
            vec![i(-3), i(-1), i(0), i(0), i(0), i(0)],
            vec![i(0), i(0), i(-1), i(0), i(0), i(0)],
            vec![i(0), i(0), i(0), i(-3), i(-3), i(0)],
            vec![i(-3), i(-2), i(0), i(0), i(0), i(0)],
            vec![i(0), i(0), i(0), i(0), -i(4) * w.clone(), i(-6)],
            vec![i(0), i(0), -m.clone(), -i(10) * w.clone(), -i(24) * w.clone(), i(-18)],
        ];
        assert_eq!(mc.matrix, printed);
        assert_eq!(mc.rhs[0][..5], [i(0), i(1), i(0), w.clone(), m.clone()]);
        assert_eq!(mc.rhs[1][..5], [i(1), i(0), w.clone(), i(2), i(0)]);
        assert_eq!(mc.rhs[1][5], i(6) * w.clone() * w.clone());

        let x = q(4, 3);
        let inv = surface_normal_jet(SurfaceBranch::Cone, 8, |j, k| if (j, k) == (5, 0) { x.clone() } else { q(2, 5) }).unwrap();
        let mc = mc_from_invariants(SurfaceBranch::Cone, &inv).unwrap();
        let printed = vec![
            vec![i(-3), i(-1), i(0), i(0), i(0), i(0)],
            vec![i(0), i(0), i(-1), i(0), i(0), i(0)],
            vec![i(0), i(0), i(0), i(-3), i(-3), i(0)],
            vec![i(-3), i(-2), i(0), i(0), i(0), i(0)],
            vec![i(0), i(0), i(0), i(0), i(0), i(-6)],
            vec![i(0), i(0), i(0), -i(21) * x.clone(), -i(24) * x.clone(), i(0)],
        ];
        assert_eq!(mc.matrix, printed);
        assert_eq!(mc.rhs[1], vec![i(1), i(0), i(0), i(2), i(0), i(0)]);
    }

    #[test]
    fn exact_cramer_solutions_equal_closed_forms() {
        for (w, m, i51) in [(q(2, 3), qi(5), qi(7)), (q(-1, 2), q(3, 4), q(-2, 9)), (qi(3), qi(0), qi(0))] {
            let inv = surface_normal_jet(SurfaceBranch::Generic, 7, |j, k| match (j, k) {
                (3, 1) => w.clone(),
                (5, 0) => m.clone(),
                (5, 1) => i51.clone(),
                _ => q(1, 5),
            })
            .unwrap();
            let mc = mc_from_invariants(SurfaceBranch::Generic, &inv).unwrap();
            let cf = closed_form_mc(SurfaceBranch::Generic, &inv).unwrap();
            assert_eq!(mc.k1(), &cf[0][..]);
            assert_eq!(mc.k2(), &cf[1][..]);
            assert_eq!(mc.k2()[5], q(-8, 9) * w.clone() * w.clone());
            assert_eq!(mc.residual(), 0.0);
            if m == qi(0) {
                assert_eq!(mc.k1()[3], qi(0));
            }
        }
        let (x, y) = (q(-5, 2), q(7, 3));
        let inv = surface_normal_jet(SurfaceBranch::Cone, 8, |j, k| match (j, k) {
            (5, 0) => x.clone(),
            (7, 0) => y.clone(),
            _ => q(1, 4),
        })
        .unwrap();
        let mc = mc_from_invariants(SurfaceBranch::Cone, &inv).unwrap();
        let cf = closed_form_mc(SurfaceBranch::Cone, &inv).unwrap();
        assert_eq!(mc.k1(), &cf[0][..]);
        assert_eq!(mc.k2(), &cf[1][..]);
        assert_eq!(mc.k1()[5], x / qi(6));
    }

    #[test]
    fn normalized_jets_carry_the_phantom_values() {
        for (branch, n, seed) in [(SurfaceBranch::Generic, 8, 21), (SurfaceBranch::Cone, 9, 22)] {
            let p = random_parabolic_jet(&mut rng(seed), n, branch);
            let r = normalize_parabolic_surface(&p.realize(n).unwrap(), &NormalizeOptions::default()).unwrap();
            let inv = invariantized_jet(branch, &p).unwrap();
            let scale = 1.0 + r.series.max_abs();
            for d in 0..=n {
                for k in 0..=d {
                    let (a, b) = (inv.u(d - k, k), r.coeff(d - k, k));
                    assert!((a - b).abs() < 1e-8 * (scale + b.abs()), "{branch:?} ({}, {k}): {a} vs {b}", d - k);
                }
            }
        }
    }

    #[test]
    fn closed_form_derivations_match_the_frame() {
        let mut r = rng(5);
        for _ in 0..10 {
            let p = random_parabolic_jet(&mut r, 6, SurfaceBranch::Generic).fill(6).unwrap();
            let cf = invariant_derivatives(&p).unwrap();
            let fr = frame_derivatives(&p, SurfaceBranch::Generic).unwrap();
            for (a, b) in [(cf.alpha, fr.alpha), (cf.beta, fr.beta), (cf.gamma, fr.gamma), (cf.delta, fr.delta)] {
                assert!(rel_diff(a, b) < 1e-9, "{a} vs {b}");
            }
            let expect = p.u(2, 0) / a_factor(&p).cbrt().powi(2);
            assert!(rel_diff(cf.det(), expect) < 1e-9);
        }
    }

    #[test]
    fn d2_w_is_twice_w() {
        let p = random_parabolic_jet(&mut rng(8), 6, SurfaceBranch::Generic);
        let w = SurfaceInvariant::W.at(&p).unwrap();
        let d2w = apply_d(2, SurfaceInvariant::W, &p).unwrap();
        assert!(rel_diff(d2w, 2.0 * w) < 1e-9, "{d2w} vs {w}");
    }

    #[test]
    fn generic_recurrences_hold() {
        let mut r = rng(7);
        for _ in 0..3 {
            let p = random_parabolic_jet(&mut r, 8, SurfaceBranch::Generic);
            let rep = verify_recurrences(SurfaceBranch::Generic, &p, 1e-6).unwrap();
            assert!(rep.all_pass(), "{:#?}", rep.failures());
        }
    }

    #[test]
    fn cone_recurrences_hold() {
        let mut r = rng(9);
        for _ in 0..3 {
            let p = random_parabolic_jet(&mut r, 9, SurfaceBranch::Cone);
            let rep = verify_recurrences(SurfaceBranch::Cone, &p, 1e-6).unwrap();
            assert!(rep.all_pass(), "{:#?}", rep.failures());
        }
    }

    #[test]
    fn curve_mc_examples() {
        let p = q(3, 7);
        let inv = vec![qi(0), qi(0), qi(1), qi(0), p.clone(), qi(2)];
        let mc = mc_curve_from_invariants(CurveGroup::Sa2, &inv).unwrap();
        assert_eq!(mc.k[0], vec![qi(0), p / qi(3), qi(-1)]);
        let inv0 = vec![qi(0), qi(0), qi(1), qi(0), qi(0), qi(2)];
        assert_eq!(mc_curve_from_invariants(CurveGroup::Sa2, &inv0).unwrap().k[0], vec![qi(0), qi(0), qi(-1)]);
        for e in [1, -1] {
            let a = q(5, 2);
            let inv = vec![qi(0), qi(0), qi(1), qi(0), qi(e), a.clone(), qi(1)];
            let mc = mc_curve_from_invariants(CurveGroup::Gl2, &inv).unwrap();
            assert_eq!(mc.k[0], closed_form_mc_curve(CurveGroup::Gl2, &inv));
            assert_eq!(mc.k[0][3], qi(-1));
            let printed = vec![
                vec![qi(0), qi(0), qi(0), qi(1)],
                vec![qi(-2), qi(1), qi(0), qi(0)],
                vec![qi(0), qi(0), qi(-3), qi(0)],
                vec![qi(-4 * e), qi(e), qi(0), qi(0)],
            ];
            assert_eq!(mc.matrix, printed);
        }
    }

    #[test]
    fn curve_recurrences_hold() {
        let mut r = rng(13);
        for _ in 0..5 {
            let u = random_curve_jet(&mut r, 9, None);
            let rep = verify_curve_recurrences(CurveGroup::Sa2, &u, 1e-6).unwrap();
            assert!(rep.all_pass(), "{:#?}", rep.failures());
        }
        for s in [1.0, -1.0] {
            for _ in 0..5 {
                let u = random_curve_jet(&mut r, 9, Some(s));
                let rep = verify_curve_recurrences(CurveGroup::Gl2, &u, 1e-6).unwrap();
                assert!(rep.all_pass(), "{:#?}", rep.failures());
            }
        }
    }

    #[test]
    fn parabola_has_vanishing_sa2_invariants() {
        let u = vec![0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let i6 = curve_eval(&CurveInvariantized { group: CurveGroup::Sa2, k: 6 }, &u).unwrap();
        assert_eq!(i6, 0.0);
    }

    #[test]
    fn homogeneous_curve_series() {
        for (sign, e) in [(Sign::Plus, 1), (Sign::Minus, -1)] {
            let a = qi(1);
            let c = homogeneous_curve_coefficients(sign, a.clone(), 12).unwrap();
            assert_eq!(c[6], qi(5) + q(3 * e, 2));
            assert_eq!(c[7], qi(3) + qi(17 * e));
            let l = homogeneous_tangent_field(sign, &a);
            assert!(curve_tangency_residual(&l, &c).iter().all(|r| *r == qi(0)));
            let a = q(-2, 3);
            let c = homogeneous_curve_coefficients(sign, a.clone(), 10).unwrap();
            assert_eq!(c[6], qi(5) + q(3 * e, 2) * a.clone() * a.clone());
            let l = homogeneous_tangent_field(sign, &a);
            assert!(curve_tangency_residual(&l, &c).iter().all(|r| *r == qi(0)));
        }
        let plus = homogeneous_curve_coefficients(Sign::Plus, 1.0, 7).unwrap();
        assert_eq!((plus[6], plus[7]), (6.5, 20.0));
    }

    #[test]
    fn cone_model_symmetries() {
        assert!(cone_bracket_table().iter().all(|(_, ok)| *ok));
        for e in cone_fields() {
            assert_eq!(cone_tangency_residual(&e, 9), qi(0), "{}", e.name);
        }
        let obs = homogeneity_obstructions().unwrap();
        assert_eq!(obs[0].factor, "2");
        assert_eq!(obs[1].factor, "3");
    }
}
