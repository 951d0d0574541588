//! Seeded verification suites shared by the command line and the acceptance
//! tests. Each suite samples jets or families, checks named identities and
//! keeps, per identity, the worst residual together with the sample behind it.

use crate::classify::{classify, realize_graph, sample_grid, tangential_witness, DevelopableKind, SurfaceFamily};
use crate::invariants::{
    curve_c, curve_f, euclid_curvature, eval_m, eval_w, eval_w_cubed, eval_x, eval_y, hessian_congruence,
    relative_invariance_check, Sign, TransferInvariant,
};
use crate::jetpoly::parse_poly;
use crate::jets::{jets_of_series, ParabolicJet};
use crate::normalize::{normalize_curve_sl2, normalize_jet, sa2_moving_frame, sa2_v4, NormalBranch, NormalizeOptions};
use crate::prolong::{orbit_rank, tangency_quotients};
use crate::recurrence::{
    cone_bracket_table, cone_fields, cone_tangency_residual, curve_tangency_residual, homogeneous_curve_coefficients,
    homogeneous_tangent_field, verify_curve_recurrences, verify_recurrences, CurveGroup, RecurrenceReport,
};
use crate::sampling::{
    impose_cone, random_curve_jet, random_parabolic_jet, random_rational_jet, rng, SurfaceBranch,
};
use crate::scalar::{format_f64, format_rational, q, qi, rel_diff, Scalar, DD, Q};
use crate::series::{solve_implicit, AffineTransform3, Series};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Display;

/// Branch selector of the recurrence suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecurrenceBranch {
    Generic,
    Cone,
    CurveSa2,
    CurveGl2,
}

impl RecurrenceBranch {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "generic" => Self::Generic,
            "cone" => Self::Cone,
            "curve-sa2" => Self::CurveSa2,
            "curve-gl2" => Self::CurveGl2,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Generic => "generic",
            Self::Cone => "cone",
            Self::CurveSa2 => "curve-sa2",
            Self::CurveGl2 => "curve-gl2",
        }
    }
}

/// A verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Normalization readings against the closed-form invariants.
    Oracle(SurfaceBranch),
    Recurrence(RecurrenceBranch),
    /// Exact prolongation algebra: tangency quotients and orbit determinants.
    Prolongation,
    /// Transfer laws of `H`, `S`, the Hessian and the absolute invariants.
    Transfer,
    /// Developable families through `realize_graph` and `classify`.
    Classification,
    /// Curve normal forms, conics, parabolas and the moving frame.
    Curves,
    /// Homogeneous curve and cone models, Euclidean curvature.
    Homogeneous,
}

pub const SUITE_NAMES: [&str; 7] = ["oracle", "recurrence", "prolongation", "transfer", "classification", "curves", "homogeneous"];

impl Suite {
    /// Suite by name; `branch` selects the oracle (`generic|cone`) or
    /// recurrence branch and defaults to `generic`.
    pub fn parse(name: &str, branch: Option<&str>) -> Result<Self, String> {
        let b = branch.unwrap_or("generic");
        let bad_branch = || format!("suite {name} has no branch {b:?}");
        let no_branch = || -> Result<(), String> {
            match branch {
                Some(b) => Err(format!("suite {name} takes no branch (got {b:?})")),
                None => Ok(()),
            }
        };
        Ok(match name {
            "oracle" => Suite::Oracle(match b {
                "generic" => SurfaceBranch::Generic,
                "cone" => SurfaceBranch::Cone,
                _ => return Err(bad_branch()),
            }),
            "recurrence" => Suite::Recurrence(RecurrenceBranch::parse(b).ok_or_else(bad_branch)?),
            "prolongation" => no_branch().map(|_| Suite::Prolongation)?,
            "transfer" => no_branch().map(|_| Suite::Transfer)?,
            "classification" => no_branch().map(|_| Suite::Classification)?,
            "curves" => no_branch().map(|_| Suite::Curves)?,
            "homogeneous" => no_branch().map(|_| Suite::Homogeneous)?,
            _ => return Err(format!("unknown suite {name:?} (expected one of {})", SUITE_NAMES.join(", "))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Oracle(_) => "oracle",
            Suite::Recurrence(_) => "recurrence",
            Suite::Prolongation => "prolongation",
            Suite::Transfer => "transfer",
            Suite::Classification => "classification",
            Suite::Curves => "curves",
            Suite::Homogeneous => "homogeneous",
        }
    }

    pub fn branch_label(self) -> Option<&'static str> {
        match self {
            Suite::Oracle(SurfaceBranch::Generic) => Some("generic"),
            Suite::Oracle(SurfaceBranch::Cone) => Some("cone"),
            Suite::Recurrence(b) => Some(b.label()),
            _ => None,
        }
    }

    /// Sample count used when none is requested.
    pub fn default_samples(self) -> usize {
        match self {
            Suite::Oracle(_) | Suite::Recurrence(RecurrenceBranch::Generic) => 100,
            Suite::Recurrence(_) | Suite::Classification | Suite::Curves => 50,
            Suite::Prolongation | Suite::Transfer => 20,
            Suite::Homogeneous => 10,
        }
    }
}

/// Aggregate of one identity over all samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    /// Exact checks pass only on exact equality (residual 0).
    pub exact: bool,
    pub threshold: f64,
    pub samples: usize,
    pub failures: usize,
    pub worst_residual: f64,
    pub worst_sample: Option<usize>,
    /// The sample behind `worst_residual`, coordinate by coordinate.
    pub worst_jet: Option<Vec<String>>,
    pub pass: bool,
}

/// A sample whose evaluation failed outright.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleError {
    pub sample: usize,
    pub message: String,
    pub jet: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub branch: Option<String>,
    pub seed: u64,
    pub samples: usize,
    /// Uniform threshold override for the floating checks, if any.
    pub tol: Option<f64>,
    pub pass: bool,
    pub checks: Vec<SuiteCheck>,
    pub errors: Vec<SampleError>,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&SuiteCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SuiteCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// One line per failing identity and per errored sample.
    pub fn failure_summary(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .failures()
            .map(|c| {
                format!(
                    "{}: {} of {} failed, worst residual {} (threshold {}) at sample {:?} jet [{}]",
                    c.name,
                    c.failures,
                    c.samples,
                    format_f64(c.worst_residual),
                    format_f64(c.threshold),
                    c.worst_sample,
                    c.worst_jet.as_deref().unwrap_or_default().join(", ")
                )
            })
            .collect();
        out.extend(self.errors.iter().map(|e| format!("sample {}: {} [{}]", e.sample, e.message, e.jet.join(", "))));
        out
    }
}

struct Tally {
    tol: Option<f64>,
    checks: Vec<SuiteCheck>,
    errors: Vec<SampleError>,
}

impl Tally {
    fn new(tol: Option<f64>) -> Self {
        Tally { tol, checks: Vec::new(), errors: Vec::new() }
    }

    fn entry(&mut self, name: &str, exact: bool, threshold: f64) -> &mut SuiteCheck {
        let idx = match self.checks.iter().position(|c| c.name == name) {
            Some(i) => i,
            None => {
                self.checks.push(SuiteCheck {
                    name: name.to_string(),
                    exact,
                    threshold,
                    samples: 0,
                    failures: 0,
                    worst_residual: 0.0,
                    worst_sample: None,
                    worst_jet: None,
                    pass: true,
                });
                self.checks.len() - 1
            }
        };
        &mut self.checks[idx]
    }

    fn push(&mut self, name: &str, exact: bool, residual: f64, threshold: f64, sample: usize, jet: &dyn Fn() -> Vec<String>) {
        let c = self.entry(name, exact, threshold);
        // NaN counts as the worst possible residual
        let r = if residual.is_nan() { f64::INFINITY } else { residual.abs() };
        c.samples += 1;
        let ok = if exact { r == 0.0 } else { r <= threshold };
        if !ok {
            c.failures += 1;
            c.pass = false;
        }
        if c.worst_sample.is_none() || r > c.worst_residual {
            c.worst_residual = r;
            c.worst_sample = Some(sample);
            c.worst_jet = Some(jet());
        }
    }

    /// Floating check against its default threshold (or the override).
    fn float(&mut self, name: &str, residual: f64, default: f64, sample: usize, jet: &dyn Fn() -> Vec<String>) {
        let t = self.tol.unwrap_or(default);
        self.push(name, false, residual, t, sample, jet);
    }

    /// Exact check: `ok` must hold; the residual is 0 or the given magnitude.
    fn exact(&mut self, name: &str, ok: bool, magnitude: f64, sample: usize, jet: &dyn Fn() -> Vec<String>) {
        let r = if ok { 0.0 } else { magnitude.abs().max(f64::MIN_POSITIVE) };
        self.push(name, true, r, 0.0, sample, jet);
    }

    fn error(&mut self, sample: usize, message: impl Display, jet: Vec<String>) {
        self.errors.push(SampleError { sample, message: message.to_string(), jet });
    }

    fn finish(self, suite: Suite, seed: u64, samples: usize) -> SuiteReport {
        let pass = self.errors.is_empty() && !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
        SuiteReport {
            suite: suite.name().to_string(),
            branch: suite.branch_label().map(str::to_string),
            seed,
            samples,
            tol: self.tol,
            pass,
            checks: self.checks,
            errors: self.errors,
        }
    }
}

fn msg(e: impl Display) -> String {
    e.to_string()
}

fn parabolic_jet_strings<S: Scalar>(p: &ParabolicJet<S>, fmt: impl Fn(&S) -> String) -> Vec<String> {
    ParabolicJet::<S>::coord_vars(p.order()).iter().zip(p.coords()).map(|(v, c)| format!("{v}={}", fmt(&c))).collect()
}

fn float_jet(p: &ParabolicJet<f64>) -> Vec<String> {
    parabolic_jet_strings(p, |v| format_f64(*v))
}

fn rational_jet(p: &ParabolicJet<Q>) -> Vec<String> {
    parabolic_jet_strings(p, format_rational)
}

fn curve_jet_strings(u: &[f64]) -> Vec<String> {
    u.iter().enumerate().map(|(k, v)| format!("u{k}={}", format_f64(*v))).collect()
}

fn labelled(names: &[&str], vals: &[String]) -> Vec<String> {
    names.iter().zip(vals).map(|(n, v)| format!("{n}={v}")).collect()
}

/// Run `suite` with `samples` seeded samples. `tol` replaces every default
/// floating threshold when given; exact checks stay exact.
pub fn run_suite(suite: Suite, samples: usize, seed: u64, tol: Option<f64>) -> SuiteReport {
    let mut t = Tally::new(tol);
    let mut r = rng(seed);
    match suite {
        Suite::Oracle(b) => oracle(&mut t, &mut r, b, samples),
        Suite::Recurrence(b) => recurrence(&mut t, &mut r, b, samples),
        Suite::Prolongation => prolongation(&mut t, &mut r, samples),
        Suite::Transfer => transfer(&mut t, &mut r, samples),
        Suite::Classification => classification(&mut t, &mut r, samples),
        Suite::Curves => curves(&mut t, &mut r, samples),
        Suite::Homogeneous => homogeneous(&mut t, &mut r, samples),
    }
    t.finish(suite, seed, samples)
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

const ORACLE_ORDER: usize = 8;

/// Lifts a sampled jet to double-double, re-solving the cone condition there
/// so that the jet lies on the branch to the working precision. The cone
/// branch of the pipeline amplifies roundoff by about 1e9, which a double
/// cannot absorb at the 1e-8 oracle threshold.
fn lift_jet(p: &ParabolicJet<f64>, branch: SurfaceBranch) -> Result<ParabolicJet<DD>, String> {
    let mut pd = p.map(|v| DD::from_f64(*v));
    if branch == SurfaceBranch::Cone {
        impose_cone(&mut pd).map_err(msg)?;
    }
    Ok(pd)
}

fn oracle(t: &mut Tally, r: &mut ChaCha8Rng, branch: SurfaceBranch, samples: usize) {
    let opts = NormalizeOptions::default();
    for i in 0..samples {
        let p = random_parabolic_jet(r, ORACLE_ORDER, branch);
        let jet = || float_jet(&p);
        let run = |t: &mut Tally| -> Result<(), String> {
            let pd = lift_jet(&p, branch)?;
            let res = normalize_jet(&pd, ORACLE_ORDER, &opts).map_err(msg)?;
            let full = pd.fill(ORACLE_ORDER).map_err(msg)?;
            let want = match branch {
                SurfaceBranch::Generic => NormalBranch::Generic,
                SurfaceBranch::Cone => NormalBranch::Cone,
            };
            t.exact("normalization branch", res.branch == want, 1.0, i, &jet);
            let pairs = match branch {
                SurfaceBranch::Generic => [
                    ("G31 = W", res.coeff(3, 1), eval_w(&full).map_err(msg)?),
                    ("G50 = M", res.coeff(5, 0), eval_m(&full).map_err(msg)?),
                ],
                SurfaceBranch::Cone => [
                    ("G50 = X", res.coeff(5, 0), eval_x(&full).map_err(msg)?),
                    ("G70 = Y", res.coeff(7, 0), eval_y(&full).map_err(msg)?),
                ],
            };
            for (name, got, want) in pairs {
                let scale = 1f64.max(got.to_f64().abs()).max(want.to_f64().abs());
                t.float(name, (got - want).to_f64().abs() / scale, 1e-8, i, &jet);
            }
            Ok(())
        };
        if let Err(e) = run(t) {
            t.error(i, e, jet());
        }
    }
}

// ---------------------------------------------------------------------------
// Recurrences
// ---------------------------------------------------------------------------

/// Default threshold of a recurrence identity: the first-derivative laws of
/// `W` at 1e-7, everything built from second invariant derivatives at 1e-5,
/// the derivation determinant at 1e-10, the rest at 1e-6.
pub fn recurrence_threshold(name: &str) -> f64 {
    if name == "D1 W = -2/3 W^2" || name == "D2 W = 2 W" {
        1e-7
    } else if name.starts_with("[D1,D2]") {
        1e-5
    } else if name.starts_with("alpha delta - beta gamma") {
        1e-10
    } else if name == "Cramér residual" {
        1e-9
    } else {
        1e-6
    }
}

fn record_report(t: &mut Tally, rep: &RecurrenceReport, i: usize, jet: &dyn Fn() -> Vec<String>) {
    for c in &rep.checks {
        t.float(&c.name, c.residual, recurrence_threshold(&c.name), i, jet);
    }
}

fn recurrence(t: &mut Tally, r: &mut ChaCha8Rng, branch: RecurrenceBranch, samples: usize) {
    for i in 0..samples {
        match branch {
            RecurrenceBranch::Generic | RecurrenceBranch::Cone => {
                let (b, n) = match branch {
                    RecurrenceBranch::Generic => (SurfaceBranch::Generic, 8),
                    _ => (SurfaceBranch::Cone, 9),
                };
                let p = random_parabolic_jet(r, n, b);
                let jet = || float_jet(&p);
                match verify_recurrences(b, &p, 1.0) {
                    Ok(rep) => record_report(t, &rep, i, &jet),
                    Err(e) => t.error(i, e, jet()),
                }
            }
            RecurrenceBranch::CurveSa2 | RecurrenceBranch::CurveGl2 => {
                let (g, sign) = match branch {
                    RecurrenceBranch::CurveSa2 => (CurveGroup::Sa2, None),
                    _ => (CurveGroup::Gl2, Some(if i % 2 == 0 { 1.0 } else { -1.0 })),
                };
                let u = random_curve_jet(r, 9, sign);
                let jet = || curve_jet_strings(&u);
                match verify_curve_recurrences(g, &u, 1.0) {
                    Ok(rep) => record_report(t, &rep, i, &jet),
                    Err(e) => t.error(i, e, jet()),
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Prolongation
// ---------------------------------------------------------------------------

pub const TANGENCY_QUOTIENTS: [&str; 6] = ["-4", "-4", "0", "-4*u10", "0", "-4*u01"];

fn prolongation(t: &mut Tally, r: &mut ChaCha8Rng, samples: usize) {
    let none = Vec::new;
    match tangency_quotients() {
        Ok(qs) => {
            let ok = qs.len() == TANGENCY_QUOTIENTS.len()
                && qs.iter().zip(TANGENCY_QUOTIENTS).all(|(got, want)| *got == parse_poly(want));
            t.exact("tangency quotients = (-4, -4, 0, -4 u10, 0, -4 u01)", ok, 1.0, 0, &none);
        }
        Err(e) => t.error(0, e, none()),
    }
    for i in 0..samples {
        let p = random_rational_jet(r, 4, SurfaceBranch::Generic);
        let jet = || rational_jet(&p);
        let run = |t: &mut Tally| -> Result<(), String> {
            let r2 = orbit_rank(2, &p, true).map_err(msg)?;
            let u20 = p.get(2, 0);
            let d2 = r2.key_det_exact.clone().ok_or("order-2 determinant missing")?;
            let diff = (d2.clone() - u20.clone() * u20).to_f64();
            t.exact("order-2 determinant = u20^2", diff == 0.0 && d2 == p.get(2, 0) * p.get(2, 0), diff, i, &jet);
            t.exact("order-2 orbit rank = 7", r2.rank == 7, r2.rank as f64 - 7.0, i, &jet);
            let r4 = orbit_rank(4, &p, true).map_err(msg)?;
            let d4 = r4.key_det_exact.clone().ok_or("order-4 determinant missing")?;
            t.exact("order-4 determinant = 0", d4 == qi(0), d4.to_f64(), i, &jet);
            let br = r4.block_rank.unwrap_or(0);
            t.exact("order-4 block rank = 5", br == 5, br as f64 - 5.0, i, &jet);
            Ok(())
        };
        if let Err(e) = run(t) {
            t.error(i, e, jet());
        }
    }
}

// ---------------------------------------------------------------------------
// Transfer laws
// ---------------------------------------------------------------------------

fn rational_transform(r: &mut ChaCha8Rng, f: &Series<Q>) -> AffineTransform3<Q> {
    let mut m: [[Q; 3]; 3] =
        std::array::from_fn(|i| std::array::from_fn(|j| q(r.gen_range(-2..=2), 8) + if i == j { qi(1) } else { qi(0) }));
    m[2][2] = m[2][2].clone() + qi(1);
    let (d, n) = (q(r.gen_range(-2..=2), 10), q(r.gen_range(-2..=2), 10));
    let s0 = f.eval(&[d.clone(), n.clone()]);
    AffineTransform3::linear(m).with_translation([d, n, s0])
}

/// Near-identity element of the special affine group keeping the graph
/// through the origin.
fn near_identity(r: &mut ChaCha8Rng, f: &Series<f64>) -> AffineTransform3<f64> {
    let m: [[f64; 3]; 3] =
        std::array::from_fn(|i| std::array::from_fn(|j| r.gen_range(-0.1..0.1) + if i == j { 1.0 } else { 0.0 }));
    let k = 1.0 / AffineTransform3::linear(m).delta().cbrt();
    AffineTransform3::linear(m.map(|row| row.map(|v| v * k))).with_translation([0.0, 0.0, f.mono(&[0, 0])])
}

fn transform_strings<S: Scalar>(tr: &AffineTransform3<S>, fmt: impl Fn(&S) -> String) -> Vec<String> {
    let m = tr.matrix();
    let mut v: Vec<String> = (0..9).map(|i| format!("m{}{}={}", i / 3, i % 3, fmt(&m[i / 3][i % 3]))).collect();
    v.extend(tr.translation().iter().enumerate().map(|(i, c)| format!("t{i}={}", fmt(c))));
    v
}

fn series_strings<S: Scalar>(f: &Series<S>, fmt: impl Fn(&S) -> String) -> Vec<String> {
    f.terms().map(|(e, c)| format!("F{}={}", e.iter().map(|k| k.to_string()).collect::<String>(), fmt(c))).collect()
}

fn transfer(t: &mut Tally, r: &mut ChaCha8Rng, samples: usize) {
    for i in 0..samples {
        // exact laws on rational data
        let f = Series::from_derivatives2(4, |_, _| q(r.gen_range(-5..=5), r.gen_range(1..=3)));
        let tr = rational_transform(r, &f);
        let jet = || {
            let mut v = series_strings(&f, format_rational);
            v.extend(transform_strings(&tr, format_rational));
            v
        };
        match relative_invariance_check(TransferInvariant::H, &f, &tr, 0.0) {
            Ok(rep) => t.exact("H_G = delta^2 / Lambda^4 H_F", rep.pass, rep.residual, i, &jet),
            Err(e) => t.error(i, e, jet()),
        }
        match hessian_congruence(&f, &tr) {
            Ok(res) => {
                let worst = res.iter().flatten().map(|v| v.abs_f64()).fold(0.0, f64::max);
                t.exact("J Hess(G) J^t = delta / Lambda Hess(F)", res.iter().flatten().all(|v| v.is_zero()), worst, i, &jet)
            }
            Err(e) => t.error(i, e, jet()),
        }
        // floating laws
        let checks: [(SurfaceBranch, usize, &[TransferInvariant], &str, f64); 3] = [
            (SurfaceBranch::Generic, 6, &[TransferInvariant::S], "S_G = F_xx / Upsilon S_F", 1e-9),
            (SurfaceBranch::Generic, 7, &[TransferInvariant::W, TransferInvariant::M], "", 1e-7),
            (SurfaceBranch::Cone, 8, &[TransferInvariant::X, TransferInvariant::Y], "", 1e-7),
        ];
        for (branch, n, names, label, thr) in checks {
            let p = random_parabolic_jet(r, n, branch);
            let f = match p.realize(n) {
                Ok(f) => f,
                Err(e) => {
                    t.error(i, e, float_jet(&p));
                    continue;
                }
            };
            let tr = near_identity(r, &f);
            let jet = || {
                let mut v = float_jet(&p);
                v.extend(transform_strings(&tr, |x| format_f64(*x)));
                v
            };
            for &name in names {
                let check = if label.is_empty() { format!("{} unchanged", invariant_name(name)) } else { label.to_string() };
                match relative_invariance_check(name, &f, &tr, thr) {
                    Ok(rep) => t.float(&check, rep.residual, thr, i, &jet),
                    Err(e) => t.error(i, e, jet()),
                }
            }
        }
    }
}

fn invariant_name(name: TransferInvariant) -> &'static str {
    match name {
        TransferInvariant::H => "H",
        TransferInvariant::S => "S",
        TransferInvariant::W => "W",
        TransferInvariant::X => "X",
        TransferInvariant::Y => "Y",
        TransferInvariant::M => "M",
        TransferInvariant::Pick => "Pick",
    }
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

const FAMILY_ORDER: usize = 9;

fn random_derivatives(r: &mut ChaCha8Rng, n: usize) -> Vec<Q> {
    let mut d = vec![qi(0), qi(0)];
    d.extend((2..=n).map(|_| q(r.gen_range(-4..=4), r.gen_range(1..=3))));
    d
}

fn derivs(d: &[Q]) -> Series<Q> {
    Series::from_derivatives1(d.len() - 1, |k| d[k].clone())
}

/// The cone `u = x^2 / (2 (1 - y))` as an exact series.
pub fn model_cone(order: usize) -> Series<Q> {
    Series::from_monomials(2, order, |e| if e[0] == 2 { q(1, 2) } else { qi(0) })
}

fn classification(t: &mut Tally, r: &mut ChaCha8Rng, samples: usize) {
    let none = Vec::new;
    let cone = jets_of_series(&model_cone(7));
    match (eval_w(&cone), eval_x(&cone)) {
        (Ok(w), Ok(x)) => {
            t.exact("u = x^2/(2(1-y)): W = 0", w.is_zero(), w.to_f64(), 0, &none);
            t.exact("u = x^2/(2(1-y)): X = 0", x.is_zero(), x.to_f64(), 0, &none);
        }
        (Err(e), _) | (_, Err(e)) => t.error(0, e, none()),
    }
    let tol = 1e-9;
    for (k, kind) in [DevelopableKind::Cylinder, DevelopableKind::Cone, DevelopableKind::Tangential].into_iter().enumerate() {
        let name = format!("{} round trip", kind.label());
        let mut i = 0;
        while i < samples {
            let sample = k * samples + i;
            let (fam, params) = match kind {
                DevelopableKind::Cylinder | DevelopableKind::Cone => {
                    let d = random_derivatives(r, FAMILY_ORDER);
                    if d[2].is_zero() {
                        continue;
                    }
                    let params: Vec<String> = d.iter().enumerate().map(|(j, v)| format!("c{j}={}", format_rational(v))).collect();
                    let s = derivs(&d);
                    let fam = if kind == DevelopableKind::Cylinder {
                        SurfaceFamily::Cylinder { profile: s }
                    } else {
                        SurfaceFamily::Cone { directrix_c: s }
                    };
                    (fam, params)
                }
                DevelopableKind::Tangential => {
                    let a = random_derivatives(r, FAMILY_ORDER + 1);
                    let c = random_derivatives(r, FAMILY_ORDER + 1);
                    let (sa, sc) = (derivs(&a), derivs(&c));
                    if a[2].is_zero() || tangential_witness(&sa, &sc).is_zero() {
                        continue;
                    }
                    let mut params: Vec<String> = a.iter().enumerate().map(|(j, v)| format!("a{j}={}", format_rational(v))).collect();
                    params.extend(c.iter().enumerate().map(|(j, v)| format!("c{j}={}", format_rational(v))));
                    (SurfaceFamily::Tangential { a: sa, c: sc }, params)
                }
            };
            i += 1;
            let jet = || params.clone();
            let f = match realize_graph(&fam, FAMILY_ORDER) {
                Ok(f) => f,
                Err(e) => {
                    t.error(sample, e, params.clone());
                    continue;
                }
            };
            let ff = f.to_f64();
            match classify(&ff, &sample_grid(&ff, tol), tol) {
                Ok(c) => t.exact(&name, c.kind == Some(kind), 1.0, sample, &jet),
                Err(e) => {
                    t.exact(&name, false, 1.0, sample, &jet);
                    t.error(sample, e, params.clone());
                }
            }
            if let SurfaceFamily::Tangential { a, c } = &fam {
                let want = qi(1) / tangential_witness(a, c);
                match eval_w_cubed(&jets_of_series(&f)) {
                    Ok(w3) => {
                        let diff = (w3.clone() - want.clone()).to_f64();
                        t.exact("tangential W^3 = 1/(a3 c2 - a2 c3)", w3 == want, diff, sample, &jet)
                    }
                    Err(e) => t.error(sample, e, params.clone()),
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

fn curves(t: &mut Tally, r: &mut ChaCha8Rng, samples: usize) {
    let opts = NormalizeOptions::default();
    for i in 0..samples {
        // SL2 normal form readings
        let u = random_curve_jet(r, 8, None);
        let jet = || curve_jet_strings(&u);
        let f = Series::from_derivatives1(8, |k| u[k]);
        match normalize_curve_sl2(&f, &opts) {
            Ok(res) => {
                for (k, name) in [(4, "G4 = P"), (5, "G5 = C"), (6, "G6 = F6"), (7, "G7 = F7")] {
                    match curve_f(k, &u) {
                        Ok(want) => t.float(name, rel_diff(res.readings[&format!("G{k}")], want), 1e-9, i, &jet),
                        Err(e) => t.error(i, e, jet()),
                    }
                }
            }
            Err(e) => t.error(i, e, jet()),
        }

        // P vanishes on u = d x + e + sqrt(2 g x + h)
        let (d, e) = (r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let g = r.gen_range(0.2..2.0) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let h = r.gen_range(0.5..2.0);
        let inner = Series::from_monomials(1, 8, |m| match m[0] {
            0 => h,
            1 => 2.0 * g,
            _ => 0.0,
        });
        let params = labelled(&["d", "e", "g", "h"], &[d, e, g, h].map(format_f64));
        match inner.pow_frac(1, 2) {
            Ok(root) => {
                let w: Vec<f64> = (0..=8).map(|k| root.d1(k) + [e, d].get(k).copied().unwrap_or(0.0)).collect();
                let terms = [3.0 * w[2] * w[4], -5.0 * w[3] * w[3]];
                let res = terms.iter().sum::<f64>().abs() / terms.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                t.float("P = 0 on u = dx + e + sqrt(2gx + h)", res, 1e-9, i, &|| params.clone());
            }
            Err(err) => t.error(i, err, params.clone()),
        }

        // C vanishes on conics a x^2 + b x u + c u^2 + d x + e u = 0
        loop {
            let co: Vec<Q> = (0..5).map(|_| q(r.gen_range(-4..=4), r.gen_range(1..=3))).collect();
            if co[4].is_zero() {
                continue;
            }
            let phi = Series::from_monomials(2, 8, |m| match (m[0], m[1]) {
                (2, 0) => co[0].clone(),
                (1, 1) => co[1].clone(),
                (0, 2) => co[2].clone(),
                (1, 0) => co[3].clone(),
                (0, 1) => co[4].clone(),
                _ => qi(0),
            });
            let params = labelled(&["a", "b", "c", "d", "e"], &co.iter().map(format_rational).collect::<Vec<_>>());
            let g = match solve_implicit(&phi) {
                Ok(g) => g,
                Err(err) => {
                    t.error(i, err, params);
                    break;
                }
            };
            let w: Vec<Q> = (0..=8).map(|k| g.d1(k)).collect();
            if w[2].is_zero() {
                continue;
            }
            match curve_c(&w) {
                Ok(c) => t.exact("C = 0 on conics", c.is_zero(), c.to_f64(), i, &|| params.clone()),
                Err(err) => t.error(i, err, params),
            }
            break;
        }

        // SA2 moving frame
        let u4 = random_curve_jet(r, 4, None);
        let x = r.gen_range(-1.0..1.0);
        let jet4 = || {
            let mut v = curve_jet_strings(&u4);
            v.push(format!("x={}", format_f64(x)));
            v
        };
        match (sa2_moving_frame(&x, &u4), curve_f(4, &u4)) {
            (Ok([a, b, ..]), Ok(p)) => t.float("moving frame gives P", rel_diff(sa2_v4(&a, &b, &u4), p), 1e-9, i, &jet4),
            (Err(e), _) | (_, Err(e)) => t.error(i, e, jet4()),
        }
    }
}

// ---------------------------------------------------------------------------
// Homogeneous models
// ---------------------------------------------------------------------------

/// Rotate the graph `u = F(x)` through the angle with `tan = F1` and return the
/// first and second Taylor coefficients of the rotated graph `v = G(y)`.
/// `F1 = 2 s / (1 - s^2)` keeps `sin` and `cos` rational.
pub fn euclid_rotation(s: &Q, f: &[Q]) -> Result<(Q, Q, Q), String> {
    let den = qi(1) + s.clone() * s.clone();
    let (sn, cs) = (qi(2) * s.clone() / den.clone(), (qi(1) - s.clone() * s.clone()) / den);
    if cs.is_zero() {
        return Err("vertical tangent".into());
    }
    let n = f.len() - 1;
    let big_f = Series::from_derivatives1(n, |k| f[k].clone());
    let (y, v) = (Series::var(2, n, 0), Series::var(2, n, 1));
    let arg = y.scale(&cs).sub(&v.scale(&sn)).map_err(msg)?;
    // 0 = -s y - c v + F(c y - s v)
    let phi = big_f.compose(&[arg]).map_err(msg)?.sub(&y.scale(&sn)).map_err(msg)?.sub(&v.scale(&cs)).map_err(msg)?;
    let g = solve_implicit(&phi).map_err(msg)?;
    Ok((sn / cs, g.d1(1), g.d1(2)))
}

fn homogeneous(t: &mut Tally, r: &mut ChaCha8Rng, samples: usize) {
    let none = Vec::new;
    for (name, ok) in cone_bracket_table() {
        t.exact(name, ok, 1.0, 0, &none);
    }
    for e in cone_fields() {
        let res = cone_tangency_residual(&e, 9);
        t.exact(&format!("{} tangent to the cone to order 9", e.name), res.is_zero(), res.to_f64(), 0, &none);
    }
    for i in 0..samples {
        let a = loop {
            let a = q(r.gen_range(-6..=6), r.gen_range(1..=4));
            if !a.is_zero() {
                break a;
            }
        };
        let params = vec![format!("a={}", format_rational(&a))];
        let jet = || params.clone();
        for (sign, label) in [(Sign::Plus, "+"), (Sign::Minus, "-")] {
            let e: Q = sign.eps();
            match homogeneous_curve_coefficients(sign, a.clone(), 10) {
                Ok(c) => {
                    let i6 = qi(5) + e.clone() * q(3, 2) * a.clone() * a.clone();
                    let i7 = qi(3) * a.clone() * a.clone() * a.clone() + e * qi(17) * a.clone();
                    t.exact(&format!("I6 = 5 {label} 3/2 a^2"), c[6] == i6, (c[6].clone() - i6).to_f64(), i, &jet);
                    t.exact(&format!("I7 = 3 a^3 {label} 17 a"), c[7] == i7, (c[7].clone() - i7).to_f64(), i, &jet);
                    let res = curve_tangency_residual(&homogeneous_tangent_field(sign, &a), &c);
                    let worst = res.iter().map(|v| v.abs_f64()).fold(0.0, f64::max);
                    t.float(&format!("L tangent to the order-10 series ({label})"), worst, 1e-9, i, &jet);
                }
                Err(err) => t.error(i, err, params.clone()),
            }
        }
        // Euclidean curvature through the rotation normal form; |s| < 1
        // keeps the cosine positive, the component the normal form uses
        let s = {
            let d = r.gen_range(2..=6);
            q(r.gen_range(-(d - 1)..=d - 1), d)
        };
        let f2 = loop {
            let v = q(r.gen_range(-6..=6), r.gen_range(1..=4));
            if !v.is_zero() {
                break v;
            }
        };
        let tail: Vec<Q> = (3..=5).map(|_| q(r.gen_range(-6..=6), r.gen_range(1..=4))).collect();
        let den = qi(1) - s.clone() * s.clone();
        let f1 = qi(2) * s.clone() / den;
        let mut f = vec![qi(0), f1.clone(), f2.clone()];
        f.extend(tail);
        let params = labelled(&["F0", "F1", "F2", "F3", "F4", "F5"], &f.iter().map(format_rational).collect::<Vec<_>>());
        let jet = || params.clone();
        match euclid_rotation(&s, &f).and_then(|(tan, g1, g2)| Ok((tan, g1, g2, euclid_curvature(&f1, &f2).map_err(msg)?))) {
            Ok((tan, g1, g2, kappa)) => {
                t.exact("rotation with s/c = F1", tan == f1, 1.0, i, &jet);
                t.exact("G1 = 0", g1.is_zero(), g1.to_f64(), i, &jet);
                let diff = (g2.clone() - kappa.clone()).to_f64();
                t.exact("G2 = F2 / (1 + F1^2)^(3/2)", g2 == kappa, diff, i, &jet);
            }
            Err(err) => t.error(i, err, params.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_on_small_runs() {
        let suites = [
            Suite::Oracle(SurfaceBranch::Generic),
            Suite::Oracle(SurfaceBranch::Cone),
            Suite::Recurrence(RecurrenceBranch::Generic),
            Suite::Recurrence(RecurrenceBranch::Cone),
            Suite::Recurrence(RecurrenceBranch::CurveSa2),
            Suite::Recurrence(RecurrenceBranch::CurveGl2),
            Suite::Prolongation,
            Suite::Transfer,
            Suite::Classification,
            Suite::Curves,
            Suite::Homogeneous,
        ];
        for s in suites {
            let rep = run_suite(s, 3, 1, None);
            assert!(rep.pass, "{:?}: {:#?}", s, rep.failure_summary());
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_suite(Suite::Curves, 4, 9, None);
        let b = run_suite(Suite::Curves, 4, 9, None);
        assert_eq!(a, b);
    }

    #[test]
    fn tight_override_reports_the_worst_sample() {
        let rep = run_suite(Suite::Oracle(SurfaceBranch::Generic), 5, 3, Some(0.0));
        let c = rep.check("G50 = M").unwrap();
        if c.worst_residual > 0.0 {
            assert!(!rep.pass && !c.pass);
            assert!(c.worst_jet.as_ref().unwrap().iter().any(|s| s.starts_with("u20=")));
        }
        assert_eq!(c.samples, 5);
    }

    #[test]
    fn euclidean_rotation_by_hand() {
        // F1 = 4/3 (s = 1/2): c = 3/5, G2 = F2 c^3
        let (tan, g1, g2) = euclid_rotation(&q(1, 2), &[qi(0), q(4, 3), qi(2), qi(0)]).unwrap();
        assert_eq!((tan, g1, g2), (q(4, 3), qi(0), q(54, 125)));
    }

    #[test]
    fn suite_names() {
        assert_eq!(Suite::parse("oracle", Some("cone")).unwrap(), Suite::Oracle(SurfaceBranch::Cone));
        assert_eq!(Suite::parse("recurrence", Some("curve-gl2")).unwrap(), Suite::Recurrence(RecurrenceBranch::CurveGl2));
        assert!(Suite::parse("transfer", Some("cone")).is_err());
        assert!(Suite::parse("bogus", None).is_err());
    }
}
