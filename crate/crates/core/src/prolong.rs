//! Infinitesimal generators of the affine actions, their prolongations to jet
//! space, push-forward to parabolic jets, and the tangency and orbit-rank facts
//! that follow.

use crate::jetpoly::{u, JetPolynomial, JetRational, Var};
use crate::jets::{gradient, parabolic_pushforward, relation, JetError, ParabolicJet, Symbolic};
use crate::linalg::{det_exact, minor, rank_exact, rank_f64};
use crate::scalar::{qi, Scalar, Q};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProlongError {
    #[error("v{0}(H) is not divisible by H")]
    NotDivisible(usize),
    #[error("orbit rank is only tabulated for jet orders 2, 3 and 4, not {0}")]
    UnsupportedOrder(usize),
    #[error("point outside the working domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// `xi d/dx + eta d/dy + phi d/du` with polynomial coefficients in `x, y, u`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub name: String,
    pub xi: JetPolynomial,
    pub eta: JetPolynomial,
    pub phi: JetPolynomial,
}

fn p(v: Var) -> JetPolynomial {
    JetPolynomial::var(v)
}

fn zero() -> JetPolynomial {
    JetPolynomial::zero()
}

fn one() -> JetPolynomial {
    JetPolynomial::int(1)
}

const U0: Var = Var::U(0, 0);

impl VectorField {
    pub fn new(name: &str, xi: JetPolynomial, eta: JetPolynomial, phi: JetPolynomial) -> Self {
        VectorField { name: name.to_string(), xi, eta, phi }
    }

    /// Characteristic `phi - xi u_{1,0} - eta u_{0,1}`.
    pub fn characteristic(&self) -> JetPolynomial {
        self.phi.sub(&self.xi.mul(&p(u(1, 0)))).sub(&self.eta.mul(&p(u(0, 1))))
    }

    /// Coefficient of `d/du_{j,k}` in the infinite prolongation.
    pub fn prolong(&self, j: usize, k: usize) -> JetPolynomial {
        if j + k == 0 {
            return self.phi.clone();
        }
        let mut q = self.characteristic();
        for _ in 0..j {
            q = q.total(0);
        }
        for _ in 0..k {
            q = q.total(1);
        }
        q.add(&self.xi.mul(&p(u(j + 1, k)))).add(&self.eta.mul(&p(u(j, k + 1))))
    }

    /// Coefficient along any jet-space coordinate.
    pub fn coefficient(&self, v: Var) -> JetPolynomial {
        match v {
            Var::X => self.xi.clone(),
            Var::Y => self.eta.clone(),
            Var::U(j, k) => self.prolong(j as usize, k as usize),
        }
    }

    /// Push-forward of the prolonged coefficient to parabolic jets.
    pub fn pushforward(&self, j: usize, k: usize) -> JetRational {
        parabolic_pushforward(&JetRational::from_poly(self.prolong(j, k)))
    }

    /// The prolonged field applied to a jet polynomial.
    pub fn apply(&self, f: &JetPolynomial) -> JetPolynomial {
        let mut out = JetPolynomial::zero();
        for v in f.variables() {
            out = out.add(&self.coefficient(v).mul(&f.partial(v)));
        }
        out
    }

    /// Base (unprolonged) action on a function of `x, y, u`.
    fn on_base(&self, f: &JetPolynomial) -> JetPolynomial {
        self.xi
            .mul(&f.partial(Var::X))
            .add(&self.eta.mul(&f.partial(Var::Y)))
            .add(&self.phi.mul(&f.partial(U0)))
    }

    /// Lie bracket `[self, o]` computed on coefficients.
    pub fn bracket(&self, o: &VectorField) -> VectorField {
        let c = |a: &JetPolynomial, b: &JetPolynomial| self.on_base(b).sub(&o.on_base(a));
        VectorField {
            name: format!("[{},{}]", self.name, o.name),
            xi: c(&self.xi, &o.xi),
            eta: c(&self.eta, &o.eta),
            phi: c(&self.phi, &o.phi),
        }
    }

    /// Coefficients on the affine basis `1, x, y, u` of each component.
    pub fn affine_coords(&self) -> Option<Vec<Q>> {
        let basis = [crate::jetpoly::Monomial::one(), mono(Var::X), mono(Var::Y), mono(U0)];
        let mut out = Vec::with_capacity(12);
        for comp in [&self.xi, &self.eta, &self.phi] {
            let total: usize = basis.iter().filter(|m| !comp.coeff(m).is_zero()).count();
            if total != comp.len() {
                return None;
            }
            out.extend(basis.iter().map(|m| comp.coeff(m)));
        }
        Some(out)
    }
}

fn mono(v: Var) -> crate::jetpoly::Monomial {
    crate::jetpoly::Monomial::var(v, 1)
}

/// The eleven generators `v1..v8, w1, w2, w3` of the special affine algebra
/// of three-space.
pub fn sa3_generators() -> Vec<VectorField> {
    let (x, y, uu) = (p(Var::X), p(Var::Y), p(U0));
    vec![
        VectorField::new("v1", x.clone(), zero(), uu.neg()),
        VectorField::new("v2", zero(), y.clone(), uu.neg()),
        VectorField::new("v3", y.clone(), zero(), zero()),
        VectorField::new("v4", uu.clone(), zero(), zero()),
        VectorField::new("v5", zero(), x.clone(), zero()),
        VectorField::new("v6", zero(), uu, zero()),
        VectorField::new("v7", zero(), zero(), x),
        VectorField::new("v8", zero(), zero(), y),
        VectorField::new("w1", one(), zero(), zero()),
        VectorField::new("w2", zero(), one(), zero()),
        VectorField::new("w3", zero(), zero(), one()),
    ]
}

/// `x d/dx - u d/du, u d/dx, x d/du` acting on plane curves `u = u(x)`.
pub fn sl2_curve_generators() -> Vec<VectorField> {
    let (x, uu) = (p(Var::X), p(U0));
    vec![
        VectorField::new("v1", x.clone(), zero(), uu.neg()),
        VectorField::new("v2", uu, zero(), zero()),
        VectorField::new("v3", zero(), zero(), x),
    ]
}

/// `x d/dx, u d/du, u d/dx, x d/du` acting on plane curves.
pub fn gl2_curve_generators() -> Vec<VectorField> {
    let (x, uu) = (p(Var::X), p(U0));
    vec![
        VectorField::new("v1", x.clone(), zero(), zero()),
        VectorField::new("v2", zero(), zero(), uu.clone()),
        VectorField::new("v3", uu, zero(), zero()),
        VectorField::new("v4", zero(), zero(), x),
    ]
}

/// Curve prolongation `Phi^k` written in curve jets `u_k` (stored as `u_{k,0}`).
pub fn prolong_curve(v: &VectorField, k: usize) -> JetPolynomial {
    v.prolong(k, 0)
}

/// Express a field in the basis of [`sa3_generators`], when it lies in the span.
pub fn decompose_sa3(v: &VectorField) -> Option<Vec<Q>> {
    let target = v.affine_coords()?;
    let gens: Vec<Vec<Q>> = sa3_generators().iter().map(|g| g.affine_coords().expect("affine")).collect();
    // 12 equations, 11 unknowns: least-squares is unnecessary, solve the
    // consistent system by exact elimination on the augmented matrix.
    let rows = 12;
    let cols = gens.len();
    let mut a: Vec<Vec<Q>> = (0..rows)
        .map(|r| {
            let mut row: Vec<Q> = (0..cols).map(|c| gens[c][r].clone()).collect();
            row.push(target[r].clone());
            row
        })
        .collect();
    let mut piv_cols = Vec::new();
    let mut rank = 0;
    for c in 0..cols {
        let Some(pr) = (rank..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(pr, rank);
        let pv = a[rank][c].clone();
        for v in a[rank].iter_mut() {
            *v = v.clone() / pv.clone();
        }
        for i in 0..rows {
            if i != rank && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..=cols {
                    let t = a[rank][j].clone() * f.clone();
                    a[i][j] -= t;
                }
            }
        }
        piv_cols.push(c);
        rank += 1;
    }
    if (rank..rows).any(|i| !a[i][cols].is_zero()) {
        return None;
    }
    let mut sol = vec![Q::zero(); cols];
    for (r, &c) in piv_cols.iter().enumerate() {
        sol[c] = a[r][cols].clone();
    }
    Some(sol)
}

/// `H = u_{2,0} u_{0,2} - u_{1,1}^2`.
pub fn hessian_poly() -> JetPolynomial {
    p(u(2, 0)).mul(&p(u(0, 2))).sub(&p(u(1, 1)).pow(2))
}

/// Exact quotients `v_sigma(H) / H` for `sigma = 1..6`.
pub fn tangency_quotients() -> Result<Vec<JetPolynomial>, ProlongError> {
    let h = hessian_poly();
    sa3_generators()
        .iter()
        .take(6)
        .enumerate()
        .map(|(i, g)| g.apply(&h).div_exact(&h).ok_or(ProlongError::NotDivisible(i + 1)))
        .collect()
}

/// `v(u_{j,k} - R_{j,k})` at a parabolic jet: zero iff `v` is tangent to the
/// relation there.
pub fn tangency_residual(v: &VectorField, j: usize, k: usize, pt: &ParabolicJet<Q>) -> Result<Q, ProlongError> {
    let n = j + k;
    let jp = pt.fill(n)?;
    let phi = v.prolong(j, k).eval(&|w| jp.value(w));
    let r = Symbolic(relation(j, k));
    let (_, grad) = gradient(&r, &jp)?;
    let vars = ParabolicJet::<Q>::coord_vars(n.max(2));
    let mut vr = Q::zero();
    for (g, w) in grad.into_iter().zip(vars) {
        if g.is_zero() {
            continue;
        }
        vr += g * v.coefficient(w).eval(&|z| jp.value(z));
    }
    Ok(phi - vr)
}

/// Coordinates (as `(j,k)`) of the order-4 rank matrix columns.
pub const ORDER4_COLUMNS: [(usize, usize); 6] = [(2, 0), (1, 1), (3, 0), (2, 1), (4, 0), (3, 1)];

/// Symbolic 6x6 matrix of pushed-forward coefficients of `v1..v6` along
/// `u20, u11, u30, u21, u40, u31`.
pub fn order4_matrix() -> Vec<Vec<JetRational>> {
    sa3_generators()
        .iter()
        .take(6)
        .map(|g| ORDER4_COLUMNS.iter().map(|&(j, k)| g.pushforward(j, k)).collect())
        .collect()
}

/// Determinant of a square matrix of rational jet functions by Laplace
/// expansion with memoisation over column subsets.
pub fn symbolic_det(m: &[Vec<JetRational>]) -> JetRational {
    let n = m.len();
    let mut memo: BTreeMap<(usize, u32), JetRational> = BTreeMap::new();
    fn rec(m: &[Vec<JetRational>], row: usize, cols: u32, memo: &mut BTreeMap<(usize, u32), JetRational>) -> JetRational {
        let n = m.len();
        if row == n {
            return JetRational::from_poly(JetPolynomial::int(1));
        }
        if let Some(v) = memo.get(&(row, cols)) {
            return v.clone();
        }
        let mut acc = JetRational::zero();
        let mut sign_pos = 0;
        for c in 0..n {
            if cols & (1 << c) != 0 {
                continue;
            }
            let e = &m[row][c];
            if !e.is_zero() {
                let sub = rec(m, row + 1, cols | (1 << c), memo);
                let t = e.mul(&sub);
                acc = if sign_pos % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
            }
            sign_pos += 1;
        }
        memo.insert((row, cols), acc.clone());
        acc
    }
    let _ = n;
    rec(m, 0, 0, &mut memo)
}

/// Result of an orbit-dimension computation at a parabolic jet.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRank {
    pub order: usize,
    /// Dimension of the parabolic jet space at this order.
    pub dim: usize,
    /// Rank of all eleven pushed-forward generators.
    pub rank: usize,
    /// Order 2: the 7x7 determinant of `v2, v3, v7, v8, w1, w2, w3`;
    /// order 4: the 6x6 determinant of `v1..v6`; order 3: the 9x9
    /// determinant of all generators but `v7, v8`... see [`orbit_rank`].
    pub key_det: Option<f64>,
    pub key_det_exact: Option<Q>,
    /// Order 4 only: rank of the 6x6 matrix and `det M^{i,6}` for `i = 4, 5, 6`.
    pub block_rank: Option<usize>,
    pub minors: Vec<Q>,
}

/// Full matrix of pushed-forward generators over the parabolic coordinates.
pub fn pushforward_matrix(order: usize) -> Vec<Vec<JetRational>> {
    let vars = ParabolicJet::<Q>::coord_vars(order);
    sa3_generators()
        .iter()
        .map(|g| {
            vars.iter()
                .map(|&v| match v {
                    Var::X => JetRational::from_poly(g.xi.clone()),
                    Var::Y => JetRational::from_poly(g.eta.clone()),
                    Var::U(j, k) => g.pushforward(j as usize, k as usize),
                })
                .collect()
        })
        .collect()
}

fn eval_matrix(m: &[Vec<JetRational>], pt: &ParabolicJet<Q>) -> Vec<Vec<Q>> {
    m.iter()
        .map(|row| row.iter().map(|e| crate::jets::eval_relation(e, pt)).collect())
        .collect()
}

/// Orbit rank of the prolonged special affine action at a parabolic jet of
/// order 2, 3 or 4, with the key determinants and minors.
pub fn orbit_rank(order: usize, pt: &ParabolicJet<Q>, exact: bool) -> Result<OrbitRank, ProlongError> {
    if !(2..=4).contains(&order) {
        return Err(ProlongError::UnsupportedOrder(order));
    }
    if pt.order() < order {
        return Err(JetError::InsufficientOrder { need: order, have: pt.order() }.into());
    }
    let u20 = pt.get(2, 0);
    if u20.is_zero() {
        return Err(ProlongError::Domain("u20 = 0".into()));
    }
    let a = u20.clone() * pt.get(2, 1) - pt.get(1, 1) * pt.get(3, 0);
    if order >= 3 && a.is_zero() {
        return Err(ProlongError::Domain("u20 u21 - u11 u30 = 0".into()));
    }
    let full = eval_matrix(&pushforward_matrix(order), pt);
    let rank = if exact {
        rank_exact(&full)
    } else {
        let f: Vec<Vec<f64>> = full.iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect();
        rank_f64(&f, 1e-10)
    };
    let mut out = OrbitRank {
        order,
        dim: 3 + 2 * order,
        rank,
        key_det: None,
        key_det_exact: None,
        block_rank: None,
        minors: Vec::new(),
    };
    match order {
        2 => {
            // rows v2, v3, v7, v8, w1, w2, w3 over x, y, u, u10, u01, u20, u11
            let rows = [1usize, 2, 6, 7, 8, 9, 10];
            let vars = ParabolicJet::<Q>::coord_vars(2);
            let want = [Var::X, Var::Y, u(0, 0), u(1, 0), u(0, 1), u(2, 0), u(1, 1)];
            let cols: Vec<usize> = want.iter().map(|w| vars.iter().position(|v| v == w).expect("column")).collect();
            let sub: Vec<Vec<Q>> = rows.iter().map(|&r| cols.iter().map(|&c| full[r][c].clone()).collect()).collect();
            let d = det_exact(&sub);
            out.key_det = Some(Scalar::to_f64(&d));
            out.key_det_exact = Some(d);
        }
        4 => {
            let block = eval_matrix(&order4_matrix(), pt);
            let d = det_exact(&block);
            out.key_det = Some(Scalar::to_f64(&d));
            out.key_det_exact = Some(d);
            out.block_rank = Some(rank_exact(&block));
            out.minors = (3..6).map(|i| det_exact(&minor(&block, i, 5))).collect();
        }
        _ => {}
    }
    Ok(out)
}

/// The factors `f_i` in `det M^{i,6} = -18 u20^{e_i} A f_i` for `i = 4, 5, 6`,
/// with `A = u20 u21 - u11 u30`, `B = u20 u31 - u11 u40` and the exponents
/// from [`ORDER4_MINOR_U20_POWERS`].
pub fn order4_minor_factors() -> [JetPolynomial; 3] {
    let (u10, u11, u20, u30) = (p(u(1, 0)), p(u(1, 1)), p(u(2, 0)), p(u(3, 0)));
    let a = order4_a();
    let b = p(u(2, 0)).mul(&p(u(3, 1))).sub(&p(u(1, 1)).mul(&p(u(4, 0))));
    let c = |k: i64| JetPolynomial::int(k);
    let f4 = c(3).mul(&u20).mul(&p(u(2, 1))).add(&c(2).mul(&u11).mul(&u30)).mul(&a).sub(&c(2).mul(&u11).mul(&u20).mul(&b));
    let f5 = c(3).mul(&u20.pow(2)).sub(&c(5).mul(&u10).mul(&u30)).mul(&a).add(&c(2).mul(&u10).mul(&u20).mul(&b));
    let f6 = c(-5).mul(&u30).mul(&a).add(&c(2).mul(&u20).mul(&b));
    [f4, f5, f6]
}

/// Powers of `u20` in the factorizations of `det M^{4,6}`, `det M^{5,6}`,
/// `det M^{6,6}` (computed, see the tests).
pub const ORDER4_MINOR_U20_POWERS: [u32; 3] = [0, 1, 1];

/// `A = u20 u21 - u11 u30`.
pub fn order4_a() -> JetPolynomial {
    p(u(2, 0)).mul(&p(u(2, 1))).sub(&p(u(1, 1)).mul(&p(u(3, 0))))
}

/// The elimination identities `f4 + u11 f6 = 3 A^2` and `f5 - u10 f6 = 3 u20^2 A`
/// showing the three minors never vanish together on the domain. Returns the
/// two residuals (both zero polynomials when the identities hold).
pub fn minor_elimination_residuals() -> [JetPolynomial; 2] {
    let [f4, f5, f6] = order4_minor_factors();
    let a = order4_a();
    let r1 = f4.add(&p(u(1, 1)).mul(&f6)).sub(&a.pow(2).scale(&qi(3)));
    let r2 = f5.sub(&p(u(1, 0)).mul(&f6)).sub(&p(u(2, 0)).pow(2).mul(&a).scale(&qi(3)));
    [r1, r2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetpoly::parse_poly;
    use crate::scalar::q;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_qjet(rng: &mut ChaCha8Rng, n: usize) -> ParabolicJet<Q> {
        loop {
            let pt = ParabolicJet::from_fn(q(rng.gen_range(-6..=6), 3), q(rng.gen_range(-6..=6), 3), n, |_, _| {
                q(rng.gen_range(-12..=12), rng.gen_range(1..=4))
            });
            let a = pt.get(2, 0) * pt.get(2, 1) - pt.get(1, 1) * pt.get(3, 0);
            if !pt.get(2, 0).is_zero() && !a.is_zero() {
                return pt;
            }
        }
    }

    #[test]
    fn generator_table() {
        let g = sa3_generators();
        assert_eq!(g.len(), 11);
        assert_eq!(g[6].phi, parse_poly("x"));
        assert!(g[6].xi.is_zero() && g[6].eta.is_zero());
    }

    #[test]
    fn translations_prolong_trivially() {
        for g in &sa3_generators()[8..] {
            for n in 1..5 {
                for k in 0..=n {
                    assert!(g.prolong(n - k, k).is_zero(), "{} at u{}{}", g.name, n - k, k);
                }
            }
        }
    }

    #[test]
    fn curve_prolongations() {
        let sl2 = sl2_curve_generators();
        for k in 1..7 {
            assert_eq!(prolong_curve(&sl2[0], k), JetPolynomial::var(u(k, 0)).scale(&qi(-(k as i64) - 1)));
        }
        assert_eq!(prolong_curve(&sl2[1], 4), parse_poly("-5*u10*u40 - 10*u20*u30"));
        // the GL2 column tables
        let gl2 = gl2_curve_generators();
        assert_eq!(prolong_curve(&gl2[2], 3), parse_poly("-4*u10*u30 - 3*u20^2"));
        assert_eq!(prolong_curve(&gl2[2], 6), parse_poly("-7*u10*u60 - 21*u20*u50 - 35*u30*u40"));
        assert_eq!(prolong_curve(&gl2[0], 5), parse_poly("-5*u50"));
        assert_eq!(prolong_curve(&gl2[1], 5), parse_poly("u50"));
    }

    #[test]
    fn prolongation_order_is_bounded() {
        for g in sa3_generators() {
            for n in 1..6 {
                for k in 0..=n {
                    assert!(g.prolong(n - k, k).max_jet_order() <= n);
                }
            }
        }
    }

    #[test]
    fn printed_pushforwards() {
        let g = sa3_generators();
        assert_eq!(g[4].pushforward(1, 1), JetRational::new(parse_poly("-u11^2"), 1));
        let printed = JetRational::new(parse_poly("-4*u10*u11*u21*u20 + 2*u10*u11^2*u30 - 3*u11^2*u20^2 - 2*u21*u01*u20^2"), 2);
        assert_eq!(g[5].pushforward(2, 1), printed);
        let printed = JetRational::new(
            parse_poly("-6*u11*u31*u20^2 + 12*u30*u11*u21*u20 - 6*u30^2*u11^2 - 6*u21^2*u20^2 + 3*u40*u11^2*u20"),
            3,
        );
        assert_eq!(g[4].pushforward(3, 1), printed);
        // no k >= 2 dependence: unchanged
        assert_eq!(g[0].pushforward(3, 0), JetRational::from_poly(g[0].prolong(3, 0)));
    }

    #[test]
    fn lie_brackets_close() {
        let g = sa3_generators();
        let b = g[6].bracket(&g[3]);
        assert_eq!(decompose_sa3(&b).unwrap()[0], qi(1));
        assert_eq!(b.xi, parse_poly("x"));
        for a in &g {
            for c in &g {
                assert!(decompose_sa3(&a.bracket(c)).is_some(), "[{}, {}]", a.name, c.name);
            }
        }
        // a trace-carrying field is not special affine
        let scale = VectorField::new("e", parse_poly("x"), zero(), zero());
        assert!(decompose_sa3(&scale).is_none());
    }

    #[test]
    fn tangency_quotient_values() {
        let qs = tangency_quotients().unwrap();
        let expect = ["-4", "-4", "0", "-4*u10", "0", "-4*u01"];
        for (qv, e) in qs.iter().zip(expect) {
            assert_eq!(*qv, parse_poly(e));
        }
    }

    #[test]
    fn generators_tangent_to_parabolic_jets() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let gens = sa3_generators();
        for _ in 0..3 {
            let pt = random_qjet(&mut rng, 5);
            for g in &gens {
                for n in 2..=5 {
                    for k in 2..=n {
                        assert_eq!(tangency_residual(g, n - k, k, &pt).unwrap(), qi(0), "{} u{}{}", g.name, n - k, k);
                    }
                }
            }
        }
    }

    #[test]
    fn orbit_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..3 {
            let pt = random_qjet(&mut rng, 4);
            let r2 = orbit_rank(2, &pt, true).unwrap();
            assert_eq!(r2.rank, 7);
            assert_eq!(r2.key_det_exact.clone().unwrap(), pt.get(2, 0) * pt.get(2, 0));
            let r3 = orbit_rank(3, &pt, true).unwrap();
            assert_eq!(r3.rank, 9);
            let r4 = orbit_rank(4, &pt, true).unwrap();
            assert_eq!(r4.key_det_exact.clone().unwrap(), qi(0));
            assert_eq!(r4.block_rank, Some(5));
            assert_eq!(r4.rank, 10);
            assert_eq!(orbit_rank(4, &pt, false).unwrap().rank, 10);
        }
    }

    #[test]
    fn minor_factorizations_and_elimination() {
        let m = order4_matrix();
        let a = order4_a();
        let u20 = JetPolynomial::var(u(2, 0));
        for (i, f) in order4_minor_factors().iter().enumerate() {
            let d = symbolic_det(&minor(&m, 3 + i, 5));
            let expect = JetRational::from_poly(u20.pow(ORDER4_MINOR_U20_POWERS[i]).mul(&a).mul(f).scale(&qi(-18)));
            assert_eq!(d, expect, "minor {}", 4 + i);
        }
        for r in minor_elimination_residuals() {
            assert!(r.is_zero());
        }
    }

    #[test]
    fn order4_determinant_vanishes_symbolically() {
        assert!(symbolic_det(&order4_matrix()).is_zero());
    }
}
