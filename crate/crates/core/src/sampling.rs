//! Seeded random parabolic and curve jets for the verification suites:
//! generic-branch jets bounded away from the branch loci, and cone-branch
//! jets on which the numerator of `W` and all its `x`-derivatives vanish.

use crate::invariants::{a_factor, w_numerator, x_numerator};
use crate::jetpoly::{parse_poly, JetPolynomial, Var};
use crate::jets::{JetError, ParabolicJet};
use crate::scalar::{q, Scalar, Q};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

pub use rand::SeedableRng;

/// Deterministic generator used everywhere a seed is accepted.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Branch of a sampled parabolic jet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceBranch {
    /// `S != 0`, `W != 0`.
    Generic,
    /// `S != 0`, `W == 0` to the sampled order, `X != 0`.
    Cone,
}

const MAX_TRIES: usize = 10_000;

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-2.0..2.0)
}

fn w_derivatives() -> &'static Vec<JetPolynomial> {
    static CACHE: OnceLock<Vec<JetPolynomial>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut v = vec![parse_poly("u20^2*u31 - u20*u40*u11 + 2*u30^2*u11 - 2*u30*u21*u20")];
        for _ in 0..12 {
            let next = v.last().expect("seeded").total(0);
            v.push(next);
        }
        v
    })
}

/// Impose `D_x^m Wnum = 0` for `m = 0..=n-4` by solving for `u_{m+3,1}`
/// (it enters linearly with coefficient `u20^2`). Other coordinates are kept.
pub fn impose_cone<S: Scalar>(p: &mut ParabolicJet<S>) -> Result<(), JetError> {
    let n = p.order();
    let u20 = p.get(2, 0);
    if u20.is_zero() {
        return Err(JetError::DegenerateU20);
    }
    let polys = w_derivatives();
    for m in 0..=n.saturating_sub(4) {
        if n < 4 || m >= polys.len() {
            break;
        }
        p.set(m + 3, 1, S::zero());
        let snapshot = p.clone();
        let rest = polys[m].eval(&|v| match v {
            Var::X => snapshot.x.clone(),
            Var::Y => snapshot.y.clone(),
            Var::U(j, k) => snapshot.get(j as usize, k as usize),
        });
        p.set(m + 3, 1, -rest / (u20.clone() * u20.clone()));
    }
    Ok(())
}

/// Random floating parabolic jet of order `n` on the requested branch, with
/// coordinates in `[-2, 2]`, `|u20| >= 0.3`, `|A|, |S| >= 0.1` and, per branch,
/// `|Wnum|, |W| >= 0.1` (generic) or `|Xn| >= 0.1`, `0.1 <= |X| <= 1e3`
/// (cone, `n >= 5`): the normalization stays well conditioned.
pub fn random_parabolic_jet(rng: &mut ChaCha8Rng, n: usize, branch: SurfaceBranch) -> ParabolicJet<f64> {
    for _ in 0..MAX_TRIES {
        let mut p = ParabolicJet::from_fn(0.0, 0.0, n, |_, _| uniform(rng));
        if p.get(2, 0).abs() < 0.3 {
            continue;
        }
        if branch == SurfaceBranch::Cone && impose_cone(&mut p).is_err() {
            continue;
        }
        let full = match p.fill(n.min(5)) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let u20 = full.u(2, 0);
        let a = a_factor(&full);
        if a.abs() < 0.1 || (a / (u20 * u20)).abs() < 0.1 {
            continue;
        }
        let ok = match branch {
            SurfaceBranch::Generic => {
                n < 4 || {
                    let wn = w_numerator(&full);
                    wn.abs() >= 0.1 && (wn / (u20 * u20 * a.cbrt().powi(2))).abs() >= 0.1
                }
            }
            SurfaceBranch::Cone => {
                n < 5 || {
                    let xn = x_numerator(&full);
                    let x = (a * xn / (9.0 * u20.powi(6))).abs();
                    xn.abs() >= 0.1 && (0.1..=1e3).contains(&x)
                }
            }
        };
        // keep cone jets moderate: the solved u_{j,1} grow quickly
        let bounded = (0..n).all(|j| p.get(j, 1).abs() < 1e4);
        if ok && bounded {
            return p;
        }
    }
    panic!("rejection sampling failed to produce a {branch:?} jet");
}

fn small_rational(rng: &mut ChaCha8Rng) -> Q {
    q(rng.gen_range(-6..=6), rng.gen_range(1..=4))
}

/// Random exact parabolic jet of order `n` with small rational coordinates,
/// `u20 != 0`, `A != 0` and (generic) `Wnum != 0` or (cone) `Xn != 0`.
pub fn random_rational_jet(rng: &mut ChaCha8Rng, n: usize, branch: SurfaceBranch) -> ParabolicJet<Q> {
    for _ in 0..MAX_TRIES {
        let mut p = ParabolicJet::from_fn(q(0, 1), q(0, 1), n, |_, _| small_rational(rng));
        if p.get(2, 0).is_zero() {
            continue;
        }
        if branch == SurfaceBranch::Cone && impose_cone(&mut p).is_err() {
            continue;
        }
        let full = match p.fill(n.min(5)) {
            Ok(f) => f,
            Err(_) => continue,
        };
        if a_factor(&full).is_zero() {
            continue;
        }
        let ok = match branch {
            SurfaceBranch::Generic => n < 4 || !w_numerator(&full).is_zero(),
            SurfaceBranch::Cone => n < 5 || !x_numerator(&full).is_zero(),
        };
        if ok {
            return p;
        }
    }
    panic!("rejection sampling failed to produce a rational {branch:?} jet");
}

/// Random curve jet `u_0..u_n` with `|u2| >= 0.3`; `sign` fixes the sign of
/// `3 u2 u4 - 5 u3^2` (bounded away from zero) when given.
pub fn random_curve_jet(rng: &mut ChaCha8Rng, n: usize, sign: Option<f64>) -> Vec<f64> {
    for _ in 0..MAX_TRIES {
        let u: Vec<f64> = (0..=n).map(|_| uniform(rng)).collect();
        if u[2].abs() < 0.3 {
            continue;
        }
        if let Some(s) = sign {
            if n < 4 || s * (3.0 * u[2] * u[4] - 5.0 * u[3] * u[3]) < 0.3 {
                continue;
            }
        }
        return u;
    }
    panic!("rejection sampling failed to produce a curve jet");
}

/// Random exact curve jet with `u2 != 0`.
pub fn random_rational_curve_jet(rng: &mut ChaCha8Rng, n: usize) -> Vec<Q> {
    loop {
        let u: Vec<Q> = (0..=n).map(|_| small_rational(rng)).collect();
        if !u[2].is_zero() {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::SurfaceInvariant;
    use crate::jets::{total_derivative, Dir};

    #[test]
    fn cone_jets_kill_w_numerator_in_both_directions() {
        let mut r = rng(3);
        for _ in 0..10 {
            let p = random_rational_jet(&mut r, 7, SurfaceBranch::Cone);
            let full = p.fill(7).unwrap();
            assert!(w_numerator(&full).is_zero());
            for dir in [Dir::X, Dir::Y] {
                let d = total_derivative(&SurfaceInvariant::WNumerator, dir, &p.truncate(5)).unwrap();
                assert!(d.is_zero(), "{dir:?}: {d}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = random_parabolic_jet(&mut rng(11), 8, SurfaceBranch::Generic);
        let b = random_parabolic_jet(&mut rng(11), 8, SurfaceBranch::Generic);
        assert_eq!(a, b);
    }
}
