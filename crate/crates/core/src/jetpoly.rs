//! Exact polynomials in base and jet coordinates `x, y, u_{j,k}`, and rational
//! functions whose denominator is a power of `u_{2,0}` (the only denominators
//! the parabolic relations ever create).

use crate::scalar::{Scalar, Q};
use crate::series::mono_index;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

/// A coordinate on jet space. `U(0,0)` is `u` itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X,
    Y,
    U(u8, u8),
}

impl Var {
    fn code(self) -> u16 {
        match self {
            Var::X => 0,
            Var::Y => 1,
            Var::U(j, k) => 2 + mono_index(&[j as usize, k as usize]) as u16,
        }
    }

    fn from_code(c: u16) -> Var {
        match c {
            0 => Var::X,
            1 => Var::Y,
            _ => {
                let idx = (c - 2) as usize;
                // invert the graded index for two variables
                let mut d = 0;
                while (d + 1) * (d + 2) / 2 <= idx {
                    d += 1;
                }
                let k = idx - d * (d + 1) / 2;
                Var::U((d - k) as u8, k as u8)
            }
        }
    }

    pub fn jet_order(self) -> usize {
        match self {
            Var::U(j, k) => (j + k) as usize,
            _ => 0,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X => write!(f, "x"),
            Var::Y => write!(f, "y"),
            Var::U(0, 0) => write!(f, "u"),
            Var::U(j, k) => write!(f, "u{j}{k}"),
        }
    }
}

pub fn u(j: usize, k: usize) -> Var {
    Var::U(j as u8, k as u8)
}

/// Sparse monomial: sorted `(variable code, exponent)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<(u16, u16)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var, e: u16) -> Self {
        if e == 0 {
            Self::one()
        } else {
            Monomial(vec![(v.code(), e)])
        }
    }

    pub fn exponent(&self, v: Var) -> u16 {
        let c = v.code();
        self.0.iter().find(|(w, _)| *w == c).map(|p| p.1).unwrap_or(0)
    }

    pub fn vars(&self) -> impl Iterator<Item = (Var, u16)> + '_ {
        self.0.iter().map(|&(c, e)| (Var::from_code(c), e))
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|p| p.1 as u32).sum()
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Vec::with_capacity(self.0.len() + o.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < o.0.len() {
            match (self.0.get(i), o.0.get(j)) {
                (Some(a), Some(b)) if a.0 == b.0 => {
                    out.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
                (Some(a), Some(b)) if a.0 < b.0 => {
                    out.push(*a);
                    i += 1;
                }
                (Some(_), Some(b)) => {
                    out.push(*b);
                    j += 1;
                }
                (Some(a), None) => {
                    out.push(*a);
                    i += 1;
                }
                (None, Some(b)) => {
                    out.push(*b);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Monomial(out)
    }

    /// `self / o` when `o` divides `self`.
    pub fn div(&self, o: &Self) -> Option<Self> {
        let mut out = Vec::new();
        let mut j = 0;
        for &(c, e) in &self.0 {
            let mut e = e;
            if j < o.0.len() && o.0[j].0 == c {
                if o.0[j].1 > e {
                    return None;
                }
                e -= o.0[j].1;
                j += 1;
            } else if j < o.0.len() && o.0[j].0 < c {
                return None;
            }
            if e > 0 {
                out.push((c, e));
            }
        }
        if j < o.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Pure lexicographic order with `x > y > u > u10 > u01 > ...`.
    pub fn lex_cmp(&self, o: &Self) -> Ordering {
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), o.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(a), Some(b)) => {
                    if a.0 < b.0 {
                        return Ordering::Greater;
                    }
                    if a.0 > b.0 {
                        return Ordering::Less;
                    }
                    if a.1 != b.1 {
                        return a.1.cmp(&b.1);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

/// Polynomial over the rationals in jet coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct JetPolynomial {
    terms: BTreeMap<Monomial, Q>,
}

impl JetPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Q) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn int(c: i64) -> Self {
        Self::constant(Q::from_integer(c.into()))
    }

    pub fn var(v: Var) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::var(v, 1), Q::one());
        p
    }

    pub fn term(c: Q, vars: &[(Var, u16)]) -> Self {
        let mut m = Monomial::one();
        for &(v, e) in vars {
            m = m.mul(&Monomial::var(v, e));
        }
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Q {
        self.terms.get(m).cloned().unwrap_or_else(Q::zero)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), -c.clone());
        }
        r
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Q::one())
    }

    pub fn scale(&self, k: &Q) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        JetPolynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut acc: BTreeMap<Monomial, Q> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let m = ma.mul(mb);
                *acc.entry(m).or_insert_with(Q::zero) += ca * cb;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        JetPolynomial { terms: acc }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::int(1);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        JetPolynomial {
            terms: self.terms.iter().map(|(a, c)| (a.mul(m), c.clone())).collect(),
        }
    }

    pub fn partial(&self, v: Var) -> Self {
        let code = v.code();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if let Some(pos) = m.0.iter().position(|p| p.0 == code) {
                let e = m.0[pos].1;
                let mut nm = m.0.clone();
                if e == 1 {
                    nm.remove(pos);
                } else {
                    nm[pos].1 = e - 1;
                }
                out.add_term(Monomial(nm), c * Q::from_integer((e as i64).into()));
            }
        }
        out
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut vs: Vec<u16> = self.terms.keys().flat_map(|m| m.0.iter().map(|p| p.0)).collect();
        vs.sort_unstable();
        vs.dedup();
        vs.into_iter().map(Var::from_code).collect()
    }

    pub fn max_jet_order(&self) -> usize {
        self.variables().into_iter().map(|v| v.jet_order()).max().unwrap_or(0)
    }

    /// Total derivative `D_x` (dir 0) or `D_y` (dir 1) on the full jet space.
    pub fn total(&self, dir: usize) -> Self {
        let mut out = Self::zero();
        for v in self.variables() {
            let d = self.partial(v);
            let image = match (v, dir) {
                (Var::X, 0) | (Var::Y, 1) => JetPolynomial::int(1),
                (Var::X, _) | (Var::Y, _) => JetPolynomial::zero(),
                (Var::U(j, k), 0) => JetPolynomial::var(Var::U(j + 1, k)),
                (Var::U(j, k), _) => JetPolynomial::var(Var::U(j, k + 1)),
            };
            out = out.add(&d.mul(&image));
        }
        out
    }

    pub fn eval<S: Scalar>(&self, val: &impl Fn(Var) -> S) -> S {
        let mut acc = S::zero();
        for (m, c) in &self.terms {
            let mut t = q_to::<S>(c);
            for (v, e) in m.vars() {
                t = t * val(v).powi(e as i32);
            }
            acc = acc + t;
        }
        acc
    }

    /// Leading term under [`Monomial::lex_cmp`].
    pub fn leading(&self) -> Option<(&Monomial, &Q)> {
        self.terms.iter().max_by(|a, b| a.0.lex_cmp(b.0))
    }

    /// Exact quotient `self / h`, or `None` when the division leaves a remainder.
    pub fn div_exact(&self, h: &Self) -> Option<Self> {
        let (lm, lc) = h.leading()?;
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut p = self.clone();
        let mut quot = Self::zero();
        while let Some((m, c)) = p.leading() {
            let f = m.div(&lm)?;
            let k = c / &lc;
            let mut t = Self::zero();
            t.add_term(f, k);
            p = p.sub(&h.mul(&t));
            quot = quot.add(&t);
        }
        Some(quot)
    }

    /// Replace variables by rational functions; untouched variables stay.
    pub fn substitute(&self, f: &impl Fn(Var) -> Option<JetRational>) -> JetRational {
        let mut acc = JetRational::zero();
        let mut cache: BTreeMap<(u16, u16), JetRational> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut t = JetRational::from_poly(JetPolynomial::constant(c.clone()));
            for &(code, e) in &m.0 {
                let v = Var::from_code(code);
                match f(v) {
                    Some(r) => {
                        let pw = cache.entry((code, e)).or_insert_with(|| r.pow(e as u32)).clone();
                        t = t.mul(&pw);
                    }
                    None => {
                        t = t.mul(&JetRational::from_poly(JetPolynomial::term(Q::one(), &[(v, e)])));
                    }
                }
            }
            acc = acc.add(&t);
        }
        acc
    }
}

fn q_to<S: Scalar>(c: &Q) -> S {
    use num_traits::ToPrimitive;
    match (c.numer().to_i64(), c.denom().to_i64()) {
        (Some(n), Some(d)) => S::from_ratio(n, d),
        _ => S::from_f64(Scalar::to_f64(c)),
    }
}

impl fmt::Display for JetPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            let s = crate::scalar::format_rational(c);
            if first {
                write!(f, "{s}")?;
            } else if let Some(stripped) = s.strip_prefix('-') {
                write!(f, " - {stripped}")?;
            } else {
                write!(f, " + {s}")?;
            }
            for (v, e) in m.vars() {
                if e == 1 {
                    write!(f, "*{v}")?;
                } else {
                    write!(f, "*{v}^{e}")?;
                }
            }
            first = false;
        }
        Ok(())
    }
}

/// `num / u_{2,0}^den`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JetRational {
    pub num: JetPolynomial,
    pub den: u32,
}

fn u20() -> JetPolynomial {
    JetPolynomial::var(u(2, 0))
}

impl JetRational {
    pub fn zero() -> Self {
        JetRational { num: JetPolynomial::zero(), den: 0 }
    }

    pub fn from_poly(num: JetPolynomial) -> Self {
        JetRational { num, den: 0 }
    }

    pub fn new(num: JetPolynomial, den: u32) -> Self {
        JetRational { num, den }.reduced()
    }

    fn lift(&self, den: u32) -> JetPolynomial {
        debug_assert!(den >= self.den);
        self.num.mul(&u20().pow(den - self.den))
    }

    /// Cancel common factors of `u_{2,0}`.
    pub fn reduced(mut self) -> Self {
        let code = u(2, 0).code();
        while self.den > 0 && !self.num.is_zero() && self.num.terms.keys().all(|m| m.0.iter().any(|p| p.0 == code)) {
            self.num = self.num.div_exact(&u20()).expect("monomial division");
            self.den -= 1;
        }
        if self.num.is_zero() {
            self.den = 0;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        let d = self.den.max(o.den);
        JetRational { num: self.lift(d).add(&o.lift(d)), den: d }.reduced()
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        JetRational { num: self.num.neg(), den: self.den }
    }

    pub fn scale(&self, k: &Q) -> Self {
        JetRational { num: self.num.scale(k), den: self.den }.reduced()
    }

    pub fn mul(&self, o: &Self) -> Self {
        JetRational { num: self.num.mul(&o.num), den: self.den + o.den }.reduced()
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = JetRational::from_poly(JetPolynomial::int(1));
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Total derivative on the full jet space (quotient rule on `u_{2,0}^den`).
    pub fn total(&self, dir: usize) -> Self {
        let dn = self.num.total(dir);
        if self.den == 0 {
            return JetRational::from_poly(dn);
        }
        let du20 = JetPolynomial::var(if dir == 0 { u(3, 0) } else { u(2, 1) });
        let k = Q::from_integer((self.den as i64).into());
        let num = dn.mul(&u20()).sub(&self.num.mul(&du20).scale(&k));
        JetRational::new(num, self.den + 1)
    }

    pub fn substitute(&self, f: &impl Fn(Var) -> Option<JetRational>) -> Self {
        let n = self.num.substitute(f);
        JetRational { num: n.num, den: n.den + self.den }.reduced()
    }

    pub fn eval<S: Scalar>(&self, val: &impl Fn(Var) -> S) -> S {
        let n = self.num.eval(val);
        if self.den == 0 {
            n
        } else {
            n / val(u(2, 0)).powi(self.den as i32)
        }
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut v = self.num.variables();
        if self.den > 0 && !v.contains(&u(2, 0)) {
            v.push(u(2, 0));
        }
        v
    }
}

impl fmt::Display for JetRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / u20^{}", self.num, self.den)
        }
    }
}

/// Parse a compact polynomial like `"3*u20^2*u21 - u11*u30 + 1/2*x"`. Test and
/// fixture helper; not a general expression parser.
pub fn parse_poly(text: &str) -> JetPolynomial {
    let mut out = JetPolynomial::zero();
    let cleaned = text.replace(' ', "");
    let mut terms: Vec<String> = Vec::new();
    let mut cur = String::new();
    for (i, ch) in cleaned.chars().enumerate() {
        if (ch == '+' || ch == '-') && i > 0 && !cur.ends_with('^') {
            terms.push(cur.clone());
            cur.clear();
        }
        cur.push(ch);
    }
    if !cur.is_empty() {
        terms.push(cur);
    }
    for t in terms {
        let (sign, body) = match t.strip_prefix('-') {
            Some(b) => (-1, b.to_string()),
            None => (1, t.trim_start_matches('+').to_string()),
        };
        let mut c = Q::from_integer(sign.into());
        let mut m = Monomial::one();
        for f in body.split('*') {
            if f.is_empty() {
                continue;
            }
            let (base, e) = match f.split_once('^') {
                Some((b, e)) => (b, e.parse::<u16>().expect("exponent")),
                None => (f, 1),
            };
            let v = match base {
                "x" => Some(Var::X),
                "y" => Some(Var::Y),
                "u" => Some(Var::U(0, 0)),
                b if b.starts_with('u') && b.len() == 3 => {
                    let j = b[1..2].parse::<u8>().expect("j");
                    let k = b[2..3].parse::<u8>().expect("k");
                    Some(Var::U(j, k))
                }
                _ => None,
            };
            match v {
                Some(v) => m = m.mul(&Monomial::var(v, e)),
                None => {
                    let q = crate::scalar::parse_rational(base).expect("coefficient");
                    c *= num_traits::pow(q, e as usize);
                }
            }
        }
        out.add_term(m, c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn var_codes_round_trip() {
        for j in 0..8u8 {
            for k in 0..8u8 {
                let v = Var::U(j, k);
                assert_eq!(Var::from_code(v.code()), v);
            }
        }
        assert_eq!(Var::from_code(Var::X.code()), Var::X);
    }

    #[test]
    fn parse_and_display() {
        let p = parse_poly("3*u20^2*u21 - u11*u30 + 1/2*x");
        assert_eq!(p.len(), 3);
        assert_eq!(parse_poly(&p.to_string()), p);
    }

    #[test]
    fn total_derivative_chain_rule() {
        let p = parse_poly("u20^2");
        assert_eq!(p.total(0), parse_poly("2*u20*u30"));
        assert_eq!(parse_poly("x*u10").total(0), parse_poly("u10 + x*u20"));
    }

    #[test]
    fn exact_division() {
        let h = parse_poly("u20*u02 - u11^2");
        let q = parse_poly("3*u10 - 4");
        assert_eq!(q.mul(&h).div_exact(&h), Some(q));
        assert_eq!(parse_poly("u20*u02").div_exact(&h), None);
    }

    #[test]
    fn rational_quotient_rule() {
        // D_x (u11^2/u20) = 2 u11 u21/u20 - u11^2 u30/u20^2
        let r = JetRational::new(parse_poly("u11^2"), 1);
        let d = r.total(0);
        let expect = JetRational::new(parse_poly("2*u11*u21*u20 - u11^2*u30"), 2);
        assert_eq!(d, expect);
        assert_eq!(JetRational::new(parse_poly("u20^3*u11"), 2), JetRational::from_poly(parse_poly("u20*u11")));
    }
}
