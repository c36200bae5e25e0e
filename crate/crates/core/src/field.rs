//! `Coeff`: the exact field ℚ(ζ)(τ) in which module data and row reduction live.
//!
//! τ stands for 2πi. Because 2πi is transcendental over every cyclotomic field, ranks and
//! normal forms computed over ℚ(ζ)(τ) coincide with the ones over ℂ at τ = 2πi.
//! Rational values take a fast path; everything else is a reduced fraction of τ-polynomials.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::One;

use crate::cyclo::{dense, Cyclo, FieldElem};
use crate::rational::{format_rational, Rational};

#[derive(Clone)]
enum Repr {
    /// Reduced fraction with positive denominator; the common case, kept off the heap.
    Small(i64, i64),
    /// Rational too large for `Small`.
    Rat(Rational),
    /// τ-free and irrational.
    Cyc(Cyclo),
    /// numerator / monic denominator, coprime, denominator of degree ≥ 0.
    Frac(Box<(Vec<Cyclo>, Vec<Cyclo>)>),
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// n/d from i128 parts (d ≠ 0), falling back to a big rational when it does not fit.
fn small(n: i128, d: i128) -> Coeff {
    let g = gcd_u128(n.unsigned_abs(), d.unsigned_abs()) as i128;
    let (mut n, mut d) = (n / g, d / g);
    if d < 0 {
        (n, d) = (-n, -d);
    }
    match (i64::try_from(n), i64::try_from(d)) {
        (Ok(n), Ok(d)) => Coeff(Repr::Small(n, d)),
        _ => Coeff(Repr::Rat(Rational::new(n.into(), d.into()))),
    }
}

/// Element of ℚ(ζ)(τ).
#[derive(Clone)]
pub struct Coeff(Repr);

impl Coeff {
    pub fn zero() -> Self {
        Coeff(Repr::Small(0, 1))
    }

    pub fn one() -> Self {
        Coeff(Repr::Small(1, 1))
    }

    pub fn from_rational(q: Rational) -> Self {
        use num_traits::ToPrimitive;
        match (q.numer().to_i64(), q.denom().to_i64()) {
            (Some(n), Some(d)) => Coeff(Repr::Small(n, d)),
            _ => Coeff(Repr::Rat(q)),
        }
    }

    pub fn from_i64(n: i64) -> Self {
        Coeff(Repr::Small(n, 1))
    }

    /// The value as a rational, when it is one.
    pub fn as_rational(&self) -> Option<Rational> {
        match &self.0 {
            Repr::Small(n, d) => Some(Rational::new((*n).into(), (*d).into())),
            Repr::Rat(q) => Some(q.clone()),
            _ => None,
        }
    }

    pub fn from_cyclo(c: Cyclo) -> Self {
        match c.as_rational() {
            Some(q) => Coeff::from_rational(q),
            None => Coeff(Repr::Cyc(c)),
        }
    }

    /// e^{2πi q}.
    pub fn root_of_unity(q: &Rational) -> Self {
        Coeff::from_cyclo(Cyclo::root_of_unity(q))
    }

    /// τ^k.
    pub fn tau_pow(k: u32) -> Self {
        let mut num = vec![Cyclo::zero(); k as usize + 1];
        num[k as usize] = Cyclo::one();
        Coeff::from_parts(num, vec![Cyclo::one()])
    }

    /// Polynomial in τ with cyclotomic coefficients (lowest first).
    pub fn from_tau_poly(num: Vec<Cyclo>) -> Self {
        Coeff::from_parts(num, vec![Cyclo::one()])
    }

    fn from_parts(mut num: Vec<Cyclo>, mut den: Vec<Cyclo>) -> Self {
        dense::trim(&mut num);
        dense::trim(&mut den);
        assert!(!den.is_empty(), "zero denominator");
        if num.is_empty() {
            return Coeff::zero();
        }
        if den.len() > 1 {
            let g = dense::gcd(&num, &den);
            if g.len() > 1 {
                num = dense::divrem(&num, &g).0;
                den = dense::divrem(&den, &g).0;
            }
        }
        let lead = den.last().unwrap().inv_elem();
        let num = dense::scale(&num, &lead);
        let den = dense::scale(&den, &lead);
        if den.len() == 1 && num.len() == 1 {
            return Coeff::from_cyclo(num.into_iter().next().unwrap());
        }
        Coeff(Repr::Frac(Box::new((num, den))))
    }

    fn parts(&self) -> (Vec<Cyclo>, Vec<Cyclo>) {
        match &self.0 {
            Repr::Small(..) | Repr::Rat(_) => (
                if self.is_zero() { Vec::new() } else { vec![Cyclo::from_rational(self.as_rational().unwrap())] },
                vec![Cyclo::one()],
            ),
            Repr::Cyc(c) => (vec![c.clone()], vec![Cyclo::one()]),
            Repr::Frac(b) => (b.0.clone(), b.1.clone()),
        }
    }

    fn as_cyclo(&self) -> Option<Cyclo> {
        match &self.0 {
            Repr::Small(..) | Repr::Rat(_) => Some(Cyclo::from_rational(self.as_rational().unwrap())),
            Repr::Cyc(c) => Some(c.clone()),
            Repr::Frac(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.0, Repr::Small(0, _))
    }

    pub fn is_one(&self) -> bool {
        matches!(&self.0, Repr::Small(1, 1))
    }

    /// τ-polynomial coefficients (lowest first) when the denominator is 1.
    pub fn as_tau_poly(&self) -> Option<Vec<Cyclo>> {
        let (num, den) = self.parts();
        if den.len() == 1 {
            Some(num)
        } else {
            None
        }
    }

    /// True when no τ occurs.
    pub fn is_tau_free(&self) -> bool {
        match &self.0 {
            Repr::Small(..) | Repr::Rat(_) | Repr::Cyc(_) => true,
            Repr::Frac(b) => b.0.len() <= 1 && b.1.len() == 1,
        }
    }

    pub fn inv(&self) -> Coeff {
        assert!(!self.is_zero(), "inverse of zero");
        match &self.0 {
            Repr::Small(n, d) => small(*d as i128, *n as i128),
            Repr::Rat(q) => Coeff::from_rational(q.recip()),
            Repr::Cyc(c) => Coeff(Repr::Cyc(c.inv_elem())),
            Repr::Frac(b) => Coeff::from_parts(b.1.clone(), b.0.clone()),
        }
    }

    pub fn pow(&self, k: u32) -> Coeff {
        let mut acc = Coeff::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }
}

impl PartialEq for Coeff {
    fn eq(&self, o: &Self) -> bool {
        match (&self.0, &o.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => a == c && b == d,
            (Repr::Small(..), Repr::Rat(_)) | (Repr::Rat(_), Repr::Small(..)) => false,
            (Repr::Rat(a), Repr::Rat(b)) => a == b,
            _ => (self - o).is_zero(),
        }
    }
}

impl Eq for Coeff {}

impl Default for Coeff {
    fn default() -> Self {
        Coeff::zero()
    }
}

impl From<Rational> for Coeff {
    fn from(q: Rational) -> Self {
        Coeff::from_rational(q)
    }
}

impl From<i64> for Coeff {
    fn from(n: i64) -> Self {
        Coeff::from_i64(n)
    }
}

impl<'a> Add<&'a Coeff> for &'a Coeff {
    type Output = Coeff;
    fn add(self, o: &Coeff) -> Coeff {
        match (&self.0, &o.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                return small(*a as i128 * *d as i128 + *c as i128 * *b as i128, *b as i128 * *d as i128)
            }
            (Repr::Small(..) | Repr::Rat(_), Repr::Small(..) | Repr::Rat(_)) => {
                return Coeff::from_rational(self.as_rational().unwrap() + o.as_rational().unwrap())
            }
            _ => {}
        }
        if let (Some(a), Some(b)) = (self.as_cyclo(), o.as_cyclo()) {
            return Coeff::from_cyclo(a.add_elem(&b));
        }
        let (an, ad) = self.parts();
        let (bn, bd) = o.parts();
        if ad == bd {
            return Coeff::from_parts(dense::add(&an, &bn), ad);
        }
        Coeff::from_parts(dense::add(&dense::mul(&an, &bd), &dense::mul(&bn, &ad)), dense::mul(&ad, &bd))
    }
}

impl<'a> Sub<&'a Coeff> for &'a Coeff {
    type Output = Coeff;
    fn sub(self, o: &Coeff) -> Coeff {
        self + &(-o)
    }
}

impl<'a> Mul<&'a Coeff> for &'a Coeff {
    type Output = Coeff;
    fn mul(self, o: &Coeff) -> Coeff {
        match (&self.0, &o.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => return small(*a as i128 * *c as i128, *b as i128 * *d as i128),
            (Repr::Small(..) | Repr::Rat(_), Repr::Small(..) | Repr::Rat(_)) => {
                return Coeff::from_rational(self.as_rational().unwrap() * o.as_rational().unwrap())
            }
            _ => {}
        }
        if self.is_zero() || o.is_zero() {
            return Coeff::zero();
        }
        match (&self.0, &o.0) {
            (Repr::Cyc(a), Repr::Cyc(b)) => return Coeff::from_cyclo(a.mul_elem(b)),
            (Repr::Cyc(c), _) | (_, Repr::Cyc(c)) if self.is_tau_free() && o.is_tau_free() => {
                let q = if matches!(self.0, Repr::Cyc(_)) { o } else { self };
                return Coeff::from_cyclo(c.mul_elem(&Cyclo::from_rational(q.as_rational().unwrap())));
            }
            _ => {}
        }
        let (an, ad) = self.parts();
        let (bn, bd) = o.parts();
        Coeff::from_parts(dense::mul(&an, &bn), dense::mul(&ad, &bd))
    }
}

impl Neg for &Coeff {
    type Output = Coeff;
    fn neg(self) -> Coeff {
        match &self.0 {
            Repr::Small(n, d) => small(-(*n as i128), *d as i128),
            Repr::Rat(q) => Coeff::from_rational(-q),
            Repr::Cyc(c) => Coeff(Repr::Cyc(c.mul_elem(&Cyclo::from_rational(-Rational::one())))),
            Repr::Frac(b) => Coeff(Repr::Frac(Box::new((dense::neg(&b.0), b.1.clone())))),
        }
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<Coeff> for Coeff {
            type Output = Coeff;
            fn $m(self, o: Coeff) -> Coeff {
                (&self).$m(&o)
            }
        }
        impl<'a> $tr<&'a Coeff> for Coeff {
            type Output = Coeff;
            fn $m(self, o: &Coeff) -> Coeff {
                (&self).$m(o)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl Neg for Coeff {
    type Output = Coeff;
    fn neg(self) -> Coeff {
        -&self
    }
}

impl FieldElem for Coeff {
    fn zero_like(&self) -> Self {
        Coeff::zero()
    }
    fn one_like(&self) -> Self {
        Coeff::one()
    }
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn add_elem(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_elem(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_elem(&self, o: &Self) -> Self {
        self * o
    }
    fn inv_elem(&self) -> Self {
        self.inv()
    }
}

fn fmt_poly(p: &[Cyclo]) -> String {
    let parts: Vec<String> = p
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero_elem())
        .map(|(k, c)| match k {
            0 => format!("{c:?}"),
            1 => format!("{c:?}*tau"),
            _ => format!("{c:?}*tau^{k}"),
        })
        .collect();
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

impl fmt::Debug for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(..) | Repr::Rat(_) => write!(f, "{}", format_rational(&self.as_rational().unwrap())),
            Repr::Cyc(c) => write!(f, "{c:?}"),
            Repr::Frac(b) if b.1.len() == 1 => write!(f, "{}", fmt_poly(&b.0)),
            Repr::Frac(b) => write!(f, "({})/({})", fmt_poly(&b.0), fmt_poly(&b.1)),
        }
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn tau_fractions_reduce() {
        let t = Coeff::tau_pow(1);
        let x = &t + &Coeff::one();
        let y = &x * &x.inv();
        assert!(y.is_one());
        let z = &(&t * &t) * &t.inv();
        assert_eq!(z, t);
        assert!(!t.is_tau_free());
    }

    #[test]
    fn roots_collapse_to_rationals() {
        let i = Coeff::root_of_unity(&rat(1, 4));
        let m = &i * &i;
        assert_eq!(m.as_rational(), Some(crate::rational::int(-1)));
    }
}
