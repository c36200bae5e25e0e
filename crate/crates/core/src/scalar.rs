//! `Scalar`: finite sums Σ c · e^{2πiq} · τ^k with q ∈ [0, 1) and τ a formal symbol for 2πi.
//!
//! Roots of unity are stored symbolically by their exponent; equality and inversion go through
//! the cyclotomic field so that relations such as 1 + ζ₃ + ζ₃² = 0 are respected.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::cyclo::{Cyclo, FieldElem};
use crate::error::ScalarError;
use crate::field::Coeff;
use crate::rational::{frac_part, format_rational, Rational};

/// Σ c · e^{2πiq} · τ^k, keyed by (q, k).
#[derive(Clone, Default)]
pub struct Scalar {
    terms: BTreeMap<(Rational, u32), Rational>,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::default()
    }

    pub fn one() -> Self {
        Scalar::from_rational(Rational::one())
    }

    pub fn from_rational(c: Rational) -> Self {
        Scalar::term(c, Rational::zero(), 0)
    }

    /// c · e^{2πiq} · τ^k; q is reduced mod 1.
    pub fn term(c: Rational, q: Rational, k: u32) -> Self {
        Scalar::raw_term(c, q, k).canonical()
    }

    fn raw_term(c: Rational, q: Rational, k: u32) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((frac_part(&q), k), c);
        }
        Scalar { terms }
    }

    /// e^{2πiq}.
    pub fn root_of_unity(q: &Rational) -> Self {
        Scalar::term(Rational::one(), q.clone(), 0)
    }

    /// e^{πir}, the convention used for (−x)^r.
    pub fn exp_pi_i(r: &Rational) -> Self {
        Scalar::root_of_unity(&(r / Rational::from_integer(2.into())))
    }

    /// τ^k.
    pub fn tau_pow(k: u32) -> Self {
        Scalar::term(Rational::one(), Rational::zero(), k)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Rational, u32, &Rational)> {
        self.terms.iter().map(|((q, k), c)| (q, *k, c))
    }

    /// Zero test (stored terms are kept canonical by the arithmetic).
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn tau_degree(&self) -> Option<u32> {
        self.terms.keys().map(|(_, k)| *k).max()
    }

    pub fn is_tau_free(&self) -> bool {
        self.terms.keys().all(|(_, k)| *k == 0)
    }

    /// Drops every τ^k with k > bound.
    pub fn truncate_tau(&self, bound: u32) -> Scalar {
        Scalar {
            terms: self.terms.iter().filter(|((_, k), _)| *k <= bound).map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    /// Errors when a τ-power beyond `bound` is present.
    pub fn check_tau(&self, bound: u32) -> Result<(), ScalarError> {
        match self.tau_degree() {
            Some(power) if power > bound => Err(ScalarError::TauOverflow { power, bound }),
            _ => Ok(()),
        }
    }

    /// Coefficient of τ^k as a cyclotomic number.
    pub fn tau_coefficient(&self, k: u32) -> Cyclo {
        let mut acc = Cyclo::zero();
        for ((q, kk), c) in &self.terms {
            if *kk == k {
                acc = acc.add_elem(&Cyclo::root_of_unity(q).mul_elem(&Cyclo::from_rational(c.clone())));
            }
        }
        acc
    }

    fn from_cyclo_tau(c: &Cyclo, k: u32) -> Scalar {
        let mut out = Scalar::zero();
        for (q, coef) in c.terms() {
            out = raw_add(&out, &Scalar::raw_term(coef, q, k));
        }
        out
    }

    /// Canonical form: each τ-coefficient rewritten in the power basis of its cyclotomic field.
    pub fn canonical(&self) -> Scalar {
        let mut out = Scalar::zero();
        if let Some(top) = self.tau_degree() {
            for k in 0..=top {
                out = raw_add(&out, &Scalar::from_cyclo_tau(&self.tau_coefficient(k), k));
            }
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> Scalar {
        if c.is_zero() {
            return Scalar::zero();
        }
        Scalar { terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect() }
    }

    pub fn neg(&self) -> Scalar {
        self.scale(&-Rational::one())
    }

    /// Exact image in ℚ(ζ)(τ).
    pub fn to_coeff(&self) -> Coeff {
        let top = match self.tau_degree() {
            Some(t) => t,
            None => return Coeff::zero(),
        };
        Coeff::from_tau_poly((0..=top).map(|k| self.tau_coefficient(k)).collect())
    }

    /// Inverse image of a τ-polynomial; `None` for genuine fractions in τ.
    pub fn from_coeff(c: &Coeff) -> Option<Scalar> {
        let poly = c.as_tau_poly()?;
        let mut out = Scalar::zero();
        for (k, ck) in poly.iter().enumerate() {
            out = raw_add(&out, &Scalar::from_cyclo_tau(ck, k as u32));
        }
        Some(out)
    }
}

/// a + b with like terms merged, in canonical form.
pub fn scalar_add(a: &Scalar, b: &Scalar) -> Scalar {
    raw_add(a, b).canonical()
}

/// a · b in canonical form; root exponents add mod 1 and τ-powers add.
pub fn scalar_mul(a: &Scalar, b: &Scalar) -> Scalar {
    raw_mul(a, b).canonical()
}

fn raw_add(a: &Scalar, b: &Scalar) -> Scalar {
    let mut terms = a.terms.clone();
    for (key, c) in &b.terms {
        let entry = terms.entry(key.clone()).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            terms.remove(key);
        }
    }
    Scalar { terms }
}

fn raw_mul(a: &Scalar, b: &Scalar) -> Scalar {
    let mut terms: BTreeMap<(Rational, u32), Rational> = BTreeMap::new();
    for ((q1, k1), c1) in &a.terms {
        for ((q2, k2), c2) in &b.terms {
            let key = (frac_part(&(q1 + q2)), k1 + k2);
            let entry = terms.entry(key.clone()).or_insert_with(Rational::zero);
            *entry += c1 * c2;
            if entry.is_zero() {
                terms.remove(&key);
            }
        }
    }
    Scalar { terms }
}

/// Multiplicative inverse.
///
/// τ-free nonzero scalars always invert. With `tau_bound = Some(T)` a scalar whose τ⁰ part is
/// nonzero inverts modulo τ^{T+1}; anything else is `NotInvertible`.
pub fn scalar_inverse(a: &Scalar, tau_bound: Option<u32>) -> Result<Scalar, ScalarError> {
    let head = a.tau_coefficient(0);
    if head.is_zero_elem() {
        return Err(ScalarError::NotInvertible(format!("{a}")));
    }
    let head_inv = Scalar::from_cyclo_tau(&head.inv_elem(), 0);
    if a.canonical().is_tau_free() {
        return Ok(head_inv);
    }
    let bound = tau_bound.ok_or_else(|| ScalarError::NotInvertible(format!("{a} (needs a tau truncation)")))?;
    // a = h (1 + t) with t τ-nilpotent modulo τ^{T+1}: a⁻¹ = h⁻¹ Σ (−t)^j.
    let rest = scalar_add(a, &Scalar::from_cyclo_tau(&head, 0).neg());
    let t = scalar_mul(&head_inv, &rest).truncate_tau(bound);
    let minus_t = t.neg();
    let mut acc = Scalar::one();
    let mut power = Scalar::one();
    for _ in 0..bound {
        power = scalar_mul(&power, &minus_t).truncate_tau(bound);
        acc = scalar_add(&acc, &power);
    }
    Ok(scalar_mul(&head_inv, &acc).truncate_tau(bound).canonical())
}

impl PartialEq for Scalar {
    fn eq(&self, o: &Self) -> bool {
        let top = self.tau_degree().max(o.tau_degree());
        match top {
            None => true,
            Some(top) => (0..=top).all(|k| self.tau_coefficient(k) == o.tau_coefficient(k)),
        }
    }
}

impl Eq for Scalar {}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|((q, k), c)| {
                let mut s = format_rational(c);
                if !q.is_zero() {
                    s.push_str(&format!("*e(2pi i*{})", format_rational(q)));
                }
                match k {
                    0 => {}
                    1 => s.push_str("*tau"),
                    _ => s.push_str(&format!("*tau^{k}")),
                }
                s
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn additive_and_multiplicative_basics() {
        let s = Scalar::term(rat(3, 2), rat(1, 5), 1);
        assert_eq!(scalar_add(&Scalar::zero(), &s), s);
        let minus_one = Scalar::root_of_unity(&rat(1, 2));
        assert!(scalar_add(&minus_one, &Scalar::one()).is_zero());
        let t = Scalar::tau_pow(1);
        assert_eq!(scalar_add(&t, &t.scale(&int(2))), t.scale(&int(3)));
        let z13 = Scalar::root_of_unity(&rat(1, 3));
        let z23 = Scalar::root_of_unity(&rat(2, 3));
        assert_eq!(scalar_mul(&z13, &z23), Scalar::one());
        assert_eq!(scalar_mul(&t, &t), Scalar::tau_pow(2));
        let half_i = Scalar::term(rat(1, 2), rat(1, 4), 0);
        assert_eq!(scalar_mul(&half_i, &Scalar::from_rational(int(2))), Scalar::root_of_unity(&rat(1, 4)));
    }

    #[test]
    fn inverses() {
        let z16 = Scalar::root_of_unity(&rat(1, 6));
        assert_eq!(scalar_inverse(&z16, None).unwrap(), Scalar::root_of_unity(&rat(5, 6)));
        assert_eq!(scalar_inverse(&Scalar::from_rational(int(2)), None).unwrap(), Scalar::from_rational(rat(1, 2)));
        assert!(matches!(scalar_inverse(&Scalar::tau_pow(1), Some(3)), Err(ScalarError::NotInvertible(_))));
        let unit = scalar_add(&Scalar::one(), &Scalar::tau_pow(1));
        let inv = scalar_inverse(&unit, Some(2)).unwrap();
        assert_eq!(scalar_mul(&unit, &inv).truncate_tau(2), Scalar::one());
        assert!(scalar_inverse(&unit, None).is_err());
    }

    #[test]
    fn cyclotomic_relations_are_respected() {
        let sum = scalar_add(
            &scalar_add(&Scalar::one(), &Scalar::root_of_unity(&rat(1, 3))),
            &Scalar::root_of_unity(&rat(2, 3)),
        );
        assert_eq!(sum, Scalar::zero());
        assert_eq!(Scalar::root_of_unity(&int(1)), Scalar::one());
    }

    #[test]
    fn coeff_round_trip() {
        let s = scalar_add(&Scalar::term(rat(2, 3), rat(1, 8), 2), &Scalar::root_of_unity(&rat(3, 4)));
        assert_eq!(Scalar::from_coeff(&s.to_coeff()).unwrap(), s);
    }
}
