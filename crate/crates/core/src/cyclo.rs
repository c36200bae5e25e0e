//! The cyclotomic field ℚ(ζ_L), stored as residues modulo the L-th cyclotomic polynomial.
//!
//! Elements of different orders are lifted to the lcm on every binary operation, so callers
//! never have to fix `L` up front.

use std::fmt;

use num_traits::{One, Zero};

use crate::rational::{frac_part, int, lcm_u64, Rational};

/// Minimal field interface shared by the dense polynomial helpers.
pub trait FieldElem: Clone + PartialEq + fmt::Debug {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn is_zero_elem(&self) -> bool;
    fn add_elem(&self, o: &Self) -> Self;
    fn sub_elem(&self, o: &Self) -> Self;
    fn mul_elem(&self, o: &Self) -> Self;
    /// Multiplicative inverse; the caller guarantees non-zero.
    fn inv_elem(&self) -> Self;
}

impl FieldElem for Rational {
    fn zero_like(&self) -> Self {
        Rational::zero()
    }
    fn one_like(&self) -> Self {
        Rational::one()
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
        self.recip()
    }
}

/// Dense univariate polynomial helpers (lowest degree first, no trailing zeros).
pub mod dense {
    use super::FieldElem;

    pub fn trim<F: FieldElem>(p: &mut Vec<F>) {
        while p.last().is_some_and(|c| c.is_zero_elem()) {
            p.pop();
        }
    }

    pub fn add<F: FieldElem>(a: &[F], b: &[F]) -> Vec<F> {
        let n = a.len().max(b.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(match (a.get(i), b.get(i)) {
                (Some(x), Some(y)) => x.add_elem(y),
                (Some(x), None) => x.clone(),
                (None, Some(y)) => y.clone(),
                (None, None) => unreachable!(),
            });
        }
        trim(&mut out);
        out
    }

    pub fn neg<F: FieldElem>(a: &[F]) -> Vec<F> {
        a.iter().map(|x| x.zero_like().sub_elem(x)).collect()
    }

    pub fn mul<F: FieldElem>(a: &[F], b: &[F]) -> Vec<F> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let z = a[0].zero_like();
        let mut out = vec![z; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero_elem() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                out[i + j] = out[i + j].add_elem(&x.mul_elem(y));
            }
        }
        trim(&mut out);
        out
    }

    pub fn scale<F: FieldElem>(a: &[F], c: &F) -> Vec<F> {
        let mut out: Vec<F> = a.iter().map(|x| x.mul_elem(c)).collect();
        trim(&mut out);
        out
    }

    /// Quotient and remainder; `b` must be non-empty.
    pub fn divrem<F: FieldElem>(a: &[F], b: &[F]) -> (Vec<F>, Vec<F>) {
        let mut r: Vec<F> = a.to_vec();
        trim(&mut r);
        if r.len() < b.len() {
            return (Vec::new(), r);
        }
        let lead_inv = b.last().unwrap().inv_elem();
        let z = b[0].zero_like();
        let mut q = vec![z; r.len() - b.len() + 1];
        while r.len() >= b.len() && !r.is_empty() {
            let shift = r.len() - b.len();
            let c = r.last().unwrap().mul_elem(&lead_inv);
            for (j, y) in b.iter().enumerate() {
                r[shift + j] = r[shift + j].sub_elem(&c.mul_elem(y));
            }
            q[shift] = c;
            r.pop();
            trim(&mut r);
        }
        trim(&mut q);
        (q, r)
    }

    /// Monic gcd.
    pub fn gcd<F: FieldElem>(a: &[F], b: &[F]) -> Vec<F> {
        let mut x = a.to_vec();
        let mut y = b.to_vec();
        trim(&mut x);
        trim(&mut y);
        while !y.is_empty() {
            let (_, r) = divrem(&x, &y);
            x = y;
            y = r;
        }
        make_monic(&x)
    }

    pub fn make_monic<F: FieldElem>(a: &[F]) -> Vec<F> {
        match a.last() {
            None => Vec::new(),
            Some(l) => {
                let inv = l.inv_elem();
                scale(a, &inv)
            }
        }
    }

    /// Inverse of `a` modulo `m` (assumes coprime); extended Euclid.
    pub fn inv_mod<F: FieldElem>(a: &[F], m: &[F]) -> Vec<F> {
        let one = m[0].one_like();
        let (mut r0, mut r1) = (m.to_vec(), a.to_vec());
        trim(&mut r1);
        let (mut t0, mut t1): (Vec<F>, Vec<F>) = (Vec::new(), vec![one]);
        while !r1.is_empty() {
            let (q, r) = divrem(&r0, &r1);
            let t2 = add(&t0, &neg(&mul(&q, &t1)));
            r0 = r1;
            r1 = r;
            t0 = t1;
            t1 = t2;
        }
        // r0 is a non-zero constant when coprime.
        let c = r0[0].inv_elem();
        let (_, out) = divrem(&scale(&t0, &c), m);
        out
    }
}

/// Euler totient.
fn totient(n: u64) -> u64 {
    let (mut n, mut out) = (n, n);
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            out -= out / p;
        }
        p += 1;
    }
    if n > 1 {
        out -= out / n;
    }
    out
}

/// Integer coefficients of the n-th cyclotomic polynomial.
fn cyclotomic_poly(n: u64) -> Vec<Rational> {
    // Φ_n = (x^n - 1) / Π_{d | n, d < n} Φ_d
    let mut num = vec![Rational::zero(); n as usize + 1];
    num[0] = -Rational::one();
    num[n as usize] = Rational::one();
    for d in 1..n {
        if n % d == 0 {
            let (q, _) = dense::divrem(&num, &cyclotomic_poly(d));
            num = q;
        }
    }
    num
}

fn modulus(order: u64) -> &'static [Rational] {
    use std::cell::RefCell;
    use std::collections::HashMap;
    // per-thread so that parallel reductions never contend on a lock; each order leaks once
    // per thread, which is bounded by the handful of orders in use
    thread_local! {
        static CACHE: RefCell<HashMap<u64, &'static [Rational]>> = RefCell::new(HashMap::new());
    }
    CACHE.with(|c| {
        *c.borrow_mut()
            .entry(order)
            .or_insert_with(|| Box::leak(cyclotomic_poly(order).into_boxed_slice()))
    })
}

/// Element of ℚ(ζ_order), `Σ coeffs[j] ζ^j` with `deg < φ(order)`.
#[derive(Clone)]
pub struct Cyclo {
    order: u64,
    coeffs: Vec<Rational>,
}

impl Cyclo {
    pub fn from_rational(q: Rational) -> Self {
        let mut coeffs = vec![q];
        dense::trim(&mut coeffs);
        Cyclo { order: 1, coeffs }
    }

    pub fn zero() -> Self {
        Cyclo { order: 1, coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::from_rational(Rational::one())
    }

    /// `e^{2πi q}` for rational `q`.
    pub fn root_of_unity(q: &Rational) -> Self {
        let q = frac_part(q);
        let order = crate::rational::denom_u64(&q);
        let k = (q * int(order as i64)).to_integer();
        let k: usize = k.try_into().expect("small exponent");
        let mut p = vec![Rational::zero(); k + 1];
        p[k] = Rational::one();
        Cyclo::reduce(order, p)
    }

    fn reduce(order: u64, mut p: Vec<Rational>) -> Self {
        if order.is_power_of_two() && order >= 2 {
            // Φ_{2^k} = x^{2^{k-1}} + 1: fold negacyclically
            let half = (order / 2) as usize;
            let mut k = p.len();
            while k > half {
                k -= 1;
                let c = std::mem::take(&mut p[k]);
                if !c.is_zero() {
                    let j = (k - half) % (2 * half);
                    let target = j % half;
                    if ((k - half) / half) % 2 == 0 {
                        p[target] -= c;
                    } else {
                        p[target] += c;
                    }
                }
            }
            p.truncate(half);
            dense::trim(&mut p);
            return Cyclo { order, coeffs: p }.normalized();
        }
        let m = modulus(order);
        let (_, mut r) = dense::divrem(&p, m);
        dense::trim(&mut r);
        Cyclo { order, coeffs: r }.normalized()
    }

    fn normalized(self) -> Self {
        if self.coeffs.len() <= 1 {
            Cyclo { order: 1, coeffs: self.coeffs }
        } else {
            self
        }
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// The rational value when the element lies in ℚ.
    pub fn as_rational(&self) -> Option<Rational> {
        match self.coeffs.len() {
            0 => Some(Rational::zero()),
            1 => Some(self.coeffs[0].clone()),
            _ => None,
        }
    }

    fn lift(&self, order: u64) -> Cyclo {
        if order == self.order {
            return self.clone();
        }
        let step = (order / self.order) as usize;
        let mut p = vec![Rational::zero(); self.coeffs.len().saturating_sub(1) * step + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            p[j * step] = c.clone();
        }
        Cyclo::reduce(order, p)
    }

    fn common(a: &Cyclo, b: &Cyclo) -> (Cyclo, Cyclo, u64) {
        if a.order == b.order {
            return (a.clone(), b.clone(), a.order);
        }
        let l = lcm_u64(a.order, b.order);
        (a.lift(l), b.lift(l), l)
    }

    pub fn degree_bound(&self) -> u64 {
        totient(self.order)
    }

    /// Decomposes into `(q, c)` pairs meaning `Σ c·e^{2πiq}`.
    pub fn terms(&self) -> Vec<(Rational, Rational)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, c)| (Rational::new((j as i64).into(), (self.order as i64).into()), c.clone()))
            .collect()
    }
}

impl PartialEq for Cyclo {
    fn eq(&self, o: &Self) -> bool {
        let (a, b, _) = Cyclo::common(self, o);
        a.coeffs == b.coeffs
    }
}

impl Eq for Cyclo {}

impl fmt::Debug for Cyclo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(q) = self.as_rational() {
            return write!(f, "{}", crate::rational::format_rational(&q));
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, c)| format!("{}*z{}^{}", crate::rational::format_rational(c), self.order, j))
            .collect();
        write!(f, "({})", parts.join(" + "))
    }
}

impl FieldElem for Cyclo {
    fn zero_like(&self) -> Self {
        Cyclo::zero()
    }
    fn one_like(&self) -> Self {
        Cyclo::one()
    }
    fn is_zero_elem(&self) -> bool {
        self.coeffs.is_empty()
    }
    fn add_elem(&self, o: &Self) -> Self {
        let (a, b, l) = Cyclo::common(self, o);
        Cyclo { order: l, coeffs: dense::add(&a.coeffs, &b.coeffs) }.normalized()
    }
    fn sub_elem(&self, o: &Self) -> Self {
        let (a, b, l) = Cyclo::common(self, o);
        Cyclo { order: l, coeffs: dense::add(&a.coeffs, &dense::neg(&b.coeffs)) }.normalized()
    }
    fn mul_elem(&self, o: &Self) -> Self {
        if self.order == 1 || o.order == 1 {
            let (r, other) = if self.order == 1 { (self, o) } else { (o, self) };
            let c = r.as_rational().unwrap();
            return Cyclo { order: other.order, coeffs: dense::scale(&other.coeffs, &c) }.normalized();
        }
        if self.order == o.order {
            return Cyclo::reduce(self.order, dense::mul(&self.coeffs, &o.coeffs));
        }
        let (a, b, l) = Cyclo::common(self, o);
        Cyclo::reduce(l, dense::mul(&a.coeffs, &b.coeffs))
    }
    fn inv_elem(&self) -> Self {
        if let Some(q) = self.as_rational() {
            return Cyclo::from_rational(q.recip());
        }
        let inv = dense::inv_mod(&self.coeffs, modulus(self.order));
        Cyclo { order: self.order, coeffs: inv }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn cyclotomic_polynomials() {
        assert_eq!(cyclotomic_poly(4), vec![int(1), int(0), int(1)]);
        assert_eq!(cyclotomic_poly(6), vec![int(1), int(-1), int(1)]);
        assert_eq!(totient(12), 4);
    }

    #[test]
    fn roots_of_unity_multiply() {
        let a = Cyclo::root_of_unity(&rat(1, 3));
        let b = Cyclo::root_of_unity(&rat(2, 3));
        assert_eq!(a.mul_elem(&b).as_rational(), Some(int(1)));
        let i = Cyclo::root_of_unity(&rat(1, 4));
        assert_eq!(i.mul_elem(&i).as_rational(), Some(int(-1)));
        // 1 + ζ3 + ζ3² = 0
        let s = Cyclo::one().add_elem(&a).add_elem(&b);
        assert!(s.is_zero_elem());
    }

    #[test]
    fn mixed_orders_lift() {
        let i = Cyclo::root_of_unity(&rat(1, 4));
        let w = Cyclo::root_of_unity(&rat(1, 6));
        let p = i.mul_elem(&w);
        assert_eq!(p, Cyclo::root_of_unity(&rat(5, 12)));
    }

    #[test]
    fn inverse() {
        let x = Cyclo::one().add_elem(&Cyclo::root_of_unity(&rat(1, 5)));
        let y = x.inv_elem();
        assert_eq!(x.mul_elem(&y), Cyclo::one());
    }
}
