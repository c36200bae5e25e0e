//! Formal log-Laurent series in one and several variables.
//!
//! A `LogSeries` is a finite sum Σ c_{e,k} x^e (log x)^k with rational powers e; the mode
//! convention x^{-n-1} is exposed through [`LogSeries::mode`]. A `MultiSeries` carries an
//! explicit region tag (the order of variable magnitudes) so that the two expansions of
//! (x₁ − x₂)^r can never be mixed by accident.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::SeriesError;
use crate::field::Coeff;
use crate::linalg::{SeriesCoeff, SparseMat};
use crate::rational::{binom, format_rational, int, inv_factorial, Rational};
use crate::scalar::Scalar;

/// A formal variable together with the branch of log it is read on.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub name: String,
    pub branch: i64,
}

impl Var {
    pub fn new(name: &str) -> Self {
        Var { name: name.to_string(), branch: 0 }
    }

    pub fn on_branch(name: &str, branch: i64) -> Self {
        Var { name: name.to_string(), branch }
    }
}

/// Closed interval of admissible powers of x.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub min: Rational,
    pub max: Rational,
}

impl Window {
    pub fn new(min: Rational, max: Rational) -> Self {
        Window { min, max }
    }

    pub fn contains(&self, e: &Rational) -> bool {
        &self.min <= e && e <= &self.max
    }

    fn intersect(a: &Option<Window>, b: &Option<Window>) -> Option<Window> {
        match (a, b) {
            (None, None) => None,
            (Some(w), None) | (None, Some(w)) => Some(w.clone()),
            (Some(x), Some(y)) => Some(Window::new(x.min.clone().max(y.min.clone()), x.max.clone().min(y.max.clone()))),
        }
    }
}

/// Σ c_{e,k} x^e (log x)^k.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSeries<V> {
    var: Var,
    terms: BTreeMap<(Rational, u32), V>,
    window: Option<Window>,
    log_bound: Option<u32>,
}

impl<V: SeriesCoeff> LogSeries<V> {
    pub fn new(var: Var) -> Self {
        LogSeries { var, terms: BTreeMap::new(), window: None, log_bound: None }
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = Some(window);
        self
    }

    pub fn with_log_bound(mut self, bound: u32) -> Self {
        self.log_bound = Some(bound);
        self
    }

    pub fn var(&self) -> &Var {
        &self.var
    }

    pub fn window(&self) -> Option<&Window> {
        self.window.as_ref()
    }

    pub fn log_bound(&self) -> Option<u32> {
        self.log_bound
    }

    /// c · x^e (log x)^k.
    pub fn monomial(var: Var, power: Rational, log: u32, c: V) -> Self {
        let mut s = LogSeries::new(var);
        s.push(power, log, &c);
        s
    }

    fn push(&mut self, power: Rational, log: u32, c: &V) {
        if SeriesCoeff::is_zero(c) {
            return;
        }
        let key = (power, log);
        match self.terms.get_mut(&key) {
            Some(e) => {
                *e = e.add(c);
                if SeriesCoeff::is_zero(e) {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, c.clone());
            }
        }
    }

    /// Adds c · x^e (log x)^k, enforcing the window and the log bound.
    pub fn add_term(&mut self, power: Rational, log: u32, c: &V) -> Result<(), SeriesError> {
        if let Some(b) = self.log_bound {
            if log > b && !SeriesCoeff::is_zero(c) {
                return Err(SeriesError::LogBoundExceeded { power: log, bound: b });
            }
        }
        if let Some(w) = &self.window {
            if !w.contains(&power) {
                return Err(SeriesError::WindowOverflow {
                    exponent: format_rational(&power),
                    min: format_rational(&w.min),
                    max: format_rational(&w.max),
                });
            }
        }
        self.push(power, log, c);
        Ok(())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Rational, u32, &V)> {
        self.terms.iter().map(|((e, k), c)| (e, *k, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest power of log x present.
    pub fn max_log_power(&self) -> u32 {
        self.terms.keys().map(|(_, k)| *k).max().unwrap_or(0)
    }

    /// Coefficient of x^e (log x)^k.
    pub fn coefficient(&self, power: &Rational, log: u32) -> Option<&V> {
        self.terms.get(&(power.clone(), log))
    }

    /// Coefficient of x^{-n-1} (log x)^k.
    pub fn mode(&self, n: &Rational, log: u32) -> Option<&V> {
        self.coefficient(&(-n - Rational::one()), log)
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        if self.var != other.var {
            return Err(SeriesError::VariableMismatch);
        }
        let mut out = self.clone();
        out.window = Window::intersect(&self.window, &other.window);
        for ((e, k), c) in &other.terms {
            out.push(e.clone(), *k, c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Coeff) -> Self {
        let mut out = LogSeries { terms: BTreeMap::new(), ..self.clone() };
        for ((e, k), v) in &self.terms {
            out.push(e.clone(), *k, &v.scale(c));
        }
        out
    }

    /// d/dx, with d/dx x^e (log x)^k = e x^{e-1} (log x)^k + k x^{e-1} (log x)^{k-1}.
    pub fn derivative(&self) -> Self {
        let mut out = LogSeries { terms: BTreeMap::new(), ..self.clone() };
        if let Some(w) = &out.window {
            out.window = Some(Window::new(&w.min - Rational::one(), &w.max - Rational::one()));
        }
        for ((e, k), c) in &self.terms {
            let p = e - Rational::one();
            out.push(p.clone(), *k, &c.scale(&Coeff::from_rational(e.clone())));
            if *k > 0 {
                out.push(p, k - 1, &c.scale(&Coeff::from_i64(*k as i64)));
            }
        }
        out
    }

    /// Re-reads the series on branch `to`: log x ↦ log x + Δτ and x^e ↦ e^{2πieΔ} x^e.
    pub fn branch_substitute(&self, to: i64, tau_bound: u32) -> Result<Self, SeriesError> {
        let delta = to - self.var.branch;
        let mut out = LogSeries { terms: BTreeMap::new(), var: Var { branch: to, ..self.var.clone() }, ..self.clone() };
        if delta == 0 {
            out.terms = self.terms.clone();
            return Ok(out);
        }
        for ((e, k), c) in &self.terms {
            let phase = Scalar::root_of_unity(&(e * int(delta)));
            // (log x + Δτ)^k = Σ_j C(k, j) (Δτ)^{k-j} (log x)^j
            for j in 0..=*k {
                let shift = k - j;
                if shift > tau_bound {
                    return Err(SeriesError::Scalar(crate::error::ScalarError::TauOverflow { power: shift, bound: tau_bound }));
                }
                let weight = binom(&int(*k as i64), shift as u64) * num_traits::pow(int(delta), shift as usize);
                let factor = crate::scalar::scalar_mul(&phase, &Scalar::term(weight, Rational::zero(), shift));
                out.push(e.clone(), j, &c.scale(&factor.to_coeff()));
            }
        }
        Ok(out)
    }

    /// Truncates to the given window.
    pub fn restrict(&self, window: &Window) -> Self {
        LogSeries {
            terms: self.terms.iter().filter(|((e, _), _)| window.contains(e)).map(|(k, v)| (k.clone(), v.clone())).collect(),
            window: Window::intersect(&self.window, &Some(window.clone())),
            ..self.clone()
        }
    }
}

/// Cauchy product of a scalar series with a V-valued one; terms leave through the intersected window.
pub fn series_mul<V: SeriesCoeff>(a: &LogSeries<Coeff>, b: &LogSeries<V>) -> Result<LogSeries<V>, SeriesError> {
    if a.var != b.var {
        return Err(SeriesError::VariableMismatch);
    }
    let window = Window::intersect(&a.window, &b.window);
    let log_bound = match (a.log_bound, b.log_bound) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    };
    let mut out = LogSeries { var: b.var.clone(), terms: BTreeMap::new(), window: window.clone(), log_bound };
    for ((e1, k1), c1) in &a.terms {
        for ((e2, k2), c2) in &b.terms {
            let e = e1 + e2;
            if window.as_ref().map_or(true, |w| w.contains(&e)) {
                out.add_term(e, k1 + k2, &c2.scale(c1))?;
            }
        }
    }
    Ok(out)
}

/// Coefficient of x^{-1} (log x)^0; zero when absent.
pub fn residue<V: SeriesCoeff>(a: &LogSeries<V>, zero: V) -> V {
    a.coefficient(&-Rational::one(), 0).cloned().unwrap_or(zero)
}

/// A nilpotent operator on a graded slot, with its nilpotency index κ (N^κ = 0).
#[derive(Clone, Debug)]
pub struct NilpotentOp {
    matrix: SparseMat,
    index: u32,
}

impl NilpotentOp {
    /// Computes the nilpotency index; `None` if N^dim ≠ 0.
    pub fn new(matrix: SparseMat) -> Option<Self> {
        let n = matrix.rows();
        assert_eq!(n, matrix.cols(), "nilpotent operator must be square");
        let mut power = SparseMat::identity(n);
        for k in 0..=n as u32 {
            if power.is_zero() {
                return Some(NilpotentOp { matrix, index: k });
            }
            power = matrix.mul(&power);
        }
        None
    }

    pub fn matrix(&self) -> &SparseMat {
        &self.matrix
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    /// x^{sN} = Σ_{j<κ} (s N log x)^j / j!, as an operator-valued series in log x.
    pub fn exp_log(&self, var: &Var, sign: i64) -> LogSeries<SparseMat> {
        let n = self.matrix.rows();
        let mut out = LogSeries::new(var.clone());
        let mut power = SparseMat::identity(n);
        for j in 0..self.index.max(1) {
            let c = inv_factorial(j as u64) * num_traits::pow(int(sign), j as usize);
            out.push(Rational::zero(), j, &power.scaled(&Coeff::from_rational(c)));
            power = self.matrix.mul(&power);
        }
        out
    }
}

/// Which side(s) the exponential x^{±N} multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NilpotentAction {
    /// x^{sign·N} · f
    Left(i64),
    /// f · x^{sign·N}
    Right(i64),
    /// x^{-N} · f · x^{N}
    Conjugate,
}

fn op_series_mul(a: &LogSeries<SparseMat>, b: &LogSeries<SparseMat>) -> LogSeries<SparseMat> {
    let mut out = LogSeries { terms: BTreeMap::new(), ..b.clone() };
    for ((e1, k1), m1) in &a.terms {
        for ((e2, k2), m2) in &b.terms {
            out.push(e1 + e2, k1 + k2, &m1.mul(m2));
        }
    }
    out
}

/// Multiplies an operator-valued field series by the finite exponentials of `op`.
/// Log powers grow by at most κ − 1 per exponential.
pub fn nilpotent_conjugate(f: &LogSeries<SparseMat>, op: &NilpotentOp, action: NilpotentAction) -> LogSeries<SparseMat> {
    match action {
        NilpotentAction::Left(s) => op_series_mul(&op.exp_log(&f.var, s), f),
        NilpotentAction::Right(s) => op_series_mul(f, &op.exp_log(&f.var, s)),
        NilpotentAction::Conjugate => {
            op_series_mul(&op_series_mul(&op.exp_log(&f.var, -1), f), &op.exp_log(&f.var, 1))
        }
    }
}

/// Exponent tuple: one (power, log power) pair per variable.
pub type Monomial = Vec<(Rational, u32)>;

/// Multi-variable log-Laurent series expanded in a declared region.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSeries<V> {
    vars: Vec<Var>,
    /// Variable indices in decreasing order of magnitude.
    region: Vec<usize>,
    terms: BTreeMap<Monomial, V>,
}

/// Which variable of a pair is the larger one in the expansion region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    FirstLarger,
    SecondLarger,
}

impl<V: SeriesCoeff> MultiSeries<V> {
    pub fn new(vars: Vec<Var>, region: Vec<usize>) -> Self {
        assert_eq!(vars.len(), region.len(), "region must order every variable");
        MultiSeries { vars, region, terms: BTreeMap::new() }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn region(&self) -> &[usize] {
        &self.region
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &V)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> Option<&V> {
        self.terms.get(m)
    }

    pub fn add_term(&mut self, m: Monomial, c: &V) {
        assert_eq!(m.len(), self.vars.len(), "monomial arity mismatch");
        if SeriesCoeff::is_zero(c) {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(e) => {
                *e = e.add(c);
                if SeriesCoeff::is_zero(e) {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c.clone());
            }
        }
    }

    fn compatible(&self, other_vars: &[Var], other_region: &[usize]) -> Result<(), SeriesError> {
        if self.vars != other_vars {
            return Err(SeriesError::VariableMismatch);
        }
        if self.region != other_region {
            return Err(SeriesError::RegionMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.compatible(&other.vars, &other.region)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Coeff) -> Self {
        let mut out = MultiSeries::new(self.vars.clone(), self.region.clone());
        for (m, v) in &self.terms {
            out.add_term(m.clone(), &v.scale(c));
        }
        out
    }

    /// Keeps only the terms accepted by `keep`.
    pub fn filter(&self, keep: impl Fn(&Monomial) -> bool) -> Self {
        MultiSeries {
            terms: self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, v)| (m.clone(), v.clone())).collect(),
            ..self.clone()
        }
    }

    /// Largest log power of variable `i`.
    pub fn max_log_power(&self, i: usize) -> u32 {
        self.terms.keys().map(|m| m[i].1).max().unwrap_or(0)
    }
}

/// Product of a scalar multi-series with a V-valued one (same variables and region).
pub fn multi_mul<V: SeriesCoeff>(a: &MultiSeries<Coeff>, b: &MultiSeries<V>) -> Result<MultiSeries<V>, SeriesError> {
    b.compatible(&a.vars, &a.region)?;
    let mut out = MultiSeries::new(b.vars.clone(), b.region.clone());
    for (m1, c1) in &a.terms {
        for (m2, c2) in &b.terms {
            let m: Monomial = m1.iter().zip(m2).map(|((e1, k1), (e2, k2))| (e1 + e2, k1 + k2)).collect();
            out.add_term(m, &c2.scale(c1));
        }
    }
    Ok(out)
}

fn unit_monomial(arity: usize) -> Monomial {
    vec![(Rational::zero(), 0); arity]
}

/// Expansion of (x_i − x_j)^r in the given region, up to `order` terms.
///
/// For |x_i| > |x_j| this is Σ_k C(r,k) x_i^{r−k} (−x_j)^k. For |x_j| > |x_i| it is the series of
/// (−x_j + x_i)^r = e^{πir} x_j^r (1 − x_i/x_j)^r, so the two expansions differ by the explicit
/// root of unity e^{πir} and never by an implicit branch choice.
pub fn binomial_expand(
    r: &Rational,
    vars: &[Var],
    pair: (usize, usize),
    region: Region,
    order: usize,
) -> MultiSeries<Coeff> {
    let (i, j) = pair;
    let region_order: Vec<usize> = match region {
        Region::FirstLarger => order_with(vars.len(), i, j),
        Region::SecondLarger => order_with(vars.len(), j, i),
    };
    let mut out = MultiSeries::new(vars.to_vec(), region_order);
    let finite = r.is_integer() && r >= &Rational::zero();
    let limit = if finite { order.min(crate::rational::to_i64(r).unwrap() as usize + 1) } else { order };
    let phase = match region {
        Region::FirstLarger => Coeff::one(),
        Region::SecondLarger => Scalar::exp_pi_i(r).to_coeff(),
    };
    for k in 0..limit {
        let c = binom(r, k as u64) * crate::rational::sign(k as u64);
        if c.is_zero() {
            continue;
        }
        let mut m = unit_monomial(vars.len());
        let (big, small) = match region {
            Region::FirstLarger => (i, j),
            Region::SecondLarger => (j, i),
        };
        m[big].0 = r - int(k as i64);
        m[small].0 = int(k as i64);
        out.add_term(m, &(&phase * &Coeff::from_rational(c)));
    }
    out
}

/// log(1 − x_small/x_big) = −Σ_{k≥1} (x_small/x_big)^k / k, up to `order` terms.
pub fn log_one_minus(vars: &[Var], big: usize, small: usize, order: usize, region: Vec<usize>) -> MultiSeries<Coeff> {
    let mut out = MultiSeries::new(vars.to_vec(), region);
    for k in 1..order.max(1) {
        let mut m = unit_monomial(vars.len());
        m[big].0 = int(-(k as i64));
        m[small].0 = int(k as i64);
        out.add_term(m, &Coeff::from_rational(-Rational::new(1.into(), (k as i64).into())));
    }
    out
}

fn order_with(n: usize, first: usize, second: usize) -> Vec<usize> {
    let mut order = vec![first, second];
    order.extend((0..n).filter(|v| *v != first && *v != second));
    order
}

/// A multi-series certified to be a Laurent polynomial (in powers, with log factors).
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentPolynomial<V> {
    pub series: MultiSeries<V>,
    /// Powers of the leading variable below this bound were outside the trusted window.
    pub trusted_min: Option<Rational>,
}

/// Multiplies `corr` by Π (x_i − x_j)^{e_ij} in `corr`'s region and certifies the result.
///
/// `trusted_min` is the smallest power of the region's leading variable at which `corr` is
/// complete. Clearing factors lower that bound by e_ij; terms below it are discarded and any
/// surviving term within one unit of it means the poles were not cleared (or the truncation
/// is too small), reported as `NotPolynomial`.
pub fn pole_clear_normal_form<V: SeriesCoeff>(
    corr: &MultiSeries<V>,
    clearing: &[((usize, usize), Rational)],
    trusted_min: Option<Rational>,
) -> Result<LaurentPolynomial<V>, SeriesError> {
    let lead = corr.region[0];
    let mut acc = corr.clone();
    let mut bound = trusted_min;
    for ((i, j), e) in clearing {
        let region = if corr.region.iter().position(|v| v == i) < corr.region.iter().position(|v| v == j) {
            Region::FirstLarger
        } else {
            Region::SecondLarger
        };
        let span = acc
            .terms
            .keys()
            .map(|m| m[lead].0.clone())
            .fold(None::<(Rational, Rational)>, |acc, p| match acc {
                None => Some((p.clone(), p)),
                Some((lo, hi)) => Some((lo.min(p.clone()), hi.max(p))),
            });
        let order = match (&span, &bound) {
            (Some((_, hi)), Some(b)) => crate::rational::ceil_i64(&(hi - b + e)).max(0) as usize + 2,
            (Some((lo, hi)), None) => crate::rational::ceil_i64(&(hi - lo)).max(0) as usize + 2,
            _ => 1,
        };
        let factor = binomial_expand(e, &corr.vars, (*i, *j), region, order);
        let factor = MultiSeries { region: corr.region.clone(), ..factor };
        acc = multi_mul(&factor, &acc)?;
        if let Some(b) = &bound {
            if *i == lead || *j == lead {
                bound = Some(b + e);
            }
        }
    }
    if let Some(b) = &bound {
        acc = acc.filter(|m| &m[lead].0 >= b);
        let edge = b + Rational::one();
        if let Some((m, _)) = acc.terms.iter().find(|(m, _)| m[lead].0 < edge) {
            return Err(SeriesError::NotPolynomial(format!(
                "term with {}^{} persists at the truncation boundary",
                corr.vars[lead].name,
                format_rational(&m[lead].0)
            )));
        }
    }
    Ok(LaurentPolynomial { series: acc, trusted_min: bound })
}

/// Expands (z + ξ)^e (log(z + ξ))^l in |z| > |ξ| up to ξ^{order-1}; variables are (z, ξ).
///
/// log(z + ξ) = log z + log(1 + ξ/z).
pub fn shifted_power(e: &Rational, l: u32, order: usize) -> BTreeMap<(Rational, u32, i64), Coeff> {
    // (1 + y)^e = Σ C(e,k) y^k ; log(1 + y) = Σ_{k≥1} (−1)^{k+1} y^k / k ; y = ξ/z.
    let trunc = |p: &mut BTreeMap<i64, Rational>| p.retain(|k, c| (*k as usize) < order && !c.is_zero());
    let mut base: BTreeMap<i64, Rational> = (0..order as i64).map(|k| (k, binom(e, k as u64))).collect();
    trunc(&mut base);
    let log1p: BTreeMap<i64, Rational> =
        (1..order as i64).map(|k| (k, crate::rational::sign((k + 1) as u64) / int(k))).collect();
    let mul = |a: &BTreeMap<i64, Rational>, b: &BTreeMap<i64, Rational>| {
        let mut out: BTreeMap<i64, Rational> = BTreeMap::new();
        for (ka, ca) in a {
            for (kb, cb) in b {
                if ((ka + kb) as usize) < order {
                    *out.entry(ka + kb).or_insert_with(Rational::zero) += ca * cb;
                }
            }
        }
        out.retain(|_, c| !c.is_zero());
        out
    };
    let mut out: BTreeMap<(Rational, u32, i64), Coeff> = BTreeMap::new();
    // (log z + L)^l = Σ_s C(l,s) (log z)^{l−s} L^s
    let mut lpow: BTreeMap<i64, Rational> = [(0, Rational::one())].into_iter().collect();
    for s in 0..=l {
        let c = binom(&int(l as i64), s as u64);
        for (k, v) in mul(&base, &lpow) {
            let key = (e - int(k), l - s, k);
            let val = Coeff::from_rational(&c * &v);
            let entry = out.entry(key).or_default();
            *entry = &*entry + &val;
        }
        lpow = mul(&lpow, &log1p);
    }
    out.retain(|_, c| !c.is_zero());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn x() -> Var {
        Var::new("x")
    }

    fn mono(e: Rational, k: u32, c: i64) -> LogSeries<Coeff> {
        LogSeries::monomial(x(), e, k, Coeff::from_i64(c))
    }

    #[test]
    fn products_of_monomials() {
        let a = mono(int(-1), 0, 1);
        assert_eq!(series_mul(&a, &a).unwrap(), mono(int(-2), 0, 1));
        let l = mono(int(0), 1, 1);
        assert_eq!(series_mul(&l, &l).unwrap(), mono(int(0), 2, 1));
        let p = mono(int(0), 0, 1).add(&mono(int(1), 0, 1)).unwrap();
        let m = mono(int(0), 0, 1).add(&mono(int(1), 0, -1)).unwrap();
        assert_eq!(series_mul(&p, &m).unwrap(), mono(int(0), 0, 1).add(&mono(int(2), 0, -1)).unwrap());
    }

    #[test]
    fn residues() {
        assert_eq!(residue(&mono(int(-1), 0, 1), Coeff::zero()), Coeff::one());
        let s = mono(int(-2), 0, 1).add(&mono(int(-1), 0, 3)).unwrap();
        assert_eq!(residue(&s, Coeff::zero()), Coeff::from_i64(3));
        let f = mono(int(-3), 0, 2).add(&mono(int(4), 1, 1)).unwrap().add(&mono(rat(1, 2), 0, 5)).unwrap();
        assert_eq!(residue(&f.derivative(), Coeff::zero()), Coeff::zero());
    }

    #[test]
    fn branch_substitution_examples() {
        let half = mono(rat(1, 2), 0, 1);
        assert_eq!(half.branch_substitute(0, 2).unwrap(), half);
        assert_eq!(half.branch_substitute(1, 2).unwrap().coefficient(&rat(1, 2), 0), Some(&Coeff::from_i64(-1)));
        let log = mono(int(0), 1, 1);
        let shifted = log.branch_substitute(1, 2).unwrap();
        assert_eq!(shifted.coefficient(&int(0), 1), Some(&Coeff::one()));
        assert_eq!(shifted.coefficient(&int(0), 0), Some(&Coeff::tau_pow(1)));
        assert!(mono(int(0), 3, 1).branch_substitute(1, 2).is_err());
    }

    #[test]
    fn binomial_integer_and_geometric() {
        let vars = vec![Var::new("x1"), Var::new("x2")];
        let sq = binomial_expand(&int(2), &vars, (0, 1), Region::FirstLarger, 10);
        assert_eq!(sq.len(), 3);
        assert_eq!(sq.coefficient(&vec![(int(1), 0), (int(1), 0)]), Some(&Coeff::from_i64(-2)));
        let geo = binomial_expand(&int(-1), &vars, (0, 1), Region::FirstLarger, 5);
        for j in 0..5 {
            assert_eq!(geo.coefficient(&vec![(int(-1 - j), 0), (int(j), 0)]), Some(&Coeff::one()));
        }
        let other = binomial_expand(&int(1), &vars, (0, 1), Region::SecondLarger, 5);
        // (−x2 + x1) = −x2 + x1 as a polynomial
        assert_eq!(other.coefficient(&vec![(int(0), 0), (int(1), 0)]), Some(&Coeff::from_i64(-1)));
        assert_eq!(other.coefficient(&vec![(int(1), 0), (int(0), 0)]), Some(&Coeff::one()));
    }

    #[test]
    fn geometric_series_clears_to_one() {
        let vars = vec![Var::new("x1"), Var::new("x2")];
        let geo = binomial_expand(&int(-1), &vars, (0, 1), Region::FirstLarger, 6);
        let cleared = pole_clear_normal_form(&geo, &[((0, 1), int(1))], Some(int(-6))).unwrap();
        assert_eq!(cleared.series.len(), 1);
        assert_eq!(cleared.series.coefficient(&vec![(int(0), 0), (int(0), 0)]), Some(&Coeff::one()));
        assert!(pole_clear_normal_form(&geo, &[], Some(int(-6))).is_err());
    }

    #[test]
    fn nilpotent_conjugation_of_a_single_mode() {
        use crate::linalg::SparseVec;
        // basis: 0 = a, 1 = b inside an operator algebra realised on C^3 by shift matrices
        // N = E_{21}; A = E_{10}, so [N, A] = E_{20} =: B, [N, B] = 0.
        let e = |i: usize, j: usize| {
            let mut m = SparseMat::zero(3, 3);
            m.set_col(j, SparseVec::unit(i));
            m
        };
        let n = NilpotentOp::new(e(2, 1)).unwrap();
        assert_eq!(n.index(), 2);
        let a = e(1, 0);
        let b = n.matrix().mul(&a).sub(&a.mul(n.matrix()));
        let f = LogSeries::monomial(x(), int(0), 0, a.clone());
        let g = nilpotent_conjugate(&f, &n, NilpotentAction::Conjugate);
        assert_eq!(g.coefficient(&int(0), 0), Some(&a));
        assert_eq!(g.coefficient(&int(0), 1), Some(&b.scaled(&Coeff::from_i64(-1))));
        let zero = NilpotentOp::new(SparseMat::zero(3, 3)).unwrap();
        assert_eq!(nilpotent_conjugate(&f, &zero, NilpotentAction::Conjugate), f);
    }

    #[test]
    fn shifted_power_matches_binomial() {
        let t = shifted_power(&int(2), 0, 5);
        assert_eq!(t.len(), 3);
        assert_eq!(t.get(&(int(1), 0, 1)), Some(&Coeff::from_i64(2)));
        let l = shifted_power(&int(0), 1, 3);
        assert_eq!(l.get(&(int(0), 1, 0)), Some(&Coeff::one()));
        assert_eq!(l.get(&(int(-1), 0, 1)), Some(&Coeff::one()));
        assert_eq!(l.get(&(int(-2), 0, 2)), Some(&Coeff::from_rational(rat(-1, 2))));
    }
}
