//! Direct check of the generalized weak commutativity between the generator fields and the ψ
//! fields of a universal module:
//!
//!   (x₁−x₂)^{r} (x₁−x₂)^{N_g} φ_W(x₁) (x₁−x₂)^{−N_g} ψ_W(x₂) u
//!     = (−x₂+x₁)^{r} (±) ψ_W(x₂) (−x₂+x₁)^{N_g} φ(x₁) (−x₂+x₁)^{−N_g} u,
//!
//! with r = α_i + M. The left side is expanded in |x₁| > |x₂| using the module's stored log
//! modes of φ_W, the right side in |x₂| > |x₁| using the vertex operators of V, with
//! ψ_W(x)u = Σ ψ_{n,0}(x^{−N_g}u) x^{−n−1}. Both are compared coefficientwise in
//! x₁, x₂, log x₁ and log x₂.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use crate::field::Coeff;
use crate::linalg::SparseVec;
use crate::rational::{binom, ceil_i64, floor_i64, format_rational, int, inv_factorial, sign, Rational};
use crate::report::CheckResult;
use crate::universal::UniversalModule;

/// log-power pair (log x₁, log x₂) → module vector.
type LogCoefficients = BTreeMap<(u32, u32), SparseVec>;

fn add_into(acc: &mut LogCoefficients, key: (u32, u32), c: &Coeff, v: &SparseVec) {
    if c.is_zero() || v.is_zero() {
        return;
    }
    let slot = acc.entry(key).or_default();
    slot.axpy(c, v);
    if slot.is_zero() {
        acc.remove(&key);
    }
}

/// [y^s] (1−y)^r log(1−y)^q / q! for s < len.
fn binomial_log_series(r: &Rational, q: usize, len: usize) -> Vec<Rational> {
    let mut out: Vec<Rational> = (0..len as u64).map(|s| binom(r, s) * sign(s)).collect();
    let log: Vec<Rational> = (0..len).map(|s| if s == 0 { Rational::zero() } else { -Rational::one() / int(s as i64) }).collect();
    for _ in 0..q {
        let mut next = vec![Rational::zero(); len];
        for (s, a) in out.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (t, b) in log.iter().enumerate().take(len - s) {
                if !b.is_zero() {
                    next[s + t] += a * b;
                }
            }
        }
        out = next;
    }
    let scale = inv_factorial(q as u64);
    out.into_iter().map(|c| c * &scale).collect()
}

struct Sides<'a> {
    universal: &'a UniversalModule,
    /// ψ^a_{n,0} e_b in the module basis; `None` when outside the truncation.
    psi_cache: HashMap<(usize, Rational, usize), Option<SparseVec>>,
}

impl<'a> Sides<'a> {
    fn psi(&mut self, a: usize, n: &Rational, y: &SparseVec) -> Option<SparseVec> {
        let mut out = SparseVec::new();
        for (b, c) in y.iter() {
            let key = (a, n.clone(), b);
            if !self.psi_cache.contains_key(&key) {
                let value = self.universal.psi(a, n, &SparseVec::unit(b));
                self.psi_cache.insert(key.clone(), value);
            }
            out.axpy(c, self.psi_cache[&key].as_ref()?);
        }
        Some(out)
    }

    /// ψ_W(x₂) y at x₂^{−n−1}: (log x₂ power, vector) pairs.
    fn psi_logs(&mut self, a: usize, n: &Rational, y: &SparseVec) -> Option<Vec<(u32, SparseVec)>> {
        let nil = &self.universal.algebra().space.nil;
        let mut out = Vec::new();
        let mut power = y.clone();
        let mut l = 0u64;
        while !power.is_zero() {
            let c = Coeff::from_rational(sign(l) * inv_factorial(l));
            out.push((l as u32, self.psi(a, n, &power)?.scaled(&c)));
            power = nil.apply(&power);
            l += 1;
        }
        Some(out)
    }
}

fn orbit(universal: &UniversalModule, i: usize) -> Vec<usize> {
    let v = universal.algebra();
    let mut o = vec![i];
    while let Some(n) = v.nil_image(*o.last().unwrap()) {
        o.push(n);
    }
    o
}

/// Smallest r ∈ α_i + ℤ_{>0} exceeding wt φ − 1 + wt w^a − B.
fn pole_order(universal: &UniversalModule, i: usize, a: usize) -> Rational {
    let g = &universal.algebra().generators[i];
    let bound = &g.weight - Rational::one() + &universal.seed.vectors[a].weight - &universal.module.lower_bound - &g.g_weight;
    &g.g_weight + int((floor_i64(&bound) + 1).max(1))
}

#[allow(clippy::too_many_arguments)]
fn left_side(
    sides: &mut Sides<'_>,
    i: usize,
    a: usize,
    u: usize,
    r: &Rational,
    e1: &Rational,
    e2: &Rational,
    e2_min: &Rational,
) -> Option<LogCoefficients> {
    let m = &sides.universal.module;
    let s_max = floor_i64(&(e2 - e2_min));
    let len = (s_max + 1).max(0) as usize;
    let orbit = orbit(sides.universal, i);
    let mut acc = LogCoefficients::new();
    let unit = SparseVec::unit(u);
    for s in 0..=s_max {
        let n = int(s) - e2 - Rational::one();
        let p = r - e1 - int(s) - Rational::one();
        let psis = sides.psi_logs(a, &n, &unit)?;
        for (j, &gen) in orbit.iter().enumerate() {
            for q in 0..=j {
                let d = binomial_log_series(r, q, len)[s as usize].clone();
                if d.is_zero() {
                    continue;
                }
                let d = Coeff::from_rational(d * inv_factorial((j - q) as u64));
                for (l, y) in &psis {
                    for k in 0..=m.field_log_depth(gen) {
                        let x = m.apply_field_mode(gen, &p, k, y)?;
                        add_into(&mut acc, ((j - q) as u32 + k, *l), &d, &x);
                    }
                }
            }
        }
    }
    Some(acc)
}

fn right_side(sides: &mut Sides<'_>, i: usize, a: usize, u: usize, r: &Rational, e1: &Rational, e2: &Rational) -> Option<LogCoefficients> {
    let v = sides.universal.algebra();
    let space = &v.space;
    let parity = v.generators[i].parity * sides.universal.seed.vectors[a].parity;
    let mut front = Coeff::root_of_unity(&(r / int(2)));
    if parity == 1 {
        front = -front;
    }
    let half_tau = Coeff::tau_pow(1) * Coeff::from_rational(crate::rational::rat(1, 2));
    // φ_m u = 0 once wt u + wt φ − m − 1 < 0
    let s_max = floor_i64(&(e1 + space.weight(u) + &v.generators[i].weight));
    let len = (s_max + 1).max(0) as usize;
    let orbit = orbit(sides.universal, i);
    let unit = SparseVec::unit(u);
    let mut acc = LogCoefficients::new();
    for s in 0..=s_max {
        let mode = int(s) - e1 - Rational::one();
        let n = r - int(s) - e2 - Rational::one();
        for (j, &gen) in orbit.iter().enumerate() {
            let y = space.apply_mode(gen, &mode, &unit)?;
            if y.is_zero() {
                continue;
            }
            let psis = sides.psi_logs(a, &n, &y)?;
            // (πi + log x₂ + log(1 − x₁/x₂))^j / j!
            for j1 in 0..=j {
                for j2 in 0..=(j - j1) {
                    let j3 = j - j1 - j2;
                    let d = binomial_log_series(r, j3, len)[s as usize].clone();
                    if d.is_zero() {
                        continue;
                    }
                    let c = Coeff::from_rational(d * inv_factorial(j1 as u64) * inv_factorial(j2 as u64))
                        * half_tau.pow(j1 as u32)
                        * &front;
                    for (l, x) in &psis {
                        add_into(&mut acc, (0, j2 as u32 + *l), &c, x);
                    }
                }
            }
        }
    }
    Some(acc)
}

/// Compares both sides of the φψ identity for every generator, seed vector and V basis vector
/// of weight ≤ `max_vector_weight`, at every coefficient the truncation determines.
pub fn check_psi_locality(universal: &UniversalModule, max_vector_weight: &Rational) -> CheckResult {
    let mut check = CheckResult::new("generalized weak commutativity of phi_W with psi_W");
    let v = universal.algebra();
    let space = &v.space;
    let (lower, cutoff) = (universal.module.lower_bound.clone(), universal.module.cutoff.clone());
    let mut sides = Sides { universal, psi_cache: HashMap::new() };
    for i in 0..v.generators.len() {
        let wt_phi = v.generators[i].weight.clone();
        for a in 0..universal.seed.dim() {
            let wt_a = universal.seed.vectors[a].weight.clone();
            let r = pole_order(universal, i, a);
            for u in 0..space.dim() {
                let wt_u = space.weight(u).clone();
                if wt_u > *max_vector_weight {
                    continue;
                }
                // x₂ exponents −n−1 with n ∈ β_u + ℤ, from the lowest nonzero ψ mode up to the
                // top the truncation can hold
                let beta = space.slot(u).g_class.clone();
                let e2_lo = &lower - &wt_a - &wt_u;
                let e2_hi = &cutoff - &wt_a - &wt_u;
                let k_lo = ceil_i64(&(&e2_lo + &beta));
                let k_hi = floor_i64(&(&e2_hi + &beta));
                for k2 in k_lo..=k_hi {
                    let e2 = int(k2) - &beta;
                    let e2_min = int(k_lo) - &beta;
                    // output weight wt a + wt u + wt φ + E₁ + E₂ − r inside [B, Λ]
                    let base = &wt_a + &wt_u + &wt_phi + &e2 - &r;
                    for e1 in ceil_i64(&(&lower - &base))..=floor_i64(&(&cutoff - &base)) {
                        let e1 = int(e1);
                        let Some(lhs) = left_side(&mut sides, i, a, u, &r, &e1, &e2, &e2_min) else { continue };
                        let Some(rhs) = right_side(&mut sides, i, a, u, &r, &e1, &e2) else { continue };
                        check.record(lhs == rhs, || {
                            format!(
                                "{} with w^{a}, u = {}: coefficient of x1^{} x2^{}",
                                v.generators[i].name,
                                space.label(u),
                                format_rational(&e1),
                                format_rational(&e2)
                            )
                        });
                    }
                }
            }
        }
    }
    check
}
