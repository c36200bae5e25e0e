//! The universal lower-bounded generalized g-twisted module generated by a seed space M,
//! truncated to weights in [B, Λ].
//!
//! The module is spanned by tails ψ^a_{n,0} u: a seed vector w^a, a V basis vector u and a
//! mode n in the g-class of u. Generator modes φ^i_{p,0} act on tails through the φψ
//! identity with the logarithms removed (substituting u = x^{−N} v turns every log into a
//! finite sum over the N-orbit of φ^i). Everything the construction quotients by is turned
//! into linear relations among tails, collected per grading slot:
//!
//! * lower-bound relations: coefficients of x₂^C with C below the lower-bound exponent;
//! * unit relations: ψ^a_{n,0} 𝟙 = 0 for n ≥ 0;
//! * weak commutativity between generator modes;
//! * consistency of the action with L(−1), L(0)_N and N_g;
//!
//! and the relation space is closed under all of these operators until it stops growing.
//! Relation rows are kept fully reduced with complex tails (large wt u) ordered first, so
//! relations eliminate complex tails in favour of simpler ones. The module itself is the
//! span of everything reachable from the seed tails, modulo the relations.
//!
//! Tails with wt u above `tail_cap` are unknown; operators reaching them return `None`.
//! Missing relations can only enlarge the quotient, so slot dimensions are upper bounds
//! for the true ones and stop changing once `tail_cap` is large enough.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, RwLock};

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::algebra::{load_algebra, AlgebraSpec};
use crate::error::ModuleError;
use crate::field::Coeff;
use crate::linalg::{RowSpace, SparseMat, SparseVec};
use crate::module::{ModeAction, SlotKey, TruncatedModule};
use crate::rational::{binom, ceil_i64, floor_i64, format_rational, frac_part, int, inv_factorial, is_integer, rat, sign, to_i64, Rational};
use crate::seed::SeedSpace;

/// Truncation parameters.
#[derive(Clone, Debug)]
pub struct UniversalParams {
    pub lower_bound: Rational,
    pub cutoff: Rational,
    /// Largest wt u among tails; the default covers the tails reached from the seed.
    pub tail_cap: Option<Rational>,
    /// Close the lower-bound and unit relations before adding the others.
    pub sequential: bool,
}

impl UniversalParams {
    pub fn new(lower_bound: Rational, cutoff: Rational) -> Self {
        UniversalParams { lower_bound, cutoff, tail_cap: None, sequential: false }
    }
}

/// ψ^seed_{mode,0} e_vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tail {
    pub seed: usize,
    pub mode: Rational,
    pub vector: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Lookup {
    Zero,
    Index(usize),
    Unknown,
}

/// Where a relation came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationKind {
    Unit,
    LowerBound,
    Commutativity,
    Translation,
    LogConsistency,
    NilpotentConsistency,
    Closure,
}

impl RelationKind {
    pub fn name(self) -> &'static str {
        match self {
            RelationKind::Unit => "unit",
            RelationKind::LowerBound => "lower bound",
            RelationKind::Commutativity => "weak commutativity",
            RelationKind::Translation => "L(-1) consistency",
            RelationKind::LogConsistency => "L(0) nilpotent consistency",
            RelationKind::NilpotentConsistency => "N_g consistency",
            RelationKind::Closure => "closure",
        }
    }
}

/// Counters describing one build.
#[derive(Clone, Debug, Default)]
pub struct BuildStats {
    pub tails: usize,
    /// Relations that increased the rank, by kind.
    pub new_relations: BTreeMap<RelationKind, usize>,
    pub closure_rounds: usize,
    /// Stored mode columns left undefined because the truncation could not resolve them.
    pub undefined_columns: usize,
}

/// Cached power-series data for the φψ identity.
#[derive(Default)]
struct SeriesCache {
    /// e^{πir} [z^s] (1−z)^r (τ/2 + log(1−z))^j / j!, keyed by (r, j).
    exchange: RwLock<HashMap<(Rational, usize), Arc<Vec<Coeff>>>>,
    /// [z^s] log(1−z)^m / m!, keyed by m.
    log_powers: RwLock<HashMap<usize, Arc<Vec<Rational>>>>,
}

fn series_mul(a: &[Coeff], b: &[Coeff], len: usize) -> Vec<Coeff> {
    let mut out = vec![Coeff::zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            if !y.is_zero() {
                out[i + j] = &out[i + j] + &(x * y);
            }
        }
    }
    out
}

fn log_one_minus(len: usize) -> Vec<Rational> {
    (0..len).map(|s| if s == 0 { Rational::zero() } else { -rat(1, s as i64) }).collect()
}

impl SeriesCache {
    fn exchange(&self, r: &Rational, j: usize, len: usize) -> Arc<Vec<Coeff>> {
        if let Some(v) = self.exchange.read().unwrap().get(&(r.clone(), j)) {
            if v.len() >= len {
                return v.clone();
            }
        }
        let len = len.max(16).next_power_of_two();
        let binomial: Vec<Coeff> = (0..len).map(|s| Coeff::from_rational(binom(r, s as u64) * sign(s as u64))).collect();
        let mut base: Vec<Coeff> = log_one_minus(len).into_iter().map(Coeff::from_rational).collect();
        base[0] = Coeff::tau_pow(1) * Coeff::from_rational(rat(1, 2));
        let mut acc = binomial;
        for _ in 0..j {
            acc = series_mul(&acc, &base, len);
        }
        let scale = Coeff::root_of_unity(&(r / int(2))) * Coeff::from_rational(inv_factorial(j as u64));
        let v = Arc::new(acc.into_iter().map(|c| &c * &scale).collect::<Vec<_>>());
        self.exchange.write().unwrap().insert((r.clone(), j), v.clone());
        v
    }

    fn log_power(&self, m: usize, len: usize) -> Arc<Vec<Rational>> {
        if let Some(v) = self.log_powers.read().unwrap().get(&m) {
            if v.len() >= len {
                return v.clone();
            }
        }
        let len = len.max(16).next_power_of_two();
        let base = log_one_minus(len);
        let mut acc: Vec<Rational> = (0..len).map(|s| if s == 0 { Rational::one() } else { Rational::zero() }).collect();
        for _ in 0..m {
            let mut next = vec![Rational::zero(); len];
            for (i, x) in acc.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                for (k, y) in base.iter().enumerate().take(len - i) {
                    next[i + k] += x * y;
                }
            }
            acc = next;
        }
        let v = Arc::new(acc.into_iter().map(|c| c * inv_factorial(m as u64)).collect::<Vec<_>>());
        self.log_powers.write().unwrap().insert(m, v.clone());
        v
    }
}

/// Tail enumeration plus the operators acting on tails.
struct TailSystem {
    v: AlgebraSpec,
    seed: SeedSpace,
    lower_bound: Rational,
    cutoff: Rational,
    tail_cap: Rational,
    tails: Vec<Tail>,
    weight: Vec<Rational>,
    slot: Vec<SlotKey>,
    index: HashMap<Tail, usize>,
    /// N_g-orbit of each generator position: [i, N i, N² i, ...].
    orbit: Vec<Vec<usize>>,
    /// r(i, a) = α_i + M_{i,a}, the pole-clearing exponent of the φψ identity.
    exchange_order: Vec<Vec<Rational>>,
    series: SeriesCache,
    p_cache: RwLock<HashMap<(usize, usize, usize, i64, Rational), Option<Arc<SparseVec>>>>,
    phi_cache: RwLock<HashMap<(usize, Rational, usize), Option<Arc<SparseVec>>>>,
}

/// Smallest positive integer strictly greater than `x`.
fn next_positive_integer(x: &Rational) -> Rational {
    int((floor_i64(x) + 1).max(1))
}

impl TailSystem {
    fn new(v: AlgebraSpec, seed: SeedSpace, lower_bound: Rational, cutoff: Rational, tail_cap: Rational) -> Self {
        let space = &v.space;
        let mut entries: Vec<(SlotKey, Rational, Tail)> = Vec::new();
        for (a, w) in seed.vectors.iter().enumerate() {
            for b in 0..space.dim() {
                let wb = space.weight(b);
                if wb > &tail_cap {
                    continue;
                }
                let beta = &space.slot(b).g_class;
                let lo = &w.weight - Rational::one() + wb - &cutoff - beta;
                let hi = &w.weight - Rational::one() + wb - &lower_bound - beta;
                for k in ceil_i64(&lo)..=floor_i64(&hi) {
                    let n = beta + int(k);
                    let h = &w.weight - &n - Rational::one() + wb;
                    let slot = SlotKey::new(h, w.parity + space.parity(b), &w.g_weight + beta);
                    entries.push((slot, wb.clone(), Tail { seed: a, mode: n, vector: b }));
                }
            }
        }
        // complex tails first inside a slot: they become pivots and are eliminated
        entries.sort_by(|x, y| {
            x.0.cmp(&y.0)
                .then_with(|| y.1.cmp(&x.1))
                .then_with(|| y.2.vector.cmp(&x.2.vector))
                .then_with(|| x.2.seed.cmp(&y.2.seed))
                .then_with(|| x.2.mode.cmp(&y.2.mode))
        });
        let mut tails = Vec::with_capacity(entries.len());
        let mut weight = Vec::with_capacity(entries.len());
        let mut slot = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (s, _, t) in entries {
            index.insert(t.clone(), tails.len());
            weight.push(s.weight.clone());
            slot.push(s);
            tails.push(t);
        }
        let gens = v.generators.len();
        let orbit = (0..gens)
            .map(|i| {
                let mut o = vec![i];
                while let Some(n) = v.nil_image(*o.last().unwrap()) {
                    o.push(n);
                }
                o
            })
            .collect();
        let exchange_order = (0..gens)
            .map(|i| {
                let g = &v.generators[i];
                seed.vectors
                    .iter()
                    .map(|w| {
                        let bound = &g.weight - Rational::one() + &w.weight - &lower_bound - &g.g_weight;
                        &g.g_weight + next_positive_integer(&bound)
                    })
                    .collect()
            })
            .collect();
        TailSystem {
            v,
            seed,
            lower_bound,
            cutoff,
            tail_cap,
            tails,
            weight,
            slot,
            index,
            orbit,
            exchange_order,
            series: SeriesCache::default(),
            p_cache: RwLock::new(HashMap::new()),
            phi_cache: RwLock::new(HashMap::new()),
        }
    }

    fn gen_weight(&self, i: usize) -> &Rational {
        &self.v.generators[i].weight
    }

    fn tail_weight(&self, a: usize, n: &Rational, b: usize) -> Rational {
        &self.seed.vectors[a].weight - n - Rational::one() + self.v.space.weight(b)
    }

    fn lookup(&self, a: usize, n: &Rational, b: usize) -> Lookup {
        let h = self.tail_weight(a, n, b);
        if h < self.lower_bound || !is_integer(&(n - &self.v.space.slot(b).g_class)) {
            return Lookup::Zero;
        }
        if h > self.cutoff || self.v.space.weight(b) > &self.tail_cap {
            return Lookup::Unknown;
        }
        match self.index.get(&Tail { seed: a, mode: n.clone(), vector: b }) {
            Some(&t) => Lookup::Index(t),
            None => Lookup::Unknown,
        }
    }

    /// Σ c_b ψ^a_{n,0} e_b for y = Σ c_b e_b, added into `out` with factor `scale`.
    fn add_tails(&self, out: &mut SparseVec, a: usize, n: &Rational, y: &SparseVec, scale: &Coeff) -> Option<()> {
        for (b, c) in y.iter() {
            match self.lookup(a, n, b) {
                Lookup::Zero => {}
                Lookup::Unknown => return None,
                Lookup::Index(t) => out.add_term(t, &(scale * c)),
            }
        }
        Some(())
    }

    /// Coefficient of x₁^E x₂^C on the log-free right-hand side of the φψ identity for
    /// (φ^i, w^a, u): a combination of tails ψ^a_{n′,0}((N^j φ^i)_k u).
    fn exchange_coefficient(&self, i: usize, a: usize, u: usize, e: i64, c: &Rational) -> Option<Arc<SparseVec>> {
        let key = (i, a, u, e, c.clone());
        if let Some(v) = self.p_cache.read().unwrap().get(&key) {
            return v.clone();
        }
        let result = self.compute_exchange(i, a, u, e, c).map(Arc::new);
        self.p_cache.write().unwrap().insert(key, result.clone());
        result
    }

    fn compute_exchange(&self, i: usize, a: usize, u: usize, e: i64, c: &Rational) -> Option<SparseVec> {
        let r = &self.exchange_order[i][a];
        let space = &self.v.space;
        let parity = self.v.generators[i].parity * self.seed.vectors[a].parity;
        let eps = if parity == 1 { -Coeff::one() } else { Coeff::one() };
        // (φ)_k u vanishes once wt u + wt φ − k − 1 < 0
        let k_max = floor_i64(&(space.weight(u) + self.gen_weight(i) - Rational::one()));
        let s_max = e + 1 + k_max;
        let mut out = SparseVec::new();
        if s_max < 0 {
            return Some(out);
        }
        let unit = SparseVec::unit(u);
        for (j, &gen) in self.orbit[i].iter().enumerate() {
            let coeffs = self.series.exchange(r, j, s_max as usize + 1);
            for s in 0..=s_max {
                let g = &coeffs[s as usize];
                if g.is_zero() {
                    continue;
                }
                let k = s - e - 1;
                let y = space.apply_mode(gen, &int(k), &unit)?;
                let n = r - int(s) - Rational::one() - c;
                self.add_tails(&mut out, a, &n, &y, &(g * &eps))?;
            }
        }
        Some(out)
    }

    /// φ^i_{p,0} applied to tail t.
    fn phi(&self, i: usize, p: &Rational, t: usize) -> Option<Arc<SparseVec>> {
        if !is_integer(&(p - &self.v.generators[i].g_weight)) {
            return Some(Arc::new(SparseVec::new()));
        }
        let target = &self.weight[t] + self.gen_weight(i) - p - Rational::one();
        if target < self.lower_bound {
            return Some(Arc::new(SparseVec::new()));
        }
        if target > self.cutoff {
            return None;
        }
        let key = (i, p.clone(), t);
        if let Some(v) = self.phi_cache.read().unwrap().get(&key) {
            return v.clone();
        }
        let result = self.compute_phi(i, p, t).map(Arc::new);
        self.phi_cache.write().unwrap().insert(key, result.clone());
        result
    }

    fn compute_phi(&self, i: usize, p: &Rational, t: usize) -> Option<SparseVec> {
        let Tail { seed: a, mode: n, vector: u } = self.tails[t].clone();
        let r = &self.exchange_order[i][a];
        let b_min = &self.lower_bound - &self.seed.vectors[a].weight - self.v.space.weight(u);
        let mut out = SparseVec::new();
        let mut step = 0u64;
        loop {
            let c = -&n - Rational::one() - int(step as i64);
            if c < b_min {
                break;
            }
            let e = r + int(step as i64) - p - Rational::one();
            let e = to_i64(&e).expect("exchange exponent is integral");
            let coeff = Coeff::from_rational(binom(&-r, step) * sign(step));
            let part = self.exchange_coefficient(i, a, u, e, &c)?;
            out.axpy(&coeff, &part);
            step += 1;
        }
        // move the logarithmic corrections Σ_{m≥1} log(1−x₂/x₁)^m/m! φ^{N^m i}(x₁) to the right
        for m in 1..self.orbit[i].len() {
            let gen = self.orbit[i][m];
            let mut s = m;
            loop {
                let source = &self.weight[t] - int(s as i64);
                if source < self.lower_bound {
                    break;
                }
                let c = self.series.log_power(m, s + 1)[s].clone();
                if !c.is_zero() {
                    match self.lookup(a, &(&n + int(s as i64)), u) {
                        Lookup::Zero => {}
                        Lookup::Unknown => return None,
                        Lookup::Index(t2) => {
                            let sub = self.phi(gen, &(p - int(s as i64)), t2)?;
                            out.axpy(&Coeff::from_rational(-c), &sub);
                        }
                    }
                }
                s += 1;
            }
        }
        Some(out)
    }

    fn apply_phi(&self, i: usize, p: &Rational, v: &SparseVec) -> Option<SparseVec> {
        let mut out = SparseVec::new();
        for (t, c) in v.iter() {
            out.axpy(c, &*self.phi(i, p, t)?);
        }
        Some(out)
    }

    /// L(−1) ψ^a_n u = ψ^a_n L(−1)u − n ψ^a_{n−1} u − ψ^a_{n−1} N u.
    fn l_minus1(&self, t: usize) -> Option<SparseVec> {
        if &self.weight[t] + Rational::one() > self.cutoff {
            return None;
        }
        let Tail { seed: a, mode: n, vector: u } = &self.tails[t];
        let space = &self.v.space;
        let unit = SparseVec::unit(*u);
        let mut out = SparseVec::new();
        self.add_tails(&mut out, *a, n, &space.apply_l_minus1(&unit)?, &Coeff::one())?;
        let lower = n - Rational::one();
        self.add_tails(&mut out, *a, &lower, &unit, &Coeff::from_rational(-n))?;
        self.add_tails(&mut out, *a, &lower, space.nil.col(*u), &-Coeff::one())?;
        Some(out)
    }

    /// Nilpotent part of L(0): −ψ^a_n N u + ψ^{L_M(0)_N a}_n u.
    fn l0_nilpotent(&self, t: usize) -> Option<SparseVec> {
        let Tail { seed: a, mode: n, vector: u } = &self.tails[t];
        let mut out = SparseVec::new();
        self.add_tails(&mut out, *a, n, self.v.space.nil.col(*u), &-Coeff::one())?;
        if let Some(b) = self.seed.vectors[*a].l0_nilpotent {
            self.add_tails(&mut out, b, n, &SparseVec::unit(*u), &Coeff::one())?;
        }
        Some(out)
    }

    /// N_g ψ^a_n u = ψ^{N a}_n u + ψ^a_n N u.
    fn nilpotent(&self, t: usize) -> Option<SparseVec> {
        let Tail { seed: a, mode: n, vector: u } = &self.tails[t];
        let mut out = SparseVec::new();
        self.add_tails(&mut out, *a, n, self.v.space.nil.col(*u), &Coeff::one())?;
        let unit = SparseVec::unit(*u);
        for (b, c) in self.seed.nil_of(*a).iter() {
            self.add_tails(&mut out, b, n, &unit, c)?;
        }
        Some(out)
    }

    fn apply_op(&self, v: &SparseVec, op: impl Fn(usize) -> Option<SparseVec>) -> Option<SparseVec> {
        let mut out = SparseVec::new();
        for (t, c) in v.iter() {
            out.axpy(c, &op(t)?);
        }
        Some(out)
    }

    /// Modes p of generator i taking weight `h` into [B, Λ].
    fn modes_into_range(&self, i: usize, h: &Rational) -> Vec<Rational> {
        let g = &self.v.generators[i];
        let lo = h + &g.weight - Rational::one() - &self.cutoff;
        let hi = h + &g.weight - Rational::one() - &self.lower_bound;
        (ceil_i64(&(&lo - &g.g_weight))..=floor_i64(&(&hi - &g.g_weight))).map(|k| &g.g_weight + int(k)).collect()
    }

    /// φ modes, L(−1), L(0)_N and N_g applied to a vector, skipping unresolved images.
    fn labelled_images(&self, v: &SparseVec) -> Vec<(ReachOp, SparseVec)> {
        let h = match v.first_index() {
            Some(t) => self.weight[t].clone(),
            None => return Vec::new(),
        };
        let mut out = Vec::new();
        for i in 0..self.v.generators.len() {
            for p in self.modes_into_range(i, &h) {
                if let Some(x) = self.apply_phi(i, &p, v) {
                    out.push((ReachOp::Mode(i, p), x));
                }
            }
        }
        out.extend(self.apply_op(v, |t| self.l_minus1(t)).map(|x| (ReachOp::LMinus1, x)));
        out.extend(self.apply_op(v, |t| self.l0_nilpotent(t)).map(|x| (ReachOp::L0Nilpotent, x)));
        out.extend(self.apply_op(v, |t| self.nilpotent(t)).map(|x| (ReachOp::Nilpotent, x)));
        out.retain(|(_, x)| !x.is_zero());
        out
    }

    fn closure_images(&self, v: &SparseVec) -> Vec<SparseVec> {
        self.labelled_images(v).into_iter().map(|(_, x)| x).collect()
    }

    fn unit_relations(&self) -> Vec<SparseVec> {
        let vacuum = self.v.vacuum;
        (0..self.tails.len())
            .filter(|&t| self.tails[t].vector == vacuum && !self.tails[t].mode.is_negative())
            .map(SparseVec::unit)
            .collect()
    }

    /// Coefficients of x₂^C, C below the lower-bound exponent, on the right-hand side.
    fn lower_bound_relations(&self) -> Vec<SparseVec> {
        let space = &self.v.space;
        let mut jobs = Vec::new();
        for i in 0..self.v.generators.len() {
            for a in 0..self.seed.dim() {
                for u in 0..space.dim() {
                    if space.weight(u) <= &self.tail_cap {
                        jobs.push((i, a, u));
                    }
                }
            }
        }
        jobs.par_iter()
            .flat_map_iter(|&(i, a, u)| {
                let r = &self.exchange_order[i][a];
                let wa = &self.seed.vectors[a].weight;
                let wu = space.weight(u);
                let b_min = &self.lower_bound - wa - wu;
                let class = frac_part(&-&space.slot(u).g_class);
                // largest C ≡ class with C < b_min
                let mut c = &class + int(ceil_i64(&(&b_min - &class)) - 1);
                let mut out = Vec::new();
                loop {
                    // h = wt w^a − r + E + C + wt u + wt φ ∈ [B, Λ]
                    let base = wa - r + &c + wu + self.gen_weight(i);
                    let e_lo = ceil_i64(&(&self.lower_bound - &base));
                    let e_hi = floor_i64(&(&self.cutoff - &base));
                    let mut any = false;
                    for e in e_lo..=e_hi {
                        if let Some(p) = self.exchange_coefficient(i, a, u, e, &c) {
                            any = true;
                            if !p.is_zero() {
                                out.push((*p).clone());
                            }
                        }
                    }
                    if !any {
                        break;
                    }
                    c -= Rational::one();
                }
                out
            })
            .collect()
    }

    /// Weak commutativity of generator modes and consistency with L(−1), L(0)_N, N_g.
    fn structural_relations(&self) -> Vec<(RelationKind, SparseVec)> {
        let gens = self.v.generators.len();
        (0..self.tails.len())
            .into_par_iter()
            .flat_map_iter(|t| {
                let mut out = Vec::new();
                let h = &self.weight[t];
                let unit = SparseVec::unit(t);
                for i in 0..gens {
                    let g = &self.v.generators[i];
                    let nil = self.v.nil_image(i);
                    for p in self.modes_into_range(i, h) {
                        let lhs = self.phi(i, &p, t);
                        let p1 = &p - Rational::one();
                        // [L(−1), φ_p] = −p φ_{p−1} − (Nφ)_{p−1}
                        let translation = (|| {
                            let mut x = self.apply_op(lhs.as_deref()?, |s| self.l_minus1(s))?;
                            x.axpy(&-Coeff::one(), &self.apply_phi(i, &p, &self.l_minus1(t)?)?);
                            x.axpy(&Coeff::from_rational(p.clone()), &self.apply_phi(i, &p1, &unit)?);
                            if let Some(ni) = nil {
                                x.axpy(&Coeff::one(), &self.apply_phi(ni, &p1, &unit)?);
                            }
                            Some(x)
                        })();
                        // [L(0)_N, φ_p] = −(Nφ)_p
                        let log = (|| {
                            let mut x = self.apply_op(lhs.as_deref()?, |s| self.l0_nilpotent(s))?;
                            x.axpy(&-Coeff::one(), &self.apply_phi(i, &p, &self.l0_nilpotent(t)?)?);
                            if let Some(ni) = nil {
                                x.axpy(&Coeff::one(), &self.apply_phi(ni, &p, &unit)?);
                            }
                            Some(x)
                        })();
                        // [N_g, φ_p] = (Nφ)_p
                        let nilpotent = (|| {
                            let mut x = self.apply_op(lhs.as_deref()?, |s| self.nilpotent(s))?;
                            x.axpy(&-Coeff::one(), &self.apply_phi(i, &p, &self.nilpotent(t)?)?);
                            if let Some(ni) = nil {
                                x.axpy(&-Coeff::one(), &self.apply_phi(ni, &p, &unit)?);
                            }
                            Some(x)
                        })();
                        for (kind, x) in [
                            (RelationKind::Translation, translation),
                            (RelationKind::LogConsistency, log),
                            (RelationKind::NilpotentConsistency, nilpotent),
                        ] {
                            if let Some(x) = x.filter(|x| !x.is_zero()) {
                                out.push((kind, x));
                            }
                        }
                    }
                    let _ = g;
                    for j in i..gens {
                        out.extend(self.commutativity(t, i, j).into_iter().map(|x| (RelationKind::Commutativity, x)));
                    }
                }
                out
            })
            .collect()
    }

    /// Largest locality order over the N_g-orbits of i and j.
    fn orbit_locality(&self, i: usize, j: usize) -> u32 {
        let mut m = 1;
        for &x in &self.orbit[i] {
            for &y in &self.orbit[j] {
                m = m.max(self.v.locality(x, y));
            }
        }
        m
    }

    /// Σ_t binom(M,t)(−1)^t (φ^i_{p+M−t} φ^j_{q+t} − ε φ^j_{q+t} φ^i_{p+M−t}) ψ = 0.
    fn commutativity(&self, t: usize, i: usize, j: usize) -> Vec<SparseVec> {
        let (gi, gj) = (&self.v.generators[i], &self.v.generators[j]);
        let order = self.orbit_locality(i, j) as i64;
        let eps = if gi.parity * gj.parity == 1 { -Coeff::one() } else { Coeff::one() };
        let h = &self.weight[t];
        let unit = SparseVec::unit(t);
        let mut out = Vec::new();
        let q_hi = h + &gj.weight - Rational::one() - &self.lower_bound;
        let q_lo = h + &gj.weight - Rational::one() - &self.cutoff - int(order);
        for kq in ceil_i64(&(&q_lo - &gj.g_weight))..=floor_i64(&(&q_hi - &gj.g_weight)) {
            let q = &gj.g_weight + int(kq);
            let mid = h + &gj.weight - &q - Rational::one();
            // final weight mid + wt φ^i − (p + M) − 1 ∈ [B, Λ]
            let p_hi = &mid + &gi.weight - Rational::one() - int(order) - &self.lower_bound;
            let p_lo = &mid + &gi.weight - Rational::one() - int(order) - &self.cutoff;
            for kp in ceil_i64(&(&p_lo - &gi.g_weight))..=floor_i64(&(&p_hi - &gi.g_weight)) {
                let p = &gi.g_weight + int(kp);
                let rel = (|| {
                    let mut x = SparseVec::new();
                    for s in 0..=order {
                        let c = Coeff::from_rational(binom(&int(order), s as u64) * sign(s as u64));
                        let pi = &p + int(order - s);
                        let qj = &q + int(s);
                        let a = self.apply_phi(i, &pi, &self.apply_phi(j, &qj, &unit)?)?;
                        let b = self.apply_phi(j, &qj, &self.apply_phi(i, &pi, &unit)?)?;
                        x.axpy(&c, &a);
                        x.axpy(&-(&c * &eps), &b);
                    }
                    Some(x)
                })();
                if let Some(x) = rel.filter(|x| !x.is_zero()) {
                    out.push(x);
                }
            }
        }
        out
    }
}

/// Per-slot row spaces over tails.
#[derive(Clone, Default)]
struct SlotSpaces {
    spaces: BTreeMap<SlotKey, RowSpace>,
}

impl SlotSpaces {
    /// Reduces `v` (which must live in one slot) and inserts it; returns the new row material.
    fn insert(&mut self, sys: &TailSystem, v: SparseVec) -> Result<Option<SparseVec>, ModuleError> {
        let Some(first) = v.first_index() else { return Ok(None) };
        let slot = sys.slot[first].clone();
        if let Some((t, _)) = v.iter().find(|(t, _)| sys.slot[*t] != slot) {
            return Err(ModuleError::InconsistentGrading(format!(
                "relation mixes slots: {} and {}",
                tail_label(sys, first),
                tail_label(sys, t)
            )));
        }
        let space = self.spaces.entry(slot).or_default();
        let reduced = space.reduce(&v);
        if reduced.is_zero() {
            return Ok(None);
        }
        space.insert(reduced.clone());
        Ok(Some(reduced))
    }

    /// Inserts the batch, then closes under `images` to a fixed point; returns the number
    /// of rank increases per kind.
    fn close(
        &mut self,
        sys: &TailSystem,
        batch: Vec<(RelationKind, SparseVec)>,
        images: impl Fn(&SparseVec) -> Vec<SparseVec> + Sync,
        stats: &mut BuildStats,
    ) -> Result<(), ModuleError> {
        let mut frontier = Vec::new();
        for (kind, v) in batch {
            if let Some(r) = self.insert(sys, v)? {
                *stats.new_relations.entry(kind).or_default() += 1;
                frontier.push(r);
            }
        }
        while !frontier.is_empty() {
            stats.closure_rounds += 1;
            let next: Vec<SparseVec> = frontier.par_iter().flat_map_iter(|r| images(r)).collect();
            frontier.clear();
            for v in next {
                if let Some(r) = self.insert(sys, v)? {
                    *stats.new_relations.entry(RelationKind::Closure).or_default() += 1;
                    frontier.push(r);
                }
            }
        }
        Ok(())
    }

    fn rank(&self) -> usize {
        self.spaces.values().map(RowSpace::rank).sum()
    }
}

/// Row space over tails whose rows also record, as a payload, how they combine the
/// recorded generating vectors.
#[derive(Clone, Default)]
struct TrackedSpace {
    rows: BTreeMap<usize, (SparseVec, SparseVec)>,
}

impl TrackedSpace {
    fn reduce(&self, v: &SparseVec, payload: &SparseVec) -> (SparseVec, SparseVec) {
        let (mut v, mut payload) = (v.clone(), payload.clone());
        loop {
            let Some(p) = v.iter().map(|(i, _)| i).find(|i| self.rows.contains_key(i)) else { break };
            let c = -v.get(p);
            let (row, pay) = &self.rows[&p];
            v.axpy(&c, row);
            payload.axpy(&c, pay);
        }
        (v, payload)
    }

    fn insert(&mut self, v: &SparseVec, payload: &SparseVec) -> Option<(SparseVec, SparseVec)> {
        let (r, pay) = self.reduce(v, payload);
        let p = r.first_index()?;
        let inv = r.get(p).inv();
        let (r, pay) = (r.scaled(&inv), pay.scaled(&inv));
        for (row, rpay) in self.rows.values_mut() {
            let c = row.get(p);
            if !c.is_zero() {
                row.axpy(&-&c, &r);
                rpay.axpy(&-c, &pay);
            }
        }
        self.rows.insert(p, (r.clone(), pay.clone()));
        Some((r, pay))
    }
}

/// An operator used to generate the module from the seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReachOp {
    Mode(usize, Rational),
    LMinus1,
    L0Nilpotent,
    Nilpotent,
}

/// How a generating vector was produced: a seed tail, or an operator applied to a
/// combination (given as a payload over earlier generating vectors).
#[derive(Clone, Debug)]
pub enum Generation {
    Seed(usize),
    Image { op: ReachOp, source: SparseVec },
}

/// The truncated universal module together with its tail presentation.
///
/// Basis vectors are classes of tail combinations reachable from the seed tails
/// ψ^a_{−1,0} 𝟙 under the generator modes, L(−1), L(0)_N and N_g; each is stored as a fully
/// reduced row whose pivot tail names it.
pub struct UniversalModule {
    pub seed: SeedSpace,
    pub tail_cap: Rational,
    pub module: TruncatedModule,
    /// Pivot tail of each module basis vector.
    pub basis: Vec<usize>,
    pub stats: BuildStats,
    system: TailSystem,
    relations: SlotSpaces,
    /// Relations (empty payload) plus reachable rows.
    span: BTreeMap<SlotKey, TrackedSpace>,
    /// Generating vectors in the order they were found.
    pub generations: Vec<Generation>,
    basis_position: HashMap<usize, usize>,
}

/// Builds the truncated universal module generated by `seed`.
pub fn build_universal(v: &AlgebraSpec, seed: &SeedSpace, params: &UniversalParams) -> Result<UniversalModule, ModuleError> {
    let lower = params.lower_bound.clone();
    let cutoff = params.cutoff.clone();
    if cutoff < lower {
        return Err(ModuleError::Precondition(format!(
            "cutoff {} is below the lower bound {}",
            format_rational(&cutoff),
            format_rational(&lower)
        )));
    }
    if seed.min_weight() < lower {
        return Err(ModuleError::InvalidSeed(format!(
            "seed weight {} is below the lower bound {}",
            format_rational(&seed.min_weight()),
            format_rational(&lower)
        )));
    }
    let tail_cap = params.tail_cap.clone().unwrap_or_else(|| default_tail_cap(v, seed, &lower, &cutoff));
    let v_big = if v.cutoff >= tail_cap {
        v.clone()
    } else {
        load_algebra(v.file.with_cutoff(&tail_cap)).map_err(|e| ModuleError::Precondition(e.to_string()))?
    };
    let system = TailSystem::new(v_big, seed.clone(), lower.clone(), cutoff.clone(), tail_cap.clone());
    let mut stats = BuildStats { tails: system.tails.len(), ..Default::default() };

    let mut relations = SlotSpaces::default();
    let units: Vec<_> = system.unit_relations().into_iter().map(|x| (RelationKind::Unit, x)).collect();
    let lower_rel: Vec<_> = system.lower_bound_relations().into_iter().map(|x| (RelationKind::LowerBound, x)).collect();
    let structural = system.structural_relations();
    let images = |r: &SparseVec| system.closure_images(r);
    if params.sequential {
        relations.close(&system, units.into_iter().chain(lower_rel).collect(), images, &mut stats)?;
        relations.close(&system, structural, images, &mut stats)?;
    } else {
        relations.close(&system, units.into_iter().chain(lower_rel).chain(structural).collect(), images, &mut stats)?;
    }

    // the submodule generated by the seed, modulo the relations
    let mut span: BTreeMap<SlotKey, TrackedSpace> = BTreeMap::new();
    for (slot, space) in &relations.spaces {
        let tracked = span.entry(slot.clone()).or_default();
        for (p, row) in space.rows() {
            tracked.rows.insert(p, (row.clone(), SparseVec::new()));
        }
    }
    let mut generations = Vec::new();
    let insert = |span: &mut BTreeMap<SlotKey, TrackedSpace>, x: &SparseVec, generation: Generation, generations: &mut Vec<Generation>| {
        let slot = system.slot[x.first_index()?].clone();
        let out = span.entry(slot).or_default().insert(x, &SparseVec::unit(generations.len()))?;
        generations.push(generation);
        Some(out)
    };
    let vacuum = system.v.vacuum;
    let mut frontier = Vec::new();
    for a in 0..seed.dim() {
        let mut w = SparseVec::new();
        if system.add_tails(&mut w, a, &-Rational::one(), &SparseVec::unit(vacuum), &Coeff::one()).is_none() {
            continue;
        }
        frontier.extend(insert(&mut span, &w, Generation::Seed(a), &mut generations));
    }
    while !frontier.is_empty() {
        let next: Vec<(SparseVec, ReachOp, SparseVec)> = frontier
            .par_iter()
            .flat_map_iter(|(r, pay): &(SparseVec, SparseVec)| {
                system.labelled_images(r).into_iter().map(move |(op, x)| (pay.clone(), op, x))
            })
            .collect();
        frontier.clear();
        for (source, op, x) in next {
            frontier.extend(insert(&mut span, &x, Generation::Image { op, source }, &mut generations));
        }
    }

    let mut basis = Vec::new();
    for (slot, space) in &span {
        let rel = relations.spaces.get(slot);
        basis.extend(space.rows.keys().copied().filter(|p| !rel.map_or(false, |s| s.is_pivot(*p))));
    }
    let basis_position: HashMap<usize, usize> = basis.iter().enumerate().map(|(k, &t)| (t, k)).collect();
    let labels = basis.iter().map(|&t| tail_label(&system, t)).collect();
    let slots = basis.iter().map(|&t| system.slot[t].clone()).collect();
    let log_fields = v.generators.iter().any(|g| g.nilpotent_image.is_some());
    let name = format!(
        "universal {} module over {} from seed {}",
        if v.is_untwisted() { "untwisted" } else { "twisted" },
        v.name(),
        seed.name()
    );
    let module = TruncatedModule::new(name, v.generators.clone(), lower, cutoff, log_fields, labels, slots);
    let mut out =
        UniversalModule { seed: seed.clone(), tail_cap, module, basis, stats, system, relations, span, generations, basis_position };
    out.fill_operators()?;
    Ok(out)
}

/// Tails of weight h reached from the seed carry u of weight up to about twice h − B (one
/// generator per half-unit of lowering for half-integral shifts, plus the generator weights);
/// φ on them needs r more. That alone is not enough: relations that only appear among heavier
/// tails still cut the top slots down. Scanning caps for the built-in algebras with B = 0 and
/// Λ ≤ 6, every slot dimension had settled once the cap reached 3(Λ − B) and stayed put up to
/// the largest caps tried (about 3.5Λ); below that the top slots come out too large or too small.
fn default_tail_cap(v: &AlgebraSpec, seed: &SeedSpace, lower: &Rational, cutoff: &Rational) -> Rational {
    let depth = cutoff - lower;
    let max_weight = v.generators.iter().map(|g| g.weight.clone()).max().unwrap_or_else(Rational::one);
    let mut r_max = Rational::zero();
    for g in &v.generators {
        for w in &seed.vectors {
            let bound = &g.weight - Rational::one() + &w.weight - lower - &g.g_weight;
            r_max = r_max.max(&g.g_weight + next_positive_integer(&bound));
        }
    }
    (int(2) * (&depth + max_weight) + r_max).max(int(3) * depth)
}

fn tail_label(sys: &TailSystem, t: usize) -> String {
    let Tail { seed, mode, vector } = &sys.tails[t];
    format!("{}[{}]{}", sys.seed.vectors[*seed].name, format_rational(mode), sys.v.space.label(*vector))
}

impl UniversalModule {
    /// Coordinates of a tail combination in the module basis; `None` if it is not in the
    /// computed span (it involves tails the truncation cannot resolve).
    pub fn normal_form(&self, v: &SparseVec) -> Option<SparseVec> {
        let mut by_slot: BTreeMap<&SlotKey, SparseVec> = BTreeMap::new();
        for (t, c) in v.iter() {
            by_slot.entry(&self.system.slot[t]).or_default().add_term(t, c);
        }
        let mut out = SparseVec::new();
        for (slot, part) in by_slot {
            let space = self.span.get(slot)?;
            // clear relation pivots first: inside `span` the relation rows have been reduced
            // against reachable rows and no longer vanish in the quotient
            let part = match self.relations.spaces.get(slot) {
                Some(rel) => rel.reduce(&part),
                None => part,
            };
            if !space.reduce(&part, &SparseVec::new()).0.is_zero() {
                return None;
            }
            // in a fully reduced echelon basis, the coordinate on a row is the pivot entry
            for (t, c) in part.iter() {
                if let Some(&k) = self.basis_position.get(&t) {
                    out.add_term(k, c);
                }
            }
        }
        Some(out)
    }

    /// The reduced tail combination representing basis vector k.
    pub fn basis_row(&self, k: usize) -> &SparseVec {
        let t = self.basis[k];
        &self.span[&self.system.slot[t]].rows[&t].0
    }

    /// Basis vector k as a combination of the generating vectors.
    pub fn basis_payload(&self, k: usize) -> &SparseVec {
        let t = self.basis[k];
        &self.span[&self.system.slot[t]].rows[&t].1
    }

    pub fn tails(&self) -> &[Tail] {
        &self.system.tails
    }

    pub fn tail_label(&self, t: usize) -> String {
        tail_label(&self.system, t)
    }

    /// The algebra at the cutoff used for tails.
    pub fn algebra(&self) -> &AlgebraSpec {
        &self.system.v
    }

    pub fn tail_index(&self, tail: &Tail) -> Option<usize> {
        self.system.index.get(tail).copied()
    }

    pub fn tail_slot(&self, t: usize) -> &SlotKey {
        &self.system.slot[t]
    }

    /// Relation rows of every slot (each row is a tail combination equal to zero).
    pub fn relation_rows(&self) -> impl Iterator<Item = &SparseVec> {
        self.relations.spaces.values().flat_map(|s| s.rows().map(|(_, r)| r))
    }

    pub fn relation_rank(&self) -> usize {
        self.relations.rank()
    }

    /// Pivots and rows of all relation spaces, for comparing two builds.
    pub fn relation_fingerprint(&self) -> Vec<(usize, SparseVec)> {
        self.relations.spaces.values().flat_map(|s| s.rows().map(|(p, r)| (p, r.clone()))).collect()
    }

    /// φ^gen_{p,0} on a tail, as a tail combination (before reduction).
    pub fn phi_on_tail(&self, gen: usize, p: &Rational, t: usize) -> Option<SparseVec> {
        self.system.phi(gen, p, t).map(|v| (*v).clone())
    }

    /// The module vector ψ^a_{n,0} u for a V-vector u, in the module basis.
    pub fn psi(&self, a: usize, n: &Rational, u: &SparseVec) -> Option<SparseVec> {
        let mut out = SparseVec::new();
        self.system.add_tails(&mut out, a, n, u, &Coeff::one())?;
        self.normal_form(&out)
    }

    /// The seed vector w^a = ψ^a_{−1,0} 𝟙 in the module basis.
    pub fn seed_vector(&self, a: usize) -> Option<SparseVec> {
        self.psi(a, &-Rational::one(), &SparseVec::unit(self.system.v.vacuum))
    }

    pub fn character(&self) -> BTreeMap<SlotKey, usize> {
        self.module.character()
    }

    fn fill_operators(&mut self) -> Result<(), ModuleError> {
        let sys = &self.system;
        let dim = self.basis.len();
        let rows: Vec<SparseVec> = (0..dim).map(|k| self.basis_row(k).clone()).collect();
        let depth = &self.module.cutoff - &self.module.lower_bound;
        let mut jobs = Vec::new();
        for (i, g) in sys.v.generators.iter().enumerate() {
            // shifts wt φ − p − 1 within ±(Λ − B)
            let lo = &g.weight - Rational::one() - &depth;
            let hi = &g.weight - Rational::one() + &depth;
            for k in ceil_i64(&(&lo - &g.g_weight))..=floor_i64(&(&hi - &g.g_weight)) {
                jobs.push((i, &g.g_weight + int(k)));
            }
        }
        let column = |x: Option<SparseVec>| x.and_then(|x| self.normal_form(&x));
        let modes: Vec<((usize, Rational), Vec<Option<SparseVec>>)> = jobs
            .into_par_iter()
            .map(|(i, p)| {
                let cols = rows.iter().map(|r| column(sys.apply_phi(i, &p, r))).collect();
                ((i, p), cols)
            })
            .collect();
        let op_columns = |op: &(dyn Fn(usize) -> Option<SparseVec> + Sync)| -> Vec<Option<SparseVec>> {
            rows.par_iter().map(|r| column(sys.apply_op(r, op))).collect()
        };
        let l_minus1 = op_columns(&|t| sys.l_minus1(t));
        let l0_nil = op_columns(&|t| sys.l0_nilpotent(t));
        let nil = op_columns(&|t| sys.nilpotent(t));

        let mut undefined = 0;
        let mut actions = Vec::new();
        for ((i, p), cols) in modes {
            let mut mat = SparseMat::zero(dim, dim);
            let mut defined = vec![false; dim];
            for (k, col) in cols.into_iter().enumerate() {
                match col {
                    Some(c) => {
                        mat.set_col(k, c);
                        defined[k] = true;
                    }
                    None => {
                        let target = self.module.weight(k) + &sys.v.generators[i].weight - &p - Rational::one();
                        if target <= self.module.cutoff {
                            undefined += 1;
                        }
                    }
                }
            }
            actions.push((i, p, ModeAction { mat, defined }));
        }
        let m = &mut self.module;
        for (i, p, a) in actions {
            m.set_mode(i, p, a);
        }
        for (k, col) in l_minus1.into_iter().enumerate() {
            if let Some(c) = col {
                m.l_minus1.set_col(k, c);
                m.l_minus1_defined[k] = true;
            } else if m.weight(k) + Rational::one() <= m.cutoff {
                undefined += 1;
            }
        }
        for (k, col) in l0_nil.into_iter().enumerate() {
            let mut full = col.ok_or_else(|| ModuleError::InconsistentGrading(format!("L(0) on {} leaves the truncation", m.label(k))))?;
            full.add_term(k, &Coeff::from_rational(m.weight(k).clone()));
            m.l0.set_col(k, full);
        }
        for (k, col) in nil.into_iter().enumerate() {
            let c = col.ok_or_else(|| ModuleError::InconsistentGrading(format!("N_g on {} leaves the truncation", m.label(k))))?;
            m.nil.set_col(k, c);
        }
        m.mode_class = sys.v.generators.iter().map(|g| g.g_weight.clone()).collect();
        m.spanning = vec![None; dim];
        self.stats.undefined_columns = undefined;
        Ok(())
    }
}

/// Slot dimensions as a sorted table.
pub fn character_table(ch: &BTreeMap<SlotKey, usize>) -> Vec<(SlotKey, usize)> {
    ch.iter().map(|(k, d)| (k.clone(), *d)).collect()
}

/// dim per weight, summed over parity and g-class.
pub fn weight_dimensions(ch: &BTreeMap<SlotKey, usize>) -> BTreeMap<Rational, usize> {
    let mut out = BTreeMap::new();
    for (k, d) in ch {
        *out.entry(k.weight.clone()).or_default() += d;
    }
    out
}

/// Σ dim · q^h as text, e.g. `1 + q^(1/2) + 2q^2`.
pub fn q_series(ch: &BTreeMap<SlotKey, usize>) -> String {
    let dims = weight_dimensions(ch);
    let mut terms = Vec::new();
    for (h, d) in dims {
        if d == 0 {
            continue;
        }
        let coeff = if d == 1 && !h.is_zero() { String::new() } else { d.to_string() };
        let power = if h.is_zero() {
            String::new()
        } else if h == Rational::one() {
            "q".into()
        } else if is_integer(&h) {
            format!("q^{}", format_rational(&h))
        } else {
            format!("q^({})", format_rational(&h))
        };
        terms.push(format!("{coeff}{power}"));
    }
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// `weight,parity,g_class,dim` lines with a header.
pub fn character_csv(ch: &BTreeMap<SlotKey, usize>) -> String {
    let mut s = String::from("weight,parity,g_class,dim\n");
    for (k, d) in ch {
        s.push_str(&format!("{},{},{},{}\n", format_rational(&k.weight), k.parity, format_rational(&k.g_class), d));
    }
    s
}

/// Slot keys present in either character.
pub fn union_slots(a: &BTreeMap<SlotKey, usize>, b: &BTreeMap<SlotKey, usize>) -> BTreeSet<SlotKey> {
    a.keys().chain(b.keys()).cloned().collect()
}
