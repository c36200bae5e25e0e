//! Free-field Fock representations built directly from the (super)commutator
//! [φ^i_m, φ^j_n]_± = c_ij · binom(m, l) · δ_{m+n, l−1},  l = wt φ^i + wt φ^j − 1.
//!
//! The same builder produces the algebra acting on itself (mode offsets 0, ground = vacuum)
//! and twisted Fock modules (mode offsets = g-weights). Modes raising the weight, and odd
//! modes of weight change zero, create; everything else is moved right and killed by the
//! ground vector.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::algebra::GeneratorInfo;
use crate::error::ModuleError;
use crate::field::Coeff;
use crate::linalg::{kernel, SparseMat, SparseVec};
use crate::module::{ModeAction, SlotKey, TruncatedModule};
use crate::rational::{binom, ceil_i64, floor_i64, format_rational, frac_part, int, Rational};

/// An ordered product of creation modes applied to the ground vector.
pub type Monomial = Vec<(usize, Rational)>;

/// Parameters of a Fock module.
#[derive(Clone, Debug)]
pub struct FockParams {
    pub name: String,
    /// n ∈ mode_class[i] + ℤ for generator position i.
    pub mode_class: Vec<Rational>,
    pub ground_weight: Rational,
    pub ground_parity: u8,
    pub ground_class: Rational,
    pub cutoff: Rational,
    /// Fields carry x^{−N} logarithms (true for twisted modules with N_g ≠ 0).
    pub log_fields: bool,
    /// Solve L(−1)w from the annihilator constraints (false: L(−1)w = 0, the vacuum case).
    pub solve_translation: bool,
}

/// Mode algebra of a free-field algebra: generator data plus central pairing.
#[derive(Clone, Debug)]
pub struct FreeField {
    pub gens: Vec<GeneratorInfo>,
    /// c_ij by generator positions; absent means 0.
    pub pairing: BTreeMap<(usize, usize), Rational>,
}

impl FreeField {
    fn weight_change(&self, gen: usize, n: &Rational) -> Rational {
        &self.gens[gen].weight - n - Rational::one()
    }

    fn is_creation(&self, gen: usize, n: &Rational) -> bool {
        let d = self.weight_change(gen, n);
        d.is_positive() || (d.is_zero() && self.gens[gen].parity == 1)
    }

    fn sign_past(&self, gen: usize, other: usize) -> Coeff {
        if self.gens[gen].parity == 1 && self.gens[other].parity == 1 {
            -Coeff::one()
        } else {
            Coeff::one()
        }
    }

    /// The central supercommutator [φ^i_m, φ^j_n]_±.
    pub fn bracket(&self, i: usize, m: &Rational, j: usize, n: &Rational) -> Coeff {
        let c = match self.pairing.get(&(i, j)) {
            Some(c) if !c.is_zero() => c,
            _ => return Coeff::zero(),
        };
        let l = &self.gens[i].weight + &self.gens[j].weight - Rational::one();
        if m + n != &l - Rational::one() {
            return Coeff::zero();
        }
        Coeff::from_rational(c * binom(m, floor_i64(&l) as u64))
    }

    /// φ^gen_n applied to a monomial state, as a combination of monomials.
    pub fn apply(&self, gen: usize, n: &Rational, mono: &[(usize, Rational)]) -> Vec<(Monomial, Coeff)> {
        if !self.is_creation(gen, n) {
            let mut out = Vec::new();
            let mut sign = Coeff::one();
            for (pos, (g, m)) in mono.iter().enumerate() {
                let b = self.bracket(gen, n, *g, m);
                if !b.is_zero() {
                    let mut rest = mono.to_vec();
                    rest.remove(pos);
                    out.push((rest, &sign * &b));
                }
                sign = &sign * &self.sign_past(gen, *g);
            }
            return out;
        }
        let key = (gen, n.clone());
        let first = match mono.first() {
            None => return vec![(vec![key], Coeff::one())],
            Some(f) => f.clone(),
        };
        if key < first || (key == first && self.gens[gen].parity == 0) {
            let mut m = vec![key];
            m.extend_from_slice(mono);
            return vec![(m, Coeff::one())];
        }
        if key == first {
            // odd square: φ_n φ_n = ½ [φ_n, φ_n]_+
            let b = self.bracket(gen, n, gen, n);
            if b.is_zero() {
                return Vec::new();
            }
            return vec![(mono[1..].to_vec(), &b * &Coeff::from_rational(Rational::new(1.into(), 2.into())))];
        }
        let mut out = Vec::new();
        let b = self.bracket(gen, n, first.0, &first.1);
        if !b.is_zero() {
            out.push((mono[1..].to_vec(), b));
        }
        let sign = self.sign_past(gen, first.0);
        for (m, c) in self.apply(gen, n, &mono[1..]) {
            let mut full = vec![first.clone()];
            full.extend(m);
            out.push((full, &c * &sign));
        }
        out
    }
}

type MonoVec = BTreeMap<Monomial, Coeff>;

fn add_into(acc: &mut MonoVec, m: Monomial, c: &Coeff) {
    if c.is_zero() {
        return;
    }
    let e = acc.entry(m.clone()).or_default();
    *e = &*e + c;
    if e.is_zero() {
        acc.remove(&m);
    }
}

fn apply_vec(ff: &FreeField, gen: usize, n: &Rational, v: &MonoVec) -> MonoVec {
    let mut out = MonoVec::new();
    for (m, c) in v {
        for (r, d) in ff.apply(gen, n, m) {
            add_into(&mut out, r, &(c * &d));
        }
    }
    out
}

/// Builds the truncated Fock module.
pub fn build_fock(ff: &FreeField, p: &FockParams) -> Result<TruncatedModule, ModuleError> {
    let budget = &p.cutoff - &p.ground_weight;
    if budget.is_negative() {
        return Err(ModuleError::Precondition(format!(
            "cutoff {} below ground weight {}",
            format_rational(&p.cutoff),
            format_rational(&p.ground_weight)
        )));
    }
    for ((i, j), c) in &ff.pairing {
        if !c.is_zero() && !(&p.mode_class[*i] + &p.mode_class[*j]).is_integer() {
            return Err(ModuleError::Precondition(format!("mode classes of generators {i},{j} are incompatible with their pairing")));
        }
    }

    // Creation modes, sorted by key.
    let mut creators: Vec<(usize, Rational)> = Vec::new();
    for (g, info) in ff.gens.iter().enumerate() {
        let class = frac_part(&p.mode_class[g]);
        // d = wt − n − 1 ∈ [0, budget]  ⇔  n ∈ [wt − 1 − budget, wt − 1]
        let lo = ceil_i64(&(&info.weight - Rational::one() - &budget - &class));
        let hi = floor_i64(&(&info.weight - Rational::one() - &class));
        for k in lo..=hi {
            let n = &class + int(k);
            if ff.is_creation(g, &n) {
                creators.push((g, n));
            }
        }
    }
    creators.sort();

    // Enumerate sorted monomials of weight ≤ cutoff.
    let mut monos: Vec<Monomial> = Vec::new();
    fn rec(
        ff: &FreeField,
        creators: &[(usize, Rational)],
        start: usize,
        budget: &Rational,
        cur: &mut Monomial,
        out: &mut Vec<Monomial>,
    ) {
        out.push(cur.clone());
        for idx in start..creators.len() {
            let (g, n) = &creators[idx];
            let d = ff.weight_change(*g, n);
            if &d > budget {
                continue;
            }
            let next = if ff.gens[*g].parity == 1 { idx + 1 } else { idx };
            cur.push((*g, n.clone()));
            rec(ff, creators, next, &(budget - &d), cur, out);
            cur.pop();
        }
    }
    rec(ff, &creators, 0, &budget, &mut Vec::new(), &mut monos);

    let weight_of = |m: &Monomial| -> Rational {
        m.iter().fold(p.ground_weight.clone(), |acc, (g, n)| acc + ff.weight_change(*g, n))
    };
    let parity_of = |m: &Monomial| -> u8 { m.iter().fold(p.ground_parity, |acc, (g, _)| (acc + ff.gens[*g].parity) % 2) };
    let class_of = |m: &Monomial| -> Rational {
        frac_part(&m.iter().fold(p.ground_class.clone(), |acc, (g, _)| acc + &ff.gens[*g].g_weight))
    };
    monos.sort_by(|a, b| {
        (weight_of(a), parity_of(a), class_of(a), a.len(), a.clone()).cmp(&(weight_of(b), parity_of(b), class_of(b), b.len(), b.clone()))
    });
    let index: BTreeMap<Monomial, usize> = monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let labels: Vec<String> = monos.iter().map(|m| label(ff, m)).collect();
    let slot_of: Vec<SlotKey> = monos.iter().map(|m| SlotKey::new(weight_of(m), parity_of(m), class_of(m))).collect();
    let dim = monos.len();
    let to_sparse = |v: &MonoVec| -> SparseVec {
        SparseVec::from_entries(v.iter().filter_map(|(m, c)| index.get(m).map(|i| (*i, c.clone()))))
    };

    let mut module = TruncatedModule::new(p.name.clone(), ff.gens.clone(), p.ground_weight.clone(), p.cutoff.clone(), p.log_fields, labels, slot_of);

    module.mode_class = p.mode_class.iter().map(frac_part).collect();
    module.spanning = monos
        .iter()
        .map(|m| m.first().map(|(g, n)| (*g, n.clone(), index[&m[1..].to_vec()])))
        .collect();

    // Mode matrices for every mode shifting weight by at most the budget either way.
    for (g, info) in ff.gens.iter().enumerate() {
        let class = frac_part(&p.mode_class[g]);
        let lo = ceil_i64(&(&info.weight - Rational::one() - &budget - &class));
        let hi = floor_i64(&(&info.weight - Rational::one() + &budget - &class));
        for k in lo..=hi {
            let n = &class + int(k);
            let d = ff.weight_change(g, &n);
            let mut mat = SparseMat::zero(dim, dim);
            let mut defined = vec![true; dim];
            for (j, m) in monos.iter().enumerate() {
                if weight_of(m) + &d > p.cutoff {
                    defined[j] = false;
                    continue;
                }
                let mut single = MonoVec::new();
                single.insert(m.clone(), Coeff::one());
                mat.set_col(j, to_sparse(&apply_vec(ff, g, &n, &single)));
            }
            module.set_mode(g, n, ModeAction { mat, defined });
        }
    }

    // N: derivation on monomials with N(ground) = 0.
    let nil_pos: Vec<Option<usize>> = (0..ff.gens.len())
        .map(|g| ff.gens[g].nilpotent_image.and_then(|t| ff.gens.iter().position(|h| h.index == t)))
        .collect();
    let mut nil = SparseMat::zero(dim, dim);
    for (j, m) in monos.iter().enumerate() {
        let mut acc = MonoVec::new();
        for pos in 0..m.len() {
            if let Some(img) = nil_pos[m[pos].0] {
                // state = φ..(N φ)_{n}..w, rebuilt right to left
                let mut state = MonoVec::new();
                state.insert(Vec::new(), Coeff::one());
                for (q, (g, n)) in m.iter().enumerate().rev() {
                    let gg = if q == pos { img } else { *g };
                    state = apply_vec(ff, gg, n, &state);
                }
                for (mm, c) in state {
                    add_into(&mut acc, mm, &c);
                }
            }
        }
        nil.set_col(j, to_sparse(&acc));
    }
    module.nil = nil;
    if p.log_fields {
        module.l0 = module.l0.sub(&module.nil);
    }

    // L(−1)w.
    let ground_shift = if p.solve_translation { solve_translation(ff, p, &module, &monos, &index)? } else { SparseVec::new() };

    // L(−1) as a derivation: L(−1)(φ_n rest) = φ_n L(−1)rest − n φ_{n−1} rest − [logs] φ^{N}_{n−1} rest.
    let mut lm1 = SparseMat::zero(dim, dim);
    let mut lm1_def = vec![false; dim];
    let mut cache: BTreeMap<Monomial, MonoVec> = BTreeMap::new();
    let ground_vec: MonoVec = ground_shift.iter().map(|(i, c)| (monos[i].clone(), c.clone())).collect();
    for (j, m) in monos.iter().enumerate() {
        if weight_of(m) + Rational::one() > p.cutoff {
            continue;
        }
        let v = translate(ff, p, &nil_pos, m, &ground_vec, &mut cache);
        lm1.set_col(j, to_sparse(&v));
        lm1_def[j] = true;
    }
    module.l_minus1 = lm1;
    module.l_minus1_defined = lm1_def;
    Ok(module)
}

fn translate(
    ff: &FreeField,
    p: &FockParams,
    nil_pos: &[Option<usize>],
    m: &[(usize, Rational)],
    ground: &MonoVec,
    cache: &mut BTreeMap<Monomial, MonoVec>,
) -> MonoVec {
    if m.is_empty() {
        return ground.clone();
    }
    if let Some(v) = cache.get(m) {
        return v.clone();
    }
    let (g, n) = &m[0];
    let rest = &m[1..];
    let inner = translate(ff, p, nil_pos, rest, ground, cache);
    let mut out = apply_vec(ff, *g, n, &inner);
    let mut rest_vec = MonoVec::new();
    rest_vec.insert(rest.to_vec(), Coeff::one());
    let shifted = n - Rational::one();
    for (mm, c) in apply_vec(ff, *g, &shifted, &rest_vec) {
        add_into(&mut out, mm, &(&c * &Coeff::from_rational(-n)));
    }
    if p.log_fields {
        if let Some(img) = nil_pos[*g] {
            for (mm, c) in apply_vec(ff, img, &shifted, &rest_vec) {
                add_into(&mut out, mm, &-c);
            }
        }
    }
    cache.insert(m.to_vec(), out.clone());
    out
}

/// Solves φ_n X = (n φ_{n−1} + φ^{N}_{n−1}) w for X = L(−1)w over all annihilation modes.
fn solve_translation(
    ff: &FreeField,
    p: &FockParams,
    module: &TruncatedModule,
    monos: &[Monomial],
    index: &BTreeMap<Monomial, usize>,
) -> Result<SparseVec, ModuleError> {
    let target = &p.ground_weight + Rational::one();
    if target > p.cutoff {
        return Ok(SparseVec::new());
    }
    let unknowns = module.basis_of_weight(&target);
    let ground_idx = index[&Vec::new()];
    let dim = monos.len();
    let mut cols: Vec<SparseVec> = vec![SparseVec::new(); unknowns.len()];
    let mut rhs = SparseVec::new();
    let mut block = 0usize;
    for ((g, n), action) in module.modes() {
        if ff.is_creation(*g, n) {
            continue;
        }
        let d = ff.weight_change(*g, n);
        if &target + &d < p.ground_weight {
            continue;
        }
        for (u, &col) in unknowns.iter().enumerate() {
            let image = action.mat.col(col).remap(|i| Some(i + block * dim));
            cols[u].axpy(&Coeff::one(), &image);
        }
        let shifted = n - Rational::one();
        let mut want = SparseVec::new();
        if let Some(a) = module.mode(*g, &shifted) {
            want.axpy(&Coeff::from_rational(n.clone()), a.mat.col(ground_idx));
        }
        if p.log_fields {
            if let Some(img) = module.nil_image(*g) {
                if let Some(a) = module.mode(img, &shifted) {
                    want.axpy(&Coeff::one(), a.mat.col(ground_idx));
                }
            }
        }
        rhs.axpy(&Coeff::one(), &want.remap(|i| Some(i + block * dim)));
        block += 1;
    }
    let mut all = cols.clone();
    all.push(rhs.scaled(&-Coeff::one()));
    let last = all.len() - 1;
    let sol = kernel(&all).into_iter().find(|k| !k.get(last).is_zero()).ok_or_else(|| {
        ModuleError::InvalidSeed(format!("{}: no L(-1) on the ground vector is compatible with the mode relations", p.name))
    })?;
    let scale = sol.get(last).inv();
    Ok(SparseVec::from_entries(
        sol.iter().filter(|(i, _)| *i != last).map(|(i, c)| (unknowns[i], c * &scale)),
    ))
}

fn label(ff: &FreeField, m: &Monomial) -> String {
    if m.is_empty() {
        return "|0>".into();
    }
    let mut s = String::new();
    for (g, n) in m {
        s.push_str(&format!("{}({})", ff.gens[*g].name, format_rational(n)));
    }
    s.push_str("|0>");
    s
}
