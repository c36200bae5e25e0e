//! The twisted vertex operator map Y^g_W, defined by iterated residues of pole-cleared
//! correlation functions, together with the verifier for its axioms.
//!
//! For u = φ^i_m u′ the field is read off from
//!
//!   F(x₁, z) = (x₁ − z)^M φ^i_W(x₁) Y_W(u′, z)  =  ε (x₁ − z)^M Y_W(u′, z) φ^i_W(x₁),
//!
//! a Laurent polynomial (with logarithms) by weak commutativity, as the coefficient of
//! ξ^{M−m−1} in F(z + ξ, z) expanded in |z| > |ξ|. Each x₁-coefficient of F is taken from
//! whichever of the two products is fully inside the truncation, so intermediate weights
//! stay close to the source and target weights. Columns whose data would leave the
//! truncation are marked undefined rather than guessed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::algebra::AlgebraSpec;
use crate::field::Coeff;
use crate::linalg::{SparseMat, SparseVec};
use crate::module::{SlotKey, TruncatedModule};
use crate::rational::{binom, ceil_i64, floor_i64, format_rational, frac_part, int, inv_factorial, sign, to_i64, Rational};
use crate::report::{CheckResult, Report};
use crate::scalar::Scalar;
use crate::series::{nilpotent_conjugate, shifted_power, LogSeries, NilpotentAction, NilpotentOp, Var};

/// The matrices Y_{n,k} for one exponent n, k = 0..logs.len(), with per-column validity.
#[derive(Clone, Debug)]
pub struct ModeBlock {
    pub logs: Vec<SparseMat>,
    pub defined: Vec<bool>,
}

/// All modes of one field on a module: Σ_{n,k} Y_{n,k} x^{−n−1} (log x)^k.
#[derive(Clone, Debug)]
pub struct FieldModes {
    pub weight: Rational,
    pub parity: u8,
    /// Shift of the slot g-class under the field's modes.
    pub g_class: Rational,
    pub blocks: BTreeMap<Rational, ModeBlock>,
}

impl FieldModes {
    pub fn zero(weight: Rational, parity: u8, g_class: Rational) -> Self {
        FieldModes { weight, parity, g_class, blocks: BTreeMap::new() }
    }

    /// Y(𝟙, x) = id.
    pub fn identity(w: &TruncatedModule) -> Self {
        let dim = w.dim();
        let mut blocks = BTreeMap::new();
        blocks.insert(-Rational::one(), ModeBlock { logs: vec![SparseMat::identity(dim)], defined: vec![true; dim] });
        FieldModes { weight: Rational::zero(), parity: 0, g_class: Rational::zero(), blocks }
    }

    /// The generating field φ^gen_W(x) from the module's stored log-free modes.
    pub fn generator(w: &TruncatedModule, gen: usize) -> Self {
        let dim = w.dim();
        let depth = w.field_log_depth(gen);
        let mut orbit = vec![gen];
        for _ in 0..depth {
            let next = w.nil_image(*orbit.last().unwrap()).expect("log depth follows the N_g orbit");
            orbit.push(next);
        }
        let mut blocks = BTreeMap::new();
        for ((g, n), action) in w.modes() {
            if *g != gen {
                continue;
            }
            let mut logs = Vec::new();
            let mut defined = action.defined.clone();
            for (k, h) in orbit.iter().enumerate() {
                let c = Coeff::from_rational(sign(k as u64) * inv_factorial(k as u64));
                match w.mode(*h, n) {
                    Some(m) => {
                        for (j, d) in defined.iter_mut().enumerate() {
                            *d = *d && m.defined[j];
                        }
                        logs.push(m.mat.scaled(&c));
                    }
                    None => logs.push(SparseMat::zero(dim, dim)),
                }
            }
            for (j, d) in defined.iter().enumerate() {
                if !d {
                    for l in logs.iter_mut() {
                        l.set_col(j, SparseVec::new());
                    }
                }
            }
            trim_logs(&mut logs);
            blocks.insert(n.clone(), ModeBlock { logs, defined });
        }
        FieldModes {
            weight: w.gens[gen].weight.clone(),
            parity: w.gens[gen].parity,
            g_class: frac_part(&w.gens[gen].g_weight),
            blocks,
        }
    }

    /// The slot that modes of this field send column `j` into at weight `target`.
    pub fn target_slot(&self, w: &TruncatedModule, j: usize, target: Rational) -> SlotKey {
        let src = w.slot(j);
        SlotKey::new(target, src.parity + self.parity, &src.g_class + &self.g_class)
    }

    /// Largest log power with a nonzero coefficient.
    pub fn max_log(&self) -> u32 {
        self.blocks
            .values()
            .flat_map(|b| b.logs.iter().enumerate().filter(|(_, m)| !m.is_zero()).map(|(k, _)| k as u32))
            .max()
            .unwrap_or(0)
    }

    /// Y_{n,·} e_j for every log power; `None` when unknown, empty when provably zero.
    pub fn column(&self, w: &TruncatedModule, weights: &BTreeSet<Rational>, n: &Rational, j: usize) -> Option<Vec<SparseVec>> {
        let target = w.weight(j) + &self.weight - n - Rational::one();
        if target > w.cutoff {
            return None;
        }
        if target < w.lower_bound || !weights.contains(&target) || !w.slots().contains_key(&self.target_slot(w, j, target)) {
            return Some(Vec::new());
        }
        // a field stores every mode that can reach the truncation; absent modes vanish
        let block = match self.blocks.get(n) {
            Some(b) => b,
            None => return Some(Vec::new()),
        };
        if !block.defined[j] {
            return None;
        }
        Some(block.logs.iter().map(|m| m.col(j).clone()).collect())
    }

    /// Y_{n,·} v for every log power.
    pub fn apply_all(&self, w: &TruncatedModule, weights: &BTreeSet<Rational>, n: &Rational, v: &SparseVec) -> Option<Vec<SparseVec>> {
        let mut out: Vec<SparseVec> = Vec::new();
        for (j, c) in v.iter() {
            let col = self.column(w, weights, n, j)?;
            if out.len() < col.len() {
                out.resize(col.len(), SparseVec::new());
            }
            for (k, x) in col.iter().enumerate() {
                out[k].axpy(c, x);
            }
        }
        Some(out)
    }

    /// Y_{n,k} as a matrix restricted to defined columns (zero when absent).
    pub fn mode(&self, n: &Rational, k: u32) -> Option<&SparseMat> {
        self.blocks.get(n).and_then(|b| b.logs.get(k as usize))
    }

    /// Modes of the same field on branch p: z^{−n−1} ↦ e^{2πi(−n−1)p} z^{−n−1}, log z ↦ log z + pτ.
    pub fn at_branch(&self, p: i64) -> FieldModes {
        if p == 0 {
            return self.clone();
        }
        let mut blocks = BTreeMap::new();
        for (n, b) in &self.blocks {
            let phase = Coeff::root_of_unity(&((-n - Rational::one()) * int(p)));
            let top = b.logs.len();
            let mut logs = Vec::with_capacity(top);
            for j in 0..top {
                let mut acc = SparseMat::zero(b.logs[j].rows(), b.logs[j].cols());
                for k in j..top {
                    let c = binom(&int(k as i64), (k - j) as u64) * int(p).pow((k - j) as i32);
                    let c = &Coeff::from_rational(c) * &Coeff::tau_pow((k - j) as u32);
                    acc = acc.add(&b.logs[k].scaled(&c));
                }
                logs.push(acc.scaled(&phase));
            }
            blocks.insert(n.clone(), ModeBlock { logs, defined: b.defined.clone() });
        }
        FieldModes { weight: self.weight.clone(), parity: self.parity, g_class: self.g_class.clone(), blocks }
    }

    /// The field applied to basis vector `j` as a log series (defined modes only).
    pub fn series_on(&self, w: &TruncatedModule, weights: &BTreeSet<Rational>, j: usize) -> LogSeries<SparseVec> {
        let mut out = LogSeries::new(Var::new("x"));
        for n in self.blocks.keys() {
            if let Some(col) = self.column(w, weights, n, j) {
                for (k, v) in col.iter().enumerate() {
                    let _ = out.add_term(-n - Rational::one(), k as u32, v);
                }
            }
        }
        out
    }

    /// Σ c · self.
    pub fn scaled(&self, c: &Coeff) -> FieldModes {
        let blocks = self
            .blocks
            .iter()
            .map(|(n, b)| (n.clone(), ModeBlock { logs: b.logs.iter().map(|m| m.scaled(c)).collect(), defined: b.defined.clone() }))
            .collect();
        FieldModes { weight: self.weight.clone(), parity: self.parity, g_class: self.g_class.clone(), blocks }
    }
}

fn trim_logs(logs: &mut Vec<SparseMat>) {
    while logs.len() > 1 && logs.last().map_or(false, |m| m.is_zero()) {
        logs.pop();
    }
}

/// One term c · x₁^E (log x₁)^{l₁} z^D (log z)^{l₂} of a cleared correlation column.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CorrKey {
    pub x_power: Rational,
    pub x_log: u32,
    pub z_power: Rational,
    pub z_log: u32,
}

/// A cleared correlation column (x₁ − z)^M A(x₁) B(z) e_j at one target weight.
pub type CorrColumn = BTreeMap<CorrKey, SparseVec>;

/// Which product supplied a coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Product,
    Reverse,
}

/// Correlation and residue engine for one module over one algebra.
pub struct Engine<'a> {
    pub algebra: &'a AlgebraSpec,
    pub module: &'a TruncatedModule,
    pub weights: BTreeSet<Rational>,
    generators: Vec<Arc<FieldModes>>,
    shift_cache: Mutex<HashMap<(Rational, u32, i64), Arc<Vec<(Rational, u32, Coeff)>>>>,
    chain_cache: Mutex<HashMap<Vec<(usize, Rational)>, Arc<FieldModes>>>,
    /// When set, residue fields are only computed on these columns, from the product side.
    columns: Option<BTreeSet<usize>>,
}

/// Records disagreements between the two products wherever both are computable.
#[derive(Default, Debug, Clone)]
pub struct CrossCheck {
    pub compared: usize,
    pub mismatch: Option<String>,
}

impl<'a> Engine<'a> {
    pub fn new(algebra: &'a AlgebraSpec, module: &'a TruncatedModule) -> Self {
        let weights = module.weights().into_iter().collect();
        let generators = (0..module.gens.len()).map(|g| Arc::new(FieldModes::generator(module, g))).collect();
        Engine {
            algebra,
            module,
            weights,
            generators,
            shift_cache: Mutex::new(HashMap::new()),
            chain_cache: Mutex::new(HashMap::new()),
            columns: None,
        }
    }

    /// An engine computing fields only on `columns`. Nested residues then only need those
    /// columns of the inner field, so the product side alone is used.
    pub fn restricted(algebra: &'a AlgebraSpec, module: &'a TruncatedModule, columns: BTreeSet<usize>) -> Self {
        Engine { columns: Some(columns), ..Engine::new(algebra, module) }
    }

    pub fn generator(&self, gen: usize) -> Arc<FieldModes> {
        self.generators[gen].clone()
    }

    /// Coefficient of ξ^s in (z+ξ)^E (log(z+ξ))^l as a list (z-power, log z power, c).
    fn shifted(&self, e: &Rational, l: u32, s: i64) -> Arc<Vec<(Rational, u32, Coeff)>> {
        let key = (e.clone(), l, s);
        if let Some(v) = self.shift_cache.lock().unwrap().get(&key) {
            return v.clone();
        }
        let v: Vec<(Rational, u32, Coeff)> = shifted_power(e, l, s as usize + 1)
            .into_iter()
            .filter(|((_, _, k), _)| *k == s)
            .map(|((zp, zl, _), c)| (zp, zl, c))
            .collect();
        let v = Arc::new(v);
        self.shift_cache.lock().unwrap().insert(key, v.clone());
        v
    }

    fn side_coefficient(
        &self,
        side: Side,
        a: &FieldModes,
        b: &FieldModes,
        order: u32,
        j: usize,
        target: &Rational,
        e: &Rational,
    ) -> Option<CorrColumn> {
        let w = self.module;
        let eps = if a.parity * b.parity == 1 { -Coeff::one() } else { Coeff::one() };
        let mut out = CorrColumn::new();
        for t in 0..=order {
            let bc = Coeff::from_rational(binom(&int(order as i64), t as u64) * sign(t as u64));
            let p = int(order as i64 - t as i64 - 1) - e;
            match side {
                Side::Product => {
                    let mid = target - &a.weight + &p + Rational::one();
                    if mid > w.cutoff {
                        return None;
                    }
                    if mid < w.lower_bound || !self.weights.contains(&mid) {
                        continue;
                    }
                    let n_b = w.weight(j) + &b.weight - Rational::one() - &mid;
                    let ys = b.column(w, &self.weights, &n_b, j)?;
                    for (lb, y) in ys.iter().enumerate() {
                        if y.is_zero() {
                            continue;
                        }
                        let xs = a.apply_all(w, &self.weights, &p, y)?;
                        for (la, x) in xs.into_iter().enumerate() {
                            if x.is_zero() {
                                continue;
                            }
                            let key = CorrKey {
                                x_power: e.clone(),
                                x_log: la as u32,
                                z_power: int(t as i64) - &n_b - Rational::one(),
                                z_log: lb as u32,
                            };
                            out.entry(key).or_default().axpy(&bc, &x);
                        }
                    }
                }
                Side::Reverse => {
                    let mid = w.weight(j) + &a.weight - &p - Rational::one();
                    if mid > w.cutoff {
                        return None;
                    }
                    if mid < w.lower_bound || !self.weights.contains(&mid) {
                        continue;
                    }
                    let n_b = &mid + &b.weight - Rational::one() - target;
                    let xs = a.column(w, &self.weights, &p, j)?;
                    for (la, x) in xs.iter().enumerate() {
                        if x.is_zero() {
                            continue;
                        }
                        let ys = b.apply_all(w, &self.weights, &n_b, x)?;
                        for (lb, y) in ys.into_iter().enumerate() {
                            if y.is_zero() {
                                continue;
                            }
                            let key = CorrKey {
                                x_power: e.clone(),
                                x_log: la as u32,
                                z_power: int(t as i64) - &n_b - Rational::one(),
                                z_log: lb as u32,
                            };
                            out.entry(key).or_default().axpy(&(&bc * &eps), &y);
                        }
                    }
                }
            }
        }
        out.retain(|_, v| !v.is_zero());
        Some(out)
    }

    /// The cleared correlation (x₁ − z)^M A(x₁) B(z) e_j projected to `target` weight.
    ///
    /// Each x₁-coefficient comes from the product side when computable and from the reverse
    /// side otherwise; when both are computable and `cross` is given, they are compared.
    pub fn correlation_column(
        &self,
        a: &FieldModes,
        b: &FieldModes,
        order: u32,
        j: usize,
        target: &Rational,
        cross: Option<&mut CrossCheck>,
    ) -> Option<CorrColumn> {
        let w = self.module;
        let classes: BTreeSet<Rational> = a.blocks.keys().map(|p| frac_part(&-p)).collect();
        let e_min = &w.lower_bound - w.weight(j) - &a.weight;
        let e_max = target - &w.lower_bound - &a.weight + int(order as i64);
        let mut exponents = Vec::new();
        for class in &classes {
            let mut e = class + int(ceil_i64(&(&e_min - class)));
            while e <= e_max {
                exponents.push(e.clone());
                e += Rational::one();
            }
        }
        let mut out = CorrColumn::new();
        let mut cross = cross;
        for e in exponents {
            let prod = self.side_coefficient(Side::Product, a, b, order, j, target, &e);
            let part = match (&prod, cross.as_deref_mut()) {
                (Some(p), Some(cc)) => {
                    if let Some(r) = self.side_coefficient(Side::Reverse, a, b, order, j, target, &e) {
                        cc.compared += 1;
                        if &r != p && cc.mismatch.is_none() {
                            cc.mismatch = Some(format!(
                                "column {} target weight {} x-power {}",
                                w.label(j),
                                format_rational(target),
                                format_rational(&e)
                            ));
                        }
                    }
                    p.clone()
                }
                (Some(p), None) => p.clone(),
                (None, _) if self.columns.is_some() => return None,
                (None, _) => self.side_coefficient(Side::Reverse, a, b, order, j, target, &e)?,
            };
            out.extend(part);
        }
        Some(out)
    }

    /// The field of A_m B, where F = (x₁−z)^M A(x₁)B(z) is a Laurent polynomial.
    pub fn residue_field(&self, a: &FieldModes, b: &FieldModes, order: u32, m: &Rational) -> FieldModes {
        let w = self.module;
        let out_weight = &a.weight + &b.weight - m - Rational::one();
        let parity = (a.parity + b.parity) % 2;
        let g_class = frac_part(&(&a.g_class + &b.g_class));
        let s = int(order as i64) - m - Rational::one();
        let s = match to_i64(&s) {
            Some(s) if s >= 0 => s,
            _ => return FieldModes::zero(out_weight, parity, g_class),
        };
        let shape = FieldModes::zero(out_weight.clone(), parity, g_class.clone());
        let targets: Vec<Rational> = self.weights.iter().cloned().collect();
        type ColOut = Vec<(Rational, Option<Vec<SparseVec>>)>;
        let columns: Vec<usize> = match &self.columns {
            Some(c) => c.iter().copied().collect(),
            None => (0..w.dim()).collect(),
        };
        let per_column: Vec<(usize, ColOut)> = columns
            .into_par_iter()
            .map(|j| {
                let col: ColOut = 
                targets
                    .iter()
                    .filter(|t| *t >= &w.lower_bound && w.slots().contains_key(&shape.target_slot(w, j, (*t).clone())))
                    .map(|t| {
                        let n = w.weight(j) + &out_weight - Rational::one() - t;
                        let col = self.correlation_column(a, b, order, j, t, None).map(|corr| {
                            let mut logs: Vec<SparseVec> = Vec::new();
                            for (key, v) in &corr {
                                for (zp, zl, c) in self.shifted(&key.x_power, key.x_log, s).iter() {
                                    let power = zp + &key.z_power;
                                    debug_assert_eq!(power, -&n - Rational::one());
                                    let k = (zl + key.z_log) as usize;
                                    if logs.len() <= k {
                                        logs.resize(k + 1, SparseVec::new());
                                    }
                                    logs[k].axpy(c, v);
                                }
                            }
                            logs
                        });
                        (n, col)
                    })
                    .collect();
                (j, col)
            })
            .collect();
        let dim = w.dim();
        let mut blocks: BTreeMap<Rational, ModeBlock> = BTreeMap::new();
        for (j, cols) in per_column {
            for (n, col) in cols {
                let block = blocks
                    .entry(n)
                    .or_insert_with(|| ModeBlock { logs: vec![SparseMat::zero(dim, dim)], defined: vec![false; dim] });
                if let Some(logs) = col {
                    block.defined[j] = true;
                    if block.logs.len() < logs.len() {
                        block.logs.resize(logs.len(), SparseMat::zero(dim, dim));
                    }
                    for (k, v) in logs.into_iter().enumerate() {
                        block.logs[k].set_col(j, v);
                    }
                }
            }
        }
        for b in blocks.values_mut() {
            trim_logs(&mut b.logs);
        }
        FieldModes { weight: out_weight, parity, g_class, blocks }
    }

    /// Smallest M ≥ 0 with φ^{N^k gen}_j u = 0 in V for all j ≥ M.
    pub fn generator_order(&self, gen: usize, u: &SparseVec) -> u32 {
        let space = &self.algebra.space;
        let (uw, _) = match vector_grading(space, u) {
            Some(g) => g,
            None => return 0,
        };
        let mut orbit = vec![gen];
        while let Some(n) = self.algebra.nil_image(*orbit.last().unwrap()) {
            orbit.push(n);
        }
        let wt = &self.algebra.generators[gen].weight;
        let mut order = 0u32;
        let mut k = 0i64;
        while &uw + wt - int(k) - Rational::one() >= Rational::zero() {
            for g in &orbit {
                match space.apply_mode(*g, &int(k), u) {
                    Some(v) if v.is_zero() => {}
                    _ => order = order.max(k as u32 + 1),
                }
            }
            k += 1;
        }
        order
    }

    /// Y_W(u) for the V-vector obtained from a chain φ^{i₁}_{m₁} ⋯ φ^{i_l}_{m_l} 𝟙, by nested
    /// residues along the chain (the chain need not be normally ordered).
    pub fn chain_field(&self, chain: &[(usize, Rational)]) -> Arc<FieldModes> {
        if chain.is_empty() {
            return Arc::new(FieldModes::identity(self.module));
        }
        if let Some(f) = self.chain_cache.lock().unwrap().get(chain) {
            return f.clone();
        }
        let rest = self.chain_field(&chain[1..]);
        let rest_vec = chain_vector(self.algebra, &chain[1..]);
        let (gen, m) = &chain[0];
        let order = self.generator_order(*gen, &rest_vec);
        let f = Arc::new(self.residue_field(&self.generators[*gen], &rest, order, m));
        self.chain_cache.lock().unwrap().insert(chain.to_vec(), f.clone());
        f
    }
}

/// The V-vector φ^{i₁}_{m₁} ⋯ 𝟙 (zero if any step leaves the truncation).
pub fn chain_vector(v: &AlgebraSpec, chain: &[(usize, Rational)]) -> SparseVec {
    let mut cur = SparseVec::unit(v.vacuum);
    for (g, m) in chain.iter().rev() {
        cur = match v.space.apply_mode(*g, m, &cur) {
            Some(x) => x,
            None => return SparseVec::new(),
        };
    }
    cur
}

/// (weight, parity) of a homogeneous vector.
pub fn vector_grading(w: &TruncatedModule, v: &SparseVec) -> Option<(Rational, u8)> {
    let j = v.first_index()?;
    Some((w.weight(j).clone(), w.parity(j)))
}

/// The normally ordered chain of a V basis vector.
pub fn basis_chain(v: &AlgebraSpec, mut idx: usize) -> Vec<(usize, Rational)> {
    let mut chain = Vec::new();
    while let Some((g, m, r)) = v.space.spanning[idx].clone() {
        chain.push((g, m));
        idx = r;
    }
    chain
}

/// Y^g_W on the V basis up to a weight, at a branch.
#[derive(Clone, Debug)]
pub struct TwistedVom {
    pub branch: i64,
    pub max_weight: Rational,
    /// Keyed by V basis index.
    pub fields: BTreeMap<usize, Arc<FieldModes>>,
}

impl TwistedVom {
    pub fn field(&self, u: usize) -> Option<&FieldModes> {
        self.fields.get(&u).map(|f| f.as_ref())
    }

    /// Y(Σ c_u u) as a combination of stored fields; `None` if some u was not computed.
    pub fn field_of(&self, v: &SparseVec) -> Option<FieldModes> {
        let mut acc: Option<FieldModes> = None;
        for (u, c) in v.iter() {
            let f = self.field(u)?.scaled(c);
            acc = Some(match acc {
                None => f,
                Some(a) => add_fields(&a, &f),
            });
        }
        acc
    }

    /// Same map on another branch.
    pub fn at_branch(&self, p: i64) -> TwistedVom {
        TwistedVom {
            branch: self.branch + p,
            max_weight: self.max_weight.clone(),
            fields: self.fields.iter().map(|(u, f)| (*u, Arc::new(f.at_branch(p)))).collect(),
        }
    }
}

/// a + b; a column is defined only where both are.
pub fn add_fields(a: &FieldModes, b: &FieldModes) -> FieldModes {
    let mut blocks = a.blocks.clone();
    for (n, bb) in &b.blocks {
        match blocks.get_mut(n) {
            None => {
                blocks.insert(n.clone(), bb.clone());
            }
            Some(ab) => {
                let dim = bb.defined.len();
                if ab.logs.len() < bb.logs.len() {
                    ab.logs.resize(bb.logs.len(), SparseMat::zero(dim, dim));
                }
                for (k, m) in bb.logs.iter().enumerate() {
                    ab.logs[k] = ab.logs[k].add(m);
                }
                for j in 0..dim {
                    ab.defined[j] = ab.defined[j] && bb.defined[j];
                }
            }
        }
    }
    FieldModes { weight: a.weight.clone(), parity: a.parity, g_class: a.g_class.clone(), blocks }
}

/// Builds Y^g_W(u, x) for every V basis vector u of weight ≤ `max_weight`.
pub fn define_twisted_vom(engine: &Engine<'_>, max_weight: &Rational, branch: i64) -> TwistedVom {
    let v = engine.algebra;
    let mut fields = BTreeMap::new();
    for u in 0..v.space.dim() {
        if v.space.weight(u) > max_weight {
            continue;
        }
        let chain = basis_chain(v, u);
        fields.insert(u, engine.chain_field(&chain));
    }
    let vom = TwistedVom { branch: 0, max_weight: max_weight.clone(), fields };
    vom.at_branch(branch)
}

/// Y_V(u, x) on V itself for a V-vector u (the algebra viewed as its own untwisted module).
pub fn vertex_operator(v: &AlgebraSpec, u: &SparseVec) -> Option<FieldModes> {
    let engine = Engine::new(v, &v.space);
    let mut acc: Option<FieldModes> = None;
    for (b, c) in u.iter() {
        let f = engine.chain_field(&basis_chain(v, b)).scaled(c);
        acc = Some(match acc {
            None => f,
            Some(a) => add_fields(&a, &f),
        });
    }
    acc
}

/// Identity, generator reproduction, L(0)/L(−1) commutators and commutativity.
pub fn check_axioms(engine: &Engine<'_>, vom: &TwistedVom) -> Report {
    let w = engine.module;
    let v = engine.algebra;
    let mut report = Report::new(format!("twisted vertex operator axioms on {}", w.name));
    report.notes.push(
        "identities are checked as formal series coefficient by coefficient; convergence of the correlation \
         functions in their regions is not examined"
            .into(),
    );

    let mut identity = CheckResult::new("identity: Y(1, x) = id");
    if let Some(f) = vom.field(v.vacuum) {
        let id = FieldModes::identity(w);
        identity.record(fields_agree(f, &id, w), || "Y(1) differs from the identity".into());
    }
    report.push(identity);

    let mut gen_check = CheckResult::new("generator: Y(phi_{-1} 1, x) = phi_W(x)");
    for g in 0..v.generators.len() {
        let chain = vec![(g, -Rational::one())];
        let u = chain_vector(v, &chain);
        let idx = match u.first_index() {
            Some(i) => i,
            None => continue,
        };
        if let Some(f) = vom.field(idx) {
            let direct = engine.generator(g);
            gen_check.record(fields_agree(f, &direct, w), || format!("generator {}", v.generators[g].name));
        }
    }
    report.push(gen_check);

    let mut l0 = CheckResult::new("[L(0), Y_{n,k}(u)] = (wt u - n - 1) Y_{n,k}(u) + (k+1) Y_{n,k+1}(u)");
    let mut lm1 = CheckResult::new("[L(-1), Y_{n,k}(u)] = -n Y_{n-1,k}(u) + (k+1) Y_{n-1,k+1}(u)");
    let at = |cols: &[SparseVec], k: usize| cols.get(k).cloned().unwrap_or_default();
    for (u, f) in &vom.fields {
        let label = v.space.label(*u).to_string();
        for n in f.blocks.keys() {
            let n_down = n - Rational::one();
            for j in 0..w.dim() {
                let here = match f.column(w, &engine.weights, n, j) {
                    Some(c) => c,
                    None => continue,
                };
                let depth = here.len().max(1);
                let describe = |k: usize| format!("u = {label}, n = {}, k = {k}, column {}", format_rational(n), w.label(j));

                if let Some(after) = f.apply_all(w, &engine.weights, n, w.l0.col(j)) {
                    for k in 0..depth {
                        let lhs = w.l0.apply(&at(&here, k)).sub(&at(&after, k));
                        let mut rhs = at(&here, k).scaled(&Coeff::from_rational(&f.weight - n - Rational::one()));
                        rhs.axpy(&Coeff::from_i64(k as i64 + 1), &at(&here, k + 1));
                        l0.record(lhs == rhs, || describe(k));
                    }
                }

                if !w.l_minus1_defined[j] {
                    continue;
                }
                let (after, below) = match (
                    f.apply_all(w, &engine.weights, n, w.l_minus1.col(j)),
                    f.column(w, &engine.weights, &n_down, j),
                ) {
                    (Some(a), Some(b)) => (a, b),
                    _ => continue,
                };
                for k in 0..depth.max(below.len()) {
                    let lhs = match w.apply_l_minus1(&at(&here, k)) {
                        Some(x) => x.sub(&at(&after, k)),
                        None => continue,
                    };
                    let mut rhs = at(&below, k).scaled(&Coeff::from_rational(-n));
                    rhs.axpy(&Coeff::from_i64(k as i64 + 1), &at(&below, k + 1));
                    lm1.record(lhs == rhs, || describe(k));
                }
            }
        }
    }
    report.push(l0);
    report.push(lm1);
    report
}

/// Records a column-by-column comparison of two fields where both are defined.
pub fn compare_fields(check: &mut CheckResult, a: &FieldModes, b: &FieldModes, w: &TruncatedModule, context: &str) {
    let keys: BTreeSet<&Rational> = a.blocks.keys().chain(b.blocks.keys()).collect();
    for n in keys {
        let (ba, bb) = (a.blocks.get(n), b.blocks.get(n));
        let depth = ba.map_or(0, |x| x.logs.len()).max(bb.map_or(0, |x| x.logs.len()));
        for j in 0..w.dim() {
            if !(ba.map_or(true, |x| x.defined[j]) && bb.map_or(true, |x| x.defined[j])) {
                continue;
            }
            let ok = (0..depth).all(|k| {
                let ca = ba.and_then(|x| x.logs.get(k)).map(|m| m.col(j).clone()).unwrap_or_default();
                let cb = bb.and_then(|x| x.logs.get(k)).map(|m| m.col(j).clone()).unwrap_or_default();
                ca == cb
            });
            check.record(ok, || format!("{context}, n = {}, column {}", format_rational(n), w.label(j)));
        }
    }
}

/// Weak commutativity (x₁−z)^M [φ(x₁), Y(u, z)] = 0 for every generator φ and computed u,
/// checked coefficientwise wherever both products are inside the truncation.
pub fn check_commutativity(engine: &Engine<'_>, vom: &TwistedVom) -> CheckResult {
    let w = engine.module;
    let v = engine.algebra;
    let mut check = CheckResult::new("weak commutativity of generator fields with Y(u)");
    let targets: Vec<Rational> = engine.weights.iter().cloned().collect();
    for gen in 0..v.generators.len() {
        let a = engine.generator(gen);
        for (u, f) in &vom.fields {
            let order = engine.generator_order(gen, &SparseVec::unit(*u));
            let results: Vec<CrossCheck> = (0..w.dim())
                .into_par_iter()
                .map(|j| {
                    let mut cc = CrossCheck::default();
                    for t in &targets {
                        let _ = engine.correlation_column(&a, f, order, j, t, Some(&mut cc));
                    }
                    cc
                })
                .collect();
            for cc in results.into_iter().filter(|cc| cc.compared > 0) {
                check.samples += cc.compared - 1;
                check.record(cc.mismatch.is_none(), || {
                    format!("{} with u = {}: {}", v.generators[gen].name, v.space.label(*u), cc.mismatch.clone().unwrap_or_default())
                });
            }
        }
    }
    check
}

/// Smallest M ≥ 0 with u_k v = 0 in V for all k ≥ M (unknown products count as nonzero).
pub fn pair_order(v_engine: &Engine<'_>, u_field: &FieldModes, v_idx: usize) -> u32 {
    let space = v_engine.module;
    let top = floor_i64(&(space.weight(v_idx) + &u_field.weight - Rational::one()));
    for k in (0..=top.max(-1)).rev() {
        match u_field.column(space, &v_engine.weights, &int(k), v_idx) {
            Some(c) if c.iter().all(|x| x.is_zero()) => {}
            _ => return k as u32 + 1,
        }
    }
    0
}

/// Y(u_n v, z) = Res_{x₁} of (x₁−z)^M Y(u, x₁) Y(v, z) against (x₁ − z)^{n−M}, for computed u, v
/// and every n with u_n v inside the computed range.
pub fn check_associativity(engine: &Engine<'_>, v_engine: &Engine<'_>, vom: &TwistedVom) -> CheckResult {
    let v = engine.algebra;
    let mut check = CheckResult::new("associativity: Y(u_n v) = residue of Y(u) Y(v)");
    for (u, fu) in &vom.fields {
        if *u == v.vacuum {
            continue;
        }
        let u_on_v = v_engine.chain_field(&basis_chain(v, *u));
        for (x, fx) in &vom.fields {
            let order = pair_order(v_engine, &u_on_v, *x);
            let wt = v.space.weight(*u) + v.space.weight(*x);
            let lo = ceil_i64(&(&wt - Rational::one() - &vom.max_weight));
            for n in lo..order as i64 {
                let n = int(n);
                let product = match u_on_v.column(&v.space, &v_engine.weights, &n, *x) {
                    Some(c) => c.into_iter().next().unwrap_or_default(),
                    None => continue,
                };
                let expected = match vom.field_of(&product) {
                    Some(f) => f,
                    None if product.is_zero() => FieldModes::zero(&wt - &n - Rational::one(), 0, Rational::zero()),
                    None => continue,
                };
                let got = engine.residue_field(fu, fx, order, &n);
                let context = format!("u = {}, v = {}, mode {}", v.space.label(*u), v.space.label(*x), format_rational(&n));
                compare_fields(&mut check, &got, &expected, engine.module, &context);
            }
        }
    }
    check
}

/// Chains φ^{i₁}_{m₁} ⋯ φ^{i_l}_{m_l} 𝟙 (arbitrary order, annihilation modes included) of
/// weight ≤ `max_weight` and length ≤ `max_len`, grouped by weight.
pub fn enumerate_chains(v: &AlgebraSpec, max_weight: &Rational, max_len: usize) -> BTreeMap<Rational, Vec<Vec<(usize, Rational)>>> {
    let mut out: BTreeMap<Rational, Vec<Vec<(usize, Rational)>>> = BTreeMap::new();
    let mut frontier: Vec<(Vec<(usize, Rational)>, Rational)> = vec![(Vec::new(), Rational::zero())];
    out.entry(Rational::zero()).or_default().push(Vec::new());
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (chain, h) in &frontier {
            for (g, info) in v.generators.iter().enumerate() {
                // new weight h + wt − m − 1 ∈ [0, max_weight]
                let lo = ceil_i64(&(&info.weight - Rational::one() + h - max_weight));
                let hi = floor_i64(&(&info.weight - Rational::one() + h));
                for m in lo..=hi {
                    let mut c = vec![(g, int(m))];
                    c.extend(chain.iter().cloned());
                    let h2 = h + &info.weight - int(m) - Rational::one();
                    out.entry(h2.clone()).or_default().push(c.clone());
                    next.push((c, h2));
                }
            }
        }
        frontier = next;
    }
    out
}

/// Every linear relation among chain vectors in V must hold among the corresponding fields.
pub fn check_well_defined(engine: &Engine<'_>, max_weight: &Rational, max_len: usize) -> CheckResult {
    let v = engine.algebra;
    let mut check = CheckResult::new("well-definedness: relations among chains in V hold for their fields");
    for (h, chains) in enumerate_chains(v, max_weight, max_len) {
        let vectors: Vec<SparseVec> = chains.iter().map(|c| chain_vector(v, c)).collect();
        for rel in crate::linalg::kernel(&vectors) {
            let mut acc: Option<FieldModes> = None;
            for (idx, c) in rel.iter() {
                let f = engine.chain_field(&chains[idx]).scaled(c);
                acc = Some(match acc {
                    None => f,
                    Some(a) => add_fields(&a, &f),
                });
            }
            let acc = match acc {
                Some(a) => a,
                None => continue,
            };
            let zero = FieldModes::zero(acc.weight.clone(), acc.parity, acc.g_class.clone());
            let describe = rel
                .iter()
                .map(|(i, c)| format!("{} * {}", c, chain_label(v, &chains[i])))
                .collect::<Vec<_>>()
                .join(" + ");
            compare_fields(&mut check, &acc, &zero, engine.module, &format!("weight {}: {describe}", format_rational(&h)));
        }
    }
    check
}

fn chain_label(v: &AlgebraSpec, chain: &[(usize, Rational)]) -> String {
    let mut s: String = chain.iter().map(|(g, m)| format!("{}({})", v.generators[*g].name, format_rational(m))).collect();
    s.push_str("|0>");
    s
}

/// Equality of two fields on every column where both are defined.
pub fn fields_agree(a: &FieldModes, b: &FieldModes, w: &TruncatedModule) -> bool {
    let keys: BTreeSet<&Rational> = a.blocks.keys().chain(b.blocks.keys()).collect();
    for n in keys {
        let (ba, bb) = (a.blocks.get(n), b.blocks.get(n));
        let depth = ba.map_or(0, |x| x.logs.len()).max(bb.map_or(0, |x| x.logs.len()));
        for j in 0..w.dim() {
            let da = ba.map_or(true, |x| x.defined[j]);
            let db = bb.map_or(true, |x| x.defined[j]);
            if !(da && db) {
                continue;
            }
            for k in 0..depth {
                let ca = ba.and_then(|x| x.logs.get(k)).map(|m| m.col(j).clone()).unwrap_or_default();
                let cb = bb.and_then(|x| x.logs.get(k)).map(|m| m.col(j).clone()).unwrap_or_default();
                if ca != cb {
                    return false;
                }
            }
        }
    }
    true
}

/// g · Y^{p+1}(u) · g⁻¹ = Y^p(u) for every computed u, as τ-polynomial identities.
pub fn monodromy_check(module: &TruncatedModule, vom: &TwistedVom, p: i64) -> CheckResult {
    let mut check = CheckResult::new(format!("monodromy: g Y^(p+1) g^-1 = Y^p at p = {p}"));
    let g = module.g_operator();
    let g_inv = module.g_inverse();
    let base = vom.at_branch(p - vom.branch);
    let next = vom.at_branch(p + 1 - vom.branch);
    for (u, f) in &next.fields {
        let target = &base.fields[u];
        for (n, block) in &f.blocks {
            for (k, m) in block.logs.iter().enumerate() {
                for j in 0..module.dim() {
                    // g Y g⁻¹ e_j needs every column in the support of g⁻¹ e_j
                    let src = g_inv.col(j);
                    if src.iter().any(|(x, _)| !block.defined[x]) {
                        continue;
                    }
                    let lhs = g.apply(&m.apply(src));
                    let rhs = target.blocks.get(n).and_then(|b| b.logs.get(k)).map(|mm| mm.col(j).clone()).unwrap_or_default();
                    check.record(lhs == rhs, || format!("u index {u}, n = {}, k = {k}, column {}", format_rational(n), module.label(j)));
                }
            }
        }
    }
    check
}

/// Generator fields against their log-free parts: φ_W(x) = x^{−N_g} φ_0(x) x^{N_g}, and undoing
/// the conjugation recovers φ_0. Columns are compared only where every column of their slot
/// is known, since the conjugation mixes a slot.
pub fn check_log_fields(module: &TruncatedModule) -> CheckResult {
    let mut check = CheckResult::new("generator fields: x^{-N} phi_0(x) x^{N} round trip");
    let Some(op) = NilpotentOp::new(module.nil.clone()) else {
        check.fail("N_g on the module is not nilpotent");
        return check;
    };
    let complete = |n: &Rational, gen: usize, j: usize| -> bool {
        module.slots()[module.slot(j)].iter().all(|&c| {
            module.apply_field_mode(gen, n, 0, &SparseVec::unit(c)).is_some()
                && (0..=module.field_log_depth(gen)).all(|k| module.apply_field_mode(gen, n, k, &SparseVec::unit(c)).is_some())
        })
    };
    for gen in 0..module.gens.len() {
        let full = module.field_series(gen);
        let mut log_free = LogSeries::new(full.var().clone());
        for (e, k, m) in full.terms() {
            if k == 0 {
                let _ = log_free.add_term(e.clone(), 0, m);
            }
        }
        let conjugated = nilpotent_conjugate(&log_free, &op, NilpotentAction::Conjugate);
        let undone = nilpotent_conjugate(&nilpotent_conjugate(&full, &op, NilpotentAction::Left(1)), &op, NilpotentAction::Right(-1));
        let powers: BTreeSet<Rational> = full.terms().chain(conjugated.terms()).map(|(e, _, _)| e.clone()).collect();
        let depth = full.max_log_power().max(conjugated.max_log_power()).max(undone.max_log_power());
        let zero = SparseMat::zero(module.dim(), module.dim());
        for e in &powers {
            let n = -e - Rational::one();
            for j in 0..module.dim() {
                if !complete(&n, gen, j) {
                    continue;
                }
                for k in 0..=depth {
                    let col = |s: &LogSeries<SparseMat>| s.coefficient(e, k).unwrap_or(&zero).col(j).clone();
                    let describe = || format!("{}, x^{} (log x)^{k}, column {}", module.gens[gen].name, format_rational(e), module.label(j));
                    check.record(col(&conjugated) == col(&full), describe);
                    check.record(col(&undone) == col(&log_free), describe);
                }
            }
        }
    }
    check
}

/// Largest log power over every computed field.
pub fn max_log_power(vom: &TwistedVom) -> u32 {
    vom.fields.values().map(|f| f.max_log()).max().unwrap_or(0)
}

/// Unused helper retained for scalar display in reports.
pub fn scalar_string(c: &Coeff) -> String {
    match Scalar::from_coeff(c) {
        Some(s) => s.to_string(),
        None => format!("{c}"),
    }
}
