//! Module maps out of the universal module.
//!
//! A grading- and g-compatible linear map f: M → W into a g-twisted module W extends to the
//! universal module through the ψ field of W,
//!
//!   ψ_W(x) u = (−1)^{|u||w|} e^{x L(−1)} Y_W(u, e^{πi} x) f(w),
//!
//! sending the tail ψ^a_{n,0} u to the coefficient of x^{−n−1} in ψ_W(x) x^{N_g} u (which
//! must be free of logarithms). The map itself is propagated from f along the operators that
//! generated each basis vector; the explicit ψ_W values, wherever the target truncation can
//! evaluate them, must agree with it and kill every relation. The result is also checked to
//! commute with the generator modes, L(−1), L(0) and N_g, and to restrict to f on the seed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::algebra::AlgebraSpec;
use crate::error::ModuleError;
use crate::field::Coeff;
use crate::linalg::{RowSpace, SparseMat, SparseVec};
use crate::module::{SlotKey, TruncatedModule};
use crate::rational::{binom, format_rational, frac_part, int, inv_factorial, Rational};
use crate::report::{CheckResult, Report};
use crate::seed::SeedSpace;
use crate::twisted::{basis_chain, Engine, FieldModes};
use crate::universal::{Generation, ReachOp, Tail, UniversalModule};

/// ψ_W on a target module for a fixed f: M → W.
pub struct ExplicitPsi<'a> {
    algebra: &'a AlgebraSpec,
    target: &'a TruncatedModule,
    engine: Engine<'a>,
    /// f(w^a) in the target basis.
    images: Vec<SparseVec>,
    seed_parity: Vec<u8>,
    fields: Mutex<HashMap<usize, Arc<FieldModes>>>,
}

impl<'a> ExplicitPsi<'a> {
    pub fn new(algebra: &'a AlgebraSpec, target: &'a TruncatedModule, seed: &SeedSpace, images: Vec<SparseVec>) -> Self {
        let columns: BTreeSet<usize> = images.iter().flat_map(|v| v.iter().map(|(j, _)| j)).collect();
        ExplicitPsi {
            algebra,
            target,
            engine: Engine::restricted(algebra, target, columns),
            images,
            seed_parity: seed.vectors.iter().map(|v| v.parity).collect(),
            fields: Mutex::new(HashMap::new()),
        }
    }

    fn field(&self, u: usize) -> Arc<FieldModes> {
        if let Some(f) = self.fields.lock().unwrap().get(&u) {
            return f.clone();
        }
        let f = self.engine.chain_field(&basis_chain(self.algebra, u));
        self.fields.lock().unwrap().insert(u, f.clone());
        f
    }

    /// Coefficients of x^{−n−1} (log x)^l, l = 0, 1, ..., in ψ_W(x) u for a V basis vector u.
    fn psi_logs(&self, a: usize, n: &Rational, u: usize) -> Option<Vec<SparseVec>> {
        let w = self.target;
        let source = &self.images[a];
        if source.is_zero() {
            return Some(Vec::new());
        }
        let v = &self.algebra.space;
        let field = self.field(u);
        let half_tau = Coeff::tau_pow(1) * Coeff::from_rational(crate::rational::rat(1, 2));
        let sign = if v.parity(u) * self.seed_parity[a] == 1 { -Coeff::one() } else { Coeff::one() };
        let source_weight = crate::twisted::vector_grading(w, source)?.0;
        let top = &source_weight + v.weight(u) - n - Rational::one();
        let mut out: Vec<SparseVec> = Vec::new();
        let mut k = 0u64;
        loop {
            // Y_{m} with m = n + k lands at weight top − k, then L(−1)^k / k! lifts it back
            let mid = &top - int(k as i64);
            if mid < w.lower_bound {
                break;
            }
            let m = n + int(k as i64);
            let mut cols: Vec<SparseVec> = Vec::new();
            for (j, c) in source.iter() {
                let col = field.column(w, &self.engine.weights, &m, j)?;
                for (q, y) in col.into_iter().enumerate() {
                    if cols.len() <= q {
                        cols.resize(q + 1, SparseVec::new());
                    }
                    cols[q].axpy(c, &y);
                }
            }
            // (e^{πi}x)^{−m−1} (log x + πi)^q
            let phase = Coeff::root_of_unity(&((-&m - Rational::one()) / int(2)));
            for (q, y) in cols.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                for l in 0..=q {
                    let c = Coeff::from_rational(binom(&int(q as i64), l as u64)) * half_tau.pow((q - l) as u32) * &phase * &sign;
                    let mut lifted = y.scaled(&c);
                    for _ in 0..k {
                        lifted = w.apply_l_minus1(&lifted)?;
                    }
                    let lifted = lifted.scaled(&Coeff::from_rational(inv_factorial(k)));
                    if out.len() <= l {
                        out.resize(l + 1, SparseVec::new());
                    }
                    out[l].axpy(&Coeff::one(), &lifted);
                }
            }
            k += 1;
        }
        Some(out)
    }

    /// Coefficients of x^{−n−1} (log x)^L in ψ_W(x) x^{N_g} u for a V-vector u.
    pub fn psi_all_logs(&self, a: usize, n: &Rational, u: &SparseVec) -> Option<Vec<SparseVec>> {
        let v = &self.algebra.space;
        let mut out: Vec<SparseVec> = Vec::new();
        let mut power = u.clone();
        let mut j = 0u64;
        while !power.is_zero() {
            let scale = Coeff::from_rational(inv_factorial(j));
            for (b, c) in power.iter() {
                let logs = self.psi_logs(a, n, b)?;
                for (l, y) in logs.into_iter().enumerate() {
                    let total = l + j as usize;
                    if out.len() <= total {
                        out.resize(total + 1, SparseVec::new());
                    }
                    out[total].axpy(&(c * &scale), &y);
                }
            }
            power = v.nil.apply(&power);
            j += 1;
        }
        while out.last().map_or(false, SparseVec::is_zero) {
            out.pop();
        }
        Some(out)
    }

    /// The image of ψ^a_{n,0} u; `Err` carries the first nonzero log coefficient.
    pub fn psi(&self, a: usize, n: &Rational, u: &SparseVec) -> Option<Result<SparseVec, usize>> {
        let logs = self.psi_all_logs(a, n, u)?;
        if let Some(l) = logs.iter().skip(1).position(|x| !x.is_zero()) {
            return Some(Err(l + 1));
        }
        Some(Ok(logs.into_iter().next().unwrap_or_default()))
    }
}

fn combine(generated: &[Option<SparseVec>], payload: &SparseVec) -> Option<SparseVec> {
    let mut out = SparseVec::new();
    for (j, c) in payload.iter() {
        out.axpy(c, generated[j].as_ref()?);
    }
    Some(out)
}

/// The extension of f to the universal module, with its verification report.
pub struct InducedMap {
    /// target.dim × module.dim; columns marked undefined are zero.
    pub matrix: SparseMat,
    pub defined: Vec<bool>,
    pub report: Report,
    /// Rank of the map per slot of the universal module.
    pub image_character: BTreeMap<SlotKey, usize>,
}

fn check_equivariant_seed(seed: &SeedSpace, target: &TruncatedModule, f: &SparseMat) -> Result<(), ModuleError> {
    let bad = |msg: String| Err(ModuleError::NotEquivariant(msg));
    if f.rows() != target.dim() || f.cols() != seed.dim() {
        return bad(format!("map has shape {}x{}, expected {}x{}", f.rows(), f.cols(), target.dim(), seed.dim()));
    }
    for (a, w) in seed.vectors.iter().enumerate() {
        let expected = SlotKey::new(w.weight.clone(), w.parity, w.g_weight.clone());
        if let Some((j, _)) = f.col(a).iter().find(|(j, _)| target.slot(*j) != &expected) {
            return bad(format!(
                "f({}) has a component on {} outside weight {}, parity {}, g-class {}",
                w.name,
                target.label(j),
                format_rational(&w.weight),
                w.parity,
                format_rational(&w.g_weight)
            ));
        }
        // f N_M = N_W f
        let lhs = f.apply(seed.nil_of(a));
        let rhs = target.nil.apply(f.col(a));
        if lhs != rhs {
            return bad(format!("f does not intertwine N_g on {}", w.name));
        }
        // f L_M(0)_N = (L_W(0) − weight) f
        let lhs = match w.l0_nilpotent {
            Some(b) => f.col(b).clone(),
            None => SparseVec::new(),
        };
        let rhs = target.l0.apply(f.col(a)).sub(&f.col(a).scaled(&Coeff::from_rational(w.weight.clone())));
        if lhs != rhs {
            return bad(format!("f does not intertwine the nilpotent part of L(0) on {}", w.name));
        }
    }
    Ok(())
}

/// Extends f: M → W (columns over the seed basis) to the universal module and verifies it.
pub fn induced_map(universal: &UniversalModule, target: &TruncatedModule, f: &SparseMat) -> Result<InducedMap, ModuleError> {
    let seed = &universal.seed;
    check_equivariant_seed(seed, target, f)?;
    let v = universal.algebra();
    let images: Vec<SparseVec> = (0..seed.dim()).map(|a| f.col(a).clone()).collect();
    let psi = ExplicitPsi::new(v, target, seed, images);
    let m = &universal.module;
    let tails = universal.tails();
    let mut report = Report::new(format!("induced map {} -> {}", m.name, target.name));

    // f̃ on every tail that the relations or the basis touch
    let mut needed: BTreeSet<usize> = BTreeSet::new();
    for k in 0..m.dim() {
        needed.extend(universal.basis_row(k).iter().map(|(t, _)| t));
    }
    for row in universal.relation_rows() {
        needed.extend(row.iter().map(|(t, _)| t));
    }
    let mut log_free = CheckResult::new("psi_W(x) x^N u is free of logarithms");
    let values: Vec<(usize, Option<Result<SparseVec, usize>>)> = needed
        .into_par_iter()
        .map(|t| {
            let Tail { seed: a, mode, vector } = &tails[t];
            (t, psi.psi(*a, mode, &SparseVec::unit(*vector)))
        })
        .collect();
    let mut on_tail: HashMap<usize, SparseVec> = HashMap::new();
    for (t, val) in values {
        match val {
            Some(Ok(x)) => {
                log_free.record(true, String::new);
                on_tail.insert(t, x);
            }
            Some(Err(l)) => log_free.record(false, || format!("log^{l} term on tail {t}")),
            None => {}
        }
    }
    report.push(log_free);
    let apply = |v: &SparseVec| -> Option<SparseVec> {
        let mut out = SparseVec::new();
        for (t, c) in v.iter() {
            out.axpy(c, on_tail.get(&t)?);
        }
        Some(out)
    };

    let mut kills = CheckResult::new("kills every relation of the universal module");
    for row in universal.relation_rows() {
        if let Some(x) = apply(row) {
            kills.record(x.is_zero(), || format!("relation with pivot {} maps to a nonzero vector", universal.tail_label(row.first_index().unwrap())));
        }
    }
    report.push(kills);

    // f̃ propagated along the generation record of the universal module
    let mut generated: Vec<Option<SparseVec>> = Vec::with_capacity(universal.generations.len());
    for generation in &universal.generations {
        let image = match generation {
            Generation::Seed(a) => Some(f.col(*a).clone()),
            Generation::Image { op, source } => combine(&generated, source).and_then(|x| match op {
                ReachOp::Mode(gen, p) => target.apply_mode(*gen, p, &x),
                ReachOp::LMinus1 => target.apply_l_minus1(&x),
                ReachOp::L0Nilpotent => {
                    let weight = crate::twisted::vector_grading(target, &x).map_or_else(Rational::zero, |g| g.0);
                    Some(target.l0.apply(&x).sub(&x.scaled(&Coeff::from_rational(weight))))
                }
                ReachOp::Nilpotent => Some(target.nil.apply(&x)),
            }),
        };
        generated.push(image);
    }
    let dim = m.dim();
    let mut matrix = SparseMat::zero(target.dim(), dim);
    let mut defined = vec![false; dim];
    for k in 0..dim {
        if let Some(x) = combine(&generated, universal.basis_payload(k)) {
            matrix.set_col(k, x);
            defined[k] = true;
        }
    }

    let mut agrees = CheckResult::new("explicit psi_W agrees with the propagated map");
    for k in 0..dim {
        if let (true, Some(x)) = (defined[k], apply(universal.basis_row(k))) {
            agrees.record(&x == matrix.col(k), || format!("on {}", m.label(k)));
        }
    }
    report.push(agrees);

    let mut restricts = CheckResult::new("restricts to f on the seed");
    for a in 0..seed.dim() {
        if let Some(w) = universal.seed_vector(a) {
            if w.iter().all(|(k, _)| defined[k]) {
                let img = matrix.apply(&w);
                restricts.record(&img == f.col(a), || format!("seed vector {} maps incorrectly", seed.vectors[a].name));
            }
        }
    }
    report.push(restricts);

    let mut modes = CheckResult::new("commutes with generator modes");
    for ((gen, p), action) in m.modes() {
        for k in 0..dim {
            if !action.is_defined(k) || !defined[k] {
                continue;
            }
            let col = action.mat.col(k);
            if !col.iter().all(|(i, _)| defined[i]) {
                continue;
            }
            let Some(rhs) = target.apply_mode(*gen, p, matrix.col(k)) else { continue };
            let lhs = matrix.apply(col);
            modes.record(lhs == rhs, || format!("{}_{} on {}", m.gens[*gen].name, format_rational(p), m.label(k)));
        }
    }
    report.push(modes);

    let mut virasoro = CheckResult::new("commutes with L(-1), L(0) and N_g");
    for k in 0..dim {
        if !defined[k] {
            continue;
        }
        let image = matrix.col(k);
        let pairs = [
            (m.l0.col(k), Some(target.l0.apply(image)), "L(0)"),
            (m.nil.col(k), Some(target.nil.apply(image)), "N_g"),
            (m.l_minus1.col(k), if m.l_minus1_defined[k] { target.apply_l_minus1(image) } else { None }, "L(-1)"),
        ];
        for (col, rhs, what) in pairs {
            let Some(rhs) = rhs else { continue };
            if !col.iter().all(|(i, _)| defined[i]) {
                continue;
            }
            virasoro.record(matrix.apply(col) == rhs, || format!("{what} on {}", m.label(k)));
        }
    }
    report.push(virasoro);

    // rank per slot
    let mut image_character = BTreeMap::new();
    for (slot, cols) in m.slots() {
        let mut span = RowSpace::new();
        for &k in cols {
            if defined[k] {
                span.insert(matrix.col(k).clone());
            }
        }
        image_character.insert(slot.clone(), span.rank());
    }
    Ok(InducedMap { matrix, defined, report, image_character })
}

/// Rank per slot of the submodule generated by the seed vectors under the stored generator
/// modes, L(−1) and L(0): where it equals the slot dimension, any module map out of the
/// universal module is determined by its values on the seed.
pub fn generated_by_seed(universal: &UniversalModule) -> BTreeMap<SlotKey, usize> {
    let m = &universal.module;
    let mut spaces: BTreeMap<SlotKey, RowSpace> = BTreeMap::new();
    let mut frontier: Vec<SparseVec> = Vec::new();
    let insert = |spaces: &mut BTreeMap<SlotKey, RowSpace>, frontier: &mut Vec<SparseVec>, v: SparseVec| {
        // split into slot components: operators preserve slots only up to the weight shift
        let mut parts: BTreeMap<SlotKey, SparseVec> = BTreeMap::new();
        for (k, c) in v.iter() {
            parts.entry(m.slot(k).clone()).or_default().add_term(k, c);
        }
        for (slot, part) in parts {
            let space = spaces.entry(slot).or_default();
            let r = space.reduce(&part);
            if !r.is_zero() {
                space.insert(r.clone());
                frontier.push(r);
            }
        }
    };
    for a in 0..universal.seed.dim() {
        if let Some(w) = universal.seed_vector(a) {
            insert(&mut spaces, &mut frontier, w);
        }
    }
    while let Some(v) = frontier.pop() {
        let mut images = Vec::new();
        for ((gen, p), _) in m.modes() {
            if let Some(x) = m.apply_mode(*gen, p, &v) {
                images.push(x);
            }
        }
        if let Some(x) = m.apply_l_minus1(&v) {
            images.push(x);
        }
        images.push(m.l0.apply(&v));
        images.push(m.nil.apply(&v));
        for x in images {
            if !x.is_zero() {
                insert(&mut spaces, &mut frontier, x);
            }
        }
    }
    m.slots().keys().map(|s| (s.clone(), spaces.get(s).map_or(0, RowSpace::rank))).collect()
}

/// The seed map sending the single seed vector to the ground state of a Fock module.
pub fn ground_state_map(seed: &SeedSpace, target: &TruncatedModule) -> Result<SparseMat, ModuleError> {
    if seed.dim() != 1 || !seed.vectors[0].weight.is_zero() || seed.vectors[0].parity != 0 || !seed.vectors[0].g_weight.is_zero() {
        return Err(ModuleError::Precondition(
            "mapping to a Fock module needs a one-dimensional even seed of weight 0 and g-weight 0".into(),
        ));
    }
    let ground = target
        .basis_of_weight(&Rational::zero())
        .into_iter()
        .find(|&j| target.parity(j) == 0 && target.slot(j).g_class == frac_part(&Rational::zero()))
        .ok_or_else(|| ModuleError::Precondition(format!("{} has no ground state", target.name)))?;
    let mut f = SparseMat::zero(target.dim(), 1);
    f.set_col(0, SparseVec::unit(ground));
    Ok(f)
}
