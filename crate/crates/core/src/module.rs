//! `TruncatedModule`: a weight-truncated module with explicit bases and stored mode actions.
//!
//! Every concrete module in the crate — the algebra acting on itself, explicit Fock-type
//! twisted modules and the universal quotients — is stored in this one shape, so the
//! twisted-vertex engine and the verifiers never need to know where a module came from.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::algebra::GeneratorInfo;
use crate::field::Coeff;
use crate::linalg::{SparseMat, SparseVec};
use crate::rational::{format_rational, frac_part, inv_factorial, sign, Rational};
use crate::scalar::Scalar;
use crate::series::{LogSeries, Var};

/// Grading slot: (weight, parity, g-weight class in [0, 1)).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotKey {
    pub weight: Rational,
    pub parity: u8,
    pub g_class: Rational,
}

impl SlotKey {
    pub fn new(weight: Rational, parity: u8, g_class: Rational) -> Self {
        SlotKey { weight, parity: parity % 2, g_class: frac_part(&g_class) }
    }
}

impl Serialize for SlotKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SlotKey", 3)?;
        st.serialize_field("weight", &format_rational(&self.weight))?;
        st.serialize_field("parity", &self.parity)?;
        st.serialize_field("g_class", &format_rational(&self.g_class))?;
        st.end()
    }
}

/// A stored log-free mode φ^l_{n,0}: its matrix plus the columns on which it is known.
#[derive(Clone, Debug)]
pub struct ModeAction {
    pub mat: SparseMat,
    pub defined: Vec<bool>,
}

impl ModeAction {
    pub fn is_defined(&self, col: usize) -> bool {
        self.defined[col]
    }
}

/// A module truncated to weights in [lower_bound, cutoff].
#[derive(Clone, Debug)]
pub struct TruncatedModule {
    pub name: String,
    pub gens: Vec<GeneratorInfo>,
    pub lower_bound: Rational,
    pub cutoff: Rational,
    /// True when generator fields carry x^{-N} logarithms (N-twisted modules).
    pub log_fields: bool,
    labels: Vec<String>,
    slot_of: Vec<SlotKey>,
    slots: BTreeMap<SlotKey, Vec<usize>>,
    modes: BTreeMap<(usize, Rational), ModeAction>,
    pub l0: SparseMat,
    pub l_minus1: SparseMat,
    /// Columns on which L(−1) is known.
    pub l_minus1_defined: Vec<bool>,
    /// The nilpotent part N of the automorphism acting on this module.
    pub nil: SparseMat,
    /// n ∈ mode_class[i] + ℤ for the modes of generator i on this module.
    pub mode_class: Vec<Rational>,
    /// For basis vectors of the form φ^i_m e_r: (i, m, r). Empty when not recorded.
    pub spanning: Vec<Option<(usize, Rational, usize)>>,
}

impl TruncatedModule {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        gens: Vec<GeneratorInfo>,
        lower_bound: Rational,
        cutoff: Rational,
        log_fields: bool,
        labels: Vec<String>,
        slot_of: Vec<SlotKey>,
    ) -> Self {
        let dim = labels.len();
        let mut slots: BTreeMap<SlotKey, Vec<usize>> = BTreeMap::new();
        for (i, s) in slot_of.iter().enumerate() {
            slots.entry(s.clone()).or_default().push(i);
        }
        let l0 = SparseMat::from_columns(
            dim,
            slot_of.iter().enumerate().map(|(i, s)| SparseVec::unit(i).scaled(&Coeff::from_rational(s.weight.clone()))).collect(),
        );
        TruncatedModule {
            name,
            gens,
            lower_bound,
            cutoff,
            log_fields,
            labels,
            slot_of,
            slots,
            modes: BTreeMap::new(),
            l0,
            l_minus1: SparseMat::zero(dim, dim),
            l_minus1_defined: vec![false; dim],
            nil: SparseMat::zero(dim, dim),
            mode_class: Vec::new(),
            spanning: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn slot(&self, i: usize) -> &SlotKey {
        &self.slot_of[i]
    }

    pub fn weight(&self, i: usize) -> &Rational {
        &self.slot_of[i].weight
    }

    pub fn parity(&self, i: usize) -> u8 {
        self.slot_of[i].parity
    }

    pub fn slots(&self) -> &BTreeMap<SlotKey, Vec<usize>> {
        &self.slots
    }

    /// Distinct weights present, ascending.
    pub fn weights(&self) -> Vec<Rational> {
        let mut w: Vec<Rational> = self.slots.keys().map(|s| s.weight.clone()).collect();
        w.dedup();
        w
    }

    /// Basis indices of the given weight (all parities and classes).
    pub fn basis_of_weight(&self, h: &Rational) -> Vec<usize> {
        self.slots.iter().filter(|(k, _)| &k.weight == h).flat_map(|(_, v)| v.iter().copied()).collect()
    }

    pub fn set_mode(&mut self, gen: usize, n: Rational, action: ModeAction) {
        self.modes.insert((gen, n), action);
    }

    pub fn mode(&self, gen: usize, n: &Rational) -> Option<&ModeAction> {
        self.modes.get(&(gen, n.clone()))
    }

    pub fn modes(&self) -> impl Iterator<Item = (&(usize, Rational), &ModeAction)> {
        self.modes.iter()
    }

    /// Position of N_g(gen) in `gens`, if any.
    pub fn nil_image(&self, gen: usize) -> Option<usize> {
        let target = self.gens[gen].nilpotent_image?;
        self.gens.iter().position(|g| g.index == target)
    }

    /// φ^{gen}_{n,0} applied to a vector; `None` when the action leaves the known region.
    pub fn apply_mode(&self, gen: usize, n: &Rational, v: &SparseVec) -> Option<SparseVec> {
        let target_shift = &self.gens[gen].weight - n - Rational::one();
        let mut out = SparseVec::new();
        let action = self.mode(gen, n);
        for (j, c) in v.iter() {
            let target = self.weight(j) + &target_shift;
            if target < self.lower_bound {
                continue;
            }
            if target > self.cutoff {
                return None;
            }
            match action {
                Some(a) if a.is_defined(j) => out.axpy(c, a.mat.col(j)),
                Some(_) => return None,
                None => {
                    // no stored matrix: mode acts by zero on this (weight-admissible) column only if
                    // the module records it as such; absence means unknown
                    return None;
                }
            }
        }
        Some(out)
    }

    /// Coefficient (φ^{gen})_{n,k} = (−1)^k/k! φ^{N^k gen}_{n,0} applied to `v`.
    pub fn apply_field_mode(&self, gen: usize, n: &Rational, k: u32, v: &SparseVec) -> Option<SparseVec> {
        if k == 0 {
            return self.apply_mode(gen, n, v);
        }
        if !self.log_fields {
            return Some(SparseVec::new());
        }
        let mut g = gen;
        for _ in 0..k {
            match self.nil_image(g) {
                Some(h) => g = h,
                None => return Some(SparseVec::new()),
            }
        }
        let c = Coeff::from_rational(sign(k as u64) * inv_factorial(k as u64));
        Some(self.apply_mode(g, n, v)?.scaled(&c))
    }

    /// Largest k with a possibly nonzero (φ^{gen})_{n,k}.
    pub fn field_log_depth(&self, gen: usize) -> u32 {
        if !self.log_fields {
            return 0;
        }
        let mut depth = 0;
        let mut g = gen;
        while let Some(h) = self.nil_image(g) {
            depth += 1;
            g = h;
            if depth > self.gens.len() as u32 {
                break;
            }
        }
        depth
    }

    pub fn apply_l_minus1(&self, v: &SparseVec) -> Option<SparseVec> {
        if v.iter().any(|(j, _)| !self.l_minus1_defined[j]) {
            return None;
        }
        Some(self.l_minus1.apply(v))
    }

    /// g = e^{2πi S} e^{τ N}: S acts on each slot by its g-class, τ stands for 2πi.
    pub fn g_operator(&self) -> SparseMat {
        let dim = self.dim();
        let semisimple = SparseMat::from_columns(
            dim,
            (0..dim).map(|i| SparseVec::unit(i).scaled(&Coeff::root_of_unity(&self.slot_of[i].g_class))).collect(),
        );
        semisimple.mul(&exp_tau(&self.nil))
    }

    /// g⁻¹ = e^{−τ N} e^{−2πi S}.
    pub fn g_inverse(&self) -> SparseMat {
        let dim = self.dim();
        let semisimple = SparseMat::from_columns(
            dim,
            (0..dim).map(|i| SparseVec::unit(i).scaled(&Coeff::root_of_unity(&-&self.slot_of[i].g_class))).collect(),
        );
        exp_tau(&self.nil.scaled(&-Coeff::one())).mul(&semisimple)
    }

    /// The generating field φ^{gen}_W(x) restricted to the given columns, as an operator series.
    pub fn field_series(&self, gen: usize) -> LogSeries<SparseMat> {
        let dim = self.dim();
        let mut out = LogSeries::new(Var::new("x"));
        for ((g, n), action) in &self.modes {
            for k in 0..=self.field_log_depth(gen) {
                let mut target = gen;
                let mut ok = true;
                for _ in 0..k {
                    match self.nil_image(target) {
                        Some(h) => target = h,
                        None => ok = false,
                    }
                }
                if !ok || *g != target {
                    continue;
                }
                let c = Coeff::from_rational(sign(k as u64) * inv_factorial(k as u64));
                let mut m = SparseMat::zero(dim, dim);
                for j in 0..dim {
                    if action.is_defined(j) {
                        m.set_col(j, action.mat.col(j).scaled(&c));
                    }
                }
                let _ = out.add_term(-n - Rational::one(), k, &m);
            }
        }
        out
    }

    /// Vector with a single basis entry.
    pub fn basis_vector(&self, i: usize) -> SparseVec {
        SparseVec::unit(i)
    }

    /// Graded dimensions, keyed by slot.
    pub fn character(&self) -> BTreeMap<SlotKey, usize> {
        self.slots.iter().map(|(k, v)| (k.clone(), v.len())).collect()
    }

    /// Replaces the stored modes (used by builders).
    pub fn modes_mut(&mut self) -> &mut BTreeMap<(usize, Rational), ModeAction> {
        &mut self.modes
    }
}

/// e^{τ N} = Σ_j (τ N)^j / j! for nilpotent N.
pub fn exp_tau(nil: &SparseMat) -> SparseMat {
    let dim = nil.rows();
    let mut acc = SparseMat::identity(dim);
    let mut power = SparseMat::identity(dim);
    for j in 1..=dim {
        power = nil.mul(&power);
        if power.is_zero() {
            break;
        }
        let c = Scalar::term(inv_factorial(j as u64), Rational::zero(), j as u32).to_coeff();
        acc = acc.add(&power.scaled(&c));
    }
    acc
}

/// Rational helper for callers that need the zero weight.
pub fn zero() -> Rational {
    Rational::zero()
}
