//! Truncated free-field vertex superalgebras with automorphism data.
//!
//! An algebra is declared by its generators (weight, parity, g-weight, image under N_g) and the
//! central pairing c_ij of the mode algebra. Its state space is the vacuum Fock module, built
//! directly from the oscillator/Clifford relations; the vertex-algebra axioms are then checked,
//! never assumed.

use std::collections::BTreeMap;
use std::path::Path;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{AlgebraError, ParseError};
use crate::field::Coeff;
use crate::fock::{build_fock, FockParams, FreeField};
use crate::linalg::SparseMat;
use crate::module::TruncatedModule;
use crate::rational::{format_rational, inv_factorial, is_integer, parse_rational, to_i64, Rational};
use crate::report::{CheckResult, Report};
use crate::scalar::Scalar;

/// Per-generator data. `index` starts at 1; index 0 is reserved for the zero field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorInfo {
    pub index: usize,
    pub name: String,
    pub weight: Rational,
    pub parity: u8,
    pub g_weight: Rational,
    pub nilpotent_image: Option<usize>,
    /// Smallest M ≥ 1 with (x₁−x₂)^M [φⁱ(x₁), φʲ(x₂)]_± = 0, keyed by the other generator's index.
    pub locality: BTreeMap<usize, u32>,
}

/// Declarative form of an algebra, as read from and written to spec files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    pub cutoff: String,
    #[serde(rename = "generator")]
    pub generators: Vec<GeneratorEntry>,
    #[serde(default, rename = "pairing")]
    pub pairings: Vec<PairingEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorEntry {
    pub index: usize,
    pub name: String,
    pub weight: String,
    pub parity: u8,
    pub g_weight: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nilpotent_image: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairingEntry {
    pub left: usize,
    pub right: usize,
    pub value: String,
}

/// A truncated algebra: generator table, pairing, and its state space with mode actions.
#[derive(Clone, Debug)]
pub struct AlgebraSpec {
    pub file: AlgebraFile,
    pub generators: Vec<GeneratorInfo>,
    /// c_ij by generator positions (both orders filled in).
    pub pairing: BTreeMap<(usize, usize), Rational>,
    pub cutoff: Rational,
    /// V itself: modes φⁱ_n (n ∈ ℤ), L(0), L(−1), N_g; slot classes carry the g-weights.
    pub space: TruncatedModule,
    pub vacuum: usize,
}

const BUILTINS: &[&str] = &["heisenberg1", "heisenberg1_minus", "fermion", "heisenberg2_nilpotent"];

/// Names accepted by [`builtin`].
pub fn builtin_names() -> &'static [&'static str] {
    BUILTINS
}

fn gen(index: usize, name: &str, weight: &str, parity: u8, g_weight: &str, nil: Option<usize>) -> GeneratorEntry {
    GeneratorEntry {
        index,
        name: name.into(),
        weight: weight.into(),
        parity,
        g_weight: g_weight.into(),
        nilpotent_image: nil,
    }
}

fn pair(left: usize, right: usize, value: &str) -> PairingEntry {
    PairingEntry { left, right, value: value.into() }
}

/// Declarative form of a built-in algebra.
pub fn builtin_file(name: &str, cutoff: &Rational) -> Result<AlgebraFile, AlgebraError> {
    let (generators, pairings) = match name {
        // rank-one free boson, g = 1
        "heisenberg1" => (vec![gen(1, "a", "1", 0, "0", None)], vec![pair(1, 1, "1")]),
        // rank-one free boson, g = −1
        "heisenberg1_minus" => (vec![gen(1, "a", "1", 0, "1/2", None)], vec![pair(1, 1, "1")]),
        // one free fermion, g = parity involution
        "fermion" => (vec![gen(1, "psi", "1/2", 1, "1/2", None)], vec![pair(1, 1, "1")]),
        // rank-two boson with form diag(1, 0), N_g a = b, g = e^{2πi N_g}
        "heisenberg2_nilpotent" => (
            vec![gen(1, "a", "1", 0, "0", Some(2)), gen(2, "b", "1", 0, "0", None)],
            vec![pair(1, 1, "1")],
        ),
        other => return Err(AlgebraError::UnknownBuiltin(other.into())),
    };
    Ok(AlgebraFile { name: name.into(), builtin: Some(name.into()), cutoff: format_rational(cutoff), generators, pairings })
}

/// A built-in algebra at the given weight cutoff.
pub fn builtin(name: &str, cutoff: &Rational) -> Result<AlgebraSpec, AlgebraError> {
    load_algebra(builtin_file(name, cutoff)?)
}

/// Parses a TOML algebra description.
pub fn parse_algebra(text: &str) -> Result<AlgebraFile, AlgebraError> {
    toml::from_str(text).map_err(|e| AlgebraError::Parse(ParseError::Document(e.to_string())))
}

/// Reads and validates an algebra spec file.
pub fn load_algebra_path(path: &Path) -> Result<AlgebraSpec, AlgebraError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AlgebraError::Parse(ParseError::Document(format!("{}: {e}", path.display()))))?;
    load_algebra(parse_algebra(&text)?)
}

impl AlgebraFile {
    /// Canonical TOML text; reloading it yields an identical spec.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("algebra files always serialize")
    }

    /// Same description at another cutoff.
    pub fn with_cutoff(&self, cutoff: &Rational) -> AlgebraFile {
        AlgebraFile { cutoff: format_rational(cutoff), ..self.clone() }
    }
}

fn invalid(msg: impl Into<String>) -> AlgebraError {
    AlgebraError::InvalidSpec(msg.into())
}

/// Validates a declarative spec and builds the truncated algebra.
pub fn load_algebra(file: AlgebraFile) -> Result<AlgebraSpec, AlgebraError> {
    let cutoff = parse_rational(&file.cutoff)?;
    if cutoff.is_negative() {
        return Err(invalid("cutoff must be nonnegative"));
    }
    if file.generators.is_empty() {
        return Err(invalid("at least one generator is required"));
    }
    let mut generators = Vec::new();
    for g in &file.generators {
        if g.index == 0 {
            return Err(invalid("generator index 0 is reserved for the zero field"));
        }
        if generators.iter().any(|h: &GeneratorInfo| h.index == g.index) {
            return Err(invalid(format!("duplicate generator index {}", g.index)));
        }
        if g.parity > 1 {
            return Err(invalid(format!("generator {}: parity must be 0 or 1", g.index)));
        }
        let weight = parse_rational(&g.weight)?;
        let g_weight = parse_rational(&g.g_weight)?;
        if g_weight.is_negative() || g_weight >= Rational::one() {
            return Err(invalid(format!("generator {}: g-weight must lie in [0, 1)", g.index)));
        }
        if !weight.is_positive() {
            return Err(invalid(format!("generator {}: weight must be positive", g.index)));
        }
        generators.push(GeneratorInfo {
            index: g.index,
            name: g.name.clone(),
            weight,
            parity: g.parity,
            g_weight,
            nilpotent_image: g.nilpotent_image.filter(|&t| t != 0),
            locality: BTreeMap::new(),
        });
    }
    let pos = |index: usize| generators.iter().position(|g| g.index == index);

    // N_g on generators: targets exist, gradings agree, chains terminate.
    for (p, g) in generators.iter().enumerate() {
        if let Some(t) = g.nilpotent_image {
            let q = pos(t).ok_or_else(|| invalid(format!("generator {}: N_g image {t} is not a generator", g.index)))?;
            let h = &generators[q];
            if h.weight != g.weight || h.parity != g.parity || h.g_weight != g.g_weight {
                return Err(invalid(format!("generator {}: N_g must preserve weight, parity and g-weight", g.index)));
            }
        }
        let mut cur = p;
        for step in 0..=generators.len() {
            match generators[cur].nilpotent_image.and_then(pos) {
                Some(next) => cur = next,
                None => break,
            }
            if step == generators.len() {
                return Err(invalid(format!("generator {}: N_g is not nilpotent", g.index)));
            }
        }
    }

    // Pairing, filled in by skew-symmetry c_ji = (−1)^{|i||j| + l + 1} c_ij.
    let mut pairing: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
    for e in &file.pairings {
        let (i, j) = match (pos(e.left), pos(e.right)) {
            (Some(i), Some(j)) => (i, j),
            _ => return Err(invalid(format!("pairing ({}, {}) names an unknown generator", e.left, e.right))),
        };
        let c = parse_rational(&e.value)?;
        if c.is_zero() {
            continue;
        }
        let (gi, gj) = (&generators[i], &generators[j]);
        let l = &gi.weight + &gj.weight - Rational::one();
        if !is_integer(&l) || l.is_negative() {
            return Err(invalid(format!("pairing ({}, {}): weights must sum to a positive integer", e.left, e.right)));
        }
        if gi.parity != gj.parity {
            return Err(invalid(format!("pairing ({}, {}) mixes parities", e.left, e.right)));
        }
        if !is_integer(&(&gi.g_weight + &gj.g_weight)) {
            return Err(invalid(format!("pairing ({}, {}) is not g-invariant", e.left, e.right)));
        }
        let exponent = (gi.parity * gj.parity) as i64 + to_i64(&l).unwrap() + 1;
        let mirrored = if exponent % 2 == 0 { c.clone() } else { -c.clone() };
        for (key, val) in [((i, j), c), ((j, i), mirrored)] {
            match pairing.get(&key) {
                Some(old) if *old != val => {
                    return Err(invalid(format!("pairing ({}, {}) violates skew-symmetry", e.left, e.right)));
                }
                _ => {
                    pairing.insert(key, val);
                }
            }
        }
    }

    // N_g must be a derivation of the pairing: c(N i, j) + c(i, N j) = 0.
    for i in 0..generators.len() {
        for j in 0..generators.len() {
            let get = |a: Option<usize>, b: Option<usize>| match (a, b) {
                (Some(a), Some(b)) => pairing.get(&(a, b)).cloned().unwrap_or_default(),
                _ => Rational::zero(),
            };
            let ni = generators[i].nilpotent_image.and_then(pos);
            let nj = generators[j].nilpotent_image.and_then(pos);
            if !(get(ni, Some(j)) + get(Some(i), nj)).is_zero() {
                return Err(invalid(format!(
                    "N_g is not a derivation: c(N{}, {}) + c({}, N{}) != 0",
                    generators[i].index, generators[j].index, generators[i].index, generators[j].index
                )));
            }
        }
    }

    // Locality orders.
    let orders: Vec<Vec<u32>> = (0..generators.len())
        .map(|i| {
            (0..generators.len())
                .map(|j| locality_order(&generators, &pairing, i, j))
                .collect()
        })
        .collect();
    let indices: Vec<usize> = generators.iter().map(|g| g.index).collect();
    for (i, g) in generators.iter_mut().enumerate() {
        g.locality = indices.iter().enumerate().map(|(j, idx)| (*idx, orders[i][j])).collect();
    }

    let ff = FreeField { gens: generators.clone(), pairing: pairing.clone() };
    let params = FockParams {
        name: file.name.clone(),
        mode_class: vec![Rational::zero(); generators.len()],
        ground_weight: Rational::zero(),
        ground_parity: 0,
        ground_class: Rational::zero(),
        cutoff: cutoff.clone(),
        log_fields: false,
        solve_translation: false,
    };
    let space = build_fock(&ff, &params).map_err(|e| invalid(e.to_string()))?;
    let vacuum = 0;
    debug_assert_eq!(space.label(vacuum), "|0>");
    let spec = AlgebraSpec { file, generators, pairing, cutoff, space, vacuum };
    let report = spec.check_automorphism();
    if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
        return Err(invalid(format!("{}: {}", bad.name, bad.counterexample.clone().unwrap_or_default())));
    }
    Ok(spec)
}

/// (x₁−x₂)^M kills the supercommutator iff M > l where the bracket is c·binom(m, l).
fn locality_order(gens: &[GeneratorInfo], pairing: &BTreeMap<(usize, usize), Rational>, i: usize, j: usize) -> u32 {
    let nonzero = |a: usize, b: usize| pairing.get(&(a, b)).map_or(false, |c| !c.is_zero());
    if nonzero(i, j) || nonzero(j, i) {
        let l = &gens[i].weight + &gens[j].weight - Rational::one();
        to_i64(&l).unwrap() as u32 + 1
    } else {
        1
    }
}

impl AlgebraSpec {
    pub fn name(&self) -> &str {
        &self.file.name
    }

    /// Free-field data of the mode algebra.
    pub fn free_field(&self) -> FreeField {
        FreeField { gens: self.generators.clone(), pairing: self.pairing.clone() }
    }

    /// Position of a generator index.
    pub fn position(&self, index: usize) -> Option<usize> {
        self.generators.iter().position(|g| g.index == index)
    }

    /// Position of N_g(φ^gen).
    pub fn nil_image(&self, gen: usize) -> Option<usize> {
        self.generators[gen].nilpotent_image.and_then(|t| self.position(t))
    }

    /// Locality order between generator positions.
    pub fn locality(&self, i: usize, j: usize) -> u32 {
        self.generators[i].locality[&self.generators[j].index]
    }

    /// Nilpotency index κ of N_g on the generators (1 when N_g = 0).
    pub fn nilpotency_index(&self) -> u32 {
        (0..self.generators.len())
            .map(|g| {
                let mut depth = 1;
                let mut cur = g;
                while let Some(n) = self.nil_image(cur) {
                    depth += 1;
                    cur = n;
                }
                depth
            })
            .max()
            .unwrap_or(1)
    }

    /// True when the automorphism is the identity.
    pub fn is_untwisted(&self) -> bool {
        self.generators.iter().all(|g| g.g_weight.is_zero() && g.nilpotent_image.is_none())
    }

    /// g φ^gen_n g⁻¹ as Σ_k coefficient · φ^{N^k gen}_n.
    pub fn g_on_generator(&self, gen: usize) -> Vec<(usize, Coeff)> {
        let root = Scalar::root_of_unity(&self.generators[gen].g_weight);
        let mut out = Vec::new();
        let mut cur = Some(gen);
        let mut k = 0u32;
        while let Some(g) = cur {
            let c = Scalar::term(inv_factorial(k as u64), Rational::zero(), k);
            out.push((g, crate::scalar::scalar_mul(&root, &c).to_coeff()));
            cur = self.nil_image(g);
            k += 1;
        }
        out
    }

    /// g = e^{2πi S_g} e^{τ N_g} on the truncated V.
    pub fn g_matrix(&self) -> SparseMat {
        self.space.g_operator()
    }

    /// Checks g φ_n g⁻¹ = (gφ)_n and [N_g, φ_n] = (N_g φ)_n on every stored mode.
    pub fn check_automorphism(&self) -> Report {
        let space = &self.space;
        let g = space.g_operator();
        let g_inv = space.g_inverse();
        let mut conj = CheckResult::new("g conjugates generator modes to modes of g(generator)");
        let mut deriv = CheckResult::new("[N_g, generator mode] = mode of N_g(generator)");
        let mut inverse = CheckResult::new("g * g^-1 = id");
        inverse.record(g.mul(&g_inv) == SparseMat::identity(space.dim()), || "g g^-1 differs from the identity".into());
        for ((gen, n), action) in space.modes() {
            let images = self.g_on_generator(*gen);
            let nil_target = self.nil_image(*gen).map(|t| space.mode(t, n));
            for col in 0..space.dim() {
                if !action.is_defined(col) {
                    continue;
                }
                // g φ_n g⁻¹ e_col
                let lhs = g.apply(&action.mat.apply(g_inv.col(col)));
                let mut rhs = crate::linalg::SparseVec::new();
                for (h, c) in &images {
                    if let Some(m) = space.mode(*h, n) {
                        rhs.axpy(c, m.mat.col(col));
                    }
                }
                conj.record(lhs == rhs, || format!("generator {} mode {} on {}", self.generators[*gen].name, format_rational(n), space.label(col)));
                let comm = space.nil.apply(action.mat.col(col)).sub(&action.mat.apply(space.nil.col(col)));
                let want = match &nil_target {
                    Some(Some(m)) => m.mat.col(col).clone(),
                    _ => crate::linalg::SparseVec::new(),
                };
                deriv.record(comm == want, || format!("generator {} mode {} on {}", self.generators[*gen].name, format_rational(n), space.label(col)));
            }
        }
        let mut report = Report::new(format!("automorphism of {}", self.name()));
        report.push(inverse);
        report.push(conj);
        report.push(deriv);
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn builtins_load_and_round_trip() {
        for name in builtin_names() {
            let spec = builtin(name, &int(3)).unwrap();
            let text = spec.file.to_toml();
            let again = parse_algebra(&text).unwrap();
            assert_eq!(again, spec.file, "{name}");
            assert_eq!(again.to_toml(), text);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut f = builtin_file("heisenberg1", &int(2)).unwrap();
        f.generators[0].index = 0;
        assert!(matches!(load_algebra(f), Err(AlgebraError::InvalidSpec(_))));
        let mut f = builtin_file("heisenberg2_nilpotent", &int(2)).unwrap();
        f.pairings.push(pair(2, 2, "1"));
        assert!(load_algebra(f).is_err(), "N_g stops being a derivation");
        let mut f = builtin_file("fermion", &int(2)).unwrap();
        f.generators[0].g_weight = "3/2".into();
        assert!(load_algebra(f).is_err());
    }

    #[test]
    fn locality_orders() {
        let h = builtin("heisenberg1", &int(2)).unwrap();
        assert_eq!(h.locality(0, 0), 2);
        let f = builtin("fermion", &int(2)).unwrap();
        assert_eq!(f.locality(0, 0), 1);
        let n = builtin("heisenberg2_nilpotent", &int(2)).unwrap();
        assert_eq!(n.locality(0, 1), 1);
        assert_eq!(n.nilpotency_index(), 2);
    }
}
