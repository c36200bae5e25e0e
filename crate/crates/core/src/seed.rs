//! Seed spaces M: finite-dimensional graded spaces carrying g, L_M(0) and N_g, from which the
//! universal twisted module is generated.

use std::collections::BTreeMap;
use std::path::Path;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{ModuleError, ParseError};
use crate::field::Coeff;
use crate::linalg::{SparseMat, SparseVec};
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedFile {
    pub name: String,
    #[serde(rename = "vector")]
    pub vectors: Vec<SeedVectorEntry>,
    #[serde(default, rename = "nilpotent", skip_serializing_if = "Vec::is_empty")]
    pub nilpotent: Vec<SeedNilpotentEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedVectorEntry {
    pub name: String,
    pub weight: String,
    #[serde(default)]
    pub parity: u8,
    #[serde(default = "zero_string")]
    pub g_weight: String,
    /// Name of the basis vector L_M(0)_N sends this one to, if nonzero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l0_nilpotent_image: Option<String>,
}

/// One matrix entry of N_g on M: N_g(source) has `value` on `target`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedNilpotentEntry {
    pub source: String,
    pub target: String,
    pub value: String,
}

fn zero_string() -> String {
    "0".into()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedVector {
    pub name: String,
    pub weight: Rational,
    pub parity: u8,
    pub g_weight: Rational,
    pub l0_nilpotent: Option<usize>,
}

/// A validated seed space.
#[derive(Clone, Debug)]
pub struct SeedSpace {
    pub file: SeedFile,
    pub vectors: Vec<SeedVector>,
    /// N_g on M, column-major over the seed basis.
    pub nilpotent: SparseMat,
}

const BUILTIN_SEEDS: &[&str] = &["vacuum", "log_pair"];

pub fn builtin_seed_names() -> &'static [&'static str] {
    BUILTIN_SEEDS
}

fn entry(name: &str, weight: &str, l0: Option<&str>) -> SeedVectorEntry {
    SeedVectorEntry {
        name: name.into(),
        weight: weight.into(),
        parity: 0,
        g_weight: "0".into(),
        l0_nilpotent_image: l0.map(Into::into),
    }
}

/// Declarative form of a built-in seed.
pub fn builtin_seed_file(name: &str) -> Result<SeedFile, ModuleError> {
    let vectors = match name {
        // one even vector of weight 0
        "vacuum" => vec![entry("w", "0", None)],
        // a Jordan block of L_M(0): L_M(0)_N w1 = w2
        "log_pair" => vec![entry("w1", "0", Some("w2")), entry("w2", "0", None)],
        other => return Err(ModuleError::InvalidSeed(format!("unknown built-in seed `{other}`"))),
    };
    Ok(SeedFile { name: name.into(), vectors, nilpotent: Vec::new() })
}

pub fn builtin_seed(name: &str) -> Result<SeedSpace, ModuleError> {
    load_seed(builtin_seed_file(name)?)
}

pub fn parse_seed(text: &str) -> Result<SeedFile, ModuleError> {
    toml::from_str(text).map_err(|e| ModuleError::Parse(ParseError::Document(e.to_string())))
}

pub fn load_seed_path(path: &Path) -> Result<SeedSpace, ModuleError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModuleError::Parse(ParseError::Document(format!("{}: {e}", path.display()))))?;
    load_seed(parse_seed(&text)?)
}

impl SeedFile {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("seed files always serialize")
    }
}

fn invalid(msg: impl Into<String>) -> ModuleError {
    ModuleError::InvalidSeed(msg.into())
}

/// Validates a seed description: homogeneous basis, L_M(0)_N closing in the basis, and a
/// nilpotent N_g preserving all gradings.
pub fn load_seed(file: SeedFile) -> Result<SeedSpace, ModuleError> {
    if file.vectors.is_empty() {
        return Err(invalid("a seed needs at least one basis vector"));
    }
    let mut position = BTreeMap::new();
    for (i, v) in file.vectors.iter().enumerate() {
        if position.insert(v.name.clone(), i).is_some() {
            return Err(invalid(format!("duplicate vector name `{}`", v.name)));
        }
    }
    let lookup = |name: &str| position.get(name).copied().ok_or_else(|| invalid(format!("unknown vector `{name}`")));
    let mut vectors = Vec::with_capacity(file.vectors.len());
    for v in &file.vectors {
        let weight = parse_rational(&v.weight)?;
        let g_weight = parse_rational(&v.g_weight)?;
        if v.parity > 1 {
            return Err(invalid(format!("parity of `{}` must be 0 or 1", v.name)));
        }
        if g_weight.is_negative() || g_weight >= Rational::one() {
            return Err(invalid(format!("g-weight of `{}` must lie in [0, 1)", v.name)));
        }
        let l0_nilpotent = v.l0_nilpotent_image.as_deref().map(lookup).transpose()?;
        vectors.push(SeedVector { name: v.name.clone(), weight, parity: v.parity, g_weight, l0_nilpotent });
    }
    let same_grading = |a: usize, b: usize| {
        let (x, y) = (&vectors[a], &vectors[b]);
        x.weight == y.weight && x.parity == y.parity && x.g_weight == y.g_weight
    };
    for (a, v) in vectors.iter().enumerate() {
        if let Some(b) = v.l0_nilpotent {
            if !same_grading(a, b) {
                return Err(invalid(format!("L(0) nilpotent image of `{}` changes a grading", v.name)));
            }
        }
    }
    // the L_M(0)_N chains must terminate
    for start in 0..vectors.len() {
        let mut cur = Some(start);
        for _ in 0..=vectors.len() {
            cur = cur.and_then(|c| vectors[c].l0_nilpotent);
        }
        if cur.is_some() {
            return Err(invalid("L(0) nilpotent part is not nilpotent"));
        }
    }
    let dim = vectors.len();
    let mut nilpotent = SparseMat::zero(dim, dim);
    for e in &file.nilpotent {
        let (s, t) = (lookup(&e.source)?, lookup(&e.target)?);
        if !same_grading(s, t) {
            return Err(invalid(format!("N_g entry {} -> {} changes a grading", e.source, e.target)));
        }
        nilpotent.add_entry(t, s, &Coeff::from_rational(parse_rational(&e.value)?));
    }
    let mut power = nilpotent.clone();
    for _ in 0..dim {
        power = power.mul(&nilpotent);
    }
    if !power.is_zero() {
        return Err(invalid("N_g on the seed is not nilpotent"));
    }
    Ok(SeedSpace { file, vectors, nilpotent })
}

impl SeedSpace {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn min_weight(&self) -> Rational {
        self.vectors.iter().map(|v| v.weight.clone()).min().unwrap_or_else(Rational::zero)
    }

    /// N_g w^a.
    pub fn nil_of(&self, a: usize) -> &SparseVec {
        self.nilpotent.col(a)
    }

    pub fn describe(&self) -> String {
        self.vectors
            .iter()
            .map(|v| format!("{} (weight {}, g-weight {})", v.name, format_rational(&v.weight), format_rational(&v.g_weight)))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip() {
        for name in builtin_seed_names() {
            let file = builtin_seed_file(name).unwrap();
            let again = parse_seed(&file.to_toml()).unwrap();
            assert_eq!(file, again);
            load_seed(again).unwrap();
        }
    }

    #[test]
    fn invalid_seeds_are_rejected() {
        let mut f = builtin_seed_file("log_pair").unwrap();
        f.vectors[1].weight = "1".into();
        assert!(matches!(load_seed(f), Err(ModuleError::InvalidSeed(_))));
        let mut f = builtin_seed_file("vacuum").unwrap();
        f.vectors[0].g_weight = "1".into();
        assert!(load_seed(f).is_err());
        let mut f = builtin_seed_file("log_pair").unwrap();
        f.vectors[1].l0_nilpotent_image = Some("w1".into());
        assert!(load_seed(f).is_err());
        let mut f = builtin_seed_file("log_pair").unwrap();
        f.nilpotent.push(SeedNilpotentEntry { source: "w1".into(), target: "w1".into(), value: "1".into() });
        assert!(load_seed(f).is_err());
    }
}
