//! Characters of the constructed modules against enumeration oracles, and the induced-map
//! invariants that do not depend on a particular target.

mod common;

use std::collections::BTreeMap;

use twistmod::algebra::builtin;
use twistmod::error::ModuleError;
use twistmod::induced::{ground_state_map, induced_map};
use twistmod::instances::fock_instance;
use twistmod::rational::{int, rat, to_i64, Rational};
use twistmod::seed::builtin_seed;
use twistmod::universal::{build_universal, UniversalModule, UniversalParams};
use twistmod::{SlotKey, SparseMat};

/// Total dimension per half-unit of weight, 0..=max_half.
fn half_unit_dims(ch: &BTreeMap<SlotKey, usize>, max_half: u32) -> Vec<u64> {
    let mut dims = vec![0u64; max_half as usize + 1];
    for (slot, d) in ch {
        let h = to_i64(&(&slot.weight * int(2))).expect("half-integral weight") as usize;
        if h < dims.len() {
            dims[h] += *d as u64;
        }
    }
    dims
}

/// Multiplies a half-unit character by 1/(1 − q): the free L(−1) tower on the vacuum.
fn with_translation_tower(dims: &[u64]) -> Vec<u64> {
    (0..dims.len()).map(|h| (0..=h / 2).map(|j| dims[h - 2 * j]).sum()).collect()
}

fn universal(name: &str, seed: &str, cutoff: i64, tail_cap: Option<Rational>) -> UniversalModule {
    let v = builtin(name, &int(2)).unwrap();
    let mut params = UniversalParams::new(int(0), int(cutoff));
    params.tail_cap = tail_cap;
    build_universal(&v, &builtin_seed(seed).unwrap(), &params).unwrap()
}

#[test]
fn twisted_fock_counts_odd_half_partitions() {
    let v = builtin("heisenberg1_minus", &int(2)).unwrap();
    let w = fock_instance(&v, &int(6)).unwrap();
    assert_eq!(half_unit_dims(&w.character(), 12), common::odd_half_partitions(12));
}

#[test]
fn fermion_fock_counts_distinct_partitions() {
    // ψ has weight 1/2 and half-integral g-weight, so its modes create weights 1, 2, 3, …
    // plus a zero mode doubling the ground state
    let v = builtin("fermion", &int(2)).unwrap();
    let w = fock_instance(&v, &int(5)).unwrap();
    let distinct = common::distinct_partitions((1..=5).map(|k| 2 * k), 10);
    let want: Vec<u64> = distinct.iter().map(|d| 2 * d).collect();
    assert_eq!(half_unit_dims(&w.character(), 10), want);
}

#[test]
fn untwisted_fock_counts_partitions() {
    let v = builtin("heisenberg1", &int(2)).unwrap();
    let w = fock_instance(&v, &int(7)).unwrap();
    let dims: Vec<u64> = half_unit_dims(&w.character(), 14).into_iter().step_by(2).collect();
    assert_eq!(dims, common::partition_numbers(7));
}

#[test]
fn twisted_universal_is_fock_times_translation_tower() {
    let u = universal("heisenberg1_minus", "vacuum", 4, None);
    let want = with_translation_tower(&common::odd_half_partitions(8));
    assert_eq!(half_unit_dims(&u.character(), 8), want);
}

#[test]
fn fermion_universal_is_fock_times_translation_tower() {
    let u = universal("fermion", "vacuum", 4, None);
    let distinct = common::distinct_partitions((1..=4).map(|k| 2 * k), 8);
    let fock: Vec<u64> = distinct.iter().map(|d| 2 * d).collect();
    assert_eq!(half_unit_dims(&u.character(), 8), with_translation_tower(&fock));
}

#[test]
fn default_tail_cap_is_stable() {
    let base = universal("heisenberg1_minus", "vacuum", 3, None);
    let deeper = universal("heisenberg1_minus", "vacuum", 3, Some(&base.tail_cap + int(2)));
    assert_eq!(base.character(), deeper.character());
}

#[test]
fn joint_and_sequential_closure_agree() {
    let v = builtin("heisenberg1_minus", &int(2)).unwrap();
    let seed = builtin_seed("vacuum").unwrap();
    let joint = build_universal(&v, &seed, &UniversalParams::new(int(0), int(3))).unwrap();
    let mut params = UniversalParams::new(int(0), int(3));
    params.sequential = true;
    let sequential = build_universal(&v, &seed, &params).unwrap();
    assert_eq!(joint.relation_fingerprint(), sequential.relation_fingerprint());
    assert_eq!(joint.module.labels(), sequential.module.labels());
}

#[test]
fn builds_are_deterministic() {
    let a = universal("fermion", "vacuum", 3, None);
    let b = universal("fermion", "vacuum", 3, None);
    assert_eq!(a.module.labels(), b.module.labels());
    assert_eq!(a.basis, b.basis);
    for ((key, x), (_, y)) in a.module.modes().zip(b.module.modes()) {
        assert_eq!(x.mat, y.mat, "mode {key:?}");
    }
}

#[test]
fn universal_slots_respect_the_lower_bound() {
    let u = universal("heisenberg1_minus", "vacuum", 3, None);
    assert!(u.character().keys().all(|slot| slot.weight >= int(0) && slot.weight <= int(3)));
}

#[test]
fn bad_truncations_are_rejected() {
    let v = builtin("heisenberg1", &int(2)).unwrap();
    let seed = builtin_seed("vacuum").unwrap();
    let err = build_universal(&v, &seed, &UniversalParams::new(int(1), int(0))).err().unwrap();
    assert!(matches!(err, ModuleError::Precondition(_)));
    let err = build_universal(&v, &seed, &UniversalParams::new(rat(1, 2), int(2))).err().unwrap();
    assert!(matches!(err, ModuleError::InvalidSeed(_)));
}

#[test]
fn untwisted_image_is_partition_numbers() {
    let u = universal("heisenberg1", "vacuum", 5, None);
    let fock = fock_instance(u.algebra(), &int(5)).unwrap();
    let map = induced_map(&u, &fock, &ground_state_map(&u.seed, &fock).unwrap()).unwrap();
    assert!(map.report.passed(), "{:?}", map.report);
    let image: Vec<u64> = half_unit_dims(&map.image_character, 10).into_iter().step_by(2).collect();
    assert_eq!(image, common::partition_numbers(5));
}

#[test]
fn zero_seed_map_induces_zero() {
    let u = universal("heisenberg1_minus", "vacuum", 3, None);
    let fock = fock_instance(u.algebra(), &int(3)).unwrap();
    let map = induced_map(&u, &fock, &SparseMat::zero(fock.dim(), 1)).unwrap();
    assert!(map.report.passed(), "{:?}", map.report);
    assert!(map.matrix.is_zero());
    assert!(map.image_character.values().all(|r| *r == 0));
}

#[test]
fn identity_seed_map_induces_identity() {
    let u = universal("heisenberg1_minus", "vacuum", 3, None);
    let f = SparseMat::from_columns(u.module.dim(), vec![u.seed_vector(0).unwrap()]);
    let map = induced_map(&u, &u.module, &f).unwrap();
    assert!(map.report.passed(), "{:?}", map.report);
    for k in 0..u.module.dim() {
        if map.defined[k] {
            assert_eq!(*map.matrix.col(k), twistmod::SparseVec::unit(k), "column {}", u.module.label(k));
        }
    }
    assert_eq!(map.image_character, u.character());
}

#[test]
fn non_equivariant_seed_maps_are_rejected() {
    let u = universal("heisenberg1_minus", "vacuum", 3, None);
    let fock = fock_instance(u.algebra(), &int(3)).unwrap();
    // send the weight-0 seed vector to a weight-1/2 vector
    let target = fock.basis_of_weight(&rat(1, 2))[0];
    let f = SparseMat::from_columns(fock.dim(), vec![twistmod::SparseVec::unit(target)]);
    assert!(matches!(induced_map(&u, &fock, &f), Err(ModuleError::NotEquivariant(_))));
}
