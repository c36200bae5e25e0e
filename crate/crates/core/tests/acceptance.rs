//! Acceptance run: one PASS/FAIL line per criterion, exact comparisons throughout.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use twistmod::algebra::{builtin, builtin_names, AlgebraSpec};
use twistmod::induced::{generated_by_seed, ground_state_map, induced_map, ExplicitPsi};
use twistmod::instances::fock_instance;
use twistmod::locality::check_psi_locality;
use twistmod::module::TruncatedModule;
use twistmod::rational::int;
use twistmod::report::CheckResult;
use twistmod::seed::builtin_seed;
use twistmod::twisted::{
    check_associativity, check_axioms, check_commutativity, check_log_fields, check_well_defined, define_twisted_vom,
    max_log_power, monodromy_check, Engine,
};
use twistmod::universal::{build_universal, UniversalModule, UniversalParams};
use twistmod::SparseVec;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn from_checks(checks: &[CheckResult], extra: &str) -> Self {
        let failed: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.counterexample.clone().unwrap_or_default()))
            .collect();
        let samples: usize = checks.iter().map(|c| c.samples).sum();
        let vacuous: Vec<&str> = checks.iter().filter(|c| c.samples == 0).map(|c| c.name.as_str()).collect();
        let mut detail = format!("{} checks, {samples} samples", checks.len());
        if !extra.is_empty() {
            detail = format!("{detail}; {extra}");
        }
        if !vacuous.is_empty() {
            detail = format!("{detail}; no samples for: {}", vacuous.join(", "));
        }
        if !failed.is_empty() {
            detail = format!("{detail}; failed: {}", failed.join(" | "));
        }
        Outcome { passed: failed.is_empty() && vacuous.is_empty(), detail }
    }
}

fn algebra(name: &str, cutoff: i64) -> AlgebraSpec {
    builtin(name, &int(cutoff)).expect("built-in algebra")
}

fn universal(name: &str, seed: &str, cutoff: i64, tail_cap: Option<i64>) -> UniversalModule {
    let v = algebra(name, 2);
    let seed = builtin_seed(seed).expect("built-in seed");
    let mut params = UniversalParams::new(int(0), int(cutoff));
    params.tail_cap = tail_cap.map(int);
    build_universal(&v, &seed, &params).expect("universal module")
}

/// Graded dimensions in half-units of weight, summed over parity and g-class.
fn half_unit_dims(m: &TruncatedModule, max_half: u32) -> Vec<u64> {
    let mut dims = vec![0u64; max_half as usize + 1];
    for (slot, cols) in m.slots() {
        let h = &slot.weight * int(2);
        if let Some(i) = twistmod::rational::to_i64(&h) {
            if (0..=max_half as i64).contains(&i) {
                dims[i as usize] += cols.len() as u64;
            }
        }
    }
    dims
}

/// The module the criteria use for each built-in: its Fock instance, or the universal module
/// where no Fock instance exists.
fn module_for(name: &str, cutoff: i64, algebra_cutoff: i64) -> (AlgebraSpec, TruncatedModule) {
    let v = algebra(name, algebra_cutoff);
    match fock_instance(&v, &int(cutoff)) {
        Ok(w) => (v, w),
        Err(_) => (v, universal(name, "vacuum", cutoff, Some(3)).module),
    }
}

fn identity_and_generators() -> Outcome {
    let mut checks = Vec::new();
    for name in builtin_names() {
        let (v, w) = module_for(name, 6, 2);
        let engine = Engine::new(&v, &w);
        let vom = define_twisted_vom(&engine, &int(1), 0);
        let report = check_axioms(&engine, &vom);
        for c in report.checks.into_iter().take(2) {
            checks.push(CheckResult { name: format!("{name}: {}", c.name), ..c });
        }
    }
    Outcome::from_checks(&checks, "Fock instances at cutoff 6; heisenberg2_nilpotent via its universal module")
}

fn weak_commutativity() -> Outcome {
    let mut checks = Vec::new();
    let mut modules: Vec<(String, AlgebraSpec, TruncatedModule)> = Vec::new();
    for name in ["heisenberg1", "heisenberg1_minus", "fermion"] {
        let v = algebra(name, 2);
        let w = fock_instance(&v, &int(6)).unwrap();
        modules.push((format!("{name} Fock"), v, w));
    }
    let universals = [
        ("heisenberg1", "vacuum", Some(6)),
        ("heisenberg1_minus", "vacuum", None),
        ("fermion", "vacuum", None),
        ("heisenberg2_nilpotent", "log_pair", Some(3)),
    ];
    for (name, seed, cap) in universals {
        let u = universal(name, seed, 6, cap);
        let c = check_psi_locality(&u, &int(1));
        checks.push(CheckResult { name: format!("{name} universal ({seed}): {}", c.name), ..c });
        modules.push((format!("{name} universal ({seed})"), algebra(name, 2), u.module));
    }
    for (label, v, w) in &modules {
        let engine = Engine::new(v, w);
        let vom = define_twisted_vom(&engine, &int(1), 0);
        let c = check_commutativity(&engine, &vom);
        checks.push(CheckResult { name: format!("{label}: {}", c.name), ..c });
    }
    Outcome::from_checks(&checks, "phi-phi on 7 modules, phi-psi on 4 universal modules, cutoff 6")
}

fn untwisted_character() -> Outcome {
    let u = universal("heisenberg1", "vacuum", 8, None);
    let fock = fock_instance(u.algebra(), &int(8)).unwrap();
    let f = ground_state_map(&u.seed, &fock).unwrap();
    let map = induced_map(&u, &fock, &f).unwrap();
    let oracle = common::partition_numbers(8);
    let fock_dims: Vec<u64> = half_unit_dims(&fock, 16).into_iter().step_by(2).collect();
    let mut image = vec![0u64; 9];
    for (slot, rank) in &map.image_character {
        if let Some(h) = twistmod::rational::to_i64(&slot.weight) {
            image[h as usize] += *rank as u64;
        }
    }
    let mut checks = map.report.checks.clone();
    let mut matches = CheckResult::new("image dimensions = Fock dimensions = partition numbers");
    matches.record(image == oracle && fock_dims == oracle, || format!("image {image:?}, Fock {fock_dims:?}, oracle {oracle:?}"));
    checks.push(matches);
    Outcome::from_checks(&checks, &format!("image {image:?}"))
}

fn twisted_character() -> Outcome {
    let v = algebra("heisenberg1_minus", 3);
    let w = fock_instance(&v, &int(5)).unwrap();
    let engine = Engine::new(&v, &w);
    let vom = define_twisted_vom(&engine, &int(2), 0);
    let mut checks = check_axioms(&engine, &vom).checks;
    checks.push(check_commutativity(&engine, &vom));
    let v_engine = Engine::new(&v, &v.space);
    checks.push(check_associativity(&engine, &v_engine, &vom));
    checks.push(check_well_defined(&engine, &int(2), 3));
    checks.push(monodromy_check(&w, &vom, 0));
    let dims = half_unit_dims(&w, 10);
    let oracle = common::odd_half_partitions(10);
    let mut matches = CheckResult::new("character = partitions into odd halves");
    matches.record(dims == oracle, || format!("module {dims:?}, oracle {oracle:?}"));
    checks.push(matches);
    Outcome::from_checks(&checks, &format!("dims {:?}", &dims[..7]))
}

fn log_machinery() -> Outcome {
    let u = universal("heisenberg2_nilpotent", "log_pair", 3, Some(5));
    let w = &u.module;
    let v = algebra("heisenberg2_nilpotent", 3);
    let engine = Engine::new(&v, w);
    let vom = define_twisted_vom(&engine, &int(2), 0);
    let mut checks = Vec::new();

    // the series the log machinery produces: generator fields and ψ fields
    let mut gen_logs = CheckResult::new("generator fields phi_W(x) have log power <= 1");
    for g in 0..w.gens.len() {
        let series = w.field_series(g);
        gen_logs.record(series.max_log_power() <= 1, || format!("{} has log power {}", w.gens[g].name, series.max_log_power()));
    }
    checks.push(gen_logs);
    let mut psi_logs = CheckResult::new("psi fields psi_W(x) u have log power <= 1");
    let seed_images: Vec<SparseVec> = (0..u.seed.dim()).map(|a| u.seed_vector(a).unwrap()).collect();
    let psi = ExplicitPsi::new(u.algebra(), w, &u.seed, seed_images);
    for a in 0..u.seed.dim() {
        for b in 0..u.algebra().space.dim() {
            for n in -3..=1 {
                if let Some(logs) = psi.psi_all_logs(a, &int(n), &SparseVec::unit(b)) {
                    psi_logs.record(logs.len() <= 2, || format!("log power {} on seed {a}, vector {b}, mode {n}", logs.len() - 1));
                }
            }
        }
    }
    checks.push(psi_logs);
    let mut chain_bound = CheckResult::new("every Y(u, x) stays within the chain log bound");
    for (idx, field) in &vom.fields {
        let length = twistmod::twisted::basis_chain(&v, *idx).len() as u32;
        chain_bound.record(field.max_log() <= length, || format!("u index {idx} has log power {}", field.max_log()));
    }
    checks.push(chain_bound);
    checks.push(check_axioms(&engine, &vom).checks.remove(0));
    checks.push(monodromy_check(w, &vom, 0));
    checks.push(monodromy_check(w, &vom, -1));
    checks.push(check_log_fields(w));
    Outcome::from_checks(&checks, &format!("dim {} at tail cap 5; max log power of Y over weight-2 vectors {}", w.dim(), max_log_power(&vom)))
}

fn well_definedness() -> Outcome {
    let mut checks = Vec::new();
    for name in builtin_names() {
        let (v, w) = module_for(name, 4, 4);
        let engine = Engine::new(&v, &w);
        let c = check_well_defined(&engine, &int(4), 4);
        checks.push(CheckResult { name: format!("{name}: {}", c.name), ..c });
    }
    Outcome::from_checks(&checks, "chains of length <= 4 up to weight 4")
}

fn duality() -> Outcome {
    let mut checks = Vec::new();
    for name in ["heisenberg1", "heisenberg1_minus"] {
        let v = algebra(name, 4);
        let w = fock_instance(&v, &int(4)).unwrap();
        let engine = Engine::new(&v, &w);
        let vom = define_twisted_vom(&engine, &int(2), 0);
        let v_engine = Engine::new(&v, &v.space);
        let c = check_associativity(&engine, &v_engine, &vom);
        checks.push(CheckResult { name: format!("{name}: {}", c.name), ..c });
    }
    Outcome::from_checks(&checks, "u, v of weight <= 2 on modules cut at weight 4")
}

fn universal_property() -> Outcome {
    let u = universal("heisenberg1_minus", "vacuum", 4, None);
    let fock = fock_instance(u.algebra(), &int(4)).unwrap();
    let f = ground_state_map(&u.seed, &fock).unwrap();
    let map = induced_map(&u, &fock, &f).unwrap();
    let mut checks = map.report.checks.clone();
    let mut surjective = CheckResult::new("surjective onto the twisted Fock module in every slot");
    let fock_slots = fock.character();
    for (slot, dim) in &fock_slots {
        let rank = map.image_character.get(slot).copied().unwrap_or(0);
        surjective.record(rank == *dim, || format!("slot {slot:?}: rank {rank}, Fock {dim}"));
    }
    checks.push(surjective);
    let mut defined = CheckResult::new("defined on every basis vector");
    for (k, d) in map.defined.iter().enumerate() {
        defined.record(*d, || format!("undefined on {}", u.module.label(k)));
    }
    checks.push(defined);
    let mut unique = CheckResult::new("the seed generates every slot, so the map is unique");
    let generated = generated_by_seed(&u);
    for (slot, cols) in u.module.slots() {
        let g = generated.get(slot).copied().unwrap_or(0);
        unique.record(g == cols.len(), || format!("slot {slot:?}: generated {g} of {}", cols.len()));
    }
    checks.push(unique);
    let dims: BTreeMap<String, usize> = fock_slots.iter().map(|(s, d)| (twistmod::rational::format_rational(&s.weight), *d)).collect();
    Outcome::from_checks(&checks, &format!("Fock slots {dims:?}"))
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("identity and generator reproduction, cutoff 6, all built-ins", Duration::from_secs(60), identity_and_generators),
        ("weak commutativity suite on constructed modules, cutoff 6", Duration::from_secs(120), weak_commutativity),
        ("untwisted universal module onto Fock: partition numbers to weight 8", Duration::from_secs(120), untwisted_character),
        ("g = -1 twisted Fock: axiom suite at cutoff 5, odd-half partitions", Duration::from_secs(120), twisted_character),
        ("log machinery on heisenberg2_nilpotent, cutoff 3", Duration::from_secs(120), log_machinery),
        ("well-definedness of relations up to weight 4", Duration::from_secs(120), well_definedness),
        ("duality: product against iterate, total weight <= 4", Duration::from_secs(300), duality),
        ("universal property onto the g = -1 Fock module, cutoff 4", Duration::from_secs(120), universal_property),
    ];
    let mut all = true;
    for (i, (name, budget, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let in_time = took <= budget;
        let passed = outcome.passed && in_time;
        all &= passed;
        println!(
            "{} {}. {name} [{:.1}s of {}s] {}",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            budget.as_secs(),
            outcome.detail
        );
    }
    if !all {
        std::process::exit(1);
    }
}
