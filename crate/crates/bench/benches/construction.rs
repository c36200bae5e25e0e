use criterion::{criterion_group, criterion_main, Criterion};

use twistmod::algebra::builtin;
use twistmod::instances::fock_instance;
use twistmod::rational::int;
use twistmod::seed::builtin_seed;
use twistmod::twisted::{check_axioms, define_twisted_vom, Engine};
use twistmod::universal::{build_universal, UniversalParams};

fn universal_modules(c: &mut Criterion) {
    let mut group = c.benchmark_group("universal");
    group.sample_size(10);
    let seed = builtin_seed("vacuum").unwrap();
    for (name, cutoff) in [("heisenberg1_minus", 3), ("fermion", 3), ("heisenberg1", 4)] {
        let v = builtin(name, &int(2)).unwrap();
        group.bench_function(format!("{name} to weight {cutoff}"), |b| {
            b.iter(|| build_universal(&v, &seed, &UniversalParams::new(int(0), int(cutoff))).unwrap())
        });
    }
    group.finish();
}

fn fock_modules(c: &mut Criterion) {
    let mut group = c.benchmark_group("fock");
    for name in ["heisenberg1", "heisenberg1_minus", "fermion"] {
        let v = builtin(name, &int(2)).unwrap();
        group.bench_function(format!("{name} to weight 6"), |b| b.iter(|| fock_instance(&v, &int(6)).unwrap()));
    }
    group.finish();
}

fn axiom_suite(c: &mut Criterion) {
    let mut group = c.benchmark_group("axioms");
    group.sample_size(10);
    let v = builtin("heisenberg1_minus", &int(2)).unwrap();
    let w = fock_instance(&v, &int(4)).unwrap();
    group.bench_function("heisenberg1_minus Fock to weight 4", |b| {
        b.iter(|| {
            let engine = Engine::new(&v, &w);
            let vom = define_twisted_vom(&engine, &int(2), 0);
            check_axioms(&engine, &vom)
        })
    });
    group.finish();
}

criterion_group!(benches, universal_modules, fock_modules, axiom_suite);
criterion_main!(benches);
