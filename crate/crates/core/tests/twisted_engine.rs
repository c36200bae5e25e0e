use twistmod::instances::fock_instance;
use twistmod::rational::rat;
use twistmod::twisted::{check_associativity, check_axioms, check_commutativity, check_well_defined, define_twisted_vom, max_log_power, monodromy_check, Engine};
use twistmod::builtin;

fn run(name: &str, v_cut: (i64, i64), w_cut: (i64, i64), u_max: (i64, i64)) {
    let v = builtin(name, &rat(v_cut.0, v_cut.1)).unwrap();
    let w = fock_instance(&v, &rat(w_cut.0, w_cut.1)).unwrap();
    eprintln!("{name}: dim V = {}, dim W = {}", v.space.dim(), w.dim());
    let engine = Engine::new(&v, &w);
    let t = std::time::Instant::now();
    let vom = define_twisted_vom(&engine, &rat(u_max.0, u_max.1), 0);
    eprintln!("built {} fields in {:?}", vom.fields.len(), t.elapsed());
    let report = check_axioms(&engine, &vom);
    for c in &report.checks {
        eprintln!("  {} {} {:?}", c.passed, c.samples, c.counterexample);
        assert!(c.passed, "{}", c.name);
    }
    let m = monodromy_check(&w, &vom, 0);
    eprintln!("  monodromy {} {} {:?}", m.passed, m.samples, m.counterexample);
    assert!(m.passed);
    eprintln!("  max log {}", max_log_power(&vom));
    let t = std::time::Instant::now();
    let c = check_commutativity(&engine, &vom);
    eprintln!("  commutativity {} {} {:?} {:?}", c.passed, c.samples, c.counterexample, t.elapsed());
    assert!(c.passed);
    let v_engine = Engine::new(&v, &v.space);
    let t = std::time::Instant::now();
    let c = check_associativity(&engine, &v_engine, &vom);
    eprintln!("  associativity {} {} {:?} {:?}", c.passed, c.samples, c.counterexample, t.elapsed());
    assert!(c.passed);
    let t = std::time::Instant::now();
    let c = check_well_defined(&engine, &rat(2, 1), 3);
    eprintln!("  well-defined {} {} {:?} {:?}", c.passed, c.samples, c.counterexample, t.elapsed());
    assert!(c.passed);
}

#[test]
fn heisenberg_untwisted_axioms() {
    run("heisenberg1", (3, 1), (4, 1), (3, 1));
}

#[test]
fn heisenberg_minus_axioms() {
    run("heisenberg1_minus", (3, 1), (4, 1), (3, 1));
}

#[test]
fn fermion_ramond_axioms() {
    run("fermion", (3, 1), (4, 1), (3, 1));
}
