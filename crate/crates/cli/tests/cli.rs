use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn twistmod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twistmod")).args(args).output().expect("binary runs")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_record(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("error record is JSON")
}

/// p(n) for n ≤ max by counting partitions with parts ≤ k.
fn partitions(max: usize) -> Vec<u64> {
    fn count(n: usize, largest: usize) -> u64 {
        if n == 0 {
            return 1;
        }
        (1..=largest.min(n)).map(|k| count(n - k, k)).sum()
    }
    (0..=max).map(|n| count(n, n)).collect()
}

#[test]
fn verify_untwisted_boson_passes() {
    let out = twistmod(&["verify", "--algebra", "heisenberg1", "--cutoff", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["passed"], true);
    let checks = doc["report"]["checks"].as_array().unwrap();
    assert!(checks.len() >= 8);
    assert!(checks.iter().all(|c| c["passed"] == true && c["samples"].as_u64().unwrap() > 0));
}

#[test]
fn image_character_is_partition_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let out = twistmod(&[
        "character",
        "--algebra",
        "heisenberg1",
        "--cutoff",
        "5",
        "--module",
        "image",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("character.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("weight,parity,g_class,dim"));
    let dims: Vec<u64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(dims, partitions(5));
    let doc = json_file(&dir.path().join("character.json"));
    assert_eq!(doc["command"], "character");
    assert_eq!(doc["character"].as_array().unwrap().len(), 6);
}

#[test]
fn cutoff_below_lower_bound_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = twistmod(&[
        "build",
        "--algebra",
        "heisenberg1",
        "--cutoff",
        "1",
        "--lower-bound",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_record(&out)["error"]["kind"], "usage");
    assert_eq!(json_file(&dir.path().join("error.json"))["error"]["kind"], "usage");
    assert!(!dir.path().join("build.json").exists());
}

#[test]
fn unknown_inputs_are_rejected() {
    let out = twistmod(&["build", "--algebra", "no_such_algebra", "--cutoff", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = twistmod(&["build", "--algebra", "heisenberg1", "--cutoff", "two"]);
    assert_eq!(out.status.code(), Some(2));
    let out = twistmod(&["build", "--cutoff", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_record(&out)["error"]["kind"], "usage");
}

#[test]
fn module_errors_exit_with_a_record() {
    // no Fock instance exists for a nilpotent g pairing a generator with a central one
    let out = twistmod(&["verify", "--algebra", "heisenberg2_nilpotent", "--cutoff", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let record = stderr_record(&out);
    assert_eq!(record["schema_version"], 1);
    assert!(record["error"]["message"].as_str().unwrap().contains("Fock"));
}

#[test]
fn reports_are_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(&a, "1"), (&b, "2")] {
        let out = Command::new(env!("CARGO_BIN_EXE_twistmod"))
            .args(["build", "--algebra", "heisenberg1_minus", "--cutoff", "3", "--out", dir.path().to_str().unwrap()])
            .env("TWISTMOD_JOBS", jobs)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let x = std::fs::read(a.path().join("build.json")).unwrap();
    let y = std::fs::read(b.path().join("build.json")).unwrap();
    assert_eq!(x, y);
    let doc: Value = serde_json::from_slice(&x).unwrap();
    assert_eq!(doc["q_series"], "1 + q^(1/2) + 2q + 3q^(3/2) + 4q^2 + 6q^(5/2) + 8q^3");
    assert_eq!(doc["basis"].as_array().unwrap().len(), doc["dim"].as_u64().unwrap() as usize);
}

#[test]
fn algebra_files_match_the_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("boson.toml");
    let file = twistmod::algebra::builtin_file("heisenberg1_minus", &twistmod::rational::int(3)).unwrap();
    std::fs::write(&spec, file.to_toml()).unwrap();
    let from_file = twistmod(&["character", "--algebra", spec.to_str().unwrap(), "--cutoff", "3", "--module", "fock"]);
    let builtin = twistmod(&["character", "--algebra", "heisenberg1_minus", "--cutoff", "3", "--module", "fock"]);
    assert!(from_file.status.success() && builtin.status.success());
    let (x, y): (Value, Value) = (serde_json::from_slice(&from_file.stdout).unwrap(), serde_json::from_slice(&builtin.stdout).unwrap());
    assert_eq!(x["character"], y["character"]);
    assert_eq!(x["q_series"], "1 + q^(1/2) + q + 2q^(3/2) + 2q^2 + 3q^(5/2) + 4q^3");
}

#[test]
fn seed_maps_extend() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = twistmod(&["map", "--algebra", "heisenberg1_minus", "--cutoff", "3", "--target", "universal", "--out", d]);
    assert!(out.status.success());
    let doc = json_file(&dir.path().join("map.json"));
    let checks = doc["report"]["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["name"] == "induced map is the identity" && c["passed"] == true));
    assert!(doc["surjective_by_slot"].as_object().unwrap().values().all(|s| s == true));

    let out = twistmod(&["map", "--algebra", "heisenberg1_minus", "--cutoff", "3", "--target", "zero", "--out", d]);
    assert!(out.status.success());
    let doc = json_file(&dir.path().join("map.json"));
    assert!(doc["image_character"].as_array().unwrap().iter().all(|r| r["dim"] == 0));

    let out = twistmod(&["map", "--algebra", "heisenberg1_minus", "--cutoff", "3", "--target", "fock", "--out", d]);
    assert!(out.status.success());
    let doc = json_file(&dir.path().join("map.json"));
    assert!(doc["surjective_by_slot"].as_object().unwrap().values().all(|s| s == true));
}
