use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use twistmod::algebra::{builtin, builtin_names, load_algebra, parse_algebra, AlgebraSpec};
use twistmod::error::{AlgebraError, ModuleError, ParseError};
use twistmod::induced::{ground_state_map, induced_map};
use twistmod::instances::fock_instance;
use twistmod::rational::{format_rational, parse_rational, Rational};
use twistmod::seed::{builtin_seed, builtin_seed_names, load_seed_path, SeedSpace};
use twistmod::twisted::{
    check_associativity, check_axioms, check_commutativity, check_log_fields, check_well_defined, define_twisted_vom,
    monodromy_check, Engine,
};
use twistmod::universal::{build_universal, character_csv, q_series, UniversalModule, UniversalParams};
use twistmod::{CheckResult, Report, SlotKey, SparseMat, TruncatedModule};

use crate::args::{CharacterSource, Command, Common, Target, VerifySource};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] twistmod::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.kind(),
        }
    }
}

impl From<ModuleError> for CliError {
    fn from(e: ModuleError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Core(e.into())
    }
}

/// What a command produced: report files keyed by name, plus whether every check passed.
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub passed: bool,
    pub summary: String,
}

/// Validated numeric configuration shared by all commands.
struct Config {
    lower: Rational,
    cutoff: Rational,
    tail_cap: Option<Rational>,
    branch: i64,
}

fn rational_arg(flag: &str, text: &str) -> Result<Rational, CliError> {
    parse_rational(text).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn config(common: &Common) -> Result<Config, CliError> {
    let lower = rational_arg("lower-bound", &common.lower_bound)?;
    let cutoff = rational_arg("cutoff", &common.cutoff)?;
    if cutoff < lower {
        return Err(CliError::Usage(format!(
            "--cutoff {} is below --lower-bound {}",
            format_rational(&cutoff),
            format_rational(&lower)
        )));
    }
    let tail_cap = common.tail_cap.as_deref().map(|t| rational_arg("tail-cap", t)).transpose()?;
    Ok(Config { lower, cutoff, tail_cap, branch: common.branch })
}

fn load_algebra_arg(arg: &str, cutoff: &Rational) -> Result<AlgebraSpec, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        return Ok(load_algebra(parse_algebra(&text)?.with_cutoff(cutoff))?);
    }
    if builtin_names().contains(&arg) {
        return Ok(builtin(arg, cutoff)?);
    }
    Err(CliError::Usage(format!(
        "--algebra `{arg}` is neither a file nor a built-in ({})",
        builtin_names().join(", ")
    )))
}

fn load_seed_arg(arg: &str) -> Result<SeedSpace, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(load_seed_path(path)?);
    }
    if builtin_seed_names().contains(&arg) {
        return Ok(builtin_seed(arg)?);
    }
    Err(CliError::Usage(format!(
        "--seed `{arg}` is neither a file nor a built-in ({})",
        builtin_seed_names().join(", ")
    )))
}

#[derive(Serialize)]
struct SlotRow<'a> {
    #[serde(flatten)]
    slot: &'a SlotKey,
    dim: usize,
}

fn character_rows(ch: &BTreeMap<SlotKey, usize>) -> Vec<SlotRow<'_>> {
    ch.iter().map(|(slot, dim)| SlotRow { slot, dim: *dim }).collect()
}

fn envelope(command: &str, common: &Common, cfg: &Config, body: Value) -> String {
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": {
            "algebra": common.algebra,
            "seed": common.seed,
            "lower_bound": format_rational(&cfg.lower),
            "cutoff": format_rational(&cfg.cutoff),
            "branch": cfg.branch,
            "tail_cap": cfg.tail_cap.as_ref().map(format_rational),
        },
    });
    if let (Value::Object(doc), Value::Object(body)) = (&mut doc, body) {
        doc.extend(body);
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("reports always serialize");
    text.push('\n');
    text
}

fn report_value(report: &Report) -> Value {
    json!({ "passed": report.passed(), "report": report })
}

/// V truncated deep enough for every vector a module truncated at `cfg` can see.
fn algebra_for(common: &Common, cfg: &Config, at_least: &Rational) -> Result<AlgebraSpec, CliError> {
    let depth = (&cfg.cutoff - &cfg.lower).max(at_least.clone());
    load_algebra_arg(&common.algebra, &depth)
}

fn universal(common: &Common, cfg: &Config, v: &AlgebraSpec) -> Result<UniversalModule, CliError> {
    let seed = load_seed_arg(&common.seed)?;
    let mut params = UniversalParams::new(cfg.lower.clone(), cfg.cutoff.clone());
    params.tail_cap = cfg.tail_cap.clone();
    Ok(build_universal(v, &seed, &params)?)
}

fn fock(v: &AlgebraSpec, cfg: &Config) -> Result<TruncatedModule, CliError> {
    if cfg.lower > Rational::from_integer(0.into()) {
        return Err(CliError::Usage("the Fock instance has weights from 0; use --lower-bound <= 0".into()));
    }
    Ok(fock_instance(v, &cfg.cutoff)?)
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    let common = command.common();
    let cfg = config(common)?;
    let zero = Rational::from_integer(0.into());
    match command {
        Command::Build(_) => {
            let v = algebra_for(common, &cfg, &zero)?;
            let u = universal(common, &cfg, &v)?;
            let ch = u.character();
            let basis: Vec<Value> = (0..u.module.dim())
                .map(|k| json!({ "label": u.module.label(k), "slot": u.module.slot(k) }))
                .collect();
            let relations: BTreeMap<&str, usize> = u.stats.new_relations.iter().map(|(k, n)| (k.name(), *n)).collect();
            let body = json!({
                "module": u.module.name,
                "tail_cap": format_rational(&u.tail_cap),
                "dim": u.module.dim(),
                "tails": u.stats.tails,
                "relation_rank": u.relation_rank(),
                "relations_by_kind": relations,
                "closure_rounds": u.stats.closure_rounds,
                "undefined_columns": u.stats.undefined_columns,
                "q_series": q_series(&ch),
                "character": character_rows(&ch),
                "basis": basis,
            });
            Ok(Outcome {
                files: vec![("build.json".into(), envelope(command.name(), common, &cfg, body))],
                passed: true,
                summary: format!("{}: dim {}, {}", u.module.name, u.module.dim(), q_series(&ch)),
            })
        }
        Command::Character { module, .. } => {
            let v = algebra_for(common, &cfg, &zero)?;
            let (name, ch) = match module {
                CharacterSource::Universal => {
                    let u = universal(common, &cfg, &v)?;
                    (u.module.name.clone(), u.character())
                }
                CharacterSource::Fock => {
                    let w = fock(&v, &cfg)?;
                    (w.name.clone(), w.character())
                }
                CharacterSource::Image => {
                    let u = universal(common, &cfg, &v)?;
                    let w = fock(&v, &cfg)?;
                    let f = ground_state_map(&u.seed, &w)?;
                    let map = induced_map(&u, &w, &f)?;
                    (format!("image of the {} in the {}", u.module.name, w.name), map.image_character)
                }
            };
            let body = json!({ "module": name, "q_series": q_series(&ch), "character": character_rows(&ch) });
            Ok(Outcome {
                files: vec![
                    ("character.json".into(), envelope(command.name(), common, &cfg, body)),
                    ("character.csv".into(), character_csv(&ch)),
                ],
                passed: true,
                summary: format!("{name}: {}", q_series(&ch)),
            })
        }
        Command::Verify { module, vertex_weight, .. } => {
            let vertex_weight = rational_arg("vertex-weight", vertex_weight)?;
            let v = algebra_for(common, &cfg, &vertex_weight)?;
            let built;
            let w = match module {
                VerifySource::Fock => fock(&v, &cfg)?,
                VerifySource::Universal => {
                    built = universal(common, &cfg, &v)?;
                    built.module.clone()
                }
            };
            let report = verify(&v, &w, &vertex_weight, cfg.branch);
            let body = report_value(&report);
            Ok(Outcome {
                files: vec![("verify.json".into(), envelope(command.name(), common, &cfg, body))],
                passed: report.passed(),
                summary: summary_line(&report),
            })
        }
        Command::Map { target, .. } => {
            let v = algebra_for(common, &cfg, &zero)?;
            let u = universal(common, &cfg, &v)?;
            let fock_target;
            let (w, f) = match target {
                Target::Fock | Target::Zero => {
                    fock_target = fock(&v, &cfg)?;
                    let f = if *target == Target::Zero {
                        SparseMat::zero(fock_target.dim(), u.seed.dim())
                    } else {
                        ground_state_map(&u.seed, &fock_target)?
                    };
                    (&fock_target, f)
                }
                Target::Universal => {
                    let cols = (0..u.seed.dim())
                        .map(|a| {
                            u.seed_vector(a)
                                .ok_or_else(|| CliError::Usage(format!("seed vector {a} lies outside the truncation")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    (&u.module, SparseMat::from_columns(u.module.dim(), cols))
                }
            };
            let map = induced_map(&u, w, &f)?;
            let mut report = map.report.clone();
            if *target == Target::Universal {
                let mut identity = CheckResult::new("induced map is the identity");
                for k in 0..u.module.dim() {
                    if map.defined[k] {
                        let col = map.matrix.col(k);
                        identity.record(*col == twistmod::SparseVec::unit(k), || format!("column {}", u.module.label(k)));
                    }
                }
                report.push(identity);
            }
            let target_ch = w.character();
            let surjective: BTreeMap<String, bool> = target_ch
                .iter()
                .map(|(slot, dim)| {
                    let rank = map.image_character.get(slot).copied().unwrap_or(0);
                    (slot_name(slot), rank == *dim)
                })
                .collect();
            let body = json!({
                "source": u.module.name,
                "target": w.name,
                "passed": report.passed(),
                "defined_columns": map.defined.iter().filter(|d| **d).count(),
                "columns": map.defined.len(),
                "image_character": character_rows(&map.image_character),
                "target_character": character_rows(&target_ch),
                "surjective_by_slot": surjective,
                "report": report,
            });
            Ok(Outcome {
                files: vec![("map.json".into(), envelope(command.name(), common, &cfg, body))],
                passed: report.passed(),
                summary: format!("{}; image {}", summary_line(&report), q_series(&map.image_character)),
            })
        }
    }
}

fn slot_name(slot: &SlotKey) -> String {
    format!("{}/{}/{}", format_rational(&slot.weight), slot.parity, format_rational(&slot.g_class))
}

fn summary_line(report: &Report) -> String {
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        format!("{}: {} checks passed", report.subject, report.checks.len())
    } else {
        format!("{}: failed {}", report.subject, failed.join("; "))
    }
}

fn verify(v: &AlgebraSpec, w: &TruncatedModule, vertex_weight: &Rational, branch: i64) -> Report {
    let engine = Engine::new(v, w);
    let vom = define_twisted_vom(&engine, vertex_weight, branch);
    let mut report = check_axioms(&engine, &vom);
    report.subject = format!("axioms on the {}", w.name);
    report.push(check_commutativity(&engine, &vom));
    let v_engine = Engine::new(v, &v.space);
    report.push(check_associativity(&engine, &v_engine, &vom));
    report.push(check_well_defined(&engine, vertex_weight, 3));
    report.push(monodromy_check(w, &vom, branch));
    if w.log_fields {
        report.push(check_log_fields(w));
    }
    report
}
