//! Command-line runner.
//!
//! Exit codes: 0 on success, 1 on a domain error (a JSON error object is
//! printed), 2 on a usage error. Outputs go to `--out` when given and to
//! stdout otherwise.

use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::adapted::{approximate_adapted, convergence_report, Schedule};
use crate::compat::{CheckReport, Checker, Witness};
use crate::control::{causal_value, causal_value_two_marginal, control_values, unconstrained_value};
use crate::error::{Error, Result};
use crate::extreme::{decompose_compatible, MixtureDecomposition};
use crate::families::{adapted_threshold, independent_product};
use crate::io::{parse_coupling, parse_model, parse_path_law, parse_tau, path_law_to_doc, read_file};
use crate::lp::Sense;
use crate::monge::{dyadic_partitions, level_table};
use crate::path::{AdaptedMap, JointPathLaw, PathMeasure};
use crate::scalar::{format_rational, Rational, FLOAT_TOL};
use crate::stable::rotation::rotation_demo;
use crate::stopping::{approximate_stopping, decompose_stopping, independent_uniform_family, is_randomized_st, StoppingTime};
use crate::suite::{run_all, SuiteConfig};

#[derive(Debug, Parser)]
#[command(name = "cotlab", version, about = "Couplings, compatibility and causal transport on finite path spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveSense {
    Min,
    Max,
}

#[derive(Debug, Args)]
struct Common {
    /// Instance file (JSON).
    #[arg(long)]
    instance: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compatibility verdict for a joint path law.
    CheckCompat {
        #[command(flatten)]
        io: Common,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        /// Run all four checkers instead of the conditional-independence one.
        #[arg(long)]
        all_checkers: bool,
    },
    /// Per-level gaps of the Monge approximation of a coupling (CSV).
    MongeApprox {
        #[command(flatten)]
        io: Common,
        /// `all` or a comma-separated list of levels.
        #[arg(long, default_value = "all")]
        levels: String,
    },
    /// Adapted approximation of a path law, or a convergence table for a
    /// family descriptor with `--refine`.
    AdaptedApprox {
        #[command(flatten)]
        io: Common,
        #[arg(long, value_delimiter = ',')]
        refine: Vec<usize>,
        /// Per-step levels; `all` picks the finest representable level.
        #[arg(long, default_value = "all")]
        levels: String,
    },
    /// Mixture of adapted maps reproducing a compatible path law.
    Decompose {
        #[command(flatten)]
        io: Common,
    },
    /// Check, decompose or approximate a randomized stopping time.
    Stopping {
        #[command(flatten)]
        io: Common,
        #[arg(long, conflicts_with = "approximate")]
        decompose: bool,
        #[arg(long)]
        approximate: bool,
        #[arg(long, value_delimiter = ',')]
        refine: Vec<usize>,
    },
    /// Causal transport value of a model.
    CausalOt {
        #[command(flatten)]
        io: Common,
        /// Overrides the model's sense.
        #[arg(long, value_enum)]
        objective: Option<ObjectiveSense>,
    },
    /// Relaxed and pure values of a control model.
    Control {
        #[command(flatten)]
        io: Common,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveSense>,
    },
    /// The rotation example of a stable limit with no diagonal mass.
    DemoRotation {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The acceptance suite; writes one CSV per criterion into `--out`.
    Suite {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            let obj = json!({ "error": e.kind(), "message": e.to_string() });
            println!("{obj}");
            1
        }
    }
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type Outcome = std::result::Result<i32, Failure>;

fn emit(out: Option<&FsPath>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn emit_json(out: Option<&FsPath>, v: &Value) -> Result<()> {
    emit(out, &format!("{}\n", serde_json::to_string_pretty(v).expect("json values serialize")))
}

fn q(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

fn witness_json(j: &JointPathLaw, w: &Option<Witness>) -> Value {
    match w {
        None => Value::Null,
        Some(w) => {
            let mut obj = json!({ "n": w.n, "y": j.y_space().labels(&w.y) });
            if let Some(x) = &w.x {
                obj["x"] = json!(j.x_space().labels(x));
            }
            obj
        }
    }
}

fn report_json<S>(j: &JointPathLaw, r: &CheckReport<S>, violation: Value) -> Value {
    let mut obj = json!({ "ok": r.ok, "max_violation": violation });
    if r.witness.is_some() {
        obj["witness"] = witness_json(j, &r.witness);
    }
    obj
}

fn check_report(j: &JointPathLaw, c: Checker, mode: Mode) -> Value {
    match mode {
        Mode::Exact => {
            let r = c.run(j, &Rational::from_integer(0.into()));
            report_json(j, &r, q(&r.max_violation))
        }
        Mode::Float => {
            let r = c.run(&j.to_f64(), &FLOAT_TOL);
            report_json(j, &r, json!(r.max_violation))
        }
    }
}

fn parse_levels(s: &str) -> std::result::Result<Option<Vec<usize>>, Failure> {
    if s == "all" {
        return Ok(None);
    }
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("bad level {p:?}"))))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Some)
}

fn map_json(map: &AdaptedMap, mu: &PathMeasure) -> Result<Value> {
    mu.support()
        .keys()
        .map(|y| Ok(json!({ "y": map.y_space.labels(y), "x": map.x_space.labels(&map.apply(y)?) })))
        .collect::<Result<Vec<_>>>()
        .map(Value::Array)
}

fn rule_json(st: &StoppingTime) -> Value {
    Value::Array(
        st.rule()
            .iter()
            .map(|(y, t)| json!({ "y": st.y_space().labels(y), "t": t }))
            .collect(),
    )
}

fn mixture_json(d: &MixtureDecomposition, mu: &PathMeasure) -> Result<Value> {
    let comps = d
        .components
        .iter()
        .map(|c| {
            Ok(json!({
                "weight": q(&c.weight),
                "interval": [q(&c.interval.0), q(&c.interval.1)],
                "map": map_json(&c.map, mu)?,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "components": comps }))
}

/// Family descriptors accepted by the `--refine` tables.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyDoc {
    family: String,
    #[serde(rename = "N", default = "default_horizon")]
    n: usize,
}

fn default_horizon() -> usize {
    2
}

fn parse_family(text: &str) -> Option<FamilyDoc> {
    serde_json::from_str(text).ok()
}

fn sense_of(o: Option<ObjectiveSense>, default: Sense) -> Sense {
    match o {
        Some(ObjectiveSense::Min) => Sense::Min,
        Some(ObjectiveSense::Max) => Sense::Max,
        None => default,
    }
}

fn sense_name(s: Sense) -> &'static str {
    match s {
        Sense::Min => "min",
        Sense::Max => "max",
    }
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::CheckCompat { io, mode, all_checkers } => {
            let j = parse_path_law(&read_file(&io.instance)?)?;
            let v = if all_checkers {
                let per: serde_json::Map<String, Value> = Checker::ALL
                    .iter()
                    .map(|&c| (c.name().to_string(), check_report(&j, c, mode)))
                    .collect();
                let ok = per.values().all(|r| r["ok"] == Value::Bool(true));
                json!({ "ok": ok, "checkers": per })
            } else {
                check_report(&j, Checker::Ci, mode)
            };
            emit_json(io.out.as_deref(), &v)?;
            Ok(0)
        }
        Command::MongeApprox { io, levels } => {
            let wanted = parse_levels(&levels)?;
            let p = parse_coupling(&read_file(&io.instance)?)?;
            let parts = dyadic_partitions(p.row_space().clone());
            if let Some(bad) = wanted.iter().flatten().find(|&&k| k > parts.depth()) {
                return Err(Error::LevelOutOfRange { level: *bad, depth: parts.depth() }.into());
            }
            let rows: Vec<Vec<String>> = level_table(&p, &parts)?
                .into_iter()
                .filter(|r| wanted.as_ref().is_none_or(|w| w.contains(&r.level)))
                .map(|r| {
                    vec![
                        r.level.to_string(),
                        r.cells.to_string(),
                        r.representable.to_string(),
                        r.stable_gap.as_ref().map_or(String::new(), format_rational),
                        format_rational(&r.bound),
                        r.w1_gap.map_or(String::new(), |w| w.to_string()),
                    ]
                })
                .collect();
            let header = ["level", "cells", "representable", "stable_gap", "bound", "w1_gap"];
            emit(io.out.as_deref(), &csv_table(&header, &rows))?;
            Ok(0)
        }
        Command::AdaptedApprox { io, refine, levels } => {
            let text = read_file(&io.instance)?;
            let schedule = match parse_levels(&levels)? {
                None => Schedule::Finest,
                Some(ls) => Schedule::Levels(ls),
            };
            if !refine.is_empty() {
                let fam = parse_family(&text)
                    .ok_or_else(|| Failure::Usage("--refine needs a family descriptor instance".into()))?;
                let n = fam.n;
                let rows = match fam.family.as_str() {
                    "independent_product" => convergence_report(|m| independent_product(m, n), &refine, &schedule)?,
                    "adapted_threshold" => convergence_report(|m| adapted_threshold(m, n), &refine, &schedule)?,
                    other => return Err(Failure::Usage(format!("unknown family {other:?}"))),
                };
                let rows: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| vec![r.m.to_string(), format_rational(&r.stable_gap), r.w1_gap.to_string(), format_rational(&r.bound)])
                    .collect();
                emit(io.out.as_deref(), &csv_table(&["m", "stable_gap", "w1_gap", "bound"], &rows))?;
                return Ok(0);
            }
            let j = parse_path_law(&text)?;
            let a = approximate_adapted(&j, &schedule)?;
            let v = json!({
                "levels": a.levels,
                "stable_gap": q(&a.stable_gap),
                "bound": q(&a.bound),
                "w1_gap": a.w1_gap,
                "map": map_json(&a.map, &j.y_marginal())?,
                "law": serde_json::to_value(path_law_to_doc(&a.law)).expect("documents serialize"),
            });
            emit_json(io.out.as_deref(), &v)?;
            Ok(0)
        }
        Command::Decompose { io } => {
            let j = parse_path_law(&read_file(&io.instance)?)?;
            let d = decompose_compatible(&j)?;
            emit_json(io.out.as_deref(), &mixture_json(&d, &j.y_marginal())?)?;
            Ok(0)
        }
        Command::Stopping { io, decompose, approximate, refine } => {
            let text = read_file(&io.instance)?;
            if approximate && !refine.is_empty() {
                let fam = parse_family(&text)
                    .ok_or_else(|| Failure::Usage("--refine needs a family descriptor instance".into()))?;
                if fam.family != "independent_uniform" {
                    return Err(Failure::Usage(format!("unknown family {:?}", fam.family)));
                }
                let rows = refine
                    .iter()
                    .map(|&m| {
                        let (tau, mu) = independent_uniform_family(m)?;
                        let a = approximate_stopping(&tau, &mu, &Schedule::Finest)?;
                        Ok(vec![m.to_string(), a.w1_gap.to_string()])
                    })
                    .collect::<Result<Vec<_>>>()?;
                emit(io.out.as_deref(), &csv_table(&["m", "w1_gap"], &rows))?;
                return Ok(0);
            }
            if !refine.is_empty() {
                return Err(Failure::Usage("--refine applies to --approximate".into()));
            }
            let (tau, mu) = parse_tau(&text)?;
            let v = if decompose {
                let comps: Vec<Value> = decompose_stopping(&tau, &mu)?
                    .iter()
                    .map(|(w, st)| json!({ "weight": q(w), "rule": rule_json(st) }))
                    .collect();
                json!({ "components": comps })
            } else if approximate {
                let a = approximate_stopping(&tau, &mu, &Schedule::Finest)?;
                json!({ "rule": rule_json(&a.st), "w1_gap": a.w1_gap, "levels": a.levels })
            } else {
                let r = is_randomized_st(&tau, &mu)?;
                let mut obj = json!({ "ok": r.ok, "max_violation": q(&r.max_violation) });
                if let Some(w) = &r.witness {
                    obj["witness"] = json!({ "t": w.n, "y": tau.y_space().labels(&w.y) });
                }
                obj
            };
            emit_json(io.out.as_deref(), &v)?;
            Ok(0)
        }
        Command::CausalOt { io, objective } => {
            let inst = parse_model(&read_file(&io.instance)?)?;
            let m = &inst.model;
            let cost = match &m.objective {
                crate::control::Objective::Linear(c) => c,
                _ => return Err(Failure::Usage("causal-ot needs a linear objective".into())),
            };
            let sense = sense_of(objective, m.sense);
            let (value, law) = match &inst.nu {
                Some(nu) => causal_value_two_marginal(&m.mu, nu, cost, sense)?,
                None => causal_value(&m.mu, &m.actions, cost, sense)?,
            };
            let mut v = json!({
                "sense": sense_name(sense),
                "value": q(&value),
                "law": serde_json::to_value(path_law_to_doc(&law)).expect("documents serialize"),
            });
            if inst.nu.is_none() {
                let (u, _) = unconstrained_value(&m.mu, &m.actions, cost, sense)?;
                v["unconstrained_value"] = q(&u);
            }
            emit_json(io.out.as_deref(), &v)?;
            Ok(0)
        }
        Command::Control { io, objective } => {
            let mut inst = parse_model(&read_file(&io.instance)?)?;
            inst.model.sense = sense_of(objective, inst.model.sense);
            let r = control_values(&inst.model)?;
            let v = json!({
                "objective": inst.model.objective.name(),
                "sense": sense_name(inst.model.sense),
                "relaxed": q(&r.relaxed),
                "pure": q(&r.pure),
                "gap": q(&r.gap),
            });
            emit_json(io.out.as_deref(), &v)?;
            Ok(0)
        }
        Command::DemoRotation { n, grid, out } => {
            if n == 0 || grid < 2 {
                return Err(Failure::Usage("--n must be positive and --grid at least 2".into()));
            }
            let r = rotation_demo(n, grid)?;
            emit_json(out.as_deref(), &serde_json::to_value(r).expect("report serializes"))?;
            Ok(0)
        }
        Command::Suite { out, seed } => {
            let mut cfg = SuiteConfig::default();
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let outcomes = run_all(&cfg)?;
            let mut summary = String::new();
            for o in &outcomes {
                emit(Some(&out.join(o.file_name())), &o.table.to_csv())?;
                summary.push_str(&o.line());
                summary.push('\n');
            }
            emit(Some(&out.join("summary.txt")), &summary)?;
            emit(None, &summary)?;
            Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 1 })
        }
    }
}
