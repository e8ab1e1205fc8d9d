//! Command-line front end: `run`, `classify`, `reduce`, `verify`.
//!
//! Exit codes: 0 success, 1 invariant violation or failed suite, 2 invalid
//! input, 3 unclassifiable group.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ce_core::{CeIndex, Opponent, Registry, SetProgram};
use crate::constructions::{
    antichain_spec, least_reduction_spec, sigma3_infinite_orbit_spec, sigma3_nonisolated_spec, ConstructionError,
    ConstructionReport, Sigma3Spec,
};
use crate::par::Exec;
use crate::perm_group::{classify_action, resolve_group, tame_subgroup, ActionClass, Budget, GroupSpec};
use crate::priority_engine::{self, Construction, ConstructionRun, Ctx, EngineError, Outcome, Target};
use crate::reductions::{esetn_to_eqce, rceg_to_esetn, rn_step, shift_embed};
use crate::verify::{run_suite, VerifyError, VerifyOptions};

#[derive(Parser, Debug)]
#[command(name = "cewb", version, about = "Stage-based c.e. set and priority construction workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the construction described by a scenario file.
    Run {
        scenario: PathBuf,
        /// Directory for trace.jsonl and report.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the scenario's stage count.
        #[arg(long)]
        stages: Option<u64>,
    },
    /// Classify a catalog group (or a group JSON file).
    Classify {
        group: String,
        /// Maximum word length of the searches.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Apply a reduction map to an index of the probe library.
    Reduce {
        /// esetn-to-eqce, shift-embed, rn-step or rceg-to-esetn.
        map: String,
        n: u64,
        index: u64,
        /// Stages to run before listing the target set.
        #[arg(long, default_value_t = 64)]
        horizon: u64,
        /// Group for rceg-to-esetn.
        #[arg(long, default_value = "s3-on-3")]
        group: String,
    },
    /// Run a verification suite.
    Verify {
        suite: String,
        /// JSON list of group entries replacing the built-in groups.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        stages: Option<u64>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("invariant violated at stage {stage}: {detail}")]
    Violation { stage: u64, detail: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Violation { .. } => 1,
            CliError::Verify(VerifyError::UnknownSuite(_)) => 2,
            CliError::Verify(_) => 1,
            CliError::Invalid(_) | CliError::Io(_) => 2,
        }
    }
}

fn invalid(e: impl fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

// ---------------------------------------------------------------------------
// scenarios

/// Universe entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProgramSpec {
    Empty,
    Finite { elements: Vec<u64> },
    Paced { elements: Vec<u64>, per_stage: usize },
    Singleton { n: u64 },
    Omega,
    Progression { period: u64, offset: u64 },
    Evens,
    Odds,
}

impl ProgramSpec {
    pub fn program(&self) -> SetProgram {
        match self {
            ProgramSpec::Empty => SetProgram::empty(),
            ProgramSpec::Finite { elements } => SetProgram::finite(elements.clone()),
            ProgramSpec::Paced { elements, per_stage } => SetProgram::finite_paced(elements.clone(), *per_stage),
            ProgramSpec::Singleton { n } => SetProgram::singleton(*n),
            ProgramSpec::Omega => SetProgram::stage_numbers(),
            ProgramSpec::Progression { period, offset } => SetProgram::progression(*period, *offset),
            ProgramSpec::Evens => SetProgram::evens(),
            ProgramSpec::Odds => SetProgram::odds(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpponentSpec {
    Identity {
        #[serde(default)]
        delay: u64,
    },
    Divergent,
    Swap {
        a: u64,
        b: u64,
        #[serde(default)]
        delay: u64,
    },
    Constant {
        value: u64,
        #[serde(default)]
        delay: u64,
    },
    Shift {
        by: u64,
        #[serde(default)]
        delay: u64,
    },
    Table {
        entries: BTreeMap<u64, u64>,
        #[serde(default)]
        delay: u64,
    },
}

impl OpponentSpec {
    pub fn opponent(&self) -> Opponent {
        match self {
            OpponentSpec::Identity { delay } => Opponent::identity(*delay),
            OpponentSpec::Divergent => Opponent::divergent(),
            OpponentSpec::Swap { a, b, delay } => Opponent::swap(*a, *b, *delay),
            OpponentSpec::Constant { value, delay } => Opponent::constant(*value, *delay),
            OpponentSpec::Shift { by, delay } => Opponent::shift(*by, *delay),
            OpponentSpec::Table { entries, delay } => Opponent::table(entries.clone(), *delay),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionKind {
    LeastReduction,
    InfOrbit,
    Nonisolated,
    Antichain,
}

/// Enumerates a restrained number at `stage` (for testing the checker).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Fault {
    pub stage: u64,
}

/// A scenario file. Universe programs are registered first, so index `k`
/// names the `k`-th universe entry (useful for constant opponents).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub construction: ConstructionKind,
    #[serde(default)]
    pub group: Option<String>,
    /// Tame the group for this many stages first (non-isolated runs).
    #[serde(default)]
    pub tame_stages: Option<u64>,
    #[serde(default)]
    pub budget: Option<Budget>,
    #[serde(default)]
    pub universe: Vec<ProgramSpec>,
    #[serde(default)]
    pub opponents: Vec<OpponentSpec>,
    #[serde(default)]
    pub sigma3: Option<Sigma3Spec>,
    /// Number of ceers in an antichain run.
    #[serde(default)]
    pub levels: Option<usize>,
    pub stages: u64,
    /// Injected injuries for non-isolated runs.
    #[serde(default)]
    pub inject: Vec<u64>,
    #[serde(default)]
    pub fault: Option<Fault>,
}

struct Faulty<'a, C> {
    inner: &'a mut C,
    at: Option<u64>,
}

impl<C: Construction> Construction for Faulty<'_, C> {
    type Req = C::Req;

    fn num_sets(&self) -> usize {
        self.inner.num_sets()
    }
    fn requirement_at(&self, path: &[Outcome]) -> Option<C::Req> {
        self.inner.requirement_at(path)
    }
    fn outcomes(&self, req: &C::Req) -> &'static [Outcome] {
        self.inner.outcomes(req)
    }
    fn begin_stage(&mut self, ctx: &mut Ctx) -> Result<(), String> {
        self.inner.begin_stage(ctx)
    }
    fn decide(&mut self, ctx: &mut Ctx, node: &[Outcome], req: &C::Req) -> Result<Outcome, String> {
        self.inner.decide(ctx, node, req)
    }
    fn act(&mut self, ctx: &mut Ctx, node: &[Outcome], req: &C::Req, o: Outcome) -> Result<(), String> {
        self.inner.act(ctx, node, req, o)
    }
    fn initialize(&mut self, ctx: &mut Ctx, node: &[Outcome]) -> Result<(), String> {
        self.inner.initialize(ctx, node)
    }
    fn end_stage(&mut self, ctx: &mut Ctx, path: &[Outcome]) -> Result<(), String> {
        self.inner.end_stage(ctx, path)?;
        if self.at == Some(ctx.stage()) {
            let hit = ctx.restraints().next().map(|r| (r.n, r.target));
            if let Some((n, t)) = hit {
                let set = match t {
                    Target::Set(k) => k,
                    Target::All => 0,
                };
                ctx.enumerate(set, n, &[]);
            }
        }
        Ok(())
    }
    fn validate_path(&self, path: &[(C::Req, Outcome)]) -> Result<(), String> {
        self.inner.validate_path(path)
    }
}

fn drive<C: Construction>(c: &mut C, stages: u64, fault: Option<Fault>) -> Result<ConstructionRun, CliError> {
    let mut f = Faulty { inner: c, at: fault.map(|f| f.stage) };
    priority_engine::run(&mut f, stages).map_err(engine_error)
}

fn engine_error(e: EngineError) -> CliError {
    match e {
        EngineError::SpecValidationFailed { .. } => invalid(e),
        EngineError::ConstructionFailed { stage, reason } => CliError::Violation { stage, detail: reason },
    }
}

fn construction_error(e: ConstructionError) -> CliError {
    match e {
        ConstructionError::Engine(e) => engine_error(e),
        ConstructionError::ConsistencySearchFailed { stage, .. } => CliError::Violation { stage, detail: e.to_string() },
        other => invalid(other),
    }
}

/// Runs a scenario, returning the trace and the report.
pub fn run_scenario(sc: &Scenario, stages: u64) -> Result<(ConstructionRun, ConstructionReport), CliError> {
    let mut reg = Registry::new();
    let universe: Vec<CeIndex> = sc.universe.iter().map(|p| reg.register(p.program())).collect();
    let opponents = sc.opponents.iter().map(|o| reg.register_opponent(o.opponent())).collect();
    let budget = sc.budget.unwrap_or_default();
    let group = || -> Result<crate::perm_group::PermGroup, CliError> {
        let name = sc.group.as_deref().ok_or_else(|| invalid("scenario needs a group"))?;
        let g = resolve_group(name).map_err(invalid)?;
        match sc.tame_stages {
            Some(t) => Ok(tame_subgroup(&g, t, &budget).map_err(invalid)?.group),
            None => Ok(g),
        }
    };
    let sigma = || sc.sigma3.clone().ok_or_else(|| invalid("scenario needs sigma3"));
    let fault = sc.fault;
    match sc.construction {
        ConstructionKind::LeastReduction => {
            let mut c = least_reduction_spec(reg, universe, opponents);
            let r = drive(&mut c, stages, fault)?;
            let rep = c.report(&r);
            Ok((r, rep))
        }
        ConstructionKind::Antichain => {
            let mut c = antichain_spec(sc.levels.unwrap_or(2), reg, opponents).map_err(construction_error)?;
            let r = drive(&mut c, stages, fault)?;
            let rep = c.report(&r);
            Ok((r, rep))
        }
        ConstructionKind::InfOrbit => {
            let mut c =
                sigma3_infinite_orbit_spec(sigma()?, group()?, reg, opponents, budget).map_err(construction_error)?;
            let r = match fault {
                None => c.run(stages).map_err(construction_error)?,
                Some(_) => drive(&mut c, stages, fault)?,
            };
            let rep = c.report(&r);
            Ok((r, rep))
        }
        ConstructionKind::Nonisolated => {
            let mut c = sigma3_nonisolated_spec(sigma()?, group()?, reg, opponents, budget)
                .map_err(construction_error)?
                .with_injuries(sc.inject.clone());
            let r = match fault {
                None => c.run(stages).map_err(construction_error)?,
                Some(_) => drive(&mut c, stages, fault)?,
            };
            let rep = c.report(&r);
            Ok((r, rep))
        }
    }
}

fn cmd_run(path: &Path, out: &Path, stages: Option<u64>) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(path)?;
    let sc: Scenario = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    if let Some(s) = &sc.sigma3 {
        s.validate().map_err(invalid)?;
    }
    let (run, report) = run_scenario(&sc, stages.unwrap_or(sc.stages))?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("trace.jsonl"), run.to_jsonl())?;
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report).expect("report serializes"))?;
    for q in &report.requirements {
        println!("{:<12} {:<16} {}", q.node, q.requirement, q.status);
    }
    match report.first_failure_stage() {
        None => {
            println!("{}: passed, {} stages", sc.name, report.stages);
            Ok(0)
        }
        Some(stage) => {
            let detail = report
                .checks
                .failures
                .iter()
                .find(|f| f.stage == stage)
                .map(|f| format!("{}: {}", f.invariant, f.detail))
                .or_else(|| {
                    report
                        .restraint_violations
                        .iter()
                        .find(|v| v.stage == stage)
                        .map(|v| format!("{} entered V{} against the restraint of {}", v.n, v.set, v.owner))
                })
                .unwrap_or_default();
            Err(CliError::Violation { stage, detail })
        }
    }
}

fn cmd_classify(group: &str, word_len: Option<usize>) -> Result<i32, CliError> {
    let g = resolve_group(group).map_err(invalid)?;
    let mut budget = Budget::default();
    if let Some(w) = word_len {
        budget.word_len = w;
    }
    let class = classify_action(&g, &budget);
    println!("{}", serde_json::to_string(&class).expect("class serializes"));
    Ok(if matches!(class, ActionClass::Unknown { .. }) { 3 } else { 0 })
}

/// Index `k` of the probe library is the `k`-th of
/// [`crate::verify::sample_programs`].
fn cmd_reduce(map: &str, n: u64, index: u64, horizon: u64, group: &str) -> Result<i32, CliError> {
    let mut reg = Registry::new();
    for p in crate::verify::sample_programs() {
        reg.register(p);
    }
    let single = |reg: &Registry| {
        if reg.is_valid(CeIndex(index)) {
            Ok(CeIndex(index))
        } else {
            Err(invalid(format!("index {index} is not in the probe library (0..{})", reg.len())))
        }
    };
    let target = match map {
        "esetn-to-eqce" => esetn_to_eqce(&mut reg, n as usize, index).map_err(invalid)?,
        "shift-embed" => {
            let k = single(&reg)?;
            shift_embed(&mut reg, k)
        }
        "rn-step" => {
            let k = single(&reg)?;
            rn_step(&mut reg, n, k).map_err(invalid)?
        }
        "rceg-to-esetn" => {
            let k = single(&reg)?;
            let g = resolve_group(group).map_err(invalid)?;
            let reps = match classify_action(&g, &Budget::default()) {
                ActionClass::FinitelyManyActions { representatives, .. } => representatives,
                other => return Err(invalid(format!("{group} is {}, not finitely many actions", other.tag()))),
            };
            if reps.len() as u64 != n {
                return Err(invalid(format!("{group} has {} actions, got n = {n}", reps.len())));
            }
            let code = rceg_to_esetn(&mut reg, &g, &reps, k).map_err(invalid)?;
            println!("{}", serde_json::json!({ "map": map, "n": n, "source": index, "tuple": code }));
            return Ok(0);
        }
        other => return Err(invalid(format!("unknown map {other}"))),
    };
    reg.advance_to(horizon);
    let members: Vec<u64> = reg.set_at(target, horizon).into_iter().take(64).collect();
    println!(
        "{}",
        serde_json::json!({ "map": map, "n": n, "source": index, "target": target.0, "horizon": horizon, "members": members })
    );
    Ok(0)
}

fn cmd_verify(
    suite: &str,
    catalog: Option<&Path>,
    stages: Option<u64>,
    out: Option<&Path>,
    sequential: bool,
) -> Result<i32, CliError> {
    let catalog = match catalog {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let specs: Vec<GroupSpec> =
                serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
            Some(specs)
        }
        None => None,
    };
    let exec = if sequential { Exec::Sequential } else { Exec::Parallel };
    let rep = run_suite(suite, &VerifyOptions { exec, catalog, stages })?;
    let json = rep.to_json();
    if let Some(p) = out {
        std::fs::write(p, &json)?;
    }
    println!("{json}");
    for c in rep.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
    Ok(if rep.passed { 0 } else { 1 })
}

pub fn execute(cli: Cli) -> i32 {
    let res = match cli.command {
        Command::Run { scenario, out, stages } => cmd_run(&scenario, &out, stages),
        Command::Classify { group, budget } => cmd_classify(&group, budget),
        Command::Reduce { map, n, index, horizon, group } => cmd_reduce(&map, n, index, horizon, &group),
        Command::Verify { suite, catalog, stages, out, sequential } => {
            cmd_verify(&suite, catalog.as_deref(), stages, out.as_deref(), sequential)
        }
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

pub fn main_entry() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}
