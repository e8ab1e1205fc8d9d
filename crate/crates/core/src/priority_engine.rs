//! Tree-of-strategies priority engine.
//!
//! A construction supplies the requirement placed at each node (a path of
//! outcomes from the root) and three callbacks. At stage `s` the engine walks
//! from the root through nodes of depth `< s`. At each visited node it:
//!
//! 1. asks the construction for the node's outcome (`decide`);
//! 2. initializes every active node right of `node⌢outcome` (their
//!    restraints are lifted first, then `initialize` runs for each in
//!    priority order);
//! 3. runs the node's action for that outcome (`act`), then initializes any
//!    nodes the action injured.
//!
//! Enumerations are never blocked: an enumeration of a restrained pair is
//! performed and logged as a violation, and [`check_restraints`] finds it
//! again by replaying the trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("spec validation failed at stage {stage}: {reason}")]
    SpecValidationFailed { stage: u64, reason: String },
    #[error("construction failed at stage {stage}: {reason}")]
    ConstructionFailed { stage: u64, reason: String },
}

/// Outcomes, ordered `∞ < d < w` and `∞ < f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "inf")]
    Inf,
    #[serde(rename = "d")]
    D,
    #[serde(rename = "w")]
    W,
    #[serde(rename = "f")]
    Fin,
}

impl Outcome {
    pub fn symbol(self) -> char {
        match self {
            Outcome::Inf => 'i',
            Outcome::D => 'd',
            Outcome::W => 'w',
            Outcome::Fin => 'f',
        }
    }
}

pub type NodePath = Vec<Outcome>;

/// Compact node name: outcome symbols from the root; the root is `"."`.
pub fn node_key(path: &[Outcome]) -> String {
    if path.is_empty() {
        ".".into()
    } else {
        path.iter().map(|o| o.symbol()).collect()
    }
}

pub fn is_prefix(a: &[Outcome], b: &[Outcome]) -> bool {
    a.len() <= b.len() && a == &b[..a.len()]
}

/// `a` is strictly left of `b`: they first differ at a position where `a`
/// has the smaller outcome.
pub fn left_of(a: &[Outcome], b: &[Outcome]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

/// `a` has higher priority than `b`: a proper prefix of it or left of it.
pub fn higher_priority(a: &[Outcome], b: &[Outcome]) -> bool {
    a != b && (is_prefix(a, b) || left_of(a, b))
}

/// Nodes initialized when `node` takes outcome `o`: those extending
/// `node⌢o'` with `o' > o`.
pub fn right_of_outcome(node: &[Outcome], o: Outcome, other: &[Outcome]) -> bool {
    other.len() > node.len() && is_prefix(node, other) && other[node.len()] > o
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Set(usize),
    All,
}

impl Target {
    pub fn covers(self, set: usize) -> bool {
        match self {
            Target::All => true,
            Target::Set(k) => k == set,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Set(k) => write!(f, "V{k}"),
            Target::All => write!(f, "*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Restraint {
    pub owner: NodePath,
    pub n: u64,
    pub target: Target,
}

/// One logged step of a stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Action {
    Enumerate { set: usize, n: u64, by: String },
    Pick { node: String, param: String, value: String },
    Restrain { node: String, n: u64, target: Target },
    Lift { node: String, n: u64, target: Target },
    Initialize { node: String },
    Injure { node: String },
    /// Column collapse in level `level` (the antichain ceers); checked like
    /// an enumeration of `column` into set `level`.
    Collapse { level: usize, column: u64, to: String, by: String },
    Note { node: String, text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub stage: u64,
    pub n: u64,
    pub set: usize,
    pub owner: String,
    pub by: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RestraintView {
    pub n: u64,
    pub target: Target,
    pub owner: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageTrace {
    pub stage: u64,
    pub path: Vec<Outcome>,
    pub actions: Vec<Action>,
    pub injuries: Vec<String>,
    pub restraints: Vec<RestraintView>,
}

/// Mutable construction state shared with the callbacks.
#[derive(Debug, Clone, Default)]
pub struct Ctx {
    stage: u64,
    sets: Vec<BTreeSet<u64>>,
    restraints: BTreeSet<Restraint>,
    actions: Vec<Action>,
    injuries: Vec<String>,
    mentioned: BTreeSet<u64>,
    violations: Vec<Violation>,
    pending: Vec<NodePath>,
}

impl Ctx {
    pub fn new(num_sets: usize) -> Self {
        Ctx { sets: vec![BTreeSet::new(); num_sets], ..Ctx::default() }
    }

    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn set(&self, k: usize) -> &BTreeSet<u64> {
        &self.sets[k]
    }

    pub fn sets(&self) -> &[BTreeSet<u64>] {
        &self.sets
    }

    pub fn contains(&self, k: usize, n: u64) -> bool {
        self.sets[k].contains(&n)
    }

    /// Active restraints covering `(n, set)`.
    pub fn restrained(&self, n: u64, set: usize) -> Vec<&Restraint> {
        self.restraints.iter().filter(|r| r.n == n && r.target.covers(set)).collect()
    }

    /// Enumerates `n` into `V_set`; returns whether it is new.
    pub fn enumerate(&mut self, set: usize, n: u64, by: &[Outcome]) -> bool {
        self.mention(n);
        if self.sets[set].contains(&n) {
            return false;
        }
        for r in self.restrained(n, set).into_iter().cloned().collect::<Vec<_>>() {
            self.violations.push(Violation {
                stage: self.stage,
                n,
                set,
                owner: node_key(&r.owner),
                by: node_key(by),
            });
        }
        self.sets[set].insert(n);
        self.actions.push(Action::Enumerate { set, n, by: node_key(by) });
        true
    }

    pub fn restrain(&mut self, owner: &[Outcome], n: u64, target: Target) {
        self.mention(n);
        if self.restraints.insert(Restraint { owner: owner.to_vec(), n, target }) {
            self.actions.push(Action::Restrain { node: node_key(owner), n, target });
        }
    }

    pub fn lift(&mut self, owner: &[Outcome], n: u64, target: Target) {
        if self.restraints.remove(&Restraint { owner: owner.to_vec(), n, target }) {
            self.actions.push(Action::Lift { node: node_key(owner), n, target });
        }
    }

    fn drop_owner(&mut self, owner: &[Outcome]) {
        self.restraints.retain(|r| r.owner != owner);
    }

    /// Lifts every restraint of `owner`, one logged lift per restraint.
    pub fn lift_all(&mut self, owner: &[Outcome]) {
        let mine: Vec<Restraint> = self.restraints.iter().filter(|r| r.owner == owner).cloned().collect();
        for r in mine {
            self.lift(owner, r.n, r.target);
        }
    }

    pub fn restraints(&self) -> impl Iterator<Item = &Restraint> {
        self.restraints.iter()
    }

    pub fn restraints_of(&self, owner: &[Outcome]) -> Vec<&Restraint> {
        self.restraints.iter().filter(|r| r.owner == owner).collect()
    }

    /// Injures `node` now: its restraints go immediately, its parameters
    /// are cleared by `initialize` right after the current action.
    pub fn injure(&mut self, node: &[Outcome]) {
        self.drop_owner(node);
        self.actions.push(Action::Injure { node: node_key(node) });
        self.injuries.push(node_key(node));
        self.pending.push(node.to_vec());
    }

    pub fn mention(&mut self, n: u64) {
        self.mentioned.insert(n);
    }

    pub fn mentioned(&self) -> &BTreeSet<u64> {
        &self.mentioned
    }

    /// The number [`Ctx::fresh`] would return, without marking it.
    pub fn peek_fresh(&self) -> u64 {
        self.mentioned.last().map_or(0, |m| m + 1)
    }

    /// Actions logged so far in the current stage.
    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// One more than every number mentioned so far; marks it mentioned.
    pub fn fresh(&mut self) -> u64 {
        let n = self.mentioned.last().map_or(0, |m| m + 1);
        self.mention(n);
        n
    }

    pub fn pick(&mut self, node: &[Outcome], param: &str, value: impl fmt::Display) {
        self.actions.push(Action::Pick { node: node_key(node), param: param.into(), value: value.to_string() });
    }

    pub fn note(&mut self, node: &[Outcome], text: impl Into<String>) {
        self.actions.push(Action::Note { node: node_key(node), text: text.into() });
    }

    /// Logs a column collapse, checking it against restraints on
    /// `(column, Set(level))`.
    pub fn collapse(&mut self, level: usize, column: u64, to: impl Into<String>, by: &[Outcome]) {
        self.mention(column);
        for r in self.restrained(column, level).into_iter().cloned().collect::<Vec<_>>() {
            self.violations.push(Violation {
                stage: self.stage,
                n: column,
                set: level,
                owner: node_key(&r.owner),
                by: node_key(by),
            });
        }
        self.actions.push(Action::Collapse { level, column, to: to.into(), by: node_key(by) });
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }
}

/// A priority construction.
pub trait Construction {
    type Req: Clone + fmt::Debug;

    fn num_sets(&self) -> usize;

    /// Requirement placed at `path`, or `None` past the end of the tree.
    fn requirement_at(&self, path: &[Outcome]) -> Option<Self::Req>;

    /// Outcomes of a requirement, in tree order.
    fn outcomes(&self, req: &Self::Req) -> &'static [Outcome];

    /// Stage hook run before the walk.
    fn begin_stage(&mut self, _ctx: &mut Ctx) -> Result<(), String> {
        Ok(())
    }

    fn decide(&mut self, ctx: &mut Ctx, node: &[Outcome], req: &Self::Req) -> Result<Outcome, String>;

    fn act(&mut self, ctx: &mut Ctx, node: &[Outcome], req: &Self::Req, outcome: Outcome) -> Result<(), String>;

    /// Clears the node's parameters (its restraints are already gone).
    fn initialize(&mut self, ctx: &mut Ctx, node: &[Outcome]) -> Result<(), String>;

    /// Stage hook run after the walk (per-stage invariant checks).
    fn end_stage(&mut self, _ctx: &mut Ctx, _path: &[Outcome]) -> Result<(), String> {
        Ok(())
    }

    /// Placement constraints along a visited path.
    fn validate_path(&self, _path: &[(Self::Req, Outcome)]) -> Result<(), String> {
        Ok(())
    }
}

/// A completed run.
#[derive(Debug, Clone)]
pub struct ConstructionRun {
    pub traces: Vec<StageTrace>,
    pub sets: Vec<BTreeSet<u64>>,
    pub violations: Vec<Violation>,
    pub active: BTreeSet<NodePath>,
}

impl ConstructionRun {
    pub fn stages(&self) -> u64 {
        self.traces.len() as u64
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.traces {
            out.push_str(&serde_json::to_string(t).expect("traces serialize"));
            out.push('\n');
        }
        out
    }
}

/// Runs `c` for stages `1..=stages`.
pub fn run<C: Construction>(c: &mut C, stages: u64) -> Result<ConstructionRun, EngineError> {
    let mut ctx = Ctx::new(c.num_sets());
    let mut active: BTreeSet<NodePath> = BTreeSet::new();
    let mut traces = Vec::with_capacity(stages as usize);
    for s in 1..=stages {
        ctx.stage = s;
        ctx.actions.clear();
        ctx.injuries.clear();
        let fail = |reason: String| EngineError::ConstructionFailed { stage: s, reason };
        c.begin_stage(&mut ctx).map_err(fail)?;
        let injured = std::mem::take(&mut ctx.pending);
        initialize_batch(c, &mut ctx, &mut active, &injured).map_err(fail)?;
        let mut path: NodePath = Vec::new();
        let mut visited: Vec<(C::Req, Outcome)> = Vec::new();
        while (path.len() as u64) < s {
            let Some(req) = c.requirement_at(&path) else { break };
            active.insert(path.clone());
            let o = c.decide(&mut ctx, &path, &req).map_err(fail)?;
            if !c.outcomes(&req).contains(&o) {
                return Err(EngineError::SpecValidationFailed {
                    stage: s,
                    reason: format!("outcome {o:?} not available at {}", node_key(&path)),
                });
            }
            let batch: Vec<NodePath> = active.iter().filter(|n| right_of_outcome(&path, o, n)).cloned().collect();
            initialize_batch(c, &mut ctx, &mut active, &batch).map_err(fail)?;
            c.act(&mut ctx, &path, &req, o).map_err(fail)?;
            let injured = std::mem::take(&mut ctx.pending);
            initialize_batch(c, &mut ctx, &mut active, &injured).map_err(fail)?;
            visited.push((req, o));
            path.push(o);
        }
        c.validate_path(&visited)
            .map_err(|reason| EngineError::SpecValidationFailed { stage: s, reason })?;
        c.end_stage(&mut ctx, &path).map_err(fail)?;
        traces.push(StageTrace {
            stage: s,
            path,
            actions: ctx.actions.clone(),
            injuries: ctx.injuries.clone(),
            restraints: ctx
                .restraints
                .iter()
                .map(|r| RestraintView { n: r.n, target: r.target, owner: node_key(&r.owner) })
                .collect(),
        });
    }
    Ok(ConstructionRun { traces, sets: ctx.sets.clone(), violations: ctx.violations.clone(), active })
}

fn initialize_batch<C: Construction>(
    c: &mut C,
    ctx: &mut Ctx,
    active: &mut BTreeSet<NodePath>,
    batch: &[NodePath],
) -> Result<(), String> {
    if batch.is_empty() {
        return Ok(());
    }
    for n in batch {
        ctx.drop_owner(n);
        if !ctx.injuries.contains(&node_key(n)) {
            ctx.actions.push(Action::Initialize { node: node_key(n) });
            ctx.injuries.push(node_key(n));
        }
    }
    let mut ordered: Vec<&NodePath> = batch.iter().collect();
    ordered.sort_by(|a, b| {
        if higher_priority(a, b) {
            std::cmp::Ordering::Less
        } else if higher_priority(b, a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    for n in ordered {
        c.initialize(ctx, n)?;
        active.remove(n);
    }
    Ok(())
}

/// Result of replaying a trace against its own restraint log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RestraintReport {
    pub violations: Vec<Violation>,
}

impl RestraintReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays every stage's actions and flags enumerations (and collapses) of
/// pairs restrained at that moment.
pub fn check_restraints(run: &ConstructionRun) -> RestraintReport {
    let mut live: BTreeSet<(String, u64, Target)> = BTreeSet::new();
    let mut violations = Vec::new();
    let mut flag = |live: &BTreeSet<(String, u64, Target)>, stage: u64, n: u64, set: usize, by: &str| {
        for (owner, m, t) in live {
            if *m == n && t.covers(set) {
                violations.push(Violation { stage, n, set, owner: owner.clone(), by: by.to_string() });
            }
        }
    };
    for t in &run.traces {
        for a in &t.actions {
            match a {
                Action::Restrain { node, n, target } => {
                    live.insert((node.clone(), *n, *target));
                }
                Action::Lift { node, n, target } => {
                    live.remove(&(node.clone(), *n, *target));
                }
                Action::Initialize { node } | Action::Injure { node } => live.retain(|(o, _, _)| o != node),
                Action::Enumerate { set, n, by } => flag(&live, t.stage, *n, *set, by),
                Action::Collapse { level, column, by, .. } => flag(&live, t.stage, *column, *level, by),
                Action::Pick { .. } | Action::Note { .. } => {}
            }
        }
    }
    RestraintReport { violations }
}

/// Approximate true path at stage `s`: from the root, repeatedly take the
/// least outcome the current node took among the visits in the last
/// `⌈s/2⌉` stages.
pub fn true_path_approx(run: &ConstructionRun, s: u64) -> NodePath {
    let s = s.min(run.stages());
    let lo = s - s.div_ceil(2);
    let window: Vec<&StageTrace> = run.traces.iter().filter(|t| t.stage > lo && t.stage <= s).collect();
    let mut path = Vec::new();
    loop {
        let next = window
            .iter()
            .filter(|t| t.path.len() > path.len() && is_prefix(&path, &t.path))
            .map(|t| t.path[path.len()])
            .min();
        match next {
            Some(o) => path.push(o),
            None => return path,
        }
    }
}

/// Outcomes of each node on the visited paths, per stage (handy for
/// reports).
pub fn outcome_history(run: &ConstructionRun, node: &[Outcome]) -> BTreeMap<u64, Outcome> {
    run.traces
        .iter()
        .filter(|t| t.path.len() > node.len() && is_prefix(node, &t.path))
        .map(|t| (t.stage, t.path[node.len()]))
        .collect()
}
