//! The four priority constructions, each a [`Construction`] for the
//! engine, with their invariants checked at every stage.
//!
//! Every construction records check outcomes in a [`Checks`] ledger; a run
//! passes when no check failed and the trace replay finds no restraint
//! violation.

mod antichain;
mod inf_orbit;
mod least;
mod nonisolated;
mod pairs;
mod sigma3;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::perm_group::PermError;
use crate::priority_engine::{check_restraints, ConstructionRun, EngineError, Outcome, Violation};

pub use antichain::{antichain_spec, AReq, Antichain, PigeonholeWitness};
pub use inf_orbit::{sigma3_infinite_orbit_spec, InfOrbit};
pub use least::{least_reduction_spec, DCase, LReq, LeastReduction};
pub use nonisolated::{sigma3_nonisolated_spec, NonIsolated};
pub use pairs::{
    consistent_map_search, restrained_pairs, ChainNode, Quad, QuadrupleSet, RestrainedPair, RestrainedPairSet,
    PAIR_SEARCH_CAP,
};
pub use sigma3::{FlagEntry, PReq, Schedule, Sigma3Spec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstructionError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error("no consistent maps g0, g1 with g0(K) != g1(K) for node {node} at stage {stage}")]
    ConsistencySearchFailed { stage: u64, node: String },
    #[error("invalid construction input: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckFailure {
    pub stage: u64,
    pub invariant: String,
    pub detail: String,
}

/// Per-invariant check counts and failures.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Checks {
    pub counts: BTreeMap<String, u64>,
    pub failures: Vec<CheckFailure>,
}

impl Checks {
    pub fn check(&mut self, stage: u64, invariant: &str, ok: bool, detail: impl FnOnce() -> String) {
        *self.counts.entry(invariant.to_string()).or_default() += 1;
        if !ok {
            self.failures.push(CheckFailure { stage, invariant: invariant.to_string(), detail: detail() });
        }
    }

    pub fn failed(&self, invariant: &str) -> bool {
        self.failures.iter().any(|f| f.invariant == invariant)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequirementStatus {
    pub node: String,
    pub requirement: String,
    pub status: String,
}

/// Summary of a finished run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstructionReport {
    pub construction: String,
    pub stages: u64,
    pub requirements: Vec<RequirementStatus>,
    pub checks: Checks,
    pub restraint_violations: Vec<Violation>,
    pub sets: Vec<Vec<u64>>,
    pub passed: bool,
}

impl ConstructionReport {
    pub(crate) fn assemble(
        construction: &str,
        run: &ConstructionRun,
        requirements: Vec<RequirementStatus>,
        checks: &Checks,
    ) -> Self {
        let restraint_violations = check_restraints(run).violations;
        ConstructionReport {
            construction: construction.into(),
            stages: run.stages(),
            requirements,
            passed: checks.failures.is_empty() && restraint_violations.is_empty(),
            checks: checks.clone(),
            restraint_violations,
            sets: run.sets.iter().map(|s| s.iter().copied().collect()).collect(),
        }
    }

    /// First failing stage, if any.
    pub fn first_failure_stage(&self) -> Option<u64> {
        let a = self.checks.failures.iter().map(|f| f.stage).min();
        let b = self.restraint_violations.iter().map(|v| v.stage).min();
        match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        }
    }
}

/// Requirement placement by a fixed priority list: the requirement at a
/// node is the next one (after its parent's) that `excluded` does not rule
/// out given the ancestors and the outcomes taken below them.
pub(crate) fn place<R: Copy>(
    order: &[R],
    path: &[Outcome],
    excluded: impl Fn(&[(R, Outcome)], &R) -> bool,
) -> Option<R> {
    let mut idx = 0;
    let mut anc: Vec<(R, Outcome)> = Vec::with_capacity(path.len());
    for d in 0..=path.len() {
        loop {
            let r = *order.get(idx)?;
            idx += 1;
            if excluded(&anc, &r) {
                continue;
            }
            if d == path.len() {
                return Some(r);
            }
            anc.push((r, path[d]));
            break;
        }
    }
    None
}

/// Ancestors of `path` with their requirements and outcomes.
pub(crate) fn ancestors<R: Copy>(
    order: &[R],
    path: &[Outcome],
    excluded: impl Fn(&[(R, Outcome)], &R) -> bool,
) -> Vec<(Vec<Outcome>, R, Outcome)> {
    let mut out = Vec::new();
    for d in 0..path.len() {
        if let Some(r) = place(order, &path[..d], &excluded) {
            out.push((path[..d].to_vec(), r, path[d]));
        }
    }
    out
}
