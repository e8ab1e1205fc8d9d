//! Registry of c.e. sets given as stagewise enumeration programs.
//!
//! A set `W_e` is the union of everything its program has emitted. The
//! registry advances all programs in lockstep: the transition from stage `s`
//! to `s + 1` calls every program (in id order) with the stage number and a
//! read-only [`StageView`]; emissions are stamped `s + 1`. Programs are
//! processed in id order and a view exposes whatever is already stamped, so a
//! program sees the stage-`s + 1` contents of every lower id and the stage-`s`
//! contents of itself and every higher id. Derived programs (images, copies)
//! registered after their sources therefore track them without lag.
//!
//! Opponents `phi_n` are partial functions with an explicit convergence
//! schedule, kept in a separate registry.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Default per-program, per-stage emission cap.
pub const DEFAULT_EMISSION_CAP: usize = 64;

/// Registry slot of a c.e. set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CeIndex(pub u64);

impl fmt::Display for CeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{}", self.0)
    }
}

/// Registry slot of an opponent partial function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartialFnIndex(pub u64);

impl fmt::Display for PartialFnIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "phi{}", self.0)
    }
}

type StepFn = dyn Fn(CeIndex, u64, &StageView<'_>) -> Vec<u64> + Send + Sync;

/// A stagewise enumeration program.
///
/// `step(own_index, stage, view)` returns the numbers to enumerate during the
/// transition `stage -> stage + 1`. It must be deterministic.
#[derive(Clone)]
pub struct SetProgram {
    label: String,
    step: Arc<StepFn>,
    settles_at: Option<u64>,
}

impl fmt::Debug for SetProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetProgram")
            .field("label", &self.label)
            .field("settles_at", &self.settles_at)
            .finish()
    }
}

impl SetProgram {
    pub fn new<F>(label: impl Into<String>, step: F) -> Self
    where
        F: Fn(CeIndex, u64, &StageView<'_>) -> Vec<u64> + Send + Sync + 'static,
    {
        SetProgram { label: label.into(), step: Arc::new(step), settles_at: None }
    }

    /// Declares that the program emits nothing at transitions `>= stage`,
    /// counted from its registration stage.
    pub fn settling(mut self, stage: u64) -> Self {
        self.settles_at = Some(stage);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn settles_at(&self) -> Option<u64> {
        self.settles_at
    }

    pub fn empty() -> Self {
        SetProgram::new("empty", |_, _, _| Vec::new()).settling(0)
    }

    /// Emits all of `elements` at its first transition; settled afterwards.
    pub fn finite<I: IntoIterator<Item = u64>>(elements: I) -> Self {
        let elems: Vec<u64> = elements.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let label = format!("finite{elems:?}");
        SetProgram::new(label, move |_, _, _| elems.clone()).settling(1)
    }

    /// Emits `elements` in ascending order, `per_stage` at a time.
    pub fn finite_paced<I: IntoIterator<Item = u64>>(elements: I, per_stage: usize) -> Self {
        let per_stage = per_stage.max(1);
        let elems: Vec<u64> = elements.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let settle = elems.len().div_ceil(per_stage) as u64;
        let label = format!("paced{elems:?}/{per_stage}");
        SetProgram::new(label, move |me, s, v| {
            let local = s - v.registered_at(me).min(s);
            let lo = (local as usize).saturating_mul(per_stage);
            elems.iter().skip(lo).take(per_stage).copied().collect()
        })
        .settling(settle)
    }

    pub fn singleton(n: u64) -> Self {
        SetProgram::finite([n])
    }

    /// Emits `s` at stage `s`, so `W_s = {0, ..., s - 1}`.
    pub fn stage_numbers() -> Self {
        SetProgram::new("omega", |_, s, _| vec![s])
    }

    /// Emits `period * s + offset` at stage `s`.
    pub fn progression(period: u64, offset: u64) -> Self {
        SetProgram::new(format!("{period}n+{offset}"), move |_, s, _| {
            period.checked_mul(s).and_then(|v| v.checked_add(offset)).into_iter().collect()
        })
    }

    pub fn evens() -> Self {
        SetProgram::progression(2, 0)
    }

    pub fn odds() -> Self {
        SetProgram::progression(2, 1)
    }

    /// Pointwise image `{f(x) : x ∈ W_source}` tracking `source` stage by
    /// stage (exactly, when `source` was registered earlier).
    pub fn image<F>(label: impl Into<String>, source: CeIndex, f: F) -> Self
    where
        F: Fn(u64) -> Option<u64> + Send + Sync + 'static,
    {
        SetProgram::new(label, move |me, s, v| {
            let src = if s == v.registered_at(me) { v.elements(source) } else { v.entered_at(source, s + 1) };
            src.into_iter().filter_map(&f).collect()
        })
    }

    /// Copies the current approximation of `source`.
    pub fn copy_of(source: CeIndex) -> Self {
        SetProgram::new(format!("copy({source})"), move |_, _, v| v.elements(source))
    }
}

/// Read-only window onto the registry during (or after) a stage.
pub struct StageView<'a> {
    reg: &'a Registry,
    horizon: u64,
    stage: u64,
}

impl<'a> StageView<'a> {
    /// The stage whose transition is being computed (or the snapshot stage).
    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn registered_at(&self, e: CeIndex) -> u64 {
        self.reg.sets.get(e.0 as usize).map_or(0, |st| st.registered_at)
    }

    pub fn contains(&self, e: CeIndex, x: u64) -> bool {
        self.reg
            .sets
            .get(e.0 as usize)
            .and_then(|st| st.entered.get(&x))
            .is_some_and(|t| *t <= self.horizon)
    }

    /// Sorted contents of `W_e` as visible from this view.
    pub fn elements(&self, e: CeIndex) -> Vec<u64> {
        let mut v: Vec<u64> = self.stamped(e).map(|(_, x)| x).collect();
        v.sort_unstable();
        v
    }

    pub fn set(&self, e: CeIndex) -> BTreeSet<u64> {
        self.stamped(e).map(|(_, x)| x).collect()
    }

    /// Numbers that entered `W_e` exactly at stage `t` (and are visible).
    pub fn entered_at(&self, e: CeIndex, t: u64) -> Vec<u64> {
        self.stamped(e).filter(|(s, _)| *s == t).map(|(_, x)| x).collect()
    }

    fn stamped(&self, e: CeIndex) -> impl Iterator<Item = (u64, u64)> + '_ {
        let log: &[(u64, u64)] = self.reg.sets.get(e.0 as usize).map_or(&[], |st| &st.log);
        let end = log.partition_point(|(s, _)| *s <= self.horizon);
        log[..end].iter().copied()
    }

    pub fn phi(&self, n: PartialFnIndex, x: u64) -> Option<u64> {
        self.reg.phi_at(n, x, self.stage)
    }

    pub fn is_settled(&self, e: CeIndex) -> bool {
        self.reg.is_settled(e, self.stage)
    }
}

struct SetState {
    program: SetProgram,
    registered_at: u64,
    entered: HashMap<u64, u64>,
    // (stage, element), non-decreasing in stage
    log: Vec<(u64, u64)>,
}

/// An opponent partial function `phi_n` with a convergence schedule.
#[derive(Clone)]
pub struct Opponent {
    label: String,
    rule: Arc<dyn Fn(u64) -> Option<u64> + Send + Sync>,
    delay: Arc<dyn Fn(u64) -> u64 + Send + Sync>,
}

impl fmt::Debug for Opponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Opponent").field("label", &self.label).finish()
    }
}

impl Opponent {
    /// `rule(x)` is the eventual value; it converges at stage `delay(x)`.
    pub fn new<R, D>(label: impl Into<String>, rule: R, delay: D) -> Self
    where
        R: Fn(u64) -> Option<u64> + Send + Sync + 'static,
        D: Fn(u64) -> u64 + Send + Sync + 'static,
    {
        Opponent { label: label.into(), rule: Arc::new(rule), delay: Arc::new(delay) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn identity(delay: u64) -> Self {
        Opponent::new("identity", Some, move |_| delay)
    }

    pub fn divergent() -> Self {
        Opponent::new("divergent", |_| None, |_| 0)
    }

    pub fn swap(a: u64, b: u64, delay: u64) -> Self {
        Opponent::new(
            format!("swap({a} {b})"),
            move |x| Some(if x == a { b } else if x == b { a } else { x }),
            move |_| delay,
        )
    }

    pub fn constant(value: u64, delay: u64) -> Self {
        Opponent::new(format!("const({value})"), move |_| Some(value), move |_| delay)
    }

    pub fn shift(by: u64, delay: u64) -> Self {
        Opponent::new(format!("shift({by})"), move |x| x.checked_add(by), move |_| delay)
    }

    /// Finite lookup table; divergent off the table.
    pub fn table(entries: BTreeMap<u64, u64>, delay: u64) -> Self {
        Opponent::new("table", move |x| entries.get(&x).copied(), move |_| delay)
    }

    pub fn eval(&self, x: u64, s: u64) -> Option<u64> {
        if (self.delay)(x) <= s {
            (self.rule)(x)
        } else {
            None
        }
    }
}

/// Immutable materialized stage approximation, exported as JSON
/// `{stage, sets: {id: [..]}, fns: {id: {x: y}}}`.
///
/// `fns` lists the converged values `phi_{n,s}(x)` for `x < stage`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSnapshot {
    pub stage: u64,
    pub sets: BTreeMap<u64, Vec<u64>>,
    pub fns: BTreeMap<u64, BTreeMap<u64, u64>>,
}

impl StageSnapshot {
    pub fn set(&self, e: CeIndex) -> BTreeSet<u64> {
        self.sets.get(&e.0).map(|v| v.iter().copied().collect()).unwrap_or_default()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }
}

/// The global program registry and stage loop.
pub struct Registry {
    sets: Vec<SetState>,
    opponents: Vec<Opponent>,
    stage: u64,
    cap: usize,
    memo: HashMap<String, CeIndex>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new()
    }
}

impl Registry {
    pub fn new() -> Self {
        Registry::with_cap(DEFAULT_EMISSION_CAP)
    }

    pub fn with_cap(cap: usize) -> Self {
        Registry { sets: Vec::new(), opponents: Vec::new(), stage: 0, cap: cap.max(1), memo: HashMap::new() }
    }

    /// Current stage (number of completed transitions).
    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn is_valid(&self, e: CeIndex) -> bool {
        (e.0 as usize) < self.sets.len()
    }

    pub fn register(&mut self, program: SetProgram) -> CeIndex {
        let id = CeIndex(self.sets.len() as u64);
        self.sets.push(SetState {
            program,
            registered_at: self.stage,
            entered: HashMap::new(),
            log: Vec::new(),
        });
        id
    }

    /// Registers `build(key_index)` once per `key`; later calls return the
    /// first index.
    pub fn register_memo<F>(&mut self, key: String, build: F) -> CeIndex
    where
        F: FnOnce(CeIndex) -> SetProgram,
    {
        if let Some(e) = self.memo.get(&key) {
            return *e;
        }
        let e = self.fixpoint(build);
        self.memo.insert(key, e);
        e
    }

    /// Recursion-theorem fixpoint: the returned index `e` runs `build(e)`.
    ///
    /// The builder may bake its own index into the program it returns; the
    /// step function additionally receives the index on every call.
    pub fn fixpoint<F>(&mut self, build: F) -> CeIndex
    where
        F: FnOnce(CeIndex) -> SetProgram,
    {
        let e = CeIndex(self.sets.len() as u64);
        let prog = build(e);
        let got = self.register(prog);
        debug_assert_eq!(got, e);
        got
    }

    pub fn program(&self, e: CeIndex) -> Option<&SetProgram> {
        self.sets.get(e.0 as usize).map(|s| &s.program)
    }

    pub fn registered_at(&self, e: CeIndex) -> Option<u64> {
        self.sets.get(e.0 as usize).map(|s| s.registered_at)
    }

    /// True if `e`'s program has declared itself finished by stage `s`.
    pub fn is_settled(&self, e: CeIndex, s: u64) -> bool {
        self.sets.get(e.0 as usize).is_some_and(|st| {
            st.program.settles_at.is_some_and(|t| st.registered_at.saturating_add(t) <= s)
        })
    }

    pub fn register_opponent(&mut self, op: Opponent) -> PartialFnIndex {
        self.opponents.push(op);
        PartialFnIndex(self.opponents.len() as u64 - 1)
    }

    pub fn opponent(&self, n: PartialFnIndex) -> Option<&Opponent> {
        self.opponents.get(n.0 as usize)
    }

    pub fn opponent_count(&self) -> usize {
        self.opponents.len()
    }

    /// `phi_n(x)` if it has converged by stage `s`.
    pub fn phi_at(&self, n: PartialFnIndex, x: u64, s: u64) -> Option<u64> {
        self.opponents.get(n.0 as usize)?.eval(x, s)
    }

    /// Least `x < s` with `phi_{n,s}(x) = y`.
    pub fn phi_inverse_at(&self, n: PartialFnIndex, y: u64, s: u64) -> Option<u64> {
        let op = self.opponents.get(n.0 as usize)?;
        (0..s).find(|x| op.eval(*x, s) == Some(y))
    }

    /// View of the current stage.
    pub fn view(&self) -> StageView<'_> {
        StageView { reg: self, horizon: self.stage, stage: self.stage }
    }

    /// View of an already-computed stage `s <= self.stage()`.
    pub fn view_at(&self, s: u64) -> StageView<'_> {
        let s = s.min(self.stage);
        StageView { reg: self, horizon: s, stage: s }
    }

    pub fn contains(&self, e: CeIndex, x: u64, s: u64) -> bool {
        self.view_at(s).contains(e, x)
    }

    pub fn set_at(&self, e: CeIndex, s: u64) -> BTreeSet<u64> {
        self.view_at(s).set(e)
    }

    /// Runs a single transition `stage -> stage + 1`.
    pub fn step(&mut self) {
        let s = self.stage;
        for idx in 0..self.sets.len() {
            let st = &self.sets[idx];
            let local = s - st.registered_at.min(s);
            if st.registered_at > s || st.program.settles_at.is_some_and(|t| local >= t) {
                continue;
            }
            let view = StageView { reg: self, horizon: s + 1, stage: s };
            let raw = (st.program.step)(CeIndex(idx as u64), s, &view);
            let mut fresh: Vec<u64> = raw.into_iter().filter(|x| !st.entered.contains_key(x)).collect();
            fresh.sort_unstable();
            fresh.dedup();
            fresh.truncate(self.cap);
            let st = &mut self.sets[idx];
            for x in fresh {
                st.entered.insert(x, s + 1);
                st.log.push((s + 1, x));
            }
        }
        self.stage += 1;
    }

    /// Advances (never rewinds) the registry to stage `s`.
    pub fn advance_to(&mut self, s: u64) {
        while self.stage < s {
            self.step();
        }
    }

    /// Advances to stage `s` and returns its snapshot.
    pub fn run_to_stage(&mut self, s: u64) -> StageSnapshot {
        self.advance_to(s);
        self.snapshot(s)
    }

    /// Snapshot of an already-computed stage.
    pub fn snapshot(&self, s: u64) -> StageSnapshot {
        let s = s.min(self.stage);
        let view = self.view_at(s);
        let sets = self
            .sets
            .iter()
            .enumerate()
            .filter(|(_, st)| st.registered_at <= s)
            .map(|(i, _)| (i as u64, view.elements(CeIndex(i as u64))))
            .collect();
        let fns = self
            .opponents
            .iter()
            .enumerate()
            .map(|(n, op)| {
                let table = (0..s).filter_map(|x| op.eval(x, s).map(|y| (x, y))).collect();
                (n as u64, table)
            })
            .collect();
        StageSnapshot { stage: s, sets, fns }
    }

    /// Emission log of `e`: elements entered at each stage `t` (stamp `t`).
    pub fn emissions(&self, e: CeIndex) -> &[(u64, u64)] {
        self.sets.get(e.0 as usize).map_or(&[], |s| &s.log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_empty_program() {
        let mut r = Registry::new();
        let e = r.register(SetProgram::empty());
        assert_eq!(e, CeIndex(0));
        for s in 0..20 {
            assert!(r.run_to_stage(s).set(e).is_empty());
        }
    }

    #[test]
    fn stage_number_program_enumerates_initial_segments() {
        let mut r = Registry::new();
        let e = r.register(SetProgram::stage_numbers());
        for s in 0..50u64 {
            let expect: BTreeSet<u64> = (0..s).collect();
            assert_eq!(r.run_to_stage(s).set(e), expect);
        }
    }

    #[test]
    fn copy_program_stays_inside_its_source() {
        let mut r = Registry::new();
        let src = r.register(SetProgram::evens());
        let cp = r.register(SetProgram::copy_of(src));
        r.advance_to(100);
        for s in 0..=100 {
            assert!(r.set_at(cp, s).is_subset(&r.set_at(src, s)));
        }
    }

    #[test]
    fn fixpoint_sees_own_index() {
        let mut r = Registry::new();
        r.register(SetProgram::empty());
        let e = r.fixpoint(|me| SetProgram::new("self", move |own, _, _| {
            assert_eq!(own, me);
            vec![own.0]
        }));
        r.advance_to(5);
        assert_eq!(r.set_at(e, 5), BTreeSet::from([e.0]));
    }

    #[test]
    fn fixpoint_ignoring_index_emits_at_stage_zero() {
        let mut r = Registry::new();
        let e = r.fixpoint(|_| SetProgram::new("seven", |_, s, _| if s == 0 { vec![7] } else { vec![] }));
        r.advance_to(10);
        assert!(r.set_at(e, 0).is_empty());
        for s in 1..=10 {
            assert_eq!(r.set_at(e, s), BTreeSet::from([7]));
        }
    }

    #[test]
    fn fixpoint_trap_copies_lagged_image() {
        // e copies the set registered after it, which is the shift of e's
        // program input; the copy lags one stage behind.
        let mut r = Registry::new();
        let base = r.register(SetProgram::stage_numbers());
        let trap = r.fixpoint(|me| {
            let target = CeIndex(me.0 + 1);
            SetProgram::new("trap", move |_, _, v| v.elements(target))
        });
        let image = r.register(SetProgram::new("image", move |_, _, v| {
            v.elements(base).into_iter().map(|x| x + 100).collect()
        }));
        r.advance_to(200);
        for s in 1..=200 {
            assert_eq!(r.set_at(trap, s), r.set_at(image, s - 1), "stage {s}");
        }
    }

    #[test]
    fn run_to_stage_is_idempotent_and_replayable() {
        let build = || {
            let mut r = Registry::new();
            let a = r.register(SetProgram::evens());
            r.register(SetProgram::copy_of(a));
            r.register(SetProgram::finite_paced([3, 9, 27, 81], 1));
            r.register_opponent(Opponent::swap(0, 1, 10));
            r
        };
        let mut r1 = build();
        let mut r2 = build();
        let a = r1.run_to_stage(500);
        let b = r1.run_to_stage(500);
        assert_eq!(a, b);
        assert_eq!(a.to_json(), r2.run_to_stage(500).to_json());
        assert_eq!(r1.run_to_stage(0).sets.values().map(Vec::len).sum::<usize>(), 0);
    }

    #[test]
    fn opponents_converge_on_schedule() {
        let mut r = Registry::new();
        let id = r.register_opponent(Opponent::identity(3));
        let div = r.register_opponent(Opponent::divergent());
        let sw = r.register_opponent(Opponent::swap(0, 1, 10));
        assert_eq!(r.phi_at(id, 42, 3), Some(42));
        assert_eq!(r.phi_at(id, 42, 2), None);
        assert!((0..100).all(|s| r.phi_at(div, 5, s).is_none()));
        assert_eq!(r.phi_at(sw, 0, 9), None);
        assert_eq!(r.phi_at(sw, 0, 10), Some(1));
        assert_eq!(r.phi_inverse_at(sw, 1, 11), Some(0));
    }

    #[test]
    fn snapshot_json_shape() {
        let mut r = Registry::new();
        r.register(SetProgram::finite([2, 1]));
        r.register_opponent(Opponent::identity(0));
        let snap = r.run_to_stage(2);
        assert_eq!(snap.to_json(), r#"{"stage":2,"sets":{"0":[1,2]},"fns":{"0":{"0":0,"1":1}}}"#);
    }

    #[test]
    fn emission_cap_truncates_smallest_first() {
        let mut r = Registry::with_cap(3);
        let e = r.register(SetProgram::finite(0..10));
        r.advance_to(1);
        assert_eq!(r.set_at(e, 1), BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn settled_programs_are_declared() {
        let mut r = Registry::new();
        let f = r.register(SetProgram::finite([1]));
        let g = r.register(SetProgram::evens());
        assert!(!r.is_settled(f, 0));
        assert!(r.is_settled(f, 1));
        assert!(!r.is_settled(g, 1000));
    }

    proptest! {
        #[test]
        fn approximations_are_monotone(period in 1u64..5, offset in 0u64..7, paced in proptest::collection::vec(0u64..40, 0..12)) {
            let mut r = Registry::new();
            let a = r.register(SetProgram::progression(period, offset));
            let b = r.register(SetProgram::finite_paced(paced, 2));
            let c = r.register(SetProgram::copy_of(a));
            r.advance_to(60);
            for e in [a, b, c] {
                for s in 0..60 {
                    prop_assert!(r.set_at(e, s).is_subset(&r.set_at(e, s + 1)));
                }
            }
        }

        #[test]
        fn convergence_is_stable(delay in 0u64..30, x in 0u64..100) {
            let mut r = Registry::new();
            let n = r.register_opponent(Opponent::shift(3, delay));
            let mut seen: Option<u64> = None;
            for s in 0..60 {
                let v = r.phi_at(n, x, s);
                if let Some(prev) = seen {
                    prop_assert_eq!(v, Some(prev));
                }
                seen = seen.or(v);
            }
        }
    }
}
