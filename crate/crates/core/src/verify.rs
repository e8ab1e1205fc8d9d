//! Verification suites: finite-stage checks of the group-action laws, the
//! reductions and the four constructions, against independent oracles.
//!
//! Each `criterion_*` function returns a [`SuiteReport`]; named suites
//! bundle them. Independent sweeps run through [`Exec`]; the constructions
//! themselves are sequential.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{Hash, Hasher};

use serde::Serialize;
use thiserror::Error;

use crate::ce_core::{CeIndex, Opponent, Registry, SetProgram};
use crate::constructions::{
    antichain_spec, least_reduction_spec, sigma3_infinite_orbit_spec, sigma3_nonisolated_spec, ConstructionError,
    ConstructionReport, Sigma3Spec,
};
use crate::orbit_rel::rceg_witness;
use crate::pairing::pair;
use crate::par::Exec;
use crate::perm_group::{
    avoid_finite_set, catalog, classify_action, extract_permutation, induced_alpha, tame_subgroup, unzigzag, zigzag,
    Budget, GroupSpec, PermError, PermGroup, Word,
};
use crate::priority_engine::{check_restraints, run, ConstructionRun};
use crate::reductions::{
    an_classify, esetn_code, esetn_level_bitset, esetn_to_eqce, rn_step, rx_enumerator, shift_embed, CeerRef,
    ColumnState, IndexKind, ReduceError, ESETN_CANDIDATES_PER_STAGE,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite {0}")]
    UnknownSuite(String),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
}

pub const SUITES: &[&str] = &[
    "lemma-2-4",
    "thm-3-5-oracle",
    "thm-3-1-invariants",
    "inf-orbit-invariants",
    "nonisolated-invariants",
    "antichain-invariants",
    "tame-subgroup",
    "rn-chain",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Hash and size of a construction trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceDigest {
    pub label: String,
    pub stages: u64,
    pub bytes: usize,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<CheckLine>,
    pub digests: Vec<TraceDigest>,
    /// Full JSONL traces, kept for byte comparison.
    #[serde(skip)]
    pub traces: Vec<(String, String)>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        SuiteReport { suite: suite.into(), passed: true, checks: Vec::new(), digests: Vec::new(), traces: Vec::new() }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.passed &= passed;
        self.checks.push(CheckLine { name: name.into(), passed, detail: detail.into() });
    }

    fn trace(&mut self, label: &str, run: &ConstructionRun) {
        let text = run.to_jsonl();
        let mut h = DefaultHasher::new();
        text.hash(&mut h);
        self.digests.push(TraceDigest {
            label: label.into(),
            stages: run.stages(),
            bytes: text.len(),
            hash: format!("{:016x}", h.finish()),
        });
        self.traces.push((label.into(), text));
    }

    /// Records a construction report: overall pass, every invariant, and the
    /// restraint replay.
    fn construction(&mut self, label: &str, rep: &ConstructionReport) {
        for (inv, n) in &rep.checks.counts {
            let fails: Vec<_> = rep.checks.failures.iter().filter(|f| &f.invariant == inv).collect();
            let detail = match fails.first() {
                Some(f) => format!("{} of {n} failed, first at stage {}: {}", fails.len(), f.stage, f.detail),
                None => format!("{n} checks"),
            };
            self.check(format!("{label}:{inv}"), fails.is_empty(), detail);
        }
        let v = &rep.restraint_violations;
        let detail = match v.first() {
            Some(x) => format!("{} violations, first at stage {}: {} into V{} by {}", v.len(), x.stage, x.n, x.set, x.by),
            None => "clean".into(),
        };
        self.check(format!("{label}:restraints"), v.is_empty(), detail);
    }

    fn merge(&mut self, other: SuiteReport) {
        self.passed &= other.passed;
        self.checks.extend(other.checks);
        self.digests.extend(other.digests);
        self.traces.extend(other.traces);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub exec: Exec,
    /// Replaces the built-in groups of `lemma-2-4`.
    pub catalog: Option<Vec<GroupSpec>>,
    /// Overrides the stage count of construction runs.
    pub stages: Option<u64>,
}

impl VerifyOptions {
    fn stages(&self, default: u64) -> u64 {
        self.stages.unwrap_or(default)
    }
}

pub fn run_suite(name: &str, opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let parts: Vec<SuiteReport> = match name {
        "lemma-2-4" => match &opts.catalog {
            Some(specs) => vec![catalog_suite(specs, opts)],
            None => vec![criterion_image_law(opts)?, criterion_recovery(opts)?],
        },
        "thm-3-5-oracle" => vec![criterion_esetn_oracle(opts)?],
        "thm-3-1-invariants" => vec![criterion_least(opts)?],
        "inf-orbit-invariants" => vec![criterion_inf_orbit(opts)?],
        "nonisolated-invariants" => vec![criterion_nonisolated(opts)?],
        "antichain-invariants" => vec![criterion_enumerators(opts)?, criterion_antichain(opts)?],
        "tame-subgroup" => vec![criterion_avoid(opts)?, criterion_trichotomy(opts)?, tame_properties(opts)?],
        "rn-chain" => vec![criterion_rn_chain(opts)?],
        other => return Err(VerifyError::UnknownSuite(other.into())),
    };
    let mut rep = SuiteReport::new(name);
    for p in parts {
        rep.merge(p);
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// group actions on indices

const IMAGE_GROUPS: &[&str] = &["z-shift", "block-swaps", "s3-on-3"];

/// Ten fixed words of lengths 1 to 4 over the group's budgeted alphabet.
pub fn sample_words(g: &PermGroup) -> Vec<Word> {
    let letters = g.alphabet(&Budget::default());
    (0..10)
        .map(|i| Word((0..1 + i % 4).map(|k| letters[(7 * i + 3 * k + k * k) % letters.len()]).collect()))
        .collect()
}

/// Twenty programs of assorted shapes.
pub fn sample_programs() -> Vec<SetProgram> {
    vec![
        SetProgram::empty(),
        SetProgram::singleton(0),
        SetProgram::singleton(7),
        SetProgram::finite([1, 2, 3]),
        SetProgram::finite([0, 5, 9, 40]),
        SetProgram::finite_paced(0..100, 3),
        SetProgram::finite_paced((0..200).filter(|x| x % 2 == 0), 7),
        SetProgram::finite_paced((0..150).map(|k| (37 * k + 11) % 997), 5),
        SetProgram::stage_numbers(),
        SetProgram::evens(),
        SetProgram::odds(),
        SetProgram::progression(3, 1),
        SetProgram::progression(5, 2),
        SetProgram::progression(7, 0),
        SetProgram::new("squares", |_, s, _| vec![s * s]),
        SetProgram::new("triangles", |_, s, _| vec![s * (s + 1) / 2]),
        SetProgram::new("powers", |_, s, _| if s < 60 { vec![1 << s] } else { vec![] }),
        SetProgram::new("two-per-stage", |_, s, _| vec![2 * s, 3 * s + 1]),
        SetProgram::new("bursts", |_, s, _| if s % 10 == 0 { (10 * s..10 * s + 30).collect() } else { vec![] }),
        SetProgram::new("late", |_, s, _| if s >= 100 { vec![s - 100] } else { vec![] }),
    ]
}

fn image_law_for(g: &PermGroup, exec: Exec, horizon: u64) -> Result<Vec<(String, bool, String)>, PermError> {
    let words = sample_words(g);
    let results = exec.map(words, |w| -> Result<(String, bool, String), PermError> {
        let mut reg = Registry::new();
        let srcs: Vec<CeIndex> = sample_programs().into_iter().map(|p| reg.register(p)).collect();
        let mut alphas = Vec::new();
        for e in &srcs {
            alphas.push(induced_alpha(&mut reg, g, &w, *e)?);
        }
        reg.advance_to(horizon);
        let mut bad = None;
        'outer: for s in 0..=horizon {
            for (e, a) in srcs.iter().zip(&alphas) {
                let image: BTreeSet<u64> = reg.set_at(*e, s).iter().map(|x| g.apply_word(&w, *x)).collect::<Result<_, _>>()?;
                if reg.set_at(*a, s) != image {
                    bad = Some(format!("program {e} at stage {s}"));
                    break 'outer;
                }
            }
        }
        let name = format!("image-law[{}|{w}]", g.name);
        Ok(match bad {
            Some(d) => (name, false, d),
            None => (name, true, format!("{} programs, stages 0..={horizon}", srcs.len())),
        })
    });
    results.into_iter().collect()
}

/// Pointwise image law for the induced index action.
pub fn criterion_image_law(opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let groups: Vec<PermGroup> = IMAGE_GROUPS.iter().map(|n| catalog(n).expect("catalog group")).collect();
    image_law_report("image-law", &groups, opts)
}

fn image_law_report(suite: &str, groups: &[PermGroup], opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new(suite);
    for g in groups {
        for (name, ok, detail) in image_law_for(g, opts.exec, 500)? {
            rep.check(name, ok, detail);
        }
    }
    Ok(rep)
}

fn recovery_for(g: &PermGroup, exec: Exec) -> Result<Vec<(String, bool, String)>, PermError> {
    let out = exec.map(sample_words(g), |w| -> Result<(String, bool, String), PermError> {
        let mut reg = Registry::new();
        let mut wrong = Vec::new();
        for n in 0..64 {
            let got = extract_permutation(&mut reg, |r, w, e| induced_alpha(r, g, w, e), &w, n, 8)?;
            let want = g.apply_word(&w, n)?;
            if got != want {
                wrong.push(format!("{n}: {got} != {want}"));
            }
        }
        Ok((format!("recovery[{}|{w}]", g.name), wrong.is_empty(), if wrong.is_empty() { "n < 64".into() } else { wrong.join(", ") }))
    });
    out.into_iter().collect()
}

/// Recovering the permutation from its index action, on singletons.
pub fn criterion_recovery(opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("recovery");
    for name in IMAGE_GROUPS {
        for (n, ok, d) in recovery_for(&catalog(name).expect("catalog group"), opts.exec)? {
            rep.check(n, ok, d);
        }
    }
    Ok(rep)
}

/// `lemma-2-4` over user-supplied groups, after validating each entry.
fn catalog_suite(specs: &[GroupSpec], opts: &VerifyOptions) -> SuiteReport {
    let mut rep = SuiteReport::new("lemma-2-4");
    let mut groups = Vec::new();
    for spec in specs {
        match spec.build() {
            Ok(g) => {
                rep.check(format!("catalog-valid[{}]", spec.name), true, "built");
                groups.push(g);
            }
            Err(e) => rep.check(format!("catalog-valid[{}]", spec.name), false, e.to_string()),
        }
    }
    for g in &groups {
        if g.orbit_oracle.is_none() {
            continue;
        }
        let letters = g.alphabet(&Budget::default());
        let bad = (0..32u64).find_map(|a| {
            let orbit = g.orbit_of(a)?;
            if !orbit.contains(&a) {
                return Some(format!("orbit of {a} misses {a}"));
            }
            orbit.iter().find_map(|x| {
                letters.iter().find_map(|l| {
                    let y = g.letter_apply(*l, *x);
                    (!orbit.contains(&y)).then(|| format!("orbit of {a} is not closed: {x} -> {y}"))
                })
            })
        });
        rep.check(format!("orbit-oracle-sound[{}]", g.name), bad.is_none(), bad.unwrap_or_else(|| "a < 32".into()));
    }
    for g in &groups {
        match image_law_for(g, opts.exec, 500) {
            Ok(lines) => lines.into_iter().for_each(|(n, ok, d)| rep.check(n, ok, d)),
            Err(e) => rep.check(format!("image-law[{}]", g.name), false, e.to_string()),
        }
        match recovery_for(g, opts.exec) {
            Ok(lines) => lines.into_iter().for_each(|(n, ok, d)| rep.check(n, ok, d)),
            Err(e) => rep.check(format!("recovery[{}]", g.name), false, e.to_string()),
        }
    }
    rep
}

// ---------------------------------------------------------------------------
// group classification

/// A word moving `F = [-4, 4]` (coded) off itself on the shift.
pub fn criterion_avoid(_opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("avoid");
    let g = catalog("z-shift").expect("catalog group");
    let f: BTreeSet<u64> = (-4..=4).map(zigzag).collect();
    let w = avoid_finite_set(&g, &f, &Budget::default())?;
    let shift = unzigzag(g.apply_word(&w, zigzag(0))?);
    let moved: BTreeSet<u64> = f.iter().map(|x| g.apply_word(&w, *x)).collect::<Result<_, _>>()?;
    rep.check("avoid-displacement", shift.abs() >= 9, format!("word {w} shifts by {shift}"));
    rep.check("avoid-disjoint", moved.is_disjoint(&f), format!("g.F = {moved:?}"));
    Ok(rep)
}

pub fn criterion_trichotomy(opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("trichotomy");
    let cases = vec![("s3-on-3", "FinitelyManyActions"), ("z-shift", "InfiniteOrbit"), ("block-swaps", "NonIsolated")];
    let tags = opts.exec.map(cases.clone(), |(n, _)| classify_action(&catalog(n).expect("catalog group"), &Budget::default()).tag());
    for ((name, want), got) in cases.into_iter().zip(tags) {
        rep.check(format!("trichotomy[{name}]"), got == want, format!("{got}"));
    }
    Ok(rep)
}

/// Frozen orbits stay frozen and the tamed group stays non-isolated.
pub fn tame_properties(opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("tame");
    let base = catalog("block-swaps").expect("catalog group");
    let stages = opts.stages(200).min(400);
    let t = tame_subgroup(&base, stages, &Budget::default())?;
    let mut grown = None;
    for st in &t.log {
        for (a, orbit) in &st.frozen {
            let orbit: BTreeSet<u64> = orbit.iter().copied().collect();
            if t.group.orbit_of(*a).as_ref() != Some(&orbit) || t.orbit_at_stage(&base, *a, stages) != orbit {
                grown = Some(format!("orbit of {a} frozen at stage {} changed", st.stage));
            }
        }
    }
    rep.check("tame-frozen-orbits", grown.is_none(), grown.unwrap_or_else(|| format!("{stages} stages")));
    let grows = t.log.windows(2).all(|w| w[1].admitted > w[0].admitted || w[1].admitted == t.admitted.len());
    rep.check("tame-admits", grows && t.admitted.len() as u64 > stages, format!("{} admitted", t.admitted.len()));
    let tag = classify_action(&t.group, &Budget::default()).tag();
    rep.check("tame-non-isolated", tag == "NonIsolated", tag);
    Ok(rep)
}

// ---------------------------------------------------------------------------
// E_set^n -> =^ce

/// Stage by which `esetn_to_eqce` has examined every candidate of level
/// at most `max_k`.
pub fn esetn_settling_stage(n: usize, max_k: u32) -> u64 {
    let total: u64 = (0..=max_k).map(|k| 1u64 << (k as usize * n)).sum();
    total.div_ceil(ESETN_CANDIDATES_PER_STAGE)
}

/// All `n`-tuples of subsets of `{0..4}` as bitmasks.
fn tuples(n: usize) -> Vec<Vec<u64>> {
    (0..1u64 << (5 * n)).map(|c| (0..n).map(|l| (c >> (5 * l)) & 31).collect()).collect()
}

fn multiset(t: &[u64]) -> Vec<u64> {
    let mut v = t.to_vec();
    v.sort_unstable();
    v
}

fn level_codes(t: &[u64], max_k: u32) -> BTreeSet<u64> {
    let n = t.len();
    let mut out = BTreeSet::new();
    for k in 0..=max_k {
        let bits = esetn_level_bitset(t, k);
        for (w, word) in bits.iter().enumerate() {
            for b in 0..64 {
                if word >> b & 1 == 1 {
                    let idx = (w * 64 + b) as u64;
                    let rho: Vec<u64> = (0..n).map(|l| (idx >> (k as usize * l)) & ((1 << k) - 1)).collect();
                    out.insert(esetn_code(k as u64, &rho).expect("small code"));
                }
            }
        }
    }
    out
}

/// Enumerated codes of level at most `max_k` from the real program.
fn program_codes(t: &[u64], max_k: u32) -> Result<BTreeSet<u64>, ReduceError> {
    let n = t.len();
    let mut reg = Registry::new();
    let parts: Vec<CeIndex> =
        t.iter().map(|m| reg.register(SetProgram::finite((0..5).filter(|x| m >> x & 1 == 1)))).collect();
    let code = crate::orbit_rel::encode_tuple(&parts).ok_or(ReduceError::CodeOverflow)?;
    let v = esetn_to_eqce(&mut reg, n, code)?;
    let s = esetn_settling_stage(n, max_k);
    reg.advance_to(s);
    Ok(reg
        .set_at(v, s)
        .into_iter()
        .filter(|c| crate::pairing::decode(n + 1, *c)[0] <= max_k as u64)
        .collect())
}

/// Family equality is preserved and reflected, exhaustively on `{0..4}`.
pub fn criterion_esetn_oracle(opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("esetn-oracle");
    for n in 1..=3usize {
        let all = tuples(n);
        let fps = opts.exec.map(all.clone(), |t| esetn_level_bitset(&t, 5));
        // equal fingerprints <=> equal multisets, over all ordered pairs
        let mut by_fp: HashMap<&Vec<u64>, Vec<u64>> = HashMap::new();
        let mut by_key: HashMap<Vec<u64>, &Vec<u64>> = HashMap::new();
        let mut bad = None;
        for (t, fp) in all.iter().zip(&fps) {
            let key = multiset(t);
            if let Some(k) = by_fp.get(fp) {
                if *k != key {
                    bad = Some(format!("{t:?} and a tuple with multiset {k:?} share a fingerprint"));
                }
            }
            if let Some(f) = by_key.get(&key) {
                if *f != fp {
                    bad = Some(format!("{t:?} differs from a permutation of itself"));
                }
            }
            by_fp.entry(fp).or_insert_with(|| key.clone());
            by_key.entry(key).or_insert(fp);
        }
        rep.check(
            format!("esetn-exhaustive[n={n}]"),
            bad.is_none(),
            bad.unwrap_or_else(|| format!("{} tuples, {} classes", all.len(), by_key.len())),
        );
    }
    // the registered program against the fingerprint, at the settling stage
    let mut sample: Vec<Vec<u64>> = tuples(1);
    sample.extend(tuples(2));
    sample.extend([vec![0, 0, 0], vec![1, 2, 4], vec![4, 2, 1], vec![31, 0, 5], vec![5, 31, 0], vec![3, 3, 8]]);
    let results = opts.exec.map(sample, |t| -> Result<Option<String>, ReduceError> {
        let got = program_codes(&t, 5)?;
        let want = level_codes(&t, 5);
        Ok((got != want).then(|| format!("{t:?}: {} codes enumerated, {} expected", got.len(), want.len())))
    });
    let mut mismatches = Vec::new();
    let count = results.len();
    for r in results {
        if let Some(m) = r? {
            mismatches.push(m);
        }
    }
    rep.check(
        "esetn-program",
        mismatches.is_empty(),
        if mismatches.is_empty() { format!("{count} families") } else { mismatches.join("; ") },
    );
    Ok(rep)
}

// ---------------------------------------------------------------------------
// =^ce least-reduction construction

pub fn criterion_least(opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("least");
    let w: Vec<BTreeSet<u64>> = [&[0u64, 2][..], &[0, 2], &[1, 5], &[1, 5], &[3], &[0, 1, 2, 3], &[], &[4, 6]]
        .iter()
        .map(|s| s.iter().copied().collect())
        .collect();
    let programs = vec![
        SetProgram::finite([0, 2]),
        SetProgram::finite_paced([0, 2], 1),
        SetProgram::finite([1, 5]),
        SetProgram::new("five-then-one", |_, s, _| match s {
            3 => vec![5],
            7 => vec![1],
            _ => vec![],
        })
        .settling(8),
        SetProgram::singleton(3),
        SetProgram::finite_paced(0..4, 2),
        SetProgram::empty(),
        SetProgram::finite([4, 6]),
    ];
    let mut reg = Registry::new();
    let universe: Vec<CeIndex> = programs.into_iter().map(|p| reg.register(p)).collect();
    let ops = [Opponent::identity(0), Opponent::swap(0, 1, 1), Opponent::divergent()];
    let opponents = ops.into_iter().map(|o| reg.register_opponent(o)).collect();
    let mut c = least_reduction_spec(reg, universe, opponents);
    let r = run(&mut c, opts.stages(2000)).map_err(ConstructionError::from)?;
    let report = c.report(&r);
    rep.trace("least", &r);
    rep.construction("least", &report);
    rep.check("least:replay", check_restraints(&r).is_clean(), "check_restraints");
    for a in 0..w.len() {
        for b in a + 1..w.len() {
            let low = |k: usize| r.sets[k].range(..=10).copied().collect::<Vec<_>>();
            if w[a] == w[b] {
                rep.check(format!("least:agree[{a},{b}]"), low(a) == low(b), format!("{:?} / {:?}", low(a), low(b)));
            } else {
                let x = r.sets[a].symmetric_difference(&r.sets[b]).next().copied();
                rep.check(
                    format!("least:witness[{a},{b}]"),
                    x.is_some(),
                    x.map_or("V's equal".into(), |x| format!("x = {x}")),
                );
            }
        }
    }
    rep.check("least:passed", report.passed, format!("{} requirements", report.requirements.len()));
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Sigma3 constructions

fn partition_spec() -> Sigma3Spec {
    Sigma3Spec::partition(4, &[&[0, 1], &[2, 3]])
}

fn related_pairs(sigma: &Sigma3Spec, run: &ConstructionRun, rep: &mut SuiteReport, label: &str) {
    for a in 0..sigma.universe {
        for b in a + 1..sigma.universe {
            if !sigma.related(a, b) {
                rep.check(
                    format!("{label}:distinct[{a},{b}]"),
                    run.sets[a] != run.sets[b],
                    format!("|V{a}| = {}, |V{b}| = {}", run.sets[a].len(), run.sets[b].len()),
                );
            }
        }
    }
}

fn exact_copy(
    g: &PermGroup,
    words: &[(Vec<crate::priority_engine::Outcome>, crate::constructions::PReq, Word)],
    sigma: &Sigma3Spec,
    run: &ConstructionRun,
    rep: &mut SuiteReport,
    label: &str,
) {
    for a in 0..sigma.universe {
        for b in a + 1..sigma.universe {
            if !sigma.related(a, b) {
                continue;
            }
            let hit = words.iter().find(|(_, q, w)| {
                q.i == a
                    && q.j == b
                    && run.sets[a].iter().map(|x| g.apply_word(w, *x).ok()).collect::<Option<BTreeSet<u64>>>().as_ref()
                        == Some(&run.sets[b])
            });
            rep.check(
                format!("{label}:copied[{a},{b}]"),
                hit.is_some(),
                hit.map_or("no recorded word maps one onto the other".into(), |(_, _, w)| format!("word {w}")),
            );
        }
    }
}

/// Infinite-orbit construction on the dyadic shift.
pub fn criterion_inf_orbit(opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("inf-orbit");
    let sigma = partition_spec();
    let mut reg = Registry::new();
    let opponents = [Opponent::identity(0), Opponent::divergent()].into_iter().map(|o| reg.register_opponent(o)).collect();
    let budget = Budget::default().with_alphabet(40);
    let g = catalog("z-shift-dyadic").expect("catalog group");
    let mut c = sigma3_infinite_orbit_spec(sigma.clone(), g.clone(), reg, opponents, budget)?;
    let r = c.run(opts.stages(5000))?;
    let report = c.report(&r);
    rep.trace("inf-orbit", &r);
    rep.construction("inf-orbit", &report);
    related_pairs(&sigma, &r, &mut rep, "inf-orbit");
    exact_copy(&g, &c.words(), &sigma, &r, &mut rep, "inf-orbit");
    // window witness from the sets as settled programs
    let mut vreg = Registry::new();
    let idx: Vec<CeIndex> = r.sets.iter().map(|s| vreg.register(SetProgram::finite_paced(s.iter().copied(), 64))).collect();
    let settle = r.sets.iter().map(|s| s.len().div_ceil(64) as u64).max().unwrap_or(0) + 1;
    vreg.advance_to(settle);
    let wb = Budget { word_len: 12, ..budget };
    for a in 0..sigma.universe {
        for b in a + 1..sigma.universe {
            if sigma.related(a, b) {
                let w = rceg_witness(&g, &vreg, idx[a], idx[b], 201, settle, &wb);
                rep.check(
                    format!("inf-orbit:witness[{a},{b}]"),
                    w.is_some(),
                    w.map_or("none within budget".into(), |w| format!("word {w}")),
                );
            }
        }
    }
    rep.check("inf-orbit:passed", report.passed, format!("largest pair set {}", c.largest_pair_set()));
    Ok(rep)
}

/// Non-isolated construction on the tamed block swaps, with injuries.
pub fn criterion_nonisolated(opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("nonisolated");
    let sigma = partition_spec();
    let stages = opts.stages(3000);
    let tamed = tame_subgroup(&catalog("block-swaps").expect("catalog group"), 300, &Budget::default())?.group;
    let mut reg = Registry::new();
    let opponents = [Opponent::identity(0), Opponent::divergent()].into_iter().map(|o| reg.register_opponent(o)).collect();
    let inject: Vec<u64> = (1..6).map(|k| k * stages / 6).collect();
    let mut c = sigma3_nonisolated_spec(sigma.clone(), tamed.clone(), reg, opponents, Budget::default())?
        .with_injuries(inject.clone());
    let r = c.run(stages)?;
    let report = c.report(&r);
    rep.trace("nonisolated", &r);
    rep.construction("nonisolated", &report);
    related_pairs(&sigma, &r, &mut rep, "nonisolated");
    exact_copy(&tamed, &c.words(), &sigma, &r, &mut rep, "nonisolated");
    let cleaned = c.cleaned();
    let in_all = cleaned.iter().all(|(_, o)| o.iter().all(|x| r.sets.iter().all(|v| v.contains(x))));
    rep.check(
        "nonisolated:clean-up-orbits",
        !cleaned.is_empty() && in_all,
        format!("{} clean-ups after injuries at {inject:?}", cleaned.len()),
    );
    rep.check("nonisolated:growth", c.growths() > 0, format!("{} growth events", c.growths()));
    rep.check("nonisolated:passed", report.passed, format!("{} requirements", report.requirements.len()));
    Ok(rep)
}

// ---------------------------------------------------------------------------
// R_n chain

fn recode(n: u64, z: u64) -> u64 {
    (n + 1) * (z / n) + z % n
}

pub fn criterion_rn_chain(opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("rn-chain");
    let sources: Vec<(&str, Vec<u64>)> = vec![
        ("all", (0..1000).collect()),
        ("sevens", (0..1000).filter(|x| x % 7 == 0).collect()),
        ("no-zero", (1..1000).filter(|x| x % 3 != 1).collect()),
        ("sparse", vec![0, 1, 2, 3, 10, 99, 500, 998, 999]),
    ];
    let results = opts.exec.map(sources, |(label, elems)| -> Result<Vec<(String, bool, String)>, ReduceError> {
        let mut out = Vec::new();
        let mut reg = Registry::new();
        let k = reg.register(SetProgram::finite_paced(elems.iter().copied(), 64));
        let mut chain = vec![k];
        for n in 1..=3 {
            chain.push(rn_step(&mut reg, n, *chain.last().unwrap())?);
        }
        let direct: Vec<CeIndex> = (1..=3).map(|n| rn_step(&mut reg, n, k)).collect::<Result<_, _>>()?;
        let settle = elems.len().div_ceil(64) as u64 + 1;
        reg.advance_to(settle);
        let w: BTreeSet<u64> = elems.iter().copied().collect();
        let mut expect = w.clone();
        for n in 1..=3u64 {
            let one: BTreeSet<u64> = w.iter().map(|z| recode(n, *z)).collect();
            let got = reg.set_at(direct[n as usize - 1], settle);
            let residues = got.iter().all(|x| x % (n + 1) < n);
            let zero = got.contains(&0) == w.contains(&0);
            out.push((
                format!("rn-residue[{label},n={n}]"),
                got == one && residues && zero,
                format!("{} elements", got.len()),
            ));
            expect = expect.iter().map(|z| recode(n, *z)).collect();
            let got = reg.set_at(chain[n as usize], settle);
            out.push((format!("rn-chain[{label},n={n}]"), got == expect, format!("{} elements", got.len())));
        }
        Ok(out)
    });
    for r in results {
        for (n, ok, d) in r? {
            rep.check(n, ok, d);
        }
    }
    let mut reg = Registry::new();
    let srcs: Vec<CeIndex> = sample_programs().into_iter().map(|p| reg.register(p)).collect();
    let images: Vec<CeIndex> = srcs.iter().map(|e| shift_embed(&mut reg, *e)).collect();
    reg.advance_to(500);
    let mut bad = None;
    for s in 0..=500 {
        for (e, l) in srcs.iter().zip(&images) {
            let img = reg.set_at(*l, s);
            let want: BTreeSet<u64> = reg.set_at(*e, s).iter().map(|x| x + 1).collect();
            if img.contains(&0) || img != want {
                bad = Some(format!("program {e} at stage {s}"));
            }
        }
    }
    rep.check("shift-embed", bad.is_none(), bad.unwrap_or_else(|| format!("{} programs, stages 0..=500", srcs.len())));
    Ok(rep)
}

// ---------------------------------------------------------------------------
// index enumerators and the antichain

/// Expected classification of a settled probe.
fn expected_kind(set: &BTreeSet<u64>) -> IndexKind {
    let evens: Vec<u64> = set.iter().copied().filter(|x| x % 2 == 0).collect();
    match evens.len() {
        0 => IndexKind::Oddish,
        1 => IndexKind::ProperCoding(evens[0] / 2),
        _ => IndexKind::Big,
    }
}

pub fn criterion_enumerators(_opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("enumerators");
    let horizon = 200;
    let mut reg = Registry::new();
    let settled: Vec<Vec<u64>> = vec![vec![1, 3, 5], vec![4, 1], vec![0, 2, 5], vec![6], vec![]];
    let probes: Vec<(CeIndex, Vec<u64>)> =
        settled.into_iter().map(|s| (reg.register(SetProgram::finite(s.clone())), s)).collect();
    let full = reg.register(SetProgram::new("two-and-odds", |_, s, _| if s == 0 { vec![2, 1] } else { vec![2 * s + 1] }));
    reg.advance_to(horizon);
    for (i, elems) in &probes {
        let set: BTreeSet<u64> = elems.iter().copied().collect();
        let got = an_classify(&reg, *i, horizon);
        let want = expected_kind(&set);
        rep.check(
            format!("an-classify[{elems:?}]"),
            got.kind == want && got.is_final,
            format!("{:?}, final {}", got.kind, got.is_final),
        );
    }
    let got = an_classify(&reg, full, horizon);
    rep.check(
        "an-classify[2+odds]",
        got.kind == IndexKind::FullCoding(1) && !got.is_final,
        format!("{:?}, final {}", got.kind, got.is_final),
    );

    let mut reg = Registry::new();
    let ys = [
        reg.register(SetProgram::finite([3, 10, 17, 44])),
        reg.register(SetProgram::evens()),
        reg.register(SetProgram::empty()),
    ];
    let wis: Vec<(CeIndex, BTreeSet<u64>)> = [vec![0, 1, 2, 5], vec![0], vec![1, 2], vec![0, 1, 2, 3, 4, 5, 6, 7, 9]]
        .into_iter()
        .map(|s| (reg.register(SetProgram::finite(s.clone())), s.into_iter().collect()))
        .collect();
    let mut members = Vec::new();
    for (i, wi) in &wis {
        members.push((*i, wi.clone(), 0, reg.register(SetProgram::empty()), rx_enumerator(&mut reg, CeerRef::IdMod(3), *i, 0)));
        for y in ys {
            for r in [0u64, 7, 30] {
                let m = 1 + pair(y.0, r).expect("small code");
                members.push((*i, wi.clone(), m, y, rx_enumerator(&mut reg, CeerRef::IdMod(3), *i, m)));
            }
        }
    }
    let h = 100;
    reg.advance_to(h);
    let window = |s: &BTreeSet<u64>| s.range(..=50).copied().collect::<Vec<_>>();
    let mut bad = Vec::new();
    for (_, wi, m, y, e) in &members {
        let got = reg.set_at(*e, h);
        let ok = if *m == 0 || !wi.contains(&0) {
            got == *wi
        } else {
            let (_, r) = crate::pairing::unpair(m - 1);
            let f = (0..).find(|x| !wi.contains(x)).unwrap();
            let x = (0..).find(|x| !got.contains(x)).unwrap();
            let mut want: BTreeSet<u64> = reg.set_at(*y, h);
            want.extend(0..x);
            want.remove(&x);
            x % 3 == f % 3 && x >= f.max(r) && window(&got) == window(&want)
        };
        if !ok {
            bad.push(format!("W_i {wi:?} member {m}"));
        }
    }
    rep.check(
        "rx-template",
        bad.is_empty(),
        if bad.is_empty() { format!("{} members on [0,50]", members.len()) } else { bad.join("; ") },
    );
    Ok(rep)
}

pub fn criterion_antichain(opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    let mut rep = SuiteReport::new("antichain");
    let far = 1000;
    let mut reg = Registry::new();
    let probe = reg.register(SetProgram::singleton(2 * far));
    let opponents = [Opponent::identity(0), Opponent::constant(probe.0, 5), Opponent::divergent()]
        .into_iter()
        .map(|o| reg.register_opponent(o))
        .collect();
    let mut c = antichain_spec(3, reg, opponents)?;
    let r = run(&mut c, opts.stages(2000)).map_err(ConstructionError::from)?;
    let report = c.report(&r);
    rep.trace("antichain", &r);
    rep.construction("antichain", &report);
    let mut wrong = Vec::new();
    for (node, (q, k)) in c.columns() {
        let p = if node == "." { 0 } else { node.chars().count() as u64 };
        if c.ceer(q.n).state(k) != ColumnState::Id(p + 2) {
            wrong.push(format!("{node} column {k}"));
        }
    }
    rep.check("antichain:columns", wrong.is_empty(), if wrong.is_empty() { "Id(p+2)".into() } else { wrong.join(", ") });
    let hit = c.witnesses().iter().find(|w| w.l == far && !w.exploited);
    rep.check(
        "antichain:fresh-column",
        hit.is_some_and(|w| w.target_classes == 1 && c.ceer(w.req.m).state(far) == ColumnState::Id(1)),
        hit.map_or("no witness on the fresh column".into(), |w| format!("{} at stage {}", w.node, w.stage)),
    );
    rep.check(
        "antichain:pigeonhole",
        c.witnesses().iter().all(|w| w.target_classes < w.classes),
        format!("{} witnesses", c.witnesses().len()),
    );
    rep.check("antichain:passed", report.passed, format!("{} requirements", report.requirements.len()));
    Ok(rep)
}

/// Named acceptance criteria, in order.
pub fn criterion(id: u8, opts: &VerifyOptions) -> Result<SuiteReport, VerifyError> {
    match id {
        1 => criterion_image_law(opts),
        2 => criterion_recovery(opts),
        3 => criterion_esetn_oracle(opts),
        4 => criterion_avoid(opts),
        5 => criterion_trichotomy(opts),
        6 => criterion_least(opts),
        7 => criterion_inf_orbit(opts),
        8 => criterion_nonisolated(opts),
        9 => criterion_rn_chain(opts),
        10 => criterion_enumerators(opts),
        11 => criterion_antichain(opts),
        other => Err(VerifyError::UnknownSuite(format!("criterion {other}"))),
    }
}

/// Per-requirement summary of a report, for display.
pub fn summarize(rep: &SuiteReport) -> BTreeMap<String, bool> {
    rep.checks.iter().map(|c| (c.name.clone(), c.passed)).collect()
}
