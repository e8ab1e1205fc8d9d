//! Computable permutations of the naturals and finitely described groups of
//! them.
//!
//! Permutations are syntax trees over a closed catalog (finite-support
//! cycles, explicit tables, the coded-integer shift, masked block swaps,
//! compositions and inverses), so both directions and, for catalog groups,
//! identity testing are exact.
//!
//! Group elements are words in signed generator indices. A word
//! `[w_0, ..., w_k]` denotes the composite `w_0 ∘ ... ∘ w_k`: the rightmost
//! letter acts first. Every search here is breadth-first by word length with
//! lexicographic tie-breaking over the letter order `+0 < -0 < +1 < -1 < ...`.
//! Words are deduplicated by their action on a probe window (the points the
//! search cares about plus `[0, budget.window)`), which keeps the frontier
//! finite for locally finite actions.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ce_core::{CeIndex, Registry, SetProgram};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermError {
    #[error("generator index {index} out of range (group has {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("c.e. index {0} is not registered")]
    UnknownIndex(u64),
    #[error("no witness within word length {word_len} (search closed: {closed})")]
    NoWitnessInBudget { word_len: usize, closed: bool },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("no admissible stabilizer element found at stage {stage}")]
    WitnessSearchFailed { stage: u64 },
    #[error("no element appeared within {stages} stages")]
    Timeout { stages: u64 },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error("malformed word {0:?}")]
    MalformedWord(String),
}

/// Zigzag code of an integer: `z >= 0 -> 2z`, `z < 0 -> -2z - 1`.
pub fn zigzag(z: i64) -> u64 {
    if z >= 0 {
        (z as u64) * 2
    } else {
        (z.unsigned_abs()) * 2 - 1
    }
}

pub fn unzigzag(n: u64) -> i64 {
    if n % 2 == 0 {
        (n / 2) as i64
    } else {
        -(n.div_ceil(2) as i64)
    }
}

/// A computable permutation of the naturals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Permutation {
    Identity,
    /// Disjoint finite cycles, each listed in mapping order.
    Cycles(Vec<Vec<u64>>),
    /// Explicit finite table with its declared inverse; identity off-table.
    Table { forward: BTreeMap<u64, u64>, backward: BTreeMap<u64, u64> },
    /// `n -> zigzag(unzigzag(n) + by)`.
    ZShift(i64),
    /// Swaps `2n <-> 2n + 1` for blocks `n = residue` (period 0) or
    /// `n ≡ residue (mod period)`.
    MaskedSwap { period: u64, residue: u64 },
    /// `outer ∘ inner`.
    Compose(Box<Permutation>, Box<Permutation>),
    Inverse(Box<Permutation>),
}

impl Permutation {
    pub fn cycle(points: &[u64]) -> Self {
        Permutation::Cycles(vec![points.to_vec()])
    }

    pub fn block_swap(block: u64) -> Self {
        Permutation::MaskedSwap { period: 0, residue: block }
    }

    pub fn compose(outer: Permutation, inner: Permutation) -> Self {
        Permutation::Compose(Box::new(outer), Box::new(inner))
    }

    pub fn inverse(self) -> Self {
        Permutation::Inverse(Box::new(self))
    }

    pub fn apply(&self, n: u64) -> u64 {
        match self {
            Permutation::Identity => n,
            Permutation::Cycles(cs) => cycle_step(cs, n, true),
            Permutation::Table { forward, .. } => forward.get(&n).copied().unwrap_or(n),
            Permutation::ZShift(by) => zigzag(unzigzag(n) + by),
            Permutation::MaskedSwap { period, residue } => masked_swap(*period, *residue, n),
            Permutation::Compose(outer, inner) => outer.apply(inner.apply(n)),
            Permutation::Inverse(p) => p.apply_inverse(n),
        }
    }

    pub fn apply_inverse(&self, n: u64) -> u64 {
        match self {
            Permutation::Identity => n,
            Permutation::Cycles(cs) => cycle_step(cs, n, false),
            Permutation::Table { backward, .. } => backward.get(&n).copied().unwrap_or(n),
            Permutation::ZShift(by) => zigzag(unzigzag(n) - by),
            Permutation::MaskedSwap { period, residue } => masked_swap(*period, *residue, n),
            Permutation::Compose(outer, inner) => inner.apply_inverse(outer.apply_inverse(n)),
            Permutation::Inverse(p) => p.apply(n),
        }
    }

    /// Finite support, or `None` when the support is infinite.
    pub fn support(&self) -> Option<BTreeSet<u64>> {
        match self {
            Permutation::Identity => Some(BTreeSet::new()),
            Permutation::Cycles(cs) => {
                Some(cs.iter().filter(|c| c.len() > 1).flatten().copied().collect())
            }
            Permutation::Table { forward, backward } => {
                Some(forward.keys().chain(backward.keys()).copied().collect())
            }
            Permutation::ZShift(0) => Some(BTreeSet::new()),
            Permutation::ZShift(_) => None,
            Permutation::MaskedSwap { period: 0, residue } => {
                Some(BTreeSet::from([2 * residue, 2 * residue + 1]))
            }
            Permutation::MaskedSwap { .. } => None,
            Permutation::Compose(a, b) => {
                let mut s = a.support()?;
                s.extend(b.support()?);
                Some(s)
            }
            Permutation::Inverse(p) => p.support(),
        }
    }

    /// Checks the declared inverse and injectivity on `[0, window)`.
    pub fn validate(&self, window: u64) -> Result<(), PermError> {
        if let Permutation::Cycles(cs) = self {
            let mut seen = BTreeSet::new();
            for x in cs.iter().flatten() {
                if !seen.insert(*x) {
                    return Err(PermError::InvalidPermutation(format!("cycles repeat point {x}")));
                }
            }
        }
        let mut images = HashSet::new();
        for n in 0..window {
            let y = self.apply(n);
            if self.apply_inverse(y) != n || self.apply(self.apply_inverse(n)) != n {
                return Err(PermError::InvalidPermutation(format!(
                    "declared inverse disagrees at {n}"
                )));
            }
            if !images.insert(y) {
                return Err(PermError::InvalidPermutation(format!("not injective at {n}")));
            }
        }
        match self {
            Permutation::Compose(a, b) => {
                a.validate(window)?;
                b.validate(window)
            }
            Permutation::Inverse(p) => p.validate(window),
            _ => Ok(()),
        }
    }
}

fn cycle_step(cs: &[Vec<u64>], n: u64, forward: bool) -> u64 {
    for c in cs {
        if let Some(pos) = c.iter().position(|x| *x == n) {
            let len = c.len();
            return if forward { c[(pos + 1) % len] } else { c[(pos + len - 1) % len] };
        }
    }
    n
}

fn masked_swap(period: u64, residue: u64, n: u64) -> u64 {
    let block = n / 2;
    let hit = if period == 0 { block == residue } else { block % period == residue % period };
    if hit {
        n ^ 1
    } else {
        n
    }
}

/// A signed generator index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub gen: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn pos(gen: usize) -> Self {
        Letter { gen, inverse: false }
    }

    pub fn neg(gen: usize) -> Self {
        Letter { gen, inverse: true }
    }

    pub fn inv(self) -> Self {
        Letter { gen: self.gen, inverse: !self.inverse }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.inverse { '-' } else { '+' }, self.gen)
    }
}

/// A group word; `[w_0, ..., w_k]` denotes `w_0 ∘ ... ∘ w_k`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn single(l: Letter) -> Self {
        Word(vec![l])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inv()).collect())
    }

    /// `self ∘ other`.
    pub fn then_apply(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend(other.0.iter().copied());
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for Word {
    type Err = PermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "e" {
            return Ok(Word::identity());
        }
        s.split_whitespace()
            .map(|tok| {
                let (inverse, digits) = match tok.as_bytes().first() {
                    Some(b'+') => (false, &tok[1..]),
                    Some(b'-') => (true, &tok[1..]),
                    _ => return Err(PermError::MalformedWord(s.to_string())),
                };
                let gen = digits.parse().map_err(|_| PermError::MalformedWord(s.to_string()))?;
                Ok(Letter { gen, inverse })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Countable generator families indexed by naturals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Generator `k` is the swap `(2k 2k+1)`.
    BlockSwaps,
    /// Generators `2k = (3k 3k+1)` and `2k+1 = (3k 3k+1 3k+2)`: a direct sum
    /// of copies of `S_3` on the blocks `{3k, 3k+1, 3k+2}`.
    BlockS3,
}

impl Family {
    /// Applies generator `i` (or its inverse) without building it.
    pub fn apply(self, i: usize, x: u64, inverse: bool) -> u64 {
        let i = i as u64;
        match self {
            Family::BlockSwaps => {
                if x / 2 == i {
                    x ^ 1
                } else {
                    x
                }
            }
            Family::BlockS3 => {
                let b = 3 * (i / 2);
                if x < b || x > b + 2 {
                    return x;
                }
                let r = x - b;
                let r = if i % 2 == 0 {
                    match r {
                        0 => 1,
                        1 => 0,
                        _ => 2,
                    }
                } else if inverse {
                    (r + 2) % 3
                } else {
                    (r + 1) % 3
                };
                b + r
            }
        }
    }

    pub fn generator(self, i: usize) -> Permutation {
        let i = i as u64;
        match self {
            Family::BlockSwaps => Permutation::block_swap(i),
            Family::BlockS3 => {
                let b = 3 * (i / 2);
                if i % 2 == 0 {
                    Permutation::cycle(&[b, b + 1])
                } else {
                    Permutation::cycle(&[b, b + 1, b + 2])
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generators {
    Finite(Vec<Permutation>),
    Family(Family),
}

/// Exact "word acts as the identity" predicates for catalog groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityOracle {
    /// Every generator has finite support; test the union of supports.
    FiniteSupport,
    /// Translation action: the identity is the unique element fixing 0.
    Translation,
}

/// Canonical orbit index, `a -> ` the (finite) orbit of `a`.
#[derive(Debug, Clone)]
pub enum OrbitOracle {
    BlockPairs,
    BlockTriples,
    /// Closure under the (finite) generator list.
    Closure,
    /// Orbits frozen by [`tame_subgroup`]; closure under `gens` elsewhere.
    Frozen { table: Arc<BTreeMap<u64, BTreeSet<u64>>>, gens: Arc<Vec<Permutation>> },
}

/// Search limits for word and orbit searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    /// Maximum word length.
    pub word_len: usize,
    /// Generators considered: indices `< alphabet`.
    pub alphabet: usize,
    /// Probe window `[0, window)` used to deduplicate words.
    pub window: u64,
    /// Hard cap on distinct search states.
    pub max_states: usize,
    /// Orbits larger than this count as infinite.
    pub orbit_cap: usize,
    /// Points (and finite sets `[0, m)`) sampled by [`classify_action`].
    pub sample: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { word_len: 12, alphabet: 16, window: 64, max_states: 200_000, orbit_cap: 64, sample: 8 }
    }
}

impl Budget {
    pub fn with_word_len(mut self, word_len: usize) -> Self {
        self.word_len = word_len;
        self
    }

    pub fn with_alphabet(mut self, alphabet: usize) -> Self {
        self.alphabet = alphabet;
        self
    }
}

/// Why a word search ended without a hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchMiss {
    /// No new states appeared: every reachable action on the probe was seen.
    pub closed: bool,
    pub states: usize,
}

/// A permutation group given by generators, with optional oracles.
#[derive(Debug, Clone)]
pub struct PermGroup {
    pub name: String,
    pub gens: Generators,
    pub identity_oracle: Option<IdentityOracle>,
    pub orbit_oracle: Option<OrbitOracle>,
}

impl PermGroup {
    pub fn finite(name: impl Into<String>, gens: Vec<Permutation>) -> Self {
        let gens = if gens.is_empty() { vec![Permutation::Identity] } else { gens };
        PermGroup {
            name: name.into(),
            gens: Generators::Finite(gens),
            identity_oracle: Some(IdentityOracle::FiniteSupport),
            orbit_oracle: Some(OrbitOracle::Closure),
        }
    }

    pub fn generator_count(&self) -> Option<usize> {
        match &self.gens {
            Generators::Finite(v) => Some(v.len()),
            Generators::Family(_) => None,
        }
    }

    pub fn generator(&self, i: usize) -> Result<Permutation, PermError> {
        match &self.gens {
            Generators::Finite(v) => {
                v.get(i).cloned().ok_or(PermError::IndexOutOfRange { index: i, len: v.len() })
            }
            Generators::Family(f) => Ok(f.generator(i)),
        }
    }

    fn check_word(&self, word: &Word) -> Result<(), PermError> {
        if let Some(n) = self.generator_count() {
            if let Some(l) = word.0.iter().find(|l| l.gen >= n) {
                return Err(PermError::IndexOutOfRange { index: l.gen, len: n });
            }
        }
        Ok(())
    }

    pub fn letter_apply(&self, l: Letter, x: u64) -> u64 {
        match &self.gens {
            Generators::Finite(v) => {
                let p = &v[l.gen];
                if l.inverse {
                    p.apply_inverse(x)
                } else {
                    p.apply(x)
                }
            }
            Generators::Family(f) => f.apply(l.gen, x, l.inverse),
        }
    }

    /// Applies `word` to `x` (rightmost letter first).
    pub fn apply_word(&self, word: &Word, x: u64) -> Result<u64, PermError> {
        self.check_word(word)?;
        Ok(word.0.iter().rev().fold(x, |acc, l| self.letter_apply(*l, acc)))
    }

    /// Evaluates a word to a permutation syntax tree.
    pub fn word_eval(&self, word: &Word) -> Result<Permutation, PermError> {
        self.check_word(word)?;
        let mut acc = Permutation::Identity;
        for l in word.0.iter().rev() {
            let g = self.generator(l.gen)?;
            let g = if l.inverse { g.inverse() } else { g };
            acc = match acc {
                Permutation::Identity => g,
                inner => Permutation::compose(g, inner),
            };
        }
        Ok(acc)
    }

    /// Letters `+0, -0, +1, -1, ...` over the budgeted alphabet.
    pub fn alphabet(&self, budget: &Budget) -> Vec<Letter> {
        let n = self.generator_count().map_or(budget.alphabet, |c| c.min(budget.alphabet));
        (0..n).flat_map(|g| [Letter::pos(g), Letter::neg(g)]).collect()
    }

    /// Exact identity test, if the group carries an oracle.
    pub fn is_identity(&self, word: &Word) -> Option<bool> {
        let oracle = self.identity_oracle?;
        match oracle {
            IdentityOracle::Translation => Some(self.apply_word(word, 0).ok()? == 0),
            IdentityOracle::FiniteSupport => {
                let mut pts = BTreeSet::new();
                for l in &word.0 {
                    pts.extend(self.generator(l.gen).ok()?.support()?);
                }
                Some(pts.iter().all(|x| self.apply_word(word, *x).ok() == Some(*x)))
            }
        }
    }

    /// Canonical orbit of `a`, if the group carries an orbit oracle.
    pub fn orbit_of(&self, a: u64) -> Option<BTreeSet<u64>> {
        match self.orbit_oracle.as_ref()? {
            OrbitOracle::BlockPairs => Some(BTreeSet::from([a, a ^ 1])),
            OrbitOracle::BlockTriples => {
                let b = a - a % 3;
                Some(BTreeSet::from([b, b + 1, b + 2]))
            }
            OrbitOracle::Closure => match &self.gens {
                Generators::Finite(v) => closure(a, v, usize::MAX),
                Generators::Family(_) => None,
            },
            OrbitOracle::Frozen { table, gens } => match table.get(&a) {
                Some(o) => Some(o.clone()),
                None => closure(a, gens, usize::MAX),
            },
        }
    }

    /// Orbit of `a` under the budgeted alphabet; `Err(partial)` once it
    /// exceeds `budget.orbit_cap` points.
    pub fn orbit_search(&self, a: u64, budget: &Budget) -> Result<BTreeSet<u64>, BTreeSet<u64>> {
        let letters = self.alphabet(budget);
        let mut seen = BTreeSet::from([a]);
        let mut frontier = vec![a];
        while let Some(x) = frontier.pop() {
            for l in &letters {
                let y = self.letter_apply(*l, x);
                if seen.insert(y) {
                    if seen.len() > budget.orbit_cap {
                        return Err(seen);
                    }
                    frontier.push(y);
                }
            }
        }
        Ok(seen)
    }

    /// Breadth-first word search. `accept(word, images)` sees the images of
    /// `probe` under `word`; the first accepted word in (length, lex) order
    /// is returned.
    pub fn search<F>(&self, probe: &[u64], budget: &Budget, accept: F) -> Result<Word, SearchMiss>
    where
        F: FnMut(&Word, &[u64]) -> bool,
    {
        self.search_letters(&self.alphabet(budget), probe, budget, accept)
    }

    /// [`PermGroup::search`] over an explicit letter list.
    pub fn search_letters<F>(
        &self,
        letters: &[Letter],
        probe: &[u64],
        budget: &Budget,
        mut accept: F,
    ) -> Result<Word, SearchMiss>
    where
        F: FnMut(&Word, &[u64]) -> bool,
    {
        let root = probe.to_vec();
        if accept(&Word::identity(), &root) {
            return Ok(Word::identity());
        }
        let mut visited: HashSet<Vec<u64>> = HashSet::from([root.clone()]);
        let mut level: Vec<(Word, Vec<u64>)> = vec![(Word::identity(), root)];
        for _ in 0..budget.word_len {
            let mut next = Vec::new();
            for l in letters {
                for (w, st) in &level {
                    let img: Vec<u64> = st.iter().map(|x| self.letter_apply(*l, *x)).collect();
                    if visited.contains(&img) {
                        continue;
                    }
                    let mut word = Vec::with_capacity(w.len() + 1);
                    word.push(*l);
                    word.extend_from_slice(&w.0);
                    let word = Word(word);
                    if accept(&word, &img) {
                        return Ok(word);
                    }
                    visited.insert(img.clone());
                    if visited.len() > budget.max_states {
                        return Err(SearchMiss { closed: false, states: visited.len() });
                    }
                    next.push((word, img));
                }
            }
            if next.is_empty() {
                return Err(SearchMiss { closed: true, states: visited.len() });
            }
            level = next;
        }
        Err(SearchMiss { closed: false, states: visited.len() })
    }

    fn probe_with(&self, extra: &BTreeSet<u64>, budget: &Budget) -> Vec<u64> {
        let mut pts: BTreeSet<u64> = (0..budget.window).collect();
        pts.extend(extra.iter().copied());
        pts.into_iter().collect()
    }

    /// Every distinct action visible on the probe window, as words.
    pub fn enumerate_actions(&self, budget: &Budget) -> Result<Vec<Word>, SearchMiss> {
        let probe = self.probe_with(&BTreeSet::new(), budget);
        let mut out = Vec::new();
        let res = self.search(&probe, budget, |w, _| {
            out.push(w.clone());
            false
        });
        match res {
            Err(SearchMiss { closed: true, .. }) => Ok(out),
            Err(miss) => Err(miss),
            Ok(_) => unreachable!("accept never fires"),
        }
    }
}

/// Generators whose support meets `x`, when every generator has finite
/// support.
fn touching(g: &PermGroup, x: u64) -> Option<Vec<usize>> {
    match &g.gens {
        Generators::Family(Family::BlockSwaps) => Some(vec![(x / 2) as usize]),
        Generators::Family(Family::BlockS3) => {
            let b = (x / 3) as usize;
            Some(vec![2 * b, 2 * b + 1])
        }
        Generators::Finite(v) => {
            let mut out = Vec::new();
            for (i, p) in v.iter().enumerate() {
                if p.support()?.contains(&x) {
                    out.push(i);
                }
            }
            Some(out)
        }
    }
}

/// Finds a word `g` with `g(a) = b` for every `(a, b)` in `maps` and
/// `g(x) != y` for every `(x, y)` in `avoid`.
///
/// When every generator has finite support the constrained points are split
/// into components (points linked through overlapping generator supports).
/// Generators of different components commute and act independently, so
/// each component is searched breadth-first on its own and the component
/// words are concatenated in order of least point. Otherwise one plain
/// search over the budgeted alphabet runs. Returns `None` on contradictory
/// constraints or an exhausted budget.
pub fn solve_map(g: &PermGroup, maps: &[(u64, u64)], avoid: &[(u64, u64)], budget: &Budget) -> Option<Word> {
    let mut want: BTreeMap<u64, u64> = BTreeMap::new();
    let mut hit: BTreeMap<u64, u64> = BTreeMap::new();
    for (a, b) in maps {
        if *want.entry(*a).or_insert(*b) != *b || *hit.entry(*b).or_insert(*a) != *a {
            return None;
        }
    }
    let points: BTreeSet<u64> = want.keys().copied().chain(avoid.iter().map(|p| p.0)).collect();
    if points.is_empty() {
        return Some(Word::identity());
    }
    let ok = |pts: &[u64], img: &[u64]| {
        pts.iter().zip(img).all(|(x, y)| want.get(x).is_none_or(|b| b == y))
            && avoid.iter().all(|(x, y)| pts.iter().position(|p| p == x).is_none_or(|i| img[i] != *y))
    };
    let cap = budget.orbit_cap.max(1) * 64;
    let mut comps: Vec<(Vec<u64>, BTreeSet<usize>)> = Vec::new();
    let mut placed: BTreeSet<u64> = BTreeSet::new();
    let mut split = true;
    'outer: for p in &points {
        if placed.contains(p) {
            continue;
        }
        let mut pts = BTreeSet::from([*p]);
        let mut gens = BTreeSet::new();
        let mut frontier = vec![*p];
        while let Some(x) = frontier.pop() {
            let Some(ts) = touching(g, x) else {
                split = false;
                break 'outer;
            };
            for t in ts {
                if gens.insert(t) {
                    let Some(supp) = g.generator(t).ok().and_then(|q| q.support()) else {
                        split = false;
                        break 'outer;
                    };
                    for y in supp {
                        if pts.insert(y) {
                            frontier.push(y);
                        }
                    }
                    if pts.len() > cap {
                        split = false;
                        break 'outer;
                    }
                }
            }
        }
        let mine: Vec<u64> = points.iter().copied().filter(|x| pts.contains(x)).collect();
        placed.extend(mine.iter().copied());
        comps.push((mine, gens));
    }
    if !split {
        let probe: Vec<u64> = points.into_iter().collect();
        return g.search(&probe, budget, |_, img| ok(&probe, img)).ok();
    }
    let mut word = Vec::new();
    for (pts, gens) in comps {
        let letters: Vec<Letter> = gens.iter().flat_map(|i| [Letter::pos(*i), Letter::neg(*i)]).collect();
        let w = g.search_letters(&letters, &pts, budget, |_, img| ok(&pts, img)).ok()?;
        word.extend(w.0);
    }
    Some(Word(word))
}

/// Closure of `{a}` under finitely many permutations; `None` past `cap`.
pub fn closure(a: u64, gens: &[Permutation], cap: usize) -> Option<BTreeSet<u64>> {
    let mut seen = BTreeSet::from([a]);
    let mut frontier = vec![a];
    while let Some(x) = frontier.pop() {
        for g in gens {
            for y in [g.apply(x), g.apply_inverse(x)] {
                if seen.insert(y) {
                    if seen.len() > cap {
                        return None;
                    }
                    frontier.push(y);
                }
            }
        }
    }
    Some(seen)
}

/// `apply(p, n)`: the forward rule.
pub fn apply(p: &Permutation, n: u64) -> u64 {
    p.apply(n)
}

pub fn word_eval(g: &PermGroup, word: &Word) -> Result<Permutation, PermError> {
    g.word_eval(word)
}

/// A word `g` with `g·F ∩ F = ∅`.
pub fn avoid_finite_set(g: &PermGroup, f: &BTreeSet<u64>, budget: &Budget) -> Result<Word, PermError> {
    let probe: Vec<u64> = f.iter().copied().collect();
    g.search(&probe, budget, |_, img| img.iter().all(|y| !f.contains(y)))
        .map_err(|m| PermError::NoWitnessInBudget { word_len: budget.word_len, closed: m.closed })
}

fn stabilizer_search(g: &PermGroup, f: &BTreeSet<u64>, budget: &Budget) -> Result<Word, SearchMiss> {
    let probe = g.probe_with(f, budget);
    let fixed: Vec<usize> = probe.iter().enumerate().filter(|(_, x)| f.contains(x)).map(|(i, _)| i).collect();
    g.search(&probe, budget, |w, img| {
        fixed.iter().all(|i| img[*i] == probe[*i]) && g.is_identity(w) == Some(false)
    })
}

/// A word fixing `F` pointwise that does not act as the identity.
pub fn non_isolation_witness(g: &PermGroup, f: &BTreeSet<u64>, budget: &Budget) -> Option<Word> {
    g.identity_oracle?;
    stabilizer_search(g, f, budget).ok()
}

/// Outcome of the isolated / non-isolated / infinite-orbit case split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "tag")]
pub enum ActionClass {
    /// `Stab(certificate) = ker` and all sampled orbits are finite; the
    /// representatives list every distinct action.
    FinitelyManyActions { representatives: Vec<Word>, certificate: Vec<u64> },
    /// The orbit of `seed` exceeded `explored` points.
    InfiniteOrbit { seed: u64, explored: usize },
    /// For each sampled `F = [0, m)`, a non-identity word fixing `F`.
    NonIsolated { witnesses: Vec<(u64, Word)>, orbit_sizes: Vec<usize> },
    Unknown { budget: Budget },
}

impl ActionClass {
    pub fn tag(&self) -> &'static str {
        match self {
            ActionClass::FinitelyManyActions { .. } => "FinitelyManyActions",
            ActionClass::InfiniteOrbit { .. } => "InfiniteOrbit",
            ActionClass::NonIsolated { .. } => "NonIsolated",
            ActionClass::Unknown { .. } => "Unknown",
        }
    }
}

pub fn classify_action(g: &PermGroup, budget: &Budget) -> ActionClass {
    let mut orbit_sizes = Vec::new();
    for a in 0..budget.sample {
        match g.orbit_search(a, budget) {
            Ok(o) => orbit_sizes.push(o.len()),
            Err(partial) => return ActionClass::InfiniteOrbit { seed: a, explored: partial.len() },
        }
    }
    if g.identity_oracle.is_none() {
        return ActionClass::Unknown { budget: *budget };
    }
    let mut witnesses = Vec::new();
    for m in 1..=budget.sample {
        let f: BTreeSet<u64> = (0..m).collect();
        match stabilizer_search(g, &f, budget) {
            Ok(w) => witnesses.push((m, w)),
            Err(SearchMiss { closed: true, .. }) => {
                return match g.enumerate_actions(budget) {
                    Ok(reps) => ActionClass::FinitelyManyActions {
                        representatives: reps,
                        certificate: f.into_iter().collect(),
                    },
                    Err(_) => ActionClass::Unknown { budget: *budget },
                };
            }
            Err(_) => return ActionClass::Unknown { budget: *budget },
        }
    }
    ActionClass::NonIsolated { witnesses, orbit_sizes }
}

/// One stage of the tamed-subgroup replay.
#[derive(Debug, Clone, Serialize)]
pub struct TameStage {
    pub stage: u64,
    /// Number of admitted elements after this stage.
    pub admitted: usize,
    /// Orbits frozen at this stage.
    pub frozen: Vec<(u64, Vec<u64>)>,
}

/// The subgroup `G'` with computable orbits, plus its construction log.
#[derive(Debug, Clone)]
pub struct TamedGroup {
    pub group: PermGroup,
    pub admitted: Vec<Word>,
    pub log: Vec<TameStage>,
}

impl TamedGroup {
    /// Orbit of `a` under the elements admitted by the end of `stage`.
    pub fn orbit_at_stage(&self, base: &PermGroup, a: u64, stage: u64) -> BTreeSet<u64> {
        let count = self.log.iter().find(|t| t.stage == stage).map_or(self.admitted.len(), |t| t.admitted);
        let gens: Vec<Permutation> =
            self.admitted[..count].iter().map(|w| base.word_eval(w).expect("admitted words are valid")).collect();
        closure(a, &gens, usize::MAX).expect("finite orbit")
    }
}

/// Frozen orbits, indexed by every point they contain.
#[derive(Default)]
struct FrozenOrbits {
    by_start: BTreeMap<u64, BTreeSet<u64>>,
    orbits: Vec<BTreeSet<u64>>,
    owner: HashMap<u64, usize>,
}

impl FrozenOrbits {
    fn preserved_by(&self, p: &Permutation) -> bool {
        match p.support() {
            // a bijection mapping each frozen support point into its own
            // (finite) orbit maps every frozen orbit onto itself
            Some(supp) => supp.iter().all(|x| self.owner.get(x).is_none_or(|k| self.orbits[*k].contains(&p.apply(*x)))),
            None => self.orbits.iter().all(|o| o.iter().all(|x| o.contains(&p.apply(*x)))),
        }
    }

    fn freeze(&mut self, a: u64, orbit: BTreeSet<u64>) {
        let k = self.orbits.len();
        for x in &orbit {
            self.owner.insert(*x, k);
        }
        self.by_start.insert(a, orbit.clone());
        self.orbits.push(orbit);
    }
}

/// Staged construction of a subgroup `G' <= G` whose orbits never grow after
/// they are frozen.
///
/// Stage `s`: (1) admit every base generator of index `< alphabet + s` that
/// preserves all frozen orbits; (2) admit the first non-identity word fixing
/// `{0, ..., s}` that preserves all frozen orbits; (3) freeze the orbit of
/// every `a <= s` under the admitted elements.
///
/// A generator rejected in (1) stays rejected: frozen orbits only
/// accumulate. Step (2) scans single letters first and falls back to the
/// breadth-first search when no single letter qualifies.
pub fn tame_subgroup(g: &PermGroup, stages: u64, budget: &Budget) -> Result<TamedGroup, PermError> {
    match classify_action(g, budget) {
        ActionClass::NonIsolated { .. } => {}
        other => {
            return Err(PermError::PreconditionFailed(format!(
                "tame_subgroup needs non-isolated actions with finite orbits, got {}",
                other.tag()
            )))
        }
    }
    let mut admitted: Vec<Word> = Vec::new();
    let mut seen: HashSet<Word> = HashSet::new();
    let mut perms: Vec<Permutation> = Vec::new();
    let mut frozen = FrozenOrbits::default();
    let mut log = Vec::new();
    let mut cursor = 0usize;
    for s in 0..=stages {
        let width = budget.alphabet + s as usize;
        let limit = g.generator_count().map_or(width, |c| c.min(width));
        for gi in cursor..limit {
            let p = g.generator(gi)?;
            if frozen.preserved_by(&p) {
                let w = Word::single(Letter::pos(gi));
                seen.insert(w.clone());
                admitted.push(w);
                perms.push(p);
            }
        }
        cursor = cursor.max(limit);
        let found = first_kind_single(g, s, limit, &frozen)?;
        let found = match found {
            Some(w) => w,
            None => first_kind_search(g, s, width, budget, &frozen)?,
        };
        if seen.insert(found.clone()) {
            perms.push(g.word_eval(&found)?);
            admitted.push(found);
        }
        let mut newly = Vec::new();
        for a in 0..=s {
            if frozen.by_start.contains_key(&a) {
                continue;
            }
            let o = match frozen.owner.get(&a) {
                Some(k) => frozen.orbits[*k].clone(),
                None => closure(a, &perms, budget.orbit_cap.max(1) * 64)
                    .ok_or_else(|| PermError::PreconditionFailed(format!("orbit of {a} is not finite")))?,
            };
            newly.push((a, o.iter().copied().collect()));
            if frozen.owner.contains_key(&a) {
                frozen.by_start.insert(a, o);
            } else {
                frozen.freeze(a, o);
            }
        }
        log.push(TameStage { stage: s, admitted: admitted.len(), frozen: newly });
    }
    let group = PermGroup {
        name: format!("{}-tamed", g.name),
        gens: Generators::Finite(perms.clone()),
        identity_oracle: g.identity_oracle,
        orbit_oracle: Some(OrbitOracle::Frozen { table: Arc::new(frozen.by_start), gens: Arc::new(perms) }),
    };
    Ok(TamedGroup { group, admitted, log })
}

/// First single generator (finite support only) fixing `{0..=s}` pointwise,
/// preserving the frozen orbits and acting non-trivially.
fn first_kind_single(g: &PermGroup, s: u64, limit: usize, frozen: &FrozenOrbits) -> Result<Option<Word>, PermError> {
    for gi in 0..limit {
        let p = g.generator(gi)?;
        let Some(supp) = p.support() else { return Ok(None) };
        if supp.iter().any(|x| *x <= s && p.apply(*x) != *x) || !frozen.preserved_by(&p) {
            continue;
        }
        let w = Word::single(Letter::pos(gi));
        if g.is_identity(&w) == Some(false) {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

fn first_kind_search(
    g: &PermGroup,
    s: u64,
    width: usize,
    budget: &Budget,
    frozen: &FrozenOrbits,
) -> Result<Word, PermError> {
    let fix: BTreeSet<u64> = (0..=s).collect();
    let mut extra = fix.clone();
    extra.extend(frozen.orbits.iter().flatten().copied());
    let probe = g.probe_with(&extra, budget);
    let wide = Budget { alphabet: width, ..*budget };
    g.search(&probe, &wide, |w, img| {
        let map: BTreeMap<u64, u64> = probe.iter().copied().zip(img.iter().copied()).collect();
        fix.iter().all(|x| map[x] == *x)
            && frozen.orbits.iter().all(|o| o.iter().all(|x| o.contains(&map[x])))
            && g.is_identity(w) == Some(false)
    })
    .map_err(|_| PermError::WitnessSearchFailed { stage: s })
}

/// `α(word, e)`: registers (once) a program with `W_{α,s} = g·W_{e,s}`
/// at every stage after registration.
pub fn induced_alpha(reg: &mut Registry, g: &PermGroup, word: &Word, e: CeIndex) -> Result<CeIndex, PermError> {
    if !reg.is_valid(e) {
        return Err(PermError::UnknownIndex(e.0));
    }
    let perm = g.word_eval(word)?;
    let key = format!("alpha|{}|{}|{}", g.name, word, e.0);
    let label = format!("alpha({word},{e})");
    Ok(reg.register_memo(key, move |_| SetProgram::image(label, e, move |x| Some(perm.apply(x)))))
}

/// Recovers `F_γ(n)` from an index-level action by feeding it a singleton.
pub fn extract_permutation<A>(
    reg: &mut Registry,
    mut alpha: A,
    word: &Word,
    n: u64,
    max_stages: u64,
) -> Result<u64, PermError>
where
    A: FnMut(&mut Registry, &Word, CeIndex) -> Result<CeIndex, PermError>,
{
    let single = reg.register(SetProgram::singleton(n));
    let image = alpha(reg, word, single)?;
    let start = reg.stage();
    for s in start..=start + max_stages {
        reg.advance_to(s);
        let got = reg.set_at(image, s);
        if got.len() == 1 {
            return Ok(*got.iter().next().unwrap());
        }
        if got.len() > 1 {
            return Err(PermError::PreconditionFailed(format!("image of a singleton has {} elements", got.len())));
        }
    }
    Err(PermError::Timeout { stages: max_stages })
}

/// Built-in catalog groups.
pub fn catalog(name: &str) -> Option<PermGroup> {
    let g = match name {
        "trivial" => PermGroup::finite(name, vec![Permutation::Identity]),
        "swap-01" => PermGroup::finite(name, vec![Permutation::cycle(&[0, 1])]),
        "s3-on-3" => PermGroup::finite(name, vec![Permutation::cycle(&[0, 1]), Permutation::cycle(&[0, 1, 2])]),
        "s3-composite" => PermGroup::finite(name, vec![Permutation::cycle(&[0, 1]), Permutation::cycle(&[1, 2])]),
        "z-shift" => PermGroup {
            name: name.into(),
            gens: Generators::Finite(vec![Permutation::ZShift(1)]),
            identity_oracle: Some(IdentityOracle::Translation),
            orbit_oracle: None,
        },
        "z-shift-dyadic" => PermGroup {
            name: name.into(),
            gens: Generators::Finite((0..40).map(|k| Permutation::ZShift(1i64 << k)).collect()),
            identity_oracle: Some(IdentityOracle::Translation),
            orbit_oracle: None,
        },
        "block-swaps" => PermGroup {
            name: name.into(),
            gens: Generators::Family(Family::BlockSwaps),
            identity_oracle: Some(IdentityOracle::FiniteSupport),
            orbit_oracle: Some(OrbitOracle::BlockPairs),
        },
        "s3-blocks" => PermGroup {
            name: name.into(),
            gens: Generators::Family(Family::BlockS3),
            identity_oracle: Some(IdentityOracle::FiniteSupport),
            orbit_oracle: Some(OrbitOracle::BlockTriples),
        },
        _ => return None,
    };
    Some(g)
}

pub const CATALOG_NAMES: &[&str] =
    &["trivial", "swap-01", "s3-on-3", "s3-composite", "z-shift", "z-shift-dyadic", "block-swaps", "s3-blocks"];

/// Generator list of a catalog file entry: explicit or a named family.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum GeneratorSpec {
    List(Vec<Permutation>),
    Family { family: Family },
}

// by hand: untagged buffering cannot read the integer map keys of tables
impl<'de> Deserialize<'de> for GeneratorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Named {
            family: Family,
        }
        let v = serde_json::Value::deserialize(de)?;
        if v.is_array() {
            serde_json::from_value(v).map(GeneratorSpec::List).map_err(serde::de::Error::custom)
        } else {
            serde_json::from_value::<Named>(v).map(|n| GeneratorSpec::Family { family: n.family }).map_err(serde::de::Error::custom)
        }
    }
}

/// Catalog file entry:
/// `{name, generators: [perm syntax] | {family}, identity_oracle, orbit_oracle}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub generators: GeneratorSpec,
    #[serde(default)]
    pub identity_oracle: Option<IdentityOracle>,
    #[serde(default)]
    pub orbit_oracle: Option<String>,
}

impl GroupSpec {
    /// Builds the group, validating every explicit generator on `[0, 1024)`.
    pub fn build(&self) -> Result<PermGroup, PermError> {
        let gens = match &self.generators {
            GeneratorSpec::List(v) => {
                for p in v {
                    p.validate(1 << 10)?;
                }
                Generators::Finite(if v.is_empty() { vec![Permutation::Identity] } else { v.clone() })
            }
            GeneratorSpec::Family { family } => Generators::Family(*family),
        };
        let orbit_oracle = match self.orbit_oracle.as_deref() {
            None => None,
            Some("block-pairs") => Some(OrbitOracle::BlockPairs),
            Some("block-triples") => Some(OrbitOracle::BlockTriples),
            Some("closure") => Some(OrbitOracle::Closure),
            Some(other) => return Err(PermError::UnknownGroup(format!("orbit oracle {other}"))),
        };
        Ok(PermGroup { name: self.name.clone(), gens, identity_oracle: self.identity_oracle, orbit_oracle })
    }
}

/// Resolves a catalog name, or parses a catalog JSON file when `name` ends
/// in `.json`.
pub fn resolve_group(name: &str) -> Result<PermGroup, PermError> {
    if name.ends_with(".json") {
        let text = std::fs::read_to_string(name).map_err(|e| PermError::UnknownGroup(format!("{name}: {e}")))?;
        let spec: GroupSpec =
            serde_json::from_str(&text).map_err(|e| PermError::UnknownGroup(format!("{name}: {e}")))?;
        return spec.build();
    }
    catalog(name).ok_or_else(|| PermError::UnknownGroup(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn zigzag_codes() {
        assert_eq!(zigzag(0), 0);
        assert_eq!(zigzag(-1), 1);
        assert_eq!(zigzag(1), 2);
        assert_eq!(zigzag(-2), 3);
        for n in 0..1000 {
            assert_eq!(zigzag(unzigzag(n)), n);
        }
    }

    #[test]
    fn apply_examples() {
        assert_eq!(apply(&Permutation::Identity, 5), 5);
        assert_eq!(apply(&Permutation::cycle(&[0, 1]), 0), 1);
        let comp = Permutation::compose(Permutation::cycle(&[0, 1]), Permutation::cycle(&[1, 2]));
        // (1 2) sends 2 to 1, then (0 1) sends 1 to 0
        assert_eq!(apply(&comp, 2), 0);
    }

    #[test]
    fn word_eval_examples() {
        let z = catalog("z-shift").unwrap();
        assert_eq!(word_eval(&z, &Word::identity()).unwrap(), Permutation::Identity);
        let back = word_eval(&z, &w("+0 -0")).unwrap();
        assert!((0..1024).all(|n| back.apply(n) == n));
        let three = word_eval(&z, &w("+0 +0 +0")).unwrap();
        for k in [-1i64, 0, 1] {
            assert_eq!(three.apply(zigzag(k)), zigzag(k + 3));
        }
        let s3 = catalog("s3-on-3").unwrap();
        assert_eq!(s3.word_eval(&w("+2")), Err(PermError::IndexOutOfRange { index: 2, len: 2 }));
    }

    #[test]
    fn catalog_permutations_have_valid_inverses() {
        let perms = vec![
            Permutation::cycle(&[3, 9, 4]),
            Permutation::ZShift(-5),
            Permutation::MaskedSwap { period: 1, residue: 0 },
            Permutation::block_swap(7),
            Permutation::compose(Permutation::ZShift(2), Permutation::cycle(&[0, 1])).inverse(),
        ];
        for p in perms {
            p.validate(1 << 10).unwrap();
        }
        let bad = Permutation::Table { forward: BTreeMap::from([(0, 1), (1, 0)]), backward: BTreeMap::from([(0, 0)]) };
        assert!(bad.validate(16).is_err());
        assert!(Permutation::Cycles(vec![vec![0, 1], vec![1, 2]]).validate(8).is_err());
    }

    #[test]
    fn avoid_empty_set_is_identity() {
        for name in CATALOG_NAMES {
            let g = catalog(name).unwrap();
            assert_eq!(avoid_finite_set(&g, &BTreeSet::new(), &Budget::default()).unwrap(), Word::identity());
        }
    }

    #[test]
    fn avoid_on_shift_needs_a_long_enough_shift() {
        let z = catalog("z-shift").unwrap();
        let f: BTreeSet<u64> = [-1i64, 0, 1].into_iter().map(zigzag).collect();
        let g = avoid_finite_set(&z, &f, &Budget::default()).unwrap();
        assert_eq!(g, w("+0 +0 +0"));
        let p = z.word_eval(&g).unwrap();
        assert!(f.iter().all(|x| !f.contains(&p.apply(*x))));
    }

    #[test]
    fn avoid_in_s3_fails_with_closed_search() {
        let s3 = catalog("s3-on-3").unwrap();
        let f = BTreeSet::from([0, 1, 2]);
        assert_eq!(
            avoid_finite_set(&s3, &f, &Budget::default()),
            Err(PermError::NoWitnessInBudget { word_len: 12, closed: true })
        );
    }

    #[test]
    fn non_isolation_examples() {
        let b = catalog("block-swaps").unwrap();
        let budget = Budget::default();
        assert_eq!(non_isolation_witness(&b, &BTreeSet::from([0, 1]), &budget), Some(w("+1")));
        assert_eq!(non_isolation_witness(&b, &BTreeSet::new(), &budget), Some(w("+0")));
        let s3 = catalog("s3-on-3").unwrap();
        assert_eq!(non_isolation_witness(&s3, &BTreeSet::from([0, 1, 2]), &budget), None);
    }

    #[test]
    fn trichotomy_on_catalog_witnesses() {
        let budget = Budget::default();
        let s3 = classify_action(&catalog("s3-on-3").unwrap(), &budget);
        match &s3 {
            ActionClass::FinitelyManyActions { representatives, .. } => assert_eq!(representatives.len(), 6),
            other => panic!("{other:?}"),
        }
        assert_eq!(classify_action(&catalog("z-shift").unwrap(), &budget).tag(), "InfiniteOrbit");
        match classify_action(&catalog("block-swaps").unwrap(), &budget) {
            ActionClass::NonIsolated { orbit_sizes, .. } => assert!(orbit_sizes.iter().all(|n| *n == 2)),
            other => panic!("{other:?}"),
        }
        assert_eq!(classify_action(&catalog("swap-01").unwrap(), &budget).tag(), "FinitelyManyActions");
        assert_eq!(classify_action(&catalog("s3-blocks").unwrap(), &budget).tag(), "NonIsolated");
    }

    #[test]
    fn tame_block_swaps_is_the_whole_group() {
        let b = catalog("block-swaps").unwrap();
        let budget = Budget::default();
        let t = tame_subgroup(&b, 20, &budget).unwrap();
        for a in 0..40 {
            assert_eq!(t.group.orbit_of(a).unwrap(), BTreeSet::from([a, a ^ 1]));
        }
        // frozen-orbit law
        for st in &t.log {
            for a in 0..=st.stage {
                assert_eq!(t.orbit_at_stage(&b, a, st.stage), t.group.orbit_of(a).unwrap());
            }
        }
    }

    #[test]
    fn tame_s3_blocks_freezes_triples() {
        let g = catalog("s3-blocks").unwrap();
        let t = tame_subgroup(&g, 12, &Budget::default()).unwrap();
        for a in 0..13 {
            let b = a - a % 3;
            assert_eq!(t.group.orbit_of(a).unwrap(), BTreeSet::from([b, b + 1, b + 2]));
        }
    }

    #[test]
    fn solve_map_examples() {
        let b = catalog("block-swaps").unwrap();
        let budget = Budget::default();
        assert_eq!(solve_map(&b, &[], &[], &budget), Some(Word::identity()));
        assert_eq!(solve_map(&b, &[(0, 1)], &[], &budget).unwrap().to_string(), "+0");
        assert_eq!(solve_map(&b, &[(0, 1), (0, 0)], &[], &budget), None);
        assert_eq!(solve_map(&b, &[(0, 2)], &[], &budget), None);
        // independent blocks far apart, each needing a swap
        let far: Vec<(u64, u64)> = (0..20).map(|k| (1000 + 4 * k, (1000 + 4 * k) ^ 1)).collect();
        let w = solve_map(&b, &far, &[(7, 7)], &budget).unwrap();
        for (a, c) in &far {
            assert_eq!(b.apply_word(&w, *a).unwrap(), *c);
        }
        assert_eq!(b.apply_word(&w, 7).unwrap(), 6);
        let t = tame_subgroup(&b, 300, &budget).unwrap();
        let w = solve_map(&t.group, &[(500, 501), (502, 502)], &[], &budget).unwrap();
        assert_eq!(t.group.apply_word(&w, 500).unwrap(), 501);
        assert_eq!(t.group.apply_word(&w, 502).unwrap(), 502);
        let s3 = catalog("s3-blocks").unwrap();
        let w = solve_map(&s3, &[(3, 5), (4, 3)], &[], &budget).unwrap();
        assert_eq!(s3.apply_word(&w, 3).unwrap(), 5);
        assert_eq!(s3.apply_word(&w, 4).unwrap(), 3);
    }

    #[test]
    fn dyadic_shift_reaches_far() {
        let g = catalog("z-shift-dyadic").unwrap();
        let w: Word = "+20".parse().unwrap();
        assert_eq!(unzigzag(g.apply_word(&w, zigzag(0)).unwrap()), 1 << 20);
        assert_eq!(classify_action(&g, &Budget::default()).tag(), "InfiniteOrbit");
    }

    #[test]
    fn tame_scales_to_hundreds_of_stages() {
        let b = catalog("block-swaps").unwrap();
        let t = tame_subgroup(&b, 600, &Budget::default()).unwrap();
        assert_eq!(t.group.orbit_of(1101).unwrap(), BTreeSet::from([1100, 1101]));
    }

    #[test]
    fn tame_rejects_isolated_groups() {
        let g = catalog("swap-01").unwrap();
        assert!(matches!(tame_subgroup(&g, 5, &Budget::default()), Err(PermError::PreconditionFailed(_))));
    }

    #[test]
    fn induced_alpha_examples() {
        let mut reg = Registry::new();
        let s3 = catalog("s3-composite").unwrap();
        let zero = reg.register(SetProgram::singleton(0));
        let ident = induced_alpha(&mut reg, &s3, &Word::identity(), zero).unwrap();
        let swapped = induced_alpha(&mut reg, &s3, &w("+0"), zero).unwrap();
        assert_eq!(induced_alpha(&mut reg, &s3, &w("+0"), zero).unwrap(), swapped);
        reg.advance_to(3);
        assert_eq!(reg.set_at(ident, 3), BTreeSet::from([0]));
        assert_eq!(reg.set_at(swapped, 3), BTreeSet::from([1]));
        assert!(induced_alpha(&mut reg, &s3, &w("+5"), zero).is_err());
    }

    #[test]
    fn shift_image_of_evens() {
        let mut reg = Registry::new();
        let z = catalog("z-shift").unwrap();
        let evens = reg.register(SetProgram::evens());
        let img = induced_alpha(&mut reg, &z, &w("+0 +0 +0"), evens).unwrap();
        reg.advance_to(100);
        let expect: BTreeSet<u64> = reg.set_at(evens, 100).iter().map(|x| zigzag(unzigzag(*x) + 3)).collect();
        assert_eq!(reg.set_at(img, 100), expect);
    }

    #[test]
    fn extract_permutation_examples() {
        let s3 = catalog("s3-composite").unwrap();
        let mut reg = Registry::new();
        let mut alpha = |r: &mut Registry, word: &Word, e: CeIndex| induced_alpha(r, &s3, word, e);
        assert_eq!(extract_permutation(&mut reg, &mut alpha, &Word::identity(), 9, 10).unwrap(), 9);
        assert_eq!(extract_permutation(&mut reg, &mut alpha, &w("+0"), 0, 10).unwrap(), 1);
        assert_eq!(extract_permutation(&mut reg, &mut alpha, &w("+0 +1"), 2, 10).unwrap(), 0);
        let mut never = |r: &mut Registry, _: &Word, _: CeIndex| Ok(r.register(SetProgram::empty()));
        assert_eq!(extract_permutation(&mut reg, &mut never, &w("+0"), 3, 5), Err(PermError::Timeout { stages: 5 }));
    }

    #[test]
    fn catalog_file_round_trip() {
        let json = r#"{"name":"custom","generators":[{"cycles":[[0,1,2]]},{"z_shift":2}],"identity_oracle":"finite-support"}"#;
        let spec: GroupSpec = serde_json::from_str(json).unwrap();
        let g = spec.build().unwrap();
        assert_eq!(g.apply_word(&w("+0"), 2).unwrap(), 0);
        let fam = r#"{"name":"bs","generators":{"family":"block-swaps"},"orbit_oracle":"block-pairs"}"#;
        let g: GroupSpec = serde_json::from_str(fam).unwrap();
        assert_eq!(g.build().unwrap().orbit_of(5), Some(BTreeSet::from([4, 5])));
    }

    proptest! {
        #[test]
        fn words_and_their_inverses_cancel(letters in proptest::collection::vec((0usize..2, any::<bool>()), 0..8), x in 0u64..500) {
            let g = catalog("s3-composite").unwrap();
            let word = Word(letters.into_iter().map(|(gen, inverse)| Letter { gen, inverse }).collect());
            let p = g.word_eval(&word).unwrap();
            prop_assert_eq!(p.apply_inverse(p.apply(x)), x);
            prop_assert_eq!(g.apply_word(&word.inverse(), g.apply_word(&word, x).unwrap()).unwrap(), x);
            prop_assert_eq!(g.apply_word(&word, x).unwrap(), p.apply(x));
        }

        #[test]
        fn avoid_postcondition_is_exact(pts in proptest::collection::btree_set(-6i64..6, 0..6)) {
            let z = catalog("z-shift").unwrap();
            let f: BTreeSet<u64> = pts.into_iter().map(zigzag).collect();
            let word = avoid_finite_set(&z, &f, &Budget::default()).unwrap();
            let p = z.word_eval(&word).unwrap();
            prop_assert!(f.iter().all(|x| !f.contains(&p.apply(*x))));
        }
    }
}
