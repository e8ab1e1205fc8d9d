//! Explicit reductions between the relations on c.e. indices, the `R_X`
//! and `A_n` enumerators, and the ceers they are built from.
//!
//! Every map here registers a program and returns its index; nothing is
//! evaluated eagerly. Tuple codes use [`crate::pairing::encode`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ce_core::{CeIndex, Registry, SetProgram, StageView};
use crate::orbit_rel::{decode_tuple, permutations, RelError};
use crate::pairing::{self, encode, pair, unpair};
use crate::perm_group::{induced_alpha, PermError, PermGroup, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReduceError {
    #[error(transparent)]
    Tuple(#[from] RelError),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error("tuple code does not fit in 64 bits")]
    CodeOverflow,
    #[error("n must be at least {min}, got {n}")]
    BadArity { n: usize, min: usize },
    #[error("column {column}: {from:?} cannot collapse to {to:?}")]
    NotCoarser { column: u64, from: ColumnState, to: ColumnState },
}

// ---------------------------------------------------------------------------
// E_set^n -> =^ce

/// Candidates examined per stage by the `esetn_to_eqce` programs, times
/// `stage + 1`.
pub const ESETN_CANDIDATES_PER_STAGE: u64 = 64;

/// Number of `(k, ρ)` candidates at level `k` for arity `n`: `2^(k n)`.
fn level_size(n: usize, k: u64) -> Option<u64> {
    1u64.checked_shl(u32::try_from(k.checked_mul(n as u64)?).ok()?)
}

/// Whether `ρ` (each `rho[l]` a bitmask over `[0, k)`) lies in level `k`
/// of `V`: some `π ∈ S_n` has `ρ_l ⊆ W_{π(l)}` for every `l`.
pub fn esetn_member(components: &[u64], rho: &[u64]) -> bool {
    let n = components.len();
    permutations(n).iter().any(|p| (0..n).all(|l| rho[l] & !components[p[l]] == 0))
}

/// Code of `(k, ρ_0, ..., ρ_{n-1})`.
pub fn esetn_code(k: u64, rho: &[u64]) -> Option<u64> {
    let mut parts = Vec::with_capacity(rho.len() + 1);
    parts.push(k);
    parts.extend_from_slice(rho);
    encode(&parts)
}

/// Level `k` of `V` as a bitset over `ρ` indices `Σ_l ρ_l << (k l)`, for
/// components given as bitmasks over `[0, k)`.
pub fn esetn_level_bitset(components: &[u64], k: u32) -> Vec<u64> {
    let n = components.len();
    let total = 1usize << (k as usize * n);
    let mut bits = vec![0u64; total.div_ceil(64)];
    let mask = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    for p in permutations(n) {
        let sups: Vec<u64> = (0..n).map(|l| components[p[l]] & mask).collect();
        // enumerate every product of submasks
        let mut rho: Vec<u64> = vec![0; n];
        loop {
            let idx = (0..n).fold(0usize, |acc, l| acc | ((rho[l] as usize) << (k as usize * l)));
            bits[idx / 64] |= 1 << (idx % 64);
            let mut l = 0;
            loop {
                if l == n {
                    break;
                }
                // next submask of sups[l]
                let next = (rho[l].wrapping_sub(sups[l])) & sups[l];
                rho[l] = next;
                if next != 0 {
                    break;
                }
                l += 1;
            }
            if l == n {
                break;
            }
        }
    }
    bits
}

fn window_mask(v: &StageView<'_>, e: CeIndex, k: u64) -> u64 {
    v.elements(e).into_iter().take_while(|x| *x < k).fold(0, |m, x| m | 1 << x)
}

/// `E_set^n ≤ =^ce`: registers the program for
/// `V = {(k, ρ) : ρ_l ∈ 2^k, ∃π ∈ S_n ∀l ρ_l ⊆ W_{i_π(l)}}`.
///
/// Candidates are dovetailed: at stage `s` the first
/// `64 (s + 1)` candidates in (level, ρ index) order are examined.
pub fn esetn_to_eqce(reg: &mut Registry, n: usize, tuple: u64) -> Result<CeIndex, ReduceError> {
    if n == 0 {
        return Err(ReduceError::BadArity { n, min: 1 });
    }
    let parts = decode_tuple(reg, n, tuple)?;
    let key = format!("esetn|{n}|{tuple}");
    Ok(reg.register_memo(key, move |_| {
        SetProgram::new(format!("esetn{n}({tuple})"), move |_, s, v| {
            let budget = ESETN_CANDIDATES_PER_STAGE.saturating_mul(s + 1);
            let mut out = Vec::new();
            let mut seen = 0u64;
            let mut k = 0u64;
            while seen < budget && k < 64 {
                let Some(size) = level_size(n, k) else { break };
                let comps: Vec<u64> = parts.iter().map(|e| window_mask(v, *e, k)).collect();
                let take = size.min(budget - seen);
                for idx in 0..take {
                    let rho: Vec<u64> = (0..n).map(|l| (idx >> (k as usize * l)) & ((1u64 << k) - 1)).collect();
                    if esetn_member(&comps, &rho) {
                        if let Some(code) = esetn_code(k, &rho) {
                            out.push(code);
                        }
                    }
                }
                seen += take;
                k += 1;
            }
            out
        })
    }))
}

// ---------------------------------------------------------------------------
// R^ce_G -> E_set^n, =^ce -> R_n, R_n -> R_{n+1}

/// Tuple code of `(α(g_0, e), ..., α(g_{n-1}, e))`.
pub fn rceg_to_esetn(reg: &mut Registry, g: &PermGroup, reps: &[Word], e: CeIndex) -> Result<u64, ReduceError> {
    let mut parts = Vec::with_capacity(reps.len());
    for w in reps {
        parts.push(induced_alpha(reg, g, w, e)?.0);
    }
    encode(&parts).ok_or(ReduceError::CodeOverflow)
}

/// `W_l = {x + 1 : x ∈ W_k}`.
pub fn shift_embed(reg: &mut Registry, k: CeIndex) -> CeIndex {
    reg.register_memo(format!("shift|{}", k.0), move |_| {
        SetProgram::image(format!("shift({k})"), k, |x| x.checked_add(1))
    })
}

/// Residue re-coding `n x + y -> (n + 1) x + y` for `y < n`.
pub fn rn_recode(n: u64, z: u64) -> Option<u64> {
    let (x, y) = (z / n, z % n);
    (n + 1).checked_mul(x)?.checked_add(y)
}

/// `R_n ≤ R_{n+1}`: `W_l = {(n+1)x + y : nx + y ∈ W_k, y < n}`.
pub fn rn_step(reg: &mut Registry, n: u64, k: CeIndex) -> Result<CeIndex, ReduceError> {
    if n == 0 {
        return Err(ReduceError::BadArity { n: 0, min: 1 });
    }
    Ok(reg.register_memo(format!("rn|{n}|{}", k.0), move |_| {
        SetProgram::image(format!("rn{n}({k})"), k, move |z| rn_recode(n, z))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MissingMode {
    AllNumbers,
    OddsOnly,
}

/// Stage-`s` approximation to `F(i)`: least absent number, or least `k` with
/// `2k + 1` absent.
pub fn f_missing(reg: &Registry, i: CeIndex, s: u64, mode: MissingMode) -> u64 {
    let set = reg.set_at(i, s.min(reg.stage()));
    f_missing_in(&set, mode)
}

fn f_missing_in(set: &BTreeSet<u64>, mode: MissingMode) -> u64 {
    match mode {
        MissingMode::AllNumbers => (0..).find(|x| !set.contains(x)).unwrap(),
        MissingMode::OddsOnly => (0..).find(|k| !set.contains(&(2 * k + 1))).unwrap(),
    }
}

// ---------------------------------------------------------------------------
// Ceers

/// Per-column state of a column ceer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ColumnState {
    /// `<a,b> ~ <a',b'>` iff `a = a'`.
    E,
    /// `<a,b> ~ <a',b'>` iff `a ≡ a' (mod n)`; `Id(1)` is a single class.
    Id(u64),
}

impl ColumnState {
    fn related(self, c: u64, d: u64) -> bool {
        let (a, _) = unpair(c);
        let (b, _) = unpair(d);
        match self {
            ColumnState::E => a == b,
            ColumnState::Id(n) => a % n == b % n,
        }
    }

    /// Whether every class of `self` is a union of classes of `finer`.
    fn coarsens(self, finer: ColumnState) -> bool {
        match (finer, self) {
            (_, ColumnState::Id(1)) => true,
            (ColumnState::E, ColumnState::Id(_)) => true,
            (ColumnState::E, ColumnState::E) => true,
            (ColumnState::Id(m), ColumnState::Id(n)) => m % n == 0,
            (ColumnState::Id(_), ColumnState::E) => false,
        }
    }

    pub fn classes(self) -> Option<u64> {
        match self {
            ColumnState::E => None,
            ColumnState::Id(n) => Some(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollapseEvent {
    pub stage: u64,
    pub column: u64,
    pub from: ColumnState,
    pub to: ColumnState,
}

/// `⊕_k E` over columns `ω^[k] = {<c,k>}`, with logged per-column
/// collapses. Classes only merge.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Ceer {
    log: Vec<CollapseEvent>,
    current: BTreeMap<u64, ColumnState>,
}

impl Ceer {
    pub fn new() -> Self {
        Ceer::default()
    }

    pub fn element(c: u64, column: u64) -> Option<u64> {
        pair(c, column)
    }

    pub fn column_of(z: u64) -> u64 {
        unpair(z).1
    }

    pub fn state(&self, column: u64) -> ColumnState {
        self.current.get(&column).copied().unwrap_or(ColumnState::E)
    }

    pub fn state_at(&self, column: u64, s: u64) -> ColumnState {
        self.log
            .iter()
            .rev()
            .find(|ev| ev.column == column && ev.stage <= s)
            .map_or(ColumnState::E, |ev| ev.to)
    }

    pub fn collapse(&mut self, column: u64, to: ColumnState, stage: u64) -> Result<(), ReduceError> {
        let from = self.state(column);
        if !to.coarsens(from) {
            return Err(ReduceError::NotCoarser { column, from, to });
        }
        if from != to {
            self.log.push(CollapseEvent { stage, column, from, to });
            self.current.insert(column, to);
        }
        Ok(())
    }

    pub fn related(&self, x: u64, y: u64, s: u64) -> bool {
        let (c, k) = unpair(x);
        let (d, l) = unpair(y);
        k == l && self.state_at(k, s).related(c, d)
    }

    pub fn log(&self) -> &[CollapseEvent] {
        &self.log
    }
}

/// A ceer usable by the enumerators.
#[derive(Debug, Clone)]
pub enum CeerRef {
    /// Equality mod `n` on all of ω.
    IdMod(u64),
    Columns(Arc<Ceer>),
}

impl CeerRef {
    pub fn related(&self, x: u64, y: u64, s: u64) -> bool {
        match self {
            CeerRef::IdMod(n) => x % n == y % n,
            CeerRef::Columns(c) => c.related(x, y, s),
        }
    }
}

// ---------------------------------------------------------------------------
// Enumerators in indices

fn least_target(x_ceer: &CeerRef, f: u64, floor: u64, s: u64, own: &StageView<'_>, me: CeIndex, code: impl Fn(u64) -> u64) -> u64 {
    (floor.max(f)..)
        .find(|z| x_ceer.related(*z, f, s) && !own.contains(me, code(*z)))
        .expect("X-classes are infinite")
}

/// Member `m` of the `R_X` family of `i`.
///
/// Member 0 is `W_i`. Member `1 + <y, r>` copies `W_i` until 0 enters it;
/// afterwards it enumerates `(W_y ∪ [0, x)) ∖ {x}` for the least
/// `x ≥ max(F_s(i), r)` that is X-related to `F_s(i)` and not yet
/// enumerated, so `x` migrates upward whenever `F_s(i)` moves.
pub fn rx_enumerator(reg: &mut Registry, x_ceer: CeerRef, i: CeIndex, m: u64) -> CeIndex {
    let label = format!("rx({i},{m})");
    reg.register(SetProgram::new(label, move |me, s, v| {
        let wi = v.set(i);
        if m == 0 || !wi.contains(&0) {
            return wi.into_iter().collect();
        }
        let (y, r) = unpair(m - 1);
        let f = f_missing_in(&wi, MissingMode::AllNumbers);
        let x = least_target(&x_ceer, f, r, s, v, me, |z| z);
        let mut out: Vec<u64> = (0..x).collect();
        out.extend(v.elements(CeIndex(y)).into_iter().filter(|z| *z != x));
        out
    }))
}

/// `A_n` index kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "tag", content = "k")]
pub enum IndexKind {
    Oddish,
    ProperCoding(u64),
    FullCoding(u64),
    Big,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndexReport {
    pub kind: IndexKind,
    pub stage: u64,
    #[serde(rename = "final")]
    pub is_final: bool,
}

/// Classifies `W_{i,s}`. One even `2k` reads as `FullCoding(k)` while every
/// odd number below `s` is present, else `ProperCoding(k)`; a settled set is
/// finite, hence never full.
pub fn an_classify(reg: &Registry, i: CeIndex, s: u64) -> IndexReport {
    if !reg.is_valid(i) {
        return IndexReport { kind: IndexKind::Unknown, stage: s, is_final: false };
    }
    let s = s.min(reg.stage());
    let set = reg.set_at(i, s);
    let settled = reg.is_settled(i, s);
    let evens: Vec<u64> = set.iter().copied().filter(|x| x % 2 == 0).take(2).collect();
    let kind = match evens.as_slice() {
        [] => IndexKind::Oddish,
        [e] => {
            let k = e / 2;
            let full = !settled && (0..s).filter(|x| x % 2 == 1).all(|x| set.contains(&x));
            if full {
                IndexKind::FullCoding(k)
            } else {
                IndexKind::ProperCoding(k)
            }
        }
        _ => IndexKind::Big,
    };
    IndexReport { kind, stage: s, is_final: settled || kind == IndexKind::Big }
}

/// Member `m` of the `A_n` family of `i`, by phase of `W_{i,s}`:
/// no evens: a copy of `W_i`; one even `2k`: member `<y, r>` enumerates
/// `{2k} ∪ {2j+1 : j < x} ∪ (odd part of W_y ∖ {2x+1})` for the least
/// `x ≥ max(F_s(i), r)` with `<x,k> X_n <F_s(i),k>` and `2x+1` not yet
/// enumerated; two or more evens: `W_y`, padded with the first two evens of
/// `W_i` while `W_y` has fewer than two.
pub fn an_enumerator(reg: &mut Registry, xn: CeerRef, i: CeIndex, m: u64) -> CeIndex {
    let label = format!("an({i},{m})");
    reg.register(SetProgram::new(label, move |me, s, v| {
        let wi = v.set(i);
        let evens: Vec<u64> = wi.iter().copied().filter(|x| x % 2 == 0).take(2).collect();
        let (y, r) = unpair(m);
        let wy = v.elements(CeIndex(y));
        match evens.as_slice() {
            [] => wi.into_iter().collect(),
            [e] => {
                let k = e / 2;
                let f = f_missing_in(&wi, MissingMode::OddsOnly);
                let fk = pair(f, k).expect("small codes");
                let x = (f.max(r)..)
                    .find(|z| {
                        pair(*z, k).is_some_and(|zk| xn.related(zk, fk, s)) && !v.contains(me, 2 * z + 1)
                    })
                    .expect("X_n-classes are infinite");
                let mut out = vec![*e];
                out.extend((0..x).map(|j| 2 * j + 1));
                out.extend(wy.into_iter().filter(|z| z % 2 == 1 && *z != 2 * x + 1));
                out
            }
            _ => {
                let mut out = wy.clone();
                if wy.iter().filter(|z| *z % 2 == 0).count() < 2 {
                    out.extend(evens);
                }
                out
            }
        }
    }))
}

/// Decodes the `n` components of a tuple code without registry checks.
pub fn tuple_parts(n: usize, code: u64) -> Vec<u64> {
    pairing::decode(n, code)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit_rel::encode_tuple;
    use crate::perm_group::catalog;
    use proptest::prelude::*;

    fn codes_below_level(reg: &Registry, e: CeIndex, n: usize, s: u64, max_k: u64) -> BTreeSet<u64> {
        reg.set_at(e, s).into_iter().filter(|c| pairing::decode(n + 1, *c)[0] <= max_k).collect()
    }

    #[test]
    fn esetn_n1_empty_has_zero_strings() {
        let mut reg = Registry::new();
        let empty = reg.register(SetProgram::empty());
        let v = esetn_to_eqce(&mut reg, 1, empty.0).unwrap();
        reg.advance_to(40);
        let got = codes_below_level(&reg, v, 1, 40, 10);
        let expect: BTreeSet<u64> = (0..=10).map(|k| pair(k, 0).unwrap()).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn esetn_swapped_tuples_agree_every_stage() {
        let mut reg = Registry::new();
        let a = reg.register(SetProgram::singleton(0));
        let b = reg.register(SetProgram::singleton(1));
        let ab = esetn_to_eqce(&mut reg, 2, encode_tuple(&[a, b]).unwrap()).unwrap();
        let ba = esetn_to_eqce(&mut reg, 2, encode_tuple(&[b, a]).unwrap()).unwrap();
        for s in 0..=40 {
            reg.advance_to(s);
            assert_eq!(reg.set_at(ab, s), reg.set_at(ba, s), "stage {s}");
        }
        // brute force over k <= 4
        let got = codes_below_level(&reg, ab, 2, 40, 4);
        let mut expect = BTreeSet::new();
        for k in 0..=4u64 {
            for r0 in 0..1u64 << k {
                for r1 in 0..1u64 << k {
                    let sub = |r: u64, w: u64| r & !w == 0;
                    if (sub(r0, 1) && sub(r1, 2)) || (sub(r0, 2) && sub(r1, 1)) {
                        expect.insert(esetn_code(k, &[r0, r1]).unwrap());
                    }
                }
            }
        }
        assert_eq!(got, expect);
    }

    #[test]
    fn esetn_distinguishes_different_families() {
        let mut reg = Registry::new();
        let a = reg.register(SetProgram::singleton(0));
        let b = reg.register(SetProgram::singleton(1));
        let aa = esetn_to_eqce(&mut reg, 2, encode_tuple(&[a, a]).unwrap()).unwrap();
        let ab = esetn_to_eqce(&mut reg, 2, encode_tuple(&[a, b]).unwrap()).unwrap();
        reg.advance_to(20);
        let x = codes_below_level(&reg, aa, 2, 20, 2);
        let y = codes_below_level(&reg, ab, 2, 20, 2);
        assert_ne!(x, y);
    }

    #[test]
    fn level_bitset_matches_membership() {
        let comps = [0b101, 0b011, 0b000];
        let bits = esetn_level_bitset(&comps, 3);
        for idx in 0..1usize << 9 {
            let rho: Vec<u64> = (0..3).map(|l| ((idx >> (3 * l)) & 7) as u64).collect();
            let bit = bits[idx / 64] >> (idx % 64) & 1 == 1;
            assert_eq!(bit, esetn_member(&comps, &rho), "{rho:?}");
        }
    }

    #[test]
    fn rceg_to_esetn_examples() {
        let mut reg = Registry::new();
        let zero = reg.register(SetProgram::singleton(0));
        let both = reg.register(SetProgram::finite([0, 1]));
        let triv = catalog("trivial").unwrap();
        assert_eq!(rceg_to_esetn(&mut reg, &triv, &[Word::identity()], zero).unwrap(), reg.len() as u64 - 1);
        let swap = catalog("swap-01").unwrap();
        let reps = [Word::identity(), "+0".parse().unwrap()];
        let code = rceg_to_esetn(&mut reg, &swap, &reps, zero).unwrap();
        let code2 = rceg_to_esetn(&mut reg, &swap, &reps, both).unwrap();
        reg.advance_to(3);
        let parts = decode_tuple(&reg, 2, code).unwrap();
        assert_eq!(reg.set_at(parts[0], 3), BTreeSet::from([0]));
        assert_eq!(reg.set_at(parts[1], 3), BTreeSet::from([1]));
        let parts = decode_tuple(&reg, 2, code2).unwrap();
        assert_eq!(reg.set_at(parts[0], 3), reg.set_at(parts[1], 3));
    }

    #[test]
    fn shift_embed_examples() {
        let mut reg = Registry::new();
        let empty = reg.register(SetProgram::empty());
        let zero = reg.register(SetProgram::singleton(0));
        let evens = reg.register(SetProgram::evens());
        let se = shift_embed(&mut reg, empty);
        let sz = shift_embed(&mut reg, zero);
        let sv = shift_embed(&mut reg, evens);
        reg.advance_to(100);
        assert!(reg.set_at(se, 100).is_empty());
        assert_eq!(reg.set_at(sz, 100), BTreeSet::from([1]));
        let odds: BTreeSet<u64> = (0..100).map(|k| 2 * k + 1).collect();
        assert_eq!(reg.set_at(sv, 100), odds);
    }

    #[test]
    fn rn_step_examples() {
        let mut reg = Registry::new();
        let empty = reg.register(SetProgram::empty());
        let zero = reg.register(SetProgram::singleton(0));
        let five = reg.register(SetProgram::singleton(5));
        let a = rn_step(&mut reg, 1, empty).unwrap();
        let b = rn_step(&mut reg, 1, zero).unwrap();
        let c = rn_step(&mut reg, 2, five).unwrap();
        reg.advance_to(3);
        assert!(reg.set_at(a, 3).is_empty());
        assert_eq!(reg.set_at(b, 3), BTreeSet::from([0]));
        assert_eq!(reg.set_at(c, 3), BTreeSet::from([7]));
        assert!(rn_step(&mut reg, 0, zero).is_err());
    }

    #[test]
    fn f_missing_examples() {
        let mut reg = Registry::new();
        let empty = reg.register(SetProgram::empty());
        let low = reg.register(SetProgram::finite([0, 1, 2]));
        let odd = reg.register(SetProgram::finite([1, 3]));
        reg.advance_to(2);
        assert_eq!(f_missing(&reg, empty, 2, MissingMode::AllNumbers), 0);
        assert_eq!(f_missing(&reg, low, 2, MissingMode::AllNumbers), 3);
        assert_eq!(f_missing(&reg, odd, 2, MissingMode::OddsOnly), 2);
    }

    #[test]
    fn ceer_collapses_only_merge() {
        let mut x = Ceer::new();
        let z = |a: u64, b: u64, k: u64| Ceer::element(pair(a, b).unwrap(), k).unwrap();
        assert!(x.related(z(3, 0, 1), z(3, 9, 1), 0));
        assert!(!x.related(z(3, 0, 1), z(5, 0, 1), 0));
        assert!(!x.related(z(3, 0, 1), z(3, 0, 2), 0));
        x.collapse(1, ColumnState::Id(2), 4).unwrap();
        assert!(x.related(z(3, 0, 1), z(5, 0, 1), 4));
        assert!(!x.related(z(3, 0, 1), z(5, 0, 1), 3));
        assert!(x.collapse(1, ColumnState::Id(3), 5).is_err());
        assert!(x.collapse(1, ColumnState::E, 5).is_err());
        x.collapse(1, ColumnState::Id(1), 6).unwrap();
        assert!(x.related(z(3, 0, 1), z(4, 7, 1), 6));
        assert_eq!(x.log().len(), 2);
    }

    #[test]
    fn rx_enumerator_examples() {
        let mut reg = Registry::new();
        let empty = reg.register(SetProgram::empty());
        let zero = reg.register(SetProgram::singleton(0));
        let y = reg.register(SetProgram::finite([4, 7]));
        let omega = reg.register(SetProgram::stage_numbers());
        let fam_empty: Vec<CeIndex> = (0..4).map(|m| rx_enumerator(&mut reg, CeerRef::IdMod(2), empty, m)).collect();
        let target = rx_enumerator(&mut reg, CeerRef::IdMod(2), zero, 1 + pair(y.0, 1).unwrap());
        let grow: Vec<CeIndex> = (0..4).map(|m| rx_enumerator(&mut reg, CeerRef::IdMod(2), omega, m)).collect();
        reg.advance_to(200);
        assert!(fam_empty.iter().all(|e| reg.set_at(*e, 200).is_empty()));
        assert_eq!(reg.set_at(target, 200), BTreeSet::from([0, 4, 7]));
        for e in grow {
            let got = reg.set_at(e, 200);
            assert!((0..150).all(|x| got.contains(&x)), "{e}");
        }
    }

    #[test]
    fn an_classify_examples() {
        let mut reg = Registry::new();
        let oddish = reg.register(SetProgram::finite([1, 3, 5]));
        let four = reg.register(SetProgram::finite([4]));
        let big = reg.register(SetProgram::finite([0, 2]));
        reg.advance_to(3);
        assert_eq!(an_classify(&reg, oddish, 3).kind, IndexKind::Oddish);
        let r = an_classify(&reg, four, 3);
        assert_eq!(r.kind, IndexKind::ProperCoding(2));
        assert!(r.is_final);
        let r = an_classify(&reg, big, 3);
        assert_eq!(r.kind, IndexKind::Big);
        assert!(r.is_final);
    }

    #[test]
    fn an_enumerator_phases() {
        let mut reg = Registry::new();
        let odd = reg.register(SetProgram::finite([1, 5]));
        let four = reg.register(SetProgram::finite([4]));
        let big = reg.register(SetProgram::finite([0, 2]));
        let other_big = reg.register(SetProgram::finite([6, 8, 3]));
        let xn = CeerRef::Columns(Arc::new(Ceer::new()));
        let a = an_enumerator(&mut reg, xn.clone(), odd, 5);
        let b = an_enumerator(&mut reg, xn.clone(), four, 0);
        let c = an_enumerator(&mut reg, xn, big, pair(other_big.0, 0).unwrap());
        reg.advance_to(50);
        assert_eq!(reg.set_at(a, 50), BTreeSet::from([1, 5]));
        // member <0,0>: x = F = 0, odd part of W_0 minus {1}
        assert_eq!(reg.set_at(b, 50), BTreeSet::from([4, 5]));
        assert_eq!(reg.set_at(c, 50), BTreeSet::from([3, 6, 8]));
    }

    proptest! {
        #[test]
        fn rn_recode_is_injective_and_residue_preserving(n in 1u64..6, a in 0u64..10_000, b in 0u64..10_000) {
            prop_assume!(a != b);
            prop_assert_ne!(rn_recode(n, a), rn_recode(n, b));
            let r = rn_recode(n, a).unwrap();
            prop_assert_eq!(r % (n + 1), a % n);
        }
    }
}
