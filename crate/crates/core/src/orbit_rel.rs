//! Finite-stage approximations of `=^ce`, `E_0^ce`, `E_set^n` and `R^ce_G`.
//!
//! Every query reads the registry at a stage `s <= reg.stage()` and compares
//! approximations on the window `[0, window)`. Verdicts are stage-relative;
//! a verdict is `final` only when both sides are settled.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::ce_core::{CeIndex, Registry};
use crate::pairing;
use crate::perm_group::{Budget, PermGroup, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelError {
    #[error("code {code} does not decode to a {n}-tuple of registered indices")]
    MalformedTuple { n: usize, code: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ConsistentSoFar,
    RefutedSoFar,
    EquivalentOnSettled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Witness {
    Element(u64),
    Elements(Vec<u64>),
    Word(Word),
    /// `perm[k] = l` matches component `k` of the left tuple with component
    /// `l` of the right one.
    Matching(Vec<usize>),
}

/// A stage-relative verdict with its evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TriState {
    pub relation: &'static str,
    pub i: u64,
    pub j: u64,
    pub verdict: Verdict,
    pub window: u64,
    pub stage: u64,
    pub witness: Option<Witness>,
    #[serde(rename = "final")]
    pub is_final: bool,
}

impl TriState {
    pub fn holds_so_far(&self) -> bool {
        self.verdict != Verdict::RefutedSoFar
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("verdicts serialize")
    }
}

fn windowed(reg: &Registry, e: CeIndex, window: u64, s: u64) -> BTreeSet<u64> {
    reg.set_at(e, s.min(reg.stage())).range(..window).copied().collect()
}

fn settled(reg: &Registry, e: CeIndex, s: u64) -> bool {
    reg.is_settled(e, s.min(reg.stage()))
}

/// `=^ce` on a window, plus the length of agreement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EqceReport {
    pub state: TriState,
    /// Largest `t <= window` with `W_{i,s} ∩ [0,t) = W_{j,s} ∩ [0,t)`.
    pub agreement: u64,
}

pub fn eqce_approx(reg: &Registry, i: CeIndex, j: CeIndex, window: u64, s: u64) -> EqceReport {
    let a = windowed(reg, i, window, s);
    let b = windowed(reg, j, window, s);
    let first_diff = a.symmetric_difference(&b).next().copied();
    let both = settled(reg, i, s) && settled(reg, j, s);
    let verdict = match (first_diff, both) {
        (Some(_), _) => Verdict::RefutedSoFar,
        (None, true) => Verdict::EquivalentOnSettled,
        (None, false) => Verdict::ConsistentSoFar,
    };
    EqceReport {
        state: TriState {
            relation: "eqce",
            i: i.0,
            j: j.0,
            verdict,
            window,
            stage: s,
            witness: first_diff.map(Witness::Element),
            is_final: both,
        },
        agreement: first_diff.unwrap_or(window),
    }
}

/// `E_0^ce` on a window: the symmetric difference and whether it is growing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct E0Report {
    pub state: TriState,
    pub difference: Vec<u64>,
    pub threshold: usize,
    /// The difference at `s` is larger than at `s / 2`.
    pub growing: bool,
}

pub const DEFAULT_E0_THRESHOLD: usize = 16;

pub fn e0ce_approx(reg: &Registry, i: CeIndex, j: CeIndex, window: u64, s: u64) -> E0Report {
    e0ce_approx_with(reg, i, j, window, s, DEFAULT_E0_THRESHOLD)
}

pub fn e0ce_approx_with(reg: &Registry, i: CeIndex, j: CeIndex, window: u64, s: u64, threshold: usize) -> E0Report {
    let diff_at = |t: u64| -> Vec<u64> {
        let a = windowed(reg, i, window, t);
        let b = windowed(reg, j, window, t);
        a.symmetric_difference(&b).copied().collect()
    };
    let difference = diff_at(s);
    let growing = difference.len() > diff_at(s / 2).len();
    // settled sets are finite, hence almost equal
    let both = settled(reg, i, s) && settled(reg, j, s);
    let verdict = if both {
        Verdict::EquivalentOnSettled
    } else if difference.len() < threshold {
        Verdict::ConsistentSoFar
    } else {
        Verdict::RefutedSoFar
    };
    E0Report {
        state: TriState {
            relation: "e0ce",
            i: i.0,
            j: j.0,
            verdict,
            window,
            stage: s,
            witness: Some(Witness::Elements(difference.clone())),
            is_final: both,
        },
        difference,
        threshold,
        growing,
    }
}

/// Decodes an `n`-tuple code into registered indices.
pub fn decode_tuple(reg: &Registry, n: usize, code: u64) -> Result<Vec<CeIndex>, RelError> {
    if n == 0 {
        return Err(RelError::MalformedTuple { n, code });
    }
    let parts: Vec<CeIndex> = pairing::decode(n, code).into_iter().map(CeIndex).collect();
    if parts.iter().all(|e| reg.is_valid(*e)) {
        Ok(parts)
    } else {
        Err(RelError::MalformedTuple { n, code })
    }
}

/// Tuple code of a list of indices.
pub fn encode_tuple(parts: &[CeIndex]) -> Option<u64> {
    let raw: Vec<u64> = parts.iter().map(|e| e.0).collect();
    pairing::encode(&raw)
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                go(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// `E_set^n`: some `π ∈ S_n` matches component `k` of `i` with component
/// `π(k)` of `j` on the window.
pub fn esetn_approx(reg: &Registry, n: usize, i: u64, j: u64, window: u64, s: u64) -> Result<TriState, RelError> {
    let left = decode_tuple(reg, n, i)?;
    let right = decode_tuple(reg, n, j)?;
    let a: Vec<BTreeSet<u64>> = left.iter().map(|e| windowed(reg, *e, window, s)).collect();
    let b: Vec<BTreeSet<u64>> = right.iter().map(|e| windowed(reg, *e, window, s)).collect();
    let matching = permutations(n).into_iter().find(|p| (0..n).all(|k| a[k] == b[p[k]]));
    let both = left.iter().chain(&right).all(|e| settled(reg, *e, s));
    let verdict = match (&matching, both) {
        (None, _) => Verdict::RefutedSoFar,
        (Some(_), true) => Verdict::EquivalentOnSettled,
        (Some(_), false) => Verdict::ConsistentSoFar,
    };
    Ok(TriState {
        relation: "esetn",
        i,
        j,
        verdict,
        window,
        stage: s,
        witness: matching.map(Witness::Matching),
        is_final: both,
    })
}

/// First word `g` (BFS order) with `g·W_{j,s} ∩ [0,window) = W_{i,s} ∩ [0,window)`.
pub fn rceg_witness(
    g: &PermGroup,
    reg: &Registry,
    i: CeIndex,
    j: CeIndex,
    window: u64,
    s: u64,
    budget: &Budget,
) -> Option<Word> {
    let target = windowed(reg, i, window, s);
    let probe: Vec<u64> = reg.set_at(j, s.min(reg.stage())).into_iter().collect();
    g.search(&probe, budget, |_, img| {
        let hit: BTreeSet<u64> = img.iter().copied().filter(|y| *y < window).collect();
        hit == target
    })
    .ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce_core::SetProgram;
    use crate::perm_group::{catalog, zigzag};

    #[test]
    fn eqce_examples() {
        let mut reg = Registry::new();
        let zero = reg.register(SetProgram::singleton(0));
        let empty = reg.register(SetProgram::empty());
        let ev1 = reg.register(SetProgram::evens());
        let ev2 = reg.register(SetProgram::new("evens-by-pairs", |_, s, _| vec![4 * s, 4 * s + 2]));
        reg.advance_to(200);
        let same = eqce_approx(&reg, zero, zero, 30, 5);
        assert_eq!(same.state.verdict, Verdict::EquivalentOnSettled);
        assert_eq!(same.agreement, 30);
        let refuted = eqce_approx(&reg, zero, empty, 30, 5);
        assert_eq!(refuted.state.verdict, Verdict::RefutedSoFar);
        assert_eq!(refuted.state.witness, Some(Witness::Element(0)));
        assert!(refuted.state.is_final);
        assert_eq!(refuted.agreement, 0);
        let evens = eqce_approx(&reg, ev1, ev2, 50, 200);
        assert_eq!(evens.state.verdict, Verdict::ConsistentSoFar);
        assert!(!evens.state.is_final);
    }

    #[test]
    fn e0ce_examples() {
        let mut reg = Registry::new();
        let ev = reg.register(SetProgram::evens());
        let ev1 = reg.register(SetProgram::new("evens+1", |_, s, _| if s == 0 { vec![0, 1] } else { vec![2 * s] }));
        let od = reg.register(SetProgram::odds());
        reg.advance_to(120);
        assert!(e0ce_approx(&reg, ev, ev, 100, 120).difference.is_empty());
        let r = e0ce_approx(&reg, ev, ev1, 100, 120);
        assert_eq!(r.difference, vec![1]);
        assert_eq!(r.state.verdict, Verdict::ConsistentSoFar);
        let r = e0ce_approx(&reg, ev, od, 100, 60);
        assert_eq!(r.difference.len(), 100);
        assert!(r.growing);
        assert_eq!(r.state.verdict, Verdict::RefutedSoFar);
    }

    #[test]
    fn esetn_examples() {
        let mut reg = Registry::new();
        let a = reg.register(SetProgram::singleton(0));
        let b = reg.register(SetProgram::singleton(1));
        reg.advance_to(3);
        let ab = encode_tuple(&[a, b]).unwrap();
        let ba = encode_tuple(&[b, a]).unwrap();
        let v = esetn_approx(&reg, 2, ab, ba, 10, 3).unwrap();
        assert!(v.holds_so_far());
        assert_eq!(v.witness, Some(Witness::Matching(vec![1, 0])));
        let v = esetn_approx(&reg, 1, a.0, b.0, 10, 3).unwrap();
        assert_eq!(v.verdict, Verdict::RefutedSoFar);
        assert!(v.is_final);
        let v = esetn_approx(&reg, 2, ab, ab, 10, 3).unwrap();
        assert_eq!(v.witness, Some(Witness::Matching(vec![0, 1])));
        assert!(esetn_approx(&reg, 2, 1 << 40, ab, 10, 3).is_err());
    }

    #[test]
    fn esetn_is_symmetric_and_matches_brute_force() {
        let mut reg = Registry::new();
        let subsets: Vec<Vec<u64>> = (0u64..8).map(|m| (0..3).filter(|b| m >> b & 1 == 1).collect()).collect();
        let ids: Vec<CeIndex> = subsets.iter().map(|v| reg.register(SetProgram::finite(v.clone()))).collect();
        reg.advance_to(2);
        for x in 0..8 {
            for y in 0..8 {
                for z in 0..8 {
                    for w in 0..8 {
                        let l = encode_tuple(&[ids[x], ids[y]]).unwrap();
                        let r = encode_tuple(&[ids[z], ids[w]]).unwrap();
                        let v = esetn_approx(&reg, 2, l, r, 8, 2).unwrap();
                        let mut p = [x, y];
                        let mut q = [z, w];
                        p.sort();
                        q.sort();
                        assert_eq!(v.holds_so_far(), p == q);
                        assert_eq!(esetn_approx(&reg, 2, r, l, 8, 2).unwrap().verdict, v.verdict);
                    }
                }
            }
        }
    }

    #[test]
    fn rceg_examples() {
        let mut reg = Registry::new();
        let z0 = reg.register(SetProgram::singleton(zigzag(0)));
        let z3 = reg.register(SetProgram::singleton(zigzag(3)));
        let b0 = reg.register(SetProgram::singleton(0));
        let b2 = reg.register(SetProgram::singleton(2));
        reg.advance_to(2);
        let budget = Budget::default();
        let z = catalog("z-shift").unwrap();
        assert_eq!(rceg_witness(&z, &reg, z0, z0, 50, 2, &budget), Some(Word::identity()));
        let w = rceg_witness(&z, &reg, z3, z0, 50, 2, &budget).unwrap();
        assert_eq!(w.to_string(), "+0 +0 +0");
        let back = rceg_witness(&z, &reg, z0, z3, 50, 2, &budget).unwrap();
        assert_eq!(back, w.inverse());
        let bs = catalog("block-swaps").unwrap();
        assert_eq!(rceg_witness(&bs, &reg, b0, b2, 50, 2, &budget.with_word_len(4)), None);
    }

    #[test]
    fn verdict_json_shape() {
        let mut reg = Registry::new();
        let a = reg.register(SetProgram::singleton(0));
        reg.advance_to(1);
        let json = eqce_approx(&reg, a, a, 4, 1).state.to_json();
        assert_eq!(
            json,
            r#"{"relation":"eqce","i":0,"j":0,"verdict":"EquivalentOnSettled","window":4,"stage":1,"witness":null,"final":true}"#
        );
    }
}
