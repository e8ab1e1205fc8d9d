//! Restrained-pair chains and quadruple sets.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::perm_group::{solve_map, Budget, PermGroup, Word};
use crate::priority_engine::{is_prefix, left_of, node_key, NodePath, Outcome};

/// An active node able to take `∞`: it copies `V_from` to `V_to` by `word`
/// and `V_to` back by the inverse.
#[derive(Debug, Clone)]
pub struct ChainNode {
    pub path: NodePath,
    pub from: usize,
    pub to: usize,
    pub word: Word,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RestrainedPair {
    pub m: u64,
    pub set: usize,
    /// `β_0, ..., β_n` in acting order; empty for a direct restraint.
    pub chain: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RestrainedPairSet {
    pub owner: String,
    pub pairs: Vec<RestrainedPair>,
    /// Chain extensions examined.
    pub explored: usize,
    /// False when the search stopped at [`PAIR_SEARCH_CAP`].
    pub complete: bool,
}

impl RestrainedPairSet {
    pub fn contains(&self, m: u64, set: usize) -> bool {
        self.pairs.iter().any(|p| p.m == m && p.set == set)
    }
}

/// Bound on chain extensions per call.
pub const PAIR_SEARCH_CAP: usize = 200_000;

fn ext(p: &[Outcome], o: Outcome) -> Vec<Outcome> {
    let mut v = p.to_vec();
    v.push(o);
    v
}

/// β may appear in an `α`-chain.
fn eligible(alpha: &[Outcome], beta: &[Outcome]) -> bool {
    alpha != beta
        && (is_prefix(&ext(beta, Outcome::Inf), alpha)
            || left_of(alpha, beta)
            || is_prefix(&ext(alpha, Outcome::D), beta)
            || is_prefix(&ext(alpha, Outcome::W), beta))
}

/// `early` taking `∞` leaves `late` alone.
fn spares(early: &[Outcome], late: &[Outcome]) -> bool {
    is_prefix(&ext(early, Outcome::Inf), late) || left_of(late, early) || (late.len() < early.len() && is_prefix(late, early))
}

/// All `owner`-restrained pairs: the direct restraints `base` plus every
/// `(m, k)` such that `m ∈ V_k` followed by the `∞` actions of a chain of
/// distinct eligible nodes, in order, would put a restrained number into
/// its restrained set. Later chain members are never injured by earlier
/// ones.
pub fn restrained_pairs(
    group: &PermGroup,
    nodes: &[ChainNode],
    owner: &[Outcome],
    base: &[(u64, usize)],
) -> RestrainedPairSet {
    let usable: Vec<(&ChainNode, Word)> =
        nodes.iter().filter(|b| eligible(owner, &b.path)).map(|b| (b, b.word.inverse())).collect();
    let mut found: BTreeMap<(u64, usize), Vec<usize>> = BTreeMap::new();
    let mut explored = 0usize;
    let mut complete = true;
    for (m, k) in base {
        found.entry((*m, *k)).or_default();
    }
    // chains are built backwards: chain[0] acts last
    let mut stack: Vec<(u64, usize, Vec<usize>)> = base.iter().map(|(m, k)| (*m, *k, Vec::new())).collect();
    while let Some((t, c, chain)) = stack.pop() {
        for (bi, (b, inv)) in usable.iter().enumerate() {
            if chain.contains(&bi) || !chain.iter().all(|later| spares(&b.path, &usable[*later].0.path)) {
                continue;
            }
            let prev = if c == b.to {
                group.apply_word(inv, t).ok().map(|x| (x, b.from))
            } else if c == b.from {
                group.apply_word(&b.word, t).ok().map(|x| (x, b.to))
            } else {
                None
            };
            let Some((x, k)) = prev else { continue };
            explored += 1;
            if explored > PAIR_SEARCH_CAP {
                complete = false;
                break;
            }
            let mut next = chain.clone();
            next.push(bi);
            found.entry((x, k)).or_insert_with(|| next.iter().rev().copied().collect());
            stack.push((x, k, next));
        }
        if !complete {
            break;
        }
    }
    let pairs = found
        .into_iter()
        .map(|((m, set), chain)| RestrainedPair {
            m,
            set,
            chain: chain.iter().map(|i| node_key(&usable[*i].0.path)).collect(),
        })
        .collect();
    RestrainedPairSet { owner: node_key(owner), pairs, explored, complete }
}

/// `(a, b, k, l)`: maps sending `V_k` to `V_l` must send `a` to `b`.
pub type Quad = (u64, u64, usize, usize);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct QuadrupleSet {
    pub quads: BTreeSet<Quad>,
}

impl QuadrupleSet {
    pub fn maps(&self, k: usize, l: usize) -> Vec<(u64, u64)> {
        self.quads.iter().filter(|q| q.2 == k && q.3 == l).map(|q| (q.0, q.1)).collect()
    }

    pub fn extend(&mut self, other: &QuadrupleSet) {
        self.quads.extend(other.quads.iter().copied());
    }

    /// Whether `word` is consistent with every `(·, ·, k, l)` quadruple.
    pub fn consistent(&self, group: &PermGroup, word: &Word, k: usize, l: usize) -> bool {
        self.maps(k, l).iter().all(|(a, b)| group.apply_word(word, *a).ok() == Some(*b))
    }

    pub fn pairs(&self) -> BTreeSet<(usize, usize)> {
        self.quads.iter().map(|q| (q.2, q.3)).collect()
    }
}

/// A word consistent with all `(a, b, k, l)` quadruples of `s`.
pub fn consistent_map_search(group: &PermGroup, s: &QuadrupleSet, k: usize, l: usize, budget: &Budget) -> Option<Word> {
    solve_map(group, &s.maps(k, l), &[], budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm_group::catalog;
    use Outcome::*;

    fn shift() -> PermGroup {
        catalog("z-shift").unwrap()
    }

    #[test]
    fn direct_restraints_only_without_chains() {
        let r = restrained_pairs(&shift(), &[], &[W], &[(5, 1)]);
        assert_eq!(r.pairs, vec![RestrainedPair { m: 5, set: 1, chain: vec![] }]);
        assert!(r.complete);
    }

    #[test]
    fn one_step_chain() {
        // ancestor at the root takes ∞ and copies V_0 -> V_1 by the shift
        let g = shift();
        let w: Word = "+0".parse().unwrap();
        let anc = ChainNode { path: vec![], from: 0, to: 1, word: w.clone() };
        let b = g.apply_word(&w, 10).unwrap();
        let r = restrained_pairs(&g, &[anc], &[Inf], &[(b, 1)]);
        assert!(r.contains(10, 0));
        assert!(r.contains(b, 1));
        assert_eq!(r.pairs.len(), 2);
    }

    #[test]
    fn two_step_chain_composes() {
        let g = shift();
        let w: Word = "+0".parse().unwrap();
        let a = ChainNode { path: vec![], from: 0, to: 1, word: w.clone() };
        let b = ChainNode { path: vec![Inf], from: 1, to: 2, word: w.clone() };
        let target = g.apply_word(&"+0 +0".parse().unwrap(), 4).unwrap();
        let r = restrained_pairs(&g, &[a, b], &[Inf, Inf], &[(target, 2)]);
        let p = r.pairs.iter().find(|p| p.m == 4 && p.set == 0).expect("two-step pair");
        assert_eq!(p.chain, vec![".".to_string(), "i".to_string()]);
    }

    #[test]
    fn ineligible_nodes_are_ignored() {
        let g = shift();
        let w: Word = "+0".parse().unwrap();
        // a node left of the owner never counts
        let left = ChainNode { path: vec![Inf], from: 0, to: 1, word: w };
        let r = restrained_pairs(&g, &[left], &[D], &[(3, 1)]);
        assert_eq!(r.pairs.len(), 1);
    }

    #[test]
    fn consistent_map_examples() {
        let b = catalog("block-swaps").unwrap();
        let budget = Budget::default();
        let mut s = QuadrupleSet::default();
        assert_eq!(consistent_map_search(&b, &s, 0, 1, &budget), Some(Word::identity()));
        s.quads.insert((0, 1, 0, 1));
        assert_eq!(consistent_map_search(&b, &s, 0, 1, &budget).unwrap().to_string(), "+0");
        assert_eq!(consistent_map_search(&b, &s, 1, 0, &budget), Some(Word::identity()));
        s.quads.insert((0, 0, 0, 1));
        assert_eq!(consistent_map_search(&b, &s, 0, 1, &budget), None);
    }
}
