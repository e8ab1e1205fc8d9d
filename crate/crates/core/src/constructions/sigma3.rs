//! Σ⁰₃ relations `i R j :<=> ∃n X(i,j,n)` given by flag schedules, and the
//! P-requirement tree shared by the two Σ⁰₃ constructions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::priority_engine::Outcome;

/// When the flag for `X(i,j,n)` is raised. `X(i,j,n)` holds iff the flag is
/// raised at infinitely many stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Always,
    Never,
    /// Raised at stages divisible by `period`.
    Periodic { period: u64 },
    /// Raised at stages `< stage` only.
    FiniteUntil { stage: u64 },
}

impl Schedule {
    pub fn raised(self, s: u64) -> bool {
        match self {
            Schedule::Always => true,
            Schedule::Never => false,
            Schedule::Periodic { period } => period > 0 && s % period == 0,
            Schedule::FiniteUntil { stage } => s < stage,
        }
    }

    pub fn cofinal(self) -> bool {
        matches!(self, Schedule::Always | Schedule::Periodic { period: 1.. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagEntry {
    pub i: usize,
    pub j: usize,
    pub n: usize,
    pub schedule: Schedule,
    /// Declared eventual truth, checked against the schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared: Option<bool>,
}

/// A Σ⁰₃ relation on `{0, ..., universe-1}`; unlisted flags are never raised.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sigma3Spec {
    pub universe: usize,
    #[serde(default)]
    pub flags: Vec<FlagEntry>,
}

impl Sigma3Spec {
    /// `X(i,j,0)` raised at every stage for `i, j` in a common class.
    pub fn partition(universe: usize, classes: &[&[usize]]) -> Self {
        let mut flags = Vec::new();
        for c in classes {
            for (a, i) in c.iter().enumerate() {
                for j in &c[a + 1..] {
                    let (i, j) = ((*i).min(*j), (*i).max(*j));
                    flags.push(FlagEntry { i, j, n: 0, schedule: Schedule::Always, declared: Some(true) });
                }
            }
        }
        Sigma3Spec { universe, flags }
    }

    fn entry(&self, i: usize, j: usize, n: usize) -> Option<&FlagEntry> {
        let (i, j) = (i.min(j), i.max(j));
        self.flags.iter().find(|f| f.i == i && f.j == j && f.n == n)
    }

    /// The stage-`s` approximation to `X(i,j,n)`.
    pub fn flag(&self, i: usize, j: usize, n: usize, s: u64) -> bool {
        self.entry(i, j, n).is_some_and(|f| f.schedule.raised(s))
    }

    pub fn declared(&self, i: usize, j: usize, n: usize) -> bool {
        self.entry(i, j, n).is_some_and(|f| f.declared.unwrap_or(f.schedule.cofinal()))
    }

    /// Declared `R`: the equivalence relation generated by the declared `X`.
    pub fn related(&self, i: usize, j: usize) -> bool {
        if i == j {
            return true;
        }
        let mut seen = BTreeSet::from([i]);
        let mut frontier = vec![i];
        while let Some(a) = frontier.pop() {
            for f in &self.flags {
                if f.declared.unwrap_or(f.schedule.cofinal()) {
                    for (x, y) in [(f.i, f.j), (f.j, f.i)] {
                        if x == a && seen.insert(y) {
                            frontier.push(y);
                        }
                    }
                }
            }
        }
        seen.contains(&j)
    }

    /// Structural checks: indices in range, `i < j`, declared truth agrees
    /// with the schedule.
    pub fn validate(&self) -> Result<(), String> {
        for f in &self.flags {
            if f.i >= f.j || f.j >= self.universe {
                return Err(format!("flag ({}, {}, {}) needs i < j < {}", f.i, f.j, f.n, self.universe));
            }
            if let Some(d) = f.declared {
                if d != f.schedule.cofinal() {
                    return Err(format!("flag ({}, {}, {}) declared {d} but its schedule says otherwise", f.i, f.j, f.n));
                }
            }
        }
        Ok(())
    }

    /// Horizon check: on `(h/2, h]` each declared-true flag is raised and
    /// each declared-false flag is not. Returns the offending entries.
    pub fn check_horizon(&self, h: u64) -> Vec<FlagEntry> {
        self.flags
            .iter()
            .filter(|f| {
                let truth = f.declared.unwrap_or(f.schedule.cofinal());
                let raised = (h / 2 + 1..=h).any(|s| f.schedule.raised(s));
                truth != raised
            })
            .copied()
            .collect()
    }
}

/// Requirement `P^n_{i,j}`, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PReq {
    pub i: usize,
    pub j: usize,
    pub n: usize,
}

impl std::fmt::Display for PReq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "P^{}_{{{},{}}}", self.n, self.i, self.j)
    }
}

/// Priority order `(max(i,j), i, j, n)`.
pub(crate) fn p_order(universe: usize, opponents: usize) -> Vec<PReq> {
    let mut v = Vec::new();
    for j in 0..universe {
        for i in 0..j {
            for n in 0..opponents {
                v.push(PReq { i, j, n });
            }
        }
    }
    v
}

/// Below `τ⌢∞` for `τ = P_{i,j}` no `P_{i',j}` or `P_{j,i'}` is placed.
pub(crate) fn p_excluded(anc: &[(PReq, Outcome)], r: &PReq) -> bool {
    anc.iter().any(|(t, o)| *o == Outcome::Inf && (r.j == t.j || r.i == t.j))
}

pub(crate) const P_OUTCOMES: &[Outcome] = &[Outcome::Inf, Outcome::D, Outcome::W];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::place;

    #[test]
    fn schedules() {
        assert!(Schedule::Periodic { period: 3 }.raised(9));
        assert!(!Schedule::Periodic { period: 3 }.raised(10));
        assert!(Schedule::FiniteUntil { stage: 5 }.raised(4));
        assert!(!Schedule::FiniteUntil { stage: 5 }.cofinal());
        let x = Sigma3Spec::partition(4, &[&[0, 1], &[2, 3]]);
        x.validate().unwrap();
        assert!(x.flag(1, 0, 0, 17));
        assert!(x.related(0, 1) && x.related(3, 2) && !x.related(1, 2));
        assert!(x.check_horizon(100).is_empty());
        let json = serde_json::to_string(&x).unwrap();
        let back: Sigma3Spec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn declared_truth_mismatch_is_rejected() {
        let bad = Sigma3Spec {
            universe: 2,
            flags: vec![FlagEntry { i: 0, j: 1, n: 0, schedule: Schedule::Never, declared: Some(true) }],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn placement_skips_pairs_sharing_the_target() {
        use Outcome::*;
        let order = p_order(4, 1);
        assert_eq!(order[0], PReq { i: 0, j: 1, n: 0 });
        // under P_{0,1}⌢∞: P_{0,2} next, P_{1,2} skipped, then P_{0,3}, P_{2,3}
        let at = |p: &[Outcome]| place(&order, p, p_excluded);
        assert_eq!(at(&[Inf]), Some(PReq { i: 0, j: 2, n: 0 }));
        assert_eq!(at(&[Inf, W]), Some(PReq { i: 0, j: 3, n: 0 }));
        assert_eq!(at(&[Inf, W, W]), Some(PReq { i: 2, j: 3, n: 0 }));
        assert_eq!(at(&[Inf, W, W, W]), None);
        assert_eq!(at(&[W, W]), Some(PReq { i: 1, j: 2, n: 0 }));
    }
}
