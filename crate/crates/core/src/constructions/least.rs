//! A reduction of `=^ce` to itself making distinct sets computably
//! non-isomorphic: copy requirements `R_{i,j}` (outcomes `∞ < f`) and
//! diagonalization requirements `D^n_{i,j}` (outcomes `d < w`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{ancestors, place, Checks, ConstructionReport, RequirementStatus};
use crate::ce_core::{CeIndex, PartialFnIndex, Registry};
use crate::priority_engine::{
    higher_priority, node_key, Construction, ConstructionRun, Ctx, NodePath, Outcome, Target,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum LReq {
    R { i: usize, j: usize },
    D { i: usize, j: usize, n: usize },
}

impl fmt::Display for LReq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LReq::R { i, j } => write!(f, "R_{{{i},{j}}}"),
            LReq::D { i, j, n } => write!(f, "D^{n}_{{{i},{j}}}"),
        }
    }
}

/// How a D-node acted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DCase {
    /// `ψ(K)` went into `V_dst`.
    A { k: u64, y: u64, src: usize, dst: usize },
    /// `ψ(K) = K`: `K` went into `V_src` and is kept out of `V_dst`.
    B { k: u64, src: usize, dst: usize },
    /// Two of the `K`s share an image.
    NotInjective,
    /// Every image was restrained by a higher node.
    Blocked,
}

#[derive(Debug, Clone, Default)]
struct DState {
    ks: Vec<u64>,
    /// `M + 1`: one more than the numbers held by higher nodes at the
    /// first visit; the `K`s are picked one at a time up to this bound.
    bound: usize,
    /// Every image so far is held by a higher node: pick another `K`.
    extend: bool,
    /// `(src, dst, images)` of the stage the images converged.
    ready: Option<(usize, usize, Vec<u64>)>,
    acted: Option<DCase>,
}

fn excluded(anc: &[(LReq, Outcome)], r: &LReq) -> bool {
    match r {
        LReq::R { .. } => false,
        LReq::D { i, j, .. } => anc.iter().any(|(a, o)| *a == LReq::R { i: *i, j: *j } && *o == Outcome::Inf),
    }
}

/// The construction state.
pub struct LeastReduction {
    reg: Registry,
    universe: Vec<CeIndex>,
    opponents: Vec<PartialFnIndex>,
    order: Vec<LReq>,
    agreement: BTreeMap<NodePath, u64>,
    d: BTreeMap<NodePath, DState>,
    checks: Checks,
}

/// Builds the tree: requirements ordered by `(max(i,j), i, j, R before D,
/// n)`; no `D_{i,j}` below `R_{i,j}⌢∞`.
pub fn least_reduction_spec(reg: Registry, universe: Vec<CeIndex>, opponents: Vec<PartialFnIndex>) -> LeastReduction {
    let mut order = Vec::new();
    for j in 0..universe.len() {
        for i in 0..j {
            order.push(LReq::R { i, j });
            for n in 0..opponents.len() {
                order.push(LReq::D { i, j, n });
            }
        }
    }
    LeastReduction {
        reg,
        universe,
        opponents,
        order,
        agreement: BTreeMap::new(),
        d: BTreeMap::new(),
        checks: Checks::default(),
    }
}

impl LeastReduction {
    pub fn registry(&self) -> &Registry {
        &self.reg
    }

    pub fn checks(&self) -> &Checks {
        &self.checks
    }

    pub fn requirement(&self, node: &[Outcome]) -> Option<LReq> {
        place(&self.order, node, excluded)
    }

    /// Action records of the D-nodes active at the end of the run.
    pub fn d_cases(&self) -> BTreeMap<String, Option<DCase>> {
        self.d.iter().map(|(p, st)| (node_key(p), st.acted)).collect()
    }

    fn w(&self, k: usize) -> BTreeSet<u64> {
        self.reg.set_at(self.universe[k], self.reg.stage())
    }

    /// Least point where `W_i` and `W_j` differ at the current stage.
    fn disagreement(&self, i: usize, j: usize) -> Option<(u64, bool)> {
        let (a, b) = (self.w(i), self.w(j));
        let x = a.symmetric_difference(&b).next().copied()?;
        Some((x, a.contains(&x)))
    }

    pub fn report(&self, run: &ConstructionRun) -> ConstructionReport {
        let mut reqs = Vec::new();
        for (p, st) in &self.d {
            let status = match st.acted {
                Some(DCase::A { .. }) => "acted (a)",
                Some(DCase::B { .. }) => "acted (b)",
                Some(DCase::NotInjective) => "satisfied: not injective",
                Some(DCase::Blocked) => "blocked",
                None if st.ks.is_empty() => "unvisited",
                None => "waiting",
            };
            let requirement = self.requirement(p).map_or_else(String::new, |r| r.to_string());
            reqs.push(RequirementStatus { node: node_key(p), requirement, status: status.into() });
        }
        ConstructionReport::assemble("least-reduction", run, reqs, &self.checks)
    }

    fn decide_r(&mut self, ctx: &mut Ctx, node: &[Outcome], i: usize, j: usize) -> Outcome {
        let s = ctx.stage();
        let l = self.disagreement(i, j).map_or(s, |(x, _)| x.min(s));
        let prev = self.agreement.entry(node.to_vec()).or_insert(0);
        if l > *prev {
            *prev = l;
            ctx.mention(l);
            Outcome::Inf
        } else {
            Outcome::Fin
        }
    }

    fn act_r(&mut self, ctx: &mut Ctx, node: &[Outcome], i: usize, j: usize) {
        let l = self.agreement[node];
        let vi: Vec<u64> = ctx.set(i).range(..=l).copied().collect();
        let vj: Vec<u64> = ctx.set(j).range(..=l).copied().collect();
        for x in vj {
            ctx.enumerate(i, x, node);
        }
        for x in vi {
            ctx.enumerate(j, x, node);
        }
    }

    fn decide_d(&mut self, ctx: &mut Ctx, node: &[Outcome], i: usize, j: usize, n: usize) -> Outcome {
        let st = self.d.entry(node.to_vec()).or_default();
        if st.acted.is_some() {
            return Outcome::D;
        }
        if st.ks.is_empty() {
            return Outcome::W;
        }
        let s = ctx.stage();
        // an (i,j)-stage uses phi_n, a (j,i)-stage its inverse
        let (src, dst, inverse) = match self.disagreement(i, j) {
            Some((_, false)) => (j, i, true),
            _ => (i, j, false),
        };
        let op = self.opponents[n];
        let ks = self.d[node].ks.clone();
        let ys: Option<Vec<u64>> = ks
            .iter()
            .map(|k| if inverse { self.reg.phi_inverse_at(op, *k, s) } else { self.reg.phi_at(op, *k, s) })
            .collect();
        let Some(ys) = ys else { return Outcome::W };
        let distinct = ys.iter().collect::<BTreeSet<_>>().len() == ys.len();
        let all_held = ys.iter().all(|y| ctx.restraints().any(|r| r.n == *y && higher_priority(&r.owner, node)));
        let st = self.d.get_mut(node).expect("state exists");
        if distinct && all_held && st.ks.len() < st.bound {
            st.extend = true;
            return Outcome::W;
        }
        st.ready = Some((src, dst, ys));
        Outcome::D
    }

    fn pick_k(&mut self, ctx: &mut Ctx, node: &[Outcome]) {
        let higher: BTreeSet<u64> =
            ctx.restraints().filter(|r| higher_priority(&r.owner, node)).map(|r| r.n).collect();
        let k = ctx.fresh();
        let st = self.d.get_mut(node).expect("state exists");
        if st.ks.is_empty() {
            st.bound = higher.len() + 1;
        }
        st.extend = false;
        st.ks.push(k);
        let m = st.ks.len() - 1;
        ctx.restrain(node, k, Target::All);
        ctx.pick(node, &format!("K{m}"), k);
    }

    fn act_d(&mut self, ctx: &mut Ctx, node: &[Outcome]) {
        let st = &self.d[node];
        if st.acted.is_some() {
            return;
        }
        let (src, dst, ys) = st.ready.clone().expect("d follows convergence");
        let ks = st.ks.clone();
        let distinct: BTreeSet<u64> = ys.iter().copied().collect();
        let case = if distinct.len() < ys.len() {
            ctx.note(node, "images collide; not a permutation");
            DCase::NotInjective
        } else {
            let free = ys
                .iter()
                .position(|y| !ctx.restraints().any(|r| r.n == *y && higher_priority(&r.owner, node)));
            match free {
                None => {
                    ctx.note(node, "every image restrained by a higher node");
                    DCase::Blocked
                }
                Some(m) => {
                    let (k, y) = (ks[m], ys[m]);
                    ctx.mention(y);
                    if y == k {
                        ctx.lift(node, k, Target::All);
                        ctx.restrain(node, k, Target::Set(dst));
                        ctx.enumerate(src, k, node);
                        DCase::B { k, src, dst }
                    } else {
                        let lower: Vec<NodePath> = ctx
                            .restraints()
                            .filter(|r| r.n == y && r.owner.as_slice() != node && !higher_priority(&r.owner, node))
                            .map(|r| r.owner.clone())
                            .collect();
                        for b in lower {
                            ctx.injure(&b);
                        }
                        if ks.contains(&y) {
                            ctx.lift(node, y, Target::All);
                        }
                        ctx.enumerate(dst, y, node);
                        DCase::A { k, y, src, dst }
                    }
                }
            }
        };
        self.d.get_mut(node).expect("state exists").acted = Some(case);
    }
}

impl Construction for LeastReduction {
    type Req = LReq;

    fn num_sets(&self) -> usize {
        self.universe.len()
    }

    fn requirement_at(&self, path: &[Outcome]) -> Option<LReq> {
        self.requirement(path)
    }

    fn outcomes(&self, req: &LReq) -> &'static [Outcome] {
        match req {
            LReq::R { .. } => &[Outcome::Inf, Outcome::Fin],
            LReq::D { .. } => &[Outcome::D, Outcome::W],
        }
    }

    fn begin_stage(&mut self, ctx: &mut Ctx) -> Result<(), String> {
        self.reg.advance_to(ctx.stage());
        Ok(())
    }

    fn decide(&mut self, ctx: &mut Ctx, node: &[Outcome], req: &LReq) -> Result<Outcome, String> {
        Ok(match *req {
            LReq::R { i, j } => self.decide_r(ctx, node, i, j),
            LReq::D { i, j, n } => self.decide_d(ctx, node, i, j, n),
        })
    }

    fn act(&mut self, ctx: &mut Ctx, node: &[Outcome], req: &LReq, outcome: Outcome) -> Result<(), String> {
        match (*req, outcome) {
            (LReq::R { i, j }, Outcome::Inf) => self.act_r(ctx, node, i, j),
            (LReq::D { .. }, Outcome::W) if self.d[node].ks.is_empty() || self.d[node].extend => {
                self.pick_k(ctx, node)
            }
            (LReq::D { .. }, Outcome::D) => self.act_d(ctx, node),
            _ => {}
        }
        Ok(())
    }

    fn initialize(&mut self, _ctx: &mut Ctx, node: &[Outcome]) -> Result<(), String> {
        self.d.remove(node);
        Ok(())
    }

    fn end_stage(&mut self, ctx: &mut Ctx, _path: &[Outcome]) -> Result<(), String> {
        let s = ctx.stage();
        for (p, st) in &self.d {
            let exempt: BTreeSet<u64> = match st.acted {
                Some(DCase::B { k, .. }) => BTreeSet::from([k]),
                Some(DCase::A { y, .. }) => BTreeSet::from([y]),
                _ => BTreeSet::new(),
            };
            for k in st.ks.iter().filter(|k| !exempt.contains(k)) {
                let hit = (0..ctx.num_sets()).find(|v| ctx.contains(*v, *k));
                self.checks.check(s, "restraints-maintained", hit.is_none(), || {
                    format!("node {} K={k} is in V{}", node_key(p), hit.unwrap_or_default())
                });
            }
            if let Some(DCase::B { k, dst, .. }) = st.acted {
                self.checks.check(s, "awkward-chaining", !ctx.contains(dst, k), || {
                    format!("node {} case (b) K={k} entered V{dst}", node_key(p))
                });
            }
        }
        Ok(())
    }

    fn validate_path(&self, path: &[(LReq, Outcome)]) -> Result<(), String> {
        for (d, (r, _)) in path.iter().enumerate() {
            if let LReq::D { i, j, .. } = r {
                let parent = path[..d].iter().find(|(a, _)| *a == LReq::R { i: *i, j: *j });
                match parent {
                    None => return Err(format!("{r} placed without R_{{{i},{j}}} above it")),
                    Some((_, Outcome::Inf)) => return Err(format!("{r} placed below R_{{{i},{j}}}^inf")),
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

impl LeastReduction {
    /// Ancestors of a node (for reports and tests).
    pub fn ancestry(&self, node: &[Outcome]) -> Vec<(NodePath, LReq, Outcome)> {
        ancestors(&self.order, node, excluded)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce_core::{Opponent, SetProgram};
    use crate::priority_engine::{check_restraints, run};

    fn build(sets: Vec<SetProgram>, ops: Vec<Opponent>) -> LeastReduction {
        let mut reg = Registry::new();
        let universe = sets.into_iter().map(|p| reg.register(p)).collect();
        let opponents = ops.into_iter().map(|o| reg.register_opponent(o)).collect();
        least_reduction_spec(reg, universe, opponents)
    }

    #[test]
    fn single_index_has_no_requirements() {
        let mut c = build(vec![SetProgram::evens()], vec![Opponent::identity(0)]);
        let r = run(&mut c, 20).unwrap();
        assert!(r.traces.iter().all(|t| t.path.is_empty()));
        assert!(c.report(&r).passed);
    }

    #[test]
    fn empty_vs_zero_is_diagonalized() {
        let mut c = build(vec![SetProgram::empty(), SetProgram::singleton(0)], vec![Opponent::identity(0)]);
        let r = run(&mut c, 2000).unwrap();
        assert!(check_restraints(&r).is_clean());
        assert_ne!(r.sets[0], r.sets[1]);
        let rep = c.report(&r);
        assert!(rep.passed, "{:?}", rep.checks.failures);
        assert!(rep.requirements.iter().any(|q| q.status.starts_with("acted")));
    }

    #[test]
    fn duplicate_evens_agree() {
        let mut c = build(
            vec![SetProgram::evens(), SetProgram::evens(), SetProgram::odds()],
            vec![Opponent::identity(0), Opponent::swap(0, 1, 2)],
        );
        let r = run(&mut c, 600).unwrap();
        let low = |k: usize| r.sets[k].range(..=10).copied().collect::<Vec<_>>();
        assert_eq!(low(0), low(1));
        assert!(c.report(&r).passed);
    }

    #[test]
    fn tree_respects_placement() {
        let c = build(vec![SetProgram::empty(); 3], vec![Opponent::identity(0)]);
        use Outcome::*;
        assert_eq!(c.requirement(&[]), Some(LReq::R { i: 0, j: 1 }));
        assert_eq!(c.requirement(&[Fin]), Some(LReq::D { i: 0, j: 1, n: 0 }));
        assert_eq!(c.requirement(&[Inf]), Some(LReq::R { i: 0, j: 2 }));
        assert_eq!(c.ancestry(&[Inf, Fin]).len(), 2);
    }

    #[test]
    fn replay_is_identical() {
        let mk = || {
            build(
                vec![SetProgram::finite([1, 3]), SetProgram::finite_paced([1, 3], 1), SetProgram::empty(), SetProgram::singleton(2)],
                vec![Opponent::identity(0), Opponent::divergent()],
            )
        };
        let a = run(&mut mk(), 500).unwrap().to_jsonl();
        let b = run(&mut mk(), 500).unwrap().to_jsonl();
        assert_eq!(a, b);
    }
}
