//! Σ⁰₃-universality inside one infinite orbit: requirements `P^n_{i,j}` with
//! outcomes `∞ < d < w`, copying by a chosen `g` under `∞` and
//! diagonalizing under `d`.

use std::collections::{BTreeMap, BTreeSet};

use super::pairs::{restrained_pairs, ChainNode, RestrainedPairSet};
use super::sigma3::{p_excluded, p_order, PReq, Sigma3Spec, P_OUTCOMES};
use super::{place, Checks, ConstructionError, ConstructionReport, RequirementStatus};
use crate::ce_core::{PartialFnIndex, Registry};
use crate::perm_group::{avoid_finite_set, classify_action, ActionClass, Budget, PermError, PermGroup, Word};
use crate::priority_engine::{
    is_prefix, left_of, node_key, run, Construction, ConstructionRun, Ctx, NodePath, Outcome, Target,
};

/// Candidates tried when choosing a new `K`.
const K_SEARCH_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Acted {
    /// Restraining `φ(K)` would have exposed a pair; `K` stays out of `V_i`.
    Kept,
    /// `K ∈ V_i`, `φ(K)` restrained from `V_j`.
    Placed,
}

#[derive(Debug, Clone, Default)]
struct PState {
    g: Option<Word>,
    k: Option<u64>,
    phi_k: Option<u64>,
    acted: Option<Acted>,
}

pub struct InfOrbit {
    reg: Registry,
    group: PermGroup,
    budget: Budget,
    sigma: Sigma3Spec,
    opponents: Vec<PartialFnIndex>,
    order: Vec<PReq>,
    nodes: BTreeMap<NodePath, PState>,
    checks: Checks,
    error: Option<ConstructionError>,
    largest_pair_set: usize,
}

/// Validates the inputs and builds the construction. `group` must have an
/// infinite orbit; it is assumed to act transitively on the coded copy.
pub fn sigma3_infinite_orbit_spec(
    sigma: Sigma3Spec,
    group: PermGroup,
    reg: Registry,
    opponents: Vec<PartialFnIndex>,
    budget: Budget,
) -> Result<InfOrbit, ConstructionError> {
    sigma.validate().map_err(ConstructionError::InvalidSpec)?;
    if sigma.universe > 1 {
        let class = classify_action(&group, &budget);
        if !matches!(class, ActionClass::InfiniteOrbit { .. }) {
            return Err(ConstructionError::InvalidSpec(format!(
                "group {} must have an infinite orbit, classified {}",
                group.name,
                class.tag()
            )));
        }
    }
    Ok(InfOrbit {
        order: p_order(sigma.universe, opponents.len()),
        reg,
        group,
        budget,
        sigma,
        opponents,
        nodes: BTreeMap::new(),
        checks: Checks::default(),
        error: None,
        largest_pair_set: 0,
    })
}

impl InfOrbit {
    pub fn requirement(&self, node: &[Outcome]) -> Option<PReq> {
        place(&self.order, node, p_excluded)
    }

    pub fn checks(&self) -> &Checks {
        &self.checks
    }

    pub fn group(&self) -> &PermGroup {
        &self.group
    }

    /// Largest restrained-pair set seen by the per-stage sweep.
    pub fn largest_pair_set(&self) -> usize {
        self.largest_pair_set
    }

    /// The copying word of every active node that has one.
    pub fn words(&self) -> Vec<(NodePath, PReq, Word)> {
        self.nodes
            .iter()
            .filter_map(|(p, st)| Some((p.clone(), self.requirement(p)?, st.g.clone()?)))
            .collect()
    }

    /// Runs the engine, surfacing group-search failures as their own error.
    pub fn run(&mut self, stages: u64) -> Result<ConstructionRun, ConstructionError> {
        let r = run(self, stages);
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        Ok(r?)
    }

    pub fn report(&self, run: &ConstructionRun) -> ConstructionReport {
        let reqs = self
            .nodes
            .iter()
            .map(|(p, st)| {
                let status = match (st.acted, st.k) {
                    (Some(Acted::Placed), _) => "d: K placed",
                    (Some(Acted::Kept), _) => "d: K kept out",
                    (None, Some(_)) => "w",
                    (None, None) => "copying",
                };
                RequirementStatus {
                    node: node_key(p),
                    requirement: self.requirement(p).map_or_else(String::new, |r| r.to_string()),
                    status: status.into(),
                }
            })
            .collect();
        ConstructionReport::assemble("sigma3-infinite-orbit", run, reqs, &self.checks)
    }

    fn chain_nodes(&self) -> Vec<ChainNode> {
        self.nodes
            .iter()
            .filter_map(|(p, st)| {
                let r = self.requirement(p)?;
                Some(ChainNode { path: p.clone(), from: r.i, to: r.j, word: st.g.clone()? })
            })
            .collect()
    }

    fn base(ctx: &Ctx, owner: &[Outcome]) -> Vec<(u64, usize)> {
        let mut out = Vec::new();
        for r in ctx.restraints_of(owner) {
            match r.target {
                Target::Set(k) => out.push((r.n, k)),
                Target::All => out.extend((0..ctx.num_sets()).map(|k| (r.n, k))),
            }
        }
        out
    }

    fn owners(ctx: &Ctx) -> BTreeSet<NodePath> {
        ctx.restraints().map(|r| r.owner.clone()).collect()
    }

    fn exposed(ctx: &Ctx, pairs: &RestrainedPairSet) -> Option<(u64, usize)> {
        pairs.pairs.iter().find(|p| ctx.contains(p.set, p.m)).map(|p| (p.m, p.set))
    }

    fn choose_g(&mut self, ctx: &mut Ctx, node: &[Outcome]) -> Result<(), PermError> {
        let chain = self.chain_nodes();
        let mut f: BTreeSet<u64> = ctx.mentioned().clone();
        for a in Self::owners(ctx) {
            let ps = restrained_pairs(&self.group, &chain, &a, &Self::base(ctx, &a));
            f.extend(ps.pairs.iter().map(|p| p.m));
        }
        for st in self.nodes.values() {
            f.extend(st.k);
            f.extend(st.phi_k);
        }
        let g = avoid_finite_set(&self.group, &f, &self.budget)?;
        ctx.pick(node, "g", &g);
        self.nodes.get_mut(node).expect("visited").g = Some(g);
        Ok(())
    }

    fn pick_k(&mut self, ctx: &mut Ctx, node: &[Outcome], i: usize) -> Result<(), String> {
        let chain = self.chain_nodes();
        let mut taken: BTreeSet<u64> = BTreeSet::new();
        for a in Self::owners(ctx) {
            let ps = restrained_pairs(&self.group, &chain, &a, &Self::base(ctx, &a));
            taken.extend(ps.pairs.iter().map(|p| p.m));
        }
        for c in 0..K_SEARCH_LIMIT {
            if ctx.mentioned().contains(&c) || taken.contains(&c) {
                continue;
            }
            let own = restrained_pairs(&self.group, &chain, node, &[(c, i)]);
            if Self::exposed(ctx, &own).is_some() {
                continue;
            }
            ctx.mention(c);
            ctx.restrain(node, c, Target::Set(i));
            ctx.pick(node, "K", c);
            self.nodes.get_mut(node).expect("visited").k = Some(c);
            return Ok(());
        }
        Err(format!("no admissible K below {K_SEARCH_LIMIT} for {}", node_key(node)))
    }

    fn diagonalize(&mut self, ctx: &mut Ctx, node: &[Outcome], i: usize, j: usize) {
        let st = &self.nodes[node];
        let (k, y) = (st.k.expect("d needs K"), st.phi_k.expect("d needs phi(K)"));
        ctx.mention(y);
        let ps = restrained_pairs(&self.group, &self.chain_nodes(), node, &[(y, j)]);
        let blocked = Self::exposed(ctx, &ps).or_else(|| ps.contains(k, i).then_some((k, i)));
        let acted = match blocked {
            Some((m, l)) => {
                ctx.note(node, format!("restraining {y} from V{j} would expose ({m}, V{l})"));
                Acted::Kept
            }
            None => {
                ctx.lift(node, k, Target::Set(i));
                ctx.enumerate(i, k, node);
                ctx.restrain(node, y, Target::Set(j));
                Acted::Placed
            }
        };
        self.nodes.get_mut(node).expect("visited").acted = Some(acted);
    }

    fn copy(&self, ctx: &mut Ctx, node: &[Outcome], i: usize, j: usize) -> Result<(), PermError> {
        let g = self.nodes[node].g.clone().expect("g chosen on first visit");
        let inv = g.inverse();
        let vi: Vec<u64> = ctx.set(i).iter().copied().collect();
        let vj: Vec<u64> = ctx.set(j).iter().copied().collect();
        for x in vj {
            let y = self.group.apply_word(&inv, x)?;
            ctx.enumerate(i, y, node);
        }
        for x in vi {
            let y = self.group.apply_word(&g, x)?;
            ctx.enumerate(j, y, node);
        }
        Ok(())
    }

    fn fail<T>(&mut self, e: impl Into<ConstructionError>) -> Result<T, String> {
        let e = e.into();
        let msg = e.to_string();
        self.error = Some(e);
        Err(msg)
    }
}

impl Construction for InfOrbit {
    type Req = PReq;

    fn num_sets(&self) -> usize {
        self.sigma.universe
    }

    fn requirement_at(&self, path: &[Outcome]) -> Option<PReq> {
        self.requirement(path)
    }

    fn outcomes(&self, _req: &PReq) -> &'static [Outcome] {
        P_OUTCOMES
    }

    fn begin_stage(&mut self, ctx: &mut Ctx) -> Result<(), String> {
        self.reg.advance_to(ctx.stage());
        Ok(())
    }

    fn decide(&mut self, ctx: &mut Ctx, node: &[Outcome], r: &PReq) -> Result<Outcome, String> {
        let s = ctx.stage();
        let op = self.opponents[r.n];
        let st = self.nodes.entry(node.to_vec()).or_default();
        if self.sigma.flag(r.i, r.j, r.n, s) {
            return Ok(Outcome::Inf);
        }
        let Some(k) = st.k else { return Ok(Outcome::W) };
        if st.acted.is_some() {
            return Ok(Outcome::D);
        }
        match self.reg.phi_at(op, k, s) {
            Some(y) => {
                st.phi_k = Some(y);
                Ok(Outcome::D)
            }
            None => Ok(Outcome::W),
        }
    }

    fn act(&mut self, ctx: &mut Ctx, node: &[Outcome], r: &PReq, o: Outcome) -> Result<(), String> {
        if self.nodes[node].g.is_none() {
            if let Err(e) = self.choose_g(ctx, node) {
                return self.fail(e);
            }
        }
        match o {
            Outcome::Inf => {
                let st = self.nodes.get_mut(node).expect("visited");
                if st.k.is_some() {
                    *st = PState { g: st.g.take(), ..PState::default() };
                    ctx.lift_all(node);
                    ctx.note(node, "infinite outcome drops K");
                }
                if let Err(e) = self.copy(ctx, node, r.i, r.j) {
                    return self.fail(e);
                }
            }
            Outcome::W if self.nodes[node].k.is_none() => self.pick_k(ctx, node, r.i)?,
            Outcome::D if self.nodes[node].acted.is_none() => self.diagonalize(ctx, node, r.i, r.j),
            _ => {}
        }
        Ok(())
    }

    fn initialize(&mut self, _ctx: &mut Ctx, node: &[Outcome]) -> Result<(), String> {
        self.nodes.remove(node);
        Ok(())
    }

    fn end_stage(&mut self, ctx: &mut Ctx, _path: &[Outcome]) -> Result<(), String> {
        let s = ctx.stage();
        let chain = self.chain_nodes();
        let params: Vec<(NodePath, usize, u64)> = self
            .nodes
            .iter()
            .filter_map(|(p, st)| Some((p.clone(), self.requirement(p)?.i, st.k?)))
            .collect();
        for a in Self::owners(ctx) {
            let ps = restrained_pairs(&self.group, &chain, &a, &Self::base(ctx, &a));
            self.largest_pair_set = self.largest_pair_set.max(ps.pairs.len());
            self.checks.check(s, "restrained-pairs-finite", ps.complete, || {
                format!("pair search for {} stopped after {} steps", node_key(&a), ps.explored)
            });
            let hit = Self::exposed(ctx, &ps);
            self.checks.check(s, "no-exposed-pair", hit.is_none(), || {
                let (m, l) = hit.unwrap_or_default();
                format!("{}-restrained pair ({m}, V{l}) has {m} in V{l}", node_key(&a))
            });
            let ad = ext(&a, Outcome::D);
            for p in &ps.pairs {
                for (b, bi, kb) in &params {
                    if *b == a || *kb != p.m || *bi != p.set {
                        continue;
                    }
                    let bd = ext(b, Outcome::D);
                    let ok = left_of(&bd, &ad) || is_prefix(&bd, &a);
                    self.checks.check(s, "parameter-order", ok, || {
                        format!("pair ({}, V{}) of {} is K of {}", p.m, p.set, node_key(&a), node_key(b))
                    });
                }
            }
        }
        Ok(())
    }

    fn validate_path(&self, path: &[(PReq, Outcome)]) -> Result<(), String> {
        for (d, (r, o)) in path.iter().enumerate() {
            if *o != Outcome::Inf {
                continue;
            }
            if let Some((b, _)) = path[d + 1..].iter().find(|(b, _)| b.j == r.j || b.i == r.j) {
                return Err(format!("{b} placed below {r}^inf"));
            }
        }
        Ok(())
    }
}

fn ext(p: &[Outcome], o: Outcome) -> NodePath {
    let mut v = p.to_vec();
    v.push(o);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce_core::Opponent;
    use crate::constructions::Sigma3Spec;
    use crate::perm_group::catalog;

    fn build(sigma: Sigma3Spec, ops: Vec<Opponent>) -> InfOrbit {
        let mut reg = Registry::new();
        let opponents = ops.into_iter().map(|o| reg.register_opponent(o)).collect();
        let budget = Budget::default().with_alphabet(40);
        sigma3_infinite_orbit_spec(sigma, catalog("z-shift-dyadic").unwrap(), reg, opponents, budget).unwrap()
    }

    #[test]
    fn empty_universe_is_trivial() {
        let mut c = build(Sigma3Spec::default(), vec![Opponent::identity(0)]);
        let r = c.run(50).unwrap();
        assert!(r.traces.iter().all(|t| t.path.is_empty() && t.actions.is_empty()));
    }

    #[test]
    fn unrelated_pairs_get_distinguished() {
        let mut c = build(Sigma3Spec { universe: 3, flags: vec![] }, vec![Opponent::identity(0)]);
        let r = c.run(400).unwrap();
        let rep = c.report(&r);
        assert!(rep.passed, "{:?} {:?}", rep.checks.failures, rep.restraint_violations);
        for a in 0..3 {
            for b in a + 1..3 {
                assert_ne!(r.sets[a], r.sets[b], "V{a} = V{b}");
            }
        }
    }

    #[test]
    fn related_pair_is_copied_by_its_word() {
        let sigma = Sigma3Spec::partition(3, &[&[0, 1]]);
        let mut c = build(sigma, vec![Opponent::identity(0)]);
        let r = c.run(400).unwrap();
        assert!(c.report(&r).passed);
        let (_, _, g) = c.words().into_iter().find(|(p, q, _)| p.is_empty() && q.i == 0 && q.j == 1).unwrap();
        let image: BTreeSet<u64> = r.sets[0].iter().map(|x| c.group().apply_word(&g, *x).unwrap()).collect();
        assert_eq!(image, r.sets[1]);
        assert!(!r.sets[0].is_empty());
    }

    #[test]
    fn finite_groups_are_rejected() {
        let mut reg = Registry::new();
        let op = reg.register_opponent(Opponent::identity(0));
        let e = sigma3_infinite_orbit_spec(
            Sigma3Spec { universe: 2, flags: vec![] },
            catalog("s3-on-3").unwrap(),
            reg,
            vec![op],
            Budget::default(),
        );
        assert!(matches!(e, Err(ConstructionError::InvalidSpec(_))));
    }
}
