//! Σ⁰₃-universality for non-isolated actions with computable finite orbits:
//! requirements `P^n_{i,j}` with outcomes `∞ < d < w`, diagonalizing inside
//! fresh orbits and recording the forced values as quadruple sets.

use std::collections::{BTreeMap, BTreeSet};

use super::pairs::{consistent_map_search, QuadrupleSet};
use super::sigma3::{p_excluded, p_order, PReq, Sigma3Spec, P_OUTCOMES};
use super::{ancestors, place, Checks, ConstructionError, ConstructionReport, RequirementStatus};
use crate::ce_core::{PartialFnIndex, Registry};
use crate::perm_group::{classify_action, solve_map, ActionClass, Budget, PermGroup, Word};
use crate::priority_engine::{
    higher_priority, is_prefix, node_key, run, Action, Construction, ConstructionRun, Ctx, NodePath, Outcome,
    Target,
};

const K_SEARCH_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Acted {
    Kept,
    Placed,
}

#[derive(Debug, Clone, Default)]
struct NState {
    g: Option<Word>,
    base: QuadrupleSet,
    own: QuadrupleSet,
    k: Option<u64>,
    orbit: BTreeSet<u64>,
    g0: Word,
    g1: Word,
    phi_k: Option<u64>,
    acted: Option<Acted>,
}

impl NState {
    fn s(&self) -> QuadrupleSet {
        let mut s = self.base.clone();
        s.extend(&self.own);
        s
    }
}

pub struct NonIsolated {
    reg: Registry,
    group: PermGroup,
    budget: Budget,
    sigma: Sigma3Spec,
    opponents: Vec<PartialFnIndex>,
    order: Vec<PReq>,
    nodes: BTreeMap<NodePath, NState>,
    inject: BTreeSet<u64>,
    known: BTreeSet<u64>,
    cleaned: Vec<(u64, BTreeSet<u64>)>,
    growths: u64,
    checks: Checks,
    error: Option<ConstructionError>,
}

/// Validates the inputs and builds the construction. `group` should already
/// be tamed: non-isolated, with an orbit oracle.
pub fn sigma3_nonisolated_spec(
    sigma: Sigma3Spec,
    group: PermGroup,
    reg: Registry,
    opponents: Vec<PartialFnIndex>,
    budget: Budget,
) -> Result<NonIsolated, ConstructionError> {
    sigma.validate().map_err(ConstructionError::InvalidSpec)?;
    if group.orbit_of(0).is_none() {
        return Err(ConstructionError::InvalidSpec(format!("group {} has no orbit oracle", group.name)));
    }
    if sigma.universe > 1 {
        let class = classify_action(&group, &budget);
        if !matches!(class, ActionClass::NonIsolated { .. }) {
            return Err(ConstructionError::InvalidSpec(format!(
                "group {} must be non-isolated with finite orbits, classified {}",
                group.name,
                class.tag()
            )));
        }
    }
    Ok(NonIsolated {
        order: p_order(sigma.universe, opponents.len()),
        reg,
        group,
        budget,
        sigma,
        opponents,
        nodes: BTreeMap::new(),
        inject: BTreeSet::new(),
        known: BTreeSet::new(),
        cleaned: Vec::new(),
        growths: 0,
        checks: Checks::default(),
        error: None,
    })
}

impl NonIsolated {
    /// At each listed stage the deepest active node holding a `K` (and
    /// everything below it) is injured before the walk.
    pub fn with_injuries(mut self, stages: impl IntoIterator<Item = u64>) -> Self {
        self.inject = stages.into_iter().collect();
        self
    }

    pub fn requirement(&self, node: &[Outcome]) -> Option<PReq> {
        place(&self.order, node, p_excluded)
    }

    pub fn checks(&self) -> &Checks {
        &self.checks
    }

    pub fn group(&self) -> &PermGroup {
        &self.group
    }

    /// Orbits put into every set by clean-ups, with their stages.
    pub fn cleaned(&self) -> &[(u64, BTreeSet<u64>)] {
        &self.cleaned
    }

    /// Number of quadruple-set growth events.
    pub fn growths(&self) -> u64 {
        self.growths
    }

    /// The chosen map of every active node that has one.
    pub fn words(&self) -> Vec<(NodePath, PReq, Word)> {
        self.nodes
            .iter()
            .filter_map(|(p, st)| Some((p.clone(), self.requirement(p)?, st.g.clone()?)))
            .collect()
    }

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
                    (None, None) => "idle",
                };
                RequirementStatus {
                    node: node_key(p),
                    requirement: self.requirement(p).map_or_else(String::new, |r| r.to_string()),
                    status: status.into(),
                }
            })
            .collect();
        ConstructionReport::assemble("sigma3-nonisolated", run, reqs, &self.checks)
    }

    fn fail<T>(&mut self, e: ConstructionError) -> Result<T, String> {
        let msg = e.to_string();
        self.error = Some(e);
        Err(msg)
    }

    fn search_failed<T>(&mut self, ctx: &Ctx, node: &[Outcome]) -> Result<T, String> {
        self.fail(ConstructionError::ConsistencySearchFailed { stage: ctx.stage(), node: node_key(node) })
    }

    fn first_visit(&mut self, ctx: &mut Ctx, node: &[Outcome], r: &PReq) -> Result<(), String> {
        let mut base = QuadrupleSet::default();
        for (p, st) in &self.nodes {
            if higher_priority(p, node) {
                base.extend(&st.s());
            }
        }
        let Some(g) = consistent_map_search(&self.group, &base, r.i, r.j, &self.budget) else {
            return self.search_failed(ctx, node);
        };
        ctx.pick(node, "g", &g);
        let st = self.nodes.get_mut(node).expect("visited");
        st.base = base;
        st.g = Some(g);
        Ok(())
    }

    /// Puts the whole orbit of `K` into every set and forgets `K`.
    fn clean_up(&mut self, ctx: &mut Ctx, node: &[Outcome]) {
        let Some(st) = self.nodes.get_mut(node) else { return };
        if st.k.is_none() {
            st.own = QuadrupleSet::default();
            return;
        }
        let orbit = std::mem::take(&mut st.orbit);
        *st = NState { g: st.g.take(), base: std::mem::take(&mut st.base), ..NState::default() };
        ctx.lift_all(node);
        for x in &orbit {
            for l in 0..ctx.num_sets() {
                ctx.enumerate(l, *x, node);
            }
        }
        self.cleaned.push((ctx.stage(), orbit));
    }

    fn pick_k(&mut self, ctx: &mut Ctx, node: &[Outcome], r: &PReq) -> Result<(), String> {
        let mut found = None;
        for c in 0..K_SEARCH_LIMIT {
            if ctx.mentioned().contains(&c) {
                continue;
            }
            let Some(o) = self.group.orbit_of(c) else { continue };
            if o.iter().all(|x| !ctx.mentioned().contains(x)) {
                found = Some((c, o));
                break;
            }
        }
        let Some((k, orbit)) = found else {
            return Err(format!("no fresh orbit below {K_SEARCH_LIMIT} for {}", node_key(node)));
        };
        let s = self.nodes[node].s();
        let maps = s.maps(r.i, r.j);
        let Some(g0) = solve_map(&self.group, &maps, &[], &self.budget) else {
            return self.search_failed(ctx, node);
        };
        let g0k = self.group.apply_word(&g0, k).map_err(|e| e.to_string())?;
        let Some(g1) = solve_map(&self.group, &maps, &[(k, g0k)], &self.budget) else {
            return self.search_failed(ctx, node);
        };
        for x in &orbit {
            ctx.mention(*x);
            ctx.restrain(node, *x, Target::All);
        }
        ctx.pick(node, "K", k);
        ctx.pick(node, "g0", &g0);
        ctx.pick(node, "g1", &g1);
        self.known.extend(orbit.iter().copied());
        let st = self.nodes.get_mut(node).expect("visited");
        st.k = Some(k);
        st.orbit = orbit;
        st.g0 = g0;
        st.g1 = g1;
        Ok(())
    }

    fn inf_ancestors(&self, node: &[Outcome]) -> Vec<(PReq, Word)> {
        ancestors(&self.order, node, p_excluded)
            .into_iter()
            .filter(|(_, _, o)| *o == Outcome::Inf)
            .filter_map(|(p, r, _)| Some((r, self.nodes.get(&p)?.g.clone()?)))
            .collect()
    }

    fn diagonalize(&mut self, ctx: &mut Ctx, node: &[Outcome], r: &PReq) -> Result<(), String> {
        let st = self.nodes[node].clone();
        let (k, y) = (st.k.expect("d needs K"), st.phi_k.expect("d needs phi(K)"));
        ctx.mention(y);
        if ctx.contains(r.j, y) {
            ctx.note(node, format!("phi(K) = {y} already in V{}", r.j));
            self.nodes.get_mut(node).expect("visited").acted = Some(Acted::Kept);
            return Ok(());
        }
        let g = &self.group;
        let apply = |w: &Word, x: u64| g.apply_word(w, x).map_err(|e| e.to_string());
        let s = st.s();
        let anc = self.inf_ancestors(node);
        let n = ctx.num_sets();
        let mut x: Vec<Option<u64>> = vec![None; n];
        x[r.i] = Some(k);
        let g0k = apply(&st.g0, k)?;
        x[r.j] = Some(if y == g0k { apply(&st.g1, k)? } else { g0k });
        // ∞-ancestors fix a set's member from their source's member
        for _ in 0..n {
            for (b, gb) in &anc {
                if x[b.j].is_none() {
                    if let Some(a) = x[b.i] {
                        x[b.j] = Some(apply(gb, a)?);
                    }
                }
            }
        }
        for l in 0..n {
            if x[l].is_none() {
                let Some(h) = consistent_map_search(g, &s, r.i, l, &self.budget) else {
                    return self.search_failed(ctx, node);
                };
                x[l] = Some(apply(&h, k)?);
            }
        }
        let x: Vec<u64> = x.into_iter().map(|v| v.expect("filled")).collect();
        ctx.lift_all(node);
        ctx.enumerate(r.i, k, node);
        for (l, v) in x.iter().enumerate() {
            ctx.enumerate(l, *v, node);
        }
        ctx.restrain(node, y, Target::Set(r.j));
        for z in &st.orbit {
            for (l, v) in x.iter().enumerate() {
                if z != v {
                    ctx.restrain(node, *z, Target::Set(l));
                }
            }
        }
        let stage = ctx.stage();
        for l in 0..n {
            let members: Vec<u64> = ctx.set(l).iter().filter(|v| st.orbit.contains(v)).copied().collect();
            self.checks.check(stage, "one-member-per-set", members == [x[l]], || {
                format!("{}: V{l} meets the orbit of K={k} in {members:?}", node_key(node))
            });
        }
        let mut own = st.own.clone();
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    own.quads.insert((x[a], x[b], a, b));
                }
            }
        }
        let mut full = st.base.clone();
        full.extend(&own);
        self.growths += 1;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let ok = consistent_map_search(g, &full, a, b, &self.budget).is_some();
                    self.checks.check(stage, "quadruples-coherent", ok, || {
                        format!("{}: no map V{a} -> V{b} consistent with its quadruples", node_key(node))
                    });
                }
            }
        }
        for (b, gb) in &anc {
            let ok = full.consistent(g, gb, b.i, b.j);
            self.checks.check(stage, "ancestor-map-consistent", ok, || {
                format!("{}: map of ancestor {b} breaks its quadruples", node_key(node))
            });
        }
        let entry = self.nodes.get_mut(node).expect("visited");
        entry.own = own;
        entry.acted = Some(Acted::Placed);
        Ok(())
    }
}

impl Construction for NonIsolated {
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
        let s = ctx.stage();
        self.reg.advance_to(s);
        if self.inject.contains(&s) {
            let target = self
                .nodes
                .iter()
                .filter(|(_, st)| st.k.is_some())
                .max_by_key(|(p, _)| p.len())
                .map(|(p, _)| p.clone());
            if let Some(t) = target {
                ctx.note(&t, "injected injury");
                let hit: Vec<NodePath> = self.nodes.keys().filter(|p| is_prefix(&t, p)).cloned().collect();
                for p in hit {
                    ctx.injure(&p);
                }
            }
        }
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
            self.first_visit(ctx, node, r)?;
        }
        match o {
            Outcome::Inf => self.clean_up(ctx, node),
            Outcome::W if self.nodes[node].k.is_none() => self.pick_k(ctx, node, r)?,
            Outcome::D if self.nodes[node].acted.is_none() => self.diagonalize(ctx, node, r)?,
            _ => {}
        }
        Ok(())
    }

    fn initialize(&mut self, ctx: &mut Ctx, node: &[Outcome]) -> Result<(), String> {
        self.clean_up(ctx, node);
        self.nodes.remove(node);
        Ok(())
    }

    fn end_stage(&mut self, ctx: &mut Ctx, _path: &[Outcome]) -> Result<(), String> {
        let s = ctx.stage();
        let stray: Vec<u64> = ctx
            .actions()
            .iter()
            .filter_map(|a| match a {
                Action::Enumerate { n, .. } if !self.known.contains(n) => Some(*n),
                _ => None,
            })
            .collect();
        self.checks.check(s, "orbit-discipline", stray.is_empty(), || {
            format!("numbers outside every K-orbit entered a set: {stray:?}")
        });
        for (at, orbit) in &self.cleaned {
            let ok = (0..ctx.num_sets()).all(|l| orbit.iter().all(|x| ctx.contains(l, *x)));
            self.checks.check(s, "clean-up", ok, || format!("orbit {orbit:?} cleaned at stage {at} left a set"));
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce_core::Opponent;
    use crate::perm_group::{catalog, tame_subgroup};

    fn tamed() -> PermGroup {
        tame_subgroup(&catalog("block-swaps").unwrap(), 150, &Budget::default()).unwrap().group
    }

    fn build(sigma: Sigma3Spec, ops: Vec<Opponent>) -> NonIsolated {
        let mut reg = Registry::new();
        let opponents = ops.into_iter().map(|o| reg.register_opponent(o)).collect();
        sigma3_nonisolated_spec(sigma, tamed(), reg, opponents, Budget::default()).unwrap()
    }

    #[test]
    fn unrelated_sets_split_each_orbit() {
        let mut c = build(Sigma3Spec { universe: 3, flags: vec![] }, vec![Opponent::identity(0)]);
        let r = c.run(300).unwrap();
        let rep = c.report(&r);
        assert!(rep.passed, "{:?} {:?}", rep.checks.failures, rep.restraint_violations);
        assert!(c.growths() > 0);
        for a in 0..3 {
            for b in a + 1..3 {
                assert_ne!(r.sets[a], r.sets[b]);
            }
        }
    }

    #[test]
    fn related_sets_follow_the_recorded_map() {
        let mut c = build(Sigma3Spec::partition(3, &[&[0, 1]]), vec![Opponent::identity(0)]);
        let r = c.run(300).unwrap();
        assert!(c.report(&r).passed);
        let (_, _, g) = c.words().into_iter().find(|(p, _, _)| p.is_empty()).unwrap();
        let image: BTreeSet<u64> = r.sets[0].iter().map(|x| c.group().apply_word(&g, *x).unwrap()).collect();
        assert_eq!(image, r.sets[1]);
        assert!(!r.sets[1].is_empty());
    }

    #[test]
    fn injury_cleans_up_the_orbit() {
        let mut c =
            build(Sigma3Spec { universe: 2, flags: vec![] }, vec![Opponent::divergent()]).with_injuries([20, 40]);
        let r = c.run(60).unwrap();
        assert!(c.report(&r).passed);
        assert_eq!(c.cleaned().len(), 2);
        for (_, orbit) in c.cleaned() {
            assert!(orbit.iter().all(|x| r.sets[0].contains(x) && r.sets[1].contains(x)));
        }
    }

    #[test]
    fn isolated_groups_are_rejected() {
        let mut reg = Registry::new();
        let op = reg.register_opponent(Opponent::identity(0));
        let e = sigma3_nonisolated_spec(
            Sigma3Spec { universe: 2, flags: vec![] },
            catalog("s3-on-3").unwrap(),
            reg,
            vec![op],
            Budget::default(),
        );
        assert!(matches!(e, Err(ConstructionError::InvalidSpec(_))));
    }
}
