//! Finite-injury construction of ceers `X_0, ..., X_{L-1}` whose induced
//! relations form an antichain: requirement `R^k_{n,m}` defeats opponent
//! `φ_e` as a reduction of level `n` to level `m`.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{Checks, ConstructionError, ConstructionReport, RequirementStatus};
use crate::ce_core::{CeIndex, PartialFnIndex, Registry, SetProgram};
use crate::priority_engine::{
    higher_priority, node_key, Construction, ConstructionRun, Ctx, NodePath, Outcome, Target,
};
use crate::reductions::{Ceer, ColumnState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct AReq {
    /// Opponent index.
    pub e: usize,
    pub n: usize,
    pub m: usize,
}

impl fmt::Display for AReq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R[phi_{}]_{{{},{}}}", self.e, self.n, self.m)
    }
}

/// Record of a requirement meeting its opponent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PigeonholeWitness {
    pub node: String,
    pub stage: u64,
    pub req: AReq,
    /// Column claimed in `X_n`, holding `p + 2` classes.
    pub k: u64,
    pub classes: u64,
    /// Column of `X_m` the probe was sent to.
    pub l: u64,
    /// Classes of `X_m` on column `l` afterwards.
    pub target_classes: u64,
    /// Whether a higher restraint already kept column `l` small.
    pub exploited: bool,
}

#[derive(Debug, Clone)]
struct AState {
    k: u64,
    probe: CeIndex,
    witness: Option<PigeonholeWitness>,
}

pub struct Antichain {
    reg: Registry,
    levels: usize,
    opponents: Vec<PartialFnIndex>,
    order: Vec<AReq>,
    ceers: Vec<Ceer>,
    nodes: BTreeMap<NodePath, AState>,
    pending: BTreeMap<NodePath, u64>,
    witnesses: Vec<PigeonholeWitness>,
    checks: Checks,
}

/// Requirements `(e, n, m)`, `n != m`, in lexicographic priority order.
pub fn antichain_spec(levels: usize, reg: Registry, opponents: Vec<PartialFnIndex>) -> Result<Antichain, ConstructionError> {
    if levels < 2 {
        return Err(ConstructionError::InvalidSpec(format!("antichain needs at least 2 levels, got {levels}")));
    }
    let mut order = Vec::new();
    for e in 0..opponents.len() {
        for n in 0..levels {
            for m in (0..levels).filter(|m| *m != n) {
                order.push(AReq { e, n, m });
            }
        }
    }
    Ok(Antichain {
        reg,
        levels,
        opponents,
        order,
        ceers: vec![Ceer::new(); levels],
        nodes: BTreeMap::new(),
        pending: BTreeMap::new(),
        witnesses: Vec::new(),
        checks: Checks::default(),
    })
}

impl Antichain {
    pub fn ceer(&self, level: usize) -> &Ceer {
        &self.ceers[level]
    }

    pub fn registry(&self) -> &Registry {
        &self.reg
    }

    pub fn checks(&self) -> &Checks {
        &self.checks
    }

    /// Every action taken, including those of since-injured nodes.
    pub fn witnesses(&self) -> &[PigeonholeWitness] {
        &self.witnesses
    }

    /// Column claimed by each active node.
    pub fn columns(&self) -> BTreeMap<String, (AReq, u64)> {
        self.nodes.iter().map(|(p, st)| (node_key(p), (self.order[p.len()], st.k))).collect()
    }

    pub fn report(&self, run: &ConstructionRun) -> ConstructionReport {
        let reqs = self
            .nodes
            .iter()
            .map(|(p, st)| RequirementStatus {
                node: node_key(p),
                requirement: self.order[p.len()].to_string(),
                status: match &st.witness {
                    Some(w) if w.exploited => "met: higher restraint".into(),
                    Some(_) => "met: collapsed".into(),
                    None => "waiting".into(),
                },
            })
            .collect();
        ConstructionReport::assemble("antichain", run, reqs, &self.checks)
    }

    /// Least `l` with `2l` in `W_{φ_e(K)}` at stage `s`.
    fn induced(&self, e: usize, probe: CeIndex, s: u64) -> Option<u64> {
        let f = self.reg.phi_at(self.opponents[e], probe.0, s)?;
        let target = CeIndex(f);
        if !self.reg.is_valid(target) {
            return None;
        }
        self.reg.set_at(target, s).into_iter().find(|x| x % 2 == 0).map(|x| x / 2)
    }

    fn claim(&mut self, ctx: &mut Ctx, node: &[Outcome], r: AReq) -> Result<(), String> {
        let p = node.len() as u64;
        let k = ctx.fresh();
        let to = ColumnState::Id(p + 2);
        self.ceers[r.n].collapse(k, to, ctx.stage()).map_err(|e| e.to_string())?;
        ctx.collapse(r.n, k, format!("Id{}", p + 2), node);
        ctx.restrain(node, k, Target::Set(r.n));
        let probe = self.reg.register(SetProgram::singleton(2 * k));
        ctx.pick(node, "column", k);
        ctx.pick(node, "K", probe);
        self.nodes.insert(node.to_vec(), AState { k, probe, witness: None });
        Ok(())
    }

    fn attack(&mut self, ctx: &mut Ctx, node: &[Outcome], r: AReq, l: u64) -> Result<(), String> {
        let p = node.len() as u64;
        let st = self.nodes[node].clone();
        ctx.mention(l);
        let exploited = ctx.restraints().any(|q| q.n == l && q.target.covers(r.m) && higher_priority(&q.owner, node));
        if exploited {
            ctx.note(node, format!("column {l} of X{} is held by a higher requirement", r.m));
        } else {
            self.ceers[r.m].collapse(l, ColumnState::Id(1), ctx.stage()).map_err(|e| e.to_string())?;
            ctx.collapse(r.m, l, "Id1", node);
        }
        let target_classes = self.ceers[r.m].state(l).classes().unwrap_or(u64::MAX);
        let w = PigeonholeWitness {
            node: node_key(node),
            stage: ctx.stage(),
            req: r,
            k: st.k,
            classes: p + 2,
            l,
            target_classes,
            exploited,
        };
        self.witnesses.push(w.clone());
        self.nodes.get_mut(node).expect("claimed").witness = Some(w);
        Ok(())
    }
}

impl Construction for Antichain {
    type Req = AReq;

    fn num_sets(&self) -> usize {
        self.levels
    }

    fn requirement_at(&self, path: &[Outcome]) -> Option<AReq> {
        self.order.get(path.len()).copied()
    }

    fn outcomes(&self, _req: &AReq) -> &'static [Outcome] {
        &[Outcome::D, Outcome::W]
    }

    fn begin_stage(&mut self, ctx: &mut Ctx) -> Result<(), String> {
        self.reg.advance_to(ctx.stage());
        Ok(())
    }

    fn decide(&mut self, ctx: &mut Ctx, node: &[Outcome], r: &AReq) -> Result<Outcome, String> {
        let Some(st) = self.nodes.get(node) else { return Ok(Outcome::W) };
        if st.witness.is_some() {
            return Ok(Outcome::D);
        }
        match self.induced(r.e, st.probe, ctx.stage()) {
            Some(l) => {
                self.pending.insert(node.to_vec(), l);
                Ok(Outcome::D)
            }
            None => Ok(Outcome::W),
        }
    }

    fn act(&mut self, ctx: &mut Ctx, node: &[Outcome], r: &AReq, o: Outcome) -> Result<(), String> {
        if !self.nodes.contains_key(node) {
            return self.claim(ctx, node, *r);
        }
        if o == Outcome::D {
            if let Some(l) = self.pending.remove(node) {
                self.attack(ctx, node, *r, l)?;
            }
        }
        Ok(())
    }

    fn initialize(&mut self, _ctx: &mut Ctx, node: &[Outcome]) -> Result<(), String> {
        self.nodes.remove(node);
        self.pending.remove(node);
        Ok(())
    }

    fn end_stage(&mut self, ctx: &mut Ctx, _path: &[Outcome]) -> Result<(), String> {
        let s = ctx.stage();
        for (p, st) in &self.nodes {
            let r = self.order[p.len()];
            let want = ColumnState::Id(p.len() as u64 + 2);
            let got = self.ceers[r.n].state(st.k);
            self.checks.check(s, "column-target", got == want, || {
                format!("{} column {} of X{} is {got:?}, expected {want:?}", node_key(p), st.k, r.n)
            });
            if let Some(w) = &st.witness {
                let got = self.ceers[r.m].state(w.l).classes();
                let ok = if w.exploited { got.is_some_and(|c| c < w.classes) } else { got == Some(1) };
                self.checks.check(s, "pigeonhole", ok, || {
                    format!("{} column {} of X{} has {got:?} classes", node_key(p), w.l, r.m)
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ce_core::Opponent;
    use crate::priority_engine::run;

    fn build(levels: usize, ops: impl FnOnce(&mut Registry) -> Vec<Opponent>) -> Antichain {
        let mut reg = Registry::new();
        let ops = ops(&mut reg);
        let opponents = ops.into_iter().map(|o| reg.register_opponent(o)).collect();
        antichain_spec(levels, reg, opponents).unwrap()
    }

    #[test]
    fn silent_opponent_leaves_requirements_waiting() {
        let mut c = build(2, |_| vec![Opponent::divergent()]);
        let r = run(&mut c, 100).unwrap();
        let rep = c.report(&r);
        assert!(rep.passed);
        assert!(c.witnesses().is_empty());
        for (_, (req, k)) in c.columns() {
            assert_eq!(c.ceer(req.n).state(k), ColumnState::Id(req.n as u64 + 2));
        }
    }

    #[test]
    fn probe_sent_to_fresh_column_collapses_it() {
        let mut c = build(2, |reg| {
            let far = reg.register(SetProgram::singleton(2 * 500));
            vec![Opponent::constant(far.0, 3)]
        });
        let r = run(&mut c, 200).unwrap();
        let rep = c.report(&r);
        assert!(rep.passed, "{:?}", rep.checks.failures);
        let w = &c.witnesses()[0];
        assert_eq!((w.l, w.target_classes, w.classes, w.exploited), (500, 1, 2, false));
        assert_eq!(c.ceer(w.req.m).state(500), ColumnState::Id(1));
    }

    #[test]
    fn higher_restraint_is_exploited() {
        // the probe of R_{1,0} lands on the column R_{0,1} claimed in X_0
        let mut c = build(2, |reg| {
            let col0 = reg.register(SetProgram::singleton(0));
            vec![Opponent::constant(col0.0, 0)]
        });
        let r = run(&mut c, 50).unwrap();
        assert!(c.report(&r).passed);
        let second = c.witnesses().iter().find(|w| w.req.n == 1).unwrap();
        assert!(second.exploited);
        assert_eq!(second.target_classes, 2);
    }

    #[test]
    fn one_level_is_rejected() {
        assert!(antichain_spec(1, Registry::new(), vec![]).is_err());
    }
}
