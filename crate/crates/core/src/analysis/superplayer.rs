//! Three-way partition of n players and the meta-player that runs a whole
//! part of an n-player protocol as one of three players.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversary::{CorruptionPlan, Silent};
use crate::auth::{KeyRegistry, PlayerId, SessionId, Signer, Verify};
use crate::eig::Value;
use crate::engine::{ProcessTrace, Scenario, SessionSim, Simulation, Slot, Topology};
use crate::error::{Error, Result};
use crate::protocol::{
    Address, Header, Incoming, NodeProcess, Outgoing, ProcessState, ProtocolParams,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub sets: [Vec<PlayerId>; 3],
}

impl PartitionSpec {
    pub fn sizes(&self) -> [usize; 3] {
        [self.sets[0].len(), self.sets[1].len(), self.sets[2].len()]
    }

    pub fn n(&self) -> usize {
        self.sizes().iter().sum()
    }

    /// Index of the part holding `p`.
    pub fn part_of(&self, p: PlayerId) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(&p))
    }
}

/// Contiguous partition with `|I_A| ≤ min(t1, t2)` and `|I_B|, |I_C| ≤ t1`.
pub fn partition(n: usize, t1: usize, t2: usize) -> Result<PartitionSpec> {
    let infeasible = |m: String| Err(Error::Infeasible(m));
    if t2 == 0 {
        return infeasible("t2 must be positive".into());
    }
    if n < 3 {
        return infeasible(format!("three nonempty parts need n ≥ 3, got {n}"));
    }
    let m = t1.min(t2);
    if n > 2 * t1 + m {
        return infeasible(format!(
            "n = {n} exceeds 2·t1 + min(t1, t2) = {}",
            2 * t1 + m
        ));
    }
    let a = m.min(n - 2);
    let b = t1.min(n - a - 1);
    let c = n - a - b;
    if a == 0 || b == 0 || c == 0 || c > t1 {
        return infeasible(format!("no partition for n = {n}, t1 = {t1}, t2 = {t2}"));
    }
    let ids = |r: std::ops::Range<usize>| r.map(PlayerId::from_index).collect::<Vec<_>>();
    Ok(PartitionSpec {
        sets: [ids(0..a), ids(a..a + b), ids(a + b..n)],
    })
}

/// `(inner sender, inner receiver, payload)` entries of one meta message.
pub type Bundle = Vec<(PlayerId, PlayerId, Vec<u8>)>;

pub fn encode_bundle(b: &Bundle) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(b.len() as u32).to_be_bytes());
    for (from, to, p) in b {
        out.extend_from_slice(&from.0.to_be_bytes());
        out.extend_from_slice(&to.0.to_be_bytes());
        out.extend_from_slice(&(p.len() as u32).to_be_bytes());
        out.extend_from_slice(p);
    }
    out
}

pub fn decode_bundle(bytes: &[u8]) -> Result<Bundle> {
    let bad = || Error::Malformed("bundle".into());
    let mut rest = bytes;
    let mut take = |k: usize| -> Result<&[u8]> {
        if rest.len() < k {
            return Err(bad());
        }
        let (h, t) = rest.split_at(k);
        rest = t;
        Ok(h)
    };
    let count = u32::from_be_bytes(take(4)?.try_into().unwrap());
    let mut out = Vec::new();
    for _ in 0..count {
        let from = PlayerId(u16::from_be_bytes(take(2)?.try_into().unwrap()));
        let to = PlayerId(u16::from_be_bytes(take(2)?.try_into().unwrap()));
        let len = u32::from_be_bytes(take(4)?.try_into().unwrap()) as usize;
        out.push((from, to, take(len)?.to_vec()));
    }
    if !rest.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// One meta-player: runs every inner player of its part, keeps traffic
/// inside the part local, and bundles traffic to other parts.
pub struct MetaProcess {
    me: PlayerId,
    spec: PartitionSpec,
    inner: Vec<ProcessState>,
    /// Intra-part messages emitted this round, delivered with this round.
    local: Vec<(PlayerId, PlayerId, Vec<u8>)>,
}

impl MetaProcess {
    fn part(&self, p: PlayerId) -> Option<PlayerId> {
        self.spec.part_of(p).map(PlayerId::from_index)
    }

    pub fn inner(&self) -> &[ProcessState] {
        &self.inner
    }
}

/// Wraps the inner processes of part `me` into a single three-player process.
pub fn superplayer_wrap(
    me: usize,
    spec: &PartitionSpec,
    inner: Vec<ProcessState>,
) -> Result<MetaProcess> {
    if me >= 3 {
        return Err(Error::InvalidScenario(format!(
            "meta-player {me} not in 0..3"
        )));
    }
    let mut members: Vec<PlayerId> = inner.iter().map(|p| p.player()).collect();
    members.sort();
    if members != spec.sets[me] {
        return Err(Error::InvalidScenario(format!(
            "part {me} is {:?}, got {members:?}",
            spec.sets[me]
        )));
    }
    Ok(MetaProcess {
        me: PlayerId::from_index(me),
        spec: spec.clone(),
        inner,
        local: Vec::new(),
    })
}

impl NodeProcess for MetaProcess {
    fn player(&self) -> PlayerId {
        self.me
    }

    fn header(&self) -> Header {
        let input = self.inner.iter().find_map(|p| p.header().input);
        let code = self
            .inner
            .first()
            .map(|p| p.header().code)
            .unwrap_or_default();
        Header {
            input,
            key: self.me,
            code: format!("superplayer{:?};{code}", self.spec.sizes()),
        }
    }

    fn rounds(&self) -> usize {
        self.inner.iter().map(|p| p.rounds()).max().unwrap_or(0)
    }

    fn emit(&mut self, round: usize, signer: &dyn Signer) -> Result<Vec<Outgoing>> {
        self.local.clear();
        let mut bundles: BTreeMap<PlayerId, Bundle> = BTreeMap::new();
        for i in 0..self.inner.len() {
            let from = self.inner[i].player();
            for m in self.inner[i].emit(round, signer)? {
                let (Address::Name(to) | Address::AllInstances(to)) = m.to;
                match self.part(to) {
                    Some(part) if part == self.me => self.local.push((from, to, m.payload)),
                    Some(part) => bundles.entry(part).or_default().push((from, to, m.payload)),
                    None => {}
                }
            }
        }
        Ok(bundles
            .into_iter()
            .map(|(part, b)| Outgoing {
                to: Address::Name(part),
                payload: encode_bundle(&b),
            })
            .collect())
    }

    fn deliver(&mut self, round: usize, inbox: &[Incoming], reg: &dyn Verify) {
        let mut per: BTreeMap<PlayerId, Vec<Incoming>> = BTreeMap::new();
        for (from, to, payload) in self.local.drain(..) {
            per.entry(to).or_default().push(Incoming { from, payload });
        }
        for m in inbox {
            let Ok(bundle) = decode_bundle(&m.payload) else {
                continue;
            };
            for (from, to, payload) in bundle {
                // an inner sender must belong to the part the bundle came from
                if self.spec.part_of(from) == Some(m.from.index())
                    && self.spec.part_of(to) == Some(self.me.index())
                {
                    per.entry(to).or_default().push(Incoming { from, payload });
                }
            }
        }
        for p in &mut self.inner {
            let mut inbox = per.remove(&p.player()).unwrap_or_default();
            inbox.sort();
            p.deliver(round, &inbox, reg);
        }
    }

    fn output(&self) -> Option<Value> {
        self.inner.iter().find_map(|p| p.output())
    }
}

/// Meta-level plan (players 0..3) lifted to the inner players.
pub fn inner_plan(meta: &CorruptionPlan, spec: &PartitionSpec) -> CorruptionPlan {
    let lift = |ps: &std::collections::BTreeSet<PlayerId>| {
        ps.iter()
            .flat_map(|p| spec.sets.get(p.index()).cloned().unwrap_or_default())
            .collect()
    };
    CorruptionPlan {
        byz: meta
            .byz
            .iter()
            .map(|(s, ps)| (s.clone(), lift(ps)))
            .collect(),
        external: lift(&meta.external),
    }
}

pub struct PartitionedRun {
    /// Meta-level traces, three per session.
    pub traces: Vec<ProcessTrace>,
    /// Inner outputs per session and inner player, Byzantine parts excluded.
    pub inner_outputs: BTreeMap<SessionId, BTreeMap<PlayerId, Option<Value>>>,
}

/// Runs the n-player `scenario` as a three-player system over `spec`.
/// The scenario's plan is read at meta level (ids 0..3); Byzantine
/// meta-players are silent.
pub fn run_partitioned(scenario: &Scenario, spec: &PartitionSpec) -> Result<PartitionedRun> {
    if spec.n() != scenario.n {
        return Err(Error::InvalidScenario(format!(
            "partition covers {} of {} players",
            spec.n(),
            scenario.n
        )));
    }
    let plan = inner_plan(&scenario.plan, spec);
    let mut reg = KeyRegistry::gen_keys(scenario.n)?;
    for p in plan.leaked() {
        reg.leak_key(p)?;
    }
    let mut sims = Vec::new();
    for s in &scenario.sessions {
        let params = ProtocolParams::new(
            scenario.n,
            scenario.protocol,
            scenario.t,
            scenario.v0,
            s.general,
        )?;
        let mut slots = Vec::new();
        for part in 0..3 {
            let meta = PlayerId::from_index(part);
            if scenario.plan.is_byzantine(meta, &s.id) {
                slots.push(Slot::Byzantine);
                continue;
            }
            let inner = spec.sets[part]
                .iter()
                .map(|&p| {
                    ProcessState::new(
                        params.clone(),
                        p,
                        s.id.clone(),
                        (p == s.general).then_some(s.input),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            slots.push(Slot::Process {
                process: Box::new(superplayer_wrap(part, spec, inner)?),
                status: scenario.plan.status(meta, &s.id),
            });
        }
        sims.push(SessionSim::new(s.id.clone(), Topology::complete(3), slots)?);
    }
    let env = crate::adversary::AdversaryEnv::new(
        3,
        scenario.t,
        scenario.v0,
        scenario.protocol,
        &scenario.sessions,
        &scenario.plan,
        &reg,
    );
    let out = Simulation::new(sims)?.run(&reg, &env, &mut Silent)?;
    let mut inner_outputs: BTreeMap<SessionId, BTreeMap<PlayerId, Option<Value>>> = BTreeMap::new();
    for t in &out.traces {
        if scenario.plan.is_byzantine(t.player, &t.session) {
            continue;
        }
        for &p in &spec.sets[t.player.index()] {
            inner_outputs
                .entry(t.session.clone())
                .or_default()
                .insert(p, t.output);
        }
    }
    Ok(PartitionedRun {
        traces: out.traces,
        inner_outputs,
    })
}
