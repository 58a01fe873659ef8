use std::collections::{BTreeMap, BTreeSet};

use crate::adversary::{Adversary, AdversaryEnv, ProcessStatus};
use crate::auth::{KeyRegistry, PlayerId, SessionId, Signer, Verify};
use crate::error::{Error, Result};
use crate::protocol::{Address, Header, Incoming, NodeProcess};

use super::trace::{NodeId, ProcessTrace, RoundMessage, RoundRecord, Sent};

/// Who is wired to whom, by local name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    identities: Vec<PlayerId>,
    routes: Vec<BTreeMap<PlayerId, Vec<NodeId>>>,
}

impl Topology {
    /// The ordinary network: node `i` is player `i`, all links present.
    pub fn complete(n: usize) -> Self {
        let identities: Vec<_> = (0..n).map(PlayerId::from_index).collect();
        let routes = (0..n)
            .map(|_| identities.iter().map(|p| (*p, vec![p.index()])).collect())
            .collect();
        Topology { identities, routes }
    }

    /// `routes[node][name]` lists the nodes `node` reaches under `name`.
    pub fn new(
        identities: Vec<PlayerId>,
        routes: Vec<BTreeMap<PlayerId, Vec<NodeId>>>,
    ) -> Result<Self> {
        if identities.len() != routes.len() {
            return Err(Error::InvalidScenario("one route table per node".into()));
        }
        for table in &routes {
            for (name, targets) in table {
                if let Some(bad) = targets
                    .iter()
                    .find(|t| **t >= identities.len() || identities[**t] != *name)
                {
                    return Err(Error::InvalidScenario(format!(
                        "route {name} -> node {bad} reaches a node with another identity"
                    )));
                }
            }
        }
        Ok(Topology { identities, routes })
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    pub fn identity(&self, node: NodeId) -> PlayerId {
        self.identities[node]
    }

    pub fn identities(&self) -> &[PlayerId] {
        &self.identities
    }

    pub fn resolve(&self, node: NodeId, to: Address) -> &[NodeId] {
        let (name, all) = match to {
            Address::Name(p) => (p, false),
            Address::AllInstances(p) => (p, true),
        };
        match self.routes[node].get(&name) {
            Some(v) if all => v,
            Some(v) => &v[..v.len().min(1)],
            None => &[],
        }
    }

    /// Nodes with a link into `node`.
    pub fn in_neighbours(&self, node: NodeId) -> BTreeSet<NodeId> {
        (0..self.len())
            .filter(|s| self.routes[*s].values().any(|v| v.contains(&node)))
            .collect()
    }
}

/// A process slot: honest code, or a Byzantine placeholder the adversary drives.
pub enum Slot {
    Process {
        process: Box<dyn NodeProcess>,
        status: ProcessStatus,
    },
    Byzantine,
}

impl Slot {
    pub fn honest(p: impl NodeProcess + 'static) -> Self {
        Slot::Process {
            process: Box::new(p),
            status: ProcessStatus::Honest,
        }
    }
}

pub const BYZANTINE_CODE: &str = "byzantine";

/// One session of processes over a topology.
pub struct SessionSim {
    session: SessionId,
    topology: Topology,
    slots: Vec<Slot>,
    traces: Vec<ProcessTrace>,
    rounds: usize,
    delivered: Vec<RoundMessage>,
}

impl SessionSim {
    pub fn new(session: SessionId, topology: Topology, slots: Vec<Slot>) -> Result<Self> {
        if slots.len() != topology.len() {
            return Err(Error::InvalidScenario(format!(
                "{} slots for {} nodes",
                slots.len(),
                topology.len()
            )));
        }
        let mut rounds = 0;
        let traces = slots
            .iter()
            .enumerate()
            .map(|(node, slot)| {
                let player = topology.identity(node);
                let (status, header) = match slot {
                    Slot::Process { process, status } => {
                        rounds = rounds.max(process.rounds());
                        (*status, process.header())
                    }
                    Slot::Byzantine => (
                        ProcessStatus::Byzantine,
                        Header {
                            input: None,
                            key: player,
                            code: BYZANTINE_CODE.into(),
                        },
                    ),
                };
                ProcessTrace {
                    session: session.clone(),
                    node,
                    player,
                    status,
                    header,
                    rounds: Vec::new(),
                    output: None,
                }
            })
            .collect();
        Ok(SessionSim {
            session,
            topology,
            slots,
            traces,
            rounds,
            delivered: Vec::new(),
        })
    }

    pub fn session(&self) -> &SessionId {
        &self.session
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn is_byzantine(&self, node: NodeId) -> bool {
        matches!(self.slots.get(node), Some(Slot::Byzantine))
    }

    fn record(&mut self, round: usize) {
        for t in &mut self.traces {
            while t.rounds.len() <= round {
                t.rounds.push(RoundRecord::default());
            }
        }
    }

    /// Emissions of every process for `round`, routed to nodes.
    pub fn emit(&mut self, round: usize, signer: &dyn Signer) -> Result<Vec<RoundMessage>> {
        self.record(round);
        let mut out = Vec::new();
        for node in 0..self.slots.len() {
            let Slot::Process { process, .. } = &mut self.slots[node] else {
                continue;
            };
            let mut sent = Vec::new();
            for m in process.emit(round, signer)? {
                for &to in self.topology.resolve(node, m.to) {
                    sent.push(Sent {
                        to,
                        payload: m.payload.clone(),
                    });
                    out.push(RoundMessage {
                        session: self.session.clone(),
                        round,
                        from: node,
                        to,
                        payload: m.payload.clone(),
                    });
                }
            }
            sent.sort();
            self.traces[node].rounds[round].sent = sent;
        }
        Ok(out)
    }

    /// Hands every process its canonical inbox for `round`. `injected` are
    /// messages the adversary sends for Byzantine nodes.
    pub fn deliver(
        &mut self,
        round: usize,
        honest: &[RoundMessage],
        injected: &[RoundMessage],
        reg: &dyn Verify,
    ) -> Result<()> {
        self.record(round);
        let n = self.slots.len();
        let mut inboxes: Vec<Vec<Incoming>> = vec![Vec::new(); n];
        for m in injected {
            if m.session != self.session || m.round != round {
                return Err(Error::Transport(format!(
                    "injection for {}@{} delivered in {}@{}",
                    m.session, m.round, self.session, round
                )));
            }
            if m.from >= n || m.to >= n {
                return Err(Error::Transport(format!("no link {} -> {}", m.from, m.to)));
            }
            if !self.is_byzantine(m.from) {
                return Err(Error::Transport(format!(
                    "adversary tried to send as non-Byzantine node {} in {}",
                    m.from, self.session
                )));
            }
            self.traces[m.from].rounds[round].sent.push(Sent {
                to: m.to,
                payload: m.payload.clone(),
            });
        }
        for m in honest.iter().chain(injected) {
            inboxes[m.to].push(Incoming {
                from: self.topology.identity(m.from),
                payload: m.payload.clone(),
            });
            self.delivered.push(m.clone());
        }
        for (node, mut inbox) in inboxes.into_iter().enumerate() {
            inbox.sort();
            if let Slot::Process { process, .. } = &mut self.slots[node] {
                process.deliver(round, &inbox, reg);
                self.traces[node].output = process.output();
            } else {
                self.traces[node].rounds[round].sent.sort();
            }
            self.traces[node].rounds[round].received = inbox;
        }
        Ok(())
    }

    pub fn traces(&self) -> &[ProcessTrace] {
        &self.traces
    }

    pub fn delivered(&self) -> &[RoundMessage] {
        &self.delivered
    }

    pub fn into_parts(self) -> (Vec<ProcessTrace>, Vec<RoundMessage>) {
        (self.traces, self.delivered)
    }
}

/// Lockstep driver for several sessions sharing a round clock.
pub struct Simulation {
    sessions: Vec<SessionSim>,
}

/// Traces plus the delivered message log of a finished run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutput {
    pub traces: Vec<ProcessTrace>,
    pub messages: Vec<RoundMessage>,
}

impl Simulation {
    pub fn new(sessions: Vec<SessionSim>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &sessions {
            if !seen.insert(s.session.clone()) {
                return Err(Error::InvalidScenario(format!(
                    "duplicate session {}",
                    s.session
                )));
            }
        }
        Ok(Simulation { sessions })
    }

    pub fn rounds(&self) -> usize {
        self.sessions.iter().map(|s| s.rounds).max().unwrap_or(0)
    }

    /// Runs every round: honest emissions, adversary (rushing), delivery.
    pub fn run(
        mut self,
        reg: &KeyRegistry,
        env: &AdversaryEnv<'_>,
        adversary: &mut dyn Adversary,
    ) -> Result<SimOutput> {
        for round in 0..self.rounds() {
            let mut honest = Vec::new();
            for s in &mut self.sessions {
                honest.extend(s.emit(round, reg)?);
            }
            let injected = adversary.on_round(env, round, &honest)?;
            let mut by_session: BTreeMap<SessionId, Vec<RoundMessage>> = BTreeMap::new();
            for m in injected {
                if !self.sessions.iter().any(|s| s.session == m.session) {
                    return Err(Error::Transport(format!(
                        "injection into unknown session {}",
                        m.session
                    )));
                }
                by_session.entry(m.session.clone()).or_default().push(m);
            }
            for s in &mut self.sessions {
                let own: Vec<RoundMessage> = honest
                    .iter()
                    .filter(|m| m.session == s.session)
                    .cloned()
                    .collect();
                let inj = by_session.remove(&s.session).unwrap_or_default();
                s.deliver(round, &own, &inj, reg)?;
            }
        }
        let mut traces = Vec::new();
        let mut messages = Vec::new();
        for s in self.sessions {
            let (t, m) = s.into_parts();
            traces.extend(t);
            messages.extend(m);
        }
        Ok(SimOutput { traces, messages })
    }
}
