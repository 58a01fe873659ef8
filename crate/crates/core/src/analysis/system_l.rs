//! The six-node system L: two copies of a three-player protocol, rewired so
//! every node keeps the in-neighbourhood its namesake has in the plain
//! three-player network N.
//!
//! ```text
//!   node  name  input   sends to A      sends to B   sends to C
//!   A     A     0       itself          B            C'
//!   B     B     -       A, A'           itself       C
//!   C     C     -       A, A'           B            itself
//!   A'    A     1       itself          B'           C
//!   B'    B     -       (none)          itself       C'
//!   C'    C     -       (none)          B'           itself
//! ```
//!
//! B and C run the multicast variant of the protocol; A and A' share A's key.

use std::collections::BTreeMap;
use std::fmt;

use crate::adversary::{Alpha, CorruptionPlan, Silent, StrategyId};
use crate::auth::{KeyRegistry, PlayerId, SessionId, Signer, Verify};
use crate::eig::Value;
use crate::engine::{
    run, NodeId, ProcessTrace, RunResult, Scenario, SessionSim, SessionSpec, Simulation, Slot,
    Topology,
};
use crate::error::Result;
use crate::protocol::{
    Address, Header, Incoming, NodeProcess, Outgoing, ProcessState, ProtocolKind, ProtocolParams,
};

use super::views::{first_divergence, Divergence};

const A: PlayerId = PlayerId(0);
const B: PlayerId = PlayerId(1);
const C: PlayerId = PlayerId(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LNode {
    A,
    B,
    C,
    APrime,
    BPrime,
    CPrime,
}

impl LNode {
    pub const ALL: [LNode; 6] = [
        LNode::A,
        LNode::B,
        LNode::C,
        LNode::APrime,
        LNode::BPrime,
        LNode::CPrime,
    ];

    pub fn index(self) -> NodeId {
        self as usize
    }

    pub fn identity(self) -> PlayerId {
        match self {
            LNode::A | LNode::APrime => A,
            LNode::B | LNode::BPrime => B,
            LNode::C | LNode::CPrime => C,
        }
    }
}

impl fmt::Display for LNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LNode::A => "A",
            LNode::B => "B",
            LNode::C => "C",
            LNode::APrime => "A'",
            LNode::BPrime => "B'",
            LNode::CPrime => "C'",
        })
    }
}

pub fn l_topology() -> Topology {
    use LNode::*;
    let table: [[&[LNode]; 3]; 6] = [
        [&[A], &[B], &[CPrime]],
        [&[A, APrime], &[B], &[C]],
        [&[A, APrime], &[B], &[C]],
        [&[APrime], &[BPrime], &[C]],
        [&[], &[BPrime], &[CPrime]],
        [&[], &[BPrime], &[CPrime]],
    ];
    let routes = table
        .iter()
        .map(|row| {
            [A, B, C]
                .iter()
                .zip(row)
                .map(|(name, targets)| {
                    (name.identity(), targets.iter().map(|t| t.index()).collect())
                })
                .collect::<BTreeMap<_, Vec<_>>>()
        })
        .collect();
    let identities = LNode::ALL.iter().map(|n| n.identity()).collect();
    Topology::new(identities, routes).expect("L wiring is consistent")
}

/// Sends addressed to `name` go to every local instance of that name.
pub struct PiPrime<P> {
    inner: P,
    name: PlayerId,
}

pub fn pi_prime<P: NodeProcess>(inner: P, name: PlayerId) -> PiPrime<P> {
    PiPrime { inner, name }
}

impl<P: NodeProcess> NodeProcess for PiPrime<P> {
    fn player(&self) -> PlayerId {
        self.inner.player()
    }

    fn header(&self) -> Header {
        self.inner.header()
    }

    fn rounds(&self) -> usize {
        self.inner.rounds()
    }

    fn emit(&mut self, round: usize, signer: &dyn Signer) -> Result<Vec<Outgoing>> {
        let mut out = self.inner.emit(round, signer)?;
        for m in &mut out {
            if m.to == Address::Name(self.name) {
                m.to = Address::AllInstances(self.name);
            }
        }
        Ok(out)
    }

    fn deliver(&mut self, round: usize, inbox: &[Incoming], reg: &dyn Verify) {
        self.inner.deliver(round, inbox, reg)
    }

    fn output(&self) -> Option<Value> {
        self.inner.output()
    }
}

pub const L_SESSION: &str = "E1";

/// Outcome of the all-honest run of L.
pub struct LRun {
    pub traces: Vec<ProcessTrace>,
}

impl LRun {
    pub fn trace(&self, node: LNode) -> &ProcessTrace {
        &self.traces[node.index()]
    }

    pub fn output(&self, node: LNode) -> Option<Value> {
        self.trace(node).output
    }
}

fn params(t: usize) -> ProtocolParams {
    ProtocolParams::new(3, ProtocolKind::EigPrunePlus, t, Value::Zero, A).expect("n = 3 parameters")
}

/// Runs L honestly with A holding 0 and A' holding 1.
pub fn run_l(t: usize) -> Result<LRun> {
    let sid = SessionId::new(L_SESSION);
    let p = params(t);
    let reg = KeyRegistry::gen_keys(3)?;
    let mut slots = Vec::new();
    for node in LNode::ALL {
        let input = match node {
            LNode::A => Some(Value::Zero),
            LNode::APrime => Some(Value::One),
            _ => None,
        };
        let proc = ProcessState::new(p.clone(), node.identity(), sid.clone(), input)?;
        slots.push(if node.identity() == A {
            Slot::honest(proc)
        } else {
            Slot::honest(pi_prime(proc, A))
        });
    }
    let sessions = [SessionSpec::new(L_SESSION, 0, Value::Zero)];
    let plan = CorruptionPlan::none();
    let env = crate::adversary::AdversaryEnv::new(
        3,
        t,
        Value::Zero,
        ProtocolKind::EigPrunePlus,
        &sessions,
        &plan,
        &reg,
    );
    let sim = Simulation::new(vec![SessionSim::new(sid, l_topology(), slots)?])?;
    let out = sim.run(&reg, &env, &mut Silent)?;
    Ok(LRun { traces: out.traces })
}

/// Scenario N for one of the scripted strategies, three players, two sessions,
/// A General in both.
pub fn n_scenario(which: Alpha, t: usize) -> Scenario {
    let (input, plan, strategy) = match which {
        Alpha::One => (
            Value::Zero,
            CorruptionPlan::none()
                .byzantine("E1", &[2])
                .byzantine("E2", &[0]),
            StrategyId::Alpha1,
        ),
        Alpha::Two => (
            Value::Zero,
            CorruptionPlan::none().byzantine("E1", &[0]),
            StrategyId::Alpha2,
        ),
        Alpha::Three => (
            Value::One,
            CorruptionPlan::none()
                .byzantine("E1", &[1])
                .byzantine("E2", &[0]),
            StrategyId::Alpha3,
        ),
    };
    Scenario::plus(
        3,
        t,
        vec![
            SessionSpec::new("E1", 0, input),
            SessionSpec::new("E2", 0, Value::Zero),
        ],
    )
    .with_plan(plan)
    .with_strategy(strategy)
}

pub fn run_n(which: Alpha, t: usize) -> Result<RunResult> {
    run(&n_scenario(which, t))
}

/// The six pairings: the L node, the N scenario, and the player in its first session.
pub const VIEW_PAIRINGS: [(LNode, Alpha, PlayerId); 6] = [
    (LNode::A, Alpha::One, A),
    (LNode::B, Alpha::One, B),
    (LNode::B, Alpha::Two, B),
    (LNode::C, Alpha::Two, C),
    (LNode::C, Alpha::Three, C),
    (LNode::APrime, Alpha::Three, A),
];

/// Compares one pairing; `None` means the views are equal.
pub fn check_pairing(
    l: &LRun,
    node: LNode,
    n_run: &RunResult,
    player: PlayerId,
) -> Option<Divergence> {
    let sid = SessionId::new(L_SESSION);
    match n_run.trace(&sid, player) {
        Some(t) => first_divergence(l.trace(node), t),
        None => Some(Divergence::Key),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn in_neighbourhoods_match_n() {
        let top = l_topology();
        for node in LNode::ALL {
            let mut names: Vec<PlayerId> = top
                .in_neighbours(node.index())
                .iter()
                .map(|s| top.identity(*s))
                .collect();
            names.sort();
            assert_eq!(names, vec![A, B, C], "in-neighbourhood of {node}");
        }
    }

    #[test]
    fn pi_prime_in_n_is_identity() {
        let top = Topology::complete(3);
        assert_eq!(
            top.resolve(1, Address::AllInstances(A)),
            top.resolve(1, Address::Name(A))
        );
        let l = l_topology();
        assert_eq!(
            l.resolve(LNode::B.index(), Address::AllInstances(A)),
            &[0, 3]
        );
        assert_eq!(l.resolve(LNode::B.index(), Address::Name(A)), &[0]);
    }

    #[test]
    fn l_run_deterministic() {
        let a = run_l(2).unwrap();
        let b = run_l(2).unwrap();
        assert_eq!(a.traces, b.traces);
        assert!(LNode::ALL.iter().all(|n| a.output(*n).is_some()));
    }
}
