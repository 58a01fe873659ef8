//! EIGPrune+ and EIGPrune process state machines.

use serde::{Deserialize, Serialize};

use crate::auth::{PlayerId, SessionId, Signer, Verify};
use crate::eig::{general_body, EigTree, TreeContext, Value};
use crate::engine::wire::{self, Payload};
use crate::error::{Error, Result};

/// Which protocol a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProtocolKind {
    /// Composable, session-aware; `t + 1` relay rounds.
    EigPrunePlus,
    /// Stand-alone mixed-adversary baseline; `t_b + t_p + 1` relay rounds.
    EigPrune { t_b: usize, t_p: usize },
}

impl ProtocolKind {
    pub fn depth(&self, t: usize) -> usize {
        match *self {
            ProtocolKind::EigPrunePlus => t + 1,
            ProtocolKind::EigPrune { t_b, t_p } => t_b + t_p + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub depth: usize,
    pub v0: Value,
    pub general: PlayerId,
}

impl ProtocolParams {
    pub fn new(
        n: usize,
        kind: ProtocolKind,
        t: usize,
        v0: Value,
        general: PlayerId,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidScenario("n must be at least 1".into()));
        }
        if general.index() >= n {
            return Err(Error::InvalidScenario(format!(
                "general {general} not in 0..{n}"
            )));
        }
        Ok(ProtocolParams {
            n,
            depth: kind.depth(t),
            v0,
            general,
        })
    }

    /// Identity of the code a process runs. Both variants share one
    /// implementation, so equal depth means equal code.
    pub fn code_id(&self) -> String {
        format!(
            "eig-prune/usid;n={};depth={};v0={}",
            self.n, self.depth, self.v0
        )
    }

    /// Rounds a process takes part in: the General's round plus the relays.
    pub fn rounds(&self) -> usize {
        self.depth + 1
    }
}

/// Where a process wants a payload sent, by local name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Address {
    /// The (first) neighbour known under this name.
    Name(PlayerId),
    /// Every neighbour known under this name.
    AllInstances(PlayerId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: Address,
    pub payload: Vec<u8>,
}

/// A delivered message as seen by the receiver: sender name and bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Incoming {
    pub from: PlayerId,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
}

pub(crate) mod hex_bytes {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(D::Error::custom)
    }
}

/// The fixed part of a process view: input, key identity and code identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub input: Option<Value>,
    pub key: PlayerId,
    pub code: String,
}

/// A synchronous process driven round by round by the engine.
///
/// Each round the engine first calls `emit` on every process, lets the
/// adversary act, then calls `deliver` with the canonical inbox.
pub trait NodeProcess: Send {
    fn player(&self) -> PlayerId;
    fn header(&self) -> Header;
    fn rounds(&self) -> usize;
    fn emit(&mut self, round: usize, signer: &dyn Signer) -> Result<Vec<Outgoing>>;
    fn deliver(&mut self, round: usize, inbox: &[Incoming], reg: &dyn Verify);
    fn output(&self) -> Option<Value>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    General,
    NonGeneral,
}

/// One player's process in one session.
#[derive(Debug, Clone)]
pub struct ProcessState {
    params: ProtocolParams,
    player: PlayerId,
    session: SessionId,
    input: Option<Value>,
    tree: EigTree,
    round: usize,
    output: Option<Value>,
}

impl ProcessState {
    /// `input` is the General's input and must be `None` for everyone else.
    pub fn new(
        params: ProtocolParams,
        player: PlayerId,
        session: SessionId,
        input: Option<Value>,
    ) -> Result<Self> {
        if player.index() >= params.n {
            return Err(Error::InvalidScenario(format!(
                "player {player} not in 0..{}",
                params.n
            )));
        }
        if input.is_some() && player != params.general {
            return Err(Error::InvalidScenario(format!(
                "{player} is not the General but has an input"
            )));
        }
        let tree = EigTree::new(params.n, params.depth)?;
        Ok(ProcessState {
            params,
            player,
            session,
            input,
            tree,
            round: 0,
            output: None,
        })
    }

    pub fn role(&self) -> Role {
        if self.player == self.params.general {
            Role::General
        } else {
            Role::NonGeneral
        }
    }

    pub fn session(&self) -> &SessionId {
        &self.session
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn tree(&self) -> &EigTree {
        &self.tree
    }

    pub fn round(&self) -> usize {
        self.round
    }

    fn ctx(&self) -> TreeContext {
        TreeContext {
            session: self.session.clone(),
            general: self.params.general,
            me: Some(self.player),
        }
    }

    fn broadcast(&self, payload: Vec<u8>) -> Vec<Outgoing> {
        (0..self.params.n)
            .map(|p| Outgoing {
                to: Address::Name(PlayerId::from_index(p)),
                payload: payload.clone(),
            })
            .collect()
    }

    /// Round 0 send of the General: a signed value to every player, itself included.
    pub fn general_broadcast(&self, signer: &dyn Signer) -> Result<Vec<Outgoing>> {
        if self.role() != Role::General {
            return Err(Error::InvalidScenario(format!(
                "{} is not the General of {}",
                self.player, self.session
            )));
        }
        let value = self
            .input
            .ok_or_else(|| Error::InvalidScenario("General has no input".into()))?;
        let sig = signer.sign(self.player, &self.session, &general_body(value))?;
        let bytes = wire::encode(&Payload::Value {
            session: self.session.clone(),
            value,
            sig,
        })?;
        Ok(self.broadcast(bytes))
    }

    /// Delivers `inbox` for the current round and emits for the next one.
    /// The first call is preceded by `start`.
    pub fn step(
        &mut self,
        inbox: &[Incoming],
        signer: &dyn Signer,
        reg: &dyn Verify,
    ) -> Result<Vec<Outgoing>> {
        let r = self.round;
        self.deliver(r, inbox, reg);
        self.emit(r + 1, signer)
    }

    /// Round 0 emission.
    pub fn start(&mut self, signer: &dyn Signer) -> Result<Vec<Outgoing>> {
        self.emit(0, signer)
    }

    pub fn is_done(&self) -> bool {
        self.output.is_some()
    }
}

impl NodeProcess for ProcessState {
    fn player(&self) -> PlayerId {
        self.player
    }

    fn header(&self) -> Header {
        Header {
            input: self.input,
            key: self.player,
            code: self.params.code_id(),
        }
    }

    fn rounds(&self) -> usize {
        self.params.rounds()
    }

    fn emit(&mut self, round: usize, signer: &dyn Signer) -> Result<Vec<Outgoing>> {
        if round == 0 {
            if self.role() == Role::General && self.input.is_some() {
                return self.general_broadcast(signer);
            }
            return Ok(Vec::new());
        }
        if round > self.params.depth {
            return Ok(Vec::new());
        }
        let relays = self
            .tree
            .outgoing_relays(round, self.player, signer, &self.session)?;
        let mut out = Vec::new();
        for r in relays {
            out.extend(self.broadcast(wire::encode(&Payload::Relay(r))?));
        }
        Ok(out)
    }

    fn deliver(&mut self, round: usize, inbox: &[Incoming], reg: &dyn Verify) {
        if self.output.is_some() || round > self.params.depth {
            return;
        }
        let ctx = self.ctx();
        if round == 0 {
            for m in inbox {
                if m.from != self.params.general || self.tree.root().is_some() {
                    continue;
                }
                if let Ok(Payload::Value {
                    session,
                    value,
                    sig,
                }) = wire::decode(&m.payload)
                {
                    if session == ctx.session
                        && reg.verify(ctx.general, &ctx.session, &general_body(value), &sig)
                    {
                        // cannot fail: root checked empty above
                        let _ = self.tree.set_root_input(value, sig);
                    }
                }
            }
        } else {
            for m in inbox {
                if let Ok(Payload::Relay(r)) = wire::decode(&m.payload) {
                    self.tree.absorb_one(round, m.from, &r, reg, &ctx);
                }
            }
        }
        self.round = round + 1;
        if round == self.params.depth {
            self.tree.prune();
            self.output = Some(self.tree.decide(self.params.v0));
        }
    }

    fn output(&self) -> Option<Value> {
        self.output
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::KeyRegistry;

    fn p(i: u16) -> PlayerId {
        PlayerId(i)
    }

    /// Direct lockstep loop over a complete network, no adversary.
    fn fault_free(n: usize, t: usize, v: Value) -> Vec<Option<Value>> {
        let reg = KeyRegistry::gen_keys(n).unwrap();
        let sid = SessionId::new("E1");
        let params =
            ProtocolParams::new(n, ProtocolKind::EigPrunePlus, t, Value::Zero, p(0)).unwrap();
        let mut procs: Vec<ProcessState> = (0..n)
            .map(|i| {
                let input = (i == 0).then_some(v);
                ProcessState::new(params.clone(), PlayerId::from_index(i), sid.clone(), input)
                    .unwrap()
            })
            .collect();
        let mut out: Vec<Vec<Outgoing>> =
            procs.iter_mut().map(|s| s.start(&reg).unwrap()).collect();
        for _ in 0..params.rounds() {
            let mut inboxes = vec![Vec::new(); n];
            for (from, msgs) in out.iter().enumerate() {
                for m in msgs {
                    let Address::Name(to) = m.to else {
                        unreachable!()
                    };
                    inboxes[to.index()].push(Incoming {
                        from: PlayerId::from_index(from),
                        payload: m.payload.clone(),
                    });
                }
            }
            out = procs
                .iter_mut()
                .zip(&mut inboxes)
                .map(|(s, inbox)| {
                    inbox.sort();
                    s.step(inbox, &reg, &reg).unwrap()
                })
                .collect();
        }
        procs.iter().map(|s| s.output()).collect()
    }

    #[test]
    fn fault_free_n3_t1() {
        assert_eq!(fault_free(3, 1, Value::One), vec![Some(Value::One); 3]);
    }

    #[test]
    fn general_broadcast_checks() {
        let reg = KeyRegistry::gen_keys(3).unwrap();
        let params =
            ProtocolParams::new(3, ProtocolKind::EigPrunePlus, 1, Value::Zero, p(0)).unwrap();
        let g = ProcessState::new(params.clone(), p(0), "E1".into(), Some(Value::One)).unwrap();
        let msgs = g.general_broadcast(&reg).unwrap();
        assert_eq!(msgs.len(), 3);
        assert!(msgs.iter().all(|m| matches!(
            wire::decode(&m.payload).unwrap(),
            Payload::Value { value: Value::One, sig, .. } if sig.issuer == p(0)
        )));
        let other = ProcessState::new(params.clone(), p(1), "E1".into(), None).unwrap();
        assert!(other.general_broadcast(&reg).is_err());
        let silent = ProcessState::new(params.clone(), p(0), "E1".into(), None).unwrap();
        assert!(silent.general_broadcast(&reg).is_err());
        assert!(ProcessState::new(params, p(1), "E1".into(), Some(Value::One)).is_err());
    }

    #[test]
    fn silent_general_yields_default() {
        let reg = KeyRegistry::gen_keys(3).unwrap();
        let params =
            ProtocolParams::new(3, ProtocolKind::EigPrunePlus, 1, Value::One, p(0)).unwrap();
        let mut s = ProcessState::new(params, p(1), "E1".into(), None).unwrap();
        for _ in 0..3 {
            assert!(s.step(&[], &reg, &reg).unwrap().is_empty());
        }
        assert_eq!(s.output(), Some(Value::One));
        assert!(s.is_done());
    }

    #[test]
    fn wrong_session_value_ignored() {
        let reg = KeyRegistry::gen_keys(3).unwrap();
        let params =
            ProtocolParams::new(3, ProtocolKind::EigPrunePlus, 1, Value::Zero, p(0)).unwrap();
        let g2 = ProcessState::new(params.clone(), p(0), "E2".into(), Some(Value::One)).unwrap();
        let foreign = g2.general_broadcast(&reg).unwrap();
        let mut s = ProcessState::new(params, p(1), "E1".into(), None).unwrap();
        s.step(
            &[Incoming {
                from: p(0),
                payload: foreign[1].payload.clone(),
            }],
            &reg,
            &reg,
        )
        .unwrap();
        assert!(s.tree().root().is_none());
    }

    #[test]
    fn fault_free_validity_small() {
        for n in 1..=5 {
            for t in 0..=2 {
                for v in Value::ALL {
                    let outs = fault_free(n, t, v);
                    assert!(
                        outs.iter().all(|o| *o == Some(v)),
                        "n={n} t={t} v={v}: {outs:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn depth_by_kind() {
        assert_eq!(ProtocolKind::EigPrunePlus.depth(2), 3);
        assert_eq!(ProtocolKind::EigPrune { t_b: 1, t_p: 2 }.depth(0), 4);
    }
}
