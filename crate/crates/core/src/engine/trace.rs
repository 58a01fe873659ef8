use serde::{Deserialize, Serialize};

use crate::adversary::ProcessStatus;
use crate::auth::{PlayerId, SessionId};
use crate::eig::Value;
use crate::protocol::{hex_bytes, Header, Incoming};

/// Index of a process slot in a topology.
pub type NodeId = usize;

/// One message on one link in one round of one session.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RoundMessage {
    pub session: SessionId,
    pub round: usize,
    pub from: NodeId,
    pub to: NodeId,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sent {
    pub to: NodeId,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub received: Vec<Incoming>,
    pub sent: Vec<Sent>,
}

/// Everything one process saw and did in one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessTrace {
    pub session: SessionId,
    pub node: NodeId,
    pub player: PlayerId,
    pub status: ProcessStatus,
    pub header: Header,
    pub rounds: Vec<RoundRecord>,
    pub output: Option<Value>,
}

impl ProcessTrace {
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("traces serialize")
    }

    /// Messages received in `round`, or an empty slice past the end.
    pub fn received(&self, round: usize) -> &[Incoming] {
        self.rounds.get(round).map_or(&[], |r| &r.received)
    }
}
