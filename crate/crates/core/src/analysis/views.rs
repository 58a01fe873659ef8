use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::auth::PlayerId;
use crate::engine::ProcessTrace;

/// Where two views first differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Divergence {
    Input,
    Key,
    Code,
    /// Messages from `sender` in `round` differ as multisets.
    Message {
        round: usize,
        sender: PlayerId,
    },
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Input => f.write_str("input differs"),
            Divergence::Key => f.write_str("key identity differs"),
            Divergence::Code => f.write_str("code identity differs"),
            Divergence::Message { round, sender } => write!(f, "round {round}, sender {sender}"),
        }
    }
}

fn by_sender(t: &ProcessTrace, round: usize) -> BTreeMap<PlayerId, Vec<&[u8]>> {
    let mut m: BTreeMap<PlayerId, Vec<&[u8]>> = BTreeMap::new();
    for inc in t.received(round) {
        m.entry(inc.from).or_default().push(&inc.payload);
    }
    for v in m.values_mut() {
        v.sort();
    }
    m
}

/// First point where the views of `a` and `b` differ. Outputs and sent
/// messages are not part of a view.
pub fn first_divergence(a: &ProcessTrace, b: &ProcessTrace) -> Option<Divergence> {
    if a.header.input != b.header.input {
        return Some(Divergence::Input);
    }
    if a.header.key != b.header.key {
        return Some(Divergence::Key);
    }
    if a.header.code != b.header.code {
        return Some(Divergence::Code);
    }
    for round in 0..a.rounds.len().max(b.rounds.len()) {
        let (x, y) = (by_sender(a, round), by_sender(b, round));
        let mut senders: Vec<_> = x.keys().chain(y.keys()).copied().collect();
        senders.sort();
        senders.dedup();
        for sender in senders {
            if x.get(&sender) != y.get(&sender) {
                return Some(Divergence::Message { round, sender });
            }
        }
    }
    None
}

pub fn views_equal(a: &ProcessTrace, b: &ProcessTrace) -> bool {
    first_divergence(a, b).is_none()
}
