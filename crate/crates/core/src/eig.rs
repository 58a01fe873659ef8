//! Exponential information gathering tree with signed relays, Prune and the
//! majority decision.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::{AuthError, PlayerId, SessionId, Signature, Signer, Verify};

/// Binary broadcast value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Value {
    Zero,
    One,
}

impl Value {
    pub fn as_u8(self) -> u8 {
        match self {
            Value::Zero => 0,
            Value::One => 1,
        }
    }

    pub fn from_u8(b: u8) -> Option<Value> {
        match b {
            0 => Some(Value::Zero),
            1 => Some(Value::One),
            _ => None,
        }
    }

    pub fn flip(self) -> Value {
        match self {
            Value::Zero => Value::One,
            Value::One => Value::Zero,
        }
    }

    pub const ALL: [Value; 2] = [Value::Zero, Value::One];
}

impl From<Value> for u8 {
    fn from(v: Value) -> u8 {
        v.as_u8()
    }
}

impl TryFrom<u8> for Value {
    type Error = String;
    fn try_from(b: u8) -> Result<Self, String> {
        Value::from_u8(b).ok_or_else(|| format!("value must be 0 or 1, got {b}"))
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Path of distinct player ids; the empty path is the root.
pub type Label = Vec<PlayerId>;

pub fn label_string(label: &[PlayerId]) -> String {
    label
        .iter()
        .map(|p| p.0.to_string())
        .collect::<Vec<_>>()
        .join(".")
}

/// Bytes the General signs in round 0.
pub fn general_body(value: Value) -> Vec<u8> {
    vec![b'G', value.as_u8()]
}

/// Bytes a relayer signs: value plus the full path up to and including itself.
pub fn relay_body(value: Value, path: &[PlayerId]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 2 * path.len());
    out.push(b'R');
    out.push(value.as_u8());
    out.extend_from_slice(&(path.len() as u16).to_be_bytes());
    for p in path {
        out.extend_from_slice(&p.0.to_be_bytes());
    }
    out
}

/// Session binding shared by every tree operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeContext {
    pub session: SessionId,
    pub general: PlayerId,
    /// Owner of the tree. A chain through the owner that the owner never
    /// signed is only kept at full depth.
    pub me: Option<PlayerId>,
}

/// The wire unit of authenticated EIGStop.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignedRelay {
    pub session: SessionId,
    pub value: Value,
    pub path: Label,
    /// The General's round-0 signature on `value`.
    pub origin: Signature,
    /// One signature per path element, `sigs[k]` over the path prefix `..=k`.
    pub sigs: Vec<Signature>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Reject {
    WrongSession,
    WrongLength,
    SenderMismatch,
    BadPath,
    BadOrigin,
    BadChain,
    Pruned,
    Duplicate,
    ForgedSelf,
}

impl SignedRelay {
    /// Checks everything about a relay that does not depend on tree state.
    pub fn check(
        &self,
        round: usize,
        from: PlayerId,
        n: usize,
        reg: &dyn Verify,
        ctx: &TreeContext,
    ) -> Result<(), Reject> {
        if self.session != ctx.session {
            return Err(Reject::WrongSession);
        }
        if self.path.len() != round || self.sigs.len() != self.path.len() {
            return Err(Reject::WrongLength);
        }
        if self.path.last() != Some(&from) {
            return Err(Reject::SenderMismatch);
        }
        let mut seen = BTreeSet::new();
        if !self.path.iter().all(|p| p.index() < n && seen.insert(*p)) {
            return Err(Reject::BadPath);
        }
        if !reg.verify(
            ctx.general,
            &ctx.session,
            &general_body(self.value),
            &self.origin,
        ) {
            return Err(Reject::BadOrigin);
        }
        for (k, sig) in self.sigs.iter().enumerate() {
            let body = relay_body(self.value, &self.path[..=k]);
            if !reg.verify(self.path[k], &ctx.session, &body, sig) {
                return Err(Reject::BadChain);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub value: Value,
    pub origin: Signature,
    pub sigs: Vec<Signature>,
    /// A second verified relay with a different value reached this label.
    pub conflicting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Root {
    pub value: Value,
    pub origin: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("a tree needs at least one player")]
    ZeroPlayers,
    #[error("a tree needs depth at least one")]
    ZeroDepth,
    #[error("root input already set")]
    RootAlreadySet,
    #[error("round {round} outside 1..={depth}")]
    RoundOutOfRange { round: usize, depth: usize },
    #[error(transparent)]
    Auth(#[from] AuthError),
}

/// Outcome of absorbing one relay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absorbed {
    Stored,
    Conflict,
    Rejected(Reject),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EigTree {
    n: usize,
    depth: usize,
    root: Option<Root>,
    nodes: BTreeMap<Label, Entry>,
    pruned: BTreeSet<PlayerId>,
}

impl EigTree {
    pub fn new(n: usize, depth: usize) -> Result<Self, TreeError> {
        if n == 0 {
            return Err(TreeError::ZeroPlayers);
        }
        if depth == 0 {
            return Err(TreeError::ZeroDepth);
        }
        Ok(EigTree {
            n,
            depth,
            root: None,
            nodes: BTreeMap::new(),
            pruned: BTreeSet::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of distinct-id labels at level `k`: n(n-1)...(n-k+1).
    pub fn level_capacity(&self, k: usize) -> usize {
        if k > self.n {
            return 0;
        }
        (0..k).map(|i| self.n - i).product()
    }

    pub fn root(&self) -> Option<&Root> {
        self.root.as_ref()
    }

    pub fn set_root_input(&mut self, value: Value, origin: Signature) -> Result<(), TreeError> {
        if self.root.is_some() {
            return Err(TreeError::RootAlreadySet);
        }
        self.root = Some(Root { value, origin });
        Ok(())
    }

    pub fn get(&self, label: &[PlayerId]) -> Option<&Entry> {
        self.nodes.get(label)
    }

    pub fn value(&self, label: &[PlayerId]) -> Option<Value> {
        if label.is_empty() {
            return self.root.as_ref().map(|r| r.value);
        }
        self.nodes.get(label).map(|e| e.value)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Label, &Entry)> {
        self.nodes.iter()
    }

    pub fn level(&self, k: usize) -> impl Iterator<Item = (&Label, &Entry)> {
        self.nodes.iter().filter(move |(l, _)| l.len() == k)
    }

    pub fn pruned(&self) -> &BTreeSet<PlayerId> {
        &self.pruned
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none() && self.nodes.is_empty()
    }

    /// EIGStop send rule for `round` in `1..=depth`.
    pub fn outgoing_relays(
        &self,
        round: usize,
        me: PlayerId,
        signer: &dyn Signer,
        session: &SessionId,
    ) -> Result<Vec<SignedRelay>, TreeError> {
        if round == 0 || round > self.depth {
            return Err(TreeError::RoundOutOfRange {
                round,
                depth: self.depth,
            });
        }
        let mut out = Vec::new();
        if round == 1 {
            if let Some(root) = &self.root {
                let path = vec![me];
                let sig = signer.sign(me, session, &relay_body(root.value, &path))?;
                out.push(SignedRelay {
                    session: session.clone(),
                    value: root.value,
                    path,
                    origin: root.origin.clone(),
                    sigs: vec![sig],
                });
            }
            return Ok(out);
        }
        for (label, entry) in self.level(round - 1) {
            if label.contains(&me) {
                continue;
            }
            let mut path = label.clone();
            path.push(me);
            let sig = signer.sign(me, session, &relay_body(entry.value, &path))?;
            let mut sigs = entry.sigs.clone();
            sigs.push(sig);
            out.push(SignedRelay {
                session: session.clone(),
                value: entry.value,
                path,
                origin: entry.origin.clone(),
                sigs,
            });
        }
        Ok(out)
    }

    /// Verifies and stores one relay received from transport sender `from`.
    pub fn absorb_one(
        &mut self,
        round: usize,
        from: PlayerId,
        relay: &SignedRelay,
        reg: &dyn Verify,
        ctx: &TreeContext,
    ) -> Absorbed {
        if round == 0 || round > self.depth {
            return Absorbed::Rejected(Reject::WrongLength);
        }
        if let Err(r) = relay.check(round, from, self.n, reg, ctx) {
            return Absorbed::Rejected(r);
        }
        if self.pruned.contains(&relay.path[0]) {
            return Absorbed::Rejected(Reject::Pruned);
        }
        if let Some(i) = ctx
            .me
            .and_then(|me| relay.path.iter().position(|q| *q == me))
        {
            if relay.path.len() < self.depth && !self.signed(&relay.path[..i], relay.value) {
                return Absorbed::Rejected(Reject::ForgedSelf);
            }
        }
        match self.nodes.get_mut(&relay.path) {
            Some(e) if e.value == relay.value => Absorbed::Rejected(Reject::Duplicate),
            Some(e) => {
                e.conflicting = true;
                Absorbed::Conflict
            }
            None => {
                self.nodes.insert(
                    relay.path.clone(),
                    Entry {
                        value: relay.value,
                        origin: relay.origin.clone(),
                        sigs: relay.sigs.clone(),
                        conflicting: false,
                    },
                );
                Absorbed::Stored
            }
        }
    }

    /// Whether the owner relayed `prefix` with `value`, i.e. holds it.
    fn signed(&self, prefix: &[PlayerId], value: Value) -> bool {
        if prefix.is_empty() {
            self.root.as_ref().is_some_and(|r| r.value == value)
        } else {
            self.nodes.get(prefix).is_some_and(|e| e.value == value)
        }
    }

    pub fn absorb<'a>(
        &mut self,
        round: usize,
        incoming: impl IntoIterator<Item = (PlayerId, &'a SignedRelay)>,
        reg: &dyn Verify,
        ctx: &TreeContext,
    ) -> Vec<Absorbed> {
        incoming
            .into_iter()
            .map(|(from, r)| self.absorb_one(round, from, r, reg, ctx))
            .collect()
    }

    /// `W_j`: distinct stored values in the subtree rooted at `[j]`.
    pub fn w_set(&self, j: PlayerId) -> BTreeSet<Value> {
        self.nodes
            .range(vec![j]..)
            .take_while(|(l, _)| l[0] == j)
            .map(|(_, e)| e.value)
            .collect()
    }

    /// Deletes every level-1 subtree whose `W_j` holds more than one value.
    pub fn prune(&mut self) {
        let doomed: BTreeSet<PlayerId> = (0..self.n)
            .map(PlayerId::from_index)
            .filter(|j| self.w_set(*j).len() > 1)
            .collect();
        self.nodes.retain(|l, _| !doomed.contains(&l[0]));
        self.pruned.extend(doomed);
    }

    /// One vote per surviving level-1 subtree that holds a value.
    pub fn votes(&self) -> Vec<Value> {
        (0..self.n)
            .map(PlayerId::from_index)
            .filter(|j| !self.pruned.contains(j))
            .filter_map(|j| {
                let w = self.w_set(j);
                (w.len() == 1).then(|| *w.iter().next().unwrap())
            })
            .collect()
    }

    /// Strict majority of the votes, otherwise `v0`.
    pub fn decide(&self, v0: Value) -> Value {
        majority(&self.votes(), v0)
    }

    /// Flat `label -> value` rendering; the root is the empty string.
    pub fn render(&self) -> BTreeMap<String, u8> {
        let mut out = BTreeMap::new();
        if let Some(r) = &self.root {
            out.insert(String::new(), r.value.as_u8());
        }
        for (l, e) in &self.nodes {
            out.insert(label_string(l), e.value.as_u8());
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn insert_raw(&mut self, label: Label, entry: Entry) {
        self.nodes.insert(label, entry);
    }
}

pub fn majority(votes: &[Value], v0: Value) -> Value {
    let ones = votes.iter().filter(|v| **v == Value::One).count();
    let zeros = votes.len() - ones;
    if 2 * ones > votes.len() {
        Value::One
    } else if 2 * zeros > votes.len() {
        Value::Zero
    } else {
        v0
    }
}
