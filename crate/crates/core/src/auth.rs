//! Idealized, registry-backed signatures bound to session identifiers.
//!
//! A signature is a digest token the registry derives from a private per-player
//! secret and the session-prefixed message. Nothing outside this module can
//! read the secrets, so the only ways to obtain a valid token are honest
//! signing, adversarial signing with a leaked key, or the restricted oracle.

use std::cell::Cell;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Index of a player in `[0, n)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub u16);

impl PlayerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Self {
        PlayerId(u16::try_from(i).expect("player index fits in u16"))
    }
}

impl fmt::Debug for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Unique token of one parallel execution.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        SessionId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SessionId {
    fn from(s: &str) -> Self {
        SessionId::new(s)
    }
}

/// A message carrying its session prefix, `id ∘ body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixedMessage {
    pub session: SessionId,
    pub body: Vec<u8>,
}

impl PrefixedMessage {
    pub fn new(session: SessionId, body: impl Into<Vec<u8>>) -> Self {
        PrefixedMessage {
            session,
            body: body.into(),
        }
    }

    /// Length-prefixed session followed by the body; the prefix is unambiguous.
    pub fn to_bytes(&self) -> Vec<u8> {
        prefixed_bytes(&self.session, &self.body)
    }
}

fn prefixed_bytes(session: &SessionId, body: &[u8]) -> Vec<u8> {
    let sid = session.as_str().as_bytes();
    let mut out = Vec::with_capacity(4 + sid.len() + body.len());
    out.extend_from_slice(&(sid.len() as u32).to_be_bytes());
    out.extend_from_slice(sid);
    out.extend_from_slice(body);
    out
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub issuer: PlayerId,
    pub session: SessionId,
    #[serde(with = "hex_token")]
    pub token: [u8; 32],
}

impl Signature {
    pub fn token_hex(&self) -> String {
        hex::encode(self.token)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Sig({}@{}:{})",
            self.issuer,
            self.session,
            &self.token_hex()[..12]
        )
    }
}

mod hex_token {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(token: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(token))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(s).map_err(D::Error::custom)?;
        bytes
            .try_into()
            .map_err(|_| D::Error::custom("signature token must be 32 bytes"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("a key registry needs at least one player")]
    NoPlayers,
    #[error("unknown player {0}")]
    UnknownPlayer(PlayerId),
    #[error("forgery denied: the adversary does not hold the key of {0}")]
    ForgeryDenied(PlayerId),
    #[error("signing oracle refused a message prefixed with protected session {0}")]
    OracleRefused(SessionId),
}

/// Signature checking without any signing capability.
pub trait Verify {
    fn verify(&self, p: PlayerId, session: &SessionId, body: &[u8], sig: &Signature) -> bool;
}

/// Anything that can produce signatures for a player in a session.
pub trait Signer {
    fn sign(
        &self,
        player: PlayerId,
        session: &SessionId,
        body: &[u8],
    ) -> Result<Signature, AuthError>;
}

const KEY_DOMAIN: &[u8] = b"abg-registry-key/v1";
const TOKEN_DOMAIN: &[u8] = b"abg-ideal-signature/v1";

/// Trusted bookkeeper of every player's signing capability.
///
/// The leaked set is fixed during scenario setup and only grows.
#[derive(Clone)]
pub struct KeyRegistry {
    secrets: Vec<[u8; 32]>,
    leaked: BTreeSet<PlayerId>,
}

impl fmt::Debug for KeyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyRegistry")
            .field("players", &self.secrets.len())
            .field("leaked", &self.leaked)
            .finish()
    }
}

impl KeyRegistry {
    /// Keys for players `0..n` derived from the default setup seed.
    pub fn gen_keys(n: usize) -> Result<Self, AuthError> {
        Self::gen_keys_seeded(n, 0)
    }

    pub fn gen_keys_seeded(n: usize, seed: u64) -> Result<Self, AuthError> {
        if n == 0 {
            return Err(AuthError::NoPlayers);
        }
        let secrets = (0..n)
            .map(|p| {
                let mut h = Sha256::new();
                h.update(KEY_DOMAIN);
                h.update(seed.to_be_bytes());
                h.update((p as u64).to_be_bytes());
                h.finalize().into()
            })
            .collect();
        Ok(KeyRegistry {
            secrets,
            leaked: BTreeSet::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.secrets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.secrets.is_empty()
    }

    pub fn contains(&self, p: PlayerId) -> bool {
        p.index() < self.secrets.len()
    }

    fn check(&self, p: PlayerId) -> Result<(), AuthError> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(AuthError::UnknownPlayer(p))
        }
    }

    fn token(&self, p: PlayerId, prefixed: &[u8]) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(TOKEN_DOMAIN);
        h.update(self.secrets[p.index()]);
        h.update(p.0.to_be_bytes());
        h.update(prefixed);
        h.finalize().into()
    }

    fn issue(&self, p: PlayerId, session: &SessionId, body: &[u8]) -> Signature {
        Signature {
            issuer: p,
            session: session.clone(),
            token: self.token(p, &prefixed_bytes(session, body)),
        }
    }

    /// Honest signing through `p`'s own capability: `S(sk, id ∘ m)`.
    pub fn sign(
        &self,
        p: PlayerId,
        session: &SessionId,
        body: &[u8],
    ) -> Result<Signature, AuthError> {
        self.check(p)?;
        Ok(self.issue(p, session, body))
    }

    pub fn verify(&self, p: PlayerId, session: &SessionId, body: &[u8], sig: &Signature) -> bool {
        self.contains(p)
            && sig.issuer == p
            && &sig.session == session
            && sig.token == self.token(p, &prefixed_bytes(session, body))
    }

    pub fn leak_key(&mut self, p: PlayerId) -> Result<(), AuthError> {
        self.check(p)?;
        self.leaked.insert(p);
        Ok(())
    }

    pub fn leaked(&self) -> &BTreeSet<PlayerId> {
        &self.leaked
    }

    pub fn is_leaked(&self, p: PlayerId) -> bool {
        self.leaked.contains(&p)
    }

    /// Signing on behalf of `p` by the adversary; valid in every session once
    /// `p`'s key has leaked.
    pub fn adversary_sign(
        &self,
        p: PlayerId,
        session: &SessionId,
        body: &[u8],
    ) -> Result<Signature, AuthError> {
        self.check(p)?;
        if !self.is_leaked(p) {
            return Err(AuthError::ForgeryDenied(p));
        }
        Ok(self.issue(p, session, body))
    }

    /// `S_¬id`: signs any message whose session prefix is not `forbidden`,
    /// returns `None` (⊥) otherwise.
    pub fn oracle_sign_not_id(
        &self,
        p: PlayerId,
        forbidden: &SessionId,
        m: &PrefixedMessage,
    ) -> Result<Option<Signature>, AuthError> {
        self.check(p)?;
        if &m.session == forbidden {
            return Ok(None);
        }
        Ok(Some(self.issue(p, &m.session, &m.body)))
    }

    pub fn forger(&self) -> Forger<'_> {
        Forger(self)
    }
}

impl Verify for KeyRegistry {
    fn verify(&self, p: PlayerId, session: &SessionId, body: &[u8], sig: &Signature) -> bool {
        KeyRegistry::verify(self, p, session, body, sig)
    }
}

impl Signer for KeyRegistry {
    fn sign(&self, p: PlayerId, session: &SessionId, body: &[u8]) -> Result<Signature, AuthError> {
        KeyRegistry::sign(self, p, session, body)
    }
}

/// The adversary's signing capability: leaked keys only.
#[derive(Clone, Copy)]
pub struct Forger<'a>(&'a KeyRegistry);

impl<'a> Forger<'a> {
    pub fn can_forge(&self, p: PlayerId) -> bool {
        self.0.is_leaked(p)
    }

    pub fn verify(&self, p: PlayerId, session: &SessionId, body: &[u8], sig: &Signature) -> bool {
        self.0.verify(p, session, body, sig)
    }
}

impl Verify for Forger<'_> {
    fn verify(&self, p: PlayerId, session: &SessionId, body: &[u8], sig: &Signature) -> bool {
        self.0.verify(p, session, body, sig)
    }
}

impl Signer for Forger<'_> {
    fn sign(&self, p: PlayerId, session: &SessionId, body: &[u8]) -> Result<Signature, AuthError> {
        self.0.adversary_sign(p, session, body)
    }
}

/// Honest-player signing routed through `S_¬id` with one protected session.
/// Any refusal is reported as an error and counted.
pub struct RestrictedOracle<'a> {
    registry: &'a KeyRegistry,
    forbidden: SessionId,
    queries: Cell<usize>,
    refusals: Cell<usize>,
}

impl<'a> RestrictedOracle<'a> {
    pub fn new(registry: &'a KeyRegistry, forbidden: SessionId) -> Self {
        RestrictedOracle {
            registry,
            forbidden,
            queries: Cell::new(0),
            refusals: Cell::new(0),
        }
    }

    pub fn queries(&self) -> usize {
        self.queries.get()
    }

    pub fn refusals(&self) -> usize {
        self.refusals.get()
    }
}

impl Signer for RestrictedOracle<'_> {
    fn sign(&self, p: PlayerId, session: &SessionId, body: &[u8]) -> Result<Signature, AuthError> {
        self.queries.set(self.queries.get() + 1);
        let m = PrefixedMessage::new(session.clone(), body);
        match self.registry.oracle_sign_not_id(p, &self.forbidden, &m)? {
            Some(sig) => Ok(sig),
            None => {
                self.refusals.set(self.refusals.get() + 1);
                Err(AuthError::OracleRefused(self.forbidden.clone()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: u16) -> PlayerId {
        PlayerId(i)
    }

    #[test]
    fn gen_keys_sizes() {
        let reg = KeyRegistry::gen_keys(3).unwrap();
        assert_eq!(reg.len(), 3);
        assert!(reg.leaked().is_empty());
        assert_eq!(KeyRegistry::gen_keys(1).unwrap().len(), 1);
        assert_eq!(KeyRegistry::gen_keys(0).unwrap_err(), AuthError::NoPlayers);
    }

    #[test]
    fn leak_is_a_set() {
        let mut reg = KeyRegistry::gen_keys(4).unwrap();
        reg.leak_key(p(2)).unwrap();
        reg.leak_key(p(2)).unwrap();
        assert_eq!(reg.leaked().iter().copied().collect::<Vec<_>>(), vec![p(2)]);
        assert_eq!(reg.leak_key(p(9)), Err(AuthError::UnknownPlayer(p(9))));
    }

    #[test]
    fn sign_verify_and_session_binding() {
        let reg = KeyRegistry::gen_keys(3).unwrap();
        let e1 = SessionId::new("E1");
        let e2 = SessionId::new("E2");
        let sig = reg.sign(p(0), &e1, b"m").unwrap();
        assert!(reg.verify(p(0), &e1, b"m", &sig));
        assert!(!reg.verify(p(0), &e2, b"m", &sig));
        assert!(!reg.verify(p(1), &e1, b"m", &sig));
        assert!(!reg.verify(p(0), &e1, b"m'", &sig));
        assert_eq!(
            reg.sign(p(5), &e1, b"m"),
            Err(AuthError::UnknownPlayer(p(5)))
        );
    }

    #[test]
    fn adversary_needs_leak() {
        let mut reg = KeyRegistry::gen_keys(3).unwrap();
        let e1 = SessionId::new("E1");
        assert_eq!(
            reg.adversary_sign(p(0), &e1, b"m"),
            Err(AuthError::ForgeryDenied(p(0)))
        );
        reg.leak_key(p(0)).unwrap();
        let forged = reg.adversary_sign(p(0), &e1, b"m").unwrap();
        assert!(reg.verify(p(0), &e1, b"m", &forged));
        assert_eq!(forged, reg.sign(p(0), &e1, b"m").unwrap());
    }

    #[test]
    fn oracle_refuses_protected_prefix() {
        let reg = KeyRegistry::gen_keys(2).unwrap();
        let e1 = SessionId::new("E1");
        let e2 = SessionId::new("E2");
        let m1 = PrefixedMessage::new(e1.clone(), b"x".to_vec());
        let m2 = PrefixedMessage::new(e2.clone(), b"x".to_vec());
        assert_eq!(reg.oracle_sign_not_id(p(0), &e1, &m1).unwrap(), None);
        let sig = reg.oracle_sign_not_id(p(0), &e1, &m2).unwrap().unwrap();
        assert!(reg.verify(p(0), &e2, b"x", &sig));
        assert!(!reg.verify(p(0), &e1, b"x", &sig));

        let oracle = RestrictedOracle::new(&reg, e1.clone());
        assert!(oracle.sign(p(1), &e2, b"y").is_ok());
        assert_eq!(
            oracle.sign(p(1), &e1, b"y"),
            Err(AuthError::OracleRefused(e1))
        );
        assert_eq!((oracle.queries(), oracle.refusals()), (2, 1));
    }

    #[test]
    fn prefix_encoding_is_unambiguous() {
        // "E" + "1x" and "E1" + "x" must not collide.
        let a = PrefixedMessage::new(SessionId::new("E"), b"1x".to_vec()).to_bytes();
        let b = PrefixedMessage::new(SessionId::new("E1"), b"x".to_vec()).to_bytes();
        assert_ne!(a, b);
    }
}
