//! Seeded fuzzing adversary.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::auth::{PlayerId, SessionId, Signature, Signer};
use crate::eig::{general_body, relay_body, SignedRelay, Value};
use crate::engine::wire::{self, Payload};
use crate::engine::RoundMessage;
use crate::error::Result;

use super::{Adversary, AdversaryEnv};

/// Byzantine processes send a random mix of garbage, mutated copies of
/// observed traffic, valid relays extended with their own signature, fresh
/// chains over leaked keys, cross-session replays, and nothing.
///
/// Signatures of non-leaked players are only ever copied from observed traffic.
pub struct RandomAdversary {
    rng: ChaCha8Rng,
    /// Observed payloads per session, all rounds so far.
    seen: BTreeMap<SessionId, Vec<Vec<u8>>>,
    /// Observed General signatures per session and value.
    origins: BTreeMap<(SessionId, Value), Signature>,
}

impl RandomAdversary {
    pub fn new(seed: u64) -> Self {
        RandomAdversary {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seen: BTreeMap::new(),
            origins: BTreeMap::new(),
        }
    }

    fn learn(&mut self, m: &RoundMessage) {
        self.seen
            .entry(m.session.clone())
            .or_default()
            .push(m.payload.clone());
        if let Ok(p) = wire::decode(&m.payload) {
            let (value, origin) = match p {
                Payload::Value { value, sig, .. } => (value, sig),
                Payload::Relay(r) => (r.value, r.origin),
            };
            self.origins
                .entry((m.session.clone(), value))
                .or_insert(origin);
        }
    }

    fn origin(
        &mut self,
        env: &AdversaryEnv<'_>,
        s: &SessionId,
        general: PlayerId,
        value: Value,
    ) -> Option<Signature> {
        let forger = env.forger();
        if forger.can_forge(general) {
            return forger.sign(general, s, &general_body(value)).ok();
        }
        self.origins.get(&(s.clone(), value)).cloned()
    }

    /// A relay of length `round` ending in `b`, every other hop a leaked player.
    fn fresh_chain(
        &mut self,
        env: &AdversaryEnv<'_>,
        s: &SessionId,
        round: usize,
        b: PlayerId,
    ) -> Option<Vec<u8>> {
        let spec = env.session(s)?;
        let value = if self.rng.gen() {
            Value::One
        } else {
            Value::Zero
        };
        let forger = env.forger();
        if round == 0 {
            if b != spec.general {
                return None;
            }
            let sig = forger.sign(b, s, &general_body(value)).ok()?;
            return wire::encode(&Payload::Value {
                session: s.clone(),
                value,
                sig,
            })
            .ok();
        }
        let origin = self.origin(env, s, spec.general, value)?;
        let mut others: Vec<PlayerId> = env.plan.leaked().into_iter().filter(|p| *p != b).collect();
        if others.len() + 1 < round {
            return None;
        }
        others.shuffle(&mut self.rng);
        let mut path: Vec<PlayerId> = others.into_iter().take(round - 1).collect();
        path.push(b);
        let sigs = (0..path.len())
            .map(|k| forger.sign(path[k], s, &relay_body(value, &path[..=k])))
            .collect::<std::result::Result<Vec<_>, _>>()
            .ok()?;
        let relay = SignedRelay {
            session: s.clone(),
            value,
            path,
            origin,
            sigs,
        };
        wire::encode(&Payload::Relay(relay)).ok()
    }

    /// An observed relay one hop short, extended by `b`.
    fn extend_observed(
        &mut self,
        env: &AdversaryEnv<'_>,
        s: &SessionId,
        round: usize,
        b: PlayerId,
    ) -> Option<Vec<u8>> {
        let pool: Vec<SignedRelay> = self
            .seen
            .get(s)?
            .iter()
            .filter_map(|bytes| match wire::decode(bytes) {
                Ok(Payload::Relay(r)) if r.path.len() + 1 == round && !r.path.contains(&b) => {
                    Some(r)
                }
                _ => None,
            })
            .collect();
        let mut r = pool.choose(&mut self.rng)?.clone();
        r.path.push(b);
        r.sigs.push(
            env.forger()
                .sign(b, s, &relay_body(r.value, &r.path))
                .ok()?,
        );
        wire::encode(&Payload::Relay(r)).ok()
    }

    fn payload(
        &mut self,
        env: &AdversaryEnv<'_>,
        s: &SessionId,
        round: usize,
        b: PlayerId,
    ) -> Option<Vec<u8>> {
        match self.rng.gen_range(0..6) {
            0 => {
                let len = self.rng.gen_range(0..64);
                Some((0..len).map(|_| self.rng.gen()).collect())
            }
            1 => {
                let mut p = self.seen.get(s)?.choose(&mut self.rng)?.clone();
                if !p.is_empty() {
                    let i = self.rng.gen_range(0..p.len());
                    p[i] ^= 1 << self.rng.gen_range(0..8);
                }
                Some(p)
            }
            2 => self.extend_observed(env, s, round, b),
            3 => self.fresh_chain(env, s, round, b),
            4 => {
                let others: Vec<&SessionId> = self.seen.keys().filter(|k| *k != s).collect();
                let other = (*others.choose(&mut self.rng)?).clone();
                self.seen.get(&other)?.choose(&mut self.rng).cloned()
            }
            _ => None,
        }
    }
}

impl Adversary for RandomAdversary {
    fn on_round(
        &mut self,
        env: &AdversaryEnv<'_>,
        round: usize,
        observed: &[RoundMessage],
    ) -> Result<Vec<RoundMessage>> {
        for m in observed {
            self.learn(m);
        }
        let mut out = Vec::new();
        for spec in env.sessions {
            for b in env.plan.byz_in(&spec.id) {
                for y in 0..env.n {
                    let k = self.rng.gen_range(0..3);
                    for _ in 0..k {
                        if let Some(payload) = self.payload(env, &spec.id, round, b) {
                            out.push(RoundMessage {
                                session: spec.id.clone(),
                                round,
                                from: b.index(),
                                to: y,
                                payload,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
