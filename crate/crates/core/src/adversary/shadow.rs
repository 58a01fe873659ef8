//! Shadow simulation: the adversary runs honest code for every leaked player
//! in a private counterfactual world and lets its Byzantine processes speak
//! from that world.

use std::collections::{BTreeMap, BTreeSet};

use crate::auth::{PlayerId, SessionId};
use crate::eig::Value;
use crate::engine::{RoundMessage, SessionSpec};
use crate::error::Result;
use crate::protocol::{Address, Incoming, NodeProcess, Outgoing, ProcessState};

use super::{Adversary, AdversaryEnv};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldMode {
    /// One world; a leaked General holds the other input there.
    Split,
    /// Two worlds with General inputs 0 and 1, each shown to half of the
    /// non-Byzantine players. Needs a Byzantine General, else acts as `Split`.
    TwoFaced,
}

struct World {
    shadows: BTreeMap<PlayerId, ProcessState>,
    out: BTreeMap<PlayerId, Vec<Outgoing>>,
}

impl World {
    fn new(
        env: &AdversaryEnv<'_>,
        spec: &SessionSpec,
        leaked: &BTreeSet<PlayerId>,
        input: Value,
    ) -> Result<Self> {
        let params = env.params(spec)?;
        let shadows = leaked
            .iter()
            .map(|&x| {
                let inp = (x == spec.general).then_some(input);
                ProcessState::new(params.clone(), x, spec.id.clone(), inp).map(|s| (x, s))
            })
            .collect::<Result<_>>()?;
        Ok(World {
            shadows,
            out: BTreeMap::new(),
        })
    }

    fn addressed(&self, from: PlayerId, to: PlayerId) -> impl Iterator<Item = &Vec<u8>> {
        self.out
            .get(&from)
            .into_iter()
            .flatten()
            .filter(move |m| matches!(m.to, Address::Name(p) | Address::AllInstances(p) if p == to))
            .map(|m| &m.payload)
    }
}

struct SessionShadow {
    session: SessionId,
    byz: BTreeSet<PlayerId>,
    worlds: Vec<World>,
    /// Which world each non-Byzantine player is shown.
    assign: BTreeMap<PlayerId, usize>,
}

impl SessionShadow {
    fn new(env: &AdversaryEnv<'_>, spec: &SessionSpec, mode: WorldMode) -> Result<Self> {
        let leaked = env.plan.leaked();
        let byz = env.plan.byz_in(&spec.id);
        let targets: Vec<PlayerId> = (0..env.n)
            .map(PlayerId::from_index)
            .filter(|p| !byz.contains(p))
            .collect();
        let two_faced = mode == WorldMode::TwoFaced && byz.contains(&spec.general);
        let (worlds, assign) = if two_faced {
            let half = targets.len().div_ceil(2);
            let worlds = vec![
                World::new(env, spec, &leaked, Value::Zero)?,
                World::new(env, spec, &leaked, Value::One)?,
            ];
            let assign = targets
                .iter()
                .enumerate()
                .map(|(i, p)| (*p, usize::from(i >= half)))
                .collect();
            (worlds, assign)
        } else {
            let input = if leaked.contains(&spec.general) {
                spec.input.flip()
            } else {
                spec.input
            };
            let worlds = vec![World::new(env, spec, &leaked, input)?];
            (worlds, targets.iter().map(|p| (*p, 0)).collect())
        };
        Ok(SessionShadow {
            session: spec.id.clone(),
            byz,
            worlds,
            assign,
        })
    }

    fn round(
        &mut self,
        env: &AdversaryEnv<'_>,
        round: usize,
        observed: &[RoundMessage],
    ) -> Result<Vec<RoundMessage>> {
        let forger = env.forger();
        for w in &mut self.worlds {
            w.out.clear();
            for (x, s) in &mut w.shadows {
                w.out.insert(*x, s.emit(round, &forger)?);
            }
        }

        let mut injected = Vec::new();
        for b in &self.byz {
            for (y, w) in &self.assign {
                for payload in self.worlds[*w].addressed(*b, *y) {
                    injected.push(RoundMessage {
                        session: self.session.clone(),
                        round,
                        from: b.index(),
                        to: y.index(),
                        payload: payload.clone(),
                    });
                }
            }
        }

        let real: Vec<&RoundMessage> = observed
            .iter()
            .filter(|m| m.session == self.session && m.round == round)
            .collect();
        for w in &mut self.worlds {
            let mut inboxes: BTreeMap<PlayerId, Vec<Incoming>> = BTreeMap::new();
            for &x in w.shadows.keys() {
                let mut inbox = Vec::new();
                for z in (0..env.n).map(PlayerId::from_index) {
                    if w.shadows.contains_key(&z) {
                        inbox.extend(w.addressed(z, x).map(|p| Incoming {
                            from: z,
                            payload: p.clone(),
                        }));
                    } else {
                        inbox.extend(
                            real.iter()
                                .filter(|m| m.from == z.index() && m.to == x.index())
                                .map(|m| Incoming {
                                    from: z,
                                    payload: m.payload.clone(),
                                }),
                        );
                    }
                }
                inbox.sort();
                inboxes.insert(x, inbox);
            }
            for (x, s) in &mut w.shadows {
                s.deliver(round, &inboxes[x], &forger);
            }
        }
        Ok(injected)
    }
}

/// Shadow-world strategy, configured per session. Sessions without a mode,
/// or without Byzantine players, stay silent.
pub struct ShadowAdversary {
    sessions: Vec<SessionShadow>,
}

impl ShadowAdversary {
    pub fn uniform(env: &AdversaryEnv<'_>, mode: WorldMode) -> Result<Self> {
        let modes = env.sessions.iter().map(|s| (s.id.clone(), mode)).collect();
        Self::with_modes(env, &modes)
    }

    pub fn with_modes(
        env: &AdversaryEnv<'_>,
        modes: &BTreeMap<SessionId, WorldMode>,
    ) -> Result<Self> {
        let mut sessions = Vec::new();
        for spec in env.sessions {
            let Some(mode) = modes.get(&spec.id) else {
                continue;
            };
            if env.plan.byz_in(&spec.id).is_empty() {
                continue;
            }
            sessions.push(SessionShadow::new(env, spec, *mode)?);
        }
        Ok(ShadowAdversary { sessions })
    }
}

impl Adversary for ShadowAdversary {
    fn on_round(
        &mut self,
        env: &AdversaryEnv<'_>,
        round: usize,
        observed: &[RoundMessage],
    ) -> Result<Vec<RoundMessage>> {
        let mut out = Vec::new();
        for s in &mut self.sessions {
            out.extend(s.round(env, round, observed)?);
        }
        out.sort();
        Ok(out)
    }
}
