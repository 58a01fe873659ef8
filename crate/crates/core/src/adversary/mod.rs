//! Corruption plans, process classification and adversary strategies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::auth::{Forger, KeyRegistry, PlayerId, SessionId, Signature, Verify};
use crate::eig::Value;
use crate::engine::{RoundMessage, SessionSpec};
use crate::error::{Error, Result};
use crate::protocol::{ProtocolKind, ProtocolParams};

mod random;
mod scripted;
mod shadow;

pub use random::RandomAdversary;
pub use scripted::{check_alpha_plan, Alpha};
pub use shadow::{ShadowAdversary, WorldMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessStatus {
    Honest,
    Passive,
    Byzantine,
}

impl fmt::Display for ProcessStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProcessStatus::Honest => "honest",
            ProcessStatus::Passive => "passive",
            ProcessStatus::Byzantine => "byzantine",
        })
    }
}

/// Static corruption: who is Byzantine in which session, plus players whose
/// keys leak without being Byzantine anywhere (used by stand-alone mixed runs).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionPlan {
    pub byz: BTreeMap<SessionId, BTreeSet<PlayerId>>,
    #[serde(default)]
    pub external: BTreeSet<PlayerId>,
}

impl CorruptionPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn byzantine(mut self, session: impl Into<SessionId>, players: &[u16]) -> Self {
        self.byz
            .entry(session.into())
            .or_default()
            .extend(players.iter().map(|p| PlayerId(*p)));
        self
    }

    pub fn passive(mut self, players: &[u16]) -> Self {
        self.external.extend(players.iter().map(|p| PlayerId(*p)));
        self
    }

    pub fn byz_in(&self, s: &SessionId) -> BTreeSet<PlayerId> {
        self.byz.get(s).cloned().unwrap_or_default()
    }

    pub fn is_byzantine(&self, p: PlayerId, s: &SessionId) -> bool {
        self.byz.get(s).is_some_and(|b| b.contains(&p))
    }

    pub fn byz_any(&self) -> BTreeSet<PlayerId> {
        self.byz.values().flatten().copied().collect()
    }

    pub fn leaked(&self) -> BTreeSet<PlayerId> {
        let mut l = self.byz_any();
        l.extend(self.external.iter().copied());
        l
    }

    /// Status of `p`'s process in session `s`.
    pub fn status(&self, p: PlayerId, s: &SessionId) -> ProcessStatus {
        if self.is_byzantine(p, s) {
            ProcessStatus::Byzantine
        } else if self.external.contains(&p) || self.byz.values().any(|b| b.contains(&p)) {
            ProcessStatus::Passive
        } else {
            ProcessStatus::Honest
        }
    }
}

/// `status` restricted to sessions of a scenario.
pub fn classify(
    plan: &CorruptionPlan,
    sessions: &[SessionId],
    p: PlayerId,
    s: &SessionId,
) -> Result<ProcessStatus> {
    if !sessions.contains(s) {
        return Err(Error::InvalidScenario(format!("unknown session {s}")));
    }
    Ok(plan.status(p, s))
}

/// Global budget: at most `t` players ever corrupted.
pub fn check_budget(plan: &CorruptionPlan, t: usize) -> bool {
    plan.leaked().len() <= t
}

/// Budget for a stand-alone mixed run: per session at most `t_b` Byzantine
/// and at most `t_p` passive players.
pub fn check_mix_budget(
    plan: &CorruptionPlan,
    sessions: &[SessionId],
    t_b: usize,
    t_p: usize,
) -> bool {
    let leaked = plan.leaked();
    sessions.iter().all(|s| {
        let b = plan.byz_in(s);
        b.len() <= t_b && leaked.difference(&b).count() <= t_p
    })
}

/// What a strategy may see and use: public parameters, the plan, signature
/// verification, and signing with leaked keys only.
pub struct AdversaryEnv<'a> {
    pub n: usize,
    pub t: usize,
    pub v0: Value,
    pub protocol: ProtocolKind,
    pub sessions: &'a [SessionSpec],
    pub plan: &'a CorruptionPlan,
    registry: &'a KeyRegistry,
}

impl<'a> AdversaryEnv<'a> {
    pub fn new(
        n: usize,
        t: usize,
        v0: Value,
        protocol: ProtocolKind,
        sessions: &'a [SessionSpec],
        plan: &'a CorruptionPlan,
        registry: &'a KeyRegistry,
    ) -> Self {
        AdversaryEnv {
            n,
            t,
            v0,
            protocol,
            sessions,
            plan,
            registry,
        }
    }

    pub fn forger(&self) -> Forger<'a> {
        self.registry.forger()
    }

    pub fn verify(&self, p: PlayerId, s: &SessionId, body: &[u8], sig: &Signature) -> bool {
        Verify::verify(self.registry, p, s, body, sig)
    }

    pub fn session(&self, s: &SessionId) -> Option<&'a SessionSpec> {
        self.sessions.iter().find(|x| &x.id == s)
    }

    pub fn params(&self, spec: &SessionSpec) -> Result<ProtocolParams> {
        ProtocolParams::new(self.n, self.protocol, self.t, self.v0, spec.general)
    }

    pub fn rounds(&self) -> usize {
        self.protocol.depth(self.t) + 1
    }
}

/// A rushing adversary: sees every honest emission of the round, across all
/// sessions, then returns the messages its Byzantine processes send.
pub trait Adversary {
    fn on_round(
        &mut self,
        env: &AdversaryEnv<'_>,
        round: usize,
        observed: &[RoundMessage],
    ) -> Result<Vec<RoundMessage>>;
}

/// Byzantine processes send nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct Silent;

impl Adversary for Silent {
    fn on_round(
        &mut self,
        _: &AdversaryEnv<'_>,
        _: usize,
        _: &[RoundMessage],
    ) -> Result<Vec<RoundMessage>> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum StrategyId {
    Silent,
    /// Byzantine processes follow a counterfactual run where every leaked
    /// General holds the other input.
    SplitWorld,
    /// A Byzantine General shows input 0 to half the players and 1 to the rest.
    TwoFaced,
    Alpha1,
    Alpha2,
    Alpha3,
    Random {
        seed: u64,
    },
}

impl StrategyId {
    pub fn is_scripted(&self) -> bool {
        matches!(
            self,
            StrategyId::Alpha1 | StrategyId::Alpha2 | StrategyId::Alpha3
        )
    }

    /// Checks at load time that the strategy can run against this plan.
    pub fn check(&self, n: usize, sessions: &[SessionSpec], plan: &CorruptionPlan) -> Result<()> {
        match self {
            StrategyId::Alpha1 => check_alpha_plan(Alpha::One, n, sessions, plan),
            StrategyId::Alpha2 => check_alpha_plan(Alpha::Two, n, sessions, plan),
            StrategyId::Alpha3 => check_alpha_plan(Alpha::Three, n, sessions, plan),
            _ => Ok(()),
        }
    }

    /// `seed` is the scenario seed; it only affects randomized strategies.
    pub fn build(&self, env: &AdversaryEnv<'_>, seed: u64) -> Result<Box<dyn Adversary + Send>> {
        self.check(env.n, env.sessions, env.plan)?;
        Ok(match *self {
            StrategyId::Silent => Box::new(Silent),
            StrategyId::SplitWorld => Box::new(ShadowAdversary::uniform(env, WorldMode::Split)?),
            StrategyId::TwoFaced => Box::new(ShadowAdversary::uniform(env, WorldMode::TwoFaced)?),
            StrategyId::Alpha1 => Box::new(scripted::alpha(env, Alpha::One)?),
            StrategyId::Alpha2 => Box::new(scripted::alpha(env, Alpha::Two)?),
            StrategyId::Alpha3 => Box::new(scripted::alpha(env, Alpha::Three)?),
            StrategyId::Random { seed: s } => {
                Box::new(RandomAdversary::new(s ^ seed.rotate_left(32)))
            }
        })
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StrategyId::Silent => "silent".to_string(),
            StrategyId::SplitWorld => "split-world".to_string(),
            StrategyId::TwoFaced => "two-faced".to_string(),
            StrategyId::Alpha1 => "alpha1".to_string(),
            StrategyId::Alpha2 => "alpha2".to_string(),
            StrategyId::Alpha3 => "alpha3".to_string(),
            StrategyId::Random { seed } => format!("random:{seed}"),
        };
        f.pad(&s)
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    /// `silent`, `split-world`, `two-faced`, `alpha1..3`, `random` or `random:SEED`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "silent" => StrategyId::Silent,
            "split-world" => StrategyId::SplitWorld,
            "two-faced" => StrategyId::TwoFaced,
            "alpha1" => StrategyId::Alpha1,
            "alpha2" => StrategyId::Alpha2,
            "alpha3" => StrategyId::Alpha3,
            "random" => StrategyId::Random { seed: 0 },
            _ => match s.strip_prefix("random:") {
                Some(seed) => StrategyId::Random {
                    seed: seed
                        .parse()
                        .map_err(|_| Error::Config(format!("bad random seed {seed:?}")))?,
                },
                None => return Err(Error::Config(format!("unknown strategy {s:?}"))),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sids() -> Vec<SessionId> {
        vec!["E1".into(), "E2".into()]
    }

    #[test]
    fn classify_examples() {
        let plan = CorruptionPlan::none()
            .byzantine("E1", &[2])
            .byzantine("E2", &[0]);
        let e1: SessionId = "E1".into();
        assert_eq!(
            classify(&plan, &sids(), PlayerId(0), &e1).unwrap(),
            ProcessStatus::Passive
        );
        assert_eq!(
            classify(&plan, &sids(), PlayerId(1), &e1).unwrap(),
            ProcessStatus::Honest
        );
        assert_eq!(
            classify(&plan, &sids(), PlayerId(2), &e1).unwrap(),
            ProcessStatus::Byzantine
        );
        assert!(classify(&plan, &sids(), PlayerId(2), &"E9".into()).is_err());
    }

    #[test]
    fn budget_examples() {
        let ok = CorruptionPlan::none()
            .byzantine("E1", &[2])
            .byzantine("E2", &[0]);
        assert!(check_budget(&ok, 2));
        let over = CorruptionPlan::none()
            .byzantine("E1", &[0, 1])
            .byzantine("E2", &[2]);
        assert!(!check_budget(&over, 2));
        assert!(check_budget(&CorruptionPlan::none(), 0));
        let mix = CorruptionPlan::none()
            .byzantine("E1", &[4])
            .passive(&[0, 1]);
        assert!(check_mix_budget(&mix, &["E1".into()], 1, 2));
        assert!(!check_mix_budget(&mix, &["E1".into()], 1, 1));
    }

    #[test]
    fn strategy_ids_round_trip() {
        for s in [
            StrategyId::Silent,
            StrategyId::SplitWorld,
            StrategyId::TwoFaced,
            StrategyId::Alpha1,
            StrategyId::Alpha2,
            StrategyId::Alpha3,
            StrategyId::Random { seed: 42 },
        ] {
            assert_eq!(s.to_string().parse::<StrategyId>().unwrap(), s);
        }
        assert!("gamma".parse::<StrategyId>().is_err());
        assert!("random:x".parse::<StrategyId>().is_err());
    }
}
