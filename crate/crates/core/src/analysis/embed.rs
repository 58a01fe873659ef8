//! Re-runs one session of a composed scenario as a stand-alone mixed-adversary
//! run. Every other session is simulated inside the adversary, whose only
//! signing access for honest players is the oracle that refuses the
//! stand-alone session's prefix.

use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, AdversaryEnv, CorruptionPlan, StrategyId};
use crate::auth::{AuthError, KeyRegistry, PlayerId, RestrictedOracle, SessionId};
use crate::engine::{
    run_with_adversary, ProcessTrace, RoundMessage, RunResult, Scenario, SessionSim,
};
use crate::error::{Error, Result};
use crate::protocol::ProtocolKind;

use super::views::{first_divergence, Divergence};
use super::Verdict;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedReport {
    pub session: SessionId,
    pub t_b: usize,
    pub t_p: usize,
    /// Session traces of both runs are byte-identical.
    pub equal: bool,
    /// First player whose traces differ, with the view divergence if any.
    pub mismatch: Option<(PlayerId, Option<Divergence>)>,
    pub oracle_queries: usize,
    pub oracle_refusals: usize,
    pub composed: Verdict,
    pub standalone: Verdict,
}

/// Adversary for the stand-alone run: the composed strategy plus simulated
/// copies of every other session.
struct Wrapper<'a> {
    inner: Box<dyn Adversary + Send>,
    composed: AdversaryEnv<'a>,
    oracle: &'a RestrictedOracle<'a>,
    target: SessionId,
    order: Vec<SessionId>,
    others: Vec<SessionSim>,
}

impl Adversary for Wrapper<'_> {
    fn on_round(
        &mut self,
        _: &AdversaryEnv<'_>,
        round: usize,
        observed: &[RoundMessage],
    ) -> Result<Vec<RoundMessage>> {
        let mut emitted = Vec::new();
        for sim in &mut self.others {
            let out = sim.emit(round, self.oracle).map_err(|e| match e {
                Error::Auth(AuthError::OracleRefused(s)) => {
                    Error::OracleBreach(format!("oracle asked to sign under {s}"))
                }
                e => e,
            })?;
            emitted.push(out);
        }
        // composed order of observation
        let mut all = Vec::new();
        for sid in &self.order {
            if *sid == self.target {
                all.extend(observed.iter().filter(|m| &m.session == sid).cloned());
            } else if let Some(k) = self.others.iter().position(|s| s.session() == sid) {
                all.extend(emitted[k].iter().cloned());
            }
        }
        let injected = self.inner.on_round(&self.composed, round, &all)?;
        let forger = self.composed.forger();
        let mut out = Vec::new();
        for (k, sim) in self.others.iter_mut().enumerate() {
            let inj: Vec<RoundMessage> = injected
                .iter()
                .filter(|m| m.session == *sim.session())
                .cloned()
                .collect();
            sim.deliver(round, &emitted[k], &inj, &forger)?;
        }
        out.extend(injected.into_iter().filter(|m| m.session == self.target));
        Ok(out)
    }
}

/// The stand-alone scenario for session `i`: Byzantine players of `i` stay
/// Byzantine, every other corrupted player becomes passive, and the relay
/// depth stays `t + 1`.
pub fn standalone_scenario(scenario: &Scenario, i: usize) -> Result<Scenario> {
    let spec = scenario
        .sessions
        .get(i)
        .ok_or_else(|| Error::InvalidScenario(format!("no session with index {i}")))?;
    let byz = scenario.plan.byz_in(&spec.id);
    let t_b = byz.len();
    let t_p = scenario.t.saturating_sub(t_b);
    let external = scenario.plan.leaked().difference(&byz).copied().collect();
    let mut plan = CorruptionPlan {
        byz: Default::default(),
        external,
    };
    if !byz.is_empty() {
        plan.byz.insert(spec.id.clone(), byz);
    }
    Ok(Scenario {
        n: scenario.n,
        t: scenario.t,
        v0: scenario.v0,
        protocol: ProtocolKind::EigPrune { t_b, t_p },
        sessions: vec![spec.clone()],
        plan,
        strategy: StrategyId::Silent,
        seed: scenario.seed,
    })
}

fn mismatch(a: &[&ProcessTrace], b: &[&ProcessTrace]) -> Option<(PlayerId, Option<Divergence>)> {
    for (x, y) in a.iter().zip(b) {
        if x.to_bytes() != y.to_bytes() {
            return Some((x.player, first_divergence(x, y)));
        }
    }
    if a.len() != b.len() {
        return Some((PlayerId::from_index(a.len().min(b.len())), None));
    }
    None
}

/// Runs `scenario` composed and session `i` stand-alone, and compares the
/// session-`i` traces byte for byte.
pub fn embed_as_mix(scenario: &Scenario, i: usize) -> Result<EmbedReport> {
    scenario.validate()?;
    let reg = scenario.registry()?;
    let composed = composed_run(scenario, &reg)?;
    embed_one(scenario, &reg, &composed, i)
}

/// `embed_as_mix` for every session, sharing one composed run.
pub fn embed_all(scenario: &Scenario) -> Result<Vec<EmbedReport>> {
    scenario.validate()?;
    let reg = scenario.registry()?;
    let composed = composed_run(scenario, &reg)?;
    (0..scenario.sessions.len())
        .map(|i| embed_one(scenario, &reg, &composed, i))
        .collect()
}

fn composed_run(scenario: &Scenario, reg: &KeyRegistry) -> Result<RunResult> {
    if scenario.protocol != ProtocolKind::EigPrunePlus {
        return Err(Error::InvalidScenario(
            "embedding starts from an EIGPrune+ scenario".into(),
        ));
    }
    let env = scenario.env(reg);
    let mut strategy = scenario.strategy.build(&env, scenario.seed)?;
    run_with_adversary(scenario, reg, strategy.as_mut())
}

fn embed_one(
    scenario: &Scenario,
    reg: &KeyRegistry,
    composed: &RunResult,
    i: usize,
) -> Result<EmbedReport> {
    let mix = standalone_scenario(scenario, i)?;
    mix.validate()?;
    let target = mix.sessions[0].id.clone();

    let oracle = RestrictedOracle::new(reg, target.clone());
    let others = scenario
        .session_sims()?
        .into_iter()
        .filter(|s| *s.session() != target)
        .collect();
    let composed_env = scenario.env(reg);
    let mut wrapper = Wrapper {
        inner: scenario.strategy.build(&composed_env, scenario.seed)?,
        composed: composed_env,
        oracle: &oracle,
        target: target.clone(),
        order: scenario.session_ids(),
        others,
    };
    let standalone = run_with_adversary(&mix, reg, &mut wrapper)?;
    if oracle.refusals() > 0 {
        return Err(Error::OracleBreach(format!(
            "{} refused oracle queries",
            oracle.refusals()
        )));
    }

    let a: Vec<&ProcessTrace> = composed.session_traces(&target).collect();
    let b: Vec<&ProcessTrace> = standalone.session_traces(&target).collect();
    let mismatch = mismatch(&a, &b);
    let ProtocolKind::EigPrune { t_b, t_p } = mix.protocol else {
        unreachable!()
    };
    Ok(EmbedReport {
        session: target.clone(),
        t_b,
        t_p,
        equal: mismatch.is_none(),
        mismatch,
        oracle_queries: oracle.queries(),
        oracle_refusals: oracle.refusals(),
        composed: composed.verdict(&target).cloned().expect("session verdict"),
        standalone: standalone
            .verdict(&target)
            .cloned()
            .expect("session verdict"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::Value;
    use crate::engine::SessionSpec;

    fn basis() -> Scenario {
        Scenario::plus(
            3,
            2,
            vec![
                SessionSpec::new("E1", 0, Value::Zero),
                SessionSpec::new("E2", 0, Value::Zero),
            ],
        )
        .with_plan(
            CorruptionPlan::none()
                .byzantine("E1", &[2])
                .byzantine("E2", &[0]),
        )
        .with_strategy(StrategyId::Alpha1)
    }

    #[test]
    fn basis_scenario_embeds() {
        let s = basis();
        let mix = standalone_scenario(&s, 0).unwrap();
        assert_eq!(mix.plan.byz_in(&"E1".into()), [PlayerId(2)].into());
        assert_eq!(mix.plan.external, [PlayerId(0)].into());
        assert_eq!(mix.depth(), s.depth());
        let r = embed_as_mix(&s, 0).unwrap();
        assert!(r.equal, "{:?}", r.mismatch);
        assert_eq!(r.oracle_refusals, 0);
        // the other session has a silent Byzantine General, so nobody signs there
        assert_eq!(r.oracle_queries, 0);
        let r2 = embed_as_mix(&s, 1).unwrap();
        assert!(r2.equal && r2.oracle_queries > 0 && r2.oracle_refusals == 0);
    }

    #[test]
    fn uncorrupted_embeds() {
        let s = Scenario::plus(
            4,
            2,
            vec![
                SessionSpec::new("E1", 0, Value::One),
                SessionSpec::new("E2", 2, Value::Zero),
            ],
        );
        let r = embed_as_mix(&s, 1).unwrap();
        assert!(r.equal);
        assert_eq!((r.t_b, r.t_p), (0, 2));
    }

    #[test]
    fn random_strategy_embeds() {
        let s = Scenario::plus(
            4,
            2,
            vec![
                SessionSpec::new("E1", 0, Value::One),
                SessionSpec::new("E2", 1, Value::Zero),
            ],
        )
        .with_plan(
            CorruptionPlan::none()
                .byzantine("E1", &[1])
                .byzantine("E2", &[3]),
        )
        .with_strategy(StrategyId::Random { seed: 11 });
        for i in 0..2 {
            assert!(embed_as_mix(&s, i).unwrap().equal);
        }
    }
}
