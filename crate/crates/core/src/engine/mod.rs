//! Lockstep simulation of parallel sessions over a synchronous network.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::adversary::{
    check_budget, check_mix_budget, Adversary, AdversaryEnv, CorruptionPlan, StrategyId,
};
use crate::analysis::{evaluate, Verdict};
use crate::auth::{KeyRegistry, PlayerId, SessionId};
use crate::eig::Value;
use crate::error::{Error, Result};
use crate::protocol::{ProcessState, ProtocolKind, ProtocolParams};

mod sim;
mod trace;
pub mod wire;

pub use sim::{SessionSim, SimOutput, Simulation, Slot, Topology, BYZANTINE_CODE};
pub use trace::{NodeId, ProcessTrace, RoundMessage, RoundRecord, Sent};
pub use wire::{canonical_serialize, Payload};

/// One parallel execution: its id, General and the General's input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub id: SessionId,
    pub general: PlayerId,
    pub input: Value,
}

impl SessionSpec {
    pub fn new(id: impl Into<SessionId>, general: u16, input: Value) -> Self {
        SessionSpec {
            id: id.into(),
            general: PlayerId(general),
            input,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub t: usize,
    pub v0: Value,
    pub protocol: ProtocolKind,
    pub sessions: Vec<SessionSpec>,
    pub plan: CorruptionPlan,
    pub strategy: StrategyId,
    pub seed: u64,
}

impl Scenario {
    /// EIGPrune+ scenario with no corruption and the silent strategy.
    pub fn plus(n: usize, t: usize, sessions: Vec<SessionSpec>) -> Self {
        Scenario {
            n,
            t,
            v0: Value::Zero,
            protocol: ProtocolKind::EigPrunePlus,
            sessions,
            plan: CorruptionPlan::none(),
            strategy: StrategyId::Silent,
            seed: 0,
        }
    }

    pub fn with_plan(mut self, plan: CorruptionPlan) -> Self {
        self.plan = plan;
        self
    }

    pub fn with_strategy(mut self, strategy: StrategyId) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn session_ids(&self) -> Vec<SessionId> {
        self.sessions.iter().map(|s| s.id.clone()).collect()
    }

    pub fn depth(&self) -> usize {
        self.protocol.depth(self.t)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.n > u16::MAX as usize {
            return bad(format!("n = {} is too large", self.n));
        }
        if self.sessions.is_empty() {
            return bad("at least one session required".into());
        }
        let mut ids = BTreeSet::new();
        for s in &self.sessions {
            if !ids.insert(&s.id) {
                return bad(format!("duplicate session id {}", s.id));
            }
            if s.general.index() >= self.n {
                return bad(format!(
                    "General {} of {} not in 0..{}",
                    s.general, s.id, self.n
                ));
            }
        }
        for (s, players) in &self.plan.byz {
            if !ids.contains(s) {
                return bad(format!("plan names unknown session {s}"));
            }
            if let Some(p) = players.iter().find(|p| p.index() >= self.n) {
                return bad(format!("plan names unknown player {p}"));
            }
        }
        if let Some(p) = self.plan.external.iter().find(|p| p.index() >= self.n) {
            return bad(format!("plan names unknown player {p}"));
        }
        match self.protocol {
            ProtocolKind::EigPrunePlus => {
                if !check_budget(&self.plan, self.t) {
                    return Err(Error::Budget(format!(
                        "{} players corrupted, t = {}",
                        self.plan.leaked().len(),
                        self.t
                    )));
                }
            }
            ProtocolKind::EigPrune { t_b, t_p } => {
                if !check_mix_budget(&self.plan, &self.session_ids(), t_b, t_p) {
                    return Err(Error::Budget(format!(
                        "plan exceeds t_b = {t_b}, t_p = {t_p}"
                    )));
                }
            }
        }
        self.strategy.check(self.n, &self.sessions, &self.plan)
    }

    /// Keys for `0..n` with every corrupted player's key leaked.
    pub fn registry(&self) -> Result<KeyRegistry> {
        let mut reg = KeyRegistry::gen_keys(self.n)?;
        for p in self.plan.leaked() {
            reg.leak_key(p)?;
        }
        Ok(reg)
    }

    pub fn env<'a>(&'a self, reg: &'a KeyRegistry) -> AdversaryEnv<'a> {
        AdversaryEnv::new(
            self.n,
            self.t,
            self.v0,
            self.protocol,
            &self.sessions,
            &self.plan,
            reg,
        )
    }

    /// Session simulators on the complete network; Byzantine slots stay empty.
    pub fn session_sims(&self) -> Result<Vec<SessionSim>> {
        self.sessions
            .iter()
            .map(|spec| {
                let params =
                    ProtocolParams::new(self.n, self.protocol, self.t, self.v0, spec.general)?;
                let slots = (0..self.n)
                    .map(PlayerId::from_index)
                    .map(|p| {
                        if self.plan.is_byzantine(p, &spec.id) {
                            return Ok(Slot::Byzantine);
                        }
                        let input = (p == spec.general).then_some(spec.input);
                        Ok(Slot::Process {
                            process: Box::new(ProcessState::new(
                                params.clone(),
                                p,
                                spec.id.clone(),
                                input,
                            )?),
                            status: self.plan.status(p, &spec.id),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                SessionSim::new(spec.id.clone(), Topology::complete(self.n), slots)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub traces: Vec<ProcessTrace>,
    pub messages: Vec<RoundMessage>,
    pub verdicts: Vec<Verdict>,
}

impl RunResult {
    pub fn trace(&self, session: &SessionId, player: PlayerId) -> Option<&ProcessTrace> {
        self.traces
            .iter()
            .find(|t| &t.session == session && t.player == player)
    }

    pub fn session_traces<'a>(
        &'a self,
        session: &'a SessionId,
    ) -> impl Iterator<Item = &'a ProcessTrace> {
        self.traces.iter().filter(move |t| &t.session == session)
    }

    pub fn verdict(&self, session: &SessionId) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| &v.session == session)
    }

    pub fn violations(&self) -> usize {
        self.verdicts.iter().filter(|v| !v.holds()).count()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    /// Stable bytes of all traces, for determinism checks.
    pub fn trace_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.traces).expect("traces serialize")
    }
}

/// Validates, derives keys and leaks, builds the strategy and runs.
pub fn run(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    let reg = scenario.registry()?;
    let env = scenario.env(&reg);
    let mut adversary = scenario.strategy.build(&env, scenario.seed)?;
    run_with_adversary(scenario, &reg, adversary.as_mut())
}

/// Runs with a caller-supplied adversary and registry. The scenario's
/// `strategy` field is ignored.
pub fn run_with_adversary(
    scenario: &Scenario,
    reg: &KeyRegistry,
    adversary: &mut dyn Adversary,
) -> Result<RunResult> {
    let env = scenario.env(reg);
    let out = Simulation::new(scenario.session_sims()?)?.run(reg, &env, adversary)?;
    let verdicts = scenario
        .sessions
        .iter()
        .map(|spec| {
            let ts: Vec<&ProcessTrace> =
                out.traces.iter().filter(|t| t.session == spec.id).collect();
            evaluate(&ts, spec)
        })
        .collect();
    Ok(RunResult {
        traces: out.traces,
        messages: out.messages,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::ProcessStatus;

    #[test]
    fn fault_free_single_session() {
        let s = Scenario::plus(3, 1, vec![SessionSpec::new("E1", 0, Value::Zero)]);
        let r = run(&s).unwrap();
        assert!(r.traces.iter().all(|t| t.output == Some(Value::Zero)));
        assert!(r.passed());
    }

    #[test]
    fn passive_trace_matches_honest() {
        let sessions = vec![
            SessionSpec::new("E1", 1, Value::One),
            SessionSpec::new("E2", 1, Value::Zero),
        ];
        let plain = run(&Scenario::plus(3, 1, sessions.clone())).unwrap();
        let corrupt =
            run(&Scenario::plus(3, 1, sessions)
                .with_plan(CorruptionPlan::none().byzantine("E2", &[0])))
            .unwrap();
        let e1: SessionId = "E1".into();
        let a = corrupt.trace(&e1, PlayerId(0)).unwrap();
        assert_eq!(a.status, ProcessStatus::Passive);
        let mut honest = plain.trace(&e1, PlayerId(0)).unwrap().clone();
        honest.status = ProcessStatus::Passive;
        assert_eq!(a, &honest);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let one = || vec![SessionSpec::new("E1", 0, Value::Zero)];
        assert!(matches!(
            run(&Scenario::plus(0, 0, one())),
            Err(Error::InvalidScenario(_))
        ));
        let dup = vec![
            SessionSpec::new("E1", 0, Value::Zero),
            SessionSpec::new("E1", 1, Value::Zero),
        ];
        assert!(run(&Scenario::plus(3, 1, dup)).is_err());
        let over =
            Scenario::plus(3, 1, one()).with_plan(CorruptionPlan::none().byzantine("E1", &[1, 2]));
        assert!(matches!(run(&over), Err(Error::Budget(_))));
        let ghost =
            Scenario::plus(3, 1, one()).with_plan(CorruptionPlan::none().byzantine("E9", &[1]));
        assert!(run(&ghost).is_err());
        let wrong = Scenario::plus(3, 2, one()).with_strategy(StrategyId::Alpha1);
        assert!(matches!(run(&wrong), Err(Error::WrongPlan { .. })));
    }

    #[test]
    fn deterministic_across_reruns_and_seeds() {
        let mut s = Scenario::plus(
            4,
            2,
            vec![
                SessionSpec::new("E1", 0, Value::One),
                SessionSpec::new("E2", 3, Value::Zero),
            ],
        )
        .with_plan(
            CorruptionPlan::none()
                .byzantine("E1", &[2])
                .byzantine("E2", &[0]),
        )
        .with_strategy(StrategyId::SplitWorld);
        let a = run(&s).unwrap();
        s.seed = 99;
        let b = run(&s).unwrap();
        assert_eq!(a.trace_bytes(), b.trace_bytes());
        let r = s.clone().with_strategy(StrategyId::Random { seed: 5 });
        assert_eq!(
            run(&r).unwrap().trace_bytes(),
            run(&r).unwrap().trace_bytes()
        );
    }
}
