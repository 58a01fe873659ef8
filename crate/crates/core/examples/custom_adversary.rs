//! Writing an adversary: replay every observed relay of one session into
//! another. Session prefixes make the copies worthless.

use abg_core::adversary::{Adversary, AdversaryEnv, CorruptionPlan};
use abg_core::auth::SessionId;
use abg_core::eig::Value;
use abg_core::engine::{run_with_adversary, RoundMessage, Scenario, SessionSpec};

struct Replay {
    into: SessionId,
}

impl Adversary for Replay {
    fn on_round(
        &mut self,
        env: &AdversaryEnv<'_>,
        round: usize,
        observed: &[RoundMessage],
    ) -> abg_core::Result<Vec<RoundMessage>> {
        let byz = env.plan.byz_in(&self.into);
        Ok(observed
            .iter()
            .filter(|m| m.session != self.into && byz.iter().any(|b| b.index() == m.from))
            .map(|m| RoundMessage {
                session: self.into.clone(),
                round,
                ..m.clone()
            })
            .collect())
    }
}

fn main() -> abg_core::Result<()> {
    let s = Scenario::plus(
        4,
        2,
        vec![
            SessionSpec::new("E1", 0, Value::One),
            SessionSpec::new("E2", 1, Value::Zero),
        ],
    )
    .with_plan(CorruptionPlan::none().byzantine("E2", &[0]).passive(&[3]));
    let reg = s.registry()?;
    let r = run_with_adversary(&s, &reg, &mut Replay { into: "E2".into() })?;
    for v in &r.verdicts {
        println!("{}: outputs {:?} holds={}", v.session, v.outputs, v.holds());
    }
    Ok(())
}
