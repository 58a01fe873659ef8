//! Library strategies against EIGPrune+ at n = 2t. Cross-session leakage
//! makes players Byzantine in one session passive in the other.

use abg_core::adversary::{CorruptionPlan, StrategyId};
use abg_core::eig::Value;
use abg_core::engine::{run, Scenario, SessionSpec};

fn main() -> abg_core::Result<()> {
    let base = Scenario::plus(
        4,
        2,
        vec![
            SessionSpec::new("E1", 0, Value::One),
            SessionSpec::new("E2", 1, Value::Zero),
        ],
    )
    .with_plan(
        CorruptionPlan::none()
            .byzantine("E1", &[0])
            .byzantine("E2", &[2]),
    );
    for strategy in [
        StrategyId::Silent,
        StrategyId::SplitWorld,
        StrategyId::TwoFaced,
        StrategyId::Random { seed: 4 },
    ] {
        let r = run(&base.clone().with_strategy(strategy))?;
        print!("{strategy:>12}:");
        for v in &r.verdicts {
            print!(
                "  {} {:?} holds={}",
                v.session,
                v.outputs.values().collect::<Vec<_>>(),
                v.holds()
            );
        }
        println!();
    }
    Ok(())
}
