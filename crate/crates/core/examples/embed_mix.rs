//! One session of a composed run replayed as a stand-alone mixed-adversary
//! run, with the other session simulated through the restricted oracle.

use abg_core::adversary::{CorruptionPlan, StrategyId};
use abg_core::analysis::{embed_all, standalone_scenario};
use abg_core::eig::Value;
use abg_core::engine::{Scenario, SessionSpec};

fn main() -> abg_core::Result<()> {
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
            .byzantine("E1", &[2])
            .byzantine("E2", &[3]),
    )
    .with_strategy(StrategyId::SplitWorld);
    let mix = standalone_scenario(&s, 0)?;
    println!(
        "E1 alone: {:?}, byzantine {:?}, passive {:?}",
        mix.protocol, mix.plan.byz, mix.plan.external
    );
    for r in embed_all(&s)? {
        println!(
            "{} t_b={} t_p={}: identical={} oracle queries={} refusals={} holds={}",
            r.session,
            r.t_b,
            r.t_p,
            r.equal,
            r.oracle_queries,
            r.oracle_refusals,
            r.standalone.holds()
        );
    }
    Ok(())
}
