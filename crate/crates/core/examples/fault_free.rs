//! Two parallel EIGPrune+ sessions with no corruption.

use abg_core::eig::Value;
use abg_core::engine::{run, Scenario, SessionSpec};

fn main() -> abg_core::Result<()> {
    let s = Scenario::plus(
        4,
        2,
        vec![
            SessionSpec::new("E1", 0, Value::One),
            SessionSpec::new("E2", 3, Value::Zero),
        ],
    );
    let r = run(&s)?;
    println!(
        "depth {}, {} messages delivered",
        s.depth(),
        r.messages.len()
    );
    for v in &r.verdicts {
        println!(
            "{}: agreement={} validity={:?} outputs={:?}",
            v.session, v.agreement, v.validity, v.outputs
        );
    }
    Ok(())
}
