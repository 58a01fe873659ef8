//! The three scripted strategies at n = 3, t = 2. At least one of them
//! must break a session.

use abg_core::adversary::Alpha;
use abg_core::analysis::{n_scenario, run_n};

fn main() -> abg_core::Result<()> {
    for a in [Alpha::One, Alpha::Two, Alpha::Three] {
        let s = n_scenario(a, 2);
        let r = run_n(a, 2)?;
        println!("{} plan {:?}", a.name(), s.plan.byz);
        for v in &r.verdicts {
            println!(
                "  {}: agreement={} validity={:?} outputs={:?}",
                v.session, v.agreement, v.validity, v.outputs
            );
        }
    }
    Ok(())
}
