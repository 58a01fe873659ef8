//! A small exhaustive sweep: every plan within budget, both General
//! placements, all inputs.

use abg_core::cli::sweep::{budget_plans, library_strategies, sweep, SweepConfig};

fn main() -> abg_core::Result<()> {
    println!(
        "{} plans for n=3, t=1, two sessions",
        budget_plans(3, 1, 2).len()
    );
    let r = sweep(&SweepConfig::plus(3, 1, 2, library_strategies(5)))?;
    println!(
        "{} runs, {} skipped, {} violating",
        r.runs, r.skipped, r.violations
    );
    Ok(())
}
