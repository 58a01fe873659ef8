//! Partitioning n players into three parts and running them as three meta-players.

use abg_core::analysis::{partition, run_partitioned};
use abg_core::eig::Value;
use abg_core::engine::{Scenario, SessionSpec};

fn main() -> abg_core::Result<()> {
    let spec = partition(5, 2, 1)?;
    println!("parts {:?}", spec.sets);
    let s = Scenario::plus(5, 2, vec![SessionSpec::new("E1", 1, Value::One)]);
    let r = run_partitioned(&s, &spec)?;
    for (sid, outs) in &r.inner_outputs {
        println!("{sid}: {outs:?}");
    }
    println!("{} meta traces", r.traces.len());
    match partition(7, 2, 1) {
        Ok(_) => println!("unexpected partition"),
        Err(e) => println!("n = 7: {e}"),
    }
    Ok(())
}
