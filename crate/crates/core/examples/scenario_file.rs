//! Loading a TOML scenario, running it, and dumping the JSONL trace.

use abg_core::cli::{write_trace, RunReport, ScenarioFile};
use abg_core::engine::run;

const SRC: &str = r#"
version = 1
n = 4
t = 2
seed = 1

[[session]]
id = "E1"
general = 0
input = 1

[[session]]
id = "E2"
general = 1
input = 0

[plan.byzantine]
E1 = [3]
E2 = [2]

[strategy]
name = "random"
seed = 9
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = ScenarioFile::parse(SRC, "inline.toml")?;
    let r = run(&s)?;
    let report = RunReport::new(&s, &r);
    println!(
        "violations {}, trace sha256 {}",
        report.violations, report.trace_sha256
    );
    let mut buf = Vec::new();
    write_trace(&r, &mut buf)?;
    for l in String::from_utf8(buf)?.lines().take(3) {
        println!("{l}");
    }
    if let Err(e) = ScenarioFile::parse(&SRC.replace("input = 1", "input = 2"), "inline.toml") {
        println!("bad input: {e}");
    }
    Ok(())
}
