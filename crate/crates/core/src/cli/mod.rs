//! Scenario files, reports and the `abg` subcommands.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{Alpha, CorruptionPlan, StrategyId};
use crate::analysis::{
    check_pairing, embed_as_mix, run_l, run_n, EmbedReport, LNode, LRun, Verdict, VIEW_PAIRINGS,
};
use crate::auth::{PlayerId, SessionId};
use crate::eig::Value;
use crate::engine::{run, wire, RunResult, Scenario, SessionSpec};
use crate::error::Error;
use crate::protocol::ProtocolKind;

pub mod sweep;

pub use sweep::{sweep, sweep_embed, SweepConfig, SweepReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    Pass,
    Violation,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    #[serde(default)]
    byzantine: BTreeMap<String, Vec<u16>>,
    #[serde(default)]
    passive: Vec<u16>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionFile {
    id: String,
    general: u16,
    input: Value,
}

/// On-disk scenario, TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub n: usize,
    pub t: usize,
    #[serde(default = "zero")]
    pub v0: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub expect: Option<Expect>,
    #[serde(default = "plus")]
    pub protocol: ProtocolKind,
    #[serde(rename = "session")]
    sessions: Vec<SessionFile>,
    #[serde(default)]
    plan: PlanFile,
    #[serde(default = "silent")]
    pub strategy: StrategyId,
}

fn zero() -> Value {
    Value::Zero
}

fn plus() -> ProtocolKind {
    ProtocolKind::EigPrunePlus
}

fn silent() -> StrategyId {
    StrategyId::Silent
}

/// A scenario file problem, anchored to a line when one can be named.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path, l, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ParseError {}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// First line whose key is `key`, or which opens table `key`.
fn line_of_key(src: &str, key: &str) -> Option<usize> {
    src.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|r| r.trim_start().starts_with('='))
                || l.trim_start_matches('[')
                    .strip_prefix(key)
                    .is_some_and(|r| r.starts_with(']') || r.starts_with('.'))
        })
        .map(|i| i + 1)
}

impl ScenarioFile {
    pub fn parse(src: &str, path: &str) -> Result<Scenario, ParseError> {
        let err = |line, message: String| ParseError {
            path: path.to_string(),
            line,
            message,
        };
        let file: ScenarioFile = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_at(src, s.start));
            err(line, e.message().trim().to_string())
        })?;
        if file.version != FILE_VERSION {
            return Err(err(
                line_of_key(src, "version"),
                format!(
                    "unsupported version {}, expected {FILE_VERSION}",
                    file.version
                ),
            ));
        }
        let scenario = file.to_scenario();
        if let Err(e) = scenario.validate() {
            let key = match &e {
                Error::Budget(_) | Error::WrongPlan { .. } => "plan",
                Error::InvalidScenario(m) if m.contains("session") || m.contains("General") => {
                    "session"
                }
                Error::InvalidScenario(m) if m.contains("player") => "plan",
                _ => "n",
            };
            return Err(err(line_of_key(src, key), e.to_string()));
        }
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario, ParseError> {
        let src = fs::read_to_string(path).map_err(|e| ParseError {
            path: path.display().to_string(),
            line: None,
            message: e.to_string(),
        })?;
        Self::parse(&src, &path.display().to_string())
    }

    /// The `expect` field of a file, if present.
    pub fn expectation(src: &str) -> Option<Expect> {
        toml::from_str::<ScenarioFile>(src)
            .ok()
            .and_then(|f| f.expect)
    }

    fn to_scenario(&self) -> Scenario {
        let mut plan = CorruptionPlan::none();
        for (s, ps) in &self.plan.byzantine {
            plan = plan.byzantine(s.as_str(), ps);
        }
        plan = plan.passive(&self.plan.passive);
        Scenario {
            n: self.n,
            t: self.t,
            v0: self.v0,
            protocol: self.protocol,
            sessions: self
                .sessions
                .iter()
                .map(|s| SessionSpec::new(s.id.as_str(), s.general, s.input))
                .collect(),
            plan,
            strategy: self.strategy,
            seed: self.seed,
        }
    }

    /// Inverse of `parse`, for writing scenario files.
    pub fn from_scenario(s: &Scenario, expect: Option<Expect>) -> ScenarioFile {
        ScenarioFile {
            version: FILE_VERSION,
            n: s.n,
            t: s.t,
            v0: s.v0,
            seed: s.seed,
            expect,
            protocol: s.protocol,
            sessions: s
                .sessions
                .iter()
                .map(|x| SessionFile {
                    id: x.id.as_str().to_string(),
                    general: x.general.0,
                    input: x.input,
                })
                .collect(),
            plan: PlanFile {
                byzantine: s
                    .plan
                    .byz
                    .iter()
                    .map(|(k, v)| (k.as_str().to_string(), v.iter().map(|p| p.0).collect()))
                    .collect(),
                passive: s.plan.external.iter().map(|p| p.0).collect(),
            },
            strategy: s.strategy,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files serialize")
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Stable JSON summary of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub depth: usize,
    pub verdicts: Vec<Verdict>,
    pub violations: usize,
    pub messages: usize,
    pub trace_sha256: String,
}

impl RunReport {
    pub fn new(scenario: &Scenario, r: &RunResult) -> Self {
        RunReport {
            scenario: scenario.clone(),
            depth: scenario.depth(),
            verdicts: r.verdicts.clone(),
            violations: r.violations(),
            messages: r.messages.len(),
            trace_sha256: digest(&r.trace_bytes()),
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum TraceLine<'a> {
    Message {
        session: &'a SessionId,
        round: usize,
        from: usize,
        to: usize,
        payload: String,
        sigs: Vec<String>,
        malformed: bool,
    },
    Final {
        session: &'a SessionId,
        node: usize,
        player: PlayerId,
        status: crate::adversary::ProcessStatus,
        header: &'a crate::protocol::Header,
        output: Option<Value>,
    },
}

/// One JSON line per delivered message, then one per process final state.
pub fn write_trace(r: &RunResult, out: &mut dyn Write) -> std::io::Result<()> {
    for m in &r.messages {
        let decoded = wire::decode(&m.payload);
        let sigs = decoded
            .as_ref()
            .map(|p| {
                p.signatures()
                    .iter()
                    .map(|s| hex::encode(s.token))
                    .collect()
            })
            .unwrap_or_default();
        let line = TraceLine::Message {
            session: &m.session,
            round: m.round,
            from: m.from,
            to: m.to,
            payload: hex::encode(&m.payload),
            sigs,
            malformed: decoded.is_err(),
        };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
    }
    for t in &r.traces {
        let line = TraceLine::Final {
            session: &t.session,
            node: t.node,
            player: t.player,
            status: t.status,
            header: &t.header,
            output: t.output,
        };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingReport {
    pub l_node: String,
    pub strategy: String,
    pub player: PlayerId,
    pub equal: bool,
    pub divergence: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhibitReport {
    pub t: usize,
    pub l_outputs: BTreeMap<String, Option<Value>>,
    pub pairings: Vec<PairingReport>,
    pub n_verdicts: BTreeMap<String, Verdict>,
    /// Some scripted run broke agreement or validity in its first session.
    pub violation_found: bool,
    pub views_equal: bool,
}

fn pairing(
    node: LNode,
    a: Alpha,
    player: PlayerId,
    d: Option<crate::analysis::Divergence>,
) -> PairingReport {
    PairingReport {
        l_node: node.to_string(),
        strategy: a.name().to_string(),
        player,
        equal: d.is_none(),
        divergence: d.map(|d| format!("{d:?}")),
    }
}

/// Runs L and the three scripted scenarios and lines up the six views.
pub fn exhibit_l(t: usize) -> crate::Result<ExhibitReport> {
    let l: LRun = run_l(t)?;
    let mut n_runs = BTreeMap::new();
    for a in [Alpha::One, Alpha::Two, Alpha::Three] {
        n_runs.insert(a.name(), run_n(a, t)?);
    }
    let pairings: Vec<PairingReport> = VIEW_PAIRINGS
        .iter()
        .map(|(node, a, p)| {
            let d = check_pairing(&l, *node, &n_runs[a.name()], *p);
            pairing(*node, *a, *p, d)
        })
        .collect();
    let e1 = SessionId::new("E1");
    let n_verdicts: BTreeMap<String, Verdict> = n_runs
        .iter()
        .map(|(k, r)| (k.to_string(), r.verdict(&e1).cloned().expect("E1 verdict")))
        .collect();
    Ok(ExhibitReport {
        t,
        l_outputs: LNode::ALL
            .iter()
            .map(|n| (n.to_string(), l.output(*n)))
            .collect(),
        violation_found: n_verdicts.values().any(|v| !v.holds()),
        views_equal: pairings.iter().all(|p| p.equal),
        pairings,
        n_verdicts,
    })
}

#[derive(Parser, Debug)]
#[command(
    name = "abg",
    version,
    about = "Authenticated Byzantine Generals under parallel composition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write a JSONL message trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Exit 0 when a violation occurs and 1 when none does.
    #[arg(long)]
    pub expect_violation: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every plan within budget, both General placements, all inputs.
    Sweep {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 2)]
        sessions: usize,
        /// Comma-separated strategies; `random:K` is expanded by --random.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "split-world,two-faced,silent"
        )]
        strategies: Vec<StrategyId>,
        /// Number of random seeds added to the strategy list.
        #[arg(long, default_value_t = 0)]
        random: u64,
        /// Run EIGPrune with this Byzantine/passive split instead.
        #[arg(long, num_args = 2, value_names = ["T_B", "T_P"])]
        eig_prune: Option<Vec<usize>>,
        /// Also check the stand-alone embedding of every session.
        #[arg(long)]
        embed: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run system L next to the three scripted scenarios and compare views.
    #[command(name = "exhibit-L", alias = "exhibit-l")]
    ExhibitL {
        #[arg(long, default_value_t = 1)]
        t: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run one session of a scenario as a stand-alone mixed-adversary run.
    EmbedMix {
        scenario: PathBuf,
        /// Index of the session to embed.
        #[arg(long, default_value_t = 0)]
        session: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidScenario(_)
            | Error::Budget(_)
            | Error::WrongPlan { .. }
            | Error::Config(_) => Failure::Usage(e.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn emit_report<T: Serialize>(
    report: &T,
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let mut json = serde_json::to_string_pretty(report).expect("reports serialize");
    json.push('\n');
    match out {
        Some(p) => fs::write(p, json)?,
        None => stdout.write_all(json.as_bytes())?,
    }
    Ok(())
}

fn verdict_code(violated: bool, expect: bool) -> i32 {
    if violated == expect {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    }
}

/// Executes a parsed command; returns the exit code.
pub fn execute(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match dispatch(cmd, stdout, stderr) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_VIOLATION
        }
    }
}

fn dispatch(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Run { scenario, common } => {
            let src = fs::read_to_string(scenario)
                .map_err(|e| Failure::Usage(format!("{}: {e}", scenario.display())))?;
            let mut s = ScenarioFile::parse(&src, &scenario.display().to_string())?;
            if let Some(seed) = common.seed {
                s.seed = seed;
            }
            let expect = common.expect_violation
                || ScenarioFile::expectation(&src) == Some(Expect::Violation);
            let r = run(&s)?;
            if let Some(p) = &common.trace {
                let mut f = std::io::BufWriter::new(fs::File::create(p)?);
                write_trace(&r, &mut f)?;
                f.flush()?;
            }
            let report = RunReport::new(&s, &r);
            emit_report(&report, &common.out, stdout)?;
            let _ = writeln!(
                stderr,
                "{} violation(s) in {} session(s)",
                report.violations,
                s.sessions.len()
            );
            Ok(verdict_code(report.violations > 0, expect))
        }
        Command::Sweep {
            n,
            t,
            sessions,
            strategies,
            random,
            eig_prune,
            embed,
            common,
        } => {
            let mut list = strategies.clone();
            list.extend((0..*random).map(|k| StrategyId::Random {
                seed: k.wrapping_add(common.seed.unwrap_or(0)),
            }));
            let mut cfg = SweepConfig::plus(*n, *t, *sessions, list);
            if let Some(v) = eig_prune {
                cfg.protocol = ProtocolKind::EigPrune {
                    t_b: v[0],
                    t_p: v[1],
                };
                cfg.t = v[0] + v[1];
            }
            if *embed {
                let r = sweep_embed(&cfg)?;
                emit_report(&r, &common.out, stdout)?;
                let _ = writeln!(stderr, "{} embeddings, {} unequal", r.checks, r.unequal);
                return Ok(if r.unequal == 0 {
                    EXIT_PASS
                } else {
                    EXIT_VIOLATION
                });
            }
            let r = sweep(&cfg)?;
            emit_report(&r, &common.out, stdout)?;
            let _ = writeln!(
                stderr,
                "{} runs, {} skipped, {} with violations",
                r.runs, r.skipped, r.violations
            );
            Ok(verdict_code(r.violations > 0, common.expect_violation))
        }
        Command::ExhibitL { t, common } => {
            let r = exhibit_l(*t)?;
            if let Some(p) = &common.trace {
                let mut f = std::io::BufWriter::new(fs::File::create(p)?);
                for a in [Alpha::One, Alpha::Two, Alpha::Three] {
                    write_trace(&run_n(a, *t)?, &mut f)?;
                }
                f.flush()?;
            }
            emit_report(&r, &common.out, stdout)?;
            for p in &r.pairings {
                let _ = writeln!(
                    stderr,
                    "{:>2} vs {} {}: {}",
                    p.l_node,
                    p.strategy,
                    p.player,
                    if p.equal { "equal" } else { "DIVERGE" }
                );
            }
            if !r.views_equal {
                return Ok(EXIT_VIOLATION);
            }
            Ok(verdict_code(r.violation_found, common.expect_violation))
        }
        Command::EmbedMix {
            scenario,
            session,
            common,
        } => {
            let src = fs::read_to_string(scenario)
                .map_err(|e| Failure::Usage(format!("{}: {e}", scenario.display())))?;
            let mut s = ScenarioFile::parse(&src, &scenario.display().to_string())?;
            if let Some(seed) = common.seed {
                s.seed = seed;
            }
            let r: EmbedReport = embed_as_mix(&s, *session)?;
            emit_report(&r, &common.out, stdout)?;
            let _ = writeln!(
                stderr,
                "session {} as EIGPrune(t_b = {}, t_p = {}): traces {}",
                r.session,
                r.t_b,
                r.t_p,
                if r.equal { "identical" } else { "differ" }
            );
            if !r.equal {
                return Ok(EXIT_VIOLATION);
            }
            Ok(verdict_code(!r.standalone.holds(), common.expect_violation))
        }
    }
}

/// Parses `args` (including the program name) and runs.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli.command, stdout, stderr),
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_PASS
                }
                _ => EXIT_USAGE,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
version = 1
n = 4
t = 2
seed = 3

[[session]]
id = "E1"
general = 0
input = 1

[[session]]
id = "E2"
general = 1
input = 0

[plan]
passive = [3]

[plan.byzantine]
E1 = [2]

[strategy]
name = "split-world"
"#;

    #[test]
    fn parses_and_round_trips() {
        let s = ScenarioFile::parse(GOOD, "good.toml").unwrap();
        assert_eq!(s.n, 4);
        assert_eq!(s.strategy, StrategyId::SplitWorld);
        assert_eq!(s.plan.external, [PlayerId(3)].into());
        let back = ScenarioFile::from_scenario(&s, None).to_toml();
        assert_eq!(ScenarioFile::parse(&back, "back.toml").unwrap(), s);
    }

    #[test]
    fn errors_carry_lines() {
        let bad = GOOD.replace("input = 1", "input = 7");
        let e = ScenarioFile::parse(&bad, "x.toml").unwrap_err();
        assert_eq!(e.line, Some(10), "{e}");
        let over = GOOD.replace("E1 = [2]", "E1 = [1, 2]");
        let e = ScenarioFile::parse(&over, "x.toml").unwrap_err();
        assert_eq!(e.line, line_of_key(&over, "plan"), "{e}");
        assert!(e.to_string().starts_with("x.toml:"));
        let v = GOOD.replace("version = 1", "version = 2");
        assert_eq!(ScenarioFile::parse(&v, "x.toml").unwrap_err().line, Some(2));
        let unk = GOOD.replace("seed = 3", "sed = 3");
        assert_eq!(
            ScenarioFile::parse(&unk, "x.toml").unwrap_err().line,
            Some(5)
        );
    }

    #[test]
    fn report_is_stable() {
        let s = ScenarioFile::parse(GOOD, "good.toml").unwrap();
        let a = serde_json::to_string(&RunReport::new(&s, &run(&s).unwrap())).unwrap();
        let b = serde_json::to_string(&RunReport::new(&s, &run(&s).unwrap())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_lines_are_json() {
        let s = ScenarioFile::parse(GOOD, "good.toml").unwrap();
        let r = run(&s).unwrap();
        let mut buf = Vec::new();
        write_trace(&r, &mut buf).unwrap();
        let lines: Vec<serde_json::Value> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), r.messages.len() + r.traces.len());
        assert!(lines.iter().filter(|l| l["kind"] == "final").count() == 8);
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(main_with_args(["abg", "bogus"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(
            main_with_args(["abg", "sweep", "--n", "9", "--t", "1"], &mut o, &mut e),
            EXIT_USAGE
        );
    }
}
