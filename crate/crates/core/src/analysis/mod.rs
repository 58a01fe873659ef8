//! Verdicts, view comparison, and the constructions behind both sides of
//! the n ≥ 2t bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversary::ProcessStatus;
use crate::auth::{PlayerId, SessionId};
use crate::eig::Value;
use crate::engine::{ProcessTrace, SessionSpec};

pub mod embed;
pub mod superplayer;
pub mod system_l;
mod views;

pub use embed::{embed_all, embed_as_mix, standalone_scenario, EmbedReport};
pub use superplayer::{partition, run_partitioned, superplayer_wrap, MetaProcess, PartitionSpec};
pub use system_l::{
    check_pairing, l_topology, n_scenario, pi_prime, run_l, run_n, LNode, LRun, PiPrime,
    VIEW_PAIRINGS,
};
pub use views::{first_divergence, views_equal, Divergence};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub session: SessionId,
    pub agreement: bool,
    /// `None` when the General is Byzantine in this session.
    pub validity: Option<bool>,
    /// Outputs of honest and passive processes.
    pub outputs: BTreeMap<PlayerId, Value>,
    pub classification: BTreeMap<PlayerId, ProcessStatus>,
}

impl Verdict {
    /// Agreement: every honest and passive process output the same value.
    /// Validity: with a non-Byzantine General, that value is its input.
    pub fn from_outputs(
        session: SessionId,
        general: PlayerId,
        input: Value,
        procs: impl IntoIterator<Item = (PlayerId, ProcessStatus, Option<Value>)>,
    ) -> Verdict {
        let mut outputs = BTreeMap::new();
        let mut classification = BTreeMap::new();
        let mut missing = false;
        for (p, status, out) in procs {
            classification.insert(p, status);
            if status == ProcessStatus::Byzantine {
                continue;
            }
            match out {
                Some(v) => {
                    outputs.insert(p, v);
                }
                None => missing = true,
            }
        }
        let mut values = outputs.values();
        let first = values.next().copied();
        let agreement = !missing && values.all(|v| Some(*v) == first);
        let validity = match classification.get(&general) {
            Some(ProcessStatus::Byzantine) => None,
            _ => Some(!missing && outputs.values().all(|v| *v == input)),
        };
        Verdict {
            session,
            agreement,
            validity,
            outputs,
            classification,
        }
    }

    pub fn holds(&self) -> bool {
        self.agreement && self.validity != Some(false)
    }
}

/// Verdict of one session from its traces.
pub fn evaluate(traces: &[&ProcessTrace], spec: &SessionSpec) -> Verdict {
    Verdict::from_outputs(
        spec.id.clone(),
        spec.general,
        spec.input,
        traces.iter().map(|t| (t.player, t.status, t.output)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ProcessStatus::*;

    fn v(b: u8) -> Option<Value> {
        Value::from_u8(b)
    }

    #[test]
    fn byzantine_outputs_ignored() {
        let r = Verdict::from_outputs(
            "E1".into(),
            PlayerId(1),
            Value::Zero,
            [
                (PlayerId(0), Passive, v(0)),
                (PlayerId(1), Honest, v(0)),
                (PlayerId(2), Byzantine, v(1)),
            ],
        );
        assert!(r.agreement && r.validity == Some(true) && r.holds());
    }

    #[test]
    fn passive_counts() {
        let r = Verdict::from_outputs(
            "E1".into(),
            PlayerId(2),
            Value::Zero,
            [
                (PlayerId(0), Passive, v(0)),
                (PlayerId(1), Honest, v(1)),
                (PlayerId(2), Byzantine, None),
            ],
        );
        assert!(!r.agreement);
        assert_eq!(r.validity, None);
    }

    #[test]
    fn fault_free_valid() {
        let r = Verdict::from_outputs(
            "E1".into(),
            PlayerId(0),
            Value::One,
            [(PlayerId(0), Honest, v(1)), (PlayerId(1), Honest, v(1))],
        );
        assert!(r.agreement && r.validity == Some(true));
        let bad = Verdict::from_outputs(
            "E1".into(),
            PlayerId(0),
            Value::One,
            [(PlayerId(0), Honest, v(0)), (PlayerId(1), Honest, v(0))],
        );
        assert!(bad.agreement && bad.validity == Some(false) && !bad.holds());
    }
}
