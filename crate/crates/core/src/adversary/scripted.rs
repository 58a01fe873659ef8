//! The three scripted strategies against three players A=0, B=1, C=2 with
//! A as General of the first session.
//!
//! * `alpha1`: C Byzantine in the first session, A Byzantine in the second.
//!   C speaks from a world where A (leaked) has the other input.
//! * `alpha2`: A Byzantine in the first session only; A is two-faced,
//!   input 0 toward B and input 1 toward C.
//! * `alpha3`: B Byzantine in the first session, A in the second; mirror of `alpha1`.
//!
//! Byzantine processes outside the first session stay silent.

use std::collections::{BTreeMap, BTreeSet};

use crate::auth::PlayerId;
use crate::engine::SessionSpec;
use crate::error::{Error, Result};

use super::{AdversaryEnv, CorruptionPlan, ShadowAdversary, WorldMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alpha {
    One,
    Two,
    Three,
}

impl Alpha {
    pub fn name(self) -> &'static str {
        match self {
            Alpha::One => "alpha1",
            Alpha::Two => "alpha2",
            Alpha::Three => "alpha3",
        }
    }
}

const A: PlayerId = PlayerId(0);
const B: PlayerId = PlayerId(1);
const C: PlayerId = PlayerId(2);

pub fn check_alpha_plan(
    which: Alpha,
    n: usize,
    sessions: &[SessionSpec],
    plan: &CorruptionPlan,
) -> Result<()> {
    let fail = |reason: String| Error::WrongPlan {
        strategy: which.name().into(),
        reason,
    };
    if n != 3 {
        return Err(fail(format!("needs n = 3, got {n}")));
    }
    let Some(first) = sessions.first() else {
        return Err(fail("needs at least one session".into()));
    };
    if first.general != A {
        return Err(fail(format!("General of {} must be A", first.id)));
    }
    if !plan.external.is_empty() {
        return Err(fail("no extra passive players allowed".into()));
    }
    let set = |p: PlayerId| BTreeSet::from([p]);
    let mut expected: BTreeMap<_, BTreeSet<PlayerId>> = BTreeMap::new();
    match which {
        Alpha::One | Alpha::Three => {
            if sessions.len() != 2 {
                return Err(fail(format!("needs two sessions, got {}", sessions.len())));
            }
            expected.insert(
                first.id.clone(),
                set(if which == Alpha::One { C } else { B }),
            );
            expected.insert(sessions[1].id.clone(), set(A));
        }
        Alpha::Two => {
            expected.insert(first.id.clone(), set(A));
        }
    }
    for s in sessions {
        let want = expected.remove(&s.id).unwrap_or_default();
        let got = plan.byz_in(&s.id);
        if got != want {
            return Err(fail(format!(
                "Byzantine set in {} is {got:?}, expected {want:?}",
                s.id
            )));
        }
    }
    if let Some(extra) = plan
        .byz
        .keys()
        .find(|k| !sessions.iter().any(|s| &s.id == *k))
    {
        return Err(fail(format!("plan names unknown session {extra}")));
    }
    Ok(())
}

pub(super) fn alpha(env: &AdversaryEnv<'_>, which: Alpha) -> Result<ShadowAdversary> {
    check_alpha_plan(which, env.n, env.sessions, env.plan)?;
    let mode = match which {
        Alpha::Two => WorldMode::TwoFaced,
        _ => WorldMode::Split,
    };
    let modes = BTreeMap::from([(env.sessions[0].id.clone(), mode)]);
    ShadowAdversary::with_modes(env, &modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::Value;

    fn sessions() -> Vec<SessionSpec> {
        ["E1", "E2"]
            .iter()
            .map(|s| SessionSpec {
                id: (*s).into(),
                general: A,
                input: Value::Zero,
            })
            .collect()
    }

    #[test]
    fn plans_checked() {
        let a1 = CorruptionPlan::none()
            .byzantine("E1", &[2])
            .byzantine("E2", &[0]);
        let a3 = CorruptionPlan::none()
            .byzantine("E1", &[1])
            .byzantine("E2", &[0]);
        let a2 = CorruptionPlan::none().byzantine("E1", &[0]);
        assert!(check_alpha_plan(Alpha::One, 3, &sessions(), &a1).is_ok());
        assert!(check_alpha_plan(Alpha::Three, 3, &sessions(), &a3).is_ok());
        assert!(check_alpha_plan(Alpha::Two, 3, &sessions(), &a2).is_ok());
        assert!(check_alpha_plan(Alpha::Two, 3, &sessions()[..1], &a2).is_ok());
        assert!(check_alpha_plan(Alpha::One, 3, &sessions(), &a3).is_err());
        assert!(check_alpha_plan(Alpha::Two, 3, &sessions(), &a1).is_err());
        assert!(check_alpha_plan(Alpha::One, 4, &sessions(), &a1).is_err());
        assert!(matches!(
            check_alpha_plan(Alpha::Three, 3, &sessions()[..1], &a3),
            Err(Error::WrongPlan { .. })
        ));
    }
}
