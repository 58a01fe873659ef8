//! Exhaustive desk-scale sweeps over plans, General placements, inputs and strategies.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{check_mix_budget, CorruptionPlan, StrategyId};
use crate::analysis::{embed_all, EmbedReport};
use crate::auth::{PlayerId, SessionId};
use crate::eig::Value;
use crate::engine::{run, Scenario, SessionSpec};
use crate::error::{Error, Result};
use crate::protocol::ProtocolKind;

pub const MAX_N: usize = 6;
pub const MAX_SESSIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub t: usize,
    pub sessions: usize,
    pub v0: Value,
    pub protocol: ProtocolKind,
    pub strategies: Vec<StrategyId>,
}

impl SweepConfig {
    pub fn plus(n: usize, t: usize, sessions: usize, strategies: Vec<StrategyId>) -> Self {
        SweepConfig {
            n,
            t,
            sessions,
            v0: Value::Zero,
            protocol: ProtocolKind::EigPrunePlus,
            strategies,
        }
    }

    pub fn check_guard(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_N || self.sessions == 0 || self.sessions > MAX_SESSIONS {
            return Err(Error::Config(format!(
                "sweep limited to 1 ≤ n ≤ {MAX_N} and 1 ≤ sessions ≤ {MAX_SESSIONS}, got n = {}, sessions = {}",
                self.n, self.sessions
            )));
        }
        Ok(())
    }
}

/// The split-world, two-faced and silent strategies plus `random` seeds `0..k`.
pub fn library_strategies(random: u64) -> Vec<StrategyId> {
    let mut s = vec![
        StrategyId::SplitWorld,
        StrategyId::TwoFaced,
        StrategyId::Silent,
    ];
    s.extend((0..random).map(|seed| StrategyId::Random { seed }));
    s
}

pub fn session_id(k: usize) -> SessionId {
    SessionId::new(format!("E{}", k + 1))
}

fn subsets(n: usize, max: usize) -> Vec<BTreeSet<PlayerId>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize <= max)
        .map(|m| {
            (0..n)
                .filter(|i| m >> i & 1 == 1)
                .map(PlayerId::from_index)
                .collect()
        })
        .collect()
}

/// Every assignment of Byzantine sets to `l` sessions whose union has at most `t` players.
pub fn budget_plans(n: usize, t: usize, l: usize) -> Vec<CorruptionPlan> {
    let subs = subsets(n, t);
    let mut plans = vec![Vec::<BTreeSet<PlayerId>>::new()];
    for _ in 0..l {
        let mut next = Vec::new();
        for p in &plans {
            let used: BTreeSet<PlayerId> = p.iter().flatten().copied().collect();
            for s in &subs {
                if used.union(s).count() <= t {
                    let mut q = p.clone();
                    q.push(s.clone());
                    next.push(q);
                }
            }
        }
        plans = next;
    }
    plans
        .into_iter()
        .map(|sets| CorruptionPlan {
            byz: sets
                .into_iter()
                .enumerate()
                .filter(|(_, s)| !s.is_empty())
                .map(|(k, s)| (session_id(k), s))
                .collect(),
            external: BTreeSet::new(),
        })
        .collect()
}

/// Mixed plans: per session at most `t_b` Byzantine, and at most `t_p`
/// further leaked players as seen from every session.
pub fn mix_plans(n: usize, t_b: usize, t_p: usize, l: usize) -> Vec<CorruptionPlan> {
    let ids: Vec<SessionId> = (0..l).map(session_id).collect();
    let mut out = Vec::new();
    for byz in budget_plans(n, n, l) {
        if ids.iter().any(|s| byz.byz_in(s).len() > t_b) {
            continue;
        }
        let used = byz.byz_any();
        for ext in subsets(n, t_p) {
            if !ext.is_disjoint(&used) {
                continue;
            }
            let plan = CorruptionPlan {
                byz: byz.byz.clone(),
                external: ext,
            };
            if check_mix_budget(&plan, &ids, t_b, t_p) {
                out.push(plan);
            }
        }
    }
    out
}

/// All Generals player 0, or session `k` led by player `k mod n`.
pub fn placements(n: usize, l: usize) -> Vec<Vec<PlayerId>> {
    let same = vec![PlayerId(0); l];
    let spread: Vec<PlayerId> = (0..l).map(|k| PlayerId::from_index(k % n)).collect();
    if same == spread {
        vec![same]
    } else {
        vec![same, spread]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    pub runs: usize,
    /// Scenarios dropped because a scripted strategy does not fit the plan.
    pub skipped: usize,
    pub violations: usize,
    /// Up to 20 violating scenarios, in enumeration order.
    pub examples: Vec<Scenario>,
}

/// All scenarios of the sweep, in a fixed order, and the number skipped.
pub fn enumerate(cfg: &SweepConfig) -> Result<(Vec<Scenario>, usize)> {
    cfg.check_guard()?;
    let mut out = Vec::new();
    let mut skipped = 0;
    let plans = match cfg.protocol {
        ProtocolKind::EigPrunePlus => budget_plans(cfg.n, cfg.t, cfg.sessions),
        ProtocolKind::EigPrune { t_b, t_p } => mix_plans(cfg.n, t_b, t_p, cfg.sessions),
    };
    for plan in plans {
        for generals in placements(cfg.n, cfg.sessions) {
            for bits in 0u32..1 << cfg.sessions {
                let sessions: Vec<SessionSpec> = (0..cfg.sessions)
                    .map(|k| SessionSpec {
                        id: session_id(k),
                        general: generals[k],
                        input: if bits >> k & 1 == 1 {
                            Value::One
                        } else {
                            Value::Zero
                        },
                    })
                    .collect();
                for strategy in &cfg.strategies {
                    if strategy.check(cfg.n, &sessions, &plan).is_err() {
                        skipped += 1;
                        continue;
                    }
                    out.push(Scenario {
                        n: cfg.n,
                        t: cfg.t,
                        v0: cfg.v0,
                        protocol: cfg.protocol,
                        sessions: sessions.clone(),
                        plan: plan.clone(),
                        strategy: *strategy,
                        seed: 0,
                    });
                }
            }
        }
    }
    Ok((out, skipped))
}

pub fn sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    let (scenarios, skipped) = enumerate(cfg)?;
    let results: Vec<usize> = scenarios
        .par_iter()
        .map(|s| run(s).map(|r| r.violations()))
        .collect::<Result<_>>()?;
    let violations = results.iter().filter(|v| **v > 0).count();
    let examples = scenarios
        .iter()
        .zip(&results)
        .filter(|(_, v)| **v > 0)
        .take(20)
        .map(|(s, _)| s.clone())
        .collect();
    Ok(SweepReport {
        runs: scenarios.len(),
        skipped,
        violations,
        examples,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedSweepReport {
    pub checks: usize,
    pub unequal: usize,
    pub oracle_queries: usize,
    pub oracle_refusals: usize,
    pub examples: Vec<(Scenario, usize)>,
}

/// `embed_as_mix` for every scenario of the sweep and every session index.
pub fn sweep_embed(cfg: &SweepConfig) -> Result<EmbedSweepReport> {
    let (scenarios, _) = enumerate(cfg)?;
    let per: Vec<Vec<EmbedReport>> = scenarios.par_iter().map(embed_all).collect::<Result<_>>()?;
    let jobs: Vec<(&Scenario, usize)> = scenarios
        .iter()
        .flat_map(|s| (0..s.sessions.len()).map(move |i| (s, i)))
        .collect();
    let reports: Vec<EmbedReport> = per.into_iter().flatten().collect();
    Ok(EmbedSweepReport {
        checks: reports.len(),
        unequal: reports.iter().filter(|r| !r.equal).count(),
        oracle_queries: reports.iter().map(|r| r.oracle_queries).sum(),
        oracle_refusals: reports.iter().map(|r| r.oracle_refusals).sum(),
        examples: jobs
            .iter()
            .zip(&reports)
            .filter(|(_, r)| !r.equal)
            .take(20)
            .map(|((s, i), _)| ((*s).clone(), *i))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent count: pairs of subsets of {0..n} with union size ≤ t.
    fn count_pairs(n: usize, t: usize) -> usize {
        let mut c = 0;
        for a in 0u32..1 << n {
            for b in 0u32..1 << n {
                if (a | b).count_ones() as usize <= t {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn plan_counts() {
        assert_eq!(count_pairs(4, 2), 67);
        assert_eq!(budget_plans(4, 2, 2).len(), count_pairs(4, 2));
        assert_eq!(budget_plans(2, 1, 2).len(), count_pairs(2, 1));
        assert_eq!(budget_plans(3, 0, 3).len(), 1);
    }

    #[test]
    fn mix_plan_counts() {
        // one session: Byzantine set of size ≤ 1, disjoint passive set of size ≤ 2
        let brute = (0u32..32)
            .flat_map(|b| (0u32..32).map(move |e| (b, e)))
            .filter(|(b, e)| b.count_ones() <= 1 && e.count_ones() <= 2 && b & e == 0)
            .count();
        assert_eq!(mix_plans(5, 1, 2, 1).len(), brute);
        assert!(mix_plans(4, 1, 1, 2).iter().all(|p| check_mix_budget(
            p,
            &[session_id(0), session_id(1)],
            1,
            1
        )));
    }

    #[test]
    fn guard() {
        assert!(enumerate(&SweepConfig::plus(7, 2, 2, vec![StrategyId::Silent])).is_err());
        assert!(enumerate(&SweepConfig::plus(4, 2, 4, vec![StrategyId::Silent])).is_err());
    }

    #[test]
    fn placements_distinct() {
        assert_eq!(
            placements(4, 2),
            vec![
                vec![PlayerId(0), PlayerId(0)],
                vec![PlayerId(0), PlayerId(1)]
            ]
        );
        assert_eq!(placements(3, 1).len(), 1);
    }

    #[test]
    fn alpha_plans_skipped_elsewhere() {
        let (s, skipped) =
            enumerate(&SweepConfig::plus(3, 2, 2, vec![StrategyId::Alpha1])).unwrap();
        assert!(skipped > 0);
        assert!(s
            .iter()
            .all(|x| x.plan.byz_in(&"E1".into()) == [PlayerId(2)].into()));
    }
}
