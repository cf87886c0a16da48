//! State-wise multiobjective analysis of one-stage expected costs.
//!
//! At each composite state every admissible joint action yields a point
//! `(k_(1)(m,u), …, k_(N)(m,u))` plus the system cost `k(m,u)`. The Pareto
//! control policy picks, state by state, the joint action with the smallest
//! system one-stage expected cost.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CompositePolicy, CompositeSystem, GroupLabel};
use crate::stage::{self, StageTable};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageCostPoint {
    pub state: usize,
    pub action: Vec<usize>,
    pub subsystem: Vec<f64>,
    pub system: f64,
}

impl StageCostPoint {
    fn from_entry(m: usize, e: &stage::StageEntry) -> Self {
        Self {
            state: m,
            action: e.action.clone(),
            subsystem: e.subsystem.clone(),
            system: e.system,
        }
    }
}

/// One-stage expected costs of joint action `u` at composite state `m`.
pub fn stage_costs(sys: &CompositeSystem, m: usize, u: &[usize]) -> Result<StageCostPoint> {
    if m >= sys.num_states() {
        return Err(Error::Domain(format!("state {} outside 1..={}", m + 1, sys.num_states())));
    }
    if !sys.is_admissible(m, u) {
        return Err(Error::Inadmissible {
            state: m + 1,
            action: u.iter().map(|a| a + 1).collect(),
        });
    }
    let e = stage::entry(sys, m, u.to_vec())?;
    Ok(StageCostPoint::from_entry(m, &e))
}

/// `a` weakly below `b` everywhere and strictly below somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Flags the nondominated points (minimization).
pub fn nondominated_mask(points: &[Vec<f64>]) -> Vec<bool> {
    points
        .iter()
        .map(|p| !points.iter().any(|q| dominates(q, p)))
        .collect()
}

/// Nondominated subsystem-cost points at state `m`.
pub fn pareto_frontier(sys: &CompositeSystem, m: usize) -> Result<Vec<StageCostPoint>> {
    let points = sys
        .admissible_joint_actions(m)
        .into_iter()
        .map(|u| stage_costs(sys, m, &u))
        .collect::<Result<Vec<_>>>()?;
    let vectors: Vec<Vec<f64>> = points.iter().map(|p| p.subsystem.clone()).collect();
    let mask = nondominated_mask(&vectors);
    Ok(points.into_iter().zip(mask).filter_map(|(p, keep)| keep.then_some(p)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateAnalysis {
    pub points: Vec<StageCostPoint>,
    pub on_frontier: Vec<bool>,
    /// Position in `points` of the selected action.
    pub selected: usize,
}

impl StateAnalysis {
    pub fn selected_point(&self) -> &StageCostPoint {
        &self.points[self.selected]
    }

    pub fn frontier(&self) -> impl Iterator<Item = &StageCostPoint> {
        self.points.iter().zip(&self.on_frontier).filter_map(|(p, on)| on.then_some(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupMode {
    /// Componentwise maximum of the subsystem costs.
    MinorMax,
    /// Componentwise minimum of the subsystem costs.
    PrincipalMin,
}

/// How the componentwise group rule compares with the system-cost rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum GroupComparison {
    MixedLabels,
    Agrees { mode: GroupMode },
    Disagrees { mode: GroupMode, states: Vec<usize> },
    NoOptimizer { mode: GroupMode, state: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoReport {
    pub states: Vec<StateAnalysis>,
    pub policy: CompositePolicy,
    /// Canonical 1-based number of the policy when it factors.
    pub policy_id: Option<usize>,
    pub group: GroupComparison,
}

impl ParetoReport {
    /// Whether every selected point is nondominated at its state.
    pub fn selection_on_frontier(&self) -> bool {
        self.states.iter().all(|s| s.on_frontier[s.selected])
    }

    /// `state,action_tuple,k_sub1..k_subN,k_system,on_frontier,selected`
    /// with 1-based states and action tuples written as `(a;b;…)`.
    pub fn frontier_csv(&self) -> String {
        let n = self.states.first().and_then(|s| s.points.first()).map_or(0, |p| p.subsystem.len());
        let mut out = String::from("state,action_tuple");
        for i in 1..=n {
            let _ = write!(out, ",k_sub{i}");
        }
        out.push_str(",k_system,on_frontier,selected\n");
        for (m, s) in self.states.iter().enumerate() {
            for (j, p) in s.points.iter().enumerate() {
                let tuple: Vec<String> = p.action.iter().map(|a| (a + 1).to_string()).collect();
                let _ = write!(out, "{},({})", m + 1, tuple.join(";"));
                for v in &p.subsystem {
                    let _ = write!(out, ",{v}");
                }
                let _ = writeln!(out, ",{},{},{}", p.system, s.on_frontier[j], j == s.selected);
            }
        }
        out
    }
}

pub fn pareto_policy(sys: &CompositeSystem) -> Result<ParetoReport> {
    let table = StageTable::build(sys)?;
    pareto_policy_from_table(sys, &table)
}

pub(crate) fn pareto_policy_from_table(sys: &CompositeSystem, table: &StageTable) -> Result<ParetoReport> {
    let mut states = Vec::with_capacity(table.num_states());
    let mut actions = Vec::with_capacity(table.num_states());
    for m in 0..table.num_states() {
        let entries = table.state(m);
        if entries.is_empty() {
            return Err(Error::Domain(format!("no admissible joint action at composite state {}", m + 1)));
        }
        let points: Vec<StageCostPoint> = entries.iter().map(|e| StageCostPoint::from_entry(m, e)).collect();
        let vectors: Vec<Vec<f64>> = points.iter().map(|p| p.subsystem.clone()).collect();
        let on_frontier = nondominated_mask(&vectors);
        let selected = crate::avgcost::argmin_by(&points, |p| p.system).expect("nonempty");
        actions.push(points[selected].action.clone());
        states.push(StateAnalysis {
            points,
            on_frontier,
            selected,
        });
    }
    let policy = CompositePolicy::new(sys, actions)?;
    let policy_id = policy.to_factored(sys).map(|f| f.index(sys));
    let group = compare_group_rule(sys, table, &policy);
    Ok(ParetoReport {
        states,
        policy,
        policy_id,
        group,
    })
}

fn compare_group_rule(sys: &CompositeSystem, table: &StageTable, policy: &CompositePolicy) -> GroupComparison {
    let labels = sys.groups();
    let mode = if labels.iter().all(|g| *g == GroupLabel::Minor) {
        GroupMode::MinorMax
    } else if labels.iter().all(|g| *g == GroupLabel::Principal) {
        GroupMode::PrincipalMin
    } else {
        return GroupComparison::MixedLabels;
    };
    match group_policy_from_table(sys, table, mode) {
        Ok(g) => {
            let states: Vec<usize> = (0..sys.num_states()).filter(|&m| g.action(m) != policy.action(m)).map(|m| m + 1).collect();
            if states.is_empty() {
                GroupComparison::Agrees { mode }
            } else {
                GroupComparison::Disagrees { mode, states }
            }
        }
        Err(Error::NoComponentwiseOptimizer { state, .. }) => GroupComparison::NoOptimizer { mode, state },
        Err(_) => GroupComparison::MixedLabels,
    }
}

/// Per state, the joint action whose subsystem-cost vector is componentwise
/// largest (`MinorMax`) or smallest (`PrincipalMin`) among all admissible
/// actions. Fails at the first state where no such action exists.
pub fn group_policy(sys: &CompositeSystem, mode: GroupMode) -> Result<CompositePolicy> {
    let table = StageTable::build(sys)?;
    group_policy_from_table(sys, &table, mode)
}

fn group_policy_from_table(sys: &CompositeSystem, table: &StageTable, mode: GroupMode) -> Result<CompositePolicy> {
    let better_or_equal = |a: &[f64], b: &[f64]| match mode {
        GroupMode::MinorMax => a.iter().zip(b).all(|(x, y)| x >= y),
        GroupMode::PrincipalMin => a.iter().zip(b).all(|(x, y)| x <= y),
    };
    let mut actions = Vec::with_capacity(table.num_states());
    for m in 0..table.num_states() {
        let entries = table.state(m);
        let found = entries
            .iter()
            .find(|e| entries.iter().all(|o| better_or_equal(&e.subsystem, &o.subsystem)));
        match found {
            Some(e) => actions.push(e.action.clone()),
            None => {
                let vectors: Vec<Vec<f64>> = entries.iter().map(|e| e.subsystem.clone()).collect();
                let frontier = entries
                    .iter()
                    .zip(nondominated_mask(&vectors))
                    .filter(|(_, on)| *on)
                    .map(|(e, _)| e.action.iter().map(|a| a + 1).collect())
                    .collect();
                return Err(Error::NoComponentwiseOptimizer { state: m + 1, frontier });
            }
        }
    }
    CompositePolicy::new(sys, actions)
}

/// Utopia point `f^s`: per state and subsystem the smallest one-stage
/// expected cost over admissible joint actions, stacked state-major.
pub fn utopia_point(sys: &CompositeSystem) -> Result<Vec<f64>> {
    Ok(utopia_from_table(&StageTable::build(sys)?))
}

pub(crate) fn utopia_from_table(table: &StageTable) -> Vec<f64> {
    let mut out = Vec::new();
    for m in 0..table.num_states() {
        let entries = table.state(m);
        let n = entries.first().map_or(0, |e| e.subsystem.len());
        for i in 0..n {
            out.push(entries.iter().map(|e| e.subsystem[i]).fold(f64::INFINITY, f64::min));
        }
    }
    out
}

/// Stacked `(k_(1)(m), …, k_(N)(m))` over states for a composite policy.
pub(crate) fn stacked_costs(table: &StageTable, policy: &CompositePolicy) -> Vec<f64> {
    (0..table.num_states())
        .flat_map(|m| {
            table
                .find(m, policy.action(m))
                .expect("policy action is admissible")
                .subsystem
                .clone()
        })
        .collect()
}
