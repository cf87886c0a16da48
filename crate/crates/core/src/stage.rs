//! One-stage expected costs for every composite state and admissible joint
//! action: `k(m, u) = Σ_k P(k | m, u) · c(m, u, k)`, per subsystem and for the
//! system, with the composite transition row taken as the product of the
//! subsystem rows.

use rayon::prelude::*;

use crate::error::Result;
use crate::model::CompositeSystem;
use crate::scenario::TransitionRef;

#[derive(Debug, Clone, PartialEq)]
pub struct StageEntry {
    pub action: Vec<usize>,
    /// Index in the unconstrained joint action space.
    pub joint: usize,
    /// Nonzero transition probabilities `(k, P(k | m, u))`, `k` increasing.
    pub row: Vec<(usize, f64)>,
    pub subsystem: Vec<f64>,
    pub system: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTable {
    states: Vec<Vec<StageEntry>>,
}

impl StageTable {
    pub fn build(sys: &CompositeSystem) -> Result<Self> {
        let states = (0..sys.num_states())
            .into_par_iter()
            .map(|m| {
                sys.admissible_joint_actions(m)
                    .into_iter()
                    .map(|u| entry(sys, m, u))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { states })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Admissible entries at `m`, in increasing joint-action order.
    pub fn state(&self, m: usize) -> &[StageEntry] {
        &self.states[m]
    }

    pub fn find(&self, m: usize, action: &[usize]) -> Option<&StageEntry> {
        self.states[m].iter().find(|e| e.action == action)
    }
}

pub(crate) fn entry(sys: &CompositeSystem, m: usize, action: Vec<usize>) -> Result<StageEntry> {
    let n = sys.num_subsystems();
    let from_x = sys.composite_unindex(m);
    let mut to_x = vec![0; n];
    let row = sys.transition_row_sparse(m, &action);
    let mut sub = vec![0.0; n];
    let mut k_sub = vec![0.0; n];
    let mut k_sys = 0.0;
    for &(k, p) in &row {
        sys.unindex_into(k, &mut to_x);
        let t = TransitionRef {
            from: m,
            to: k,
            from_x: &from_x,
            to_x: &to_x,
            action: &action,
        };
        let c = sys.cost_model().transition_costs(sys, t, &mut sub)?;
        k_sys += p * c;
        for (acc, v) in k_sub.iter_mut().zip(&sub) {
            *acc += p * v;
        }
    }
    let joint = sys.joint_action_space().index_unchecked(&action);
    Ok(StageEntry {
        action,
        joint,
        row,
        subsystem: k_sub,
        system: k_sys,
    })
}
