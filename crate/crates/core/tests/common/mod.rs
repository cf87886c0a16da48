#![allow(dead_code)]

use pareto_avgcost::{CompositeSystem, CostModel, CoupledCostSpec, SubsystemModel};
use proptest::prelude::*;

/// Subsystem shapes `(states, actions)` plus a pool of numbers in `(0, 1)`
/// that is consumed cyclically to fill transitions, outputs and costs.
#[derive(Debug, Clone)]
pub struct RawSystem {
    pub dims: Vec<(usize, usize)>,
    pub pool: Vec<f64>,
}

pub fn raw_system(max_sub: usize, max_states: usize, max_actions: usize) -> impl Strategy<Value = RawSystem> {
    (
        prop::collection::vec((1..=max_states, 1..=max_actions), 1..=max_sub),
        prop::collection::vec(0.05f64..1.0, 97),
    )
        .prop_map(|(dims, pool)| RawSystem { dims, pool })
}

struct Pool<'a> {
    values: &'a [f64],
    pos: usize,
}

impl Pool<'_> {
    fn next(&mut self) -> f64 {
        let v = self.values[self.pos % self.values.len()];
        self.pos += 1;
        v
    }
}

fn stochastic_row(pool: &mut Pool<'_>, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| pool.next()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Strictly positive transitions, so every policy has one aperiodic class.
pub fn build(raw: &RawSystem) -> CompositeSystem {
    let mut pool = Pool { values: &raw.pool, pos: 0 };
    let subsystems: Vec<SubsystemModel> = raw
        .dims
        .iter()
        .map(|&(ns, na)| {
            let transition = (0..ns).map(|_| (0..na).map(|_| stochastic_row(&mut pool, ns)).collect()).collect();
            let output = (0..ns)
                .map(|_| (0..na).map(|_| (0..ns).map(|_| 1.0 + 9.0 * pool.next()).collect()).collect())
                .collect();
            let actions = (0..na).map(|u| format!("u{}", u + 1)).collect();
            SubsystemModel::new(ns, actions, transition, output, None).unwrap()
        })
        .collect();
    let n = subsystems.len();
    let coupling = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 0.3 * pool.next() }).collect())
        .collect();
    let spec = CoupledCostSpec {
        inputs: (0..n).map(|_| 5.0 + 20.0 * pool.next()).collect(),
        coupling,
        ..CoupledCostSpec::two_subsystem(1.0, 1.0, 0.0, 0.0)
    };
    CompositeSystem::new(subsystems, CostModel::Coupled(spec), None).unwrap()
}
