//! The built-in two-subsystem example and its reference values.
//!
//! Each subsystem has states `{1, 2}` and actions `{a, b}`. The output
//! tensors are decoded as `Y[x][u][x']` from the per-policy 2×2 output
//! matrices (rows: current state, columns: next state).

use crate::model::{CompositeSystem, GroupLabel, SubsystemModel};
use crate::scenario::cost::{CostModel, CoupledCostSpec, SubsystemCostForm};

pub const INPUTS: [f64; 2] = [15.0, 16.0];
/// Fraction of subsystem 1's output routed to subsystem 2.
pub const Z12: f64 = 0.25;
/// Fraction of subsystem 2's output routed to subsystem 1.
pub const Z21: f64 = 0.43;

/// `[x][u][x']` transition tensors.
pub const TRANSITION_1: [[[f64; 2]; 2]; 2] = [[[0.7, 0.3], [0.9, 0.1]], [[0.4, 0.6], [0.2, 0.8]]];
pub const TRANSITION_2: [[[f64; 2]; 2]; 2] = [[[0.5, 0.5], [0.6, 0.4]], [[0.45, 0.55], [0.3, 0.7]]];

/// `[x][u][x']` output tensors.
pub const OUTPUT_1: [[[f64; 2]; 2]; 2] = [[[4.8, 4.0], [8.0, 6.4]], [[5.6, 9.6], [11.2, 10.4]]];
pub const OUTPUT_2: [[[f64; 2]; 2]; 2] = [[[4.9, 4.2], [6.3, 8.4]], [[6.3, 7.0], [7.7, 9.8]]];

/// Long-run average cost of subsystem 1 for policies 1..=16.
pub const TABLE_SUBSYSTEM_1: [f64; 16] = [
    2.5602, 2.6712, 2.6390, 2.7255, //
    2.0249, 2.1127, 2.0872, 2.1556, //
    1.8029, 1.8811, 1.8584, 1.9193, //
    1.6317, 1.7025, 1.6820, 1.7371,
];

/// Long-run average cost of subsystem 2 for policies 1..=16.
pub const TABLE_SUBSYSTEM_2: [f64; 16] = [
    2.2511, 1.8617, 1.7921, 1.5235, //
    2.3194, 1.9182, 1.8464, 1.5697, //
    2.3102, 1.9106, 1.8391, 1.5634, //
    2.3383, 1.9338, 1.8615, 1.5825,
];

/// Long-run average cost of the whole system for policies 1..=16.
pub const TABLE_SYSTEM: [f64; 16] = [
    2.7557, 2.4427, 2.4607, 2.2307, //
    2.3801, 2.1328, 2.1522, 1.9695, //
    2.3178, 2.0876, 2.1108, 1.9398, //
    2.1821, 1.9746, 1.9977, 1.8431,
];

/// Tolerance for the reference tables, which were computed from rounded
/// intermediates.
pub const TABLE_TOL: f64 = 5e-3;

/// Reference intermediates for policy 1.
pub mod first_policy {
    pub const TRANSITION: [[f64; 4]; 4] = [
        [0.35, 0.35, 0.15, 0.15],
        [0.315, 0.385, 0.135, 0.165],
        [0.2, 0.2, 0.3, 0.3],
        [0.18, 0.22, 0.27, 0.33],
    ];
    pub const STATIONARY: [f64; 4] = [0.2707, 0.3008, 0.2030, 0.2256];
    pub const STAGE_COST_1: [f64; 4] = [2.9945, 3.1562, 1.8170, 1.9154];
    pub const COST_1: [[f64; 4]; 4] = [
        [2.85, 2.80, 3.42, 3.36],
        [2.95, 3.00, 3.54, 3.60],
        [2.44, 2.40, 1.43, 1.40],
        [2.53, 2.57, 1.48, 1.50],
    ];
    pub const COST_2: [[f64; 4]; 4] = [
        [2.45, 2.87, 2.43, 2.83],
        [1.56, 1.23, 1.55, 1.21],
        [2.69, 3.13, 2.66, 3.10],
        [1.71, 1.34, 1.69, 1.33],
    ];
    pub const COST_SYSTEM: [[f64; 4]; 4] = [
        [3.19, 3.44, 3.48, 3.78],
        [2.48, 2.12, 2.64, 2.24],
        [1.92, 2.01, 2.02, 2.12],
        [1.64, 1.47, 1.71, 1.53],
    ];
}

pub(crate) fn tensor(t: &[[[f64; 2]; 2]; 2]) -> Vec<Vec<Vec<f64>>> {
    t.iter().map(|per_x| per_x.iter().map(|r| r.to_vec()).collect()).collect()
}

fn subsystem(transition: &[[[f64; 2]; 2]; 2], output: &[[[f64; 2]; 2]; 2]) -> SubsystemModel {
    SubsystemModel::new(2, vec!["a".into(), "b".into()], tensor(transition), tensor(output), None)
        .expect("built-in subsystem is well formed")
}

pub fn paper_cost_spec() -> CoupledCostSpec {
    CoupledCostSpec::two_subsystem(INPUTS[0], INPUTS[1], Z12, Z21)
}

fn build(spec: CoupledCostSpec) -> CompositeSystem {
    CompositeSystem::new(
        vec![subsystem(&TRANSITION_1, &OUTPUT_1), subsystem(&TRANSITION_2, &OUTPUT_2)],
        CostModel::Coupled(spec),
        Some(vec![GroupLabel::Minor, GroupLabel::Minor]),
    )
    .expect("built-in system is well formed")
}

/// The two interacting minor-group subsystems with `W = (15, 16)` and
/// coupling fractions 25% (1→2) and 43% (2→1).
pub fn paper_example() -> CompositeSystem {
    build(paper_cost_spec())
}

/// Same system with the second subsystem's cost denominator taken as
/// `Y_2 + Z^(12)`. This does not reproduce the tabulated costs.
pub fn paper_example_inflow_denominator() -> CompositeSystem {
    let mut spec = paper_cost_spec();
    spec.subsystem_forms = vec![SubsystemCostForm::Coupled, SubsystemCostForm::InflowDenominator];
    build(spec)
}
