//! Fixtures shared by the benchmarks.

use pareto_avgcost::{paper_example, CompositeSystem, CostModel, CoupledCostSpec};

/// `n` subsystems alternating between the two built-in subsystem models,
/// coupled in a ring with 10% of each output forwarded to the next one.
pub fn ring_system(n: usize) -> CompositeSystem {
    let base = paper_example();
    let subsystems = (0..n).map(|i| base.subsystem(i % 2).clone()).collect();
    let mut coupling = vec![vec![0.0; n]; n];
    if n > 1 {
        for (i, row) in coupling.iter_mut().enumerate() {
            row[(i + 1) % n] = 0.1;
        }
    }
    let spec = CoupledCostSpec {
        inputs: (0..n).map(|i| 15.0 + i as f64).collect(),
        coupling,
        ..CoupledCostSpec::two_subsystem(15.0, 16.0, 0.0, 0.0)
    };
    CompositeSystem::new(subsystems, CostModel::Coupled(spec), None).expect("ring system")
}
