//! Concrete cost models, the built-in worked example and the randomized
//! replication harness.

mod cost;
pub mod paper;
mod replicate;

pub use cost::{build_cost_matrices, CostModel, CostTable, CoupledCostSpec, SubsystemCostForm, SystemCostForm, TransitionRef};
pub use paper::paper_example;
pub use replicate::{
    replicate, replicate_on, replication_seed, rho, sample_system, OutputRanges, ReplicationConfig, ReplicationRecord,
    ReplicationReport, VIOLATION_TOL,
};
