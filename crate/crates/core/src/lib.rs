//! Long-run average-cost control of systems built from interacting
//! subsystems.
//!
//! A [`CompositeSystem`] is an ordered list of finite controlled Markov
//! chains whose transitions are independent given the joint action, plus a
//! [`CostModel`] that assigns per-subsystem and system costs to composite
//! transitions. The crate evaluates stationary policies, enumerates them,
//! solves the average-cost problem by relative value iteration, and builds
//! the Pareto control policy: at every composite state, the admissible joint
//! action with the smallest system one-stage expected cost.
//!
//! ```
//! use pareto_avgcost::{enumerate_and_rank, pareto_policy, paper_example, Objective};
//!
//! let sys = paper_example();
//! let pareto = pareto_policy(&sys).unwrap();
//! let table = enumerate_and_rank(&sys, Objective::System).unwrap();
//! assert_eq!(pareto.policy_id, table.best().policy_id);
//! ```

pub mod avgcost;
pub mod duality;
mod error;
pub mod kron;
pub mod model;
mod norm;
pub mod pareto;
pub mod scenario;
pub mod stage;
pub mod stationary;

pub use avgcost::{
    average_cost, enumerate_and_rank, evaluate_policy, one_stage_expected, relative_value_iteration, simulate, CostMatrices,
    Objective, PolicyEvaluation, PolicyTable, RviOptions, RviSolution, SimulationResult,
};
pub use duality::{lagrangian, lambda_point, max_crossing, min_common, psi, theorem1_audit, DualityAudit, LambdaPoint};
pub use error::{Error, Result};
pub use kron::{composite_transition, composite_transition_general, kron, Matrix};
pub use model::{
    enumerate_factored_policies, lift_policy, validate, CompositePolicy, CompositeSystem, FactoredPolicy, GroupLabel, Policy,
    SubsystemModel, ValidationReport,
};
pub use norm::Norm;
pub use pareto::{group_policy, pareto_frontier, pareto_policy, stage_costs, utopia_point, GroupMode, ParetoReport, StageCostPoint};
pub use scenario::{build_cost_matrices, paper_example, replicate, rho, CostModel, CoupledCostSpec, ReplicationConfig};
pub use stationary::{stationary_direct, stationary_factored, stationary_power, Distribution};
