mod common;

use common::{build, raw_system};
use pareto_avgcost::duality::default_probes;
use pareto_avgcost::kron::{kron_vec, policy_transition};
use pareto_avgcost::model::{factored_policy_count, MixedRadix};
use pareto_avgcost::scenario::CostTable;
use pareto_avgcost::stationary::stationary_power_default;
use pareto_avgcost::*;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

fn factored(sys: &CompositeSystem, id: usize) -> FactoredPolicy {
    FactoredPolicy::from_index(sys, id).unwrap()
}

fn all_factored(sys: &CompositeSystem) -> Vec<FactoredPolicy> {
    enumerate_factored_policies(sys).unwrap().collect()
}

fn tabled(sys: &CompositeSystem) -> CompositeSystem {
    let table = CostTable::from_model(sys, sys.cost_model()).unwrap();
    sys.with_cost_model(CostModel::Table(table)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixed_radix_is_a_bijection(radices in prop::collection::vec(1usize..5, 1..5)) {
        let mr = MixedRadix::new(radices.clone());
        prop_assert_eq!(mr.size(), radices.iter().product::<usize>());
        for m in 0..mr.size() {
            let x = mr.unindex(m);
            prop_assert!(x.iter().zip(&radices).all(|(d, r)| d < r));
            prop_assert_eq!(mr.index(&x).unwrap(), m);
        }
    }

    #[test]
    fn kron_is_associative(a in matrix(2, 3), b in matrix(3, 2), c in matrix(2, 2)) {
        let left = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        let right = kron(&a, &kron(&b, &c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn kron_mixed_product(
        a in matrix(2, 3),
        b in matrix(3, 2),
        x in prop::collection::vec(-2.0f64..2.0, 3),
        y in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let lhs = kron(&a, &b).unwrap().mul_vec(&kron_vec(&x, &y)).unwrap();
        let rhs = kron_vec(&a.mul_vec(&x).unwrap(), &b.mul_vec(&y).unwrap());
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() < 1e-10);
        }
    }

    #[test]
    fn composite_transition_is_stochastic_and_matches_general(raw in raw_system(3, 3, 2), pick in any::<prop::sample::Index>()) {
        let sys = build(&raw);
        let policies = all_factored(&sys);
        let p = &policies[pick.index(policies.len())];
        let kr = composite_transition(&sys, p).unwrap();
        prop_assert!(kr.row_sum_error() < 1e-12);
        prop_assert!(kr.data().iter().all(|&v| v >= 0.0));
        let general = composite_transition_general(&sys, &lift_policy(p, &sys).unwrap()).unwrap();
        prop_assert!(kr.max_abs_diff(&general) < 1e-14);
    }

    #[test]
    fn stationary_solvers_agree(raw in raw_system(3, 3, 2), pick in any::<prop::sample::Index>()) {
        let sys = build(&raw);
        let policies = all_factored(&sys);
        let p = &policies[pick.index(policies.len())];
        let tp = composite_transition(&sys, p).unwrap();
        let direct = stationary_direct(&tp).unwrap();
        let factored = stationary_factored(&sys, p).unwrap();
        let power = stationary_power_default(&tp).unwrap();
        for ((d, f), w) in direct.as_slice().iter().zip(factored.as_slice()).zip(power.as_slice()) {
            prop_assert!((d - f).abs() < 1e-10);
            prop_assert!((d - w).abs() < 1e-9);
        }
        let sum: f64 = direct.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_distribution_annihilates_generator(raw in raw_system(2, 3, 3), pick in any::<prop::sample::Index>()) {
        let sys = build(&raw);
        let policies = all_factored(&sys);
        let p = Policy::Factored(policies[pick.index(policies.len())].clone());
        let q = vec![0.0; sys.num_states()];
        let point = lambda_point(&sys, &p, &q, Norm::Euclidean).unwrap();
        prop_assert!(point.theta_residual <= 1e-10);
        // the Lagrangian does not depend on ν once θ vanishes
        let nu: Vec<f64> = (0..sys.num_states()).map(|m| m as f64 * 7.0 - 3.0).collect();
        prop_assert!((point.lagrangian(&nu).unwrap() - point.phi).abs() < 1e-8);
    }

    #[test]
    fn weak_duality(raw in raw_system(2, 2, 2), q in prop::collection::vec(-2.0f64..2.0, 4), seed in any::<u64>()) {
        let sys = build(&raw);
        let q: Vec<f64> = (0..sys.num_states()).map(|m| q[m % q.len()]).collect();
        for norm in [Norm::Euclidean, Norm::Max] {
            let (_, phi_star) = min_common(&sys, &q, norm).unwrap();
            let probes = default_probes(sys.num_states(), seed);
            let crossing = max_crossing(&sys, &q, norm, &probes).unwrap();
            prop_assert!(crossing.b_star <= phi_star + 1e-9);
        }
    }

    #[test]
    fn pareto_selection_invariant_under_affine_cost_change(raw in raw_system(3, 2, 3), scale in 0.01f64..100.0, shift in -5.0f64..5.0) {
        let base = tabled(&build(&raw));
        let CostModel::Table(table) = base.cost_model().clone() else { unreachable!() };
        let changed = base.with_cost_model(CostModel::Table(table.map(|c| scale * c + shift))).unwrap();
        let a = pareto_policy(&base).unwrap();
        let b = pareto_policy(&changed).unwrap();
        prop_assert_eq!(a.policy, b.policy);
    }

    #[test]
    fn dominated_action_does_not_change_selection(raw in raw_system(2, 3, 2), penalty in 0.01f64..5.0) {
        let base = tabled(&build(&raw));
        let CostModel::Table(table) = base.cost_model().clone() else { unreachable!() };
        // copy of action 1 in subsystem 1 with every cost raised by `penalty`
        let s0 = base.subsystem(0);
        let na = s0.num_actions();
        let extend = |t: Vec<Vec<Vec<f64>>>| t.into_iter().map(|mut per_u| { per_u.push(per_u[0].clone()); per_u }).collect::<Vec<_>>();
        let mut names = s0.actions().to_vec();
        names.push("copy".into());
        let s0x = SubsystemModel::new(s0.num_states(), names, extend(s0.transition_tensor()), extend(s0.output_tensor()), None).unwrap();
        let mut subsystems = base.subsystems().to_vec();
        subsystems[0] = s0x;
        let placeholder = CompositeSystem::new(subsystems.clone(), CostModel::zero(subsystems.len()), None).unwrap();
        let joint = placeholder.joint_action_space().clone();
        let old_joint = base.joint_action_space().clone();
        let ext = CostTable::tabulate(placeholder.num_states(), joint.size(), subsystems.len(), |m, u, k| {
            let mut digits = joint.unindex(u);
            let extra = if digits[0] == na { digits[0] = 0; penalty } else { 0.0 };
            let ou = old_joint.index(&digits).unwrap();
            (table.subsystem.iter().map(|t| t[m][ou][k] + extra).collect(), table.system[m][ou][k] + extra)
        });
        let augmented = placeholder.with_cost_model(CostModel::Table(ext)).unwrap();
        let a = pareto_policy(&base).unwrap();
        let b = pareto_policy(&augmented).unwrap();
        for m in 0..base.num_states() {
            prop_assert_eq!(a.policy.action(m), b.policy.action(m));
        }
    }

    #[test]
    fn pareto_matches_brute_force_argmin(raw in raw_system(3, 3, 3)) {
        let sys = build(&raw);
        let report = pareto_policy(&sys).unwrap();
        for m in 0..sys.num_states() {
            let mut best: Option<(f64, Vec<usize>)> = None;
            for u in sys.admissible_joint_actions(m) {
                let c = stage_costs(&sys, m, &u).unwrap().system;
                if best.as_ref().is_none_or(|(b, _)| c < *b) {
                    best = Some((c, u));
                }
            }
            let best = best.unwrap().1;
            prop_assert_eq!(report.policy.action(m), best.as_slice());
        }
    }

    #[test]
    fn utopia_is_dominated_by_every_policy(raw in raw_system(3, 2, 3)) {
        let sys = build(&raw);
        let f_s = utopia_point(&sys).unwrap();
        let n = sys.num_subsystems();
        for m in 0..sys.num_states() {
            for u in sys.admissible_joint_actions(m) {
                let p = stage_costs(&sys, m, &u).unwrap();
                for i in 0..n {
                    prop_assert!(p.subsystem[i] >= f_s[m * n + i]);
                }
            }
        }
        for p in all_factored(&sys) {
            prop_assert!(rho(&sys, &Policy::Factored(p), Norm::Euclidean).unwrap() >= 0.0);
        }
    }

    #[test]
    fn policy_count_matches_formula(raw in raw_system(3, 3, 3)) {
        let sys = build(&raw);
        let expected: u128 = sys.subsystems().iter().map(|s| (s.num_actions() as u128).pow(s.num_states() as u32)).product();
        prop_assert_eq!(factored_policy_count(&sys), expected);
        let listed = all_factored(&sys);
        prop_assert_eq!(listed.len() as u128, expected);
        for (n, p) in listed.iter().enumerate() {
            prop_assert_eq!(p.index(&sys), n + 1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rvi_matches_enumeration_for_one_subsystem(raw in raw_system(1, 4, 3)) {
        let sys = build(&raw);
        let rvi = relative_value_iteration(&sys, RviOptions::default()).unwrap();
        let table = enumerate_and_rank(&sys, Objective::System).unwrap();
        prop_assert!((rvi.gain - table.min_j()).abs() < 1e-7, "{} vs {}", rvi.gain, table.min_j());
        let j = evaluate_policy(&sys, &Policy::Composite(rvi.policy.clone())).unwrap().j_system;
        prop_assert!((j - table.min_j()).abs() < 1e-7);
    }

    #[test]
    fn rvi_bounds_factored_optimum(raw in raw_system(2, 2, 2)) {
        let sys = build(&raw);
        let rvi = relative_value_iteration(&sys, RviOptions::default()).unwrap();
        let table = enumerate_and_rank(&sys, Objective::System).unwrap();
        prop_assert!(rvi.lower <= rvi.upper);
        prop_assert!(rvi.gain <= table.min_j() + 1e-7);
        let j = evaluate_policy(&sys, &Policy::Composite(rvi.policy.clone())).unwrap().j_system;
        prop_assert!((j - rvi.gain).abs() < 1e-7);
        if let Some(f) = rvi.policy.to_factored(&sys) {
            prop_assert!((table.evaluations[f.index(&sys) - 1].j_system - table.min_j()).abs() < 1e-7);
        }
    }
}

#[test]
fn rho_of_pareto_choice_not_above_first_policy() {
    let sys = paper_example();
    let r = |id| rho(&sys, &Policy::Factored(factored(&sys, id)), Norm::Euclidean).unwrap();
    assert!(r(16) <= r(1));
}

#[test]
fn non_factored_composite_policy_round_trips() {
    let sys = paper_example();
    // subsystem 1 switches action depending on subsystem 2's state
    let actions = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]];
    let p = CompositePolicy::new(&sys, actions).unwrap();
    assert!(p.to_factored(&sys).is_none());
    let tp = composite_transition_general(&sys, &p).unwrap();
    assert!(tp.row_sum_error() < 1e-12);
    let e = evaluate_policy(&sys, &Policy::Composite(p.clone())).unwrap();
    assert_eq!(e.policy_id, None);
    assert_eq!(policy_transition(&sys, &Policy::Composite(p)).unwrap(), tp);
    assert!(e.j_system.is_finite());
}
