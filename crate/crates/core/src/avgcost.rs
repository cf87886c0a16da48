//! Long-run average cost of stationary policies.
//!
//! Under a unique stationary distribution the average cost does not depend
//! on the initial state and equals `J(π) = β^π · k^π`, where `k^π` is the
//! vector of one-stage expected transition costs.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kron::{policy_transition, Matrix};
use crate::model::{enumerate_factored_policies_capped, CompositePolicy, CompositeSystem, FactoredPolicy, Policy, DEFAULT_ENUMERATION_CAP};
use crate::scenario::build_cost_matrices;
use crate::stage::StageTable;
use crate::stationary::{stationary_direct, Distribution};

/// Transition-cost matrices of one policy over composite `(m, k)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrices {
    pub subsystem: Vec<Matrix>,
    pub system: Matrix,
}

/// Element `m` is `Σ_k P[m,k] · C[m,k]`.
pub fn one_stage_expected(p: &Matrix, c: &Matrix) -> Result<Vec<f64>> {
    if (p.rows(), p.cols()) != (c.rows(), c.cols()) {
        return Err(Error::Shape(format!(
            "transition {}x{} vs cost {}x{}",
            p.rows(),
            p.cols(),
            c.rows(),
            c.cols()
        )));
    }
    Ok((0..p.rows())
        .map(|m| p.row(m).iter().zip(c.row(m)).fold(0.0, |acc, (a, b)| acc + a * b))
        .collect())
}

/// `J = β · k`.
pub fn average_cost(beta: &Distribution, k: &[f64]) -> Result<f64> {
    if beta.len() != k.len() {
        return Err(Error::Shape(format!("distribution of length {} vs cost vector {}", beta.len(), k.len())));
    }
    Ok(beta.as_slice().iter().zip(k).map(|(b, c)| b * c).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    /// Canonical 1-based number when the policy is factored.
    pub policy_id: Option<usize>,
    pub policy: Policy,
    pub transition: Matrix,
    pub beta: Distribution,
    pub k_subsystem: Vec<Vec<f64>>,
    pub k_system: Vec<f64>,
    pub j_subsystem: Vec<f64>,
    pub j_system: f64,
}

impl PolicyEvaluation {
    pub fn objective(&self, objective: Objective) -> f64 {
        match objective {
            Objective::System => self.j_system,
            Objective::Subsystem(i) => self.j_subsystem[i],
        }
    }
}

pub fn evaluate_policy(sys: &CompositeSystem, policy: &Policy) -> Result<PolicyEvaluation> {
    let transition = policy_transition(sys, policy)?;
    let costs = build_cost_matrices(sys, policy)?;
    let k_subsystem = costs
        .subsystem
        .iter()
        .map(|c| one_stage_expected(&transition, c))
        .collect::<Result<Vec<_>>>()?;
    let k_system = one_stage_expected(&transition, &costs.system)?;
    let beta = stationary_direct(&transition)?;
    let j_subsystem = k_subsystem
        .iter()
        .map(|k| average_cost(&beta, k))
        .collect::<Result<Vec<_>>>()?;
    let j_system = average_cost(&beta, &k_system)?;
    Ok(PolicyEvaluation {
        policy_id: policy.factored_index(sys),
        policy: policy.clone(),
        transition,
        beta,
        k_subsystem,
        k_system,
        j_subsystem,
        j_system,
    })
}

/// Which average cost to rank by; subsystem indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    System,
    Subsystem(usize),
}

/// Every factored policy evaluated, in canonical order, plus a ranking.
#[derive(Debug, Clone)]
pub struct PolicyTable {
    pub objective: Objective,
    /// `evaluations[n]` is policy `n + 1`.
    pub evaluations: Vec<PolicyEvaluation>,
    /// Positions into `evaluations`, ascending by objective, ties by index.
    pub ranking: Vec<usize>,
}

impl PolicyTable {
    pub fn best(&self) -> &PolicyEvaluation {
        &self.evaluations[self.ranking[0]]
    }

    pub fn ranked(&self) -> impl Iterator<Item = &PolicyEvaluation> {
        self.ranking.iter().map(|&i| &self.evaluations[i])
    }

    pub fn min_j(&self) -> f64 {
        self.best().objective(self.objective)
    }

    /// `policy,J_sub1,...,J_subN,J_system`, policies in canonical order.
    pub fn to_csv(&self) -> String {
        table_csv(&self.evaluations)
    }
}

pub fn enumerate_and_rank(sys: &CompositeSystem, objective: Objective) -> Result<PolicyTable> {
    enumerate_and_rank_capped(sys, objective, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_and_rank_capped(sys: &CompositeSystem, objective: Objective, cap: u128) -> Result<PolicyTable> {
    if let Objective::Subsystem(i) = objective {
        if i >= sys.num_subsystems() {
            return Err(Error::Domain(format!("no subsystem {}", i + 1)));
        }
    }
    let count = enumerate_factored_policies_capped(sys, cap)?.len();
    let evaluations = (1..=count)
        .into_par_iter()
        .map(|id| {
            let p = FactoredPolicy::from_index(sys, id)?;
            evaluate_policy(sys, &Policy::Factored(p))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = evaluations.iter().map(|e| e.objective(objective)).collect();
    let ranking = rank_with_ties(&values);
    Ok(PolicyTable {
        objective,
        evaluations,
        ranking,
    })
}

/// Relative tolerance under which two objective values count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Ascending order of `values`; runs within [`TIE_TOL`] of the run's first
/// value are ordered by position.
pub fn rank_with_ties(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut start = 0;
    while start < order.len() {
        let v0 = values[order[start]];
        let mut end = start + 1;
        while end < order.len() && values[order[end]] - v0 <= TIE_TOL * v0.abs().max(1.0) {
            end += 1;
        }
        order[start..end].sort_unstable();
        start = end;
    }
    order
}

pub fn table_csv(evaluations: &[PolicyEvaluation]) -> String {
    let n = evaluations.first().map_or(0, |e| e.j_subsystem.len());
    let mut out = String::from("policy");
    for i in 1..=n {
        let _ = write!(out, ",J_sub{i}");
    }
    out.push_str(",J_system\n");
    for (pos, e) in evaluations.iter().enumerate() {
        let id = e.policy_id.unwrap_or(pos + 1);
        let _ = write!(out, "{id}");
        for j in &e.j_subsystem {
            let _ = write!(out, ",{j}");
        }
        let _ = writeln!(out, ",{}", e.j_system);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RviOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Aperiodicity transform `P ← (1 − τ) I + τ P`.
    pub tau: f64,
}

impl Default for RviOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 1_000_000,
            tau: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RviSolution {
    pub policy: CompositePolicy,
    /// Midpoint of the final span bounds on the optimal gain.
    pub gain: f64,
    pub lower: f64,
    pub upper: f64,
    /// Relative values normalized at state 1.
    pub bias: Vec<f64>,
    pub iterations: usize,
}

/// Relative value iteration over composite states and admissible joint
/// actions on the transformed chain `(1 − τ) I + τ P`, which has the same
/// stationary distributions and average costs as `P`. Iterates until the
/// span of `T h − h` drops below `tol`; the optimal gain lies between its
/// min and max.
pub fn relative_value_iteration(sys: &CompositeSystem, opts: RviOptions) -> Result<RviSolution> {
    if !(opts.tau > 0.0 && opts.tau <= 1.0) {
        return Err(Error::Config(format!("tau must be in (0, 1], got {}", opts.tau)));
    }
    let table = StageTable::build(sys)?;
    if let Some(m) = (0..table.num_states()).find(|&m| table.state(m).is_empty()) {
        return Err(Error::Domain(format!("no admissible joint action at composite state {}", m + 1)));
    }
    let n = table.num_states();
    let mut h = vec![0.0; n];
    let mut th = vec![0.0; n];
    let mut span = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        for (m, t) in th.iter_mut().enumerate() {
            *t = table
                .state(m)
                .iter()
                .map(|e| q_value(e, &h, m, opts.tau))
                .fold(f64::INFINITY, f64::min);
        }
        let (lo, hi) = th
            .iter()
            .zip(&h)
            .map(|(a, b)| a - b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        span = hi - lo;
        let reference = th[0];
        for (hm, t) in h.iter_mut().zip(&th) {
            *hm = t - reference;
        }
        if span < opts.tol {
            let actions = (0..n)
                .map(|m| {
                    let mut best: Option<(&[usize], f64)> = None;
                    for e in table.state(m) {
                        let q = q_value(e, &h, m, opts.tau);
                        if best.is_none_or(|(_, b)| q < b) {
                            best = Some((&e.action, q));
                        }
                    }
                    best.expect("nonempty action set").0.to_vec()
                })
                .collect();
            return Ok(RviSolution {
                policy: CompositePolicy::new(sys, actions)?,
                gain: 0.5 * (lo + hi),
                lower: lo,
                upper: hi,
                bias: h,
                iterations: iter,
            });
        }
    }
    Err(Error::RviDiverged {
        iterations: opts.max_iter,
        span,
    })
}

#[inline]
fn q_value(e: &crate::stage::StageEntry, h: &[f64], m: usize, tau: f64) -> f64 {
    let expected: f64 = e.row.iter().map(|&(k, p)| p * h[k]).sum();
    e.system + (1.0 - tau) * h[m] + tau * expected
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub initial_state: usize,
    pub horizon: u64,
    pub system: f64,
    pub subsystem: Vec<f64>,
}

/// Sample-path average `(1/T) Σ c_t` along one trajectory.
///
/// `initial` is a 0-based composite state; `None` draws it uniformly from
/// the same generator. Deterministic given `seed`.
pub fn simulate(sys: &CompositeSystem, policy: &Policy, horizon: u64, seed: u64, initial: Option<usize>) -> Result<SimulationResult> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let n = sys.num_states();
    if let Some(m) = initial {
        if m >= n {
            return Err(Error::Domain(format!("initial state {} outside 1..={n}", m + 1)));
        }
    }
    let p = policy_transition(sys, policy)?;
    let costs = build_cost_matrices(sys, policy)?;
    let cumulative: Vec<Vec<f64>> = (0..n)
        .map(|m| {
            p.row(m)
                .iter()
                .scan(0.0, |acc, v| {
                    *acc += v;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = initial.unwrap_or_else(|| rng.random_range(0..n));
    let mut state = start;
    let mut sys_sum = Neumaier::default();
    let mut sub_sums = vec![Neumaier::default(); sys.num_subsystems()];
    for _ in 0..horizon {
        let r: f64 = rng.random::<f64>() * cumulative[state][n - 1];
        let next = cumulative[state]
            .iter()
            .position(|&c| r < c)
            .unwrap_or_else(|| last_positive(p.row(state)));
        sys_sum.add(costs.system[(state, next)]);
        for (s, c) in sub_sums.iter_mut().zip(&costs.subsystem) {
            s.add(c[(state, next)]);
        }
        state = next;
    }
    let t = horizon as f64;
    Ok(SimulationResult {
        initial_state: start,
        horizon,
        system: sys_sum.total() / t,
        subsystem: sub_sums.iter().map(|s| s.total() / t).collect(),
    })
}

fn last_positive(row: &[f64]) -> usize {
    row.iter().rposition(|&v| v > 0.0).unwrap_or(row.len() - 1)
}

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Ascending by value, ties by position.
pub(crate) fn argmin_by<T>(items: &[T], key: impl Fn(&T) -> f64) -> Option<usize> {
    items
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| key(a).partial_cmp(&key(b)).unwrap_or(Ordering::Equal).then(ia.cmp(ib)))
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SubsystemModel;
    use crate::scenario::paper::{self, paper_example};
    use crate::scenario::CostModel;

    fn policy(sys: &CompositeSystem, id: usize) -> Policy {
        FactoredPolicy::from_index(sys, id).unwrap().into()
    }

    #[test]
    fn stage_cost_from_reference_matrices() {
        let p = Matrix::from_rows(&paper::first_policy::TRANSITION.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        let c1 = Matrix::from_rows(&paper::first_policy::COST_1.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        let k = one_stage_expected(&p, &c1).unwrap();
        for (a, b) in k.iter().zip(paper::first_policy::STAGE_COST_1) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        let c = Matrix::from_rows(&paper::first_policy::COST_SYSTEM.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        let k = one_stage_expected(&p, &c).unwrap();
        assert!((k[0] - 3.4095).abs() < 1e-4);
    }

    #[test]
    fn all_ones_cost() {
        let p = Matrix::from_rows(&[vec![0.2, 0.8], vec![0.6, 0.4]]).unwrap();
        let c = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(one_stage_expected(&p, &c).unwrap(), vec![1.0, 1.0]);
        assert!(one_stage_expected(&p, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn average_cost_of_constant_vector() {
        let beta = Distribution::from_raw(vec![0.1, 0.2, 0.7]).unwrap();
        assert!((average_cost(&beta, &[2.5; 3]).unwrap() - 2.5).abs() < 1e-15);
        assert!(average_cost(&beta, &[1.0; 2]).is_err());
    }

    #[test]
    fn first_policy_values() {
        let sys = paper_example();
        let e = evaluate_policy(&sys, &policy(&sys, 1)).unwrap();
        assert_eq!(e.policy_id, Some(1));
        assert!((e.j_subsystem[0] - 2.5602).abs() < 5e-3);
        assert!((e.j_subsystem[1] - 2.2511).abs() < 5e-3);
        assert!((e.j_system - 2.7557).abs() < 5e-3);
        let dot: f64 = e.beta.as_slice().iter().zip(&e.k_system).map(|(a, b)| a * b).sum();
        assert!((dot - e.j_system).abs() < 1e-12);
    }

    #[test]
    fn thirteenth_policy_subsystem_one() {
        let sys = paper_example();
        let e = evaluate_policy(&sys, &policy(&sys, 13)).unwrap();
        assert!((e.j_subsystem[0] - 1.6317).abs() < 5e-3);
    }

    #[test]
    fn zero_costs() {
        let sys = paper_example().with_cost_model(CostModel::zero(2)).unwrap();
        let e = evaluate_policy(&sys, &policy(&sys, 7)).unwrap();
        assert_eq!(e.j_system, 0.0);
        assert_eq!(e.j_subsystem, vec![0.0, 0.0]);
    }

    #[test]
    fn ranking_minima() {
        let sys = paper_example();
        let t = enumerate_and_rank(&sys, Objective::System).unwrap();
        assert_eq!(t.best().policy_id, Some(16));
        assert!((t.min_j() - 1.8431).abs() < 5e-3);
        let t2 = enumerate_and_rank(&sys, Objective::Subsystem(1)).unwrap();
        assert_eq!(t2.best().policy_id, Some(4));
        assert!((t2.min_j() - 1.5235).abs() < 5e-3);
        let t1 = enumerate_and_rank(&sys, Objective::Subsystem(0)).unwrap();
        assert_eq!(t1.best().policy_id, Some(13));
        assert!(enumerate_and_rank(&sys, Objective::Subsystem(2)).is_err());
        let ids: Vec<_> = t.evaluations.iter().map(|e| e.policy_id.unwrap()).collect();
        assert_eq!(ids, (1..=16).collect::<Vec<_>>());
    }

    #[test]
    fn ranking_ties_by_index() {
        let sys = paper_example().with_cost_model(CostModel::constant(vec![1.0, 1.0], 1.0)).unwrap();
        let t = enumerate_and_rank(&sys, Objective::System).unwrap();
        assert_eq!(t.ranking, (0..16).collect::<Vec<_>>());
    }

    fn single_state(costs: &[f64]) -> CompositeSystem {
        let na = costs.len();
        let s = SubsystemModel::new(1, (0..na).map(|u| u.to_string()).collect(), vec![vec![vec![1.0]; na]], vec![vec![vec![1.0]; na]], None).unwrap();
        let table = crate::scenario::CostTable::tabulate(1, na, 1, |_, u, _| (vec![costs[u]], costs[u]));
        CompositeSystem::new(vec![s], CostModel::Table(table), None).unwrap()
    }

    #[test]
    fn one_policy_system() {
        let sys = single_state(&[4.0]);
        let t = enumerate_and_rank(&sys, Objective::System).unwrap();
        assert_eq!(t.evaluations.len(), 1);
        assert_eq!(t.min_j(), 4.0);
    }

    #[test]
    fn rvi_single_state_picks_min_cost() {
        let sys = single_state(&[3.0, 1.25, 2.0]);
        let sol = relative_value_iteration(&sys, RviOptions::default()).unwrap();
        assert!((sol.gain - 1.25).abs() < 1e-12);
        assert_eq!(sol.policy.action(0), &[1]);
    }

    #[test]
    fn rvi_example() {
        let sys = paper_example();
        let sol = relative_value_iteration(&sys, RviOptions::default()).unwrap();
        assert!((sol.gain - 1.8431).abs() < 5e-3);
        let p16 = FactoredPolicy::from_index(&sys, 16).unwrap();
        assert_eq!(sol.policy, crate::model::lift_policy(&p16, &sys).unwrap());
        let best = enumerate_and_rank(&sys, Objective::System).unwrap().min_j();
        assert!((sol.gain - best).abs() < 1e-6);
    }

    #[test]
    fn rvi_reports_divergence() {
        let sys = paper_example();
        let opts = RviOptions {
            max_iter: 2,
            ..RviOptions::default()
        };
        assert!(matches!(relative_value_iteration(&sys, opts), Err(Error::RviDiverged { iterations: 2, .. })));
    }

    #[test]
    fn simulate_constant_cost() {
        let sys = paper_example().with_cost_model(CostModel::constant(vec![0.5, 0.75], 2.5)).unwrap();
        for t in [1, 7, 1000] {
            let r = simulate(&sys, &policy(&sys, 3), t, 11, None).unwrap();
            assert_eq!(r.system, 2.5);
            assert_eq!(r.subsystem, vec![0.5, 0.75]);
        }
    }

    #[test]
    fn simulate_is_deterministic() {
        let sys = paper_example();
        let a = simulate(&sys, &policy(&sys, 1), 5000, 3, None).unwrap();
        let b = simulate(&sys, &policy(&sys, 1), 5000, 3, None).unwrap();
        assert_eq!(a, b);
        assert!(simulate(&sys, &policy(&sys, 1), 0, 3, None).is_err());
        assert!(simulate(&sys, &policy(&sys, 1), 10, 3, Some(4)).is_err());
    }

    #[test]
    fn csv_layout() {
        let sys = paper_example();
        let t = enumerate_and_rank(&sys, Objective::System).unwrap();
        let csv = t.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "policy,J_sub1,J_sub2,J_system");
        assert_eq!(lines.len(), 17);
        assert!(lines[16].starts_with("16,"));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn argmin_ties() {
        assert_eq!(argmin_by(&[3.0, 1.0, 1.0], |x| *x), Some(1));
        assert_eq!(argmin_by::<f64>(&[], |x| *x), None);
    }
}
