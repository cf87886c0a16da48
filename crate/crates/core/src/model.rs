//! Subsystems, composite systems, stationary policies and composite-state
//! indexing.
//!
//! Indices are 0-based in this API. Everything that leaves the library
//! (CSV, JSON, reports, error payloads) is 1-based: states `1..=|S|`,
//! policies `1..=|Π|`, action indices `1..=|U_(i)|`.
//!
//! Composite states are enumerated in mixed radix with the last subsystem
//! varying fastest, which is the ordering of `P_(1) ⊗ … ⊗ P_(N)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kron::{self, Matrix};
use crate::scenario::CostModel;
use crate::stationary;

/// Default cap on the composite state-space size.
pub const DEFAULT_MAX_STATES: usize = kron::DEFAULT_MAX_DIM;

/// Default cap on the number of factored policies enumerated.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Policies beyond this count are not checked one by one for a unique
/// stationary distribution by
/// [`validate`].
pub const VALIDATION_POLICY_CAP: u128 = 65_536;

const ROW_SUM_TOL: f64 = 1e-12;

/// Mixed-radix index space with the last digit varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedRadix {
    radices: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl MixedRadix {
    pub fn new(radices: Vec<usize>) -> Self {
        let mut strides = vec![1usize; radices.len()];
        for i in (0..radices.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1].saturating_mul(radices[i + 1]);
        }
        let size = radices.iter().fold(1usize, |a, &r| a.saturating_mul(r));
        Self { radices, strides, size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn index(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.radices.len() {
            return Err(Error::Shape(format!(
                "expected {} components, got {}",
                self.radices.len(),
                digits.len()
            )));
        }
        let mut idx = 0;
        for (i, (&d, &r)) in digits.iter().zip(&self.radices).enumerate() {
            if d >= r {
                return Err(Error::StateOutOfRange {
                    subsystem: i + 1,
                    num_states: r,
                    value: d + 1,
                });
            }
            idx += d * self.strides[i];
        }
        Ok(idx)
    }

    /// Index without range checks; digits must be in range.
    #[inline]
    pub(crate) fn index_unchecked(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.strides).map(|(d, s)| d * s).sum()
    }

    pub fn unindex(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        self.unindex_into(idx, &mut out);
        out
    }

    #[inline]
    pub fn unindex_into(&self, mut idx: usize, out: &mut [usize]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = idx / self.strides[i];
            idx %= self.strides[i];
        }
    }
}

/// One subsystem: its state space, actions, controlled transition tensor
/// `P[x][u][x']`, output tensor `Y[x][u][x']` and admissible action sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemModel {
    num_states: usize,
    actions: Vec<String>,
    transition: Vec<f64>,
    output: Vec<f64>,
    admissible: Vec<Vec<usize>>,
}

impl SubsystemModel {
    /// Builds a subsystem from nested `[x][u][x']` tensors.
    ///
    /// Shape, finiteness and index-range problems are rejected here.
    /// Stochasticity and nonempty admissible sets are left to [`validate`],
    /// so that a malformed scenario can still be loaded and reported on.
    pub fn new(
        num_states: usize,
        actions: Vec<String>,
        transition: Vec<Vec<Vec<f64>>>,
        output: Vec<Vec<Vec<f64>>>,
        admissible: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::Shape("subsystem needs at least one state".into()));
        }
        if actions.is_empty() {
            return Err(Error::Shape("subsystem needs at least one action".into()));
        }
        let nu = actions.len();
        let flat = |name: &str, t: Vec<Vec<Vec<f64>>>| -> Result<Vec<f64>> {
            if t.len() != num_states {
                return Err(Error::Shape(format!("{name}: expected {num_states} states, got {}", t.len())));
            }
            let mut out = Vec::with_capacity(num_states * nu * num_states);
            for (x, per_x) in t.into_iter().enumerate() {
                if per_x.len() != nu {
                    return Err(Error::Shape(format!(
                        "{name}[{}]: expected {nu} actions, got {}",
                        x + 1,
                        per_x.len()
                    )));
                }
                for (u, row) in per_x.into_iter().enumerate() {
                    if row.len() != num_states {
                        return Err(Error::Shape(format!(
                            "{name}[{}][{}]: expected {num_states} entries, got {}",
                            x + 1,
                            u + 1,
                            row.len()
                        )));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Domain(format!("{name}[{}][{}] has a non-finite entry", x + 1, u + 1)));
                    }
                    out.extend(row);
                }
            }
            Ok(out)
        };
        let transition = flat("transition", transition)?;
        let output = flat("output", output)?;
        let admissible = match admissible {
            None => vec![(0..nu).collect(); num_states],
            Some(sets) => {
                if sets.len() != num_states {
                    return Err(Error::Shape(format!(
                        "admissible: expected {num_states} sets, got {}",
                        sets.len()
                    )));
                }
                sets.into_iter()
                    .enumerate()
                    .map(|(x, mut set)| {
                        if let Some(bad) = set.iter().find(|&&u| u >= nu) {
                            return Err(Error::Domain(format!(
                                "admissible[{}] names action {} but only {nu} exist",
                                x + 1,
                                bad + 1
                            )));
                        }
                        set.sort_unstable();
                        set.dedup();
                        Ok(set)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Self {
            num_states,
            actions,
            transition,
            output,
            admissible,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    #[inline]
    fn offset(&self, x: usize, u: usize) -> usize {
        (x * self.actions.len() + u) * self.num_states
    }

    #[inline]
    pub fn transition_row(&self, x: usize, u: usize) -> &[f64] {
        let o = self.offset(x, u);
        &self.transition[o..o + self.num_states]
    }

    #[inline]
    pub fn output_row(&self, x: usize, u: usize) -> &[f64] {
        let o = self.offset(x, u);
        &self.output[o..o + self.num_states]
    }

    #[inline]
    pub fn output(&self, x: usize, u: usize, next: usize) -> f64 {
        self.output[self.offset(x, u) + next]
    }

    pub fn admissible(&self, x: usize) -> &[usize] {
        &self.admissible[x]
    }

    pub fn is_admissible(&self, x: usize, u: usize) -> bool {
        self.admissible[x].binary_search(&u).is_ok()
    }

    /// Transition matrix of this subsystem under the state→action map `mu`.
    pub fn policy_matrix(&self, mu: &[usize]) -> Matrix {
        let n = self.num_states;
        let data = (0..n).flat_map(|x| self.transition_row(x, mu[x]).iter().copied()).collect();
        Matrix::new(n, n, data).expect("policy matrix shape")
    }

    /// Nested `[x][u][x']` transition tensor.
    pub fn transition_tensor(&self) -> Vec<Vec<Vec<f64>>> {
        self.tensor(&self.transition)
    }

    /// Nested `[x][u][x']` output tensor.
    pub fn output_tensor(&self) -> Vec<Vec<Vec<f64>>> {
        self.tensor(&self.output)
    }

    fn tensor(&self, flat: &[f64]) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states)
            .map(|x| {
                (0..self.num_actions())
                    .map(|u| {
                        let o = self.offset(x, u);
                        flat[o..o + self.num_states].to_vec()
                    })
                    .collect()
            })
            .collect()
    }

    /// Same subsystem with a replaced output tensor.
    pub fn with_output(&self, output: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::new(
            self.num_states,
            self.actions.clone(),
            self.transition_tensor(),
            output,
            Some(self.admissible.clone()),
        )
    }

    /// Same subsystem with a replaced transition tensor.
    pub fn with_transition(&self, transition: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::new(
            self.num_states,
            self.actions.clone(),
            transition,
            self.output_tensor(),
            Some(self.admissible.clone()),
        )
    }
}

/// Whether a subsystem's cost moves with (minor) or against (principal)
/// the system cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupLabel {
    Minor,
    Principal,
}

/// Ordered subsystems, their cost model and the composite index spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSystem {
    subsystems: Vec<SubsystemModel>,
    cost_model: CostModel,
    groups: Vec<GroupLabel>,
    states: MixedRadix,
    joint: MixedRadix,
}

impl CompositeSystem {
    pub fn new(subsystems: Vec<SubsystemModel>, cost_model: CostModel, groups: Option<Vec<GroupLabel>>) -> Result<Self> {
        Self::with_state_cap(subsystems, cost_model, groups, DEFAULT_MAX_STATES)
    }

    pub fn with_state_cap(
        subsystems: Vec<SubsystemModel>,
        cost_model: CostModel,
        groups: Option<Vec<GroupLabel>>,
        cap: usize,
    ) -> Result<Self> {
        if subsystems.is_empty() {
            return Err(Error::Shape("a composite system needs at least one subsystem".into()));
        }
        let n = subsystems.len();
        let groups = groups.unwrap_or_else(|| vec![GroupLabel::Minor; n]);
        if groups.len() != n {
            return Err(Error::Shape(format!("{} group labels for {n} subsystems", groups.len())));
        }
        let count = subsystems
            .iter()
            .try_fold(1usize, |a, s| a.checked_mul(s.num_states()))
            .unwrap_or(usize::MAX);
        if count > cap {
            return Err(Error::CompositionTooLarge { requested: count, cap });
        }
        let states = MixedRadix::new(subsystems.iter().map(SubsystemModel::num_states).collect());
        let joint = MixedRadix::new(subsystems.iter().map(SubsystemModel::num_actions).collect());
        let sys = Self {
            subsystems,
            cost_model,
            groups,
            states,
            joint,
        };
        sys.cost_model.check_dims(&sys)?;
        Ok(sys)
    }

    pub fn num_subsystems(&self) -> usize {
        self.subsystems.len()
    }

    pub fn subsystems(&self) -> &[SubsystemModel] {
        &self.subsystems
    }

    pub fn subsystem(&self, i: usize) -> &SubsystemModel {
        &self.subsystems[i]
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost_model
    }

    pub fn groups(&self) -> &[GroupLabel] {
        &self.groups
    }

    /// `|S| = Π |S_(i)|`.
    pub fn num_states(&self) -> usize {
        self.states.size()
    }

    /// Size of the unconstrained joint action space `Π |U_(i)|`.
    pub fn num_joint_actions(&self) -> usize {
        self.joint.size()
    }

    pub fn state_space(&self) -> &MixedRadix {
        &self.states
    }

    pub fn joint_action_space(&self) -> &MixedRadix {
        &self.joint
    }

    /// Composite index of a tuple of per-subsystem states.
    pub fn composite_index(&self, x: &[usize]) -> Result<usize> {
        self.states.index(x)
    }

    pub fn composite_unindex(&self, m: usize) -> Vec<usize> {
        self.states.unindex(m)
    }

    #[inline]
    pub fn unindex_into(&self, m: usize, out: &mut [usize]) {
        self.states.unindex_into(m, out)
    }

    pub fn joint_index(&self, u: &[usize]) -> Result<usize> {
        self.joint.index(u)
    }

    pub fn is_admissible_tuple(&self, x: &[usize], u: &[usize]) -> bool {
        u.len() == self.subsystems.len()
            && self
                .subsystems
                .iter()
                .zip(x.iter().zip(u))
                .all(|(s, (&xi, &ui))| ui < s.num_actions() && s.is_admissible(xi, ui))
    }

    pub fn is_admissible(&self, m: usize, u: &[usize]) -> bool {
        self.is_admissible_tuple(&self.composite_unindex(m), u)
    }

    /// Admissible joint actions at composite state `m`, in increasing joint
    /// index order (product of the subsystem sets).
    pub fn admissible_joint_actions(&self, m: usize) -> Vec<Vec<usize>> {
        let x = self.composite_unindex(m);
        let sets: Vec<&[usize]> = self.subsystems.iter().zip(&x).map(|(s, &xi)| s.admissible(xi)).collect();
        let sizes = MixedRadix::new(sets.iter().map(|s| s.len()).collect());
        let mut pos = vec![0; sets.len()];
        (0..sizes.size())
            .map(|c| {
                sizes.unindex_into(c, &mut pos);
                pos.iter().zip(&sets).map(|(&p, s)| s[p]).collect()
            })
            .collect()
    }

    /// `Π_i P_(i)[x_i][u_i][x'_i]`.
    #[inline]
    pub fn transition_prob_tuple(&self, from: &[usize], action: &[usize], to: &[usize]) -> f64 {
        self.subsystems
            .iter()
            .enumerate()
            .map(|(i, s)| s.transition_row(from[i], action[i])[to[i]])
            .product()
    }

    /// Nonzero entries of the composite transition row from `m` under joint
    /// action `u`, in increasing next-state order.
    pub fn transition_row_sparse(&self, m: usize, u: &[usize]) -> Vec<(usize, f64)> {
        let x = self.composite_unindex(m);
        let mut row: Vec<(usize, f64)> = vec![(0, 1.0)];
        for (i, s) in self.subsystems.iter().enumerate() {
            let r = s.transition_row(x[i], u[i]);
            let ns = s.num_states();
            row = row
                .iter()
                .flat_map(|&(k, p)| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, q)| **q != 0.0)
                        .map(move |(j, q)| (k * ns + j, p * q))
                })
                .collect();
        }
        row
    }

    /// Same system with a different cost model.
    pub fn with_cost_model(&self, cost_model: CostModel) -> Result<Self> {
        Self::new(self.subsystems.clone(), cost_model, Some(self.groups.clone()))
    }

    /// Same system with different subsystems (same cost model and labels).
    pub fn with_subsystems(&self, subsystems: Vec<SubsystemModel>) -> Result<Self> {
        Self::new(subsystems, self.cost_model.clone(), Some(self.groups.clone()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_system()
    }

    pub fn to_scenario_file(&self) -> ScenarioFile {
        ScenarioFile {
            subsystems: self
                .subsystems
                .iter()
                .map(|s| SubsystemSpec {
                    num_states: s.num_states(),
                    actions: s.actions().to_vec(),
                    transition: s.transition_tensor(),
                    output: s.output_tensor(),
                    admissible: Some(
                        (0..s.num_states())
                            .map(|x| s.admissible(x).iter().map(|u| u + 1).collect())
                            .collect(),
                    ),
                })
                .collect(),
            cost: self.cost_model.clone(),
            groups: Some(self.groups.clone()),
        }
    }
}

/// State→action map per subsystem.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactoredPolicy {
    actions: Vec<Vec<usize>>,
}

impl FactoredPolicy {
    /// `actions[i][x]` is the action of subsystem `i` in its state `x`.
    pub fn new(sys: &CompositeSystem, actions: Vec<Vec<usize>>) -> Result<Self> {
        let p = Self { actions };
        p.check(sys)?;
        Ok(p)
    }

    pub fn subsystem_actions(&self, i: usize) -> &[usize] {
        &self.actions[i]
    }

    pub fn actions(&self) -> &[Vec<usize>] {
        &self.actions
    }

    pub(crate) fn check(&self, sys: &CompositeSystem) -> Result<()> {
        if self.actions.len() != sys.num_subsystems() {
            return Err(Error::Shape(format!(
                "policy covers {} subsystems, system has {}",
                self.actions.len(),
                sys.num_subsystems()
            )));
        }
        for (i, (mu, s)) in self.actions.iter().zip(sys.subsystems()).enumerate() {
            if mu.len() != s.num_states() {
                return Err(Error::Shape(format!(
                    "policy for subsystem {} covers {} states, subsystem has {}",
                    i + 1,
                    mu.len(),
                    s.num_states()
                )));
            }
            for (x, &u) in mu.iter().enumerate() {
                if u >= s.num_actions() || !s.is_admissible(x, u) {
                    return Err(Error::Domain(format!(
                        "subsystem {} action {} is not admissible in state {}",
                        i + 1,
                        u + 1,
                        x + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// 1-based canonical policy number: subsystems in order (first
    /// slowest), within a subsystem states in order (first slowest), each
    /// digit the position of the chosen action in the admissible set.
    pub fn index(&self, sys: &CompositeSystem) -> usize {
        let mut idx = 0usize;
        for (mu, s) in self.actions.iter().zip(sys.subsystems()) {
            for (x, &u) in mu.iter().enumerate() {
                let set = s.admissible(x);
                let pos = set.binary_search(&u).expect("admissible action");
                idx = idx * set.len() + pos;
            }
        }
        idx + 1
    }

    /// Inverse of [`FactoredPolicy::index`].
    pub fn from_index(sys: &CompositeSystem, id: usize) -> Result<Self> {
        let count = factored_policy_count(sys);
        if id == 0 || id as u128 > count {
            return Err(Error::Domain(format!("policy {id} outside 1..={count}")));
        }
        let mut rem = id - 1;
        let mut actions: Vec<Vec<usize>> = sys.subsystems().iter().map(|s| vec![0; s.num_states()]).collect();
        for (i, s) in sys.subsystems().iter().enumerate().rev() {
            for x in (0..s.num_states()).rev() {
                let set = s.admissible(x);
                actions[i][x] = set[rem % set.len()];
                rem /= set.len();
            }
        }
        Ok(Self { actions })
    }
}

/// Joint action per composite state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompositePolicy {
    actions: Vec<Vec<usize>>,
}

impl CompositePolicy {
    pub fn new(sys: &CompositeSystem, actions: Vec<Vec<usize>>) -> Result<Self> {
        let p = Self { actions };
        p.check(sys)?;
        Ok(p)
    }

    #[inline]
    pub fn action(&self, m: usize) -> &[usize] {
        &self.actions[m]
    }

    pub fn actions(&self) -> &[Vec<usize>] {
        &self.actions
    }

    pub(crate) fn check(&self, sys: &CompositeSystem) -> Result<()> {
        if self.actions.len() != sys.num_states() {
            return Err(Error::Shape(format!(
                "policy covers {} states, system has {}",
                self.actions.len(),
                sys.num_states()
            )));
        }
        for (m, u) in self.actions.iter().enumerate() {
            if !sys.is_admissible(m, u) {
                return Err(Error::Inadmissible {
                    state: m + 1,
                    action: u.iter().map(|a| a + 1).collect(),
                });
            }
        }
        Ok(())
    }

    /// Recovers the factored form when each subsystem's action depends only
    /// on that subsystem's own state.
    pub fn to_factored(&self, sys: &CompositeSystem) -> Option<FactoredPolicy> {
        let mut actions: Vec<Vec<Option<usize>>> = sys.subsystems().iter().map(|s| vec![None; s.num_states()]).collect();
        let mut x = vec![0; sys.num_subsystems()];
        for (m, u) in self.actions.iter().enumerate() {
            sys.unindex_into(m, &mut x);
            for i in 0..x.len() {
                match actions[i][x[i]] {
                    None => actions[i][x[i]] = Some(u[i]),
                    Some(prev) if prev != u[i] => return None,
                    Some(_) => {}
                }
            }
        }
        let actions = actions
            .into_iter()
            .map(|v| v.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()?;
        Some(FactoredPolicy { actions })
    }
}

/// A stationary policy in either representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Policy {
    Factored(FactoredPolicy),
    Composite(CompositePolicy),
}

impl Policy {
    /// Joint action at composite state `m`.
    pub fn joint_action(&self, sys: &CompositeSystem, m: usize) -> Vec<usize> {
        match self {
            Policy::Factored(p) => {
                let x = sys.composite_unindex(m);
                x.iter().enumerate().map(|(i, &xi)| p.actions[i][xi]).collect()
            }
            Policy::Composite(p) => p.actions[m].clone(),
        }
    }

    /// Canonical 1-based number when the policy is (or reduces to) a
    /// factored one.
    pub fn factored_index(&self, sys: &CompositeSystem) -> Option<usize> {
        match self {
            Policy::Factored(p) => Some(p.index(sys)),
            Policy::Composite(p) => p.to_factored(sys).map(|f| f.index(sys)),
        }
    }

    pub fn to_composite(&self, sys: &CompositeSystem) -> Result<CompositePolicy> {
        match self {
            Policy::Factored(p) => lift_policy(p, sys),
            Policy::Composite(p) => Ok(p.clone()),
        }
    }

    pub(crate) fn check(&self, sys: &CompositeSystem) -> Result<()> {
        match self {
            Policy::Factored(p) => p.check(sys),
            Policy::Composite(p) => p.check(sys),
        }
    }
}

impl From<FactoredPolicy> for Policy {
    fn from(p: FactoredPolicy) -> Self {
        Policy::Factored(p)
    }
}

impl From<CompositePolicy> for Policy {
    fn from(p: CompositePolicy) -> Self {
        Policy::Composite(p)
    }
}

/// Joint action at every composite state is `(μ_(1)(x_1), …, μ_(N)(x_N))`.
pub fn lift_policy(p: &FactoredPolicy, sys: &CompositeSystem) -> Result<CompositePolicy> {
    p.check(sys)?;
    let mut x = vec![0; sys.num_subsystems()];
    let actions = (0..sys.num_states())
        .map(|m| {
            sys.unindex_into(m, &mut x);
            x.iter().enumerate().map(|(i, &xi)| p.actions[i][xi]).collect()
        })
        .collect();
    Ok(CompositePolicy { actions })
}

/// `Π_i Π_x |C(x_(i))|`, saturating.
pub fn factored_policy_count(sys: &CompositeSystem) -> u128 {
    sys.subsystems()
        .iter()
        .flat_map(|s| (0..s.num_states()).map(move |x| s.admissible(x).len() as u128))
        .fold(1u128, |a, c| a.saturating_mul(c))
}

/// Iterator over factored policies in canonical order.
#[derive(Debug, Clone)]
pub struct FactoredPolicies<'a> {
    sys: &'a CompositeSystem,
    next: usize,
    count: usize,
}

impl Iterator for FactoredPolicies<'_> {
    type Item = FactoredPolicy;

    fn next(&mut self) -> Option<FactoredPolicy> {
        if self.next >= self.count {
            return None;
        }
        self.next += 1;
        Some(FactoredPolicy::from_index(self.sys, self.next).expect("index in range"))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.count - self.next;
        (n, Some(n))
    }
}

impl ExactSizeIterator for FactoredPolicies<'_> {}

pub fn enumerate_factored_policies(sys: &CompositeSystem) -> Result<FactoredPolicies<'_>> {
    enumerate_factored_policies_capped(sys, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_factored_policies_capped(sys: &CompositeSystem, cap: u128) -> Result<FactoredPolicies<'_>> {
    let count = factored_policy_count(sys);
    if count > cap {
        return Err(Error::EnumerationInfeasible { count, cap });
    }
    Ok(FactoredPolicies {
        sys,
        next: 0,
        count: count as usize,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks the modelling assumptions: stochastic rows, nonempty admissible
/// sets, a well-defined cost model, a unique stationary distribution
/// for every factored policy, and the structural independence of
/// subsystem transitions.
pub fn validate(sys: &CompositeSystem) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, problems: Vec<String>, ok_detail: String| {
        let status = if problems.is_empty() { CheckStatus::Pass } else { CheckStatus::Fail };
        let detail = if problems.is_empty() { ok_detail } else { problems.join("; ") };
        checks.push(Check {
            name: name.to_string(),
            status,
            detail,
        });
    };

    let mut stoch = Vec::new();
    for (i, s) in sys.subsystems().iter().enumerate() {
        for x in 0..s.num_states() {
            for u in 0..s.num_actions() {
                let row = s.transition_row(x, u);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > ROW_SUM_TOL {
                    stoch.push(format!(
                        "subsystem {} state {} action {}: row sums to {sum}",
                        i + 1,
                        x + 1,
                        u + 1
                    ));
                }
            }
        }
    }
    let stochastic_ok = stoch.is_empty();
    push("row_stochastic", stoch, "all transition rows are probability vectors".into());

    let mut empty = Vec::new();
    for (i, s) in sys.subsystems().iter().enumerate() {
        for x in 0..s.num_states() {
            if s.admissible(x).is_empty() {
                empty.push(format!("subsystem {} state {} has no admissible action", i + 1, x + 1));
            }
        }
    }
    let admissible_ok = empty.is_empty();
    push("admissible_nonempty", empty, "every state has an admissible action".into());

    let cost_problems = match sys.cost_model().check_all(sys) {
        Ok(()) => vec![],
        Err(e) => vec![e.to_string()],
    };
    push("cost_model", cost_problems, "transition costs are finite and well-defined".into());

    let count = factored_policy_count(sys);
    if !(stochastic_ok && admissible_ok) {
        checks.push(Check {
            name: "unichain".into(),
            status: CheckStatus::Skipped,
            detail: "requires stochastic rows and nonempty admissible sets".into(),
        });
    } else if count > VALIDATION_POLICY_CAP {
        checks.push(Check {
            name: "unichain".into(),
            status: CheckStatus::Skipped,
            detail: format!("{count} factored policies exceed the audit cap {VALIDATION_POLICY_CAP}"),
        });
    } else {
        let mut bad = Vec::new();
        for p in enumerate_factored_policies_capped(sys, VALIDATION_POLICY_CAP).expect("count checked") {
            let id = p.index(sys);
            match kron::composite_transition(sys, &p).and_then(|pm| {
                let beta = stationary::stationary_direct(&pm)?;
                Ok(stationary::residual(&beta, &pm))
            }) {
                Ok(r) if r <= 1e-10 => {}
                Ok(r) => bad.push(format!("policy {id}: stationary residual {r:e}")),
                Err(e) => bad.push(format!("policy {id}: {e}")),
            }
        }
        push("unichain", bad, format!("all {count} factored policies have a unique stationary distribution"));
    }

    checks.push(Check {
        name: "independent_transitions".into(),
        status: CheckStatus::Pass,
        detail: "structural: subsystem transitions depend only on their own state and action".into(),
    });
    ValidationReport { checks }
}

/// Scenario file layout. Admissible action indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub subsystems: Vec<SubsystemSpec>,
    pub cost: CostModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<GroupLabel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub num_states: usize,
    pub actions: Vec<String>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub output: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissible: Option<Vec<Vec<usize>>>,
}

impl ScenarioFile {
    pub fn into_system(self) -> Result<CompositeSystem> {
        let subsystems = self
            .subsystems
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let admissible = s
                    .admissible
                    .map(|sets| {
                        sets.into_iter()
                            .map(|set| {
                                set.into_iter()
                                    .map(|u| {
                                        u.checked_sub(1).ok_or_else(|| {
                                            Error::Parse(format!("subsystem {}: action indices are 1-based", i + 1))
                                        })
                                    })
                                    .collect::<Result<Vec<_>>>()
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .transpose()?;
                SubsystemModel::new(s.num_states, s.actions, s.transition, s.output, admissible)
            })
            .collect::<Result<Vec<_>>>()?;
        CompositeSystem::new(subsystems, self.cost, self.groups)
    }
}
