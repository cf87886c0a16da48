//! Transition-cost models.
//!
//! A cost model maps a composite transition `(m, u, k)` to one cost per
//! subsystem plus a system cost. Costs sit on transitions, not on
//! state/action pairs alone.

use serde::{Deserialize, Serialize};

use crate::avgcost::CostMatrices;
use crate::error::{Error, Result};
use crate::kron::Matrix;
use crate::model::{CompositeSystem, Policy};

/// Per-subsystem cost form for [`CoupledCostSpec`].
///
/// With `y_j` the output of subsystem `j` on the transition and `z[j][i]`
/// the fraction of `j`'s output routed to `i`:
///
/// * `Coupled`: `(W_i + Σ_j z[j][i]·y_j) / (y_i + Σ_j z[i][j]·y_i)`
/// * `InflowDenominator`: `(W_i + Σ_j z[j][i]·y_j) / (y_i + Σ_j z[j][i]·y_j)`
///
/// `Coupled` is the default and the form used by the built-in example;
/// `InflowDenominator` is an alternative normalization kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubsystemCostForm {
    #[default]
    Coupled,
    InflowDenominator,
}

/// System cost form for [`CoupledCostSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SystemCostForm {
    /// `Σ W_i / Σ y_i`.
    #[default]
    OutputRatio,
    /// `Σ c_i`.
    Sum,
    /// `Σ w_i c_i`.
    WeightedSum { weights: Vec<f64> },
}

/// Inputs, coupling fractions and cost forms of the output-ratio model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledCostSpec {
    /// `W_(i)` per subsystem.
    pub inputs: Vec<f64>,
    /// `coupling[i][j]`: fraction of subsystem `i`'s output routed to `j`.
    /// The diagonal must be zero.
    pub coupling: Vec<Vec<f64>>,
    /// One form per subsystem; empty means all [`SubsystemCostForm::Coupled`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsystem_forms: Vec<SubsystemCostForm>,
    #[serde(default)]
    pub system_form: SystemCostForm,
}

impl CoupledCostSpec {
    /// Two-subsystem spec with `z_12` (1→2) and `z_21` (2→1).
    pub fn two_subsystem(w1: f64, w2: f64, z12: f64, z21: f64) -> Self {
        Self {
            inputs: vec![w1, w2],
            coupling: vec![vec![0.0, z12], vec![z21, 0.0]],
            subsystem_forms: Vec::new(),
            system_form: SystemCostForm::OutputRatio,
        }
    }

    fn form(&self, i: usize) -> SubsystemCostForm {
        self.subsystem_forms.get(i).copied().unwrap_or_default()
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.inputs.len() != n {
            return Err(Error::Config(format!("{} inputs for {n} subsystems", self.inputs.len())));
        }
        if self.inputs.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("inputs must be finite".into()));
        }
        if self.coupling.len() != n || self.coupling.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("coupling must be {n}x{n}")));
        }
        for (i, row) in self.coupling.iter().enumerate() {
            for (j, &z) in row.iter().enumerate() {
                if !(z.is_finite() && z >= 0.0) {
                    return Err(Error::Config(format!("coupling[{}][{}] = {z} must be a nonnegative fraction", i + 1, j + 1)));
                }
                if i == j && z != 0.0 {
                    return Err(Error::Config(format!("coupling diagonal entry {} must be zero", i + 1)));
                }
            }
        }
        if !self.subsystem_forms.is_empty() && self.subsystem_forms.len() != n {
            return Err(Error::Config(format!("{} subsystem cost forms for {n} subsystems", self.subsystem_forms.len())));
        }
        if let SystemCostForm::WeightedSum { weights } = &self.system_form {
            if weights.len() != n || weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::Config(format!("weighted sum needs {n} finite weights")));
            }
        }
        Ok(())
    }

    fn costs(&self, y: &[f64], sub: &mut [f64], from: usize, to: usize) -> Result<f64> {
        let bad = || Error::InvalidCostDenominator { from: from + 1, to: to + 1 };
        let n = y.len();
        for i in 0..n {
            let inflow: f64 = (0..n).filter(|&j| j != i).map(|j| self.coupling[j][i] * y[j]).sum();
            let den = match self.form(i) {
                SubsystemCostForm::Coupled => {
                    let out_frac: f64 = (0..n).filter(|&j| j != i).map(|j| self.coupling[i][j]).sum();
                    y[i] + out_frac * y[i]
                }
                SubsystemCostForm::InflowDenominator => y[i] + inflow,
            };
            if !(den > 0.0 && den.is_finite() && y[i] > 0.0) {
                return Err(bad());
            }
            sub[i] = (self.inputs[i] + inflow) / den;
        }
        match &self.system_form {
            SystemCostForm::OutputRatio => {
                let den: f64 = y.iter().sum();
                if !(den > 0.0 && den.is_finite()) {
                    return Err(bad());
                }
                Ok(self.inputs.iter().sum::<f64>() / den)
            }
            SystemCostForm::Sum => Ok(sub.iter().sum()),
            SystemCostForm::WeightedSum { weights } => Ok(sub.iter().zip(weights).map(|(c, w)| c * w).sum()),
        }
    }
}

/// Explicit cost tables indexed `[m][joint action][k]` over the full
/// (unconstrained) joint action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    /// One `[m][u][k]` table per subsystem.
    pub subsystem: Vec<Vec<Vec<Vec<f64>>>>,
    pub system: Vec<Vec<Vec<f64>>>,
}

impl CostTable {
    /// Tabulates `f(m, u, k) -> (subsystem costs, system cost)`.
    pub fn tabulate<F>(sys_states: usize, joint_actions: usize, n: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize, usize) -> (Vec<f64>, f64),
    {
        let mut subsystem = vec![vec![vec![vec![0.0; sys_states]; joint_actions]; sys_states]; n];
        let mut system = vec![vec![vec![0.0; sys_states]; joint_actions]; sys_states];
        for m in 0..sys_states {
            for u in 0..joint_actions {
                for k in 0..sys_states {
                    let (s, c) = f(m, u, k);
                    for i in 0..n {
                        subsystem[i][m][u][k] = s[i];
                    }
                    system[m][u][k] = c;
                }
            }
        }
        Self { subsystem, system }
    }

    fn check(&self, n: usize, states: usize, joint: usize) -> Result<()> {
        let ok3 = |t: &Vec<Vec<Vec<f64>>>| {
            t.len() == states
                && t.iter().all(|per_u| per_u.len() == joint && per_u.iter().all(|r| r.len() == states && r.iter().all(|v| v.is_finite())))
        };
        if self.subsystem.len() != n || !self.subsystem.iter().all(ok3) || !ok3(&self.system) {
            return Err(Error::Config(format!(
                "cost tables must be {states}x{joint}x{states} with {n} subsystem tables and finite entries"
            )));
        }
        Ok(())
    }
}

/// Source of transition costs for a composite system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostModel {
    Coupled(CoupledCostSpec),
    Constant { subsystem: Vec<f64>, system: f64 },
    Table(CostTable),
}

/// A composite transition `m --u--> k` with its unpacked tuples.
#[derive(Debug, Clone, Copy)]
pub struct TransitionRef<'a> {
    pub from: usize,
    pub to: usize,
    pub from_x: &'a [usize],
    pub to_x: &'a [usize],
    pub action: &'a [usize],
}

impl CostModel {
    pub fn constant(subsystem: Vec<f64>, system: f64) -> Self {
        CostModel::Constant { subsystem, system }
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(vec![0.0; n], 0.0)
    }

    pub(crate) fn check_dims(&self, sys: &CompositeSystem) -> Result<()> {
        let n = sys.num_subsystems();
        match self {
            CostModel::Coupled(spec) => spec.check(n),
            CostModel::Constant { subsystem, system } => {
                if subsystem.len() != n {
                    return Err(Error::Config(format!("{} constant costs for {n} subsystems", subsystem.len())));
                }
                if !system.is_finite() || subsystem.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("constant costs must be finite".into()));
                }
                Ok(())
            }
            CostModel::Table(t) => t.check(n, sys.num_states(), sys.num_joint_actions()),
        }
    }

    /// Writes subsystem costs into `sub` and returns the system cost.
    pub fn transition_costs(&self, sys: &CompositeSystem, t: TransitionRef<'_>, sub: &mut [f64]) -> Result<f64> {
        match self {
            CostModel::Coupled(spec) => {
                let y: Vec<f64> = sys
                    .subsystems()
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.output(t.from_x[i], t.action[i], t.to_x[i]))
                    .collect();
                spec.costs(&y, sub, t.from, t.to)
            }
            CostModel::Constant { subsystem, system } => {
                sub.copy_from_slice(subsystem);
                Ok(*system)
            }
            CostModel::Table(table) => {
                let u = sys.joint_action_space().index_unchecked(t.action);
                for (i, s) in sub.iter_mut().enumerate() {
                    *s = table.subsystem[i][t.from][u][t.to];
                }
                Ok(table.system[t.from][u][t.to])
            }
        }
    }

    /// Evaluates every transition under every admissible joint action.
    pub fn check_all(&self, sys: &CompositeSystem) -> Result<()> {
        let n = sys.num_subsystems();
        let mut sub = vec![0.0; n];
        let mut from_x = vec![0; n];
        let mut to_x = vec![0; n];
        for m in 0..sys.num_states() {
            sys.unindex_into(m, &mut from_x);
            for u in sys.admissible_joint_actions(m) {
                for k in 0..sys.num_states() {
                    sys.unindex_into(k, &mut to_x);
                    let t = TransitionRef {
                        from: m,
                        to: k,
                        from_x: &from_x,
                        to_x: &to_x,
                        action: &u,
                    };
                    let c = self.transition_costs(sys, t, &mut sub)?;
                    if !c.is_finite() || sub.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Domain(format!("non-finite cost on transition ({}, {})", m + 1, k + 1)));
                    }
                }
            }
        }
        Ok(())
    }
}

impl CostTable {
    /// Materializes `model` on every transition of the full joint action
    /// space of `sys`.
    pub fn from_model(sys: &CompositeSystem, model: &CostModel) -> Result<Self> {
        let n = sys.num_subsystems();
        let mut from_x = vec![0; n];
        let mut to_x = vec![0; n];
        let mut sub = vec![0.0; n];
        let mut out = Self::tabulate(sys.num_states(), sys.num_joint_actions(), n, |_, _, _| (vec![0.0; n], 0.0));
        for m in 0..sys.num_states() {
            sys.unindex_into(m, &mut from_x);
            for u in 0..sys.num_joint_actions() {
                let action = sys.joint_action_space().unindex(u);
                for k in 0..sys.num_states() {
                    sys.unindex_into(k, &mut to_x);
                    let t = TransitionRef {
                        from: m,
                        to: k,
                        from_x: &from_x,
                        to_x: &to_x,
                        action: &action,
                    };
                    out.system[m][u][k] = model.transition_costs(sys, t, &mut sub)?;
                    for (t, v) in out.subsystem.iter_mut().zip(&sub) {
                        t[m][u][k] = *v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Applies `f` to every subsystem and system entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let g = |t: &Vec<Vec<Vec<f64>>>| t.iter().map(|a| a.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect()).collect();
        Self {
            subsystem: self.subsystem.iter().map(g).collect(),
            system: g(&self.system),
        }
    }
}

/// Per-subsystem and system transition-cost matrices `C_(i)^π`, `C^π`.
pub fn build_cost_matrices(sys: &CompositeSystem, policy: &Policy) -> Result<CostMatrices> {
    policy.check(sys)?;
    let n = sys.num_subsystems();
    let s = sys.num_states();
    let mut subsystem = vec![Matrix::zeros(s, s); n];
    let mut system = Matrix::zeros(s, s);
    let mut sub = vec![0.0; n];
    let mut from_x = vec![0; n];
    let mut to_x = vec![0; n];
    for m in 0..s {
        sys.unindex_into(m, &mut from_x);
        let action = policy.joint_action(sys, m);
        for k in 0..s {
            sys.unindex_into(k, &mut to_x);
            let t = TransitionRef {
                from: m,
                to: k,
                from_x: &from_x,
                to_x: &to_x,
                action: &action,
            };
            let c = sys.cost_model().transition_costs(sys, t, &mut sub)?;
            system.set(m, k, c);
            for (i, v) in sub.iter().enumerate() {
                subsystem[i].set(m, k, *v);
            }
        }
    }
    Ok(CostMatrices { subsystem, system })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FactoredPolicy;
    use crate::scenario::paper::{self, paper_example};

    fn pi1_costs() -> CostMatrices {
        let sys = paper_example();
        let p = FactoredPolicy::from_index(&sys, 1).unwrap();
        build_cost_matrices(&sys, &p.into()).unwrap()
    }

    #[test]
    fn first_subsystem_entries() {
        let c = pi1_costs();
        assert!((c.subsystem[0][(0, 0)] - 2.85).abs() < 5e-3);
        assert!((c.subsystem[0][(0, 2)] - 3.42).abs() < 5e-3);
        // (15 + 0.43 * 4.9) / (4.8 * 1.25)
        assert!((c.subsystem[0][(0, 0)] - 17.107 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn system_entry() {
        let c = pi1_costs();
        assert!((c.system[(0, 0)] - 31.0 / 9.7).abs() < 1e-12);
        // reference value 3.19
        assert!((c.system[(0, 0)] - 3.19).abs() < 1e-2);
    }

    #[test]
    fn second_subsystem_entry_uses_own_outflow() {
        let c = pi1_costs();
        let expected = (16.0 + 0.25 * 4.8) / (4.9 + 0.43 * 4.9);
        assert!((c.subsystem[1][(0, 0)] - expected).abs() < 1e-12);
        assert!((c.subsystem[1][(0, 0)] - 2.45).abs() < 5e-3);
    }

    #[test]
    fn inflow_form_differs() {
        let sys = paper::paper_example_inflow_denominator();
        let p = FactoredPolicy::from_index(&sys, 1).unwrap();
        let c = build_cost_matrices(&sys, &p.into()).unwrap();
        let expected = (16.0 + 0.25 * 4.8) / (4.9 + 0.25 * 4.8);
        assert!((c.subsystem[1][(0, 0)] - expected).abs() < 1e-12);
        assert!((c.subsystem[1][(0, 0)] - 2.45).abs() > 0.3);
        // first subsystem unaffected
        assert!((c.subsystem[0][(0, 0)] - 2.85).abs() < 5e-3);
    }

    #[test]
    fn zero_output_is_rejected_with_transition() {
        let sys = paper_example();
        let mut out = sys.subsystem(0).output_tensor();
        out[1][0][0] = 0.0;
        let s0 = sys.subsystem(0).with_output(out).unwrap();
        let sys = sys.with_subsystems(vec![s0, sys.subsystem(1).clone()]).unwrap();
        let p = FactoredPolicy::from_index(&sys, 1).unwrap();
        let err = build_cost_matrices(&sys, &p.into()).unwrap_err();
        // subsystem 1 state 2 -> 1: composite rows 3,4 to columns 1,2
        assert_eq!(err, Error::InvalidCostDenominator { from: 3, to: 1 });
        assert!(sys.cost_model().check_all(&sys).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = CoupledCostSpec::two_subsystem(15.0, 16.0, 0.25, 0.43);
        assert!(spec.check(2).is_ok());
        assert!(spec.check(3).is_err());
        spec.coupling[0][0] = 0.1;
        assert!(spec.check(2).is_err());
        spec.coupling[0][0] = 0.0;
        spec.coupling[0][1] = -0.1;
        assert!(spec.check(2).is_err());
    }

    #[test]
    fn aggregated_system_forms() {
        let mut spec = CoupledCostSpec::two_subsystem(15.0, 16.0, 0.25, 0.43);
        let y = [4.8, 4.9];
        let mut sub = [0.0; 2];
        spec.system_form = SystemCostForm::Sum;
        let total = spec.costs(&y, &mut sub, 0, 0).unwrap();
        assert!((total - sub[0] - sub[1]).abs() < 1e-15);
        spec.system_form = SystemCostForm::WeightedSum { weights: vec![2.0, 0.5] };
        let w = spec.costs(&y, &mut sub, 0, 0).unwrap();
        assert!((w - 2.0 * sub[0] - 0.5 * sub[1]).abs() < 1e-15);
    }

    #[test]
    fn serde_shape() {
        let m = CostModel::Coupled(CoupledCostSpec::two_subsystem(15.0, 16.0, 0.25, 0.43));
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["kind"], "coupled");
        assert_eq!(v["system_form"]["form"], "output_ratio");
        let back: CostModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
        let c: CostModel = serde_json::from_str(r#"{"kind":"constant","subsystem":[1.0,2.0],"system":3.0}"#).unwrap();
        assert_eq!(c, CostModel::constant(vec![1.0, 2.0], 3.0));
    }

    #[test]
    fn table_from_model_matches_model() {
        let sys = paper_example();
        let table = CostTable::from_model(&sys, sys.cost_model()).unwrap();
        let tabled = sys.with_cost_model(CostModel::Table(table)).unwrap();
        let p = Policy::Factored(FactoredPolicy::from_index(&sys, 7).unwrap());
        let a = build_cost_matrices(&sys, &p).unwrap();
        let b = build_cost_matrices(&tabled, &p).unwrap();
        assert_eq!(a.system, b.system);
        assert_eq!(a.subsystem, b.subsystem);
    }
}
