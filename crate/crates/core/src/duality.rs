//! Min-common / max-crossing objects over the set
//! `Λ = {(θ, φ) : θ = β^π M^π, φ = ‖k^π + M^π q‖}` with `M^π = P^π − I`,
//! and an audit of the claim that the Pareto control policy minimizes the
//! long-run average cost.
//!
//! Every feasible point has `θ = 0` up to round-off, so the crossing value
//! `b(ν) = min_π φ(π) + θ(π)·ν` is independent of `ν` and weak duality
//! `b* ≤ φ*` holds with equality.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::avgcost::{argmin_by, enumerate_and_rank, evaluate_policy, Objective, PolicyEvaluation};
use crate::error::{Error, Result};
use crate::model::{enumerate_factored_policies, CompositeSystem, FactoredPolicy, Policy};
use crate::norm::Norm;
use crate::pareto::pareto_policy;

/// `‖θ‖_∞` above this means the stationary distribution is wrong.
pub const THETA_TOL: f64 = 1e-8;

const ELEMENTWISE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaPoint {
    pub policy_id: Option<usize>,
    pub theta: Vec<f64>,
    pub theta_residual: f64,
    pub phi: f64,
    /// `k^π + M^π q`.
    pub vector: Vec<f64>,
}

impl LambdaPoint {
    pub fn from_evaluation(eval: &PolicyEvaluation, q: &[f64], norm: Norm) -> Result<Self> {
        let n = eval.k_system.len();
        if q.len() != n {
            return Err(Error::Shape(format!("q has length {}, expected {n}", q.len())));
        }
        let m = eval.transition.minus_identity()?;
        let theta = m.left_mul_vec(eval.beta.as_slice())?;
        let theta_residual = theta.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
        if theta_residual > THETA_TOL {
            return Err(Error::StationarityViolated { residual: theta_residual });
        }
        let mq = m.mul_vec(q)?;
        let vector: Vec<f64> = eval.k_system.iter().zip(&mq).map(|(k, d)| k + d).collect();
        Ok(Self {
            policy_id: eval.policy_id,
            phi: norm.apply(&vector),
            theta,
            theta_residual,
            vector,
        })
    }

    /// `L = φ + θ·ν`.
    pub fn lagrangian(&self, nu: &[f64]) -> Result<f64> {
        if nu.len() != self.theta.len() {
            return Err(Error::Shape(format!("ν has length {}, expected {}", nu.len(), self.theta.len())));
        }
        Ok(self.phi + self.theta.iter().zip(nu).map(|(t, v)| t * v).sum::<f64>())
    }
}

/// `ψ^π = β^π · k^π`, the long-run average system cost.
pub fn psi(sys: &CompositeSystem, policy: &Policy) -> Result<f64> {
    Ok(evaluate_policy(sys, policy)?.j_system)
}

pub fn lambda_point(sys: &CompositeSystem, policy: &Policy, q: &[f64], norm: Norm) -> Result<LambdaPoint> {
    LambdaPoint::from_evaluation(&evaluate_policy(sys, policy)?, q, norm)
}

pub fn lagrangian(sys: &CompositeSystem, policy: &Policy, q: &[f64], nu: &[f64], norm: Norm) -> Result<f64> {
    lambda_point(sys, policy, q, norm)?.lagrangian(nu)
}

fn all_points(sys: &CompositeSystem, q: &[f64], norm: Norm) -> Result<Vec<LambdaPoint>> {
    let count = enumerate_factored_policies(sys)?.len();
    (1..=count)
        .into_par_iter()
        .map(|id| {
            let p = Policy::Factored(FactoredPolicy::from_index(sys, id)?);
            lambda_point(sys, &p, q, norm)
        })
        .collect()
}

/// Smallest `φ` over all factored policies, ties to the lowest index.
/// Returns `(policy id, φ*)`.
pub fn min_common(sys: &CompositeSystem, q: &[f64], norm: Norm) -> Result<(usize, f64)> {
    let points = all_points(sys, q, norm)?;
    let best = argmin_by(&points, |p| p.phi).expect("at least one policy");
    Ok((best + 1, points[best].phi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxCrossing {
    pub b_star: f64,
    /// The probed `ν` attaining `b*`.
    pub certificate: Vec<f64>,
}

fn crossing(points: &[LambdaPoint], probes: &[Vec<f64>]) -> Result<MaxCrossing> {
    let mut best: Option<MaxCrossing> = None;
    for nu in probes {
        let mut b = f64::INFINITY;
        for p in points {
            b = b.min(p.lagrangian(nu)?);
        }
        if best.as_ref().is_none_or(|m| b > m.b_star) {
            best = Some(MaxCrossing {
                b_star: b,
                certificate: nu.clone(),
            });
        }
    }
    best.ok_or_else(|| Error::Config("empty ν probe set".into()))
}

/// `b* = max_ν min_π L(π, ν)` over a finite probe set.
pub fn max_crossing(sys: &CompositeSystem, q: &[f64], norm: Norm, probes: &[Vec<f64>]) -> Result<MaxCrossing> {
    crossing(&all_points(sys, q, norm)?, probes)
}

/// The zero vector plus 128 seeded random unit directions, each at scales
/// 1, 10 and 100.
pub fn default_probes(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = vec![vec![0.0; dim]];
    for _ in 0..128 {
        let mut d: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let len = Norm::Euclidean.apply(&d);
        if len > 0.0 {
            d.iter_mut().for_each(|x| *x /= len);
        }
        for scale in [1.0, 10.0, 100.0] {
            probes.push(d.iter().map(|x| x * scale).collect());
        }
    }
    probes
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub policy_id: usize,
    pub psi: f64,
    pub phi: f64,
    pub theta_residual: f64,
    /// `k^{π°} ≤ k^π + M^π q` in every state.
    pub elementwise_ok: bool,
    /// 1-based states where the elementwise inequality fails.
    pub failing_states: Vec<usize>,
    /// `‖k^{π°} + M^{π°} q‖ ≤ ‖k^π + M^π q‖`.
    pub pareto_phi_le: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityAudit {
    pub norm: Norm,
    pub pareto_policy_id: Option<usize>,
    pub j_pareto: f64,
    pub optimal_policy_id: usize,
    pub j_min: f64,
    /// `J(π°) − min_π J(π)`.
    pub gap: f64,
    pub pareto_phi: f64,
    pub phi_star: f64,
    pub phi_star_policy: usize,
    pub b_star: f64,
    pub certificate: Vec<f64>,
    /// `φ* − b*`.
    pub duality_margin: f64,
    pub rows: Vec<AuditRow>,
}

impl DualityAudit {
    pub fn elementwise_all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.elementwise_ok)
    }

    pub fn pareto_phi_minimal(&self) -> bool {
        self.rows.iter().all(|r| r.pareto_phi_le)
    }

    /// `policy,psi,phi,theta_residual,elementwise_thm1_ok`, then a summary
    /// row of `key=value` fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy,psi,phi,theta_residual,elementwise_thm1_ok\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.policy_id, r.psi, r.phi, r.theta_residual, r.elementwise_ok);
        }
        let _ = writeln!(
            out,
            "summary,phi_star={},b_star={},gap={},duality_margin={}",
            self.phi_star, self.b_star, self.gap, self.duality_margin
        );
        out
    }
}

/// Audits the Pareto control policy against every factored policy.
pub fn theorem1_audit(sys: &CompositeSystem, q: &[f64], norm: Norm) -> Result<DualityAudit> {
    theorem1_audit_with_probes(sys, q, norm, &default_probes(sys.num_states(), 0))
}

pub fn theorem1_audit_with_probes(sys: &CompositeSystem, q: &[f64], norm: Norm, probes: &[Vec<f64>]) -> Result<DualityAudit> {
    if q.len() != sys.num_states() {
        return Err(Error::Shape(format!("q has length {}, expected {}", q.len(), sys.num_states())));
    }
    let report = pareto_policy(sys)?;
    let pareto_eval = evaluate_policy(sys, &Policy::Composite(report.policy.clone()))?;
    let pareto_point = LambdaPoint::from_evaluation(&pareto_eval, q, norm)?;
    let table = enumerate_and_rank(sys, Objective::System)?;
    let points = table
        .evaluations
        .par_iter()
        .map(|e| LambdaPoint::from_evaluation(e, q, norm))
        .collect::<Result<Vec<_>>>()?;
    let rows = table
        .evaluations
        .iter()
        .zip(&points)
        .enumerate()
        .map(|(pos, (e, pt))| {
            let rhs = &pt.vector;
            let lhs = &pareto_eval.k_system;
            // k^π + M^π q compared with k^{π°}
            let mq: Vec<f64> = rhs.iter().zip(&e.k_system).map(|(v, k)| v - k).collect();
            let failing_states: Vec<usize> = lhs
                .iter()
                .zip(e.k_system.iter().zip(&mq))
                .enumerate()
                .filter(|(_, (l, (k, d)))| **l > *k + *d + ELEMENTWISE_SLACK)
                .map(|(m, _)| m + 1)
                .collect();
            AuditRow {
                policy_id: pos + 1,
                psi: e.j_system,
                phi: pt.phi,
                theta_residual: pt.theta_residual,
                elementwise_ok: failing_states.is_empty(),
                failing_states,
                pareto_phi_le: pareto_point.phi <= pt.phi + ELEMENTWISE_SLACK,
            }
        })
        .collect();
    let phi_best = argmin_by(&points, |p| p.phi).expect("at least one policy");
    let crossing = crossing(&points, probes)?;
    let best = table.best();
    Ok(DualityAudit {
        norm,
        pareto_policy_id: report.policy_id,
        j_pareto: pareto_eval.j_system,
        optimal_policy_id: best.policy_id.expect("factored"),
        j_min: best.j_system,
        gap: pareto_eval.j_system - best.j_system,
        pareto_phi: pareto_point.phi,
        phi_star: points[phi_best].phi,
        phi_star_policy: phi_best + 1,
        b_star: crossing.b_star,
        certificate: crossing.certificate,
        duality_margin: points[phi_best].phi - crossing.b_star,
        rows,
    })
}
