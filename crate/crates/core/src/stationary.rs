//! Stationary distributions of finite chains.
//!
//! The direct solver is the reference. Uniqueness is decided structurally:
//! the support graph of `P` must have exactly one closed communicating class.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::kron::{kron_vec, Matrix};
use crate::model::{CompositeSystem, FactoredPolicy};

/// Largest negative round-off tolerated before clamping becomes an error.
pub const CLAMP_TOL: f64 = 1e-9;

/// A probability row vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Clamps small negative round-off to zero and renormalizes.
    pub fn from_raw(mut v: Vec<f64>) -> Result<Self> {
        if let Some(&worst) = v.iter().filter(|x| **x < 0.0).min_by(|a, b| a.total_cmp(b)) {
            if worst < -CLAMP_TOL {
                return Err(Error::NegativeProbability { value: worst });
            }
        }
        for x in v.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let s: f64 = v.iter().sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Domain(format!("distribution mass {s} cannot be normalized")));
        }
        v.iter_mut().for_each(|x| *x /= s);
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `‖βP − β‖_∞`.
pub fn residual(beta: &Distribution, p: &Matrix) -> f64 {
    let bp = p.left_mul_vec(beta.as_slice()).expect("matching dimensions");
    bp.iter().zip(beta.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Closed communicating classes of the positive-probability support graph,
/// each sorted, in order of their smallest state.
pub fn closed_classes(p: &Matrix) -> Vec<Vec<usize>> {
    let n = p.rows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * 2);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for (j, &v) in p.row(i).iter().enumerate() {
            if v > 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0; n];
    for (c, scc) in sccs.iter().enumerate() {
        for v in scc {
            comp[v.index()] = c;
        }
    }
    let mut closed: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, scc)| {
            scc.iter()
                .all(|v| p.row(v.index()).iter().enumerate().all(|(j, &x)| x <= 0.0 || comp[j] == *c))
        })
        .map(|(_, scc)| {
            let mut s: Vec<usize> = scc.iter().map(|v| v.index()).collect();
            s.sort_unstable();
            s
        })
        .collect();
    closed.sort();
    closed
}

fn check_square(p: &Matrix) -> Result<()> {
    if !p.is_square() {
        return Err(Error::Shape(format!("transition matrix is {}x{}", p.rows(), p.cols())));
    }
    Ok(())
}

/// Solves `(Pᵀ − I) βᵀ = 0` with the last equation replaced by `Σβ = 1`.
///
/// Under a single closed class `P − I` has rank `n − 1` and any `n − 1` rows
/// of `Pᵀ − I` together with the normalization row are independent.
pub fn stationary_direct(p: &Matrix) -> Result<Distribution> {
    check_square(p)?;
    let n = p.rows();
    let closed = closed_classes(p);
    if closed.len() != 1 {
        return Err(Error::NonUnichain(format!("{} closed communicating classes", closed.len())));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = p.get(i, j);
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu
        .solve(&b)
        .ok_or_else(|| Error::NonUnichain("singular stationary system".into()))?;
    // one step of iterative refinement
    let r = &b - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Distribution::from_raw(x.iter().copied().collect())
}

/// Fixed-point iteration from the uniform distribution.
///
/// Each step averages consecutive iterates, `β ← ½(β + βP)`, which is the
/// lazy chain `½(I + P)`: same stationary distribution, no periodicity.
/// Stops once successive iterates differ by less than `tol` in max-norm.
pub fn stationary_power(p: &Matrix, tol: f64, max_iter: usize) -> Result<Distribution> {
    check_square(p)?;
    let n = p.rows();
    let mut beta = vec![1.0 / n as f64; n];
    let mut diff = f64::INFINITY;
    for _ in 0..max_iter {
        let bp = p.left_mul_vec(&beta)?;
        let next: Vec<f64> = beta.iter().zip(&bp).map(|(a, b)| 0.5 * (a + b)).collect();
        diff = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = next;
        if diff < tol {
            return Distribution::from_raw(beta);
        }
    }
    Err(Error::PowerIterationDiverged {
        iterations: max_iter,
        residual: diff,
    })
}

pub fn stationary_power_default(p: &Matrix) -> Result<Distribution> {
    stationary_power(p, 1e-12, 100_000)
}

/// `β^π = β_(1)^π ⊗ … ⊗ β_(N)^π` from per-subsystem direct solves.
pub fn stationary_factored(sys: &CompositeSystem, policy: &FactoredPolicy) -> Result<Distribution> {
    policy.check(sys)?;
    let mut acc = vec![1.0];
    for (i, s) in sys.subsystems().iter().enumerate() {
        let beta = stationary_direct(&s.policy_matrix(policy.subsystem_actions(i))).map_err(|e| match e {
            Error::NonUnichain(msg) => Error::NonUnichain(format!("subsystem {}: {msg}", i + 1)),
            other => other,
        })?;
        acc = kron_vec(&acc, beta.as_slice());
    }
    Ok(Distribution(acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn two_state_by_hand() {
        // 0.5a + 0.45b = a, a + b = 1  =>  a = 9/19
        let p = m(&[&[0.5, 0.5], &[0.45, 0.55]]);
        let beta = stationary_direct(&p).unwrap();
        assert!((beta.as_slice()[0] - 9.0 / 19.0).abs() < 1e-14);
        assert!((beta.as_slice()[0] - 0.4737).abs() < 1e-3);
        assert!((beta.as_slice()[1] - 0.5263).abs() < 1e-3);
    }

    #[test]
    fn identity_is_not_unichain() {
        for n in [2, 3, 5] {
            assert!(matches!(stationary_direct(&Matrix::identity(n)), Err(Error::NonUnichain(_))));
        }
    }

    #[test]
    fn single_state() {
        let beta = stationary_direct(&Matrix::identity(1)).unwrap();
        assert_eq!(beta.as_slice(), &[1.0]);
    }

    #[test]
    fn periodic_chain() {
        let p = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        for beta in [stationary_direct(&p).unwrap(), stationary_power_default(&p).unwrap()] {
            assert!((beta.as_slice()[0] - 0.5).abs() < 1e-12);
            assert!((beta.as_slice()[1] - 0.5).abs() < 1e-12);
        }
        let p3 = m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let beta = stationary_power_default(&p3).unwrap();
        for b in beta.as_slice() {
            assert!((b - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn absorbing_state_gets_all_mass() {
        let p = m(&[&[0.5, 0.3, 0.2], &[0.0, 1.0, 0.0], &[0.1, 0.6, 0.3]]);
        for beta in [stationary_direct(&p).unwrap(), stationary_power_default(&p).unwrap()] {
            assert!((beta.as_slice()[1] - 1.0).abs() < 1e-10);
            assert!(beta.as_slice()[0].abs() < 1e-10);
        }
    }

    #[test]
    fn transient_states_allowed() {
        let p = m(&[&[0.0, 0.5, 0.5], &[0.0, 0.2, 0.8], &[0.0, 0.6, 0.4]]);
        assert_eq!(closed_classes(&p), vec![vec![1, 2]]);
        let beta = stationary_direct(&p).unwrap();
        assert_eq!(beta.as_slice()[0], 0.0);
        assert!(residual(&beta, &p) < 1e-14);
    }

    #[test]
    fn two_closed_classes() {
        let p = m(&[&[0.5, 0.5, 0.0, 0.0], &[0.5, 0.5, 0.0, 0.0], &[0.0, 0.0, 0.1, 0.9], &[0.3, 0.0, 0.3, 0.4]]);
        assert_eq!(closed_classes(&p), vec![vec![0, 1]]);
        let q = m(&[&[0.5, 0.5, 0.0, 0.0], &[0.5, 0.5, 0.0, 0.0], &[0.0, 0.0, 0.1, 0.9], &[0.0, 0.0, 0.3, 0.7]]);
        assert_eq!(closed_classes(&q).len(), 2);
        assert!(stationary_direct(&q).is_err());
    }

    #[test]
    fn power_reports_non_convergence() {
        let p = m(&[&[0.999, 0.001], &[0.001, 0.999]]);
        let err = stationary_power(&m(&[&[0.0, 1.0], &[0.0, 1.0]]), 0.0, 10).unwrap_err();
        assert!(matches!(err, Error::PowerIterationDiverged { iterations: 10, .. }));
        // uniform start is already stationary for a symmetric chain
        assert!(stationary_power(&p, 1e-12, 1).is_ok());
    }

    #[test]
    fn clamping() {
        let d = Distribution::from_raw(vec![-1e-12, 0.5, 0.5]).unwrap();
        assert_eq!(d.as_slice()[0], 0.0);
        assert!(matches!(Distribution::from_raw(vec![-1e-6, 1.0]), Err(Error::NegativeProbability { .. })));
    }

    #[test]
    fn rejects_non_square() {
        let p = Matrix::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(matches!(stationary_direct(&p), Err(Error::Shape(_))));
    }
}
