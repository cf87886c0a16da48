//! Dense matrices and Kronecker-product assembly of composite transition
//! matrices.
//!
//! For a factored policy the composite chain is the Kronecker product of the
//! per-subsystem policy matrices, ordered so that the last subsystem varies
//! fastest in the composite index. General (non-factored) composite policies
//! are assembled entry by entry from products of subsystem probabilities.

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};
use crate::model::{CompositePolicy, CompositeSystem, FactoredPolicy, Policy};

/// Default cap on either dimension of an assembled matrix.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Row-major dense real matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("matrix dimensions must be positive, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite matrix entry {v}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// `M v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!("vector of length {} against {} columns", v.len(), self.cols)));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `v M` for a row vector `v`.
    pub fn left_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::Shape(format!("vector of length {} against {} rows", v.len(), self.rows)));
        }
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        Ok(out)
    }

    /// `M - I`; the matrix must be square.
    pub fn minus_identity(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::Shape(format!("{}x{} is not square", self.rows, self.cols)));
        }
        let mut m = self.clone();
        for i in 0..self.rows {
            m.data[i * self.cols + i] -= 1.0;
        }
        Ok(m)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Largest `|row sum - 1|` over all rows.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.rows)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    kron_with_cap(a, b, DEFAULT_MAX_DIM)
}

/// Kronecker product `A ⊗ B`, refusing results with a dimension above `cap`.
pub fn kron_with_cap(a: &Matrix, b: &Matrix, cap: usize) -> Result<Matrix> {
    let rows = a.rows.saturating_mul(b.rows);
    let cols = a.cols.saturating_mul(b.cols);
    let largest = rows.max(cols);
    if largest > cap {
        return Err(Error::CompositionTooLarge { requested: largest, cap });
    }
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a.get(i, j);
            for s in 0..b.rows {
                let base = (i * b.rows + s) * cols + j * b.cols;
                for (t, bst) in b.row(s).iter().enumerate() {
                    out.data[base + t] = aij * bst;
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// `P^π = P_(1)^π ⊗ … ⊗ P_(N)^π` for a factored policy.
pub fn composite_transition(sys: &CompositeSystem, policy: &FactoredPolicy) -> Result<Matrix> {
    policy.check(sys)?;
    let mut acc: Option<Matrix> = None;
    for (i, sub) in sys.subsystems().iter().enumerate() {
        let pm = sub.policy_matrix(policy.subsystem_actions(i));
        acc = Some(match acc {
            None => pm,
            Some(m) => kron(&m, &pm)?,
        });
    }
    Ok(acc.expect("composite system has at least one subsystem"))
}

/// Composite transition matrix for an arbitrary composite policy: entry
/// `(m, k)` is the product of the subsystem probabilities of moving from the
/// components of `m` to the components of `k` under the joint action at `m`.
pub fn composite_transition_general(sys: &CompositeSystem, policy: &CompositePolicy) -> Result<Matrix> {
    policy.check(sys)?;
    let n = sys.num_states();
    let mut out = Matrix::zeros(n, n);
    let mut from = vec![0; sys.num_subsystems()];
    let mut to = vec![0; sys.num_subsystems()];
    for m in 0..n {
        sys.unindex_into(m, &mut from);
        let action = policy.action(m);
        for k in 0..n {
            sys.unindex_into(k, &mut to);
            out.set(m, k, sys.transition_prob_tuple(&from, action, &to));
        }
    }
    Ok(out)
}

/// Dispatches to the Kronecker fast path when the policy is factored.
pub fn policy_transition(sys: &CompositeSystem, policy: &Policy) -> Result<Matrix> {
    match policy {
        Policy::Factored(p) => composite_transition(sys, p),
        Policy::Composite(p) => composite_transition_general(sys, p),
    }
}
