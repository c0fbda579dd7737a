//! The consensus subspace (constant vectors), its orthogonal projector, and the
//! complementary disagreement projector.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Dense projectors onto the constant vectors and onto their zero-sum complement.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    n: usize,
    pi: Matrix,
    pi_perp: Matrix,
    v0: Vec<f64>,
}

impl ProjectionPair {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Projector onto the constant vectors; every entry is `1/n`.
    pub fn pi(&self) -> &Matrix {
        &self.pi
    }

    /// `I - pi`.
    pub fn pi_perp(&self) -> &Matrix {
        &self.pi_perp
    }

    /// Unit vector spanning the consensus subspace.
    pub fn v0(&self) -> &[f64] {
        &self.v0
    }

    /// `pi_perp * x` through the dense matrix.
    pub fn apply_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.pi_perp.matvec(x))
    }

    /// `pi_perp * M`.
    pub fn project_matrix(&self, m: &Matrix) -> Result<Matrix> {
        if m.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: m.dim(),
            });
        }
        Ok(self.pi_perp.matmul(m))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }
}

pub fn make_projections(n: usize) -> Result<ProjectionPair> {
    if n == 0 {
        return Err(Error::InvalidArgument("projection dimension must be at least 1".into()));
    }
    let inv = 1.0 / n as f64;
    let pi = Matrix::filled(n, inv);
    let mut pi_perp = Matrix::filled(n, -inv);
    for i in 0..n {
        pi_perp[(i, i)] = 1.0 - inv;
    }
    let v0 = vec![inv.sqrt(); n];
    Ok(ProjectionPair { n, pi, pi_perp, v0 })
}

/// Disagreement component of `x`: `x` minus its coordinate mean.
pub fn disagreement(x: &[f64], proj: &ProjectionPair) -> Result<Vec<f64>> {
    proj.check(x)?;
    Ok(subtract_mean(x))
}

pub(crate) fn subtract_mean(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Largest pairwise coordinate gap, `max_i x_i - min_i x_i`.
pub fn diameter(x: &[f64]) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if x.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm_l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm_l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dimensional_projectors() {
        let p = make_projections(2).unwrap();
        assert_eq!(p.pi().to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(p.pi_perp().to_rows(), vec![vec![0.5, -0.5], vec![-0.5, 0.5]]);
    }

    #[test]
    fn one_dimensional_projectors() {
        let p = make_projections(1).unwrap();
        assert_eq!(p.pi().to_rows(), vec![vec![1.0]]);
        assert_eq!(p.pi_perp().to_rows(), vec![vec![0.0]]);
        assert_eq!(diameter(&[4.2]), 0.0);
    }

    #[test]
    fn three_dimensional_pi_is_uniform() {
        let p = make_projections(3).unwrap();
        assert!(p.pi().as_slice().iter().all(|&v| v == 1.0 / 3.0));
        let norm: f64 = p.v0().iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(make_projections(0).is_err());
    }

    #[test]
    fn disagreement_examples() {
        let p3 = make_projections(3).unwrap();
        assert_eq!(disagreement(&[1.0, 1.0, 1.0], &p3).unwrap(), vec![0.0; 3]);
        assert_eq!(disagreement(&[3.0, 1.0, 2.0], &p3).unwrap(), vec![1.0, -1.0, 0.0]);
        let dense = p3.apply_dense(&[3.0, 1.0, 2.0]).unwrap();
        for (a, b) in dense.iter().zip([1.0, -1.0, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let p2 = make_projections(2).unwrap();
        assert_eq!(disagreement(&[1.0, 0.0], &p2).unwrap(), vec![0.5, -0.5]);
        assert!(disagreement(&[1.0, 0.0], &p3).is_err());
    }

    #[test]
    fn disagreement_norm_exceeds_distance_to_midrange() {
        // The sup-norm distance to the constant vectors is diameter / 2, which the
        // mean-centred vector need not attain.
        let p = make_projections(3).unwrap();
        let x = [1.0, 0.0, 0.0];
        let d = norm_inf(&disagreement(&x, &p).unwrap());
        assert!((d - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(norm_inf(&[0.5, -0.5, -0.5]), 0.5);
        assert!(d > diameter(&x) / 2.0);
        assert!(d <= diameter(&x));
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(diameter(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(diameter(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(diameter(&[-1.0, 4.0]), 5.0);
    }
}
