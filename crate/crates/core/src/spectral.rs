//! Dense nonsymmetric eigenvalues and the deterministic consensus verdict.
//!
//! Eigenvalues come from a real Schur decomposition: Householder reduction to upper
//! Hessenberg form followed by Francis double-shift QR sweeps, with the orthogonal
//! transformations accumulated so the backward error `||M Z - Z T||` can be reported.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, StochasticMatrix};

/// Largest dimension accepted by [`eigen_spectrum`].
pub const MAX_EIGEN_DIM: usize = 256;
/// Default half-width of the band around modulus one reported as marginal.
pub const DEFAULT_VERDICT_TOL: f64 = 1e-7;
/// Allowed deviation of the dominant modulus of a stochastic matrix from one.
pub const DOMINANT_MODULUS_TOL: f64 = 1e-7;

/// All eigenvalues of a square matrix, sorted by modulus (descending, compared on a
/// `1e-10` grid), then real part (descending), then imaginary part (descending).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    /// Infinity-norm backward error of the computed real Schur form.
    pub residual: f64,
}

impl Spectrum {
    pub fn moduli(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().map(|z| z.norm())
    }
}

/// Outcome of comparing a second-eigenvalue modulus with one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Consensus,
    NoConsensus,
    /// Within the tolerance band of modulus one; neither side is claimed.
    Marginal,
}

impl Decision {
    /// Banded rule: consensus below `1 - tol`, no consensus above `1 + tol`, marginal between.
    pub fn from_modulus(lambda2: f64, tol: f64) -> Decision {
        if lambda2 < 1.0 - tol {
            Decision::Consensus
        } else if lambda2 > 1.0 + tol {
            Decision::NoConsensus
        } else {
            Decision::Marginal
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Consensus => "consensus",
            Decision::NoConsensus => "no_consensus",
            Decision::Marginal => "marginal",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Moduli are compared on a grid of this spacing so rounding noise between
/// equal-modulus eigenvalues (roots of unity, conjugate pairs) cannot reorder them.
const MODULUS_GRID: f64 = 1e-10;

fn modulus_key(z: &Complex64) -> f64 {
    (z.norm() / MODULUS_GRID).round()
}

fn spectral_order(a: &Complex64, b: &Complex64) -> Ordering {
    modulus_key(b)
        .total_cmp(&modulus_key(a))
        .then_with(|| b.re.total_cmp(&a.re))
        .then_with(|| b.im.total_cmp(&a.im))
}

pub fn eigen_spectrum(m: &Matrix) -> Result<Spectrum> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("eigen_spectrum needs a nonempty matrix".into()));
    }
    if n > MAX_EIGEN_DIM {
        return Err(Error::InvalidArgument(format!(
            "eigen_spectrum supports n <= {MAX_EIGEN_DIM}, got {n}"
        )));
    }
    if !m.is_finite() {
        return Err(Error::Numerical(format!("matrix {m:?} has non-finite entries")));
    }
    let schur = RealSchur::compute(m).map_err(|e| match e {
        SchurError::NoConvergence(iters) => Error::Numerical(format!(
            "QR iteration did not converge after {iters} sweeps on matrix {m:?}"
        )),
        SchurError::NotFinite => Error::Numerical(format!("QR iteration produced non-finite values on matrix {m:?}")),
    })?;
    let residual = schur.backward_error(m);
    let mut eigenvalues = schur.eigenvalues;
    eigenvalues.sort_by(spectral_order);
    Ok(Spectrum { eigenvalues, residual })
}

/// Modulus of the second eigenvalue in spectral order.
///
/// A `1 x 1` matrix has no second eigenvalue; it reports 0.
pub fn second_eigenvalue_modulus(a: &StochasticMatrix) -> Result<f64> {
    let spectrum = eigen_spectrum(a.matrix())?;
    let dominant = spectrum.eigenvalues[0].norm();
    if (dominant - 1.0).abs() > DOMINANT_MODULUS_TOL {
        return Err(Error::Numerical(format!(
            "dominant eigenvalue modulus {dominant} of stochastic matrix {a:?} is not 1"
        )));
    }
    Ok(spectrum.eigenvalues.get(1).map_or(0.0, |z| z.norm()))
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigen_spectrum(m)?.eigenvalues[0].norm())
}

pub fn deterministic_verdict(a: &StochasticMatrix, tol: f64) -> Result<Decision> {
    Ok(Decision::from_modulus(second_eigenvalue_modulus(a)?, tol))
}

#[derive(Debug)]
enum SchurError {
    NoConvergence(usize),
    NotFinite,
}

/// Real Schur form `M = Z T Z^T` with `T` upper quasi-triangular.
struct RealSchur {
    t: Matrix,
    z: Matrix,
    eigenvalues: Vec<Complex64>,
}

impl RealSchur {
    fn compute(m: &Matrix) -> std::result::Result<Self, SchurError> {
        let (mut h, mut z) = hessenberg(m);
        let n = m.dim();
        let mut eig = vec![Complex64::new(0.0, 0.0); n];
        // Rows where a 2x2 block with complex eigenvalues starts.
        let mut complex_block = vec![false; n];
        francis_qr(&mut h, &mut z, &mut eig, &mut complex_block)?;

        // Drop below-structure entries so `t` is exactly quasi-triangular.
        for i in 1..n {
            for j in 0..i - 1 {
                h[(i, j)] = 0.0;
            }
            if !complex_block[i - 1] {
                h[(i, i - 1)] = 0.0;
            }
        }
        Ok(RealSchur {
            t: h,
            z,
            eigenvalues: eig,
        })
    }

    fn backward_error(&self, m: &Matrix) -> f64 {
        let lhs = m.matmul(&self.z);
        let rhs = self.z.matmul(&self.t);
        lhs.sub(&rhs).norm_inf()
    }
}

/// Householder reduction to upper Hessenberg form; returns `(H, Q)` with `M = Q H Q^T`.
fn hessenberg(m: &Matrix) -> (Matrix, Matrix) {
    let n = m.dim();
    let mut h = m.clone();
    let mut ort = vec![0.0; n];
    let high = n.saturating_sub(1);

    for col in 1..high {
        let scale: f64 = (col..=high).map(|i| h[(i, col - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut norm2 = 0.0;
        for i in (col..=high).rev() {
            ort[i] = h[(i, col - 1)] / scale;
            norm2 += ort[i] * ort[i];
        }
        let mut g = norm2.sqrt();
        if ort[col] > 0.0 {
            g = -g;
        }
        let hh = norm2 - ort[col] * g;
        ort[col] -= g;

        // H <- (I - u u^T / hh) H (I - u u^T / hh)
        for j in col..n {
            let f: f64 = (col..=high).rev().map(|i| ort[i] * h[(i, j)]).sum::<f64>() / hh;
            for i in col..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let f: f64 = (col..=high).rev().map(|j| ort[j] * h[(i, j)]).sum::<f64>() / hh;
            for j in col..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[col] *= scale;
        h[(col, col - 1)] = scale * g;
    }

    // Accumulate the reflectors; their tails are still stored below the subdiagonal.
    let mut q = Matrix::identity(n);
    for col in (1..high).rev() {
        if h[(col, col - 1)] == 0.0 {
            continue;
        }
        for i in col + 1..=high {
            ort[i] = h[(i, col - 1)];
        }
        for j in col..=high {
            let g: f64 = (col..=high).map(|i| ort[i] * q[(i, j)]).sum();
            let g = (g / ort[col]) / h[(col, col - 1)];
            for i in col..=high {
                q[(i, j)] += g * ort[i];
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            h[(i, j)] = 0.0;
        }
    }
    (h, q)
}

/// Francis double-shift QR on a Hessenberg matrix, updating the full matrix so the
/// result is a real Schur form, and accumulating the transformations into `z`.
fn francis_qr(
    h: &mut Matrix,
    z: &mut Matrix,
    eig: &mut [Complex64],
    complex_block: &mut [bool],
) -> std::result::Result<(), SchurError> {
    let nn = h.dim();
    let eps = f64::EPSILON;
    let max_iter = 100 * nn;
    let mut total_iter = 0usize;
    let mut exshift = 0.0;

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    // `hi` is the last row of the active block (signed so it can run past zero).
    let mut hi = nn as isize - 1;
    let mut iter = 0usize;
    while hi >= 0 {
        let n = hi as usize;

        // Find the lowest negligible subdiagonal entry.
        let mut l = n;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() <= eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One real root.
            h[(n, n)] += exshift;
            eig[n] = Complex64::new(h[(n, n)], 0.0);
            hi -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots from the trailing 2x2 block.
            let w = h[(n, n - 1)] * h[(n - 1, n)];
            let p = (h[(n - 1, n - 1)] - h[(n, n)]) / 2.0;
            let q = p * p + w;
            let zz = q.abs().sqrt();
            h[(n, n)] += exshift;
            h[(n - 1, n - 1)] += exshift;
            let x = h[(n, n)];

            if q >= 0.0 {
                let zz = if p >= 0.0 { p + zz } else { p - zz };
                let first = x + zz;
                let second = if zz != 0.0 { x - w / zz } else { first };
                eig[n - 1] = Complex64::new(first, 0.0);
                eig[n] = Complex64::new(second, 0.0);

                // Rotate the block to upper triangular form.
                let xs = h[(n, n - 1)];
                let s = xs.abs() + zz.abs();
                let (mut p, mut q) = (xs / s, zz / s);
                let r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in n - 1..nn {
                    let t = h[(n - 1, j)];
                    h[(n - 1, j)] = q * t + p * h[(n, j)];
                    h[(n, j)] = q * h[(n, j)] - p * t;
                }
                for i in 0..=n {
                    let t = h[(i, n - 1)];
                    h[(i, n - 1)] = q * t + p * h[(i, n)];
                    h[(i, n)] = q * h[(i, n)] - p * t;
                }
                for i in 0..nn {
                    let t = z[(i, n - 1)];
                    z[(i, n - 1)] = q * t + p * z[(i, n)];
                    z[(i, n)] = q * z[(i, n)] - p * t;
                }
            } else {
                // Complex conjugate pair, emitted as exact conjugates.
                eig[n - 1] = Complex64::new(x + p, zz);
                eig[n] = Complex64::new(x + p, -zz);
                complex_block[n - 1] = true;
            }
            hi -= 2;
            iter = 0;
        } else {
            total_iter += 1;
            if total_iter > max_iter {
                return Err(SchurError::NoConvergence(max_iter));
            }

            let mut x = h[(n, n)];
            let mut y = h[(n - 1, n - 1)];
            let mut w = h[(n, n - 1)] * h[(n - 1, n)];

            // Exceptional shifts break cycles.
            if iter == 10 {
                exshift += x;
                for i in 0..=n {
                    h[(i, i)] -= x;
                }
                let s = h[(n, n - 1)].abs() + h[(n - 1, n - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                let mut s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=n {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            // Look for two consecutive small subdiagonal entries.
            let (mut p, mut q, mut r);
            let mut m = n - 2;
            loop {
                let zm = h[(m, m)];
                let rr = x - zm;
                let ss = y - zm;
                p = (rr * ss - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - zm - rr - ss;
                r = h[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + zm.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=n {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            let mut xk = 0.0;
            for k in m..n {
                let notlast = k != n - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    xk = p.abs() + q.abs() + r.abs();
                    if xk == 0.0 {
                        continue;
                    }
                    p /= xk;
                    q /= xk;
                    r /= xk;
                }
                let mut s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[(k, k - 1)] = -s * xk;
                } else if l != m {
                    h[(k, k - 1)] = -h[(k, k - 1)];
                }
                p += s;
                let xr = p / s;
                let yr = q / s;
                let zr = r / s;
                q /= p;
                r /= p;

                for j in k..nn {
                    let mut pp = h[(k, j)] + q * h[(k + 1, j)];
                    if notlast {
                        pp += r * h[(k + 2, j)];
                        h[(k + 2, j)] -= pp * zr;
                    }
                    h[(k, j)] -= pp * xr;
                    h[(k + 1, j)] -= pp * yr;
                }
                for i in 0..=n.min(k + 3) {
                    let mut pp = xr * h[(i, k)] + yr * h[(i, k + 1)];
                    if notlast {
                        pp += zr * h[(i, k + 2)];
                        h[(i, k + 2)] -= pp * r;
                    }
                    h[(i, k)] -= pp;
                    h[(i, k + 1)] -= pp * q;
                }
                for i in 0..nn {
                    let mut pp = xr * z[(i, k)] + yr * z[(i, k + 1)];
                    if notlast {
                        pp += zr * z[(i, k + 2)];
                        z[(i, k + 2)] -= pp * r;
                    }
                    z[(i, k)] -= pp;
                    z[(i, k + 1)] -= pp * q;
                }
            }
            if !h[(n, n - 1)].is_finite() || !h[(n, n)].is_finite() {
                return Err(SchurError::NotFinite);
            }
        }
    }
    Ok(())
}
