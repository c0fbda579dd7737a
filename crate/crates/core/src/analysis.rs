//! Expected update matrix, the random-network consensus verdict, simulation
//! cross-checks, and the block lifting of second-order recursions.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{Atom, LiftedLaw, MatrixDistribution};
use crate::dynamics::{estimate_modes, ModeParams, ModeReport};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, StochasticMatrix};
use crate::rng::{RngPolicy, StreamPurpose};
use crate::spectral::{second_eigenvalue_modulus, Decision, DEFAULT_VERDICT_TOL};

/// Smallest Monte Carlo sample accepted for laws without enumerable support.
pub const MIN_MC_SAMPLES: usize = 1000;
pub const DEFAULT_MC_SAMPLES: usize = 10_000;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Half-width multiplier applied to the bootstrap standard deviation.
pub const BOOTSTRAP_WIDTH: f64 = 3.0;
/// Tolerance on `alpha + beta = 1` for the second-order lifting.
pub const LIFT_WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedMatrix {
    pub matrix: StochasticMatrix,
    pub exact: bool,
    /// Number of Monte Carlo draws, 0 when exact.
    pub sample_count: usize,
    /// Largest entrywise standard error, 0 when exact.
    pub entry_standard_error: f64,
}

/// Expectation together with whatever is needed for the verdict.
struct Expectation {
    expected: ExpectedMatrix,
    positive_diagonal: bool,
    samples: Vec<StochasticMatrix>,
}

fn compute_expectation(dist: &MatrixDistribution, mc_samples: usize, policy: &RngPolicy) -> Result<Expectation> {
    let n = dist.dim();
    if let Some(atoms) = dist.finite_support() {
        let matrix = StochasticMatrix::mixture(n, atoms.iter().map(|a| (a.prob, &a.matrix)))?;
        let positive_diagonal = atoms
            .iter()
            .filter(|a| a.prob > 0.0)
            .all(|a| a.matrix.has_positive_diagonal());
        return Ok(Expectation {
            expected: ExpectedMatrix {
                matrix,
                exact: true,
                sample_count: 0,
                entry_standard_error: 0.0,
            },
            positive_diagonal,
            samples: Vec::new(),
        });
    }
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo expectation needs at least {MIN_MC_SAMPLES} samples, got {mc_samples}"
        )));
    }
    let mut rng = policy.stream(StreamPurpose::Expectation, 0);
    let samples: Vec<StochasticMatrix> = (0..mc_samples).map(|_| dist.sample(&mut rng).into_owned()).collect();
    let mean = mean_matrix(n, samples.iter());
    let m = mc_samples as f64;
    let mut sq = vec![0.0; n * n];
    for s in &samples {
        for ((acc, v), mu) in sq.iter_mut().zip(s.matrix().as_slice()).zip(mean.as_slice()) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let max_std = sq.iter().map(|v| (v / (m - 1.0)).sqrt()).fold(0.0, f64::max);
    let positive_diagonal = samples.iter().all(|s| s.has_positive_diagonal());
    Ok(Expectation {
        expected: ExpectedMatrix {
            matrix: StochasticMatrix::new(mean)?,
            exact: false,
            sample_count: mc_samples,
            entry_standard_error: max_std / m.sqrt(),
        },
        positive_diagonal,
        samples,
    })
}

fn mean_matrix<'a>(n: usize, it: impl ExactSizeIterator<Item = &'a StochasticMatrix>) -> Matrix {
    let count = it.len() as f64;
    let mut acc = Matrix::zeros(n);
    for s in it {
        acc.add_scaled(1.0, s.matrix());
    }
    acc.scale(1.0 / count)
}

/// Exact expectation for enumerable laws, otherwise the mean of `mc_samples` draws.
pub fn expected_matrix(dist: &MatrixDistribution, mc_samples: usize, policy: &RngPolicy) -> Result<ExpectedMatrix> {
    Ok(compute_expectation(dist, mc_samples, policy)?.expected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusVerdict {
    pub lambda2_modulus: f64,
    pub decision: Decision,
    /// Every matrix in the (sampled) support has a strictly positive diagonal.
    pub positive_diagonal_support: bool,
    /// Added to the marginal band when the expectation is estimated; 0 when exact.
    pub uncertainty_halfwidth: f64,
    /// Set when simulation contradicts the spectral decision.
    pub discrepancy: Option<String>,
}

/// Spectral decision on `E[A(1)]`.
pub fn random_verdict(dist: &MatrixDistribution, mc_samples: usize, policy: &RngPolicy) -> Result<ConsensusVerdict> {
    let exp = compute_expectation(dist, mc_samples, policy)?;
    let lambda2 = second_eigenvalue_modulus(&exp.expected.matrix)?;
    let halfwidth = if exp.expected.exact {
        0.0
    } else {
        bootstrap_halfwidth(dist.dim(), &exp.samples, policy)?
    };
    Ok(ConsensusVerdict {
        lambda2_modulus: lambda2,
        decision: Decision::from_modulus(lambda2, DEFAULT_VERDICT_TOL + halfwidth),
        positive_diagonal_support: exp.positive_diagonal,
        uncertainty_halfwidth: halfwidth,
        discrepancy: None,
    })
}

/// `BOOTSTRAP_WIDTH` times the standard deviation of the second-eigenvalue modulus
/// over `BOOTSTRAP_RESAMPLES` resamples of the Monte Carlo draws.
fn bootstrap_halfwidth(n: usize, samples: &[StochasticMatrix], policy: &RngPolicy) -> Result<f64> {
    let m = samples.len();
    let values: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = policy.stream(StreamPurpose::Bootstrap, b);
            let mut acc = Matrix::zeros(n);
            for _ in 0..m {
                acc.add_scaled(1.0, samples[rng.random_range(0..m)].matrix());
            }
            let mean = StochasticMatrix::new(acc.scale(1.0 / m as f64))?;
            second_eigenvalue_modulus(&mean)
        })
        .collect::<Result<_>>()?;
    let count = values.len() as f64;
    let mu = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (count - 1.0);
    Ok(BOOTSTRAP_WIDTH * var.sqrt())
}

/// Spectral verdict and empirical mode report side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub verdict: ConsensusVerdict,
    pub modes: ModeReport,
}

/// Runs the spectral verdict and the mode estimators and records any disagreement in
/// `verdict.discrepancy`. Neither result is altered.
pub fn cross_validate(
    dist: &MatrixDistribution,
    x0: &[f64],
    params: &ModeParams,
    mc_samples: usize,
    policy: &RngPolicy,
) -> Result<CrossValidation> {
    let mut verdict = random_verdict(dist, mc_samples, policy)?;
    let modes = estimate_modes(dist, x0, params, policy)?;
    let spectral_consensus = verdict.decision == Decision::Consensus;
    let c = modes.classification;
    let consistent = if spectral_consensus {
        c.all_converged()
    } else {
        c.none_converged()
    };
    if !consistent {
        let empirical = if c.all_converged() {
            "all modes converged".to_string()
        } else if c.none_converged() {
            "no mode converged".to_string()
        } else {
            format!(
                "modes disagree (almost_sure: {:?}, in_probability: {:?}, in_lp: {:?})",
                c.almost_sure, c.in_probability, c.in_lp
            )
        };
        verdict.discrepancy = Some(format!(
            "spectral decision {} (|lambda2| = {}, positive_diagonal_support = {}) but simulation reports {} \
             (as_fraction = {}, p_exceed_eps = {}, lp_mean = {}, eps = {}, paths = {}, horizon = {})",
            verdict.decision,
            verdict.lambda2_modulus,
            verdict.positive_diagonal_support,
            empirical,
            modes.as_fraction,
            modes.prob_curve.last().copied().unwrap_or(f64::NAN),
            modes.lp_curve.last().copied().unwrap_or(f64::NAN),
            modes.eps,
            modes.paths,
            modes.horizon,
        ));
    }
    Ok(CrossValidation { verdict, modes })
}

/// Block companion matrix `[[alpha A, beta B], [I, 0]]`.
pub fn lift_matrices(alpha: f64, beta: f64, a: &StochasticMatrix, b: &StochasticMatrix) -> StochasticMatrix {
    let n = a.dim();
    assert_eq!(n, b.dim(), "lifted blocks must share a dimension");
    let mut c = Matrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = alpha * a[(i, j)];
            c[(i, n + j)] = beta * b[(i, j)];
        }
        c[(n + i, i)] = 1.0;
    }
    StochasticMatrix::new(c).expect("convex block rows of stochastic matrices are stochastic")
}

fn check_weights(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lifting weights must be nonnegative, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if (alpha + beta - 1.0).abs() > LIFT_WEIGHT_TOL {
        return Err(Error::InvalidArgument(format!(
            "lifting weights must sum to 1, got alpha + beta = {}",
            alpha + beta
        )));
    }
    Ok(())
}

/// Law of `C(t)` for `X(t) = alpha A(t) X(t-1) + beta B(t) X(t-2)` with independent
/// `A(t) ~ dist_a`, `B(t) ~ dist_b`.
///
/// Enumerable laws give a finite (or point-mass) result with multiplied probabilities;
/// a factor with zero weight is dropped. Otherwise the result samples both jointly.
pub fn lift_second_order(
    alpha: f64,
    beta: f64,
    dist_a: &MatrixDistribution,
    dist_b: &MatrixDistribution,
) -> Result<MatrixDistribution> {
    check_weights(alpha, beta)?;
    let n = dist_a.dim();
    if dist_b.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: dist_b.dim(),
        });
    }
    let identity = [Atom {
        prob: 1.0,
        matrix: StochasticMatrix::identity(n),
    }];
    let support = |d: &MatrixDistribution, weight: f64| -> Option<Vec<Atom>> {
        if weight == 0.0 {
            Some(identity.to_vec())
        } else {
            d.finite_support()
        }
    };
    match (support(dist_a, alpha), support(dist_b, beta)) {
        (Some(sa), Some(sb)) => {
            let mut atoms = Vec::with_capacity(sa.len() * sb.len());
            for x in &sa {
                for y in &sb {
                    atoms.push(Atom {
                        prob: x.prob * y.prob,
                        matrix: lift_matrices(alpha, beta, &x.matrix, &y.matrix),
                    });
                }
            }
            if atoms.len() == 1 {
                Ok(MatrixDistribution::dirac(atoms.pop().expect("one atom").matrix))
            } else {
                MatrixDistribution::finite(atoms)
            }
        }
        _ => Ok(MatrixDistribution::lifted(LiftedLaw {
            alpha,
            beta,
            first: dist_a.clone(),
            second: dist_b.clone(),
        })),
    }
}

/// Iterates `X(t) = alpha A(t) X(t-1) + beta B(t) X(t-2)` for `t = 2..` using the given
/// matrices (`a_seq[k]`, `b_seq[k]` drive step `t = k + 2`). Returns `X(0), X(1), ...`.
pub fn second_order_direct(
    alpha: f64,
    beta: f64,
    a_seq: &[StochasticMatrix],
    b_seq: &[StochasticMatrix],
    x0: &[f64],
    x1: &[f64],
) -> Vec<Vec<f64>> {
    let mut out = vec![x0.to_vec(), x1.to_vec()];
    for (a, b) in a_seq.iter().zip(b_seq) {
        let prev = &out[out.len() - 1];
        let prev2 = &out[out.len() - 2];
        let ax = a.apply(prev);
        let bx = b.apply(prev2);
        out.push(ax.iter().zip(&bx).map(|(u, v)| alpha * u + beta * v).collect());
    }
    out
}

/// Expectations of the l1 and sup norms for a finitely supported random vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormExpectations {
    pub mean_l1: f64,
    pub l1_of_mean: f64,
    pub mean_linf: f64,
    pub linf_of_mean: f64,
}

/// For weighted outcomes `(prob, y)`, computes `E||Y||_1`, `||E Y||_1`, `E||Y||_inf`, `||E Y||_inf`.
/// The l1 pair coincides for componentwise-nonnegative `Y`; the sup pair need not.
pub fn norm_expectations(outcomes: &[(f64, Vec<f64>)]) -> Result<NormExpectations> {
    let Some((_, first)) = outcomes.first() else {
        return Err(Error::InvalidArgument("no outcomes".into()));
    };
    let n = first.len();
    let mut mean = vec![0.0; n];
    let (mut mean_l1, mut mean_linf) = (0.0, 0.0);
    for (p, y) in outcomes {
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: y.len(),
            });
        }
        mean_l1 += p * crate::projection::norm_l1(y);
        mean_linf += p * crate::projection::norm_inf(y);
        for (m, v) in mean.iter_mut().zip(y) {
            *m += p * v;
        }
    }
    Ok(NormExpectations {
        mean_l1,
        l1_of_mean: crate::projection::norm_l1(&mean),
        mean_linf,
        linf_of_mean: crate::projection::norm_inf(&mean),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Generator;
    use crate::matrix::validate_matrix;

    fn swap() -> StochasticMatrix {
        validate_matrix(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()
    }

    fn identity_swap() -> MatrixDistribution {
        MatrixDistribution::finite(vec![
            Atom {
                prob: 0.5,
                matrix: StochasticMatrix::identity(2),
            },
            Atom {
                prob: 0.5,
                matrix: swap(),
            },
        ])
        .unwrap()
    }

    #[test]
    fn identity_swap_expectation_is_exact_average() {
        let e = expected_matrix(&identity_swap(), 0, &RngPolicy::new(0)).unwrap();
        assert!(e.exact);
        assert_eq!(e.sample_count, 0);
        assert_eq!(e.entry_standard_error, 0.0);
        assert_eq!(e.matrix.matrix().to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn mc_requires_enough_samples() {
        let d = MatrixDistribution::generator(Generator::DirichletRows { alpha: 1.0 }, 2).unwrap();
        assert!(expected_matrix(&d, 999, &RngPolicy::new(0)).is_err());
        let e = expected_matrix(&d, 1000, &RngPolicy::new(0)).unwrap();
        assert!(!e.exact);
        assert_eq!(e.sample_count, 1000);
        assert!(e.entry_standard_error > 0.0);
    }

    #[test]
    fn identity_swap_verdict_flags_zero_diagonal() {
        let v = random_verdict(&identity_swap(), 0, &RngPolicy::new(0)).unwrap();
        assert!(v.lambda2_modulus < 1e-12);
        assert_eq!(v.decision, Decision::Consensus);
        assert!(!v.positive_diagonal_support);
        assert_eq!(v.uncertainty_halfwidth, 0.0);
    }

    #[test]
    fn identity_verdict_is_marginal() {
        let v = random_verdict(
            &MatrixDistribution::dirac(StochasticMatrix::identity(3)),
            0,
            &RngPolicy::new(0),
        )
        .unwrap();
        assert_eq!(v.lambda2_modulus, 1.0);
        assert_eq!(v.decision, Decision::Marginal);
        assert!(v.positive_diagonal_support);
    }

    #[test]
    fn lift_identity_weights() {
        let a = validate_matrix(&[[0.2, 0.8], [0.6, 0.4]]).unwrap();
        let lifted = lift_second_order(1.0, 0.0, &MatrixDistribution::dirac(a.clone()), &identity_swap()).unwrap();
        let crate::distribution::DistributionKind::Dirac(c) = lifted.kind() else {
            panic!("expected point mass, got {lifted:?}");
        };
        assert_eq!(
            c.matrix().to_rows(),
            vec![
                vec![0.2, 0.8, 0.0, 0.0],
                vec![0.6, 0.4, 0.0, 0.0],
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0],
            ]
        );
    }

    #[test]
    fn lift_half_half_uniform() {
        let u = MatrixDistribution::dirac(StochasticMatrix::uniform(2));
        let lifted = lift_second_order(0.5, 0.5, &u, &u).unwrap();
        let crate::distribution::DistributionKind::Dirac(c) = lifted.kind() else {
            panic!("expected point mass");
        };
        assert_eq!(
            c.matrix().to_rows(),
            vec![
                vec![0.25, 0.25, 0.25, 0.25],
                vec![0.25, 0.25, 0.25, 0.25],
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0],
            ]
        );
    }

    #[test]
    fn lift_product_support() {
        let lifted = lift_second_order(0.3, 0.7, &identity_swap(), &identity_swap()).unwrap();
        let crate::distribution::DistributionKind::Finite(atoms) = lifted.kind() else {
            panic!("expected finite law");
        };
        assert_eq!(atoms.len(), 4);
        assert!(atoms.iter().all(|a| a.prob == 0.25 && a.matrix.dim() == 4));
    }

    #[test]
    fn lift_generator_samples_jointly() {
        let d = MatrixDistribution::generator(Generator::DirichletRows { alpha: 0.5 }, 3).unwrap();
        let lifted = lift_second_order(0.4, 0.6, &d, &d).unwrap();
        assert_eq!(lifted.dim(), 6);
        assert!(lifted.finite_support().is_none());
        let mut rng = RngPolicy::new(2).path_stream(0);
        for _ in 0..100 {
            let c = lifted.sample(&mut rng);
            assert!(validate_matrix(&c.matrix().to_rows()).is_ok());
        }
    }

    #[test]
    fn lift_rejects_bad_weights_and_dimensions() {
        let u2 = MatrixDistribution::dirac(StochasticMatrix::uniform(2));
        let u3 = MatrixDistribution::dirac(StochasticMatrix::uniform(3));
        assert!(lift_second_order(1.2, -0.2, &u2, &u2).is_err());
        assert!(lift_second_order(0.5, 0.6, &u2, &u2).is_err());
        assert!(lift_second_order(0.5, 0.5, &u2, &u3).is_err());
    }

    #[test]
    fn norm_remark_two_point() {
        let e = norm_expectations(&[(0.5, vec![0.0, 1.0]), (0.5, vec![1.0, 0.0])]).unwrap();
        assert_eq!(e.mean_l1, 1.0);
        assert_eq!(e.l1_of_mean, 1.0);
        assert_eq!(e.mean_linf, 1.0);
        assert_eq!(e.linf_of_mean, 0.5);
    }
}
