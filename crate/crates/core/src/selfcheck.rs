//! Randomized property batteries over every module, used by the `selfcheck` command.

use rand::Rng;
use serde::Serialize;

use crate::analysis::{lift_matrices, lift_second_order, random_verdict, second_order_direct};
use crate::distribution::{Atom, Generator, MatrixDistribution};
use crate::dynamics::simulate_path;
use crate::error::{Error, Result, ValidationError};
use crate::matrix::{validate_matrix, Matrix, StochasticMatrix};
use crate::projection::{diameter, disagreement, make_projections, norm_inf};
use crate::rng::{RngPolicy, StreamPurpose, StreamRng};
use crate::spectral::{deterministic_verdict, second_eigenvalue_modulus, spectral_radius, DEFAULT_VERDICT_TOL};

/// Draws a random stochastic matrix: uniform weights, each off-diagonal entry zeroed
/// with probability `sparsity`, rows normalized.
pub fn random_stochastic_matrix<R: Rng + ?Sized>(n: usize, sparsity: f64, rng: &mut R) -> StochasticMatrix {
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let keep = i == j || rng.random::<f64>() >= sparsity;
            let v = if keep { rng.random::<f64>() } else { 0.0 };
            m[(i, j)] = v;
            sum += v;
        }
        if sum == 0.0 {
            m[(i, i)] = 1.0;
            sum = 1.0;
        }
        for j in 0..n {
            m[(i, j)] /= sum;
        }
    }
    StochasticMatrix::new(m).expect("normalized rows")
}

/// Faults that can be injected to confirm the batteries detect them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Matrix validation stops checking row sums.
    RowSum,
}

#[derive(Debug, Clone)]
pub struct SelfcheckOptions {
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
    pub inject: Option<Fault>,
}

impl Default for SelfcheckOptions {
    fn default() -> Self {
        SelfcheckOptions {
            n_max: 16,
            trials: 50,
            seed: 0,
            inject: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub checks: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfcheckReport {
    pub seed: u64,
    pub properties: Vec<PropertyOutcome>,
}

impl SelfcheckReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyOutcome::passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &PropertyOutcome> {
        self.properties.iter().filter(|p| !p.passed())
    }
}

struct Battery<'a> {
    opts: &'a SelfcheckOptions,
    index: u64,
    out: Vec<PropertyOutcome>,
}

impl Battery<'_> {
    /// Runs `check` for every `n` in `2..=n_max` and every trial; `check` returns an error
    /// message on failure.
    fn property<F>(&mut self, name: &'static str, mut check: F)
    where
        F: FnMut(usize, &mut StreamRng) -> std::result::Result<(), String>,
    {
        self.index += 1;
        let mut outcome = PropertyOutcome {
            name,
            checks: 0,
            failures: 0,
            first_failure: None,
        };
        let policy = RngPolicy::new(self.opts.seed);
        for n in 2..=self.opts.n_max {
            for trial in 0..self.opts.trials {
                let stream = (self.index << 40) | ((n as u64) << 20) | trial as u64;
                let mut rng = policy.stream(StreamPurpose::Battery, stream);
                outcome.checks += 1;
                if let Err(msg) = check(n, &mut rng) {
                    outcome.failures += 1;
                    outcome
                        .first_failure
                        .get_or_insert_with(|| format!("{msg} (seed {}, n {n}, trial {trial})", self.opts.seed));
                }
            }
        }
        self.out.push(outcome);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn validator(fault: Option<Fault>) -> impl Fn(&[Vec<f64>]) -> std::result::Result<StochasticMatrix, ValidationError> {
    move |rows| match fault {
        None => validate_matrix(rows),
        Some(Fault::RowSum) => {
            // Faulty validator: accepts any nonnegative square array.
            let m = Matrix::from_rows(rows)?;
            if m.as_slice().iter().any(|v| *v < 0.0) {
                return validate_matrix(rows);
            }
            Ok(crate::matrix::unchecked_stochastic(m))
        }
    }
}

pub fn run_selfcheck(opts: &SelfcheckOptions) -> Result<SelfcheckReport> {
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if opts.n_max < 2 || opts.n_max > 64 {
        return Err(Error::InvalidArgument(format!(
            "n-max must lie in 2..=64, got {}",
            opts.n_max
        )));
    }
    let mut b = Battery {
        opts,
        index: 0,
        out: Vec::new(),
    };

    let validate = validator(opts.inject);
    b.property("matrix_validation", |n, rng| {
        let a = random_stochastic_matrix(n, 0.3, rng).matrix().to_rows();
        validate(&a).map_err(|e| format!("valid stochastic matrix rejected: {e}"))?;
        let mut bad = a.clone();
        let i = rng.random_range(0..n);
        bad[i][rng.random_range(0..n)] += 1e-6;
        ensure(validate(&bad).is_err(), || format!("row sum error in row {i} accepted"))?;
        let mut neg = a;
        neg[i][0] -= 2.0;
        neg[i][1] += 2.0;
        ensure(validate(&neg).is_err(), || "negative entry accepted".into())
    });

    b.property("serialization_roundtrip", |n, rng| {
        let a = random_stochastic_matrix(n, 0.3, rng);
        let text = serde_json::to_string(&a).map_err(|e| e.to_string())?;
        let back: StochasticMatrix = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        ensure(a.matrix().max_abs_diff(back.matrix()) <= 1e-15, || {
            "round trip changed entries".into()
        })
    });

    b.property("projection_algebra", |n, rng| {
        let p = make_projections(n).map_err(|e| e.to_string())?;
        let (pi, perp) = (p.pi(), p.pi_perp());
        let id = Matrix::identity(n);
        ensure(pi.add(perp).max_abs_diff(&id) <= 1e-12, || "pi + pi_perp != I".into())?;
        ensure(pi.matmul(pi).max_abs_diff(pi) <= 1e-12, || "pi not idempotent".into())?;
        ensure(perp.matmul(perp).max_abs_diff(perp) <= 1e-12, || {
            "pi_perp not idempotent".into()
        })?;
        ensure(pi.matmul(perp).max_abs() <= 1e-12, || "pi pi_perp != 0".into())?;
        let a = random_stochastic_matrix(n, 0.3, rng);
        let lhs = perp.matmul(a.matrix());
        let rhs = lhs.matmul(perp);
        ensure(lhs.max_abs_diff(&rhs) <= 1e-12, || {
            "pi_perp A != pi_perp A pi_perp".into()
        })?;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let closed = disagreement(&x, &p).map_err(|e| e.to_string())?;
        let dense = p.apply_dense(&x).map_err(|e| e.to_string())?;
        let gap = closed.iter().zip(&dense).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        ensure(gap <= 1e-12, || {
            format!("closed form and dense projector differ by {gap:e}")
        })?;
        let s: f64 = closed.iter().sum();
        ensure(s.abs() <= 1e-9 * norm_inf(&x).max(1.0), || {
            format!("disagreement sums to {s:e}")
        })
    });

    b.property("disagreement_bounds", |n, rng| {
        let p = make_projections(n).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let d = norm_inf(&disagreement(&x, &p).map_err(|e| e.to_string())?);
        let diam = diameter(&x);
        ensure(d <= diam + 1e-9 && diam <= 2.0 * d + 1e-9, || {
            format!("bounds violated: |pi_perp x| = {d}, diameter = {diam}")
        })?;
        // Distance from x to the constant vectors is diameter / 2, attained at the midrange.
        let min_dist = diam / 2.0;
        ensure(min_dist <= d + 1e-12 && d <= 2.0 * min_dist + 1e-12, || {
            format!("|pi_perp x| = {d} not within [min, 2 min] for min = {min_dist}")
        })?;
        let c: f64 = rng.random_range(-20.0..20.0);
        let y: Vec<f64> = x.iter().map(|v| v - c).collect();
        ensure(min_dist <= norm_inf(&y) + 1e-12, || {
            "a constant vector is closer than diameter / 2".into()
        })?;
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let ds = disagreement(&shifted, &p).map_err(|e| e.to_string())?;
        let dx = disagreement(&x, &p).map_err(|e| e.to_string())?;
        let gap = ds.iter().zip(&dx).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        ensure(gap <= 1e-12 * c.abs().max(1.0) * 10.0, || {
            format!("shift changed disagreement by {gap:e}")
        })
    });

    b.property("spectral_identity", |n, rng| {
        let a = random_stochastic_matrix(n, 0.3, rng);
        let p = make_projections(n).map_err(|e| e.to_string())?;
        let rho =
            spectral_radius(&p.project_matrix(a.matrix()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let l2 = second_eigenvalue_modulus(&a).map_err(|e| e.to_string())?;
        ensure((rho - l2).abs() <= 1e-7, || {
            format!("rho(pi_perp A) = {rho} but |lambda2(A)| = {l2}")
        })
    });

    b.property("stochastic_contraction", |n, rng| {
        let a = random_stochastic_matrix(n, 0.3, rng);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = rng.random_range(1..=50u32);
        let y = a.matrix().pow(t).matvec(&x);
        ensure(norm_inf(&y) <= norm_inf(&x) + 1e-12, || {
            format!("|A^{t} x| exceeds |x|")
        })
    });

    b.property("deterministic_chain", |n, rng| {
        let a = random_stochastic_matrix(n, 0.3, rng);
        let p = make_projections(n).map_err(|e| e.to_string())?;
        let pa = p.project_matrix(a.matrix()).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut state = x.clone();
        for t in 1..=20u32 {
            state = a.apply(&state);
            let direct = disagreement(&state, &p).map_err(|e| e.to_string())?;
            let power = pa.pow(t).matvec(&x);
            let scale = norm_inf(&power).max(1e-300);
            let gap = direct.iter().zip(&power).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
            // Relative at 1e-9 once the state has not collapsed to rounding level.
            ensure(gap <= 1e-9 * scale.max(1e-6), || {
                format!("t = {t}: iteration and matrix power differ by {gap:e}")
            })?;
        }
        Ok(())
    });

    b.property("generator_draws_valid", |n, rng| {
        let alpha = rng.random_range(0.05..3.0);
        let hold = rng.random::<f64>();
        for g in [
            Generator::PairwiseGossip,
            Generator::DirichletRows { alpha },
            Generator::LazyPermutation { hold_prob: hold },
        ] {
            let d = MatrixDistribution::generator(g, n).map_err(|e| e.to_string())?;
            for _ in 0..20 {
                let m = d.sample(rng);
                validate_matrix(&m.matrix().to_rows()).map_err(|e| format!("{} draw invalid: {e}", g.name()))?;
            }
        }
        Ok(())
    });

    b.property("trajectory_invariants", |n, rng| {
        let atoms = (0..3)
            .map(|_| Atom {
                prob: 1.0 / 3.0,
                matrix: random_stochastic_matrix(n, 0.5, rng),
            })
            .collect();
        let general = MatrixDistribution::finite(atoms).map_err(|e| e.to_string())?;
        let gossip = MatrixDistribution::generator(Generator::PairwiseGossip, n).map_err(|e| e.to_string())?;
        let x0: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        for d in [&general, &gossip] {
            let rec = simulate_path(d, &x0, 30, rng, 0).map_err(|e| e.to_string())?;
            rec.check_invariants(d.doubly_stochastic_support())
                .map_err(|v| v.to_string())?;
        }
        Ok(())
    });

    b.property("lifting", |n, rng| {
        let alpha: f64 = rng.random();
        let beta = 1.0 - alpha;
        let da = MatrixDistribution::dirac(random_stochastic_matrix(n, 0.3, rng));
        let db = MatrixDistribution::finite(vec![
            Atom {
                prob: 0.5,
                matrix: random_stochastic_matrix(n, 0.3, rng),
            },
            Atom {
                prob: 0.5,
                matrix: random_stochastic_matrix(n, 0.3, rng),
            },
        ])
        .map_err(|e| e.to_string())?;
        let lifted = lift_second_order(alpha, beta, &da, &db).map_err(|e| e.to_string())?;
        for atom in lifted.finite_support().ok_or("lifted law not enumerable")? {
            validate_matrix(&atom.matrix.matrix().to_rows()).map_err(|e| format!("lifted matrix invalid: {e}"))?;
        }
        let steps = 20;
        let a_seq: Vec<_> = (0..steps).map(|_| random_stochastic_matrix(n, 0.3, rng)).collect();
        let b_seq: Vec<_> = (0..steps).map(|_| random_stochastic_matrix(n, 0.3, rng)).collect();
        let x0: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let direct = second_order_direct(alpha, beta, &a_seq, &b_seq, &x0, &x1);
        let mut y: Vec<f64> = x1.iter().chain(&x0).copied().collect();
        for (k, (a, b)) in a_seq.iter().zip(&b_seq).enumerate() {
            y = lift_matrices(alpha, beta, a, b).apply(&y);
            let gap = y[..n]
                .iter()
                .zip(&direct[k + 2])
                .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
            ensure(gap <= 1e-10, || {
                format!("step {}: lifted and direct recursions differ by {gap:e}", k + 2)
            })?;
        }
        Ok(())
    });

    b.property("point_mass_verdict", |n, rng| {
        let a = random_stochastic_matrix(n, 0.6, rng);
        let det = deterministic_verdict(&a, DEFAULT_VERDICT_TOL).map_err(|e| e.to_string())?;
        let rand = random_verdict(&MatrixDistribution::dirac(a), 0, &RngPolicy::new(rng.random()))
            .map_err(|e| e.to_string())?;
        ensure(det == rand.decision, || {
            format!("deterministic {det} vs random {}", rand.decision)
        })
    });

    Ok(SelfcheckReport {
        seed: opts.seed,
        properties: b.out,
    })
}
