//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so the lines
//! show up in `cargo test` output; exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randnet_core::analysis::{lift_matrices, norm_expectations, second_order_direct};
use randnet_core::dynamics::ModeReport;
use randnet_core::projection::norm_inf;
use randnet_core::selfcheck::random_stochastic_matrix;
use randnet_core::spectral::DEFAULT_VERDICT_TOL;
use randnet_core::{
    aggregate, cross_validate, diameter, disagreement, estimate_modes, lift_second_order, make_projections,
    random_verdict, second_eigenvalue_modulus, simulate_paths, spectral_radius, validate_matrix, zero_one_probe, Atom,
    Decision, Generator, InitialState, Matrix, MatrixDistribution, ModeParams, RngPolicy, StochasticMatrix,
};

const MASTER_SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    match limit {
        Some(limit) => {
            o.detail = format!("{}; {:.2}s (limit {}s)", o.detail, took.as_secs_f64(), limit.as_secs());
            o.pass &= took < limit;
        }
        None => o.detail = format!("{}; {:.2}s", o.detail, took.as_secs_f64()),
    }
    o
}

fn outcome_with_time(mut o: Outcome, secs: f64) -> Outcome {
    o.detail = format!("{}; {secs:.2}s", o.detail);
    o
}

fn c1_projection_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 2..=16 {
        let p = make_projections(n).unwrap();
        worst = worst
            .max(p.pi().add(p.pi_perp()).max_abs_diff(&Matrix::identity(n)))
            .max(p.pi().matmul(p.pi()).max_abs_diff(p.pi()))
            .max(p.pi_perp().matmul(p.pi_perp()).max_abs_diff(p.pi_perp()));
        for k in 0..100 {
            let a = random_stochastic_matrix(n, [0.0, 0.3, 0.7][k % 3], &mut rng);
            let left = p.pi_perp().matmul(a.matrix());
            worst = worst.max(left.max_abs_diff(&left.matmul(p.pi_perp())));
            count += 1;
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max entry error {worst:.1e} <= 1e-12 over {count} matrices"),
    )
}

fn c2_spectral_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 2);
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 2..=16 {
        let p = make_projections(n).unwrap();
        for k in 0..200 {
            let a = random_stochastic_matrix(n, [0.0, 0.3, 0.7][k % 3], &mut rng);
            let rho = spectral_radius(&p.project_matrix(a.matrix()).unwrap()).unwrap();
            let l2 = second_eigenvalue_modulus(&a).unwrap();
            worst = worst.max((rho - l2).abs());
            count += 1;
        }
    }
    outcome(
        worst <= 1e-7,
        format!("max |rho(pi_perp A) - |lambda2(A)|| = {worst:.1e} <= 1e-7 over {count} matrices"),
    )
}

fn c3_deterministic_iteration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 3);
    let mut worst = 0.0f64;
    let mut accepted = 0;
    while accepted < 50 {
        let n = rng.random_range(2..=10);
        let a = random_stochastic_matrix(n, 0.3, &mut rng);
        if second_eigenvalue_modulus(&a).unwrap() > 0.9 {
            continue;
        }
        accepted += 1;
        let p = make_projections(n).unwrap();
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..200 {
            x = a.apply(&x);
        }
        worst = worst.max(norm_inf(&disagreement(&x, &p).unwrap()));
    }
    let mut constant = true;
    for n in [2, 5] {
        let mut swap: Vec<usize> = (0..n).collect();
        swap.swap(0, 1);
        for a in [
            StochasticMatrix::permutation(&swap).unwrap(),
            StochasticMatrix::identity(n),
        ] {
            let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d0 = diameter(&x);
            for _ in 0..200 {
                x = a.apply(&x);
                constant &= diameter(&x) == d0;
            }
        }
    }
    outcome(
        worst < 1e-6 && constant,
        format!("max |pi_perp A^200 x| = {worst:.1e} < 1e-6 over 50 matrices with |lambda2| <= 0.9; swap/identity diameter exactly constant: {constant}"),
    )
}

fn c4_gossip_benchmark() -> Outcome {
    let dist = MatrixDistribution::generator(Generator::PairwiseGossip, 3).unwrap();
    let policy = RngPolicy::new(MASTER_SEED);
    let verdict = random_verdict(&dist, 0, &policy).unwrap();
    let exact_ok = verdict.uncertainty_halfwidth == 0.0 && (verdict.lambda2_modulus - 0.5).abs() <= 1e-9;

    let params = ModeParams {
        paths: 200,
        horizon: 300,
        eps: 1e-3,
        ..ModeParams::default()
    };
    let x0 = InitialState::uniform01().resolve(3, &policy).unwrap();
    let records = simulate_paths(&dist, &x0, params.paths, params.horizon, &policy).unwrap();
    let monotone = records
        .iter()
        .all(|r| r.diameter_monotone() && r.disagreement_monotone());
    let report = ModeReport::from_aggregate(&aggregate(&records, params.eps, params.p), &params);
    let same = estimate_modes(&dist, &x0, &params, &policy).unwrap() == report;
    let all = report.classification.all_converged();
    outcome(
        exact_ok && monotone && all && same,
        format!(
            "lambda2 = {} (exact), all modes converged: {all}, every path monotone: {monotone}",
            verdict.lambda2_modulus
        ),
    )
}

/// Dense random matrix supported on the given diagonal blocks, with a positive diagonal.
fn block_matrix(blocks: &[std::ops::Range<usize>], n: usize, rng: &mut ChaCha8Rng) -> StochasticMatrix {
    let mut m = Matrix::zeros(n);
    for block in blocks {
        let inner = random_stochastic_matrix(block.len(), 0.0, rng);
        for (i, gi) in block.clone().enumerate() {
            for (j, gj) in block.clone().enumerate() {
                m[(gi, gj)] = inner[(i, j)];
            }
        }
    }
    StochasticMatrix::new(m).unwrap()
}

/// A finite law in the battery together with how its support is wired.
struct BatteryCase {
    label: &'static str,
    dist: MatrixDistribution,
}

/// Twenty finite laws with positive diagonals: dense, connected only through mixing of
/// two different block partitions, and reducible (every atom shares one partition).
fn battery() -> Vec<BatteryCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 5);
    let mut cases = Vec::new();
    for k in 0..20 {
        let n = rng.random_range(3..=6);
        let split = rng.random_range(2..n);
        let atoms = rng.random_range(2..=3);
        let (label, matrices): (&'static str, Vec<StochasticMatrix>) = match k % 3 {
            0 => (
                "dense",
                (0..atoms).map(|_| random_stochastic_matrix(n, 0.0, &mut rng)).collect(),
            ),
            1 => (
                "mixed-partition",
                (0..atoms)
                    .map(|a| {
                        if a % 2 == 0 {
                            block_matrix(&[0..split, split..n], n, &mut rng)
                        } else {
                            block_matrix(&[0..1, 1..n], n, &mut rng)
                        }
                    })
                    .collect(),
            ),
            _ => (
                "reducible",
                (0..atoms)
                    .map(|_| block_matrix(&[0..split, split..n], n, &mut rng))
                    .collect(),
            ),
        };
        let weights: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let dist = MatrixDistribution::finite(
            matrices
                .into_iter()
                .zip(&weights)
                .map(|(matrix, w)| Atom {
                    prob: w / total,
                    matrix,
                })
                .collect(),
        )
        .unwrap();
        cases.push(BatteryCase { label, dist });
    }
    cases
}

struct BatteryResult {
    label: &'static str,
    lambda2: f64,
    positive_diagonal: bool,
    modes: ModeReport,
}

fn run_battery() -> Vec<BatteryResult> {
    let params = ModeParams {
        paths: 200,
        horizon: 300,
        eps: 1e-3,
        ..ModeParams::default()
    };
    battery()
        .into_iter()
        .enumerate()
        .map(|(k, case)| {
            let n = case.dist.dim();
            // Increasing coordinates keep the two blocks of a reducible law apart.
            let x0: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let policy = RngPolicy::new(MASTER_SEED + k as u64);
            let cv = cross_validate(&case.dist, &x0, &params, 0, &policy).unwrap();
            BatteryResult {
                label: case.label,
                lambda2: cv.verdict.lambda2_modulus,
                positive_diagonal: cv.verdict.positive_diagonal_support,
                modes: cv.modes,
            }
        })
        .collect()
}

fn c5_mode_equivalence(results: &[BatteryResult]) -> Outcome {
    let diag = results.iter().all(|r| r.positive_diagonal);
    let agree = results.iter().filter(|r| r.modes.classification.agree()).count();
    let converged = results
        .iter()
        .filter(|r| r.modes.classification.all_converged())
        .count();
    let decisive = converged > 0 && converged < results.len();
    outcome(
        diag && agree == results.len() && decisive,
        format!(
            "{agree}/{} instances agree ({converged} all-converged, {} none-converged); positive diagonals: {diag}",
            results.len(),
            results.len() - converged
        ),
    )
}

fn c6_necessity(results: &[BatteryResult]) -> Outcome {
    let converged: Vec<&BatteryResult> = results
        .iter()
        .filter(|r| r.modes.classification.all_converged())
        .collect();
    let worst = converged.iter().map(|r| r.lambda2).fold(0.0, f64::max);
    let ok = converged.iter().all(|r| r.lambda2 < 1.0 - DEFAULT_VERDICT_TOL);
    let reducible_max_gap = results
        .iter()
        .filter(|r| r.label == "reducible")
        .map(|r| (1.0 - r.lambda2).abs())
        .fold(0.0, f64::max);
    outcome(
        ok && !converged.is_empty(),
        format!(
            "{} converged instances, max |lambda2| = {worst:.4} < 1 - 1e-7 (reducible instances sit at |lambda2| = 1 within {reducible_max_gap:.1e})",
            converged.len()
        ),
    )
}

fn c7_discrepancy_probe() -> Outcome {
    let dist = MatrixDistribution::finite(vec![
        Atom {
            prob: 0.5,
            matrix: StochasticMatrix::identity(2),
        },
        Atom {
            prob: 0.5,
            matrix: StochasticMatrix::permutation(&[1, 0]).unwrap(),
        },
    ])
    .unwrap();
    let policy = RngPolicy::new(MASTER_SEED);
    let params = ModeParams {
        paths: 200,
        horizon: 300,
        eps: 1e-3,
        ..ModeParams::default()
    };
    let x0 = [1.0, 0.0];
    let records = simulate_paths(&dist, &x0, params.paths, params.horizon, &policy).unwrap();
    let stuck = records.iter().all(|r| r.diameters().all(|d| d == 1.0));
    let cv = cross_validate(&dist, &x0, &params, 0, &policy).unwrap();
    let spectral = cv.verdict.lambda2_modulus == 0.0 && cv.verdict.decision == Decision::Consensus;
    let surfaced = cv.verdict.discrepancy.is_some();
    outcome(
        spectral && stuck && surfaced,
        format!(
            "lambda2 = {} ({}), diameter == 1 on every path and step: {stuck}, discrepancy populated: {surfaced}",
            cv.verdict.lambda2_modulus, cv.verdict.decision
        ),
    )
}

fn c8_zero_one() -> Outcome {
    let cases = [
        (
            "pairwise_gossip",
            MatrixDistribution::generator(Generator::PairwiseGossip, 3).unwrap(),
        ),
        ("dirac(I)", MatrixDistribution::dirac(StochasticMatrix::identity(3))),
        (
            "lazy_permutation(0)",
            MatrixDistribution::generator(Generator::LazyPermutation { hold_prob: 0.0 }, 3).unwrap(),
        ),
    ];
    let policy = RngPolicy::new(MASTER_SEED);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, dist) in &cases {
        let x0 = InitialState::uniform01().resolve(dist.dim(), &policy).unwrap();
        let frac = zero_one_probe(dist, &x0, 200, 300, 1e-3, &policy).unwrap();
        ok &= !(frac > 0.05 && frac < 0.95);
        parts.push(format!("{name} {frac}"));
    }
    outcome(
        ok,
        format!("consensus fractions outside (0.05, 0.95): {}", parts.join(", ")),
    )
}

fn random_finite(n: usize, rng: &mut ChaCha8Rng) -> MatrixDistribution {
    let p: f64 = rng.random_range(0.1..0.9);
    MatrixDistribution::finite(vec![
        Atom {
            prob: p,
            matrix: random_stochastic_matrix(n, 0.4, rng),
        },
        Atom {
            prob: 1.0 - p,
            matrix: random_stochastic_matrix(n, 0.4, rng),
        },
    ])
    .unwrap()
}

fn c9_second_order_lifting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 9);
    let mut worst = 0.0f64;
    let mut lifted_ok = true;
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let alpha: f64 = rng.random();
        let beta = 1.0 - alpha;
        let (da, db) = (random_finite(n, &mut rng), random_finite(n, &mut rng));
        for atom in lift_second_order(alpha, beta, &da, &db)
            .unwrap()
            .finite_support()
            .unwrap()
        {
            lifted_ok &= validate_matrix(&atom.matrix.matrix().to_rows()).is_ok();
        }
        let a_seq: Vec<StochasticMatrix> = (0..20).map(|_| da.sample(&mut rng).into_owned()).collect();
        let b_seq: Vec<StochasticMatrix> = (0..20).map(|_| db.sample(&mut rng).into_owned()).collect();
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direct = second_order_direct(alpha, beta, &a_seq, &b_seq, &x0, &x1);
        let mut y: Vec<f64> = x1.iter().chain(&x0).copied().collect();
        for (k, (a, b)) in a_seq.iter().zip(&b_seq).enumerate() {
            let c = lift_matrices(alpha, beta, a, b);
            lifted_ok &= validate_matrix(&c.matrix().to_rows()).is_ok();
            y = c.apply(&y);
            for (u, v) in y[..n].iter().zip(&direct[k + 2]) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    outcome(
        worst <= 1e-10 && lifted_ok,
        format!("max |direct - lifted| = {worst:.1e} <= 1e-10 over 50 instances x 20 steps; lifted matrices stochastic: {lifted_ok}"),
    )
}

fn simulate_with_threads(config: &Path, threads: usize, out: &Path) -> Option<Vec<Vec<u8>>> {
    let status = Command::new(env!("CARGO_BIN_EXE_randnet"))
        .args(["simulate", "--seed", "7", "--threads", &threads.to_string(), "--out"])
        .arg(out)
        .arg("--config")
        .arg(config)
        .status()
        .ok()?;
    if !status.success() {
        return None;
    }
    ["paths.csv", "aggregate.csv", "manifest.json"]
        .iter()
        .map(|f| fs::read(out.join(f)).ok())
        .collect()
}

fn c10_reproducibility() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let many = std::thread::available_parallelism().map_or(8, |n| n.get().max(8));
    let mut ok = true;
    let mut bytes = 0;
    for name in ["gossip3.json", "dirichlet3.json"] {
        let dir = tempfile::tempdir().unwrap();
        let config = fixtures.join(name);
        let single = simulate_with_threads(&config, 1, &dir.path().join("single"));
        let parallel = simulate_with_threads(&config, many, &dir.path().join("parallel"));
        match (single, parallel) {
            (Some(a), Some(b)) => {
                bytes += a[0].len() + a[1].len();
                ok &= a == b;
            }
            _ => ok = false,
        }
    }
    outcome(
        ok,
        format!("1 thread vs {many} threads: outputs byte-identical ({bytes} CSV bytes compared)"),
    )
}

fn c11_norm_remark() -> Outcome {
    let e = norm_expectations(&[(0.5, vec![0.0, 1.0]), (0.5, vec![1.0, 0.0])]).unwrap();
    let ok = e.mean_l1 == 1.0 && e.l1_of_mean == 1.0 && e.mean_linf == 1.0 && e.linf_of_mean == 0.5;
    outcome(
        ok,
        format!(
            "E|Y|_1 = {} = |EY|_1 = {}; E|Y|_inf = {} vs |EY|_inf = {}",
            e.mean_l1, e.l1_of_mean, e.mean_linf, e.linf_of_mean
        ),
    )
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let mut results: Vec<(&str, Outcome)> = vec![
        ("C1 projection algebra", timed(secs(5), c1_projection_algebra)),
        ("C2 spectral identity", timed(secs(30), c2_spectral_identity)),
        (
            "C3 deterministic verdict vs iteration",
            timed(None, c3_deterministic_iteration),
        ),
        ("C4 gossip benchmark", timed(secs(10), c4_gossip_benchmark)),
    ];
    let start = Instant::now();
    let battery = run_battery();
    let battery_time = start.elapsed().as_secs_f64();
    results.push((
        "C5 mode equivalence",
        outcome_with_time(c5_mode_equivalence(&battery), battery_time),
    ));
    results.push(("C6 necessity direction", c6_necessity(&battery)));
    results.push(("C7 discrepancy probe", timed(None, c7_discrepancy_probe)));
    results.push(("C8 zero-one probe", timed(None, c8_zero_one)));
    results.push(("C9 second-order lifting", timed(None, c9_second_order_lifting)));
    results.push(("C10 reproducibility across threads", timed(None, c10_reproducibility)));
    results.push(("C11 norm remark", c11_norm_remark()));

    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
