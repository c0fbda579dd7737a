use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randnet_core::selfcheck::random_stochastic_matrix;
use randnet_core::{
    cross_validate, lift_matrices, lift_second_order, random_verdict, second_order_direct, Atom, Decision,
    DistributionKind, Generator, Matrix, MatrixDistribution, ModeParams, RngPolicy, StochasticMatrix,
};

fn identity_swap() -> MatrixDistribution {
    MatrixDistribution::finite(vec![
        Atom {
            prob: 0.5,
            matrix: StochasticMatrix::identity(2),
        },
        Atom {
            prob: 0.5,
            matrix: StochasticMatrix::permutation(&[1, 0]).unwrap(),
        },
    ])
    .unwrap()
}

fn short_run() -> ModeParams {
    ModeParams {
        paths: 50,
        horizon: 200,
        ..ModeParams::default()
    }
}

#[test]
fn gossip_cross_validation_is_clean() {
    let gossip = MatrixDistribution::generator(Generator::PairwiseGossip, 3).unwrap();
    let cv = cross_validate(&gossip, &[1.0, 0.0, 0.3], &short_run(), 0, &RngPolicy::new(4)).unwrap();
    assert_eq!(cv.verdict.decision, Decision::Consensus);
    assert!(cv.modes.classification.all_converged());
    assert!(cv.verdict.discrepancy.is_none());
}

#[test]
fn averaging_point_mass_cross_validation_is_clean() {
    let dist = MatrixDistribution::dirac(StochasticMatrix::uniform(4));
    let cv = cross_validate(&dist, &[4.0, -1.0, 0.0, 2.0], &short_run(), 0, &RngPolicy::new(0)).unwrap();
    assert_eq!(cv.verdict.lambda2_modulus, 0.0);
    assert!(cv.verdict.discrepancy.is_none());
}

#[test]
fn identity_point_mass_agrees_on_no_consensus() {
    let dist = MatrixDistribution::dirac(StochasticMatrix::identity(3));
    let cv = cross_validate(&dist, &[0.0, 0.5, 1.0], &short_run(), 0, &RngPolicy::new(0)).unwrap();
    assert_eq!(cv.verdict.decision, Decision::Marginal);
    assert!(cv.modes.classification.none_converged());
    assert!(cv.verdict.discrepancy.is_none());
}

#[test]
fn identity_swap_mixture_surfaces_discrepancy() {
    let dist = identity_swap();
    let cv = cross_validate(&dist, &[1.0, 0.0], &short_run(), 0, &RngPolicy::new(9)).unwrap();
    assert_eq!(cv.verdict.lambda2_modulus, 0.0);
    assert_eq!(cv.verdict.decision, Decision::Consensus);
    assert!(!cv.verdict.positive_diagonal_support);
    assert!(cv.modes.classification.none_converged());
    let note = cv.verdict.discrepancy.expect("discrepancy reported");
    assert!(note.contains("no mode converged"), "{note}");
}

#[test]
fn estimated_expectation_widens_band() {
    let dist = MatrixDistribution::generator(Generator::DirichletRows { alpha: 1.0 }, 3).unwrap();
    let v = random_verdict(&dist, 2_000, &RngPolicy::new(1)).unwrap();
    assert!(v.uncertainty_halfwidth > 0.0);
    assert!(v.positive_diagonal_support);
    assert_eq!(v.decision, Decision::Consensus);
    assert!(random_verdict(&dist, 999, &RngPolicy::new(1)).is_err());
}

#[test]
fn single_node_is_trivially_in_consensus() {
    let v = random_verdict(
        &MatrixDistribution::dirac(StochasticMatrix::identity(1)),
        0,
        &RngPolicy::new(0),
    )
    .unwrap();
    assert_eq!(v.lambda2_modulus, 0.0);
    assert_eq!(v.decision, Decision::Consensus);
}

#[test]
fn lift_with_zero_second_weight() {
    let a = StochasticMatrix::pair_average(2, 0, 1);
    let other = MatrixDistribution::generator(Generator::DirichletRows { alpha: 1.0 }, 2).unwrap();
    let lifted = lift_second_order(1.0, 0.0, &MatrixDistribution::dirac(a.clone()), &other).unwrap();
    let DistributionKind::Dirac(c) = lifted.kind() else {
        panic!("expected a point mass, got {:?}", lifted.kind());
    };
    let expected = Matrix::from_rows(&[
        [0.5, 0.5, 0.0, 0.0],
        [0.5, 0.5, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ])
    .unwrap();
    assert_eq!(c.matrix(), &expected);
}

#[test]
fn lift_of_two_averaging_point_masses() {
    let u = MatrixDistribution::dirac(StochasticMatrix::uniform(2));
    let lifted = lift_second_order(0.5, 0.5, &u, &u).unwrap();
    let DistributionKind::Dirac(c) = lifted.kind() else {
        panic!("expected a point mass");
    };
    assert_eq!(
        c.matrix().to_rows(),
        vec![
            vec![0.25; 4],
            vec![0.25; 4],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
        ]
    );
}

#[test]
fn lift_multiplies_atom_probabilities() {
    let a = identity_swap();
    let b = MatrixDistribution::finite(vec![
        Atom {
            prob: 0.25,
            matrix: StochasticMatrix::uniform(2),
        },
        Atom {
            prob: 0.75,
            matrix: StochasticMatrix::identity(2),
        },
    ])
    .unwrap();
    let lifted = lift_second_order(0.3, 0.7, &a, &b).unwrap();
    let DistributionKind::Finite(atoms) = lifted.kind() else {
        panic!("expected a finite law");
    };
    let mut probs: Vec<f64> = atoms.iter().map(|x| x.prob).collect();
    probs.sort_by(f64::total_cmp);
    assert_eq!(probs, vec![0.125, 0.125, 0.375, 0.375]);
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
fn lifted_recursion_matches_direct_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let alpha: f64 = rng.random();
        let beta = 1.0 - alpha;
        let a_seq: Vec<_> = (0..20).map(|_| random_stochastic_matrix(n, 0.4, &mut rng)).collect();
        let b_seq: Vec<_> = (0..20).map(|_| random_stochastic_matrix(n, 0.4, &mut rng)).collect();
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direct = second_order_direct(alpha, beta, &a_seq, &b_seq, &x0, &x1);

        let mut y: Vec<f64> = x1.iter().chain(&x0).copied().collect();
        for (k, (a, b)) in a_seq.iter().zip(&b_seq).enumerate() {
            y = lift_matrices(alpha, beta, a, b).apply(&y);
            let x = &direct[k + 2];
            for i in 0..n {
                assert!((y[i] - x[i]).abs() <= 1e-10, "step {}: {} vs {}", k + 2, y[i], x[i]);
            }
        }
    }
}
