//! Consensus analysis for linear networks `X(t) = A(t) X(t-1)` driven by i.i.d.
//! random stochastic matrices.
//!
//! The crate decides consensus spectrally, from the second-largest eigenvalue modulus
//! of the expected update matrix, and checks that decision empirically by seeded
//! Monte Carlo simulation of the three convergence modes (almost sure, in probability,
//! in `L^p`). Second-order recursions are handled through a block lifting to `2n`
//! dimensions.
//!
//! ```
//! use randnet_core::{random_verdict, Decision, Generator, MatrixDistribution, RngPolicy};
//!
//! let gossip = MatrixDistribution::generator(Generator::PairwiseGossip, 3).unwrap();
//! let verdict = random_verdict(&gossip, 0, &RngPolicy::new(7)).unwrap();
//! assert_eq!(verdict.decision, Decision::Consensus);
//! assert!((verdict.lambda2_modulus - 0.5).abs() < 1e-9);
//! ```

pub mod analysis;
pub mod config;
pub mod distribution;
pub mod dynamics;
pub mod error;
pub mod matrix;
pub mod projection;
pub mod report;
pub mod rng;
pub mod selfcheck;
pub mod spectral;

pub use analysis::{
    cross_validate, expected_matrix, lift_matrices, lift_second_order, norm_expectations, random_verdict,
    second_order_direct, ConsensusVerdict, CrossValidation, ExpectedMatrix, NormExpectations,
};
pub use config::{load_config, parse_config, Config, SimulationDefaults};
pub use distribution::{Atom, DistributionKind, Generator, MatrixDistribution};
pub use dynamics::{
    aggregate, estimate_modes, shift_invariance_check, simulate_path, simulate_paths, zero_one_probe, AggregatePoint,
    InitialState, ModeClassification, ModeParams, ModeReport, ModeStatus, SeriesPoint, TrajectoryRecord,
};
pub use error::{Error, Result, ValidationError};
pub use matrix::{validate_matrix, Matrix, StochasticMatrix};
pub use projection::{diameter, disagreement, make_projections, ProjectionPair};
pub use rng::{RngPolicy, StreamPurpose};
pub use spectral::{
    deterministic_verdict, eigen_spectrum, second_eigenvalue_modulus, spectral_radius, Decision, Spectrum,
};
