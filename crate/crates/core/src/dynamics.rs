//! Seeded multi-path simulation of `X(t) = A(t) X(t-1)` with per-step diagnostics
//! and empirical estimates of the three convergence modes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::MatrixDistribution;
use crate::error::{Error, Result};
use crate::projection::{diameter, norm_inf, norm_l2, subtract_mean};
use crate::rng::{RngPolicy, StreamPurpose};

pub const DEFAULT_PATHS: usize = 200;
pub const DEFAULT_HORIZON: usize = 300;
pub const DEFAULT_EPS: f64 = 1e-3;
pub const DEFAULT_P: f64 = 1.0;

/// Slack for monotonicity checks, relative to `max(1, ||x0||_inf)`.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Slack for the two-sided bound between diameter and disagreement norm.
pub const SANDWICH_SLACK: f64 = 1e-9;

/// Initial state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Explicit(Vec<f64>),
    /// The literal string `"uniform01"`: i.i.d. uniform coordinates on `[0, 1]`
    /// drawn from the master seed.
    Named(InitialStateName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialStateName {
    #[serde(rename = "uniform01")]
    Uniform01,
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Named(InitialStateName::Uniform01)
    }
}

impl InitialState {
    pub fn uniform01() -> Self {
        InitialState::Named(InitialStateName::Uniform01)
    }

    pub fn resolve(&self, n: usize, policy: &RngPolicy) -> Result<Vec<f64>> {
        match self {
            InitialState::Explicit(x) => {
                if x.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: x.len(),
                    });
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("initial state has non-finite entries".into()));
                }
                Ok(x.clone())
            }
            InitialState::Named(InitialStateName::Uniform01) => {
                let mut rng = policy.stream(StreamPurpose::InitialState, 0);
                Ok((0..n).map(|_| rng.random::<f64>()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: usize,
    pub diameter: f64,
    pub disagreement_inf: f64,
    pub disagreement_l2: f64,
}

impl SeriesPoint {
    fn of(t: usize, x: &[f64]) -> Self {
        let d = subtract_mean(x);
        SeriesPoint {
            t,
            diameter: diameter(x),
            disagreement_inf: norm_inf(&d),
            disagreement_l2: norm_l2(&d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub path_id: u64,
    pub x0: Vec<f64>,
    /// Diagnostics for `t = 0..=horizon`.
    pub series: Vec<SeriesPoint>,
    pub final_state: Vec<f64>,
}

/// A broken trajectory invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantViolation {
    pub path_id: u64,
    pub t: usize,
    pub what: &'static str,
    pub previous: f64,
    pub current: f64,
}

impl std::fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "path {} at t = {}: {} ({} -> {})",
            self.path_id, self.t, self.what, self.previous, self.current
        )
    }
}

impl TrajectoryRecord {
    fn slack(&self) -> f64 {
        MONOTONE_SLACK * norm_inf(&self.x0).max(1.0)
    }

    pub fn diameter_monotone(&self) -> bool {
        let slack = self.slack();
        self.series.windows(2).all(|w| w[1].diameter <= w[0].diameter + slack)
    }

    pub fn disagreement_monotone(&self) -> bool {
        let slack = self.slack();
        self.series
            .windows(2)
            .all(|w| w[1].disagreement_inf <= w[0].disagreement_inf + slack)
    }

    /// Checks the per-step invariants.
    ///
    /// Diameter monotonicity and the bound `d_inf <= diameter <= 2 d_inf` hold for every
    /// stochastic law. Monotonicity of the disagreement sup-norm is only guaranteed for
    /// doubly stochastic laws and is checked when `disagreement_monotone` is set.
    pub fn check_invariants(&self, disagreement_monotone: bool) -> Result<(), InvariantViolation> {
        let slack = self.slack();
        let sandwich = SANDWICH_SLACK * norm_inf(&self.x0).max(1.0);
        for p in &self.series {
            if p.diameter > 2.0 * p.disagreement_inf + sandwich || p.disagreement_inf > p.diameter + sandwich {
                return Err(InvariantViolation {
                    path_id: self.path_id,
                    t: p.t,
                    what: "diameter / disagreement bound",
                    previous: p.disagreement_inf,
                    current: p.diameter,
                });
            }
        }
        for w in self.series.windows(2) {
            if w[1].diameter > w[0].diameter + slack {
                return Err(InvariantViolation {
                    path_id: self.path_id,
                    t: w[1].t,
                    what: "diameter increased",
                    previous: w[0].diameter,
                    current: w[1].diameter,
                });
            }
            if disagreement_monotone && w[1].disagreement_inf > w[0].disagreement_inf + slack {
                return Err(InvariantViolation {
                    path_id: self.path_id,
                    t: w[1].t,
                    what: "disagreement sup-norm increased",
                    previous: w[0].disagreement_inf,
                    current: w[1].disagreement_inf,
                });
            }
        }
        Ok(())
    }

    pub fn diameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.series.iter().map(|p| p.diameter)
    }

    pub fn terminal_diameter(&self) -> f64 {
        self.series.last().map_or(0.0, |p| p.diameter)
    }
}

/// Iterates `X(t) = A(t) X(t-1)` for `t = 1..=horizon` with a fresh draw per step.
pub fn simulate_path<R: Rng + ?Sized>(
    dist: &MatrixDistribution,
    x0: &[f64],
    horizon: usize,
    rng: &mut R,
    path_id: u64,
) -> Result<TrajectoryRecord> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if x0.len() != dist.dim() {
        return Err(Error::DimensionMismatch {
            expected: dist.dim(),
            got: x0.len(),
        });
    }
    let mut series = Vec::with_capacity(horizon + 1);
    let mut x = x0.to_vec();
    let mut next = vec![0.0; x.len()];
    series.push(SeriesPoint::of(0, &x));
    for t in 1..=horizon {
        let a = dist.sample(rng);
        a.matrix().matvec_into(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        series.push(SeriesPoint::of(t, &x));
    }
    Ok(TrajectoryRecord {
        path_id,
        x0: x0.to_vec(),
        series,
        final_state: x,
    })
}

/// Simulates paths `0..paths`, path `k` on its own derived stream. Output is in path order
/// and independent of the number of worker threads.
pub fn simulate_paths(
    dist: &MatrixDistribution,
    x0: &[f64],
    paths: usize,
    horizon: usize,
    policy: &RngPolicy,
) -> Result<Vec<TrajectoryRecord>> {
    (0..paths as u64)
        .into_par_iter()
        .map(|k| simulate_path(dist, x0, horizon, &mut policy.path_stream(k), k))
        .collect()
}

/// Cross-path statistics at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub t: usize,
    pub mean_diameter: f64,
    /// Fraction of paths with `diameter > eps`.
    pub p_exceed_eps: f64,
    pub max_diameter: f64,
    /// Sample mean of `diameter^p`.
    pub lp_mean: f64,
}

/// Per-`t` aggregates, summed in path order.
pub fn aggregate(records: &[TrajectoryRecord], eps: f64, p: f64) -> Vec<AggregatePoint> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let len = first.series.len();
    let count = records.len() as f64;
    (0..len)
        .map(|i| {
            let mut sum = 0.0;
            let mut sum_p = 0.0;
            let mut exceed = 0usize;
            let mut max = 0.0f64;
            for r in records {
                let d = r.series[i].diameter;
                sum += d;
                sum_p += d.powf(p);
                if d > eps {
                    exceed += 1;
                }
                max = max.max(d);
            }
            AggregatePoint {
                t: first.series[i].t,
                mean_diameter: sum / count,
                p_exceed_eps: exceed as f64 / count,
                max_diameter: max,
                lp_mean: sum_p / count,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeStatus {
    Converged,
    NotConverged,
}

impl ModeStatus {
    fn from_bool(ok: bool) -> Self {
        if ok {
            ModeStatus::Converged
        } else {
            ModeStatus::NotConverged
        }
    }
}

/// Classification thresholds for the three modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeThresholds {
    /// Almost-sure mode converged iff the fraction of paths ending within eps is at least this.
    pub as_fraction_min: f64,
    /// In-probability mode converged iff the exceedance fraction at the horizon is at most this.
    pub prob_exceed_max: f64,
}

impl Default for ModeThresholds {
    fn default() -> Self {
        ModeThresholds {
            as_fraction_min: 0.99,
            prob_exceed_max: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub paths: usize,
    pub horizon: usize,
    pub eps: f64,
    pub p: f64,
    pub thresholds: ModeThresholds,
}

impl Default for ModeParams {
    fn default() -> Self {
        ModeParams {
            paths: DEFAULT_PATHS,
            horizon: DEFAULT_HORIZON,
            eps: DEFAULT_EPS,
            p: DEFAULT_P,
            thresholds: ModeThresholds::default(),
        }
    }
}

impl ModeParams {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::InvalidArgument("paths must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p must be at least 1, got {}", self.p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeClassification {
    pub almost_sure: ModeStatus,
    pub in_probability: ModeStatus,
    pub in_lp: ModeStatus,
}

impl ModeClassification {
    pub fn agree(&self) -> bool {
        self.almost_sure == self.in_probability && self.in_probability == self.in_lp
    }

    pub fn all_converged(&self) -> bool {
        self.agree() && self.almost_sure == ModeStatus::Converged
    }

    pub fn none_converged(&self) -> bool {
        self.agree() && self.almost_sure == ModeStatus::NotConverged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub eps: f64,
    pub p: f64,
    pub horizon: usize,
    pub paths: usize,
    /// Fraction of paths with `diameter(horizon) <= eps`.
    pub as_fraction: f64,
    /// Per-`t` fraction of paths with `diameter(t) > eps`.
    pub prob_curve: Vec<f64>,
    /// Per-`t` sample mean of `diameter(t)^p`.
    pub lp_curve: Vec<f64>,
    pub thresholds: ModeThresholds,
    /// The L^p threshold `eps^p`.
    pub lp_threshold: f64,
    pub classification: ModeClassification,
    pub agreement: bool,
}

impl ModeReport {
    pub fn from_aggregate(agg: &[AggregatePoint], params: &ModeParams) -> Self {
        let last = agg.last().expect("aggregate covers t = 0..=horizon");
        let as_fraction = 1.0 - last.p_exceed_eps;
        let lp_threshold = params.eps.powf(params.p);
        let classification = ModeClassification {
            almost_sure: ModeStatus::from_bool(as_fraction >= params.thresholds.as_fraction_min),
            in_probability: ModeStatus::from_bool(last.p_exceed_eps <= params.thresholds.prob_exceed_max),
            in_lp: ModeStatus::from_bool(last.lp_mean <= lp_threshold),
        };
        ModeReport {
            eps: params.eps,
            p: params.p,
            horizon: params.horizon,
            paths: params.paths,
            as_fraction,
            prob_curve: agg.iter().map(|a| a.p_exceed_eps).collect(),
            lp_curve: agg.iter().map(|a| a.lp_mean).collect(),
            thresholds: params.thresholds,
            lp_threshold,
            classification,
            agreement: classification.agree(),
        }
    }
}

/// Runs `params.paths` independent paths and classifies each convergence mode from the
/// horizon values. Since diameter never increases along a path, the horizon value is
/// the running infimum.
pub fn estimate_modes(
    dist: &MatrixDistribution,
    x0: &[f64],
    params: &ModeParams,
    policy: &RngPolicy,
) -> Result<ModeReport> {
    params.validate()?;
    let records = simulate_paths(dist, x0, params.paths, params.horizon, policy)?;
    let agg = aggregate(&records, params.eps, params.p);
    Ok(ModeReport::from_aggregate(&agg, params))
}

/// Runs the same matrix sequence from `x0` and from `x0 + c 1` and compares the diameter
/// series to `1e-10`. Both runs must use the same seed.
pub fn shift_invariance_check(
    dist: &MatrixDistribution,
    x0: &[f64],
    c: f64,
    horizon: usize,
    seed: u64,
    shifted_seed: u64,
) -> Result<bool> {
    if seed != shifted_seed {
        return Err(Error::InvalidArgument(format!(
            "shift invariance needs identical matrix draws; got seeds {seed} and {shifted_seed}"
        )));
    }
    let policy = RngPolicy::new(seed);
    let base = simulate_path(dist, x0, horizon, &mut policy.path_stream(0), 0)?;
    let shifted_x0: Vec<f64> = x0.iter().map(|v| v + c).collect();
    let shifted = simulate_path(
        dist,
        &shifted_x0,
        horizon,
        &mut RngPolicy::new(shifted_seed).path_stream(0),
        0,
    )?;
    let same = base
        .diameters()
        .zip(shifted.diameters())
        .all(|(a, b)| (a - b).abs() <= 1e-10);
    Ok(same)
}

/// Empirical probability that a path reaches consensus within `eps` by the horizon.
/// At desk scale this should sit near 0 or near 1.
pub fn zero_one_probe(
    dist: &MatrixDistribution,
    x0: &[f64],
    paths: usize,
    horizon: usize,
    eps: f64,
    policy: &RngPolicy,
) -> Result<f64> {
    let params = ModeParams {
        paths,
        horizon,
        eps,
        ..ModeParams::default()
    };
    Ok(estimate_modes(dist, x0, &params, policy)?.as_fraction)
}
