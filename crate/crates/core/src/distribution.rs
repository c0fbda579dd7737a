//! Probability distributions over stochastic matrices and seeded sampling from them.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, StochasticMatrix};

/// Tolerance on the total mass of a finite distribution.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Names accepted for the `generator` distribution kind.
pub const GENERATOR_NAMES: [&str; 3] = ["pairwise_gossip", "dirichlet_rows", "lazy_permutation"];

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub prob: f64,
    pub matrix: StochasticMatrix,
}

/// Registered parametric families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    /// Uniform over the `n(n-1)/2` matrices averaging a single pair of coordinates.
    PairwiseGossip,
    /// Every row drawn independently from a symmetric Dirichlet law.
    DirichletRows { alpha: f64 },
    /// Identity with probability `hold_prob`, otherwise a uniformly random permutation.
    LazyPermutation { hold_prob: f64 },
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::PairwiseGossip => "pairwise_gossip",
            Generator::DirichletRows { .. } => "dirichlet_rows",
            Generator::LazyPermutation { .. } => "lazy_permutation",
        }
    }

    /// Parameters in the key/value form used by config documents, `n` included.
    pub fn params(&self, n: usize) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        p.insert("n".to_string(), n as f64);
        match *self {
            Generator::PairwiseGossip => {}
            Generator::DirichletRows { alpha } => {
                p.insert("alpha".to_string(), alpha);
            }
            Generator::LazyPermutation { hold_prob } => {
                p.insert("hold_prob".to_string(), hold_prob);
            }
        }
        p
    }

    /// Parses a generator from its name and parameter map, returning it with its dimension.
    pub fn from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<(Generator, usize)> {
        let get = |key: &str| -> Result<f64> {
            params.get(key).copied().ok_or_else(|| {
                Error::config(
                    format!("params.{key}"),
                    format!("generator \"{name}\" requires parameter \"{key}\""),
                )
            })
        };
        let allowed: &[&str] = match name {
            "pairwise_gossip" => &["n"],
            "dirichlet_rows" => &["n", "alpha"],
            "lazy_permutation" => &["n", "hold_prob"],
            other => {
                return Err(Error::config(
                    "name",
                    format!("unknown generator \"{other}\"; expected one of {GENERATOR_NAMES:?}"),
                ))
            }
        };
        if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::config(
                format!("params.{extra}"),
                format!("unexpected parameter for generator \"{name}\""),
            ));
        }
        let n_raw = get("n")?;
        if !(n_raw >= 1.0 && n_raw.fract() == 0.0 && n_raw <= u32::MAX as f64) {
            return Err(Error::config(
                "params.n",
                format!("n must be a positive integer, got {n_raw}"),
            ));
        }
        let n = n_raw as usize;
        let g = match name {
            "pairwise_gossip" => {
                if n < 2 {
                    return Err(Error::config("params.n", "pairwise_gossip needs n >= 2"));
                }
                Generator::PairwiseGossip
            }
            "dirichlet_rows" => {
                let alpha = get("alpha")?;
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::config(
                        "params.alpha",
                        format!("alpha must be positive, got {alpha}"),
                    ));
                }
                Generator::DirichletRows { alpha }
            }
            _ => {
                let hold_prob = get("hold_prob")?;
                if !(0.0..=1.0).contains(&hold_prob) {
                    return Err(Error::config(
                        "params.hold_prob",
                        format!("hold_prob must lie in [0, 1], got {hold_prob}"),
                    ));
                }
                Generator::LazyPermutation { hold_prob }
            }
        };
        Ok((g, n))
    }

    fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> StochasticMatrix {
        match *self {
            Generator::PairwiseGossip => {
                let pairs = n * (n - 1) / 2;
                let (i, j) = pair_from_index(n, rng.random_range(0..pairs));
                StochasticMatrix::pair_average(n, i, j)
            }
            Generator::DirichletRows { alpha } => {
                let gamma = Gamma::new(alpha, 1.0).expect("alpha validated at construction");
                let mut m = Matrix::zeros(n);
                for i in 0..n {
                    loop {
                        let mut sum = 0.0;
                        for j in 0..n {
                            let g = gamma.sample(rng);
                            m[(i, j)] = g;
                            sum += g;
                        }
                        // Very small alpha can underflow every coordinate; redraw the row.
                        if sum > 0.0 && sum.is_finite() {
                            for j in 0..n {
                                m[(i, j)] /= sum;
                            }
                            break;
                        }
                    }
                }
                StochasticMatrix::new(m).expect("normalized Dirichlet rows are stochastic")
            }
            Generator::LazyPermutation { hold_prob } => {
                if rng.random::<f64>() < hold_prob {
                    StochasticMatrix::identity(n)
                } else {
                    let mut perm: Vec<usize> = (0..n).collect();
                    perm.shuffle(rng);
                    StochasticMatrix::permutation(&perm).expect("shuffle yields a permutation")
                }
            }
        }
    }

    /// Exact atom list when the family has small finite support.
    fn finite_support(&self, n: usize) -> Option<Vec<Atom>> {
        match self {
            Generator::PairwiseGossip => {
                let pairs = n * (n - 1) / 2;
                let prob = 1.0 / pairs as f64;
                Some(
                    (0..pairs)
                        .map(|k| {
                            let (i, j) = pair_from_index(n, k);
                            Atom {
                                prob,
                                matrix: StochasticMatrix::pair_average(n, i, j),
                            }
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

/// Maps `k` in `0..n(n-1)/2` to the `k`-th pair `(i, j)`, `i < j`, in lexicographic order.
fn pair_from_index(n: usize, mut k: usize) -> (usize, usize) {
    for i in 0..n {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
    }
    unreachable!("pair index out of range")
}

/// Joint law of the block companion matrices of a second-order recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedLaw {
    pub alpha: f64,
    pub beta: f64,
    pub first: MatrixDistribution,
    pub second: MatrixDistribution,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistributionKind {
    Dirac(StochasticMatrix),
    Finite(Vec<Atom>),
    Generator(Generator),
    /// Independent draws from two laws combined into the block form
    /// `[[alpha A, beta B], [I, 0]]`.
    Lifted(Box<LiftedLaw>),
}

/// A probability measure on `n x n` stochastic matrices.
#[derive(Clone, PartialEq)]
pub struct MatrixDistribution {
    n: usize,
    kind: DistributionKind,
    /// Cumulative atom masses for inverse-CDF selection (finite kind only).
    cdf: Vec<f64>,
}

impl fmt::Debug for MatrixDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixDistribution")
            .field("n", &self.n)
            .field("kind", &self.kind)
            .finish()
    }
}

impl MatrixDistribution {
    pub fn dirac(matrix: StochasticMatrix) -> Self {
        MatrixDistribution {
            n: matrix.dim(),
            kind: DistributionKind::Dirac(matrix),
            cdf: Vec::new(),
        }
    }

    /// Finite mixture of point masses. Probabilities must be nonnegative, sum to one
    /// within `1e-9`, and every atom must share the same dimension.
    pub fn finite(atoms: Vec<Atom>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::config("distribution.atoms", "at least one atom is required"));
        };
        let n = first.matrix.dim();
        let mut cdf = Vec::with_capacity(atoms.len());
        let mut total = 0.0;
        for (k, atom) in atoms.iter().enumerate() {
            if !(atom.prob >= 0.0 && atom.prob.is_finite()) {
                return Err(Error::config(
                    format!("distribution.atoms[{k}].prob"),
                    format!("probability must be nonnegative, got {}", atom.prob),
                ));
            }
            if atom.matrix.dim() != n {
                return Err(Error::config(
                    format!("distribution.atoms[{k}].matrix"),
                    format!("atom has dimension {}, expected {n}", atom.matrix.dim()),
                ));
            }
            total += atom.prob;
            cdf.push(total);
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::config(
                "distribution.atoms",
                format!("atom probabilities sum to {}", fmt_sum(total)),
            ));
        }
        Ok(MatrixDistribution {
            n,
            kind: DistributionKind::Finite(atoms),
            cdf,
        })
    }

    pub fn generator(generator: Generator, n: usize) -> Result<Self> {
        let params = generator.params(n);
        // Round-trip through the parameter parser so both paths share one validation.
        let (g, n) = Generator::from_params(generator.name(), &params)?;
        Ok(MatrixDistribution {
            n,
            kind: DistributionKind::Generator(g),
            cdf: Vec::new(),
        })
    }

    pub fn generator_by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let (g, n) = Generator::from_params(name, params)?;
        Ok(MatrixDistribution {
            n,
            kind: DistributionKind::Generator(g),
            cdf: Vec::new(),
        })
    }

    pub(crate) fn lifted(law: LiftedLaw) -> Self {
        MatrixDistribution {
            n: 2 * law.first.dim(),
            kind: DistributionKind::Lifted(Box::new(law)),
            cdf: Vec::new(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    /// Index of the finite atom selected by a uniform draw `u` in `[0, 1)`.
    pub fn select_atom(&self, u: f64) -> Option<usize> {
        let DistributionKind::Finite(atoms) = &self.kind else {
            return None;
        };
        let k = self.cdf.partition_point(|&c| c <= u);
        if k < atoms.len() {
            Some(k)
        } else {
            // u beyond the (rounded) total mass: fall back to the last atom carrying mass.
            atoms.iter().rposition(|a| a.prob > 0.0)
        }
    }

    /// One independent draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Cow<'_, StochasticMatrix> {
        match &self.kind {
            DistributionKind::Dirac(m) => Cow::Borrowed(m),
            DistributionKind::Finite(atoms) => {
                let u: f64 = rng.random();
                let k = self.select_atom(u).expect("finite distribution has positive mass");
                Cow::Borrowed(&atoms[k].matrix)
            }
            DistributionKind::Generator(g) => Cow::Owned(g.sample(self.n, rng)),
            DistributionKind::Lifted(law) => {
                let a = law.first.sample(rng);
                let b = law.second.sample(rng);
                Cow::Owned(crate::analysis::lift_matrices(law.alpha, law.beta, &a, &b))
            }
        }
    }

    /// Whether every matrix in the support also has unit column sums.
    ///
    /// For such laws the mean of the state is preserved and the sup-norm of the
    /// disagreement vector cannot grow along a path.
    pub fn doubly_stochastic_support(&self) -> bool {
        match &self.kind {
            DistributionKind::Dirac(m) => is_doubly_stochastic(m),
            DistributionKind::Finite(atoms) => atoms
                .iter()
                .filter(|a| a.prob > 0.0)
                .all(|a| is_doubly_stochastic(&a.matrix)),
            DistributionKind::Generator(g) => !matches!(g, Generator::DirichletRows { .. }),
            DistributionKind::Lifted(_) => false,
        }
    }

    /// The full atom list when the support is finite and small enough to enumerate.
    ///
    /// Covers point masses, finite mixtures, pairwise gossip, and liftings of those.
    pub fn finite_support(&self) -> Option<Vec<Atom>> {
        match &self.kind {
            DistributionKind::Dirac(m) => Some(vec![Atom {
                prob: 1.0,
                matrix: m.clone(),
            }]),
            DistributionKind::Finite(atoms) => Some(atoms.clone()),
            DistributionKind::Generator(g) => g.finite_support(self.n),
            DistributionKind::Lifted(law) => {
                let a = law.first.finite_support()?;
                let b = law.second.finite_support()?;
                let mut out = Vec::with_capacity(a.len() * b.len());
                for x in &a {
                    for y in &b {
                        out.push(Atom {
                            prob: x.prob * y.prob,
                            matrix: crate::analysis::lift_matrices(law.alpha, law.beta, &x.matrix, &y.matrix),
                        });
                    }
                }
                Some(out)
            }
        }
    }
}

fn is_doubly_stochastic(m: &StochasticMatrix) -> bool {
    let n = m.dim();
    (0..n).all(|j| {
        let col: f64 = (0..n).map(|i| m[(i, j)]).sum();
        (col - 1.0).abs() <= crate::matrix::ROW_SUM_TOL
    })
}

fn fmt_sum(total: f64) -> String {
    // Twelve significant digits hide binary noise such as 1.0999999999999999.
    let s = format!("{:.12}", total);
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}
