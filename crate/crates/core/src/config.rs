//! JSON config documents: a matrix distribution plus optional simulation defaults.
//!
//! ```json
//! {
//!   "n": 3,
//!   "distribution": { "type": "generator", "name": "pairwise_gossip", "params": { "n": 3 } },
//!   "simulation": { "paths": 200, "horizon": 300, "eps": 0.001, "seed": 7, "x0": "uniform01" }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::{Atom, DistributionKind, MatrixDistribution};
use crate::dynamics::InitialState;
use crate::error::{Error, Result};
use crate::matrix::{Matrix, StochasticMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub n: usize,
    pub distribution: DistributionDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationDefaults>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DistributionDocument {
    Dirac {
        matrix: Vec<Vec<f64>>,
    },
    Finite {
        atoms: Vec<AtomDocument>,
    },
    Generator {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDocument {
    pub prob: f64,
    pub matrix: Vec<Vec<f64>>,
}

/// Defaults for simulation commands; command-line flags override each field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<InitialState>,
}

/// A validated config.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub distribution: MatrixDistribution,
    pub simulation: SimulationDefaults,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Config> {
    let doc: ConfigDocument = serde_json::from_str(text)
        .map_err(|e| Error::config(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
    doc.validate()
}

fn matrix_at(rows: &[Vec<f64>], n: usize, field: &str) -> Result<StochasticMatrix> {
    if rows.len() != n {
        return Err(Error::config(
            field,
            format!("matrix has {} rows, expected n = {n}", rows.len()),
        ));
    }
    crate::matrix::validate_matrix(rows).map_err(|e| Error::config(field, e.to_string()))
}

impl ConfigDocument {
    pub fn validate(&self) -> Result<Config> {
        let n = self.n;
        if n == 0 {
            return Err(Error::config("n", "n must be at least 1"));
        }
        let distribution = match &self.distribution {
            DistributionDocument::Dirac { matrix } => {
                MatrixDistribution::dirac(matrix_at(matrix, n, "distribution.matrix")?)
            }
            DistributionDocument::Finite { atoms } => {
                let mut parsed = Vec::with_capacity(atoms.len());
                for (k, a) in atoms.iter().enumerate() {
                    parsed.push(Atom {
                        prob: a.prob,
                        matrix: matrix_at(&a.matrix, n, &format!("distribution.atoms[{k}].matrix"))?,
                    });
                }
                MatrixDistribution::finite(parsed)?
            }
            DistributionDocument::Generator { name, params } => {
                let mut params = params.clone();
                match params.get("n") {
                    None => {
                        params.insert("n".to_string(), n as f64);
                    }
                    Some(&pn) if pn != n as f64 => {
                        return Err(Error::config(
                            "distribution.params.n",
                            format!("generator dimension {pn} does not match n = {n}"),
                        ));
                    }
                    Some(_) => {}
                }
                MatrixDistribution::generator_by_name(name, &params).map_err(|e| match e {
                    Error::Config { location, message } => Error::config(format!("distribution.{location}"), message),
                    other => other,
                })?
            }
        };
        let simulation = self.simulation.clone().unwrap_or_default();
        validate_simulation(&simulation, n)?;
        Ok(Config {
            distribution,
            simulation,
        })
    }
}

fn validate_simulation(sim: &SimulationDefaults, n: usize) -> Result<()> {
    if sim.paths == Some(0) {
        return Err(Error::config("simulation.paths", "paths must be at least 1"));
    }
    if sim.horizon == Some(0) {
        return Err(Error::config("simulation.horizon", "horizon must be at least 1"));
    }
    if let Some(eps) = sim.eps {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::config(
                "simulation.eps",
                format!("eps must be positive, got {eps}"),
            ));
        }
    }
    if let Some(InitialState::Explicit(x)) = &sim.x0 {
        if x.len() != n {
            return Err(Error::config(
                "simulation.x0",
                format!("x0 has {} entries, expected n = {n}", x.len()),
            ));
        }
    }
    Ok(())
}

impl DistributionDocument {
    /// Serializable form of a distribution. Jointly sampled liftings have no document form.
    pub fn from_distribution(dist: &MatrixDistribution) -> Result<Self> {
        Ok(match dist.kind() {
            DistributionKind::Dirac(m) => DistributionDocument::Dirac {
                matrix: m.matrix().to_rows(),
            },
            DistributionKind::Finite(atoms) => DistributionDocument::Finite {
                atoms: atoms
                    .iter()
                    .map(|a| AtomDocument {
                        prob: a.prob,
                        matrix: a.matrix.matrix().to_rows(),
                    })
                    .collect(),
            },
            DistributionKind::Generator(g) => DistributionDocument::Generator {
                name: g.name().to_string(),
                params: g.params(dist.dim()),
            },
            DistributionKind::Lifted(_) => {
                return Err(Error::config(
                    "distribution",
                    "jointly sampled lifted distributions cannot be written as a config document",
                ))
            }
        })
    }
}

impl Config {
    pub fn to_document(&self) -> Result<ConfigDocument> {
        Ok(ConfigDocument {
            n: self.distribution.dim(),
            distribution: DistributionDocument::from_distribution(&self.distribution)?,
            simulation: if self.simulation == SimulationDefaults::default() {
                None
            } else {
                Some(self.simulation.clone())
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = self.to_document()?;
        Ok(serde_json::to_string_pretty(&doc).expect("config documents always serialize"))
    }
}

/// Parses a bare nested-array matrix such as `[[0.5,0.5],[0.5,0.5]]`.
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    serde_json::from_str::<Matrix>(text)
        .map_err(|e| Error::config(format!("line {}, column {}", e.line(), e.column()), e.to_string()))
}
