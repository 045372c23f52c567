//! Experiment configuration: JSON schema, loading, and model assembly.
//!
//! A config names a network matrix (inline, from a file, or from a seeded
//! random generator), agent rosters, initial opinions, and run parameters.
//! Paths are resolved relative to the config file, and referenced files must
//! exist at load time.

use std::fs;
use std::path::{Path, PathBuf};

use hman_core::graph::{erdos_renyi_network, NetworkMatrix};
use hman_core::model::{AgentRoster, AgentType, OpinionVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Roster used by single-model commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roster: Option<RosterSpec>,
    /// Rosters compared by the spectrum command; defaults to `roster` alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rosters: Option<Vec<RosterSpec>>,
    pub x0: X0Spec,
    pub horizon: usize,
    pub trials: usize,
    /// Consensus threshold on the opinion spread.
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

/// Exactly one source for the network matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
}

/// Exactly one roster encoding: a per-agent type list, or block counts that
/// expand to contiguous runs of averagers, then copiers, then voters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<Vec<AgentTypeSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<BlockCounts>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentTypeSpec {
    Averager,
    Copier,
    Voter,
}

impl From<AgentTypeSpec> for AgentType {
    fn from(t: AgentTypeSpec) -> Self {
        match t {
            AgentTypeSpec::Averager => AgentType::Averager,
            AgentTypeSpec::Copier => AgentType::Copier,
            AgentTypeSpec::Voter => AgentType::Voter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockCounts {
    #[serde(default)]
    pub averagers: usize,
    #[serde(default)]
    pub copiers: usize,
    #[serde(default)]
    pub voters: usize,
}

/// Exactly one initial-opinion encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct X0Spec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

fn default_resample_limit() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n_list: Vec<usize>,
    pub p: f64,
    pub m_v: usize,
    pub seeds: Vec<u64>,
    /// Attempts per instance before giving up on finding an ergodic graph.
    #[serde(default = "default_resample_limit")]
    pub resample_limit: usize,
}

impl ExperimentConfig {
    /// Parses a config file, checks structural invariants, resolves the
    /// matrix path relative to the config, and requires referenced files to
    /// exist.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.check_shape()?;
        if let Some(file) = &cfg.model.matrix_file {
            let resolved = if file.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(file)
            } else {
                file.clone()
            };
            if !resolved.exists() {
                return Err(CliError::io(
                    format!("matrix file {}", resolved.display()),
                    std::io::Error::from(std::io::ErrorKind::NotFound),
                ));
            }
            cfg.model.matrix_file = Some(resolved);
        }
        Ok(cfg)
    }

    fn check_shape(&self) -> Result<(), CliError> {
        let sources = [
            self.model.matrix_file.is_some(),
            self.model.matrix.is_some(),
            self.model.generator.is_some(),
        ];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(CliError::Validation(
                "model must set exactly one of matrix_file, matrix, generator".into(),
            ));
        }
        if let Some(spec) = &self.roster {
            spec.check_shape()?;
        }
        for spec in self.rosters.iter().flatten() {
            spec.check_shape()?;
        }
        match (self.x0.values.is_some(), self.x0.constant.is_some()) {
            (true, false) | (false, true) => {}
            _ => {
                return Err(CliError::Validation(
                    "x0 must set exactly one of values, constant".into(),
                ))
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::Validation(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if let Some(g) = &self.model.generator {
            check_edge_probability(g.p)?;
        }
        if let Some(sweep) = &self.sweep {
            sweep.check_shape()?;
        }
        Ok(())
    }

    pub fn build_matrix(&self) -> Result<NetworkMatrix<f64>, CliError> {
        if let Some(file) = &self.model.matrix_file {
            return Ok(NetworkMatrix::read_matrix_file(file)?);
        }
        if let Some(rows) = &self.model.matrix {
            return Ok(NetworkMatrix::validate(rows)?);
        }
        let g = self.model.generator.as_ref().expect("checked at load");
        Ok(erdos_renyi_network(g.n, g.p, g.seed)?)
    }

    /// The roster for single-model commands.
    pub fn primary_roster(&self, n: usize) -> Result<AgentRoster, CliError> {
        let spec = self
            .roster
            .as_ref()
            .ok_or_else(|| CliError::Validation("config needs a roster".into()))?;
        spec.build(n)
    }

    /// The roster list for comparative commands; falls back to the primary
    /// roster.
    pub fn roster_list(&self, n: usize) -> Result<Vec<AgentRoster>, CliError> {
        if let Some(specs) = &self.rosters {
            if specs.is_empty() {
                return Err(CliError::Validation("rosters must not be empty".into()));
            }
            return specs.iter().map(|s| s.build(n)).collect();
        }
        Ok(vec![self.primary_roster(n)?])
    }

    pub fn initial_opinions(&self, n: usize) -> Result<OpinionVector<f64>, CliError> {
        if let Some(values) = &self.x0.values {
            if values.len() != n {
                return Err(CliError::Validation(format!(
                    "x0 has {} entries for {n} agents",
                    values.len()
                )));
            }
            return Ok(OpinionVector::new(values.clone())?);
        }
        let c = self.x0.constant.expect("checked at load");
        Ok(OpinionVector::constant(n, c)?)
    }
}

impl RosterSpec {
    fn check_shape(&self) -> Result<(), CliError> {
        match (self.types.is_some(), self.blocks.is_some()) {
            (true, false) | (false, true) => Ok(()),
            _ => Err(CliError::Validation(
                "roster must set exactly one of types, blocks".into(),
            )),
        }
    }

    pub fn build(&self, n: usize) -> Result<AgentRoster, CliError> {
        if let Some(types) = &self.types {
            if types.len() != n {
                return Err(CliError::Validation(format!(
                    "roster lists {} agents for an n={n} matrix",
                    types.len()
                )));
            }
            return Ok(AgentRoster::new(
                types.iter().map(|&t| t.into()).collect(),
            ));
        }
        let b = self.blocks.expect("checked at load");
        let total = b.averagers + b.copiers + b.voters;
        if total != n {
            return Err(CliError::Validation(format!(
                "roster blocks sum to {total} for an n={n} matrix"
            )));
        }
        Ok(AgentRoster::from_blocks(b.averagers, b.copiers, b.voters))
    }
}

impl SweepSpec {
    fn check_shape(&self) -> Result<(), CliError> {
        if self.n_list.is_empty() {
            return Err(CliError::Validation("sweep n_list must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Validation("sweep seeds must not be empty".into()));
        }
        check_edge_probability(self.p)?;
        if self.m_v == 0 {
            return Err(CliError::Validation("sweep m_v must be at least 1".into()));
        }
        if self.resample_limit == 0 {
            return Err(CliError::Validation(
                "sweep resample_limit must be at least 1".into(),
            ));
        }
        for &n in &self.n_list {
            if self.m_v > n {
                return Err(CliError::Validation(format!(
                    "sweep m_v={} exceeds n={n}",
                    self.m_v
                )));
            }
            if n * n <= 2 * self.m_v {
                return Err(CliError::Validation(format!(
                    "sweep needs n^2 > 2*m_v, got n={n}, m_v={}",
                    self.m_v
                )));
            }
        }
        Ok(())
    }
}

fn check_edge_probability(p: f64) -> Result<(), CliError> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "edge probability must lie in (0, 1], got {p}"
        )))
    }
}
