//! Experiment configuration (TOML or JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channels::{DbOverrides, SamplerSpec};
use crate::error::{Error, Result};
use crate::linalg::{herm_eig, ComplexMatrix};
use crate::models::{self, PauliTerm};
use crate::protocols::{InitialState, ProtocolConfig, ProtocolKind};

/// Schema version understood by this build.
pub const SPEC_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Tfim,
    Heisenberg,
    #[serde(rename = "random_2local")]
    Random2Local,
    PauliSum,
    Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default)]
    pub n_qubits: Option<usize>,
    /// Transverse field of the Ising chain.
    #[serde(default)]
    pub g: Option<f64>,
    /// Coefficient seed of `random_2local`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub terms: Vec<PauliTerm>,
    /// JSON matrix file, relative to the config file.
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Rescale so that `|H| = 1`.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    #[serde(default)]
    pub pauli: Option<String>,
    #[serde(default)]
    pub terms: Vec<PauliTerm>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Reset,
    PauliMixture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default)]
    pub kind: SamplerKind,
    #[serde(default = "one")]
    pub gamma: f64,
    /// Jump Pauli strings of the mixture; every single-site Pauli when absent.
    #[serde(default)]
    pub jumps: Option<Vec<String>>,
    #[serde(default)]
    pub u: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { kind: SamplerKind::Reset, gamma: 1.0, jumps: None, u: None, c: None, tau: None }
    }
}

/// Optional protocol knobs beyond eps, eta and seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsConfig {
    pub burn_in: Option<u64>,
    pub t: Option<usize>,
    pub k0: Option<u64>,
    pub povm_u: Option<f64>,
    pub povm_tau: Option<f64>,
    pub initial: Option<InitialState>,
    pub bias_track_steps: Option<usize>,
    pub max_steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File stem; defaults to the config file stem.
    #[serde(default)]
    pub name: Option<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), name: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec_version: String,
    pub model: ModelConfig,
    pub beta: f64,
    pub observable: ObservableConfig,
    #[serde(default)]
    pub channel: DbOverrides,
    #[serde(default)]
    pub sampler: SamplerConfig,
    pub protocol: ProtocolKind,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_eps")]
    pub eta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: OptionsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative file paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    pub source_stem: Option<String>,
}

fn default_eps() -> f64 {
    0.1
}

/// Fully resolved experiment inputs.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub h: ComplexMatrix,
    pub a: ComplexMatrix,
    pub n_qubits: usize,
    pub sampler: SamplerSpec,
    pub protocol: ProtocolConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `.json` files as JSON and everything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = if is_json { Self::from_json_str(&text) } else { Self::from_toml_str(&text) }
            .map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                other => other,
            })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.source_stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec_version != SPEC_VERSION {
            return Err(Error::Config(format!("unsupported spec_version '{}' (expected '{SPEC_VERSION}')", self.spec_version)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta = {} must be finite and nonnegative", self.beta)));
        }
        for (name, v) in [("eps", self.eps), ("eta", self.eta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if !(self.sampler.gamma > 0.0 && self.sampler.gamma <= 1.0) {
            return Err(Error::Config(format!("sampler.gamma = {} must lie in (0, 1]", self.sampler.gamma)));
        }
        let m = &self.model;
        match m.kind {
            ModelKind::Tfim | ModelKind::Heisenberg | ModelKind::Random2Local => {
                let n = m.n_qubits.ok_or_else(|| Error::Config("model.n_qubits is required".into()))?;
                if n == 0 || n > models::MAX_QUBITS {
                    return Err(Error::Config(format!("model.n_qubits = {n} must lie in 1..={}", models::MAX_QUBITS)));
                }
            }
            ModelKind::PauliSum if m.terms.is_empty() => return Err(Error::Config("model.terms must be nonempty".into())),
            ModelKind::Matrix if m.file.is_none() => return Err(Error::Config("model.file is required".into())),
            _ => {}
        }
        let o = &self.observable;
        let sources = o.pauli.is_some() as usize + !o.terms.is_empty() as usize + o.file.is_some() as usize;
        if sources != 1 {
            return Err(Error::Config("observable needs exactly one of pauli, terms, file".into()));
        }
        Ok(())
    }

    fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn hamiltonian(&self) -> Result<ComplexMatrix> {
        let m = &self.model;
        let h = match m.kind {
            ModelKind::Tfim => models::tfim(m.n_qubits.unwrap_or(0), m.g.unwrap_or(1.0))?,
            ModelKind::Heisenberg => models::heisenberg(m.n_qubits.unwrap_or(0))?,
            ModelKind::Random2Local => models::random_2local(m.n_qubits.unwrap_or(0), m.seed.unwrap_or(0))?,
            ModelKind::PauliSum => models::pauli_sum(&m.terms)?,
            ModelKind::Matrix => models::load_matrix(&self.resolve_path(m.file.as_deref().expect("validated")))?,
        };
        if !h.is_hermitian(1e-12) {
            return Err(Error::Config("Hamiltonian is not Hermitian".into()));
        }
        if m.normalize {
            let norm = herm_eig(&h)?.values.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
            if norm > 0.0 {
                return Ok(h.scale_real(1.0 / norm));
            }
        }
        Ok(h)
    }

    pub fn observable_matrix(&self) -> Result<ComplexMatrix> {
        let o = &self.observable;
        if let Some(p) = &o.pauli {
            models::parse_pauli(p)
        } else if !o.terms.is_empty() {
            models::pauli_sum(&o.terms)
        } else {
            models::load_matrix(&self.resolve_path(o.file.as_deref().expect("validated")))
        }
    }

    pub fn output_stem(&self) -> String {
        self.output.name.clone().or_else(|| self.source_stem.clone()).unwrap_or_else(|| "run".into())
    }

    pub fn resolve(&self) -> Result<Experiment> {
        let h = self.hamiltonian()?;
        let a = self.observable_matrix()?;
        if a.rows() != h.rows() {
            return Err(Error::Config(format!("observable dimension {} differs from Hamiltonian dimension {}", a.rows(), h.rows())));
        }
        let d = h.rows();
        if !d.is_power_of_two() {
            return Err(Error::Config(format!("dimension {d} is not a power of two")));
        }
        let n_qubits = d.trailing_zeros() as usize;
        let sampler = match self.sampler.kind {
            SamplerKind::Reset => SamplerSpec::Reset { gamma: self.sampler.gamma },
            SamplerKind::PauliMixture => {
                let jump_ops = match &self.sampler.jumps {
                    Some(list) => list.iter().map(|s| models::parse_pauli(s)).collect::<Result<Vec<_>>>()?,
                    None => models::single_site_paulis(n_qubits)?,
                };
                if jump_ops.iter().any(|j| j.rows() != d) {
                    return Err(Error::Config("jump operators must match the system dimension".into()));
                }
                let params = DbOverrides { u: self.sampler.u, c: self.sampler.c, tau: self.sampler.tau };
                SamplerSpec::PauliDbMixture { jump_ops, params }
            }
        };
        let o = &self.options;
        let defaults = ProtocolConfig::default();
        let protocol = ProtocolConfig {
            eps: self.eps,
            eta: self.eta,
            burn_in: o.burn_in,
            t: o.t,
            k0: o.k0,
            db: self.channel,
            povm_u: o.povm_u,
            povm_tau: o.povm_tau,
            initial: o.initial.unwrap_or_default(),
            seed: self.seed,
            bias_track_steps: o.bias_track_steps.unwrap_or(defaults.bias_track_steps),
            max_steps: o.max_steps.unwrap_or(defaults.max_steps),
        };
        Ok(Experiment { h, a, n_qubits, sampler, protocol })
    }
}
