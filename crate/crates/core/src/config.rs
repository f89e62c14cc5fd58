//! Experiment configuration, stored as TOML with a versioned schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dolbeault::SpectralSettings;
use crate::error::{Error, Result};
use crate::gauge::LinkField;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the configured thread budget.
pub const THREADS_ENV: &str = "NAHM_THREADS";

/// One summand of a direct-sum input: a rank-one constant-flux field twisted by `twist`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxPart {
    pub k: i64,
    #[serde(default)]
    pub twist: [f64; 4],
}

/// Where the input field comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    Trivial { rank: usize },
    ConstantFlux { k: i64 },
    Flux { k12: i64, k34: i64 },
    DirectSum { parts: Vec<FluxPart> },
    File { path: PathBuf },
}

impl InputSpec {
    /// Builds the field on an `n^4` lattice (file inputs carry their own size).
    pub fn build(&self, n: usize) -> Result<LinkField> {
        match self {
            InputSpec::Trivial { rank } => LinkField::trivial(n, *rank),
            InputSpec::ConstantFlux { k } => LinkField::constant_flux(n, *k),
            InputSpec::Flux { k12, k34 } => LinkField::flux(n, *k12, *k34),
            InputSpec::DirectSum { parts } => {
                let fields = parts
                    .iter()
                    .map(|p| LinkField::constant_flux(n, p.k).map(|f| f.poincare_twist(p.twist)))
                    .collect::<Result<Vec<_>>>()?;
                LinkField::direct_sum(&fields)
            }
            InputSpec::File { path } => {
                let f = LinkField::load(path)?;
                if f.side() != n {
                    return Err(Error::Config(format!("{} holds an N={} field but lattice = {n}", path.display(), f.side())));
                }
                Ok(f)
            }
        }
    }

    /// Whether the input is a sum of at least two nonzero summands.
    pub fn is_direct_sum(&self) -> bool {
        matches!(self, InputSpec::DirectSum { parts } if parts.len() > 1)
    }
}

/// Pass/fail thresholds of the theorem checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Upper bound on the relative self-dual part of the dual curvature.
    pub asd_residual: f64,
    /// Largest distance of a Chern-Weil integral from its integer.
    pub rounding: f64,
    /// Largest Wilson-trace deviation in the double transform.
    pub wilson: f64,
    /// Relative singular-value threshold of the irreducibility test.
    pub irreducibility: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { asd_residual: 0.1, rounding: 0.2, wilson: 0.15, irreducibility: 1e-8 }
    }
}

/// Which stages run after the transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    pub asd: bool,
    pub invariants: bool,
    pub invert: bool,
    pub irreducibility: bool,
    pub irreducibility_samples: usize,
    /// Flat twist for the twist-memory test of the double transform.
    pub twist_memory: Option<[f64; 4]>,
}

impl Default for Checks {
    fn default() -> Self {
        Self { asd: true, invariants: true, invert: false, irreducibility: false, irreducibility_samples: 16, twist_memory: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub input: InputSpec,
    /// Lattice sites `N` per direction of the input torus.
    pub lattice: usize,
    /// Dual grid points `M` per direction.
    pub grid: usize,
    /// Seed of a random gauge transformation applied to the input, if any.
    #[serde(default)]
    pub gauge_seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub spectral: SpectralSettings,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub checks: Checks,
}

impl RunConfig {
    /// A valid configuration for `input` with default settings.
    pub fn new(input: InputSpec, lattice: usize, grid: usize) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            input,
            lattice,
            grid,
            gauge_seed: None,
            threads: None,
            output: None,
            spectral: SpectralSettings::default(),
            tolerances: Tolerances::default(),
            checks: Checks::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema {} is not supported (expected {SCHEMA_VERSION})", self.schema)));
        }
        if self.lattice < 2 || self.grid < 2 {
            return Err(Error::Config(format!("lattice and grid must be at least 2, got N={} M={}", self.lattice, self.grid)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let t = &self.tolerances;
        for (name, v) in
            [("asd_residual", t.asd_residual), ("rounding", t.rounding), ("wilson", t.wilson), ("irreducibility", t.irreducibility)]
        {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("tolerances.{name} must be positive, got {v}")));
            }
        }
        if t.rounding >= 0.5 {
            return Err(Error::Config(format!("tolerances.rounding must be below 0.5, got {}", t.rounding)));
        }
        if t.irreducibility >= 1.0 {
            return Err(Error::Config(format!("tolerances.irreducibility must be below 1, got {}", t.irreducibility)));
        }
        if self.checks.irreducibility_samples == 0 {
            return Err(Error::Config("checks.irreducibility_samples must be at least 1".into()));
        }
        match &self.input {
            InputSpec::Trivial { rank } if *rank == 0 => return Err(Error::Config("input rank must be at least 1".into())),
            InputSpec::DirectSum { parts } if parts.is_empty() => {
                return Err(Error::Config("direct_sum input needs at least one part".into()))
            }
            _ => {}
        }
        self.spectral.validate()
    }

    /// The input field on the configured lattice, gauge transformed if `gauge_seed` is set.
    pub fn build_field(&self) -> Result<LinkField> {
        let f = self.input.build(self.lattice)?;
        Ok(match self.gauge_seed {
            Some(seed) => f.random_gauge_transform(seed),
            None => f,
        })
    }

    /// Thread budget after the environment override: `NAHM_THREADS` beats the file.
    pub fn thread_budget(&self) -> Result<Option<usize>> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => {
                let n: usize = v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
                if n == 0 {
                    return Err(Error::Config(format!("{THREADS_ENV} must be at least 1")));
                }
                Ok(Some(n))
            }
            Err(_) => Ok(self.threads),
        }
    }
}
