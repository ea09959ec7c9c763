//! Experiment description: a JSON document with every run parameter, plus
//! dotted-path overrides applied before parsing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{Horizon, RunControl};
use crate::error::{Error, Result};
use crate::graphnet::WeightRule;
use crate::problems::{Family, Params};
use crate::subsolvers::{InnerSolverConfig, StepSchedule, SurrogateChoice, TauXConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    D4l,
    Atc,
    ProxPdaIp,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::D4l => "d4l",
            AlgorithmKind::Atc => "atc",
            AlgorithmKind::ProxPdaIp => "prox-pda-ip",
        }
    }
}

impl std::str::FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d4l" => Ok(AlgorithmKind::D4l),
            "atc" => Ok(AlgorithmKind::Atc),
            "prox-pda-ip" => Ok(AlgorithmKind::ProxPdaIp),
            _ => Err(Error::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Where the data matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSpec {
    /// Sparse combinations of random unit-norm atoms plus Gaussian noise.
    Synthetic {
        dim: usize,
        atoms_true: usize,
        columns: usize,
        sparsity: f64,
        noise_sigma: f64,
    },
    /// A matrix file in the text format of [`crate::problems::read_matrix`].
    Matrix { path: PathBuf },
    /// Patches of a noisy copy of a PGM image.
    Image {
        path: PathBuf,
        patch: usize,
        noise_sigma: f64,
        #[serde(default)]
        remove_mean: bool,
    },
    /// Patches of a noisy piecewise-constant test image.
    SyntheticImage {
        height: usize,
        width: usize,
        patch: usize,
        noise_sigma: f64,
        #[serde(default)]
        remove_mean: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub family: Family,
    pub agents: usize,
    pub atoms: usize,
    pub params: Params,
    pub data: DataSpec,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphSpec {
    /// Clustered random graph, redrawn until strongly connected. With
    /// `slots > 1` its arcs are split by source node into that many slots.
    Clustered {
        clusters: usize,
        p_intra: f64,
        p_inter: f64,
        #[serde(default)]
        undirected: bool,
        #[serde(default = "one")]
        slots: usize,
    },
    Complete,
    Ring,
    File { path: PathBuf },
}

fn default_tau_d() -> f64 {
    10.0
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmKind,
    /// Column prefix in merged comparisons; defaults to the algorithm name.
    #[serde(default)]
    pub label: Option<String>,
    pub problem: ProblemSpec,
    pub graph: GraphSpec,
    #[serde(default)]
    pub weights: WeightRule,
    #[serde(default)]
    pub surrogates: SurrogateChoice,
    #[serde(default = "default_tau_d")]
    pub tau_d: f64,
    #[serde(default)]
    pub tau_x: TauXConfig,
    #[serde(default)]
    pub step: StepSchedule,
    #[serde(default)]
    pub inner: InnerSolverConfig,
    #[serde(default)]
    pub control: RunControl,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.algorithm.name().to_string())
    }

    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads `path`; relative data and graph paths are resolved against the
    /// directory holding the file.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.problem.data {
            DataSpec::Matrix { path } | DataSpec::Image { path, .. } => fix(path),
            _ => {}
        }
        if let GraphSpec::File { path } = &mut self.graph {
            fix(path);
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn set_horizon(&mut self, horizon: Horizon) {
        self.control.horizon = horizon;
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `a.b.c=value`: sets a nested field, parsing `value` as JSON and falling
/// back to a plain string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let parsed: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (k, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {path:?}: {key:?} is not inside an object")))?;
        if k + 1 == keys.len() {
            obj.insert(key.to_string(), parsed);
            return Ok(());
        }
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::Config(format!("empty override path in {spec:?}")))
}

/// Seeds for the independent random streams of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    pub data: u64,
    pub noise: u64,
    pub graph: u64,
    pub init: u64,
}

impl SeedPlan {
    pub fn from_seed(seed: u64) -> Self {
        const STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
        Self {
            data: seed,
            noise: seed.wrapping_add(STRIDE),
            graph: seed.wrapping_add(STRIDE.wrapping_mul(2)),
            init: seed.wrapping_add(STRIDE.wrapping_mul(3)),
        }
    }
}
