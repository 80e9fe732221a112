//! Configuration documents, one per subcommand. Every document carries
//! `schema_version` and rejects unknown fields.

use std::path::{Path, PathBuf};

use multilasso_core::experiment::{DesignGenerator, LassoExperimentSpec};
use multilasso_core::hidden::{HiddenDataset, HiddenModelSpec};
use multilasso_core::model::ModelDocument;
use multilasso_core::rademacher::{
    ConcentrationSpec, ConvexMap, IndexSet, SignMode, TestFamily, UnivariateMap,
};
use multilasso_core::solver::SolverOptions;
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

/// A model document given inline or as a path relative to the config file.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Path(PathBuf),
    Inline(Box<ModelDocument>),
}

impl ModelRef {
    pub fn resolve(&self, base: &Path) -> Result<ModelDocument, crate::CliError> {
        match self {
            ModelRef::Inline(doc) => Ok((**doc).clone()),
            ModelRef::Path(p) => {
                let path = if p.is_absolute() {
                    p.clone()
                } else {
                    base.join(p)
                };
                let bytes = std::fs::read(&path)
                    .map_err(|e| crate::CliError::Io(format!("reading {}: {e}", path.display())))?;
                serde_json::from_slice(&bytes).map_err(|e| {
                    crate::CliError::Schema(format!("model document {}: {e}", path.display()))
                })
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningInput {
    #[serde(rename = "K")]
    pub k_cone: f64,
    #[serde(rename = "M_q")]
    pub m_q: f64,
    pub kappa: f64,
    #[serde(rename = "C_gamma")]
    pub c_gamma: f64,
    /// Sparsity of the error bound; defaults to the model's θ.
    #[serde(rename = "S", default)]
    pub s: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub model: ModelRef,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub tuning: Option<TuningInput>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub restarts: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoTuningInput {
    #[serde(rename = "K")]
    pub k_cone: f64,
    #[serde(rename = "M_q")]
    pub m_q: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub kappa: f64,
    #[serde(rename = "C_gamma")]
    pub c_gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBoundInput {
    pub k: usize,
    #[serde(rename = "K")]
    pub k_cone: f64,
    /// Taken from `tuning` when omitted.
    #[serde(rename = "L_N", default)]
    pub l_n: Option<f64>,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub kappa: f64,
    pub sigma_xs: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipInput {
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "F2")]
    pub f2: f64,
    #[serde(rename = "M_Z")]
    pub m_z: f64,
    #[serde(rename = "R_D")]
    pub r_d: f64,
    pub k: usize,
    #[serde(default)]
    pub global: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenConstantsInput {
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "F2")]
    pub f2: f64,
    #[serde(rename = "A_g")]
    pub a_g: f64,
    #[serde(rename = "B_g")]
    pub b_g: f64,
    #[serde(rename = "M_X")]
    pub m_x: f64,
    #[serde(rename = "R_D")]
    pub r_d: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenTuningInput {
    #[serde(rename = "K")]
    pub k_cone: f64,
    #[serde(rename = "M_q")]
    pub m_q: f64,
    #[serde(rename = "S", default)]
    pub s: Option<usize>,
    #[serde(rename = "C_ell", default)]
    pub c_ell: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanMaxInput {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub beta: Vec<usize>,
    #[serde(default)]
    pub tuning: Option<LassoTuningInput>,
    #[serde(default)]
    pub error_bound: Option<ErrorBoundInput>,
    #[serde(default)]
    pub lip: Option<LipInput>,
    #[serde(default)]
    pub hidden: Option<HiddenConstantsInput>,
    #[serde(default)]
    pub hidden_tuning: Option<HiddenTuningInput>,
    #[serde(default)]
    pub mean_max: Option<MeanMaxInput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedDesign {
    pub generator: DesignGenerator,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReDiagConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: Option<ModelRef>,
    #[serde(default)]
    pub generate: Option<GeneratedDesign>,
    pub s: usize,
    #[serde(rename = "K")]
    pub k_cone: f64,
    pub budget: usize,
    /// Sparse spectral norms `σ_{X,l}` to report.
    #[serde(default)]
    pub sigma_l: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComparisonCheck {
    MultivariateContraction {
        family: TestFamily,
        index_set: IndexSet,
        convex_map: ConvexMap,
    },
    L1Comparison {
        family: TestFamily,
        index_set: IndexSet,
    },
    UnivariateContraction {
        gammas: Vec<Vec<f64>>,
        maps: Vec<UnivariateMap>,
    },
    Massart {
        vectors: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub replicates: usize,
    #[serde(default)]
    pub mode: SignMode,
    pub check: ComparisonCheck,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailCheck {
    LocalTail,
    LocalLip,
    GlobalLip,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub model: ModelRef,
    pub check: TailCheck,
    pub grid_points: usize,
    /// Seed of the grid; defaults to the run seed.
    #[serde(default)]
    pub grid_seed: Option<u64>,
    pub q: f64,
    #[serde(default)]
    pub q_prime: Option<f64>,
    pub replicates: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub process: ConcentrationSpec,
    pub s_grid: Vec<f64>,
    pub replicates: usize,
    pub pilot: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenSampleConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub spec: HiddenModelSpec,
    #[serde(rename = "N")]
    pub n_obs: usize,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum HiddenMq {
    Fixed {
        value: f64,
    },
    /// Tail bound at `(q/2, q/2)`.
    Theoretical {
        q: f64,
        grid_points: usize,
        pilot: usize,
    },
    /// `(1 − q)`-quantile of grid suprema.
    Empirical {
        q: f64,
        grid_points: usize,
        pilot: usize,
        outer: usize,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum CEllInput {
    Fixed {
        value: f64,
    },
    Estimate {
        replicates: usize,
        grid_points: usize,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenFitConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub spec: HiddenModelSpec,
    #[serde(rename = "N")]
    pub n_obs: usize,
    /// Observed data; sampled from the spec when absent.
    #[serde(default)]
    pub data: Option<HiddenDataset>,
    #[serde(rename = "K")]
    pub k_cone: f64,
    pub m_q: HiddenMq,
    pub c_ell: CEllInput,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenVerifyConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub spec: HiddenModelSpec,
    #[serde(rename = "N")]
    pub n_obs: usize,
    pub grid_points: usize,
    pub q0: f64,
    pub q1: f64,
    pub pilot: usize,
    pub outer: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E2eConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub experiment: LassoExperimentSpec,
}

/// Parses a config and checks its schema version.
pub fn parse<T: for<'de> Deserialize<'de> + Versioned>(bytes: &[u8]) -> Result<T, crate::CliError> {
    let cfg: T =
        serde_json::from_slice(bytes).map_err(|e| crate::CliError::Schema(e.to_string()))?;
    if cfg.schema_version() != SCHEMA_VERSION {
        return Err(crate::CliError::Schema(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version()
        )));
    }
    Ok(cfg)
}

pub trait Versioned {
    fn schema_version(&self) -> u32;
    fn seed(&self) -> Option<u64>;
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
            fn seed(&self) -> Option<u64> {
                self.seed
            }
        }
    )*};
}

versioned!(
    SolveConfig,
    ConstantsConfig,
    ReDiagConfig,
    ComparisonConfig,
    TailConfig,
    ConcentrationConfig,
    HiddenSampleConfig,
    HiddenFitConfig,
    HiddenVerifyConfig,
    E2eConfig
);
