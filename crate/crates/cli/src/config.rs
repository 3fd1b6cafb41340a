//! JSON run configuration.

use crate::error::CliError;
use clap::ValueEnum;
use cmatorus_core::solver::SolverConfig;
use cmatorus_core::{DiffScheme, GridSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Solve,
    Sweep,
    Gauduchon,
    VerifyIdentities,
    PrescribeRicci,
    Report,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Sweep => "sweep",
            Task::Gauduchon => "gauduchon",
            Task::VerifyIdentities => "verify-identities",
            Task::PrescribeRicci => "prescribe-ricci",
            Task::Report => "report",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub complex_dim: usize,
    pub points_per_axis: usize,
    #[serde(default = "fourier")]
    pub diff_scheme: DiffScheme,
}

fn fourier() -> DiffScheme {
    DiffScheme::FourierCollocation
}

impl From<GridConfig> for GridSpec {
    fn from(g: GridConfig) -> GridSpec {
        GridSpec {
            complex_dim: g.complex_dim,
            points_per_axis: g.points_per_axis,
            diff_scheme: g.diff_scheme,
        }
    }
}

/// Background metric. Expressions use the grammar of [`crate::expr`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    #[default]
    Flat,
    /// `e^h` times the flat metric.
    Conformal { h: String },
    /// `I + ddbar f`.
    KaehlerPerturbation { f: String },
    /// Hermitian field file.
    Explicit { path: PathBuf },
    /// Diagonal metric with the given positive entries.
    Diagonal { entries: Vec<String> },
    /// Seeded random smooth non-Kaehler metric.
    Random { amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsSpec {
    Expr(String),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PrescriptionSpec {
    /// `psi = Ric(omega) - (1 / 2 pi) ddbar h`.
    H(String),
    HFile(PathBuf),
    /// Hermitian field file holding the coefficients of `psi`.
    PsiFile(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportInput {
    pub phi_file: PathBuf,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub scales: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            scales: vec![0.25, 0.5, 1.0, 1.5, 2.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentityConfig {
    pub instances: usize,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig { instances: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub metric: MetricSpec,
    /// Right-hand side `F`; zero when absent.
    #[serde(default)]
    pub rhs: Option<RhsSpec>,
    /// When present it must agree with the task named on the command line.
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub identities: IdentityConfig,
    #[serde(default)]
    pub prescription: Option<PrescriptionSpec>,
    #[serde(default)]
    pub report: Option<ReportInput>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Config {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::parse(&text)
    }
}

/// Resolve `p` against the directory holding the config file.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
