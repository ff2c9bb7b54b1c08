//! JSON experiment configuration, mirroring the in-process parameter types.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use hmlab_core::domain::{build_domain, DomainGrid, DomainKind};
use hmlab_core::error::{Error, Result};
use hmlab_core::minimizer::SolverParams;
use hmlab_core::singularity::DetectorParams;
use hmlab_core::trace_norms::{default_poles, SeminormParams, TraceFamily};
use hmlab_core::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LinearLaw,
    Sharpness,
    Stability,
    BoundaryRegularity,
    MonotonicitySuite,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LinearLaw => "linear_law",
            ExperimentKind::Sharpness => "sharpness",
            ExperimentKind::Stability => "stability",
            ExperimentKind::BoundaryRegularity => "boundary_regularity",
            ExperimentKind::MonotonicitySuite => "monotonicity_suite",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear_law" | "linear-law" => Ok(ExperimentKind::LinearLaw),
            "sharpness" => Ok(ExperimentKind::Sharpness),
            "stability" => Ok(ExperimentKind::Stability),
            "boundary_regularity" | "boundary-regularity" => Ok(ExperimentKind::BoundaryRegularity),
            "monotonicity_suite" | "monotonicity" => Ok(ExperimentKind::MonotonicitySuite),
            other => Err(Error::InvalidParam(format!("unknown experiment `{other}`"))),
        }
    }
}

/// Solver block; omitted fields fall back to grid-scaled defaults.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SolverConfig {
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub restarts: Option<usize>,
}

impl SolverConfig {
    pub fn resolve(&self, h: f64, seed: u64) -> SolverParams {
        let mut p = SolverParams::default_for(h);
        if let Some(t) = self.tau {
            p.tau = t;
        }
        if let Some(m) = self.max_iters {
            p.max_iters = m;
        }
        if let Some(r) = self.rel_tol {
            p.rel_tol = r;
        }
        if let Some(r) = self.restarts {
            p.restarts = r;
        }
        p.seed = seed;
        p
    }
}

/// Detector block; omitted fields fall back to grid-scaled defaults.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DetectorConfig {
    #[serde(default)]
    pub r_detect: Option<f64>,
    #[serde(default)]
    pub density_threshold: Option<f64>,
    #[serde(default)]
    pub merge_radius: Option<f64>,
    #[serde(default)]
    pub degree_radius: Option<f64>,
}

impl DetectorConfig {
    pub fn resolve(&self, h: f64) -> DetectorParams {
        let mut p = DetectorParams::default_for(h);
        if let Some(r) = self.r_detect {
            p.r_detect = r;
        }
        if let Some(t) = self.density_threshold {
            p.density_threshold = t;
        }
        if let Some(m) = self.merge_radius {
            p.merge_radius = m;
        }
        if let Some(d) = self.degree_radius {
            p.degree_radius = d;
        }
        p
    }
}

/// Trace family selector for single-field commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyConfig {
    Identity,
    Bubble { lambda: f64, pole: Option<Vec3> },
    KBubbles { k: usize, lambda: f64, signs: Option<Vec<i8>> },
    Perturbed { delta: f64 },
}

impl FamilyConfig {
    pub fn to_family(&self) -> TraceFamily {
        match self {
            FamilyConfig::Identity => TraceFamily::Identity,
            FamilyConfig::Bubble { lambda, pole } => TraceFamily::Bubble {
                lambda: *lambda,
                pole: pole.unwrap_or([0.0, 0.0, -1.0]),
            },
            FamilyConfig::KBubbles { k, lambda, signs } => TraceFamily::KBubbles {
                lambda: *lambda,
                poles: default_poles(*k),
                signs: signs.clone().unwrap_or_else(|| vec![1; *k]),
            },
            FamilyConfig::Perturbed { delta } => TraceFamily::Perturbed {
                base: Box::new(TraceFamily::Identity),
                delta: *delta,
                cap_center: PERTURBATION_CAP_CENTER,
                cap_radius: PERTURBATION_CAP_RADIUS,
            },
        }
    }
}

/// Fixed off-pole cap used by the stability perturbation.
pub const PERTURBATION_CAP_CENTER: Vec3 = [1.0, 0.7, 0.25];
pub const PERTURBATION_CAP_RADIUS: f64 = 0.3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub domain: String,
    pub n: usize,
    pub s: f64,
    pub p: f64,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub ks: Vec<usize>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    pub seed: u64,
    pub out_dir: String,
    /// Trace family for the single-field `minimize` command.
    #[serde(default)]
    pub family: Option<FamilyConfig>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidParam(format!("config parse error: {e}")))
    }

    pub fn domain_kind(&self) -> Result<DomainKind> {
        DomainKind::parse(&self.domain)
    }

    pub fn build_grid(&self) -> Result<Arc<DomainGrid>> {
        Ok(Arc::new(build_domain(self.domain_kind()?, self.n)?))
    }

    pub fn seminorm_params(&self) -> Result<SeminormParams> {
        SeminormParams::new(self.s, self.p)
    }

    /// Compact echo of the case-defining fields for report provenance.
    pub fn echo(&self) -> String {
        format!(
            "experiment={};domain={};n={};s={};p={};seed={}",
            self.experiment.name(),
            self.domain,
            self.n,
            self.s,
            self.p,
            self.seed
        )
    }
}
