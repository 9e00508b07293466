//! Experiment configuration: JSON in, problem objects out.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use resonant_core::nonlinearity::{NonlinearMap, ProfileConfig};
use resonant_core::operator::{decompose, decompose_auto, SpectralSplit};
use resonant_core::schrodinger::{self, SchrodingerProblem, Sigma0};
use resonant_core::solver::{Backend, SolveOptions, StartPoint};
use resonant_core::continuation::EpsSchedule;
use resonant_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Schrodinger(SchrodingerProblem),
    /// Raw symmetric matrix in COO text form plus a profile and an optional
    /// right-hand-side vector file (defaults to zero).
    Matrix {
        matrix: String,
        profile: ProfileConfig,
        #[serde(default)]
        rhs: Option<String>,
        #[serde(default)]
        zero_tol: Option<f64>,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub backend: Option<Backend>,
    /// `zero`, `random:SEED`, or `file:PATH`.
    #[serde(default)]
    pub start: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub eps0: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub k_max: Option<usize>,
}

/// One sweep case: a name plus overrides applied on top of the base config.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepCase {
    pub name: String,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub norm_cap: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sweep: Vec<SweepCase>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        cfg.validate(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    /// Referenced files must exist up front; paths are relative to the
    /// config file's directory.
    fn validate(&self, base: &Path) -> Result<()> {
        let check = |p: &str| -> Result<()> {
            if !resolve(base, p).exists() {
                return Err(Error::InvalidParameter(format!(
                    "referenced file does not exist: {p}"
                )));
            }
            Ok(())
        };
        match &self.problem {
            ProblemConfig::Matrix { matrix, rhs, .. } => {
                check(matrix)?;
                if let Some(r) = rhs {
                    check(r)?;
                }
            }
            ProblemConfig::Schrodinger(p) => {
                if let resonant_core::schrodinger::RhsSpec::File { path } = &p.rhs {
                    check(path)?;
                }
                p.validate()?;
            }
        }
        Ok(())
    }
}

pub fn resolve(base: &Path, p: &str) -> PathBuf {
    let pb = PathBuf::from(p);
    if pb.is_absolute() {
        pb
    } else {
        base.join(pb)
    }
}

/// Everything downstream commands need, in memory.
pub struct Instance {
    pub split: SpectralSplit,
    pub map: NonlinearMap,
    pub h: DVector<f64>,
    /// Set when the problem came from the Schrödinger builder.
    pub sigma0: Option<f64>,
    pub grid: Option<resonant_core::schrodinger::GridSpec>,
}

pub fn build_instance(cfg: &ExperimentConfig, base: &Path) -> Result<Instance> {
    match &cfg.problem {
        ProblemConfig::Matrix {
            matrix,
            profile,
            rhs,
            zero_tol,
        } => {
            let op = resonant_core::io::read_coo_matrix(&resolve(base, matrix), 1e-12)?;
            let split = match zero_tol {
                Some(t) => decompose(&op, *t)?,
                None => decompose_auto(&op)?,
            };
            let weights = DVector::from_element(op.dim(), 1.0);
            let map = NonlinearMap::superposition(profile.build()?, weights)?;
            let h = match rhs {
                Some(p) => resonant_core::io::read_vector(&resolve(base, p))?,
                None => DVector::zeros(op.dim()),
            };
            if h.len() != op.dim() {
                return Err(Error::DimensionMismatch {
                    expected: op.dim(),
                    got: h.len(),
                });
            }
            Ok(Instance {
                split,
                map,
                h,
                sigma0: None,
                grid: None,
            })
        }
        ProblemConfig::Schrodinger(p) => {
            p.validate()?;
            let zero_tol = 1e-9 * (1.0 + 1.0 / p.grid.spacing().powi(2));
            let (sigma0, split, weights) = match p.sigma0 {
                Sigma0::Value(s) => {
                    let (op, w) = schrodinger::discretize(&p.grid, &p.potential, s)?;
                    (s, decompose(&op, zero_tol)?, w)
                }
                Sigma0::GapIndex(j) => {
                    let (op, w) = schrodinger::discretize(&p.grid, &p.potential, 0.0)?;
                    let (s, split) = schrodinger::gap_align(&op, j, zero_tol)?;
                    (s, split, w)
                }
            };
            let map = NonlinearMap::superposition(p.profile.build()?, weights)?;
            let h = p.rhs.sample(&p.grid)?;
            Ok(Instance {
                split,
                map,
                h,
                sigma0: Some(sigma0),
                grid: Some(p.grid),
            })
        }
    }
}

pub fn parse_start(s: &str, base: &Path) -> Result<StartPoint> {
    if s == "zero" {
        return Ok(StartPoint::Zero);
    }
    if let Some(seed) = s.strip_prefix("random:") {
        let seed: u64 = seed.parse().map_err(|e| {
            Error::InvalidParameter(format!("bad start seed in `{s}`: {e}"))
        })?;
        return Ok(StartPoint::Random {
            seed,
            half_width: 1.0,
        });
    }
    if let Some(path) = s.strip_prefix("file:") {
        let v = resonant_core::io::read_vector(&resolve(base, path))?;
        return Ok(StartPoint::Given(v));
    }
    Err(Error::InvalidParameter(format!(
        "start must be `zero`, `random:SEED` or `file:PATH`, got `{s}`"
    )))
}

/// Config → core options, with CLI flag overrides applied by the caller.
pub fn solve_options(cfg: &SolverConfig, base: &Path) -> Result<SolveOptions> {
    let mut o = SolveOptions::default();
    if let Some(t) = cfg.tol {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {t}")));
        }
        o.tol = t;
    }
    if let Some(m) = cfg.max_iter {
        o.max_iter = m;
    }
    o.backend = cfg.backend;
    if let Some(s) = &cfg.start {
        o.start = parse_start(s, base)?;
    }
    Ok(o)
}

pub fn schedule(cfg: &ScheduleConfig) -> EpsSchedule {
    let mut s = EpsSchedule::default();
    if let Some(e) = cfg.eps0 {
        s.eps0 = e;
    }
    if let Some(r) = cfg.rho {
        s.rho = r;
    }
    if let Some(k) = cfg.k_max {
        s.k_max = k;
    }
    s
}
