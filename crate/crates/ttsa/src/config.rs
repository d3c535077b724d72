//! TOML experiment configuration: problem spec, schedule spec, run spec,
//! outputs. Parsing round-trips (parse -> serialize -> parse is identity)
//! and numeric fields are validated against module preconditions at
//! instantiation time.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TtsaError};
use crate::problem::{NoiseModel, Problem};
use crate::problems::{
    make_lagrangian, make_linear_ttsa, make_polyak, make_saddle, LagrangianSpec, LinearTTSASpec,
    PolyakSpec, SaddleQuadraticSpec,
};
use crate::schedule::{BoundConstants, OffsetMode, Regime, Schedule, ScheduleBuilder};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseConfig {
    Zero,
    AdditiveGaussian { covariance_scale: f64 },
    MultiplicativeAffine { c1: f64 },
}

impl NoiseConfig {
    fn to_model(&self, dim: usize) -> NoiseModel {
        match *self {
            NoiseConfig::Zero => NoiseModel::zero(),
            NoiseConfig::AdditiveGaussian { covariance_scale } => {
                NoiseModel::additive_gaussian(covariance_scale, dim)
            }
            NoiseConfig::MultiplicativeAffine { c1 } => NoiseModel::multiplicative_affine(c1),
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::Zero
    }
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    if rows.is_empty() {
        return Err(TtsaError::Config(format!("{what}: empty matrix")));
    }
    let cols = rows[0].len();
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(TtsaError::Config(format!(
            "{what}: rows must be nonempty and of equal length"
        )));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn to_vector(v: &[f64]) -> Vector {
    Vector::from_row_slice(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    /// Affine base map `F(x) = M x + b` under iterate averaging.
    Polyak {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        #[serde(default)]
        noise_fast: NoiseConfig,
        #[serde(default)]
        noise_slow: NoiseConfig,
    },
    Saddle {
        p: Vec<Vec<f64>>,
        r: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zeta: Option<f64>,
        #[serde(default)]
        noise_fast: NoiseConfig,
        #[serde(default)]
        noise_slow: NoiseConfig,
    },
    Lagrangian {
        q: Vec<Vec<f64>>,
        q_vec: Vec<f64>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zeta: Option<f64>,
        #[serde(default)]
        noise_fast: NoiseConfig,
    },
    LinearTtsa {
        a11: Vec<Vec<f64>>,
        a12: Vec<Vec<f64>>,
        a21: Vec<Vec<f64>>,
        a22: Vec<Vec<f64>>,
        b1: Vec<f64>,
        b2: Vec<f64>,
        zeta: f64,
        #[serde(default)]
        noise_sigma: f64,
    },
}

impl ProblemConfig {
    pub fn to_problem(&self) -> Result<Problem> {
        match self {
            ProblemConfig::Polyak {
                matrix,
                offset,
                noise_fast,
                noise_slow,
            } => {
                let d = offset.len();
                let spec = PolyakSpec::affine(
                    to_matrix(matrix, "problem.matrix")?,
                    to_vector(offset),
                    noise_fast.to_model(d),
                    noise_slow.to_model(d),
                )?;
                make_polyak(spec)
            }
            ProblemConfig::Saddle {
                p,
                r,
                c,
                zeta,
                noise_fast,
                noise_slow,
            } => {
                let p = to_matrix(p, "problem.p")?;
                let r = to_matrix(r, "problem.r")?;
                let (d1, d2) = (p.nrows(), r.nrows());
                make_saddle(SaddleQuadraticSpec {
                    p_mat: p,
                    r_mat: r,
                    c_mat: to_matrix(c, "problem.c")?,
                    step_zeta: *zeta,
                    noise_fast: noise_fast.to_model(d1),
                    noise_slow: noise_slow.to_model(d2),
                })
            }
            ProblemConfig::Lagrangian {
                q,
                q_vec,
                a,
                b,
                zeta,
                noise_fast,
            } => {
                let q = to_matrix(q, "problem.q")?;
                let d1 = q.nrows();
                make_lagrangian(LagrangianSpec {
                    q_mat: q,
                    q_vec: to_vector(q_vec),
                    a_mat: to_matrix(a, "problem.a")?,
                    b_vec: to_vector(b),
                    step_zeta: *zeta,
                    noise_fast: noise_fast.to_model(d1),
                })
            }
            ProblemConfig::LinearTtsa {
                a11,
                a12,
                a21,
                a22,
                b1,
                b2,
                zeta,
                noise_sigma,
            } => make_linear_ttsa(LinearTTSASpec {
                a11: to_matrix(a11, "problem.a11")?,
                a12: to_matrix(a12, "problem.a12")?,
                a21: to_matrix(a21, "problem.a21")?,
                a22: to_matrix(a22, "problem.a22")?,
                b1: to_vector(b1),
                b2: to_vector(b2),
                step_zeta: *zeta,
                noise_sigma: *noise_sigma,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeConfig {
    BothOneOverK,
    FastOneOverKA,
}

impl From<RegimeConfig> for Regime {
    fn from(r: RegimeConfig) -> Regime {
        match r {
            RegimeConfig::BothOneOverK => Regime::BothOneOverK,
            RegimeConfig::FastOneOverKA => Regime::FastOneOverKa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub regime: RegimeConfig,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_a: Option<f64>,
    /// Requested minimum offset; raised to the mode's floor if below it.
    #[serde(default = "default_offset")]
    pub offset: f64,
    #[serde(default)]
    pub strict: bool,
}

fn default_offset() -> f64 {
    1.0
}

impl ScheduleConfig {
    pub fn to_builder(&self) -> ScheduleBuilder {
        ScheduleBuilder {
            regime: self.regime.into(),
            alpha: self.alpha,
            beta: self.beta,
            exponent_a: self.exponent_a,
            offset_min: self.offset,
            mode: if self.strict {
                OffsetMode::Strict
            } else {
                OffsetMode::Relaxed
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub horizon: u64,
    pub trials: usize,
    #[serde(default = "default_log_points")]
    pub log_points: usize,
    pub base_seed: u64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

fn default_log_points() -> usize {
    40
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    AuxLemma,
    XstarLipschitz,
    NoiseVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputsConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_oracles")]
    pub oracles: Vec<OracleKind>,
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_oracles() -> Vec<OracleKind> {
    vec![
        OracleKind::AuxLemma,
        OracleKind::XstarLipschitz,
        OracleKind::NoiseVariance,
    ]
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            dir: default_out_dir(),
            oracles: default_oracles(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    ErrXy,
    ErrX,
    NormU2,
}

/// Optional acceptance check evaluated by `run --check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub series: SeriesKind,
    pub slope_min: f64,
    pub slope_max: f64,
    pub fit_lo: u64,
    pub fit_hi: u64,
    #[serde(default)]
    pub require_bound_domination: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub schedule: ScheduleConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| TtsaError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Build the problem, schedule, constants, and initial point, validating
    /// every field against module preconditions.
    pub fn instantiate(&self) -> Result<(Arc<Problem>, Schedule, BoundConstants, Vector, Vector)> {
        if self.run.horizon < 1 {
            return Err(TtsaError::Config("run.horizon must be >= 1".into()));
        }
        if self.run.trials < 2 {
            return Err(TtsaError::Config("run.trials must be >= 2".into()));
        }
        if self.run.log_points < 2 {
            return Err(TtsaError::Config("run.log_points must be >= 2".into()));
        }
        let p = self.problem.to_problem()?;
        let x0 = to_vector(&self.run.x0);
        let y0 = to_vector(&self.run.y0);
        if x0.len() != p.dim_fast {
            return Err(TtsaError::Config(format!(
                "run.x0 has length {}, problem fast dimension is {}",
                x0.len(),
                p.dim_fast
            )));
        }
        if y0.len() != p.dim_slow {
            return Err(TtsaError::Config(format!(
                "run.y0 has length {}, problem slow dimension is {}",
                y0.len(),
                p.dim_slow
            )));
        }
        let (schedule, constants) = self.schedule.to_builder().build(&p, &x0, &y0)?;
        Ok((Arc::new(p), schedule, constants, x0, y0))
    }
}
