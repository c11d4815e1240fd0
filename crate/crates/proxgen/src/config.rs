//! JSON configuration schemas and their mapping onto domain objects.

use crate::error::{Error, Result};
use crate::potential::{Composite, ProxFriendly, Smooth};
use crate::proxnet::TrainConfig;
use crate::schedule::{LambdaSpec, Poly, Schedule, ScheduleKind};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothConfig {
    Zero { dim: usize },
    Quadratic { a: Vec<Vec<f64>>, b: Vec<f64> },
    PseudoHuber { dim: usize, delta: f64 },
}

impl SmoothConfig {
    pub fn build(&self) -> Result<Smooth> {
        match self {
            SmoothConfig::Zero { dim } => Ok(Smooth::Zero { dim: *dim }),
            SmoothConfig::Quadratic { a, b } => {
                let n = b.len();
                if a.len() != n || a.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("quadratic f: A must be n x n matching b".into()));
                }
                let flat: Vec<f64> = a.iter().flatten().copied().collect();
                Smooth::quadratic(
                    DMatrix::from_row_slice(n, n, &flat),
                    DVector::from_column_slice(b),
                )
            }
            SmoothConfig::PseudoHuber { dim, delta } => {
                if !(*delta > 0.0) {
                    return Err(Error::Config("pseudo_huber delta must be positive".into()));
                }
                Ok(Smooth::PseudoHuber { dim: *dim, delta: *delta })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxConfig {
    Zero { dim: usize },
    Interval { dim: usize, lo: f64, hi: f64 },
    Ball { dim: usize, r: f64 },
    L1 { dim: usize, weight: f64 },
    Quadratic { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl ProxConfig {
    pub fn build(&self) -> Result<ProxFriendly> {
        Ok(match self {
            ProxConfig::Zero { dim } => ProxFriendly::Zero { dim: *dim },
            ProxConfig::Interval { dim, lo, hi } => {
                if !(hi > lo) {
                    return Err(Error::Config("interval needs lo < hi".into()));
                }
                ProxFriendly::Interval { dim: *dim, lo: *lo, hi: *hi }
            }
            ProxConfig::Ball { dim, r } => {
                if !(*r > 0.0) {
                    return Err(Error::Config("ball radius must be positive".into()));
                }
                ProxFriendly::Ball { dim: *dim, radius: *r }
            }
            ProxConfig::L1 { dim, weight } => ProxFriendly::L1 { dim: *dim, weight: *weight },
            ProxConfig::Quadratic { a, b } => {
                ProxFriendly::Quadratic { a: a.clone(), b: b.clone() }
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialConfig {
    pub f: SmoothConfig,
    pub g: ProxConfig,
    pub beta: f64,
}

impl PotentialConfig {
    pub fn build(&self) -> Result<Composite> {
        Composite::new(self.f.build()?, self.g.build()?, self.beta)
    }
}

/// Schedule description, e.g.
/// `{"kind": "ve", "T": 1.0, "K": 100, "lambda": "exp(10t-8)"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub kind: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "K")]
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<Vec<f64>>,
    /// Split the step budget into two log-lambda-uniform segments around
    /// this knee, spending half the steps below it. Exp-affine VE only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_knee_lambda: Option<f64>,
}

impl ScheduleConfig {
    pub fn ve(horizon: f64, steps: usize) -> Self {
        ScheduleConfig {
            kind: "ve".into(),
            horizon,
            steps,
            lambda: Some(serde_json::Value::String("exp(10t-8)".into())),
            beta_min: None,
            beta_max: None,
            a: None,
            b2: None,
            grid_knee_lambda: None,
        }
    }

    fn lambda_spec(&self) -> Result<LambdaSpec> {
        match &self.lambda {
            None => Ok(LambdaSpec::ExpAffine { rate: 10.0, offset: -8.0 }),
            Some(serde_json::Value::String(s)) => LambdaSpec::parse(s),
            Some(serde_json::Value::Array(_)) => {
                let pts: Vec<(f64, f64)> = serde_json::from_value(
                    self.lambda.clone().unwrap(),
                )?;
                Ok(LambdaSpec::Tabulated(pts))
            }
            Some(v) => Ok(serde_json::from_value(v.clone())?),
        }
    }

    pub fn build(&self) -> Result<Schedule> {
        self.build_with_steps(self.steps)
    }

    /// Builds with an overridden step count (same kind and horizon).
    pub fn build_with_steps(&self, steps: usize) -> Result<Schedule> {
        if let Some(knee) = self.grid_knee_lambda {
            return self.build_two_segment(steps, knee);
        }
        let kind = match self.kind.as_str() {
            "ve" => ScheduleKind::Ve { lambda: self.lambda_spec()? },
            "vp" => ScheduleKind::Vp {
                beta_min: self.beta_min.unwrap_or(0.1),
                beta_max: self.beta_max.unwrap_or(20.0),
            },
            "custom" => {
                let a = self
                    .a
                    .clone()
                    .ok_or_else(|| Error::Config("custom schedule needs drift polynomial a".into()))?;
                let b2 = self
                    .b2
                    .clone()
                    .ok_or_else(|| Error::Config("custom schedule needs diffusion polynomial b2".into()))?;
                ScheduleKind::Custom { a: Poly(a), b2: Poly(b2) }
            }
            other => return Err(Error::Config(format!("unknown schedule kind {other:?}"))),
        };
        Schedule::uniform(kind, self.horizon, steps)
    }

    /// Two-segment grid, uniform in log-lambda on each side of the knee.
    /// Half the steps cover [lambda(0), knee], half [knee, lambda(T)].
    fn build_two_segment(&self, steps: usize, knee: f64) -> Result<Schedule> {
        let spec = self.lambda_spec()?;
        let LambdaSpec::ExpAffine { rate, offset } = spec else {
            return Err(Error::Config("grid_knee_lambda needs an exp-affine lambda".into()));
        };
        if self.kind != "ve" {
            return Err(Error::Config("grid_knee_lambda is VE-only".into()));
        }
        let kind = ScheduleKind::Ve { lambda: LambdaSpec::ExpAffine { rate, offset } };
        if steps < 2 {
            return Schedule::uniform(kind, self.horizon, steps);
        }
        let tau_of = |l: f64| (l.ln() - offset) / rate;
        let tau_knee = tau_of(knee).clamp(0.0, self.horizon);
        let late = steps / 2; // steps below the knee
        let early = steps - late;
        let split = self.horizon - tau_knee;
        let mut grid = Vec::with_capacity(steps + 1);
        for i in 0..=early {
            grid.push(split * i as f64 / early as f64);
        }
        for i in 1..=late {
            grid.push(split + tau_knee * i as f64 / late as f64);
        }
        Schedule::with_grid(kind, self.horizon, grid)
    }
}

/// Input of the `train` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainFileConfig {
    /// Prior potential `g`; training samples are drawn from `exp(-g)`.
    pub prior: ProxConfig,
    pub schedule: ScheduleConfig,
    #[serde(flatten)]
    pub train: TrainConfig,
}

/// Input of the `sample` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleFileConfig {
    pub potential: PotentialConfig,
    pub schedule: ScheduleConfig,
    pub sampler: SamplerCellConfig,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_chains() -> usize {
    1000
}

/// One sampler cell: kind plus its settings and prox route.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerCellConfig {
    pub kind: String,
    #[serde(default = "default_prox")]
    pub prox: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pula_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pula_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pula_iters: Option<usize>,
    /// Path of a trained parameter file, required when `prox == "learned"`
    /// and the surrounding context does not train one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<String>,
}

fn default_prox() -> String {
    "analytic".into()
}

impl SamplerCellConfig {
    pub fn kind(&self) -> Result<crate::sampler::SamplerKind> {
        use crate::sampler::SamplerKind::*;
        Ok(match self.kind.as_str() {
            "pgm" => Pgm,
            "pgm_em" => PgmEm,
            "prox_point_ode" => ProxPointOde,
            "pula" => Pula {
                step: self.pula_step.unwrap_or(0.01),
                lambda: self.pula_lambda.unwrap_or(0.1),
                iters: self.pula_iters.unwrap_or(100),
            },
            "analytic_score_sde" => {
                AnalyticScoreSde { early_stop_lambda: self.early_stop_lambda.unwrap_or(0.1) }
            }
            "projected_diffusion" => {
                ProjectedDiffusion { early_stop_lambda: self.early_stop_lambda.unwrap_or(0.1) }
            }
            other => return Err(Error::Config(format!("unknown sampler kind {other:?}"))),
        })
    }
}
