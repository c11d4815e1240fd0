//! Diffusion schedules and exponential-interpolation step coefficients.
//!
//! A schedule fixes the forward-process scale `mu(t)`, noise variance
//! `sigma^2(t)`, and the proximal parameter `lambda(t) = sigma^2(t)/mu^2(t)`
//! on a horizon `[0, T]`, together with a sampler grid. Grid indices run in
//! sampler (reverse) time: step `k` of a sampler maps to forward time
//! `tau_k = T - t_k`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Polynomial in `t`, stored by ascending-degree coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Antiderivative with zero constant term, evaluated at `t`.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &c) in self.0.iter().enumerate().rev() {
            acc = acc * t + c / (i as f64 + 1.0);
        }
        acc * t
    }
}

/// How `lambda(t)` is specified for a variance-exploding schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSpec {
    /// `lambda(t) = exp(rate * t + offset)`.
    ExpAffine { rate: f64, offset: f64 },
    /// Tabulated `(t, lambda)` pairs, log-linearly interpolated.
    Tabulated(Vec<(f64, f64)>),
}

impl LambdaSpec {
    /// Parses the string form `exp(<rate>t<offset>)`, e.g. `"exp(10t-8)"`.
    pub fn parse(s: &str) -> Result<Self> {
        let re = regex::Regex::new(
            r"^exp\(\s*([+-]?\d*\.?\d*)\s*\*?\s*t\s*([+-]\s*\d+\.?\d*)?\s*\)$",
        )
        .expect("static regex");
        let caps = re
            .captures(s.trim())
            .ok_or_else(|| Error::Config(format!("cannot parse lambda spec {s:?}")))?;
        let rate_str = caps.get(1).map_or("", |m| m.as_str());
        let rate = match rate_str {
            "" | "+" => 1.0,
            "-" => -1.0,
            v => v
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad rate in {s:?}")))?,
        };
        let offset = match caps.get(2) {
            None => 0.0,
            Some(m) => m
                .as_str()
                .replace(' ', "")
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad offset in {s:?}")))?,
        };
        Ok(LambdaSpec::ExpAffine { rate, offset })
    }

    fn eval(&self, t: f64) -> f64 {
        match self {
            LambdaSpec::ExpAffine { rate, offset } => (rate * t + offset).exp(),
            LambdaSpec::Tabulated(pts) => {
                if t <= pts[0].0 {
                    return pts[0].1;
                }
                if t >= pts[pts.len() - 1].0 {
                    return pts[pts.len() - 1].1;
                }
                let i = pts.partition_point(|p| p.0 <= t) - 1;
                let (t0, v0) = pts[i];
                let (t1, v1) = pts[i + 1];
                let w = (t - t0) / (t1 - t0);
                (v0.ln() * (1.0 - w) + v1.ln() * w).exp()
            }
        }
    }

    /// `d lambda / dt`, used as `b^2` under a variance-exploding schedule.
    fn slope(&self, t: f64) -> f64 {
        match self {
            LambdaSpec::ExpAffine { rate, .. } => rate * self.eval(t),
            LambdaSpec::Tabulated(pts) => {
                let i = pts
                    .partition_point(|p| p.0 <= t)
                    .clamp(1, pts.len() - 1);
                let (t0, v0) = pts[i - 1];
                let (t1, v1) = pts[i];
                let c = (v1.ln() - v0.ln()) / (t1 - t0);
                c * self.eval(t)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Variance-exploding: `mu = 1`, `lambda` given directly.
    Ve { lambda: LambdaSpec },
    /// Variance-preserving with linear noise rate `beta(t)` from `beta_min`
    /// to `beta_max` over the horizon: `a = -beta/2`, `b^2 = beta`.
    Vp { beta_min: f64, beta_max: f64 },
    /// Drift `a(t)` and squared diffusion `b^2(t)` as polynomials; `lambda`
    /// is integrated numerically.
    Custom { a: Poly, b2: Poly },
}

/// Values of the three schedule functions at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub mu: f64,
    pub sigma2: f64,
    pub lambda: f64,
}

/// Coefficients of one exponential-interpolation step
/// `x_{k+1} = alpha1 * x_k + alpha2 * P_k + alpha3 * xi_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

/// Panels used per grid cell when integrating custom schedules.
const CUSTOM_PANELS_PER_CELL: usize = 1024;

/// Relative end-clamp applied when `lambda(0) = 0` would make the final
/// step-coefficient ratio singular. Zero for schedules with `lambda(0) > 0`.
const T_MIN_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct Schedule {
    kind: ScheduleKind,
    horizon: f64,
    grid: Vec<f64>,
    /// Cumulative `int b^2/mu^2` at ascending forward times, custom kind only.
    custom_cells: Vec<(f64, f64)>,
}

impl Schedule {
    /// Uniform sampler grid with `steps` steps. The grid covers `[0, T]` when
    /// `lambda(0) > 0` and `[0, T*(1 - 1e-4)]` otherwise, so that the final
    /// coefficient ratio stays finite.
    pub fn uniform(kind: ScheduleKind, horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        let mut s = Schedule {
            kind,
            horizon,
            grid: vec![0.0],
            custom_cells: Vec::new(),
        };
        s.init_custom_cells_coarse()?;
        let lambda0 = s.eval(0.0)?.lambda;
        let end = if lambda0 > 0.0 {
            horizon
        } else {
            horizon * (1.0 - T_MIN_FRACTION)
        };
        let grid = (0..=steps)
            .map(|k| end * k as f64 / steps.max(1) as f64)
            .take(steps + 1)
            .collect();
        s.grid = grid;
        s.rebuild_custom_cells()?;
        s.validate()?;
        Ok(s)
    }

    /// Explicit sampler grid (strictly increasing, within `[0, T]`).
    pub fn with_grid(kind: ScheduleKind, horizon: f64, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid[0] != 0.0 {
            return Err(Error::Domain("grid must start at t=0".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) || *grid.last().unwrap() > horizon {
            return Err(Error::Domain("grid must be strictly increasing within [0, T]".into()));
        }
        let mut s = Schedule {
            kind,
            horizon,
            grid,
            custom_cells: Vec::new(),
        };
        s.rebuild_custom_cells()?;
        s.validate()?;
        Ok(s)
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Sampler-time grid `t_0 = 0 < ... < t_K`.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn num_steps(&self) -> usize {
        self.grid.len() - 1
    }

    /// Forward time of sampler index `k`.
    pub fn tau(&self, k: usize) -> f64 {
        self.horizon - self.grid[k]
    }

    pub fn max_step(&self) -> f64 {
        self.grid
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Evaluates `(mu, sigma^2, lambda)` at forward time `t`.
    pub fn eval(&self, t: f64) -> Result<SchedulePoint> {
        if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} outside schedule range [0, {}]",
                self.horizon
            )));
        }
        let p = match &self.kind {
            ScheduleKind::Ve { lambda } => {
                let l = lambda.eval(t);
                SchedulePoint { mu: 1.0, sigma2: l, lambda: l }
            }
            ScheduleKind::Vp { beta_min, beta_max } => {
                let bint = beta_min * t + (beta_max - beta_min) * t * t / (2.0 * self.horizon);
                let mu = (-0.5 * bint).exp();
                let sigma2 = 1.0 - (-bint).exp();
                SchedulePoint { mu, sigma2, lambda: sigma2 / (mu * mu) }
            }
            ScheduleKind::Custom { a, .. } => {
                let mu = a.integral(t).exp();
                let lambda = self.custom_lambda(t);
                SchedulePoint { mu, sigma2: mu * mu * lambda, lambda }
            }
        };
        Ok(p)
    }

    /// Drift `a(t)` of the forward SDE.
    pub fn drift_a(&self, t: f64) -> f64 {
        match &self.kind {
            ScheduleKind::Ve { .. } => 0.0,
            ScheduleKind::Vp { beta_min, beta_max } => {
                -0.5 * (beta_min + (beta_max - beta_min) * t / self.horizon)
            }
            ScheduleKind::Custom { a, .. } => a.eval(t),
        }
    }

    /// Squared diffusion `b^2(t)` of the forward SDE.
    pub fn diffusion_b2(&self, t: f64) -> f64 {
        match &self.kind {
            ScheduleKind::Ve { lambda } => lambda.slope(t),
            ScheduleKind::Vp { beta_min, beta_max } => {
                beta_min + (beta_max - beta_min) * t / self.horizon
            }
            ScheduleKind::Custom { b2, .. } => b2.eval(t),
        }
    }

    /// Exponential-interpolation coefficients for sampler step `k`.
    pub fn step_coefficients(&self, k: usize) -> Result<StepCoefficients> {
        if k + 1 >= self.grid.len() {
            return Err(Error::Domain(format!(
                "step index {k} out of range for {}-step grid",
                self.num_steps()
            )));
        }
        let pk = self.eval(self.tau(k))?;
        let pk1 = self.eval(self.tau(k + 1))?;
        if pk.lambda == 0.0 {
            return Err(Error::SingularTime(format!(
                "lambda(tau_{k}) = 0; clamp the grid away from lambda = 0"
            )));
        }
        let ratio = pk1.lambda / pk.lambda;
        let alpha1 = pk1.lambda * pk1.mu / (pk.lambda * pk.mu);
        let alpha2 = pk1.mu * (1.0 - ratio);
        let alpha3 = pk1.mu * pk1.lambda.sqrt() * (1.0 - ratio).max(0.0).sqrt();
        if !(alpha1.is_finite() && alpha2.is_finite() && alpha3.is_finite()) {
            return Err(Error::SingularTime(format!("non-finite coefficients at step {k}")));
        }
        Ok(StepCoefficients { alpha1, alpha2, alpha3 })
    }

    /// Diagnostic bounds on `d log lambda / dt` and `|d log mu / dt|` over
    /// the grid, estimated by central differences at cell midpoints.
    pub fn log_derivative_bounds(&self) -> Result<(f64, f64, f64, f64)> {
        let mut lam = (f64::INFINITY, f64::NEG_INFINITY);
        let mut mu = (f64::INFINITY, f64::NEG_INFINITY);
        for w in self.grid.windows(2) {
            let mid = self.horizon - 0.5 * (w[0] + w[1]);
            let h = 1e-6 * self.horizon;
            let lo = (mid - h).max(0.0);
            let hi = (mid + h).min(self.horizon);
            let a = self.eval(lo)?;
            let b = self.eval(hi)?;
            let dt = hi - lo;
            if a.lambda > 0.0 && b.lambda > 0.0 {
                let dl = (b.lambda.ln() - a.lambda.ln()) / dt;
                lam = (lam.0.min(dl), lam.1.max(dl));
            }
            let dm = ((b.mu.ln() - a.mu.ln()) / dt).abs();
            mu = (mu.0.min(dm), mu.1.max(dm));
        }
        Ok((lam.0, lam.1, mu.0, mu.1))
    }

    fn custom_lambda(&self, t: f64) -> f64 {
        let cells = &self.custom_cells;
        if cells.is_empty() {
            return 0.0;
        }
        let i = cells.partition_point(|c| c.0 <= t).saturating_sub(1);
        let (t0, acc) = cells[i];
        acc + self.integrate_rate(t0, t)
    }

    /// Simpson integral of `b^2/mu^2` over `[lo, hi]`.
    fn integrate_rate(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let (a, b2) = match &self.kind {
            ScheduleKind::Custom { a, b2 } => (a, b2),
            _ => unreachable!("integrate_rate is custom-only"),
        };
        let f = |t: f64| {
            let mu = a.integral(t).exp();
            b2.eval(t) / (mu * mu)
        };
        let n = CUSTOM_PANELS_PER_CELL;
        let h = (hi - lo) / n as f64;
        let mut sum = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(lo + i as f64 * h);
        }
        sum * h / 3.0
    }

    fn init_custom_cells_coarse(&mut self) -> Result<()> {
        if matches!(self.kind, ScheduleKind::Custom { .. }) {
            self.custom_cells = vec![(0.0, 0.0)];
        }
        Ok(())
    }

    fn rebuild_custom_cells(&mut self) -> Result<()> {
        if !matches!(self.kind, ScheduleKind::Custom { .. }) {
            return Ok(());
        }
        let mut taus: Vec<f64> = self.grid.iter().map(|t| self.horizon - t).collect();
        taus.push(0.0);
        taus.push(self.horizon);
        taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        taus.dedup();
        self.custom_cells = vec![(0.0, 0.0)];
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &t in taus.iter().skip_while(|&&t| t <= 0.0) {
            acc += self.integrate_rate(prev, t);
            self.custom_cells.push((t, acc));
            prev = t;
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let p0 = self.eval(0.0)?;
        if (p0.mu - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("mu(0) must be 1, got {}", p0.mu)));
        }
        let mut prev = p0;
        let n = 64;
        for i in 1..=n {
            let t = self.horizon * i as f64 / n as f64;
            let p = self.eval(t)?;
            if p.lambda < prev.lambda - 1e-12 * (1.0 + prev.lambda) {
                return Err(Error::Domain(format!("lambda must be nondecreasing (at t={t})")));
            }
            if p.mu > prev.mu + 1e-12 {
                return Err(Error::Domain(format!("mu must be nonincreasing (at t={t})")));
            }
            let recon = (p.sigma2 - p.mu * p.mu * p.lambda).abs();
            if recon > 1e-12 * (1.0 + p.sigma2) {
                return Err(Error::Domain(format!(
                    "sigma^2 != mu^2 * lambda at t={t} (residual {recon:e})"
                )));
            }
            prev = p;
        }
        Ok(())
    }
}

/// Convenience constructor for the default variance-exploding schedule
/// `lambda(t) = exp(10t - 8)`.
pub fn ve_default(horizon: f64, steps: usize) -> Result<Schedule> {
    Schedule::uniform(
        ScheduleKind::Ve { lambda: LambdaSpec::ExpAffine { rate: 10.0, offset: -8.0 } },
        horizon,
        steps,
    )
}
