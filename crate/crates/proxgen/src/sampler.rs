//! Reverse-time samplers for composite targets: proximal diffusion sampling
//! by exponential interpolation, its Euler-Maruyama variant, proximal
//! Langevin, the noise-free proximal-point recursion, and two score-based
//! baselines driven by the quadrature Stein score.

use crate::error::{Error, Result};
use crate::oracle::{true_score_quadrature_with_tol, LogDensity1D};
use crate::potential::Composite;
use crate::proxnet::ProxNet;
use crate::schedule::Schedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Where the sampler gets `Prox_U` from.
#[derive(Debug, Clone)]
pub enum ProxSource {
    /// One-gradient-step splitting with the analytic prox of `g`.
    Analytic,
    /// Closed-form joint prox of the whole composite.
    JointExact,
    /// Learned operator applied at the gradient-stepped input.
    Learned(ProxNet),
}

impl ProxSource {
    pub fn name(&self) -> &'static str {
        match self {
            ProxSource::Analytic => "analytic",
            ProxSource::JointExact => "joint_exact",
            ProxSource::Learned(_) => "learned",
        }
    }

    /// Evaluates `P = Prox_U^lambda(x / mu)` through the chosen route.
    fn eval(&self, c: &Composite, lambda: f64, mu: f64, x: &[f64]) -> Result<Vec<f64>> {
        let y: Vec<f64> = x.iter().map(|&v| v / mu).collect();
        match self {
            ProxSource::Analytic => c.split_prox(lambda, &y),
            ProxSource::JointExact => c.joint_prox(lambda, &y)?.ok_or_else(|| {
                Error::Domain("no closed-form joint prox for this composite".into())
            }),
            ProxSource::Learned(net) => {
                let grad = c.f.grad(&y);
                let u: Vec<f64> = y
                    .iter()
                    .zip(&grad)
                    .map(|(&yi, &gi)| yi - c.beta * lambda * gi)
                    .collect();
                net.forward(&u, lambda)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum SamplerKind {
    /// Exponential-interpolation proximal diffusion sampling.
    Pgm,
    /// Euler-Maruyama discretization of the same reverse process.
    PgmEm,
    /// Proximal unadjusted Langevin with a fixed smoothing parameter.
    Pula { step: f64, lambda: f64, iters: usize },
    /// Noise-free recursion `x' = (1 - rho) x + rho P`; converges to the
    /// constrained mode.
    ProxPointOde,
    /// Reverse SDE with the quadrature Stein score, early-stopped once
    /// `lambda` falls below the given floor.
    AnalyticScoreSde { early_stop_lambda: f64 },
    /// The score SDE baseline with every iterate projected onto `dom(g)`.
    ProjectedDiffusion { early_stop_lambda: f64 },
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Pgm => "pgm",
            SamplerKind::PgmEm => "pgm_em",
            SamplerKind::Pula { .. } => "pula",
            SamplerKind::ProxPointOde => "prox_point_ode",
            SamplerKind::AnalyticScoreSde { .. } => "analytic_score_sde",
            SamplerKind::ProjectedDiffusion { .. } => "projected_diffusion",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub chains: usize,
    pub seed: u64,
    pub prox: ProxSource,
    pub keep_trajectories: bool,
    /// Node count of the tabulated score used by the SDE baselines.
    pub score_table_nodes: usize,
    /// Quadrature panels per score-table node.
    pub score_table_panels: usize,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, chains: usize, seed: u64, prox: ProxSource) -> Self {
        SamplerConfig {
            kind,
            chains,
            seed,
            prox,
            keep_trajectories: false,
            score_table_nodes: 513,
            score_table_panels: 1024,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SampleBatch {
    /// One row per chain.
    pub samples: Vec<Vec<f64>>,
    pub sampler: String,
    pub prox_source: String,
    pub seed: u64,
    pub steps: usize,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<Vec<Vec<Vec<f64>>>>,
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn check_finite(x: &[f64], step: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { step, detail: "non-finite state".into() });
    }
    Ok(())
}

/// Draws `x_0 ~ N(0, mu^2(T) lambda(T) I)`, the stationary initialization.
fn init_state(schedule: &Schedule, rng: &mut ChaCha8Rng, dim: usize) -> Result<Vec<f64>> {
    let p = schedule.eval(schedule.horizon())?;
    let std = (p.mu * p.mu * p.lambda).sqrt();
    Ok(standard_normal_vec(rng, dim).into_iter().map(|z| std * z).collect())
}

/// One deterministic exponential-interpolation step (noise suppressed);
/// exposed for discretization comparisons.
pub fn pgm_step_deterministic(
    c: &Composite,
    schedule: &Schedule,
    k: usize,
    x: &[f64],
    prox: &ProxSource,
) -> Result<Vec<f64>> {
    let coeff = schedule.step_coefficients(k)?;
    let pk = schedule.eval(schedule.tau(k))?;
    let p = prox.eval(c, pk.lambda, pk.mu, x)?;
    Ok(x.iter()
        .zip(&p)
        .map(|(&xi, &pi)| coeff.alpha1 * xi + coeff.alpha2 * pi)
        .collect())
}

/// One deterministic Euler-Maruyama step of the same reverse process.
pub fn em_step_deterministic(
    c: &Composite,
    schedule: &Schedule,
    k: usize,
    x: &[f64],
    prox: &ProxSource,
) -> Result<Vec<f64>> {
    let grid = schedule.grid();
    let gamma = grid[k + 1] - grid[k];
    let tau = schedule.tau(k);
    let pk = schedule.eval(tau)?;
    let a = schedule.drift_a(tau);
    let b2 = schedule.diffusion_b2(tau);
    let coef0 = 1.0 - gamma * (a + b2 / pk.sigma2);
    let coef1 = gamma * b2 * pk.mu / pk.sigma2;
    let p = prox.eval(c, pk.lambda, pk.mu, x)?;
    Ok(x.iter()
        .zip(&p)
        .map(|(&xi, &pi)| coef0 * xi + coef1 * pi)
        .collect())
}

/// Runs the configured sampler against the composite target.
pub fn run(cfg: &SamplerConfig, c: &Composite, schedule: &Schedule) -> Result<SampleBatch> {
    match &cfg.kind {
        SamplerKind::Pgm => run_pgm(cfg, c, schedule, true),
        SamplerKind::ProxPointOde => run_pgm(cfg, c, schedule, false),
        SamplerKind::PgmEm => run_em(cfg, c, schedule),
        SamplerKind::Pula { step, lambda, iters } => {
            run_pula(cfg, c, schedule, *step, *lambda, *iters)
        }
        SamplerKind::AnalyticScoreSde { early_stop_lambda } => {
            run_score_sde(cfg, c, schedule, *early_stop_lambda, false)
        }
        SamplerKind::ProjectedDiffusion { early_stop_lambda } => {
            run_score_sde(cfg, c, schedule, *early_stop_lambda, true)
        }
    }
}

fn assemble(
    cfg: &SamplerConfig,
    steps: usize,
    warnings: Vec<String>,
    per_chain: Vec<(Vec<f64>, Option<Vec<Vec<f64>>>)>,
) -> SampleBatch {
    let mut samples = Vec::with_capacity(per_chain.len());
    let mut trajectories = cfg.keep_trajectories.then(Vec::new);
    for (x, traj) in per_chain {
        samples.push(x);
        if let (Some(all), Some(t)) = (trajectories.as_mut(), traj) {
            all.push(t);
        }
    }
    SampleBatch {
        samples,
        sampler: cfg.kind.name().to_string(),
        prox_source: cfg.prox.name().to_string(),
        seed: cfg.seed,
        steps,
        warnings,
        trajectories,
    }
}

fn run_pgm(
    cfg: &SamplerConfig,
    c: &Composite,
    schedule: &Schedule,
    with_noise: bool,
) -> Result<SampleBatch> {
    let dim = c.dim();
    let steps = schedule.num_steps();
    let coeffs: Vec<_> = (0..steps)
        .map(|k| schedule.step_coefficients(k))
        .collect::<Result<_>>()?;
    let lambdas: Vec<_> = (0..steps)
        .map(|k| schedule.eval(schedule.tau(k)).map(|p| (p.lambda, p.mu)))
        .collect::<Result<_>>()?;
    let per_chain: Vec<(Vec<f64>, Option<Vec<Vec<f64>>>)> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain| -> Result<_> {
            let mut rng = chain_rng(cfg.seed, chain);
            let mut x = init_state(schedule, &mut rng, dim)?;
            let mut traj = cfg.keep_trajectories.then(|| vec![x.clone()]);
            for k in 0..steps {
                let (lambda, mu) = lambdas[k];
                let p = cfg.prox.eval(c, lambda, mu, &x)?;
                let co = &coeffs[k];
                let noise = if with_noise {
                    standard_normal_vec(&mut rng, dim)
                } else {
                    vec![0.0; dim]
                };
                for i in 0..dim {
                    x[i] = co.alpha1 * x[i] + co.alpha2 * p[i] + co.alpha3 * noise[i];
                }
                check_finite(&x, k)?;
                if let Some(t) = traj.as_mut() {
                    t.push(x.clone());
                }
            }
            Ok((x, traj))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(cfg, steps, Vec::new(), per_chain))
}

fn run_em(cfg: &SamplerConfig, c: &Composite, schedule: &Schedule) -> Result<SampleBatch> {
    let dim = c.dim();
    let steps = schedule.num_steps();
    let grid = schedule.grid();
    let mut warnings = Vec::new();
    struct EmStep {
        coef0: f64,
        coef1: f64,
        noise: f64,
        lambda: f64,
        mu: f64,
    }
    let mut table = Vec::with_capacity(steps);
    for k in 0..steps {
        let gamma = grid[k + 1] - grid[k];
        let tau = schedule.tau(k);
        let p = schedule.eval(tau)?;
        let a = schedule.drift_a(tau);
        let b2 = schedule.diffusion_b2(tau);
        let ratio = gamma * b2 / p.sigma2;
        if ratio >= 1.0 && warnings.is_empty() {
            warnings.push(format!(
                "step {k}: gamma*b^2/sigma^2 = {ratio:.3} >= 1 (overshoot regime)"
            ));
        }
        table.push(EmStep {
            coef0: 1.0 - gamma * a - ratio,
            coef1: ratio * p.mu,
            noise: (gamma * b2).sqrt(),
            lambda: p.lambda,
            mu: p.mu,
        });
    }
    let per_chain: Vec<(Vec<f64>, Option<Vec<Vec<f64>>>)> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain| -> Result<_> {
            let mut rng = chain_rng(cfg.seed, chain);
            let mut x = init_state(schedule, &mut rng, dim)?;
            let mut traj = cfg.keep_trajectories.then(|| vec![x.clone()]);
            for (k, st) in table.iter().enumerate() {
                let p = cfg.prox.eval(c, st.lambda, st.mu, &x)?;
                let noise = standard_normal_vec(&mut rng, dim);
                for i in 0..dim {
                    x[i] = st.coef0 * x[i] + st.coef1 * p[i] + st.noise * noise[i];
                }
                check_finite(&x, k)?;
                if let Some(t) = traj.as_mut() {
                    t.push(x.clone());
                }
            }
            Ok((x, traj))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(cfg, steps, warnings, per_chain))
}

fn run_pula(
    cfg: &SamplerConfig,
    c: &Composite,
    schedule: &Schedule,
    step: f64,
    lambda: f64,
    iters: usize,
) -> Result<SampleBatch> {
    if !(step > 0.0) || !(lambda > 0.0) {
        return Err(Error::Domain("pula needs positive step and lambda".into()));
    }
    let dim = c.dim();
    let per_chain: Vec<(Vec<f64>, Option<Vec<Vec<f64>>>)> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain| -> Result<_> {
            let mut rng = chain_rng(cfg.seed, chain);
            let mut x = init_state(schedule, &mut rng, dim)?;
            let mut traj = cfg.keep_trajectories.then(|| vec![x.clone()]);
            let noise_scale = (2.0 * step).sqrt();
            for k in 0..iters {
                let p = cfg.prox.eval(c, lambda, 1.0, &x)?;
                let noise = standard_normal_vec(&mut rng, dim);
                for i in 0..dim {
                    let score = (p[i] - x[i]) / lambda;
                    x[i] += step * score + noise_scale * noise[i];
                }
                check_finite(&x, k)?;
                if let Some(t) = traj.as_mut() {
                    t.push(x.clone());
                }
            }
            Ok((x, traj))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(cfg, iters, Vec::new(), per_chain))
}

/// Per-step tabulated Stein score for the SDE baselines.
struct ScoreTable {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
}

impl ScoreTable {
    fn eval(&self, x: f64) -> f64 {
        let n = self.values.len() - 1;
        let pos = ((x - self.lo) / (self.hi - self.lo) * n as f64).clamp(0.0, n as f64);
        let i = (pos as usize).min(n - 1);
        let w = pos - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

fn run_score_sde(
    cfg: &SamplerConfig,
    c: &Composite,
    schedule: &Schedule,
    early_stop_lambda: f64,
    project: bool,
) -> Result<SampleBatch> {
    if c.dim() != 1 {
        return Err(Error::Oracle(
            "score-SDE baselines need a 1-D target (quadrature score)".into(),
        ));
    }
    if project && c.g.contains(&[0.0], 0.0).is_none() {
        return Err(Error::Domain("projected diffusion needs an indicator prior".into()));
    }
    let steps = schedule.num_steps();
    let grid = schedule.grid();
    let init_p = schedule.eval(schedule.horizon())?;
    let r0 = (init_p.mu * init_p.mu * init_p.lambda).sqrt();
    let span = 8.0 * r0 + 6.0;
    let logd = |u: f64| -c.potential(&[u]);
    let support = match c.g.bounding_box() {
        Some((lo, hi)) => (lo[0], hi[0]),
        None => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let pi0 = LogDensity1D { log_density: &logd, support };
    let mut stop_step = steps;
    let mut tables = Vec::new();
    for k in 0..steps {
        let tau = schedule.tau(k);
        let p = schedule.eval(tau)?;
        if p.lambda <= early_stop_lambda {
            stop_step = k;
            break;
        }
        let n = cfg.score_table_nodes.max(3);
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let x = -span + 2.0 * span * i as f64 / (n - 1) as f64;
                true_score_quadrature_with_tol(
                    &pi0,
                    schedule,
                    tau,
                    x,
                    cfg.score_table_panels,
                    1e-6,
                )
            })
            .collect::<Result<_>>()?;
        tables.push(ScoreTable { lo: -span, hi: span, values });
    }
    let mut warnings = Vec::new();
    if stop_step < steps {
        warnings.push(format!(
            "early stop at step {stop_step} (lambda <= {early_stop_lambda})"
        ));
    }
    let per_chain: Vec<(Vec<f64>, Option<Vec<Vec<f64>>>)> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain| -> Result<_> {
            let mut rng = chain_rng(cfg.seed, chain);
            let mut x = init_state(schedule, &mut rng, 1)?;
            let mut traj = cfg.keep_trajectories.then(|| vec![x.clone()]);
            for (k, table) in tables.iter().enumerate() {
                let tau = schedule.tau(k);
                let gamma = grid[k + 1] - grid[k];
                let a = schedule.drift_a(tau);
                let b2 = schedule.diffusion_b2(tau);
                let score = table.eval(x[0]);
                let z: f64 = rng.sample(StandardNormal);
                x[0] += gamma * (-a * x[0] + b2 * score) + (gamma * b2).sqrt() * z;
                if project {
                    x = c.g.prox(1.0, &x)?;
                }
                check_finite(&x, k)?;
                if let Some(t) = traj.as_mut() {
                    t.push(x.clone());
                }
            }
            Ok((x, traj))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(cfg, stop_step, warnings, per_chain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{ProxFriendly, Smooth};
    use crate::schedule::{ve_default, LambdaSpec, ScheduleKind};
    use nalgebra::{DMatrix, DVector};

    fn gaussian_target() -> Composite {
        Composite::new(
            Smooth::quadratic(
                DMatrix::from_row_slice(1, 1, &[1.0]),
                DVector::from_column_slice(&[0.0]),
            )
            .unwrap(),
            ProxFriendly::Zero { dim: 1 },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn seed_determinism_and_parallel_stability() {
        let c = gaussian_target();
        let s = ve_default(1.0, 20).unwrap();
        let cfg = SamplerConfig::new(SamplerKind::Pgm, 64, 99, ProxSource::JointExact);
        let a = run(&cfg, &c, &s).unwrap();
        let b = run(&cfg, &c, &s).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn different_chains_get_independent_noise() {
        let c = gaussian_target();
        let s = ve_default(1.0, 5).unwrap();
        let cfg = SamplerConfig::new(SamplerKind::Pgm, 4, 3, ProxSource::JointExact);
        let batch = run(&cfg, &c, &s).unwrap();
        assert_ne!(batch.samples[0], batch.samples[1]);
    }

    #[test]
    fn prox_point_ode_finds_quadratic_minimizer() {
        // U = beta/2 (x - m)^2 with minimizer at A^{-1}(-b) = 2
        let c = Composite::new(
            Smooth::quadratic(
                DMatrix::from_row_slice(1, 1, &[1.0]),
                DVector::from_column_slice(&[-2.0]),
            )
            .unwrap(),
            ProxFriendly::Zero { dim: 1 },
            1.0,
        )
        .unwrap();
        // the ladder must contract the (wide) stationary init all the way
        // down: horizon 4.5 leaves ~1e-8 of the initial error
        let s = Schedule::uniform(
            ScheduleKind::Ve { lambda: LambdaSpec::ExpAffine { rate: 10.0, offset: -8.0 } },
            4.5,
            450,
        )
        .unwrap();
        let cfg = SamplerConfig::new(SamplerKind::ProxPointOde, 3, 5, ProxSource::JointExact);
        let batch = run(&cfg, &c, &s).unwrap();
        for x in &batch.samples {
            let grad = c.f.grad(x)[0].abs();
            assert!(grad <= 1e-6, "endpoint gradient {grad}");
            assert!((x[0] - 2.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn prox_point_ode_zero_steps_returns_initialization() {
        let c = gaussian_target();
        let s = Schedule::with_grid(
            ScheduleKind::Ve { lambda: LambdaSpec::ExpAffine { rate: 10.0, offset: -8.0 } },
            1.0,
            vec![0.0],
        )
        .unwrap();
        let cfg = SamplerConfig::new(SamplerKind::ProxPointOde, 2, 7, ProxSource::JointExact);
        let batch = run(&cfg, &c, &s).unwrap();
        assert_eq!(batch.steps, 0);
        // matches a direct redraw from the same stream
        let mut rng = chain_rng(7, 0);
        let expect = init_state(&s, &mut rng, 1).unwrap();
        assert_eq!(batch.samples[0], expect);
    }

    #[test]
    fn em_agrees_with_exponential_interpolation_to_second_order() {
        // one deterministic step from the same state: difference is O(gamma^2)
        let c = gaussian_target();
        let x = vec![1.3];
        let mut diffs = Vec::new();
        let gammas = [0.04, 0.02, 0.01, 0.005];
        for &gamma in &gammas {
            let s = Schedule::with_grid(
                ScheduleKind::Ve { lambda: LambdaSpec::ExpAffine { rate: 10.0, offset: -8.0 } },
                1.0,
                vec![0.0, gamma],
            )
            .unwrap();
            let a = pgm_step_deterministic(&c, &s, 0, &x, &ProxSource::JointExact).unwrap();
            let b = em_step_deterministic(&c, &s, 0, &x, &ProxSource::JointExact).unwrap();
            diffs.push((a[0] - b[0]).abs());
        }
        let slope = crate::oracle::log_log_slope(&gammas, &diffs);
        assert!(slope >= 1.9, "Richardson slope {slope}, diffs {diffs:?}");
    }

    #[test]
    fn em_zero_step_limit_is_identity() {
        let c = gaussian_target();
        let x = vec![0.9];
        let s = Schedule::with_grid(
            ScheduleKind::Ve { lambda: LambdaSpec::ExpAffine { rate: 10.0, offset: -8.0 } },
            1.0,
            vec![0.0, 1e-9],
        )
        .unwrap();
        let b = em_step_deterministic(&c, &s, 0, &x, &ProxSource::JointExact).unwrap();
        assert!((b[0] - x[0]).abs() < 1e-7);
    }

    #[test]
    fn em_flags_overshoot_steps() {
        let c = gaussian_target();
        // two huge steps: gamma * b^2/sigma^2 = gamma * 10 >= 1
        let s = ve_default(1.0, 2).unwrap();
        let cfg = SamplerConfig::new(SamplerKind::PgmEm, 2, 1, ProxSource::JointExact);
        let batch = run(&cfg, &c, &s).unwrap();
        assert!(!batch.warnings.is_empty());
        assert!(batch.warnings[0].contains("overshoot"));
    }

    #[test]
    fn pula_stationary_variance_matches_smoothed_gaussian() {
        // U = x^2/2, fixed lambda: smoothed variance is 1 + lambda
        let c = gaussian_target();
        let s = ve_default(1.0, 10).unwrap();
        let lambda = 0.1;
        // 8000 independent chains, burn-in far past the O((1+lambda)/step)
        // mixing time, variance taken across final states
        let cfg = SamplerConfig::new(
            SamplerKind::Pula { step: 0.01, lambda, iters: 1500 },
            8000,
            21,
            ProxSource::JointExact,
        );
        let batch = run(&cfg, &c, &s).unwrap();
        let finals: Vec<f64> = batch.samples.iter().map(|x| x[0]).collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let var =
            finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / finals.len() as f64;
        let expect = 1.0 + lambda;
        assert!(
            (var - expect).abs() / expect < 0.05,
            "stationary variance {var} vs {expect}"
        );
    }

    #[test]
    fn divergence_reports_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = ProxNet::init(1, 4, true, &mut rng);
        // blow up the head so the forward pass overflows
        let json = net.to_json();
        let mut v = json.clone();
        v["layers"][2]["b"][0] = serde_json::json!(1e308);
        net = ProxNet::from_json(&v).unwrap();
        let c = Composite::new(
            Smooth::Zero { dim: 1 },
            ProxFriendly::Zero { dim: 1 },
            0.0,
        )
        .unwrap();
        let s = ve_default(1.0, 5).unwrap();
        let cfg = SamplerConfig::new(SamplerKind::Pgm, 1, 0, ProxSource::Learned(net));
        match run(&cfg, &c, &s) {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn score_sde_requires_one_dimension() {
        let c = Composite::new(
            Smooth::Zero { dim: 2 },
            ProxFriendly::Ball { dim: 2, radius: 1.0 },
            0.0,
        )
        .unwrap();
        let s = ve_default(1.0, 5).unwrap();
        let cfg = SamplerConfig::new(
            SamplerKind::AnalyticScoreSde { early_stop_lambda: 0.1 },
            2,
            0,
            ProxSource::Analytic,
        );
        assert!(matches!(run(&cfg, &c, &s), Err(Error::Oracle(_))));
    }
}
