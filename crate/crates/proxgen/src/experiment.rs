//! Config-driven experiment runner: builds the target and schedule, trains a
//! proximal network when requested, runs every (cell, seed) combination, and
//! writes samples, summaries, and a JSON report.

use crate::config::{PotentialConfig, ProxConfig, SamplerCellConfig, ScheduleConfig, SmoothConfig};
use crate::error::{Error, Result};
use crate::oracle::{
    empirical_w1_density, metrics, projected_gradient_optimum, LogDensity1D, Metrics,
    QuantileTable,
};
use crate::potential::Composite;
use crate::proxnet::{indicator_prior_sampler, train, ProxNet, TrainConfig};
use crate::sampler::{run, ProxSource, SampleBatch, SamplerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSpec {
    /// Directory label; also names the sampler column in the summary.
    pub label: String,
    pub sampler: SamplerCellConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_override: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_override: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub potential: PotentialConfig,
    pub schedule: ScheduleConfig,
    pub cells: Vec<CellSpec>,
    pub seeds: Vec<u64>,
    pub chains: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    /// Schedule used when training the proximal network; the lambda-channel
    /// conditioning makes the operator usable under any horizon. Defaults to
    /// the sampling schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_schedule: Option<ScheduleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<HistogramSpec>,
    /// Compute W1 against the target density (one-dimensional targets).
    #[serde(default)]
    pub w1_against_target: bool,
    /// Solve for the constrained optimum and report optimality gaps.
    #[serde(default)]
    pub compute_optimum: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub label: String,
    pub sampler: String,
    pub prox: String,
    pub seed: u64,
    pub steps: usize,
    pub chains: usize,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram_mode: Option<f64>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub chains: usize,
    pub spec: ExperimentSpec,
    pub cells: Vec<CellResult>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

/// Histogram of 1-D samples; returns counts and the center of the tallest bin.
pub fn histogram(samples: &[f64], spec: &HistogramSpec) -> (Vec<usize>, f64) {
    let mut counts = vec![0usize; spec.bins];
    let width = (spec.hi - spec.lo) / spec.bins as f64;
    for &x in samples {
        if x < spec.lo || x > spec.hi {
            continue;
        }
        let i = (((x - spec.lo) / width) as usize).min(spec.bins - 1);
        counts[i] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .max_by_key(|(_, &c)| c)
        .map(|(i, _)| i)
        .unwrap_or(0);
    (counts.clone(), spec.lo + (best as f64 + 0.5) * width)
}

fn build_prox_source(
    cell: &SamplerCellConfig,
    trained: Option<&ProxNet>,
) -> Result<ProxSource> {
    match cell.prox.as_str() {
        "analytic" => Ok(ProxSource::Analytic),
        "joint_exact" => Ok(ProxSource::JointExact),
        "learned" => match (trained, &cell.params) {
            (Some(net), _) => Ok(ProxSource::Learned(net.clone())),
            (None, Some(path)) => {
                let text = fs::read_to_string(path)?;
                let value: serde_json::Value = serde_json::from_str(&text)?;
                Ok(ProxSource::Learned(ProxNet::from_json(&value)?))
            }
            (None, None) => Err(Error::Config(
                "cell asks for a learned prox but no training block or params file is given"
                    .into(),
            )),
        },
        other => Err(Error::Config(format!("unknown prox source {other:?}"))),
    }
}

fn target_quantiles(c: &Composite) -> Result<QuantileTable> {
    let support = match c.g.bounding_box() {
        Some((lo, hi)) => (lo[0], hi[0]),
        None => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let box_ = (support.0.max(-16.0), support.1.min(16.0));
    let logd = |u: f64| -c.potential(&[u]);
    let pi0 = LogDensity1D { log_density: &logd, support };
    QuantileTable::from_log_density(&pi0, box_, 10_000)
}

fn write_samples_csv(path: &Path, batch: &SampleBatch) -> Result<()> {
    let mut out = String::new();
    let dim = batch.samples.first().map_or(0, |x| x.len());
    let header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &batch.samples {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Trains the experiment's proximal network on the prior of its potential.
pub fn train_experiment_net(spec: &ExperimentSpec) -> Result<Option<(ProxNet, Vec<f64>)>> {
    let Some(train_cfg) = &spec.train else { return Ok(None) };
    let g = spec.potential.g.build()?;
    let schedule = spec.train_schedule.as_ref().unwrap_or(&spec.schedule).build()?;
    let mut prior = indicator_prior_sampler(&g)?;
    let mut outcome = train(train_cfg, &mut prior, &schedule)?;
    if let crate::potential::ProxFriendly::Ball { radius, .. } = &g {
        outcome.net.set_output_ball(Some(*radius));
    }
    Ok(Some((outcome.net, outcome.loss_trace)))
}

pub fn run_experiment(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<ExperimentReport> {
    if spec.seeds.is_empty() {
        return Err(Error::Config("experiment needs at least one seed".into()));
    }
    let base = spec.potential.build()?;
    let mut notes = Vec::new();
    let trained = train_experiment_net(spec)?;
    if let (Some((net, trace)), Some(dir)) = (&trained, out_dir) {
        let root = dir.join(&spec.name);
        fs::create_dir_all(&root)?;
        fs::write(
            root.join("proxnet.json"),
            serde_json::to_string_pretty(&net.to_json())?,
        )?;
        let mut curve = String::from("epoch,loss\n");
        for (i, l) in trace.iter().enumerate() {
            curve.push_str(&format!("{i},{l:.17e}\n"));
        }
        fs::write(root.join("training_curve.csv"), curve)?;
    }
    if base.g.diameter().is_infinite() {
        notes.push("dom(g) unbounded: feasibility is trivially 1".into());
    }
    let optimum = if spec.compute_optimum {
        Some(projected_gradient_optimum(&base)?)
    } else {
        None
    };
    let quantiles = if spec.w1_against_target && base.dim() == 1 {
        Some(target_quantiles(&base)?)
    } else {
        None
    };

    let mut cells = Vec::new();
    for cell in &spec.cells {
        for &seed in &spec.seeds {
            let result = run_cell(spec, cell, seed, &base, trained.as_ref().map(|t| &t.0),
                optimum.as_deref(), quantiles.as_ref(), out_dir);
            cells.push(match result {
                Ok(r) => r,
                Err(e) => CellResult {
                    label: cell.label.clone(),
                    sampler: cell.sampler.kind.clone(),
                    prox: cell.sampler.prox.clone(),
                    seed,
                    steps: 0,
                    chains: spec.chains,
                    beta: cell.beta_override.unwrap_or(spec.potential.beta),
                    metrics: None,
                    w1: None,
                    histogram_mode: None,
                    warnings: Vec::new(),
                    error: Some(e.to_string()),
                },
            });
        }
    }

    let report = ExperimentReport {
        name: spec.name.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: spec.seeds.clone(),
        chains: spec.chains,
        spec: spec.clone(),
        cells,
        notes,
    };
    if let Some(dir) = out_dir {
        let root = dir.join(&spec.name);
        fs::create_dir_all(&root)?;
        fs::write(root.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        let mut summary = String::from(
            "experiment,label,sampler,prox,seed,steps,chains,beta,feasibility,optimality_gap,optimality_gap_point,w1,histogram_mode,error\n",
        );
        let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.10e}"));
        for c in &report.cells {
            summary.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                report.name,
                c.label,
                c.sampler,
                c.prox,
                c.seed,
                c.steps,
                c.chains,
                c.beta,
                c.metrics.as_ref().map_or(String::new(), |m| format!("{:.8}", m.feasibility)),
                fmt_opt(c.metrics.as_ref().and_then(|m| m.optimality_gap)),
                fmt_opt(c.metrics.as_ref().and_then(|m| m.optimality_gap_point)),
                fmt_opt(c.w1),
                fmt_opt(c.histogram_mode),
                c.error.clone().unwrap_or_default(),
            ));
        }
        fs::write(root.join("summary.csv"), summary)?;
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    spec: &ExperimentSpec,
    cell: &CellSpec,
    seed: u64,
    base: &Composite,
    trained: Option<&ProxNet>,
    optimum: Option<&[f64]>,
    quantiles: Option<&QuantileTable>,
    out_dir: Option<&Path>,
) -> Result<CellResult> {
    let beta = cell.beta_override.unwrap_or(spec.potential.beta);
    let composite = if beta == base.beta {
        base.clone()
    } else {
        Composite::new(base.f.clone(), base.g.clone(), beta)?
    };
    let steps = cell.steps_override.unwrap_or(spec.schedule.steps);
    let schedule = spec.schedule.build_with_steps(steps)?;
    let kind = cell.sampler.kind()?;
    let prox = build_prox_source(&cell.sampler, trained)?;
    let cfg = SamplerConfig::new(kind, spec.chains, seed, prox);
    let batch = run(&cfg, &composite, &schedule)?;
    let m = metrics(&batch, &composite, optimum);
    let w1 = match quantiles {
        Some(q) if composite.dim() == 1 => {
            let xs: Vec<f64> = batch.samples.iter().map(|x| x[0]).collect();
            Some(empirical_w1_density(&xs, q)?)
        }
        _ => None,
    };
    let (hist_counts, hist_mode) = match (&spec.histogram, composite.dim()) {
        (Some(h), 1) => {
            let xs: Vec<f64> = batch.samples.iter().map(|x| x[0]).collect();
            let (counts, mode) = histogram(&xs, h);
            (Some(counts), Some(mode))
        }
        _ => (None, None),
    };
    if let Some(dir) = out_dir {
        let cell_dir = dir.join(&spec.name).join(&cell.label).join(seed.to_string());
        fs::create_dir_all(&cell_dir)?;
        write_samples_csv(&cell_dir.join("samples.csv"), &batch)?;
        let meta = serde_json::json!({
            "sampler": batch.sampler,
            "prox_source": batch.prox_source,
            "seed": batch.seed,
            "steps": batch.steps,
            "chains": batch.samples.len(),
            "beta": beta,
            "warnings": batch.warnings,
        });
        fs::write(cell_dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        if let (Some(counts), Some(h)) = (&hist_counts, &spec.histogram) {
            let mut csv = String::from("bin_center,count\n");
            let width = (h.hi - h.lo) / h.bins as f64;
            for (i, c) in counts.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", h.lo + (i as f64 + 0.5) * width, c));
            }
            fs::write(cell_dir.join("histogram.csv"), csv)?;
        }
    }
    Ok(CellResult {
        label: cell.label.clone(),
        sampler: batch.sampler.clone(),
        prox: batch.prox_source.clone(),
        seed,
        steps: batch.steps,
        chains: batch.samples.len(),
        beta,
        metrics: Some(m),
        w1,
        histogram_mode: hist_mode,
        warnings: batch.warnings.clone(),
        error: None,
    })
}

/// Draws the random constrained-quadratic instance used by the feasibility
/// and temperature studies: eigenvalues log-uniform in [0.5, 2], a random
/// rotation, offset uniform in [-1, 1]^2, unit ball constraint. Instances are
/// redrawn until the unconstrained minimizer falls outside the ball (norm at
/// least `activity_threshold`) so the constraint is active.
pub fn random_constrained_instance(instance_seed: u64, activity_threshold: f64) -> PotentialConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    loop {
        let e0 = (rng.gen_range(0.5_f64.ln()..2.0_f64.ln())).exp();
        let e1 = (rng.gen_range(0.5_f64.ln()..2.0_f64.ln())).exp();
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (c, s) = (th.cos(), th.sin());
        // A = R' diag(e) R
        let a = [
            [c * c * e0 + s * s * e1, c * s * (e1 - e0)],
            [c * s * (e1 - e0), s * s * e0 + c * c * e1],
        ];
        let b = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        // unconstrained minimizer -A^{-1} b
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let mx = -(a[1][1] * b[0] - a[0][1] * b[1]) / det;
        let my = -(-a[1][0] * b[0] + a[0][0] * b[1]) / det;
        if (mx * mx + my * my).sqrt() >= activity_threshold {
            return PotentialConfig {
                f: SmoothConfig::Quadratic {
                    a: vec![vec![a[0][0], a[0][1]], vec![a[1][0], a[1][1]]],
                    b: b.to_vec(),
                },
                g: ProxConfig::Ball { dim: 2, r: 1.0 },
                beta: 10.0,
            };
        }
    }
}

/// Instance convention shared by the feasibility and temperature studies:
/// seed 59 with activity threshold 1.01. The constraint is active but weakly
/// binding (boundary multiplier about 0.03), the regime in which the
/// optimality-gap magnitudes of the reference tables arise.
fn table_instance() -> PotentialConfig {
    random_constrained_instance(59, 1.01)
}

fn table_train_config() -> TrainConfig {
    let mut cfg = TrainConfig::new(2);
    cfg.epochs = 3000;
    cfg.seed = 1;
    cfg.zeta = crate::proxnet::ZetaSchedule::TwoPhase {
        start: 3.0,
        knee: 0.1,
        floor: 0.0707,
        knee_frac: 0.5,
    };
    cfg
}

fn cell(label: &str, kind: &str, prox: &str) -> CellSpec {
    CellSpec {
        label: label.into(),
        sampler: SamplerCellConfig {
            kind: kind.into(),
            prox: prox.into(),
            early_stop_lambda: None,
            pula_step: None,
            pula_lambda: None,
            pula_iters: None,
            params: None,
        },
        steps_override: None,
        beta_override: None,
    }
}

pub const BUILTIN_NAMES: [&str; 4] =
    ["truncated-normal", "table1-feasibility", "table2-beta-sweep", "w1-vs-K"];

/// Built-in experiment specs reproducing the toy studies.
pub fn builtin(name: &str) -> Option<ExperimentSpec> {
    match name {
        "truncated-normal" => {
            let potential = PotentialConfig {
                f: SmoothConfig::Quadratic { a: vec![vec![1.0]], b: vec![0.0] },
                g: ProxConfig::Interval { dim: 1, lo: -1.0, hi: 1.0 },
                beta: 10.0,
            };
            // the classical-score baselines stop while the smoothing width is
            // still macroscopic, which is the early-stopping bias this study
            // isolates
            let mut sde = cell("analytic_score_sde", "analytic_score_sde", "analytic");
            sde.sampler.early_stop_lambda = Some(0.3);
            let mut proj = cell("projected_diffusion", "projected_diffusion", "analytic");
            proj.sampler.early_stop_lambda = Some(0.3);
            let mut pula = cell("pula", "pula", "joint_exact");
            pula.sampler.pula_step = Some(0.005);
            pula.sampler.pula_lambda = Some(0.05);
            pula.sampler.pula_iters = Some(100);
            Some(ExperimentSpec {
                name: "truncated-normal".into(),
                potential,
                schedule: ScheduleConfig::ve(1.0, 100),
                cells: vec![cell("pgm", "pgm", "joint_exact"), sde, proj, pula],
                seeds: vec![1],
                chains: 10_000,
                train: None,
                train_schedule: None,
                histogram: Some(HistogramSpec { bins: 80, lo: -2.0, hi: 2.0 }),
                w1_against_target: true,
                compute_optimum: false,
            })
        }
        "table1-feasibility" => {
            let mut cells = Vec::new();
            for k in [0usize, 1, 5, 10, 20] {
                let mut c = cell(&format!("pgm_learned_k{k}"), "pgm", "learned");
                c.steps_override = Some(k);
                cells.push(c);
                let mut c = cell(&format!("pgm_analytic_k{k}"), "pgm", "analytic");
                c.steps_override = Some(k);
                cells.push(c);
            }
            Some(ExperimentSpec {
                name: "table1-feasibility".into(),
                potential: table_instance(),
                schedule: ScheduleConfig::ve(2.0, 20),
                cells,
                seeds: vec![1],
                chains: 10_000,
                train: Some(table_train_config()),
                train_schedule: None,
                histogram: None,
                w1_against_target: false,
                compute_optimum: true,
            })
        }
        "table2-beta-sweep" => {
            let mut cells = Vec::new();
            for beta in [0.0, 0.1, 1.0, 2.0, 10.0] {
                let mut c = cell(&format!("pgm_learned_beta{beta}"), "pgm", "learned");
                c.beta_override = Some(beta);
                c.steps_override = Some(10);
                cells.push(c);
                let mut c = cell(&format!("pgm_analytic_beta{beta}"), "pgm", "analytic");
                c.beta_override = Some(beta);
                c.steps_override = Some(10);
                cells.push(c);
            }
            Some(ExperimentSpec {
                name: "table2-beta-sweep".into(),
                potential: table_instance(),
                schedule: ScheduleConfig::ve(2.0, 10),
                cells,
                seeds: vec![1],
                chains: 10_000,
                train: Some(table_train_config()),
                train_schedule: None,
                histogram: None,
                w1_against_target: false,
                compute_optimum: true,
            })
        }
        "w1-vs-K" => {
            let potential = PotentialConfig {
                f: SmoothConfig::Quadratic { a: vec![vec![1.0]], b: vec![0.0] },
                g: ProxConfig::Zero { dim: 1 },
                beta: 1.0,
            };
            let mut cells = Vec::new();
            for k in [10usize, 20, 40, 80, 160] {
                let mut c = cell(&format!("pgm_k{k}"), "pgm", "joint_exact");
                c.steps_override = Some(k);
                cells.push(c);
            }
            Some(ExperimentSpec {
                name: "w1-vs-K".into(),
                potential,
                schedule: ScheduleConfig::ve(1.0, 100),
                cells,
                seeds: vec![1],
                chains: 10_000,
                train: None,
                train_schedule: None,
                histogram: None,
                w1_against_target: true,
                compute_optimum: false,
            })
        }
        _ => None,
    }
}

/// Writes a verification report produced by [`crate::verify::run_all`].
pub fn write_verify_report(checks: &[crate::verify::Check], path: &Path) -> Result<()> {
    let passed = checks.iter().filter(|c| c.passed).count();
    let report = serde_json::json!({
        "code_version": env!("CARGO_PKG_VERSION"),
        "passed": passed,
        "failed": checks.len() - passed,
        "checks": checks,
    });
    let mut file = fs::File::create(path)?;
    file.write_all(serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(())
}
