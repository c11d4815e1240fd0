//! Command-line front end: `train`, `sample`, `experiment`, `verify`.
//!
//! Exit codes: 0 success, 1 usage or parse failure, 2 experiment-cell
//! failure, 3 verification failure.

use anyhow::Context;
use clap::{Parser, Subcommand};
use proxgen::config::{SampleFileConfig, TrainFileConfig};
use proxgen::experiment::{
    builtin, run_experiment, write_verify_report, ExperimentSpec, BUILTIN_NAMES,
};
use proxgen::oracle::metrics;
use proxgen::proxnet::{indicator_prior_sampler, train};
use proxgen::sampler::{run as run_sampler, SamplerConfig};
use proxgen::verify;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "proxgen", version, about = "Proximal generative modeling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a proximal network from a JSON config and write the parameter
    /// file plus a training-curve CSV.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output parameter file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one sampler from a JSON config; writes samples.csv and meta.json.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Run a built-in or file-defined experiment spec.
    Experiment {
        /// Built-in name or path to a spec JSON.
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
        /// Write per-cell histogram CSVs with this many bins.
        #[arg(long)]
        emit_hist: Option<usize>,
    },
    /// Run the invariant suite and write a pass/fail JSON report.
    Verify {
        #[arg(long, default_value = "verify_report.json")]
        out: PathBuf,
    },
}

fn cmd_train(config: &PathBuf, out: &PathBuf) -> anyhow::Result<()> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading train config {}", config.display()))?;
    let cfg: TrainFileConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing train config {}", config.display()))?;
    let g = cfg.prior.build()?;
    let schedule = cfg.schedule.build()?;
    let mut prior = indicator_prior_sampler(&g)?;
    let mut outcome = train(&cfg.train, &mut prior, &schedule)?;
    if let proxgen::potential::ProxFriendly::Ball { radius, .. } = &g {
        outcome.net.set_output_ball(Some(radius * 1.0));
    }
    fs::write(out, serde_json::to_string_pretty(&outcome.net.to_json())?)?;
    let curve_path = out.with_extension("curve.csv");
    let mut curve = String::from("epoch,loss\n");
    for (i, l) in outcome.loss_trace.iter().enumerate() {
        curve.push_str(&format!("{i},{l:.17e}\n"));
    }
    fs::write(&curve_path, curve)?;
    eprintln!(
        "trained {} epochs; parameters -> {}, curve -> {}",
        outcome.loss_trace.len(),
        out.display(),
        curve_path.display()
    );
    Ok(())
}

fn cmd_sample(
    config: &PathBuf,
    out: &PathBuf,
    seed: Option<u64>,
    chains: Option<usize>,
) -> anyhow::Result<()> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading sample config {}", config.display()))?;
    let cfg: SampleFileConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing sample config {}", config.display()))?;
    let composite = cfg.potential.build()?;
    let schedule = cfg.schedule.build()?;
    let kind = cfg.sampler.kind()?;
    let prox = match cfg.sampler.prox.as_str() {
        "analytic" => proxgen::sampler::ProxSource::Analytic,
        "joint_exact" => proxgen::sampler::ProxSource::JointExact,
        "learned" => {
            let path = cfg.sampler.params.as_ref().context("learned prox needs params path")?;
            let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
            proxgen::sampler::ProxSource::Learned(proxgen::proxnet::ProxNet::from_json(&value)?)
        }
        other => anyhow::bail!("unknown prox source {other:?}"),
    };
    let sampler_cfg = SamplerConfig::new(
        kind,
        chains.unwrap_or(cfg.chains),
        seed.unwrap_or(cfg.seed),
        prox,
    );
    let batch = run_sampler(&sampler_cfg, &composite, &schedule)?;
    fs::create_dir_all(out)?;
    let mut csv = String::new();
    let dim = composite.dim();
    csv.push_str(&(0..dim).map(|i| format!("x{i}")).collect::<Vec<_>>().join(","));
    csv.push('\n');
    for row in &batch.samples {
        csv.push_str(&row.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    fs::write(out.join("samples.csv"), csv)?;
    let m = metrics(&batch, &composite, None);
    let meta = serde_json::json!({
        "sampler": batch.sampler,
        "prox_source": batch.prox_source,
        "seed": batch.seed,
        "steps": batch.steps,
        "chains": batch.samples.len(),
        "feasibility": m.feasibility,
        "warnings": batch.warnings,
    });
    fs::write(out.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    eprintln!("wrote {} samples to {}", batch.samples.len(), out.display());
    Ok(())
}

fn cmd_experiment(
    spec_arg: &str,
    out: &PathBuf,
    seed: Option<u64>,
    chains: Option<usize>,
    emit_hist: Option<usize>,
) -> anyhow::Result<u8> {
    let mut spec: ExperimentSpec = match builtin(spec_arg) {
        Some(s) => s,
        None => {
            let text = fs::read_to_string(spec_arg)
                .with_context(|| format!("no builtin named {spec_arg:?} and no such file; builtins: {BUILTIN_NAMES:?}"))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing experiment spec {spec_arg}"))?
        }
    };
    if let Some(seed) = seed {
        spec.seeds = vec![seed];
    }
    if let Some(chains) = chains {
        spec.chains = chains;
    }
    if let Some(bins) = emit_hist {
        let (lo, hi) = match &spec.histogram {
            Some(h) => (h.lo, h.hi),
            None => (-2.0, 2.0),
        };
        spec.histogram = Some(proxgen::experiment::HistogramSpec { bins, lo, hi });
    }
    let report = run_experiment(&spec, Some(out))?;
    for cell in &report.cells {
        let status = if cell.error.is_some() { "FAIL" } else { "ok" };
        eprintln!(
            "[{status}] {} seed {}: feasibility {:?} gap {:?} w1 {:?}",
            cell.label,
            cell.seed,
            cell.metrics.as_ref().map(|m| m.feasibility),
            cell.metrics.as_ref().and_then(|m| m.optimality_gap),
            cell.w1,
        );
    }
    let failed = report.failed_cells();
    eprintln!(
        "experiment {} finished: {}/{} cells ok; report under {}",
        report.name,
        report.cells.len() - failed,
        report.cells.len(),
        out.join(&report.name).display()
    );
    Ok(if failed > 0 { 2 } else { 0 })
}

fn cmd_verify(out: &PathBuf) -> anyhow::Result<u8> {
    let checks = verify::run_all()?;
    write_verify_report(&checks, out)?;
    let mut failed = 0;
    for c in &checks {
        let status = if c.passed { "pass" } else { "FAIL" };
        eprintln!("[{status}] {} (margin {:.3e})", c.name, c.margin);
        if !c.passed {
            failed += 1;
        }
    }
    eprintln!("verification report -> {}", out.display());
    Ok(if failed > 0 { 3 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train { config, out } => cmd_train(config, out).map(|_| 0),
        Command::Sample { config, out, seed, chains } => {
            cmd_sample(config, out, *seed, *chains).map(|_| 0)
        }
        Command::Experiment { spec, out, seed, chains, emit_hist } => {
            cmd_experiment(spec, out, *seed, *chains, *emit_hist)
        }
        Command::Verify { out } => cmd_verify(out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
