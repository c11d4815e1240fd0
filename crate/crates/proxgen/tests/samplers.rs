//! Integration checks for sampler behavior and oracle calibration that need
//! full end-to-end runs.

use proxgen::config::{PotentialConfig, ProxConfig, ScheduleConfig, SmoothConfig};
use proxgen::experiment::{builtin, run_experiment, train_experiment_net};
use proxgen::oracle::{
    empirical_w1_density, grid_prox, projected_gradient_optimum, LogDensity1D, QuantileTable,
};
use proxgen::potential::ProxFriendly;
use proxgen::sampler::{run, ProxSource, SamplerConfig, SamplerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_quantiles() -> QuantileTable {
    let logd = |u: f64| -0.5 * u * u;
    let pi0 = LogDensity1D { log_density: &logd, support: (f64::NEG_INFINITY, f64::INFINITY) };
    QuantileTable::from_log_density(&pi0, (-12.0, 12.0), 20_000).unwrap()
}

// Monte-Carlo self-calibration of the 1-D Wasserstein oracle: the mean W1 of
// 1e4 standard-normal draws against the true quantiles stays below 0.02
// across 20 seeds.
#[test]
fn w1_monte_carlo_calibration() {
    let table = gaussian_quantiles();
    let mut total = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        total += empirical_w1_density(&xs, &table).unwrap();
    }
    let mean = total / 20.0;
    assert!(mean <= 0.02, "mean W1 self-calibration {mean}");
}

// Effectively unconstrained Gaussian target (the interval never binds):
// proximal diffusion and both score-SDE baselines match N(0,1) to W1 <= 0.05
// at 1e4 chains.
#[test]
fn unconstrained_gaussian_all_samplers_agree() {
    let potential = PotentialConfig {
        f: SmoothConfig::Quadratic { a: vec![vec![1.0]], b: vec![0.0] },
        g: ProxConfig::Interval { dim: 1, lo: -50.0, hi: 50.0 },
        beta: 1.0,
    };
    let c = potential.build().unwrap();
    let s = ScheduleConfig::ve(1.0, 100).build().unwrap();
    let table = gaussian_quantiles();
    for kind in [
        SamplerKind::Pgm,
        SamplerKind::AnalyticScoreSde { early_stop_lambda: 1e-4 },
        SamplerKind::ProjectedDiffusion { early_stop_lambda: 1e-4 },
    ] {
        let name = kind.name();
        let cfg = SamplerConfig::new(kind, 10_000, 3, ProxSource::JointExact);
        let batch = run(&cfg, &c, &s).unwrap();
        let xs: Vec<f64> = batch.samples.iter().map(|x| x[0]).collect();
        let w1 = empirical_w1_density(&xs, &table).unwrap();
        assert!(w1 <= 0.05, "{name}: W1 {w1}");
    }
}

// Euler-Maruyama keeps strictly more mass outside the constraint than the
// exponential-interpolation sampler at equal step counts.
#[test]
fn em_leaks_more_than_exponential_interpolation() {
    let spec = builtin("truncated-normal").unwrap();
    let c = spec.potential.build().unwrap();
    let s = spec.schedule.build().unwrap();
    let pgm = run(
        &SamplerConfig::new(SamplerKind::Pgm, 10_000, 5, ProxSource::JointExact),
        &c,
        &s,
    )
    .unwrap();
    let em = run(
        &SamplerConfig::new(SamplerKind::PgmEm, 10_000, 5, ProxSource::JointExact),
        &c,
        &s,
    )
    .unwrap();
    let inside = |b: &proxgen::sampler::SampleBatch| {
        b.samples
            .iter()
            .filter(|x| x[0].abs() <= 1.0 + 1e-9)
            .count() as f64
            / b.samples.len() as f64
    };
    let (pi, ei) = (inside(&pgm), inside(&em));
    assert!(ei < pi, "EM inside {ei} not strictly below {pi}");
}

// Noise-free proximal-point recursion on the constrained quadratic lands at
// the projected-gradient optimum.
#[test]
fn prox_point_ode_matches_projected_gradient_oracle() {
    let mut spec = builtin("table2-beta-sweep").unwrap();
    spec.schedule.horizon = 3.0;
    let c = spec.potential.build().unwrap();
    let s = spec.schedule.build_with_steps(300).unwrap();
    let oracle = projected_gradient_optimum(&c).unwrap();
    let cfg = SamplerConfig::new(SamplerKind::ProxPointOde, 4, 11, ProxSource::Analytic);
    let batch = run(&cfg, &c, &s).unwrap();
    for x in &batch.samples {
        let d: f64 = x
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(d <= 1e-3, "endpoint {x:?} vs oracle {oracle:?} (d={d})");
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1.0 + 1e-9, "endpoint must be feasible");
    }
}

// The ball-prior network stays near the constraint set on a radius-3 box.
#[test]
fn trained_ball_prior_net_is_radially_bounded() {
    let spec = builtin("table1-feasibility").unwrap();
    let (net, _) = train_experiment_net(&spec).unwrap().unwrap();
    let s = spec.schedule.build().unwrap();
    for lam_t in [0.1, 0.6, 1.1] {
        let lam = s.eval(lam_t).unwrap().lambda;
        for i in 0..24 {
            let ang = std::f64::consts::TAU * i as f64 / 24.0;
            for r in [0.5, 1.5, 3.0] {
                let x = [r * ang.cos(), r * ang.sin()];
                let out = net.forward(&x, lam).unwrap();
                let norm = (out[0] * out[0] + out[1] * out[1]).sqrt();
                assert!(norm <= 1.05, "output norm {norm} at r={r}, lambda={lam:.3}");
            }
        }
    }
}

// Huber value of the l1 envelope against the brute-force grid argmin.
#[test]
fn l1_envelope_matches_grid_argmin() {
    let l1 = ProxFriendly::L1 { dim: 1, weight: 1.0 };
    let lambda = 1.0;
    let x = [0.5];
    let p = grid_prox(|u| l1.eval(u), lambda, &x, 1e-4, (&[-2.0], &[2.0])).unwrap();
    let env = l1.eval(&p) + (p[0] - x[0]).powi(2) / (2.0 * lambda);
    assert!((env - 0.125).abs() <= 1e-4, "grid envelope {env}");
    assert!((l1.moreau_envelope(lambda, &x).unwrap() - env).abs() <= 1e-4);
}

// Learned interval prior cells reached through the experiment runner: the
// trained network used inside the sampler keeps the truncated-normal study
// healthy end to end.
#[test]
fn learned_prox_works_inside_the_sampler() {
    let mut spec = builtin("truncated-normal").unwrap();
    spec.chains = 2000;
    spec.cells.retain(|c| c.label == "pgm");
    spec.cells[0].sampler.prox = "learned".into();
    let mut train_cfg = proxgen::proxnet::TrainConfig::new(1);
    train_cfg.epochs = 2000;
    train_cfg.seed = 2;
    spec.train = Some(train_cfg);
    let report = run_experiment(&spec, None).unwrap();
    assert_eq!(report.failed_cells(), 0);
    let m = report.cells[0].metrics.as_ref().unwrap();
    assert!(m.feasibility >= 0.95, "learned-prox feasibility {}", m.feasibility);
}
