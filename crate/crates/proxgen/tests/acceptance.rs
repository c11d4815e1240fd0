//! Acceptance suite: one test per exit criterion, each printing a single
//! PASS/FAIL line with its measurements. Tests take a global lock so the
//! stated runtime budgets are measured without cross-test contention.
//!
//! Two known-red checks are asserted faithfully rather than loosened: the
//! K=1 cell of the feasibility table and the optimality-gap band of the
//! temperature sweep. Both reflect properties of the reference pipeline's
//! network that a desk-scale MLP does not reproduce; the measured values and
//! the analysis are printed alongside the failure.

use proxgen::experiment::{builtin, run_experiment};
use proxgen::oracle::log_log_slope;
use proxgen::potential::ProxFriendly;
use proxgen::proxnet::{indicator_prior_sampler, train, TrainConfig};
use proxgen::schedule::ve_default;
use proxgen::verify;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

fn lock() -> MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|e| e.into_inner())
}

struct Criterion {
    label: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(label: &'static str) -> Self {
        Criterion { label, failures: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "{}: {verdict} — ok: [{}]{}",
            self.label,
            self.notes.join("; "),
            if self.failures.is_empty() {
                String::new()
            } else {
                format!(" — failed: [{}]", self.failures.join("; "))
            }
        );
        assert!(
            self.failures.is_empty(),
            "{} failed: {}",
            self.label,
            self.failures.join("; ")
        );
    }
}

#[test]
fn criterion_1_truncated_normal_study() {
    let _guard = lock();
    let start = Instant::now();
    let mut crit = Criterion::new("criterion 1 (truncated-normal study)");
    let spec = builtin("truncated-normal").unwrap();
    let report = run_experiment(&spec, None).unwrap();
    let cell = |label: &str| {
        report
            .cells
            .iter()
            .find(|c| c.label == label)
            .unwrap_or_else(|| panic!("missing cell {label}"))
    };
    let pgm = cell("pgm");
    let sde = cell("analytic_score_sde");
    let pula = cell("pula");
    let pgm_inside = pgm.metrics.as_ref().unwrap().feasibility;
    let sde_inside = sde.metrics.as_ref().unwrap().feasibility;
    let mode = pgm.histogram_mode.unwrap();
    crit.check(pgm_inside >= 0.98, format!("inside-ratio {pgm_inside:.4} >= 0.98"));
    crit.check(mode.abs() <= 0.1, format!("histogram mode {mode:.3} within 0.1"));
    crit.check(
        sde_inside < pgm_inside,
        format!("score-SDE inside {sde_inside:.4} strictly below {pgm_inside:.4}"),
    );
    crit.check(
        pula.w1.unwrap() > pgm.w1.unwrap(),
        format!(
            "Langevin W1 {:.4} above proximal-diffusion W1 {:.4} at equal score evaluations",
            pula.w1.unwrap(),
            pgm.w1.unwrap()
        ),
    );
    // boundary spikes of the projected baseline: the two bins meeting each
    // boundary hold the projection atoms and must stand out over the next
    // inner bin on both sides
    {
        let spec2 = spec.clone();
        let hist = spec2.histogram.as_ref().unwrap();
        // re-run just the projected cell with histogram counts in hand
        let composite = spec2.potential.build().unwrap();
        let schedule = spec2.schedule.build().unwrap();
        let cfg = proxgen::sampler::SamplerConfig::new(
            proxgen::sampler::SamplerKind::ProjectedDiffusion { early_stop_lambda: 0.3 },
            spec2.chains,
            1,
            proxgen::sampler::ProxSource::Analytic,
        );
        let batch = proxgen::sampler::run(&cfg, &composite, &schedule).unwrap();
        let xs: Vec<f64> = batch.samples.iter().map(|x| x[0]).collect();
        let (counts, _) = proxgen::experiment::histogram(&xs, hist);
        let width = (hist.hi - hist.lo) / hist.bins as f64;
        let bin_at = |x: f64| (((x - hist.lo) / width) as usize).min(hist.bins - 1);
        let left = counts[bin_at(-1.0 - 0.5 * width)] + counts[bin_at(-1.0 + 0.5 * width)];
        let left_ref = counts[bin_at(-1.0 + 1.5 * width)];
        let right = counts[bin_at(1.0 - 0.5 * width)] + counts[bin_at(1.0 + 0.5 * width)];
        let right_ref = counts[bin_at(1.0 - 1.5 * width)];
        crit.check(
            left as f64 > 1.5 * left_ref as f64 && right as f64 > 1.5 * right_ref as f64,
            format!(
                "projected-diffusion boundary spikes {left}/{left_ref} and {right}/{right_ref} (>1.5x)"
            ),
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    crit.check(elapsed <= 30.0, format!("runtime {elapsed:.1}s <= 30s"));
    crit.finish();
}

#[test]
fn criterion_2_feasibility_table() {
    let _guard = lock();
    let start = Instant::now();
    let mut crit = Criterion::new("criterion 2 (feasibility vs step count)");
    let report = run_experiment(&builtin("table1-feasibility").unwrap(), None).unwrap();
    let expected = [(0usize, 0.00), (1, 7.43), (5, 97.43), (10, 99.61), (20, 99.73)];
    let mut column = Vec::new();
    for (k, paper) in expected {
        let cell = report
            .cells
            .iter()
            .find(|c| c.label == format!("pgm_learned_k{k}"))
            .unwrap();
        let feas = cell.metrics.as_ref().unwrap().feasibility * 100.0;
        column.push(feas);
        crit.check(
            (feas - paper).abs() <= 3.0,
            format!("K={k}: {feas:.2}% vs {paper:.2}% (+-3)"),
        );
    }
    let monotone = column.windows(2).all(|w| w[1] >= w[0] - 1.0);
    crit.check(monotone, format!("monotone nondecreasing within 1 point: {column:?}"));
    let elapsed = start.elapsed().as_secs_f64();
    crit.check(elapsed <= 60.0, format!("runtime {elapsed:.1}s <= 60s"));
    if !crit.failures.is_empty() {
        println!(
            "criterion 2 analysis: a single exponential-interpolation step contracts the \
             initialization onto the prox image, so the K=1 feasibility is a property of the \
             operator's off-distribution outputs (projection gives ~50%, this MLP ~100%); the \
             reference value 7.43% reflects the reference network's private extrapolation and \
             is unreachable by any faithful operator here. See the decisions ledger."
        );
    }
    crit.finish();
}

#[test]
fn criterion_3_temperature_sweep() {
    let _guard = lock();
    let start = Instant::now();
    let mut crit = Criterion::new("criterion 3 (optimality/feasibility vs temperature)");
    let report = run_experiment(&builtin("table2-beta-sweep").unwrap(), None).unwrap();
    let betas = [0.0, 0.1, 1.0, 2.0, 10.0];
    let mut gaps = Vec::new();
    for beta in betas {
        let cell = report
            .cells
            .iter()
            .find(|c| c.label == format!("pgm_learned_beta{beta}"))
            .unwrap();
        let m = cell.metrics.as_ref().unwrap();
        gaps.push(m.optimality_gap.unwrap());
        crit.check(
            m.feasibility >= 0.99,
            format!("feasibility {:.4} >= 0.99 at beta={beta}", m.feasibility),
        );
    }
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    crit.check(monotone, format!("gap nonincreasing across betas: {gaps:?}"));
    let g10 = gaps[4];
    crit.check(
        (0.008..=0.033).contains(&g10),
        format!("gap at beta=10: {g10:.4} in [0.008, 0.033]"),
    );
    let elapsed = start.elapsed().as_secs_f64();
    crit.check(elapsed <= 120.0, format!("runtime {elapsed:.1}s <= 120s"));
    if !crit.failures.is_empty() {
        println!(
            "criterion 3 analysis: with the exact prox the sampler's gap is {:.4} (in band) \
             but its feasibility is ~0.76 because the MAP anchoring leaves half the boundary \
             atom epsilon-outside; the learned operator restores feasibility at the cost of a \
             mid-lambda anchoring bias worth ~0.02 of objective. The joint constraint set is \
             empty for this operator class; see the decisions ledger.",
            report
                .cells
                .iter()
                .find(|c| c.label == "pgm_analytic_beta10")
                .and_then(|c| c.metrics.as_ref())
                .and_then(|m| m.optimality_gap)
                .unwrap_or(f64::NAN)
        );
    }
    crit.finish();
}

#[test]
fn criterion_4_quadratic_equivalence() {
    let _guard = lock();
    let mut crit = Criterion::new("criterion 4 (quadratic score equivalence)");
    let check = verify::check_quadratic_equivalence().unwrap();
    crit.check(
        check.passed,
        format!("max |moreau - quadrature| / 1e-6 = {:.3e}", check.margin),
    );
    crit.finish();
}

#[test]
fn criterion_5_score_gap_bounds() {
    let _guard = lock();
    let mut crit = Criterion::new("criterion 5 (score-gap bounds and beta^-1/2 scaling)");
    let check = verify::check_score_gap_bounds().unwrap();
    crit.check(
        check.passed,
        format!("bounds hold on the sweep; {}", check.note.unwrap_or_default()),
    );
    crit.finish();
}

#[test]
fn criterion_6_splitting_bound() {
    let _guard = lock();
    let mut crit = Criterion::new("criterion 6 (proximal splitting bound)");
    let check = verify::check_splitting_bound().unwrap();
    crit.check(
        check.passed,
        format!(
            "deviation within 4/(beta L)(|grad f|+1) at 1000 points per beta; {}",
            check.note.unwrap_or_default()
        ),
    );
    crit.finish();
}

#[test]
fn criterion_7_discretization_rate() {
    let _guard = lock();
    let mut crit = Criterion::new("criterion 7 (sqrt-step discretization rate)");
    let report = run_experiment(&builtin("w1-vs-K").unwrap(), None).unwrap();
    let mut ks = Vec::new();
    let mut w1s = Vec::new();
    for c in &report.cells {
        ks.push(c.steps as f64);
        w1s.push(c.w1.unwrap());
    }
    let slope = log_log_slope(&ks, &w1s);
    crit.check(slope <= -0.4, format!("log-log W1 slope {slope:.3} <= -0.4 over K={ks:?}"));
    crit.finish();
}

#[test]
fn criterion_8_moreau_score_matching() {
    let _guard = lock();
    let mut crit = Criterion::new("criterion 8 (learned prox on the interval prior)");
    let mut cfg = TrainConfig::new(1);
    cfg.epochs = 2000;
    cfg.seed = 0;
    let g = ProxFriendly::Interval { dim: 1, lo: -1.0, hi: 1.0 };
    let schedule = ve_default(1.0, 100).unwrap();
    let mut prior = indicator_prior_sampler(&g).unwrap();
    let out = train(&cfg, &mut prior, &schedule).unwrap();
    let mut total = 0.0;
    let mut count = 0usize;
    for lam in [(-8.0f64).exp(), (-4.0f64).exp(), (-1.0f64).exp()] {
        for i in 0..61 {
            let x = -3.0 + 6.0 * i as f64 / 60.0;
            let phi = out.net.forward(&[x], lam).unwrap()[0];
            total += (phi - x.clamp(-1.0, 1.0)).abs();
            count += 1;
        }
    }
    let mae = total / count as f64;
    crit.check(mae <= 0.05, format!("mean |phi - clamp| = {mae:.4} <= 0.05"));
    let at_edge = out.net.forward(&[1.5], 0.01).unwrap()[0];
    crit.check(
        (at_edge - 1.0).abs() <= 0.05,
        format!("phi(1.5, 0.01) = {at_edge:.4} within 0.05 of 1"),
    );

    // analytic gradient of the matching loss vs central finite differences
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
    let mut net = proxgen::proxnet::ProxNet::init(1, 6, true, &mut rng);
    let batch: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..4)
        .map(|i| {
            let x0 = vec![-0.8 + 0.5 * i as f64];
            let xt = vec![x0[0] + 0.2 * (i as f64 - 1.5)];
            (x0, xt, 0.3 + 0.1 * i as f64)
        })
        .collect();
    let zeta = 0.7;
    let (_, grads) = net.matching_loss(&batch, zeta).unwrap();
    let mut worst_rel = 0.0f64;
    let h = 1e-5;
    let flat: Vec<(usize, usize, f64)> = {
        let mut v = Vec::new();
        for (pi, g) in [&grads.w1, &grads.b1, &grads.w2, &grads.b2, &grads.w3, &grads.b3]
            .iter()
            .enumerate()
        {
            for (j, &gv) in g.iter().enumerate() {
                v.push((pi, j, gv));
            }
        }
        v
    };
    for (pi, j, gv) in flat {
        let orig = net.param(pi, j);
        *net.param_mut(pi, j) = orig + h;
        let (lp, _) = net.matching_loss(&batch, zeta).unwrap();
        *net.param_mut(pi, j) = orig - h;
        let (lm, _) = net.matching_loss(&batch, zeta).unwrap();
        *net.param_mut(pi, j) = orig;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (fd - gv).abs() / gv.abs().max(fd.abs()).max(1e-8);
        worst_rel = worst_rel.max(rel);
    }
    crit.check(
        worst_rel <= 1e-4,
        format!("matching-loss gradient vs finite differences: rel err {worst_rel:.2e} <= 1e-4"),
    );
    crit.finish();
}

#[test]
fn criterion_9_invariant_suite() {
    let _guard = lock();
    let mut crit = Criterion::new("criterion 9 (full invariant suite)");
    let checks = verify::run_all().unwrap();
    for c in &checks {
        crit.check(c.passed, format!("{} (margin {:.2e})", c.name, c.margin));
    }
    crit.finish();
}
