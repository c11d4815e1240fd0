//! Learned proximal operator `phi(x, lambda)`: a small tanh MLP with a
//! log-lambda conditioning channel, trained unsupervised by annealed
//! Gaussian-kernel matching against prior samples.
//!
//! The training loss per pair is `1 - N(phi(x_t, lambda) - x_0; 0, zeta^2 I)`
//! with `x_t = x_0 + sqrt(lambda) xi`. As `zeta` anneals the minimizer moves
//! from the posterior mean to the posterior mode, which is the prox of the
//! prior potential.

use crate::error::{Error, Result};
use crate::schedule::Schedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Annealing schedule for the matching-kernel width.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaSchedule {
    /// Geometric decay from `start` to `floor` across the run.
    Geometric { start: f64, floor: f64 },
    /// `scale / epoch`, clipped below at `floor`.
    InverseTime { scale: f64, floor: f64 },
    /// Geometric to `knee` over the first `knee_frac` of the run, then
    /// geometric from `knee` to `floor`.
    TwoPhase { start: f64, knee: f64, floor: f64, knee_frac: f64 },
}

impl ZetaSchedule {
    pub fn value(&self, epoch: usize, total: usize) -> f64 {
        let frac = if total <= 1 { 1.0 } else { epoch as f64 / (total - 1) as f64 };
        match *self {
            ZetaSchedule::Geometric { start, floor } => {
                (start * (floor / start).powf(frac)).max(floor)
            }
            ZetaSchedule::InverseTime { scale, floor } => (scale / (epoch as f64 + 1.0)).max(floor),
            ZetaSchedule::TwoPhase { start, knee, floor, knee_frac } => {
                if frac < knee_frac {
                    start * (knee / start).powf(frac / knee_frac)
                } else {
                    knee * (floor / knee).powf((frac - knee_frac) / (1.0 - knee_frac))
                }
            }
        }
    }

    fn validate(&self, total: usize) -> Result<()> {
        let mut prev = f64::INFINITY;
        for e in 0..total.max(2) {
            let z = self.value(e, total.max(2));
            if !(z > 0.0) {
                return Err(Error::Domain("zeta schedule must stay positive".into()));
            }
            if z > prev * (1.0 + 1e-12) {
                return Err(Error::Domain("zeta schedule must be nonincreasing".into()));
            }
            prev = z;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub zeta: ZetaSchedule,
    /// Residual skip from the input point to the output. Suited to priors
    /// whose prox is near the identity; compact-domain priors fit better
    /// with a bounded head (`false`).
    pub skip: bool,
    /// Clamp inference outputs to the bounding box of the training samples;
    /// prox outputs always lie in `dom(g)`, so this only removes
    /// extrapolation overshoot.
    pub clamp_outputs: bool,
}

impl TrainConfig {
    pub fn new(dim: usize) -> Self {
        TrainConfig {
            dim,
            hidden: 64,
            epochs: 4000,
            batch_size: 256,
            learning_rate: 0.1,
            momentum: 0.9,
            grad_clip: 5.0,
            seed: 0,
            zeta: ZetaSchedule::TwoPhase {
                start: 3.0,
                knee: 0.1,
                floor: 0.05 * (dim as f64).sqrt(),
                knee_frac: 0.85,
            },
            skip: false,
            clamp_outputs: true,
        }
    }
}

/// Parameters of the proximal network. Layers are `[d+1, h, h, d]` with tanh
/// activations; the extra input channel carries normalized `log lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxNet {
    dim: usize,
    hidden: usize,
    w1: Vec<f64>, // (h, d+1) row-major
    b1: Vec<f64>,
    w2: Vec<f64>, // (h, h)
    b2: Vec<f64>,
    w3: Vec<f64>, // (d, h)
    b3: Vec<f64>,
    skip: bool,
    lambda_offset: f64,
    lambda_scale: f64,
    output_clamp: Option<(Vec<f64>, Vec<f64>)>,
    /// Radial cap on outputs, used for ball-domain priors.
    output_ball: Option<f64>,
}

/// Parameter gradients, same layout as the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

impl Gradients {
    fn zeros(net: &ProxNet) -> Self {
        Gradients {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.len()],
            b2: vec![0.0; net.b2.len()],
            w3: vec![0.0; net.w3.len()],
            b3: vec![0.0; net.b3.len()],
        }
    }

    fn norm(&self) -> f64 {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
            .iter()
            .flat_map(|v| v.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, s: f64) {
        for v in [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ] {
            for x in v.iter_mut() {
                *x *= s;
            }
        }
    }
}

struct ForwardCache {
    input: Vec<f64>,
    t1: Vec<f64>,
    t2: Vec<f64>,
}

impl ProxNet {
    /// Xavier-uniform initialization, biases zero.
    pub fn init(dim: usize, hidden: usize, skip: bool, rng: &mut ChaCha8Rng) -> Self {
        let d_in = dim + 1;
        let mut uni = |fan_in: usize, fan_out: usize, n: usize| -> Vec<f64> {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-a..a)).collect()
        };
        ProxNet {
            dim,
            hidden,
            w1: uni(d_in, hidden, hidden * d_in),
            b1: vec![0.0; hidden],
            w2: uni(hidden, hidden, hidden * hidden),
            b2: vec![0.0; hidden],
            w3: uni(hidden, dim, dim * hidden),
            b3: vec![0.0; dim],
            skip,
            lambda_offset: 3.0,
            lambda_scale: 5.0,
            output_clamp: None,
            output_ball: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set_output_clamp(&mut self, clamp: Option<(Vec<f64>, Vec<f64>)>) {
        self.output_clamp = clamp;
    }

    pub fn output_clamp(&self) -> Option<&(Vec<f64>, Vec<f64>)> {
        self.output_clamp.as_ref()
    }

    /// Caps output norms at the given radius; prox outputs of a ball-domain
    /// prior always lie in the ball.
    pub fn set_output_ball(&mut self, radius: Option<f64>) {
        self.output_ball = radius;
    }

    fn features(&self, x: &[f64], lambda: f64) -> Vec<f64> {
        let mut input = Vec::with_capacity(self.dim + 1);
        input.extend_from_slice(x);
        input.push((lambda.ln() + self.lambda_offset) / self.lambda_scale);
        input
    }

    fn forward_raw(&self, x: &[f64], lambda: f64) -> (Vec<f64>, ForwardCache) {
        let h = self.hidden;
        let d_in = self.dim + 1;
        let input = self.features(x, lambda);
        let mut t1 = vec![0.0; h];
        for i in 0..h {
            let mut z = self.b1[i];
            for j in 0..d_in {
                z += self.w1[i * d_in + j] * input[j];
            }
            t1[i] = z.tanh();
        }
        let mut t2 = vec![0.0; h];
        for i in 0..h {
            let mut z = self.b2[i];
            for j in 0..h {
                z += self.w2[i * h + j] * t1[j];
            }
            t2[i] = z.tanh();
        }
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut z = self.b3[i];
            for j in 0..h {
                z += self.w3[i * h + j] * t2[j];
            }
            out[i] = z + if self.skip { x[i] } else { 0.0 };
        }
        (out, ForwardCache { input, t1, t2 })
    }

    /// Evaluates the learned operator, applying the output clamp if set.
    pub fn forward(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "input has dim {}, network expects {}",
                x.len(),
                self.dim
            )));
        }
        let (mut out, _) = self.forward_raw(x, lambda);
        if let Some((lo, hi)) = &self.output_clamp {
            for ((v, l), u) in out.iter_mut().zip(lo).zip(hi) {
                *v = v.clamp(*l, *u);
            }
        }
        if let Some(r) = self.output_ball {
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > r {
                for v in out.iter_mut() {
                    *v *= r / norm;
                }
            }
        }
        Ok(out)
    }

    /// Frobenius-norm product bound on the input-to-output Jacobian
    /// (tanh slopes are at most one); the skip adds one.
    pub fn lipschitz_bound(&self) -> f64 {
        let fro = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        fro(&self.w1) * fro(&self.w2) * fro(&self.w3) + if self.skip { 1.0 } else { 0.0 }
    }

    fn backprop(&self, cache: &ForwardCache, dout: &[f64], grads: &mut Gradients) {
        let h = self.hidden;
        let d_in = self.dim + 1;
        let mut dt2 = vec![0.0; h];
        for i in 0..self.dim {
            grads.b3[i] += dout[i];
            for j in 0..h {
                grads.w3[i * h + j] += dout[i] * cache.t2[j];
                dt2[j] += dout[i] * self.w3[i * h + j];
            }
        }
        let mut dt1 = vec![0.0; h];
        for i in 0..h {
            let dz2 = dt2[i] * (1.0 - cache.t2[i] * cache.t2[i]);
            grads.b2[i] += dz2;
            for j in 0..h {
                grads.w2[i * h + j] += dz2 * cache.t1[j];
                dt1[j] += dz2 * self.w2[i * h + j];
            }
        }
        for i in 0..h {
            let dz1 = dt1[i] * (1.0 - cache.t1[i] * cache.t1[i]);
            grads.b1[i] += dz1;
            for j in 0..d_in {
                grads.w1[i * d_in + j] += dz1 * cache.input[j];
            }
        }
    }

    /// Matching loss over a batch of `(x0, x_t, lambda)` triples and its
    /// exact parameter gradient by backpropagation. Uses the raw (unclamped)
    /// network output.
    pub fn matching_loss(
        &self,
        batch: &[(Vec<f64>, Vec<f64>, f64)],
        zeta: f64,
    ) -> Result<(f64, Gradients)> {
        if !(zeta > 0.0) {
            return Err(Error::Domain(format!("zeta must be positive, got {zeta}")));
        }
        if batch.is_empty() {
            return Err(Error::Domain("matching loss needs a nonempty batch".into()));
        }
        let d = self.dim as f64;
        let norm = (2.0 * std::f64::consts::PI * zeta * zeta).powf(-d / 2.0);
        let inv_b = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut grads = Gradients::zeros(self);
        for (x0, x_t, lambda) in batch {
            if x0.len() != self.dim || x_t.len() != self.dim {
                return Err(Error::Shape("batch entry dimension mismatch".into()));
            }
            let (out, cache) = self.forward_raw(x_t, *lambda);
            let r2: f64 = out.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
            let kernel = norm * (-r2 / (2.0 * zeta * zeta)).exp();
            loss += (1.0 - kernel) * inv_b;
            let coeff = kernel / (zeta * zeta) * inv_b;
            let dout: Vec<f64> = out.iter().zip(x0).map(|(a, b)| coeff * (a - b)).collect();
            self.backprop(&cache, &dout, &mut grads);
        }
        Ok((loss, grads))
    }

    /// Raw parameter access in group order `(w1, b1, w2, b2, w3, b3)`;
    /// used by gradient checks.
    pub fn param(&self, group: usize, idx: usize) -> f64 {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3][group][idx]
    }

    pub fn param_mut(&mut self, group: usize, idx: usize) -> &mut f64 {
        &mut self.params_mut()[group][idx]
    }

    fn params_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    pub fn to_json(&self) -> serde_json::Value {
        let h = self.hidden;
        let d_in = self.dim + 1;
        let mat = |v: &[f64], rows: usize, cols: usize| -> Vec<Vec<f64>> {
            (0..rows).map(|i| v[i * cols..(i + 1) * cols].to_vec()).collect()
        };
        serde_json::json!({
            "version": 1,
            "layers": [
                { "W": mat(&self.w1, h, d_in), "b": self.b1 },
                { "W": mat(&self.w2, h, h), "b": self.b2 },
                { "W": mat(&self.w3, self.dim, h), "b": self.b3 },
            ],
            "activation": "tanh",
            "skip": self.skip,
            "lambda_offset": self.lambda_offset,
            "lambda_scale": self.lambda_scale,
            "output_clamp": self.output_clamp,
            "output_ball": self.output_ball,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct LayerFile {
            #[serde(rename = "W")]
            w: Vec<Vec<f64>>,
            b: Vec<f64>,
        }
        #[derive(Deserialize)]
        struct NetFile {
            version: u32,
            layers: Vec<LayerFile>,
            activation: String,
            skip: bool,
            #[serde(default = "default_lambda_offset")]
            lambda_offset: f64,
            #[serde(default = "default_lambda_scale")]
            lambda_scale: f64,
            #[serde(default)]
            output_clamp: Option<(Vec<f64>, Vec<f64>)>,
            #[serde(default)]
            output_ball: Option<f64>,
        }
        fn default_lambda_offset() -> f64 {
            3.0
        }
        fn default_lambda_scale() -> f64 {
            5.0
        }
        let file: NetFile = serde_json::from_value(value.clone())?;
        if file.version != 1 {
            return Err(Error::Config(format!("unsupported network file version {}", file.version)));
        }
        if file.activation != "tanh" {
            return Err(Error::Config(format!("unsupported activation {:?}", file.activation)));
        }
        if file.layers.len() != 3 {
            return Err(Error::Config("expected exactly three layers".into()));
        }
        let hidden = file.layers[0].w.len();
        let d_in = file.layers[0].w.first().map(|r| r.len()).unwrap_or(0);
        if d_in == 0 {
            return Err(Error::Config("empty first layer".into()));
        }
        let dim = d_in - 1;
        let flat = |m: &[Vec<f64>]| -> Vec<f64> { m.iter().flatten().copied().collect() };
        let net = ProxNet {
            dim,
            hidden,
            w1: flat(&file.layers[0].w),
            b1: file.layers[0].b.clone(),
            w2: flat(&file.layers[1].w),
            b2: file.layers[1].b.clone(),
            w3: flat(&file.layers[2].w),
            b3: file.layers[2].b.clone(),
            skip: file.skip,
            lambda_offset: file.lambda_offset,
            lambda_scale: file.lambda_scale,
            output_clamp: file.output_clamp,
            output_ball: file.output_ball,
        };
        if net.w2.len() != hidden * hidden
            || net.w3.len() != dim * hidden
            || net.b1.len() != hidden
            || net.b2.len() != hidden
            || net.b3.len() != dim
        {
            return Err(Error::Shape("inconsistent layer shapes in network file".into()));
        }
        if [&net.w1, &net.b1, &net.w2, &net.b2, &net.w3, &net.b3]
            .iter()
            .any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Domain("network file contains non-finite weights".into()));
        }
        Ok(net)
    }
}

/// Training result: the fitted network and the per-epoch loss trace.
pub struct TrainOutcome {
    pub net: ProxNet,
    pub loss_trace: Vec<f64>,
}

/// Trains `phi` on prior samples alone: per epoch draw a batch of
/// `x0 ~ prior`, `t ~ U[0, T]`, `x_t = x0 + sqrt(lambda(t)) xi`, then take one
/// clipped SGD-with-momentum step on the matching loss. The learning rate is
/// rescaled by the kernel magnitude so the update stays `O(r exp(-r^2/..))`
/// as `zeta` anneals, and follows a cosine decay.
pub fn train(
    cfg: &TrainConfig,
    prior: &mut dyn FnMut(&mut ChaCha8Rng) -> Vec<f64>,
    schedule: &Schedule,
) -> Result<TrainOutcome> {
    cfg.zeta.validate(cfg.epochs)?;
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = ProxNet::init(cfg.dim, cfg.hidden, cfg.skip, &mut rng);
    let mut velocity = Gradients::zeros(&net);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut box_lo = vec![f64::INFINITY; cfg.dim];
    let mut box_hi = vec![f64::NEG_INFINITY; cfg.dim];
    let t_max = schedule.horizon();
    let d = cfg.dim as f64;
    let mut last_stable = net.clone();
    for epoch in 0..cfg.epochs {
        let zeta = cfg.zeta.value(epoch, cfg.epochs);
        let frac = epoch as f64 / cfg.epochs.max(1) as f64;
        // cosine decay with a floor so the late mode-sharpening phase (small
        // zeta) still learns
        let lr = cfg.learning_rate
            * (0.5 * (1.0 + (std::f64::consts::PI * frac).cos())).max(0.1);
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let x0 = prior(&mut rng);
            if x0.len() != cfg.dim {
                return Err(Error::Shape("prior sample dimension mismatch".into()));
            }
            for ((l, h), v) in box_lo.iter_mut().zip(box_hi.iter_mut()).zip(&x0) {
                *l = l.min(*v);
                *h = h.max(*v);
            }
            let t: f64 = rng.gen_range(0.0..t_max);
            let lambda = schedule.eval(t)?.lambda.max(f64::MIN_POSITIVE);
            let x_t: Vec<f64> = x0
                .iter()
                .map(|&v| v + lambda.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect();
            batch.push((x0, x_t, lambda));
        }
        let (loss, mut grads) = net.matching_loss(&batch, zeta)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, last_stable: Box::new(last_stable) });
        }
        trace.push(loss);
        // absorb the kernel normalizer into the step so updates stay
        // O(r exp(-r^2/2zeta^2)) across the anneal
        let kernel_scale =
            zeta * zeta * (2.0 * std::f64::consts::PI * zeta * zeta).powf(d / 2.0);
        grads.scale(kernel_scale);
        let gnorm = grads.norm();
        if gnorm > cfg.grad_clip {
            grads.scale(cfg.grad_clip / gnorm);
        }
        let vel = [
            &mut velocity.w1,
            &mut velocity.b1,
            &mut velocity.w2,
            &mut velocity.b2,
            &mut velocity.w3,
            &mut velocity.b3,
        ];
        let gs = [&grads.w1, &grads.b1, &grads.w2, &grads.b2, &grads.w3, &grads.b3];
        for (v, g) in vel.into_iter().zip(gs) {
            for (vi, gi) in v.iter_mut().zip(g.iter()) {
                *vi = cfg.momentum * *vi - lr * gi;
            }
        }
        for (p, v) in net.params_mut().into_iter().zip([
            &velocity.w1,
            &velocity.b1,
            &velocity.w2,
            &velocity.b2,
            &velocity.w3,
            &velocity.b3,
        ]) {
            for (pi, vi) in p.iter_mut().zip(v.iter()) {
                *pi += vi;
            }
        }
        if net.w1.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch, last_stable: Box::new(last_stable) });
        }
        last_stable = net.clone();
    }
    if cfg.clamp_outputs && cfg.epochs > 0 && box_lo.iter().all(|v| v.is_finite()) {
        net.set_output_clamp(Some((box_lo, box_hi)));
    }
    Ok(TrainOutcome { net, loss_trace: trace })
}

/// Rejection sampler from the bounding box of `dom(g)` into `dom(g)`;
/// realizes draws from `exp(-g)` for indicator priors.
pub fn indicator_prior_sampler(
    g: &crate::potential::ProxFriendly,
) -> Result<impl FnMut(&mut ChaCha8Rng) -> Vec<f64> + '_> {
    let (lo, hi) = g
        .bounding_box()
        .ok_or_else(|| Error::Domain("prior sampling needs a compact indicator kind".into()))?;
    Ok(move |rng: &mut ChaCha8Rng| loop {
        let x: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(&l, &h)| rng.gen_range(l..=h))
            .collect();
        if g.contains(&x, 0.0).unwrap_or(true) {
            return x;
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ve_default;

    fn small_net(dim: usize, skip: bool, seed: u64) -> ProxNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ProxNet::init(dim, 4, skip, &mut rng)
    }

    #[test]
    fn zero_final_layer_outputs_zero() {
        let mut net = small_net(2, false, 1);
        net.w3.iter_mut().for_each(|v| *v = 0.0);
        net.b3.iter_mut().for_each(|v| *v = 0.0);
        let out = net.forward(&[1.3, -0.4], 0.1).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_correction_with_skip_is_identity() {
        let mut net = small_net(2, true, 1);
        net.w3.iter_mut().for_each(|v| *v = 0.0);
        net.b3.iter_mut().for_each(|v| *v = 0.0);
        let out = net.forward(&[1.3, -0.4], 0.1).unwrap();
        assert_eq!(out, vec![1.3, -0.4]);
    }

    #[test]
    fn forward_validates_inputs() {
        let net = small_net(2, false, 1);
        assert!(matches!(net.forward(&[1.0], 0.1), Err(Error::Shape(_))));
        assert!(matches!(net.forward(&[1.0, 2.0], 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn matching_loss_at_zero_residual() {
        // phi == x0 exactly: loss = 1 - 1/sqrt(2 pi)
        let mut net = small_net(1, true, 2);
        net.w3.iter_mut().for_each(|v| *v = 0.0);
        net.b3.iter_mut().for_each(|v| *v = 0.0);
        let batch = vec![(vec![0.7], vec![0.7], 0.5)];
        let (loss, _) = net.matching_loss(&batch, 1.0).unwrap();
        assert!((loss - 0.6010577195985673).abs() < 1e-15);
    }

    #[test]
    fn matching_loss_saturates_at_one() {
        let mut net = small_net(1, true, 2);
        net.b3[0] = 1e6;
        let batch = vec![(vec![0.0], vec![0.0], 0.5)];
        let (loss, grads) = net.matching_loss(&batch, 0.5).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
        assert!(grads.norm() < 1e-12, "kernel gradient must vanish at far residuals");
    }

    #[test]
    fn matching_loss_rejects_bad_zeta() {
        let net = small_net(1, false, 2);
        let batch = vec![(vec![0.0], vec![0.0], 0.5)];
        assert!(matches!(net.matching_loss(&batch, 0.0), Err(Error::Domain(_))));
        assert!(matches!(net.matching_loss(&[], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = ProxNet::init(2, 4, true, &mut rng);
        let batch: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..3)
            .map(|_| {
                let x0 = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let xt = vec![x0[0] + rng.gen_range(-0.5..0.5), x0[1] + rng.gen_range(-0.5..0.5)];
                (x0, xt, rng.gen_range(0.05..1.0))
            })
            .collect();
        let zeta = 0.8;
        let (_, grads) = net.matching_loss(&batch, zeta).unwrap();
        let h = 1e-5;
        let analytic: Vec<(usize, usize, f64)> = {
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
        for (pi, j, gv) in analytic {
            let orig = net.params_mut()[pi][j];
            net.params_mut()[pi][j] = orig + h;
            let (lp, _) = net.matching_loss(&batch, zeta).unwrap();
            net.params_mut()[pi][j] = orig - h;
            let (lm, _) = net.matching_loss(&batch, zeta).unwrap();
            net.params_mut()[pi][j] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let denom = gv.abs().max(fd.abs()).max(1e-6);
            assert!(
                (fd - gv).abs() / denom <= 1e-4,
                "param ({pi},{j}): analytic {gv} vs fd {fd}"
            );
        }
    }

    #[test]
    fn directional_derivative_below_lipschitz_bound() {
        let net = small_net(2, true, 5);
        let bound = net.lipschitz_bound();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let dir = {
                let d = vec![rng.gen_range(-1.0..1.0f64), rng.gen_range(-1.0..1.0)];
                let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
                vec![d[0] / n, d[1] / n]
            };
            let h = 1e-6;
            let xp: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
            let fp = net.forward(&xp, 0.3).unwrap();
            let fm = net.forward(&xm, 0.3).unwrap();
            let deriv: f64 = fp
                .iter()
                .zip(&fm)
                .map(|(a, b)| ((a - b) / (2.0 * h)).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(deriv <= bound * (1.0 + 1e-6), "derivative {deriv} vs bound {bound}");
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let mut cfg = TrainConfig::new(1);
        cfg.epochs = 0;
        cfg.seed = 42;
        let s = ve_default(1.0, 10).unwrap();
        let g = crate::potential::ProxFriendly::Interval { dim: 1, lo: -1.0, hi: 1.0 };
        let mut prior = indicator_prior_sampler(&g).unwrap();
        let out = train(&cfg, &mut prior, &s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let fresh = ProxNet::init(1, cfg.hidden, cfg.skip, &mut rng);
        assert_eq!(out.net, fresh);
        assert!(out.loss_trace.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let mut cfg = TrainConfig::new(1);
        cfg.epochs = 20;
        cfg.batch_size = 16;
        cfg.seed = 11;
        let s = ve_default(1.0, 10).unwrap();
        let g = crate::potential::ProxFriendly::Interval { dim: 1, lo: -1.0, hi: 1.0 };
        let run = |cfg: &TrainConfig| {
            let mut prior = indicator_prior_sampler(&g).unwrap();
            train(cfg, &mut prior, &s).unwrap()
        };
        let a = run(&cfg);
        let b = run(&cfg);
        assert_eq!(a.net, b.net);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn serialization_round_trip() {
        let mut net = small_net(2, true, 3);
        net.set_output_clamp(Some((vec![-1.0, -1.0], vec![1.0, 1.0])));
        let json = net.to_json();
        assert_eq!(json["activation"], "tanh");
        assert_eq!(json["version"], 1);
        let back = ProxNet::from_json(&json).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn zeta_schedules_are_nonincreasing() {
        for sched in [
            ZetaSchedule::Geometric { start: 1.0, floor: 0.05 },
            ZetaSchedule::InverseTime { scale: 10.0, floor: 0.05 },
            ZetaSchedule::TwoPhase { start: 3.0, knee: 0.1, floor: 0.05, knee_frac: 0.85 },
        ] {
            sched.validate(1000).unwrap();
            assert!(sched.value(999, 1000) >= 0.05 - 1e-12);
        }
    }
}
