//! Proximal generative modeling toolkit.
//!
//! Samples composite Bayesian targets `pi(x) ∝ exp{-(beta*f(x) + g(x))}` where
//! `f` is smooth and `g` may be nonsmooth, by driving a reverse diffusion with
//! a *Moreau score* built from proximal operators instead of the intractable
//! Stein score. The crate provides:
//!
//! - diffusion schedules and the exponential-interpolation step coefficients
//!   ([`schedule`]),
//! - composite potentials with closed-form proximal operators, Moreau
//!   envelopes, and Moreau scores ([`potential`]),
//! - a small proximal network trained by annealed Gaussian-kernel matching on
//!   prior samples only ([`proxnet`]),
//! - reverse-time samplers: proximal diffusion sampling, its Euler-Maruyama
//!   variant, proximal Langevin, a noise-free proximal-point recursion, and
//!   two score-based baselines ([`sampler`]),
//! - brute-force oracles (grid prox, quadrature scores, 1-D Wasserstein,
//!   bound checkers) that back every derived constant ([`oracle`]),
//! - a config-driven experiment runner and invariant suite ([`experiment`],
//!   [`verify`]).

pub mod config;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod potential;
pub mod proxnet;
pub mod sampler;
pub mod schedule;
pub mod verify;

pub use error::{Error, Result};
pub use potential::{Composite, ProxFriendly, Smooth};
pub use proxnet::{ProxNet, TrainConfig};
pub use sampler::{ProxSource, SampleBatch, SamplerConfig, SamplerKind};
pub use schedule::{Schedule, ScheduleKind, StepCoefficients};
