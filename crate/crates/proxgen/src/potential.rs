//! Composite potentials `U = beta * f + g` with gradient access to the smooth
//! part and proximal access to the nonsmooth part, plus Moreau envelopes and
//! the Moreau score.

use crate::error::{Error, Result};
use crate::schedule::Schedule;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

fn check_finite(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite input vector".into()));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("prox parameter must be positive, got {lambda}")));
    }
    Ok(())
}

/// Smooth data-fidelity term with gradient access.
#[derive(Debug, Clone)]
pub enum Smooth {
    Zero {
        dim: usize,
    },
    /// `f(x) = 0.5 x'Ax + b'x` with symmetric positive semidefinite `A`.
    Quadratic {
        a: DMatrix<f64>,
        b: DVector<f64>,
        smoothness: f64,
        strong_convexity: f64,
    },
    /// Smoothed absolute value `sum_i delta^2 (sqrt(1 + (x_i/delta)^2) - 1)`.
    PseudoHuber {
        dim: usize,
        delta: f64,
    },
}

impl Smooth {
    pub fn quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() != b.len() {
            return Err(Error::Shape(format!(
                "quadratic term expects square A matching b, got {}x{} and {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if (&a - a.transpose()).abs().max() > 1e-10 {
            return Err(Error::Domain("quadratic matrix must be symmetric".into()));
        }
        let eigs = a.clone().symmetric_eigen().eigenvalues;
        let min = eigs.min();
        let max = eigs.max();
        if min < -1e-10 {
            return Err(Error::Domain(format!(
                "quadratic matrix must be positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(Smooth::Quadratic { a, b, smoothness: max.max(0.0), strong_convexity: min.max(0.0) })
    }

    pub fn dim(&self) -> usize {
        match self {
            Smooth::Zero { dim } | Smooth::PseudoHuber { dim, .. } => *dim,
            Smooth::Quadratic { b, .. } => b.len(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Smooth::Zero { .. } => 0.0,
            Smooth::Quadratic { a, b, .. } => {
                let xv = DVector::from_column_slice(x);
                0.5 * xv.dot(&(a * &xv)) + b.dot(&xv)
            }
            Smooth::PseudoHuber { delta, .. } => x
                .iter()
                .map(|&v| delta * delta * ((1.0 + (v / delta).powi(2)).sqrt() - 1.0))
                .sum(),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Smooth::Zero { dim } => vec![0.0; *dim],
            Smooth::Quadratic { a, b, .. } => {
                let xv = DVector::from_column_slice(x);
                (a * xv + b).data.into()
            }
            Smooth::PseudoHuber { delta, .. } => x
                .iter()
                .map(|&v| v / (1.0 + (v / delta).powi(2)).sqrt())
                .collect(),
        }
    }

    /// Lipschitz constant of the gradient.
    pub fn smoothness(&self) -> f64 {
        match self {
            Smooth::Zero { .. } => 0.0,
            Smooth::Quadratic { smoothness, .. } => *smoothness,
            Smooth::PseudoHuber { .. } => 1.0,
        }
    }

    pub fn strong_convexity(&self) -> f64 {
        match self {
            Smooth::Quadratic { strong_convexity, .. } => *strong_convexity,
            _ => 0.0,
        }
    }
}

/// Nonsmooth prior term with a closed-form proximal operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ProxFriendly {
    Zero { dim: usize },
    /// Indicator of the box `[lo, hi]^dim`.
    Interval { dim: usize, lo: f64, hi: f64 },
    /// Indicator of the Euclidean ball of the given radius.
    Ball { dim: usize, radius: f64 },
    /// `g(x) = weight * |x|_1`.
    L1 { dim: usize, weight: f64 },
    /// `g(x) = 0.5 x'Ax + b'x` with symmetric positive semidefinite `A`.
    Quadratic { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl ProxFriendly {
    pub fn dim(&self) -> usize {
        match self {
            ProxFriendly::Zero { dim }
            | ProxFriendly::Interval { dim, .. }
            | ProxFriendly::Ball { dim, .. }
            | ProxFriendly::L1 { dim, .. } => *dim,
            ProxFriendly::Quadratic { b, .. } => b.len(),
        }
    }

    fn quad_parts(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        match self {
            ProxFriendly::Quadratic { a, b } => {
                let n = b.len();
                let flat: Vec<f64> = a.iter().flatten().copied().collect();
                Some((DMatrix::from_row_slice(n, n, &flat), DVector::from_column_slice(b)))
            }
            _ => None,
        }
    }

    /// `argmin_u { g(u) + |u - x|^2 / (2 lambda) }`.
    pub fn prox(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_lambda(lambda)?;
        check_finite(x)?;
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "prox input has dim {}, potential has dim {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(match self {
            ProxFriendly::Zero { .. } => x.to_vec(),
            ProxFriendly::Interval { lo, hi, .. } => {
                x.iter().map(|&v| v.clamp(*lo, *hi)).collect()
            }
            ProxFriendly::Ball { radius, .. } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= *radius {
                    x.to_vec()
                } else {
                    x.iter().map(|&v| v * radius / norm).collect()
                }
            }
            ProxFriendly::L1 { weight, .. } => {
                let thr = weight * lambda;
                x.iter()
                    .map(|&v| v.signum() * (v.abs() - thr).max(0.0))
                    .collect()
            }
            ProxFriendly::Quadratic { .. } => {
                let (a, b) = self.quad_parts().unwrap();
                let n = x.len();
                let lhs = DMatrix::identity(n, n) + a * lambda;
                let rhs = DVector::from_column_slice(x) - b * lambda;
                let sol = lhs
                    .cholesky()
                    .ok_or_else(|| Error::Domain("quadratic prox system not SPD".into()))?
                    .solve(&rhs);
                sol.data.into()
            }
        })
    }

    /// Value of `g` at a point of its domain (`INFINITY` outside).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ProxFriendly::Zero { .. } => 0.0,
            ProxFriendly::Interval { lo, hi, .. } => {
                if x.iter().all(|&v| (*lo..=*hi).contains(&v)) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFriendly::Ball { radius, .. } => {
                if x.iter().map(|v| v * v).sum::<f64>().sqrt() <= *radius {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFriendly::L1 { weight, .. } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            ProxFriendly::Quadratic { .. } => {
                let (a, b) = self.quad_parts().unwrap();
                let xv = DVector::from_column_slice(x);
                0.5 * xv.dot(&(&a * &xv)) + b.dot(&xv)
            }
        }
    }

    /// Membership in `dom(g)`; `None` when the domain is all of space.
    pub fn contains(&self, x: &[f64], tol: f64) -> Option<bool> {
        match self {
            ProxFriendly::Interval { lo, hi, .. } => {
                Some(x.iter().all(|&v| v >= lo - tol && v <= hi + tol))
            }
            ProxFriendly::Ball { radius, .. } => {
                Some(x.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius + tol)
            }
            _ => None,
        }
    }

    /// Diameter of `dom(g)`; unbounded kinds report infinity.
    pub fn diameter(&self) -> f64 {
        match self {
            ProxFriendly::Interval { dim, lo, hi } => (hi - lo) * (*dim as f64).sqrt(),
            ProxFriendly::Ball { radius, .. } => 2.0 * radius,
            _ => f64::INFINITY,
        }
    }

    /// Axis-aligned bounding box of `dom(g)` for compact kinds.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ProxFriendly::Interval { dim, lo, hi } => {
                Some((vec![*lo; *dim], vec![*hi; *dim]))
            }
            ProxFriendly::Ball { dim, radius } => {
                Some((vec![-radius; *dim], vec![*radius; *dim]))
            }
            _ => None,
        }
    }

    /// Moreau envelope `g^lambda(x) = g(p) + |p - x|^2 / (2 lambda)` with
    /// `p = prox(lambda, x)`.
    pub fn moreau_envelope(&self, lambda: f64, x: &[f64]) -> Result<f64> {
        let p = self.prox(lambda, x)?;
        let dist2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let gp = match self {
            // indicator kinds evaluate to zero at the projection
            ProxFriendly::Interval { .. } | ProxFriendly::Ball { .. } => 0.0,
            _ => self.eval(&p),
        };
        Ok(gp + dist2 / (2.0 * lambda))
    }
}

/// Route used to evaluate `Prox_U`: the one-gradient-step splitting
/// `Prox_g(x - beta lambda grad f(x))`, or the exact joint prox where one is
/// available in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxRoute {
    Split,
    JointExact,
}

/// Composite target `U(x) = beta * f(x) + g(x)`.
#[derive(Debug, Clone)]
pub struct Composite {
    pub f: Smooth,
    pub g: ProxFriendly,
    pub beta: f64,
}

impl Composite {
    pub fn new(f: Smooth, g: ProxFriendly, beta: f64) -> Result<Self> {
        if f.dim() != g.dim() {
            return Err(Error::Shape(format!(
                "smooth part has dim {}, prox part has dim {}",
                f.dim(),
                g.dim()
            )));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("inverse temperature must be >= 0, got {beta}")));
        }
        Ok(Composite { f, g, beta })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        self.beta * self.f.eval(x) + self.g.eval(x)
    }

    /// Proximal splitting `Prox_g^lambda(x - beta lambda grad f(x))`.
    pub fn split_prox(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_lambda(lambda)?;
        let grad = self.f.grad(x);
        let shifted: Vec<f64> = x
            .iter()
            .zip(&grad)
            .map(|(&xi, &gi)| xi - self.beta * lambda * gi)
            .collect();
        self.g.prox(lambda, &shifted)
    }

    /// Exact `Prox_U^lambda` where a closed form exists; `None` otherwise.
    ///
    /// Covered: quadratic/zero `f` with quadratic or zero `g`; quadratic/zero
    /// `f` with a box indicator when the quadratic is separable; quadratic or
    /// zero `f` with a ball indicator (radial dual root).
    pub fn joint_prox(&self, lambda: f64, x: &[f64]) -> Result<Option<Vec<f64>>> {
        check_lambda(lambda)?;
        check_finite(x)?;
        let n = x.len();
        let fq = match &self.f {
            Smooth::Zero { .. } => Some((DMatrix::zeros(n, n), DVector::zeros(n))),
            Smooth::Quadratic { a, b, .. } => Some((a.clone(), b.clone())),
            Smooth::PseudoHuber { .. } => None,
        };
        let Some((af, bf)) = fq else { return Ok(None) };
        let scaled_a = &af * (self.beta * lambda);
        let scaled_b = &bf * (self.beta * lambda);
        match &self.g {
            ProxFriendly::Zero { .. } => {
                let lhs = DMatrix::identity(n, n) + &scaled_a;
                let rhs = DVector::from_column_slice(x) - &scaled_b;
                let sol = lhs
                    .cholesky()
                    .ok_or_else(|| Error::Domain("joint prox system not SPD".into()))?
                    .solve(&rhs);
                Ok(Some(sol.data.into()))
            }
            ProxFriendly::Quadratic { .. } => {
                let (ag, bg) = self.g.quad_parts().unwrap();
                let lhs = DMatrix::identity(n, n) + &scaled_a + ag * lambda;
                let rhs = DVector::from_column_slice(x) - &scaled_b - bg * lambda;
                let sol = lhs
                    .cholesky()
                    .ok_or_else(|| Error::Domain("joint prox system not SPD".into()))?
                    .solve(&rhs);
                Ok(Some(sol.data.into()))
            }
            ProxFriendly::Interval { lo, hi, .. } => {
                // separable case only: clamping each coordinate is exact
                let diagonal = (0..n).all(|i| {
                    (0..n).all(|j| i == j || af[(i, j)].abs() <= 1e-14)
                });
                if !diagonal {
                    return Ok(None);
                }
                let u: Vec<f64> = (0..n)
                    .map(|i| {
                        let num = x[i] - scaled_b[i];
                        let den = 1.0 + scaled_a[(i, i)];
                        (num / den).clamp(*lo, *hi)
                    })
                    .collect();
                Ok(Some(u))
            }
            ProxFriendly::Ball { radius, .. } => {
                let rhs = DVector::from_column_slice(x) - &scaled_b;
                let solve_with = |nu: f64| -> Result<DVector<f64>> {
                    let lhs = DMatrix::identity(n, n) * (1.0 + nu) + &scaled_a;
                    Ok(lhs
                        .cholesky()
                        .ok_or_else(|| Error::Domain("joint prox system not SPD".into()))?
                        .solve(&rhs))
                };
                let free = solve_with(0.0)?;
                if free.norm() <= *radius {
                    return Ok(Some(free.data.into()));
                }
                // ||u(nu)|| is decreasing in nu; bisect for ||u(nu)|| = radius
                let mut lo_nu = 0.0;
                let mut hi_nu = 1.0;
                while solve_with(hi_nu)?.norm() > *radius {
                    hi_nu *= 2.0;
                    if hi_nu > 1e18 {
                        return Err(Error::Domain("ball joint prox failed to bracket".into()));
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo_nu + hi_nu);
                    if solve_with(mid)?.norm() > *radius {
                        lo_nu = mid;
                    } else {
                        hi_nu = mid;
                    }
                    if hi_nu - lo_nu <= 1e-15 * (1.0 + hi_nu) {
                        break;
                    }
                }
                let u = solve_with(0.5 * (lo_nu + hi_nu))?;
                Ok(Some(u.data.into()))
            }
            ProxFriendly::L1 { weight, .. } => {
                if matches!(self.f, Smooth::Zero { .. }) || self.beta == 0.0 {
                    return Ok(Some(self.g.prox(lambda, x)?));
                }
                let diagonal = (0..n)
                    .all(|i| (0..n).all(|j| i == j || af[(i, j)].abs() <= 1e-14));
                if !diagonal {
                    return Ok(None);
                }
                // separable: per coordinate argmin of
                // 0.5 c u^2 + d u + w lambda |u| + 0.5 (u - x)^2
                let u: Vec<f64> = (0..n)
                    .map(|i| {
                        let c = scaled_a[(i, i)];
                        let d = scaled_b[i];
                        let t = weight * lambda;
                        let num = x[i] - d;
                        let shrunk = num.signum() * (num.abs() - t).max(0.0);
                        shrunk / (1.0 + c)
                    })
                    .collect();
                Ok(Some(u))
            }
        }
    }

    /// Prox of `U` by the requested route; the split route always exists.
    pub fn prox_u(&self, lambda: f64, x: &[f64], route: ProxRoute) -> Result<Vec<f64>> {
        match route {
            ProxRoute::Split => self.split_prox(lambda, x),
            ProxRoute::JointExact => self.joint_prox(lambda, x)?.ok_or_else(|| {
                Error::Domain("no closed-form joint prox for this composite".into())
            }),
        }
    }

    /// Moreau score `(mu(t) Prox_U^{lambda(t)}(x_t / mu(t)) - x_t) / sigma^2(t)`.
    pub fn moreau_score(
        &self,
        schedule: &Schedule,
        t: f64,
        x_t: &[f64],
        route: ProxRoute,
    ) -> Result<Vec<f64>> {
        let p = schedule.eval(t)?;
        if p.lambda <= 0.0 {
            return Err(Error::SingularTime(format!("lambda({t}) = 0 in moreau_score")));
        }
        let y: Vec<f64> = x_t.iter().map(|&v| v / p.mu).collect();
        let u = self.prox_u(p.lambda, &y, route)?;
        Ok(u.iter()
            .zip(x_t)
            .map(|(&ui, &xi)| (p.mu * ui - xi) / p.sigma2)
            .collect())
    }
}
