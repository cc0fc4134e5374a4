//! Independent reference values for tests: closed forms for one-dimensional
//! gradient diffusions and a random-search upper bound for the minimum action.
//!
//! Enabled by the `oracles` feature.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{action, DiscretePath};
use crate::error::{ensure_dim, Error, Result};
use crate::flow::integrate;
use crate::models::{FnModel, Model};
use crate::order::Point;

/// One-dimensional diffusions `dX = -U'(X) dt + eps dW` with a known
/// quasipotential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    /// `U(z) = lambda z^2 / 2`.
    Ou { lambda: f64 },
    /// `U(z) = sum_k c_k z^k`.
    Gradient1d { coefficients: Vec<f64> },
}

impl OracleSpec {
    pub fn potential(&self, z: f64) -> f64 {
        match self {
            OracleSpec::Ou { lambda } => 0.5 * lambda * z * z,
            OracleSpec::Gradient1d { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * z + c),
        }
    }

    pub fn potential_prime(&self, z: f64) -> f64 {
        match self {
            OracleSpec::Ou { lambda } => lambda * z,
            OracleSpec::Gradient1d { coefficients } => {
                coefficients.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, c)| acc * z + k as f64 * c)
            }
        }
    }

    pub fn potential_second(&self, z: f64) -> f64 {
        match self {
            OracleSpec::Ou { lambda } => *lambda,
            OracleSpec::Gradient1d { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * z + (k * (k - 1)) as f64 * c),
        }
    }

    /// The model `b = -U'`, `sigma = 1`.
    pub fn model(&self) -> FnModel {
        let a = self.clone();
        let b = self.clone();
        FnModel::new(
            1,
            move |x, out| out[0] = -a.potential_prime(x[0]),
            move |x| DMatrix::from_element(1, 1, -b.potential_second(x[0])),
        )
    }

    /// `V(x, y) = 2 int_x^y (dU)^+`: downhill stretches are free, uphill
    /// ones cost twice the potential gain.
    pub fn quasipotential(&self, x: f64, y: f64) -> f64 {
        if let OracleSpec::Ou { lambda } = self {
            return ou_quasipotential(*lambda, x, y);
        }
        let n = 20_000;
        let mut total = 0.0;
        let mut prev = self.potential(x);
        for k in 1..=n {
            let u = self.potential(x + (y - x) * k as f64 / n as f64);
            total += (u - prev).max(0.0);
            prev = u;
        }
        2.0 * total
    }
}

/// Quasipotential of `dX = -lambda X dt + dW` from `x` to `y`.
pub fn ou_quasipotential(lambda: f64, x: f64, y: f64) -> f64 {
    if x * y > 0.0 {
        lambda * (y * y - x * x).max(0.0)
    } else {
        lambda * y * y
    }
}

/// Minimum action of the same process over the fixed horizon `t`:
/// `lambda (y - x e^{-lambda t})^2 / (1 - e^{-2 lambda t})`.
pub fn ou_finite_horizon(lambda: f64, x: f64, y: f64, t: f64) -> f64 {
    let e = (-lambda * t).exp();
    lambda * (y - x * e).powi(2) / (1.0 - e * e)
}

/// Smallest action among `n_trials` candidate paths from `x` to `y` on
/// `[0, t]`: trial 0 is the straight path, trial 1 follows the flow for
/// half the horizon and then runs straight to `y`, and every later trial
/// perturbs one of these two by random sine modes vanishing at the ends.
pub fn random_path_probe(
    model: &dyn Model,
    x: &Point,
    y: &Point,
    t: f64,
    n_segments: usize,
    n_trials: usize,
    seed: u64,
) -> Result<f64> {
    ensure_dim(model.dim(), x.dim())?;
    ensure_dim(model.dim(), y.dim())?;
    if n_trials == 0 {
        return Err(Error::InvalidInput("probe needs at least one trial".into()));
    }
    let straight = DiscretePath::straight(x, y, t, n_segments)?;
    let spliced = if n_trials > 1 { Some(flow_spliced(model, x, y, t, n_segments)?) } else { None };
    let scale = x.distance(y).max(1e-3);
    let actions: Vec<Result<f64>> = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| {
            let base = match (i, &spliced) {
                (0, _) | (_, None) => &straight,
                (1, Some(s)) => s,
                (_, Some(s)) => {
                    if i % 2 == 0 {
                        &straight
                    } else {
                        s
                    }
                }
            };
            if i < 2 {
                return action(model, base);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let modes = 4;
            let amp = scale * 0.5f64.powi(rng.random_range(0..8));
            let coef: Vec<f64> = (0..modes * model.dim()).map(|_| amp * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let n = base.n_segments();
            let nodes: Vec<Point> = base
                .nodes()
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let s = k as f64 / n as f64;
                    let c = p
                        .coords()
                        .iter()
                        .enumerate()
                        .map(|(j, v)| {
                            v + (0..modes)
                                .map(|q| coef[j * modes + q] * ((q + 1) as f64 * std::f64::consts::PI * s).sin())
                                .sum::<f64>()
                        })
                        .collect();
                    Point::new(c).unwrap_or_else(|_| p.clone())
                })
                .collect();
            let mut nodes = nodes;
            nodes[0] = x.clone();
            nodes[n] = y.clone();
            action(model, &DiscretePath::new(base.times().to_vec(), nodes)?)
        })
        .collect();
    let mut best = f64::INFINITY;
    for a in actions {
        best = best.min(a?);
    }
    Ok(best)
}

fn flow_spliced(model: &dyn Model, x: &Point, y: &Point, t: f64, n: usize) -> Result<DiscretePath> {
    let half = (n / 2).max(1);
    let flow = integrate(model, x, t / 2.0, t / 2.0 / half as f64)?;
    let mut nodes: Vec<Point> = flow.states().to_vec();
    let mid = nodes.last().expect("nonempty").clone();
    let rest = n - half;
    for k in 1..=rest {
        let s = k as f64 / rest as f64;
        let c = mid.coords().iter().zip(y.coords()).map(|(a, b)| a + s * (b - a)).collect();
        nodes.push(Point::from_vec_unchecked(c));
    }
    let times = (0..=n).map(|i| if i == n { t } else { t * i as f64 / n as f64 }).collect();
    DiscretePath::new(times, nodes)
}
