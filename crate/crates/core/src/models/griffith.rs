//! The Griffith positive-feedback circuit
//!
//! ```text
//! x1' = f(x_r) - a1 x1,    xj' = x_{j-1} - aj xj  (2 <= j <= r)
//! f(z) = sgn(z) |z|^m / (1 + |z|^m),  m >= 1
//! ```
//!
//! perturbed by diagonal noise `eps * sigma_j(x_j) dW^j`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};
use crate::order::Point;

/// Per-coordinate diffusion `sigma_j`.
///
/// `const`: `sigma_j(z) = c`. `linear`: `sigma_j(z) = c sqrt(1 + z^2)`, the
/// largest profile allowed by the growth bound `sigma_j^2 <= c^2 (z^2 + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseSpec {
    Const { c: f64 },
    Linear { c: f64 },
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Const { c: 1.0 }
    }
}

impl NoiseSpec {
    /// `(sigma(z), sigma'(z))`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        match *self {
            NoiseSpec::Const { c } => (c, 0.0),
            NoiseSpec::Linear { c } => {
                let s = (1.0 + z * z).sqrt();
                (c * s, c * z / s)
            }
        }
    }

    /// Constant `c'` with `0 < sigma^2(z) <= c' (z^2 + 1)`.
    pub fn growth_bound(&self) -> f64 {
        match *self {
            NoiseSpec::Const { c } | NoiseSpec::Linear { c } => c * c,
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            NoiseSpec::Const { c } | NoiseSpec::Linear { c } => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriffithParams {
    alphas: Vec<f64>,
    m: f64,
    sigma: NoiseSpec,
}

impl GriffithParams {
    pub fn new(alphas: Vec<f64>, m: f64, sigma: NoiseSpec) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidInput("griffith model needs at least one decay rate".into()));
        }
        if alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidInput("griffith decay rates must be positive".into()));
        }
        if !(m.is_finite() && m >= 1.0) {
            return Err(Error::InvalidInput(format!("Hill exponent must satisfy m >= 1, got {m}")));
        }
        let c = sigma.scale();
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput("noise scale c must be positive".into()));
        }
        Ok(GriffithParams { alphas, m, sigma })
    }

    /// Constant unit noise.
    pub fn unit_noise(alphas: Vec<f64>, m: f64) -> Result<Self> {
        Self::new(alphas, m, NoiseSpec::default())
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn sigma(&self) -> NoiseSpec {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    /// `phi = prod alpha_i`.
    pub fn phi(&self) -> f64 {
        self.alphas.iter().product()
    }

    /// Equilibrium direction `V0 = (prod_{i>=2} a_i, prod_{i>=3} a_i, ..., a_r, 1)`.
    pub fn v0(&self) -> Point {
        let r = self.dim();
        let mut v = vec![1.0; r];
        for j in (0..r.saturating_sub(1)).rev() {
            v[j] = v[j + 1] * self.alphas[j + 1];
        }
        Point::from_vec_unchecked(v)
    }

    /// `-diag(alpha)` plus the unit subdiagonal, i.e. the Jacobian without
    /// the feedback corner.
    pub fn linear_part(&self) -> DMatrix<f64> {
        let r = self.dim();
        let mut a = DMatrix::zeros(r, r);
        for j in 0..r {
            a[(j, j)] = -self.alphas[j];
            if j > 0 {
                a[(j, j - 1)] = 1.0;
            }
        }
        a
    }
}

/// Hill-type feedback `f(z) = sgn(z) |z|^m / (1 + |z|^m)`.
pub fn hill(m: f64, z: f64) -> f64 {
    let p = z.abs().powf(m);
    z.signum() * p / (1.0 + p)
}

/// `f'(z) = m |z|^{m-1} / (1 + |z|^m)^2`, with `f'(0) = 1` for `m = 1` and `0` for `m > 1`.
pub fn hill_prime(m: f64, z: f64) -> f64 {
    let a = z.abs();
    if a == 0.0 {
        return if m == 1.0 { 1.0 } else { 0.0 };
    }
    let p = a.powf(m);
    m * a.powf(m - 1.0) / ((1.0 + p) * (1.0 + p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GriffithModel {
    params: GriffithParams,
}

impl GriffithModel {
    pub fn new(params: GriffithParams) -> Self {
        GriffithModel { params }
    }

    pub fn params(&self) -> &GriffithParams {
        &self.params
    }
}

impl Model for GriffithModel {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        let a = &self.params.alphas;
        let r = a.len();
        out[0] = hill(self.params.m, x[r - 1]) - a[0] * x[0];
        for j in 1..r {
            out[j] = x[j - 1] - a[j] * x[j];
        }
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let r = self.params.dim();
        let mut j = self.params.linear_part();
        j[(0, r - 1)] += hill_prime(self.params.m, x[r - 1]);
        j
    }

    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        let r = self.params.dim();
        DMatrix::from_fn(r, r, |i, k| if i == k { self.params.sigma.eval(x[i]).0 } else { 0.0 })
    }

    fn separable_noise(&self, _j: usize, z: f64) -> Option<(f64, f64)> {
        Some(self.params.sigma.eval(z))
    }
}

/// `1 / cos^5(2 pi / 5)`, the smallest Hill exponent admitting a Hopf point
/// for the 5-dimensional circuit with equal decay rates.
pub fn hopf_threshold() -> f64 {
    1.0 / (2.0 * PI / 5.0).cos().powi(5)
}

/// Hopf constants `(eta, beta)` of the 5-dimensional circuit with equal
/// decay rates:
/// `eta = (m cos^5(2pi/5) - 1)^{1/m}`, `beta = (eta^{m-1} / (1 + eta^m))^{1/5}`.
pub fn hopf_constants(m: f64) -> Result<(f64, f64)> {
    let c5 = (2.0 * PI / 5.0).cos().powi(5);
    let base = m * c5 - 1.0;
    // the threshold itself is hit up to rounding
    if base < -1e-12 {
        return Err(Error::NoHopfPoint { m, threshold: hopf_threshold() });
    }
    // tiny positive round-off would survive the 1/m root as a large value
    let eta = if base.abs() <= 1e-12 { 0.0 } else { base.powf(1.0 / m) };
    let beta = (eta.powf(m - 1.0) / (1.0 + eta.powf(m))).powf(0.2);
    Ok((eta, beta))
}
