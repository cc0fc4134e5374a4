//! Drift/diffusion models `dX = b(X) dt + eps * sigma(X) dW` and the
//! structural checks behind the cooperative-systems hypotheses.

mod griffith;
mod hypotheses;
mod lyapunov;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::Point;

pub use griffith::{hill, hill_prime, hopf_constants, hopf_threshold, GriffithModel, GriffithParams, NoiseSpec};
pub use hypotheses::{
    annulus_grid, box_grid, check_cooperative, check_irreducible, verify_h2, verify_h3, Check, H2Params, H3Params,
    Hypothesis, HypothesisReport,
};
pub use lyapunov::{solve_lyapunov, LyapunovQuadratic, LYAPUNOV_RESIDUAL_TOL};

/// A perturbed ODE system on `R^dim`.
///
/// Implementors supply the drift, its Jacobian and the diffusion matrix.
/// Models whose diffusion is diagonal with `sigma_j` depending only on
/// `x_j` should override [`Model::separable_noise`]; the SDE and action
/// kernels take a fast path for them.
pub trait Model: Send + Sync {
    fn dim(&self) -> usize;

    fn drift_into(&self, x: &[f64], out: &mut [f64]);

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;

    fn diffusion(&self, x: &[f64]) -> DMatrix<f64>;

    /// `(sigma_j(z), sigma_j'(z))` when the diffusion is diagonal and separable.
    fn separable_noise(&self, _j: usize, _z: f64) -> Option<(f64, f64)> {
        None
    }

    fn drift(&self, x: &Point) -> Point {
        let mut out = vec![0.0; self.dim()];
        self.drift_into(x.coords(), &mut out);
        Point::from_vec_unchecked(out)
    }

    /// `a(x) = sigma(x) sigma(x)^T`.
    fn covariance(&self, x: &[f64]) -> DMatrix<f64> {
        let s = self.diffusion(x);
        &s * s.transpose()
    }

    /// `d a / d x_k`, by central differences unless the noise is separable.
    fn covariance_partial(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        let n = self.dim();
        if self.separable_noise(0, x[0]).is_some() {
            let mut d = DMatrix::zeros(n, n);
            let (s, ds) = self.separable_noise(k, x[k]).unwrap_or((0.0, 0.0));
            d[(k, k)] = 2.0 * s * ds;
            return d;
        }
        let h = 1e-6 * (1.0 + x[k].abs());
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        (self.covariance(&xp) - self.covariance(&xm)) / (2.0 * h)
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).drift_into(x, out)
    }
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        (**self).jacobian(x)
    }
    fn diffusion(&self, x: &[f64]) -> DMatrix<f64> {
        (**self).diffusion(x)
    }
    fn separable_noise(&self, j: usize, z: f64) -> Option<(f64, f64)> {
        (**self).separable_noise(j, z)
    }
    fn covariance(&self, x: &[f64]) -> DMatrix<f64> {
        (**self).covariance(x)
    }
    fn covariance_partial(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        (**self).covariance_partial(x, k)
    }
}

/// Ornstein-Uhlenbeck model `b(x) = -lambda x`, `sigma = I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuModel {
    pub lambda: f64,
    pub dim: usize,
}

impl OuModel {
    pub fn new(lambda: f64, dim: usize) -> Result<Self> {
        if !(lambda > 0.0) || dim == 0 {
            return Err(Error::InvalidInput("OU model needs lambda > 0 and dim >= 1".into()));
        }
        Ok(OuModel { lambda, dim })
    }
}

impl Model for OuModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = -self.lambda * xi;
        }
    }
    fn jacobian(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * -self.lambda
    }
    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }
    fn separable_noise(&self, _j: usize, _z: f64) -> Option<(f64, f64)> {
        Some((1.0, 0.0))
    }
}

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type JacobianFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// A model assembled from closures with a constant diffusion matrix.
/// Handy for counterexamples and synthetic test systems.
#[derive(Clone)]
pub struct FnModel {
    dim: usize,
    drift: Arc<DriftFn>,
    jacobian: Arc<JacobianFn>,
    sigma: DMatrix<f64>,
}

impl FnModel {
    pub fn new<D, J>(dim: usize, drift: D, jacobian: J) -> Self
    where
        D: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        FnModel { dim, drift: Arc::new(drift), jacobian: Arc::new(jacobian), sigma: DMatrix::identity(dim, dim) }
    }

    pub fn with_diffusion(mut self, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != self.dim || sigma.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: sigma.nrows() });
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Linear model `b(x) = A x`.
    pub fn linear(a: DMatrix<f64>) -> Self {
        let dim = a.nrows();
        let a2 = a.clone();
        FnModel::new(
            dim,
            move |x, out| {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..x.len()).map(|j| a[(i, j)] * x[j]).sum();
                }
            },
            move |_| a2.clone(),
        )
    }
}

impl std::fmt::Debug for FnModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnModel").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl Model for FnModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.jacobian)(x)
    }
    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        self.sigma.clone()
    }
    fn covariance_partial(&self, _x: &[f64], _k: usize) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }
}

/// JSON model description.
///
/// `{"type":"griffith","alphas":[..],"m":..,"sigma":{"type":"const"|"linear","c":..}}`
/// or `{"type":"ou","lambda":..}` (optionally `"dim"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Griffith {
        alphas: Vec<f64>,
        m: f64,
        #[serde(default)]
        sigma: NoiseSpec,
    },
    Ou {
        lambda: f64,
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

fn default_dim() -> usize {
    1
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn Model>> {
        match self {
            ModelSpec::Griffith { .. } => Ok(Box::new(self.griffith()?.expect("griffith spec"))),
            ModelSpec::Ou { lambda, dim } => Ok(Box::new(OuModel::new(*lambda, *dim)?)),
        }
    }

    /// The Griffith model when this spec describes one.
    pub fn griffith(&self) -> Result<Option<GriffithModel>> {
        match self {
            ModelSpec::Griffith { alphas, m, sigma } => {
                Ok(Some(GriffithModel::new(GriffithParams::new(alphas.clone(), *m, *sigma)?)))
            }
            ModelSpec::Ou { .. } => Ok(None),
        }
    }

    /// Linear part used for the quadratic Lyapunov function.
    pub fn linear_part(&self) -> Result<DMatrix<f64>> {
        match self {
            ModelSpec::Griffith { .. } => Ok(self.griffith()?.expect("griffith spec").params().linear_part()),
            ModelSpec::Ou { lambda, dim } => Ok(DMatrix::identity(*dim, *dim) * -*lambda),
        }
    }
}
