//! Freidlin-Wentzell action of discretized paths, low-action path
//! constructions and quasipotential estimation by action minimization.
//!
//! The action of a path `phi` on `[0, T]` is `int L(phi, phi') dt` with
//! `L(u, beta) = 1/2 (beta - b(u))^T a(u)^{-1} (beta - b(u))` and
//! `a = sigma sigma^T`. Paths are discretized on a time grid and the
//! integral is taken by the midpoint rule on each segment.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::flow::{write_csv_header, write_csv_rows, Rk4, Trajectory};
use crate::models::Model;
use crate::order::Point;

/// Largest accepted condition number of `a(u)`.
pub const MAX_DIFFUSION_CONDITION: f64 = 1e12;
/// T grid scanned by [`quasipotential`] by default.
pub const DEFAULT_T_GRID: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];

/// A path sampled on a strictly increasing time grid starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    times: Vec<f64>,
    nodes: Vec<Point>,
    action: Option<f64>,
}

impl DiscretePath {
    pub fn new(times: Vec<f64>, nodes: Vec<Point>) -> Result<Self> {
        if nodes.len() < 2 || times.len() != nodes.len() {
            return Err(Error::InvalidInput("a path needs at least two nodes and one time per node".into()));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidInput("path times must start at 0 and increase strictly".into()));
        }
        let dim = nodes[0].dim();
        for p in &nodes {
            ensure_dim(dim, p.dim())?;
        }
        Ok(DiscretePath { times, nodes, action: None })
    }

    /// Straight path from `x` to `y` at constant speed over `[0, t]` with
    /// `n` equal segments. `x = y` gives the constant path.
    pub fn straight(x: &Point, y: &Point, t: f64, n: usize) -> Result<Self> {
        ensure_dim(x.dim(), y.dim())?;
        if !(t > 0.0 && t.is_finite()) || n == 0 {
            return Err(Error::InvalidInput(format!("straight path needs T > 0 and n >= 1 (T = {t}, n = {n})")));
        }
        let times = (0..=n).map(|i| if i == n { t } else { t * i as f64 / n as f64 }).collect();
        let nodes = (0..=n)
            .map(|i| {
                let s = i as f64 / n as f64;
                let c = x.coords().iter().zip(y.coords()).map(|(a, b)| a + s * (b - a)).collect();
                Point::from_vec_unchecked(c)
            })
            .collect();
        Ok(DiscretePath { times, nodes, action: None })
    }

    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        DiscretePath::new(traj.times().to_vec(), traj.states().to_vec())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].dim()
    }

    pub fn n_segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn start(&self) -> &Point {
        &self.nodes[0]
    }

    pub fn end(&self) -> &Point {
        self.nodes.last().expect("nonempty")
    }

    /// Cached action, if computed.
    pub fn cached_action(&self) -> Option<f64> {
        self.action
    }

    /// Computes and caches the action.
    pub fn evaluate(&mut self, model: &dyn Model) -> Result<f64> {
        let s = action(model, self)?;
        self.action = Some(s);
        Ok(s)
    }

    /// Position at time `t` by linear interpolation (clamped to `[0, T]`).
    pub fn at(&self, t: f64) -> Point {
        let t = t.clamp(0.0, self.horizon());
        let k = match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(k) => return self.nodes[k].clone(),
            Err(k) => k.max(1),
        };
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let s = (t - t0) / (t1 - t0);
        let c = self.nodes[k - 1].coords().iter().zip(self.nodes[k].coords()).map(|(a, b)| a + s * (b - a)).collect();
        Point::from_vec_unchecked(c)
    }

    /// First `k + 1` nodes.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k >= self.nodes.len() {
            return Err(Error::InvalidInput(format!("prefix length {k} outside 1..={}", self.n_segments())));
        }
        Ok(DiscretePath { times: self.times[..=k].to_vec(), nodes: self.nodes[..=k].to_vec(), action: None })
    }

    /// Appends `other`, shifted in time; its first node must equal our last.
    pub fn concat(&self, other: &DiscretePath) -> Result<Self> {
        ensure_dim(self.dim(), other.dim())?;
        if self.end().distance(other.start()) > 1e-12 * (1.0 + self.end().norm()) {
            return Err(Error::InvalidInput("concatenated paths must share the junction node".into()));
        }
        let shift = self.horizon();
        let mut times = self.times.clone();
        let mut nodes = self.nodes.clone();
        times.extend(other.times[1..].iter().map(|t| t + shift));
        nodes.extend_from_slice(&other.nodes[1..]);
        Ok(DiscretePath { times, nodes, action: None })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_csv_header(&mut w, "t", self.dim())?;
        write_csv_rows(&mut w, "", &self.times, &self.nodes)
    }

    fn flat(&self) -> Vec<f64> {
        self.nodes.iter().flat_map(|p| p.coords().iter().copied()).collect()
    }

    fn from_flat(times: Vec<f64>, flat: &[f64], dim: usize) -> Self {
        let nodes = flat.chunks(dim).map(|c| Point::from_vec_unchecked(c.to_vec())).collect();
        DiscretePath { times, nodes, action: None }
    }
}

/// The same curve sampled at `n + 1` equally spaced times of its own clock,
/// then run over the horizon `t`.
pub fn resample(path: &DiscretePath, t: f64, n: usize) -> Result<DiscretePath> {
    if !(t > 0.0 && t.is_finite()) || n == 0 {
        return Err(Error::InvalidInput(format!("resampling needs T > 0 and n >= 1 (T = {t}, n = {n})")));
    }
    let own = path.horizon();
    let times = (0..=n).map(|i| if i == n { t } else { t * i as f64 / n as f64 }).collect();
    let mut nodes: Vec<Point> = (0..=n).map(|i| path.at(own * i as f64 / n as f64)).collect();
    nodes[0] = path.start().clone();
    nodes[n] = path.end().clone();
    Ok(DiscretePath { times, nodes, action: None })
}

/// Lagrangian evaluation with reusable buffers.
struct Kernel<'a> {
    model: &'a dyn Model,
    dim: usize,
    separable: bool,
    b: Vec<f64>,
    w: Vec<f64>,
    q: Vec<f64>,
    sig: Vec<(f64, f64)>,
}

impl<'a> Kernel<'a> {
    fn new(model: &'a dyn Model) -> Self {
        let dim = model.dim();
        Kernel {
            model,
            dim,
            separable: model.separable_noise(0, 0.0).is_some(),
            b: vec![0.0; dim],
            w: vec![0.0; dim],
            q: vec![0.0; dim],
            sig: vec![(0.0, 0.0); dim],
        }
    }

    /// `L(u, beta)`; leaves `q = a^{-1} (beta - b(u))` in the buffer.
    fn lagrangian(&mut self, u: &[f64], beta: &[f64]) -> Result<f64> {
        self.model.drift_into(u, &mut self.b);
        for j in 0..self.dim {
            self.w[j] = beta[j] - self.b[j];
        }
        if self.separable {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for j in 0..self.dim {
                let s = self.model.separable_noise(j, u[j]).unwrap_or((0.0, 0.0));
                let a = s.0 * s.0;
                lo = lo.min(a);
                hi = hi.max(a);
                self.sig[j] = s;
                self.q[j] = self.w[j] / a;
            }
            if !(lo > 0.0) || hi / lo > MAX_DIFFUSION_CONDITION {
                return Err(Error::DegenerateDiffusion { condition: if lo > 0.0 { hi / lo } else { f64::INFINITY } });
            }
        } else {
            let a = self.model.covariance(u);
            let ev = a.clone().symmetric_eigenvalues();
            let (lo, hi) = ev.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &e| (l.min(e), h.max(e)));
            if !(lo > 0.0) || hi / lo > MAX_DIFFUSION_CONDITION {
                return Err(Error::DegenerateDiffusion { condition: if lo > 0.0 { hi / lo } else { f64::INFINITY } });
            }
            let chol = a.cholesky().ok_or(Error::DegenerateDiffusion { condition: hi / lo })?;
            let q = chol.solve(&DVector::from_column_slice(&self.w));
            self.q.copy_from_slice(q.as_slice());
        }
        Ok(0.5 * self.w.iter().zip(&self.q).map(|(a, b)| a * b).sum::<f64>())
    }

    /// `dL/du` at the last evaluated point, written into `out`.
    fn lagrangian_du(&self, u: &[f64], out: &mut [f64]) {
        let jac = self.model.jacobian(u);
        for k in 0..self.dim {
            let mut s = 0.0;
            for i in 0..self.dim {
                s -= jac[(i, k)] * self.q[i];
            }
            out[k] = s;
        }
        if self.separable {
            for k in 0..self.dim {
                let (s, ds) = self.sig[k];
                out[k] -= self.q[k] * self.q[k] * s * ds;
            }
        } else {
            let q = DVector::from_column_slice(&self.q);
            for (k, o) in out.iter_mut().enumerate() {
                let da: DMatrix<f64> = self.model.covariance_partial(u, k);
                *o -= 0.5 * q.dot(&(da * &q));
            }
        }
    }

    fn segment(&mut self, times: &[f64], x: &[f64], i: usize, mid: &mut [f64], vel: &mut [f64]) -> Result<f64> {
        let d = self.dim;
        let dt = times[i + 1] - times[i];
        for j in 0..d {
            let (a, b) = (x[i * d + j], x[(i + 1) * d + j]);
            mid[j] = 0.5 * (a + b);
            vel[j] = (b - a) / dt;
        }
        Ok(dt * self.lagrangian(mid, vel)?)
    }

    fn action(&mut self, times: &[f64], x: &[f64]) -> Result<f64> {
        let mut mid = vec![0.0; self.dim];
        let mut vel = vec![0.0; self.dim];
        let mut s = 0.0;
        for i in 0..times.len() - 1 {
            s += self.segment(times, x, i, &mut mid, &mut vel)?;
        }
        Ok(s)
    }

    /// Action and its gradient with respect to every node; the endpoint
    /// rows of `g` are set to zero.
    fn action_gradient(&mut self, times: &[f64], x: &[f64], g: &mut [f64]) -> Result<f64> {
        let d = self.dim;
        let n = times.len() - 1;
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut mid = vec![0.0; d];
        let mut vel = vec![0.0; d];
        let mut lu = vec![0.0; d];
        let mut s = 0.0;
        for i in 0..n {
            let dt = times[i + 1] - times[i];
            s += self.segment(times, x, i, &mut mid, &mut vel)?;
            self.lagrangian_du(&mid, &mut lu);
            for j in 0..d {
                // d/d phi_i and d/d phi_{i+1} of dt * L(mid, vel)
                let common = 0.5 * dt * lu[j];
                g[i * d + j] += common - self.q[j];
                g[(i + 1) * d + j] += common + self.q[j];
            }
        }
        g[..d].iter_mut().for_each(|v| *v = 0.0);
        g[n * d..].iter_mut().for_each(|v| *v = 0.0);
        Ok(s)
    }
}

/// `L(u, beta)`.
pub fn lagrangian(model: &dyn Model, u: &Point, beta: &Point) -> Result<f64> {
    ensure_dim(model.dim(), u.dim())?;
    ensure_dim(model.dim(), beta.dim())?;
    Kernel::new(model).lagrangian(u.coords(), beta.coords())
}

/// Midpoint-rule action `sum dt_i L((phi_i + phi_{i+1}) / 2, (phi_{i+1} - phi_i) / dt_i)`.
pub fn action(model: &dyn Model, path: &DiscretePath) -> Result<f64> {
    ensure_dim(model.dim(), path.dim())?;
    Kernel::new(model).action(&path.times, &path.flat())
}

/// Gradient of the discretized action with respect to the interior nodes;
/// the first and last entries are zero vectors.
pub fn action_gradient(model: &dyn Model, path: &DiscretePath) -> Result<(f64, Vec<Point>)> {
    ensure_dim(model.dim(), path.dim())?;
    let x = path.flat();
    let mut g = vec![0.0; x.len()];
    let s = Kernel::new(model).action_gradient(&path.times, &x, &mut g)?;
    Ok((s, g.chunks(path.dim()).map(|c| Point::from_vec_unchecked(c.to_vec())).collect()))
}

/// Unit-speed straight segment from `x` to `y` over `T = |y - x|`, split
/// into `n` equal segments.
pub fn lif_path(x: &Point, y: &Point, n: usize) -> Result<DiscretePath> {
    ensure_dim(x.dim(), y.dim())?;
    let t = x.distance(y);
    if t == 0.0 {
        return Err(Error::DegenerateLif);
    }
    DiscretePath::straight(x, y, t, n)
}

/// `max 1/2 (1 + |b|)^2 |a^{-1}|` over a grid with `n` points per axis on
/// the box `[lo, hi]`. Unit-speed segments inside the box then cost at most
/// this constant times their length.
pub fn lif_constant(model: &dyn Model, lo: &Point, hi: &Point, n: usize) -> Result<f64> {
    let d = model.dim();
    ensure_dim(d, lo.dim())?;
    ensure_dim(d, hi.dim())?;
    if n < 2 {
        return Err(Error::InvalidInput("LIF constant grid needs at least two points per axis".into()));
    }
    let total = n
        .checked_pow(d as u32)
        .filter(|t| *t <= 1 << 22)
        .ok_or_else(|| Error::InvalidInput(format!("LIF constant grid of {n}^{d} points is too large")))?;
    let mut u = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut best = 0.0f64;
    for mut idx in 0..total {
        for j in 0..d {
            let k = idx % n;
            idx /= n;
            u[j] = lo[j] + (hi[j] - lo[j]) * k as f64 / (n - 1) as f64;
        }
        model.drift_into(&u, &mut b);
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let lmin = if model.separable_noise(0, u[0]).is_some() {
            (0..d).map(|j| model.separable_noise(j, u[j]).unwrap_or((0.0, 0.0)).0.powi(2)).fold(f64::INFINITY, f64::min)
        } else {
            model.covariance(&u).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
        };
        if !(lmin > 0.0) {
            return Err(Error::DegenerateDiffusion { condition: f64::INFINITY });
        }
        best = best.max(0.5 * (1.0 + nb).powi(2) / lmin);
    }
    Ok(best)
}

/// Slow traversal of a sampled stationary arc ending at the escape start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcCrawl {
    /// Arc samples in traversal order; the last one is the escape start.
    pub points: Vec<Point>,
    /// Action budget: the crawl costs at most `eta / 2`.
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcCrawlPath {
    pub path: DiscretePath,
    /// `tau = lambda_0 M^{-2} eta`.
    pub tau: f64,
    pub lambda0: f64,
    pub speed: f64,
}

/// The path `h(tau t)` for `t` in `[0, 1 / tau]`, where `h` runs along the
/// arc samples at uniform parameter speed `M` on `[0, 1]`.
pub fn arc_crawl_path(model: &dyn Model, crawl: &ArcCrawl) -> Result<ArcCrawlPath> {
    let pts = &crawl.points;
    if pts.len() < 2 || !(crawl.eta > 0.0) {
        return Err(Error::InvalidInput("arc crawl needs two or more points and eta > 0".into()));
    }
    let mut lambda0 = f64::INFINITY;
    for p in pts {
        ensure_dim(model.dim(), p.dim())?;
        let ev = model.covariance(p.coords()).symmetric_eigenvalues();
        lambda0 = lambda0.min(ev.iter().copied().fold(f64::INFINITY, f64::min));
    }
    if !(lambda0 > 0.0) {
        return Err(Error::DegenerateDiffusion { condition: f64::INFINITY });
    }
    // piecewise-linear h with equal parameter length per piece
    let pieces = pts.len() - 1;
    let speed = pts.windows(2).map(|w| w[0].distance(&w[1]) * pieces as f64).fold(0.0, f64::max);
    if speed == 0.0 {
        return Err(Error::DegenerateLif);
    }
    let tau = lambda0 * crawl.eta / (speed * speed);
    let t1 = 1.0 / tau;
    let sub = 8;
    let n = pieces * sub;
    let mut times = Vec::with_capacity(n + 1);
    let mut nodes = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let (piece, frac) = if i == n { (pieces - 1, 1.0) } else { (i / sub, (i % sub) as f64 / sub as f64) };
        let (a, b) = (&pts[piece], &pts[piece + 1]);
        let c = a.coords().iter().zip(b.coords()).map(|(x, y)| x + frac * (y - x)).collect();
        nodes.push(Point::from_vec_unchecked(c));
        times.push(if i == n { t1 } else { t1 * i as f64 / n as f64 });
    }
    Ok(ArcCrawlPath { path: DiscretePath::new(times, nodes)?, tau, lambda0, speed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeOptions {
    pub step: f64,
    pub t_max: f64,
    /// Segments per straight piece.
    pub lif_segments: usize,
    /// Grid points per axis for the LIF constants.
    pub constant_grid: usize,
}

impl Default for EscapeOptions {
    fn default() -> Self {
        EscapeOptions { step: 1e-2, t_max: 2e3, lif_segments: 8, constant_grid: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapePath {
    pub path: DiscretePath,
    pub action: f64,
    /// LIF constant on the box of half-width `2 delta` around `y`.
    pub l1: f64,
    /// LIF constant on the box of half-width `2 delta` around `z`.
    pub l2: f64,
    /// `(l1 + l2) delta`, plus `eta / 2` when an arc crawl is prepended.
    pub bound: f64,
    pub flow_time: f64,
    pub crawl: Option<ArcCrawlPath>,
}

fn box_around(p: &Point, half: f64) -> (Point, Point) {
    (
        Point::from_vec_unchecked(p.coords().iter().map(|c| c - half).collect()),
        Point::from_vec_unchecked(p.coords().iter().map(|c| c + half).collect()),
    )
}

/// Low-action path from `y` to the attractor point `z`: a straight step to
/// `y + delta v` (unit `v >> 0`), the deterministic flow until it comes
/// within `delta` of `z`, and a straight step onto `z`.
pub fn escape_path(
    model: &dyn Model,
    y: &Point,
    delta: f64,
    v: &Point,
    z: &Point,
    crawl: Option<&ArcCrawl>,
    opts: &EscapeOptions,
) -> Result<EscapePath> {
    let d = model.dim();
    ensure_dim(d, y.dim())?;
    ensure_dim(d, v.dim())?;
    ensure_dim(d, z.dim())?;
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("escape step must be positive, got {delta}")));
    }
    if !v.coords().iter().all(|c| *c > 0.0) {
        return Err(Error::InvalidInput("escape direction must be strongly positive".into()));
    }
    let unit = v.scaled(1.0 / v.norm());
    let y1 = y.offset(delta, &unit);
    let first = lif_path(y, &y1, opts.lif_segments)?;

    let mut rk = Rk4::new(d);
    let mut x = y1.coords().to_vec();
    let mut times = vec![0.0];
    let mut nodes = vec![y1.clone()];
    let n_max = (opts.t_max / opts.step).ceil() as usize;
    let mut reached = false;
    for k in 1..=n_max {
        rk.step(model, &mut x, opts.step);
        let p = Point::from_vec_unchecked(x.clone());
        if !p.is_finite() {
            return Err(Error::NumericalBlowUp { time: k as f64 * opts.step });
        }
        times.push(k as f64 * opts.step);
        let close = p.distance(z) < delta;
        nodes.push(p);
        if close {
            reached = true;
            break;
        }
    }
    if !reached {
        return Err(Error::Inconclusive(format!(
            "flow from y + delta v did not come within {delta} of the attractor point by t = {}",
            opts.t_max
        )));
    }
    let flow_time = *times.last().expect("nonempty");
    let flow = DiscretePath::new(times, nodes)?;
    let y2 = flow.end().clone();
    let mut path = first.concat(&flow)?;
    if y2.distance(z) > 0.0 {
        path = path.concat(&lif_path(&y2, z, opts.lif_segments)?)?;
    }

    let (lo1, hi1) = box_around(y, 2.0 * delta);
    let (lo2, hi2) = box_around(z, 2.0 * delta);
    let l1 = lif_constant(model, &lo1, &hi1, opts.constant_grid)?;
    let l2 = lif_constant(model, &lo2, &hi2, opts.constant_grid)?;
    let mut bound = (l1 + l2) * delta;

    let crawl_path = match crawl {
        Some(c) => {
            let cp = arc_crawl_path(model, c)?;
            if cp.path.end().distance(y) > 1e-12 * (1.0 + y.norm()) {
                return Err(Error::InvalidInput("arc crawl must end at the escape start".into()));
            }
            path = cp.path.concat(&path)?;
            bound += 0.5 * c.eta;
            Some(cp)
        }
        None => None,
    };
    let s = path.evaluate(model)?;
    Ok(EscapePath { path, action: s, l1, l2, bound, flow_time, crawl: crawl_path })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop when the gradient infinity norm drops below this.
    pub grad_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
    /// Keep the action of every iterate.
    pub record_history: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { max_iters: 50_000, grad_tol: 1e-6, armijo: 1e-4, shrink: 0.5, record_history: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerDiagnostics {
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub line_search_failed: bool,
    pub initial_action: f64,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasipotentialEstimate {
    pub value: f64,
    pub path: DiscretePath,
    /// Horizon of the stored path.
    pub horizon: f64,
    /// Horizon of the grid on which the path was optimized.
    pub t_grid_value: f64,
    /// Which seed produced the estimate.
    pub seed_kind: String,
    pub diagnostics: OptimizerDiagnostics,
    /// Best value found for each scanned horizon.
    pub per_t: Vec<(f64, f64)>,
}

impl QuasipotentialEstimate {
    pub fn write_summary_json<W: Write>(&self, w: W) -> serde_json::Result<()> {
        #[derive(Serialize)]
        struct Summary<'a> {
            value: f64,
            horizon: f64,
            t_grid_value: f64,
            seed_kind: &'a str,
            iterations: usize,
            grad_norm: f64,
            converged: bool,
            line_search_failed: bool,
            per_t: &'a [(f64, f64)],
        }
        serde_json::to_writer_pretty(
            w,
            &Summary {
                value: self.value,
                horizon: self.horizon,
                t_grid_value: self.t_grid_value,
                seed_kind: &self.seed_kind,
                iterations: self.diagnostics.iterations,
                grad_norm: self.diagnostics.grad_norm,
                converged: self.diagnostics.converged,
                line_search_failed: self.diagnostics.line_search_failed,
                per_t: &self.per_t,
            },
        )
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Steepest descent on the interior nodes with Armijo backtracking. The
/// trial step is the Barzilai-Borwein length of the previous move; the
/// accepted step always satisfies the sufficient-decrease condition, so
/// the action never increases.
pub fn minimize_action(
    model: &dyn Model,
    init: &DiscretePath,
    opts: &MinimizeOptions,
) -> Result<QuasipotentialEstimate> {
    ensure_dim(model.dim(), init.dim())?;
    let mut k = Kernel::new(model);
    let times = init.times.clone();
    let mut x = init.flat();
    let mut g = vec![0.0; x.len()];
    let mut s = k.action_gradient(&times, &x, &mut g)?;
    let s0 = s;
    let mut history = if opts.record_history { vec![s] } else { Vec::new() };
    let mut trial = vec![0.0; x.len()];
    let mut g_new = vec![0.0; x.len()];
    let mut alpha = 1.0 / inf_norm(&g).max(1.0);
    let mut iterations = 0;
    let mut converged = inf_norm(&g) < opts.grad_tol;
    let mut failed = false;
    while !converged && iterations < opts.max_iters {
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let mut step = alpha;
        let mut accepted = None;
        for _ in 0..80 {
            for i in 0..x.len() {
                trial[i] = x[i] - step * g[i];
            }
            if let Ok(st) = k.action(&times, &trial) {
                if st <= s - opts.armijo * step * gg {
                    accepted = Some(st);
                    break;
                }
            }
            step *= opts.shrink;
        }
        let Some(_) = accepted else {
            failed = true;
            break;
        };
        let s_new = k.action_gradient(&times, &trial, &mut g_new)?;
        // Barzilai-Borwein length for the next trial
        let (mut sy, mut ss) = (0.0, 0.0);
        for i in 0..x.len() {
            let dx = trial[i] - x[i];
            sy += dx * (g_new[i] - g[i]);
            ss += dx * dx;
        }
        alpha = if sy > 0.0 { ss / sy } else { 2.0 * step };
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        s = s_new;
        iterations += 1;
        if opts.record_history {
            history.push(s);
        }
        converged = inf_norm(&g) < opts.grad_tol;
    }
    let mut path = DiscretePath::from_flat(times, &x, init.dim());
    path.action = Some(s);
    let horizon = path.horizon();
    Ok(QuasipotentialEstimate {
        value: s,
        path,
        horizon,
        t_grid_value: horizon,
        seed_kind: "given".into(),
        diagnostics: OptimizerDiagnostics {
            iterations,
            grad_norm: inf_norm(&g),
            converged,
            line_search_failed: failed,
            initial_action: s0,
            history,
        },
        per_t: vec![(horizon, s)],
    })
}

/// Seed built from an escape-path construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeSeed {
    pub delta: f64,
    pub direction: Point,
    /// Attractor point the escape path heads for.
    pub attractor: Point,
    pub crawl: Option<ArcCrawl>,
    pub options: EscapeOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasipotentialOptions {
    pub t_grid: Vec<f64>,
    /// Segments per optimized path.
    pub n_segments: usize,
    /// Reaching the `eta`-ball around the target counts as arrival.
    pub eta: Option<f64>,
    pub escape: Option<EscapeSeed>,
    pub minimize: MinimizeOptions,
}

impl Default for QuasipotentialOptions {
    fn default() -> Self {
        QuasipotentialOptions {
            t_grid: DEFAULT_T_GRID.to_vec(),
            n_segments: 200,
            eta: Some(1e-2),
            escape: None,
            minimize: MinimizeOptions::default(),
        }
    }
}

/// Cuts the path at its first node inside the `eta`-ball around `target`
/// when that prefix is cheaper.
fn relax_to_ball(model: &dyn Model, est: &mut QuasipotentialEstimate, target: &Point, eta: f64) -> Result<()> {
    let hit = est.path.nodes.iter().enumerate().skip(1).find(|(_, p)| p.distance(target) <= eta).map(|(k, _)| k);
    if let Some(k) = hit {
        if k < est.path.n_segments() {
            let mut pre = est.path.prefix(k)?;
            let v = pre.evaluate(model)?;
            if v < est.value {
                est.value = v;
                est.horizon = pre.horizon();
                est.path = pre;
            }
        }
    }
    Ok(())
}

/// Estimate of `V(x, y)`: the smallest minimized action over the T grid,
/// each horizon seeded with the straight path and, when supplied, with the
/// resampled escape path. The unoptimized escape path is a further
/// candidate. Candidates run in parallel; ties go to the earliest.
pub fn quasipotential(
    model: &dyn Model,
    x: &Point,
    y: &Point,
    opts: &QuasipotentialOptions,
) -> Result<QuasipotentialEstimate> {
    ensure_dim(model.dim(), x.dim())?;
    ensure_dim(model.dim(), y.dim())?;
    if opts.t_grid.is_empty() || opts.t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidInput("T grid must be nonempty and positive".into()));
    }
    let escape = match &opts.escape {
        Some(e) => Some(escape_path(model, x, e.delta, &e.direction, &e.attractor, e.crawl.as_ref(), &e.options)?),
        None => None,
    };
    let mut seeds: Vec<(f64, &'static str, DiscretePath)> = Vec::new();
    for &t in &opts.t_grid {
        seeds.push((t, "straight", DiscretePath::straight(x, y, t, opts.n_segments)?));
        if let Some(e) = &escape {
            seeds.push((t, "escape", resample(&e.path, t, opts.n_segments)?));
        }
    }
    let mut results: Vec<Result<QuasipotentialEstimate>> = seeds
        .par_iter()
        .map(|(t, kind, seed)| {
            let mut est = minimize_action(model, seed, &opts.minimize)?;
            est.t_grid_value = *t;
            est.seed_kind = (*kind).into();
            if let Some(eta) = opts.eta {
                relax_to_ball(model, &mut est, y, eta)?;
            }
            Ok(est)
        })
        .collect();
    if let Some(e) = escape {
        let t = e.path.horizon();
        let mut est = QuasipotentialEstimate {
            value: e.action,
            horizon: t,
            t_grid_value: t,
            path: e.path,
            seed_kind: "escape_native".into(),
            diagnostics: OptimizerDiagnostics {
                iterations: 0,
                grad_norm: f64::NAN,
                converged: false,
                line_search_failed: false,
                initial_action: e.action,
                history: Vec::new(),
            },
            per_t: Vec::new(),
        };
        if let Some(eta) = opts.eta {
            relax_to_ball(model, &mut est, y, eta)?;
        }
        results.push(Ok(est));
    }
    let mut per_t: Vec<(f64, f64)> = opts.t_grid.iter().map(|&t| (t, f64::INFINITY)).collect();
    let mut best: Option<QuasipotentialEstimate> = None;
    for r in results {
        let est = r?;
        if let Some(slot) = per_t.iter_mut().find(|(t, _)| *t == est.t_grid_value && est.seed_kind != "escape_native") {
            slot.1 = slot.1.min(est.value);
        }
        if best.as_ref().is_none_or(|b| est.value < b.value) {
            best = Some(est);
        }
    }
    let mut best = best.expect("at least one candidate");
    best.per_t = per_t;
    Ok(best)
}

/// Whether the path lies in the level set `{phi from x : S(phi) <= s}`.
pub fn level_set_member(model: &dyn Model, path: &DiscretePath, x: &Point, s: f64) -> Result<bool> {
    ensure_dim(path.dim(), x.dim())?;
    if path.start().distance(x) > 1e-12 * (1.0 + x.norm()) {
        return Err(Error::InvalidInput("path does not start at x".into()));
    }
    if s == f64::INFINITY {
        return Ok(true);
    }
    Ok(action(model, path)? <= s)
}
