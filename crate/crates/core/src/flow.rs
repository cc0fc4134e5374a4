//! Deterministic flow `x' = b(x)`: fixed-step RK4 integration, omega-limit
//! probes, order-preservation checks and dual-attractor probes.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::models::Model;
use crate::order::{leq_tol, strictly_less, strongly_less, Point};

pub const DEFAULT_BLOWUP_GUARD: f64 = 1e6;
/// Consecutive steps with `|b(x)| < settle_tol` before a probe counts as settled.
pub const SETTLE_STEPS: usize = 10;

/// A sampled solution: `states[i]` at `times[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Point>,
    step: f64,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Point>, step: f64) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::InvalidInput("trajectory needs equally many (>= 1) times and states".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("trajectory times must be strictly increasing".into()));
        }
        if states.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("trajectory"));
        }
        Ok(Trajectory { times, states, step })
    }

    pub(crate) fn from_parts(times: Vec<f64>, states: Vec<Point>, step: f64) -> Self {
        Trajectory { times, states, step }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Point] {
        &self.states
    }

    /// Integrator step the trajectory was produced with.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &Point {
        self.states.last().expect("trajectory is nonempty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is nonempty")
    }

    /// CSV with header `t,x1,...,xr`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_csv_header(&mut w, "t", self.states.first().map_or(0, Point::dim))?;
        write_csv_rows(&mut w, "", &self.times, &self.states)
    }
}

/// `{first},x1,..,x{dim}`.
pub(crate) fn write_csv_header<W: Write>(w: &mut W, first: &str, dim: usize) -> io::Result<()> {
    write!(w, "{first}")?;
    for i in 1..=dim {
        write!(w, ",x{i}")?;
    }
    writeln!(w)
}

/// One `{prefix}t,x1,..` row per state.
pub(crate) fn write_csv_rows<W: Write>(w: &mut W, prefix: &str, times: &[f64], states: &[Point]) -> io::Result<()> {
    for (t, s) in times.iter().zip(states) {
        write!(w, "{prefix}{t}")?;
        for c in s.coords() {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Scratch space for classical RK4 steps.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(dim: usize) -> Self {
        Rk4 { k1: vec![0.0; dim], k2: vec![0.0; dim], k3: vec![0.0; dim], k4: vec![0.0; dim], tmp: vec![0.0; dim] }
    }

    pub(crate) fn step(&mut self, model: &dyn Model, x: &mut [f64], h: f64) {
        let n = x.len();
        model.drift_into(x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        model.drift_into(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        model.drift_into(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        model.drift_into(&self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn guard_check(x: &[f64], time: f64, guard: f64) -> Result<()> {
    let n = norm(x);
    if !n.is_finite() || n > guard {
        return Err(Error::NonDissipativeEscape { time, norm: n });
    }
    Ok(())
}

fn check_horizon(t: f64, step: f64) -> Result<usize> {
    if !(t > 0.0 && step > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("integration needs T > 0 and step > 0 (T = {t}, step = {step})")));
    }
    Ok(((t / step).round() as usize).max(1))
}

/// RK4 trajectory on `[0, t]`. The step is adjusted to `t / round(t / step)`
/// so that the grid ends exactly at `t`.
pub fn integrate(model: &dyn Model, x0: &Point, t: f64, step: f64) -> Result<Trajectory> {
    integrate_guarded(model, x0, t, step, DEFAULT_BLOWUP_GUARD)
}

pub fn integrate_guarded(model: &dyn Model, x0: &Point, t: f64, step: f64, guard: f64) -> Result<Trajectory> {
    ensure_dim(model.dim(), x0.dim())?;
    let n = check_horizon(t, step)?;
    let h = t / n as f64;
    let mut rk = Rk4::new(model.dim());
    let mut x = x0.coords().to_vec();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(x0.clone());
    for k in 1..=n {
        rk.step(model, &mut x, h);
        let tk = if k == n { t } else { k as f64 * h };
        guard_check(&x, tk, guard)?;
        times.push(tk);
        states.push(Point::from_vec_unchecked(x.clone()));
    }
    Ok(Trajectory::from_parts(times, states, h))
}

/// `Phi_t(x0)` without storing the trajectory.
pub fn flow_to(model: &dyn Model, x0: &Point, t: f64, step: f64) -> Result<Point> {
    ensure_dim(model.dim(), x0.dim())?;
    let n = check_horizon(t, step)?;
    let h = t / n as f64;
    let mut rk = Rk4::new(model.dim());
    let mut x = x0.coords().to_vec();
    for k in 1..=n {
        rk.step(model, &mut x, h);
        guard_check(&x, k as f64 * h, DEFAULT_BLOWUP_GUARD)?;
    }
    Ok(Point::from_vec_unchecked(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub step: f64,
    pub t_max: f64,
    pub settle_tol: f64,
    pub blowup_guard: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { step: 1e-2, t_max: 2e3, settle_tol: 1e-8, blowup_guard: DEFAULT_BLOWUP_GUARD }
    }
}

/// Outcome of integrating a seed until the vector field vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorProbe {
    pub seed: Point,
    pub point: Point,
    pub converged: bool,
    /// Time at which the probe settled (or `t_max`).
    pub time: f64,
    /// `|b(point)|`.
    pub residual: f64,
}

/// Integrates from `x0` until `|b(x)| < settle_tol` holds for
/// [`SETTLE_STEPS`] consecutive steps, or until `t_max`.
pub fn omega_limit_probe(model: &dyn Model, x0: &Point, opts: &ProbeOptions) -> Result<AttractorProbe> {
    ensure_dim(model.dim(), x0.dim())?;
    check_horizon(opts.t_max, opts.step)?;
    let dim = model.dim();
    let mut rk = Rk4::new(dim);
    let mut x = x0.coords().to_vec();
    let mut b = vec![0.0; dim];
    let mut quiet = 0usize;
    let mut t = 0.0;
    let n_max = (opts.t_max / opts.step).ceil() as usize;
    for k in 1..=n_max {
        rk.step(model, &mut x, opts.step);
        t = k as f64 * opts.step;
        guard_check(&x, t, opts.blowup_guard)?;
        model.drift_into(&x, &mut b);
        if norm(&b) < opts.settle_tol {
            quiet += 1;
            if quiet >= SETTLE_STEPS {
                return Ok(AttractorProbe {
                    seed: x0.clone(),
                    residual: norm(&b),
                    point: Point::from_vec_unchecked(x),
                    converged: true,
                    time: t,
                });
            }
        } else {
            quiet = 0;
        }
    }
    model.drift_into(&x, &mut b);
    Ok(AttractorProbe {
        seed: x0.clone(),
        residual: norm(&b),
        point: Point::from_vec_unchecked(x),
        converged: false,
        time: t,
    })
}

/// Probe of the upper (`delta > 0`) or lower (`delta < 0`) dual attractor:
/// the omega-limit of `p + delta v` for a unit direction `v >> 0`.
pub fn dual_attractor(
    model: &dyn Model,
    p: &Point,
    delta: f64,
    v: &Point,
    opts: &ProbeOptions,
) -> Result<AttractorProbe> {
    ensure_dim(model.dim(), p.dim())?;
    ensure_dim(model.dim(), v.dim())?;
    if !v.coords().iter().all(|c| *c > 0.0) {
        return Err(Error::InvalidInput("dual-attractor direction must be strongly positive".into()));
    }
    let unit = v.scaled(1.0 / v.norm());
    let start = p.offset(delta, &unit);
    let mut probe = omega_limit_probe(model, &start, opts)?;
    if !probe.converged {
        return Err(Error::Inconclusive(format!(
            "dual-attractor probe from {:?} did not settle within t = {}",
            start.coords(),
            opts.t_max
        )));
    }
    probe.seed = p.clone();
    Ok(probe)
}

/// Unit eigenvector of `Db(p)` for its largest real eigenvalue when that
/// eigenvalue is positive, oriented so that its coordinate sum is positive.
/// For irreducible cooperative Jacobians this direction is strongly
/// positive and approximates the unstable manifold at `p`.
pub fn unstable_direction(model: &dyn Model, p: &Point) -> Option<Point> {
    let j = model.jacobian(p.coords());
    let eig = j.clone().complex_eigenvalues();
    let lead = eig.iter().filter(|l| l.im.abs() < 1e-12).map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if !(lead > 0.0) {
        return None;
    }
    let n = j.nrows();
    // null vector of (J - lead I) via SVD
    let shifted = j - nalgebra::DMatrix::identity(n, n) * lead;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t?;
    let (imin, _) =
        svd.singular_values.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, s)| {
                if *s < acc.1 {
                    (i, *s)
                } else {
                    acc
                }
            },
        );
    let mut v: Vec<f64> = v_t.row(imin).iter().copied().collect();
    let s: f64 = v.iter().sum();
    let nv = norm(&v);
    let sign = if s < 0.0 { -1.0 } else { 1.0 };
    v.iter_mut().for_each(|c| *c *= sign / nv);
    Point::new(v).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityOptions {
    /// Lower corner of the sampling box for the smaller point.
    pub lo: f64,
    pub hi: f64,
    /// Largest coordinate gap `y_i - x_i`.
    pub max_gap: f64,
    pub step: f64,
    pub tol: f64,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        MonotonicityOptions { lo: -3.0, hi: 3.0, max_gap: 1.0, step: 1e-2, tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderViolation {
    pub x: Point,
    pub y: Point,
    pub phi_x: Point,
    pub phi_y: Point,
    pub strong: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub n_pairs: usize,
    pub t: f64,
    /// Pairs for which strong order was tested (`x < y`, `t >= 1`).
    pub strong_checked: usize,
    pub order_violations: usize,
    pub strong_violations: usize,
    pub violations: Vec<OrderViolation>,
}

/// `(ordered, strongly ordered when tested, phi_t(x), phi_t(y))`.
type PairOutcome = (bool, Option<bool>, Point, Point);

/// Samples `n_pairs` ordered pairs `x <= y` (each gap coordinate is zero
/// with probability 1/2), integrates both to time `t` and checks
/// `Phi_t(x) <= Phi_t(y) + tol`. For `x < y` and `t >= 1` it also checks
/// `Phi_t(x) << Phi_t(y)`.
pub fn check_monotonicity(
    model: &dyn Model,
    n_pairs: usize,
    t: f64,
    seed: u64,
    opts: &MonotonicityOptions,
) -> Result<MonotonicityReport> {
    let dim = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Point, Point)> = (0..n_pairs)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(opts.lo..opts.hi)).collect();
            let mut gap: Vec<f64> = (0..dim)
                .map(|_| if rng.random_bool(0.5) { rng.random_range(0.01..1.0) * opts.max_gap } else { 0.0 })
                .collect();
            if gap.iter().all(|g| *g == 0.0) {
                let k = rng.random_range(0..dim);
                gap[k] = rng.random_range(0.01..1.0) * opts.max_gap;
            }
            let y = x.iter().zip(&gap).map(|(a, g)| a + g).collect();
            (Point::from_vec_unchecked(x), Point::from_vec_unchecked(y))
        })
        .collect();
    let outcomes: Vec<Result<PairOutcome>> = pairs
        .par_iter()
        .map(|(x, y)| {
            let fx = flow_to(model, x, t, opts.step)?;
            let fy = flow_to(model, y, t, opts.step)?;
            let ordered = leq_tol(&fx, &fy, opts.tol)?;
            let strong = if t >= 1.0 && strictly_less(x, y)? { Some(strongly_less(&fx, &fy)?) } else { None };
            Ok((ordered, strong, fx, fy))
        })
        .collect();
    let mut report = MonotonicityReport {
        n_pairs,
        t,
        strong_checked: 0,
        order_violations: 0,
        strong_violations: 0,
        violations: Vec::new(),
    };
    for ((x, y), out) in pairs.into_iter().zip(outcomes) {
        let (ordered, strong, fx, fy) = out?;
        if strong.is_some() {
            report.strong_checked += 1;
        }
        let strong_fail = strong == Some(false);
        if !ordered {
            report.order_violations += 1;
        }
        if strong_fail {
            report.strong_violations += 1;
        }
        if !ordered || strong_fail {
            report.violations.push(OrderViolation { x, y, phi_x: fx, phi_y: fy, strong: strong_fail && ordered });
        }
    }
    Ok(report)
}
