//! Euler-Maruyama simulation of `dX = b(X) dt + eps sigma(X) dW`.
//!
//! Randomness contract: a path is driven by ChaCha8 keyed with the 64-bit
//! seed, on the stream selected by the path index, and its Gaussian
//! increments are drawn in step order from that stream alone. The
//! increments of a path therefore depend only on `(seed, stream)` and never
//! on how paths are scheduled across threads.

use std::io::{self, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::flow::{write_csv_header, write_csv_rows, Trajectory, DEFAULT_BLOWUP_GUARD};
use crate::models::Model;
use crate::order::Point;

/// Seed and stream of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub stream: u64,
}

/// Key of path `index` in an ensemble driven by `master`.
pub fn split(master: u64, index: u64) -> StreamKey {
    StreamKey { seed: master, stream: index }
}

/// Standard normal source for one path.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(key: StreamKey) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
        rng.set_stream(key.stream);
        NoiseSource { rng }
    }

    /// Fills `out` with independent `N(0, scale^2)` draws.
    pub fn fill_normals(&mut self, out: &mut [f64], scale: f64) {
        for v in out.iter_mut() {
            *v = scale * self.rng.sample::<f64, _>(StandardNormal);
        }
    }
}

/// One step `x + b(x) dt + eps sigma(x) w`, with `w ~ N(0, dt I)` supplied.
pub fn em_step(model: &dyn Model, x: &Point, eps: f64, dt: f64, w: &Point) -> Result<Point> {
    ensure_dim(model.dim(), x.dim())?;
    ensure_dim(model.dim(), w.dim())?;
    let mut s = EmStepper::new(model);
    let mut out = x.coords().to_vec();
    s.advance(model, &mut out, eps, dt, w.coords());
    if out.iter().all(|v| v.is_finite()) {
        Ok(Point::from_vec_unchecked(out))
    } else {
        Err(Error::NumericalBlowUp { time: dt })
    }
}

/// Reusable buffers for Euler-Maruyama steps.
pub(crate) struct EmStepper {
    drift: Vec<f64>,
    separable: bool,
}

impl EmStepper {
    pub(crate) fn new(model: &dyn Model) -> Self {
        let dim = model.dim();
        EmStepper { drift: vec![0.0; dim], separable: model.separable_noise(0, 0.0).is_some() }
    }

    pub(crate) fn advance(&mut self, model: &dyn Model, x: &mut [f64], eps: f64, dt: f64, w: &[f64]) {
        model.drift_into(x, &mut self.drift);
        if eps == 0.0 {
            for (xi, bi) in x.iter_mut().zip(&self.drift) {
                *xi += bi * dt;
            }
        } else if self.separable {
            for j in 0..x.len() {
                let (s, _) = model.separable_noise(j, x[j]).unwrap_or((0.0, 0.0));
                x[j] += self.drift[j] * dt + eps * s * w[j];
            }
        } else {
            let kick = model.diffusion(x) * DVector::from_column_slice(w);
            for j in 0..x.len() {
                x[j] += self.drift[j] * dt + eps * kick[j];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The state became non-finite or left the guard ball at `time`.
    BlowUp {
        time: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Keep every `record_every`-th state.
    pub record_every: usize,
    pub blowup_guard: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { record_every: 1, blowup_guard: DEFAULT_BLOWUP_GUARD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeRun {
    pub eps: f64,
    pub step: f64,
    pub key: StreamKey,
    pub status: RunStatus,
    /// Recorded states; truncated at the last finite state after a blow-up.
    pub trajectory: Trajectory,
}

impl SdeRun {
    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// The run, or a blow-up error.
    pub fn into_result(self) -> Result<Self> {
        match self.status {
            RunStatus::Completed => Ok(self),
            RunStatus::BlowUp { time } => Err(Error::NumericalBlowUp { time }),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        self.trajectory.write_csv(w)
    }
}

pub(crate) fn step_count(t: f64, step: f64) -> Result<usize> {
    if !(t > 0.0 && step > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("simulation needs T > 0 and step > 0 (T = {t}, step = {step})")));
    }
    Ok(((t / step).round() as usize).max(1))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps >= 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("noise level must be finite and >= 0, got {eps}")))
    }
}

/// Simulates one path from `x0` on `[0, t]` with the noise stream `key`.
pub fn simulate_keyed(
    model: &dyn Model,
    x0: &Point,
    eps: f64,
    t: f64,
    step: f64,
    key: StreamKey,
    opts: &SimOptions,
) -> Result<SdeRun> {
    ensure_dim(model.dim(), x0.dim())?;
    check_eps(eps)?;
    let n = step_count(t, step)?;
    let every = opts.record_every.max(1);
    let h = t / n as f64;
    let sq = h.sqrt();
    let dim = model.dim();
    let mut noise = NoiseSource::new(key);
    let mut stepper = EmStepper::new(model);
    let mut w = vec![0.0; dim];
    let mut x = x0.coords().to_vec();
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut status = RunStatus::Completed;
    for k in 1..=n {
        noise.fill_normals(&mut w, sq);
        stepper.advance(model, &mut x, eps, h, &w);
        let tk = if k == n { t } else { k as f64 * h };
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !nrm.is_finite() || nrm > opts.blowup_guard {
            status = RunStatus::BlowUp { time: tk };
            break;
        }
        if k % every == 0 || k == n {
            times.push(tk);
            states.push(Point::from_vec_unchecked(x.clone()));
        }
    }
    Ok(SdeRun { eps, step: h, key, status, trajectory: Trajectory::from_parts(times, states, h) })
}

/// Simulates one path; the noise is stream 0 of `seed`.
pub fn simulate(model: &dyn Model, x0: &Point, eps: f64, t: f64, step: f64, seed: u64) -> Result<SdeRun> {
    simulate_keyed(model, x0, eps, t, step, split(seed, 0), &SimOptions::default())
}

/// `n_paths` independent paths; path `i` uses `split(master_seed, i)`.
/// Blow-ups are recorded per path.
pub fn ensemble(
    model: &dyn Model,
    x0: &Point,
    eps: f64,
    t: f64,
    step: f64,
    n_paths: usize,
    master_seed: u64,
    opts: &SimOptions,
) -> Result<Vec<SdeRun>> {
    if n_paths == 0 {
        return Err(Error::InvalidInput("ensemble needs at least one path".into()));
    }
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_keyed(model, x0, eps, t, step, split(master_seed, i), opts))
        .collect()
}

/// Terminal-state moments of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub eps: f64,
    pub n_paths: usize,
    pub blowups: usize,
    pub moments: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// Number of completed paths used.
    pub count: usize,
    pub mean: Vec<f64>,
    /// Per-coordinate standard error of the mean.
    pub std_err: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl Moments {
    pub fn of(points: &[&Point]) -> Option<Moments> {
        let n = points.len();
        let dim = points.first()?.dim();
        let mut mean = vec![0.0; dim];
        let mut second = vec![0.0; dim];
        for p in points {
            for j in 0..dim {
                mean[j] += p[j];
                second[j] += p[j] * p[j];
            }
        }
        let nf = n as f64;
        mean.iter_mut().for_each(|v| *v /= nf);
        second.iter_mut().for_each(|v| *v /= nf);
        let std_err = (0..dim)
            .map(|j| {
                let var = (second[j] - mean[j] * mean[j]).max(0.0) * nf / (nf - 1.0).max(1.0);
                (var / nf).sqrt()
            })
            .collect();
        Some(Moments { count: n, mean, std_err, second_moment: second })
    }
}

impl EnsembleSummary {
    pub fn of(eps: f64, runs: &[SdeRun]) -> Result<Self> {
        let done: Vec<&Point> = runs.iter().filter(|r| r.is_complete()).map(|r| r.trajectory.final_state()).collect();
        let moments = Moments::of(&done).ok_or(Error::NumericalBlowUp { time: f64::NAN })?;
        Ok(EnsembleSummary { eps, n_paths: runs.len(), blowups: runs.len() - done.len(), moments })
    }
}

/// Writes every path as `path,t,x1,...,xr` rows.
pub fn write_ensemble_csv<W: Write>(mut w: W, runs: &[SdeRun]) -> io::Result<()> {
    let dim = runs.first().map_or(0, |r| r.trajectory.final_state().dim());
    write_csv_header(&mut w, "path,t", dim)?;
    for (i, r) in runs.iter().enumerate() {
        write_csv_rows(&mut w, &format!("{i},"), r.trajectory.times(), r.trajectory.states())?;
    }
    Ok(())
}
