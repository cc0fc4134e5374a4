//! Stationary-measure estimation from long-run occupation, zero-noise
//! concentration sweeps, and the Griffith support classifier.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{classify_griffith, solve_h_roots, GriffithClassification};
use crate::error::{ensure_dim, Error, Result};
use crate::models::{GriffithModel, GriffithParams, Model};
use crate::order::Point;
use crate::sde::{step_count, EmStepper, NoiseSource, RunStatus, StreamKey};

/// Stable-set mass required at the smallest noise level.
pub const STABLE_MASS_FLOOR: f64 = 0.95;
/// Unstable-set mass allowed at the smallest noise level.
pub const UNSTABLE_MASS_CEILING: f64 = 0.02;
const MAX_BINS: usize = 1 << 24;

/// Shape of the predicted zero-noise support for the Griffith circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    /// `{O}`
    Origin,
    /// `{+-z V0}`
    SymmetricPair,
    /// `{O, +-z V0}`
    OriginAndPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedSupport {
    pub kind: SupportKind,
    /// Signed multiples `z` of `V0` making up the support.
    pub roots: Vec<f64>,
    /// Parameters sit on a boundary where a root is tangent or the origin is
    /// non-hyperbolic.
    pub marginal: bool,
}

impl PredictedSupport {
    pub fn points(&self, v0: &Point) -> Vec<Point> {
        self.roots.iter().map(|&z| v0.scaled(z)).collect()
    }
}

/// Predicted support of the zero-noise limit of the Griffith circuit.
pub fn table1_predict(m: f64, phi: f64) -> Result<PredictedSupport> {
    if !(m >= 1.0 && phi > 0.0 && phi.is_finite() && m.is_finite()) {
        return Err(Error::InvalidInput(format!("prediction needs m >= 1 and phi > 0 (m = {m}, phi = {phi})")));
    }
    if m == 1.0 {
        if phi >= 1.0 {
            return Ok(PredictedSupport { kind: SupportKind::Origin, roots: vec![0.0], marginal: phi == 1.0 });
        }
        let z = 1.0 / phi - 1.0;
        return Ok(PredictedSupport { kind: SupportKind::SymmetricPair, roots: vec![z, -z], marginal: false });
    }
    let roots = solve_h_roots(m, phi)?;
    if roots.len() < 2 {
        return Ok(PredictedSupport { kind: SupportKind::Origin, roots: vec![0.0], marginal: roots.len() == 1 });
    }
    let z2 = roots[1];
    Ok(PredictedSupport { kind: SupportKind::OriginAndPair, roots: vec![0.0, z2, -z2], marginal: false })
}

/// Rectangular histogram window with `bins[j]` equal cells along axis `j`.
/// Samples outside the window are counted in the nearest boundary cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
}

impl HistogramGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() != bins.len() {
            return Err(Error::InvalidInput("histogram bounds and bin counts must share one nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h && l.is_finite() && h.is_finite())) {
            return Err(Error::InvalidInput("histogram needs finite lo < hi on every axis".into()));
        }
        let total = bins.iter().try_fold(1usize, |acc, &b| if b == 0 { None } else { acc.checked_mul(b) });
        match total {
            Some(t) if t <= MAX_BINS => Ok(HistogramGrid { lo, hi, bins }),
            _ => Err(Error::InvalidInput(format!("histogram needs between 1 and {MAX_BINS} cells"))),
        }
    }

    /// Cube covering `points` padded by `pad`, with `bins` cells per axis.
    pub fn covering(points: &[Point], pad: f64, bins: usize) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::InvalidInput("no points to cover".into()))?;
        let dim = first.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in points {
            ensure_dim(dim, p.dim())?;
            for j in 0..dim {
                lo[j] = lo[j].min(p[j] - pad);
                hi[j] = hi[j].max(p[j] + pad);
            }
        }
        HistogramGrid::new(lo, hi, vec![bins; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn n_cells(&self) -> usize {
        self.bins.iter().product()
    }

    /// Flat row-major cell index, and whether the sample was clamped.
    pub fn locate(&self, x: &[f64]) -> (usize, bool) {
        let mut idx = 0;
        let mut clamped = false;
        for j in 0..self.dim() {
            let w = (self.hi[j] - self.lo[j]) / self.bins[j] as f64;
            let raw = ((x[j] - self.lo[j]) / w).floor();
            let k = if raw < 0.0 {
                clamped = true;
                0
            } else if raw >= self.bins[j] as f64 {
                clamped = true;
                self.bins[j] - 1
            } else {
                raw as usize
            };
            idx = idx * self.bins[j] + k;
        }
        (idx, clamped)
    }

    pub fn center(&self, mut idx: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        for j in (0..self.dim()).rev() {
            let k = idx % self.bins[j];
            idx /= self.bins[j];
            let w = (self.hi[j] - self.lo[j]) / self.bins[j] as f64;
            c[j] = self.lo[j] + (k as f64 + 0.5) * w;
        }
        c
    }
}

/// A ball whose occupation mass is reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub label: String,
    pub center: Point,
    pub radius: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallMass {
    pub label: String,
    pub center: Point,
    pub radius: f64,
    pub stable: bool,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub index: usize,
    pub count: u64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryOptions {
    pub t_total: f64,
    pub step: f64,
    /// Fraction of the run discarded before sampling.
    pub burn_in: f64,
    pub key: StreamKey,
    pub blowup_guard: f64,
}

impl StationaryOptions {
    pub fn new(t_total: f64, key: StreamKey) -> Self {
        StationaryOptions { t_total, step: 1e-3, burn_in: 0.2, key, blowup_guard: crate::flow::DEFAULT_BLOWUP_GUARD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryEstimate {
    pub eps: f64,
    pub t_total: f64,
    pub step: f64,
    pub burn_in: f64,
    pub samples: u64,
    /// Samples that fell outside the histogram window.
    pub clamped: u64,
    pub grid: HistogramGrid,
    /// Nonempty cells in increasing index order.
    pub histogram: Vec<HistogramBin>,
    pub balls: Vec<BallMass>,
    /// Mass of the union of stable balls.
    pub stable_mass: f64,
    /// Mass of the union of unstable balls, outside every stable ball.
    pub unstable_mass: f64,
    pub leftover_mass: f64,
    /// Occupation mean and second moment per coordinate.
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub status: RunStatus,
    /// False when the run aborted; the figures then cover the partial run.
    pub valid: bool,
}

impl StationaryEstimate {
    pub fn weight_sum(&self) -> f64 {
        self.histogram.iter().map(|b| b.weight).sum()
    }

    /// Histogram estimate of `E[x_j^2]` using cell centers.
    pub fn histogram_second_moment(&self, j: usize) -> f64 {
        self.histogram
            .iter()
            .map(|b| {
                let c = self.grid.center(b.index)[j];
                b.weight * c * c
            })
            .sum()
    }

    pub fn ball(&self, label: &str) -> Option<&BallMass> {
        self.balls.iter().find(|b| b.label == label)
    }

    /// Histogram as CSV rows `c1,...,cr,count,weight`.
    pub fn write_histogram_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for j in 1..=self.grid.dim() {
            write!(w, "c{j},")?;
        }
        writeln!(w, "count,weight")?;
        for b in &self.histogram {
            for c in self.grid.center(b.index) {
                write!(w, "{c},")?;
            }
            writeln!(w, "{},{}", b.count, b.weight)?;
        }
        Ok(())
    }
}

/// Occupation measure of one long path from `x0` after discarding the
/// burn-in prefix.
pub fn estimate_stationary(
    model: &dyn Model,
    x0: &Point,
    eps: f64,
    opts: &StationaryOptions,
    grid: &HistogramGrid,
    balls: &[BallSpec],
) -> Result<StationaryEstimate> {
    let dim = model.dim();
    ensure_dim(dim, x0.dim())?;
    ensure_dim(dim, grid.dim())?;
    for b in balls {
        ensure_dim(dim, b.center.dim())?;
        if !(b.radius >= 0.0) {
            return Err(Error::InvalidInput(format!("ball {} has a negative radius", b.label)));
        }
    }
    if !(0.0..1.0).contains(&opts.burn_in) {
        return Err(Error::InvalidInput(format!("burn-in fraction must lie in [0, 1), got {}", opts.burn_in)));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("noise level must be finite and >= 0, got {eps}")));
    }
    let n = step_count(opts.t_total, opts.step)?;
    let h = opts.t_total / n as f64;
    let first = ((opts.burn_in * n as f64).floor() as usize).min(n - 1) + 1;

    let mut counts = vec![0u64; grid.n_cells()];
    let mut ball_hits = vec![0u64; balls.len()];
    let (mut stable_hits, mut unstable_hits) = (0u64, 0u64);
    let mut mean = vec![0.0; dim];
    let mut second = vec![0.0; dim];
    let (mut samples, mut clamped) = (0u64, 0u64);
    let mut status = RunStatus::Completed;

    let mut noise = NoiseSource::new(opts.key);
    let mut stepper = EmStepper::new(model);
    let mut w = vec![0.0; dim];
    let mut x = x0.coords().to_vec();
    let sq = h.sqrt();
    let radii2: Vec<f64> = balls.iter().map(|b| b.radius * b.radius).collect();
    for k in 1..=n {
        noise.fill_normals(&mut w, sq);
        stepper.advance(model, &mut x, eps, h, &w);
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !nrm.is_finite() || nrm > opts.blowup_guard {
            status = RunStatus::BlowUp { time: k as f64 * h };
            break;
        }
        if k < first {
            continue;
        }
        samples += 1;
        let (cell, out) = grid.locate(&x);
        counts[cell] += 1;
        clamped += out as u64;
        for j in 0..dim {
            mean[j] += x[j];
            second[j] += x[j] * x[j];
        }
        let (mut in_stable, mut in_unstable) = (false, false);
        for (i, b) in balls.iter().enumerate() {
            let d2: f64 = x.iter().zip(b.center.coords()).map(|(a, c)| (a - c) * (a - c)).sum();
            if d2 <= radii2[i] {
                ball_hits[i] += 1;
                if b.stable {
                    in_stable = true;
                } else {
                    in_unstable = true;
                }
            }
        }
        stable_hits += in_stable as u64;
        unstable_hits += (in_unstable && !in_stable) as u64;
    }

    let total = samples.max(1) as f64;
    let histogram = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(index, &count)| HistogramBin { index, count, weight: count as f64 / total })
        .collect();
    let frac = |c: u64| c as f64 / total;
    mean.iter_mut().for_each(|v| *v /= total);
    second.iter_mut().for_each(|v| *v /= total);
    let stable_mass = frac(stable_hits);
    let unstable_mass = frac(unstable_hits);
    Ok(StationaryEstimate {
        eps,
        t_total: opts.t_total,
        step: h,
        burn_in: opts.burn_in,
        samples,
        clamped,
        grid: grid.clone(),
        histogram,
        balls: balls
            .iter()
            .zip(&ball_hits)
            .map(|(b, &c)| BallMass {
                label: b.label.clone(),
                center: b.center.clone(),
                radius: b.radius,
                stable: b.stable,
                mass: frac(c),
            })
            .collect(),
        stable_mass,
        unstable_mass,
        leftover_mass: (1.0 - stable_mass - unstable_mass).max(0.0),
        mean,
        second_moment: second,
        status,
        valid: status == RunStatus::Completed && samples > 0,
    })
}

/// Run length as a function of the noise level: `base * (reference / eps)^2`,
/// never below `base` and never above `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TTotalRule {
    pub base: f64,
    pub reference_eps: f64,
    pub cap: f64,
}

impl Default for TTotalRule {
    fn default() -> Self {
        TTotalRule { base: 100.0, reference_eps: 0.2, cap: 1e4 }
    }
}

impl TTotalRule {
    pub fn t_total(&self, eps: f64) -> f64 {
        if eps <= 0.0 {
            return self.base;
        }
        let scale = (self.reference_eps / eps).powi(2).max(1.0);
        (self.base * scale).min(self.cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub step: f64,
    pub burn_in: f64,
    pub rule: TTotalRule,
    pub seed: u64,
    /// Noise level `i` uses stream `base_stream + i`.
    pub base_stream: u64,
    /// Allowed decrease of the stable mass between consecutive noise levels.
    pub slack: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings { step: 1e-3, burn_in: 0.2, rule: TTotalRule::default(), seed: 0, base_stream: 0, slack: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub t_total: f64,
    pub stable_mass: f64,
    pub unstable_mass: f64,
    pub leftover_mass: f64,
    pub balls: Vec<BallMass>,
    pub valid: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub entries: Vec<SweepEntry>,
    /// Stable mass never drops by more than the slack as eps decreases.
    pub monotone: bool,
    pub slack: f64,
    /// Stable mass at least 0.95 and unstable mass at most 0.02 at the
    /// smallest noise level.
    pub terminal_pass: bool,
    pub predicted: Option<PredictedSupport>,
    /// Prediction matches the spectral stable set.
    pub support_agreement: Option<bool>,
    pub agreement: bool,
}

/// Stationary estimates over a decreasing list of noise levels.
pub fn concentration_sweep(
    model: &dyn Model,
    x0: &Point,
    eps_list: &[f64],
    settings: &SweepSettings,
    grid: &HistogramGrid,
    balls: &[BallSpec],
) -> Result<ConcentrationReport> {
    if eps_list.is_empty() {
        return Err(Error::InvalidInput("noise list is empty".into()));
    }
    if eps_list.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidInput("noise levels must be strictly decreasing".into()));
    }
    let entries: Vec<SweepEntry> = eps_list
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let t_total = settings.rule.t_total(eps);
            let opts = StationaryOptions {
                t_total,
                step: settings.step,
                burn_in: settings.burn_in,
                key: StreamKey { seed: settings.seed, stream: settings.base_stream + i as u64 },
                blowup_guard: crate::flow::DEFAULT_BLOWUP_GUARD,
            };
            match estimate_stationary(model, x0, eps, &opts, grid, balls) {
                Ok(e) => SweepEntry {
                    eps,
                    t_total,
                    stable_mass: e.stable_mass,
                    unstable_mass: e.unstable_mass,
                    leftover_mass: e.leftover_mass,
                    balls: e.balls,
                    valid: e.valid,
                    error: (!e.valid).then(|| "run aborted by the blow-up guard".to_string()),
                },
                Err(err) => SweepEntry {
                    eps,
                    t_total,
                    stable_mass: 0.0,
                    unstable_mass: 0.0,
                    leftover_mass: 1.0,
                    balls: Vec::new(),
                    valid: false,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();
    let valid: Vec<&SweepEntry> = entries.iter().filter(|e| e.valid).collect();
    let monotone = valid.windows(2).all(|w| w[1].stable_mass >= w[0].stable_mass - settings.slack);
    let last = entries.last().expect("nonempty");
    let terminal_pass =
        last.valid && last.stable_mass >= STABLE_MASS_FLOOR && last.unstable_mass <= UNSTABLE_MASS_CEILING;
    Ok(ConcentrationReport {
        entries,
        monotone,
        slack: settings.slack,
        terminal_pass,
        predicted: None,
        support_agreement: None,
        agreement: terminal_pass,
    })
}

/// Balls of radius `delta |V0|` around every Griffith equilibrium.
pub fn griffith_balls(class: &GriffithClassification, v0: &Point, delta: f64) -> Vec<BallSpec> {
    let radius = delta * v0.norm();
    class
        .records
        .iter()
        .map(|r| BallSpec {
            label: format!("{}V0", r.griffith_root.unwrap_or(0.0)),
            center: r.point.clone(),
            radius,
            stable: r.is_stable(),
        })
        .collect()
}

fn same_point_set(a: &[Point], b: &[Point], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().all(|p| b.iter().any(|q| p.distance(q) <= tol))
        && b.iter().all(|p| a.iter().any(|q| p.distance(q) <= tol))
}

/// Griffith sweep with predictions: compares `table1_predict` with the
/// spectral stable set and checks the terminal masses.
pub fn griffith_sweep(
    params: &GriffithParams,
    eps_list: &[f64],
    settings: &SweepSettings,
    delta: f64,
    bins: usize,
) -> Result<(GriffithClassification, ConcentrationReport)> {
    let class = classify_griffith(params)?;
    let v0 = params.v0();
    let balls = griffith_balls(&class, &v0, delta);
    let points: Vec<Point> = class.records.iter().map(|r| r.point.clone()).collect();
    let grid = HistogramGrid::covering(&points, 1.0 + delta * v0.norm(), bins)?;
    let x0 = class.stable_set().into_iter().next().unwrap_or_else(|| Point::zeros(params.dim()));
    let model = GriffithModel::new(params.clone());
    let mut report = concentration_sweep(&model, &x0, eps_list, settings, &grid, &balls)?;
    let predicted = class.summary.predicted.clone();
    let agree = same_point_set(&predicted.points(&v0), &class.stable_set(), 1e-9);
    report.predicted = Some(predicted);
    report.support_agreement = Some(agree);
    report.agreement = agree && report.terminal_pass;
    Ok((class, report))
}

/// One parameter regime of the Griffith classification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Regime {
    pub m: f64,
    pub alphas: Vec<f64>,
}

/// The four standard regimes: `m = 1` with `phi` in `{1.2, 0.5}` and `m = 2`
/// with `phi` in `{0.6, 0.4}`, all on two nodes with `alpha_2 = 1`.
pub fn default_table1_regimes() -> Vec<Table1Regime> {
    [(1.0, 1.2), (1.0, 0.5), (2.0, 0.6), (2.0, 0.4)]
        .iter()
        .map(|&(m, phi)| Table1Regime { m, alphas: vec![phi, 1.0] })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Options {
    pub eps_list: Vec<f64>,
    pub settings: SweepSettings,
    /// Ball radius as a multiple of `|V0|`.
    pub delta: f64,
    pub bins: usize,
}

impl Default for Table1Options {
    fn default() -> Self {
        Table1Options { eps_list: vec![0.2, 0.1, 0.05], settings: SweepSettings::default(), delta: 0.2, bins: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub m: f64,
    pub alphas: Vec<f64>,
    pub phi: f64,
    pub phi_m: Option<f64>,
    pub predicted: PredictedSupport,
    /// Spectral stable set as signed multiples of `V0`.
    pub spectral_stable: Vec<f64>,
    pub support_match: bool,
    /// Boundary regime: reported without a Monte-Carlo claim.
    pub marginal: bool,
    pub sweep: Option<ConcentrationReport>,
    pub stable_mass: Option<f64>,
    pub unstable_mass: Option<f64>,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub seed: u64,
    pub rows: Vec<Table1Row>,
    pub all_agree: bool,
}

/// Classification, prediction and concentration sweep for each regime.
pub fn reproduce_table1(regimes: &[Table1Regime], opts: &Table1Options) -> Result<Table1Report> {
    let rows = regimes
        .par_iter()
        .enumerate()
        .map(|(i, reg)| {
            let params = GriffithParams::unit_noise(reg.alphas.clone(), reg.m)?;
            let class = classify_griffith(&params)?;
            let predicted = class.summary.predicted.clone();
            let v0 = params.v0();
            let spectral: Vec<f64> =
                class.records.iter().filter(|r| r.is_stable()).map(|r| r.griffith_root.unwrap_or(0.0)).collect();
            let support_match = same_point_set(&predicted.points(&v0), &class.stable_set(), 1e-9);
            let marginal = predicted.marginal || class.has_marginal();
            let mut row = Table1Row {
                m: reg.m,
                alphas: reg.alphas.clone(),
                phi: params.phi(),
                phi_m: class.summary.phi_m,
                predicted,
                spectral_stable: spectral,
                support_match,
                marginal,
                sweep: None,
                stable_mass: None,
                unstable_mass: None,
                agree: support_match,
            };
            if !marginal {
                let settings = SweepSettings { base_stream: (i as u64) << 32, ..opts.settings };
                let (_, report) = griffith_sweep(&params, &opts.eps_list, &settings, opts.delta, opts.bins)?;
                let last = report.entries.last().expect("nonempty");
                row.stable_mass = Some(last.stable_mass);
                row.unstable_mass = Some(last.unstable_mass);
                row.agree = report.agreement;
                row.sweep = Some(report);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let all_agree = rows.iter().all(|r| r.agree);
    Ok(Table1Report { seed: opts.settings.seed, rows, all_agree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::OuModel;
    use crate::sde::split;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn prediction_examples() {
        let p = table1_predict(1.0, 1.2).unwrap();
        assert_eq!((p.kind, p.roots.clone(), p.marginal), (SupportKind::Origin, vec![0.0], false));
        let p = table1_predict(1.0, 0.5).unwrap();
        assert_eq!((p.kind, p.roots.clone()), (SupportKind::SymmetricPair, vec![1.0, -1.0]));
        let p = table1_predict(2.0, 0.4).unwrap();
        assert_eq!(p.kind, SupportKind::OriginAndPair);
        assert!((p.roots[1] - 2.0).abs() < 1e-11 && (p.roots[2] + 2.0).abs() < 1e-11);
        assert_eq!(table1_predict(2.0, 0.6).unwrap().kind, SupportKind::Origin);
        assert!(table1_predict(2.0, 0.5).unwrap().marginal);
        assert!(table1_predict(1.0, 1.0).unwrap().marginal);
        assert!(table1_predict(0.5, 1.0).is_err());
    }

    #[test]
    fn prediction_matches_spectral_stable_set() {
        for m in [1.0, 1.5, 2.0, 3.0, 5.0] {
            for phi in [0.05, 0.2, 0.33, 0.45, 0.6, 0.9, 1.3] {
                for alphas in [vec![phi, 1.0], vec![1.0, phi, 1.0]] {
                    let params = GriffithParams::unit_noise(alphas, m).unwrap();
                    let class = classify_griffith(&params).unwrap();
                    let pred = table1_predict(m, params.phi()).unwrap();
                    if !pred.marginal {
                        assert!(
                            same_point_set(&pred.points(&params.v0()), &class.stable_set(), 1e-9),
                            "m={m} phi={phi}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn grid_locate_and_center() {
        let g = HistogramGrid::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![4, 2]).unwrap();
        assert_eq!(g.locate(&[0.1, -0.5]), (0, false));
        assert_eq!(g.locate(&[0.9, 0.5]), (7, false));
        assert_eq!(g.locate(&[5.0, -9.0]), (6, true));
        assert_eq!(g.center(7), vec![0.875, 0.5]);
        assert!(HistogramGrid::new(vec![0.0], vec![0.0], vec![3]).is_err());
        assert!(HistogramGrid::new(vec![0.0], vec![1.0], vec![0]).is_err());
    }

    #[test]
    fn ou_occupation_variance() {
        let ou = OuModel::new(1.0, 1).unwrap();
        let grid = HistogramGrid::new(vec![-1.0], vec![1.0], vec![200]).unwrap();
        let opts = StationaryOptions { step: 1e-2, ..StationaryOptions::new(5000.0, split(2, 0)) };
        let e = estimate_stationary(&ou, &pt(&[0.0]), 0.2, &opts, &grid, &[]).unwrap();
        assert!((e.weight_sum() - 1.0).abs() < 1e-12);
        assert!((e.histogram_second_moment(0) - 0.02).abs() < 0.002, "{}", e.histogram_second_moment(0));
        assert!(e.valid);
    }

    #[test]
    fn zero_noise_sits_at_omega_limit() {
        let params = GriffithParams::unit_noise(vec![0.4, 1.0], 2.0).unwrap();
        let g = GriffithModel::new(params);
        let grid = HistogramGrid::new(vec![-3.0, -3.0], vec![3.0, 3.0], vec![30, 30]).unwrap();
        let balls = [BallSpec { label: "top".into(), center: pt(&[2.0, 2.0]), radius: 0.05, stable: true }];
        let opts = StationaryOptions { burn_in: 0.5, ..StationaryOptions::new(100.0, split(0, 0)) };
        let e = estimate_stationary(&g, &pt(&[1.5, 1.0]), 0.0, &opts, &grid, &balls).unwrap();
        assert_eq!(e.stable_mass, 1.0);
    }

    #[test]
    fn ball_mass_grows_with_radius() {
        let ou = OuModel::new(1.0, 2).unwrap();
        let grid = HistogramGrid::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![10, 10]).unwrap();
        let balls: Vec<BallSpec> = [0.05, 0.1, 0.2, 0.4]
            .iter()
            .map(|&r| BallSpec { label: format!("{r}"), center: pt(&[0.0, 0.0]), radius: r, stable: true })
            .collect();
        let opts = StationaryOptions { step: 1e-2, ..StationaryOptions::new(200.0, split(4, 0)) };
        let e = estimate_stationary(&ou, &pt(&[0.0, 0.0]), 0.2, &opts, &grid, &balls).unwrap();
        assert!(e.balls.windows(2).all(|w| w[0].mass <= w[1].mass));
        assert!(e.balls.iter().all(|b| (0.0..=1.0).contains(&b.mass)));
    }

    #[test]
    fn rejects_bad_burn_in() {
        let ou = OuModel::new(1.0, 1).unwrap();
        let grid = HistogramGrid::new(vec![-1.0], vec![1.0], vec![2]).unwrap();
        let opts = StationaryOptions { burn_in: 1.0, ..StationaryOptions::new(1.0, split(0, 0)) };
        assert!(estimate_stationary(&ou, &pt(&[0.0]), 0.1, &opts, &grid, &[]).is_err());
    }

    #[test]
    fn t_total_rule() {
        let r = TTotalRule::default();
        assert_eq!(r.t_total(0.3), 100.0);
        assert!((r.t_total(0.05) - 1600.0).abs() < 1e-9);
        assert_eq!(r.t_total(1e-3), 1e4);
    }

    #[test]
    fn single_entry_sweep() {
        let ou = OuModel::new(1.0, 1).unwrap();
        let grid = HistogramGrid::new(vec![-1.0], vec![1.0], vec![20]).unwrap();
        let balls = [BallSpec { label: "O".into(), center: pt(&[0.0]), radius: 0.5, stable: true }];
        let s = SweepSettings { step: 1e-2, ..Default::default() };
        let r = concentration_sweep(&ou, &pt(&[0.0]), &[0.1], &s, &grid, &balls).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert!(r.monotone && r.terminal_pass);
        assert!(concentration_sweep(&ou, &pt(&[0.0]), &[0.1, 0.2], &s, &grid, &balls).is_err());
    }

    #[test]
    fn marginal_regime_skips_monte_carlo() {
        let regs = [Table1Regime { m: 2.0, alphas: vec![0.5, 1.0] }];
        let r = reproduce_table1(&regs, &Table1Options::default()).unwrap();
        assert!(r.rows[0].marginal && r.rows[0].sweep.is_none() && r.rows[0].support_match);
    }
}
