//! Equilibria: location, spectral classification and the Griffith scalar
//! reduction `h(z) = f(z) / z = phi`.

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::measure::{table1_predict, PredictedSupport};
use crate::models::{hill, hill_prime, GriffithModel, GriffithParams, Model};
use crate::order::{strongly_less, Point};

/// `|Re(lambda)|` below this is treated as zero.
pub const MARGINAL_THRESHOLD: f64 = 1e-8;
/// `|h'(z)|` below this makes the scalar test inconclusive.
pub const H_PRIME_MARGINAL: f64 = 1e-12;
const BISECTION_TOL: f64 = 1e-12;
const BRACKET_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    AsymptoticallyStable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex<f64>> for Eigenvalue {
    fn from(c: Complex<f64>) -> Self {
        Eigenvalue { re: c.re, im: c.im }
    }
}

/// Eigenvalues sorted by decreasing real part, then decreasing imaginary part.
pub fn eigenvalues(j: &DMatrix<f64>) -> Vec<Eigenvalue> {
    let mut e: Vec<Eigenvalue> = j.clone().complex_eigenvalues().iter().map(|c| Eigenvalue::from(*c)).collect();
    e.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    e
}

pub fn classify_spectrum(eigs: &[Eigenvalue]) -> Stability {
    let max_re = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re < -MARGINAL_THRESHOLD {
        Stability::AsymptoticallyStable
    } else if max_re > MARGINAL_THRESHOLD {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRecord {
    pub point: Point,
    pub eigenvalues: Vec<Eigenvalue>,
    /// Spectral classification.
    pub classification: Stability,
    /// Signed scalar `z` with the equilibrium at `z V0` (Griffith only).
    pub griffith_root: Option<f64>,
    /// `h'(z)` at the signed root.
    pub h_prime: Option<f64>,
    /// Verdict of the scalar `h'` sign test.
    pub scalar_test: Option<Stability>,
    /// Spectral and scalar tests disagree (both conclusive).
    pub disagreement: bool,
    /// Stability established by other means when the spectrum is marginal.
    pub verdict: Option<Stability>,
    pub note: Option<String>,
}

impl EquilibriumRecord {
    /// Spectral record at `point`.
    pub fn at(model: &dyn Model, point: Point) -> Result<Self> {
        ensure_dim(model.dim(), point.dim())?;
        let eigenvalues = eigenvalues(&model.jacobian(point.coords()));
        let classification = classify_spectrum(&eigenvalues);
        Ok(EquilibriumRecord {
            point,
            eigenvalues,
            classification,
            griffith_root: None,
            h_prime: None,
            scalar_test: None,
            disagreement: false,
            verdict: None,
            note: None,
        })
    }

    /// Asymptotically stable, either spectrally or by the attached verdict.
    pub fn is_stable(&self) -> bool {
        match self.classification {
            Stability::AsymptoticallyStable => true,
            Stability::Marginal => self.verdict == Some(Stability::AsymptoticallyStable),
            Stability::Unstable => false,
        }
    }
}

/// `phi = prod alpha_i`.
pub fn griffith_phi(p: &GriffithParams) -> f64 {
    p.phi()
}

/// `h(z) = f(z) / z`, i.e. `z^{m-1} / (1 + z^m)` for `z > 0`.
pub fn h(m: f64, z: f64) -> f64 {
    hill(m, z) / z
}

/// `h'(z) = (z f'(z) - f(z)) / z^2`.
pub fn h_prime(m: f64, z: f64) -> f64 {
    (z * hill_prime(m, z) - hill(m, z)) / (z * z)
}

/// Maximizer `z_m = (m - 1)^{1/m}` of `h` and its value `phi_m`, for `m > 1`.
pub fn h_peak(m: f64) -> Option<(f64, f64)> {
    if m > 1.0 {
        let z = (m - 1.0).powf(1.0 / m);
        Some((z, h(m, z)))
    } else {
        None
    }
}

fn bisect(m: f64, phi: f64, mut lo: f64, mut hi: f64) -> f64 {
    // g = h - phi changes sign on [lo, hi]
    let glo = h(m, lo) - phi;
    // relative width: roots near 0 matter when m is close to 1
    for _ in 0..2000 {
        if hi - lo <= BISECTION_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = h(m, mid) - phi;
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Positive roots of `h(z) = phi`, in increasing order.
pub fn solve_h_roots(m: f64, phi: f64) -> Result<Vec<f64>> {
    if !(m >= 1.0 && phi > 0.0) {
        return Err(Error::InvalidInput(format!("h roots need m >= 1 and phi > 0 (m = {m}, phi = {phi})")));
    }
    if m == 1.0 {
        return Ok(if phi < 1.0 { vec![1.0 / phi - 1.0] } else { Vec::new() });
    }
    let (zm, phim) = h_peak(m).expect("m > 1");
    if (phi - phim).abs() <= 1e-14 * phim {
        return Ok(vec![zm]);
    }
    if phi > phim {
        return Ok(Vec::new());
    }
    let mut roots = Vec::with_capacity(2);
    // h is unimodal on z > 0: increasing on (0, z_m), decreasing after
    let lo = 1e-300;
    if h(m, lo) < phi {
        roots.push(bisect(m, phi, lo, zm));
    }
    let mut hi = 2.0 * zm;
    while h(m, hi) >= phi && hi < BRACKET_CAP {
        hi *= 2.0;
    }
    if h(m, hi) < phi {
        roots.push(bisect(m, phi, zm, hi));
    }
    Ok(roots)
}

fn scalar_verdict(hp: f64) -> Stability {
    if hp.abs() <= H_PRIME_MARGINAL {
        Stability::Marginal
    } else if hp < 0.0 {
        Stability::AsymptoticallyStable
    } else {
        Stability::Unstable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriffithSpectrumSummary {
    pub phi: f64,
    pub m: f64,
    /// `max h` (for `m > 1`).
    pub phi_m: Option<f64>,
    /// Maximizer of `h` (for `m > 1`).
    pub z_m: Option<f64>,
    pub roots: Vec<f64>,
    pub predicted: PredictedSupport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriffithClassification {
    pub summary: GriffithSpectrumSummary,
    pub records: Vec<EquilibriumRecord>,
}

impl GriffithClassification {
    /// The stable set: equilibria judged asymptotically stable.
    pub fn stable_set(&self) -> Vec<Point> {
        self.records.iter().filter(|r| r.is_stable()).map(|r| r.point.clone()).collect()
    }

    pub fn unstable_set(&self) -> Vec<Point> {
        self.records.iter().filter(|r| !r.is_stable()).map(|r| r.point.clone()).collect()
    }

    pub fn has_marginal(&self) -> bool {
        self.records.iter().any(|r| r.classification == Stability::Marginal)
    }
}

/// All equilibria `O` and `+-z V0` of the Griffith circuit, each classified
/// by its Jacobian spectrum and, for `z != 0`, by the sign of `h'`.
pub fn classify_griffith(p: &GriffithParams) -> Result<GriffithClassification> {
    let model = GriffithModel::new(p.clone());
    let m = p.m();
    let phi = p.phi();
    let roots = solve_h_roots(m, phi)?;
    let v0 = p.v0();
    let peak = h_peak(m);

    let mut records = Vec::with_capacity(1 + 2 * roots.len());
    let mut origin = EquilibriumRecord::at(&model, Point::zeros(p.dim()))?;
    origin.griffith_root = Some(0.0);
    if origin.classification == Stability::Marginal {
        // m = 1, phi = 1: O is the only equilibrium of a dissipative monotone system
        origin.verdict = Some(Stability::AsymptoticallyStable);
        origin.note = Some("zero eigenvalue; O is the unique equilibrium and attracts every orbit".into());
    }
    records.push(origin);

    for &z in &roots {
        for sign in [1.0, -1.0] {
            let zs = sign * z;
            let mut rec = EquilibriumRecord::at(&model, v0.scaled(zs))?;
            // h is even, so h'(-z) = -h'(z); for z < 0 the sign test flips
            let hp = sign * h_prime(m, z);
            let scalar = scalar_verdict(sign * hp);
            rec.griffith_root = Some(zs);
            rec.h_prime = Some(hp);
            rec.scalar_test = Some(scalar);
            rec.disagreement = scalar != Stability::Marginal
                && rec.classification != Stability::Marginal
                && scalar != rec.classification;
            if scalar == Stability::Marginal || rec.classification == Stability::Marginal {
                rec.verdict = Some(Stability::Unstable);
                rec.note = Some(
                    "tangency phi = phi_m: eigenvalue test inconclusive; orbits from above decrease to this point \
                     while orbits from below leave it, so it is unstable"
                        .into(),
                );
            }
            records.push(rec);
        }
    }

    let summary = GriffithSpectrumSummary {
        phi,
        m,
        phi_m: peak.map(|p| p.1),
        z_m: peak.map(|p| p.0),
        roots,
        predicted: table1_predict(m, phi)?,
    };
    Ok(GriffithClassification { summary, records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub max_iters: usize,
    pub residual_tol: f64,
    pub step_tol: f64,
    pub dedup_tol: f64,
    pub divergence_radius: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iters: 100, residual_tol: 1e-12, step_tol: 1e-9, dedup_tol: 1e-8, divergence_radius: 1e8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonFailure {
    pub seed: Point,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    /// Distinct equilibria, sorted lexicographically.
    pub records: Vec<EquilibriumRecord>,
    pub failures: Vec<NewtonFailure>,
}

fn newton_from(model: &dyn Model, seed: &Point, opts: &NewtonOptions) -> std::result::Result<Point, String> {
    let dim = model.dim();
    let mut x = DVector::from_column_slice(seed.coords());
    let mut b = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let res = |v: &[f64]| v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    model.drift_into(x.as_slice(), &mut b);
    for _ in 0..opts.max_iters {
        let j = model.jacobian(x.as_slice());
        let dx = j.lu().solve(&DVector::from_column_slice(&b)).ok_or_else(|| "singular Jacobian".to_string())?;
        let r0 = res(&b);
        let mut lambda = 1.0;
        loop {
            let cand = &x - &dx * lambda;
            model.drift_into(cand.as_slice(), &mut trial);
            if res(&trial) <= (1.0 - 1e-4 * lambda) * r0 || lambda < 1e-8 {
                break;
            }
            lambda *= 0.5;
        }
        x -= &dx * lambda;
        model.drift_into(x.as_slice(), &mut b);
        if x.iter().any(|c| !c.is_finite()) || x.norm() > opts.divergence_radius {
            return Err("iterates diverged".into());
        }
        let step = dx.norm() * lambda;
        if res(&b) < opts.residual_tol && step < opts.step_tol * (1.0 + x.norm()) {
            return Ok(Point::from_vec_unchecked(x.as_slice().to_vec()));
        }
    }
    Err(format!("no convergence in {} iterations", opts.max_iters))
}

/// Damped Newton from each seed; converged points are deduplicated and
/// classified by their spectra.
pub fn newton_equilibria(model: &dyn Model, seeds: &[Point], opts: &NewtonOptions) -> Result<NewtonReport> {
    for s in seeds {
        ensure_dim(model.dim(), s.dim())?;
    }
    let outcomes: Vec<std::result::Result<Point, String>> =
        seeds.par_iter().map(|s| newton_from(model, s, opts)).collect();
    let mut found: Vec<Point> = Vec::new();
    let mut failures = Vec::new();
    for (seed, out) in seeds.iter().zip(outcomes) {
        match out {
            Ok(p) => {
                if !found.iter().any(|q| q.distance(&p) < opts.dedup_tol) {
                    found.push(p);
                }
            }
            Err(reason) => failures.push(NewtonFailure { seed: seed.clone(), reason }),
        }
    }
    found.sort_by(|a, b| {
        a.coords()
            .iter()
            .zip(b.coords())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let records = found.into_iter().map(|p| EquilibriumRecord::at(model, p)).collect::<Result<Vec<_>>>()?;
    Ok(NewtonReport { records, failures })
}

/// A chain of equilibria ordered by `<<`; a single point is a degenerate arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryArc {
    pub points: Vec<Point>,
}

impl StationaryArc {
    pub fn is_degenerate(&self) -> bool {
        self.points.len() == 1
    }
}

/// Groups equilibria into maximal chains whose neighbours are strongly
/// ordered and closer than `tol`.
pub fn detect_stationary_arc(points: &[Point], tol: f64) -> Result<Vec<StationaryArc>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut k = i;
        while parent[k] != r {
            let next = parent[k];
            parent[k] = r;
            k = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let close = points[i].distance(&points[j]) < tol;
            if close && (strongly_less(&points[i], &points[j])? || strongly_less(&points[j], &points[i])?) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<(usize, Vec<Point>)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.push(points[i].clone()),
            None => groups.push((root, vec![points[i].clone()])),
        }
    }
    let sum = |p: &Point| p.coords().iter().sum::<f64>();
    let mut arcs: Vec<StationaryArc> = groups
        .into_iter()
        .map(|(_, mut pts)| {
            pts.sort_by(|a, b| sum(a).total_cmp(&sum(b)));
            StationaryArc { points: pts }
        })
        .collect();
    arcs.sort_by(|a, b| sum(&a.points[0]).total_cmp(&sum(&b.points[0])));
    Ok(arcs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SupportKind;
    use crate::models::FnModel;

    fn params(alphas: &[f64], m: f64) -> GriffithParams {
        GriffithParams::unit_noise(alphas.to_vec(), m).unwrap()
    }

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn phi_examples() {
        assert_eq!(griffith_phi(&params(&[1.0, 1.0], 1.0)), 1.0);
        assert_eq!(griffith_phi(&params(&[0.4, 1.0], 1.0)), 0.4);
        assert!((griffith_phi(&params(&[0.6, 0.9, 0.9], 1.0)) - 0.486).abs() < 1e-15);
    }

    #[test]
    fn h_root_examples() {
        let r = solve_h_roots(1.0, 0.5).unwrap();
        assert_eq!(r, vec![1.0]);
        let r = solve_h_roots(2.0, 0.4).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - 0.5).abs() < 1e-11 && (r[1] - 2.0).abs() < 1e-11);
        assert!(solve_h_roots(2.0, 0.6).unwrap().is_empty());
        assert!(solve_h_roots(1.0, 1.2).unwrap().is_empty());
        assert!(solve_h_roots(0.5, 0.4).is_err());
    }

    #[test]
    fn tangent_root_at_peak() {
        let (zm, phim) = h_peak(2.0).unwrap();
        assert_eq!(zm, 1.0);
        assert_eq!(phim, 0.5);
        assert_eq!(solve_h_roots(2.0, phim).unwrap(), vec![1.0]);
        let (z3, p3) = h_peak(3.0).unwrap();
        assert!((h(3.0, z3) - p3).abs() < 1e-15);
        assert!(h_prime(3.0, z3).abs() < 1e-12);
    }

    #[test]
    fn h_prime_signs() {
        assert!(h_prime(2.0, 0.5) > 0.0);
        assert!(h_prime(2.0, 2.0) < 0.0);
        assert!(h_prime(2.0, 1.0).abs() < 1e-15);
        // closed form for m = 2: (1 - z^2) / (1 + z^2)^2
        for z in [0.3, 0.8, 1.7, 4.0] {
            let exact = (1.0 - z * z) / ((1.0 + z * z) * (1.0 + z * z));
            assert!((h_prime(2.0, z) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn root_invariants() {
        for m in [1.0, 1.5, 2.0, 3.0, 6.0] {
            for phi in [0.05, 0.2, 0.35, 0.49, 0.8] {
                let p = params(&[phi, 1.0], m);
                let model = GriffithModel::new(p.clone());
                for z in solve_h_roots(m, phi).unwrap() {
                    assert!((h(m, z) - phi).abs() < 1e-10, "m={m} phi={phi} z={z}");
                    assert!(model.drift(&p.v0().scaled(z)).norm_inf() < 1e-9);
                    assert!(model.drift(&p.v0().scaled(-z)).norm_inf() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn linear_feedback_above_one() {
        let c = classify_griffith(&params(&[1.2, 1.0], 1.0)).unwrap();
        assert_eq!(c.stable_set(), vec![Point::zeros(2)]);
        assert_eq!(c.records.len(), 1);
        assert_eq!(c.summary.predicted.kind, SupportKind::Origin);
    }

    #[test]
    fn linear_feedback_below_one() {
        let c = classify_griffith(&params(&[0.5, 1.0], 1.0)).unwrap();
        assert_eq!(c.records[0].classification, Stability::Unstable);
        let stable = c.stable_set();
        assert_eq!(stable.len(), 2);
        assert!(stable[0].distance(&pt(&[1.0, 1.0])) < 1e-12);
        assert!(stable[1].distance(&pt(&[-1.0, -1.0])) < 1e-12);
        assert!(c.records.iter().all(|r| !r.disagreement));
    }

    #[test]
    fn bistable_hill_two() {
        let c = classify_griffith(&params(&[0.4, 1.0], 2.0)).unwrap();
        assert_eq!(c.records.len(), 5);
        let stable = c.stable_set();
        assert_eq!(stable.len(), 3);
        assert!(stable.iter().any(|p| p.norm() == 0.0));
        assert!(stable.iter().any(|p| p.distance(&pt(&[2.0, 2.0])) < 1e-10));
        assert!(stable.iter().any(|p| p.distance(&pt(&[-2.0, -2.0])) < 1e-10));
        let unstable = c.unstable_set();
        assert!(unstable.iter().all(|p| (p.norm_inf() - 0.5).abs() < 1e-10));
        assert!(!c.has_marginal());
    }

    #[test]
    fn tangency_is_marginal_with_unstable_verdict() {
        let c = classify_griffith(&params(&[0.5, 1.0], 2.0)).unwrap();
        assert!(c.has_marginal());
        let marg: Vec<_> = c.records.iter().filter(|r| r.classification == Stability::Marginal).collect();
        assert_eq!(marg.len(), 2);
        assert!(marg.iter().all(|r| r.verdict == Some(Stability::Unstable) && r.note.is_some()));
        assert_eq!(c.stable_set(), vec![Point::zeros(2)]);
    }

    #[test]
    fn critical_linear_feedback_keeps_origin() {
        let c = classify_griffith(&params(&[1.0, 1.0], 1.0)).unwrap();
        assert_eq!(c.records[0].classification, Stability::Marginal);
        assert_eq!(c.stable_set(), vec![Point::zeros(2)]);
    }

    #[test]
    fn mirror_records_share_spectra() {
        let c = classify_griffith(&params(&[0.3, 0.8, 1.1], 3.0)).unwrap();
        for pair in c.records[1..].chunks(2) {
            for (a, b) in pair[0].eigenvalues.iter().zip(&pair[1].eigenvalues) {
                assert!((a.re - b.re).abs() < 1e-12 && (a.im - b.im).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_and_spectral_tests_agree() {
        for m in [1.0, 1.5, 2.0, 4.0] {
            for a1 in [0.05f64, 0.1, 0.2, 0.3, 0.45, 0.7, 0.9] {
                for alphas in [vec![a1, 1.0], vec![a1.sqrt(), 1.0, a1.sqrt()], vec![0.8, a1 / 0.8]] {
                    let c = classify_griffith(&params(&alphas, m)).unwrap();
                    for r in &c.records[1..] {
                        let hp = r.h_prime.unwrap();
                        if hp.abs() > 1e-6 {
                            assert!(!r.disagreement, "m={m} alphas={alphas:?} root={:?}", r.griffith_root);
                            let max_re = r.eigenvalues[0].re;
                            let z = r.griffith_root.unwrap();
                            if z * hp < 0.0 {
                                assert!(max_re < 0.0);
                            } else {
                                assert!(max_re > 0.0);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn newton_recovers_griffith_equilibria() {
        let p = params(&[0.4, 1.0], 2.0);
        let model = GriffithModel::new(p.clone());
        let seeds: Vec<Point> = (-12..=12).map(|k| p.v0().scaled(k as f64 * 0.25 + 0.01)).collect();
        let report = newton_equilibria(&model, &seeds, &NewtonOptions::default()).unwrap();
        let c = classify_griffith(&p).unwrap();
        assert_eq!(report.records.len(), 5);
        for rec in &c.records {
            let hit = report.records.iter().find(|r| r.point.distance(&rec.point) < 1e-8).expect("equilibrium found");
            assert_eq!(hit.classification, rec.classification);
        }
    }

    #[test]
    fn newton_on_ou() {
        let ou = crate::models::OuModel::new(1.0, 2).unwrap();
        let r = newton_equilibria(&ou, &[pt(&[1.0, 1.0])], &NewtonOptions::default()).unwrap();
        assert_eq!(r.records.len(), 1);
        assert!(r.records[0].point.norm() < 1e-12);
        assert_eq!(r.records[0].classification, Stability::AsymptoticallyStable);
    }

    #[test]
    fn newton_reports_far_field_failure() {
        // b(x) = x exp(-x^2): Newton walks outward from the far field
        let m = FnModel::new(
            1,
            |x, out| out[0] = x[0] * (-x[0] * x[0]).exp(),
            |x| DMatrix::from_element(1, 1, (1.0 - 2.0 * x[0] * x[0]) * (-x[0] * x[0]).exp()),
        );
        let r = newton_equilibria(&m, &[pt(&[5.0]), pt(&[0.3])], &NewtonOptions::default()).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].seed, pt(&[5.0]));
        assert_eq!(r.records.len(), 1);
    }

    #[test]
    fn newton_singular_jacobian() {
        let m = FnModel::new(1, |x, out| out[0] = x[0] * x[0] + 1.0, |x| DMatrix::from_element(1, 1, 2.0 * x[0]));
        let r = newton_equilibria(&m, &[pt(&[0.0])], &NewtonOptions::default()).unwrap();
        assert_eq!(r.failures[0].reason, "singular Jacobian");
    }

    #[test]
    fn arcs() {
        let c = classify_griffith(&params(&[0.4, 1.0], 2.0)).unwrap();
        let pts: Vec<Point> = c.records.iter().map(|r| r.point.clone()).collect();
        let arcs = detect_stationary_arc(&pts, 1e-3).unwrap();
        assert_eq!(arcs.len(), 5);
        assert!(arcs.iter().all(StationaryArc::is_degenerate));

        let segment: Vec<Point> = (0..20).map(|k| pt(&[k as f64 * 0.01, 1.0 + k as f64 * 0.01])).collect();
        let arcs = detect_stationary_arc(&segment, 0.05).unwrap();
        assert_eq!(arcs.len(), 1);
        assert_eq!(arcs[0].points.len(), 20);

        assert!(detect_stationary_arc(&[], 0.1).unwrap().is_empty());
    }
}
