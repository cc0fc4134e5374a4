//! Grid-based checks of the structural hypotheses: cooperativity and
//! irreducibility of the drift (H1), Lyapunov dissipation (H2) and the
//! regularity conditions behind the uniform large deviations principle (H3).
//!
//! Every check evaluates a slack ("margin") at each grid point; a report
//! passes iff no margin is negative. These are PASS-on-grid verdicts, not
//! proofs.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LyapunovQuadratic, Model};
use crate::error::{Error, Result};
use crate::order::Point;

/// Support-graph threshold for irreducibility.
pub const IRREDUCIBILITY_THRESHOLD: f64 = 1e-12;
/// Radius of the ball around the origin excluded from H3 grids.
pub const H3_ORIGIN_EXCLUSION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Cooperative,
    Irreducible,
    Dissipation,
    LdpRegularity,
}

impl Check {
    pub fn hypothesis(self) -> Hypothesis {
        match self {
            Check::Cooperative | Check::Irreducible => Hypothesis::H1,
            Check::Dissipation => Hypothesis::H2,
            Check::LdpRegularity => Hypothesis::H3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub which: Hypothesis,
    pub check: Check,
    pub grid: String,
    /// Slack at each evaluated grid point (negative = violated).
    pub margins: Vec<f64>,
    /// Most violated slack; `None` when the condition is vacuous.
    pub worst_margin: Option<f64>,
    /// Indices (into the evaluated points) where the margin is negative.
    pub failing: Vec<usize>,
    pub params: BTreeMap<String, f64>,
    /// Worst margins of individual inequalities, when a check has several.
    pub components: BTreeMap<String, f64>,
    pub pass: bool,
}

impl HypothesisReport {
    fn from_margins(check: Check, grid: String, margins: Vec<f64>, tol: f64) -> Self {
        let worst_margin = margins.iter().copied().reduce(f64::min);
        let failing = margins.iter().enumerate().filter(|(_, m)| **m < -tol).map(|(i, _)| i).collect::<Vec<_>>();
        HypothesisReport {
            which: check.hypothesis(),
            check,
            grid,
            pass: failing.is_empty(),
            margins,
            worst_margin,
            failing,
            params: BTreeMap::new(),
            components: BTreeMap::new(),
        }
    }
}

/// Tensor grid of `n` points per axis on the box `[lo, hi]`.
pub fn box_grid(lo: &[f64], hi: &[f64], n: usize) -> Result<Vec<Point>> {
    if lo.len() != hi.len() || lo.is_empty() {
        return Err(Error::InvalidInput("box grid needs matching nonempty corners".into()));
    }
    if n < 2 {
        return Err(Error::InvalidInput("box grid needs at least two points per axis".into()));
    }
    let dim = lo.len();
    let total = n.pow(dim as u32);
    Ok((0..total)
        .map(|mut k| {
            let mut c = vec![0.0; dim];
            for d in 0..dim {
                let i = k % n;
                k /= n;
                c[d] = lo[d] + (hi[d] - lo[d]) * i as f64 / (n - 1) as f64;
            }
            Point::from_vec_unchecked(c)
        })
        .collect())
}

/// Grid points with `r_min <= |x| <= r_max`, taken from a tensor grid on
/// `[-r_max, r_max]^dim` together with the axis points of both spheres.
pub fn annulus_grid(dim: usize, r_min: f64, r_max: f64, n: usize) -> Result<Vec<Point>> {
    if !(0.0 <= r_min && r_min <= r_max) {
        return Err(Error::InvalidInput("annulus needs 0 <= r_min <= r_max".into()));
    }
    let mut pts: Vec<Point> = box_grid(&vec![-r_max; dim], &vec![r_max; dim], n)?
        .into_iter()
        .filter(|p| {
            let r = p.norm();
            r >= r_min && r <= r_max
        })
        .collect();
    for radius in [r_min, r_max] {
        if radius == 0.0 {
            continue;
        }
        for d in 0..dim {
            for s in [-1.0, 1.0] {
                let mut c = vec![0.0; dim];
                c[d] = s * radius;
                pts.push(Point::from_vec_unchecked(c));
            }
        }
    }
    Ok(pts)
}

fn describe(grid: &[Point]) -> String {
    if grid.is_empty() {
        return "empty grid".into();
    }
    let dim = grid[0].dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in grid {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    format!("{} points in box {:?}..{:?}", grid.len(), lo, hi)
}

fn check_dims(model: &dyn Model, grid: &[Point]) -> Result<()> {
    for p in grid {
        crate::error::ensure_dim(model.dim(), p.dim())?;
    }
    Ok(())
}

/// Cooperativity: every off-diagonal Jacobian entry is `>= -tol`.
/// The margin at a point is its smallest off-diagonal entry.
pub fn check_cooperative(model: &dyn Model, grid: &[Point], tol: f64) -> Result<HypothesisReport> {
    check_dims(model, grid)?;
    let r = model.dim();
    let margins: Vec<f64> = if r == 1 {
        Vec::new()
    } else {
        grid.par_iter()
            .map(|p| {
                let j = model.jacobian(p.coords());
                let mut min = f64::INFINITY;
                for i in 0..r {
                    for k in 0..r {
                        if i != k {
                            min = min.min(j[(i, k)]);
                        }
                    }
                }
                min
            })
            .collect()
    };
    let mut report = HypothesisReport::from_margins(Check::Cooperative, describe(grid), margins, tol);
    report.params.insert("tol".into(), tol);
    Ok(report)
}

/// Whether the support graph of `|m| > threshold` is strongly connected.
pub fn is_irreducible(m: &DMatrix<f64>, threshold: f64) -> bool {
    let n = m.nrows();
    if n == 1 {
        return true;
    }
    let reach_all = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for k in 0..n {
                let w = if forward { m[(i, k)] } else { m[(k, i)] };
                if k != i && !seen[k] && w.abs() > threshold {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach_all(true) && reach_all(false)
}

/// Irreducibility of the Jacobian at each grid point. The margin is `+1`
/// where the support graph is strongly connected and `-1` elsewhere.
pub fn check_irreducible(model: &dyn Model, grid: &[Point]) -> Result<HypothesisReport> {
    check_dims(model, grid)?;
    let margins = grid
        .par_iter()
        .map(|p| if is_irreducible(&model.jacobian(p.coords()), IRREDUCIBILITY_THRESHOLD) { 1.0 } else { -1.0 })
        .collect();
    let mut report = HypothesisReport::from_margins(Check::Irreducible, describe(grid), margins, 0.0);
    report.params.insert("threshold".into(), IRREDUCIBILITY_THRESHOLD);
    Ok(report)
}

/// `Tr(sigma^T H sigma)` and `sigma^T g` at `x`.
fn noise_terms(model: &dyn Model, x: &[f64], hess: &DMatrix<f64>, grad: &nalgebra::DVector<f64>) -> (f64, f64) {
    let s = model.diffusion(x);
    let trace = (s.transpose() * hess * &s).trace();
    let sg = s.transpose() * grad;
    (trace, sg.norm_squared())
}

fn drift_dot(model: &dyn Model, x: &[f64], grad: &nalgebra::DVector<f64>) -> f64 {
    let mut b = vec![0.0; x.len()];
    model.drift_into(x, &mut b);
    b.iter().zip(grad.iter()).map(|(u, v)| u * v).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2Params {
    pub gamma: f64,
    pub eps0: f64,
    /// Points with `|x| < radius` are outside the hypothesis and skipped.
    pub radius: f64,
}

/// H2: `<b, grad V> + eps^2/2 Tr(sigma^T D^2V sigma) <= -gamma` for
/// `eps in {0, eps0}` on grid points with `|x| >= R`.
pub fn verify_h2(
    model: &dyn Model,
    v: &LyapunovQuadratic,
    params: H2Params,
    grid: &[Point],
) -> Result<HypothesisReport> {
    check_dims(model, grid)?;
    let hess = v.hessian();
    let pts: Vec<&Point> = grid.iter().filter(|p| p.norm() >= params.radius).collect();
    let margins = pts
        .par_iter()
        .map(|p| {
            let x = p.coords();
            let grad = v.gradient(x);
            let lead = drift_dot(model, x, &grad);
            let (trace, _) = noise_terms(model, x, &hess, &grad);
            [0.0, params.eps0]
                .iter()
                .map(|e| -params.gamma - (lead + 0.5 * e * e * trace))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut report = HypothesisReport::from_margins(
        Check::Dissipation,
        format!("{} (|x| >= {})", describe(grid), params.radius),
        margins,
        0.0,
    );
    report.params.insert("gamma".into(), params.gamma);
    report.params.insert("eps0".into(), params.eps0);
    report.params.insert("R".into(), params.radius);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H3Params {
    pub theta: f64,
    pub eta: f64,
    pub c: f64,
    pub m: f64,
}

/// H3 on the grid, excluding a `1e-3` ball around the origin where `V = 0`:
///
/// ```text
/// <b, grad V> + theta/2 Tr(sigma^T D^2V sigma) + |sigma^T grad V|^2 / (eta V) <= C (1 + V)
/// Tr(sigma^T D^2V sigma) >= -M - C V
/// ```
pub fn verify_h3(
    model: &dyn Model,
    v: &LyapunovQuadratic,
    params: H3Params,
    grid: &[Point],
) -> Result<HypothesisReport> {
    check_dims(model, grid)?;
    let hess = v.hessian();
    let pts: Vec<&Point> = grid.iter().filter(|p| p.norm() >= H3_ORIGIN_EXCLUSION).collect();
    let pairs: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|p| {
            let x = p.coords();
            let val = v.value(x);
            let grad = v.gradient(x);
            let lead = drift_dot(model, x, &grad);
            let (trace, sg2) = noise_terms(model, x, &hess, &grad);
            let lhs = lead + 0.5 * params.theta * trace + sg2 / (params.eta * val);
            let growth = params.c * (1.0 + val) - lhs;
            let trace_floor = trace + params.m + params.c * val;
            (growth, trace_floor)
        })
        .collect();
    let margins = pairs.iter().map(|(a, b)| a.min(*b)).collect();
    let mut report = HypothesisReport::from_margins(
        Check::LdpRegularity,
        format!("{} (|x| >= {})", describe(grid), H3_ORIGIN_EXCLUSION),
        margins,
        0.0,
    );
    if let Some(w) = pairs.iter().map(|p| p.0).reduce(f64::min) {
        report.components.insert("growth".into(), w);
    }
    if let Some(w) = pairs.iter().map(|p| p.1).reduce(f64::min) {
        report.components.insert("trace_floor".into(), w);
    }
    report.params.insert("theta".into(), params.theta);
    report.params.insert("eta".into(), params.eta);
    report.params.insert("C".into(), params.c);
    report.params.insert("M".into(), params.m);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{solve_lyapunov, FnModel, GriffithModel, GriffithParams, NoiseSpec};

    fn griffith(alphas: &[f64], m: f64) -> GriffithModel {
        GriffithModel::new(GriffithParams::unit_noise(alphas.to_vec(), m).unwrap())
    }

    fn plane_grid() -> Vec<Point> {
        box_grid(&[-4.0, -4.0], &[4.0, 4.0], 17).unwrap()
    }

    #[test]
    fn griffith_is_cooperative() {
        for m in [1.0, 2.0, 3.5] {
            let r = check_cooperative(&griffith(&[0.7, 1.3], m), &plane_grid(), 0.0).unwrap();
            assert!(r.pass);
            assert_eq!(r.which, Hypothesis::H1);
        }
    }

    #[test]
    fn competitive_counterexample_fails() {
        let m = FnModel::new(
            2,
            |x, out| {
                out[0] = -x[0] - x[1];
                out[1] = -x[1];
            },
            |_| DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, 0.0, -1.0]),
        );
        let r = check_cooperative(&m, &plane_grid(), 0.0).unwrap();
        assert!(!r.pass);
        assert_eq!(r.worst_margin, Some(-1.0));
    }

    #[test]
    fn scalar_models_are_vacuously_cooperative() {
        let r = check_cooperative(&griffith(&[1.2], 1.0), &[Point::new(vec![0.3]).unwrap()], 0.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_margin, None);
    }

    #[test]
    fn irreducibility_cases() {
        let g1 = check_irreducible(&griffith(&[1.0, 1.0], 1.0), &plane_grid()).unwrap();
        assert!(g1.pass);

        let on_axis = vec![Point::new(vec![1.0, 0.0]).unwrap(), Point::new(vec![1.0, 0.5]).unwrap()];
        let g2 = check_irreducible(&griffith(&[1.0, 1.0], 2.0), &on_axis).unwrap();
        assert!(!g2.pass);
        assert_eq!(g2.failing, vec![0]);

        let diag = FnModel::linear(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]));
        let r = check_irreducible(&diag, &plane_grid()).unwrap();
        assert_eq!(r.failing.len(), plane_grid().len());
    }

    fn unit_rates_lyapunov() -> LyapunovQuadratic {
        solve_lyapunov(&GriffithParams::unit_noise(vec![1.0, 1.0], 1.0).unwrap().linear_part()).unwrap()
    }

    #[test]
    fn h2_passes_far_from_origin() {
        let v = unit_rates_lyapunov();
        let grid = annulus_grid(2, 4.0, 20.0, 41).unwrap();
        let r =
            verify_h2(&griffith(&[1.0, 1.0], 1.0), &v, H2Params { gamma: 1.0, eps0: 0.1, radius: 4.0 }, &grid).unwrap();
        assert!(r.pass, "worst margin {:?}", r.worst_margin);
    }

    #[test]
    fn h2_fails_with_small_radius() {
        let v = unit_rates_lyapunov();
        let grid = annulus_grid(2, 0.1, 20.0, 41).unwrap();
        let r =
            verify_h2(&griffith(&[1.0, 1.0], 1.0), &v, H2Params { gamma: 1.0, eps0: 0.1, radius: 0.1 }, &grid).unwrap();
        assert!(!r.pass);
        // the violations sit near the origin
        let pts: Vec<&Point> = grid.iter().filter(|p| p.norm() >= 0.1).collect();
        assert!(r.failing.iter().all(|&i| pts[i].norm() < 4.0));
    }

    #[test]
    fn h2_fails_without_drift() {
        let zero = FnModel::new(2, |_, out| out.fill(0.0), |_| DMatrix::zeros(2, 2));
        let v = unit_rates_lyapunov();
        let grid = annulus_grid(2, 1.0, 5.0, 11).unwrap();
        let r = verify_h2(&zero, &v, H2Params { gamma: 0.1, eps0: 0.1, radius: 1.0 }, &grid).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn h3_recipe_constants_pass() {
        let params = GriffithParams::new(vec![1.0, 1.0], 2.0, NoiseSpec::Linear { c: 0.5 }).unwrap();
        let model = GriffithModel::new(params);
        let v = unit_rates_lyapunov();
        let grid = box_grid(&[-10.0, -10.0], &[10.0, 10.0], 41).unwrap();
        // small theta, large eta, then C = M = max of the left-hand side
        let probe = verify_h3(&model, &v, H3Params { theta: 1e-2, eta: 1e2, c: 0.0, m: 0.0 }, &grid).unwrap();
        let lhs_max = -probe.components["growth"];
        let c = lhs_max.max(1.0);
        let r = verify_h3(&model, &v, H3Params { theta: 1e-2, eta: 1e2, c, m: c }, &grid).unwrap();
        assert!(r.pass, "{:?}", r.components);
    }

    #[test]
    fn h3_huge_theta_fails_growth() {
        let model = griffith(&[1.0, 1.0], 1.0);
        let v = unit_rates_lyapunov();
        let grid = box_grid(&[-3.0, -3.0], &[3.0, 3.0], 13).unwrap();
        let r = verify_h3(&model, &v, H3Params { theta: 1e6, eta: 1.0, c: 1.0, m: 1.0 }, &grid).unwrap();
        assert!(!r.pass);
        assert!(r.components["growth"] < 0.0);
        assert!(r.components["trace_floor"] >= 0.0);
    }

    #[test]
    fn h3_trace_floor_with_constant_noise() {
        let model = griffith(&[1.0, 1.0], 1.0);
        let v = unit_rates_lyapunov();
        let grid = box_grid(&[-3.0, -3.0], &[3.0, 3.0], 13).unwrap();
        let r = verify_h3(&model, &v, H3Params { theta: 1.0, eta: 1.0, c: 0.0, m: 0.0 }, &grid).unwrap();
        assert!(r.components["trace_floor"] >= 0.0);
    }

    #[test]
    fn grids() {
        assert_eq!(box_grid(&[0.0, 0.0], &[1.0, 1.0], 3).unwrap().len(), 9);
        let a = annulus_grid(2, 1.0, 2.0, 9).unwrap();
        assert!(a.iter().all(|p| p.norm() >= 1.0 - 1e-12 && p.norm() <= 2.0 + 1e-12));
    }
}
