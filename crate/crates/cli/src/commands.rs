//! Subcommand implementations. Every command writes its results into the
//! output directory and returns a short human summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use coopstab::action::{
    quasipotential as estimate_qp, EscapeOptions, EscapeSeed, MinimizeOptions, QuasipotentialOptions,
};
use coopstab::equilibria::{
    classify_griffith, detect_stationary_arc, newton_equilibria, EquilibriumRecord, NewtonOptions,
};
use coopstab::flow::{check_monotonicity, MonotonicityOptions};
use coopstab::measure::{
    concentration_sweep, default_table1_regimes, estimate_stationary, griffith_balls, griffith_sweep, reproduce_table1,
    BallSpec, HistogramGrid, StationaryOptions, SweepSettings, Table1Options,
};
use coopstab::models::{
    annulus_grid, box_grid, check_cooperative, check_irreducible, solve_lyapunov, verify_h2, verify_h3, H2Params,
    H3Params, LYAPUNOV_RESIDUAL_TOL,
};
use coopstab::sde::{ensemble, split, EnsembleSummary, RunStatus, SimOptions};
use coopstab::{Model, ModelSpec, Point};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct Outcome {
    pub summary: Vec<String>,
    /// Numerical failure after partial outputs were written.
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(summary: Vec<String>) -> Self {
        Outcome { summary, failure: None }
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn point(coords: &[f64], what: &str) -> Result<Point, CliError> {
    Point::new(coords.to_vec()).map_err(|e| CliError::Validation(format!("{what}: {e}")))
}

fn block<'a, T>(b: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    b.as_ref().ok_or_else(|| CliError::Validation(format!("config has no \"{name}\" block")))
}

/// Equilibria and stable flags: Griffith classification, or Newton from
/// the given seeds (default: the origin).
fn located_equilibria(
    spec: &ModelSpec,
    model: &dyn Model,
    seeds: &[Vec<f64>],
) -> Result<Vec<EquilibriumRecord>, CliError> {
    if let ModelSpec::Griffith { .. } = spec {
        let g = spec.griffith()?.expect("griffith spec");
        return Ok(classify_griffith(g.params())?.records);
    }
    let seeds: Vec<Point> = if seeds.is_empty() {
        vec![Point::zeros(model.dim())]
    } else {
        seeds.iter().map(|s| point(s, "newton seed")).collect::<Result<_, _>>()?
    };
    Ok(newton_equilibria(model, &seeds, &NewtonOptions::default())?.records)
}

fn balls_for(spec: &ModelSpec, model: &dyn Model, delta: f64) -> Result<(Vec<BallSpec>, Vec<Point>), CliError> {
    if let ModelSpec::Griffith { .. } = spec {
        let g = spec.griffith()?.expect("griffith spec");
        let class = classify_griffith(g.params())?;
        let pts = class.records.iter().map(|r| r.point.clone()).collect();
        return Ok((griffith_balls(&class, &g.params().v0(), delta), pts));
    }
    let recs = located_equilibria(spec, model, &[])?;
    let balls = recs
        .iter()
        .enumerate()
        .map(|(i, r)| BallSpec {
            label: format!("E{i}"),
            center: r.point.clone(),
            radius: delta,
            stable: r.is_stable(),
        })
        .collect();
    Ok((balls, recs.into_iter().map(|r| r.point).collect()))
}

fn default_start(spec: &ModelSpec, model: &dyn Model, x0: &Option<Vec<f64>>) -> Result<Point, CliError> {
    if let Some(x) = x0 {
        return point(x, "x0");
    }
    let recs = located_equilibria(spec, model, &[])?;
    Ok(recs.iter().find(|r| r.is_stable()).map(|r| r.point.clone()).unwrap_or_else(|| Point::zeros(model.dim())))
}

pub fn equilibria(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let spec = cfg.model()?;
    let model = spec.build()?;
    let seeds = cfg.equilibria.as_ref().map(|b| b.seeds.clone()).unwrap_or_default();
    let report = if let ModelSpec::Griffith { .. } = spec {
        let g = spec.griffith()?.expect("griffith spec");
        let class = classify_griffith(g.params())?;
        let stable = class.stable_set();
        let arcs = detect_stationary_arc(&class.records.iter().map(|r| r.point.clone()).collect::<Vec<_>>(), 1e-3)?;
        json!({
            "phi": class.summary.phi,
            "m": class.summary.m,
            "phi_m": class.summary.phi_m,
            "z_m": class.summary.z_m,
            "roots": class.summary.roots,
            "predicted": class.summary.predicted,
            "equilibria": class.records,
            "stable_set": stable,
            "marginal": class.has_marginal(),
            "nondegenerate_arcs": arcs.iter().filter(|a| !a.is_degenerate()).count(),
        })
    } else {
        let seeds: Vec<Point> = if seeds.is_empty() {
            vec![Point::zeros(model.dim())]
        } else {
            seeds.iter().map(|s| point(s, "newton seed")).collect::<Result<_, _>>()?
        };
        let r = newton_equilibria(model.as_ref(), &seeds, &NewtonOptions::default())?;
        let stable: Vec<&Point> = r.records.iter().filter(|e| e.is_stable()).map(|e| &e.point).collect();
        json!({
            "equilibria": r.records,
            "failures": r.failures,
            "stable_set": stable,
        })
    };
    write_json(out, "equilibria.json", &report)?;
    let n = report["equilibria"].as_array().map_or(0, Vec::len);
    let s = report["stable_set"].as_array().map_or(0, Vec::len);
    Ok(Outcome::ok(vec![format!("equilibria: {n} found, {s} stable -> {}", out.join("equilibria.json").display())]))
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let spec = cfg.model()?;
    let b = block(&cfg.simulate, "simulate")?;
    let model = spec.build()?;
    let x0 = point(&b.x0, "x0")?;
    let opts = SimOptions {
        record_every: b.record_every.max(1),
        blowup_guard: b.blowup_guard.unwrap_or(SimOptions::default().blowup_guard),
    };
    if b.n_paths == 0 {
        return Err(CliError::Validation("n_paths must be at least 1".into()));
    }
    let runs = ensemble(model.as_ref(), &x0, b.eps, b.t, b.step, b.n_paths, cfg.seed, &opts)?;
    let blowups: Vec<(usize, f64)> = runs
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r.status {
            RunStatus::BlowUp { time } => Some((i, time)),
            RunStatus::Completed => None,
        })
        .collect();
    let partial = !blowups.is_empty();
    let csv = if partial { "trajectory.partial.csv" } else { "trajectory.csv" };
    if runs.len() == 1 {
        runs[0].write_csv(create(out, csv)?)?;
    } else {
        coopstab::sde::write_ensemble_csv(create(out, csv)?, &runs)?;
    }
    let moments = EnsembleSummary::of(b.eps, &runs).ok().map(|s| s.moments);
    let report = json!({
        "eps": b.eps,
        "t": b.t,
        "step": runs[0].step,
        "seed": cfg.seed,
        "n_paths": runs.len(),
        "blowups": blowups.len(),
        "blowup_paths": blowups,
        "moments": moments,
        "partial": partial,
        "trajectory_csv": csv,
    });
    write_json(out, "simulate.json", &report)?;
    let summary = vec![format!(
        "simulate: {} path(s), eps = {}, T = {}, blow-ups = {} -> {}",
        runs.len(),
        b.eps,
        b.t,
        blowups.len(),
        out.join(csv).display()
    )];
    Ok(Outcome {
        summary,
        failure: partial.then(|| format!("{} path(s) hit the blow-up guard; partial output flagged", blowups.len())),
    })
}

pub fn stationary(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let spec = cfg.model()?;
    let b = block(&cfg.stationary, "stationary")?;
    let model = spec.build()?;
    let (balls, eq_points) = balls_for(spec, model.as_ref(), b.delta)?;
    let x0 = default_start(spec, model.as_ref(), &b.x0)?;
    let radius = balls.first().map_or(b.delta, |s| s.radius);
    let grid = match &b.grid {
        Some(g) => HistogramGrid::new(g.lo.clone(), g.hi.clone(), g.bins.clone())?,
        None => HistogramGrid::covering(&eq_points, 1.0 + radius, b.bins)?,
    };
    let t_total = b.t_total.unwrap_or_else(|| b.rule.t_total(b.eps));
    let mut opts = StationaryOptions::new(t_total, split(cfg.seed, 0));
    opts.step = b.step;
    opts.burn_in = b.burn_in;
    if let Some(g) = b.blowup_guard {
        opts.blowup_guard = g;
    }
    let est = estimate_stationary(model.as_ref(), &x0, b.eps, &opts, &grid, &balls)?;
    est.write_histogram_csv(create(out, "histogram.csv")?)?;
    let report = json!({
        "eps": est.eps,
        "t_total": est.t_total,
        "step": est.step,
        "burn_in": est.burn_in,
        "seed": cfg.seed,
        "samples": est.samples,
        "clamped": est.clamped,
        "grid": est.grid,
        "balls": est.balls,
        "stable_mass": est.stable_mass,
        "unstable_mass": est.unstable_mass,
        "leftover_mass": est.leftover_mass,
        "mean": est.mean,
        "second_moment": est.second_moment,
        "status": est.status,
        "valid": est.valid,
    });
    write_json(out, "stationary.json", &report)?;
    let summary = vec![format!(
        "stationary: eps = {}, T = {}, stable mass {:.4}, unstable mass {:.4} -> {}",
        est.eps,
        est.t_total,
        est.stable_mass,
        est.unstable_mass,
        out.join("stationary.json").display()
    )];
    Ok(Outcome {
        summary,
        failure: (!est.valid).then(|| "run aborted by the blow-up guard; report flagged invalid".into()),
    })
}

pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let spec = cfg.model()?;
    let b = block(&cfg.sweep, "sweep")?;
    let model = spec.build()?;
    let settings = SweepSettings {
        step: b.step,
        burn_in: b.burn_in,
        rule: b.rule,
        seed: cfg.seed,
        base_stream: 0,
        slack: b.slack,
    };
    let report: Value = match (spec, &b.x0) {
        (ModelSpec::Griffith { .. }, None) => {
            let g = spec.griffith()?.expect("griffith spec");
            let (class, rep) = griffith_sweep(g.params(), &b.eps, &settings, b.delta, b.bins)?;
            json!({ "classification": class.summary, "stable_set": class.stable_set(), "report": rep })
        }
        _ => {
            let (balls, eq_points) = balls_for(spec, model.as_ref(), b.delta)?;
            let x0 = default_start(spec, model.as_ref(), &b.x0)?;
            let radius = balls.first().map_or(b.delta, |s| s.radius);
            let grid = HistogramGrid::covering(&eq_points, 1.0 + radius, b.bins)?;
            let rep = concentration_sweep(model.as_ref(), &x0, &b.eps, &settings, &grid, &balls)?;
            json!({ "report": rep })
        }
    };
    write_json(out, "sweep.json", &report)?;
    let rep = &report["report"];
    let invalid = rep["entries"].as_array().map_or(0, |e| e.iter().filter(|x| x["valid"] == json!(false)).count());
    let summary = vec![format!(
        "sweep: {} noise levels, monotone = {}, agreement = {} -> {}",
        b.eps.len(),
        rep["monotone"],
        rep["agreement"],
        out.join("sweep.json").display()
    )];
    Ok(Outcome { summary, failure: (invalid > 0).then(|| format!("{invalid} noise level(s) failed; entries flagged")) })
}

pub fn quasipotential(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let spec = cfg.model()?;
    let b = block(&cfg.quasipotential, "quasipotential")?;
    let model = spec.build()?;
    let x = point(&b.x, "x")?;
    let y = point(&b.y, "y")?;
    let mut opts = QuasipotentialOptions { n_segments: b.n_segments, eta: b.eta, ..Default::default() };
    if let Some(t) = &b.t_grid {
        opts.t_grid = t.clone();
    }
    if let Some(n) = b.max_iters {
        opts.minimize = MinimizeOptions { max_iters: n, ..opts.minimize };
    }
    if let Some(e) = &b.escape {
        opts.escape = Some(EscapeSeed {
            delta: e.delta,
            direction: point(&e.direction, "escape direction")?,
            attractor: point(&e.attractor, "escape attractor")?,
            crawl: None,
            options: EscapeOptions::default(),
        });
    }
    let est = estimate_qp(model.as_ref(), &x, &y, &opts)?;
    est.path.write_csv(create(out, "path.csv")?)?;
    let mut w = create(out, "quasipotential.json")?;
    est.write_summary_json(&mut w)?;
    writeln!(w)?;
    w.flush()?;
    Ok(Outcome::ok(vec![format!(
        "quasipotential: V = {:.6} (T = {}, seed {}) -> {}",
        est.value,
        est.t_grid_value,
        est.seed_kind,
        out.join("quasipotential.json").display()
    )]))
}

pub fn verify(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let spec = cfg.model()?;
    let model = spec.build()?;
    let d = model.dim();
    let default_block =
        crate::config::VerifyBlock { lo: None, hi: None, n: 11, h2: None, h3: None, monotonicity_pairs: 200 };
    let b = cfg.verify.as_ref().unwrap_or(&default_block);
    let lo = b.lo.clone().unwrap_or_else(|| vec![-3.0; d]);
    let hi = b.hi.clone().unwrap_or_else(|| vec![3.0; d]);
    let grid = box_grid(&lo, &hi, b.n)?;
    let coop = check_cooperative(model.as_ref(), &grid, 0.0)?;
    let irr = check_irreducible(model.as_ref(), &grid)?;
    let lyap = solve_lyapunov(&spec.linear_part()?);
    let mut report = json!({
        "cooperative": coop,
        "irreducible": irr,
    });
    match &lyap {
        Ok(v) => {
            let rows: Vec<Vec<f64>> = v.matrix().row_iter().map(|r| r.iter().copied().collect()).collect();
            report["lyapunov"] = json!({
                "matrix": rows,
                "min_eigenvalue": v.min_eigenvalue(),
                "residual": v.residual(),
                "pass": v.residual() <= LYAPUNOV_RESIDUAL_TOL && v.min_eigenvalue() > 0.0,
            });
        }
        Err(e) => report["lyapunov"] = json!({ "error": e.to_string(), "pass": false }),
    }
    if let (Some(h2), Ok(v)) = (&b.h2, &lyap) {
        let ring = annulus_grid(d, h2.radius, h2.r_max, b.n)?;
        let p = H2Params { gamma: h2.gamma, eps0: h2.eps0, radius: h2.radius };
        report["h2"] = serde_json::to_value(verify_h2(model.as_ref(), v, p, &ring)?)?;
    }
    if let (Some(h3), Ok(v)) = (&b.h3, &lyap) {
        let c = match h3.c {
            Some(c) => c,
            None => {
                let probe =
                    verify_h3(model.as_ref(), v, H3Params { theta: h3.theta, eta: h3.eta, c: 0.0, m: 0.0 }, &grid)?;
                (-probe.components["growth"]).max(1.0)
            }
        };
        let p = H3Params { theta: h3.theta, eta: h3.eta, c, m: h3.m.unwrap_or(c) };
        report["h3"] = serde_json::to_value(verify_h3(model.as_ref(), v, p, &grid)?)?;
    }
    let mono =
        check_monotonicity(model.as_ref(), b.monotonicity_pairs, 5.0, cfg.seed, &MonotonicityOptions::default())?;
    report["monotonicity"] = serde_json::to_value(&mono)?;
    write_json(out, "verify.json", &report)?;
    let flag = |v: &Value| match v.get("pass") {
        Some(Value::Bool(true)) => "pass",
        Some(_) => "fail",
        None => "skipped",
    };
    Ok(Outcome::ok(vec![format!(
        "verify: cooperative {}, irreducible {}, lyapunov {}, H2 {}, H3 {}, order violations {} -> {}",
        flag(&report["cooperative"]),
        flag(&report["irreducible"]),
        flag(&report["lyapunov"]),
        report.get("h2").map_or("skipped", flag),
        report.get("h3").map_or("skipped", flag),
        mono.order_violations,
        out.join("verify.json").display()
    )]))
}

pub fn table1(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let b = cfg.table1.clone().unwrap_or_default();
    let regimes = b.regimes.clone().unwrap_or_else(default_table1_regimes);
    let opts = Table1Options {
        eps_list: b.eps.clone(),
        settings: SweepSettings {
            step: b.step,
            burn_in: b.burn_in,
            rule: b.rule,
            seed: cfg.seed,
            base_stream: 0,
            slack: 0.02,
        },
        delta: b.delta,
        bins: b.bins,
    };
    let report = reproduce_table1(&regimes, &opts)?;
    write_json(out, "table1.json", &report)?;
    let mut summary =
        vec![format!("{:>4} {:>8} {:>16} {:>10} {:>10} {:>6}", "m", "phi", "support", "stable", "unstable", "agree")];
    for r in &report.rows {
        let mass = |m: Option<f64>| m.map_or("-".to_string(), |v| format!("{v:.4}"));
        summary.push(format!(
            "{:>4} {:>8} {:>16} {:>10} {:>10} {:>6}{}",
            r.m,
            format!("{:.4}", r.phi),
            format!("{:?}", r.predicted.kind),
            mass(r.stable_mass),
            mass(r.unstable_mass),
            r.agree,
            if r.marginal { "  (marginal: no Monte-Carlo claim)" } else { "" }
        ));
    }
    summary.push(format!("all rows agree: {} -> {}", report.all_agree, out.join("table1.json").display()));
    Ok(Outcome::ok(summary))
}
