use coopstab::action::{
    escape_path, minimize_action, quasipotential, DiscretePath, EscapeOptions, EscapeSeed, MinimizeOptions,
    QuasipotentialOptions,
};
use coopstab::oracles::{ou_finite_horizon, ou_quasipotential, random_path_probe};
use coopstab::{GriffithModel, GriffithParams, OuModel, Point};

fn pt(c: &[f64]) -> Point {
    Point::new(c.to_vec()).unwrap()
}

fn griffith() -> GriffithModel {
    GriffithModel::new(GriffithParams::unit_noise(vec![0.4, 1.0], 2.0).unwrap())
}

#[test]
fn ou_matches_gradient_identity() {
    let ou = OuModel::new(1.0, 1).unwrap();
    let opts = QuasipotentialOptions {
        t_grid: vec![1.0, 2.0, 5.0, 10.0, 20.0],
        n_segments: 200,
        eta: None,
        ..Default::default()
    };
    let est = quasipotential(&ou, &pt(&[0.0]), &pt(&[1.0]), &opts).unwrap();
    let exact = ou_quasipotential(1.0, 0.0, 1.0);
    assert!((est.value - exact).abs() <= 0.02 * exact, "{}", est.value);
    for (t, v) in &est.per_t {
        // every fixed-horizon minimum sits above the exact fixed-horizon value
        assert!(*v >= ou_finite_horizon(1.0, 0.0, 1.0, *t) * (1.0 - 1e-2), "T = {t}: {v}");
    }
}

#[test]
fn optimizer_beats_random_search() {
    let ou = OuModel::new(1.0, 1).unwrap();
    let (x, y) = (pt(&[0.0]), pt(&[1.0]));
    let probe = random_path_probe(&ou, &x, &y, 20.0, 200, 10_000, 3).unwrap();
    assert!(probe >= 1.0 - 0.05);
    let init = DiscretePath::straight(&x, &y, 20.0, 200).unwrap();
    let est = minimize_action(&ou, &init, &MinimizeOptions::default()).unwrap();
    assert!(est.value <= probe);

    let g = griffith();
    let (x, y) = (pt(&[2.0, 2.0]), pt(&[0.5, 0.5]));
    let probe = random_path_probe(&g, &x, &y, 10.0, 100, 2_000, 5).unwrap();
    let init = DiscretePath::straight(&x, &y, 10.0, 100).unwrap();
    let est = minimize_action(&g, &init, &MinimizeOptions::default()).unwrap();
    assert!(est.value <= probe, "{} > {probe}", est.value);
    assert!(probe > 0.01);
}

#[test]
fn downhill_and_uphill() {
    let g = griffith();
    let (lo, hi) = (pt(&[0.5, 0.5]), pt(&[2.0, 2.0]));
    let t0 = std::time::Instant::now();
    let down = quasipotential(
        &g,
        &lo,
        &hi,
        &QuasipotentialOptions {
            escape: Some(EscapeSeed {
                delta: 1e-2,
                direction: pt(&[1.0, 1.0]),
                attractor: hi.clone(),
                crawl: None,
                options: EscapeOptions::default(),
            }),
            ..Default::default()
        },
    )
    .unwrap();
    eprintln!("down {} ({:?}) {:?}", down.value, t0.elapsed(), down.per_t);
    let t0 = std::time::Instant::now();
    let up = quasipotential(&g, &hi, &lo, &QuasipotentialOptions::default()).unwrap();
    eprintln!("up {} ({:?}) {:?}", up.value, t0.elapsed(), up.per_t);
    assert!(down.value < 0.05);
    assert!(up.per_t.iter().all(|(_, v)| *v > 0.01));
    assert!(up.value >= 10.0 * down.value);
    assert_eq!(up.value, coopstab::action::action(&g, &up.path).unwrap());
}

#[test]
fn escape_action_is_linear_in_delta() {
    let g = griffith();
    let (y, z, v) = (pt(&[0.5, 0.5]), pt(&[2.0, 2.0]), pt(&[1.0, 1.0]));
    let mut pts = Vec::new();
    for delta in [1e-1, 1e-2, 1e-3] {
        let e = escape_path(&g, &y, delta, &v, &z, None, &EscapeOptions::default()).unwrap();
        assert!(e.action <= e.bound);
        pts.push((delta.ln(), e.action.ln()));
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
}
