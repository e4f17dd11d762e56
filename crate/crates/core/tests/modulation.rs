use qnls::groundstate::{apply_symmetry, q_orbit, transform_t};
use qnls::modulation::*;
use qnls::random::{random_pair, rng};
use qnls::special::{construct_g, log_slope, GConfig, GSign};
use qnls::spectrum::{eigenpair_e, SpectrumOptions};
use qnls::{Error, GridSpec, GroundStateBundle, RadialGrid};
use std::f64::consts::PI;

fn setup(n: usize) -> (RadialGrid, GroundStateBundle) {
    let g = GridSpec::new(n, 200.0).build().unwrap();
    let b = GroundStateBundle::new(&g, 0.5).unwrap();
    (g, b)
}

fn opts() -> ModulationOptions {
    ModulationOptions::default()
}

#[test]
fn ground_state_decomposes_trivially() {
    let (g, b) = setup(1024);
    let d = decompose(&g, &b, &b.q_vec, None, &opts()).unwrap();
    let p = d.point;
    assert!(p.converged);
    assert!(p.theta.abs() < 1e-10, "{}", p.theta);
    assert!((p.lambda - 1.0).abs() < 1e-8, "{}", p.lambda);
    assert!(p.alpha.abs() < 1e-10);
    assert!(p.h_norm < 1e-8 * g.h1dot_norm(&b.q_vec));
    assert_eq!(p.delta, 0.0);
}

#[test]
fn orbit_point_recovers_its_parameters() {
    let (g, b) = setup(2048);
    let (th0, l0) = (0.7, 1.3);
    let u = q_orbit(&g, 0.5, th0, l0);
    let d = decompose(&g, &b, &u, None, &opts()).unwrap();
    assert!(d.point.converged);
    let (th, l) = d.point.orbit();
    assert!((th - th0).abs() < 1e-6, "{th}");
    assert!((l - l0).abs() < 1e-6, "{l}");
    // what is left is interpolation error
    assert!(d.point.alpha.abs() < 1e-5);
    assert!(d.point.h_norm < 1e-4 * g.h1dot_norm(&b.q_vec), "{:e}", d.point.h_norm);
    // θ₀ beyond π wraps into [0, 2π)
    let u = q_orbit(&g, 0.5, -2.0, 1.0);
    let (th, _) = decompose(&g, &b, &u, None, &opts()).unwrap().point.orbit();
    assert!((th - (2.0 * PI - 2.0)).abs() < 1e-8, "{th}");
}

#[test]
fn amplitude_ray_is_exact() {
    let (g, b) = setup(1024);
    let a = 0.02;
    let d = decompose(&g, &b, &b.q_vec.scale(1.0 + a), None, &opts()).unwrap();
    assert!(d.point.converged);
    assert!((d.point.alpha - a).abs() < 1e-3);
    assert!((d.point.alpha - a).abs() < 1e-9);
    assert!(d.point.h_norm < 1e-6 * g.h1dot_norm(&b.q_vec));
}

#[test]
fn returned_h_meets_the_conditions() {
    let (g, b) = setup(1024);
    let mut r = rng(11);
    let noise = random_pair(&g, 0.5, &mut r);
    let u = b.q_vec.add(&noise.scale(0.02 * g.h1dot_norm(&b.q_vec) / g.h1dot_norm(&noise)));
    let d = decompose(&g, &b, &u, None, &opts()).unwrap();
    assert!(d.point.converged);
    let o = d.orthogonality;
    assert!(o.i_q1.abs() <= 1e-10 && o.lambda_q.abs() <= 1e-10, "{o:?}");
    assert!(o.phi.abs() <= 1e-12, "{o:?}");
}

#[test]
fn decomposition_is_equivariant() {
    let (g, b) = setup(2048);
    let mut r = rng(5);
    let noise = random_pair(&g, 0.5, &mut r);
    let u = b.q_vec.scale(1.01).add(&noise.scale(0.01 * g.h1dot_norm(&b.q_vec) / g.h1dot_norm(&noise)));
    let d0 = decompose(&g, &b, &u, None, &opts()).unwrap().point;
    let (th1, l1) = (0.4, 1.1);
    let v = apply_symmetry(&g, &u, th1, l1).unwrap();
    let d1 = decompose(&g, &b, &v, None, &opts()).unwrap().point;
    // (v)_[θ,λ] = u_[θ + θ₁, λ λ₁]
    assert!((d1.theta + th1 - d0.theta).abs() < 1e-5, "{} {}", d1.theta, d0.theta);
    assert!((d1.lambda * l1 - d0.lambda).abs() < 1e-5);
    assert!((d1.alpha - d0.alpha).abs() < 1e-4 * d0.alpha.abs().max(1e-3));
    assert!((d1.h_norm - d0.h_norm).abs() < 2e-2 * d0.h_norm);
}

#[test]
fn states_far_from_the_orbit_are_refused() {
    let (g, b) = setup(512);
    match decompose(&g, &b, &b.q_vec.scale(1.5), None, &opts()) {
        Err(Error::OutsideNeighbourhood { delta, delta0 }) => assert!(delta >= delta0),
        other => panic!("{:?}", other.map(|d| d.point)),
    }
}

#[test]
fn newton_failure_is_flagged() {
    let (g, b) = setup(512);
    let u = q_orbit(&g, 0.5, 0.3, 1.2);
    let o = ModulationOptions { max_iter: 1, tol: 1e-14, ..opts() };
    let d = decompose(&g, &b, &u, Some((0.0, 1.0)), &o).unwrap();
    assert!(!d.point.converged);
}

#[test]
fn stationary_track_has_no_motion() {
    let (g, b) = setup(512);
    let states: Vec<_> = (0..6).map(|i| (i as f64 * 0.5, b.q_vec.clone())).collect();
    let tr = track(&g, &b, &states, &opts()).unwrap();
    assert_eq!(tr.converged_fraction(), 1.0);
    for i in 0..states.len() {
        assert!(tr.d_theta[i].unwrap().abs() < 1e-12);
        assert!(tr.d_alpha[i].unwrap().abs() < 1e-12);
        assert!(tr.d_lambda[i].unwrap().abs() < 1e-12);
    }
    let rep = verify_rate_bound(&tr, 1e-12);
    assert_eq!(rep.used, 0);
    assert_eq!(rep.max_ratio, None);
}

#[test]
fn phase_jitter_breaks_the_rate_bound() {
    let smooth: Vec<ModulationPoint> = (0..50)
        .map(|i| {
            let t = i as f64 * 0.1;
            let delta = 1e-2 * (-0.1 * t).exp();
            ModulationPoint { t, theta: 1e-3 * delta * t, lambda: 1.0, alpha: -delta / 10.0, delta, h_norm: delta, converged: true }
        })
        .collect();
    let base = verify_rate_bound(&ModulationTrack::from_points(smooth.clone(), 5357.0, 73.0), 0.0).max_ratio.unwrap();
    let jitter: Vec<ModulationPoint> = smooth.iter().enumerate().map(|(i, p)| ModulationPoint { theta: p.theta + if i % 2 == 0 { 1e-2 } else { -1e-2 }, ..*p }).collect();
    let bad = verify_rate_bound(&ModulationTrack::from_points(jitter, 5357.0, 73.0), 0.0).max_ratio.unwrap();
    assert!(base < 1.0);
    assert!(bad > 100.0 * base, "{bad} vs {base}");
}

#[test]
fn track_csv_has_one_row_per_point() {
    let (g, b) = setup(256);
    let states = vec![(0.0, b.q_vec.clone()), (1.0, b.q_vec.scale(1.01))];
    let tr = track(&g, &b, &states, &opts()).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let s = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "t,theta,lambda,alpha,delta,h_norm,converged");
    assert_eq!(lines.len(), 3);
}

#[test]
fn threshold_solution_track_decays_comparably() {
    let (g, b) = setup(1024);
    let s = eigenpair_e(&g, &b, &SpectrumOptions::default()).unwrap();
    let th = construct_g(&g, &b, &s, GSign::Minus, &GConfig::default()).unwrap();
    let states: Vec<_> = th.trajectory.snapshots.iter().filter(|(t, _)| *t >= th.t0).map(|(t, w)| (*t, transform_t(w, true))).collect();
    let tr = track(&g, &b, &states, &opts()).unwrap();
    assert_eq!(tr.converged_fraction(), 1.0);
    let t: Vec<f64> = tr.points.iter().map(|p| p.t).collect();
    let rd = -log_slope(&t, &tr.points.iter().map(|p| p.delta).collect::<Vec<_>>()).unwrap();
    let ra = -log_slope(&t, &tr.points.iter().map(|p| p.alpha.abs()).collect::<Vec<_>>()).unwrap();
    assert!(rd > 0.0 && ra > 0.0);
    assert!((rd / ra - 1.0).abs() < 0.15, "{rd} {ra}");
    assert!((rd / s.lambda1 - 1.0).abs() < 0.15);
    let c = tr.comparability(0.0).unwrap();
    assert!(c < 10.0, "comparability {c}");
    let rep = verify_rate_bound(&tr, 0.0);
    assert!(rep.used > 10);
    assert!(rep.max_ratio.unwrap().is_finite());
}
