mod common;

use common::rel;
use qnls::functionals::{energy, energy_sys, hamiltonian, interaction, System};
use qnls::groundstate::*;
use qnls::random::{random_pair, rng};
use qnls::{FieldPair, GridSpec, RadialGrid, C64};
use std::time::Instant;

fn grid(n: usize) -> RadialGrid {
    GridSpec::new(n, 200.0).build().unwrap()
}

#[test]
fn elliptic_residual_at_production_resolution() {
    let start = Instant::now();
    let g = grid(2048);
    let b = GroundStateBundle::new(&g, 1.0).unwrap();
    let res = verify_elliptic(&b);
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!(res <= 1e-6, "{res}");
}

#[test]
fn elliptic_residual_zero_field_and_linear_response() {
    let g = grid(1024);
    assert_eq!(elliptic_residual(&g, &vec![0.0; g.n]), 0.0);
    let base = elliptic_residual(&g, &g.sample(q_closed_form));
    let r = |eps: f64| elliptic_residual(&g, &g.sample(|r| q_closed_form(r) + eps * (-r * r).exp()));
    let (a, b) = (r(1e-2), r(1e-3));
    assert!(a > 100.0 * base && b > 10.0 * base);
    assert!((a / b - 10.0).abs() < 1.0, "ratio {}", a / b);
}

#[test]
fn bundle_invariants_hold() {
    let g = grid(512);
    for kappa in [0.5, 1.0, 2.0] {
        let b = GroundStateBundle::new(&g, kappa).unwrap();
        assert!((b.q[0] - 1.0).abs() < 1e-4);
        assert!((b.pohozaev_ratio - 1.5).abs() < 1e-4);
        let sk = kappa.sqrt();
        for i in 0..g.n {
            assert_eq!(b.q1_vec.u[i].re, sk * b.q[i]);
            assert_eq!(b.q1_vec.v[i].re, 2.0 * b.q[i]);
            assert!((b.t_q.u[i].re - sk * b.q[i] / 2f64.sqrt()).abs() < 1e-15);
            assert!((b.t_q.v[i].re - b.q[i] / 2.0).abs() < 1e-15);
        }
    }
}

#[test]
fn symmetry_identity_and_invariance() {
    let g = grid(1024);
    let b = GroundStateBundle::new(&g, 0.8).unwrap();
    let id = apply_symmetry(&g, &b.q_vec, 0.0, 1.0).unwrap();
    assert_eq!(id, b.q_vec);

    let mut r = rng(11);
    let f = random_pair(&g, 0.8, &mut r);
    for (theta, lambda) in [(0.3, 1.4), (-1.1, 0.7), (2.0, 1.05)] {
        let s = apply_symmetry(&g, &f, theta, lambda).unwrap();
        assert!(rel(hamiltonian(&g, &s), hamiltonian(&g, &f)) < 1e-4, "H at λ={lambda}");
        let (p0, p1) = (interaction(&g, &f), interaction(&g, &s));
        assert!((p1 - p0).abs() < 1e-4 * hamiltonian(&g, &f).powf(1.5), "P at λ={lambda}: {p0} {p1}");
    }
}

#[test]
fn symmetry_is_a_group_action() {
    let g = grid(1024);
    let b = GroundStateBundle::new(&g, 1.0).unwrap();
    let two = apply_symmetry(&g, &apply_symmetry(&g, &b.q_vec, 0.4, 1.3).unwrap(), -0.9, 0.8).unwrap();
    let one = apply_symmetry(&g, &b.q_vec, 0.4 - 0.9, 1.3 * 0.8).unwrap();
    let exact = q_orbit(&g, 1.0, -0.5, 1.04);
    let d = g.h1dot_norm(&two.sub(&one)) / g.h1dot_norm(&one);
    assert!(d < 1e-4, "{d}");
    assert!(g.h1dot_norm(&one.sub(&exact)) / g.h1dot_norm(&exact) < 1e-4);
}

#[test]
fn transform_relations() {
    let g = grid(512);
    let mut r = rng(5);
    for _ in 0..10 {
        let w = random_pair(&g, 1.3, &mut r);
        let back = transform_t(&w, true);
        assert!(rel(energy(&g, &back), 2.0 * energy_sys(&g, &w, System::Transformed)) < 1e-12);
        let round = transform_t(&back, false);
        assert!(round.sub(&w).max_abs() < 1e-14);
    }
}

#[test]
fn transformed_ground_state_is_stationary() {
    let g = grid(2048);
    let kappa: f64 = 0.6;
    let b = GroundStateBundle::new(&g, kappa).unwrap();
    let w = &b.t_q;
    let lu = g.laplacian6(&w.u);
    let lv = g.laplacian6(&w.v);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..g.n {
        let r1 = lu[i] + 2.0 * w.u[i].conj() * w.v[i];
        let r2 = lv[i] * kappa + w.u[i] * w.u[i];
        num += (r1.norm_sqr() + r2.norm_sqr()) * g.weights[i];
        den += ((2.0 * w.u[i].conj() * w.v[i]).norm_sqr() + (w.u[i] * w.u[i]).norm_sqr()) * g.weights[i];
    }
    assert!((num / den).sqrt() <= 1e-6, "{}", (num / den).sqrt());
}

#[test]
fn directions_and_orbit_derivative() {
    let g = grid(1024);
    let b = GroundStateBundle::new(&g, 1.0).unwrap();
    let d = build_directions(&g, &b);
    assert!(d.orthogonality < 1e-6, "{}", d.orthogonality);
    for i in 0..g.n {
        assert_eq!(d.i_q1.u[i], C64::new(0.0, b.q[i]));
        assert_eq!(d.i_q1.v[i], C64::new(0.0, 2.0 * b.q[i]));
    }
    let eta = 1e-5;
    let plus = q_orbit(&g, 1.0, 0.0, 1.0 + eta);
    let minus = q_orbit(&g, 1.0, 0.0, 1.0 - eta);
    let fd = plus.lin(0.5 / eta, &minus, -0.5 / eta);
    let err = fd.add(&b.lambda_q).max_abs();
    assert!(err < 1e-8, "∂λ orbit + ΛQ = {err}");
}

#[test]
fn shooting_reproduces_closed_form() {
    let prof = shoot_ground_state(1.0, 40.0, 40_000);
    for &(r, q, dq) in prof.iter().step_by(997) {
        assert!((q - q_closed_form(r)).abs() < 1e-10, "r={r}");
        assert!((dq - q_prime(r)).abs() < 1e-10, "r={r}");
    }
    let (r, q, _) = *prof.last().unwrap();
    assert!((r.powi(4) * q - 576.0 * (1.0 + 24.0 / (r * r)).powi(-2)).abs() < 1e-5);
}

#[test]
fn snapshot_csv_layout() {
    let g = GridSpec::new(16, 10.0).build().unwrap();
    let b = GroundStateBundle::with_tolerance(&g, 1.0, 1.0).unwrap();
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &g, &b).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.split('\n').collect();
    assert_eq!(lines[0], "r,Q,LambdaQ");
    assert_eq!(lines.len(), 18);
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], g.nodes[0]);
    assert!(!text.contains('\r'));
}

#[test]
fn zero_kappa_rejected() {
    let g = grid(64);
    assert!(GroundStateBundle::new(&g, 0.0).is_err());
    assert!(FieldPair::new(vec![], vec![], -1.0).is_err());
}
