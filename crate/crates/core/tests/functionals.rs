mod common;

use common::{radial6, rel, PI3};
use proptest::prelude::*;
use qnls::functionals::*;
use qnls::groundstate::{q_closed_form, q_orbit, GroundStateBundle};
use qnls::random::{random_pair, random_real_pair, rng};
use qnls::{FieldPair, GridSpec, RadialGrid, C64};

fn grid(n: usize) -> RadialGrid {
    GridSpec::new(n, 200.0).build().unwrap()
}

#[test]
fn hamiltonian_examples() {
    let g = grid(2048);
    assert_eq!(hamiltonian(&g, &FieldPair::zeros(g.n, 1.0)), 0.0);
    let kappa = 0.7;
    let b = GroundStateBundle::new(&g, kappa).unwrap();
    let q3 = radial6(|r| q_closed_form(r).powi(3), 1e-12);
    let grad2 = radial6(|r| (r / 6.0 * (1.0 + r * r / 24.0).powi(-3)).powi(2), 1e-12);
    assert!(rel(grad2, q3) < 1e-10, "∫|∇Q|² = ∫Q³");
    assert!(rel(hamiltonian(&g, &b.q_vec), 1.5 * kappa * grad2) < 1e-6);
    assert!(rel(interaction(&g, &b.q_vec), kappa * q3) < 1e-7);
    assert!(rel(q3, PI3 * 24f64.powi(3) / 60.0) < 1e-10);
}

#[test]
fn interaction_vanishes_for_imaginary_second_component() {
    let g = grid(256);
    let f: Vec<C64> = g.sample_c(|r| C64::new((-r * r).exp(), 0.0));
    let h: Vec<C64> = g.sample_c(|r| C64::new(0.0, (-r * r / 2.0).exp()));
    assert_eq!(interaction(&g, &FieldPair::new(f, h, 1.0).unwrap()), 0.0);
}

#[test]
fn energy_identities() {
    let g = grid(2048);
    for kappa in [0.5, 1.0, 2.0] {
        let b = GroundStateBundle::new(&g, kappa).unwrap();
        let h = hamiltonian(&g, &b.q_vec);
        assert!(rel(6.0 * energy(&g, &b.q_vec), h) < 1e-6);
    }
    let mut r = rng(3);
    for _ in 0..5 {
        let f = random_pair(&g, 1.2, &mut r);
        let du = g.radial_derivative(&f.u);
        let dv = g.radial_derivative(&f.v);
        let mut h = 0.0;
        let mut p = 0.0;
        for i in 0..g.n {
            h += (du[i].norm_sqr() + 0.6 * dv[i].norm_sqr()) * g.weights[i];
            p += (f.u[i] * f.u[i] * f.v[i].conj()).re * g.weights[i];
        }
        let c = conserved(&g, &f, System::Original);
        assert_eq!(c.e, 0.5 * c.h - 0.5 * c.p);
        assert!(rel(c.h, h) < 1e-6 && (c.p - p).abs() < 1e-12 * (1.0 + p.abs()));
        assert!(rel(energy(&g, &f), 0.5 * (h - p)) < 1e-5);
    }
}

#[test]
fn gap_delta_examples() {
    let g = grid(2048);
    let b = GroundStateBundle::new(&g, 1.0).unwrap();
    let hq = hamiltonian(&g, &b.q_vec);
    assert_eq!(gap_delta(&g, &b.q_vec, &b), 0.0);
    assert!(gap_delta(&g, &q_orbit(&g, 1.0, 0.7, 1.3), &b) < 1e-6 * hq);
    for a in [-0.1, 0.05, 0.3] {
        let d = gap_delta(&g, &b.q_vec.scale(1.0 + a), &b);
        let expect = ((1.0 + a) * (1.0 + a) - 1.0f64).abs() * hq;
        assert!(rel(d, expect) < 1e-10, "{d} vs {expect}");
    }
}

#[test]
fn variational_constants_examples() {
    let g = grid(2048);
    for kappa in [0.5, 1.0, 2.0] {
        let b = GroundStateBundle::new(&g, kappa).unwrap();
        let vc = variational_constants(&g, &b);
        assert!((vc.pohozaev_ratio - 1.5).abs() < 1.5e-4);
        let h = hamiltonian(&g, &b.q_vec);
        assert!(rel(vc.c_gn * h.powf(1.5), interaction(&g, &b.q_vec)) < 1e-14);
    }
    assert!((c_kappa(1.0) - 0.544331).abs() < 1e-6);
}

#[test]
fn inequalities_hold_on_ground_state_and_random_samples() {
    let g = grid(1024);
    let b = GroundStateBundle::new(&g, 0.9).unwrap();
    let rep = check_inequalities(&g, std::slice::from_ref(&b.q_vec), &b, 1e-8);
    assert!(rep.gn_margin.abs() < 1e-12);
    assert!(rep.convexity_margin.abs() < 1e-12);
    let mut r = rng(2024);
    let samples: Vec<FieldPair> = (0..100)
        .map(|k| {
            let f = random_pair(&g, 0.9, &mut r);
            let s = if k % 2 == 0 { 1.0 } else { 30.0 };
            f.scale(s)
        })
        .collect();
    let rep = check_inequalities(&g, &samples, &b, 1e-8);
    assert!(rep.violations.is_empty(), "{:?}", rep.violations);
    assert_eq!(rep.samples, 100);
    assert!(rep.convexity_samples > 10);
}

#[test]
fn virial_i_examples() {
    let g = grid(1024);
    for w in [VirialWeight::Infinite, VirialWeight::Finite(3.0)] {
        let q = q_orbit(&g, 0.5, 0.8, 1.7);
        let norm = hamiltonian(&g, &q);
        assert!(virial_i(&g, &q, &w).abs() < 1e-10 * norm);
        let mut r = rng(9);
        let real = random_real_pair(&g, 0.5, &mut r);
        assert_eq!(virial_i(&g, &real, &w), 0.0);
    }
    let (kappa, beta) = (0.5, 0.3);
    let u = g.sample_c(|r| C64::from_polar((-r * r).exp(), beta * r * r));
    let f = FieldPair::new(u, g.zeros(), kappa).unwrap();
    let oracle = 16.0 * kappa * beta * radial6(|r| r * r * (-2.0 * r * r).exp(), 1e-12);
    let got = virial_i(&g, &f, &VirialWeight::Infinite);
    assert!(rel(got, oracle) < 1e-6, "{got} vs {oracle}");
}

#[test]
fn virial_f_examples() {
    let g = grid(2048);
    let b = GroundStateBundle::new(&g, 1.0).unwrap();
    let hq = hamiltonian(&g, &b.q_vec);
    assert!(virial_f(&g, &b.q_vec, &VirialWeight::Infinite).abs() < 1e-4 * hq);
    let mut r = rng(4);
    let f = random_pair(&g, 0.5, &mut r);
    let expect = 8.0 * 0.5 * (2.0 * hamiltonian(&g, &f) - 3.0 * interaction(&g, &f));
    assert_eq!(virial_f(&g, &f, &VirialWeight::Infinite), expect);
    // data inside r ≤ R: F_R = F_∞
    let inside = FieldPair::new(
        g.sample_c(|r| C64::new((-r * r).exp(), 0.5 * r * r * (-r * r).exp())),
        g.sample_c(|r| C64::new((-2.0 * r * r).exp(), -0.3 * (-r * r).exp())),
        0.5,
    )
    .unwrap();
    let inf = virial_f(&g, &inside, &VirialWeight::Infinite);
    let fin = virial_f(&g, &inside, &VirialWeight::Finite(10.0));
    assert!(rel(fin, inf) < 1e-10, "{fin} vs {inf}");
    // slowly decaying data: F_R → F_∞ as R grows
    let slow = q_orbit(&g, 0.5, 0.0, 1.0).scale(1.1);
    let inf = virial_f(&g, &slow, &VirialWeight::Infinite);
    let errs: Vec<f64> = [2.0, 8.0, 32.0].iter().map(|&rr| (virial_f(&g, &slow, &VirialWeight::Finite(rr)) - inf).abs()).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn f_infinity_equals_signed_gap_at_threshold_energy() {
    let g = grid(1024);
    let kappa = 0.8;
    let b = GroundStateBundle::new(&g, kappa).unwrap();
    let eq = energy(&g, &b.q_vec);
    let hq = hamiltonian(&g, &b.q_vec);
    let mut r = rng(77);
    let mut tested = 0;
    while tested < 5 {
        let f = random_pair(&g, kappa, &mut r);
        let (h, p) = (hamiltonian(&g, &f), interaction(&g, &f));
        if p <= 0.0 {
            continue;
        }
        // E(sf) = s²H/2 - s³P/2 = E(𝐐); take the root on the decreasing branch
        let e = |s: f64| 0.5 * s * s * h - 0.5 * s * s * s * p - eq;
        let smax = 2.0 * h / (3.0 * p);
        if e(smax) < 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (smax, 10.0 * smax);
        while e(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if e(m) > 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        let u = f.scale(lo);
        let lhs = virial_f(&g, &u, &VirialWeight::Infinite);
        let rhs = 8.0 * kappa * (hq - hamiltonian(&g, &u));
        assert!(rel(lhs, rhs) < 1e-9, "{lhs} vs {rhs}");
        tested += 1;
    }
}

#[test]
fn virial_v_weights_and_coupling() {
    let g = grid(512);
    let mut r = rng(1);
    let f = random_pair(&g, 0.5, &mut r);
    let w = VirialWeight::Finite(4.0);
    let a = virial_v(&g, &f, &w, 1.0, 0.0);
    let b = virial_v(&g, &f, &w, 0.0, 1.0);
    assert!(rel(virial_v(&g, &f, &w, 2.0, 3.0), 2.0 * a + 3.0 * b) < 1e-14);
    assert_eq!(virial_coupling(&g, &f.re(), &w), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_half_h_minus_half_p(seed in 0u64..100_000, kappa in 0.2f64..3.0) {
        let g = GridSpec::new(128, 50.0).build().unwrap();
        let mut r = rng(seed);
        let f = random_pair(&g, kappa, &mut r);
        let c = conserved(&g, &f, System::Original);
        prop_assert_eq!(c.e, 0.5 * c.h - 0.5 * c.p);
        prop_assert!(c.h >= 0.0 && c.mass >= 0.0);
        prop_assert_eq!(c.momentum, [0.0; 6]);
    }

    #[test]
    fn virial_weight_is_r_squared_inside(rr in 1.0f64..50.0, x in 0.0f64..1.0) {
        let w = VirialWeight::Finite(rr);
        let r = x * rr;
        prop_assert!((w.w(r) - r * r).abs() <= 1e-12 * (1.0 + r * r));
        prop_assert!(w.derivatives(r * 2.5)[2] <= 2.0);
    }
}
