use qnls::evolution::{detect, Classification, DetectOptions, Sponge};
use qnls::functionals::{energy, hamiltonian_sys, System};
use qnls::linops::{n_bilinear, BlockOperatorE};
use qnls::special::*;
use qnls::spectrum::{eigenpair_e, SpectralResult, SpectrumOptions};
use qnls::{Error, GridSpec, GroundStateBundle, RadialGrid};

fn setup(n: usize) -> (RadialGrid, GroundStateBundle, SpectralResult) {
    let g = GridSpec::new(n, 200.0).build().unwrap();
    let b = GroundStateBundle::new(&g, 0.5).unwrap();
    let s = eigenpair_e(&g, &b, &SpectrumOptions::default()).unwrap();
    (g, b, s)
}

/// `t` grid over `e^{-λ₁t} ∈ [1e-4, 1e-2]`.
fn window(lambda: f64) -> Vec<f64> {
    let (lo, hi) = (100f64.ln() / lambda, 1e4f64.ln() / lambda);
    (0..=40).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect()
}

#[test]
fn zero_amplitude_gives_zero_profiles_and_residual() {
    let (g, b, s) = setup(512);
    let sol = approx_profiles(&g, &b, &s, 0.0, 3).unwrap();
    for p in &sol.profiles {
        assert_eq!(g.h1dot_norm(p), 0.0);
    }
    let fit = residual_epsk(&g, &b, &sol, &window(s.lambda1));
    assert!(fit.l2.iter().chain(&fit.h1).all(|x| *x == 0.0));
    assert_eq!(fit.slope_l2, None);
    assert_eq!(fit.slope_h1, None);
}

#[test]
fn first_profile_is_scaled_unstable_eigenvector() {
    let (g, b, s) = setup(512);
    let sol = approx_profiles(&g, &b, &s, -0.7, 2).unwrap();
    assert_eq!(sol.profiles[0], s.e_plus.scale(-0.7));
    assert_eq!(sol.lambda1, s.lambda1);
    // the refined pair is the same eigenpair
    assert!((sol.refined.lambda1.to_f64() - s.lambda1).abs() < 1e-9 * s.lambda1);
    let d = sol.refined.profiles[0].to_pair().sub(&sol.profiles[0]);
    assert!(g.l2_norm(&d) < 1e-8 * g.l2_norm(&sol.profiles[0]));
}

#[test]
fn second_profile_solves_shifted_system() {
    let (g, b, s) = setup(1024);
    let sol = approx_profiles(&g, &b, &s, 1.0, 2).unwrap();
    let e = BlockOperatorE::new(&g, &b);
    let g1 = &sol.profiles[0];
    let g2 = &sol.profiles[1];
    let rhs = n_bilinear(g1, g1).times_i();
    let res = e.apply(g2).sub(&g2.scale(2.0 * s.lambda1)).sub(&rhs);
    let r = g.l2_norm(&res) / g.l2_norm(&rhs);
    assert!(r <= 1e-8, "residual {r:e}");
    assert!(sol.solve_residuals[0] <= 1e-8);
}

#[test]
fn forcing_polarizes_the_quadratic_map() {
    let (g, b, s) = setup(256);
    let sol = approx_profiles(&g, &b, &s, 0.3, 3).unwrap();
    // C_3 = B(g1, g2) + B(g2, g1) = 2 B(g1, g2)
    let c3 = sol.forcing(3);
    let want = n_bilinear(&sol.profiles[0], &sol.profiles[1]).scale(2.0);
    assert!(g.l2_norm(&c3.sub(&want)) <= 1e-14 * g.l2_norm(&want));
}

#[test]
fn residual_slopes_match_order() {
    let (g, b, s) = setup(2048);
    let l = s.lambda1;
    for k in 1..=3 {
        let sol = approx_profiles(&g, &b, &s, 1.0, k).unwrap();
        let fit = residual_epsk(&g, &b, &sol, &window(l));
        let want = -((k + 1) as f64) * l;
        for slope in [fit.slope_l2.unwrap(), fit.slope_h1.unwrap()] {
            assert!((slope - want).abs() <= 0.1 * want.abs(), "k = {k}: slope {slope} vs {want}");
        }
    }
}

#[test]
fn singular_shift_is_reported() {
    let (g, b, mut s) = setup(256);
    // with λ₁ halved, 2λ₁ hits the true unstable eigenvalue
    s.lambda1 *= 0.5;
    match approx_profiles(&g, &b, &s, 1.0, 2) {
        Err(Error::Numerical(msg)) => assert!(msg.contains("outside the spectrum"), "{msg}"),
        other => panic!("expected a singular-shift error, got {:?}", other.map(|s| s.solve_residuals)),
    }
}

#[test]
fn zero_amplitude_shot_stays_at_ground_state() {
    let (g, b, s) = setup(512);
    let mut cfg = ShootConfig::new(0.0, 3, s.lambda1);
    cfg.t_end = cfg.t_far + 2.0;
    let tr = shoot_w(&g, &b, &s, &cfg).unwrap();
    assert!(!tr.backward_blowup());
    assert!((tr.t_min() - 0.0).abs() < 1e-9);
    let scale = g.h1dot_norm(&b.t_q);
    for d in &tr.deviations {
        assert!(d.dev_k <= 1e-10 * scale && d.dev_linear <= 1e-10 * scale);
        assert!(d.hn_gap.abs() <= 1e-9 * scale * scale);
    }
}

#[test]
fn shoot_config_rejects_unordered_times() {
    let (g, b, s) = setup(128);
    let mut cfg = ShootConfig::new(1.0, 2, s.lambda1);
    cfg.t_start = cfg.t_far + 1.0;
    assert!(matches!(shoot_w(&g, &b, &s, &cfg), Err(Error::InvalidParameter(_))));
}

#[test]
fn unit_shot_envelopes_and_time_translation() {
    let (g, b, s) = setup(1024);
    let l = s.lambda1;
    let w1 = shoot_w(&g, &b, &s, &ShootConfig::new(1.0, 3, l)).unwrap();
    assert!(!w1.backward_blowup());
    // fit window: from e^{-λ₁t} = 0.1 out to t_far
    let t_lo = time_at_level(1.0, l, 0.1);
    let mut n = 0;
    for d in w1.deviations.iter().filter(|d| d.t >= t_lo && d.t <= w1.t_far) {
        assert!(d.dev_k <= (-3.5 * l * d.t).exp(), "t = {}: {:e}", d.t, d.dev_k);
        assert!(d.dev_linear <= (-1.5 * l * d.t).exp(), "t = {}: {:e}", d.t, d.dev_linear);
        assert!(d.hn_gap > 0.0);
        n += 1;
    }
    assert!(n > 20);

    // start 10 earlier than the level-matched time: the data then differ from the unit
    // shot's while the snapshot grids stay aligned under the shift
    let mut cfg2 = ShootConfig::new(2.0, 3, l);
    cfg2.t_far -= 10.0;
    let w2 = shoot_w(&g, &b, &s, &cfg2).unwrap();
    let m = translation_mismatch(&g, &b, &w2, &w1).unwrap();
    assert!(m <= 1e-3, "mismatch {m:e}");

    // same trajectory from an earlier t_far (snapshots stay aligned) and a higher order
    let mut cfg = ShootConfig::new(1.0, 4, l);
    cfg.t_far = w1.t_far - 10.0;
    let w1b = shoot_w(&g, &b, &s, &cfg).unwrap();
    let (t0, a) = w1.snapshot_near(t_lo).unwrap();
    let (t1, bb) = w1b.snapshot_near(*t0).unwrap();
    assert!((t0 - t1).abs() < 1e-6);
    let r = g.h1dot_norm(&a.sub(bb)) / g.h1dot_norm(&a.sub(&b.t_q));
    assert!(r <= 1e-3, "{r:e}");
}

#[test]
fn threshold_solutions_have_threshold_energy() {
    let (g, b, s) = setup(1024);
    let eq = energy(&g, &b.q_vec);
    let hq = hamiltonian_sys(&g, &b.q_vec, System::Original);
    let mut data = vec![];
    for sign in [GSign::Minus, GSign::Plus] {
        let th = construct_g(&g, &b, &s, sign, &GConfig::default()).unwrap();
        assert!(th.energy_gap.abs() <= 1e-3, "{sign:?}: {:e}", th.energy_gap);
        assert!((energy(&g, &th.data) - eq).abs() <= 1e-3 * eq.abs());
        match sign {
            GSign::Minus => assert!(th.h_gap < 0.0),
            GSign::Plus => assert!(th.h_gap > 0.0),
        }
        assert!((hamiltonian_sys(&g, &th.data, System::Original) - hq - th.h_gap).abs() < 1e-9 * hq);
        let rate = th.delta_rate.unwrap();
        assert!((rate - 1.0).abs() <= 0.15, "{sign:?}: rate {rate}");
        data.push(th);
    }
    // stability of 𝒢⁺(0) under a higher order and a farther start
    // (t_far moves by exactly 10, keeping the snapshot grid)
    let cfg = GConfig { k: 4, far_level: 1e-3 * (-10.0 * s.lambda1).exp(), ..Default::default() };
    let alt = construct_g(&g, &b, &s, GSign::Plus, &cfg).unwrap();
    assert!((alt.t0 - data[1].t0).abs() < 1e-6);
    let r = g.h1dot_norm(&alt.data.sub(&data[1].data)) / g.h1dot_norm(&data[1].data.sub(&b.q_vec));
    assert!(r <= 1e-3, "{r:e}");
}

#[test]
fn threshold_backward_legs() {
    let (g, b, s) = setup(1024);
    let sponge = Some(Sponge { start: 150.0, strength: 1.0 });
    let plus = construct_g(&g, &b, &s, GSign::Plus, &GConfig::default()).unwrap();
    let rec = threshold_backward(&g, &b, &plus, 60.0, 1e-2, sponge).unwrap();
    assert_eq!(detect(&rec, &DetectOptions::default(), None), Classification::Blowup);
    let minus = construct_g(&g, &b, &s, GSign::Minus, &GConfig::default()).unwrap();
    let rec = threshold_backward(&g, &b, &minus, 60.0, 1e-2, sponge).unwrap();
    assert!(rec.times().last().unwrap() + 60.0 < 1e-6);
    assert_eq!(detect(&rec, &DetectOptions::default(), None), Classification::GlobalDecaying);
}
