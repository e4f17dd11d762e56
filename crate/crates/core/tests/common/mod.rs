#![allow(dead_code, clippy::excessive_precision)]

use std::f64::consts::PI;

pub const PI3: f64 = PI * PI * PI;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b)];
    let mut total = 0.0;
    let mut evals = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        let (v, err) = gk15(&f, lo, hi);
        evals += 1;
        if err <= tol * (hi - lo) / (b - a) || hi - lo < 1e-10 * (b - a) || evals > 100_000 {
            total += v;
        } else {
            let m = 0.5 * (lo + hi);
            stack.push((lo, m));
            stack.push((m, hi));
        }
    }
    total
}

/// `∫_0^∞ f(r) dr` via `r = t/(1-t)`.
pub fn half_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
    adaptive(
        |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let r = t / (1.0 - t);
            f(r) / ((1.0 - t) * (1.0 - t))
        },
        0.0,
        1.0,
        tol,
    )
}

/// `∫_{ℝ⁶} f(|x|) dx = π³ ∫ f(r) r⁵ dr`, relative tolerance `rtol`.
pub fn radial6<F: Fn(f64) -> f64>(f: F, rtol: f64) -> f64 {
    let rough = half_line(|r| f(r) * r.powi(5), 1e-6);
    PI3 * half_line(|r| f(r) * r.powi(5), rtol * rough.abs().max(1e-300))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
