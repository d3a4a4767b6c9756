//! Independent oracles shared by the integration tests. Everything here
//! works from point values of the fields only.
#![allow(dead_code)]

use hermite_pde::field::{sample_scalar, CoefficientState, FieldLayout, FieldName};
use rand::Rng;

/// Random coefficients in `[-amp, amp]` for both slices.
pub fn random_state<R: Rng>(rng: &mut R, layout: FieldLayout, w: usize, h: usize, amp: f64) -> CoefficientState {
    let n = layout.channels() * w * h;
    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-amp..=amp)).collect();
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-amp..=amp)).collect();
    CoefficientState::from_slices(layout, w, h, 0.0, 1.0, a, b).unwrap()
}

/// A point at least `margin` away from every integer coordinate (the
/// kernel junctions) and strictly inside the slab.
pub fn junction_free_point<R: Rng>(rng: &mut R, w: usize, h: usize, margin: f64) -> [f64; 3] {
    let mut coord = |n: usize| rng.gen_range(1..n - 2) as f64 + rng.gen_range(margin..1.0 - margin);
    let x = coord(w);
    let y = coord(h);
    [x, y, rng.gen_range(0.2..0.8)]
}

const D1: [(i32, f64); 2] = [(-1, -0.5), (1, 0.5)];
const D2: [(i32, f64); 3] = [(-1, 1.0), (0, -2.0), (1, 1.0)];
const D3: [(i32, f64); 4] = [(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)];

fn stencil(n: usize) -> &'static [(i32, f64)] {
    match n {
        0 => &[(0, 1.0)],
        1 => &D1,
        2 => &D2,
        3 => &D3,
        _ => panic!("no stencil for order {n}"),
    }
}

/// Central finite-difference estimate of a mixed partial derivative of one
/// field, built from value samples only.
pub fn fd(state: &CoefficientState, field: FieldName, p: [f64; 3], order: (usize, usize, usize), h: f64) -> f64 {
    let mut acc = 0.0;
    for &(i, wi) in stencil(order.0) {
        for &(j, wj) in stencil(order.1) {
            for &(k, wk) in stencil(order.2) {
                let q = [p[0] + i as f64 * h, p[1] + j as f64 * h, p[2] + k as f64 * h];
                acc += wi * wj * wk * sample_scalar(state, field, q, (0, 0, 0)).unwrap();
            }
        }
    }
    acc / h.powi((order.0 + order.1 + order.2) as i32)
}

/// `rho (v_t + (v . grad) v) - mu lap v + grad p - f` with
/// `v = (d a/dy, -d a/dx)`, every derivative by finite differences.
pub fn fd_momentum(state: &CoefficientState, p: [f64; 3], rho: f64, mu: f64, f: [f64; 2], h: f64) -> [f64; 2] {
    let a = |o| fd(state, FieldName::Az, p, o, h);
    let v = [a((0, 1, 0)), -a((1, 0, 0))];
    let vt = [a((0, 1, 1)), -a((1, 0, 1))];
    // grad[i][j] = d v_i / d x_j
    let grad = [[a((1, 1, 0)), a((0, 2, 0))], [-a((2, 0, 0)), -a((1, 1, 0))]];
    let lap = [a((2, 1, 0)) + a((0, 3, 0)), -(a((3, 0, 0)) + a((1, 2, 0)))];
    let gp = [fd(state, FieldName::P, p, (1, 0, 0), h), fd(state, FieldName::P, p, (0, 1, 0), h)];
    let mut r = [0.0; 2];
    for i in 0..2 {
        let adv = v[0] * grad[i][0] + v[1] * grad[i][1];
        r[i] = rho * (vt[i] + adv) - mu * lap[i] + gp[i] - f[i];
    }
    r
}

/// `(z_t - v_z, v_t - k lap z + delta v_z)` by finite differences.
pub fn fd_wave(state: &CoefficientState, p: [f64; 3], k: f64, delta: f64, h: f64) -> (f64, f64) {
    let z = |o| fd(state, FieldName::Z, p, o, h);
    let v = |o| fd(state, FieldName::Vz, p, o, h);
    let vz = v((0, 0, 0));
    (z((0, 0, 1)) - vz, v((0, 0, 1)) - k * (z((2, 0, 0)) + z((0, 2, 0))) + delta * vz)
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}
