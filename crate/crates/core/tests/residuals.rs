mod common;

use hermite_pde::domain::{Boundary, DomainSpec, Physics};
use hermite_pde::field::{CoefficientState, FieldLayout, FieldName};
use hermite_pde::residual::{flow_loss, momentum_residual_at, wave_loss, wave_residuals_at, LossWeights, SamplePlan};
use hermite_pde::spline::kernel;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const W: usize = 24;
const H: usize = 14;

/// Plane Poiseuille flow between the walls at `y = 0.5` and `y = H - 1.5`
/// with matching parabolic in/outflow columns. Exact for the kernels, since
/// `a_z` is cubic in `y` and `p` linear in `x`.
fn poiseuille(rho: f64, mu: f64, u_max: f64) -> (DomainSpec, CoefficientState) {
    let (y_lo, y_hi) = (0.5, H as f64 - 1.5);
    let span = y_hi - y_lo;
    let mut d = DomainSpec::closed(W, H, Physics::Flow { rho, mu, force: [0.0; 2] });
    let b = d.add_boundary(Boundary::Parabolic { y_lo, y_hi, u_max });
    for y in 1..H - 1 {
        d.set_solid(0, y, b);
        d.set_solid(W - 1, y, b);
    }
    let k = 4.0 * u_max / (span * span);
    let layout = FieldLayout::default_flow();
    let az = *layout.field(FieldName::Az).unwrap();
    let p = *layout.field(FieldName::P).unwrap();
    let (ka, kp) = (kernel(az.order).unwrap(), kernel(p.order).unwrap());
    let g = -2.0 * mu * k;
    let plane = W * H;
    let mut c = vec![0.0; layout.channels() * plane];
    for y in 0..H {
        let s = y as f64 - y_lo;
        let a = [k * (span * s * s / 2.0 - s * s * s / 3.0), k * s * (span - s), k * (span - 2.0 * s)];
        for x in 0..W {
            let i = y * W + x;
            for (j, v) in a.iter().enumerate() {
                c[az.channel(0, j) * plane + i] = v / ka.scale(j);
            }
            c[p.channel(0, 0) * plane + i] = g * x as f64;
            c[p.channel(1, 0) * plane + i] = g / kp.scale(1);
        }
    }
    (d, CoefficientState::at_rest(layout, W, H, 1.0, 1.0, c).unwrap())
}

#[test]
fn poiseuille_flow_has_zero_loss() {
    let (d, s) = poiseuille(1.3, 0.25, 0.8);
    let frame = d.frame(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = flow_loss(&s, &frame, &SamplePlan::default(), &LossWeights::FLOW, &mut rng).unwrap();
    assert!(r.l_p < 1e-20 && r.l_b < 1e-20, "{r:?}");
    assert!(r.interior_samples > 0 && r.boundary_samples > 0);
}

#[test]
fn poiseuille_with_wrong_pressure_gradient_has_constant_residual() {
    let (d, mut s) = poiseuille(1.0, 0.25, 0.8);
    let layout = s.layout().clone();
    let p = *layout.field(FieldName::P).unwrap();
    let plane = W * H;
    // add dp/dx = 0.1 on both slices
    for k in 0..2 {
        let slice = s.slice_mut(k);
        for i in 0..plane {
            slice[p.channel(0, 0) * plane + i] += 0.1 * (i % W) as f64;
            slice[p.channel(1, 0) * plane + i] += 0.1 / kernel(p.order).unwrap().scale(1);
        }
    }
    let frame = d.frame(1.0);
    for point in [[3.4, 5.2, 0.1], [12.7, 2.3, 0.6], [20.2, 11.1, 0.95]] {
        let r = momentum_residual_at(&s, &frame, point).unwrap();
        assert!((r[0] - 0.1).abs() < 1e-12 && r[1].abs() < 1e-12, "{r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wave_residuals_match_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_state(&mut rng, FieldLayout::default_wave(), 9, 8, 1.0);
        let frame = DomainSpec::closed(9, 8, Physics::Wave { k: 10.0, delta: 0.1 }).frame(1.0);
        let p = common::junction_free_point(&mut rng, 9, 8, 0.05);
        let (a, b) = wave_residuals_at(&s, &frame, p).unwrap();
        let (c, d) = common::fd_wave(&s, p, 10.0, 0.1, 2.5e-4);
        prop_assert!(common::rel_err(&[a, b], &[c, d]) < 1e-4);
    }

    #[test]
    fn wave_loss_is_nonnegative_and_weighted(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_state(&mut rng, FieldLayout::default_wave(), 9, 8, 0.3);
        let frame = DomainSpec::closed(9, 8, Physics::Wave { k: 10.0, delta: 0.1 }).frame(1.0);
        let r = wave_loss(&s, &frame, &SamplePlan::default(), &LossWeights::WAVE, &mut rng).unwrap();
        prop_assert!(r.l_z >= 0.0 && r.l_v >= 0.0 && r.l_b >= 0.0);
        let want = 0.1 * r.l_z + r.l_v + 10.0 * r.l_b;
        prop_assert!((r.l_tot - want).abs() <= 1e-12 * want.max(1.0));
    }
}
