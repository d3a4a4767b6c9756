//! Evaluates the physics-informed loss on a hand-built state. Plane
//! Poiseuille flow is an exact steady solution, so its momentum residual
//! vanishes everywhere; adding noise to the coefficients shows how each loss
//! term reacts.
//!
//! `cargo run --example residuals`

use hermite_pde::domain::{Boundary, DomainSpec, Physics};
use hermite_pde::field::{CoefficientState, FieldLayout, FieldName};
use hermite_pde::residual::{flow_loss, momentum_residual_at, LossWeights, SamplePlan};
use hermite_pde::spline::kernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W: usize = 32;
const H: usize = 18;

fn main() -> hermite_pde::Result<()> {
    let (rho, mu, u_max) = (1.0, 0.2, 1.0);
    let (y_lo, y_hi) = (0.5, H as f64 - 1.5);
    let span = y_hi - y_lo;

    let mut domain = DomainSpec::closed(W, H, Physics::Flow { rho, mu, force: [0.0; 2] });
    let inflow = domain.add_boundary(Boundary::Parabolic { y_lo, y_hi, u_max });
    for y in 1..H - 1 {
        domain.set_solid(0, y, inflow);
        domain.set_solid(W - 1, y, inflow);
    }

    // v_x = 4 u s (S - s) / S^2 with s = y - y_lo; a_z integrates it in y
    let k = 4.0 * u_max / (span * span);
    let a = |y: f64| {
        let s = y - y_lo;
        [k * (span * s * s / 2.0 - s * s * s / 3.0), k * s * (span - s), k * (span - 2.0 * s)]
    };
    let grad_p = -2.0 * mu * k;

    let layout = FieldLayout::default_flow();
    let az = *layout.field(FieldName::Az)?;
    let p = *layout.field(FieldName::P)?;
    let (sa, sp) = (kernel(az.order)?, kernel(p.order)?);
    let plane = W * H;
    let mut c = vec![0.0; layout.channels() * plane];
    for y in 0..H {
        for x in 0..W {
            let i = y * W + x;
            for (j, d) in a(y as f64).into_iter().enumerate() {
                c[az.channel(0, j) * plane + i] = d / sa.scale(j);
            }
            c[p.channel(0, 0) * plane + i] = grad_p * x as f64;
            c[p.channel(1, 0) * plane + i] = grad_p / sp.scale(1);
        }
    }

    let frame = domain.frame(1.0);
    let plan = SamplePlan::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let exact = CoefficientState::at_rest(layout.clone(), W, H, 1.0, 1.0, c.clone())?;
    for point in [[5.3, 4.1, 0.5], [17.8, 9.6, 0.2], [26.1, 14.9, 0.9]] {
        let r = momentum_residual_at(&exact, &frame, point)?;
        println!("residual at {point:?}: [{:.2e}, {:.2e}]", r[0], r[1]);
    }
    let report = flow_loss(&exact, &frame, &plan, &LossWeights::FLOW, &mut rng)?;
    println!("exact:     L_p {:.3e}  L_b {:.3e}  L_tot {:.3e}", report.l_p, report.l_b, report.l_tot);

    for amp in [1e-3, 1e-2, 1e-1] {
        let noisy: Vec<f64> = c.iter().map(|v| v + rng.gen_range(-amp..amp)).collect();
        let state = CoefficientState::at_rest(layout.clone(), W, H, 1.0, 1.0, noisy)?;
        let report = flow_loss(&state, &frame, &plan, &LossWeights::FLOW, &mut rng)?;
        println!("noise {amp:.0e}: L_p {:.3e}  L_b {:.3e}  L_tot {:.3e}", report.l_p, report.l_b, report.l_tot);
    }
    Ok(())
}
