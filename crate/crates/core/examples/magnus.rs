//! Spinning cylinder in a uniform stream. The rim carries the rotation as a
//! Dirichlet velocity, so a trained model develops a lift force whose sign
//! follows the spin direction.
//!
//! `cargo run --release --example magnus -- <checkpoint> [omega] [steps]`

use std::path::Path;

use hermite_pde::benchmark::{surface_forces, Circle};
use hermite_pde::domain::{Boundary, DomainSpec, Physics};
use hermite_pde::field::CoefficientState;
use hermite_pde::model::Checkpoint;

fn main() -> hermite_pde::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(ckpt) = args.first() else {
        eprintln!("usage: magnus <checkpoint> [omega] [steps]");
        std::process::exit(2);
    };
    let omega: f64 = args.get(1).map_or(Ok(0.2), |s| s.parse()).expect("omega must be a number");
    let steps: usize = args.get(2).map_or(Ok(200), |s| s.parse()).expect("steps must be an integer");
    let model = Checkpoint::load(Path::new(ckpt))?.model;

    let (w, h) = (128, 64);
    let (rho, mu) = (1.0, 0.1);
    let mut domain = DomainSpec::closed(w, h, Physics::Flow { rho, mu, force: [0.0; 2] });
    let stream = domain.add_boundary(Boundary::Velocity { vx: 0.5, vy: 0.0 });
    for y in 1..h - 1 {
        domain.set_solid(0, y, stream);
        domain.set_solid(w - 1, y, stream);
    }
    let circle = Circle { center: [40.0, 32.0], radius: 6.0 };
    let rim = domain.add_boundary(Boundary::Rotation { cx: 40.0, cy: 32.0, omega });
    domain.paint_disk(40.0, 32.0, 6.0, rim);

    let n = model.layout().channels() * w * h;
    let mut state = CoefficientState::at_rest(model.layout().clone(), w, h, 0.0, domain.dt, vec![0.0; n])?;
    for step in 1..=steps {
        state = model.step(&domain, &state)?;
        if step % 20 == 0 {
            // the force circle sits half a cell outside the painted disk
            let probe = Circle { radius: circle.radius + 0.5, ..circle };
            let f = surface_forces(&state, probe, mu, 256, state.t1())?.total();
            println!("step {step:>4}: drag {:+.4e}  lift {:+.4e}", f[0], f[1]);
        }
    }
    Ok(())
}
