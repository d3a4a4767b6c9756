//! A wave source moving across the domain. Rolls a wave checkpoint out and
//! prints the surface height ahead of and behind the source, where the
//! Doppler effect compresses and stretches the wavelength.
//!
//! `cargo run --release --example doppler -- <checkpoint> [speed] [steps] [out.snf]`

use std::path::Path;

use hermite_pde::domain::{Boundary, DomainSpec, MovingCell, Physics};
use hermite_pde::field::{sample_scalar, CoefficientState, FieldName, RenderField};
use hermite_pde::io::export_fields;
use hermite_pde::model::Checkpoint;

fn main() -> hermite_pde::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(ckpt) = args.first() else {
        eprintln!("usage: doppler <checkpoint> [speed] [steps] [out.snf]");
        std::process::exit(2);
    };
    let speed: f64 = args.get(1).map_or(Ok(0.2), |s| s.parse()).expect("speed must be a number");
    let steps: usize = args.get(2).map_or(Ok(120), |s| s.parse()).expect("steps must be an integer");
    let model = Checkpoint::load(Path::new(ckpt))?.model;

    let (w, h) = (96, 64);
    let mut domain = DomainSpec::closed(w, h, Physics::Wave { k: 10.0, delta: 0.1 });
    let source = domain.add_boundary(Boundary::Oscillator { amplitude: 1.0, omega: 0.8, phase: 0.0 });
    domain.movers.push(MovingCell { x: 20.0, y: 32.0, vx: speed, vy: 0.0, boundary: source });

    let n = model.layout().channels() * w * h;
    let mut state = CoefficientState::at_rest(model.layout().clone(), w, h, 0.0, domain.dt, vec![0.0; n])?;
    for _ in 0..steps {
        state = model.step(&domain, &state)?;
    }
    let t = state.t1();
    let x_src = 20.0 + speed * t;
    println!("source at x = {x_src:.1} after {steps} steps");
    for dx in [-12.0, -8.0, -4.0, 4.0, 8.0, 12.0] {
        let x = (x_src + dx).clamp(1.0, (w - 2) as f64);
        let z = sample_scalar(&state, FieldName::Z, [x, 32.0, t], (0, 0, 0))?;
        println!("z at source {dx:+5.1}: {z:+.4}");
    }
    if let Some(out) = args.get(3) {
        export_fields(&state, &[RenderField::Z, RenderField::Vz], 2)?.save(Path::new(out))?;
        println!("z and v_z written to {out}");
    }
    Ok(())
}
