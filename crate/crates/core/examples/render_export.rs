//! Builds a smooth flow state from its coefficients, renders velocity
//! magnitude and pressure at 4x resolution and writes them as a `.snf`
//! raster next to the state file.
//!
//! `cargo run --example render_export -- [out_dir]`

use std::path::PathBuf;

use hermite_pde::field::{render, CoefficientState, FieldLayout, FieldName, RenderField};
use hermite_pde::io::{export_fields, save_state, Snf};

fn main() -> hermite_pde::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render_out".into()));
    std::fs::create_dir_all(&out)?;

    // a single vortex: a_z is a Gaussian bump, p a shallow bowl
    let (w, h) = (32, 24);
    let layout = FieldLayout::default_flow();
    let plane = w * h;
    let mut c = vec![0.0; layout.channels() * plane];
    let az = layout.field(FieldName::Az)?.channel(0, 0);
    let p = layout.field(FieldName::P)?.channel(0, 0);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - 16.0, y as f64 - 12.0);
            let r2 = dx * dx + dy * dy;
            c[az * plane + y * w + x] = 8.0 * (-r2 / 30.0).exp();
            c[p * plane + y * w + x] = 0.01 * r2;
        }
    }
    let state = CoefficientState::at_rest(layout, w, h, 0.0, 1.0, c)?;
    save_state(&state, &out.join("vortex.hpst"))?;

    let vmag = render(&state, RenderField::VMag, 4, 1.0)?;
    let peak = vmag.data.iter().cloned().fold(0.0, f64::max);
    println!("v_mag raster {}x{}, peak speed {peak:.4}", vmag.width, vmag.height);

    let snf: Snf = export_fields(&state, &[RenderField::VMag, RenderField::P], 4)?;
    snf.save(&out.join("vortex.snf"))?;
    println!("wrote {} channels to {}", snf.channels, out.join("vortex.snf").display());
    Ok(())
}
