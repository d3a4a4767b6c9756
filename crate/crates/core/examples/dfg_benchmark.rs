//! Rolls a flow checkpoint out on the cylinder benchmark channel and reports
//! drag and lift coefficients after the warm-up transient.
//!
//! `cargo run --release --example dfg_benchmark -- <checkpoint> [re] [steps] [out.csv]`

use std::path::Path;

use hermite_pde::benchmark::run_dfg;
use hermite_pde::model::Checkpoint;

fn main() -> hermite_pde::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(ckpt) = args.first() else {
        eprintln!("usage: dfg_benchmark <checkpoint> [re] [steps] [out.csv]");
        std::process::exit(2);
    };
    let re: u32 = args.get(1).map_or(Ok(20), |s| s.parse()).expect("re must be 2, 20 or 100");
    let steps: usize = args.get(2).map_or(Ok(300), |s| s.parse()).expect("steps must be an integer");
    let model = Checkpoint::load(Path::new(ckpt))?.model;

    let report = run_dfg(&model, re, steps, 50, 0)?;
    let s = &report.setup;
    println!("Re {} (rho {}, mu {}, mean inflow {}, D {})", s.re, s.rho, s.mu, s.u_mean, s.diameter);
    for (name, m) in [("C_D", report.c_d()), ("C_L", report.c_l()), ("F_D", report.f_d()), ("F_L", report.f_l())] {
        println!("{name} min/avg/max: {:.4}/{:.4}/{:.4}", m.min, m.avg, m.max);
    }
    let leak = report.leak.iter().sum::<f64>() / report.leak.len() as f64;
    println!("mean wall leak |v . n|: {leak:.3e}");
    if let Some(out) = args.get(3) {
        report.write_csv(&mut std::fs::File::create(out)?)?;
        println!("time series written to {out}");
    }
    Ok(())
}
