//! Prints the Hermite kernel family: per-mode rescaling factors and a
//! sampled table of every mode and its derivatives on `[-1, 1]`.
//!
//! `cargo run --example kernels -- [order]`

use hermite_pde::spline::kernel;

fn main() -> hermite_pde::Result<()> {
    let order: usize = std::env::args().nth(1).map_or(Ok(2), |s| s.parse()).expect("order must be an integer");
    let k = kernel(order)?;
    println!("order {order}: {} modes, derivatives up to {}", k.modes(), k.max_derivative());
    for i in 0..k.modes() {
        println!("mode {i}: scale {:.6}", k.scale(i));
        println!("  right piece coefficients {:?}", k.piece(i, true));
    }
    println!();
    print!("{:>6}", "x");
    for i in 0..k.modes() {
        for d in 0..=k.max_derivative() {
            print!("{:>12}", format!("h{i}^({d})"));
        }
    }
    println!();
    for s in 0..=20 {
        let x = -1.0 + s as f64 / 10.0;
        print!("{x:>6.2}");
        for i in 0..k.modes() {
            for d in 0..=k.max_derivative() {
                print!("{:>12.5}", k.eval(i, x, d)?);
            }
        }
        println!();
    }
    Ok(())
}
