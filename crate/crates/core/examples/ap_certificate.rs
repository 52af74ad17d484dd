//! Certify `sin t + sin(√2 t)` as almost periodic and recover a Bohr
//! coefficient.
use wpap::ap::{bohr_coefficient, find_window_length, APSignal};
use wpap::quad::Composite;

fn main() -> wpap::Result<()> {
    let s = APSignal::sin(1.0, 1.0).add(&APSignal::sin(2f64.sqrt(), 1.0));
    let cert = find_window_length(&s, 0.2, 20.0, 2000.0, 5, (-50.0, 50.0))?;
    println!("ε = {}, l = {}: passed = {}", cert.epsilon, cert.window_length, cert.passed);
    for (k, tau) in cert.found_taus().iter().enumerate() {
        println!("window {k}: τ = {tau:?}");
    }
    let c = bohr_coefficient(&s, 1.0, 2000.0, &Composite::default())?;
    println!("coefficient at λ = 1: {:.6}", c[0]);
    Ok(())
}
