//! Convolution of a weighted ergodic path with `e^{-|t|}/2` stays ergodic;
//! convolution of `sin t` does not.
use wpap::pap::{convolve_and_test, geometric_schedule, Kernel, Pap0Config, SampledPath};
use wpap::weights::Weight;

fn main() -> wpap::Result<()> {
    let horizons = geometric_schedule(10.0, 2.0, 5);
    let kernel = Kernel::from_fn(|s| 0.5 * (-s.abs()).exp(), -30.0, 30.0, 0.02);
    let cfg = Pap0Config::default();
    let w = Weight::polynomial(1);
    for (name, f) in [("sech t", f64::cosh as fn(f64) -> f64), ("sin t", f64::sin)] {
        let path = if name == "sech t" {
            SampledPath::from_scalar_fn(-200.0, 200.0, 0.02, |t| 1.0 / f(t))?
        } else {
            SampledPath::from_scalar_fn(-200.0, 200.0, 0.02, f)?
        };
        let d = convolve_and_test(&path, &kernel, &w, &horizons, &cfg)?;
        println!("k * {name}: in PAP₀ = {}", d.decays_to_zero);
    }
    Ok(())
}
