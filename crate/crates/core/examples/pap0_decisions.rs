//! Weighted ergodic means of a decaying pulse and of `sin t`.
use wpap::ap::scalar_fn;
use wpap::pap::{geometric_schedule, is_pap0, ClosedForm, Pap0Config};
use wpap::weights::Weight;

fn main() -> wpap::Result<()> {
    let horizons = geometric_schedule(10.0, 2.0, 5);
    let cfg = Pap0Config::default();
    let pulse = scalar_fn(None, |t| (-t.abs()).exp());
    let sine = scalar_fn(None, f64::sin);
    for (name, s) in [("e^{-|t|}", &pulse as &dyn wpap::ap::Signal), ("sin t", &sine)] {
        for m in [0, 2] {
            let d = is_pap0(&ClosedForm(s), &Weight::polynomial(m), &horizons, &cfg)?;
            let means: Vec<String> = d.values.iter().map(|v| format!("{v:.3e}")).collect();
            println!("{name:<9} (1+t²)^{m}: in PAP₀ = {:<5} means [{}]", d.decays_to_zero, means.join(", "));
        }
    }
    Ok(())
}
