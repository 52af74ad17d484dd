//! `F(t, z) = sin t + ½ sin z` composed with `h = cos t + sech t`.
use wpap::ap::APSignal;
use wpap::pap::{compose_and_test, geometric_schedule, Pap0Config, SampledPath, SplitForcing, WpapDecomposition};
use wpap::weights::Weight;

fn main() -> wpap::Result<()> {
    let ap = |t: f64, z: &[f64], out: &mut [f64]| out[0] = t.sin() + 0.5 * z[0].sin();
    let lip = |_: f64| 0.5;
    let forcing = SplitForcing {
        out_dim: 1,
        ap_part: &ap,
        ergodic_part: None,
        lipschitz: Some(&lip),
    };
    let h = WpapDecomposition {
        ap_part: APSignal::cos(1.0, 1.0),
        ergodic_part: SampledPath::from_scalar_fn(-200.0, 200.0, 0.05, |t| 1.0 / t.cosh())?,
        weight: Weight::polynomial(2),
    };
    let r = compose_and_test(&forcing, &h, &geometric_schedule(10.0, 2.0, 5), &Pap0Config::default())?;
    println!(
        "remainder in PAP₀ = {}, sup L_F = {}, bound excess = {:.2e}",
        r.deviation.decays_to_zero, r.lipschitz_sup, r.remainder_bound_excess
    );
    Ok(())
}
