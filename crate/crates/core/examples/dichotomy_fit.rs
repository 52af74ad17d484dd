//! Dichotomy of `(3 + sin t + sin √2 t)·[−1]` and its fitted estimates.
use wpap::ap::APSignal;
use wpap::evolution::{
    cocycle_defect, dichotomy, fit_estimate, sample_triples, DichotomyGrid, EstimateTarget, EvolutionFamily, Exponents,
    FitGrid, LinearFamily, Mat, StepperConfig,
};

fn main() -> wpap::Result<()> {
    let d = APSignal::sin(1.0, 1.0).add(&APSignal::sin(2f64.sqrt(), 1.0));
    let fam = LinearFamily::modulated(Mat::from_element(1, 1, -1.0), d, 3.0)?;
    let ef = EvolutionFamily::new(fam, StepperConfig { step: 0.01, tol: 1e-10 });
    let dd = dichotomy(&ef, &DichotomyGrid::default())?;
    println!("δ = {:.4}, N = {:.4}", dd.delta, dd.n_const);
    println!("cocycle defect {:.2e}", cocycle_defect(&ef, &sample_triples(24, 10.0, 1))?);
    let exps = Exponents::new(0.0, 0.6, 0.8)?;
    let grid = FitGrid::standard(&ef.family.at(0.0), 2, 1);
    for t in EstimateTarget::ALL {
        let f = fit_estimate(&ef, &dd, t, &exps, &grid, 0.05)?;
        println!(
            "{:<6} prefactor {:?} rate {:?} required {:.3} ok {}",
            t.name(),
            f.prefactor,
            f.decay_rate,
            f.required_rate,
            f.rate_ok
        );
    }
    Ok(())
}
