//! Mild solution of `u' = −u + sin t + 0.05u` by Picard iteration.
use wpap::evolution::{dichotomy, DichotomyGrid, EvolutionFamily, Exponents, FitGrid, LinearFamily, Mat, StepperConfig};
use wpap::mild::{solve, Forcing, MildProblem, OperatorFamily, SolverConfig};
use wpap::weights::Weight;

fn main() -> wpap::Result<()> {
    let ef = EvolutionFamily::new(LinearFamily::constant(Mat::from_element(1, 1, -1.0))?, StepperConfig::default());
    let dd = dichotomy(&ef, &DichotomyGrid::default())?;
    let p = MildProblem::new(
        ef,
        dd,
        OperatorFamily::identity(1),
        OperatorFamily::identity(1),
        Forcing::zero(1),
        Forcing::affine("sin t + 0.05u", 1, 0.05, |t, o| o[0] = t.sin()),
        Weight::unit(),
        Exponents::new(0.0, 0.6, 0.8)?,
    )?;
    let sol = solve(&p, &SolverConfig::default(), &FitGrid::standard(&Mat::from_element(1, 1, -1.0), 0, 1))?;
    let r = &sol.report;
    println!("a priori constant {:.4}, observed ratio {:?}", r.contraction_estimate, r.observed_ratio);
    let res: Vec<String> = r.sup_alpha_residuals.iter().map(|v| format!("{v:.2e}")).collect();
    println!("{} iterations, residuals [{}]", r.iterates, res.join(", "));
    let z = num_complex::Complex64::new(0.95, 1.0);
    let w = sol.windowed()?;
    let err = (0..w.len())
        .map(|i| (w.value(i)[0] - (num_complex::Complex64::new(0.0, w.time(i)).exp() / z).im).abs())
        .fold(0.0, f64::max);
    println!("sup error against the periodic solution: {err:.2e}");
    Ok(())
}
