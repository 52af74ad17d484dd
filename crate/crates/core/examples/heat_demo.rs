//! Full heat demo with `a_γ` coefficients: solve, isolate the ergodic
//! remainder and print its weighted means.
use wpap::heat::{run_demo, HeatDemoConfig};

fn main() -> wpap::Result<()> {
    let cfg = HeatDemoConfig::default();
    let out = run_demo(&cfg)?;
    println!("δ = {:.4}, N = {:.4}", out.dichotomy_delta, out.dichotomy_n);
    println!("contraction constant {:.4e}", out.contraction);
    println!(
        "converged in {} iterations, observed ratio {:?}",
        out.report.iterates, out.report.observed_ratio
    );
    for (t, (w, u)) in out.remainder_weighted.horizons.iter().zip(out.remainder_weighted.values.iter().zip(&out.remainder_unit.values)) {
        println!("T = {t:>5}: weighted {w:.4e}  unit {u:.4e}");
    }
    println!("ratios {:?}", out.remainder_ratios);
    Ok(())
}
