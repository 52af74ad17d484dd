//! Classify the polynomial weights `(1+t²)^m` and a bounded weight, and test
//! their pairwise equivalence.
use wpap::quad::Composite;
use wpap::weights::{classify_weight, ergodic_mass, weights_equivalent, LimitConfig, Weight};

fn main() -> wpap::Result<()> {
    let horizons = [10.0, 20.0, 40.0, 80.0, 160.0];
    let quad = Composite::default();
    let limits = LimitConfig::default();
    let mut corpus: Vec<Weight> = (0..4).map(Weight::polynomial).collect();
    corpus.push(Weight::expression("2 + sin(t)")?);
    for w in &corpus {
        let c = classify_weight(w, &horizons, &[1.0, 5.0], &quad, &limits)?;
        let m = ergodic_mass(w, 3.0, &quad)?.value;
        println!(
            "{:<20} m(3) = {m:<12.6} U∞ {:<5} U_B {:<5} translation invariant {}",
            w.label(),
            c.in_u_infinity,
            c.in_u_b,
            c.translation_invariant
        );
    }
    for (i, a) in corpus.iter().enumerate() {
        for b in &corpus[i + 1..] {
            let v = weights_equivalent(a, b, &horizons, &limits)?;
            if v.equivalent {
                println!("{} ~ {}", a.label(), b.label());
            }
        }
    }
    Ok(())
}
