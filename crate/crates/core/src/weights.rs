//! Admissible weights, their ergodic masses `m(T, ρ) = ∫_{-T}^{T} ρ`, and the
//! finite-horizon classification and equivalence decisions built on them.
//!
//! Limits at infinity are estimated on the late window `[T_max/2, T_max]` of
//! the largest horizon supplied. A limsup/liminf estimate is considered finite
//! when it stays below [`FINITENESS_CAP`].

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quad::Composite;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Estimates above this value are treated as infinite.
pub const FINITENESS_CAP: f64 = 1e6;

/// Weight values below this are rejected as non-positive.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

/// A positive, locally integrable density on the real line.
#[derive(Clone)]
pub enum Weight {
    Constant(f64),
    /// `ρ_m(t) = (1 + t²)^m`.
    Polynomial(u32),
    /// Closed form given as an expression in `t`.
    Expression(Expr),
    /// Closed form given as a Rust closure.
    Function {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
    /// Samples joined by linear interpolation, held constant outside the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Weight {
    pub fn unit() -> Self {
        Weight::Constant(1.0)
    }

    pub fn polynomial(m: u32) -> Self {
        Weight::Polynomial(m)
    }

    pub fn expression(src: &str) -> Result<Self> {
        Ok(Weight::Expression(Expr::parse(src, &["t"])?))
    }

    pub fn from_fn(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Weight::Function {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// Tabulated weight; times must be strictly increasing and values positive.
    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        const OP: &str = "Weight::tabulated";
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::pre(OP, "need at least two (time, value) samples of equal length"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::pre(OP, "times must be strictly increasing"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::pre(OP, format!("sample value {v} is not positive and finite")));
        }
        Ok(Weight::Tabulated { times, values })
    }

    /// Tabulate a closure on a uniform grid over `[a, b]`.
    pub fn tabulate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Result<Self> {
        let times: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::tabulated(times, values)
    }

    pub fn label(&self) -> String {
        match self {
            Weight::Constant(c) => format!("const({c})"),
            Weight::Polynomial(m) => format!("(1+t^2)^{m}"),
            Weight::Expression(e) => e.source().to_string(),
            Weight::Function { name, .. } => name.clone(),
            Weight::Tabulated { times, .. } => format!("tabulated[{} samples]", times.len()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::Polynomial(m) => (1.0 + t * t).powi(*m as i32),
            Weight::Expression(e) => e.eval(&[t]),
            Weight::Function { f, .. } => f(t),
            Weight::Tabulated { times, values } => interpolate(times, values, t),
        }
    }

    /// Evaluate and reject non-positive or non-finite values.
    pub fn eval_checked(&self, op: &'static str, t: f64) -> Result<f64> {
        let v = self.eval(t);
        if v.is_finite() && v > POSITIVITY_FLOOR {
            Ok(v)
        } else {
            Err(Error::pre(op, format!("weight {} evaluates to {v} at t = {t}", self.label())))
        }
    }

    /// True when `ρ(-t) = ρ(t)` is known structurally.
    pub fn is_even(&self) -> bool {
        matches!(self, Weight::Constant(_) | Weight::Polynomial(_))
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let k = times.partition_point(|&x| x <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k] * (1.0 - w) + values[k + 1] * w
}

/// `m(T, ρ)` with an error estimate.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct ErgodicMass {
    pub horizon: f64,
    pub value: f64,
    pub quadrature_error_bound: f64,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `∫_{-T}^{T} ρ(t) dt`. Exact for constant, polynomial and tabulated weights;
/// composite Gauss–Legendre otherwise, with every node checked for positivity.
pub fn ergodic_mass(w: &Weight, horizon: f64, quad: &Composite) -> Result<ErgodicMass> {
    const OP: &str = "weights::ergodic_mass";
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::pre(OP, format!("horizon T must be positive, got {horizon}")));
    }
    let t = horizon;
    let exact = |value: f64| ErgodicMass {
        horizon,
        value,
        quadrature_error_bound: 0.0,
    };
    match w {
        Weight::Constant(c) => {
            if !(*c > POSITIVITY_FLOOR && c.is_finite()) {
                return Err(Error::pre(OP, format!("constant weight {c} is not positive")));
            }
            Ok(exact(2.0 * c * t))
        }
        Weight::Polynomial(m) => {
            // (1+t²)^m = Σ C(m,k) t^{2k}, integrated term by term.
            let value = (0..=*m)
                .map(|k| 2.0 * binomial(*m, k) * t.powi(2 * k as i32 + 1) / (2 * k + 1) as f64)
                .sum();
            Ok(exact(value))
        }
        Weight::Tabulated { times, values } => {
            let mut knots = vec![-t];
            knots.extend(times.iter().copied().filter(|&x| x > -t && x < t));
            knots.push(t);
            let value = knots
                .windows(2)
                .map(|k| 0.5 * (k[1] - k[0]) * (interpolate(times, values, k[0]) + interpolate(times, values, k[1])))
                .sum();
            Ok(exact(value))
        }
        Weight::Expression(_) | Weight::Function { .. } => {
            let mut bad = None;
            let q = quad.integrate_with_error(-t, t, |x| {
                let v = w.eval(x);
                if bad.is_none() && !(v.is_finite() && v > POSITIVITY_FLOOR) {
                    bad = Some((x, v));
                }
                v
            });
            if let Some((x, v)) = bad {
                return Err(Error::pre(OP, format!("weight {} evaluates to {v} at node t = {x}", w.label())));
            }
            Ok(ErgodicMass {
                horizon,
                value: q.value,
                quadrature_error_bound: q.error_bound,
            })
        }
    }
}

/// Tuning for [`classify_weight`] and [`weights_equivalent`].
#[derive(Debug, Clone, Serialize)]
pub struct LimitConfig {
    /// Estimates at or above this are infinite.
    pub finiteness_cap: f64,
    /// Late-window infimum must exceed this for `liminf ρ > 0`.
    pub liminf_floor: f64,
    /// Minimal relative growth of `m(T, ρ)` between the last two horizons.
    pub growth_tol: f64,
    /// Sup ratio between the last two horizons allowed for a bounded weight.
    pub sup_stability: f64,
    pub window_samples: usize,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            finiteness_cap: FINITENESS_CAP,
            liminf_floor: 1e-3,
            growth_tol: 1e-3,
            sup_stability: 1.01,
            window_samples: 4001,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TauEvidence {
    pub tau: f64,
    /// Estimate of `limsup_{s→∞} ρ(s+τ)/ρ(s)`.
    pub weight_ratio_limsup: f64,
    /// Estimate of `limsup_{T→∞} m(T+τ,ρ)/m(T,ρ)`.
    pub mass_ratio_limsup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassEvidence {
    pub horizons: Vec<f64>,
    pub masses: Vec<f64>,
    pub late_window: (f64, f64),
    pub late_liminf: f64,
    /// Sup of ρ over `[-T, T]` for each horizon.
    pub sups: Vec<f64>,
    pub taus: Vec<TauEvidence>,
}

/// Membership of a weight in the unbounded-mass class, its bounded subclass,
/// and the translation-invariant class.
#[derive(Debug, Clone, Serialize)]
pub struct WeightClass {
    #[serde(rename = "in_U_infinity")]
    pub in_u_infinity: bool,
    #[serde(rename = "in_U_B")]
    pub in_u_b: bool,
    pub translation_invariant: bool,
    pub evidence: ClassEvidence,
}

fn late_window(horizons: &[f64], n: usize) -> Vec<f64> {
    let t_max = *horizons.last().unwrap();
    let lo = 0.5 * t_max;
    (0..n).map(|i| lo + (t_max - lo) * i as f64 / (n - 1) as f64).collect()
}

fn check_horizons(op: &'static str, horizons: &[f64], min: usize) -> Result<()> {
    if horizons.len() < min {
        return Err(Error::pre(op, format!("need at least {min} horizons, got {}", horizons.len())));
    }
    if horizons.iter().any(|h| !(*h > 0.0 && h.is_finite())) || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::pre(op, "horizons must be positive and strictly increasing"));
    }
    Ok(())
}

/// Decide class membership from finite-horizon evidence.
pub fn classify_weight(
    w: &Weight,
    horizons: &[f64],
    tau_probe: &[f64],
    quad: &Composite,
    cfg: &LimitConfig,
) -> Result<WeightClass> {
    const OP: &str = "weights::classify_weight";
    check_horizons(OP, horizons, 3)?;
    if let Some(tau) = tau_probe.iter().find(|t| !t.is_finite()) {
        return Err(Error::pre(OP, format!("probe shift {tau} is not finite")));
    }
    let masses: Vec<f64> = horizons
        .iter()
        .map(|&t| ergodic_mass(w, t, quad).map(|m| m.value))
        .collect::<Result<_>>()?;
    let n = masses.len();
    let growing = masses[n - 1] > masses[n - 2] * (1.0 + cfg.growth_tol);

    let window = late_window(horizons, cfg.window_samples);
    let mut late_liminf = f64::INFINITY;
    for &s in &window {
        late_liminf = late_liminf.min(w.eval_checked(OP, s)?);
    }
    let in_u_infinity = growing && late_liminf > cfg.liminf_floor;

    // Sup over [-T, T] sampled at step ≤ 0.25 (capped in count).
    let sups: Vec<f64> = horizons
        .iter()
        .map(|&t| {
            let k = ((2.0 * t / 0.25).ceil() as usize).clamp(64, 400_000);
            (0..=k)
                .map(|i| w.eval(-t + 2.0 * t * i as f64 / k as f64))
                .fold(0.0, f64::max)
        })
        .collect();
    let bounded = sups[n - 1] < cfg.finiteness_cap && sups[n - 1] <= sups[n - 2] * cfg.sup_stability;
    let in_u_b = in_u_infinity && bounded;

    let t_max = horizons[n - 1];
    let mass_probe: Vec<f64> = (0..16).map(|i| 0.5 * t_max + 0.5 * t_max * i as f64 / 15.0).collect();
    let mut taus = Vec::with_capacity(tau_probe.len());
    for &tau in tau_probe {
        let mut ratio = 0.0f64;
        for &s in &window {
            ratio = ratio.max(w.eval_checked(OP, s + tau)? / w.eval_checked(OP, s)?);
        }
        let mut mass_ratio = 0.0f64;
        for &t in &mass_probe {
            if t + tau > 0.0 {
                let num = ergodic_mass(w, t + tau, quad)?.value;
                let den = ergodic_mass(w, t, quad)?.value;
                mass_ratio = mass_ratio.max(num / den);
            }
        }
        taus.push(TauEvidence {
            tau,
            weight_ratio_limsup: ratio,
            mass_ratio_limsup: mass_ratio,
        });
    }
    let translation_invariant = taus
        .iter()
        .all(|e| e.weight_ratio_limsup < cfg.finiteness_cap && e.mass_ratio_limsup < cfg.finiteness_cap);

    Ok(WeightClass {
        in_u_infinity,
        in_u_b,
        translation_invariant,
        evidence: ClassEvidence {
            horizons: horizons.to_vec(),
            masses,
            late_window: (0.5 * t_max, t_max),
            late_liminf,
            sups,
            taus,
        },
    })
}

/// Outcome of the weight-equivalence test.
///
/// The verdict requires all four late-window estimates to be finite, i.e.
/// `0 < liminf ρ₁/ρ₂ ≤ limsup ρ₁/ρ₂ < ∞`, which makes the relation symmetric.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceVerdict {
    pub liminf_ratio_12: f64,
    pub limsup_ratio_21: f64,
    pub liminf_ratio_21: f64,
    pub limsup_ratio_12: f64,
    /// Sup of `ρ₁/ρ₂` on `[T/2, T]` over its sup on `[T/4, T/2]`.
    pub growth_12: f64,
    /// Same for `ρ₂/ρ₁`.
    pub growth_21: f64,
    pub equivalent: bool,
    pub horizons_used: Vec<f64>,
}

/// Two-sided bound `K'ρ₂ ≤ ρ₁ ≤ Kρ₂` for large `t`, read from finite windows:
/// both ratios stay below the finiteness cap on `[T/2, T]` and their sups do
/// not grow by more than `sup_stability` from `[T/4, T/2]` to `[T/2, T]`.
pub fn weights_equivalent(
    w1: &Weight,
    w2: &Weight,
    horizons: &[f64],
    cfg: &LimitConfig,
) -> Result<EquivalenceVerdict> {
    const OP: &str = "weights::weights_equivalent";
    check_horizons(OP, horizons, 1)?;
    let t_max = *horizons.last().expect("checked");
    let bounds = |lo: f64, hi: f64| -> Result<[f64; 4]> {
        let (mut lo12, mut hi12, mut lo21, mut hi21) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
        let n = cfg.window_samples;
        for i in 0..n {
            let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let a = w1.eval_checked(OP, s)?;
            let b = w2.eval_checked(OP, s)?;
            lo12 = lo12.min(a / b);
            hi12 = hi12.max(a / b);
            lo21 = lo21.min(b / a);
            hi21 = hi21.max(b / a);
        }
        Ok([lo12, hi12, lo21, hi21])
    };
    let [lo12, hi12, lo21, hi21] = bounds(0.5 * t_max, t_max)?;
    let [_, prev12, _, prev21] = bounds(0.25 * t_max, 0.5 * t_max)?;
    let (growth_12, growth_21) = (hi12 / prev12, hi21 / prev21);
    let cap = cfg.finiteness_cap;
    let equivalent = hi12 < cap && hi21 < cap && growth_12 <= cfg.sup_stability && growth_21 <= cfg.sup_stability;
    Ok(EquivalenceVerdict {
        liminf_ratio_12: lo12,
        limsup_ratio_21: hi21,
        liminf_ratio_21: lo21,
        limsup_ratio_12: hi12,
        growth_12,
        growth_21,
        equivalent,
        horizons_used: horizons.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> Composite {
        Composite::default()
    }

    #[test]
    fn constant_mass_is_two_t() {
        for t in [0.1, 1.0, 5.0, 123.25] {
            let m = ergodic_mass(&Weight::unit(), t, &quad()).unwrap();
            assert!((m.value - 2.0 * t).abs() <= 1e-12);
        }
        assert_eq!(ergodic_mass(&Weight::unit(), 5.0, &quad()).unwrap().value, 10.0);
    }

    #[test]
    fn polynomial_masses_match_term_by_term_antiderivative() {
        // ∫_{-3}^{3} (1+t²) = 2·3 + 2·27/3 = 24
        let m = ergodic_mass(&Weight::polynomial(1), 3.0, &quad()).unwrap();
        assert!((m.value - 24.0).abs() < 1e-12);
        // ∫_{-1}^{1} (1+t²)² = 2 + 4/3 + 2/5
        let m = ergodic_mass(&Weight::polynomial(2), 1.0, &quad()).unwrap();
        assert!((m.value - 56.0 / 15.0).abs() < 1e-12);
        // Same values through the quadrature route.
        let e = Weight::expression("(1+t^2)^2").unwrap();
        let q = ergodic_mass(&e, 1.0, &quad()).unwrap();
        assert!((q.value - 56.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn mass_errors() {
        assert!(ergodic_mass(&Weight::unit(), 0.0, &quad()).is_err());
        assert!(ergodic_mass(&Weight::unit(), -1.0, &quad()).is_err());
        let bad = Weight::expression("t").unwrap();
        assert!(ergodic_mass(&bad, 1.0, &quad()).is_err());
        assert!(Weight::tabulated(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_integrates_exactly() {
        let w = Weight::tabulated(vec![-1.0, 0.0, 1.0], vec![1.0, 3.0, 1.0]).unwrap();
        assert_eq!(w.eval(0.5), 2.0);
        assert_eq!(w.eval(7.0), 1.0);
        // [-1,1] tent of height 2 on a base of 1 → 2 + 2, plus 2·(T-1) of tails.
        let m = ergodic_mass(&w, 2.0, &quad()).unwrap();
        assert!((m.value - 6.0).abs() < 1e-14);
    }

    #[test]
    fn classify_constant_and_polynomial() {
        let h = [25.0, 50.0, 100.0, 200.0];
        let taus = [-3.0, 1.0, 10.0];
        let c = classify_weight(&Weight::unit(), &h, &taus, &quad(), &LimitConfig::default()).unwrap();
        assert!(c.in_u_infinity && c.in_u_b && c.translation_invariant);
        let c = classify_weight(&Weight::polynomial(2), &h, &taus, &quad(), &LimitConfig::default()).unwrap();
        assert!(c.in_u_infinity && !c.in_u_b && c.translation_invariant);
    }

    #[test]
    fn gaussian_weight_plateaus() {
        let w = Weight::tabulate(|t| (-t * t).exp(), -10.0, 10.0, 4001).unwrap();
        let c = classify_weight(&w, &[5.0, 10.0, 20.0, 40.0], &[1.0], &quad(), &LimitConfig::default()).unwrap();
        assert!(!c.in_u_infinity);
        assert!(!c.in_u_b);
        // Oracle: m(T, e^{-t²}) → √π.
        let last = *c.evidence.masses.last().unwrap();
        assert!((last - std::f64::consts::PI.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn superexponential_weight_is_not_translation_invariant() {
        let w = Weight::expression("exp(t^2/4)").unwrap();
        let c = classify_weight(&w, &[5.0, 10.0, 20.0], &[5.0], &quad(), &LimitConfig::default()).unwrap();
        assert!(!c.translation_invariant);
    }

    #[test]
    fn too_few_horizons() {
        assert!(classify_weight(&Weight::unit(), &[1.0, 2.0], &[], &quad(), &LimitConfig::default()).is_err());
    }

    #[test]
    fn equivalence_examples() {
        let h = [1e3, 1e4];
        let cfg = LimitConfig::default();
        assert!(weights_equivalent(&Weight::unit(), &Weight::unit(), &h, &cfg).unwrap().equivalent);
        let a = Weight::polynomial(1);
        let b = Weight::expression("2+t^2").unwrap();
        let v = weights_equivalent(&a, &b, &h, &cfg).unwrap();
        assert!(v.equivalent);
        assert!((v.limsup_ratio_21 - 1.0).abs() < 1e-4);
        assert!(!weights_equivalent(&Weight::unit(), &a, &h, &cfg).unwrap().equivalent);
        assert!(!weights_equivalent(&a, &Weight::unit(), &h, &cfg).unwrap().equivalent);
    }

    #[test]
    fn equivalence_rejects_vanishing_weight() {
        let w = Weight::expression("exp(-t^2)").unwrap();
        assert!(weights_equivalent(&Weight::unit(), &w, &[1e3], &LimitConfig::default()).is_err());
    }
}
