//! Almost periodic signals represented by finite trigonometric polynomials,
//! ε-translation-number certificates and Bohr means.

use crate::error::{Error, Result};
use crate::quad::Composite;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A vector-valued function of time that can be sampled.
pub trait Signal {
    fn dim(&self) -> usize;

    /// Write the value at `t` into `out` (length [`Signal::dim`]).
    fn eval_into(&self, t: f64, out: &mut [f64]);

    /// A global Lipschitz bound, when one is known.
    fn lipschitz_bound(&self) -> Option<f64>;

    /// Interval on which the signal is defined; `None` means all of ℝ.
    fn domain(&self) -> Option<(f64, f64)> {
        None
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.eval_into(t, &mut v);
        v
    }
}

/// A closure-backed signal with a user-supplied Lipschitz bound.
pub struct FnSignal<F> {
    dim: usize,
    f: F,
    lipschitz: Option<f64>,
}

impl<F: Fn(f64, &mut [f64])> FnSignal<F> {
    pub fn new(dim: usize, lipschitz: Option<f64>, f: F) -> Self {
        Self { dim, f, lipschitz }
    }
}

/// Scalar closure signal.
pub fn scalar_fn(lipschitz: Option<f64>, f: impl Fn(f64) -> f64) -> FnSignal<impl Fn(f64, &mut [f64])> {
    FnSignal::new(1, lipschitz, move |t, out: &mut [f64]| out[0] = f(t))
}

impl<F: Fn(f64, &mut [f64])> Signal for FnSignal<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        (self.f)(t, out)
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// One frequency of a trigonometric polynomial with a coefficient per
/// output component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApTerm {
    pub frequency: f64,
    pub coefficients: Vec<Complex64>,
}

/// `t ↦ Re Σ_k c_k e^{iλ_k t}` with distinct frequencies `λ_k`.
///
/// Coefficients are stored as complex numbers; a real signal keeps each
/// frequency paired with its conjugate at `-λ`, so the imaginary part of the
/// sum vanishes and [`APSignal::eval`] returns the real part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct APSignal {
    dim: usize,
    terms: Vec<ApTerm>,
}

impl APSignal {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: vec![] }
    }

    /// Terms are merged if they share a frequency exactly and sorted by
    /// frequency; every coefficient vector must have length `dim`.
    pub fn from_terms(dim: usize, terms: Vec<ApTerm>) -> Result<Self> {
        const OP: &str = "APSignal::from_terms";
        let mut s = Self::zero(dim);
        for term in terms {
            if term.coefficients.len() != dim {
                return Err(Error::pre(OP, format!("term at λ={} has {} components, expected {dim}", term.frequency, term.coefficients.len())));
            }
            if !term.frequency.is_finite() || term.coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::pre(OP, "frequencies and coefficients must be finite"));
            }
            s.push(term);
        }
        Ok(s)
    }

    /// Scalar signal from `(frequency, re, im)` triples.
    pub fn scalar(triples: &[(f64, f64, f64)]) -> Result<Self> {
        Self::from_terms(
            1,
            triples
                .iter()
                .map(|&(f, re, im)| ApTerm {
                    frequency: f,
                    coefficients: vec![Complex64::new(re, im)],
                })
                .collect(),
        )
    }

    /// Scalar real signal from a real-valued constant.
    pub fn constant(c: f64) -> Self {
        Self::constant_vec(&[c])
    }

    pub fn constant_vec(c: &[f64]) -> Self {
        let mut s = Self::zero(c.len());
        s.push(ApTerm {
            frequency: 0.0,
            coefficients: c.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        });
        s
    }

    /// `amp · sin(λ t)`.
    pub fn sin(freq: f64, amp: f64) -> Self {
        // sin x = (e^{ix} - e^{-ix}) / 2i
        Self::scalar(&[(freq, 0.0, -0.5 * amp), (-freq, 0.0, 0.5 * amp)]).expect("finite")
    }

    /// `amp · cos(λ t)`.
    pub fn cos(freq: f64, amp: f64) -> Self {
        Self::scalar(&[(freq, 0.5 * amp, 0.0), (-freq, 0.5 * amp, 0.0)]).expect("finite")
    }

    /// Scalar signal placed along the direction `v`.
    pub fn along(&self, v: &[f64]) -> Self {
        assert_eq!(self.dim, 1, "along() needs a scalar signal");
        let terms = self
            .terms
            .iter()
            .map(|t| ApTerm {
                frequency: t.frequency,
                coefficients: v.iter().map(|&x| t.coefficients[0] * x).collect(),
            })
            .collect();
        Self { dim: v.len(), terms }
    }

    fn push(&mut self, term: ApTerm) {
        match self
            .terms
            .binary_search_by(|t| t.frequency.total_cmp(&term.frequency))
        {
            Ok(i) => {
                for (a, b) in self.terms[i].coefficients.iter_mut().zip(&term.coefficients) {
                    *a += b;
                }
            }
            Err(i) => self.terms.insert(i, term),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[ApTerm] {
        &self.terms
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|t| t.frequency)
    }

    /// Stored coefficient at `λ` (zero when absent).
    pub fn coefficient(&self, freq: f64) -> Vec<Complex64> {
        self.terms
            .iter()
            .find(|t| t.frequency == freq)
            .map(|t| t.coefficients.clone())
            .unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); self.dim])
    }

    /// True when every term has its conjugate partner at `-λ`.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.terms.iter().all(|t| {
            let partner = self.coefficient(-t.frequency);
            t.coefficients
                .iter()
                .zip(&partner)
                .all(|(a, b)| (a - b.conj()).norm() <= tol)
        })
    }

    pub fn add(&self, other: &APSignal) -> APSignal {
        assert_eq!(self.dim, other.dim, "dimension mismatch in APSignal::add");
        let mut s = self.clone();
        for t in &other.terms {
            s.push(t.clone());
        }
        s
    }

    pub fn scale(&self, k: f64) -> APSignal {
        let mut s = self.clone();
        for t in &mut s.terms {
            for c in &mut t.coefficients {
                *c *= k;
            }
        }
        s
    }

    /// Complex value of the trigonometric sum.
    pub fn eval_complex(&self, t: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for term in &self.terms {
            let phase = Complex64::from_polar(1.0, term.frequency * t);
            for (o, c) in out.iter_mut().zip(&term.coefficients) {
                *o += c * phase;
            }
        }
        out
    }

    /// Scalar convenience: value of component 0.
    pub fn value(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            let (s, c) = (term.frequency * t).sin_cos();
            let z = term.coefficients[0];
            acc += z.re * c - z.im * s;
        }
        acc
    }

    /// `∫_s^t` of component 0, computed term by term.
    pub fn integral(&self, s: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            let z = term.coefficients[0];
            if term.frequency == 0.0 {
                acc += z.re * (t - s);
            } else {
                let l = term.frequency;
                // ∫ e^{iλr} dr = (e^{iλt} - e^{iλs}) / (iλ)
                let diff = Complex64::from_polar(1.0, l * t) - Complex64::from_polar(1.0, l * s);
                acc += (z * diff / Complex64::new(0.0, l)).re;
            }
        }
        acc
    }

    /// Sum of coefficient magnitudes; bounds the sup norm over ℝ.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| coeff_norm(&t.coefficients)).sum()
    }

    /// `Σ |λ_k|·|c_k|`, a Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.frequency.abs() * coeff_norm(&t.coefficients))
            .sum()
    }

    /// Convolution with an integrable kernel `ψ` supported on `support`:
    /// `(h∗ψ)(t) = ∫ ψ(s) h(t-s) ds`, whose coefficients are `c_k ψ̂(λ_k)`.
    pub fn convolve(&self, psi: impl Fn(f64) -> f64, support: (f64, f64), quad: &Composite) -> APSignal {
        let mut out = self.clone();
        for term in &mut out.terms {
            let l = term.frequency;
            let re = quad.integrate(support.0, support.1, |s| psi(s) * (l * s).cos());
            let im = -quad.integrate(support.0, support.1, |s| psi(s) * (l * s).sin());
            let hat = Complex64::new(re, im);
            for c in &mut term.coefficients {
                *c *= hat;
            }
        }
        out
    }
}

fn coeff_norm(c: &[Complex64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl Signal for APSignal {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for term in &self.terms {
            let (s, c) = (term.frequency * t).sin_cos();
            for (o, z) in out.iter_mut().zip(&term.coefficients) {
                *o += z.re * c - z.im * s;
            }
        }
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        Some(self.lipschitz())
    }
}

/// Parameters of a translation-number scan.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateConfig {
    pub epsilon: f64,
    /// Window length `l`.
    pub window: f64,
    /// Range of τ values split into consecutive windows of length `l`.
    pub scan: (f64, f64),
    /// Range of t over which the sup defect is sampled.
    pub t_range: (f64, f64),
    /// τ grid spacing; defaults to `ε / (2L)`.
    pub tau_step: Option<f64>,
    /// t grid spacing; defaults to `ε / (4L)`.
    pub t_step: Option<f64>,
}

impl CertificateConfig {
    pub fn new(epsilon: f64, window: f64, scan: (f64, f64), t_range: (f64, f64)) -> Self {
        Self {
            epsilon,
            window,
            scan,
            t_range,
            tau_step: None,
            t_step: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowScan {
    pub start: f64,
    pub end: f64,
    /// First τ whose certified defect is below ε, if any.
    pub tau: Option<f64>,
    /// Smallest sampled defect seen in the window (each scan stops once it
    /// reaches `ε − L·t_step`, so failing windows report a lower bound).
    pub best_defect: f64,
}

/// Result of scanning every window of length `l` for an ε-translation number.
#[derive(Debug, Clone, Serialize)]
pub struct TranslationCertificate {
    pub epsilon: f64,
    pub window_length: f64,
    pub tau_step: f64,
    pub t_step: f64,
    pub windows: Vec<WindowScan>,
    pub passed: bool,
}

impl TranslationCertificate {
    pub fn found_taus(&self) -> Vec<Option<f64>> {
        self.windows.iter().map(|w| w.tau).collect()
    }
}

/// Sampled sup of `‖f(t+τ) − f(t)‖` over the t grid; stops early once the
/// running value reaches `stop_at`.
fn sampled_defect(s: &dyn Signal, tau: f64, ts: &[f64], stop_at: f64, a: &mut [f64], b: &mut [f64]) -> f64 {
    let mut sup = 0.0f64;
    for &t in ts {
        s.eval_into(t + tau, a);
        s.eval_into(t, b);
        let d = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        sup = sup.max(d);
        if sup >= stop_at {
            break;
        }
    }
    sup
}

/// Scan every window of the τ range for an ε-translation number.
///
/// A τ is accepted when `sampled_sup + L·t_step < ε`, which bounds the true
/// sup over the sampled t range because `t ↦ f(t+τ) − f(t)` is `2L`-Lipschitz.
pub fn translation_certificate(s: &dyn Signal, cfg: &CertificateConfig) -> Result<TranslationCertificate> {
    const OP: &str = "ap::translation_certificate";
    let eps = cfg.epsilon;
    let l = cfg.window;
    if !(eps > 0.0 && l > 0.0) {
        return Err(Error::pre(OP, "epsilon and window length must be positive"));
    }
    let (a, b) = cfg.scan;
    let n_windows = ((b - a) / l + 1e-9).floor() as usize;
    if n_windows < 5 {
        return Err(Error::pre(OP, format!("scan range [{a}, {b}] covers {n_windows} windows of length {l}; need at least 5")));
    }
    let lip = s
        .lipschitz_bound()
        .ok_or_else(|| Error::pre(OP, "signal has no Lipschitz bound; grids cannot be certified"))?;
    let lip = lip.max(f64::MIN_POSITIVE);
    let max_tau_step = eps / lip;
    let tau_step = cfg.tau_step.unwrap_or(0.5 * max_tau_step);
    if tau_step > max_tau_step {
        return Err(Error::pre(OP, format!("tau spacing {tau_step} exceeds ε/L = {max_tau_step}")));
    }
    let t_step = cfg.t_step.unwrap_or(0.25 * eps / lip);
    if t_step > 0.25 * eps / lip * (1.0 + 1e-12) {
        return Err(Error::pre(OP, format!("t spacing {t_step} exceeds ε/(4L) = {}", 0.25 * eps / lip)));
    }
    let (t0, t1) = cfg.t_range;
    if let Some((lo, hi)) = s.domain() {
        if t0 < lo || t1 + b > hi || t1 + a > hi || t0 + a < lo {
            return Err(Error::pre(OP, format!("t range plus τ range leaves the signal domain [{lo}, {hi}]")));
        }
    }
    let nt = (((t1 - t0) / t_step).ceil() as usize).max(1);
    let ts: Vec<f64> = (0..=nt).map(|i| t0 + (t1 - t0) * i as f64 / nt as f64).collect();
    let slack = lip * (t1 - t0) / nt as f64;
    let mut buf_a = vec![0.0; s.dim()];
    let mut buf_b = vec![0.0; s.dim()];

    let mut windows = Vec::with_capacity(n_windows);
    let mut passed = true;
    for k in 0..n_windows {
        let start = a + k as f64 * l;
        let end = start + l;
        let n_tau = ((l / tau_step).ceil() as usize).max(1);
        let mut found = None;
        let mut best = f64::INFINITY;
        for j in 0..=n_tau {
            let tau = start + l * j as f64 / n_tau as f64;
            let d = sampled_defect(s, tau, &ts, eps - slack, &mut buf_a, &mut buf_b);
            best = best.min(d);
            if d + slack < eps {
                found = Some(tau);
                break;
            }
        }
        if found.is_none() {
            passed = false;
        }
        windows.push(WindowScan {
            start,
            end,
            tau: found,
            best_defect: best,
        });
        if !passed {
            break;
        }
    }
    Ok(TranslationCertificate {
        epsilon: eps,
        window_length: l,
        tau_step,
        t_step: (t1 - t0) / nt as f64,
        windows,
        passed,
    })
}

/// Doubling search for a window length `l(ε)` whose certificate passes on
/// `[0, windows·l]`. Returns the first passing certificate.
pub fn find_window_length(
    s: &dyn Signal,
    epsilon: f64,
    initial: f64,
    max_window: f64,
    windows: usize,
    t_range: (f64, f64),
) -> Result<TranslationCertificate> {
    const OP: &str = "ap::find_window_length";
    let windows = windows.max(5);
    let mut l = initial;
    while l <= max_window {
        let cfg = CertificateConfig::new(epsilon, l, (0.0, windows as f64 * l), t_range);
        let cert = translation_certificate(s, &cfg)?;
        if cert.passed {
            return Ok(cert);
        }
        l *= 2.0;
    }
    Err(Error::NotConverged {
        op: OP,
        detail: format!("no window length up to {max_window} certified ε = {epsilon}"),
    })
}

/// `(1/2T) ∫_{-T}^{T} f(t) e^{-iλt} dt` per component.
pub fn bohr_coefficient(s: &dyn Signal, freq: f64, horizon: f64, quad: &Composite) -> Result<Vec<Complex64>> {
    const OP: &str = "ap::bohr_coefficient";
    if !(horizon > 0.0) {
        return Err(Error::pre(OP, "horizon must be positive"));
    }
    let mut buf = vec![0.0; s.dim()];
    let mut out = Vec::with_capacity(s.dim());
    for k in 0..s.dim() {
        let re = quad.integrate(-horizon, horizon, |t| {
            s.eval_into(t, &mut buf);
            buf[k] * (freq * t).cos()
        });
        let im = quad.integrate(-horizon, horizon, |t| {
            s.eval_into(t, &mut buf);
            -buf[k] * (freq * t).sin()
        });
        out.push(Complex64::new(re, im) / (2.0 * horizon));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn eval_examples() {
        assert!((APSignal::sin(1.0, 1.0).value(PI / 2.0) - 1.0).abs() < 1e-15);
        let s = APSignal::sin(1.0, 1.0).add(&APSignal::sin(SQRT_2, 1.0));
        assert!(s.value(0.0).abs() < 1e-15);
        assert!((APSignal::cos(3.0, 2.0).value(PI / 3.0) + 2.0).abs() < 1e-14);
        assert!(s.is_conjugate_symmetric(0.0));
        assert!(!APSignal::scalar(&[(1.0, 1.0, 0.0)]).unwrap().is_conjugate_symmetric(1e-12));
    }

    #[test]
    fn sup_and_lipschitz_bounds() {
        let s = APSignal::sin(1.0, 1.0).add(&APSignal::sin(SQRT_2, 1.0));
        assert!((s.sup_bound() - 2.0).abs() < 1e-15);
        assert!((s.lipschitz() - (1.0 + SQRT_2)).abs() < 1e-15);
    }

    #[test]
    fn integral_matches_quadrature() {
        let s = APSignal::constant(2.0).add(&APSignal::sin(1.0, 1.0));
        // ∫_0^π (2 + sin r) dr = 2π + 2
        assert!((s.integral(0.0, PI) - (2.0 * PI + 2.0)).abs() < 1e-13);
    }

    #[test]
    fn merges_equal_frequencies() {
        let s = APSignal::sin(1.0, 1.0).add(&APSignal::sin(1.0, 2.0));
        assert_eq!(s.terms().len(), 2);
        assert!((s.value(0.3) - 3.0 * 0.3f64.sin()).abs() < 1e-15);
        assert!(APSignal::scalar(&[(f64::NAN, 1.0, 0.0)]).is_err());
    }

    #[test]
    fn sine_certificate_passes_with_period() {
        let s = APSignal::sin(1.0, 1.0);
        let cfg = CertificateConfig::new(0.1, 7.0, (0.0, 70.0), (-10.0, 10.0));
        let cert = translation_certificate(&s, &cfg).unwrap();
        assert!(cert.passed);
        assert_eq!(cert.windows.len(), 10);
        for tau in cert.found_taus().into_iter().flatten() {
            let k = (tau / (2.0 * PI)).round();
            assert!((tau - 2.0 * PI * k).abs() < 0.1, "tau {tau}");
        }
    }

    #[test]
    fn decaying_pulse_fails() {
        let s = scalar_fn(Some(1.0), |t: f64| (-t.abs()).exp());
        let cfg = CertificateConfig::new(0.1, 10.0, (0.0, 100.0), (-20.0, 20.0));
        let cert = translation_certificate(&s, &cfg).unwrap();
        assert!(!cert.passed);
    }

    #[test]
    fn coarse_grid_rejected() {
        let s = APSignal::sin(1.0, 1.0);
        let mut cfg = CertificateConfig::new(0.1, 7.0, (0.0, 70.0), (-10.0, 10.0));
        cfg.tau_step = Some(0.5);
        assert!(translation_certificate(&s, &cfg).is_err());
        let cfg = CertificateConfig::new(0.1, 7.0, (0.0, 20.0), (-10.0, 10.0));
        assert!(translation_certificate(&s, &cfg).is_err());
    }

    #[test]
    fn bohr_mean_of_constant() {
        let c = bohr_coefficient(&APSignal::constant(3.0), 0.0, 2.5, &Composite::default()).unwrap();
        assert!((c[0] - Complex64::new(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn convolution_with_indicator() {
        // sin ∗ 1_[0,1] = cos(t-1) - cos(t)
        let s = APSignal::sin(1.0, 1.0).convolve(|_| 1.0, (0.0, 1.0), &Composite::default());
        for t in [-2.0, 0.0, 0.7, 5.0] {
            let want = (t - 1.0f64).cos() - t.cos();
            assert!((s.value(t) - want).abs() < 1e-13);
        }
    }
}
