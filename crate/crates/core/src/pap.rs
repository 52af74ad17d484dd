//! Weighted ergodic (PAP₀) membership decisions and the closure harnesses
//! for convolution, composition and weight equivalence.
//!
//! A finite horizon cannot decide a limit, so membership is decided by an
//! explicit rule: the weighted mean of the norm must shrink by at least
//! `decay_threshold` per horizon doubling over the last three steps of a
//! geometric schedule, and its final value must be below `tol`.

use crate::ap::{translation_certificate, APSignal, CertificateConfig, Signal, TranslationCertificate};
use crate::error::{Error, Result};
use crate::quad::Composite;
use crate::weights::{classify_weight, ergodic_mass, weights_equivalent, LimitConfig, Weight};
use serde::Serialize;

/// Which norm the stored values are meant to be measured in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NormKind {
    Ambient,
    /// Interpolation norm of the given order.
    Alpha(f64),
}

/// Vector samples on a uniform time grid.
#[derive(Debug, Clone, Serialize)]
pub struct SampledPath {
    start: f64,
    step: f64,
    dim: usize,
    /// Row-major: sample `i` occupies `values[i*dim..(i+1)*dim]`.
    values: Vec<f64>,
    pub norm_kind: NormKind,
}

impl SampledPath {
    pub fn new(start: f64, step: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        const OP: &str = "SampledPath::new";
        if !(step > 0.0 && step.is_finite() && start.is_finite()) {
            return Err(Error::pre(OP, "grid step must be positive and start finite"));
        }
        if dim == 0 || values.len() % dim != 0 || values.len() / dim < 2 {
            return Err(Error::pre(OP, "need at least two samples of the declared dimension"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::pre(OP, format!("sample {} is not finite", i / dim)));
        }
        Ok(Self {
            start,
            step,
            dim,
            values,
            norm_kind: NormKind::Ambient,
        })
    }

    /// Sample a function on the grid `t_min + i·step`, `i = 0..=n` with
    /// `n = round((t_max - t_min)/step)`.
    pub fn from_fn(t_min: f64, t_max: f64, step: f64, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let n = ((t_max - t_min) / step).round() as usize;
        let mut values = vec![0.0; (n + 1) * dim];
        for i in 0..=n {
            f(t_min + i as f64 * step, &mut values[i * dim..(i + 1) * dim]);
        }
        Self::new(t_min, step, dim, values)
    }

    pub fn from_scalar_fn(t_min: f64, t_max: f64, step: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(t_min, t_max, step, 1, |t, out| out[0] = f(t))
    }

    pub fn from_signal(s: &dyn Signal, t_min: f64, t_max: f64, step: f64) -> Result<Self> {
        Self::from_fn(t_min, t_max, step, s.dim(), |t, out| s.eval_into(t, out))
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn t_min(&self) -> f64 {
        self.start
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Nearest grid index to `t` (clamped).
    pub fn index_of(&self, t: f64) -> usize {
        (((t - self.start) / self.step).round().max(0.0) as usize).min(self.len() - 1)
    }

    pub fn norm_at(&self, i: usize) -> f64 {
        self.value(i).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn norms(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.norm_at(i)).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|i| self.norm_at(i)).fold(0.0, f64::max)
    }

    fn check_same_grid(&self, other: &SampledPath, op: &'static str) -> Result<()> {
        if self.dim != other.dim
            || self.len() != other.len()
            || (self.start - other.start).abs() > 1e-9 * self.step
            || (self.step - other.step).abs() > 1e-12 * self.step
        {
            return Err(Error::pre(op, "paths live on different grids"));
        }
        Ok(())
    }

    /// `self + k·other` on a common grid.
    pub fn axpy(&self, k: f64, other: &SampledPath) -> Result<SampledPath> {
        self.check_same_grid(other, "SampledPath::axpy")?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += k * b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SampledPath) -> Result<SampledPath> {
        self.axpy(-1.0, other)
    }

    /// Subtract a signal evaluated on the grid.
    pub fn minus_signal(&self, s: &dyn Signal) -> Result<SampledPath> {
        if s.dim() != self.dim {
            return Err(Error::pre("SampledPath::minus_signal", "dimension mismatch"));
        }
        let mut out = self.clone();
        let mut buf = vec![0.0; self.dim];
        for i in 0..self.len() {
            s.eval_into(self.time(i), &mut buf);
            for (a, b) in out.value_mut(i).iter_mut().zip(&buf) {
                *a -= b;
            }
        }
        Ok(out)
    }

    /// `t ↦ f(-t)`, sampled on the mirrored grid.
    pub fn reflect(&self) -> SampledPath {
        let n = self.len();
        let mut values = Vec::with_capacity(self.values.len());
        for i in (0..n).rev() {
            values.extend_from_slice(self.value(i));
        }
        SampledPath {
            start: -self.t_max(),
            values,
            ..self.clone()
        }
    }

    /// Restrict to the grid points inside `[a, b]`.
    pub fn window(&self, a: f64, b: f64) -> Result<SampledPath> {
        let i0 = ((a - self.start) / self.step - 1e-9).ceil().max(0.0) as usize;
        let i1 = (((b - self.start) / self.step + 1e-9).floor() as usize).min(self.len() - 1);
        if i1 <= i0 {
            return Err(Error::pre("SampledPath::window", format!("[{a}, {b}] holds fewer than two samples")));
        }
        SampledPath::new(self.time(i0), self.step, self.dim, self.values[i0 * self.dim..(i1 + 1) * self.dim].to_vec())
            .map(|mut p| {
                p.norm_kind = self.norm_kind;
                p
            })
    }

    /// Linear interpolation inside the grid.
    pub fn interpolate_linear(&self, t: f64, out: &mut [f64]) {
        let x = ((t - self.start) / self.step).clamp(0.0, (self.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.len() - 2);
        let w = x - k as f64;
        let (a, b) = (self.value(k), self.value(k + 1));
        for j in 0..self.dim {
            out[j] = a[j] * (1.0 - w) + b[j] * w;
        }
    }

    /// Four-point Lagrange interpolation (third order) inside the grid.
    pub fn interpolate_cubic(&self, t: f64, out: &mut [f64]) {
        let n = self.len();
        if n < 4 {
            return self.interpolate_linear(t, out);
        }
        let x = ((t - self.start) / self.step).clamp(0.0, (n - 1) as f64);
        let k = (x.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let u = x - k as f64;
        // Nodes at 0,1,2,3 relative to k.
        let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
        let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
        let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
        let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
        for j in 0..self.dim {
            out[j] = l0 * self.values[k * self.dim + j]
                + l1 * self.values[(k + 1) * self.dim + j]
                + l2 * self.values[(k + 2) * self.dim + j]
                + l3 * self.values[(k + 3) * self.dim + j];
        }
    }

    /// CSV with a header `t,u0,u1,...` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for j in 0..self.dim {
            s.push_str(&format!(",u{j}"));
        }
        s.push('\n');
        for i in 0..self.len() {
            s.push_str(&crate::report::fmt_f64(self.time(i)));
            for v in self.value(i) {
                s.push(',');
                s.push_str(&crate::report::fmt_f64(*v));
            }
            s.push('\n');
        }
        s
    }
}

impl Signal for SampledPath {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        self.interpolate_linear(t, out)
    }

    /// Lipschitz constant of the piecewise-linear interpolant.
    fn lipschitz_bound(&self) -> Option<f64> {
        let mut l = 0.0f64;
        for i in 0..self.len() - 1 {
            let d = self
                .value(i + 1)
                .iter()
                .zip(self.value(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            l = l.max(d / self.step);
        }
        Some(l)
    }

    fn domain(&self) -> Option<(f64, f64)> {
        Some((self.t_min(), self.t_max()))
    }
}

/// Anything whose weighted norm integral `∫_{-T}^{T} ‖f‖ρ` can be computed.
pub trait ErgodicSource {
    fn weighted_norm_integral(&self, w: &Weight, horizon: f64, quad: &Composite) -> Result<f64>;
}

impl ErgodicSource for SampledPath {
    /// Trapezoid rule on the grid; the partial cells at `±T` use the linear
    /// interpolant of the integrand.
    fn weighted_norm_integral(&self, w: &Weight, horizon: f64, _quad: &Composite) -> Result<f64> {
        const OP: &str = "pap::weighted_ergodic_norm";
        let (a, b) = (-horizon, horizon);
        if a < self.t_min() - 1e-9 * self.step || b > self.t_max() + 1e-9 * self.step {
            return Err(Error::pre(OP, format!("horizon {horizon} exceeds path support [{}, {}]", self.t_min(), self.t_max())));
        }
        let g = |i: usize| -> Result<f64> { Ok(self.norm_at(i) * w.eval_checked(OP, self.time(i))?) };
        let x0 = (a - self.start) / self.step;
        let x1 = (b - self.start) / self.step;
        let i0 = (x0 - 1e-9).ceil().max(0.0) as usize;
        let i1 = ((x1 + 1e-9).floor() as usize).min(self.len() - 1);
        let mut acc = 0.0;
        for i in i0..i1 {
            acc += 0.5 * self.step * (g(i)? + g(i + 1)?);
        }
        // partial cells
        let mut buf = vec![0.0; self.dim];
        let mut edge = |t: f64, tg: usize| -> Result<f64> {
            self.interpolate_linear(t, &mut buf);
            let n = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
            Ok(0.5 * (self.time(tg) - t).abs() * (n * w.eval_checked(OP, t)? + g(tg)?))
        };
        let lo = self.time(i0);
        if lo - a > 1e-12 * self.step {
            acc += edge(a, i0)?;
        }
        let hi = self.time(i1);
        if b - hi > 1e-12 * self.step {
            acc += edge(b, i1)?;
        }
        Ok(acc)
    }
}

/// A closed-form signal integrated with composite Gauss–Legendre.
pub struct ClosedForm<'a>(pub &'a dyn Signal);

impl ErgodicSource for ClosedForm<'_> {
    fn weighted_norm_integral(&self, w: &Weight, horizon: f64, quad: &Composite) -> Result<f64> {
        const OP: &str = "pap::weighted_ergodic_norm";
        let mut buf = vec![0.0; self.0.dim()];
        let mut bad = None;
        let v = quad.integrate(-horizon, horizon, |t| {
            self.0.eval_into(t, &mut buf);
            let rho = w.eval(t);
            if bad.is_none() && !(rho.is_finite() && rho > 0.0) {
                bad = Some(t);
            }
            buf.iter().map(|x| x * x).sum::<f64>().sqrt() * rho
        });
        if let Some(t) = bad {
            return Err(Error::pre(OP, format!("weight {} is not positive at t = {t}", w.label())));
        }
        Ok(v)
    }
}

/// `(1/m(T,ρ)) ∫_{-T}^{T} ‖f‖ ρ`.
pub fn weighted_ergodic_norm(src: &dyn ErgodicSource, w: &Weight, horizon: f64, quad: &Composite) -> Result<f64> {
    let num = src.weighted_norm_integral(w, horizon, quad)?;
    let m = ergodic_mass(w, horizon, quad)?;
    Ok(num / m.value)
}

/// Decision constants for [`is_pap0`].
#[derive(Debug, Clone, Serialize)]
pub struct Pap0Config {
    pub tol: f64,
    /// Allowed ratio of consecutive deviations per horizon doubling.
    pub decay_threshold: f64,
    /// Deviations at or below this count as exactly zero.
    pub zero_floor: f64,
    #[serde(skip)]
    pub quad: Composite,
}

impl Default for Pap0Config {
    fn default() -> Self {
        Self {
            tol: 1e-2,
            decay_threshold: 0.75,
            zero_floor: 1e-12,
            quad: Composite::default(),
        }
    }
}

/// Weighted ergodic means over a horizon schedule and the resulting decision.
#[derive(Debug, Clone, Serialize)]
pub struct ErgodicDeviation {
    pub horizons: Vec<f64>,
    pub values: Vec<f64>,
    pub decays_to_zero: bool,
    /// `-slope` of `log value` against `log T`.
    pub fitted_rate: f64,
}

impl ErgodicDeviation {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("T,value\n");
        for (t, v) in self.horizons.iter().zip(&self.values) {
            s.push_str(&format!("{},{}\n", crate::report::fmt_f64(*t), crate::report::fmt_f64(*v)));
        }
        s
    }

    /// Ratios `value[k]/value[k-1]`.
    pub fn ratios(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Geometric schedule `first, first·r, …` with `count` entries.
pub fn geometric_schedule(first: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| first * ratio.powi(k as i32)).collect()
}

fn schedule_ratio(op: &'static str, horizons: &[f64]) -> Result<f64> {
    if horizons.len() < 4 {
        return Err(Error::pre(op, format!("need at least 4 horizons, got {}", horizons.len())));
    }
    if horizons[0] <= 0.0 {
        return Err(Error::pre(op, "horizons must be positive"));
    }
    let r = horizons[1] / horizons[0];
    if !(r > 1.0) || horizons.windows(2).any(|w| ((w[1] / w[0]) - r).abs() > 1e-9 * r) {
        return Err(Error::pre(op, "horizon schedule is not geometric with ratio > 1"));
    }
    Ok(r)
}

/// Compute the deviation sequence and decide membership in PAP₀(ρ).
pub fn is_pap0(src: &dyn ErgodicSource, w: &Weight, horizons: &[f64], cfg: &Pap0Config) -> Result<ErgodicDeviation> {
    const OP: &str = "pap::is_pap0";
    let ratio = schedule_ratio(OP, horizons)?;
    let values: Vec<f64> = horizons
        .iter()
        .map(|&t| weighted_ergodic_norm(src, w, t, &cfg.quad))
        .collect::<Result<_>>()?;
    let allowed = cfg.decay_threshold.powf(ratio.log2());
    let n = values.len();
    let mut decays = values[n - 1] < cfg.tol;
    for k in n - 3..n {
        if values[k] <= cfg.zero_floor {
            continue;
        }
        if !(values[k - 1] > 0.0 && values[k] / values[k - 1] <= allowed) {
            decays = false;
        }
    }
    let pts: Vec<(f64, f64)> = horizons
        .iter()
        .zip(&values)
        .filter(|(_, v)| **v > cfg.zero_floor)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    let fitted_rate = if pts.len() >= 2 {
        -crate::report::ls_slope(&pts)
    } else {
        0.0
    };
    Ok(ErgodicDeviation {
        horizons: horizons.to_vec(),
        values,
        decays_to_zero: decays,
        fitted_rate,
    })
}

/// Kernel samples `k(start + j·step)`.
#[derive(Debug, Clone, Serialize)]
pub struct Kernel {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

/// Kernels with more L¹ mass than this are rejected.
pub const KERNEL_MASS_CAP: f64 = 1e6;

impl Kernel {
    pub fn from_fn(f: impl Fn(f64) -> f64, a: f64, b: f64, step: f64) -> Self {
        let n = ((b - a) / step).round() as usize;
        Self {
            start: a,
            step,
            values: (0..=n).map(|j| f(a + j as f64 * step)).collect(),
        }
    }

    /// Trapezoid-weighted L¹ mass.
    pub fn l1_mass(&self) -> f64 {
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        crate::quad::trapezoid(&abs, self.step)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }

    /// Drop leading and trailing samples carrying less than `rel` of the mass.
    pub fn truncated(&self, rel: f64) -> Self {
        let total: f64 = self.values.iter().map(|v| v.abs()).sum();
        if total == 0.0 {
            return self.clone();
        }
        let cut = rel * total;
        let mut lo = 0;
        let mut acc = 0.0;
        while lo < self.values.len() && acc + self.values[lo].abs() <= cut {
            acc += self.values[lo].abs();
            lo += 1;
        }
        let mut hi = self.values.len();
        acc = 0.0;
        while hi > lo + 1 && acc + self.values[hi - 1].abs() <= cut {
            acc += self.values[hi - 1].abs();
            hi -= 1;
        }
        if lo > 0 {
            lo -= 1;
        }
        let hi = (hi + 1).min(self.values.len());
        Self {
            start: self.start + lo as f64 * self.step,
            step: self.step,
            values: self.values[lo..hi].to_vec(),
        }
    }
}

/// Discrete convolution `(f∗k)(t_i) = Σ_j w_j k(s_j) f(t_i − s_j)` on the
/// path grid with trapezoid weights, `f` taken as zero off its support.
pub fn convolve_path(f: &SampledPath, kernel: &Kernel) -> Result<SampledPath> {
    const OP: &str = "pap::convolve_and_test";
    if (kernel.step - f.step()).abs() > 1e-12 * f.step() {
        return Err(Error::pre(OP, "kernel step must equal the path step"));
    }
    let offset_f = kernel.start / f.step();
    let offset = offset_f.round();
    if (offset - offset_f).abs() > 1e-6 {
        return Err(Error::pre(OP, "kernel start must lie on the path grid"));
    }
    let offset = offset as isize;
    let n = f.len() as isize;
    let m = kernel.values.len();
    let dim = f.dim();
    let mut out = f.zeros_like();
    let mut acc = vec![0.0; dim];
    for i in 0..n {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (j, kv) in kernel.values.iter().enumerate() {
            let wj = if j == 0 || j == m - 1 { 0.5 } else { 1.0 } * kernel.step * kv;
            let src = i - offset - j as isize;
            if src < 0 || src >= n {
                continue;
            }
            for (a, v) in acc.iter_mut().zip(f.value(src as usize)) {
                *a += wj * v;
            }
        }
        out.value_mut(i as usize).copy_from_slice(&acc);
    }
    Ok(out)
}

/// Convolve a PAP₀ path with an integrable kernel and decide membership of
/// the result.
pub fn convolve_and_test(
    f: &SampledPath,
    kernel: &Kernel,
    w: &Weight,
    horizons: &[f64],
    cfg: &Pap0Config,
) -> Result<ErgodicDeviation> {
    const OP: &str = "pap::convolve_and_test";
    let mass = kernel.l1_mass();
    if !(mass.is_finite() && mass <= KERNEL_MASS_CAP) {
        return Err(Error::pre(OP, format!("kernel L1 mass {mass} exceeds cap {KERNEL_MASS_CAP}")));
    }
    let kernel_span = kernel.start.abs().max((kernel.start + kernel.step * kernel.values.len() as f64).abs()).max(1.0);
    let class = classify_weight(w, horizons, &[-kernel_span, kernel_span], &cfg.quad, &LimitConfig::default())?;
    if !class.translation_invariant {
        return Err(Error::pre(OP, format!("weight {} is not translation invariant", w.label())));
    }
    let conv = convolve_path(f, &kernel.truncated(1e-12))?;
    is_pap0(&conv, w, horizons, cfg)
}

/// A function `F(t, z)` split as `F = F₁ + φ` with an almost periodic part
/// `F₁` and an ergodic part `φ`, plus its Lipschitz modulus `L_F(t)`.
pub struct SplitForcing<'a> {
    pub out_dim: usize,
    pub ap_part: &'a dyn Fn(f64, &[f64], &mut [f64]),
    pub ergodic_part: Option<&'a dyn Fn(f64, &[f64], &mut [f64])>,
    pub lipschitz: Option<&'a dyn Fn(f64) -> f64>,
}

/// `h = h₁ + h₂` with `h₁` almost periodic and `h₂` weighted ergodic.
#[derive(Debug, Clone)]
pub struct WpapDecomposition {
    pub ap_part: APSignal,
    pub ergodic_part: SampledPath,
    pub weight: Weight,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionCheck {
    pub certificate: TranslationCertificate,
    pub deviation: ErgodicDeviation,
    pub valid: bool,
}

impl WpapDecomposition {
    /// Full signal `h₁ + h₂` on the ergodic part's grid.
    pub fn sampled(&self) -> Result<SampledPath> {
        let ap = SampledPath::from_signal(&self.ap_part, self.ergodic_part.t_min(), self.ergodic_part.t_max(), self.ergodic_part.step())?;
        ap.axpy(1.0, &self.ergodic_part)
    }

    pub fn verify(&self, cert: &CertificateConfig, horizons: &[f64], cfg: &Pap0Config) -> Result<DecompositionCheck> {
        let certificate = translation_certificate(&self.ap_part, cert)?;
        let deviation = is_pap0(&self.ergodic_part, &self.weight, horizons, cfg)?;
        let valid = certificate.passed && deviation.decays_to_zero;
        Ok(DecompositionCheck {
            certificate,
            deviation,
            valid,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComposeReport {
    pub deviation: ErgodicDeviation,
    /// `sup_t L_F(t)` over the grid.
    pub lipschitz_sup: f64,
    /// Largest violation of `‖F(t,h) − F₁(t,h₁)‖ ≤ L_F(t)‖h₂‖ + ‖φ(t,h₁)‖`
    /// (≤ 0 means the bound held everywhere).
    pub remainder_bound_excess: f64,
}

/// Build `t ↦ F(t, h(t))`, subtract its candidate almost periodic part
/// `F₁(t, h₁(t))`, and decide whether the remainder is weighted ergodic.
pub fn compose_and_test(
    forcing: &SplitForcing<'_>,
    h: &WpapDecomposition,
    horizons: &[f64],
    cfg: &Pap0Config,
) -> Result<ComposeReport> {
    const OP: &str = "pap::compose_and_test";
    let lip = forcing
        .lipschitz
        .ok_or_else(|| Error::pre(OP, "forcing has no Lipschitz bound L_F(t)"))?;
    let grid = &h.ergodic_part;
    let din = h.ap_part.dim();
    if grid.dim() != din {
        return Err(Error::pre(OP, "decomposition parts differ in dimension"));
    }
    let dout = forcing.out_dim;
    let mut h1 = vec![0.0; din];
    let mut full = vec![0.0; din];
    let mut a = vec![0.0; dout];
    let mut b = vec![0.0; dout];
    let mut c = vec![0.0; dout];
    let mut lip_sup = 0.0f64;
    let mut excess = f64::NEG_INFINITY;
    let mut rem = vec![0.0; grid.len() * dout];
    for i in 0..grid.len() {
        let t = grid.time(i);
        h.ap_part.eval_into(t, &mut h1);
        let h2 = grid.value(i);
        for k in 0..din {
            full[k] = h1[k] + h2[k];
        }
        // F(t, h) = F₁(t, h) + φ(t, h)
        (forcing.ap_part)(t, &full, &mut a);
        if let Some(phi) = forcing.ergodic_part {
            phi(t, &full, &mut c);
            for k in 0..dout {
                a[k] += c[k];
            }
            phi(t, &h1, &mut c);
        } else {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
        (forcing.ap_part)(t, &h1, &mut b);
        let l = lip(t);
        if !l.is_finite() {
            return Err(Error::pre(OP, format!("L_F({t}) is not finite")));
        }
        lip_sup = lip_sup.max(l);
        let r = &mut rem[i * dout..(i + 1) * dout];
        for k in 0..dout {
            r[k] = a[k] - b[k];
        }
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let h2n = h2.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        excess = excess.max(rn - (l * h2n + cn) - 1e-12 * (1.0 + rn));
    }
    let remainder = SampledPath::new(grid.t_min(), grid.step(), dout, rem)?;
    let deviation = is_pap0(&remainder, &h.weight, horizons, cfg)?;
    Ok(ComposeReport {
        deviation,
        lipschitz_sup: lip_sup,
        remainder_bound_excess: excess,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferRow {
    pub name: String,
    pub decision_1: bool,
    pub decision_2: bool,
    pub agree: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub rows: Vec<TransferRow>,
    pub all_agree: bool,
}

/// For equivalent weights, PAP₀ decisions must agree on every corpus member.
pub fn equivalence_transfers_pap0(
    w1: &Weight,
    w2: &Weight,
    corpus: &[(&str, &dyn ErgodicSource)],
    horizons: &[f64],
    equivalence_horizons: &[f64],
    cfg: &Pap0Config,
) -> Result<TransferReport> {
    const OP: &str = "pap::equivalence_transfers_pap0";
    let verdict = weights_equivalent(w1, w2, equivalence_horizons, &LimitConfig::default())?;
    if !verdict.equivalent {
        return Err(Error::pre(OP, format!("weights {} and {} are not equivalent", w1.label(), w2.label())));
    }
    let mut rows = Vec::with_capacity(corpus.len());
    for (name, src) in corpus {
        let d1 = is_pap0(*src, w1, horizons, cfg)?.decays_to_zero;
        let d2 = is_pap0(*src, w2, horizons, cfg)?.decays_to_zero;
        rows.push(TransferRow {
            name: name.to_string(),
            decision_1: d1,
            decision_2: d2,
            agree: d1 == d2,
        });
    }
    let all_agree = rows.iter().all(|r| r.agree);
    Ok(TransferReport { rows, all_agree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ap::scalar_fn;

    fn pulse() -> impl Fn(f64) -> f64 {
        |t: f64| (-t.abs()).exp()
    }

    #[test]
    fn ergodic_norm_examples() {
        let quad = Composite::default();
        let zero = SampledPath::from_scalar_fn(-20.0, 20.0, 0.01, |_| 0.0).unwrap();
        assert_eq!(weighted_ergodic_norm(&zero, &Weight::polynomial(2), 10.0, &quad).unwrap(), 0.0);
        let one = SampledPath::from_scalar_fn(-20.0, 20.0, 0.01, |_| 1.0).unwrap();
        assert!((weighted_ergodic_norm(&one, &Weight::unit(), 7.3, &quad).unwrap() - 1.0).abs() < 1e-12);
        // closed form (1 - e^{-T})/T
        let p = SampledPath::from_scalar_fn(-20.0, 20.0, 0.01, pulse()).unwrap();
        let want = (1.0 - (-10f64).exp()) / 10.0;
        assert!((weighted_ergodic_norm(&p, &Weight::unit(), 10.0, &quad).unwrap() - want).abs() < 1e-6);
        let f = pulse();
        let cf = scalar_fn(None, f);
        assert!((weighted_ergodic_norm(&ClosedForm(&cf), &Weight::unit(), 10.0, &quad).unwrap() - want).abs() < 1e-12);
        assert!(weighted_ergodic_norm(&p, &Weight::unit(), 25.0, &quad).is_err());
    }

    #[test]
    fn schedule_must_be_geometric() {
        let p = SampledPath::from_scalar_fn(-100.0, 100.0, 0.05, pulse()).unwrap();
        let cfg = Pap0Config::default();
        assert!(is_pap0(&p, &Weight::unit(), &[10.0, 20.0, 30.0, 40.0], &cfg).is_err());
        assert!(is_pap0(&p, &Weight::unit(), &[10.0, 20.0, 40.0], &cfg).is_err());
        assert!(is_pap0(&p, &Weight::unit(), &[10.0, 20.0, 40.0, 80.0], &cfg).is_ok());
    }

    #[test]
    fn pap0_decisions() {
        let cfg = Pap0Config::default();
        let h = geometric_schedule(20.0, 2.0, 5);
        let pulse_src = scalar_fn(None, pulse());
        let d = is_pap0(&ClosedForm(&pulse_src), &Weight::unit(), &h, &cfg).unwrap();
        assert!(d.decays_to_zero);
        assert!((d.fitted_rate - 1.0).abs() < 1e-2);
        let sine = scalar_fn(None, f64::sin);
        let d = is_pap0(&ClosedForm(&sine), &Weight::unit(), &h, &cfg).unwrap();
        assert!(!d.decays_to_zero);
        assert!((d.values.last().unwrap() - 2.0 / std::f64::consts::PI).abs() < 2e-3);
        let d = is_pap0(&ClosedForm(&pulse_src), &Weight::polynomial(2), &h, &cfg).unwrap();
        assert!(d.decays_to_zero);
    }

    #[test]
    fn zero_path_decays() {
        let z = SampledPath::from_scalar_fn(-200.0, 200.0, 0.1, |_| 0.0).unwrap();
        let d = is_pap0(&z, &Weight::unit(), &geometric_schedule(20.0, 2.0, 4), &Pap0Config::default()).unwrap();
        assert!(d.decays_to_zero);
    }

    #[test]
    fn kernel_truncation_and_mass() {
        let k = Kernel::from_fn(|s: f64| (-s.abs()).exp(), -60.0, 60.0, 0.01);
        assert!((k.l1_mass() - 2.0).abs() < 1e-4);
        let t = k.truncated(1e-12);
        assert!(t.values.len() < k.values.len());
        assert!((t.l1_mass() - k.l1_mass()).abs() < 1e-10);
    }

    #[test]
    fn discrete_convolution_of_indicator() {
        let f = SampledPath::from_scalar_fn(-30.0, 30.0, 0.01, f64::sin).unwrap();
        let k = Kernel::from_fn(|_| 1.0, 0.0, 1.0, 0.01);
        let c = convolve_path(&f, &k).unwrap();
        let i = c.index_of(3.0);
        let want = (3.0f64 - 1.0).cos() - 3.0f64.cos();
        assert!((c.value(i)[0] - want).abs() < 1e-4);
    }

    #[test]
    fn convolution_rejects_heavy_kernel_and_bad_weight() {
        let f = SampledPath::from_scalar_fn(-100.0, 100.0, 0.1, pulse()).unwrap();
        let heavy = Kernel::from_fn(|_| 1e6, 0.0, 2.0, 0.1);
        let h = geometric_schedule(10.0, 2.0, 4);
        assert!(convolve_and_test(&f, &heavy, &Weight::unit(), &h, &Pap0Config::default()).is_err());
        let k = Kernel::from_fn(|_| 1.0, 0.0, 1.0, 0.1);
        let w = Weight::expression("exp(t^2/10)").unwrap();
        assert!(convolve_and_test(&f, &k, &w, &h, &Pap0Config::default()).is_err());
    }

    #[test]
    fn compose_requires_lipschitz() {
        let h = WpapDecomposition {
            ap_part: APSignal::sin(1.0, 1.0),
            ergodic_part: SampledPath::from_scalar_fn(-100.0, 100.0, 0.1, pulse()).unwrap(),
            weight: Weight::unit(),
        };
        let id = |_t: f64, z: &[f64], out: &mut [f64]| out[0] = z[0];
        let forcing = SplitForcing {
            out_dim: 1,
            ap_part: &id,
            ergodic_part: None,
            lipschitz: None,
        };
        let r = compose_and_test(&forcing, &h, &geometric_schedule(10.0, 2.0, 4), &Pap0Config::default());
        assert!(r.is_err());
    }

    #[test]
    fn reflection_mirrors_grid() {
        let p = SampledPath::from_scalar_fn(-2.0, 3.0, 0.5, |t| t).unwrap();
        let r = p.reflect();
        assert_eq!(r.t_min(), -3.0);
        assert_eq!(r.value(0)[0], 3.0);
        assert_eq!(r.t_max(), 2.0);
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let p = SampledPath::from_scalar_fn(0.0, 2.0, 0.1, |t| t * t * t - t).unwrap();
        let mut out = [0.0];
        for t in [0.05, 0.97, 1.93] {
            p.interpolate_cubic(t, &mut out);
            assert!((out[0] - (t * t * t - t)).abs() < 1e-12);
        }
    }
}
