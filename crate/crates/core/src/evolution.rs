//! Evolution families `U(t,s)` generated by matrix families `A(t)`,
//! exponential dichotomies, interpolation α-norms and sampled checks of the
//! decay estimates used by the fixed-point argument.
//!
//! Three family forms are supported. Constant and scalar-modulated families
//! `A(t) = d(t)·A` commute with themselves at all times, so `U(t,s)` is the
//! exact exponential `exp((D(t) − D(s))·A)` with `D' = d`. Tabulated and custom
//! families are propagated with a fourth-order Magnus stepper.

use crate::ap::APSignal;
use crate::error::{Error, Result};
use crate::report::least_squares;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Serialize, Serializer};
use std::fmt;
use std::sync::Arc;

pub type Mat = DMatrix<f64>;

/// Eigenvalues closer than this to the imaginary axis reject a dichotomy.
pub const SPECTRAL_GAP_TOL: f64 = 1e-6;

/// Bounds above this count as infinite in the resolvent and Hölder checks.
pub const BOUND_CAP: f64 = 1e6;

pub(crate) fn serialize_mat<S: Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
    mat_rows(m).serialize(s)
}

/// Row-major nested vectors, for JSON output.
pub fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Largest singular value.
pub fn op_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn op_norm_c(m: &DMatrix<Complex64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

fn commutator(a: &Mat, b: &Mat) -> Mat {
    a * b - b * a
}

#[derive(Clone)]
pub enum FamilyForm {
    Constant,
    /// `A(t) = (offset + d(t))·A`.
    Modulated { d: APSignal, offset: f64 },
    /// Piecewise-linear interpolation between tabulated matrices, clamped
    /// outside the table.
    Tabulated { times: Vec<f64>, mats: Vec<Mat> },
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> Mat + Send + Sync>,
    },
}

/// Hölder metadata `‖(A(t) − A(s))R(ω, A(r))‖ ≤ L|t − s|^γ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Hoelder {
    pub l: f64,
    pub gamma: f64,
}

/// A matrix-valued family `t ↦ A(t)` with its resolvent shift `ω`.
#[derive(Clone)]
pub struct LinearFamily {
    base: Mat,
    form: FamilyForm,
    pub omega: f64,
    pub hoelder: Option<Hoelder>,
}

impl fmt::Debug for LinearFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinearFamily({}, dim {})", self.label(), self.dim())
    }
}

fn check_matrix(op: &'static str, a: &Mat) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::pre(op, format!("matrix must be square and non-empty, got {}x{}", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::pre(op, "matrix entries must be finite"));
    }
    Ok(())
}

fn check_invertible(op: &'static str, a: &Mat, t: f64) -> Result<()> {
    let sv = a.clone().svd(false, false).singular_values;
    if sv.min() <= 1e-12 * sv.max().max(1.0) {
        return Err(Error::pre(op, format!("A({t}) is singular; 0 must lie in the resolvent set")));
    }
    Ok(())
}

impl LinearFamily {
    pub fn constant(a: Mat) -> Result<Self> {
        const OP: &str = "evolution::LinearFamily::constant";
        check_matrix(OP, &a)?;
        check_invertible(OP, &a, 0.0)?;
        Ok(Self {
            base: a,
            form: FamilyForm::Constant,
            omega: 0.0,
            hoelder: Some(Hoelder { l: 0.0, gamma: 1.0 }),
        })
    }

    /// `A(t) = (offset + d(t))·A`. Requires `offset − Σ|c_k| > 0` over the
    /// non-constant terms, which bounds `d` away from zero on all of ℝ.
    pub fn modulated(a: Mat, d: APSignal, offset: f64) -> Result<Self> {
        const OP: &str = "evolution::LinearFamily::modulated";
        check_matrix(OP, &a)?;
        check_invertible(OP, &a, 0.0)?;
        if d.dim() != 1 || !d.is_conjugate_symmetric(1e-12) {
            return Err(Error::pre(OP, "modulation must be a real scalar almost periodic signal"));
        }
        let mean = offset + d.coefficient(0.0)[0].re;
        let osc: f64 = d.terms().iter().filter(|t| t.frequency != 0.0).map(|t| t.coefficients[0].norm()).sum();
        if !(mean - osc > 0.0) {
            return Err(Error::pre(OP, format!("inf d ≥ {} is not positive", mean - osc)));
        }
        // (d(t) − d(s))·A·(−d(r)A)⁻¹ has norm |d(t) − d(s)| / d(r).
        let l = d.lipschitz() / (mean - osc);
        Ok(Self {
            base: a,
            form: FamilyForm::Modulated { d, offset },
            omega: 0.0,
            hoelder: Some(Hoelder { l, gamma: 1.0 }),
        })
    }

    pub fn tabulated(times: Vec<f64>, mats: Vec<Mat>) -> Result<Self> {
        const OP: &str = "evolution::LinearFamily::tabulated";
        if times.len() < 2 || times.len() != mats.len() {
            return Err(Error::pre(OP, "need at least two (time, matrix) pairs of equal count"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::pre(OP, "times must be strictly increasing"));
        }
        for (t, m) in times.iter().zip(&mats) {
            check_matrix(OP, m)?;
            if m.nrows() != mats[0].nrows() {
                return Err(Error::pre(OP, "all matrices must share one dimension"));
            }
            check_invertible(OP, m, *t)?;
        }
        let base = mats[0].clone();
        Ok(Self {
            base,
            form: FamilyForm::Tabulated { times, mats },
            omega: 0.0,
            hoelder: None,
        })
    }

    /// Arbitrary family given by a closure; `A(0)` must be invertible.
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> Mat + Send + Sync + 'static) -> Result<Self> {
        const OP: &str = "evolution::LinearFamily::custom";
        let base = f(0.0);
        check_matrix(OP, &base)?;
        check_invertible(OP, &base, 0.0)?;
        Ok(Self {
            base,
            form: FamilyForm::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
            omega: 0.0,
            hoelder: None,
        })
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_hoelder(mut self, l: f64, gamma: f64) -> Self {
        self.hoelder = Some(Hoelder { l, gamma });
        self
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    pub fn form(&self) -> &FamilyForm {
        &self.form
    }

    /// The constant matrix of commuting forms; `A(0)` otherwise.
    pub fn base(&self) -> &Mat {
        &self.base
    }

    pub fn is_commuting(&self) -> bool {
        matches!(self.form, FamilyForm::Constant | FamilyForm::Modulated { .. })
    }

    pub fn label(&self) -> String {
        match &self.form {
            FamilyForm::Constant => "constant".into(),
            FamilyForm::Modulated { offset, .. } => format!("modulated(offset {offset})"),
            FamilyForm::Tabulated { times, .. } => format!("tabulated({} nodes)", times.len()),
            FamilyForm::Custom { name, .. } => format!("custom({name})"),
        }
    }

    /// Scalar factor of commuting forms.
    pub fn modulation(&self, t: f64) -> Option<f64> {
        match &self.form {
            FamilyForm::Constant => Some(1.0),
            FamilyForm::Modulated { d, offset } => Some(offset + d.value(t)),
            _ => None,
        }
    }

    /// `∫_s^t d` for commuting forms.
    pub fn modulation_integral(&self, s: f64, t: f64) -> Option<f64> {
        match &self.form {
            FamilyForm::Constant => Some(t - s),
            FamilyForm::Modulated { d, offset } => Some(offset * (t - s) + d.integral(s, t)),
            _ => None,
        }
    }

    pub fn at(&self, t: f64) -> Mat {
        match &self.form {
            FamilyForm::Constant => self.base.clone(),
            FamilyForm::Modulated { .. } => &self.base * self.modulation(t).expect("commuting"),
            FamilyForm::Tabulated { times, mats } => {
                if t <= times[0] {
                    return mats[0].clone();
                }
                let n = times.len();
                if t >= times[n - 1] {
                    return mats[n - 1].clone();
                }
                let i = times.partition_point(|&x| x <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                &mats[i] * (1.0 - w) + &mats[i + 1] * w
            }
            FamilyForm::Custom { f, .. } => f(t),
        }
    }
}

/// Step control for the Magnus stepper.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepperConfig {
    /// Maximum step of the Magnus integrator.
    pub step: f64,
    /// Target accuracy reported with the propagators.
    pub tol: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self { step: 0.01, tol: 1e-10 }
    }
}

/// A family together with the means of evaluating its propagator.
#[derive(Debug, Clone)]
pub struct EvolutionFamily {
    pub family: LinearFamily,
    pub stepper: StepperConfig,
}

const GAUSS2: f64 = 0.288_675_134_594_812_9; // √3/6

fn checked_exp(op: &'static str, m: Mat) -> Result<Mat> {
    let e = m.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::num(op, "propagator overflow; reduce the step or the horizon"));
    }
    Ok(e)
}

impl EvolutionFamily {
    pub fn new(family: LinearFamily, stepper: StepperConfig) -> Self {
        Self { family, stepper }
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// Fourth-order Magnus exponent over `[t0, t0 + h]`.
    pub fn magnus_exponent(&self, t0: f64, h: f64) -> Mat {
        if let Some(int) = self.family.modulation_integral(t0, t0 + h) {
            return &self.family.base * int;
        }
        let a1 = self.family.at(t0 + (0.5 - GAUSS2) * h);
        let a2 = self.family.at(t0 + (0.5 + GAUSS2) * h);
        (&a1 + &a2) * (0.5 * h) + commutator(&a2, &a1) * (3f64.sqrt() * h * h / 12.0)
    }

    /// `U(t, s)`. Commuting forms use the exact exponential; other forms
    /// chain Magnus steps of width at most `stepper.step`.
    pub fn propagator(&self, t: f64, s: f64) -> Result<Mat> {
        const OP: &str = "evolution::propagate";
        if !(t.is_finite() && s.is_finite()) {
            return Err(Error::pre(OP, "times must be finite"));
        }
        let n = self.dim();
        if t == s {
            return Ok(Mat::identity(n, n));
        }
        if let Some(int) = self.family.modulation_integral(s, t) {
            return checked_exp(OP, &self.family.base * int);
        }
        let steps = ((t - s).abs() / self.stepper.step).ceil().max(1.0) as usize;
        let h = (t - s) / steps as f64;
        let mut u = Mat::identity(n, n);
        for k in 0..steps {
            let e = checked_exp(OP, self.magnus_exponent(s + k as f64 * h, h))?;
            u = e * u;
        }
        Ok(u)
    }

    pub fn propagate(&self, t: f64, s: f64, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::pre("evolution::propagate", format!("vector has length {}, expected {}", x.len(), self.dim())));
        }
        let u = self.propagator(t, s)?;
        Ok((u * DVector::from_column_slice(x)).iter().copied().collect())
    }
}

/// Largest relative cocycle defect `‖U(t,s) − U(t,r)U(r,s)‖ / max(1, ‖U(t,s)‖)`
/// over triples `(t, r, s)` with `t ≥ r ≥ s`.
pub fn cocycle_defect(ef: &EvolutionFamily, triples: &[(f64, f64, f64)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(t, r, s) in triples {
        if !(t >= r && r >= s) {
            return Err(Error::pre("evolution::propagate", format!("triple ({t}, {r}, {s}) is not ordered")));
        }
        let direct = ef.propagator(t, s)?;
        let split = ef.propagator(t, r)? * ef.propagator(r, s)?;
        worst = worst.max(op_norm(&(&direct - split)) / op_norm(&direct).max(1.0));
    }
    Ok(worst)
}

/// Ordered triples `s ≤ r ≤ t` drawn from a seeded generator on `[−span, span]`.
pub fn sample_triples(count: usize, span: f64, seed: u64) -> Vec<(f64, f64, f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut v = [0.0; 3].map(|_| rng.random_range(-span..=span));
            v.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
            (v[0], v[1], v[2])
        })
        .collect()
}

/// Sign function by scaled Newton iteration `S ← (μS + (μS)⁻¹)/2`.
pub fn matrix_sign(a: &Mat) -> Result<Mat> {
    const OP: &str = "evolution::matrix_sign";
    let n = a.nrows();
    let mut s = a.clone();
    for _ in 0..100 {
        let inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::num(OP, "iterate became singular"))?;
        let det = s.determinant().abs();
        let mu = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / n as f64)
        } else {
            1.0
        };
        let next = (&s * mu + inv / mu) * 0.5;
        let diff = (&next - &s).norm();
        s = next;
        if diff <= 1e-13 * s.norm() {
            break;
        }
    }
    // Unscaled polishing steps.
    for _ in 0..3 {
        let inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::num(OP, "iterate became singular"))?;
        s = (&s + inv) * 0.5;
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::num(OP, "iteration diverged"));
    }
    Ok(s)
}

/// Smallest distance of the spectrum to the imaginary axis, with the counts
/// of eigenvalues in the open left and right half planes.
pub fn spectral_split(a: &Mat) -> (f64, usize, usize) {
    let eig = a.clone().complex_eigenvalues();
    let gap = eig.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let stable = eig.iter().filter(|z| z.re < 0.0).count();
    (gap, stable, eig.len() - stable)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecaySample {
    pub tau: f64,
    pub stable_norm: f64,
    pub unstable_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyChecks {
    /// `‖P² − P‖`.
    pub idempotence_defect: f64,
    /// Max of `‖U(t,s)P − P U(t,s)‖` on the sampled pairs.
    pub commutation_defect: f64,
    /// Max of `‖U(t,s)P‖ / (N e^{−δ(t−s)})` (≤ 1 when the bound holds).
    pub stable_bound_ratio: f64,
    /// Max of `‖Ũ_Q(t,s)Q‖ / (N e^{−δ(s−t)})`.
    pub unstable_bound_ratio: f64,
    pub samples: usize,
}

/// Dichotomy projections and fitted constants.
#[derive(Debug, Clone, Serialize)]
pub struct DichotomyData {
    #[serde(serialize_with = "serialize_mat")]
    pub p: Mat,
    #[serde(serialize_with = "serialize_mat")]
    pub q: Mat,
    pub n_const: f64,
    pub delta: f64,
    pub delta_stable: f64,
    pub delta_unstable: Option<f64>,
    pub stable_dim: usize,
    pub unstable_dim: usize,
    pub spectral_gap: f64,
    /// Sampled bound `c` with `‖A(s)Q(s)‖ ≤ c`.
    pub a_q_bound: f64,
    pub checks: DichotomyChecks,
    pub curve: Vec<DecaySample>,
    #[serde(skip)]
    a_p: Mat,
    #[serde(skip)]
    a_q: Mat,
}

impl DichotomyData {
    pub fn has_unstable_part(&self) -> bool {
        self.unstable_dim > 0
    }

    /// `A·P` for commuting forms, `A(0)` otherwise.
    pub fn stable_generator(&self) -> &Mat {
        &self.a_p
    }

    /// `A·Q` for commuting forms, zero otherwise.
    pub fn unstable_generator(&self) -> &Mat {
        &self.a_q
    }
}

/// Sampling used to fit `N` and `δ`.
#[derive(Debug, Clone)]
pub struct DichotomyGrid {
    pub s_values: Vec<f64>,
    pub taus: Vec<f64>,
    /// Only `τ` inside this range enter the rate fit.
    pub fit_range: (f64, f64),
}

impl Default for DichotomyGrid {
    fn default() -> Self {
        let mut taus = vec![0.0, 0.05, 0.1, 0.25];
        taus.extend((0..40).map(|k| 0.5 + 19.5 * k as f64 / 39.0));
        Self {
            s_values: (0..7).map(|j| -15.0 + 5.0 * j as f64).collect(),
            taus,
            fit_range: (0.5, 20.0),
        }
    }
}

/// Norms below this are treated as underflow and left out of rate fits.
const UNDERFLOW: f64 = 1e-250;

fn fit_rate(curve: &[(f64, f64)], range: (f64, f64)) -> Option<f64> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(t, v)| *t >= range.0 && *t <= range.1 && *v > UNDERFLOW)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    Some(-crate::report::ls_slope(&pts))
}

/// Stable-branch propagator `U(t,s)P` for `t ≥ s`.
fn stable_propagator(ef: &EvolutionFamily, dd_ap: &Mat, p: &Mat, t: f64, s: f64) -> Result<Mat> {
    match ef.family.modulation_integral(s, t) {
        Some(int) => Ok(checked_exp("evolution::green_kernel", dd_ap * int)? * p),
        None => Ok(ef.propagator(t, s)? * p),
    }
}

/// Unstable-branch propagator `Ũ_Q(t,s)Q` for `t ≤ s` (commuting forms only).
fn unstable_propagator(ef: &EvolutionFamily, dd_aq: &Mat, q: &Mat, t: f64, s: f64) -> Result<Mat> {
    let int = ef
        .family
        .modulation_integral(s, t)
        .ok_or_else(|| Error::pre("evolution::green_kernel", "unstable branch needs a commuting family"))?;
    Ok(checked_exp("evolution::green_kernel", dd_aq * int)? * q)
}

/// Spectral projection onto the stable part and fitted dichotomy constants.
///
/// Commuting forms use the sign function of `A`; other forms are accepted
/// only when every sampled `A(t)` is stable, with `P = I`.
pub fn dichotomy(ef: &EvolutionFamily, grid: &DichotomyGrid) -> Result<DichotomyData> {
    const OP: &str = "evolution::dichotomy";
    let n = ef.dim();
    let eye = Mat::identity(n, n);
    let (p, gap, stable_dim, unstable_dim) = if ef.family.is_commuting() {
        let a = ef.family.base();
        let (gap, stable, unstable) = spectral_split(a);
        if gap < SPECTRAL_GAP_TOL {
            return Err(Error::pre(OP, format!("eigenvalue within {gap:e} of the imaginary axis; no hyperbolicity")));
        }
        let sign = matrix_sign(a)?;
        ((&eye - sign) * 0.5, gap, stable, unstable)
    } else {
        let mut gap = f64::INFINITY;
        for &s in &grid.s_values {
            for &tau in &grid.taus {
                let (g, _, unstable) = spectral_split(&ef.family.at(s + tau));
                if unstable > 0 {
                    return Err(Error::pre(
                        OP,
                        format!("A({}) has unstable eigenvalues; general families need every A(t) stable", s + tau),
                    ));
                }
                gap = gap.min(g);
            }
        }
        if gap < SPECTRAL_GAP_TOL {
            return Err(Error::pre(OP, "eigenvalue on the imaginary axis; no hyperbolicity"));
        }
        (eye.clone(), gap, n, 0)
    };
    let q = &eye - &p;
    let (a_p, a_q) = if ef.family.is_commuting() {
        (ef.family.base() * &p, ef.family.base() * &q)
    } else {
        (ef.family.base().clone(), Mat::zeros(n, n))
    };

    let mut stable_env = vec![0.0f64; grid.taus.len()];
    let mut unstable_env = vec![0.0f64; grid.taus.len()];
    let mut commutation_defect = 0.0f64;
    let mut samples = 0;
    let mut a_q_bound = 0.0f64;
    for &s in &grid.s_values {
        a_q_bound = a_q_bound.max(op_norm(&(ef.family.at(s) * &q)));
        let mut u = Mat::identity(n, n);
        let mut last = 0.0;
        for (k, &tau) in grid.taus.iter().enumerate() {
            // Chain propagators along the τ grid so general families are
            // stepped once per starting time.
            u = ef.propagator(s + tau, s + last)? * u;
            last = tau;
            commutation_defect = commutation_defect.max((&u * &p - &p * &u).norm());
            stable_env[k] = stable_env[k].max(op_norm(&(&u * &p)));
            if unstable_dim > 0 {
                let v = unstable_propagator(ef, &a_q, &q, s, s + tau)?;
                unstable_env[k] = unstable_env[k].max(op_norm(&v));
            }
            samples += 1;
        }
    }
    let curve_s: Vec<(f64, f64)> = grid.taus.iter().copied().zip(stable_env.iter().copied()).collect();
    let curve_u: Vec<(f64, f64)> = grid.taus.iter().copied().zip(unstable_env.iter().copied()).collect();
    let delta_stable = if stable_dim > 0 {
        fit_rate(&curve_s, grid.fit_range).ok_or_else(|| Error::num(OP, "too few samples for the stable rate fit"))?
    } else {
        f64::INFINITY
    };
    let delta_unstable = if unstable_dim > 0 {
        Some(fit_rate(&curve_u, grid.fit_range).ok_or_else(|| Error::num(OP, "too few samples for the unstable rate fit"))?)
    } else {
        None
    };
    let delta = delta_stable.min(delta_unstable.unwrap_or(f64::INFINITY));
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::num(OP, format!("fitted decay rate {delta} is not positive")));
    }
    let mut n_const = 1.0f64;
    for (k, &tau) in grid.taus.iter().enumerate() {
        n_const = n_const.max(stable_env[k] * (delta * tau).exp());
        n_const = n_const.max(unstable_env[k] * (delta * tau).exp());
    }
    let bound = |k: usize| n_const * (-delta * grid.taus[k]).exp();
    let stable_bound_ratio = (0..grid.taus.len()).map(|k| stable_env[k] / bound(k)).fold(0.0, f64::max);
    let unstable_bound_ratio = (0..grid.taus.len()).map(|k| unstable_env[k] / bound(k)).fold(0.0, f64::max);
    Ok(DichotomyData {
            checks: DichotomyChecks {
                idempotence_defect: (&p * &p - &p).norm(),
                commutation_defect,
                stable_bound_ratio,
                unstable_bound_ratio,
                samples,
            },
            curve: grid
                .taus
                .iter()
                .enumerate()
                .map(|(k, &tau)| DecaySample {
                    tau,
                    stable_norm: stable_env[k],
                    unstable_norm: unstable_env[k],
                })
                .collect(),
            p,
            q,
            n_const,
            delta,
            delta_stable,
            delta_unstable,
            stable_dim,
            unstable_dim,
            spectral_gap: gap,
            a_q_bound,
            a_p,
            a_q,
    })
}

/// Dichotomy Green kernel: `U(t,s)P(s)x` for `t ≥ s` and `−Ũ_Q(t,s)Q(s)x`
/// for `t < s`.
pub fn green_matrix(ef: &EvolutionFamily, dd: &DichotomyData, t: f64, s: f64) -> Result<Mat> {
    let n = ef.dim();
    if t >= s {
        return stable_propagator(ef, &dd.a_p, &dd.p, t, s);
    }
    if !dd.has_unstable_part() {
        return Ok(Mat::zeros(n, n));
    }
    Ok(-unstable_propagator(ef, &dd.a_q, &dd.q, t, s)?)
}

pub fn green_kernel(ef: &EvolutionFamily, dd: &DichotomyData, t: f64, s: f64, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != ef.dim() {
        return Err(Error::pre("evolution::green_kernel", "vector length does not match the family"));
    }
    let g = green_matrix(ef, dd, t, s)?;
    Ok((g * DVector::from_column_slice(x)).iter().copied().collect())
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// 61 points on `[1e-3, 1e3]`.
pub fn default_r_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 61)
}

/// The default grid widened by three decades on either side of the spectrum
/// of `A − ω`, at ten points per decade.
pub fn r_grid_for(a: &Mat, omega: f64) -> Vec<f64> {
    let eig = a.clone().complex_eigenvalues();
    let mags: Vec<f64> = eig.iter().map(|z| (z - omega).norm()).collect();
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min).max(1e-12);
    let hi = mags.iter().copied().fold(0.0, f64::max);
    let lo = (lo * 1e-3).min(1e-3);
    let hi = (hi * 1e3).max(1e3);
    let decades = (hi / lo).log10();
    log_grid(lo, hi, (decades * 10.0).ceil() as usize + 1)
}

/// Precomputed `M_r = r^α (A−ω) R(r, A−ω)` over an `r` grid, so that
/// `‖x‖_α = max_r ‖M_r x‖`.
#[derive(Debug, Clone)]
pub struct AlphaNormOp {
    pub alpha: f64,
    pub omega: f64,
    pub r_grid: Vec<f64>,
    mats: Vec<Mat>,
    /// `(A − ω)⁻¹`.
    b_inv: Mat,
}

impl AlphaNormOp {
    pub fn new(a: &Mat, omega: f64, alpha: f64, r_grid: Vec<f64>) -> Result<Self> {
        const OP: &str = "evolution::alpha_norm";
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::pre(OP, format!("alpha = {alpha} outside [0, 1)")));
        }
        if r_grid.len() < 2 || r_grid.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::pre(OP, "r grid must hold positive values"));
        }
        let span = r_grid.iter().copied().fold(0.0, f64::max) / r_grid.iter().copied().fold(f64::INFINITY, f64::min);
        if span < 1e6 * (1.0 - 1e-9) {
            return Err(Error::pre(OP, "r grid must span at least six decades"));
        }
        let n = a.nrows();
        let eye = Mat::identity(n, n);
        let b = a - &eye * omega;
        let b_inv = b
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::num(OP, "A − ω is singular"))?;
        let mut mats = Vec::with_capacity(r_grid.len());
        for &r in &r_grid {
            let res = (&eye * r - &b)
                .try_inverse()
                .ok_or_else(|| Error::num(OP, format!("r = {r} lies in the spectrum of A − ω")))?;
            let m = &b * res * r.powf(alpha);
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::num(OP, format!("resolvent at r = {r} is not finite")));
            }
            mats.push(m);
        }
        Ok(Self {
            alpha,
            omega,
            r_grid,
            mats,
            b_inv,
        })
    }

    /// Grid chosen by [`r_grid_for`].
    pub fn for_matrix(a: &Mat, omega: f64, alpha: f64) -> Result<Self> {
        Self::new(a, omega, alpha, r_grid_for(a, omega))
    }

    pub fn dim(&self) -> usize {
        self.b_inv.nrows()
    }

    /// `(‖x‖_α, maximizing r)`.
    pub fn norm_with_arg(&self, x: &[f64]) -> (f64, f64) {
        if self.alpha == 0.0 {
            return (x.iter().map(|v| v * v).sum::<f64>().sqrt(), 0.0);
        }
        let n = x.len();
        let mut best = (0.0, self.r_grid[0]);
        let mut y = vec![0.0; n];
        for (m, &r) in self.mats.iter().zip(&self.r_grid) {
            for (i, yi) in y.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, xj) in x.iter().enumerate() {
                    acc += m[(i, j)] * xj;
                }
                *yi = acc;
            }
            let v = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if v > best.0 {
                best = (v, r);
            }
        }
        best
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.norm_with_arg(x).0
    }

    /// Operator norm of `L : X → X_α`, i.e. `max_r ‖M_r L‖₂`.
    pub fn op_norm_from(&self, l: &Mat) -> f64 {
        if self.alpha == 0.0 {
            return op_norm(l);
        }
        self.mats.iter().map(|m| op_norm(&(m * l))).fold(0.0, f64::max)
    }

    /// Upper bound of `‖L‖` as a map `X_α → X`: `min_r ‖L M_r⁻¹‖₂`, using
    /// `‖M_r x‖ ≤ ‖x‖_α`.
    pub fn op_norm_into_ambient(&self, l: &Mat) -> f64 {
        if self.alpha == 0.0 {
            return op_norm(l);
        }
        let n = self.dim();
        let eye = Mat::identity(n, n);
        self.r_grid
            .iter()
            .map(|&r| {
                // M_r⁻¹ = r^{−α} (r − B) B⁻¹.
                let b = self.b_inv.clone().try_inverse().expect("invertible");
                let inv = (&eye * r - b) * &self.b_inv * r.powf(-self.alpha);
                op_norm(&(l * inv))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// α-norm of one vector.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaNorm {
    pub alpha: f64,
    pub value: f64,
    pub argmax_r: f64,
    pub r_grid_len: usize,
}

/// `sup_r ‖r^α (A(t)−ω) R(r, A(t)−ω) x‖` over `r_grid`.
pub fn alpha_norm(family: &LinearFamily, t: f64, x: &[f64], alpha: f64, r_grid: &[f64]) -> Result<AlphaNorm> {
    if x.len() != family.dim() {
        return Err(Error::pre("evolution::alpha_norm", "vector length does not match the family"));
    }
    let op = AlphaNormOp::new(&family.at(t), family.omega, alpha, r_grid.to_vec())?;
    let (value, argmax_r) = op.norm_with_arg(x);
    Ok(AlphaNorm {
        alpha,
        value,
        argmax_r,
        r_grid_len: r_grid.len(),
    })
}

/// Sampled constants of the embedding `X_β ↪ X_α` and of the interpolation
/// inequality `‖y‖_α ≤ c(α)‖y‖^{1−α}‖Ay‖^α`.
#[derive(Debug, Clone, Serialize)]
pub struct InterpolationConstants {
    pub alpha: f64,
    pub beta: f64,
    pub k_embedding: f64,
    pub c_interpolation: f64,
    pub vectors: usize,
}

pub fn interpolation_constants(
    a: &Mat,
    omega: f64,
    alpha: f64,
    beta: f64,
    vectors: &[Vec<f64>],
) -> Result<InterpolationConstants> {
    const OP: &str = "evolution::interpolation_constants";
    if !(alpha < beta) {
        return Err(Error::pre(OP, "need alpha < beta"));
    }
    let na = AlphaNormOp::for_matrix(a, omega, alpha)?;
    let nb = AlphaNormOp::for_matrix(a, omega, beta)?;
    let mut k = 0.0f64;
    let mut c = 0.0f64;
    for x in vectors {
        let xa = na.norm(x);
        let xb = nb.norm(x);
        let plain = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if plain == 0.0 {
            continue;
        }
        let ax = (a * DVector::from_column_slice(x)).norm();
        k = k.max(xa / xb);
        c = c.max(xa / (plain.powf(1.0 - alpha) * ax.powf(alpha)));
    }
    Ok(InterpolationConstants {
        alpha,
        beta,
        k_embedding: k,
        c_interpolation: c,
        vectors: vectors.len(),
    })
}

/// Exponents `0 ≤ μ < α < β < 1` with `2α > μ + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Exponents {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Exponents {
    pub fn new(mu: f64, alpha: f64, beta: f64) -> Result<Self> {
        let e = Self { mu, alpha, beta };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        const OP: &str = "evolution::Exponents";
        let Self { mu, alpha, beta } = *self;
        if !(0.0 <= mu && mu < alpha && alpha < beta && beta < 1.0) {
            return Err(Error::pre(OP, format!("need 0 ≤ μ < α < β < 1, got μ={mu}, α={alpha}, β={beta}")));
        }
        if !(2.0 * alpha > mu + 1.0) {
            return Err(Error::pre(OP, format!("need 2α > μ + 1, got α={alpha}, μ={mu}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimateTarget {
    /// `‖U(t,s)P x‖_α ≤ c(α) e^{−δ(t−s)/2} (t−s)^{−α} ‖x‖`.
    #[serde(rename = "stable_alpha")]
    StableAlpha,
    /// `‖Ũ_Q(s,t)Q x‖_α ≤ m(α) e^{−δ(t−s)} ‖x‖`.
    #[serde(rename = "unstable_alpha")]
    UnstableAlpha,
    /// `‖A(s)Ũ_Q(t,s)Q x‖_α ≤ m(α,β) e^{−δ(s−t)} ‖x‖_β`.
    #[serde(rename = "beta1")]
    Beta1,
    /// `‖A(s)U(t,s)P x‖_α ≤ n(α,μ) (t−s)^{−α} e^{−δ(t−s)/4} ‖x‖_β`.
    #[serde(rename = "beta2")]
    Beta2,
}

impl EstimateTarget {
    pub const ALL: [EstimateTarget; 4] = [Self::StableAlpha, Self::UnstableAlpha, Self::Beta1, Self::Beta2];

    pub fn name(self) -> &'static str {
        match self {
            Self::StableAlpha => "stable_alpha",
            Self::UnstableAlpha => "unstable_alpha",
            Self::Beta1 => "beta1",
            Self::Beta2 => "beta2",
        }
    }

    /// Required decay rate as a multiple of δ.
    pub fn rate_factor(self) -> f64 {
        match self {
            Self::StableAlpha => 0.5,
            Self::UnstableAlpha | Self::Beta1 => 1.0,
            Self::Beta2 => 0.25,
        }
    }

    fn uses_beta(self) -> bool {
        matches!(self, Self::Beta1 | Self::Beta2)
    }

    fn unstable(self) -> bool {
        matches!(self, Self::UnstableAlpha | Self::Beta1)
    }

    fn structural(self, tau: f64, delta: f64, alpha: f64) -> f64 {
        match self {
            Self::StableAlpha => (-0.5 * delta * tau).exp() * tau.powf(-alpha),
            Self::UnstableAlpha | Self::Beta1 => (-delta * tau).exp(),
            Self::Beta2 => tau.powf(-alpha) * (-0.25 * delta * tau).exp(),
        }
    }
}

/// Sample points for [`fit_estimate`].
#[derive(Debug, Clone)]
pub struct FitGrid {
    pub s_values: Vec<f64>,
    /// Positive separations `|t − s|`, increasing.
    pub taus: Vec<f64>,
    /// Test vectors for the β-norm targets.
    pub vectors: Vec<Vec<f64>>,
}

impl FitGrid {
    /// Five base times, separations from 0.02 to 20, and the coordinate
    /// vectors, the real eigenvectors of `a` and `extra` seeded random
    /// vectors.
    pub fn standard(a: &Mat, extra: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let n = a.nrows();
        let mut vectors: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        if let Some(eig) = a.clone().try_symmetric_eigen_like() {
            vectors.extend(eig);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..extra {
            vectors.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
        let mut taus = vec![0.02, 0.05, 0.1, 0.2, 0.35];
        taus.extend((1..=40).map(|k| 0.5 * k as f64));
        Self {
            s_values: (0..5).map(|j| -10.0 + 5.0 * j as f64).collect(),
            taus,
            vectors,
        }
    }
}

trait RealEigenvectors {
    fn try_symmetric_eigen_like(self) -> Option<Vec<Vec<f64>>>;
}

impl RealEigenvectors for Mat {
    /// Eigenvectors of real eigenvalues via inverse iteration on `A − λ`.
    fn try_symmetric_eigen_like(self) -> Option<Vec<Vec<f64>>> {
        let n = self.nrows();
        let eig = self.clone().complex_eigenvalues();
        let mut out = Vec::new();
        for z in eig.iter().filter(|z| z.im.abs() < 1e-12) {
            let shift = z.re + 1e-10 * (1.0 + z.re.abs());
            let m = &self - Mat::identity(n, n) * shift;
            let lu = m.lu();
            let mut v = DVector::from_element(n, 1.0);
            for _ in 0..3 {
                v = lu.solve(&v)?;
                let nv = v.norm();
                if !(nv > 0.0 && nv.is_finite()) {
                    return None;
                }
                v /= nv;
            }
            out.push(v.iter().copied().collect());
        }
        Some(out)
    }
}

/// Fitted constant and decay of one estimate.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateFit {
    pub target: EstimateTarget,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub delta: f64,
    /// True when the relevant projection is zero and the estimate is empty.
    pub vacuous: bool,
    /// `sup` of the left side divided by the structural factor.
    pub prefactor: Option<f64>,
    /// Decay rate of `log y = a − rate·τ − p·log τ` fitted to the envelope.
    pub decay_rate: Option<f64>,
    pub power_exponent: Option<f64>,
    pub required_rate: f64,
    pub rate_tolerance: f64,
    pub rate_ok: bool,
    pub residuals: Vec<f64>,
    /// `(τ, envelope)` pairs.
    pub curve: Vec<(f64, f64)>,
}

/// Sample the left-hand side of `target` on the grid, with α- and β-norms
/// frozen at `A(0)`, and fit prefactor and decay.
pub fn fit_estimate(
    ef: &EvolutionFamily,
    dd: &DichotomyData,
    target: EstimateTarget,
    exps: &Exponents,
    grid: &FitGrid,
    rate_tol: f64,
) -> Result<EstimateFit> {
    const OP: &str = "evolution::fit_estimate";
    if target.uses_beta() {
        exps.validate()?;
    } else if !(0.0..=1.0).contains(&exps.alpha) {
        return Err(Error::pre(OP, "alpha outside [0, 1]"));
    }
    if grid.taus.iter().any(|t| !(*t > 0.0)) || grid.taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::pre(OP, "separations must be positive and increasing"));
    }
    let alpha = exps.alpha;
    let required_rate = target.rate_factor() * dd.delta;
    let vacuous = if target.unstable() {
        !dd.has_unstable_part()
    } else {
        dd.stable_dim == 0
    };
    let beta = target.uses_beta().then_some(exps.beta);
    if vacuous {
        return Ok(EstimateFit {
            target,
            alpha,
            beta,
            delta: dd.delta,
            vacuous,
            prefactor: None,
            decay_rate: None,
            power_exponent: None,
            required_rate,
            rate_tolerance: rate_tol,
            rate_ok: true,
            residuals: vec![],
            curve: vec![],
        });
    }
    let a0 = ef.family.at(0.0);
    let omega = ef.family.omega;
    let na = AlphaNormOp::for_matrix(&a0, omega, alpha.min(1.0 - 1e-12))?;
    let nb = if target.uses_beta() {
        Some(AlphaNormOp::for_matrix(&a0, omega, exps.beta)?)
    } else {
        None
    };
    let vec_norms: Vec<f64> = match &nb {
        Some(nb) => grid.vectors.iter().map(|x| nb.norm(x)).collect(),
        None => vec![],
    };
    let mut env = vec![0.0f64; grid.taus.len()];
    for &s in &grid.s_values {
        let mut u = Mat::identity(ef.dim(), ef.dim());
        let mut last = 0.0;
        for (k, &tau) in grid.taus.iter().enumerate() {
            let l = match target {
                tg @ (EstimateTarget::StableAlpha | EstimateTarget::Beta2) => {
                    // U(s+τ, s)P, chained along τ.
                    u = if ef.family.is_commuting() {
                        stable_propagator(ef, &dd.a_p, &dd.p, s + tau, s)?
                    } else {
                        ef.propagator(s + tau, s + last)? * &u
                    };
                    last = tau;
                    let up = if ef.family.is_commuting() { u.clone() } else { &u * &dd.p };
                    if tg == EstimateTarget::Beta2 {
                        ef.family.at(s) * up
                    } else {
                        up
                    }
                }
                EstimateTarget::UnstableAlpha => unstable_propagator(ef, &dd.a_q, &dd.q, s, s + tau)?,
                EstimateTarget::Beta1 => ef.family.at(s + tau) * unstable_propagator(ef, &dd.a_q, &dd.q, s, s + tau)?,
            };
            let lhs = match &nb {
                None => na.op_norm_from(&l),
                Some(_) => grid
                    .vectors
                    .iter()
                    .zip(&vec_norms)
                    .filter(|(_, xb)| **xb > 0.0)
                    .map(|(x, xb)| {
                        let y: Vec<f64> = (&l * DVector::from_column_slice(x)).iter().copied().collect();
                        na.norm(&y) / xb
                    })
                    .fold(0.0, f64::max),
            };
            env[k] = env[k].max(lhs);
        }
    }
    let curve: Vec<(f64, f64)> = grid.taus.iter().copied().zip(env.iter().copied()).collect();
    let prefactor = curve
        .iter()
        .map(|&(tau, v)| v / target.structural(tau, dd.delta, alpha))
        .fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = curve.iter().copied().filter(|(_, v)| *v > UNDERFLOW).collect();
    if pts.len() < 4 {
        return Err(Error::num(OP, "too few non-underflowing samples for the decay fit"));
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|(t, _)| vec![1.0, -t, -t.ln()]).collect();
    let y: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let coef = least_squares(&rows, &y).ok_or_else(|| Error::num(OP, "decay fit failed"))?;
    let residuals: Vec<f64> = rows
        .iter()
        .zip(&y)
        .map(|(r, yi)| yi - (coef[0] * r[0] + coef[1] * r[1] + coef[2] * r[2]))
        .collect();
    let rate = coef[1];
    Ok(EstimateFit {
        target,
        alpha,
        beta,
        delta: dd.delta,
        vacuous,
        prefactor: Some(prefactor),
        decay_rate: Some(rate),
        power_exponent: Some(coef[2]),
        required_rate,
        rate_tolerance: rate_tol,
        rate_ok: rate >= required_rate * (1.0 - rate_tol),
        residuals,
        curve,
    })
}

/// Finite sector `{ρe^{iφ} : |φ| ≤ θ}` grid.
#[derive(Debug, Clone)]
pub struct SectorGrid {
    pub theta: f64,
    pub radii: Vec<f64>,
    pub angles: usize,
}

impl SectorGrid {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            radii: log_grid(1e-3, 1e4, 29),
            angles: 25,
        }
    }

    pub fn points(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for &r in &self.radii {
            for k in 0..self.angles {
                let phi = -self.theta + 2.0 * self.theta * k as f64 / (self.angles - 1).max(1) as f64;
                out.push(Complex64::from_polar(r, phi));
            }
        }
        out
    }
}

/// Outcome of the sectorial resolvent and Hölder checks.
#[derive(Debug, Clone, Serialize)]
pub struct AtReport {
    pub theta: f64,
    /// Smallest `K` with `‖R(λ, A(t)−ω)‖ ≤ K/(1+|λ|)` on the grid.
    pub k_min: f64,
    pub resolvent_ok: bool,
    pub gamma: f64,
    /// Smallest `L` with `‖(A(t)−A(s))R(ω,A(r))‖ ≤ L|t−s|^γ` on the pairs.
    pub l_min: f64,
    pub worst_pair: Option<(f64, f64, f64)>,
    pub hoelder_ok: bool,
    pub passed: bool,
}

/// Default `(t, s, r)` triples: centers in `[−T, T]` including 0 and
/// separations from 1 down to 1e-9.
pub fn hoelder_pairs(t_max: f64, centers: usize) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    let c = centers.max(1);
    for i in 0..=c {
        let m = -t_max + 2.0 * t_max * i as f64 / c as f64;
        for k in 0..10 {
            let h = 10f64.powi(-k);
            out.push((m + 0.5 * h, m - 0.5 * h, m));
        }
    }
    out
}

pub fn check_at(
    family: &LinearFamily,
    times: &[f64],
    sector: &SectorGrid,
    triples: &[(f64, f64, f64)],
    gamma: f64,
) -> Result<AtReport> {
    const OP: &str = "evolution::check_AT";
    if times.is_empty() {
        return Err(Error::pre(OP, "need at least one sample time"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::pre(OP, "Hölder exponent must lie in (0, 1]"));
    }
    let n = family.dim();
    let eye_c = DMatrix::<Complex64>::identity(n, n);
    let pts = sector.points();
    let mut k_min = 0.0f64;
    for &t in times {
        let b = (family.at(t) - Mat::identity(n, n) * family.omega).map(|v| Complex64::new(v, 0.0));
        for &lam in &pts {
            let k = match (&eye_c * lam - &b).try_inverse() {
                Some(r) => (1.0 + lam.norm()) * op_norm_c(&r),
                None => f64::INFINITY,
            };
            k_min = k_min.max(k);
        }
    }
    let mut l_min = 0.0f64;
    let mut worst = None;
    for &(t, s, r) in triples {
        if t == s {
            continue;
        }
        let ar = family.at(r);
        let res = (Mat::identity(n, n) * family.omega - ar).try_inverse();
        let l = match res {
            Some(res) => op_norm(&((family.at(t) - family.at(s)) * res)) / (t - s).abs().powf(gamma),
            None => f64::INFINITY,
        };
        if l > l_min || worst.is_none() {
            l_min = l_min.max(l);
            worst = Some((t, s, r));
        }
    }
    let resolvent_ok = k_min.is_finite() && k_min < BOUND_CAP;
    let hoelder_ok = l_min.is_finite() && l_min < BOUND_CAP;
    Ok(AtReport {
        theta: sector.theta,
        k_min,
        resolvent_ok,
        gamma,
        l_min,
        worst_pair: worst,
        hoelder_ok,
        passed: resolvent_ok && hoelder_ok,
    })
}

/// Kernel `H(σ) = C σ^{−α₀} e^{−δσ/8}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct H4Kernel {
    pub c: f64,
    pub alpha0: f64,
    pub delta: f64,
}

impl H4Kernel {
    pub fn eval(&self, sigma: f64) -> f64 {
        self.c * sigma.powf(-self.alpha0) * (-self.delta * sigma / 8.0).exp()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct H4Report {
    pub tau: f64,
    pub max_lhs: f64,
    /// Smallest `ε` with `LHS ≤ ε H(t − s)` on the grid.
    pub eps_needed: f64,
    pub eps: f64,
    pub dominated: bool,
    pub samples: usize,
}

/// Measure `‖A(t+τ)U(t+τ,s+τ) − A(t)U(t,s)‖` on `(t, s)` pairs with `t > s`
/// and compare with `ε H(t − s)`. Scalar-modulated families only.
pub fn check_h4(
    ef: &EvolutionFamily,
    tau: f64,
    kernel: &H4Kernel,
    pairs: &[(f64, f64)],
    eps: f64,
) -> Result<H4Report> {
    const OP: &str = "evolution::check_H4";
    if !matches!(ef.family.form(), FamilyForm::Modulated { .. } | FamilyForm::Constant) {
        return Err(Error::pre(OP, "supported for scalar-modulated families only"));
    }
    let mut max_lhs = 0.0f64;
    let mut eps_needed = 0.0f64;
    let mut samples = 0;
    for &(t, s) in pairs {
        if !(t > s) {
            continue;
        }
        let lhs_m = ef.family.at(t + tau) * ef.propagator(t + tau, s + tau)? - ef.family.at(t) * ef.propagator(t, s)?;
        let lhs = op_norm(&lhs_m);
        max_lhs = max_lhs.max(lhs);
        eps_needed = eps_needed.max(lhs / kernel.eval(t - s));
        samples += 1;
    }
    Ok(H4Report {
        tau,
        max_lhs,
        eps_needed,
        eps,
        dominated: eps_needed <= eps,
        samples,
    })
}

/// Default `(t, s)` pairs for [`check_h4`].
pub fn h4_pairs(t_max: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..=20 {
        let s = -t_max + 2.0 * t_max * i as f64 / 20.0;
        for &g in &[0.05, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0] {
            out.push((s + g, s));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn diag(v: &[f64]) -> Mat {
        Mat::from_diagonal(&DVector::from_column_slice(v))
    }

    fn quasi() -> APSignal {
        APSignal::sin(1.0, 1.0).add(&APSignal::sin(2f64.sqrt(), 1.0))
    }

    #[test]
    fn scalar_and_diagonal_propagators() {
        let ef = EvolutionFamily::new(LinearFamily::constant(diag(&[-1.0])).unwrap(), StepperConfig::default());
        assert!((ef.propagate(1.0, 0.0, &[1.0]).unwrap()[0] - (-1f64).exp()).abs() < 1e-15);
        let ef = EvolutionFamily::new(LinearFamily::constant(diag(&[-1.0, 1.0])).unwrap(), StepperConfig::default());
        let y = ef.propagate(2.0, 0.0, &[1.0, 0.0]).unwrap();
        assert!((y[0] - (-2f64).exp()).abs() < 1e-15 && y[1] == 0.0);
    }

    #[test]
    fn modulated_propagator_uses_exact_integral() {
        let fam = LinearFamily::modulated(diag(&[-1.0]), APSignal::sin(1.0, 1.0), 2.0).unwrap();
        let ef = EvolutionFamily::new(fam, StepperConfig::default());
        let y = ef.propagate(PI, 0.0, &[1.0]).unwrap()[0];
        assert!((y - (-(2.0 * PI + 2.0)).exp()).abs() < 1e-15);
    }

    #[test]
    fn magnus_matches_exact_on_commuting_custom_family() {
        let exact = EvolutionFamily::new(
            LinearFamily::modulated(diag(&[-1.0, -3.0]), quasi(), 3.0).unwrap(),
            StepperConfig::default(),
        );
        let d = quasi();
        let custom = LinearFamily::custom("quasi", move |t| diag(&[-1.0, -3.0]) * (3.0 + d.value(t))).unwrap();
        let ef = EvolutionFamily::new(custom, StepperConfig { step: 0.02, tol: 1e-10 });
        let a = exact.propagator(1.7, -0.4).unwrap();
        let b = ef.propagator(1.7, -0.4).unwrap();
        assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_modulation() {
        assert!(LinearFamily::modulated(diag(&[-1.0]), APSignal::sin(1.0, 2.0), 1.5).is_err());
        assert!(LinearFamily::constant(diag(&[0.0, -1.0])).is_err());
    }

    #[test]
    fn sign_function_projection() {
        let a = Mat::from_row_slice(2, 2, &[-1.0, 3.0, 0.0, 2.0]);
        let s = matrix_sign(&a).unwrap();
        let p = (Mat::identity(2, 2) - s) * 0.5;
        assert!((&p * &p - &p).norm() < 1e-13);
        assert!((&a * &p - &p * &a).norm() < 1e-12);
        // Range of P is the eigenvector (1, 0) of −1.
        assert!((p[(0, 0)] - 1.0).abs() < 1e-13 && p[(1, 0)].abs() < 1e-13);
    }

    #[test]
    fn diagonal_dichotomy() {
        let ef = EvolutionFamily::new(
            LinearFamily::constant(diag(&[-1.0, 1.0])).unwrap().with_omega(2.0),
            StepperConfig::default(),
        );
        let dd = dichotomy(&ef, &DichotomyGrid::default()).unwrap();
        assert!((&dd.p - diag(&[1.0, 0.0])).norm() < 1e-14);
        assert!((dd.delta - 1.0).abs() < 1e-9);
        assert!((dd.n_const - 1.0).abs() < 1e-9);
        let g = green_kernel(&ef, &dd, 1.0, 0.0, &[1.0, 1.0]).unwrap();
        assert!((g[0] - (-1f64).exp()).abs() < 1e-15 && g[1] == 0.0);
        let g = green_kernel(&ef, &dd, 0.0, 1.0, &[1.0, 1.0]).unwrap();
        assert!(g[0] == 0.0 && (g[1] + (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn quasi_periodic_dichotomy_rate_exceeds_inf_d() {
        let fam = LinearFamily::modulated(diag(&[-1.0]), quasi(), 3.0).unwrap();
        let ef = EvolutionFamily::new(fam, StepperConfig::default());
        let dd = dichotomy(&ef, &DichotomyGrid::default()).unwrap();
        assert!(dd.q.norm() == 0.0);
        assert!(dd.delta >= 1.0, "δ = {}", dd.delta);
        assert!(dd.checks.stable_bound_ratio <= 1.0 + 1e-12);
        let g = green_kernel(&ef, &dd, -1.0, 0.0, &[1.0]).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn alpha_norm_calculus_examples() {
        let fam = LinearFamily::constant(diag(&[-1.0])).unwrap();
        let r = log_grid(1e-3, 1e3, 601);
        let v = alpha_norm(&fam, 0.0, &[1.0], 0.5, &r).unwrap();
        assert!((v.value - 0.5).abs() < 1e-6 && (v.argmax_r - 1.0).abs() < 1e-9);
        assert_eq!(alpha_norm(&fam, 0.0, &[0.0], 0.5, &r).unwrap().value, 0.0);
        let fam = LinearFamily::constant(diag(&[-1.0, -4.0])).unwrap();
        let v = alpha_norm(&fam, 0.0, &[0.0, 1.0], 0.5, &r).unwrap();
        // 4 is not on the grid; the neighbours are within 0.25% of it.
        assert!((v.value - 1.0).abs() < 1e-4 && (v.argmax_r - 4.0).abs() < 0.05);
        assert!(alpha_norm(&fam, 0.0, &[1.0, 0.0], 0.5, &log_grid(1.0, 10.0, 5)).is_err());
    }

    #[test]
    fn operator_norm_helpers_are_consistent() {
        let a = diag(&[-1.0, -4.0]);
        let op = AlphaNormOp::for_matrix(&a, 0.0, 0.6).unwrap();
        let l = Mat::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.7]);
        let into = op.op_norm_into_ambient(&Mat::identity(2, 2));
        let from = op.op_norm_from(&l);
        for x in [[1.0, 0.0], [0.3, -0.8], [0.0, 1.0]] {
            let lx: Vec<f64> = (&l * DVector::from_column_slice(&x)).iter().copied().collect();
            let nx = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!(op.norm(&lx) <= from * nx * (1.0 + 1e-12));
            assert!(nx <= into * op.norm(&x) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fits_on_diagonal_family() {
        let ef = EvolutionFamily::new(
            LinearFamily::constant(diag(&[-1.0, 1.0])).unwrap().with_omega(2.0),
            StepperConfig::default(),
        );
        let dd = dichotomy(&ef, &DichotomyGrid::default()).unwrap();
        let exps = Exponents::new(0.1, 0.6, 0.8).unwrap();
        let grid = FitGrid::standard(ef.family.base(), 3, 1);
        for t in EstimateTarget::ALL {
            let f = fit_estimate(&ef, &dd, t, &exps, &grid, 0.05).unwrap();
            assert!(!f.vacuous && f.rate_ok, "{:?}: {:?}", t, f.decay_rate);
            assert!(f.prefactor.unwrap().is_finite());
        }
    }

    #[test]
    fn exponent_constraints() {
        assert!(Exponents::new(0.1, 0.6, 0.8).is_ok());
        assert!(Exponents::new(0.3, 0.6, 0.8).is_err());
        assert!(Exponents::new(0.1, 0.8, 0.6).is_err());
    }

    #[test]
    fn sector_and_hoelder_checks() {
        let fam = LinearFamily::constant(diag(&[-1.0])).unwrap();
        let r = check_at(&fam, &[0.0], &SectorGrid::new(0.75 * PI), &hoelder_pairs(5.0, 4), 1.0).unwrap();
        assert!(r.passed && r.k_min < 3.0);
        let fam = LinearFamily::modulated(diag(&[-1.0]), APSignal::sin(1.0, 1.0), 3.0).unwrap();
        let r = check_at(&fam, &[0.0, 1.0], &SectorGrid::new(0.75 * PI), &hoelder_pairs(5.0, 4), 1.0).unwrap();
        assert!(r.passed && r.l_min <= 0.5 + 1e-9);
        let step = LinearFamily::custom("step", |t| diag(&[if t < 0.0 { -1.0 } else { -2.0 }])).unwrap();
        let r = check_at(&step, &[0.0], &SectorGrid::new(0.75 * PI), &hoelder_pairs(5.0, 4), 1.0).unwrap();
        assert!(!r.hoelder_ok && !r.passed);
    }

    #[test]
    fn h4_vanishes_for_exact_periods() {
        let ef = EvolutionFamily::new(
            LinearFamily::modulated(diag(&[-1.0]), APSignal::sin(1.0, 1.0), 2.0).unwrap(),
            StepperConfig::default(),
        );
        let k = H4Kernel { c: 1.0, alpha0: 0.5, delta: 2.0 };
        assert_eq!(check_h4(&ef, 0.0, &k, &h4_pairs(5.0), 1e-3).unwrap().max_lhs, 0.0);
        assert!(check_h4(&ef, 2.0 * PI, &k, &h4_pairs(5.0), 1e-3).unwrap().max_lhs < 1e-12);
    }
}
