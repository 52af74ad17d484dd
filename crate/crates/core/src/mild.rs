//! Mild solutions of `d/dt[u + f(t, B(t)u)] = A(t)u + g(t, C(t)u)`.
//!
//! The solution is the fixed point of
//! `𝕄u = −f(·,Bu) − Γ₁u + Γ₂u + Γ₃u − Γ₄u`, where the four integral operators
//! integrate the dichotomy Green kernel against `A(s)f(s, B(s)u(s))` and
//! `g(s, C(s)u(s))`. With `ψ = g(·, Cu) − A f(·, Bu)` this is
//! `𝕄u = −f + ∫_{−∞}^t U(t,s)P ψ − ∫_t^∞ Ũ_Q(t,s)Q ψ`.
//!
//! [`map_m`] evaluates the two integrals on a uniform grid by one forward and
//! one backward recursion with exponential quadrature weights; the pointwise
//! operators [`gamma1`]..[`gamma4`] use graded Gauss–Legendre panels and serve
//! as an independent route.

use crate::ap::{translation_certificate, CertificateConfig, Signal, TranslationCertificate};
use crate::error::{Error, Result};
use crate::evolution::{
    fit_estimate, green_matrix, interpolation_constants, AlphaNormOp, DichotomyData, EstimateFit, EstimateTarget,
    EvolutionFamily, Exponents, FamilyForm, FitGrid, Mat,
};
use crate::pap::{is_pap0, ErgodicDeviation, NormKind, Pap0Config, SampledPath};
use crate::quad::GaussLegendre;
use crate::weights::Weight;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// A bounded operator family `B(t)`.
#[derive(Clone)]
pub enum OperatorFamily {
    Constant(Mat),
    /// `(offset + m(t))·M` with `m` a scalar signal.
    Modulated { mat: Mat, m: crate::ap::APSignal, offset: f64 },
    Custom {
        label: String,
        rows: usize,
        cols: usize,
        f: Arc<dyn Fn(f64) -> Mat + Send + Sync>,
    },
}

impl fmt::Debug for OperatorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(m) => write!(f, "Constant({}x{})", m.nrows(), m.ncols()),
            Self::Modulated { offset, .. } => write!(f, "Modulated(offset {offset})"),
            Self::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl OperatorFamily {
    pub fn identity(n: usize) -> Self {
        Self::Constant(Mat::identity(n, n))
    }

    pub fn zero(n: usize) -> Self {
        Self::Constant(Mat::zeros(n, n))
    }

    pub fn custom(label: impl Into<String>, rows: usize, cols: usize, f: impl Fn(f64) -> Mat + Send + Sync + 'static) -> Self {
        Self::Custom {
            label: label.into(),
            rows,
            cols,
            f: Arc::new(f),
        }
    }

    pub fn at(&self, t: f64) -> Mat {
        match self {
            Self::Constant(m) => m.clone(),
            Self::Modulated { mat, m, offset } => mat * (offset + m.value(t)),
            Self::Custom { f, .. } => f(t),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::Constant(m) | Self::Modulated { mat: m, .. } => (m.nrows(), m.ncols()),
            Self::Custom { rows, cols, .. } => (*rows, *cols),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Constant(m) if m.iter().all(|v| *v == 0.0))
    }
}

type ForcingFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// A forcing `(t, z) ↦ F(t, z)` with a global Lipschitz constant in `z`.
#[derive(Clone)]
pub struct Forcing {
    pub label: String,
    pub dim_in: usize,
    pub dim_out: usize,
    pub lipschitz: f64,
    f: Arc<ForcingFn>,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Forcing({}, L={})", self.label, self.lipschitz)
    }
}

impl Forcing {
    pub fn new(
        label: impl Into<String>,
        dim_in: usize,
        dim_out: usize,
        lipschitz: f64,
        f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            dim_in,
            dim_out,
            lipschitz,
            f: Arc::new(f),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::new("0", n, n, 0.0, |_, _, out| out.iter_mut().for_each(|v| *v = 0.0))
    }

    /// `F(t, z) = s(t)`, independent of `z`.
    pub fn time_only(label: impl Into<String>, n: usize, s: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self::new(label, n, n, 0.0, move |t, _, out| s(t, out))
    }

    /// `F(t, z) = s(t) + k z`.
    pub fn affine(label: impl Into<String>, n: usize, k: f64, s: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self::new(label, n, n, k.abs(), move |t, z, out| {
            s(t, out);
            for (o, zi) in out.iter_mut().zip(z) {
                *o += k * zi;
            }
        })
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn eval(&self, t: f64, z: &[f64], out: &mut [f64]) {
        (self.f)(t, z, out)
    }
}

/// Largest difference quotient of `f` over seeded random pairs with
/// `t ∈ t_range` and `‖z‖_∞ ≤ radius`.
pub fn estimate_lipschitz(f: &Forcing, t_range: (f64, f64), radius: f64, pairs: usize, seed: u64) -> f64 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut a, mut b) = (vec![0.0; f.dim_out], vec![0.0; f.dim_out]);
    let mut best = 0.0f64;
    for k in 0..pairs {
        let t = rng.random_range(t_range.0..=t_range.1);
        let z1: Vec<f64> = (0..f.dim_in).map(|_| rng.random_range(-radius..=radius)).collect();
        // Half of the pairs are close, to probe the local slope.
        let scale = if k % 2 == 0 { radius } else { 1e-4 * radius };
        let z2: Vec<f64> = z1.iter().map(|z| z + rng.random_range(-scale..=scale)).collect();
        f.eval(t, &z1, &mut a);
        f.eval(t, &z2, &mut b);
        let num = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den = z1.iter().zip(&z2).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if den > 0.0 {
            best = best.max(num / den);
        }
    }
    best
}

/// All data of one semilinear problem.
#[derive(Debug, Clone)]
pub struct MildProblem {
    pub family: EvolutionFamily,
    pub dichotomy: DichotomyData,
    pub b: OperatorFamily,
    pub c: OperatorFamily,
    /// Forcing inside the time derivative, evaluated at `B(t)u`.
    pub f: Forcing,
    /// Right-hand forcing, evaluated at `C(t)u`.
    pub g: Forcing,
    pub weight: Weight,
    pub exponents: Exponents,
}

impl MildProblem {
    pub fn new(
        family: EvolutionFamily,
        dichotomy: DichotomyData,
        b: OperatorFamily,
        c: OperatorFamily,
        f: Forcing,
        g: Forcing,
        weight: Weight,
        exponents: Exponents,
    ) -> Result<Self> {
        const OP: &str = "mild_solver::MildProblem";
        exponents.validate()?;
        let n = family.dim();
        for (name, op) in [("B", &b), ("C", &c)] {
            let (r, cols) = op.shape();
            if cols != n {
                return Err(Error::pre(OP, format!("{name} has {cols} columns, expected {n}")));
            }
            let fz = if name == "B" { &f } else { &g };
            if fz.dim_in != r {
                return Err(Error::pre(OP, format!("{name} has {r} rows but its forcing takes {} inputs", fz.dim_in)));
            }
        }
        if f.dim_out != n || g.dim_out != n {
            return Err(Error::pre(OP, "forcings must map into the state space"));
        }
        if !(f.lipschitz >= 0.0 && g.lipschitz >= 0.0 && f.lipschitz.is_finite() && g.lipschitz.is_finite()) {
            return Err(Error::pre(OP, "Lipschitz constants must be finite and non-negative"));
        }
        Ok(Self {
            family,
            dichotomy,
            b,
            c,
            f,
            g,
            weight,
            exponents,
        })
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// α-norm frozen at `A(0)`.
    pub fn alpha_op(&self) -> Result<AlphaNormOp> {
        AlphaNormOp::for_matrix(&self.family.family.at(0.0), self.family.family.omega, self.exponents.alpha)
    }

    /// `K = max(K_f, K_g)`.
    pub fn lipschitz(&self) -> f64 {
        self.f.lipschitz.max(self.g.lipschitz)
    }

    /// `ϖ`: largest bound of `B(t)` and `C(t)` as maps `X_α → X` over the
    /// sample times.
    pub fn varpi(&self, op: &AlphaNormOp, times: &[f64]) -> f64 {
        let mut w = 0.0f64;
        for &t in times {
            for fam in [&self.b, &self.c] {
                if !fam.is_zero() {
                    w = w.max(op.op_norm_into_ambient(&fam.at(t)));
                }
            }
        }
        w
    }

    /// `ψ(t) = g(t, C(t)u) − A(t) f(t, B(t)u)` and `f(t, B(t)u)`.
    fn psi(&self, t: f64, u: &[f64], psi: &mut [f64], fval: &mut [f64]) {
        let uv = DVector::from_column_slice(u);
        let bu = self.b.at(t) * &uv;
        self.f.eval(t, bu.as_slice(), fval);
        let cu = self.c.at(t) * &uv;
        self.g.eval(t, cu.as_slice(), psi);
        if fval.iter().any(|v| *v != 0.0) {
            let af = self.family.family.at(t) * DVector::from_column_slice(fval);
            for (p, a) in psi.iter_mut().zip(af.iter()) {
                *p -= a;
            }
        }
    }
}

/// Constants entering the a priori contraction bound.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionInputs {
    pub k_lipschitz: f64,
    pub varpi: f64,
    pub delta: f64,
    pub alpha: f64,
    pub c_alpha: f64,
    pub m_alpha: f64,
    pub n_alpha_mu: f64,
    pub m_alpha_beta: f64,
    pub k_alpha: f64,
}

/// `Kϖ[k(α) + 2^{1−α}δ^{α−1}Γ(1−α)(n(α,μ) + c(α)) + δ⁻¹(m(α,β) + m(α))]`.
pub fn contraction_constant(c: &ContractionInputs) -> Result<f64> {
    const OP: &str = "mild_solver::contraction_constant";
    if !(c.alpha > 0.0 && c.alpha < 1.0) {
        return Err(Error::pre(OP, format!("alpha = {} outside (0, 1)", c.alpha)));
    }
    let all = [c.k_lipschitz, c.varpi, c.c_alpha, c.m_alpha, c.n_alpha_mu, c.m_alpha_beta, c.k_alpha];
    if all.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || !(c.delta > 0.0) {
        return Err(Error::pre(OP, "constants must be finite and non-negative, δ positive"));
    }
    let a = c.alpha;
    let gamma = statrs::function::gamma::gamma(1.0 - a);
    let singular = 2f64.powf(1.0 - a) * c.delta.powf(a - 1.0) * gamma * (c.n_alpha_mu + c.c_alpha);
    let regular = (c.m_alpha_beta + c.m_alpha) / c.delta;
    Ok(c.k_lipschitz * c.varpi * (c.k_alpha + singular + regular))
}

/// Fitted estimate constants of a problem.
#[derive(Debug, Clone, Serialize)]
pub struct FittedConstants {
    pub inputs: ContractionInputs,
    pub fits: Vec<EstimateFit>,
    pub interpolation_c: f64,
}

/// Fit `c(α), m(α), m(α,β), n(α,μ)` and `k(α)` on `grid`, measure `ϖ`, and
/// collect the inputs of [`contraction_constant`]. Vacuous estimates count
/// as zero.
pub fn fit_constants(p: &MildProblem, grid: &FitGrid) -> Result<FittedConstants> {
    let mut fits = Vec::new();
    for t in EstimateTarget::ALL {
        fits.push(fit_estimate(&p.family, &p.dichotomy, t, &p.exponents, grid, 0.05)?);
    }
    let get = |t: EstimateTarget| fits.iter().find(|f| f.target == t).and_then(|f| f.prefactor).unwrap_or(0.0);
    let a0 = p.family.family.at(0.0);
    let ic = interpolation_constants(&a0, p.family.family.omega, p.exponents.alpha, p.exponents.beta, &grid.vectors)?;
    let op = p.alpha_op()?;
    let inputs = ContractionInputs {
        k_lipschitz: p.lipschitz(),
        varpi: p.varpi(&op, &grid.s_values),
        delta: p.dichotomy.delta,
        alpha: p.exponents.alpha,
        c_alpha: get(EstimateTarget::StableAlpha),
        m_alpha: get(EstimateTarget::UnstableAlpha),
        n_alpha_mu: get(EstimateTarget::Beta2),
        m_alpha_beta: get(EstimateTarget::Beta1),
        k_alpha: ic.k_embedding,
    };
    Ok(FittedConstants {
        inputs,
        fits,
        interpolation_c: ic.c_interpolation,
    })
}

/// Grid and iteration controls.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Interval on which the solution is reported.
    pub window: (f64, f64),
    pub step: f64,
    /// Truncation length `S`; default `40/δ`.
    pub truncation: Option<f64>,
    pub solve_tol: f64,
    pub max_iters: usize,
    pub quad_tol: f64,
    pub verify_tol: f64,
    pub contraction_gate: f64,
    pub override_gate: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            window: (-10.0, 10.0),
            step: 0.02,
            truncation: None,
            solve_tol: 1e-10,
            max_iters: 200,
            quad_tol: 1e-10,
            verify_tol: 1e-6,
            contraction_gate: 0.95,
            override_gate: false,
        }
    }
}

impl SolverConfig {
    pub fn truncation_for(&self, delta: f64) -> f64 {
        self.truncation.unwrap_or(40.0 / delta)
    }
}

/// Per-step recursion data: `y_{i+1} = Φ y_i + Σ_q W_q ψ(node_q)`.
#[derive(Debug, Clone)]
struct StepWeights {
    phi: Mat,
    w: [Mat; 4],
}

/// Grid offsets of the four interpolation nodes relative to the left end of
/// the step, for first, interior and last steps.
const PATTERNS: [[f64; 4]; 3] = [[0.0, 1.0, 2.0, 3.0], [-1.0, 0.0, 1.0, 2.0], [-2.0, -1.0, 0.0, 1.0]];

fn pattern_for(i: usize, steps: usize) -> usize {
    if i == 0 {
        0
    } else if i + 2 > steps {
        2
    } else {
        1
    }
}

/// Monomial coefficients of the Lagrange basis on `nodes` (normalized time).
fn lagrange_coefficients(nodes: &[f64; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for q in 0..4 {
        let mut poly = vec![1.0];
        let mut denom = 1.0;
        for j in 0..4 {
            if j == q {
                continue;
            }
            let mut next = vec![0.0; poly.len() + 1];
            for (k, c) in poly.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * nodes[j];
            }
            poly = next;
            denom *= nodes[q] - nodes[j];
        }
        for k in 0..4 {
            out[q][k] = poly[k] / denom;
        }
    }
    out
}

fn lagrange_eval(nodes: &[f64; 4], q: usize, x: f64) -> f64 {
    let mut v = 1.0;
    for j in 0..4 {
        if j != q {
            v *= (x - nodes[j]) / (nodes[q] - nodes[j]);
        }
    }
    v
}

/// `∫_0^h e^{(h−σ)X} ℓ_q(σ/h) dσ` for the four Lagrange basis polynomials,
/// from `φ_1..φ_4` read off one block exponential.
fn exponential_weights(x: &Mat, h: f64, nodes: &[f64; 4]) -> Result<StepWeights> {
    let n = x.nrows();
    let mut big = Mat::zeros(5 * n, 5 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(x * h));
    for k in 0..4 {
        big.view_mut((k * n, (k + 1) * n), (n, n)).fill_with_identity();
    }
    let e = big.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::num("mild_solver::map_M", "exponential weights overflowed"));
    }
    let phi = e.view((0, 0), (n, n)).into_owned();
    let phis: Vec<Mat> = (1..=4).map(|k| e.view((0, k * n), (n, n)).into_owned()).collect();
    let c = lagrange_coefficients(nodes);
    let fact = [1.0, 1.0, 2.0, 6.0];
    let w = std::array::from_fn(|q| {
        let mut m = Mat::zeros(n, n);
        for k in 0..4 {
            m += &phis[k] * (h * c[q][k] * fact[k]);
        }
        m
    });
    Ok(StepWeights { phi, w })
}

/// Weights by 8-point Gauss–Legendre quadrature of an exact kernel.
fn quadrature_weights(
    gl: &GaussLegendre,
    h: f64,
    nodes: &[f64; 4],
    phi: Mat,
    kernel: impl Fn(f64) -> Result<Mat>,
) -> Result<StepWeights> {
    let n = phi.nrows();
    let mut w: [Mat; 4] = std::array::from_fn(|_| Mat::zeros(n, n));
    for (sigma, wt) in gl.mapped(0.0, h) {
        let k = kernel(sigma)?;
        for q in 0..4 {
            w[q] += &k * (wt * lagrange_eval(nodes, q, sigma / h));
        }
    }
    Ok(StepWeights { phi, w })
}

enum Weights {
    /// Shared by every step, indexed by pattern.
    Uniform([StepWeights; 3]),
    PerStep(Vec<StepWeights>),
    None,
}

/// Recursion data for one problem on one grid.
pub struct Sweeper {
    start: f64,
    step: f64,
    len: usize,
    dim: usize,
    stable: Weights,
    unstable: Weights,
}

impl Sweeper {
    pub fn new(p: &MildProblem, start: f64, step: f64, len: usize) -> Result<Self> {
        const OP: &str = "mild_solver::map_M";
        if len < 5 {
            return Err(Error::pre(OP, "grid needs at least five points"));
        }
        let ef = &p.family;
        let dd = &p.dichotomy;
        let steps = len - 1;
        let h = step;
        let gl = GaussLegendre::new(8);
        let (stable, unstable) = match ef.family.form() {
            FamilyForm::Constant => {
                let xs = dd.stable_generator();
                let st: [StepWeights; 3] = try_array(|k| {
                    let mut sw = exponential_weights(xs, h, &PATTERNS[k])?;
                    sw.phi = &sw.phi * &dd.p;
                    sw.w.iter_mut().for_each(|m| *m = &*m * &dd.p);
                    Ok(sw)
                })?;
                let un = if dd.has_unstable_part() {
                    let xu = -dd.unstable_generator();
                    Weights::Uniform(try_array(|k| {
                        let mirrored = PATTERNS[k].map(|o| 1.0 - o);
                        let mut sw = exponential_weights(&xu, h, &mirrored)?;
                        sw.phi = &sw.phi * &dd.q;
                        sw.w.iter_mut().for_each(|m| *m = &*m * &dd.q);
                        Ok(sw)
                    })?)
                } else {
                    Weights::None
                };
                (Weights::Uniform(st), un)
            }
            FamilyForm::Modulated { .. } => {
                let fam = &ef.family;
                let mut st = Vec::with_capacity(steps);
                let mut un = Vec::new();
                for i in 0..steps {
                    let t0 = start + i as f64 * h;
                    let nodes = &PATTERNS[pattern_for(i, steps)];
                    let ap = dd.stable_generator();
                    let phi = (ap * fam.modulation_integral(t0, t0 + h).expect("commuting")).exp() * &dd.p;
                    st.push(quadrature_weights(&gl, h, nodes, phi, |sigma| {
                        Ok((ap * fam.modulation_integral(t0 + sigma, t0 + h).expect("commuting")).exp() * &dd.p)
                    })?);
                    if dd.has_unstable_part() {
                        let aq = dd.unstable_generator();
                        let phi = (aq * fam.modulation_integral(t0 + h, t0).expect("commuting")).exp() * &dd.q;
                        // Ũ_Q(t_i, s)Q at s = t_{i+1} − σ, with nodes mirrored.
                        let mirrored = nodes.map(|o| 1.0 - o);
                        un.push(quadrature_weights(&gl, h, &mirrored, phi, |sigma| {
                            Ok((aq * fam.modulation_integral(t0 + h - sigma, t0).expect("commuting")).exp() * &dd.q)
                        })?);
                    }
                }
                (
                    Weights::PerStep(st),
                    if un.is_empty() { Weights::None } else { Weights::PerStep(un) },
                )
            }
            FamilyForm::Tabulated { .. } | FamilyForm::Custom { .. } => {
                if dd.has_unstable_part() {
                    return Err(Error::pre(OP, "general families must be uniformly stable"));
                }
                let mut st = Vec::with_capacity(steps);
                for i in 0..steps {
                    let t0 = start + i as f64 * h;
                    let x = ef.magnus_exponent(t0, h) / h;
                    st.push(exponential_weights(&x, h, &PATTERNS[pattern_for(i, steps)])?);
                }
                (Weights::PerStep(st), Weights::None)
            }
        };
        Ok(Self {
            start,
            step,
            len,
            dim: ef.dim(),
            stable,
            unstable,
        })
    }

    fn weights<'a>(w: &'a Weights, i: usize, steps: usize) -> Option<&'a StepWeights> {
        match w {
            Weights::Uniform(ws) => Some(&ws[pattern_for(i, steps)]),
            Weights::PerStep(v) => Some(&v[i]),
            Weights::None => None,
        }
    }

    /// `(∫_{t₀}^{t} U(t,s)Pψ ds, ∫_t^{t_end} Ũ_Q(t,s)Qψ ds)` on the grid, from
    /// row-major samples of ψ.
    fn sweep(&self, psi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim;
        let steps = self.len - 1;
        let mut y = vec![0.0; self.len * n];
        let mut z = vec![0.0; self.len * n];
        let mut acc = DVector::zeros(n);
        let node_vec = |j: usize| DVector::from_column_slice(&psi[j * n..(j + 1) * n]);
        for i in 0..steps {
            let sw = Self::weights(&self.stable, i, steps).expect("stable weights");
            let pat = &PATTERNS[pattern_for(i, steps)];
            let yi = DVector::from_column_slice(&y[i * n..(i + 1) * n]);
            acc.copy_from(&(&sw.phi * yi));
            for q in 0..4 {
                let j = (i as isize + pat[q] as isize) as usize;
                acc += &sw.w[q] * node_vec(j);
            }
            y[(i + 1) * n..(i + 2) * n].copy_from_slice(acc.as_slice());
        }
        if !matches!(self.unstable, Weights::None) {
            for i in (0..steps).rev() {
                let sw = Self::weights(&self.unstable, i, steps).expect("unstable weights");
                let pat = &PATTERNS[pattern_for(i, steps)];
                let zi = DVector::from_column_slice(&z[(i + 1) * n..(i + 2) * n]);
                acc.copy_from(&(&sw.phi * zi));
                for q in 0..4 {
                    let j = (i as isize + pat[q] as isize) as usize;
                    acc += &sw.w[q] * node_vec(j);
                }
                z[i * n..(i + 1) * n].copy_from_slice(acc.as_slice());
            }
        }
        (y, z)
    }

    /// `𝕄u` on the sweeper's grid.
    pub fn apply(&self, p: &MildProblem, u: &SampledPath) -> Result<SampledPath> {
        const OP: &str = "mild_solver::map_M";
        if u.len() != self.len || u.dim() != self.dim || (u.step() - self.step).abs() > 1e-12 * self.step {
            return Err(Error::pre(OP, "path does not lie on the solver grid"));
        }
        let n = self.dim;
        let mut psi = vec![0.0; self.len * n];
        let mut fv = vec![0.0; self.len * n];
        for i in 0..self.len {
            p.psi(u.time(i), u.value(i), &mut psi[i * n..(i + 1) * n], &mut fv[i * n..(i + 1) * n]);
        }
        let (y, z) = self.sweep(&psi);
        let out: Vec<f64> = (0..self.len * n).map(|k| -fv[k] + y[k] - z[k]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::num(OP, "non-finite value in 𝕄u"));
        }
        let mut path = SampledPath::new(self.start, self.step, n, out)?;
        path.norm_kind = u.norm_kind;
        Ok(path)
    }
}

fn try_array<T, const N: usize>(mut f: impl FnMut(usize) -> Result<T>) -> Result<[T; N]> {
    let v: Vec<T> = (0..N).map(&mut f).collect::<Result<_>>()?;
    Ok(v.try_into().unwrap_or_else(|_| unreachable!()))
}

/// Solver grid: the window padded by `S` on both sides, aligned so that the
/// window ends fall on grid points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridInfo {
    pub t_min: f64,
    pub t_max: f64,
    pub step: f64,
    pub len: usize,
    pub window: (f64, f64),
    pub truncation: f64,
}

pub fn solver_grid(cfg: &SolverConfig, delta: f64) -> Result<GridInfo> {
    const OP: &str = "mild_solver::solve";
    let (lo, hi) = cfg.window;
    if !(hi > lo && cfg.step > 0.0) {
        return Err(Error::pre(OP, "window must be non-empty and step positive"));
    }
    let cells = ((hi - lo) / cfg.step).round();
    if ((hi - lo) / cfg.step - cells).abs() > 1e-6 {
        return Err(Error::pre(OP, "window length must be a multiple of the step"));
    }
    let s = cfg.truncation_for(delta);
    let pad = (s / cfg.step).ceil();
    let t_min = lo - pad * cfg.step;
    let len = (cells + 2.0 * pad) as usize + 1;
    Ok(GridInfo {
        t_min,
        t_max: t_min + (len - 1) as f64 * cfg.step,
        step: cfg.step,
        len,
        window: cfg.window,
        truncation: pad * cfg.step,
    })
}

/// Zero path on a grid, tagged with the α-norm.
pub fn zero_path(grid: &GridInfo, dim: usize, alpha: f64) -> Result<SampledPath> {
    let mut p = SampledPath::new(grid.t_min, grid.step, dim, vec![0.0; grid.len * dim])?;
    p.norm_kind = NormKind::Alpha(alpha);
    Ok(p)
}

/// `𝕄u` for a path on any uniform grid with at least five points.
pub fn map_m(u: &SampledPath, p: &MildProblem) -> Result<SampledPath> {
    Sweeper::new(p, u.t_min(), u.step(), u.len())?.apply(p, u)
}

/// Sup over the grid of `‖a − b‖_α`.
pub fn sup_alpha_distance(op: &AlphaNormOp, a: &SampledPath, b: &SampledPath) -> f64 {
    let mut d = vec![0.0; a.dim()];
    let mut best = 0.0f64;
    for i in 0..a.len() {
        for (k, (x, y)) in a.value(i).iter().zip(b.value(i)).enumerate() {
            d[k] = x - y;
        }
        best = best.max(op.norm(&d));
    }
    best
}

/// Iteration record.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointReport {
    pub iterates: usize,
    pub sup_alpha_residuals: Vec<f64>,
    pub contraction_estimate: f64,
    pub contraction_inputs: ContractionInputs,
    pub gate: f64,
    pub gate_overridden: bool,
    /// Largest ratio of successive residuals from the second step on, over
    /// residuals above the roundoff floor.
    pub observed_ratio: Option<f64>,
    pub a_posteriori_error: f64,
    pub converged: bool,
    pub stop_reason: String,
    pub grid: GridInfo,
    /// Bound on the effect of truncating the integrals at `S`.
    pub truncation_tail_bound: f64,
}

/// A solved problem.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Values on the padded grid.
    pub path: SampledPath,
    pub report: FixedPointReport,
}

impl Solution {
    /// Restriction to the reporting window.
    pub fn windowed(&self) -> Result<SampledPath> {
        let (a, b) = self.report.grid.window;
        self.path.window(a, b)
    }
}

/// Picard iteration with fixed constants.
pub struct Solver<'a> {
    pub problem: &'a MildProblem,
    pub config: SolverConfig,
    pub grid: GridInfo,
    pub alpha_op: AlphaNormOp,
    pub inputs: ContractionInputs,
    pub contraction: f64,
    sweeper: Sweeper,
}

impl<'a> Solver<'a> {
    /// Fit constants, check the contraction gate and build the recursion.
    pub fn new(problem: &'a MildProblem, config: SolverConfig, fit_grid: &FitGrid) -> Result<Self> {
        let fitted = fit_constants(problem, fit_grid)?;
        Self::with_inputs(problem, config, fitted.inputs)
    }

    pub fn with_inputs(problem: &'a MildProblem, config: SolverConfig, inputs: ContractionInputs) -> Result<Self> {
        const OP: &str = "mild_solver::solve";
        if !(config.solve_tol > 0.0 && config.max_iters > 0) {
            return Err(Error::pre(OP, "solve_tol must be positive and max_iters nonzero"));
        }
        let contraction = contraction_constant(&inputs)?;
        if contraction >= config.contraction_gate && !config.override_gate {
            return Err(Error::pre(
                OP,
                format!(
                    "contraction constant {contraction:.4} ≥ gate {}; rerun with the override flag to attempt anyway",
                    config.contraction_gate
                ),
            ));
        }
        let grid = solver_grid(&config, problem.dichotomy.delta)?;
        let sweeper = Sweeper::new(problem, grid.t_min, grid.step, grid.len)?;
        let alpha_op = problem.alpha_op()?;
        Ok(Self {
            problem,
            config,
            grid,
            alpha_op,
            inputs,
            contraction,
            sweeper,
        })
    }

    pub fn map(&self, u: &SampledPath) -> Result<SampledPath> {
        self.sweeper.apply(self.problem, u)
    }

    pub fn zero(&self) -> Result<SampledPath> {
        zero_path(&self.grid, self.problem.dim(), self.problem.exponents.alpha)
    }

    /// Iterate from `u0` until the sup-α residual drops below `solve_tol`,
    /// `max_iters` is reached or the residual grows three times in a row.
    /// Never fails on non-convergence; see [`FixedPointReport::converged`].
    pub fn iterate(&self, u0: SampledPath) -> Result<Solution> {
        let mut u = u0;
        let mut residuals = Vec::new();
        let mut growth = 0;
        let mut converged = false;
        let mut stop = String::from("max_iters reached");
        let mut scale = 0.0f64;
        for _ in 0..self.config.max_iters {
            let next = self.map(&u)?;
            let r = sup_alpha_distance(&self.alpha_op, &next, &u);
            scale = scale.max(sup_alpha_distance(&self.alpha_op, &next, &next.zeros_like()));
            if let Some(&prev) = residuals.last() {
                growth = if r > prev { growth + 1 } else { 0 };
            }
            residuals.push(r);
            u = next;
            if r < self.config.solve_tol {
                converged = true;
                stop = "residual below solve_tol".into();
                break;
            }
            if growth >= 3 {
                stop = "residual grew in three consecutive iterations".into();
                break;
            }
        }
        let floor = 1e3 * f64::EPSILON * scale.max(1.0);
        let observed_ratio = residuals
            .windows(2)
            .enumerate()
            .filter(|(k, w)| *k >= 1 && w[0] > floor && w[1] > floor)
            .map(|(_, w)| w[1] / w[0])
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
        let ratio = observed_ratio.unwrap_or(self.contraction);
        let last = residuals.last().copied().unwrap_or(0.0);
        let a_posteriori_error = if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY };
        let dd = &self.problem.dichotomy;
        let psi_scale = self.psi_sup(&u);
        let truncation_tail_bound = dd.n_const * psi_scale * (-dd.delta * self.grid.truncation).exp() / dd.delta;
        Ok(Solution {
            path: u,
            report: FixedPointReport {
                iterates: residuals.len(),
                sup_alpha_residuals: residuals,
                contraction_estimate: self.contraction,
                contraction_inputs: self.inputs.clone(),
                gate: self.config.contraction_gate,
                gate_overridden: self.config.override_gate && self.contraction >= self.config.contraction_gate,
                observed_ratio,
                a_posteriori_error,
                converged,
                stop_reason: stop,
                grid: self.grid,
                truncation_tail_bound,
            },
        })
    }

    fn psi_sup(&self, u: &SampledPath) -> f64 {
        let n = u.dim();
        let (mut psi, mut fv) = (vec![0.0; n], vec![0.0; n]);
        let mut s = 0.0f64;
        for i in 0..u.len() {
            self.problem.psi(u.time(i), u.value(i), &mut psi, &mut fv);
            s = s.max(psi.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        s
    }
}

/// Solve from `u₀ ≡ 0`; non-convergence is an error.
pub fn solve(p: &MildProblem, cfg: &SolverConfig, fit_grid: &FitGrid) -> Result<Solution> {
    let solver = Solver::new(p, cfg.clone(), fit_grid)?;
    let sol = solver.iterate(solver.zero()?)?;
    if !sol.report.converged {
        return Err(Error::NotConverged {
            op: "mild_solver::solve",
            detail: format!(
                "{} after {} iterations, last residual {:e}",
                sol.report.stop_reason,
                sol.report.iterates,
                sol.report.sup_alpha_residuals.last().copied().unwrap_or(f64::NAN)
            ),
        });
    }
    Ok(sol)
}

#[derive(Debug, Clone, Copy)]
enum Side {
    Past,
    Future,
}

/// Distances from `t` of graded panels: a first panel of width `first`, then
/// doubling up to `max_panel`, then uniform up to `len`.
fn graded_panels(len: f64, first: f64, max_panel: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut a = 0.0;
    let mut w = first.min(len);
    while a < len {
        let b = (a + w).min(len);
        out.push((a, b));
        a = b;
        w = (2.0 * w).min(max_panel);
    }
    out
}

/// Pointwise quadrature of one of the four operators.
fn gamma_pointwise(u: &SampledPath, p: &MildProblem, t: f64, cfg: &SolverConfig, which: u8) -> Result<Vec<f64>> {
    let op: &'static str = match which {
        1 => "mild_solver::gamma1",
        2 => "mild_solver::gamma2",
        3 => "mild_solver::gamma3",
        _ => "mild_solver::gamma4",
    };
    let n = p.dim();
    let dd = &p.dichotomy;
    let side = if which == 1 || which == 3 { Side::Past } else { Side::Future };
    if matches!(side, Side::Future) && !dd.has_unstable_part() {
        return Ok(vec![0.0; n]);
    }
    let s_len = cfg.truncation_for(dd.delta);
    let (lo, hi) = (u.t_min(), u.t_max());
    let covered = match side {
        Side::Past => t - s_len >= lo - 1e-9 && t <= hi + 1e-9,
        Side::Future => t + s_len <= hi + 1e-9 && t >= lo - 1e-9,
    };
    if !covered {
        return Err(Error::pre(op, format!("path [{lo}, {hi}] must extend S = {s_len} beyond t = {t}")));
    }
    let a_norm = crate::evolution::op_norm(&p.family.family.at(t));
    let first = (0.1 / (1.0 + a_norm)).min(0.5);
    let panels = graded_panels(s_len, first, 0.5);
    let gl = GaussLegendre::new(10);
    let mut acc = DVector::zeros(n);
    let mut uval = vec![0.0; n];
    let mut fz = vec![0.0; n];
    let mut sup_integrand = 0.0f64;
    let mut eval = |dist: f64, weight: f64, acc: &mut DVector<f64>| -> Result<()> {
        let s = match side {
            Side::Past => t - dist,
            Side::Future => t + dist,
        };
        u.interpolate_cubic(s, &mut uval);
        let uv = DVector::from_column_slice(&uval);
        let v = if which == 1 || which == 2 {
            let bu = p.b.at(s) * &uv;
            p.f.eval(s, bu.as_slice(), &mut fz);
            p.family.family.at(s) * DVector::from_column_slice(&fz)
        } else {
            let cu = p.c.at(s) * &uv;
            p.g.eval(s, cu.as_slice(), &mut fz);
            DVector::from_column_slice(&fz)
        };
        sup_integrand = sup_integrand.max(v.norm());
        let k = green_matrix(&p.family, dd, t, s)?;
        // For s > t the Green kernel is −Ũ_Q(t,s)Q.
        let sign = if matches!(side, Side::Future) { -1.0 } else { 1.0 };
        *acc += (k * v) * (sign * weight);
        Ok(())
    };
    for &(a, b) in &panels {
        for (d, w) in gl.mapped(a, b) {
            eval(d, w, &mut acc)?;
        }
    }
    let tail = dd.n_const * sup_integrand * (-dd.delta * s_len).exp() / dd.delta;
    if tail > cfg.quad_tol {
        return Err(Error::num(op, format!("truncation tail bound {tail:e} exceeds quad_tol {:e}", cfg.quad_tol)));
    }
    Ok(acc.iter().copied().collect())
}

/// `Γ₁u(t) = ∫_{−∞}^t U(t,s)P(s) A(s) f(s, B(s)u(s)) ds`.
pub fn gamma1(u: &SampledPath, p: &MildProblem, t: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    gamma_pointwise(u, p, t, cfg, 1)
}

/// `Γ₂u(t) = ∫_t^∞ Ũ_Q(t,s)Q(s) A(s) f(s, B(s)u(s)) ds`.
pub fn gamma2(u: &SampledPath, p: &MildProblem, t: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    gamma_pointwise(u, p, t, cfg, 2)
}

/// `Γ₃u(t) = ∫_{−∞}^t U(t,s)P(s) g(s, C(s)u(s)) ds`.
pub fn gamma3(u: &SampledPath, p: &MildProblem, t: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    gamma_pointwise(u, p, t, cfg, 3)
}

/// `Γ₄u(t) = ∫_t^∞ Ũ_Q(t,s)Q(s) g(s, C(s)u(s)) ds`.
pub fn gamma4(u: &SampledPath, p: &MildProblem, t: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    gamma_pointwise(u, p, t, cfg, 4)
}

/// `𝕄u(t)` assembled from the pointwise operators.
pub fn map_m_at(u: &SampledPath, p: &MildProblem, t: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let n = p.dim();
    let mut uval = vec![0.0; n];
    u.interpolate_cubic(t, &mut uval);
    let bu = p.b.at(t) * DVector::from_column_slice(&uval);
    let mut fv = vec![0.0; n];
    p.f.eval(t, bu.as_slice(), &mut fv);
    let (g1, g2, g3, g4) = (gamma1(u, p, t, cfg)?, gamma2(u, p, t, cfg)?, gamma3(u, p, t, cfg)?, gamma4(u, p, t, cfg)?);
    Ok((0..n).map(|k| -fv[k] - g1[k] + g2[k] + g3[k] - g4[k]).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub max_residual: f64,
    pub pairs: usize,
    pub verify_tol: f64,
    pub passed: bool,
}

/// Check `v(t) = U(t,s)v(s) + ∫_s^t U(t,r)ψ(r) dr` with `v = u + f(·, Bu)`
/// and `ψ = g(·, Cu) − A f(·, Bu)` on the given pairs `s < t`.
pub fn mild_identity_residual(u: &SampledPath, p: &MildProblem, pairs: &[(f64, f64)], verify_tol: f64) -> Result<IdentityCheck> {
    const OP: &str = "mild_solver::mild_identity";
    let n = p.dim();
    let gl = GaussLegendre::new(10);
    let mut uval = vec![0.0; n];
    let (mut psi, mut fv) = (vec![0.0; n], vec![0.0; n]);
    let mut v_at = |r: f64, psi: &mut Vec<f64>, fv: &mut Vec<f64>| {
        u.interpolate_cubic(r, &mut uval);
        p.psi(r, &uval, psi, fv);
        DVector::from_column_slice(&uval) + DVector::from_column_slice(fv)
    };
    let mut worst = 0.0f64;
    let mut count = 0;
    for &(s, t) in pairs {
        if !(s < t) || s < u.t_min() || t > u.t_max() {
            return Err(Error::pre(OP, format!("pair ({s}, {t}) must satisfy s < t inside the path")));
        }
        let vs = v_at(s, &mut psi, &mut fv);
        let vt = v_at(t, &mut psi, &mut fv);
        let mut rhs = p.family.propagator(t, s)? * vs;
        let a_norm = crate::evolution::op_norm(&p.family.family.at(t));
        let first = (0.1 / (1.0 + a_norm)).min(0.05);
        for (a, b) in graded_panels(t - s, first, 0.05) {
            for (d, w) in gl.mapped(a, b) {
                let r = t - d;
                let _ = v_at(r, &mut psi, &mut fv);
                rhs += p.family.propagator(t, r)? * DVector::from_column_slice(&psi) * w;
            }
        }
        worst = worst.max((vt - rhs).norm());
        count += 1;
    }
    Ok(IdentityCheck {
        max_residual: worst,
        pairs: count,
        verify_tol,
        passed: worst <= verify_tol,
    })
}

/// Outcome of the WPAP verification of a solution.
#[derive(Debug, Clone, Serialize)]
pub struct WpapReport {
    pub deviation: Option<ErgodicDeviation>,
    pub certificate: Option<TranslationCertificate>,
    pub passed: bool,
}

/// Decide membership of `solution − candidate` in PAP₀ under the problem's
/// weight and, when `certificate` is given, certify the solution itself as
/// almost periodic.
pub fn verify_wpap(
    solution: &SampledPath,
    p: &MildProblem,
    candidate: Option<&dyn Signal>,
    horizons: &[f64],
    pap_cfg: &Pap0Config,
    certificate: Option<&CertificateConfig>,
) -> Result<WpapReport> {
    let deviation = match candidate {
        Some(c) => {
            let rem = solution.minus_signal(c)?;
            Some(is_pap0(&rem, &p.weight, horizons, pap_cfg)?)
        }
        None => None,
    };
    let certificate = match certificate {
        Some(cfg) => Some(translation_certificate(solution, cfg)?),
        None => None,
    };
    let passed = deviation.as_ref().is_none_or(|d| d.decays_to_zero) && certificate.as_ref().is_none_or(|c| c.passed);
    Ok(WpapReport {
        deviation,
        certificate,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{dichotomy, DichotomyGrid, LinearFamily, StepperConfig};

    fn scalar_problem(g: Forcing, f: Forcing) -> MildProblem {
        let fam = LinearFamily::constant(Mat::from_element(1, 1, -1.0)).unwrap();
        let ef = EvolutionFamily::new(fam, StepperConfig::default());
        let dd = dichotomy(&ef, &DichotomyGrid::default()).unwrap();
        MildProblem::new(
            ef,
            dd,
            OperatorFamily::identity(1),
            OperatorFamily::identity(1),
            f,
            g,
            Weight::unit(),
            Exponents::new(0.0, 0.6, 0.8).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn lagrange_basis_reproduces_cubics() {
        let nodes = PATTERNS[1];
        let c = lagrange_coefficients(&nodes);
        for q in 0..4 {
            for j in 0..4 {
                let x = nodes[j];
                let v: f64 = (0..4).map(|k| c[q][k] * x.powi(k as i32)).sum();
                assert!((v - if q == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn exponential_weights_integrate_scalar_forcing() {
        // ∫_0^h e^{−(h−σ)} σ² dσ against the weights applied to samples of σ².
        let h = 0.3;
        let x = Mat::from_element(1, 1, -1.0);
        let sw = exponential_weights(&x, h, &PATTERNS[1]).unwrap();
        let vals: Vec<f64> = PATTERNS[1].iter().map(|o| (o * h).powi(2)).collect();
        let got: f64 = (0..4).map(|q| sw.w[q][(0, 0)] * vals[q]).sum();
        let want = h * h - 2.0 * h + 2.0 - 2.0 * (-h as f64).exp();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        assert!((sw.phi[(0, 0)] - (-h as f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gamma3_of_sine_matches_closed_form() {
        let p = scalar_problem(Forcing::time_only("sin t", 1, |t, o| o[0] = t.sin()), Forcing::zero(1));
        let cfg = SolverConfig::default();
        let u = SampledPath::from_scalar_fn(-60.0, 60.0, 0.05, |_| 0.0).unwrap();
        for t in [-3.0, 0.0, 2.5] {
            let v = gamma3(&u, &p, t, &cfg).unwrap()[0];
            assert!((v - 0.5 * (t.sin() - t.cos())).abs() < 1e-10, "{t}: {v} vs {}", 0.5 * (t.sin() - t.cos()));
        }
        assert_eq!(gamma4(&u, &p, 0.0, &cfg).unwrap(), vec![0.0]);
    }

    #[test]
    fn gamma1_of_cosine_matches_closed_form() {
        let p = scalar_problem(Forcing::zero(1), Forcing::time_only("cos t", 1, |t, o| o[0] = t.cos()));
        let cfg = SolverConfig::default();
        let u = SampledPath::from_scalar_fn(-60.0, 60.0, 0.05, |_| 0.0).unwrap();
        // ∫_{−∞}^t e^{−(t−s)} (−1) cos s ds = −(cos t + sin t)/2.
        for t in [-1.0, 0.5, 2.0] {
            let v = gamma1(&u, &p, t, &cfg).unwrap()[0];
            let want = -0.5 * (t.cos() + t.sin());
            assert!((v - want).abs() < 1e-10, "{v} vs {want}");
        }
    }

    #[test]
    fn contraction_formula() {
        let c = ContractionInputs {
            k_lipschitz: 1.0,
            varpi: 1.0,
            delta: 2.0,
            alpha: 0.5,
            c_alpha: 1.0,
            m_alpha: 1.0,
            n_alpha_mu: 1.0,
            m_alpha_beta: 1.0,
            k_alpha: 1.0,
        };
        let v = contraction_constant(&c).unwrap();
        assert!((v - (2.0 + 2.0 * std::f64::consts::PI.sqrt())).abs() < 1e-12);
        let zero = ContractionInputs { k_lipschitz: 0.0, ..c.clone() };
        assert_eq!(contraction_constant(&zero).unwrap(), 0.0);
        let faster = ContractionInputs { delta: 4.0, ..c.clone() };
        assert!(contraction_constant(&faster).unwrap() < v);
        assert!(contraction_constant(&ContractionInputs { alpha: 1.0, ..c }).is_err());
    }

    #[test]
    fn sweep_matches_pointwise_route() {
        let p = scalar_problem(
            Forcing::affine("sin t + 0.05u", 1, 0.05, |t, o| o[0] = t.sin()),
            Forcing::new("0.1 sin(z)", 1, 1, 0.1, |t, z, o| o[0] = 0.1 * (z[0] + t).sin()),
        );
        let cfg = SolverConfig::default();
        let u = SampledPath::from_scalar_fn(-50.0, 50.0, 0.02, |t| (0.3 * t).cos()).unwrap();
        let m = map_m(&u, &p).unwrap();
        for t in [-5.0, 0.0, 3.0] {
            let a = m.value(m.index_of(t))[0];
            let b = map_m_at(&u, &p, t, &cfg).unwrap()[0];
            assert!((a - b).abs() < 1e-8, "t={t}: {a} vs {b}");
        }
    }

    fn scalar_fit_grid() -> FitGrid {
        FitGrid::standard(&Mat::from_element(1, 1, -1.0), 0, 7)
    }

    #[test]
    fn linear_forcing_solution_matches_closed_form() {
        let p = scalar_problem(Forcing::time_only("sin t", 1, |t, o| o[0] = t.sin()), Forcing::zero(1));
        let sol = solve(&p, &SolverConfig::default(), &scalar_fit_grid()).unwrap();
        assert_eq!(sol.report.contraction_estimate, 0.0);
        let w = sol.windowed().unwrap();
        let err = (0..w.len()).map(|i| (w.value(i)[0] - 0.5 * (w.time(i).sin() - w.time(i).cos())).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn contraction_gate_blocks_and_override_proceeds() {
        let p = scalar_problem(Forcing::affine("3u", 1, 3.0, |t, o| o[0] = t.sin()), Forcing::zero(1));
        let err = solve(&p, &SolverConfig::default(), &scalar_fit_grid()).unwrap_err();
        assert!(matches!(err, Error::Precondition { .. }), "{err}");
        let cfg = SolverConfig { override_gate: true, max_iters: 30, ..SolverConfig::default() };
        let solver = Solver::new(&p, cfg, &scalar_fit_grid()).unwrap();
        let sol = solver.iterate(solver.zero().unwrap()).unwrap();
        assert!(sol.report.gate_overridden);
    }

    #[test]
    fn affine_forcing_converges_within_a_priori_ratio() {
        let p = scalar_problem(Forcing::affine("sin t + 0.05u", 1, 0.05, |t, o| o[0] = t.sin()), Forcing::zero(1));
        let fitted = fit_constants(&p, &scalar_fit_grid()).unwrap();
        let k = contraction_constant(&fitted.inputs).unwrap();
        assert!(k < 0.95, "{:?} -> {k}", fitted.inputs);
        let sol = solve(&p, &SolverConfig::default(), &scalar_fit_grid()).unwrap();
        let ratio = sol.report.observed_ratio.unwrap();
        assert!(ratio <= 1.1 * k, "{ratio} vs {k}");
        // u' = −u + sin t + 0.05u has the periodic solution Im(e^{it}/(i + 0.95)).
        let w = sol.windowed().unwrap();
        let z = num_complex::Complex64::new(0.95, 1.0);
        let err = (0..w.len())
            .map(|i| {
                let t = w.time(i);
                (w.value(i)[0] - (num_complex::Complex64::new(0.0, t).exp() / z).im).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
}
