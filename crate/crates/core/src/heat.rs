//! Method-of-lines heat equation with gradient coefficients on `(0, ℓ)` with
//! Dirichlet boundary values:
//! `d/dt[φ + F(t, b∇φ)] = a(t,x)Δφ + G(t, c∇φ)`.

use crate::error::{Error, Result};
use crate::evolution::{
    dichotomy, op_norm, DichotomyGrid, EvolutionFamily, Exponents, FitGrid, LinearFamily, Mat,
    StepperConfig,
};
use crate::expr::Expr;
use crate::mild::{
    contraction_constant, fit_constants, verify_wpap, FittedConstants, FixedPointReport, Forcing, MildProblem,
    OperatorFamily, Solution, Solver, SolverConfig,
};
use crate::pap::{is_pap0, ErgodicDeviation, Pap0Config, SampledPath};
use crate::weights::Weight;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Rational surrogate of `√2` (a continued-fraction convergent).
pub const GAMMA_SURROGATE: f64 = 99.0 / 70.0;

/// Interval `(0, ℓ)` with `n` interior nodes `x_i = i·h`, `h = ℓ/(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain1D {
    pub length: f64,
    pub n: usize,
}

impl Domain1D {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if n < 3 || !(length > 0.0 && length.is_finite()) {
            return Err(Error::pre("heat_demo::Domain1D", format!("need n ≥ 3 and ℓ > 0, got n={n}, ℓ={length}")));
        }
        Ok(Self { length, n })
    }

    pub fn h(&self) -> f64 {
        self.length / (self.n + 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n).map(|i| i as f64 * self.h()).collect()
    }

    /// Nodal values of the first Dirichlet mode `sin(πx/ℓ)`.
    pub fn first_mode(&self) -> Vec<f64> {
        self.nodes().iter().map(|x| (std::f64::consts::PI * x / self.length).sin()).collect()
    }

    /// `2(cos(kπh/ℓ) − 1)/h²`.
    pub fn fd_eigenvalue(&self, k: usize) -> f64 {
        let h = self.h();
        2.0 * ((k as f64 * std::f64::consts::PI * h / self.length).cos() - 1.0) / (h * h)
    }
}

/// Second-difference matrix with the boundary values eliminated.
pub fn assemble_laplacian(d: &Domain1D) -> Mat {
    let n = d.n;
    let k = 1.0 / (d.h() * d.h());
    Mat::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => -2.0 * k,
        1 => k,
        _ => 0.0,
    })
}

/// Centered first-difference matrix; the zero boundary values enter the
/// first and last rows.
pub fn centered_gradient(d: &Domain1D) -> Mat {
    let n = d.n;
    let k = 0.5 / d.h();
    Mat::from_fn(n, n, |i, j| {
        if j == i + 1 {
            k
        } else if i == j + 1 {
            -k
        } else {
            0.0
        }
    })
}

/// A scalar field `(t, x) ↦ v`.
#[derive(Clone)]
pub enum Field {
    Constant(f64),
    Expr(Expr),
    Fn {
        label: String,
        depends_on_t: bool,
        f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({})", self.label())
    }
}

impl Field {
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::Expr(Expr::parse(src, &["t", "x"])?))
    }

    pub fn from_fn(label: impl Into<String>, depends_on_t: bool, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Fn {
            label: label.into(),
            depends_on_t,
            f: Arc::new(f),
        }
    }

    /// `3 + sin(|x|t) + sin(γ|x|t)`.
    pub fn a_gamma(gamma: f64) -> Self {
        Self::from_fn(format!("3 + sin(|x|t) + sin({gamma}|x|t)"), true, move |t, x| {
            3.0 + (x.abs() * t).sin() + (gamma * x.abs() * t).sin()
        })
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Expr(e) => e.eval(&[t, x]),
            Self::Fn { f, .. } => f(t, x),
        }
    }

    pub fn depends_on_t(&self) -> bool {
        match self {
            Self::Constant(_) => false,
            Self::Expr(e) => e.depends_on("t"),
            Self::Fn { depends_on_t, .. } => *depends_on_t,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Constant(c) if *c == 0.0)
    }

    pub fn label(&self) -> String {
        match self {
            Self::Constant(c) => format!("{c}"),
            Self::Expr(e) => e.source().to_string(),
            Self::Fn { label, .. } => label.clone(),
        }
    }

    fn diag(&self, t: f64, xs: &[f64]) -> Mat {
        Mat::from_diagonal(&nalgebra::DVector::from_iterator(xs.len(), xs.iter().map(|x| self.eval(t, *x))))
    }
}

/// Coefficients of the heat problem. The forcing fields split into an almost
/// periodic part and an ergodic part so that the remainder of the solution
/// can be isolated.
#[derive(Debug, Clone)]
pub struct HeatCoefficients {
    pub a: Field,
    pub b: Field,
    pub c: Field,
    pub e_ap: Field,
    pub e_ergodic: Field,
    pub h_ap: Field,
    pub h_ergodic: Field,
    pub k_nl: f64,
}

impl HeatCoefficients {
    /// `a = a_γ`, gradient coefficients `b = c = 1/2`, forcing fields with a
    /// `sech t` ergodic part.
    pub fn demo(gamma: f64, k_nl: f64) -> Self {
        Self {
            a: Field::a_gamma(gamma),
            b: Field::Constant(0.5),
            c: Field::Constant(0.5),
            e_ap: Field::from_fn("sin(t)·x(1−x)", true, |t, x| t.sin() * x * (1.0 - x)),
            e_ergodic: Field::from_fn("sech(t)·x(1−x)", true, |t, x| x * (1.0 - x) / t.cosh()),
            h_ap: Field::from_fn("cos(t) + sin(√2·t)/2", true, move |t, _| t.cos() + 0.5 * (gamma * t).sin()),
            h_ergodic: Field::from_fn("2 sech(t)", true, |t, _| 2.0 / t.cosh()),
            k_nl,
        }
    }

    /// Same coefficients with the ergodic forcing parts removed.
    pub fn ap_only(&self) -> Self {
        Self {
            e_ergodic: Field::Constant(0.0),
            h_ergodic: Field::Constant(0.0),
            ..self.clone()
        }
    }
}

/// Sampled checks on `a`.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientCheck {
    pub inf_a: f64,
    pub hoelder_mu: f64,
    /// Largest `|a(t,x) − a(s,x)| / |t − s|^μ` over the sampled pairs.
    pub hoelder_l: f64,
    pub probe_times: usize,
}

/// Minimum of `a` and the Hölder quotient over a probe grid of `times` and the
/// mesh nodes.
pub fn check_coefficients(d: &Domain1D, a: &Field, times: &[f64], mu: f64) -> Result<CoefficientCheck> {
    const OP: &str = "heat_demo::build_heat_problem";
    let xs = d.nodes();
    let mut inf_a = f64::INFINITY;
    for &t in times {
        for &x in &xs {
            inf_a = inf_a.min(a.eval(t, x));
        }
    }
    if !(inf_a > 0.0) {
        return Err(Error::pre(OP, format!("inf a = {inf_a} ≤ 0 on the probe grid")));
    }
    let mut l = 0.0f64;
    for w in times.windows(2) {
        let dt = (w[1] - w[0]).abs();
        if dt == 0.0 {
            continue;
        }
        for &x in &xs {
            l = l.max((a.eval(w[1], x) - a.eval(w[0], x)).abs() / dt.powf(mu));
        }
    }
    Ok(CoefficientCheck {
        inf_a,
        hoelder_mu: mu,
        hoelder_l: l,
        probe_times: times.len(),
    })
}

/// `n` equispaced probe times on `[−T, T]`.
pub fn probe_times(t: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| -t + 2.0 * t * k as f64 / (n - 1) as f64).collect()
}

/// Discretized problem with its diagnostics.
#[derive(Debug, Clone)]
pub struct HeatProblem {
    pub domain: Domain1D,
    pub problem: MildProblem,
    pub coefficients: CoefficientCheck,
    pub laplacian: Mat,
}

/// Dichotomy sample grid matched to a decay rate near `rate`.
pub fn heat_dichotomy_grid(rate: f64) -> DichotomyGrid {
    let span = 30.0 / rate;
    let mut taus = vec![0.0];
    taus.extend((1..=40).map(|k| span * k as f64 / 40.0));
    DichotomyGrid {
        s_values: (0..5).map(|j| -10.0 + 5.0 * j as f64).collect(),
        taus,
        fit_range: (0.1 * span, span),
    }
}

/// `A(t) = diag(a(t,xᵢ))Δ_h`, `B(t) = diag(b)D_h`, `C(t) = diag(c)D_h`,
/// `F(t,z)ᵢ = K e(t,xᵢ)/(1+|zᵢ|)`, `G(t,z)ᵢ = K h(t,xᵢ)/(1+|zᵢ|)` with the
/// weight `(1+t²)^m`.
pub fn build_heat_problem(
    d: &Domain1D,
    coeffs: &HeatCoefficients,
    m: u32,
    exponents: Exponents,
    stepper: StepperConfig,
) -> Result<HeatProblem> {
    const OP: &str = "heat_demo::build_heat_problem";
    exponents.validate()?;
    if !(exponents.alpha > 0.5) {
        return Err(Error::pre(OP, format!("need α > 1/2, got {}", exponents.alpha)));
    }
    if !(coeffs.k_nl >= 0.0 && coeffs.k_nl.is_finite()) {
        return Err(Error::pre(OP, "K_nl must be finite and non-negative"));
    }
    let xs = d.nodes();
    let lap = assemble_laplacian(d);
    let probes = probe_times(50.0, 2001);
    let check = check_coefficients(d, &coeffs.a, &probes, exponents.mu.max(1e-3))?;

    let family = if coeffs.a.depends_on_t() {
        let (a, xs, lap) = (coeffs.a.clone(), xs.clone(), lap.clone());
        LinearFamily::custom(coeffs.a.label(), move |t| a.diag(t, &xs) * &lap)?
    } else {
        LinearFamily::constant(coeffs.a.diag(0.0, &xs) * &lap)?
    }
    .with_hoelder(check.hoelder_l, check.hoelder_mu);
    let ef = EvolutionFamily::new(family, stepper);
    let rate = check.inf_a * -d.fd_eigenvalue(1);
    let dd = dichotomy(&ef, &heat_dichotomy_grid(rate))?;

    let grad = centered_gradient(d);
    let op_for = |f: &Field| {
        if f.is_zero() {
            OperatorFamily::zero(d.n)
        } else if !f.depends_on_t() {
            OperatorFamily::Constant(f.diag(0.0, &xs) * &grad)
        } else {
            let (f, xs, grad) = (f.clone(), xs.clone(), grad.clone());
            OperatorFamily::custom(f.label(), xs.len(), xs.len(), move |t| f.diag(t, &xs) * &grad)
        }
    };
    let b = op_for(&coeffs.b);
    let c = op_for(&coeffs.c);
    let f = gradient_forcing("F", &coeffs.e_ap, &coeffs.e_ergodic, coeffs.k_nl, &xs, &probes);
    let g = gradient_forcing("G", &coeffs.h_ap, &coeffs.h_ergodic, coeffs.k_nl, &xs, &probes);
    let problem = MildProblem::new(ef, dd, b, c, f, g, Weight::polynomial(m), exponents)?;
    Ok(HeatProblem {
        domain: *d,
        problem,
        coefficients: check,
        laplacian: lap,
    })
}

/// `zᵢ ↦ K (e_ap + e_erg)(t, xᵢ)/(1 + |zᵢ|)`. Its Lipschitz constant in `z` is
/// `K sup|e|`, taken over the probe times.
fn gradient_forcing(name: &str, ap: &Field, erg: &Field, k: f64, xs: &[f64], probes: &[f64]) -> Forcing {
    let n = xs.len();
    if k == 0.0 || (ap.is_zero() && erg.is_zero()) {
        return Forcing::zero(n);
    }
    let sup = probes
        .iter()
        .flat_map(|t| xs.iter().map(move |x| (*t, *x)))
        .map(|(t, x)| (ap.eval(t, x) + erg.eval(t, x)).abs())
        .fold(0.0, f64::max);
    let label = format!("{name} = K({} + {})/(1+|z|)", ap.label(), erg.label());
    let (ap, erg, xs) = (ap.clone(), erg.clone(), xs.to_vec());
    Forcing::new(label, n, n, k * sup, move |t, z, out| {
        for i in 0..xs.len() {
            out[i] = k * (ap.eval(t, xs[i]) + erg.eval(t, xs[i])) / (1.0 + z[i].abs());
        }
    })
}

/// Single-mode benchmark: `a ≡ 1`, no gradient terms, `G = sin(t)·v₁`.
#[derive(Debug, Clone, Serialize)]
pub struct SingleModeReport {
    pub n: usize,
    pub h: f64,
    pub lambda_fd: f64,
    pub lambda_continuous: f64,
    /// Sup error against `Im(e^{it}/(i − λ_h))·v₁`.
    pub error_vs_discrete: f64,
    /// Sup error against `Im(e^{it}/(i + (π/ℓ)²))·sin(πxᵢ/ℓ)`.
    pub error_vs_continuous: f64,
    pub iterates: usize,
}

/// `Im(e^{it}/(i − λ))`.
pub fn mode_response(t: f64, lambda: f64) -> f64 {
    let z = num_complex::Complex64::new(-lambda, 1.0);
    (num_complex::Complex64::new(0.0, t).exp() / z).im
}

pub fn single_mode_benchmark(d: &Domain1D, cfg: &SolverConfig) -> Result<SingleModeReport> {
    let v1 = d.first_mode();
    let n = d.n;
    let lap = assemble_laplacian(d);
    let ef = EvolutionFamily::new(LinearFamily::constant(lap)?, StepperConfig::default());
    let lambda = d.fd_eigenvalue(1);
    let dd = dichotomy(&ef, &heat_dichotomy_grid(-lambda))?;
    let mode = v1.clone();
    let g = Forcing::time_only("sin(t)·v₁", n, move |t, out| {
        for (o, v) in out.iter_mut().zip(&mode) {
            *o = t.sin() * v;
        }
    });
    let p = MildProblem::new(
        ef,
        dd,
        OperatorFamily::zero(n),
        OperatorFamily::zero(n),
        Forcing::zero(n),
        g,
        Weight::unit(),
        Exponents::new(0.0, 0.6, 0.8)?,
    )?;
    let inputs = crate::mild::ContractionInputs {
        k_lipschitz: 0.0,
        varpi: 0.0,
        delta: p.dichotomy.delta,
        alpha: 0.6,
        c_alpha: 0.0,
        m_alpha: 0.0,
        n_alpha_mu: 0.0,
        m_alpha_beta: 0.0,
        k_alpha: 0.0,
    };
    let solver = Solver::with_inputs(&p, cfg.clone(), inputs)?;
    let sol = solver.iterate(solver.zero()?)?;
    let w = sol.windowed()?;
    let lc = -(std::f64::consts::PI / d.length).powi(2);
    let (mut ed, mut ec) = (0.0f64, 0.0f64);
    for i in 0..w.len() {
        let t = w.time(i);
        let (rd, rc) = (mode_response(t, lambda), mode_response(t, lc));
        for (k, u) in w.value(i).iter().enumerate() {
            ed = ed.max((u - rd * v1[k]).abs());
            ec = ec.max((u - rc * v1[k]).abs());
        }
    }
    Ok(SingleModeReport {
        n,
        h: d.h(),
        lambda_fd: lambda,
        lambda_continuous: lc,
        error_vs_discrete: ed,
        error_vs_continuous: ec,
        iterates: sol.report.iterates,
    })
}

/// Settings of the full demo.
#[derive(Debug, Clone, Serialize)]
pub struct HeatDemoConfig {
    pub domain: Domain1D,
    pub gamma: f64,
    pub k_nl: f64,
    pub m: u32,
    pub exponents: Exponents,
    pub solver: SolverConfig,
    pub stepper: StepperConfig,
    pub horizons: Vec<f64>,
    pub pap: Pap0Config,
    /// Every `snapshot_stride`-th grid time enters the field CSV.
    pub snapshot_stride: usize,
}

impl Default for HeatDemoConfig {
    fn default() -> Self {
        Self {
            domain: Domain1D { length: 1.0, n: 15 },
            gamma: GAMMA_SURROGATE,
            k_nl: 0.01,
            m: 2,
            exponents: Exponents {
                mu: 0.1,
                alpha: 0.6,
                beta: 0.8,
            },
            solver: SolverConfig {
                window: (-16.0, 16.0),
                step: 0.01,
                ..SolverConfig::default()
            },
            stepper: StepperConfig::default(),
            horizons: vec![2.0, 4.0, 8.0, 16.0],
            pap: Pap0Config::default(),
            snapshot_stride: 50,
        }
    }
}

/// Everything the demo produces.
#[derive(Debug, Clone, Serialize)]
pub struct HeatDemoOutput {
    pub coefficients: CoefficientCheck,
    pub dichotomy_delta: f64,
    pub dichotomy_n: f64,
    pub fitted: FittedConstants,
    pub contraction: f64,
    pub report: FixedPointReport,
    pub ap_only_report: FixedPointReport,
    /// Ergodic remainder of the solution under `(1+t²)^m`.
    pub remainder_weighted: ErgodicDeviation,
    /// Same remainder under the unit weight.
    pub remainder_unit: ErgodicDeviation,
    pub remainder_ratios: Vec<f64>,
    pub sup_remainder: f64,
    #[serde(skip)]
    pub solution: SampledPath,
    #[serde(skip)]
    pub nodes: Vec<f64>,
    #[serde(skip)]
    pub snapshot_stride: usize,
}

impl HeatDemoOutput {
    /// `t,x,value` rows of the solution on the reporting window, every
    /// `snapshot_stride`-th time.
    pub fn field_csv(&self) -> String {
        use crate::report::fmt_f64;
        let mut s = String::from("t,x,value\n");
        for i in (0..self.solution.len()).step_by(self.snapshot_stride.max(1)) {
            let t = self.solution.time(i);
            for (x, v) in self.nodes.iter().zip(self.solution.value(i)) {
                s.push_str(&format!("{},{},{}\n", fmt_f64(t), fmt_f64(*x), fmt_f64(*v)));
            }
        }
        s
    }

    pub fn deviation_csv(&self) -> String {
        use crate::report::fmt_f64;
        let mut s = String::from("T,weighted,unit\n");
        for (k, t) in self.remainder_weighted.horizons.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(*t),
                fmt_f64(self.remainder_weighted.values[k]),
                fmt_f64(self.remainder_unit.values[k])
            ));
        }
        s
    }
}

fn solve_with(p: &MildProblem, cfg: &SolverConfig, inputs: crate::mild::ContractionInputs) -> Result<Solution> {
    let solver = Solver::with_inputs(p, cfg.clone(), inputs)?;
    let sol = solver.iterate(solver.zero()?)?;
    if !sol.report.converged {
        return Err(Error::NotConverged {
            op: "heat_demo::run_demo",
            detail: format!("{} after {} iterations", sol.report.stop_reason, sol.report.iterates),
        });
    }
    Ok(sol)
}

/// Solve the full problem and its almost periodic counterpart, and test the
/// difference for membership in PAP₀ under `(1+t²)^m` and the unit weight.
pub fn run_demo(cfg: &HeatDemoConfig) -> Result<HeatDemoOutput> {
    const OP: &str = "heat_demo::run_demo";
    let d = Domain1D::new(cfg.domain.length, cfg.domain.n)?;
    let coeffs = HeatCoefficients::demo(cfg.gamma, cfg.k_nl);
    let full = build_heat_problem(&d, &coeffs, cfg.m, cfg.exponents, cfg.stepper.clone())?;
    let ap = build_heat_problem(&d, &coeffs.ap_only(), cfg.m, cfg.exponents, cfg.stepper.clone())?;
    let a0 = full.problem.family.family.at(0.0);
    let fit_grid = FitGrid {
        taus: {
            let span = 30.0 / full.problem.dichotomy.delta;
            (1..=30).map(|k| span * k as f64 / 30.0).collect()
        },
        ..FitGrid::standard(&a0, 2, 11)
    };
    let fitted = fit_constants(&full.problem, &fit_grid)?;
    let contraction = contraction_constant(&fitted.inputs)?;
    let sol = solve_with(&full.problem, &cfg.solver, fitted.inputs.clone())?;
    let sol_ap = solve_with(&ap.problem, &cfg.solver, fitted.inputs.clone())?;
    let (u, v) = (sol.windowed()?, sol_ap.windowed()?);
    let rem = u.sub(&v)?;
    let t_max = cfg.horizons.iter().copied().fold(0.0, f64::max);
    if t_max > cfg.solver.window.1.min(-cfg.solver.window.0) + 1e-9 {
        return Err(Error::pre(OP, "horizons must lie inside the solution window"));
    }
    let weighted = is_pap0(&rem, &Weight::polynomial(cfg.m), &cfg.horizons, &cfg.pap)?;
    let unit = is_pap0(&rem, &Weight::unit(), &cfg.horizons, &cfg.pap)?;
    let check = verify_wpap(&u, &full.problem, None, &cfg.horizons, &cfg.pap, None)?;
    debug_assert!(check.passed);
    Ok(HeatDemoOutput {
        coefficients: full.coefficients.clone(),
        dichotomy_delta: full.problem.dichotomy.delta,
        dichotomy_n: full.problem.dichotomy.n_const,
        fitted,
        contraction,
        report: sol.report,
        ap_only_report: sol_ap.report,
        remainder_ratios: weighted.ratios(),
        remainder_weighted: weighted,
        remainder_unit: unit,
        sup_remainder: rem.sup_norm(),
        solution: u,
        nodes: d.nodes(),
        snapshot_stride: cfg.snapshot_stride,
    })
}

/// `R(ω, aΔ_h)φ` and `(1/a)R(ω/a, Δ_h)φ`, for the resolvent scaling identity.
pub fn resolvent_pair(d: &Domain1D, a: f64, omega: f64, phi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let lap = assemble_laplacian(d);
    let n = d.n;
    let eye = Mat::identity(n, n);
    let x = nalgebra::DVector::from_column_slice(phi);
    let solve = |m: Mat| {
        m.lu()
            .solve(&x)
            .ok_or_else(|| Error::num("heat_demo::resolvent", "singular resolvent"))
    };
    let direct = solve(&eye * omega - &lap * a)?;
    let scaled = solve(&eye * (omega / a) - &lap)? / a;
    Ok((direct.iter().copied().collect(), scaled.iter().copied().collect()))
}

/// `‖Δ_h‖`, the stiffness scale of the discrete operator.
pub fn laplacian_norm(d: &Domain1D) -> f64 {
    op_norm(&assemble_laplacian(d))
}
