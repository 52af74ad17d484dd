//! Subcommand dispatch and artifact writing.
//!
//! Every payload is written through [`Outputs`], which records a SHA-256 per
//! file; `manifest.json` is written last. Only `manifest.timings_ms` varies
//! between reruns of the same configuration.

use crate::ap::{FnSignal, Signal};
use crate::config::{FamilySpec, RunConfig};
use crate::error::{Error, Result};
use crate::evolution::{
    cocycle_defect, dichotomy, fit_estimate, sample_triples, DichotomyGrid, EstimateTarget, EvolutionFamily, FitGrid,
    LinearFamily, Mat, StepperConfig,
};
use crate::expr::Expr;
use crate::heat::{run_demo, single_mode_benchmark, Domain1D, HeatDemoConfig};
use crate::mild::{estimate_lipschitz, mild_identity_residual, verify_wpap, Forcing, MildProblem, OperatorFamily, Solver, SolverConfig};
use crate::pap::{geometric_schedule, is_pap0, ClosedForm, Pap0Config};
use crate::quad::Composite;
use crate::report::{csv_cells, fmt_f64};
use crate::weights::{classify_weight, ergodic_mass, weights_equivalent, LimitConfig, Weight};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    ClassifyWeight,
    TestPap0,
    VerifyDichotomy,
    FitEstimates,
    SolveMild,
    HeatDemo,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Self::ClassifyWeight,
        Self::TestPap0,
        Self::VerifyDichotomy,
        Self::FitEstimates,
        Self::SolveMild,
        Self::HeatDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ClassifyWeight => "classify-weight",
            Self::TestPap0 => "test-pap0",
            Self::VerifyDichotomy => "verify-dichotomy",
            Self::FitEstimates => "fit-estimates",
            Self::SolveMild => "solve-mild",
            Self::HeatDemo => "heat-demo",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(vec![format!("unknown subcommand `{s}`")]))
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub override_gate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: Subcommand,
    pub config_sha256: String,
    pub version: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
    /// Wall-clock milliseconds per phase; the only non-reproducible field.
    pub timings_ms: BTreeMap<String, f64>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// Writes payload files into one directory and records their hashes.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        crate::report::write_text(&self.dir.join(name), body)?;
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: body.len(),
            sha256: sha256_hex(body.as_bytes()),
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.0.insert(phase.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

/// Parse, dispatch and write the manifest.
pub fn run_file(sub: Subcommand, config: &Path, opts: &RunOptions) -> Result<RunManifest> {
    let bytes = std::fs::read(config).map_err(|source| Error::Io {
        path: config.display().to_string(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config(vec!["configuration is not UTF-8".into()]))?;
    let cfg = crate::config::parse_config_str(&text)?;
    run(sub, &cfg, &sha256_hex(&bytes), opts)
}

pub fn run(sub: Subcommand, cfg: &RunConfig, config_sha256: &str, opts: &RunOptions) -> Result<RunManifest> {
    let mut out = Outputs::new(&opts.out)?;
    let mut timer = Timer(BTreeMap::new());
    let seed = opts.seed.unwrap_or(cfg.seed);
    let ctx = Ctx { cfg, seed, opts };
    let result = match sub {
        Subcommand::ClassifyWeight => timer.time("classify-weight", || ctx.classify_weight(&mut out)),
        Subcommand::TestPap0 => timer.time("test-pap0", || ctx.test_pap0(&mut out)),
        Subcommand::VerifyDichotomy => timer.time("verify-dichotomy", || ctx.verify_dichotomy(&mut out)),
        Subcommand::FitEstimates => timer.time("fit-estimates", || ctx.fit_estimates(&mut out)),
        Subcommand::SolveMild => timer.time("solve-mild", || ctx.solve_mild(&mut out)),
        Subcommand::HeatDemo => timer.time("heat-demo", || ctx.heat_demo(&mut out)),
    };
    let manifest = RunManifest {
        subcommand: sub,
        config_sha256: config_sha256.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        files: out.files.clone(),
        timings_ms: timer.0,
    };
    out.json("manifest.json", &manifest)?;
    result.map(|_| manifest)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    opts: &'a RunOptions,
}

/// Scalar signal from an expression in `t`.
pub fn expr_signal(src: &str) -> Result<impl Signal> {
    let e = Expr::parse(src, &["t"])?;
    Ok(FnSignal::new(1, None, move |t, out: &mut [f64]| out[0] = e.eval(&[t])))
}

/// Constant or modulated family from its configuration.
pub fn build_family(spec: &FamilySpec, stepper_tol: f64) -> Result<EvolutionFamily> {
    let n = spec.matrix.len();
    let m = Mat::from_fn(n, n, |i, j| spec.matrix[i][j]);
    let family = if spec.sin_terms.is_empty() && spec.cos_terms.is_empty() {
        LinearFamily::constant(m * spec.offset)?
    } else {
        let mut d = crate::ap::APSignal::zero(1);
        for [a, w] in &spec.sin_terms {
            d = d.add(&crate::ap::APSignal::sin(*w, *a));
        }
        for [a, w] in &spec.cos_terms {
            d = d.add(&crate::ap::APSignal::cos(*w, *a));
        }
        LinearFamily::modulated(m, d, spec.offset)?
    };
    Ok(EvolutionFamily::new(
        family.with_omega(spec.omega),
        StepperConfig {
            step: spec.step,
            tol: stepper_tol,
        },
    ))
}

fn matrix_or_identity(rows: &Option<Vec<Vec<f64>>>, n: usize, key: &str) -> Result<OperatorFamily> {
    match rows {
        None => Ok(OperatorFamily::identity(n)),
        Some(r) => {
            if r.len() != n || r.iter().any(|row| row.len() != n) {
                return Err(Error::Config(vec![format!("problem.{key} must be {n}x{n}")]));
            }
            Ok(OperatorFamily::Constant(Mat::from_fn(n, n, |i, j| r[i][j])))
        }
    }
}

/// Forcing from one expression per component in `t` and `z` (or
/// `z1..zn`). Without an explicit constant the Lipschitz bound is estimated
/// on `|z| ≤ 10` over the window.
fn expr_forcing(name: &str, exprs: &[String], n: usize, lipschitz: Option<f64>, window: (f64, f64), seed: u64) -> Result<Forcing> {
    if exprs.is_empty() {
        return Ok(Forcing::zero(n));
    }
    let vars: Vec<String> = if n == 1 {
        vec!["t".into(), "z".into()]
    } else {
        std::iter::once("t".to_string()).chain((1..=n).map(|k| format!("z{k}"))).collect()
    };
    let names: Vec<&str> = vars.iter().map(String::as_str).collect();
    let parsed: Vec<Expr> = exprs.iter().map(|e| Expr::parse(e, &names)).collect::<Result<_>>()?;
    let label = format!("{name} = [{}]", exprs.join(", "));
    let f = Forcing::new(label, n, n, 0.0, move |t, z, out| {
        let mut args = Vec::with_capacity(n + 1);
        args.push(t);
        args.extend_from_slice(z);
        for (o, e) in out.iter_mut().zip(&parsed) {
            *o = e.eval(&args);
        }
    });
    let l = match lipschitz {
        Some(l) => l,
        None => estimate_lipschitz(&f, window, 10.0, 4000, seed),
    };
    Ok(f.with_lipschitz(l))
}

fn weight_by_name(cfg: &RunConfig, name: &Option<String>) -> Result<Weight> {
    match name {
        None => Ok(Weight::unit()),
        Some(n) => cfg
            .weights
            .iter()
            .find(|w| &w.name == n)
            .ok_or_else(|| Error::Config(vec![format!("unknown weight `{n}`")]))?
            .build(),
    }
}

fn pap_config(cfg: &RunConfig) -> Pap0Config {
    Pap0Config {
        tol: cfg.tolerances.pap0,
        decay_threshold: cfg.tolerances.decay_threshold,
        zero_floor: cfg.tolerances.zero_floor,
        quad: Composite::default(),
    }
}

#[derive(Serialize)]
struct WeightRecord {
    name: String,
    label: String,
    class: crate::weights::WeightClass,
    masses: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct EquivalenceRecord {
    first: String,
    second: String,
    verdict: crate::weights::EquivalenceVerdict,
}

#[derive(Serialize)]
struct Pap0Record {
    signal: String,
    weight: String,
    deviation: crate::pap::ErgodicDeviation,
}

impl Ctx<'_> {
    fn require_weights(&self) -> Result<Vec<(String, Weight)>> {
        if self.cfg.weights.is_empty() {
            return Err(Error::Config(vec!["at least one [[weights]] entry is required".into()]));
        }
        self.cfg.weights.iter().map(|w| Ok((w.name.clone(), w.build()?))).collect()
    }

    fn classify_weight(&self, out: &mut Outputs) -> Result<()> {
        let weights = self.require_weights()?;
        let horizons = self.cfg.horizons.schedule();
        let quad = Composite::default();
        let limits = LimitConfig::default();
        let mut records = Vec::new();
        let mut rows = Vec::new();
        for (name, w) in &weights {
            let class = classify_weight(w, &horizons, &[1.0, 5.0, 10.0], &quad, &limits)?;
            let mut masses = Vec::new();
            for &t in &horizons {
                let m = ergodic_mass(w, t, &quad)?.value;
                rows.push(vec![name.clone(), fmt_f64(t), fmt_f64(m)]);
                masses.push((t, m));
            }
            records.push(WeightRecord {
                name: name.clone(),
                label: w.label(),
                class,
                masses,
            });
        }
        let mut pairs = Vec::new();
        for (i, (n1, w1)) in weights.iter().enumerate() {
            for (n2, w2) in &weights[i + 1..] {
                pairs.push(EquivalenceRecord {
                    first: n1.clone(),
                    second: n2.clone(),
                    verdict: weights_equivalent(w1, w2, &horizons, &limits)?,
                });
            }
        }
        out.json(
            "weights.json",
            &serde_json::json!({ "weights": records, "equivalence": pairs }),
        )?;
        out.text("masses.csv", &csv_cells(&["weight", "T", "mass"], &rows))
    }

    fn test_pap0(&self, out: &mut Outputs) -> Result<()> {
        let weights = self.require_weights()?;
        if self.cfg.signals.is_empty() {
            return Err(Error::Config(vec!["at least one [[signals]] entry is required".into()]));
        }
        let horizons = self.cfg.horizons.schedule();
        let pc = pap_config(self.cfg);
        let mut records = Vec::new();
        let mut rows = Vec::new();
        for s in &self.cfg.signals {
            let src = match &s.ap_part {
                Some(ap) => format!("({}) - ({ap})", s.expr),
                None => s.expr.clone(),
            };
            let sig = expr_signal(&src)?;
            for (wn, w) in &weights {
                let dev = is_pap0(&ClosedForm(&sig), w, &horizons, &pc)?;
                for (t, v) in dev.horizons.iter().zip(&dev.values) {
                    rows.push(vec![s.name.clone(), wn.clone(), fmt_f64(*t), fmt_f64(*v)]);
                }
                records.push(Pap0Record {
                    signal: s.name.clone(),
                    weight: wn.clone(),
                    deviation: dev,
                });
            }
        }
        out.json("pap0.json", &records)?;
        out.text("deviations.csv", &csv_cells(&["signal", "weight", "T", "deviation"], &rows))
    }

    fn verify_dichotomy(&self, out: &mut Outputs) -> Result<()> {
        let ef = build_family(&self.cfg.family, self.cfg.tolerances.stepper)?;
        let dd = dichotomy(&ef, &DichotomyGrid::default())?;
        let triples = sample_triples(24, 10.0, self.seed);
        let defect = cocycle_defect(&ef, &triples)?;
        let rows: Vec<Vec<String>> = dd
            .curve
            .iter()
            .map(|c| vec![fmt_f64(c.tau), fmt_f64(c.stable_norm), fmt_f64(c.unstable_norm)])
            .collect();
        out.json(
            "dichotomy.json",
            &serde_json::json!({
                "family": ef.family.label(),
                "dichotomy": dd,
                "cocycle_defect": defect,
                "cocycle_triples": triples.len(),
            }),
        )?;
        out.text("envelope.csv", &csv_cells(&["tau", "stable", "unstable"], &rows))
    }

    fn fit_estimates(&self, out: &mut Outputs) -> Result<()> {
        let ef = build_family(&self.cfg.family, self.cfg.tolerances.stepper)?;
        let dd = dichotomy(&ef, &DichotomyGrid::default())?;
        let exps = self.cfg.estimates.exponents()?;
        let grid = FitGrid::standard(&ef.family.at(0.0), self.cfg.estimates.extra_vectors, self.seed);
        let mut fits = Vec::new();
        let mut rows = Vec::new();
        for t in EstimateTarget::ALL {
            let fit = fit_estimate(&ef, &dd, t, &exps, &grid, self.cfg.tolerances.rate)?;
            for (tau, y) in &fit.curve {
                rows.push(vec![t.name().to_string(), fmt_f64(*tau), fmt_f64(*y)]);
            }
            fits.push(fit);
        }
        out.json(
            "estimates.json",
            &serde_json::json!({ "delta": dd.delta, "exponents": exps, "fits": fits }),
        )?;
        out.text("estimate_curves.csv", &csv_cells(&["target", "tau", "envelope"], &rows))
    }

    fn solve_mild(&self, out: &mut Outputs) -> Result<()> {
        let cfg = self.cfg;
        let p = &cfg.problem;
        let ef = build_family(&cfg.family, cfg.tolerances.stepper)?;
        let n = ef.dim();
        let dd = dichotomy(&ef, &DichotomyGrid::default())?;
        let window = (p.window[0], p.window[1]);
        let f = expr_forcing("f", &p.f, n, p.lipschitz_f, window, self.seed)?;
        let g = expr_forcing("g", &p.g, n, p.lipschitz_g, window, self.seed.wrapping_add(1))?;
        let problem = MildProblem::new(
            ef,
            dd,
            matrix_or_identity(&p.b, n, "b")?,
            matrix_or_identity(&p.c, n, "c")?,
            f,
            g,
            weight_by_name(cfg, &p.weight)?,
            cfg.estimates.exponents()?,
        )?;
        let sc = SolverConfig {
            window,
            step: p.step,
            truncation: p.truncation,
            solve_tol: cfg.tolerances.solve,
            max_iters: p.max_iters,
            quad_tol: cfg.tolerances.quad,
            verify_tol: cfg.tolerances.verify,
            contraction_gate: p.contraction_gate,
            override_gate: self.opts.override_gate,
        };
        let fit_grid = FitGrid::standard(&problem.family.family.at(0.0), cfg.estimates.extra_vectors, self.seed);
        let solver = Solver::new(&problem, sc.clone(), &fit_grid)?;
        let sol = solver.iterate(solver.zero()?)?;
        let w = sol.windowed()?;
        let span = window.1 - window.0;
        let pairs: Vec<(f64, f64)> = (0..4)
            .map(|k| {
                let s = window.0 + span * (0.1 + 0.2 * k as f64);
                (s, s + 0.1 * span)
            })
            .collect();
        let identity = mild_identity_residual(&sol.path, &problem, &pairs, sc.verify_tol)?;
        let t_half = window.1.min(-window.0);
        let wpap = match (&p.candidate, t_half > 0.0) {
            (Some(c), true) if c.len() == n => {
                let parsed: Vec<Expr> = c.iter().map(|e| Expr::parse(e, &["t"])).collect::<Result<_>>()?;
                let cand = FnSignal::new(n, None, move |t, o: &mut [f64]| {
                    for (v, e) in o.iter_mut().zip(&parsed) {
                        *v = e.eval(&[t]);
                    }
                });
                let horizons = geometric_schedule(t_half / 8.0, 2.0, 4);
                Some(verify_wpap(&w, &problem, Some(&cand), &horizons, &pap_config(cfg), None)?)
            }
            (Some(_), _) => return Err(Error::Config(vec![format!("problem.candidate needs {n} components and a window around 0")])),
            _ => None,
        };
        out.text("solution.csv", &w.to_csv())?;
        out.json(
            "solve_report.json",
            &serde_json::json!({
                "fixed_point": sol.report,
                "mild_identity": identity,
                "wpap": wpap,
            }),
        )?;
        if !sol.report.converged {
            return Err(Error::NotConverged {
                op: "mild_solver::solve",
                detail: format!("{} after {} iterations", sol.report.stop_reason, sol.report.iterates),
            });
        }
        Ok(())
    }

    fn heat_demo(&self, out: &mut Outputs) -> Result<()> {
        let h = &self.cfg.heat;
        let mut dc = HeatDemoConfig::default();
        dc.domain = Domain1D::new(h.length, h.n)?;
        dc.gamma = h.gamma;
        dc.k_nl = h.k_nl;
        dc.m = h.m;
        dc.exponents = self.cfg.estimates.exponents()?;
        dc.solver.window = (h.window[0], h.window[1]);
        dc.solver.step = h.step;
        dc.solver.solve_tol = self.cfg.tolerances.solve;
        dc.solver.override_gate = self.opts.override_gate;
        dc.horizons = h.horizons.clone();
        dc.pap = pap_config(self.cfg);
        dc.snapshot_stride = h.snapshot_stride;
        let demo = run_demo(&dc)?;
        let benchmark = if h.benchmark {
            let bc = SolverConfig {
                window: (-5.0, 5.0),
                ..SolverConfig::default()
            };
            let coarse = single_mode_benchmark(&Domain1D::new(h.length, h.n)?, &bc)?;
            let fine = single_mode_benchmark(&Domain1D::new(h.length, 2 * h.n + 1)?, &bc)?;
            let ratio = coarse.error_vs_continuous / fine.error_vs_continuous;
            Some(serde_json::json!({ "coarse": coarse, "fine": fine, "halving_ratio": ratio }))
        } else {
            None
        };
        out.text("heat_field.csv", &demo.field_csv())?;
        out.text("heat_deviation.csv", &demo.deviation_csv())?;
        out.json("heat_report.json", &serde_json::json!({ "demo": demo, "benchmark": benchmark }))
    }
}
