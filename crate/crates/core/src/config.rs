//! TOML run configuration.
//!
//! Parsing rejects unknown keys and reports every violation at once rather
//! than stopping at the first.

use crate::error::{Error, Result};
use crate::evolution::Exponents;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Allowed keys per table; `*` marks a nested table, `[]` an array of tables.
const SCHEMA: &[(&str, &[&str])] = &[
    (
        "",
        &[
            "seed",
            "tolerances*",
            "horizons*",
            "weights[]",
            "signals[]",
            "family*",
            "estimates*",
            "problem*",
            "heat*",
        ],
    ),
    ("tolerances", &["pap0", "decay_threshold", "zero_floor", "solve", "quad", "verify", "rate", "stepper"]),
    ("horizons", &["first", "ratio", "count"]),
    ("weights", &["name", "expr", "polynomial"]),
    ("signals", &["name", "expr", "ap_part"]),
    ("family", &["matrix", "offset", "sin_terms", "cos_terms", "omega", "step"]),
    ("estimates", &["mu", "alpha", "beta", "extra_vectors"]),
    (
        "problem",
        &[
            "f",
            "g",
            "b",
            "c",
            "lipschitz_f",
            "lipschitz_g",
            "window",
            "step",
            "truncation",
            "max_iters",
            "contraction_gate",
            "weight",
            "candidate",
        ],
    ),
    ("heat", &["n", "length", "m", "gamma", "k_nl", "window", "step", "horizons", "snapshot_stride", "benchmark"]),
];

fn walk(table: &toml::Table, path: &str, errs: &mut Vec<String>) {
    let section = path.rsplit('.').next().unwrap_or("");
    let Some((_, allowed)) = SCHEMA.iter().find(|(n, _)| *n == section) else {
        return;
    };
    for (k, v) in table {
        let key = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        let spec = allowed.iter().find(|a| a.trim_end_matches(['*', '[', ']']) == k);
        match spec {
            None => errs.push(format!("unknown key `{key}`")),
            Some(a) if a.ends_with('*') => match v {
                toml::Value::Table(t) => walk(t, k, errs),
                _ => errs.push(format!("`{key}` must be a table")),
            },
            Some(a) if a.ends_with("[]") => match v {
                toml::Value::Array(items) => {
                    for (i, item) in items.iter().enumerate() {
                        match item {
                            toml::Value::Table(t) => {
                                let mut sub = Vec::new();
                                walk(t, k, &mut sub);
                                errs.extend(sub.into_iter().map(|e| e.replace(&format!("`{k}."), &format!("`{k}[{i}]."))));
                            }
                            _ => errs.push(format!("`{key}[{i}]` must be a table")),
                        }
                    }
                }
                _ => errs.push(format!("`{key}` must be an array of tables")),
            },
            Some(_) => {}
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Tolerances {
    pub pap0: f64,
    pub decay_threshold: f64,
    pub zero_floor: f64,
    pub solve: f64,
    pub quad: f64,
    pub verify: f64,
    /// Relative tolerance on fitted decay rates.
    pub rate: f64,
    pub stepper: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pap0: 1e-2,
            decay_threshold: 0.75,
            zero_floor: 1e-12,
            solve: 1e-10,
            quad: 1e-10,
            verify: 1e-6,
            rate: 0.05,
            stepper: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct HorizonSpec {
    pub first: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for HorizonSpec {
    fn default() -> Self {
        Self {
            first: 10.0,
            ratio: 2.0,
            count: 5,
        }
    }
}

impl HorizonSpec {
    pub fn schedule(&self) -> Vec<f64> {
        crate::pap::geometric_schedule(self.first, self.ratio, self.count)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WeightSpec {
    pub name: String,
    pub expr: Option<String>,
    /// Exponent `m` of `(1+t²)^m`.
    pub polynomial: Option<u32>,
}

impl WeightSpec {
    pub fn build(&self) -> Result<crate::weights::Weight> {
        use crate::weights::Weight;
        match (&self.expr, self.polynomial) {
            (Some(e), None) => Weight::expression(e),
            (None, Some(0)) => Ok(Weight::unit()),
            (None, Some(m)) => Ok(Weight::polynomial(m)),
            _ => Err(Error::Config(vec![format!("weight `{}` needs exactly one of expr, polynomial", self.name)])),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SignalSpec {
    pub name: String,
    /// Expression in `t`.
    pub expr: String,
    /// Candidate almost periodic part, subtracted before the PAP₀ test.
    pub ap_part: Option<String>,
}

/// `A(t) = (offset + Σ aₖ sin(ωₖt) + Σ bₖ cos(ωₖt))·M`; without terms the
/// family is constant.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FamilySpec {
    pub matrix: Vec<Vec<f64>>,
    pub offset: f64,
    /// Pairs `[amplitude, frequency]`.
    pub sin_terms: Vec<[f64; 2]>,
    pub cos_terms: Vec<[f64; 2]>,
    pub omega: f64,
    pub step: f64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            matrix: vec![vec![-1.0]],
            offset: 1.0,
            sin_terms: Vec::new(),
            cos_terms: Vec::new(),
            omega: 0.0,
            step: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EstimateSpec {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub extra_vectors: usize,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        Self {
            mu: 0.0,
            alpha: 0.6,
            beta: 0.8,
            extra_vectors: 4,
        }
    }
}

impl EstimateSpec {
    pub fn exponents(&self) -> Result<Exponents> {
        Exponents::new(self.mu, self.alpha, self.beta)
    }
}

/// Semilinear problem over the configured family. Forcing expressions are
/// in `t` and `z` (scalar problems) or `t, z1, …, zn`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ProblemSpec {
    pub f: Vec<String>,
    pub g: Vec<String>,
    /// Matrices; identity when absent.
    pub b: Option<Vec<Vec<f64>>>,
    pub c: Option<Vec<Vec<f64>>>,
    /// Lipschitz constants; estimated numerically when absent.
    pub lipschitz_f: Option<f64>,
    pub lipschitz_g: Option<f64>,
    pub window: [f64; 2],
    pub step: f64,
    pub truncation: Option<f64>,
    pub max_iters: usize,
    pub contraction_gate: f64,
    /// Name of a `[[weights]]` entry; unit weight when absent.
    pub weight: Option<String>,
    /// Candidate almost periodic part of the solution, one expression in `t`
    /// per component.
    pub candidate: Option<Vec<String>>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            f: Vec::new(),
            g: Vec::new(),
            b: None,
            c: None,
            lipschitz_f: None,
            lipschitz_g: None,
            window: [-10.0, 10.0],
            step: 0.02,
            truncation: None,
            max_iters: 200,
            contraction_gate: 0.95,
            weight: None,
            candidate: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct HeatSpec {
    pub n: usize,
    pub length: f64,
    pub m: u32,
    pub gamma: f64,
    pub k_nl: f64,
    pub window: [f64; 2],
    pub step: f64,
    pub horizons: Vec<f64>,
    pub snapshot_stride: usize,
    /// Also run the single-mode benchmark at `n` and `2n+1`.
    pub benchmark: bool,
}

impl Default for HeatSpec {
    fn default() -> Self {
        let d = crate::heat::HeatDemoConfig::default();
        Self {
            n: d.domain.n,
            length: d.domain.length,
            m: d.m,
            gamma: d.gamma,
            k_nl: d.k_nl,
            window: [d.solver.window.0, d.solver.window.1],
            step: d.solver.step,
            horizons: d.horizons,
            snapshot_stride: d.snapshot_stride,
            benchmark: false,
        }
    }
}

/// A validated configuration file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub tolerances: Tolerances,
    pub horizons: HorizonSpec,
    pub weights: Vec<WeightSpec>,
    pub signals: Vec<SignalSpec>,
    pub family: FamilySpec,
    pub estimates: EstimateSpec,
    pub problem: ProblemSpec,
    pub heat: HeatSpec,
}

/// Minimal ratio between consecutive horizons.
pub const MIN_HORIZON_RATIO: f64 = 1.5;

impl RunConfig {
    /// Every invariant violation, each naming its key.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let t = &self.tolerances;
        for (k, x) in [
            ("pap0", t.pap0),
            ("decay_threshold", t.decay_threshold),
            ("zero_floor", t.zero_floor),
            ("solve", t.solve),
            ("quad", t.quad),
            ("verify", t.verify),
            ("rate", t.rate),
            ("stepper", t.stepper),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("tolerances.{k} must be positive, got {x}"));
            }
        }
        let h = &self.horizons;
        if !(h.first > 0.0) {
            v.push(format!("horizons.first must be positive, got {}", h.first));
        }
        if !(h.ratio >= MIN_HORIZON_RATIO) {
            v.push(format!("horizons.ratio must be at least {MIN_HORIZON_RATIO}, got {}", h.ratio));
        }
        if h.count < 4 {
            v.push(format!("horizons.count must be at least 4, got {}", h.count));
        }
        for (i, w) in self.weights.iter().enumerate() {
            if w.expr.is_some() == w.polynomial.is_some() {
                v.push(format!("weights[{i}] needs exactly one of expr, polynomial"));
            }
        }
        let mut names: Vec<&str> = self.weights.iter().map(|w| w.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            v.push("weights: duplicate names".into());
        }
        let f = &self.family;
        let n = f.matrix.len();
        if n == 0 || f.matrix.iter().any(|r| r.len() != n) {
            v.push("family.matrix must be a non-empty square matrix".into());
        }
        if !(f.step > 0.0) {
            v.push(format!("family.step must be positive, got {}", f.step));
        }
        let p = &self.problem;
        if !(p.window[1] > p.window[0]) {
            v.push("problem.window must be an increasing pair".into());
        }
        if !(p.step > 0.0) {
            v.push(format!("problem.step must be positive, got {}", p.step));
        }
        if !(p.contraction_gate > 0.0 && p.contraction_gate < 1.0) {
            v.push(format!("problem.contraction_gate must lie in (0, 1), got {}", p.contraction_gate));
        }
        for (k, e) in [("f", &p.f), ("g", &p.g)] {
            if !e.is_empty() && e.len() != n {
                v.push(format!("problem.{k} has {} components, family dimension is {n}", e.len()));
            }
        }
        if let Some(w) = &p.weight {
            if !self.weights.iter().any(|x| &x.name == w) {
                v.push(format!("problem.weight `{w}` is not a configured weight"));
            }
        }
        let hs = &self.heat;
        if hs.n < 3 {
            v.push(format!("heat.n must be at least 3, got {}", hs.n));
        }
        if !(hs.length > 0.0) {
            v.push(format!("heat.length must be positive, got {}", hs.length));
        }
        if !(hs.k_nl >= 0.0) {
            v.push(format!("heat.k_nl must be non-negative, got {}", hs.k_nl));
        }
        if !(hs.step > 0.0) {
            v.push(format!("heat.step must be positive, got {}", hs.step));
        }
        if hs.horizons.len() >= 2 {
            let r = hs.horizons[1] / hs.horizons[0];
            if !(r >= MIN_HORIZON_RATIO) {
                v.push(format!("heat.horizons ratio must be at least {MIN_HORIZON_RATIO}, got {r}"));
            }
        }
        v
    }
}

/// Parse and validate TOML text.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let mut errs = Vec::new();
    walk(&table, "", &mut errs);
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    Ok(cfg)
}

/// Read, parse and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(e: Error) -> Vec<String> {
        match e {
            Error::Config(v) => v,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config_str("seed = 3\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.horizons.schedule(), vec![10.0, 20.0, 40.0, 80.0, 160.0]);
    }

    #[test]
    fn negative_tolerance_names_the_key() {
        let m = messages(parse_config_str("[tolerances]\nsolve = -1e-3\n").unwrap_err());
        assert!(m.iter().any(|s| s.contains("tolerances.solve")), "{m:?}");
    }

    #[test]
    fn slow_horizon_ratio_is_rejected() {
        let m = messages(parse_config_str("[horizons]\nratio = 1.2\n").unwrap_err());
        assert!(m.iter().any(|s| s.contains("horizons.ratio")), "{m:?}");
    }

    #[test]
    fn all_unknown_keys_are_reported() {
        let m = messages(parse_config_str("sed = 1\n[tolerances]\nsolv = 1\n[[weights]]\nname = 'a'\nexp = '1'\n").unwrap_err());
        assert_eq!(m.len(), 3, "{m:?}");
        assert!(m.iter().any(|s| s.contains("weights[0].exp")), "{m:?}");
    }

    #[test]
    fn all_violations_are_collected() {
        let m = messages(parse_config_str("[tolerances]\nquad = 0\nverify = -1\n[heat]\nn = 2\n").unwrap_err());
        assert_eq!(m.len(), 3, "{m:?}");
    }
}
