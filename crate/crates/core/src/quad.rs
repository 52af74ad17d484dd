//! Gauss–Legendre rules and composite integration helpers.

use std::f64::consts::PI;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]` with this rule (single panel).
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * x);
        }
        acc * h
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + h * x, w * h))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre integration with a fixed order per panel and a
/// maximum panel width.
#[derive(Debug, Clone)]
pub struct Composite {
    rule: GaussLegendre,
    coarse: GaussLegendre,
    pub max_panel: f64,
}

/// A quadrature value together with the difference between two rule orders,
/// used as an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadValue {
    pub value: f64,
    pub error_bound: f64,
}

impl Default for Composite {
    fn default() -> Self {
        Self::new(10, 0.5)
    }
}

impl Composite {
    pub fn new(order: usize, max_panel: f64) -> Self {
        assert!(max_panel > 0.0);
        Self {
            rule: GaussLegendre::new(order),
            coarse: GaussLegendre::new((order / 2).max(2) + order / 4),
            max_panel,
        }
    }

    pub fn panels(&self, a: f64, b: f64) -> usize {
        (((b - a).abs() / self.max_panel).ceil() as usize).max(1)
    }

    /// Integrate `f` over `[a, b]`; panels are uniform so that symmetric
    /// intervals put a panel boundary at the midpoint when the count is even.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut n = self.panels(a, b);
        if n % 2 == 1 {
            n += 1;
        }
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let lo = a + k as f64 * h;
            acc += self.rule.integrate(lo, lo + h, &mut f);
        }
        acc
    }

    /// Like [`Composite::integrate`] but also reports the difference to a
    /// lower-order rule on the same panels.
    pub fn integrate_with_error<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> QuadValue {
        let mut n = self.panels(a, b);
        if n % 2 == 1 {
            n += 1;
        }
        let h = (b - a) / n as f64;
        let mut fine = 0.0;
        let mut coarse = 0.0;
        for k in 0..n {
            let lo = a + k as f64 * h;
            fine += self.rule.integrate(lo, lo + h, &mut f);
            coarse += self.coarse.integrate(lo, lo + h, &mut f);
        }
        QuadValue {
            value: fine,
            error_bound: (fine - coarse).abs(),
        }
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }
}

/// Trapezoidal integral of uniformly sampled values.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            step * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}
