//! Error-controlled quadrature for smooth and oscillatory complex integrands.
//!
//! Two interchangeable rules are registered:
//!
//! * `phase-panels`: uniform panels sized from the local phase rate so that
//!   every oscillation period carries at least `points_per_period` nodes of a
//!   fixed 16-point Gauss-Legendre rule; panels are doubled until two
//!   successive sums agree.
//! * `gauss-kronrod`: globally adaptive G7/K15 bisection, seeded with the
//!   same phase-resolved initial panels.

use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{Named, Registry};

pub type C64 = Complex64;

/// Magnitude of the derivative of the integrand's phase, used to size panels.
pub type RateFn<'a> = &'a (dyn Fn(f64) -> f64 + Sync);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub points_per_period: usize,
    /// Registered rule name, see [`rules`].
    pub rule: String,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_panels: 1 << 16,
            points_per_period: 8,
            rule: PhasePanels::NAME.to_string(),
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Config("quadrature tolerances must be positive".into()));
        }
        if self.max_panels == 0 {
            return Err(Error::Config("max_panels must be positive".into()));
        }
        if self.points_per_period < 8 {
            return Err(Error::Config("points_per_period must be at least 8".into()));
        }
        rule(&self.rule).map(|_| ())
    }

    pub fn with_rule(mut self, name: &str) -> Self {
        self.rule = name.to_string();
        self
    }

    pub fn rule(&self) -> Result<Arc<dyn QuadratureRule>> {
        rule(&self.rule)
    }

    fn tolerance(&self, value: C64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.norm())
    }

    /// Integrates `f` over consecutive segments of `breaks` with the
    /// configured rule, summing values and error estimates.
    pub fn integrate_segments(&self, f: &(dyn Fn(f64) -> C64 + Sync), breaks: &[f64], rate: Option<RateFn<'_>>) -> Result<Estimate> {
        let rule = self.rule()?;
        let mut total = Estimate::default();
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                total.accumulate(rule.integrate(f, w[0], w[1], rate, self)?);
            }
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub value: C64,
    pub error: f64,
    pub evals: usize,
    pub panels: usize,
}

impl Estimate {
    pub fn accumulate(&mut self, other: Estimate) {
        self.value += other.value;
        self.error += other.error;
        self.evals += other.evals;
        self.panels += other.panels;
    }
}

pub trait QuadratureRule: Named + Send + Sync {
    fn integrate(
        &self,
        f: &(dyn Fn(f64) -> C64 + Sync),
        a: f64,
        b: f64,
        rate: Option<RateFn<'_>>,
        cfg: &QuadratureConfig,
    ) -> Result<Estimate>;
}

pub fn rules() -> &'static Registry<dyn QuadratureRule> {
    static RULES: OnceLock<Registry<dyn QuadratureRule>> = OnceLock::new();
    RULES.get_or_init(|| {
        let mut reg: Registry<dyn QuadratureRule> = Registry::new("quadrature rule");
        reg.register(Arc::new(PhasePanels)).register(Arc::new(GaussKronrod));
        reg
    })
}

pub fn rule(name: &str) -> Result<Arc<dyn QuadratureRule>> {
    rules().get(name)
}

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes

#[derive(Debug, Clone)]
pub struct GaussRule {
    /// Nodes on [-1, 1], ascending.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre rule of order `n` on [-1, 1], cached per order.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(compute_gauss_legendre(n))).clone()
}

fn compute_gauss_legendre(n: usize) -> GaussRule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
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
    GaussRule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Composite Gauss-Legendre nodes and weights over consecutive segments of
/// `breaks`, each split into `panels` equal panels of `order` nodes.
pub fn composite_gauss(breaks: &[f64], panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(order);
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let half = 0.5 * h;
            let mid = lo + half;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                xs.push(mid + half * x);
                ws.push(half * w);
            }
        }
    }
    (xs, ws)
}

/// Composite Simpson weights for `n` uniform samples with spacing `h`
/// (Simpson 3/8 on the last three intervals when `n - 1` is odd).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 => {}
        1 => {}
        2 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        3 => {
            w[0] = h / 3.0;
            w[1] = 4.0 * h / 3.0;
            w[2] = h / 3.0;
        }
        _ => {
            let intervals = n - 1;
            let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
            for i in (0..simpson_end).step_by(2) {
                w[i] += h / 3.0;
                w[i + 1] += 4.0 * h / 3.0;
                w[i + 2] += h / 3.0;
            }
            if simpson_end < intervals {
                let s = simpson_end;
                w[s] += 3.0 * h / 8.0;
                w[s + 1] += 9.0 * h / 8.0;
                w[s + 2] += 9.0 * h / 8.0;
                w[s + 3] += 3.0 * h / 8.0;
            }
        }
    }
    w
}

/// Number of equal panels of `order` nodes needed to put
/// `points_per_period` nodes in every period of the fastest oscillation.
fn phase_resolved_panels(a: f64, b: f64, rate: Option<RateFn<'_>>, order: usize, cfg: &QuadratureConfig) -> usize {
    let Some(rate) = rate else { return 1 };
    const SAMPLES: usize = 64;
    let max_rate = (0..=SAMPLES)
        .map(|i| rate(a + (b - a) * i as f64 / SAMPLES as f64).abs())
        .fold(0.0_f64, f64::max);
    // Interior peaks between samples are covered by the 25% margin.
    let periods = 1.25 * max_rate * (b - a) / (2.0 * PI);
    let panels = (periods * cfg.points_per_period as f64 / order as f64).ceil() as usize;
    panels.max(1)
}

fn gauss_panels(f: &(dyn Fn(f64) -> C64 + Sync), a: f64, b: f64, panels: usize, rule: &GaussRule) -> C64 {
    let h = (b - a) / panels as f64;
    let half = 0.5 * h;
    let mut sum = C64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let mut panel = C64::new(0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            panel += f(mid + half * x) * *w;
        }
        sum += panel * half;
    }
    sum
}

// ---------------------------------------------------------------------------
// phase-panels

/// Fixed-order Gauss panels sized by the phase rate, doubled to convergence.
pub struct PhasePanels;

impl PhasePanels {
    pub const NAME: &'static str = "phase-panels";
    const ORDER: usize = 16;
}

impl Named for PhasePanels {
    fn name(&self) -> &'static str {
        Self::NAME
    }
}

impl QuadratureRule for PhasePanels {
    fn integrate(
        &self,
        f: &(dyn Fn(f64) -> C64 + Sync),
        a: f64,
        b: f64,
        rate: Option<RateFn<'_>>,
        cfg: &QuadratureConfig,
    ) -> Result<Estimate> {
        if b == a {
            return Ok(Estimate::default());
        }
        let rule = gauss_legendre(Self::ORDER);
        let mut panels = phase_resolved_panels(a, b, rate, Self::ORDER, cfg);
        if panels > cfg.max_panels {
            return Err(Error::QuadratureNonconvergence {
                a,
                b,
                error: f64::INFINITY,
                panels,
            });
        }
        let mut coarse = gauss_panels(f, a, b, panels, &rule);
        let mut evals = panels * Self::ORDER;
        loop {
            let fine_panels = 2 * panels;
            if fine_panels > cfg.max_panels {
                let error = f64::INFINITY;
                return Err(Error::QuadratureNonconvergence { a, b, error, panels });
            }
            let fine = gauss_panels(f, a, b, fine_panels, &rule);
            evals += fine_panels * Self::ORDER;
            let error = (fine - coarse).norm();
            if error <= cfg.tolerance(fine) {
                return Ok(Estimate {
                    value: fine,
                    error,
                    evals,
                    panels: fine_panels,
                });
            }
            coarse = fine;
            panels = fine_panels;
        }
    }
}

// ---------------------------------------------------------------------------
// gauss-kronrod

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// G7/K15 pair on one panel: (Kronrod value, |Kronrod - Gauss|).
fn kronrod15(f: &(dyn Fn(f64) -> C64 + Sync), a: f64, b: f64) -> (C64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    (value, error)
}

struct Panel {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) bisection.
pub struct GaussKronrod;

impl GaussKronrod {
    pub const NAME: &'static str = "gauss-kronrod";
}

impl Named for GaussKronrod {
    fn name(&self) -> &'static str {
        Self::NAME
    }
}

impl QuadratureRule for GaussKronrod {
    fn integrate(
        &self,
        f: &(dyn Fn(f64) -> C64 + Sync),
        a: f64,
        b: f64,
        rate: Option<RateFn<'_>>,
        cfg: &QuadratureConfig,
    ) -> Result<Estimate> {
        if b == a {
            return Ok(Estimate::default());
        }
        let initial = phase_resolved_panels(a, b, rate, 15, cfg).min(cfg.max_panels);
        let h = (b - a) / initial as f64;
        let mut heap = BinaryHeap::with_capacity(initial * 2);
        let mut value = C64::new(0.0, 0.0);
        let mut error = 0.0;
        for p in 0..initial {
            let lo = a + p as f64 * h;
            let hi = if p + 1 == initial { b } else { lo + h };
            let (v, e) = kronrod15(f, lo, hi);
            value += v;
            error += e;
            heap.push(Panel {
                a: lo,
                b: hi,
                value: v,
                error: e,
            });
        }
        let mut evals = 15 * initial;
        while error > cfg.tolerance(value) {
            if heap.len() >= cfg.max_panels {
                return Err(Error::QuadratureNonconvergence {
                    a,
                    b,
                    error,
                    panels: heap.len(),
                });
            }
            let worst = heap.pop().expect("nonempty heap");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Panel below floating-point resolution.
                return Err(Error::QuadratureNonconvergence {
                    a,
                    b,
                    error,
                    panels: heap.len() + 1,
                });
            }
            let (v1, e1) = kronrod15(f, worst.a, mid);
            let (v2, e2) = kronrod15(f, mid, worst.b);
            evals += 30;
            value += v1 + v2 - worst.value;
            error += e1 + e2 - worst.error;
            heap.push(Panel {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Panel {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
        }
        // Re-sum in panel order so the result does not depend on heap history.
        let mut panels: Vec<Panel> = heap.into_vec();
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        let value = panels.iter().fold(C64::new(0.0, 0.0), |acc, p| acc + p.value);
        let error = panels.iter().map(|p| p.error).sum();
        Ok(Estimate {
            value,
            error,
            evals,
            panels: panels.len(),
        })
    }
}
