//! The Fourier-type transform V pairing branch functions against conjugated
//! generalized eigenfunctions, the weighted spectral norm |·|_q, and the
//! reconstruction of physical initial data from a first-channel profile.
//!
//! Sampled functions carry their own quadrature weights, so every transform
//! or norm on sampled data is a deterministic weighted sum.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::profile::SpectralProfile;
use crate::quadrature::{composite_gauss, simpson_weights, QuadratureConfig};
use crate::spectral::{Branch, StarGraph};

type BranchFn = dyn Fn(Branch, f64) -> C64 + Send + Sync;

/// A function on the two half-axes, truncated to [0, x_max].
#[derive(Clone)]
pub enum BranchFunction {
    Callable { f: Arc<BranchFn>, x_max: f64 },
    Sampled(BranchSamples),
}

impl fmt::Debug for BranchFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchFunction::Callable { x_max, .. } => f.debug_struct("Callable").field("x_max", x_max).finish(),
            BranchFunction::Sampled(s) => s.fmt(f),
        }
    }
}

impl BranchFunction {
    pub fn callable(x_max: f64, f: impl Fn(Branch, f64) -> C64 + Send + Sync + 'static) -> Self {
        BranchFunction::Callable { f: Arc::new(f), x_max }
    }

    pub fn x_max(&self) -> f64 {
        match self {
            BranchFunction::Callable { x_max, .. } => *x_max,
            BranchFunction::Sampled(s) => s.nodes.last().copied().unwrap_or(0.0),
        }
    }

    /// Samples onto `grid`.
    pub fn sample(&self, grid: &XGrid) -> BranchSamples {
        match self {
            BranchFunction::Sampled(s) => s.clone(),
            BranchFunction::Callable { f, .. } => {
                let (nodes, weights) = grid.nodes_weights();
                let values = Branch::ALL.map(|b| nodes.par_iter().map(|&x| f(b, x)).collect());
                BranchSamples {
                    nodes,
                    weights,
                    values,
                    step: grid.step(),
                }
            }
        }
    }
}

/// Samples of a branch function on a shared grid with quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSamples {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Values on branch 1 and branch 2.
    pub values: [Vec<C64>; 2],
    /// Spacing when the grid is uniform.
    pub step: Option<f64>,
}

impl BranchSamples {
    pub fn zeros(grid: &XGrid) -> Self {
        let (nodes, weights) = grid.nodes_weights();
        let n = nodes.len();
        Self {
            nodes,
            weights,
            values: [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]],
            step: grid.step(),
        }
    }

    /// ‖f‖_H.
    pub fn h_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.iter().zip(&self.weights).map(|(f, w)| w * f.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            v.iter_mut().for_each(|z| *z *= c);
        }
        out
    }

    /// Writes `branch,coordinate,re,im` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["branch", "coordinate", "re", "im"])?;
        for b in Branch::ALL {
            for (x, z) in self.nodes.iter().zip(&self.values[b.slot()]) {
                wr.write_record(&[b.index().to_string(), x.to_string(), z.re.to_string(), z.im.to_string()])?;
            }
        }
        wr.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    /// Reads a uniform grid written by [`BranchSamples::write_csv`];
    /// integration weights are composite Simpson.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let rows = read_rows(r)?;
        let mut coords: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut values: [Vec<C64>; 2] = [Vec::new(), Vec::new()];
        for (b, x, z) in rows {
            coords[b.slot()].push(x);
            values[b.slot()].push(z);
        }
        if coords[0] != coords[1] {
            return Err(Error::Csv("branches must share one coordinate grid".into()));
        }
        let nodes = coords[0].clone();
        let step = uniform_step(&nodes).ok_or_else(|| Error::Csv("sampled branch grid must be uniform".into()))?;
        let weights = simpson_weights(nodes.len(), step);
        Ok(Self {
            nodes,
            weights,
            values,
            step: Some(step),
        })
    }
}

fn uniform_step(nodes: &[f64]) -> Option<f64> {
    if nodes.len() < 2 {
        return None;
    }
    let h = (nodes[nodes.len() - 1] - nodes[0]) / (nodes.len() - 1) as f64;
    let ok = h > 0.0 && nodes.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
    ok.then_some(h)
}

fn read_rows<R: Read>(r: R) -> Result<Vec<(Branch, f64, C64)>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    let expected = ["branch", "coordinate", "re", "im"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Csv(format!("expected header {:?}, got {:?}", expected, headers)));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> { rec[i].trim().parse::<f64>().map_err(|e| Error::Csv(format!("field {i}: {e}"))) };
        let b = Branch::from_index(parse(0)? as usize).ok_or_else(|| Error::Csv("branch must be 1 or 2".into()))?;
        out.push((b, parse(1)?, C64::new(parse(2)?, parse(3)?)));
    }
    Ok(out)
}

/// Spatial sampling grid on [0, x_max].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XGrid {
    /// Uniform samples with spacing `h`, Simpson weights.
    Uniform { h: f64, x_max: f64 },
    /// Composite Gauss-Legendre panels of width at most `panel_width`.
    Gauss { x_max: f64, panel_width: f64, order: usize },
}

impl XGrid {
    /// Gauss panels carrying eight nodes per period of the given wavenumber.
    pub fn resolving(x_max: f64, max_wavenumber: f64) -> Self {
        let order = 16;
        let period = 2.0 * std::f64::consts::PI / max_wavenumber.max(1e-3);
        XGrid::Gauss {
            x_max,
            panel_width: period * order as f64 / 8.0,
            order,
        }
    }

    pub fn nodes_weights(&self) -> (Vec<f64>, Vec<f64>) {
        match *self {
            XGrid::Uniform { h, x_max } => {
                let n = (x_max / h).round() as usize + 1;
                let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
                let weights = simpson_weights(n, h);
                (nodes, weights)
            }
            XGrid::Gauss { x_max, panel_width, order } => {
                let panels = (x_max / panel_width).ceil().max(1.0) as usize;
                composite_gauss(&[0.0, x_max], panels, order)
            }
        }
    }

    pub fn step(&self) -> Option<f64> {
        match *self {
            XGrid::Uniform { h, .. } => Some(h),
            XGrid::Gauss { .. } => None,
        }
    }

    pub fn x_max(&self) -> f64 {
        match *self {
            XGrid::Uniform { x_max, .. } | XGrid::Gauss { x_max, .. } => x_max,
        }
    }
}

/// Change of spectral variable on one side of the threshold a₂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelMap {
    /// λ = a₁ + (a₂ − a₁) sin²θ on (a₁, a₂), θ ∈ [0, π/2].
    Evanescent { a1: f64, gap: f64 },
    /// λ = a₂ + p² on (a₂, ∞), p = ξ₂.
    Propagating { a2: f64 },
}

impl ChannelMap {
    pub fn lambda(&self, u: f64) -> f64 {
        match *self {
            ChannelMap::Evanescent { a1, gap } => a1 + gap * u.sin().powi(2),
            ChannelMap::Propagating { a2 } => a2 + u * u,
        }
    }

    /// dλ/du.
    pub fn jacobian(&self, u: f64) -> f64 {
        match *self {
            ChannelMap::Evanescent { gap, .. } => gap * (2.0 * u).sin(),
            ChannelMap::Propagating { .. } => 2.0 * u,
        }
    }

    pub fn inverse(&self, lambda: f64) -> f64 {
        match *self {
            ChannelMap::Evanescent { a1, gap } => ((lambda - a1) / gap).clamp(0.0, 1.0).sqrt().asin(),
            ChannelMap::Propagating { a2 } => (lambda - a2).max(0.0).sqrt(),
        }
    }
}

/// Mapped segments covering [a_k, lambda_max] for channel `k`, each with
/// ascending breakpoints in its own variable.
fn channel_segments(graph: &StarGraph, k: Branch, lambda_max: f64, breaks: &[f64]) -> Vec<(ChannelMap, Vec<f64>)> {
    let (a1, a2) = (graph.pots.a1, graph.pots.a2);
    let mut out = Vec::new();
    let mut push = |map: ChannelMap, lo: f64, hi: f64| {
        if hi <= lo {
            return;
        }
        let mut us: Vec<f64> = std::iter::once(lo)
            .chain(breaks.iter().copied().filter(|&l| l > lo && l < hi))
            .chain(std::iter::once(hi))
            .map(|l| map.inverse(l))
            .collect();
        us.sort_by(f64::total_cmp);
        us.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
        out.push((map, us));
    };
    if k == Branch::One && a2 > a1 {
        push(ChannelMap::Evanescent { a1, gap: a2 - a1 }, a1, lambda_max.min(a2));
    }
    push(ChannelMap::Propagating { a2 }, a2, lambda_max);
    out
}

/// Spectral nodes per channel with dλ quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    pub nodes: [Vec<f64>; 2],
    pub weights: [Vec<f64>; 2],
}

impl LambdaGrid {
    /// The same Gauss nodes on both channels over consecutive `breaks`.
    pub fn on_breaks(breaks: &[f64], panels: usize, order: usize) -> Self {
        let (x, w) = composite_gauss(breaks, panels, order);
        Self {
            nodes: [x.clone(), x],
            weights: [w.clone(), w],
        }
    }

    /// Gauss nodes on [a_k, lambda_max] for each channel in variables that
    /// make both ξ₁ and ξ₂ analytic (see [`ChannelMap`]). `breaks` (in λ)
    /// become panel boundaries; panels are at most `panel_width` wide in the
    /// mapped variable and at least four per segment.
    pub fn spectral(graph: &StarGraph, lambda_max: f64, breaks: &[f64], panel_width: f64, order: usize) -> Self {
        let mut nodes: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut weights: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for k in Branch::ALL {
            for (map, seg) in channel_segments(graph, k, lambda_max, breaks) {
                for w in seg.windows(2) {
                    let panels = ((w[1] - w[0]) / panel_width).ceil().max(4.0) as usize;
                    let (us, ws) = composite_gauss(w, panels, order);
                    for (u, wt) in us.into_iter().zip(ws) {
                        nodes[k.slot()].push(map.lambda(u));
                        weights[k.slot()].push(map.jacobian(u) * wt);
                    }
                }
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes[0].len() + self.nodes[1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A pair (g₁, g₂) sampled on a [`LambdaGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub grid: LambdaGrid,
    pub values: [Vec<C64>; 2],
}

impl SpectralPair {
    pub fn from_fn(grid: &LambdaGrid, g: impl Fn(Branch, f64) -> C64) -> Self {
        let values = Branch::ALL.map(|k| grid.nodes[k.slot()].iter().map(|&l| g(k, l)).collect());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &LambdaGrid) -> Self {
        Self::from_fn(grid, |_, _| C64::new(0.0, 0.0))
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            v.iter_mut().for_each(|z| *z *= c);
        }
        out
    }

    /// Pointwise difference; both pairs must live on the same grid.
    pub fn difference(&self, other: &SpectralPair) -> Self {
        assert_eq!(self.grid, other.grid, "spectral pairs on different grids");
        let values = Branch::ALL.map(|k| {
            self.values[k.slot()]
                .iter()
                .zip(&other.values[k.slot()])
                .map(|(a, b)| a - b)
                .collect()
        });
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Restricts channel `k` to λ outside [lo, hi] (values inside set to zero).
    pub fn outside(&self, lo: f64, hi: f64) -> Self {
        let mut out = self.clone();
        for k in Branch::ALL {
            for (z, &l) in out.values[k.slot()].iter_mut().zip(&self.grid.nodes[k.slot()]) {
                if (lo..=hi).contains(&l) {
                    *z = C64::new(0.0, 0.0);
                }
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["branch", "coordinate", "re", "im"])?;
        for k in Branch::ALL {
            for (l, z) in self.grid.nodes[k.slot()].iter().zip(&self.values[k.slot()]) {
                wr.write_record(&[k.index().to_string(), l.to_string(), z.re.to_string(), z.im.to_string()])?;
            }
        }
        wr.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    /// Reads rows written by [`SpectralPair::write_csv`]. Weights are
    /// reconstructed with the trapezoid rule on the stored nodes.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut nodes: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut values: [Vec<C64>; 2] = [Vec::new(), Vec::new()];
        for (k, l, z) in read_rows(r)? {
            nodes[k.slot()].push(l);
            values[k.slot()].push(z);
        }
        let weights = nodes.clone().map(|n| trapezoid_weights(&n));
        Ok(Self {
            grid: LambdaGrid { nodes, weights },
            values,
        })
    }
}

fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = 0.5 * (nodes[i] - nodes[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

/// conj(F^{-,k}_{λ,b}(x)) with the λ-dependent coefficients hoisted out.
/// Above a_b, ξ_b is real; below it the branch convention gives ξ_b = -iκ.
struct ConjKernel {
    k: Branch,
    /// Per branch: Ok(ξ) for real ξ, Err(κ) for ξ = -iκ.
    xi: [std::result::Result<f64, f64>; 2],
    /// conj(s_k), used on branch k where ξ_k is real.
    s_conj: C64,
}

impl ConjKernel {
    fn new(graph: &StarGraph, k: Branch, lambda: f64) -> Option<Self> {
        if lambda <= graph.a(k) {
            return None;
        }
        let s_conj = graph.s(k, lambda).ok()?.conj();
        let xi = Branch::ALL.map(|b| {
            let z = graph.xi(b, lambda);
            if lambda >= graph.a(b) {
                Ok(z.re)
            } else {
                Err(-z.im)
            }
        });
        Some(Self { k, xi, s_conj })
    }

    fn eval(&self, b: Branch, x: f64) -> C64 {
        match self.xi[b.slot()] {
            Ok(xi) => {
                let (sin, cos) = (xi * x).sin_cos();
                if b == self.k {
                    // cos(ξx) + i conj(s) sin(ξx)
                    C64::new(cos - self.s_conj.im * sin, self.s_conj.re * sin)
                } else {
                    C64::new(cos, sin)
                }
            }
            // Only reachable off-diagonal: exp(-iξx) = exp(-κx), real.
            Err(kappa) => C64::new((-kappa * x).exp(), 0.0),
        }
    }
}

fn transform_samples(samples: &BranchSamples, grid: &LambdaGrid, graph: &StarGraph) -> SpectralPair {
    let values = Branch::ALL.map(|k| {
        grid.nodes[k.slot()]
            .par_iter()
            .map(|&lambda| {
                let Some(kernel) = ConjKernel::new(graph, k, lambda) else {
                    return C64::new(0.0, 0.0);
                };
                let mut acc = C64::new(0.0, 0.0);
                for b in Branch::ALL {
                    let vals = &samples.values[b.slot()];
                    for ((x, w), f) in samples.nodes.iter().zip(&samples.weights).zip(vals) {
                        if *f != C64::new(0.0, 0.0) {
                            acc += f * kernel.eval(b, *x) * *w;
                        }
                    }
                }
                acc
            })
            .collect()
    });
    SpectralPair {
        grid: grid.clone(),
        values,
    }
}

/// (Vf)_k(λ) = ∫_N f(x) conj(F^{-,k}_λ(x)) dx on every node of `grid`.
///
/// Sampled input is summed with its own weights. Callable input is sampled
/// on Gauss panels resolving the fastest kernel oscillation, and the panel
/// count is doubled until two successive transforms agree to `quad`
/// tolerances at every node.
pub fn forward_transform(f: &BranchFunction, grid: &LambdaGrid, graph: &StarGraph, quad: &QuadratureConfig) -> Result<SpectralPair> {
    match f {
        BranchFunction::Sampled(s) => Ok(transform_samples(s, grid, graph)),
        BranchFunction::Callable { x_max, .. } => {
            let max_xi = grid
                .nodes
                .iter()
                .flatten()
                .map(|&l| graph.xi(Branch::One, l).re.max(graph.xi(Branch::Two, l).re))
                .fold(1.0_f64, f64::max);
            let mut x_grid = XGrid::resolving(*x_max, max_xi);
            let mut coarse = transform_samples(&f.sample(&x_grid), grid, graph);
            let mut panels = (*x_max / panel_width(&x_grid)).ceil() as usize;
            loop {
                let XGrid::Gauss { panel_width, order, .. } = x_grid else {
                    unreachable!()
                };
                x_grid = XGrid::Gauss {
                    x_max: *x_max,
                    panel_width: 0.5 * panel_width,
                    order,
                };
                panels *= 2;
                let fine = transform_samples(&f.sample(&x_grid), grid, graph);
                let (worst_lambda, worst_err, scale) = worst_difference(&coarse, &fine);
                let tol = quad.abs_tol.max(quad.rel_tol * scale);
                if worst_err <= tol {
                    return Ok(fine);
                }
                if panels > quad.max_panels {
                    return Err(Error::TransformNonconvergence {
                        lambda: worst_lambda,
                        error: worst_err,
                    });
                }
                coarse = fine;
            }
        }
    }
}

fn panel_width(g: &XGrid) -> f64 {
    match *g {
        XGrid::Gauss { panel_width, .. } => panel_width,
        XGrid::Uniform { h, .. } => h,
    }
}

fn worst_difference(a: &SpectralPair, b: &SpectralPair) -> (f64, f64, f64) {
    let mut worst = (f64::NAN, 0.0);
    let mut scale: f64 = 0.0;
    for k in Branch::ALL {
        for ((l, x), y) in a.grid.nodes[k.slot()].iter().zip(&a.values[k.slot()]).zip(&b.values[k.slot()]) {
            scale = scale.max(y.norm());
            let d = (x - y).norm();
            if d > worst.1 {
                worst = (*l, d);
            }
        }
    }
    (worst.0, worst.1, scale)
}

/// |g|_q for a sampled pair: (Σ_k ∫ q_k |g_k|² dλ)^{1/2} with the grid weights.
pub fn q_norm(g: &SpectralPair, graph: &StarGraph) -> f64 {
    Branch::ALL
        .iter()
        .map(|&k| {
            g.grid.nodes[k.slot()]
                .iter()
                .zip(&g.grid.weights[k.slot()])
                .zip(&g.values[k.slot()])
                .map(|((&l, &w), z)| w * graph.q(k, l) * z.norm_sqr())
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// |g|_q for callable channels on [a_k, lambda_max] by adaptive quadrature
/// in the variables of [`ChannelMap`].
pub fn q_norm_fn(g: &(dyn Fn(Branch, f64) -> C64 + Sync), lambda_max: f64, graph: &StarGraph, quad: &QuadratureConfig) -> Result<f64> {
    let mut total = 0.0;
    for k in Branch::ALL {
        for (map, seg) in channel_segments(graph, k, lambda_max, &[]) {
            let integrand = |u: f64| {
                let l = map.lambda(u);
                C64::new(map.jacobian(u) * graph.q(k, l) * g(k, l).norm_sqr(), 0.0)
            };
            total += quad.integrate_segments(&integrand, &seg, None)?.value.re;
        }
    }
    Ok(total.max(0.0).sqrt())
}

/// u₀ on branch `b` at `x`: ∫ q₁(λ) ψ̃(λ) F^{-,1}_{λ,b}(x) dλ over the band.
pub fn initial_value(profile: &SpectralProfile, graph: &StarGraph, b: Branch, x: f64, quad: &QuadratureConfig) -> Result<C64> {
    if profile.is_zero() {
        return Ok(C64::new(0.0, 0.0));
    }
    let i = C64::new(0.0, 1.0);
    let integrand = |lambda: f64| {
        let weight = graph.q(Branch::One, lambda) * profile.eval(lambda);
        if weight == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let f = if b == Branch::One {
            let xi1 = graph.xi(Branch::One, lambda);
            // s_1 = -ξ₂/ξ₁; λ > a₂ ≥ a₁ in the band so ξ₁ > 0.
            let s1 = -graph.xi(Branch::Two, lambda) / xi1;
            (xi1 * x).cos() - i * s1 * (xi1 * x).sin()
        } else {
            (-i * graph.xi(Branch::Two, lambda) * x).exp()
        };
        f * weight
    };
    let rate = |lambda: f64| x / (2.0 * graph.xi(b, lambda).re.max(1e-12));
    Ok(quad.integrate_segments(&integrand, &profile.breakpoints(), Some(&rate))?.value)
}

/// Spectral rule for u₀ on branch `b`: Gauss panels in ξ_b between the
/// profile knots carrying `points_per_period` nodes per period of e^{iξ_b x}
/// for x ≤ x_max. Returns nodes λ and weights dλ·q₁·ψ̃; zero weights dropped.
fn initial_rule(profile: &SpectralProfile, graph: &StarGraph, b: Branch, x_max: f64, points_per_period: usize) -> (Vec<f64>, Vec<f64>) {
    const ORDER: usize = 16;
    let a = graph.a(b);
    let xi_knots: Vec<f64> = profile.breakpoints().iter().map(|l| (l - a).sqrt()).collect();
    let (mut lambdas, mut weights) = (Vec::new(), Vec::new());
    for seg in xi_knots.windows(2) {
        let periods = (seg[1] - seg[0]) * x_max.max(1.0) / (2.0 * std::f64::consts::PI);
        let panels = (periods * points_per_period as f64 / ORDER as f64).ceil().max(2.0) as usize;
        let (xs, ws) = composite_gauss(seg, panels, ORDER);
        for (xi, w) in xs.into_iter().zip(ws) {
            let l = a + xi * xi;
            let v = graph.q(Branch::One, l) * profile.eval(l);
            if v != 0.0 {
                lambdas.push(l);
                weights.push(2.0 * xi * w * v);
            }
        }
    }
    (lambdas, weights)
}

/// u₀ on both branches at `nodes` by a fixed spectral rule; see [`initial_rule`].
fn initial_samples(profile: &SpectralProfile, graph: &StarGraph, nodes: &[f64], points_per_period: usize) -> [Vec<C64>; 2] {
    let x_max = nodes.iter().copied().fold(0.0, f64::max);
    Branch::ALL.map(|b| {
        let (lambdas, weights) = initial_rule(profile, graph, b, x_max, points_per_period);
        // In the band both ξ are real; s₁ = -ξ₂/ξ₁ is real.
        let terms: Vec<(f64, f64, f64)> = lambdas
            .iter()
            .zip(&weights)
            .map(|(&l, &w)| {
                let xi1 = graph.xi(Branch::One, l).re;
                let xi2 = graph.xi(Branch::Two, l).re;
                match b {
                    Branch::One => (xi1, xi2 / xi1, w),
                    Branch::Two => (xi2, 0.0, w),
                }
            })
            .collect();
        nodes
            .par_iter()
            .map(|&x| {
                let mut acc = C64::new(0.0, 0.0);
                for &(xi, ratio, w) in &terms {
                    let (sin, cos) = (xi * x).sin_cos();
                    acc += match b {
                        // cos(ξ₁x) - i s₁ sin(ξ₁x)
                        Branch::One => C64::new(cos, ratio * sin) * w,
                        Branch::Two => C64::new(cos, -sin) * w,
                    };
                }
                acc
            })
            .collect()
    })
}

/// Candidate u₀ with first-channel spectral data ψ̃ and no second channel,
/// sampled on `x_grid`. The λ-integral uses a fixed Gauss rule in ξ_k sized
/// from `quad.points_per_period` and the grid extent; [`initial_value`] is
/// the adaptive single-point counterpart.
pub fn reconstruct_initial(
    profile: &SpectralProfile,
    graph: &StarGraph,
    x_grid: &XGrid,
    quad: &QuadratureConfig,
) -> Result<BranchFunction> {
    quad.validate()?;
    let mut samples = BranchSamples::zeros(x_grid);
    if !profile.is_zero() {
        samples.values = initial_samples(profile, graph, &samples.nodes, quad.points_per_period);
    }
    Ok(BranchFunction::Sampled(samples))
}

/// Fastest spatial wavenumber present in u₀ for `profile`.
pub fn max_wavenumber(profile: &SpectralProfile, graph: &StarGraph) -> f64 {
    let (_, lmax) = profile.support();
    graph.xi(Branch::One, lmax).re.max(graph.xi(Branch::Two, lmax).re)
}

/// Smallest X (doubling from `start`) such that the L² mass of u₀ on
/// [X, 2X] is below `tail_tol` times the mass on [0, X].
pub fn select_x_max(
    profile: &SpectralProfile,
    graph: &StarGraph,
    quad: &QuadratureConfig,
    start: f64,
    tail_tol: f64,
    limit: f64,
) -> Result<f64> {
    if profile.is_zero() {
        return Ok(start);
    }
    let k = max_wavenumber(profile, graph);
    let mass = |lo: f64, hi: f64| -> f64 {
        let (nodes, weights) = XGrid::resolving(hi - lo, 2.0 * k).nodes_weights();
        let shifted: Vec<f64> = nodes.iter().map(|x| lo + x).collect();
        let values = initial_samples(profile, graph, &shifted, quad.points_per_period);
        values
            .iter()
            .map(|v| v.iter().zip(&weights).map(|(z, w)| w * z.norm_sqr()).sum::<f64>())
            .sum()
    };
    let mut x = start;
    let mut inner = mass(0.0, x);
    loop {
        let tail = mass(x, 2.0 * x);
        if tail <= tail_tol * inner {
            return Ok(x);
        }
        if 2.0 * x > limit {
            return Err(Error::TruncationNotConverged {
                x_cut: x,
                tail: tail / inner,
            });
        }
        inner += tail;
        x *= 2.0;
    }
}

/// Outcome of `forward_transform(reconstruct_initial(ψ̃))` against (ψ̃, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub x_max: f64,
    pub target_norm: f64,
    pub residual: f64,
    /// Relative q-norm of the recovered transform outside the band.
    pub outside_mass: f64,
}

impl RoundTrip {
    pub fn relative_residual(&self) -> f64 {
        if self.target_norm == 0.0 {
            self.residual
        } else {
            self.residual / self.target_norm
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTripOptions {
    /// Relative tail mass defining the truncation radius of u₀.
    pub tail_tol: f64,
    /// Spectral grid extends to a₂ + this margin.
    pub lambda_margin: f64,
    /// Maximum ξ-panel width of the spectral grid.
    pub xi_panel: f64,
}

impl Default for RoundTripOptions {
    fn default() -> Self {
        Self {
            tail_tol: 1e-12,
            lambda_margin: 2.0,
            xi_panel: 0.02,
        }
    }
}

/// Reconstructs u₀ from ψ̃, transforms it back and measures the residual.
pub fn round_trip(
    profile: &SpectralProfile,
    graph: &StarGraph,
    quad: &QuadratureConfig,
    opts: RoundTripOptions,
) -> Result<(BranchFunction, RoundTrip)> {
    let x_max = select_x_max(profile, graph, quad, 32.0, opts.tail_tol, 1e5)?;
    let x_grid = XGrid::resolving(x_max, 2.0 * max_wavenumber(profile, graph));
    let u0 = reconstruct_initial(profile, graph, &x_grid, quad)?;
    let lambda_grid = LambdaGrid::spectral(graph, graph.pots.a2 + opts.lambda_margin, &profile.breakpoints(), opts.xi_panel, 8);
    let recovered = forward_transform(&u0, &lambda_grid, graph, quad)?;
    let target = SpectralPair::from_fn(&lambda_grid, |k, l| match k {
        Branch::One => C64::new(profile.eval(l), 0.0),
        Branch::Two => C64::new(0.0, 0.0),
    });
    let target_norm = q_norm(&target, graph);
    let residual = q_norm(&recovered.difference(&target), graph);
    let (lo, hi) = profile.support();
    let outside = q_norm(&recovered.outside(lo, hi), graph);
    let outside_mass = if target_norm > 0.0 { outside / target_norm } else { outside };
    Ok((
        u0,
        RoundTrip {
            x_max,
            target_norm,
            residual,
            outside_mass,
        },
    ))
}

/// [`round_trip`] that fails when the relative residual exceeds `tolerance`.
pub fn reconstruct_verified(
    profile: &SpectralProfile,
    graph: &StarGraph,
    quad: &QuadratureConfig,
    opts: RoundTripOptions,
    tolerance: f64,
) -> Result<(BranchFunction, RoundTrip)> {
    let (u0, report) = round_trip(profile, graph, quad, opts)?;
    let residual = report.relative_residual();
    if residual > tolerance {
        return Err(Error::RoundTripFailure { residual, tolerance });
    }
    Ok((u0, report))
}
