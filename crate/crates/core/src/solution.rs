//! The propagating solution on branch 2 for initial data whose spectral
//! data lie only in the first channel, supported above a₂:
//!
//! u±(t, x) = ∫ e^{±i√λ t} q₁(λ) e^{-iξ₂(λ)x} ψ̃(λ) dλ,   u₂ = ½(u₊ + u₋),
//!
//! evaluated by phase-resolved quadrature in λ or, after p = ξ₂(λ), in p.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::SpectralProfile;
use crate::quadrature::{composite_gauss, Estimate, QuadratureConfig};
use crate::spectral::{Branch, Sign, StarGraph};

/// A point (t, x) with x on branch 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub t: f64,
    pub x: f64,
}

impl SpaceTimePoint {
    pub fn new(t: f64, x: f64) -> Result<Self> {
        if !(t.is_finite() && x.is_finite() && t >= 0.0 && x >= 0.0) {
            return Err(Error::Config(format!(
                "space-time point must be finite and nonnegative, got ({t}, {x})"
            )));
        }
        Ok(Self { t, x })
    }
}

/// u_σ in the λ-form, σ = ±.
pub fn outgoing(sign: Sign, pt: SpaceTimePoint, profile: &SpectralProfile, graph: &StarGraph, quad: &QuadratureConfig) -> Result<Estimate> {
    outgoing_at(sign, pt.t, pt.x, profile, graph, quad)
}

/// The λ-form integral for any real (t, x); negative x continues the
/// formula off the branch.
fn outgoing_at(sign: Sign, t: f64, x: f64, profile: &SpectralProfile, graph: &StarGraph, quad: &QuadratureConfig) -> Result<Estimate> {
    if profile.is_zero() {
        return Ok(Estimate::default());
    }
    let sigma = sign.value();
    let integrand = |lambda: f64| {
        let xi2 = graph.xi(Branch::Two, lambda).re;
        let weight = graph.q(Branch::One, lambda) * profile.eval(lambda);
        C64::from_polar(weight, sigma * lambda.sqrt() * t - xi2 * x)
    };
    // |d/dλ (σ√λ t − ξ₂x)| ≤ |t|/(2√λ) + |x|/(2ξ₂)
    let rate = |lambda: f64| t.abs() / (2.0 * lambda.sqrt()) + x.abs() / (2.0 * graph.xi(Branch::Two, lambda).re.max(1e-12));
    quad.integrate_segments(&integrand, &profile.breakpoints(), Some(&rate))
}

/// u_σ in the p-form:
/// 2∫ e^{iσ√(a₂+p²)t} q₁(a₂+p²) e^{-ipx} ψ̃(a₂+p²) p dp over [√α, √β].
pub fn outgoing_pform(
    sign: Sign,
    pt: SpaceTimePoint,
    profile: &SpectralProfile,
    graph: &StarGraph,
    quad: &QuadratureConfig,
) -> Result<Estimate> {
    if profile.is_zero() {
        return Ok(Estimate::default());
    }
    let sigma = sign.value();
    let a2 = graph.pots.a2;
    let integrand = |p: f64| {
        let lambda = a2 + p * p;
        let weight = 2.0 * p * graph.q(Branch::One, lambda) * profile.eval(lambda);
        C64::from_polar(weight, sigma * lambda.sqrt() * pt.t - p * pt.x)
    };
    let rate = |p: f64| pt.t * p / (a2 + p * p).sqrt() + pt.x;
    let breaks: Vec<f64> = profile.profile.breakpoints().iter().map(|mu| mu.sqrt()).collect();
    quad.integrate_segments(&integrand, &breaks, Some(&rate))
}

pub fn u_plus(pt: SpaceTimePoint, profile: &SpectralProfile, graph: &StarGraph, quad: &QuadratureConfig) -> Result<C64> {
    Ok(outgoing(Sign::Plus, pt, profile, graph, quad)?.value)
}

pub fn u_minus(pt: SpaceTimePoint, profile: &SpectralProfile, graph: &StarGraph, quad: &QuadratureConfig) -> Result<C64> {
    Ok(outgoing(Sign::Minus, pt, profile, graph, quad)?.value)
}

pub fn u_plus_pform(pt: SpaceTimePoint, profile: &SpectralProfile, graph: &StarGraph, quad: &QuadratureConfig) -> Result<C64> {
    Ok(outgoing_pform(Sign::Plus, pt, profile, graph, quad)?.value)
}

/// u₂(t, x) = ½(u₊ + u₋).
pub fn u2(pt: SpaceTimePoint, profile: &SpectralProfile, graph: &StarGraph, quad: &QuadratureConfig) -> Result<C64> {
    Ok(0.5 * (u_plus(pt, profile, graph, quad)? + u_minus(pt, profile, graph, quad)?))
}

/// u_σ(t, x) at every x in `xs` for one t, from a shared Gauss rule in the
/// p-form sized for the largest x. The rule is doubled until all values
/// agree with the coarser rule to `quad` tolerances.
pub fn outgoing_batch(
    sign: Sign,
    t: f64,
    xs: &[f64],
    profile: &SpectralProfile,
    graph: &StarGraph,
    quad: &QuadratureConfig,
) -> Result<Vec<C64>> {
    const ORDER: usize = 16;
    if profile.is_zero() || xs.is_empty() {
        return Ok(vec![C64::new(0.0, 0.0); xs.len()]);
    }
    let a2 = graph.pots.a2;
    let breaks: Vec<f64> = profile.profile.breakpoints().iter().map(|mu| mu.sqrt()).collect();
    let x_max = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let p_top = breaks[breaks.len() - 1];
    let rate = t.abs() * p_top / (a2 + p_top * p_top).sqrt() + x_max;
    let mut panels_per_unit = (1.25 * rate / (2.0 * std::f64::consts::PI) * quad.points_per_period as f64 / ORDER as f64).max(1.0);
    let eval = |per_unit: f64| -> Result<Vec<C64>> {
        let mut terms: Vec<(f64, C64)> = Vec::new();
        for seg in breaks.windows(2) {
            let panels = ((seg[1] - seg[0]) * per_unit).ceil().max(1.0) as usize;
            if panels > quad.max_panels {
                return Err(Error::QuadratureNonconvergence {
                    a: seg[0],
                    b: seg[1],
                    error: f64::INFINITY,
                    panels,
                });
            }
            let (ps, ws) = composite_gauss(seg, panels, ORDER);
            for (p, w) in ps.into_iter().zip(ws) {
                let lambda = a2 + p * p;
                let amp = 2.0 * p * w * graph.q(Branch::One, lambda) * profile.eval(lambda);
                if amp != 0.0 {
                    terms.push((p, C64::from_polar(amp, sign.value() * lambda.sqrt() * t)));
                }
            }
        }
        Ok(xs
            .par_iter()
            .map(|&x| {
                let mut acc = C64::new(0.0, 0.0);
                for &(p, a) in &terms {
                    let (sin, cos) = (p * x).sin_cos();
                    acc += a * C64::new(cos, -sin);
                }
                acc
            })
            .collect())
    };
    let mut coarse = eval(panels_per_unit)?;
    loop {
        panels_per_unit *= 2.0;
        let fine = eval(panels_per_unit)?;
        let scale = fine.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let error = fine.iter().zip(&coarse).fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()));
        if error <= quad.abs_tol.max(quad.rel_tol * scale) {
            return Ok(fine);
        }
        coarse = fine;
    }
}

/// ∫ q₁|ψ̃| dλ, a uniform bound for |u±|.
pub fn uniform_bound(profile: &SpectralProfile, graph: &StarGraph, quad: &QuadratureConfig) -> Result<f64> {
    let integrand = |lambda: f64| C64::new(graph.q(Branch::One, lambda) * profile.eval(lambda).abs(), 0.0);
    Ok(quad.integrate_segments(&integrand, &profile.breakpoints(), None)?.value.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_bump, EnergyBand, Profile};
    use crate::quadrature::GaussKronrod;
    use crate::spectral::BranchPotentials;
    use proptest::prelude::*;

    fn setup(a1: f64, a2: f64) -> (StarGraph, SpectralProfile) {
        let g = StarGraph::new(BranchPotentials::new(a1, a2).unwrap());
        (g, make_bump(EnergyBand::default()).unwrap().shifted(a2))
    }

    fn pt(t: f64, x: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(t, x).unwrap()
    }

    #[test]
    fn rejects_negative_or_nonfinite_points() {
        assert!(SpaceTimePoint::new(-1.0, 0.0).is_err());
        assert!(SpaceTimePoint::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn zero_profile_gives_zero() {
        let g = StarGraph::new(BranchPotentials::new(0.0, 1.0).unwrap());
        let p = Profile::new(EnergyBand::default(), "zero").unwrap().shifted(1.0);
        assert_eq!(
            u_plus(pt(3.0, 1.0), &p, &g, &QuadratureConfig::default()).unwrap(),
            C64::new(0.0, 0.0)
        );
    }

    #[test]
    fn origin_value_is_real_positive_and_matches_kronrod() {
        let (g, p) = setup(0.0, 1.0);
        let quad = QuadratureConfig::default();
        let v = u_plus(pt(0.0, 0.0), &p, &g, &quad).unwrap();
        assert!(v.re > 0.0 && v.im.abs() < 1e-15);
        let gk = quad.clone().with_rule(GaussKronrod::NAME);
        let oracle = gk
            .integrate_segments(&|l| C64::new(g.q(Branch::One, l) * p.eval(l), 0.0), &p.breakpoints(), None)
            .unwrap()
            .value;
        assert!((v - oracle).norm() < 1e-12);
    }

    #[test]
    fn lambda_and_p_forms_agree_at_reference_point() {
        let (g, p) = setup(0.0, 1.0);
        let quad = QuadratureConfig::default();
        let a = u_plus(pt(50.0, 20.0), &p, &g, &quad).unwrap();
        let b = u_plus_pform(pt(50.0, 20.0), &p, &g, &quad).unwrap();
        assert!((a - b).norm() <= 1e-8 * a.norm(), "{a} vs {b}");
    }

    #[test]
    fn pform_integrand_vanishes_at_band_edges() {
        let (g, p) = setup(0.0, 1.0);
        let band = EnergyBand::default();
        for mu in [band.alpha, band.beta] {
            assert_eq!(p.eval(g.pots.a2 + mu.sqrt().powi(2)), 0.0);
        }
    }

    #[test]
    fn refinement_stability() {
        let (g, p) = setup(0.0, 1.0);
        let quad = QuadratureConfig::default();
        let fine = QuadratureConfig {
            points_per_period: 2 * quad.points_per_period,
            ..quad.clone()
        };
        for (t, x) in [(100.0, 40.0), (1000.0, 600.0), (5000.0, 1000.0)] {
            let a = outgoing(Sign::Plus, pt(t, x), &p, &g, &quad).unwrap();
            let b = outgoing(Sign::Plus, pt(t, x), &p, &g, &fine).unwrap();
            assert!((a.value - b.value).norm() <= a.error + 1e-14 * a.value.norm().max(1e-3), "t={t}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn parametrization_identity(t in 0.0f64..1e4, frac in 0.0f64..1.2, a1 in 0.0f64..1.0, gap in 0.2f64..4.0) {
            let (g, p) = setup(a1, a1 + gap);
            let quad = QuadratureConfig::default();
            let here = pt(t, frac * t);
            let a = u_plus(here, &p, &g, &quad).unwrap();
            let b = u_plus_pform(here, &p, &g, &quad).unwrap();
            prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(1.0), "{} vs {}", a, b);
        }

        #[test]
        fn conjugate_symmetry(t in 0.0f64..2e3, x in 0.0f64..2e3) {
            // For real ψ̃, conj(u₋(t, x)) = u₊(t, −x); at x = 0 this makes
            // u₋ = conj(u₊) and u₂ real.
            let (g, p) = setup(0.0, 1.0);
            let quad = QuadratureConfig::default();
            let minus = outgoing_at(Sign::Minus, t, x, &p, &g, &quad).unwrap().value;
            let mirrored = outgoing_at(Sign::Plus, t, -x, &p, &g, &quad).unwrap().value;
            prop_assert!((minus.conj() - mirrored).norm() <= 1e-10 * minus.norm().max(1e-3));
            let at_vertex = u2(pt(t, 0.0), &p, &g, &quad).unwrap();
            prop_assert!(at_vertex.im.abs() <= 1e-12 * at_vertex.norm().max(1e-3));
        }

        #[test]
        fn uniform_bound_holds(t in 0.0f64..1e4, x in 0.0f64..1e4) {
            let (g, p) = setup(0.0, 1.0);
            let quad = QuadratureConfig::default();
            let bound = uniform_bound(&p, &g, &quad).unwrap();
            prop_assert!(u_plus(pt(t, x), &p, &g, &quad).unwrap().norm() <= bound * (1.0 + 1e-10));
        }
    }

    #[test]
    fn batch_matches_pointwise() {
        let (g, p) = setup(0.0, 1.0);
        let quad = QuadratureConfig::default();
        let t = 3000.0;
        let xs: Vec<f64> = (0..40).map(|i| 40.0 * i as f64 + 3.0).collect();
        let batch = outgoing_batch(Sign::Plus, t, &xs, &p, &g, &quad).unwrap();
        for (x, b) in xs.iter().zip(&batch) {
            let u = u_plus(pt(t, *x), &p, &g, &quad).unwrap();
            assert!((u - b).norm() <= 1e-9 * u.norm().max(1e-2), "x={x}: {u} vs {b}");
        }
    }

    #[test]
    fn t_zero_twins_coincide() {
        let (g, p) = setup(0.0, 1.0);
        let quad = QuadratureConfig::default();
        for x in [0.0, 3.0, 17.0] {
            let a = u_plus(pt(0.0, x), &p, &g, &quad).unwrap();
            let b = u_minus(pt(0.0, x), &p, &g, &quad).unwrap();
            let c = u2(pt(0.0, x), &p, &g, &quad).unwrap();
            assert_eq!(a, b);
            assert!((a - c).norm() < 1e-15);
        }
    }
}
