//! Stationary-phase objects for u₊ on branch 2: the stationary point p₀, the
//! phase φ, the amplitude factors h₁ and h₂, the leading coefficient H, the
//! group-velocity cones and the explicit bounds g and f.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{EnergyBand, SpectralProfile};
use crate::registry::{Named, Registry};
use crate::solution::SpaceTimePoint;
use crate::spectral::{branch_sqrt, BranchPotentials, StarGraph};

/// Outer cone from the band edges (α, β), inner cone from (α′, β′), both as
/// bounds on the slope t/x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub a2: f64,
    pub slope_low: f64,
    pub slope_high: f64,
    pub inner_slope_low: f64,
    pub inner_slope_high: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

fn slope(a2: f64, mu: f64) -> f64 {
    ((a2 + mu) / mu).sqrt()
}

impl ConeSpec {
    pub fn new(a2: f64, band: &EnergyBand) -> Self {
        Self {
            a2,
            slope_low: slope(a2, band.beta),
            slope_high: slope(a2, band.alpha),
            inner_slope_low: slope(a2, band.beta_prime),
            inner_slope_high: slope(a2, band.alpha_prime),
            v_min: a2 / band.beta,
            v_max: a2 / band.alpha,
            p_min: band.alpha.sqrt(),
            p_max: band.beta.sqrt(),
        }
    }

    pub fn slopes(&self, which: ConeKind) -> (f64, f64) {
        match which {
            ConeKind::Outer => (self.slope_low, self.slope_high),
            ConeKind::Inner => (self.inner_slope_low, self.inner_slope_high),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeKind {
    Outer,
    Inner,
}

/// Closed-cone membership by slope t/x; false at x = 0.
pub fn in_cone(pt: SpaceTimePoint, cone: &ConeSpec, which: ConeKind) -> bool {
    if pt.x <= 0.0 {
        return false;
    }
    let (lo, hi) = cone.slopes(which);
    let r = pt.t / pt.x;
    lo <= r && r <= hi
}

fn check_light_cone(pt: SpaceTimePoint) -> Result<()> {
    if pt.t <= pt.x || pt.x <= 0.0 {
        return Err(Error::OutsideLightCone { t: pt.t, x: pt.x });
    }
    Ok(())
}

/// p₀ = √(a₂x²/(t² − x²)), the zero of ∂_pφ.
pub fn stationary_point(pt: SpaceTimePoint, a2: f64) -> Result<f64> {
    check_light_cone(pt)?;
    Ok((a2 * pt.x * pt.x / ((pt.t - pt.x) * (pt.t + pt.x))).sqrt())
}

/// φ(p, t, x) = √(a₂ + p²)t − px.
pub fn phase(p: f64, pt: SpaceTimePoint, a2: f64) -> f64 {
    (a2 + p * p).sqrt() * pt.t - p * pt.x
}

/// ∂_pφ = pt/√(a₂ + p²) − x.
pub fn phase_derivative(p: f64, pt: SpaceTimePoint, a2: f64) -> f64 {
    p * pt.t / (a2 + p * p).sqrt() - pt.x
}

/// v = (t/x)² − 1 > 0 inside the light cone.
fn excess(pt: SpaceTimePoint) -> Result<f64> {
    check_light_cone(pt)?;
    let r = pt.t / pt.x;
    Ok(r * r - 1.0)
}

/// h₁ = ((t/x)²/((t/x)² − 1))^{3/4}.
pub fn h1(pt: SpaceTimePoint) -> Result<f64> {
    let v = excess(pt)?;
    Ok(((v + 1.0) / v).powf(0.75))
}

/// h₂ with a₁ in the numerator: √((a₂−a₁)v + a₁) / (√((a₂−a₁)v + a₂) + √a₂)².
pub fn h2(pt: SpaceTimePoint, pots: &BranchPotentials) -> Result<f64> {
    let v = excess(pt)?;
    let d = pots.a2 - pots.a1;
    Ok((d * v + pots.a1).sqrt() / ((d * v + pots.a2).sqrt() + pots.a2.sqrt()).powi(2))
}

/// The factor that stationary phase actually produces from q₁ at
/// λ = a₂ + p₀²: √((a₂−a₁)v + a₂) / (√((a₂−a₁)v + a₂) + √a₂)², i.e.
/// p₀ξ₁/(√a₂(ξ₁ + p₀)²).
pub fn h2_stationary(pt: SpaceTimePoint, pots: &BranchPotentials) -> Result<f64> {
    let v = excess(pt)?;
    let d = pots.a2 - pots.a1;
    let num = (d * v + pots.a2).sqrt();
    Ok(num / (num + pots.a2.sqrt()).powi(2))
}

/// A formula for the leading t^{-1/2} amplitude of u₊ inside the cone.
pub trait CoefficientModel: Named + Send + Sync {
    fn coefficient(&self, pt: SpaceTimePoint, profile: &SpectralProfile, graph: &StarGraph) -> Result<C64>;
}

/// H = e^{iφ(p₀)} (2iπ)^{1/2} a₂^{3/4} h₁ · 2c_q h₂* · ψ̃(a₂ + p₀²), with h₂*
/// from [`h2_stationary`]; u₊ = H t^{-1/2} + O(t^{-1}).
pub struct StationaryPhase;

impl StationaryPhase {
    pub const NAME: &'static str = "stationary-phase";
}

impl Named for StationaryPhase {
    fn name(&self) -> &'static str {
        Self::NAME
    }
}

impl CoefficientModel for StationaryPhase {
    fn coefficient(&self, pt: SpaceTimePoint, profile: &SpectralProfile, graph: &StarGraph) -> Result<C64> {
        let a2 = graph.pots.a2;
        let p0 = stationary_point(pt, a2)?;
        let amp = a2.powf(0.75) * h1(pt)? * 2.0 * graph.cq * h2_stationary(pt, &graph.pots)? * profile.eval(a2 + p0 * p0);
        Ok(C64::from_polar(1.0, phase(p0, pt, a2)) * two_i_pi_sqrt() * amp)
    }
}

/// H = e^{-iφ(p₀)} (2iπ)^{1/2} a₂^{3/4} h₁ h₂ ψ̃(a₂ + p₀²) with [`h2`] and no
/// c_q factor. It does not match u₊ t^{1/2}; kept for comparison.
pub struct A1Numerator;

impl A1Numerator {
    pub const NAME: &'static str = "a1-numerator";
}

impl Named for A1Numerator {
    fn name(&self) -> &'static str {
        Self::NAME
    }
}

impl CoefficientModel for A1Numerator {
    fn coefficient(&self, pt: SpaceTimePoint, profile: &SpectralProfile, graph: &StarGraph) -> Result<C64> {
        let a2 = graph.pots.a2;
        let p0 = stationary_point(pt, a2)?;
        let amp = a2.powf(0.75) * h1(pt)? * h2(pt, &graph.pots)? * profile.eval(a2 + p0 * p0);
        Ok(C64::from_polar(1.0, -phase(p0, pt, a2)) * two_i_pi_sqrt() * amp)
    }
}

/// (2iπ)^{1/2} under the global square-root branch: √(2π)e^{iπ/4}.
pub fn two_i_pi_sqrt() -> C64 {
    branch_sqrt(C64::new(0.0, 2.0 * PI))
}

pub fn models() -> &'static Registry<dyn CoefficientModel> {
    static REGISTRY: OnceLock<Registry<dyn CoefficientModel>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<dyn CoefficientModel> = Registry::new("coefficient model");
        r.register(Arc::new(StationaryPhase)).register(Arc::new(A1Numerator));
        r
    })
}

/// H with the default model.
pub fn coefficient_h(pt: SpaceTimePoint, profile: &SpectralProfile, graph: &StarGraph) -> Result<C64> {
    StationaryPhase.coefficient(pt, profile, graph)
}

/// g = √(2π)·√β(a₂+β)^{3/4} / (√a₂·√(a₂−a₁+β)).
pub fn bound_g(pots: &BranchPotentials, beta: f64) -> f64 {
    let (a1, a2) = (pots.a1, pots.a2);
    (2.0 * PI).sqrt() * beta.sqrt() * (a2 + beta).powf(0.75) / (a2.sqrt() * (a2 - a1 + beta).sqrt())
}

/// f = √(2π)·a₂^{3/4}(β/a₂+1)^{3/4}·a₂^{-1/2}·w/(w+1)² with w = √((a₂−a₁)/α + 1).
pub fn bound_f(pots: &BranchPotentials, band: &EnergyBand) -> f64 {
    let (a1, a2) = (pots.a1, pots.a2);
    let w = ((a2 - a1) / band.alpha + 1.0).sqrt();
    (2.0 * PI).sqrt() * a2.powf(0.75) * (band.beta / a2 + 1.0).powf(0.75) / a2.sqrt() * w / (w + 1.0).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::make_bump;
    use crate::quadrature::QuadratureConfig;
    use crate::solution::u_plus;
    use proptest::prelude::*;

    fn pt(t: f64, x: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(t, x).unwrap()
    }

    fn pots(a1: f64, a2: f64) -> BranchPotentials {
        BranchPotentials::new(a1, a2).unwrap()
    }

    #[test]
    fn stationary_point_at_cone_edges() {
        let band = EnergyBand::default();
        let a2 = 1.0;
        let cone = ConeSpec::new(a2, &band);
        let x = 10.0;
        let p_hi = stationary_point(pt(cone.slope_low * x, x), a2).unwrap();
        let p_lo = stationary_point(pt(cone.slope_high * x, x), a2).unwrap();
        assert!((p_hi - band.beta.sqrt()).abs() < 1e-12);
        assert!((p_lo - band.alpha.sqrt()).abs() < 1e-12);
        assert!(stationary_point(pt(1.0, 1.0), a2).is_err());
    }

    #[test]
    fn phase_examples() {
        assert_eq!(phase(0.0, pt(3.0, 2.0), 4.0), 6.0);
        assert_eq!(phase(1.5, pt(3.0, 0.0), 4.0), 2.5 * 3.0);
    }

    #[test]
    fn h1_examples() {
        let x = 1.0;
        let v = h1(pt(2f64.sqrt() * x, x)).unwrap();
        assert!((v - 2f64.powf(0.75)).abs() < 1e-12);
        assert!((h1(pt(1e6, 1.0)).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn h2_symmetric_case() {
        for a in [0.3f64, 1.0, 7.0] {
            for r in [1.1, 2.0, 9.0] {
                let here = pt(r * 5.0, 5.0);
                let want = 1.0 / (4.0 * a.sqrt());
                assert!((h2(here, &pots(a, a)).unwrap() - want).abs() < 1e-14);
                assert!((h2_stationary(here, &pots(a, a)).unwrap() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cone_examples() {
        let band = EnergyBand::default();
        let cone = ConeSpec::new(1.0, &band);
        assert!((cone.slope_high - 5f64.sqrt()).abs() < 1e-7);
        assert!(in_cone(pt(cone.slope_high * 3.0, 3.0), &cone, ConeKind::Outer));
        assert!(in_cone(pt(cone.slope_low * 3.0, 3.0), &cone, ConeKind::Outer));
        assert!(1.0 < cone.slope_low && cone.slope_low < cone.slope_high);
        assert_eq!(cone.v_min, 1.0 / band.beta);
        assert_eq!(cone.p_max, band.beta.sqrt());
    }

    #[test]
    fn g_reference_value() {
        // √(2π)·√0.5·1.5^{1/4}, 30-digit value from mpmath
        let g = bound_g(&pots(0.0, 1.0), 0.5);
        assert!((g - 1.961_542_630_300_344).abs() < 1e-14, "{g}");
    }

    #[test]
    fn bounds_asymptotics() {
        let band = EnergyBand::default();
        let a2 = 1e6;
        let p = pots(0.0, a2);
        let g = bound_g(&p, band.beta) / ((2.0 * PI * band.beta).sqrt() * a2.powf(-0.25));
        let f = bound_f(&p, &band) / ((2.0 * PI * band.alpha).sqrt() * a2.powf(-0.25));
        assert!((g - 1.0).abs() < 1e-2, "{g}");
        assert!((f - 1.0).abs() < 1e-2, "{f}");
    }

    #[test]
    fn h_vanishes_outside_spectral_cone() {
        let band = EnergyBand::default();
        let g = StarGraph::new(pots(0.0, 1.0));
        let profile = make_bump(band).unwrap().shifted(1.0);
        let cone = ConeSpec::new(1.0, &band);
        for model in models().names() {
            let m = models().get(model).unwrap();
            let h = m.coefficient(pt(1.01 * cone.slope_high * 4.0, 4.0), &profile, &g).unwrap();
            assert_eq!(h, C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn modulus_identity() {
        let band = EnergyBand::default();
        let g = StarGraph::new(pots(0.0, 1.0));
        let profile = make_bump(band).unwrap().shifted(1.0);
        let here = pt(200.0, 110.0);
        let p0 = stationary_point(here, 1.0).unwrap();
        let h = A1Numerator.coefficient(here, &profile, &g).unwrap();
        let want = (2.0 * PI).sqrt() * h1(here).unwrap() * h2(here, &g.pots).unwrap() * profile.eval(1.0 + p0 * p0);
        assert!((h.norm() - want).abs() < 1e-13);
    }

    #[test]
    fn stationary_model_matches_solution_leading_term() {
        // |u₊| t^{1/2} → |H| along a central ray; the a1-numerator model does not.
        let band = EnergyBand::default();
        let g = StarGraph::new(pots(0.0, 1.0));
        let profile = make_bump(band).unwrap().shifted(1.0);
        let here = pt(1e4, 1e4 / 1.8);
        let u = u_plus(here, &profile, &g, &QuadratureConfig::default()).unwrap();
        let h = coefficient_h(here, &profile, &g).unwrap();
        assert!((u * here.t.sqrt() - h).norm() < 1e-3 * h.norm(), "{u} vs {h}");
        let alt = A1Numerator.coefficient(here, &profile, &g).unwrap();
        assert!((u * here.t.sqrt() - alt).norm() > 0.1 * h.norm());
    }

    #[test]
    fn b_over_b_plus_c_squared_is_decreasing() {
        for c in [0.0, 0.5, 3.0] {
            let f = |b: f64| b / (b + c).powi(2);
            let mut prev = f(c + 1e-3);
            for i in 1..200 {
                let b = c + 1e-3 + 0.1 * i as f64;
                assert!(f(b) < prev);
                prev = f(b);
            }
        }
    }

    proptest! {
        #[test]
        fn inner_cone_inside_outer(a2 in 0.0f64..100.0, r in 1.0f64..30.0) {
            let band = EnergyBand::default();
            let cone = ConeSpec::new(a2.max(1e-6), &band);
            let here = pt(r * 3.0, 3.0);
            if in_cone(here, &cone, ConeKind::Inner) {
                prop_assert!(in_cone(here, &cone, ConeKind::Outer));
            }
        }

        #[test]
        fn stationary_point_zeroes_phase_derivative(a2 in 0.1f64..50.0, x in 1.0f64..1e3, r in 1.01f64..20.0) {
            let here = pt(r * x, x);
            let p0 = stationary_point(here, a2).unwrap();
            prop_assert!(phase_derivative(p0, here, a2).abs() <= 1e-10 * x);
        }
    }
}
