//! Energy bands and the compactly supported spectral profiles ψ placed in them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::registry::{Named, Registry};

/// Band edges relative to the threshold a₂: support (α, β), plateau [α′, β′].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBand {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub beta_prime: f64,
    pub beta: f64,
}

impl Default for EnergyBand {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            alpha_prime: 0.375,
            beta_prime: 0.625,
            beta: 0.75,
        }
    }
}

impl EnergyBand {
    pub fn new(alpha: f64, alpha_prime: f64, beta_prime: f64, beta: f64) -> Result<Self> {
        let b = Self {
            alpha,
            alpha_prime,
            beta_prime,
            beta,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = 0.0 < self.alpha
            && self.alpha < self.alpha_prime
            && self.alpha_prime < self.beta_prime
            && self.beta_prime < self.beta
            && self.beta < 1.0;
        if ordered {
            Ok(())
        } else {
            Err(Error::InvalidBand(format!(
                "need 0 < alpha < alpha' < beta' < beta < 1, got ({}, {}, {}, {})",
                self.alpha, self.alpha_prime, self.beta_prime, self.beta
            )))
        }
    }

    /// The four knots α, α′, β′, β.
    pub fn knots(&self) -> [f64; 4] {
        [self.alpha, self.alpha_prime, self.beta_prime, self.beta]
    }
}

/// Shape of ψ on its band. Implementations are registered by name.
pub trait ProfileShape: Named + Send + Sync {
    /// ψ(μ); must vanish outside (α, β) and have sup norm 1 (or be zero).
    fn eval(&self, band: &EnergyBand, mu: f64) -> f64;

    /// Lower bound m of ψ on the plateau [α′, β′].
    fn plateau_floor(&self, band: &EnergyBand) -> f64;

    /// Points in [α, β] where ψ loses smoothness beyond C².
    fn breakpoints(&self, band: &EnergyBand) -> Vec<f64> {
        band.knots().to_vec()
    }
}

/// C² ramp with vanishing first and second derivatives at 0 and 1.
pub fn smoothstep5(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// Quintic smoothstep ramps around a flat top of height 1 on [α′, β′].
pub struct QuinticPlateau;

impl QuinticPlateau {
    pub const NAME: &'static str = "quintic-plateau";
}

impl Named for QuinticPlateau {
    fn name(&self) -> &'static str {
        Self::NAME
    }
}

impl ProfileShape for QuinticPlateau {
    fn eval(&self, b: &EnergyBand, mu: f64) -> f64 {
        if mu <= b.alpha || mu >= b.beta {
            0.0
        } else if mu < b.alpha_prime {
            smoothstep5((mu - b.alpha) / (b.alpha_prime - b.alpha))
        } else if mu <= b.beta_prime {
            1.0
        } else {
            smoothstep5((b.beta - mu) / (b.beta - b.beta_prime))
        }
    }

    fn plateau_floor(&self, _band: &EnergyBand) -> f64 {
        1.0
    }
}

/// Squared raised cosine on (α, β), peaked at the band centre. C³ but with
/// no flat top; used for robustness checks.
pub struct RaisedCosineSquared;

impl RaisedCosineSquared {
    pub const NAME: &'static str = "raised-cosine-squared";
}

impl Named for RaisedCosineSquared {
    fn name(&self) -> &'static str {
        Self::NAME
    }
}

impl ProfileShape for RaisedCosineSquared {
    fn eval(&self, b: &EnergyBand, mu: f64) -> f64 {
        if mu <= b.alpha || mu >= b.beta {
            return 0.0;
        }
        let centre = 0.5 * (b.alpha + b.beta);
        let r = 0.5 * (1.0 + (2.0 * PI * (mu - centre) / (b.beta - b.alpha)).cos());
        r * r
    }

    fn plateau_floor(&self, b: &EnergyBand) -> f64 {
        self.eval(b, b.alpha_prime).min(self.eval(b, b.beta_prime))
    }

    fn breakpoints(&self, b: &EnergyBand) -> Vec<f64> {
        vec![b.alpha, b.beta]
    }
}

/// ψ ≡ 0.
pub struct ZeroProfile;

impl ZeroProfile {
    pub const NAME: &'static str = "zero";
}

impl Named for ZeroProfile {
    fn name(&self) -> &'static str {
        Self::NAME
    }
}

impl ProfileShape for ZeroProfile {
    fn eval(&self, _b: &EnergyBand, _mu: f64) -> f64 {
        0.0
    }

    fn plateau_floor(&self, _b: &EnergyBand) -> f64 {
        0.0
    }

    fn breakpoints(&self, b: &EnergyBand) -> Vec<f64> {
        vec![b.alpha, b.beta]
    }
}

pub fn shapes() -> &'static Registry<dyn ProfileShape> {
    static SHAPES: OnceLock<Registry<dyn ProfileShape>> = OnceLock::new();
    SHAPES.get_or_init(|| {
        let mut reg: Registry<dyn ProfileShape> = Registry::new("profile shape");
        reg.register(Arc::new(QuinticPlateau))
            .register(Arc::new(RaisedCosineSquared))
            .register(Arc::new(ZeroProfile));
        reg
    })
}

/// ψ: a shape on a validated band, as a function of μ = λ - a₂.
#[derive(Clone)]
pub struct Profile {
    pub band: EnergyBand,
    shape: Arc<dyn ProfileShape>,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("band", &self.band)
            .field("shape", &self.shape.name())
            .finish()
    }
}

/// The default plateau bump on `band`.
pub fn make_bump(band: EnergyBand) -> Result<Profile> {
    Profile::new(band, QuinticPlateau::NAME)
}

impl Profile {
    pub fn new(band: EnergyBand, shape: &str) -> Result<Self> {
        band.validate()?;
        Ok(Self {
            band,
            shape: shapes().get(shape)?,
        })
    }

    pub fn shape_name(&self) -> &'static str {
        self.shape.name()
    }

    pub fn psi(&self, mu: f64) -> f64 {
        self.shape.eval(&self.band, mu)
    }

    /// Plateau floor m.
    pub fn m(&self) -> f64 {
        self.shape.plateau_floor(&self.band)
    }

    pub fn is_zero(&self) -> bool {
        self.shape.name() == ZeroProfile::NAME
    }

    /// Knots of ψ in μ, ascending, including α and β.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.shape.breakpoints(&self.band)
    }

    /// ‖ψ‖ in L²((α, β)).
    pub fn l2_norm(&self) -> f64 {
        self.integrate_mu(|mu| self.psi(mu).powi(2)).sqrt()
    }

    /// ∫ h(μ) dμ over (α, β) with a high-order rule per smooth piece.
    pub fn integrate_mu(&self, h: impl Fn(f64) -> f64) -> f64 {
        let rule = gauss_legendre(24);
        let knots = self.breakpoints();
        let mut sum = 0.0;
        for seg in knots.windows(2) {
            const PANELS: usize = 8;
            let w = (seg[1] - seg[0]) / PANELS as f64;
            for p in 0..PANELS {
                let mid = seg[0] + (p as f64 + 0.5) * w;
                for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                    sum += 0.5 * w * wt * h(mid + 0.5 * w * x);
                }
            }
        }
        sum
    }

    pub fn shifted(&self, a2: f64) -> SpectralProfile {
        SpectralProfile { profile: self.clone(), a2 }
    }
}

/// ψ̃(λ) = ψ(λ - a₂), the first-channel spectral data of the initial state.
#[derive(Debug, Clone)]
pub struct SpectralProfile {
    pub profile: Profile,
    pub a2: f64,
}

impl SpectralProfile {
    pub fn band(&self) -> &EnergyBand {
        &self.profile.band
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        self.profile.psi(lambda - self.a2)
    }

    /// (λ_min, λ_max) = (a₂ + α, a₂ + β).
    pub fn support(&self) -> (f64, f64) {
        band_support(&self.profile, self.a2)
    }

    /// Knots of ψ̃ in λ.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.profile.breakpoints().into_iter().map(|mu| mu + self.a2).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.profile.is_zero()
    }
}

pub fn band_support(profile: &Profile, a2: f64) -> (f64, f64) {
    (a2 + profile.band.alpha, a2 + profile.band.beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band() -> EnergyBand {
        EnergyBand::default()
    }

    #[test]
    fn bump_values() {
        let p = make_bump(band()).unwrap();
        let b = band();
        assert_eq!(p.psi(b.alpha), 0.0);
        assert_eq!(p.psi(0.5 * (b.alpha_prime + b.beta_prime)), 1.0);
        assert_eq!(p.psi(b.beta), 0.0);
        assert!((p.psi(0.5 * (b.alpha + b.alpha_prime)) - 0.5).abs() < 1e-15);
        assert_eq!(p.m(), 1.0);
    }

    #[test]
    fn smoothstep_endpoint_derivatives_vanish() {
        let h = 1e-4;
        for s in [0.0, 1.0] {
            let d1 = (smoothstep5(s + h) - smoothstep5(s - h)) / (2.0 * h);
            // one-sided second difference, inside [0, 1]
            let dir = if s == 0.0 { 1.0 } else { -1.0 };
            let d2 = (smoothstep5(s) - 2.0 * smoothstep5(s + dir * h) + smoothstep5(s + 2.0 * dir * h)) / (h * h);
            assert!(d1.abs() < 1e-7, "S'({s}) = {d1}");
            assert!(d2.abs() < 1e-2, "S''({s}) = {d2}");
        }
    }

    #[test]
    fn second_derivative_jumps_vanish_with_h() {
        let p = make_bump(band()).unwrap();
        let d2 = |mu: f64, h: f64| (p.psi(mu + h) - 2.0 * p.psi(mu) + p.psi(mu - h)) / (h * h);
        for knot in band().knots() {
            let jump = |h: f64| (d2(knot + 2.0 * h, h) - d2(knot - 2.0 * h, h)).abs();
            let (j1, j2) = (jump(1e-3), jump(5e-4));
            // O(h) jump: halving h halves it
            assert!(j2 < 0.6 * j1 + 1e-6, "knot {knot}: {j1} -> {j2}");
            // |ψ'''| ≤ 60/w³ for ramp width w
            let w = band().alpha_prime - band().alpha;
            assert!(j1 < 4.0 * 1e-3 * 60.0 / w.powi(3), "knot {knot}: {j1}");
        }
    }

    #[test]
    fn bounds_and_plateau() {
        for name in [QuinticPlateau::NAME, RaisedCosineSquared::NAME] {
            let p = Profile::new(band(), name).unwrap();
            let mut max: f64 = 0.0;
            for i in 0..=2000 {
                let mu = -0.1 + 1.2 * i as f64 / 2000.0;
                let v = p.psi(mu);
                assert!((0.0..=1.0).contains(&v));
                max = max.max(v);
                if (band().alpha_prime..=band().beta_prime).contains(&mu) {
                    assert!(v >= p.m() - 1e-15);
                }
            }
            assert!((max - 1.0).abs() < 1e-4, "{name}");
        }
    }

    #[test]
    fn shift_invariance() {
        let p = make_bump(band()).unwrap();
        for a2 in [0.0, 1.0, 37.5] {
            let sp = p.shifted(a2);
            for mu in [0.26, 0.3, 0.5, 0.7] {
                assert_eq!(sp.eval(a2 + mu), p.psi(a2 + mu - a2));
            }
        }
    }

    #[test]
    fn band_support_examples() {
        let p = make_bump(band()).unwrap();
        assert_eq!(band_support(&p, 1.0), (1.25, 1.75));
        assert_eq!(band_support(&p, 100.0), (100.25, 100.75));
        assert!(band_support(&p, 3.0).0 > 3.0);
    }

    #[test]
    fn invalid_band_rejected() {
        assert!(EnergyBand::new(0.3, 0.25, 0.5, 0.7).is_err());
        assert!(EnergyBand::new(0.0, 0.25, 0.5, 0.7).is_err());
        assert!(EnergyBand::new(0.1, 0.25, 0.5, 1.0).is_err());
        assert!(make_bump(EnergyBand { alpha: 0.5, ..band() }).is_err());
    }

    #[test]
    fn l2_norm_of_plateau() {
        // plateau contributes 0.25, each ramp 0.125 * int_0^1 S^2 = 0.125 * 181/462
        let p = make_bump(band()).unwrap();
        let expected = (0.25 + 2.0 * 0.125 * 181.0 / 462.0_f64).sqrt();
        assert!((p.l2_norm() - expected).abs() < 1e-13);
    }

    #[test]
    fn unknown_shape() {
        assert!(matches!(Profile::new(band(), "tophat"), Err(Error::UnknownStrategy { .. })));
    }
}
