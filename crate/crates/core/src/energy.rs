//! L² norms of u₊(t, ·) on branch 2 and on the group-line interval I′_t,
//! the closed-form bounds they are compared against, and log-log fits.
//!
//! All bounds are stored in norm units (square roots of the squared
//! displays), so every margin is `bound - value` in the same unit.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{bound_f, bound_g};
use crate::error::{Error, Result};
use crate::profile::{EnergyBand, Profile, SpectralProfile};
use crate::quadrature::{composite_gauss, QuadratureConfig};
use crate::solution::outgoing_batch;
use crate::spectral::{BranchPotentials, Sign, StarGraph};

/// I′_t = [t√(α′/(a₂+α′)), t√(β′/(a₂+β′))].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeInterval {
    pub t: f64,
    pub x_low: f64,
    pub x_high: f64,
}

impl ConeInterval {
    pub fn new(t: f64, a2: f64, band: &EnergyBand) -> Self {
        Self {
            t,
            x_low: t * edge(a2, band.alpha_prime),
            x_high: t * edge(a2, band.beta_prime),
        }
    }

    pub fn len(&self) -> f64 {
        self.x_high - self.x_low
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }
}

/// √(μ/(a₂+μ)), the group velocity at energy a₂ + μ.
fn edge(a2: f64, mu: f64) -> f64 {
    (mu / (a2 + mu)).sqrt()
}

/// Tail criterion for the branch norm: ‖u₊‖ on [X, 2X] below this
/// fraction of the norm on [0, X].
pub const BRANCH_TAIL_TOL: f64 = 1e-4;
const MAX_DOUBLINGS: usize = 12;

/// ‖u₊(t, ·)‖²_{L²(lo, hi)}. At fixed t, |u₊|² is band-limited in x to
/// wavenumber √β − √α, which sizes the Gauss panels; panels are doubled
/// until the integral settles.
pub fn squared_norm_on(t: f64, lo: f64, hi: f64, profile: &SpectralProfile, graph: &StarGraph, quad: &QuadratureConfig) -> Result<f64> {
    const ORDER: usize = 16;
    if profile.is_zero() || hi <= lo {
        return Ok(0.0);
    }
    let band = profile.band();
    let bandwidth = band.beta.sqrt() - band.alpha.sqrt();
    let mut panels = (1.25 * bandwidth * (hi - lo) / (2.0 * PI) * quad.points_per_period as f64 / ORDER as f64)
        .ceil()
        .max(2.0) as usize;
    let integrate = |panels: usize| -> Result<f64> {
        let (xs, ws) = composite_gauss(&[lo, hi], panels, ORDER);
        let u = outgoing_batch(Sign::Plus, t, &xs, profile, graph, quad)?;
        Ok(u.iter().zip(&ws).map(|(z, w)| w * z.norm_sqr()).sum())
    };
    let mut coarse = integrate(panels)?;
    loop {
        panels *= 2;
        if panels > quad.max_panels {
            return Err(Error::QuadratureNonconvergence {
                a: lo,
                b: hi,
                error: f64::NAN,
                panels,
            });
        }
        let fine = integrate(panels)?;
        // The integrand carries the pointwise relative error of u₊ twice.
        if (fine - coarse).abs() <= quad.abs_tol.powi(2).max(10.0 * quad.rel_tol * fine.abs()) {
            return Ok(fine);
        }
        coarse = fine;
    }
}

/// Direct branch norm and the cut at which it was taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchNorm {
    pub norm: f64,
    pub x_cut: f64,
    /// Closed-form Plancherel bound √β/(√(a₂−a₁+α)·α^{1/4})·‖ψ‖_{L²(α,β)}.
    pub plancherel_bound: f64,
}

/// ‖u₊(t, ·)‖_{L²(0, X_cut)} with X_cut doubled from max(2t, 64) until the
/// norm on [X_cut, 2X_cut] is below [`BRANCH_TAIL_TOL`] of the total.
pub fn l2_branch(t: f64, profile: &SpectralProfile, graph: &StarGraph, quad: &QuadratureConfig) -> Result<BranchNorm> {
    let plancherel_bound = plancherel_bound(&graph.pots, &profile.profile);
    if profile.is_zero() {
        return Ok(BranchNorm {
            norm: 0.0,
            x_cut: 0.0,
            plancherel_bound,
        });
    }
    let mut x_cut = (2.0 * t).max(64.0);
    let mut inner = squared_norm_on(t, 0.0, x_cut, profile, graph, quad)?;
    for _ in 0..MAX_DOUBLINGS {
        let tail = squared_norm_on(t, x_cut, 2.0 * x_cut, profile, graph, quad)?;
        if tail <= BRANCH_TAIL_TOL.powi(2) * inner {
            return Ok(BranchNorm {
                norm: (inner + tail).sqrt(),
                x_cut: 2.0 * x_cut,
                plancherel_bound,
            });
        }
        inner += tail;
        x_cut *= 2.0;
    }
    Err(Error::TruncationNotConverged { x_cut, tail: f64::NAN })
}

/// √β/(√(a₂−a₁+α)·α^{1/4})·‖ψ‖_{L²(α,β)}.
pub fn plancherel_bound(pots: &BranchPotentials, profile: &Profile) -> f64 {
    let band = &profile.band;
    band.beta.sqrt() / ((pots.a2 - pots.a1 + band.alpha).sqrt() * band.alpha.powf(0.25)) * profile.l2_norm()
}

/// ‖u₊(t, ·)‖_{L²(I′_t)}.
pub fn l2_cone(t: f64, profile: &SpectralProfile, graph: &StarGraph, quad: &QuadratureConfig) -> Result<f64> {
    let cone = ConeInterval::new(t, graph.pots.a2, profile.band());
    Ok(squared_norm_on(t, cone.x_low, cone.x_high, profile, graph, quad)?.sqrt())
}

/// Fixed ε = 0.05·f·m used in every "∀ε ∃t₀" display.
pub fn epsilon(pots: &BranchPotentials, profile: &Profile) -> f64 {
    0.05 * bound_f(pots, &profile.band) * profile.m()
}

/// Closed-form bounds at one a₂, in norm units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBounds {
    pub epsilon: f64,
    pub upper_branch: f64,
    /// (f·m − ε)·(√(β′/(a₂+β′)) − √(α′/(a₂+α′)))^{1/2}.
    pub lower_cone: f64,
    /// (g + ε)·(√(β/(a₂+β)) − √(α/(a₂+α)))^{1/2}.
    pub upper_cone: f64,
    /// Ratio bound with ε and √(a₂−a₁+α) (real for a₁ ≤ a₂).
    pub ratio_eps: f64,
    /// The same bound at ε = 0, the limsup display.
    pub ratio: f64,
    /// a₂ → ∞ limit (2π)^{-1/2} m^{-1} β^{1/2} α^{-3/4} (√β′ − √α′)^{-1/2} ‖ψ‖.
    pub ratio_limit: f64,
}

impl EnergyBounds {
    pub fn new(pots: &BranchPotentials, profile: &Profile) -> Self {
        let band = &profile.band;
        let a2 = pots.a2;
        let fm = bound_f(pots, band) * profile.m();
        let eps = epsilon(pots, profile);
        let g = bound_g(pots, band.beta);
        let inner_width = edge(a2, band.beta_prime) - edge(a2, band.alpha_prime);
        let outer_width = edge(a2, band.beta) - edge(a2, band.alpha);
        let upper_branch = plancherel_bound(pots, profile);
        let psi = profile.l2_norm();
        Self {
            epsilon: eps,
            upper_branch,
            lower_cone: (fm - eps).max(0.0) * inner_width.sqrt(),
            upper_cone: (g + eps) * outer_width.sqrt(),
            ratio_eps: upper_branch / ((fm - eps) * inner_width.sqrt()),
            ratio: upper_branch / (fm * inner_width.sqrt()),
            ratio_limit: band.beta.sqrt() * band.alpha.powf(-0.75) * psi
                / ((2.0 * PI).sqrt() * profile.m() * (band.beta_prime.sqrt() - band.alpha_prime.sqrt()).sqrt()),
        }
    }
}

/// One (t, a₂) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub a2: f64,
    pub norm_branch: f64,
    pub norm_cone: f64,
    pub ratio: f64,
    pub x_cut: f64,
    pub bounds: EnergyBounds,
    /// Set when a quadrature failed; the norms are then NaN.
    pub failure: Option<String>,
}

impl EnergyReport {
    pub fn margin_upper_branch(&self) -> f64 {
        self.bounds.upper_branch - self.norm_branch
    }

    pub fn margin_lower_cone(&self) -> f64 {
        self.norm_cone - self.bounds.lower_cone
    }

    pub fn margin_upper_cone(&self) -> f64 {
        self.bounds.upper_cone - self.norm_cone
    }

    pub fn margin_ratio(&self) -> f64 {
        self.bounds.ratio - self.ratio
    }

    /// Both cone displays hold at this cell.
    pub fn cone_bounds_hold(&self) -> bool {
        self.margin_lower_cone() >= 0.0 && self.margin_upper_cone() >= 0.0
    }
}

/// Evaluates every (t, a₂) cell of the sweep. `a1` is held fixed; cells are
/// independent and returned in (a₂, t) order. Quadrature failures are
/// recorded per cell rather than aborting the sweep.
pub fn ratio_report(t_list: &[f64], a2_list: &[f64], a1: f64, profile: &Profile, quad: &QuadratureConfig) -> Result<Vec<EnergyReport>> {
    profile.band.validate()?;
    let cells: Vec<(f64, f64)> = a2_list.iter().flat_map(|&a2| t_list.iter().map(move |&t| (a2, t))).collect();
    cells
        .par_iter()
        .map(|&(a2, t)| {
            let pots = BranchPotentials::new(a1, a2)?;
            let graph = StarGraph::new(pots);
            let spectral = profile.shifted(a2);
            let bounds = EnergyBounds::new(&pots, profile);
            let cell = l2_branch(t, &spectral, &graph, quad).and_then(|b| Ok((b, l2_cone(t, &spectral, &graph, quad)?)));
            Ok(match cell {
                Ok((branch, cone)) => EnergyReport {
                    t,
                    a2,
                    norm_branch: branch.norm,
                    norm_cone: cone,
                    ratio: branch.norm / cone,
                    x_cut: branch.x_cut,
                    bounds,
                    failure: None,
                },
                Err(e) => EnergyReport {
                    t,
                    a2,
                    norm_branch: f64::NAN,
                    norm_cone: f64::NAN,
                    ratio: f64::NAN,
                    x_cut: f64::NAN,
                    bounds,
                    failure: Some(e.to_string()),
                },
            })
        })
        .collect()
}

/// Smallest t in the (ascending) reports from which every later cell
/// satisfies `holds`; None if the last cell fails.
pub fn empirical_t0(reports: &[&EnergyReport], holds: impl Fn(&EnergyReport) -> bool) -> Option<f64> {
    let mut t0 = None;
    for r in reports.iter().rev() {
        if !holds(r) {
            break;
        }
        t0 = Some(r.t);
    }
    t0
}

/// Least-squares line through (ln s, ln v).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in log space.
    pub residual: f64,
}

pub fn decay_fit(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 samples, got {}", samples.len())));
    }
    if let Some(&(s, v)) = samples.iter().find(|(s, v)| !(*s > 0.0 && *v > 0.0)) {
        return Err(Error::DegenerateFit(format!("nonpositive sample ({s}, {v})")));
    }
    let n = samples.len() as f64;
    let logs: Vec<(f64, f64)> = samples.iter().map(|(s, v)| (s.ln(), v.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateFit("zero variance in the abscissa".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit {
        slope,
        intercept,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::make_bump;
    use proptest::prelude::*;

    fn setup(a2: f64) -> (StarGraph, SpectralProfile) {
        let g = StarGraph::new(BranchPotentials::new(0.0, a2).unwrap());
        (g, make_bump(EnergyBand::default()).unwrap().shifted(a2))
    }

    #[test]
    fn cone_interval_is_inside_light_cone() {
        let c = ConeInterval::new(100.0, 1.0, &EnergyBand::default());
        assert!(0.0 < c.x_low && c.x_low < c.x_high && c.x_high < 100.0);
    }

    #[test]
    fn zero_profile_norms_vanish() {
        let g = StarGraph::new(BranchPotentials::new(0.0, 1.0).unwrap());
        let p = Profile::new(EnergyBand::default(), "zero").unwrap().shifted(1.0);
        let quad = QuadratureConfig::default();
        assert_eq!(l2_branch(50.0, &p, &g, &quad).unwrap().norm, 0.0);
        assert_eq!(l2_cone(50.0, &p, &g, &quad).unwrap(), 0.0);
    }

    #[test]
    fn norms_ordered_and_bounded() {
        let quad = QuadratureConfig::default();
        for a2 in [1.0, 10.0] {
            let (g, p) = setup(a2);
            let b = l2_branch(200.0, &p, &g, &quad).unwrap();
            let c = l2_cone(200.0, &p, &g, &quad).unwrap();
            assert!(
                c <= b.norm && b.norm <= b.plancherel_bound,
                "a2={a2}: {c} {} {}",
                b.norm,
                b.plancherel_bound
            );
        }
    }

    #[test]
    fn branch_norm_approaches_full_line_plancherel_value() {
        // For large t essentially all of u₊ lives on x > 0, where
        // ‖u₊‖² = 2π ∫ |2p q₁ ψ̃|² dp.
        let quad = QuadratureConfig::default();
        let (g, p) = setup(1.0);
        let full = {
            let rule = crate::quadrature::gauss_legendre(24);
            let mut s = 0.0;
            for seg in p.profile.breakpoints().windows(2) {
                let (lo, hi) = (seg[0].sqrt(), seg[1].sqrt());
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    let pp = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                    let l = 1.0 + pp * pp;
                    s += 0.5 * (hi - lo) * w * (2.0 * pp * g.q(crate::spectral::Branch::One, l) * p.eval(l)).powi(2);
                }
            }
            (2.0 * PI * s).sqrt()
        };
        let b = l2_branch(1000.0, &p, &g, &quad).unwrap();
        assert!((b.norm - full).abs() < 1e-4 * full, "{} vs {full}", b.norm);
    }

    #[test]
    fn bound_asymptote_ratio() {
        let profile = make_bump(EnergyBand::default()).unwrap();
        let band = profile.band;
        let a2 = 1e6;
        let b = plancherel_bound(&BranchPotentials::new(0.0, a2).unwrap(), &profile);
        let asym = band.beta.sqrt() / band.alpha.powf(0.25) * profile.l2_norm() / a2.sqrt();
        assert!((b / asym - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empirical_t0_scans_from_the_end() {
        let bounds = EnergyBounds::new(
            &BranchPotentials::new(0.0, 1.0).unwrap(),
            &make_bump(EnergyBand::default()).unwrap(),
        );
        let mk = |t: f64, ok: bool| EnergyReport {
            t,
            a2: 1.0,
            norm_branch: 1.0,
            norm_cone: if ok { 1.0 } else { 0.0 },
            ratio: 1.0,
            x_cut: 0.0,
            bounds,
            failure: None,
        };
        let rs = [mk(1.0, true), mk(2.0, false), mk(3.0, true), mk(4.0, true)];
        let refs: Vec<&EnergyReport> = rs.iter().collect();
        assert_eq!(empirical_t0(&refs, |r| r.norm_cone > 0.5), Some(3.0));
        assert_eq!(empirical_t0(&refs[..2], |r| r.norm_cone > 0.5), None);
    }

    #[test]
    fn fit_examples() {
        let pw: Vec<(f64, f64)> = [1.0f64, 10.0, 100.0, 1000.0].iter().map(|&t| (t, 7.0 * t.powf(-0.5))).collect();
        let f = decay_fit(&pw).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && f.residual < 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-12);
        let c = decay_fit(&[(1.0, 3.0), (2.0, 3.0), (5.0, 3.0)]).unwrap();
        assert!(c.slope.abs() < 1e-15);
        assert!(decay_fit(&[(2.0, 1.0), (2.0, 3.0), (2.0, 5.0)]).is_err());
        assert!(decay_fit(&[(1.0, 1.0), (2.0, 3.0)]).is_err());
    }

    proptest! {
        #[test]
        fn fit_recovers_power_laws(k in -3.0f64..3.0, c in 0.1f64..10.0) {
            let s: Vec<(f64, f64)> = (1..8).map(|i| { let t = 1.7f64.powi(i); (t, c * t.powf(k)) }).collect();
            let f = decay_fit(&s).unwrap();
            prop_assert!((f.slope - k).abs() < 1e-10);
        }
    }
}
