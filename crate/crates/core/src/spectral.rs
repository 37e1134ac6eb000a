//! Closed-form spectral ingredients of the two-branch Klein-Gordon operator:
//! the branch-cut square root, the branch wavenumbers ξ_k, the ratios s_j,
//! the spectral weights q_l and the generalized eigenfunctions F^{±,j}.

use std::f64::consts::FRAC_1_PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization of the spectral weights that makes the transform an isometry.
///
/// Calibrated against the symmetric case `a1 == a2`, where the transform
/// reduces to a full-line Fourier transform, and then frozen.
pub const DEFAULT_CQ: f64 = FRAC_1_PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    One,
    Two,
}

impl Branch {
    pub const ALL: [Branch; 2] = [Branch::One, Branch::Two];

    pub fn index(self) -> usize {
        match self {
            Branch::One => 1,
            Branch::Two => 2,
        }
    }

    /// Zero-based slot for per-branch arrays.
    pub fn slot(self) -> usize {
        self.index() - 1
    }

    pub fn other(self) -> Branch {
        match self {
            Branch::One => Branch::Two,
            Branch::Two => Branch::One,
        }
    }

    pub fn from_index(i: usize) -> Option<Branch> {
        match i {
            1 => Some(Branch::One),
            2 => Some(Branch::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// The potential step: constant potential `a1` on branch 1 and `a2` on branch 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPotentials {
    pub a1: f64,
    pub a2: f64,
}

impl BranchPotentials {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        let p = Self { a1, a2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a1.is_finite() && self.a2.is_finite() && 0.0 <= self.a1 && self.a1 <= self.a2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPotentials { a1: self.a1, a2: self.a2 })
        }
    }

    pub fn get(&self, k: Branch) -> f64 {
        match k {
            Branch::One => self.a1,
            Branch::Two => self.a2,
        }
    }
}

/// Square root with the cut along the negative real axis approached from
/// below: `sqrt(r e^{iφ}) = sqrt(r) e^{iφ/2}` for `φ ∈ [-π, π)`.
///
/// A negative real therefore maps to the negative imaginary axis.
pub fn branch_sqrt(z: C64) -> C64 {
    if z.im == 0.0 {
        if z.re >= 0.0 {
            C64::new(z.re.sqrt(), 0.0)
        } else {
            C64::new(0.0, -(-z.re).sqrt())
        }
    } else {
        // Off the real axis the principal root agrees with the convention.
        z.sqrt()
    }
}

/// Potentials together with the weight normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarGraph {
    pub pots: BranchPotentials,
    pub cq: f64,
}

impl StarGraph {
    pub fn new(pots: BranchPotentials) -> Self {
        Self { pots, cq: DEFAULT_CQ }
    }

    pub fn with_cq(mut self, cq: f64) -> Self {
        self.cq = cq;
        self
    }

    pub fn a(&self, k: Branch) -> f64 {
        self.pots.get(k)
    }

    /// ξ_k(λ) = sqrt(λ - a_k) under [`branch_sqrt`].
    pub fn xi(&self, k: Branch, lambda: f64) -> C64 {
        branch_sqrt(C64::new(lambda - self.a(k), 0.0))
    }

    /// s_1 = -ξ_2/ξ_1 and s_2 = -ξ_1/ξ_2.
    pub fn s(&self, j: Branch, lambda: f64) -> Result<C64> {
        let num = self.xi(j.other(), lambda);
        let den = self.xi(j, lambda);
        if den == C64::new(0.0, 0.0) {
            return Err(Error::BranchPoint { branch: j.index(), lambda });
        }
        Ok(-num / den)
    }

    /// Spectral weight q_l(λ); zero at and below the threshold a_l.
    pub fn q(&self, l: Branch, lambda: f64) -> f64 {
        if lambda <= self.a(l) {
            return 0.0;
        }
        let xi_l = self.xi(l, lambda).re;
        let sum = self.xi(Branch::One, lambda) + self.xi(Branch::Two, lambda);
        self.cq * xi_l / sum.norm_sqr()
    }

    /// F^{sign,j}_{λ,k}(x): the generalized eigenfunction with incoming
    /// branch `j`, evaluated at coordinate `x` on branch `k`.
    pub fn eigenfunction(&self, sign: Sign, j: Branch, k: Branch, lambda: f64, x: f64) -> Result<C64> {
        let i = C64::new(0.0, 1.0);
        if k == j {
            let xi = self.xi(j, lambda);
            let s = self.s(j, lambda)?;
            let arg = xi * x;
            Ok(arg.cos() + i * sign.value() * s * arg.sin())
        } else {
            let xi = self.xi(k, lambda);
            Ok((i * sign.value() * xi * x).exp())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn graph(a1: f64, a2: f64) -> StarGraph {
        StarGraph::new(BranchPotentials::new(a1, a2).unwrap())
    }

    #[test]
    fn branch_sqrt_examples() {
        assert_eq!(branch_sqrt(C64::new(4.0, 0.0)), C64::new(2.0, 0.0));
        assert_eq!(branch_sqrt(C64::new(-1.0, 0.0)), C64::new(0.0, -1.0));
        assert_eq!(branch_sqrt(C64::new(-1.0, -0.0)), C64::new(0.0, -1.0));
        assert!(close(branch_sqrt(C64::new(0.0, 2.0)), C64::new(1.0, 1.0), 1e-15));
    }

    #[test]
    fn xi_examples() {
        let g = graph(0.5, 3.0);
        assert_eq!(g.xi(Branch::Two, 3.0), C64::new(0.0, 0.0));
        assert_eq!(g.xi(Branch::Two, 7.0), C64::new(2.0, 0.0));
        assert_eq!(g.xi(Branch::Two, 2.0), C64::new(0.0, -1.0));
    }

    #[test]
    fn s_examples() {
        let sym = graph(2.0, 2.0);
        assert!(close(sym.s(Branch::One, 5.3).unwrap(), C64::new(-1.0, 0.0), 1e-15));
        let g = graph(0.0, 3.0);
        assert!(close(g.s(Branch::One, 4.0).unwrap(), C64::new(-0.5, 0.0), 1e-15));
        assert!(close(g.s(Branch::Two, 4.0).unwrap(), C64::new(-2.0, 0.0), 1e-15));
        assert!(matches!(g.s(Branch::Two, 3.0), Err(Error::BranchPoint { branch: 2, .. })));
        assert!(matches!(g.s(Branch::One, 0.0), Err(Error::BranchPoint { branch: 1, .. })));
    }

    #[test]
    fn q_examples() {
        let cq = DEFAULT_CQ;
        let g = graph(1.0, 3.0);
        assert_eq!(g.q(Branch::One, 0.5), 0.0);
        assert_eq!(g.q(Branch::Two, 3.0), 0.0);
        let sym = graph(1.5, 1.5);
        assert!((sym.q(Branch::One, 5.5) - cq * 0.125).abs() < 1e-16);
        let g = graph(0.0, 3.0);
        assert!((g.q(Branch::One, 4.0) - cq * 2.0 / 9.0).abs() < 1e-16);
    }

    #[test]
    fn eigenfunction_examples() {
        let g = graph(0.0, 1.0);
        let f = g.eigenfunction(Sign::Minus, Branch::One, Branch::Two, 2.5, 0.0).unwrap();
        assert_eq!(f, C64::new(1.0, 0.0));

        let sym = graph(1.0, 1.0);
        let (lambda, x) = (3.25, 1.7);
        let xi = 1.5;
        let f = sym.eigenfunction(Sign::Minus, Branch::One, Branch::One, lambda, x).unwrap();
        assert!(close(f, C64::new(0.0, xi * x).exp(), 1e-14));

        // Below threshold on branch 2: the minus family decays, the plus family grows.
        let g = graph(0.0, 2.0);
        let plus = g.eigenfunction(Sign::Plus, Branch::One, Branch::Two, 1.0, 3.0).unwrap();
        let minus = g.eigenfunction(Sign::Minus, Branch::One, Branch::Two, 1.0, 3.0).unwrap();
        assert!(close(plus, C64::new(3.0_f64.exp(), 0.0), 1e-12));
        assert!(close(minus, C64::new((-3.0_f64).exp(), 0.0), 1e-15));
    }

    #[test]
    fn eigenfunction_at_branch_point_is_error() {
        let g = graph(0.0, 2.0);
        assert!(g.eigenfunction(Sign::Plus, Branch::Two, Branch::Two, 2.0, 1.0).is_err());
        assert!(g.eigenfunction(Sign::Plus, Branch::Two, Branch::One, 2.0, 1.0).is_ok());
    }

    #[test]
    fn invalid_potentials_rejected() {
        assert!(BranchPotentials::new(2.0, 1.0).is_err());
        assert!(BranchPotentials::new(-0.1, 1.0).is_err());
        assert!(BranchPotentials::new(0.0, f64::INFINITY).is_err());
        assert!(BranchPotentials::new(1.0, 1.0).is_ok());
    }

    fn eval(g: &StarGraph, sign: Sign, j: Branch, k: Branch, lambda: f64, x: f64) -> C64 {
        g.eigenfunction(sign, j, k, lambda, x).unwrap()
    }

    /// Max over a few λ of the vertex-condition defects, using one-sided
    /// second-order differences at x = 0.
    fn vertex_defect(g: &StarGraph, sign: Sign, j: Branch, lambda: f64, h: f64) -> (f64, f64) {
        let f = |k: Branch, x: f64| eval(g, sign, j, k, lambda, x);
        let t0 = (f(Branch::One, 0.0) - f(Branch::Two, 0.0)).norm();
        let d = |k: Branch| (-3.0 * f(k, 0.0) + 4.0 * f(k, h) - f(k, 2.0 * h)) / (2.0 * h);
        let t1 = (d(Branch::One) + d(Branch::Two)).norm();
        (t0, t1)
    }

    #[test]
    fn vertex_conditions_hold_at_second_order() {
        let g = graph(0.3, 1.7);
        for &lambda in &[1.9, 2.6, 4.1] {
            for sign in [Sign::Plus, Sign::Minus] {
                for j in Branch::ALL {
                    let (t0, t1_coarse) = vertex_defect(&g, sign, j, lambda, 1e-2);
                    let (_, t1_fine) = vertex_defect(&g, sign, j, lambda, 5e-3);
                    assert!(t0 < 1e-14);
                    assert!(t1_coarse < 1e-3);
                    let ratio = t1_coarse / t1_fine;
                    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn branch_sqrt_squares_back(re in -1e3f64..1e3, im in -1e3f64..1e3) {
            let z = C64::new(re, im);
            let w = branch_sqrt(z);
            prop_assert!((w * w - z).norm() <= 1e-12 * (1.0 + z.norm()));
            let arg = if im == 0.0 && re < 0.0 { -std::f64::consts::PI } else { z.arg() };
            if z != C64::new(0.0, 0.0) {
                let lower_half = (-std::f64::consts::PI..0.0).contains(&arg);
                prop_assert_eq!(w.im < 0.0, lower_half);
            }
        }

        #[test]
        fn above_threshold_quantities_are_real(a1 in 0.0f64..5.0, gap in 0.0f64..5.0, above in 1e-3f64..10.0) {
            let g = graph(a1, a1 + gap);
            let lambda = a1 + gap + above;
            let x1 = g.xi(Branch::One, lambda);
            let x2 = g.xi(Branch::Two, lambda);
            prop_assert!(x1.im == 0.0 && x1.re > 0.0);
            prop_assert!(x2.im == 0.0 && x2.re > 0.0);
            let s1 = g.s(Branch::One, lambda).unwrap();
            let s2 = g.s(Branch::Two, lambda).unwrap();
            prop_assert!(s1.im == 0.0 && s1.re < 0.0 && s2.re < 0.0);
            prop_assert!(((s1 * s2).re - 1.0).abs() < 1e-12);
        }

        #[test]
        fn weights_nonnegative_and_continuous(a1 in 0.0f64..5.0, gap in 0.0f64..5.0, lambda in -2.0f64..20.0) {
            let g = graph(a1, a1 + gap);
            for l in Branch::ALL {
                prop_assert!(g.q(l, lambda) >= 0.0);
            }
            if lambda > a1 + gap + 1e-3 {
                let d = 1e-9;
                for l in Branch::ALL {
                    prop_assert!((g.q(l, lambda + d) - g.q(l, lambda)).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn ode_residual_is_second_order(a1 in 0.0f64..2.0, gap in 0.0f64..2.0, above in 0.05f64..3.0, x in 0.5f64..6.0) {
            let g = graph(a1, a1 + gap);
            let lambda = a1 + gap + above;
            for sign in [Sign::Plus, Sign::Minus] {
                for j in Branch::ALL {
                    for k in Branch::ALL {
                        let f = |y: f64| eval(&g, sign, j, k, lambda, y);
                        let residual = |h: f64| {
                            let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
                            (-d2 + (g.a(k) - lambda) * f(x)).norm()
                        };
                        let r1 = residual(1e-2);
                        let r2 = residual(5e-3);
                        // residual ~ C h^2 with C ~ |xi|^4/12
                        let scale = (lambda - g.a(k)).abs().powi(2) / 12.0 * f(x).norm().max(1.0) * 1.5 + 1e-9;
                        prop_assert!(r1 <= 2.0 * scale * 1e-4 + 1e-8);
                        prop_assert!(r2 <= r1 / 3.0 + 1e-8);
                    }
                }
            }
        }
    }
}
