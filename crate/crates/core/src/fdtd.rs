//! Leapfrog finite differences for u_tt = u_xx − a_k u on two truncated
//! half-axes glued at a shared vertex unknown.
//!
//! With the vertex carrying a full cell (half from each branch) the
//! spatial operator K is a weighted graph Laplacian plus potential,
//! symmetric in the mass inner product ⟨u, v⟩_M. The staggered energy
//! ½[‖(uⁿ − uⁿ⁻¹)/dt‖²_M + Re⟨uⁿ, K uⁿ⁻¹⟩_M] is then conserved exactly by
//! u^{n+1} = 2uⁿ − uⁿ⁻¹ − dt² K uⁿ.

use std::io::Write;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectral::{Branch, BranchPotentials};
use crate::transform::BranchFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdtdParams {
    pub dx: f64,
    pub dt: f64,
    /// Domain length per branch; Dirichlet zero at x = length.
    pub length: f64,
}

impl FdtdParams {
    /// dt = dx/2 and the given length.
    pub fn new(dx: f64, length: f64) -> Self {
        Self { dx, dt: 0.5 * dx, length }
    }

    /// Domain just long enough that the far boundary cannot influence
    /// x ≤ `radius` before `t_end` (numerical signals may travel at dx/dt).
    pub fn for_run(dx: f64, radius: f64, t_end: f64) -> Self {
        Self::new(dx, radius + 2.0 * t_end + 10.0)
    }
}

#[derive(Debug, Clone)]
pub struct FdtdGrid {
    pub dx: f64,
    pub dt: f64,
    pub length: f64,
    pub pots: BranchPotentials,
    /// Per branch, samples at x_i = i·dx, i = 0..=n; index 0 is the shared
    /// vertex and is kept identical on both branches; index n is the
    /// Dirichlet boundary.
    pub u_prev: [Vec<C64>; 2],
    pub u_curr: [Vec<C64>; 2],
    pub step_count: usize,
    initial_peak: f64,
}

/// Growth of max|u| over its initial value that is reported as instability.
const INSTABILITY_RATIO: f64 = 1e6;

impl FdtdGrid {
    /// Zero-velocity start from `u0`. Sampled data must share the spacing
    /// dx; values beyond its extent are taken as zero.
    pub fn init(u0: &BranchFunction, pots: BranchPotentials, params: FdtdParams, t_end: f64, support_radius: f64) -> Result<Self> {
        let FdtdParams { dx, dt, length } = params;
        if !(dx > 0.0 && dt > 0.0 && dt <= dx) {
            return Err(Error::Cfl { dt, dx });
        }
        let required = t_end + support_radius;
        if length <= required {
            return Err(Error::DomainTooShort { length, required });
        }
        let n = (length / dx).round() as usize;
        let mut u: [Vec<C64>; 2] = [vec![C64::new(0.0, 0.0); n + 1], vec![C64::new(0.0, 0.0); n + 1]];
        match u0 {
            BranchFunction::Callable { f, .. } => {
                for b in Branch::ALL {
                    for (i, v) in u[b.slot()].iter_mut().enumerate().take(n) {
                        *v = f(b, i as f64 * dx);
                    }
                }
            }
            BranchFunction::Sampled(s) => {
                let h = s
                    .step
                    .ok_or_else(|| Error::Config("FDTD needs uniformly sampled initial data".into()))?;
                if (h - dx).abs() > 1e-12 * dx {
                    return Err(Error::Config(format!("initial data spacing {h} differs from dx = {dx}")));
                }
                for b in Branch::ALL {
                    for (i, v) in s.values[b.slot()].iter().enumerate().take(n) {
                        u[b.slot()][i] = *v;
                    }
                }
            }
        }
        let vertex = 0.5 * (u[0][0] + u[1][0]);
        u[0][0] = vertex;
        u[1][0] = vertex;
        let initial_peak = u.iter().flatten().fold(0.0_f64, |m, z| m.max(z.norm()));
        Ok(Self {
            dx,
            dt,
            length,
            pots,
            u_prev: u.clone(),
            u_curr: u,
            step_count: 0,
            initial_peak,
        })
    }

    pub fn n(&self) -> usize {
        self.u_curr[0].len() - 1
    }

    pub fn time(&self) -> f64 {
        self.step_count as f64 * self.dt
    }

    /// (K u) on both branches; zero at the Dirichlet ends.
    fn apply_k(&self, u: &[Vec<C64>; 2]) -> [Vec<C64>; 2] {
        let n = self.n();
        let inv_dx2 = 1.0 / (self.dx * self.dx);
        let mut out = [vec![C64::new(0.0, 0.0); n + 1], vec![C64::new(0.0, 0.0); n + 1]];
        for b in Branch::ALL {
            let (v, a) = (&u[b.slot()], self.pots.get(b));
            let o = &mut out[b.slot()];
            for i in 1..n {
                o[i] = -(v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_dx2 + a * v[i];
            }
        }
        let v0 = u[0][0];
        let k0 = -(u[0][1] + u[1][1] - 2.0 * v0) * inv_dx2 + 0.5 * (self.pots.a1 + self.pots.a2) * v0;
        out[0][0] = k0;
        out[1][0] = k0;
        out
    }

    /// Advances one step. The first step uses u¹ = u⁰ − (dt²/2) K u⁰, the
    /// time-symmetric start for zero initial velocity.
    pub fn step(&mut self) -> Result<()> {
        let ku = self.apply_k(&self.u_curr);
        let dt2 = self.dt * self.dt;
        let first = self.step_count == 0;
        let n = self.n();
        let mut next = [vec![C64::new(0.0, 0.0); n + 1], vec![C64::new(0.0, 0.0); n + 1]];
        for s in 0..2 {
            for i in 0..n {
                next[s][i] = if first {
                    self.u_curr[s][i] - 0.5 * dt2 * ku[s][i]
                } else {
                    2.0 * self.u_curr[s][i] - self.u_prev[s][i] - dt2 * ku[s][i]
                };
            }
        }
        self.u_prev = std::mem::replace(&mut self.u_curr, next);
        self.step_count += 1;
        if self.step_count.is_multiple_of(256) && self.initial_peak > 0.0 {
            let peak = self.u_curr.iter().flatten().fold(0.0_f64, |m, z| m.max(z.norm()));
            let ratio = peak / self.initial_peak;
            if !ratio.is_finite() || ratio > INSTABILITY_RATIO {
                return Err(Error::Instability {
                    step: self.step_count,
                    ratio,
                });
            }
        }
        Ok(())
    }

    /// Steps until time ≥ t (to within half a step).
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        while self.time() + 0.5 * self.dt < t {
            self.step()?;
        }
        Ok(())
    }

    fn mass_inner(&self, u: &[Vec<C64>; 2], v: &[Vec<C64>; 2]) -> f64 {
        let n = self.n();
        let mut s = (u[0][0].conj() * v[0][0]).re;
        for b in 0..2 {
            for i in 1..n {
                s += (u[b][i].conj() * v[b][i]).re;
            }
        }
        self.dx * s
    }

    /// ½[‖(uⁿ − uⁿ⁻¹)/dt‖²_M + Re⟨uⁿ, K uⁿ⁻¹⟩_M]; equals ½⟨u₀, K u₀⟩ before
    /// the first step.
    pub fn discrete_energy(&self) -> f64 {
        let n = self.n();
        let diff: [Vec<C64>; 2] = std::array::from_fn(|s| (0..=n).map(|i| (self.u_curr[s][i] - self.u_prev[s][i]) / self.dt).collect());
        let ku = self.apply_k(&self.u_prev);
        0.5 * (self.mass_inner(&diff, &diff) + self.mass_inner(&self.u_curr, &ku))
    }

    /// Current branch-2 samples with their coordinates.
    pub fn branch_samples(&self, b: Branch) -> (Vec<f64>, &[C64]) {
        let xs = (0..=self.n()).map(|i| i as f64 * self.dx).collect();
        (xs, &self.u_curr[b.slot()])
    }

    /// Appends `t,branch,x,re,im` rows for x ≤ x_max (every `stride`-th node).
    pub fn write_snapshot<W: Write>(&self, wr: &mut csv::Writer<W>, x_max: f64, stride: usize) -> Result<()> {
        let t = self.time();
        for b in Branch::ALL {
            for (i, z) in self.u_curr[b.slot()].iter().enumerate().step_by(stride.max(1)) {
                let x = i as f64 * self.dx;
                if x > x_max {
                    break;
                }
                wr.write_record(&[
                    t.to_string(),
                    b.index().to_string(),
                    x.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])?;
            }
        }
        Ok(())
    }
}

/// Header for [`FdtdGrid::write_snapshot`] rows.
pub const SNAPSHOT_HEADER: [&str; 5] = ["t", "branch", "x", "re", "im"];

/// Relative L² discrepancy of `approx` against `reference` on a uniform grid
/// (composite trapezoid weights).
pub fn relative_l2(approx: &[C64], reference: &[C64]) -> f64 {
    assert_eq!(approx.len(), reference.len());
    let w = |i: usize| if i == 0 || i + 1 == approx.len() { 0.5 } else { 1.0 };
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..approx.len() {
        num += w(i) * (approx[i] - reference[i]).norm_sqr();
        den += w(i) * reference[i].norm_sqr();
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
