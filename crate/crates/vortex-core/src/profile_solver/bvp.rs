//! Homogeneous solutions of `−(rψ')'/r + (n²/r² − h)ψ = 0` and the Green's-function
//! solve behind Λ⁻¹.

use std::sync::Arc;

use super::ProfileSolver;
use crate::error::{Error, Result};
use crate::grid::RadialProfile;
use crate::kernels::phi_h_profiles;
use crate::ode::{dopri5, DenseSegment, Tolerances};

const SERIES_START: f64 = 0.05;
const INNER_END: f64 = 0.002;

/// ψ₋ is regular at 0 (≈ rⁿ), ψ₊ decays at infinity (≈ r⁻ⁿ). ψ₊ is +∞ at r = 0.
#[derive(Debug, Clone)]
pub struct HomogeneousSolutions {
    pub n: usize,
    pub psi_minus: Vec<f64>,
    pub dpsi_minus: Vec<f64>,
    pub psi_plus: Vec<f64>,
    pub dpsi_plus: Vec<f64>,
    /// r(ψ₊ψ₋' − ψ₋ψ₊'), constant in exact arithmetic
    pub w0: f64,
    /// ψ₋ ≈ κ₋ rⁿ for large r
    pub kappa_minus: f64,
    /// ψ₊ ≈ κ₊ r⁻ⁿ near 0
    pub kappa_plus: f64,
    /// max relative drift of the Wronskian over the grid (r ≥ 0.1)
    pub wronskian_drift: f64,
}

fn rhs(n: usize) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> {
    let n2 = (n * n) as f64;
    move |r, y, dy| {
        let h = phi_h_profiles(r).1;
        dy[0] = y[1];
        dy[1] = -y[1] / r + (n2 / (r * r) - h) * y[0];
        Ok(())
    }
}

/// Frobenius series of ψ₋ near 0: rⁿ(1 + a₁r² + a₂r⁴ + a₃r⁶).
fn frobenius(n: usize, r: f64) -> (f64, f64) {
    // h = 1 − r²/8 + r⁴/192 + O(r⁸)
    let hm = [1.0, -1.0 / 8.0, 1.0 / 192.0, 0.0];
    let mut a = [1.0, 0.0, 0.0, 0.0];
    for k in 1..4 {
        let mut acc = 0.0;
        for m in 0..k {
            acc += hm[m] * a[k - 1 - m];
        }
        a[k] = -acc / (4.0 * k as f64 * (n + k) as f64);
    }
    let nf = n as f64;
    let mut psi = 0.0;
    let mut dpsi = 0.0;
    for (k, &ak) in a.iter().enumerate() {
        let p = nf + 2.0 * k as f64;
        psi += ak * r.powf(p);
        dpsi += ak * p * r.powf(p - 1.0);
    }
    (psi, dpsi)
}

fn integrate(n: usize, r0: f64, y0: [f64; 2], r1: f64) -> Result<Vec<DenseSegment>> {
    let mut segs = Vec::new();
    let tol = Tolerances { rtol: 1e-13, atol: 1e-40, ..Default::default() };
    dopri5(rhs(n), r0, &y0, r1, tol, |s, _| {
        segs.push(s.clone());
        true
    })?;
    Ok(segs)
}

fn sample(segs: &[DenseSegment], r: f64) -> [f64; 2] {
    let forward = segs[0].h > 0.0;
    let idx = segs.partition_point(|s| if forward { s.t1() < r } else { s.t1() > r });
    let s = &segs[idx.min(segs.len() - 1)];
    let v = s.eval_vec(r);
    [v[0], v[1]]
}

impl ProfileSolver {
    pub fn homogeneous_solutions(&self, n: usize) -> Result<Arc<HomogeneousSolutions>> {
        if n == 0 {
            return Err(Error::InvalidInput("homogeneous solutions are built for n ≥ 1".into()));
        }
        if let Some(h) = self.homog.lock().unwrap().get(&n) {
            return Ok(h.clone());
        }
        let r = self.grid.nodes();
        let big_r = self.grid.r_max();
        let nf = n as f64;
        let m = r.len();

        let (p0, d0) = frobenius(n, SERIES_START);
        let out = integrate(n, SERIES_START, [p0, d0], big_r)?;
        let inner_end = INNER_END.min(0.5 * r[1]);
        let inw = integrate(n, big_r, [big_r.powf(-nf), -nf * big_r.powf(-nf - 1.0)], inner_end)?;

        let mut psi_minus = vec![0.0; m];
        let mut dpsi_minus = vec![0.0; m];
        let mut psi_plus = vec![f64::INFINITY; m];
        let mut dpsi_plus = vec![f64::NEG_INFINITY; m];
        for k in 1..m {
            let (p, d) = if r[k] < SERIES_START {
                frobenius(n, r[k])
            } else {
                let v = sample(&out, r[k]);
                (v[0], v[1])
            };
            psi_minus[k] = p;
            dpsi_minus[k] = d;
            let [p, d] = sample(&inw, r[k]);
            psi_plus[k] = p;
            dpsi_plus[k] = d;
        }
        if n == 1 {
            dpsi_minus[0] = 1.0;
        }

        let wr = |k: usize| r[k] * (psi_plus[k] * dpsi_minus[k] - psi_minus[k] * dpsi_plus[k]);
        let k1 = r.partition_point(|&x| x < 1.0);
        let w0 = wr(k1);
        let wronskian_drift = (1..m).filter(|&k| r[k] >= 0.1).map(|k| ((wr(k) - w0) / w0).abs()).fold(0.0, f64::max);
        if !(w0 > 0.0) || wronskian_drift > 1e-8 {
            return Err(Error::Discretization(format!(
                "Wronskian for n = {n} not constant: w0 = {w0:e}, drift {wronskian_drift:e}"
            )));
        }

        let kappa_minus = (psi_minus[m - 1] + big_r * dpsi_minus[m - 1] / nf) / (2.0 * big_r.powf(nf));
        let e = |x: f64| {
            let [p, d] = sample(&inw, x);
            x.powf(nf) * (p - x * d / nf) / 2.0
        };
        let (ra, rb) = (0.005, 0.01);
        let kappa_plus = (e(ra) * rb * rb - e(rb) * ra * ra) / (rb * rb - ra * ra);

        let hs = Arc::new(HomogeneousSolutions {
            n,
            psi_minus,
            dpsi_minus,
            psi_plus,
            dpsi_plus,
            w0,
            kappa_minus,
            kappa_plus,
            wronskian_drift,
        });
        self.homog.lock().unwrap().insert(n, hs.clone());
        Ok(hs)
    }

    /// Solves `nφω − (n g/2) K ω = a` for one radial profile (n ≥ 1).
    ///
    /// Returns `(Ω, ω)` where Ω = Kω solves `−(rΩ')'/r + (n²/r² − h)Ω = a/(nφ)` and
    /// `ω = hΩ + a/(nφ)`.
    pub fn solve_omega_bvp(&self, n: usize, a: &RadialProfile) -> Result<(RadialProfile, RadialProfile)> {
        let hs = self.homogeneous_solutions(n)?;
        let r = self.grid.nodes();
        let m = r.len();
        let nf = n as f64;
        let b: Vec<f64> = (0..m).map(|k| a.values[k] / (nf * self.phi[k])).collect();
        let inner: Vec<f64> = (0..m).map(|k| hs.psi_minus[k] * r[k] * b[k] / hs.w0).collect();
        let outer: Vec<f64> =
            (0..m).map(|k| if k == 0 { 0.0 } else { hs.psi_plus[k] * r[k] * b[k] / hs.w0 }).collect();
        let ci = self.grid.cumulative(&inner);
        let co = self.grid.cumulative_from_end(&outer);
        let mut om = vec![0.0; m];
        for k in 1..m {
            om[k] = hs.psi_plus[k] * ci[k] + hs.psi_minus[k] * co[k];
        }

        // corrected-trapezoid variant as the error estimate
        let mut acc_in = 0.0;
        let mut alt = vec![0.0; m];
        let mut suffix = vec![0.0; m + 1];
        for k in (1..m).rev() {
            suffix[k] = suffix[k + 1] + self.q[k] * outer[k];
        }
        for k in 1..m {
            acc_in += self.q[k] * inner[k];
            alt[k] = hs.psi_plus[k] * acc_in + hs.psi_minus[k] * suffix[k + 1] + self.diag_correction(k) * b[k];
        }
        let scale = om.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let estimate = om.iter().zip(&alt).fold(0.0f64, |s, (x, y)| s.max((x - y).abs()));
        let tolerance = 1e-6 * scale.max(f64::MIN_POSITIVE);
        if !(estimate <= tolerance) {
            return Err(Error::Quadrature { estimate, tolerance });
        }

        let omega: Vec<f64> = (0..m).map(|k| self.h[k] * om[k] + b[k]).collect();
        Ok((RadialProfile { grid: self.grid.clone(), values: om }, RadialProfile { grid: self.grid.clone(), values: omega }))
    }
}

/// Pointwise residual of `−Ω'' − Ω'/r + (n²/r² − h)Ω − a/(nφ)` on interior nodes (0 elsewhere).
pub fn omega_bvp_residual(solver: &ProfileSolver, n: usize, big_omega: &RadialProfile, a: &RadialProfile) -> Vec<f64> {
    let grid = solver.grid();
    let r = grid.nodes();
    let d1 = grid.derivative(&big_omega.values);
    let d2 = grid.second_derivative(&big_omega.values);
    let n2 = (n * n) as f64;
    (0..r.len())
        .map(|k| {
            if k < 3 || k + 3 >= r.len() {
                return 0.0;
            }
            let b = a.values[k] / (n as f64 * solver.phi()[k]);
            -d2[k] - d1[k] / r[k] + (n2 / (r[k] * r[k]) - solver.h()[k]) * big_omega.values[k] - b
        })
        .collect()
}
