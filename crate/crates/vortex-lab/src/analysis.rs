//! Rescaled per-vortex profiles extracted from simulations, their weighted norms,
//! azimuthal projections and the fits used by the convergence studies.

use std::f64::consts::PI;
use std::sync::Arc;

use vortex_core::fit::{log_log_fit, LinearFit};
use vortex_core::grid::PolarGrid;
use vortex_core::point_vortex::Trajectory;
use vortex_core::profile_solver::ProfileSolver;
use vortex_core::{AzimuthalMode, RadialGrid, RadialProfile, Vec2};
use vortex_dns::{BicubicSampler, VorticityField};

use crate::error::{Error, Result};

pub const EXTRACT_RADII: usize = 192;
pub const EXTRACT_R_MAX: f64 = 10.0;
pub const EXTRACT_ANGLES: usize = 128;
pub const DEFAULT_BETA: f64 = 0.5;

/// Samples of w_i(ξ) = (νt/α_i)·ω_i(z_i + √(νt)ξ) on a polar grid, indexed like
/// [`PolarGrid::points`] (radius-major).
#[derive(Debug, Clone)]
pub struct RescaledProfile {
    pub i: usize,
    pub t: f64,
    pub nu: f64,
    pub center: Vec2,
    pub scale: f64,
    pub grid: PolarGrid,
    pub values: Vec<f64>,
}

impl RescaledProfile {
    pub fn default_grid() -> PolarGrid {
        PolarGrid::new(EXTRACT_RADII, EXTRACT_R_MAX, EXTRACT_ANGLES)
    }

    /// Profile of an analytic function, with the bookkeeping fields zeroed.
    pub fn from_fn(grid: PolarGrid, f: impl Fn(Vec2) -> f64) -> Self {
        let values = grid.points().map(|(r, th)| f(Vec2::from_polar(r, th))).collect();
        Self { i: 0, t: 0.0, nu: 0.0, center: Vec2::ZERO, scale: 1.0, grid, values }
    }

    /// ∫ w dξ over the disk.
    pub fn mass(&self) -> f64 {
        self.grid.area_weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    /// `w − f(ξ)` on the same grid.
    pub fn minus(&self, f: impl Fn(Vec2) -> f64) -> Self {
        let mut out = self.clone();
        for (v, (r, th)) in out.values.iter_mut().zip(self.grid.points()) {
            *v -= f(Vec2::from_polar(r, th));
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Extraction centred at the PW2 position of vortex `i` at the field's time.
pub fn extract_rescaled_profile(field: &VorticityField, traj: &Trajectory, i: usize, t: f64) -> Result<RescaledProfile> {
    if (field.t - t).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::Analysis(format!("snapshot time {} does not match requested t = {t}", field.t)));
    }
    if i >= field.n_vortices() || i >= traj.n() {
        return Err(Error::Analysis(format!("no vortex with index {i}")));
    }
    let center = traj.positions_at(t)?[i];
    extract_at(field, i, center, traj.alphas[i], RescaledProfile::default_grid())
}

/// Extraction of component `i` around an arbitrary centre.
pub fn extract_at(field: &VorticityField, i: usize, center: Vec2, alpha: f64, grid: PolarGrid) -> Result<RescaledProfile> {
    let scale = (field.nu * field.t).sqrt();
    let r_max = grid.radii.last().copied().unwrap_or(0.0);
    let reach = r_max * scale + center.x1.abs().max(center.x2.abs());
    if !(reach < 0.5 * field.l_box) {
        return Err(Error::Analysis(format!(
            "ξ-grid of radius {r_max} around vortex {i} reaches {reach:.3} beyond the half box {}",
            0.5 * field.l_box
        )));
    }
    let sampler = BicubicSampler::for_field(field, Some(i));
    let k = field.nu * field.t / alpha;
    let values = grid
        .points()
        .map(|(r, th)| {
            let x = center + scale * Vec2::from_polar(r, th);
            k * sampler.eval(x.x1, x.x2)
        })
        .collect();
    Ok(RescaledProfile { i, t: field.t, nu: field.nu, center, scale, grid, values })
}

/// (∫|w|² e^{β|ξ|/4} dξ)^{1/2} by polar quadrature.
pub fn x_norm(w: &RescaledProfile, beta: f64) -> f64 {
    let weights = w.grid.area_weights();
    let s: f64 = w
        .grid
        .points()
        .zip(&w.values)
        .zip(&weights)
        .map(|(((r, _), v), q)| q * v * v * (0.25 * beta * r).exp())
        .sum();
    s.sqrt()
}

/// Checked variant enforcing β ∈ (0, 1).
pub fn x_norm_checked(w: &RescaledProfile, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Analysis(format!("β = {beta} outside (0, 1)")));
    }
    Ok(x_norm(w, beta))
}

/// Radial grid matching the profile's radii.
pub fn radial_grid(w: &RescaledProfile) -> Result<Arc<RadialGrid>> {
    let r = &w.grid.radii;
    Ok(RadialGrid::uniform(r.len(), *r.last().unwrap())?.shared())
}

/// Cos/sin coefficient profiles of mode n by the trapezoid rule in θ.
pub fn azimuthal_project(w: &RescaledProfile, n: usize) -> Result<AzimuthalMode> {
    let na = w.grid.angles.len();
    if na < 4 * n.max(1) {
        return Err(Error::Analysis(format!("{na} angles alias mode {n}; need at least {}", 4 * n.max(1))));
    }
    let grid = radial_grid(w)?;
    let nr = w.grid.radii.len();
    let norm = if n == 0 { 1.0 / na as f64 } else { 2.0 / na as f64 };
    let mut c = vec![0.0; nr];
    let mut s = vec![0.0; nr];
    for k in 0..nr {
        for (a, th) in w.grid.angles.iter().enumerate() {
            let v = w.values[k * na + a];
            let (sn, cs) = (n as f64 * th).sin_cos();
            c[k] += norm * v * cs;
            s[k] += norm * v * sn;
        }
    }
    Ok(AzimuthalMode::new(n, RadialProfile::new(grid.clone(), c)?, RadialProfile::new(grid, s)?)?)
}

/// ∫|P_n w|² dξ for a projected mode sampled on the extraction radii.
pub fn mode_l2_sq(w: &RescaledProfile, mode: &AzimuthalMode) -> f64 {
    let rw = w.grid.radial_weights();
    let f = if mode.n == 0 { 2.0 * PI } else { PI };
    rw.iter()
        .zip(mode.c_profile.values.iter().zip(&mode.s_profile.values))
        .map(|(q, (c, s))| f * q * (c * c + s * s))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrupoleFit {
    pub amplitude_measured: f64,
    pub amplitude_predicted: f64,
    /// 2× the orientation angle of the m = 2 pattern, in (−π, π]
    pub phase_measured: f64,
    pub phase_predicted: f64,
    /// measured quadrupole too small for a meaningful phase
    pub degenerate: bool,
}

impl QuadrupoleFit {
    pub fn amplitude_rel_error(&self) -> f64 {
        (self.amplitude_measured - self.amplitude_predicted).abs() / self.amplitude_predicted
    }

    /// |phase_measured − phase_predicted| wrapped to [0, π].
    pub fn phase_error(&self) -> f64 {
        wrap_angle(self.phase_measured - self.phase_predicted).abs()
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Predicted quadrupole (Σ_j (α_j/α_i)(νt/|z_ij|²) e^{2iθ_ij})/(4π) as (amplitude, phase).
pub fn predicted_quadrupole(traj: &Trajectory, i: usize, t: f64, nu: f64) -> Result<(f64, f64)> {
    let z = traj.positions_at(t)?;
    let (mut c, mut s) = (0.0, 0.0);
    for j in 0..z.len() {
        if j == i {
            continue;
        }
        let zij = z[i] - z[j];
        let k = traj.alphas[j] / traj.alphas[i] * nu * t / zij.norm_sq() / (4.0 * PI);
        let th = 2.0 * zij.angle();
        c += k * th.cos();
        s += k * th.sin();
    }
    Ok((c.hypot(s), s.atan2(c)))
}

/// Least-squares fit of the m = 2 part of `w` against the template ω(r)·(A_c cos 2θ + A_s sin 2θ).
pub fn quadrupole_fit(w: &RescaledProfile, traj: &Trajectory, i: usize, t: f64, nu: f64, solver: &ProfileSolver) -> Result<QuadrupoleFit> {
    let p2 = azimuthal_project(w, 2)?;
    let om = solver.reference_omega(2)?;
    let template: Vec<f64> = w.grid.radii.iter().map(|&r| om.1.at(r).unwrap_or(0.0)).collect();
    let rw = w.grid.radial_weights();
    let den: f64 = rw.iter().zip(&template).map(|(q, o)| q * o * o).sum();
    let proj = |v: &[f64]| rw.iter().zip(&template).zip(v).map(|((q, o), x)| q * o * x).sum::<f64>() / den;
    let ac = proj(&p2.c_profile.values);
    let as_ = proj(&p2.s_profile.values);
    let (amplitude_predicted, phase_predicted) = predicted_quadrupole(traj, i, t, nu)?;
    let amplitude_measured = ac.hypot(as_);
    let degenerate = !(amplitude_measured > 1e-9 * w.max_abs().max(f64::MIN_POSITIVE));
    Ok(QuadrupoleFit { amplitude_measured, amplitude_predicted, phase_measured: as_.atan2(ac), phase_predicted, degenerate })
}

/// Slope of log(metric) against log(ν).
pub fn convergence_fit(nus: &[f64], metrics: &[f64]) -> Result<LinearFit> {
    if nus.len() != metrics.len() || nus.len() < 3 {
        return Err(Error::Analysis("convergence fit needs at least three (ν, metric) pairs".into()));
    }
    if let Some(m) = metrics.iter().chain(nus).find(|m| !(**m > 0.0) || !m.is_finite()) {
        return Err(Error::Analysis(format!("non-positive value {m} in convergence series")));
    }
    let lo = nus.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = nus.iter().cloned().fold(0.0, f64::max);
    if hi < 4.0 * lo {
        return Err(Error::Analysis(format!("ν range {lo:e}..{hi:e} spans less than 4×")));
    }
    log_log_fit(nus, metrics).ok_or_else(|| Error::Analysis("degenerate convergence series".into()))
}
