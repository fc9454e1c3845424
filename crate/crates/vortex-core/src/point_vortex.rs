//! Point-vortex dynamics and its viscous regularization.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::kernels::{golden_max, oseen_velocity, Vec2};
use crate::ode::{dopri5, DenseSegment, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    /// Inviscid Helmholtz-Kirchhoff system.
    Pw,
    /// Regularization with Oseen velocities at scale √(νt).
    Pw2,
}

impl System {
    pub fn tag(self) -> &'static str {
        match self {
            System::Pw => "pw",
            System::Pw2 => "pw2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct VortexConfiguration {
    pub positions: Vec<Vec2>,
    pub alphas: Vec<f64>,
    pub nu: f64,
    pub t_end: f64,
}

impl VortexConfiguration {
    pub fn new(positions: Vec<Vec2>, alphas: Vec<f64>, nu: f64, t_end: f64) -> Result<Self> {
        let c = Self { positions, alphas, nu, t_end };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() || self.positions.len() != self.alphas.len() {
            return Err(Error::InvalidInput("need one circulation per vortex".into()));
        }
        if let Some(i) = self.alphas.iter().position(|&a| a == 0.0 || !a.is_finite()) {
            return Err(Error::InvalidInput(format!("circulation of vortex {i} must be nonzero")));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::InvalidInput("viscosity must be non-negative".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidInput("horizon T must be positive".into()));
        }
        if self.positions.len() > 1 && self.min_separation() == 0.0 {
            return Err(Error::InvalidInput("vortex positions must be pairwise distinct".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// |α| = Σ|α_i|
    pub fn total_abs_circulation(&self) -> f64 {
        self.alphas.iter().map(|a| a.abs()).sum()
    }

    pub fn min_separation(&self) -> f64 {
        min_separation(&self.positions)
    }

    /// Rigid rotation of all positions about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let mut c = self.clone();
        c.positions.iter_mut().for_each(|p| *p = p.rotate(angle));
        c
    }
}

pub fn min_separation(z: &[Vec2]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            d = d.min((z[i] - z[j]).norm());
        }
    }
    d
}

/// z_i' = (1/2π) Σ_{j≠i} α_j (z_i − z_j)^⊥/|z_i − z_j|²
pub fn rhs_pw(z: &[Vec2], alpha: &[f64]) -> Result<Vec<Vec2>> {
    let n = z.len();
    let mut out = vec![Vec2::ZERO; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = z[i] - z[j];
            let r2 = d.norm_sq();
            if r2 == 0.0 {
                return Err(Error::Singular(format!("vortices {i} and {j} coincide")));
            }
            out[i] += d.perp() * (alpha[j] / (2.0 * PI * r2));
        }
    }
    Ok(out)
}

/// z_i' = Σ_j (α_j/√η) v^G((z_i − z_j)/√η); reduces to [`rhs_pw`] at η = 0.
pub fn rhs_pw2(z: &[Vec2], alpha: &[f64], eta: f64) -> Result<Vec<Vec2>> {
    if eta < 0.0 {
        return Err(Error::InvalidInput("η must be non-negative".into()));
    }
    if eta == 0.0 {
        return rhs_pw(z, alpha);
    }
    let n = z.len();
    let s = eta.sqrt();
    let mut out = vec![Vec2::ZERO; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = z[i] - z[j];
            if d.norm_sq() == 0.0 {
                return Err(Error::Singular(format!("vortices {i} and {j} coincide")));
            }
            out[i] += oseen_velocity(d / s) * (alpha[j] / s);
        }
    }
    Ok(out)
}

/// Σ α_i z_i
pub fn centroid(z: &[Vec2], alpha: &[f64]) -> Vec2 {
    z.iter().zip(alpha).fold(Vec2::ZERO, |acc, (p, a)| acc + *p * *a)
}

/// Σ_{i<j} α_i α_j log|z_i − z_j|
pub fn hamiltonian(z: &[Vec2], alpha: &[f64]) -> f64 {
    let mut h = 0.0;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            h += alpha[i] * alpha[j] * (z[i] - z[j]).norm().ln();
        }
    }
    h
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub tol: Tolerances,
    /// Guard radius as a fraction of the initial minimum separation.
    pub guard_factor: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { tol: Tolerances::default(), guard_factor: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub system: System,
    pub alphas: Vec<f64>,
    pub nu: f64,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<Vec2>>,
    /// Minimal pairwise distance over the whole run.
    pub d: f64,
    /// Turnover time d²/|α|.
    pub t0: f64,
    pub collision: bool,
    segments: Vec<DenseSegment>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Positions at any t in the integrated span (dense output).
    pub fn positions_at(&self, t: f64) -> Result<Vec<Vec2>> {
        let t_end = self.t_final();
        if t < self.t_start() - 1e-12 || t > t_end * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Domain(format!("t = {t} outside [0, {t_end}]")));
        }
        if self.segments.is_empty() {
            return Ok(self.positions[0].clone());
        }
        let idx = self.segments.partition_point(|s| s.t1() < t).min(self.segments.len() - 1);
        let y = self.segments[idx].eval_vec(t);
        Ok(unpack(&y))
    }

    pub fn z_ij(&self, i: usize, j: usize, t: f64) -> Result<Vec2> {
        let z = self.positions_at(t)?;
        Ok(z[i] - z[j])
    }

    /// Writes `t,vortex_index,z1,z2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,vortex_index,z1,z2")?;
        for (t, z) in self.times.iter().zip(&self.positions) {
            for (i, p) in z.iter().enumerate() {
                writeln!(w, "{t:.17e},{i},{:.17e},{:.17e}", p.x1, p.x2)?;
            }
        }
        Ok(())
    }

    pub fn segments(&self) -> &[DenseSegment] {
        &self.segments
    }
}

fn pack(z: &[Vec2]) -> Vec<f64> {
    z.iter().flat_map(|p| [p.x1, p.x2]).collect()
}

fn unpack(y: &[f64]) -> Vec<Vec2> {
    y.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

pub fn integrate(config: &VortexConfiguration, system: System, samples: usize) -> Result<Trajectory> {
    integrate_with(config, system, samples, IntegrateOptions::default())
}

/// Adaptive Dormand-Prince integration over [0, T], sampled at `samples` equally spaced times.
pub fn integrate_with(
    config: &VortexConfiguration,
    system: System,
    samples: usize,
    opts: IntegrateOptions,
) -> Result<Trajectory> {
    config.validate()?;
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let alpha = config.alphas.clone();
    let nu = match system {
        System::Pw => 0.0,
        System::Pw2 => config.nu,
    };
    let y0 = pack(&config.positions);
    let d_init = if config.n() > 1 { config.min_separation() } else { f64::INFINITY };
    let guard = opts.guard_factor * d_init;

    let mut segments: Vec<DenseSegment> = Vec::new();
    let mut collision = false;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let z = unpack(y);
        let v = if nu == 0.0 { rhs_pw(&z, &alpha)? } else { rhs_pw2(&z, &alpha, nu * t)? };
        for (k, p) in v.iter().enumerate() {
            dy[2 * k] = p.x1;
            dy[2 * k + 1] = p.x2;
        }
        Ok(())
    };
    let (t_reached, _) = dopri5(rhs, 0.0, &y0, config.t_end, opts.tol, |seg, y| {
        segments.push(seg.clone());
        if config.n() > 1 && min_separation(&unpack(y)) < guard {
            collision = true;
            return false;
        }
        true
    })?;

    let t_stop = if collision { t_reached } else { config.t_end };
    let mut times = Vec::with_capacity(samples);
    let mut positions = Vec::with_capacity(samples);
    let mut traj = Trajectory {
        system,
        alphas: config.alphas.clone(),
        nu: config.nu,
        times: vec![0.0, t_stop],
        positions: vec![config.positions.clone()],
        d: 0.0,
        t0: 0.0,
        collision,
        segments,
    };
    for k in 0..samples {
        let t = config.t_end * k as f64 / (samples - 1) as f64;
        if t > t_stop {
            break;
        }
        times.push(t);
        positions.push(if k == 0 { config.positions.clone() } else { traj.positions_at(t)? });
    }
    traj.times = times;
    traj.positions = positions;
    traj.d = refined_min_separation(&traj);
    traj.t0 = traj.d * traj.d / config.total_abs_circulation();
    Ok(traj)
}

/// Minimum pairwise distance over every accepted step, refined by golden-section search.
fn refined_min_separation(traj: &Trajectory) -> f64 {
    if traj.n() < 2 {
        return f64::INFINITY;
    }
    let sep = |seg: &DenseSegment, t: f64| min_separation(&unpack(&seg.eval_vec(t)));
    let mut d = min_separation(&traj.positions[0]);
    for seg in &traj.segments {
        let (a, b) = if seg.h > 0.0 { (seg.t0, seg.t1()) } else { (seg.t1(), seg.t0) };
        d = d.min(sep(seg, b));
        let (_, neg) = golden_max(|t| -sep(seg, t), a, b, 1e-9 * (b - a).abs().max(1e-300));
        d = d.min(-neg);
    }
    d
}

#[derive(Debug, Clone)]
pub struct DeviationCurve {
    pub times: Vec<f64>,
    /// max_i |z_i^ν − z_i| / d at each sample.
    pub deviation: Vec<f64>,
    /// K₁ exp(−d²/(5νt)), with K₁ fitted at the final time.
    pub envelope: Vec<f64>,
    pub k1: f64,
}

impl DeviationCurve {
    pub fn final_deviation(&self) -> f64 {
        *self.deviation.last().unwrap()
    }
}

pub fn compare_trajectories(traj_pw: &Trajectory, traj_pw2: &Trajectory) -> Result<DeviationCurve> {
    if traj_pw.times.len() != traj_pw2.times.len()
        || traj_pw.times.iter().zip(&traj_pw2.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::InvalidInput("trajectories are sampled at different times".into()));
    }
    if traj_pw.n() != traj_pw2.n() {
        return Err(Error::InvalidInput("trajectories have different vortex counts".into()));
    }
    let d = traj_pw.d;
    let nu = traj_pw2.nu;
    let deviation: Vec<f64> = traj_pw
        .positions
        .iter()
        .zip(&traj_pw2.positions)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (*p - *q).norm()).fold(0.0, f64::max) / d)
        .collect();
    let shape = |t: f64| if nu > 0.0 && t > 0.0 { (-d * d / (5.0 * nu * t)).exp() } else { 0.0 };
    let t_fin = *traj_pw.times.last().unwrap();
    let k1 = if shape(t_fin) > 0.0 { deviation.last().unwrap() / shape(t_fin) } else { 0.0 };
    let envelope = traj_pw.times.iter().map(|&t| k1 * shape(t)).collect();
    Ok(DeviationCurve { times: traj_pw.times.clone(), deviation, envelope, k1 })
}

/// First time the (unwrapped) angle of z_0 − z_1 has advanced by 2π, by bisection on dense output.
pub fn pair_period(traj: &Trajectory) -> Result<f64> {
    if traj.n() != 2 {
        return Err(Error::InvalidInput("period is defined for a pair".into()));
    }
    let angle = |z: &[f64]| (z[1] - z[3]).atan2(z[0] - z[2]);
    let theta0 = angle(&pack(&traj.positions[0]));
    let mut unwrapped = 0.0;
    let mut prev = theta0;
    for seg in &traj.segments {
        let end = angle(&seg.eval_vec(seg.t1()));
        let mut delta = end - prev;
        while delta > PI {
            delta -= 2.0 * PI;
        }
        while delta < -PI {
            delta += 2.0 * PI;
        }
        if (unwrapped + delta).abs() >= 2.0 * PI {
            let target = 2.0 * PI * (unwrapped + delta).signum();
            let (mut a, mut b) = (seg.t0, seg.t1());
            let base = unwrapped;
            let progress = |t: f64| {
                let mut dd = angle(&seg.eval_vec(t)) - prev;
                while dd > PI {
                    dd -= 2.0 * PI;
                }
                while dd < -PI {
                    dd += 2.0 * PI;
                }
                base + dd - target
            };
            let fa = progress(a);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if (progress(m) > 0.0) == (fa > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
                if (b - a).abs() < 1e-15 * b.abs() {
                    break;
                }
            }
            return Ok(0.5 * (a + b));
        }
        unwrapped += delta;
        prev = end;
    }
    Err(Error::Domain("pair did not complete a revolution".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vortex_is_static() {
        let v = rhs_pw(&[Vec2::new(1.0, 2.0)], &[3.0]).unwrap();
        assert_eq!(v[0], Vec2::ZERO);
    }

    #[test]
    fn pw2_at_zero_eta_is_pw() {
        let z = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.3), Vec2::new(-0.2, 0.8)];
        let a = [1.0, -0.5, 2.0];
        let p = rhs_pw(&z, &a).unwrap();
        let q = rhs_pw2(&z, &a, 0.0).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn invalid_configuration() {
        assert!(VortexConfiguration::new(vec![Vec2::ZERO], vec![0.0], 0.0, 1.0).is_err());
        assert!(VortexConfiguration::new(vec![Vec2::ZERO, Vec2::ZERO], vec![1.0, 1.0], 0.0, 1.0).is_err());
    }
}
