//! Integrating-factor RK4 pseudospectral stepping of the vorticity equation.
//!
//! All fields (total first, then the components) are advected by the velocity of the
//! total field, so the components obey the linear convection-diffusion equation and
//! keep summing to the total.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft2::Fft2;
use crate::field::VorticityField;

/// Hard CFL limit enforced by [`Simulation::step`].
pub const CFL_LIMIT: f64 = 0.5;

pub struct Simulation {
    n: usize,
    l_box: f64,
    nu: f64,
    t: f64,
    alphas: Vec<f64>,
    fft: Fft2,
    /// signed wavenumber per axis index, Nyquist zeroed (for first derivatives)
    kd: Vec<f64>,
    /// k² per mode, Nyquist kept
    k2: Vec<f64>,
    /// 2/3-rule mask per axis index
    keep: Vec<bool>,
    hat: Vec<Vec<Complex64>>,
    buf: Vec<Complex64>,
    u: Vec<f64>,
    v: Vec<f64>,
    phys: Vec<Vec<f64>>,
    plane_correction: bool,
    coords: Vec<f64>,
}

type Fields = Vec<Vec<Complex64>>;

impl Simulation {
    pub fn from_field(field: &VorticityField) -> Result<Self> {
        let n = field.n;
        if !n.is_power_of_two() || field.total.len() != n * n || field.components.iter().any(|c| c.len() != n * n) {
            return Err(Error::Config("field arrays do not match the grid size".into()));
        }
        let k0 = 2.0 * PI / field.l_box;
        let signed = |j: usize| if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        let kd: Vec<f64> = (0..n).map(|j| if j == n / 2 { 0.0 } else { k0 * signed(j) }).collect();
        let kf: Vec<f64> = (0..n).map(|j| k0 * signed(j)).collect();
        let mut k2 = vec![0.0; n * n];
        for j2 in 0..n {
            for j1 in 0..n {
                k2[j2 * n + j1] = kf[j1] * kf[j1] + kf[j2] * kf[j2];
            }
        }
        let cut = n as f64 / 3.0;
        let keep = (0..n).map(|j| signed(j).abs() <= cut).collect();
        let mut fft = Fft2::new(n);
        let mut hat = Vec::new();
        for f in std::iter::once(&field.total).chain(&field.components) {
            let mut h: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            fft.forward(&mut h);
            hat.push(h);
        }
        let m = hat.len();
        Ok(Self {
            n,
            l_box: field.l_box,
            nu: field.nu,
            t: field.t,
            alphas: field.alphas.clone(),
            fft,
            kd,
            k2,
            keep,
            hat,
            buf: vec![Complex64::default(); n * n],
            u: vec![0.0; n * n],
            v: vec![0.0; n * n],
            phys: vec![vec![0.0; n * n]; m],
            plane_correction: false,
            coords: (0..n).map(|j| field.coord(j)).collect(),
        })
    }

    /// Adds back the solid-body flow `(1/2L²)(M x − ∫yω dy)^⊥` that the periodic inversion
    /// removes along with the mean vorticity (M = ∫ω). With it the velocity near compactly
    /// supported vorticity matches the planar Biot-Savart law up to O((d/L)⁴) lattice terms.
    /// The added flow is not periodic, so it is only meaningful while the vorticity stays
    /// away from the box boundary.
    pub fn with_plane_correction(mut self, on: bool) -> Self {
        self.plane_correction = on;
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dx(&self) -> f64 {
        self.l_box / self.n as f64
    }

    /// Physical-space snapshot of the current state.
    pub fn to_field(&mut self) -> VorticityField {
        let mut out = Vec::with_capacity(self.hat.len());
        for h in &self.hat {
            self.buf.copy_from_slice(h);
            self.fft.inverse(&mut self.buf);
            out.push(self.buf.iter().map(|c| c.re).collect::<Vec<f64>>());
        }
        let total = out.remove(0);
        VorticityField {
            n: self.n,
            l_box: self.l_box,
            t: self.t,
            nu: self.nu,
            alphas: self.alphas.clone(),
            total,
            components: out,
        }
    }

    /// ∫ω dx of field `f` (0 = total) read off the mean mode.
    pub fn mass(&self, f: usize) -> f64 {
        self.hat[f][0].re * self.dx() * self.dx()
    }

    /// ∫ω² dx of field `f` by Parseval.
    pub fn enstrophy(&self, f: usize) -> f64 {
        let s: f64 = self.hat[f].iter().map(|c| c.norm_sqr()).sum();
        s * self.dx() * self.dx() / (self.n * self.n) as f64
    }

    /// Fills `self.u`, `self.v` from the total vorticity `w` and returns max|u|.
    fn velocity(&mut self, w: &[Complex64], moments: (f64, f64, f64)) -> f64 {
        let n = self.n;
        let i = Complex64::i();
        for j2 in 0..n {
            for j1 in 0..n {
                let k = j2 * n + j1;
                let k2 = self.k2[k];
                self.buf[k] = if k2 == 0.0 {
                    Complex64::default()
                } else {
                    // û = i k₂ ω̂/k², v̂ = −i k₁ ω̂/k²; packed as û + i v̂
                    let uh = i * self.kd[j2] * w[k] / k2;
                    let vh = -i * self.kd[j1] * w[k] / k2;
                    uh + i * vh
                };
            }
        }
        let (mass, m1, m2) = moments;
        self.fft.inverse(&mut self.buf);
        let c = 0.5 / (self.l_box * self.l_box);
        let mut umax = 0.0f64;
        for j2 in 0..n {
            for j1 in 0..n {
                let k = j2 * n + j1;
                self.u[k] = self.buf[k].re;
                self.v[k] = self.buf[k].im;
                if self.plane_correction {
                    // (a, b)^⊥ = (−b, a) with (a, b) = M x − ∫yω
                    self.u[k] -= c * (mass * self.coords[j2] - m2);
                    self.v[k] += c * (mass * self.coords[j1] - m1);
                }
                umax = umax.max(self.u[k].hypot(self.v[k]));
            }
        }
        umax
    }

    /// (∫ω, ∫y₁ω, ∫y₂ω) with box coordinates in [−L/2, L/2); zeros without the correction.
    fn moments(&self, w: &[f64]) -> (f64, f64, f64) {
        if !self.plane_correction {
            return (0.0, 0.0, 0.0);
        }
        let n = self.n;
        let (mut m, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for j2 in 0..n {
            for j1 in 0..n {
                let v = w[j2 * n + j1];
                m += v;
                m1 += v * self.coords[j1];
                m2 += v * self.coords[j2];
            }
        }
        let a = self.dx() * self.dx();
        (m * a, m1 * a, m2 * a)
    }

    pub fn max_velocity(&mut self) -> f64 {
        let w = std::mem::take(&mut self.hat[0]);
        let mut phys: Vec<Complex64> = w.clone();
        self.fft.inverse(&mut phys);
        let re: Vec<f64> = phys.iter().map(|c| c.re).collect();
        let mo = self.moments(&re);
        let m = self.velocity(&w, mo);
        self.hat[0] = w;
        m
    }

    /// −∇·(u ω_f) for every field, dealiased; u from field 0. Returns max|u|.
    fn nonlinear(&mut self, q: &Fields, out: &mut Fields) -> f64 {
        let n = self.n;
        let nn = n * n;
        let m = q.len();
        let mut f = 0;
        while f < m {
            if f + 1 < m {
                for k in 0..nn {
                    self.buf[k] = q[f][k] + Complex64::i() * q[f + 1][k];
                }
                self.fft.inverse(&mut self.buf);
                for k in 0..nn {
                    self.phys[f][k] = self.buf[k].re;
                    self.phys[f + 1][k] = self.buf[k].im;
                }
                f += 2;
            } else {
                self.buf.copy_from_slice(&q[f]);
                self.fft.inverse(&mut self.buf);
                for k in 0..nn {
                    self.phys[f][k] = self.buf[k].re;
                }
                f += 1;
            }
        }
        let mo = self.moments(&self.phys[0]);
        let umax = self.velocity(&q[0], mo);
        for f in 0..m {
            for k in 0..nn {
                let w = self.phys[f][k];
                self.buf[k] = Complex64::new(self.u[k] * w, self.v[k] * w);
            }
            self.fft.forward(&mut self.buf);
            let o = &mut out[f];
            for j2 in 0..n {
                let m2 = (n - j2) % n;
                for j1 in 0..n {
                    let k = j2 * n + j1;
                    if !(self.keep[j1] && self.keep[j2]) {
                        o[k] = Complex64::default();
                        continue;
                    }
                    let z = self.buf[k];
                    let zc = self.buf[m2 * n + (n - j1) % n].conj();
                    let p = 0.5 * (z + zc);
                    let qh = Complex64::new(0.0, -0.5) * (z - zc);
                    o[k] = -Complex64::i() * (self.kd[j1] * p + self.kd[j2] * qh);
                }
            }
        }
        umax
    }

    /// One IF-RK4 step. Rejected (state untouched) if |dt| exceeds 0.5·Δx/max|u|.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let m = self.hat.len();
        let nn = self.n * self.n;
        let zero = || vec![vec![Complex64::default(); nn]; m];
        let q = std::mem::take(&mut self.hat);
        let mut a = zero();
        let umax = self.nonlinear(&q, &mut a);
        let limit = CFL_LIMIT * self.dx() / umax.max(f64::MIN_POSITIVE);
        if dt.abs() > limit {
            self.hat = q;
            return Err(Error::Cfl { dt: dt.abs(), limit });
        }
        let e: Vec<f64> = self.k2.iter().map(|k2| (-self.nu * k2 * dt * 0.5).exp()).collect();
        let h = 0.5 * dt;

        let mut s = zero();
        for f in 0..m {
            for k in 0..nn {
                s[f][k] = e[k] * (q[f][k] + h * a[f][k]);
            }
        }
        let mut b = zero();
        self.nonlinear(&s, &mut b);
        for f in 0..m {
            for k in 0..nn {
                s[f][k] = e[k] * q[f][k] + h * b[f][k];
            }
        }
        let mut c = zero();
        self.nonlinear(&s, &mut c);
        for f in 0..m {
            for k in 0..nn {
                s[f][k] = e[k] * (e[k] * q[f][k] + dt * c[f][k]);
            }
        }
        let mut d = zero();
        self.nonlinear(&s, &mut d);
        let mut next = q;
        for f in 0..m {
            for k in 0..nn {
                let e2 = e[k] * e[k];
                next[f][k] = e2 * next[f][k] + dt / 6.0 * (e2 * a[f][k] + 2.0 * e[k] * (b[f][k] + c[f][k]) + d[f][k]);
            }
        }
        self.hat = next;
        self.t += dt;
        Ok(())
    }

    /// Advances to `t_target` with a fixed step chosen from the CFL number at the start of
    /// the interval; re-plans the remainder if a step is rejected. Returns the step count.
    pub fn advance_to(&mut self, t_target: f64, cfl: f64) -> Result<usize> {
        if !(cfl > 0.0 && cfl <= CFL_LIMIT) {
            return Err(Error::Config(format!("CFL number {cfl} must lie in (0, {CFL_LIMIT}]")));
        }
        let mut steps = 0;
        let tol = 1e-12 * t_target.abs().max(1.0);
        'outer: while t_target - self.t > tol {
            let umax = self.max_velocity().max(f64::MIN_POSITIVE);
            let span = t_target - self.t;
            let count = (span / (cfl * self.dx() / umax)).ceil().max(1.0) as usize;
            let dt = span / count as f64;
            for _ in 0..count {
                match self.step(dt) {
                    Ok(()) => steps += 1,
                    Err(Error::Cfl { .. }) => continue 'outer,
                    Err(e) => return Err(e),
                }
            }
            self.t = t_target;
        }
        Ok(steps)
    }
}

/// Single-step convenience wrapper around [`Simulation`].
pub fn step(field: &VorticityField, dt: f64) -> Result<VorticityField> {
    let mut sim = Simulation::from_field(field)?;
    sim.step(dt)?;
    Ok(sim.to_field())
}
