//! Deformation profiles of one vortex and the approximate solution built from them.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use super::{solve_symmetric_tridiagonal, ProfileSolver};
use crate::error::{Error, Result};
use crate::expansion::{residuum_terms, strain_field, Term};
use crate::grid::{AzimuthalMode, RadialProfile};
use crate::kernels::{gauss, gauss_profile, Vec2};
use crate::point_vortex::Trajectory;

const ANGLES: usize = 64;
const DTAU: f64 = 1e-2;
const START_FRACTION: f64 = 1e-3;

/// F^ν for unit d and unit angular sums: F^ν = d²(s_c U + s_s V), with the
/// matching stream-function images K U, K V.
#[derive(Debug, Clone)]
pub(crate) struct FnuBase {
    u: AzimuthalMode,
    v: AzimuthalMode,
    ku: [Vec<f64>; 2],
    kv: [Vec<f64>; 2],
}

#[derive(Debug, Clone)]
pub struct DeformationProfiles {
    pub i: usize,
    pub t: f64,
    pub nu: f64,
    pub alpha_i: f64,
    pub d: f64,
    /// (j, z_ij, θ_ij)
    pub pairs: Vec<(usize, Vec2, f64)>,
    pub f0: AzimuthalMode,
    pub fnu: AzimuthalMode,
    pub fbar: AzimuthalMode,
    pub h: Vec<AzimuthalMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WappOrder {
    First,
    ThreeHalves,
}

impl ProfileSolver {
    fn fnu_base(&self, eps: f64) -> Result<Arc<FnuBase>> {
        let key = eps.to_bits();
        if let Some(b) = self.fnu_base.lock().unwrap().get(&key) {
            return Ok(b.clone());
        }
        let grid = self.grid.clone();
        let r0 = RadialProfile::from_fn(grid.clone(), |r| r * r * gauss_profile(r) / (4.0 * PI));
        let neg_r0 = r0.values.iter().map(|v| -v).collect();
        let zu = AzimuthalMode {
            n: 2,
            c_profile: RadialProfile::zeros(grid.clone()),
            s_profile: RadialProfile { grid: grid.clone(), values: neg_r0 },
        };
        let zv = AzimuthalMode { n: 2, c_profile: r0, s_profile: RadialProfile::zeros(grid) };
        let u = self.solve_regularized(eps, &zu)?;
        let v = self.solve_regularized(eps, &zv)?;
        let k = |m: &AzimuthalMode| [self.biot_savart_mode(2, &m.c_profile.values), self.biot_savart_mode(2, &m.s_profile.values)];
        let base = Arc::new(FnuBase { ku: k(&u), kv: k(&v), u, v });
        self.fnu_base.lock().unwrap().insert(key, base.clone());
        Ok(base)
    }

    /// F⁰, F^ν, F̄ and H for vortex `i` at time `t`.
    pub fn build_deformation(&self, traj: &Trajectory, i: usize, t: f64, nu: f64) -> Result<DeformationProfiles> {
        let terms = residuum_terms(traj, i, t, nu * t)?;
        let grid = self.grid.clone();
        let alpha_i = traj.alphas[i];
        let pairs = terms.pairs.iter().map(|p| (p.j, p.z, p.z.angle())).collect();
        if terms.pairs.is_empty() {
            return Ok(DeformationProfiles {
                i,
                t,
                nu,
                alpha_i,
                d: traj.d,
                pairs,
                f0: AzimuthalMode::zeros(2, grid.clone()),
                fnu: AzimuthalMode::zeros(2, grid.clone()),
                fbar: AzimuthalMode::zeros(0, grid.clone()),
                h: vec![AzimuthalMode::zeros(3, grid)],
            });
        }
        let f0 = self.solve_lambda(&terms.mode(Term::A, grid.clone()).scaled(-1.0))?;
        let fnu = self.fnu_at(traj, i, t, nu)?.0;
        let fbar = self.evolve_fbar(traj, i, nu, &[t])?.pop().expect("one time requested");
        // B_i is a pure mode-3 field, so no n = 1 part needs the regularized solve
        let h = vec![self.solve_lambda(&terms.mode(Term::B, grid.clone()).scaled(-1.0))?];
        Ok(DeformationProfiles {
            i,
            t,
            nu,
            alpha_i,
            d: traj.d,
            pairs,
            f0,
            fnu,
            fbar: AzimuthalMode { n: 0, c_profile: fbar, s_profile: RadialProfile::zeros(grid) },
            h,
        })
    }

    /// F^ν at time t together with the stream-function images (K f_c, K f_s).
    fn fnu_at(&self, traj: &Trajectory, i: usize, t: f64, nu: f64) -> Result<(AzimuthalMode, [Vec<f64>; 2])> {
        let alpha_i = traj.alphas[i];
        let base = self.fnu_base(nu / alpha_i)?;
        let terms = residuum_terms(traj, i, t, nu * t)?;
        let (sc, ss) = terms.angular_sums(2);
        let d2 = traj.d * traj.d;
        let mut f = base.u.scaled(d2 * sc);
        f.add_scaled(&base.v, d2 * ss);
        let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| d2 * (sc * x + ss * y)).collect::<Vec<_>>();
        let k = [comb(&base.ku[0], &base.kv[0]), comb(&base.ku[1], &base.kv[1])];
        Ok((f, k))
    }

    /// P₀Q_i at time t, Q_i = V^{F^ν}·∇F^ν + D_i·∇F^ν, by a 64-angle trapezoid rule.
    pub fn fbar_source(&self, traj: &Trajectory, i: usize, t: f64, nu: f64) -> Result<Vec<f64>> {
        let (f, k) = self.fnu_at(traj, i, t, nu)?;
        let strain = strain_field(traj, i, t)?;
        let grid = &self.grid;
        let r = grid.nodes();
        let fc = &f.c_profile.values;
        let fs = &f.s_profile.values;
        let dfc = grid.derivative(fc);
        let dfs = grid.derivative(fs);
        // stream function ψ = −K F
        let pc: Vec<f64> = k[0].iter().map(|v| -v).collect();
        let ps: Vec<f64> = k[1].iter().map(|v| -v).collect();
        let dpc = grid.derivative(&pc);
        let dps = grid.derivative(&ps);
        let trig: Vec<(f64, f64, f64, f64)> = (0..ANGLES)
            .map(|a| {
                let th = 2.0 * PI * a as f64 / ANGLES as f64;
                (th.cos(), th.sin(), (2.0 * th).cos(), (2.0 * th).sin())
            })
            .collect();
        let mut out = vec![0.0; r.len()];
        for kk in 1..r.len() {
            let rk = r[kk];
            let mut acc = 0.0;
            for &(c1, s1, c2, s2) in &trig {
                let f_r = dfc[kk] * c2 + dfs[kk] * s2;
                let f_th = 2.0 / rk * (-fc[kk] * s2 + fs[kk] * c2);
                let v_r = -2.0 / rk * (-pc[kk] * s2 + ps[kk] * c2);
                let v_th = dpc[kk] * c2 + dps[kk] * s2;
                let dv = strain.eval(Vec2::new(rk * c1, rk * s1));
                let d_r = dv.x1 * c1 + dv.x2 * s1;
                let d_th = -dv.x1 * s1 + dv.x2 * c1;
                acc += (v_r + d_r) * f_r + (v_th + d_th) * f_th;
            }
            out[kk] = acc / ANGLES as f64;
        }
        Ok(out)
    }

    /// F̄_i at each time of `t_grid` (sorted, positive).
    pub fn evolve_fbar(&self, traj: &Trajectory, i: usize, nu: f64, t_grid: &[f64]) -> Result<Vec<RadialProfile>> {
        if i >= traj.n() {
            return Err(Error::InvalidInput(format!("vortex index {i} out of range")));
        }
        let coeff = traj.alphas[i] / (traj.d * traj.d);
        if traj.n() == 1 {
            return Ok(t_grid.iter().map(|_| RadialProfile::zeros(self.grid.clone())).collect());
        }
        let t0 = START_FRACTION * t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
        self.evolve_radial(|t| self.fbar_source(traj, i, t, nu), coeff, t0, t_grid, true)
    }

    /// Integrates `t∂_t F + F − L F = −coeff·t·S(t)` on radial profiles from F(t_start) = 0,
    /// in τ = log t with implicit Euler and one Richardson extrapolation per step.
    /// With `zero_mass` the mass is projected out along G after every step.
    pub fn evolve_radial<S>(&self, mut source: S, coeff: f64, t_start: f64, t_grid: &[f64], zero_mass: bool) -> Result<Vec<RadialProfile>>
    where
        S: FnMut(f64) -> Result<Vec<f64>>,
    {
        if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.iter().any(|&t| t <= t_start) {
            return Err(Error::InvalidInput("t_grid must be sorted and later than the start time".into()));
        }
        let stepper = RadialStepper::new(self, 1.0);
        let g = RadialProfile::from_fn(self.grid.clone(), gauss_profile);
        let g_mass = g.mass();
        let mut u = vec![0.0; stepper.size()];
        let mut tau = t_start.ln();
        let mut out = Vec::with_capacity(t_grid.len());
        let mut rhs = |tau: f64| -> Result<Vec<f64>> {
            let t = tau.exp();
            let s = source(t)?;
            Ok(self.to_tilde(0, &s).into_iter().map(|v| -coeff * t * v).collect())
        };
        for &target in t_grid {
            let span = target.ln() - tau;
            let steps = (span / DTAU).ceil().max(if span > 0.0 { 1.0 } else { 0.0 }) as usize;
            for _ in 0..steps {
                let dt = span / steps as f64;
                let s_mid = rhs(tau + 0.5 * dt)?;
                let s_end = rhs(tau + dt)?;
                stepper.step_richardson(&mut u, dt, &s_mid, &s_end);
                tau += dt;
                if zero_mass {
                    let mut f = RadialProfile { grid: self.grid.clone(), values: self.from_tilde(0, &u) };
                    let c = f.mass() / g_mass;
                    for (v, gv) in f.values.iter_mut().zip(&g.values) {
                        *v -= c * gv;
                    }
                    f.values[self.len() - 1] = 0.0;
                    u = self.to_tilde(0, &f.values);
                }
            }
            tau = target.ln();
            out.push(RadialProfile { grid: self.grid.clone(), values: self.from_tilde(0, &u) });
        }
        Ok(out)
    }

    /// S(τ)u = e^{τL}u on radial profiles, by the same stepper.
    pub fn semigroup_action(&self, u0: &[f64], tau: f64) -> Vec<f64> {
        let stepper = RadialStepper::new(self, 0.0);
        let mut u = self.to_tilde(0, u0);
        let steps = (tau / DTAU).ceil() as usize;
        if steps > 0 {
            let zero = vec![0.0; u.len()];
            let dt = tau / steps as f64;
            for _ in 0..steps {
                stepper.step_richardson(&mut u, dt, &zero, &zero);
            }
        }
        self.from_tilde(0, &u)
    }
}

/// Implicit Euler for u' = (L̃₀ − shift)u + s on the mode-0 nodes.
struct RadialStepper {
    diag: Vec<f64>,
    off: Vec<f64>,
    shift: f64,
}

impl RadialStepper {
    fn new(solver: &ProfileSolver, shift: f64) -> Self {
        let (diag, off) = solver.l_tridiagonal(0);
        Self { diag, off, shift }
    }

    fn size(&self) -> usize {
        self.diag.len()
    }

    fn euler(&self, u: &mut [f64], dt: f64, s: &[f64]) {
        let d: Vec<f64> = self.diag.iter().map(|v| 1.0 - dt * (v - self.shift)).collect();
        let o: Vec<f64> = self.off.iter().map(|v| -dt * v).collect();
        for (x, y) in u.iter_mut().zip(s) {
            *x += dt * y;
        }
        solve_symmetric_tridiagonal(&d, &o, u);
    }

    fn step_richardson(&self, u: &mut Vec<f64>, dt: f64, s_mid: &[f64], s_end: &[f64]) {
        let mut full = u.clone();
        self.euler(&mut full, dt, s_end);
        self.euler(u, 0.5 * dt, s_mid);
        self.euler(u, 0.5 * dt, s_end);
        for (x, f) in u.iter_mut().zip(&full) {
            *x = 2.0 * *x - f;
        }
    }
}

/// w_app = G + ε(F̄ + F^ν) [+ ε^{3/2} H], ε = νt/d².
#[derive(Debug, Clone)]
pub struct WappField {
    pub eps: f64,
    pub order: WappOrder,
    pub modes: Vec<(f64, AzimuthalMode)>,
}

impl ProfileSolver {
    pub fn assemble_wapp(&self, profiles: &DeformationProfiles, nu_t_over_d2: f64, order: WappOrder) -> WappField {
        let e = nu_t_over_d2;
        let mut modes = vec![(e, profiles.fbar.clone()), (e, profiles.fnu.clone())];
        if order == WappOrder::ThreeHalves {
            for h in &profiles.h {
                modes.push((e.powf(1.5), h.clone()));
            }
        }
        WappField { eps: e, order, modes }
    }
}

impl WappField {
    /// Value and whether the point lay beyond the profile grid (corrections clamped to 0 there).
    pub fn eval_checked(&self, xi: Vec2) -> (f64, bool) {
        let base = gauss(xi);
        if self.eps == 0.0 {
            return (base, false);
        }
        let r = xi.norm();
        let th = xi.angle();
        let mut v = base;
        for (k, m) in &self.modes {
            let grid = m.grid();
            let Some(c) = grid.interpolate(&m.c_profile.values, r) else {
                return (base, true);
            };
            let s = if m.n == 0 { 0.0 } else { grid.interpolate(&m.s_profile.values, r).unwrap_or(0.0) };
            let nt = m.n as f64 * th;
            v += k * (c * nt.cos() + s * nt.sin());
        }
        (v, false)
    }

    pub fn eval(&self, xi: Vec2) -> f64 {
        self.eval_checked(xi).0
    }
}

/// One profile as CSV: `r,mode_n,cos_coeff,sin_coeff`.
pub fn write_profile_csv<W: Write>(mut w: W, mode: &AzimuthalMode) -> std::io::Result<()> {
    writeln!(w, "r,mode_n,cos_coeff,sin_coeff")?;
    for (k, r) in mode.grid().nodes().iter().enumerate() {
        writeln!(w, "{r:.17e},{},{:.17e},{:.17e}", mode.n, mode.c_profile.values[k], mode.s_profile.values[k])?;
    }
    Ok(())
}

impl DeformationProfiles {
    /// Writes `<prefix>_{F0,Fnu,Fbar,H3}.csv` into `dir`.
    pub fn dump(&self, dir: &Path, prefix: &str) -> std::io::Result<()> {
        let mut all = vec![("F0", &self.f0), ("Fnu", &self.fnu), ("Fbar", &self.fbar)];
        for h in &self.h {
            all.push((if h.n == 3 { "H3" } else { "H1" }, h));
        }
        for (name, m) in all {
            let f = std::fs::File::create(dir.join(format!("{prefix}_{name}.csv")))?;
            write_profile_csv(std::io::BufWriter::new(f), m)?;
        }
        Ok(())
    }
}
