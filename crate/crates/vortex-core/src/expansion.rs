//! Multipole expansion of the interaction velocity between vortices and the
//! resulting residuum terms A_i, B_i, C_i.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{AzimuthalMode, PolarGrid, RadialGrid, RadialProfile};
use crate::kernels::{gauss, gauss_gradient, gauss_profile, oseen_velocity, Vec2};
use crate::point_vortex::Trajectory;

/// Partial sum Σ_{n=2}^{terms+1} (−1)^{n−1}(|ξ|/|η|)^n sin(n(θ−φ)) of ξ·V₁(ξ, η).
pub fn velocity_difference_series(xi: Vec2, eta: Vec2, terms: usize) -> Result<f64> {
    let rho = xi.norm() / eta.norm();
    if !(rho < 1.0) {
        return Err(Error::Domain(format!("|ξ|/|η| = {rho} ≥ 1, series diverges")));
    }
    if xi.norm_sq() == 0.0 {
        return Ok(0.0);
    }
    let psi = xi.angle() - eta.angle();
    let mut acc = 0.0;
    let mut p = rho;
    for n in 2..terms + 2 {
        p *= rho;
        let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
        acc += sign * p * (n as f64 * psi).sin();
    }
    Ok(acc)
}

/// ξ·V₁(ξ, η) evaluated from the closed form.
pub fn velocity_difference_exact(xi: Vec2, eta: Vec2) -> Result<f64> {
    let (v1, _) = v1_v2_split(xi, eta)?;
    Ok(xi.dot(v1))
}

/// V₁ = (ξ+η)^⊥/|ξ+η|² − η^⊥/|η|², V₂ = η^⊥e^{−|η|²/4}/|η|² − (ξ+η)^⊥e^{−|ξ+η|²/4}/|ξ+η|².
pub fn v1_v2_split(xi: Vec2, eta: Vec2) -> Result<(Vec2, Vec2)> {
    let s = xi + eta;
    let (s2, e2) = (s.norm_sq(), eta.norm_sq());
    if s2 == 0.0 || e2 == 0.0 {
        return Err(Error::Singular("ξ + η = 0 or η = 0".into()));
    }
    let v1 = s.perp() / s2 - eta.perp() / e2;
    let v2 = eta.perp() * ((-0.25 * e2).exp() / e2) - s.perp() * ((-0.25 * s2).exp() / s2);
    Ok((v1, v2))
}

/// W = (ξ+η)^⊥/|ξ+η|² − (ξ+η)^⊥/|η|² + 2(ξ·η)η^⊥/|η|⁴, which is O(|ξ|²/|η|³).
pub fn w_field(xi: Vec2, eta: Vec2) -> Result<Vec2> {
    let s = xi + eta;
    let (s2, e2) = (s.norm_sq(), eta.norm_sq());
    if s2 == 0.0 || e2 == 0.0 {
        return Err(Error::Singular("ξ + η = 0 or η = 0".into()));
    }
    Ok(s.perp() / s2 - s.perp() / e2 + eta.perp() * (2.0 * xi.dot(eta) / (e2 * e2)))
}

/// Linear part separating V₁ from W: V₁ − W = ξ^⊥/|η|² − 2(ξ·η)η^⊥/|η|⁴.
pub fn linear_strain_term(xi: Vec2, eta: Vec2) -> Vec2 {
    let e2 = eta.norm_sq();
    xi.perp() / e2 - eta.perp() * (2.0 * xi.dot(eta) / (e2 * e2))
}

/// Geometry of vortex j as seen from vortex i.
#[derive(Debug, Clone, Copy)]
pub struct PairTerm {
    pub j: usize,
    /// α_j/α_i
    pub ratio: f64,
    /// z_ij = z_i − z_j
    pub z: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    A,
    B,
    C,
}

impl Term {
    pub fn mode(self) -> usize {
        match self {
            Term::A => 2,
            Term::B => 3,
            Term::C => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpansionTerms {
    pub i: usize,
    pub t: f64,
    pub nu_t: f64,
    pub d: f64,
    pub pairs: Vec<PairTerm>,
}

fn pair_terms(traj: &Trajectory, i: usize, t: f64) -> Result<Vec<PairTerm>> {
    if i >= traj.n() {
        return Err(Error::InvalidInput(format!("vortex index {i} out of range (N = {})", traj.n())));
    }
    let z = traj.positions_at(t)?;
    let mut out = Vec::new();
    for j in 0..traj.n() {
        if j == i {
            continue;
        }
        let zij = z[i] - z[j];
        if zij.norm_sq() == 0.0 {
            return Err(Error::Singular(format!("vortices {i} and {j} coincide at t = {t}")));
        }
        out.push(PairTerm { j, ratio: traj.alphas[j] / traj.alphas[i], z: zij });
    }
    Ok(out)
}

pub fn residuum_terms(traj: &Trajectory, i: usize, t: f64, nu_t: f64) -> Result<ExpansionTerms> {
    let pairs = pair_terms(traj, i, t)?;
    Ok(ExpansionTerms { i, t, nu_t, d: traj.d, pairs })
}

impl ExpansionTerms {
    /// d, or 0 for a lone vortex (d = ∞ there and every sum is empty).
    fn length(&self) -> f64 {
        if self.pairs.is_empty() {
            0.0
        } else {
            self.d
        }
    }

    /// Product form of A_i.
    pub fn a(&self, xi: Vec2) -> f64 {
        let d2 = self.length() * self.length();
        let s: f64 = self
            .pairs
            .iter()
            .map(|p| {
                let z2 = p.z.norm_sq();
                p.ratio * xi.dot(p.z) * xi.dot(p.z.perp()) / (z2 * z2)
            })
            .sum();
        d2 / (2.0 * PI) * s * gauss(xi)
    }

    /// Product form of B_i.
    pub fn b(&self, xi: Vec2) -> f64 {
        let d3 = self.length().powi(3);
        let x2 = xi.norm_sq();
        let s: f64 = self
            .pairs
            .iter()
            .map(|p| {
                let z2 = p.z.norm_sq();
                let xz = xi.dot(p.z);
                p.ratio * xi.dot(p.z.perp()) / (z2 * z2 * z2) * (x2 * z2 - 4.0 * xz * xz)
            })
            .sum();
        d3 / (4.0 * PI) * s * gauss(xi)
    }

    /// Product form of C_i.
    pub fn c(&self, xi: Vec2) -> f64 {
        let d4 = self.length().powi(4);
        let x2 = xi.norm_sq();
        let s: f64 = self
            .pairs
            .iter()
            .map(|p| {
                let z2 = p.z.norm_sq();
                let xz = xi.dot(p.z);
                p.ratio * xz * xi.dot(p.z.perp()) / (z2 * z2 * z2 * z2) * (2.0 * xz * xz - x2 * z2)
            })
            .sum();
        d4 / PI * s * gauss(xi)
    }

    pub fn eval(&self, term: Term, xi: Vec2) -> f64 {
        match term {
            Term::A => self.a(xi),
            Term::B => self.b(xi),
            Term::C => self.c(xi),
        }
    }

    /// Radial factor R(r) = (−1)^n dⁿ rⁿ g(r)/(4π) of the single-mode form of a term.
    pub fn radial_factor(&self, term: Term, r: f64) -> f64 {
        let n = term.mode() as i32;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sign * self.length().powi(n) * r.powi(n) * gauss_profile(r) / (4.0 * PI)
    }

    /// Angular amplitudes (Σ k_j cos nθ_j, Σ k_j sin nθ_j) with k_j = (α_j/α_i)|z_ij|^{−n}.
    pub fn angular_sums(&self, n: usize) -> (f64, f64) {
        let mut sc = 0.0;
        let mut ss = 0.0;
        for p in &self.pairs {
            let k = p.ratio / p.z.norm().powi(n as i32);
            let a = n as f64 * p.z.angle();
            sc += k * a.cos();
            ss += k * a.sin();
        }
        (sc, ss)
    }

    /// Single-mode form R(r) Σ_j k_j sin n(θ − θ_ij).
    pub fn eval_reduced(&self, term: Term, xi: Vec2) -> f64 {
        let n = term.mode();
        let r = xi.norm();
        if r == 0.0 {
            return 0.0;
        }
        let (sc, ss) = self.angular_sums(n);
        let nt = n as f64 * xi.angle();
        self.radial_factor(term, r) * (nt.sin() * sc - nt.cos() * ss)
    }

    /// The term as an azimuthal mode on a radial grid.
    pub fn mode(&self, term: Term, grid: Arc<RadialGrid>) -> AzimuthalMode {
        let n = term.mode();
        let (sc, ss) = self.angular_sums(n);
        let rad: Vec<f64> = grid.nodes().iter().map(|&r| self.radial_factor(term, r)).collect();
        let c = rad.iter().map(|v| -v * ss).collect();
        let s = rad.iter().map(|v| v * sc).collect();
        AzimuthalMode {
            n,
            c_profile: RadialProfile { grid: grid.clone(), values: c },
            s_profile: RadialProfile { grid, values: s },
        }
    }

    pub fn modes(&self, grid: Arc<RadialGrid>) -> Vec<(Term, AzimuthalMode)> {
        [Term::A, Term::B, Term::C].into_iter().map(|t| (t, self.mode(t, grid.clone()))).collect()
    }
}

/// R_i^{(0)}(ξ, t) = Σ_{j≠i} (α_j/ν){v^G(ξ + z_ij/√(νt)) − v^G(z_ij/√(νt))}·∇G(ξ), evaluated exactly.
#[derive(Debug, Clone)]
pub struct ResiduumField {
    pub i: usize,
    pub t: f64,
    pub nu: f64,
    pub alpha_i: f64,
    pub d: f64,
    pub pairs: Vec<PairTerm>,
}

pub fn naive_residuum_exact(traj: &Trajectory, i: usize, t: f64, nu: f64) -> Result<ResiduumField> {
    if !(nu > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidInput("ν and t must be positive".into()));
    }
    let pairs = pair_terms(traj, i, t)?;
    Ok(ResiduumField { i, t, nu, alpha_i: traj.alphas[i], d: traj.d, pairs })
}

impl ResiduumField {
    pub fn eval(&self, xi: Vec2) -> f64 {
        let s = (self.nu * self.t).sqrt();
        let grad = gauss_gradient(xi);
        self.pairs
            .iter()
            .map(|p| {
                let eta = p.z / s;
                let dv = oseen_velocity(xi + eta) - oseen_velocity(eta);
                p.ratio * self.alpha_i / self.nu * dv.dot(grad)
            })
            .sum()
    }

    /// R̃ = (d²/α_i t) R^{(0)} − A − (νt/d²)^{1/2} B − (νt/d²) C.
    pub fn remainder(&self, terms: &ExpansionTerms, xi: Vec2) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        let eps = self.nu * self.t / (self.d * self.d);
        let scaled = self.d * self.d / (self.alpha_i * self.t) * self.eval(xi);
        scaled - terms.eval_reduced(Term::A, xi) - eps.sqrt() * terms.eval_reduced(Term::B, xi)
            - eps * terms.eval_reduced(Term::C, xi)
    }
}

/// sup_ξ |R̃(ξ) e^{γ|ξ|²/4}| over a polar grid.
pub fn weighted_remainder_sup(traj: &Trajectory, i: usize, t: f64, nu: f64, gamma: f64, polar: &PolarGrid) -> Result<f64> {
    let field = naive_residuum_exact(traj, i, t, nu)?;
    let terms = residuum_terms(traj, i, t, nu * t)?;
    let mut sup = 0.0f64;
    for (r, th) in polar.points() {
        let xi = Vec2::from_polar(r, th);
        let v = field.remainder(&terms, xi).abs() * (gamma * r * r / 4.0).exp();
        sup = sup.max(v);
    }
    Ok(sup)
}

/// Default field-check grid: 256 radii on [0, 12] × 256 angles.
pub fn default_polar_grid() -> PolarGrid {
    PolarGrid::new(256, 12.0, 256)
}

/// One row of the remainder-scaling table.
#[derive(Debug, Clone, Copy)]
pub struct RemainderRow {
    pub nu: f64,
    pub t: f64,
    pub sup_weighted_remainder: f64,
}

pub fn write_remainder_csv<W: Write>(mut w: W, rows: &[RemainderRow]) -> std::io::Result<()> {
    writeln!(w, "nu,t,sup_weighted_remainder")?;
    for r in rows {
        writeln!(w, "{:.17e},{:.17e},{:.17e}", r.nu, r.t, r.sup_weighted_remainder)?;
    }
    Ok(())
}

/// D_i(ξ) = (1/2π) Σ_{j≠i} (α_j/α_i)(d²/|z_ij|⁴)(ξ^⊥|z_ij|² − 2(ξ·z_ij) z_ij^⊥)
#[derive(Debug, Clone)]
pub struct StrainField {
    pub d: f64,
    pub pairs: Vec<PairTerm>,
}

pub fn strain_field(traj: &Trajectory, i: usize, t: f64) -> Result<StrainField> {
    Ok(StrainField { d: traj.d, pairs: pair_terms(traj, i, t)? })
}

impl StrainField {
    fn length(&self) -> f64 {
        if self.pairs.is_empty() {
            0.0
        } else {
            self.d
        }
    }

    pub fn eval(&self, xi: Vec2) -> Vec2 {
        let d2 = self.length() * self.length();
        let mut out = Vec2::ZERO;
        for p in &self.pairs {
            let z2 = p.z.norm_sq();
            out += (xi.perp() * z2 - p.z.perp() * (2.0 * xi.dot(p.z))) * (p.ratio * d2 / (z2 * z2));
        }
        out / (2.0 * PI)
    }

    /// Centered finite-difference divergence.
    pub fn divergence_fd(&self, xi: Vec2, h: f64) -> f64 {
        let dx = (self.eval(xi + Vec2::new(h, 0.0)).x1 - self.eval(xi - Vec2::new(h, 0.0)).x1) / (2.0 * h);
        let dy = (self.eval(xi + Vec2::new(0.0, h)).x2 - self.eval(xi - Vec2::new(0.0, h)).x2) / (2.0 * h);
        dx + dy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_at_zero_and_parallel() {
        let eta = Vec2::new(3.0, 1.0);
        assert_eq!(velocity_difference_series(Vec2::ZERO, eta, 5).unwrap(), 0.0);
        let par = eta * 0.2;
        assert!(velocity_difference_series(par, eta, 7).unwrap().abs() < 1e-15);
    }

    #[test]
    fn series_domain_error() {
        assert!(velocity_difference_series(Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.0), 3).is_err());
    }

    #[test]
    fn split_vanishes_at_zero() {
        let (v1, v2) = v1_v2_split(Vec2::ZERO, Vec2::new(1.0, 2.0)).unwrap();
        assert_eq!(v1, Vec2::ZERO);
        assert_eq!(v2, Vec2::ZERO);
        assert_eq!(w_field(Vec2::ZERO, Vec2::new(1.0, 2.0)).unwrap(), Vec2::ZERO);
    }
}
