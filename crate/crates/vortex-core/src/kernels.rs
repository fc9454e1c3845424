//! Lamb-Oseen profiles and the planar Biot-Savart law.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::grid::RadialProfile;

/// Below this value of r² the closed forms are replaced by their Taylor series.
pub const TAYLOR_SWITCH_R2: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x1: f64,
    pub x2: f64,
}

pub type PlanarVector = Vec2;

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x1: 0.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    /// (x1, x2) ↦ (−x2, x1)
    pub fn perp(self) -> Self {
        Self::new(-self.x2, self.x1)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn angle(self) -> f64 {
        self.x2.atan2(self.x1)
    }

    pub fn rotate(self, a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self::new(c * self.x1 - s * self.x2, s * self.x1 + c * self.x2)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x1, -self.x2)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x1 * k, self.x2 * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, k: f64) -> Vec2 {
        Vec2::new(self.x1 / k, self.x2 / k)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x1 += o.x1;
        self.x2 += o.x2;
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x1 -= o.x1;
        self.x2 -= o.x2;
    }
}

/// g(r) = e^{−r²/4}/(4π)
pub fn gauss_profile(r: f64) -> f64 {
    (-0.25 * r * r).exp() / (4.0 * PI)
}

/// G(ξ) = g(|ξ|)
pub fn gauss(xi: Vec2) -> f64 {
    (-0.25 * xi.norm_sq()).exp() / (4.0 * PI)
}

/// ∇G(ξ) = −ξ G(ξ)/2
pub fn gauss_gradient(xi: Vec2) -> Vec2 {
    xi * (-0.5 * gauss(xi))
}

/// (1 − e^{−x})/x
fn one_minus_exp_ratio(x: f64) -> f64 {
    if x < 0.25 * TAYLOR_SWITCH_R2 {
        1.0 - x / 2.0 * (1.0 - x / 3.0 * (1.0 - x / 4.0 * (1.0 - x / 5.0)))
    } else {
        -(-x).exp_m1() / x
    }
}

/// x/(eˣ − 1)
fn bernoulli_ratio(x: f64) -> f64 {
    if x < 0.25 * TAYLOR_SWITCH_R2 {
        let x2 = x * x;
        1.0 - x / 2.0 + x2 / 12.0 - x2 * x2 / 720.0
    } else {
        x / x.exp_m1()
    }
}

/// Velocity of the Lamb-Oseen vortex, v^G(ξ) = ξ^⊥(1 − e^{−|ξ|²/4})/(2π|ξ|²).
pub fn oseen_velocity(xi: Vec2) -> Vec2 {
    let x = 0.25 * xi.norm_sq();
    xi.perp() * (one_minus_exp_ratio(x) / (8.0 * PI))
}

/// φ(r) = (1 − e^{−r²/4})/(2πr²) and h(r) = (r²/4)/(e^{r²/4} − 1).
pub fn phi_h_profiles(r: f64) -> (f64, f64) {
    let x = 0.25 * r * r;
    (one_minus_exp_ratio(x) / (8.0 * PI), bernoulli_ratio(x))
}

/// Azimuthal velocity of a radial vorticity profile, v_θ(r) = (1/r)∫_0^r s w(s) ds.
pub fn biot_savart_radial(w: &RadialProfile) -> Result<RadialProfile> {
    let grid = &w.grid;
    let sw: Vec<f64> = grid.nodes().iter().zip(&w.values).map(|(r, v)| r * v).collect();
    let scale = sw.iter().zip(grid.trapezoid_weights()).map(|(v, q)| (v * q).abs()).sum::<f64>();
    let estimate = grid.quadrature_error_estimate(&sw);
    let tolerance = 1e-9 * scale.max(f64::MIN_POSITIVE);
    if estimate > tolerance {
        return Err(Error::Quadrature { estimate, tolerance });
    }
    let cum = grid.cumulative(&sw);
    let values = grid
        .nodes()
        .iter()
        .zip(&cum)
        .map(|(&r, &c)| if r == 0.0 { 0.0 } else { c / r })
        .collect();
    RadialProfile::new(grid.clone(), values)
}

/// The outer form −(1/r)∫_r^∞ s w(s) ds; equals [`biot_savart_radial`] when w has zero mean.
pub fn biot_savart_radial_outer(w: &RadialProfile) -> RadialProfile {
    let grid = &w.grid;
    let sw: Vec<f64> = grid.nodes().iter().zip(&w.values).map(|(r, v)| r * v).collect();
    let tail = grid.cumulative_from_end(&sw);
    let values = grid
        .nodes()
        .iter()
        .zip(&tail)
        .map(|(&r, &c)| if r == 0.0 { 0.0 } else { -c / r })
        .collect();
    RadialProfile { grid: grid.clone(), values }
}

/// Σ_j (α_j/2π)(x − x_j)^⊥/|x − x_j|²
pub fn point_vortex_velocity(eval_at: Vec2, centers: &[Vec2], circulations: &[f64]) -> Result<Vec2> {
    if centers.len() != circulations.len() {
        return Err(Error::InvalidInput("centers and circulations differ in length".into()));
    }
    let mut u = Vec2::ZERO;
    for (j, (&c, &a)) in centers.iter().zip(circulations).enumerate() {
        let d = eval_at - c;
        let r2 = d.norm_sq();
        if r2 == 0.0 {
            return Err(Error::Singular(format!("evaluation point coincides with vortex {j}")));
        }
        u += d.perp() * (a / (2.0 * PI * r2));
    }
    Ok(u)
}

/// sup_{r>0} r²h(r) by golden-section search on a bracket.
pub fn sup_r2h() -> (f64, f64) {
    let f = |r: f64| {
        let (_, h) = phi_h_profiles(r);
        r * r * h
    };
    let (r, v) = golden_max(f, 0.5, 6.0, 1e-12);
    (r, v)
}

/// Golden-section maximisation of a unimodal function on [a, b].
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perp_properties() {
        let v = Vec2::new(0.3, -1.7);
        assert_eq!(v.perp().perp(), -v);
        assert_eq!(v.perp().dot(v), 0.0);
    }

    #[test]
    fn gauss_at_zero() {
        assert!((gauss_profile(0.0) - 0.079_577_471_545_947_67).abs() < 1e-16);
    }

    #[test]
    fn taylor_switch_is_continuous() {
        let r2 = TAYLOR_SWITCH_R2;
        let x = r2 / 4.0;
        let below = one_minus_exp_ratio(x * (1.0 - 1e-15));
        let above = -(-x).exp_m1() / x;
        assert!((below - above).abs() < 1e-12);
        let hb = bernoulli_ratio(x * (1.0 - 1e-15));
        let ha = x / x.exp_m1();
        assert!((hb - ha).abs() < 1e-12);
    }

    #[test]
    fn small_argument_series_coefficient() {
        // v^G(ξ) ≈ ξ^⊥ (1/8π − |ξ|²/64π)
        let xi = Vec2::new(1e-3, 0.0);
        let v = oseen_velocity(xi);
        let expect = 1e-3 * (1.0 / (8.0 * PI) - 1e-6 / (64.0 * PI));
        assert!((v.x2 - expect).abs() < 1e-18);
    }

    #[test]
    fn point_vortex_singular() {
        assert!(point_vortex_velocity(Vec2::ZERO, &[Vec2::ZERO], &[1.0]).is_err());
    }
}
