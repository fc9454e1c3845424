//! Radial grids, profiles and the quadrature/interpolation rules used on them.
//!
//! Nodes are uniform in a stretched coordinate `s = r / (1 + r/c)`, so the
//! core is resolved finely and the Gaussian tail coarsely. All rules below
//! work in `s` and carry the Jacobian `dr/ds`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::gauss_profile;

#[derive(Debug, Clone)]
pub struct RadialGrid {
    r: Vec<f64>,
    jac: Vec<f64>,
    ds: f64,
    stretch: f64,
}

pub const DEFAULT_NODES: usize = 2048;
pub const DEFAULT_R_MAX: f64 = 20.0;
pub const DEFAULT_STRETCH: f64 = 10.0;

impl RadialGrid {
    /// Graded grid with `m` nodes on `[0, r_max]`; `stretch = f64::INFINITY` gives a uniform grid.
    pub fn graded(m: usize, r_max: f64, stretch: f64) -> Result<Self> {
        if m < 8 {
            return Err(Error::InvalidInput(format!("radial grid needs at least 8 nodes, got {m}")));
        }
        if !(r_max > 0.0) || !(stretch > 0.0) {
            return Err(Error::InvalidInput("r_max and stretch must be positive".into()));
        }
        let s_max = to_s(r_max, stretch);
        let ds = s_max / (m - 1) as f64;
        let mut r = Vec::with_capacity(m);
        let mut jac = Vec::with_capacity(m);
        for k in 0..m {
            let s = k as f64 * ds;
            r.push(if k == m - 1 { r_max } else { from_s(s, stretch) });
            jac.push(dr_ds(s, stretch));
        }
        Ok(Self { r, jac, ds, stretch })
    }

    pub fn uniform(m: usize, r_max: f64) -> Result<Self> {
        Self::graded(m, r_max, f64::INFINITY)
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }

    /// `dr/ds` at the nodes.
    pub fn jacobian(&self) -> &[f64] {
        &self.jac
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn s_of(&self, r: f64) -> f64 {
        to_s(r, self.stretch)
    }

    /// `(r, dr/ds)` at stretched coordinate `s`.
    pub fn point_at_s(&self, s: f64) -> (f64, f64) {
        (from_s(s, self.stretch), dr_ds(s, self.stretch))
    }

    /// Second derivative of r with respect to s, at the nodes.
    pub fn jacobian_slope(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let s = k as f64 * self.ds;
                if self.stretch.is_infinite() {
                    0.0
                } else {
                    2.0 / self.stretch * (1.0 - s / self.stretch).powi(-3)
                }
            })
            .collect()
    }

    /// Trapezoid weights in `s` (times the Jacobian): `∫ f dr ≈ Σ w_k f_k`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let m = self.len();
        let mut w: Vec<f64> = self.jac.iter().map(|j| j * self.ds).collect();
        w[0] *= 0.5;
        w[m - 1] *= 0.5;
        w
    }

    /// Fourth-order weights for the integral over one interval `[r_i, r_{i+1}]`.
    /// Returns `(first node index, four weights)`; weights already include `ds` and the Jacobian.
    fn interval_rule(&self, i: usize) -> (usize, [f64; 4]) {
        let m = self.len();
        let h = self.ds / 24.0;
        let (start, c) = if i == 0 {
            (0, [9.0, 19.0, -5.0, 1.0])
        } else if i + 2 >= m {
            (m - 4, [1.0, -5.0, 19.0, 9.0])
        } else {
            (i - 1, [-1.0, 13.0, 13.0, -1.0])
        };
        let mut w = [0.0; 4];
        for q in 0..4 {
            w[q] = h * c[q] * self.jac[start + q];
        }
        (start, w)
    }

    fn interval_integrals(&self, f: &[f64]) -> Vec<f64> {
        let m = self.len();
        (0..m - 1)
            .map(|i| {
                let (start, w) = self.interval_rule(i);
                (0..4).map(|q| w[q] * f[start + q]).sum()
            })
            .collect()
    }

    /// Full-range weights of the composite fourth-order rule.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        for i in 0..self.len() - 1 {
            let (start, c) = self.interval_rule(i);
            for q in 0..4 {
                w[start + q] += c[q];
            }
        }
        w
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.interval_integrals(f).iter().sum()
    }

    /// `I_k = ∫_0^{r_k} f dr` for every node.
    pub fn cumulative(&self, f: &[f64]) -> Vec<f64> {
        let parts = self.interval_integrals(f);
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(0.0);
        for p in parts {
            acc += p;
            out.push(acc);
        }
        out
    }

    /// `J_k = ∫_{r_k}^{r_max} f dr`, summed from the outer end.
    pub fn cumulative_from_end(&self, f: &[f64]) -> Vec<f64> {
        let parts = self.interval_integrals(f);
        let m = self.len();
        let mut out = vec![0.0; m];
        let mut acc = 0.0;
        for k in (0..m - 1).rev() {
            acc += parts[k];
            out[k] = acc;
        }
        out
    }

    /// Richardson-style error estimate of `∫ f dr`: the step-h and step-2h rules are
    /// compared over the even-indexed nodes.
    pub fn quadrature_error_estimate(&self, f: &[f64]) -> f64 {
        let m = self.len();
        let last = if (m - 1) % 2 == 0 { m - 1 } else { m - 2 };
        // Simpson on the fine grid vs trapezoid-on-coarse based Simpson with doubled step.
        let g: Vec<f64> = (0..m).map(|k| f[k] * self.jac[k]).collect();
        let fine = simpson(&g[..=last], self.ds);
        let coarse: Vec<f64> = g[..=last].iter().step_by(2).copied().collect();
        let coarse = if (coarse.len() - 1) % 2 == 0 {
            simpson(&coarse, 2.0 * self.ds)
        } else {
            // one trailing panel with the 3/8 rule
            let n = coarse.len();
            simpson(&coarse[..n - 3], 2.0 * self.ds) + simpson38(&coarse[n - 4..], 2.0 * self.ds)
        };
        (fine - coarse).abs() / 15.0
    }

    /// Cubic (four-point Lagrange in `s`) interpolation; `None` outside `[0, r_max]`.
    pub fn interpolate(&self, values: &[f64], r: f64) -> Option<f64> {
        if !(r >= 0.0) || r > self.r_max() * (1.0 + 1e-14) {
            return None;
        }
        let m = self.len();
        let s = self.s_of(r.min(self.r_max()));
        let x = s / self.ds;
        let i = (x.floor() as usize).min(m - 2);
        let start = if i == 0 { 0 } else { (i - 1).min(m - 4) };
        let t = x - start as f64;
        let mut acc = 0.0;
        for a in 0..4 {
            let mut l = 1.0;
            for b in 0..4 {
                if a != b {
                    l *= (t - b as f64) / (a as f64 - b as f64);
                }
            }
            acc += l * values[start + a];
        }
        Some(acc)
    }

    /// First derivative in r, fourth order in s.
    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        let fs = d1_s(f, self.ds);
        fs.iter().zip(&self.jac).map(|(a, j)| a / j).collect()
    }

    /// Second derivative in r, fourth order in s.
    pub fn second_derivative(&self, f: &[f64]) -> Vec<f64> {
        let fs = d1_s(f, self.ds);
        let fss = d2_s(f, self.ds);
        let js = self.jacobian_slope();
        (0..self.len())
            .map(|k| {
                let j = self.jac[k];
                (fss[k] - fs[k] * js[k] / j) / (j * j)
            })
            .collect()
    }

    /// Max error of cubic interpolation of g at interval midpoints.
    pub fn interpolation_check(&self) -> f64 {
        let g: Vec<f64> = self.r.iter().map(|&r| gauss_profile(r)).collect();
        let mut worst = 0.0f64;
        for k in 0..self.len() - 1 {
            let s = (k as f64 + 0.5) * self.ds;
            let r = from_s(s, self.stretch);
            let e = (self.interpolate(&g, r).unwrap() - gauss_profile(r)).abs();
            worst = worst.max(e);
        }
        worst
    }

    /// Builds the grid and rejects it if cubic interpolation of g is worse than 1e-10.
    pub fn checked(m: usize, r_max: f64, stretch: f64) -> Result<Self> {
        let grid = Self::graded(m, r_max, stretch)?;
        let err = grid.interpolation_check();
        if err > 1e-10 {
            return Err(Error::Discretization(format!(
                "cubic interpolation of g has error {err:.3e} on a {m}-node grid"
            )));
        }
        Ok(grid)
    }
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self::graded(DEFAULT_NODES, DEFAULT_R_MAX, DEFAULT_STRETCH).unwrap()
    }
}

fn to_s(r: f64, c: f64) -> f64 {
    if c.is_infinite() {
        r
    } else {
        r / (1.0 + r / c)
    }
}

fn from_s(s: f64, c: f64) -> f64 {
    if c.is_infinite() {
        s
    } else {
        s / (1.0 - s / c)
    }
}

fn dr_ds(s: f64, c: f64) -> f64 {
    if c.is_infinite() {
        1.0
    } else {
        (1.0 - s / c).powi(-2)
    }
}

fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    debug_assert!(n >= 3 && (n - 1) % 2 == 0);
    let mut acc = f[0] + f[n - 1];
    for (k, v) in f.iter().enumerate().take(n - 1).skip(1) {
        acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

fn simpson38(f: &[f64], h: f64) -> f64 {
    3.0 * h / 8.0 * (f[0] + 3.0 * f[1] + 3.0 * f[2] + f[3])
}

fn d1_s(f: &[f64], h: f64) -> Vec<f64> {
    let m = f.len();
    let mut d = vec![0.0; m];
    for k in 0..m {
        d[k] = if k >= 2 && k + 2 < m {
            (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / (12.0 * h)
        } else if k < 2 {
            let c = &f[0..5];
            let o = k as f64;
            five_point_first(c, o) / h
        } else {
            let c = &f[m - 5..];
            let o = (k - (m - 5)) as f64;
            five_point_first(c, o) / h
        };
    }
    d
}

fn d2_s(f: &[f64], h: f64) -> Vec<f64> {
    let m = f.len();
    let mut d = vec![0.0; m];
    for k in 0..m {
        d[k] = if k >= 2 && k + 2 < m {
            (-f[k - 2] + 16.0 * f[k - 1] - 30.0 * f[k] + 16.0 * f[k + 1] - f[k + 2]) / (12.0 * h * h)
        } else {
            let (c, o) = if k < 2 {
                (&f[0..6], k as f64)
            } else {
                (&f[m - 6..], (k - (m - 6)) as f64)
            };
            lagrange_second(c, o) / (h * h)
        };
    }
    d
}

/// Derivative at offset `o` of the quartic through five unit-spaced samples.
fn five_point_first(c: &[f64], o: f64) -> f64 {
    lagrange_derivative(c, o, 1)
}

fn lagrange_second(c: &[f64], o: f64) -> f64 {
    lagrange_derivative(c, o, 2)
}

/// Derivative of order 1 or 2 of the Lagrange interpolant through unit-spaced `c`.
fn lagrange_derivative(c: &[f64], x: f64, order: usize) -> f64 {
    let n = c.len();
    let mut acc = 0.0;
    for a in 0..n {
        let denom: f64 = (0..n).filter(|&b| b != a).map(|b| a as f64 - b as f64).product();
        let others: Vec<f64> = (0..n).filter(|&b| b != a).map(|b| b as f64).collect();
        let val = match order {
            1 => {
                let mut s = 0.0;
                for i in 0..others.len() {
                    let mut p = 1.0;
                    for (j, &o) in others.iter().enumerate() {
                        if j != i {
                            p *= x - o;
                        }
                    }
                    s += p;
                }
                s
            }
            _ => {
                let mut s = 0.0;
                for i in 0..others.len() {
                    for j in 0..others.len() {
                        if i == j {
                            continue;
                        }
                        let mut p = 1.0;
                        for (k, &o) in others.iter().enumerate() {
                            if k != i && k != j {
                                p *= x - o;
                            }
                        }
                        s += p;
                    }
                }
                s
            }
        };
        acc += c[a] * val / denom;
    }
    acc
}

/// A function of r sampled on a radial grid.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "profile has {} values for a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn at(&self, r: f64) -> Option<f64> {
        self.grid.interpolate(&self.values, r)
    }

    /// `2π ∫ s f(s) ds`.
    pub fn mass(&self) -> f64 {
        let f: Vec<f64> = self.grid.nodes().iter().zip(&self.values).map(|(r, v)| r * v).collect();
        2.0 * std::f64::consts::PI * self.grid.integrate(&f)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Cos/sin coefficient profiles of one angular Fourier mode.
#[derive(Debug, Clone)]
pub struct AzimuthalMode {
    pub n: usize,
    pub c_profile: RadialProfile,
    pub s_profile: RadialProfile,
}

impl AzimuthalMode {
    pub fn new(n: usize, c_profile: RadialProfile, s_profile: RadialProfile) -> Result<Self> {
        if n == 0 && s_profile.max_abs() != 0.0 {
            return Err(Error::InvalidInput("mode 0 carries no sine component".into()));
        }
        Ok(Self { n, c_profile, s_profile })
    }

    pub fn zeros(n: usize, grid: Arc<RadialGrid>) -> Self {
        Self {
            n,
            c_profile: RadialProfile::zeros(grid.clone()),
            s_profile: RadialProfile::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.c_profile.grid
    }

    /// Value at polar point (r, θ) by cubic radial interpolation; zero beyond r_max.
    pub fn eval_polar(&self, r: f64, theta: f64) -> f64 {
        let c = self.c_profile.at(r).unwrap_or(0.0);
        let s = self.s_profile.at(r).unwrap_or(0.0);
        let nt = self.n as f64 * theta;
        c * nt.cos() + s * nt.sin()
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.c_profile.values.iter_mut().for_each(|v| *v *= k);
        out.s_profile.values.iter_mut().for_each(|v| *v *= k);
        out
    }

    /// `self + k·other`; modes must match.
    pub fn add_scaled(&mut self, other: &Self, k: f64) {
        assert_eq!(self.n, other.n, "mode mismatch");
        for (a, b) in self.c_profile.values.iter_mut().zip(&other.c_profile.values) {
            *a += k * b;
        }
        for (a, b) in self.s_profile.values.iter_mut().zip(&other.s_profile.values) {
            *a += k * b;
        }
    }

    /// The same field rotated by `angle`: f(θ) ↦ f(θ − angle).
    pub fn rotated(&self, angle: f64) -> Self {
        let (sn, cs) = (self.n as f64 * angle).sin_cos();
        let mut out = self.clone();
        for k in 0..self.c_profile.values.len() {
            let c = self.c_profile.values[k];
            let s = self.s_profile.values[k];
            out.c_profile.values[k] = c * cs - s * sn;
            out.s_profile.values[k] = c * sn + s * cs;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let g = RadialGrid::default();
        assert_eq!(g.len(), 2048);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.r_max(), 20.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn default_grid_interpolates_g() {
        assert!(RadialGrid::default().interpolation_check() < 1e-10);
    }

    #[test]
    fn quadrature_polynomials() {
        let g = RadialGrid::uniform(101, 2.0).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| r * r * r).collect();
        assert!((g.integrate(&f) - 4.0).abs() < 1e-12);
        let c = g.cumulative(&f);
        for (r, v) in g.nodes().iter().zip(&c) {
            assert!((v - r.powi(4) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_of_gaussian() {
        let g = RadialGrid::default();
        let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r / 4.0).exp()).collect();
        let d = g.derivative(&f);
        let dd = g.second_derivative(&f);
        for (k, &r) in g.nodes().iter().enumerate() {
            let e = (-r * r / 4.0).exp();
            assert!((d[k] + r / 2.0 * e).abs() < 1e-8, "r={r} {}", d[k] + r / 2.0 * e);
            assert!((dd[k] - (r * r / 4.0 - 0.5) * e).abs() < 1e-7, "r={r} {}", dd[k] - (r * r / 4.0 - 0.5) * e);
        }
    }

    #[test]
    fn rotation_of_modes() {
        let grid = RadialGrid::uniform(16, 1.0).unwrap().shared();
        let c = RadialProfile::from_fn(grid.clone(), |r| r);
        let s = RadialProfile::zeros(grid.clone());
        let m = AzimuthalMode::new(2, c, s).unwrap();
        let rot = m.rotated(0.3);
        let v1 = m.eval_polar(0.5, 1.1 - 0.3);
        let v2 = rot.eval_polar(0.5, 1.1);
        assert!((v1 - v2).abs() < 1e-14);
    }
}

/// Tensor polar grid: radii uniform on [0, r_max] (endpoints included), angles uniform on [0, 2π).
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
}

impl PolarGrid {
    pub fn new(n_r: usize, r_max: f64, n_theta: usize) -> Self {
        let radii = (0..n_r).map(|k| r_max * k as f64 / (n_r - 1) as f64).collect();
        let angles = (0..n_theta).map(|k| 2.0 * std::f64::consts::PI * k as f64 / n_theta as f64).collect();
        Self { radii, angles }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.radii.iter().flat_map(move |&r| self.angles.iter().map(move |&t| (r, t)))
    }

    /// Radial weights for `∫_0^{r_max} f(r) r dr`: composite Simpson, closed by a 3/8 panel when
    /// the interval count is odd.
    pub fn radial_weights(&self) -> Vec<f64> {
        let n = self.radii.len();
        let h = self.radii[1] - self.radii[0];
        let mut w = vec![0.0; n];
        let intervals = n - 1;
        let simpson_end = if intervals % 2 == 0 { n - 1 } else { n - 4 };
        for k in (0..simpson_end).step_by(2) {
            w[k] += h / 3.0;
            w[k + 1] += 4.0 * h / 3.0;
            w[k + 2] += h / 3.0;
        }
        if intervals % 2 == 1 {
            let c = [1.0, 3.0, 3.0, 1.0];
            for q in 0..4 {
                w[n - 4 + q] += 3.0 * h / 8.0 * c[q];
            }
        }
        w.iter_mut().zip(&self.radii).for_each(|(w, r)| *w *= r);
        w
    }

    /// Weights for `∫ f dξ` over the disk, indexed like [`PolarGrid::points`].
    pub fn area_weights(&self) -> Vec<f64> {
        let rw = self.radial_weights();
        let dt = 2.0 * std::f64::consts::PI / self.angles.len() as f64;
        rw.iter().flat_map(|w| std::iter::repeat(w * dt).take(self.angles.len())).collect()
    }
}
