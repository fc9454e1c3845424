//! The linearized operators around the Oseen vortex, in the Gaussian-weighted
//! space Y (weight e^{|ξ|²/4}), restricted to single angular modes.
//!
//! A mode-n field is `c(r) cos nθ + s(r) sin nθ`. With `M_n f = n(φ f − (g/2) K_n f)`,
//! where `K_n` inverts `−(r f')'/r + n² f/r²`, the operator Λ acts as
//! `Λ(c cos + s sin) = (M_n s) cos − (M_n c) sin`.
//!
//! Dense operators live in Y-orthonormal coordinates `ũ_k = √Q_k u_k`, with
//! `Q_k = q_k r_k e^{r_k²/4}` and `q_k` the trapezoid-in-s weights, so that Λ
//! is an exactly skew matrix and L an exactly symmetric one.

mod bvp;
mod deformation;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use ndarray::{Array1, Array2};
use ndarray_linalg::{FactorizeInto, LUFactorized, Solve};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{AzimuthalMode, RadialGrid, RadialProfile};
use crate::kernels::{gauss_profile, phi_h_profiles};

pub use bvp::{omega_bvp_residual, HomogeneousSolutions};
pub use deformation::{write_profile_csv, DeformationProfiles, WappField, WappOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorTag {
    L,
    LambdaN,
    BiotSavartMode,
}

/// A dense mode operator in Y-orthonormal coordinates on the active nodes `offset..offset+size`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub n: usize,
    pub tag: OperatorTag,
    pub offset: usize,
    pub data: Array2<f64>,
}

type LuKey = (u64, usize);

pub struct ProfileSolver {
    grid: Arc<RadialGrid>,
    g: Vec<f64>,
    phi: Vec<f64>,
    h: Vec<f64>,
    /// trapezoid-in-s weights (ds·J, halved at the ends)
    q: Vec<f64>,
    /// √Q_k for the Y-isometry
    sq: Vec<f64>,
    m_tilde: Mutex<HashMap<usize, Arc<Array2<f64>>>>,
    homog: Mutex<HashMap<usize, Arc<HomogeneousSolutions>>>,
    resolvents: Mutex<HashMap<LuKey, Arc<LUFactorized<ndarray::OwnedRepr<Complex64>>>>>,
    omega_cache: Mutex<HashMap<usize, Arc<(RadialProfile, RadialProfile)>>>,
    fnu_base: Mutex<HashMap<u64, Arc<deformation::FnuBase>>>,
}

impl ProfileSolver {
    pub fn new(grid: Arc<RadialGrid>) -> Self {
        let nodes = grid.nodes();
        let g = nodes.iter().map(|&r| gauss_profile(r)).collect();
        let (phi, h): (Vec<f64>, Vec<f64>) = nodes.iter().map(|&r| phi_h_profiles(r)).unzip();
        let q = grid.trapezoid_weights();
        let mut sq: Vec<f64> = nodes.iter().zip(&q).map(|(&r, &w)| (w * r).sqrt() * (r * r / 8.0).exp()).collect();
        // the centre node carries the cell volume ∫₀^{r_½} r e^{r²/4} dr
        let r_half = grid.point_at_s(0.5 * grid.ds()).0;
        sq[0] = (2.0 * (r_half * r_half / 4.0).exp_m1()).sqrt();
        Self {
            grid,
            g,
            phi,
            h,
            q,
            sq,
            m_tilde: Mutex::new(HashMap::new()),
            homog: Mutex::new(HashMap::new()),
            resolvents: Mutex::new(HashMap::new()),
            omega_cache: Mutex::new(HashMap::new()),
            fnu_base: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// Y weight Q_k = q_k r_k e^{r_k²/4} of each node (cell volume at r = 0).
    pub fn y_weights(&self) -> Vec<f64> {
        self.sq.iter().map(|s| s * s).collect()
    }

    fn active(&self, n: usize) -> std::ops::Range<usize> {
        let m = self.len();
        if n == 0 {
            0..m - 1
        } else {
            1..m - 1
        }
    }

    /// Radial Y product Σ Q_k f_k u_k.
    pub fn y_dot(&self, f: &[f64], u: &[f64]) -> f64 {
        self.sq.iter().zip(f).zip(u).map(|((s, a), b)| (s * a) * (s * b)).sum()
    }

    /// Y product of two fields of the same mode (angular integral included).
    pub fn y_inner(&self, a: &AzimuthalMode, b: &AzimuthalMode) -> f64 {
        if a.n != b.n {
            return 0.0;
        }
        let ang = if a.n == 0 { 2.0 * PI } else { PI };
        ang * (self.y_dot(&a.c_profile.values, &b.c_profile.values)
            + if a.n == 0 { 0.0 } else { self.y_dot(&a.s_profile.values, &b.s_profile.values) })
    }

    pub fn y_norm(&self, a: &AzimuthalMode) -> f64 {
        self.y_inner(a, a).sqrt()
    }

    fn diag_correction(&self, k: usize) -> f64 {
        let j = self.grid.jacobian()[k] * self.grid.ds();
        -j * j / 12.0
    }

    /// Stream-function inverse K_n f of `−(r P')'/r + n² P/r² = f`, with P(0) = 0 and decay at infinity.
    pub fn biot_savart_mode(&self, n: usize, f: &[f64]) -> Vec<f64> {
        assert!(n >= 1, "mode 0 has no decaying stream function");
        let r = self.grid.nodes();
        let m = self.len();
        let rq: Vec<f64> = (0..m).map(|l| r[l] * self.q[l] * f[l]).collect();
        let inv2n = 0.5 / n as f64;
        let ni = n as i32;
        let mut out = vec![0.0; m];
        for k in 1..m {
            let rk = r[k];
            let mut acc = 0.0;
            for l in 1..m {
                let ratio = if l <= k { r[l] / rk } else { rk / r[l] };
                acc += ratio.powi(ni) * rq[l];
            }
            out[k] = inv2n * acc + self.diag_correction(k) * f[k];
        }
        out
    }

    /// M̃_n = n(diag φ − B̃) in Y-orthonormal coordinates, on nodes 1..M−1.
    fn m_tilde(&self, n: usize) -> Arc<Array2<f64>> {
        assert!(n >= 1);
        if let Some(m) = self.m_tilde.lock().unwrap().get(&n) {
            return m.clone();
        }
        let r = self.grid.nodes();
        let act = self.active(n);
        let size = act.len();
        let off = act.start;
        let sigma: Vec<f64> = (0..self.len()).map(|k| (self.q[k] * r[k]).sqrt() * (-r[k] * r[k] / 8.0).exp()).collect();
        let inv2n = 0.5 / n as f64;
        let ni = n as i32;
        let nf = n as f64;
        let mut a = Array2::<f64>::zeros((size, size));
        for i in 0..size {
            let k = i + off;
            for jj in 0..=i {
                let l = jj + off;
                let ratio = r[l] / r[k];
                let b = sigma[k] * sigma[l] * inv2n * ratio.powi(ni) / (8.0 * PI);
                a[[i, jj]] = -nf * b;
                a[[jj, i]] = -nf * b;
            }
            a[[i, i]] += nf * (self.phi[k] - 0.5 * self.g[k] * self.diag_correction(k));
        }
        let a = Arc::new(a);
        self.m_tilde.lock().unwrap().insert(n, a.clone());
        a
    }

    /// Symmetric tridiagonal L̃_n (diag, off-diag) on the active nodes, Dirichlet at r_max.
    pub fn l_tridiagonal(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let r = self.grid.nodes();
        let m = self.len();
        let ds = self.grid.ds();
        let stiff: Vec<f64> = (0..m - 1)
            .map(|i| {
                let s_mid = (i as f64 + 0.5) * ds;
                let (rm, jm) = self.grid.point_at_s(s_mid);
                rm * (rm * rm / 4.0).exp() / (jm * ds)
            })
            .collect();
        let act = self.active(n);
        let qy: Vec<f64> = self.sq.iter().map(|v| v * v).collect();
        let n2 = (n * n) as f64;
        let mut diag = Vec::with_capacity(act.len());
        let mut off = Vec::with_capacity(act.len().saturating_sub(1));
        for k in act.clone() {
            let mut s_kk = stiff[k];
            if k > 0 {
                s_kk += stiff[k - 1];
            }
            let mass = if r[k] > 0.0 { qy[k] * (1.0 - n2 / (r[k] * r[k])) } else { qy[k] };
            diag.push((-s_kk + mass) / qy[k]);
            if k + 1 < act.end {
                off.push(stiff[k] / (qy[k] * qy[k + 1]).sqrt());
            }
        }
        (diag, off)
    }

    /// √Q scaling of the active part of a profile.
    fn to_tilde(&self, n: usize, f: &[f64]) -> Vec<f64> {
        self.active(n).map(|k| self.sq[k] * f[k]).collect()
    }

    fn from_tilde(&self, n: usize, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, k) in self.active(n).enumerate() {
            out[k] = u[i] / self.sq[k];
        }
        out
    }

    /// M_n f in original coordinates.
    pub fn m_apply(&self, n: usize, f: &[f64]) -> Vec<f64> {
        let m = self.m_tilde(n);
        let ft = Array1::from(self.to_tilde(n, f));
        let out = m.dot(&ft);
        self.from_tilde(n, out.as_slice().unwrap())
    }

    /// Λ applied to a single-mode field; zero for n = 0.
    pub fn apply_lambda(&self, w: &AzimuthalMode) -> AzimuthalMode {
        let grid = self.grid.clone();
        if w.n == 0 {
            return AzimuthalMode::zeros(0, grid);
        }
        let cos = self.m_apply(w.n, &w.s_profile.values);
        let sin: Vec<f64> = self.m_apply(w.n, &w.c_profile.values).into_iter().map(|v| -v).collect();
        AzimuthalMode {
            n: w.n,
            c_profile: RadialProfile { grid: grid.clone(), values: cos },
            s_profile: RadialProfile { grid, values: sin },
        }
    }

    pub fn operator_matrix(&self, tag: OperatorTag, n: usize) -> OperatorMatrix {
        let act = self.active(n);
        let data = match tag {
            OperatorTag::LambdaN => {
                // block [[0, M̃], [−M̃, 0]] acting on (c̃, s̃)
                let m = self.m_tilde(n);
                let s = m.nrows();
                let mut a = Array2::zeros((2 * s, 2 * s));
                a.slice_mut(ndarray::s![0..s, s..2 * s]).assign(&m);
                a.slice_mut(ndarray::s![s..2 * s, 0..s]).assign(&(-&*m));
                a
            }
            OperatorTag::L => {
                let (d, o) = self.l_tridiagonal(n);
                let s = d.len();
                let mut a = Array2::zeros((s, s));
                for i in 0..s {
                    a[[i, i]] = d[i];
                    if i + 1 < s {
                        a[[i, i + 1]] = o[i];
                        a[[i + 1, i]] = o[i];
                    }
                }
                a
            }
            OperatorTag::BiotSavartMode => {
                let s = act.len();
                let mut a = Array2::zeros((s, s));
                for j in 0..s {
                    let mut e = vec![0.0; self.len()];
                    e[j + act.start] = 1.0 / self.sq[j + act.start];
                    let col = self.biot_savart_mode(n.max(1), &e);
                    for i in 0..s {
                        a[[i, j]] = col[i + act.start] * self.sq[i + act.start];
                    }
                }
                a
            }
        };
        OperatorMatrix { n, tag, offset: act.start, data }
    }

    /// Solves ε(1 − L)w + Λw = z for one mode (dense complex LU, cached per (ε, n)).
    pub fn solve_regularized(&self, eps: f64, z: &AzimuthalMode) -> Result<AzimuthalMode> {
        let n = z.n;
        if eps == 0.0 || !eps.is_finite() {
            return Err(Error::InvalidInput("ε must be finite and nonzero".into()));
        }
        if n == 0 {
            return Err(Error::InvalidInput("mode 0 is not handled by the regularized Λ solve".into()));
        }
        let lu = self.resolvent(eps, n)?;
        let zc = self.to_tilde(n, &z.c_profile.values);
        let zs = self.to_tilde(n, &z.s_profile.values);
        let rhs: Array1<Complex64> = zc.iter().zip(&zs).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let u = lu.solve(&rhs).map_err(|e| Error::Conditioning(e.to_string()))?;
        if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Conditioning("non-finite solution".into()));
        }
        let c: Vec<f64> = u.iter().map(|v| v.re).collect();
        let s: Vec<f64> = u.iter().map(|v| v.im).collect();
        let grid = self.grid.clone();
        Ok(AzimuthalMode {
            n,
            c_profile: RadialProfile { grid: grid.clone(), values: self.from_tilde(n, &c) },
            s_profile: RadialProfile { grid, values: self.from_tilde(n, &s) },
        })
    }

    fn resolvent(&self, eps: f64, n: usize) -> Result<Arc<LUFactorized<ndarray::OwnedRepr<Complex64>>>> {
        let key = (eps.to_bits(), n);
        if let Some(f) = self.resolvents.lock().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let m = self.m_tilde(n);
        let (d, o) = self.l_tridiagonal(n);
        let s = d.len();
        let mut a = m.mapv(|v| Complex64::new(0.0, -v));
        for i in 0..s {
            a[[i, i]] += eps * (1.0 - d[i]);
            if i + 1 < s {
                a[[i, i + 1]] -= eps * o[i];
                a[[i + 1, i]] -= eps * o[i];
            }
        }
        let lu = Arc::new(a.factorize_into().map_err(|e| Error::Conditioning(e.to_string()))?);
        self.resolvents.lock().unwrap().insert(key, lu.clone());
        Ok(lu)
    }

    /// Solves Λw = z for n ≥ 2 through the Green's-function representation.
    pub fn solve_lambda(&self, z: &AzimuthalMode) -> Result<AzimuthalMode> {
        let n = z.n;
        if n < 2 {
            return Err(Error::InvalidInput(format!("Λw = z is inverted here only for n ≥ 2 (got {n})")));
        }
        let (_, om_c) = self.solve_omega_bvp(n, &z.c_profile)?;
        let (_, om_s) = self.solve_omega_bvp(n, &z.s_profile)?;
        let c = om_s.values.iter().map(|v| -v).collect();
        Ok(AzimuthalMode {
            n,
            c_profile: RadialProfile { grid: self.grid.clone(), values: c },
            s_profile: om_c,
        })
    }

    /// ω for the reference source a = rⁿ g(r) (cached).
    pub fn reference_omega(&self, n: usize) -> Result<Arc<(RadialProfile, RadialProfile)>> {
        if let Some(v) = self.omega_cache.lock().unwrap().get(&n) {
            return Ok(v.clone());
        }
        let a = RadialProfile::from_fn(self.grid.clone(), |r| r.powi(n as i32) * gauss_profile(r));
        let v = Arc::new(self.solve_omega_bvp(n, &a)?);
        self.omega_cache.lock().unwrap().insert(n, v.clone());
        Ok(v)
    }
}

impl Default for ProfileSolver {
    fn default() -> Self {
        Self::new(Arc::new(RadialGrid::default()))
    }
}

/// Solves the tridiagonal system (a_i off-diagonal, symmetric) in place: (diag, off) x = rhs.
pub(crate) fn solve_symmetric_tridiagonal(diag: &[f64], off: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut b0 = diag[0];
    rhs[0] /= b0;
    for i in 1..n {
        c[i - 1] = off[i - 1] / b0;
        b0 = diag[i] - off[i - 1] * c[i - 1];
        rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / b0;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}
