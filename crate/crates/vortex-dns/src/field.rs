//! Vorticity fields on the periodic box [−L/2, L/2)² and their Oseen initialization.

use vortex_core::kernels::gauss;
use vortex_core::point_vortex::VortexConfiguration;
use vortex_core::Vec2;

use crate::error::{Error, Result};

/// Total vorticity plus one passive component per vortex, all on the same n×n grid.
/// Storage is row-major with x₁ as the fast index: `data[j2·n + j1]` sits at
/// `(−L/2 + j1·Δx, −L/2 + j2·Δx)`.
#[derive(Debug, Clone)]
pub struct VorticityField {
    pub n: usize,
    pub l_box: f64,
    pub t: f64,
    pub nu: f64,
    pub alphas: Vec<f64>,
    pub total: Vec<f64>,
    pub components: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct DecompositionReport {
    /// min over the grid of sign(α_i)·ω_i
    pub min_signed: Vec<f64>,
    pub max_abs: Vec<f64>,
    /// ∫ω_i dx
    pub masses: Vec<f64>,
    /// max|Σω_i − ω| / max|ω|
    pub sum_residual: f64,
}

impl DecompositionReport {
    /// Worst undershoot relative to the component's own peak (≤ 0 means none).
    pub fn relative_undershoot(&self) -> f64 {
        self.min_signed.iter().zip(&self.max_abs).map(|(m, a)| -m / a).fold(f64::NEG_INFINITY, f64::max)
    }
}

impl VorticityField {
    pub fn dx(&self) -> f64 {
        self.l_box / self.n as f64
    }

    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.l_box + j as f64 * self.dx()
    }

    pub fn n_vortices(&self) -> usize {
        self.components.len()
    }

    pub fn integral(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.dx() * self.dx()
    }

    pub fn enstrophy(&self) -> f64 {
        self.total.iter().map(|v| v * v).sum::<f64>() * self.dx() * self.dx()
    }

    /// Nearest periodic image of `x − center`.
    pub fn wrap(&self, d: Vec2) -> Vec2 {
        let l = self.l_box;
        Vec2::new(d.x1 - l * (d.x1 / l).round(), d.x2 - l * (d.x2 / l).round())
    }

    pub fn decompose_check(&self) -> DecompositionReport {
        let mut min_signed = Vec::new();
        let mut max_abs = Vec::new();
        let mut masses = Vec::new();
        for (c, a) in self.components.iter().zip(&self.alphas) {
            let s = a.signum();
            min_signed.push(c.iter().map(|v| s * v).fold(f64::INFINITY, f64::min));
            max_abs.push(c.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            masses.push(self.integral(c));
        }
        let scale = self.total.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut res = 0.0f64;
        for k in 0..self.total.len() {
            let s: f64 = self.components.iter().map(|c| c[k]).sum();
            res = res.max((s - self.total[k]).abs());
        }
        DecompositionReport { min_signed, max_abs, masses, sum_residual: res / scale }
    }
}

/// Sum of Lamb-Oseen vortices at time `t0`, each placed at its nearest periodic image.
pub fn init_oseen_superposition(config: &VortexConfiguration, t0: f64, n: usize, l_box: f64) -> Result<VorticityField> {
    config.validate()?;
    if !n.is_power_of_two() || n < 8 {
        return Err(Error::Config(format!("grid size {n} must be a power of two ≥ 8")));
    }
    if !(t0 > 0.0) || !(l_box > 0.0) || !(config.nu > 0.0) {
        return Err(Error::Config("t0, box side and ν must be positive".into()));
    }
    let dx = l_box / n as f64;
    let core = (config.nu * t0).sqrt();
    if core < 3.0 * dx {
        return Err(Error::Config(format!(
            "unresolved core: √(νt0) = {core:.4e} < 3Δx = {:.4e}",
            3.0 * dx
        )));
    }
    for (i, p) in config.positions.iter().enumerate() {
        if p.x1.abs().max(p.x2.abs()) > 0.25 * l_box {
            return Err(Error::Config(format!("vortex {i} at ({}, {}) is closer than L/4 to the box boundary", p.x1, p.x2)));
        }
    }
    Ok(oseen_field_unchecked(config, t0, n, l_box))
}

/// Same construction without the resolution and placement checks; meant for convergence
/// studies that start deliberately under-resolved.
pub fn oseen_field_unchecked(config: &VortexConfiguration, t0: f64, n: usize, l_box: f64) -> VorticityField {
    let core = (config.nu * t0).sqrt();
    let mut field = VorticityField {
        n,
        l_box,
        t: t0,
        nu: config.nu,
        alphas: config.alphas.clone(),
        total: vec![0.0; n * n],
        components: Vec::new(),
    };
    for (p, &a) in config.positions.iter().zip(&config.alphas) {
        let amp = a / (config.nu * t0);
        let mut c = vec![0.0; n * n];
        for j2 in 0..n {
            for j1 in 0..n {
                let d = field.wrap(Vec2::new(field.coord(j1), field.coord(j2)) - *p);
                c[j2 * n + j1] = amp * gauss(d / core);
            }
        }
        field.components.push(c);
    }
    for c in &field.components {
        field.total.iter_mut().zip(c).for_each(|(t, v)| *t += v);
    }
    field
}
