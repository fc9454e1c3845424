//! Square 2D complex FFT: row transforms, transpose, row transforms, transpose.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self { n, fwd, inv, scratch: vec![Complex64::default(); len], tmp: vec![Complex64::default(); n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let f = self.fwd.clone();
        self.run(&*f, data);
    }

    /// Inverse transform in place, scaled by 1/n².
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let f = self.inv.clone();
        self.run(&*f, data);
        let s = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn run(&mut self, f: &dyn Fft<f64>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n);
        f.process_with_scratch(data, &mut self.scratch);
        transpose(self.n, data, &mut self.tmp);
        f.process_with_scratch(&mut self.tmp, &mut self.scratch);
        transpose(self.n, &self.tmp, data);
    }
}

fn transpose(n: usize, src: &[Complex64], dst: &mut [Complex64]) {
    const B: usize = 32;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_single_mode() {
        let n = 16;
        let mut f = Fft2::new(n);
        let orig: Vec<Complex64> = (0..n * n).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let mut d = orig.clone();
        f.forward(&mut d);
        f.inverse(&mut d);
        let err = d.iter().zip(&orig).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);

        // cos(2π·3x/n) along x (fast index) lands at kx = ±3, ky = 0
        let mut d: Vec<Complex64> =
            (0..n * n).map(|k| Complex64::new((2.0 * std::f64::consts::PI * 3.0 * (k % n) as f64 / n as f64).cos(), 0.0)).collect();
        f.forward(&mut d);
        assert!((d[3].re - (n * n) as f64 / 2.0).abs() < 1e-9);
        assert!((d[n - 3].re - (n * n) as f64 / 2.0).abs() < 1e-9);
        assert!(d[3 * n].norm() < 1e-9);
    }
}
