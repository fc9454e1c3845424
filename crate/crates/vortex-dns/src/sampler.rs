//! Bicubic Hermite interpolation of periodic grid fields, with spectral derivatives at the nodes.

use rustfft::num_complex::Complex64;

use crate::fft2::Fft2;
use crate::field::VorticityField;
use std::f64::consts::PI;

pub struct BicubicSampler {
    n: usize,
    l_box: f64,
    f: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
    fxy: Vec<f64>,
}

impl BicubicSampler {
    pub fn new(values: &[f64], n: usize, l_box: f64) -> Self {
        assert_eq!(values.len(), n * n);
        let mut fft = Fft2::new(n);
        let mut hat: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft.forward(&mut hat);
        let k0 = 2.0 * PI / l_box;
        let kd: Vec<f64> = (0..n)
            .map(|j| match j {
                j if j == n / 2 => 0.0,
                j if j < n / 2 => k0 * j as f64,
                j => k0 * (j as f64 - n as f64),
            })
            .collect();
        let i = Complex64::i();
        let mut b: Vec<Complex64> = (0..n * n)
            .map(|k| {
                let (j2, j1) = (k / n, k % n);
                i * kd[j1] * hat[k] + i * (i * kd[j2] * hat[k])
            })
            .collect();
        fft.inverse(&mut b);
        let fx = b.iter().map(|c| c.re).collect();
        let fy = b.iter().map(|c| c.im).collect();
        let mut b: Vec<Complex64> = (0..n * n).map(|k| -kd[k % n] * kd[k / n] * hat[k]).collect();
        fft.inverse(&mut b);
        let fxy = b.iter().map(|c| c.re).collect();
        Self { n, l_box, f: values.to_vec(), fx, fy, fxy }
    }

    /// Sampler for the total field (`None`) or component `i`.
    pub fn for_field(field: &VorticityField, component: Option<usize>) -> Self {
        let v = match component {
            None => &field.total,
            Some(i) => &field.components[i],
        };
        Self::new(v, field.n, field.l_box)
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let n = self.n;
        let dx = self.l_box / n as f64;
        let locate = |x: f64| {
            let s = (x + 0.5 * self.l_box) / dx;
            let fl = s.floor();
            let j = (fl as i64).rem_euclid(n as i64) as usize;
            (j, (j + 1) % n, s - fl)
        };
        let (a0, a1, t) = locate(x1);
        let (b0, b1, u) = locate(x2);
        let h = |t: f64| [2.0 * t * t * t - 3.0 * t * t + 1.0, -2.0 * t * t * t + 3.0 * t * t];
        let hd = |t: f64| [t * t * t - 2.0 * t * t + t, t * t * t - t * t];
        let (ht, hdt, hu, hdu) = (h(t), hd(t), h(u), hd(u));
        let mut s = 0.0;
        for (p, &ja) in [a0, a1].iter().enumerate() {
            for (q, &jb) in [b0, b1].iter().enumerate() {
                let k = jb * n + ja;
                s += ht[p] * hu[q] * self.f[k]
                    + hdt[p] * hu[q] * self.fx[k] * dx
                    + ht[p] * hdu[q] * self.fy[k] * dx
                    + hdt[p] * hdu[q] * self.fxy[k] * dx * dx;
            }
        }
        s
    }
}
