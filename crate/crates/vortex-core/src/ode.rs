//! Dormand-Prince 5(4) with continuous output.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseSegment {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for k in 0..out.len() {
            out[k] = r1[k] + th * (r2[k] + th1 * (r3[k] + th * (r4[k] + th1 * r5[k])));
        }
    }

    pub fn eval_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.rcont[0].len()];
        self.eval(t, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, max_steps: 2_000_000, h_min: 1e-14 }
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `observer` sees every accepted step and may stop the integration by returning `false`.
/// Returns the final time reached and the final state.
pub fn dopri5<F, O>(mut f: F, t0: f64, y0: &[f64], t1: f64, tol: Tolerances, mut observer: O) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(&DenseSegment, &[f64]) -> bool,
{
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0.to_vec();
    if span == 0.0 {
        return Ok((t, y));
    }
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    f(t, &y, &mut k[0])?;

    // initial step guess (Hairer & Wanner)
    let sc = |a: f64, b: f64| tol.atol + tol.rtol * a.abs().max(b.abs());
    let d0 = rms((0..n).map(|i| y[i] / sc(y[i], y[i])));
    let d1 = rms((0..n).map(|i| k[0][i] / sc(y[i], y[i])));
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span);
    for i in 0..n {
        ytmp[i] = y[i] + dir * h * k[0][i];
    }
    f(t + dir * h, &ytmp, &mut k[1])?;
    let d2 = rms((0..n).map(|i| (k[1][i] - k[0][i]) / sc(y[i], y[i]))) / h;
    let h1 = if d1.max(d2) <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    h = (100.0 * h).min(h1).min(span);

    let mut steps = 0usize;
    let mut last = false;
    loop {
        if steps >= tol.max_steps {
            return Err(Error::Integration(format!("too many steps ({steps})")));
        }
        steps += 1;
        let remaining = (t1 - t) * dir;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        if h < tol.h_min * span.max(1.0) {
            return Err(Error::Integration(format!("step size underflow at t = {t:e}")));
        }
        let hs = dir * h;
        stage(&mut ytmp, &y, hs, &[(A21, &k[0])]);
        f(t + C2 * hs, &ytmp, &mut k[1])?;
        stage(&mut ytmp, &y, hs, &[(A31, &k[0]), (A32, &k[1])]);
        f(t + C3 * hs, &ytmp, &mut k[2])?;
        stage(&mut ytmp, &y, hs, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
        f(t + C4 * hs, &ytmp, &mut k[3])?;
        stage(&mut ytmp, &y, hs, &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])]);
        f(t + C5 * hs, &ytmp, &mut k[4])?;
        stage(&mut ytmp, &y, hs, &[(A61, &k[0]), (A62, &k[1]), (A63, &k[2]), (A64, &k[3]), (A65, &k[4])]);
        f(t + hs, &ytmp, &mut k[5])?;
        stage(&mut ynew, &y, hs, &[(A71, &k[0]), (A73, &k[2]), (A74, &k[3]), (A75, &k[4]), (A76, &k[5])]);
        let (k_lo, k_hi) = k.split_at_mut(6);
        f(t + hs, &ynew, &mut k_hi[0])?;
        let k7 = &k_hi[0];
        let err = rms((0..n).map(|i| {
            let e = hs
                * (E1 * k_lo[0][i] + E3 * k_lo[2][i] + E4 * k_lo[3][i] + E5 * k_lo[4][i] + E6 * k_lo[5][i] + E7 * k7[i]);
            e / sc(y[i], ynew[i])
        }));
        if !err.is_finite() {
            h *= 0.1;
            last = false;
            continue;
        }
        if err <= 1.0 {
            let mut rc: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k_lo[0][i] - ydiff;
                rc[0][i] = y[i];
                rc[1][i] = ydiff;
                rc[2][i] = bspl;
                rc[3][i] = ydiff - hs * k7[i] - bspl;
                rc[4][i] = hs
                    * (D1 * k_lo[0][i] + D3 * k_lo[2][i] + D4 * k_lo[3][i] + D5 * k_lo[4][i] + D6 * k_lo[5][i]
                        + D7 * k7[i]);
            }
            let seg = DenseSegment { t0: t, h: hs, rcont: rc };
            t = if last { t1 } else { t + hs };
            std::mem::swap(&mut y, &mut ynew);
            let go_on = observer(&seg, &y);
            k.swap(0, 6);
            if last || !go_on {
                return Ok((t, y));
            }
            let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            h *= fac;
        } else {
            last = false;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
}

fn stage(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &Vec<f64>)]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (a, k) in terms {
            acc += a * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for v in it {
        s += v * v;
        n += 1;
    }
    (s / n.max(1) as f64).sqrt()
}
