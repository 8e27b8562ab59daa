use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Trigonometric interpolant of uniformly sampled periodic data.
#[derive(Debug, Clone)]
pub struct PeriodicSeries {
    period: f64,
    /// Normalised DFT coefficients `c_k = (1/N) sum_j f_j exp(-2 pi i jk/N)`.
    coef: Vec<Complex64>,
}

impl PeriodicSeries {
    pub fn from_samples(samples: &[f64], period: f64) -> Self {
        let n = samples.len();
        assert!(n >= 3, "need at least three samples");
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        for c in &mut buf {
            *c *= scale;
        }
        PeriodicSeries { period, coef: buf }
    }

    pub fn len(&self) -> usize {
        self.coef.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coef.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn mean(&self) -> f64 {
        self.coef[0].re
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_deriv(x, 0)
    }

    /// Derivative of the given order of the interpolant at `x`.
    pub fn eval_deriv(&self, x: f64, order: u32) -> f64 {
        let n = self.coef.len();
        let w = 2.0 * PI / self.period;
        let rot = Complex64::from_polar(1.0, order as f64 * PI / 2.0);
        let step = Complex64::from_polar(1.0, w * x);
        let mut z = step;
        let mut acc = if order == 0 { self.coef[0].re } else { 0.0 };
        for k in 1..=(n - 1) / 2 {
            let a = (w * k as f64).powi(order as i32);
            acc += 2.0 * a * (self.coef[k] * z * rot).re;
            z *= step;
        }
        if n % 2 == 0 {
            let k = n / 2;
            let a = w * k as f64;
            acc += self.coef[k].re * a.powi(order as i32) * (a * x + order as f64 * PI / 2.0).cos();
        }
        acc
    }

    /// `int_0^x f`.
    pub fn integral(&self, x: f64) -> f64 {
        let n = self.coef.len();
        let w = 2.0 * PI / self.period;
        let mut acc = self.coef[0].re * x;
        let step = Complex64::from_polar(1.0, w * x);
        let mut z = step;
        for k in 1..=(n - 1) / 2 {
            let wk = w * k as f64;
            acc += 2.0 * (self.coef[k] * (z - 1.0) / Complex64::new(0.0, wk)).re;
            z *= step;
        }
        if n % 2 == 0 {
            let a = w * (n / 2) as f64;
            acc += self.coef[n / 2].re * (a * x).sin() / a;
        }
        acc
    }

    /// Derivative samples at the original grid, by FFT.
    pub fn derivative_samples(&self, order: u32) -> Vec<f64> {
        let n = self.coef.len();
        let w = 2.0 * PI / self.period;
        let mut buf: Vec<Complex64> = self
            .coef
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if n % 2 == 0 && k == n / 2 {
                    if order % 2 == 1 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let sign = if (order / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    return c * sign * (w * k as f64).powi(order as i32);
                }
                let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                c * Complex64::new(0.0, w * m).powu(order)
            })
            .collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize) -> PeriodicSeries {
        let p = 3.0;
        let f = |x: f64| (2.0 * PI * x / p).sin() + 0.5 * (6.0 * PI * x / p).cos();
        PeriodicSeries::from_samples(&(0..n).map(|j| f(p * j as f64 / n as f64)).collect::<Vec<_>>(), p)
    }

    #[test]
    fn interpolates_band_limited_data() {
        let s = series(16);
        let w = 2.0 * PI / 3.0;
        for x in [0.1, 0.77, 2.9] {
            let exact = (w * x).sin() + 0.5 * (3.0 * w * x).cos();
            assert!((s.eval(x) - exact).abs() < 1e-13);
            let d = w * (w * x).cos() - 1.5 * w * (3.0 * w * x).sin();
            assert!((s.eval_deriv(x, 1) - d).abs() < 1e-12);
            let i = (1.0 - (w * x).cos()) / w + 0.5 * (3.0 * w * x).sin() / (3.0 * w);
            assert!((s.integral(x) - i).abs() < 1e-13);
        }
        let d2 = s.derivative_samples(2);
        for (j, v) in d2.iter().enumerate() {
            let x = 3.0 * j as f64 / 16.0;
            let exact = -w * w * (w * x).sin() - 4.5 * w * w * (3.0 * w * x).cos();
            assert!((v - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn odd_length() {
        let s = series(15);
        let w = 2.0 * PI / 3.0;
        assert!((s.eval(1.3) - ((w * 1.3).sin() + 0.5 * (3.0 * w * 1.3).cos())).abs() < 1e-13);
    }
}
