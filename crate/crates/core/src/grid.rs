//! Periodic grid and spectral helpers built on rustfft.
//!
//! Fields live on a uniform grid of a power-of-two number of points over
//! [0, L). Spectra use the usual FFT ordering k_m = 2 pi m / L for
//! m = 0..N/2-1 followed by the negative wavenumbers. Nonlinear products
//! are dealiased by the 2/3 rule: the top third of modes is zeroed.

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub type C = Complex<f64>;

#[derive(Clone)]
pub struct Grid {
    pub l: f64,
    pub n: usize,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    /// 2/3-rule mask: true where the mode is kept.
    pub dealias: Vec<bool>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("l", &self.l)
            .field("n", &self.n)
            .finish()
    }
}

impl Grid {
    pub fn new(l: f64, n: usize) -> Self {
        assert!(n.is_power_of_two(), "point count must be a power of two");
        assert!(l > 0.0);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let x: Vec<f64> = (0..n).map(|j| l * j as f64 / n as f64).collect();
        let k: Vec<f64> = (0..n)
            .map(|m| {
                let mm = if m <= n / 2 {
                    m as isize
                } else {
                    m as isize - n as isize
                };
                2.0 * std::f64::consts::PI * mm as f64 / l
            })
            .collect();
        let cut = n / 3;
        let dealias: Vec<bool> = (0..n)
            .map(|m| {
                let mm = if m <= n / 2 { m } else { n - m };
                mm <= cut
            })
            .collect();
        Grid {
            l,
            n,
            x,
            k,
            dealias,
            fwd,
            inv,
        }
    }

    pub fn dx(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Forward transform, normalized so that coefficients are Fourier-series
    /// coefficients: u(x) = sum_m uhat_m e^{i k_m x}.
    pub fn fft(&self, u: &[C]) -> Vec<C> {
        let mut buf = u.to_vec();
        self.fwd.process(&mut buf);
        let s = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
        buf
    }

    pub fn fft_real(&self, u: &[f64]) -> Vec<C> {
        let buf: Vec<C> = u.iter().map(|&v| C::new(v, 0.0)).collect();
        self.fft(&buf)
    }

    /// Inverse transform of series coefficients to grid samples.
    pub fn ifft(&self, uhat: &[C]) -> Vec<C> {
        let mut buf = uhat.to_vec();
        self.inv.process(&mut buf);
        buf
    }

    /// Inverse transform returning the real part; `max_imag` diagnostics are
    /// up to the caller via [`Grid::ifft`].
    pub fn ifft_real(&self, uhat: &[C]) -> Vec<f64> {
        self.ifft(uhat).iter().map(|v| v.re).collect()
    }

    /// Spectral n-th derivative of real grid samples.
    pub fn deriv(&self, u: &[f64], order: u32) -> Vec<f64> {
        let mut uhat = self.fft_real(u);
        self.deriv_spec_inplace(&mut uhat, order);
        self.ifft_real(&uhat)
    }

    /// Multiply coefficients by (ik)^order in place. The Nyquist mode is
    /// zeroed for odd orders (its derivative has no consistent sign).
    pub fn deriv_spec_inplace(&self, uhat: &mut [C], order: u32) {
        for (m, v) in uhat.iter_mut().enumerate() {
            let ik = C::new(0.0, self.k[m]);
            *v *= ik.powu(order);
        }
        if order % 2 == 1 {
            uhat[self.n / 2] = C::new(0.0, 0.0);
        }
    }

    pub fn dealias_inplace(&self, uhat: &mut [C]) {
        for (m, v) in uhat.iter_mut().enumerate() {
            if !self.dealias[m] {
                *v = C::new(0.0, 0.0);
            }
        }
    }

    /// Enforce the Hermitian symmetry uhat[-m] = conj(uhat[m]) from the
    /// lower half; keeps inverse transforms of stepped spectra real.
    pub fn hermitize(&self, uhat: &mut [C]) {
        let n = self.n;
        uhat[0] = C::new(uhat[0].re, 0.0);
        uhat[n / 2] = C::new(uhat[n / 2].re, 0.0);
        for m in 1..n / 2 {
            uhat[n - m] = uhat[m].conj();
        }
    }

    /// Sup over the grid; returns infinity when any sample is non-finite
    /// so that divergence guards trip on NaN.
    pub fn sup_norm(u: &[f64]) -> f64 {
        u.iter().fold(0.0f64, |a, &v| {
            if v.is_finite() {
                a.max(v.abs())
            } else {
                f64::INFINITY
            }
        })
    }

    pub fn mean(u: &[f64]) -> f64 {
        u.iter().sum::<f64>() / u.len() as f64
    }

    /// Trapezoid L^p norm on the periodic grid (exact for the sup: p = inf
    /// is not handled here, use `sup_norm`).
    pub fn lp_norm(&self, u: &[f64], p: f64) -> f64 {
        let dx = self.dx();
        let s: f64 = u.iter().map(|&v| v.abs().powf(p)).sum();
        (s * dx).powf(1.0 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_roundtrip_and_derivative() {
        let g = Grid::new(2.0 * std::f64::consts::PI, 64);
        let u: Vec<f64> =
            g.x.iter()
                .map(|&x| (3.0 * x).sin() + 0.5 * (x).cos())
                .collect();
        let uhat = g.fft_real(&u);
        let back = g.ifft_real(&uhat);
        for (a, b) in u.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let du = g.deriv(&u, 1);
        for (j, &x) in g.x.iter().enumerate() {
            let want = 3.0 * (3.0 * x).cos() - 0.5 * x.sin();
            assert!((du[j] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn wavenumber_layout() {
        let g = Grid::new(4.0 * std::f64::consts::PI, 8);
        assert_eq!(g.k[0], 0.0);
        assert!((g.k[1] - 0.5).abs() < 1e-15);
        assert!((g.k[7] + 0.5).abs() < 1e-15);
        // Nyquist at index n/2.
        assert!((g.k[4].abs() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dealias_mask_covers_top_third() {
        let g = Grid::new(1.0, 64);
        let kept = g.dealias.iter().filter(|&&b| b).count();
        // Modes |m| <= 21 kept: 21*2 + 1 (zero) + ... index 43..=63 mirror.
        assert_eq!(kept, 43);
        assert!(g.dealias[21]);
        assert!(!g.dealias[22]);
        assert!(!g.dealias[32]);
        assert!(g.dealias[64 - 21]);
    }

    #[test]
    fn hermitize_yields_real_ifft() {
        let g = Grid::new(10.0, 32);
        let mut uhat: Vec<C> = (0..32)
            .map(|m| C::new((m as f64 * 0.37).sin(), (m as f64 * 0.91).cos()))
            .collect();
        g.hermitize(&mut uhat);
        let u = g.ifft(&uhat);
        for v in u {
            assert!(v.im.abs() < 1e-12);
        }
    }
}
