//! FFT core and Morlet filter banks.
//!
//! Conventions, pinned because cached features depend on them:
//! - forward DFT is unnormalized, the inverse carries `1/N` per axis;
//! - spatial filters are stored in the frequency domain as samples of the
//!   continuous Morlet transform at `omega = 2 pi f / N` rad/sample;
//! - the angular axis carries `L` samples of a circle, convolved cyclically.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::density::DensityGrid;
use crate::error::SignalError;
use crate::scalar::{real, Real};

/// Parameters of a filter bank; `resolution` is the grid exponent J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankParams {
    pub resolution: u32,
    pub angles: usize,
    pub slant: f64,
    pub xi: f64,
}

impl BankParams {
    pub fn new(resolution: u32, angles: usize) -> Self {
        // Defaults from the reference setup: slant 1/2, central frequency
        // 3 pi / 4 rad/sample.
        BankParams { resolution, angles, slant: 0.5, xi: 3.0 * PI / 4.0 }
    }

    /// Number of half-integer scale steps (dilations `2^(s/2)`).
    pub fn scale_count(&self) -> usize {
        2 * self.resolution as usize
    }

    /// Scale label for step `s`, printed as a half-integer.
    pub fn scale_label(&self, s: usize) -> f64 {
        s as f64 / 2.0
    }

    /// Number of angular wavelet scales.
    pub fn angular_scale_count(&self) -> usize {
        self.angles.trailing_zeros() as usize
    }

    pub fn side(&self) -> usize {
        1usize << self.resolution
    }
}

/// Precomputed frequency-domain filters plus cached FFT plans.
pub struct FilterBank<T: Real> {
    pub params: BankParams,
    /// Spatial Morlet filters, frequency domain, indexed `s * L + t` for
    /// scale step `s` and angle index `t` (angle `t * pi / L`).
    pub spatial: Vec<Array2<Complex<T>>>,
    /// Periodized angular Morlet filters, sample domain, length L.
    pub angular: Vec<Vec<Complex<T>>>,
    /// DFTs of the angular filters, for fast circular convolution.
    pub angular_hat: Vec<Vec<Complex<T>>>,
    fft_fwd: Arc<dyn Fft<T>>,
    fft_inv: Arc<dyn Fft<T>>,
    fft_ang_fwd: Arc<dyn Fft<T>>,
    fft_ang_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> FilterBank<T> {
    /// Build the full bank: `2J * L` spatial filters and `log2 L` angular
    /// filters.
    pub fn new(params: BankParams) -> Result<Self, SignalError> {
        if !params.angles.is_power_of_two() || params.angles < 2 {
            return Err(SignalError::NotPowerOfTwo(params.angles));
        }
        if params.resolution < 2 {
            return Err(SignalError::NotPowerOfTwo(1));
        }
        let mut planner = FftPlanner::new();
        let n = params.side();
        let l = params.angles;
        let bank = FilterBank {
            spatial: make_spatial_bank(&params),
            angular: make_angular_bank(l),
            angular_hat: Vec::new(),
            fft_fwd: planner.plan_fft(n, FftDirection::Forward),
            fft_inv: planner.plan_fft(n, FftDirection::Inverse),
            fft_ang_fwd: planner.plan_fft(l, FftDirection::Forward),
            fft_ang_inv: planner.plan_fft(l, FftDirection::Inverse),
            params,
        };
        let mut bank = bank;
        bank.angular_hat = bank
            .angular
            .iter()
            .map(|h| {
                let mut buf = h.clone();
                bank.fft_ang_fwd.process(&mut buf);
                buf
            })
            .collect();
        Ok(bank)
    }

    pub fn spatial_filter(&self, scale_step: usize, angle: usize) -> &Array2<Complex<T>> {
        &self.spatial[scale_step * self.params.angles + angle]
    }

    /// Forward 2D FFT using the bank's cached plan.
    pub fn fft2(&self, g: &Array2<Complex<T>>) -> Result<Array2<Complex<T>>, SignalError> {
        let mut out = g.clone();
        self.check(g.nrows())?;
        fft2_inplace(&mut out, &self.fft_fwd);
        Ok(out)
    }

    pub fn ifft2(&self, g: &Array2<Complex<T>>) -> Result<Array2<Complex<T>>, SignalError> {
        let mut out = g.clone();
        self.check(g.nrows())?;
        ifft2_inplace(&mut out, &self.fft_inv);
        Ok(out)
    }

    fn check(&self, side: usize) -> Result<(), SignalError> {
        if side != self.params.side() {
            return Err(SignalError::SizeMismatch { grid: side, bank: self.params.side() });
        }
        Ok(())
    }

    /// Wavelet transform: one complex slice `ifft2(fft2(g) * psi_hat)` per
    /// (scale step, angle), circular convolution on the torus. Slices are
    /// indexed `s * L + t`, matching `spatial`.
    pub fn wavelet_transform(
        &self,
        g: &DensityGrid<T>,
    ) -> Result<Vec<Array2<Complex<T>>>, SignalError> {
        let n = g.side();
        self.check(n)?;
        let spectrum = self.fft2(&to_complex(&g.values))?;
        Ok(self
            .spatial
            .iter()
            .map(|f| self.convolve_spectrum(&spectrum, f))
            .collect())
    }

    /// `ifft2(spectrum * filter)` for a precomputed spectrum.
    pub fn convolve_spectrum(
        &self,
        spectrum: &Array2<Complex<T>>,
        filter: &Array2<Complex<T>>,
    ) -> Array2<Complex<T>> {
        let mut prod = spectrum * filter;
        ifft2_inplace(&mut prod, &self.fft_inv);
        prod
    }

    /// Circular convolution of a length-L fiber with angular filter `ell2`,
    /// in place, via the length-L FFT.
    pub fn convolve_angle_fiber(&self, fiber: &mut [Complex<T>], ell2: usize) {
        debug_assert_eq!(fiber.len(), self.params.angles);
        self.fft_ang_fwd.process(fiber);
        for (x, h) in fiber.iter_mut().zip(&self.angular_hat[ell2]) {
            *x = *x * *h;
        }
        self.fft_ang_inv.process(fiber);
        let inv_l = real::<T>(1.0 / self.params.angles as f64);
        for x in fiber.iter_mut() {
            *x = x.scale(inv_l);
        }
    }

    /// Circular convolution along the angular axis of a `(L, n)` array
    /// (angle-major), per column fiber.
    pub fn circular_convolve_angle(
        &self,
        stack: &Array2<Complex<T>>,
        ell2: usize,
    ) -> Result<Array2<Complex<T>>, SignalError> {
        let l = self.params.angles;
        if stack.nrows() != l {
            return Err(SignalError::AngleMismatch { axis: stack.nrows(), bank: l });
        }
        let cols = stack.ncols();
        let mut out = stack.clone();
        let mut fiber = vec![Complex::new(T::zero(), T::zero()); l];
        for c in 0..cols {
            for a in 0..l {
                fiber[a] = out[[a, c]];
            }
            self.convolve_angle_fiber(&mut fiber, ell2);
            for a in 0..l {
                out[[a, c]] = fiber[a];
            }
        }
        Ok(out)
    }
}

pub fn to_complex<T: Real>(g: &Array2<T>) -> Array2<Complex<T>> {
    g.mapv(|v| Complex::new(v, T::zero()))
}

/// Forward 2D FFT (unnormalized), standalone planner.
pub fn fft2<T: Real>(g: &Array2<Complex<T>>) -> Result<Array2<Complex<T>>, SignalError> {
    let n = g.nrows();
    if !n.is_power_of_two() || g.ncols() != n {
        return Err(SignalError::NotPowerOfTwo(n.max(g.ncols())));
    }
    let mut out = g.clone();
    let fft = FftPlanner::new().plan_fft(n, FftDirection::Forward);
    fft2_inplace(&mut out, &fft);
    Ok(out)
}

/// Inverse 2D FFT with the `1/N^2` normalization.
pub fn ifft2<T: Real>(g: &Array2<Complex<T>>) -> Result<Array2<Complex<T>>, SignalError> {
    let n = g.nrows();
    if !n.is_power_of_two() || g.ncols() != n {
        return Err(SignalError::NotPowerOfTwo(n.max(g.ncols())));
    }
    let mut out = g.clone();
    let fft = FftPlanner::new().plan_fft(n, FftDirection::Inverse);
    ifft2_inplace(&mut out, &fft);
    Ok(out)
}

fn fft2_inplace<T: Real>(a: &mut Array2<Complex<T>>, fft: &Arc<dyn Fft<T>>) {
    for mut row in a.rows_mut() {
        fft.process(row.as_slice_mut().expect("contiguous row"));
    }
    let mut t = a.t().as_standard_layout().into_owned();
    for mut row in t.rows_mut() {
        fft.process(row.as_slice_mut().expect("contiguous row"));
    }
    *a = t.t().as_standard_layout().into_owned();
}

fn ifft2_inplace<T: Real>(a: &mut Array2<Complex<T>>, fft: &Arc<dyn Fft<T>>) {
    fft2_inplace(a, fft);
    let scale = real::<T>(1.0 / (a.len() as f64));
    a.mapv_inplace(|v| v.scale(scale));
}

/// Continuous-domain Fourier transform of the 2D Morlet wavelet
/// `psi(u) = exp(-(u1^2 + u2^2/zeta^2)/2) (exp(i xi u1) - C)` with
/// `C = exp(-xi^2/2)` forced by the zero-mean condition.
fn morlet_hat(omega1: f64, omega2: f64, slant: f64, xi: f64) -> f64 {
    let c = (-xi * xi / 2.0).exp();
    let envelope = |w1: f64| (-((w1 * w1) + slant * slant * omega2 * omega2) / 2.0).exp();
    2.0 * PI * slant * (envelope(omega1 - xi) - c * envelope(omega1))
}

/// Zero-mean constant of the Morlet wavelet for central frequency `xi`.
pub fn morlet_zero_mean_constant(xi: f64) -> f64 {
    (-xi * xi / 2.0).exp()
}

/// Frequency-domain spatial filters `psi_hat(2^(s/2) r_{-theta} omega)` on
/// the `2^J` grid: scale steps `s = 0..2J`, angles `theta = t pi / L`.
pub fn make_spatial_bank<T: Real>(params: &BankParams) -> Vec<Array2<Complex<T>>> {
    let l = params.angles;
    let mut filters = Vec::with_capacity(params.scale_count() * l);
    for s in 0..params.scale_count() {
        for t in 0..l {
            let theta = t as f64 * PI / l as f64;
            filters.push(spatial_filter_at(params, s, theta));
        }
    }
    filters
}

/// Single frequency-domain Morlet filter at scale step `s` and angle
/// `theta` (radians).
pub fn spatial_filter_at<T: Real>(params: &BankParams, s: usize, theta: f64) -> Array2<Complex<T>> {
    let n = params.side();
    let dilation = 2f64.powf(s as f64 / 2.0);
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    // The Nyquist bin aliases both +pi and -pi rad/sample; averaging the two
    // evaluations keeps the sampled filter exactly conjugate-symmetric.
    let freqs = |i: usize| -> Vec<f64> {
        if 2 * i == n {
            vec![-PI, PI]
        } else {
            vec![2.0 * PI * signed_freq(i, n) / n as f64]
        }
    };
    let mut f = Array2::zeros((n, n));
    for ix in 0..n {
        let wxs = freqs(ix);
        for iy in 0..n {
            let wys = freqs(iy);
            let mut v = 0.0;
            for &wx in &wxs {
                for &wy in &wys {
                    // r_{-theta} omega
                    let w1 = cos_t * wx + sin_t * wy;
                    let w2 = -sin_t * wx + cos_t * wy;
                    v += morlet_hat(dilation * w1, dilation * w2, params.slant, params.xi);
                }
            }
            v /= (wxs.len() * wys.len()) as f64;
            f[[ix, iy]] = Complex::new(real::<T>(v), T::zero());
        }
    }
    f
}

/// Direct O(L^2) circular convolution; independent oracle for the FFT path.
pub fn circular_convolve_direct<T: Real>(x: &[Complex<T>], h: &[Complex<T>]) -> Vec<Complex<T>> {
    let l = x.len();
    debug_assert_eq!(h.len(), l);
    (0..l)
        .map(|n| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for m in 0..l {
                acc = acc + x[m] * h[(n + l - m) % l];
            }
            acc
        })
        .collect()
}

fn signed_freq(i: usize, n: usize) -> f64 {
    if i < n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Central frequency of the 1D angular Morlet.
pub const ANGULAR_XI: f64 = 3.0 * PI / 4.0;

/// Terms of the periodization sum smaller than this are dropped.
const PERIODIZATION_EPS: f64 = 1e-12;

fn morlet_1d(t: f64, xi: f64) -> Complex<f64> {
    let c = (-xi * xi / 2.0).exp();
    let env = (-t * t / 2.0).exp();
    Complex::new(env * ((xi * t).cos() - c), env * (xi * t).sin())
}

/// Periodized dilated 1D Morlet wavelets sampled on the L-point circle,
/// for angular scales `ell2 = 0 .. log2(L) - 1`.
pub fn make_angular_bank<T: Real>(l: usize) -> Vec<Vec<Complex<T>>> {
    let n_scales = l.trailing_zeros() as usize;
    (0..n_scales).map(|ell2| sample_angular_filter(l, ell2, PERIODIZATION_EPS)).collect()
}

/// One periodized angular filter; the `k` sum is truncated once terms drop
/// below `eps` in magnitude.
pub fn sample_angular_filter<T: Real>(l: usize, ell2: usize, eps: f64) -> Vec<Complex<T>> {
    let scale = 2f64.powi(ell2 as i32);
    let mut out = Vec::with_capacity(l);
    for m in 0..l {
        let theta = 2.0 * PI * m as f64 / l as f64;
        let mut acc = Complex::new(0.0f64, 0.0);
        // k = 0 term plus symmetric tails until they fall below eps.
        acc += morlet_1d(theta / scale, ANGULAR_XI) / scale;
        for k in 1..1000 {
            let plus = morlet_1d((theta - 2.0 * PI * k as f64) / scale, ANGULAR_XI) / scale;
            let minus = morlet_1d((theta + 2.0 * PI * k as f64) / scale, ANGULAR_XI) / scale;
            acc += plus + minus;
            if plus.norm() < eps && minus.norm() < eps {
                break;
            }
        }
        out.push(Complex::new(real::<T>(acc.re), real::<T>(acc.im)));
    }
    out
}
