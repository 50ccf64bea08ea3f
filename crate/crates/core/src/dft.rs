//! 2D discrete Fourier transform and spectrum utilities.
//!
//! Convention used everywhere in this crate: the forward transform is
//! unnormalized,
//!
//! ```text
//! F(u,v) = sum_x sum_y f(x,y) · exp(-i·2π·(u·x/M + v·y/N))
//! ```
//!
//! and the inverse carries the full 1/(M·N) factor. Spectra are stored
//! unshifted (DC at bin (0,0)); [`fftshift`] exists for display only and no
//! analysis code calls it.

use num_complex::Complex64;

use crate::rng::Pcg32;
use crate::tensor::Matrix;
use crate::{Error, Result};

/// Complex spectrum of an M×N real or complex field, unshifted.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2 {
    height: usize,
    width: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Spectrum2 {
    pub fn zeros(height: usize, width: usize) -> Self {
        Spectrum2 { height, width, re: vec![0.0; height * width], im: vec![0.0; height * width] }
    }

    pub fn from_bins(height: usize, width: usize, bins: &[Complex64]) -> Result<Self> {
        if bins.len() != height * width {
            return Err(Error::DimMismatch(format!(
                "spectrum {}x{} needs {} bins, got {}",
                height,
                width,
                height * width,
                bins.len()
            )));
        }
        Ok(Spectrum2 {
            height,
            width,
            re: bins.iter().map(|c| c.re).collect(),
            im: bins.iter().map(|c| c.im).collect(),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bin(&self, u: usize, v: usize) -> Complex64 {
        let i = u * self.width + v;
        Complex64::new(self.re[i], self.im[i])
    }

    pub fn set_bin(&mut self, u: usize, v: usize, value: Complex64) {
        let i = u * self.width + v;
        self.re[i] = value.re;
        self.im[i] = value.im;
    }

    pub fn bins(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.re.iter().zip(&self.im).map(|(&r, &i)| Complex64::new(r, i))
    }

    pub fn to_bins(&self) -> Vec<Complex64> {
        self.bins().collect()
    }

    pub fn map_bins(&self, f: impl Fn(Complex64) -> Complex64) -> Spectrum2 {
        let mapped: Vec<Complex64> = self.bins().map(f).collect();
        Spectrum2::from_bins(self.height, self.width, &mapped).expect("same size")
    }

    /// Bin-wise product; the frequency-domain face of circular convolution.
    pub fn mul_elementwise(&self, other: &Spectrum2) -> Result<Spectrum2> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::DimMismatch(format!(
                "spectra {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        let bins: Vec<Complex64> =
            self.bins().zip(other.bins()).map(|(a, b)| a * b).collect();
        Spectrum2::from_bins(self.height, self.width, &bins)
    }

    pub fn add(&self, other: &Spectrum2) -> Result<Spectrum2> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::DimMismatch(format!(
                "spectra {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        let bins: Vec<Complex64> =
            self.bins().zip(other.bins()).map(|(a, b)| a + b).collect();
        Spectrum2::from_bins(self.height, self.width, &bins)
    }

    pub fn scale(&self, s: f64) -> Spectrum2 {
        self.map_bins(|c| c * s)
    }

    pub fn magnitude(&self) -> Matrix {
        Matrix::from_vec(
            self.height,
            self.width,
            self.bins().map(|c| c.norm()).collect(),
        )
        .expect("sizes agree")
    }

    /// log(1 + |F|) per bin; compresses dynamic range monotonically.
    pub fn log_magnitude(&self) -> Matrix {
        Matrix::from_vec(
            self.height,
            self.width,
            self.bins().map(|c| c.norm().ln_1p()).collect(),
        )
        .expect("sizes agree")
    }

    pub fn all_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }
}

/// Forward 2D DFT of a real matrix (unnormalized).
pub fn dft2(x: &Matrix) -> Result<Spectrum2> {
    if x.is_empty() {
        return Err(Error::EmptyInput("dft2 on a 0-sized matrix"));
    }
    let (m, n) = (x.height(), x.width());
    let mut grid: Vec<Complex64> = x.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform2(&mut grid, m, n, false);
    Spectrum2::from_bins(m, n, &grid)
}

/// Inverse 2D DFT, real part only. See [`idft2_residue`] when the imaginary
/// leftover matters.
pub fn idft2(f: &Spectrum2) -> Result<Matrix> {
    idft2_residue(f).map(|(real, _)| real)
}

/// Inverse 2D DFT returning the real part together with the largest absolute
/// imaginary component (which must vanish for spectra of real fields).
pub fn idft2_residue(f: &Spectrum2) -> Result<(Matrix, f64)> {
    if f.height == 0 || f.width == 0 {
        return Err(Error::EmptyInput("idft2 on a 0-sized spectrum"));
    }
    if !f.all_finite() {
        return Err(Error::InvalidArg("idft2 on a non-finite spectrum".into()));
    }
    let (m, n) = (f.height, f.width);
    let mut grid = f.to_bins();
    transform2(&mut grid, m, n, true);
    let scale = 1.0 / (m * n) as f64;
    let mut residue = 0.0f64;
    let real: Vec<f64> = grid
        .iter()
        .map(|c| {
            residue = residue.max((c.im * scale).abs());
            c.re * scale
        })
        .collect();
    Ok((Matrix::from_vec(m, n, real)?, residue))
}

/// Row-column 2D transform, in place, unnormalized in both directions.
fn transform2(grid: &mut [Complex64], m: usize, n: usize, inverse: bool) {
    let mut row_buf = vec![Complex64::new(0.0, 0.0); n];
    for y in 0..m {
        row_buf.copy_from_slice(&grid[y * n..(y + 1) * n]);
        dft1d(&mut row_buf, inverse);
        grid[y * n..(y + 1) * n].copy_from_slice(&row_buf);
    }
    let mut col_buf = vec![Complex64::new(0.0, 0.0); m];
    for v in 0..n {
        for u in 0..m {
            col_buf[u] = grid[u * n + v];
        }
        dft1d(&mut col_buf, inverse);
        for u in 0..m {
            grid[u * n + v] = col_buf[u];
        }
    }
}

/// 1D DFT, unnormalized. Radix-2 when the length allows, direct O(n²)
/// otherwise — padded sizes like 130 land on the direct path and stay exact.
fn dft1d(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        fft_radix2(buf, inverse);
    } else {
        let out = dft_direct(buf, inverse);
        buf.copy_from_slice(&out);
    }
}

fn fft_radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let ang = sign * std::f64::consts::TAU / len as f64;
        let twiddle: Vec<Complex64> =
            (0..half).map(|k| Complex64::from_polar(1.0, ang * k as f64)).collect();
        for chunk in buf.chunks_mut(len) {
            for k in 0..half {
                let a = chunk[k];
                let b = chunk[k + half] * twiddle[k];
                chunk[k] = a + b;
                chunk[k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

fn dft_direct(buf: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = buf.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let step = sign * std::f64::consts::TAU / n as f64;
    let twiddle: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, step * k as f64)).collect();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &x) in buf.iter().enumerate() {
                acc += x * twiddle[(j * k) % n];
            }
            acc
        })
        .collect()
}

/// Display-only quadrant swap putting DC at the center:
/// `out[j] = in[(j + ⌈M/2⌉) mod M]` along each axis.
pub fn fftshift(m: &Matrix) -> Matrix {
    let (h, w) = (m.height(), m.width());
    let (dy, dx) = (h.div_ceil(2), w.div_ceil(2));
    Matrix::from_fn(h, w, |y, x| m[((y + dy) % h, (x + dx) % w)])
}

/// Embed `x` at the top-left of an all-zero H′×W′ matrix.
pub fn zero_pad(x: &Matrix, height: usize, width: usize) -> Result<Matrix> {
    if height < x.height() || width < x.width() {
        return Err(Error::InvalidArg(format!(
            "zero_pad target {}x{} smaller than source {}x{}",
            height,
            width,
            x.height(),
            x.width()
        )));
    }
    Ok(Matrix::from_fn(height, width, |y, x_| {
        if y < x.height() && x_ < x.width() {
            x[(y, x_)]
        } else {
            0.0
        }
    }))
}

/// Signed min-image frequency of bin `u` on an axis of length `m`
/// (cycles per image, in -m/2..=m/2).
pub fn min_image_freq(u: usize, m: usize) -> isize {
    let u = u as isize;
    let m = m as isize;
    if u <= m / 2 {
        u
    } else {
        u - m
    }
}

/// Amplitude envelope 1/(|f_x|^a + |f_y|^b) over min-image frequencies,
/// zero at DC where the denominator vanishes.
fn power_law_envelope(height: usize, width: usize, a: f64, b: f64) -> Matrix {
    Matrix::from_fn(height, width, |u, v| {
        let fy = min_image_freq(u, height).unsigned_abs() as f64;
        let fx = min_image_freq(v, width).unsigned_abs() as f64;
        let denom = fx.powf(a) + fy.powf(b);
        if denom == 0.0 {
            0.0
        } else {
            1.0 / denom
        }
    })
}

/// Synthesize a natural-image stand-in: a power-law amplitude envelope with
/// random phases, inverse-transformed and min-max scaled to [0, 1].
///
/// The envelope is exact (only phases are random); conjugate symmetry is
/// enforced so the spatial field is real. Self-conjugate bins (DC, Nyquist
/// corners) take the envelope value with zero phase.
pub fn power_law_image(height: usize, width: usize, a: f64, b: f64, rng: &mut Pcg32) -> Result<Matrix> {
    if height == 0 || width == 0 {
        return Err(Error::EmptyInput("power_law_image with 0 size"));
    }
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::InvalidArg(format!("power-law exponents must be positive, got a={a}, b={b}")));
    }
    let env = power_law_envelope(height, width, a, b);
    let mut spec = Spectrum2::zeros(height, width);
    for u in 0..height {
        for v in 0..width {
            let (pu, pv) = ((height - u) % height, (width - v) % width);
            if (pu, pv) == (u, v) {
                spec.set_bin(u, v, Complex64::new(env[(u, v)], 0.0));
            } else if (u, v) < (pu, pv) {
                let phase = rng.uniform(0.0, std::f64::consts::TAU);
                let val = Complex64::from_polar(env[(u, v)], phase);
                spec.set_bin(u, v, val);
                spec.set_bin(pu, pv, val.conj());
            }
        }
    }
    let (img, _) = idft2_residue(&spec)?;
    let lo = img.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = img.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-300 {
        return Ok(Matrix::zeros(height, width));
    }
    Ok(img.map(|v| (v - lo) / (hi - lo)))
}
