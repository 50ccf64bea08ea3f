//! Unified ×2 upsampling: zero-interleave, then convolve with a mode kernel.
//!
//! Writing nearest / bilinear / learned-deconv upsampling as
//! `X_up = ZeroInter(X) ⊗ K_up` exposes their common frequency behaviour:
//! interleaving replicates the input spectrum into a 2×2 tiling, and K_up's
//! own spectrum then weights that tiling. The replicas are what surface as
//! lattice artifacts; K_up decides how much of them survives.

use crate::conv::{conv2_spatial, ConvKernel, Padding};
use crate::dft::{dft2, zero_pad, Spectrum2};
use crate::tensor::{Matrix, Tensor3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum UpsampleMode {
    /// Fixed 2×2 all-ones kernel: exact pixel replication.
    Nearest,
    /// Fixed 3×3 tent kernel [[¼,½,¼],[½,1,½],[¼,½,¼]].
    Bilinear,
    /// Learned kernel, applied the same way (a.k.a. transposed convolution).
    Deconv(ConvKernel),
}

/// The 2×2 all-ones nearest-neighbour kernel.
pub fn nearest_kernel() -> Matrix {
    Matrix::from_vec(2, 2, vec![1.0; 4]).expect("static size")
}

/// The 3×3 bilinear tent kernel.
pub fn bilinear_kernel() -> Matrix {
    Matrix::from_vec(3, 3, vec![0.25, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 0.25])
        .expect("static size")
}

/// Spread a plane to 2H×2W with samples at even coordinates, zeros elsewhere.
pub fn zero_interleave_matrix(x: &Matrix) -> Matrix {
    Matrix::from_fn(2 * x.height(), 2 * x.width(), |y, xx| {
        if y % 2 == 0 && xx % 2 == 0 {
            x[(y / 2, xx / 2)]
        } else {
            0.0
        }
    })
}

/// [`zero_interleave_matrix`] per channel.
pub fn zero_interleave(x: &Tensor3) -> Tensor3 {
    let planes = (0..x.channels()).map(|c| zero_interleave_matrix(&x.channel_matrix(c))).collect();
    Tensor3::from_channels(planes).expect("uniform channel sizes")
}

/// Tile a spectrum into 2M×2N: the exact spectrum of a zero-interleaved field,
/// `F̂(u,v) = F(u mod M, v mod N)`.
pub fn spectrum_repeat(f: &Spectrum2) -> Spectrum2 {
    let (m, n) = (f.height(), f.width());
    let mut out = Spectrum2::zeros(2 * m, 2 * n);
    for u in 0..2 * m {
        for v in 0..2 * n {
            out.set_bin(u, v, f.bin(u % m, v % n));
        }
    }
    out
}

/// ×2 upsample: zero-interleave, then zero-same convolution with the mode's
/// kernel (depthwise for the fixed kernels, full channel mixing for deconv).
pub fn upsample(x: &Tensor3, mode: &UpsampleMode) -> Result<Tensor3> {
    let interleaved = zero_interleave(x);
    match mode {
        UpsampleMode::Nearest => depthwise(&interleaved, &nearest_kernel()),
        UpsampleMode::Bilinear => depthwise(&interleaved, &bilinear_kernel()),
        UpsampleMode::Deconv(kernel) => conv2_spatial(&interleaved, kernel),
    }
}

fn depthwise(x: &Tensor3, taps: &Matrix) -> Result<Tensor3> {
    let kernel = ConvKernel::from_matrix(taps, Padding::Same)?;
    let planes: Result<Vec<Matrix>> = (0..x.channels())
        .map(|c| {
            let plane = Tensor3::from_channels(vec![x.channel_matrix(c)])?;
            Ok(conv2_spatial(&plane, &kernel)?.channel_matrix(0))
        })
        .collect();
    Tensor3::from_channels(planes?)
}

/// Frequency-domain form of [`upsample`] for a single channel under the
/// circular-boundary convention: tile the spectrum, then multiply by the DFT
/// of the zero-padded upsampling kernel (anchored at the origin).
pub fn upsample_spectrum(f: &Spectrum2, k_up: &ConvKernel) -> Result<Spectrum2> {
    if k_up.in_channels() != 1 || k_up.out_channels() != 1 {
        return Err(Error::InvalidArg(format!(
            "upsample_spectrum wants a single-channel kernel, got {}->{}",
            k_up.in_channels(),
            k_up.out_channels()
        )));
    }
    let tiled = spectrum_repeat(f);
    let (m2, n2) = (tiled.height(), tiled.width());
    let k_hat = dft2(&zero_pad(&k_up.taps(0, 0), m2, n2)?)?;
    tiled.mul_elementwise(&k_hat)
}
