//! Multi-channel 2D convolution, in the spatial domain and via the DFT.
//!
//! Convolution here is true convolution (kernel flipped), because that is the
//! operation the convolution theorem speaks about. Trained kernels don't care
//! about the flip; the equivalence tests do. Output channel j is
//! `O_j = Σ_i X_i ⊗ K_{i,j}`.

use crate::dft::{dft2, idft2, zero_pad, Spectrum2};
use crate::tensor::{Matrix, Tensor3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Padding {
    /// Zero-padded, output keeps the input size; the crop offset is
    /// ⌊(k−1)/2⌋, which also anchors even-sized upsampling kernels.
    Same,
    /// No padding, output shrinks to (H−k+1)×(W−k+1).
    Valid,
}

/// Dense k×k kernel bank, weights indexed `[in][out][ky][kx]`.
///
/// Any k ≥ 1 is accepted here: the fixed 2×2 nearest-upsampling kernel needs
/// an even size. Network-facing layers and the architecture DSL restrict
/// their kernels to odd k.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConvKernel {
    in_channels: usize,
    out_channels: usize,
    k: usize,
    weights: Vec<f64>,
    pub padding: Padding,
}

impl ConvKernel {
    pub fn zeros(in_channels: usize, out_channels: usize, k: usize, padding: Padding) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || k == 0 {
            return Err(Error::InvalidArg(format!(
                "kernel dims must be positive, got {in_channels}->{out_channels} k={k}"
            )));
        }
        Ok(ConvKernel {
            in_channels,
            out_channels,
            k,
            weights: vec![0.0; in_channels * out_channels * k * k],
            padding,
        })
    }

    pub fn from_weights(
        in_channels: usize,
        out_channels: usize,
        k: usize,
        padding: Padding,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let mut kernel = ConvKernel::zeros(in_channels, out_channels, k, padding)?;
        if weights.len() != kernel.weights.len() {
            return Err(Error::DimMismatch(format!(
                "kernel needs {} weights, got {}",
                kernel.weights.len(),
                weights.len()
            )));
        }
        kernel.weights = weights;
        Ok(kernel)
    }

    /// Single-channel kernel from a square matrix of taps.
    pub fn from_matrix(taps: &Matrix, padding: Padding) -> Result<Self> {
        if taps.height() != taps.width() {
            return Err(Error::InvalidArg("kernel taps must be square".into()));
        }
        ConvKernel::from_weights(1, 1, taps.height(), padding, taps.as_slice().to_vec())
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn size(&self) -> usize {
        self.k
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, a: usize, b: usize) -> usize {
        ((i * self.out_channels + j) * self.k + a) * self.k + b
    }

    #[inline]
    pub fn w(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.weights[self.idx(i, j, a, b)]
    }

    #[inline]
    pub fn w_mut(&mut self, i: usize, j: usize, a: usize, b: usize) -> &mut f64 {
        let idx = self.idx(i, j, a, b);
        &mut self.weights[idx]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Taps of the (i,j) channel pair as a k×k matrix.
    pub fn taps(&self, i: usize, j: usize) -> Matrix {
        Matrix::from_fn(self.k, self.k, |a, b| self.w(i, j, a, b))
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|v| v.is_finite())
    }
}

fn check_match(x: &Tensor3, kernel: &ConvKernel) -> Result<()> {
    if x.channels() != kernel.in_channels {
        return Err(Error::DimMismatch(format!(
            "input has {} channels, kernel expects {}",
            x.channels(),
            kernel.in_channels
        )));
    }
    if kernel.padding == Padding::Valid && (kernel.k > x.height() || kernel.k > x.width()) {
        return Err(Error::InvalidArg(format!(
            "kernel {}x{} larger than input {}x{}",
            kernel.k,
            kernel.k,
            x.height(),
            x.width()
        )));
    }
    Ok(())
}

/// Stride-1 true convolution in the spatial domain.
pub fn conv2_spatial(x: &Tensor3, kernel: &ConvKernel) -> Result<Tensor3> {
    check_match(x, kernel)?;
    let k = kernel.k;
    let (h, w) = (x.height(), x.width());
    let (out_h, out_w, base) = match kernel.padding {
        Padding::Same => (h, w, ((k - 1) / 2) as isize),
        Padding::Valid => (h - k + 1, w - k + 1, (k - 1) as isize),
    };
    let mut out = Tensor3::zeros(kernel.out_channels, out_h, out_w);
    for j in 0..kernel.out_channels {
        let oplane = out.channel_mut(j);
        for i in 0..x.channels() {
            let xplane = x.channel(i);
            for a in 0..k {
                for b in 0..k {
                    let wgt = kernel.w(i, j, a, b);
                    if wgt == 0.0 {
                        continue;
                    }
                    // out(p,q) += wgt · x(p+sy, q+sx), clamped to the input
                    let sy = base - a as isize;
                    let sx = base - b as isize;
                    let p0 = (-sy).max(0) as usize;
                    let p1 = (out_h as isize).min(h as isize - sy).max(0) as usize;
                    let q0 = (-sx).max(0) as usize;
                    let q1 = (out_w as isize).min(w as isize - sx).max(0) as usize;
                    if q0 >= q1 {
                        continue;
                    }
                    for p in p0..p1 {
                        let src_row = (p as isize + sy) as usize * w;
                        let src = &xplane[(src_row as isize + q0 as isize + sx) as usize
                            ..(src_row as isize + q1 as isize + sx) as usize];
                        let dst = &mut oplane[p * out_w + q0..p * out_w + q1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wgt * s;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The same convolution computed through the convolution theorem: zero-pad
/// image and kernel to (H+k−1)×(W+k−1), multiply spectra per channel pair,
/// sum over input channels, inverse-transform, crop.
pub fn conv2_via_dft(x: &Tensor3, kernel: &ConvKernel) -> Result<Tensor3> {
    check_match(x, kernel)?;
    let k = kernel.k;
    let (h, w) = (x.height(), x.width());
    let (ph, pw) = (h + k - 1, w + k - 1);
    let x_spectra: Vec<Spectrum2> = (0..x.channels())
        .map(|i| dft2(&zero_pad(&x.channel_matrix(i), ph, pw)?))
        .collect::<Result<_>>()?;
    let (out_h, out_w, crop) = match kernel.padding {
        Padding::Same => (h, w, (k - 1) / 2),
        Padding::Valid => (h - k + 1, w - k + 1, k - 1),
    };
    let mut planes = Vec::with_capacity(kernel.out_channels);
    for j in 0..kernel.out_channels {
        let mut acc = Spectrum2::zeros(ph, pw);
        for (i, fx) in x_spectra.iter().enumerate() {
            let fk = dft2(&zero_pad(&kernel.taps(i, j), ph, pw)?)?;
            acc = acc.add(&fx.mul_elementwise(&fk)?)?;
        }
        let full = idft2(&acc)?;
        planes.push(Matrix::from_fn(out_h, out_w, |p, q| full[(p + crop, q + crop)]));
    }
    Tensor3::from_channels(planes)
}
