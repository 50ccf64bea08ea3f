//! Normalization and activation, spatial and frequency forms.
//!
//! Normalization is affine per channel, so its spectral footprint is tiny:
//! every non-DC bin is scaled by γ/√(σ²+ε) and only the DC bin feels the mean
//! subtraction and the β shift. The exact nonlinearities have no closed
//! spectral form; the SReLU polynomial 0.3x + 0.021x² exists purely so the
//! frequency identity (self-convolution for the square term) can be tested.

use num_complex::Complex64;

use crate::dft::Spectrum2;
use crate::tensor::Tensor3;
use crate::{Error, Result};

pub const SRELU_C1: f64 = 0.3;
pub const SRELU_C2: f64 = 0.021;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NormKind {
    /// Batch statistics; with the single-image batches used here this matches
    /// instance statistics unless frozen running stats are supplied.
    Batch,
    /// Statistics from the one instance being normalized.
    Instance,
    None,
}

/// Per-channel affine normalization parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormParams {
    pub kind: NormKind,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: f64,
    /// Frozen running (mean, variance) per channel; used by Batch kind when
    /// present, ignored otherwise.
    pub frozen: Option<(Vec<f64>, Vec<f64>)>,
}

impl NormParams {
    pub fn unit(kind: NormKind, channels: usize) -> Self {
        NormParams {
            kind,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            eps: 1e-5,
            frozen: None,
        }
    }
}

/// Per-channel mean and population variance of one plane.
pub fn plane_stats(plane: &[f64]) -> (f64, f64) {
    let n = plane.len() as f64;
    let mean = plane.iter().sum::<f64>() / n;
    let var = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

fn channel_stats(x: &Tensor3, p: &NormParams, c: usize) -> Result<(f64, f64)> {
    match (p.kind, &p.frozen) {
        (NormKind::Batch, Some((mu, var))) => {
            if mu.len() <= c || var.len() <= c {
                return Err(Error::DimMismatch(format!(
                    "frozen stats cover {} channels, need {}",
                    mu.len().min(var.len()),
                    c + 1
                )));
            }
            Ok((mu[c], var[c]))
        }
        _ => Ok(plane_stats(x.channel(c))),
    }
}

/// γ(x−μ)/√(σ²+ε)+β per channel. `None` kind passes the input through.
pub fn normalize(x: &Tensor3, p: &NormParams) -> Result<Tensor3> {
    if p.kind == NormKind::None {
        return Ok(x.clone());
    }
    if p.gamma.len() != x.channels() || p.beta.len() != x.channels() {
        return Err(Error::DimMismatch(format!(
            "norm params cover {} channels, tensor has {}",
            p.gamma.len().min(p.beta.len()),
            x.channels()
        )));
    }
    let mut out = x.clone();
    for c in 0..x.channels() {
        let (mu, var) = channel_stats(x, p, c)?;
        let denom = var + p.eps;
        if denom <= 0.0 {
            return Err(Error::InvalidArg(format!(
                "zero variance and eps={} in channel {c}",
                p.eps
            )));
        }
        let scale = p.gamma[c] / denom.sqrt();
        let shift = p.beta[c];
        for v in out.channel_mut(c) {
            *v = (*v - mu) * scale + shift;
        }
    }
    Ok(out)
}

/// Frequency-domain normalize of channel `c`'s spectrum. Self-contained when
/// stats aren't frozen: μ is read off the DC bin and σ² via Parseval, so the
/// result equals dft2(normalize(x)) bin for bin.
pub fn normalize_freq(f: &Spectrum2, p: &NormParams, c: usize) -> Result<Spectrum2> {
    if p.kind == NormKind::None {
        return Ok(f.clone());
    }
    if p.gamma.len() <= c || p.beta.len() <= c {
        return Err(Error::DimMismatch(format!(
            "norm params cover {} channels, channel {c} requested",
            p.gamma.len().min(p.beta.len())
        )));
    }
    let mn = (f.height() * f.width()) as f64;
    let (mu, var) = match (p.kind, &p.frozen) {
        (NormKind::Batch, Some((mu, var))) => {
            if mu.len() <= c || var.len() <= c {
                return Err(Error::DimMismatch("frozen stats too short".into()));
            }
            (mu[c], var[c])
        }
        _ => {
            let mu = f.bin(0, 0).re / mn;
            let second_moment = f.bins().map(|b| b.norm_sqr()).sum::<f64>() / (mn * mn);
            (mu, second_moment - mu * mu)
        }
    };
    let denom = var + p.eps;
    if denom <= 0.0 {
        return Err(Error::InvalidArg(format!("zero variance and eps={} in channel {c}", p.eps)));
    }
    let scale = p.gamma[c] / denom.sqrt();
    let mut out = f.scale(scale);
    // mean subtraction and beta both live at DC: μ_F = μ·MN·δ, β_F = β·MN·δ
    let dc = out.bin(0, 0) - Complex64::new(mu * mn * scale, 0.0) + Complex64::new(p.beta[c] * mn, 0.0);
    out.set_bin(0, 0, dc);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ActKind {
    Relu,
    Sigmoid,
    Tanh,
    None,
}

impl ActKind {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActKind::Relu => x.max(0.0),
            ActKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            ActKind::Tanh => x.tanh(),
            ActKind::None => x,
        }
    }

    /// d act / d x evaluated at pre-activation x.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActKind::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
            ActKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActKind::None => 1.0,
        }
    }
}

/// Exact elementwise nonlinearity.
pub fn activate(x: &Tensor3, kind: ActKind) -> Tensor3 {
    let mut out = x.clone();
    for v in out.as_mut_slice() {
        *v = kind.apply(*v);
    }
    out
}

/// Quadratic ReLU surrogate 0.3x + 0.021x², analysis-only.
pub fn srelu_poly(x: &Tensor3) -> Tensor3 {
    let mut out = x.clone();
    for v in out.as_mut_slice() {
        *v = SRELU_C1 * *v + SRELU_C2 * *v * *v;
    }
    out
}

/// Frequency form of [`srelu_poly`]: 0.3·F + (0.021/(MN))·(F ⊛ F), where ⊛ is
/// circular self-convolution over the bin grid. The 1/(MN) comes from the
/// unnormalized-forward DFT convention.
pub fn srelu_freq(f: &Spectrum2) -> Spectrum2 {
    let (m, n) = (f.height(), f.width());
    let bins = f.to_bins();
    let mut out = Spectrum2::zeros(m, n);
    for u in 0..m {
        for v in 0..n {
            let mut selfconv = Complex64::new(0.0, 0.0);
            for p in 0..m {
                for q in 0..n {
                    let wrapped = bins[((u + m - p) % m) * n + (v + n - q) % n];
                    selfconv += bins[p * n + q] * wrapped;
                }
            }
            let lin = bins[u * n + v] * SRELU_C1;
            out.set_bin(u, v, lin + selfconv * (SRELU_C2 / (m * n) as f64));
        }
    }
    out
}
