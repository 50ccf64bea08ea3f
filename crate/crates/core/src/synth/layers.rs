//! Trainable layer primitives with hand-derived backward passes, and the
//! small tape (`Net`) that freq- and grid-family generators are built from.
//!
//! Every backward formula here is checked against central finite differences
//! in the module tests; the derivations are standard chain-rule work:
//!
//! - convolution: dL/dx is the transposed convolution of the output gradient,
//!   dL/dw(i,j,a,b) is a shifted dot product of output gradient and input;
//! - normalization with live statistics: the mean/variance dependence
//!   contributes the usual − mean(g) − x̂·mean(g·x̂) correction terms;
//! - zero-interleave / average-pool: pure index bookkeeping.

use crate::conv::{conv2_spatial, ConvKernel, Padding};
use crate::norm_act::{activate, normalize, plane_stats, ActKind, NormKind, NormParams};
use crate::rng::Pcg32;
use crate::tensor::{Matrix, Tensor3};
use crate::upsample::zero_interleave;
use crate::Result;

/// dst(p,q) += w · src(p+sy, q+sx) over the index range where both sides are
/// in bounds. The workhorse of conv forward, input-gradient and the depthwise
/// paths.
fn shifted_axpy(
    dst: &mut [f64],
    (dh, dw): (usize, usize),
    src: &[f64],
    (sh, sw): (usize, usize),
    (sy, sx): (isize, isize),
    w: f64,
) {
    let p0 = (-sy).max(0) as usize;
    let p1 = (dh as isize).min(sh as isize - sy).max(0) as usize;
    let q0 = (-sx).max(0) as usize;
    let q1 = (dw as isize).min(sw as isize - sx).max(0) as usize;
    if q0 >= q1 {
        return;
    }
    for p in p0..p1 {
        let src_row = (p as isize + sy) as usize * sw;
        let s0 = (src_row as isize + q0 as isize + sx) as usize;
        let s1 = (src_row as isize + q1 as isize + sx) as usize;
        let dst_slice = &mut dst[p * dw + q0..p * dw + q1];
        for (d, s) in dst_slice.iter_mut().zip(&src[s0..s1]) {
            *d += w * s;
        }
    }
}

/// Σ a(p,q) · b(p+sy, q+sx) over in-bounds indices.
fn shifted_dot(
    a: &[f64],
    (ah, aw): (usize, usize),
    b: &[f64],
    (bh, bw): (usize, usize),
    (sy, sx): (isize, isize),
) -> f64 {
    let p0 = (-sy).max(0) as usize;
    let p1 = (ah as isize).min(bh as isize - sy).max(0) as usize;
    let q0 = (-sx).max(0) as usize;
    let q1 = (aw as isize).min(bw as isize - sx).max(0) as usize;
    if q0 >= q1 {
        return 0.0;
    }
    let mut acc = 0.0;
    for p in p0..p1 {
        let b_row = (p as isize + sy) as usize * bw;
        let s0 = (b_row as isize + q0 as isize + sx) as usize;
        let s1 = (b_row as isize + q1 as isize + sx) as usize;
        for (x, y) in a[p * aw + q0..p * aw + q1].iter().zip(&b[s0..s1]) {
            acc += x * y;
        }
    }
    acc
}

/// Convolution layer: kernel + per-output-channel bias, zero-same padding.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConvLayer {
    pub kernel: ConvKernel,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    /// Uniform ±1/√fan_in init for weights and bias, fan_in = in·k².
    pub fn random(in_ch: usize, out_ch: usize, k: usize, rng: &mut Pcg32) -> Result<Self> {
        let mut kernel = ConvKernel::zeros(in_ch, out_ch, k, Padding::Same)?;
        let bound = 1.0 / ((in_ch * k * k) as f64).sqrt();
        for w in kernel.as_mut_slice() {
            *w = rng.uniform(-bound, bound);
        }
        let bias = (0..out_ch).map(|_| rng.uniform(-bound, bound)).collect();
        Ok(ConvLayer { kernel, bias })
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        let mut out = conv2_spatial(x, &self.kernel)?;
        for (j, &b) in self.bias.iter().enumerate() {
            for v in out.channel_mut(j) {
                *v += b;
            }
        }
        Ok(out)
    }

    /// Input gradient plus parameter gradients, given the cached input.
    pub fn backward(&self, x: &Tensor3, g: &Tensor3) -> (Tensor3, ConvGrads) {
        let k = self.kernel.size();
        let base = ((k - 1) / 2) as isize;
        let (h, w) = (x.height(), x.width());
        let (oh, ow) = (g.height(), g.width());
        let mut dx = Tensor3::zeros(x.channels(), h, w);
        let mut grads = ConvGrads {
            dw: vec![0.0; self.kernel.as_slice().len()],
            db: vec![0.0; self.bias.len()],
        };
        for j in 0..self.kernel.out_channels() {
            let gplane = g.channel(j);
            grads.db[j] = gplane.iter().sum();
            for i in 0..x.channels() {
                let xplane = x.channel(i);
                let dxplane = dx.channel_mut(i);
                for a in 0..k {
                    for b in 0..k {
                        let sy = base - a as isize;
                        let sx = base - b as isize;
                        // forward was out(p,q) += w·x(p+sy,q+sx)
                        shifted_axpy(
                            dxplane,
                            (h, w),
                            gplane,
                            (oh, ow),
                            (-sy, -sx),
                            self.kernel.w(i, j, a, b),
                        );
                        let slot = ((i * self.kernel.out_channels() + j) * k + a) * k + b;
                        grads.dw[slot] = shifted_dot(gplane, (oh, ow), xplane, (h, w), (sy, sx));
                    }
                }
            }
        }
        (dx, grads)
    }
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
}

/// 2×2 average pool, stride 2.
pub fn avg_pool2(x: &Tensor3) -> Tensor3 {
    let (h, w) = (x.height() / 2, x.width() / 2);
    let mut out = Tensor3::zeros(x.channels(), h, w);
    for c in 0..x.channels() {
        for y in 0..h {
            for xx in 0..w {
                out[(c, y, xx)] = 0.25
                    * (x[(c, 2 * y, 2 * xx)]
                        + x[(c, 2 * y + 1, 2 * xx)]
                        + x[(c, 2 * y, 2 * xx + 1)]
                        + x[(c, 2 * y + 1, 2 * xx + 1)]);
            }
        }
    }
    out
}

pub fn avg_pool2_backward(g: &Tensor3) -> Tensor3 {
    let mut dx = Tensor3::zeros(g.channels(), g.height() * 2, g.width() * 2);
    for c in 0..g.channels() {
        for y in 0..g.height() {
            for xx in 0..g.width() {
                let v = 0.25 * g[(c, y, xx)];
                for (dy, dxx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    dx[(c, 2 * y + dy, 2 * xx + dxx)] = v;
                }
            }
        }
    }
    dx
}

pub fn interleave_backward(g: &Tensor3) -> Tensor3 {
    let mut dx = Tensor3::zeros(g.channels(), g.height() / 2, g.width() / 2);
    for c in 0..g.channels() {
        for y in 0..dx.height() {
            for xx in 0..dx.width() {
                dx[(c, y, xx)] = g[(c, 2 * y, 2 * xx)];
            }
        }
    }
    dx
}

/// Depthwise convolution with a fixed (non-trainable) square tap matrix,
/// zero-same padding — the nearest / bilinear upsampling kernels.
pub fn depthwise_forward(x: &Tensor3, taps: &Matrix) -> Tensor3 {
    depthwise_shift(x, taps, false)
}

pub fn depthwise_backward(g: &Tensor3, taps: &Matrix) -> Tensor3 {
    depthwise_shift(g, taps, true)
}

fn depthwise_shift(x: &Tensor3, taps: &Matrix, transpose: bool) -> Tensor3 {
    let k = taps.height();
    let base = ((k - 1) / 2) as isize;
    let (h, w) = (x.height(), x.width());
    let mut out = Tensor3::zeros(x.channels(), h, w);
    for c in 0..x.channels() {
        let src = x.channel(c);
        let dst = out.channel_mut(c);
        for a in 0..k {
            for b in 0..k {
                let (mut sy, mut sx) = (base - a as isize, base - b as isize);
                if transpose {
                    sy = -sy;
                    sx = -sx;
                }
                shifted_axpy(dst, (h, w), src, (h, w), (sy, sx), taps[(a, b)]);
            }
        }
    }
    out
}

/// Gradient of [`normalize`] with live per-channel statistics; returns input
/// gradient and (dγ, dβ) per channel.
pub fn norm_backward(x: &Tensor3, p: &NormParams, g: &Tensor3) -> (Tensor3, Vec<f64>, Vec<f64>) {
    if p.kind == NormKind::None {
        return (g.clone(), vec![], vec![]);
    }
    let mut dx = Tensor3::zeros(x.channels(), x.height(), x.width());
    let mut dgamma = vec![0.0; x.channels()];
    let mut dbeta = vec![0.0; x.channels()];
    let frozen_used = p.kind == NormKind::Batch && p.frozen.is_some();
    for c in 0..x.channels() {
        let xs = x.channel(c);
        let gs = g.channel(c);
        let n = xs.len() as f64;
        let (mu, var) = if frozen_used {
            let (fm, fv) = p.frozen.as_ref().expect("checked");
            (fm[c], fv[c])
        } else {
            plane_stats(xs)
        };
        let inv_std = 1.0 / (var + p.eps).sqrt();
        let mut g_sum = 0.0;
        let mut gx_sum = 0.0;
        for (&gv, &xv) in gs.iter().zip(xs) {
            let xhat = (xv - mu) * inv_std;
            g_sum += gv;
            gx_sum += gv * xhat;
        }
        dgamma[c] = gx_sum;
        dbeta[c] = g_sum;
        let scale = p.gamma[c] * inv_std;
        let dxp = dx.channel_mut(c);
        if frozen_used {
            // stats are constants: pure per-element scaling
            for (d, &gv) in dxp.iter_mut().zip(gs) {
                *d = scale * gv;
            }
        } else {
            let g_mean = g_sum / n;
            let gx_mean = gx_sum / n;
            for ((d, &gv), &xv) in dxp.iter_mut().zip(gs).zip(xs) {
                let xhat = (xv - mu) * inv_std;
                *d = scale * (gv - g_mean - xhat * gx_mean);
            }
        }
    }
    (dx, dgamma, dbeta)
}

pub fn act_backward(x: &Tensor3, kind: ActKind, g: &Tensor3) -> Tensor3 {
    let mut dx = g.clone();
    for (d, &xv) in dx.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *d *= kind.derivative(xv);
    }
    dx
}

/// One step of a feed-forward pipeline.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Stage {
    AvgPool,
    /// Trainable convolution; index into [`Net::convs`].
    Conv(usize),
    /// Normalization; index into [`Net::norms`].
    Norm(usize),
    Act(ActKind),
    Interleave,
    /// Fixed depthwise kernel (nearest / bilinear upsampling taps).
    Depthwise(Matrix),
}

/// A straight-line network: an ordered list of stages over shared parameter
/// stores. Both generator families and the architecture simulator run on it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Net {
    pub stages: Vec<Stage>,
    pub convs: Vec<ConvLayer>,
    pub norms: Vec<NormParams>,
}

/// Cached stage inputs from a forward pass, consumed by [`Net::backward`].
pub struct Tape {
    inputs: Vec<Tensor3>,
    pub output: Tensor3,
}

/// Parameter gradients aligned with [`Net::convs`] / [`Net::norms`].
pub struct NetGrads {
    pub convs: Vec<ConvGrads>,
    pub norms: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Net {
    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        let mut cur = x.clone();
        for stage in &self.stages {
            cur = self.run_stage(stage, &cur)?;
        }
        Ok(cur)
    }

    /// Forward pass capturing every stage output (for analysis taps).
    pub fn forward_stages(&self, x: &Tensor3) -> Result<Vec<Tensor3>> {
        let mut outs = Vec::with_capacity(self.stages.len());
        let mut cur = x.clone();
        for stage in &self.stages {
            cur = self.run_stage(stage, &cur)?;
            outs.push(cur.clone());
        }
        Ok(outs)
    }

    pub fn forward_tape(&self, x: &Tensor3) -> Result<Tape> {
        let mut inputs = Vec::with_capacity(self.stages.len());
        let mut cur = x.clone();
        for stage in &self.stages {
            let next = self.run_stage(stage, &cur)?;
            inputs.push(std::mem::replace(&mut cur, next));
        }
        Ok(Tape { inputs, output: cur })
    }

    fn run_stage(&self, stage: &Stage, x: &Tensor3) -> Result<Tensor3> {
        Ok(match stage {
            Stage::AvgPool => avg_pool2(x),
            Stage::Conv(i) => self.convs[*i].forward(x)?,
            Stage::Norm(i) => normalize(x, &self.norms[*i])?,
            Stage::Act(kind) => activate(x, *kind),
            Stage::Interleave => zero_interleave(x),
            Stage::Depthwise(taps) => depthwise_forward(x, taps),
        })
    }

    /// Backpropagate `grad_out` through the tape; returns parameter grads.
    pub fn backward(&self, tape: &Tape, grad_out: Tensor3) -> NetGrads {
        let mut grads = NetGrads {
            convs: self
                .convs
                .iter()
                .map(|c| ConvGrads {
                    dw: vec![0.0; c.kernel.as_slice().len()],
                    db: vec![0.0; c.bias.len()],
                })
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|n| (vec![0.0; n.gamma.len()], vec![0.0; n.beta.len()]))
                .collect(),
        };
        let mut g = grad_out;
        for (stage, input) in self.stages.iter().zip(&tape.inputs).rev() {
            g = match stage {
                Stage::AvgPool => avg_pool2_backward(&g),
                Stage::Conv(i) => {
                    let (dx, cg) = self.convs[*i].backward(input, &g);
                    for (acc, v) in grads.convs[*i].dw.iter_mut().zip(&cg.dw) {
                        *acc += v;
                    }
                    for (acc, v) in grads.convs[*i].db.iter_mut().zip(&cg.db) {
                        *acc += v;
                    }
                    dx
                }
                Stage::Norm(i) => {
                    let (dx, dgamma, dbeta) = norm_backward(input, &self.norms[*i], &g);
                    for (acc, v) in grads.norms[*i].0.iter_mut().zip(&dgamma) {
                        *acc += v;
                    }
                    for (acc, v) in grads.norms[*i].1.iter_mut().zip(&dbeta) {
                        *acc += v;
                    }
                    dx
                }
                Stage::Act(kind) => act_backward(input, *kind, &g),
                Stage::Interleave => interleave_backward(&g),
                Stage::Depthwise(taps) => depthwise_backward(&g, taps),
            };
        }
        grads
    }

    /// All trainable parameters, flattened in a stable order
    /// (convs: weights then bias, in index order; then norms: γ then β).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.convs {
            out.extend_from_slice(c.kernel.as_slice());
            out.extend_from_slice(&c.bias);
        }
        for n in &self.norms {
            if n.kind != NormKind::None {
                out.extend_from_slice(&n.gamma);
                out.extend_from_slice(&n.beta);
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for c in &mut self.convs {
            for w in c.kernel.as_mut_slice() {
                *w = *it.next().expect("enough params");
            }
            for b in &mut c.bias {
                *b = *it.next().expect("enough params");
            }
        }
        for n in &mut self.norms {
            if n.kind != NormKind::None {
                for g in &mut n.gamma {
                    *g = *it.next().expect("enough params");
                }
                for b in &mut n.beta {
                    *b = *it.next().expect("enough params");
                }
            }
        }
        assert!(it.next().is_none(), "too many params");
    }

    /// Gradients flattened in the same order as [`Net::params_flat`].
    pub fn grads_flat(&self, grads: &NetGrads) -> Vec<f64> {
        let mut out = Vec::new();
        for cg in &grads.convs {
            out.extend_from_slice(&cg.dw);
            out.extend_from_slice(&cg.db);
        }
        for (norm, (dg, db)) in self.norms.iter().zip(&grads.norms) {
            if norm.kind != NormKind::None {
                out.extend_from_slice(dg);
                out.extend_from_slice(db);
            }
        }
        out
    }

    /// One clipped gradient-descent step; returns the pre-clip gradient norm.
    pub fn apply_grads(&mut self, grads: &NetGrads, lr: f64, clip: f64) -> f64 {
        let flat = self.grads_flat(grads);
        let norm = flat.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if norm > clip && norm > 0.0 { clip / norm } else { 1.0 };
        let mut params = self.params_flat();
        for (p, g) in params.iter_mut().zip(&flat) {
            *p -= lr * scale * g;
        }
        self.set_params_flat(&params);
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::upsample::{bilinear_kernel, nearest_kernel};

    fn random_tensor(c: usize, h: usize, w: usize, rng: &mut Pcg32) -> Tensor3 {
        let mut t = Tensor3::zeros(c, h, w);
        for v in t.as_mut_slice() {
            *v = rng.uniform(-1.0, 1.0);
        }
        t
    }

    // scalar objective for gradient checking: weighted sum of outputs so the
    // output gradient is a fixed random tensor
    fn weighted_loss(out: &Tensor3, weights: &Tensor3) -> f64 {
        out.as_slice().iter().zip(weights.as_slice()).map(|(a, b)| a * b).sum()
    }

    fn check_net_gradients(net: &mut Net, x: &Tensor3, rng: &mut Pcg32) {
        let tape = net.forward_tape(x).unwrap();
        let w = random_tensor(tape.output.channels(), tape.output.height(), tape.output.width(), rng);
        let grads = net.backward(&tape, w.clone());
        let flat_analytic = net.grads_flat(&grads);
        let params = net.params_flat();
        let h = 1e-5;
        for idx in 0..params.len() {
            let mut plus = params.clone();
            plus[idx] += h;
            net.set_params_flat(&plus);
            let lp = weighted_loss(&net.forward(x).unwrap(), &w);
            let mut minus = params.clone();
            minus[idx] -= h;
            net.set_params_flat(&minus);
            let lm = weighted_loss(&net.forward(x).unwrap(), &w);
            let fd = (lp - lm) / (2.0 * h);
            let analytic = flat_analytic[idx];
            let denom = fd.abs().max(analytic.abs()).max(1e-7);
            assert!(
                (fd - analytic).abs() / denom < 1e-4,
                "param {idx}: analytic {analytic} vs fd {fd}"
            );
        }
        net.set_params_flat(&params);
    }

    #[test]
    fn conv_layer_gradients() {
        let mut rng = Pcg32::new(11);
        let x = random_tensor(2, 6, 6, &mut rng);
        let mut net = Net {
            stages: vec![Stage::Conv(0)],
            convs: vec![ConvLayer::random(2, 3, 3, &mut rng).unwrap()],
            norms: vec![],
        };
        check_net_gradients(&mut net, &x, &mut rng);
    }

    #[test]
    fn norm_act_gradients() {
        let mut rng = Pcg32::new(12);
        let x = random_tensor(2, 5, 5, &mut rng);
        for kind in [NormKind::Instance, NormKind::Batch] {
            for act in [ActKind::Relu, ActKind::Sigmoid, ActKind::Tanh] {
                let mut norm = NormParams::unit(kind, 2);
                norm.gamma = vec![1.3, 0.7];
                norm.beta = vec![0.1, -0.2];
                let mut net = Net {
                    stages: vec![Stage::Norm(0), Stage::Act(act)],
                    convs: vec![],
                    norms: vec![norm],
                };
                check_net_gradients(&mut net, &x, &mut rng);
            }
        }
    }

    #[test]
    fn pool_interleave_depthwise_gradients_via_composite() {
        // no parameters of their own, so wrap them around a conv layer and
        // check that its gradients still pass — any index slip would show
        let mut rng = Pcg32::new(13);
        let x = random_tensor(1, 8, 8, &mut rng);
        for taps in [nearest_kernel(), bilinear_kernel()] {
            let mut net = Net {
                stages: vec![
                    Stage::AvgPool,
                    Stage::Conv(0),
                    Stage::Interleave,
                    Stage::Depthwise(taps),
                ],
                convs: vec![ConvLayer::random(1, 1, 3, &mut rng).unwrap()],
                norms: vec![],
            };
            check_net_gradients(&mut net, &x, &mut rng);
        }
    }

    #[test]
    fn pool_and_interleave_shapes() {
        let mut rng = Pcg32::new(14);
        let x = random_tensor(3, 8, 6, &mut rng);
        let pooled = avg_pool2(&x);
        assert_eq!((pooled.channels(), pooled.height(), pooled.width()), (3, 4, 3));
        assert!((pooled[(0, 0, 0)]
            - 0.25 * (x[(0, 0, 0)] + x[(0, 1, 0)] + x[(0, 0, 1)] + x[(0, 1, 1)]))
        .abs()
            < 1e-15);
        let back = avg_pool2_backward(&pooled);
        assert_eq!(back.height(), 8);
        let z = zero_interleave(&pooled);
        assert_eq!(interleave_backward(&z), pooled);
    }

    #[test]
    fn params_roundtrip() {
        let mut rng = Pcg32::new(15);
        let mut net = Net {
            stages: vec![Stage::Conv(0), Stage::Norm(0), Stage::Act(ActKind::Relu)],
            convs: vec![ConvLayer::random(2, 2, 3, &mut rng).unwrap()],
            norms: vec![NormParams::unit(NormKind::Batch, 2)],
        };
        let flat = net.params_flat();
        assert_eq!(flat.len(), 2 * 2 * 9 + 2 + 2 + 2);
        let doubled: Vec<f64> = flat.iter().map(|v| v * 2.0).collect();
        net.set_params_flat(&doubled);
        assert_eq!(net.params_flat(), doubled);
    }
}
