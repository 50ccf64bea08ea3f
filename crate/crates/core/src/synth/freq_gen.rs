//! Frequency-pattern autoencoder generators.
//!
//! One model = average-pool ↓2, entry conv (3→feature_dim), a generative
//! block of L conv units (ordered conv→norm→act or norm→act→conv), a ×2
//! upsample (nearest / bilinear / learned deconv), and an exit conv back to
//! 3 channels. Trained to reconstruct its input under mean-absolute error,
//! which leaves the upsampler's spectral signature in everything it emits.

use crate::norm_act::{ActKind, NormKind, NormParams};
use crate::rng::Pcg32;
use crate::synth::layers::{ConvLayer, Net, Stage};
use crate::tensor::Tensor3;
use crate::upsample::{bilinear_kernel, nearest_kernel};
use crate::{Error, Result};

pub const RESIDUAL_TARGET: f64 = 0.005;
pub const LEARNING_RATE: f64 = 0.01;
pub const GRAD_CLIP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SOrder {
    /// conv, then norm, then activation.
    ConvFirst,
    /// norm, then activation, then conv.
    NormActFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum UKind {
    Nearest,
    Bilinear,
    Deconv,
}

/// Full identity of one freq-family architecture + seed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlockConfig {
    pub l: usize,
    pub s: SOrder,
    pub u: UKind,
    pub a: ActKind,
    pub n: NormKind,
    pub seed: u64,
    pub feature_dim: usize,
    pub k: usize,
}

impl BlockConfig {
    /// Human-readable architecture id (seed excluded).
    pub fn arch_label(&self) -> String {
        let s = match self.s {
            SOrder::ConvFirst => "cna",
            SOrder::NormActFirst => "nac",
        };
        let u = match self.u {
            UKind::Nearest => "nearest",
            UKind::Bilinear => "bilinear",
            UKind::Deconv => "deconv",
        };
        let a = match self.a {
            ActKind::Relu => "relu",
            ActKind::Sigmoid => "sigmoid",
            ActKind::Tanh => "tanh",
            ActKind::None => "noact",
        };
        let n = match self.n {
            NormKind::Batch => "bn",
            NormKind::Instance => "in",
            NormKind::None => "nonorm",
        };
        format!("L{}-{}-{}-{}-{}", self.l, s, u, a, n)
    }

    pub fn label(&self) -> String {
        format!("{}-seed{}", self.arch_label(), self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FreqGenModel {
    pub config: BlockConfig,
    pub net: Net,
    pub trained: bool,
    pub final_residual: f64,
    pub steps_run: usize,
}

impl FreqGenModel {
    /// Random-initialized model; layer order is fixed so a seed pins every
    /// parameter bit-for-bit.
    pub fn init(config: BlockConfig) -> Result<Self> {
        if config.l == 0 || config.l > 2 {
            return Err(Error::InvalidArg(format!("L must be 1 or 2, got {}", config.l)));
        }
        if config.k % 2 == 0 {
            return Err(Error::InvalidArg(format!("block kernel size must be odd, got {}", config.k)));
        }
        let fd = config.feature_dim;
        if fd == 0 {
            return Err(Error::InvalidArg("feature_dim must be positive".into()));
        }
        let mut rng = Pcg32::new(config.seed);
        let mut convs = vec![ConvLayer::random(3, fd, config.k, &mut rng)?];
        let mut norms = Vec::new();
        let mut stages = vec![Stage::AvgPool, Stage::Conv(0)];
        for unit in 0..config.l {
            let conv_idx = convs.len();
            convs.push(ConvLayer::random(fd, fd, config.k, &mut rng)?);
            let norm_idx = norms.len();
            norms.push(NormParams::unit(config.n, fd));
            match config.s {
                SOrder::ConvFirst => {
                    stages.push(Stage::Conv(conv_idx));
                    stages.push(Stage::Norm(norm_idx));
                    stages.push(Stage::Act(config.a));
                }
                SOrder::NormActFirst => {
                    stages.push(Stage::Norm(norm_idx));
                    stages.push(Stage::Act(config.a));
                    stages.push(Stage::Conv(conv_idx));
                }
            }
            let _ = unit;
        }
        stages.push(Stage::Interleave);
        match config.u {
            UKind::Nearest => stages.push(Stage::Depthwise(nearest_kernel())),
            UKind::Bilinear => stages.push(Stage::Depthwise(bilinear_kernel())),
            UKind::Deconv => {
                let conv_idx = convs.len();
                convs.push(ConvLayer::random(fd, fd, config.k, &mut rng)?);
                stages.push(Stage::Conv(conv_idx));
            }
        }
        let exit_idx = convs.len();
        convs.push(ConvLayer::random(fd, 3, config.k, &mut rng)?);
        stages.push(Stage::Conv(exit_idx));
        Ok(FreqGenModel {
            config,
            net: Net { stages, convs, norms },
            trained: false,
            final_residual: f64::INFINITY,
            steps_run: 0,
        })
    }
}

fn check_image(img: &Tensor3) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::DimMismatch(format!("freq models take 3-channel images, got {}", img.channels())));
    }
    if img.height() % 2 != 0 || img.width() % 2 != 0 || img.height() == 0 || img.width() == 0 {
        return Err(Error::InvalidArg(format!(
            "freq models need even positive dims, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    Ok(())
}

/// Run the generator on an image (trained or not).
pub fn freq_forward(model: &FreqGenModel, img: &Tensor3) -> Result<Tensor3> {
    check_image(img)?;
    model.net.forward(img)
}

pub fn mean_abs_residual(out: &Tensor3, target: &Tensor3) -> f64 {
    let n = out.as_slice().len() as f64;
    out.as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n
}

/// Mean reconstruction residual over a whole set.
fn set_residual(model: &FreqGenModel, images: &[Tensor3]) -> Result<f64> {
    let mut total = 0.0;
    for img in images {
        total += mean_abs_residual(&model.net.forward(img)?, img);
    }
    Ok(total / images.len() as f64)
}

/// Gradient-descent training on mean-absolute reconstruction error.
///
/// Steps cycle through `images` in order; one image per step. Stops when the
/// per-step residual reaches `target` or the budget runs out. Batch-norm
/// models freeze their running statistics from the final step's image so
/// later generation is deterministic.
pub fn train_freq_generator(
    config: BlockConfig,
    images: &[Tensor3],
    target: f64,
    max_steps: usize,
) -> Result<FreqGenModel> {
    if images.is_empty() {
        return Err(Error::EmptyInput("train_freq_generator needs at least one image"));
    }
    for img in images {
        check_image(img)?;
    }
    let mut model = FreqGenModel::init(config)?;
    let mut steps = 0;
    for step in 0..max_steps {
        let img = &images[step % images.len()];
        let tape = model.net.forward_tape(img)?;
        let residual = mean_abs_residual(&tape.output, img);
        if !residual.is_finite() {
            return Err(Error::Diverged(format!(
                "residual became non-finite at step {step} for {}",
                config.label()
            )));
        }
        if residual <= target {
            break;
        }
        let n = tape.output.as_slice().len() as f64;
        let mut grad_out = tape.output.clone();
        for (g, (&o, &t)) in grad_out
            .as_mut_slice()
            .iter_mut()
            .zip(tape.output.as_slice().iter().zip(img.as_slice()))
        {
            *g = (o - t).signum() / n;
        }
        let grads = model.net.backward(&tape, grad_out);
        model.net.apply_grads(&grads, LEARNING_RATE, GRAD_CLIP);
        steps = step + 1;
    }
    if config.n == NormKind::Batch {
        freeze_batch_stats(&mut model, &images[(steps.max(1) - 1) % images.len()])?;
    }
    model.trained = true;
    model.steps_run = steps;
    model.final_residual = set_residual(&model, images)?;
    if !model.final_residual.is_finite() {
        return Err(Error::Diverged(format!("final residual non-finite for {}", config.label())));
    }
    Ok(model)
}

/// Continue gradient descent on an existing model for exactly `steps` steps
/// (no early stop). Frozen batch statistics thaw for the duration and are
/// recaptured afterwards, mirroring what the original training run did.
pub fn fine_tune_freq_generator(
    model: &mut FreqGenModel,
    images: &[Tensor3],
    steps: usize,
) -> Result<()> {
    if images.is_empty() {
        return Err(Error::EmptyInput("fine_tune_freq_generator needs at least one image"));
    }
    for img in images {
        check_image(img)?;
    }
    for p in &mut model.net.norms {
        p.frozen = None;
    }
    for step in 0..steps {
        let img = &images[step % images.len()];
        let tape = model.net.forward_tape(img)?;
        let residual = mean_abs_residual(&tape.output, img);
        if !residual.is_finite() {
            return Err(Error::Diverged(format!(
                "residual became non-finite at fine-tune step {step} for {}",
                model.config.label()
            )));
        }
        let n = tape.output.as_slice().len() as f64;
        let mut grad_out = tape.output.clone();
        for (g, (&o, &t)) in grad_out
            .as_mut_slice()
            .iter_mut()
            .zip(tape.output.as_slice().iter().zip(img.as_slice()))
        {
            *g = (o - t).signum() / n;
        }
        let grads = model.net.backward(&tape, grad_out);
        model.net.apply_grads(&grads, LEARNING_RATE, GRAD_CLIP);
    }
    if model.config.n == NormKind::Batch {
        let last = &images[(steps.max(1) - 1) % images.len()];
        freeze_batch_stats(model, last)?;
    }
    model.steps_run += steps;
    model.final_residual = set_residual(model, images)?;
    Ok(())
}

/// Capture per-channel statistics of each norm stage's input on `img` and
/// store them as frozen running stats.
fn freeze_batch_stats(model: &mut FreqGenModel, img: &Tensor3) -> Result<()> {
    let tape_outputs = model.net.forward_stages(img)?;
    // stage i's input is stage i-1's output (or img itself for stage 0)
    let mut frozen: Vec<(usize, (Vec<f64>, Vec<f64>))> = Vec::new();
    for (i, stage) in model.net.stages.iter().enumerate() {
        if let Stage::Norm(idx) = stage {
            let input = if i == 0 { img } else { &tape_outputs[i - 1] };
            let mut mus = Vec::with_capacity(input.channels());
            let mut vars = Vec::with_capacity(input.channels());
            for c in 0..input.channels() {
                let (mu, var) = crate::norm_act::plane_stats(input.channel(c));
                mus.push(mu);
                vars.push(var);
            }
            frozen.push((*idx, (mus, vars)));
        }
    }
    for (idx, stats) in frozen {
        model.net.norms[idx].frozen = Some(stats);
    }
    Ok(())
}
