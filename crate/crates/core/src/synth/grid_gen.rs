//! Grid-noise generators: stacks of learnable stride-2 deconvolution blocks.
//!
//! Each block zero-interleaves its input and applies two trainable
//! convolutions (the "deconvolution" and its companion conv). A model maps a
//! small noise field to an H×W noise image whose spectrum carries peaks on
//! the 1/2ⁿ lattice — the n stacked interleavings replicate everything,
//! including the constant fields contributed by biases, into periodic combs.
//! Training only calibrates the output magnitude toward a target level.

use crate::rng::Pcg32;
use crate::synth::layers::{ConvLayer, Net, Stage};
use crate::tensor::Tensor3;
use crate::{Error, Result};

pub const MAGNITUDE_TARGET: f64 = 0.005;
/// Stop once |mean-abs − target| is inside this band.
pub const MAGNITUDE_TOL: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GridGenConfig {
    /// Deconv+conv block count n; output is 2ⁿ× the noise input.
    pub num_blocks: usize,
    pub seed: u64,
    /// Working channels inside every block.
    pub channels: usize,
}

impl GridGenConfig {
    pub fn label(&self) -> String {
        format!("grid-n{}-seed{}", self.num_blocks, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridGenModel {
    pub config: GridGenConfig,
    pub net: Net,
    pub trained: bool,
    pub final_magnitude: f64,
    pub steps_run: usize,
}

impl GridGenModel {
    pub fn init(config: GridGenConfig) -> Result<Self> {
        if config.num_blocks == 0 {
            return Err(Error::InvalidArg("grid model needs at least one block".into()));
        }
        if config.channels == 0 {
            return Err(Error::InvalidArg("grid model needs at least one channel".into()));
        }
        let mut rng = Pcg32::new(config.seed);
        let c = config.channels;
        let mut convs = Vec::new();
        let mut stages = Vec::new();
        for block in 0..config.num_blocks {
            let last = block + 1 == config.num_blocks;
            stages.push(Stage::Interleave);
            let deconv_idx = convs.len();
            convs.push(ConvLayer::random(c, c, 3, &mut rng)?);
            stages.push(Stage::Conv(deconv_idx));
            let conv_idx = convs.len();
            convs.push(ConvLayer::random(c, if last { 3 } else { c }, 3, &mut rng)?);
            stages.push(Stage::Conv(conv_idx));
        }
        Ok(GridGenModel {
            config,
            net: Net { stages, convs, norms: vec![] },
            trained: false,
            final_magnitude: f64::INFINITY,
            steps_run: 0,
        })
    }

    /// Spatial scale factor 2ⁿ between noise input and output.
    pub fn scale(&self) -> usize {
        1 << self.config.num_blocks
    }
}

/// Unit-Gaussian noise input of the right channel count.
pub fn grid_noise(model: &GridGenModel, height: usize, width: usize, rng: &mut Pcg32) -> Tensor3 {
    let mut z = Tensor3::zeros(model.config.channels, height, width);
    for v in z.as_mut_slice() {
        *v = rng.gaussian();
    }
    z
}

/// Noise-to-noise forward pass.
pub fn grid_forward(model: &GridGenModel, z: &Tensor3) -> Result<Tensor3> {
    if z.channels() != model.config.channels {
        return Err(Error::DimMismatch(format!(
            "grid model {} takes {} noise channels, got {}",
            model.config.label(),
            model.config.channels,
            z.channels()
        )));
    }
    if z.height() == 0 || z.width() == 0 {
        return Err(Error::EmptyInput("grid_forward on empty noise"));
    }
    model.net.forward(z)
}

pub fn mean_abs(t: &Tensor3) -> f64 {
    t.as_slice().iter().map(|v| v.abs()).sum::<f64>() / t.as_slice().len() as f64
}

/// Overlay the model's noise on an image, clamped to [0,1]. Image dims must
/// be divisible by the model's 2ⁿ scale.
pub fn apply_grid_noise(img: &Tensor3, model: &GridGenModel, rng: &mut Pcg32) -> Result<Tensor3> {
    if img.channels() != 3 {
        return Err(Error::DimMismatch(format!("expected a 3-channel image, got {}", img.channels())));
    }
    let s = model.scale();
    if img.height() % s != 0 || img.width() % s != 0 || img.height() < s || img.width() < s {
        return Err(Error::DimMismatch(format!(
            "image {}x{} not divisible by the grid scale {s}",
            img.height(),
            img.width()
        )));
    }
    let z = grid_noise(model, img.height() / s, img.width() / s, rng);
    let noise = grid_forward(model, &z)?;
    let mut out = img.clone();
    for (o, n) in out.as_mut_slice().iter_mut().zip(noise.as_slice()) {
        *o = (*o + n).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Calibrate output magnitude: gradient descent on |mean-abs(output) − target|
/// over fresh noise draws. Training noise is sized so the output is 64×64
/// (floor 1×1 input).
pub fn train_grid_generator(config: GridGenConfig, max_steps: usize) -> Result<GridGenModel> {
    let mut model = GridGenModel::init(config)?;
    let mut noise_rng = Pcg32::fork(config.seed, 1);
    let base = (64usize >> config.num_blocks).max(1);
    let mut steps = 0;
    for step in 0..max_steps {
        let z = grid_noise(&model, base, base, &mut noise_rng);
        let tape = model.net.forward_tape(&z)?;
        let mag = mean_abs(&tape.output);
        if !mag.is_finite() {
            return Err(Error::Diverged(format!(
                "magnitude became non-finite at step {step} for {}",
                config.label()
            )));
        }
        if (mag - MAGNITUDE_TARGET).abs() <= MAGNITUDE_TOL {
            break;
        }
        let n = tape.output.as_slice().len() as f64;
        let outer = (mag - MAGNITUDE_TARGET).signum();
        let mut grad_out = tape.output.clone();
        for g in grad_out.as_mut_slice() {
            *g = outer * g.signum() / n;
        }
        let grads = model.net.backward(&tape, grad_out);
        model.net.apply_grads(&grads, super::freq_gen::LEARNING_RATE, super::freq_gen::GRAD_CLIP);
        steps = step + 1;
    }
    // report the magnitude on a held-out draw
    let z = grid_noise(&model, base, base, &mut noise_rng);
    model.final_magnitude = mean_abs(&model.net.forward(&z)?);
    model.trained = true;
    model.steps_run = steps;
    if !model.final_magnitude.is_finite() {
        return Err(Error::Diverged(format!("final magnitude non-finite for {}", config.label())));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(seed: u64) -> GridGenConfig {
        GridGenConfig { num_blocks: 3, seed, channels: 4 }
    }

    #[test]
    fn forward_shapes_and_errors() {
        let model = GridGenModel::init(small_config(1)).unwrap();
        let z = grid_noise(&model, 4, 4, &mut Pcg32::new(2));
        let out = grid_forward(&model, &z).unwrap();
        assert_eq!((out.channels(), out.height(), out.width()), (3, 32, 32));
        let wrong = Tensor3::zeros(2, 4, 4);
        assert!(grid_forward(&model, &wrong).is_err());
    }

    #[test]
    fn trained_magnitude_lands_in_band() {
        let model = train_grid_generator(small_config(3), 400).unwrap();
        assert!(
            (0.001..=0.02).contains(&model.final_magnitude),
            "magnitude {} outside band",
            model.final_magnitude
        );
        assert!(model.trained);
    }

    #[test]
    fn training_is_deterministic() {
        let a = train_grid_generator(small_config(4), 60).unwrap();
        let b = train_grid_generator(small_config(4), 60).unwrap();
        assert_eq!(a.net.params_flat(), b.net.params_flat());
        assert_eq!(a.final_magnitude, b.final_magnitude);
    }

    #[test]
    fn loss_decreases_on_fixed_batch_with_tiny_step() {
        let mut model = GridGenModel::init(GridGenConfig { num_blocks: 2, seed: 5, channels: 2 }).unwrap();
        let z = grid_noise(&model, 4, 4, &mut Pcg32::new(6));
        let loss = |net: &Net| (mean_abs(&net.forward(&z).unwrap()) - MAGNITUDE_TARGET).abs();
        let mut prev = loss(&model.net);
        for _ in 0..20 {
            let tape = model.net.forward_tape(&z).unwrap();
            let mag = mean_abs(&tape.output);
            let n = tape.output.as_slice().len() as f64;
            let outer = (mag - MAGNITUDE_TARGET).signum();
            let mut grad_out = tape.output.clone();
            for g in grad_out.as_mut_slice() {
                *g = outer * g.signum() / n;
            }
            let grads = model.net.backward(&tape, grad_out);
            model.net.apply_grads(&grads, 1e-4, 1.0);
            let cur = loss(&model.net);
            assert!(cur <= prev + 1e-12, "loss rose from {prev} to {cur}");
            prev = cur;
        }
    }

    #[test]
    fn magnitude_gradients_match_finite_differences() {
        let mut model = GridGenModel::init(GridGenConfig { num_blocks: 2, seed: 7, channels: 2 }).unwrap();
        let z = grid_noise(&model, 4, 4, &mut Pcg32::new(8));
        let tape = model.net.forward_tape(&z).unwrap();
        let mag = mean_abs(&tape.output);
        let min_abs = tape.output.as_slice().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        assert!(min_abs > 1e-4, "seed lands on a |·| kink: {min_abs}");
        assert!((mag - MAGNITUDE_TARGET).abs() > 1e-3, "seed lands on the outer kink");
        let n = tape.output.as_slice().len() as f64;
        let outer = (mag - MAGNITUDE_TARGET).signum();
        let mut grad_out = tape.output.clone();
        for g in grad_out.as_mut_slice() {
            *g = outer * g.signum() / n;
        }
        let analytic = model.net.grads_flat(&model.net.backward(&tape, grad_out));
        let params = model.net.params_flat();
        let h = 1e-5;
        let loss = |net: &Net| (mean_abs(&net.forward(&z).unwrap()) - MAGNITUDE_TARGET).abs();
        for idx in 0..params.len() {
            let mut plus = params.clone();
            plus[idx] += h;
            model.net.set_params_flat(&plus);
            let lp = loss(&model.net);
            let mut minus = params.clone();
            minus[idx] -= h;
            model.net.set_params_flat(&minus);
            let lm = loss(&model.net);
            model.net.set_params_flat(&params);
            let fd = (lp - lm) / (2.0 * h);
            let denom = fd.abs().max(analytic[idx].abs()).max(1e-7);
            assert!(
                (fd - analytic[idx]).abs() / denom < 1e-4,
                "param {idx}: analytic {} vs fd {fd}",
                analytic[idx]
            );
        }
    }

    #[test]
    fn zero_model_adds_nothing() {
        let mut model = GridGenModel::init(small_config(9)).unwrap();
        let zeros = vec![0.0; model.net.params_flat().len()];
        model.net.set_params_flat(&zeros);
        let img = {
            let mut t = Tensor3::zeros(3, 32, 32);
            let mut rng = Pcg32::new(10);
            for v in t.as_mut_slice() {
                *v = rng.next_f64();
            }
            t
        };
        let out = apply_grid_noise(&img, &model, &mut Pcg32::new(11)).unwrap();
        assert_eq!(out, img);

        let tiny = Tensor3::zeros(3, 12, 12); // 12 not divisible by 8
        assert!(apply_grid_noise(&tiny, &model, &mut Pcg32::new(12)).is_err());
    }
}
