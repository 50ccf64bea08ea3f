//! Synthetic generator pools: enumeration, training corpora, and labeled
//! dataset synthesis.
//!
//! Two families live here. The freq family sweeps a five-factor architecture
//! grid (conv depth L, layer order S, upsampler U, activation A, norm N) of
//! reconstructing autoencoders; the grid family stacks stride-2 deconvolution
//! blocks that turn small noise into lattice-patterned image noise.

pub mod freq_gen;
pub mod grid_gen;
pub mod layers;

pub use freq_gen::{
    fine_tune_freq_generator, freq_forward, train_freq_generator, BlockConfig, FreqGenModel,
    SOrder, UKind, RESIDUAL_TARGET,
};
pub use grid_gen::{
    apply_grid_noise, grid_forward, grid_noise, train_grid_generator, GridGenConfig,
    GridGenModel, MAGNITUDE_TARGET,
};
pub use layers::{Net, Stage};

use crate::dft::power_law_image;
use crate::norm_act::{ActKind, NormKind};
use crate::rng::{derive_seed, Pcg32};
use crate::tensor::Tensor3;
use crate::{Error, Result};

/// Pool sizing: the full published counts, or a desk-scale subset that keeps
/// the whole architecture grid but fewer seeds per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolScale {
    /// 20 seeds × 144 freq architectures + 500 seeds × 3 grid depths.
    Full,
    /// `seeds_per_arch` seeds over the same 144 architectures / 3 depths.
    Desk { seeds_per_arch: usize },
}

pub const FREQ_ARCH_COUNT: usize = 144; // 2·2·3·4·3
pub const GRID_DEPTHS: [usize; 3] = [3, 4, 5];
pub const DESK_FEATURE_DIM: usize = 16;
pub const DESK_KERNEL: usize = 3;
pub const DESK_GRID_CHANNELS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolSpec {
    pub freq: Vec<BlockConfig>,
    pub grid: Vec<GridGenConfig>,
}

/// Enumerate every pool member's config. Seeds are derived from `root_seed`
/// and the member's global index, so one seed pins the entire pool.
pub fn enumerate_pool(scale: PoolScale, root_seed: u64) -> PoolSpec {
    let seeds_per_arch = match scale {
        PoolScale::Full => 20,
        PoolScale::Desk { seeds_per_arch } => seeds_per_arch,
    };
    let grid_seeds = match scale {
        PoolScale::Full => 500,
        PoolScale::Desk { seeds_per_arch } => seeds_per_arch,
    };
    let mut freq = Vec::new();
    let mut index = 0u64;
    for l in [1usize, 2] {
        for s in [SOrder::ConvFirst, SOrder::NormActFirst] {
            for u in [UKind::Nearest, UKind::Bilinear, UKind::Deconv] {
                for a in [ActKind::Relu, ActKind::Sigmoid, ActKind::Tanh, ActKind::None] {
                    for n in [NormKind::Batch, NormKind::Instance, NormKind::None] {
                        for _slot in 0..seeds_per_arch {
                            freq.push(BlockConfig {
                                l,
                                s,
                                u,
                                a,
                                n,
                                seed: derive_seed(root_seed, index),
                                feature_dim: DESK_FEATURE_DIM,
                                k: DESK_KERNEL,
                            });
                            index += 1;
                        }
                    }
                }
            }
        }
    }
    let mut grid = Vec::new();
    for &num_blocks in &GRID_DEPTHS {
        for _slot in 0..grid_seeds {
            grid.push(GridGenConfig {
                num_blocks,
                seed: derive_seed(root_seed, (1 << 32) | index),
                channels: DESK_GRID_CHANNELS,
            });
            index += 1;
        }
    }
    PoolSpec { freq, grid }
}

/// Power-law training/probe images: 3 channels sharing one (a,b) exponent
/// pair per image, phases independent. Stands in for a natural-image corpus.
pub fn synthetic_corpus(count: usize, size: usize, rng: &mut Pcg32) -> Vec<Tensor3> {
    (0..count)
        .map(|_| {
            let a = rng.uniform(0.5, 3.5);
            let b = rng.uniform(0.5, 3.5);
            let planes = (0..3)
                .map(|_| power_law_image(size, size, a, b, rng).expect("valid exponents"))
                .collect();
            Tensor3::from_channels(planes).expect("equal sizes")
        })
        .collect()
}

/// A trained (or at least initialized) pool member of either family.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum PoolMember {
    Freq(FreqGenModel),
    Grid(GridGenModel),
}

impl PoolMember {
    pub fn label(&self) -> String {
        match self {
            PoolMember::Freq(m) => m.config.label(),
            PoolMember::Grid(m) => m.config.label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: Tensor3,
    /// Index into the pool member list that produced the image.
    pub label: usize,
}

/// Push each source image through one uniformly drawn pool member: freq
/// members regenerate a random crop, grid members overlay their noise on it.
/// Outputs are clamped to [0,1]. Draw order per source: crop y, crop x,
/// member index, then any noise the member needs.
pub fn synth_dataset(
    members: &[PoolMember],
    sources: &[Tensor3],
    crop: usize,
    rng: &mut Pcg32,
) -> Result<Vec<LabeledImage>> {
    if members.is_empty() {
        return Err(Error::EmptyInput("synth_dataset with no pool members"));
    }
    let mut out = Vec::with_capacity(sources.len());
    for src in sources {
        if src.height() < crop || src.width() < crop {
            return Err(Error::InvalidArg(format!(
                "source {}x{} smaller than crop {crop}",
                src.height(),
                src.width()
            )));
        }
        let y0 = rng.below(src.height() - crop + 1);
        let x0 = rng.below(src.width() - crop + 1);
        let label = rng.below(members.len());
        let cropped = crop_tensor(src, y0, x0, crop);
        let image = match &members[label] {
            PoolMember::Freq(m) => {
                let mut img = freq_forward(m, &cropped)?;
                for v in img.as_mut_slice() {
                    *v = v.clamp(0.0, 1.0);
                }
                img
            }
            PoolMember::Grid(m) => apply_grid_noise(&cropped, m, rng)?,
        };
        out.push(LabeledImage { image, label });
    }
    Ok(out)
}

pub fn crop_tensor(src: &Tensor3, y0: usize, x0: usize, size: usize) -> Tensor3 {
    let mut out = Tensor3::zeros(src.channels(), size, size);
    for c in 0..src.channels() {
        for y in 0..size {
            for x in 0..size {
                out[(c, y, x)] = src[(c, y0 + y, x0 + x)];
            }
        }
    }
    out
}
