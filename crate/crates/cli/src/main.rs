//! freqprint: train small generator pools, extract spectral fingerprints,
//! and run verification / identification / attenuation / lineage experiments.
//!
//! Every command seeds all randomness from `--seed` and writes a run.json
//! recording its parameters, so reruns reproduce outputs byte-for-byte.
//! Exit codes: 0 success, 1 usage error, 2 data error; failures also emit a
//! single machine-readable JSON line on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use freqprint::attribution::{best_accuracy, identify_open_set, make_pairs, open_set_metrics, roc, verify_pair, Gallery};
use freqprint::dft::{dft2, fftshift};
use freqprint::fingerprint::{attenuation_curve, extract_fingerprint, image_feature, Fingerprint};
use freqprint::io::{
    load_fingerprint, load_image, load_manifest, load_member, save_fingerprint, save_identify_report,
    save_image, save_manifest, save_matrix, save_member, save_verify_report, IdentifyRow,
    IdentifySummary, ManifestEntry, PairRow, PoolManifest, VerifySummary, MANIFEST_VERSION,
};
use freqprint::rng::{derive_seed, Pcg32};
use freqprint::synth::{
    enumerate_pool, synth_dataset, synthetic_corpus, train_freq_generator, train_grid_generator,
    BlockConfig, GridGenConfig, PoolMember, PoolScale, RESIDUAL_TARGET,
};
use freqprint::tensor::{Matrix, Tensor3};
use freqprint::{arch, Error, Result};

#[derive(Parser)]
#[command(name = "freqprint", version, about = "Spectral fingerprints of convolutional generators")]
struct Cli {
    /// Worker threads for training and pair scoring (default: all cores).
    /// Outputs do not depend on this value.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generator pool management
    Pool {
        #[command(subcommand)]
        action: PoolAction,
    },
    /// Push source images through a trained pool into a labeled dataset
    Synth {
        /// Pool directory (pool.json + weight packs)
        #[arg(long)]
        pool: PathBuf,
        /// Directory of source PGM/PPM images (grayscale is replicated to RGB)
        #[arg(long)]
        images: PathBuf,
        /// Number of dataset images to draw
        #[arg(long)]
        n: usize,
        /// Output dataset directory (one subdirectory per pool member)
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Square crop taken from each source before generation
        #[arg(long, default_value_t = 32)]
        crop: usize,
    },
    /// Average a directory of images into one fingerprint file
    Fingerprint {
        #[arg(long)]
        images: PathBuf,
        /// Radial high-pass cutoff as a fraction of Nyquist
        #[arg(long, default_value_t = freqprint::fingerprint::DEFAULT_CUTOFF)]
        cutoff: f64,
        /// Output fingerprint file (FPT1 tensor)
        #[arg(long)]
        out: PathBuf,
    },
    /// 1:1 verification over a labeled dataset directory
    Verify {
        /// Dataset directory: one subdirectory of images per model
        #[arg(long)]
        images: PathBuf,
        /// Images per side of each pair; one experiment per value
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
        ns: Vec<usize>,
        /// Positive pair count (an equal negative count is added)
        #[arg(long, default_value_t = 500)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = freqprint::fingerprint::DEFAULT_CUTOFF)]
        cutoff: f64,
        /// Report directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Open-set 1:N identification of probe images against a gallery
    Identify {
        /// Directory of gallery fingerprint files; the file stem is the model id
        #[arg(long)]
        gallery: PathBuf,
        /// Directory of probe images; a stem prefix before the last '_' that
        /// matches a gallery id marks the probe's true model
        #[arg(long)]
        probes: PathBuf,
        /// Similarity threshold below which a probe is declared unknown
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = freqprint::fingerprint::DEFAULT_CUTOFF)]
        cutoff: f64,
        /// Report directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-component high-frequency attenuation curve of an architecture
    Attenuation {
        /// Architecture file (.arch DSL)
        #[arg(long)]
        arch: PathBuf,
        /// Input image matching the architecture's declared input
        #[arg(long)]
        input: PathBuf,
        /// Seed for the instantiated random weights
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV (component,hp_ratio)
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise cosine similarity matrix of fingerprint files
    Lineage {
        /// Fingerprint files in display order
        #[arg(long, num_args = 2.., required = true)]
        fingerprints: Vec<PathBuf>,
        /// Output CSV matrix
        #[arg(long)]
        out: PathBuf,
    },
    /// Export an image's magnitude spectrum as an FPT1 matrix
    Spectrum {
        #[arg(long)]
        image: PathBuf,
        /// Store log(1+magnitude) instead of raw magnitude
        #[arg(long)]
        log: bool,
        /// Center the DC bin (fftshift) for plotting
        #[arg(long)]
        shifted: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PoolAction {
    /// Train pool members and write pool.json plus one weight pack per model
    Train {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Scale::Desk)]
        scale: Scale,
        /// Seeds per architecture cell at desk scale
        #[arg(long, default_value_t = 1)]
        seeds_per_arch: usize,
        /// Train only this many members: grid depths first, then frequency
        /// architectures evenly spaced across the enumeration
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training images (default: a synthetic power-law corpus)
        #[arg(long)]
        images: Option<PathBuf>,
        /// Training image size (center-cropped from --images when given)
        #[arg(long, default_value_t = 16)]
        size: usize,
        /// Synthetic training corpus size
        #[arg(long, default_value_t = 8)]
        corpus: usize,
        #[arg(long, default_value_t = 600)]
        max_steps: usize,
        #[arg(long, default_value_t = 400)]
        grid_max_steps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Desk,
    Full,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            eprintln!("{}", serde_json::json!({ "kind": "usage", "error": e.to_string() }));
            return ExitCode::from(1);
        }
    };
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    match run(cli.command, jobs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "kind": "data", "error": e.to_string() }));
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, jobs: usize) -> Result<()> {
    match command {
        Command::Pool { action } => match action {
            PoolAction::Train {
                out,
                scale,
                seeds_per_arch,
                limit,
                seed,
                images,
                size,
                corpus,
                max_steps,
                grid_max_steps,
            } => pool_train(
                &out, scale, seeds_per_arch, limit, seed, images.as_deref(), size, corpus,
                max_steps, grid_max_steps, jobs,
            ),
        },
        Command::Synth { pool, images, n, out, seed, crop } => synth(&pool, &images, n, &out, seed, crop),
        Command::Fingerprint { images, cutoff, out } => fingerprint_cmd(&images, cutoff, &out),
        Command::Verify { images, ns, pairs, seed, cutoff, out } => verify(&images, &ns, pairs, seed, cutoff, &out, jobs),
        Command::Identify { gallery, probes, tau, cutoff, out } => identify(&gallery, &probes, tau, cutoff, &out),
        Command::Attenuation { arch, input, seed, out } => attenuation(&arch, &input, seed, &out),
        Command::Lineage { fingerprints, out } => lineage(&fingerprints, &out),
        Command::Spectrum { image, log, shifted, out } => spectrum(&image, log, shifted, &out),
    }
}

// -------------------------------------------------------------- helpers --

/// Index-stable parallel map; the output never depends on the thread count.
fn parallel_map<T, U, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let chunks: Vec<Vec<(usize, Result<U>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|tid| {
                let f = &f;
                s.spawn(move || {
                    (tid..items.len())
                        .step_by(jobs)
                        .map(|i| (i, f(&items[i])))
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut slots: Vec<Option<U>> = items.iter().map(|_| None).collect();
    let mut first_err: Option<(usize, Error)> = None;
    for (i, r) in chunks.into_iter().flatten() {
        match r {
            Ok(v) => slots[i] = Some(v),
            Err(e) => {
                if first_err.as_ref().is_none_or(|(j, _)| i < *j) {
                    first_err = Some((i, e));
                }
            }
        }
    }
    if let Some((_, e)) = first_err {
        return Err(e);
    }
    Ok(slots.into_iter().map(|v| v.expect("all slots filled")).collect())
}

fn read_dir_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?
        .collect::<std::io::Result<Vec<_>>>()?;
    Ok(entries.into_iter().map(|e| e.path()).collect())
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = read_dir_paths(dir)?
        .into_iter()
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm" | "ppm" | "PGM" | "PPM")
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!("no .pgm/.ppm images in {}", dir.display())));
    }
    Ok(files)
}

fn list_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = read_dir_paths(dir)?.into_iter().filter(|p| p.is_dir()).collect();
    dirs.sort();
    Ok(dirs)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Grayscale sources triple up so 3-channel generators accept them.
fn load_rgb(path: &Path) -> Result<Tensor3> {
    let img = load_image(path)?;
    if img.channels() == 3 {
        return Ok(img);
    }
    let plane = img.channel_matrix(0);
    Tensor3::from_channels(vec![plane.clone(), plane.clone(), plane])
}

fn write_run_json(path: &Path, value: serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::Format(format!("run.json encode: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn sidecar_run_json(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    name.push_str(".run.json");
    out.with_file_name(name)
}

// ---------------------------------------------------------- pool train --

enum TrainJob {
    Freq(String, BlockConfig),
    Grid(String, GridGenConfig),
}

#[allow(clippy::too_many_arguments)]
fn pool_train(
    out: &Path,
    scale: Scale,
    seeds_per_arch: usize,
    limit: Option<usize>,
    seed: u64,
    images: Option<&Path>,
    size: usize,
    corpus: usize,
    max_steps: usize,
    grid_max_steps: usize,
    jobs: usize,
) -> Result<()> {
    let pool_scale = match scale {
        Scale::Desk => PoolScale::Desk { seeds_per_arch },
        Scale::Full => PoolScale::Full,
    };
    let spec = enumerate_pool(pool_scale, seed);

    // stable ids index into the full enumeration, so a --limit subset keeps
    // the same names the full pool would use
    let freq_ids: Vec<String> = (0..spec.freq.len()).map(|i| format!("f{i:03}")).collect();
    let grid_ids: Vec<String> = (0..spec.grid.len()).map(|i| format!("g{i:03}")).collect();
    let mut work: Vec<TrainJob> = Vec::new();
    match limit {
        None => {
            for (id, c) in freq_ids.iter().zip(&spec.freq) {
                work.push(TrainJob::Freq(id.clone(), *c));
            }
            for (id, c) in grid_ids.iter().zip(&spec.grid) {
                work.push(TrainJob::Grid(id.clone(), *c));
            }
        }
        Some(limit) => {
            if limit == 0 || limit > spec.freq.len() + spec.grid.len() {
                return Err(Error::InvalidArg(format!(
                    "--limit must be 1..={}, got {limit}",
                    spec.freq.len() + spec.grid.len()
                )));
            }
            // mixed subset: a few grid depths plus evenly spaced freq archs
            let n_grid = (limit / 5).min(3).min(spec.grid.len());
            let n_freq = limit - n_grid;
            if n_freq > spec.freq.len() {
                return Err(Error::InvalidArg(format!(
                    "--limit {limit} needs {n_freq} freq models, pool has {}",
                    spec.freq.len()
                )));
            }
            for k in 0..n_freq {
                let i = k * spec.freq.len() / n_freq;
                work.push(TrainJob::Freq(freq_ids[i].clone(), spec.freq[i]));
            }
            for i in 0..n_grid {
                work.push(TrainJob::Grid(grid_ids[i].clone(), spec.grid[i]));
            }
        }
    }

    let train_images: Vec<Tensor3> = match images {
        Some(dir) => list_images(dir)?
            .iter()
            .map(|p| Ok(center_crop(&load_rgb(p)?, size)?))
            .collect::<Result<Vec<_>>>()?,
        None => {
            let mut rng = Pcg32::new(derive_seed(seed, u64::MAX));
            synthetic_corpus(corpus, size, &mut rng)
        }
    };

    fs::create_dir_all(out)?;
    let members = parallel_map(jobs, &work, |job| match job {
        TrainJob::Freq(id, config) => {
            let m = train_freq_generator(*config, &train_images, RESIDUAL_TARGET, max_steps)?;
            Ok((id.clone(), PoolMember::Freq(m)))
        }
        TrainJob::Grid(id, config) => {
            let m = train_grid_generator(*config, grid_max_steps)?;
            Ok((id.clone(), PoolMember::Grid(m)))
        }
    })?;

    let mut entries: Vec<ManifestEntry> = Vec::with_capacity(members.len());
    for (id, member) in &members {
        entries.push(save_member(out, id, member)?);
    }
    save_manifest(out, &PoolManifest { version: MANIFEST_VERSION, members: entries })?;
    write_run_json(
        &out.join("run.json"),
        serde_json::json!({
            "command": "pool train",
            "scale": match scale { Scale::Desk => "desk", Scale::Full => "full" },
            "seeds_per_arch": seeds_per_arch,
            "limit": limit,
            "seed": seed,
            "images": images.map(|p| p.display().to_string()),
            "size": size,
            "corpus": corpus,
            "max_steps": max_steps,
            "grid_max_steps": grid_max_steps,
            "trained": members.len(),
        }),
    )?;
    println!("trained {} models -> {}", members.len(), out.display());
    Ok(())
}

fn center_crop(img: &Tensor3, size: usize) -> Result<Tensor3> {
    if img.height() < size || img.width() < size {
        return Err(Error::InvalidArg(format!(
            "image {}x{} smaller than training size {size}",
            img.height(),
            img.width()
        )));
    }
    let y0 = (img.height() - size) / 2;
    let x0 = (img.width() - size) / 2;
    Ok(freqprint::synth::crop_tensor(img, y0, x0, size))
}

// ---------------------------------------------------------------- synth --

fn synth(pool: &Path, images: &Path, n: usize, out: &Path, seed: u64, crop: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArg("--n must be positive".into()));
    }
    let manifest = load_manifest(pool)?;
    let members: Vec<PoolMember> = manifest
        .members
        .iter()
        .map(|e| load_member(pool, e))
        .collect::<Result<Vec<_>>>()?;
    let sources: Vec<Tensor3> = list_images(images)?
        .iter()
        .map(|p| load_rgb(p))
        .collect::<Result<Vec<_>>>()?;

    fs::create_dir_all(out)?;
    let mut rng = Pcg32::new(seed);
    let mut counts = vec![0usize; members.len()];
    for _ in 0..n {
        let src = &sources[rng.below(sources.len())];
        let labeled = synth_dataset(&members, std::slice::from_ref(src), crop, &mut rng)?;
        for item in labeled {
            let id = &manifest.members[item.label].id;
            let dir = out.join(id);
            fs::create_dir_all(&dir)?;
            save_image(&dir.join(format!("{}_{:05}.ppm", id, counts[item.label])), &item.image)?;
            counts[item.label] += 1;
        }
    }
    write_run_json(
        &out.join("run.json"),
        serde_json::json!({
            "command": "synth",
            "pool": pool.display().to_string(),
            "images": images.display().to_string(),
            "n": n,
            "seed": seed,
            "crop": crop,
            "per_member": manifest.members.iter().map(|e| e.id.clone()).zip(counts.iter().copied()).collect::<Vec<_>>(),
        }),
    )?;
    println!("wrote {n} images across {} members -> {}", members.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------- fingerprint --

fn fingerprint_cmd(images: &Path, cutoff: f64, out: &Path) -> Result<()> {
    let imgs: Vec<Tensor3> = list_images(images)?
        .iter()
        .map(|p| load_image(p))
        .collect::<Result<Vec<_>>>()?;
    let fp = extract_fingerprint(&imgs, cutoff)?;
    save_fingerprint(out, &fp)?;
    write_run_json(
        &sidecar_run_json(out),
        serde_json::json!({
            "command": "fingerprint",
            "images": images.display().to_string(),
            "cutoff": cutoff,
            "n_images": fp.n_images,
            "dims": [fp.height, fp.width],
        }),
    )?;
    println!("fingerprint over {} images -> {}", fp.n_images, out.display());
    Ok(())
}

// --------------------------------------------------------------- verify --

fn verify(
    images: &Path,
    ns_list: &[usize],
    n_pairs: usize,
    seed: u64,
    cutoff: f64,
    out: &Path,
    jobs: usize,
) -> Result<()> {
    let model_dirs = list_dirs(images)?;
    if model_dirs.len() < 2 {
        return Err(Error::Data(format!(
            "{} has {} model subdirectories, verification needs at least 2",
            images.display(),
            model_dirs.len()
        )));
    }
    let pool: Vec<Vec<Tensor3>> = model_dirs
        .iter()
        .map(|d| list_images(d)?.iter().map(|p| load_image(p)).collect())
        .collect::<Result<Vec<_>>>()?;
    let counts: Vec<usize> = pool.iter().map(|m| m.len()).collect();

    fs::create_dir_all(out)?;
    let mut summary_csv = String::from("ns,pairs,auc,accuracy,tau\n");
    for &ns in ns_list {
        let mut rng = Pcg32::new(derive_seed(seed, ns as u64));
        let pairs = make_pairs(&counts, ns, n_pairs, n_pairs, &mut rng)?;
        let scores = parallel_map(jobs, &pairs, |p| verify_pair(p, &pool, cutoff))?;
        let rows: Vec<PairRow> = scores
            .iter()
            .zip(&pairs)
            .enumerate()
            .map(|(i, (&score, p))| PairRow { pair: i, score, label: p.label })
            .collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.label).collect();
        let curve = roc(&scores, &labels)?;
        let (accuracy, tau) = best_accuracy(&scores, &labels)?;
        let dir = out.join(format!("ns{ns:02}"));
        fs::create_dir_all(&dir)?;
        save_verify_report(
            &dir,
            &rows,
            &VerifySummary { n_s: ns, cutoff, n_pairs: rows.len(), auc: curve.auc, accuracy, tau },
        )?;
        summary_csv.push_str(&format!("{ns},{},{},{accuracy},{tau}\n", rows.len(), curve.auc));
        println!("ns={ns}: auc {:.4}, accuracy {accuracy:.4} (tau {tau:.4})", curve.auc);
    }
    fs::write(out.join("summary.csv"), summary_csv)?;
    write_run_json(
        &out.join("run.json"),
        serde_json::json!({
            "command": "verify",
            "images": images.display().to_string(),
            "models": model_dirs.iter().map(|d| stem(d)).collect::<Vec<_>>(),
            "ns": ns_list,
            "pairs": n_pairs,
            "seed": seed,
            "cutoff": cutoff,
        }),
    )?;
    Ok(())
}

// ------------------------------------------------------------- identify --

fn identify(gallery_dir: &Path, probes_dir: &Path, tau: f64, cutoff: f64, out: &Path) -> Result<()> {
    let mut fp_files: Vec<PathBuf> = read_dir_paths(gallery_dir)?
        .into_iter()
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("fpt"))
        .collect();
    fp_files.sort();
    if fp_files.is_empty() {
        return Err(Error::Data(format!("no .fpt fingerprints in {}", gallery_dir.display())));
    }
    let ids: Vec<String> = fp_files.iter().map(|p| stem(p)).collect();
    let fps: Vec<Fingerprint> = fp_files
        .iter()
        .map(|p| load_fingerprint(p))
        .collect::<Result<Vec<_>>>()?;
    let gallery = Gallery::new(ids.clone(), fps, tau)?;

    let probe_files = list_images(probes_dir)?;
    let mut rows = Vec::with_capacity(probe_files.len());
    let mut probes = Vec::with_capacity(probe_files.len());
    let mut truths = Vec::with_capacity(probe_files.len());
    for path in &probe_files {
        let name = stem(path);
        // "<model>_<k>" probes are labeled; anything else counts as unknown
        let truth = name
            .rsplit_once('_')
            .map(|(prefix, _)| prefix.to_string())
            .filter(|p| ids.iter().any(|id| id == p));
        let feature = image_feature(&load_image(path)?, cutoff)?;
        let (decision, score) = identify_open_set(&feature, &gallery)?;
        let best = best_gallery_id(&feature, &gallery)?;
        rows.push(IdentifyRow {
            probe: name,
            truth: truth.clone(),
            best,
            score,
            decision: decision.map(str::to_string),
        });
        probes.push(feature);
        truths.push(truth);
    }
    let (accuracy, auc) = open_set_metrics(&probes, &truths, &gallery)?;
    let n_known = truths.iter().filter(|t| t.is_some()).count();
    fs::create_dir_all(out)?;
    save_identify_report(
        out,
        &rows,
        &IdentifySummary { tau, cutoff, n_probes: rows.len(), n_known, accuracy, auc },
    )?;
    write_run_json(
        &out.join("run.json"),
        serde_json::json!({
            "command": "identify",
            "gallery": gallery_dir.display().to_string(),
            "probes": probes_dir.display().to_string(),
            "tau": tau,
            "cutoff": cutoff,
            "gallery_ids": ids,
        }),
    )?;
    match auc {
        Some(a) => println!("accuracy {accuracy:.4} over {n_known} known probes, known/unknown auc {a:.4}"),
        None => println!("accuracy {accuracy:.4} over {n_known} known probes"),
    }
    Ok(())
}

/// Argmax gallery id ignoring the threshold (same tie-break as identification).
fn best_gallery_id(feature: &Fingerprint, gallery: &Gallery) -> Result<String> {
    let open = Gallery::new(gallery.ids.clone(), gallery.fingerprints.clone(), -2.0)?;
    let (id, _) = identify_open_set(feature, &open)?;
    Ok(id.expect("tau -2 always accepts").to_string())
}

// ---------------------------------------------------------- attenuation --

fn attenuation(arch_file: &Path, input: &Path, seed: u64, out: &Path) -> Result<()> {
    let spec = arch::parse(&fs::read_to_string(arch_file)?)?;
    let img = load_image(input)?;
    let (_, taps) = arch::forward_sim(&spec, &img, seed)?;
    let curve = attenuation_curve(&taps)?;
    let mut csv = String::from("component,hp_ratio\n");
    for (name, hp) in &curve {
        csv.push_str(&format!("{name},{hp}\n"));
    }
    fs::write(out, csv)?;
    write_run_json(
        &sidecar_run_json(out),
        serde_json::json!({
            "command": "attenuation",
            "arch": arch_file.display().to_string(),
            "input": input.display().to_string(),
            "seed": seed,
            "components": curve.len(),
        }),
    )?;
    println!("{} components -> {}", curve.len(), out.display());
    Ok(())
}

// -------------------------------------------------------------- lineage --

fn lineage(files: &[PathBuf], out: &Path) -> Result<()> {
    let ids: Vec<String> = files.iter().map(|p| stem(p)).collect();
    let fps: Vec<Fingerprint> = files
        .iter()
        .map(|p| load_fingerprint(p))
        .collect::<Result<Vec<_>>>()?;
    let m = freqprint::attribution::lineage_matrix(&fps)?;
    let mut csv = String::from("id");
    for id in &ids {
        csv.push(',');
        csv.push_str(id);
    }
    csv.push('\n');
    for (i, id) in ids.iter().enumerate() {
        csv.push_str(id);
        for j in 0..ids.len() {
            csv.push_str(&format!(",{}", m[(i, j)]));
        }
        csv.push('\n');
    }
    fs::write(out, csv)?;
    write_run_json(
        &sidecar_run_json(out),
        serde_json::json!({
            "command": "lineage",
            "fingerprints": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        }),
    )?;
    println!("{}x{} similarity matrix -> {}", ids.len(), ids.len(), out.display());
    Ok(())
}

// ------------------------------------------------------------- spectrum --

fn spectrum(image: &Path, log: bool, shifted: bool, out: &Path) -> Result<()> {
    let img = load_image(image)?;
    let mut mag: Matrix = dft2(&img.channel_mean())?.magnitude();
    if log {
        mag = Matrix::from_fn(mag.height(), mag.width(), |u, v| mag[(u, v)].ln_1p());
    }
    if shifted {
        mag = fftshift(&mag);
    }
    save_matrix(out, &mag)?;
    write_run_json(
        &sidecar_run_json(out),
        serde_json::json!({
            "command": "spectrum",
            "image": image.display().to_string(),
            "log": log,
            "shifted": shifted,
            "dims": [mag.height(), mag.width()],
        }),
    )?;
    println!("{}x{} spectrum -> {}", mag.height(), mag.width(), out.display());
    Ok(())
}
