//! File formats: binary PGM/PPM images, the FPT1 tensor container, model
//! weight packs, pool manifests, and experiment reports.
//!
//! Everything here is byte-deterministic: writing the same values twice
//! produces identical files, which is what makes whole experiment reruns
//! reproducible bit-for-bit.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::fingerprint::Fingerprint;
use crate::synth::layers::Net;
use crate::synth::{FreqGenModel, GridGenModel, PoolMember};
use crate::tensor::{Matrix, Tensor3};
use crate::{Error, Result};

// ------------------------------------------------------------ tensor file --

pub const TENSOR_MAGIC: [u8; 4] = *b"FPT1";
const DTYPE_F32: u8 = 0;
const DTYPE_F64: u8 = 1;
const MAX_RANK: usize = 8;

/// A dimensioned block of f64 values; the in-memory form of an FPT1 file.
/// f32 files widen on load, f64 files round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorData {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorData {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let want = checked_len(&dims)?;
        if data.len() != want {
            return Err(Error::DimMismatch(format!(
                "tensor dims {dims:?} need {want} values, got {}",
                data.len()
            )));
        }
        Ok(TensorData { dims, data })
    }
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.len() > MAX_RANK {
        return Err(Error::Format(format!("tensor rank must be 1..={MAX_RANK}, got {}", dims.len())));
    }
    let mut n: usize = 1;
    for &d in dims {
        if d == 0 || d > u32::MAX as usize {
            return Err(Error::Format(format!("tensor dimension {d} out of range")));
        }
        n = n
            .checked_mul(d)
            .ok_or_else(|| Error::Format(format!("tensor dims {dims:?} overflow")))?;
    }
    Ok(n)
}

pub fn save_tensor(path: &Path, t: &TensorData) -> Result<()> {
    checked_len(&t.dims)?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&TENSOR_MAGIC)?;
    out.write_all(&[DTYPE_F64, t.dims.len() as u8])?;
    for &d in &t.dims {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in &t.data {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_tensor(path: &Path) -> Result<TensorData> {
    let bytes = fs::read(path)?;
    let fail = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < 6 {
        return Err(fail("file shorter than the FPT1 header"));
    }
    if bytes[..4] != TENSOR_MAGIC {
        return Err(fail("bad magic, not an FPT1 tensor file"));
    }
    let dtype = bytes[4];
    let rank = bytes[5] as usize;
    if dtype != DTYPE_F32 && dtype != DTYPE_F64 {
        return Err(fail(&format!("unknown dtype code {dtype}")));
    }
    if rank == 0 || rank > MAX_RANK {
        return Err(fail(&format!("rank {rank} out of range")));
    }
    let dim_end = 6 + 4 * rank;
    if bytes.len() < dim_end {
        return Err(fail("truncated dimension list"));
    }
    let dims: Vec<usize> = (0..rank)
        .map(|i| {
            let o = 6 + 4 * i;
            u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
        })
        .collect();
    let count = checked_len(&dims).map_err(|_| fail(&format!("bad dims {dims:?}")))?;
    let width = if dtype == DTYPE_F64 { 8 } else { 4 };
    let want = dim_end + count * width;
    if bytes.len() != want {
        return Err(fail(&format!(
            "payload length mismatch: dims {dims:?} need {want} bytes, file has {}",
            bytes.len()
        )));
    }
    let data = bytes[dim_end..]
        .chunks_exact(width)
        .map(|c| {
            if dtype == DTYPE_F64 {
                f64::from_le_bytes(c.try_into().unwrap())
            } else {
                f32::from_le_bytes(c.try_into().unwrap()) as f64
            }
        })
        .collect();
    Ok(TensorData { dims, data })
}

pub fn save_matrix(path: &Path, m: &Matrix) -> Result<()> {
    save_tensor(path, &TensorData::new(vec![m.height(), m.width()], m.as_slice().to_vec())?)
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    let t = load_tensor(path)?;
    if t.dims.len() != 2 {
        return Err(Error::Format(format!("{}: expected rank 2, got {:?}", path.display(), t.dims)));
    }
    Matrix::from_vec(t.dims[0], t.dims[1], t.data)
}

pub fn save_tensor3(path: &Path, t: &Tensor3) -> Result<()> {
    save_tensor(
        path,
        &TensorData::new(vec![t.channels(), t.height(), t.width()], t.as_slice().to_vec())?,
    )
}

pub fn load_tensor3(path: &Path) -> Result<Tensor3> {
    let t = load_tensor(path)?;
    if t.dims.len() != 3 {
        return Err(Error::Format(format!("{}: expected rank 3, got {:?}", path.display(), t.dims)));
    }
    Tensor3::from_vec(t.dims[0], t.dims[1], t.dims[2], t.data)
}

// A fingerprint serializes as one rank-1 tensor:
// [height, width, cutoff, n_images, vector...].
pub fn save_fingerprint(path: &Path, fp: &Fingerprint) -> Result<()> {
    let mut data = vec![fp.height as f64, fp.width as f64, fp.cutoff, fp.n_images as f64];
    data.extend_from_slice(&fp.vector);
    save_tensor(path, &TensorData::new(vec![data.len()], data)?)
}

pub fn load_fingerprint(path: &Path) -> Result<Fingerprint> {
    let t = load_tensor(path)?;
    let fail = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if t.dims.len() != 1 || t.data.len() < 5 {
        return Err(fail("not a packed fingerprint"));
    }
    let (height, width) = (t.data[0] as usize, t.data[1] as usize);
    let cutoff = t.data[2];
    let n_images = t.data[3] as usize;
    let vector = t.data[4..].to_vec();
    if vector.len() != height * width {
        return Err(fail(&format!(
            "fingerprint says {height}x{width} but carries {} values",
            vector.len()
        )));
    }
    let norm: f64 = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(fail(&format!("fingerprint vector norm {norm} is not 1")));
    }
    Ok(Fingerprint { vector, height, width, cutoff, n_images })
}

// ------------------------------------------------------------ pgm / ppm --

/// 8-bit binary PGM (P5, one channel) or PPM (P6, three channels), scaled to
/// [0,1].
pub fn load_image(path: &Path) -> Result<Tensor3> {
    let bytes = fs::read(path)?;
    let fail = |msg: String| Error::Format(format!("{}: {msg}", path.display()));
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(fail("not a binary PGM (P5) or PPM (P6) file".into())),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3]; // width, height, maxval
    for field in &mut fields {
        // whitespace and # comments separate header fields
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while !matches!(bytes.get(pos), None | Some(b'\n')) {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_digit() => break,
                Some(b) => return Err(fail(format!("unexpected header byte {:#04x}", b))),
                None => return Err(fail("header ended early".into())),
            }
        }
        let mut v: usize = 0;
        while let Some(b) = bytes.get(pos).filter(|b| b.is_ascii_digit()) {
            v = v
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| fail("header number overflow".into()))?;
            pos += 1;
        }
        *field = v;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(fail(format!("only maxval 255 is supported, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(fail("zero image dimension".into()));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(fail("missing whitespace after maxval".into())),
    }
    let want = width * height * channels;
    let payload = &bytes[pos..];
    if payload.len() != want {
        return Err(fail(format!(
            "payload has {} bytes, {width}x{height}x{channels} needs {want}",
            payload.len()
        )));
    }
    // interleaved rows -> planar channels
    let mut out = Tensor3::zeros(channels, height, width);
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                out[(c, y, x)] = payload[(y * width + x) * channels + c] as f64 / 255.0;
            }
        }
    }
    Ok(out)
}

/// Write 1 channel as P5 or 3 channels as P6; values clamp to [0,1] and
/// quantize with round-half-up.
pub fn save_image(path: &Path, img: &Tensor3) -> Result<()> {
    let channels = img.channels();
    let tag = match channels {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::InvalidArg(format!("can only save 1- or 3-channel images, got {c}"))),
    };
    let (h, w) = (img.height(), img.width());
    let mut out = BufWriter::new(fs::File::create(path)?);
    write!(out, "{tag}\n{w} {h}\n255\n")?;
    let mut row = Vec::with_capacity(w * channels);
    for y in 0..h {
        row.clear();
        for x in 0..w {
            for c in 0..channels {
                let v = (img[(c, y, x)].clamp(0.0, 1.0) * 255.0).round();
                row.push(v as u8);
            }
        }
        out.write_all(&row)?;
    }
    out.flush()?;
    Ok(())
}

// -------------------------------------------------------- model weights --

// A model's full state as one flat f64 vector: every trainable parameter in
// layer order, then each norm's frozen running stats (flag + mean/var pairs),
// so batch-norm models generate identically after a round trip.
fn pack_net(net: &Net) -> Vec<f64> {
    let mut out = net.params_flat();
    out.push(net.norms.len() as f64);
    for n in &net.norms {
        match &n.frozen {
            None => out.push(0.0),
            Some((mean, var)) => {
                out.push(1.0);
                out.push(mean.len() as f64);
                out.extend_from_slice(mean);
                out.extend_from_slice(var);
            }
        }
    }
    out
}

fn unpack_net(net: &mut Net, flat: &[f64]) -> Result<()> {
    let n_params = net.params_flat().len();
    let fail = |msg: &str| Error::Format(format!("weight pack: {msg}"));
    if flat.len() < n_params + 1 {
        return Err(fail(&format!("{} values cannot hold {n_params} parameters", flat.len())));
    }
    net.set_params_flat(&flat[..n_params]);
    let mut pos = n_params;
    let mut take = |k: usize| -> Result<&[f64]> {
        if pos + k > flat.len() {
            return Err(fail("truncated frozen-stats section"));
        }
        let s = &flat[pos..pos + k];
        pos += k;
        Ok(s)
    };
    let count = take(1)?[0] as usize;
    if count != net.norms.len() {
        return Err(fail(&format!("{count} norm entries for a net with {}", net.norms.len())));
    }
    for i in 0..net.norms.len() {
        let has = take(1)?[0];
        if has == 0.0 {
            net.norms[i].frozen = None;
        } else {
            let ch = take(1)?[0] as usize;
            if ch != net.norms[i].gamma.len() {
                return Err(fail(&format!("frozen stats for {ch} channels, norm has {}", net.norms[i].gamma.len())));
            }
            let mean = take(ch)?.to_vec();
            let var = take(ch)?.to_vec();
            net.norms[i].frozen = Some((mean, var));
        }
    }
    if pos != flat.len() {
        return Err(fail("trailing bytes after frozen stats"));
    }
    Ok(())
}

// ------------------------------------------------------------- manifest --

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", content = "config", rename_all = "lowercase")]
pub enum MemberConfig {
    Freq(crate::synth::BlockConfig),
    Grid(crate::synth::GridGenConfig),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(flatten)]
    pub config: MemberConfig,
    /// Final residual (freq) or output magnitude (grid) after training.
    pub final_metric: f64,
    pub steps_run: usize,
    /// Weight-pack path relative to the manifest file.
    pub weights: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PoolManifest {
    pub version: u32,
    pub members: Vec<ManifestEntry>,
}

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "pool.json";

/// Write a trained member's weight pack and return its manifest entry.
pub fn save_member(dir: &Path, id: &str, member: &PoolMember) -> Result<ManifestEntry> {
    let file = format!("{id}.fpt");
    let (config, net, final_metric, steps_run) = match member {
        PoolMember::Freq(m) => (MemberConfig::Freq(m.config), &m.net, m.final_residual, m.steps_run),
        PoolMember::Grid(m) => (MemberConfig::Grid(m.config), &m.net, m.final_magnitude, m.steps_run),
    };
    if !final_metric.is_finite() {
        // JSON cannot hold the untrained-marker infinity, and an untrained
        // member has no business in a pool manifest anyway
        return Err(Error::InvalidArg(format!(
            "refusing to save '{id}': non-finite training metric {final_metric}"
        )));
    }
    let pack = pack_net(net);
    save_tensor(&dir.join(&file), &TensorData::new(vec![pack.len()], pack)?)?;
    Ok(ManifestEntry {
        id: id.to_string(),
        config,
        final_metric,
        steps_run,
        weights: file,
    })
}

/// Rebuild a member from its manifest entry: re-init from the config, then
/// overwrite every parameter and frozen stat from the weight pack.
pub fn load_member(dir: &Path, entry: &ManifestEntry) -> Result<PoolMember> {
    let pack = load_tensor(&dir.join(&entry.weights))?;
    if pack.dims.len() != 1 {
        return Err(Error::Format(format!("{}: weight pack must be rank 1", entry.weights)));
    }
    Ok(match &entry.config {
        MemberConfig::Freq(c) => {
            let mut m = FreqGenModel::init(*c)?;
            unpack_net(&mut m.net, &pack.data)?;
            m.trained = true;
            m.final_residual = entry.final_metric;
            m.steps_run = entry.steps_run;
            PoolMember::Freq(m)
        }
        MemberConfig::Grid(c) => {
            let mut m = GridGenModel::init(*c)?;
            unpack_net(&mut m.net, &pack.data)?;
            m.trained = true;
            m.final_magnitude = entry.final_metric;
            m.steps_run = entry.steps_run;
            PoolMember::Grid(m)
        }
    })
}

pub fn save_manifest(dir: &Path, manifest: &PoolManifest) -> Result<()> {
    let mut ids = HashSet::new();
    for e in &manifest.members {
        if !ids.insert(&e.id) {
            return Err(Error::Data(format!("duplicate model id '{}'", e.id)));
        }
    }
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Format(format!("manifest encode: {e}")))?;
    fs::write(dir.join(MANIFEST_NAME), text + "\n")?;
    Ok(())
}

/// Load and validate a manifest: ids unique, every weight file present.
pub fn load_manifest(dir: &Path) -> Result<PoolManifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path)?;
    let manifest: PoolManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Format(format!("manifest version {} unsupported", manifest.version)));
    }
    let mut ids = HashSet::new();
    for e in &manifest.members {
        if !ids.insert(&e.id) {
            return Err(Error::Data(format!("duplicate model id '{}'", e.id)));
        }
        let w = dir.join(&e.weights);
        if !w.is_file() {
            return Err(Error::Data(format!("model '{}' references missing weight file {}", e.id, w.display())));
        }
    }
    Ok(manifest)
}

// -------------------------------------------------------------- reports --

/// One scored verification pair, as written to rows.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub pair: usize,
    pub score: f64,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VerifySummary {
    pub n_s: usize,
    pub cutoff: f64,
    pub n_pairs: usize,
    pub auc: f64,
    pub accuracy: f64,
    pub tau: f64,
}

pub const ROWS_NAME: &str = "rows.csv";
pub const SUMMARY_NAME: &str = "summary.json";

pub fn write_pair_rows(path: &Path, rows: &[PairRow]) -> Result<()> {
    let mut text = String::from("pair,score,label\n");
    for r in rows {
        text.push_str(&format!("{},{},{}\n", r.pair, r.score, u8::from(r.label)));
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_pair_rows(path: &Path) -> Result<Vec<PairRow>> {
    let text = fs::read_to_string(path)?;
    let fail = |line: usize, msg: &str| Error::Format(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "pair,score,label")) => {}
        _ => return Err(fail(1, "missing pair,score,label header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let mut cols = line.split(',');
        let (a, b, c) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => return Err(fail(i + 1, "expected 3 columns")),
        };
        let row = PairRow {
            pair: a.parse().map_err(|_| fail(i + 1, "bad pair id"))?,
            score: b.parse().map_err(|_| fail(i + 1, "bad score"))?,
            label: match c {
                "0" => false,
                "1" => true,
                _ => return Err(fail(i + 1, "label must be 0 or 1")),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Write a verification report directory: rows.csv + summary.json.
pub fn save_verify_report(dir: &Path, rows: &[PairRow], summary: &VerifySummary) -> Result<()> {
    write_pair_rows(&dir.join(ROWS_NAME), rows)?;
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Format(format!("summary encode: {e}")))?;
    fs::write(dir.join(SUMMARY_NAME), text + "\n")?;
    Ok(())
}

/// Load a verification report and re-derive its summary from the rows; any
/// disagreement (beyond float printing) is a hard error.
pub fn load_verify_report(dir: &Path) -> Result<(Vec<PairRow>, VerifySummary)> {
    let rows = read_pair_rows(&dir.join(ROWS_NAME))?;
    let text = fs::read_to_string(dir.join(SUMMARY_NAME))?;
    let summary: VerifySummary = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("summary.json: {e}")))?;
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
    let roc = crate::attribution::roc(&scores, &labels)?;
    let (acc, tau) = crate::attribution::best_accuracy(&scores, &labels)?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    if rows.len() != summary.n_pairs
        || !close(roc.auc, summary.auc)
        || !close(acc, summary.accuracy)
        || !close(tau, summary.tau)
    {
        return Err(Error::Data(format!(
            "summary does not match its rows: recomputed auc {} acc {acc} tau {tau} over {} pairs, summary says {summary:?}",
            roc.auc,
            rows.len()
        )));
    }
    Ok((rows, summary))
}

/// One identified probe, as written to rows.csv: `best` is the argmax gallery
/// id regardless of threshold, `decision` is empty when the score fell below τ.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyRow {
    pub probe: String,
    pub truth: Option<String>,
    pub best: String,
    pub score: f64,
    pub decision: Option<String>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IdentifySummary {
    pub tau: f64,
    pub cutoff: f64,
    pub n_probes: usize,
    pub n_known: usize,
    /// Argmax accuracy over known probes.
    pub accuracy: f64,
    /// Known-vs-unknown AUC on the best score; absent when only one
    /// population is present.
    pub auc: Option<f64>,
}

fn csv_field(s: &str) -> Result<&str> {
    if s.contains(',') || s.contains('\n') || s.contains('\r') {
        return Err(Error::InvalidArg(format!("'{s}' cannot appear in a CSV field")));
    }
    Ok(s)
}

pub fn write_identify_rows(path: &Path, rows: &[IdentifyRow]) -> Result<()> {
    let mut text = String::from("probe,truth,best,score,decision\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_field(&r.probe)?,
            csv_field(r.truth.as_deref().unwrap_or(""))?,
            csv_field(&r.best)?,
            r.score,
            csv_field(r.decision.as_deref().unwrap_or(""))?,
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_identify_rows(path: &Path) -> Result<Vec<IdentifyRow>> {
    let text = fs::read_to_string(path)?;
    let fail = |line: usize, msg: &str| Error::Format(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "probe,truth,best,score,decision")) => {}
        _ => return Err(fail(1, "missing probe,truth,best,score,decision header")),
    }
    let opt = |s: &str| if s.is_empty() { None } else { Some(s.to_string()) };
    let mut rows = Vec::new();
    for (i, line) in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(fail(i + 1, "expected 5 columns"));
        }
        rows.push(IdentifyRow {
            probe: cols[0].to_string(),
            truth: opt(cols[1]),
            best: cols[2].to_string(),
            score: cols[3].parse().map_err(|_| fail(i + 1, "bad score"))?,
            decision: opt(cols[4]),
        });
    }
    Ok(rows)
}

pub fn save_identify_report(dir: &Path, rows: &[IdentifyRow], summary: &IdentifySummary) -> Result<()> {
    write_identify_rows(&dir.join(ROWS_NAME), rows)?;
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Format(format!("summary encode: {e}")))?;
    fs::write(dir.join(SUMMARY_NAME), text + "\n")?;
    Ok(())
}

/// Load an identification report, re-deriving accuracy and AUC from the rows.
pub fn load_identify_report(dir: &Path) -> Result<(Vec<IdentifyRow>, IdentifySummary)> {
    let rows = read_identify_rows(&dir.join(ROWS_NAME))?;
    let text = fs::read_to_string(dir.join(SUMMARY_NAME))?;
    let summary: IdentifySummary = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("summary.json: {e}")))?;
    let known = rows.iter().filter(|r| r.truth.is_some()).count();
    let hits = rows.iter().filter(|r| r.truth.as_deref() == Some(r.best.as_str())).count();
    let accuracy = if known == 0 { 0.0 } else { hits as f64 / known as f64 };
    let auc = if known == 0 || known == rows.len() {
        None
    } else {
        let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.truth.is_some()).collect();
        Some(crate::attribution::roc(&scores, &labels)?.auc)
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let auc_ok = match (auc, summary.auc) {
        (None, None) => true,
        (Some(a), Some(b)) => close(a, b),
        _ => false,
    };
    if rows.len() != summary.n_probes || known != summary.n_known || !close(accuracy, summary.accuracy) || !auc_ok {
        return Err(Error::Data(format!(
            "summary does not match its rows: recomputed accuracy {accuracy} auc {auc:?} over {} probes ({known} known), summary says {summary:?}",
            rows.len()
        )));
    }
    Ok((rows, summary))
}
