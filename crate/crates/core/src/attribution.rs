//! Verification, open-set identification, and lineage analysis on top of
//! spectral fingerprints, with ROC/AUC/accuracy metrics.

use crate::fingerprint::{cosine, extract_fingerprint, Fingerprint};
use crate::rng::Pcg32;
use crate::tensor::{Matrix, Tensor3};
use crate::{Error, Result};

/// A reference to N_S images of one model in an image pool.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SetRef {
    pub model: usize,
    pub images: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct VerificationPair {
    pub side_a: SetRef,
    pub side_b: SetRef,
    /// true when both sides come from the same model
    pub label: bool,
}

/// Sample `n_pos` same-model and `n_neg` cross-model pairs of N_S-image sets.
/// Positive pairs draw their two sides disjointly from one model; pairs are
/// independent of each other.
pub fn make_pairs(
    image_counts: &[usize],
    n_s: usize,
    n_pos: usize,
    n_neg: usize,
    rng: &mut Pcg32,
) -> Result<Vec<VerificationPair>> {
    if image_counts.len() < 2 {
        return Err(Error::InvalidArg("need at least two models to form pairs".into()));
    }
    if n_s == 0 {
        return Err(Error::InvalidArg("N_S must be positive".into()));
    }
    if let Some((m, &c)) = image_counts.iter().enumerate().find(|(_, &c)| c < 2 * n_s) {
        return Err(Error::InvalidArg(format!(
            "model {m} has {c} images, positive pairs need {}",
            2 * n_s
        )));
    }
    let mut pairs = Vec::with_capacity(n_pos + n_neg);
    for _ in 0..n_pos {
        let m = rng.below(image_counts.len());
        let picks = sample_distinct(image_counts[m], 2 * n_s, rng);
        pairs.push(VerificationPair {
            side_a: SetRef { model: m, images: picks[..n_s].to_vec() },
            side_b: SetRef { model: m, images: picks[n_s..].to_vec() },
            label: true,
        });
    }
    for _ in 0..n_neg {
        let ma = rng.below(image_counts.len());
        let mb = {
            let other = rng.below(image_counts.len() - 1);
            if other >= ma {
                other + 1
            } else {
                other
            }
        };
        pairs.push(VerificationPair {
            side_a: SetRef { model: ma, images: sample_distinct(image_counts[ma], n_s, rng) },
            side_b: SetRef { model: mb, images: sample_distinct(image_counts[mb], n_s, rng) },
            label: false,
        });
    }
    Ok(pairs)
}

/// First `take` entries of a Fisher-Yates pass over 0..n.
fn sample_distinct(n: usize, take: usize, rng: &mut Pcg32) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..take {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(take);
    idx
}

fn gather<'a>(side: &SetRef, pool: &'a [Vec<Tensor3>]) -> Result<Vec<Tensor3>> {
    let images = pool.get(side.model).ok_or_else(|| {
        Error::Data(format!("pair references model {} outside the pool", side.model))
    })?;
    side.images
        .iter()
        .map(|&i| {
            images
                .get(i)
                .cloned()
                .ok_or_else(|| Error::Data(format!("image {i} outside model {}", side.model)))
        })
        .collect()
}

/// Cosine similarity of the two sides' fingerprints.
pub fn verify_pair(pair: &VerificationPair, pool: &[Vec<Tensor3>], cutoff: f64) -> Result<f64> {
    let fa = extract_fingerprint(&gather(&pair.side_a, pool)?, cutoff)?;
    let fb = extract_fingerprint(&gather(&pair.side_b, pool)?, cutoff)?;
    cosine(&fa, &fb)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RocCurve {
    /// distinct decision thresholds, descending (decision: score ≥ τ → positive)
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub auc: f64,
}

/// ROC curve and trapezoidal AUC over all distinct score thresholds. Tied
/// scores collapse into one step, so the diagonal trapezoid gives them the
/// Mann-Whitney half credit.
pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::InvalidArg(format!(
            "need matching nonempty scores/labels, got {}/{}",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("non-finite score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArg("labels are single-class".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut thresholds = Vec::new();
    let mut tpr = vec![];
    let mut fpr = vec![];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        thresholds.push(t);
        tpr.push(tp as f64 / pos as f64);
        fpr.push(fp as f64 / neg as f64);
        auc += (fp - prev_fp) as f64 * (tp + prev_tp) as f64 / 2.0;
        prev_tp = tp;
        prev_fp = fp;
    }
    auc /= (pos * neg) as f64;
    Ok(RocCurve { thresholds, tpr, fpr, auc })
}

/// Maximum (TP+TN)/total over decision thresholds, ties toward the lower τ.
/// Candidates include a sentinel above every score (the all-negative rule),
/// so the result can never fall below the larger class prior.
pub fn best_accuracy(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    roc(scores, labels)?; // shares the validation rules
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let total = scores.len() as f64;
    let pos_total = labels.iter().filter(|&&l| l).count();

    // τ = lowest score: everything classified positive
    let mut best_tau = scores[order[0]];
    let mut tp = pos_total;
    let mut tn = 0usize;
    let mut best_acc = (tp + tn) as f64 / total;

    // raising τ just past each distinct score flips that score's items
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp -= 1;
            } else {
                tn += 1;
            }
            i += 1;
        }
        let acc = (tp + tn) as f64 / total;
        if acc > best_acc {
            best_acc = acc;
            best_tau = if i < order.len() { scores[order[i]] } else { t + 1.0 };
        }
    }
    Ok((best_acc, best_tau))
}

/// Independent O(P·N) Mann-Whitney statistic; the AUC oracle.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Known models, one fingerprint each, and the accept threshold.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Gallery {
    pub ids: Vec<String>,
    pub fingerprints: Vec<Fingerprint>,
    pub tau: f64,
}

impl Gallery {
    pub fn new(ids: Vec<String>, fingerprints: Vec<Fingerprint>, tau: f64) -> Result<Self> {
        if ids.is_empty() || ids.len() != fingerprints.len() {
            return Err(Error::InvalidArg(format!(
                "need matching nonempty ids/fingerprints, got {}/{}",
                ids.len(),
                fingerprints.len()
            )));
        }
        let dim = fingerprints[0].vector.len();
        for (id, f) in ids.iter().zip(&fingerprints) {
            if f.vector.len() != dim {
                return Err(Error::DimMismatch(format!("fingerprint {id} has a different size")));
            }
            let norm: f64 = f.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::Data(format!("fingerprint {id} is not unit-norm ({norm})")));
            }
        }
        Ok(Gallery { ids, fingerprints, tau })
    }
}

/// Argmax-cosine identification with rejection below τ. Exact score ties go
/// to the lexicographically lowest model id.
pub fn identify_open_set<'g>(
    probe: &Fingerprint,
    gallery: &'g Gallery,
) -> Result<(Option<&'g str>, f64)> {
    let mut best: Option<(&str, f64)> = None;
    for (id, f) in gallery.ids.iter().zip(&gallery.fingerprints) {
        let s = cosine(probe, f)?;
        let better = match best {
            None => true,
            Some((bid, bs)) => s > bs || (s == bs && id.as_str() < bid),
        };
        if better {
            best = Some((id, s));
        }
    }
    let (id, score) = best.expect("gallery is nonempty by construction");
    Ok((if score >= gallery.tau { Some(id) } else { None }, score))
}

/// Ground truth for one probe: the gallery id it came from, or unknown.
pub type ProbeTruth = Option<String>;

/// Closed-set accuracy over known probes (argmax id, threshold ignored) and,
/// when both populations are present, the known-vs-unknown AUC with the best
/// gallery score as discriminant.
pub fn open_set_metrics(
    probes: &[Fingerprint],
    truth: &[ProbeTruth],
    gallery: &Gallery,
) -> Result<(f64, Option<f64>)> {
    if probes.len() != truth.len() {
        return Err(Error::InvalidArg(format!(
            "{} probes vs {} truth entries",
            probes.len(),
            truth.len()
        )));
    }
    let mut known = 0usize;
    let mut hits = 0usize;
    let mut scores = Vec::with_capacity(probes.len());
    let mut labels = Vec::with_capacity(probes.len());
    for (p, t) in probes.iter().zip(truth) {
        let (_, score) = identify_open_set(p, gallery)?;
        let argmax = {
            // threshold-free argmax for the closed-set metric
            let mut best: Option<(&str, f64)> = None;
            for (id, f) in gallery.ids.iter().zip(&gallery.fingerprints) {
                let s = cosine(p, f)?;
                if best.map_or(true, |(bid, bs)| s > bs || (s == bs && id.as_str() < bid)) {
                    best = Some((id, s));
                }
            }
            best.expect("nonempty gallery").0
        };
        if let Some(want) = t {
            known += 1;
            if argmax == want {
                hits += 1;
            }
        }
        scores.push(score);
        labels.push(t.is_some());
    }
    if known == 0 {
        return Err(Error::InvalidArg("no known probes to score".into()));
    }
    let accuracy = hits as f64 / known as f64;
    let auc = if known < probes.len() { Some(roc(&scores, &labels)?.auc) } else { None };
    Ok((accuracy, auc))
}

/// Pairwise cosine matrix over model fingerprints, unit diagonal.
pub fn lineage_matrix(fingerprints: &[Fingerprint]) -> Result<Matrix> {
    if fingerprints.len() < 2 {
        return Err(Error::InvalidArg("lineage needs at least two models".into()));
    }
    let n = fingerprints.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 1.0;
        for j in i + 1..n {
            let c = cosine(&fingerprints[i], &fingerprints[j])?;
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    Ok(m)
}
