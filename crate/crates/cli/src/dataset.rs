//! Synthetic planted-signal dataset: generation, on-disk layout and loading.
//!
//! Every sample is a small feature image with two signal blocks plus one or
//! two distractor blocks, ground-truth instance masks, one question and one
//! answer. The planted structure:
//!
//! * Block 0 carries a *beacon* in feature row 0 and a *mark* in one value
//!   row (row 2 = "left", row 3 = "right"); block 1 carries the beacon row 1
//!   and the opposite mark. Which block carries which mark is random, so the
//!   two marks always sum to the same total: no column-blind average of the
//!   instance view reveals the pairing.
//! * All background pixels carry a *key* in beacon row 0 or 1 (random).
//! * Distractor blocks carry no beacon, a marker in row 4 (so they remain
//!   countable) and random value-row energy, which pollutes any column-blind
//!   pooling of the value rows without disturbing per-column structure.
//!
//! Questions rotate through three types with two phrasings each (phrasing
//! alternates independently of the answer):
//!
//! * cross-view ("which mark rides the key"): the answer is the mark on the
//!   block whose beacon row equals the background key row — answerable only
//!   by relating individual instance columns to the background view;
//! * yes/no ("is the key the first beacon"): key row 0 means yes;
//! * count ("how many blocks are there"): 3 or 4.
//!
//! Instance-view columns follow mask order, so block 0 is always column 0;
//! [`value_probe`] is the fixed linear functional that reads its mark, used
//! to verify the planted signal is linearly recoverable from the instance
//! view alone.
//!
//! On disk a dataset directory holds `features.mqt` (N,H,W,E f64),
//! `masks.mqt` (N,K,H,W f32 zeros/ones; an all-zero slice means an absent
//! instance), `labels.mqt` (N f64 answer indices), `questions.txt` (N
//! lines), `annotations.jsonl` (N lines of `{"qtype":...,"counts":{...}}`)
//! and `answers.txt` (the answer vocabulary). A zero-sample request still
//! writes every file with valid headers and empty payloads.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use maskvqa_core::eval::{AnnotatedAnswer, QuestionType};
use maskvqa_core::mask::{BinMask, MaskSet, ScoredMask};
use maskvqa_core::mask_decoder::FeatureMap;
use maskvqa_core::rng::{mix, seeded};
use maskvqa_core::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor_file::Tensor;

/// Answer vocabulary; `labels.mqt` stores indices into this list.
pub const ANSWER_VOCAB: [&str; 6] = ["left", "right", "yes", "no", "3", "4"];

/// Feature rows carrying the block beacons (and the background key).
pub const BEACON_ROWS: [usize; 2] = [0, 1];
/// Feature rows carrying the marks ("left" = row 2, "right" = row 3).
pub const VALUE_ROWS: [usize; 2] = [2, 3];
/// Feature row marking distractor blocks.
pub const MARKER_ROW: usize = 4;
/// Mask slots per sample; unused slots stay all-zero.
pub const MAX_INSTANCES: usize = 4;

const BEACON_AMP: f64 = 1.0;
const VALUE_AMP: f64 = 1.0;
const KEY_AMP: f64 = 1.0;
const SYNTH_STREAM: u64 = 0x53_59_4e_54_48;

/// Shape and seed of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Number of samples.
    pub count: usize,
    /// Generator seed; every sample derives its own stream from it.
    pub seed: u64,
    /// Image height.
    pub height: usize,
    /// Image width.
    pub width: usize,
    /// Feature dimension E; must be at least 5.
    pub feature_dim: usize,
}

impl SynthSpec {
    /// Toy-scale default: 12x12 images with 8 feature channels.
    pub fn new(count: usize, seed: u64) -> Self {
        SynthSpec {
            count,
            seed,
            height: 12,
            width: 12,
            feature_dim: 8,
        }
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.height < 8 || self.width < 8 {
            bail!("synth images must be at least 8x8, got {}x{}", self.height, self.width);
        }
        if self.feature_dim < 5 {
            bail!("synth feature dim must be at least 5, got {}", self.feature_dim);
        }
        Ok(())
    }
}

/// Ground truth of one generated sample (not written to disk; used by tests
/// to audit the generator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleTruth {
    /// Question type of this sample.
    pub qtype: QuestionType,
    /// Background key row index (0 or 1).
    pub key: usize,
    /// Mark on block 0 (0 = left, 1 = right).
    pub mark0: usize,
    /// Mark on block 1 (always the opposite of `mark0`).
    pub mark1: usize,
    /// Number of blocks including distractors (3 or 4).
    pub blocks: usize,
    /// Answer index into [`ANSWER_VOCAB`].
    pub answer: usize,
}

/// One annotation line: question type plus simulated annotator counts keyed
/// by answer index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    /// Question type name ("yesno", "number", "other").
    pub qtype: String,
    /// Annotator counts per answer index; at most 10 in total.
    pub counts: BTreeMap<String, u32>,
}

impl Annotation {
    /// Combines the annotation with a predicted answer index for scoring.
    pub fn to_eval(&self, predicted: usize) -> anyhow::Result<AnnotatedAnswer> {
        let qtype: QuestionType = self
            .qtype
            .parse()
            .map_err(|_| anyhow::anyhow!("unknown question type {:?}", self.qtype))?;
        let mut counts = BTreeMap::new();
        for (key, &n) in &self.counts {
            let idx: usize = key
                .parse()
                .with_context(|| format!("annotation count key {key:?} is not an answer index"))?;
            counts.insert(idx, n);
        }
        AnnotatedAnswer::new(predicted, counts, qtype)
            .map_err(|e| anyhow::anyhow!("invalid annotation: {e}"))
    }
}

/// A generated dataset held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    /// Image features, dims (N, H, W, E), f64.
    pub features: Tensor,
    /// Instance masks, dims (N, K, H, W), f32 zeros/ones.
    pub masks: Tensor,
    /// One question per sample.
    pub questions: Vec<String>,
    /// Answer index per sample.
    pub labels: Vec<usize>,
    /// Annotation per sample.
    pub annotations: Vec<Annotation>,
    /// Generator ground truth per sample.
    pub truths: Vec<SampleTruth>,
}

fn block_rect(slot: usize, h: usize, w: usize) -> (usize, usize, usize, usize) {
    // Quadrant slots with a one-pixel margin: 0 = top-left, 1 = top-right,
    // 2 = bottom-left.
    let qy = slot / 2;
    let qx = slot % 2;
    let y0 = qy * h / 2 + 1;
    let y1 = (qy + 1) * h / 2 - 1;
    let x0 = qx * w / 2 + 1;
    let x1 = (qx + 1) * w / 2 - 1;
    (y0, y1, x0, x1)
}

fn owner_of(y: usize, x: usize, blocks: usize, h: usize, w: usize) -> Option<usize> {
    for slot in 0..blocks {
        let (y0, y1, x0, x1) = block_rect(slot, h, w);
        if (y0..y1).contains(&y) && (x0..x1).contains(&x) {
            return Some(slot);
        }
    }
    None
}

const CROSS_PHRASES: [&str; 2] = ["which mark rides the key", "what symbol matches the key"];
const YESNO_PHRASES: [&str; 2] = ["is the key the first beacon", "does the key match beacon zero"];
const COUNT_PHRASES: [&str; 2] = ["how many blocks are there", "count the blocks in view"];

/// Generates a dataset from a spec. Deterministic in the spec: each sample
/// uses its own stream derived from the seed and sample index, so sample `i`
/// is identical regardless of the total count.
pub fn generate(spec: &SynthSpec) -> anyhow::Result<SynthDataset> {
    spec.validate()?;
    let (n, h, w, e) = (spec.count, spec.height, spec.width, spec.feature_dim);
    let mut features = vec![0.0f64; n * h * w * e];
    let mut masks = vec![0.0f32; n * MAX_INSTANCES * h * w];
    let mut questions = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut annotations = Vec::with_capacity(n);
    let mut truths = Vec::with_capacity(n);

    for i in 0..n {
        let mut rng = seeded(mix(mix(spec.seed, SYNTH_STREAM), i as u64));
        let blocks = 3 + rng.gen_range(0..2usize);
        let key = rng.gen_range(0..2usize);
        let mark0 = rng.gen_range(0..2usize);
        let mark1 = 1 - mark0;
        // Per-distractor value-row energy, drawn unconditionally to keep the
        // stream aligned across block counts.
        let mut dist_values = [[0.0f64; 2]; 2];
        for d in &mut dist_values {
            d[0] = (rng.gen::<f64>() * 2.0 - 1.0) * VALUE_AMP;
            d[1] = (rng.gen::<f64>() * 2.0 - 1.0) * VALUE_AMP;
        }

        for y in 0..h {
            for x in 0..w {
                let base = ((i * h + y) * w + x) * e;
                match owner_of(y, x, blocks, h, w) {
                    Some(slot) => {
                        masks[((i * MAX_INSTANCES + slot) * h + y) * w + x] = 1.0;
                        match slot {
                            0 => {
                                features[base + BEACON_ROWS[0]] += BEACON_AMP;
                                features[base + VALUE_ROWS[mark0]] += VALUE_AMP;
                            }
                            1 => {
                                features[base + BEACON_ROWS[1]] += BEACON_AMP;
                                features[base + VALUE_ROWS[mark1]] += VALUE_AMP;
                            }
                            d => {
                                // No beacon; random marks plus a marker row so
                                // the block remains countable.
                                features[base + VALUE_ROWS[0]] += dist_values[d - 2][0];
                                features[base + VALUE_ROWS[1]] += dist_values[d - 2][1];
                                features[base + MARKER_ROW] += BEACON_AMP;
                            }
                        }
                    }
                    None => {
                        features[base + BEACON_ROWS[key]] += KEY_AMP;
                    }
                }
            }
        }

        let (qtype, question, answer) = match i % 3 {
            0 => {
                let marked = if key == 0 { mark0 } else { mark1 };
                (QuestionType::Other, CROSS_PHRASES[i % 2], marked)
            }
            1 => (
                QuestionType::YesNo,
                YESNO_PHRASES[i % 2],
                if key == 0 { 2 } else { 3 },
            ),
            _ => (QuestionType::Number, COUNT_PHRASES[i % 2], 1 + blocks),
        };
        questions.push(question.to_string());
        labels.push(answer);
        let mut counts = BTreeMap::new();
        counts.insert(answer.to_string(), 10u32);
        annotations.push(Annotation {
            qtype: qtype.as_str().to_string(),
            counts,
        });
        truths.push(SampleTruth {
            qtype,
            key,
            mark0,
            mark1,
            blocks,
            answer,
        });
    }

    Ok(SynthDataset {
        features: Tensor::from_f64(vec![n, h, w, e], features)
            .map_err(|e| anyhow::anyhow!("{e}"))?,
        masks: Tensor::from_f32(vec![n, MAX_INSTANCES, h, w], masks)
            .map_err(|e| anyhow::anyhow!("{e}"))?,
        questions,
        labels,
        annotations,
        truths,
    })
}

/// Fixed linear functional reading the planted mark on instance column 0:
/// positive means "left" (answer 0), otherwise "right" (answer 1).
pub fn value_probe(instance_view: &Mat) -> anyhow::Result<usize> {
    if instance_view.rows() <= VALUE_ROWS[1] || instance_view.cols() == 0 {
        bail!(
            "instance view {}x{} is too small for the probe",
            instance_view.rows(),
            instance_view.cols()
        );
    }
    let score = instance_view.at(VALUE_ROWS[0], 0) - instance_view.at(VALUE_ROWS[1], 0);
    Ok(if score > 0.0 { 0 } else { 1 })
}

/// Writes all dataset files into a directory (created if needed).
pub fn write_dataset(ds: &SynthDataset, dir: impl AsRef<Path>) -> anyhow::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    ds.features
        .save(dir.join("features.mqt"))
        .with_context(|| "writing features.mqt")?;
    ds.masks
        .save(dir.join("masks.mqt"))
        .with_context(|| "writing masks.mqt")?;
    let labels: Vec<f64> = ds.labels.iter().map(|&l| l as f64).collect();
    Tensor::from_f64(vec![labels.len()], labels)
        .map_err(|e| anyhow::anyhow!("{e}"))?
        .save(dir.join("labels.mqt"))
        .with_context(|| "writing labels.mqt")?;
    let mut qtext = String::new();
    for q in &ds.questions {
        qtext.push_str(q);
        qtext.push('\n');
    }
    std::fs::write(dir.join("questions.txt"), qtext)?;
    let mut atext = Vec::new();
    for a in &ds.annotations {
        serde_json::to_writer(&mut atext, a)?;
        atext.push(b'\n');
    }
    std::fs::write(dir.join("annotations.jsonl"), atext)?;
    let mut vocab = String::new();
    for a in ANSWER_VOCAB {
        vocab.push_str(a);
        vocab.push('\n');
    }
    std::fs::write(dir.join("answers.txt"), vocab)?;
    Ok(())
}

/// A dataset read back from a directory.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    /// Image features, dims (N, H, W, E), f64.
    pub features: Tensor,
    /// Instance masks, dims (N, K, H, W), f32.
    pub masks: Tensor,
    /// One question per sample.
    pub questions: Vec<String>,
    /// Answer index per sample.
    pub labels: Vec<usize>,
    /// Annotation per sample.
    pub annotations: Vec<Annotation>,
    /// Answer vocabulary, if `answers.txt` is present.
    pub vocab: Option<Vec<String>>,
}

impl LoadedDataset {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// True when the dataset has no samples.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Image height.
    pub fn height(&self) -> usize {
        self.features.dims()[1]
    }

    /// Image width.
    pub fn width(&self) -> usize {
        self.features.dims()[2]
    }

    /// Feature dimension.
    pub fn feature_dim(&self) -> usize {
        self.features.dims()[3]
    }

    /// Extracts sample `i`'s feature map.
    pub fn feature_map(&self, i: usize) -> anyhow::Result<FeatureMap> {
        let (h, w, e) = (self.height(), self.width(), self.feature_dim());
        let stride = h * w * e;
        let data = self.features.as_f64().map_err(|e| anyhow::anyhow!("{e}"))?;
        let slice = data[i * stride..(i + 1) * stride].to_vec();
        FeatureMap::new(h, w, e, slice).map_err(|e| anyhow::anyhow!("{e}"))
    }

    /// Extracts sample `i`'s instance masks, skipping all-zero slots.
    pub fn mask_set(&self, i: usize) -> anyhow::Result<MaskSet> {
        let k = self.masks.dims()[1];
        let (h, w) = (self.masks.dims()[2], self.masks.dims()[3]);
        let data = self.masks.as_f32().map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut members = Vec::new();
        for slot in 0..k {
            let base = (i * k + slot) * h * w;
            let slice = &data[base..base + h * w];
            if slice.iter().all(|&v| v == 0.0) {
                continue;
            }
            let bits: Vec<bool> = slice.iter().map(|&v| v > 0.5).collect();
            let binary = BinMask::from_vec(h, w, bits).map_err(|e| anyhow::anyhow!("{e}"))?;
            let soft = Mat::from_vec(
                h,
                w,
                slice.iter().map(|&v| f64::from(v)).collect(),
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            members.push(
                ScoredMask::new(soft, binary, 1.0, 0).map_err(|e| anyhow::anyhow!("{e}"))?,
            );
        }
        MaskSet::new(h, w, members).map_err(|e| anyhow::anyhow!("{e}"))
    }
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

/// Loads and cross-validates a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> anyhow::Result<LoadedDataset> {
    let dir = dir.as_ref();
    let features = Tensor::load(dir.join("features.mqt"))
        .map_err(|e| anyhow::anyhow!("features.mqt: {e}"))?;
    let masks =
        Tensor::load(dir.join("masks.mqt")).map_err(|e| anyhow::anyhow!("masks.mqt: {e}"))?;
    let labels_t =
        Tensor::load(dir.join("labels.mqt")).map_err(|e| anyhow::anyhow!("labels.mqt: {e}"))?;
    let questions = read_lines(&dir.join("questions.txt"))?;
    let annotation_lines = read_lines(&dir.join("annotations.jsonl"))?;
    let vocab = {
        let path = dir.join("answers.txt");
        if path.exists() {
            Some(read_lines(&path)?)
        } else {
            None
        }
    };

    if features.dims().len() != 4 {
        bail!("features.mqt must have dims (N, H, W, E), got {:?}", features.dims());
    }
    if masks.dims().len() != 4 {
        bail!("masks.mqt must have dims (N, K, H, W), got {:?}", masks.dims());
    }
    let n = features.dims()[0];
    if masks.dims()[0] != n {
        bail!("masks.mqt holds {} samples, features.mqt {}", masks.dims()[0], n);
    }
    if masks.dims()[2] != features.dims()[1] || masks.dims()[3] != features.dims()[2] {
        bail!(
            "mask size {}x{} does not match image size {}x{}",
            masks.dims()[2],
            masks.dims()[3],
            features.dims()[1],
            features.dims()[2]
        );
    }
    if labels_t.dims().len() != 1 || labels_t.dims()[0] != n {
        bail!("labels.mqt must have dims ({n}), got {:?}", labels_t.dims());
    }
    if questions.len() != n {
        bail!("questions.txt has {} lines, expected {n}", questions.len());
    }
    if annotation_lines.len() != n {
        bail!("annotations.jsonl has {} lines, expected {n}", annotation_lines.len());
    }
    let mut labels = Vec::with_capacity(n);
    for (i, &v) in labels_t
        .as_f64()
        .map_err(|e| anyhow::anyhow!("labels.mqt: {e}"))?
        .iter()
        .enumerate()
    {
        if v.fract() != 0.0 || v < 0.0 {
            bail!("labels.mqt entry {i} is {v}, expected a non-negative integer");
        }
        labels.push(v as usize);
    }
    let mut annotations = Vec::with_capacity(n);
    for (i, line) in annotation_lines.iter().enumerate() {
        let a: Annotation = serde_json::from_str(line)
            .map_err(|e| anyhow::anyhow!("annotations.jsonl line {}: {e}", i + 1))?;
        annotations.push(a);
    }
    Ok(LoadedDataset {
        features,
        masks,
        questions,
        labels,
        annotations,
        vocab,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use maskvqa_core::view::instance_features;

    #[test]
    fn generation_is_deterministic_and_prefix_stable() {
        let a = generate(&SynthSpec::new(6, 5)).unwrap();
        let b = generate(&SynthSpec::new(6, 5)).unwrap();
        assert_eq!(a, b);
        let longer = generate(&SynthSpec::new(9, 5)).unwrap();
        let (h, w, e) = (12, 12, 8);
        assert_eq!(
            &longer.features.as_f64().unwrap()[..6 * h * w * e],
            a.features.as_f64().unwrap(),
            "sample i does not depend on the total count"
        );
        let other_seed = generate(&SynthSpec::new(6, 6)).unwrap();
        assert_ne!(a.features, other_seed.features);
    }

    #[test]
    fn answers_match_planted_structure() {
        let ds = generate(&SynthSpec::new(30, 3)).unwrap();
        for (i, t) in ds.truths.iter().enumerate() {
            assert_eq!(t.mark0 + t.mark1, 1, "marks are opposite");
            match i % 3 {
                0 => {
                    assert_eq!(t.qtype, QuestionType::Other);
                    let marked = if t.key == 0 { t.mark0 } else { t.mark1 };
                    assert_eq!(t.answer, marked);
                }
                1 => {
                    assert_eq!(t.qtype, QuestionType::YesNo);
                    assert_eq!(t.answer, if t.key == 0 { 2 } else { 3 });
                }
                _ => {
                    assert_eq!(t.qtype, QuestionType::Number);
                    assert!(t.blocks == 3 || t.blocks == 4);
                    assert_eq!(t.answer, 1 + t.blocks);
                }
            }
            assert_eq!(ds.labels[i], t.answer);
            assert_eq!(ds.annotations[i].counts[&t.answer.to_string()], 10);
        }
        // Both question types and both phrasings appear.
        assert!(ds.questions.contains(&CROSS_PHRASES[0].to_string()));
        assert!(ds.questions.contains(&YESNO_PHRASES[1].to_string()));
    }

    #[test]
    fn linear_probe_reads_the_planted_mark_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate(&SynthSpec::new(40, 17)).unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        for i in 0..loaded.len() {
            let f = loaded.feature_map(i).unwrap();
            let set = loaded.mask_set(i).unwrap();
            assert_eq!(set.len(), ds.truths[i].blocks);
            let d = instance_features(&f, &set);
            assert_eq!(value_probe(&d).unwrap(), ds.truths[i].mark0, "sample {i}");
        }
    }

    #[test]
    fn roundtrip_preserves_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate(&SynthSpec::new(7, 23)).unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.len(), 7);
        assert_eq!(loaded.features, ds.features);
        assert_eq!(loaded.masks, ds.masks);
        assert_eq!(loaded.questions, ds.questions);
        assert_eq!(loaded.labels, ds.labels);
        assert_eq!(loaded.annotations, ds.annotations);
        assert_eq!(
            loaded.vocab.as_deref().unwrap(),
            &ANSWER_VOCAB.map(|s| s.to_string())[..]
        );
    }

    #[test]
    fn empty_dataset_files_are_valid() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate(&SynthSpec::new(0, 1)).unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert!(loaded.is_empty());
        assert_eq!(loaded.features.dims(), &[0, 12, 12, 8]);
        assert_eq!(loaded.masks.dims(), &[0, MAX_INSTANCES, 12, 12]);
        assert!(loaded.questions.is_empty());
        assert!(loaded.annotations.is_empty());
    }

    #[test]
    fn annotations_convert_to_scorable_records() {
        let ds = generate(&SynthSpec::new(3, 9)).unwrap();
        let scored = ds.annotations[0].to_eval(ds.labels[0]).unwrap();
        assert_eq!(scored.accuracy(), 1.0, "planted answer gets full credit");
        let wrong = (ds.labels[0] + 1) % ANSWER_VOCAB.len();
        let scored = ds.annotations[0].to_eval(wrong).unwrap();
        assert_eq!(scored.accuracy(), 0.0);

        let bad = Annotation {
            qtype: "riddle".into(),
            counts: BTreeMap::new(),
        };
        assert!(bad.to_eval(0).is_err());
    }

    #[test]
    fn mask_slices_partition_block_pixels() {
        let ds = generate(&SynthSpec::new(10, 2)).unwrap();
        let data = ds.masks.as_f32().unwrap();
        let (h, w) = (12, 12);
        for i in 0..10 {
            for y in 0..h {
                for x in 0..w {
                    let covered: u32 = (0..MAX_INSTANCES)
                        .map(|s| data[((i * MAX_INSTANCES + s) * h + y) * w + x] as u32)
                        .sum();
                    assert!(covered <= 1, "blocks never overlap");
                }
            }
        }
    }
}
