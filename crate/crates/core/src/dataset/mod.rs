//! Labeled frame collections: JSONL ingestion, split/category accounting and
//! subject-disjoint partitioning.

mod synth;

pub use synth::{gen_synthetic, manifest_frames, CategoryNoise, EarDistribution, SynthSpec};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::landmarks::{validate_frame, Category, LandmarkFrame, RawFrame, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Ingested,
    Synthetic,
    Augmented,
}

/// Ordered frames plus where they came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    frames: Vec<LandmarkFrame>,
    provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(frames: Vec<LandmarkFrame>, provenance: Provenance) -> Self {
        Self { frames, provenance }
    }

    pub fn frames(&self) -> &[LandmarkFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<LandmarkFrame> {
        self.frames
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.frames.iter().map(|f| f.subject.as_str()).collect()
    }

    /// Frames whose split tag equals `split`.
    pub fn with_split(&self, split: Split) -> LabeledDataset {
        self.filtered(|f| f.split == split)
    }

    pub fn filtered(&self, keep: impl Fn(&LandmarkFrame) -> bool) -> LabeledDataset {
        LabeledDataset {
            frames: self.frames.iter().filter(|f| keep(f)).cloned().collect(),
            provenance: self.provenance,
        }
    }

    /// Index of the first frame repeating an earlier (subject, category, frame, variant) key.
    pub fn first_duplicate(&self) -> Option<usize> {
        let mut seen = HashSet::with_capacity(self.frames.len());
        self.frames
            .iter()
            .position(|f| !seen.insert((f.subject.as_str(), f.category, f.frame_index, f.variant)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InvalidLinePolicy {
    #[default]
    FailFast,
    Skip,
}

/// Result of reading a JSONL stream.
#[derive(Debug, Default)]
pub struct LoadReport {
    pub dataset: LabeledDataset,
    /// `(line number, reason)` for every skipped line.
    pub rejected: Vec<(usize, String)>,
}

/// Reads one frame per line. Blank lines are ignored; line numbers are 1-based.
pub fn load_jsonl<R: BufRead>(reader: R, policy: InvalidLinePolicy) -> Result<LoadReport> {
    let mut frames = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawFrame>(&line)
            .map_err(|e| e.to_string())
            .and_then(|raw| validate_frame(raw).map_err(|e| e.to_string()))
            .and_then(|f| {
                let key = (f.subject.clone(), f.category, f.frame_index, f.variant);
                if seen.insert(key) {
                    Ok(f)
                } else {
                    Err(format!(
                        "duplicate frame (subject {}, category {}, frame {}, variant {})",
                        f.subject, f.category, f.frame_index, f.variant
                    ))
                }
            });
        match (parsed, policy) {
            (Ok(f), _) => frames.push(f),
            (Err(message), InvalidLinePolicy::FailFast) => {
                return Err(Error::Record {
                    line: line_no,
                    message,
                })
            }
            (Err(message), InvalidLinePolicy::Skip) => rejected.push((line_no, message)),
        }
    }
    Ok(LoadReport {
        dataset: LabeledDataset::new(frames, Provenance::Ingested),
        rejected,
    })
}

pub fn frame_to_json(frame: &LandmarkFrame) -> String {
    serde_json::to_string(&RawFrame::from(frame)).expect("frame records always serialize")
}

/// Writes one canonical JSON object per line.
pub fn write_jsonl<W: Write>(ds: &LabeledDataset, mut out: W) -> Result<()> {
    for f in ds.frames() {
        writeln!(out, "{}", frame_to_json(f))?;
    }
    out.flush()?;
    Ok(())
}

/// Frame counts per (split, category).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitSummary {
    /// Always holds all ten split × category cells, zero-filled.
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SummaryRow {
    pub split: Split,
    pub category: Category,
    pub frames: u64,
}

impl SplitSummary {
    pub fn from_counts(counts: impl IntoIterator<Item = ((Split, Category), u64)>) -> Self {
        let mut table: BTreeMap<(Split, Category), u64> = BTreeMap::new();
        for (key, n) in counts {
            *table.entry(key).or_default() += n;
        }
        let rows = [Split::Train, Split::Eval]
            .into_iter()
            .flat_map(|s| Category::ALL.into_iter().map(move |c| (s, c)))
            .map(|(split, category)| SummaryRow {
                split,
                category,
                frames: table.get(&(split, category)).copied().unwrap_or(0),
            })
            .collect();
        Self { rows }
    }

    pub fn get(&self, split: Split, category: Category) -> u64 {
        self.rows
            .iter()
            .find(|r| r.split == split && r.category == category)
            .map_or(0, |r| r.frames)
    }

    pub fn split_total(&self, split: Split) -> u64 {
        self.rows.iter().filter(|r| r.split == split).map(|r| r.frames).sum()
    }

    pub fn category_total(&self, category: Category) -> u64 {
        self.rows.iter().filter(|r| r.category == category).map(|r| r.frames).sum()
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.frames).sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<10} {:<24} {:>12}\n", "Dataset", "Category", "Frames");
        for split in [Split::Train, Split::Eval] {
            let name = match split {
                Split::Train => "Training",
                Split::Eval => "Evaluation",
            };
            for (i, c) in Category::ALL.into_iter().enumerate() {
                let label = if i == 0 { name } else { "" };
                let _ = writeln!(s, "{label:<10} {:<24} {:>12}", c.display_name(), self.get(split, c));
            }
        }
        let _ = writeln!(s, "{:<10} {:<24} {:>12}", "Total", "", self.total());
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("split,category,frames\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.split.as_str(), r.category.as_str(), r.frames);
        }
        let _ = writeln!(s, "total,all,{}", self.total());
        s
    }
}

pub fn summarize(ds: &LabeledDataset) -> SplitSummary {
    SplitSummary::from_counts(ds.frames().iter().map(|f| ((f.split, f.category), 1)))
}

/// Eval subject share used by default: 4 of 22 subjects.
pub const DEFAULT_EVAL_FRACTION: f64 = 4.0 / 22.0;

/// Number of held-out subjects for `n` subjects at `fraction`.
pub fn eval_subject_count(n: usize, fraction: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::Dataset(format!(
            "a subject-disjoint split needs at least 2 subjects, got {n}"
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Dataset(format!("eval fraction must lie in (0, 1), got {fraction}")));
    }
    let k = (n as f64 * fraction).round() as usize;
    if k == 0 {
        return Err(Error::Dataset(format!(
            "eval fraction {fraction} of {n} subjects selects no eval subject"
        )));
    }
    if k >= n {
        return Err(Error::Dataset(format!(
            "eval fraction {fraction} of {n} subjects leaves no training subject"
        )));
    }
    Ok(k)
}

/// Subject-disjoint split: the last `round(n * fraction)` subjects in sorted
/// order form the second output. Frame order is preserved within each side.
pub fn partition(ds: &LabeledDataset, eval_fraction: f64) -> Result<(LabeledDataset, LabeledDataset)> {
    let subjects: Vec<&str> = ds.subjects().into_iter().collect();
    let k = eval_subject_count(subjects.len(), eval_fraction)?;
    let held: HashSet<&str> = subjects[subjects.len() - k..].iter().copied().collect();
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for f in ds.frames() {
        if held.contains(f.subject.as_str()) {
            eval.push(f.clone());
        } else {
            train.push(f.clone());
        }
    }
    Ok((
        LabeledDataset::new(train, ds.provenance()),
        LabeledDataset::new(eval, ds.provenance()),
    ))
}
