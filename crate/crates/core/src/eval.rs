//! Single-frame prediction and per-category accuracy reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::landmarks::{assemble_feature, Category, FeatureMode, Label, LandmarkFrame, NUM_POINTS};
use crate::model::ModelArtifact;
use crate::nn::Network;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    /// `[alert, drowsy]`
    pub probabilities: [f64; 2],
    pub class: usize,
}

/// Argmax with ties resolved to alert.
pub fn class_of(probabilities: [f64; 2]) -> Label {
    if probabilities[1] > probabilities[0] {
        Label::Drowsy
    } else {
        Label::Alert
    }
}

/// A loaded network ready for repeated inference.
pub struct Predictor {
    net: Network<f32>,
    mode: FeatureMode,
}

impl Predictor {
    pub fn new(artifact: &ModelArtifact) -> Result<Self> {
        Ok(Self {
            net: artifact.network()?,
            mode: artifact.feature_mode()?,
        })
    }

    pub fn feature_mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn network(&self) -> &Network<f32> {
        &self.net
    }

    pub fn predict(&self, frame: &LandmarkFrame) -> Result<Prediction> {
        if frame.points.len() != NUM_POINTS {
            return Err(Error::InvalidFrame(vec![format!(
                "expected {NUM_POINTS} points, got {}",
                frame.points.len()
            )]));
        }
        if let Some(i) = frame.points.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidFrame(vec![format!("point {i} has a non-finite coordinate")]));
        }
        let x = assemble_feature(frame, self.mode).to_input();
        let p = self.net.forward(&x)?;
        let probabilities = [p[0], p[1]];
        Ok(Prediction {
            probabilities,
            class: class_of(probabilities).index(),
        })
    }
}

pub fn predict(artifact: &ModelArtifact, frame: &LandmarkFrame) -> Result<Prediction> {
    Predictor::new(artifact)?.predict(frame)
}

/// Binary confusion counts with drowsy as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Drowsy, Label::Drowsy) => self.tp += 1,
            (Label::Alert, Label::Drowsy) => self.fp += 1,
            (Label::Alert, Label::Alert) => self.tn += 1,
            (Label::Drowsy, Label::Alert) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Percentage of correct predictions.
    pub fn accuracy(&self) -> f64 {
        100.0 * (self.tp + self.tn) as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub category: Category,
    pub frames: u64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub categories: Vec<CategoryReport>,
    /// Unweighted mean of the category accuracies.
    pub overall_accuracy: f64,
    pub frames: u64,
}

/// Unweighted mean of per-category accuracies.
pub fn overall_accuracy(category_accuracies: &[f64]) -> f64 {
    category_accuracies.iter().sum::<f64>() / category_accuracies.len() as f64
}

impl EvalReport {
    /// Builds a report from per-category confusion counts; empty slices are left out.
    pub fn from_confusions(counts: impl IntoIterator<Item = (Category, Confusion)>) -> Result<Self> {
        let mut by_cat: BTreeMap<Category, Confusion> = BTreeMap::new();
        for (c, m) in counts {
            let e = by_cat.entry(c).or_default();
            e.tp += m.tp;
            e.fp += m.fp;
            e.tn += m.tn;
            e.fn_ += m.fn_;
        }
        let categories: Vec<CategoryReport> = Category::ALL
            .into_iter()
            .filter_map(|c| by_cat.get(&c).map(|m| (c, *m)))
            .filter(|(_, m)| m.total() > 0)
            .map(|(category, confusion)| CategoryReport {
                category,
                frames: confusion.total(),
                accuracy: confusion.accuracy(),
                confusion,
            })
            .collect();
        if categories.is_empty() {
            return Err(Error::Dataset("evaluation needs at least one non-empty category".into()));
        }
        let accs: Vec<f64> = categories.iter().map(|c| c.accuracy).collect();
        Ok(Self {
            overall_accuracy: overall_accuracy(&accs),
            frames: categories.iter().map(|c| c.frames).sum(),
            categories,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<24} {:>12}\n", "Category", "Accuracy(%)");
        for c in &self.categories {
            let _ = writeln!(s, "{:<24} {:>12.2}", c.category.display_name(), c.accuracy);
        }
        let _ = writeln!(s, "{:<24} {:>12.2}", "All", self.overall_accuracy);
        s
    }
}

/// Evaluates an arbitrary classifier over `ds`.
pub fn evaluate_with(
    ds: &LabeledDataset,
    mut classify: impl FnMut(&LandmarkFrame) -> Result<Label>,
) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::Dataset("evaluation set is empty".into()));
    }
    let mut counts: BTreeMap<Category, Confusion> = BTreeMap::new();
    for f in ds.frames() {
        let predicted = classify(f)?;
        counts.entry(f.category).or_default().record(f.label, predicted);
    }
    EvalReport::from_confusions(counts)
}

pub fn evaluate(artifact: &ModelArtifact, ds: &LabeledDataset) -> Result<EvalReport> {
    let predictor = Predictor::new(artifact)?;
    evaluate_with(ds, |f| Ok(class_of(predictor.predict(f)?.probabilities)))
}
