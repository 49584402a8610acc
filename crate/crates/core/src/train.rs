//! Minibatch SGD training with validation-plateau stopping.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::landmarks::{assemble_feature, FeatureMode};
use crate::model::{ModelArtifact, ModelConfig};
use crate::nn::{ops::cross_entropy, ForwardCache, GradientSet, Network, ParameterSet, Sgd, Tensor};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: u32,
    /// Epochs without a new best validation accuracy before stopping.
    pub patience: u32,
    /// Epochs that always run before plateau stopping can trigger.
    #[serde(default)]
    pub min_epochs: u32,
    pub seed: u64,
    pub feature_mode: FeatureMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.9,
            batch_size: 64,
            max_epochs: 100,
            patience: 5,
            min_epochs: 0,
            seed: 42,
            feature_mode: FeatureMode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Plateau,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u32,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainRun {
    pub config_digest: String,
    pub seed: u64,
    pub history: Vec<EpochStats>,
    pub stop_reason: StopReason,
    pub best_epoch: u32,
    pub best_val_accuracy: f64,
    #[serde(skip)]
    pub artifact: ModelArtifact,
}

type Example = (Tensor<f32>, usize);

fn examples(ds: &LabeledDataset, mode: FeatureMode) -> Vec<Example> {
    ds.frames()
        .iter()
        .map(|f| (assemble_feature(f, mode).to_input(), f.label.index()))
        .collect()
}

/// Fraction of `examples` whose argmax class matches the label (ties go to class 0).
fn accuracy(net: &Network<f32>, examples: &[Example]) -> Result<f64> {
    let mut correct = 0usize;
    for (x, label) in examples {
        let p = net.forward(x)?;
        let class = usize::from(p[1] > p[0]);
        correct += usize::from(class == *label);
    }
    Ok(correct as f64 / examples.len() as f64)
}

/// Trains `config`'s network and returns the parameters of the best validation epoch.
/// Single-threaded; identical inputs and seed give bit-identical results.
pub fn train(
    config: &ModelConfig,
    train_ds: &LabeledDataset,
    val_ds: &LabeledDataset,
    hyper: &TrainConfig,
) -> Result<TrainRun> {
    if train_ds.is_empty() || val_ds.is_empty() {
        return Err(Error::Dataset("training and validation sets must be non-empty".into()));
    }
    let train_subjects = train_ds.subjects();
    let shared: HashSet<&str> = val_ds
        .subjects()
        .into_iter()
        .filter(|s| train_subjects.contains(s))
        .collect();
    if !shared.is_empty() {
        return Err(Error::Dataset(format!(
            "training and validation share subjects: {shared:?}"
        )));
    }
    if hyper.batch_size == 0 || hyper.max_epochs == 0 {
        return Err(Error::InvalidParameter("batch_size and max_epochs must be positive".into()));
    }
    let spec = config.build()?;
    if spec.input.length != hyper.feature_mode.points() {
        return Err(Error::Shape {
            expected: format!("model input of {} points", spec.input.length),
            actual: format!("feature mode with {} points", hyper.feature_mode.points()),
        });
    }

    let train_set = examples(train_ds, hyper.feature_mode);
    let val_set = examples(val_ds, hyper.feature_mode);

    let mut rng = seeded(hyper.seed);
    let params = ParameterSet::init(&spec, &mut rng)?;
    let mut net = Network::new(spec.clone(), params)?;
    let mut opt = Sgd::new(hyper.lr, hyper.momentum)?;
    let mut cache = ForwardCache::default();

    let mut history = Vec::new();
    let mut best: Option<(u32, f64, ParameterSet<f32>)> = None;
    let mut stale = 0u32;
    let mut stop_reason = StopReason::MaxEpochs;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=hyper.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for batch in order.chunks(hyper.batch_size) {
            let mut grads = GradientSet::zeros(&spec);
            for &i in batch {
                let (x, label) = &train_set[i];
                let probs = net.forward_train(x, &mut rng, &mut cache)?;
                loss_sum += cross_entropy(&probs, *label)?;
                correct += usize::from(usize::from(probs[1] > probs[0]) == *label);
                grads.accumulate(&net.backward(&cache, *label)?)?;
            }
            grads.scale(1.0 / batch.len() as f32);
            opt.step(net.params_mut(), &grads)?;
        }
        let val_accuracy = accuracy(&net, &val_set)?;
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|(_, acc, _)| val_accuracy > *acc) {
            best = Some((epoch, val_accuracy, net.params().clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.patience && epoch >= hyper.min_epochs {
                stop_reason = StopReason::Plateau;
                break;
            }
        }
    }

    let (best_epoch, best_val_accuracy, params) = best.expect("at least one epoch ran");
    let artifact = ModelArtifact::new(config, params, hyper.seed, history.len() as u32)?;
    Ok(TrainRun {
        config_digest: config.digest(),
        seed: hyper.seed,
        history,
        stop_reason,
        best_epoch,
        best_val_accuracy,
        artifact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_synthetic, partition, SynthSpec};

    fn small() -> (LabeledDataset, LabeledDataset) {
        let ds = gen_synthetic(&SynthSpec {
            n_subjects: 4,
            frames_per_subject_per_state: 3,
            ..SynthSpec::default()
        })
        .unwrap();
        partition(&ds, 0.25).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_initial_weights() {
        let (tr, va) = small();
        let hyper = TrainConfig { lr: 0.0, max_epochs: 3, patience: 10, seed: 9, ..TrainConfig::default() };
        let run = train(&ModelConfig::default(), &tr, &va, &hyper).unwrap();
        let init = ModelArtifact::initialized(&ModelConfig::default(), 9).unwrap();
        assert_eq!(run.artifact.params, init.params);
        assert_eq!(run.history.len(), 3);
        assert_eq!(run.stop_reason, StopReason::MaxEpochs);
    }

    #[test]
    fn same_seed_same_parameters() {
        let (tr, va) = small();
        let hyper = TrainConfig { max_epochs: 2, seed: 5, ..TrainConfig::default() };
        let a = train(&ModelConfig::default(), &tr, &va, &hyper).unwrap();
        let b = train(&ModelConfig::default(), &tr, &va, &hyper).unwrap();
        let bits = |r: &TrainRun| r.artifact.params.flat_values().map(f32::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert!(a.history.windows(2).all(|w| w[0].epoch < w[1].epoch));
    }

    #[test]
    fn plateau_waits_for_min_epochs() {
        let (tr, va) = small();
        let base = TrainConfig { lr: 0.0, patience: 1, max_epochs: 10, ..TrainConfig::default() };
        let early = train(&ModelConfig::default(), &tr, &va, &base).unwrap();
        assert_eq!(early.stop_reason, StopReason::Plateau);
        assert_eq!(early.history.len(), 2);
        let held = train(&ModelConfig::default(), &tr, &va, &TrainConfig { min_epochs: 6, ..base }).unwrap();
        assert_eq!(held.history.len(), 6);
        assert_eq!(held.stop_reason, StopReason::Plateau);
    }

    #[test]
    fn feature_mode_mismatch_fails_before_training() {
        let (tr, va) = small();
        let hyper = TrainConfig { feature_mode: FeatureMode::Compat134, ..TrainConfig::default() };
        assert!(matches!(train(&ModelConfig::default(), &tr, &va, &hyper), Err(Error::Shape { .. })));
    }

    #[test]
    fn overlapping_subjects_are_rejected() {
        let (tr, _) = small();
        assert!(train(&ModelConfig::default(), &tr, &tr, &TrainConfig::default()).is_err());
    }
}
