use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::Rng;

use drowsy_core::augment::{augment_dataset, AugmentRecipe, AUGMENT_FACTOR};
use drowsy_core::dataset::{partition, LabeledDataset, Provenance};
use drowsy_core::landmarks::{min_max_scale, Category, Label, LandmarkFrame, Split, NUM_POINTS};
use drowsy_core::nn::ops::{leaky_relu, softmax};
use drowsy_core::nn::Tensor;
use drowsy_core::rng::seeded;

#[test]
fn leaky_relu_is_identity_above_zero_and_scaled_below() {
    let mut rng = seeded(2024);
    let mut violations = 0usize;
    let xs: Vec<f32> = (0..100_000)
        .map(|i| match i % 4 {
            0 => rng.random_range(-1.0f32..1.0),
            1 => rng.random_range(-1e6f32..1e6),
            2 => f32::from_bits(rng.random::<u32>()),
            _ => rng.random_range(-1e-30f32..1e-30),
        })
        .map(|x| if x.is_finite() { x } else { 0.0 })
        .collect();
    let y = leaky_relu(&Tensor::from_vec(xs.clone()), 0.1f32).unwrap();
    for (&x, &fx) in xs.iter().zip(y.data()) {
        let want = if x > 0.0 { x } else { 0.1f32 * x };
        violations += usize::from(fx.to_bits() != want.to_bits());
    }
    assert_eq!(violations, 0);

    let xs: Vec<f64> = xs.iter().map(|&x| f64::from(x)).collect();
    let y = leaky_relu(&Tensor::from_vec(xs.clone()), 0.1f64).unwrap();
    for (&x, &fx) in xs.iter().zip(y.data()) {
        assert_eq!(fx, if x > 0.0 { x } else { 0.1 * x });
    }
}

fn frame_from(points: Vec<[f64; 2]>) -> LandmarkFrame {
    LandmarkFrame {
        subject: "p".into(),
        category: Category::WithoutGlasses,
        split: Split::Train,
        frame_index: 0,
        label: Label::Alert,
        variant: 0,
        points,
    }
}

fn face_points() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0).prop_map(|(x, y)| [x, y]), NUM_POINTS)
}

fn close(a: &[f32], b: &[f32], tol: f32) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #[test]
    fn softmax_ignores_logit_shift(logits in prop::collection::vec(-50.0f64..50.0, 2..8), shift in -1e3f64..1e3) {
        let p = softmax(&logits).unwrap();
        let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
        let q = softmax(&shifted).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_ignores_translation_and_zoom(
        pts in face_points(),
        dx in -1e3f64..1e3,
        dy in -1e3f64..1e3,
        s in 0.1f64..10.0,
    ) {
        let base = min_max_scale(&frame_from(pts.clone()));
        let moved = min_max_scale(&frame_from(pts.iter().map(|p| [s * p[0] + dx, s * p[1] + dy]).collect()));
        prop_assert!(close(base.values(), moved.values(), 1e-5));
        prop_assert!(base.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn scaling_is_idempotent(pts in face_points()) {
        let once = min_max_scale(&frame_from(pts));
        let again_points = (0..NUM_POINTS)
            .map(|i| [f64::from(once.get(i, 0)), f64::from(once.get(i, 1))])
            .collect();
        let twice = min_max_scale(&frame_from(again_points));
        prop_assert!(close(once.values(), twice.values(), 1e-6));
    }
}

fn random_dataset(seed: u64) -> LabeledDataset {
    let mut rng = seeded(seed);
    let n_subjects = rng.random_range(2..30);
    let n_frames = rng.random_range(n_subjects..n_subjects * 8);
    let frames = (0..n_frames)
        .map(|i| LandmarkFrame {
            subject: format!("subj{}", if i < n_subjects { i } else { rng.random_range(0..n_subjects) }),
            category: Category::ALL[rng.random_range(0..5)],
            split: Split::Train,
            frame_index: i as u64,
            label: if rng.random_bool(0.5) { Label::Drowsy } else { Label::Alert },
            variant: 0,
            points: vec![[0.0, 0.0]; NUM_POINTS],
        })
        .collect();
    LabeledDataset::new(frames, Provenance::Synthetic)
}

#[test]
fn partitions_are_subject_disjoint_and_complete() {
    for seed in 0..100 {
        let ds = random_dataset(seed);
        let fraction = seeded(seed ^ 0xabc).random_range(0.1..0.5);
        let Ok((a, b)) = partition(&ds, fraction) else { continue };
        let sa: BTreeSet<&str> = a.subjects();
        let sb: BTreeSet<&str> = b.subjects();
        assert!(sa.is_disjoint(&sb), "seed {seed}");
        assert_eq!(a.len() + b.len(), ds.len(), "seed {seed}");
        assert!(!a.is_empty() && !b.is_empty(), "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn augmentation_multiplies_every_category_by_six(seed in any::<u64>()) {
        let ds = random_dataset(seed);
        let out = augment_dataset(&ds, &AugmentRecipe::default(), seed).unwrap();
        prop_assert_eq!(out.len(), AUGMENT_FACTOR * ds.len());
        let count = |d: &LabeledDataset| {
            let mut m = BTreeMap::new();
            for f in d.frames() {
                *m.entry((f.category, f.label)).or_insert(0usize) += 1;
            }
            m
        };
        let before = count(&ds);
        for (k, n) in count(&out) {
            prop_assert_eq!(n, AUGMENT_FACTOR * before[&k]);
        }
        for (chunk, src) in out.frames().chunks(AUGMENT_FACTOR).zip(ds.frames()) {
            for (v, f) in chunk.iter().enumerate() {
                prop_assert_eq!(f.variant as usize, v);
                prop_assert_eq!(f.label, src.label);
                prop_assert_eq!(f.category, src.category);
                prop_assert_eq!(&f.subject, &src.subject);
            }
        }
    }
}
