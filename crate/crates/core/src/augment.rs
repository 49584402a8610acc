//! Six-way geometric augmentation applied directly to landmark coordinates.
//!
//! Each source frame yields one identity copy plus five transformed variants,
//! so every count multiplies by exactly six.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::landmarks::{LandmarkFrame, NUM_POINTS};
use crate::rng::{seeded, DetRng};

/// Number of frames produced from every source frame.
pub const AUGMENT_FACTOR: usize = 6;

/// Left/right counterpart of every landmark under a horizontal flip.
pub const MIRROR_MAP: [usize; NUM_POINTS] = build_mirror_map();

const fn build_mirror_map() -> [usize; NUM_POINTS] {
    let pairs: [(usize, usize); 29] = [
        // jaw
        (0, 16), (1, 15), (2, 14), (3, 13), (4, 12), (5, 11), (6, 10), (7, 9),
        // brows
        (17, 26), (18, 25), (19, 24), (20, 23), (21, 22),
        // nostrils
        (31, 35), (32, 34),
        // eyes
        (36, 45), (37, 44), (38, 43), (39, 42), (40, 47), (41, 46),
        // outer lip
        (48, 54), (49, 53), (50, 52), (55, 59), (56, 58),
        // inner lip
        (60, 64), (61, 63), (65, 67),
    ];
    let mut map = [0usize; NUM_POINTS];
    let mut i = 0;
    while i < NUM_POINTS {
        map[i] = i;
        i += 1;
    }
    let mut k = 0;
    while k < pairs.len() {
        let (a, b) = pairs[k];
        map[a] = b;
        map[b] = a;
        k += 1;
    }
    map
}

/// Parameters of one augmentation variant, applied about the frame centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantTransform {
    pub rotation_deg: f64,
    pub translate: [f64; 2],
    pub scale: f64,
    pub mirror: bool,
    pub jitter_std: f64,
}

impl VariantTransform {
    pub fn identity() -> Self {
        Self {
            rotation_deg: 0.0,
            translate: [0.0, 0.0],
            scale: 1.0,
            mirror: false,
            jitter_std: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }
}

/// Exactly six variants; variant 0 is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecipe {
    pub variants: Vec<VariantTransform>,
}

impl Default for AugmentRecipe {
    /// Identity, rotate +7 and -7 degrees, scale 0.95 and 1.05, mirror; 1 px jitter on all but the identity.
    fn default() -> Self {
        let jittered = |rotation_deg: f64, scale: f64, mirror: bool| VariantTransform {
            rotation_deg,
            translate: [0.0, 0.0],
            scale,
            mirror,
            jitter_std: 1.0,
        };
        Self {
            variants: vec![
                VariantTransform::identity(),
                jittered(7.0, 1.0, false),
                jittered(-7.0, 1.0, false),
                jittered(0.0, 0.95, false),
                jittered(0.0, 1.05, false),
                jittered(0.0, 1.0, true),
            ],
        }
    }
}

impl AugmentRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.variants.len() != AUGMENT_FACTOR {
            return Err(Error::InvalidParameter(format!(
                "augment recipe needs exactly {AUGMENT_FACTOR} variants, got {}",
                self.variants.len()
            )));
        }
        if !self.variants[0].is_identity() {
            return Err(Error::InvalidParameter(
                "augment variant 0 must be the identity".into(),
            ));
        }
        for (i, v) in self.variants.iter().enumerate() {
            let finite = v.rotation_deg.is_finite()
                && v.translate.iter().all(|t| t.is_finite())
                && v.scale.is_finite()
                && v.jitter_std.is_finite();
            if !finite || v.scale <= 0.0 || v.jitter_std < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "augment variant {i} needs finite values, scale > 0 and jitter_std >= 0: {v:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let recipe: Self = serde_json::from_str(text)?;
        recipe.validate()?;
        Ok(recipe)
    }
}

fn centroid(points: &[[f64; 2]]) -> [f64; 2] {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    [sx / n, sy / n]
}

/// Applies one variant. Labels, category, subject and split carry over;
/// variant 0 returns the input unchanged.
pub fn augment_frame<R: Rng + ?Sized>(
    frame: &LandmarkFrame,
    recipe: &AugmentRecipe,
    variant: usize,
    rng: &mut R,
) -> Result<LandmarkFrame> {
    let t = recipe.variants.get(variant).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "variant {variant} out of range 0..{}",
            recipe.variants.len()
        ))
    })?;
    if variant == 0 && t.is_identity() {
        return Ok(frame.clone());
    }
    let c = centroid(&frame.points);
    let mut points = frame.points.clone();
    if t.mirror {
        // Relabel as well as reflect: the subject's left eye becomes the right eye.
        let reflected: Vec<[f64; 2]> = points.iter().map(|p| [2.0 * c[0] - p[0], p[1]]).collect();
        if points.len() == NUM_POINTS {
            for (i, p) in points.iter_mut().enumerate() {
                *p = reflected[MIRROR_MAP[i]];
            }
        } else {
            points = reflected;
        }
    }
    let (sin, cos) = t.rotation_deg.to_radians().sin_cos();
    for p in points.iter_mut() {
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        p[0] = c[0] + t.scale * (cos * dx - sin * dy) + t.translate[0];
        p[1] = c[1] + t.scale * (sin * dx + cos * dy) + t.translate[1];
    }
    if t.jitter_std > 0.0 {
        let noise = Normal::new(0.0, t.jitter_std).expect("validated std");
        for p in points.iter_mut() {
            p[0] += noise.sample(rng);
            p[1] += noise.sample(rng);
        }
    }
    Ok(LandmarkFrame {
        points,
        variant: variant as u8,
        ..frame.clone()
    })
}

/// Lazily expands a frame stream: each input frame is followed by its six
/// variants in variant order. Deterministic for a fixed seed.
pub struct AugmentStream<'r, I> {
    source: I,
    recipe: &'r AugmentRecipe,
    rng: DetRng,
    current: Option<LandmarkFrame>,
    next_variant: usize,
}

impl<I: Iterator<Item = LandmarkFrame>> Iterator for AugmentStream<'_, I> {
    type Item = Result<LandmarkFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.current.is_none() || self.next_variant == AUGMENT_FACTOR {
            self.current = Some(self.source.next()?);
            self.next_variant = 0;
        }
        let frame = self.current.as_ref().expect("set above");
        let out = augment_frame(frame, self.recipe, self.next_variant, &mut self.rng);
        self.next_variant += 1;
        Some(out)
    }
}

pub fn augment_stream<I: IntoIterator<Item = LandmarkFrame>>(
    frames: I,
    recipe: &AugmentRecipe,
    seed: u64,
) -> Result<AugmentStream<'_, I::IntoIter>> {
    recipe.validate()?;
    Ok(AugmentStream {
        source: frames.into_iter(),
        recipe,
        rng: seeded(seed),
        current: None,
        next_variant: 0,
    })
}

/// Six-fold expansion of a dataset; output order is input order times variant order.
pub fn augment_dataset(ds: &LabeledDataset, recipe: &AugmentRecipe, seed: u64) -> Result<LabeledDataset> {
    let frames = augment_stream(ds.frames().iter().cloned(), recipe, seed)?.collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset::new(frames, Provenance::Augmented))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::{min_max_scale, Category, Eye, Label, Split};

    fn asymmetric_frame() -> LandmarkFrame {
        let points = (0..NUM_POINTS)
            .map(|i| {
                let a = i as f64 * 0.61;
                [100.0 + 40.0 * a.cos() + i as f64, 120.0 + 55.0 * (a * 1.3).sin()]
            })
            .collect();
        LandmarkFrame {
            subject: "s07".into(),
            category: Category::NightWithGlasses,
            split: Split::Train,
            frame_index: 12,
            label: Label::Drowsy,
            variant: 0,
            points,
        }
    }

    #[test]
    fn mirror_map_is_an_involution() {
        for i in 0..NUM_POINTS {
            assert_eq!(MIRROR_MAP[MIRROR_MAP[i]], i);
        }
        assert_eq!(MIRROR_MAP[36], 45);
        assert_eq!(MIRROR_MAP[30], 30);
    }

    #[test]
    fn identity_variant_is_bit_equal() {
        let f = asymmetric_frame();
        let out = augment_frame(&f, &AugmentRecipe::default(), 0, &mut seeded(1)).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn translation_does_not_change_scaled_features() {
        let mut recipe = AugmentRecipe::default();
        recipe.variants[1] = VariantTransform {
            translate: [10.0, 10.0],
            ..VariantTransform::identity()
        };
        let f = asymmetric_frame();
        let moved = augment_frame(&f, &recipe, 1, &mut seeded(1)).unwrap();
        let (a, b) = (min_max_scale(&f), min_max_scale(&moved));
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn mirror_swaps_eye_aspect_ratios() {
        let mut recipe = AugmentRecipe::default();
        recipe.variants[5].jitter_std = 0.0;
        let f = asymmetric_frame();
        let m = augment_frame(&f, &recipe, 5, &mut seeded(1)).unwrap();
        let right_in = crate::landmarks::eye_aspect_ratio(&f, Eye::Right).unwrap();
        let left_out = crate::landmarks::eye_aspect_ratio(&m, Eye::Left).unwrap();
        assert!((right_in - left_out).abs() < 1e-9, "{right_in} vs {left_out}");
        let left_in = crate::landmarks::eye_aspect_ratio(&f, Eye::Left).unwrap();
        assert!((left_in - right_in).abs() > 1e-3, "test frame must be asymmetric");
    }

    #[test]
    fn metadata_is_preserved() {
        let f = asymmetric_frame();
        for v in 1..AUGMENT_FACTOR {
            let out = augment_frame(&f, &AugmentRecipe::default(), v, &mut seeded(9)).unwrap();
            assert_eq!((out.subject.as_str(), out.category, out.split, out.label, out.frame_index), ("s07", f.category, f.split, f.label, 12));
            assert_eq!(out.variant as usize, v);
        }
    }

    #[test]
    fn single_frame_becomes_six() {
        let f = asymmetric_frame();
        let ds = LabeledDataset::new(vec![f.clone()], Provenance::Synthetic);
        let out = augment_dataset(&ds, &AugmentRecipe::default(), 3).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(out.frames().iter().filter(|g| g.points == f.points).count(), 1);
        let empty = augment_dataset(&LabeledDataset::default(), &AugmentRecipe::default(), 3).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn recipe_validation() {
        let mut r = AugmentRecipe::default();
        r.variants.pop();
        assert!(r.validate().is_err());
        let mut r = AugmentRecipe::default();
        r.variants[2].scale = 0.0;
        assert!(r.validate().is_err());
        let json = serde_json::to_string(&AugmentRecipe::default()).unwrap();
        assert_eq!(AugmentRecipe::from_json(&json).unwrap(), AugmentRecipe::default());
    }
}
