//! Deterministic synthetic faces.
//!
//! Every frame is a canonical 68-point template warped by a per-subject face
//! shape and placement. Drowsiness lowers the upper eyelids (EAR drawn from
//! per-state distributions), sometimes closes the eyes fully, opens the mouth
//! and rolls the head. Night and sunglasses categories add eye-region noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{eval_subject_count, LabeledDataset, Provenance, SplitSummary};
use crate::landmarks::{Category, LandmarkFrame, Label, Split, LEFT_EYE, NUM_POINTS, RIGHT_EYE};
use crate::rng::{seeded, DetRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarDistribution {
    pub mean: f64,
    pub std: f64,
}

/// Extra landmark noise (pixels) for one category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryNoise {
    pub category: Category,
    pub eye_px: f64,
    pub global_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub frames_per_subject_per_state: usize,
    pub seed: u64,
    pub alert_ear: EarDistribution,
    pub drowsy_ear: EarDistribution,
    /// Chance that a drowsy frame shows fully closed eyes.
    pub closure_prob: f64,
    /// Fraction of drowsy frames with a progressive head droop.
    pub droop_fraction: f64,
    /// Share of subjects tagged `eval`.
    pub eval_fraction: f64,
    pub noise: Vec<CategoryNoise>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 22,
            frames_per_subject_per_state: 10,
            seed: 42,
            alert_ear: EarDistribution { mean: 0.30, std: 0.02 },
            drowsy_ear: EarDistribution { mean: 0.12, std: 0.03 },
            closure_prob: 0.25,
            droop_fraction: 0.3,
            eval_fraction: super::DEFAULT_EVAL_FRACTION,
            noise: vec![
                CategoryNoise { category: Category::WithGlasses, eye_px: 0.5, global_px: 0.0 },
                CategoryNoise { category: Category::NightWithoutGlasses, eye_px: 0.8, global_px: 0.6 },
                CategoryNoise { category: Category::NightWithGlasses, eye_px: 1.2, global_px: 0.6 },
                CategoryNoise { category: Category::WithoutGlasses, eye_px: 0.0, global_px: 0.0 },
                CategoryNoise { category: Category::WithSunglasses, eye_px: 1.5, global_px: 0.0 },
            ],
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: String| Err(crate::Error::InvalidParameter(m));
        if self.alert_ear.mean <= self.drowsy_ear.mean {
            return bad("alert EAR mean must exceed drowsy EAR mean".into());
        }
        if !(self.alert_ear.std > 0.0 && self.drowsy_ear.std > 0.0) {
            return bad("EAR standard deviations must be positive".into());
        }
        for p in [self.closure_prob, self.droop_fraction] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.eval_fraction) {
            return bad(format!("eval_fraction {} outside [0, 1)", self.eval_fraction));
        }
        if self.noise.iter().any(|n| n.eye_px < 0.0 || n.global_px < 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        Ok(())
    }

    fn noise_for(&self, c: Category) -> CategoryNoise {
        self.noise
            .iter()
            .copied()
            .find(|n| n.category == c)
            .unwrap_or(CategoryNoise { category: c, eye_px: 0.0, global_px: 0.0 })
    }
}

/// Face shape and placement fixed for one subject.
#[derive(Debug, Clone)]
struct SubjectProfile {
    id: String,
    center: [f64; 2],
    /// Pixels per template unit.
    scale: f64,
    eye_spacing: f64,
    eye_width: f64,
    mouth_width: f64,
    jaw_width: f64,
    ear_offset: f64,
}

impl SubjectProfile {
    fn sample(id: String, rng: &mut DetRng) -> Self {
        Self {
            id,
            center: [rng.random_range(260.0..380.0), rng.random_range(200.0..280.0)],
            scale: rng.random_range(90.0..130.0),
            eye_spacing: rng.random_range(0.92..1.08),
            eye_width: rng.random_range(0.9..1.1),
            mouth_width: rng.random_range(0.9..1.1),
            jaw_width: rng.random_range(0.92..1.08),
            ear_offset: rng.random_range(-0.02..0.02),
        }
    }
}

/// Per-frame expression state.
struct Expression {
    ear_right: f64,
    ear_left: f64,
    mouth_open: f64,
    roll_deg: f64,
}

const EYE_HALF_WIDTH: f64 = 0.18;
const EYE_Y: f64 = -0.3;
const OPEN_EAR_REF: f64 = 0.30;

fn eye_points(out: &mut [[f64; 2]], idx: [usize; 6], cx: f64, half_w: f64, ear: f64) {
    let w = 2.0 * half_w;
    let lower = EYE_Y + 0.5 * OPEN_EAR_REF * w;
    let upper = lower - ear.max(0.0) * w;
    let [p1, p2, p3, p4, p5, p6] = idx;
    out[p1] = [cx - half_w, EYE_Y];
    out[p4] = [cx + half_w, EYE_Y];
    out[p2] = [cx - w / 6.0, upper];
    out[p3] = [cx + w / 6.0, upper];
    out[p5] = [cx + w / 6.0, lower];
    out[p6] = [cx - w / 6.0, lower];
}

/// The 68-point face in template units, y pointing down.
fn template(p: &SubjectProfile, e: &Expression) -> Vec<[f64; 2]> {
    let mut pts = vec![[0.0, 0.0]; NUM_POINTS];
    for (i, pt) in pts.iter_mut().enumerate().take(17) {
        let a = PI * (1.0 - i as f64 / 16.0);
        *pt = [a.cos() * p.jaw_width, -0.1 + 1.2 * a.sin()];
    }
    for k in 0..5 {
        let t = k as f64 / 4.0;
        let arch = -0.55 - 0.1 * (PI * t).sin();
        pts[17 + k] = [-0.75 + 0.6 * t, arch];
        pts[22 + k] = [0.15 + 0.6 * t, -0.55 - 0.1 * (PI * t).sin()];
    }
    for k in 0..4 {
        pts[27 + k] = [0.0, -0.35 + 0.55 * k as f64 / 3.0];
    }
    for k in 0..5 {
        let off = k as f64 - 2.0;
        pts[31 + k] = [0.1 * off, 0.3 + 0.04 * (1.0 - off.abs() / 2.0)];
    }
    let half_w = EYE_HALF_WIDTH * p.eye_width;
    let dx = 0.42 * p.eye_spacing;
    eye_points(&mut pts, RIGHT_EYE, -dx, half_w, e.ear_right);
    eye_points(&mut pts, LEFT_EYE, dx, half_w, e.ear_left);

    let mw = 0.35 * p.mouth_width;
    let (my, open) = (0.65, e.mouth_open);
    // outer lip: 48 left corner, 49-53 upper, 54 right corner, 55-59 lower (right to left)
    pts[48] = [-mw, my];
    pts[54] = [mw, my];
    for k in 0..5 {
        let x = -mw + 2.0 * mw * (k as f64 + 1.0) / 6.0;
        pts[49 + k] = [x, my - 0.08 - open * 0.3 + 0.03 * (x / mw).powi(2)];
        let xl = mw - 2.0 * mw * (k as f64 + 1.0) / 6.0;
        pts[55 + k] = [xl, my + 0.1 + open * 0.7 - 0.03 * (xl / mw).powi(2)];
    }
    let iw = 0.25 * p.mouth_width;
    pts[60] = [-iw, my];
    pts[64] = [iw, my];
    for k in 0..3 {
        let x = -iw + 2.0 * iw * (k as f64 + 1.0) / 4.0;
        pts[61 + k] = [x, my - 0.02 - open * 0.3];
        pts[65 + k] = [-x, my + 0.02 + open * 0.7];
    }
    pts
}

/// Frame generator shared by the subject grid and manifest-driven modes.
struct FaceSampler<'a> {
    spec: &'a SynthSpec,
    rng: DetRng,
}

impl FaceSampler<'_> {
    fn ear(&mut self, d: EarDistribution) -> f64 {
        Normal::new(d.mean, d.std).expect("positive std").sample(&mut self.rng)
    }

    /// `progress` in [0, 1] is the position within the subject's drowsy episode.
    fn frame(
        &mut self,
        p: &SubjectProfile,
        category: Category,
        split: Split,
        label: Label,
        frame_index: u64,
        progress: f64,
    ) -> LandmarkFrame {
        let spec = self.spec;
        let expr = match label {
            Label::Alert => {
                let base = self.ear(spec.alert_ear) + p.ear_offset;
                Expression {
                    ear_right: base + self.rng.random_range(-0.01..0.01),
                    ear_left: base + self.rng.random_range(-0.01..0.01),
                    mouth_open: self.rng.random_range(0.0..0.03),
                    roll_deg: Normal::new(0.0, 3.0).expect("std").sample(&mut self.rng),
                }
            }
            Label::Drowsy => {
                let closed = self.rng.random_bool(spec.closure_prob);
                let base = if closed {
                    self.rng.random_range(0.0..0.05)
                } else {
                    self.ear(spec.drowsy_ear) + p.ear_offset
                };
                let yawn = self.rng.random_bool(0.2);
                let droop = self.rng.random_bool(spec.droop_fraction);
                let roll = Normal::new(0.0, 3.0).expect("std").sample(&mut self.rng);
                Expression {
                    ear_right: (base + self.rng.random_range(-0.01..0.01)).max(0.0),
                    ear_left: (base + self.rng.random_range(-0.01..0.01)).max(0.0),
                    mouth_open: if yawn { self.rng.random_range(0.15..0.3) } else { self.rng.random_range(0.0..0.03) },
                    roll_deg: if droop { roll + 5.0 + 10.0 * progress } else { roll },
                }
            }
        };
        let noise = spec.noise_for(category);
        let (sin, cos) = expr.roll_deg.to_radians().sin_cos();
        let pts = template(p, &expr)
            .into_iter()
            .enumerate()
            .map(|(i, [x, y])| {
                let rx = cos * x - sin * y;
                let ry = sin * x + cos * y;
                let mut px = [p.center[0] + p.scale * rx, p.center[1] + p.scale * ry];
                let mut sigma = 0.5f64.powi(2) + noise.global_px.powi(2);
                if (36..48).contains(&i) {
                    sigma += noise.eye_px.powi(2);
                }
                let jitter = Normal::new(0.0, sigma.sqrt()).expect("std");
                px[0] += jitter.sample(&mut self.rng);
                px[1] += jitter.sample(&mut self.rng);
                px
            })
            .collect();
        LandmarkFrame {
            subject: p.id.clone(),
            category,
            split,
            frame_index,
            label,
            variant: 0,
            points: pts,
        }
    }
}

/// Subjects x categories x {alert, drowsy} x frames, in that nesting order.
/// The last `round(n_subjects * eval_fraction)` subjects are tagged `eval`.
pub fn gen_synthetic(spec: &SynthSpec) -> crate::Result<LabeledDataset> {
    spec.validate()?;
    let n_eval = if spec.n_subjects >= 2 && spec.eval_fraction > 0.0 {
        eval_subject_count(spec.n_subjects, spec.eval_fraction).unwrap_or(0)
    } else {
        0
    };
    let mut sampler = FaceSampler {
        spec,
        rng: seeded(spec.seed),
    };
    let n = spec.frames_per_subject_per_state;
    let mut frames = Vec::with_capacity(spec.n_subjects * Category::ALL.len() * 2 * n);
    for s in 0..spec.n_subjects {
        let profile = SubjectProfile::sample(format!("s{s:02}"), &mut sampler.rng);
        let split = if s >= spec.n_subjects - n_eval { Split::Eval } else { Split::Train };
        for category in Category::ALL {
            for (state, label) in [Label::Alert, Label::Drowsy].into_iter().enumerate() {
                for f in 0..n {
                    let progress = if n > 1 { f as f64 / (n - 1) as f64 } else { 0.0 };
                    let idx = (state * n + f) as u64;
                    frames.push(sampler.frame(&profile, category, split, label, idx, progress));
                }
            }
        }
    }
    Ok(LabeledDataset::new(frames, Provenance::Synthetic))
}

/// Streams synthetic frames matching every cell of `manifest`, without
/// materializing them. Labels alternate alert/drowsy; subjects cycle through
/// a pool of `spec.n_subjects` profiles per split.
pub fn manifest_frames<'a>(
    manifest: &'a SplitSummary,
    spec: &'a SynthSpec,
) -> crate::Result<impl Iterator<Item = LandmarkFrame> + 'a> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let pool = spec.n_subjects.max(1);
    let profiles: Vec<SubjectProfile> = (0..2 * pool)
        .map(|i| {
            let tag = if i < pool { "t" } else { "e" };
            SubjectProfile::sample(format!("{tag}{:02}", i % pool), &mut rng)
        })
        .collect();
    let mut sampler = FaceSampler { spec, rng };
    Ok(manifest.rows.iter().flat_map(move |row| {
        let offset = if row.split == Split::Train { 0 } else { pool };
        (0..row.frames).map(move |k| (row.split, row.category, offset, k))
    })
    .map(move |(split, category, offset, k)| {
        let label = if k % 2 == 0 { Label::Alert } else { Label::Drowsy };
        let profile = &profiles[offset + (k as usize / 2) % pool];
        sampler.frame(profile, category, split, label, k, 0.5)
    }))
}
