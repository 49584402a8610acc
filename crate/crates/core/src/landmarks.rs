//! Landmark frames, per-frame min-max scaling and network input assembly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Points in the 68-landmark scheme.
pub const NUM_POINTS: usize = 68;

/// Right eye (subject's perspective) in the 68-point scheme, p1..p6.
pub const RIGHT_EYE: [usize; 6] = [36, 37, 38, 39, 40, 41];
/// Left eye (subject's perspective), p1..p6.
pub const LEFT_EYE: [usize; 6] = [42, 43, 44, 45, 46, 47];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    WithGlasses,
    NightWithoutGlasses,
    NightWithGlasses,
    WithoutGlasses,
    WithSunglasses,
}

impl Category {
    /// In report order.
    pub const ALL: [Category; 5] = [
        Category::WithGlasses,
        Category::NightWithoutGlasses,
        Category::NightWithGlasses,
        Category::WithoutGlasses,
        Category::WithSunglasses,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::WithGlasses => "with_glasses",
            Category::NightWithoutGlasses => "night_without_glasses",
            Category::NightWithGlasses => "night_with_glasses",
            Category::WithoutGlasses => "without_glasses",
            Category::WithSunglasses => "with_sunglasses",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Category::WithGlasses => "With glasses",
            Category::NightWithoutGlasses => "Night Without glasses",
            Category::NightWithGlasses => "Night With glasses",
            Category::WithoutGlasses => "Without glasses",
            Category::WithSunglasses => "With sunglasses",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

/// Class 0 is alert, class 1 is drowsy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Alert = 0,
    Drowsy = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: i64) -> Option<Self> {
        match i {
            0 => Some(Label::Alert),
            1 => Some(Label::Drowsy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eye {
    Left,
    Right,
}

impl Eye {
    pub fn indices(self) -> [usize; 6] {
        match self {
            Eye::Left => LEFT_EYE,
            Eye::Right => RIGHT_EYE,
        }
    }
}

/// One validated face observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub subject: String,
    pub category: Category,
    pub split: Split,
    pub frame_index: u64,
    pub label: Label,
    /// 0 for source frames, otherwise the augmentation variant that produced it.
    pub variant: u8,
    pub points: Vec<[f64; 2]>,
}

/// An unvalidated record as it appears on a JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFrame {
    pub subject: String,
    pub category: String,
    pub split: String,
    pub frame: i64,
    pub label: i64,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub variant: u8,
}

fn is_zero(v: &u8) -> bool {
    *v == 0
}

impl From<&LandmarkFrame> for RawFrame {
    fn from(f: &LandmarkFrame) -> Self {
        RawFrame {
            subject: f.subject.clone(),
            category: f.category.as_str().to_owned(),
            split: f.split.as_str().to_owned(),
            frame: f.frame_index as i64,
            label: f.label.index() as i64,
            points: f.points.iter().map(|p| p.to_vec()).collect(),
            variant: f.variant,
        }
    }
}

/// Checks every frame invariant and reports all violations together.
pub fn validate_frame(raw: RawFrame) -> Result<LandmarkFrame> {
    let mut problems = Vec::new();
    let category = raw
        .category
        .parse::<Category>()
        .map_err(|e| problems.push(e))
        .ok();
    let split = raw.split.parse::<Split>().map_err(|e| problems.push(e)).ok();
    let label = Label::from_index(raw.label);
    if label.is_none() {
        problems.push(format!("label must be 0 or 1, got {}", raw.label));
    }
    if raw.frame < 0 {
        problems.push(format!("frame index must be >= 0, got {}", raw.frame));
    }
    if raw.subject.is_empty() {
        problems.push("subject must be non-empty".into());
    }
    if raw.points.len() != NUM_POINTS {
        problems.push(format!(
            "expected {NUM_POINTS} points, got {}",
            raw.points.len()
        ));
    }
    let mut points = Vec::with_capacity(raw.points.len());
    for (i, p) in raw.points.iter().enumerate() {
        match p.as_slice() {
            &[x, y] if x.is_finite() && y.is_finite() => points.push([x, y]),
            &[_, _] => problems.push(format!("point {i} has a non-finite coordinate")),
            other => problems.push(format!(
                "point {i} must be an [x, y] pair, got {} values",
                other.len()
            )),
        }
    }
    if !problems.is_empty() {
        return Err(Error::InvalidFrame(problems));
    }
    Ok(LandmarkFrame {
        subject: raw.subject,
        category: category.expect("checked"),
        split: split.expect("checked"),
        frame_index: raw.frame as u64,
        label: label.expect("checked"),
        variant: raw.variant,
        points,
    })
}

/// Number of landmarks fed to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FeatureMode {
    /// All 68 landmarks, 136 values.
    #[default]
    #[serde(rename = "136")]
    Full,
    /// Final landmark dropped, 134 values.
    #[serde(rename = "134")]
    Compat134,
}

impl FeatureMode {
    pub fn points(self) -> usize {
        match self {
            FeatureMode::Full => NUM_POINTS,
            FeatureMode::Compat134 => NUM_POINTS - 1,
        }
    }

    pub fn from_points(points: usize) -> Option<Self> {
        match points {
            68 => Some(FeatureMode::Full),
            67 => Some(FeatureMode::Compat134),
            _ => None,
        }
    }
}

/// Scaled landmarks: a sequence of points with an x and a y channel, all in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    /// Point-major: `[x0, y0, x1, y1, ...]`.
    values: Vec<f32>,
}

impl FeatureTensor {
    pub fn points(&self) -> usize {
        self.values.len() / 2
    }

    pub fn get(&self, point: usize, channel: usize) -> f32 {
        self.values[point * 2 + channel]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Drops the final sequence position.
    pub fn truncated(&self, points: usize) -> FeatureTensor {
        FeatureTensor {
            values: self.values[..points * 2].to_vec(),
        }
    }

    /// Channel-major `[2, points]` tensor, the network's input layout.
    pub fn to_input(&self) -> Tensor<f32> {
        let n = self.points();
        let mut data = Vec::with_capacity(n * 2);
        data.extend((0..n).map(|i| self.values[i * 2]));
        data.extend((0..n).map(|i| self.values[i * 2 + 1]));
        Tensor::new(vec![2, n], data).expect("2 x n layout")
    }
}

/// Per-frame, per-axis min-max scaling. A degenerate axis maps to 0.5.
pub fn min_max_scale(frame: &LandmarkFrame) -> FeatureTensor {
    let axis = |a: usize| {
        frame.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[a]), hi.max(p[a]))
        })
    };
    let ranges = [axis(0), axis(1)];
    let mut values = Vec::with_capacity(frame.points.len() * 2);
    for p in &frame.points {
        for (a, &(lo, hi)) in ranges.iter().enumerate() {
            let span = hi - lo;
            let v = if span > 0.0 { (p[a] - lo) / span } else { 0.5 };
            values.push(v as f32);
        }
    }
    FeatureTensor { values }
}

/// Scaled features in the layout the network expects for `mode`.
pub fn assemble_feature(frame: &LandmarkFrame, mode: FeatureMode) -> FeatureTensor {
    let scaled = min_max_scale(frame);
    match mode {
        FeatureMode::Full => scaled,
        FeatureMode::Compat134 => scaled.truncated(mode.points()),
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `(|p2 - p6| + |p3 - p5|) / (2 |p1 - p4|)` over the eye's six landmarks.
pub fn eye_aspect_ratio(frame: &LandmarkFrame, eye: Eye) -> Result<f64> {
    let [p1, p2, p3, p4, p5, p6] = eye.indices().map(|i| frame.points[i]);
    let width = dist(p1, p4);
    if width == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{eye:?} eye has zero horizontal width"
        )));
    }
    Ok((dist(p2, p6) + dist(p3, p5)) / (2.0 * width))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(points: Vec<Vec<f64>>) -> RawFrame {
        RawFrame {
            subject: "s01".into(),
            category: "without_glasses".into(),
            split: "train".into(),
            frame: 3,
            label: 1,
            points,
            variant: 0,
        }
    }

    fn grid() -> Vec<Vec<f64>> {
        (0..68).map(|i| vec![(i % 10) as f64 * 7.0, (i / 10) as f64 * 11.0]).collect()
    }

    #[test]
    fn accepts_valid_record() {
        let f = validate_frame(raw(grid())).unwrap();
        assert_eq!(f.category, Category::WithoutGlasses);
        assert_eq!(f.label, Label::Drowsy);
        assert_eq!(f.points.len(), 68);
    }

    #[test]
    fn rejects_wrong_point_count() {
        let mut p = grid();
        p.pop();
        let err = validate_frame(raw(p)).unwrap_err().to_string();
        assert!(err.contains("expected 68 points, got 67"), "{err}");
    }

    #[test]
    fn rejects_nan_naming_the_point() {
        let mut p = grid();
        p[33][0] = f64::NAN;
        let err = validate_frame(raw(p)).unwrap_err().to_string();
        assert!(err.contains("point 33"), "{err}");
    }

    #[test]
    fn lists_every_violation() {
        let mut r = raw(grid());
        r.category = "goggles".into();
        r.label = 2;
        let Error::InvalidFrame(problems) = validate_frame(r).unwrap_err() else {
            panic!("wrong error kind");
        };
        assert_eq!(problems.len(), 2, "{problems:?}");
    }

    fn frame(points: Vec<[f64; 2]>) -> LandmarkFrame {
        LandmarkFrame {
            subject: "s".into(),
            category: Category::WithGlasses,
            split: Split::Train,
            frame_index: 0,
            label: Label::Alert,
            variant: 0,
            points,
        }
    }

    #[test]
    fn degenerate_frame_scales_to_half() {
        let f = min_max_scale(&frame(vec![[5.0, 5.0]; 68]));
        assert!(f.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn endpoints_and_midpoint() {
        let mut pts = vec![[200.0, 50.0]; 68];
        pts[0] = [100.0, 0.0];
        pts[1] = [300.0, 100.0];
        let f = min_max_scale(&frame(pts));
        assert_eq!(f.get(0, 0), 0.0);
        assert_eq!(f.get(1, 0), 1.0);
        assert_eq!(f.get(2, 0), 0.5);
    }

    #[test]
    fn distinguished_points_scale_by_hand_formula() {
        let mut pts = vec![[15.0, 5.0]; 68];
        pts[10] = [10.0, 0.0];
        pts[20] = [20.0, 10.0];
        pts[30] = [30.0, 20.0];
        let f = min_max_scale(&frame(pts));
        for (i, want) in [(10, 0.0), (20, 0.5), (30, 1.0)] {
            assert_eq!(f.get(i, 0), want);
            assert_eq!(f.get(i, 1), want);
        }
    }

    #[test]
    fn feature_modes() {
        let f = frame(grid().into_iter().map(|p| [p[0], p[1]]).collect());
        let full = assemble_feature(&f, FeatureMode::Full);
        let compat = assemble_feature(&f, FeatureMode::Compat134);
        assert_eq!(full.values().len(), 136);
        assert_eq!(compat.values().len(), 134);
        assert_eq!(compat.values(), &full.values()[..134]);
        assert!(full.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let input = full.to_input();
        assert_eq!(input.shape(), &[2, 68]);
        assert_eq!(input.data()[68 + 5], full.get(5, 1));
    }

    fn eye_frame(gap: f64, width: f64) -> LandmarkFrame {
        let mut pts = vec![[0.0, 0.0]; 68];
        for (eye, cx) in [(RIGHT_EYE, 0.0), (LEFT_EYE, 50.0)] {
            let [p1, p2, p3, p4, p5, p6] = eye;
            pts[p1] = [cx - width / 2.0, 0.0];
            pts[p4] = [cx + width / 2.0, 0.0];
            pts[p2] = [cx - 3.0, -gap / 2.0];
            pts[p3] = [cx + 3.0, -gap / 2.0];
            pts[p5] = [cx + 3.0, gap / 2.0];
            pts[p6] = [cx - 3.0, gap / 2.0];
        }
        frame(pts)
    }

    #[test]
    fn ear_examples() {
        let open = eye_frame(4.0, 20.0);
        assert!((eye_aspect_ratio(&open, Eye::Left).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(eye_aspect_ratio(&eye_frame(0.0, 20.0), Eye::Right).unwrap(), 0.0);
        let mut scaled = open.clone();
        scaled.points.iter_mut().for_each(|p| *p = [p[0] * 3.5, p[1] * 3.5]);
        assert!((eye_aspect_ratio(&scaled, Eye::Right).unwrap() - 0.2).abs() < 1e-12);
        assert!(eye_aspect_ratio(&eye_frame(4.0, 0.0), Eye::Left).is_err());
    }
}
