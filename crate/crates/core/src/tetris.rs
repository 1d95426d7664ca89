//! 3D Tetris shapes and the randomly moved datasets built from them.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::{random_rotation, RigidMotion, Vec3};
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 8;
pub const POINTS_PER_SHAPE: usize = 4;
/// Flattened length of one sample (4 points x 3 coordinates, point-major).
pub const INPUT_DIM: usize = POINTS_PER_SHAPE * 3;

/// Half-width of the uniform translation range used by every dataset.
pub const TRANSLATION_RANGE: f64 = 3.0;

pub type ShapePoints = [Vec3; POINTS_PER_SHAPE];

const CANONICAL: [(&str, ShapePoints); NUM_CLASSES] = [
    (
        "chiral_a",
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
        ],
    ),
    (
        "chiral_b",
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [1.0, -1.0, 0.0],
        ],
    ),
    (
        "square",
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ],
    ),
    (
        "line",
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 2.0],
            [0.0, 0.0, 3.0],
        ],
    ),
    (
        "corner",
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
        ],
    ),
    (
        "l",
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 2.0],
            [0.0, 1.0, 0.0],
        ],
    ),
    (
        "t",
        [
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 2.0],
            [0.0, 1.0, 1.0],
        ],
    ),
    (
        "zigzag",
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [2.0, 1.0, 0.0],
        ],
    ),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalShape {
    pub label: u8,
    pub name: &'static str,
    pub points: ShapePoints,
}

/// The eight canonical shapes, labelled 0..8. Labels 0 and 1 are the chiral
/// pair (mirror images of each other).
pub fn canonical_shapes() -> [CanonicalShape; NUM_CLASSES] {
    std::array::from_fn(|i| CanonicalShape {
        label: i as u8,
        name: CANONICAL[i].0,
        points: CANONICAL[i].1,
    })
}

/// Finite union of half-open angle intervals `[lo, hi)` inside `[0, 2π)`.
///
/// Zero-length intervals are allowed and act as point masses when every
/// interval in the set has zero length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    intervals: Vec<(f64, f64)>,
}

impl AngleSet {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidConfig("angle set is empty".into()));
        }
        for &(lo, hi) in &intervals {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= TAU) {
                return Err(Error::InvalidConfig(format!(
                    "angle interval [{lo}, {hi}) is not inside [0, 2π)"
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn full_turn() -> Self {
        Self {
            intervals: vec![(0.0, TAU)],
        }
    }

    /// A single fixed angle.
    pub fn fixed(angle: f64) -> Result<Self> {
        Self::new(vec![(angle, angle)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn contains(&self, angle: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(lo, hi)| (lo <= angle && angle < hi) || (lo == hi && angle == lo))
    }

    /// Picks an interval with probability proportional to its length, then a
    /// uniform angle inside it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = self.total_length();
        if total == 0.0 {
            let i = rng.random_range(0..self.intervals.len());
            return self.intervals[i].0;
        }
        let mut u = rng.random::<f64>() * total;
        for &(lo, hi) in &self.intervals {
            let len = hi - lo;
            if len == 0.0 {
                continue;
            }
            if u < len {
                return lo + u;
            }
            u -= len;
        }
        // u landed on the upper edge through rounding; fall back to the last
        // non-empty interval.
        let &(lo, hi) = self
            .intervals
            .iter()
            .rev()
            .find(|(lo, hi)| hi > lo)
            .expect("nonzero total length");
        lo + rng.random::<f64>() * (hi - lo)
    }
}

/// Rotation about a uniformly random axis by an angle from `angles`, followed
/// by a translation with components uniform in `(-t_range, t_range)`.
pub fn sample_motion<R: Rng + ?Sized>(
    rng: &mut R,
    angles: &AngleSet,
    t_range: f64,
) -> Result<RigidMotion> {
    if !(t_range.is_finite() && t_range >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "translation range must be a nonnegative number, got {t_range}"
        )));
    }
    let rotation = random_rotation(rng, |rng| angles.sample(rng));
    let mut translation = [0.0; 3];
    if t_range > 0.0 {
        for t in &mut translation {
            *t = rng.random_range(-t_range..t_range);
        }
    }
    RigidMotion::new(rotation, translation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Main,
    ThetaSplitTrain,
    ThetaSplitEval,
}

impl DatasetKind {
    pub fn angle_set(self) -> AngleSet {
        let intervals = match self {
            DatasetKind::Main => vec![(0.0, TAU)],
            DatasetKind::ThetaSplitTrain => vec![(0.0, FRAC_PI_4), (PI, PI + FRAC_PI_4)],
            DatasetKind::ThetaSplitEval => vec![(FRAC_PI_4, PI), (PI + FRAC_PI_4, TAU)],
        };
        AngleSet { intervals }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Main => "main",
            DatasetKind::ThetaSplitTrain => "theta-train",
            DatasetKind::ThetaSplitEval => "theta-eval",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(DatasetKind::Main),
            "theta-train" => Ok(DatasetKind::ThetaSplitTrain),
            "theta-eval" => Ok(DatasetKind::ThetaSplitEval),
            other => Err(Error::InvalidConfig(format!(
                "unknown dataset kind '{other}'"
            ))),
        }
    }
}

/// One labelled point cloud of four ordered points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub points: ShapePoints,
    pub label: u8,
}

impl Sample {
    /// Point-major flattening `(x1, y1, z1, ..., x4, y4, z4)`.
    pub fn flat(&self) -> [f64; INPUT_DIM] {
        let mut out = [0.0; INPUT_DIM];
        for (chunk, p) in out.chunks_exact_mut(3).zip(&self.points) {
            chunk.copy_from_slice(p);
        }
        out
    }

    pub fn transformed(&self, m: &RigidMotion) -> Sample {
        Sample {
            points: self.points.map(|p| m.apply(&p)),
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub kind: DatasetKind,
    pub noise: f64,
    pub angles: AngleSet,
    pub translation_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledShapeSet {
    pub samples: Vec<Sample>,
    /// Generation parameters; absent for sets loaded from disk.
    pub meta: Option<DatasetMeta>,
}

impl LabeledShapeSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for s in &self.samples {
            counts[s.label as usize] += 1;
        }
        counts
    }

    /// Applies the same rigid motion to every point of every sample.
    pub fn transformed(&self, m: &RigidMotion) -> LabeledShapeSet {
        LabeledShapeSet {
            samples: self.samples.iter().map(|s| s.transformed(m)).collect(),
            meta: None,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["label".to_string()];
        for i in 1..=POINTS_PER_SHAPE {
            for axis in ["x", "y", "z"] {
                header.push(format!("{axis}{i}"));
            }
        }
        w.write_record(&header)
            .map_err(|e| Error::format("dataset", e))?;
        let mut row = Vec::with_capacity(INPUT_DIM + 1);
        for s in &self.samples {
            row.clear();
            row.push(s.label.to_string());
            row.extend(s.flat().iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row)
                .map_err(|e| Error::format("dataset", e))?;
        }
        w.flush().map_err(|e| Error::format("dataset", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers().map_err(|e| Error::format("dataset", e))?;
        if headers.len() != INPUT_DIM + 1 || &headers[0] != "label" {
            return Err(Error::format(
                "dataset",
                format!("expected {} columns starting with 'label'", INPUT_DIM + 1),
            ));
        }
        let mut samples = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record.map_err(|e| Error::format("dataset", e))?;
            let bad = |msg: String| Error::format("dataset", format!("row {}: {msg}", line + 1));
            let label: u8 = record[0]
                .trim()
                .parse()
                .map_err(|e| bad(format!("label: {e}")))?;
            if label as usize >= NUM_CLASSES {
                return Err(bad(format!("label {label} out of range")));
            }
            let mut points = [[0.0; 3]; POINTS_PER_SHAPE];
            for (i, field) in record.iter().skip(1).enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| bad(format!("coordinate {}: {e}", i + 1)))?;
                if !v.is_finite() {
                    return Err(bad(format!("coordinate {} is not finite", i + 1)));
                }
                points[i / 3][i % 3] = v;
            }
            samples.push(Sample { points, label });
        }
        Ok(Self {
            samples,
            meta: None,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Builds a class-balanced dataset: sample `i` is canonical shape `i mod 8`
/// moved by a random rigid motion, then perturbed by i.i.d. `U(-a, a)` noise
/// on every coordinate when `a > 0`.
pub fn make_dataset(
    kind: DatasetKind,
    size: usize,
    noise: f64,
    seed: u64,
) -> Result<LabeledShapeSet> {
    make_dataset_with(kind.angle_set(), TRANSLATION_RANGE, kind, size, noise, seed)
}

/// [`make_dataset`] with an explicit angle set and translation range.
pub fn make_dataset_with(
    angles: AngleSet,
    translation_range: f64,
    kind: DatasetKind,
    size: usize,
    noise: f64,
    seed: u64,
) -> Result<LabeledShapeSet> {
    if size < NUM_CLASSES {
        return Err(Error::InvalidConfig(format!(
            "dataset size must be at least {NUM_CLASSES}, got {size}"
        )));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise amplitude must be a nonnegative number, got {noise}"
        )));
    }
    let shapes = canonical_shapes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(size);
    for i in 0..size {
        let shape = &shapes[i % NUM_CLASSES];
        let motion = sample_motion(&mut rng, &angles, translation_range)?;
        let mut points = shape.points.map(|p| motion.apply(&p));
        if noise > 0.0 {
            for v in points.as_flattened_mut() {
                *v += rng.random_range(-noise..noise);
            }
        }
        samples.push(Sample {
            points,
            label: shape.label,
        });
    }
    Ok(LabeledShapeSet {
        samples,
        meta: Some(DatasetMeta {
            seed,
            kind,
            noise,
            angles,
            translation_range,
        }),
    })
}
