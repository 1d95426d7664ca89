//! Multilayer geometric perceptron (MLGP).
//!
//! Point clouds are lifted point-wise into the conformal space `R^5`, where a
//! plain dot product between an embedded point and a learned weight block is
//! the signed sphere-incidence measure `(r^2 - |x - c|^2) / 2`. A first-layer
//! unit is therefore a weighted sum of sphere classifiers, one per input
//! point, and rigid motions act on those spheres through 5x5 matrices.
//!
//! Modules:
//! - [`conformal`]: embeddings, sphere normalization, motor matrices.
//! - [`tetris`]: canonical 3D Tetris shapes and dataset generation.
//! - [`neural`]: embedding layers, backpropagation, Adam.
//! - [`models`]: MLP / MLHP / MLGP architectures.
//! - [`protocol`], [`isometry`], [`spheres`]: the experiment harness.

#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod conformal;
pub mod error;
pub mod isometry;
pub mod models;
pub mod neural;
pub mod protocol;
pub mod spheres;
pub mod tetris;

pub use checkpoint::Checkpoint;
pub use conformal::{
    apply_rigid, classify_point, conformal_dot, embed_point, motor_matrix_point,
    motor_matrix_sphere, random_rotation, ConformalVector, EuclideanPoint, Hypersphere, Incidence,
    MotorForm, MotorMatrix, RigidMotion,
};
pub use error::{Error, Result};
pub use isometry::{isometry_test, IsometryReport};
pub use models::{Model, ModelKind, ModelSpec};
pub use neural::{Activation, Adam, AdamConfig, LayerKind, LayerSpec, Network};
pub use protocol::{run_protocol, DatasetFamily, ProtocolConfig, ProtocolReport, RunRecord};
pub use spheres::{export_spheres, SphereReport};
pub use tetris::{canonical_shapes, make_dataset, DatasetKind, LabeledShapeSet, Sample};
