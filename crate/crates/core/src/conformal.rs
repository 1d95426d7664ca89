//! Conformal embedding of Euclidean space into `R^{n+2}`.
//!
//! Points and hyperspheres are represented by plain coordinate vectors whose
//! ordinary dot product equals the conformal scalar product:
//!
//! ```text
//! X = (x_1, ..., x_n, -1, -|x|^2 / 2)
//! S = (c_1, ..., c_n, (|c|^2 - r^2) / 2, 1)
//! X . S = -|x - c|^2 / 2 + r^2 / 2
//! ```
//!
//! Rigid motions of 3D space act on these vectors through two 5x5 matrices,
//! one for spheres and one for points, with `M_point^T M_sphere = I`. The
//! scalar product between a point and a sphere is therefore invariant when
//! both are moved by the same motion.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute band around zero inside which a point counts as lying on a sphere.
pub const ON_SPHERE_TOLERANCE: f64 = 1e-9;

/// Tolerance for the orthogonality and determinant checks on rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-12;

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} has non-finite components"
        )))
    }
}

/// Writes the conformal embedding of `x` into `out`, which must hold
/// `x.len() + 2` values.
#[inline]
pub fn embed_into(x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), x.len() + 2);
    let n = x.len();
    let mut norm_sq = 0.0;
    for (o, &v) in out[..n].iter_mut().zip(x) {
        *o = v;
        norm_sq += v * v;
    }
    out[n] = -1.0;
    out[n + 1] = -0.5 * norm_sq;
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A finite point of `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanPoint(Vec<f64>);

impl EuclideanPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Result<Self> {
        let coords = coords.into();
        check_finite("point", &coords)?;
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// A point embedded in `R^{n+2}`: `(x, -1, -|x|^2/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalVector(Vec<f64>);

impl ConformalVector {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Dimension of the Euclidean point this vector embeds.
    pub fn euclidean_dim(&self) -> usize {
        self.0.len() - 2
    }
}

pub fn embed_point(x: &EuclideanPoint) -> ConformalVector {
    let mut out = vec![0.0; x.dim() + 2];
    embed_into(x.coords(), &mut out);
    ConformalVector(out)
}

/// Which side of a sphere a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Incidence {
    Inside,
    On,
    Outside,
}

/// A hypersphere vector in `R^{n+2}`.
///
/// Learned weights are arbitrary finite vectors (`normalized == false`). A
/// normalized sphere has its last component equal to exactly 1, so that its
/// first `n` components are the center.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypersphere {
    coords: Vec<f64>,
    normalized: bool,
}

impl Hypersphere {
    pub fn from_center_radius(center: &EuclideanPoint, radius: f64) -> Result<Self> {
        if !radius.is_finite() {
            return Err(Error::InvalidInput("radius is not finite".into()));
        }
        let c = center.coords();
        let norm_sq: f64 = c.iter().map(|v| v * v).sum();
        let mut coords = Vec::with_capacity(c.len() + 2);
        coords.extend_from_slice(c);
        coords.push(0.5 * (norm_sq - radius * radius));
        coords.push(1.0);
        Ok(Self {
            coords,
            normalized: true,
        })
    }

    /// Wraps a raw (learned) parameter vector.
    pub fn from_raw(coords: impl Into<Vec<f64>>) -> Result<Self> {
        let coords = coords.into();
        if coords.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "sphere vector needs at least 3 components, got {}",
                coords.len()
            )));
        }
        check_finite("sphere", &coords)?;
        Ok(Self {
            coords,
            normalized: false,
        })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn euclidean_dim(&self) -> usize {
        self.coords.len() - 2
    }

    /// Scale factor: the last component.
    pub fn gamma(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    /// Divides every component by the last one. Returns the normalized sphere
    /// and the scale factor `gamma`, so that `self == gamma * normalized`.
    pub fn point_normalize(&self) -> Result<(Hypersphere, f64)> {
        let gamma = self.gamma();
        if gamma == 0.0 {
            return Err(Error::DegenerateSphere);
        }
        let n = self.coords.len();
        let mut coords: Vec<f64> = self.coords.iter().map(|v| v / gamma).collect();
        // x / x is exactly 1 in IEEE arithmetic, but keep the invariant explicit.
        coords[n - 1] = 1.0;
        Ok((
            Hypersphere {
                coords,
                normalized: true,
            },
            gamma,
        ))
    }

    /// Center and squared radius of a normalized sphere. The squared radius is
    /// negative for spheres with an imaginary radius and is returned as is.
    pub fn center_radius_sq(&self) -> Result<(EuclideanPoint, f64)> {
        if !self.normalized {
            return Err(Error::InvalidInput(
                "center and radius require a normalized sphere".into(),
            ));
        }
        let n = self.euclidean_dim();
        let center = self.coords[..n].to_vec();
        let norm_sq: f64 = center.iter().map(|v| v * v).sum();
        let radius_sq = norm_sq - 2.0 * self.coords[n];
        Ok((EuclideanPoint(center), radius_sq))
    }

    /// Scales every component by `factor`. The result is no longer flagged as
    /// normalized unless `factor == 1`.
    pub fn scaled(&self, factor: f64) -> Hypersphere {
        Hypersphere {
            coords: self.coords.iter().map(|v| v * factor).collect(),
            normalized: self.normalized && factor == 1.0,
        }
    }
}

pub fn conformal_dot(x: &ConformalVector, s: &Hypersphere) -> Result<f64> {
    if x.0.len() != s.coords.len() {
        return Err(Error::Shape {
            expected: x.0.len(),
            actual: s.coords.len(),
        });
    }
    Ok(dot(&x.0, &s.coords))
}

/// Inside/on/outside test using the sign of the conformal scalar product.
pub fn classify_point(x: &ConformalVector, s: &Hypersphere) -> Result<Incidence> {
    let d = conformal_dot(x, s)?;
    Ok(if d.abs() <= ON_SPHERE_TOLERANCE {
        Incidence::On
    } else if d > 0.0 {
        Incidence::Inside
    } else {
        Incidence::Outside
    })
}

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat3_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

fn transpose3(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn det3(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Largest deviation of `R^T R` from the identity and of `det R` from 1.
pub fn rotation_defect(r: &Mat3) -> f64 {
    let rtr = mat3_mul(&transpose3(r), r);
    let mut worst = (det3(r) - 1.0).abs();
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((rtr[i][j] - target).abs());
        }
    }
    worst
}

/// Proper rigid motion `x -> R x + t` of `R^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidMotion {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        check_finite("rotation", rotation.as_flattened())?;
        check_finite("translation", &translation)?;
        let defect = rotation_defect(&rotation);
        if defect > ROTATION_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "rotation is not in SO(3) (defect {defect:e})"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: IDENTITY3,
            translation: [0.0; 3],
        }
    }

    pub fn translation_only(t: Vec3) -> Self {
        Self {
            rotation: IDENTITY3,
            translation: t,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        let rx = mat3_vec(&self.rotation, x);
        [
            rx[0] + self.translation[0],
            rx[1] + self.translation[1],
            rx[2] + self.translation[2],
        ]
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &RigidMotion) -> RigidMotion {
        RigidMotion {
            rotation: mat3_mul(&self.rotation, &other.rotation),
            translation: self.apply(&other.translation),
        }
    }

    pub fn inverse(&self) -> RigidMotion {
        let rt = transpose3(&self.rotation);
        let t = mat3_vec(&rt, &self.translation);
        RigidMotion {
            rotation: rt,
            translation: [-t[0], -t[1], -t[2]],
        }
    }
}

pub fn apply_rigid(m: &RigidMotion, x: &EuclideanPoint) -> Result<EuclideanPoint> {
    let c = x.coords();
    if c.len() != 3 {
        return Err(Error::Shape {
            expected: 3,
            actual: c.len(),
        });
    }
    Ok(EuclideanPoint(m.apply(&[c[0], c[1], c[2]]).to_vec()))
}

/// Rotation by `angle` radians about the unit vector `axis` (Rodrigues).
pub fn rotation_from_axis_angle(axis: &Vec3, angle: f64) -> Mat3 {
    let [x, y, z] = *axis;
    let (s, c) = angle.sin_cos();
    let k = 1.0 - c;
    [
        [c + x * x * k, x * y * k - z * s, x * z * k + y * s],
        [y * x * k + z * s, c + y * y * k, y * z * k - x * s],
        [z * x * k - y * s, z * y * k + x * s, c + z * z * k],
    ]
}

/// Rotation about a uniformly distributed axis by an angle drawn from
/// `sample_angle`. The axis is drawn first (three standard normals,
/// normalized), then the angle.
pub fn random_rotation<R, F>(rng: &mut R, mut sample_angle: F) -> Mat3
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    let axis = loop {
        let v: Vec3 = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-12 {
            break [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    };
    let angle = sample_angle(rng);
    rotation_from_axis_angle(&axis, angle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotorForm {
    /// Acts on sphere vectors `(c, (|c|^2 - r^2)/2, 1)`.
    Sphere,
    /// Acts on point vectors `(x, -1, -|x|^2/2)`.
    Point,
}

/// 5x5 matrix realizing a rigid motion on conformal vectors of `R^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorMatrix {
    entries: [[f64; 5]; 5],
    form: MotorForm,
}

impl MotorMatrix {
    /// ```text
    /// [ R     0  t        ]
    /// [ t^T R 1  |t|^2/2  ]
    /// [ 0     0  1        ]
    /// ```
    pub fn sphere_form(m: &RigidMotion) -> Self {
        let r = &m.rotation;
        let t = &m.translation;
        let mut e = [[0.0; 5]; 5];
        for i in 0..3 {
            e[i][..3].copy_from_slice(&r[i]);
            e[i][4] = t[i];
        }
        for j in 0..3 {
            e[3][j] = (0..3).map(|k| t[k] * r[k][j]).sum();
        }
        e[3][3] = 1.0;
        e[3][4] = 0.5 * (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
        e[4][4] = 1.0;
        Self {
            entries: e,
            form: MotorForm::Sphere,
        }
    }

    /// ```text
    /// [ R        -t       0 ]
    /// [ 0         1       0 ]
    /// [ -t^T R   |t|^2/2  1 ]
    /// ```
    pub fn point_form(m: &RigidMotion) -> Self {
        let r = &m.rotation;
        let t = &m.translation;
        let mut e = [[0.0; 5]; 5];
        for i in 0..3 {
            e[i][..3].copy_from_slice(&r[i]);
            e[i][3] = -t[i];
        }
        e[3][3] = 1.0;
        for j in 0..3 {
            e[4][j] = -(0..3).map(|k| t[k] * r[k][j]).sum::<f64>();
        }
        e[4][3] = 0.5 * (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
        e[4][4] = 1.0;
        Self {
            entries: e,
            form: MotorForm::Point,
        }
    }

    pub fn entries(&self) -> &[[f64; 5]; 5] {
        &self.entries
    }

    pub fn form(&self) -> MotorForm {
        self.form
    }

    pub fn transpose(&self) -> [[f64; 5]; 5] {
        let mut out = [[0.0; 5]; 5];
        for (i, row) in self.entries.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[j][i] = *v;
            }
        }
        out
    }

    /// Plain matrix product `self * other`; keeps the form of `self`.
    pub fn mul(&self, other: &MotorMatrix) -> MotorMatrix {
        MotorMatrix {
            entries: mat5_mul(&self.entries, &other.entries),
            form: self.form,
        }
    }

    pub fn apply(&self, v: &[f64]) -> [f64; 5] {
        debug_assert_eq!(v.len(), 5);
        let mut out = [0.0; 5];
        for (o, row) in out.iter_mut().zip(&self.entries) {
            *o = dot(row, v);
        }
        out
    }
}

pub fn motor_matrix_sphere(m: &RigidMotion) -> MotorMatrix {
    MotorMatrix::sphere_form(m)
}

pub fn motor_matrix_point(m: &RigidMotion) -> MotorMatrix {
    MotorMatrix::point_form(m)
}

pub fn mat5_mul(a: &[[f64; 5]; 5], b: &[[f64; 5]; 5]) -> [[f64; 5]; 5] {
    let mut out = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            out[i][j] = (0..5).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}
