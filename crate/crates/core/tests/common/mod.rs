#![allow(dead_code)]

use std::f64::consts::TAU;

use mlgp::conformal::Vec3;
use mlgp::{random_rotation, RigidMotion};
use rand::Rng;

pub fn uniform3<R: Rng>(rng: &mut R, half_width: f64) -> Vec3 {
    [
        rng.random_range(-half_width..half_width),
        rng.random_range(-half_width..half_width),
        rng.random_range(-half_width..half_width),
    ]
}

/// Rotation about a uniformly random axis by an angle in `[0, 2π)`, then a
/// translation in `(-t_range, t_range)^3`.
pub fn random_motion<R: Rng>(rng: &mut R, t_range: f64) -> RigidMotion {
    let r = random_rotation(rng, |rng| rng.random_range(0.0..TAU));
    let t = if t_range > 0.0 {
        uniform3(rng, t_range)
    } else {
        [0.0; 3]
    };
    RigidMotion::new(r, t).unwrap()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn max_abs_diff(a: &[[f64; 5]; 5], b: &[[f64; 5]; 5]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub const IDENTITY5: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0],
];

/// Embedding written out independently of the library.
pub fn embed3(x: &Vec3) -> [f64; 5] {
    [
        x[0],
        x[1],
        x[2],
        -1.0,
        -0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]),
    ]
}

/// Sphere vector written out independently of the library.
pub fn sphere3(c: &Vec3, r: f64) -> [f64; 5] {
    [
        c[0],
        c[1],
        c[2],
        0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2] - r * r),
        1.0,
    ]
}

pub fn dot5(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
