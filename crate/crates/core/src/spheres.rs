//! Decision spheres of the geometric layer, point-normalized for inspection.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::checkpoint::to_json_exact;
use crate::conformal::Hypersphere;
use crate::error::{Error, Result};
use crate::models::{Model, ModelKind};
use crate::neural::EMBEDDED_POINT_DIM;

/// `I`: positive output inside the sphere (scale factor > 0).
/// `O`: positive output outside (scale factor < 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    I,
    O,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::I => "I",
            Orientation::O => "O",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereEntry {
    pub unit: usize,
    pub point: usize,
    /// Learned 5-vector before normalization.
    pub raw: [f64; 5],
    pub gamma: f64,
    /// `None` when the block is degenerate (zero scale factor).
    pub center: Option<[f64; 3]>,
    pub radius_sq: Option<f64>,
    /// Only set for real radii (`radius_sq >= 0`).
    pub radius: Option<f64>,
    pub orientation: Option<Orientation>,
    pub imaginary: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereReport {
    pub model: ModelKind,
    pub units: usize,
    pub points_per_unit: usize,
    pub spheres: Vec<SphereEntry>,
}

impl SphereReport {
    pub fn to_json(&self) -> Result<String> {
        to_json_exact(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format("sphere report", e))
    }
}

fn entry(unit: usize, point: usize, block: &[f64]) -> Result<SphereEntry> {
    let raw: [f64; 5] = block.try_into().expect("5-blocks");
    let sphere = Hypersphere::from_raw(raw.to_vec())?;
    let gamma = sphere.gamma();
    let mut e = SphereEntry {
        unit,
        point,
        raw,
        gamma,
        center: None,
        radius_sq: None,
        radius: None,
        orientation: None,
        imaginary: false,
        degenerate: false,
    };
    match sphere.point_normalize() {
        Ok((normalized, _)) => {
            let (c, r2) = normalized.center_radius_sq()?;
            let c = c.coords();
            e.center = Some([c[0], c[1], c[2]]);
            e.radius_sq = Some(r2);
            e.radius = (r2 >= 0.0).then(|| r2.sqrt());
            e.imaginary = r2 < 0.0;
            e.orientation = Some(if gamma > 0.0 {
                Orientation::I
            } else {
                Orientation::O
            });
        }
        Err(Error::DegenerateSphere) => e.degenerate = true,
        Err(other) => return Err(other),
    }
    Ok(e)
}

/// One entry per (unit, input point) of the first layer of an MLGP model.
pub fn export_spheres(model: &Model) -> Result<SphereReport> {
    if model.kind() != ModelKind::Mlgp {
        return Err(Error::InvalidOperation(format!(
            "sphere export needs an mlgp model, got {}",
            model.kind()
        )));
    }
    let layer = &model.network().layers[0];
    let points_per_unit = layer.spec.in_dim / EMBEDDED_POINT_DIM;
    let mut spheres = Vec::with_capacity(layer.spec.out_dim * points_per_unit);
    for unit in 0..layer.spec.out_dim {
        for (point, block) in layer
            .weight_row(unit)
            .chunks_exact(EMBEDDED_POINT_DIM)
            .enumerate()
        {
            spheres.push(entry(unit, point, block)?);
        }
    }
    Ok(SphereReport {
        model: model.kind(),
        units: layer.spec.out_dim,
        points_per_unit,
        spheres,
    })
}
