//! JSON checkpoints. Floats are written with 17 significant digits so that
//! weights survive a save/load cycle bit for bit.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec};
use crate::neural::{Layer, LayerSpec, Network};

const FORMAT_TAG: &str = "mlgp-checkpoint";
const FORMAT_VERSION: u32 = 1;

/// Compact JSON with every `f64` in `{:.16e}` notation.
#[derive(Debug, Default, Clone, Copy)]
pub struct ExactFloatFormatter;

impl Formatter for ExactFloatFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_json_exact<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloatFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::format("json", e))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerRecord {
    #[serde(flatten)]
    spec: LayerSpec,
    /// `out_dim` rows of `in_dim` values.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    model: ModelSpec,
    optimizer_step: u64,
    layers: Vec<LayerRecord>,
}

/// A trained model plus the number of optimizer steps taken to reach it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer_step: u64,
}

impl Checkpoint {
    pub fn new(model: Model, optimizer_step: u64) -> Self {
        Self {
            model,
            optimizer_step,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let layers = self
            .model
            .network()
            .layers
            .iter()
            .map(|l| LayerRecord {
                spec: l.spec,
                weights: l
                    .weights
                    .chunks(l.spec.in_dim)
                    .map(<[f64]>::to_vec)
                    .collect(),
                bias: l.bias.clone(),
            })
            .collect();
        to_json_exact(&CheckpointFile {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            model: *self.model.spec(),
            optimizer_step: self.optimizer_step,
            layers,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| Error::format("checkpoint", e))?;
        if file.format != FORMAT_TAG || file.version != FORMAT_VERSION {
            return Err(Error::format(
                "checkpoint",
                format!("unsupported format {} v{}", file.format, file.version),
            ));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for rec in file.layers {
            if rec.weights.len() != rec.spec.out_dim
                || rec.weights.iter().any(|row| row.len() != rec.spec.in_dim)
            {
                return Err(Error::format(
                    "checkpoint",
                    format!(
                        "weight matrix is not {}x{}",
                        rec.spec.out_dim, rec.spec.in_dim
                    ),
                ));
            }
            layers.push(Layer {
                spec: rec.spec,
                weights: rec.weights.concat(),
                bias: rec.bias,
            });
        }
        let network = Network::new(layers)?;
        Ok(Self {
            model: Model::from_parts(file.model, network)?,
            optimizer_step: file.optimizer_step,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
