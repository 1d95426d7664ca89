//! The three compared architectures: a vanilla MLP, the baseline hypersphere
//! perceptron (MLHP) and the geometric perceptron (MLGP).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::{motor_matrix_sphere, RigidMotion};
use crate::error::{Error, Result};
use crate::neural::{
    argmax, softmax_into, Activation, ForwardTrace, LayerKind, LayerSpec, Network,
    EMBEDDED_POINT_DIM,
};
use crate::tetris::{LabeledShapeSet, ShapePoints, INPUT_DIM, NUM_CLASSES, POINTS_PER_SHAPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "mlp")]
    VanillaMlp,
    #[serde(rename = "mlhp")]
    BaselineMlhp,
    #[serde(rename = "mlgp")]
    Mlgp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::VanillaMlp,
        ModelKind::BaselineMlhp,
        ModelKind::Mlgp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::VanillaMlp => "mlp",
            ModelKind::BaselineMlhp => "mlhp",
            ModelKind::Mlgp => "mlgp",
        }
    }

    pub fn default_hidden_units(self) -> usize {
        match self {
            ModelKind::VanillaMlp => 6,
            ModelKind::BaselineMlhp => 5,
            ModelKind::Mlgp => 4,
        }
    }

    pub fn default_hidden_activation(self) -> Activation {
        match self {
            ModelKind::VanillaMlp => Activation::Relu,
            ModelKind::BaselineMlhp | ModelKind::Mlgp => Activation::Identity,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::VanillaMlp),
            "mlhp" => Ok(ModelKind::BaselineMlhp),
            "mlgp" => Ok(ModelKind::Mlgp),
            other => Err(Error::InvalidConfig(format!(
                "unknown model kind '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hidden_units: usize,
    pub hidden_activation: Activation,
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> Self {
        Self {
            kind,
            hidden_units: kind.default_hidden_units(),
            hidden_activation: kind.default_hidden_activation(),
        }
    }

    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>> {
        let h = self.hidden_units;
        if h == 0 {
            return Err(Error::InvalidConfig("hidden_units must be positive".into()));
        }
        let act = self.hidden_activation;
        let out = Activation::Identity;
        Ok(match self.kind {
            ModelKind::VanillaMlp => vec![
                LayerSpec::new(LayerKind::Dense, INPUT_DIM, h, act)?,
                LayerSpec::new(LayerKind::Dense, h, NUM_CLASSES, out)?,
            ],
            ModelKind::BaselineMlhp => vec![
                LayerSpec::new(LayerKind::HypersphereLinear, INPUT_DIM + 2, h, act)?,
                LayerSpec::new(LayerKind::HypersphereLinear, h + 2, NUM_CLASSES, out)?,
            ],
            ModelKind::Mlgp => vec![
                LayerSpec::new(
                    LayerKind::GeometricLinear,
                    POINTS_PER_SHAPE * EMBEDDED_POINT_DIM,
                    h,
                    act,
                )?,
                LayerSpec::new(LayerKind::HypersphereLinear, h + 2, NUM_CLASSES, out)?,
            ],
        })
    }
}

impl From<ModelKind> for ModelSpec {
    fn from(kind: ModelKind) -> Self {
        ModelSpec::default_for(kind)
    }
}

/// A network together with the architecture it was built from. The final
/// layer outputs logits; softmax is applied by the loss and by [`Model::predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    network: Network,
}

impl Model {
    /// Builds the architecture with uniform `±1/sqrt(fan_in)` initialization.
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Self> {
        Self::build_with_rng(spec, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn build_with_rng<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self> {
        let network = Network::from_specs_uniform(&spec.layer_specs()?, rng)?;
        Ok(Self { spec, network })
    }

    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        let network = Network::from_specs_zeros(&spec.layer_specs()?)?;
        Ok(Self { spec, network })
    }

    /// Wraps an existing network after checking it has the layout `spec`
    /// prescribes.
    pub fn from_parts(spec: ModelSpec, network: Network) -> Result<Self> {
        if network.specs() != spec.layer_specs()? {
            return Err(Error::InvalidConfig(format!(
                "network layout does not match a {} model with {} hidden units",
                spec.kind, spec.hidden_units
            )));
        }
        Ok(Self { spec, network })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn param_count(&self) -> usize {
        self.network.param_count()
    }

    pub fn logits(&self, points: &ShapePoints) -> Vec<f64> {
        let mut trace = ForwardTrace::for_network(&self.network);
        self.logits_into(points, &mut trace).to_vec()
    }

    pub(crate) fn logits_into<'a>(
        &self,
        points: &ShapePoints,
        trace: &'a mut ForwardTrace,
    ) -> &'a [f64] {
        let flat = points.as_flattened();
        self.network
            .forward_into(flat, trace)
            .expect("model input width is fixed by construction");
        trace.logits()
    }

    /// Predicted label and class probabilities. Ties go to the lowest label.
    pub fn predict(&self, points: &ShapePoints) -> (usize, Vec<f64>) {
        let logits = self.logits(points);
        let mut probs = vec![0.0; logits.len()];
        softmax_into(&logits, &mut probs);
        (argmax(&logits), probs)
    }

    /// Fraction of samples whose predicted label matches.
    pub fn accuracy(&self, set: &LabeledShapeSet) -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        let mut trace = ForwardTrace::for_network(&self.network);
        let correct = set
            .samples
            .iter()
            .filter(|s| argmax(self.logits_into(&s.points, &mut trace)) == s.label as usize)
            .count();
        correct as f64 / set.len() as f64
    }

    /// Moves every sphere of the first (geometric) layer by `motion`: each
    /// unit's weight vector is split into consecutive 5-blocks, one per input
    /// point, and each block is multiplied by the sphere-form motor matrix.
    /// Evaluating the result on moved inputs reproduces the original outputs.
    pub fn transform_mlgp_weights(&self, motion: &RigidMotion) -> Result<Model> {
        if self.spec.kind != ModelKind::Mlgp {
            return Err(Error::InvalidOperation(format!(
                "rigid weight transforms apply to mlgp models only, not {}",
                self.spec.kind
            )));
        }
        let motor = motor_matrix_sphere(motion);
        let mut out = self.clone();
        let first = &mut out.network.layers[0];
        debug_assert_eq!(first.spec.kind, LayerKind::GeometricLinear);
        for block in first.weights.chunks_exact_mut(EMBEDDED_POINT_DIM) {
            let moved = motor.apply(block);
            block.copy_from_slice(&moved);
        }
        Ok(out)
    }
}
