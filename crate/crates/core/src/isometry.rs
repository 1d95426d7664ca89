//! Checks that moving the geometric-layer spheres of a trained model by a
//! rigid motion is equivalent to moving its inputs by the same motion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, ModelKind};
use crate::neural::{argmax, ForwardTrace};
use crate::protocol::{mean_std, MeanStd};
use crate::tetris::{sample_motion, AngleSet, LabeledShapeSet, TRANSLATION_RANGE};

/// Largest per-sample logit deviation tolerated between the original model
/// on original data and the transformed model on transformed data.
pub const LOGIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub trials: usize,
    pub original_on_original: MeanStd,
    pub original_on_transformed: MeanStd,
    pub transformed_on_original: MeanStd,
    pub transformed_on_transformed: MeanStd,
    pub max_logit_deviation: f64,
    /// Whether every trial gave exactly the original accuracy for the
    /// transformed model on transformed data.
    pub accuracy_identical: bool,
}

impl IsometryReport {
    pub fn passed(&self) -> bool {
        self.accuracy_identical && self.max_logit_deviation <= LOGIT_TOLERANCE
    }
}

/// Logits and accuracy of `model` on `set`.
fn evaluate(
    model: &Model,
    set: &LabeledShapeSet,
    trace: &mut ForwardTrace,
    logits: &mut Vec<f64>,
) -> f64 {
    logits.clear();
    let mut correct = 0;
    for s in &set.samples {
        let z = model.logits_into(&s.points, trace);
        if argmax(z) == s.label as usize {
            correct += 1;
        }
        logits.extend_from_slice(z);
    }
    correct as f64 / set.len() as f64
}

/// For each trial, draws a motion as in data generation (any angle in
/// `[0, 2π)`, translation in `(-3, 3)`), transforms the model and the test
/// set, and evaluates the four model/data combinations.
pub fn isometry_test(
    model: &Model,
    test: &LabeledShapeSet,
    trials: usize,
    seed: u64,
) -> Result<IsometryReport> {
    if model.kind() != ModelKind::Mlgp {
        return Err(Error::InvalidOperation(format!(
            "isometry test needs an mlgp model, got {}",
            model.kind()
        )));
    }
    if trials == 0 || test.is_empty() {
        return Err(Error::InvalidConfig(
            "isometry test needs trials and test samples".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles = AngleSet::full_turn();
    let mut trace = ForwardTrace::for_network(model.network());
    let mut base_logits = Vec::new();
    let mut logits = Vec::new();
    let base_acc = evaluate(model, test, &mut trace, &mut base_logits);

    let mut oo = Vec::with_capacity(trials);
    let mut ot = Vec::with_capacity(trials);
    let mut to = Vec::with_capacity(trials);
    let mut tt = Vec::with_capacity(trials);
    let mut max_dev: f64 = 0.0;
    let mut identical = true;
    for _ in 0..trials {
        let motion = sample_motion(&mut rng, &angles, TRANSLATION_RANGE)?;
        let moved_model = model.transform_mlgp_weights(&motion)?;
        let moved_data = test.transformed(&motion);

        let acc_tt = evaluate(&moved_model, &moved_data, &mut trace, &mut logits);
        for (a, b) in logits.iter().zip(&base_logits) {
            max_dev = max_dev.max((a - b).abs());
        }
        identical &= acc_tt == base_acc;

        oo.push(base_acc);
        tt.push(acc_tt);
        ot.push(evaluate(model, &moved_data, &mut trace, &mut logits));
        to.push(evaluate(&moved_model, test, &mut trace, &mut logits));
    }
    Ok(IsometryReport {
        trials,
        original_on_original: mean_std(&oo),
        original_on_transformed: mean_std(&ot),
        transformed_on_original: mean_std(&to),
        transformed_on_transformed: mean_std(&tt),
        max_logit_deviation: max_dev,
        accuracy_identical: identical,
    })
}
