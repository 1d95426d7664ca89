//! Multi-run training protocol: fresh train/validation data per run, one
//! test set per experiment, full-batch Adam, and mean/std summaries over all
//! runs and over the best runs by validation accuracy.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, ModelKind, ModelSpec};
use crate::neural::{Adam, AdamConfig, ForwardTrace, Gradients};
use crate::tetris::{make_dataset, DatasetKind, LabeledShapeSet};

/// Stream ids for seeds derived from a run seed.
const TRAIN_STREAM: u64 = 0;
const VAL_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
/// Stream id for the per-experiment test seed (run ids never reach it).
const TEST_STREAM: u64 = u64::MAX;

/// Counter-based seed split: word 0 of the ChaCha stream `stream` keyed by
/// `parent`. Distinct streams never overlap.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(parent);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Which angle split the data uses: the main dataset draws every angle from
/// `[0, 2π)`; the theta split trains and evaluates on disjoint angle sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFamily {
    Main,
    ThetaSplit,
}

impl DatasetFamily {
    pub fn train_kind(self) -> DatasetKind {
        match self {
            DatasetFamily::Main => DatasetKind::Main,
            DatasetFamily::ThetaSplit => DatasetKind::ThetaSplitTrain,
        }
    }

    pub fn eval_kind(self) -> DatasetKind {
        match self {
            DatasetFamily::Main => DatasetKind::Main,
            DatasetFamily::ThetaSplit => DatasetKind::ThetaSplitEval,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetFamily::Main => "main",
            DatasetFamily::ThetaSplit => "theta-split",
        }
    }
}

impl fmt::Display for DatasetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(DatasetFamily::Main),
            "theta-split" | "theta" => Ok(DatasetFamily::ThetaSplit),
            other => Err(Error::InvalidConfig(format!(
                "unknown dataset family '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub models: Vec<ModelSpec>,
    pub family: DatasetFamily,
    pub noise: f64,
    pub runs: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub master_seed: u64,
    pub top_k: usize,
    /// Worker threads for parallel runs; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl ProtocolConfig {
    /// Full-size protocol: 50 runs, 1000/9000/90000 samples, top 10.
    pub fn full_scale() -> Self {
        Self {
            models: ModelKind::ALL.iter().map(|&k| k.into()).collect(),
            family: DatasetFamily::Main,
            noise: 0.0,
            runs: 50,
            epochs: 20_000,
            adam: AdamConfig::default(),
            train_size: 1000,
            val_size: 9000,
            test_size: 90_000,
            master_seed: 0,
            top_k: 10,
            threads: None,
        }
    }

    /// Same protocol at workstation scale: 5 runs, a 10000-sample test set
    /// and the best run, keeping the one-in-five selection ratio.
    pub fn desk_scale() -> Self {
        Self {
            runs: 5,
            test_size: 10_000,
            top_k: 1,
            ..Self::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("no models selected".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidConfig(
                "noise must be a nonnegative number".into(),
            ));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.adam;
        if !(lr > 0.0 && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "invalid Adam settings {:?}",
                self.adam
            )));
        }
        for (what, n) in [
            ("train", self.train_size),
            ("val", self.val_size),
            ("test", self.test_size),
        ] {
            if n < crate::tetris::NUM_CLASSES {
                return Err(Error::InvalidConfig(format!("{what} size {n} is below 8")));
            }
        }
        Ok(())
    }

    /// Seed of run `run_id` (shared by every model kind).
    pub fn run_seed(&self, run_id: usize) -> u64 {
        derive_seed(self.master_seed, run_id as u64)
    }

    pub fn test_seed(&self) -> u64 {
        derive_seed(self.master_seed, TEST_STREAM)
    }

    /// The experiment's test set, generated once from the master seed.
    pub fn test_set(&self) -> Result<LabeledShapeSet> {
        make_dataset(
            self.family.eval_kind(),
            self.test_size,
            self.noise,
            self.test_seed(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub model: ModelKind,
    pub seed: u64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub final_train_loss: f64,
    pub wall_time_secs: f64,
}

impl RunRecord {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &RunRecord) -> bool {
        self.run_id == other.run_id
            && self.model == other.model
            && self.seed == other.seed
            && self.val_accuracy.to_bits() == other.val_accuracy.to_bits()
            && self.test_accuracy.to_bits() == other.test_accuracy.to_bits()
            && self.final_train_loss.to_bits() == other.final_train_loss.to_bits()
    }
}

/// Flattens a set into a row-major input matrix and a label vector.
pub fn batch_of(set: &LabeledShapeSet) -> (Vec<f64>, Vec<usize>) {
    let inputs = set.samples.iter().flat_map(|s| s.flat()).collect();
    let labels = set.samples.iter().map(|s| s.label as usize).collect();
    (inputs, labels)
}

/// Full-batch Adam on the mean cross-entropy for `epochs` steps. Returns the
/// optimizer (for its step count) and the loss at the last step.
pub fn fit(
    model: &mut Model,
    train: &LabeledShapeSet,
    epochs: usize,
    adam: AdamConfig,
) -> Result<(Adam, f64)> {
    let (inputs, labels) = batch_of(train);
    let network = model.network_mut();
    let mut optimizer = Adam::new(adam, network);
    let mut grads = Gradients::zeros(network);
    let mut trace = ForwardTrace::for_network(network);
    let mut loss = network.mean_loss(&inputs, &labels)?;
    for _ in 0..epochs {
        loss = network.mean_loss_and_gradients(&inputs, &labels, &mut grads, &mut trace)?;
        optimizer.step(network, &grads);
    }
    Ok((optimizer, loss))
}

/// One protocol run: seed-derived training and validation sets, a freshly
/// initialized model, full-batch training, and final-epoch accuracies.
pub fn train(
    config: &ProtocolConfig,
    spec: ModelSpec,
    run_id: usize,
    test: &LabeledShapeSet,
) -> Result<(Model, Adam, RunRecord)> {
    let start = Instant::now();
    let seed = config.run_seed(run_id);
    let train_set = make_dataset(
        config.family.train_kind(),
        config.train_size,
        config.noise,
        derive_seed(seed, TRAIN_STREAM),
    )?;
    let val_set = make_dataset(
        config.family.eval_kind(),
        config.val_size,
        config.noise,
        derive_seed(seed, VAL_STREAM),
    )?;
    let mut model = Model::build(spec, derive_seed(seed, INIT_STREAM))?;
    let (optimizer, final_train_loss) = fit(&mut model, &train_set, config.epochs, config.adam)?;
    let record = RunRecord {
        run_id,
        model: spec.kind,
        seed,
        val_accuracy: model.accuracy(&val_set),
        test_accuracy: model.accuracy(test),
        final_train_loss,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((model, optimizer, record))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation. Values are shifted by the first
/// one before summing, so a constant sequence gives exactly that value and a
/// zero deviation.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let Some(&shift) = values.first() else {
        return MeanStd {
            mean: f64::NAN,
            std: f64::NAN,
        };
    };
    let n = values.len() as f64;
    let offset = values.iter().map(|v| v - shift).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|v| (v - shift - offset) * (v - shift - offset))
        .sum::<f64>()
        / n;
    MeanStd {
        mean: shift + offset,
        std: var.sqrt(),
    }
}

/// Records of the `k` runs with the highest validation accuracy (ties by run
/// id).
pub fn top_k_by_validation(records: &[RunRecord], k: usize) -> Vec<&RunRecord> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        b.val_accuracy
            .total_cmp(&a.val_accuracy)
            .then(a.run_id.cmp(&b.run_id))
    });
    sorted.truncate(k);
    sorted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub dataset: DatasetFamily,
    pub noise: f64,
    /// `all` or `top<K>`.
    pub stat: String,
    pub mean: f64,
    pub std: f64,
}

/// Test-accuracy statistics per model: over every run and over the top `k`.
pub fn summarize(
    records: &[RunRecord],
    family: DatasetFamily,
    noise: f64,
    top_k: usize,
) -> Vec<SummaryRow> {
    let mut kinds: Vec<ModelKind> = records.iter().map(|r| r.model).collect();
    kinds.sort();
    kinds.dedup();
    let mut rows = Vec::new();
    for kind in kinds {
        let of_kind: Vec<RunRecord> = records
            .iter()
            .filter(|r| r.model == kind)
            .cloned()
            .collect();
        let all: Vec<f64> = of_kind.iter().map(|r| r.test_accuracy).collect();
        let top: Vec<f64> = top_k_by_validation(&of_kind, top_k)
            .iter()
            .map(|r| r.test_accuracy)
            .collect();
        for (stat, values) in [("all".to_string(), all), (format!("top{top_k}"), top)] {
            let MeanStd { mean, std } = mean_std(&values);
            rows.push(SummaryRow {
                model: kind,
                dataset: family,
                noise,
                stat,
                mean,
                std,
            });
        }
    }
    rows
}

#[derive(Debug, Clone)]
pub struct ProtocolReport {
    pub config: ProtocolConfig,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ProtocolReport {
    pub fn row(&self, model: ModelKind, stat: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.model == model && r.stat == stat)
    }

    pub fn all(&self, model: ModelKind) -> Option<&SummaryRow> {
        self.row(model, "all")
    }

    pub fn top(&self, model: ModelKind) -> Option<&SummaryRow> {
        self.row(model, &format!("top{}", self.config.top_k))
    }
}

/// Runs every (model, run) pair, optionally in parallel, and summarizes.
/// `on_record` is called as runs finish.
pub fn run_protocol_with<F>(config: &ProtocolConfig, on_record: F) -> Result<ProtocolReport>
where
    F: Fn(&RunRecord) + Sync,
{
    config.validate()?;
    let test = config.test_set()?;
    let jobs: Vec<(ModelSpec, usize)> = config
        .models
        .iter()
        .flat_map(|&spec| (0..config.runs).map(move |r| (spec, r)))
        .collect();
    let run_all = || -> Result<Vec<RunRecord>> {
        jobs.par_iter()
            .map(|&(spec, run_id)| {
                let (_, _, record) = train(config, spec, run_id, &test)?;
                on_record(&record);
                Ok(record)
            })
            .collect()
    };
    let records = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(run_all)?,
        None => run_all()?,
    };
    let summary = summarize(&records, config.family, config.noise, config.top_k);
    Ok(ProtocolReport {
        config: config.clone(),
        records,
        summary,
    })
}

pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolReport> {
    run_protocol_with(config, |_| {})
}

const RESULTS_HEADER: [&str; 6] = ["model", "dataset", "noise", "stat", "mean", "std"];

/// Results table: `model,dataset,noise,stat,mean,std`.
pub fn write_results_table<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::format("results table", e);
    w.write_record(RESULTS_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.model.name().to_string(),
            r.dataset.name().to_string(),
            r.noise.to_string(),
            r.stat.clone(),
            format!("{:.16e}", r.mean),
            format!("{:.16e}", r.std),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::format("results table", e))?;
    Ok(())
}

pub fn read_results_table<R: Read>(reader: R) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let err = |e: String| Error::format("results table", e);
    let headers = r.headers().map_err(|e| err(e.to_string()))?;
    if headers.iter().ne(RESULTS_HEADER) {
        return Err(err(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| err(e.to_string()));
        rows.push(SummaryRow {
            model: rec[0].parse()?,
            dataset: rec[1].parse()?,
            noise: num(2)?,
            stat: rec[3].to_string(),
            mean: num(4)?,
            std: num(5)?,
        });
    }
    Ok(rows)
}

/// Per-run records, one CSV row each; floats use 17 significant digits.
pub fn write_records<W: Write>(records: &[RunRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::format("run records", e);
    w.write_record([
        "run_id",
        "model",
        "seed",
        "val_accuracy",
        "test_accuracy",
        "final_train_loss",
        "wall_time_secs",
    ])
    .map_err(err)?;
    for r in records {
        w.write_record([
            r.run_id.to_string(),
            r.model.name().to_string(),
            r.seed.to_string(),
            format!("{:.16e}", r.val_accuracy),
            format!("{:.16e}", r.test_accuracy),
            format!("{:.16e}", r.final_train_loss),
            format!("{:.3}", r.wall_time_secs),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::format("run records", e))?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let err = |e: String| Error::format("run records", e);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() != 7 {
            return Err(err(format!("expected 7 columns, got {}", rec.len())));
        }
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| err(e.to_string()));
        out.push(RunRecord {
            run_id: rec[0]
                .parse()
                .map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
            model: rec[1].parse()?,
            seed: rec[2]
                .parse()
                .map_err(|e: std::num::ParseIntError| err(e.to_string()))?,
            val_accuracy: num(3)?,
            test_accuracy: num(4)?,
            final_train_loss: num(5)?,
            wall_time_secs: num(6)?,
        });
    }
    Ok(out)
}

pub fn save_csv<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write(std::io::BufWriter::new(file))
}
