use std::f64::consts::TAU;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mlgp::neural::{ForwardTrace, Gradients};
use mlgp::protocol::{batch_of, fit};
use mlgp::{
    make_dataset, motor_matrix_sphere, random_rotation, AdamConfig, DatasetKind, Model, ModelKind,
    RigidMotion,
};

fn random_motion(rng: &mut ChaCha8Rng) -> RigidMotion {
    let r = random_rotation(rng, |rng| rng.random_range(0.0..TAU));
    let t = [
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
    ];
    RigidMotion::new(r, t).unwrap()
}

fn epoch(c: &mut Criterion) {
    let train = make_dataset(DatasetKind::Main, 1000, 0.0, 1).unwrap();
    let (inputs, labels) = batch_of(&train);
    let mut group = c.benchmark_group("loss_and_gradients_1000");
    for kind in ModelKind::ALL {
        let model = Model::build(kind.into(), 2).unwrap();
        let network = model.network();
        let mut grads = Gradients::zeros(network);
        let mut trace = ForwardTrace::for_network(network);
        group.bench_function(kind.name(), |b| {
            b.iter(|| {
                network
                    .mean_loss_and_gradients(black_box(&inputs), &labels, &mut grads, &mut trace)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn short_fit(c: &mut Criterion) {
    let train = make_dataset(DatasetKind::Main, 1000, 0.0, 1).unwrap();
    let base = Model::build(ModelKind::Mlgp.into(), 3).unwrap();
    c.bench_function("fit_mlgp_10_epochs", |b| {
        b.iter_batched(
            || base.clone(),
            |mut model| fit(&mut model, &train, 10, AdamConfig::default()).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn accuracy(c: &mut Criterion) {
    let test = make_dataset(DatasetKind::Main, 10_000, 0.0, 4).unwrap();
    let model = Model::build(ModelKind::Mlgp.into(), 5).unwrap();
    c.bench_function("accuracy_mlgp_10000", |b| {
        b.iter(|| model.accuracy(black_box(&test)))
    });
}

fn motors(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let motion = random_motion(&mut rng);
    let model = Model::build(ModelKind::Mlgp.into(), 7).unwrap();
    let block = [0.3, -1.2, 0.8, 0.1, 1.0];
    c.bench_function("motor_matrix_sphere", |b| {
        b.iter(|| motor_matrix_sphere(black_box(&motion)))
    });
    let motor = motor_matrix_sphere(&motion);
    c.bench_function("motor_apply", |b| b.iter(|| motor.apply(black_box(&block))));
    c.bench_function("transform_mlgp_weights", |b| {
        b.iter(|| model.transform_mlgp_weights(black_box(&motion)).unwrap())
    });
}

criterion_group!(benches, epoch, short_fit, accuracy, motors);
criterion_main!(benches);
