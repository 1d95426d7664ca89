use std::sync::atomic::{AtomicUsize, Ordering};

use mlgp::protocol::{
    mean_std, read_records, read_results_table, run_protocol_with, train, write_records,
    write_results_table,
};
use mlgp::{DatasetFamily, ModelKind, ProtocolConfig};

fn tiny(family: DatasetFamily) -> ProtocolConfig {
    ProtocolConfig {
        runs: 3,
        epochs: 30,
        train_size: 64,
        val_size: 64,
        test_size: 128,
        top_k: 2,
        family,
        noise: 0.1,
        master_seed: 11,
        threads: Some(2),
        ..ProtocolConfig::desk_scale()
    }
}

#[test]
fn training_is_deterministic_per_run() {
    let config = tiny(DatasetFamily::Main);
    let test = config.test_set().unwrap();
    let (m1, o1, r1) = train(&config, ModelKind::Mlgp.into(), 1, &test).unwrap();
    let (m2, o2, r2) = train(&config, ModelKind::Mlgp.into(), 1, &test).unwrap();
    assert!(r1.same_outcome(&r2));
    assert_eq!(m1, m2);
    assert_eq!((o1.step_count(), o2.step_count()), (30, 30));
    let (_, _, r3) = train(&config, ModelKind::Mlgp.into(), 2, &test).unwrap();
    assert_ne!(r1.seed, r3.seed);
    assert!(!r1.same_outcome(&r3));
}

#[test]
fn training_lowers_the_loss() {
    let mut config = tiny(DatasetFamily::Main);
    let test = config.test_set().unwrap();
    config.epochs = 0;
    let (_, _, before) = train(&config, ModelKind::Mlgp.into(), 0, &test).unwrap();
    config.epochs = 300;
    let (_, _, after) = train(&config, ModelKind::Mlgp.into(), 0, &test).unwrap();
    assert!(after.final_train_loss < before.final_train_loss);
}

#[test]
fn protocol_summary_matches_its_records() {
    let config = tiny(DatasetFamily::ThetaSplit);
    let seen = AtomicUsize::new(0);
    let report = run_protocol_with(&config, |_| {
        seen.fetch_add(1, Ordering::Relaxed);
    })
    .unwrap();
    assert_eq!(seen.into_inner(), 9);
    assert_eq!(report.records.len(), 9);

    for kind in ModelKind::ALL {
        let mut recs: Vec<_> = report.records.iter().filter(|r| r.model == kind).collect();
        let all: Vec<f64> = recs.iter().map(|r| r.test_accuracy).collect();
        let expected = mean_std(&all);
        let row = report.all(kind).unwrap();
        assert_eq!((row.mean, row.std), (expected.mean, expected.std));
        assert_eq!(row.dataset, DatasetFamily::ThetaSplit);

        recs.sort_by(|a, b| {
            b.val_accuracy
                .total_cmp(&a.val_accuracy)
                .then(a.run_id.cmp(&b.run_id))
        });
        let top: Vec<f64> = recs[..2].iter().map(|r| r.test_accuracy).collect();
        let row = report.top(kind).unwrap();
        assert_eq!(row.stat, "top2");
        assert_eq!(row.mean, mean_std(&top).mean);
    }

    let mut buf = Vec::new();
    write_records(&report.records, &mut buf).unwrap();
    let back = read_records(buf.as_slice()).unwrap();
    assert!(back
        .iter()
        .zip(&report.records)
        .all(|(a, b)| a.same_outcome(b)));

    let mut buf = Vec::new();
    write_results_table(&report.summary, &mut buf).unwrap();
    assert_eq!(read_results_table(buf.as_slice()).unwrap(), report.summary);
}

#[test]
fn protocol_is_independent_of_thread_count() {
    let mut config = tiny(DatasetFamily::Main);
    config.models = vec![ModelKind::BaselineMlhp.into()];
    let a = run_protocol_with(&config, |_| {}).unwrap();
    config.threads = Some(1);
    let b = run_protocol_with(&config, |_| {}).unwrap();
    assert!(a
        .records
        .iter()
        .zip(&b.records)
        .all(|(x, y)| x.same_outcome(y)));
    assert_eq!(a.summary, b.summary);
}
