use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use sensedeploy_bench::{
    read_records, run_design, summarize, write_records, Estimate, ExperimentDesign, HarnessConfig,
};

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn two_replications_give_two_records() {
    let tmp = tempfile::tempdir().unwrap();
    let design = ExperimentDesign::new(vec![1], vec![1000], 2, 11);
    let mut seen = 0;
    let run = run_design(&design, &HarnessConfig::local(tmp.path()), |_, outcome| {
        assert!(outcome.is_ok(), "{outcome:?}");
        seen += 1;
    })
    .await
    .unwrap();
    assert_eq!(seen, 2);
    assert_eq!(run.records.len(), 2);
    assert!(run.failures.is_empty());
    for r in &run.records {
        assert_eq!(
            r.setup_ms,
            r.unmarshal_ms + r.select_ms + r.marshal_ms + r.deploy_ms
        );
        assert!(r.bytes_per_device > 0.0);
    }
    let mut csv = Vec::new();
    write_records(&mut csv, &run.records).unwrap();
    let back = read_records(csv.as_slice()).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[1].setup_ms, run.records[1].setup_ms);
    let cells = summarize(&run.records).unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].n, 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn same_cell_gives_same_archives() {
    let tmp = tempfile::tempdir().unwrap();
    let design = ExperimentDesign::new(vec![4], vec![500], 1, 3);
    let config = HarnessConfig::local(tmp.path());
    let a = run_design(&design, &config, |_, _| {}).await.unwrap();
    let b = run_design(&design, &config, |_, _| {}).await.unwrap();
    assert_eq!(a.records[0].digests.len(), 4);
    assert_eq!(a.records[0].digests, b.records[0].digests);
    assert_eq!(a.records[0].bytes_per_device, b.records[0].bytes_per_device);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn per_device_bytes_shrink_with_devices() {
    let tmp = tempfile::tempdir().unwrap();
    let design = ExperimentDesign::new(vec![1, 4, 16], vec![2000], 1, 5);
    let run = run_design(&design, &HarnessConfig::local(tmp.path()), |_, _| {})
        .await
        .unwrap();
    let bytes: Vec<f64> = run.records.iter().map(|r| r.bytes_per_device).collect();
    assert!(bytes[0] > bytes[1] && bytes[1] > bytes[2], "{bytes:?}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unreachable_remote_agents_are_recorded_as_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let design = ExperimentDesign::new(vec![1], vec![100], 2, 1);
    let mut config = HarnessConfig::local(tmp.path());
    config.remote_targets = Some(vec!["http://127.0.0.1:9".into()]);
    config.ack_timeout = std::time::Duration::from_secs(2);
    let run = run_design(&design, &config, |_, _| {}).await.unwrap();
    assert!(run.records.is_empty());
    assert_eq!(run.failures.len(), 2);
    assert_eq!(run.failures[0].phase, "deploy");
}

/// Skewed timing-like samples: Gamma(k=2, theta=50), true mean 100.
#[test]
fn interval_coverage_is_near_ninety_five_percent() {
    let gamma = Gamma::new(2.0, 50.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 4000;
    let covered = (0..trials)
        .filter(|_| {
            let xs: Vec<f64> = (0..50).map(|_| gamma.sample(&mut rng)).collect();
            Estimate::from_samples(&xs).unwrap().contains(100.0)
        })
        .count();
    let rate = covered as f64 / trials as f64;
    // binomial sd at 0.95 over 4000 trials is ~0.0034; skew costs about a point
    assert!((0.92..=0.97).contains(&rate), "coverage {rate}");
}
