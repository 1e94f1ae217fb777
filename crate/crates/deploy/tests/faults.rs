mod common;

use std::time::{Duration, Instant};

use sensedeploy_core::archive::{compress, compress_entries, sha256_hex};
use sensedeploy_core::marshal::{marshal_batch, MarshalOptions};
use sensedeploy_core::repository::generate_synthetic;
use sensedeploy_core::Region;
use sensedeploy_deploy::agent::spawn_agent;
use sensedeploy_deploy::{
    spawn_fleet, Ack, AckState, DeployManifest, FailureReason, JobRequest, JobState,
};

fn archive(n: usize, seed: u64) -> sensedeploy_core::archive::Archive {
    let sensors = generate_synthetic(n, &Region::europe(), seed);
    compress(&marshal_batch(&sensors, &MarshalOptions::default()).unwrap()).unwrap()
}

fn manifest(job: &str, uri: String, digest: String, count: usize) -> DeployManifest {
    DeployManifest {
        job_id: job.into(),
        device: "local".into(),
        archive_uri: uri,
        archive_digest: digest,
        descriptor_count: count,
    }
}

fn reason(ack: &Ack) -> Option<FailureReason> {
    match ack {
        Ack::Failed { reason, .. } => Some(*reason),
        Ack::Ok { .. } => None,
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn dead_device_fails_the_job() {
    let tmp = tempfile::tempdir().unwrap();
    let server = common::orchestrator(&tmp.path().join("orch"), Duration::from_secs(5)).await;
    let fleet = spawn_fleet(3, 0, &tmp.path().join("fleet")).await.unwrap();
    let mut targets = fleet.endpoints();
    targets.insert(1, common::dead_endpoint());

    let job = server
        .orchestrator
        .run(JobRequest::new(Region::europe(), 40, targets))
        .await
        .unwrap();
    assert_eq!(job.state, JobState::Failed);
    assert_eq!(job.failure.as_ref().unwrap().phase, "deploy");
    assert!(
        matches!(&job.devices[1].ack, AckState::Failed { reason } if reason.starts_with("unreachable"))
    );
    for k in [0, 2, 3] {
        assert!(
            job.devices[k].ack.is_ok(),
            "device {k}: {:?}",
            job.devices[k].ack
        );
    }
    assert!(job.timings.deploy_ms.is_some());
    assert!(job.timings.setup_ms().is_some());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn hanging_device_times_out() {
    let tmp = tempfile::tempdir().unwrap();
    let server = common::orchestrator(&tmp.path().join("orch"), Duration::from_millis(500)).await;
    let fleet = spawn_fleet(1, 0, &tmp.path().join("fleet")).await.unwrap();
    let hole = common::black_hole().await;
    let targets = vec![fleet.endpoints()[0].clone(), format!("http://{hole}")];

    let started = Instant::now();
    let job = server
        .orchestrator
        .run(JobRequest::new(Region::europe(), 10, targets))
        .await
        .unwrap();
    assert!(started.elapsed() < Duration::from_secs(10));
    assert_eq!(job.state, JobState::Failed);
    assert_eq!(
        job.devices[1].ack,
        AckState::Failed {
            reason: "timeout".into()
        }
    );
    assert!(job.devices[0].ack.is_ok());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn corrupted_digest_leaves_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let agent = spawn_agent(0, tmp.path().join("agent"), Duration::from_secs(10))
        .await
        .unwrap();
    let a = archive(20, 1);
    let uri = common::serve_bytes(a.bytes.clone()).await;

    let mut digest = a.digest.clone().into_bytes();
    digest[0] = if digest[0] == b'0' { b'1' } else { b'0' };
    let ack = agent
        .agent
        .receive_manifest(manifest(
            "job-a",
            uri.clone(),
            String::from_utf8(digest).unwrap(),
            20,
        ))
        .await;
    assert_eq!(reason(&ack), Some(FailureReason::DigestMismatch));
    assert!(!agent.agent.deploy_dir().join("job-a").exists());
    assert!(common::files_in(&agent.agent.deploy_dir()).is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn flipped_byte_is_caught_before_extraction() {
    let tmp = tempfile::tempdir().unwrap();
    let agent = spawn_agent(0, tmp.path().join("agent"), Duration::from_secs(10))
        .await
        .unwrap();
    let a = archive(5, 2);
    for pos in [0, a.bytes.len() / 2, a.bytes.len() - 1] {
        let mut bytes = a.bytes.clone();
        bytes[pos] ^= 0x01;
        let uri = common::serve_bytes(bytes).await;
        let ack = agent
            .agent
            .receive_manifest(manifest("job-f", uri, a.digest.clone(), 5))
            .await;
        assert_eq!(
            reason(&ack),
            Some(FailureReason::DigestMismatch),
            "byte {pos}"
        );
        assert!(!agent.agent.deploy_dir().join("job-f").exists());
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unreachable_archive() {
    let tmp = tempfile::tempdir().unwrap();
    let agent = spawn_agent(0, tmp.path().join("agent"), Duration::from_secs(10))
        .await
        .unwrap();
    let uri = format!("{}/artifacts/x/0.tar.gz", common::dead_endpoint());
    let ack = agent
        .agent
        .receive_manifest(manifest("job-u", uri, "00".repeat(32), 1))
        .await;
    assert_eq!(reason(&ack), Some(FailureReason::DownloadFailed));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn count_and_xml_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let agent = spawn_agent(0, tmp.path().join("agent"), Duration::from_secs(10))
        .await
        .unwrap();

    let a = archive(7, 3);
    let uri = common::serve_bytes(a.bytes.clone()).await;
    let ack = agent
        .agent
        .receive_manifest(manifest("job-c", uri, a.digest.clone(), 8))
        .await;
    assert_eq!(reason(&ack), Some(FailureReason::CountMismatch));
    assert!(!agent.agent.deploy_dir().join("job-c").exists());

    let bad = compress_entries([("a.xml", b"<virtual-sensor>".as_slice())]).unwrap();
    let uri = common::serve_bytes(bad.bytes.clone()).await;
    let ack = agent
        .agent
        .receive_manifest(manifest("job-x", uri, bad.digest.clone(), 1))
        .await;
    assert_eq!(reason(&ack), Some(FailureReason::XmlInvalid));
    assert!(!agent.agent.deploy_dir().join("job-x").exists());

    let garbage = b"not a tarball".to_vec();
    let digest = sha256_hex(&garbage);
    let uri = common::serve_bytes(garbage).await;
    let ack = agent
        .agent
        .receive_manifest(manifest("job-g", uri, digest, 1))
        .await;
    assert_eq!(reason(&ack), Some(FailureReason::ExtractionFailed));

    let ack = agent
        .agent
        .receive_manifest(manifest(
            "../escape",
            "http://127.0.0.1:1/".into(),
            String::new(),
            1,
        ))
        .await;
    assert_eq!(reason(&ack), Some(FailureReason::InvalidManifest));
    assert!(common::files_in(&agent.agent.deploy_dir()).is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn redelivery_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let agent = spawn_agent(0, tmp.path().join("agent"), Duration::from_secs(10))
        .await
        .unwrap();
    let a = archive(30, 4);
    let uri = common::serve_bytes(a.bytes.clone()).await;
    let m = manifest("job-r", uri, a.digest.clone(), 30);

    let first = agent.agent.receive_manifest(m.clone()).await;
    assert!(first.is_ok());
    let dir = agent.agent.deploy_dir().join("job-r");
    let snapshot = |dir: &std::path::Path| {
        common::files_in(dir)
            .into_iter()
            .map(|n| (std::fs::read(dir.join(&n)).unwrap(), n))
            .collect::<Vec<_>>()
    };
    let before = snapshot(&dir);
    let second = agent.agent.receive_manifest(m).await;
    assert!(matches!(second, Ack::Ok { files: 30, .. }));
    assert_eq!(snapshot(&dir), before);
    assert_eq!(common::files_in(&agent.agent.deploy_dir()), vec!["job-r"]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn failed_redelivery_removes_previous_install() {
    let tmp = tempfile::tempdir().unwrap();
    let agent = spawn_agent(0, tmp.path().join("agent"), Duration::from_secs(10))
        .await
        .unwrap();
    let a = archive(3, 5);
    let uri = common::serve_bytes(a.bytes.clone()).await;
    assert!(agent
        .agent
        .receive_manifest(manifest("job-z", uri.clone(), a.digest.clone(), 3))
        .await
        .is_ok());
    let ack = agent
        .agent
        .receive_manifest(manifest("job-z", uri, "ff".repeat(32), 3))
        .await;
    assert!(!ack.is_ok());
    assert!(!agent.agent.deploy_dir().join("job-z").exists());
    assert!(agent.agent.state().deployed_jobs.is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn agent_http_interface() {
    let tmp = tempfile::tempdir().unwrap();
    let agent = spawn_agent(0, tmp.path().join("agent"), Duration::from_secs(10))
        .await
        .unwrap();
    let a = archive(4, 6);
    let uri = common::serve_bytes(a.bytes.clone()).await;
    let http = reqwest::Client::new();
    let ack: Ack = http
        .post(format!("{}/deploy", agent.endpoint))
        .json(&manifest("job-h", uri, a.digest.clone(), 4))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!(matches!(ack, Ack::Ok { files: 4, .. }));
    let health: serde_json::Value = http
        .get(format!("{}/health", agent.endpoint))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(health["deployed_jobs"]["job-h"], 4);
    assert_eq!(health["busy"], false);
}
