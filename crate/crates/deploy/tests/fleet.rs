mod common;

use std::time::Duration;

use sensedeploy_core::archive::read_entries;
use sensedeploy_core::Region;
use sensedeploy_deploy::{spawn_fleet, JobRequest, JobState};

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn sixteen_agents_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let server = common::orchestrator(&tmp.path().join("orch"), Duration::from_secs(60)).await;
    let fleet = spawn_fleet(16, 0, &tmp.path().join("fleet")).await.unwrap();
    let job = server
        .orchestrator
        .run(JobRequest::new(Region::europe(), 1000, fleet.endpoints()))
        .await
        .unwrap();
    assert_eq!(job.state, JobState::Complete, "{:?}", job.failure);
    assert!(job.devices.iter().all(|d| d.ack.is_ok()));
    let sizes: Vec<usize> = job.devices.iter().map(|d| d.descriptor_count).collect();
    assert_eq!(sizes, [vec![63; 8], vec![62; 8]].concat());
    let on_disk: usize = fleet
        .agents
        .iter()
        .map(|a| common::files_in(&a.agent.deploy_dir().join(&job.id)).len())
        .sum();
    assert_eq!(on_disk, 1000);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn archives_do_not_depend_on_device_latency() {
    let tmp = tempfile::tempdir().unwrap();
    let server = common::orchestrator(&tmp.path().join("orch"), Duration::from_millis(300)).await;
    let fleet = spawn_fleet(2, 0, &tmp.path().join("fleet")).await.unwrap();
    let hole = common::black_hole().await;

    let healthy = JobRequest::new(Region::europe(), 120, fleet.endpoints());
    let mut slow = healthy.clone();
    slow.targets[1] = format!("http://{hole}");

    let a = server.orchestrator.run(healthy).await.unwrap();
    let b = server.orchestrator.run(slow).await.unwrap();
    assert_eq!(a.state, JobState::Complete);
    assert_eq!(b.state, JobState::Failed);
    for k in 0..2 {
        assert_eq!(a.devices[k].archive_digest, b.devices[k].archive_digest);
        let bytes_a = std::fs::read(server.orchestrator.artifact_path(&a.id, k)).unwrap();
        let bytes_b = std::fs::read(server.orchestrator.artifact_path(&b.id, k)).unwrap();
        assert_eq!(bytes_a, bytes_b);
        assert_eq!(read_entries(&bytes_a).unwrap().len(), 60);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn restart_keeps_finished_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("orch");
    let fleet = spawn_fleet(1, 0, &tmp.path().join("fleet")).await.unwrap();
    let id = {
        let server = common::orchestrator(&data, Duration::from_secs(60)).await;
        let job = server
            .orchestrator
            .run(JobRequest::new(Region::europe(), 5, fleet.endpoints()))
            .await
            .unwrap();
        assert_eq!(job.state, JobState::Complete);
        job.id
    };
    let server = common::orchestrator(&data, Duration::from_secs(60)).await;
    let job = server.orchestrator.status(&id).unwrap();
    assert_eq!(job.state, JobState::Complete);
    assert!(job.timings.setup_ms().is_some());
}
