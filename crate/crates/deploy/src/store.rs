//! Job registry backed by an append-only JSON-lines log.
//!
//! Every update appends a full snapshot of the job; on reopen the last
//! snapshot per id wins. Jobs that were still running when the process
//! stopped come back as failed.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use crate::error::DeployError;
use crate::job::DeployJob;

pub const LOG_FILE: &str = "jobs.log";

#[derive(Debug, Default)]
pub struct JobStore {
    jobs: RwLock<HashMap<String, DeployJob>>,
    log: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl JobStore {
    /// Store without persistence.
    pub fn in_memory() -> Self {
        JobStore::default()
    }

    pub fn open(dir: &Path) -> Result<Self, DeployError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut jobs = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let job: DeployJob = serde_json::from_str(&line)?;
                jobs.insert(job.id.clone(), job);
            }
        }
        let log = OpenOptions::new().create(true).append(true).open(&path)?;
        let store = JobStore {
            jobs: RwLock::new(HashMap::new()),
            log: Some(Mutex::new(log)),
            path: Some(path),
        };
        for (_, mut job) in jobs {
            if !job.state.is_terminal() {
                job.fail("restart", "interrupted by orchestrator restart");
                store.append(&job)?;
            }
            store.jobs.write().unwrap().insert(job.id.clone(), job);
        }
        Ok(store)
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn append(&self, job: &DeployJob) -> Result<(), DeployError> {
        if let Some(log) = &self.log {
            let mut line = serde_json::to_vec(job)?;
            line.push(b'\n');
            log.lock().unwrap().write_all(&line)?;
        }
        Ok(())
    }

    pub fn insert(&self, job: DeployJob) -> Result<(), DeployError> {
        self.append(&job)?;
        self.jobs.write().unwrap().insert(job.id.clone(), job);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<DeployJob, DeployError> {
        self.jobs
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| DeployError::UnknownJob(id.to_string()))
    }

    /// Applies `f` to the stored job and persists the result.
    pub fn update<R>(
        &self,
        id: &str,
        f: impl FnOnce(&mut DeployJob) -> Result<R, DeployError>,
    ) -> Result<R, DeployError> {
        let snapshot;
        let out;
        {
            let mut jobs = self.jobs.write().unwrap();
            let job = jobs
                .get_mut(id)
                .ok_or_else(|| DeployError::UnknownJob(id.to_string()))?;
            out = f(job)?;
            snapshot = job.clone();
        }
        self.append(&snapshot)?;
        Ok(out)
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.jobs.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }
}
