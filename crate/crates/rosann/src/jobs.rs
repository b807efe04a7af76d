//! Background jobs with pollable status.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    ProcessBag,
    Transcribe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: String,
    pub kind: JobKind,
    /// What the job works on, e.g. a bag id.
    pub target: String,
    pub state: JobState,
    pub progress: f64,
    pub error: Option<String>,
}

#[derive(Debug, Default)]
pub struct JobManager {
    next: AtomicU64,
    jobs: Mutex<HashMap<String, JobStatus>>,
}

impl JobManager {
    pub fn get(&self, id: &str) -> Option<JobStatus> {
        self.jobs.lock().expect("jobs").get(id).cloned()
    }

    /// A queued or running job of `kind` on `target`.
    pub fn active(&self, kind: JobKind, target: &str) -> Option<JobStatus> {
        self.jobs
            .lock()
            .expect("jobs")
            .values()
            .find(|j| j.kind == kind && j.target == target && !j.state.is_terminal())
            .cloned()
    }

    /// The active job of `kind` on `target`, or a new queued one. The bool
    /// is true when the job was created by this call.
    pub fn start(&self, kind: JobKind, target: &str) -> (JobStatus, bool) {
        let mut jobs = self.jobs.lock().expect("jobs");
        if let Some(j) = jobs
            .values()
            .find(|j| j.kind == kind && j.target == target && !j.state.is_terminal())
        {
            return (j.clone(), false);
        }
        let id = format!("job-{}", self.next.fetch_add(1, Ordering::Relaxed) + 1);
        let status = JobStatus {
            id: id.clone(),
            kind,
            target: target.to_string(),
            state: JobState::Queued,
            progress: 0.0,
            error: None,
        };
        jobs.insert(id, status.clone());
        (status, true)
    }

    /// Moves a job forward. Terminal jobs never change again; returns
    /// whether the update was applied.
    pub fn set(&self, id: &str, state: JobState, progress: f64, error: Option<String>) -> bool {
        let mut jobs = self.jobs.lock().expect("jobs");
        match jobs.get_mut(id) {
            Some(j) if !j.state.is_terminal() => {
                j.state = state;
                j.progress = progress.clamp(0.0, 1.0);
                j.error = error;
                true
            }
            _ => false,
        }
    }
}
