use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
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
pub struct JobHandle {
    pub id: String,
    pub experiment: String,
    pub stage: String,
    pub state: JobState,
    pub progress: f64,
    pub error: Option<String>,
}

/// Job table plus one queue per experiment. Jobs for the same experiment
/// run one at a time in submission order; different experiments run in
/// parallel.
#[derive(Default)]
pub struct Jobs {
    handles: RwLock<HashMap<String, JobHandle>>,
    queues: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Jobs {
    pub fn get(&self, id: &str) -> Option<JobHandle> {
        self.handles.read().expect("job table").get(id).cloned()
    }

    pub fn queue(&self, experiment: &str) -> Arc<Mutex<()>> {
        self.queues.lock().expect("queue table").entry(experiment.to_string()).or_default().clone()
    }

    /// Queued or running jobs for `experiment`.
    pub fn active(&self, experiment: &str) -> usize {
        self.handles.read().expect("job table").values().filter(|h| h.experiment == experiment && !h.state.is_terminal()).count()
    }

    pub fn submit(&self, experiment: &str, stage: &str) -> JobHandle {
        let h = JobHandle {
            id: uuid::Uuid::new_v4().to_string(),
            experiment: experiment.to_string(),
            stage: stage.to_string(),
            state: JobState::Queued,
            progress: 0.0,
            error: None,
        };
        self.handles.write().expect("job table").insert(h.id.clone(), h.clone());
        h
    }

    /// Moves a job forward. Terminal states and progress never go back.
    pub fn advance(&self, id: &str, state: JobState, progress: f64, error: Option<String>) {
        let mut table = self.handles.write().expect("job table");
        let Some(h) = table.get_mut(id) else { return };
        if h.state.is_terminal() {
            return;
        }
        h.state = state;
        h.progress = h.progress.max(progress);
        if error.is_some() {
            h.error = error;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminal_states_and_progress_are_sticky() {
        let jobs = Jobs::default();
        let h = jobs.submit("e", "train");
        assert_eq!(jobs.active("e"), 1);
        jobs.advance(&h.id, JobState::Running, 0.5, None);
        jobs.advance(&h.id, JobState::Running, 0.2, None);
        assert_eq!(jobs.get(&h.id).unwrap().progress, 0.5);
        jobs.advance(&h.id, JobState::Failed, 0.5, Some("boom".into()));
        jobs.advance(&h.id, JobState::Done, 1.0, None);
        let h = jobs.get(&h.id).unwrap();
        assert_eq!((h.state, h.progress, h.error.as_deref()), (JobState::Failed, 0.5, Some("boom")));
        assert_eq!(jobs.active("e"), 0);
    }
}
