//! Directory-per-run store with a JSON index and sequential ids.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use telewb_core::run::{ArtifactKind, RunConfig};

use crate::SERVICE_SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Queued,
    Running,
    Done,
    Failed,
}

impl RunState {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunState::Done | RunState::Failed)
    }

    /// queued -> running -> {done, failed}; queued -> failed on restart.
    pub fn can_become(self, next: RunState) -> bool {
        matches!(
            (self, next),
            (RunState::Queued, RunState::Running)
                | (RunState::Queued, RunState::Failed)
                | (RunState::Running, RunState::Done)
                | (RunState::Running, RunState::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub state: RunState,
    pub parent_run: Option<String>,
    pub error: Option<String>,
    pub config: RunConfig,
    /// artifact kind -> sha256, filled when done.
    pub artifacts: BTreeMap<String, String>,
    /// Wall-clock ms; never part of any artifact.
    pub created_ms: u64,
    pub updated_ms: u64,
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("run `{0}` not found")]
    NotFound(String),
    #[error("run `{id}` is {state:?}{}", reason.as_deref().map(|r| format!(": {r}")).unwrap_or_default())]
    NotReady {
        id: String,
        state: RunState,
        reason: Option<String>,
    },
    #[error("run `{id}` cannot go from {from:?} to {to:?}")]
    Transition { id: String, from: RunState, to: RunState },
    #[error("artifact `{0}` not available")]
    NoArtifact(String),
    #[error(transparent)]
    Core(#[from] telewb_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    schema_version: u32,
    next_id: u64,
    runs: BTreeMap<u64, RunRecord>,
}

#[derive(Debug)]
pub struct RunStore {
    root: PathBuf,
    index: Mutex<Index>,
}

const INDEX_FILE: &str = "index.json";

impl RunStore {
    /// Opens or creates a store. Runs left unfinished by a previous process
    /// are marked failed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        std::fs::create_dir_all(root.join("runs"))?;
        let path = root.join(INDEX_FILE);
        let mut index: Index = if path.exists() {
            serde_json::from_slice(&std::fs::read(&path)?)?
        } else {
            Index {
                schema_version: SERVICE_SCHEMA_VERSION,
                next_id: 1,
                runs: BTreeMap::new(),
            }
        };
        for r in index.runs.values_mut() {
            if !r.state.is_terminal() {
                r.state = RunState::Failed;
                r.updated_ms = now_ms();
                r.error = Some("interrupted by service restart".into());
            }
        }
        let store = RunStore {
            root,
            index: Mutex::new(index),
        };
        store.persist(&store.index.lock().expect("index lock"))?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn persist(&self, index: &Index) -> Result<(), StoreError> {
        let tmp = self.root.join("index.json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(index)?)?;
        std::fs::rename(tmp, self.root.join(INDEX_FILE))?;
        Ok(())
    }

    fn key(id: &str) -> Result<u64, StoreError> {
        id.parse().map_err(|_| StoreError::NotFound(id.to_owned()))
    }

    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(id)
    }

    /// Registers a queued run and writes its configuration.
    pub fn create(&self, cfg: &RunConfig) -> Result<RunRecord, StoreError> {
        let mut index = self.index.lock().expect("index lock");
        let n = index.next_id;
        let id = n.to_string();
        let dir = self.run_dir(&id);
        std::fs::create_dir_all(&dir)?;
        let mut bytes = serde_json::to_vec_pretty(cfg)?;
        bytes.push(b'\n');
        std::fs::write(dir.join(ArtifactKind::Config.file_name()), bytes)?;
        let now = now_ms();
        let record = RunRecord {
            id,
            state: RunState::Queued,
            parent_run: cfg.parent_run.clone(),
            error: None,
            config: cfg.clone(),
            artifacts: BTreeMap::new(),
            created_ms: now,
            updated_ms: now,
        };
        index.next_id += 1;
        index.runs.insert(n, record.clone());
        self.persist(&index)?;
        Ok(record)
    }

    pub fn get(&self, id: &str) -> Result<RunRecord, StoreError> {
        let key = Self::key(id)?;
        self.index
            .lock()
            .expect("index lock")
            .runs
            .get(&key)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(id.to_owned()))
    }

    pub fn list(&self) -> Vec<RunRecord> {
        self.index.lock().expect("index lock").runs.values().cloned().collect()
    }

    fn transition(&self, id: &str, to: RunState, f: impl FnOnce(&mut RunRecord)) -> Result<RunRecord, StoreError> {
        let key = Self::key(id)?;
        let mut index = self.index.lock().expect("index lock");
        let rec = index
            .runs
            .get_mut(&key)
            .ok_or_else(|| StoreError::NotFound(id.to_owned()))?;
        if !rec.state.can_become(to) {
            return Err(StoreError::Transition {
                id: id.to_owned(),
                from: rec.state,
                to,
            });
        }
        rec.state = to;
        f(rec);
        rec.updated_ms = now_ms();
        let out = rec.clone();
        self.persist(&index)?;
        Ok(out)
    }

    pub fn mark_running(&self, id: &str) -> Result<RunRecord, StoreError> {
        self.transition(id, RunState::Running, |_| {})
    }

    pub fn mark_done(&self, id: &str, artifacts: BTreeMap<String, String>) -> Result<RunRecord, StoreError> {
        self.transition(id, RunState::Done, |r| r.artifacts = artifacts)
    }

    pub fn mark_failed(&self, id: &str, error: String) -> Result<RunRecord, StoreError> {
        self.transition(id, RunState::Failed, |r| r.error = Some(error))
    }

    /// The record of a finished run, or `NotReady`.
    pub fn done(&self, id: &str) -> Result<RunRecord, StoreError> {
        let rec = self.get(id)?;
        if rec.state != RunState::Done {
            return Err(StoreError::NotReady {
                id: rec.id,
                state: rec.state,
                reason: rec.error,
            });
        }
        Ok(rec)
    }

    pub fn artifact(&self, id: &str, kind: ArtifactKind) -> Result<Vec<u8>, StoreError> {
        let rec = self.done(id)?;
        if !rec.artifacts.contains_key(kind.as_str()) {
            return Err(StoreError::NoArtifact(kind.as_str().to_owned()));
        }
        Ok(std::fs::read(self.run_dir(id).join(kind.file_name()))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use telewb_core::learners::{LearnerSpec, ModelSpec};
    use telewb_core::run::Source;

    fn cfg() -> RunConfig {
        RunConfig::new(
            Source::Dataset {
                csv: "x.csv".into(),
                columns: None,
            },
            ModelSpec::new(LearnerSpec::default_for("knn").unwrap(), 0),
        )
    }

    #[test]
    fn ids_are_sequential_and_persist() {
        let tmp = tempfile::tempdir().unwrap();
        let s = RunStore::open(tmp.path()).unwrap();
        assert_eq!(s.create(&cfg()).unwrap().id, "1");
        assert_eq!(s.create(&cfg()).unwrap().id, "2");
        s.mark_running("1").unwrap();
        s.mark_done("1", BTreeMap::new()).unwrap();
        drop(s);
        let s = RunStore::open(tmp.path()).unwrap();
        assert_eq!(s.create(&cfg()).unwrap().id, "3");
        assert_eq!(s.get("1").unwrap().state, RunState::Done);
        // queued at shutdown
        assert_eq!(s.get("2").unwrap().state, RunState::Failed);
    }

    #[test]
    fn unfinished_runs_have_no_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let s = RunStore::open(tmp.path()).unwrap();
        s.create(&cfg()).unwrap();
        assert!(matches!(s.artifact("1", ArtifactKind::Model), Err(StoreError::NotReady { .. })));
        assert!(matches!(s.get("9"), Err(StoreError::NotFound(_))));
        assert!(matches!(s.get("abc"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn only_forward_transitions() {
        let tmp = tempfile::tempdir().unwrap();
        let s = RunStore::open(tmp.path()).unwrap();
        s.create(&cfg()).unwrap();
        assert!(matches!(s.mark_done("1", BTreeMap::new()), Err(StoreError::Transition { .. })));
        s.mark_running("1").unwrap();
        assert!(s.mark_running("1").is_err());
        s.mark_failed("1", "boom".into()).unwrap();
        assert!(s.mark_done("1", BTreeMap::new()).is_err());
        assert!(s.mark_running("1").is_err());
        assert_eq!(s.get("1").unwrap().error.as_deref(), Some("boom"));
        for from in [RunState::Done, RunState::Failed] {
            for to in [RunState::Queued, RunState::Running, RunState::Done, RunState::Failed] {
                assert!(!from.can_become(to));
            }
        }
    }
}
