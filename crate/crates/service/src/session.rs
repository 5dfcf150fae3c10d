//! Dedup sessions over HTTP. Every decision is appended to the session log
//! and synced before it is acknowledged; the in-memory state is a replay of
//! that log.

use std::collections::HashMap;
use std::fs;
use std::sync::{Arc, Mutex};

use fdscope_core::report::{PairView, Report};
use fdscope_core::scenario::dedup::{DedupSession, DuplicatePair, Resolution, SessionError};
use fdscope_core::task::TaskKind;
use fdscope_core::{AttrSet, Relation};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::store::{hex, DatasetMeta, Store};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Event {
    Decide {
        row_a: u32,
        row_b: u32,
        keep: u32,
        #[serde(default)]
        copy_attrs: AttrSet,
    },
    Skip {
        row_a: u32,
        row_b: u32,
    },
    Undo,
    Finish {
        dataset: String,
    },
}

#[derive(Debug)]
pub enum SessionFailure {
    UnknownTask,
    NotDedup,
    NotCompleted,
    Rejected(SessionError),
    Storage(String),
}

impl From<SessionError> for SessionFailure {
    fn from(e: SessionError) -> Self {
        SessionFailure::Rejected(e)
    }
}

#[derive(Debug, Clone)]
pub struct SessionState {
    pub id: String,
    pub source: Arc<Relation>,
    pub source_meta: DatasetMeta,
    pub session: DedupSession,
    pub finished: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session: String,
    pub source_dataset: String,
    pub proposal: Option<DuplicatePair>,
    pub candidates: usize,
    pub journal: Vec<Resolution>,
    pub skipped: Vec<(u32, u32)>,
    /// Journal length; each decision or undo moves it.
    pub version: usize,
    pub remaining_rows: usize,
    /// Digest of the journal and the relation it replays to.
    pub state_hash: String,
    pub finished: Vec<String>,
}

impl SessionState {
    fn apply(&mut self, event: &Event) -> Result<(), SessionError> {
        match event {
            Event::Decide {
                row_a,
                row_b,
                keep,
                copy_attrs,
            } => {
                for a in copy_attrs.iter() {
                    if a >= self.source.attribute_count() {
                        return Err(SessionError::Invalid(format!("attribute {a} is out of range")));
                    }
                }
                self.session.decide_pair(*row_a, *row_b, *keep, *copy_attrs).map(|_| ())
            }
            Event::Skip { row_a, row_b } => self.session.skip(*row_a, *row_b),
            Event::Undo => self
                .session
                .undo()
                .map(|_| ())
                .ok_or_else(|| SessionError::Invalid("nothing to undo".into())),
            Event::Finish { dataset } => {
                self.finished.push(dataset.clone());
                Ok(())
            }
        }
    }

    pub fn current(&self) -> Result<Relation, SessionFailure> {
        self.session
            .relation(&self.source)
            .map_err(|e| SessionFailure::Storage(e.to_string()))
    }

    pub fn view(&self) -> Result<SessionView, SessionFailure> {
        let current = self.current()?;
        let journal = serde_json::to_vec(&self.session.journal).expect("journal serializes");
        let csv = current
            .to_csv(self.source_meta.csv.separator, &self.source_meta.csv.null_token)
            .map_err(|e| SessionFailure::Storage(e.to_string()))?;
        let mut h = Sha256::new();
        h.update(&journal);
        h.update([0]);
        h.update(&csv);
        Ok(SessionView {
            session: self.id.clone(),
            source_dataset: self.source_meta.id.clone(),
            proposal: self.session.proposal().cloned(),
            candidates: self.session.candidates.len(),
            journal: self.session.journal.clone(),
            skipped: self.session.skipped.iter().copied().collect(),
            version: self.session.journal.len(),
            remaining_rows: current.row_count(),
            state_hash: hex(&h.finalize()),
            finished: self.finished.clone(),
        })
    }
}

pub struct Sessions {
    store: Arc<Store>,
    open: Mutex<HashMap<String, Arc<Mutex<SessionState>>>>,
}

fn candidates_of(report: &Report) -> Option<Vec<DuplicatePair>> {
    match report {
        Report::ScenarioDedup(r) => Some(r.pairs.iter().map(PairView::pair).collect()),
        _ => None,
    }
}

impl Sessions {
    pub fn new(store: Arc<Store>) -> Self {
        Sessions {
            store,
            open: Mutex::new(HashMap::new()),
        }
    }

    /// Opens the session of a completed dedup task, replaying its log.
    pub fn get(
        &self,
        task: Option<&crate::tasks::TaskRecord>,
    ) -> Result<Arc<Mutex<SessionState>>, SessionFailure> {
        let task = task.ok_or(SessionFailure::UnknownTask)?;
        if task.kind != TaskKind::ScenarioDedup {
            return Err(SessionFailure::NotDedup);
        }
        if let Some(s) = self.open.lock().unwrap().get(&task.id) {
            return Ok(s.clone());
        }
        let bytes = self.store.result(&task.id).ok_or(SessionFailure::NotCompleted)?;
        let report: Report = serde_json::from_slice(&bytes).map_err(|e| SessionFailure::Storage(e.to_string()))?;
        let candidates = candidates_of(&report).ok_or(SessionFailure::NotDedup)?;
        let source_id = &task.datasets[0];
        let missing = || SessionFailure::Storage(format!("dataset {source_id} is missing"));
        let mut state = SessionState {
            id: task.id.clone(),
            source: self.store.relation(source_id).ok_or_else(missing)?,
            source_meta: self.store.dataset_meta(source_id).ok_or_else(missing)?,
            session: DedupSession::new(candidates),
            finished: Vec::new(),
        };
        if let Ok(log) = fs::read_to_string(self.store.session_path(&task.id)) {
            for line in log.lines().filter(|l| !l.trim().is_empty()) {
                // A torn final line was never acknowledged.
                let Ok(event) = serde_json::from_str::<Event>(line) else {
                    tracing::warn!("ignoring unreadable event in session {}", task.id);
                    continue;
                };
                if let Err(e) = state.apply(&event) {
                    tracing::warn!("event {event:?} no longer applies in session {}: {e}", task.id);
                }
            }
        }
        let state = Arc::new(Mutex::new(state));
        self.open
            .lock()
            .unwrap()
            .entry(task.id.clone())
            .or_insert(state);
        Ok(self.open.lock().unwrap()[&task.id].clone())
    }

    /// Validates `event` against the state, makes it durable, then applies it.
    pub fn record(&self, state: &mut SessionState, event: Event) -> Result<(), SessionFailure> {
        let mut next = state.clone();
        next.apply(&event)?;
        let line = serde_json::to_vec(&event).expect("events serialize");
        self.store
            .append_line(&self.store.session_path(&state.id), &line)
            .map_err(|e| SessionFailure::Storage(e.to_string()))?;
        *state = next;
        Ok(())
    }

    /// Stores the current relation as a new dataset and logs the fact.
    pub fn finish(&self, state: &mut SessionState) -> Result<DatasetMeta, SessionFailure> {
        let current = state.current()?;
        let csv_cfg = fdscope_core::CsvConfig {
            has_header: true,
            ..state.source_meta.csv.clone()
        };
        let bytes = current
            .to_csv(csv_cfg.separator, &csv_cfg.null_token)
            .map_err(|e| SessionFailure::Storage(e.to_string()))?;
        let name = format!("{}-dedup", state.source_meta.name);
        let (meta, _) = self
            .store
            .put_dataset(&bytes, &csv_cfg, &name, Some(state.source_meta.id.clone()))
            .map_err(|e| SessionFailure::Storage(e.to_string()))?;
        self.record(state, Event::Finish { dataset: meta.id.clone() })?;
        Ok(meta)
    }
}
