//! Task records, the worker pool and restart recovery.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::panic::AssertUnwindSafe;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use fdscope_core::task::{execute, validate, TaskKind};
use fdscope_core::{CancelToken, Error, ExecConfig, FieldError, Relation};
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use tokio::sync::mpsc;

use crate::store::{atomic_write, now_millis, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Queued,
    Running,
    Completed,
    Failed,
}

impl TaskStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Queued => "queued",
            TaskStatus::Running => "running",
            TaskStatus::Completed => "completed",
            TaskStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub kind: TaskKind,
    /// Input dataset ids; several only for the anomaly scenario.
    pub datasets: Vec<String>,
    pub params: Json,
    pub status: TaskStatus,
    pub created_at: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    /// Path of the result document relative to the storage root.
    pub result: Option<String>,
    pub error: Option<String>,
    /// Times the task was put back in the queue after an interrupted run.
    #[serde(default)]
    pub requeued: u32,
    #[serde(default)]
    pub cancel_requested: bool,
}

#[derive(Debug)]
pub enum SubmitError {
    UnknownDataset(String),
    Invalid(Vec<FieldError>),
    Io(std::io::Error),
}

pub struct Tasks {
    store: Arc<Store>,
    records: Mutex<BTreeMap<String, TaskRecord>>,
    cancels: Mutex<HashMap<String, CancelToken>>,
    queue: mpsc::UnboundedSender<String>,
    engine_threads: usize,
    counter: AtomicU64,
}

impl Tasks {
    /// Loads persisted records, re-queues interrupted work and starts
    /// `workers` executors. Must be called inside a tokio runtime.
    pub fn start(store: Arc<Store>, workers: usize, engine_threads: usize) -> std::io::Result<Arc<Tasks>> {
        let (tx, rx) = mpsc::unbounded_channel();
        let mut records = BTreeMap::new();
        for entry in fs::read_dir(store.root().join("tasks"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let bytes = fs::read(&path)?;
            match serde_json::from_slice::<TaskRecord>(&bytes) {
                Ok(r) => {
                    records.insert(r.id.clone(), r);
                }
                Err(e) => tracing::warn!("skipping unreadable task file {}: {e}", path.display()),
            }
        }
        let tasks = Arc::new(Tasks {
            store,
            records: Mutex::new(records),
            cancels: Mutex::new(HashMap::new()),
            queue: tx,
            engine_threads,
            counter: AtomicU64::new(0),
        });
        tasks.recover()?;
        let rx = Arc::new(tokio::sync::Mutex::new(rx));
        for _ in 0..workers.max(1) {
            let rx = rx.clone();
            let tasks = tasks.clone();
            tokio::spawn(async move {
                loop {
                    let next = rx.lock().await.recv().await;
                    let Some(id) = next else { break };
                    let t = tasks.clone();
                    if let Err(e) = tokio::task::spawn_blocking(move || t.run(&id)).await {
                        tracing::error!("worker join failed: {e}");
                    }
                }
            });
        }
        Ok(tasks)
    }

    fn recover(&self) -> std::io::Result<()> {
        let mut pending: Vec<(u64, String)> = Vec::new();
        let mut records = self.records.lock().unwrap();
        for r in records.values_mut() {
            match r.status {
                TaskStatus::Running if self.store.result_path(&r.id).exists() => {
                    r.status = TaskStatus::Completed;
                    r.finished_at.get_or_insert_with(now_millis);
                    r.result = Some(format!("results/{}.json", r.id));
                    self.persist(r)?;
                }
                TaskStatus::Running => {
                    r.status = TaskStatus::Queued;
                    r.started_at = None;
                    r.requeued += 1;
                    self.persist(r)?;
                    pending.push((r.created_at, r.id.clone()));
                }
                TaskStatus::Queued => pending.push((r.created_at, r.id.clone())),
                TaskStatus::Completed | TaskStatus::Failed => {}
            }
        }
        pending.sort();
        for (_, id) in pending {
            let _ = self.queue.send(id);
        }
        Ok(())
    }

    fn persist(&self, r: &TaskRecord) -> std::io::Result<()> {
        atomic_write(
            &self.store.task_path(&r.id),
            &serde_json::to_vec_pretty(r).expect("records serialize"),
        )
    }

    fn next_id(&self) -> String {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        format!("t-{nanos:016x}-{n:04x}")
    }

    pub fn get(&self, id: &str) -> Option<TaskRecord> {
        self.records.lock().unwrap().get(id).cloned()
    }

    pub fn list(&self) -> Vec<TaskRecord> {
        let mut all: Vec<TaskRecord> = self.records.lock().unwrap().values().cloned().collect();
        all.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        all
    }

    fn relations(&self, ids: &[String]) -> Result<Vec<Arc<Relation>>, String> {
        ids.iter()
            .map(|id| self.store.relation(id).ok_or_else(|| id.clone()))
            .collect()
    }

    /// Validates and persists a new queued task before returning it.
    pub fn submit(&self, kind: TaskKind, datasets: Vec<String>, params: Json) -> Result<TaskRecord, SubmitError> {
        if datasets.is_empty() {
            return Err(SubmitError::Invalid(vec![FieldError {
                field: "dataset".into(),
                reason: "is required".into(),
            }]));
        }
        let relations = self.relations(&datasets).map_err(SubmitError::UnknownDataset)?;
        let refs: Vec<&Relation> = relations.iter().map(|r| r.as_ref()).collect();
        validate(kind, &params, &refs).map_err(SubmitError::Invalid)?;
        let record = TaskRecord {
            id: self.next_id(),
            kind,
            datasets,
            params,
            status: TaskStatus::Queued,
            created_at: now_millis(),
            started_at: None,
            finished_at: None,
            result: None,
            error: None,
            requeued: 0,
            cancel_requested: false,
        };
        self.persist(&record).map_err(SubmitError::Io)?;
        self.records
            .lock()
            .unwrap()
            .insert(record.id.clone(), record.clone());
        let _ = self.queue.send(record.id.clone());
        Ok(record)
    }

    /// Requests cooperative cancellation. Finished tasks are left alone.
    pub fn cancel(&self, id: &str) -> std::io::Result<Option<TaskRecord>> {
        let mut records = self.records.lock().unwrap();
        let Some(r) = records.get_mut(id) else {
            return Ok(None);
        };
        if matches!(r.status, TaskStatus::Queued | TaskStatus::Running) && !r.cancel_requested {
            r.cancel_requested = true;
            self.persist(r)?;
            if let Some(token) = self.cancels.lock().unwrap().get(id) {
                token.cancel();
            }
        }
        Ok(Some(r.clone()))
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut TaskRecord)) -> Option<TaskRecord> {
        let mut records = self.records.lock().unwrap();
        let r = records.get_mut(id)?;
        f(r);
        if let Err(e) = self.persist(r) {
            tracing::error!("cannot persist task {id}: {e}");
        }
        Some(r.clone())
    }

    fn finish(&self, id: &str, outcome: Result<Vec<u8>, String>) {
        let outcome = outcome.and_then(|bytes| {
            self.store
                .put_result_once(id, &bytes)
                .map_err(|e| format!("cannot store result: {e}"))
        });
        self.update(id, |r| {
            r.finished_at = Some(now_millis());
            match outcome {
                Ok(()) => {
                    r.status = TaskStatus::Completed;
                    r.result = Some(format!("results/{id}.json"));
                }
                Err(msg) => {
                    r.status = TaskStatus::Failed;
                    r.error = Some(msg);
                }
            }
        });
        self.cancels.lock().unwrap().remove(id);
    }

    fn run(&self, id: &str) {
        let token = CancelToken::new();
        let Some(record) = ({
            let mut records = self.records.lock().unwrap();
            match records.get_mut(id) {
                Some(r) if r.status == TaskStatus::Queued => {
                    r.status = TaskStatus::Running;
                    r.started_at = Some(now_millis());
                    if r.cancel_requested {
                        token.cancel();
                    }
                    self.cancels.lock().unwrap().insert(id.to_owned(), token.clone());
                    if let Err(e) = self.persist(r) {
                        tracing::error!("cannot persist task {id}: {e}");
                    }
                    Some(r.clone())
                }
                _ => None,
            }
        }) else {
            return;
        };
        tracing::info!("running {} task {id}", record.kind);
        let exec = ExecConfig {
            threads: self.engine_threads,
            cancel: Some(token.clone()),
        };
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(|| {
            if token.is_cancelled() {
                return Err(Error::Cancelled.to_string());
            }
            let relations = self
                .relations(&record.datasets)
                .map_err(|id| format!("dataset {id} is missing"))?;
            let owned: Vec<Relation> = relations.iter().map(|r| (**r).clone()).collect();
            execute(record.kind, &record.params, &owned, &exec)
                .map(|report| report.to_json())
                .map_err(|e| e.to_string())
        }))
        .unwrap_or_else(|_| Err("task panicked".to_owned()));
        self.finish(id, outcome);
    }
}
