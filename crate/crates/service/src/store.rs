//! Plain-file persistence under one storage root.
//!
//! ```text
//! root/
//!   datasets/<id>.csv    uploaded bytes
//!   datasets/<id>.json   DatasetMeta
//!   tasks/<id>.json      TaskRecord
//!   results/<id>.json    report bytes, written once
//!   sessions/<id>.log    dedup decisions, one JSON event per line
//! ```

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use fdscope_core::relation::load_csv;
use fdscope_core::{CsvConfig, Relation};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn now_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    // Directory fsync is unsupported on some platforms; the rename is still atomic.
    match File::open(dir).and_then(|d| d.sync_all()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::PermissionDenied => Ok(()),
        Err(e) => Err(e),
    }
}

/// Replaces `path` with `bytes` via a synced temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("store paths have parents");
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("file")
    ));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    sync_dir(dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub id: String,
    pub name: String,
    pub csv: CsvConfig,
    pub rows: usize,
    pub attributes: Vec<String>,
    pub bytes: usize,
    pub created_at: u64,
    /// Set for datasets produced by a finished dedup session.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_from: Option<String>,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    relations: Mutex<HashMap<String, Arc<Relation>>>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Store> {
        let root = root.into();
        for sub in ["datasets", "tasks", "results", "sessions"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Store {
            root,
            relations: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn task_path(&self, id: &str) -> PathBuf {
        self.root.join("tasks").join(format!("{id}.json"))
    }

    pub fn result_path(&self, id: &str) -> PathBuf {
        self.root.join("results").join(format!("{id}.json"))
    }

    pub fn session_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.log"))
    }

    fn dataset_path(&self, id: &str, ext: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{id}.{ext}"))
    }

    /// Content address of a dataset: parse options, lineage and raw bytes.
    pub fn dataset_id(bytes: &[u8], csv: &CsvConfig, derived_from: Option<&str>) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(csv).expect("config serializes"));
        h.update([0]);
        if let Some(parent) = derived_from {
            h.update(parent.as_bytes());
        }
        h.update([0]);
        h.update(bytes);
        format!("ds-{}", &hex(&h.finalize())[..24])
    }

    /// Parses and stores an upload. Returns the metadata and whether the
    /// dataset was new.
    pub fn put_dataset(
        &self,
        bytes: &[u8],
        csv: &CsvConfig,
        name: &str,
        derived_from: Option<String>,
    ) -> fdscope_core::Result<(DatasetMeta, bool)> {
        let id = Self::dataset_id(bytes, csv, derived_from.as_deref());
        if let Some(meta) = self.dataset_meta(&id) {
            return Ok((meta, false));
        }
        let relation = load_csv(bytes, csv)?.with_name(name);
        let meta = DatasetMeta {
            id: id.clone(),
            name: name.to_owned(),
            csv: csv.clone(),
            rows: relation.row_count(),
            attributes: relation.attribute_names(),
            bytes: bytes.len(),
            created_at: now_millis(),
            derived_from,
        };
        atomic_write(&self.dataset_path(&id, "csv"), bytes)?;
        atomic_write(
            &self.dataset_path(&id, "json"),
            &serde_json::to_vec_pretty(&meta).expect("meta serializes"),
        )?;
        self.relations.lock().unwrap().insert(id, Arc::new(relation));
        Ok((meta, true))
    }

    pub fn dataset_meta(&self, id: &str) -> Option<DatasetMeta> {
        if !valid_id(id) {
            return None;
        }
        let bytes = fs::read(self.dataset_path(id, "json")).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn dataset_bytes(&self, id: &str) -> Option<Vec<u8>> {
        if !valid_id(id) {
            return None;
        }
        fs::read(self.dataset_path(id, "csv")).ok()
    }

    pub fn relation(&self, id: &str) -> Option<Arc<Relation>> {
        if let Some(r) = self.relations.lock().unwrap().get(id) {
            return Some(r.clone());
        }
        let meta = self.dataset_meta(id)?;
        let bytes = self.dataset_bytes(id)?;
        let relation = Arc::new(load_csv(bytes.as_slice(), &meta.csv).ok()?.with_name(meta.name));
        self.relations
            .lock()
            .unwrap()
            .insert(id.to_owned(), relation.clone());
        Some(relation)
    }

    /// Writes a result file unless one exists; completed results never change.
    pub fn put_result_once(&self, id: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.result_path(id);
        if path.exists() {
            return Ok(());
        }
        atomic_write(&path, bytes)
    }

    pub fn result(&self, id: &str) -> Option<Vec<u8>> {
        if !valid_id(id) {
            return None;
        }
        fs::read(self.result_path(id)).ok()
    }

    /// Appends one line and syncs it before returning.
    pub fn append_line(&self, path: &Path, line: &[u8]) -> io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        let mut buf = line.to_vec();
        buf.push(b'\n');
        f.write_all(&buf)?;
        f.sync_all()
    }
}

/// Ids are generated by the service; anything else never touches the disk.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}
