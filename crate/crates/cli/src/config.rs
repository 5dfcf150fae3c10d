//! Option defaults read from a TOML file.
//!
//! ```toml
//! threads = 4
//! output = "json"
//!
//! [csv]
//! separator = ";"
//! null = "NA"
//!
//! [afd]
//! threshold = "1/20"
//! max_lhs = 2
//! ```
//!
//! Each command table takes the same keys as the matching task parameters
//! of the HTTP service, plus the command's file options (`journal`,
//! `output_csv`, `answers`, `auto` for dedup, `state` for anomaly).

use std::path::{Path, PathBuf};

use fdscope_core::CsvConfig;
use serde::Deserialize;
use serde_json::{Map, Value as Json};

use crate::args::{AutoMode, CsvArgs, OutputMode};

pub type Table = Map<String, Json>;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub output: Option<OutputMode>,
    pub csv: CsvFile,
    pub fd: Table,
    pub afd: Table,
    pub mfd: Table,
    pub typo: Table,
    pub dedup: Table,
    pub anomaly: Table,
    pub serve: ServeFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvFile {
    pub separator: Option<char>,
    pub header: Option<bool>,
    pub null: Option<String>,
    pub nulls_distinct: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeFile {
    pub addr: Option<String>,
    pub storage: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Command-only keys of the dedup table.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupFile {
    pub auto: Option<AutoMode>,
    pub answers: Option<PathBuf>,
    pub journal: Option<PathBuf>,
    pub output_csv: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn csv_config(&self, flags: &CsvArgs) -> CsvConfig {
        let d = CsvConfig::default();
        CsvConfig {
            separator: flags.separator.or(self.csv.separator).unwrap_or(d.separator),
            has_header: !flags.no_header && self.csv.header.unwrap_or(d.has_header),
            null_token: flags.null.clone().or_else(|| self.csv.null.clone()).unwrap_or(d.null_token),
            nulls_distinct: flags.nulls_distinct || self.csv.nulls_distinct.unwrap_or(d.nulls_distinct),
        }
    }
}

/// Moves `keys` out of `table` into their own document.
pub fn split_off<T: for<'de> Deserialize<'de>>(table: &mut Table, keys: &[&str]) -> Result<T, String> {
    let mut own = Table::new();
    for k in keys {
        if let Some(v) = table.remove(*k) {
            own.insert((*k).to_owned(), v);
        }
    }
    serde_json::from_value(Json::Object(own)).map_err(|e| e.to_string())
}

/// Builds task parameters: file values first, then every flag that was given.
#[derive(Debug, Default)]
pub struct Params(pub Table);

impl Params {
    pub fn from_file(table: &Table) -> Params {
        Params(table.clone())
    }

    pub fn set(&mut self, key: &str, value: Option<impl Into<Json>>) -> &mut Self {
        if let Some(v) = value {
            self.0.insert(key.to_owned(), v.into());
        }
        self
    }

    pub fn set_list(&mut self, key: &str, values: &[String]) -> &mut Self {
        if !values.is_empty() {
            self.0.insert(key.to_owned(), values.iter().map(|v| Json::from(v.as_str())).collect());
        }
        self
    }

    /// Switches only turn options on; a config file value stays otherwise.
    pub fn set_flag(&mut self, key: &str, on: bool) -> &mut Self {
        if on {
            self.0.insert(key.to_owned(), Json::Bool(true));
        }
        self
    }

    pub fn into_json(self) -> Json {
        Json::Object(self.0)
    }
}
