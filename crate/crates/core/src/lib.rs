//! Relational dependency discovery and validation.
//!
//! The crate is organised bottom-up:
//!
//! * [`relation`] loads delimited text into a dictionary-encoded [`Relation`].
//! * [`pli`] builds and intersects stripped partitions (position list indexes).
//! * [`fd`], [`afd`] and [`mfd`] hold the exact, approximate (g1) and metric
//!   dependency engines.
//! * [`scenario`] wires the engines into the typo, deduplication and anomaly
//!   workflows.
//! * [`task`] and [`report`] describe jobs and their JSON results so that the
//!   command line and the HTTP service produce identical documents.

pub mod afd;
pub mod attrs;
pub mod error;
pub mod fd;
pub mod mfd;
pub mod pli;
pub mod ratio;
pub mod relation;
pub mod report;
pub mod scenario;
pub mod synth;
pub mod task;

mod exec;

pub use afd::{discover_afds, g1_error, single_attribute_afds, Afd};
pub use attrs::AttrSet;
pub use error::{Error, FieldError, Result};
pub use exec::{CancelToken, ExecConfig};
pub use fd::{discover_fds, fd_holds, Fd, FdSet};
pub use mfd::{cluster_diameter, distance, validate_mfd, Metric, MfdStatement, MfdVerdict};
pub use pli::StrippedPartition;
pub use ratio::Ratio;
pub use relation::{load_csv, Attribute, AttributeType, CsvConfig, Relation, Value};
