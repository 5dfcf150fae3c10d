//! Data-quality workflows driven by the dependency engines.

pub mod anomaly;
pub mod dedup;
pub mod typo;
