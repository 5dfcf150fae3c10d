use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Cooperative cancellation flag, checked between lattice levels.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

/// Execution knobs shared by the engines. Results never depend on them.
#[derive(Debug, Clone, Default)]
pub struct ExecConfig {
    /// Worker threads; 0 uses the ambient rayon pool.
    pub threads: usize,
    pub cancel: Option<CancelToken>,
}

impl ExecConfig {
    pub fn with_threads(threads: usize) -> Self {
        ExecConfig {
            threads,
            cancel: None,
        }
    }

    pub(crate) fn checkpoint(&self) -> Result<()> {
        match &self.cancel {
            Some(token) if token.is_cancelled() => Err(Error::Cancelled),
            _ => Ok(()),
        }
    }

    pub(crate) fn install<R: Send>(&self, op: impl FnOnce() -> R + Send) -> R {
        if self.threads == 0 {
            return op();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.threads).build() {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        }
    }
}
