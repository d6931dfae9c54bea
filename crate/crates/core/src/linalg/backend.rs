use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{svd::svd_full, DenseMatrix, LinalgResult, SvdResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendId {
    /// Host LAPACK.
    Reference,
    /// Whatever has been registered through [`BackendRegistry::register_external`].
    External,
}

/// Which backend to prefer, and the bond dimension from which it pays off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendPolicy {
    pub accelerator_threshold: usize,
    pub backend: BackendId,
}

impl Default for BackendPolicy {
    fn default() -> Self {
        Self {
            accelerator_threshold: 64,
            backend: BackendId::External,
        }
    }
}

/// An SVD provider living outside the host reference path (e.g. a device
/// library). Implementations must honour the [`SvdResult`] invariants.
pub trait SvdBackend: Send + Sync {
    fn name(&self) -> &str;
    fn svd(&self, m: &DenseMatrix) -> LinalgResult<SvdResult>;
}

#[derive(Default)]
pub struct BackendRegistry {
    external: Option<Box<dyn SvdBackend>>,
}

impl fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendRegistry")
            .field("external", &self.external.as_ref().map(|b| b.name().to_owned()))
            .finish()
    }
}

impl BackendRegistry {
    /// Registry with only the reference backend.
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the previously registered backend, if any.
    pub fn register_external(&mut self, backend: Box<dyn SvdBackend>) -> Option<Box<dyn SvdBackend>> {
        self.external.replace(backend)
    }

    pub fn has_external(&self) -> bool {
        self.external.is_some()
    }

    /// Small bonds stay on the host; large ones go to the configured backend
    /// when it exists.
    pub fn select(&self, policy: &BackendPolicy, chi: usize) -> BackendId {
        if chi < policy.accelerator_threshold.max(1) {
            return BackendId::Reference;
        }
        match policy.backend {
            BackendId::External if self.has_external() => BackendId::External,
            _ => BackendId::Reference,
        }
    }

    pub fn svd(&self, policy: &BackendPolicy, chi: usize, m: &DenseMatrix) -> LinalgResult<SvdResult> {
        match (self.select(policy, chi), &self.external) {
            (BackendId::External, Some(ext)) => ext.svd(m),
            _ => svd_full(m),
        }
    }
}

static GLOBAL: OnceLock<BackendRegistry> = OnceLock::new();

/// Installs the process-wide registry. Only the first call wins; the rejected
/// registry is handed back.
pub fn install_registry(registry: BackendRegistry) -> Result<(), BackendRegistry> {
    GLOBAL.set(registry)
}

pub fn global_registry() -> &'static BackendRegistry {
    GLOBAL.get_or_init(BackendRegistry::new)
}

/// [`BackendRegistry::select`] against the process-wide registry.
pub fn select_backend(policy: &BackendPolicy, chi: usize) -> BackendId {
    global_registry().select(policy, chi)
}
