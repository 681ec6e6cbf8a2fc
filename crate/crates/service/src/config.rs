use std::net::SocketAddr;
use std::path::PathBuf;

use rcs_core::content::ExpertContact;

/// Runtime settings. The CLI fills these from flags and environment
/// variables (`LISTEN_ADDR`, `DATA_DIR`, `CONTENT_BUNDLE`,
/// `EXPERT_CONTACT_NAME`, `EXPERT_CONTACT_EMAIL`,
/// `ENFORCE_SINGLE_SUBMISSION`, `CLOCK_SKEW_MS`).
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen_addr: SocketAddr,
    pub data_dir: PathBuf,
    /// Graph file or directory; the shipped bundle when `None`.
    pub content_bundle: Option<PathBuf>,
    pub expert_contact: Option<ExpertContact>,
    pub enforce_single_submission: bool,
    pub clock_skew: chrono::Duration,
    /// Snapshot a session after this many events.
    pub snapshot_every: u64,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            listen_addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: data_dir.into(),
            content_bundle: None,
            expert_contact: None,
            enforce_single_submission: false,
            clock_skew: rcs_core::telemetry::DEFAULT_SKEW_TOLERANCE,
            snapshot_every: 16,
        }
    }
}
