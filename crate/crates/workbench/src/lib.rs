//! File formats, fixtures and orchestration around `nsaqkd-core`.
//!
//! The core crate is pure computation; everything that touches the
//! filesystem, serde schemas, or thread pools lives here.

// Negated comparisons below are deliberate NaN guards: `!(x > 0.0)` rejects
// NaN where `x <= 0.0` would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod config;
pub mod report;
pub mod runner;
pub mod stats;
pub mod topology;

pub use config::{Protocol, WorkbenchConfig};
pub use report::ReportFile;
pub use stats::StatsFile;
pub use topology::TopologyFile;

/// Format tag written into every stats file.
pub const STATS_FORMAT: &str = "nsaqkd-stats-v1";
/// Format tag written into every report file.
pub const REPORT_FORMAT: &str = "nsaqkd-report-v1";
/// Format tag expected in topology files.
pub const TOPOLOGY_FORMAT: &str = "nsaqkd-topology-v1";

/// Environment variable naming the default directory for config and fixture
/// lookups.
pub const CONFIG_DIR_ENV: &str = "NSAQKD_CONFIG_DIR";

use std::path::{Path, PathBuf};

/// Resolve a user-supplied path: used verbatim when it exists, otherwise
/// retried under [`CONFIG_DIR_ENV`].
pub fn resolve_path(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    if let Ok(dir) = std::env::var(CONFIG_DIR_ENV) {
        let candidate = Path::new(&dir).join(path);
        if candidate.exists() {
            return candidate;
        }
    }
    path.to_path_buf()
}
