//! Hybrid quantum-classical convolutional detectors for malicious network flows.
//!
//! The crate is layered bottom-up:
//!
//! - [`quantum`]: dense statevector simulator, embeddings, PQC and analytic gradients.
//! - [`nn`]: classical layers with reverse-mode gradients and optimizers.
//! - [`models`]: the six detector architectures, training loop and checkpoints.
//! - [`flow`]: flow-feature CSV ingestion, normalization and experiment splits.
//! - [`runner`]: experiment orchestration, aggregation and report emission.

pub mod flow;
pub mod models;
pub mod nn;
pub mod quantum;
pub mod runner;

mod fsutil {
    use std::io::Write;
    use std::path::Path;

    /// Writes `bytes` to a sibling temp file, then renames it over `path`.
    pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(format!(".tmp{}", std::process::id()));
        let tmp = std::path::PathBuf::from(tmp);
        let result = (|| {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            std::fs::rename(&tmp, path)
        })();
        if result.is_err() {
            let _ = std::fs::remove_file(&tmp);
        }
        result
    }
}
