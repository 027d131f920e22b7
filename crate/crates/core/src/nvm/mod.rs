//! STT-MRAM model: quality levels, segments, write energy and write-error injection.

mod inject;
mod quality;
mod segment;

pub use inject::{inject_write, InjectionMode, InjectionPolicy};
pub use quality::{write_energy, QlCatalog, QlId, QualityLevel};
pub use segment::{is_control_buffer, segment_lookup, MemorySegment, SegmentCatalog, CONTROL_BUFFER};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NvmError {
    #[error("unknown quality level `{0}` (expected Q0..Q4)")]
    UnknownQualityLevel(String),
    #[error("invalid quality-level catalog: {0}")]
    InvalidCatalog(String),
    #[error("old/new length mismatch: new has {new} bytes, old has {old}")]
    LengthMismatch { new: usize, old: usize },
    #[error("write-error rate {0} outside [0, 1]")]
    InvalidRate(f64),
    #[error("unknown injection mode `{0}` (expected flip-new or retain-old)")]
    UnknownMode(String),
    #[error("no segment binding for buffer `{0}`")]
    UnknownBuffer(String),
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
}
