use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{NvmError, QlId};

/// Buffer holding the runtime's task bookkeeping.
pub const CONTROL_BUFFER: &str = "task_control_block";

/// Control and system buffers always resolve to the protected segment.
pub fn is_control_buffer(buffer_id: &str) -> bool {
    buffer_id == CONTROL_BUFFER || buffer_id.starts_with("sys.")
}

/// A region of NVM written at a single quality level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemorySegment {
    pub name: String,
    pub ql: QlId,
    pub protected: bool,
}

impl MemorySegment {
    pub fn new(name: impl Into<String>, ql: QlId, protected: bool) -> Result<Self, NvmError> {
        let name = name.into();
        if protected && ql != QlId::Q0 {
            return Err(NvmError::InvalidSegment(format!("protected segment `{name}` must be Q0, got {ql}")));
        }
        Ok(Self { name, ql, protected })
    }
}

/// Segments plus the buffer-to-segment bindings.
///
/// A binding named `*` acts as the fallback for buffers without an explicit entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentCatalog {
    segments: Vec<MemorySegment>,
    bindings: BTreeMap<String, usize>,
}

impl Default for SegmentCatalog {
    /// A protected control segment plus one approximate segment catching every data buffer.
    fn default() -> Self {
        Self::two_segment(QlId::Q0)
    }
}

impl SegmentCatalog {
    pub fn new(segments: Vec<MemorySegment>, bindings: BTreeMap<String, String>) -> Result<Self, NvmError> {
        if segments.is_empty() {
            return Err(NvmError::InvalidSegment("catalog has no segments".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &segments {
            if !seen.insert(s.name.as_str()) {
                return Err(NvmError::InvalidSegment(format!("duplicate segment `{}`", s.name)));
            }
            if s.protected && s.ql != QlId::Q0 {
                return Err(NvmError::InvalidSegment(format!("protected segment `{}` must be Q0", s.name)));
            }
        }
        let mut resolved = BTreeMap::new();
        for (buffer, seg) in bindings {
            let idx = segments
                .iter()
                .position(|s| s.name == seg)
                .ok_or_else(|| NvmError::InvalidSegment(format!("buffer `{buffer}` bound to unknown segment `{seg}`")))?;
            resolved.insert(buffer, idx);
        }
        Ok(Self {
            segments,
            bindings: resolved,
        })
    }

    /// `control` (protected, Q0) and `approx` at `ql`, with every data buffer in `approx`.
    pub fn two_segment(ql: QlId) -> Self {
        let segments = vec![
            MemorySegment::new("control", QlId::Q0, true).expect("Q0 is valid for a protected segment"),
            MemorySegment::new("approx", ql, false).expect("unprotected segments accept any level"),
        ];
        let bindings = [("*".to_string(), "approx".to_string())].into_iter().collect();
        Self::new(segments, bindings).expect("static catalog is valid")
    }

    pub fn segments(&self) -> &[MemorySegment] {
        &self.segments
    }

    /// Returns the segment that `buffer_id` is persisted in.
    pub fn lookup(&self, buffer_id: &str) -> Result<&MemorySegment, NvmError> {
        if is_control_buffer(buffer_id) {
            if let Some(s) = self.segments.iter().find(|s| s.protected) {
                return Ok(s);
            }
        }
        self.bindings
            .get(buffer_id)
            .or_else(|| self.bindings.get("*"))
            .map(|&i| &self.segments[i])
            .ok_or_else(|| NvmError::UnknownBuffer(buffer_id.to_string()))
    }

    /// Copy with every unprotected segment moved to `ql`.
    pub fn with_approx_ql(&self, ql: QlId) -> Self {
        let mut out = self.clone();
        for s in out.segments.iter_mut().filter(|s| !s.protected) {
            s.ql = ql;
        }
        out
    }
}

/// Free-function form of [`SegmentCatalog::lookup`].
pub fn segment_lookup<'a>(catalog: &'a SegmentCatalog, buffer_id: &str) -> Result<&'a MemorySegment, NvmError> {
    catalog.lookup(buffer_id)
}
