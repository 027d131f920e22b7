//! Workloads: input generators, task pipelines and their quality metric.

pub mod codec;
pub mod edge;
pub mod fft;
pub mod nn;
pub mod only_writes;
mod pgm;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use pgm::{read_pgm, write_pgm};

use crate::energy::WorkloadClass;
use crate::metrics::{Metric, MetricError, QorValue};
use crate::runtime::{NvmImage, Pipeline, RuntimeError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("invalid benchmark `{0}`")]
    InvalidSpec(String),
    #[error("benchmark output missing: {0}")]
    MissingOutput(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("weight blob: {0}")]
    Blob(String),
}

/// Cycles charged per abstract operation, before ISA scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCoefficients {
    pub mac: f64,
    /// One radix-2 Q15 butterfly with software multiplies.
    pub butterfly: f64,
    pub pixel_op: f64,
}

impl Default for CostCoefficients {
    fn default() -> Self {
        Self {
            mac: 1.0,
            butterfly: 96.0,
            pixel_op: 1.0,
        }
    }
}

impl CostCoefficients {
    pub(crate) fn cycles(ops: u64, per_op: f64) -> u64 {
        (ops as f64 * per_op).round() as u64
    }
}

/// A workload that can be instantiated for any input seed.
pub trait Benchmark: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn workload(&self) -> WorkloadClass;
    fn metric(&self) -> Option<Metric>;
    fn pipeline(&self) -> &Pipeline;
    /// NVM contents before the first task, one image per pipeline execution in a run.
    fn inputs(&self, seed: u64) -> Vec<NvmImage>;
    /// Compares committed outputs with the golden ones. `None` when the benchmark has no metric.
    fn qor(&self, approx: &[NvmImage], golden: &[NvmImage]) -> Result<Option<QorValue>, BenchError>;
    /// Volatile working set the MCU must hold, in bytes.
    fn memory_bytes(&self) -> u64;
    /// Human-inspectable renderings of the committed outputs: `(file name, contents)`.
    fn dump(&self, images: &[NvmImage]) -> Result<Vec<(String, Vec<u8>)>, BenchError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BenchSpec {
    Fft { n: usize },
    Codec { w: usize, h: usize },
    Edge { w: usize, h: usize },
    Nn { side: usize, quantized: bool },
    OnlyWrites { n_bytes: usize },
}

impl BenchSpec {
    pub fn build(&self, coeffs: &CostCoefficients, nn_batch: usize) -> Result<Arc<dyn Benchmark>, BenchError> {
        Ok(match *self {
            BenchSpec::Fft { n } => Arc::new(fft::FftBench::new(n, *coeffs)?),
            BenchSpec::Codec { w, h } => Arc::new(codec::CodecBench::new(w, h, *coeffs)?),
            BenchSpec::Edge { w, h } => Arc::new(edge::EdgeBench::new(w, h, *coeffs)?),
            BenchSpec::Nn { side, quantized } => Arc::new(nn::NnBench::new(side, quantized, nn_batch, *coeffs)?),
            BenchSpec::OnlyWrites { n_bytes } => Arc::new(only_writes::OnlyWritesBench::new(n_bytes)?),
        })
    }

    pub fn has_metric(&self) -> bool {
        !matches!(self, BenchSpec::OnlyWrites { .. })
    }
}

impl fmt::Display for BenchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchSpec::Fft { n } => write!(f, "fft_{n}"),
            BenchSpec::Codec { w, h } => write!(f, "codec_{w}x{h}"),
            BenchSpec::Edge { w, h } => write!(f, "edge_{w}x{h}"),
            BenchSpec::Nn { side, quantized } => {
                write!(f, "nn_{side}_{}", if *quantized { "quant" } else { "float" })
            }
            BenchSpec::OnlyWrites { n_bytes } => write!(f, "only_writes_{n_bytes}"),
        }
    }
}

fn parse_dims(s: &str) -> Option<(usize, usize)> {
    let (w, h) = s.split_once('x')?;
    Some((w.parse().ok()?, h.parse().ok()?))
}

impl FromStr for BenchSpec {
    type Err = BenchError;

    /// Accepts the display form (`fft_256`, `nn_32_quant`, ...) or a bare family name for defaults.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchError::InvalidSpec(s.to_string());
        let spec = match s {
            "fft" => BenchSpec::Fft { n: 256 },
            "codec" => BenchSpec::Codec { w: 64, h: 64 },
            "edge" => BenchSpec::Edge { w: 64, h: 64 },
            "only_writes" => BenchSpec::OnlyWrites { n_bytes: 4096 },
            "nn_quant" => BenchSpec::Nn {
                side: 16,
                quantized: true,
            },
            "nn_float" => BenchSpec::Nn {
                side: 16,
                quantized: false,
            },
            _ => {
                if let Some(n) = s.strip_prefix("fft_") {
                    BenchSpec::Fft {
                        n: n.parse().map_err(|_| bad())?,
                    }
                } else if let Some(d) = s.strip_prefix("codec_") {
                    let (w, h) = parse_dims(d).ok_or_else(bad)?;
                    BenchSpec::Codec { w, h }
                } else if let Some(d) = s.strip_prefix("edge_") {
                    let (w, h) = parse_dims(d).ok_or_else(bad)?;
                    BenchSpec::Edge { w, h }
                } else if let Some(n) = s.strip_prefix("only_writes_") {
                    BenchSpec::OnlyWrites {
                        n_bytes: n.parse().map_err(|_| bad())?,
                    }
                } else if let Some(rest) = s.strip_prefix("nn_") {
                    let (side, kind) = rest.split_once('_').ok_or_else(bad)?;
                    let quantized = match kind {
                        "quant" => true,
                        "float" => false,
                        _ => return Err(bad()),
                    };
                    BenchSpec::Nn {
                        side: side.parse().map_err(|_| bad())?,
                        quantized,
                    }
                } else {
                    return Err(bad());
                }
            }
        };
        Ok(spec)
    }
}

impl Serialize for dyn Benchmark {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

pub(crate) fn i16s_to_bytes(v: &[i16]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub(crate) fn bytes_to_i16s(b: &[u8]) -> Vec<i16> {
    b.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect()
}

pub(crate) fn f32s_to_bytes(v: &[f32]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub(crate) fn bytes_to_f32s(b: &[u8]) -> Vec<f32> {
    b.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()
}

pub(crate) fn output<'a>(image: &'a NvmImage, name: &str) -> Result<&'a [u8], BenchError> {
    image.read(name).map_err(|_| BenchError::MissingOutput(name.to_string()))
}
