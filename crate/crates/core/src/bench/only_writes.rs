//! Pure persistence workload: one task that writes a buffer and computes nothing.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BenchError, Benchmark};
use crate::energy::WorkloadClass;
use crate::metrics::{Metric, QorValue};
use crate::runtime::{NvmImage, Pipeline, Task, TaskOutput};

pub const OUTPUT: &str = "only_writes_out";
const PAYLOAD: &str = "only_writes_payload";

#[derive(Debug)]
pub struct OnlyWritesBench {
    n_bytes: usize,
    pipeline: Pipeline,
}

impl OnlyWritesBench {
    pub fn new(n_bytes: usize) -> Result<Self, BenchError> {
        if n_bytes == 0 {
            return Err(BenchError::InvalidSpec("only_writes needs at least one byte".into()));
        }
        let task = Task::new("write", &[PAYLOAD], &[OUTPUT], WorkloadClass::Micro, |ins| TaskOutput {
            buffers: vec![ins[0].to_vec()],
            base_cycles: 0,
        });
        Ok(Self {
            n_bytes,
            pipeline: Pipeline::new(vec![task]),
        })
    }
}

impl Benchmark for OnlyWritesBench {
    fn name(&self) -> String {
        format!("only_writes_{}", self.n_bytes)
    }

    fn workload(&self) -> WorkloadClass {
        WorkloadClass::Micro
    }

    fn metric(&self) -> Option<Metric> {
        None
    }

    fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    fn inputs(&self, seed: u64) -> Vec<NvmImage> {
        let mut data = vec![0u8; self.n_bytes];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut data);
        let mut image = NvmImage::new();
        image.preload(PAYLOAD, data);
        vec![image]
    }

    fn qor(&self, _approx: &[NvmImage], _golden: &[NvmImage]) -> Result<Option<QorValue>, BenchError> {
        Ok(None)
    }

    fn memory_bytes(&self) -> u64 {
        64
    }

    fn dump(&self, _images: &[NvmImage]) -> Result<Vec<(String, Vec<u8>)>, BenchError> {
        Ok(Vec::new())
    }
}
