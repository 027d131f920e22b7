//! Task-based intermittent execution over a double-buffered NVM image.

mod exec;
mod harvest;
mod image;

use std::fmt;
use std::sync::Arc;

pub use exec::{golden_run, run_pipeline, ChargePolicy, ExecutionTrace, GoldenRun, Platform, Runtime, RuntimeSettings, TaskTrace};
pub use harvest::{charge, parse_samples, FailureSchedule, HarvestModel};
pub use image::NvmImage;

use crate::energy::{EnergyError, WorkloadClass};
use crate::nvm::NvmError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("task `{task}` needs {need_pj:.0} pJ per attempt but its capacitor holds {usable_pj:.0} pJ")]
    NonTerminating { task: String, need_pj: f64, usable_pj: f64 },
    #[error("capacitor never reaches v_on: harvest {harvest_pw} pW does not exceed leakage {leak_pw} pW")]
    NeverCharges { harvest_pw: f64, leak_pw: f64 },
    #[error("buffer `{0}` has never been committed")]
    MissingBuffer(String),
    #[error("task `{task}` returned {got} outputs, declared {declared}")]
    TaskContract { task: String, got: usize, declared: usize },
    #[error("trace line {line}: {msg}")]
    BadTrace { line: usize, msg: String },
    #[error(transparent)]
    Nvm(#[from] NvmError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// What one execution of a task produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskOutput {
    /// One byte buffer per declared output, in declaration order.
    pub buffers: Vec<Vec<u8>>,
    /// Cycles before ISA scaling.
    pub base_cycles: u64,
}

type ComputeFn = dyn Fn(&[&[u8]]) -> TaskOutput + Send + Sync;

/// A transactional unit of work: reads committed inputs, commits its outputs on completion.
#[derive(Clone)]
pub struct Task {
    pub id: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub workload: WorkloadClass,
    compute: Arc<ComputeFn>,
}

impl fmt::Debug for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Task")
            .field("id", &self.id)
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .field("workload", &self.workload)
            .finish_non_exhaustive()
    }
}

impl Task {
    /// `compute` must be a pure function of its input buffers.
    pub fn new<F>(id: impl Into<String>, inputs: &[&str], outputs: &[&str], workload: WorkloadClass, compute: F) -> Self
    where
        F: Fn(&[&[u8]]) -> TaskOutput + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            workload,
            compute: Arc::new(compute),
        }
    }

    pub fn execute(&self, inputs: &[&[u8]]) -> Result<TaskOutput, RuntimeError> {
        let out = (self.compute)(inputs);
        if out.buffers.len() != self.outputs.len() {
            return Err(RuntimeError::TaskContract {
                task: self.id.clone(),
                got: out.buffers.len(),
                declared: self.outputs.len(),
            });
        }
        Ok(out)
    }
}

/// Tasks in execution order.
#[derive(Debug, Clone, Default)]
pub struct Pipeline {
    pub tasks: Vec<Task>,
}

impl Pipeline {
    pub fn new(tasks: Vec<Task>) -> Self {
        Self { tasks }
    }
}
