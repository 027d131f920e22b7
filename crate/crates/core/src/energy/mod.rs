//! Platform energy model: per-cycle MCU energy, persistence and storage terms,
//! savings against the Q0 baseline, and capacitor sizing.

mod capacitor;
mod cost;
mod mcu;

pub use capacitor::{capacitor_sizing_plan, size_capacitor, CapSlot, Capacitor, SizingPlan, DEFAULT_LEAK_PW_PER_UF};
pub use cost::{energy_per_cycle, savings_vs_baseline, total_energy, CostReport, EnergyBreakdown};
pub use mcu::{McuCatalog, McuProfile, WorkloadClass};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("cost report inconsistent with access width: {bits_written} bits written, expected {expected}")]
    InconsistentCost { bits_written: u64, expected: u64 },
    #[error("baseline energy is zero")]
    ZeroBaseline,
    #[error("invalid voltages: need v_on > v_off > 0, got v_on = {v_on}, v_off = {v_off}")]
    InvalidVoltages { v_on: f64, v_off: f64 },
    #[error("sizing margin must be at least 1, got {0}")]
    InvalidMargin(f64),
    #[error("energy must be finite and non-negative, got {0} pJ")]
    InvalidEnergy(f64),
    #[error("invalid MCU profile `{name}`: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("unknown MCU `{0}`")]
    UnknownMcu(String),
    #[error("capacitor sizing plan needs at least one task")]
    EmptyPlan,
}
