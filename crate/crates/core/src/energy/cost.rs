use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use super::{EnergyError, McuProfile};
use crate::nvm::QualityLevel;

/// Counters an execution accumulates: compute cycles and persistence traffic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostReport {
    pub cycles: u64,
    pub mem_accesses: u64,
    pub bits_written: u64,
}

impl CostReport {
    pub fn compute(cycles: u64) -> Self {
        Self {
            cycles,
            ..Self::default()
        }
    }

    /// Persisting `n_bits` through `w`-bit accesses. Partial words are padded to a full access.
    pub fn persist(n_bits: u64, access_width_bits: u32) -> Self {
        let w = u64::from(access_width_bits);
        let mem_accesses = n_bits.div_ceil(w);
        Self {
            cycles: 0,
            mem_accesses,
            bits_written: mem_accesses * w,
        }
    }

    pub fn check_width(&self, access_width_bits: u32) -> Result<(), EnergyError> {
        let expected = self.mem_accesses * u64::from(access_width_bits);
        if self.bits_written != expected {
            return Err(EnergyError::InconsistentCost {
                bits_written: self.bits_written,
                expected,
            });
        }
        Ok(())
    }
}

impl Add for CostReport {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            cycles: self.cycles + rhs.cycles,
            mem_accesses: self.mem_accesses + rhs.mem_accesses,
            bits_written: self.bits_written + rhs.bits_written,
        }
    }
}

impl AddAssign for CostReport {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sum for CostReport {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Energy split into MCU compute, MCU persistence work and NVM storage, in pJ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub e_mcu_compute_pj: f64,
    pub e_mcu_persist_pj: f64,
    pub e_storage_pj: f64,
    pub e_total_pj: f64,
}

impl EnergyBreakdown {
    pub fn new(compute: f64, persist: f64, storage: f64) -> Self {
        Self {
            e_mcu_compute_pj: compute,
            e_mcu_persist_pj: persist,
            e_storage_pj: storage,
            e_total_pj: compute + persist + storage,
        }
    }

    /// Every component multiplied by `f`.
    pub fn scaled(&self, f: f64) -> Self {
        Self::new(self.e_mcu_compute_pj * f, self.e_mcu_persist_pj * f, self.e_storage_pj * f)
    }
}

impl Add for EnergyBreakdown {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.e_mcu_compute_pj + rhs.e_mcu_compute_pj,
            self.e_mcu_persist_pj + rhs.e_mcu_persist_pj,
            self.e_storage_pj + rhs.e_storage_pj,
        )
    }
}

impl AddAssign for EnergyBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Energy of one MCU cycle in pJ. Numerically equal to the active power in uW/MHz.
pub fn energy_per_cycle(mcu: &McuProfile) -> f64 {
    mcu.active_power_uw_per_mhz
}

/// Prices `cost` on `mcu` with NVM writes at `ql`.
///
/// ```
/// use imc_sim::energy::{total_energy, CostReport, McuCatalog};
/// use imc_sim::nvm::{QlCatalog, QlId};
/// let m33 = McuCatalog::default().get("M33").unwrap().clone();
/// let cost = CostReport { cycles: 1000, mem_accesses: 100, bits_written: 800 };
/// let e = total_energy(&cost, &m33, QlCatalog::default().get(QlId::Q0)).unwrap();
/// assert_eq!(e.e_total_pj, 146_800.0);
/// ```
pub fn total_energy(cost: &CostReport, mcu: &McuProfile, ql: &QualityLevel) -> Result<EnergyBreakdown, EnergyError> {
    cost.check_width(mcu.access_width_bits)?;
    let e_cycle = energy_per_cycle(mcu);
    let accesses = cost.mem_accesses as f64;
    Ok(EnergyBreakdown::new(
        e_cycle * cost.cycles as f64,
        mcu.cycles_per_mem_access * e_cycle * accesses,
        f64::from(mcu.access_width_bits) * ql.write_energy_per_bit_pj * accesses,
    ))
}

/// Fraction of the baseline's total energy that `e` saves.
pub fn savings_vs_baseline(e: &EnergyBreakdown, e_q0: &EnergyBreakdown) -> Result<f64, EnergyError> {
    if e_q0.e_total_pj <= 0.0 {
        return Err(EnergyError::ZeroBaseline);
    }
    Ok(1.0 - e.e_total_pj / e_q0.e_total_pj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::McuCatalog;
    use crate::nvm::{QlCatalog, QlId};
    use proptest::prelude::*;

    fn m33() -> McuProfile {
        McuCatalog::default().get("M33").unwrap().clone()
    }

    fn ql(id: QlId) -> QualityLevel {
        *QlCatalog::default().get(id)
    }

    #[test]
    fn per_cycle_energy() {
        let cat = McuCatalog::default();
        assert_eq!(energy_per_cycle(cat.get("MSP430G").unwrap()), 503.0);
        assert_eq!(energy_per_cycle(cat.get("M33").unwrap()), 12.0);
    }

    #[test]
    fn zero_cost_is_zero_energy() {
        let e = total_energy(&CostReport::default(), &m33(), &ql(QlId::Q2)).unwrap();
        assert_eq!(e, EnergyBreakdown::default());
    }

    #[test]
    fn hand_computed_breakdowns() {
        let cost = CostReport {
            cycles: 1000,
            mem_accesses: 100,
            bits_written: 800,
        };
        let q0 = total_energy(&cost, &m33(), &ql(QlId::Q0)).unwrap();
        assert_eq!(
            (q0.e_mcu_compute_pj, q0.e_mcu_persist_pj, q0.e_storage_pj, q0.e_total_pj),
            (12_000.0, 1_200.0, 133_600.0, 146_800.0)
        );
        let q4 = total_energy(&cost, &m33(), &ql(QlId::Q4)).unwrap();
        assert_eq!((q4.e_storage_pj, q4.e_total_pj), (34_400.0, 47_600.0));
        let s = savings_vs_baseline(&q4, &q0).unwrap();
        assert_eq!(format!("{:.1}", s * 100.0), "67.6");
    }

    #[test]
    fn inconsistent_cost_rejected() {
        let cost = CostReport {
            cycles: 0,
            mem_accesses: 10,
            bits_written: 79,
        };
        assert_eq!(
            total_energy(&cost, &m33(), &ql(QlId::Q0)),
            Err(EnergyError::InconsistentCost {
                bits_written: 79,
                expected: 80
            })
        );
    }

    #[test]
    fn storage_only_savings_equal_bit_energy_ratios() {
        let mut mcu = m33();
        mcu.cycles_per_mem_access = 0.0;
        let cost = CostReport::persist(4096 * 8, 8);
        let base = total_energy(&cost, &mcu, &ql(QlId::Q0)).unwrap();
        let q4 = total_energy(&cost, &mcu, &ql(QlId::Q4)).unwrap();
        let q1 = total_energy(&cost, &mcu, &ql(QlId::Q1)).unwrap();
        assert!((savings_vs_baseline(&q4, &base).unwrap() - (1.0 - 43.0 / 167.0)).abs() < 1e-12);
        assert!((q1.e_total_pj / base.e_total_pj - 94.0 / 167.0).abs() < 1e-12);
        assert_eq!(savings_vs_baseline(&base, &base).unwrap(), 0.0);
    }

    #[test]
    fn zero_baseline_rejected() {
        let z = EnergyBreakdown::default();
        assert_eq!(savings_vs_baseline(&z, &z), Err(EnergyError::ZeroBaseline));
    }

    #[test]
    fn persist_pads_to_full_access() {
        assert_eq!(
            CostReport::persist(9, 8),
            CostReport {
                cycles: 0,
                mem_accesses: 2,
                bits_written: 16
            }
        );
        assert_eq!(CostReport::persist(0, 8).mem_accesses, 0);
    }

    proptest! {
        #[test]
        fn energy_non_increasing_in_ql(cycles in 0u64..1_000_000, accesses in 0u64..100_000) {
            let cost = CostReport { cycles, mem_accesses: accesses, bits_written: accesses * 8 };
            let mcu = m33();
            let totals: Vec<f64> = QlId::ALL.iter()
                .map(|&id| total_energy(&cost, &mcu, &ql(id)).unwrap().e_total_pj)
                .collect();
            for w in totals.windows(2) {
                if accesses > 0 { prop_assert!(w[1] < w[0]); } else { prop_assert!(w[1] <= w[0]); }
            }
        }

        #[test]
        fn total_is_sum_of_parts(cycles in 0u64..1_000_000, accesses in 0u64..100_000, q in 0usize..5) {
            let cost = CostReport { cycles, mem_accesses: accesses, bits_written: accesses * 8 };
            let e = total_energy(&cost, &m33(), &ql(QlId::ALL[q])).unwrap();
            prop_assert_eq!(e.e_total_pj, e.e_mcu_compute_pj + e.e_mcu_persist_pj + e.e_storage_pj);
        }

        #[test]
        fn more_compute_dilutes_savings(accesses in 1u64..10_000, c1 in 0u64..1_000_000, dc in 0u64..1_000_000, q in 1usize..5) {
            let mcu = m33();
            let saving = |cycles: u64| {
                let cost = CostReport { cycles, mem_accesses: accesses, bits_written: accesses * 8 };
                let e = total_energy(&cost, &mcu, &ql(QlId::ALL[q])).unwrap();
                let b = total_energy(&cost, &mcu, &ql(QlId::Q0)).unwrap();
                savings_vs_baseline(&e, &b).unwrap()
            };
            prop_assert!(saving(c1 + dc) <= saving(c1));
        }
    }
}
