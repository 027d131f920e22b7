use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::EnergyError;

/// pJ stored per uF per V^2 (1 uF * 1 V^2 = 1e-6 J = 1e6 pJ).
const PJ_PER_UF_V2: f64 = 1e6;

/// Default leakage of the medium and large capacitors, scaled by capacitance.
pub const DEFAULT_LEAK_PW_PER_UF: f64 = 25.0;

/// An energy buffer that powers the device between `v_off` and `v_on`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacitor {
    pub capacitance_uf: f64,
    pub v_on: f64,
    pub v_off: f64,
    pub v_now: f64,
    pub leak_pw: f64,
}

impl Capacitor {
    /// A capacitor sitting at `v_off`, waiting to be charged.
    pub fn new(capacitance_uf: f64, v_on: f64, v_off: f64, leak_pw: f64) -> Result<Self, EnergyError> {
        check_voltages(v_on, v_off)?;
        if !(capacitance_uf.is_finite() && capacitance_uf >= 0.0) {
            return Err(EnergyError::InvalidEnergy(capacitance_uf));
        }
        Ok(Self {
            capacitance_uf,
            v_on,
            v_off,
            v_now: v_off,
            leak_pw: leak_pw.max(0.0),
        })
    }

    /// Energy between `v_on` and `v_off`, in pJ.
    pub fn usable_energy_pj(&self) -> f64 {
        usable_energy_pj(self.capacitance_uf, self.v_on, self.v_off)
    }

    /// Energy currently available before the device browns out, in pJ.
    pub fn available_pj(&self) -> f64 {
        0.5 * self.capacitance_uf * (self.v_now * self.v_now - self.v_off * self.v_off) * PJ_PER_UF_V2
    }

    /// Energy needed to bring `v_now` up to `v_on`, in pJ.
    pub fn deficit_pj(&self) -> f64 {
        0.5 * self.capacitance_uf * (self.v_on * self.v_on - self.v_now * self.v_now) * PJ_PER_UF_V2
    }

    pub fn set_full(&mut self) {
        self.v_now = self.v_on;
    }

    pub fn set_empty(&mut self) {
        self.v_now = self.v_off;
    }

    /// Removes `e_pj` from the buffer, clamping at `v_off`.
    pub fn drain(&mut self, e_pj: f64) {
        let remaining = (self.available_pj() - e_pj).max(0.0);
        let v2 = self.v_off * self.v_off + 2.0 * remaining / (self.capacitance_uf * PJ_PER_UF_V2);
        self.v_now = v2.sqrt().clamp(self.v_off, self.v_on);
    }
}

fn check_voltages(v_on: f64, v_off: f64) -> Result<(), EnergyError> {
    if v_on.is_finite() && v_off.is_finite() && v_on > v_off && v_off > 0.0 {
        Ok(())
    } else {
        Err(EnergyError::InvalidVoltages { v_on, v_off })
    }
}

fn usable_energy_pj(capacitance_uf: f64, v_on: f64, v_off: f64) -> f64 {
    0.5 * capacitance_uf * (v_on * v_on - v_off * v_off) * PJ_PER_UF_V2
}

/// Smallest capacitance (uF) whose usable energy covers `margin` times the worst-case task energy.
///
/// ```
/// use imc_sim::energy::size_capacitor;
/// let c = size_capacitor(100e6, 3.0, 2.0, 1.0).unwrap(); // 100 uJ
/// assert!((c - 40.0).abs() < 1e-9);
/// ```
pub fn size_capacitor(worst_case_energy_pj: f64, v_on: f64, v_off: f64, margin: f64) -> Result<f64, EnergyError> {
    check_voltages(v_on, v_off)?;
    if !(margin.is_finite() && margin >= 1.0) {
        return Err(EnergyError::InvalidMargin(margin));
    }
    if !(worst_case_energy_pj.is_finite() && worst_case_energy_pj >= 0.0) {
        return Err(EnergyError::InvalidEnergy(worst_case_energy_pj));
    }
    let target = margin * worst_case_energy_pj;
    let mut c = 2.0 * target / ((v_on * v_on - v_off * v_off) * PJ_PER_UF_V2);
    // Round up so the usable-energy round trip never falls short by an ulp.
    while usable_energy_pj(c, v_on, v_off) < target {
        c = c.next_up();
    }
    Ok(c)
}

/// Which of the three buffers a task draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapSlot {
    Small,
    Medium,
    Large,
}

impl CapSlot {
    pub const ALL: [CapSlot; 3] = [CapSlot::Small, CapSlot::Medium, CapSlot::Large];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CapSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CapSlot::Small => "small",
            CapSlot::Medium => "medium",
            CapSlot::Large => "large",
        })
    }
}

/// Three capacitor sizes and the buffer each task is wired to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingPlan {
    /// Capacitance in uF, indexed by [`CapSlot::index`].
    pub capacitance_uf: [f64; 3],
    pub v_on: f64,
    pub v_off: f64,
    pub assignments: BTreeMap<String, CapSlot>,
}

impl SizingPlan {
    pub fn usable_energy_pj(&self, slot: CapSlot) -> f64 {
        usable_energy_pj(self.capacitance_uf[slot.index()], self.v_on, self.v_off)
    }

    /// Instantiates the buffers. The small one does not leak; the others leak `leak_pw_per_uf` per uF.
    pub fn capacitors(&self, leak_pw_per_uf: f64) -> [Capacitor; 3] {
        CapSlot::ALL.map(|slot| {
            let c = self.capacitance_uf[slot.index()];
            let leak = if slot == CapSlot::Small { 0.0 } else { leak_pw_per_uf * c };
            Capacitor::new(c, self.v_on, self.v_off, leak).expect("plan voltages were validated")
        })
    }
}

/// Sizes small/medium/large buffers for the minimum, median and maximum task energy
/// and assigns every task to the smallest buffer that holds its worst case.
pub fn capacitor_sizing_plan(
    per_task_worst_energy_pj: &BTreeMap<String, f64>,
    v_on: f64,
    v_off: f64,
    margin: f64,
) -> Result<SizingPlan, EnergyError> {
    if per_task_worst_energy_pj.is_empty() {
        return Err(EnergyError::EmptyPlan);
    }
    let mut energies: Vec<f64> = per_task_worst_energy_pj.values().copied().collect();
    energies.sort_by(f64::total_cmp);
    let median = energies[(energies.len() - 1) / 2];
    let picks = [energies[0], median, energies[energies.len() - 1]];
    let mut capacitance_uf = [0.0; 3];
    for (c, e) in capacitance_uf.iter_mut().zip(picks) {
        *c = size_capacitor(e, v_on, v_off, margin)?;
    }
    let mut plan = SizingPlan {
        capacitance_uf,
        v_on,
        v_off,
        assignments: BTreeMap::new(),
    };
    for (task, &e) in per_task_worst_energy_pj {
        let slot = CapSlot::ALL
            .into_iter()
            .find(|&s| plan.usable_energy_pj(s) >= e)
            .expect("large buffer is sized for the maximum task energy");
        plan.assignments.insert(task.clone(), slot);
    }
    Ok(plan)
}
