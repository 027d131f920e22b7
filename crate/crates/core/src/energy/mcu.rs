use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EnergyError;

/// Workload family a benchmark belongs to. ISA efficiency is tabulated per family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadClass {
    Signal,
    ImageCodec,
    Edge,
    NnQuant,
    NnFloat,
    Micro,
}

impl WorkloadClass {
    pub const ALL: [WorkloadClass; 6] = [
        WorkloadClass::Signal,
        WorkloadClass::ImageCodec,
        WorkloadClass::Edge,
        WorkloadClass::NnQuant,
        WorkloadClass::NnFloat,
        WorkloadClass::Micro,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WorkloadClass::Signal => "signal",
            WorkloadClass::ImageCodec => "image_codec",
            WorkloadClass::Edge => "edge",
            WorkloadClass::NnQuant => "nn_quant",
            WorkloadClass::NnFloat => "nn_float",
            WorkloadClass::Micro => "micro",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, WorkloadClass::NnQuant | WorkloadClass::NnFloat)
    }
}

impl fmt::Display for WorkloadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WorkloadClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WorkloadClass::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| format!("unknown workload class `{s}`"))
    }
}

/// One microcontroller: clock, SRAM, active power and the cost knobs of the energy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McuProfile {
    pub name: String,
    pub clock_mhz: f64,
    pub main_memory_kib: f64,
    pub active_power_uw_per_mhz: f64,
    /// Multiplier on base cycle counts, per workload class. Missing classes use 1.0.
    pub isa_factors: BTreeMap<WorkloadClass, f64>,
    /// MCU cycles spent per persistence access (`k`).
    pub cycles_per_mem_access: f64,
    /// Bits moved per persistence access (`w`).
    pub access_width_bits: u32,
}

impl McuProfile {
    /// A profile with unit ISA factors and the default `k = 1`, `w = 8`.
    pub fn new(name: &str, clock_mhz: f64, main_memory_kib: f64, active_power_uw_per_mhz: f64) -> Self {
        Self {
            name: name.to_string(),
            clock_mhz,
            main_memory_kib,
            active_power_uw_per_mhz,
            isa_factors: BTreeMap::new(),
            cycles_per_mem_access: 1.0,
            access_width_bits: 8,
        }
    }

    pub fn with_nn_factor(mut self, factor: f64) -> Self {
        self.isa_factors.insert(WorkloadClass::NnQuant, factor);
        self.isa_factors.insert(WorkloadClass::NnFloat, factor);
        self
    }

    pub fn isa_cycle_factor(&self, workload: WorkloadClass) -> f64 {
        self.isa_factors.get(&workload).copied().unwrap_or(1.0)
    }

    pub fn main_memory_bytes(&self) -> u64 {
        (self.main_memory_kib * 1024.0).floor() as u64
    }

    /// Checks the numeric invariants. `k` may be zero to model a persistence path with no MCU involvement.
    pub fn validate(&self) -> Result<(), EnergyError> {
        let bad = |reason: String| EnergyError::InvalidProfile {
            name: self.name.clone(),
            reason,
        };
        let positive = [
            ("clock_MHz", self.clock_mhz),
            ("memory_KiB", self.main_memory_kib),
            ("active_power_uW_per_MHz", self.active_power_uw_per_mhz),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("{key} must be > 0, got {v}")));
            }
        }
        if !(self.cycles_per_mem_access.is_finite() && self.cycles_per_mem_access >= 0.0) {
            return Err(bad(format!("cycles_per_mem_access must be >= 0, got {}", self.cycles_per_mem_access)));
        }
        if self.access_width_bits == 0 {
            return Err(bad("access_width_bits must be > 0".into()));
        }
        for (w, f) in &self.isa_factors {
            if !(f.is_finite() && *f > 0.0) {
                return Err(bad(format!("isa_factor.{w} must be > 0, got {f}")));
            }
        }
        Ok(())
    }
}

/// The set of MCUs a campaign may target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McuCatalog {
    profiles: Vec<McuProfile>,
}

impl Default for McuCatalog {
    /// Seven platforms from the MSP430 and Cortex-M families. NN cycle factors are relative to M7.
    fn default() -> Self {
        Self {
            profiles: vec![
                McuProfile::new("MSP430G", 16.0, 0.512, 503.0),
                McuProfile::new("MSP430L", 4.0, 2.0, 58.5),
                McuProfile::new("MSP430S", 16.0, 8.0, 28.3),
                McuProfile::new("M0", 40.0, 32.0, 12.5).with_nn_factor(20.0),
                McuProfile::new("M33", 160.0, 768.0, 12.0),
                McuProfile::new("M4", 80.0, 128.0, 32.82).with_nn_factor(1.4),
                McuProfile::new("M7", 480.0, 1024.0, 58.5).with_nn_factor(1.0),
            ],
        }
    }
}

impl McuCatalog {
    pub fn new(profiles: Vec<McuProfile>) -> Result<Self, EnergyError> {
        for p in &profiles {
            p.validate()?;
        }
        let mut names: Vec<_> = profiles.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(EnergyError::InvalidProfile {
                name: w[0].to_string(),
                reason: "duplicate MCU name".into(),
            });
        }
        Ok(Self { profiles })
    }

    pub fn get(&self, name: &str) -> Result<&McuProfile, EnergyError> {
        self.profiles
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| EnergyError::UnknownMcu(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &McuProfile> {
        self.profiles.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.profiles.iter().map(|p| p.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_matches_platform_table() {
        let rows: Vec<_> = McuCatalog::default()
            .iter()
            .map(|p| (p.name.clone(), p.clock_mhz, p.main_memory_kib, p.active_power_uw_per_mhz))
            .collect();
        let expected = [
            ("MSP430G", 16.0, 0.512, 503.0),
            ("MSP430L", 4.0, 2.0, 58.5),
            ("MSP430S", 16.0, 8.0, 28.3),
            ("M0", 40.0, 32.0, 12.5),
            ("M33", 160.0, 768.0, 12.0),
            ("M4", 80.0, 128.0, 32.82),
            ("M7", 480.0, 1024.0, 58.5),
        ];
        assert_eq!(rows.len(), expected.len());
        for (got, want) in rows.iter().zip(expected) {
            assert_eq!((got.0.as_str(), got.1, got.2, got.3), want);
        }
    }

    #[test]
    fn nn_factors_relative_to_m7() {
        let cat = McuCatalog::default();
        let m7 = cat.get("M7").unwrap().isa_cycle_factor(WorkloadClass::NnQuant);
        assert_eq!(cat.get("M0").unwrap().isa_cycle_factor(WorkloadClass::NnQuant), 20.0 * m7);
        assert_eq!(cat.get("M4").unwrap().isa_cycle_factor(WorkloadClass::NnFloat), 1.4 * m7);
        assert_eq!(cat.get("M0").unwrap().isa_cycle_factor(WorkloadClass::Signal), 1.0);
        assert_eq!(cat.get("MSP430G").unwrap().isa_cycle_factor(WorkloadClass::NnQuant), 1.0);
    }

    #[test]
    fn zero_power_profile_rejected() {
        let p = McuProfile::new("dead", 16.0, 1.0, 0.0);
        assert!(matches!(
            McuCatalog::new(vec![p]),
            Err(EnergyError::InvalidProfile { reason, .. }) if reason.contains("active_power")
        ));
    }

    #[test]
    fn unknown_mcu() {
        assert_eq!(
            McuCatalog::default().get("Z80"),
            Err(EnergyError::UnknownMcu("Z80".into()))
        );
    }

    #[test]
    fn workload_names_round_trip() {
        for w in WorkloadClass::ALL {
            assert_eq!(w.as_str().parse::<WorkloadClass>().unwrap(), w);
        }
    }
}
