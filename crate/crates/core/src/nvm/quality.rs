use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NvmError;

/// Identifier of one STT-MRAM write-current setting.
///
/// `Q0` is the reliable baseline; higher indices trade write energy for a
/// larger write-error rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QlId {
    Q0,
    Q1,
    Q2,
    Q3,
    Q4,
}

impl QlId {
    pub const ALL: [QlId; 5] = [QlId::Q0, QlId::Q1, QlId::Q2, QlId::Q3, QlId::Q4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QlId::Q0 => "Q0",
            QlId::Q1 => "Q1",
            QlId::Q2 => "Q2",
            QlId::Q3 => "Q3",
            QlId::Q4 => "Q4",
        }
    }
}

impl fmt::Display for QlId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QlId {
    type Err = NvmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Q0" => Ok(QlId::Q0),
            "Q1" => Ok(QlId::Q1),
            "Q2" => Ok(QlId::Q2),
            "Q3" => Ok(QlId::Q3),
            "Q4" => Ok(QlId::Q4),
            other => Err(NvmError::UnknownQualityLevel(other.to_string())),
        }
    }
}

/// Write characteristics of one quality level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityLevel {
    pub id: QlId,
    /// Probability that a single written bit ends up wrong.
    pub wer: f64,
    pub set_current_ua: f64,
    pub write_energy_per_bit_pj: f64,
}

impl QualityLevel {
    pub const fn new(id: QlId, wer: f64, set_current_ua: f64, write_energy_per_bit_pj: f64) -> Self {
        Self {
            id,
            wer,
            set_current_ua,
            write_energy_per_bit_pj,
        }
    }
}

/// Returns the energy in pJ spent writing `n_bits` at `ql`.
///
/// ```
/// use imc_sim::nvm::{write_energy, QlCatalog, QlId};
/// let cat = QlCatalog::default();
/// assert_eq!(write_energy(cat.get(QlId::Q4), 1), 43.0);
/// assert_eq!(write_energy(cat.get(QlId::Q0), 8), 1336.0);
/// ```
pub fn write_energy(ql: &QualityLevel, n_bits: u64) -> f64 {
    n_bits as f64 * ql.write_energy_per_bit_pj
}

/// The five quality levels, ordered `Q0..=Q4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QlCatalog {
    levels: [QualityLevel; 5],
}

impl Default for QlCatalog {
    /// 40 nm STT-MRAM characterization: WER, set current (uA), write energy per bit (pJ).
    fn default() -> Self {
        Self {
            levels: [
                QualityLevel::new(QlId::Q0, 1e-8, 1153.0, 167.0),
                QualityLevel::new(QlId::Q1, 1e-6, 865.0, 94.0),
                QualityLevel::new(QlId::Q2, 1e-5, 769.0, 74.0),
                QualityLevel::new(QlId::Q3, 1e-4, 673.0, 57.0),
                QualityLevel::new(QlId::Q4, 1e-3, 577.0, 43.0),
            ],
        }
    }
}

impl QlCatalog {
    /// Builds a catalog, checking that WER rises and current/energy fall from Q0 to Q4.
    pub fn new(levels: [QualityLevel; 5]) -> Result<Self, NvmError> {
        for (i, ql) in levels.iter().enumerate() {
            if ql.id.index() != i {
                return Err(NvmError::InvalidCatalog(format!(
                    "level at position {i} is {}, expected {}",
                    ql.id,
                    QlId::ALL[i]
                )));
            }
            if !(0.0..=1.0).contains(&ql.wer) {
                return Err(NvmError::InvalidCatalog(format!("{}: wer {} outside [0, 1]", ql.id, ql.wer)));
            }
            if !(ql.set_current_ua > 0.0 && ql.write_energy_per_bit_pj > 0.0) {
                return Err(NvmError::InvalidCatalog(format!(
                    "{}: current and write energy must be positive",
                    ql.id
                )));
            }
        }
        for pair in levels.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if b.wer <= a.wer {
                return Err(NvmError::InvalidCatalog(format!("wer must increase from {} to {}", a.id, b.id)));
            }
            if b.set_current_ua >= a.set_current_ua || b.write_energy_per_bit_pj >= a.write_energy_per_bit_pj {
                return Err(NvmError::InvalidCatalog(format!(
                    "set current and write energy must decrease from {} to {}",
                    a.id, b.id
                )));
            }
        }
        Ok(Self { levels })
    }

    pub fn get(&self, id: QlId) -> &QualityLevel {
        &self.levels[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &QualityLevel> {
        self.levels.iter()
    }

    /// Per-bit write energy of `id` relative to `Q0`.
    pub fn energy_ratio(&self, id: QlId) -> f64 {
        self.get(id).write_energy_per_bit_pj / self.get(QlId::Q0).write_energy_per_bit_pj
    }
}
