//! Plain-text catalog tables.

use std::fmt::Write;

use crate::energy::{energy_per_cycle, McuCatalog, WorkloadClass};
use crate::nvm::{QlCatalog, QlId};

/// One row of the quality-level table, with the per-bit energy relative to Q0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QlRow {
    pub id: QlId,
    pub wer: f64,
    pub set_current_ua: f64,
    pub write_energy_pj: f64,
    pub ratio: f64,
}

pub fn ql_rows(cat: &QlCatalog) -> Vec<QlRow> {
    cat.iter()
        .map(|q| QlRow {
            id: q.id,
            wer: q.wer,
            set_current_ua: q.set_current_ua,
            write_energy_pj: q.write_energy_per_bit_pj,
            ratio: cat.energy_ratio(q.id),
        })
        .collect()
}

/// Both catalogs as aligned text. `qls` and `mcus` filter the rows when non-empty.
pub fn characterize(qls: &QlCatalog, mcus: &McuCatalog, only_qls: &[QlId], only_mcus: &[String]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<4} {:>8} {:>15} {:>16} {:>12} {:>7}",
        "ql", "wer", "set_current_uA", "write_energy_pJ", "ratio_vs_Q0", "pct"
    )
    .unwrap();
    for r in ql_rows(qls).iter().filter(|r| only_qls.is_empty() || only_qls.contains(&r.id)) {
        writeln!(
            out,
            "{:<4} {:>8.0e} {:>15.0} {:>16.0} {:>12.3} {:>6.1}%",
            r.id.as_str(),
            r.wer,
            r.set_current_ua,
            r.write_energy_pj,
            r.ratio,
            100.0 * r.ratio
        )
        .unwrap();
    }
    out.push('\n');
    writeln!(
        out,
        "{:<8} {:>9} {:>10} {:>23} {:>19} {:>9} {:>5} {:>3}",
        "mcu", "clock_MHz", "memory_KiB", "active_power_uW_per_MHz", "energy_per_cycle_pJ", "nn_factor", "k", "w"
    )
    .unwrap();
    for m in mcus.iter().filter(|m| only_mcus.is_empty() || only_mcus.contains(&m.name)) {
        writeln!(
            out,
            "{:<8} {:>9} {:>10} {:>23} {:>19} {:>9} {:>5} {:>3}",
            m.name,
            m.clock_mhz,
            m.main_memory_kib,
            m.active_power_uw_per_mhz,
            energy_per_cycle(m),
            m.isa_cycle_factor(WorkloadClass::NnQuant),
            m.cycles_per_mem_access,
            m.access_width_bits
        )
        .unwrap();
    }
    out
}
