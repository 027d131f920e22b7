use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{CampaignError, CampaignResult, CellSummary, RunRecord};
use crate::nvm::QlId;

#[derive(Serialize)]
struct CsvRow<'a> {
    benchmark: &'a str,
    mcu: &'a str,
    ql: QlId,
    seed: u64,
    run: usize,
    #[serde(rename = "energy_total_pJ")]
    energy_total: f64,
    #[serde(rename = "energy_compute_pJ")]
    energy_compute: f64,
    #[serde(rename = "energy_persist_pJ")]
    energy_persist: f64,
    #[serde(rename = "energy_storage_pJ")]
    energy_storage: f64,
    cycles: u64,
    mem_accesses: u64,
    bits_written: u64,
    failures: u64,
    recharges: u64,
    metric: &'a str,
    qor_value: Option<f64>,
    qor_value2: Option<f64>,
}

fn csv_err(e: impl std::fmt::Display) -> CampaignError {
    CampaignError::Io(format!("csv: {e}"))
}

/// One line per run, with a header.
pub fn records_csv(records: &[RunRecord]) -> Result<String, CampaignError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(CsvRow {
            benchmark: &r.benchmark,
            mcu: &r.mcu,
            ql: r.ql,
            seed: r.seed,
            run: r.run,
            energy_total: r.energy.e_total_pj,
            energy_compute: r.energy.e_mcu_compute_pj,
            energy_persist: r.energy.e_mcu_persist_pj,
            energy_storage: r.energy.e_storage_pj,
            cycles: r.cycles,
            mem_accesses: r.mem_accesses,
            bits_written: r.bits_written,
            failures: r.failures,
            recharges: r.recharges,
            metric: r.qor.map_or("none", |q| q.metric.as_str()),
            qor_value: r.qor.map(|q| q.value),
            qor_value2: r.qor.and_then(|q| q.value2),
        })
        .map_err(csv_err)?;
    }
    if records.is_empty() {
        return Ok("benchmark,mcu,ql,seed,run,energy_total_pJ,energy_compute_pJ,energy_persist_pJ,energy_storage_pJ,cycles,mem_accesses,bits_written,failures,recharges,metric,qor_value,qor_value2\n".into());
    }
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    benchmark: &'a str,
    mcu: &'a str,
    ql: QlId,
    runs: usize,
    #[serde(rename = "energy_mean_pJ")]
    energy_mean: f64,
    #[serde(rename = "energy_std_pJ")]
    energy_std: f64,
    #[serde(rename = "compute_mean_pJ")]
    compute_mean: f64,
    #[serde(rename = "persist_mean_pJ")]
    persist_mean: f64,
    #[serde(rename = "storage_mean_pJ")]
    storage_mean: f64,
    saving_pct: f64,
    failures_mean: f64,
    recharges_mean: f64,
    metric: &'a str,
    qor_mean: Option<f64>,
    qor_p5: Option<f64>,
    qor_p95: Option<f64>,
    qor_value2_mean: Option<f64>,
    degradation_mean: Option<f64>,
    degradation_std: Option<f64>,
    exceed_fraction: Option<f64>,
}

/// One line per cell, with a header.
pub fn summary_csv(cells: &[CellSummary]) -> Result<String, CampaignError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in cells {
        let q = c.qor.as_ref();
        w.serialize(SummaryRow {
            benchmark: &c.benchmark,
            mcu: &c.mcu,
            ql: c.ql,
            runs: c.runs,
            energy_mean: c.energy_mean_pj,
            energy_std: c.energy_std_pj,
            compute_mean: c.compute_mean_pj,
            persist_mean: c.persist_mean_pj,
            storage_mean: c.storage_mean_pj,
            saving_pct: c.saving_pct,
            failures_mean: c.failures_mean,
            recharges_mean: c.recharges_mean,
            metric: q.map_or("none", |q| q.metric.as_str()),
            qor_mean: q.map(|q| q.value_mean),
            qor_p5: q.map(|q| q.value_p5),
            qor_p95: q.map(|q| q.value_p95),
            qor_value2_mean: q.and_then(|q| q.value2_mean),
            degradation_mean: q.map(|q| q.degradation_mean),
            degradation_std: q.map(|q| q.degradation_std),
            exceed_fraction: q.map(|q| q.exceed_fraction),
        })
        .map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

/// Cells, sizing plans and the resolved configuration as pretty JSON.
pub fn summary_json(result: &CampaignResult) -> Result<String, CampaignError> {
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a super::CampaignConfig,
        cells: &'a [super::CellSummary],
        plans: &'a [super::PairPlan],
        skipped: &'a [(String, String)],
    }
    serde_json::to_string_pretty(&Summary {
        config: &result.config,
        cells: &result.cells,
        plans: &result.plans,
        skipped: &result.skipped,
    })
    .map_err(|e| CampaignError::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub ql: QlId,
    pub saving_pct: f64,
    pub qor_mean: Option<f64>,
    pub qor_p5: Option<f64>,
    pub qor_p95: Option<f64>,
}

/// Energy saving against output quality for one benchmark/MCU pair, ordered by QL.
pub fn tradeoff_rows(cells: &[CellSummary], benchmark: &str, mcu: &str) -> Vec<TradeoffRow> {
    let mut rows: Vec<TradeoffRow> = cells
        .iter()
        .filter(|c| c.benchmark == benchmark && c.mcu == mcu)
        .map(|c| TradeoffRow {
            ql: c.ql,
            saving_pct: c.saving_pct,
            qor_mean: c.qor.as_ref().map(|q| q.value_mean),
            qor_p5: c.qor.as_ref().map(|q| q.value_p5),
            qor_p95: c.qor.as_ref().map(|q| q.value_p95),
        })
        .collect();
    rows.sort_by_key(|r| r.ql);
    rows
}

pub fn tradeoff_csv(rows: &[TradeoffRow]) -> Result<String, CampaignError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["ql", "saving_pct", "qor_mean", "qor_p5", "qor_p95"]).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_err)?).map_err(csv_err)
}

/// Writes one `tradeoff_<benchmark>_<mcu>.csv` per pair present in `cells`.
pub fn write_tradeoffs(cells: &[CellSummary], dir: &Path) -> Result<Vec<PathBuf>, CampaignError> {
    std::fs::create_dir_all(dir)?;
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    for c in cells {
        if !pairs.contains(&(c.benchmark.as_str(), c.mcu.as_str())) {
            pairs.push((&c.benchmark, &c.mcu));
        }
    }
    let mut written = Vec::new();
    for (b, m) in pairs {
        let p = dir.join(format!("tradeoff_{b}_{m}.csv"));
        std::fs::write(&p, tradeoff_csv(&tradeoff_rows(cells, b, m))?)?;
        written.push(p);
    }
    Ok(written)
}

/// Writes `runs.csv`, `summary.csv`, `summary.json` and one `tradeoff_<benchmark>_<mcu>.csv` per pair.
pub fn write_outputs(result: &CampaignResult, dir: &Path) -> Result<Vec<PathBuf>, CampaignError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), CampaignError> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    put("runs.csv".into(), records_csv(&result.records)?)?;
    put("summary.csv".into(), summary_csv(&result.cells)?)?;
    put("summary.json".into(), summary_json(result)?)?;
    written.extend(write_tradeoffs(&result.cells, dir)?);
    Ok(written)
}
