//! Monte Carlo sweeps over benchmarks, MCUs and quality levels.

mod output;
pub mod stats;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use output::{records_csv, summary_csv, summary_json, tradeoff_csv, tradeoff_rows, write_outputs, write_tradeoffs, TradeoffRow};
pub use stats::{mean, paired_t_test, percentile, std_dev, PairedTTest};

use crate::bench::{BenchError, BenchSpec, Benchmark, CostCoefficients};
use crate::energy::{capacitor_sizing_plan, EnergyBreakdown, EnergyError, McuCatalog, McuProfile, SizingPlan};
use crate::metrics::{Metric, QorValue};
use crate::nvm::{InjectionPolicy, NvmError, QlCatalog, QlId, SegmentCatalog};
use crate::rng::{derive, stable_hash, RunStream};
use crate::runtime::{golden_run, ChargePolicy, FailureSchedule, HarvestModel, NvmImage, Platform, Runtime, RuntimeError, RuntimeSettings};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CampaignError {
    #[error("{benchmark} needs {need} bytes of working memory; {mcu} has {have}")]
    MemoryFit {
        benchmark: String,
        mcu: String,
        need: u64,
        have: u64,
    },
    #[error("campaign has no cells to run")]
    Empty,
    #[error("no Q0 records for {benchmark} on {mcu}")]
    MissingBaseline { benchmark: String, mcu: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Nvm(#[from] NvmError),
}

impl From<std::io::Error> for CampaignError {
    fn from(e: std::io::Error) -> Self {
        CampaignError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitorSettings {
    pub v_on: f64,
    pub v_off: f64,
    pub margin: f64,
    pub leak_pw_per_uf: f64,
}

impl Default for CapacitorSettings {
    fn default() -> Self {
        Self {
            v_on: 3.0,
            v_off: 2.2,
            margin: 1.1,
            leak_pw_per_uf: crate::energy::DEFAULT_LEAK_PW_PER_UF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub seed: u64,
    pub runs: usize,
    pub benchmarks: Vec<BenchSpec>,
    pub mcus: Vec<String>,
    /// Levels applied to the approximate segments. Q0 always runs as the savings baseline.
    pub qls: Vec<QlId>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Skip benchmark/MCU pairs that fail the memory-fit check instead of aborting.
    pub skip_unfit: bool,
    pub nn_batch: usize,
    pub cost: CostCoefficients,
    /// Replaces every profile's `k` when set.
    pub cycles_per_mem_access: Option<f64>,
    /// Replaces every profile's `w` when set.
    pub access_width_bits: Option<u32>,
    pub are_threshold: f64,
    pub injection: InjectionPolicy,
    pub charge: ChargePolicy,
    pub capacitor: CapacitorSettings,
    pub harvest: HarvestModel,
    pub failures: FailureSchedule,
    pub mcu_catalog: McuCatalog,
    pub ql_catalog: QlCatalog,
    pub segments: SegmentCatalog,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            runs: 200,
            benchmarks: vec![
                BenchSpec::Fft { n: 256 },
                BenchSpec::Codec { w: 64, h: 64 },
                BenchSpec::Edge { w: 64, h: 64 },
                BenchSpec::Nn {
                    side: 16,
                    quantized: true,
                },
                BenchSpec::Nn {
                    side: 16,
                    quantized: false,
                },
            ],
            mcus: vec!["M33".into()],
            qls: QlId::ALL.to_vec(),
            workers: 0,
            skip_unfit: false,
            nn_batch: 16,
            cost: CostCoefficients::default(),
            cycles_per_mem_access: None,
            access_width_bits: None,
            are_threshold: 0.05,
            injection: InjectionPolicy::default(),
            charge: ChargePolicy::default(),
            capacitor: CapacitorSettings::default(),
            harvest: HarvestModel::default(),
            failures: FailureSchedule::default(),
            mcu_catalog: McuCatalog::default(),
            ql_catalog: QlCatalog::default(),
            segments: SegmentCatalog::default(),
        }
    }
}

impl CampaignConfig {
    /// The MCU profile with the campaign's platform overrides applied.
    pub fn profile(&self, name: &str) -> Result<McuProfile, CampaignError> {
        let mut p = self.mcu_catalog.get(name)?.clone();
        if let Some(k) = self.cycles_per_mem_access {
            p.cycles_per_mem_access = k;
        }
        if let Some(w) = self.access_width_bits {
            p.access_width_bits = w;
        }
        p.validate()?;
        Ok(p)
    }

    /// Quality levels actually executed: the configured ones plus Q0, in catalog order.
    pub fn effective_qls(&self) -> Vec<QlId> {
        QlId::ALL
            .into_iter()
            .filter(|q| *q == QlId::Q0 || self.qls.contains(q))
            .collect()
    }
}

/// Seed of the benchmark input used by run `run`; shared by every MCU and QL so cells pair up.
pub fn input_seed(master: u64, benchmark: &str, run: usize) -> u64 {
    derive(&[master, stable_hash(benchmark.as_bytes()), run as u64])
}

fn run_stream(master: u64, benchmark: &str, mcu: &str, ql: QlId, run: usize) -> RunStream {
    let id = derive(&[
        stable_hash(benchmark.as_bytes()),
        stable_hash(mcu.as_bytes()),
        ql.index() as u64,
        run as u64,
    ]);
    RunStream::new(master, id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: String,
    pub mcu: String,
    pub ql: QlId,
    pub seed: u64,
    pub run: usize,
    pub energy: EnergyBreakdown,
    pub cycles: u64,
    pub mem_accesses: u64,
    pub bits_written: u64,
    pub failures: u64,
    pub recharges: u64,
    pub qor: Option<QorValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QorSummary {
    pub metric: Metric,
    pub value_mean: f64,
    pub value_p5: f64,
    pub value_p95: f64,
    pub value2_mean: Option<f64>,
    pub degradation_mean: f64,
    pub degradation_std: f64,
    /// Runs with ARE above the threshold, or with any degradation for other metrics.
    pub exceed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub benchmark: String,
    pub mcu: String,
    pub ql: QlId,
    pub runs: usize,
    pub energy_mean_pj: f64,
    pub energy_std_pj: f64,
    pub compute_mean_pj: f64,
    pub persist_mean_pj: f64,
    pub storage_mean_pj: f64,
    pub saving_pct: f64,
    pub failures_mean: f64,
    pub recharges_mean: f64,
    pub qor: Option<QorSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPlan {
    pub benchmark: String,
    pub mcu: String,
    pub memory_bytes: u64,
    pub plan: SizingPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    pub records: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
    pub plans: Vec<PairPlan>,
    /// Benchmark/MCU pairs left out by the memory-fit check.
    pub skipped: Vec<(String, String)>,
}

impl CampaignResult {
    pub fn cell(&self, benchmark: &str, mcu: &str, ql: QlId) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.benchmark == benchmark && c.mcu == mcu && c.ql == ql)
    }

    /// Per-run records of one cell, ordered by run index.
    pub fn runs(&self, benchmark: &str, mcu: &str, ql: QlId) -> Vec<&RunRecord> {
        self.records
            .iter()
            .filter(|r| r.benchmark == benchmark && r.mcu == mcu && r.ql == ql)
            .collect()
    }

    /// Metric values of one cell in run order, for paired comparisons across cells.
    pub fn qor_values(&self, benchmark: &str, mcu: &str, ql: QlId) -> Vec<f64> {
        self.runs(benchmark, mcu, ql)
            .iter()
            .filter_map(|r| r.qor.map(|q| q.value))
            .collect()
    }
}

struct Pair {
    bench: usize,
    profile: McuProfile,
    plan: SizingPlan,
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CampaignError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CampaignError::Io(e.to_string()))?;
    Ok(pool.install(f))
}

fn golden_images(bench: &dyn Benchmark, inputs: &[NvmImage], mcu: &McuProfile) -> Result<Vec<NvmImage>, CampaignError> {
    inputs
        .iter()
        .map(|i| Ok(golden_run(bench.pipeline(), i, mcu)?.image))
        .collect()
}

/// Capacitor plan sized from the golden run of the first input at Q0.
pub fn plan_for(bench: &dyn Benchmark, mcu: &McuProfile, cfg: &CampaignConfig) -> Result<SizingPlan, CampaignError> {
    let inputs = bench.inputs(input_seed(cfg.seed, &bench.name(), 0));
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for input in &inputs {
        let g = golden_run(bench.pipeline(), input, mcu)?;
        for (k, v) in g.per_task_energy_pj(mcu, &cfg.ql_catalog)? {
            let e = worst.entry(k).or_insert(0.0);
            *e = e.max(v);
        }
    }
    let c = cfg.capacitor;
    Ok(capacitor_sizing_plan(&worst, c.v_on, c.v_off, c.margin)?)
}

/// Runs every cell of the campaign. The result does not depend on `workers`.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult, CampaignError> {
    with_pool(cfg.workers, || run_inner(cfg))?
}

fn run_inner(cfg: &CampaignConfig) -> Result<CampaignResult, CampaignError> {
    let benches: Vec<Arc<dyn Benchmark>> = cfg
        .benchmarks
        .iter()
        .map(|b| b.build(&cfg.cost, cfg.nn_batch))
        .collect::<Result<_, _>>()?;
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    let mut plans = Vec::new();
    for (bi, bench) in benches.iter().enumerate() {
        for name in &cfg.mcus {
            let profile = cfg.profile(name)?;
            let need = bench.memory_bytes();
            if need > profile.main_memory_bytes() {
                if cfg.skip_unfit {
                    skipped.push((bench.name(), name.clone()));
                    continue;
                }
                return Err(CampaignError::MemoryFit {
                    benchmark: bench.name(),
                    mcu: name.clone(),
                    need,
                    have: profile.main_memory_bytes(),
                });
            }
            let plan = plan_for(bench.as_ref(), &profile, cfg)?;
            plans.push(PairPlan {
                benchmark: bench.name(),
                mcu: name.clone(),
                memory_bytes: need,
                plan: plan.clone(),
            });
            pairs.push(Pair { bench: bi, profile, plan });
        }
    }
    if pairs.is_empty() || cfg.runs == 0 {
        return Err(CampaignError::Empty);
    }

    // Golden outputs depend on the input only, so any fitting MCU will do.
    let mut golden_mcu: Vec<Option<&McuProfile>> = vec![None; benches.len()];
    for p in &pairs {
        golden_mcu[p.bench].get_or_insert(&p.profile);
    }
    let golden_jobs: Vec<(usize, usize)> = (0..benches.len())
        .filter(|&b| golden_mcu[b].is_some())
        .flat_map(|b| (0..cfg.runs).map(move |r| (b, r)))
        .collect();
    let goldens: Vec<Vec<NvmImage>> = golden_jobs
        .par_iter()
        .map(|&(b, r)| {
            let bench = benches[b].as_ref();
            let inputs = bench.inputs(input_seed(cfg.seed, &bench.name(), r));
            golden_images(bench, &inputs, golden_mcu[b].expect("filtered"))
        })
        .collect::<Result<_, _>>()?;
    let golden_index: BTreeMap<(usize, usize), usize> =
        golden_jobs.iter().enumerate().map(|(i, &k)| (k, i)).collect();

    let qls = cfg.effective_qls();
    let jobs: Vec<(usize, QlId, usize)> = (0..pairs.len())
        .flat_map(|p| qls.iter().flat_map(move |&q| (0..cfg.runs).map(move |r| (p, q, r))))
        .collect();
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(p, ql, run)| {
            let pair = &pairs[p];
            let bench = benches[pair.bench].as_ref();
            let golden = &goldens[golden_index[&(pair.bench, run)]];
            run_one(cfg, bench, pair, ql, run, golden).map(|(r, _)| r)
        })
        .collect::<Result<_, _>>()?;
    let cells = summarize(&records, cfg.are_threshold)?;
    Ok(CampaignResult {
        config: cfg.clone(),
        records,
        cells,
        plans,
        skipped,
    })
}

fn run_one(
    cfg: &CampaignConfig,
    bench: &dyn Benchmark,
    pair: &Pair,
    ql: QlId,
    run: usize,
    golden: &[NvmImage],
) -> Result<(RunRecord, Vec<NvmImage>), CampaignError> {
    let name = bench.name();
    let segments = cfg.segments.with_approx_ql(ql);
    let platform = Platform {
        mcu: &pair.profile,
        qls: &cfg.ql_catalog,
        segments: &segments,
        plan: &pair.plan,
        harvest: &cfg.harvest,
    };
    let settings = RuntimeSettings {
        injection: cfg.injection,
        charge: cfg.charge,
        failures: cfg.failures.clone(),
        leak_pw_per_uf: cfg.capacitor.leak_pw_per_uf,
    };
    let stream = run_stream(cfg.seed, &name, &pair.profile.name, ql, run);
    let mut rt = Runtime::new(platform, &settings, stream);
    let mut finals = bench.inputs(input_seed(cfg.seed, &name, run));
    for image in finals.iter_mut() {
        rt.run(bench.pipeline(), image)?;
    }
    let trace = rt.into_trace();
    let qor = bench.qor(&finals, golden)?;
    let record = RunRecord {
        benchmark: name,
        mcu: pair.profile.name.clone(),
        ql,
        seed: cfg.seed,
        run,
        energy: trace.energy,
        cycles: trace.cost.cycles,
        mem_accesses: trace.cost.mem_accesses,
        bits_written: trace.cost.bits_written,
        failures: trace.failures,
        recharges: trace.recharges,
        qor,
    };
    Ok((record, finals))
}

/// One execution of `spec` on `mcu` at `ql`, with the committed images it left behind.
///
/// Produces the same record as run `run` of a campaign over the same configuration.
pub fn run_single(
    cfg: &CampaignConfig,
    spec: &BenchSpec,
    mcu: &str,
    ql: QlId,
    run: usize,
) -> Result<(RunRecord, Vec<NvmImage>, Arc<dyn Benchmark>), CampaignError> {
    let bench = spec.build(&cfg.cost, cfg.nn_batch)?;
    let profile = cfg.profile(mcu)?;
    let need = bench.memory_bytes();
    if need > profile.main_memory_bytes() {
        return Err(CampaignError::MemoryFit {
            benchmark: bench.name(),
            mcu: mcu.to_string(),
            need,
            have: profile.main_memory_bytes(),
        });
    }
    let plan = plan_for(bench.as_ref(), &profile, cfg)?;
    let inputs = bench.inputs(input_seed(cfg.seed, &bench.name(), run));
    let golden = golden_images(bench.as_ref(), &inputs, &profile)?;
    let pair = Pair { bench: 0, profile, plan };
    let (record, finals) = run_one(cfg, bench.as_ref(), &pair, ql, run, &golden)?;
    Ok((record, finals, bench))
}

fn qor_summary(runs: &[&RunRecord], are_threshold: f64) -> Option<QorSummary> {
    let q: Vec<QorValue> = runs.iter().filter_map(|r| r.qor).collect();
    let first = q.first()?;
    let values: Vec<f64> = q.iter().map(|v| v.value).collect();
    let deg: Vec<f64> = q.iter().map(|v| v.degradation()).collect();
    let v2: Vec<f64> = q.iter().filter_map(|v| v.value2).collect();
    let exceed = deg
        .iter()
        .filter(|&&d| if first.metric == Metric::Are { d > are_threshold } else { d > 0.0 })
        .count();
    Some(QorSummary {
        metric: first.metric,
        value_mean: mean(&values),
        value_p5: percentile(&values, 5.0),
        value_p95: percentile(&values, 95.0),
        value2_mean: (!v2.is_empty()).then(|| mean(&v2)),
        degradation_mean: mean(&deg),
        degradation_std: std_dev(&deg),
        exceed_fraction: exceed as f64 / q.len() as f64,
    })
}

/// Per-cell statistics, in record order. Savings are relative to the Q0 cell of the same pair.
pub fn summarize(records: &[RunRecord], are_threshold: f64) -> Result<Vec<CellSummary>, CampaignError> {
    let mut order: Vec<(String, String, QlId)> = Vec::new();
    let mut groups: BTreeMap<(String, String, QlId), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.benchmark.clone(), r.mcu.clone(), r.ql);
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    let total = |v: &[&RunRecord]| mean(&v.iter().map(|r| r.energy.e_total_pj).collect::<Vec<_>>());
    order
        .into_iter()
        .map(|key| {
            let runs = &groups[&key];
            let e: Vec<f64> = runs.iter().map(|r| r.energy.e_total_pj).collect();
            let base = groups
                .get(&(key.0.clone(), key.1.clone(), QlId::Q0))
                .map(|v| total(v))
                .ok_or_else(|| CampaignError::MissingBaseline {
                    benchmark: key.0.clone(),
                    mcu: key.1.clone(),
                })?;
            let m = mean(&e);
            let per = |f: fn(&RunRecord) -> f64| mean(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
            Ok(CellSummary {
                benchmark: key.0.clone(),
                mcu: key.1.clone(),
                ql: key.2,
                runs: runs.len(),
                energy_mean_pj: m,
                energy_std_pj: std_dev(&e),
                compute_mean_pj: per(|r| r.energy.e_mcu_compute_pj),
                persist_mean_pj: per(|r| r.energy.e_mcu_persist_pj),
                storage_mean_pj: per(|r| r.energy.e_storage_pj),
                saving_pct: 100.0 * (1.0 - m / base),
                failures_mean: per(|r| r.failures as f64),
                recharges_mean: per(|r| r.recharges as f64),
                qor: qor_summary(runs, are_threshold),
            })
        })
        .collect()
}
