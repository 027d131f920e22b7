use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imc_sim::bench::BenchSpec;
use imc_sim::campaign::{self, CampaignError, CellSummary};
use imc_sim::config::{Config, ConfigError};
use imc_sim::energy::size_capacitor;
use imc_sim::nvm::{InjectionMode, QlId};

#[derive(Parser)]
#[command(name = "imc-sim", version, about = "Energy and output quality of approximate STT-MRAM persistence under intermittent power")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    /// Configuration file layered over the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Quality levels, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    ql: Vec<String>,
    /// MCU names, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    mcu: Vec<String>,
    /// Benchmarks, comma separated (`fft`, `codec_32x32`, `nn_32_quant`, ...).
    #[arg(long, global = true, value_delimiter = ',')]
    benchmark: Vec<String>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Master seed. Takes precedence over IMC_SIM_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Injection mode: flip-new or retain-old.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the quality-level and MCU catalogs.
    Characterize,
    /// Execute one run and dump its committed outputs.
    Run {
        /// Run index within the campaign seed space.
        #[arg(long, default_value_t = 0)]
        run: usize,
        /// Do not write output dumps.
        #[arg(long)]
        no_dump: bool,
    },
    /// Sweep benchmarks x MCUs x QLs and write CSV/JSON results.
    Campaign {
        /// Leave out benchmark/MCU pairs that do not fit in memory.
        #[arg(long)]
        skip_unfit: bool,
    },
    /// Regenerate trade-off tables from a campaign summary.
    Tradeoff {
        /// Defaults to `<out>/summary.json`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Size a capacitor for an energy, or print the sizing plan of each benchmark/MCU pair.
    SizeCapacitor {
        /// Worst-case task energy in pJ.
        #[arg(long)]
        energy: Option<f64>,
    },
}

enum Failure {
    Config(String),
    Model(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<CampaignError> for Failure {
    fn from(e: CampaignError) -> Self {
        Failure::Model(e.to_string())
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn resolve(o: &Overrides) -> Result<Config, Failure> {
    let mut cfg = match &o.config {
        Some(p) => Config::load(p)?,
        None => Config::defaults()?,
    };
    let c = &mut cfg.campaign;
    if let Ok(s) = std::env::var("IMC_SIM_SEED") {
        c.seed = s.trim().parse().map_err(|_| Failure::Config(format!("IMC_SIM_SEED: `{s}` is not a seed")))?;
    }
    if let Some(s) = o.seed {
        c.seed = s;
    }
    if !o.ql.is_empty() {
        c.qls = o.ql.iter().map(|q| q.parse::<QlId>()).collect::<Result<_, _>>().map_err(config_err)?;
    }
    if !o.mcu.is_empty() {
        for m in &o.mcu {
            c.mcu_catalog.get(m).map_err(config_err)?;
        }
        c.mcus = o.mcu.clone();
    }
    if !o.benchmark.is_empty() {
        c.benchmarks = o.benchmark.iter().map(|b| b.parse::<BenchSpec>()).collect::<Result<_, _>>().map_err(config_err)?;
    }
    if let Some(r) = o.runs {
        if r == 0 {
            return Err(Failure::Config("--runs must be at least 1".into()));
        }
        c.runs = r;
    }
    if let Some(m) = &o.mode {
        c.injection.mode = m.parse::<InjectionMode>().map_err(config_err)?;
    }
    if let Some(w) = o.workers {
        c.workers = w;
    }
    if let Some(p) = &o.out {
        cfg.out = p.clone();
    }
    Ok(cfg)
}

fn only<'a, T>(items: &'a [T], what: &str) -> Result<&'a T, Failure> {
    match items {
        [one] => Ok(one),
        _ => Err(Failure::Config(format!("`run` needs exactly one {what}, got {}", items.len()))),
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Model(format!("{}: {e}", path.display()))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(&cli.overrides)?;
    let c = &cfg.campaign;
    match cli.command {
        Command::Characterize => {
            let qls: Vec<QlId> = if cli.overrides.ql.is_empty() { Vec::new() } else { c.qls.clone() };
            print!("{}", imc_sim::report::characterize(&c.ql_catalog, &c.mcu_catalog, &qls, &cli.overrides.mcu));
        }
        Command::Run { run, no_dump } => {
            let spec = only(&c.benchmarks, "benchmark")?;
            let mcu = only(&c.mcus, "MCU")?;
            let ql = if cli.overrides.ql.is_empty() { QlId::Q0 } else { *only(&c.qls, "quality level")? };
            let (record, finals, bench) = campaign::run_single(c, spec, mcu, ql, run)?;
            let json = serde_json::to_string_pretty(&record).map_err(|e| Failure::Model(e.to_string()))?;
            println!("{json}");
            if !no_dump {
                std::fs::create_dir_all(&cfg.out).map_err(|e| io(&cfg.out, e))?;
                for (name, bytes) in bench.dump(&finals).map_err(|e| Failure::Model(e.to_string()))? {
                    let p = cfg.out.join(format!("{}_{}_{}_r{}_{}", record.benchmark, mcu, ql, run, name));
                    std::fs::write(&p, bytes).map_err(|e| io(&p, e))?;
                    eprintln!("wrote {}", p.display());
                }
            }
        }
        Command::Campaign { skip_unfit } => {
            let mut c = c.clone();
            c.skip_unfit |= skip_unfit;
            let res = campaign::run_campaign(&c)?;
            for (b, m) in &res.skipped {
                eprintln!("skipped {b} on {m}: does not fit in memory");
            }
            for p in campaign::write_outputs(&res, &cfg.out)? {
                eprintln!("wrote {}", p.display());
            }
            print!("{}", campaign::summary_csv(&res.cells)?);
        }
        Command::Tradeoff { summary } => {
            let path = summary.unwrap_or_else(|| cfg.out.join("summary.json"));
            let text = std::fs::read_to_string(&path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            #[derive(serde::Deserialize)]
            struct Summary {
                cells: Vec<CellSummary>,
            }
            let s: Summary =
                serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let dir = path.parent().map_or_else(|| cfg.out.clone(), Path::to_path_buf);
            let dir = cli.overrides.out.clone().unwrap_or(dir);
            for p in campaign::write_tradeoffs(&s.cells, &dir)? {
                eprintln!("wrote {}", p.display());
                let body = std::fs::read_to_string(&p).map_err(|e| io(&p, e))?;
                println!("# {}", p.file_name().and_then(|n| n.to_str()).unwrap_or_default());
                print!("{body}");
            }
        }
        Command::SizeCapacitor { energy } => {
            let cap = c.capacitor;
            if let Some(e) = energy {
                let uf = size_capacitor(e, cap.v_on, cap.v_off, cap.margin).map_err(|e| Failure::Model(e.to_string()))?;
                println!("{uf}");
                return Ok(());
            }
            let mut plans = Vec::new();
            for spec in &c.benchmarks {
                let bench = spec.build(&c.cost, c.nn_batch).map_err(|e| Failure::Model(e.to_string()))?;
                for m in &c.mcus {
                    let profile = c.profile(m)?;
                    if bench.memory_bytes() > profile.main_memory_bytes() {
                        eprintln!("skipped {} on {m}: does not fit in memory", bench.name());
                        continue;
                    }
                    plans.push(campaign::PairPlan {
                        benchmark: bench.name(),
                        mcu: m.clone(),
                        memory_bytes: bench.memory_bytes(),
                        plan: campaign::plan_for(bench.as_ref(), &profile, c)?,
                    });
                }
            }
            let json = serde_json::to_string_pretty(&plans).map_err(|e| Failure::Model(e.to_string()))?;
            println!("{json}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Model(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
