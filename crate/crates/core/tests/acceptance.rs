//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::time::{Duration, Instant};

use imc_sim::bench::nn::{quant_oracle, NnBench, LOGITS};
use imc_sim::bench::{codec, fft, BenchSpec, Benchmark, CostCoefficients};
use imc_sim::campaign::{paired_t_test, records_csv, run_campaign, summary_json, CampaignConfig, CampaignResult};
use imc_sim::energy::{size_capacitor, total_energy, savings_vs_baseline, Capacitor, CostReport, McuCatalog};
use imc_sim::metrics::Metric;
use imc_sim::nvm::{inject_write, InjectionMode, QlCatalog, QlId};
use imc_sim::report;
use imc_sim::runtime::{golden_run, ChargePolicy, FailureSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RUNS: usize = 200;
const ALPHA: f64 = 0.01;
const STORAGE_REL_TOL: f64 = 1e-9;
const M33_Q4_FLOOR_PCT: f64 = 65.0;
const INJECTED_BITS: usize = 1 << 20;
const SIGMAS: f64 = 4.0;
const NN_Q1_AGREEMENT: f64 = 0.99;
const NN_CHANCE: f64 = 0.1;
const NN_Q4_ABOVE_CHANCE: f64 = 0.2;
const CODEC_Q1_RMSE: f64 = 1.0;
const CODEC_Q4_RMSE: f64 = 2.0;
const EDGE_Q1_DEGRADATION: f64 = 0.01;
const EDGE_Q4_DEGRADATION: f64 = 0.1;
const FFT_Q1_EXCEED: f64 = 0.02;
const FFT_Q4_EXCEED: f64 = 0.5;
const GAP_Q4: f64 = 0.05;
const FFT_MSP430G_Q4_PCT: f64 = 5.0;
const FFT_ULP: f64 = 2.0;
const CODEC_LEVELS: u8 = 1;
const CHARACTERIZE_BUDGET: Duration = Duration::from_secs(1);
const INJECTION_BUDGET: Duration = Duration::from_secs(60);

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn qls() -> [QlId; 4] {
    [QlId::Q1, QlId::Q2, QlId::Q3, QlId::Q4]
}

fn c1_characterization() -> Outcome {
    let t = Instant::now();
    let cat = QlCatalog::default();
    let text = report::characterize(&cat, &McuCatalog::default(), &[], &[]);
    let elapsed = t.elapsed();
    let want = [
        ("Q0", 1e-8, 1153.0, 167.0, "1.000"),
        ("Q1", 1e-6, 865.0, 94.0, "0.563"),
        ("Q2", 1e-5, 769.0, 74.0, "0.443"),
        ("Q3", 1e-4, 673.0, 57.0, "0.341"),
        ("Q4", 1e-3, 577.0, 43.0, "0.257"),
    ];
    let mut ok = elapsed < CHARACTERIZE_BUDGET;
    for (row, (id, wer, cur, e, ratio)) in report::ql_rows(&cat).iter().zip(want) {
        ok &= row.id.as_str() == id && row.wer == wer && row.set_current_ua == cur && row.write_energy_pj == e;
        ok &= format!("{:.3}", row.ratio) == ratio;
        let line: Vec<&str> = text.lines().find(|l| l.starts_with(id)).unwrap_or("").split_whitespace().collect();
        ok &= line.get(4) == Some(&ratio);
    }
    let pct = |q| format!("{:.1}%", 100.0 * cat.energy_ratio(q));
    ok &= pct(QlId::Q1) == "56.3%" && pct(QlId::Q4) == "25.7%";
    outcome(ok, format!("Q1 {} Q4 {} of Q0 per-bit energy, {:.1} ms", pct(QlId::Q1), pct(QlId::Q4), elapsed.as_secs_f64() * 1e3))
}

fn only_writes(k: Option<f64>) -> CampaignResult {
    let cfg = CampaignConfig {
        runs: 3,
        benchmarks: vec![BenchSpec::OnlyWrites { n_bytes: 4096 }],
        mcus: McuCatalog::default().names(),
        cycles_per_mem_access: k,
        ..CampaignConfig::default()
    };
    run_campaign(&cfg).expect("OnlyWrites campaign")
}

fn c2_storage_only() -> Outcome {
    let res = only_writes(Some(0.0));
    let cat = QlCatalog::default();
    let mut worst: f64 = 0.0;
    for c in &res.cells {
        let want = 1.0 - cat.get(c.ql).write_energy_per_bit_pj / 167.0;
        let got = c.saving_pct / 100.0;
        let err = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
        worst = worst.max(err);
    }
    outcome(worst <= STORAGE_REL_TOL && res.cells.len() == 7 * 5, format!("max relative error {worst:.2e}"))
}

fn c3_upper_bound_ordering() -> Outcome {
    let res = only_writes(None);
    let cat = McuCatalog::default();
    let mut rows: Vec<(f64, f64, String)> = res
        .cells
        .iter()
        .filter(|c| c.ql == QlId::Q4)
        .map(|c| (cat.get(&c.mcu).unwrap().active_power_uw_per_mhz, c.saving_pct, c.mcu.clone()))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ok = rows.first().map(|r| r.2.as_str()) == Some("M33") && rows.last().map(|r| r.2.as_str()) == Some("MSP430G");
    for w in rows.windows(2) {
        ok &= if w[0].0 == w[1].0 { w[0].1 == w[1].1 } else { w[0].1 > w[1].1 };
    }
    let m33 = rows[0].1;
    ok &= m33 > M33_Q4_FLOOR_PCT;
    let list: Vec<String> = rows.iter().map(|r| format!("{} {:.1}%", r.2, r.1)).collect();
    outcome(ok, list.join(", "))
}

fn c4_injection() -> Outcome {
    let t = Instant::now();
    let cat = QlCatalog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data: Vec<u8> = (0..INJECTED_BITS / 8).map(|_| rng.random()).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for q in qls() {
        let ql = cat.get(q);
        let out = inject_write(&data, None, ql, InjectionMode::FlipNew, &mut rng).expect("valid rate");
        let flips: u64 = data.iter().zip(&out).map(|(a, b)| (a ^ b).count_ones() as u64).sum();
        let n = INJECTED_BITS as f64;
        let sigma = (n * ql.wer * (1.0 - ql.wer)).sqrt();
        let within = (flips as f64 - n * ql.wer).abs() <= SIGMAS * sigma;
        ok &= within;
        parts.push(format!("{q} {flips}/{:.1}", n * ql.wer));
    }
    ok &= t.elapsed() < INJECTION_BUDGET;
    outcome(ok, format!("{INJECTED_BITS} bits per level: {}", parts.join(", ")))
}

fn quality_campaign() -> CampaignResult {
    let cfg = CampaignConfig {
        runs: RUNS,
        benchmarks: vec![
            BenchSpec::Fft { n: 256 },
            BenchSpec::Codec { w: 64, h: 64 },
            BenchSpec::Edge { w: 64, h: 64 },
            BenchSpec::Nn { side: 16, quantized: true },
            BenchSpec::Nn { side: 16, quantized: false },
            BenchSpec::Nn { side: 32, quantized: true },
            BenchSpec::Nn { side: 32, quantized: false },
        ],
        mcus: vec!["M33".into()],
        ..CampaignConfig::default()
    };
    run_campaign(&cfg).expect("quality campaign")
}

fn degradations(res: &CampaignResult, bench: &str, ql: QlId) -> Vec<f64> {
    res.runs(bench, "M33", ql).iter().filter_map(|r| r.qor.map(|q| q.degradation())).collect()
}

fn c5_monotonicity(res: &CampaignResult) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let benches: Vec<String> = res.plans.iter().map(|p| p.benchmark.clone()).collect();
    for b in &benches {
        let cell = |q| res.cell(b, "M33", q).and_then(|c| c.qor.clone()).expect("metric cell");
        for w in qls().windows(2) {
            let t = paired_t_test(&degradations(res, b, w[1]), &degradations(res, b, w[0])).expect("paired runs");
            if t.p_less < ALPHA {
                ok = false;
                notes.push(format!("{b} {}>{} decreases (p={:.3})", w[0], w[1], t.p_less));
            }
        }
        let (q1, q4) = (cell(QlId::Q1), cell(QlId::Q4));
        let (near_zero, unusable) = match q1.metric {
            Metric::Agreement if b.ends_with("_float") => (None, q4.value_mean <= NN_CHANCE + NN_Q4_ABOVE_CHANCE),
            Metric::Agreement => (Some(q1.value_mean >= NN_Q1_AGREEMENT), q4.value_mean <= NN_CHANCE + NN_Q4_ABOVE_CHANCE),
            Metric::Rmse => (Some(q1.value_mean <= CODEC_Q1_RMSE), q4.value_mean >= CODEC_Q4_RMSE),
            Metric::PrecisionRecall => (Some(q1.degradation_mean <= EDGE_Q1_DEGRADATION), q4.degradation_mean >= EDGE_Q4_DEGRADATION),
            Metric::Are => (Some(q1.exceed_fraction <= FFT_Q1_EXCEED), q4.exceed_fraction > FFT_Q4_EXCEED),
        };
        if near_zero == Some(false) {
            ok = false;
            notes.push(format!("{b} Q1 not near zero"));
        }
        if !unusable {
            ok = false;
            notes.push(format!("{b} Q4 still usable"));
        }
        let shown = if q1.metric == Metric::Are { q4.exceed_fraction } else { q4.value_mean };
        notes.push(format!("{b} Q1 {:.4} Q4 {:.4}", q1.value_mean, shown));
    }
    let fft: Vec<f64> = qls()
        .iter()
        .map(|&q| res.cell("fft_256", "M33", q).and_then(|c| c.qor.clone()).unwrap().exceed_fraction)
        .collect();
    let fft_ok = fft[1] > 0.0 && fft.windows(2).all(|w| w[1] > w[0]);
    ok &= fft_ok;
    notes.push(format!("FFT ARE>5% fraction Q1..Q4 {fft:.3?}"));
    outcome(ok, notes.join("; "))
}

fn agreement(res: &CampaignResult, bench: &str, ql: QlId) -> f64 {
    res.cell(bench, "M33", ql).and_then(|c| c.qor.clone()).expect("agreement cell").value_mean
}

fn c6_quantization(res: &CampaignResult) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for side in [16, 32] {
        let f1 = agreement(res, &format!("nn_{side}_float"), QlId::Q1);
        let q3 = agreement(res, &format!("nn_{side}_quant"), QlId::Q3);
        ok &= f1 < q3;
        notes.push(format!("{side}x{side}: float Q1 {f1:.4} vs quant Q3 {q3:.4}"));
    }
    outcome(ok, notes.join("; "))
}

fn c7_input_size(res: &CampaignResult) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for q in [QlId::Q2, QlId::Q3] {
        let a32 = res.qor_values("nn_32_quant", "M33", q);
        let a16 = res.qor_values("nn_16_quant", "M33", q);
        let t = paired_t_test(&a32, &a16).expect("paired runs");
        let pass = t.mean_diff >= 0.0 && t.p_greater < ALPHA;
        ok &= pass;
        notes.push(format!("{q}: 32 {:.4} vs 16 {:.4} (one-sided p {:.2e})", agreement(res, "nn_32_quant", q), agreement(res, "nn_16_quant", q), t.p_greater));
    }
    let (a32, a16) = (agreement(res, "nn_32_quant", QlId::Q4), agreement(res, "nn_16_quant", QlId::Q4));
    ok &= (a32 - a16).abs() <= GAP_Q4 && a32.max(a16) <= NN_CHANCE + NN_Q4_ABOVE_CHANCE;
    notes.push(format!("Q4: 32 {a32:.4} vs 16 {a16:.4}"));
    outcome(ok, notes.join("; "))
}

fn c8_compute_dilution() -> Outcome {
    let cat = McuCatalog::default();
    let qcat = QlCatalog::default();
    let mut ok = true;
    for mcu in cat.iter() {
        for q in qls() {
            let mut last = f64::INFINITY;
            for ratio in [0u64, 1, 4, 16, 64, 256, 1024, 4096] {
                let accesses = 1000;
                let cost = CostReport {
                    cycles: ratio * accesses,
                    mem_accesses: accesses,
                    bits_written: accesses * u64::from(mcu.access_width_bits),
                };
                let e = total_energy(&cost, mcu, qcat.get(q)).unwrap();
                let e0 = total_energy(&cost, mcu, qcat.get(QlId::Q0)).unwrap();
                let s = savings_vs_baseline(&e, &e0).unwrap();
                ok &= s < last;
                last = s;
            }
        }
    }
    let cfg = CampaignConfig {
        runs: 3,
        benchmarks: vec![BenchSpec::Fft { n: 256 }],
        mcus: vec!["MSP430G".into(), "M33".into()],
        ..CampaignConfig::default()
    };
    let res = run_campaign(&cfg).expect("FFT campaign");
    let g = res.cell("fft_256", "MSP430G", QlId::Q4).unwrap().saving_pct;
    let m = res.cell("fft_256", "M33", QlId::Q4).unwrap().saving_pct;
    ok &= g < FFT_MSP430G_Q4_PCT && g < m;
    outcome(ok, format!("FFT Q4 saving MSP430G {g:.2}% (M33 {m:.2}%); synthetic sweep strictly decreasing: {ok}"))
}

fn c9_transactionality() -> Outcome {
    let mut ok = true;
    let mut failures = 0.0;
    let times: Vec<f64> = (0..4000).map(|i| i as f64 * 997.0 + 13.0).collect();
    for charge in [ChargePolicy::BeforeEachAttempt, ChargePolicy::OnBrownOut] {
        for spec in ["fft_64", "codec_32x32", "edge_32x32", "nn_16_quant"] {
            let cfg = CampaignConfig {
                runs: 3,
                benchmarks: vec![spec.parse().unwrap()],
                mcus: vec!["M4".into()],
                qls: vec![QlId::Q0],
                nn_batch: 1,
                charge,
                failures: FailureSchedule::new(times.clone()),
                ..CampaignConfig::default()
            };
            let res = run_campaign(&cfg).expect("scripted-failure campaign");
            let cell = &res.cells[0];
            ok &= cell.qor.as_ref().is_some_and(|q| q.degradation_mean == 0.0);
            failures += cell.failures_mean;
            let bench = cfg.benchmarks[0].build(&cfg.cost, cfg.nn_batch).unwrap();
            let mcu = cfg.profile("M4").unwrap();
            for run in 0..cfg.runs {
                let (_, finals, _) = imc_sim::campaign::run_single(&cfg, &cfg.benchmarks[0], "M4", QlId::Q0, run).unwrap();
                let inputs = bench.inputs(imc_sim::campaign::input_seed(cfg.seed, &bench.name(), run));
                let golden: Vec<_> = inputs.iter().map(|i| golden_run(bench.pipeline(), i, &mcu).unwrap().image).collect();
                ok &= bench.dump(&finals).unwrap() == bench.dump(&golden).unwrap();
            }
        }
    }
    ok &= failures > 0.0;

    let cfg = CampaignConfig {
        runs: 8,
        benchmarks: vec!["fft_64".parse().unwrap(), "edge_32x32".parse().unwrap(), "nn_16_quant".parse().unwrap()],
        mcus: vec!["M33".into()],
        nn_batch: 2,
        workers: 1,
        ..CampaignConfig::default()
    };
    let a = run_campaign(&cfg).unwrap();
    let b = run_campaign(&cfg).unwrap();
    let p = run_campaign(&CampaignConfig { workers: 4, ..cfg }).unwrap();
    let same = records_csv(&a.records).unwrap() == records_csv(&b.records).unwrap()
        && summary_json(&a).unwrap() == summary_json(&b).unwrap();
    let parallel = records_csv(&a.records).unwrap() == records_csv(&p.records).unwrap() && a.cells == p.cells;
    ok &= same && parallel;
    outcome(ok, format!("Q0 outputs equal golden under {failures:.0} mean scripted failures; repeat identical {same}; parallel = sequential {parallel}"))
}

fn c10_oracles() -> Outcome {
    let mut worst_ulp: f64 = 0.0;
    for seed in 0..50 {
        let x = fft::tone_signal(256, seed);
        let mut y = x.clone();
        fft::fft_q15(&mut y, &fft::twiddles(256));
        for (&(r, i), &(or, oi)) in y.iter().zip(&fft::dft_oracle(&x)) {
            worst_ulp = worst_ulp.max((r as f64 - or).abs()).max((i as f64 - oi).abs());
        }
    }
    let mut worst_level = 0u8;
    for seed in 0..10 {
        let img = codec::texture(64, 64, seed);
        let rec = codec::round_trip(&img, 64, 64, &[1; 64]);
        worst_level = worst_level.max(img.iter().zip(&rec).map(|(a, b)| a.abs_diff(*b)).max().unwrap());
    }
    let mut nn_exact = true;
    let m = McuCatalog::default().get("M33").unwrap().clone();
    for side in [16, 32] {
        let b = NnBench::new(side, true, 4, CostCoefficients::default()).unwrap();
        let net = b.quant_net().unwrap();
        for seed in 0..5 {
            for (s, img) in b.samples(seed).iter().zip(b.inputs(seed)) {
                let g = golden_run(b.pipeline(), &img, &m).unwrap();
                let want: Vec<u8> = quant_oracle(net, &s.pixels).into_iter().map(|v| v as u8).collect();
                nn_exact &= g.image.read(LOGITS).unwrap() == want.as_slice();
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut caps_ok = true;
    for _ in 0..1000 {
        let e: f64 = 10f64.powf(rng.random_range(0.0..10.0));
        let uf = size_capacitor(e, 3.0, 2.2, 1.1).unwrap();
        caps_ok &= Capacitor::new(uf, 3.0, 2.2, 0.0).unwrap().usable_energy_pj() >= e;
    }
    let ok = worst_ulp <= FFT_ULP && worst_level <= CODEC_LEVELS && nn_exact && caps_ok;
    outcome(
        ok,
        format!("FFT {worst_ulp:.3} ULP, codec {worst_level} level, NN exact {nn_exact}, capacitor round trip {caps_ok}"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let tag = if o.ok { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {name} ({:.1} s): {}", t.elapsed().as_secs_f64(), o.detail);
        if !o.ok {
            failed += 1;
        }
    };
    report(1, "quality-level characterization", &c1_characterization);
    report(2, "storage-only limit", &c2_storage_only);
    report(3, "upper-bound ordering", &c3_upper_bound_ordering);
    report(4, "injection statistics", &c4_injection);
    let t = Instant::now();
    let res = quality_campaign();
    println!("      quality campaign: {} records in {:.1} s", res.records.len(), t.elapsed().as_secs_f64());
    report(5, "QoR monotonicity", &|| c5_monotonicity(&res));
    report(6, "quantization effect", &|| c6_quantization(&res));
    report(7, "input-size effect", &|| c7_input_size(&res));
    report(8, "compute dilution", &c8_compute_dilution);
    report(9, "transactionality and determinism", &c9_transactionality);
    report(10, "oracle equivalence", &c10_oracles);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
