use std::path::PathBuf;

use super::*;
use crate::energy::McuCatalog;
use crate::runtime::golden_run;

fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// Set `IMC_SIM_WRITE_WEIGHTS=1` to refresh the frozen blobs from the builder.
#[test]
fn frozen_blobs_match_builder() {
    let write = std::env::var_os("IMC_SIM_WRITE_WEIGHTS").is_some();
    for side in [16, 32] {
        let (f, q) = build(side);
        let qname = format!("nn{side}_quant.imcw");
        let fname = format!("nn{side}_float.imcw");
        if write {
            std::fs::write(data_path(&qname), q.to_blob()).unwrap();
            std::fs::write(data_path(&fname), f.to_blob()).unwrap();
            continue;
        }
        let frozen_q = QuantNet::from_blob(&std::fs::read(data_path(&qname)).unwrap()).unwrap();
        assert_eq!(frozen_q, q, "{qname}");
        let frozen_f = FloatNet::from_blob(&std::fs::read(data_path(&fname)).unwrap()).unwrap();
        for (a, b) in frozen_f.layers.iter().zip(&f.layers) {
            for (x, y) in a.weights.iter().chain(&a.bias).zip(b.weights.iter().chain(&b.bias)) {
                assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0), "{fname}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn tiles_partition_the_inputs() {
    for (n, t) in [(256, 256), (1024, 256), (128, 128), (64, 1), (10, 256)] {
        let r = tile_ranges(n, t);
        assert_eq!(r.len(), t.min(n));
        assert_eq!(r[0].start, 0);
        assert_eq!(r.last().unwrap().end, n);
        assert!(r.windows(2).all(|w| w[0].end == w[1].start && !w[1].is_empty()));
    }
}

#[test]
fn argmax_ignores_nan() {
    assert_eq!(argmax_f32(&[f32::NAN, 1.0, 3.0, 3.0]), 2);
    assert_eq!(argmax_f32(&[f32::NAN, f32::NAN]), 0);
    assert_eq!(argmax_f32(&[0.0, f32::INFINITY, f32::INFINITY]), 1);
    assert_eq!(argmax_i8(&[-5, 7, 7, -128]), 1);
}

fn logits(b: &NnBench, image: &NvmImage) -> Vec<u8> {
    let m = McuCatalog::default().get("M7").unwrap().clone();
    golden_run(b.pipeline(), image, &m).unwrap().image.read(LOGITS).unwrap().to_vec()
}

#[test]
fn tiled_integer_pipeline_matches_scalar_oracle() {
    for side in [16, 32] {
        let b = NnBench::new(side, true, 6, CostCoefficients::default()).unwrap();
        let net = b.quant_net().unwrap();
        for (s, img) in b.samples(5).iter().zip(b.inputs(5)) {
            let want: Vec<u8> = quant_oracle(net, &s.pixels).into_iter().map(|v| v as u8).collect();
            assert_eq!(logits(&b, &img), want, "side {side}");
        }
    }
}

#[test]
fn float_pipeline_matches_scalar_pass() {
    let b = NnBench::new(16, false, 4, CostCoefficients::default()).unwrap();
    let net = b.float_net().unwrap();
    for (s, img) in b.samples(9).iter().zip(b.inputs(9)) {
        assert_eq!(bytes_to_f32s(&logits(&b, &img)), float_forward(net, &s.pixels));
    }
}

#[test]
fn both_variants_classify_well() {
    for side in [16, 32] {
        let (f, q) = build(side);
        let protos = prototypes(side);
        let samples: Vec<Sample> = (0..200).map(|i| sample(side, &protos, 77_000 + i)).collect();
        let fa = samples.iter().filter(|s| argmax_f32(&float_forward(&f, &s.pixels)) == s.class).count();
        let qa = samples.iter().filter(|s| argmax_i8(&quant_oracle(&q, &s.pixels)) == s.class).count();
        assert!(fa >= 190, "side {side} float {fa}/200");
        assert!(qa >= 190, "side {side} quant {qa}/200");
    }
}

#[test]
fn pipeline_shape_and_cost() {
    let b = NnBench::new(16, true, 1, CostCoefficients::default()).unwrap();
    assert_eq!(b.pipeline().tasks.len(), 256 + 128 + 1);
    let m = McuCatalog::default().get("M33").unwrap().clone();
    let g = golden_run(b.pipeline(), &b.inputs(0)[0], &m).unwrap();
    let macs = 256 * 128 + 128 * 64 + 64 * 10;
    let outs = 256 * 128 + 128 * 64 + 10;
    assert_eq!(g.cost.cycles, (macs + outs) as u64);
    // Partial sums are 16-bit; layer outputs are int8.
    let bits = 255 * 128 * 16 + 128 * 8 + 127 * 64 * 16 + 64 * 8 + 10 * 8;
    assert_eq!(g.cost.bits_written, bits);
    assert!(b.memory_bytes() > 32 * 1024 && b.memory_bytes() < 128 * 1024);
}

#[test]
fn perfect_agreement_against_itself() {
    let b = NnBench::new(16, true, 3, CostCoefficients::default()).unwrap();
    let m = McuCatalog::default().get("M7").unwrap().clone();
    let imgs: Vec<NvmImage> = b.inputs(1).iter().map(|i| golden_run(b.pipeline(), i, &m).unwrap().image).collect();
    assert!(b.qor(&imgs, &imgs).unwrap().unwrap().is_perfect());
}
