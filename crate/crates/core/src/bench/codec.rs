//! Lossy 8x8 block DCT image codec with integer arithmetic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{output, write_pgm, BenchError, Benchmark, CostCoefficients};
use crate::energy::WorkloadClass;
use crate::metrics::{rmse, Metric, QorValue};
use crate::runtime::{NvmImage, Pipeline, Task, TaskOutput};

pub const INPUT: &str = "codec_in";
pub const OUTPUT: &str = "codec_out";

/// Luminance quantization table at quality 50, row-major.
pub const LUMA_Q50: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, 12, 12, 14, 19, 26, 58, 60, 55, 14, 13, 16, 24, 40, 57, 69, 56, 14, 17, 22, 29, 51,
    87, 80, 62, 18, 22, 37, 56, 68, 109, 103, 77, 24, 35, 55, 64, 81, 104, 113, 92, 49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

const Q13: i64 = 1 << 13;

/// Orthonormal DCT-II basis in Q13: `D[u][x] = c(u) cos((2x + 1) u pi / 16)`.
pub fn dct_matrix() -> [[i64; 8]; 8] {
    let mut d = [[0i64; 8]; 8];
    for (u, row) in d.iter_mut().enumerate() {
        let c = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
        for (x, v) in row.iter_mut().enumerate() {
            let a = (2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0;
            *v = (c * a.cos() * Q13 as f64).round() as i64;
        }
    }
    d
}

/// Rounds `v / 2^s` to nearest, halves away from zero.
fn round_shift(v: i64, s: u32) -> i64 {
    let h = 1i64 << (s - 1);
    if v >= 0 {
        (v + h) >> s
    } else {
        -((-v + h) >> s)
    }
}

fn div_round(v: i64, d: i64) -> i64 {
    if v >= 0 {
        (v + d / 2) / d
    } else {
        -((-v + d / 2) / d)
    }
}

/// Forward transform of a level-shifted block; coefficients in pixel units.
pub fn forward_dct(block: &[i64; 64], d: &[[i64; 8]; 8]) -> [i64; 64] {
    let mut tmp = [0i64; 64];
    for u in 0..8 {
        for y in 0..8 {
            tmp[u * 8 + y] = (0..8).map(|x| d[u][x] * block[x * 8 + y]).sum();
        }
    }
    let mut out = [0i64; 64];
    for u in 0..8 {
        for v in 0..8 {
            let s: i64 = (0..8).map(|y| tmp[u * 8 + y] * d[v][y]).sum();
            out[u * 8 + v] = round_shift(s, 26);
        }
    }
    out
}

pub fn inverse_dct(coef: &[i64; 64], d: &[[i64; 8]; 8]) -> [i64; 64] {
    let mut tmp = [0i64; 64];
    for x in 0..8 {
        for v in 0..8 {
            tmp[x * 8 + v] = (0..8).map(|u| d[u][x] * coef[u * 8 + v]).sum();
        }
    }
    let mut out = [0i64; 64];
    for x in 0..8 {
        for y in 0..8 {
            let s: i64 = (0..8).map(|v| tmp[x * 8 + v] * d[v][y]).sum();
            out[x * 8 + y] = round_shift(s, 26);
        }
    }
    out
}

/// Encodes and decodes a `w x h` image block by block. `w` and `h` must be multiples of 8.
pub fn round_trip(pixels: &[u8], w: usize, h: usize, table: &[u16; 64]) -> Vec<u8> {
    let d = dct_matrix();
    let mut out = vec![0u8; w * h];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            let mut block = [0i64; 64];
            for r in 0..8 {
                for c in 0..8 {
                    block[r * 8 + c] = pixels[(by + r) * w + bx + c] as i64 - 128;
                }
            }
            let mut coef = forward_dct(&block, &d);
            for (k, q) in coef.iter_mut().zip(table) {
                *k = div_round(*k, *q as i64) * *q as i64;
            }
            let rec = inverse_dct(&coef, &d);
            for r in 0..8 {
                for c in 0..8 {
                    out[(by + r) * w + bx + c] = (rec[r * 8 + c] + 128).clamp(0, 255) as u8;
                }
            }
        }
    }
    out
}

/// Smooth synthetic texture: a few low-frequency gratings, a ramp and sensor noise.
pub fn texture(w: usize, h: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gratings: Vec<[f64; 4]> = (0..6)
        .map(|_| {
            [
                rng.random_range(0.0..0.25),
                rng.random_range(0.0..0.25),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(10.0..30.0),
            ]
        })
        .collect();
    let (gx, gy) = (rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
    let noise = Normal::new(0.0, 3.0).expect("valid sigma");
    let mut px = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut v = 128.0 + gx * x as f64 + gy * y as f64;
            for g in &gratings {
                v += g[3] * (g[0] * x as f64 + g[1] * y as f64 + g[2]).sin();
            }
            v += noise.sample(&mut rng);
            px.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    px
}

#[derive(Debug)]
pub struct CodecBench {
    w: usize,
    h: usize,
    pipeline: Pipeline,
}

impl CodecBench {
    pub fn new(w: usize, h: usize, coeffs: CostCoefficients) -> Result<Self, BenchError> {
        if w == 0 || h == 0 || w % 8 != 0 || h % 8 != 0 {
            return Err(BenchError::InvalidSpec(format!("codec image {w}x{h} is not tiled by 8x8 blocks")));
        }
        let blocks = (w / 8 * h / 8) as u64;
        let cycles = CostCoefficients::cycles(blocks * 2048, coeffs.mac)
            + CostCoefficients::cycles(blocks * 64 * 3, coeffs.pixel_op);
        let task = Task::new("codec", &[INPUT], &[OUTPUT], WorkloadClass::ImageCodec, move |ins| TaskOutput {
            buffers: vec![round_trip(ins[0], w, h, &LUMA_Q50)],
            base_cycles: cycles,
        });
        Ok(Self {
            w,
            h,
            pipeline: Pipeline::new(vec![task]),
        })
    }
}

impl Benchmark for CodecBench {
    fn name(&self) -> String {
        format!("codec_{}x{}", self.w, self.h)
    }

    fn workload(&self) -> WorkloadClass {
        WorkloadClass::ImageCodec
    }

    fn metric(&self) -> Option<Metric> {
        Some(Metric::Rmse)
    }

    fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    fn inputs(&self, seed: u64) -> Vec<NvmImage> {
        let mut image = NvmImage::new();
        image.preload(INPUT, texture(self.w, self.h, seed));
        vec![image]
    }

    fn qor(&self, approx: &[NvmImage], golden: &[NvmImage]) -> Result<Option<QorValue>, BenchError> {
        let a: Vec<f64> = output(&approx[0], OUTPUT)?.iter().map(|&p| p as f64).collect();
        let g: Vec<f64> = output(&golden[0], OUTPUT)?.iter().map(|&p| p as f64).collect();
        Ok(Some(QorValue::rmse(rmse(&a, &g)?)))
    }

    fn memory_bytes(&self) -> u64 {
        // One block of coefficients and its row-pass intermediate.
        256
    }

    fn dump(&self, images: &[NvmImage]) -> Result<Vec<(String, Vec<u8>)>, BenchError> {
        Ok(vec![("reconstruction.pgm".into(), write_pgm(self.w, self.h, output(&images[0], OUTPUT)?))])
    }
}
