//! Three-stage edge detector: smoothing, Sobel gradient, thinning with a threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{output, write_pgm, BenchError, Benchmark, CostCoefficients};
use crate::energy::WorkloadClass;
use crate::metrics::{precision_recall_masks, Metric, QorValue};
use crate::runtime::{NvmImage, Pipeline, Task, TaskOutput};

pub const INPUT: &str = "edge_in";
pub const SMOOTH: &str = "edge_smooth";
pub const MAGNITUDE: &str = "edge_mag";
pub const DIRECTION: &str = "edge_dir";
pub const EDGES: &str = "edge_map";

/// Minimum L1 Sobel magnitude of an edge pixel.
pub const THRESHOLD: u16 = 80;

fn at(img: &[u8], w: usize, h: usize, x: isize, y: isize) -> i32 {
    let x = x.clamp(0, w as isize - 1) as usize;
    let y = y.clamp(0, h as isize - 1) as usize;
    img[y * w + x] as i32
}

/// 3x3 binomial blur with replicated borders.
pub fn smooth(img: &[u8], w: usize, h: usize) -> Vec<u8> {
    const K: [[i32; 3]; 3] = [[1, 2, 1], [2, 4, 2], [1, 2, 1]];
    let mut out = vec![0u8; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut s = 0;
            for (dy, row) in K.iter().enumerate() {
                for (dx, k) in row.iter().enumerate() {
                    s += k * at(img, w, h, x + dx as isize - 1, y + dy as isize - 1);
                }
            }
            out[y as usize * w + x as usize] = ((s + 8) >> 4) as u8;
        }
    }
    out
}

/// Gradient direction quantized to 0 (horizontal), 1 and 3 (diagonals), 2 (vertical).
fn sector(gx: i32, gy: i32) -> u8 {
    let (ax, ay) = (gx.abs() as i64, gy.abs() as i64);
    if ay * 1000 <= ax * 414 {
        0
    } else if ax * 1000 <= ay * 414 {
        2
    } else if (gx > 0) == (gy > 0) {
        1
    } else {
        3
    }
}

/// L1 Sobel magnitude (little-endian `u16`) and direction sector per pixel.
pub fn sobel(img: &[u8], w: usize, h: usize) -> (Vec<u8>, Vec<u8>) {
    let mut mag = Vec::with_capacity(w * h * 2);
    let mut dir = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| at(img, w, h, x + dx, y + dy);
            let gx = p(1, -1) + 2 * p(1, 0) + p(1, 1) - p(-1, -1) - 2 * p(-1, 0) - p(-1, 1);
            let gy = p(-1, 1) + 2 * p(0, 1) + p(1, 1) - p(-1, -1) - 2 * p(0, -1) - p(1, -1);
            mag.extend_from_slice(&((gx.abs() + gy.abs()) as u16).to_le_bytes());
            dir.push(sector(gx, gy));
        }
    }
    (mag, dir)
}

/// Keeps pixels that reach `threshold` and peak along their gradient direction.
/// Output is one byte per pixel, 1 for edge.
pub fn thin(mag: &[u8], dir: &[u8], w: usize, h: usize, threshold: u16) -> Vec<u8> {
    let m = |x: isize, y: isize| -> u16 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0
        } else {
            let i = (y as usize * w + x as usize) * 2;
            u16::from_le_bytes([mag[i], mag[i + 1]])
        }
    };
    let mut out = vec![0u8; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let v = m(x, y);
            if v < threshold {
                continue;
            }
            let (dx, dy) = match dir[y as usize * w + x as usize] & 3 {
                0 => (1, 0),
                1 => (1, 1),
                2 => (0, 1),
                _ => (1, -1),
            };
            if v > m(x - dx, y - dy) && v >= m(x + dx, y + dy) {
                out[y as usize * w + x as usize] = 1;
            }
        }
    }
    out
}

/// Filled rectangles and discs on a flat background, with mild sensor noise.
pub fn scene(w: usize, h: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bg: f64 = rng.random_range(30.0..90.0);
    let mut px = vec![bg; w * h];
    let shapes = rng.random_range(2..5);
    for _ in 0..shapes {
        let level = if rng.random_bool(0.5) {
            rng.random_range(bg + 60.0..250.0)
        } else {
            rng.random_range(0.0..(bg - 30.0).max(1.0))
        };
        let cx = rng.random_range(0.15..0.85) * w as f64;
        let cy = rng.random_range(0.15..0.85) * h as f64;
        let rx = rng.random_range(0.08..0.25) * w as f64;
        let ry = rng.random_range(0.08..0.25) * h as f64;
        let disc = rng.random_bool(0.4);
        for y in 0..h {
            for x in 0..w {
                let (u, v) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                let inside = if disc { u * u + v * v <= 1.0 } else { u.abs() <= 1.0 && v.abs() <= 1.0 };
                if inside {
                    px[y * w + x] = level;
                }
            }
        }
    }
    let noise = Normal::new(0.0, 2.0).expect("valid sigma");
    px.iter()
        .map(|&v| (v + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
        .collect()
}

#[derive(Debug)]
pub struct EdgeBench {
    w: usize,
    h: usize,
    pipeline: Pipeline,
}

impl EdgeBench {
    pub fn new(w: usize, h: usize, coeffs: CostCoefficients) -> Result<Self, BenchError> {
        if w < 3 || h < 3 {
            return Err(BenchError::InvalidSpec(format!("edge image {w}x{h} is smaller than 3x3")));
        }
        let n = (w * h) as u64;
        let c = |ops: u64| CostCoefficients::cycles(n * ops, coeffs.pixel_op);
        let (c1, c2, c3) = (c(10), c(16), c(6));
        let tasks = vec![
            Task::new("smooth", &[INPUT], &[SMOOTH], WorkloadClass::Edge, move |ins| TaskOutput {
                buffers: vec![smooth(ins[0], w, h)],
                base_cycles: c1,
            }),
            Task::new("gradient", &[SMOOTH], &[MAGNITUDE, DIRECTION], WorkloadClass::Edge, move |ins| {
                let (mag, dir) = sobel(ins[0], w, h);
                TaskOutput {
                    buffers: vec![mag, dir],
                    base_cycles: c2,
                }
            }),
            Task::new("thin", &[MAGNITUDE, DIRECTION], &[EDGES], WorkloadClass::Edge, move |ins| TaskOutput {
                buffers: vec![thin(ins[0], ins[1], w, h, THRESHOLD)],
                base_cycles: c3,
            }),
        ];
        Ok(Self {
            w,
            h,
            pipeline: Pipeline::new(tasks),
        })
    }
}

fn mask(image: &NvmImage) -> Result<Vec<bool>, BenchError> {
    Ok(output(image, EDGES)?.iter().map(|&b| b != 0).collect())
}

impl Benchmark for EdgeBench {
    fn name(&self) -> String {
        format!("edge_{}x{}", self.w, self.h)
    }

    fn workload(&self) -> WorkloadClass {
        WorkloadClass::Edge
    }

    fn metric(&self) -> Option<Metric> {
        Some(Metric::PrecisionRecall)
    }

    fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    fn inputs(&self, seed: u64) -> Vec<NvmImage> {
        let mut image = NvmImage::new();
        image.preload(INPUT, scene(self.w, self.h, seed));
        vec![image]
    }

    fn qor(&self, approx: &[NvmImage], golden: &[NvmImage]) -> Result<Option<QorValue>, BenchError> {
        let (p, r) = precision_recall_masks(&mask(&approx[0])?, &mask(&golden[0])?)?;
        Ok(Some(QorValue::precision_recall(p, r)))
    }

    fn memory_bytes(&self) -> u64 {
        // A 3x3 window of pixels and gradients plus loop state.
        256
    }

    fn dump(&self, images: &[NvmImage]) -> Result<Vec<(String, Vec<u8>)>, BenchError> {
        let map: Vec<u8> = output(&images[0], EDGES)?.iter().map(|&b| if b != 0 { 255 } else { 0 }).collect();
        Ok(vec![
            ("smoothed.pgm".into(), write_pgm(self.w, self.h, output(&images[0], SMOOTH)?)),
            ("edges.pgm".into(), write_pgm(self.w, self.h, &map)),
        ])
    }
}
