//! Fully connected image classifier, in float and int8 variants.
//!
//! Each layer's dot products are split into tiles. A tile task adds its slice of
//! inputs to the running accumulators and commits them, so partial sums live in
//! NVM between tasks. The last tile of a layer adds the bias, applies the
//! activation and commits the layer output.

pub mod model;

use std::ops::Range;
use std::sync::Arc;

pub use model::{build, prototypes, sample, FloatLayer, FloatNet, QuantLayer, QuantNet, Sample, CLASSES};

use super::{bytes_to_f32s, bytes_to_i16s, f32s_to_bytes, i16s_to_bytes, output, BenchError, Benchmark, CostCoefficients};
use crate::energy::WorkloadClass;
use crate::metrics::{agreement, Metric, QorValue};
use crate::rng::derive;
use crate::runtime::{NvmImage, Pipeline, Task, TaskOutput};

pub const INPUT: &str = "nn_in";
pub const LOGITS: &str = "nn_logits";
/// Tile count per layer; a layer never has more tiles than inputs.
pub const TILES: [usize; 3] = [256, 128, 1];

const QUANT16: &[u8] = include_bytes!("../../../data/nn16_quant.imcw");
const FLOAT16: &[u8] = include_bytes!("../../../data/nn16_float.imcw");
const QUANT32: &[u8] = include_bytes!("../../../data/nn32_quant.imcw");
const FLOAT32: &[u8] = include_bytes!("../../../data/nn32_float.imcw");

fn ps_buffer(layer: usize) -> String {
    format!("nn_ps{}", layer + 1)
}

fn act_buffer(layer: usize, n_layers: usize) -> String {
    if layer + 1 == n_layers {
        LOGITS.to_string()
    } else {
        format!("nn_act{}", layer + 1)
    }
}

/// Input index ranges of the tiles of a layer with `inputs` inputs.
pub fn tile_ranges(inputs: usize, tiles: usize) -> Vec<Range<usize>> {
    let t = tiles.clamp(1, inputs.max(1));
    (0..t).map(|k| k * inputs / t..(k + 1) * inputs / t).collect()
}

fn sat16(v: i64) -> i16 {
    v.clamp(i16::MIN as i64, i16::MAX as i64) as i16
}

fn shift_round(v: i64, s: u32) -> i64 {
    if s == 0 {
        v
    } else {
        (v + (1 << (s - 1))) >> s
    }
}

fn requantize(l: &QuantLayer, acc: i64) -> i8 {
    let v = ((acc as i128 * l.mult as i128 + (1i128 << (l.rshift - 1))) >> l.rshift) as i64 + l.out_zp as i64;
    v.clamp(l.out_min as i64, 127) as i8
}

/// Zero-point-corrected activations of a quantized layer input.
fn quant_inputs(l: &QuantLayer, bytes: &[u8], pixels: bool) -> Vec<i64> {
    bytes
        .iter()
        .map(|&b| {
            let q = if pixels { b as i64 - 128 } else { b as i8 as i64 };
            q - l.in_zp as i64
        })
        .collect()
}

fn quant_tile(l: &QuantLayer, x: &[i64], ps: Option<&[u8]>, range: Range<usize>, last: bool) -> Vec<u8> {
    let mut acc: Vec<i64> = match ps {
        Some(p) => bytes_to_i16s(p).into_iter().map(|v| (v as i64) << l.ps_shift).collect(),
        None => vec![0; l.outputs],
    };
    for (o, a) in acc.iter_mut().enumerate() {
        let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
        *a += range.clone().map(|j| row[j] as i64 * x[j]).sum::<i64>();
    }
    if last {
        acc.iter()
            .zip(&l.bias)
            .map(|(&a, &b)| requantize(l, a + b as i64) as u8)
            .collect()
    } else {
        let ps: Vec<i16> = acc.iter().map(|&a| sat16(shift_round(a, l.ps_shift))).collect();
        i16s_to_bytes(&ps)
    }
}

fn float_tile(l: &FloatLayer, x: &[f32], ps: Option<&[u8]>, range: Range<usize>, last: bool, relu: bool) -> Vec<u8> {
    let mut acc = match ps {
        Some(p) => bytes_to_f32s(p),
        None => vec![0.0; l.outputs],
    };
    for (o, a) in acc.iter_mut().enumerate() {
        let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
        let mut s = 0.0f32;
        for j in range.clone() {
            s += row[j] * x[j];
        }
        *a += s;
    }
    if last {
        for (a, b) in acc.iter_mut().zip(&l.bias) {
            *a += b;
            if relu {
                // `max` maps NaN to zero as well.
                *a = a.max(0.0);
            }
        }
    }
    f32s_to_bytes(&acc)
}

/// Scalar reference for the tiled integer forward pass. Returns the logits.
pub fn quant_oracle(net: &QuantNet, pixels: &[u8]) -> Vec<i8> {
    let mut q: Vec<i64> = pixels.iter().map(|&p| p as i64 - 128).collect();
    for (li, l) in net.layers.iter().enumerate() {
        let mut next = Vec::with_capacity(l.outputs);
        let tiles = tile_ranges(l.inputs, TILES[li]);
        let unit = 1i64 << l.ps_shift;
        for o in 0..l.outputs {
            let mut acc = 0i64;
            for (t, r) in tiles.iter().enumerate() {
                for j in r.clone() {
                    acc += l.weights[o * l.inputs + j] as i64 * (q[j] - l.in_zp as i64);
                }
                if t + 1 < tiles.len() {
                    let scaled = (acc + unit / 2).div_euclid(unit);
                    acc = scaled.clamp(-32768, 32767) * unit;
                }
            }
            acc += l.bias[o] as i64;
            let prod = acc as i128 * l.mult as i128;
            let den = 1i128 << l.rshift;
            let v = (prod + den / 2).div_euclid(den) as i64 + l.out_zp as i64;
            next.push(v.clamp(l.out_min as i64, 127));
        }
        q = next;
    }
    q.into_iter().map(|v| v as i8).collect()
}

/// Scalar float forward pass on pixel values.
pub fn float_forward(net: &FloatNet, pixels: &[u8]) -> Vec<f32> {
    let mut x: Vec<f32> = pixels.iter().map(|&p| p as f32).collect();
    let n = net.layers.len();
    for (li, l) in net.layers.iter().enumerate() {
        let mut acc = vec![0.0f32; l.outputs];
        for r in tile_ranges(l.inputs, TILES[li]) {
            let bytes = float_tile(l, &x, Some(&f32s_to_bytes(&acc)), r, false, false);
            acc = bytes_to_f32s(&bytes);
        }
        x = acc
            .iter()
            .zip(&l.bias)
            .map(|(a, b)| if li + 1 < n { (a + b).max(0.0) } else { a + b })
            .collect();
    }
    x
}

/// Index of the largest logit; NaN never wins, ties go to the lowest index.
pub fn argmax_f32(v: &[f32]) -> usize {
    let mut best = 0;
    let mut best_v = f32::NEG_INFINITY;
    for (i, &x) in v.iter().enumerate() {
        let x = if x.is_nan() { f32::NEG_INFINITY } else { x };
        if x > best_v {
            best = i;
            best_v = x;
        }
    }
    best
}

pub fn argmax_i8(v: &[i8]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
enum Net {
    Quant(Arc<QuantNet>),
    Float(Arc<FloatNet>),
}

/// Frozen weights for the shipped input sizes, built on the fly for any other size.
fn load(side: usize, quantized: bool) -> Result<Net, BenchError> {
    Ok(match (side, quantized) {
        (16, true) => Net::Quant(Arc::new(QuantNet::from_blob(QUANT16)?)),
        (32, true) => Net::Quant(Arc::new(QuantNet::from_blob(QUANT32)?)),
        (16, false) => Net::Float(Arc::new(FloatNet::from_blob(FLOAT16)?)),
        (32, false) => Net::Float(Arc::new(FloatNet::from_blob(FLOAT32)?)),
        _ => {
            let (f, q) = build(side);
            if quantized {
                Net::Quant(Arc::new(q))
            } else {
                Net::Float(Arc::new(f))
            }
        }
    })
}

fn tile_task(
    li: usize,
    t: usize,
    tiles: usize,
    n_layers: usize,
    workload: WorkloadClass,
    cycles: u64,
    step: Arc<dyn Fn(&[u8], Option<&[u8]>, bool) -> Vec<u8> + Send + Sync>,
) -> Task {
    let input = if li == 0 { INPUT.to_string() } else { act_buffer(li - 1, n_layers) };
    let ps = ps_buffer(li);
    let last = t + 1 == tiles;
    let out = if last { act_buffer(li, n_layers) } else { ps.clone() };
    let ins: Vec<&str> = if t == 0 { vec![&input] } else { vec![&input, &ps] };
    Task::new(format!("l{}_t{t:03}", li + 1), &ins, &[&out], workload, move |bufs| TaskOutput {
        buffers: vec![step(bufs[0], bufs.get(1).copied(), last)],
        base_cycles: cycles,
    })
}

#[derive(Debug)]
pub struct NnBench {
    side: usize,
    quantized: bool,
    batch: usize,
    net: Net,
    pipeline: Pipeline,
}

impl NnBench {
    pub fn new(side: usize, quantized: bool, batch: usize, coeffs: CostCoefficients) -> Result<Self, BenchError> {
        if !(4..=64).contains(&side) || batch == 0 {
            return Err(BenchError::InvalidSpec(format!("nn side {side}, batch {batch}")));
        }
        let net = load(side, quantized)?;
        let workload = if quantized { WorkloadClass::NnQuant } else { WorkloadClass::NnFloat };
        let shapes: Vec<(usize, usize)> = match &net {
            Net::Quant(q) => q.layers.iter().map(|l| (l.outputs, l.inputs)).collect(),
            Net::Float(f) => f.layers.iter().map(|l| (l.outputs, l.inputs)).collect(),
        };
        if shapes[0].1 != side * side {
            return Err(BenchError::Blob(format!("first layer takes {} inputs, not {}", shapes[0].1, side * side)));
        }
        let n_layers = shapes.len();
        let mut tasks = Vec::new();
        for (li, &(outs, ins)) in shapes.iter().enumerate() {
            let ranges = tile_ranges(ins, TILES[li.min(2)]);
            for (t, r) in ranges.iter().enumerate() {
                let cycles = CostCoefficients::cycles((outs * r.len()) as u64, coeffs.mac)
                    + CostCoefficients::cycles(outs as u64, coeffs.pixel_op);
                let r = r.clone();
                let step: Arc<dyn Fn(&[u8], Option<&[u8]>, bool) -> Vec<u8> + Send + Sync> = match &net {
                    Net::Quant(q) => {
                        let q = Arc::clone(q);
                        Arc::new(move |x, ps, last| {
                            let l = &q.layers[li];
                            quant_tile(l, &quant_inputs(l, x, li == 0), ps, r.clone(), last)
                        })
                    }
                    Net::Float(f) => {
                        let f = Arc::clone(f);
                        Arc::new(move |x, ps, last| {
                            let xs: Vec<f32> = if li == 0 { x.iter().map(|&p| p as f32).collect() } else { bytes_to_f32s(x) };
                            float_tile(&f.layers[li], &xs, ps, r.clone(), last, li + 1 < n_layers)
                        })
                    }
                };
                tasks.push(tile_task(li, t, ranges.len(), n_layers, workload, cycles, step));
            }
        }
        Ok(Self {
            side,
            quantized,
            batch,
            net,
            pipeline: Pipeline::new(tasks),
        })
    }

    pub fn quant_net(&self) -> Option<&QuantNet> {
        match &self.net {
            Net::Quant(q) => Some(q),
            Net::Float(_) => None,
        }
    }

    pub fn float_net(&self) -> Option<&FloatNet> {
        match &self.net {
            Net::Float(f) => Some(f),
            Net::Quant(_) => None,
        }
    }

    /// The labelled samples behind `inputs(seed)`.
    pub fn samples(&self, seed: u64) -> Vec<Sample> {
        let protos = prototypes(self.side);
        (0..self.batch as u64).map(|i| sample(self.side, &protos, derive(&[seed, i]))).collect()
    }

    /// Predicted class stored in a final NVM image.
    pub fn label(&self, image: &NvmImage) -> Result<usize, BenchError> {
        let logits = output(image, LOGITS)?;
        Ok(if self.quantized {
            argmax_i8(&logits.iter().map(|&b| b as i8).collect::<Vec<_>>())
        } else {
            argmax_f32(&bytes_to_f32s(logits))
        })
    }
}

impl Benchmark for NnBench {
    fn name(&self) -> String {
        format!("nn_{}_{}", self.side, if self.quantized { "quant" } else { "float" })
    }

    fn workload(&self) -> WorkloadClass {
        if self.quantized {
            WorkloadClass::NnQuant
        } else {
            WorkloadClass::NnFloat
        }
    }

    fn metric(&self) -> Option<Metric> {
        Some(Metric::Agreement)
    }

    fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    fn inputs(&self, seed: u64) -> Vec<NvmImage> {
        self.samples(seed)
            .into_iter()
            .map(|s| {
                let mut image = NvmImage::new();
                image.preload(INPUT, s.pixels);
                image
            })
            .collect()
    }

    fn qor(&self, approx: &[NvmImage], golden: &[NvmImage]) -> Result<Option<QorValue>, BenchError> {
        let a = approx.iter().map(|i| self.label(i)).collect::<Result<Vec<_>, _>>()?;
        let g = golden.iter().map(|i| self.label(i)).collect::<Result<Vec<_>, _>>()?;
        Ok(Some(QorValue::agreement(agreement(&a, &g)?)))
    }

    fn memory_bytes(&self) -> u64 {
        let elem = if self.quantized { 1 } else { 4 };
        let (weights, acts): (usize, usize) = match &self.net {
            Net::Quant(q) => (
                q.layers.iter().map(|l| l.outputs * l.inputs + 4 * l.outputs).sum(),
                q.layers.iter().map(|l| l.outputs).sum(),
            ),
            Net::Float(f) => (
                f.layers.iter().map(|l| 4 * (l.outputs * l.inputs + l.outputs)).sum(),
                f.layers.iter().map(|l| l.outputs).sum(),
            ),
        };
        (weights + elem * (self.side * self.side + acts) + 4 * model::HIDDEN[0]) as u64
    }

    fn dump(&self, images: &[NvmImage]) -> Result<Vec<(String, Vec<u8>)>, BenchError> {
        let mut text = String::from("input,label\n");
        for (i, img) in images.iter().enumerate() {
            text.push_str(&format!("{i},{}\n", self.label(img)?));
        }
        Ok(vec![("labels.csv".into(), text.into_bytes())])
    }
}

#[cfg(test)]
mod tests;
