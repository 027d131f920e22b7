//! Network construction, quantization and the weight blob format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::bench::BenchError;
use crate::rng::{derive, stable_hash};

pub const CLASSES: usize = 10;
pub const HIDDEN: [usize; 2] = [128, 64];
pub const MASTER_SEED: u64 = 2024;
/// Extra right-shift on committed partial sums beyond what the worst case needs.
pub const HEADROOM_BITS: u32 = 1;

const AMPLITUDE: (f64, f64) = (0.2, 0.35);
const CROSS_TALK: f64 = 0.15 * 0.3;
const PIXEL_NOISE: f64 = 0.3;
const ROW_NOISE: f64 = 0.3;
const MIX_NOISE: f64 = 0.1;
const THRESHOLD: [f64; 2] = [0.3, 0.3];
const CALIBRATION_INPUTS: u64 = 300;
const CALIBRATION_SEED: u64 = 1_000_000;

fn freqs() -> Vec<(usize, usize)> {
    (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|&f| f != (0, 0)).collect()
}

/// Unit-norm separable cosine patterns over an `side x side` midpoint grid.
fn basis(side: usize) -> Vec<Vec<f64>> {
    freqs()
        .into_iter()
        .map(|(i, j)| {
            let mut v = Vec::with_capacity(side * side);
            for x in 0..side {
                for y in 0..side {
                    let (px, py) = ((x as f64 + 0.5) / side as f64, (y as f64 + 0.5) / side as f64);
                    v.push((std::f64::consts::PI * i as f64 * px).cos() * (std::f64::consts::PI * j as f64 * py).cos());
                }
            }
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter().map(|a| a / n).collect()
        })
        .collect()
}

fn gram_schmidt(rows: &mut [Vec<f64>]) {
    for i in 0..rows.len() {
        for j in 0..i {
            let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            let rj = rows[j].clone();
            for (a, b) in rows[i].iter_mut().zip(rj) {
                *a -= d * b;
            }
        }
        let n = rows[i].iter().map(|a| a * a).sum::<f64>().sqrt();
        rows[i].iter_mut().for_each(|a| *a /= n);
    }
}

fn combine(coef: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; rows[0].len()];
    for (c, r) in coef.iter().zip(rows) {
        for (o, v) in out.iter_mut().zip(r) {
            *o += c * v;
        }
    }
    out
}

/// Orthonormal class prototypes, one row of `side * side` values per class.
pub fn prototypes(side: usize) -> Vec<Vec<f64>> {
    let nb = freqs().len();
    let mut rng = ChaCha8Rng::seed_from_u64(derive(&[MASTER_SEED, stable_hash(b"prototypes")]));
    let mut mix: Vec<Vec<f64>> = (0..CLASSES)
        .map(|_| (0..nb).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    gram_schmidt(&mut mix);
    let b = basis(side);
    mix.iter().map(|m| combine(m, &b)).collect()
}

/// A labelled input image with 8-bit pixels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub class: usize,
    pub pixels: Vec<u8>,
}

/// Prototype of a random class at random contrast, with cross-class clutter and pixel noise.
pub fn sample(side: usize, protos: &[Vec<f64>], seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(&[seed, side as u64]));
    let class = rng.random_range(0..CLASSES);
    let a = rng.random_range(AMPLITUDE.0..AMPLITUDE.1);
    let s = side as f64;
    let mut clutter: Vec<f64> = (0..CLASSES).map(|_| StandardNormal.sample(&mut rng)).collect();
    clutter[class] = 0.0;
    let mixed = combine(&clutter, protos);
    let noise = Normal::new(0.0, PIXEL_NOISE).expect("valid sigma");
    let pixels = protos[class]
        .iter()
        .zip(&mixed)
        .map(|(p, m)| {
            let v = a * p * s + CROSS_TALK * m * s + noise.sample(&mut rng);
            (128.0 + 100.0 * v).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Sample { class, pixels }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloatLayer {
    pub outputs: usize,
    pub inputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

/// The reference network, operating directly on pixel values in `0..=255`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatNet {
    pub layers: Vec<FloatLayer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantLayer {
    pub outputs: usize,
    pub inputs: usize,
    pub weights: Vec<i8>,
    /// In accumulator units.
    pub bias: Vec<i32>,
    pub in_zp: i32,
    pub out_zp: i32,
    /// Lower clamp of the requantized output; equal to `out_zp` for ReLU layers.
    pub out_min: i32,
    /// Requantization multiplier `mult * 2^-rshift`.
    pub mult: i32,
    pub rshift: u32,
    /// Committed partial sums are the accumulator shifted right by this many bits.
    pub ps_shift: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantNet {
    pub layers: Vec<QuantLayer>,
}

fn percentile(v: &mut [f64], p: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn matvec(w: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    w.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Bias per unit placing the ReLU knee between own-class and other-class responses.
fn calibrate_bias(z: &[Vec<f64>], classes: &[usize], mix: f64) -> Vec<f64> {
    (0..z[0].len())
        .map(|u| {
            let mut own: Vec<f64> = Vec::new();
            let mut other: Vec<f64> = Vec::new();
            for (zi, &c) in z.iter().zip(classes) {
                if c == u % CLASSES {
                    own.push(zi[u]);
                } else {
                    other.push(zi[u]);
                }
            }
            -(mix * percentile(&mut own, 5.0) + (1.0 - mix) * percentile(&mut other, 95.0))
        })
        .collect()
}

/// Affine int8 quantization `round(v / scale) + zp`, saturating.
pub fn quantize(v: f64, scale: f64, zp: i32) -> i8 {
    ((v / scale).round() + zp as f64).clamp(-128.0, 127.0) as i8
}

pub fn dequantize(q: i8, scale: f64, zp: i32) -> f64 {
    (q as i32 - zp) as f64 * scale
}

fn to_fixed(m: f64) -> (i32, u32) {
    let mut rshift = 0;
    let mut v = m;
    while v < (1u64 << 30) as f64 {
        v *= 2.0;
        rshift += 1;
    }
    let mult = v.round() as i64;
    if mult >= 1i64 << 31 {
        ((mult >> 1) as i32, rshift - 1)
    } else {
        (mult as i32, rshift)
    }
}

/// Builds both variants of the classifier for `side x side` inputs.
pub fn build(side: usize) -> (FloatNet, QuantNet) {
    let n = side * side;
    let protos = prototypes(side);
    let b = basis(side);
    let mut rng = ChaCha8Rng::seed_from_u64(derive(&[MASTER_SEED, stable_hash(b"weights"), side as u64]));
    let w1: Vec<Vec<f64>> = (0..HIDDEN[0])
        .map(|u| {
            let coef: Vec<f64> = (0..b.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut noise = combine(&coef, &b);
            let nn = noise.iter().map(|a| a * a).sum::<f64>().sqrt();
            noise.iter_mut().for_each(|a| *a /= nn);
            protos[u % CLASSES]
                .iter()
                .zip(&noise)
                .map(|(p, e)| (p + ROW_NOISE * e) / (n as f64).sqrt())
                .collect()
        })
        .collect();
    let mix = Normal::new(0.0, MIX_NOISE).expect("valid sigma");
    let grouped = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| mix.sample(rng) + if r % CLASSES == c % CLASSES { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    };
    let w2 = grouped(HIDDEN[1], HIDDEN[0], &mut rng);
    let w3 = grouped(CLASSES, HIDDEN[1], &mut rng);

    let cal: Vec<Sample> = (0..CALIBRATION_INPUTS).map(|i| sample(side, &protos, CALIBRATION_SEED + i)).collect();
    let classes: Vec<usize> = cal.iter().map(|s| s.class).collect();
    let relu_bias = |z: &[f64], b: &[f64]| -> Vec<f64> { z.iter().zip(b).map(|(a, c)| (a + c).max(0.0)).collect() };
    let z1: Vec<Vec<f64>> = cal
        .iter()
        .map(|s| matvec(&w1, &s.pixels.iter().map(|&p| p as f64).collect::<Vec<_>>()))
        .collect();
    let b1 = calibrate_bias(&z1, &classes, THRESHOLD[0]);
    let h1: Vec<Vec<f64>> = z1.iter().map(|z| relu_bias(z, &b1)).collect();
    let z2: Vec<Vec<f64>> = h1.iter().map(|h| matvec(&w2, h)).collect();
    let b2 = calibrate_bias(&z2, &classes, THRESHOLD[1]);
    let h2: Vec<Vec<f64>> = z2.iter().map(|z| relu_bias(z, &b2)).collect();
    let z3: Vec<Vec<f64>> = h2.iter().map(|h| matvec(&w3, h)).collect();
    let b3 = vec![0.0; CLASSES];
    let amax = |m: &[Vec<f64>]| m.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));

    let ws = [w1, w2, w3];
    let bs = [b1, b2, b3];
    let float = FloatNet {
        layers: ws
            .iter()
            .zip(&bs)
            .map(|(w, b)| FloatLayer {
                outputs: w.len(),
                inputs: w[0].len(),
                weights: w.iter().flatten().map(|&v| v as f32).collect(),
                bias: b.iter().map(|&v| v as f32).collect(),
            })
            .collect(),
    };

    let sx = [1.0, amax(&h1) / 255.0, amax(&h2) / 255.0, 2.0 * amax(&z3) / 255.0];
    let zp = [-128, -128, -128, 0];
    let mut layers = Vec::with_capacity(3);
    for l in 0..3 {
        let w = &ws[l];
        let sw = amax(w) / 127.0;
        let qw: Vec<i8> = w.iter().flatten().map(|&v| quantize(v, sw, 0)).collect();
        let qb: Vec<i32> = bs[l].iter().map(|&v| (v / (sw * sx[l])).round() as i32).collect();
        let bound = (0..w.len())
            .map(|r| {
                let row = &qw[r * w[0].len()..(r + 1) * w[0].len()];
                row.iter().map(|&v| (v as i64).abs()).sum::<i64>() * 255 + (qb[r] as i64).abs()
            })
            .max()
            .unwrap_or(0);
        let need = (bound as f64 / 32767.0).log2().ceil().max(0.0) as u32;
        let (mult, rshift) = to_fixed(sw * sx[l] / sx[l + 1]);
        layers.push(QuantLayer {
            outputs: w.len(),
            inputs: w[0].len(),
            weights: qw,
            bias: qb,
            in_zp: zp[l],
            out_zp: zp[l + 1],
            out_min: if l < 2 { zp[l + 1] } else { -128 },
            mult,
            rshift,
            ps_shift: need + HEADROOM_BITS,
        });
    }
    (float, QuantNet { layers })
}

const MAGIC: &[u8; 4] = b"IMCW";
const VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;
const DTYPE_I8: u8 = 1;

fn header(layers: usize, dtype: u8) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(layers as u16).to_le_bytes());
    out.push(dtype);
    out.extend_from_slice(&[0; 7]);
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BenchError> {
        let s = self
            .data
            .get(self.pos..self.pos + n)
            .ok_or_else(|| BenchError::Blob(format!("truncated at byte {}", self.pos)))?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, BenchError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn i32(&mut self) -> Result<i32, BenchError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32, BenchError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn header(&mut self, dtype: u8) -> Result<usize, BenchError> {
        if self.take(4)? != MAGIC {
            return Err(BenchError::Blob("bad magic".into()));
        }
        let version = u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes"));
        if version != VERSION {
            return Err(BenchError::Blob(format!("unsupported version {version}")));
        }
        let layers = u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")) as usize;
        let dt = self.take(1)?[0];
        if dt != dtype {
            return Err(BenchError::Blob(format!("dtype {dt}, expected {dtype}")));
        }
        self.take(7)?;
        Ok(layers)
    }

    fn finish(&self) -> Result<(), BenchError> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(BenchError::Blob(format!("{} trailing bytes", self.data.len() - self.pos)))
        }
    }
}

impl FloatNet {
    pub fn to_blob(&self) -> Vec<u8> {
        let mut out = header(self.layers.len(), DTYPE_F32);
        for l in &self.layers {
            out.extend_from_slice(&(l.outputs as u32).to_le_bytes());
            out.extend_from_slice(&(l.inputs as u32).to_le_bytes());
            l.weights.iter().for_each(|w| out.extend_from_slice(&w.to_le_bytes()));
            l.bias.iter().for_each(|b| out.extend_from_slice(&b.to_le_bytes()));
        }
        out
    }

    pub fn from_blob(data: &[u8]) -> Result<Self, BenchError> {
        let mut c = Cursor { data, pos: 0 };
        let n = c.header(DTYPE_F32)?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let outputs = c.u32()? as usize;
            let inputs = c.u32()? as usize;
            let weights = (0..outputs * inputs).map(|_| c.f32()).collect::<Result<_, _>>()?;
            let bias = (0..outputs).map(|_| c.f32()).collect::<Result<_, _>>()?;
            layers.push(FloatLayer {
                outputs,
                inputs,
                weights,
                bias,
            });
        }
        c.finish()?;
        Ok(Self { layers })
    }
}

impl QuantNet {
    pub fn to_blob(&self) -> Vec<u8> {
        let mut out = header(self.layers.len(), DTYPE_I8);
        for l in &self.layers {
            for v in [l.outputs as u32, l.inputs as u32] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in [l.in_zp, l.out_zp, l.out_min, l.mult] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in [l.rshift, l.ps_shift] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend(l.weights.iter().map(|&w| w as u8));
            l.bias.iter().for_each(|b| out.extend_from_slice(&b.to_le_bytes()));
        }
        out
    }

    pub fn from_blob(data: &[u8]) -> Result<Self, BenchError> {
        let mut c = Cursor { data, pos: 0 };
        let n = c.header(DTYPE_I8)?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let outputs = c.u32()? as usize;
            let inputs = c.u32()? as usize;
            let (in_zp, out_zp, out_min, mult) = (c.i32()?, c.i32()?, c.i32()?, c.i32()?);
            let (rshift, ps_shift) = (c.u32()?, c.u32()?);
            if !(1..63).contains(&rshift) || ps_shift > 31 {
                return Err(BenchError::Blob(format!("shift out of range: {rshift}/{ps_shift}")));
            }
            let weights = c.take(outputs * inputs)?.iter().map(|&b| b as i8).collect();
            let bias = (0..outputs).map(|_| c.i32()).collect::<Result<_, _>>()?;
            layers.push(QuantLayer {
                outputs,
                inputs,
                weights,
                bias,
                in_zp,
                out_zp,
                out_min,
                mult,
                rshift,
                ps_shift,
            });
        }
        c.finish()?;
        Ok(Self { layers })
    }
}
