//! Fixed-point radix-2 FFT over Q15 samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{bytes_to_i16s, i16s_to_bytes, output, BenchError, Benchmark, CostCoefficients};
use crate::energy::WorkloadClass;
use crate::metrics::{are, Metric, QorValue};
use crate::runtime::{NvmImage, Pipeline, Task, TaskOutput};

pub const INPUT: &str = "fft_in";
pub const OUTPUT: &str = "fft_out";
/// Golden bins below this magnitude (full scale = 1) are left out of the ARE.
pub const ARE_EPS: f64 = 1e-6;

const Q15: f64 = 32768.0;
const TWIDDLE_BITS: u32 = 30;
/// Fractional bits carried between stages beyond Q15.
const GUARD_BITS: u32 = 8;

/// Twiddles `exp(-2 pi i k / n)` for `k < n / 2` in Q30.
pub fn twiddles(n: usize) -> Vec<(i64, i64)> {
    let one = (1i64 << TWIDDLE_BITS) as f64;
    (0..n / 2)
        .map(|k| {
            let a = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
            ((a.cos() * one).round() as i64, (a.sin() * one).round() as i64)
        })
        .collect()
}

fn round_shift(v: i64, s: u32) -> i64 {
    (v + (1 << (s - 1))) >> s
}

fn sat16(v: i64) -> i16 {
    v.clamp(i16::MIN as i64, i16::MAX as i64) as i16
}

/// Decimation-in-time FFT with a halving per stage, so the result is `DFT(x) / n`.
/// Samples are Q15 `(re, im)` pairs. Each butterfly output is rounded once to the
/// working precision; the result is rounded to Q15 at the end.
pub fn fft_q15(data: &mut [(i16, i16)], tw: &[(i64, i64)]) {
    let n = data.len();
    let bits = n.trailing_zeros();
    let mut work: Vec<(i64, i64)> = vec![(0, 0); n];
    for (i, &(r, im)) in data.iter().enumerate() {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        work[j] = ((r as i64) << GUARD_BITS, (im as i64) << GUARD_BITS);
    }
    let mut m = 2;
    while m <= n {
        let half = m / 2;
        let step = n / m;
        for k in 0..half {
            let (wr, wi) = tw[k * step];
            for base in (0..n).step_by(m) {
                let (ar, ai) = work[base + k];
                let (br, bi) = work[base + k + half];
                let tr = wr * br - wi * bi;
                let ti = wr * bi + wi * br;
                let (ar, ai) = (ar << TWIDDLE_BITS, ai << TWIDDLE_BITS);
                let s = TWIDDLE_BITS + 1;
                work[base + k] = (round_shift(ar + tr, s), round_shift(ai + ti, s));
                work[base + k + half] = (round_shift(ar - tr, s), round_shift(ai - ti, s));
            }
        }
        m *= 2;
    }
    for (d, &(r, im)) in data.iter_mut().zip(&work) {
        *d = (sat16(round_shift(r, GUARD_BITS)), sat16(round_shift(im, GUARD_BITS)));
    }
}

/// Direct `O(n^2)` evaluation of `DFT(x) / n` in `f64`, in Q15 units.
pub fn dft_oracle(x: &[(i16, i16)]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &(xr, xi)) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                let (s, c) = a.sin_cos();
                re += xr as f64 * c - xi as f64 * s;
                im += xr as f64 * s + xi as f64 * c;
            }
            (re / n as f64, im / n as f64)
        })
        .collect()
}

fn pairs_to_bytes(p: &[(i16, i16)]) -> Vec<u8> {
    let flat: Vec<i16> = p.iter().flat_map(|&(r, i)| [r, i]).collect();
    i16s_to_bytes(&flat)
}

fn bytes_to_pairs(b: &[u8]) -> Vec<(i16, i16)> {
    bytes_to_i16s(b).chunks_exact(2).map(|c| (c[0], c[1])).collect()
}

/// Three tones at random bins plus white noise, real-valued, `|x| < 0.95`.
pub fn tone_signal(n: usize, seed: u64) -> Vec<(i16, i16)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tones: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(1..n / 2) as f64,
                rng.random_range(0.1..0.28),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let noise = Normal::new(0.0, 0.01).expect("valid sigma");
    (0..n)
        .map(|t| {
            let mut v: f64 = tones
                .iter()
                .map(|&(f, a, p)| a * (std::f64::consts::TAU * f * t as f64 / n as f64 + p).cos())
                .sum();
            v += noise.sample(&mut rng);
            ((v.clamp(-0.95, 0.95) * 32767.0).round() as i16, 0)
        })
        .collect()
}

/// One task that transforms the committed input spectrum and commits the result.
#[derive(Debug)]
pub struct FftBench {
    n: usize,
    pipeline: Pipeline,
}

impl FftBench {
    pub fn new(n: usize, coeffs: CostCoefficients) -> Result<Self, BenchError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(BenchError::InvalidSpec(format!("fft size {n} is not a power of two")));
        }
        let tw = twiddles(n);
        let butterflies = (n / 2) as u64 * n.trailing_zeros() as u64;
        let cycles = CostCoefficients::cycles(butterflies, coeffs.butterfly);
        let task = Task::new("fft", &[INPUT], &[OUTPUT], WorkloadClass::Signal, move |ins| {
            let mut data = bytes_to_pairs(ins[0]);
            fft_q15(&mut data, &tw);
            TaskOutput {
                buffers: vec![pairs_to_bytes(&data)],
                base_cycles: cycles,
            }
        });
        Ok(Self {
            n,
            pipeline: Pipeline::new(vec![task]),
        })
    }
}

fn spectrum(image: &NvmImage) -> Result<Vec<(f64, f64)>, BenchError> {
    Ok(bytes_to_pairs(output(image, OUTPUT)?)
        .into_iter()
        .map(|(r, i)| (r as f64 / Q15, i as f64 / Q15))
        .collect())
}

impl Benchmark for FftBench {
    fn name(&self) -> String {
        format!("fft_{}", self.n)
    }

    fn workload(&self) -> WorkloadClass {
        WorkloadClass::Signal
    }

    fn metric(&self) -> Option<Metric> {
        Some(Metric::Are)
    }

    fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    fn inputs(&self, seed: u64) -> Vec<NvmImage> {
        let mut image = NvmImage::new();
        image.preload(INPUT, pairs_to_bytes(&tone_signal(self.n, seed)));
        vec![image]
    }

    /// Mean over bins of `|A_k - G_k| / |G_k|`.
    fn qor(&self, approx: &[NvmImage], golden: &[NvmImage]) -> Result<Option<QorValue>, BenchError> {
        let a = spectrum(&approx[0])?;
        let g = spectrum(&golden[0])?;
        let gmag: Vec<f64> = g.iter().map(|&(r, i)| r.hypot(i)).collect();
        let shifted: Vec<f64> = a
            .iter()
            .zip(&g)
            .zip(&gmag)
            .map(|((&(ar, ai), &(gr, gi)), m)| m + (ar - gr).hypot(ai - gi))
            .collect();
        let r = are(&shifted, &gmag, ARE_EPS)?;
        Ok(Some(QorValue::are(&r)))
    }

    fn memory_bytes(&self) -> u64 {
        // Butterflies stream operands from NVM; SRAM holds one butterfly and loop state.
        64
    }

    fn dump(&self, images: &[NvmImage]) -> Result<Vec<(String, Vec<u8>)>, BenchError> {
        let mut text = String::from("bin,re,im\n");
        for (k, (r, i)) in spectrum(&images[0])?.iter().enumerate() {
            text.push_str(&format!("{k},{r:.6},{i:.6}\n"));
        }
        Ok(vec![("spectrum.csv".into(), text.into_bytes())])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_ulp_error(x: &[(i16, i16)]) -> f64 {
        let mut y = x.to_vec();
        fft_q15(&mut y, &twiddles(x.len()));
        let o = dft_oracle(x);
        y.iter()
            .zip(&o)
            .map(|(&(r, i), &(or, oi))| (r as f64 - or).abs().max((i as f64 - oi).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut x = vec![(0i16, 0i16); 256];
        x[0] = (32767, 0);
        let mut y = x.clone();
        fft_q15(&mut y, &twiddles(256));
        for &(r, i) in &y {
            assert!((r as f64 - 32767.0 / 256.0).abs() <= 1.0, "{r}");
            assert!(i.abs() <= 1);
        }
    }

    #[test]
    fn matches_dft_within_two_ulp() {
        for seed in 0..20 {
            let x = tone_signal(256, seed);
            let e = max_ulp_error(&x);
            assert!(e <= 2.0, "seed {seed}: {e} ULP");
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(FftBench::new(100, CostCoefficients::default()).is_err());
    }

    #[test]
    fn golden_output_is_perfect() {
        let b = FftBench::new(64, CostCoefficients::default()).unwrap();
        let m = crate::energy::McuCatalog::default().get("M4").unwrap().clone();
        let inputs = b.inputs(3);
        let g = crate::runtime::golden_run(b.pipeline(), &inputs[0], &m).unwrap();
        let q = b.qor(&[g.image.clone()], &[g.image]).unwrap().unwrap();
        assert_eq!(q.value, 0.0);
        assert_eq!(g.cost.cycles, 32 * 6 * 96);
        assert_eq!(g.cost.bits_written, 64 * 32);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_inputs_within_two_ulp(re in proptest::collection::vec(-23000i16..23000, 64), im in proptest::collection::vec(-23000i16..23000, 64)) {
            let x: Vec<(i16, i16)> = re.into_iter().zip(im).collect();
            prop_assert!(max_ulp_error(&x) <= 2.0);
        }
    }
}
