use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use super::{NvmError, QlId, QualityLevel};

/// How a failed cell write shows up in the stored data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InjectionMode {
    /// Each written bit is inverted independently with probability WER.
    #[default]
    FlipNew,
    /// A cell asked to change state keeps its previous value with probability WER.
    RetainOld,
}

impl std::str::FromStr for InjectionMode {
    type Err = NvmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flip-new" | "FlipNew" | "flip_new" => Ok(Self::FlipNew),
            "retain-old" | "RetainOld" | "retain_old" => Ok(Self::RetainOld),
            other => Err(NvmError::UnknownMode(other.to_string())),
        }
    }
}

impl std::fmt::Display for InjectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FlipNew => "flip-new",
            Self::RetainOld => "retain-old",
        })
    }
}

/// Campaign-wide injection settings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionPolicy {
    pub mode: InjectionMode,
    /// Inject Q0's nominal 1e-8 instead of treating Q0 as error-free.
    pub literal_q0: bool,
}

impl InjectionPolicy {
    pub fn effective_wer(&self, ql: &QualityLevel) -> f64 {
        if ql.id == QlId::Q0 && !self.literal_q0 {
            0.0
        } else {
            ql.wer
        }
    }

    /// Corrupts `buf` in place as a write at `ql` would. Returns the number of corrupted bits.
    pub fn inject_in_place<R: Rng + ?Sized>(
        &self,
        buf: &mut [u8],
        old: Option<&[u8]>,
        ql: &QualityLevel,
        rng: &mut R,
    ) -> Result<u64, NvmError> {
        inject_with_rate(buf, old, self.effective_wer(ql), self.mode, rng)
    }
}

/// Stores `new_bits` through a cell array at `ql`, returning what ends up in NVM.
///
/// Bits are addressed LSB-first within each byte. `old_bits` is only read in
/// [`InjectionMode::RetainOld`], where it must be present and of equal length.
pub fn inject_write<R: Rng + ?Sized>(
    new_bits: &[u8],
    old_bits: Option<&[u8]>,
    ql: &QualityLevel,
    mode: InjectionMode,
    rng: &mut R,
) -> Result<Vec<u8>, NvmError> {
    let mut out = new_bits.to_vec();
    inject_with_rate(&mut out, old_bits, ql.wer, mode, rng)?;
    Ok(out)
}

fn inject_with_rate<R: Rng + ?Sized>(
    buf: &mut [u8],
    old: Option<&[u8]>,
    wer: f64,
    mode: InjectionMode,
    rng: &mut R,
) -> Result<u64, NvmError> {
    if !(0.0..=1.0).contains(&wer) {
        return Err(NvmError::InvalidRate(wer));
    }
    match mode {
        InjectionMode::FlipNew => Ok(flip_new(buf, wer, rng)),
        InjectionMode::RetainOld => {
            let old = old.ok_or(NvmError::LengthMismatch {
                new: buf.len(),
                old: 0,
            })?;
            if old.len() != buf.len() {
                return Err(NvmError::LengthMismatch {
                    new: buf.len(),
                    old: old.len(),
                });
            }
            Ok(retain_old(buf, old, wer, rng))
        }
    }
}

/// Samples the number of clean trials before the next error.
struct ErrorGaps {
    dist: Option<Geometric>,
}

impl ErrorGaps {
    fn new(p: f64) -> Self {
        let dist = if p > 0.0 && p < 1.0 {
            Some(Geometric::new(p).expect("rate checked to lie in (0, 1)"))
        } else {
            None
        };
        Self { dist }
    }

    fn next<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.dist {
            Some(g) => g.sample(rng),
            None => 0,
        }
    }
}

fn flip_new<R: Rng + ?Sized>(buf: &mut [u8], wer: f64, rng: &mut R) -> u64 {
    if wer == 0.0 || buf.is_empty() {
        return 0;
    }
    if wer == 1.0 {
        buf.iter_mut().for_each(|b| *b = !*b);
        return buf.len() as u64 * 8;
    }
    let n_bits = buf.len() as u64 * 8;
    let gaps = ErrorGaps::new(wer);
    let mut flipped = 0;
    let mut pos = gaps.next(rng);
    while pos < n_bits {
        buf[(pos / 8) as usize] ^= 1 << (pos % 8);
        flipped += 1;
        pos = pos.saturating_add(gaps.next(rng)).saturating_add(1);
    }
    flipped
}

fn retain_old<R: Rng + ?Sized>(buf: &mut [u8], old: &[u8], wer: f64, rng: &mut R) -> u64 {
    if wer == 0.0 {
        return 0;
    }
    let gaps = ErrorGaps::new(wer);
    // Only cells that must switch can fail; skip-ahead runs over those cells alone.
    let mut skip = gaps.next(rng);
    let mut retained = 0;
    for (b, &o) in buf.iter_mut().zip(old) {
        let mut diff = *b ^ o;
        while diff != 0 {
            let bit = diff & diff.wrapping_neg();
            diff &= diff - 1;
            if skip == 0 {
                *b ^= bit;
                retained += 1;
                skip = gaps.next(rng);
            } else {
                skip -= 1;
            }
        }
    }
    retained
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nvm::QlCatalog;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ql_with(wer: f64) -> QualityLevel {
        QualityLevel::new(QlId::Q4, wer, 577.0, 43.0)
    }

    fn popcount_diff(a: &[u8], b: &[u8]) -> u64 {
        a.iter().zip(b).map(|(x, y)| u64::from((x ^ y).count_ones())).sum()
    }

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<u8> = (0..=255).collect();
        let old = vec![0x5a; 256];
        for mode in [InjectionMode::FlipNew, InjectionMode::RetainOld] {
            let out = inject_write(&data, Some(&old), &ql_with(0.0), mode, &mut rng).unwrap();
            assert_eq!(out, data);
        }
    }

    #[test]
    fn certain_flip_is_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = inject_write(&[0b1010], None, &ql_with(1.0), InjectionMode::FlipNew, &mut rng).unwrap();
        assert_eq!(out[0] & 0x0f, 0b0101);
        assert_eq!(out, vec![!0b1010u8]);
    }

    #[test]
    fn flip_count_within_binomial_band() {
        // 10^6 bits at 1e-3: mean 1000, sigma ~31.6, 4-sigma band [874, 1126].
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let data = vec![0u8; 125_000];
        let out = inject_write(&data, None, &ql_with(1e-3), InjectionMode::FlipNew, &mut rng).unwrap();
        let flips = popcount_diff(&out, &data);
        assert!((874..=1126).contains(&flips), "{flips} flips");
    }

    #[test]
    fn retain_old_requires_matching_old() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = inject_write(&[1, 2, 3], Some(&[1, 2]), &ql_with(0.1), InjectionMode::RetainOld, &mut rng);
        assert_eq!(err, Err(NvmError::LengthMismatch { new: 3, old: 2 }));
        let err = inject_write(&[1], None, &ql_with(0.1), InjectionMode::RetainOld, &mut rng);
        assert!(matches!(err, Err(NvmError::LengthMismatch { .. })));
    }

    #[test]
    fn retain_old_never_touches_equal_bits_exhaustive() {
        // All 4-bit (old, new) pairs, with certain failure on switching cells.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for old in 0u8..16 {
            for new in 0u8..16 {
                for wer in [1.0, 0.5] {
                    let out = inject_write(&[new], Some(&[old]), &ql_with(wer), InjectionMode::RetainOld, &mut rng)
                        .unwrap()[0];
                    let same = !(old ^ new) & 0x0f;
                    assert_eq!(out & same, new & same, "old={old:04b} new={new:04b}");
                    assert_eq!(out & 0xf0, 0);
                    if wer == 1.0 {
                        assert_eq!(out, old);
                    }
                }
            }
        }
    }

    #[test]
    fn policy_treats_q0_as_error_free_by_default() {
        let cat = QlCatalog::default();
        let mut q0 = *cat.get(QlId::Q0);
        q0.wer = 0.5; // exaggerated so a literal injection would certainly show
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut buf = vec![0u8; 64];
        let n = InjectionPolicy::default().inject_in_place(&mut buf, None, &q0, &mut rng).unwrap();
        assert_eq!(n, 0);
        let literal = InjectionPolicy {
            literal_q0: true,
            ..Default::default()
        };
        let n = literal.inject_in_place(&mut buf, None, &q0, &mut rng).unwrap();
        assert!(n > 0);
        assert_eq!(n, popcount_diff(&buf, &[0u8; 64]));
    }

    #[test]
    fn skip_ahead_matches_bernoulli_distribution() {
        // Bernoulli oracle: per-bit coin flips. Compare mean and variance of
        // per-buffer error counts from both samplers at p = 0.02 over 256-bit buffers.
        let p = 0.02;
        let trials = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut skip_counts = Vec::with_capacity(trials);
        let mut coin_counts = Vec::with_capacity(trials);
        for _ in 0..trials {
            let mut buf = [0u8; 32];
            skip_counts.push(flip_new(&mut buf, p, &mut rng) as f64);
            coin_counts.push((0..256).filter(|_| rand::Rng::random::<f64>(&mut rng) < p).count() as f64);
        }
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
            (m, var)
        };
        let (m1, v1) = stats(&skip_counts);
        let (m2, v2) = stats(&coin_counts);
        let mean = 256.0 * p;
        let var = 256.0 * p * (1.0 - p);
        let se = (var / trials as f64).sqrt();
        assert!((m1 - mean).abs() < 4.0 * se, "skip mean {m1}");
        assert!((m2 - mean).abs() < 4.0 * se, "coin mean {m2}");
        assert!((v1 / var - 1.0).abs() < 0.05, "skip var {v1}");
        assert!((v2 / var - 1.0).abs() < 0.05, "coin var {v2}");
    }

    proptest! {
        #[test]
        fn injection_is_pure_for_fixed_seed(data in proptest::collection::vec(any::<u8>(), 0..64),
                                            seed in any::<u64>(), retain in any::<bool>()) {
            let mode = if retain { InjectionMode::RetainOld } else { InjectionMode::FlipNew };
            let old: Vec<u8> = data.iter().map(|b| b.rotate_left(3)).collect();
            let ql = ql_with(0.05);
            let a = inject_write(&data, Some(&old), &ql, mode, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = inject_write(&data, Some(&old), &ql, mode, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn retain_old_output_is_bitwise_between(new in proptest::collection::vec(any::<u8>(), 1..32),
                                                old_seed in any::<u64>(), seed in any::<u64>()) {
            let old: Vec<u8> = new.iter().enumerate().map(|(i, b)| b ^ (old_seed.rotate_left(i as u32) as u8)).collect();
            let out = inject_write(&new, Some(&old), &ql_with(0.3), InjectionMode::RetainOld,
                                   &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for ((o, n), s) in out.iter().zip(&new).zip(&old) {
                // every stored bit equals either the new or the old value at that position
                prop_assert_eq!((o ^ n) & (o ^ s), 0);
            }
        }
    }
}
