use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RuntimeError;
use crate::energy::Capacitor;

/// Power available from the ambient source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HarvestModel {
    /// Constant input power in pW.
    Constant(f64),
    /// Piecewise-constant trace of `(time_us, power_pW)` samples, sorted by time.
    /// Power before the first sample is zero; the last sample holds forever.
    Trace(Vec<(f64, f64)>),
}

impl Default for HarvestModel {
    /// 100 uW.
    fn default() -> Self {
        HarvestModel::Constant(100e6)
    }
}

impl HarvestModel {
    pub fn trace(mut samples: Vec<(f64, f64)>) -> Result<Self, RuntimeError> {
        for (i, &(t, p)) in samples.iter().enumerate() {
            if !(t.is_finite() && p.is_finite() && p >= 0.0) {
                return Err(RuntimeError::BadTrace {
                    line: i + 1,
                    msg: format!("invalid sample ({t}, {p})"),
                });
            }
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(HarvestModel::Trace(samples))
    }

    pub fn power_at(&self, time_us: f64) -> f64 {
        match self {
            HarvestModel::Constant(p) => *p,
            HarvestModel::Trace(s) => match s.iter().rposition(|&(t, _)| t <= time_us) {
                Some(i) => s[i].1,
                None => 0.0,
            },
        }
    }

    /// Power that holds from the last sample onwards.
    fn terminal_power(&self) -> f64 {
        match self {
            HarvestModel::Constant(p) => *p,
            HarvestModel::Trace(s) => s.last().map_or(0.0, |&(_, p)| p),
        }
    }
}

/// Charges `cap` to `v_on` starting at `start_us`. Returns the elapsed time in seconds.
///
/// Stored energy grows at harvest power minus leakage; 1 pJ / 1 pW = 1 s.
///
/// ```
/// use imc_sim::energy::Capacitor;
/// use imc_sim::runtime::{charge, HarvestModel};
/// let mut cap = Capacitor::new(40.0, 3.0, 2.0, 0.0).unwrap();
/// let t = charge(&mut cap, &HarvestModel::Constant(1e9), 0.0).unwrap(); // 1 mW
/// assert!((t - 0.1).abs() < 1e-12);
/// ```
pub fn charge(cap: &mut Capacitor, harvest: &HarvestModel, start_us: f64) -> Result<f64, RuntimeError> {
    let deficit = cap.deficit_pj();
    if deficit <= 0.0 {
        cap.set_full();
        return Ok(0.0);
    }
    let leak = cap.leak_pw;
    let net_terminal = harvest.terminal_power() - leak;
    let elapsed = match harvest {
        HarvestModel::Constant(p) => {
            if p - leak <= 0.0 {
                return Err(RuntimeError::NeverCharges {
                    harvest_pw: *p,
                    leak_pw: leak,
                });
            }
            deficit / (p - leak)
        }
        HarvestModel::Trace(samples) => {
            let mut gained = 0.0;
            let mut t_us = start_us;
            let later = samples.iter().filter(|&&(t, _)| t > start_us);
            let mut done = None;
            for &(next_us, _) in later {
                let net = harvest.power_at(t_us) - leak;
                let dt_s = (next_us - t_us) * 1e-6;
                if net > 0.0 && gained + net * dt_s >= deficit {
                    done = Some((t_us - start_us) * 1e-6 + (deficit - gained) / net);
                    break;
                }
                gained = (gained + net * dt_s).max(0.0);
                t_us = next_us;
            }
            match done {
                Some(t) => t,
                None => {
                    if net_terminal <= 0.0 {
                        return Err(RuntimeError::NeverCharges {
                            harvest_pw: harvest.terminal_power(),
                            leak_pw: leak,
                        });
                    }
                    (t_us - start_us) * 1e-6 + (deficit - gained) / net_terminal
                }
            }
        }
    };
    cap.set_full();
    Ok(elapsed)
}

/// Times (us) at which the supply is forcibly cut.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureSchedule {
    times_us: Vec<f64>,
}

impl FailureSchedule {
    pub fn new(mut times_us: Vec<f64>) -> Self {
        times_us.retain(|t| t.is_finite());
        times_us.sort_by(f64::total_cmp);
        Self { times_us }
    }

    pub fn times_us(&self) -> &[f64] {
        &self.times_us
    }

    pub fn is_empty(&self) -> bool {
        self.times_us.is_empty()
    }

    /// Reads the `(time_us, power_pW)` text format; the power column is ignored.
    pub fn from_text(text: &str) -> Result<Self, RuntimeError> {
        Ok(Self::new(parse_samples(text)?.into_iter().map(|(t, _)| t).collect()))
    }

    pub fn load(path: &Path) -> Result<Self, RuntimeError> {
        Self::from_text(&read(path)?)
    }
}

impl HarvestModel {
    pub fn from_text(text: &str) -> Result<Self, RuntimeError> {
        Self::trace(parse_samples(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, RuntimeError> {
        Self::from_text(&read(path)?)
    }
}

fn read(path: &Path) -> Result<String, RuntimeError> {
    std::fs::read_to_string(path).map_err(|e| RuntimeError::BadTrace {
        line: 0,
        msg: format!("{}: {e}", path.display()),
    })
}

/// One `time_us, power_pW` pair per line. Parentheses are optional; `#` starts a comment.
pub fn parse_samples(text: &str) -> Result<Vec<(f64, f64)>, RuntimeError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let inner = line.trim_start_matches('(').trim_end_matches(')');
        let fields: Vec<&str> = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let bad = |msg: String| RuntimeError::BadTrace { line: i + 1, msg };
        if fields.len() != 2 {
            return Err(bad(format!("expected `time_us, power_pW`, got `{line}`")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
        let (t, p) = (num(fields[0])?, num(fields[1])?);
        if p < 0.0 {
            return Err(bad(format!("negative power {p}")));
        }
        out.push((t, p));
    }
    Ok(out)
}
