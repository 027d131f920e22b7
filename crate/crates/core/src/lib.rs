//! Simulation of intermittent computing on approximate STT-MRAM.

pub mod bench;
pub mod campaign;
pub mod config;
pub mod energy;
pub mod metrics;
pub mod nvm;
pub mod report;
pub mod rng;
pub mod runtime;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/quality_levels.md")]
    pub struct QualityLevels;
    #[doc = include_str!("../../../book/src/energy.md")]
    pub struct Energy;
    #[doc = include_str!("../../../book/src/capacitor.md")]
    pub struct Capacitor;
    #[doc = include_str!("../../../book/src/runtime.md")]
    pub struct Runtime;
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    pub struct Benchmarks;
    #[doc = include_str!("../../../book/src/campaign.md")]
    pub struct Campaign;
    #[doc = include_str!("../../../book/src/config.md")]
    pub struct Config;
}
