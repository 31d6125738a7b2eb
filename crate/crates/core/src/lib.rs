//! Benchmark toolkit for compact AI-generated-image detectors: dual-domain
//! (spatial / spectral) preprocessing, perturbation robustness suite, a
//! small self-contained training engine, cost profiling, efficiency-score
//! model selection, and evaluation protocols.

pub mod attacks;
pub mod data;
pub mod error;
pub mod fft;
pub mod image;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod profiler;
pub mod report;
pub mod rng;
pub mod selection;

pub use error::{Error, Result};
