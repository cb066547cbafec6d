//! Matrix product state encodings of smooth one-dimensional functions and
//! their compilation into shallow state-preparation circuits.
//!
//! The crate is organised bottom-up:
//!
//! * [`funcspace`]: binary grids, function oracles and named distributions.
//! * [`mps`]: MPS construction, canonical forms, truncation and entanglement diagnostics.
//! * [`analytic`]: asymptotic entanglement predictions (g1, g2, spectra, fidelity estimates).
//! * [`tci`]: tensor cross interpolation from a black-box oracle.
//! * [`circuit`], [`synth`], [`circuitgen`]: gate model, isometry synthesis and V-layer compilation.
//! * [`simulate`]: dense and MPS circuit execution plus sampling.
//! * [`stats`]: KL divergence and Kolmogorov-Smirnov tests.
//! * [`pipeline`]: run configuration and the end-to-end drivers used by the CLI.

pub mod analytic;
pub mod circuit;
pub mod circuitgen;
pub mod error;
pub mod funcspace;
pub mod linalg;
pub mod mps;
pub mod pipeline;
pub mod quad;
pub mod simulate;
pub mod stats;
pub mod synth;
pub mod tci;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
