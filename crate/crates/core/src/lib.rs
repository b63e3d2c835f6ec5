//! Numerical toolkit for one-shot quantum thermodynamics.
//!
//! The crate computes smoothed min-, max- and hypothesis-testing relative
//! entropies, thermo-majorization and battery-assisted work quotes, the
//! coherence-handling protocols used to reach semiclassical states, and
//! divergence-rate scans for translation-invariant spin chains.
//!
//! All logarithms are natural; amounts of information are in nats and
//! energies are in the same units as `1/β`.

pub mod coherence;
pub mod divergence;
pub mod error;
pub mod lattice;
pub mod nats;
pub mod numfmt;
pub mod operator;
pub mod oracle;
pub mod thermo;

pub use error::{Error, Result};
pub use nats::Nats;
pub use operator::{
    dephase, eig, eig_default, partial_trace, tensor, tensor_states, trace_distance, DensityOperator,
    HermitianOperator, SpectralDecomposition, C64,
};
pub use divergence::{
    d_hyp_eps, d_max0, d_max_eps, d_min0, d_min_eps, divergence_report, divergences_from_spectrum, ratio_spectrum,
    umegaki, DivergenceReport, Estimate, RatioSpectrum, SmoothingParams,
};
