//! Sampled evidence for the assumptions behind the convergence theory.
//!
//! A probe passing means no sampled violation at the stated tolerance. It
//! is evidence, not a proof.

mod fd;
mod probes;
mod rates;

pub use fd::gradient_fd_check;
pub use probes::{
    check_contraction, check_invexity, check_pl, check_triangle, estimate_smoothness, estimate_symmetry_ratio,
    ProbeReport, Witness,
};
pub use rates::{fit_rate, RateFit, RateModel};

/// Sample count used when the caller has no preference.
pub const DEFAULT_SAMPLES: usize = 1000;
