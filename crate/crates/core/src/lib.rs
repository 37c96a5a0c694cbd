//! Epsilon-perfect sampling of order-constrained, non-identically distributed
//! (OCNID) order statistics.
//!
//! Given univariate laws `f_1, ..., f_m` sharing a support, the target is
//!
//! ```text
//! f(x_1, ..., x_m) ∝ f_1(x_1) ... f_m(x_m) · 1{x_1 < x_2 < ... < x_m}
//! ```
//!
//! so the `i`-th smallest value follows `f_i` restricted by its neighbours.
//! [`cftp::perfect_draw`] runs a monotone Gibbs sampler backwards in time
//! between an upper and a lower bounding chain until they agree to within
//! `epsilon` at time zero. [`oracle`] supplies an independent rejection
//! sampler to check it against, and [`bpca`] applies the sampler to ordered
//! eigenvalues in Bayesian PCA.

pub mod bpca;
pub mod cftp;
pub mod distributions;
pub mod error;
pub mod gibbs;
pub mod oracle;
pub mod rng;
pub mod special;
pub mod stats;

pub use cftp::{
    draw_batch, perfect_draw, Backoff, Batch, BctSummary, CftpConfig, CoupledState, PerfectDraw,
    UniformStore,
};
pub use distributions::{validate_family, Distribution, Support};
pub use error::{Error, Result};
