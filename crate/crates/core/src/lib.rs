//! Scaled empirical point processes near quantile anchors, their
//! *-compensators, and the statistics built on their Poisson limits.
//!
//! The commonly used types are re-exported at the crate root.

pub mod compensator;
pub mod copula;
pub mod epp;
pub mod knn;
pub mod quadrature;
pub mod rvdist;
pub mod special;
pub mod verify;

pub use compensator::{compensator_2d, exact_compensator_1d, joint_compensator, limit_measure, CompensatorError, CompensatorPath};
pub use copula::{extremes_process, extremes_window, fit_tail_law, joint_tail, sample_copula, CopulaError, NormalCopula, TailLawEstimate};
pub use epp::{build_scaled_1d, build_scaled_multid, EppError, Frame, OrthantBox, PointCount, ScaleRule, ScaledProcess1D, ScaledProcessD, Scaling};
pub use knn::{
    estimate_integral, lr_gap_test, naive_estimate, neighbour_span, umvu_estimate, DensityEstimate, GapTest, InverseGammaLaw, KnnError,
    NeighbourSpan,
};
pub use rvdist::{
    Family, ModelError, PiecewisePolynomial, RegVarSpec, SampleView, SortedSample, StreamKey, UnivariateModel, WindowRequest, WindowedSample,
};
pub use verify::{FitReport, ReplicationConfig, Scenario, VerifyError};
