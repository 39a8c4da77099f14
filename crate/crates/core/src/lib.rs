//! Menger-type curvatures, Jones beta numbers and multiscale flatness on
//! weighted point clouds.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: simplices, contents, polar sines, discrete curvatures.
//! * [`planes`]: affine planes, weighted least-squares fits, beta numbers.
//! * [`measure`]: weighted point clouds, balls, generators, tuple sampling.
//! * [`multiscale`]: nets, ball families, partitions, Jones-type flatness.
//! * [`estimators`]: Monte Carlo and exhaustive curvature integrals, scale
//!   classification, concentration sets.
//! * [`sequences`]: constants, well-scaled and rake sequences, augmented sets.
//! * [`harness`]: the verification suites and ratio experiments driven by the
//!   command-line tool.

pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod measure;
pub mod multiscale;
pub mod planes;
pub mod rng;
pub mod sequences;

pub use geometry::{Degeneracy, Flagged, GeometryError, Tolerances, Tuple, Vector};
pub use measure::{Ball, WeightedPointCloud};
pub use planes::AffinePlane;
pub use sequences::Constants;
