//! Branching random iterated function systems on the unit interval:
//! grow Galton-Watson trees with random contractions, build the associated
//! multiplicative cascade measures, and estimate their multifractal
//! (L^q / Legendre) spectra, with exact analytic benchmarks for laws with
//! finite support and tangent-measure equivalence testing.
//!
//! Everything numeric is generic over [`num::Real`] (f32 or f64); the
//! aliases at the crate root fix f64, which the CLI uses throughout.

pub mod benchmarks;
pub mod config;
pub mod error;
pub mod io;
pub mod laws;
pub mod measure;
pub mod num;
pub mod rng;
pub mod spectrum;
pub mod stats;
pub mod svg;
pub mod tangent;
pub mod tree;

pub use config::{CascadeConfig, Placement, Variant, WeightingMode};
pub use error::{Error, Result};
pub use laws::{ContractionLaw, OffspringLaw};
pub use measure::{leaf_masses, mass_heatmap_bins, scale_matrix, ScaleMatrix, ScaleRow};
pub use spectrum::{
    estimate_spectrum, tau_fit, tau_via_kappa, ConvexityVerdict, MassSource, MeshMode, QGrid,
    SpectrumEstimate,
};
pub use tree::{grow, Node, Realization};

/// f64 aliases used by the CLI and most callers.
pub type Config64 = config::CascadeConfig<f64>;
pub type ContractionLaw64 = laws::ContractionLaw<f64>;
pub type WeightingMode64 = config::WeightingMode<f64>;
pub type Realization64 = tree::Realization<f64>;
pub type Node64 = tree::Node<f64>;
pub type ScaleMatrix64 = measure::ScaleMatrix<f64>;
pub type QGrid64 = spectrum::QGrid<f64>;
pub type SpectrumEstimate64 = spectrum::SpectrumEstimate<f64>;
pub type TangentSample64 = tangent::TangentSample<f64>;
pub type OneStepEnvironment64 = benchmarks::OneStepEnvironment<f64>;
