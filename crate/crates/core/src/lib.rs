//! Sparse subspace clustering.
//!
//! Points drawn from a union of low-dimensional subspaces are clustered by
//! writing each point as a sparse combination of the others
//! ([`solver`]), turning the coefficients into a similarity graph and
//! segmenting it spectrally ([`spectral`]). [`theory`] checks the geometric
//! recovery conditions, [`synth`] generates controlled benchmarks and
//! [`dataio`] handles file formats and preprocessing.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.

pub mod data;
pub mod dataio;
pub mod error;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod spectral;
pub mod synth;
pub mod theory;

pub use data::{
    normalize_unit_columns, validate, ClusteringResult, CoefficientMatrix, DataMatrix, ProblemSpec,
    SubspaceArrangement, Variant,
};
pub use error::{Result, SscError};
pub use scalar::Real;
pub use solver::{solve, AdmmConfig, Solution, SolveDiagnostics};
pub use spectral::{build_graph, normalize_coefficients, spectral_cluster, SimilarityGraph};
pub use synth::{SweepResult, SweepRow, SynthSpec};
pub use theory::{AngleReport, ArrangementClass, Thm2Margin, Thm3Report};

pub type DataMatrix64 = DataMatrix<f64>;
pub type DataMatrix32 = DataMatrix<f32>;
pub type CoefficientMatrix64 = CoefficientMatrix<f64>;
pub type CoefficientMatrix32 = CoefficientMatrix<f32>;
pub type SubspaceArrangement64 = SubspaceArrangement<f64>;
pub type SubspaceArrangement32 = SubspaceArrangement<f32>;
pub type Solution64 = Solution<f64>;
pub type Solution32 = Solution<f32>;
pub type ClusteringResult64 = ClusteringResult<f64>;
pub type ClusteringResult32 = ClusteringResult<f32>;
pub type SimilarityGraph64 = SimilarityGraph<f64>;
pub type AngleReport64 = AngleReport<f64>;
pub type Thm3Report64 = Thm3Report<f64>;
