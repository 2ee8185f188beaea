//! Dirichlet spectra, harmonic replacement and local convergence experiments
//! on weighted one-dimensional metric measure spaces.

pub mod convergence;
pub mod elliptic;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mmspace;
pub mod numfmt;
pub mod presets;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
pub use fem::{assemble, build_mesh, classify_nodes, Convention, FormPair, MassKind, Mesh, NodeSets};
pub use mmspace::{BallSpec, EndpointTag, Region, SpaceDescriptor, Topology, Weight};
pub use presets::{run_preset, PRESETS};
pub use report::{Check, ExperimentReport, ExperimentSpec, ParamValue};
pub use spectral::{dirichlet_spectrum, HeatFlow, Spectrum};
