//! Lagrangian finite-element simulation of restenotic growth in arterial
//! tissue: four coupled species fields transported in a growing,
//! fiber-reinforced hyperelastic wall.

pub mod assembly;
pub mod config;
pub mod constitutive;
pub mod element;
pub mod error;
pub mod kinetics;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod scenario;
pub mod solver;
pub mod sweep;
pub mod tensor;

pub use assembly::{Fixed, Layout, Model, State};
pub use config::{ScenarioKind, Setting, SimulationConfig};
pub use constitutive::{GrowthModel, GrowthState, MaterialFrame, StressTangent, StructuralParams};
pub use element::{ElementContribution, ElementMaterial, Field, FluxPatchParams, PiecewiseLinear, Scheme};
pub use error::{Error, ErrorCategory, Result};
pub use kinetics::{SpeciesParams, SpeciesPointState};
pub use mesh::{build_artery_quadrant, build_block, Facet, FiberFrame, Layer, Mesh, QuadrantDivisions};
pub use output::OutputRecord;
pub use scenario::{detect_breach, Breach, RunOutput, Scenario};
pub use solver::{Simulator, SolverSettings, StepLog, TimeScheme};
