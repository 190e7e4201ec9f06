//! Recurrent fuzzy Voronoi controllers.
//!
//! * [`geometry`]: Delaunay triangulation of rule sites and barycentric
//!   membership functions.
//! * [`system`]: the recurrent Takagi-Sugeno inference engine.
//! * [`evolution`]: variable-length evolutionary design of rule sets.

pub mod evolution;
pub mod geometry;
pub mod system;

pub use geometry::{Domain, GeometryError, MembershipMode, Triangulation, TriangulationConfig};
pub use system::{Dimensions, FuzzyRule, RfvSystem, StepResult, SystemError};
