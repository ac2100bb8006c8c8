//! Transport-ray decomposition of the Monge problem with geodesic distance
//! cost on finite metric spaces.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`space`]: finite spaces with an ambient distance `d` and a geodesic
//!   cost `dL` (possibly infinite), validity checks, discrete geodesics;
//! * [`kantorovich`]: exact optimal plans, cyclical-monotonicity
//!   certificates, potentials;
//! * [`rays`]: cycle closure, oriented transport rays, transport sets,
//!   endpoints, cross-section and ray map;
//! * [`disintegration`]: conditional measures along rays, evolution of sets,
//!   refinement diagnostics;
//! * [`monge`]: per-ray monotone rearrangement glued into a transport map;
//! * [`flow`]: transport currents and the solution of `∂U = μ − ν`;
//! * [`mcp`]: measure-contraction comparison functions and density bounds;
//! * [`scenario`]: end-to-end runs and report export.

pub mod disintegration;
pub mod error;
pub mod flow;
pub mod kantorovich;
pub mod measure;
pub mod mcp;
pub mod monge;
pub mod par;
pub mod rays;
pub mod rng;
pub mod scenario;
pub mod space;

pub use error::{Error, Result};
pub use measure::DiscreteMeasure;
pub use space::{FiniteGeodesicSpace, GeodesicPath, Point};
