//! Numerical laboratory for smooth self-similar Euler profiles behind
//! front-type blow up of the energy-supercritical defocusing NLS.
//!
//! The crate covers: the Emden phase-plane system and its sonic-point
//! structure, shooting for admissible blow-up speeds, pointwise verification
//! of the repulsivity conditions, the shifted-cone measure and accretivity
//! coefficients of the linearized operator with a desk-scale discretized
//! spectrum, the compressible-Euler dictionary, and a simulator for the
//! front-renormalized hydrodynamic flow.

pub mod accretivity;
pub mod error;
pub mod euler;
pub mod fields;
pub mod flow;
pub mod io;
pub mod ode;
pub mod origin;
pub mod params;
pub mod profile;
pub mod sonic;
pub mod verification;

pub mod banded;
pub mod schedule;

pub use error::{Error, Result};
pub use fields::{FieldNode, ProfileFields};
pub use params::{make_params, r_star, EmdenPoint, ModelParams};
pub use profile::{Profile, ProfileOptions, SpeedScan};
pub use sonic::SonicPoint;
