//! Static-hover analysis for multirotor aerial vehicles with tiltable
//! propellers: allocation maps, hover feasibility and classification,
//! omnidirectional-lift and local-hoverability metrics, and a rigid-body
//! simulator for actuation step responses.

pub mod allocation;
pub mod error;
pub mod hover;
pub mod local_hover;
pub mod lp;
pub mod platform;
pub mod sim;
pub mod wrench_sets;

pub use error::{Error, Result};
