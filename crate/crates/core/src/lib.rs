//! Synthesis and verification machinery for plane-geometry problems.

pub mod deduction;
pub mod dsl;
pub mod geom;
pub mod metrics;
pub mod render;
pub mod schema;
pub mod verify;
