//! Solver and verification harness for adversarial convex body chasing games
//! over axis-aligned box bodies.

pub mod bounds;
pub mod geometry;
pub mod instance;
pub mod mesh;
pub mod oracle;
pub mod pipeline;
pub mod play;
pub mod solver;
