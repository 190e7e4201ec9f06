//! Benchmarks for recurrent fuzzy Voronoi controllers.
//!
//! * [`sysid`]: make a nonlinear plant follow a reference model.
//! * [`robot`]: drive a simulated two-wheeled robot through corridor mazes
//!   whose light signals announce the next turn.

pub mod robot;
pub mod sysid;
