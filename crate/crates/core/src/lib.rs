//! Modular icosahedron-tensegrity robots: geometry, physics, open-loop
//! control, binary genomes and a steady-state genetic algorithm that evolves
//! body and controller together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod genome;
pub mod geometry;
pub mod physics;

pub use error::{Error, Result};
