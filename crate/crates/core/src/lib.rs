//! Iterative multi-fidelity snapshot selection for projection-based reduced-order models.

pub mod affine;
pub mod config;
pub mod deim;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod flow;
pub mod greedy;
pub mod heat;
pub mod linalg;
pub mod mesh;
pub mod mf;
pub mod params;
pub mod problem;
pub mod report;
pub mod rom;
pub mod supg;

pub use error::{Error, Result};
