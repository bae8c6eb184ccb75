//! Numerical laboratory for nutrient-driven Hele-Shaw tumour growth, reached
//! through the porous-medium relaxation `∂t ρ = ∇·(ρ∇p) + ρn`, `p = ρ^γ`.

pub mod baiocchi;
pub mod barrier;
pub mod cg;
pub mod config;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod hopflax;
pub mod io;
pub mod limit;
pub mod nutrient;
pub mod obstacle;
pub mod pme;
pub mod report;
pub mod run;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{Grid, ScalarField};
