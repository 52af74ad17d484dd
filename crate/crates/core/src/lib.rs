//! Numerical tools for weighted pseudo almost periodic functions and mild
//! solutions of nonautonomous evolution equations.

pub mod ap;
pub mod config;
pub mod error;
pub mod evolution;
pub mod expr;
pub mod heat;
pub mod mild;
pub mod pap;
pub mod quad;
pub mod report;
pub mod run;
pub mod weights;

pub use error::{Error, Result};
