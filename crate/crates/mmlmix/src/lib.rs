//! Command-line front end, file formats and simulation studies built on
//! [`mmlmix_core`].

pub mod cli;
pub mod experiments;
pub mod io;
pub mod parallel;
pub mod protein;
