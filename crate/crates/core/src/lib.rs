pub mod aggregation;
pub mod arrangement;
pub mod branch;
pub mod cli;
pub mod compact;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod heuristics;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod master;
pub mod objectives;
pub mod oracle;
pub mod pricing;
pub mod solution;

pub use error::{Error, Result};
