//! File formats, the synthetic corpus on disk, corpus-level training and
//! evaluation, timing and the command line for [`doorsom_core`].

pub mod bench;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model_io;
pub mod pnm;

pub use error::{Error, Result};
