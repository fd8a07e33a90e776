//! Library surface of the command-line tool; the binary in `main.rs` is a
//! thin argument-parsing layer over these modules.

pub mod analyze;
pub mod checkpoint;
pub mod config;
pub mod eval_cmd;
pub mod prepare;
pub mod train;
