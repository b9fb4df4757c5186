//! Library side of the `mxdotp` command-line tool: matrix file formats,
//! report schemas, and the subcommand implementations.

pub mod commands;
pub mod report;
pub mod tensor_file;
