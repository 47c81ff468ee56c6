//! Command line tool, benchmark harness, roster store and HTTP service.

pub mod api;
pub mod bench;
pub mod cli;
pub mod formats;
pub mod solve;
pub mod store;
