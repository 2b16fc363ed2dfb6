//! Library side of the `explorer` binary, shared with the tests.

pub mod app;
pub mod session;
pub mod settings;
