//! Library surface of the `vlab` CLI: the field-spec format, the check
//! runner, and the report renderers. The binary in `main.rs` is a thin
//! wrapper; integration tests drive these modules directly.

pub mod checks;
pub mod report;
pub mod specfile;
