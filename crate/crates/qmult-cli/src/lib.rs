//! Library half of the CLI crate: the table/serialization layer, kept
//! importable so tests can re-parse emitted files with the same readers
//! the tool ships.

pub mod emit;
