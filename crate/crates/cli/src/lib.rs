//! Support library for the `rollfit` binary: benchmark protocols and their
//! CSV report format.

pub mod bench;
