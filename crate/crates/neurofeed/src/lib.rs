//! File formats, simulation drivers, offline analysis and the live gateway
//! for the `neurofeed-core` engine.

pub mod formats;
pub mod gateway;
pub mod report;
pub mod sim;
pub mod source;

pub use formats::FormatError;
