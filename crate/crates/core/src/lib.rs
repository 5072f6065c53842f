//! Cost-guided rewriting of IR super-blocks.
//!
//! The pipeline parses textual blocks ([`text`]), profiles them with a
//! concrete interpreter ([`interp`]) under a static cost model ([`cost`]),
//! rewrites the most expensive statements ([`rewrite`]), checks each
//! rewrite by differential execution ([`verify`]) and reports before/after
//! metrics ([`bench`]). [`corpus`] generates synthetic inputs with known
//! redundancies and [`pipeline`] ties everything together.

pub mod bench;
pub mod corpus;
pub mod cost;
pub mod interp;
pub mod ir;
pub mod pipeline;
pub mod rewrite;
pub mod text;
pub mod verify;
