//! Engine for procedurally generated function-interpretation benchmarks.
//!
//! The crate is `no_std` (with `alloc`) so the grammars, generators, metrics
//! and reference interpreters can be embedded anywhere. File formats, the
//! command line and network clients live in the `findbench` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod blackbox;
pub mod error;
pub mod generator;
pub mod grid;
pub mod interpret;
pub mod interval;
pub mod mlp;
pub mod metrics;
pub mod modifiers;
pub mod numeric;
pub mod relations;
pub mod rng;
pub mod sexpr;
pub mod spec;
pub mod strings;
pub mod words;

pub use error::{Error, Result};
pub use interval::Interval;
pub use modifiers::{ApproximationRef, CorruptionSpec, Modifier, NoiseKind, NoiseSpec, Polarity};
pub use numeric::{Atom, ComposeOp, Composition, Family, NumericExpr, Shape};
pub use relations::{FactTable, RelationSpec, UNDEFINED};
pub use spec::{Category, FunctionSpec, Payload, Subcategory, TestSet};
pub use strings::{StringOp, StringProgram};

/// Version string embedded in every output file.
pub const ENGINE_VERSION: &str = concat!("findbench-core ", env!("CARGO_PKG_VERSION"));
/// Version of the manifest, interpretation and report schemas.
pub const FORMAT_VERSION: u32 = 1;
