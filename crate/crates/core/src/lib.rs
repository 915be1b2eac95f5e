//! Equality saturation embedded in an SSA IR: e-classes are ordinary
//! operations inside a graph region, rewrites are compiled to a matcher
//! bytecode and interpreted non-destructively, and extraction rewrites the IR
//! in place.

pub mod analysis;
pub mod dialects;
pub mod engine;
pub mod extract;
pub mod gen;
pub mod ir;
pub mod pattern;
pub mod sexp;
pub mod symbol;

pub use symbol::Symbol;
