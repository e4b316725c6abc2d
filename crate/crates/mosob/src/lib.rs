//! Musielak-Orlicz functions, modular spaces and Sobolev spaces on a bounded interval.

pub mod expr;
pub mod ext;
pub mod function_rep;
pub mod mo_function;
pub mod norms;
pub mod conditions;
pub mod operators;
pub mod probes;
pub mod cli;
