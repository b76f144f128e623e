//! Fully local distributed conductance testing on a synchronous CONGEST
//! simulator, plus an exact dense spectral oracle for small graphs.

pub mod graph;
pub mod sim;
pub mod spectral;
pub mod tester;
