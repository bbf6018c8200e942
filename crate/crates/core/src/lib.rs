//! Qubit-reuse molecular generation: circuit IR, ansatz builders, dense and
//! MPS simulators, shot records and molecular-graph decoding.

pub mod ansatz;
pub mod batch;
pub mod chem;
pub mod circuit;
pub mod molgraph;
pub mod sim;
