//! Campaign orchestration for the matscreen engine: the screening pipeline,
//! dopant analysis, cost accounting with crossover analysis, artifact
//! storage, verification, and the command-line interface.

pub mod cli;
pub mod dope;
pub mod ledger;
pub mod screen;
pub mod store;
pub mod verify;
