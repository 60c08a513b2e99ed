//! Multi-machine power network simulation in port-Hamiltonian form with
//! sixth-order synchronous machines and a distributed optimal frequency
//! controller.

// Negated float comparisons are used on purpose so NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod exec;
pub mod machine;
pub mod network;
pub mod numeric;
pub mod plant;
pub mod random;
pub mod report;
pub mod simulation;
pub mod state;

pub use error::{Error, Result};
