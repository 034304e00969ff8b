//! Discrete-event co-simulator and scheduling compiler for two-node
//! distributed quantum circuits.

pub mod bench;
pub mod circuit;
pub mod commute;
pub mod dag;
pub mod engine;
pub mod entnet;
pub mod experiment;
pub mod linalg;
pub mod noise;
pub mod partition;
pub mod qasm;
pub mod schedule;
pub mod verify;

pub use circuit::{Circuit, CircuitError, Gate, GateKind};
