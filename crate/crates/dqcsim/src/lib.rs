//! Exact simulation of delegated measurement-based quantum computing protocols.
//!
//! The crate covers dense state simulation ([`qstate`]), graph states and the
//! dotted triple-graph ([`graphstate`]), measurement patterns ([`mbqc`]),
//! composable-security plumbing ([`acframework`]), the protocol machines
//! ([`protocols`]), Pauli attack analysis ([`adversary`]) and the command line
//! front end ([`cli`]).

pub mod acframework;
pub mod adversary;
pub mod cli;
pub mod error;
pub mod graphstate;
pub mod mbqc;
pub mod protocols;
pub mod qstate;

pub use error::{DqcError, Result};
