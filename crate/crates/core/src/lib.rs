//! Micro-controller ensemble for a self-adaptive phone.
//!
//! A context manager runs an adaptation state machine over sensor readings,
//! an adaptation manager turns its outputs into effector writes, a failure
//! manager watches device health, and a meta-controller swaps in degraded
//! variants of the first two when devices fail. All controllers share a
//! versioned [`knowledge::Knowledge`] store and talk over a deterministic
//! in-process [`bus::Bus`].
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod afsm;
pub mod bus;
pub mod ensemble;
pub mod knowledge;
pub mod meta;
pub mod phone_sim;
pub mod runtime;
pub mod trace;

pub use runtime::{
    run, RunOptions, RunOutcome, Runtime, RuntimeFault, Scenario, ScenarioError, World,
};
