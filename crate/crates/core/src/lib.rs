//! Simulation of randomized consensus under an adaptive omission adversary.
//!
//! The [`model`] engine runs per-process state machines in synchronous
//! rounds and meters rounds, payload bits and random-source accesses.
//! Protocols: [`consensus`] (epoch-based main algorithm), [`tradeoff`]
//! (super-process variant), [`fallback`] (deterministic chain flooding).
//! [`overlay`] builds and certifies the gossip graph, [`coin_game`] holds the
//! hiding-game oracle behind the randomness lower bound, and [`harness`]
//! drives sweeps and emits records.

pub mod adversary;
pub mod coin_game;
pub mod consensus;
pub mod epoch;
pub mod error;
pub mod exec;
pub mod fallback;
pub mod harness;
pub mod model;
pub mod overlay;
pub mod tradeoff;
pub mod wire;
