//! Multi-agent simulation of FOMC policy meetings.
//!
//! A meeting runs persona-conditioned chat agents through a fixed protocol:
//! an economist drafts three rate alternatives, voters form private views,
//! present them, debate in a randomized order, hear a legal review and vote.
//! The [`evaluation`] module compares simulated decisions and individual
//! votes with the committee's real record.

pub mod backend;
pub mod campaign;
pub mod config;
pub mod engine;
pub mod evaluation;
pub mod events;
pub mod materials;
pub mod persona;
pub mod rng;
pub mod template;
pub mod transcript;
pub mod units;
