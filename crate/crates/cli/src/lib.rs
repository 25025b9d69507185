//! Run configuration, storage and the simulate/analyze pipeline behind the
//! `ftgauge` command.

pub mod config;
pub mod pipeline;
pub mod store;
pub mod verify;
