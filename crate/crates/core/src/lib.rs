//! Agent-based simulation of collective search on discretized fitness
//! landscapes, where agents learn feature-based social influence by gradient
//! descent, pick up a bias toward a privilege feature, and partly unlearn it
//! when mentors are introduced.

pub mod agents;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod influence;
pub mod intervention;
pub mod landscape;
pub mod output;
pub mod policy;
pub mod sampling;
pub mod signatures;
pub mod streams;

pub use error::{Error, Result};
