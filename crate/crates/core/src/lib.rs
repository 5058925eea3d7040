//! Hyper-heuristics for dynamic truck dispatching at container terminals.
//!
//! Dispatch heuristics are expression trees over 14 terminal-state
//! features. They are evolved by tree-based genetic programming whose
//! population is periodically seeded by an autoregressive token policy
//! (LSTM or decoder-only Transformer) trained with vanilla policy gradient
//! on the heuristics' simulated throughput.

pub mod experiment;
pub mod expr;
pub mod gp;
pub mod heuristics;
pub mod hybrid;
pub mod nn;
pub mod sim;
