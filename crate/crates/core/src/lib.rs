pub mod branching;
pub mod error;
pub mod population;
pub mod quadrature;
pub mod rng;
pub mod state_space;
pub mod stats;
pub mod simulator;
pub mod boundary;
pub mod lab;
pub mod config;
pub mod check;
pub mod cli;
