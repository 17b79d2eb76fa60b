pub mod action;
pub mod env;
pub mod seed;
pub mod trace;
pub mod types;
pub mod oracle;
pub mod engine;
pub mod baselines;
pub mod harness;
