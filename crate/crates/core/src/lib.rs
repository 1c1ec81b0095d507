pub mod error;
pub mod estimator;
pub mod experiments;
pub mod manifold;
pub mod pattern;
pub mod signal;
pub mod filter;
pub mod pipeline;
pub mod io;
pub mod config;
