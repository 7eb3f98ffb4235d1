//! Metaorder-driven order flow, price formation, and the scaling-law
//! estimators and closed-form predictions that go with them.

pub mod circulant;
pub mod config;
pub mod error;
pub mod estimators;
pub mod expsum;
pub mod flow;
pub mod io;
pub mod kernels;
pub mod oracle;
pub mod par;
pub mod params;
pub mod pipeline;
pub mod price;
pub mod quad;
pub mod report;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
pub use flow::{simulate_tape, Metaorder, Trade, TradeTape};
pub use params::{ModelParams, PropagatorMode};
pub use price::{assemble_price_path, ObservationGrid, PricePath};
