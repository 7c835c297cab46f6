pub mod config;
pub mod geometry;
pub mod rng;
pub mod weights;
pub mod nn;
pub mod demand;
pub mod numeric;
pub mod mpc;
pub mod transport;
pub mod proxy;
pub mod sim;
pub mod harness;
