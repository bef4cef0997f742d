//! `gridnet`: a small, fully inspectable neural-network toolkit for 6x6 pixel
//! grids. It covers digit classification with one hidden layer, per-layer
//! activation diagrams, checkerboard and not-a-digit probes, and class
//! imbalance studies. Every random choice flows from an explicit seed.

pub mod datasets;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod network;
pub mod rng;
pub mod training;
pub mod viz;

pub use error::{Error, FieldPath, Result};
pub use grid::PixelGrid;
pub use network::{Activation, ActivationRecord, Gradients, Network, NetworkConfig};
