//! Patch-level cell-graph features and bilevel learning of an image-level
//! patch graph jointly with a GCN classifier.

pub mod geometry;
pub mod io;
pub mod parallel;
pub mod synth;
pub mod autodiff;
pub mod cli;
pub mod features;
pub mod model;
pub mod optim;
pub mod train;
