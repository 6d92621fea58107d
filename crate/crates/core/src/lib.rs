//! Neuroevolution of DAG-encoded forecasting networks.
//!
//! Candidates are pairs of directed acyclic graphs over layer operations:
//! a 2D graph over the `(H, F)` daily input, a flatten, a 1D graph and a
//! fixed feed-forward head producing the `H` forecasts. Each candidate is
//! trained in two phases, first jointly with a sigmoid-relaxed feature mask
//! under an L1 penalty, then with the thresholded mask under a cyclic
//! learning rate whose cycle minima feed a snapshot ensemble. A
//! steady-state evolutionary search over a worker pool evolves the graphs.

pub mod artifacts;
pub mod data;
pub mod exec;
pub mod genotype;
pub mod layers;
pub mod search;
pub mod tensor;
pub mod trainer;
pub mod variation;
