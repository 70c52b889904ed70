//! Co-simulation of domain-wall spintronic synapses and neurons, from micromagnetics
//! through crossbar circuits to a quantized two-layer network.

// `!(x > 0.0)` is the NaN-rejecting form used throughout validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crossbar;
pub mod energy;
pub mod io;
pub mod magnetics;
pub mod mtj;
pub mod network;
pub mod neuron_axon;
pub mod numerics;
pub mod vec3;

#[cfg(test)]
mod properties;
