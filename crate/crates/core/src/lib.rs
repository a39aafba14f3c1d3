//! Core library for dynamics-informed reservoir computing (DyRC).
//!
//! The pipeline: simulate a forced Duffing oscillator ([`dynamics`]), turn
//! sections of the training trajectory into visibility graphs or draw random
//! baseline graphs ([`graphs`]), use those graphs as echo-state reservoirs
//! trained by ridge regression ([`reservoir`]), and sweep the four reservoir
//! variants over sizes and replicates to compare prediction error
//! ([`experiment`]).
//!
//! With the default `parallel` feature the replicate sweep runs on rayon;
//! disabling it falls back to a sequential runner with identical output.

pub mod dynamics;
pub mod experiment;
pub mod graphs;
pub mod reservoir;

pub(crate) mod fmt;
