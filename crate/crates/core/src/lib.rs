//! Distributionally robust computation offloading for aerial access networks:
//! devices offload tasks through UAVs, which either compute them or relay them
//! to a high-altitude platform.

pub mod ambiguity;
pub mod cli;
pub mod config;
pub mod evaluation;
pub mod geometry;
pub mod lp;
pub mod mdrloa;
pub mod model;
pub mod rng;
