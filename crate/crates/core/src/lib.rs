//! Decentralized pattern formation for heterogeneous robot swarms.
//!
//! Each robot samples its next velocity from a locally evaluated Gibbs
//! random field. Who a robot is attracted to is decided by a bond partition
//! that caps, per species and in total, how many neighbors it may bond with.
//! Different cap tables produce different molecule-like patterns.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`] and [`world`]: configuration documents and state.
//! - [`bonding`]: neighborhoods, bond partitions and the mutual bond graph.
//! - [`potentials`]: pair, kinetic and wall energies and the local Hamiltonian.
//! - [`sampler`]: Metropolis-Hastings velocity sampling.
//! - [`engine`]: the synchronous tick loop, anchor commands and headless runs.
//! - [`metrics`]: consensus error, remaining bonds, molecule counts, batch CIs.
//! - [`batch`]: seed sweeps and output files.
//! - [`service`]: the live web-socket bridge for interactive anchor steering.
//! - [`cli`]: the `grfswarm` command line.

pub mod batch;
pub mod bonding;
pub mod cli;
pub mod engine;
pub mod geom;
pub mod metrics;
pub mod potentials;
pub mod rng;
pub mod sampler;
pub mod scenario;
pub mod service;
pub mod world;

pub use bonding::{bond_graph, bond_partition, sense_neighbors, BondGraph, BondPartition, OrderedNeighborhood, TickView};
pub use engine::{run, step, Command, CommandKind, RunOptions, RunResult, Simulation};
pub use geom::{Bounds, Vec2};
pub use metrics::MetricsFrame;
pub use scenario::{presets, validate_scenario, Scenario, SpeciesSpec};
pub use world::{init_world, RobotState, WorldState};
