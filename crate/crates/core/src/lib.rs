//! Stochastic model of block propagation and validation in BFT consensus
//! chains.
//!
//! * [`distributions`]: Gumbel broadcast law, k-fold convolutions, the
//!   closed-form approximation and exact moments.
//! * [`simulator`]: Monte Carlo of the broadcast Markov chain and of block
//!   times built from several broadcast phases.
//! * [`fitting`]: histograms, least-squares fitting of the approximation to
//!   block-time data, transfer-time estimates and goodness of fit.
//! * [`kv`]: the `key = value` text format for options, reports and
//!   manifests.
//! * [`ingest`]: block timestamps from CSV files or a Tendermint RPC node,
//!   and their conversion to inter-block intervals.

pub mod distributions;
pub mod fitting;
pub mod ingest;
pub mod kv;
pub mod simulator;
