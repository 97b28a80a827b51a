//! Spectral machinery for Gaussian random fields on box domains and the
//! Reynolds-weighted random vector fields built on top of them.
//!
//! The pipeline: tensor quadrature grids ([`geometry`]) carry covariance
//! kernels ([`kernels`]) whose Fredholm eigenproblem is solved by a
//! symmetrized Nystrom discretization ([`spectral`]), giving a truncated
//! eigenbasis used to sample scalar Gaussian fields ([`grf`]) and
//! Reynolds-weighted turbulent vector fields ([`flow`]). The [`dissipation`]
//! module runs the viscosity sweeps that probe the inviscid-limit scaling of
//! the energy dissipation rate, and [`cli`] wires everything into a single
//! executable with JSON/CSV reporting.

pub mod cli;
pub mod dirichlet;
pub mod dissipation;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grf;
pub mod kernels;
pub mod mcstats;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
