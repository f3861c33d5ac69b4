//! Solvers for the multi-path source-destination LWR model on road networks
//! whose junctions have a single incoming road.
//!
//! Each road carries a density `rho` obeying `rho_t + g(rho)_x = 0` with
//! `g(rho) = rho v(rho)`, and every path `k` through the road carries a
//! fraction `theta_k` transported by `(rho theta_k)_t + (v(rho) rho theta_k)_x = 0`.
//!
//! Two engines are provided: exact wave front tracking for piecewise-affine
//! fluxes ([`front_tracking`]) and a Godunov finite-volume scheme
//! ([`godunov`]) that drives the fraction transport ([`theta`]) and the
//! network solve ([`network`]).

pub mod diagnostics;
pub mod error;
pub mod flux;
pub mod front_tracking;
pub mod godunov;
pub mod network;
pub mod series;
pub mod theta;
pub mod traces;

pub use error::{Error, Result};
pub use flux::{FluxModel, PiecewiseLinearFlux, ScalarFlux};
pub use series::PiecewiseConstant;
