//! Pseudo-spectral simulator for the 2-D viscous Camassa-Holm (Navier-Stokes-alpha)
//! vorticity equations, with tools to check their long-time Oseen-vortex asymptotics.

pub mod eigenbasis;
pub mod evolution;
pub mod harness;
pub mod lyapunov_perron;
pub mod error;
pub mod norms;
pub mod operators;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{Frame, Grid, ScalarField, Spectrum, VectorField};
