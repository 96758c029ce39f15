//! Pseudo-spectral solver and verification harness for fractional
//! regularizations of the incompressible Navier–Stokes equations on the
//! periodic torus.

pub mod cli_io;
pub mod diagnostics;
pub mod experiments;
pub mod fracpow;
pub mod integrator;
pub mod nonlinear;
pub mod spectral;
