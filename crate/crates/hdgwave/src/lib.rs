//! Time-harmonic acoustic wave solver based on the hybridizable discontinuous
//! Galerkin (HDG) method, with adjoint-state gradients and an iterative
//! full-waveform inversion loop.
//!
//! The forward problem is the first-order Euler system for pressure and
//! velocity at a complex frequency `sigma = i*omega - s`. HDG condenses all
//! volume unknowns out of the global linear system: the only globally coupled
//! unknowns are the pressure traces on element faces. A sparse direct
//! factorization of the trace system is reused across right-hand sides
//! (sources) and for the conjugate-transpose solves required by the
//! adjoint-state method, which is what makes the gradient of the data misfit
//! cheap once the forward problem has been solved.
//!
//! Module map:
//! - [`mesh`]: simplicial meshes (triangles/tetrahedra), face enumeration,
//!   interior/boundary classification, cell-to-face connectivity.
//! - [`quadrature`]: simplex quadrature rules with declared exactness.
//! - [`basis`]: nodal Lagrange bases on reference simplexes and faces.
//! - [`orders`]: per-cell polynomial orders, face order rule, dof counting,
//!   trace-space layout.
//! - [`model`]: wave speed / density models as per-cell polynomial
//!   coefficients.
//! - [`sparse`]: sparse complex LU with factorization reuse and
//!   conjugate-transpose solves.
//! - [`hdg`]: per-cell HDG blocks, static condensation, global trace system,
//!   volume reconstruction.
//! - [`forward`]: forward solves for many sources, receiver restriction,
//!   manufactured-solution error measurement.
//! - [`crosscheck`]: second-order continuous-Galerkin reference solve used as
//!   a diagnostic oracle.
//! - [`adjoint`]: adjoint states and the misfit gradient.
//! - [`inversion`]: misfit, nonlinear conjugate gradient, line search,
//!   frequency continuation, synthetic data.
//! - [`config`], [`io`]: run configuration and file formats.

pub mod adjoint;
pub mod basis;
pub mod config;
pub mod crosscheck;
pub mod forward;
pub mod hdg;
pub mod inversion;
pub mod io;
pub mod mesh;
pub mod model;
pub mod orders;
pub mod quadrature;
pub mod sparse;

use thiserror::Error;

/// Complex scalar used throughout the discretization.
pub type C64 = num_complex::Complex64;

/// Library-wide error type. Variants map onto the CLI exit codes
/// (config = 2, numerical = 3, I/O = 4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Complex frequency `sigma = i*omega - s` with `omega = 2*pi*f_hz` and
/// Laplace shift `s >= 0`.
pub fn complex_frequency(freq_hz: f64, laplace_shift: f64) -> C64 {
    C64::new(-laplace_shift, 2.0 * std::f64::consts::PI * freq_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_frequency_convention() {
        let sigma = complex_frequency(5.0, 0.0);
        assert_eq!(sigma.re, 0.0);
        assert!((sigma.im - 31.41592653589793).abs() < 1e-12);
        let damped = complex_frequency(5.0, 2.5);
        assert_eq!(damped.re, -2.5);
    }
}
