//! Weyl–Titchmarsh theory for discrete Hamiltonian systems
//! `S_ρ Ψ = (zA + B) Ψ`.
//!
//! * [`system`]: coefficients, validation, constructors, normal forms.
//! * [`propagate`]: stepping, fundamental systems, the Lagrange form.
//! * [`weyl`]: M-functions, Weyl disks, half-line limits, spectral measures, Riccati.
//! * [`green`]: whole-line and half-line Green's matrices.
//! * [`testkit`]: independent oracles and seeded generators.

pub mod error;
pub mod linalg;
pub mod propagate;
pub mod system;
pub mod weyl;
pub mod green;
pub mod testkit;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};
pub use propagate::{FundamentalMatrix, HatState, Trajectory, WeylSolution};
pub use system::{BoundaryData, Extension, HamiltonianSystem, SignClass, Tolerances};
