//! Numerical laboratory for inverse boundary value problems of semilinear
//! elliptic equations `Δu + a(x,u) = 0` on the unit square.
//!
//! The crate simulates Dirichlet-to-Neumann maps (full boundary, with an
//! interior cavity, or with data restricted to part of the boundary),
//! differentiates them numerically with respect to several small boundary
//! amplitudes, and uses those higher-order linearizations to recover the
//! Taylor coefficients `∂_z^k a(x,0)` from boundary data alone.
//!
//! Module map:
//!
//! * [`geometry`]: grid, node classification, boundary traces
//! * [`nonlinearity`]: the polynomial model of `a(x,z)`
//! * [`forward`]: Newton solver for the semilinear problem and linear solves
//! * [`dn_map`]: Neumann traces and DN-map measurement oracles
//! * [`probes`]: exponential harmonic probes, weight functions, recombination
//! * [`linearization`]: mixed ε-derivatives and the chain-rule polynomial
//! * [`reconstruction`]: Fourier recovery of the Taylor coefficients
//! * [`experiments`]: cavity / partial-data harnesses and identity checks
//! * [`cli`]: configuration files and result bundles

pub mod cli;
pub mod config;
pub mod dn_map;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod geometry;
pub mod linalg;
pub mod linearization;
pub mod nonlinearity;
pub mod output;
pub mod probes;
pub mod reconstruction;

pub use error::{LabError, Result};

pub use dn_map::{neumann_trace, BoundaryFunction, DnOracle};
pub use forward::{solve_linear, solve_semilinear, Field, SolverConfig};
pub use geometry::{
    boundary_trace, build_grid, build_mask, BoundaryTrace, Cavity, DomainMask, Edge, Gamma, Grid,
    NodeKind, Notch, TraceKind,
};
pub use linearization::{
    assemble_rn, chain_terms, mixed_derivative, ChainTerm, LinearizedDerivative,
};
pub use nonlinearity::{CoefficientExpr, Nonlinearity};
pub use probes::{
    adapted_probe_pair, calderon_pair, combination_ledger, weight_function, CalderonPair,
    CombinationLedger,
};
pub use reconstruction::{FourierSamples, ReconstructionResult};
