//! Bethe vectors, scalar products, and determinant form factors for
//! gl(3)-invariant rational models, cross-checked against a dense
//! transfer-matrix realization of the same algebra.
//!
//! The crate has two halves that deliberately do not share code:
//!
//! * **Formula side** — partition-sum constructions of Bethe vectors, the
//!   multiple-action rules of the monodromy entries on them, scalar
//!   products through highest coefficients, and the on-shell determinant
//!   representations of scalar products and form factors. Everything here
//!   is driven by the four rational functions in [`field::RateKernel`] and
//!   sums over set partitions from [`params`].
//! * **Oracle side** — an explicit `3^L`-dimensional monodromy matrix built
//!   site by site in [`oracle`], on which every formula-side object can be
//!   realized as a concrete vector or matrix and compared entry by entry.
//!
//! All algorithms are generic over [`field::Field`], instantiated with
//! exact rationals (`BigRational`) for identity checks and with
//! `Complex64` for root finding and larger sweeps. The randomized checks
//! draw their parameters from [`params::DrawPool`], which produces the same
//! sample points in both modes.

pub mod action;
pub mod bethe;
pub mod error;
pub mod field;
pub mod formfactor;
pub mod linalg;
pub mod onshell;
pub mod oracle;
pub mod params;
pub mod scalar;

pub use action::{multiple_action, WeightedStateSum};
pub use bethe::{
    bethe_vector, dual_bethe_vector, ik_determinant, ik_over_f, BetheLabel, BetheVariant, Creator,
    StateVector,
};
pub use error::{Error, Result};
pub use field::{Field, Rat, RateKernel, RateKind, C64};
pub use formfactor::{
    form_factor_by_twist_derivative, form_factor_distinct_states,
    form_factor_distinct_states_at_pivot, form_factor_same_state, omega_values, theta_matrix,
};
pub use linalg::Mat;
pub use onshell::{
    bae_product_residuals, bae_residuals, continue_twist, one_root_solutions, solve_bae,
    transfer_eigenvalue, BaeSolution, SolveOptions, TwistVector,
};
pub use oracle::{ChainModel, Monodromy, TabulatedWeights, Weights};
pub use params::{DrawPool, ParamSet};
pub use scalar::{
    highest_coeff_residue, highest_coefficient, reshetikhin_scalar_product,
    twisted_scalar_product_det, HighestCoeffArgs, ResiduePole, ZStrategy,
};
