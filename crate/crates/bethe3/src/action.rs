//! Multiple actions of the creation operators on Bethe vectors.
//!
//! Applying a product `T_ij(x_1) ... T_ij(x_n)` of equal-index creation
//! entries to `B^{a,b}(u; v)` lands back in the span of Bethe vectors, with
//! coefficients that are explicit partition sums over the merged parameter
//! sets `eta = {u, x}` and `xi = {v, x}`. [`multiple_action`] produces that
//! combination symbolically, as a [`WeightedStateSum`] of labels; callers
//! decide whether to materialize it through any of the vector constructions
//! or to keep manipulating it formally.
//!
//! The three closed forms, with `n = |x|`:
//!
//! ```text
//! T_13(x) B^{a,b}(u; v) = lambda_2(x) B^{a+n,b+n}(eta; xi)
//!
//! T_12(x) B^{a,b}(u; v) = (-1)^n lambda_2(x)
//!     sum_{xi = xi_I + xi_II, |xi_I| = n}
//!         f(xi_II, xi_I) K_n(xi_I | x + c) B^{a+n,b}(eta; xi_II)
//!
//! T_23(x) B^{a,b}(u; v) = (-1)^n lambda_2(x)
//!     sum_{eta = eta_I + eta_II, |eta_I| = n}
//!         f(eta_I, eta_II) K_n(x | eta_I + c) B^{a,b+n}(eta_II; xi)
//! ```
//!
//! At `n = 1` the second and third reduce to the one-point recursions used
//! by the recursive vector builders; the tests pin that correspondence
//! coefficient by coefficient.

use crate::bethe::{bethe_vector, ik_determinant, BetheLabel, BetheVariant, Creator, StateVector};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg::vec_axpy;
use crate::oracle::ChainModel;
use crate::params::{k_subsets, split_at_indices, ParamSet};

/// A formal linear combination of Bethe labels.
///
/// Produced by [`multiple_action`]; the labels within one sum are pairwise
/// distinct and every stored coefficient is nonzero (vanishing terms are
/// pruned at construction).
#[derive(Clone, Debug)]
pub struct WeightedStateSum<F: Field> {
    pub terms: Vec<(F, BetheLabel<F>)>,
}

impl<F: Field> WeightedStateSum<F> {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates the sum as a concrete state: `sum_k coeff_k . B(label_k)`.
    ///
    /// Labels produced by actions routinely share points between their `u`
    /// and `v` sets, which only the four explicit constructions evaluate;
    /// the recursion variants reject such labels.
    pub fn materialize(
        &self,
        model: &ChainModel<F>,
        variant: BetheVariant,
    ) -> Result<StateVector<F>> {
        let mut coords = vec![F::zero(); model.dim()];
        for (coeff, label) in &self.terms {
            let state = bethe_vector(model, label, variant)?;
            vec_axpy(&mut coords, coeff, &state.coords);
        }
        Ok(StateVector {
            coords,
            label: None,
            weight_empty: false,
        })
    }
}

/// The action of `T_which(x_1) ... T_which(x_n)` on the vector labeled by
/// `base`, as a weighted sum of new labels.
///
/// Equal-index creation entries commute, so the product depends on `x` only
/// as a set. The points must be pairwise distinct and must not reappear in
/// `base` (the closed forms develop genuine poles there); an intersection
/// reports [`Error::Overlap`].
pub fn multiple_action<F: Field>(
    model: &ChainModel<F>,
    which: Creator,
    x: &ParamSet<F>,
    base: &BetheLabel<F>,
) -> Result<WeightedStateSum<F>> {
    if x.is_empty() {
        return Err(Error::Cardinality(
            "an action needs at least one point".into(),
        ));
    }
    x.require_distinct("action points")?;
    base.require_generic()?;
    for p in x.iter() {
        if base.u.iter().chain(base.v.iter()).any(|q| q == p) {
            return Err(Error::Overlap(format!(
                "action point {p} already appears in the target label"
            )));
        }
    }
    let kernel = model.kernel();
    let n = x.len();
    let lam2 = model.lambda2_set(x)?;
    // (-1)^n lambda_2(x) prefactor of the two partition-sum actions
    let signed = if n % 2 == 0 {
        lam2.clone()
    } else {
        -lam2.clone()
    };
    let eta = base.u.union(x);
    let xi = base.v.union(x);
    let mut terms: Vec<(F, BetheLabel<F>)> = Vec::new();
    match which {
        Creator::T13 => {
            terms.push((lam2, BetheLabel::new(eta, xi)));
        }
        Creator::T12 => {
            let x_up = x.shifted(kernel.c());
            for pick in k_subsets(xi.len(), n) {
                let parts = split_at_indices(&xi, &pick);
                let kn = ik_determinant(kernel, &parts.first, &x_up)?;
                let coeff = signed.clone() * kernel.f_set(&parts.second, &parts.first)? * kn;
                if coeff.is_zero() {
                    continue;
                }
                terms.push((coeff, BetheLabel::new(eta.clone(), parts.second)));
            }
        }
        Creator::T23 => {
            for pick in k_subsets(eta.len(), n) {
                let parts = split_at_indices(&eta, &pick);
                let kn = ik_determinant(kernel, x, &parts.first.shifted(kernel.c()))?;
                let coeff = signed.clone() * kernel.f_set(&parts.first, &parts.second)? * kn;
                if coeff.is_zero() {
                    continue;
                }
                terms.push((coeff, BetheLabel::new(parts.second, xi.clone())));
            }
        }
    }
    Ok(WeightedStateSum { terms })
}
