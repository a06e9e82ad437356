//! Scalar products of Bethe states.
//!
//! The central object is the *highest coefficient* `Z_{a,b}(t̄; x̄ | s̄; ȳ)`,
//! a rational function of four families of points (`|t̄| = |x̄| = a`,
//! `|s̄| = |ȳ| = b`) that plays the role of a domain-wall partition
//! function.  Three independent representations are implemented and must
//! agree:
//!
//! * a partition sum over `w̄ = {s̄, x̄}` ([`ZStrategy::SumW`]),
//! * a partition sum over `η̄ = {ȳ+c, t̄}` ([`ZStrategy::SumEta`]),
//! * a Cauchy-type multiple contour integral around `w̄`, evaluated here
//!   as its exact residue sum ([`ZStrategy::Contour`]).
//!
//! On top of `Z` sit the scalar products: the general bilinear sum over
//! partitions ([`reshetikhin_scalar_product`]), valid for arbitrary
//! off-shell states, and the single-determinant form
//! ([`twisted_scalar_product_det`]) for the pairing of an on-shell state
//! with a twisted on-shell dual state.

use crate::bethe::{ik_determinant, BetheLabel};
use crate::error::{Error, Result};
use crate::field::{div_nz, Field, RateKernel};
use crate::linalg::Mat;
use crate::onshell::{bae_product_residuals, TwistVector};
use crate::oracle::Weights;
use crate::params::{k_subsets, split_at_indices, ParamSet};

/// The four point families of a highest coefficient
/// `Z_{a,b}(t̄; x̄ | s̄; ȳ)`.
#[derive(Debug, Clone)]
pub struct HighestCoeffArgs<F: Field> {
    pub t: ParamSet<F>,
    pub x: ParamSet<F>,
    pub s: ParamSet<F>,
    pub y: ParamSet<F>,
}

impl<F: Field> HighestCoeffArgs<F> {
    pub fn new(t: ParamSet<F>, x: ParamSet<F>, s: ParamSet<F>, y: ParamSet<F>) -> Result<Self> {
        if t.len() != x.len() {
            return Err(Error::Cardinality(format!(
                "first family needs |t| = |x|, got {} and {}",
                t.len(),
                x.len()
            )));
        }
        if s.len() != y.len() {
            return Err(Error::Cardinality(format!(
                "second family needs |s| = |y|, got {} and {}",
                s.len(),
                y.len()
            )));
        }
        Ok(HighestCoeffArgs { t, x, s, y })
    }

    pub fn a(&self) -> usize {
        self.t.len()
    }

    pub fn b(&self) -> usize {
        self.s.len()
    }
}

/// Which representation of the highest coefficient to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZStrategy {
    /// `(−1)^b Σ K_b(s̄−c|w̄_I) K_a(w̄_II|t̄) K_b(ȳ|w̄_I) f(w̄_I,w̄_II)`
    /// over partitions of `w̄ = {s̄, x̄}` with `|w̄_I| = b`.
    SumW,
    /// `(−1)^a f(ȳ,x̄) f(s̄,t̄) Σ K_a(t̄−c|η̄_I) K_a(x̄|η̄_I) K_b(η̄_II−c|s̄)
    /// f(η̄_I,η̄_II)` over partitions of `η̄ = {ȳ+c, t̄}` with `|η̄_I| = a`.
    SumEta,
    /// The `b`-fold contour integral around `w̄`, computed exactly as a
    /// sum of iterated residues over injective assignments `z_j ↦ w_m`.
    Contour,
}

impl ZStrategy {
    pub const ALL: [ZStrategy; 3] = [ZStrategy::SumW, ZStrategy::SumEta, ZStrategy::Contour];

    pub fn name(&self) -> &'static str {
        match self {
            ZStrategy::SumW => "sum-w",
            ZStrategy::SumEta => "sum-eta",
            ZStrategy::Contour => "contour",
        }
    }
}

pub(crate) fn parity_sign<F: Field>(n: usize) -> F {
    if n % 2 == 0 {
        F::one()
    } else {
        -F::one()
    }
}

/// Highest coefficient `Z_{a,b}(t̄; x̄ | s̄; ȳ)` through the chosen
/// representation.  All representations are rational in every point and
/// agree wherever they are defined; they differ only in which
/// coincidences they tolerate before a pole error surfaces.
pub fn highest_coefficient<F: Field>(
    kernel: &RateKernel<F>,
    args: &HighestCoeffArgs<F>,
    strategy: ZStrategy,
) -> Result<F> {
    match strategy {
        ZStrategy::SumW => z_sum_w(kernel, args),
        ZStrategy::SumEta => z_sum_eta(kernel, args),
        ZStrategy::Contour => z_contour(kernel, args),
    }
}

fn z_sum_w<F: Field>(kernel: &RateKernel<F>, args: &HighestCoeffArgs<F>) -> Result<F> {
    let b = args.b();
    let s_down = args.s.shifted(&-kernel.c().clone());
    let w = args.s.union(&args.x);
    let mut total = F::zero();
    for pick in k_subsets(w.len(), b) {
        let parts = split_at_indices(&w, &pick);
        let term = ik_determinant(kernel, &s_down, &parts.first)?
            * ik_determinant(kernel, &parts.second, &args.t)?
            * ik_determinant(kernel, &args.y, &parts.first)?
            * kernel.f_set(&parts.first, &parts.second)?;
        total = total + term;
    }
    Ok(parity_sign::<F>(b) * total)
}

fn z_sum_eta<F: Field>(kernel: &RateKernel<F>, args: &HighestCoeffArgs<F>) -> Result<F> {
    let a = args.a();
    let c = kernel.c().clone();
    let t_down = args.t.shifted(&-c.clone());
    let eta = args.y.shifted(&c).union(&args.t);
    let mut total = F::zero();
    for pick in k_subsets(eta.len(), a) {
        let parts = split_at_indices(&eta, &pick);
        let term = ik_determinant(kernel, &t_down, &parts.first)?
            * ik_determinant(kernel, &args.x, &parts.first)?
            * ik_determinant(kernel, &parts.second.shifted(&-c.clone()), &args.s)?
            * kernel.f_set(&parts.first, &parts.second)?;
        total = total + term;
    }
    let prefactor = kernel.f_set(&args.y, &args.x)? * kernel.f_set(&args.s, &args.t)?;
    Ok(parity_sign::<F>(a) * prefactor * total)
}

/// Ordered injective assignments of `count` integration variables onto
/// `pool` indices: every way to evaluate the iterated residues.
fn injective_assignments(pool: usize, count: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(count);
    fn recurse(pool: usize, count: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == count {
            out.push(current.clone());
            return;
        }
        for m in 0..pool {
            if !current.contains(&m) {
                current.push(m);
                recurse(pool, count, current, out);
                current.pop();
            }
        }
    }
    recurse(pool, count, &mut current, &mut out);
    out
}

fn z_contour<F: Field>(kernel: &RateKernel<F>, args: &HighestCoeffArgs<F>) -> Result<F> {
    let b = args.b();
    let c = kernel.c().clone();
    let w = args.s.union(&args.x);
    w.require_distinct("contour anchor points")?;

    // Each z-contour must enclose exactly the points of w̄ and no other
    // singularity of the integrand.  The excluded singularities sit at
    // ȳ, at w̄ − c (reached through the shifted kernels and through the
    // rate couplings between integration variables), and the integrand
    // itself must be regular on w̄, which rules out t̄ touching it.
    let w_down = w.shifted(&-c.clone());
    let fail = |what: &str| -> Result<F> {
        Err(Error::Strategy(format!(
            "contour enclosure is ambiguous: {what} meets the anchor set"
        )))
    };
    for p in args.y.iter() {
        if w.iter().any(|q| q == p) {
            return fail("a y-point");
        }
    }
    for p in args.t.iter() {
        if w.iter().any(|q| q == p) {
            return fail("a t-point");
        }
    }
    for p in w_down.iter() {
        if w.iter().any(|q| q == p) {
            return fail("a shifted anchor point");
        }
    }

    let s_down = args.s.shifted(&-c.clone());
    let mut total = F::zero();
    for assignment in injective_assignments(w.len(), b) {
        let z = ParamSet::new(assignment.iter().map(|&m| w[m].clone()).collect::<Vec<_>>());
        // Residue weight of f(z_j, w̄) at z_j = w_m, divided by c.
        let mut weight = F::one();
        for &m in &assignment {
            for (m2, other) in w.iter().enumerate() {
                if m2 != m {
                    weight = weight * kernel.f(&w[m], other)?;
                }
            }
        }
        // The remaining couplings between integration variables.
        for (j, zj) in z.iter().enumerate() {
            for (k, zk) in z.iter().enumerate() {
                if j != k {
                    weight = div_nz(weight, kernel.f(zj, zk)?, "z-z rate")?;
                }
            }
        }
        let z_up = z.shifted(&c);
        let term = ik_determinant(kernel, &s_down, &z)?
            * ik_determinant(kernel, &args.y, &z)?
            * ik_determinant(kernel, &w, &args.t.union(&z_up))?;
        total = total + weight * term;
    }
    let mut divisor = F::one();
    for k in 1..=b {
        divisor = divisor * F::from_int(k as i64);
    }
    div_nz(total, divisor, "assignment multiplicity")
}

/// Which pole of `Z_{a,b}` in its variable `s_b` to extract the residue
/// at: the matching point `y_b` or the opposite-family point `t_a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResiduePole {
    AtY,
    AtT,
}

/// A nullspace vector of the row system, by straightforward elimination
/// with magnitude pivoting.  Rows may be redundant; `None` only when the
/// columns are linearly independent (no nullspace).
fn nullspace_vector<F: Field>(mut rows: Vec<Vec<F>>, cols: usize) -> Option<Vec<F>> {
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut rank = 0;
    for col in 0..cols {
        // Best pivot among the remaining rows.
        let mut best: Option<(usize, f64)> = None;
        for (r, row) in rows.iter().enumerate().skip(rank) {
            if !row[col].is_zero() {
                let m = row[col].mag();
                if best.map_or(true, |(_, bm)| m > bm) {
                    best = Some((r, m));
                }
            }
        }
        let Some((r, _)) = best else { continue };
        rows.swap(rank, r);
        let inv = F::one() / rows[rank][col].clone();
        for entry in rows[rank].iter_mut() {
            *entry = entry.clone() * inv.clone();
        }
        for r2 in 0..rows.len() {
            if r2 != rank && !rows[r2][col].is_zero() {
                let factor = rows[r2][col].clone();
                for c2 in 0..cols {
                    let delta = factor.clone() * rows[rank][c2].clone();
                    rows[r2][c2] = rows[r2][c2].clone() - delta;
                }
            }
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    // Free column furthest to the right gives the kernel vector.
    let free = (0..cols).rev().find(|&c| pivot_of_col[c].is_none())?;
    let mut vector = vec![F::zero(); cols];
    vector[free] = F::one();
    for col in 0..cols {
        if let Some(r) = pivot_of_col[col] {
            vector[col] = -rows[r][free].clone();
        }
    }
    Some(vector)
}

fn poly_eval<F: Field>(coeffs: &[F], at: &F) -> F {
    let mut acc = F::zero();
    for c in coeffs.iter().rev() {
        acc = acc * at.clone() + c.clone();
    }
    acc
}

/// Fit `γ(δ) = P(δ)/Q(δ)` (both of degree ≤ `deg`) through the samples
/// and return `γ(0)`, stripping any common factor of `δ` first.  Errors
/// when the data force `Q(0) = 0` with `P(0) ≠ 0` — a genuine
/// higher-order pole — or when holdout samples expose a bad fit.
fn rational_value_at_zero<F: Field>(
    samples: &[(F, F)],
    holdout: &[(F, F)],
    deg: usize,
) -> Result<F> {
    let cols = 2 * (deg + 1);
    let rows: Vec<Vec<F>> = samples
        .iter()
        .map(|(d, g)| {
            let mut row = Vec::with_capacity(cols);
            let mut power = F::one();
            for _ in 0..=deg {
                row.push(power.clone());
                power = power * d.clone();
            }
            let mut power = F::one();
            for _ in 0..=deg {
                row.push(-(g.clone() * power.clone()));
                power = power * d.clone();
            }
            row
        })
        .collect();
    let vector = nullspace_vector(rows, cols).ok_or_else(|| {
        Error::Interpolation("the sample system has no rational fit of this degree".into())
    })?;
    let mut p = vector[..=deg].to_vec();
    let mut q = vector[deg + 1..].to_vec();
    if q.iter().all(|c| c.is_zero()) {
        return Err(Error::Interpolation(
            "the fitted denominator vanished identically".into(),
        ));
    }
    // Confirm against samples the fit never saw.
    for (d, g) in holdout {
        let qd = poly_eval(&q, d);
        if qd.is_zero() {
            continue;
        }
        let fitted = div_nz(poly_eval(&p, d), qd, "fit denominator")?;
        let ok = if F::EXACT { fitted == *g } else { fitted.eq_tol(g, 1e-6) };
        if !ok {
            return Err(Error::Interpolation(
                "holdout samples disagree with the rational fit; \
                 the degree bound is too small for this function"
                    .into(),
            ));
        }
    }
    // Strip common δ factors, then read the value at zero.
    while p.first().is_some_and(|c| c.is_zero()) && q.first().is_some_and(|c| c.is_zero()) {
        p.remove(0);
        q.remove(0);
        if p.is_empty() || q.is_empty() {
            return Err(Error::Interpolation("the fit degenerated to zero".into()));
        }
    }
    if q[0].is_zero() {
        return Err(Error::Interpolation(
            "the function has a pole of order two or more here; \
             no simple residue exists"
                .into(),
        ));
    }
    div_nz(p[0].clone(), q[0].clone(), "fit value at zero")
}

/// Residue of `Z_{a,b}` at a pole of its last `s`-variable, extracted
/// numerically-exactly from samples of `Z` alone: `δ·Z(s_b = pole + δ)`
/// is fitted as a rational function of `δ` and evaluated at `δ = 0`.
/// This is deliberately independent of the closed-form residue
/// expressions, so it can arbitrate them.
pub fn highest_coeff_residue<F: Field>(
    kernel: &RateKernel<F>,
    args: &HighestCoeffArgs<F>,
    which: ResiduePole,
) -> Result<F> {
    let b = args.b();
    if b == 0 {
        return Err(Error::Cardinality(
            "the residue lives in the last s-variable; there is none".into(),
        ));
    }
    let pole = match which {
        ResiduePole::AtY => args.y[b - 1].clone(),
        ResiduePole::AtT => {
            let a = args.a();
            if a == 0 {
                return Err(Error::Cardinality(
                    "no t-variable to collide with".into(),
                ));
            }
            args.t[args.a() - 1].clone()
        }
    };
    let deg = args.a() + args.b() + 4;
    let wanted = 2 * (deg + 1) + 2;
    let holdout_wanted = 2;
    let mut samples: Vec<(F, F)> = Vec::new();
    let mut holdout: Vec<(F, F)> = Vec::new();
    let mut k: i64 = 0;
    while samples.len() < wanted || holdout.len() < holdout_wanted {
        k += 1;
        if k > (wanted + holdout_wanted) as i64 + 40 {
            return Err(Error::Interpolation(
                "could not collect enough pole-free samples".into(),
            ));
        }
        let delta = F::from_ratio(k, 23);
        let mut shifted = args.clone();
        shifted.s.0[b - 1] = pole.clone() + delta.clone();
        let value = match highest_coefficient(kernel, &shifted, ZStrategy::SumW) {
            Ok(v) => v,
            Err(Error::Pole(_)) => continue, // node fell on another singular manifold
            Err(e) => return Err(e),
        };
        let gamma = delta.clone() * value;
        if samples.len() < wanted {
            samples.push((delta, gamma));
        } else {
            holdout.push((delta, gamma));
        }
    }
    rational_value_at_zero(&samples, &holdout, deg)
}

/// General bilinear scalar product of two off-shell states with labels
/// `(ū^C; v̄^C)` and `(ū^B; v̄^B)`, as a sum over simultaneous partitions
/// of all four families with matched cardinalities, each term carrying a
/// product of two highest coefficients:
///
/// ```text
///   S = [f(v̄^C,ū^C) f(v̄^B,ū^B)]⁻¹
///     · Σ  r₁(ū^B_I) r₁(ū^C_II) r₃(v̄^B_I) r₃(v̄^C_II)
///        · f(ū^C_I,ū^C_II) f(ū^B_II,ū^B_I) f(v̄^C_II,v̄^C_I) f(v̄^B_I,v̄^B_II)
///        · f(v̄^C_I,ū^C_I) f(v̄^B_II,ū^B_II)
///        · Z_{a−k,n}(ū^C_II; ū^B_II | v̄^C_I; v̄^B_I)
///        · Z_{k,b−n}(ū^B_I; ū^C_I | v̄^B_II; v̄^C_II) ,
/// ```
///
/// with `|ū^B_I| = |ū^C_I| = k` and `|v̄^B_I| = |v̄^C_I| = n`.
///
/// The leading inverse factor is a normalization bridge: the partition
/// sum itself is the classical form of the formula, stated for Bethe
/// vectors carrying an extra `f(v̄,ū)` relative to the construction used
/// by [`crate::bethe::bethe_vector`].  With the bridge applied, this
/// function is exactly the bilinear pairing of
/// [`crate::bethe::dual_bethe_vector`]`(C)` with
/// [`crate::bethe::bethe_vector`]`(B)` — pinned by exact tests against
/// the dense chain for all sector sizes up to `(2,2)`.
pub fn reshetikhin_scalar_product<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    c_label: &BetheLabel<F>,
    b_label: &BetheLabel<F>,
) -> Result<F> {
    if c_label.a() != b_label.a() || c_label.b() != b_label.b() {
        return Err(Error::Cardinality(format!(
            "scalar products pair equal-type labels; got ({}, {}) against ({}, {})",
            c_label.a(),
            c_label.b(),
            b_label.a(),
            b_label.b()
        )));
    }
    let a = c_label.a();
    let b = c_label.b();
    let mut total = F::zero();
    for k in 0..=a {
        for ub_pick in k_subsets(a, k) {
            let ub = split_at_indices(&b_label.u, &ub_pick);
            for uc_pick in k_subsets(a, k) {
                let uc = split_at_indices(&c_label.u, &uc_pick);
                let mut u_part = kernel.f_set(&uc.first, &uc.second)?
                    * kernel.f_set(&ub.second, &ub.first)?;
                for p in ub.first.iter() {
                    u_part = u_part * weights.r1(p)?;
                }
                for p in uc.second.iter() {
                    u_part = u_part * weights.r1(p)?;
                }
                for n in 0..=b {
                    for vb_pick in k_subsets(b, n) {
                        let vb = split_at_indices(&b_label.v, &vb_pick);
                        for vc_pick in k_subsets(b, n) {
                            let vc = split_at_indices(&c_label.v, &vc_pick);
                            let mut term = u_part.clone()
                                * kernel.f_set(&vc.second, &vc.first)?
                                * kernel.f_set(&vb.first, &vb.second)?
                                * kernel.f_set(&vc.first, &uc.first)?
                                * kernel.f_set(&vb.second, &ub.second)?;
                            for p in vb.first.iter() {
                                term = term * weights.r3(p)?;
                            }
                            for p in vc.second.iter() {
                                term = term * weights.r3(p)?;
                            }
                            let z_left = highest_coefficient(
                                kernel,
                                &HighestCoeffArgs::new(
                                    uc.second.clone(),
                                    ub.second.clone(),
                                    vc.first.clone(),
                                    vb.first.clone(),
                                )?,
                                ZStrategy::SumW,
                            )?;
                            let z_right = highest_coefficient(
                                kernel,
                                &HighestCoeffArgs::new(
                                    ub.first.clone(),
                                    uc.first.clone(),
                                    vb.second.clone(),
                                    vc.second.clone(),
                                )?,
                                ZStrategy::SumW,
                            )?;
                            total = total + term * z_left * z_right;
                        }
                    }
                }
            }
        }
    }
    let bridge = kernel.f_set(&c_label.v, &c_label.u)? * kernel.f_set(&b_label.v, &b_label.u)?;
    div_nz(total, bridge, "normalization bridge")
}

/// Single-determinant form of the scalar product of an on-shell state
/// `(ū^B; v̄^B)` with a dual state `(ū^C; v̄^C)` that is on shell for the
/// transfer matrix twisted by `diag(1, κ, 1)`:
///
/// ```text
///   S = t(v̄^C,ū^B) · Δ'_a(ū^C) Δ_a(ū^B) Δ'_b(v̄^C) Δ_b(v̄^B) · det N ,
/// ```
///
/// with `N` the (a+b)×(a+b) block matrix spelled out below.  The
/// classical form of this prefactor carries an additional
/// `f(v̄^C,ū^C) f(v̄^B,ū^B)`; that factor belongs to the same alternative
/// vector normalization discussed at [`reshetikhin_scalar_product`] and
/// is dropped here, so that this function agrees with the bilinear sum
/// (and hence with the dense chain pairing) in the conventions of
/// [`crate::bethe::bethe_vector`].
///
/// Both labels are verified against their Bethe equations first
/// (`NotOnShell` otherwise); the representation breaks down when a `v̄^C`
/// point meets a `ū^B` point at distance `0` or `−c`, which is reported
/// as `NotApplicable`.
pub fn twisted_scalar_product_det<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    kappa: &F,
    c_label: &BetheLabel<F>,
    b_label: &BetheLabel<F>,
) -> Result<F> {
    if c_label.a() != b_label.a() || c_label.b() != b_label.b() {
        return Err(Error::Cardinality(format!(
            "scalar products pair equal-type labels; got ({}, {}) against ({}, {})",
            c_label.a(),
            c_label.b(),
            b_label.a(),
            b_label.b()
        )));
    }
    let a = c_label.a();
    let b = c_label.b();
    let c = kernel.c().clone();

    for vc in c_label.v.iter() {
        for ub in b_label.u.iter() {
            let gap = vc.clone() - ub.clone();
            if gap.is_zero() || gap + c.clone() == F::zero() {
                return Err(Error::NotApplicable(format!(
                    "v-point {vc} of the dual label collides with u-point {ub}; \
                     the determinant representation degenerates here"
                )));
            }
        }
    }

    let on_shell_tol = 1e-10;
    let check = |label: &BetheLabel<F>, twist: &TwistVector<F>, who: &str| -> Result<()> {
        for r in bae_product_residuals(kernel, weights, label, twist)? {
            let bad = if F::EXACT { !r.is_zero() } else { r.mag() > on_shell_tol };
            if bad {
                return Err(Error::NotOnShell(format!(
                    "{who} label violates its equations (residual {r})"
                )));
            }
        }
        Ok(())
    };
    check(b_label, &TwistVector::identity(), "the right")?;
    check(c_label, &TwistVector::scalar(kappa.clone())?, "the dual")?;

    if a + b == 0 {
        return Ok(F::one());
    }

    let uc = &c_label.u;
    let vc = &c_label.v;
    let ub = &b_label.u;
    let vb = &b_label.v;
    let one = std::slice::from_ref;

    let mut n: Mat<F> = Mat::zeros(a + b, a + b);
    for j in 0..a {
        for k in 0..a {
            // N^(u)(u^C_j, u^B_k)
            let hk = kernel.h_set(&vc[..], one(&ub[k]))? * kernel.h_set(one(&ub[k]), &uc[..])?;
            let direct = kappa.clone() * kernel.t(&ub[k], &uc[j])?;
            let ratio_f = div_nz(
                kernel.f_set(&vb[..], one(&ub[k]))?,
                kernel.f_set(&vc[..], one(&ub[k]))?,
                "f-ratio",
            )?;
            let ratio_h = div_nz(
                kernel.h_set(&uc[..], one(&ub[k]))? * kernel.h_set(one(&ub[k]), &ub[..])?,
                kernel.h_set(one(&ub[k]), &uc[..])? * kernel.h_set(&ub[..], one(&ub[k]))?,
                "h-ratio",
            )?;
            let reflected = kernel.t(&uc[j], &ub[k])? * ratio_f * ratio_h;
            *n.at_mut(j, k) = hk * (direct + reflected);
        }
        for k in 0..b {
            // N^(u)(u^C_j, v^C_k)
            *n.at_mut(j, a + k) = kappa.clone()
                * kernel.t(&vc[k], &uc[j])?
                * kernel.h_set(one(&vc[k]), &uc[..])?
                * kernel.h_set(&vc[..], one(&vc[k]))?;
        }
    }
    for j in 0..b {
        for k in 0..a {
            // N^(v)(v^B_j, u^B_k)
            *n.at_mut(a + j, k) = kernel.t(&vb[j], &ub[k])?
                * kernel.h_set(&vb[..], one(&ub[k]))?
                * kernel.h_set(one(&ub[k]), &ub[..])?;
        }
        for k in 0..b {
            // N^(v)(v^B_j, v^C_k)
            let hk = kernel.h_set(one(&vc[k]), &ub[..])? * kernel.h_set(&vb[..], one(&vc[k]))?;
            let direct = kernel.t(&vb[j], &vc[k])?;
            let ratio_f = div_nz(
                kernel.f_set(one(&vc[k]), &uc[..])?,
                kernel.f_set(one(&vc[k]), &ub[..])?,
                "f-ratio",
            )?;
            let ratio_h = div_nz(
                kernel.h_set(&vc[..], one(&vc[k]))? * kernel.h_set(one(&vc[k]), &vb[..])?,
                kernel.h_set(one(&vc[k]), &vc[..])? * kernel.h_set(&vb[..], one(&vc[k]))?,
                "h-ratio",
            )?;
            let reflected = kappa.clone() * kernel.t(&vc[k], &vb[j])? * ratio_f * ratio_h;
            *n.at_mut(a + j, a + k) = hk * (direct + reflected);
        }
    }

    let prefactor = kernel.t_set(&vc[..], &ub[..])?
        * kernel.delta_prime(&uc[..])?
        * kernel.delta(&ub[..])?
        * kernel.delta_prime(&vc[..])?
        * kernel.delta(&vb[..])?;
    Ok(prefactor * n.determinant())
}

#[cfg(test)]
mod tests {
    use num::{One, Zero};

    use super::*;
    use crate::bethe::{bethe_vector, dual_bethe_vector, BetheVariant};
    use crate::field::Rat;
    use crate::linalg::vec_dot;
    use crate::oracle::{ChainModel, TabulatedWeights};
    use crate::params::DrawPool;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(n.into(), d.into())
    }

    fn unit_kernel() -> RateKernel<Rat> {
        RateKernel::new(Rat::one()).unwrap()
    }

    fn draw_args(pool: &mut DrawPool, a: usize, b: usize) -> HighestCoeffArgs<Rat> {
        HighestCoeffArgs::new(
            pool.draw_set(a),
            pool.draw_set(a),
            pool.draw_set(b),
            pool.draw_set(b),
        )
        .unwrap()
    }

    #[test]
    fn boundary_values_reduce_to_single_kernels() {
        let kernel = unit_kernel();
        let mut pool = DrawPool::for_check("z boundary", 1);
        for strategy in ZStrategy::ALL {
            let args = draw_args(&mut pool, 2, 0);
            let z = highest_coefficient(&kernel, &args, strategy).unwrap();
            let expect = ik_determinant(&kernel, &args.x, &args.t).unwrap();
            assert_eq!(z, expect, "a-boundary via {}", strategy.name());

            let args = draw_args(&mut pool, 0, 2);
            let z = highest_coefficient(&kernel, &args, strategy).unwrap();
            let expect = ik_determinant(&kernel, &args.y, &args.s).unwrap();
            assert_eq!(z, expect, "b-boundary via {}", strategy.name());
        }
    }

    #[test]
    fn smallest_mixed_coefficient_has_its_known_value() {
        // Z_{1,1} at t=0, x=5, s=2, y=7 with c=1.
        let kernel = unit_kernel();
        let args = HighestCoeffArgs::new(
            ParamSet::new(vec![rat(0, 1)]),
            ParamSet::new(vec![rat(5, 1)]),
            ParamSet::new(vec![rat(2, 1)]),
            ParamSet::new(vec![rat(7, 1)]),
        )
        .unwrap();
        for strategy in ZStrategy::ALL {
            let z = highest_coefficient(&kernel, &args, strategy).unwrap();
            assert_eq!(z, rat(11, 100), "via {}", strategy.name());
        }
    }

    #[test]
    fn all_strategies_agree_on_random_points() {
        let kernel = unit_kernel();
        for (a, b) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
            for round in 0..10 {
                // fresh pool per round: long-lived pools slow down as the
                // no-coincidence window fills up
                let mut pool = DrawPool::for_check("z agreement", (100 * a + 10 * b + round) as u64);
                let args = draw_args(&mut pool, a, b);
                let reference = highest_coefficient(&kernel, &args, ZStrategy::SumW).unwrap();
                for strategy in [ZStrategy::SumEta, ZStrategy::Contour] {
                    let z = highest_coefficient(&kernel, &args, strategy).unwrap();
                    assert_eq!(
                        z,
                        reference,
                        "({a},{b}) round {round} via {}",
                        strategy.name()
                    );
                }
            }
        }
    }

    #[test]
    fn coefficient_is_symmetric_within_each_family() {
        let kernel = unit_kernel();
        let mut pool = DrawPool::for_check("z symmetry", 3);
        let args = draw_args(&mut pool, 2, 2);
        let reference = highest_coefficient(&kernel, &args, ZStrategy::SumW).unwrap();
        let flip = |set: &ParamSet<Rat>| {
            let mut v = set.0.clone();
            v.reverse();
            ParamSet::new(v)
        };
        for mask in 1..16u32 {
            let permuted = HighestCoeffArgs::new(
                if mask & 1 != 0 { flip(&args.t) } else { args.t.clone() },
                if mask & 2 != 0 { flip(&args.x) } else { args.x.clone() },
                if mask & 4 != 0 { flip(&args.s) } else { args.s.clone() },
                if mask & 8 != 0 { flip(&args.y) } else { args.y.clone() },
            )
            .unwrap();
            let z = highest_coefficient(&kernel, &permuted, ZStrategy::SumW).unwrap();
            assert_eq!(z, reference, "mask {mask}");
        }
    }

    #[test]
    fn residue_at_matching_point_factorizes() {
        let kernel = unit_kernel();
        let c = kernel.c().clone();
        let mut pool = DrawPool::for_check("z residue y", 4);
        for (a, b) in [(1, 1), (2, 1), (1, 2)] {
            let args = draw_args(&mut pool, a, b);
            let lhs = highest_coeff_residue(&kernel, &args, ResiduePole::AtY).unwrap();

            let yb = args.y[b - 1].clone();
            let s_rest = args.s.without(b - 1);
            let y_rest = args.y.without(b - 1);
            let reduced = HighestCoeffArgs::new(
                args.t.clone(),
                args.x.clone(),
                s_rest.clone(),
                y_rest.clone(),
            )
            .unwrap();
            let rhs = -c.clone()
                * kernel.f_set(std::slice::from_ref(&yb), &s_rest).unwrap()
                * kernel.f_set(&y_rest, std::slice::from_ref(&yb)).unwrap()
                * kernel.f_set(std::slice::from_ref(&yb), &args.x).unwrap()
                * highest_coefficient(&kernel, &reduced, ZStrategy::SumW).unwrap();
            assert_eq!(lhs, rhs, "({a},{b})");
        }
    }

    #[test]
    fn residue_at_crossing_point_telescopes() {
        let kernel = unit_kernel();
        let c = kernel.c().clone();
        let mut pool = DrawPool::for_check("z residue t", 5);
        for (a, b) in [(1, 1), (2, 1), (1, 2)] {
            let args = draw_args(&mut pool, a, b);
            let lhs = highest_coeff_residue(&kernel, &args, ResiduePole::AtT).unwrap();

            let ta = args.t[a - 1].clone();
            let t_rest = args.t.without(a - 1);
            let s_rest = args.s.without(b - 1);
            let mut rhs = Rat::zero();
            for p in 0..a {
                let xp = args.x[p].clone();
                let x_rest = args.x.without(p);
                let reduced = HighestCoeffArgs::new(
                    t_rest.clone(),
                    x_rest.clone(),
                    s_rest.union(&ParamSet::new(vec![xp.clone()])),
                    args.y.clone(),
                )
                .unwrap();
                rhs = rhs
                    + kernel.g(&xp, &ta).unwrap()
                        * kernel.f_set(&x_rest, std::slice::from_ref(&xp)).unwrap()
                        * highest_coefficient(&kernel, &reduced, ZStrategy::SumW).unwrap();
            }
            rhs = rhs
                * c.clone()
                * kernel.f_set(&s_rest, std::slice::from_ref(&ta)).unwrap()
                * kernel.f_set(std::slice::from_ref(&ta), &t_rest).unwrap();
            assert_eq!(lhs, rhs, "({a},{b})");
        }
    }

    #[test]
    fn degenerate_inputs_cannot_be_sampled() {
        // Put an x-point on top of a t-point: every probe of the
        // coefficient hits the singular rate g(x, t) no matter where the
        // shifted variable sits, so the sampler runs out of usable nodes
        // and says so instead of inventing a residue.
        let kernel = unit_kernel();
        let mut pool = DrawPool::for_check("z residue degenerate", 6);
        let mut args = draw_args(&mut pool, 1, 1);
        args.x.0[0] = args.t[0].clone();
        let err = highest_coeff_residue(&kernel, &args, ResiduePole::AtY).unwrap_err();
        assert!(matches!(err, Error::Interpolation(_)), "got {err:?}");
    }

    #[test]
    fn fit_rejects_a_genuine_pole_at_zero() {
        // Feed the extractor samples of (1 + d)/d directly: the limit at
        // d = 0 does not exist, and the fitted denominator vanishes there.
        let sample = |k: i64| {
            let d = rat(k, 23);
            let v = (Rat::one() + d.clone()) / d.clone();
            (d, v)
        };
        let samples: Vec<(Rat, Rat)> = (1..=12).map(sample).collect();
        let holdout: Vec<(Rat, Rat)> = vec![sample(14), sample(15)];
        let err = rational_value_at_zero(&samples, &holdout, 3).unwrap_err();
        assert!(matches!(err, Error::Interpolation(_)), "got {err:?}");
    }

    #[test]
    fn bilinear_sum_matches_the_dense_pairing() {
        let mut pool = DrawPool::for_check("resh oracle", 7);
        let kernel = unit_kernel();
        let model = ChainModel::new(kernel, pool.draw_set(3)).unwrap();
        for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (2, 1), (1, 2)] {
            let c_label = BetheLabel::new(pool.draw_set(a), pool.draw_set(b));
            let b_label = BetheLabel::new(pool.draw_set(a), pool.draw_set(b));
            let formula =
                reshetikhin_scalar_product(model.kernel(), &model, &c_label, &b_label).unwrap();
            let bra = dual_bethe_vector(&model, &c_label).unwrap();
            let ket = bethe_vector(&model, &b_label, BetheVariant::Explicit1).unwrap();
            let pairing = vec_dot(&bra.coords, &ket.coords);
            assert_eq!(formula, pairing, "({a},{b})");
        }
    }

    #[test]
    fn bilinear_sum_rejects_mismatched_labels() {
        let kernel = unit_kernel();
        let mut pool = DrawPool::for_check("resh mismatch", 8);
        let model = ChainModel::new(kernel, pool.draw_set(2)).unwrap();
        let c_label = BetheLabel::new(pool.draw_set::<Rat>(1), ParamSet::empty());
        let b_label = BetheLabel::new(pool.draw_set::<Rat>(2), ParamSet::empty());
        let err = reshetikhin_scalar_product(model.kernel(), &model, &c_label, &b_label)
            .unwrap_err();
        assert!(matches!(err, Error::Cardinality(_)));
    }

    /// Weights fixed by hand so chosen points are exactly on shell:
    /// the right label for the plain equations, the dual label for the
    /// κ-twisted ones.
    fn pinned_weights(
        kernel: &RateKernel<Rat>,
        kappa: &Rat,
        c_label: &BetheLabel<Rat>,
        b_label: &BetheLabel<Rat>,
    ) -> TabulatedWeights<Rat> {
        let mut w = TabulatedWeights::new();
        for j in 0..b_label.a() {
            let uj = std::slice::from_ref(&b_label.u[j]);
            let rest = b_label.u.without(j);
            let value = kernel.f_set(uj, &rest).unwrap()
                / kernel.f_set(&rest, uj).unwrap()
                * kernel.f_set(&b_label.v, uj).unwrap();
            w.set_r1(b_label.u[j].clone(), value);
        }
        for j in 0..b_label.b() {
            let vj = std::slice::from_ref(&b_label.v[j]);
            let rest = b_label.v.without(j);
            let value = kernel.f_set(&rest, vj).unwrap()
                / kernel.f_set(vj, &rest).unwrap()
                * kernel.f_set(vj, &b_label.u).unwrap();
            w.set_r3(b_label.v[j].clone(), value);
        }
        for j in 0..c_label.a() {
            let uj = std::slice::from_ref(&c_label.u[j]);
            let rest = c_label.u.without(j);
            let value = kappa.clone()
                * kernel.f_set(uj, &rest).unwrap()
                / kernel.f_set(&rest, uj).unwrap()
                * kernel.f_set(&c_label.v, uj).unwrap();
            w.set_r1(c_label.u[j].clone(), value);
        }
        for j in 0..c_label.b() {
            let vj = std::slice::from_ref(&c_label.v[j]);
            let rest = c_label.v.without(j);
            let value = kappa.clone()
                * kernel.f_set(&rest, vj).unwrap()
                / kernel.f_set(vj, &rest).unwrap()
                * kernel.f_set(vj, &c_label.u).unwrap();
            w.set_r3(c_label.v[j].clone(), value);
        }
        w
    }

    #[test]
    fn determinant_form_matches_the_bilinear_sum_on_shell() {
        let kernel = unit_kernel();
        let mut pool = DrawPool::for_check("twisted det", 9);
        let kappa = rat(3, 7);
        for (a, b) in [(1, 0), (0, 1), (1, 1)] {
            let c_label = BetheLabel::<Rat>::new(pool.draw_set(a), pool.draw_set(b));
            let b_label = BetheLabel::<Rat>::new(pool.draw_set(a), pool.draw_set(b));
            let weights = pinned_weights(&kernel, &kappa, &c_label, &b_label);
            let det =
                twisted_scalar_product_det(&kernel, &weights, &kappa, &c_label, &b_label)
                    .unwrap();
            let sum = reshetikhin_scalar_product(&kernel, &weights, &c_label, &b_label).unwrap();
            assert_eq!(det, sum, "({a},{b})");
        }
    }

    #[test]
    fn one_root_determinant_has_its_closed_form() {
        // For a single u-root pair the matrix is 1×1 and everything
        // collapses to g(u^C, u^B)(1 − κ) once the equations pin
        // r₁(u^B) = 1 and r₁(u^C) = κ.
        let kernel = unit_kernel();
        let kappa = rat(5, 2);
        let c_label = BetheLabel::new(ParamSet::new(vec![rat(3, 2)]), ParamSet::empty());
        let b_label = BetheLabel::new(ParamSet::new(vec![rat(-1, 3)]), ParamSet::empty());
        let weights = pinned_weights(&kernel, &kappa, &c_label, &b_label);
        let det = twisted_scalar_product_det(&kernel, &weights, &kappa, &c_label, &b_label)
            .unwrap();
        let expect =
            kernel.g(&c_label.u[0], &b_label.u[0]).unwrap() * (Rat::one() - kappa.clone());
        assert_eq!(det, expect);
    }

    #[test]
    fn empty_labels_pair_to_one() {
        let kernel = unit_kernel();
        let weights = TabulatedWeights::<Rat>::new();
        let empty = BetheLabel::new(ParamSet::<Rat>::empty(), ParamSet::empty());
        let det =
            twisted_scalar_product_det(&kernel, &weights, &rat(2, 1), &empty, &empty).unwrap();
        assert_eq!(det, Rat::one());
    }

    #[test]
    fn determinant_form_guards_its_preconditions() {
        let kernel = unit_kernel();
        let mut pool = DrawPool::for_check("twisted det guards", 10);
        let kappa = rat(3, 7);

        // Off-shell labels are refused.
        let c_label = BetheLabel::<Rat>::new(pool.draw_set(1), ParamSet::empty());
        let b_label = BetheLabel::<Rat>::new(pool.draw_set(1), ParamSet::empty());
        let model = ChainModel::new(unit_kernel(), pool.draw_set(2)).unwrap();
        let err = twisted_scalar_product_det(&kernel, &model, &kappa, &c_label, &b_label)
            .unwrap_err();
        assert!(matches!(err, Error::NotOnShell(_)), "got {err:?}");

        // A v^C point sitting on a u^B point is a structural degeneracy,
        // reported before any equation check.
        let shared = rat(4, 5);
        let c_label = BetheLabel::new(
            ParamSet::new(vec![rat(1, 5)]),
            ParamSet::new(vec![shared.clone()]),
        );
        let b_label = BetheLabel::new(
            ParamSet::new(vec![shared]),
            ParamSet::new(vec![rat(-2, 5)]),
        );
        let err = twisted_scalar_product_det(&kernel, &model, &kappa, &c_label, &b_label)
            .unwrap_err();
        assert!(matches!(err, Error::NotApplicable(_)), "got {err:?}");

        // Mismatched cardinalities never reach evaluation.
        let c_label = BetheLabel::<Rat>::new(pool.draw_set(1), ParamSet::empty());
        let b_label = BetheLabel::<Rat>::new(pool.draw_set(2), ParamSet::empty());
        let err = twisted_scalar_product_det(&kernel, &model, &kappa, &c_label, &b_label)
            .unwrap_err();
        assert!(matches!(err, Error::Cardinality(_)));
    }
}
