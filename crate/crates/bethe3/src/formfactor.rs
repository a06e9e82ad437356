//! Matrix elements of the diagonal monodromy entries between on-shell
//! states.
//!
//! For two on-shell states `C = (ū^C; v̄^C)` and `B = (ū^B; v̄^B)` the
//! quantity of interest is `⟨C| T_ss(z) |B⟩`, `s ∈ {1, 2, 3}`.  Everything
//! here descends from one observation: the twisted pairing
//! `Q(z) = (τ_κ̄(z|C_κ̄) − τ(z|B)) · ⟨C_κ̄, B⟩`, with `C_κ̄` the on-shell
//! dual state continued to the twist `κ̄`, has
//! `∂Q/∂κ_s |_{κ̄=1} = ⟨C| T_ss(z) |B⟩`.  Carrying the derivative through
//! the determinant form of the scalar product yields two closed forms:
//!
//! * [`form_factor_same_state`] — `C` and `B` share one label; the answer
//!   is a prefactor times the determinant of the bordered root-sensitivity
//!   matrix [`theta_matrix`].
//! * [`form_factor_distinct_states`] — different labels; the answer is a
//!   prefactor times `det 𝒩^(s,p)`, an (a+b)×(a+b) matrix of eigenvalue
//!   derivatives with one special row `p` (any row with a nonzero
//!   normalizer [`omega_values`] works; the determinant does not depend
//!   on the choice).
//!
//! [`form_factor_by_twist_derivative`] evaluates `∂Q/∂κ_s` directly — a
//! central difference over twist-continued root paths and dense chain
//! pairings — and serves as an independent cross-check of both
//! determinants.
//!
//! All results are in the normalization of [`crate::bethe::bethe_vector`]
//! and [`crate::bethe::dual_bethe_vector`], i.e. they equal the dense
//! pairing `⟨dual, T_ss(z)·ket⟩` on the chain.  The classical closed
//! forms are stated for vectors carrying an extra `f(v̄, ū)` each; that
//! bridge factor is divided out here, exactly as in
//! [`crate::scalar::reshetikhin_scalar_product`].

use crate::bethe::{bethe_vector, dual_bethe_vector, BetheLabel, BetheVariant};
use crate::error::{Error, Result};
use crate::field::{div_nz, Field, RateKernel, C64};
use crate::linalg::{vec_dot, Mat};
use crate::onshell::{
    bae_product_residuals, continue_twist, phi_jacobian, transfer_eigenvalue,
    transfer_eigenvalue_dkappa, transfer_eigenvalue_du, transfer_eigenvalue_dv, xrate,
    BaeSolution, SolveOptions, TwistVector,
};
use crate::oracle::{ChainModel, Weights};
use crate::scalar::parity_sign;

fn check_component(s: usize) -> Result<()> {
    if (1..=3).contains(&s) {
        Ok(())
    } else {
        Err(Error::Model(format!(
            "diagonal component index {s} out of range 1..=3"
        )))
    }
}

fn kron<F: Field>(s: usize, t: usize) -> F {
    if s == t {
        F::one()
    } else {
        F::zero()
    }
}

fn require_on_shell<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    label: &BetheLabel<F>,
    who: &str,
) -> Result<()> {
    let tol = 1e-10;
    for r in bae_product_residuals(kernel, weights, label, &TwistVector::identity())? {
        let bad = if F::EXACT { !r.is_zero() } else { r.mag() > tol };
        if bad {
            return Err(Error::NotOnShell(format!(
                "{who} label violates its equations (residual {r})"
            )));
        }
    }
    Ok(())
}

/// The bordered root-sensitivity matrix `Θ^(s)(z)` of an on-shell label,
/// of size `(a+b+1) × (a+b+1)`:
///
/// * the upper-left `(a+b)²` block is the Jacobian of the logarithmic
///   Bethe equations ([`phi_jacobian`]),
/// * the last row holds `∂τ(z|ū,v̄)/∂u_k` and `∂τ/∂v_k`,
/// * the last column holds `δ_{s1} − δ_{s2}` in the `u` rows and
///   `δ_{s3} − δ_{s2}` in the `v` rows — the rate at which the
///   logarithmic right-hand sides move with the twist component `κ_s`,
/// * the corner is `∂τ_κ̄(z)/∂κ_s` at the identity twist.
///
/// Its determinant divided by the determinant of the core block is the
/// total derivative of the eigenvalue along the on-shell manifold: the
/// explicit `κ_s` dependence of `τ` plus the drift of the roots.  Only
/// the last column depends on `s`.
pub fn theta_matrix<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    label: &BetheLabel<F>,
    s: usize,
    z: &F,
) -> Result<Mat<F>> {
    check_component(s)?;
    let a = label.a();
    let b = label.b();
    let n = a + b;
    let core = phi_jacobian(kernel, weights, label)?;
    let twist = TwistVector::identity();

    let mut m: Mat<F> = Mat::zeros(n + 1, n + 1);
    for j in 0..n {
        for k in 0..n {
            *m.at_mut(j, k) = core.at(j, k).clone();
        }
    }
    for k in 0..a {
        *m.at_mut(n, k) = transfer_eigenvalue_du(kernel, weights, z, label, &twist, k)?;
    }
    for k in 0..b {
        *m.at_mut(n, a + k) = transfer_eigenvalue_dv(kernel, weights, z, label, &twist, k)?;
    }
    let col_u = kron::<F>(s, 1) - kron::<F>(s, 2);
    let col_v = kron::<F>(s, 3) - kron::<F>(s, 2);
    for j in 0..a {
        *m.at_mut(j, n) = col_u.clone();
    }
    for j in 0..b {
        *m.at_mut(a + j, n) = col_v.clone();
    }
    *m.at_mut(n, n) = transfer_eigenvalue_dkappa(kernel, weights, z, label, s)?;
    Ok(m)
}

/// `⟨B| T_ss(z) |B⟩` for a single on-shell label, as a prefactor times
/// `det Θ^(s)(z)`:
///
/// ```text
///   (−1)^a c^{a+b} · ∏_j f(u_j, ū_j) ∏_k f(v_k, v̄_k) / f(v̄, ū)
///                  · det Θ^(s)(z) .
/// ```
///
/// The classical prefactor reads `f(v̄,ū) ∏∏` in the alternative vector
/// normalization; one bridge factor `f(v̄,ū)` per vector is divided out
/// so the result equals the dense pairing of the state with its own
/// dual.  (On a fundamental chain `f(v̄,ū) = r_3(v̄) = 1` on shell, so the
/// two conventions coincide there.)  Summed over `s` this recovers
/// `τ(z)·⟨B,B⟩`, since the three last columns of `Θ^(s)` add up to zero
/// except for the corner.
pub fn form_factor_same_state<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    label: &BetheLabel<F>,
    s: usize,
    z: &F,
) -> Result<F> {
    check_component(s)?;
    require_on_shell(kernel, weights, label, "the")?;
    let a = label.a();
    let b = label.b();

    let theta = theta_matrix(kernel, weights, label, s, z)?;
    let mut pre: F = parity_sign::<F>(a);
    for _ in 0..a + b {
        pre = pre * kernel.c().clone();
    }
    for j in 0..a {
        let uj = std::slice::from_ref(&label.u[j]);
        pre = pre * kernel.f_set(uj, &label.u.without(j))?;
    }
    for k in 0..b {
        let vk = std::slice::from_ref(&label.v[k]);
        pre = pre * kernel.f_set(vk, &label.v.without(k))?;
    }
    let fvu = kernel.f_set(&label.v, &label.u)?;
    let printed = pre * fvu.clone() * theta.determinant();
    div_nz(printed, fvu.clone() * fvu, "normalization bridge")
}

/// Row normalizers `Ω_1, …, Ω_{a+b}` of the distinct-state determinant:
///
/// ```text
///   Ω_k     = ∏_ℓ (u^C_k − u^B_ℓ) / ∏_{ℓ≠k} (u^C_k − u^C_ℓ) ,   k ≤ a,
///   Ω_{a+k} = ∏_m (v^B_k − v^C_m) / ∏_{m≠k} (v^B_k − v^B_m) .
/// ```
///
/// `Ω_k` vanishes exactly when the anchoring root collides with one of
/// the opposite label's roots; with elementwise-distinct labels every
/// normalizer is nonzero and any row may serve as the special row.
pub fn omega_values<F: Field>(c_label: &BetheLabel<F>, b_label: &BetheLabel<F>) -> Result<Vec<F>> {
    if c_label.a() != b_label.a() || c_label.b() != b_label.b() {
        return Err(Error::Cardinality(format!(
            "row normalizers pair equal-type labels; got ({}, {}) against ({}, {})",
            c_label.a(),
            c_label.b(),
            b_label.a(),
            b_label.b()
        )));
    }
    c_label.require_generic()?;
    b_label.require_generic()?;
    let a = c_label.a();
    let b = c_label.b();
    let mut out = Vec::with_capacity(a + b);
    for k in 0..a {
        let mut num = F::one();
        for l in 0..a {
            num = num * (c_label.u[k].clone() - b_label.u[l].clone());
        }
        let mut den = F::one();
        for l in 0..a {
            if l != k {
                den = den * (c_label.u[k].clone() - c_label.u[l].clone());
            }
        }
        out.push(div_nz(num, den, "row normalizer")?);
    }
    for k in 0..b {
        let mut num = F::one();
        for m in 0..b {
            num = num * (b_label.v[k].clone() - c_label.v[m].clone());
        }
        let mut den = F::one();
        for m in 0..b {
            if m != k {
                den = den * (b_label.v[k].clone() - b_label.v[m].clone());
            }
        }
        out.push(div_nz(num, den, "row normalizer")?);
    }
    Ok(out)
}

/// Pick the special row: the index of the largest-magnitude nonzero
/// normalizer.
fn pivot_from<F: Field>(omegas: &[F]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, om) in omegas.iter().enumerate() {
        if om.is_zero() {
            continue;
        }
        let mag = om.mag();
        if best.map_or(true, |(_, m)| mag > m) {
            best = Some((k, mag));
        }
    }
    best.map(|(k, _)| k).ok_or_else(|| {
        Error::OmegaAllZero(
            "every row normalizer vanishes; the two labels collide root by root".into(),
        )
    })
}

/// The matrix `𝒩^(s,p)` of the distinct-state form factor, `p` zero-based.
///
/// Columns are indexed by the evaluation points `w_k = u^B_k` (`k ≤ a`)
/// and `w_{a+k} = v^C_k`.  Ordinary rows are eigenvalue derivatives with
/// their `f`-poles at `w_k` cancelled analytically:
///
/// ```text
///   j ≤ a:  c · g⁻¹(w_k, ū^C) g⁻¹(v̄^C, w_k) · ∂τ(w_k|ū^C,v̄^C)/∂u^C_j
///   j > a:  −c · g⁻¹(v̄^B, w_k) g⁻¹(w_k, ū^B) · ∂τ(w_k|ū^B,v̄^B)/∂v^B_j
/// ```
///
/// (each `g⁻¹` zero eats the matching `f` pole, leaving products of `h`
/// rates).  Row `p` instead holds `h(v̄^C, w_k) h(w_k, ū^B) Y^(s)_k` with
///
/// ```text
///   Y^(s)_k     = c(δ_{s1}−δ_{s2}) + (δ_{s1}−δ_{s3}) u^B_k (1 − f(v̄^B,u^B_k)/f(v̄^C,u^B_k)),
///   Y^(s)_{a+k} = c(δ_{s3}−δ_{s2}) + (δ_{s1}−δ_{s3}) (v^C_k+c)(1 − f(v^C_k,ū^C)/f(v^C_k,ū^B)).
/// ```
fn nsp_matrix<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    c_label: &BetheLabel<F>,
    b_label: &BetheLabel<F>,
    s: usize,
    p: usize,
) -> Result<Mat<F>> {
    let a = c_label.a();
    let b = c_label.b();
    let n = a + b;
    let c = kernel.c().clone();
    let uc = &c_label.u;
    let vc = &c_label.v;
    let ub = &b_label.u;
    let vb = &b_label.v;
    let one = std::slice::from_ref;

    let w: Vec<F> = ub.iter().cloned().chain(vc.iter().cloned()).collect();
    // ∏ (p − w)/c and ∏ (w − p)/c over a point list.
    let prod_minus = |pts: &[F], w: &F| -> F {
        pts.iter()
            .fold(F::one(), |acc, p| acc * (p.clone() - w.clone()) / c.clone())
    };
    let prod_plus = |w: &F, pts: &[F]| -> F {
        pts.iter()
            .fold(F::one(), |acc, p| acc * (w.clone() - p.clone()) / c.clone())
    };

    let sign_u = kron::<F>(s, 1) - kron::<F>(s, 2);
    let sign_v = kron::<F>(s, 3) - kron::<F>(s, 2);
    let sign_shift = kron::<F>(s, 1) - kron::<F>(s, 3);

    let mut m: Mat<F> = Mat::zeros(n, n);
    for row in 0..n {
        for (k, wk) in w.iter().enumerate() {
            *m.at_mut(row, k) = if row == p {
                let hh = kernel.h_set(&vc[..], one(wk))? * kernel.h_set(one(wk), &ub[..])?;
                let y = if k < a {
                    let ratio = div_nz(
                        kernel.f_set(&vb[..], one(wk))?,
                        kernel.f_set(&vc[..], one(wk))?,
                        "f-ratio",
                    )?;
                    c.clone() * sign_u.clone()
                        + sign_shift.clone() * wk.clone() * (F::one() - ratio)
                } else {
                    let ratio = div_nz(
                        kernel.f_set(one(wk), &uc[..])?,
                        kernel.f_set(one(wk), &ub[..])?,
                        "f-ratio",
                    )?;
                    c.clone() * sign_v.clone()
                        + sign_shift.clone() * (wk.clone() + c.clone()) * (F::one() - ratio)
                };
                hh * y
            } else if row < a {
                // u-type row: the τ derivative is κ₂-term·X(w,u_j) −
                // κ₁-term·X(u_j,w); folding the g⁻¹ zeros into the f
                // products turns them into h products.
                let direct = kernel.h_set(one(wk), &uc[..])?
                    * kernel.h_set(&vc[..], one(wk))?
                    * xrate(kernel, wk, &uc[row])?;
                let weighted = parity_sign::<F>(a)
                    * kernel.h_set(&uc[..], one(wk))?
                    * prod_minus(&vc[..], wk)
                    * weights.r1(wk)?
                    * xrate(kernel, &uc[row], wk)?;
                c.clone() * (direct - weighted)
            } else {
                let j = row - a;
                let direct = kernel.h_set(one(wk), &ub[..])?
                    * kernel.h_set(&vb[..], one(wk))?
                    * xrate(kernel, &vb[j], wk)?;
                let weighted = parity_sign::<F>(b)
                    * kernel.h_set(one(wk), &vb[..])?
                    * prod_plus(wk, &ub[..])
                    * weights.r3(wk)?
                    * xrate(kernel, wk, &vb[j])?;
                c.clone() * (direct - weighted)
            };
        }
    }
    Ok(m)
}

/// `⟨C| T_ss(z) |B⟩` for two different on-shell labels of the same type
/// `(a, b)`:
///
/// ```text
///   (τ(z|ū^C,v̄^C) − τ(z|ū^B,v̄^B)) / Ω_p
///       · t(v̄^C,ū^B) Δ'_a(ū^C) Δ_a(ū^B) Δ'_b(v̄^C) Δ_b(v̄^B)
///       · det 𝒩^(s,p)   /   f(v̄^C,ū^C) f(v̄^B,ū^B) ,
/// ```
///
/// with the trailing division the same normalization bridge as in
/// [`crate::scalar::twisted_scalar_product_det`].  The special row `p`
/// is chosen automatically among the nonzero normalizers
/// ([`omega_values`]); the determinant is independent of that choice.
///
/// Summed over `s` the three form factors cancel: the transfer matrix
/// pairs distinct eigenstates to zero.
pub fn form_factor_distinct_states<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    c_label: &BetheLabel<F>,
    b_label: &BetheLabel<F>,
    s: usize,
    z: &F,
) -> Result<F> {
    let omegas = omega_values(c_label, b_label)?;
    require_distinct_roots(kernel, c_label, b_label)?;
    let p = pivot_from(&omegas)?;
    form_factor_distinct_states_at_pivot(kernel, weights, c_label, b_label, s, z, p)
}

/// The representation needs the two labels elementwise distinct, and the
/// dual `v` points clear of the right `u` points even after the shift
/// built into their pairing rate.
fn require_distinct_roots<F: Field>(
    kernel: &RateKernel<F>,
    c_label: &BetheLabel<F>,
    b_label: &BetheLabel<F>,
) -> Result<()> {
    for (mine, theirs, what) in [
        (&c_label.u, &b_label.u, "u"),
        (&c_label.v, &b_label.v, "v"),
    ] {
        for x in mine.iter() {
            if theirs.iter().any(|y| x == y) {
                return Err(Error::NotApplicable(format!(
                    "the labels share the {what}-point {x}; \
                     the representation needs elementwise-distinct roots"
                )));
            }
        }
    }
    for vcp in c_label.v.iter() {
        for ubp in b_label.u.iter() {
            let gap = vcp.clone() - ubp.clone();
            if gap.is_zero() || gap + kernel.c().clone() == F::zero() {
                return Err(Error::NotApplicable(format!(
                    "v-point {vcp} of the dual label collides with u-point {ubp}; \
                     the determinant representation degenerates here"
                )));
            }
        }
    }
    Ok(())
}

/// [`form_factor_distinct_states`] with the special row fixed to `p`
/// (zero-based) instead of chosen automatically.
///
/// The determinant of `𝒩^(s,p)` scales with the row normalizer `Ω_p`
/// (the rows it replaces obey a null relation weighted by the
/// normalizers — the same relation that makes distinct on-shell states
/// orthogonal), so the assembled value is the same for every `p` with
/// `Ω_p ≠ 0`.  Exposing the choice lets callers verify that directly; a
/// pivot whose normalizer vanishes is reported as a pole.
pub fn form_factor_distinct_states_at_pivot<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    c_label: &BetheLabel<F>,
    b_label: &BetheLabel<F>,
    s: usize,
    z: &F,
    p: usize,
) -> Result<F> {
    check_component(s)?;
    let omegas = omega_values(c_label, b_label)?; // also checks cardinality
    if p >= omegas.len() {
        return Err(Error::Dimension(format!(
            "special row {p} out of range for {} roots",
            omegas.len()
        )));
    }
    require_on_shell(kernel, weights, c_label, "the dual")?;
    require_on_shell(kernel, weights, b_label, "the right")?;
    require_distinct_roots(kernel, c_label, b_label)?;

    let nsp = nsp_matrix(kernel, weights, c_label, b_label, s, p)?;
    let twist = TwistVector::identity();
    let tau_c = transfer_eigenvalue(kernel, weights, z, c_label, &twist)?;
    let tau_b = transfer_eigenvalue(kernel, weights, z, b_label, &twist)?;
    let pre = div_nz(tau_c - tau_b, omegas[p].clone(), "row normalizer")?
        * kernel.t_set(&c_label.v, &b_label.u)?
        * kernel.delta_prime(&c_label.u)?
        * kernel.delta(&b_label.u)?
        * kernel.delta_prime(&c_label.v)?
        * kernel.delta(&b_label.v)?;
    let printed = pre * nsp.determinant();
    let bridge = kernel.f_set(&c_label.v, &c_label.u)? * kernel.f_set(&b_label.v, &b_label.u)?;
    div_nz(printed, bridge, "normalization bridge")
}

/// `⟨C| T_ss(z) |B⟩` evaluated with no determinant at all: a central
/// difference of `Q(κ_s) = (τ_κ̄(z|C_κ̄) − τ(z|B)) · ⟨C_κ̄, B⟩` across
/// `κ_s = 1 ± ε`, with the dual roots followed by twist continuation and
/// the pairing taken on the dense chain.  Both solutions must be given
/// at the identity twist; pass the same solution twice for the diagonal
/// (same-state) element.
///
/// This is the definition the determinant formulas are derived from, so
/// it cross-checks them independently; accuracy is limited by the
/// differencing step (error `O(ε²)`).
pub fn form_factor_by_twist_derivative(
    model: &ChainModel<C64>,
    c_from: &BaeSolution,
    b_sol: &BaeSolution,
    s: usize,
    z: &C64,
    eps: f64,
    steps: usize,
    opts: &SolveOptions,
) -> Result<C64> {
    check_component(s)?;
    if !c_from.twist.is_identity() || !b_sol.twist.is_identity() {
        return Err(Error::NotApplicable(
            "the derivative is taken at the identity twist; \
             both input solutions must be untwisted"
                .into(),
        ));
    }
    if eps <= 0.0 {
        return Err(Error::Config(format!(
            "differencing step must be positive, got {eps}"
        )));
    }
    let kernel = model.kernel();
    let ket = bethe_vector(model, &b_sol.label, BetheVariant::Explicit1)?;
    let tau_b = transfer_eigenvalue(kernel, model, z, &b_sol.label, &TwistVector::identity())?;

    let q_at = |delta: f64| -> Result<C64> {
        let unit = C64::new(1.0, 0.0);
        let mut comps = [unit, unit, unit];
        comps[s - 1] = C64::new(1.0 + delta, 0.0);
        let twist = TwistVector::new(comps[0], comps[1], comps[2])?;
        let cont = continue_twist(model, c_from, &twist, steps, opts)?;
        let tau_c = transfer_eigenvalue(kernel, model, z, &cont.label, &twist)?;
        let bra = dual_bethe_vector(model, &cont.label)?;
        Ok((tau_c - tau_b) * vec_dot(&bra.coords, &ket.coords))
    };
    let plus = q_at(eps)?;
    let minus = q_at(-eps)?;
    Ok((plus - minus) / C64::new(2.0 * eps, 0.0))
}
