//! Transfer-matrix eigenvalues, Bethe equations, and a Newton solver.
//!
//! A label `(ū; v̄)` is *on shell* when its points satisfy the Bethe
//! equations.  In product form, with the twist `(κ₁, κ₂, κ₃)`:
//!
//! ```text
//!   r₁(u_j) f(ū_j, u_j) / ( f(u_j, ū_j) f(v̄, u_j) )  =  κ₂/κ₁ ,
//!   r₃(v_j) f(v_j, v̄_j) / ( f(v̄_j, v_j) f(v_j, ū) )  =  κ₂/κ₃ ,
//! ```
//!
//! where `ū_j` is `ū` with `u_j` removed.  On shell, the corresponding
//! state is an eigenvector of the (twisted) transfer matrix with
//! eigenvalue
//!
//! ```text
//!   τ(x) = κ₁ r₁(x) f(ū, x)  +  κ₂ f(x, ū) f(v̄, x)  +  κ₃ r₃(x) f(x, v̄) .
//! ```
//!
//! The solver works in logarithmic form.  Each equation is replaced by
//!
//! ```text
//!   Φ_j     = log r₁(u_j) − Σ_{m≠j} [log f(u_j,u_m) − log f(u_m,u_j)] − Σ_k log f(v_k,u_j)
//!   Φ_{a+j} = log r₃(v_j) − Σ_{m≠j} [log f(v_m,v_j) − log f(v_j,v_m)] − Σ_k log f(v_j,u_k)
//! ```
//!
//! and the system `Φ_j = log κ₂ − log κ₁ + 2πi ℓ_j` (u-sector),
//! `Φ_{a+j} = log κ₂ − log κ₃ + 2πi m_j` (v-sector) is solved by Newton
//! iteration for a chosen vector of branch integers.  All logarithms are
//! principal and taken factor by factor, so the branch integers have a
//! definite meaning independent of how the products are grouped.
//!
//! Every solution returned by [`solve_bae`] is certified against the
//! brute-force chain: the state is built explicitly and checked to be an
//! eigenvector of the twisted transfer matrix at several sample points.

use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::bethe::{bethe_vector, BetheLabel, BetheVariant};
use crate::error::{Error, Result};
use crate::field::{div_nz, Field, RateKernel, C64};
use crate::linalg::{vec_mag, Mat};
use crate::oracle::{ChainModel, Weights};
use crate::params::{k_subsets, split_at_indices, DrawPool, ParamSet};

/// Diagonal twist of the transfer matrix: `t_κ̄(x) = Σ_i κ_i T_ii(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistVector<F: Field> {
    pub kappa1: F,
    pub kappa2: F,
    pub kappa3: F,
}

impl<F: Field> TwistVector<F> {
    pub fn new(kappa1: F, kappa2: F, kappa3: F) -> Result<Self> {
        if kappa1.is_zero() || kappa2.is_zero() || kappa3.is_zero() {
            return Err(Error::Model("twist components must be nonzero".into()));
        }
        Ok(TwistVector { kappa1, kappa2, kappa3 })
    }

    /// The untwisted transfer matrix: `κ̄ = (1, 1, 1)`.
    pub fn identity() -> Self {
        TwistVector { kappa1: F::one(), kappa2: F::one(), kappa3: F::one() }
    }

    /// The one-parameter twist `κ̄ = (1, κ, 1)` used by the determinant
    /// representation of the scalar product.
    pub fn scalar(kappa: F) -> Result<Self> {
        Self::new(F::one(), kappa, F::one())
    }

    pub fn is_identity(&self) -> bool {
        self.kappa1.is_one() && self.kappa2.is_one() && self.kappa3.is_one()
    }

    pub fn as_array(&self) -> [F; 3] {
        [self.kappa1.clone(), self.kappa2.clone(), self.kappa3.clone()]
    }

    #[cfg(test)]
    fn component(&self, s: usize) -> &F {
        match s {
            1 => &self.kappa1,
            2 => &self.kappa2,
            3 => &self.kappa3,
            _ => panic!("twist component index must be 1, 2, or 3"),
        }
    }
}

/// `X(x, y) = c / ((x−y)(x−y+c))`, the logarithmic derivative
/// `−∂_x log f(x, y) = +∂_y log f(x, y)`.
pub(crate) fn xrate<F: Field>(kernel: &RateKernel<F>, x: &F, y: &F) -> Result<F> {
    let t = kernel.t(x, y)?;
    div_nz(t, kernel.c().clone(), "rate normalization")
}

/// Eigenvalue of the twisted transfer matrix on the state labelled
/// `(ū; v̄)`, valid when the label is on shell (the expression itself is
/// defined off shell as well and is used as such by the solver).
pub fn transfer_eigenvalue<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    x: &F,
    label: &BetheLabel<F>,
    twist: &TwistVector<F>,
) -> Result<F> {
    let here = std::slice::from_ref(x);
    let term1 = twist.kappa1.clone() * weights.r1(x)? * kernel.f_set(&label.u, here)?;
    let term2 = twist.kappa2.clone() * kernel.f_set(here, &label.u)? * kernel.f_set(&label.v, here)?;
    let term3 = twist.kappa3.clone() * weights.r3(x)? * kernel.f_set(here, &label.v)?;
    Ok(term1 + term2 + term3)
}

/// Partial derivative of [`transfer_eigenvalue`] with respect to `u_j`
/// (`j` is zero-based).
pub fn transfer_eigenvalue_du<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    x: &F,
    label: &BetheLabel<F>,
    twist: &TwistVector<F>,
    j: usize,
) -> Result<F> {
    let here = std::slice::from_ref(x);
    let uj = &label.u[j];
    let term1 = twist.kappa1.clone() * weights.r1(x)? * kernel.f_set(&label.u, here)?;
    let term2 = twist.kappa2.clone() * kernel.f_set(here, &label.u)? * kernel.f_set(&label.v, here)?;
    Ok(term2 * xrate(kernel, x, uj)? - term1 * xrate(kernel, uj, x)?)
}

/// Partial derivative of [`transfer_eigenvalue`] with respect to `v_j`
/// (`j` is zero-based).
pub fn transfer_eigenvalue_dv<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    x: &F,
    label: &BetheLabel<F>,
    twist: &TwistVector<F>,
    j: usize,
) -> Result<F> {
    let here = std::slice::from_ref(x);
    let vj = &label.v[j];
    let term2 = twist.kappa2.clone() * kernel.f_set(here, &label.u)? * kernel.f_set(&label.v, here)?;
    let term3 = twist.kappa3.clone() * weights.r3(x)? * kernel.f_set(here, &label.v)?;
    Ok(term3 * xrate(kernel, x, vj)? - term2 * xrate(kernel, vj, x)?)
}

/// Partial derivative of [`transfer_eigenvalue`] with respect to the
/// twist component `κ_s` (`s ∈ {1, 2, 3}`): the bare `s`-th term of the
/// eigenvalue with its twist factor stripped.
pub fn transfer_eigenvalue_dkappa<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    x: &F,
    label: &BetheLabel<F>,
    s: usize,
) -> Result<F> {
    let here = std::slice::from_ref(x);
    match s {
        1 => Ok(weights.r1(x)? * kernel.f_set(&label.u, here)?),
        2 => Ok(kernel.f_set(here, &label.u)? * kernel.f_set(&label.v, here)?),
        3 => Ok(weights.r3(x)? * kernel.f_set(here, &label.v)?),
        _ => Err(Error::Model(format!("twist component {s} out of range 1..=3"))),
    }
}

/// Product-form residuals of the Bethe equations: one entry per root,
/// u-sector first.  Each entry vanishes exactly when the corresponding
/// equation holds.
pub fn bae_product_residuals<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    label: &BetheLabel<F>,
    twist: &TwistVector<F>,
) -> Result<Vec<F>> {
    label.require_generic()?;
    let ratio_u = div_nz(twist.kappa2.clone(), twist.kappa1.clone(), "twist ratio")?;
    let ratio_v = div_nz(twist.kappa2.clone(), twist.kappa3.clone(), "twist ratio")?;
    let mut out = Vec::with_capacity(label.a() + label.b());
    for j in 0..label.a() {
        let uj = std::slice::from_ref(&label.u[j]);
        let rest = label.u.without(j);
        let num = weights.r1(&label.u[j])? * kernel.f_set(&rest, uj)?;
        let den = kernel.f_set(uj, &rest)? * kernel.f_set(&label.v, uj)?;
        out.push(div_nz(num, den, "u-sector equation")? - ratio_u.clone());
    }
    for j in 0..label.b() {
        let vj = std::slice::from_ref(&label.v[j]);
        let rest = label.v.without(j);
        let num = weights.r3(&label.v[j])? * kernel.f_set(vj, &rest)?;
        let den = kernel.f_set(&rest, vj)? * kernel.f_set(vj, &label.u)?;
        out.push(div_nz(num, den, "v-sector equation")? - ratio_v.clone());
    }
    Ok(out)
}

/// Residuals of the partition form of the Bethe equations: for every
/// subset `ū_I ⊆ ū`,
///
/// ```text
///   r₁(ū_I) f(ū_II, ū_I) / ( f(ū_I, ū_II) f(v̄, ū_I) )  =  (κ₂/κ₁)^{|ū_I|} ,
/// ```
///
/// and symmetrically for every subset of `v̄`.  On shell these all hold
/// simultaneously; they are products of single-root equations, so this
/// is a consistency check on the product structure rather than an
/// independent condition.
pub fn bae_partition_residuals<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    label: &BetheLabel<F>,
    twist: &TwistVector<F>,
) -> Result<Vec<F>> {
    label.require_generic()?;
    let ratio_u = div_nz(twist.kappa2.clone(), twist.kappa1.clone(), "twist ratio")?;
    let ratio_v = div_nz(twist.kappa2.clone(), twist.kappa3.clone(), "twist ratio")?;
    let power = |base: &F, n: usize| -> F {
        let mut acc = F::one();
        for _ in 0..n {
            acc = acc * base.clone();
        }
        acc
    };
    let mut out = Vec::new();
    for k in 0..=label.a() {
        for pick in k_subsets(label.a(), k) {
            let parts = split_at_indices(&label.u, &pick);
            let mut num = F::one();
            for p in parts.first.iter() {
                num = num * weights.r1(p)?;
            }
            num = num * kernel.f_set(&parts.second, &parts.first)?;
            let den = kernel.f_set(&parts.first, &parts.second)?
                * kernel.f_set(&label.v, &parts.first)?;
            out.push(div_nz(num, den, "u-sector partition equation")? - power(&ratio_u, k));
        }
    }
    for n in 0..=label.b() {
        for pick in k_subsets(label.b(), n) {
            let parts = split_at_indices(&label.v, &pick);
            let mut num = F::one();
            for p in parts.first.iter() {
                num = num * weights.r3(p)?;
            }
            num = num * kernel.f_set(&parts.first, &parts.second)?;
            let den = kernel.f_set(&parts.second, &parts.first)?
                * kernel.f_set(&parts.first, &label.u)?;
            out.push(div_nz(num, den, "v-sector partition equation")? - power(&ratio_v, n));
        }
    }
    Ok(out)
}

fn ln_of<F: Field>(value: F, what: &str) -> Result<F> {
    if value.is_zero() {
        return Err(Error::Pole(format!("logarithm of zero in {what}")));
    }
    value
        .try_ln()
        .ok_or_else(|| Error::NotApplicable(format!("{what} needs a floating-point field")))
}

/// The logarithmic left-hand sides `Φ_1, …, Φ_{a+b}` (u-sector first),
/// with every logarithm principal and taken factor by factor.
pub fn log_bae_lhs<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    label: &BetheLabel<F>,
) -> Result<Vec<F>> {
    label.require_generic()?;
    let mut out = Vec::with_capacity(label.a() + label.b());
    for j in 0..label.a() {
        let uj = &label.u[j];
        let mut phi = weights.ln_r1(uj)?;
        for (m, um) in label.u.iter().enumerate() {
            if m == j {
                continue;
            }
            phi = phi - ln_of(kernel.f(uj, um)?, "u-u rate")? + ln_of(kernel.f(um, uj)?, "u-u rate")?;
        }
        for vk in label.v.iter() {
            phi = phi - ln_of(kernel.f(vk, uj)?, "v-u rate")?;
        }
        out.push(phi);
    }
    for j in 0..label.b() {
        let vj = &label.v[j];
        let mut phi = weights.ln_r3(vj)?;
        for (m, vm) in label.v.iter().enumerate() {
            if m == j {
                continue;
            }
            phi = phi - ln_of(kernel.f(vm, vj)?, "v-v rate")? + ln_of(kernel.f(vj, vm)?, "v-v rate")?;
        }
        for uk in label.u.iter() {
            phi = phi - ln_of(kernel.f(vj, uk)?, "v-u rate")?;
        }
        out.push(phi);
    }
    Ok(out)
}

/// Jacobian `∂Φ_j / ∂(root_k)` of [`log_bae_lhs`], roots ordered
/// `u_1, …, u_a, v_1, …, v_b`.  Only rational rates enter, so this is
/// available in exact arithmetic too (the twist does not appear: it only
/// shifts the right-hand side).
pub fn phi_jacobian<F: Field>(
    kernel: &RateKernel<F>,
    weights: &impl Weights<F>,
    label: &BetheLabel<F>,
) -> Result<Mat<F>> {
    label.require_generic()?;
    let a = label.a();
    let b = label.b();
    let mut m: Mat<F> = Mat::zeros(a + b, a + b);
    for j in 0..a {
        let uj = &label.u[j];
        let mut diag = weights.dlog_r1(uj)?;
        for (k, uk) in label.u.iter().enumerate() {
            if k == j {
                continue;
            }
            let pair = xrate(kernel, uj, uk)? + xrate(kernel, uk, uj)?;
            diag = diag + pair.clone();
            *m.at_mut(j, k) = -pair;
        }
        for (k, vk) in label.v.iter().enumerate() {
            let x = xrate(kernel, vk, uj)?;
            diag = diag - x.clone();
            *m.at_mut(j, a + k) = x;
        }
        *m.at_mut(j, j) = diag;
    }
    for j in 0..b {
        let vj = &label.v[j];
        let mut diag = weights.dlog_r3(vj)?;
        for (k, vk) in label.v.iter().enumerate() {
            if k == j {
                continue;
            }
            let pair = xrate(kernel, vk, vj)? + xrate(kernel, vj, vk)?;
            diag = diag - pair.clone();
            *m.at_mut(a + j, a + k) = pair;
        }
        for (k, uk) in label.u.iter().enumerate() {
            let x = xrate(kernel, vj, uk)?;
            diag = diag + x.clone();
            *m.at_mut(a + j, k) = -x;
        }
        *m.at_mut(a + j, a + j) = diag;
    }
    Ok(m)
}

const TWO_PI: f64 = std::f64::consts::TAU;

/// One logarithmic Bethe-equation residual: the complex deviation
/// `Φ_j − target_j − 2πi·branch_j` after snapping `branch_j` to the
/// nearest integer, together with that integer.
#[derive(Debug, Clone)]
pub struct BaeResidual {
    pub value: C64,
    pub branch: i64,
}

fn log_targets(label: &BetheLabel<C64>, twist: &TwistVector<C64>) -> Result<Vec<C64>> {
    let lk1 = ln_of(twist.kappa1, "twist")?;
    let lk2 = ln_of(twist.kappa2, "twist")?;
    let lk3 = ln_of(twist.kappa3, "twist")?;
    let mut targets = vec![lk2 - lk1; label.a()];
    targets.extend(vec![lk2 - lk3; label.b()]);
    Ok(targets)
}

/// Logarithmic residuals of the Bethe equations, one per root (u-sector
/// first).  Each residual has its imaginary part folded into `(−π, π]`
/// by an integer branch choice, which is reported alongside it.  When a
/// deviation lands within `10⁻⁹` of the fold boundary the branch
/// assignment is ambiguous and an error is returned instead of a guess.
pub fn bae_residuals(
    kernel: &RateKernel<C64>,
    weights: &impl Weights<C64>,
    label: &BetheLabel<C64>,
    twist: &TwistVector<C64>,
) -> Result<Vec<BaeResidual>> {
    let phi = log_bae_lhs(kernel, weights, label)?;
    let targets = log_targets(label, twist)?;
    let mut out = Vec::with_capacity(phi.len());
    for (p, t) in phi.into_iter().zip(targets) {
        let dev = p - t;
        let turns = dev.im / TWO_PI;
        let branch = turns.round();
        if (turns - branch).abs() > 0.5 - 1e-9 {
            return Err(Error::Branch(format!(
                "residual {dev} sits on the branch-fold boundary; \
                 the winding assignment would be a coin flip"
            )));
        }
        out.push(BaeResidual {
            value: dev - C64::new(0.0, TWO_PI * branch),
            branch: branch as i64,
        });
    }
    Ok(out)
}

/// A certified solution of the Bethe equations.
#[derive(Debug, Clone)]
pub struct BaeSolution {
    pub label: BetheLabel<C64>,
    /// Branch integers of the logarithmic equations, u-sector first.
    pub branch: Vec<i64>,
    /// Largest logarithmic residual magnitude at the returned roots.
    pub residual: f64,
    pub twist: TwistVector<C64>,
}

/// Knobs for [`solve_bae`] and [`continue_twist`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Newton stops when every logarithmic residual is below this.
    pub tol: f64,
    /// Iteration cap per Newton start.
    pub max_iter: usize,
    /// Number of random starting points tried after the caller-supplied
    /// one (if any) fails.
    pub restarts: usize,
    /// Seed for the random starting points.
    pub seed: u64,
    /// Eigenvector certification threshold, relative to the state norm.
    pub certify_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-12, max_iter: 100, restarts: 32, seed: 0x5eed, certify_tol: 1e-8 }
    }
}

fn label_from_roots(roots: &[C64], a: usize) -> BetheLabel<C64> {
    BetheLabel::new(
        ParamSet::new(roots[..a].to_vec()),
        ParamSet::new(roots[a..].to_vec()),
    )
}

/// One Newton run from a fixed starting point.  Returns the polished
/// roots and the final residual, or an error describing why this start
/// failed (singular Jacobian, pole collision, iteration cap, …).
fn newton_run(
    model: &ChainModel<C64>,
    a: usize,
    twist: &TwistVector<C64>,
    branch: &[i64],
    start: &[C64],
    opts: &SolveOptions,
) -> Result<(Vec<C64>, f64)> {
    let kernel = model.kernel();
    let mut roots = start.to_vec();
    let mut targets = log_targets(&label_from_roots(&roots, a), twist)?;
    for (t, br) in targets.iter_mut().zip(branch) {
        *t += C64::new(0.0, TWO_PI * *br as f64);
    }
    for _ in 0..opts.max_iter {
        let label = label_from_roots(&roots, a);
        let phi = log_bae_lhs(kernel, model, &label)?;
        let resid: Vec<C64> = phi.iter().zip(&targets).map(|(p, t)| p - t).collect();
        let worst = resid.iter().map(|r| r.norm()).fold(0.0, f64::max);
        if worst <= opts.tol {
            return Ok((roots, worst));
        }
        let jac = phi_jacobian(kernel, model, &label)?;
        let step = jac
            .solve(&resid)
            .ok_or_else(|| Error::SingularTransfer("Newton Jacobian is singular".into()))?;
        for (r, s) in roots.iter_mut().zip(&step) {
            *r -= *s;
        }
    }
    Err(Error::NoConvergence(format!(
        "Newton did not reach {} within {} iterations",
        opts.tol, opts.max_iter
    )))
}

/// Check that the state labelled by `solution` really is an eigenvector
/// of the twisted transfer matrix, at three sample points, to the given
/// relative tolerance.  This is the brute-force certificate: it builds
/// the full `3^L` state and multiplies it by the dense transfer matrix.
pub fn certify_solution(
    model: &ChainModel<C64>,
    label: &BetheLabel<C64>,
    twist: &TwistVector<C64>,
    tol: f64,
) -> Result<f64> {
    let state = bethe_vector(model, label, BetheVariant::Explicit1)?;
    let norm = vec_mag(&state.coords);
    if norm == 0.0 {
        return Err(Error::Model(
            "the state vanishes identically; nothing to certify".into(),
        ));
    }
    let kappa = twist.as_array();
    let mut pool = DrawPool::for_check("eigenvector certificate", 0);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 3 && attempts < 24 {
        attempts += 1;
        let x: C64 = pool.draw();
        let tau = match transfer_eigenvalue(model.kernel(), model, &x, label, twist) {
            Ok(t) => t,
            Err(_) => continue, // x collided with a root or a site; draw again
        };
        let tmat = match model.transfer_twisted(&x, &kappa) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let lhs = tmat.matvec(&state.coords);
        let mut dev: f64 = 0.0;
        for (l, s) in lhs.iter().zip(&state.coords) {
            dev = dev.max((l - tau * s).norm());
        }
        worst = worst.max(dev / norm);
        checked += 1;
    }
    if checked < 3 {
        return Err(Error::Strategy(
            "could not find three pole-free sample points for certification".into(),
        ));
    }
    if worst > tol {
        return Err(Error::NotOnShell(format!(
            "eigenvector deviation {worst:.3e} exceeds {tol:.1e}"
        )));
    }
    Ok(worst)
}

fn roots_distinct(roots: &[C64]) -> bool {
    let scale = roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            if (roots[i] - roots[j]).norm() <= 1e-8 * scale {
                return false;
            }
        }
    }
    true
}

/// Solve the logarithmic Bethe equations for `a` u-roots and `b`
/// v-roots at the given twist and branch integers (`branch.len() must
/// be a+b`, u-sector first).
///
/// Newton iteration runs from `initial` if supplied, then from
/// `opts.restarts` deterministic pseudo-random starting points spread
/// around the inhomogeneity cloud.  A run only counts as a solution if
/// the polished roots are pairwise distinct, reproduce the requested
/// branch integers, and pass the brute-force eigenvector certificate.
pub fn solve_bae(
    model: &ChainModel<C64>,
    a: usize,
    b: usize,
    twist: &TwistVector<C64>,
    branch: &[i64],
    initial: Option<&[C64]>,
    opts: &SolveOptions,
) -> Result<BaeSolution> {
    if branch.len() != a + b {
        return Err(Error::Cardinality(format!(
            "expected {} branch integers, got {}",
            a + b,
            branch.len()
        )));
    }
    if a + b == 0 {
        return Ok(BaeSolution {
            label: BetheLabel::new(ParamSet::empty(), ParamSet::empty()),
            branch: Vec::new(),
            residual: 0.0,
            twist: twist.clone(),
        });
    }

    // Starting points are spread over a box around the inhomogeneities,
    // slightly off the real axis so complex-conjugate root pairs are
    // reachable.
    let xis = model.xis();
    let center = xis.iter().copied().sum::<C64>() / C64::new(xis.len() as f64, 0.0);
    let spread = xis
        .iter()
        .map(|x| (x - center).norm())
        .fold(model.kernel().c().norm(), f64::max);

    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let mut last_err = Error::NoConvergence("no starting point was tried".into());
    let attempts = opts.restarts + usize::from(initial.is_some());
    for attempt in 0..attempts {
        let start: Vec<C64> = match (attempt, initial) {
            (0, Some(init)) => {
                if init.len() != a + b {
                    return Err(Error::Cardinality(format!(
                        "expected {} starting roots, got {}",
                        a + b,
                        init.len()
                    )));
                }
                init.to_vec()
            }
            _ => (0..a + b)
                .map(|_| {
                    let re: f64 = rng.random_range(-2.0..2.0);
                    let im: f64 = rng.random_range(-1.0..1.0);
                    center + C64::new(re * spread, im * spread)
                })
                .collect(),
        };
        let (roots, residual) = match newton_run(model, a, twist, branch, &start, opts) {
            Ok(pair) => pair,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        if !roots_distinct(&roots) {
            last_err = Error::DegenerateRoots(
                "Newton converged onto coincident roots".into(),
            );
            continue;
        }
        let label = label_from_roots(&roots, a);
        // Confirm the winding is the requested one, not a neighbour the
        // iteration drifted into.
        match bae_residuals(model.kernel(), model, &label, twist) {
            Ok(rs) => {
                let found: Vec<i64> = rs.iter().map(|r| r.branch).collect();
                if found != branch {
                    last_err = Error::Branch(format!(
                        "converged onto branch {found:?} instead of {branch:?}"
                    ));
                    continue;
                }
            }
            Err(e) => {
                last_err = e;
                continue;
            }
        }
        match certify_solution(model, &label, twist, opts.certify_tol) {
            Ok(_) => {
                return Ok(BaeSolution { label, branch: branch.to_vec(), residual, twist: twist.clone() })
            }
            Err(e) => {
                last_err = e;
                continue;
            }
        }
    }
    Err(Error::NoConvergence(format!(
        "no certified solution after {attempts} starts; last failure: {last_err}"
    )))
}

/// Follow a certified solution along a straight path in twist space,
/// re-solving at each of `steps` intermediate twists with the previous
/// roots as the starting point.  The branch integers are held fixed, so
/// the result is the analytic continuation of the input solution.
pub fn continue_twist(
    model: &ChainModel<C64>,
    from: &BaeSolution,
    target: &TwistVector<C64>,
    steps: usize,
    opts: &SolveOptions,
) -> Result<BaeSolution> {
    if steps == 0 {
        return Err(Error::Continuation("need at least one step".into()));
    }
    let mut roots: Vec<C64> = from.label.u.iter().chain(from.label.v.iter()).copied().collect();
    let a = from.label.a();
    let mut current = from.clone();
    for k in 1..=steps {
        let s = C64::new(k as f64 / steps as f64, 0.0);
        let lerp = |x: &C64, y: &C64| x + s * (y - x);
        let twist = TwistVector::new(
            lerp(&from.twist.kappa1, &target.kappa1),
            lerp(&from.twist.kappa2, &target.kappa2),
            lerp(&from.twist.kappa3, &target.kappa3),
        )?;
        let (next, residual) = newton_run(model, a, &twist, &from.branch, &roots, opts)
            .map_err(|e| Error::Continuation(format!("step {k}/{steps} failed: {e}")))?;
        if !roots_distinct(&next) {
            return Err(Error::Continuation(format!(
                "roots collided at step {k}/{steps}"
            )));
        }
        roots = next;
        current = BaeSolution {
            label: label_from_roots(&roots, a),
            branch: from.branch.clone(),
            residual,
            twist,
        };
    }
    certify_solution(model, &current.label, &current.twist, opts.certify_tol)?;
    Ok(current)
}

/// Every untwisted solution of the one-root sector (`a = 1`, `b = 0`),
/// certified.
///
/// The condition `r_1(u) = 1` cleared of denominators is the polynomial
/// `∏_ℓ (u + c − ξ_ℓ) − ∏_ℓ (u − ξ_ℓ)`, whose leading powers cancel:
/// degree `L − 1`, leading coefficient `L·c`.  All its roots are found
/// at once by simultaneous (Durand–Kerner) iteration — evaluating the
/// polynomial as the product difference, never through coefficients —
/// and each is polished through [`solve_bae`] with its branch integer
/// read off the seed.  Roots the iteration cannot separate or certify
/// are reported, not guessed.
pub fn one_root_solutions(model: &ChainModel<C64>, opts: &SolveOptions) -> Result<Vec<BaeSolution>> {
    let c = *model.kernel().c();
    let n = model.sites() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let p = |u: C64| -> C64 {
        let mut plus = C64::new(1.0, 0.0);
        let mut minus = C64::new(1.0, 0.0);
        for xi in model.xis().iter() {
            plus *= u + c - xi;
            minus *= u - xi;
        }
        plus - minus
    };
    // Start points on a gentle spiral around the inhomogeneity centroid,
    // scaled to the spread of the chain so large ξ̄ do not strand them.
    let centroid = model.xis().iter().sum::<C64>() / C64::new(model.sites() as f64, 0.0);
    let radius = model
        .xis()
        .iter()
        .map(|xi| (xi - centroid).norm())
        .fold(1.0, f64::max);
    let spread = C64::new(0.4, 0.9);
    let mut roots: Vec<C64> = (1..=n as u32)
        .map(|k| centroid + C64::new(radius, 0.0) * spread.powu(k))
        .collect();
    let lead = c * C64::new(model.sites() as f64, 0.0);
    for _ in 0..400 {
        let mut worst = 0.0_f64;
        for i in 0..n {
            let mut den = lead;
            for j in 0..n {
                if j != i {
                    den *= roots[i] - roots[j];
                }
            }
            if den.norm() == 0.0 {
                return Err(Error::DegenerateRoots(
                    "root candidates collided during iteration".into(),
                ));
            }
            let step = p(roots[i]) / den;
            roots[i] -= step;
            worst = worst.max(step.norm());
        }
        if worst < 1e-14 * radius.max(1.0) {
            break;
        }
    }
    let scale = radius.max(1.0);
    for (i, r) in roots.iter().enumerate() {
        if p(*r).norm() > 1e-6 * scale.powi(n as i32) {
            return Err(Error::NoConvergence(format!(
                "one-root candidate {i} did not settle (value {r})"
            )));
        }
        for other in &roots[..i] {
            if (r - other).norm() < 1e-9 * scale {
                return Err(Error::DegenerateRoots(format!(
                    "two one-root candidates coincide near {r}"
                )));
            }
        }
    }

    let twist = TwistVector::identity();
    let mut out = Vec::with_capacity(n);
    for root in roots {
        let label = BetheLabel::new(ParamSet::new(vec![root]), ParamSet::empty());
        let branch = bae_residuals(model.kernel(), model, &label, &twist)?[0].branch;
        out.push(solve_bae(model, 1, 0, &twist, &[branch], Some(&[root]), opts)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe::dual_bethe_vector;
    use crate::field::Rat;
    use crate::linalg::vec_dot;
    use num::Zero;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(n.into(), d.into())
    }

    fn float_chain(sites: usize, seed: u64) -> ChainModel<C64> {
        let mut pool = DrawPool::for_check("onshell chain", seed);
        let kernel = RateKernel::new(C64::new(1.0, 0.0)).unwrap();
        ChainModel::new(kernel, pool.draw_set(sites)).unwrap()
    }

    #[test]
    fn vacuum_eigenvalue_is_the_weight_sum() {
        let mut pool = DrawPool::for_check("onshell vacuum", 1);
        let kernel = RateKernel::new(rat(1, 1)).unwrap();
        let model = ChainModel::new(kernel, pool.draw_set::<Rat>(3)).unwrap();
        let x: Rat = pool.draw();
        let label = BetheLabel::new(ParamSet::<Rat>::empty(), ParamSet::empty());
        let tau = transfer_eigenvalue(
            model.kernel(),
            &model,
            &x,
            &label,
            &TwistVector::identity(),
        )
        .unwrap();
        let expect = model.lambda(1, &x).unwrap() + model.lambda(2, &x).unwrap() + model.lambda(3, &x).unwrap();
        assert_eq!(tau, expect);

        // The vacuum really is an eigenvector with this eigenvalue.
        let t = model.transfer(&x).unwrap();
        let vac = model.vacuum();
        let lhs = t.matvec(&vac);
        for (l, s) in lhs.iter().zip(&vac) {
            assert_eq!(*l, tau.clone() * s.clone());
        }
    }

    #[test]
    fn eigenvalue_flattens_as_the_kernel_constant_shrinks() {
        // As c → 0 every rate f tends to 1 and the eigenvalue collapses
        // to r₁ + 1 + r₃ regardless of the label.  The O(c) parts cancel
        // exactly against the weight sum (r₁ carries them on both
        // sides), so the deviation is quadratic: halving c should
        // quarter it.
        let mut pool = DrawPool::for_check("onshell flatten", 2);
        let xis = pool.draw_set::<Rat>(2);
        let label = BetheLabel::new(pool.draw_set::<Rat>(1), pool.draw_set::<Rat>(1));
        let x: Rat = pool.draw();
        let deviation = |c: Rat| -> Rat {
            let kernel = RateKernel::new(c).unwrap();
            let model = ChainModel::new(kernel, xis.clone()).unwrap();
            let tau = transfer_eigenvalue(
                model.kernel(),
                &model,
                &x,
                &label,
                &TwistVector::identity(),
            )
            .unwrap();
            let flat = model.lambda(1, &x).unwrap()
                + model.lambda(2, &x).unwrap()
                + model.lambda(3, &x).unwrap();
            tau - flat
        };
        let d1 = deviation(rat(1, 1000));
        let d2 = deviation(rat(1, 2000));
        assert!(!d1.is_zero());
        let ratio = d1 / d2; // ideally 4 + O(c)
        let four = rat(4, 1);
        let gap = if ratio.clone() > four.clone() { ratio - four } else { four - ratio };
        assert!(gap < rat(1, 10), "deviation did not scale quadratically in c");
    }

    #[test]
    fn eigenvalue_derivatives_match_difference_quotients() {
        let model = float_chain(3, 3);
        let mut pool = DrawPool::for_check("onshell tau-diff", 3);
        let label = BetheLabel::new(pool.draw_set::<C64>(2), pool.draw_set::<C64>(1));
        let x: C64 = pool.draw();
        let twist = TwistVector::new(C64::new(1.0, 0.0), C64::new(0.8, 0.1), C64::new(1.2, 0.0)).unwrap();
        let h = C64::new(1e-6, 0.0);
        let kernel = model.kernel();

        let tau_at = |label: &BetheLabel<C64>| {
            transfer_eigenvalue(kernel, &model, &x, label, &twist).unwrap()
        };
        for j in 0..label.a() {
            let mut up = label.clone();
            up.u.0[j] += h;
            let mut dn = label.clone();
            dn.u.0[j] -= h;
            let numeric = (tau_at(&up) - tau_at(&dn)) / (h + h);
            let exact = transfer_eigenvalue_du(kernel, &model, &x, &label, &twist, j).unwrap();
            assert!(exact.eq_tol(&numeric, 1e-7), "du_{j}: {exact} vs {numeric}");
        }
        for j in 0..label.b() {
            let mut up = label.clone();
            up.v.0[j] += h;
            let mut dn = label.clone();
            dn.v.0[j] -= h;
            let numeric = (tau_at(&up) - tau_at(&dn)) / (h + h);
            let exact = transfer_eigenvalue_dv(kernel, &model, &x, &label, &twist, j).unwrap();
            assert!(exact.eq_tol(&numeric, 1e-7), "dv_{j}: {exact} vs {numeric}");
        }

        // Twist derivatives: τ is linear in κ̄, so the bare terms must
        // reassemble the eigenvalue.
        let mut rebuilt = C64::zero();
        for s in 1..=3 {
            rebuilt += *twist.component(s)
                * transfer_eigenvalue_dkappa(kernel, &model, &x, &label, s).unwrap();
        }
        assert!(rebuilt.eq_tol(&tau_at(&label), 1e-12));
    }

    #[test]
    fn log_form_exponentiates_to_the_product_form() {
        let model = float_chain(3, 4);
        let mut pool = DrawPool::for_check("onshell exp-phi", 4);
        let label = BetheLabel::new(pool.draw_set::<C64>(2), pool.draw_set::<C64>(2));
        let kernel = model.kernel();
        let twist = TwistVector::identity();

        let phi = log_bae_lhs(kernel, &model, &label).unwrap();
        let product = bae_product_residuals(kernel, &model, &label, &twist).unwrap();
        for (j, (p, r)) in phi.iter().zip(&product).enumerate() {
            // product residual = ratio − 1, so ratio = r + 1 must equal e^Φ.
            let ratio = r + C64::new(1.0, 0.0);
            assert!(p.exp().eq_tol(&ratio, 1e-10), "root {j}: e^Φ = {} vs {ratio}", p.exp());
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let model = float_chain(3, 5);
        let mut pool = DrawPool::for_check("onshell jac", 5);
        let label = BetheLabel::new(pool.draw_set::<C64>(2), pool.draw_set::<C64>(1));
        let kernel = model.kernel();
        let jac = phi_jacobian(kernel, &model, &label).unwrap();
        let n = label.a() + label.b();
        let h = 1e-6;
        for k in 0..n {
            let mut up = label.clone();
            let mut dn = label.clone();
            if k < label.a() {
                up.u.0[k] += C64::new(h, 0.0);
                dn.u.0[k] -= C64::new(h, 0.0);
            } else {
                up.v.0[k - label.a()] += C64::new(h, 0.0);
                dn.v.0[k - label.a()] -= C64::new(h, 0.0);
            }
            let phi_up = log_bae_lhs(kernel, &model, &up).unwrap();
            let phi_dn = log_bae_lhs(kernel, &model, &dn).unwrap();
            for j in 0..n {
                let numeric = (phi_up[j] - phi_dn[j]) / C64::new(2.0 * h, 0.0);
                assert!(
                    jac.at(j, k).eq_tol(&numeric, 1e-5),
                    "entry ({j},{k}): {} vs {numeric}",
                    jac.at(j, k)
                );
            }
        }
    }

    #[test]
    fn homogeneous_two_site_root_sits_at_minus_half() {
        // Two homogeneous sites, one u-root, c = 1: the equation
        // r₁(u) = 1 reads ((u+1)/u)² = e^{2πiℓ}, and the winding-one
        // branch pins u = −1/2.
        let kernel = RateKernel::new(C64::new(1.0, 0.0)).unwrap();
        let model = ChainModel::homogeneous(kernel, 2).unwrap();
        let sol = solve_bae(
            &model,
            1,
            0,
            &TwistVector::identity(),
            &[1],
            None,
            &SolveOptions::default(),
        )
        .unwrap();
        let u = sol.label.u[0];
        assert!((u - C64::new(-0.5, 0.0)).norm() < 1e-9, "root was {u}");
        assert!(sol.residual < 1e-12);

        // The certified eigenvalue agrees with the dense transfer matrix
        // applied to the explicit state at a fresh point.
        let x = C64::new(0.37, 0.0);
        let tau = transfer_eigenvalue(model.kernel(), &model, &x, &sol.label, &sol.twist).unwrap();
        let state = bethe_vector(&model, &sol.label, BetheVariant::Explicit1).unwrap();
        let lhs = model.transfer(&x).unwrap().matvec(&state.coords);
        for (l, s) in lhs.iter().zip(&state.coords) {
            assert!((l - tau * s).norm() < 1e-10 * vec_mag(&state.coords));
        }
    }

    /// Roots of `Π_ℓ (u + c − ξ_ℓ) − Π_ℓ (u − ξ_ℓ) = 0` for a three-site
    /// chain: the leading cubic terms cancel, leaving a quadratic whose
    /// coefficients are read off three evaluations.
    fn unit_ratio_pair(model: &ChainModel<C64>) -> (C64, C64) {
        let c = *model.kernel().c();
        let eval = |u: C64| -> C64 {
            let mut plus = C64::new(1.0, 0.0);
            let mut minus = C64::new(1.0, 0.0);
            for xi in model.xis().iter() {
                plus *= u + c - xi;
                minus *= u - xi;
            }
            plus - minus
        };
        let (p0, p1, p2) = (
            eval(C64::zero()),
            eval(C64::new(1.0, 0.0)),
            eval(C64::new(-1.0, 0.0)),
        );
        // p(u) = α u² + β u + γ with γ = p0, α = (p1 + p2)/2 − p0,
        // β = (p1 − p2)/2.
        let gamma = p0;
        let alpha = (p1 + p2) / C64::new(2.0, 0.0) - p0;
        let beta = (p1 - p2) / C64::new(2.0, 0.0);
        let disc = (beta * beta - C64::new(4.0, 0.0) * alpha * gamma).sqrt();
        (
            (-beta + disc) / (C64::new(2.0, 0.0) * alpha),
            (-beta - disc) / (C64::new(2.0, 0.0) * alpha),
        )
    }

    #[test]
    fn solved_roots_satisfy_every_partition_equation() {
        // Three sites, two u-roots, one v-root — the smallest label with
        // an active v-sector whose weight is dominant.  Eliminating v
        // through its own equation (v = (u₁+u₂)/2 − c/2) makes every
        // rate factor in the u-sector cancel, leaving r₁(u_j) = 1: the
        // same quadratic as the one-root sector.
        let model = float_chain(3, 6);
        let c = *model.kernel().c();
        let (q1, q2) = unit_ratio_pair(&model);
        let v = (q1 + q2 - c) / C64::new(2.0, 0.0);
        let label = BetheLabel::new(ParamSet::new(vec![q1, q2]), ParamSet::new(vec![v]));
        let twist = TwistVector::identity();

        let branch: Vec<i64> = bae_residuals(model.kernel(), &model, &label, &twist)
            .unwrap()
            .iter()
            .map(|r| r.branch)
            .collect();
        let roots: Vec<C64> = vec![q1, q2, v];
        let sol = solve_bae(&model, 2, 1, &twist, &branch, Some(&roots), &SolveOptions::default())
            .unwrap();

        let residuals =
            bae_partition_residuals(model.kernel(), &model, &sol.label, &sol.twist).unwrap();
        for r in residuals {
            assert!(r.norm() < 1e-8, "partition residual {r}");
        }
        // And the product-form residuals vanish too.
        for r in bae_product_residuals(model.kernel(), &model, &sol.label, &sol.twist).unwrap() {
            assert!(r.norm() < 1e-8);
        }
    }

    #[test]
    fn one_root_sector_is_enumerated_completely() {
        // Two sites: the sector has the single root (ξ₁ + ξ₂ − c)/2.
        let two = float_chain(2, 31);
        let c = *two.kernel().c();
        let sols = one_root_solutions(&two, &SolveOptions::default()).unwrap();
        assert_eq!(sols.len(), 1);
        let ustar = (two.xis()[0] + two.xis()[1] - c) / C64::new(2.0, 0.0);
        assert!((sols[0].label.u[0] - ustar).norm() < 1e-10);

        // Three sites: the quadratic's two roots, in some order.
        let three = float_chain(3, 8);
        let (q1, q2) = unit_ratio_pair(&three);
        let sols = one_root_solutions(&three, &SolveOptions::default()).unwrap();
        assert_eq!(sols.len(), 2);
        for q in [q1, q2] {
            assert!(
                sols.iter().any(|s| (s.label.u[0] - q).norm() < 1e-9),
                "missing root {q}"
            );
        }
        for s in &sols {
            assert!(s.residual < 1e-12);
        }
    }

    #[test]
    fn off_shell_points_have_visible_residuals() {
        let model = float_chain(2, 7);
        let mut pool = DrawPool::for_check("onshell off-shell", 7);
        let label = BetheLabel::new(pool.draw_set::<C64>(1), ParamSet::empty());
        let rs = bae_residuals(model.kernel(), &model, &label, &TwistVector::identity()).unwrap();
        assert!(rs[0].value.norm() > 1e-3);
    }

    #[test]
    fn distinct_roots_give_orthogonal_states() {
        // Three sites, one u-root: the on-shell condition is a quadratic
        // polynomial with two roots.  Both states must be orthogonal
        // under the dual pairing.
        let model = float_chain(3, 8);
        let (r1, r2) = unit_ratio_pair(&model);
        assert!((r1 - r2).norm() > 1e-6, "discriminant degenerated");

        let mut polished = Vec::new();
        for seed_root in [r1, r2] {
            let rs = bae_residuals(
                model.kernel(),
                &model,
                &BetheLabel::new(ParamSet::new(vec![seed_root]), ParamSet::empty()),
                &TwistVector::identity(),
            )
            .unwrap();
            let sol = solve_bae(
                &model,
                1,
                0,
                &TwistVector::identity(),
                &[rs[0].branch],
                Some(&[seed_root]),
                &SolveOptions::default(),
            )
            .unwrap();
            polished.push(sol);
        }
        let b1 = &polished[0].label;
        let b2 = &polished[1].label;
        assert!((b1.u[0] - b2.u[0]).norm() > 1e-6);

        let ket = bethe_vector(&model, b2, BetheVariant::Explicit1).unwrap();
        let bra = dual_bethe_vector(&model, b1).unwrap();
        let pairing = vec_dot(&bra.coords, &ket.coords);
        let scale = vec_mag(&bra.coords) * vec_mag(&ket.coords);
        assert!(pairing.norm() < 1e-8 * scale, "pairing {pairing}");

        // Same-root sanity: the pairing of a state with its own dual is
        // macroscopic.
        let same = vec_dot(&bra.coords, &bethe_vector(&model, b1, BetheVariant::Explicit1).unwrap().coords);
        assert!(same.norm() > 1e-6 * vec_mag(&bra.coords).powi(2));
    }

    #[test]
    fn twisted_solutions_continue_smoothly_from_untwisted_ones() {
        // Two sites, one u-root: the equation r₁(u) = 1 is linear with
        // the unique root u* = (ξ₁ + ξ₂ − c)/2, whose winding depends on
        // how the site gap compares to c — so read the branch off the
        // exact root rather than assuming it.
        let model = float_chain(2, 9);
        let c = *model.kernel().c();
        let ustar = (model.xis()[0] + model.xis()[1] - c) / C64::new(2.0, 0.0);
        let exact = BetheLabel::new(ParamSet::new(vec![ustar]), ParamSet::empty());
        let twist0 = TwistVector::identity();
        let branch = bae_residuals(model.kernel(), &model, &exact, &twist0).unwrap()[0].branch;
        let untwisted = solve_bae(
            &model,
            1,
            0,
            &twist0,
            &[branch],
            Some(&[ustar]),
            &SolveOptions::default(),
        )
        .unwrap();
        let target = TwistVector::scalar(C64::new(1.1, 0.0)).unwrap();
        let twisted = continue_twist(&model, &untwisted, &target, 8, &SolveOptions::default()).unwrap();
        assert_eq!(twisted.twist, target);
        assert!(twisted.residual < 1e-12);
        let moved = (twisted.label.u[0] - untwisted.label.u[0]).norm();
        assert!(moved > 1e-6, "the twist should move the root");
        assert!(moved < 0.5, "continuation jumped too far: {moved}");
        // The continued roots satisfy the twisted equations in product form.
        for r in bae_product_residuals(model.kernel(), &model, &twisted.label, &target).unwrap() {
            assert!(r.norm() < 1e-9);
        }
    }

    #[test]
    fn trivial_v_sector_is_reported_as_unsolvable() {
        // With r₃ ≡ 1 the v-sector equation at a = 0, b = 1 degenerates:
        // Φ_{a+1} ≡ 0 for every v, the Jacobian row vanishes, and no
        // isolated certified root exists (the state itself is outside the
        // admissible weight cone).  The solver must say so rather than
        // return something.
        let model = float_chain(2, 10);
        let err = solve_bae(
            &model,
            0,
            1,
            &TwistVector::identity(),
            &[0],
            None,
            &SolveOptions { restarts: 4, ..SolveOptions::default() },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoConvergence(_)), "got {err:?}");
    }

    #[test]
    fn wrong_branch_count_is_rejected() {
        let model = float_chain(2, 11);
        let err = solve_bae(
            &model,
            1,
            0,
            &TwistVector::identity(),
            &[0, 0],
            None,
            &SolveOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Cardinality(_)));
    }
}
