//! Bethe vectors on the chain: partition-sum constructions and recursions.
//!
//! A Bethe vector `B^{a,b}(u; v)` is labeled by two parameter sets and is
//! built out of the creation entries `T_12`, `T_13`, `T_23` of the
//! monodromy acting on the vacuum. Four different partition-sum formulas
//! and two recursion relations construct the same vector; all six are
//! implemented and the test suites check they agree componentwise in exact
//! arithmetic. Dual vectors are obtained from the first partition-sum
//! formula by the transposition antimorphism `T_ij -> T_ji`, realized as
//! row vectors multiplying the monodromy from the left.
//!
//! Everything is normalized to monodromies with middle vacuum weight
//! `lambda_2 = 1`, which holds for the fundamental chains of
//! [`crate::oracle`]; the `lambda_2` divisions the formulas carry are kept
//! in the code so the expressions read like the originals.

use crate::error::{Error, Result};
use crate::field::{div_nz, Field, RateKernel};
use crate::linalg::{vec_axpy, Mat};
use crate::oracle::ChainModel;
use crate::params::{joint_partition_sum, ParamSet};

/// The label `(u; v)` of a Bethe vector, cardinalities `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetheLabel<F> {
    pub u: ParamSet<F>,
    pub v: ParamSet<F>,
}

impl<F: Field> BetheLabel<F> {
    pub fn new(u: ParamSet<F>, v: ParamSet<F>) -> Self {
        BetheLabel { u, v }
    }

    pub fn a(&self) -> usize {
        self.u.len()
    }

    pub fn b(&self) -> usize {
        self.v.len()
    }

    /// Generic-position requirement: each set pairwise distinct.
    pub fn require_generic(&self) -> Result<()> {
        self.u.require_distinct("u parameters")?;
        self.v.require_distinct("v parameters")
    }
}

impl<F: Field> std::fmt::Display for BetheLabel<F> {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fmt, "({}; {})", self.u, self.v)
    }
}

/// A concrete chain-space realization of a (dual) Bethe vector.
#[derive(Debug, Clone)]
pub struct StateVector<F: Field> {
    /// Components over the `3^L` basis; a column for vectors, a row for
    /// dual vectors (the pairing is the plain bilinear dot product).
    pub coords: Vec<F>,
    pub label: Option<BetheLabel<F>>,
    /// Set when the label's weight space is empty on this chain
    /// (`a > L` or `b > a`), in which case the construction correctly
    /// yields the zero vector.
    pub weight_empty: bool,
}

impl<F: Field> StateVector<F> {
    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|x| x.is_zero())
    }
}

/// Which construction to use for a Bethe vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetheVariant {
    /// Partition sum ordered `T_12(u_II) T_13(u_I) T_23(v_II)`.
    Explicit1,
    /// Partition sum ordered `T_23(v_II) T_13(v_I) T_12(u_II)`.
    Explicit2,
    /// Partition sum ordered `T_13(u_I) T_12(u_II) T_23(v_II)`.
    Explicit3,
    /// Partition sum ordered `T_13(v_I) T_23(v_II) T_12(u_II)`.
    Explicit4,
    /// Recursion that strips `u` parameters one at a time.
    RecursionA,
    /// Recursion that strips `v` parameters one at a time.
    RecursionB,
}

impl BetheVariant {
    pub const ALL: [BetheVariant; 6] = [
        BetheVariant::Explicit1,
        BetheVariant::Explicit2,
        BetheVariant::Explicit3,
        BetheVariant::Explicit4,
        BetheVariant::RecursionA,
        BetheVariant::RecursionB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BetheVariant::Explicit1 => "explicit1",
            BetheVariant::Explicit2 => "explicit2",
            BetheVariant::Explicit3 => "explicit3",
            BetheVariant::Explicit4 => "explicit4",
            BetheVariant::RecursionA => "recursion-a",
            BetheVariant::RecursionB => "recursion-b",
        }
    }
}

/// The Izergin determinant `K_k`.
///
/// Definition: `prod_{l<m} g(x_l,x_m) g(y_m,y_l) . h(x,y) . det[t(x_i,y_j)]`.
/// Evaluated in the column-regularized form
///
/// ```text
/// K_k(x|y) = prod_{l<m} g(x_l,x_m) g(y_m,y_l)
///            . det_k[ g(x_i,y_j) prod_{l != i} h(x_l,y_j) ]
/// ```
///
/// obtained by distributing the `h` double product into the determinant
/// columns (`t = g/h`). The regularized entries stay finite wherever the
/// determinant itself is, in particular at the shifted-coincident points
/// `K_n(x-c|x)` that the action and scalar-product formulas evaluate;
/// the defining expression would hit `0 x infinity` there.
pub fn ik_determinant<F: Field>(
    kernel: &RateKernel<F>,
    x: &ParamSet<F>,
    y: &ParamSet<F>,
) -> Result<F> {
    if x.len() != y.len() {
        return Err(Error::Cardinality(format!(
            "determinant needs equal set sizes, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let k = x.len();
    if k == 0 {
        return Ok(F::one());
    }
    x.require_distinct("first determinant argument")?;
    y.require_distinct("second determinant argument")?;
    let mut pref = F::one();
    for l in 0..k {
        for m in (l + 1)..k {
            pref = pref * kernel.g(&x[l], &x[m])? * kernel.g(&y[m], &y[l])?;
        }
    }
    let mut mat: Mat<F> = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut e = kernel.g(&x[i], &y[j])?;
            for l in 0..k {
                if l != i {
                    e = e * kernel.h(&x[l], &y[j]);
                }
            }
            *mat.at_mut(i, j) = e;
        }
    }
    Ok(pref * mat.determinant())
}

/// `K_k(x|y) / f(x,y)`, evaluated in a form that stays finite at cross
/// coincidences `x_i = y_j`.
///
/// Dividing the regularized determinant columns by `prod_i f(x_i, y_j)`
/// turns the entries into `h(x_i,y_j)^{-1} prod_{l != i} (x_l - y_j)/c`,
/// which have no pole at `x = y` (only at `x - y = -c`). This combination
/// is what the partition-sum formulas actually contain once their `f`
/// denominators are factored, and it is the reason Bethe labels whose `u`
/// and `v` sets share points — as every label produced by a `T_13` action
/// does — still evaluate exactly.
pub fn ik_over_f<F: Field>(
    kernel: &RateKernel<F>,
    x: &ParamSet<F>,
    y: &ParamSet<F>,
) -> Result<F> {
    if x.len() != y.len() {
        return Err(Error::Cardinality(format!(
            "determinant needs equal set sizes, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let k = x.len();
    if k == 0 {
        return Ok(F::one());
    }
    x.require_distinct("first determinant argument")?;
    y.require_distinct("second determinant argument")?;
    let mut pref = F::one();
    for l in 0..k {
        for m in (l + 1)..k {
            pref = pref * kernel.g(&x[l], &x[m])? * kernel.g(&y[m], &y[l])?;
        }
    }
    let c = kernel.c().clone();
    let mut mat: Mat<F> = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut e = div_nz(F::one(), kernel.h(&x[i], &y[j]), "h at a shifted coincidence")?;
            for l in 0..k {
                if l != i {
                    e = e * (x[l].clone() - y[j].clone()) / c.clone();
                }
            }
            *mat.at_mut(i, j) = e;
        }
    }
    Ok(pref * mat.determinant())
}

/// True when some element of `x` equals some element of `y`.
fn sets_coincide<F: Field>(x: &[F], y: &[F]) -> bool {
    x.iter().any(|a| y.iter().any(|b| a == b))
}

/// The three creation entries of the monodromy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Creator {
    T12,
    T13,
    T23,
}

impl Creator {
    pub fn name(self) -> &'static str {
        match self {
            Creator::T12 => "T_12",
            Creator::T13 => "T_13",
            Creator::T23 => "T_23",
        }
    }

    /// The 1-based monodromy entry this creator names.
    pub fn indices(self) -> (usize, usize) {
        match self {
            Creator::T12 => (1, 2),
            Creator::T13 => (1, 3),
            Creator::T23 => (2, 3),
        }
    }
}

/// Monodromy creation blocks precomputed at a fixed list of points.
///
/// Building a monodromy is the expensive step (`3^L` blocks per point), so
/// partition sums and recursions share one cache over the union of all
/// parameters they touch. Points are matched by field equality.
pub struct OpCache<F: Field> {
    points: Vec<F>,
    // per point: T_12, T_13, T_23
    creators: Vec<[Mat<F>; 3]>,
}

impl<F: Field> OpCache<F> {
    pub fn build(model: &ChainModel<F>, points: &[F]) -> Result<Self> {
        let mut cache = OpCache {
            points: Vec::new(),
            creators: Vec::new(),
        };
        for p in points {
            if cache.points.iter().any(|q| q == p) {
                continue;
            }
            let mono = model.monodromy(p)?;
            cache.points.push(p.clone());
            cache.creators.push([
                mono.entry(1, 2).clone(),
                mono.entry(1, 3).clone(),
                mono.entry(2, 3).clone(),
            ]);
        }
        Ok(cache)
    }

    fn op(&self, which: Creator, x: &F) -> Result<&Mat<F>> {
        let idx = self
            .points
            .iter()
            .position(|p| p == x)
            .ok_or_else(|| Error::Model(format!("{x} was not among the cached points")))?;
        let slot = match which {
            Creator::T12 => 0,
            Creator::T13 => 1,
            Creator::T23 => 2,
        };
        Ok(&self.creators[idx][slot])
    }

    /// Applies the ordered product `T(p_1) ... T(p_m)` to a column vector
    /// (rightmost factor first).
    fn apply_product(&self, which: Creator, points: &ParamSet<F>, vec: &[F]) -> Result<Vec<F>> {
        let mut cur = vec.to_vec();
        for x in points.iter().rev() {
            cur = self.op(which, x)?.matvec(&cur);
        }
        Ok(cur)
    }
}

fn weight_space_empty<F: Field>(model: &ChainModel<F>, label: &BetheLabel<F>) -> bool {
    label.a() > model.sites() || label.b() > label.a()
}

/// One ordered block `T_which(points)` in an operator product.
struct OpBlock<'a, F> {
    which: Creator,
    points: &'a ParamSet<F>,
}

/// Shared engine for the four explicit partition-sum formulas: sums
/// `coeff(partition) . [ordered operator product](partition) |0>` over the
/// equal-size joint partitions of `u` and `v`.
///
/// Each coefficient is evaluated with `K_k(v_I|u_I) / f(v_I,u_I)` fused
/// into the coincidence-safe [`ik_over_f`] and the remaining cross-set `f`
/// factors kept explicit in the denominator. A term whose remaining
/// denominator contains a coincident `(v, u)` pair carries a factor
/// `1/f(x,x) -> 0` in the limit and is dropped, which is exactly how the
/// formulas extend to labels whose `u` and `v` sets share points.
fn explicit_sum<F: Field>(
    model: &ChainModel<F>,
    cache: &OpCache<F>,
    label: &BetheLabel<F>,
    variant: BetheVariant,
) -> Result<Vec<F>> {
    let kernel = model.kernel();
    let vac = model.vacuum();
    let mut total = vec![F::zero(); model.dim()];
    joint_partition_sum(&label.u, &label.v, |_k, ui, uii, vi, vii| {
        // remaining cross denominators after fusing f(v_I, u_I) into the
        // determinant: one product per (v-part, u-part) pair
        let cross: Vec<(&[F], &[F])> = match variant {
            BetheVariant::Explicit1 => vec![(&vii[..], &label.u[..])],
            BetheVariant::Explicit2 => vec![(&label.v[..], &uii[..])],
            BetheVariant::Explicit3 | BetheVariant::Explicit4 => {
                vec![(&vi[..], &uii[..]), (&vii[..], &ui[..]), (&vii[..], &uii[..])]
            }
            _ => unreachable!("explicit_sum only handles the partition-sum variants"),
        };
        if cross.iter().any(|&(xs, ys)| sets_coincide(xs, ys)) {
            return Ok(F::zero());
        }
        let iof = ik_over_f(kernel, vi, ui)?;
        if iof.is_zero() {
            return Ok(F::zero());
        }
        let mut den = match variant {
            BetheVariant::Explicit1 | BetheVariant::Explicit3 => {
                model.lambda2_set(vii)? * model.lambda2_set(&label.u)?
            }
            _ => model.lambda2_set(uii)? * model.lambda2_set(&label.v)?,
        };
        for (xs, ys) in cross {
            den = den * kernel.f_set(xs, ys)?;
        }
        let num = match variant {
            BetheVariant::Explicit2 => kernel.f_set(vi, vii)? * kernel.f_set(ui, uii)?,
            BetheVariant::Explicit1 => kernel.f_set(vii, vi)? * kernel.f_set(uii, ui)?,
            _ => kernel.f_set(vii, vi)? * kernel.f_set(ui, uii)?,
        };
        let coeff = div_nz(iof * num, den, "partition-term denominator")?;
        if coeff.is_zero() {
            return Ok(F::zero());
        }
        let ops: [OpBlock<F>; 3] = match variant {
            BetheVariant::Explicit1 => [
                OpBlock { which: Creator::T12, points: uii },
                OpBlock { which: Creator::T13, points: ui },
                OpBlock { which: Creator::T23, points: vii },
            ],
            BetheVariant::Explicit2 => [
                OpBlock { which: Creator::T23, points: vii },
                OpBlock { which: Creator::T13, points: vi },
                OpBlock { which: Creator::T12, points: uii },
            ],
            BetheVariant::Explicit3 => [
                OpBlock { which: Creator::T13, points: ui },
                OpBlock { which: Creator::T12, points: uii },
                OpBlock { which: Creator::T23, points: vii },
            ],
            BetheVariant::Explicit4 => [
                OpBlock { which: Creator::T13, points: vi },
                OpBlock { which: Creator::T23, points: vii },
                OpBlock { which: Creator::T12, points: uii },
            ],
            _ => unreachable!(),
        };
        let mut state = vac.clone();
        for block in ops.iter().rev() {
            state = cache.apply_product(block.which, block.points, &state)?;
        }
        vec_axpy(&mut total, &coeff, &state);
        Ok(F::zero())
    })?;
    Ok(total)
}

/// Recursion stripping the last `u` parameter:
///
/// ```text
/// lambda_2(u_a) f(v, u_a) B^{a,b}(u; v) =
///     T_12(u_a) B^{a-1,b}(u \ u_a; v)
///   + sum_i g(v_i, u_a) f(v \ v_i, v_i) T_13(u_a) B^{a-1,b-1}(u \ u_a; v \ v_i)
/// ```
///
/// with the base `B^{0,b}` taken from the first explicit formula (the
/// vacuum for `b = 0`, the zero vector otherwise).
fn recursion_a<F: Field>(
    model: &ChainModel<F>,
    cache: &OpCache<F>,
    u: &ParamSet<F>,
    v: &ParamSet<F>,
) -> Result<Vec<F>> {
    if u.is_empty() {
        let label = BetheLabel::new(ParamSet::empty(), v.clone());
        return explicit_sum(model, cache, &label, BetheVariant::Explicit1);
    }
    let kernel = model.kernel();
    let last = u.len() - 1;
    let uk = u[last].clone();
    let u_rest = u.without(last);
    let mut rhs = cache.apply_product(
        Creator::T12,
        &ParamSet::new(vec![uk.clone()]),
        &recursion_a(model, cache, &u_rest, v)?,
    )?;
    for i in 0..v.len() {
        let vi = v[i].clone();
        let v_rest = v.without(i);
        let coeff = kernel.g(&vi, &uk)? * kernel.f_set(&v_rest, std::slice::from_ref(&vi))?;
        if coeff.is_zero() {
            continue;
        }
        let sub = recursion_a(model, cache, &u_rest, &v_rest)?;
        let term = cache.apply_product(Creator::T13, &ParamSet::new(vec![uk.clone()]), &sub)?;
        vec_axpy(&mut rhs, &coeff, &term);
    }
    let denom = model.lambda(2, &uk)? * kernel.f_set(v, std::slice::from_ref(&uk))?;
    if denom.is_zero() {
        return Err(Error::Pole(format!(
            "recursion coefficient lambda_2 f(v, {uk}) vanishes"
        )));
    }
    Ok(rhs
        .into_iter()
        .map(|x| x / denom.clone())
        .collect())
}

/// Recursion stripping the last `v` parameter:
///
/// ```text
/// lambda_2(v_b) f(v_b, u) B^{a,b}(u; v) =
///     T_23(v_b) B^{a,b-1}(u; v \ v_b)
///   + sum_j g(v_b, u_j) f(u_j, u \ u_j) T_13(v_b) B^{a-1,b-1}(u \ u_j; v \ v_b)
/// ```
///
/// with the base `B^{a,0}` taken from the first explicit formula.
fn recursion_b<F: Field>(
    model: &ChainModel<F>,
    cache: &OpCache<F>,
    u: &ParamSet<F>,
    v: &ParamSet<F>,
) -> Result<Vec<F>> {
    if v.is_empty() {
        let label = BetheLabel::new(u.clone(), ParamSet::empty());
        return explicit_sum(model, cache, &label, BetheVariant::Explicit1);
    }
    let kernel = model.kernel();
    let last = v.len() - 1;
    let vk = v[last].clone();
    let v_rest = v.without(last);
    let mut rhs = cache.apply_product(
        Creator::T23,
        &ParamSet::new(vec![vk.clone()]),
        &recursion_b(model, cache, u, &v_rest)?,
    )?;
    for j in 0..u.len() {
        let uj = u[j].clone();
        let u_rest = u.without(j);
        let coeff = kernel.g(&vk, &uj)? * kernel.f_set(std::slice::from_ref(&uj), &u_rest)?;
        if coeff.is_zero() {
            continue;
        }
        let sub = recursion_b(model, cache, &u_rest, &v_rest)?;
        let term = cache.apply_product(Creator::T13, &ParamSet::new(vec![vk.clone()]), &sub)?;
        vec_axpy(&mut rhs, &coeff, &term);
    }
    let denom = model.lambda(2, &vk)? * kernel.f_set(std::slice::from_ref(&vk), u)?;
    if denom.is_zero() {
        return Err(Error::Pole(format!(
            "recursion coefficient lambda_2 f({vk}, u) vanishes"
        )));
    }
    Ok(rhs
        .into_iter()
        .map(|x| x / denom.clone())
        .collect())
}

/// Builds `B^{a,b}(u; v)` on the chain by the chosen construction.
pub fn bethe_vector<F: Field>(
    model: &ChainModel<F>,
    label: &BetheLabel<F>,
    variant: BetheVariant,
) -> Result<StateVector<F>> {
    label.require_generic()?;
    let all_points = label.u.union(&label.v);
    let cache = OpCache::build(model, &all_points)?;
    let coords = match variant {
        BetheVariant::RecursionA => recursion_a(model, &cache, &label.u, &label.v)?,
        BetheVariant::RecursionB => recursion_b(model, &cache, &label.u, &label.v)?,
        _ => explicit_sum(model, &cache, label, variant)?,
    };
    Ok(StateVector {
        coords,
        label: Some(label.clone()),
        weight_empty: weight_space_empty(model, label),
    })
}

/// Builds the dual vector `C^{a,b}(u; v)` as a row vector.
///
/// The construction is the image of the first explicit formula under the
/// transposition antimorphism `T_ij -> T_ji` (which reverses products):
/// the same partition coefficients, with `<0| T_32(v_II) T_31(u_I)
/// T_21(u_II)` in place of `T_12(u_II) T_13(u_I) T_23(v_II) |0>`.
/// The normalization this fixes is certified by exact agreement of the
/// bilinear pairing `C . B` with the partition-sum scalar product formula.
pub fn dual_bethe_vector<F: Field>(
    model: &ChainModel<F>,
    label: &BetheLabel<F>,
) -> Result<StateVector<F>> {
    label.require_generic()?;
    let kernel = model.kernel();
    // row-side cache: T_21, T_31, T_32 at each point
    let all_points = label.u.union(&label.v);
    let mut points: Vec<F> = Vec::new();
    let mut ops: Vec<[Mat<F>; 3]> = Vec::new();
    for p in all_points.iter() {
        if points.iter().any(|q| q == p) {
            continue;
        }
        let mono = model.monodromy(p)?;
        points.push(p.clone());
        ops.push([
            mono.entry(2, 1).clone(),
            mono.entry(3, 1).clone(),
            mono.entry(3, 2).clone(),
        ]);
    }
    let op_for = |slot: usize, x: &F| -> Result<&Mat<F>> {
        let idx = points
            .iter()
            .position(|p| p == x)
            .ok_or_else(|| Error::Model(format!("{x} was not among the cached points")))?;
        Ok(&ops[idx][slot])
    };
    let vac_row = model.vacuum();
    let mut total = vec![F::zero(); model.dim()];
    joint_partition_sum(&label.u, &label.v, |_k, ui, uii, vi, vii| {
        if sets_coincide(vii, &label.u) {
            return Ok(F::zero());
        }
        let iof = ik_over_f(kernel, vi, ui)?;
        if iof.is_zero() {
            return Ok(F::zero());
        }
        let num = kernel.f_set(vii, vi)? * kernel.f_set(uii, ui)?;
        let den = model.lambda2_set(vii)?
            * model.lambda2_set(&label.u)?
            * kernel.f_set(vii, &label.u)?;
        let coeff = div_nz(iof * num, den, "dual partition denominator")?;
        if coeff.is_zero() {
            return Ok(F::zero());
        }
        // <0| T_32(v_II) T_31(u_I) T_21(u_II): left-to-right row action
        let mut row = vac_row.clone();
        for x in vii.iter() {
            row = op_for(2, x)?.vecmat(&row);
        }
        for x in ui.iter() {
            row = op_for(1, x)?.vecmat(&row);
        }
        for x in uii.iter() {
            row = op_for(0, x)?.vecmat(&row);
        }
        vec_axpy(&mut total, &coeff, &row);
        Ok(F::zero())
    })?;
    Ok(StateVector {
        coords: total,
        label: Some(label.clone()),
        weight_empty: weight_space_empty(model, label),
    })
}
