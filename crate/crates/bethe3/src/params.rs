//! Parameter multisets, ordered partitions, and sums over partitions.
//!
//! The formulas implemented by this crate are all of the shape "sum over
//! ways of splitting a set of spectral parameters into an ordered pair of
//! subsets, of a product of rate functions". This module owns the small
//! combinatorial machinery for that: lexicographic `k`-subsets, single and
//! joint partition sums, and a deterministic parallel reduction for the
//! larger joint sums. It also provides the generic-position sampler used by
//! randomized checks.

use num::{One, Zero};
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Field, Rat};

/// An ordered list of spectral parameters.
///
/// Sets in formulas are ordered tuples here; the formulas themselves are
/// symmetric in each set, so the order only has to be used consistently.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<F>(pub Vec<F>);

impl<F: Field> ParamSet<F> {
    pub fn new(values: Vec<F>) -> Self {
        ParamSet(values)
    }

    pub fn empty() -> Self {
        ParamSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The set with element `j` removed.
    pub fn without(&self, j: usize) -> ParamSet<F> {
        let mut v = self.0.clone();
        v.remove(j);
        ParamSet(v)
    }

    /// Every element shifted by `delta`.
    pub fn shifted(&self, delta: &F) -> ParamSet<F> {
        ParamSet(self.0.iter().map(|x| x.clone() + delta.clone()).collect())
    }

    /// The sub-tuple at `indices` (ascending positions into `self`).
    pub fn subset(&self, indices: &[usize]) -> ParamSet<F> {
        ParamSet(indices.iter().map(|&i| self.0[i].clone()).collect())
    }

    /// Concatenation, preserving order.
    pub fn union(&self, other: &ParamSet<F>) -> ParamSet<F> {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        ParamSet(v)
    }

    pub fn push(&mut self, x: F) {
        self.0.push(x);
    }

    /// Checks pairwise distinctness; names the offending pair on failure.
    pub fn require_distinct(&self, what: &str) -> Result<()> {
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                if self.0[i] == self.0[j] {
                    return Err(Error::DegenerateRoots(format!(
                        "{what}: entries {i} and {j} coincide at {}",
                        self.0[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks no element of `self` equals an element of `other`.
    pub fn require_disjoint(&self, other: &ParamSet<F>, what: &str) -> Result<()> {
        for (i, x) in self.0.iter().enumerate() {
            for (j, y) in other.0.iter().enumerate() {
                if x == y {
                    return Err(Error::DegenerateRoots(format!(
                        "{what}: entry {i} of the first set equals entry {j} of the second at {x}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl<F> std::ops::Deref for ParamSet<F> {
    type Target = [F];
    fn deref(&self) -> &[F] {
        &self.0
    }
}

impl<F: Field> std::fmt::Display for ParamSet<F> {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fmt, "{{")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(fmt, ", ")?;
            }
            write!(fmt, "{x}")?;
        }
        write!(fmt, "}}")
    }
}

/// One ordered two-block split of a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Bipartition<F> {
    pub first: ParamSet<F>,
    pub second: ParamSet<F>,
}

/// All ascending `k`-element index subsets of `0..n`, lexicographically.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in (i + 1)..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Splits `set` into (chosen, rest) for one ascending index subset.
pub fn split_at_indices<F: Field>(set: &ParamSet<F>, indices: &[usize]) -> Bipartition<F> {
    let mut in_first = vec![false; set.len()];
    for &i in indices {
        in_first[i] = true;
    }
    let mut first = Vec::with_capacity(indices.len());
    let mut second = Vec::with_capacity(set.len() - indices.len());
    for (i, x) in set.iter().enumerate() {
        if in_first[i] {
            first.push(x.clone());
        } else {
            second.push(x.clone());
        }
    }
    Bipartition {
        first: ParamSet(first),
        second: ParamSet(second),
    }
}

/// Sum of `term(first, second)` over all splits of `set` with `|first| = k`.
///
/// `term` may fail (e.g. a rate-function pole at a degenerate sample); the
/// first failure aborts the sum.
pub fn partition_sum<F: Field>(
    set: &ParamSet<F>,
    k: usize,
    mut term: impl FnMut(&ParamSet<F>, &ParamSet<F>) -> Result<F>,
) -> Result<F> {
    let mut acc = F::zero();
    for idx in k_subsets(set.len(), k) {
        let parts = split_at_indices(set, &idx);
        acc = acc + term(&parts.first, &parts.second)?;
    }
    Ok(acc)
}

/// Sum over simultaneous equal-size splits of two sets.
///
/// For each `k` from 0 to `min(|xs|, |ys|)` and each pair of splits with
/// `|xs_I| = |ys_I| = k`, adds `term(k, xs_I, xs_II, ys_I, ys_II)`.
pub fn joint_partition_sum<F: Field>(
    xs: &ParamSet<F>,
    ys: &ParamSet<F>,
    mut term: impl FnMut(usize, &ParamSet<F>, &ParamSet<F>, &ParamSet<F>, &ParamSet<F>) -> Result<F>,
) -> Result<F> {
    let mut acc = F::zero();
    for k in 0..=xs.len().min(ys.len()) {
        for xi in k_subsets(xs.len(), k) {
            let xparts = split_at_indices(xs, &xi);
            for yi in k_subsets(ys.len(), k) {
                let yparts = split_at_indices(ys, &yi);
                acc = acc
                    + term(
                        k,
                        &xparts.first,
                        &xparts.second,
                        &yparts.first,
                        &yparts.second,
                    )?;
            }
        }
    }
    Ok(acc)
}

/// Number of terms [`joint_partition_sum`] visits for set sizes `a`, `b`.
pub fn joint_partition_terms(a: usize, b: usize) -> u128 {
    (0..=a.min(b)).map(|k| binomial(a, k) * binomial(b, k)).sum()
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Parallel version of [`joint_partition_sum`].
///
/// The term list is materialized as index pairs, split into fixed-size
/// chunks, and each chunk is summed left-to-right before the chunk sums are
/// combined in chunk order — so float results are bit-identical to the
/// serial fold regardless of thread count. `term` must be infallible here;
/// the parallel path is only used once a serial probe of the same formula
/// has established that the sample is pole-free.
pub fn joint_partition_sum_parallel<F: Field>(
    xs: &ParamSet<F>,
    ys: &ParamSet<F>,
    term: impl Fn(usize, &ParamSet<F>, &ParamSet<F>, &ParamSet<F>, &ParamSet<F>) -> F + Sync,
) -> F {
    const CHUNK: usize = 64;
    let mut jobs: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    for k in 0..=xs.len().min(ys.len()) {
        for xi in k_subsets(xs.len(), k) {
            for yi in k_subsets(ys.len(), k) {
                jobs.push((k, xi.clone(), yi.clone()));
            }
        }
    }
    let chunk_sums: Vec<F> = jobs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = F::zero();
            for (k, xi, yi) in chunk {
                let xparts = split_at_indices(xs, xi);
                let yparts = split_at_indices(ys, yi);
                acc = acc
                    + term(
                        *k,
                        &xparts.first,
                        &xparts.second,
                        &yparts.first,
                        &yparts.second,
                    );
            }
            acc
        })
        .collect();
    let mut total = F::zero();
    for s in chunk_sums {
        total = total + s;
    }
    total
}

/// Generic-position sampler for spectral parameters.
///
/// Draws rational candidates `n/d` with `n in [-50, 50]`, `d in [1, 10]`
/// and rejects any candidate whose difference with an already-drawn value
/// lands in `{0, +-c, +-2c}` (in units of `c = 1` on the rational side).
/// The `2c` margin matters because several formulas evaluate rates at
/// arguments shifted by `c`, so a raw difference of `2c` becomes a pole
/// after shifting both sides in opposite directions. Candidates are drawn
/// on exact rationals and converted, so a seed yields the same points in
/// every arithmetic mode.
pub struct DrawPool {
    rng: ChaCha12Rng,
    taken: Vec<Rat>,
}

impl DrawPool {
    pub fn new(seed: u64) -> Self {
        DrawPool {
            rng: ChaCha12Rng::seed_from_u64(seed),
            taken: Vec::new(),
        }
    }

    /// Seed derived from a check name, so suites stay independent.
    pub fn for_check(name: &str, seed: u64) -> Self {
        // FNV-1a over the name, folded into the user seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        DrawPool::new(h ^ seed)
    }

    fn next_rational(&mut self) -> Rat {
        // The window widens once rejections pile up, so a long-lived pool
        // cannot exhaust its value space: each taken point forbids five
        // values, and the base window holds only a few hundred.
        let mut attempts: u32 = 0;
        let mut span: i64 = 50;
        loop {
            let num: i64 = self.rng.random_range(-span..=span);
            let den: i64 = self.rng.random_range(1..=10);
            let cand = <Rat as Field>::from_ratio(num, den);
            let c = Rat::one();
            let two_c = <Rat as Field>::from_int(2);
            let ok = self.taken.iter().all(|t| {
                let d = cand.clone() - t.clone();
                !d.is_zero()
                    && d != c
                    && d != -c.clone()
                    && d != two_c
                    && d != -two_c.clone()
            });
            if ok {
                self.taken.push(cand.clone());
                return cand;
            }
            attempts += 1;
            if attempts % 200 == 0 && span < (1 << 40) {
                span *= 2;
            }
        }
    }

    /// One fresh parameter, in the target field.
    pub fn draw<F: Field>(&mut self) -> F {
        let r = self.next_rational();
        let (n, d) = rat_parts(&r);
        F::from_ratio(n, d)
    }

    /// `n` fresh parameters.
    pub fn draw_set<F: Field>(&mut self, n: usize) -> ParamSet<F> {
        ParamSet((0..n).map(|_| self.draw()).collect())
    }
}

fn rat_parts(r: &Rat) -> (i64, i64) {
    use num::ToPrimitive;
    (
        r.numer().to_i64().expect("sampler numerator fits i64"),
        r.denom().to_i64().expect("sampler denominator fits i64"),
    )
}
