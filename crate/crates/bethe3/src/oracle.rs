//! Dense realization of the monodromy algebra on a fundamental spin chain.
//!
//! This is the ground-truth half of the crate: a `3^L`-dimensional
//! construction of the monodromy matrix as an ordered product of R-matrix
//! factors, one per site, from which transfer matrices, vacuum weights,
//! and local spin operators are obtained by plain linear algebra. Nothing
//! here knows about partition-sum formulas; agreement between this module
//! and the formula modules is what the test suites certify.
//!
//! Conventions:
//!
//! * The R-matrix is `R(x,y) = I + g(x,y) P` on `C^3 (x) C^3` with `P` the
//!   factor swap.
//! * The monodromy is `T(x) = R^{01}(x, xi_1) R^{02}(x, xi_2) ... R^{0L}(x,
//!   xi_L)` with auxiliary space `0`; `T_ij(x)` is its `(i,j)` auxiliary
//!   block, an operator on the chain space. Site 1 is the slowest tensor
//!   index.
//! * The vacuum is `e_1^{(x) L}`. With these conventions `T_ij` with `i > j`
//!   annihilates it, `T_ij` with `i < j` creates excitations, and the
//!   diagonal weights are `lambda_1(x) = prod_l f(x, xi_l)`,
//!   `lambda_2 = lambda_3 = 1`, so the weight ratios are
//!   `r_1(x) = prod_l f(x, xi_l)` and `r_3(x) = 1`.

use crate::error::{Error, Result};
use crate::field::{Field, RateKernel};
use crate::linalg::{invert_or, vec_mag, Mat};
use crate::params::ParamSet;

/// `R(x,y) = I + g(x,y) P` as a 9x9 matrix, first tensor factor slowest.
pub fn r_matrix<F: Field>(kernel: &RateKernel<F>, x: &F, y: &F) -> Result<Mat<F>> {
    let g = kernel.g(x, y)?;
    let mut m: Mat<F> = Mat::identity(9);
    for a in 0..3 {
        for b in 0..3 {
            let (row, col) = (a * 3 + b, b * 3 + a);
            *m.at_mut(row, col) = m.at(row, col).clone() + g.clone();
        }
    }
    Ok(m)
}

/// Provider of the weight ratios `r_1`, `r_3` that on-shell formulas need.
///
/// The chain model supplies the fundamental-representation values; see
/// [`TabulatedWeights`] for checking formulas at weight values a fundamental
/// chain cannot realize.
pub trait Weights<F: Field>: Sync {
    fn r1(&self, x: &F) -> Result<F>;
    fn r3(&self, x: &F) -> Result<F>;
    /// Branch-fixed logarithm of `r_1`: the sum of principal logarithms,
    /// one per site factor. Float mode only.
    fn ln_r1(&self, x: &F) -> Result<F>;
    /// Branch-fixed logarithm of `r_3` (identically zero for the chain).
    fn ln_r3(&self, x: &F) -> Result<F>;
    /// `d/dx log r_1(x)`, needed by on-shell Jacobians.
    fn dlog_r1(&self, x: &F) -> Result<F>;
    /// `d/dx log r_3(x)`.
    fn dlog_r3(&self, x: &F) -> Result<F>;
}

/// An inhomogeneous fundamental chain on `L` sites.
#[derive(Debug, Clone)]
pub struct ChainModel<F: Field> {
    kernel: RateKernel<F>,
    xis: ParamSet<F>,
    /// Set when the inhomogeneities are pairwise distinct with no
    /// difference equal to `+-c`; local-operator reconstruction and the
    /// regularized transfer matrices require it.
    generic_sites: bool,
}

impl<F: Field> ChainModel<F> {
    /// A chain with generic inhomogeneities: pairwise distinct and never
    /// differing by `+-c`, so every evaluation point stays off the rate
    /// poles and the regularized transfer matrices are invertible.
    pub fn new(kernel: RateKernel<F>, xis: ParamSet<F>) -> Result<Self> {
        if xis.is_empty() {
            return Err(Error::Model("a chain needs at least one site".into()));
        }
        xis.require_distinct("inhomogeneities")?;
        let c = kernel.c().clone();
        for i in 0..xis.len() {
            for j in 0..xis.len() {
                if i != j && xis[i].clone() - xis[j].clone() == c {
                    return Err(Error::Model(format!(
                        "inhomogeneities {j} and {i} differ by c; the chain would sit on a pole"
                    )));
                }
            }
        }
        Ok(ChainModel {
            kernel,
            xis,
            generic_sites: true,
        })
    }

    /// A chain with arbitrary (possibly repeated) inhomogeneities, float
    /// mode only. Local-operator reconstruction is disabled because its
    /// evaluation points sit on poles when sites coincide.
    pub fn new_relaxed(kernel: RateKernel<F>, xis: ParamSet<F>) -> Result<Self> {
        if F::EXACT {
            return Err(Error::Model(
                "degenerate inhomogeneities are only supported in float mode".into(),
            ));
        }
        if xis.is_empty() {
            return Err(Error::Model("a chain needs at least one site".into()));
        }
        Ok(ChainModel {
            kernel,
            xis,
            generic_sites: false,
        })
    }

    /// Homogeneous chain (`xi_l = 0` for all sites), float mode only.
    pub fn homogeneous(kernel: RateKernel<F>, sites: usize) -> Result<Self> {
        Self::new_relaxed(kernel, ParamSet::new(vec![F::zero(); sites]))
    }

    pub fn sites(&self) -> usize {
        self.xis.len()
    }

    pub fn dim(&self) -> usize {
        3usize.pow(self.sites() as u32)
    }

    pub fn kernel(&self) -> &RateKernel<F> {
        &self.kernel
    }

    pub fn xis(&self) -> &ParamSet<F> {
        &self.xis
    }

    /// The chain vacuum `e_1^{(x) L}`.
    pub fn vacuum(&self) -> Vec<F> {
        let mut v = vec![F::zero(); self.dim()];
        v[0] = F::one();
        v
    }

    /// Vacuum weight `lambda_j(x)` of `T_jj`.
    pub fn lambda(&self, j: usize, x: &F) -> Result<F> {
        match j {
            1 => self.kernel.f_set(std::slice::from_ref(x), &self.xis),
            2 | 3 => Ok(F::one()),
            _ => Err(Error::Model(format!("weight index {j} out of range"))),
        }
    }

    /// `prod_x lambda_2(x)` over a set — identically 1 here, but kept so
    /// formula code mirrors the written normalizations.
    pub fn lambda2_set(&self, xs: &[F]) -> Result<F> {
        let mut acc = F::one();
        for x in xs {
            acc = acc * self.lambda(2, x)?;
        }
        Ok(acc)
    }

    /// The full monodromy at `x`, as nine `3^L x 3^L` blocks.
    pub fn monodromy(&self, x: &F) -> Result<Monodromy<F>> {
        let mut gvals = Vec::with_capacity(self.sites());
        for xi in self.xis.iter() {
            gvals.push(self.kernel.g(x, xi)?);
        }
        Ok(self.monodromy_from_gvals(&gvals, None))
    }

    /// The residue-style limit of the monodromy at `x = xi_site`: the
    /// divergent factor `R^{0,site}` is replaced by `c P`, every other
    /// factor is evaluated at `xi_site`. Sites are 1-based.
    pub fn monodromy_regularized(&self, site: usize) -> Result<Monodromy<F>> {
        if !(1..=self.sites()).contains(&site) {
            return Err(Error::Model(format!("site {site} out of range")));
        }
        let p = site - 1;
        let x = self.xis[p].clone();
        let mut gvals = Vec::with_capacity(self.sites());
        for (l, xi) in self.xis.iter().enumerate() {
            gvals.push(if l == p {
                F::zero() // unused: this factor becomes c P
            } else {
                self.kernel.g(&x, xi)?
            });
        }
        Ok(self.monodromy_from_gvals(&gvals, Some(p)))
    }

    /// Builds the block matrix by multiplying per-site factors left to
    /// right. The auxiliary `(m, j)` block of the factor at site `l` is
    /// `delta_mj I + g_l E_jm` on that site (or `c E_jm` for a factor
    /// replaced by `c P`).
    fn monodromy_from_gvals(&self, gvals: &[F], swap_site: Option<usize>) -> Monodromy<F> {
        let mut blocks: Vec<Mat<F>> = (0..9)
            .map(|idx| {
                if idx / 3 == idx % 3 {
                    Mat::identity(1)
                } else {
                    Mat::zeros(1, 1)
                }
            })
            .collect();
        for (l, gval) in gvals.iter().enumerate() {
            let site_blocks: Vec<Mat<F>> = (0..9)
                .map(|idx| {
                    let (m, j) = (idx / 3, idx % 3);
                    let mut b: Mat<F> = if m == j && swap_site != Some(l) {
                        Mat::identity(3)
                    } else {
                        Mat::zeros(3, 3)
                    };
                    let coeff = if swap_site == Some(l) {
                        self.kernel.c().clone()
                    } else {
                        gval.clone()
                    };
                    *b.at_mut(j, m) = b.at(j, m).clone() + coeff;
                    b
                })
                .collect();
            let mut next: Vec<Mat<F>> = Vec::with_capacity(9);
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc: Option<Mat<F>> = None;
                    for m in 0..3 {
                        let term = blocks[i * 3 + m].kron(&site_blocks[m * 3 + j]);
                        acc = Some(match acc {
                            None => term,
                            Some(a) => a.add(&term),
                        });
                    }
                    next.push(acc.unwrap());
                }
            }
            blocks = next;
        }
        Monodromy { blocks }
    }

    /// Transfer matrix `t(x) = T_11 + T_22 + T_33`.
    pub fn transfer(&self, x: &F) -> Result<Mat<F>> {
        Ok(self.monodromy(x)?.transfer())
    }

    /// Twisted transfer matrix `sum_s kappa_s T_ss(x)`.
    pub fn transfer_twisted(&self, x: &F, kappa: &[F; 3]) -> Result<Mat<F>> {
        Ok(self.monodromy(x)?.transfer_twisted(kappa))
    }

    /// The elementary matrix `E_ij` placed at `site` (1-based, indices
    /// 1-based), identity on every other site.
    pub fn elementary_site(&self, site: usize, i: usize, j: usize) -> Mat<F> {
        let mut e3 = Mat::zeros(3, 3);
        *e3.at_mut(i - 1, j - 1) = F::one();
        let mut out = Mat::identity(1);
        for l in 1..=self.sites() {
            let factor = if l == site { &e3 } else { &Mat::identity(3) };
            out = out.kron(factor);
        }
        out
    }

    /// Reconstructs `E_ij` at `site` from monodromy entries.
    ///
    /// Writing `hat t(xi_m)` for the regularized transfer matrix of
    /// [`Self::monodromy_regularized`] and `hat T` for its monodromy,
    ///
    /// ```text
    /// E_ij at site l  =  [ prod_{m=l+1..L} hat t(xi_m) ]
    ///                    . hat T_ji(xi_l)
    ///                    . [ prod_{m=l..L} hat t(xi_m) ]^(-1)
    /// ```
    ///
    /// with all products ascending in `m` (the regularized transfer
    /// matrices commute, so the order inside each product is immaterial).
    /// Note the index transpose: the `(j,i)` monodromy entry produces the
    /// `(i,j)` site matrix. The reconstruction identity — checked by a
    /// dedicated test against [`Self::elementary_site`] — anchors the
    /// dressing products at the right end of the chain because the
    /// monodromy multiplies its site factors left to right.
    pub fn local_operator(&self, site: usize, i: usize, j: usize) -> Result<Mat<F>> {
        if !self.generic_sites {
            return Err(Error::Model(
                "local-operator reconstruction needs pairwise-generic inhomogeneities".into(),
            ));
        }
        if !(1..=self.sites()).contains(&site) {
            return Err(Error::Model(format!("site {site} out of range")));
        }
        let last = self.sites();
        let mut num = Mat::identity(self.dim());
        for m in (site + 1)..=last {
            num = num.mul(&self.monodromy_regularized(m)?.transfer());
        }
        num = num.mul(self.monodromy_regularized(site)?.entry(j, i));
        let mut den = Mat::identity(self.dim());
        for m in site..=last {
            den = den.mul(&self.monodromy_regularized(m)?.transfer());
        }
        let den_inv = invert_or(&den, "the product of regularized transfer matrices")?;
        Ok(num.mul(&den_inv))
    }

    /// Verifies the highest-weight structure at one probe point: diagonal
    /// entries reproduce `lambda_j`, lower-triangular entries annihilate
    /// the vacuum, upper-triangular ones do not.
    pub fn check_vacuum_weights(&self, x: &F, tol: f64) -> Result<()> {
        let mono = self.monodromy(x)?;
        let vac = self.vacuum();
        for jj in 1..=3 {
            let got = mono.entry(jj, jj).matvec(&vac);
            let lam = self.lambda(jj, x)?;
            let want: Vec<F> = vac.iter().map(|e| lam.clone() * e.clone()).collect();
            if !got
                .iter()
                .zip(want.iter())
                .all(|(a, b)| a.eq_tol(b, tol))
            {
                return Err(Error::Model(format!(
                    "T_{jj}{jj} does not act diagonally on the vacuum with weight {lam}"
                )));
            }
        }
        for i in 1..=3 {
            for j in 1..=3 {
                if i == j {
                    continue;
                }
                let got = mono.entry(i, j).matvec(&vac);
                let mag = vec_mag(&got);
                // Lower-triangular entries annihilate any highest-weight
                // vacuum. T_23 also kills this particular vacuum — not an
                // algebra property, but weight counting: e_1^L has no
                // level-2 content for T_23 to promote. Creation from the
                // vacuum happens through T_12 and T_13 alone.
                let expect_zero = i > j || (i, j) == (2, 3);
                if expect_zero && mag > tol {
                    return Err(Error::Model(format!(
                        "T_{i}{j} should annihilate the vacuum but produced magnitude {mag:e}"
                    )));
                }
                if !expect_zero && mag <= tol {
                    return Err(Error::Model(format!(
                        "T_{i}{j} should create excitations but annihilated the vacuum"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl<F: Field> Weights<F> for ChainModel<F> {
    fn r1(&self, x: &F) -> Result<F> {
        self.kernel.f_set(std::slice::from_ref(x), &self.xis)
    }

    fn r3(&self, _x: &F) -> Result<F> {
        Ok(F::one())
    }

    fn ln_r1(&self, x: &F) -> Result<F> {
        let mut acc = F::zero();
        for xi in self.xis.iter() {
            let fac = self.kernel.f(x, xi)?;
            let ln = fac.try_ln().ok_or_else(|| {
                Error::NotApplicable(format!(
                    "no logarithm for {} (exact mode or zero factor)",
                    F::mode_name()
                ))
            })?;
            acc = acc + ln;
        }
        Ok(acc)
    }

    fn ln_r3(&self, _x: &F) -> Result<F> {
        Ok(F::zero())
    }

    fn dlog_r1(&self, x: &F) -> Result<F> {
        // d/dx log f(x, xi) = 1/(x - xi + c) - 1/(x - xi) = -t(x, xi)/c
        let mut acc = F::zero();
        for xi in self.xis.iter() {
            acc = acc - self.kernel.t(x, xi)? / self.kernel.c().clone();
        }
        Ok(acc)
    }

    fn dlog_r3(&self, _x: &F) -> Result<F> {
        Ok(F::zero())
    }
}

/// Weight ratios given by finite lookup tables.
///
/// The determinant identities relate formulas that evaluate `r_1`, `r_3`
/// only at the Bethe parameters themselves, so a table over those points is
/// enough to check them at weight values no fundamental chain realizes
/// (e.g. `r_3` not identically 1). Lookups compare points exactly.
#[derive(Debug, Clone, Default)]
pub struct TabulatedWeights<F> {
    r1: Vec<(F, F)>,
    r3: Vec<(F, F)>,
}

impl<F: Field> TabulatedWeights<F> {
    pub fn new() -> Self {
        TabulatedWeights {
            r1: Vec::new(),
            r3: Vec::new(),
        }
    }

    pub fn set_r1(&mut self, point: F, value: F) {
        self.r1.retain(|(p, _)| p != &point);
        self.r1.push((point, value));
    }

    pub fn set_r3(&mut self, point: F, value: F) {
        self.r3.retain(|(p, _)| p != &point);
        self.r3.push((point, value));
    }

    fn lookup(table: &[(F, F)], x: &F, name: &str) -> Result<F> {
        table
            .iter()
            .find(|(p, _)| p == x)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::NotApplicable(format!("{name} is not tabulated at {x}")))
    }
}

impl<F: Field> Weights<F> for TabulatedWeights<F> {
    fn r1(&self, x: &F) -> Result<F> {
        Self::lookup(&self.r1, x, "r1")
    }

    fn r3(&self, x: &F) -> Result<F> {
        Self::lookup(&self.r3, x, "r3")
    }

    fn ln_r1(&self, _x: &F) -> Result<F> {
        Err(Error::NotApplicable(
            "tabulated weights carry no logarithm branch".into(),
        ))
    }

    fn ln_r3(&self, _x: &F) -> Result<F> {
        Err(Error::NotApplicable(
            "tabulated weights carry no logarithm branch".into(),
        ))
    }

    fn dlog_r1(&self, _x: &F) -> Result<F> {
        Err(Error::NotApplicable(
            "tabulated weights carry no derivative".into(),
        ))
    }

    fn dlog_r3(&self, _x: &F) -> Result<F> {
        Err(Error::NotApplicable(
            "tabulated weights carry no derivative".into(),
        ))
    }
}

/// The monodromy at one spectral point: nine operator blocks on the chain.
#[derive(Debug, Clone)]
pub struct Monodromy<F> {
    /// Row-major `3x3` of chain-space operators.
    blocks: Vec<Mat<F>>,
}

impl<F: Field> Monodromy<F> {
    /// The `(i,j)` auxiliary block, 1-based.
    pub fn entry(&self, i: usize, j: usize) -> &Mat<F> {
        &self.blocks[(i - 1) * 3 + (j - 1)]
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    /// `t = T_11 + T_22 + T_33`.
    pub fn transfer(&self) -> Mat<F> {
        self.entry(1, 1).add(self.entry(2, 2)).add(self.entry(3, 3))
    }

    /// `sum_s kappa_s T_ss`.
    pub fn transfer_twisted(&self, kappa: &[F; 3]) -> Mat<F> {
        self.entry(1, 1)
            .scale(&kappa[0])
            .add(&self.entry(2, 2).scale(&kappa[1]))
            .add(&self.entry(3, 3).scale(&kappa[2]))
    }

    /// The monodromy as one matrix on (auxiliary space) tensor (chain),
    /// `sum_ij E_ij (x) T_ij`, auxiliary index slowest.
    pub fn aux_embedding(&self) -> Mat<F> {
        let d = self.dim();
        let mut out = Mat::zeros(3 * d, 3 * d);
        for i in 0..3 {
            for j in 0..3 {
                let b = &self.blocks[i * 3 + j];
                for r in 0..d {
                    for cix in 0..d {
                        let v = b.at(r, cix);
                        if !v.is_zero() {
                            *out.at_mut(i * d + r, j * d + cix) = v.clone();
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Rat;
    use crate::params::DrawPool;
    use num::{One, Zero};

    fn kernel() -> RateKernel<Rat> {
        RateKernel::new(Rat::one()).unwrap()
    }

    fn model(seed: u64, sites: usize) -> ChainModel<Rat> {
        let mut pool = DrawPool::new(seed);
        ChainModel::new(kernel(), pool.draw_set(sites)).unwrap()
    }

    #[test]
    fn yang_baxter_holds_at_random_triples() {
        let k = kernel();
        let mut pool = DrawPool::new(7);
        for _ in 0..20 {
            let (x, y, z): (Rat, Rat, Rat) = (pool.draw(), pool.draw(), pool.draw());
            let r12 = r_matrix(&k, &x, &y).unwrap().kron(&Mat::identity(3));
            let r23 = Mat::identity(3).kron(&r_matrix(&k, &y, &z).unwrap());
            // P23 conjugation turns R12 into R13
            let mut p = Mat::zeros(9, 9);
            for a in 0..3 {
                for b in 0..3 {
                    *p.at_mut(a * 3 + b, b * 3 + a) = Rat::one();
                }
            }
            let p23 = Mat::identity(3).kron(&p);
            let r13 = p23.mul(&r_matrix(&k, &x, &z).unwrap().kron(&Mat::identity(3)).mul(&p23));
            let lhs = r12.mul(&r13).mul(&r23);
            let rhs = r23.mul(&r13).mul(&r12);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn r_matrix_is_unitary_up_to_f_factors() {
        let k = kernel();
        let mut pool = DrawPool::new(11);
        let (x, y): (Rat, Rat) = (pool.draw(), pool.draw());
        let prod = r_matrix(&k, &x, &y)
            .unwrap()
            .mul(&r_matrix(&k, &y, &x).unwrap());
        let scale = k.f(&x, &y).unwrap() * k.f(&y, &x).unwrap();
        assert_eq!(prod, Mat::identity(9).scale(&scale));
    }

    #[test]
    fn rtt_exchange_relation_at_two_sites() {
        let k = kernel();
        let mut pool = DrawPool::new(13);
        let m = ChainModel::new(k.clone(), pool.draw_set(2)).unwrap();
        for _ in 0..3 {
            let (x, y): (Rat, Rat) = (pool.draw(), pool.draw());
            let tx = m.monodromy(&x).unwrap();
            let ty = m.monodromy(&y).unwrap();
            let d = m.dim();
            // embed into aux1 (x) aux2 (x) chain
            let t1 = {
                let full = tx.aux_embedding(); // aux (x) chain
                // insert identity aux2 between: kron by hand via block shuffle
                let mut out = Mat::zeros(9 * d, 9 * d);
                for i in 0..3 {
                    for j in 0..3 {
                        for a2 in 0..3 {
                            for r in 0..d {
                                for c in 0..d {
                                    let v = full.at(i * d + r, j * d + c);
                                    if !v.is_zero() {
                                        *out.at_mut((i * 3 + a2) * d + r, (j * 3 + a2) * d + c) =
                                            v.clone();
                                    }
                                }
                            }
                        }
                    }
                }
                out
            };
            let t2 = Mat::identity(3).kron(&ty.aux_embedding());
            let r12 = r_matrix(&k, &x, &y).unwrap().kron(&Mat::identity(d));
            let lhs = r12.mul(&t1).mul(&t2);
            let rhs = t2.mul(&t1).mul(&r12);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn transfer_matrices_commute_plain_and_twisted() {
        let m = model(17, 3);
        let mut pool = DrawPool::new(19);
        let (x, y): (Rat, Rat) = (pool.draw(), pool.draw());
        let tx = m.transfer(&x).unwrap();
        let ty = m.transfer(&y).unwrap();
        assert_eq!(tx.mul(&ty), ty.mul(&tx));
        let kappa = [
            <Rat as Field>::from_ratio(2, 3),
            <Rat as Field>::from_ratio(5, 7),
            <Rat as Field>::from_int(4),
        ];
        let tkx = m.transfer_twisted(&x, &kappa).unwrap();
        let tky = m.transfer_twisted(&y, &kappa).unwrap();
        assert_eq!(tkx.mul(&tky), tky.mul(&tkx));
    }

    #[test]
    fn vacuum_weights_and_annihilators() {
        let m = model(23, 3);
        let mut pool = DrawPool::new(29);
        let x: Rat = pool.draw();
        m.check_vacuum_weights(&x, 0.0).unwrap();
        // lambda_1 is the product of f over sites, lambda_2 = lambda_3 = 1
        let l1 = m.lambda(1, &x).unwrap();
        let f_prod = m.kernel().f_set(std::slice::from_ref(&x), m.xis()).unwrap();
        assert_eq!(l1, f_prod);
        assert_eq!(m.lambda(2, &x).unwrap(), Rat::one());
        assert_eq!(<ChainModel<Rat> as Weights<Rat>>::r3(&m, &x).unwrap(), Rat::one());
    }

    #[test]
    fn single_site_monodromy_is_the_r_matrix() {
        let k = kernel();
        let mut pool = DrawPool::new(31);
        let xi: Rat = pool.draw();
        let m = ChainModel::new(k.clone(), ParamSet::new(vec![xi.clone()])).unwrap();
        let x: Rat = pool.draw();
        let mono = m.monodromy(&x).unwrap();
        assert_eq!(mono.aux_embedding(), r_matrix(&k, &x, &xi).unwrap());
        // T_11 |0> = f(x, xi) |0>
        let vac = m.vacuum();
        let got = mono.entry(1, 1).matvec(&vac);
        let f = k.f(&x, &xi).unwrap();
        assert_eq!(got, vec![f, Rat::zero(), Rat::zero()]);
    }

    #[test]
    fn local_operators_reconstruct_elementary_matrices() {
        for sites in [2usize, 3] {
            let m = model(37 + sites as u64, sites);
            for site in 1..=sites {
                for i in 1..=3 {
                    for j in 1..=3 {
                        let got = m.local_operator(site, i, j).unwrap();
                        let want = m.elementary_site(site, i, j);
                        assert_eq!(got, want, "site {site}, entry ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn local_operator_rejects_degenerate_sites() {
        let k = RateKernel::new(num::complex::Complex64::new(1.0, 0.0)).unwrap();
        let m = ChainModel::homogeneous(k, 2).unwrap();
        assert!(m.local_operator(1, 1, 2).is_err());
    }

    #[test]
    fn tabulated_weights_look_up_exact_points() {
        let mut w = TabulatedWeights::<Rat>::new();
        let p = <Rat as Field>::from_ratio(1, 2);
        w.set_r1(p.clone(), <Rat as Field>::from_int(5));
        assert_eq!(w.r1(&p).unwrap(), <Rat as Field>::from_int(5));
        assert!(w.r1(&<Rat as Field>::from_int(9)).is_err());
        assert!(w.dlog_r1(&p).is_err());
    }
}
