//! Unital *-subalgebras of a multi-matrix algebra: exact span closure,
//! conditional expectation by solving the Gram system, relative commutants,
//! and certified spectral gap data for a pair.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use super::algebra::{BlockMatrix, MultiMatrixAlgebra};
use super::matrix::Mat;
use super::FindimError;
use crate::exactnum::{dyadic_sqrt, Dyadic, GaussianRational};

/// Row echelon accumulator over flattened coordinate vectors, used to keep
/// the basis linearly independent during span closure.
struct Echelon {
    rows: Vec<Vec<GaussianRational>>,
    pivots: Vec<usize>,
}

impl Echelon {
    fn new() -> Self {
        Echelon { rows: Vec::new(), pivots: Vec::new() }
    }

    fn reduce(&self, v: &mut [GaussianRational]) {
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if v[p].is_zero() {
                continue;
            }
            let factor = v[p].clone();
            for (vi, ri) in v.iter_mut().zip(row) {
                *vi = vi.sub(&factor.mul(ri));
            }
        }
    }

    /// Insert if independent; returns false when `v` lies in the span.
    fn insert(&mut self, mut v: Vec<GaussianRational>) -> bool {
        self.reduce(&mut v);
        let Some(p) = v.iter().position(|e| !e.is_zero()) else {
            return false;
        };
        let inv = GaussianRational::one().div(&v[p]).unwrap();
        for e in v.iter_mut() {
            *e = e.mul(&inv);
        }
        self.rows.push(v);
        self.pivots.push(p);
        true
    }

    fn contains(&self, v: &[GaussianRational]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w);
        w.iter().all(|e| e.is_zero())
    }
}

/// A unital *-subalgebra, carried as a cached linear basis (always containing
/// the identity and closed under products and adjoints).
#[derive(Debug, Clone)]
pub struct Subalgebra {
    basis: Vec<BlockMatrix>,
    gram: Mat,
}

impl Subalgebra {
    /// Close the generators under products and adjoints by iterated span
    /// growth; terminates because the linear dimension is bounded.
    pub fn generate(
        algebra: &MultiMatrixAlgebra,
        gens: &[BlockMatrix],
    ) -> Result<Subalgebra, FindimError> {
        for g in gens {
            algebra.check_shape(g)?;
        }
        let mut echelon = Echelon::new();
        let mut basis: Vec<BlockMatrix> = Vec::new();
        let mut queue: Vec<BlockMatrix> = Vec::new();
        queue.push(algebra.identity());
        for g in gens {
            queue.push(g.clone());
            queue.push(g.adjoint());
        }
        while let Some(cand) = queue.pop() {
            if !echelon.insert(cand.flatten()) {
                continue;
            }
            // new member: adjoint and products with everything so far
            queue.push(cand.adjoint());
            for b in &basis {
                queue.push(cand.mul(b));
                queue.push(b.mul(&cand));
            }
            queue.push(cand.mul(&cand));
            basis.push(cand);
        }
        let gram = gram_matrix(algebra, &basis);
        Ok(Subalgebra { basis, gram })
    }

    pub fn basis(&self) -> &[BlockMatrix] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// The trace-orthogonal projection onto the subalgebra: the unique
    /// member minimizing the 2-distance to `x`, found by solving the Gram
    /// system exactly. Satisfies `tr(E(x) n) = tr(x n)` for every basis `n`.
    pub fn conditional_expectation(
        &self,
        algebra: &MultiMatrixAlgebra,
        x: &BlockMatrix,
    ) -> Result<BlockMatrix, FindimError> {
        let d = self.basis.len();
        let mut rhs = Mat::zeros(d, 1);
        for (b, nb) in self.basis.iter().enumerate() {
            rhs.set(b, 0, algebra.inner(x, nb));
        }
        let coeffs = self.gram.solve(&rhs).ok_or(FindimError::SingularGram)?;
        let mut out = algebra.zero();
        for (a, na) in self.basis.iter().enumerate() {
            out = out.add(&na.scale(coeffs.get(a, 0)));
        }
        Ok(out)
    }

    /// Exact squared 2-distance from `x` to the subalgebra.
    pub fn distance_sq(
        &self,
        algebra: &MultiMatrixAlgebra,
        x: &BlockMatrix,
    ) -> Result<BigRational, FindimError> {
        let e = self.conditional_expectation(algebra, x)?;
        Ok(algebra.norm_sq(&x.sub(&e)))
    }

    /// `||x - E(x)||_2` within `2^-k`.
    pub fn distance(
        &self,
        algebra: &MultiMatrixAlgebra,
        x: &BlockMatrix,
        k: u32,
    ) -> Result<Dyadic, FindimError> {
        Ok(dyadic_sqrt(&self.distance_sq(algebra, x)?, k)?)
    }

    pub fn contains(&self, x: &BlockMatrix) -> bool {
        let mut echelon = Echelon::new();
        for b in &self.basis {
            echelon.insert(b.flatten());
        }
        echelon.contains(&x.flatten())
    }
}

fn gram_matrix(algebra: &MultiMatrixAlgebra, basis: &[BlockMatrix]) -> Mat {
    // G[b][a] = <n_a, n_b>, so that (G c)[b] = <sum_a c_a n_a, n_b>
    Mat::from_fn(basis.len(), basis.len(), |b, a| algebra.inner(&basis[a], &basis[b]))
}

// ---------------------------------------------------------------------------
// Commutants
// ---------------------------------------------------------------------------

/// Matrix of `x -> x g - g x` on flattened coordinates.
fn commutator_op_matrix(algebra: &MultiMatrixAlgebra, g: &BlockMatrix) -> Mat {
    let dim = algebra.vector_dim();
    let mut a = Mat::zeros(dim, dim);
    let mut offset = 0usize;
    for ((d, _), gb) in algebra.blocks().iter().zip(&g.blocks) {
        let flat = |i: usize, j: usize| offset + i * d + j;
        for i in 0..*d {
            for j in 0..*d {
                let row = flat(i, j);
                for l in 0..*d {
                    // (x g)_{ij} takes x_{il} with weight g_{lj}
                    let cur = a.get(row, flat(i, l)).add(gb.get(l, j));
                    a.set(row, flat(i, l), cur);
                }
                for k in 0..*d {
                    // (g x)_{ij} takes x_{kj} with weight g_{ik}
                    let cur = a.get(row, flat(k, j)).sub(gb.get(i, k));
                    a.set(row, flat(k, j), cur);
                }
            }
        }
        offset += d * d;
    }
    a
}

/// Exact basis of `{x : [x, g] = 0 for all g in gens and g*}`. When the
/// generator list is *-closed this is the relative commutant of the
/// generated subalgebra.
pub fn commutant_basis(
    algebra: &MultiMatrixAlgebra,
    gens: &[BlockMatrix],
) -> Result<Vec<BlockMatrix>, FindimError> {
    let dim = algebra.vector_dim();
    let mut ops: Vec<Mat> = Vec::new();
    for g in gens {
        algebra.check_shape(g)?;
        ops.push(commutator_op_matrix(algebra, g));
        ops.push(commutator_op_matrix(algebra, &g.adjoint()));
    }
    let mut stacked = Mat::zeros(ops.len() * dim, dim);
    for (gi, op) in ops.iter().enumerate() {
        for i in 0..dim {
            for j in 0..dim {
                stacked.set(gi * dim + i, j, op.get(i, j).clone());
            }
        }
    }
    Ok(stacked
        .nullspace()
        .into_iter()
        .map(|v| BlockMatrix::from_flat(algebra, &v))
        .collect())
}

// ---------------------------------------------------------------------------
// Certified spectral gap data
// ---------------------------------------------------------------------------

/// Exact witness behind a constructed spectral gap function `n -> max(t, n+c)`
/// for a generator list of length `t`: a rational `lambda` with
/// `||[x, gens]||^2 >= lambda * d(x, commutant)^2` for all `x`, proved by an
/// exact psd check, together with `4^c * lambda > t`.
#[derive(Debug, Clone)]
pub struct GapCertificate {
    pub gen_count: usize,
    pub shift: u32,
    pub sigma_sq_lower: Option<BigRational>,
    pub commutant_dim: usize,
}

/// Compute `(t, c, certificate)` such that `f(n) = max(t, n + c)` satisfies:
/// for every `x` in the algebra, if `max_i ||[x, g_i]||_2 < 2^-f(n)` over the
/// whole *-closed generator list then `d(x, commutant) < 2^-n`.
///
/// The witness is a rational `lambda > 0` with `H - lambda R` psd, where `H`
/// is the Gram form of the stacked commutator maps and `R` the form of the
/// projection complementary to their kernel; then
/// `d(x, ker)^2 <= ||Phi x||^2 / lambda <= (t / lambda) max_i ||[x,g_i]||^2`
/// and any `c` with `4^c > t / lambda` closes the bound.
pub fn certified_gap_shift(
    algebra: &MultiMatrixAlgebra,
    n_gens: &[BlockMatrix],
) -> Result<(usize, u32, GapCertificate), FindimError> {
    let t = n_gens.len();
    if t == 0 {
        return Err(FindimError::EmptyGeneratorList);
    }
    let dim = algebra.vector_dim();
    // weighted inner product on coordinates
    let mut weights: Vec<BigRational> = Vec::with_capacity(dim);
    for (d, w) in algebra.blocks() {
        for _ in 0..d * d {
            weights.push(w.clone());
        }
    }
    let apply_w = |m: &Mat| -> Mat {
        Mat::from_fn(m.rows(), m.cols(), |i, j| {
            m.get(i, j).mul(&GaussianRational::from_rational(weights[i].clone()))
        })
    };

    let ops: Vec<Mat> = n_gens.iter().map(|g| commutator_op_matrix(algebra, g)).collect();
    let mut h = Mat::zeros(dim, dim);
    for a in &ops {
        h = h.add(&a.adjoint().mul(&apply_w(a)));
    }

    let kernel = commutant_basis(algebra, n_gens)?;
    let r_dim = kernel.len();
    if r_dim == dim {
        // the commutant is everything; the gap statement is vacuous
        let cert = GapCertificate {
            gen_count: t,
            shift: 0,
            sigma_sq_lower: None,
            commutant_dim: r_dim,
        };
        return Ok((t, 0, cert));
    }
    let k_mat = Mat::from_fn(dim, r_dim, |i, j| kernel[j].flatten()[i].clone());
    let kw = apply_w(&k_mat); // W K
    let kgram = k_mat.adjoint().mul(&kw); // K* W K
    let sol = kgram.solve(&k_mat.adjoint().mul(&apply_w(&Mat::identity(dim))))
        .ok_or(FindimError::SingularGram)?;
    let p = k_mat.mul(&sol); // K (K*WK)^-1 K* W
    let q = Mat::identity(dim).sub(&p);
    let r = q.adjoint().mul(&apply_w(&q));

    // largest power of four such that H - lambda R stays psd
    let four = BigRational::from_integer(BigInt::from(4));
    let mut lambda = BigRational::one();
    if h.sub(&r.scale(&GaussianRational::from_rational(lambda.clone()))).is_psd() {
        for _ in 0..20 {
            let next = &lambda * &four;
            let m = h.sub(&r.scale(&GaussianRational::from_rational(next.clone())));
            if m.is_psd() {
                lambda = next;
            } else {
                break;
            }
        }
    } else {
        let mut found = false;
        for _ in 0..40 {
            lambda /= &four;
            let m = h.sub(&r.scale(&GaussianRational::from_rational(lambda.clone())));
            if m.is_psd() {
                found = true;
                break;
            }
        }
        if !found {
            return Err(FindimError::NoGapCertificate);
        }
    }

    // smallest c with 4^c * lambda > t
    let t_rat = BigRational::from_integer(BigInt::from(t as u64));
    let mut c = 0u32;
    let mut pow = lambda.clone();
    while pow <= t_rat {
        pow *= &four;
        c += 1;
        if c > 200 {
            return Err(FindimError::NoGapCertificate);
        }
    }
    let cert = GapCertificate {
        gen_count: t,
        shift: c,
        sigma_sq_lower: Some(lambda),
        commutant_dim: r_dim,
    };
    Ok((t, c, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::findim::algebra::kron;
    use num_traits::Zero;

    fn g(n: i64, d: i64) -> GaussianRational {
        GaussianRational::from_ratio(n, d)
    }

    fn sigma_x() -> Mat {
        let mut m = Mat::zeros(2, 2);
        m.set(0, 1, g(1, 1));
        m.set(1, 0, g(1, 1));
        m
    }

    fn sigma_z() -> Mat {
        let mut m = Mat::zeros(2, 2);
        m.set(0, 0, g(1, 1));
        m.set(1, 1, g(-1, 1));
        m
    }

    /// M2 (x) M2 with N = M2 (x) 1.
    fn tensor_instance() -> (MultiMatrixAlgebra, Vec<BlockMatrix>, Subalgebra) {
        let alg = MultiMatrixAlgebra::full_matrix(4);
        let id2 = Mat::identity(2);
        let n_gens = vec![
            BlockMatrix::from_blocks(vec![kron(&sigma_x(), &id2)]),
            BlockMatrix::from_blocks(vec![kron(&sigma_z(), &id2)]),
        ];
        let sub = Subalgebra::generate(&alg, &n_gens).unwrap();
        (alg, n_gens, sub)
    }

    #[test]
    fn closure_of_tensor_factor_has_dim_four() {
        let (_, _, sub) = tensor_instance();
        assert_eq!(sub.dim(), 4);
    }

    #[test]
    fn expectation_fixes_members_and_kills_orthogonals() {
        let (alg, n_gens, sub) = tensor_instance();
        // members are fixed
        for n in &n_gens {
            let e = sub.conditional_expectation(&alg, n).unwrap();
            assert_eq!(&e, n);
        }
        // E(1 (x) sigma_z) = 0, cross-checked by the partial-trace formula
        let b = BlockMatrix::from_blocks(vec![kron(&Mat::identity(2), &sigma_z())]);
        let e = sub.conditional_expectation(&alg, &b).unwrap();
        assert!(e.is_zero());
        // E(sigma_x (x) sigma_x) = 0 since tr(sigma_x) = 0
        let xx = BlockMatrix::from_blocks(vec![kron(&sigma_x(), &sigma_x())]);
        assert!(sub.conditional_expectation(&alg, &xx).unwrap().is_zero());
        // partial trace formula E(a (x) b) = tr(b) a (x) 1 on a mixed case
        let mixed = BlockMatrix::from_blocks(vec![kron(&sigma_x(), &Mat::identity(2))]);
        let e = sub.conditional_expectation(&alg, &mixed).unwrap();
        assert_eq!(e, mixed);
    }

    #[test]
    fn expectation_exact_identities() {
        let (alg, _, sub) = tensor_instance();
        let x = BlockMatrix::from_blocks(vec![kron(&sigma_x(), &sigma_z())])
            .add(&alg.identity().scale(&g(1, 3)));
        let e = sub.conditional_expectation(&alg, &x).unwrap();
        // idempotent
        assert_eq!(sub.conditional_expectation(&alg, &e).unwrap(), e);
        // trace preserving
        assert_eq!(alg.trace(&e), alg.trace(&x));
        // 2-norm contractive
        assert!(alg.norm_sq(&e) <= alg.norm_sq(&x));
        // bimodule property over basis elements
        for n1 in sub.basis() {
            for n2 in sub.basis() {
                let lhs = sub.conditional_expectation(&alg, &n1.mul(&x).mul(n2)).unwrap();
                let rhs = n1.mul(&e).mul(n2);
                assert_eq!(lhs, rhs);
            }
        }
        // exact Pythagoras against every basis member
        let dist_sq = sub.distance_sq(&alg, &x).unwrap();
        for n in sub.basis() {
            let lhs = alg.norm_sq(&x.sub(n));
            let rhs = &dist_sq + alg.norm_sq(&e.sub(n));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn distance_examples() {
        let (alg, _, sub) = tensor_instance();
        let b = BlockMatrix::from_blocks(vec![kron(&Mat::identity(2), &sigma_z())]);
        assert_eq!(sub.distance_sq(&alg, &b).unwrap(), BigRational::one());
        let zx = BlockMatrix::from_blocks(vec![kron(&sigma_z(), &sigma_x())]);
        assert_eq!(sub.distance_sq(&alg, &zx).unwrap(), BigRational::one());
        // members have distance zero
        let m = BlockMatrix::from_blocks(vec![kron(&sigma_z(), &Mat::identity(2))]);
        assert!(sub.distance_sq(&alg, &m).unwrap().is_zero());
        assert!(sub.contains(&m));
        assert!(!sub.contains(&b));
    }

    #[test]
    fn commutant_examples() {
        let (alg, n_gens, _) = tensor_instance();
        // N = M2 (x) 1  =>  N' = 1 (x) M2, dimension 4
        let comm = commutant_basis(&alg, &n_gens).unwrap();
        assert_eq!(comm.len(), 4);
        // N = scalars => commutant is everything
        let comm_all = commutant_basis(&alg, &[alg.identity()]).unwrap();
        assert_eq!(comm_all.len(), 16);
        // N = all of M => scalars only
        let full_gens = vec![
            BlockMatrix::from_blocks(vec![kron(&sigma_x(), &Mat::identity(2))]),
            BlockMatrix::from_blocks(vec![kron(&sigma_z(), &Mat::identity(2))]),
            BlockMatrix::from_blocks(vec![kron(&Mat::identity(2), &sigma_x())]),
            BlockMatrix::from_blocks(vec![kron(&Mat::identity(2), &sigma_z())]),
        ];
        let comm_scalars = commutant_basis(&alg, &full_gens).unwrap();
        assert_eq!(comm_scalars.len(), 1);
    }

    #[test]
    fn gap_certificate_on_tensor_instance() {
        let (alg, n_gens, _) = tensor_instance();
        let (t, c, cert) = certified_gap_shift(&alg, &n_gens).unwrap();
        assert_eq!(t, 2);
        assert_eq!(cert.commutant_dim, 4);
        // the commutator form has smallest nonzero eigenvalue 4 here
        let lam = cert.sigma_sq_lower.unwrap();
        assert!(lam >= BigRational::one());
        // 4^c * lambda > t
        let four = BigRational::from_integer(BigInt::from(4));
        let mut pow = lam;
        for _ in 0..c {
            pow *= &four;
        }
        assert!(pow > BigRational::from_integer(BigInt::from(t as u64)));
    }
}
