//! Multi-matrix tracial *-algebras: direct sums of matrix blocks with a
//! weighted normalized trace. This is the exact finite-dimensional stand-in
//! for a tracial von Neumann algebra and the ground truth every property
//! test measures against.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::matrix::Mat;
use super::FindimError;
use crate::exactnum::{dyadic_sqrt, Dyadic, GaussianRational};
use crate::termalg::Term;

/// Shape and trace of a direct sum `M_{d_1} (+) ... (+) M_{d_r}` with
/// `tr(x) = sum_b w_b Tr(x_b)`; the weights must satisfy
/// `sum_b w_b d_b = 1` so that `tr(1) = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiMatrixAlgebra {
    blocks: Vec<(usize, BigRational)>,
}

/// An element: one square matrix per block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMatrix {
    pub blocks: Vec<Mat>,
}

impl MultiMatrixAlgebra {
    pub fn new(blocks: Vec<(usize, BigRational)>) -> Result<Self, FindimError> {
        if blocks.is_empty() {
            return Err(FindimError::EmptyAlgebra);
        }
        let mut total = BigRational::zero();
        for (dim, w) in &blocks {
            if *dim == 0 {
                return Err(FindimError::EmptyAlgebra);
            }
            if !w.is_positive() {
                return Err(FindimError::NonPositiveWeight(w.to_string()));
            }
            total += w * BigRational::from_integer(BigInt::from(*dim as u64));
        }
        if !total.is_one() {
            return Err(FindimError::TraceNotNormalized(total.to_string()));
        }
        Ok(MultiMatrixAlgebra { blocks })
    }

    /// Single full matrix block `M_d` with the normalized trace.
    pub fn full_matrix(dim: usize) -> Self {
        let w = BigRational::new(BigInt::one(), BigInt::from(dim as u64));
        MultiMatrixAlgebra { blocks: vec![(dim, w)] }
    }

    pub fn blocks(&self) -> &[(usize, BigRational)] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Sum of the block dimensions.
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|(d, _)| d).sum()
    }

    /// Complex dimension of the algebra as a vector space.
    pub fn vector_dim(&self) -> usize {
        self.blocks.iter().map(|(d, _)| d * d).sum()
    }

    pub fn zero(&self) -> BlockMatrix {
        BlockMatrix { blocks: self.blocks.iter().map(|(d, _)| Mat::zeros(*d, *d)).collect() }
    }

    pub fn identity(&self) -> BlockMatrix {
        BlockMatrix { blocks: self.blocks.iter().map(|(d, _)| Mat::identity(*d)).collect() }
    }

    pub fn check_shape(&self, x: &BlockMatrix) -> Result<(), FindimError> {
        if x.blocks.len() != self.blocks.len() {
            return Err(FindimError::ShapeMismatch);
        }
        for (b, ((d, _), m)) in self.blocks.iter().zip(&x.blocks).enumerate() {
            if m.rows() != *d || m.cols() != *d {
                return Err(FindimError::BlockDimensionMismatch { block: b });
            }
        }
        Ok(())
    }

    /// The normalized trace `sum_b w_b Tr(x_b)`.
    pub fn trace(&self, x: &BlockMatrix) -> GaussianRational {
        let mut t = GaussianRational::zero();
        for ((_, w), m) in self.blocks.iter().zip(&x.blocks) {
            let block_trace = m.trace();
            let w = GaussianRational::from_rational(w.clone());
            t = t.add(&w.mul(&block_trace));
        }
        t
    }

    /// Trace inner product `<x, y> = tr(y* x)`.
    pub fn inner(&self, x: &BlockMatrix, y: &BlockMatrix) -> GaussianRational {
        self.trace(&y.adjoint().mul(x))
    }

    /// `||x||_2^2 = tr(x* x)`, exactly; always a nonnegative rational.
    pub fn norm_sq(&self, x: &BlockMatrix) -> BigRational {
        let mut s = BigRational::zero();
        for ((_, w), m) in self.blocks.iter().zip(&x.blocks) {
            s += w * m.entry_norm_sq();
        }
        s
    }

    /// Dyadic approximation of `||x||_2` within `2^-k`.
    pub fn norm2(&self, x: &BlockMatrix, k: u32) -> Result<Dyadic, FindimError> {
        Ok(dyadic_sqrt(&self.norm_sq(x), k)?)
    }

    /// Exact test for operator norm `<= 1`, via psd of `1 - x* x` per block.
    pub fn is_contraction(&self, x: &BlockMatrix) -> Result<bool, FindimError> {
        self.check_shape(x)?;
        for ((d, _), m) in self.blocks.iter().zip(&x.blocks) {
            let gram = Mat::identity(*d).sub(&m.adjoint().mul(m));
            if !gram.is_psd() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Exact evaluation of a term under an assignment of block matrices to
    /// generator indices.
    pub fn eval(&self, t: &Term, assignment: &[BlockMatrix]) -> Result<BlockMatrix, FindimError> {
        match t {
            Term::Gen(i) => {
                let idx = usize::try_from(*i)
                    .map_err(|_| FindimError::UnassignedGenerator { index: u64::MAX })?;
                assignment
                    .get(idx)
                    .cloned()
                    .ok_or(FindimError::UnassignedGenerator { index: *i as u64 })
            }
            Term::Comb { lambda, left, mu, right } => {
                let l = self.eval(left, assignment)?;
                let r = self.eval(right, assignment)?;
                Ok(l.scale(lambda).add(&r.scale(mu)))
            }
            Term::Prod(l, r) => {
                Ok(self.eval(l, assignment)?.mul(&self.eval(r, assignment)?))
            }
            Term::Adj(inner) => Ok(self.eval(inner, assignment)?.adjoint()),
        }
    }
}

impl BlockMatrix {
    pub fn from_blocks(blocks: Vec<Mat>) -> Self {
        BlockMatrix { blocks }
    }

    pub fn add(&self, other: &BlockMatrix) -> BlockMatrix {
        BlockMatrix {
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, other: &BlockMatrix) -> BlockMatrix {
        BlockMatrix {
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn neg(&self) -> BlockMatrix {
        BlockMatrix { blocks: self.blocks.iter().map(Mat::neg).collect() }
    }

    pub fn mul(&self, other: &BlockMatrix) -> BlockMatrix {
        BlockMatrix {
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.mul(b)).collect(),
        }
    }

    pub fn scale(&self, c: &GaussianRational) -> BlockMatrix {
        BlockMatrix { blocks: self.blocks.iter().map(|m| m.scale(c)).collect() }
    }

    pub fn adjoint(&self) -> BlockMatrix {
        BlockMatrix { blocks: self.blocks.iter().map(Mat::adjoint).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(Mat::is_zero)
    }

    pub fn is_hermitian(&self) -> bool {
        self.blocks.iter().all(Mat::is_hermitian)
    }

    /// Flatten to a coordinate vector (blocks concatenated row-major).
    pub fn flatten(&self) -> Vec<GaussianRational> {
        let mut out = Vec::new();
        for m in &self.blocks {
            out.extend(m.entries().iter().cloned());
        }
        out
    }

    pub fn from_flat(algebra: &MultiMatrixAlgebra, flat: &[GaussianRational]) -> BlockMatrix {
        let mut blocks = Vec::new();
        let mut pos = 0usize;
        for (d, _) in algebra.blocks() {
            let m = Mat::from_fn(*d, *d, |i, j| flat[pos + i * d + j].clone());
            pos += d * d;
            blocks.push(m);
        }
        BlockMatrix { blocks }
    }
}

/// Kronecker product of two square matrices (used to build tensor-type
/// instances in tests and problems).
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (n, m) = (a.rows(), b.rows());
    Mat::from_fn(n * m, n * m, |i, j| {
        let (ai, bi) = (i / m, i % m);
        let (aj, bj) = (j / m, j % m);
        a.get(ai, aj).mul(b.get(bi, bj))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::termalg::Term;

    fn g(n: i64, d: i64) -> GaussianRational {
        GaussianRational::from_ratio(n, d)
    }

    fn m2() -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::full_matrix(2)
    }

    pub(crate) fn sigma_x() -> Mat {
        let mut m = Mat::zeros(2, 2);
        m.set(0, 1, g(1, 1));
        m.set(1, 0, g(1, 1));
        m
    }

    pub(crate) fn sigma_z() -> Mat {
        let mut m = Mat::zeros(2, 2);
        m.set(0, 0, g(1, 1));
        m.set(1, 1, g(-1, 1));
        m
    }

    #[test]
    fn trace_normalization_enforced() {
        assert!(MultiMatrixAlgebra::new(vec![(2, BigRational::new(1.into(), 2.into()))]).is_ok());
        assert!(matches!(
            MultiMatrixAlgebra::new(vec![(2, BigRational::new(1.into(), 4.into()))]),
            Err(FindimError::TraceNotNormalized(_))
        ));
        assert!(MultiMatrixAlgebra::new(vec![]).is_err());
    }

    #[test]
    fn norms_and_trace() {
        let alg = m2();
        let one = alg.identity();
        assert_eq!(alg.norm_sq(&one), BigRational::one());
        assert_eq!(alg.norm2(&one, 20).unwrap(), Dyadic::one());
        let z = BlockMatrix::from_blocks(vec![sigma_z()]);
        assert_eq!(alg.norm_sq(&z), BigRational::one());
        assert!(alg.trace(&z).is_zero());
        // e11 has norm sqrt(1/2)
        let mut e11 = Mat::zeros(2, 2);
        e11.set(0, 0, g(1, 1));
        let e11 = BlockMatrix::from_blocks(vec![e11]);
        assert_eq!(alg.norm_sq(&e11), BigRational::new(1.into(), 2.into()));
        let approx = alg.norm2(&e11, 12).unwrap();
        assert!(crate::exactnum::dyadic_within_of_sqrt(
            &approx,
            &BigRational::new(1.into(), 2.into()),
            12
        ));
    }

    #[test]
    fn eval_examples() {
        let alg = m2();
        let x = BlockMatrix::from_blocks(vec![sigma_x()]);
        let z = BlockMatrix::from_blocks(vec![sigma_z()]);
        let assign = vec![z.clone(), x.clone()];
        assert_eq!(alg.eval(&Term::Gen(0), &assign).unwrap(), z);
        assert_eq!(
            alg.eval(&Term::prod(Term::Gen(0), Term::Gen(1)), &assign).unwrap(),
            z.mul(&x)
        );
        // convex identity: (1/2)a + (1/2)a = a
        let half = Term::comb(g(1, 2), Term::Gen(0), g(1, 2), Term::Gen(0)).unwrap();
        assert_eq!(alg.eval(&half, &assign).unwrap(), z);
        assert!(alg.eval(&Term::Gen(5), &assign).is_err());
        // adjoint evaluates to the conjugate transpose
        let adj = alg.eval(&Term::adj(Term::Gen(1)), &assign).unwrap();
        assert_eq!(adj, x.adjoint());
    }

    #[test]
    fn contraction_check() {
        let alg = m2();
        assert!(alg.is_contraction(&alg.identity()).unwrap());
        let doubled = alg.identity().scale(&g(2, 1));
        assert!(!alg.is_contraction(&doubled).unwrap());
        let z = BlockMatrix::from_blocks(vec![sigma_z()]);
        assert!(alg.is_contraction(&z).unwrap());
    }

    #[test]
    fn unit_ball_preserved_by_terms() {
        // every term maps unit-ball assignments into the unit ball
        let alg = m2();
        let assign = vec![
            BlockMatrix::from_blocks(vec![sigma_z()]),
            BlockMatrix::from_blocks(vec![sigma_x()]),
        ];
        let terms = vec![
            Term::Gen(0),
            Term::prod(Term::Gen(0), Term::Gen(1)),
            Term::comb(g(1, 2), Term::Gen(0), g(-1, 2), Term::Gen(1)).unwrap(),
            Term::adj(Term::prod(Term::Gen(1), Term::Gen(0))),
            Term::comb(
                GaussianRational::new(
                    BigRational::new(3.into(), 5.into()),
                    BigRational::new(4.into(), 5.into()),
                ),
                Term::Gen(1),
                GaussianRational::zero(),
                Term::Gen(0),
            )
            .unwrap(),
        ];
        for t in terms {
            let v = alg.eval(&t, &assign).unwrap();
            assert!(alg.is_contraction(&v).unwrap(), "term {t} left the unit ball");
        }
    }

    #[test]
    fn kron_shapes() {
        let k = kron(&sigma_z(), &sigma_x());
        assert_eq!(k.rows(), 4);
        // sigma_z (x) sigma_x is Hermitian with square = identity
        assert!(k.is_hermitian());
        assert_eq!(k.mul(&k), Mat::identity(4));
    }
}
