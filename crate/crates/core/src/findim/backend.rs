//! The exact backend as an oracle: norm queries route through term
//! evaluation and exact square roots, inclusion queries re-code subalgebra
//! terms over the ambient generators with error zero.

use std::sync::Arc;

use num_rational::BigRational;

use super::algebra::{BlockMatrix, MultiMatrixAlgebra};
use super::subalgebra::{certified_gap_shift, GapCertificate, Subalgebra};
use super::FindimError;
use crate::exactnum::{dyadic_sqrt, Dyadic};
use crate::oracle::{
    InclusionMap, NormOracle, OracleError, PairOracle, SpectralGapFunction,
};
use crate::termalg::{self, AdjointStructure, Term, TermCode};

/// A fully validated pair: an ambient multi-matrix algebra with assigned
/// generators, and a subalgebra presented by inclusion terms over them.
pub struct Backend {
    algebra: MultiMatrixAlgebra,
    m_gens: Vec<BlockMatrix>,
    m_star: AdjointStructure,
    n_gen_terms: Vec<Term>,
    n_gens: Vec<BlockMatrix>,
    n_star: AdjointStructure,
    subalgebra: Subalgebra,
}

fn backend_err(e: FindimError) -> OracleError {
    match e {
        FindimError::Term(t) => OracleError::Term(t),
        other => OracleError::Backend(other.to_string()),
    }
}

impl Backend {
    pub fn new(
        algebra: MultiMatrixAlgebra,
        m_gens: Vec<BlockMatrix>,
        m_star: AdjointStructure,
        n_gen_terms: Vec<Term>,
        n_star: AdjointStructure,
    ) -> Result<Arc<Backend>, FindimError> {
        if m_gens.is_empty() || n_gen_terms.is_empty() {
            return Err(FindimError::EmptyGeneratorList);
        }
        if m_star.len() != m_gens.len() || n_star.len() != n_gen_terms.len() {
            return Err(FindimError::AdjointMismatch { index: usize::MAX });
        }
        for (i, g) in m_gens.iter().enumerate() {
            algebra.check_shape(g)?;
            if !algebra.is_contraction(g)? {
                return Err(FindimError::NotContraction { index: i });
            }
        }
        for i in 0..m_gens.len() {
            let j = m_star.star(i as u64) as usize;
            if m_gens[j] != m_gens[i].adjoint() {
                return Err(FindimError::AdjointMismatch { index: i });
            }
        }
        let m_count = m_gens.len() as u64;
        let mut n_gens = Vec::with_capacity(n_gen_terms.len());
        for t in &n_gen_terms {
            t.validate(Some(m_count))?;
            n_gens.push(algebra.eval(t, &m_gens)?);
        }
        for i in 0..n_gens.len() {
            let j = n_star.star(i as u64) as usize;
            if n_gens[j] != n_gens[i].adjoint() {
                return Err(FindimError::AdjointMismatch { index: i });
            }
        }
        let subalgebra = Subalgebra::generate(&algebra, &n_gens)?;
        Ok(Arc::new(Backend {
            algebra,
            m_gens,
            m_star,
            n_gen_terms,
            n_gens,
            n_star,
            subalgebra,
        }))
    }

    pub fn algebra(&self) -> &MultiMatrixAlgebra {
        &self.algebra
    }

    pub fn m_generators(&self) -> &[BlockMatrix] {
        &self.m_gens
    }

    pub fn n_generators(&self) -> &[BlockMatrix] {
        &self.n_gens
    }

    pub fn n_generator_terms(&self) -> &[Term] {
        &self.n_gen_terms
    }

    pub fn m_star(&self) -> &AdjointStructure {
        &self.m_star
    }

    pub fn n_star(&self) -> &AdjointStructure {
        &self.n_star
    }

    pub fn subalgebra(&self) -> &Subalgebra {
        &self.subalgebra
    }

    pub fn eval_m_term(&self, t: &Term) -> Result<BlockMatrix, FindimError> {
        t.validate(Some(self.m_gens.len() as u64))?;
        self.algebra.eval(t, &self.m_gens)
    }

    pub fn eval_m_code(&self, c: &TermCode) -> Result<BlockMatrix, FindimError> {
        self.eval_m_term(&termalg::decode(c)?)
    }

    pub fn eval_n_term(&self, t: &Term) -> Result<BlockMatrix, FindimError> {
        t.validate(Some(self.n_gens.len() as u64))?;
        self.algebra.eval(t, &self.n_gens)
    }

    pub fn eval_n_code(&self, c: &TermCode) -> Result<BlockMatrix, FindimError> {
        self.eval_n_term(&termalg::decode(c)?)
    }

    /// Re-code a subalgebra term over the ambient generators by substituting
    /// each `Gen(i)` with its inclusion expression. Exact: error zero.
    pub fn include_term(&self, t: &Term) -> Result<Term, FindimError> {
        t.validate(Some(self.n_gen_terms.len() as u64))?;
        Ok(substitute(t, &self.n_gen_terms))
    }

    pub fn expectation(&self, x: &BlockMatrix) -> Result<BlockMatrix, FindimError> {
        self.subalgebra.conditional_expectation(&self.algebra, x)
    }

    pub fn distance_sq_to_n(&self, x: &BlockMatrix) -> Result<BigRational, FindimError> {
        self.subalgebra.distance_sq(&self.algebra, x)
    }

    pub fn distance_to_n(&self, x: &BlockMatrix, k: u32) -> Result<Dyadic, FindimError> {
        Ok(dyadic_sqrt(&self.distance_sq_to_n(x)?, k)?)
    }

    /// Oracle view of this backend.
    pub fn pair_oracle(self: &Arc<Self>) -> PairOracle {
        PairOracle {
            m_norms: Box::new(BackendNorms(Arc::clone(self))),
            inclusion: Box::new(BackendInclusion(Arc::clone(self))),
            n_generator_count: Some(self.n_gen_terms.len() as u64),
            adjoint_structure: self.n_star.clone(),
        }
    }

    /// Spectral gap function `n -> max(t, n + c)` for this pair, backed by an
    /// exact psd certificate over the whole algebra.
    pub fn certified_gap_function(
        &self,
    ) -> Result<(SpectralGapFunction, GapCertificate), FindimError> {
        let (t, c, cert) = certified_gap_shift(&self.algebra, &self.n_gens)?;
        Ok((SpectralGapFunction::affine(t as u32, c), cert))
    }

    /// Codes of the subalgebra generators in the subalgebra's own coding.
    pub fn n_generator_codes(&self) -> Vec<TermCode> {
        (0..self.n_gen_terms.len() as u64).map(|i| TermCode::from_u64(4 * i)).collect()
    }
}

fn substitute(t: &Term, table: &[Term]) -> Term {
    match t {
        Term::Gen(i) => table[*i as usize].clone(),
        Term::Comb { lambda, left, mu, right } => Term::Comb {
            lambda: lambda.clone(),
            left: Box::new(substitute(left, table)),
            mu: mu.clone(),
            right: Box::new(substitute(right, table)),
        },
        Term::Prod(l, r) => Term::prod(substitute(l, table), substitute(r, table)),
        Term::Adj(inner) => Term::adj(substitute(inner, table)),
    }
}

struct BackendNorms(Arc<Backend>);

impl NormOracle for BackendNorms {
    fn norm2(&self, term: &TermCode, k: u32) -> Result<Dyadic, OracleError> {
        let x = self.0.eval_m_code(term).map_err(backend_err)?;
        dyadic_sqrt(&self.0.algebra.norm_sq(&x), k)
            .map_err(|e| OracleError::Backend(e.to_string()))
    }
}

struct BackendInclusion(Arc<Backend>);

impl InclusionMap for BackendInclusion {
    fn include(&self, n_term: &TermCode, _k: u32) -> Result<TermCode, OracleError> {
        let t = termalg::decode(n_term)?;
        let m_term = self.0.include_term(&t).map_err(backend_err)?;
        Ok(termalg::encode(&m_term)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::dyadic_within_of_sqrt;
    use crate::findim::matrix::Mat;
    use crate::oracle::{pair_distance, OracleAccess};
    use crate::termalg::AdjointStructure;
    use num_traits::One;

    use crate::fixtures::tensor_backend;

    fn g(n: i64, d: i64) -> crate::exactnum::GaussianRational {
        crate::exactnum::GaussianRational::from_ratio(n, d)
    }

    #[test]
    fn backend_validates_inputs() {
        let alg = MultiMatrixAlgebra::full_matrix(2);
        let doubled = BlockMatrix::from_blocks(vec![Mat::identity(2).scale(&g(2, 1))]);
        let err = Backend::new(
            alg.clone(),
            vec![doubled],
            AdjointStructure::all_self_adjoint(1),
            vec![Term::Gen(0)],
            AdjointStructure::all_self_adjoint(1),
        );
        assert!(matches!(err, Err(FindimError::NotContraction { .. })));

        // declaring a non-self-adjoint generator self-adjoint is rejected
        let mut upper = Mat::zeros(2, 2);
        upper.set(0, 1, g(1, 2));
        let err = Backend::new(
            alg,
            vec![BlockMatrix::from_blocks(vec![upper])],
            AdjointStructure::all_self_adjoint(1),
            vec![Term::Gen(0)],
            AdjointStructure::all_self_adjoint(1),
        );
        assert!(matches!(err, Err(FindimError::AdjointMismatch { .. })));
    }

    #[test]
    fn norm_oracle_contract() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        // || (1 (x) sz) ||_2 = 1
        let code = termalg::encode(&Term::Gen(3)).unwrap();
        for k in [0u32, 4, 10] {
            let q = oracle.norm2(&code, k).unwrap();
            assert!(dyadic_within_of_sqrt(&q, &BigRational::one(), k));
        }
        // malformed code (generator out of range) is rejected
        let bad = termalg::encode(&Term::Gen(9)).unwrap();
        assert!(oracle.norm2(&bad, 3).is_err());
    }

    #[test]
    fn inclusion_is_exact() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        let n_code = termalg::encode(&Term::prod(Term::Gen(0), Term::Gen(1))).unwrap();
        let m_code = oracle.include(&n_code, 30).unwrap();
        let included = backend.eval_m_code(&m_code).unwrap();
        let direct = backend.eval_n_code(&n_code).unwrap();
        assert_eq!(included, direct);
    }

    #[test]
    fn pair_distance_examples() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        // distance from 1 (x) sz to the zero point of N is 1
        let b = termalg::encode(&Term::Gen(3)).unwrap();
        let zero = crate::oracle::zero_point_code();
        for k in [0u32, 3, 8] {
            let d = pair_distance(&oracle, &b, &zero, k).unwrap();
            assert!(
                dyadic_within_of_sqrt(&d, &BigRational::one(), k),
                "k={k} gave {d}"
            );
        }
        // distance from an included point to itself is < 2^-k + 2^-k
        let n_term = termalg::encode(&Term::Gen(1)).unwrap();
        let m_term = oracle.include(&n_term, 12).unwrap();
        let d = pair_distance(&oracle, &m_term, &n_term, 10).unwrap();
        assert!(d.to_rational() < BigRational::new(1.into(), 512.into()));
    }

    #[test]
    fn certified_gap_function_on_tensor_pair() {
        let backend = tensor_backend();
        let (f, cert) = backend.certified_gap_function().unwrap();
        assert_eq!(cert.gen_count, 2);
        // f(n) = max(2, n + c) is nondecreasing and >= n
        let mut prev = 0;
        for n in 0..12 {
            let v = f.eval(n);
            assert!(v >= prev);
            assert!(v as u64 >= n as u64);
            prev = v;
        }
    }
}
