//! The oracle abstraction: interfaces for presentations whose 2-norms and
//! subalgebra inclusion are answered by some device with `2^-k` guarantees.
//! Every backend (the exact finite-dimensional one included) talks to the
//! engine exclusively through these contracts.
//!
//! Answers at different precisions need not be consistent beyond their
//! stated tolerances; consumers must tolerate that.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::exactnum::Dyadic;
use crate::termalg::{self, AdjointStructure, Term, TermCode, TermError};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("query budget exhausted after {spent} queries")]
    Budget { spent: u64 },
}

/// 2-norm queries on rational points: `|answer - ||p||_2| < 2^-k`, with
/// deterministic answers.
pub trait NormOracle: Send + Sync {
    fn norm2(&self, term: &TermCode, k: u32) -> Result<Dyadic, OracleError>;
}

/// The inclusion of the subalgebra presentation: maps a rational point of the
/// small algebra to a rational point of the ambient one within `2^-k`.
pub trait InclusionMap: Send + Sync {
    fn include(&self, n_term: &TermCode, k: u32) -> Result<TermCode, OracleError>;
}

/// Everything the engine may ask of a pair `(ambient presentation,
/// included subalgebra presentation)`.
pub struct PairOracle {
    pub m_norms: Box<dyn NormOracle>,
    pub inclusion: Box<dyn InclusionMap>,
    /// Number of declared subalgebra generators; `None` leaves the count
    /// unconstrained.
    pub n_generator_count: Option<u64>,
    /// Adjoint involution on the subalgebra generator indices.
    pub adjoint_structure: AdjointStructure,
}

/// Uniform access to oracle queries, so budget-counting wrappers compose
/// with the raw oracle.
pub trait OracleAccess: Sync {
    fn norm2(&self, term: &TermCode, k: u32) -> Result<Dyadic, OracleError>;
    fn include(&self, n_term: &TermCode, k: u32) -> Result<TermCode, OracleError>;
    fn n_generator_count(&self) -> Option<u64>;
    fn adjoint_structure(&self) -> &AdjointStructure;
}

impl OracleAccess for PairOracle {
    fn norm2(&self, term: &TermCode, k: u32) -> Result<Dyadic, OracleError> {
        self.m_norms.norm2(term, k)
    }

    fn include(&self, n_term: &TermCode, k: u32) -> Result<TermCode, OracleError> {
        self.inclusion.include(n_term, k)
    }

    fn n_generator_count(&self) -> Option<u64> {
        self.n_generator_count
    }

    fn adjoint_structure(&self) -> &AdjointStructure {
        &self.adjoint_structure
    }
}

/// A point reachable to any precision: `approximant(k)` is a rational point
/// within `2^-k` of the denoted element.
pub trait ComputablePoint: Send + Sync {
    fn approximant(&self, k: u32) -> Result<TermCode, OracleError>;
}

/// A point that *is* a rational point: constant approximant.
#[derive(Debug, Clone)]
pub struct ExactPoint(pub TermCode);

impl ComputablePoint for ExactPoint {
    fn approximant(&self, _k: u32) -> Result<TermCode, OracleError> {
        Ok(self.0.clone())
    }
}

/// A function `n -> f(n)` promising: for every rational point `p` of the
/// ambient presentation, if `max_{1<=i<=f(n)} ||[p, a_i]||_2 < 2^-f(n)` over
/// the included subalgebra generator sequence, then `d(p, N' cap M) < 2^-n`.
/// The promise itself is semantic; backends can certify it exactly at desk
/// scale.
#[derive(Clone)]
pub struct SpectralGapFunction {
    f: Arc<dyn Fn(u32) -> u32 + Send + Sync>,
}

impl SpectralGapFunction {
    pub fn new(f: impl Fn(u32) -> u32 + Send + Sync + 'static) -> Self {
        SpectralGapFunction { f: Arc::new(f) }
    }

    /// `n -> max(min_value, n + shift)`; the shape produced by certified
    /// backends and Kazhdan data over finitely many generators.
    pub fn affine(min_value: u32, shift: u32) -> Self {
        SpectralGapFunction::new(move |n| n.saturating_add(shift).max(min_value))
    }

    pub fn eval(&self, n: u32) -> u32 {
        (self.f)(n)
    }
}

impl fmt::Debug for SpectralGapFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpectralGapFunction(..)")
    }
}

/// Kazhdan input data: a finite set `F` of rational-point codes of the
/// subalgebra presentation, a bound `m` with `F` among the first `m` codes,
/// and the constant exponent `p` (`K = 2^p`, `epsilon = 2^-p`). Always input
/// data, never derived.
#[derive(Debug, Clone)]
pub struct KazhdanData {
    pub set_indices: Vec<TermCode>,
    pub m: u64,
    pub p: u32,
}

impl KazhdanData {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.set_indices.is_empty() || self.m == 0 {
            return Err(OracleError::Backend("Kazhdan set must be nonempty".into()));
        }
        let bound = TermCode::from_u64(self.m);
        for c in &self.set_indices {
            if *c >= bound {
                return Err(OracleError::Backend(format!(
                    "Kazhdan set member {c} is not among the first {} rational points",
                    self.m
                )));
            }
        }
        Ok(())
    }
}

/// `|result - d(m_term, i(n_term))| < 2^-k`, assembled from an inclusion
/// query at precision `k+2` and a norm query at precision `k+2` on the
/// halved difference (a rounded combination), then doubled exactly.
pub fn pair_distance<O: OracleAccess + ?Sized>(
    oracle: &O,
    m_term: &TermCode,
    n_term: &TermCode,
    k: u32,
) -> Result<Dyadic, OracleError> {
    let included = oracle.include(n_term, k + 2)?;
    let m = termalg::decode(m_term)?;
    let p = termalg::decode(&included)?;
    let half = termalg::encode(&Term::half_diff(m, p))?;
    let q = oracle.norm2(&half, k + 2)?;
    Ok(q.shift(1))
}

/// Code of the canonical zero point.
pub fn zero_point_code() -> TermCode {
    termalg::encode(&Term::zero()).expect("the zero term always codes")
}
