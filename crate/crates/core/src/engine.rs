//! The oracle-relative algorithms: certificate scoring for candidate
//! witnesses, spectral-gap function synthesis from Kazhdan data, the
//! two-machine interleaved distance search, and the conversions between
//! distance and conditional-expectation computation.
//!
//! Every search takes a query budget and reports exhaustion honestly: the
//! underlying procedures are semi-decision procedures whose termination is
//! a structural hypothesis on the ambient algebra, never assumed here.

pub mod certificates;
pub mod events;
pub mod expectation;
pub mod machines;

use std::sync::atomic::{AtomicU64, Ordering};

use num_rational::BigRational;
use thiserror::Error;

use crate::exactnum::Dyadic;
use crate::oracle::{OracleAccess, OracleError};
use crate::termalg::{AdjointStructure, TermCode};

pub use certificates::{
    certificate_level, gap_function_from_kazhdan, unitary_rounding_shift, witness_score,
};
pub use events::Event;
pub use expectation::{
    distance_from_expectation, expectation_from_distance, pimsner_popa_expectation,
    DistanceOracle, ExactDistance, ExpectationOracle, InterleavedDistanceOracle,
};
pub use machines::{interleaved_distance, interleaved_distance_parallel, InterleaveOutcome};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("search budget exhausted after {queries_spent} queries")]
    BudgetExhausted { queries_spent: u64 },
    #[error("distance not certified within budget: d in [{lower}, {upper}] after {queries_spent} queries")]
    Uncertified { lower: Dyadic, upper: Dyadic, queries_spent: u64 },
    #[error("invalid engine input: {0}")]
    Invalid(String),
}

impl From<crate::termalg::TermError> for EngineError {
    fn from(e: crate::termalg::TermError) -> Self {
        EngineError::Oracle(OracleError::Term(e))
    }
}

/// The certificate shape `psi_{r,m}`: distance level `r > 0` and the number
/// `m` of leading subalgebra generators constrained.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateParams {
    pub r: BigRational,
    pub m: u64,
}

/// Outcome of a budgeted distance computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DistanceResult {
    /// `|value - d(b, N)| < 2^-k`, provided the oracle contracts and the
    /// supplied spectral gap function are valid.
    Certified { value: Dyadic, k: u32 },
    /// Best certificate-backed lower and witness-backed upper bound seen
    /// before the budget ran out.
    BudgetExhausted { lower: Dyadic, upper: Dyadic, queries_spent: u64 },
}

/// Budget-charging oracle wrapper; every query (including failed ones)
/// costs one unit, and queries beyond the budget are refused.
pub struct CountingOracle<'a, O: OracleAccess + ?Sized> {
    inner: &'a O,
    spent: AtomicU64,
    budget: u64,
}

impl<'a, O: OracleAccess + ?Sized> CountingOracle<'a, O> {
    pub fn new(inner: &'a O, budget: u64) -> Self {
        CountingOracle { inner, spent: AtomicU64::new(0), budget }
    }

    pub fn spent(&self) -> u64 {
        self.spent.load(Ordering::Relaxed)
    }

    fn charge(&self) -> Result<(), OracleError> {
        let prev = self.spent.fetch_add(1, Ordering::Relaxed);
        if prev >= self.budget {
            self.spent.store(self.budget, Ordering::Relaxed);
            return Err(OracleError::Budget { spent: self.budget });
        }
        Ok(())
    }
}

impl<'a, O: OracleAccess + ?Sized> OracleAccess for CountingOracle<'a, O> {
    fn norm2(&self, term: &TermCode, k: u32) -> Result<Dyadic, OracleError> {
        self.charge()?;
        self.inner.norm2(term, k)
    }

    fn include(&self, n_term: &TermCode, k: u32) -> Result<TermCode, OracleError> {
        self.charge()?;
        self.inner.include(n_term, k)
    }

    fn n_generator_count(&self) -> Option<u64> {
        self.inner.n_generator_count()
    }

    fn adjoint_structure(&self) -> &AdjointStructure {
        self.inner.adjoint_structure()
    }
}
