//! Conversions between computing distances to the subalgebra and computing
//! the conditional expectation onto it, plus the finite-index shortcut
//! through a reconstruction basis.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::machines::{interleaved_distance, interleaved_distance_parallel};
use super::{CountingOracle, DistanceResult, EngineError};
use crate::exactnum::Dyadic;
use crate::findim::Backend;
use crate::oracle::{
    pair_distance, ComputablePoint, OracleAccess, OracleError, PairOracle, SpectralGapFunction,
};
use crate::termalg::{self, coding, Term, TermCode, TermError};

/// A device answering `|answer - d(p, N)| < 2^-k`.
pub trait DistanceOracle: Sync {
    fn distance(&self, p: &TermCode, k: u32) -> Result<Dyadic, EngineError>;
}

/// A device answering with a subalgebra point within `2^-k` of `E_N(p)`.
pub trait ExpectationOracle: Sync {
    fn expectation(&self, p: &TermCode, k: u32) -> Result<TermCode, EngineError>;
}

/// The exact backend as a distance oracle.
pub struct ExactDistance(pub Arc<Backend>);

impl DistanceOracle for ExactDistance {
    fn distance(&self, p: &TermCode, k: u32) -> Result<Dyadic, EngineError> {
        let x = self.0.eval_m_code(p).map_err(|e| OracleError::Backend(e.to_string()))?;
        self.0.distance_to_n(&x, k).map_err(|e| EngineError::Oracle(OracleError::Backend(e.to_string())))
    }
}

/// The interleaved search as a distance oracle; certification failures
/// surface as [`EngineError::Uncertified`].
pub struct InterleavedDistanceOracle<'a> {
    pub oracle: &'a PairOracle,
    pub gap: SpectralGapFunction,
    pub budget: u64,
    pub parallel: bool,
}

impl<'a> DistanceOracle for InterleavedDistanceOracle<'a> {
    fn distance(&self, p: &TermCode, k: u32) -> Result<Dyadic, EngineError> {
        let out = if self.parallel {
            interleaved_distance_parallel(self.oracle, p, &self.gap, k, self.budget)?
        } else {
            interleaved_distance(self.oracle, p, &self.gap, k, self.budget)?
        };
        match out.result {
            DistanceResult::Certified { value, .. } => Ok(value),
            DistanceResult::BudgetExhausted { lower, upper, queries_spent } => {
                Err(EngineError::Uncertified { lower, upper, queries_spent })
            }
        }
    }
}

fn is_candidate_rejection(e: &OracleError) -> bool {
    matches!(
        e,
        OracleError::Term(TermError::GeneratorOutOfRange { .. })
            | OracleError::Term(TermError::GeneratorIndexOverflow)
            | OracleError::Term(TermError::CoefficientTooDeep)
    )
}

fn map_budget(e: OracleError) -> EngineError {
    match e {
        OracleError::Budget { spent } => EngineError::BudgetExhausted { queries_spent: spent },
        other => EngineError::Oracle(other),
    }
}

/// Subalgebra point within `2^-k` of `E_N(p)`, found by enumerating points
/// and accepting the first whose distance interval to `p` overlaps the
/// `d(p, N)` interval.
///
/// Internal precision `l = 2k + 4`: an accepted point has
/// `|d(p, i(p')) - d(p, N)| < 2^(-l+2)`, so by the Pythagorean identity
/// `d(E_N(p), p')^2 = d(p, i(p'))^2 - d(p, N)^2 < 3 * 2^(-l+2) < 2^-2k`.
pub fn expectation_from_distance<O: OracleAccess + ?Sized>(
    oracle: &O,
    dist: &dyn DistanceOracle,
    p: &TermCode,
    k: u32,
    budget: u64,
) -> Result<TermCode, EngineError> {
    let l = 2 * k + 4;
    let q = dist.distance(p, l)?;
    let counter = CountingOracle::new(oracle, budget);
    let overlap = Dyadic::two_pow(-(l as i64) + 1);
    let mut code = 0u64;
    loop {
        let candidate = TermCode::from_u64(code);
        code += 1;
        match termalg::decode(&candidate) {
            Ok(t) => {
                if t.validate(oracle.n_generator_count()).is_err() {
                    continue;
                }
            }
            Err(_) => continue,
        }
        let d_hat = match pair_distance(&counter, p, &candidate, l) {
            Ok(d) => d,
            Err(e) if is_candidate_rejection(&e) => continue,
            Err(e) => return Err(map_budget(e)),
        };
        let gap = q.sub(&d_hat);
        let gap = if gap.is_negative() { gap.neg() } else { gap };
        if gap < overlap {
            return Ok(candidate);
        }
    }
}

/// `|answer - d(p, N)| < 2^-k` via one expectation query at precision `k+1`
/// and the distance `d(p, i(p'))` at precision `k+2`.
pub fn distance_from_expectation<O: OracleAccess + ?Sized>(
    oracle: &O,
    expect: &dyn ExpectationOracle,
    p: &TermCode,
    k: u32,
) -> Result<Dyadic, EngineError> {
    let p_prime = expect.expectation(p, k + 1)?;
    Ok(pair_distance(oracle, p, &p_prime, k + 2)?)
}

fn tuple_unpair(idx: u64, len: usize) -> Option<Vec<u64>> {
    let mut out = Vec::with_capacity(len);
    let mut rest = BigUint::from(idx);
    for _ in 0..len - 1 {
        let (first, r) = coding::cantor_unpair(&rest);
        out.push(first.to_u64()?);
        rest = r;
    }
    out.push(rest.to_u64()?);
    Some(out)
}

/// Conditional expectation through a reconstruction basis `m_1..m_J` with
/// `x = sum_j m_j E(m_j* x)`: search coefficient tuples `(p_j)` of
/// subalgebra points until `||sum_j m_j p_j - p||_2 < 2^-(k+1)`, then return
/// a subalgebra point within `2^-(k+1)` of `sum_j E(m_j) p_j`; the total
/// error is below `2^-k` by 2-norm contractivity of the expectation.
pub fn pimsner_popa_expectation<O: OracleAccess + ?Sized>(
    oracle: &O,
    basis: &[&dyn ComputablePoint],
    basis_expectations: &[&dyn ComputablePoint],
    p: &TermCode,
    k: u32,
    budget: u64,
) -> Result<TermCode, EngineError> {
    if basis.is_empty() || basis.len() != basis_expectations.len() {
        return Err(EngineError::Invalid(
            "reconstruction basis and expectations must align and be nonempty".into(),
        ));
    }
    let j_len = basis.len();
    let log_j = 64 - (j_len as u64).leading_zeros(); // <= ceil(log2(J)) + 1
    let approx_k = k + 5 + log_j;
    let counter = CountingOracle::new(oracle, budget);

    let mut basis_terms = Vec::with_capacity(j_len);
    for m in basis {
        let code = m.approximant(approx_k)?;
        basis_terms.push(termalg::decode(&code)?);
    }
    let p_term = termalg::decode(p)?;
    let n_count = oracle.n_generator_count();

    // accept while leaving 3 * 2^-(k+5) slack for the approximation,
    // inclusion and estimation errors
    let threshold = Dyadic::new(13.into(), -(k as i64 + 5));

    let mut idx = 0u64;
    let coeffs: Vec<Term> = 'outer: loop {
        let Some(components) = tuple_unpair(idx, j_len) else {
            idx += 1;
            continue;
        };
        idx += 1;
        let mut coeff_terms = Vec::with_capacity(j_len);
        for c in &components {
            match termalg::decode(&TermCode::from_u64(*c)) {
                Ok(t) if t.validate(n_count).is_ok() => coeff_terms.push(t),
                _ => continue 'outer,
            }
        }
        // sum_j m_j p_j - p, scaled into the unit ball
        let mut items = Vec::with_capacity(j_len + 1);
        for (m_term, c_term) in basis_terms.iter().zip(&coeff_terms) {
            let included = match counter.include(&termalg::encode(c_term)?, approx_k) {
                Ok(c) => c,
                Err(e) if is_candidate_rejection(&e) => continue 'outer,
                Err(e) => return Err(map_budget(e)),
            };
            items.push(Term::prod(m_term.clone(), termalg::decode(&included)?));
        }
        items.push(Term::neg(p_term.clone()));
        let (sum_term, scale) = Term::scaled_sum(&items);
        let q = match counter.norm2(&termalg::encode(&sum_term)?, k + 5 + scale) {
            Ok(q) => q,
            Err(e) if is_candidate_rejection(&e) => continue 'outer,
            Err(e) => return Err(map_budget(e)),
        };
        if q.shift(scale as i64) < threshold {
            break coeff_terms;
        }
    };

    // target: sum_j E(m_j) p_j as a subalgebra element
    let mut target_items = Vec::with_capacity(j_len);
    for (e_point, c_term) in basis_expectations.iter().zip(&coeffs) {
        let e_code = e_point.approximant(approx_k)?;
        target_items.push(Term::prod(termalg::decode(&e_code)?, c_term.clone()));
    }

    // search a subalgebra point near the target
    let mut code = 0u64;
    loop {
        let candidate = TermCode::from_u64(code);
        code += 1;
        let cand_term = match termalg::decode(&candidate) {
            Ok(t) if t.validate(n_count).is_ok() => t,
            _ => continue,
        };
        let mut items = target_items.clone();
        items.push(Term::neg(cand_term));
        let (diff, scale) = Term::scaled_sum(&items);
        let included = match counter.include(&termalg::encode(&diff)?, k + 5 + scale) {
            Ok(c) => c,
            Err(e) if is_candidate_rejection(&e) => continue,
            Err(e) => return Err(map_budget(e)),
        };
        let q = match counter.norm2(&included, k + 5 + scale) {
            Ok(q) => q,
            Err(e) if is_candidate_rejection(&e) => continue,
            Err(e) => return Err(map_budget(e)),
        };
        if q.shift(scale as i64) < threshold {
            return Ok(candidate);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{diagonal_backend, tensor_backend, tensor_target_code};
    use crate::oracle::ExactPoint;
    use crate::termalg::encode;
    use num_rational::BigRational;
    use num_traits::{One, Signed};

    #[test]
    fn recovers_zero_expectation_on_tensor_instance() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        let dist = ExactDistance(backend.clone());
        for k in [2u32, 5, 8] {
            let p = tensor_target_code();
            let out = expectation_from_distance(&oracle, &dist, &p, k, 500_000).unwrap();
            // E_N(1 (x) sz) = 0 exactly; check the returned point against it
            let value = backend.eval_n_code(&out).unwrap();
            let err_sq = backend.algebra().norm_sq(&value);
            let tol = BigRational::new(1.into(), num_bigint::BigInt::from(1u64) << (2 * k));
            assert!(err_sq < tol, "k={k}: point {out} has error^2 {err_sq}");
        }
    }

    #[test]
    fn fixes_included_points() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        let dist = ExactDistance(backend.clone());
        // p = image of the subalgebra generator sz (x) 1
        let p = encode(&Term::Gen(1)).unwrap();
        let out = expectation_from_distance(&oracle, &dist, &p, 6, 500_000).unwrap();
        let value = backend.eval_n_code(&out).unwrap();
        let expected = backend.eval_m_code(&p).unwrap();
        let err_sq = backend.algebra().norm_sq(&value.sub(&expected));
        assert!(err_sq < BigRational::new(1.into(), 4096.into()));
    }

    #[test]
    fn distance_from_expectation_roundtrip() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        struct Planted(TermCode);
        impl ExpectationOracle for Planted {
            fn expectation(&self, _p: &TermCode, _k: u32) -> Result<TermCode, EngineError> {
                Ok(self.0.clone())
            }
        }
        // E_N(1 (x) sz) = 0: the zero point is an exact expectation oracle
        let planted = Planted(crate::oracle::zero_point_code());
        for k in [1u32, 4, 8] {
            let d = distance_from_expectation(&oracle, &planted, &tensor_target_code(), k)
                .unwrap();
            let err = (d.to_rational() - BigRational::one()).abs();
            assert!(
                err < BigRational::new(1.into(), num_bigint::BigInt::from(1u64) << k),
                "k={k}: got {d}"
            );
        }
    }

    #[test]
    fn reconstruction_basis_on_diagonal_instance() {
        let backend = diagonal_backend();
        let oracle = backend.pair_oracle();
        // basis {1, sx} with expectations {1, 0}; 1 = sz*sz as an M-term,
        // and in N-coding 1 = Prod(Gen 0, Gen 0), 0 = the zero point
        let one_m = ExactPoint(encode(&Term::prod(Term::Gen(0), Term::Gen(0))).unwrap());
        let sx_m = ExactPoint(encode(&Term::Gen(1)).unwrap());
        let one_n = ExactPoint(encode(&Term::prod(Term::Gen(0), Term::Gen(0))).unwrap());
        let zero_n = ExactPoint(crate::oracle::zero_point_code());
        let basis: Vec<&dyn ComputablePoint> = vec![&one_m, &sx_m];
        let expectations: Vec<&dyn ComputablePoint> = vec![&one_n, &zero_n];

        // p = e11 = (1 + sz)/2: expectation is e11 itself
        let e11 = Term::comb(
            crate::exactnum::GaussianRational::from_ratio(1, 2),
            Term::prod(Term::Gen(0), Term::Gen(0)),
            crate::exactnum::GaussianRational::from_ratio(1, 2),
            Term::Gen(0),
        )
        .unwrap();
        let p = encode(&e11).unwrap();
        let k = 6;
        let out =
            pimsner_popa_expectation(&oracle, &basis, &expectations, &p, k, 2_000_000).unwrap();
        let value = backend.eval_n_code(&out).unwrap();
        let expected = backend.eval_m_code(&p).unwrap();
        let err_sq = backend.algebra().norm_sq(&value.sub(&expected));
        assert!(
            err_sq < BigRational::new(1.into(), num_bigint::BigInt::from(1u64) << (2 * k)),
            "err^2 = {err_sq}"
        );

        // p = sx: expectation is 0
        let p = encode(&Term::Gen(1)).unwrap();
        let out =
            pimsner_popa_expectation(&oracle, &basis, &expectations, &p, k, 2_000_000).unwrap();
        let value = backend.eval_n_code(&out).unwrap();
        let err_sq = backend.algebra().norm_sq(&value);
        assert!(err_sq < BigRational::new(1.into(), num_bigint::BigInt::from(1u64) << (2 * k)));
    }

    #[test]
    fn budget_exhaustion_reported() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        let dist = ExactDistance(backend.clone());
        let err = expectation_from_distance(&oracle, &dist, &tensor_target_code(), 6, 3);
        assert!(matches!(err, Err(EngineError::BudgetExhausted { .. })));
    }
}
