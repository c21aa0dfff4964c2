//! Certificate scoring. A candidate witness `u` certifies a distance lower
//! bound when it is nearly unitary, nearly commutes with the leading
//! subalgebra generators, and fails by `2r` to commute with the target.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{CertificateParams, EngineError};
use crate::exactnum::{dyadic_sqrt, truncated_sub, Dyadic};
use crate::oracle::{KazhdanData, OracleAccess, OracleError, SpectralGapFunction};
use crate::termalg::{self, AdjointStructure, Term, TermCode};

/// The unitary-rounding shift `g`: in any tracial *-algebra, a contraction
/// `u` with `||u u* - 1||_2 < 2^-g(k)` lies within `2^-k` of a unitary, by
/// rounding to the polar unitary (`d(u, u') = || |u| - 1 ||_2 <=
/// || |u|^2 - 1 ||_2 = ||u u* - 1||_2`). The identity shift suffices.
pub fn unitary_rounding_shift(k: u32) -> u32 {
    k
}

/// The gap level needed to certify at precision `n`: `f(g(n+2) + 1)`, which
/// with the identity shift is `f(n+3)`.
pub fn certificate_level(f: &SpectralGapFunction, n: u32) -> u32 {
    f.eval(unitary_rounding_shift(n.saturating_add(2)).saturating_add(1))
}

/// `max(||u u* - 1||_2, max_i ||[u, a_i]||_2, 2r - ||[u, b]||_2)` (last
/// component truncated at zero) within `2^-k`, each component evaluated to
/// within `2^-(k+2)` and the max taken exactly on dyadics.
///
/// `n_gens` are the subalgebra-side codes of the distinct generators among
/// the first `params.m` special points; they are included through the
/// oracle's inclusion map at a precision folded into the component budget.
///
/// `||u u* - 1||_2` is reached through norm queries alone via the exact
/// trace identity `||u u* - 1||_2^2 = ||u u*||_2^2 - 2 ||u||_2^2 + 1`.
pub fn witness_score<O: OracleAccess + ?Sized>(
    oracle: &O,
    u: &TermCode,
    n_gens: &[TermCode],
    b: &TermCode,
    params: &CertificateParams,
    k: u32,
) -> Result<Dyadic, OracleError> {
    let kc = k + 2; // per-component precision
    let u_term = termalg::decode(u)?;
    let b_term = termalg::decode(b)?;

    // non-unitarity defect
    let j = 2 * kc + 6;
    let uu = Term::prod(u_term.clone(), Term::adj(u_term.clone()));
    let q1 = oracle.norm2(&termalg::encode(&uu)?, j)?.to_rational();
    let q2 = oracle.norm2(u, j)?.to_rational();
    let two = BigRational::from_integer(BigInt::from(2));
    let defect_sq = &q1 * &q1 - two * &q2 * &q2 + BigRational::one();
    let defect_sq = if defect_sq.is_negative() { BigRational::zero() } else { defect_sq };
    let comp1 = dyadic_sqrt(&defect_sq, kc + 1).map_err(|e| OracleError::Backend(e.to_string()))?;

    // commutators with the included generators
    let mut comp2 = Dyadic::zero();
    for g in n_gens {
        let included = oracle.include(g, kc + 3)?;
        let g_term = termalg::decode(&included)?;
        let q = commutator_norm(oracle, &u_term, &g_term, kc + 2)?;
        comp2 = comp2.max(q);
    }

    // 2r truncated-minus the commutator with the target
    let qb = commutator_norm(oracle, &u_term, &b_term, kc + 2)?;
    let two_r = &params.r + &params.r;
    let slack = truncated_sub(&two_r, &qb.to_rational());
    let comp3 = Dyadic::round_rational_floor(&slack, kc + 1);

    Ok(comp1.max(comp2).max(comp3))
}

/// `2 * ||(xy - yx)/2||_2` with the norm query at precision `k`; the halved
/// difference is a rounded combination, so it is always a rational point.
fn commutator_norm<O: OracleAccess + ?Sized>(
    oracle: &O,
    x: &Term,
    y: &Term,
    k: u32,
) -> Result<Dyadic, OracleError> {
    let half = Term::half_diff(
        Term::prod(x.clone(), y.clone()),
        Term::prod(y.clone(), x.clone()),
    );
    Ok(oracle.norm2(&termalg::encode(&half)?, k)?.shift(1))
}

/// Spectral gap function from Kazhdan data:
/// `f(n) = max over the first m rational points of the commutator bound at
/// precision n + p`. Total and computable; validated eagerly so the
/// returned function is infallible.
pub fn gap_function_from_kazhdan(
    kd: &KazhdanData,
    star: &AdjointStructure,
    n_gen_count: Option<u64>,
) -> Result<SpectralGapFunction, EngineError> {
    kd.validate().map_err(EngineError::Oracle)?;
    for c in &kd.set_indices {
        let t = termalg::decode(c).map_err(OracleError::Term)?;
        t.validate(n_gen_count)
            .map_err(|e| EngineError::Invalid(format!("Kazhdan set member {c}: {e}")))?;
    }
    // (max star-closed index, ceil log2 leaf cost) per valid point code
    let mut items: Vec<(u64, u64)> = Vec::new();
    for code in 0..kd.m {
        let t = match termalg::decode(&TermCode::from_u64(code)) {
            Ok(t) => t,
            Err(_) => continue,
        };
        if t.validate(n_gen_count).is_err() {
            continue;
        }
        // commutator_bound(t, k) = max(idx, k + log_cost); record the parts
        let j0 = termalg::commutator_bound_term(&t, 0, star);
        let j1 = termalg::commutator_bound_term(&t, 64, star);
        let log_cost = j1 - 64.min(j1); // j(k) - k for large k
        items.push((j0, log_cost));
    }
    if items.is_empty() {
        return Err(EngineError::Invalid("no valid rational points below the Kazhdan bound".into()));
    }
    let p = kd.p as u64;
    Ok(SpectralGapFunction::new(move |n| {
        let mut out = 0u64;
        for (idx, log_cost) in &items {
            out = out.max(*idx).max(n as u64 + p + log_cost);
        }
        out.min(u32::MAX as u64) as u32
    }))
}
