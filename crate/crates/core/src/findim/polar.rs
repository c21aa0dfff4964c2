//! Nearest-unitary rounding. A floating-point polar factor is only a hint:
//! the returned element is made exactly unitary by a Cayley transform of an
//! exactly skew-Hermitian rational matrix, and the distance bound is
//! re-verified by exact norm evaluation. This realizes the unitary-rounding
//! guarantee with shift `g(k) = k`: for a contraction `u`,
//! `d(u, u') <= ||u u* - 1||_2` up to the numeric hint tolerance.

use nalgebra::{Complex, DMatrix};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::algebra::{BlockMatrix, MultiMatrixAlgebra};
use super::matrix::Mat;
use super::FindimError;
use crate::exactnum::{dyadic_sqrt, Dyadic, GaussianRational};

/// Granularity (as a power of two) at which the numeric hint is rationalized.
const SNAP_BITS: u32 = 44;

/// Precision of the returned certified distance bound.
const BOUND_BITS: u32 = 40;

type CMat = DMatrix<Complex<f64>>;

fn to_numeric(m: &Mat) -> Result<CMat, FindimError> {
    let n = m.rows();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let e = m.get(i, j);
            let re = e.re.to_f64().ok_or_else(|| FindimError::Numeric("overflow".into()))?;
            let im = e.im.to_f64().ok_or_else(|| FindimError::Numeric("overflow".into()))?;
            if !re.is_finite() || !im.is_finite() {
                return Err(FindimError::Numeric("non-finite entry".into()));
            }
            out[(i, j)] = Complex::new(re, im);
        }
    }
    Ok(out)
}

/// Round to the nearest multiple of `2^-SNAP_BITS`; tiny floating-point fuzz
/// snaps to exact zero.
fn snap(x: f64) -> Result<BigRational, FindimError> {
    if !x.is_finite() {
        return Err(FindimError::Numeric("non-finite hint entry".into()));
    }
    let exact = BigRational::from_float(x)
        .ok_or_else(|| FindimError::Numeric("unrepresentable hint entry".into()))?;
    let scale = BigRational::from_integer(BigInt::from(1u64) << SNAP_BITS);
    let scaled = exact * &scale + BigRational::new(BigInt::from(1), BigInt::from(2));
    let floored = num_integer::Integer::div_floor(scaled.numer(), scaled.denom());
    Ok(BigRational::new(floored, BigInt::from(1u64) << SNAP_BITS))
}

fn min_singular_value(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Fixed list of Cayley phase parameters; `t` rational gives the exactly
/// unimodular phase `c = ((1-t^2) + 2t i)/(1+t^2)`.
fn phase_candidates() -> Vec<BigRational> {
    [0i64, 1, -1, 2, -2, 3, -3]
        .iter()
        .map(|&n| BigRational::from_integer(BigInt::from(n)))
        .chain(
            [(1i64, 2i64), (-1, 2), (1, 3), (-1, 3), (1, 4), (-1, 4), (2, 3), (-2, 3)]
                .iter()
                .map(|&(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d))),
        )
        .collect()
}

fn phase_from_t(t: &BigRational) -> GaussianRational {
    let one = BigRational::from_integer(BigInt::from(1));
    let t2 = t * t;
    let den = &one + &t2;
    GaussianRational::new((&one - &t2) / &den, (t + t) / den)
}

fn round_block(m: &Mat) -> Result<Mat, FindimError> {
    let n = m.rows();
    let numeric = to_numeric(m)?;
    let svd = numeric.clone().svd(true, true);
    let u_hint = svd.u.ok_or_else(|| FindimError::Numeric("svd failed".into()))?
        * svd.v_t.ok_or_else(|| FindimError::Numeric("svd failed".into()))?;

    // pick a phase keeping 1 + conj(c) u_hint well conditioned; with more
    // candidate phases than eigenvalues one always works
    let eye = CMat::identity(n, n);
    let mut best: Option<(f64, BigRational)> = None;
    for t in phase_candidates() {
        let c = phase_from_t(&t);
        let c_num = Complex::new(
            c.re.to_f64().unwrap_or(f64::NAN),
            -c.im.to_f64().unwrap_or(f64::NAN),
        );
        let shifted = &eye + &u_hint * c_num;
        let sv = min_singular_value(&shifted);
        if best.as_ref().map_or(true, |(b, _)| sv > *b) {
            best = Some((sv, t));
        }
    }
    let (quality, t) = best.unwrap();
    if quality < 1e-3 {
        return Err(FindimError::Numeric("no well-conditioned Cayley phase".into()));
    }
    let c = phase_from_t(&t);
    let c_num =
        Complex::new(c.re.to_f64().unwrap(), -c.im.to_f64().unwrap());
    let v = &u_hint * c_num;
    let lhs = &eye + &v;
    let rhs = &eye - &v;
    let s_hint = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| FindimError::Numeric("singular Cayley shift".into()))?;

    // rationalize and force exact skew-Hermitian symmetry
    let s_rat = {
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let e = s_hint[(i, j)];
                s.set(i, j, GaussianRational::new(snap(e.re)?, snap(e.im)?));
            }
        }
        let half = GaussianRational::from_ratio(1, 2);
        s.sub(&s.adjoint()).scale(&half)
    };

    // exact Cayley transform: 1 + S is invertible for skew-Hermitian S
    let eye_exact = Mat::identity(n);
    let x = eye_exact
        .add(&s_rat)
        .solve(&eye_exact.sub(&s_rat))
        .ok_or_else(|| FindimError::Numeric("exact Cayley inversion failed".into()))?;
    let out = x.scale(&c);
    debug_assert_eq!(out.mul(&out.adjoint()), Mat::identity(n));
    Ok(out)
}

/// Exactly unitary element near `u`, with a certified dyadic upper bound on
/// `d(u, u')` obtained by exact norm evaluation of the returned pair.
pub fn polar_round_unitary(
    algebra: &MultiMatrixAlgebra,
    u: &BlockMatrix,
) -> Result<(BlockMatrix, Dyadic), FindimError> {
    algebra.check_shape(u)?;
    let exact_unitary = u
        .blocks
        .iter()
        .all(|b| b.mul(&b.adjoint()) == Mat::identity(b.rows()));
    if exact_unitary {
        return Ok((u.clone(), Dyadic::zero()));
    }
    let mut blocks = Vec::with_capacity(u.blocks.len());
    for b in &u.blocks {
        blocks.push(round_block(b)?);
    }
    let rounded = BlockMatrix::from_blocks(blocks);
    let dist_sq = algebra.norm_sq(&u.sub(&rounded));
    let bound = dyadic_sqrt(&dist_sq, BOUND_BITS)?.add(&Dyadic::two_pow(-(BOUND_BITS as i64)));
    Ok((rounded, bound))
}
