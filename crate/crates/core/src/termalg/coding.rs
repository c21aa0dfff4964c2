//! Fixed bijective enumerations used by the term coding: naturals onto
//! rationals, Gaussian rationals, and rounded coefficient pairs, plus the
//! Cantor pairing function. Fixing these listings makes every enumeration in
//! the crate reproducible.

use std::collections::HashMap;
use std::sync::{LazyLock, Mutex};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::exactnum::GaussianRational;

/// Scan cap for ranking coefficient pairs. Coefficients whose pair sits
/// deeper than this in the fixed listing cannot be encoded (they can still
/// be denoted semantically; only the syntactic code is refused).
pub const PAIR_SCAN_CAP: u64 = 100_000_000;

pub fn cantor_pair(x: &BigUint, y: &BigUint) -> BigUint {
    let s = x + y;
    (&s * (&s + 1u32)) / 2u32 + y
}

pub fn cantor_unpair(z: &BigUint) -> (BigUint, BigUint) {
    let w = ((z * 8u32 + 1u32).sqrt() - 1u32) / 2u32;
    let t = (&w * (&w + 1u32)) / 2u32;
    let y = z - t;
    let x = &w - &y;
    (x, y)
}

pub fn cantor_pair_u64(x: u64, y: u64) -> BigUint {
    cantor_pair(&BigUint::from(x), &BigUint::from(y))
}

/// Zigzag bijection between naturals and integers: 0, 1, -1, 2, -2, ...
fn int_from_index(i: u64) -> BigInt {
    if i == 0 {
        BigInt::zero()
    } else if i % 2 == 1 {
        BigInt::from((i + 1) / 2)
    } else {
        -BigInt::from(i / 2)
    }
}

fn int_index(n: &BigInt) -> BigUint {
    if n.is_zero() {
        BigUint::zero()
    } else if n.is_positive() {
        n.magnitude() * 2u32 - 1u32
    } else {
        n.magnitude() * 2u32
    }
}

// ---------------------------------------------------------------------------
// Rationals
// ---------------------------------------------------------------------------

struct RatListing {
    by_index: Vec<BigRational>,
    index_of: HashMap<BigRational, u64>,
    next_code: u64,
}

static RAT_LISTING: LazyLock<Mutex<RatListing>> = LazyLock::new(|| {
    Mutex::new(RatListing { by_index: Vec::new(), index_of: HashMap::new(), next_code: 0 })
});

/// Raw candidate behind code `c`: numerator `zigzag(a)`, denominator `b+1`;
/// kept only when the fraction is in lowest terms, which makes the filtered
/// listing a bijection.
fn rat_candidate(code: u64) -> Option<BigRational> {
    let (a, b) = cantor_unpair(&BigUint::from(code));
    let a = a.to_u64()?;
    let num = int_from_index(a);
    let den = b + 1u32;
    if num.magnitude().gcd(&den) != BigUint::one() {
        return None;
    }
    Some(BigRational::new(num, BigInt::from(den)))
}

fn rat_extend_until(listing: &mut RatListing, pred: impl Fn(&RatListing) -> bool) {
    while !pred(listing) {
        let code = listing.next_code;
        listing.next_code += 1;
        if let Some(q) = rat_candidate(code) {
            listing.index_of.insert(q.clone(), listing.by_index.len() as u64);
            listing.by_index.push(q);
        }
    }
}

pub fn rational_from_index(i: u64) -> BigRational {
    let mut listing = RAT_LISTING.lock().unwrap();
    rat_extend_until(&mut listing, |l| l.by_index.len() as u64 > i);
    listing.by_index[i as usize].clone()
}

pub fn rational_index(q: &BigRational) -> u64 {
    let mut listing = RAT_LISTING.lock().unwrap();
    if let Some(&i) = listing.index_of.get(q) {
        return i;
    }
    // The raw code of q bounds how far the scan must go.
    let a = int_index(q.numer());
    let b = q.denom().magnitude() - BigUint::one();
    let code = cantor_pair(&a, &b)
        .to_u64()
        .expect("rational too large for the fixed listing");
    rat_extend_until(&mut listing, |l| l.next_code > code);
    listing.index_of[q]
}

/// The fixed listing of positive rationals: the positive subsequence of the
/// rational listing.
pub fn positive_rational_from_index(i: u64) -> BigRational {
    struct Pos {
        items: Vec<BigRational>,
        scan: u64,
    }
    static POS: LazyLock<Mutex<Pos>> =
        LazyLock::new(|| Mutex::new(Pos { items: Vec::new(), scan: 0 }));
    let mut pos = POS.lock().unwrap();
    while pos.items.len() as u64 <= i {
        let q = rational_from_index(pos.scan);
        pos.scan += 1;
        if q.is_positive() {
            pos.items.push(q);
        }
    }
    pos.items[i as usize].clone()
}

// ---------------------------------------------------------------------------
// Gaussian rationals
// ---------------------------------------------------------------------------

pub fn gaussian_from_index(i: &BigUint) -> Option<GaussianRational> {
    let (re_idx, im_idx) = cantor_unpair(i);
    let re = rational_from_index(re_idx.to_u64()?);
    let im = rational_from_index(im_idx.to_u64()?);
    Some(GaussianRational::new(re, im))
}

pub fn gaussian_index(g: &GaussianRational) -> BigUint {
    let re = BigUint::from(rational_index(&g.re));
    let im = BigUint::from(rational_index(&g.im));
    cantor_pair(&re, &im)
}

// ---------------------------------------------------------------------------
// Rounded coefficient pairs
// ---------------------------------------------------------------------------

/// Exact test for `|lambda| + |mu| <= 1` using only the rational squared
/// moduli `u = |lambda|^2`, `v = |mu|^2`:
/// `v <= 1  &&  1 + v - u >= 0  &&  4v <= (1 + v - u)^2`.
pub fn rounded_pair_ok(lambda: &GaussianRational, mu: &GaussianRational) -> bool {
    let u = lambda.modulus_sq();
    let v = mu.modulus_sq();
    let one = BigRational::one();
    if v > one {
        return false;
    }
    let s = &one + &v - &u;
    if s.is_negative() {
        return false;
    }
    BigRational::from_integer(BigInt::from(4)) * &v <= &s * &s
}

fn gr(num: i64, den: i64, inum: i64, iden: i64) -> GaussianRational {
    GaussianRational::new(
        BigRational::new(BigInt::from(num), BigInt::from(den)),
        BigRational::new(BigInt::from(inum), BigInt::from(iden)),
    )
}

/// Hand-picked head of the coefficient-pair listing. These are the pairs the
/// engine's own term builders use, so they get the smallest codes; the tail
/// of the listing is a scan over all Gaussian pairs filtered for validity.
fn curated_pairs() -> Vec<(GaussianRational, GaussianRational)> {
    vec![
        (gr(0, 1, 0, 1), gr(0, 1, 0, 1)),   // 0
        (gr(1, 1, 0, 1), gr(0, 1, 0, 1)),   // 1: copy
        (gr(1, 2, 0, 1), gr(1, 2, 0, 1)),   // 2: average
        (gr(1, 2, 0, 1), gr(-1, 2, 0, 1)),  // 3: half difference
        (gr(-1, 1, 0, 1), gr(0, 1, 0, 1)),  // 4: negation
        (gr(0, 1, 0, 1), gr(1, 1, 0, 1)),   // 5
        (gr(0, 1, 1, 1), gr(0, 1, 0, 1)),   // 6: i
        (gr(1, 2, 0, 1), gr(0, 1, 1, 2)),   // 7
        (gr(1, 4, 0, 1), gr(1, 4, 0, 1)),   // 8
        (gr(3, 4, 0, 1), gr(1, 4, 0, 1)),   // 9
        (gr(1, 4, 0, 1), gr(3, 4, 0, 1)),   // 10
        (gr(1, 2, 0, 1), gr(0, 1, 0, 1)),   // 11: halve
        (gr(0, 1, 0, 1), gr(1, 2, 0, 1)),   // 12
        (gr(-1, 2, 0, 1), gr(1, 2, 0, 1)),  // 13
        (gr(0, 1, 1, 2), gr(1, 2, 0, 1)),   // 14
        (gr(0, 1, -1, 1), gr(0, 1, 0, 1)),  // 15: -i
    ]
}

struct PairListing {
    by_index: Vec<(GaussianRational, GaussianRational)>,
    index_of: HashMap<(GaussianRational, GaussianRational), u64>,
    next_code: u64,
}

static PAIR_LISTING: LazyLock<Mutex<PairListing>> = LazyLock::new(|| {
    let curated = curated_pairs();
    let mut index_of = HashMap::new();
    for (i, p) in curated.iter().enumerate() {
        debug_assert!(rounded_pair_ok(&p.0, &p.1));
        index_of.insert(p.clone(), i as u64);
    }
    Mutex::new(PairListing { by_index: curated, index_of, next_code: 0 })
});

fn pair_candidate(code: u64) -> Option<(GaussianRational, GaussianRational)> {
    let (li, mi) = cantor_unpair(&BigUint::from(code));
    let lambda = gaussian_from_index(&li)?;
    let mu = gaussian_from_index(&mi)?;
    if rounded_pair_ok(&lambda, &mu) {
        Some((lambda, mu))
    } else {
        None
    }
}

fn pair_extend_one(listing: &mut PairListing) {
    let code = listing.next_code;
    listing.next_code += 1;
    if let Some(p) = pair_candidate(code) {
        if !listing.index_of.contains_key(&p) {
            listing.index_of.insert(p.clone(), listing.by_index.len() as u64);
            listing.by_index.push(p);
        }
    }
}

/// The `i`-th valid coefficient pair; `None` when the scan cap is exceeded.
pub fn pair_from_index(i: u64) -> Option<(GaussianRational, GaussianRational)> {
    let mut listing = PAIR_LISTING.lock().unwrap();
    while (listing.by_index.len() as u64) <= i {
        if listing.next_code >= PAIR_SCAN_CAP {
            return None;
        }
        pair_extend_one(&mut listing);
    }
    Some(listing.by_index[i as usize].clone())
}

/// Rank of a valid coefficient pair in the fixed listing; `None` when the
/// pair is deeper than the scan cap.
pub fn pair_index(lambda: &GaussianRational, mu: &GaussianRational) -> Option<u64> {
    debug_assert!(rounded_pair_ok(lambda, mu));
    let key = (lambda.clone(), mu.clone());
    let mut listing = PAIR_LISTING.lock().unwrap();
    if let Some(&i) = listing.index_of.get(&key) {
        return Some(i);
    }
    let code = cantor_pair(&gaussian_index(lambda), &gaussian_index(mu)).to_u64()?;
    if code >= PAIR_SCAN_CAP {
        return None;
    }
    while listing.next_code <= code {
        pair_extend_one(&mut listing);
    }
    listing.index_of.get(&key).copied()
}
