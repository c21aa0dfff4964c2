//! Emission log records for the interleaved search. One line per event;
//! the accept decision is replayable from the log alone.

use std::fmt;

use num_rational::BigRational;

use crate::exactnum::{format_rational, Dyadic};
use crate::termalg::TermCode;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    /// A certificate at level `r` was accepted for `witness`, establishing
    /// the stated lower bound on the distance.
    Lower { r: BigRational, bound: Dyadic, witness: TermCode },
    /// The rational point `point` produced the stated upper bound.
    Upper { point: TermCode, bound: Dyadic },
    /// The two bound streams met within `2^-k` around the rational `r`.
    Accept { r: BigRational, k: u32 },
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Lower { r, bound, witness } => {
                write!(f, "LB r={} bound={} witness={}", format_rational(r), bound, witness)
            }
            Event::Upper { point, bound } => {
                write!(f, "UB point={} bound={}", point, bound)
            }
            Event::Accept { r, k } => {
                write!(f, "ACCEPT r={} k={}", format_rational(r), k)
            }
        }
    }
}
