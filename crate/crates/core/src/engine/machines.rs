//! The two-machine interleaved distance search. One machine enumerates
//! subalgebra points and emits witness-backed upper bounds; the other
//! enumerates (candidate unitary, level) pairs and emits certificate-backed
//! lower bounds. The search accepts once the streams meet within `2^-k`.
//!
//! Termination of the accept condition is a structural hypothesis on the
//! ambient algebra; both machines therefore run under a query budget and
//! the search reports the best interval on exhaustion.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::certificates::witness_score;
use super::events::Event;
use super::{CertificateParams, CountingOracle, DistanceResult, EngineError};
use crate::exactnum::Dyadic;
use crate::oracle::{pair_distance, OracleAccess, OracleError, PairOracle, SpectralGapFunction};
use crate::termalg::{self, coding, TermCode, TermError};

/// Result of the interleaved search plus its serialized emission log.
#[derive(Debug, Clone, PartialEq)]
pub struct InterleaveOutcome {
    pub result: DistanceResult,
    pub events: Vec<Event>,
}

enum Step {
    Emitted(Event),
    Quiet,
    Exhausted,
}

fn is_candidate_rejection(e: &OracleError) -> bool {
    matches!(
        e,
        OracleError::Term(TermError::GeneratorOutOfRange { .. })
            | OracleError::Term(TermError::GeneratorIndexOverflow)
            | OracleError::Term(TermError::CoefficientTooDeep)
    )
}

/// Enumerates `(candidate, level)` pairs under a fixed pairing of term codes
/// with the fixed positive-rational listing (coarse levels first within each
/// term-code band). A candidate certifies when its score at precision `F+1`
/// stays below `2^-(F+1)`, where `F = max(f(k+3), k+3)`; the emitted bound
/// `r - 2^-k` is then sound:
///
/// the score bounds force, via the gap function at level `k+3`, a unit-ball
/// element of the relative commutant within `2^-(k+3)` of the witness, hence
/// by polar rounding a unitary `u2` there with
/// `d(u, u2) <= 2^-(k+3) + score + 2^-(k+2)`; conjugation by `u2` fixes the
/// subalgebra pointwise, giving `||[b, u2]||_2 <= 2 d(b, N)`, while the
/// third score component forces `||[b, u2]||_2 >= 2r - score - 2 d(u, u2)`,
/// and the budget closes with `d(b, N) >= r - (9/16) 2^-k`.
struct LowerBoundMachine<'a, O: OracleAccess> {
    oracle: &'a O,
    b: TermCode,
    n_gens: Vec<TermCode>,
    msize: u64,
    score_precision: u32,
    threshold: Dyadic,
    emit_k: u32,
    next: u64,
    done: bool,
}

impl<'a, O: OracleAccess> LowerBoundMachine<'a, O> {
    fn new(oracle: &'a O, b: TermCode, f: &SpectralGapFunction, k: u32) -> Self {
        let level = k + 3;
        // any pointwise-larger function than a gap function is one; taking
        // the max with the identity keeps the certificate chain sound for
        // degenerate inputs
        let msize = (f.eval(level) as u64).max(level as u64);
        let gen_count = oracle.n_generator_count().unwrap_or(msize);
        let distinct = msize.min(gen_count);
        let n_gens = (0..distinct).map(|i| TermCode::from_u64(4 * i)).collect();
        let score_precision = u32::try_from(msize.saturating_add(1)).unwrap_or(u32::MAX);
        let threshold = Dyadic::two_pow(-(score_precision as i64));
        LowerBoundMachine {
            oracle,
            b,
            n_gens,
            msize,
            score_precision,
            threshold,
            emit_k: k,
            next: 0,
            done: false,
        }
    }

    fn step(&mut self) -> Result<Step, EngineError> {
        if self.done {
            return Ok(Step::Exhausted);
        }
        let idx = BigUint::from(self.next);
        self.next += 1;
        let (u_code, r_idx) = coding::cantor_unpair(&idx);
        let Some(r_idx) = r_idx.to_u64() else {
            return Ok(Step::Quiet);
        };
        let u = TermCode(u_code);
        let r = coding::positive_rational_from_index(r_idx);
        let params = CertificateParams { r: r.clone(), m: self.msize };
        match witness_score(self.oracle, &u, &self.n_gens, &self.b, &params, self.score_precision)
        {
            Ok(score) => {
                if score < self.threshold {
                    let bound = Dyadic::round_rational_floor(
                        &(&r - Dyadic::two_pow(-(self.emit_k as i64)).to_rational()),
                        self.emit_k + 32,
                    );
                    Ok(Step::Emitted(Event::Lower { r, bound, witness: u }))
                } else {
                    Ok(Step::Quiet)
                }
            }
            Err(OracleError::Budget { .. }) => {
                self.done = true;
                Ok(Step::Exhausted)
            }
            Err(e) if is_candidate_rejection(&e) => Ok(Step::Quiet),
            Err(e) => Err(EngineError::Oracle(e)),
        }
    }
}

/// Enumerates subalgebra point codes and emits
/// `pair_distance(b, p', k+2) + 2^-(k+2)`, a sound upper bound on
/// `d(b, N)`; the running minimum is nonincreasing.
struct UpperBoundMachine<'a, O: OracleAccess> {
    oracle: &'a O,
    b: TermCode,
    emit_k: u32,
    next: u64,
    done: bool,
}

impl<'a, O: OracleAccess> UpperBoundMachine<'a, O> {
    fn new(oracle: &'a O, b: TermCode, k: u32) -> Self {
        UpperBoundMachine { oracle, b, emit_k: k, next: 0, done: false }
    }

    fn step(&mut self) -> Result<Step, EngineError> {
        if self.done {
            return Ok(Step::Exhausted);
        }
        let point = TermCode::from_u64(self.next);
        self.next += 1;
        // skip codes that are not rational points of the subalgebra
        // presentation; this costs no queries
        match termalg::decode(&point) {
            Ok(t) => {
                if t.validate(self.oracle.n_generator_count()).is_err() {
                    return Ok(Step::Quiet);
                }
            }
            Err(_) => return Ok(Step::Quiet),
        }
        match pair_distance(self.oracle, &self.b, &point, self.emit_k + 2) {
            Ok(d) => {
                let bound = d.add(&Dyadic::two_pow(-(self.emit_k as i64 + 2)));
                Ok(Step::Emitted(Event::Upper { point, bound }))
            }
            Err(OracleError::Budget { .. }) => {
                self.done = true;
                Ok(Step::Exhausted)
            }
            Err(e) if is_candidate_rejection(&e) => Ok(Step::Quiet),
            Err(e) => Err(EngineError::Oracle(e)),
        }
    }
}

/// Running accept state: scans the serialized event stream and decides.
struct AcceptScan {
    best_lb: Dyadic,
    best_ub: Dyadic,
    eps: Dyadic,
    k: u32,
}

impl AcceptScan {
    fn new(seed_upper: Dyadic, k: u32) -> Self {
        AcceptScan {
            best_lb: Dyadic::zero(),
            best_ub: seed_upper,
            eps: Dyadic::two_pow(-(k as i64)),
            k,
        }
    }

    /// Feed one event; on acceptance returns the accept event and the
    /// certified value.
    fn feed(&mut self, event: &Event) -> Option<(Event, Dyadic)> {
        match event {
            Event::Lower { bound, .. } => {
                if *bound > self.best_lb {
                    self.best_lb = bound.clone();
                }
            }
            Event::Upper { bound, .. } => {
                if *bound < self.best_ub {
                    self.best_ub = bound.clone();
                }
            }
            Event::Accept { .. } => {}
        }
        // accept when some rational r has (upper < r) and (lower >= r - 2^-k);
        // r = best_lb + 2^-k is the canonical choice
        if self.best_ub < self.best_lb.add(&self.eps) {
            let r = self.best_lb.add(&self.eps);
            let value = r.sub(&Dyadic::two_pow(-(self.k as i64 + 1)));
            let value = if value.is_negative() { Dyadic::zero() } else { value };
            Some((Event::Accept { r: r.to_rational(), k: self.k }, value))
        } else {
            None
        }
    }
}

/// Seed upper estimate `||b||_2 + slack >= d(b, N)` (the zero point is
/// always in the subalgebra); queried outside the budget so exhaustion
/// intervals are never vacuous.
fn seed_upper(oracle: &PairOracle, b: &TermCode, k_int: u32) -> Result<Event, EngineError> {
    let q = oracle.norm2(b, k_int + 2)?;
    let bound = q.add(&Dyadic::two_pow(-(k_int as i64 + 2)));
    Ok(Event::Upper { point: crate::oracle::zero_point_code(), bound })
}

/// Deterministic reference mode: strict round-robin alternation, lower
/// machine first. `budget` caps the oracle queries of each machine
/// separately.
pub fn interleaved_distance(
    oracle: &PairOracle,
    b: &TermCode,
    f: &SpectralGapFunction,
    k: u32,
    budget: u64,
) -> Result<InterleaveOutcome, EngineError> {
    let k_int = k + 2;
    let seed = seed_upper(oracle, b, k_int)?;
    let mut events = vec![seed.clone()];
    let mut scan = AcceptScan::new(match &seed {
        Event::Upper { bound, .. } => bound.clone(),
        _ => unreachable!(),
    }, k);

    let lower_counter = CountingOracle::new(oracle, budget);
    let upper_counter = CountingOracle::new(oracle, budget);
    let mut lower = LowerBoundMachine::new(&lower_counter, b.clone(), f, k_int);
    let mut upper = UpperBoundMachine::new(&upper_counter, b.clone(), k_int);

    let mut lower_live = true;
    let mut upper_live = true;
    while lower_live || upper_live {
        for side in 0..2 {
            let step = if side == 0 {
                if !lower_live {
                    continue;
                }
                lower.step()?
            } else {
                if !upper_live {
                    continue;
                }
                upper.step()?
            };
            match step {
                Step::Exhausted => {
                    if side == 0 {
                        lower_live = false;
                    } else {
                        upper_live = false;
                    }
                }
                Step::Quiet => {}
                Step::Emitted(e) => {
                    events.push(e.clone());
                    if let Some((accept, value)) = scan.feed(&e) {
                        events.push(accept);
                        return Ok(InterleaveOutcome {
                            result: DistanceResult::Certified { value, k },
                            events,
                        });
                    }
                }
            }
        }
    }
    let queries_spent = lower_counter.spent() + upper_counter.spent();
    Ok(InterleaveOutcome {
        result: DistanceResult::BudgetExhausted {
            lower: scan.best_lb,
            upper: scan.best_ub,
            queries_spent,
        },
        events,
    })
}

enum RoundMsg {
    Step(Option<Event>),
    Done(u64),
    Fatal(Box<EngineError>),
}

fn run_machine_thread<O: OracleAccess>(
    mut step: impl FnMut() -> Result<Step, EngineError>,
    counter: &CountingOracle<'_, O>,
    tx: mpsc::SyncSender<RoundMsg>,
    stop: &AtomicBool,
) {
    loop {
        if stop.load(Ordering::Relaxed) {
            return;
        }
        let msg = match step() {
            Ok(Step::Exhausted) => RoundMsg::Done(counter.spent()),
            Ok(Step::Emitted(e)) => RoundMsg::Step(Some(e)),
            Ok(Step::Quiet) => RoundMsg::Step(None),
            Err(e) => RoundMsg::Fatal(Box::new(e)),
        };
        let finished = matches!(msg, RoundMsg::Done(_) | RoundMsg::Fatal(_));
        if tx.send(msg).is_err() || finished {
            return;
        }
    }
}

/// Parallel mode: the machines run on separate threads, certificate emission
/// is serialized through per-round channels, and the accept decision is
/// replayed from the serialized log in reference round order — so the result
/// always equals [`interleaved_distance`].
pub fn interleaved_distance_parallel(
    oracle: &PairOracle,
    b: &TermCode,
    f: &SpectralGapFunction,
    k: u32,
    budget: u64,
) -> Result<InterleaveOutcome, EngineError> {
    let k_int = k + 2;
    let seed = seed_upper(oracle, b, k_int)?;
    let mut events = vec![seed.clone()];
    let mut scan = AcceptScan::new(match &seed {
        Event::Upper { bound, .. } => bound.clone(),
        _ => unreachable!(),
    }, k);

    let stop = AtomicBool::new(false);
    let (ltx, lrx) = mpsc::sync_channel(64);
    let (utx, urx) = mpsc::sync_channel(64);

    std::thread::scope(|scope| {
        scope.spawn(|| {
            let counter = CountingOracle::new(oracle, budget);
            let mut m = LowerBoundMachine::new(&counter, b.clone(), f, k_int);
            run_machine_thread(move || m.step(), &counter, ltx, &stop);
        });
        scope.spawn(|| {
            let counter = CountingOracle::new(oracle, budget);
            let mut m = UpperBoundMachine::new(&counter, b.clone(), k_int);
            run_machine_thread(move || m.step(), &counter, utx, &stop);
        });

        let mut lower_spent = 0u64;
        let mut upper_spent = 0u64;
        let mut lower_live = true;
        let mut upper_live = true;
        let outcome = 'coord: loop {
            if !lower_live && !upper_live {
                break DistanceResult::BudgetExhausted {
                    lower: scan.best_lb.clone(),
                    upper: scan.best_ub.clone(),
                    queries_spent: lower_spent + upper_spent,
                };
            }
            for side in 0..2 {
                let live = if side == 0 { &mut lower_live } else { &mut upper_live };
                if !*live {
                    continue;
                }
                let rx = if side == 0 { &lrx } else { &urx };
                match rx.recv() {
                    Err(_) => {
                        *live = false;
                    }
                    Ok(RoundMsg::Done(spent)) => {
                        if side == 0 {
                            lower_spent = spent;
                        } else {
                            upper_spent = spent;
                        }
                        *live = false;
                    }
                    Ok(RoundMsg::Fatal(e)) => {
                        stop.store(true, Ordering::Relaxed);
                        drain(&lrx);
                        drain(&urx);
                        return Err(*e);
                    }
                    Ok(RoundMsg::Step(None)) => {}
                    Ok(RoundMsg::Step(Some(e))) => {
                        events.push(e.clone());
                        if let Some((accept, value)) = scan.feed(&e) {
                            events.push(accept);
                            stop.store(true, Ordering::Relaxed);
                            drain(&lrx);
                            drain(&urx);
                            break 'coord DistanceResult::Certified { value, k };
                        }
                    }
                }
            }
        };
        Ok(InterleaveOutcome { result: outcome, events })
    })
}

/// Unblock producers after an early decision; they observe the stop flag at
/// the next round boundary.
fn drain(rx: &mpsc::Receiver<RoundMsg>) {
    while rx.try_recv().is_ok() {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{
        tensor_backend, tensor_target_code, twisted_center_backend, twisted_center_target_code,
    };
    use crate::termalg::{encode, Term};
    use num_rational::BigRational;
    use num_traits::{One, Signed};

    #[test]
    fn certifies_tensor_distance_one() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        let (f, _) = backend.certified_gap_function().unwrap();
        for k in [2u32, 4, 6] {
            let out = interleaved_distance(&oracle, &tensor_target_code(), &f, k, 200_000)
                .unwrap();
            match &out.result {
                DistanceResult::Certified { value, .. } => {
                    let err = (value.to_rational() - BigRational::one()).abs();
                    assert!(
                        err < BigRational::new(1.into(), BigInt::from(1u64 << k)),
                        "k={k}: value {value}"
                    );
                }
                other => panic!("expected certification at k={k}, got {other:?}"),
            }
            // log ends with an accept
            assert!(matches!(out.events.last(), Some(Event::Accept { .. })));
        }
    }

    use num_bigint::BigInt;

    #[test]
    fn member_target_certifies_near_zero() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        let (f, _) = backend.certified_gap_function().unwrap();
        // b = sz (x) 1 is in N
        let b = encode(&Term::Gen(1)).unwrap();
        let out = interleaved_distance(&oracle, &b, &f, 5, 50_000).unwrap();
        match out.result {
            DistanceResult::Certified { value, .. } => {
                assert!(value.to_rational() < BigRational::new(1.into(), 32.into()));
            }
            other => panic!("expected certification, got {other:?}"),
        }
    }

    #[test]
    fn zero_budget_reports_seed_interval() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        let (f, _) = backend.certified_gap_function().unwrap();
        let out = interleaved_distance(&oracle, &tensor_target_code(), &f, 4, 0).unwrap();
        match out.result {
            DistanceResult::BudgetExhausted { lower, upper, queries_spent } => {
                assert!(lower.is_zero());
                // ||b||_2 = 1
                assert!(upper.to_rational() > BigRational::one());
                assert!(upper.to_rational() < BigRational::new(3.into(), 2.into()));
                assert_eq!(queries_spent, 0);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn central_commutant_never_certifies() {
        let backend = twisted_center_backend();
        let oracle = backend.pair_oracle();
        let (f, _) = backend.certified_gap_function().unwrap();
        let out =
            interleaved_distance(&oracle, &twisted_center_target_code(), &f, 3, 3_000).unwrap();
        match out.result {
            DistanceResult::BudgetExhausted { lower, upper, .. } => {
                assert!(lower.to_rational() < BigRational::one());
                // the upper machine does find the true distance 1
                assert!(upper.to_rational() >= BigRational::one());
            }
            other => panic!("never certifiable, got {other:?}"),
        }
    }

    #[test]
    fn parallel_mode_replays_reference() {
        let backend = tensor_backend();
        let oracle = backend.pair_oracle();
        let (f, _) = backend.certified_gap_function().unwrap();
        for (b, k, budget) in [
            (tensor_target_code(), 4u32, 200_000u64),
            (encode(&Term::Gen(1)).unwrap(), 5, 50_000),
            (tensor_target_code(), 4, 300),
        ] {
            let reference = interleaved_distance(&oracle, &b, &f, k, budget).unwrap();
            let parallel = interleaved_distance_parallel(&oracle, &b, &f, k, budget).unwrap();
            assert_eq!(parallel.result, reference.result);
            assert_eq!(parallel.events, reference.events);
            // determinism of the reference run itself
            let again = interleaved_distance(&oracle, &b, &f, k, budget).unwrap();
            assert_eq!(again.result, reference.result);
            assert_eq!(again.events, reference.events);
        }
    }
}
