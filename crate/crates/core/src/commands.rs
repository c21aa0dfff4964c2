//! Batch command implementations. Every command is deterministic given the
//! problem file and options, emits a human-readable section followed by
//! line-oriented machine output, and maps outcomes onto the stable exit
//! codes: 0 success/certified, 2 budget exhausted, 3 validation failure,
//! 4 parse error.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::engine::{
    expectation_from_distance, gap_function_from_kazhdan, interleaved_distance,
    interleaved_distance_parallel, pimsner_popa_expectation, DistanceResult,
    EngineError, ExactDistance, InterleaveOutcome, InterleavedDistanceOracle,
};
use crate::findim::{Backend, BlockMatrix};
use crate::oracle::{ComputablePoint, ExactPoint, SpectralGapFunction};
use crate::problem::{run_checks, Problem, ProblemError, DEFAULT_BUDGET};
use crate::termalg::{decode, TermCode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub precision: Option<u32>,
    pub budget: Option<u64>,
    pub audit: bool,
    pub exact: bool,
    pub parallel: bool,
    /// Default budget from the environment, weaker than the file and flags.
    pub env_budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub exit_code: i32,
    pub stdout: String,
}

fn failure(exit_code: i32, message: impl std::fmt::Display) -> CommandOutput {
    CommandOutput { exit_code, stdout: format!("ERROR {message}\n") }
}

fn load(text: &str) -> Result<Problem, CommandOutput> {
    Problem::load(text).map_err(|e| match e {
        ProblemError::Parse(_) => failure(EXIT_PARSE, e),
        ProblemError::Invalid { .. } => failure(EXIT_INVALID, e),
    })
}

fn engine_failure(e: EngineError) -> CommandOutput {
    match e {
        EngineError::BudgetExhausted { queries_spent } => CommandOutput {
            exit_code: EXIT_BUDGET,
            stdout: format!(
                "search budget exhausted\nRESULT status=budget-exhausted queries={queries_spent}\n"
            ),
        },
        EngineError::Uncertified { lower, upper, queries_spent } => CommandOutput {
            exit_code: EXIT_BUDGET,
            stdout: format!(
                "distance estimate not certified within budget; d lies in [{lower}, {upper}]\n\
                 RESULT status=budget-exhausted lower={lower} upper={upper} queries={queries_spent}\n"
            ),
        },
        EngineError::Invalid(msg) => failure(EXIT_INVALID, msg),
        EngineError::Oracle(e) => failure(EXIT_INTERNAL, e),
    }
}

fn effective_budget(problem: &Problem, opts: &RunOptions) -> u64 {
    opts.budget
        .or(problem.budget)
        .or(opts.env_budget)
        .unwrap_or(DEFAULT_BUDGET)
}

fn effective_precision(problem: &Problem, opts: &RunOptions) -> u32 {
    opts.precision.unwrap_or(problem.precision)
}

/// Gap function: from the declared Kazhdan data when present, otherwise
/// certified directly against the exact backend.
fn gap_function(problem: &Problem) -> Result<(SpectralGapFunction, String), CommandOutput> {
    if let Some(kd) = &problem.kazhdan {
        let n_count = Some(problem.backend.n_generator_terms().len() as u64);
        let f = gap_function_from_kazhdan(kd, problem.backend.n_star(), n_count)
            .map_err(engine_failure)?;
        Ok((f, "kazhdan".into()))
    } else {
        let (f, cert) = problem
            .backend
            .certified_gap_function()
            .map_err(|e| failure(EXIT_INVALID, format!("no usable spectral gap function: {e}")))?;
        Ok((f, format!("certified shift={} gens={}", cert.shift, cert.gen_count)))
    }
}

fn render_block_matrix(x: &BlockMatrix) -> String {
    let mut out = String::new();
    for (b, m) in x.blocks.iter().enumerate() {
        let _ = writeln!(out, "  block {b}:");
        for i in 0..m.rows() {
            let row: Vec<String> = (0..m.cols()).map(|j| m.get(i, j).to_string()).collect();
            let _ = writeln!(out, "    [ {} ]", row.join(", "));
        }
    }
    out
}

pub fn cmd_check(text: &str) -> CommandOutput {
    let report = run_checks(text);
    let mut out = String::new();
    for (name, result) in &report.lines {
        match result {
            Ok(()) => {
                let _ = writeln!(out, "CHECK {name} ok");
            }
            Err(msg) => {
                let _ = writeln!(out, "CHECK {name} fail: {msg}");
            }
        }
    }
    if report.parse_failed {
        let _ = writeln!(out, "RESULT status=parse-error");
        return CommandOutput { exit_code: EXIT_PARSE, stdout: out };
    }
    if report.passed() {
        let _ = writeln!(out, "RESULT status=ok");
        CommandOutput { exit_code: EXIT_OK, stdout: out }
    } else {
        let _ = writeln!(out, "RESULT status=invalid");
        CommandOutput { exit_code: EXIT_INVALID, stdout: out }
    }
}

pub fn cmd_dist(text: &str, opts: &RunOptions) -> CommandOutput {
    match load(text) {
        Ok(p) => dist_on(&p, opts),
        Err(out) => out,
    }
}

pub fn dist_on(problem: &Problem, opts: &RunOptions) -> CommandOutput {
    let (gap, gap_src) = match gap_function(problem) {
        Ok(g) => g,
        Err(out) => return out,
    };
    let k = effective_precision(problem, opts);
    let budget = effective_budget(problem, opts);
    let oracle = problem.backend.pair_oracle();
    let run = if opts.parallel {
        interleaved_distance_parallel(&oracle, &problem.target_code, &gap, k, budget)
    } else {
        interleaved_distance(&oracle, &problem.target_code, &gap, k, budget)
    };
    let InterleaveOutcome { result, events } = match run {
        Ok(o) => o,
        Err(e) => return engine_failure(e),
    };
    let mut out = String::new();
    let _ = writeln!(out, "target: {}", problem.target_term);
    let _ = writeln!(out, "gap function: {gap_src}; precision k={k}; budget {budget} per machine");
    if opts.audit {
        for e in &events {
            let _ = writeln!(out, "{e}");
        }
    }
    match result {
        DistanceResult::Certified { value, k } => {
            let _ = writeln!(out, "certified: |{value} - d(target, N)| < 2^-{k}");
            let _ = writeln!(out, "RESULT status=certified value={value} k={k}");
            CommandOutput { exit_code: EXIT_OK, stdout: out }
        }
        DistanceResult::BudgetExhausted { lower, upper, queries_spent } => {
            let _ = writeln!(
                out,
                "not certified within budget: d(target, N) lies in [{lower}, {upper}]"
            );
            let _ = writeln!(
                out,
                "RESULT status=budget-exhausted lower={lower} upper={upper} queries={queries_spent}"
            );
            CommandOutput { exit_code: EXIT_BUDGET, stdout: out }
        }
    }
}

fn render_point(backend: &Arc<Backend>, code: &TermCode, out: &mut String) -> Result<(), CommandOutput> {
    let term = decode(code).map_err(|e| failure(EXIT_INTERNAL, e))?;
    let value = backend
        .eval_n_code(code)
        .map_err(|e| failure(EXIT_INTERNAL, e))?;
    let _ = writeln!(out, "point: {term}");
    let _ = write!(out, "{}", render_block_matrix(&value));
    let _ = writeln!(out, "RESULT status=ok point={code} term='{term}'");
    Ok(())
}

pub fn cmd_expect(text: &str, opts: &RunOptions) -> CommandOutput {
    match load(text) {
        Ok(p) => expect_on(&p, opts),
        Err(out) => out,
    }
}

pub fn expect_on(problem: &Problem, opts: &RunOptions) -> CommandOutput {
    let k = effective_precision(problem, opts);
    let budget = effective_budget(problem, opts);
    let oracle = problem.backend.pair_oracle();
    let result = if opts.exact {
        let dist = ExactDistance(problem.backend.clone());
        expectation_from_distance(&oracle, &dist, &problem.target_code, k, budget)
    } else {
        let (gap, _) = match gap_function(problem) {
            Ok(g) => g,
            Err(out) => return out,
        };
        let dist = InterleavedDistanceOracle {
            oracle: &oracle,
            gap,
            budget,
            parallel: opts.parallel,
        };
        expectation_from_distance(&oracle, &dist, &problem.target_code, k, budget)
    };
    let code = match result {
        Ok(c) => c,
        Err(e) => return engine_failure(e),
    };
    let mut out = String::new();
    let _ = writeln!(out, "target: {}", problem.target_term);
    let _ = writeln!(out, "expectation within 2^-{k} (as a subalgebra point):");
    if let Err(fail) = render_point(&problem.backend, &code, &mut out) {
        return fail;
    }
    CommandOutput { exit_code: EXIT_OK, stdout: out }
}

pub fn cmd_pp_expect(text: &str, opts: &RunOptions) -> CommandOutput {
    match load(text) {
        Ok(p) => pp_expect_on(&p, opts),
        Err(out) => out,
    }
}

pub fn pp_expect_on(problem: &Problem, opts: &RunOptions) -> CommandOutput {
    let Some(basis_codes) = problem.pp_basis.clone() else {
        return failure(EXIT_INVALID, "pp_basis: required by pp-expect but missing");
    };
    // exact reconstruction precheck: x = sum_j m_j E(m_j* x) over a basis of
    // the ambient algebra
    let backend = &problem.backend;
    let mut basis_matrices = Vec::new();
    for (m_code, _) in &basis_codes {
        match backend.eval_m_code(m_code) {
            Ok(m) => basis_matrices.push(m),
            Err(e) => return failure(EXIT_INVALID, format!("pp_basis point: {e}")),
        }
    }
    let alg = backend.algebra();
    let dim = alg.vector_dim();
    for idx in 0..dim {
        let mut flat = vec![crate::exactnum::GaussianRational::zero(); dim];
        flat[idx] = crate::exactnum::GaussianRational::one();
        let x = BlockMatrix::from_flat(alg, &flat);
        let mut recon = alg.zero();
        for m in &basis_matrices {
            let e = match backend.expectation(&m.adjoint().mul(&x)) {
                Ok(e) => e,
                Err(e) => return failure(EXIT_INTERNAL, e),
            };
            recon = recon.add(&m.mul(&e));
        }
        if recon != x {
            return failure(
                EXIT_INVALID,
                "pp_basis: reconstruction identity x = sum m_j E(m_j* x) fails on the ambient basis",
            );
        }
    }
    // declared expectations must match the exact ones
    for (i, (_, e_code)) in basis_codes.iter().enumerate() {
        let m = basis_matrices[i].clone();
        let declared = match backend.eval_n_code(e_code) {
            Ok(v) => v,
            Err(e) => return failure(EXIT_INVALID, format!("pp_basis[{i}].expectation: {e}")),
        };
        let exact = match backend.expectation(&m) {
            Ok(v) => v,
            Err(e) => return failure(EXIT_INTERNAL, e),
        };
        if declared != exact {
            return failure(
                EXIT_INVALID,
                format!("pp_basis[{i}].expectation differs from the exact expectation of the point"),
            );
        }
    }

    let k = effective_precision(problem, opts);
    let budget = effective_budget(problem, opts);
    let oracle = problem.backend.pair_oracle();
    let points: Vec<ExactPoint> =
        basis_codes.iter().map(|(m, _)| ExactPoint(m.clone())).collect();
    let expectations: Vec<ExactPoint> =
        basis_codes.iter().map(|(_, e)| ExactPoint(e.clone())).collect();
    let point_refs: Vec<&dyn ComputablePoint> =
        points.iter().map(|p| p as &dyn ComputablePoint).collect();
    let expectation_refs: Vec<&dyn ComputablePoint> =
        expectations.iter().map(|p| p as &dyn ComputablePoint).collect();
    let code = match pimsner_popa_expectation(
        &oracle,
        &point_refs,
        &expectation_refs,
        &problem.target_code,
        k,
        budget,
    ) {
        Ok(c) => c,
        Err(e) => return engine_failure(e),
    };
    let mut out = String::new();
    let _ = writeln!(out, "target: {}", problem.target_term);
    let _ = writeln!(out, "expectation through the reconstruction basis, within 2^-{k}:");
    if let Err(fail) = render_point(&problem.backend, &code, &mut out) {
        return fail;
    }
    CommandOutput { exit_code: EXIT_OK, stdout: out }
}

pub fn cmd_gapfn(text: &str, opts: &RunOptions) -> CommandOutput {
    match load(text) {
        Ok(p) => gapfn_on(&p, opts),
        Err(out) => out,
    }
}

pub fn gapfn_on(problem: &Problem, _opts: &RunOptions) -> CommandOutput {
    let Some(kd) = &problem.kazhdan else {
        return failure(EXIT_INVALID, "kazhdan: required by gapfn but missing");
    };
    let n_count = Some(problem.backend.n_generator_terms().len() as u64);
    let f = match gap_function_from_kazhdan(kd, problem.backend.n_star(), n_count) {
        Ok(f) => f,
        Err(e) => return engine_failure(e),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "spectral gap function from Kazhdan data (|F|={}, m={}, p={}):",
        kd.set_indices.len(),
        kd.m,
        kd.p
    );
    for n in 0..=problem.gapfn_max {
        let _ = writeln!(out, "GAPFN n={n} f={}", f.eval(n));
    }
    let _ = writeln!(out, "RESULT status=ok");
    CommandOutput { exit_code: EXIT_OK, stdout: out }
}
