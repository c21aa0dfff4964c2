//! Problem files: a TOML schema with exact rational strings that assembles
//! into a validated backend plus run parameters. Parsing and validation are
//! separate failure modes (exit codes 4 and 3 respectively).

use std::sync::Arc;

use num_rational::BigRational;
use serde::Deserialize;
use thiserror::Error;

use crate::exactnum::{parse_gaussian, parse_rational};
use crate::findim::{Backend, BlockMatrix, Mat, MultiMatrixAlgebra};
use crate::oracle::KazhdanData;
use crate::termalg::{parse_term, AdjointStructure, Term, TermCode};

pub const DEFAULT_BUDGET: u64 = 500_000;
pub const BUDGET_ENV_VAR: &str = "CONDEXP_BUDGET";

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl ToString) -> ProblemError {
    ProblemError::Invalid { field: field.into(), message: message.to_string() }
}

// ---------------------------------------------------------------------------
// Raw schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    precision: u32,
    budget: Option<u64>,
    algebra: RawAlgebra,
    generators: Vec<RawGenerator>,
    subalgebra: RawSubalgebra,
    target: RawTarget,
    kazhdan: Option<RawKazhdan>,
    pp_basis: Option<Vec<RawBasisPoint>>,
    gapfn: Option<RawGapfn>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgebra {
    blocks: Vec<RawBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    dim: usize,
    weight: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    label: Option<String>,
    adjoint: String,
    matrix: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSubalgebra {
    generators: Vec<RawNGenerator>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNGenerator {
    label: Option<String>,
    adjoint: String,
    term: String,
    matrix: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    term: String,
    matrix: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKazhdan {
    set: Vec<u64>,
    m: u64,
    p: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBasisPoint {
    point: String,
    expectation: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGapfn {
    max_n: Option<u32>,
}

// ---------------------------------------------------------------------------
// Validated problem
// ---------------------------------------------------------------------------

/// A fully validated problem: backend, target, and run parameters.
pub struct Problem {
    pub backend: Arc<Backend>,
    pub target_term: Term,
    pub target_code: TermCode,
    pub precision: u32,
    pub budget: Option<u64>,
    pub kazhdan: Option<KazhdanData>,
    /// Reconstruction basis: (ambient point code, subalgebra expectation code).
    pub pp_basis: Option<Vec<(TermCode, TermCode)>>,
    pub gapfn_max: u32,
    pub generator_labels: Vec<String>,
    pub n_generator_labels: Vec<String>,
}

fn parse_adjoint_decls(decls: &[String], field: &str) -> Result<AdjointStructure, ProblemError> {
    let mut star = Vec::with_capacity(decls.len());
    let mut i = 0usize;
    while i < decls.len() {
        match decls[i].as_str() {
            "self" => {
                star.push(i);
                i += 1;
            }
            "pair-next" => {
                if i + 1 >= decls.len() || decls[i + 1] != "pair-prev" {
                    return Err(invalid(
                        format!("{field}[{i}].adjoint"),
                        "\"pair-next\" must be followed by \"pair-prev\"",
                    ));
                }
                star.push(i + 1);
                star.push(i);
                i += 2;
            }
            "pair-prev" => {
                return Err(invalid(
                    format!("{field}[{i}].adjoint"),
                    "\"pair-prev\" without a preceding \"pair-next\"",
                ));
            }
            other => {
                return Err(invalid(
                    format!("{field}[{i}].adjoint"),
                    format!("unknown declaration {other:?} (expected self | pair-next | pair-prev)"),
                ));
            }
        }
    }
    AdjointStructure::from_involution(star)
        .map_err(|e| invalid(format!("{field}.adjoint"), e))
}

fn parse_block_matrix(
    algebra: &MultiMatrixAlgebra,
    raw: &[Vec<String>],
    field: &str,
) -> Result<BlockMatrix, ProblemError> {
    if raw.len() != algebra.block_count() {
        return Err(invalid(
            field,
            format!("expected {} blocks, got {}", algebra.block_count(), raw.len()),
        ));
    }
    let mut blocks = Vec::with_capacity(raw.len());
    for (b, ((dim, _), entries)) in algebra.blocks().iter().zip(raw).enumerate() {
        if entries.len() != dim * dim {
            return Err(invalid(
                format!("{field} block {b}"),
                format!("expected {} row-major entries, got {}", dim * dim, entries.len()),
            ));
        }
        let mut m = Mat::zeros(*dim, *dim);
        for (idx, lit) in entries.iter().enumerate() {
            let v = parse_gaussian(lit)
                .map_err(|e| invalid(format!("{field} block {b} entry {idx}"), e))?;
            m.set(idx / dim, idx % dim, v);
        }
        blocks.push(m);
    }
    Ok(BlockMatrix::from_blocks(blocks))
}

struct Stage {
    algebra: MultiMatrixAlgebra,
    m_gens: Vec<BlockMatrix>,
    m_star: AdjointStructure,
    n_terms: Vec<Term>,
    n_star: AdjointStructure,
}

fn parse_toml(text: &str) -> Result<RawProblem, ProblemError> {
    toml::from_str(text).map_err(|e| ProblemError::Parse(e.to_string()))
}

fn build_algebra(raw: &RawProblem) -> Result<MultiMatrixAlgebra, ProblemError> {
    let mut blocks = Vec::with_capacity(raw.algebra.blocks.len());
    for (i, b) in raw.algebra.blocks.iter().enumerate() {
        let w: BigRational = parse_rational(&b.weight)
            .map_err(|e| invalid(format!("algebra.blocks[{i}].weight"), e))?;
        blocks.push((b.dim, w));
    }
    MultiMatrixAlgebra::new(blocks).map_err(|e| invalid("algebra.blocks", e))
}

fn build_stage(raw: &RawProblem) -> Result<Stage, ProblemError> {
    let algebra = build_algebra(raw)?;
    let mut m_gens = Vec::with_capacity(raw.generators.len());
    for (i, g) in raw.generators.iter().enumerate() {
        m_gens.push(parse_block_matrix(&algebra, &g.matrix, &format!("generators[{i}].matrix"))?);
    }
    let m_decls: Vec<String> = raw.generators.iter().map(|g| g.adjoint.clone()).collect();
    let m_star = parse_adjoint_decls(&m_decls, "generators")?;
    let mut n_terms = Vec::with_capacity(raw.subalgebra.generators.len());
    for (i, g) in raw.subalgebra.generators.iter().enumerate() {
        let t = parse_term(&g.term)
            .map_err(|e| invalid(format!("subalgebra.generators[{i}].term"), e))?;
        t.validate(Some(m_gens.len() as u64))
            .map_err(|e| invalid(format!("subalgebra.generators[{i}].term"), e))?;
        n_terms.push(t);
    }
    let n_decls: Vec<String> =
        raw.subalgebra.generators.iter().map(|g| g.adjoint.clone()).collect();
    let n_star = parse_adjoint_decls(&n_decls, "subalgebra.generators")?;
    Ok(Stage { algebra, m_gens, m_star, n_terms, n_star })
}

impl Problem {
    pub fn load(text: &str) -> Result<Problem, ProblemError> {
        let raw = parse_toml(text)?;
        let stage = build_stage(&raw)?;

        // optional exact cross-checks of declared subalgebra matrices
        for (i, g) in raw.subalgebra.generators.iter().enumerate() {
            if let Some(mx) = &g.matrix {
                let declared = parse_block_matrix(
                    &stage.algebra,
                    mx,
                    &format!("subalgebra.generators[{i}].matrix"),
                )?;
                let evaluated = stage
                    .algebra
                    .eval(&stage.n_terms[i], &stage.m_gens)
                    .map_err(|e| invalid(format!("subalgebra.generators[{i}].term"), e))?;
                if declared != evaluated {
                    return Err(invalid(
                        format!("subalgebra.generators[{i}].matrix"),
                        "declared matrix differs from the evaluated inclusion term",
                    ));
                }
            }
        }

        let target_term = parse_term(&raw.target.term)
            .map_err(|e| invalid("target.term", e))?;
        target_term
            .validate(Some(stage.m_gens.len() as u64))
            .map_err(|e| invalid("target.term", e))?;
        if let Some(mx) = &raw.target.matrix {
            let declared = parse_block_matrix(&stage.algebra, mx, "target.matrix")?;
            let evaluated = stage
                .algebra
                .eval(&target_term, &stage.m_gens)
                .map_err(|e| invalid("target.term", e))?;
            if declared != evaluated {
                return Err(invalid(
                    "target.matrix",
                    "declared matrix differs from the evaluated target term",
                ));
            }
        }

        let backend = Backend::new(
            stage.algebra,
            stage.m_gens,
            stage.m_star,
            stage.n_terms,
            stage.n_star,
        )
        .map_err(|e| invalid("generators", e))?;

        let n_count = backend.n_generator_terms().len() as u64;
        let kazhdan = match &raw.kazhdan {
            None => None,
            Some(kz) => {
                let kd = KazhdanData {
                    set_indices: kz.set.iter().map(|&c| TermCode::from_u64(c)).collect(),
                    m: kz.m,
                    p: kz.p,
                };
                kd.validate().map_err(|e| invalid("kazhdan", e))?;
                for (i, c) in kd.set_indices.iter().enumerate() {
                    let t = crate::termalg::decode(c)
                        .map_err(|e| invalid(format!("kazhdan.set[{i}]"), e))?;
                    t.validate(Some(n_count))
                        .map_err(|e| invalid(format!("kazhdan.set[{i}]"), e))?;
                }
                Some(kd)
            }
        };

        let pp_basis = match &raw.pp_basis {
            None => None,
            Some(points) => {
                if points.is_empty() {
                    return Err(invalid("pp_basis", "must list at least one point"));
                }
                let mut out = Vec::with_capacity(points.len());
                for (i, bp) in points.iter().enumerate() {
                    let m_term = parse_term(&bp.point)
                        .map_err(|e| invalid(format!("pp_basis[{i}].point"), e))?;
                    m_term
                        .validate(Some(backend.m_generators().len() as u64))
                        .map_err(|e| invalid(format!("pp_basis[{i}].point"), e))?;
                    let n_term = parse_term(&bp.expectation)
                        .map_err(|e| invalid(format!("pp_basis[{i}].expectation"), e))?;
                    n_term
                        .validate(Some(n_count))
                        .map_err(|e| invalid(format!("pp_basis[{i}].expectation"), e))?;
                    out.push((
                        crate::termalg::encode(&m_term)
                            .map_err(|e| invalid(format!("pp_basis[{i}].point"), e))?,
                        crate::termalg::encode(&n_term)
                            .map_err(|e| invalid(format!("pp_basis[{i}].expectation"), e))?,
                    ));
                }
                Some(out)
            }
        };

        let target_code = crate::termalg::encode(&target_term)
            .map_err(|e| invalid("target.term", e))?;
        let generator_labels = raw
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| g.label.clone().unwrap_or_else(|| format!("g{i}")))
            .collect();
        let n_generator_labels = raw
            .subalgebra
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| g.label.clone().unwrap_or_else(|| format!("a{i}")))
            .collect();

        Ok(Problem {
            backend,
            target_term,
            target_code,
            precision: raw.precision,
            budget: raw.budget,
            kazhdan,
            pp_basis,
            gapfn_max: raw.gapfn.as_ref().and_then(|g| g.max_n).unwrap_or(8),
            generator_labels,
            n_generator_labels,
        })
    }
}

// ---------------------------------------------------------------------------
// Granular checks (the `check` command)
// ---------------------------------------------------------------------------

pub struct CheckReport {
    /// (check name, outcome) in a fixed order.
    pub lines: Vec<(String, Result<(), String>)>,
    pub parse_failed: bool,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|(_, r)| r.is_ok())
    }
}

/// Validate a problem file piecewise, reporting every named invariant with
/// an exact witness on failure.
pub fn run_checks(text: &str) -> CheckReport {
    let mut lines: Vec<(String, Result<(), String>)> = Vec::new();
    let raw = match parse_toml(text) {
        Ok(r) => r,
        Err(e) => {
            return CheckReport {
                lines: vec![("parse".into(), Err(e.to_string()))],
                parse_failed: true,
            };
        }
    };
    lines.push(("parse".into(), Ok(())));

    let algebra = match build_algebra(&raw) {
        Ok(a) => {
            lines.push(("algebra.trace-normalization".into(), Ok(())));
            a
        }
        Err(e) => {
            lines.push(("algebra.trace-normalization".into(), Err(e.to_string())));
            return CheckReport { lines, parse_failed: false };
        }
    };

    let stage = match build_stage(&raw) {
        Ok(s) => {
            lines.push(("generators.shape".into(), Ok(())));
            s
        }
        Err(e) => {
            lines.push(("generators.shape".into(), Err(e.to_string())));
            return CheckReport { lines, parse_failed: false };
        }
    };

    // unit-ball membership of every ambient generator, exact psd decision
    let mut unit_ball = Ok(());
    for (i, g) in stage.m_gens.iter().enumerate() {
        match algebra.is_contraction(g) {
            Ok(true) => {}
            Ok(false) => {
                unit_ball = Err(format!(
                    "generators[{i}]: 1 - a*a is not positive semidefinite (operator norm > 1)"
                ));
                break;
            }
            Err(e) => {
                unit_ball = Err(format!("generators[{i}]: {e}"));
                break;
            }
        }
    }
    lines.push(("generators.unit-ball".into(), unit_ball));

    // declared adjoint relations hold exactly
    let mut adjoint = Ok(());
    for i in 0..stage.m_gens.len() {
        let j = stage.m_star.star(i as u64) as usize;
        if j >= stage.m_gens.len() || stage.m_gens[j] != stage.m_gens[i].adjoint() {
            adjoint = Err(format!("generators[{i}]: partner {j} is not the exact adjoint"));
            break;
        }
    }
    lines.push(("generators.adjoint-closure".into(), adjoint));

    match Problem::load(text) {
        Ok(_) => lines.push(("subalgebra-and-target".into(), Ok(()))),
        Err(e) => lines.push(("subalgebra-and-target".into(), Err(e.to_string()))),
    }

    CheckReport { lines, parse_failed: false }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const TENSOR_PROBLEM: &str = r#"
precision = 4
budget = 200000

[algebra]
blocks = [ { dim = 4, weight = "1/4" } ]

[[generators]]
label = "sx1"
adjoint = "self"
matrix = [ [
  "0","0","1","0",
  "0","0","0","1",
  "1","0","0","0",
  "0","1","0","0" ] ]

[[generators]]
label = "sz1"
adjoint = "self"
matrix = [ [
  "1","0","0","0",
  "0","1","0","0",
  "0","0","-1","0",
  "0","0","0","-1" ] ]

[[generators]]
label = "1sx"
adjoint = "self"
matrix = [ [
  "0","1","0","0",
  "1","0","0","0",
  "0","0","0","1",
  "0","0","1","0" ] ]

[[generators]]
label = "1sz"
adjoint = "self"
matrix = [ [
  "1","0","0","0",
  "0","-1","0","0",
  "0","0","1","0",
  "0","0","0","-1" ] ]

[[subalgebra.generators]]
label = "a0"
adjoint = "self"
term = "(gen 0)"

[[subalgebra.generators]]
label = "a1"
adjoint = "self"
term = "(gen 1)"

[target]
term = "(gen 3)"

[kazhdan]
set = [0, 4]
m = 5
p = 2
"#;

    #[test]
    fn loads_tensor_problem() {
        let p = Problem::load(TENSOR_PROBLEM).unwrap();
        assert_eq!(p.precision, 4);
        assert_eq!(p.budget, Some(200_000));
        assert_eq!(p.backend.m_generators().len(), 4);
        assert_eq!(p.backend.n_generators().len(), 2);
        assert!(p.kazhdan.is_some());
        // the declared target denotes 1 (x) sz, at distance exactly 1
        let x = p.backend.eval_m_code(&p.target_code).unwrap();
        assert_eq!(
            p.backend.distance_sq_to_n(&x).unwrap(),
            num_rational::BigRational::new(1.into(), 1.into())
        );
    }

    #[test]
    fn check_report_passes() {
        let report = run_checks(TENSOR_PROBLEM);
        assert!(report.passed(), "{:?}", report.lines);
    }

    #[test]
    fn rejects_bad_weight_normalization() {
        let text = TENSOR_PROBLEM.replace("weight = \"1/4\"", "weight = \"1/8\"");
        match Problem::load(&text) {
            Err(ProblemError::Invalid { field, .. }) => assert_eq!(field, "algebra.blocks"),
            other => panic!("expected invalid, got {:?}", other.map(|_| ())),
        }
        let report = run_checks(&text);
        assert!(!report.passed());
        assert!(!report.parse_failed);
    }

    #[test]
    fn rejects_non_contraction_generator() {
        let text = TENSOR_PROBLEM.replace(
            "\"0\",\"0\",\"1\",\"0\",\n  \"0\",\"0\",\"0\",\"1\",\n  \"1\",\"0\",\"0\",\"0\",\n  \"0\",\"1\",\"0\",\"0\"",
            "\"0\",\"0\",\"2\",\"0\",\n  \"0\",\"0\",\"0\",\"2\",\n  \"2\",\"0\",\"0\",\"0\",\n  \"0\",\"2\",\"0\",\"0\"",
        );
        assert!(text.contains("\"2\""), "replacement must hit");
        let report = run_checks(&text);
        let unit = report.lines.iter().find(|(n, _)| n == "generators.unit-ball").unwrap();
        assert!(unit.1.is_err());
    }

    #[test]
    fn parse_error_is_distinguished() {
        let report = run_checks("precision = [unclosed");
        assert!(report.parse_failed);
        assert!(Problem::load("precision = [unclosed").is_err());
        assert!(matches!(
            Problem::load("precision = [unclosed"),
            Err(ProblemError::Parse(_))
        ));
    }

    #[test]
    fn adjoint_pair_declarations() {
        // a pair of mutually adjoint (non-self-adjoint) generators
        let text = r#"
precision = 3

[algebra]
blocks = [ { dim = 2, weight = "1/2" } ]

[[generators]]
adjoint = "pair-next"
matrix = [ [ "0","1","0","0" ] ]

[[generators]]
adjoint = "pair-prev"
matrix = [ [ "0","0","1","0" ] ]

[[subalgebra.generators]]
adjoint = "pair-next"
term = "(gen 0)"

[[subalgebra.generators]]
adjoint = "pair-prev"
term = "(gen 1)"

[target]
term = "(prod (gen 0) (gen 1))"
"#;
        let p = Problem::load(text).unwrap();
        assert_eq!(p.backend.n_star().star(0), 1);
        // mismatched declaration is rejected
        let bad = text.replace("adjoint = \"pair-prev\"\nterm", "adjoint = \"self\"\nterm");
        assert!(Problem::load(&bad).is_err());
    }
}
