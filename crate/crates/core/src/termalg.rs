//! The syntactic algebra of rational points of a presentation: terms built
//! from generators by rounded combinations, products and adjoints, a
//! canonical bijective coding of terms by naturals, and the structural
//! commutator bound used to synthesize spectral gap functions.

pub mod coding;

use std::fmt;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::exactnum::{parse_gaussian, ExactError, GaussianRational};
use coding::{cantor_pair, cantor_unpair, pair_from_index, pair_index, rounded_pair_ok};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("rounded combination requires |lambda| + |mu| <= 1, got lambda={lambda}, mu={mu}")]
    InvalidComb { lambda: String, mu: String },
    #[error("generator {index} outside the presentation ({count} generators)")]
    GeneratorOutOfRange { index: u64, count: u64 },
    #[error("generator index in code exceeds the supported range")]
    GeneratorIndexOverflow,
    #[error("coefficient pair is too deep in the fixed listing to code")]
    CoefficientTooDeep,
    #[error("adjoint declarations describe no generator {index}")]
    AdjointOutOfRange { index: usize },
    #[error("adjoint map is not an involution at index {index}")]
    NotInvolution { index: usize },
    #[error("term syntax error: {0}")]
    Parse(String),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// A rational point of a presentation, as syntax. Every `Comb` node satisfies
/// `|lambda| + |mu| <= 1`, so a term denotes a unit-ball element under any
/// unit-ball assignment of its generators.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Gen(u64),
    Comb {
        lambda: GaussianRational,
        left: Box<Term>,
        mu: GaussianRational,
        right: Box<Term>,
    },
    Prod(Box<Term>, Box<Term>),
    Adj(Box<Term>),
}

impl Term {
    pub fn gen(i: u64) -> Term {
        Term::Gen(i)
    }

    /// Rounded combination `lambda*left + mu*right`; rejects coefficient
    /// pairs with `|lambda| + |mu| > 1`.
    pub fn comb(
        lambda: GaussianRational,
        left: Term,
        mu: GaussianRational,
        right: Term,
    ) -> Result<Term, TermError> {
        if !rounded_pair_ok(&lambda, &mu) {
            return Err(TermError::InvalidComb {
                lambda: lambda.to_string(),
                mu: mu.to_string(),
            });
        }
        Ok(Term::Comb { lambda, left: Box::new(left), mu, right: Box::new(right) })
    }

    pub fn prod(left: Term, right: Term) -> Term {
        Term::Prod(Box::new(left), Box::new(right))
    }

    pub fn adj(inner: Term) -> Term {
        Term::Adj(Box::new(inner))
    }

    /// The canonical zero term `0*g0 + 0*g0`.
    pub fn zero() -> Term {
        Term::Comb {
            lambda: GaussianRational::zero(),
            left: Box::new(Term::Gen(0)),
            mu: GaussianRational::zero(),
            right: Box::new(Term::Gen(0)),
        }
    }

    pub fn neg(t: Term) -> Term {
        Term::Comb {
            lambda: GaussianRational::from_integer(-1),
            left: Box::new(t.clone()),
            mu: GaussianRational::zero(),
            right: Box::new(t),
        }
    }

    /// `c * t` for `|c| <= 1`.
    pub fn scaled(c: GaussianRational, t: Term) -> Result<Term, TermError> {
        Term::comb(c, t.clone(), GaussianRational::zero(), t)
    }

    /// `(x - y)/2`, always a valid rounded combination.
    pub fn half_diff(x: Term, y: Term) -> Term {
        Term::Comb {
            lambda: GaussianRational::from_ratio(1, 2),
            left: Box::new(x),
            mu: GaussianRational::from_ratio(-1, 2),
            right: Box::new(y),
        }
    }

    fn half_sum(x: Term, y: Term) -> Term {
        Term::Comb {
            lambda: GaussianRational::from_ratio(1, 2),
            left: Box::new(x),
            mu: GaussianRational::from_ratio(1, 2),
            right: Box::new(y),
        }
    }

    /// Balanced tree denoting `(t_1 + ... + t_n) / 2^s`; returns the scale
    /// exponent `s`. The list is padded with zero terms to a power of two.
    pub fn scaled_sum(terms: &[Term]) -> (Term, u32) {
        assert!(!terms.is_empty());
        let mut layer: Vec<Term> = terms.to_vec();
        let mut s = 0u32;
        while layer.len() > 1 {
            if layer.len() % 2 == 1 {
                layer.push(Term::zero());
            }
            layer = layer
                .chunks(2)
                .map(|c| Term::half_sum(c[0].clone(), c[1].clone()))
                .collect();
            s += 1;
        }
        (layer.pop().unwrap(), s)
    }

    /// Largest generator index appearing in the term.
    pub fn max_gen_index(&self) -> u64 {
        match self {
            Term::Gen(i) => *i,
            Term::Comb { left, right, .. } => left.max_gen_index().max(right.max_gen_index()),
            Term::Prod(l, r) => l.max_gen_index().max(r.max_gen_index()),
            Term::Adj(t) => t.max_gen_index(),
        }
    }

    /// Check all generator references against a (finite) generator count.
    pub fn validate(&self, gen_count: Option<u64>) -> Result<(), TermError> {
        if let Some(count) = gen_count {
            let max = self.max_gen_index();
            if max >= count {
                return Err(TermError::GeneratorOutOfRange { index: max, count });
            }
        }
        Ok(())
    }

    /// Structural commutator cost: a product adds the costs of its factors,
    /// a rounded combination takes the max, an adjoint passes through.
    pub fn leaf_cost(&self) -> u64 {
        match self {
            Term::Gen(_) => 1,
            Term::Comb { left, right, .. } => left.leaf_cost().max(right.leaf_cost()),
            Term::Prod(l, r) => l.leaf_cost().saturating_add(r.leaf_cost()),
            Term::Adj(t) => t.leaf_cost(),
        }
    }

    fn collect_gen_indices(&self, out: &mut Vec<u64>) {
        match self {
            Term::Gen(i) => out.push(*i),
            Term::Comb { left, right, .. } => {
                left.collect_gen_indices(out);
                right.collect_gen_indices(out);
            }
            Term::Prod(l, r) => {
                l.collect_gen_indices(out);
                r.collect_gen_indices(out);
            }
            Term::Adj(t) => t.collect_gen_indices(out),
        }
    }
}

// ---------------------------------------------------------------------------
// Coding
// ---------------------------------------------------------------------------

/// Natural-number code of a term under the fixed bijective enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermCode(pub BigUint);

impl TermCode {
    pub fn from_u64(n: u64) -> Self {
        TermCode(BigUint::from(n))
    }
}

impl fmt::Display for TermCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Code of a term. Rejects ill-formed rounded combinations (these cannot be
/// constructed through [`Term::comb`], but pattern-built values are checked
/// again here).
pub fn encode(t: &Term) -> Result<TermCode, TermError> {
    let code = match t {
        Term::Gen(i) => BigUint::from(*i) * 4u32,
        Term::Comb { lambda, left, mu, right } => {
            if !rounded_pair_ok(lambda, mu) {
                return Err(TermError::InvalidComb {
                    lambda: lambda.to_string(),
                    mu: mu.to_string(),
                });
            }
            let rank = pair_index(lambda, mu).ok_or(TermError::CoefficientTooDeep)?;
            let children = cantor_pair(&encode(left)?.0, &encode(right)?.0);
            cantor_pair(&BigUint::from(rank), &children) * 4u32 + 1u32
        }
        Term::Prod(l, r) => cantor_pair(&encode(l)?.0, &encode(r)?.0) * 4u32 + 2u32,
        Term::Adj(inner) => encode(inner)?.0 * 4u32 + 3u32,
    };
    Ok(TermCode(code))
}

/// Term behind a code. Total: every natural decodes, up to two resource
/// ceilings (generator indices past `2^64`, coefficient pairs past the scan
/// cap) that are unreachable in practice.
pub fn decode(c: &TermCode) -> Result<Term, TermError> {
    let tag = (&c.0 % 4u32).to_u32().unwrap();
    let rest = &c.0 / 4u32;
    match tag {
        0 => {
            let i = rest.to_u64().ok_or(TermError::GeneratorIndexOverflow)?;
            Ok(Term::Gen(i))
        }
        1 => {
            let (rank, children) = cantor_unpair(&rest);
            let rank = rank.to_u64().ok_or(TermError::CoefficientTooDeep)?;
            let (lambda, mu) = pair_from_index(rank).ok_or(TermError::CoefficientTooDeep)?;
            let (l, r) = cantor_unpair(&children);
            Ok(Term::Comb {
                lambda,
                left: Box::new(decode(&TermCode(l))?),
                mu,
                right: Box::new(decode(&TermCode(r))?),
            })
        }
        2 => {
            let (l, r) = cantor_unpair(&rest);
            Ok(Term::prod(decode(&TermCode(l))?, decode(&TermCode(r))?))
        }
        _ => Ok(Term::adj(decode(&TermCode(rest))?)),
    }
}

// ---------------------------------------------------------------------------
// Adjoint structure
// ---------------------------------------------------------------------------

/// Per-generator adjoint declaration: a generator is either self-adjoint or
/// the first of an adjacent pair `(g, g*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjointDecl {
    SelfAdjoint,
    AdjointPair,
}

/// The involution `i -> i*` on generator indices. Indices beyond the declared
/// prefix are treated as self-adjoint by convention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjointStructure {
    star: Vec<usize>,
}

impl AdjointStructure {
    pub fn all_self_adjoint(count: usize) -> Self {
        AdjointStructure { star: (0..count).collect() }
    }

    pub fn from_involution(star: Vec<usize>) -> Result<Self, TermError> {
        for (i, &j) in star.iter().enumerate() {
            if j >= star.len() {
                return Err(TermError::AdjointOutOfRange { index: i });
            }
            if star[j] != i {
                return Err(TermError::NotInvolution { index: i });
            }
        }
        Ok(AdjointStructure { star })
    }

    pub fn star(&self, i: u64) -> u64 {
        match usize::try_from(i) {
            Ok(idx) if idx < self.star.len() => self.star[idx] as u64,
            _ => i,
        }
    }

    pub fn len(&self) -> usize {
        self.star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.star.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.star
    }
}

/// Expand adjoint declarations into the index involution: a `SelfAdjoint`
/// declaration occupies one index, an `AdjointPair` occupies two adjacent
/// indices that map to each other.
pub fn adjoint_close(decls: &[AdjointDecl]) -> AdjointStructure {
    let mut star = Vec::new();
    for d in decls {
        match d {
            AdjointDecl::SelfAdjoint => star.push(star.len()),
            AdjointDecl::AdjointPair => {
                let i = star.len();
                star.push(i + 1);
                star.push(i);
            }
        }
    }
    AdjointStructure { star }
}

// ---------------------------------------------------------------------------
// Commutator bound
// ---------------------------------------------------------------------------

/// Index-and-precision bound `J` for a coded point `m`: in any tracial
/// algebra, for any unit-ball assignment of an adjoint-closed generator
/// sequence and any unit-ball `x`, if `max_{i<=J} ||[x, a_i]||_2 < 2^-J`
/// then `||[x, decode(m)]||_2 < 2^-k`.
///
/// Soundness comes from the structural recursion
/// `||[x, c s + d t]|| <= |c| ||[x,s]|| + |d| ||[x,t]||`,
/// `||[x, st]|| <= ||[x,s]|| + ||[x,t]||` for unit-ball factors, and
/// `||[x, s*]|| = ||[x*, s]||` routed through the adjoint-closed generator
/// list, which together give
/// `||[x, p]|| <= leaf_cost(p) * max_{i in G*(p)} ||[x, a_i]||`
/// over the star-closure `G*(p)` of the generator indices of `p`.
pub fn commutator_bound(
    m: &TermCode,
    k: u32,
    star: &AdjointStructure,
    gen_count: Option<u64>,
) -> Result<u64, TermError> {
    let term = decode(m)?;
    term.validate(gen_count)?;
    Ok(commutator_bound_term(&term, k, star))
}

/// Same bound, for an already decoded (and validated) term.
pub fn commutator_bound_term(term: &Term, k: u32, star: &AdjointStructure) -> u64 {
    let mut indices = Vec::new();
    term.collect_gen_indices(&mut indices);
    let mut max_idx = 0u64;
    for i in indices {
        max_idx = max_idx.max(i).max(star.star(i));
    }
    let cost = term.leaf_cost();
    let log_cost = 64 - (cost.max(1) - 1).leading_zeros() as u64; // ceil(log2(cost))
    let log_cost = if cost <= 1 { 0 } else { log_cost };
    max_idx.max(k as u64 + log_cost)
}

// ---------------------------------------------------------------------------
// S-expression syntax
// ---------------------------------------------------------------------------

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Gen(i) => write!(f, "(gen {i})"),
            Term::Comb { lambda, left, mu, right } => {
                write!(f, "(comb \"{lambda}\" {left} \"{mu}\" {right})")
            }
            Term::Prod(l, r) => write!(f, "(prod {l} {r})"),
            Term::Adj(t) => write!(f, "(adj {t})"),
        }
    }
}

#[derive(Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

fn tokenize(s: &str) -> Result<Vec<Tok>, TermError> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                out.push(Tok::Open);
            }
            ')' => {
                chars.next();
                out.push(Tok::Close);
            }
            '"' => {
                chars.next();
                let mut atom = String::new();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some(ch) => atom.push(ch),
                        None => return Err(TermError::Parse("unterminated string".into())),
                    }
                }
                out.push(Tok::Atom(atom));
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut atom = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch == '(' || ch == ')' || ch == '"' || ch.is_whitespace() {
                        break;
                    }
                    atom.push(ch);
                    chars.next();
                }
                out.push(Tok::Atom(atom));
            }
        }
    }
    Ok(out)
}

/// Parse the textual term form, e.g. `(prod (gen 0) (adj (gen 1)))` and
/// `(comb "1/2" (gen 0) "1/2" (gen 1))`.
pub fn parse_term(s: &str) -> Result<Term, TermError> {
    let toks = tokenize(s)?;
    let mut pos = 0usize;
    let term = parse_node(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(TermError::Parse("trailing tokens after term".into()));
    }
    Ok(term)
}

fn expect_atom<'a>(toks: &'a [Tok], pos: &mut usize) -> Result<&'a str, TermError> {
    match toks.get(*pos) {
        Some(Tok::Atom(a)) => {
            *pos += 1;
            Ok(a)
        }
        other => Err(TermError::Parse(format!("expected atom, found {other:?}"))),
    }
}

fn expect_close(toks: &[Tok], pos: &mut usize) -> Result<(), TermError> {
    match toks.get(*pos) {
        Some(Tok::Close) => {
            *pos += 1;
            Ok(())
        }
        other => Err(TermError::Parse(format!("expected ')', found {other:?}"))),
    }
}

fn parse_node(toks: &[Tok], pos: &mut usize) -> Result<Term, TermError> {
    match toks.get(*pos) {
        Some(Tok::Open) => *pos += 1,
        other => return Err(TermError::Parse(format!("expected '(', found {other:?}"))),
    }
    let head = expect_atom(toks, pos)?.to_string();
    let term = match head.as_str() {
        "gen" => {
            let idx = expect_atom(toks, pos)?;
            let i: u64 = idx
                .parse()
                .map_err(|_| TermError::Parse(format!("bad generator index {idx:?}")))?;
            Term::Gen(i)
        }
        "adj" => Term::adj(parse_node(toks, pos)?),
        "prod" => {
            let l = parse_node(toks, pos)?;
            let r = parse_node(toks, pos)?;
            Term::prod(l, r)
        }
        "comb" => {
            let lambda = parse_gaussian(expect_atom(toks, pos)?)?;
            let l = parse_node(toks, pos)?;
            let mu = parse_gaussian(expect_atom(toks, pos)?)?;
            let r = parse_node(toks, pos)?;
            Term::comb(lambda, l, mu, r)?
        }
        other => return Err(TermError::Parse(format!("unknown head {other:?}"))),
    };
    expect_close(toks, pos)?;
    Ok(term)
}
