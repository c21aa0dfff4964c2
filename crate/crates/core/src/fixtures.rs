//! Ready-made desk-scale instances: small pairs with exactly known
//! expectations, distances and commutants. The test suite measures the
//! engine against these; they also make handy starting points for problem
//! files.

use std::sync::Arc;

use crate::exactnum::GaussianRational;
use crate::findim::{kron, Backend, BlockMatrix, Mat, MultiMatrixAlgebra};
use crate::termalg::{AdjointStructure, Term, TermCode};

fn g(n: i64, d: i64) -> GaussianRational {
    GaussianRational::from_ratio(n, d)
}

pub fn pauli_x() -> Mat {
    let mut m = Mat::zeros(2, 2);
    m.set(0, 1, g(1, 1));
    m.set(1, 0, g(1, 1));
    m
}

pub fn pauli_z() -> Mat {
    let mut m = Mat::zeros(2, 2);
    m.set(0, 0, g(1, 1));
    m.set(1, 1, g(-1, 1));
    m
}

/// `M = M_2 (x) M_2` generated by `sx(x)1, sz(x)1, 1(x)sx, 1(x)sz`, with
/// `N = M_2 (x) 1` presented by the first two generators.
///
/// Exactly known: `E(1(x)sz) = 0`, `d(1(x)sz, N) = 1`, `N' = 1 (x) M_2`,
/// and `u = 1(x)sx` is a unitary commuting with `N` with `||[u, 1(x)sz]||_2
/// = 2`.
pub fn tensor_backend() -> Arc<Backend> {
    let alg = MultiMatrixAlgebra::full_matrix(4);
    let id2 = Mat::identity(2);
    let m_gens = vec![
        BlockMatrix::from_blocks(vec![kron(&pauli_x(), &id2)]),
        BlockMatrix::from_blocks(vec![kron(&pauli_z(), &id2)]),
        BlockMatrix::from_blocks(vec![kron(&id2, &pauli_x())]),
        BlockMatrix::from_blocks(vec![kron(&id2, &pauli_z())]),
    ];
    let m_star = AdjointStructure::all_self_adjoint(4);
    let n_terms = vec![Term::Gen(0), Term::Gen(1)];
    let n_star = AdjointStructure::all_self_adjoint(2);
    Backend::new(alg, m_gens, m_star, n_terms, n_star).unwrap()
}

/// Code of the canonical target `b = 1 (x) sz` in [`tensor_backend`].
pub fn tensor_target_code() -> TermCode {
    crate::termalg::encode(&Term::Gen(3)).unwrap()
}

/// `M = M_2` generated by `sz, sx` with `N` the diagonal subalgebra
/// presented by `sz`. `{1, sx}` is a reconstruction basis for `M` over `N`
/// with expectations `{1, 0}`.
pub fn diagonal_backend() -> Arc<Backend> {
    let alg = MultiMatrixAlgebra::full_matrix(2);
    let m_gens = vec![
        BlockMatrix::from_blocks(vec![pauli_z()]),
        BlockMatrix::from_blocks(vec![pauli_x()]),
    ];
    let m_star = AdjointStructure::all_self_adjoint(2);
    let n_terms = vec![Term::Gen(0)];
    let n_star = AdjointStructure::all_self_adjoint(1);
    Backend::new(alg, m_gens, m_star, n_terms, n_star).unwrap()
}

/// `M = M_2 (+) M_2` (weights 1/4) generated by `(sx, sx), (sz, sz),
/// (1, -1)`, with `N = {(x, x)}` presented by the first two generators.
///
/// The relative commutant of `N` is the center of `M`, so no unitary
/// commuting with `N` can fail to commute with anything: certificates for
/// positive levels never exist, while `b = (sz, -sz)` has `d(b, N) = 1`.
pub fn twisted_center_backend() -> Arc<Backend> {
    let w = num_rational::BigRational::new(1.into(), 4.into());
    let alg = MultiMatrixAlgebra::new(vec![(2, w.clone()), (2, w)]).unwrap();
    let m_gens = vec![
        BlockMatrix::from_blocks(vec![pauli_x(), pauli_x()]),
        BlockMatrix::from_blocks(vec![pauli_z(), pauli_z()]),
        BlockMatrix::from_blocks(vec![Mat::identity(2), Mat::identity(2).neg()]),
    ];
    let m_star = AdjointStructure::all_self_adjoint(3);
    let n_terms = vec![Term::Gen(0), Term::Gen(1)];
    let n_star = AdjointStructure::all_self_adjoint(2);
    Backend::new(alg, m_gens, m_star, n_terms, n_star).unwrap()
}

/// Code of `b = (sz, -sz) = Prod(Gen 1, Gen 2)` in [`twisted_center_backend`].
pub fn twisted_center_target_code() -> TermCode {
    crate::termalg::encode(&Term::prod(Term::Gen(1), Term::Gen(2))).unwrap()
}
