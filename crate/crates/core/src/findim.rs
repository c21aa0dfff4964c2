//! Exact finite-dimensional tracial *-algebra backend. Terms evaluate to
//! block matrices over `Q(i)`; 2-norms, conditional expectations, commutants
//! and distances are computed exactly, making this the ground-truth oracle
//! for every property test and the reference backend behind the CLI.

pub mod algebra;
pub mod backend;
pub mod matrix;
pub mod polar;
pub mod subalgebra;

pub use algebra::{kron, BlockMatrix, MultiMatrixAlgebra};
pub use backend::Backend;
pub use matrix::Mat;
pub use polar::polar_round_unitary;
pub use subalgebra::{certified_gap_shift, commutant_basis, GapCertificate, Subalgebra};

use thiserror::Error;

use crate::exactnum::ExactError;
use crate::termalg::TermError;

#[derive(Debug, Error)]
pub enum FindimError {
    #[error("algebra needs at least one nonempty block")]
    EmptyAlgebra,
    #[error("trace weight {0} is not positive")]
    NonPositiveWeight(String),
    #[error("trace weights do not normalize: sum w_i d_i = {0}, expected 1")]
    TraceNotNormalized(String),
    #[error("element has the wrong number of blocks")]
    ShapeMismatch,
    #[error("block {block} has the wrong dimensions")]
    BlockDimensionMismatch { block: usize },
    #[error("generator {index} is unassigned")]
    UnassignedGenerator { index: u64 },
    #[error("generator {index} is not a contraction")]
    NotContraction { index: usize },
    #[error("generator {index} does not match the declared adjoint structure")]
    AdjointMismatch { index: usize },
    #[error("subalgebra generator list is empty")]
    EmptyGeneratorList,
    #[error("singular Gram system; the cached basis is not independent")]
    SingularGram,
    #[error("no positive spectral gap certificate at the search resolution")]
    NoGapCertificate,
    #[error("numeric stage failed: {0}")]
    Numeric(String),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}
