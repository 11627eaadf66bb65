//! Dense primal-dual interior-point solver for small semidefinite programs
//! over Hermitian (complex) and real positive semidefinite cones plus the
//! nonnegative orthant.
//!
//! Programs are held in standard primal form
//!
//! ```text
//!     minimize    <C, X> + offset
//!     subject to  <A_i, X> = b_i,   i = 1..m
//!                 X = (X_1, .., X_p) in K_1 x .. x K_p
//! ```
//!
//! where `<A, X> = Re Tr(A X)` on Hermitian blocks and the ordinary dot
//! product on nonnegative blocks. Constraint coefficients on a PSD block are
//! sums of Hermitian rank-two terms built from a per-block vector dictionary,
//! which keeps Schur complement assembly proportional to the number of terms
//! rather than to the block dimension squared.
//!
//! The solver runs Mehrotra predictor-corrector steps on the homogeneous
//! self-dual embedding with Nesterov-Todd scaling and returns either an
//! optimal primal-dual pair or a Farkas certificate of infeasibility.

pub mod cone;
pub mod error;
pub mod linalg;
pub mod program;
pub mod sdpa;
pub mod solver;
pub mod verify;

pub use cone::{Block, BlockVec};
pub use error::SdpError;
pub use linalg::{deembed_complex, embed_complex, C64, CMat};
pub use program::{dense_terms, ConeKind, ConicProgram, ProgramBuilder, Row, Term};
pub use solver::{solve, IterationLog, Settings, SolverSolution, Status};
pub use sdpa::{read_sdpa, to_sdpa_string, write_sdpa};
pub use verify::{verify, verify_with_tol, ResidualReport};
