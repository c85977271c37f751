//! Inner optimizers: elastic-net sparse coding and the hull-constrained
//! dictionary update.

pub mod lasso;
pub mod qp;
pub mod simplex;

pub use lasso::{kkt_residual, sparse_code};
pub use qp::{block_cd_dictionary, objective_gradient, solve_column_qp};
pub use simplex::project_simplex;
