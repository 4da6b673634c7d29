use thiserror::Error;

#[derive(Debug, Error)]
pub enum BdfError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("operands live on different lattices")]
    LatticeMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spectral gap collapsed: min |eigenvalue| = {min_abs_eig:.3e} < gap_tol = {gap_tol:.3e}")]
    GapCollapse { min_abs_eig: f64, gap_tol: f64 },

    #[error("quadrature did not converge: achieved error estimate {estimate:.3e}")]
    Quadrature { estimate: f64 },

    #[error("optimizer failed to bracket: {0}")]
    Bracket(String),

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BdfError>;
