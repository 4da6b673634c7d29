//! Momentum-lattice simulation of the Bogoliubov–Dirac–Fock polarized vacuum.
//!
//! Operators act on the cutoff space of 4-spinors with momenta on a cubic
//! lattice inside the ball `|p| ≤ Λ`. See the README for conventions.

pub mod certificate;
pub mod dirac;
pub mod energy;
pub mod error;
pub mod kernel;
pub mod lattice;
pub mod quad;
pub mod response;
pub mod sample;
pub mod scf;
pub mod snapshot;

pub use error::{BdfError, Result};
pub use kernel::KernelOperator;
pub use lattice::{build_lattice, DensityField, Lattice, LatticeSpec, SourceProfile};
