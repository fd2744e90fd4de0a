//! Variational P-representation steady states of driven-dissipative bosons,
//! with a truncated-Fock density-matrix oracle.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod algebra;
pub mod error;
pub mod models;
pub mod moments;
pub mod numeric;
pub mod oracle;
pub mod phase_space;
pub mod variational;

pub use algebra::{
    adjoint_lindblad, eom_system, BosonMonomial, EomSystem, Equation, IndexSpace, ModelSpec, Monomial,
    OperatorPolynomial, SpinMonomial, SpinOp,
};
pub use error::{AlgebraError, ModelError, MomentError, OracleError, PhaseSpaceError, VariationalError};
pub use moments::{
    ansatz_moment, component_moment, convolve_moment, squeezing_of, Ansatz, AnsatzMoments, ComponentState,
    MomentKey, MomentOptions, MomentTable, ModeAnsatz, SpinAnsatz,
};
pub use numeric::C64;
