//! Dense complex linear algebra for qudit and qudit-resonator states.

mod layout;
mod matrix;
mod operators;
mod state;
mod superop;

pub use layout::{partial_trace, Factor, HilbertLayout};
pub use matrix::{
    anticommutator, commutator, expectation, hermitian_eigenvalues, hermiticity_defect, identity,
    is_finite, kron, trace, ComplexMatrix, C64,
};
pub use operators::{
    annihilation, build_operator, coherent_ket, coherent_overlap, ln_coherent_overlap,
    required_fock, OperatorKind,
};
pub use state::{
    validate_density, von_neumann_entropy, DensityDiagnostics, DensityMatrix, KetState,
    ENTROPY_CUTOFF, NEGATIVE_EIGENVALUE_TOLERANCE,
};
pub use superop::{dissipator, lindblad_rhs, measurement_superop, LindbladTerm};
