//! Truncated bosonic Fock space over `K` modes with total particle number at most `n_max`.
//!
//! Every operator and state here commutes with the particle number, so all
//! matrices are stored as dense blocks, one per sector `n = 0..=n_max`.

mod basis;
mod entropy;
mod operator;
mod reduced;
mod state;

pub use basis::{ladder, FockBasis, SparseMatrix, DEFAULT_FOCK_BUDGET};
pub use entropy::{free_energy, neg_entropy, relative_entropy, relative_free_energy, von_neumann_entropy};
pub use operator::{build_hamiltonian, free_hamiltonian, interaction_operator, number_operator, FockOperator};
pub use reduced::{
    energy_decomposition, hilbert_schmidt_norm, interaction_energy, particle_number, reduced_density_matrix,
    reduced_dm_normal_ordered, trace_norm, EnergyDecomposition, ReducedDensityMatrix,
};
pub use state::{
    choose_n_max, free_sector_weights, gibbs_state, random_state, BlockSpectrum, CutoffChoice, FockState, GibbsState,
    GibbsSummary,
};
