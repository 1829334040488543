//! Coherent states, coherent-state trial states, Husimi densities and the
//! comparison of quantum and classical relative entropies.
//!
//! Coherent projectors are stored through their sector-diagonal part. All
//! states compared here are invariant under the phase rotation generated by
//! the particle number, so reduced density matrices and relative entropies
//! against such states are unaffected by the pinching.

mod coherent;
mod definetti;
mod husimi;

pub use coherent::{
    coherent, poisson_upper_tail, trial_n_max, trial_state, CoherentVector, TrialOptions, TrialState,
    COHERENT_TAIL_WARNING,
};
pub use definetti::{definetti_moment_check, DeFinettiReport, MomentBoundRow, MAX_MOMENT_ORDER};
pub use husimi::{
    berezin_lieb_gap, classical_kl_quadrature_k1, husimi_density, husimi_normalization_k1, BerezinLiebGap,
    BerezinLiebOptions, HusimiEvaluation,
};
