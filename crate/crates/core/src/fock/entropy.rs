use rayon::prelude::*;

use super::state::same_basis;
use super::BlockSpectrum;
use super::{interaction_energy, FockOperator, FockState};
use crate::error::{Error, Result};
use crate::spectral::TwoBodyTensor;

/// Eigenvalues below this contribute nothing (`0 log 0 = 0`).
const CLIP: f64 = 1e-300;
/// Numerical zero for support checks.
const SUPPORT: f64 = 1e-14;

/// `tr[Γ log Γ]`.
pub fn neg_entropy(state: &FockState) -> f64 {
    let computed: Vec<BlockSpectrum>;
    let spectrum = match state.cached_spectrum() {
        Some(s) => s,
        None => {
            computed = state.blocks().par_iter().map(BlockSpectrum::eigenvalues_only).collect();
            &computed
        }
    };
    let mut acc = 0.0;
    for block in spectrum {
        for (i, &p) in block.eigenvalues.iter().enumerate() {
            if p < CLIP {
                continue;
            }
            let log = block.log_eigenvalues.as_ref().map_or_else(|| p.ln(), |l| l[i]);
            acc += p * log;
        }
    }
    acc
}

/// Von Neumann entropy `-tr[Γ log Γ]`.
pub fn von_neumann_entropy(state: &FockState) -> f64 {
    -neg_entropy(state)
}

/// `tr[Γ (log Γ − log Γ')]`; `+∞` when `Γ` has weight outside the support of `Γ'`.
pub fn relative_entropy(state: &FockState, reference: &FockState) -> Result<f64> {
    same_basis(state.basis(), reference.basis())?;
    let own = neg_entropy(state);
    let computed: Vec<BlockSpectrum>;
    let spectra = match reference.cached_spectrum() {
        Some(s) => s,
        None => {
            computed = reference.spectrum();
            &computed
        }
    };
    let mut cross = 0.0;
    for (n, spec) in spectra.iter().enumerate() {
        let weights = spec.diagonal_of(state.block(n));
        for (j, (&w, &q)) in weights.iter().zip(&spec.eigenvalues).enumerate() {
            let log_q = match &spec.log_eigenvalues {
                Some(logs) => logs[j],
                None if q > SUPPORT => q.ln(),
                None => {
                    if w > SUPPORT {
                        return Ok(f64::INFINITY);
                    }
                    continue;
                }
            };
            if w.abs() < CLIP {
                continue;
            }
            cross += w * log_q;
        }
    }
    Ok(own - cross)
}

/// `𝓕[Γ] = tr[H Γ] + T tr[Γ log Γ]`.
pub fn free_energy(state: &FockState, hamiltonian: &FockOperator, temperature: f64) -> Result<f64> {
    Ok(state.expectation(hamiltonian)? + temperature * neg_entropy(state))
}

/// `λ tr[w Γ^(2)] + T S(Γ ‖ Γ₀)`.
pub fn relative_free_energy(
    state: &FockState,
    free_gibbs: &FockState,
    tensor: &TwoBodyTensor,
    coupling: f64,
    temperature: f64,
) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let interaction = interaction_energy(state, tensor, coupling)?;
    let entropy = relative_entropy(state, free_gibbs)?;
    Ok(interaction + temperature * entropy)
}
