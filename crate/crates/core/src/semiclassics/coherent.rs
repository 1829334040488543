use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::classical::WeightedEnsemble;
use crate::error::{Error, Result};
use crate::fock::{FockBasis, FockState};

/// Tail mass above which a coherent vector is flagged as poorly resolved.
pub const COHERENT_TAIL_WARNING: f64 = 1e-6;

/// Truncated coherent vector `ξ(v)`: the sector-`n` part is
/// `e^{-‖v‖²/2} v^{⊗n}/sqrt(n!)` in occupation coordinates.
#[derive(Debug, Clone)]
pub struct CoherentVector {
    pub v: Vec<Complex64>,
    /// One amplitude vector per particle-number sector.
    pub amplitudes: Vec<DVector<Complex64>>,
    /// Poisson mass of the sectors above `n_max`.
    pub tail_bound: f64,
}

impl CoherentVector {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_squared()).sum()
    }

    pub fn sector_weights(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_squared()).collect()
    }

    /// `<self | other>`.
    pub fn overlap(&self, other: &CoherentVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.dotc(b))
            .sum()
    }

    /// Sector-diagonal part of `|ξ><ξ|`, renormalized to unit trace.
    pub fn projector(&self, basis: Arc<FockBasis>) -> Result<FockState> {
        let blocks = self.amplitudes.iter().map(|a| a * a.adjoint()).collect();
        FockState::from_blocks(basis, blocks)?.normalized()
    }
}

pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// `P(X > n_max)` for `X ~ Poisson(mean)`, summed upward from `n_max + 1`.
pub fn poisson_upper_tail(mean: f64, n_max: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let ln_mean = mean.ln();
    let mut ln_fact: f64 = (1..=n_max + 1).map(|i| (i as f64).ln()).sum();
    let mut acc = 0.0;
    let limit = n_max + 1 + (mean + 50.0 * mean.sqrt() + 100.0) as usize;
    for n in n_max + 1..=limit {
        if n > n_max + 1 {
            ln_fact += (n as f64).ln();
        }
        let term = (-mean + n as f64 * ln_mean - ln_fact).exp();
        acc += term;
        if n as f64 > mean && term < acc * 1e-18 {
            break;
        }
    }
    acc.min(1.0)
}

/// Sector amplitudes of `ξ(v)`, computed in log space.
pub fn coherent(v: &[Complex64], basis: &FockBasis) -> Result<CoherentVector> {
    let c = coherent_unchecked(v, basis, 0.0)?;
    if c.tail_bound > COHERENT_TAIL_WARNING {
        log::warn!(
            "coherent vector with ‖v‖² = {:.3} loses {:.2e} of its mass above n_max = {}",
            v.iter().map(|z| z.norm_sqr()).sum::<f64>(),
            c.tail_bound,
            basis.n_max()
        );
    }
    Ok(c)
}

/// As [`coherent`] without logging; sectors whose Poisson weight is below
/// `relative_cut` times the largest one are left at zero.
pub(crate) fn coherent_unchecked(v: &[Complex64], basis: &FockBasis, relative_cut: f64) -> Result<CoherentVector> {
    if v.len() != basis.modes() {
        return Err(Error::DimensionMismatch(format!(
            "vector has {} components, Fock basis has {} modes",
            v.len(),
            basis.modes()
        )));
    }
    let mu: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let lf = ln_factorials(basis.n_max());
    let ln_abs: Vec<f64> = v.iter().map(|z| z.norm().ln()).collect();
    let phase: Vec<f64> = v.iter().map(|z| z.arg()).collect();

    // log Poisson weight of sector n
    let ln_sector = |n: usize| -> f64 {
        if mu == 0.0 {
            return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        -mu + n as f64 * mu.ln() - lf[n]
    };
    let peak = (0..basis.sectors()).map(ln_sector).fold(f64::NEG_INFINITY, f64::max);
    let ln_cut = if relative_cut > 0.0 {
        peak + relative_cut.ln()
    } else {
        f64::NEG_INFINITY
    };

    let amplitudes = (0..basis.sectors())
        .map(|n| {
            let range = basis.sector_range(n);
            let mut out = DVector::zeros(range.len());
            if ln_sector(n) < ln_cut || ln_sector(n) == f64::NEG_INFINITY {
                return out;
            }
            for (local, i) in range.enumerate() {
                let occ = basis.state(i);
                let mut ln_mag = -0.5 * mu;
                let mut arg = 0.0;
                let mut zero = false;
                for (j, &nj) in occ.iter().enumerate() {
                    if nj == 0 {
                        continue;
                    }
                    if ln_abs[j] == f64::NEG_INFINITY {
                        zero = true;
                        break;
                    }
                    ln_mag += nj as f64 * ln_abs[j] - 0.5 * lf[nj as usize];
                    arg += nj as f64 * phase[j];
                }
                if !zero {
                    out[local] = Complex64::from_polar(ln_mag.exp(), arg);
                }
            }
            out
        })
        .collect();
    Ok(CoherentVector {
        v: v.to_vec(),
        amplitudes,
        tail_bound: poisson_upper_tail(mu, basis.n_max()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOptions {
    /// Leading ensemble samples used in the average.
    pub max_samples: usize,
    /// Largest acceptable Poisson tail of a single coherent vector.
    pub tail_threshold: f64,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions {
            max_samples: 256,
            tail_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialState {
    pub state: FockState,
    pub samples_used: usize,
    pub max_tail: f64,
}

/// Smallest particle cutoff at which every coherent vector used by
/// [`trial_state`] keeps its Poisson tail within `options.tail_threshold`.
pub fn trial_n_max(ensemble: &WeightedEnsemble, temperature: f64, options: TrialOptions) -> usize {
    let m = options.max_samples.max(1).min(ensemble.len());
    let mean = ensemble.samples[..m]
        .iter()
        .map(|s| temperature * s.norm_sqr())
        .fold(0.0, f64::max);
    let mut n = mean.floor() as usize;
    while poisson_upper_tail(mean, n) > options.tail_threshold {
        n += 1 + n / 16;
    }
    // step back down to the smallest admissible cutoff
    while n > 0 && poisson_upper_tail(mean, n - 1) <= options.tail_threshold {
        n -= 1;
    }
    n
}

/// Weighted average of the coherent projectors `|ξ(√T α)><ξ(√T α)|` over the
/// leading ensemble samples, pinched to sector blocks and renormalized.
pub fn trial_state(
    ensemble: &WeightedEnsemble,
    temperature: f64,
    basis: Arc<FockBasis>,
    options: TrialOptions,
) -> Result<TrialState> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("trial state needs at least one sample".into()));
    }
    if ensemble.modes() != basis.modes() {
        return Err(Error::DimensionMismatch(format!(
            "ensemble has {} modes, Fock basis has {}",
            ensemble.modes(),
            basis.modes()
        )));
    }
    let m = options.max_samples.max(1).min(ensemble.len());
    let log_w = &ensemble.log_weights[..m];
    let shift = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|l| (l - shift).exp()).collect();
    let total: f64 = weights.iter().sum();
    let scale = temperature.sqrt();

    let vectors: Vec<CoherentVector> = ensemble.samples[..m]
        .par_iter()
        .map(|s| {
            let v: Vec<Complex64> = s.coeffs.iter().map(|a| a * scale).collect();
            coherent_unchecked(&v, &basis, 0.0)
        })
        .collect::<Result<_>>()?;
    let offending = vectors.iter().filter(|c| c.tail_bound > options.tail_threshold).count();
    if offending > 0 {
        return Err(Error::CutoffViolation {
            offending,
            total: m,
            threshold: options.tail_threshold,
        });
    }
    let max_tail = vectors.iter().map(|c| c.tail_bound).fold(0.0, f64::max);

    let blocks: Vec<DMatrix<Complex64>> = (0..basis.sectors())
        .into_par_iter()
        .map(|n| {
            let d = basis.sector_dim(n);
            let columns = DMatrix::from_fn(d, m, |r, s| vectors[s].amplitudes[n][r] * (weights[s] / total).sqrt());
            &columns * columns.adjoint()
        })
        .collect();
    let state = FockState::from_blocks(basis, blocks)?.normalized()?;
    Ok(TrialState {
        state,
        samples_used: m,
        max_tail,
    })
}
