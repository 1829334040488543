use num_complex::Complex64;
use serde::Serialize;

use crate::classical::MomentMatrix;
use crate::error::{Error, Result};
use crate::fock::{reduced_density_matrix, trace_norm, FockState};
use crate::symmetric::factorial;

pub const MAX_MOMENT_ORDER: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub struct MomentBoundRow {
    pub eps: f64,
    /// `ε^k tr Γ^(k)` for `k = 1..=k_max`.
    pub scaled_traces: Vec<f64>,
    /// `‖k! ε^k Γ^(k) − γ^(k)‖_tr` when a candidate is supplied.
    pub distances: Vec<Option<f64>>,
    /// Running maxima of `scaled_traces` up to and including this row.
    pub running_constants: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeFinettiReport {
    pub rows: Vec<MomentBoundRow>,
    pub constants: Vec<f64>,
    pub bounded: bool,
    /// Per order: last distance below the first (when distances exist).
    pub distances_decreasing: Vec<Option<bool>>,
}

/// Checks `ε^k tr Γ^(k) ≤ C_k` along a sequence of states.
///
/// With explicit `bounds`, the check is against them. Otherwise a sequence
/// counts as bounded when every value is finite and the maximum over its second
/// half is at most twice the maximum over its first half.
pub fn definetti_moment_check(
    states: &[(&FockState, f64)],
    k_max: usize,
    candidates: Option<&[MomentMatrix]>,
    bounds: Option<&[f64]>,
) -> Result<DeFinettiReport> {
    if k_max == 0 || k_max > MAX_MOMENT_ORDER {
        return Err(Error::InvalidArgument(format!(
            "k_max must be in 1..={MAX_MOMENT_ORDER}"
        )));
    }
    if let Some(c) = candidates {
        if c.len() < k_max || c.iter().take(k_max).enumerate().any(|(i, m)| m.order() != i + 1) {
            return Err(Error::InvalidArgument("candidates must list orders 1..=k_max".into()));
        }
    }
    if let Some(b) = bounds {
        if b.len() < k_max {
            return Err(Error::InvalidArgument("one bound per order is required".into()));
        }
    }

    let mut rows: Vec<MomentBoundRow> = Vec::with_capacity(states.len());
    let mut running = vec![0.0f64; k_max];
    for &(state, eps) in states {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
        }
        let mut scaled_traces = Vec::with_capacity(k_max);
        let mut distances = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            if k > state.basis().n_max() {
                scaled_traces.push(0.0);
                distances.push(None);
                continue;
            }
            let g = reduced_density_matrix(state, k)?;
            let scale = eps.powi(k as i32);
            scaled_traces.push(scale * g.trace());
            distances.push(candidates.map(|c| {
                let diff = &g.matrix * Complex64::new(factorial(k as u32) * scale, 0.0) - &c[k - 1].mean;
                trace_norm(&diff)
            }));
        }
        for (r, v) in running.iter_mut().zip(&scaled_traces) {
            *r = r.max(*v);
        }
        rows.push(MomentBoundRow {
            eps,
            scaled_traces,
            distances,
            running_constants: running.clone(),
        });
    }

    let finite = rows.iter().all(|r| r.scaled_traces.iter().all(|v| v.is_finite()));
    let bounded = finite
        && match bounds {
            Some(b) => rows
                .iter()
                .all(|r| r.scaled_traces.iter().zip(b).all(|(v, c)| *v <= *c)),
            None => {
                let half = rows.len() / 2;
                (0..k_max).all(|k| {
                    let first = rows[..half.max(1).min(rows.len())]
                        .iter()
                        .map(|r| r.scaled_traces[k])
                        .fold(0.0, f64::max);
                    let second = rows[half..].iter().map(|r| r.scaled_traces[k]).fold(0.0, f64::max);
                    rows.is_empty() || second <= 2.0 * first || second == 0.0
                })
            }
        };
    let distances_decreasing = (0..k_max)
        .map(|k| {
            let series: Vec<f64> = rows.iter().filter_map(|r| r.distances[k]).collect();
            if series.len() < 2 {
                None
            } else {
                Some(series[series.len() - 1] < series[0])
            }
        })
        .collect();
    Ok(DeFinettiReport {
        constants: running,
        rows,
        bounded,
        distances_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::classical::free_moment_matrix;
    use crate::fock::{choose_n_max, free_hamiltonian, gibbs_state, FockBasis};

    #[test]
    fn free_sequence_is_bounded() {
        let eig = [2.0, 5.0];
        let mut owned = Vec::new();
        for t in [5.0, 10.0, 20.0] {
            let n_max = choose_n_max(&eig, t, 1e-10, 3, 2000).unwrap().n_max;
            let b = Arc::new(FockBasis::with_budget(2, n_max, 100_000).unwrap());
            let g = gibbs_state(&free_hamiltonian(b, &eig).unwrap(), t).unwrap();
            owned.push((g.state, 1.0 / t));
        }
        let seq: Vec<(&FockState, f64)> = owned.iter().map(|(s, e)| (s, *e)).collect();
        let candidates: Vec<_> = (1..=2).map(|k| free_moment_matrix(&eig, k)).collect();
        let bound: f64 = eig.iter().map(|l| 1.0 / l).sum();
        let report = definetti_moment_check(&seq, 2, Some(&candidates), Some(&[bound, 10.0])).unwrap();
        assert!(report.bounded);
        // ε tr Γ^(1) = Σ_j ε/(e^{ελ_j} − 1) increases towards Σ 1/λ_j
        let first: Vec<f64> = report.rows.iter().map(|r| r.scaled_traces[0]).collect();
        assert!(first.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(report.distances_decreasing, vec![Some(true), Some(true)]);
    }

    #[test]
    fn vacuum_sequence_has_zero_moments() {
        let b = Arc::new(FockBasis::new(2, 4).unwrap());
        let vac = FockState::vacuum(b);
        let report = definetti_moment_check(&[(&vac, 0.5), (&vac, 0.25)], 3, None, None).unwrap();
        assert!(report.bounded);
        assert!(report.constants.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn growing_sequence_is_flagged() {
        let b = Arc::new(FockBasis::new(1, 20).unwrap());
        let states: Vec<FockState> = [1u16, 2, 10, 20]
            .iter()
            .map(|&n| FockState::occupation(b.clone(), &[n]).unwrap())
            .collect();
        let seq: Vec<(&FockState, f64)> = states.iter().map(|s| (s, 1.0)).collect();
        let report = definetti_moment_check(&seq, 1, None, None).unwrap();
        assert!(!report.bounded);
    }
}
