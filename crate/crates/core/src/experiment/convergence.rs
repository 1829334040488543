use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::ExperimentConfig;
use crate::classical::{
    free_moment_matrix, moment_matrix, reweight_with_tensor, sample_free_from_eigenvalues, Estimate, MomentMatrix,
    SubseedScheme, WeightedEnsemble,
};
use crate::error::Result;
use crate::fock::{
    build_hamiltonian, choose_n_max, free_hamiltonian, gibbs_state, hilbert_schmidt_norm, reduced_density_matrix,
    relative_free_energy, FockBasis, FockState,
};
use crate::semiclassics::{
    berezin_lieb_gap, trial_n_max, trial_state, BerezinLiebGap, BerezinLiebOptions, TrialOptions,
};
use crate::spectral::{interaction_elements, resolve_half_width, spectral_basis, TwoBodyTensor};
use crate::symmetric::{factorial, SymmetricBasis};

/// Tolerance of the trial-state variational inequality.
pub const VARIATIONAL_TOL: f64 = 1e-8;
/// Signed tolerance of the Berezin–Lieb gap at the largest temperature.
pub const BL_GAP_TOL: f64 = -0.05;
/// Monotonicity slack in units of the standard error.
pub const MONOTONE_SLACK_SE: f64 = 2.0;

/// Classical side of an experiment, shared by all temperatures.
#[derive(Debug, Clone)]
pub struct ClassicalReference {
    pub eigenvalues: Vec<f64>,
    pub tensor: TwoBodyTensor,
    /// Free samples reweighted by `e^{-F_NL}`.
    pub ensemble: WeightedEnsemble,
    /// `γ^(k)` for `k = 1..=k_max`.
    pub moments: Vec<MomentMatrix>,
    pub z_r: Estimate,
    /// `true` when moments and `Z_r` come from the Gaussian closed forms (`w ≡ 0`).
    pub exact: bool,
}

impl ClassicalReference {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        let spec = resolve_half_width(&config.operator, config.modes)?;
        let basis = spectral_basis(&spec, config.modes)?;
        let tensor = interaction_elements(&basis, &config.kernel)?;
        let free = sample_free_from_eigenvalues(
            &basis.eigenvalues,
            config.mc_samples,
            config.seed,
            SubseedScheme::Deterministic,
        )?;
        let ensemble = reweight_with_tensor(&free, &tensor)?;
        let exact = tensor.is_zero();
        let (moments, z_r) = if exact {
            let moments = (1..=config.k_max)
                .map(|k| free_moment_matrix(&basis.eigenvalues, k))
                .collect();
            (moments, Estimate { mean: 1.0, stderr: 0.0 })
        } else {
            let moments = (1..=config.k_max)
                .map(|k| moment_matrix(&ensemble, k))
                .collect::<Result<_>>()?;
            (moments, ensemble.z_r)
        };
        Ok(ClassicalReference {
            eigenvalues: basis.eigenvalues.clone(),
            tensor,
            ensemble,
            moments,
            z_r,
            exact,
        })
    }

    /// `-log Z_r` with the delta-method error `SE(Z_r)/Z_r`.
    pub fn minus_log_z_r(&self) -> Estimate {
        Estimate {
            mean: -self.z_r.mean.ln(),
            stderr: self.z_r.stderr / self.z_r.mean,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceMetric {
    pub k: usize,
    /// `‖(k!/T^k) Γ^(k) − γ^(k)‖_tr`.
    pub trace_distance: f64,
    pub stderr: f64,
    /// Hilbert–Schmidt norm of the same difference.
    pub hs_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    #[serde(rename = "T")]
    pub temperature: f64,
    pub coupling: f64,
    pub n_max: usize,
    pub fock_dim: usize,
    /// Top-two-sector mass of the truncated free Gibbs state.
    pub tail_mass: f64,
    /// Top-two-sector mass of the interacting Gibbs state.
    pub state_tail_mass: f64,
    pub valid: bool,
    pub distances: Vec<DistanceMetric>,
    /// `(F_λ − F_0)/T = log Z_0 − log Z_λ`.
    pub free_energy: f64,
    pub free_energy_target: f64,
    pub free_energy_stderr: f64,
    pub log_z_free: f64,
    pub log_z_interacting: f64,
    pub rel_free_energy_gibbs: f64,
    pub rel_free_energy_trial: Option<f64>,
    pub berezin_lieb: Option<BerezinLiebGap>,
    pub notes: Vec<String>,
    pub wall_seconds: f64,
}

impl ReportRow {
    pub fn distance(&self, k: usize) -> Option<&DistanceMetric> {
        self.distances.iter().find(|d| d.k == k)
    }

    pub fn free_energy_error(&self) -> f64 {
        (self.free_energy - self.free_energy_target).abs()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    pub classical: ClassicalReference,
    pub rows: Vec<ReportRow>,
    pub wall_seconds: f64,
}

fn hermitian_sign(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, e) in eig.eigenvalues.iter().enumerate() {
        let s = if *e > 0.0 {
            1.0
        } else if *e < 0.0 {
            -1.0
        } else {
            0.0
        };
        scaled.column_mut(j).scale_mut(s);
    }
    &scaled * v.adjoint()
}

/// Standard error of `tr[S γ̂]` for the sign matrix `S` of the difference, which
/// is the linearization of the trace norm in the Monte Carlo moments.
fn trace_distance_stderr(classical: &ClassicalReference, sign: &DMatrix<Complex64>, k: usize) -> f64 {
    if classical.exact {
        return 0.0;
    }
    let basis = SymmetricBasis::new(classical.eigenvalues.len(), k);
    let values: Vec<f64> = classical
        .ensemble
        .samples
        .par_iter()
        .map(|s| {
            let phi = nalgebra::DVector::from_vec(basis.product_components(&s.coeffs));
            phi.dotc(&(sign * &phi)).re
        })
        .collect();
    classical.ensemble.weighted_mean_of(&values).stderr
}

fn run_row(config: &ExperimentConfig, classical: &ClassicalReference, index: usize) -> Result<ReportRow> {
    let start = Instant::now();
    let t = config.t_schedule[index];
    let lambda = config.coupling(t);
    let eig = &classical.eigenvalues;
    let mut notes = Vec::new();

    let trial_opts = TrialOptions {
        max_samples: config.trial_samples,
        ..TrialOptions::default()
    };
    let cutoff = choose_n_max(eig, t, config.n_max_policy, config.k_max.max(2), config.n_max_limit)?;
    // the trial state shares the basis, so its coherent vectors may raise the cutoff
    let n_max = cutoff
        .n_max
        .max(trial_n_max(&classical.ensemble, t, trial_opts).min(config.n_max_limit));
    let basis = Arc::new(FockBasis::with_budget(config.modes, n_max, config.fock_budget)?);
    let free = gibbs_state(&free_hamiltonian(basis.clone(), eig)?, t)?;
    let inter = gibbs_state(&build_hamiltonian(basis.clone(), eig, &classical.tensor, lambda)?, t)?;
    let tail_mass = free.state.top_sector_mass(2);
    let state_tail_mass = inter.state.top_sector_mass(2);
    let valid = tail_mass < config.n_max_policy && state_tail_mass < config.n_max_policy;
    if !valid {
        notes.push(format!("tail mass {state_tail_mass:e} exceeds the policy threshold"));
    }

    let mut distances = Vec::with_capacity(config.k_max);
    for k in 1..=config.k_max {
        let g = reduced_density_matrix(&inter.state, k)?;
        let scale = factorial(k as u32) / t.powi(k as i32);
        let diff = &g.matrix * Complex64::new(scale, 0.0) - &classical.moments[k - 1].mean;
        let herm = (&diff + diff.adjoint()) * Complex64::new(0.5, 0.0);
        let trace_distance = SymmetricEigen::new(herm).eigenvalues.iter().map(|e| e.abs()).sum();
        let sign = hermitian_sign(&diff);
        distances.push(DistanceMetric {
            k,
            trace_distance,
            stderr: trace_distance_stderr(classical, &sign, k),
            hs_distance: hilbert_schmidt_norm(&diff),
        });
    }

    let target = classical.minus_log_z_r();
    let free_energy = free.log_z - inter.log_z;
    let rel_gibbs = relative_free_energy(&inter.state, &free.state, &classical.tensor, lambda, t)?;

    let trial = trial_state(&classical.ensemble, t, basis.clone(), trial_opts);
    let rel_trial = match trial {
        Ok(tr) => Some(relative_free_energy(
            &tr.state,
            &free.state,
            &classical.tensor,
            lambda,
            t,
        )?),
        Err(e) => {
            notes.push(format!("trial state unavailable: {e}"));
            None
        }
    };

    let bl = berezin_lieb_gap(
        &inter.state,
        &free.state,
        1.0 / t,
        BerezinLiebOptions {
            samples: config.bl_samples,
            seed: config.seed.wrapping_add(0x5EED_0000 + index as u64),
            ..BerezinLiebOptions::default()
        },
    )?;
    if bl.degenerate {
        notes.push(format!("Husimi importance sampling degenerate (ESS {:.1})", bl.ess));
    }

    Ok(ReportRow {
        temperature: t,
        coupling: lambda,
        n_max,
        fock_dim: basis.dim(),
        tail_mass,
        state_tail_mass,
        valid,
        distances,
        free_energy,
        free_energy_target: target.mean,
        free_energy_stderr: target.stderr,
        log_z_free: free.log_z,
        log_z_interacting: inter.log_z,
        rel_free_energy_gibbs: rel_gibbs,
        rel_free_energy_trial: rel_trial,
        berezin_lieb: Some(bl),
        notes,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every temperature of the schedule; rows come back in schedule order.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let start = Instant::now();
    let classical = ClassicalReference::build(config)?;
    let rows = (0..config.t_schedule.len())
        .into_par_iter()
        .map(|i| run_row(config, &classical, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        config: config.clone(),
        classical,
        rows,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `|1/(T(e^{λ/T} − 1)) − 1/λ|` summed over modes: `d_1(T)` for `w ≡ 0`.
pub fn free_first_order_distance(eigenvalues: &[f64], temperature: f64) -> f64 {
    eigenvalues
        .iter()
        .map(|l| (1.0 / (temperature * (l / temperature).exp_m1()) - 1.0 / l).abs())
        .sum()
}

fn non_increasing(values: &[(f64, f64)]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for w in values.windows(2) {
        let slack = MONOTONE_SLACK_SE * w[0].1.max(w[1].1);
        let step_ok = w[1].0 <= w[0].0 + slack;
        ok &= step_ok;
        parts.push(format!(
            "{:.4e}->{:.4e}{}",
            w[0].0,
            w[1].0,
            if step_ok { "" } else { "!" }
        ));
    }
    (ok, parts.join(" "))
}

impl ConvergenceReport {
    /// Acceptance properties of the limit experiment, in a fixed order.
    pub fn properties(&self) -> Vec<PropertyCheck> {
        let mut out = Vec::new();
        let rows = &self.rows;
        for k in 1..=self.config.k_max.min(2) {
            let series: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|r| r.distance(k).map(|d| (d.trace_distance, d.stderr)))
                .collect();
            let (passed, detail) = non_increasing(&series);
            out.push(PropertyCheck {
                name: format!("d_{k} non-increasing"),
                passed,
                detail,
            });
        }
        if rows.len() >= 2 {
            let first = rows[0].distance(1).map_or(f64::NAN, |d| d.trace_distance);
            let last = rows[rows.len() - 1].distance(1).map_or(f64::NAN, |d| d.trace_distance);
            out.push(PropertyCheck {
                name: "d_1 drops by a factor 3".into(),
                passed: last < first / 3.0,
                detail: format!("first {first:.4e}, last {last:.4e}"),
            });
        }
        let fe: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.free_energy_error(), r.free_energy_stderr))
            .collect();
        let (passed, detail) = non_increasing(&fe);
        out.push(PropertyCheck {
            name: "|f + log Z_r| non-increasing".into(),
            passed,
            detail,
        });
        if rows.len() >= 2 && !self.classical.exact {
            let first = fe[0].0;
            let last = fe[fe.len() - 1].0;
            out.push(PropertyCheck {
                name: "|f + log Z_r| drops by a factor 2".into(),
                passed: last * 2.0 <= first,
                detail: format!("first {first:.4e}, last {last:.4e}"),
            });
        }
        let variational: Vec<String> = rows
            .iter()
            .filter(|r| match r.rel_free_energy_trial {
                Some(v) => !(v >= r.rel_free_energy_gibbs - VARIATIONAL_TOL),
                None => true,
            })
            .map(|r| format!("T={}", r.temperature))
            .collect();
        out.push(PropertyCheck {
            name: "trial state above Gibbs".into(),
            passed: variational.is_empty(),
            detail: if variational.is_empty() {
                "all rows".into()
            } else {
                format!("violated at {}", variational.join(", "))
            },
        });
        if let Some(last) = rows.last() {
            let gap = last.berezin_lieb.as_ref().map_or(f64::NAN, |b| b.gap);
            out.push(PropertyCheck {
                name: "Berezin-Lieb gap at largest T".into(),
                passed: gap >= BL_GAP_TOL,
                detail: format!("gap {gap:.4e} at T={}", last.temperature),
            });
        }
        let invalid: Vec<String> = rows
            .iter()
            .filter(|r| !r.valid)
            .map(|r| format!("T={}", r.temperature))
            .collect();
        out.push(PropertyCheck {
            name: "cutoff tail within policy".into(),
            passed: invalid.is_empty(),
            detail: if invalid.is_empty() {
                "all rows".into()
            } else {
                invalid.join(", ")
            },
        });
        out
    }

    pub fn all_passed(&self) -> bool {
        self.properties().iter().all(|p| p.passed)
    }
}

/// Reduced density matrices `(k!/T^k) Γ^(k)` of the interacting Gibbs state, for inspection.
pub fn rescaled_reduced_matrices(state: &FockState, temperature: f64, k_max: usize) -> Result<Vec<DMatrix<Complex64>>> {
    (1..=k_max)
        .map(|k| {
            let g = reduced_density_matrix(state, k)?;
            Ok(&g.matrix * Complex64::new(factorial(k as u32) / temperature.powi(k as i32), 0.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{BoundaryCondition, InteractionKernel, OneBodySpec};

    fn small_config(kernel: InteractionKernel) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            OneBodySpec::interval(BoundaryCondition::Dirichlet, 1.0, 128),
            kernel,
            1,
            vec![2.0, 4.0],
            2000,
            5,
        );
        c.k_max = 2;
        c.bl_samples = 128;
        c.trial_samples = 32;
        c
    }

    #[test]
    fn free_closed_form_value() {
        let d = free_first_order_distance(&[1.0], 10.0);
        assert!((d - 0.0492).abs() < 1e-4);
    }

    #[test]
    fn zero_kernel_matches_closed_forms() {
        let report = run_convergence(&small_config(InteractionKernel::zero())).unwrap();
        assert!(report.classical.exact);
        for row in &report.rows {
            assert_eq!(row.free_energy, 0.0);
            assert_eq!(row.free_energy_target, 0.0);
            let expected = free_first_order_distance(&report.classical.eigenvalues, row.temperature);
            assert!((row.distance(1).unwrap().trace_distance - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn rows_are_deterministic() {
        let config = small_config(InteractionKernel::Delta { g: 1.0 });
        let a = run_convergence(&config).unwrap();
        let b = run_convergence(&config).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.free_energy, y.free_energy);
            assert_eq!(
                x.distance(2).unwrap().trace_distance,
                y.distance(2).unwrap().trace_distance
            );
            assert_eq!(
                x.berezin_lieb.as_ref().unwrap().classical.mean,
                y.berezin_lieb.as_ref().unwrap().classical.mean
            );
        }
        for row in &a.rows {
            assert!(row.valid);
            assert!(row.rel_free_energy_trial.unwrap() >= row.rel_free_energy_gibbs - VARIATIONAL_TOL);
            let identity = (row.rel_free_energy_gibbs / row.temperature - row.free_energy).abs();
            assert!(identity < 1e-8 * row.free_energy.abs().max(1e-300));
        }
    }
}
