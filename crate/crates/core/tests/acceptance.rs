//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion fails. All tolerances are pinned below.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nlgibbs::classical::{free_moment_matrix, mean_f_nl_free_with, moment_matrix, reweight_with_tensor, sample_free};
use nlgibbs::experiment::{
    free_first_order_distance, geometric_log_z, quartic_single_mode_z_r, run_convergence, ConvergenceReport,
    ExperimentConfig, BL_GAP_TOL, MONOTONE_SLACK_SE, VARIATIONAL_TOL,
};
use nlgibbs::fock::{
    energy_decomposition, free_hamiltonian, gibbs_state, particle_number, random_state, reduced_density_matrix,
    reduced_dm_normal_ordered, FockBasis,
};
use nlgibbs::spectral::{interaction_elements, spectral_basis, BoundaryCondition, InteractionKernel, OneBodySpec};

const SPECTRAL_REL_TOL: f64 = 1e-3;
const REFINEMENT_RATIO: (f64, f64) = (3.5, 4.5);
const WICK_SE: f64 = 5.0;
const MEAN_INTERACTION_SE: f64 = 3.0;
const QUARTIC_SE: f64 = 3.0;
const GEOMETRIC_TOL: f64 = 1e-10;
const ROUTE_TOL: f64 = 1e-10;
const NUMBER_TOL: f64 = 1e-10;
const ENERGY_REL_TOL: f64 = 1e-9;
const D1_DROP: f64 = 3.0;
const FREE_ENERGY_DROP: f64 = 2.0;
const ZERO_KERNEL_TOL: f64 = 1e-6;

const DESK_SCHEDULE: [f64; 4] = [5.0, 10.0, 20.0, 40.0];
const DESK_SEED: u64 = 20240601;
const DESK_SAMPLES: usize = 200_000;

struct Ledger {
    lines: Vec<(bool, String)>,
}

impl Ledger {
    fn record(&mut self, id: usize, title: &str, passed: bool, detail: String) {
        let line = format!(
            "[{}] criterion {id:>2} {title}: {detail}",
            if passed { "PASS" } else { "FAIL" }
        );
        println!("{line}");
        self.lines.push((passed, line));
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn criterion_1(ledger: &mut Ledger) {
    let start = Instant::now();
    let exact: Vec<f64> = (1..=8)
        .map(|j| (j as f64 * std::f64::consts::PI / 2.0).powi(2) + 1.0)
        .collect();
    let errors = |n: usize| -> Vec<f64> {
        let b = spectral_basis(&OneBodySpec::interval(BoundaryCondition::Dirichlet, 1.0, n), 8).unwrap();
        b.eigenvalues.iter().zip(&exact).map(|(l, e)| (l - e).abs()).collect()
    };
    let coarse = errors(1024);
    let fine = errors(2048);
    let worst_rel = coarse.iter().zip(&exact).map(|(e, x)| e / x).fold(0.0, f64::max);
    let ratios: Vec<f64> = coarse.iter().zip(&fine).map(|(c, f)| c / f).collect();
    let ratio_ok = ratios
        .iter()
        .all(|r| (REFINEMENT_RATIO.0..=REFINEMENT_RATIO.1).contains(r));
    let elapsed = start.elapsed();
    ledger.record(
        1,
        "Dirichlet spectrum",
        worst_rel <= SPECTRAL_REL_TOL && ratio_ok && within(elapsed, 5.0),
        format!(
            "max rel err {worst_rel:.2e} (tol {SPECTRAL_REL_TOL:.0e}), refinement ratios {:.3}..{:.3}, {:.2}s",
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(0.0, f64::max),
            elapsed.as_secs_f64()
        ),
    );
}

fn criterion_2(ledger: &mut Ledger) {
    let start = Instant::now();
    let basis = spectral_basis(&OneBodySpec::interval(BoundaryCondition::Dirichlet, 1.0, 256), 3).unwrap();
    let free = sample_free(&basis, 100_000, 11).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..=2 {
        let mc = moment_matrix(&free, k).unwrap();
        let exact = free_moment_matrix(&basis.eigenvalues, k);
        for (i, (m, e)) in mc.mean.iter().zip(exact.mean.iter()).enumerate() {
            worst = worst.max((m - e).norm() / mc.stderr[i]);
        }
    }
    let elapsed = start.elapsed();
    ledger.record(
        2,
        "Wick moments k=1,2",
        worst <= WICK_SE && within(elapsed, 30.0),
        format!(
            "max deviation {worst:.2} SE (tol {WICK_SE}), {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

fn criterion_3(ledger: &mut Ledger) {
    let mut details = Vec::new();
    let mut passed = true;
    for k in [1usize, 2] {
        let basis = spectral_basis(&OneBodySpec::interval(BoundaryCondition::Dirichlet, 1.0, 256), k).unwrap();
        let tensor = interaction_elements(&basis, &InteractionKernel::Delta { g: 1.0 }).unwrap();
        let free = sample_free(&basis, 100_000, 23 + k as u64).unwrap();
        let mean = mean_f_nl_free_with(&free, &tensor);
        let z = mean.discrepancy_in_stderr();
        passed &= z <= MEAN_INTERACTION_SE;
        details.push(format!("K={k}: {z:.2} SE"));
        if k == 1 {
            let l = basis.eigenvalues[0];
            let analytic = tensor.get(0, 0, 0, 0) / (l * l);
            let za = (mean.monte_carlo.mean - analytic).abs() / mean.monte_carlo.stderr;
            passed &= za <= MEAN_INTERACTION_SE;
            details.push(format!("K=1 vs w/λ²: {za:.2} SE"));
        }
    }
    ledger.record(
        3,
        "mean interaction identity",
        passed,
        format!("{} (tol {MEAN_INTERACTION_SE} SE)", details.join(", ")),
    );
}

fn criterion_4(ledger: &mut Ledger) {
    let basis = spectral_basis(&OneBodySpec::interval(BoundaryCondition::Periodic, 1.0, 256), 1).unwrap();
    let tensor = interaction_elements(&basis, &InteractionKernel::Delta { g: 4.0 }).unwrap();
    let ens = reweight_with_tensor(&sample_free(&basis, 200_000, 5).unwrap(), &tensor).unwrap();
    let oracle = quartic_single_mode_z_r();
    let z_se = (ens.z_r.mean - oracle).abs() / ens.z_r.stderr;

    let (lambda, t, n_max) = (1.0, 4.0, 60);
    let fock = Arc::new(FockBasis::new(1, n_max).unwrap());
    let g = gibbs_state(&free_hamiltonian(fock, &[lambda]).unwrap(), t).unwrap();
    let log_z_err = (g.log_z - geometric_log_z(lambda, t, n_max)).abs();
    ledger.record(
        4,
        "single-mode closed forms",
        z_se <= QUARTIC_SE && log_z_err <= GEOMETRIC_TOL,
        format!(
            "Z_r {:.5} vs {oracle:.5} ({z_se:.2} SE, tol {QUARTIC_SE}), log Z err {log_z_err:.1e} (tol {GEOMETRIC_TOL:.0e})",
            ens.z_r.mean
        ),
    );
}

fn criterion_5(ledger: &mut Ledger) {
    let (mut route, mut number, mut energy): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..20u64 {
        let modes = 1 + (i % 3) as usize;
        let n_max = 2 + (i % 7) as usize;
        let spectral = spectral_basis(&OneBodySpec::interval(BoundaryCondition::Dirichlet, 1.0, 128), modes).unwrap();
        let tensor = interaction_elements(&spectral, &InteractionKernel::Delta { g: 1.5 }).unwrap();
        let state = random_state(Arc::new(FockBasis::new(modes, n_max).unwrap()), 100 + i);
        for k in 1..=n_max.min(3) {
            let a = reduced_density_matrix(&state, k).unwrap();
            let b = reduced_dm_normal_ordered(&state, k).unwrap();
            route = route.max(a.max_entry_difference(&b));
        }
        let g1 = reduced_density_matrix(&state, 1).unwrap();
        number = number.max((g1.trace() - particle_number(&state)).abs());
        let e = energy_decomposition(&state, &spectral.eigenvalues, &tensor, 0.3).unwrap();
        energy = energy.max(e.relative_defect());
    }
    ledger.record(
        5,
        "exact algebraic identities",
        route <= ROUTE_TOL && number <= NUMBER_TOL && energy <= ENERGY_REL_TOL,
        format!("routes {route:.1e}, tr Γ^(1) - <N> {number:.1e}, energy {energy:.1e} rel"),
    );
}

fn desk_config(kernel: InteractionKernel) -> ExperimentConfig {
    ExperimentConfig::new(
        OneBodySpec::interval(BoundaryCondition::Dirichlet, 1.0, 256),
        kernel,
        2,
        DESK_SCHEDULE.to_vec(),
        DESK_SAMPLES,
        DESK_SEED,
    )
}

fn non_increasing(series: &[(f64, f64)]) -> bool {
    series
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 + MONOTONE_SLACK_SE * w[0].1.max(w[1].1))
}

fn fmt_series(series: &[(f64, f64)]) -> String {
    series
        .iter()
        .map(|(v, _)| format!("{v:.3e}"))
        .collect::<Vec<_>>()
        .join(" > ")
}

fn criteria_6_to_9(ledger: &mut Ledger, report: &ConvergenceReport, elapsed: Duration) {
    let rows = &report.rows;
    let d = |k: usize| -> Vec<(f64, f64)> {
        rows.iter()
            .map(|r| {
                let m = r.distance(k).unwrap();
                (m.trace_distance, m.stderr)
            })
            .collect()
    };
    let (d1, d2) = (d(1), d(2));
    let drop = d1[0].0 / d1[d1.len() - 1].0;
    let valid = rows.iter().all(|r| r.valid);
    ledger.record(
        6,
        "trace-norm convergence",
        non_increasing(&d1) && non_increasing(&d2) && drop > D1_DROP && valid && within(elapsed, 600.0),
        format!(
            "d_1 {} (drop x{drop:.2}, need > {D1_DROP}), d_2 {}, n_max {:?}, {:.1}s",
            fmt_series(&d1),
            fmt_series(&d2),
            rows.iter().map(|r| r.n_max).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    );

    let fe: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.free_energy_error(), r.free_energy_stderr))
        .collect();
    let fe_drop = fe[0].0 / fe[fe.len() - 1].0;
    ledger.record(
        7,
        "free-energy convergence",
        non_increasing(&fe) && fe_drop >= FREE_ENERGY_DROP,
        format!(
            "|f + log Z_r| {} (drop x{fe_drop:.2}, need >= {FREE_ENERGY_DROP}), -log Z_r = {:.5} ± {:.1e}",
            fmt_series(&fe),
            rows[0].free_energy_target,
            rows[0].free_energy_stderr
        ),
    );

    let margins: Vec<Option<f64>> = rows
        .iter()
        .map(|r| r.rel_free_energy_trial.map(|t| t - r.rel_free_energy_gibbs))
        .collect();
    let variational = margins.iter().all(|m| m.is_some_and(|m| m >= -VARIATIONAL_TOL));
    ledger.record(
        8,
        "trial state above Gibbs",
        variational,
        format!(
            "margins {} (tol {VARIATIONAL_TOL:.0e})",
            margins
                .iter()
                .map(|m| m.map_or("n/a".to_string(), |m| format!("{m:.3e}")))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );

    let gaps: Vec<f64> = rows.iter().map(|r| r.berezin_lieb.as_ref().unwrap().gap).collect();
    let last = gaps[gaps.len() - 1];
    ledger.record(
        9,
        "Berezin-Lieb gap",
        last >= BL_GAP_TOL,
        format!(
            "trajectory {} (need >= {BL_GAP_TOL} at T={})",
            gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>().join(", "),
            DESK_SCHEDULE[3]
        ),
    );
}

fn criterion_10(ledger: &mut Ledger) {
    let mut config = desk_config(InteractionKernel::zero());
    config.k_max = 1;
    config.mc_samples = 1;
    config.bl_samples = 64;
    let report = run_convergence(&config).unwrap();
    let worst = report
        .rows
        .iter()
        .map(|r| {
            let expected = free_first_order_distance(&report.classical.eigenvalues, r.temperature);
            (r.distance(1).unwrap().trace_distance - expected).abs()
        })
        .fold(0.0, f64::max);
    let zero_f = report
        .rows
        .iter()
        .all(|r| r.free_energy == 0.0 && r.free_energy_target == 0.0);
    ledger.record(
        10,
        "zero-kernel closed form",
        worst <= ZERO_KERNEL_TOL && zero_f,
        format!("max |d_1 - closed form| {worst:.1e} (tol {ZERO_KERNEL_TOL:.0e}), f = -log Z_r = 0: {zero_f}"),
    );
}

#[test]
fn acceptance() {
    let mut ledger = Ledger { lines: Vec::new() };
    criterion_1(&mut ledger);
    criterion_2(&mut ledger);
    criterion_3(&mut ledger);
    criterion_4(&mut ledger);
    criterion_5(&mut ledger);

    let start = Instant::now();
    let report = run_convergence(&desk_config(InteractionKernel::Delta { g: 1.0 })).unwrap();
    criteria_6_to_9(&mut ledger, &report, start.elapsed());
    criterion_10(&mut ledger);

    let failed: Vec<&String> = ledger.lines.iter().filter(|(ok, _)| !ok).map(|(_, l)| l).collect();
    println!(
        "{} of {} criteria passed",
        ledger.lines.len() - failed.len(),
        ledger.lines.len()
    );
    assert!(
        failed.is_empty(),
        "failed criteria:\n{}",
        failed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n")
    );
}
