use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use nlgibbs::classical::{
    mean_f_nl_free_with, moment_matrix, reweight_with_tensor, sample_free_from_eigenvalues, SubseedScheme,
};
use nlgibbs::experiment::{
    emit_convergence, run_convergence, run_selfchecks, ExperimentConfig, SelfCheckOptions, BL_GAP_TOL,
};
use nlgibbs::fock::{
    build_hamiltonian, choose_n_max, free_hamiltonian, gibbs_state, reduced_density_matrix, FockBasis,
};
use nlgibbs::semiclassics::{berezin_lieb_gap, BerezinLiebOptions};
use nlgibbs::spectral::{interaction_elements, resolve_half_width, schatten_trace, spectral_basis};
use nlgibbs::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    author,
    version,
    about = "High-temperature limit experiments for bosonic Gibbs states"
)]
struct Cli {
    /// Experiment configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the seed of the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; relative output paths of the config resolve here
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (defaults to the number of cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues and eigenvectors of the one-body operator
    Spectrum,
    /// Free and interacting classical ensembles, Z_r and moment matrices
    Sample,
    /// Truncated Gibbs states along the schedule
    Quantum,
    /// Full convergence run with acceptance properties
    Converge,
    /// Invariant self-checks
    Selfcheck,
    /// Berezin-Lieb gap trajectory along the schedule
    BlGap,
}

/// Outcome of a subcommand that ran to completion.
enum Verdict {
    Ok,
    PropertyFailed,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut config = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn spectrum(config: &ExperimentConfig, out: &Path) -> Result<Verdict> {
    let spec = resolve_half_width(&config.operator, config.modes)?;
    let basis = spectral_basis(&spec, config.modes)?;
    basis.write_csv(create(&out.join("spectrum.csv"))?)?;
    #[derive(Serialize)]
    struct SpectrumSummary<'a> {
        operator: &'a nlgibbs::spectral::OneBodySpec,
        eigenvalues: &'a [f64],
        orthonormality_defect: f64,
        max_residual: f64,
        schatten_1: nlgibbs::spectral::SchattenTrace,
        schatten_2: nlgibbs::spectral::SchattenTrace,
    }
    write_json(
        &out.join("spectrum.json"),
        &SpectrumSummary {
            operator: &spec,
            eigenvalues: &basis.eigenvalues,
            orthonormality_defect: basis.orthonormality_defect(),
            max_residual: (0..basis.modes()).map(|j| basis.residual(j)).fold(0.0, f64::max),
            schatten_1: schatten_trace(&basis, 1.0, 10_000),
            schatten_2: schatten_trace(&basis, 2.0, 10_000),
        },
    )?;
    Ok(Verdict::Ok)
}

fn sample(config: &ExperimentConfig, out: &Path) -> Result<Verdict> {
    let spec = resolve_half_width(&config.operator, config.modes)?;
    let basis = spectral_basis(&spec, config.modes)?;
    let tensor = interaction_elements(&basis, &config.kernel)?;
    let free = sample_free_from_eigenvalues(
        &basis.eigenvalues,
        config.mc_samples,
        config.seed,
        SubseedScheme::Deterministic,
    )?;
    let mean = mean_f_nl_free_with(&free, &tensor);
    let ens = reweight_with_tensor(&free, &tensor)?;
    ens.write_summary_csv(create(&out.join("ensemble.csv"))?)?;
    for k in 1..=config.k_max {
        moment_matrix(&ens, k)?.write_csv(create(&out.join(format!("gamma{k}_classical.csv")))?)?;
    }
    write_json(
        &out.join("sample.json"),
        &serde_json::json!({
            "eigenvalues": basis.eigenvalues,
            "samples": ens.len(),
            "z_r": ens.z_r,
            "ess": ens.ess,
            "mean_interaction_free": mean,
        }),
    )?;
    Ok(Verdict::Ok)
}

fn quantum(config: &ExperimentConfig, out: &Path) -> Result<Verdict> {
    let spec = resolve_half_width(&config.operator, config.modes)?;
    let basis = spectral_basis(&spec, config.modes)?;
    let tensor = interaction_elements(&basis, &config.kernel)?;
    let mut summaries = Vec::new();
    for &t in &config.t_schedule {
        let cutoff = choose_n_max(
            &basis.eigenvalues,
            t,
            config.n_max_policy,
            config.k_max.max(2),
            config.n_max_limit,
        )?;
        let fock = Arc::new(FockBasis::with_budget(config.modes, cutoff.n_max, config.fock_budget)?);
        let h = build_hamiltonian(fock, &basis.eigenvalues, &tensor, config.coupling(t))?;
        let g = gibbs_state(&h, t)?;
        reduced_density_matrix(&g.state, 1)?.write_csv(create(&out.join(format!("gamma1_T{t}.csv")))?)?;
        summaries.push(g.summary());
    }
    write_json(&out.join("quantum.json"), &summaries)?;
    Ok(Verdict::Ok)
}

fn converge(config: &ExperimentConfig, out: &Path) -> Result<Verdict> {
    let report = run_convergence(config)?;
    emit_convergence(&report, &config.output.under(out))?;
    let mut verdict = Verdict::Ok;
    for p in report.properties() {
        println!("{} {}: {}", if p.passed { "PASS" } else { "FAIL" }, p.name, p.detail);
        if !p.passed {
            verdict = Verdict::PropertyFailed;
        }
    }
    Ok(verdict)
}

fn selfcheck(config: &ExperimentConfig, out: &Path) -> Result<Verdict> {
    let report = run_selfchecks(config, SelfCheckOptions::default())?;
    for c in &report.checks {
        println!(
            "{} {}: {:.3e} (tolerance {:.1e} {})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance,
            c.unit
        );
    }
    write_json(&out.join("selfcheck.json"), &report)?;
    Ok(if report.all_passed() {
        Verdict::Ok
    } else {
        Verdict::PropertyFailed
    })
}

fn bl_gap(config: &ExperimentConfig, out: &Path) -> Result<Verdict> {
    let spec = resolve_half_width(&config.operator, config.modes)?;
    let basis = spectral_basis(&spec, config.modes)?;
    let tensor = interaction_elements(&basis, &config.kernel)?;
    let mut w = csv_writer(&out.join("bl_gap.csv"))?;
    w.write_record([
        "T",
        "quantum",
        "classical",
        "classical_stderr",
        "gap",
        "ess",
        "degenerate",
        "max_tail",
    ])?;
    let mut trajectory = Vec::new();
    for (i, &t) in config.t_schedule.iter().enumerate() {
        let cutoff = choose_n_max(&basis.eigenvalues, t, config.n_max_policy, 2, config.n_max_limit)?;
        let fock = Arc::new(FockBasis::with_budget(config.modes, cutoff.n_max, config.fock_budget)?);
        let free = gibbs_state(&free_hamiltonian(fock.clone(), &basis.eigenvalues)?, t)?;
        let inter = gibbs_state(
            &build_hamiltonian(fock, &basis.eigenvalues, &tensor, config.coupling(t))?,
            t,
        )?;
        let gap = berezin_lieb_gap(
            &inter.state,
            &free.state,
            1.0 / t,
            BerezinLiebOptions {
                samples: config.bl_samples,
                seed: config.seed.wrapping_add(0x5EED_0000 + i as u64),
                ..BerezinLiebOptions::default()
            },
        )?;
        if gap.degenerate {
            warn!("importance sampling degenerate at T={t} (ESS {:.1})", gap.ess);
        }
        w.write_record([
            format!("{t:.17e}"),
            format!("{:.17e}", gap.quantum),
            format!("{:.17e}", gap.classical.mean),
            format!("{:.17e}", gap.classical.stderr),
            format!("{:.17e}", gap.gap),
            format!("{:.17e}", gap.ess),
            gap.degenerate.to_string(),
            format!("{:.17e}", gap.max_tail),
        ])?;
        trajectory.push(serde_json::json!({ "T": t, "gap": gap }));
    }
    w.flush().map_err(|e| Error::io(out.join("bl_gap.csv"), e))?;
    let last = trajectory
        .last()
        .and_then(|r| r["gap"]["gap"].as_f64())
        .unwrap_or(f64::NAN);
    let passed = last >= BL_GAP_TOL;
    println!(
        "{} Berezin-Lieb gap at largest T: {last:.4e}",
        if passed { "PASS" } else { "FAIL" }
    );
    write_json(&out.join("bl_gap.json"), &trajectory)?;
    Ok(if passed { Verdict::Ok } else { Verdict::PropertyFailed })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn run(cli: &Cli) -> Result<Verdict> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let config = load_config(cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Spectrum => spectrum(&config, out),
        Command::Sample => sample(&config, out),
        Command::Quantum => quantum(&config, out),
        Command::Converge => converge(&config, out),
        Command::Selfcheck => selfcheck(&config, out),
        Command::BlGap => bl_gap(&config, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share the generic error code; 2 is reserved for failed properties
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::PropertyFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
