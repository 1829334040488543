//! The free Gaussian measure `μ₀`, its reweighting by `exp(-F_NL)` into the
//! interacting measure `μ`, and the associated classical free energies.

mod moments;

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{interaction_elements, InteractionKernel, SpectralBasis, TwoBodyTensor};

pub(crate) use moments::{format_occupation, write_sym_matrix_csv};
pub use moments::{free_moment_matrix, moment_matrix, moment_matrix_with_budget, MomentMatrix};

/// Samples per RNG stream; fixed so results do not depend on the thread count.
pub const CHUNK: usize = 1024;

/// Mode coefficients `α` of a field `u = Σ α_j u_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub coeffs: Vec<Complex64>,
}

impl FieldSample {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        FieldSample { coeffs }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `u(x) = Σ_j α_j u_j(x)` on the grid of `basis`.
    pub fn field_on_grid(&self, basis: &SpectralBasis) -> Vec<Complex64> {
        let n = basis.grid.len();
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        for (a, mode) in self.coeffs.iter().zip(&basis.eigenvectors) {
            u.iter_mut().zip(mode).for_each(|(x, m)| *x += a * m);
        }
        u
    }
}

/// Mean with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// How per-chunk RNG streams are derived from the user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubseedScheme {
    /// Chunk `c` draws from ChaCha20 seeded with `seed` on stream `c`.
    #[default]
    Deterministic,
    /// Negative control for determinism checks: streams depend on a global call counter.
    Corrupted,
}

static CORRUPTION_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct WeightedEnsemble {
    pub samples: Vec<FieldSample>,
    /// `-F_NL` per sample (all zero for a free ensemble).
    pub log_weights: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub reweighted: bool,
    pub z_r: Estimate,
    pub ess: f64,
}

impl WeightedEnsemble {
    /// Assembles an ensemble from samples and their log-weights `-F_NL`.
    pub fn from_parts(
        samples: Vec<FieldSample>,
        log_weights: Vec<f64>,
        eigenvalues: Vec<f64>,
        reweighted: bool,
    ) -> Self {
        let n = log_weights.len() as f64;
        let weights: Vec<f64> = log_weights.iter().map(|l| l.exp()).collect();
        let (sum, sum_sq) = chunked_sum2(&weights, |w| (w, w * w));
        let mean = sum / n;
        let var = if n > 1.0 {
            (sum_sq - n * mean * mean).max(0.0) / (n - 1.0)
        } else {
            0.0
        };
        let ess = if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 };
        WeightedEnsemble {
            samples,
            log_weights,
            eigenvalues,
            reweighted,
            z_r: Estimate {
                mean,
                stderr: (var / n).sqrt(),
            },
            ess,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Self-normalized weighted mean of `f` with delta-method standard error
    /// `sqrt(Σ w²(f - f̄)²) / Σ w`.
    pub fn weighted_mean<F>(&self, f: F) -> Estimate
    where
        F: Fn(&FieldSample) -> f64 + Sync,
    {
        let values: Vec<f64> = self.samples.par_iter().map(&f).collect();
        self.weighted_mean_of(&values)
    }

    pub fn weighted_mean_of(&self, values: &[f64]) -> Estimate {
        let weights = self.weights();
        let pairs: Vec<(f64, f64)> = weights.iter().copied().zip(values.iter().copied()).collect();
        let (sw, swf) = chunked_sum2(&pairs, |(w, f)| (w, w * f));
        let mean = swf / sw;
        let (sq, _) = chunked_sum2(&pairs, |(w, f)| ((w * (f - mean)).powi(2), 0.0));
        Estimate {
            mean,
            stderr: sq.sqrt() / sw,
        }
    }

    /// CSV with columns `sample,abs2_1..abs2_K,log_weight`.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["sample".to_string()];
        header.extend((1..=self.modes()).map(|j| format!("abs2_{j}")));
        header.push("log_weight".into());
        w.write_record(&header)?;
        for (i, (s, lw)) in self.samples.iter().zip(&self.log_weights).enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(s.coeffs.iter().map(|a| format!("{:.17e}", a.norm_sqr())));
            row.push(format!("{lw:.17e}"));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Sums a pair of statistics over fixed chunks, then sequentially, so the
/// floating-point result is independent of scheduling.
pub(crate) fn chunked_sum2<T: Copy + Sync>(items: &[T], f: impl Fn(T) -> (f64, f64) + Sync) -> (f64, f64) {
    items
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk.iter().fold((0.0, 0.0), |(a, b), &x| {
                let (p, q) = f(x);
                (a + p, b + q)
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (p, q)| (a + p, b + q))
}

pub fn sample_free(basis: &SpectralBasis, n_samples: usize, seed: u64) -> Result<WeightedEnsemble> {
    sample_free_from_eigenvalues(&basis.eigenvalues, n_samples, seed, SubseedScheme::Deterministic)
}

/// Independent centred complex Gaussians with `E|α_j|² = 1/λ_j`.
pub fn sample_free_from_eigenvalues(
    eigenvalues: &[f64],
    n_samples: usize,
    seed: u64,
    scheme: SubseedScheme,
) -> Result<WeightedEnsemble> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    if eigenvalues.is_empty() || eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidArgument("free measure needs positive eigenvalues".into()));
    }
    let scales: Vec<f64> = eigenvalues.iter().map(|l| (0.5 / l).sqrt()).collect();
    let n_chunks = n_samples.div_ceil(CHUNK);
    let salt = match scheme {
        SubseedScheme::Deterministic => 0,
        SubseedScheme::Corrupted => CORRUPTION_COUNTER.fetch_add(1, Ordering::Relaxed) + 1,
    };
    let samples: Vec<FieldSample> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let count = CHUNK.min(n_samples - c * CHUNK);
            let scales = &scales;
            (0..count)
                .map(|_| {
                    let coeffs = scales
                        .iter()
                        .map(|s| {
                            let re: f64 = StandardNormal.sample(&mut rng);
                            let im: f64 = StandardNormal.sample(&mut rng);
                            Complex64::new(re * s, im * s)
                        })
                        .collect();
                    FieldSample { coeffs }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(WeightedEnsemble::from_parts(
        samples,
        vec![0.0; n_samples],
        eigenvalues.to_vec(),
        false,
    ))
}

/// `F_NL[u] = ½ ∬ |u(x)|² w(x-y) |u(y)|²`, by quadrature of the reconstructed field.
pub fn eval_f_nl(sample: &FieldSample, basis: &SpectralBasis, kernel: &InteractionKernel) -> Result<f64> {
    if sample.coeffs.len() != basis.modes() {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} modes, basis has {}",
            sample.coeffs.len(),
            basis.modes()
        )));
    }
    let dens: Vec<f64> = sample.field_on_grid(basis).iter().map(|u| u.norm_sqr()).collect();
    let dx = basis.grid.spacing;
    let value = match kernel {
        InteractionKernel::Delta { g } => {
            kernel.validate()?;
            0.5 * g * dens.iter().map(|d| d * d).sum::<f64>() * dx
        }
        _ => {
            let table = kernel.offset_table(&basis.grid)?;
            let n = dens.len();
            let mut acc = 0.0;
            for a in 0..n {
                let inner: f64 = dens
                    .iter()
                    .enumerate()
                    .map(|(b, d)| InteractionKernel::lookup(&table, &basis.grid, a, b) * d)
                    .sum();
                acc += dens[a] * inner;
            }
            0.5 * acc * dx * dx
        }
    };
    Ok(value.max(0.0))
}

/// `F_NL = ½ Σ W[ijkl] conj(α_i α_j) α_k α_l`, the same quadrature through the tensor.
pub fn f_nl_from_tensor(alpha: &[Complex64], tensor: &TwoBodyTensor) -> f64 {
    let k = tensor.modes();
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            let left = (alpha[i] * alpha[j]).conj();
            for kk in 0..k {
                for l in 0..k {
                    let w = tensor.get(i, j, kk, l);
                    if w != 0.0 {
                        acc += w * (left * alpha[kk] * alpha[l]).re;
                    }
                }
            }
        }
    }
    (0.5 * acc).max(0.0)
}

/// `<u, h u> = Σ λ_j |α_j|²`.
pub fn eval_quadratic_form(sample: &FieldSample, basis: &SpectralBasis) -> f64 {
    sample
        .coeffs
        .iter()
        .zip(&basis.eigenvalues)
        .map(|(a, l)| l * a.norm_sqr())
        .sum()
}

pub fn reweight(
    ensemble: &WeightedEnsemble,
    basis: &SpectralBasis,
    kernel: &InteractionKernel,
) -> Result<WeightedEnsemble> {
    let tensor = interaction_elements(basis, kernel)?;
    reweight_with_tensor(ensemble, &tensor)
}

/// Sets `log_weights = -F_NL` and refreshes `Z_r` and the effective sample size.
pub fn reweight_with_tensor(ensemble: &WeightedEnsemble, tensor: &TwoBodyTensor) -> Result<WeightedEnsemble> {
    if tensor.modes() != ensemble.modes() {
        return Err(Error::DimensionMismatch(format!(
            "tensor has {} modes, ensemble has {}",
            tensor.modes(),
            ensemble.modes()
        )));
    }
    let log_weights: Vec<f64> = if tensor.is_zero() {
        vec![0.0; ensemble.len()]
    } else {
        ensemble
            .samples
            .par_iter()
            .map(|s| -f_nl_from_tensor(&s.coeffs, tensor))
            .collect()
    };
    Ok(WeightedEnsemble::from_parts(
        ensemble.samples.clone(),
        log_weights,
        ensemble.eigenvalues.clone(),
        true,
    ))
}

/// Monte Carlo and closed-form values of `∫ F_NL dμ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanInteraction {
    pub monte_carlo: Estimate,
    pub closed_form: f64,
}

impl MeanInteraction {
    pub fn discrepancy_in_stderr(&self) -> f64 {
        let diff = (self.monte_carlo.mean - self.closed_form).abs();
        if self.monte_carlo.stderr > 0.0 {
            diff / self.monte_carlo.stderr
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `½ tr[w γ₀^(2)]` on the symmetric two-body space, with `γ₀^(2) = 2 (h⁻¹)^{⊗2}`.
pub fn mean_f_nl_closed_form(eigenvalues: &[f64], tensor: &TwoBodyTensor) -> f64 {
    let gamma2 = free_moment_matrix(eigenvalues, 2);
    let w = tensor.sym2_matrix();
    let mut acc = 0.0;
    for r in 0..w.nrows() {
        for c in 0..w.ncols() {
            acc += w[(r, c)] * gamma2.mean[(c, r)].re;
        }
    }
    0.5 * acc
}

pub fn mean_f_nl_free(
    basis: &SpectralBasis,
    kernel: &InteractionKernel,
    n_samples: usize,
    seed: u64,
) -> Result<MeanInteraction> {
    let tensor = interaction_elements(basis, kernel)?;
    let ensemble = sample_free(basis, n_samples, seed)?;
    Ok(mean_f_nl_free_with(&ensemble, &tensor))
}

/// Same as [`mean_f_nl_free`] on an existing unweighted ensemble.
pub fn mean_f_nl_free_with(free: &WeightedEnsemble, tensor: &TwoBodyTensor) -> MeanInteraction {
    let values: Vec<f64> = free
        .samples
        .par_iter()
        .map(|s| f_nl_from_tensor(&s.coeffs, tensor))
        .collect();
    let n = values.len() as f64;
    let (sum, sum_sq) = chunked_sum2(&values, |v| (v, v * v));
    let mean = sum / n;
    let var = if n > 1.0 {
        (sum_sq - n * mean * mean).max(0.0) / (n - 1.0)
    } else {
        0.0
    };
    MeanInteraction {
        monte_carlo: Estimate {
            mean,
            stderr: (var / n).sqrt(),
        },
        closed_form: mean_f_nl_closed_form(&free.eigenvalues, tensor),
    }
}

/// `𝓕_cl[μ] = -log Z_r` together with its two terms estimated separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalFreeEnergy {
    pub value: f64,
    pub stderr: f64,
    /// `∫ F_NL dμ`
    pub interaction: Estimate,
    /// `∫ ρ log ρ dμ₀` with `ρ = dμ/dμ₀`
    pub entropy: f64,
}

pub fn classical_relative_free_energy(ensemble: &WeightedEnsemble) -> Result<ClassicalFreeEnergy> {
    if !ensemble.reweighted {
        return Err(Error::NotReweighted);
    }
    let z = ensemble.z_r;
    if !(z.mean > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Z_r estimate {} is not positive",
            z.mean
        )));
    }
    let f_values: Vec<f64> = ensemble.log_weights.iter().map(|l| -l).collect();
    let interaction = ensemble.weighted_mean_of(&f_values);
    let log_z = z.mean.ln();
    let n = ensemble.len() as f64;
    let (sum, _) = chunked_sum2(&ensemble.log_weights, |lw| {
        let rho = lw.exp() / z.mean;
        let term = if rho > 0.0 { rho * (lw - log_z) } else { 0.0 };
        (term, 0.0)
    });
    Ok(ClassicalFreeEnergy {
        value: -log_z,
        stderr: z.stderr / z.mean,
        interaction,
        entropy: sum / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{spectral_basis, BoundaryCondition, OneBodySpec};

    fn dirichlet(k: usize) -> SpectralBasis {
        spectral_basis(&OneBodySpec::interval(BoundaryCondition::Dirichlet, 1.0, 512), k).unwrap()
    }

    #[test]
    fn single_mode_second_moment() {
        let ens = sample_free_from_eigenvalues(&[2.0], 100_000, 7, SubseedScheme::Deterministic).unwrap();
        let m = ens.weighted_mean(|s| s.coeffs[0].norm_sqr());
        assert!((m.mean - 0.5).abs() < 4.0 * m.stderr, "{m:?}");
        let re = ens.weighted_mean(|s| s.coeffs[0].re);
        let im = ens.weighted_mean(|s| s.coeffs[0].im);
        assert!(re.mean.abs() < 4.0 * re.stderr);
        assert!(im.mean.abs() < 4.0 * im.stderr);
    }

    #[test]
    fn distinct_modes_uncorrelated() {
        let ens = sample_free_from_eigenvalues(&[1.0, 3.0], 100_000, 11, SubseedScheme::Deterministic).unwrap();
        let re = ens.weighted_mean(|s| (s.coeffs[0] * s.coeffs[1].conj()).re);
        let im = ens.weighted_mean(|s| (s.coeffs[0] * s.coeffs[1].conj()).im);
        assert!(re.mean.abs() < 4.0 * re.stderr);
        assert!(im.mean.abs() < 4.0 * im.stderr);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a = sample_free_from_eigenvalues(&[1.0, 2.0], 5000, 3, SubseedScheme::Deterministic).unwrap();
        let b = sample_free_from_eigenvalues(&[1.0, 2.0], 5000, 3, SubseedScheme::Deterministic).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = sample_free_from_eigenvalues(&[1.0, 2.0], 5000, 4, SubseedScheme::Deterministic).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn corrupted_subseeds_break_determinism() {
        let a = sample_free_from_eigenvalues(&[1.0], 100, 3, SubseedScheme::Corrupted).unwrap();
        let b = sample_free_from_eigenvalues(&[1.0], 100, 3, SubseedScheme::Corrupted).unwrap();
        assert_ne!(a.samples, b.samples);
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(sample_free_from_eigenvalues(&[1.0], 0, 0, SubseedScheme::Deterministic).is_err());
    }

    #[test]
    fn f_nl_basic_cases() {
        let basis = dirichlet(2);
        let kernel = InteractionKernel::Delta { g: 1.0 };
        let zero = FieldSample::new(vec![Complex64::new(0.0, 0.0); 2]);
        assert_eq!(eval_f_nl(&zero, &basis, &kernel).unwrap(), 0.0);

        let single = spectral_basis(&OneBodySpec::interval(BoundaryCondition::Dirichlet, 1.0, 1024), 1).unwrap();
        let a = 1.7;
        let s = FieldSample::new(vec![Complex64::new(a, 0.0)]);
        let f = eval_f_nl(&s, &single, &kernel).unwrap();
        assert!((f - 0.5 * a.powi(4) * 0.75).abs() < 1e-4);
    }

    #[test]
    fn grid_and_tensor_routes_agree() {
        let basis = dirichlet(3);
        let gaussian = InteractionKernel::tabulate(&basis.grid, |d| 0.8 * (-d * d / 0.2).exp());
        let ens = sample_free(&basis, 20, 5).unwrap();
        for kernel in [InteractionKernel::Delta { g: 1.5 }, gaussian] {
            let tensor = interaction_elements(&basis, &kernel).unwrap();
            for s in &ens.samples {
                let grid = eval_f_nl(s, &basis, &kernel).unwrap();
                let tens = f_nl_from_tensor(&s.coeffs, &tensor);
                assert!((grid - tens).abs() < 1e-10 * (1.0 + grid), "{grid} vs {tens}");
            }
        }
    }

    #[test]
    fn quadratic_form_matches_grid_quadrature() {
        let basis = dirichlet(4);
        let ens = sample_free(&basis, 10, 9).unwrap();
        let e1 = FieldSample::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        assert!((eval_quadratic_form(&e1, &basis) - basis.eigenvalues[0]).abs() < 1e-14);
        let dx = basis.grid.spacing;
        for s in &ens.samples {
            let u = s.field_on_grid(&basis);
            // forward differences with zero Dirichlet walls on both sides
            let mut grad = 0.0;
            let mut prev = Complex64::new(0.0, 0.0);
            for x in u.iter().chain(std::iter::once(&Complex64::new(0.0, 0.0))) {
                grad += ((x - prev) / dx).norm_sqr() * dx;
                prev = *x;
            }
            let pot: f64 = u.iter().map(|x| x.norm_sqr()).sum::<f64>() * dx * basis.spec.m;
            let q = eval_quadratic_form(s, &basis);
            assert!((grad + pot - q).abs() < 1e-8 * q.max(1.0), "{} vs {q}", grad + pot);
        }
    }

    #[test]
    fn zero_interaction_keeps_unit_weights() {
        let basis = dirichlet(2);
        let ens = sample_free(&basis, 1000, 1).unwrap();
        let rw = reweight(&ens, &basis, &InteractionKernel::zero()).unwrap();
        assert_eq!(rw.z_r.mean, 1.0);
        assert!(rw.reweighted);
        let fe = classical_relative_free_energy(&rw).unwrap();
        assert_eq!(fe.value, 0.0);
        assert_eq!(fe.interaction.mean, 0.0);
        assert!(fe.entropy.abs() < 1e-15);
    }

    #[test]
    fn reweighted_invariants() {
        let basis = dirichlet(2);
        let ens = sample_free(&basis, 20_000, 2).unwrap();
        let rw = reweight(&ens, &basis, &InteractionKernel::Delta { g: 3.0 }).unwrap();
        assert!(rw.log_weights.iter().all(|&l| l <= 0.0));
        assert!(rw.z_r.mean > 0.0 && rw.z_r.mean <= 1.0);
        assert!(rw.ess <= rw.len() as f64 && rw.ess > 0.0);
        // Jensen: -log Z_r <= E_{μ₀} F_NL
        let tensor = interaction_elements(&basis, &InteractionKernel::Delta { g: 3.0 }).unwrap();
        let mean = mean_f_nl_free_with(&ens, &tensor);
        assert!(-rw.z_r.mean.ln() <= mean.monte_carlo.mean + 3.0 * mean.monte_carlo.stderr);
        let fe = classical_relative_free_energy(&rw).unwrap();
        assert!((fe.interaction.mean + fe.entropy - fe.value).abs() < 3.0 * fe.interaction.stderr + 1e-12);
    }

    #[test]
    fn free_energy_requires_reweighting() {
        let ens = sample_free_from_eigenvalues(&[1.0], 10, 0, SubseedScheme::Deterministic).unwrap();
        assert!(matches!(
            classical_relative_free_energy(&ens),
            Err(Error::NotReweighted)
        ));
    }

    #[test]
    fn closed_form_mean_matches_wick_sum() {
        // ½ Σ_ij (W[ijij] + W[ijji]) / (λ_i λ_j)
        let basis = dirichlet(3);
        let tensor = interaction_elements(&basis, &InteractionKernel::Delta { g: 1.0 }).unwrap();
        let l = &basis.eigenvalues;
        let mut wick = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                wick += 0.5 * (tensor.get(i, j, i, j) + tensor.get(i, j, j, i)) / (l[i] * l[j]);
            }
        }
        assert!((mean_f_nl_closed_form(l, &tensor) - wick).abs() < 1e-14);
    }

    #[test]
    fn summary_csv_shape() {
        let ens = sample_free_from_eigenvalues(&[1.0, 2.0], 3, 0, SubseedScheme::Deterministic).unwrap();
        let mut buf = Vec::new();
        ens.write_summary_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "sample,abs2_1,abs2_2,log_weight");
        assert_eq!(text.lines().count(), 4);
    }
}
