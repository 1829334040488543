use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::coherent::{coherent_unchecked, COHERENT_TAIL_WARNING};
use crate::classical::{Estimate, CHUNK};
use crate::error::{Error, Result};
use crate::fock::{reduced_density_matrix, relative_entropy, FockState};

/// Sectors whose Poisson weight falls below this fraction of the peak are skipped.
const SECTOR_CUT: f64 = 1e-30;

#[derive(Debug, Clone, Serialize)]
pub struct HusimiEvaluation {
    pub density: Vec<f64>,
    /// Poisson tail of the coherent vector used at each point.
    pub tails: Vec<f64>,
}

impl HusimiEvaluation {
    pub fn max_tail(&self) -> f64 {
        self.tails.iter().copied().fold(0.0, f64::max)
    }

    /// Number of points whose coherent vector exceeds the tail warning level.
    pub fn cutoff_warnings(&self) -> usize {
        self.tails.iter().filter(|&&t| t > COHERENT_TAIL_WARNING).count()
    }
}

/// `(πε)^{-K} <ξ(u/√ε)| Γ |ξ(u/√ε)>` for each state, plus the coherent tail.
fn husimi_values(states: &[&FockState], eps: f64, u: &[Complex64]) -> Result<(Vec<f64>, f64)> {
    let basis = states[0].basis();
    let scale = 1.0 / eps.sqrt();
    let v: Vec<Complex64> = u.iter().map(|z| z * scale).collect();
    let coh = coherent_unchecked(&v, basis, SECTOR_CUT)?;
    let norm = (PI * eps).powi(basis.modes() as i32);
    let values = states
        .iter()
        .map(|state| {
            let mut acc = 0.0;
            for (n, a) in coh.amplitudes.iter().enumerate() {
                if a.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                    continue;
                }
                let ga = state.block(n) * a;
                acc += a.dotc(&ga).re;
            }
            (acc / norm).max(0.0)
        })
        .collect();
    Ok((values, coh.tail_bound))
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    Ok(())
}

/// Husimi density of `Γ` at scale `ε` on a list of points of `C^K`.
pub fn husimi_density(state: &FockState, eps: f64, points: &[Vec<Complex64>]) -> Result<HusimiEvaluation> {
    check_eps(eps)?;
    let evaluated: Vec<(Vec<f64>, f64)> = points
        .par_iter()
        .map(|u| husimi_values(&[state], eps, u))
        .collect::<Result<_>>()?;
    let (density, tails) = evaluated.into_iter().map(|(v, t)| (v[0], t)).unzip();
    Ok(HusimiEvaluation { density, tails })
}

/// Polar quadrature nodes `(u, weight)` on the disc of radius
/// `sqrt(ε (n_max + 10 sqrt(n_max) + 30))`: composite Simpson in `r`,
/// trapezoid in the angle.
fn polar_nodes(eps: f64, n_max: usize, n_radial: usize, n_angle: usize) -> Result<Vec<(Complex64, f64)>> {
    if n_radial < 2 || n_angle < 1 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least 2 radial and 1 angular nodes".into(),
        ));
    }
    let n_radial = n_radial + n_radial % 2;
    let nm = n_max as f64;
    let radius = (eps * (nm + 10.0 * nm.sqrt() + 30.0)).sqrt();
    let h = radius / n_radial as f64;
    let dtheta = 2.0 * PI / n_angle as f64;
    let mut nodes = Vec::with_capacity((n_radial + 1) * n_angle);
    for i in 1..=n_radial {
        let simpson = if i == n_radial {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let r = i as f64 * h;
        let w = simpson * h / 3.0 * r * dtheta;
        for a in 0..n_angle {
            nodes.push((Complex64::from_polar(r, a as f64 * dtheta), w));
        }
    }
    Ok(nodes)
}

/// `∫_C ρ(u) d²u` for a single-mode state by polar quadrature.
pub fn husimi_normalization_k1(state: &FockState, eps: f64, n_radial: usize, n_angle: usize) -> Result<f64> {
    check_eps(eps)?;
    if state.basis().modes() != 1 {
        return Err(Error::InvalidArgument("quadrature check is for a single mode".into()));
    }
    let nodes = polar_nodes(eps, state.basis().n_max(), n_radial, n_angle)?;
    let parts: Vec<f64> = nodes
        .par_iter()
        .map(|(u, w)| husimi_values(&[state], eps, &[*u]).map(|(v, _)| v[0] * w))
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// `∫ ρ log(ρ/ρ')` for single-mode states by polar quadrature.
pub fn classical_kl_quadrature_k1(
    state: &FockState,
    reference: &FockState,
    eps: f64,
    n_radial: usize,
    n_angle: usize,
) -> Result<f64> {
    check_eps(eps)?;
    if state.basis().modes() != 1 {
        return Err(Error::InvalidArgument("quadrature check is for a single mode".into()));
    }
    let nodes = polar_nodes(eps, state.basis().n_max(), n_radial, n_angle)?;
    let parts: Vec<f64> = nodes
        .par_iter()
        .map(|(u, w)| {
            let (v, _) = husimi_values(&[state, reference], eps, &[*u])?;
            Ok(kl_integrand(v[0], v[1]) * w)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

fn kl_integrand(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if q <= 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerezinLiebOptions {
    pub samples: usize,
    pub seed: u64,
    /// Effective sample sizes below this mark the classical estimate as degenerate.
    pub min_ess: f64,
    /// Variance factor of the Gaussian proposal relative to the reference Husimi density.
    pub proposal_inflation: f64,
}

impl Default for BerezinLiebOptions {
    fn default() -> Self {
        BerezinLiebOptions {
            samples: 2048,
            seed: 0,
            min_ess: 100.0,
            proposal_inflation: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerezinLiebGap {
    pub quantum: f64,
    pub classical: Estimate,
    /// `quantum − classical`.
    pub gap: f64,
    pub ess: f64,
    pub degenerate: bool,
    pub max_tail: f64,
}

/// Quantum relative entropy `S(Γ‖Γ')` against the classical relative entropy
/// of the Husimi densities at scale `ε`, the latter by self-normalized
/// importance sampling from a Gaussian matched to the Husimi density of `Γ'`.
pub fn berezin_lieb_gap(
    state: &FockState,
    reference: &FockState,
    eps: f64,
    options: BerezinLiebOptions,
) -> Result<BerezinLiebGap> {
    check_eps(eps)?;
    if options.samples == 0 {
        return Err(Error::InvalidArgument(
            "importance sampling needs at least one sample".into(),
        ));
    }
    let quantum = relative_entropy(state, reference)?;
    let modes = reference.basis().modes();
    let g1 = reduced_density_matrix(reference, 1)?;
    // Husimi density of a thermal mode with occupation n̄ has E|u|² = ε (n̄ + 1)
    let variances: Vec<f64> = (0..modes)
        .map(|j| options.proposal_inflation * eps * (g1.matrix[(j, j)].re.max(0.0) + 1.0))
        .collect();
    let ln_q_norm: f64 = variances.iter().map(|s| -(PI * s).ln()).sum();

    let n = options.samples;
    let n_chunks = n.div_ceil(CHUNK);
    // (importance ratio, log-likelihood ratio, coherent tail)
    let draws: Vec<(f64, f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(options.seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            let points: Vec<Vec<Complex64>> = (0..count)
                .map(|_| {
                    variances
                        .iter()
                        .map(|s| {
                            let re: f64 = StandardNormal.sample(&mut rng);
                            let im: f64 = StandardNormal.sample(&mut rng);
                            Complex64::new(re, im) * (0.5 * s).sqrt()
                        })
                        .collect()
                })
                .collect();
            points.into_iter().map(|u| {
                let ln_q = ln_q_norm - u.iter().zip(&variances).map(|(z, s)| z.norm_sqr() / s).sum::<f64>();
                let (v, tail) = husimi_values(&[state, reference], eps, &u).expect("dimensions checked");
                let ratio = if v[0] > 0.0 { (v[0].ln() - ln_q).exp() } else { 0.0 };
                let llr = if v[0] <= 0.0 {
                    0.0
                } else if v[1] <= 0.0 {
                    f64::INFINITY
                } else {
                    (v[0] / v[1]).ln()
                };
                (ratio, llr, tail)
            })
        })
        .collect();

    let sum_r: f64 = draws.iter().map(|d| d.0).sum();
    let sum_r2: f64 = draws.iter().map(|d| d.0 * d.0).sum();
    let mean = draws.iter().filter(|d| d.0 > 0.0).map(|d| d.0 * d.1).sum::<f64>() / sum_r;
    let var: f64 = draws
        .iter()
        .filter(|d| d.0 > 0.0)
        .map(|d| (d.0 * (d.1 - mean)).powi(2))
        .sum();
    let ess = if sum_r2 > 0.0 { sum_r * sum_r / sum_r2 } else { 0.0 };
    let max_tail = draws.iter().map(|d| d.2).fold(0.0, f64::max);
    let classical = Estimate {
        mean,
        stderr: var.sqrt() / sum_r,
    };
    Ok(BerezinLiebGap {
        quantum,
        classical,
        gap: quantum - mean,
        ess,
        degenerate: !(ess >= options.min_ess) || !mean.is_finite(),
        max_tail,
    })
}
