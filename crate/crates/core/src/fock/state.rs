use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{FockBasis, FockOperator};
use crate::classical::format_occupation;
use crate::error::{Error, Result};

const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-12;

/// Eigen-decomposition of one sector block. `vectors == None` means the block
/// is diagonal in the occupation basis.
#[derive(Debug, Clone)]
pub struct BlockSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Exact logarithms when the state was built from them (Gibbs states).
    pub log_eigenvalues: Option<Vec<f64>>,
    pub vectors: Option<DMatrix<Complex64>>,
}

impl BlockSpectrum {
    pub(crate) fn of_block(block: &DMatrix<Complex64>) -> Self {
        if is_diagonal(block) {
            return BlockSpectrum {
                eigenvalues: block.diagonal().iter().map(|z| z.re).collect(),
                log_eigenvalues: None,
                vectors: None,
            };
        }
        let herm = (block + block.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        BlockSpectrum {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            log_eigenvalues: None,
            vectors: Some(eig.eigenvectors),
        }
    }

    pub(crate) fn eigenvalues_only(block: &DMatrix<Complex64>) -> Self {
        let eigenvalues = if is_diagonal(block) {
            block.diagonal().iter().map(|z| z.re).collect()
        } else {
            let herm = (block + block.adjoint()) * Complex64::new(0.5, 0.0);
            herm.symmetric_eigenvalues().iter().copied().collect()
        };
        BlockSpectrum {
            eigenvalues,
            log_eigenvalues: None,
            vectors: None,
        }
    }

    /// `<v_j| B |v_j>` for each eigenvector `v_j`.
    pub(crate) fn diagonal_of(&self, block: &DMatrix<Complex64>) -> Vec<f64> {
        match &self.vectors {
            None => block.diagonal().iter().map(|z| z.re).collect(),
            Some(v) => {
                let bv = block * v;
                (0..v.ncols()).map(|j| v.column(j).dotc(&bv.column(j)).re).collect()
            }
        }
    }
}

fn is_diagonal(block: &DMatrix<Complex64>) -> bool {
    for c in 0..block.ncols() {
        for r in 0..block.nrows() {
            if r != c && block[(r, c)] != Complex64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

/// Density matrix commuting with the particle number, stored as sector blocks `G_n`.
#[derive(Debug, Clone)]
pub struct FockState {
    basis: Arc<FockBasis>,
    blocks: Vec<DMatrix<Complex64>>,
    spectrum: Option<Vec<BlockSpectrum>>,
}

impl FockState {
    /// Wraps sector blocks without validation; see [`FockState::validate`].
    pub fn from_blocks(basis: Arc<FockBasis>, blocks: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if blocks.len() != basis.sectors() {
            return Err(Error::DimensionMismatch(format!(
                "{} blocks for {} sectors",
                blocks.len(),
                basis.sectors()
            )));
        }
        for (n, b) in blocks.iter().enumerate() {
            let d = basis.sector_dim(n);
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::DimensionMismatch(format!("sector {n} block has wrong shape")));
            }
        }
        Ok(FockState {
            basis,
            blocks,
            spectrum: None,
        })
    }

    pub(crate) fn with_spectrum(
        basis: Arc<FockBasis>,
        blocks: Vec<DMatrix<Complex64>>,
        spectrum: Vec<BlockSpectrum>,
    ) -> Self {
        FockState {
            basis,
            blocks,
            spectrum: Some(spectrum),
        }
    }

    /// Keeps only the sector-diagonal part of a dense matrix on the full space.
    pub fn pinch_dense(basis: Arc<FockBasis>, matrix: &DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch(
                "dense matrix does not match the Fock basis".into(),
            ));
        }
        let blocks = (0..basis.sectors())
            .map(|n| {
                let r = basis.sector_range(n);
                matrix.view((r.start, r.start), (r.len(), r.len())).into_owned()
            })
            .collect();
        Self::from_blocks(basis, blocks)
    }

    pub fn vacuum(basis: Arc<FockBasis>) -> Self {
        let occ = vec![0u16; basis.modes()];
        Self::occupation(basis, &occ).expect("vacuum is always in the basis")
    }

    /// Pure occupation state `|n><n|`.
    pub fn occupation(basis: Arc<FockBasis>, occ: &[u16]) -> Result<Self> {
        let n: usize = occ.iter().map(|&x| x as usize).sum();
        let local = basis
            .local_position(occ)
            .ok_or_else(|| Error::InvalidArgument(format!("occupation {occ:?} is outside the basis")))?;
        let mut blocks: Vec<DMatrix<Complex64>> = (0..basis.sectors())
            .map(|s| DMatrix::zeros(basis.sector_dim(s), basis.sector_dim(s)))
            .collect();
        blocks[n][(local, local)] = Complex64::new(1.0, 0.0);
        Self::from_blocks(basis, blocks)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }

    pub fn block(&self, n: usize) -> &DMatrix<Complex64> {
        &self.blocks[n]
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    /// `tr G_n` for every sector.
    pub fn sector_weights(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace().re).collect()
    }

    /// Probability of the `count` highest sectors.
    pub fn top_sector_mass(&self, count: usize) -> f64 {
        let w = self.sector_weights();
        w.iter().rev().take(count).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b - b.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm())))
            .fold(0.0, f64::max)
    }

    /// Eigen-decomposition per sector; cached data is reused when present.
    pub fn spectrum(&self) -> Vec<BlockSpectrum> {
        match &self.spectrum {
            Some(s) => s.clone(),
            None => self.blocks.par_iter().map(BlockSpectrum::of_block).collect(),
        }
    }

    pub(crate) fn cached_spectrum(&self) -> Option<&[BlockSpectrum]> {
        self.spectrum.as_deref()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let eigenvalues: Vec<Vec<f64>> = match &self.spectrum {
            Some(s) => s.iter().map(|b| b.eigenvalues.clone()).collect(),
            None => self
                .blocks
                .par_iter()
                .map(|b| BlockSpectrum::eigenvalues_only(b).eigenvalues)
                .collect(),
        };
        eigenvalues.into_iter().flatten().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > PSD_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidArgument(format!("state has trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(Error::InvalidArgument(format!("state has negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `(1-t) self + t other`.
    pub fn mix(&self, other: &FockState, t: f64) -> Result<FockState> {
        same_basis(&self.basis, &other.basis)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a * Complex64::new(1.0 - t, 0.0) + b * Complex64::new(t, 0.0))
            .collect();
        Self::from_blocks(self.basis.clone(), blocks)
    }

    /// Rescales to unit trace.
    pub fn normalized(mut self) -> Result<FockState> {
        let tr = self.trace();
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cannot normalize a state of trace {tr}"
            )));
        }
        let s = Complex64::new(1.0 / tr, 0.0);
        for b in &mut self.blocks {
            *b *= s;
        }
        if let Some(spec) = &mut self.spectrum {
            for block in spec {
                for e in &mut block.eigenvalues {
                    *e /= tr;
                }
                if let Some(logs) = &mut block.log_eigenvalues {
                    for l in logs {
                        *l -= tr.ln();
                    }
                }
            }
        }
        Ok(self)
    }

    /// `tr[A Γ]` for a particle-conserving operator.
    pub fn expectation(&self, op: &FockOperator) -> Result<f64> {
        same_basis(&self.basis, op.basis())?;
        Ok(self
            .blocks
            .iter()
            .zip(op.blocks())
            .map(|(g, h)| {
                let mut acc = 0.0;
                for c in 0..g.ncols() {
                    for r in 0..g.nrows() {
                        acc += h[(r, c)] * g[(c, r)].re;
                    }
                }
                acc
            })
            .sum())
    }

    /// Dense matrix on the whole truncated Fock space; for small tests only.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let d = self.basis.dim();
        let mut m = DMatrix::zeros(d, d);
        for (n, b) in self.blocks.iter().enumerate() {
            let start = self.basis.sector_range(n).start;
            m.view_mut((start, start), (b.nrows(), b.ncols())).copy_from(b);
        }
        m
    }

    /// CSV of the nonzero entries: `row,col,real,imag` with occupation labels.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row", "col", "real", "imag"])?;
        for (n, b) in self.blocks.iter().enumerate() {
            let start = self.basis.sector_range(n).start;
            for r in 0..b.nrows() {
                for c in 0..b.ncols() {
                    let z = b[(r, c)];
                    if z.norm() == 0.0 {
                        continue;
                    }
                    w.write_record([
                        format_occupation(self.basis.state(start + r)),
                        format_occupation(self.basis.state(start + c)),
                        format!("{:.17e}", z.re),
                        format!("{:.17e}", z.im),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub(crate) fn same_basis(a: &FockBasis, b: &FockBasis) -> Result<()> {
    if a.modes() != b.modes() || a.n_max() != b.n_max() {
        return Err(Error::DimensionMismatch(format!(
            "Fock bases differ: (K={}, n_max={}) vs (K={}, n_max={})",
            a.modes(),
            a.n_max(),
            b.modes(),
            b.n_max()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GibbsState {
    pub state: FockState,
    pub log_z: f64,
    pub temperature: f64,
}

/// JSON record for the log-partition function and cutoff diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct GibbsSummary {
    pub temperature: f64,
    pub n_max: usize,
    pub dim: usize,
    pub log_z: f64,
    pub top_two_sector_mass: f64,
}

impl GibbsState {
    pub fn summary(&self) -> GibbsSummary {
        GibbsSummary {
            temperature: self.temperature,
            n_max: self.state.basis().n_max(),
            dim: self.state.basis().dim(),
            log_z: self.log_z,
            top_two_sector_mass: self.state.top_sector_mass(2),
        }
    }
}

/// `Γ = e^{-H/T} / Z` by per-sector eigen-decomposition with a global log-sum-exp shift.
pub fn gibbs_state(h: &FockOperator, temperature: f64) -> Result<GibbsState> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let scale = h.blocks().iter().map(|b| b.amax()).fold(1.0, f64::max);
    let defect = h.hermiticity_defect();
    if defect > 1e-12 * scale {
        return Err(Error::NotHermitian(defect));
    }

    let decomposed: Vec<(Vec<f64>, Option<DMatrix<f64>>)> = h
        .blocks()
        .par_iter()
        .map(|b| {
            let diagonal = (0..b.ncols()).all(|c| (0..b.nrows()).all(|r| r == c || b[(r, c)] == 0.0));
            if diagonal {
                (b.diagonal().iter().copied().collect(), None)
            } else {
                let sym = (b + b.transpose()) * 0.5;
                let eig = SymmetricEigen::new(sym);
                (eig.eigenvalues.iter().copied().collect(), Some(eig.eigenvectors))
            }
        })
        .collect();

    let e_min = decomposed
        .iter()
        .flat_map(|(e, _)| e.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let sum: f64 = decomposed
        .iter()
        .flat_map(|(e, _)| e.iter().map(|&x| (-(x - e_min) / temperature).exp()))
        .sum();
    let log_sum = sum.ln();
    let log_z = -e_min / temperature + log_sum;

    let parts: Vec<(DMatrix<Complex64>, BlockSpectrum)> = decomposed
        .into_par_iter()
        .map(|(energies, vectors)| {
            let logs: Vec<f64> = energies.iter().map(|&x| -(x - e_min) / temperature - log_sum).collect();
            let probs: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
            let d = probs.len();
            let block = match &vectors {
                None => DMatrix::from_fn(d, d, |r, c| Complex64::new(if r == c { probs[r] } else { 0.0 }, 0.0)),
                Some(v) => {
                    let mut scaled = v.clone();
                    for (j, p) in probs.iter().enumerate() {
                        scaled.column_mut(j).scale_mut(*p);
                    }
                    let g = &scaled * v.transpose();
                    let g = (&g + g.transpose()) * 0.5;
                    g.map(|x| Complex64::new(x, 0.0))
                }
            };
            let spectrum = BlockSpectrum {
                eigenvalues: probs,
                log_eigenvalues: Some(logs),
                vectors: vectors.map(|v| v.map(|x| Complex64::new(x, 0.0))),
            };
            (block, spectrum)
        })
        .collect();
    let (blocks, spectrum): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    Ok(GibbsState {
        state: FockState::with_spectrum(h.basis().clone(), blocks, spectrum),
        log_z,
        temperature,
    })
}

/// Sector distribution `P(n) ∝ Σ_{|N|=n} Π_j e^{-λ_j N_j/T}`, unnormalized, for `n ≤ n_max`.
pub fn free_sector_weights(eigenvalues: &[f64], temperature: f64, n_max: usize) -> Vec<f64> {
    let mut q = vec![0.0; n_max + 1];
    q[0] = 1.0;
    for &l in eigenvalues {
        let x = (-l / temperature).exp();
        for n in 1..=n_max {
            q[n] += x * q[n - 1];
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffChoice {
    pub n_max: usize,
    /// Mass of the top two sectors of the truncated free Gibbs state.
    pub tail_mass: f64,
}

/// Smallest `n_max ≥ min_n_max` for which the top two sectors of the truncated
/// free Gibbs state carry mass below `threshold`.
pub fn choose_n_max(
    eigenvalues: &[f64],
    temperature: f64,
    threshold: f64,
    min_n_max: usize,
    limit: usize,
) -> Result<CutoffChoice> {
    if eigenvalues.is_empty() || eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidArgument("eigenvalues must be positive".into()));
    }
    if !(temperature > 0.0) || !(threshold > 0.0) {
        return Err(Error::InvalidArgument(
            "temperature and threshold must be positive".into(),
        ));
    }
    let q = free_sector_weights(eigenvalues, temperature, limit);
    let mut total = 0.0;
    for n in 0..=limit {
        total += q[n];
        if n >= min_n_max.max(1) {
            let tail = (q[n] + q[n - 1]) / total;
            if tail < threshold {
                return Ok(CutoffChoice {
                    n_max: n,
                    tail_mass: tail,
                });
            }
        }
    }
    Err(Error::InvalidArgument(format!(
        "no cutoff up to {limit} meets the tail threshold {threshold:e} at T = {temperature}"
    )))
}

/// Random full-rank sector-diagonal state `Σ_n p_n A_n A_n† / tr`.
pub fn random_state(basis: Arc<FockBasis>, seed: u64) -> FockState {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut blocks = Vec::with_capacity(basis.sectors());
    for n in 0..basis.sectors() {
        let d = basis.sector_dim(n);
        let a = DMatrix::from_fn(d, d, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        });
        let g = &a * a.adjoint();
        let g = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
        let weight: f64 = rand::Rng::random_range(&mut rng, 0.1..1.0);
        blocks.push(g * Complex64::new(weight / d as f64, 0.0));
    }
    FockState::from_blocks(basis, blocks)
        .and_then(FockState::normalized)
        .expect("random blocks have positive trace")
}
