use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::FockBasis;
use crate::error::{Error, Result};
use crate::spectral::TwoBodyTensor;

/// Real symmetric operator that conserves the particle number, stored as one
/// dense block per sector `n = 0..=n_max`.
#[derive(Debug, Clone)]
pub struct FockOperator {
    basis: Arc<FockBasis>,
    blocks: Vec<DMatrix<f64>>,
}

impl FockOperator {
    pub fn from_blocks(basis: Arc<FockBasis>, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
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
                return Err(Error::DimensionMismatch(format!(
                    "sector {n} block is {}x{}, expected {d}x{d}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(FockOperator { basis, blocks })
    }

    /// Diagonal operator with entries `f(occupation)`.
    pub fn diagonal(basis: Arc<FockBasis>, f: impl Fn(&[u16]) -> f64) -> Self {
        let blocks = (0..basis.sectors())
            .map(|n| {
                let range = basis.sector_range(n);
                let diag: Vec<f64> = range.map(|i| f(basis.state(i))).collect();
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
            })
            .collect();
        FockOperator { basis, blocks }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, n: usize) -> &DMatrix<f64> {
        &self.blocks[n]
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b - b.transpose()).amax())
            .fold(0.0, f64::max)
    }

    /// Largest off-diagonal magnitude; zero for operators diagonal in occupations.
    pub fn off_diagonal_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let mut worst: f64 = 0.0;
                for c in 0..b.ncols() {
                    for r in 0..b.nrows() {
                        if r != c {
                            worst = worst.max(b[(r, c)].abs());
                        }
                    }
                }
                worst
            })
            .fold(0.0, f64::max)
    }

    pub fn add_scaled(&self, other: &FockOperator, s: f64) -> Result<FockOperator> {
        if self.basis.dim() != other.basis.dim() || self.basis.modes() != other.basis.modes() {
            return Err(Error::DimensionMismatch(
                "operators live on different Fock bases".into(),
            ));
        }
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b * s).collect();
        Ok(FockOperator {
            basis: self.basis.clone(),
            blocks,
        })
    }

    /// Dense matrix on the whole truncated Fock space; for small tests only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.basis.dim();
        let mut m = DMatrix::zeros(d, d);
        for (n, b) in self.blocks.iter().enumerate() {
            let start = self.basis.sector_range(n).start;
            m.view_mut((start, start), (b.nrows(), b.ncols())).copy_from(b);
        }
        m
    }
}

pub fn number_operator(basis: Arc<FockBasis>) -> FockOperator {
    FockOperator::diagonal(basis, |occ| occ.iter().map(|&n| n as f64).sum())
}

/// `ℍ₀ = Σ_j λ_j a_j† a_j`.
pub fn free_hamiltonian(basis: Arc<FockBasis>, eigenvalues: &[f64]) -> Result<FockOperator> {
    if eigenvalues.len() != basis.modes() {
        return Err(Error::DimensionMismatch(format!(
            "{} eigenvalues for {} modes",
            eigenvalues.len(),
            basis.modes()
        )));
    }
    Ok(FockOperator::diagonal(basis, |occ| {
        occ.iter().zip(eigenvalues).map(|(&n, l)| n as f64 * l).sum()
    }))
}

/// `𝕎 = ½ Σ W[i,j,k,l] a_i† a_j† a_l a_k`, assembled sector by sector.
pub fn interaction_operator(basis: Arc<FockBasis>, tensor: &TwoBodyTensor) -> Result<FockOperator> {
    let modes = basis.modes();
    if tensor.modes() != modes {
        return Err(Error::DimensionMismatch(format!(
            "tensor has {} modes, Fock basis has {modes}",
            tensor.modes()
        )));
    }
    let blocks: Vec<DMatrix<f64>> = (0..basis.sectors())
        .into_par_iter()
        .map(|n| {
            let d = basis.sector_dim(n);
            let mut block = DMatrix::zeros(d, d);
            if n < 2 || tensor.is_zero() {
                return block;
            }
            let start = basis.sector_range(n).start;
            for col in 0..d {
                let occ = basis.state(start + col);
                for k in 0..modes {
                    for l in 0..modes {
                        // a_l a_k |N>
                        let nk = occ[k] as f64;
                        if nk == 0.0 {
                            continue;
                        }
                        let nl = occ[l] as f64 - if k == l { 1.0 } else { 0.0 };
                        if nl <= 0.0 {
                            continue;
                        }
                        let down = (nk * nl).sqrt();
                        let mut mid = occ.clone();
                        mid[k] -= 1;
                        mid[l] -= 1;
                        for i in 0..modes {
                            for j in 0..modes {
                                let w = tensor.get(i, j, k, l);
                                if w == 0.0 {
                                    continue;
                                }
                                // a_i† a_j† |M>
                                let mj = mid[j] as f64 + 1.0;
                                let mi = mid[i] as f64 + 1.0 + if i == j { 1.0 } else { 0.0 };
                                let mut up = mid.clone();
                                up[i] += 1;
                                up[j] += 1;
                                let row = basis.local_position(&up).expect("sector is closed under W");
                                block[(row, col)] += 0.5 * w * down * (mi * mj).sqrt();
                            }
                        }
                    }
                }
            }
            block
        })
        .collect();
    FockOperator::from_blocks(basis, blocks)
}

/// `ℍ_λ = ℍ₀ + λ 𝕎`.
pub fn build_hamiltonian(
    basis: Arc<FockBasis>,
    eigenvalues: &[f64],
    tensor: &TwoBodyTensor,
    coupling: f64,
) -> Result<FockOperator> {
    if !(coupling >= 0.0 && coupling.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "coupling must be finite and ≥ 0, got {coupling}"
        )));
    }
    let h0 = free_hamiltonian(basis.clone(), eigenvalues)?;
    if tensor.modes() != basis.modes() {
        return Err(Error::DimensionMismatch(format!(
            "tensor has {} modes, Fock basis has {}",
            tensor.modes(),
            basis.modes()
        )));
    }
    if coupling == 0.0 || tensor.is_zero() {
        return Ok(h0);
    }
    let w = interaction_operator(basis, tensor)?;
    h0.add_scaled(&w, coupling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ladder;

    fn basis(k: usize, n: usize) -> Arc<FockBasis> {
        Arc::new(FockBasis::new(k, n).unwrap())
    }

    #[test]
    fn single_mode_sector_energies() {
        let b = basis(1, 6);
        let w = TwoBodyTensor::from_fn(1, |_, _, _, _| 0.7);
        let h = build_hamiltonian(b, &[1.3], &w, 0.4).unwrap();
        for n in 0..=6usize {
            let expected = 1.3 * n as f64 + 0.4 * 0.7 * (n * n.saturating_sub(1)) as f64 / 2.0;
            assert!((h.block(n)[(0, 0)] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn free_hamiltonian_is_diagonal() {
        let b = basis(3, 4);
        let w = TwoBodyTensor::from_fn(3, |i, j, k, l| (i + j + k + l) as f64);
        let h = build_hamiltonian(b.clone(), &[1.0, 2.0, 5.0], &w, 0.0).unwrap();
        assert_eq!(h.off_diagonal_norm(), 0.0);
        for n in 0..=4 {
            for (local, i) in b.sector_range(n).enumerate() {
                let occ = b.state(i);
                let e = occ[0] as f64 + 2.0 * occ[1] as f64 + 5.0 * occ[2] as f64;
                assert_eq!(h.block(n)[(local, local)], e);
            }
        }
    }

    fn symmetric_tensor(k: usize) -> TwoBodyTensor {
        let raw = |i: usize, j: usize, a: usize, b: usize| ((i * 7 + j * 3 + a * 5 + b * 11) % 13) as f64 / 13.0;
        TwoBodyTensor::from_fn(k, |i, j, a, b| {
            (raw(i, j, a, b) + raw(j, i, b, a) + raw(a, b, i, j) + raw(b, a, j, i)) / 4.0
        })
    }

    #[test]
    fn interaction_matches_ladder_products() {
        let b = basis(2, 4);
        let t = symmetric_tensor(2);
        let w = interaction_operator(b.clone(), &t).unwrap().to_dense();
        let ladders: Vec<_> = (0..2).map(|j| ladder(&b, j).unwrap()).collect();
        let mut brute = DMatrix::zeros(b.dim(), b.dim());
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let op = ladders[i]
                            .1
                            .matmul(&ladders[j].1)
                            .matmul(&ladders[l].0)
                            .matmul(&ladders[k].0);
                        brute += op.to_dense() * (0.5 * t.get(i, j, k, l));
                    }
                }
            }
        }
        assert!((w - brute).amax() < 1e-12);
    }

    #[test]
    fn interaction_vanishes_below_two_particles() {
        let b = basis(3, 3);
        let w = interaction_operator(b, &symmetric_tensor(3)).unwrap();
        assert_eq!(w.block(0).amax(), 0.0);
        assert_eq!(w.block(1).amax(), 0.0);
        assert!(w.block(2).amax() > 0.0);
        assert!(w.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let b = basis(2, 3);
        assert!(build_hamiltonian(b.clone(), &[1.0], &TwoBodyTensor::zeros(2), 1.0).is_err());
        assert!(build_hamiltonian(b.clone(), &[1.0, 2.0], &TwoBodyTensor::zeros(3), 1.0).is_err());
        assert!(build_hamiltonian(b, &[1.0, 2.0], &TwoBodyTensor::zeros(2), -1.0).is_err());
    }
}
