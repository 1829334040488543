use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{build_hamiltonian, ladder, FockState, SparseMatrix};
use crate::classical::write_sym_matrix_csv;
use crate::error::{Error, Result};
use crate::spectral::TwoBodyTensor;
use crate::symmetric::{binomial, factorial, occupations, SymmetricBasis};

const SYM_BUDGET: usize = 2000;

/// `Γ^(k)` on `Sym^k(C^K)` in the occupation basis, normalized so that
/// `tr Γ^(1) = <𝒩>`.
#[derive(Debug, Clone)]
pub struct ReducedDensityMatrix {
    pub basis: SymmetricBasis,
    pub matrix: DMatrix<Complex64>,
}

impl ReducedDensityMatrix {
    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.min()
    }

    pub fn max_entry_difference(&self, other: &ReducedDensityMatrix) -> f64 {
        (&self.matrix - &other.matrix).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn scaled(&self, s: f64) -> ReducedDensityMatrix {
        ReducedDensityMatrix {
            basis: self.basis.clone(),
            matrix: &self.matrix * Complex64::new(s, 0.0),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_sym_matrix_csv(&self.basis, &self.matrix, writer)
    }
}

fn check_order(state: &FockState, order: usize) -> Result<SymmetricBasis> {
    let basis = state.basis();
    if order > basis.n_max() {
        return Err(Error::InvalidArgument(format!(
            "order {order} exceeds the particle cutoff {}",
            basis.n_max()
        )));
    }
    let dim = SymmetricBasis::dimension(basis.modes(), order).unwrap_or(u64::MAX);
    if dim > SYM_BUDGET as u64 {
        return Err(Error::DimensionOverflow {
            dim: dim.min(usize::MAX as u64) as usize,
            budget: SYM_BUDGET,
        });
    }
    Ok(SymmetricBasis::new(basis.modes(), order))
}

/// Symmetric partial trace: `Γ^(k)_{m,m'} = Σ_r G[m+r, m'+r] Π_j sqrt(C(m_j+r_j, m_j) C(m'_j+r_j, m'_j))`.
pub fn reduced_density_matrix(state: &FockState, order: usize) -> Result<ReducedDensityMatrix> {
    let sym = check_order(state, order)?;
    let basis = state.basis();
    let d = sym.dim();
    let partial: Vec<DMatrix<Complex64>> = (order..=basis.n_max())
        .into_par_iter()
        .map(|n| {
            let g = state.block(n);
            let mut acc = DMatrix::<Complex64>::zeros(d, d);
            let mut idx = vec![0usize; d];
            let mut coef = vec![0.0f64; d];
            for rest in occupations(basis.modes(), n - order) {
                for (s, m) in sym.states().iter().enumerate() {
                    let big: Vec<u16> = m.iter().zip(&rest).map(|(a, b)| a + b).collect();
                    idx[s] = basis.local_position(&big).expect("m + r lies in sector n");
                    coef[s] = m
                        .iter()
                        .zip(&big)
                        .map(|(&mj, &nj)| binomial(nj as u64, mj as u64))
                        .product::<f64>()
                        .sqrt();
                }
                for b in 0..d {
                    for a in 0..d {
                        acc[(a, b)] += g[(idx[a], idx[b])] * (coef[a] * coef[b]);
                    }
                }
            }
            acc
        })
        .collect();
    let matrix = partial.into_iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m);
    Ok(ReducedDensityMatrix { basis: sym, matrix })
}

/// `Γ^(k)_{m,m'} = tr[A_{m'}† A_m Γ]` with `A_m = Π_j a_j^{m_j} / sqrt(m_j!)`,
/// evaluated with explicit ladder-operator products.
pub fn reduced_dm_normal_ordered(state: &FockState, order: usize) -> Result<ReducedDensityMatrix> {
    let sym = check_order(state, order)?;
    let basis = state.basis();
    let annihilators: Vec<SparseMatrix> = (0..basis.modes())
        .map(|j| ladder(basis, j).map(|(a, _)| a))
        .collect::<Result<_>>()?;
    let products: Vec<SparseMatrix> = sym
        .states()
        .iter()
        .map(|m| {
            let mut op = SparseMatrix::identity(basis.dim());
            let mut norm = 1.0;
            for (j, &mj) in m.iter().enumerate() {
                for _ in 0..mj {
                    op = annihilators[j].matmul(&op);
                }
                norm *= factorial(mj as u32);
            }
            op.scale(1.0 / norm.sqrt())
        })
        .collect();
    let sector: Vec<usize> = basis
        .states()
        .iter()
        .map(|occ| occ.iter().map(|&x| x as usize).sum())
        .collect();
    let entry = |r: usize, c: usize| -> Complex64 {
        if sector[r] != sector[c] {
            return Complex64::new(0.0, 0.0);
        }
        let start = basis.sector_range(sector[r]).start;
        state.block(sector[r])[(r - start, c - start)]
    };
    let d = sym.dim();
    let mut matrix = DMatrix::<Complex64>::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let op = products[b].transpose().matmul(&products[a]);
            let mut acc = Complex64::new(0.0, 0.0);
            for (r, c, v) in op.entries() {
                acc += entry(c, r) * v;
            }
            matrix[(a, b)] = acc;
        }
    }
    Ok(ReducedDensityMatrix { basis: sym, matrix })
}

/// Sum of singular values of a Hermitian matrix.
pub fn trace_norm(m: &DMatrix<Complex64>) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(herm).eigenvalues.iter().map(|e| e.abs()).sum()
}

pub fn hilbert_schmidt_norm(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `tr[𝒩 Γ]`.
pub fn particle_number(state: &FockState) -> f64 {
    state
        .sector_weights()
        .iter()
        .enumerate()
        .map(|(n, w)| n as f64 * w)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyDecomposition {
    /// `tr[ℍ_λ Γ]` evaluated on the Fock space.
    pub total: f64,
    /// `tr[h Γ^(1)]`.
    pub one_body: f64,
    /// `λ tr[w Γ^(2)]`.
    pub two_body: f64,
}

impl EnergyDecomposition {
    pub fn relative_defect(&self) -> f64 {
        (self.total - self.one_body - self.two_body).abs() / self.total.abs().max(1e-300)
    }
}

/// `λ tr[w Γ^(2)]` on `Sym²`, zero when the cutoff admits fewer than two particles.
pub fn interaction_energy(state: &FockState, tensor: &TwoBodyTensor, coupling: f64) -> Result<f64> {
    if tensor.modes() != state.basis().modes() {
        return Err(Error::DimensionMismatch(
            "tensor and Fock basis disagree on the mode count".into(),
        ));
    }
    if coupling == 0.0 || tensor.is_zero() || state.basis().n_max() < 2 {
        return Ok(0.0);
    }
    let g2 = reduced_density_matrix(state, 2)?;
    let w = tensor.sym2_matrix();
    let mut acc = 0.0;
    for r in 0..w.nrows() {
        for c in 0..w.ncols() {
            acc += w[(r, c)] * g2.matrix[(c, r)].re;
        }
    }
    Ok(coupling * acc)
}

pub fn energy_decomposition(
    state: &FockState,
    eigenvalues: &[f64],
    tensor: &TwoBodyTensor,
    coupling: f64,
) -> Result<EnergyDecomposition> {
    let h = build_hamiltonian(state.basis().clone(), eigenvalues, tensor, coupling)?;
    let total = state.expectation(&h)?;
    let one_body = if state.basis().n_max() == 0 {
        0.0
    } else {
        let g1 = reduced_density_matrix(state, 1)?;
        eigenvalues
            .iter()
            .enumerate()
            .map(|(j, l)| l * g1.matrix[(j, j)].re)
            .sum()
    };
    let two_body = interaction_energy(state, tensor, coupling)?;
    Ok(EnergyDecomposition {
        total,
        one_body,
        two_body,
    })
}
