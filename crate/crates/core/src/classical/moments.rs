use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{WeightedEnsemble, CHUNK};
use crate::error::{Error, Result};
use crate::symmetric::{factorial, SymmetricBasis};

const DEFAULT_BUDGET: usize = 2000;

/// `γ^(k) = ∫ |u^{⊗k}><u^{⊗k}| dμ` on `Sym^k(C^K)` in the occupation basis,
/// with entrywise standard errors (modulus of the real/imaginary errors).
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    pub basis: SymmetricBasis,
    pub mean: DMatrix<Complex64>,
    pub stderr: DMatrix<f64>,
}

impl MomentMatrix {
    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn trace(&self) -> f64 {
        self.mean.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = &self.mean - self.mean.adjoint();
        d.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// CSV of `row,col,real,imag` with space-separated multi-indices.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_sym_matrix_csv(&self.basis, &self.mean, writer)
    }
}

pub(crate) fn format_occupation(occ: &[u16]) -> String {
    occ.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ")
}

pub(crate) fn write_sym_matrix_csv<W: Write>(
    basis: &SymmetricBasis,
    matrix: &DMatrix<Complex64>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "col", "real", "imag"])?;
    for r in 0..basis.dim() {
        for c in 0..basis.dim() {
            let z = matrix[(r, c)];
            w.write_record([
                format_occupation(basis.state(r)),
                format_occupation(basis.state(c)),
                format!("{:.17e}", z.re),
                format!("{:.17e}", z.im),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn moment_matrix(ensemble: &WeightedEnsemble, order: usize) -> Result<MomentMatrix> {
    moment_matrix_with_budget(ensemble, order, DEFAULT_BUDGET)
}

/// Self-normalized weighted average of `φ φ†` with `φ = <n|u^{⊗k}>`.
pub fn moment_matrix_with_budget(ensemble: &WeightedEnsemble, order: usize, budget: usize) -> Result<MomentMatrix> {
    if order == 0 {
        return Err(Error::InvalidArgument("moment order must be at least 1".into()));
    }
    let dim = SymmetricBasis::dimension(ensemble.modes(), order).unwrap_or(u64::MAX);
    if dim > budget as u64 {
        return Err(Error::DimensionOverflow {
            dim: dim.min(usize::MAX as u64) as usize,
            budget,
        });
    }
    let basis = SymmetricBasis::new(ensemble.modes(), order);
    let d = basis.dim();
    let weights = ensemble.weights();
    let zero = || DMatrix::<Complex64>::zeros(d, d);

    let indexed: Vec<usize> = (0..ensemble.len()).collect();
    let partial: Vec<(DMatrix<Complex64>, f64)> = indexed
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = zero();
            let mut sw = 0.0;
            for &s in chunk {
                let w = weights[s];
                let phi = basis.product_components(&ensemble.samples[s].coeffs);
                for r in 0..d {
                    let pr = phi[r] * w;
                    for c in 0..d {
                        acc[(r, c)] += pr * phi[c].conj();
                    }
                }
                sw += w;
            }
            (acc, sw)
        })
        .collect();
    let (sum, sw) = partial.into_iter().fold((zero(), 0.0), |(a, s), (b, t)| (a + b, s + t));
    let mean = sum / Complex64::new(sw, 0.0);

    let var_partial: Vec<(DMatrix<f64>, DMatrix<f64>)> = indexed
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut vr = DMatrix::<f64>::zeros(d, d);
            let mut vi = DMatrix::<f64>::zeros(d, d);
            for &s in chunk {
                let w = weights[s];
                let phi = basis.product_components(&ensemble.samples[s].coeffs);
                for r in 0..d {
                    for c in 0..d {
                        let dev = phi[r] * phi[c].conj() - mean[(r, c)];
                        vr[(r, c)] += (w * dev.re).powi(2);
                        vi[(r, c)] += (w * dev.im).powi(2);
                    }
                }
            }
            (vr, vi)
        })
        .collect();
    let (vr, vi) = var_partial.into_iter().fold(
        (DMatrix::<f64>::zeros(d, d), DMatrix::<f64>::zeros(d, d)),
        |(a, b), (c, e)| (a + c, b + e),
    );
    let stderr = DMatrix::from_fn(d, d, |r, c| (vr[(r, c)] + vi[(r, c)]).sqrt() / sw);
    Ok(MomentMatrix { basis, mean, stderr })
}

/// Exact Gaussian moments `k! (h⁻¹)^{⊗k}`: diagonal with entries `k! Π λ_j^{-n_j}`.
pub fn free_moment_matrix(eigenvalues: &[f64], order: usize) -> MomentMatrix {
    let basis = SymmetricBasis::new(eigenvalues.len(), order);
    let d = basis.dim();
    let kf = factorial(order as u32);
    let mut mean = DMatrix::<Complex64>::zeros(d, d);
    for (s, occ) in basis.states().iter().enumerate() {
        let value: f64 = occ.iter().zip(eigenvalues).map(|(&n, l)| l.powi(-(n as i32))).product();
        mean[(s, s)] = Complex64::new(kf * value, 0.0);
    }
    MomentMatrix {
        basis,
        mean,
        stderr: DMatrix::zeros(d, d),
    }
}
