use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Grid, SpectralBasis};
use crate::error::{Error, Result};
use crate::symmetric::SymmetricBasis;

/// Nonnegative pair potential `w(x - y)`.
///
/// Grid-valued kernels are tabulated on the difference grid: entry `o + n - 1`
/// holds `w(o Δx)` for offsets `o = -(n-1) ..= n-1`. Only the even part of `w`
/// enters any bosonic quantity, so kernels are symmetrized on use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InteractionKernel {
    Delta {
        g: f64,
    },
    BoundedGrid {
        values: Vec<f64>,
    },
    Mixed {
        /// `(location, mass)` pairs, each a point mass `mass·δ(· - location)`.
        point_masses: Vec<(f64, f64)>,
        bounded_part: Vec<f64>,
    },
}

impl InteractionKernel {
    pub fn zero() -> Self {
        InteractionKernel::Delta { g: 0.0 }
    }

    /// Tabulates a function of the separation on the difference grid of `grid`.
    pub fn tabulate(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let n = grid.len() as isize;
        let values = (-(n - 1)..n).map(|o| f(o as f64 * grid.spacing)).collect();
        InteractionKernel::BoundedGrid { values }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |v: f64, what: &str| -> Result<()> {
            if !(v >= 0.0) || !v.is_finite() {
                Err(Error::NegativeKernel(format!("{what} = {v}")))
            } else {
                Ok(())
            }
        };
        match self {
            InteractionKernel::Delta { g } => check(*g, "g"),
            InteractionKernel::BoundedGrid { values } => values.iter().try_for_each(|&v| check(v, "kernel value")),
            InteractionKernel::Mixed {
                point_masses,
                bounded_part,
            } => {
                point_masses.iter().try_for_each(|&(_, m)| check(m, "point mass"))?;
                bounded_part.iter().try_for_each(|&v| check(v, "kernel value"))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            InteractionKernel::Delta { g } => *g == 0.0,
            InteractionKernel::BoundedGrid { values } => values.iter().all(|&v| v == 0.0),
            InteractionKernel::Mixed {
                point_masses,
                bounded_part,
            } => point_masses.iter().all(|&(_, m)| m == 0.0) && bounded_part.iter().all(|&v| v == 0.0),
        }
    }

    /// Symmetrized offset table `w_eff(o)` such that
    /// `∬ f(x) w(x-y) g(y) ≈ Σ_a Σ_b f_a w_eff(a-b) g_b Δx²`.
    pub(crate) fn offset_table(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.validate()?;
        let n = grid.len();
        let len = 2 * n - 1;
        let centre = n - 1;
        let mut table = vec![0.0; len];
        let mut add_grid = |values: &[f64]| -> Result<()> {
            if values.is_empty() {
                return Ok(());
            }
            if values.len() != len {
                return Err(Error::DimensionMismatch(format!(
                    "kernel has {} values, the difference grid has {len}",
                    values.len()
                )));
            }
            table.iter_mut().zip(values).for_each(|(t, v)| *t += v);
            Ok(())
        };
        match self {
            InteractionKernel::Delta { g } => table[centre] += g / grid.spacing,
            InteractionKernel::BoundedGrid { values } => add_grid(values)?,
            InteractionKernel::Mixed {
                point_masses,
                bounded_part,
            } => {
                add_grid(bounded_part)?;
                for &(location, mass) in point_masses {
                    let o = (location / grid.spacing).round() as isize;
                    if o.unsigned_abs() > centre {
                        continue;
                    }
                    table[(o + centre as isize) as usize] += mass / grid.spacing;
                }
            }
        }
        let sym: Vec<f64> = (0..len).map(|i| 0.5 * (table[i] + table[len - 1 - i])).collect();
        Ok(sym)
    }

    /// `w_eff` at the (possibly wrapped) offset between grid points `a` and `b`.
    pub(crate) fn lookup(table: &[f64], grid: &Grid, a: usize, b: usize) -> f64 {
        let centre = grid.len() as isize - 1;
        table[(grid.offset(a, b) + centre) as usize]
    }
}

/// `W[i,j,k,l] = <u_i ⊗ u_j | w | u_k ⊗ u_l>` for real eigenfunctions.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBodyTensor {
    modes: usize,
    data: Vec<f64>,
}

impl TwoBodyTensor {
    pub fn zeros(modes: usize) -> Self {
        TwoBodyTensor {
            modes,
            data: vec![0.0; modes.pow(4)],
        }
    }

    /// Builds a tensor from a closure, for synthetic test models.
    pub fn from_fn(modes: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(modes);
        for i in 0..modes {
            for j in 0..modes {
                for k in 0..modes {
                    for l in 0..modes {
                        let idx = t.index(i, j, k, l);
                        t.data[idx] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.modes + j) * self.modes + k) * self.modes + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.index(i, j, k, l)]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Largest violation of `W[ijkl] = W[klij]` and `W[ijkl] = W[jilk]`.
    pub fn symmetry_defect(&self) -> f64 {
        let k = self.modes;
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    for d in 0..k {
                        let v = self.get(a, b, c, d);
                        worst = worst
                            .max((v - self.get(c, d, a, b)).abs())
                            .max((v - self.get(b, a, d, c)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Matrix of `w` on `Sym²(C^K)` in the normalized occupation basis.
    pub fn sym2_matrix(&self) -> DMatrix<f64> {
        let basis = SymmetricBasis::new(self.modes, 2);
        let expansions: Vec<Vec<(Vec<usize>, f64)>> = (0..basis.dim()).map(|s| basis.tensor_expansion(s)).collect();
        let d = basis.dim();
        DMatrix::from_fn(d, d, |r, c| {
            let mut acc = 0.0;
            for (left, cl) in &expansions[r] {
                for (right, cr) in &expansions[c] {
                    acc += cl * cr * self.get(left[0], left[1], right[0], right[1]);
                }
            }
            acc
        })
    }
}

pub fn interaction_elements(basis: &SpectralBasis, kernel: &InteractionKernel) -> Result<TwoBodyTensor> {
    kernel.validate()?;
    let k = basis.modes();
    let n = basis.grid.len();
    let dx = basis.grid.spacing;
    let u = &basis.eigenvectors;
    let mut tensor = TwoBodyTensor::zeros(k);

    // pair densities ρ_ik(x) = u_i(x) u_k(x)
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let densities: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(i, j)| (0..n).map(|x| u[i][x] * u[j][x]).collect())
        .collect();
    let pair_index = |i: usize, j: usize| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        pairs.iter().position(|&p| p == (a, b)).unwrap()
    };

    // (w * ρ)(x) = Σ_y w_eff(x - y) ρ(y) Δx ; a pure delta needs no convolution
    let convolved: Vec<Vec<f64>> = match kernel {
        InteractionKernel::Delta { g } => densities
            .iter()
            .map(|rho| rho.iter().map(|r| g * r).collect())
            .collect(),
        _ => {
            let table = kernel.offset_table(&basis.grid)?;
            densities
                .par_iter()
                .map(|rho| {
                    (0..n)
                        .map(|a| {
                            (0..n)
                                .map(|b| InteractionKernel::lookup(&table, &basis.grid, a, b) * rho[b])
                                .sum::<f64>()
                                * dx
                        })
                        .collect()
                })
                .collect()
        }
    };

    for i in 0..k {
        for j in 0..k {
            for kk in 0..k {
                for l in 0..k {
                    let left = &densities[pair_index(i, kk)];
                    let right = &convolved[pair_index(j, l)];
                    let v: f64 = left.iter().zip(right).map(|(a, b)| a * b).sum::<f64>() * dx;
                    let idx = tensor.index(i, j, kk, l);
                    tensor.data[idx] = v;
                }
            }
        }
    }
    // exact bosonic symmetry against summation-order rounding
    let raw = tensor.clone();
    for i in 0..k {
        for j in 0..k {
            for kk in 0..k {
                for l in 0..k {
                    let v = 0.25
                        * (raw.get(i, j, kk, l) + raw.get(j, i, l, kk) + raw.get(kk, l, i, j) + raw.get(l, kk, j, i));
                    let idx = tensor.index(i, j, kk, l);
                    tensor.data[idx] = v;
                }
            }
        }
    }
    Ok(tensor)
}
