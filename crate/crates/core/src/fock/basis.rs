use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::symmetric::{binomial_checked, occupations, Occupation};

pub const DEFAULT_FOCK_BUDGET: usize = 20_000;

/// Occupation states `(n_1, ..., n_K)` with `Σ n_j ≤ n_max`, sector by sector,
/// colexicographic inside each sector.
#[derive(Debug, Clone, PartialEq)]
pub struct FockBasis {
    modes: usize,
    n_max: usize,
    states: Vec<Occupation>,
    sector_offsets: Vec<usize>,
    index: HashMap<Occupation, usize>,
}

impl FockBasis {
    pub fn dimension(modes: usize, n_max: usize) -> Option<u64> {
        binomial_checked((modes + n_max) as u64, modes as u64)
    }

    pub fn new(modes: usize, n_max: usize) -> Result<Self> {
        Self::with_budget(modes, n_max, DEFAULT_FOCK_BUDGET)
    }

    pub fn with_budget(modes: usize, n_max: usize, budget: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument("Fock space needs at least one mode".into()));
        }
        if n_max > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("n_max = {n_max} is too large")));
        }
        let dim = Self::dimension(modes, n_max).unwrap_or(u64::MAX);
        if dim > budget as u64 {
            return Err(Error::DimensionOverflow {
                dim: dim.min(usize::MAX as u64) as usize,
                budget,
            });
        }
        let mut states = Vec::with_capacity(dim as usize);
        let mut sector_offsets = Vec::with_capacity(n_max + 2);
        for n in 0..=n_max {
            sector_offsets.push(states.len());
            states.extend(occupations(modes, n));
        }
        sector_offsets.push(states.len());
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(FockBasis {
            modes,
            n_max,
            states,
            sector_offsets,
            index,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &Occupation {
        &self.states[i]
    }

    pub fn position(&self, occ: &[u16]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn sectors(&self) -> usize {
        self.n_max + 1
    }

    pub fn sector_range(&self, n: usize) -> std::ops::Range<usize> {
        self.sector_offsets[n]..self.sector_offsets[n + 1]
    }

    pub fn sector_dim(&self, n: usize) -> usize {
        self.sector_offsets[n + 1] - self.sector_offsets[n]
    }

    /// Index of `occ` inside its particle-number sector.
    pub fn local_position(&self, occ: &[u16]) -> Option<usize> {
        let n: usize = occ.iter().map(|&x| x as usize).sum();
        if n > self.n_max {
            return None;
        }
        self.position(occ).map(|g| g - self.sector_offsets[n])
    }
}

/// Row-oriented sparse real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        SparseMatrix {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        SparseMatrix {
            dim,
            rows: (0..dim).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.rows[row].push((col, value));
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
    }

    pub fn transpose(&self) -> Self {
        let mut t = SparseMatrix::zeros(self.dim);
        for (r, c, v) in self.entries() {
            t.push(c, r, v);
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        SparseMatrix {
            dim: self.dim,
            rows: self
                .rows
                .iter()
                .map(|row| row.iter().map(|&(c, v)| (c, v * s)).collect())
                .collect(),
        }
    }

    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        let mut out = SparseMatrix::zeros(self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc: HashMap<usize, f64> = HashMap::new();
            for &(k, v) in row {
                for &(c, w) in &other.rows[k] {
                    *acc.entry(c).or_insert(0.0) += v * w;
                }
            }
            let mut entries: Vec<(usize, f64)> = acc.into_iter().filter(|&(_, v)| v != 0.0).collect();
            entries.sort_by_key(|&(c, _)| c);
            out.rows[r] = entries;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        m
    }
}

/// Annihilation and creation operators `(a_j, a_j†)` of mode `j` (0-based);
/// creation beyond `n_max` is truncated to zero.
pub fn ladder(basis: &FockBasis, mode: usize) -> Result<(SparseMatrix, SparseMatrix)> {
    if mode >= basis.modes() {
        return Err(Error::InvalidArgument(format!(
            "mode {mode} out of range for {} modes",
            basis.modes()
        )));
    }
    let mut a = SparseMatrix::zeros(basis.dim());
    for (col, occ) in basis.states().iter().enumerate() {
        let n = occ[mode];
        if n > 0 {
            let mut lowered = occ.clone();
            lowered[mode] -= 1;
            let row = basis.position(&lowered).expect("lowered state is in the basis");
            a.push(row, col, (n as f64).sqrt());
        }
    }
    let adag = a.transpose();
    Ok((a, adag))
}
