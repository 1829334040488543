//! Finite-difference discretization of the one-body operator `h`, its lowest
//! eigenpairs, Schatten traces `tr h^{-p}` and two-body matrix elements.

mod interaction;
mod tridiag;

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use interaction::{interaction_elements, InteractionKernel, TwoBodyTensor};

pub const MIN_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    /// `-d²/dx² + |x|^a + m` on `[-L, L]` with Dirichlet walls.
    AnharmonicLine { exponent: f64, half_width: f64 },
    /// `-d²/dx² + m` on `[-1, 1]`.
    Interval { bc: BoundaryCondition },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneBodySpec {
    pub domain: Domain,
    pub m: f64,
    pub grid_points: usize,
}

impl OneBodySpec {
    pub fn interval(bc: BoundaryCondition, m: f64, grid_points: usize) -> Self {
        OneBodySpec {
            domain: Domain::Interval { bc },
            m,
            grid_points,
        }
    }

    pub fn anharmonic(exponent: f64, half_width: f64, m: f64, grid_points: usize) -> Self {
        OneBodySpec {
            domain: Domain::AnharmonicLine { exponent, half_width },
            m,
            grid_points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points < MIN_GRID_POINTS {
            return Err(Error::InvalidSpec(format!(
                "grid_points = {} is below the minimum of {MIN_GRID_POINTS}",
                self.grid_points
            )));
        }
        if !self.m.is_finite() {
            return Err(Error::InvalidSpec("m must be finite".into()));
        }
        match self.domain {
            Domain::AnharmonicLine { exponent, half_width } => {
                if !(exponent > 2.0) || !exponent.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "anharmonic exponent must exceed 2, got {exponent}"
                    )));
                }
                if !(half_width > 0.0) || !half_width.is_finite() {
                    return Err(Error::InvalidSpec(format!(
                        "box half-width must be positive, got {half_width}"
                    )));
                }
            }
            Domain::Interval { .. } => {
                if !(self.m > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "interval operators need m > 0 to be positive definite, got {}",
                        self.m
                    )));
                }
            }
        }
        Ok(())
    }

    /// Potential `V(x)` including the constant `m`.
    pub fn potential(&self, x: f64) -> f64 {
        match self.domain {
            Domain::AnharmonicLine { exponent, .. } => x.abs().powf(exponent) + self.m,
            Domain::Interval { .. } => self.m,
        }
    }
}

/// Uniform grid with equal quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub spacing: f64,
    pub periodic: bool,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight(&self) -> f64 {
        self.spacing
    }

    /// Signed index offset of `x_a - x_b`, wrapped to the nearest image on periodic grids.
    pub fn offset(&self, a: usize, b: usize) -> isize {
        let n = self.len() as isize;
        let mut d = a as isize - b as isize;
        if self.periodic {
            d = d.rem_euclid(n);
            if d > n / 2 {
                d -= n;
            }
        }
        d
    }
}

/// Symmetric tridiagonal matrix, plus a corner coupling for periodic grids.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub spec: OneBodySpec,
    pub grid: Grid,
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub corner: Option<f64>,
}

impl DiscreteOperator {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out: Vec<f64> = self.diag.iter().zip(v).map(|(d, x)| d * x).collect();
        for i in 0..n - 1 {
            out[i] += self.off[i] * v[i + 1];
            out[i + 1] += self.off[i] * v[i];
        }
        if let Some(c) = self.corner {
            out[0] += c * v[n - 1];
            out[n - 1] += c * v[0];
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for i in 0..n - 1 {
            m[(i, i + 1)] = self.off[i];
            m[(i + 1, i)] = self.off[i];
        }
        if let Some(c) = self.corner {
            m[(0, n - 1)] += c;
            m[(n - 1, 0)] += c;
        }
        m
    }
}

pub fn build_operator(spec: &OneBodySpec) -> Result<DiscreteOperator> {
    spec.validate()?;
    let n = spec.grid_points;
    let (nodes, spacing, periodic) = match spec.domain {
        Domain::AnharmonicLine { half_width, .. } => {
            let dx = 2.0 * half_width / (n as f64 + 1.0);
            let nodes = (0..n).map(|i| -half_width + (i as f64 + 1.0) * dx).collect();
            (nodes, dx, false)
        }
        Domain::Interval { bc } => match bc {
            BoundaryCondition::Dirichlet => {
                let dx = 2.0 / (n as f64 + 1.0);
                let nodes = (0..n).map(|i| -1.0 + (i as f64 + 1.0) * dx).collect();
                (nodes, dx, false)
            }
            // cell-centred nodes keep the reflecting stencil symmetric
            BoundaryCondition::Neumann => {
                let dx = 2.0 / n as f64;
                let nodes = (0..n).map(|i| -1.0 + (i as f64 + 0.5) * dx).collect();
                (nodes, dx, false)
            }
            BoundaryCondition::Periodic => {
                let dx = 2.0 / n as f64;
                let nodes = (0..n).map(|i| -1.0 + i as f64 * dx).collect();
                (nodes, dx, true)
            }
        },
    };
    let grid = Grid {
        nodes,
        spacing,
        periodic,
    };
    let inv_dx2 = 1.0 / (spacing * spacing);
    let mut diag: Vec<f64> = grid.nodes.iter().map(|&x| 2.0 * inv_dx2 + spec.potential(x)).collect();
    if let Domain::Interval {
        bc: BoundaryCondition::Neumann,
    } = spec.domain
    {
        diag[0] -= inv_dx2;
        diag[n - 1] -= inv_dx2;
    }
    let off = vec![-inv_dx2; n - 1];
    let corner = if periodic { Some(-inv_dx2) } else { None };
    Ok(DiscreteOperator {
        spec: spec.clone(),
        grid,
        diag,
        off,
        corner,
    })
}

/// Lowest `K` eigenpairs of `h` on a grid, eigenfunctions orthonormal in the
/// discrete `L²` inner product `Σ u v Δx`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub spec: OneBodySpec,
    pub grid: Grid,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    operator: DiscreteOperator,
}

impl SpectralBasis {
    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.operator
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.grid.weight()
    }

    /// `max |<u_i,u_j> - δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.modes();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                let dot = self.inner(&self.eigenvectors[i], &self.eigenvectors[j]);
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Discrete `L²` norm of `h u_j - λ_j u_j`.
    pub fn residual(&self, j: usize) -> f64 {
        let u = &self.eigenvectors[j];
        let hu = self.operator.apply(u);
        let r: Vec<f64> = hu.iter().zip(u).map(|(a, b)| a - self.eigenvalues[j] * b).collect();
        self.inner(&r, &r).sqrt()
    }

    /// Writes `j,lambda_j,u_j(x_1),...` rows (1-based `j`).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["j".to_string(), "lambda_j".to_string()];
        header.extend(self.grid.nodes.iter().map(|x| format!("{x:.12e}")));
        w.write_record(&header)?;
        for (j, (lambda, u)) in self.eigenvalues.iter().zip(&self.eigenvectors).enumerate() {
            let mut row = vec![(j + 1).to_string(), format!("{lambda:.17e}")];
            row.extend(u.iter().map(|v| format!("{v:.17e}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * max) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Replaces an orthonormal basis of a degenerate eigenspace by the Gram-Schmidt
/// sequence of its projections of `e_0, e_1, ...`, which depends only on the subspace.
fn canonicalize_block(block: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = block[0].len();
    let d = block.len();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(d);
    for i in 0..n {
        if out.len() == d {
            break;
        }
        let mut c = vec![0.0; n];
        for b in block {
            let coef = b[i];
            c.iter_mut().zip(b).for_each(|(x, y)| *x += coef * y);
        }
        for _ in 0..2 {
            for prev in &out {
                let dot: f64 = prev.iter().zip(&c).map(|(a, b)| a * b).sum();
                c.iter_mut().zip(prev).for_each(|(x, p)| *x -= dot * p);
            }
        }
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            c.iter_mut().for_each(|x| *x /= norm);
            out.push(c);
        }
    }
    out
}

fn dense_lowest(op: &DiscreteOperator, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let eig = SymmetricEigen::try_new(op.to_dense(), 1e-14, 0)
        .ok_or_else(|| Error::NoConvergence("dense symmetric eigensolver did not converge".into()))?;
    let n = op.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-9 * scale;

    let mut out_vals = Vec::with_capacity(count);
    let mut out_vecs = Vec::with_capacity(count);
    let mut start = 0;
    while start < count {
        let mut end = start + 1;
        while end < n && (values[end] - values[start]).abs() <= tol {
            end += 1;
        }
        let block = if end - start > 1 {
            canonicalize_block(&vectors[start..end])
        } else {
            vectors[start..end].to_vec()
        };
        for (offset, v) in block.into_iter().enumerate() {
            if out_vals.len() < count {
                out_vals.push(values[start + offset]);
                out_vecs.push(v);
            }
        }
        start = end;
    }
    Ok((out_vals, out_vecs))
}

pub fn eigendecompose(op: &DiscreteOperator, modes: usize) -> Result<SpectralBasis> {
    let n = op.dim();
    let max = n / 4;
    if modes == 0 || modes > max {
        return Err(Error::TooManyModes {
            requested: modes,
            grid_points: n,
            max,
        });
    }
    let (values, mut vectors) = match op.corner {
        None => tridiag::lowest_eigenpairs(&op.diag, &op.off, modes)?,
        Some(_) => dense_lowest(op, modes)?,
    };
    let scale = 1.0 / op.grid.weight().sqrt();
    for v in vectors.iter_mut() {
        fix_sign(v);
        v.iter_mut().for_each(|x| *x *= scale);
    }
    if !(values[0] > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "operator is not positive definite: lowest eigenvalue {}",
            values[0]
        )));
    }
    Ok(SpectralBasis {
        spec: op.spec.clone(),
        grid: op.grid.clone(),
        eigenvalues: values,
        eigenvectors: vectors,
        operator: op.clone(),
    })
}

/// Builds the operator and its basis in one step.
pub fn spectral_basis(spec: &OneBodySpec, modes: usize) -> Result<SpectralBasis> {
    eigendecompose(&build_operator(spec)?, modes)
}

/// Enlarges the box of an anharmonic spec until `L^a ≥ 10 λ_K`.
pub fn resolve_half_width(spec: &OneBodySpec, modes: usize) -> Result<OneBodySpec> {
    let mut spec = spec.clone();
    for _ in 0..32 {
        let (exponent, half_width) = match spec.domain {
            Domain::AnharmonicLine { exponent, half_width } => (exponent, half_width),
            Domain::Interval { .. } => return Ok(spec),
        };
        let basis = spectral_basis(&spec, modes)?;
        let top = *basis.eigenvalues.last().unwrap();
        if half_width.powf(exponent) >= 10.0 * top {
            return Ok(spec);
        }
        let wanted = (10.0 * top).powf(1.0 / exponent) * 1.05;
        spec.domain = Domain::AnharmonicLine {
            exponent,
            half_width: wanted.max(half_width * 1.1),
        };
    }
    Err(Error::NoConvergence(
        "box size for the anharmonic operator did not stabilize".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SchattenTrace {
    Convergent {
        partial_sum: f64,
        tail: f64,
    },
    /// `tr h^{-p}` is infinite for this `p`; `threshold` is the critical exponent.
    Divergent {
        partial_sum: f64,
        threshold: f64,
    },
}

impl SchattenTrace {
    pub fn value(&self) -> Option<f64> {
        match *self {
            SchattenTrace::Convergent { partial_sum, tail } => Some(partial_sum + tail),
            SchattenTrace::Divergent { .. } => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, SchattenTrace::Divergent { .. })
    }
}

/// Asymptotic law `λ_j ≈ c·j^θ` (plus `m`) of the continuum operator.
#[derive(Debug, Clone, Copy)]
struct GrowthLaw {
    coefficient: f64,
    power: f64,
}

impl GrowthLaw {
    fn for_spec(spec: &OneBodySpec) -> Self {
        match spec.domain {
            Domain::Interval { .. } => GrowthLaw {
                coefficient: std::f64::consts::PI.powi(2) / 4.0,
                power: 2.0,
            },
            Domain::AnharmonicLine { exponent, .. } => {
                // WKB: 2 B E^{1/2 + 1/a} = (j - 1/2) π with B = ∫_0^1 sqrt(1 - t^a) dt
                use statrs::function::gamma::gamma;
                let b = gamma(1.0 + 1.0 / exponent) * gamma(1.5) / gamma(1.5 + 1.0 / exponent);
                let power = 2.0 * exponent / (exponent + 2.0);
                GrowthLaw {
                    coefficient: (std::f64::consts::PI / (2.0 * b)).powf(power),
                    power,
                }
            }
        }
    }

    fn eigenvalue(&self, spec: &OneBodySpec, j: usize) -> f64 {
        let j = j as f64;
        match spec.domain {
            Domain::Interval { bc } => {
                let k = match bc {
                    BoundaryCondition::Dirichlet => j,
                    BoundaryCondition::Neumann => j - 1.0,
                    BoundaryCondition::Periodic => 2.0 * (j / 2.0).floor(),
                };
                self.coefficient * k * k + spec.m
            }
            Domain::AnharmonicLine { .. } => self.coefficient * (j - 0.5).powf(self.power) + spec.m,
        }
    }
}

/// `Σ_{j≤K} λ_j^{-p}` plus a tail estimate: `tail_terms` further eigenvalues from
/// the asymptotic growth law and an integral for the remainder.
pub fn schatten_trace(basis: &SpectralBasis, p: f64, tail_terms: usize) -> SchattenTrace {
    let partial_sum: f64 = basis.eigenvalues.iter().map(|l| l.powf(-p)).sum();
    let law = GrowthLaw::for_spec(&basis.spec);
    let threshold = 1.0 / law.power;
    if !(p > threshold) {
        return SchattenTrace::Divergent { partial_sum, threshold };
    }
    let k = basis.modes();
    let explicit: f64 = (k + 1..=k + tail_terms)
        .map(|j| law.eigenvalue(&basis.spec, j).powf(-p))
        .sum();
    let start = (k + tail_terms) as f64 + 0.5;
    let exponent = law.power * p - 1.0;
    let remainder = law.coefficient.powf(-p) * start.powf(-exponent) / exponent;
    SchattenTrace::Convergent {
        partial_sum,
        tail: explicit + remainder,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dirichlet(n: usize) -> OneBodySpec {
        OneBodySpec::interval(BoundaryCondition::Dirichlet, 1.0, n)
    }

    #[test]
    fn dirichlet_stencil() {
        let op = build_operator(&dirichlet(512)).unwrap();
        let dx = 2.0 / 513.0;
        assert!((op.grid.spacing - dx).abs() < 1e-15);
        for d in &op.diag {
            assert!((d - (2.0 / (dx * dx) + 1.0)).abs() < 1e-9);
        }
        assert!(op.off.iter().all(|&o| (o + 1.0 / (dx * dx)).abs() < 1e-9));
        assert!(op.corner.is_none());
        let dense = op.to_dense();
        assert_eq!(dense, dense.transpose());
    }

    #[test]
    fn periodic_rows_sum_to_m() {
        let op = build_operator(&OneBodySpec::interval(BoundaryCondition::Periodic, 1.0, 128)).unwrap();
        let dense = op.to_dense();
        for i in 0..op.dim() {
            let s: f64 = dense.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "row {i} sums to {s}");
        }
        assert_eq!(dense, dense.transpose());
    }

    #[test]
    fn anharmonic_potential_on_nodes() {
        let spec = OneBodySpec::anharmonic(4.0, 6.0, 0.0, 256);
        assert_eq!(spec.potential(6.0), 1296.0);
        assert_eq!(spec.potential(-6.0), 1296.0);
        let op = build_operator(&spec).unwrap();
        let dx = op.grid.spacing;
        for (x, d) in op.grid.nodes.iter().zip(&op.diag) {
            assert!((d - 2.0 / (dx * dx) - x.powi(4)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(build_operator(&OneBodySpec::anharmonic(2.0, 5.0, 0.0, 128)).is_err());
        assert!(build_operator(&OneBodySpec::anharmonic(1.5, 5.0, 0.0, 128)).is_err());
        assert!(build_operator(&OneBodySpec::anharmonic(4.0, -1.0, 0.0, 128)).is_err());
        assert!(build_operator(&OneBodySpec::interval(BoundaryCondition::Neumann, 0.0, 128)).is_err());
        assert!(build_operator(&OneBodySpec::interval(BoundaryCondition::Dirichlet, -1.0, 128)).is_err());
        assert!(build_operator(&dirichlet(63)).is_err());
    }

    #[test]
    fn rejects_too_many_modes() {
        let op = build_operator(&dirichlet(64)).unwrap();
        assert!(matches!(
            eigendecompose(&op, 17),
            Err(Error::TooManyModes { max: 16, .. })
        ));
        assert!(eigendecompose(&op, 16).is_ok());
    }

    #[test]
    fn dirichlet_spectrum_and_invariants() {
        let basis = spectral_basis(&dirichlet(1024), 8).unwrap();
        for (j, l) in basis.eigenvalues.iter().enumerate() {
            let exact = ((j as f64 + 1.0) * PI / 2.0).powi(2) + 1.0;
            assert!(((l - exact) / exact).abs() < 1e-3);
            assert!(basis.residual(j) <= 1e-6 * l);
        }
        assert!((basis.eigenvalues[0] - 3.4674).abs() < 1e-3);
        assert!(basis.orthonormality_defect() < 1e-8);
        // first mode ~ cos(πx/2), positive
        assert!(basis.eigenvectors[0].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn neumann_spectrum() {
        let basis = spectral_basis(&OneBodySpec::interval(BoundaryCondition::Neumann, 1.0, 512), 4).unwrap();
        for (j, l) in basis.eigenvalues.iter().enumerate() {
            let exact = (j as f64 * PI / 2.0).powi(2) + 1.0;
            assert!((l - exact).abs() < 1e-3 * exact, "{j}: {l} vs {exact}");
        }
        assert!(basis.orthonormality_defect() < 1e-8);
    }

    #[test]
    fn periodic_degenerate_pairs() {
        let basis = spectral_basis(&OneBodySpec::interval(BoundaryCondition::Periodic, 1.0, 256), 5).unwrap();
        assert!((basis.eigenvalues[0] - 1.0).abs() < 1e-10);
        for k in 1..=2 {
            let exact = (k as f64 * PI).powi(2) + 1.0;
            let (a, b) = (basis.eigenvalues[2 * k - 1], basis.eigenvalues[2 * k]);
            assert!((a - b).abs() < 1e-8);
            assert!((a - exact).abs() < 1e-3 * exact);
        }
        assert!(basis.orthonormality_defect() < 1e-8);
        for j in 0..5 {
            assert!(basis.residual(j) <= 1e-6 * basis.eigenvalues[j]);
        }
        // deterministic: repeated construction is bit-identical
        let again = spectral_basis(&OneBodySpec::interval(BoundaryCondition::Periodic, 1.0, 256), 5).unwrap();
        assert_eq!(basis.eigenvectors, again.eigenvectors);
        // constant mode is positive
        assert!(basis.eigenvectors[0][0] > 0.0);
    }

    #[test]
    fn schatten_divergence_flags() {
        let basis = spectral_basis(&dirichlet(256), 8).unwrap();
        assert!(schatten_trace(&basis, 0.0, 10).is_divergent());
        assert!(schatten_trace(&basis, 0.5, 10).is_divergent());
        let periodic = spectral_basis(&OneBodySpec::interval(BoundaryCondition::Periodic, 1.0, 256), 8).unwrap();
        assert!(schatten_trace(&periodic, 0.4, 10).is_divergent());
        assert!(!schatten_trace(&periodic, 0.6, 10).is_divergent());
    }

    #[test]
    fn schatten_monotone_in_p() {
        let basis = spectral_basis(&dirichlet(512), 16).unwrap();
        let values: Vec<f64> = (0..=20)
            .map(|i| schatten_trace(&basis, 1.0 + 0.1 * i as f64, 100).value().unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn csv_dump_has_one_row_per_mode() {
        let basis = spectral_basis(&dirichlet(64), 3).unwrap();
        let mut buf = Vec::new();
        basis.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("j,lambda_j,"));
        assert_eq!(lines[1].split(',').count(), 2 + 64);
    }
}
