//! Lowest eigenpairs of a real symmetric tridiagonal matrix by Sturm-sequence
//! bisection followed by inverse iteration.

use crate::error::{Error, Result};

/// Number of eigenvalues strictly below `x`.
pub(crate) fn sturm_count(diag: &[f64], off: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - left - right);
        hi = hi.max(diag[i] + left + right);
    }
    (lo, hi)
}

/// LU factorization of `T - shift I` with partial pivoting (LAPACK `gttrf` layout).
struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut dl = off.to_vec();
        let mut du = off.to_vec();
        let mut d: Vec<f64> = diag.iter().map(|&v| v - shift).collect();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        for v in d.iter_mut() {
            if v.abs() < tiny {
                *v = if *v < 0.0 { -tiny } else { tiny };
            }
        }
        TridiagLu {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// The `count` smallest eigenpairs, ascending, with Euclidean-normalized vectors.
pub(crate) fn lowest_eigenpairs(diag: &[f64], off: &[f64], count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if off.len() + 1 != n {
        return Err(Error::DimensionMismatch(format!(
            "tridiagonal with {} diagonal and {} off-diagonal entries",
            n,
            off.len()
        )));
    }
    let (lo0, hi0) = gershgorin(diag, off);
    let scale = lo0.abs().max(hi0.abs()).max(1.0);
    let max_off2 = off.iter().map(|e| e * e).fold(0.0, f64::max);
    let pivmin = f64::MIN_POSITIVE.max(f64::MIN_POSITIVE * max_off2);

    let mut values = Vec::with_capacity(count);
    for j in 0..count {
        let (mut lo, mut hi) = (lo0 - 1e-12 * scale, hi0 + 1e-12 * scale);
        let mut iterations = 0;
        while hi - lo > 4.0 * f64::EPSILON * scale.max(lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sturm_count(diag, off, mid, pivmin) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            iterations += 1;
            if iterations > 2000 {
                return Err(Error::NoConvergence(format!(
                    "bisection for eigenvalue {j} did not terminate"
                )));
            }
        }
        values.push(0.5 * (lo + hi));
    }

    let tiny = f64::EPSILON * scale;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (j, &lambda) in values.iter().enumerate() {
        let lu = TridiagLu::factor(diag, off, lambda, tiny);
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.25 * ((i as f64 + 1.0) * (j as f64 + 1.3)).sin())
            .collect();
        normalize(&mut v);
        for _ in 0..4 {
            lu.solve(&mut v);
            for prev in vectors.iter() {
                let dot: f64 = prev.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(prev.iter()).for_each(|(x, p)| *x -= dot * p);
            }
            if normalize(&mut v) == 0.0 || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NoConvergence(format!(
                    "inverse iteration broke down for eigenvalue {j}"
                )));
            }
        }
        vectors.push(v);
    }
    Ok((values, vectors))
}
