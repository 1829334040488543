//! Occupation-number indexing of the symmetric tensor power `Sym^k(C^K)`.
//!
//! A multi-index `(n_1, ..., n_K)` with `Σ n_j = k` labels the normalized
//! symmetric vector obtained by symmetrizing `e_1^{⊗n_1} ⊗ ... ⊗ e_K^{⊗n_K}`.
//! Indices are listed in colexicographic order (last mode varies slowest).

use std::collections::HashMap;

use num_complex::Complex64;

pub type Occupation = Vec<u16>;

/// `C(n, k)` as a float; exact for the sizes used here.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `C(n, k)` with overflow detection.
pub fn binomial_checked(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (n as u128 - i) / (i + 1);
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// All occupations of `modes` modes with total `total`, in colex order.
pub fn occupations(modes: usize, total: usize) -> Vec<Occupation> {
    fn rec(modes: usize, remaining: usize, suffix: &mut Vec<u16>, out: &mut Vec<Occupation>) {
        if modes == 1 {
            let mut occ = Vec::with_capacity(suffix.len() + 1);
            occ.push(remaining as u16);
            occ.extend(suffix.iter().rev());
            out.push(occ);
            return;
        }
        for last in 0..=remaining {
            suffix.push(last as u16);
            rec(modes - 1, remaining - last, suffix, out);
            suffix.pop();
        }
    }
    let mut out = Vec::new();
    if modes == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(modes, total, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricBasis {
    modes: usize,
    order: usize,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

impl SymmetricBasis {
    pub fn new(modes: usize, order: usize) -> Self {
        let states = occupations(modes, order);
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        SymmetricBasis {
            modes,
            order,
            states,
            index,
        }
    }

    /// `C(K + k - 1, k)` without enumerating.
    pub fn dimension(modes: usize, order: usize) -> Option<u64> {
        if modes == 0 {
            return Some((order == 0) as u64);
        }
        binomial_checked((modes + order - 1) as u64, order as u64)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn order(&self) -> usize {
        self.order
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

    /// Components `<n | u^{⊗k}> = sqrt(k!/Π n_j!) Π α_j^{n_j}` of the product vector.
    pub fn product_components(&self, alpha: &[Complex64]) -> Vec<Complex64> {
        let kf = factorial(self.order as u32);
        self.states
            .iter()
            .map(|occ| {
                let mut value = Complex64::new(1.0, 0.0);
                let mut denom = 1.0;
                for (a, &n) in alpha.iter().zip(occ) {
                    value *= a.powu(n as u32);
                    denom *= factorial(n as u32);
                }
                value * (kf / denom).sqrt()
            })
            .collect()
    }

    /// Expansion of basis vector `s` in the tensor basis: distinct index sequences
    /// with the common coefficient `sqrt(Π n_j! / k!)`.
    pub fn tensor_expansion(&self, s: usize) -> Vec<(Vec<usize>, f64)> {
        let occ = &self.states[s];
        let coef = (occ.iter().map(|&n| factorial(n as u32)).product::<f64>() / factorial(self.order as u32)).sqrt();
        let mut out = Vec::new();
        let mut counts: Vec<u16> = occ.clone();
        let mut seq = Vec::with_capacity(self.order);
        fn rec(counts: &mut [u16], seq: &mut Vec<usize>, len: usize, coef: f64, out: &mut Vec<(Vec<usize>, f64)>) {
            if seq.len() == len {
                out.push((seq.clone(), coef));
                return;
            }
            for j in 0..counts.len() {
                if counts[j] > 0 {
                    counts[j] -= 1;
                    seq.push(j);
                    rec(counts, seq, len, coef, out);
                    seq.pop();
                    counts[j] += 1;
                }
            }
        }
        rec(&mut counts, &mut seq, self.order, coef, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colex_order_two_modes() {
        let occ = occupations(2, 2);
        assert_eq!(occ, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn dimensions_match_binomials() {
        for modes in 1..5 {
            for order in 0..6 {
                let b = SymmetricBasis::new(modes, order);
                assert_eq!(b.dim() as u64, SymmetricBasis::dimension(modes, order).unwrap());
                for (i, s) in b.states().iter().enumerate() {
                    assert_eq!(s.iter().map(|&n| n as usize).sum::<usize>(), order);
                    assert_eq!(b.position(s), Some(i));
                }
            }
        }
    }

    #[test]
    fn tensor_expansion_is_normalized() {
        let b = SymmetricBasis::new(3, 3);
        for s in 0..b.dim() {
            let exp = b.tensor_expansion(s);
            let norm: f64 = exp.iter().map(|(_, c)| c * c).sum();
            assert!((norm - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn product_components_preserve_norm() {
        // ||u^{⊗k}||² = ||u||^{2k}
        let alpha = [
            Complex64::new(0.3, -0.4),
            Complex64::new(1.1, 0.2),
            Complex64::new(-0.5, 0.0),
        ];
        let norm2: f64 = alpha.iter().map(|a| a.norm_sqr()).sum();
        for k in 1..4 {
            let b = SymmetricBasis::new(3, k);
            let comps = b.product_components(&alpha);
            let total: f64 = comps.iter().map(|c| c.norm_sqr()).sum();
            assert!((total - norm2.powi(k as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(13, 3), 286.0);
        assert_eq!(binomial_checked(13, 3), Some(286));
        assert_eq!(binomial(3, 5), 0.0);
        assert!(binomial_checked(200, 100).is_none());
    }
}
