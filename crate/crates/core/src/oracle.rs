//! Dense full-Fock-space reference construction.
//!
//! Every elementary operator is a `2^l × 2^l` matrix written out entry by
//! entry, and composite operators are formed by matrix multiplication. The
//! result is compared against the bit-manipulation path in [`crate::fock`]
//! and [`crate::ensemble`]; nothing here calls into those modules.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest mode count the dense oracle accepts.
pub const MAX_ORACLE_MODES: usize = 8;

pub struct FullFockOracle {
    l: usize,
    annihilators: Vec<DMatrix<f64>>,
}

impl FullFockOracle {
    pub fn new(l: usize) -> Result<Self> {
        if l == 0 || l > MAX_ORACLE_MODES {
            return Err(Error::invalid(
                "l",
                format!("oracle supports 1..={MAX_ORACLE_MODES} modes, got {l}"),
            ));
        }
        let dim = 1usize << l;
        let annihilators = (0..l)
            .map(|bit| {
                let mut a = DMatrix::zeros(dim, dim);
                for b in 0..dim {
                    if b >> bit & 1 == 1 {
                        let below = (b & ((1 << bit) - 1)).count_ones();
                        let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
                        a[(b & !(1 << bit), b)] = sign;
                    }
                }
                a
            })
            .collect();
        Ok(FullFockOracle { l, annihilators })
    }

    pub fn modes(&self) -> usize {
        self.l
    }

    /// `a_mode` for a 1-based mode.
    pub fn annihilator(&self, mode: usize) -> &DMatrix<f64> {
        &self.annihilators[mode - 1]
    }

    pub fn creator(&self, mode: usize) -> DMatrix<f64> {
        self.annihilators[mode - 1].transpose()
    }

    /// `a†_{c1} … a†_{ck} a_{ak} … a_{a1}` as a dense matrix.
    pub fn pair_operator(&self, create: &[usize], annihilate: &[usize]) -> DMatrix<f64> {
        let dim = 1usize << self.l;
        let mut op = DMatrix::identity(dim, dim);
        for &m in create {
            op *= self.creator(m);
        }
        for &m in annihilate.iter().rev() {
            op *= self.annihilator(m);
        }
        op
    }

    /// Fock indices of all `n`-particle states, lexicographic in occupied modes.
    pub fn sector(&self, n: usize) -> Vec<usize> {
        let mut masks: Vec<usize> = (0..1usize << self.l)
            .filter(|b| b.count_ones() as usize == n)
            .collect();
        masks.sort_by_key(|&b| {
            (0..self.l)
                .filter(|&j| b >> j & 1 == 1)
                .map(|j| j + 1)
                .collect::<Vec<_>>()
        });
        masks
    }

    /// `Σ v[α,γ] ψ†_α ψ_γ` restricted to the `n`-particle sector.
    ///
    /// Rows and columns of `values` follow the lexicographic order of
    /// `k`-tuples, as do the rows and columns of the result.
    pub fn embed(&self, values: &DMatrix<f64>, k: usize, n: usize) -> Result<DMatrix<f64>> {
        let tuples: Vec<Vec<usize>> = self
            .sector(k)
            .into_iter()
            .map(|b| (0..self.l).filter(|&j| b >> j & 1 == 1).map(|j| j + 1).collect())
            .collect();
        if values.nrows() != tuples.len() || values.ncols() != tuples.len() {
            return Err(Error::DimensionMismatch {
                expected: tuples.len(),
                found: values.nrows(),
            });
        }
        let dim = 1usize << self.l;
        let mut full = DMatrix::zeros(dim, dim);
        for (a, alpha) in tuples.iter().enumerate() {
            for (g, gamma) in tuples.iter().enumerate() {
                let v = values[(a, g)];
                if v != 0.0 {
                    full += self.pair_operator(alpha, gamma) * v;
                }
            }
        }
        let sector = self.sector(n);
        Ok(DMatrix::from_fn(sector.len(), sector.len(), |r, c| {
            full[(sector[r], sector[c])]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_anticommutators() {
        let o = FullFockOracle::new(4).unwrap();
        let dim = 16;
        for i in 1..=4 {
            for j in 1..=4 {
                let a_i = o.annihilator(i);
                let c_j = o.creator(j);
                let anti = a_i * &c_j + &c_j * a_i;
                let expect = if i == j {
                    DMatrix::identity(dim, dim)
                } else {
                    DMatrix::zeros(dim, dim)
                };
                assert_eq!(anti, expect);
                let aa = a_i * o.annihilator(j) + o.annihilator(j) * a_i;
                assert_eq!(aa, DMatrix::zeros(dim, dim));
            }
        }
    }

    #[test]
    fn sector_order() {
        let o = FullFockOracle::new(4).unwrap();
        // (1,2) (1,3) (1,4) (2,3) (2,4) (3,4)
        assert_eq!(o.sector(2), vec![0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100]);
    }
}
