//! Small dense complex linear algebra: LU with partial pivoting, and a
//! right-eigenvector decomposition built on nalgebra's complex Schur form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Pivot threshold relative to the matrix max-norm.
const SINGULAR_PIVOT: f64 = 1e-14;

/// Row-pivoted LU factorization `P A = L U`.
pub struct ComplexLu {
    lu: DMatrix<Complex64>,
    perm: Vec<usize>,
}

impl ComplexLu {
    /// Returns `None` when a pivot falls below `1e-14 · max|A|`.
    pub fn factor(mut a: DMatrix<Complex64>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tiny = SINGULAR_PIVOT * scale.max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot, best) = (col..n)
                .map(|r| (r, a[(r, col)].norm()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= tiny || !best.is_finite() {
                return None;
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                perm.swap(pivot, col);
            }
            let d = a[(col, col)];
            for r in col + 1..n {
                let f = a[(r, col)] / d;
                a[(r, col)] = f;
                if f != Complex64::new(0.0, 0.0) {
                    for c in col + 1..n {
                        let u = a[(col, c)];
                        a[(r, c)] -= f * u;
                    }
                }
            }
        }
        Some(ComplexLu { lu: a, perm })
    }

    pub fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let n = self.lu.nrows();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> DMatrix<Complex64> {
        let n = self.lu.nrows();
        let mut inv = DMatrix::zeros(n, n);
        for c in 0..n {
            let mut e = DVector::zeros(n);
            e[c] = Complex64::new(1.0, 0.0);
            inv.set_column(c, &self.solve(&e));
        }
        inv
    }
}

/// Eigenvalues and unit-norm right eigenvectors (columns) of a general
/// complex matrix.
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: DMatrix<Complex64>,
}

/// Diagonalizes `a` through its Schur form `a = Q T Q†`: eigenvectors of the
/// triangular factor come from back-substitution and are rotated by `Q`.
pub fn eigen(a: &DMatrix<Complex64>) -> Eigen {
    let n = a.nrows();
    let (q, t) = a.clone().schur().unpack();
    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let norm = t.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let small = (f64::EPSILON * norm).max(f64::MIN_POSITIVE);

    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let lambda = values[j];
        y[(j, j)] = Complex64::new(1.0, 0.0);
        for i in (0..j).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for m in i + 1..=j {
                s += t[(i, m)] * y[(m, j)];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < small {
                // repeated eigenvalue: perturb as LAPACK's trevc does
                d = Complex64::new(small, 0.0);
            }
            y[(i, j)] = -s / d;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= Complex64::new(nrm, 0.0);
        }
    }
    Eigen { values, vectors }
}

/// Spectral condition number `σ_max / σ_min`.
pub fn condition_number(a: &DMatrix<Complex64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}
