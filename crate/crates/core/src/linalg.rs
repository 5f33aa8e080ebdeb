//! Small dense matrices, an LU solver for the Newton systems, and the
//! nonsymmetric eigenvalue computation used on monodromy matrices.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::Complex;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(F::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// Matrix product `self * other`.
    pub fn mul_mat(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == F::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat<F> {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Determinant through LU factorization.
    pub fn det(&self) -> F {
        assert_eq!(self.rows, self.cols);
        let mut a = self.clone();
        let n = a.rows;
        let mut det = F::one();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[(col, col)].abs();
            for r in col + 1..n {
                let v = a[(r, col)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == F::zero() {
                return F::zero();
            }
            if piv != col {
                for j in 0..n {
                    let tmp = a[(col, j)];
                    a[(col, j)] = a[(piv, j)];
                    a[(piv, j)] = tmp;
                }
                det = -det;
            }
            det = det * a[(col, col)];
            for r in col + 1..n {
                let factor = a[(r, col)] / a[(col, col)];
                for j in col..n {
                    let v = a[(col, j)];
                    a[(r, j)] = a[(r, j)] - factor * v;
                }
            }
        }
        det
    }
}

impl<F: Real> std::ops::Index<(usize, usize)> for Mat<F> {
    type Output = F;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F: Real> std::ops::IndexMut<(usize, usize)> for Mat<F> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

/// Solve `A x = b` in place by LU with partial pivoting; `b` becomes `x`.
pub fn lu_solve<F: Real>(a: &mut Mat<F>, b: &mut [F]) -> Result<()> {
    let n = a.rows;
    assert_eq!(a.cols, n);
    assert_eq!(b.len(), n);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[(col, col)].abs();
        for r in col + 1..n {
            let v = a[(r, col)].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if !(best > F::zero()) || !best.is_finite() {
            return Err(Error::SingularMatrix {
                col,
                pivot: best.as_f64(),
            });
        }
        if piv != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            b.swap(col, piv);
        }
        let d = a[(col, col)];
        for r in col + 1..n {
            let factor = a[(r, col)] / d;
            if factor == F::zero() {
                continue;
            }
            for j in col + 1..n {
                let v = a[(col, j)];
                a[(r, j)] = a[(r, j)] - factor * v;
            }
            b[r] = b[r] - factor * b[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s = s - a[(i, j)] * b[j];
        }
        b[i] = s / a[(i, i)];
    }
    Ok(())
}

/// Eigenvalues of a general real square matrix.
///
/// The matrix is balanced (Parlett-Reinsch) and decomposed in f64; monodromy
/// matrices are tiny (n <= 10) but can carry eigenvalues spanning many orders
/// of magnitude, where balancing matters.
pub fn eigenvalues<F: Real>(m: &Mat<F>) -> Result<Vec<Complex<F>>> {
    let n = m.rows;
    assert_eq!(m.cols, n);
    let mut a: Vec<f64> = m.data.iter().map(|v| v.as_f64()).collect();
    balance(&mut a, n);
    let dm = nalgebra::DMatrix::from_row_slice(n, n, &a);
    let eig = dm.complex_eigenvalues();
    Ok(eig
        .iter()
        .map(|z| Complex::new(F::of(z.re), F::of(z.im)))
        .collect())
}

/// Parlett-Reinsch balancing: diagonal similarity scaling by powers of two.
fn balance(a: &mut [f64], n: usize) {
    const RADIX: f64 = 2.0;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let mut cc = c;
            let mut rr = r;
            let s = c + r;
            while cc < rr / RADIX {
                f *= RADIX;
                cc *= RADIX * RADIX;
            }
            while cc > rr * RADIX {
                f /= RADIX;
                cc /= RADIX * RADIX;
            }
            rr = rr / f;
            if (cc + rr) < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[i * n + j] /= f;
                }
                for j in 0..n {
                    a[j * n + i] *= f;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_known_system() {
        let mut a: Mat<f64> = Mat::from_rows(&[
            vec![2.0, 1.0, -1.0],
            vec![-3.0, -1.0, 2.0],
            vec![-2.0, 1.0, 2.0],
        ]);
        let mut b = vec![8.0, -11.0, -3.0];
        lu_solve(&mut a, &mut b).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12);
        assert!((b[1] - 3.0).abs() < 1e-12);
        assert!((b[2] - -1.0).abs() < 1e-12);
    }

    #[test]
    fn lu_detects_singularity() {
        let mut a: Mat<f64> = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let mut b = vec![1.0, 2.0];
        assert!(matches!(
            lu_solve(&mut a, &mut b),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn eigenvalues_of_rotation_scaling() {
        // A = [[0.1, -2.0], [2.0, 0.1]] has eigenvalues 0.1 +/- 2i.
        let m: Mat<f64> = Mat::from_rows(&[vec![0.1, -2.0], vec![2.0, 0.1]]);
        let mut eig = eigenvalues(&m).unwrap();
        eig.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((eig[0].re - 0.1).abs() < 1e-12 && (eig[0].im + 2.0).abs() < 1e-12);
        assert!((eig[1].re - 0.1).abs() < 1e-12 && (eig[1].im - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_widely_scaled() {
        // Triangular with a tiny and a huge eigenvalue plus strong coupling;
        // balancing keeps the tiny one accurate.
        let m: Mat<f64> = Mat::from_rows(&[
            vec![1e-9, 1e4, 0.0],
            vec![0.0, 1.0, 1e4],
            vec![0.0, 0.0, 2.0],
        ]);
        let eig = eigenvalues(&m).unwrap();
        let mut mods: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
        mods.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((mods[0] - 1e-9).abs() / 1e-9 < 1e-3, "tiny eigenvalue lost: {mods:?}");
        assert!((mods[2] - 2.0).abs() < 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn lu_solve_matches_residual(seed in 0u64..500) {
            // Pseudo-random well-conditioned system: A = I*4 + small noise.
            let n = 6usize;
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
            };
            let mut a = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = next() + if i == j { 4.0 } else { 0.0 };
                }
            }
            let b: Vec<f64> = (0..n).map(|_| next()).collect();
            let mut af = a.clone();
            let mut x = b.clone();
            lu_solve(&mut af, &mut x).unwrap();
            let r = a.mul_vec(&x);
            for i in 0..n {
                proptest::prop_assert!((r[i] - b[i]).abs() < 1e-9);
            }
        }
    }
}
