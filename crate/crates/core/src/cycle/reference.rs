//! Reference assembly of the harmonic-balance residual by direct convolution
//! over index tuples. Exponentially slower than collocation and kept only as
//! an independent oracle for tests; do not use it in solvers.

use super::FourierOrbit;
use crate::models::PolynomialField;
use crate::real::Real;
use crate::Complex;

/// Full convolution of two coefficient sequences centered on frequency zero.
fn convolve<F: Real>(a: &[Complex<F>], b: &[Complex<F>]) -> Vec<Complex<F>> {
    let mut out = vec![Complex::new(F::zero(), F::zero()); a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = out[i + j] + ai * bj;
        }
    }
    out
}

/// Residual `iωk c_k − Σ F_{k1..kn} Σ_{j tuples, Σj = k} Π c_{j_l}` for
/// k = 0..=N, assembled term by term through repeated convolutions.
pub fn nested_sum_residual<F: Real>(
    poly: &PolynomialField<F>,
    orbit: &FourierOrbit<F>,
) -> Vec<Vec<Complex<F>>> {
    let n = orbit.order();
    let dim = poly.dim();
    let zero = Complex::new(F::zero(), F::zero());

    // c_{-N}..c_N per component
    let full: Vec<Vec<Complex<F>>> = (0..dim)
        .map(|j| {
            (-(n as i64)..=n as i64)
                .map(|k| orbit.coeff(k, j))
                .collect()
        })
        .collect();

    // rhs[k][j] accumulates the Fourier coefficients of F(x_γ(·))
    let mut rhs = vec![vec![zero; dim]; n + 1];
    for term in poly.terms() {
        let mut seq = vec![Complex::new(F::one(), F::zero())]; // delta at frequency 0
        for (v, &reps) in term.exponents.iter().enumerate() {
            for _ in 0..reps {
                seq = convolve(&seq, &full[v]);
            }
        }
        let center = (seq.len() - 1) / 2;
        for (k, row) in rhs.iter_mut().enumerate() {
            if center + k < seq.len() {
                let s = seq[center + k];
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = *slot + s * term.coeffs[j];
                }
            }
        }
    }

    (0..=n)
        .map(|k| {
            let i_omega_k = Complex::new(F::zero(), orbit.omega() * F::of(k as f64));
            (0..dim)
                .map(|j| i_omega_k * orbit.coeff(k as i64, j) - rhs[k][j])
                .collect()
        })
        .collect()
}
