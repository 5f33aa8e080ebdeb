//! Polynomial vector fields: `F(x) = Σ F_{k1..kn} x1^{k1} ... xn^{kn}`.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::real::Real;

/// One monomial: a multi-index and the coefficient vector it multiplies.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTerm<F> {
    pub exponents: Vec<u32>,
    pub coeffs: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialField<F> {
    dim: usize,
    terms: Vec<PolyTerm<F>>,
}

impl<F: Real> PolynomialField<F> {
    pub fn new(dim: usize, terms: Vec<PolyTerm<F>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("polynomial field needs dim >= 1".into()));
        }
        for t in &terms {
            if t.exponents.len() != dim || t.coeffs.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "term arity mismatch: exponents {} / coeffs {} vs dim {}",
                    t.exponents.len(),
                    t.coeffs.len(),
                    dim
                )));
            }
        }
        for (i, a) in terms.iter().enumerate() {
            for b in terms.iter().skip(i + 1) {
                if a.exponents == b.exponents {
                    return Err(Error::InvalidInput(format!(
                        "duplicate multi-index {:?}",
                        a.exponents
                    )));
                }
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[PolyTerm<F>] {
        &self.terms
    }

    /// Highest total degree over all terms.
    pub fn total_degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn eval_into(&self, x: &[F], out: &mut [F]) {
        debug_assert_eq!(x.len(), self.dim);
        for v in out.iter_mut() {
            *v = F::zero();
        }
        for term in &self.terms {
            let mut mono = F::one();
            for (xi, &k) in x.iter().zip(&term.exponents) {
                mono = mono * xi.powi(k as i32);
            }
            for (o, &c) in out.iter_mut().zip(&term.coeffs) {
                *o += c * mono;
            }
        }
    }

    pub fn eval(&self, x: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.dim];
        self.eval_into(x, &mut out);
        out
    }

    pub fn jacobian_into(&self, x: &[F], out: &mut Mat<F>) {
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = F::zero();
            }
        }
        for term in &self.terms {
            for j in 0..self.dim {
                let k = term.exponents[j];
                if k == 0 {
                    continue;
                }
                // d/dx_j of the monomial
                let mut dmono = F::of(k as f64);
                for (l, (xi, &e)) in x.iter().zip(&term.exponents).enumerate() {
                    let p = if l == j { e - 1 } else { e };
                    dmono = dmono * xi.powi(p as i32);
                }
                for i in 0..self.dim {
                    out[(i, j)] += term.coeffs[i] * dmono;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_multi_indices() {
        let t = |e: &[u32], c: &[f64]| PolyTerm {
            exponents: e.to_vec(),
            coeffs: c.to_vec(),
        };
        let err = PolynomialField::new(2, vec![t(&[1, 0], &[1.0, 0.0]), t(&[1, 0], &[0.0, 1.0])]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_arity_mismatch() {
        let err = PolynomialField::new(
            2,
            vec![PolyTerm {
                exponents: vec![1],
                coeffs: vec![1.0, 0.0],
            }],
        );
        assert!(err.is_err());
    }

    #[test]
    fn jacobian_of_cubic() {
        // F = (x^2 y, -y^3)
        let poly = PolynomialField::new(
            2,
            vec![
                PolyTerm {
                    exponents: vec![2, 1],
                    coeffs: vec![1.0, 0.0],
                },
                PolyTerm {
                    exponents: vec![0, 3],
                    coeffs: vec![0.0, -1.0],
                },
            ],
        )
        .unwrap();
        let mut j = Mat::zeros(2, 2);
        poly.jacobian_into(&[2.0, 3.0], &mut j);
        assert_eq!(j[(0, 0)], 12.0); // 2xy
        assert_eq!(j[(0, 1)], 4.0); // x^2
        assert_eq!(j[(1, 0)], 0.0);
        assert_eq!(j[(1, 1)], -27.0); // -3y^2
    }
}
