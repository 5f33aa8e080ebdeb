//! The dynamical systems under study: vector fields, Jacobians, and (where
//! available) exact polynomial expansions.

mod hodgkin_huxley;
mod poly;

pub use hodgkin_huxley::HodgkinHuxleyParams;
pub use poly::{PolyTerm, PolynomialField};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::real::Real;

/// A vector field `x' = F(x)` with its Jacobian.
///
/// Models are immutable after construction and safe to share across workers.
#[derive(Debug, Clone)]
pub struct Model<F> {
    name: String,
    kind: ModelKind<F>,
    poly: Option<PolynomialField<F>>,
}

#[derive(Debug, Clone)]
enum ModelKind<F> {
    VanDerPol,
    VanDerPol3d { a: F, b: F },
    HodgkinHuxley(HodgkinHuxleyParams<F>),
    RadialHopf { kappa: F, omega0: F },
    Polynomial,
}

impl<F: Real> Model<F> {
    /// Model defined entirely by a polynomial field (user-supplied systems).
    pub fn from_polynomial(name: impl Into<String>, poly: PolynomialField<F>) -> Self {
        Self {
            name: name.into(),
            kind: ModelKind::Polynomial,
            poly: Some(poly),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ModelKind::VanDerPol => 2,
            ModelKind::VanDerPol3d { .. } => 3,
            ModelKind::HodgkinHuxley(_) => 4,
            ModelKind::RadialHopf { .. } => 2,
            ModelKind::Polynomial => self.poly.as_ref().unwrap().dim(),
        }
    }

    /// Exact polynomial form, when the model has one.
    pub fn poly(&self) -> Option<&PolynomialField<F>> {
        self.poly.as_ref()
    }

    pub fn eval_into(&self, x: &[F], out: &mut [F]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        match &self.kind {
            ModelKind::VanDerPol => {
                out[0] = x[1];
                out[1] = x[1] * (F::one() - x[0] * x[0]) - x[0];
            }
            ModelKind::VanDerPol3d { a, b } => {
                out[0] = x[1] - *b * x[2];
                out[1] = x[1] * (F::one() - x[0] * x[0]) - x[0];
                out[2] = *a * (x[0] - x[2]);
            }
            ModelKind::HodgkinHuxley(p) => p.eval_into(x, out),
            ModelKind::RadialHopf { kappa, omega0 } => {
                let s = F::one() - x[0] * x[0] - x[1] * x[1];
                out[0] = *kappa * x[0] * s - *omega0 * x[1];
                out[1] = *kappa * x[1] * s + *omega0 * x[0];
            }
            ModelKind::Polynomial => self.poly.as_ref().unwrap().eval_into(x, out),
        }
    }

    pub fn eval(&self, x: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    pub fn jacobian_into(&self, x: &[F], out: &mut Mat<F>) {
        debug_assert_eq!(out.rows(), self.dim());
        debug_assert_eq!(out.cols(), self.dim());
        match &self.kind {
            ModelKind::VanDerPol => {
                let two = F::of(2.0);
                out[(0, 0)] = F::zero();
                out[(0, 1)] = F::one();
                out[(1, 0)] = -two * x[0] * x[1] - F::one();
                out[(1, 1)] = F::one() - x[0] * x[0];
            }
            ModelKind::VanDerPol3d { a, b } => {
                let two = F::of(2.0);
                out[(0, 0)] = F::zero();
                out[(0, 1)] = F::one();
                out[(0, 2)] = -*b;
                out[(1, 0)] = -two * x[0] * x[1] - F::one();
                out[(1, 1)] = F::one() - x[0] * x[0];
                out[(1, 2)] = F::zero();
                out[(2, 0)] = *a;
                out[(2, 1)] = F::zero();
                out[(2, 2)] = -*a;
            }
            ModelKind::HodgkinHuxley(p) => p.jacobian_into(x, out),
            ModelKind::RadialHopf { kappa, omega0 } => {
                let two = F::of(2.0);
                let three = F::of(3.0);
                let (x1, x2) = (x[0], x[1]);
                out[(0, 0)] = *kappa * (F::one() - three * x1 * x1 - x2 * x2);
                out[(0, 1)] = -two * *kappa * x1 * x2 - *omega0;
                out[(1, 0)] = -two * *kappa * x1 * x2 + *omega0;
                out[(1, 1)] = *kappa * (F::one() - x1 * x1 - three * x2 * x2);
            }
            ModelKind::Polynomial => self.poly.as_ref().unwrap().jacobian_into(x, out),
        }
    }

    pub fn jacobian(&self, x: &[F]) -> Mat<F> {
        let mut out = Mat::zeros(self.dim(), self.dim());
        self.jacobian_into(x, &mut out);
        out
    }

    /// Trace of the Jacobian.
    pub fn divergence(&self, x: &[F]) -> F {
        let j = self.jacobian(x);
        (0..self.dim()).fold(F::zero(), |acc, i| acc + j[(i, i)])
    }
}

/// Construct one of the built-in models.
///
/// Known names: `vdp`, `vdp3d` (a = 2, b = 0.2), `hodgkin_huxley` (I_b = 10)
/// and `radial_hopf` (κ = 1, ω₀ = 2), the closed-form oracle model.
pub fn builtin_model<F: Real>(name: &str) -> Result<Model<F>> {
    let kind = match name {
        "vdp" => ModelKind::VanDerPol,
        "vdp3d" => ModelKind::VanDerPol3d {
            a: F::of(2.0),
            b: F::of(0.2),
        },
        "hodgkin_huxley" => ModelKind::HodgkinHuxley(HodgkinHuxleyParams::standard()),
        "radial_hopf" => ModelKind::RadialHopf {
            kappa: F::one(),
            omega0: F::of(2.0),
        },
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    let mut model = Model {
        name: name.to_string(),
        kind,
        poly: None,
    };
    model.poly = expand(&model).ok();
    Ok(model)
}

/// Radial Hopf oscillator with custom parameters (tests and experiments).
pub fn radial_hopf<F: Real>(kappa: F, omega0: F) -> Model<F> {
    let mut model = Model {
        name: "radial_hopf".to_string(),
        kind: ModelKind::RadialHopf { kappa, omega0 },
        poly: None,
    };
    model.poly = expand(&model).ok();
    model
}

/// Exact polynomial expansion of a model's vector field.
pub fn poly_expand<F: Real>(model: &Model<F>) -> Result<PolynomialField<F>> {
    expand(model)
}

fn expand<F: Real>(model: &Model<F>) -> Result<PolynomialField<F>> {
    let term = |exps: &[u32], coeffs: &[F]| PolyTerm {
        exponents: exps.to_vec(),
        coeffs: coeffs.to_vec(),
    };
    match &model.kind {
        ModelKind::VanDerPol => {
            let o = F::one();
            let z = F::zero();
            PolynomialField::new(
                2,
                vec![
                    term(&[0, 1], &[o, o]),
                    term(&[2, 1], &[z, -o]),
                    term(&[1, 0], &[z, -o]),
                ],
            )
        }
        ModelKind::VanDerPol3d { a, b } => {
            let o = F::one();
            let z = F::zero();
            PolynomialField::new(
                3,
                vec![
                    term(&[0, 1, 0], &[o, o, z]),
                    term(&[1, 0, 0], &[z, -o, *a]),
                    term(&[2, 1, 0], &[z, -o, z]),
                    term(&[0, 0, 1], &[-*b, z, -*a]),
                ],
            )
        }
        ModelKind::RadialHopf { kappa, omega0 } => {
            let k = *kappa;
            let w = *omega0;
            let z = F::zero();
            PolynomialField::new(
                2,
                vec![
                    term(&[1, 0], &[k, w]),
                    term(&[0, 1], &[-w, k]),
                    term(&[3, 0], &[-k, z]),
                    term(&[1, 2], &[-k, z]),
                    term(&[2, 1], &[z, -k]),
                    term(&[0, 3], &[z, -k]),
                ],
            )
        }
        ModelKind::Polynomial => Ok(model.poly.clone().unwrap()),
        ModelKind::HodgkinHuxley(_) => Err(Error::NotPolynomial(model.name.clone())),
    }
}

/// Central finite-difference Jacobian; fallback for externally supplied
/// fields and the reference in Jacobian consistency tests.
pub fn fd_jacobian<F: Real>(model: &Model<F>, x: &[F], h: F) -> Mat<F> {
    let n = model.dim();
    let mut out = Mat::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![F::zero(); n];
    let mut fm = vec![F::zero(); n];
    for j in 0..n {
        let x0 = x[j];
        xp[j] = x0 + h;
        model.eval_into(&xp, &mut fp);
        xp[j] = x0 - h;
        model.eval_into(&xp, &mut fm);
        xp[j] = x0;
        for i in 0..n {
            out[(i, j)] = (fp[i] - fm[i]) / (F::of(2.0) * h);
        }
    }
    out
}
