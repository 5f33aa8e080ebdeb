//! Hodgkin-Huxley membrane model, state (V, m, h, n).

use crate::linalg::Mat;
use crate::real::Real;

/// Conductances in mS/cm², potentials in mV, capacitance in µF/cm²,
/// bias current in mA.
#[derive(Debug, Clone)]
pub struct HodgkinHuxleyParams<F> {
    pub g_na: F,
    pub g_k: F,
    pub g_l: F,
    pub v_na: F,
    pub v_k: F,
    pub v_l: F,
    pub capacitance: F,
    pub i_b: F,
}

impl<F: Real> HodgkinHuxleyParams<F> {
    pub fn standard() -> Self {
        Self {
            g_na: F::of(120.0),
            g_k: F::of(36.0),
            g_l: F::of(0.3),
            v_na: F::of(115.0),
            v_k: F::of(-12.0),
            v_l: F::of(10.6),
            capacitance: F::one(),
            i_b: F::of(10.0),
        }
    }

    pub fn eval_into(&self, x: &[F], out: &mut [F]) {
        let (v, m, h, n) = (x[0], x[1], x[2], x[3]);
        let m3h = m * m * m * h;
        let n4 = n * n * n * n;
        out[0] = (-self.g_na * (v - self.v_na) * m3h
            - self.g_k * (v - self.v_k) * n4
            - self.g_l * (v - self.v_l)
            + self.i_b)
            / self.capacitance;
        out[1] = alpha_m(v) * (F::one() - m) - beta_m(v) * m;
        out[2] = alpha_h(v) * (F::one() - h) - beta_h(v) * h;
        out[3] = alpha_n(v) * (F::one() - n) - beta_n(v) * n;
    }

    pub fn jacobian_into(&self, x: &[F], out: &mut Mat<F>) {
        let (v, m, h, n) = (x[0], x[1], x[2], x[3]);
        let c = self.capacitance;
        let three = F::of(3.0);
        let four = F::of(4.0);
        for i in 0..4 {
            for j in 0..4 {
                out[(i, j)] = F::zero();
            }
        }
        out[(0, 0)] = (-self.g_na * m * m * m * h - self.g_k * n * n * n * n - self.g_l) / c;
        out[(0, 1)] = -self.g_na * three * m * m * h * (v - self.v_na) / c;
        out[(0, 2)] = -self.g_na * m * m * m * (v - self.v_na) / c;
        out[(0, 3)] = -self.g_k * four * n * n * n * (v - self.v_k) / c;

        out[(1, 0)] = d_alpha_m(v) * (F::one() - m) - d_beta_m(v) * m;
        out[(1, 1)] = -alpha_m(v) - beta_m(v);
        out[(2, 0)] = d_alpha_h(v) * (F::one() - h) - d_beta_h(v) * h;
        out[(2, 2)] = -alpha_h(v) - beta_h(v);
        out[(3, 0)] = d_alpha_n(v) * (F::one() - n) - d_beta_n(v) * n;
        out[(3, 3)] = -alpha_n(v) - beta_n(v);
    }
}

/// `u / (1 - e^{-u})`, with a series switch where the denominator vanishes
/// (removable singularities of alpha_m at V = 25 and alpha_n at V = 10).
fn ratio<F: Real>(u: F) -> F {
    let den = F::one() - (-u).exp();
    if den.abs() < F::of(1e-7) {
        // u/(1 - e^{-u}) = 1 + u/2 + u²/12 + O(u⁴)
        F::one() + u / F::of(2.0) + u * u / F::of(12.0)
    } else {
        u / den
    }
}

/// Derivative of `ratio` with respect to `u`.
fn d_ratio<F: Real>(u: F) -> F {
    let e = (-u).exp();
    let den = F::one() - e;
    if den.abs() < F::of(1e-7) {
        F::of(0.5) + u / F::of(6.0)
    } else {
        (den - u * e) / (den * den)
    }
}

fn alpha_m<F: Real>(v: F) -> F {
    ratio(F::of(0.1) * v - F::of(2.5))
}

fn d_alpha_m<F: Real>(v: F) -> F {
    F::of(0.1) * d_ratio(F::of(0.1) * v - F::of(2.5))
}

fn beta_m<F: Real>(v: F) -> F {
    F::of(4.0) * (-v / F::of(18.0)).exp()
}

fn d_beta_m<F: Real>(v: F) -> F {
    -F::of(4.0 / 18.0) * (-v / F::of(18.0)).exp()
}

fn alpha_h<F: Real>(v: F) -> F {
    F::of(0.07) * (-v / F::of(20.0)).exp()
}

fn d_alpha_h<F: Real>(v: F) -> F {
    -F::of(0.07 / 20.0) * (-v / F::of(20.0)).exp()
}

fn beta_h<F: Real>(v: F) -> F {
    F::one() / (F::one() + (F::of(3.0) - F::of(0.1) * v).exp())
}

fn d_beta_h<F: Real>(v: F) -> F {
    let e = (F::of(3.0) - F::of(0.1) * v).exp();
    let den = F::one() + e;
    F::of(0.1) * e / (den * den)
}

fn alpha_n<F: Real>(v: F) -> F {
    F::of(0.1) * ratio(F::of(0.1) * v - F::one())
}

fn d_alpha_n<F: Real>(v: F) -> F {
    F::of(0.01) * d_ratio(F::of(0.1) * v - F::one())
}

fn beta_n<F: Real>(v: F) -> F {
    F::of(0.125) * (-v / F::of(80.0)).exp()
}

fn d_beta_n<F: Real>(v: F) -> F {
    -F::of(0.125 / 80.0) * (-v / F::of(80.0)).exp()
}
