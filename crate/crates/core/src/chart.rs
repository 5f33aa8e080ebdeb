//! Polar-type coordinates (ϑ, ρ) on a projection plane Σ.
//!
//! The plane is spanned by two state coordinates; the projected cycle must be
//! star-shaped about its projected mean `P(c_0)`. The chart provides the
//! geometric phase Θ, its inversion ϑ(x) by bisection against a monotone
//! lookup table, the observable `f(x) = ρ - 1` that vanishes on the cycle,
//! and the outward unit normal ξ used for gradient observables.

use crate::angle::{wrap_to_pi, wrap_to_tau};
use crate::cycle::FourierOrbit;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::Complex;

#[derive(Debug, Clone)]
pub struct PolarChart<F> {
    plane: (usize, usize),
    dim: usize,
    scale: [F; 2],
    center: [F; 2],
    /// Projected (and scaled) Fourier coefficients, k = 0..=N.
    proj: Vec<[Complex<F>; 2]>,
    ref_vector: [F; 2],
    /// Unwrapped geometric phase of `x_γ(ϑ_m)` at `ϑ_m = 2πm/T`, m = 0..=T.
    table: Vec<F>,
    increasing: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ChartOptions<F> {
    pub table_size: usize,
    /// Optional per-axis scaling of the plane coordinates.
    pub scale: Option<[F; 2]>,
}

impl<F: Real> Default for ChartOptions<F> {
    fn default() -> Self {
        Self {
            table_size: 4096,
            scale: None,
        }
    }
}

/// Build the chart for a given plane (pair of state-coordinate indices).
pub fn build_chart<F: Real>(
    orbit: &FourierOrbit<F>,
    plane: (usize, usize),
    opts: &ChartOptions<F>,
) -> Result<PolarChart<F>> {
    let (pi, pj) = plane;
    if pi == pj || pi >= orbit.dim() || pj >= orbit.dim() {
        return Err(Error::InvalidInput(format!(
            "invalid projection plane ({pi}, {pj}) for dimension {}",
            orbit.dim()
        )));
    }
    if opts.table_size < 256 {
        return Err(Error::InvalidInput(
            "theta table needs at least 256 entries".into(),
        ));
    }
    let scale = opts.scale.unwrap_or([F::one(), F::one()]);
    let proj: Vec<[Complex<F>; 2]> = (0..=orbit.order())
        .map(|k| {
            [
                orbit.coeff(k as i64, pi) * scale[0],
                orbit.coeff(k as i64, pj) * scale[1],
            ]
        })
        .collect();
    let center = [proj[0][0].re, proj[0][1].re];
    let mut chart = PolarChart {
        plane,
        dim: orbit.dim(),
        scale,
        center,
        proj,
        ref_vector: [F::zero(); 2],
        table: Vec::new(),
        increasing: true,
    };
    let p0 = chart.cycle_point_proj(F::zero());
    chart.ref_vector = [p0[0] - center[0], p0[1] - center[1]];
    let ref_norm = (chart.ref_vector[0] * chart.ref_vector[0]
        + chart.ref_vector[1] * chart.ref_vector[1])
        .sqrt();
    if !(ref_norm > F::of(1e-12)) {
        return Err(Error::DegenerateRadius);
    }

    // geometric phase along the projected cycle, unwrapped
    let t = opts.table_size;
    let mut table = Vec::with_capacity(t + 1);
    let mut prev_raw = F::zero();
    let mut acc = F::zero();
    for m in 0..=t {
        let theta = F::tau() * F::of(m as f64) / F::of(t as f64);
        let p = chart.cycle_point_proj(theta);
        let v = [p[0] - center[0], p[1] - center[1]];
        let vnorm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if !(vnorm > F::of(1e-12) * ref_norm) {
            return Err(Error::DegenerateRadius);
        }
        let raw = chart.signed_angle(v);
        if m == 0 {
            acc = raw; // exactly zero: v is parallel to the reference vector
        } else {
            acc = acc + wrap_to_pi(raw - prev_raw);
        }
        table.push(acc);
        prev_raw = raw;
    }
    // strict monotonicity with a consistent direction
    let increasing = table[t] > table[0];
    for m in 0..t {
        let d = table[m + 1] - table[m];
        let ok = if increasing {
            d > F::zero()
        } else {
            d < F::zero()
        };
        if !ok {
            let lo = F::tau() * F::of(m as f64) / F::of(t as f64);
            let hi = F::tau() * F::of((m + 1) as f64) / F::of(t as f64);
            return Err(Error::NotStarShaped {
                theta_lo: lo.as_f64(),
                theta_hi: hi.as_f64(),
            });
        }
    }
    // winding number must be ±1
    let total = (table[t] - table[0]).abs();
    if (total - F::tau()).abs() > F::of(1e-6) {
        return Err(Error::NotStarShaped {
            theta_lo: 0.0,
            theta_hi: std::f64::consts::TAU,
        });
    }
    chart.table = table;
    chart.increasing = increasing;
    Ok(chart)
}

impl<F: Real> PolarChart<F> {
    pub fn plane(&self) -> (usize, usize) {
        self.plane
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> [F; 2] {
        self.center
    }

    /// Scaled orthogonal projection of a state onto the plane.
    pub fn project(&self, x: &[F]) -> [F; 2] {
        [
            x[self.plane.0] * self.scale[0],
            x[self.plane.1] * self.scale[1],
        ]
    }

    /// `P(x_γ(ϑ))`, the projected cycle.
    pub fn cycle_point_proj(&self, theta: F) -> [F; 2] {
        let rot = Complex::new(theta.cos(), theta.sin());
        let mut e = rot;
        let two = F::of(2.0);
        let mut p = [self.proj[0][0].re, self.proj[0][1].re];
        for pk in self.proj.iter().skip(1) {
            for (pp, c) in p.iter_mut().zip(pk) {
                *pp += two * (c.re * e.re - c.im * e.im);
            }
            e = e * rot;
        }
        p
    }

    /// `g(ϑ, ρ)`: the plane point with polar coordinates (ϑ, ρ).
    pub fn g_point(&self, theta: F, rho: F) -> [F; 2] {
        let on_cycle = self.cycle_point_proj(theta);
        [
            self.center[0] + rho * (on_cycle[0] - self.center[0]),
            self.center[1] + rho * (on_cycle[1] - self.center[1]),
        ]
    }

    /// Tangent `d/dϑ P(x_γ(ϑ))`.
    fn cycle_tangent_proj(&self, theta: F) -> [F; 2] {
        let rot = Complex::new(theta.cos(), theta.sin());
        let mut e = rot;
        let two = F::of(2.0);
        let mut v = [F::zero(); 2];
        for (k, pk) in self.proj.iter().enumerate().skip(1) {
            let kf = F::of(k as f64);
            for (vv, c) in v.iter_mut().zip(pk) {
                *vv += two * kf * (-(c.im * e.re) - c.re * e.im);
            }
            e = e * rot;
        }
        v
    }

    /// Signed angle between `v` and the reference vector:
    /// `atan2(v × v₀, v · v₀)`.
    fn signed_angle(&self, v: [F; 2]) -> F {
        let v0 = self.ref_vector;
        let cross = v[0] * v0[1] - v[1] * v0[0];
        let dot = v[0] * v0[0] + v[1] * v0[1];
        cross.atan2(dot)
    }

    /// Geometric phase `Θ(x) ∈ (-π, π]`.
    pub fn geometric_phase(&self, x: &[F]) -> Result<F> {
        let p = self.project(x);
        let v = [p[0] - self.center[0], p[1] - self.center[1]];
        let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let ref_norm =
            (self.ref_vector[0] * self.ref_vector[0] + self.ref_vector[1] * self.ref_vector[1])
                .sqrt();
        if norm < F::of(1e-12) * ref_norm {
            return Err(Error::DegenerateRadius);
        }
        Ok(self.signed_angle(v))
    }

    /// Invert the chart: the `(ϑ, ρ)` of a state, solving
    /// `Θ(x_γ(ϑ)) = Θ(x)` by bisection on the monotone table.
    pub fn invert_theta(&self, x: &[F], tol: F) -> Result<(F, F)> {
        let raw = self.geometric_phase(x)?;
        let t = self.table.len() - 1;
        // map the phase into the unwrapped branch covered by the table
        let target = if self.increasing {
            self.table[0] + wrap_to_tau(raw - self.table[0])
        } else {
            self.table[0] - wrap_to_tau(self.table[0] - raw)
        };
        // binary search for the bracketing table interval
        let mut lo = 0usize;
        let mut hi = t;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let below = if self.increasing {
                self.table[mid] <= target
            } else {
                self.table[mid] >= target
            };
            if below {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let step = F::tau() / F::of(t as f64);
        let mut th_lo = F::of(lo as f64) * step;
        let mut th_hi = F::of(hi as f64) * step;
        let mut val_lo = self.table[lo];
        // bisection on the continuous geometric phase, unwrapped locally
        for _ in 0..120 {
            let mid = (th_lo + th_hi) / F::of(2.0);
            let p = self.cycle_point_proj(mid);
            let v = [p[0] - self.center[0], p[1] - self.center[1]];
            let val = val_lo + wrap_to_pi(self.signed_angle(v) - wrap_to_pi(val_lo));
            let diff = val - target;
            if diff.abs() < tol {
                th_lo = mid;
                break;
            }
            let below = if self.increasing {
                val <= target
            } else {
                val >= target
            };
            if below {
                th_lo = mid;
                val_lo = val;
            } else {
                th_hi = mid;
            }
            if (th_hi - th_lo) < F::of(1e-16) {
                break;
            }
        }
        let theta = wrap_to_tau(th_lo);
        let p = self.project(x);
        let v = [p[0] - self.center[0], p[1] - self.center[1]];
        let on_cycle = self.cycle_point_proj(theta);
        let w = [on_cycle[0] - self.center[0], on_cycle[1] - self.center[1]];
        let rho = (v[0] * v[0] + v[1] * v[1]).sqrt() / (w[0] * w[0] + w[1] * w[1]).sqrt();
        Ok((theta, rho))
    }

    /// The zero-on-cycle observable `f(x) = ρ(x) - 1`.
    pub fn observable(&self, x: &[F]) -> Result<F> {
        let (_, rho) = self.invert_theta(x, F::of(1e-10))?;
        Ok(rho - F::one())
    }

    /// Outward unit normal ξ to the projected cycle at phase ϑ.
    pub fn xi_at(&self, theta: F) -> Result<[F; 2]> {
        let tangent = self.cycle_tangent_proj(theta);
        let norm = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
        if !(norm > F::of(1e-12)) {
            return Err(Error::ZeroTangent(theta.as_f64()));
        }
        let mut xi = [-tangent[1] / norm, tangent[0] / norm];
        let p = self.cycle_point_proj(theta);
        let outward = [p[0] - self.center[0], p[1] - self.center[1]];
        if xi[0] * outward[0] + xi[1] * outward[1] < F::zero() {
            xi = [-xi[0], -xi[1]];
        }
        Ok(xi)
    }

    /// Gradient observable `ξ(π(P(x))) · P(dx)`: the directional derivative
    /// observable propagated through the variational flow.
    pub fn gradient_observable(&self, x: &[F], dx: &[F]) -> Result<F> {
        let (theta, _) = self.invert_theta(x, F::of(1e-10))?;
        let xi = self.xi_at(theta)?;
        let pdx = [
            dx[self.plane.0] * self.scale[0],
            dx[self.plane.1] * self.scale[1],
        ];
        Ok(xi[0] * pdx[0] + xi[1] * pdx[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::{ellipse_seed, harmonic_balance};
    use crate::models::{builtin_model, poly_expand};
    use crate::testing::SplitMix64;

    fn hopf_chart() -> PolarChart<f64> {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let poly = poly_expand(&model).unwrap();
        let seed = ellipse_seed(
            &[0.0, 0.0],
            &[Complex::new(0.45, 0.0), Complex::new(0.0, -0.45)],
            1.8,
        )
        .unwrap();
        let orbit = harmonic_balance(&poly, 2, &seed, &Default::default()).unwrap();
        build_chart(&orbit, (0, 1), &ChartOptions::default()).unwrap()
    }

    #[test]
    fn circle_chart_geometry() {
        let chart = hopf_chart();
        assert!(chart.center()[0].abs() < 1e-9 && chart.center()[1].abs() < 1e-9);
        // Θ(x_γ(ϑ)) = -ϑ under the footnote sign convention
        for &th in &[0.3, 1.2, 2.9] {
            let p = chart.cycle_point_proj(th);
            let phase = chart.geometric_phase(&p).unwrap();
            assert!((wrap_to_pi(phase + th)).abs() < 1e-9, "theta = {th}");
        }
        // x = (0, 2): v = (0, 2), v0 = (1, 0), Θ = atan2(-2, 0) = -π/2
        let phase = chart.geometric_phase(&[0.0, 2.0]).unwrap();
        assert!((phase + std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn invert_theta_on_circle() {
        let chart = hopf_chart();
        let (theta, rho) = chart.invert_theta(&[0.0, 2.0], 1e-10).unwrap();
        assert!((theta - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
        assert!((rho - 2.0).abs() < 1e-8);
        // on-cycle points have rho = 1
        for &th in &[0.0, 0.7, 3.3, 6.0] {
            let x = chart.cycle_point_proj(th);
            let (thr, rho) = chart.invert_theta(&x, 1e-10).unwrap();
            assert!((rho - 1.0).abs() < 1e-8);
            assert!(wrap_to_pi(thr - th).abs() < 1e-8);
        }
    }

    #[test]
    fn observable_examples() {
        let chart = hopf_chart();
        assert!((chart.observable(&[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-8);
        assert!((chart.observable(&[0.25, 0.0]).unwrap() + 0.75).abs() < 1e-8);
        assert!(chart.observable(&[0.0, 0.0]).is_err()); // degenerate radius
    }

    #[test]
    fn phase_is_radially_invariant() {
        let chart = hopf_chart();
        let mut rng = SplitMix64::new(8);
        for _ in 0..50 {
            let th = rng.range(0.0, std::f64::consts::TAU);
            let r1 = rng.range(0.1, 3.0);
            let r2 = rng.range(0.1, 3.0);
            let p1 = chart.g_point(th, r1);
            let p2 = chart.g_point(th, r2);
            let a = chart.geometric_phase(&p1).unwrap();
            let b = chart.geometric_phase(&p2).unwrap();
            assert!(wrap_to_pi(a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_forward_invert() {
        let chart = hopf_chart();
        let mut rng = SplitMix64::new(21);
        for _ in 0..100 {
            let th = rng.range(0.0, std::f64::consts::TAU);
            let rho = rng.range(0.05, 3.0);
            let p = chart.g_point(th, rho);
            let (thr, rhor) = chart.invert_theta(&p, 1e-12).unwrap();
            assert!(wrap_to_pi(thr - th).abs() < 1e-8, "theta {th} -> {thr}");
            assert!((rhor - rho).abs() < 1e-8);
        }
    }

    #[test]
    fn xi_is_outward_radial_on_the_circle() {
        let chart = hopf_chart();
        let xi = chart.xi_at(0.0).unwrap();
        assert!((xi[0] - 1.0).abs() < 1e-9 && xi[1].abs() < 1e-9);
        // gradient observable picks out radial components
        let x = chart.cycle_point_proj(0.0); // (1, 0)
        assert!((chart.gradient_observable(&x, &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-8);
        assert!(chart.gradient_observable(&x, &[0.0, 1.0]).unwrap().abs() < 1e-8);
    }

    #[test]
    fn xi_is_unit_and_orthogonal_to_tangent() {
        let chart = hopf_chart();
        for m in 0..100 {
            let th = std::f64::consts::TAU * m as f64 / 100.0;
            let xi = chart.xi_at(th).unwrap();
            let tangent = chart.cycle_tangent_proj(th);
            let norm = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            assert!((norm - 1.0).abs() < 1e-10);
            let along = xi[0] * tangent[0] + xi[1] * tangent[1];
            assert!(along.abs() < 1e-10 * (1.0 + tangent[0].abs() + tangent[1].abs()));
        }
    }

    #[test]
    fn vdp_chart_is_star_shaped_and_consistent() {
        let model = builtin_model::<f64>("vdp").unwrap();
        let poly = poly_expand(&model).unwrap();
        // x1 ≈ 2cos θ, x2 = dx1/dt = -2ω sin θ, so c1 ≈ (1, iω)
        let seed = ellipse_seed(
            &[0.0, 0.0],
            &[Complex::new(1.0, 0.0), Complex::new(0.0, 1.0)],
            1.0,
        )
        .unwrap();
        let orbit =
            crate::cycle::continuation_solve(&poly, &[5, 10], &seed, &Default::default()).unwrap();
        let chart = build_chart(&orbit, (0, 1), &ChartOptions::default()).unwrap();
        // chart consistency: g(ϑ, 1) lands on the projected cycle
        let mut rng = SplitMix64::new(5);
        for _ in 0..50 {
            let th = rng.range(0.0, std::f64::consts::TAU);
            let a = chart.g_point(th, 1.0);
            let b = chart.cycle_point_proj(th);
            assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10);
        }
        // projecting out a coordinate annihilates off-plane tangents: a dx
        // supported outside the plane contributes nothing
        let x = chart.cycle_point_proj(1.0);
        let g = chart.gradient_observable(&x, &[0.0, 0.0]).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn bad_planes_are_rejected() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let poly = poly_expand(&model).unwrap();
        let seed = ellipse_seed(
            &[0.0, 0.0],
            &[Complex::new(0.45, 0.0), Complex::new(0.0, -0.45)],
            1.8,
        )
        .unwrap();
        let orbit = harmonic_balance(&poly, 1, &seed, &Default::default()).unwrap();
        assert!(build_chart(&orbit, (0, 0), &ChartOptions::default()).is_err());
        assert!(build_chart(&orbit, (0, 5), &ChartOptions::default()).is_err());
        let tiny = ChartOptions {
            table_size: 16,
            ..Default::default()
        };
        assert!(build_chart(&orbit, (0, 1), &tiny).is_err());
    }
}
