//! Truncated Fourier parametrization of the limit cycle: harmonic balance
//! for polynomial fields, integrate-and-fit otherwise, and the planar
//! Floquet-divergence formula.

pub mod reference;

use crate::error::{Error, Result};
use crate::flow::{self, IntegratorOptions};
use crate::fourier;
use crate::linalg::{self, Mat};
use crate::models::{Model, PolynomialField};
use crate::real::{norm2, Real};
use crate::Complex;

/// Truncated Fourier series of the limit cycle,
/// `x_γ(θ) = Σ_{|k| ≤ N} c_k e^{ikθ}` with `θ = ωt`.
///
/// Only `k = 0..=N` is stored; negative coefficients are the conjugates, so
/// conjugate symmetry (a real orbit) holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierOrbit<F> {
    dim: usize,
    omega: F,
    gauge: F,
    /// `coeffs[k][j]` for k = 0..=N, component j.
    coeffs: Vec<Vec<Complex<F>>>,
}

impl<F: Real> FourierOrbit<F> {
    pub fn new(omega: F, gauge: F, coeffs: Vec<Vec<Complex<F>>>) -> Result<Self> {
        if coeffs.is_empty() || coeffs[0].is_empty() {
            return Err(Error::InvalidInput("empty coefficient table".into()));
        }
        let dim = coeffs[0].len();
        if coeffs.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidInput("ragged coefficient table".into()));
        }
        if !(omega > F::zero()) {
            return Err(Error::InvalidInput("omega must be positive".into()));
        }
        let mut coeffs = coeffs;
        for c in coeffs[0].iter_mut() {
            c.im = F::zero(); // c_0 is real for a real orbit
        }
        Ok(Self {
            dim,
            omega,
            gauge,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Truncation order N.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn omega(&self) -> F {
        self.omega
    }

    pub fn period(&self) -> F {
        F::tau() / self.omega
    }

    pub fn gauge(&self) -> F {
        self.gauge
    }

    /// Coefficient `c_k` of component `j`; negative `k` returns the conjugate.
    pub fn coeff(&self, k: i64, j: usize) -> Complex<F> {
        let a = k.unsigned_abs() as usize;
        if a >= self.coeffs.len() {
            return Complex::new(F::zero(), F::zero());
        }
        let c = self.coeffs[a][j];
        if k < 0 {
            c.conj()
        } else {
            c
        }
    }

    /// Coefficients `c_0..c_N` of one component.
    pub fn component(&self, j: usize) -> Vec<Complex<F>> {
        self.coeffs.iter().map(|c| c[j]).collect()
    }

    /// `x_γ(θ)`.
    pub fn point(&self, theta: F) -> Vec<F> {
        let rot = Complex::new(theta.cos(), theta.sin());
        let mut e = rot;
        let mut x: Vec<F> = self.coeffs[0].iter().map(|c| c.re).collect();
        let two = F::of(2.0);
        for ck in self.coeffs.iter().skip(1) {
            for (xj, c) in x.iter_mut().zip(ck) {
                *xj += two * (c.re * e.re - c.im * e.im); // 2 Re(c e^{ikθ})
            }
            e = e * rot;
        }
        x
    }

    /// `dx_γ/dθ`.
    pub fn velocity(&self, theta: F) -> Vec<F> {
        let rot = Complex::new(theta.cos(), theta.sin());
        let mut e = rot;
        let mut v = vec![F::zero(); self.dim];
        let two = F::of(2.0);
        for (k, ck) in self.coeffs.iter().enumerate().skip(1) {
            let kf = F::of(k as f64);
            for (vj, c) in v.iter_mut().zip(ck) {
                // 2 Re(i k c e^{ikθ}) = -2k (c.im e.re + c.re e.im) ... expanded below
                *vj += two * kf * (-(c.im * e.re) - c.re * e.im);
            }
            e = e * rot;
        }
        v
    }

    /// Rotate the parametrization, `c_k -> c_k e^{ikδ}`; an exact symmetry of
    /// the harmonic-balance equations.
    pub fn rotate(&mut self, delta: F) {
        let rot = Complex::new(delta.cos(), delta.sin());
        let mut e = rot;
        for ck in self.coeffs.iter_mut().skip(1) {
            for c in ck.iter_mut() {
                *c = *c * e;
            }
            e = e * rot;
        }
    }

    /// Rotate so that `∠c_1^{(1)} = gauge`.
    pub fn apply_gauge(&mut self, gauge: F) -> Result<()> {
        let c1 = self.coeffs[1][0];
        if c1.norm() < F::of(1e-12) {
            return Err(Error::InvalidInput(
                "first harmonic of the first coordinate vanishes; the phase gauge is undefined"
                    .into(),
            ));
        }
        let delta = gauge - c1.im.atan2(c1.re);
        self.rotate(delta);
        self.gauge = gauge;
        Ok(())
    }

    /// Zero-pad (or truncate) to order `n`.
    pub fn resize(&self, n: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n + 1, vec![Complex::new(F::zero(), F::zero()); self.dim]);
        Self {
            dim: self.dim,
            omega: self.omega,
            gauge: self.gauge,
            coeffs,
        }
    }

    /// Serialize as the plain-text orbit format (17 significant digits,
    /// bit-exact round trip for f64).
    pub fn write(&self, out: &mut dyn std::io::Write) -> Result<()> {
        writeln!(out, "isokit-orbit v1")?;
        writeln!(out, "dim {}", self.dim)?;
        writeln!(out, "n {}", self.order())?;
        writeln!(out, "omega {:.16e}", self.omega.as_f64())?;
        writeln!(out, "gauge {:.16e}", self.gauge.as_f64())?;
        for (k, ck) in self.coeffs.iter().enumerate() {
            write!(out, "{k}")?;
            for c in ck {
                write!(out, " {:.16e} {:.16e}", c.re.as_f64(), c.im.as_f64())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read(input: &str) -> Result<Self> {
        let mut lines = input.lines().filter(|l| !l.trim().is_empty());
        let parse_err = |m: &str| Error::Parse(format!("orbit file: {m}"));
        let header = lines.next().ok_or_else(|| parse_err("empty file"))?;
        if header.trim() != "isokit-orbit v1" {
            return Err(parse_err("bad header"));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| parse_err(&format!("missing {name}")))?;
            let (key, value) = line
                .split_once(' ')
                .ok_or_else(|| parse_err(&format!("malformed {name} line")))?;
            if key != name {
                return Err(parse_err(&format!("expected {name}, found {key}")));
            }
            Ok(value.trim().to_string())
        };
        let dim: usize = field("dim")?
            .parse()
            .map_err(|_| parse_err("bad dim"))?;
        let n: usize = field("n")?.parse().map_err(|_| parse_err("bad n"))?;
        let omega: f64 = field("omega")?
            .parse()
            .map_err(|_| parse_err("bad omega"))?;
        let gauge: f64 = field("gauge")?
            .parse()
            .map_err(|_| parse_err("bad gauge"))?;
        let mut coeffs = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let line = lines
                .next()
                .ok_or_else(|| parse_err(&format!("missing row k = {k}")))?;
            let mut parts = line.split_whitespace();
            let kk: usize = parts
                .next()
                .ok_or_else(|| parse_err("empty row"))?
                .parse()
                .map_err(|_| parse_err("bad row index"))?;
            if kk != k {
                return Err(parse_err(&format!("row index {kk}, expected {k}")));
            }
            let mut row = Vec::with_capacity(dim);
            for _ in 0..dim {
                let re: f64 = parts
                    .next()
                    .ok_or_else(|| parse_err("short row"))?
                    .parse()
                    .map_err(|_| parse_err("bad float"))?;
                let im: f64 = parts
                    .next()
                    .ok_or_else(|| parse_err("short row"))?
                    .parse()
                    .map_err(|_| parse_err("bad float"))?;
                row.push(Complex::new(F::of(re), F::of(im)));
            }
            coeffs.push(row);
        }
        let mut orbit = Self::new(F::of(omega), F::of(gauge), coeffs)?;
        orbit.gauge = F::of(gauge);
        Ok(orbit)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HarmonicBalanceOptions<F> {
    /// Max-norm residual target.
    pub tol: F,
    pub max_iters: usize,
    /// Phase-gauge constant C fixing `∠c_1^{(1)}`.
    pub gauge: F,
}

impl<F: Real> Default for HarmonicBalanceOptions<F> {
    fn default() -> Self {
        Self {
            tol: F::of(1e-10),
            max_iters: 50,
            gauge: F::zero(),
        }
    }
}

/// Collocation grid size: exact Fourier coefficients up to `N` for a
/// polynomial field of degree `deg` need `M >= (deg+1) N + 1` samples.
fn collocation_size(deg: u32, n: usize) -> usize {
    fourier::next_pow2(((deg as usize + 1) * n + 1).max(4 * n + 4).max(64))
}

/// Complex harmonic-balance residual `iωk c_k − [F(x_γ)]_k` for k = 0..=N,
/// assembled by spectral collocation (sample, evaluate, transform).
pub fn collocation_residual<F: Real>(
    poly: &PolynomialField<F>,
    orbit: &FourierOrbit<F>,
) -> Vec<Vec<Complex<F>>> {
    let n_dim = poly.dim();
    let n = orbit.order();
    let m = collocation_size(poly.total_degree().max(1), n);
    let samples: Vec<Vec<F>> = (0..n_dim)
        .map(|j| fourier::samples_from_coeffs(&orbit.component(j), m))
        .collect();
    let mut fvals: Vec<Vec<F>> = vec![vec![F::zero(); m]; n_dim];
    let mut x = vec![F::zero(); n_dim];
    let mut fx = vec![F::zero(); n_dim];
    for s in 0..m {
        for j in 0..n_dim {
            x[j] = samples[j][s];
        }
        poly.eval_into(&x, &mut fx);
        for j in 0..n_dim {
            fvals[j][s] = fx[j];
        }
    }
    let i_omega = Complex::new(F::zero(), orbit.omega());
    (0..=n)
        .map(|k| {
            let kf = F::of(k as f64);
            (0..n_dim)
                .map(|j| {
                    let fk = fourier::coeffs_from_samples(&fvals[j], n)[k];
                    i_omega * kf * orbit.coeff(k as i64, j) - fk
                })
                .collect()
        })
        .collect()
}

// Real unknown vector layout: [ω, c_0^{(1..n)}, (Re c_k^{(j)}, Im c_k^{(j)})
// for k = 1..N, j = 1..n]. Residual layout: [gauge, k = 0 block (n reals),
// (Re, Im) blocks for k = 1..N].
struct Packing {
    dim: usize,
    order: usize,
}

impl Packing {
    fn len(&self) -> usize {
        1 + self.dim * (2 * self.order + 1)
    }

    fn unpack<F: Real>(&self, u: &[F]) -> (F, Vec<Vec<Complex<F>>>) {
        let omega = u[0];
        let mut coeffs = Vec::with_capacity(self.order + 1);
        coeffs.push(
            (0..self.dim)
                .map(|j| Complex::new(u[1 + j], F::zero()))
                .collect::<Vec<_>>(),
        );
        let mut pos = 1 + self.dim;
        for _ in 1..=self.order {
            let mut row = Vec::with_capacity(self.dim);
            for _ in 0..self.dim {
                row.push(Complex::new(u[pos], u[pos + 1]));
                pos += 2;
            }
            coeffs.push(row);
        }
        (omega, coeffs)
    }

    fn pack<F: Real>(&self, orbit: &FourierOrbit<F>) -> Vec<F> {
        let mut u = Vec::with_capacity(self.len());
        u.push(orbit.omega());
        for j in 0..self.dim {
            u.push(orbit.coeff(0, j).re);
        }
        for k in 1..=self.order {
            for j in 0..self.dim {
                let c = orbit.coeff(k as i64, j);
                u.push(c.re);
                u.push(c.im);
            }
        }
        u
    }
}

fn residual_vector<F: Real>(
    poly: &PolynomialField<F>,
    packing: &Packing,
    u: &[F],
    gauge: F,
) -> Vec<F> {
    let (omega, coeffs) = packing.unpack(u);
    // omega may legitimately pass through zero or negative values during
    // Newton iterations, so the validated constructor is bypassed here
    let orbit = FourierOrbit {
        dim: packing.dim,
        omega,
        gauge,
        coeffs,
    };
    let mut res = Vec::with_capacity(packing.len());
    let c1 = orbit.coeffs[1][0];
    let (sin_g, cos_g) = (gauge.sin(), gauge.cos());
    // Im{c_1^{(1)} e^{-iC}}
    res.push(c1.im * cos_g - c1.re * sin_g);
    let complex_res = collocation_residual(poly, &orbit);
    for j in 0..packing.dim {
        res.push(complex_res[0][j].re);
    }
    for rk in complex_res.iter().skip(1) {
        for c in rk {
            res.push(c.re);
            res.push(c.im);
        }
    }
    res
}

/// Solve the harmonic-balance equations at truncation `n` from a seed orbit.
pub fn harmonic_balance<F: Real>(
    poly: &PolynomialField<F>,
    n: usize,
    seed: &FourierOrbit<F>,
    opts: &HarmonicBalanceOptions<F>,
) -> Result<FourierOrbit<F>> {
    if seed.dim() != poly.dim() {
        return Err(Error::InvalidInput(
            "seed dimension does not match the field".into(),
        ));
    }
    if n < 1 {
        return Err(Error::InvalidInput("truncation order must be >= 1".into()));
    }
    let packing = Packing {
        dim: poly.dim(),
        order: n,
    };
    let mut u = packing.pack(&seed.resize(n));
    let fd_eps = F::epsilon().powf(F::of(1.0 / 3.0));
    let mut res = residual_vector(poly, &packing, &u, opts.gauge);
    let mut res_norm = crate::real::norm_inf(&res);
    let mut iters = 0usize;
    while res_norm > opts.tol {
        if iters >= opts.max_iters {
            return Err(Error::NewtonNoConvergence {
                iters,
                residual: res_norm.as_f64(),
            });
        }
        iters += 1;
        let dim = packing.len();
        let mut jac = Mat::zeros(dim, dim);
        let mut up = u.clone();
        for col in 0..dim {
            let h = fd_eps * (F::one() + u[col].abs());
            up[col] = u[col] + h;
            let rp = residual_vector(poly, &packing, &up, opts.gauge);
            up[col] = u[col] - h;
            let rm = residual_vector(poly, &packing, &up, opts.gauge);
            up[col] = u[col];
            let denom = F::of(2.0) * h;
            for row in 0..dim {
                jac[(row, col)] = (rp[row] - rm[row]) / denom;
            }
        }
        let mut step: Vec<F> = res.iter().map(|&r| -r).collect();
        linalg::lu_solve(&mut jac, &mut step)?;
        // damped update: halve until the residual decreases
        let mut lambda = F::one();
        let mut accepted = false;
        for _ in 0..9 {
            let trial: Vec<F> = u
                .iter()
                .zip(&step)
                .map(|(&ui, &si)| ui + lambda * si)
                .collect();
            let r_trial = residual_vector(poly, &packing, &trial, opts.gauge);
            let norm_trial = crate::real::norm_inf(&r_trial);
            if norm_trial.is_finite() && norm_trial < res_norm {
                u = trial;
                res = r_trial;
                res_norm = norm_trial;
                accepted = true;
                break;
            }
            lambda = lambda / F::of(2.0);
        }
        if !accepted {
            return Err(Error::NewtonNoConvergence {
                iters,
                residual: res_norm.as_f64(),
            });
        }
    }

    let (mut omega, mut coeffs) = packing.unpack(&u);
    if omega < F::zero() {
        // time-reversed parametrization; conjugating all coefficients maps it
        // back to a positive-frequency solution
        omega = -omega;
        for row in coeffs.iter_mut() {
            for c in row.iter_mut() {
                *c = c.conj();
            }
        }
    }
    // fixed-point solutions satisfy the equations but are not cycles
    let c0_scale = coeffs[0]
        .iter()
        .fold(F::zero(), |acc, c| acc.max(c.norm()));
    let higher = coeffs
        .iter()
        .skip(1)
        .flat_map(|row| row.iter())
        .fold(F::zero(), |acc, c| acc.max(c.norm()));
    if higher < F::of(1e-6) * (F::one() + c0_scale) {
        return Err(Error::FixedPointSolution);
    }
    let mut orbit = FourierOrbit::new(omega, opts.gauge, coeffs)?;
    orbit.apply_gauge(opts.gauge)?;
    Ok(orbit)
}

/// Harmonic balance through a schedule of increasing truncations; each stage
/// seeds the next, zero-padded.
pub fn continuation_solve<F: Real>(
    poly: &PolynomialField<F>,
    schedule: &[usize],
    seed: &FourierOrbit<F>,
    opts: &HarmonicBalanceOptions<F>,
) -> Result<FourierOrbit<F>> {
    if schedule.is_empty() {
        return Err(Error::InvalidInput("empty truncation schedule".into()));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "truncation schedule must be strictly increasing".into(),
        ));
    }
    let mut current = seed.clone();
    for &n in schedule {
        current = harmonic_balance(poly, n, &current, opts).map_err(|e| {
            Error::ContinuationStage {
                stage: n,
                source: Box::new(e),
            }
        })?;
    }
    Ok(current)
}

#[derive(Debug, Clone)]
pub struct OrbitIntegrationOptions<F> {
    /// Transient skip; when absent, `20/|λ₁ hint|` or 150 time units.
    pub t_skip: Option<F>,
    pub lambda1_hint: Option<F>,
    /// Budget for Poincaré-section returns after the transient.
    pub max_time: F,
    /// Resampling size (power of two); default grows with the truncation.
    pub n_samples: Option<usize>,
    pub jitter_tol: F,
    pub gauge: F,
    pub integ: IntegratorOptions<F>,
}

impl<F: Real> Default for OrbitIntegrationOptions<F> {
    fn default() -> Self {
        Self {
            t_skip: None,
            lambda1_hint: None,
            max_time: F::of(500.0),
            n_samples: None,
            jitter_tol: F::of(1e-5),
            gauge: F::zero(),
            integ: IntegratorOptions::adaptive(F::of(1e-10), F::of(1e-12)),
        }
    }
}

/// Fit a Fourier orbit by forward integration: skip the transient, detect
/// the period on a Poincaré section, resample one period uniformly and
/// transform.
pub fn orbit_from_integration<F: Real>(
    model: &Model<F>,
    x0: &[F],
    n: usize,
    opts: &OrbitIntegrationOptions<F>,
) -> Result<FourierOrbit<F>> {
    let t_skip = opts.t_skip.unwrap_or_else(|| match opts.lambda1_hint {
        Some(l1) => F::of(20.0) / l1.abs().max(F::of(1e-3)),
        None => F::of(150.0),
    });
    let anchor = flow::integrate_to(model, x0, t_skip, &opts.integ)?;
    let f_anchor = model.eval(&anchor);
    let f_norm = norm2(&f_anchor);
    if !(f_norm > F::of(1e-12)) {
        return Err(Error::PeriodDetection(
            "post-transient state sits at an equilibrium".into(),
        ));
    }
    let normal: Vec<F> = f_anchor.iter().map(|&v| v / f_norm).collect();

    let crossings = section_returns(model, &anchor, &normal, 4, opts)?;
    let periods: Vec<F> = crossings.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let mean_period =
        periods.iter().fold(F::zero(), |a, &b| a + b) / F::of(periods.len() as f64);
    let jitter = periods
        .iter()
        .fold(F::zero(), |a, &p| a.max((p - mean_period).abs()))
        / mean_period;
    if jitter > opts.jitter_tol {
        return Err(Error::TransientNotDecayed {
            jitter: jitter.as_f64(),
            tol: opts.jitter_tol.as_f64(),
        });
    }

    let m = opts
        .n_samples
        .map(fourier::next_pow2)
        .unwrap_or_else(|| fourier::next_pow2((8 * n).max(256)));
    if n >= m / 2 {
        return Err(Error::InvalidInput(format!(
            "resampling grid {m} too coarse for truncation {n}"
        )));
    }
    let start = crossings[0].1.clone();
    let sample_dt = mean_period / F::of(m as f64);
    let mut samples: Vec<Vec<F>> = vec![Vec::with_capacity(m + 1); model.dim()];
    let mut sys = flow::ModelSystem { model };
    flow::drive_sampled(
        &mut sys,
        &start,
        mean_period,
        sample_dt,
        &opts.integ,
        &mut |_t, x| {
            for (j, s) in samples.iter_mut().enumerate() {
                s.push(x[j]);
            }
        },
    )?;
    for s in samples.iter_mut() {
        s.truncate(m); // drop the duplicated endpoint
    }
    let coeffs_per_component: Vec<Vec<Complex<F>>> = samples
        .iter()
        .map(|s| fourier::coeffs_from_samples(s, n))
        .collect();
    let coeffs: Vec<Vec<Complex<F>>> = (0..=n)
        .map(|k| (0..model.dim()).map(|j| coeffs_per_component[j][k]).collect())
        .collect();
    let omega = F::tau() / mean_period;
    let mut orbit = FourierOrbit::new(omega, opts.gauge, coeffs)?;
    orbit.apply_gauge(opts.gauge)?;
    Ok(orbit)
}

/// A crude low-order orbit used to seed harmonic balance.
pub fn seed_orbit_from_integration<F: Real>(
    model: &Model<F>,
    x0: &[F],
    opts: &OrbitIntegrationOptions<F>,
) -> Result<FourierOrbit<F>> {
    let mut relaxed = opts.clone();
    relaxed.jitter_tol = opts.jitter_tol.max(F::of(1e-3));
    orbit_from_integration(model, x0, 1, &relaxed)
}

/// Positive transversal crossings of the hyperplane through `anchor` with
/// the given unit normal, refined by bisection. Returns `(time, state)` in
/// increasing time.
fn section_returns<F: Real>(
    model: &Model<F>,
    anchor: &[F],
    normal: &[F],
    count: usize,
    opts: &OrbitIntegrationOptions<F>,
) -> Result<Vec<(F, Vec<F>)>> {
    let side = |x: &[F]| -> F {
        x.iter()
            .zip(anchor)
            .zip(normal)
            .fold(F::zero(), |acc, ((&xi, &ai), &ni)| acc + ni * (xi - ai))
    };
    let dist = |x: &[F]| -> F {
        x.iter()
            .zip(anchor)
            .fold(F::zero(), |acc, (&xi, &ai)| acc + (xi - ai) * (xi - ai))
            .sqrt()
    };

    let mut crossings: Vec<(F, Vec<F>)> = Vec::new();
    let mut prev_t = F::zero();
    let mut prev_x = anchor.to_vec();
    let mut prev_s = F::zero();
    let mut armed = false;
    let mut max_dist = F::zero();
    let mut max_side = F::zero();

    let mut sys = flow::ModelSystem { model };
    let mut pending: Vec<(F, Vec<F>, F, Vec<F>)> = Vec::new();
    crate::flow::drive_sampled(
        &mut sys,
        anchor,
        opts.max_time,
        opts.max_time / F::of(200_000.0),
        &opts.integ,
        &mut |t, x| {
            if crossings.len() + pending.len() >= count {
                return;
            }
            let s = side(x);
            let d = dist(x);
            max_dist = max_dist.max(d);
            max_side = max_side.max(s.abs());
            if !armed {
                if s < -F::of(1e-3) * max_side && max_side > F::zero() {
                    armed = true;
                }
            } else if prev_s < F::zero()
                && s >= F::zero()
                && d < F::of(0.2) * max_dist.max(F::of(1e-12))
            {
                pending.push((prev_t, prev_x.clone(), t, x.to_vec()));
                armed = false;
            }
            prev_t = t;
            prev_x = x.to_vec();
            prev_s = s;
        },
    )
    .ok();

    for (t_lo, x_lo, t_hi, _x_hi) in pending {
        let (tc, xc) = refine_crossing(model, &x_lo, t_lo, t_hi - t_lo, &side, opts)?;
        crossings.push((tc, xc));
        if crossings.len() >= count {
            break;
        }
    }
    if crossings.len() < count {
        return Err(Error::PeriodDetection(format!(
            "only {} of {count} section returns within max_time = {}",
            crossings.len(),
            opts.max_time.as_f64()
        )));
    }
    Ok(crossings)
}

fn refine_crossing<F: Real>(
    model: &Model<F>,
    x_lo: &[F],
    t_lo: F,
    span: F,
    side: &dyn Fn(&[F]) -> F,
    opts: &OrbitIntegrationOptions<F>,
) -> Result<(F, Vec<F>)> {
    let mut lo = F::zero();
    let mut hi = span;
    let mut x_at = x_lo.to_vec();
    for _ in 0..80 {
        let mid = (lo + hi) / F::of(2.0);
        let x_mid = if mid > F::zero() {
            flow::integrate_to(model, x_lo, mid, &opts.integ)?
        } else {
            x_lo.to_vec()
        };
        if side(&x_mid) < F::zero() {
            lo = mid;
        } else {
            hi = mid;
            x_at = x_mid;
        }
        if (hi - lo) < F::of(1e-14) * (F::one() + t_lo + hi) {
            break;
        }
    }
    Ok((t_lo + hi, x_at))
}

/// Planar Floquet exponent: the time average of `div F` over the orbit,
/// computed spectrally as the k = 0 Fourier coefficient.
pub fn planar_floquet<F: Real>(
    poly: &PolynomialField<F>,
    orbit: &FourierOrbit<F>,
) -> Result<F> {
    if poly.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "planar Floquet formula needs dim = 2, got {}",
            poly.dim()
        )));
    }
    let n = orbit.order();
    let deg = poly.total_degree().max(1) as usize;
    let m = fourier::next_pow2(((deg.saturating_sub(1)) * n + 1).max(64));
    let samples: Vec<Vec<F>> = (0..2)
        .map(|j| fourier::samples_from_coeffs(&orbit.component(j), m))
        .collect();
    let mut jac = Mat::zeros(2, 2);
    let mut acc = F::zero();
    for s in 0..m {
        let x = [samples[0][s], samples[1][s]];
        poly.jacobian_into(&x, &mut jac);
        acc += jac[(0, 0)] + jac[(1, 1)];
    }
    Ok(acc / F::of(m as f64))
}

/// Independent residual verification: sample `x_γ` on an odd uniform grid
/// (`(deg+1)N + 1` points), evaluate `F`, transform with the naive DFT, and
/// return `max_k |iωk c_k − [F]_k|`.
pub fn verify_residual<F: Real>(poly: &PolynomialField<F>, orbit: &FourierOrbit<F>) -> F {
    let n = orbit.order();
    let deg = poly.total_degree().max(1) as usize;
    let m = (deg + 1) * n + 1;
    let zero = Complex::new(F::zero(), F::zero());
    let mut fvals: Vec<Vec<Complex<F>>> = vec![vec![zero; m]; poly.dim()];
    for s in 0..m {
        let theta = F::tau() * F::of(s as f64) / F::of(m as f64);
        let x = orbit.point(theta);
        let fx = poly.eval(&x);
        for j in 0..poly.dim() {
            fvals[j][s] = Complex::new(fx[j], F::zero());
        }
    }
    let scale = F::one() / F::of(m as f64);
    let mut worst = F::zero();
    for j in 0..poly.dim() {
        let spectrum = fourier::dft_naive(&fvals[j], false);
        for k in 0..=n {
            let fk = spectrum[k] * scale;
            let lhs = Complex::new(F::zero(), orbit.omega() * F::of(k as f64))
                * orbit.coeff(k as i64, j);
            worst = worst.max((lhs - fk).norm());
        }
    }
    worst
}

/// Max defect `‖ω x_γ'(θ) − F(x_γ(θ))‖` over the given phases.
pub fn orbit_defect<F: Real>(model: &Model<F>, orbit: &FourierOrbit<F>, thetas: &[F]) -> F {
    let mut worst = F::zero();
    for &theta in thetas {
        let x = orbit.point(theta);
        let v = orbit.velocity(theta);
        let f = model.eval(&x);
        let mut diff = F::zero();
        for j in 0..model.dim() {
            let d = orbit.omega() * v[j] - f[j];
            diff += d * d;
        }
        worst = worst.max(diff.sqrt());
    }
    worst
}

/// An elliptical single-harmonic orbit. Convenience seed constructor.
pub fn ellipse_seed<F: Real>(
    center: &[F],
    c1: &[Complex<F>],
    omega: F,
) -> Result<FourierOrbit<F>> {
    let coeffs = vec![
        center
            .iter()
            .map(|&c| Complex::new(c, F::zero()))
            .collect::<Vec<_>>(),
        c1.to_vec(),
    ];
    FourierOrbit::new(omega, F::zero(), coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_model, poly_expand};
    use crate::testing::SplitMix64;

    fn hopf_seed() -> FourierOrbit<f64> {
        // slightly wrong circle: radius 0.8, omega 1.7
        ellipse_seed(
            &[0.05, -0.03],
            &[Complex::new(0.4, 0.0), Complex::new(0.0, -0.4)],
            1.7,
        )
        .unwrap()
    }

    #[test]
    fn radial_hopf_harmonic_balance_is_exact_at_order_one() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let poly = poly_expand(&model).unwrap();
        let orbit =
            harmonic_balance(&poly, 1, &hopf_seed(), &HarmonicBalanceOptions::default()).unwrap();
        assert!((orbit.omega() - 2.0).abs() < 1e-9, "omega = {}", orbit.omega());
        let c1 = orbit.coeff(1, 0);
        let c2 = orbit.coeff(1, 1);
        assert!((c1.re - 0.5).abs() < 1e-9 && c1.im.abs() < 1e-10);
        assert!(c2.re.abs() < 1e-9 && (c2.im + 0.5).abs() < 1e-9);
        assert!(orbit.coeff(0, 0).norm() < 1e-9);
        // x_γ(θ) is real and on the unit circle
        let x = orbit.point(0.7);
        assert!((x[0] - 0.7f64.cos()).abs() < 1e-9);
        assert!((x[1] - 0.7f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn continuation_keeps_higher_harmonics_empty_for_the_circle() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let poly = poly_expand(&model).unwrap();
        let orbit =
            continuation_solve(&poly, &[1, 3], &hopf_seed(), &HarmonicBalanceOptions::default())
                .unwrap();
        for k in 2..=3 {
            for j in 0..2 {
                assert!(orbit.coeff(k, j).norm() < 1e-12);
            }
        }
        // degenerate schedule equals a direct solve
        let direct =
            harmonic_balance(&poly, 3, &hopf_seed(), &HarmonicBalanceOptions::default()).unwrap();
        let chain =
            continuation_solve(&poly, &[3], &hopf_seed(), &HarmonicBalanceOptions::default())
                .unwrap();
        assert!((direct.omega() - chain.omega()).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_solutions_are_rejected() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let poly = poly_expand(&model).unwrap();
        // microscopic seed collapses onto the origin equilibrium
        let seed = ellipse_seed(
            &[0.0, 0.0],
            &[Complex::new(1e-9, 0.0), Complex::new(0.0, -1e-9)],
            2.0,
        )
        .unwrap();
        let err = harmonic_balance(&poly, 1, &seed, &HarmonicBalanceOptions::default());
        assert!(
            matches!(err, Err(Error::FixedPointSolution)),
            "got {err:?}"
        );
    }

    #[test]
    fn invalid_schedules_are_rejected() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let poly = poly_expand(&model).unwrap();
        assert!(continuation_solve(&poly, &[], &hopf_seed(), &Default::default()).is_err());
        assert!(continuation_solve(&poly, &[3, 3], &hopf_seed(), &Default::default()).is_err());
    }

    #[test]
    fn residual_and_defect_of_converged_orbit_are_tiny() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let poly = poly_expand(&model).unwrap();
        let opts = HarmonicBalanceOptions {
            tol: 1e-11,
            ..Default::default()
        };
        let orbit = harmonic_balance(&poly, 3, &hopf_seed(), &opts).unwrap();
        assert!(verify_residual(&poly, &orbit) < 1e-11);
        let mut rng = SplitMix64::new(3);
        let thetas: Vec<f64> = (0..100)
            .map(|_| rng.range(0.0, 2.0 * std::f64::consts::PI))
            .collect();
        assert!(orbit_defect(&model, &orbit, &thetas) < 1e-10);
    }

    #[test]
    fn orbit_from_integration_recovers_the_circle() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let opts = OrbitIntegrationOptions {
            t_skip: Some(20.0),
            max_time: 50.0,
            ..Default::default()
        };
        let orbit = orbit_from_integration(&model, &[1.7, 0.2], 8, &opts).unwrap();
        assert!((orbit.omega() - 2.0).abs() < 1e-6, "omega = {}", orbit.omega());
        for k in 2..=8 {
            for j in 0..2 {
                assert!(
                    orbit.coeff(k, j).norm() < 1e-8,
                    "c_{k} = {:?}",
                    orbit.coeff(k, j)
                );
            }
        }
        // gauge: ∠c_1^{(1)} = 0
        let c1 = orbit.coeff(1, 0);
        assert!(c1.im.abs() < 1e-10 * c1.norm().max(1e-30));
    }

    #[test]
    fn planar_floquet_of_radial_hopf() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let poly = poly_expand(&model).unwrap();
        let orbit =
            harmonic_balance(&poly, 2, &hopf_seed(), &HarmonicBalanceOptions::default()).unwrap();
        let lambda = planar_floquet(&poly, &orbit).unwrap();
        assert!((lambda + 2.0).abs() < 1e-9, "lambda = {lambda}");
        // dim != 2 errors
        let vdp3d = builtin_model::<f64>("vdp3d").unwrap();
        let poly3 = poly_expand(&vdp3d).unwrap();
        assert!(planar_floquet(&poly3, &orbit).is_err());
    }

    #[test]
    fn orbit_text_round_trip_is_bit_exact() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let poly = poly_expand(&model).unwrap();
        let orbit =
            harmonic_balance(&poly, 2, &hopf_seed(), &HarmonicBalanceOptions::default()).unwrap();
        let mut buf = Vec::new();
        orbit.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back = FourierOrbit::<f64>::read(&text).unwrap();
        assert_eq!(orbit.omega().to_bits(), back.omega().to_bits());
        for k in 0..=2i64 {
            for j in 0..2 {
                assert_eq!(orbit.coeff(k, j).re.to_bits(), back.coeff(k, j).re.to_bits());
                assert_eq!(orbit.coeff(k, j).im.to_bits(), back.coeff(k, j).im.to_bits());
            }
        }
    }

    #[test]
    fn velocity_matches_finite_difference_of_point() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let poly = poly_expand(&model).unwrap();
        let orbit =
            harmonic_balance(&poly, 3, &hopf_seed(), &HarmonicBalanceOptions::default()).unwrap();
        let h = 1e-6;
        for &theta in &[0.0, 0.9, 2.5, 5.0] {
            let plus = orbit.point(theta + h);
            let minus = orbit.point(theta - h);
            let v = orbit.velocity(theta);
            for j in 0..2 {
                let fd = (plus[j] - minus[j]) / (2.0 * h);
                assert!((v[j] - fd).abs() < 1e-7);
            }
        }
    }
}
