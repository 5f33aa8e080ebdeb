//! Forward integration of the base and prolonged (variational) systems, and
//! the Koopman/Floquet spectrum extracted from the monodromy matrix.

use crate::cycle::FourierOrbit;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::models::Model;
use crate::real::{dot, norm2, norm_inf, Real};
use crate::Complex;

/// Right-hand side of an ODE; `&mut self` so implementations can keep scratch.
pub trait OdeSystem<F: Real> {
    fn dim(&self) -> usize;
    fn eval(&mut self, t: F, x: &[F], dxdt: &mut [F]);
}

/// Plain model dynamics.
pub struct ModelSystem<'a, F> {
    pub model: &'a Model<F>,
}

impl<F: Real> OdeSystem<F> for ModelSystem<'_, F> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn eval(&mut self, _t: F, x: &[F], dxdt: &mut [F]) {
        self.model.eval_into(x, dxdt);
    }
}

/// Model dynamics plus an additive input `G(x, t)`.
pub struct ForcedSystem<'a, F> {
    pub model: &'a Model<F>,
    pub input: &'a dyn Fn(&[F], F, &mut [F]),
}

impl<F: Real> OdeSystem<F> for ForcedSystem<'_, F> {
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn eval(&mut self, t: F, x: &[F], dxdt: &mut [F]) {
        self.model.eval_into(x, dxdt);
        (self.input)(x, t, dxdt);
    }
}

/// State plus one tangent vector: `x' = F(x)`, `δ' = J(x) δ`.
pub struct TangentSystem<'a, F: Real> {
    model: &'a Model<F>,
    jac: Mat<F>,
}

impl<'a, F: Real> TangentSystem<'a, F> {
    pub fn new(model: &'a Model<F>) -> Self {
        let n = model.dim();
        Self {
            model,
            jac: Mat::zeros(n, n),
        }
    }
}

impl<F: Real> OdeSystem<F> for TangentSystem<'_, F> {
    fn dim(&self) -> usize {
        2 * self.model.dim()
    }
    fn eval(&mut self, _t: F, x: &[F], dxdt: &mut [F]) {
        let n = self.model.dim();
        self.model.eval_into(&x[..n], &mut dxdt[..n]);
        self.model.jacobian_into(&x[..n], &mut self.jac);
        for i in 0..n {
            let mut acc = F::zero();
            for j in 0..n {
                acc += self.jac[(i, j)] * x[n + j];
            }
            dxdt[n + i] = acc;
        }
    }
}

/// State plus the full fundamental matrix (row-major): `M' = J(x) M`.
pub struct MatrixSystem<'a, F: Real> {
    model: &'a Model<F>,
    jac: Mat<F>,
}

impl<'a, F: Real> MatrixSystem<'a, F> {
    pub fn new(model: &'a Model<F>) -> Self {
        let n = model.dim();
        Self {
            model,
            jac: Mat::zeros(n, n),
        }
    }

    /// `[x0, vec(I)]`, the prolonged initial condition.
    pub fn initial_state(model: &Model<F>, x0: &[F]) -> Vec<F> {
        let n = model.dim();
        let mut y = vec![F::zero(); n + n * n];
        y[..n].copy_from_slice(x0);
        for i in 0..n {
            y[n + i * n + i] = F::one();
        }
        y
    }
}

impl<F: Real> OdeSystem<F> for MatrixSystem<'_, F> {
    fn dim(&self) -> usize {
        let n = self.model.dim();
        n + n * n
    }
    fn eval(&mut self, _t: F, x: &[F], dxdt: &mut [F]) {
        let n = self.model.dim();
        self.model.eval_into(&x[..n], &mut dxdt[..n]);
        self.model.jacobian_into(&x[..n], &mut self.jac);
        let m = &x[n..];
        for i in 0..n {
            for j in 0..n {
                let mut acc = F::zero();
                for k in 0..n {
                    acc += self.jac[(i, k)] * m[k * n + j];
                }
                dxdt[n + i * n + j] = acc;
            }
        }
    }
}

/// Stepper selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMethod<F> {
    /// Embedded Dormand-Prince 5(4), adaptive.
    DormandPrince { rtol: F, atol: F },
    /// Fixed-step classic RK4 (cheap grid-sweep profile).
    FixedRk4 { dt: F },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions<F> {
    pub method: StepMethod<F>,
    pub escape_radius: F,
    pub max_steps: usize,
}

impl<F: Real> IntegratorOptions<F> {
    pub fn adaptive(rtol: F, atol: F) -> Self {
        Self {
            method: StepMethod::DormandPrince { rtol, atol },
            ..Self::default()
        }
    }

    pub fn fixed(dt: F) -> Self {
        Self {
            method: StepMethod::FixedRk4 { dt },
            ..Self::default()
        }
    }

    /// Tight profile for spectrum-grade integrations.
    pub fn tight() -> Self {
        Self::adaptive(F::of(1e-12), F::of(1e-14))
    }
}

impl<F: Real> Default for IntegratorOptions<F> {
    fn default() -> Self {
        Self {
            method: StepMethod::DormandPrince {
                rtol: F::of(1e-9),
                atol: F::of(1e-11),
            },
            escape_radius: F::of(1e6),
            max_steps: 500_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Dp54<F> {
    k: [Vec<F>; 7],
    y_stage: Vec<F>,
    rtol: F,
    atol: F,
    fsal_valid: bool,
}

impl<F: Real> Dp54<F> {
    fn new(dim: usize, rtol: F, atol: F) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![F::zero(); dim]),
            y_stage: vec![F::zero(); dim],
            rtol,
            atol,
            fsal_valid: false,
        }
    }

    /// One attempted step from `(t, y)` with size `h`. On success writes
    /// `y_new` and returns the weighted error norm.
    fn try_step<S: OdeSystem<F>>(
        &mut self,
        sys: &mut S,
        t: F,
        y: &[F],
        h: F,
        y_new: &mut [F],
    ) -> F {
        let dim = y.len();
        if !self.fsal_valid {
            let mut k0 = std::mem::take(&mut self.k[0]);
            sys.eval(t, y, &mut k0);
            self.k[0] = k0;
        }
        for stage in 0..6 {
            for i in 0..dim {
                let mut acc = F::zero();
                for (j, row) in DP_A[stage].iter().enumerate().take(stage + 1) {
                    acc += F::of(*row) * self.k[j][i];
                }
                self.y_stage[i] = y[i] + h * acc;
            }
            let ts = t + F::of(DP_C[stage]) * h;
            let mut ks = std::mem::take(&mut self.k[stage + 1]);
            sys.eval(ts, &self.y_stage, &mut ks);
            self.k[stage + 1] = ks;
        }
        // 5th-order solution is the last stage input (FSAL pair)
        y_new.copy_from_slice(&self.y_stage);
        let mut err_acc = F::zero();
        for i in 0..dim {
            let mut e = F::zero();
            for (j, w) in DP_ERR.iter().enumerate() {
                e += F::of(*w) * self.k[j][i];
            }
            e = e * h;
            let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            let r = e / scale;
            err_acc += r * r;
        }
        (err_acc / F::of(dim as f64)).sqrt()
    }

    fn accept(&mut self) {
        self.k.swap(0, 6);
        self.fsal_valid = true;
    }
}

/// Drives a system from `t0` to `t0 + span`, invoking `sink` at the initial
/// point, at every accepted step (or fixed substep), and exactly at
/// `checkpoints` (strictly increasing offsets from `t0`, ending at `span`).
/// Returns the final state.
fn drive<F: Real, S: OdeSystem<F>>(
    sys: &mut S,
    x0: &[F],
    t0: F,
    span: F,
    checkpoints: Option<&[F]>,
    opts: &IntegratorOptions<F>,
    sink: &mut dyn FnMut(F, &[F]),
) -> Result<Vec<F>> {
    let dim = sys.dim();
    assert_eq!(x0.len(), dim);
    let mut y = x0.to_vec();
    sink(t0, &y);
    if span <= F::zero() {
        return Ok(y);
    }

    let escape = |y: &[F], t: F, radius: F| -> Result<()> {
        if norm_inf(y) > radius {
            Err(Error::Escaped {
                time: t.as_f64(),
                radius: radius.as_f64(),
            })
        } else if y.iter().any(|v| !v.is_finite()) {
            Err(Error::Escaped {
                time: t.as_f64(),
                radius: radius.as_f64(),
            })
        } else {
            Ok(())
        }
    };

    match opts.method {
        StepMethod::FixedRk4 { dt } => {
            let mut k1 = vec![F::zero(); dim];
            let mut k2 = vec![F::zero(); dim];
            let mut k3 = vec![F::zero(); dim];
            let mut k4 = vec![F::zero(); dim];
            let mut ytmp = vec![F::zero(); dim];
            let mut steps = 0usize;
            // segment endpoints: checkpoints if given, else one segment
            let segments: Vec<F> = match checkpoints {
                Some(cp) => cp.to_vec(),
                None => vec![span],
            };
            let mut seg_start = F::zero();
            for &seg_end in &segments {
                let seg = seg_end - seg_start;
                if seg <= F::zero() {
                    sink(t0 + seg_end, &y);
                    continue;
                }
                let nsub = (seg / dt).as_f64().ceil().max(1.0) as usize;
                let h = seg / F::of(nsub as f64);
                let half = h / F::of(2.0);
                for s in 0..nsub {
                    let t = t0 + seg_start + F::of(s as f64) * h;
                    sys.eval(t, &y, &mut k1);
                    for i in 0..dim {
                        ytmp[i] = y[i] + half * k1[i];
                    }
                    sys.eval(t + half, &ytmp, &mut k2);
                    for i in 0..dim {
                        ytmp[i] = y[i] + half * k2[i];
                    }
                    sys.eval(t + half, &ytmp, &mut k3);
                    for i in 0..dim {
                        ytmp[i] = y[i] + h * k3[i];
                    }
                    sys.eval(t + h, &ytmp, &mut k4);
                    let sixth = h / F::of(6.0);
                    let two = F::of(2.0);
                    for i in 0..dim {
                        y[i] += sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
                    }
                    steps += 1;
                    if steps > opts.max_steps {
                        return Err(Error::StepLimit(opts.max_steps));
                    }
                    escape(&y, t + h, opts.escape_radius)?;
                    // interior substeps are not reported in checkpoint mode
                    if checkpoints.is_none() {
                        sink(t + h, &y);
                    }
                }
                if checkpoints.is_some() {
                    sink(t0 + seg_end, &y);
                }
                seg_start = seg_end;
            }
            Ok(y)
        }
        StepMethod::DormandPrince { rtol, atol } => {
            let mut dp = Dp54::new(dim, rtol, atol);
            let mut y_new = vec![F::zero(); dim];
            let mut t = F::zero(); // offset from t0
            let mut cp_idx = 0usize;

            // initial step guess
            let mut f0 = vec![F::zero(); dim];
            sys.eval(t0, &y, &mut f0);
            let scale = F::one() + norm_inf(&y);
            let mut h = (F::of(0.01) * scale / (F::one() + norm_inf(&f0)))
                .min(span / F::of(10.0))
                .max(F::of(1e-9) * span);

            let mut steps = 0usize;
            while t < span {
                let next_stop = match checkpoints {
                    Some(cp) => cp[cp_idx],
                    None => span,
                };
                let remaining = next_stop - t;
                let mut h_try = h.min(remaining);
                let at_stop_step = h_try >= remaining - F::of(1e-14) * span.max(F::one());
                if at_stop_step {
                    h_try = remaining;
                }
                let err = dp.try_step(sys, t0 + t, &y, h_try, &mut y_new);
                steps += 1;
                if steps > opts.max_steps {
                    return Err(Error::StepLimit(opts.max_steps));
                }
                let finite = err.is_finite() && y_new.iter().all(|v| v.is_finite());
                if finite && err <= F::one() {
                    t = if at_stop_step { next_stop } else { t + h_try };
                    y.copy_from_slice(&y_new);
                    dp.accept();
                    escape(&y, t0 + t, opts.escape_radius)?;
                    match checkpoints {
                        None => sink(t0 + t, &y),
                        Some(cp) => {
                            if at_stop_step {
                                sink(t0 + t, &y);
                                cp_idx += 1;
                                if cp_idx >= cp.len() {
                                    break;
                                }
                            }
                        }
                    }
                    let grow = F::of(0.9) * err.max(F::of(1e-10)).powf(F::of(-0.2));
                    h = h_try * grow.min(F::of(5.0)).max(F::of(0.2));
                } else {
                    let shrink = if finite {
                        (F::of(0.9) * err.powf(F::of(-0.2))).max(F::of(0.2))
                    } else {
                        F::of(0.25)
                    };
                    h = h_try * shrink;
                    dp.fsal_valid = false;
                    if h < F::of(1e-14) * span.max(F::one()) {
                        return Err(Error::StepLimit(steps));
                    }
                }
            }
            Ok(y)
        }
    }
}

/// Trajectory samples: strictly increasing times with states stored flat.
#[derive(Debug, Clone)]
pub struct Trajectory<F> {
    dim: usize,
    times: Vec<F>,
    states: Vec<F>,
}

impl<F: Real> Trajectory<F> {
    fn with_capacity(dim: usize, cap: usize) -> Self {
        Self {
            dim,
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap * dim),
        }
    }

    fn push(&mut self, t: F, x: &[F]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn time(&self, i: usize) -> F {
        self.times[i]
    }

    pub fn times(&self) -> &[F] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[F] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[F] {
        self.state(self.len() - 1)
    }

    /// CSV export with header `t,x1,...,xn`.
    pub fn write_csv(&self, out: &mut dyn std::io::Write) -> Result<()> {
        write!(out, "t")?;
        for j in 0..self.dim {
            write!(out, ",x{}", j + 1)?;
        }
        writeln!(out)?;
        for i in 0..self.len() {
            write!(out, "{:.16e}", self.time(i).as_f64())?;
            for v in self.state(i) {
                write!(out, ",{:.16e}", v.as_f64())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Prolonged trajectory: states plus fundamental matrices `M(t)`.
#[derive(Debug, Clone)]
pub struct ProlongedTrajectory<F> {
    dim: usize,
    times: Vec<F>,
    states: Vec<F>,
    fundamentals: Vec<F>,
}

impl<F: Real> ProlongedTrajectory<F> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn time(&self, i: usize) -> F {
        self.times[i]
    }

    pub fn state(&self, i: usize) -> &[F] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn fundamental(&self, i: usize) -> Mat<F> {
        let nn = self.dim * self.dim;
        Mat::from_flat(
            self.dim,
            self.dim,
            self.fundamentals[i * nn..(i + 1) * nn].to_vec(),
        )
    }
}

/// Integrate `x' = F(x)`, recording every accepted step.
pub fn integrate<F: Real>(
    model: &Model<F>,
    x0: &[F],
    t_end: F,
    opts: &IntegratorOptions<F>,
) -> Result<Trajectory<F>> {
    let mut sys = ModelSystem { model };
    let mut traj = Trajectory::with_capacity(model.dim(), 1024);
    drive(&mut sys, x0, F::zero(), t_end, None, opts, &mut |t, x| {
        traj.push(t, x)
    })?;
    Ok(traj)
}

/// Integrate, recording states exactly at `k * sample_dt` for
/// `k = 0..=round(t_end/sample_dt)`.
pub fn integrate_sampled<F: Real>(
    model: &Model<F>,
    x0: &[F],
    t_end: F,
    sample_dt: F,
    opts: &IntegratorOptions<F>,
) -> Result<Trajectory<F>> {
    let mut sys = ModelSystem { model };
    let checkpoints = sample_grid(t_end, sample_dt)?;
    let mut traj = Trajectory::with_capacity(model.dim(), checkpoints.len() + 1);
    drive(
        &mut sys,
        x0,
        F::zero(),
        *checkpoints.last().unwrap(),
        Some(&checkpoints),
        opts,
        &mut |t, x| traj.push(t, x),
    )?;
    Ok(traj)
}

pub(crate) fn sample_grid<F: Real>(t_end: F, sample_dt: F) -> Result<Vec<F>> {
    if !(sample_dt > F::zero()) || !(t_end > F::zero()) {
        return Err(Error::InvalidInput(
            "sample_dt and t_end must be positive".into(),
        ));
    }
    let n = (t_end / sample_dt).as_f64().round().max(1.0) as usize;
    Ok((1..=n).map(|k| F::of(k as f64) * sample_dt).collect())
}

/// Integrate without recording; returns the final state.
pub fn integrate_to<F: Real>(
    model: &Model<F>,
    x0: &[F],
    t_end: F,
    opts: &IntegratorOptions<F>,
) -> Result<Vec<F>> {
    let mut sys = ModelSystem { model };
    drive(&mut sys, x0, F::zero(), t_end, None, opts, &mut |_, _| {})
}

/// Streaming driver used by the averaging routines: `sink` receives the
/// state of `sys` exactly at every multiple of `sample_dt` (including zero).
pub(crate) fn drive_sampled<F: Real, S: OdeSystem<F>>(
    sys: &mut S,
    x0: &[F],
    t_end: F,
    sample_dt: F,
    opts: &IntegratorOptions<F>,
    sink: &mut dyn FnMut(F, &[F]),
) -> Result<Vec<F>> {
    let checkpoints = sample_grid(t_end, sample_dt)?;
    drive(
        sys,
        x0,
        F::zero(),
        *checkpoints.last().unwrap(),
        Some(&checkpoints),
        opts,
        sink,
    )
}

/// Integrate the prolonged system, recording every accepted step.
pub fn integrate_prolonged<F: Real>(
    model: &Model<F>,
    x0: &[F],
    t_end: F,
    opts: &IntegratorOptions<F>,
) -> Result<ProlongedTrajectory<F>> {
    let n = model.dim();
    let mut sys = MatrixSystem::new(model);
    let y0 = MatrixSystem::initial_state(model, x0);
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut fundamentals = Vec::new();
    drive(&mut sys, &y0, F::zero(), t_end, None, opts, &mut |t, y| {
        times.push(t);
        states.extend_from_slice(&y[..n]);
        fundamentals.extend_from_slice(&y[n..]);
    })?;
    Ok(ProlongedTrajectory {
        dim: n,
        times,
        states,
        fundamentals,
    })
}

/// Monodromy matrix `M(T)` over one period from `x0`.
pub fn monodromy<F: Real>(
    model: &Model<F>,
    x0: &[F],
    period: F,
    opts: &IntegratorOptions<F>,
) -> Result<Mat<F>> {
    let n = model.dim();
    let mut sys = MatrixSystem::new(model);
    let y0 = MatrixSystem::initial_state(model, x0);
    let y = drive(&mut sys, &y0, F::zero(), period, None, opts, &mut |_, _| {})?;
    Ok(Mat::from_flat(n, n, y[n..].to_vec()))
}

/// Principal Koopman eigenvalues of the cycle: frequency and the nontrivial
/// Floquet exponents, sorted by descending real part.
#[derive(Debug, Clone)]
pub struct KoopmanSpectrum<F> {
    pub omega: F,
    pub period: F,
    pub floquet: Vec<Complex<F>>,
}

impl<F: Real> KoopmanSpectrum<F> {
    pub fn lambda1(&self) -> Complex<F> {
        self.floquet[0]
    }

    /// Decay rate of the dominant amplitude coordinate, `Re Λ₁`.
    pub fn sigma(&self) -> F {
        self.floquet[0].re
    }
}

/// Floquet exponents from the monodromy matrix of a converged orbit.
///
/// Integrates the prolonged system over one period from `x_γ(0)`, discards
/// the trivial multiplier (closest to 1), and maps the rest through the
/// principal branch `Λ = log(μ) ω / 2π`, enforcing conjugate symmetry.
///
/// Multipliers below ~1e-6 are numerically unresolvable in the forward
/// monodromy (they sit at the eigensolver's noise floor); those exponents are
/// recovered from the reversed variational flow along the fitted orbit,
/// where the same modes appear as the dominant, well-conditioned ones.
pub fn floquet_spectrum<F: Real>(
    model: &Model<F>,
    orbit: &FourierOrbit<F>,
    opts: &IntegratorOptions<F>,
) -> Result<KoopmanSpectrum<F>> {
    let omega = orbit.omega();
    let period = orbit.period();
    let x0 = orbit.point(F::zero());
    let m = monodromy(model, &x0, period, opts)?;
    let mus = linalg::eigenvalues(&m)?;

    let trivial = mus
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let da = (*a - Complex::new(F::one(), F::zero())).norm();
            let db = (*b - Complex::new(F::one(), F::zero())).norm();
            da.partial_cmp(&db).unwrap()
        })
        .map(|(i, _)| i)
        .expect("nonzero dimension");
    let dist = (mus[trivial] - Complex::new(F::one(), F::zero())).norm();
    if dist > F::of(0.05) {
        return Err(Error::PeriodInconsistency {
            closest: dist.as_f64(),
            tol: 0.05,
        });
    }

    let scale = omega / F::tau();
    let cutoff = F::of(1e-6);
    let mut floquet: Vec<Complex<F>> = Vec::with_capacity(mus.len() - 1);
    let mut n_tiny = 0usize;
    for (i, mu) in mus.iter().enumerate() {
        if i == trivial {
            continue;
        }
        if mu.norm() >= F::one() {
            return Err(Error::NotNormallyHyperbolic {
                modulus: mu.norm().as_f64(),
            });
        }
        if mu.norm() < cutoff {
            n_tiny += 1;
        } else {
            floquet.push(mu.ln() * scale);
        }
    }
    if n_tiny > 0 {
        floquet.extend(fast_subspace_exponents(model, orbit, n_tiny, opts)?);
    }
    symmetrize_conjugate_pairs(&mut floquet);
    sort_by_descending_re(&mut floquet);
    Ok(KoopmanSpectrum {
        omega,
        period,
        floquet,
    })
}

/// Exponents of the `k` fastest-decaying Floquet modes via the adjoint
/// variational flow `y' = -J(x)ᵀ y` along the forward trajectory, with
/// segmented QR rescaling.
///
/// The adjoint period map is `M⁻ᵀ`, whose dominant (well-conditioned)
/// eigenvalues are `1/μ` for the fastest forward multipliers — the ones that
/// underflow in the forward monodromy. A rolling orthonormal `k`-frame is
/// renormalized every segment so transient nonnormal growth cannot overflow,
/// while the in-frame `k×k` transition product is accumulated over one
/// period after a warmup that lets the frame converge onto the fast left
/// invariant subspace.
fn fast_subspace_exponents<F: Real>(
    model: &Model<F>,
    orbit: &FourierOrbit<F>,
    k: usize,
    opts: &IntegratorOptions<F>,
) -> Result<Vec<Complex<F>>> {
    struct AdjointFrame<'a, F: Real> {
        model: &'a Model<F>,
        jac: Mat<F>,
        k: usize,
    }
    impl<F: Real> OdeSystem<F> for AdjointFrame<'_, F> {
        fn dim(&self) -> usize {
            self.model.dim() * (1 + self.k)
        }
        // state [x; y_1; ...; y_k]: x' = F(x), y_c' = -J(x)ᵀ y_c
        fn eval(&mut self, _t: F, y: &[F], dydt: &mut [F]) {
            let n = self.model.dim();
            self.model.eval_into(&y[..n], &mut dydt[..n]);
            self.model.jacobian_into(&y[..n], &mut self.jac);
            for c in 1..=self.k {
                let v = &y[c * n..(c + 1) * n];
                for i in 0..n {
                    let mut acc = F::zero();
                    for j in 0..n {
                        acc += self.jac[(j, i)] * v[j];
                    }
                    dydt[c * n + i] = -acc;
                }
            }
        }
    }

    let n = model.dim();
    let period = orbit.period();
    let segments = 64usize;
    let warmup_periods = 2usize;
    let seg_len = period / F::of(segments as f64);

    let mut sys = AdjointFrame {
        model,
        jac: Mat::zeros(n, n),
        k,
    };
    let mut o = *opts;
    o.escape_radius = F::max_value().sqrt();

    let mut x = orbit.point(F::zero());
    let mut q: Vec<Vec<F>> = (0..k)
        .map(|c| {
            let mut col = vec![F::zero(); n];
            col[c % n] = F::one();
            if k > 1 {
                col[(c + 1) % n] = F::of(0.25); // break symmetry
            }
            col
        })
        .collect();
    orthonormalize(&mut q, &mut Mat::zeros(k, k));

    let mut product = Mat::identity(k);
    let mut log_scale = F::zero();
    let mut q_anchor: Option<Vec<Vec<F>>> = None;
    let total_segments = segments * (warmup_periods + 1);
    for seg in 0..total_segments {
        let accumulating = seg >= segments * warmup_periods;
        if accumulating && q_anchor.is_none() {
            q_anchor = Some(q.clone());
        }
        let mut y0 = vec![F::zero(); n * (1 + k)];
        y0[..n].copy_from_slice(&x);
        for (c, col) in q.iter().enumerate() {
            y0[(c + 1) * n..(c + 2) * n].copy_from_slice(col);
        }
        let y = drive(&mut sys, &y0, F::zero(), seg_len, None, &o, &mut |_, _| {})?;
        x.copy_from_slice(&y[..n]);
        for (c, col) in q.iter_mut().enumerate() {
            col.copy_from_slice(&y[(c + 1) * n..(c + 2) * n]);
        }
        let mut r = Mat::zeros(k, k);
        orthonormalize(&mut q, &mut r);
        if accumulating {
            product = r.mul_mat(&product);
            // keep the accumulated product O(1)
            let mut biggest = F::zero();
            for i in 0..k {
                for j in 0..k {
                    biggest = biggest.max(product[(i, j)].abs());
                }
            }
            if biggest > F::zero() {
                for i in 0..k {
                    for j in 0..k {
                        product[(i, j)] = product[(i, j)] / biggest;
                    }
                }
                log_scale += biggest.ln();
            }
        }
    }

    // close the loop: express the end frame in the start frame's basis
    let qa = q_anchor.expect("accumulation ran");
    let mut closure = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            closure[(i, j)] = dot(&qa[i], &q[j]);
        }
    }
    let total = closure.mul_mat(&product);
    let eig = linalg::eigenvalues(&total)?;
    let scale = orbit.omega() / F::tau();
    Ok(eig
        .into_iter()
        .map(|eta| {
            // μ̃ = η e^{log_scale}; Λ = -log(μ̃) ω / 2π
            let log_mu = Complex::new(eta.norm().ln() + log_scale, eta.im.atan2(eta.re));
            -log_mu * scale
        })
        .collect())
}

/// Modified Gram-Schmidt in place; fills `r` with the triangular factor.
fn orthonormalize<F: Real>(cols: &mut [Vec<F>], r: &mut Mat<F>) {
    let k = cols.len();
    for i in 0..k {
        for j in 0..i {
            let proj = dot(&cols[j], &cols[i]);
            r[(j, i)] = proj;
            let prev = cols[j].clone();
            for (a, b) in cols[i].iter_mut().zip(&prev) {
                *a = *a - proj * *b;
            }
        }
        let nrm = norm2(&cols[i]);
        r[(i, i)] = nrm;
        if nrm > F::zero() {
            for a in cols[i].iter_mut() {
                *a = *a / nrm;
            }
        }
    }
}

fn sort_by_descending_re<F: Real>(v: &mut [Complex<F>]) {
    v.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
}

fn symmetrize_conjugate_pairs<F: Real>(v: &mut [Complex<F>]) {
    let tiny = F::of(1e-9);
    for z in v.iter_mut() {
        if z.im.abs() < tiny * (F::one() + z.re.abs()) {
            z.im = F::zero();
        }
    }
    let n = v.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] || v[i].im == F::zero() {
            continue;
        }
        let mut best: Option<(usize, F)> = None;
        for j in i + 1..n {
            if used[j] || v[j].im == F::zero() {
                continue;
            }
            let d = (v[j] - v[i].conj()).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, d)) = best {
            if d < F::of(1e-6) * (F::one() + v[i].norm()) {
                let avg = (v[i] + v[j].conj()) / F::of(2.0);
                let avg = Complex::new(avg.re, avg.im.abs());
                v[i] = avg;
                v[j] = avg.conj();
                used[i] = true;
                used[j] = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{builtin_model, Model, PolyTerm, PolynomialField};
    use crate::testing::SplitMix64;

    fn radial_hopf_radius(r0: f64, kappa: f64, t: f64) -> f64 {
        (1.0 / (1.0 + ((1.0 - r0 * r0) / (r0 * r0)) * (-2.0 * kappa * t).exp())).sqrt()
    }

    #[test]
    fn radial_hopf_converges_to_unit_circle() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let traj = integrate(&model, &[2.0, 0.0], 10.0, &IntegratorOptions::default()).unwrap();
        let x = traj.last_state();
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        assert!((r - 1.0).abs() < 1e-6);
        // the analytic radial solution holds along the whole trajectory
        for i in (0..traj.len()).step_by(7) {
            let s = traj.state(i);
            let rt = (s[0] * s[0] + s[1] * s[1]).sqrt();
            assert!((rt - radial_hopf_radius(2.0, 1.0, traj.time(i))).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_span_returns_initial_state() {
        let model = builtin_model::<f64>("vdp").unwrap();
        let traj = integrate(&model, &[0.3, -0.7], 0.0, &IntegratorOptions::default()).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.state(0), &[0.3, -0.7]);
        let prolonged =
            integrate_prolonged(&model, &[0.3, -0.7], 0.0, &IntegratorOptions::default()).unwrap();
        let m = prolonged.fundamental(0);
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(0, 1)], 0.0);
    }

    #[test]
    fn vdp_settles_on_amplitude_two_cycle() {
        let model = builtin_model::<f64>("vdp").unwrap();
        let traj = integrate(&model, &[0.0, 1.0], 200.0, &IntegratorOptions::default()).unwrap();
        let mut max_x1: f64 = 0.0;
        for i in 0..traj.len() {
            if traj.time(i) > 180.0 {
                max_x1 = max_x1.max(traj.state(i)[0].abs());
            }
        }
        assert!((max_x1 - 2.0).abs() < 0.05, "max |x1| = {max_x1}");
    }

    #[test]
    fn escape_is_reported_with_time() {
        // x' = x^2 blows up at t = 1/x0
        let poly = PolynomialField::new(
            1,
            vec![PolyTerm {
                exponents: vec![2],
                coeffs: vec![1.0],
            }],
        )
        .unwrap();
        let model = Model::from_polynomial("blowup", poly);
        let err = integrate(&model, &[1.0], 2.0, &IntegratorOptions::default()).unwrap_err();
        match err {
            Error::Escaped { time, .. } => assert!(time <= 1.0 + 1e-3, "escape at {time}"),
            other => panic!("expected escape, got {other}"),
        }
    }

    #[test]
    fn sampled_integration_lands_on_the_grid() {
        let model = builtin_model::<f64>("vdp").unwrap();
        let traj =
            integrate_sampled(&model, &[0.0, 1.0], 2.0, 0.1, &IntegratorOptions::default())
                .unwrap();
        assert_eq!(traj.len(), 21);
        for i in 0..traj.len() {
            assert!((traj.time(i) - 0.1 * i as f64).abs() < 1e-12);
        }
        // fixed-step path hits the same grid
        let traj2 = integrate_sampled(
            &model,
            &[0.0, 1.0],
            2.0,
            0.1,
            &IntegratorOptions::fixed(1e-3),
        )
        .unwrap();
        assert_eq!(traj2.len(), 21);
        let a = traj.last_state();
        let b = traj2.last_state();
        assert!((a[0] - b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-8);
    }

    #[test]
    fn semigroup_property() {
        let model = builtin_model::<f64>("vdp").unwrap();
        let opts = IntegratorOptions::adaptive(1e-10, 1e-12);
        let mut rng = SplitMix64::new(42);
        for _ in 0..10 {
            let x = [rng.range(-2.0, 2.0), rng.range(-2.0, 2.0)];
            if x[0].abs() + x[1].abs() < 0.2 {
                continue;
            }
            let t = rng.range(0.1, 3.0);
            let s = rng.range(0.1, 3.0);
            let xs = integrate_to(&model, &x, s, &opts).unwrap();
            let x_two_leg = integrate_to(&model, &xs, t, &opts).unwrap();
            let x_direct = integrate_to(&model, &x, t + s, &opts).unwrap();
            for i in 0..2 {
                assert!(
                    (x_two_leg[i] - x_direct[i]).abs() < 1e-8,
                    "semigroup violated: {x_two_leg:?} vs {x_direct:?}"
                );
            }
        }
    }

    #[test]
    fn cocycle_property_of_fundamental_matrix() {
        let model = builtin_model::<f64>("vdp").unwrap();
        let opts = IntegratorOptions::adaptive(1e-10, 1e-12);
        let mut rng = SplitMix64::new(17);
        for _ in 0..5 {
            let x = [rng.range(-2.0, 2.0), rng.range(0.5, 2.0)];
            let t = rng.range(0.2, 2.0);
            let s = rng.range(0.2, 2.0);
            let m_s = monodromy(&model, &x, s, &opts).unwrap();
            let xs = integrate_to(&model, &x, s, &opts).unwrap();
            let m_t = monodromy(&model, &xs, t, &opts).unwrap();
            let m_ts = monodromy(&model, &x, t + s, &opts).unwrap();
            let prod = m_t.mul_mat(&m_s);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (prod[(i, j)] - m_ts[(i, j)]).abs() < 1e-7 * (1.0 + m_ts[(i, j)].abs()),
                        "cocycle violated at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn radial_hopf_monodromy_eigenvalues() {
        let model = builtin_model::<f64>("radial_hopf").unwrap();
        let period = std::f64::consts::PI; // 2π/ω₀ with ω₀ = 2
        let m = monodromy(
            &model,
            &[1.0, 0.0],
            period,
            &IntegratorOptions::adaptive(1e-12, 1e-14),
        )
        .unwrap();
        let mut mods: Vec<f64> = linalg::eigenvalues(&m)
            .unwrap()
            .iter()
            .map(|z| z.norm())
            .collect();
        mods.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected_small = (-2.0 * std::f64::consts::PI).exp(); // e^{-2π} ≈ 0.0018674
        assert!((mods[1] - 1.0).abs() < 1e-9);
        assert!((mods[0] - expected_small).abs() < 1e-8, "{}", mods[0]);
    }

    /// Scaling-and-squaring matrix exponential, oracle for the linear test.
    fn expm(a: &Mat<f64>, t: f64) -> Mat<f64> {
        let n = a.rows();
        let mut scaled = Mat::zeros(n, n);
        let mut norm: f64 = 0.0;
        for i in 0..n {
            let row_sum: f64 = a.row(i).iter().map(|v| (v * t).abs()).sum();
            norm = norm.max(row_sum);
        }
        let k = norm.log2().ceil().max(0.0) as u32 + 4;
        let factor = t / 2f64.powi(k as i32);
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] = a[(i, j)] * factor;
            }
        }
        let mut result = Mat::identity(n);
        let mut term = Mat::identity(n);
        for order in 1..=16 {
            term = term.mul_mat(&scaled);
            for i in 0..n {
                for j in 0..n {
                    term[(i, j)] /= order as f64;
                    result[(i, j)] += term[(i, j)];
                }
            }
            let mut next = Mat::zeros(n, n);
            std::mem::swap(&mut term, &mut next);
            term = next;
        }
        for _ in 0..k {
            result = result.mul_mat(&result);
        }
        result
    }

    #[test]
    fn linear_system_fundamental_matrix_is_matrix_exponential() {
        // x' = A x with A = [[0, 1], [-2, -0.3]]
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![-2.0, -0.3]]);
        let poly = PolynomialField::new(
            2,
            vec![
                PolyTerm {
                    exponents: vec![1, 0],
                    coeffs: vec![0.0, -2.0],
                },
                PolyTerm {
                    exponents: vec![0, 1],
                    coeffs: vec![1.0, -0.3],
                },
            ],
        )
        .unwrap();
        let model = Model::from_polynomial("linear", poly);
        let t = 1.7;
        let m = monodromy(
            &model,
            &[0.4, -0.2],
            t,
            &IntegratorOptions::adaptive(1e-12, 1e-14),
        )
        .unwrap();
        let e = expm(&a, t);
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (m[(i, j)] - e[(i, j)]).abs() < 1e-9,
                    "M({t}) != expm: {} vs {}",
                    m[(i, j)],
                    e[(i, j)]
                );
            }
        }
    }

    #[test]
    fn fundamental_matrix_determinant_stays_positive() {
        let model = builtin_model::<f64>("vdp3d").unwrap();
        let traj = integrate_prolonged(
            &model,
            &[2.0, 0.0, 0.0],
            6.0,
            &IntegratorOptions::default(),
        )
        .unwrap();
        for i in 0..traj.len() {
            assert!(traj.fundamental(i).det() > 0.0);
        }
    }
}
