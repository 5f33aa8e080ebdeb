//! Library error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown model `{0}` (known: vdp, vdp3d, hodgkin_huxley, radial_hopf)")]
    UnknownModel(String),

    #[error("model `{0}` is not polynomial")]
    NotPolynomial(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("trajectory escaped the basin (|x| > {radius:.3e}) at t = {time:.6}")]
    Escaped { time: f64, radius: f64 },

    #[error("integrator exceeded {0} steps")]
    StepLimit(usize),

    #[error("linear solve failed: matrix is singular (pivot {pivot:.3e} at column {col})")]
    SingularMatrix { col: usize, pivot: f64 },

    #[error("Newton did not converge after {iters} iterations (residual {residual:.3e})")]
    NewtonNoConvergence { iters: usize, residual: f64 },

    #[error("harmonic balance converged to a fixed point, not a cycle; discard this solution and reseed")]
    FixedPointSolution,

    #[error("harmonic balance failed at continuation stage N = {stage}: {source}")]
    ContinuationStage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("period detection failed: {0}")]
    PeriodDetection(String),

    #[error("transient not decayed: relative period jitter {jitter:.3e} across successive returns exceeds {tol:.1e}")]
    TransientNotDecayed { jitter: f64, tol: f64 },

    #[error("period inconsistency: no monodromy eigenvalue within {tol} of 1 (closest: {closest:.6e}); orbit or frequency is inaccurate")]
    PeriodInconsistency { closest: f64, tol: f64 },

    #[error("cycle is not a normally hyperbolic stable limit cycle: nontrivial Floquet multiplier with |mu| = {modulus:.6} >= 1")]
    NotNormallyHyperbolic { modulus: f64 },

    #[error("projected cycle not star-shaped for this plane: geometric phase not monotone over theta in [{theta_lo:.6}, {theta_hi:.6}]")]
    NotStarShaped { theta_lo: f64, theta_hi: f64 },

    #[error("degenerate radius: projected point coincides with the projected cycle center")]
    DegenerateRadius,

    #[error("degenerate parametrization: projected cycle tangent vanishes at theta = {0:.6}")]
    ZeroTangent(f64),

    #[error("horizon past blow-up: endpoint Laplace values vary by factor {factor:.2} (> {limit}) across horizons; shrink the horizons")]
    HorizonBlowup { factor: f64, limit: f64 },

    #[error("variational blow-up: tangent norm exceeded {0:.3e}")]
    VariationalBlowup(f64),

    #[error("no plateau found in the Laplace-average horizon series; use denser or wider candidate horizons")]
    NoPlateau,

    #[error("point outside the grid box")]
    OutsideGrid,

    #[error("not interpolable: a surrounding grid node is not ok")]
    NotInterpolable,

    #[error("sweep failed: {failed} failed and {outside} outside-basin of {total} nodes")]
    SweepFailed {
        ok: usize,
        outside: usize,
        failed: usize,
        total: usize,
    },

    #[error("inverse map hole at (theta, r) = ({theta:.6}, {r:.6})")]
    InverseMapHole { theta: f64, r: f64 },

    #[error("(theta, r) = ({theta:.6}, {r:.6}) outside the tabulated range")]
    OutsideTable { theta: f64, r: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
