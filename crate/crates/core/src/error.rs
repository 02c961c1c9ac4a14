use thiserror::Error;

/// Errors across the profile-construction and diagnostic pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible dimension: ell = {ell} >= d - 2*sqrt(d) = {ell2} for d = {d}")]
    InadmissibleDimension { d: u32, ell: f64, ell2: f64 },
    #[error("blow-up speed r = {r} outside (2, r_star) = (2, {r_star})")]
    SpeedOutOfRange { r: f64, r_star: f64 },
    #[error("sonic singularity: |Delta| = {delta_abs} below tolerance at (w, sigma) = ({w}, {sigma})")]
    SonicSingular { w: f64, sigma: f64, delta_abs: f64 },
    #[error("non-positive density: sigma = {sigma} at Z = {z}")]
    NonPositiveDensity { z: f64, sigma: f64 },
    #[error("profile range insufficient: grid ends at Z = {z_max}, need Z >= {needed}")]
    InsufficientRange { z_max: f64, needed: f64 },
    #[error("no sonic point in (0, 1) for r = {r}")]
    NoSonicPoint { r: f64 },
    #[error("degenerate slopes at P2: discriminant = {disc}")]
    DegenerateSlopes { disc: f64 },
    #[error("branch series matching degenerates at order {order} (pivot {pivot})")]
    ResonantOrder { order: usize, pivot: f64 },
    #[error("origin series diverged at order {order}: |coef| = {magnitude}")]
    SeriesDiverged { order: usize, magnitude: f64 },
    #[error("integrator step failure at s = {s}, h = {h}")]
    StepFailure { s: f64, h: f64 },
    #[error("no root found in the scanned interval ({lo}, {hi})")]
    NoRootFound { lo: f64, hi: f64 },
    #[error("one-sided match at Z2 failed: mismatch = {mismatch} > {tol}")]
    MatchFailure { mismatch: f64, tol: f64 },
    #[error("shifted root Z_a escaped the profile grid (a = {a})")]
    RootEscaped { a: f64 },
    #[error("measure quadrature blow-up near Z = {z}: integrand = {value}")]
    QuadratureBlowup { z: f64, value: f64 },
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("vacuum formation: rho_T <= 0 at Z = {z} (tau = {tau})")]
    VacuumFormation { z: f64, tau: f64 },
    #[error("time step rejected below minimum: dtau = {dtau} at tau = {tau}")]
    StabilityViolation { tau: f64, dtau: f64 },
    #[error("norm schedule infeasible: alpha = {alpha} >= 1")]
    ScheduleInfeasible { alpha: f64 },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
