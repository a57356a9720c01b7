//! Pass/fail gates and default parameters for every experiment, kept in one
//! place so the acceptance suite and the kernels read the same numbers.

/// Relative tolerance for the exact identities (absolute floor below).
pub const IDENTITY_REL_TOL: f64 = 1e-9;
pub const IDENTITY_ABS_TOL: f64 = 1e-12;
/// Geodesic weight versus passage value.
pub const GEODESIC_REL_TOL: f64 = 1e-12;

/// Lévy experiment: two-sample KS between running maximum and local time.
pub const LEVY_KS_TWO_SAMPLE: f64 = 0.05;
/// Lévy experiment: one-sample KS of the running maximum against the half-normal law.
pub const LEVY_KS_ONE_SAMPLE: f64 = 0.03;
/// Lévy experiment: allowed deviation of the sample mean, in standard errors.
pub const LEVY_MEAN_STDERRS: f64 = 3.0;
pub const LEVY_MIN_REPLICAS: usize = 100;
pub const LEVY_DEFAULT_DX: f64 = 1e-5;
/// Default occupation window: `LEVY_EPS_FACTOR * sqrt(rate * dx)`.
pub const LEVY_EPS_FACTOR: f64 = 10.0;

/// Box counting: levels whose (pooled) count is below this are not fitted.
pub const BOX_MIN_COUNT: f64 = 4.0;
/// Cantor oracle: slope must equal log 2 / log 3 to this accuracy.
pub const CANTOR_SLOPE_TOL: f64 = 1e-6;
/// Brownian zero-set calibration band and fit quality.
pub const ZERO_SET_SLOPE: (f64, f64) = (0.43, 0.57);
pub const ZERO_SET_MIN_R2: f64 = 0.97;
pub const ZERO_SET_DEFAULT_DX: f64 = 1e-6;
pub const ZERO_SET_DEFAULT_REPLICAS: usize = 20;
/// Non-constant set of the difference profile.
pub const NC_SLOPE: (f64, f64) = (0.40, 0.60);
pub const NC_MIN_R2: f64 = 0.95;
/// Default NC tolerance is `NC_TOL_FACTOR * max(1, max |D|)`.
pub const NC_TOL_FACTOR: f64 = 1e-7;

/// Local limit: KS gate in oracle (calibration) mode.
pub const LOCAL_LIMIT_ORACLE_KS: f64 = 0.03;
/// Local limit: KS gate on simulated difference profiles.
pub const LOCAL_LIMIT_KS: f64 = 0.08;
pub const LOCAL_LIMIT_MIN_EFFECTIVE: usize = 500;
pub const LOCAL_LIMIT_MIN_REPLICAS: usize = 200;
/// Smallest number of grid cells `eps * t_eval` must span to count as resolved.
pub const LOCAL_LIMIT_MIN_CELLS: f64 = 256.0;
/// Variance rate of the limiting local time.
pub const LOCAL_TIME_RATE: f64 = 4.0;

/// Growth experiment: fitted slope within this band times `2 (y_b - y_a)`.
pub const GROWTH_SLOPE_BAND: (f64, f64) = (0.85, 1.15);
pub const GROWTH_MIN_REPLICAS: usize = 30;

/// Default prelimit depth for sheet experiments.
pub const SHEET_DEFAULT_N: usize = 128;
/// Upper bound on environment grid points per line.
pub const SHEET_MAX_ENV_POINTS: usize = 4_000_000;

/// Mean of the GUE Tracy-Widom law, used only for finite-depth diagnostics.
pub const TRACY_WIDOM_GUE_MEAN: f64 = -1.771_086_807_411_6;
