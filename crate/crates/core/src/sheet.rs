//! The Brownian-LPP prelimit of the parabolic Airy sheet and the difference
//! profile `D(x) = S(y_b, x) - S(y_a, x)`.
//!
//! With `s = n^{2/3}`, a sheet start `y` sits at `(2 y s, n)` and an end `x`
//! at `(n + 2 x s, 1)`; the value is
//! `n^{-1/3} (B[start -> end] - 2n - 2 (x - y) s)`.
//! Coordinates are snapped to the nearest environment grid point and the
//! centering uses the snapped coordinates, so the DP stays exact.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{BrownianLines, Fixture, Grid, LineEnsemble, Lines, RngSpec};
use crate::error::{invalid, Error, Result};
use crate::lpp::{boundary_recursion, lpp_column_values, lpp_profile, multi_start_profiles, LatticePoint, Profile};
use crate::report::ExperimentReport;
use crate::stats::{linear_fit, Sample};
use crate::thresholds;

/// Boundary values `b_1..b_k` at grid column `column_index`.
///
/// Built by [`boundary_data`] as `f[start -> (λ, i)] - f[start -> (λ, 1)]`,
/// i.e. without the additive sheet value at `λ`. Every identity that uses
/// boundary data is invariant under a common shift, but raw values at
/// different columns are not comparable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryData {
    pub column_index: usize,
    pub values: Vec<f64>,
}

impl BoundaryData {
    pub fn new(column_index: usize, values: Vec<f64>) -> Self {
        Self { column_index, values }
    }

    pub fn is_non_increasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// Where the lines of a sheet environment come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EnvKind {
    Brownian { rate: f64 },
    Fixture(Fixture),
}

/// A concrete sheet environment: lazily sampled or fully stored.
#[derive(Debug, Clone)]
pub enum Environment {
    Brownian(BrownianLines),
    Stored(LineEnsemble),
}

impl Lines for Environment {
    fn grid(&self) -> &Grid {
        match self {
            Environment::Brownian(b) => b.grid(),
            Environment::Stored(e) => e.grid(),
        }
    }

    fn num_lines(&self) -> usize {
        match self {
            Environment::Brownian(b) => b.num_lines(),
            Environment::Stored(e) => e.num_lines(),
        }
    }

    fn line(&self, i: usize) -> Cow<'_, [f64]> {
        match self {
            Environment::Brownian(b) => b.line(i),
            Environment::Stored(e) => e.line(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SheetParams {
    pub n: usize,
    pub y_a: f64,
    pub y_b: f64,
    /// Evaluation points in sheet units.
    pub x_grid: Grid,
    /// Environment spacing in prelimit units.
    pub dx_env: f64,
    pub rng: RngSpec,
    pub environment: EnvKind,
}

impl SheetParams {
    /// Rate-one Brownian environment, as in the Brownian LPP prelimit.
    pub fn new(n: usize, y_a: f64, y_b: f64, x_grid: Grid, dx_env: f64, rng: RngSpec) -> Result<Self> {
        let p = Self {
            n,
            y_a,
            y_b,
            x_grid,
            dx_env,
            rng,
            environment: EnvKind::Brownian { rate: 1.0 },
        };
        p.validate()?;
        Ok(p)
    }

    /// Evaluation grid on `[x_lo, x_hi]` made of environment grid points, so
    /// the difference profile is sampled at the environment's resolution.
    pub fn native(n: usize, y_a: f64, y_b: f64, x_lo: f64, x_hi: f64, dx_env: f64, rng: RngSpec) -> Result<Self> {
        if !(x_hi > x_lo) {
            return invalid(format!("empty window [{x_lo}, {x_hi}]"));
        }
        let probe = Self::new(n, y_a, y_b, Grid::new(x_lo, x_hi - x_lo, 2)?, dx_env, rng)?;
        let env = probe.env_grid()?;
        let lo = env
            .nearest_index(probe.end_coord(x_lo))
            .ok_or_else(|| Error::OutOfRange("window start outside environment".into()))?;
        let hi = env
            .nearest_index(probe.end_coord(x_hi))
            .ok_or_else(|| Error::OutOfRange("window end outside environment".into()))?;
        let x0 = (env.point(lo) - n as f64) / (2.0 * probe.scale());
        let x_grid = Grid::new(x0, dx_env / (2.0 * probe.scale()), hi - lo + 1)?;
        Self::new(n, y_a, y_b, x_grid, dx_env, rng)
    }

    pub fn with_environment(mut self, environment: EnvKind) -> Self {
        self.environment = environment;
        self
    }

    pub fn with_rng(mut self, rng: RngSpec) -> Self {
        self.rng = rng;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("prelimit depth n must be at least 1");
        }
        if !(self.y_b >= self.y_a) {
            return invalid(format!("need y_b >= y_a, got y_a = {}, y_b = {}", self.y_a, self.y_b));
        }
        if !(self.dx_env > 0.0) {
            return invalid("environment spacing must be positive");
        }
        if self.end_coord(self.x_grid.x0()) < self.start_coord(self.y_b) {
            return Err(Error::OutOfRange(format!(
                "evaluation window starts at x = {} which maps before the start y_b = {}",
                self.x_grid.x0(),
                self.y_b
            )));
        }
        let points = self.env_points()?;
        if points > thresholds::SHEET_MAX_ENV_POINTS {
            return invalid(format!(
                "environment would need {points} points per line (limit {})",
                thresholds::SHEET_MAX_ENV_POINTS
            ));
        }
        Ok(())
    }

    /// `n^{2/3}`.
    pub fn scale(&self) -> f64 {
        (self.n as f64).powf(2.0 / 3.0)
    }

    pub fn start_coord(&self, y: f64) -> f64 {
        2.0 * y * self.scale()
    }

    pub fn end_coord(&self, x: f64) -> f64 {
        self.n as f64 + 2.0 * x * self.scale()
    }

    /// Sheet resolution: one environment cell in sheet units.
    pub fn sheet_dx(&self) -> f64 {
        self.dx_env / (2.0 * self.scale())
    }

    fn env_points(&self) -> Result<usize> {
        let lo = self.start_coord(self.y_a);
        let hi = self.end_coord(self.x_grid.last()).max(self.start_coord(self.y_b));
        let cells = ((hi - lo) / self.dx_env - 1e-9).ceil().max(1.0);
        if !cells.is_finite() || cells > 1e12 {
            return invalid("environment window is unbounded");
        }
        Ok(cells as usize + 1)
    }

    /// Environment grid: starts exactly at the `y_a` start and covers every
    /// evaluation point.
    pub fn env_grid(&self) -> Result<Grid> {
        Grid::new(self.start_coord(self.y_a), self.dx_env, self.env_points()?)
    }

    /// The environment selected by `environment`, drawn from `rng`.
    pub fn build_env(&self) -> Result<Environment> {
        let grid = self.env_grid()?;
        match self.environment {
            EnvKind::Brownian { rate } => Ok(Environment::Brownian(BrownianLines::new(grid, self.n, rate, self.rng)?)),
            EnvKind::Fixture(f) => Ok(Environment::Stored(f.build(self.n, grid)?)),
        }
    }
}

fn snap(grid: &Grid, u: f64, what: &str) -> Result<usize> {
    grid.nearest_index(u)
        .ok_or_else(|| Error::OutOfRange(format!("{what} coordinate {u} outside environment [{}, {}]", grid.x0(), grid.last())))
}

/// Scaled LPP value: an estimator of `S(y, x)`.
pub fn sheet_value<L: Lines + ?Sized>(env: &L, params: &SheetParams, y: f64, x: f64) -> Result<f64> {
    if env.num_lines() < params.n {
        return invalid(format!("environment has {} lines, need {}", env.num_lines(), params.n));
    }
    let grid = env.grid();
    let s = snap(grid, params.start_coord(y), "start")?;
    let e = snap(grid, params.end_coord(x), "end")?;
    if e < s {
        return invalid(format!("end x = {x} maps before start y = {y}"));
    }
    let b = crate::lpp::lpp_value(env, LatticePoint::new(s, params.n), LatticePoint::new(e, 1))?;
    let n = params.n as f64;
    Ok(n.powf(-1.0 / 3.0) * (b - n - grid.point(e) + grid.point(s)))
}

/// `D` on `params.x_grid`, both passage problems solved in one pass over `env`.
pub fn difference_profile_on<L: Lines + ?Sized>(env: &L, params: &SheetParams) -> Result<Profile> {
    if env.num_lines() < params.n {
        return invalid(format!("environment has {} lines, need {}", env.num_lines(), params.n));
    }
    let grid = env.grid();
    let ia = snap(grid, params.start_coord(params.y_a), "start")?;
    let ib = snap(grid, params.start_coord(params.y_b), "start")?;
    let ends = params
        .x_grid
        .points()
        .map(|x| snap(grid, params.end_coord(x), "end"))
        .collect::<Result<Vec<_>>>()?;
    if let Some(&e) = ends.iter().find(|&&e| e < ib) {
        return Err(Error::OutOfRange(format!("end index {e} precedes start index {ib}")));
    }
    let rows = multi_start_profiles(env, &[ia, ib], params.n, 1)?;
    let shift = grid.point(ib) - grid.point(ia);
    let c = (params.n as f64).powf(-1.0 / 3.0);
    let values = ends
        .iter()
        .map(|&e| c * (rows[1][e - ib] - rows[0][e - ia] + shift))
        .collect();
    Profile::on_grid(params.x_grid, values)
}

/// `D` on a freshly drawn environment.
pub fn difference_profile(params: &SheetParams) -> Result<Profile> {
    difference_profile_on(&params.build_env()?, params)
}

/// Unscaled difference `f[(y_b, n) -> (x, 1)] - f[(y_a, n) -> (x, 1)]` for
/// grid points `x >= y_b`, with both starts on line `n`.
pub fn raw_difference<L: Lines + ?Sized>(env: &L, y_a: usize, y_b: usize, n: usize) -> Result<Profile> {
    if y_b < y_a {
        return invalid("raw difference needs y_a <= y_b");
    }
    let a = lpp_profile(env, LatticePoint::new(y_a, n), 1)?;
    let b = lpp_profile(env, LatticePoint::new(y_b, n), 1)?;
    let values = b
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| v - a.values[j + y_b - y_a])
        .collect();
    Profile::new(*env.grid(), y_b, values)
}

/// Finite-depth boundary data `b_i = f[start -> (λ, i)] - f[start -> (λ, 1)]`.
pub fn boundary_data<L: Lines + ?Sized>(env: &L, start: LatticePoint, column: usize, k: usize) -> Result<BoundaryData> {
    if k == 0 || k > start.line_index {
        return invalid(format!("k = {k} must lie in 1..={}", start.line_index));
    }
    let f = lpp_column_values(env, start, column)?;
    let top = f[0];
    Ok(BoundaryData::new(column, f[..k].iter().map(|v| v - top).collect()))
}

/// `Z_1..Z_k` right of the boundary column.
pub fn z_processes<L: Lines + ?Sized>(env: &L, boundary: &BoundaryData) -> Result<Vec<Profile>> {
    boundary_recursion(env, boundary, 1)
}

/// Smallest maximizing line index `j` of `b_j + f[(λ, j) -> (x, 1)]`, for
/// every grid index `x >= λ` (entry 0 is `x = λ`).
///
/// Candidates within the identity tolerance of the maximum count as tied:
/// exact ties are common on a grid (zero-cost vertical jumps at `λ`) and
/// rounding would otherwise break them inconsistently between starts.
pub fn maximizer_indices<L: Lines + ?Sized>(env: &L, boundary: &BoundaryData) -> Result<Vec<usize>> {
    let k = boundary.values.len();
    if k == 0 || k > env.num_lines() {
        return invalid(format!("boundary has {k} values for {} lines", env.num_lines()));
    }
    let lam = boundary.column_index;
    let profiles = (1..=k)
        .map(|j| lpp_profile(env, LatticePoint::new(lam, j), 1))
        .collect::<Result<Vec<_>>>()?;
    let len = profiles[0].len();
    let mut cand = vec![0.0; k];
    Ok((0..len)
        .map(|x| {
            for (c, (b, p)) in cand.iter_mut().zip(boundary.values.iter().zip(&profiles)) {
                *c = b + p.values[x];
            }
            let best = cand.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let scale = cand.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tol = thresholds::IDENTITY_ABS_TOL.max(thresholds::IDENTITY_REL_TOL * scale);
            1 + cand.iter().position(|&v| v >= best - tol).unwrap_or(0)
        })
        .collect())
}

pub fn maximizer_index<L: Lines + ?Sized>(env: &L, boundary: &BoundaryData, x_index: usize) -> Result<usize> {
    if x_index < boundary.column_index {
        return invalid(format!(
            "x index {x_index} precedes the boundary column {}",
            boundary.column_index
        ));
    }
    let idx = maximizer_indices(env, boundary)?;
    idx.get(x_index - boundary.column_index)
        .copied()
        .ok_or_else(|| Error::OutOfRange(format!("x index {x_index} outside the grid")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub m: f64,
    pub mean_d: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct GrowthOutcome {
    pub report: ExperimentReport,
    pub rows: Vec<GrowthRow>,
}

/// Leading-order mean of `D(M)` at depth `n`, from
/// `E B[(0, n) -> (T, 1)] ~ sqrt(T) (2 sqrt(n) + n^{-1/6} E[TW])`.
/// Used only to explain finite-depth bias in the report.
pub fn finite_depth_mean_difference(n: usize, y_a: f64, y_b: f64, m: f64) -> f64 {
    let nf = n as f64;
    let s = nf.powf(2.0 / 3.0);
    let edge = 2.0 * nf.sqrt() + nf.powf(-1.0 / 6.0) * thresholds::TRACY_WIDOM_GUE_MEAN;
    let len = |y: f64| nf + 2.0 * (m - y) * s;
    nf.powf(-1.0 / 3.0) * (edge * (len(y_b).sqrt() - len(y_a).sqrt()) + 2.0 * (y_b - y_a) * s)
}

/// Mean of `D(M)` for each `M`, fitted against `M`; the slope should be
/// `2 (y_b - y_a)`.
pub fn growth_experiment(params: &SheetParams, m_list: &[f64], replicas: usize) -> Result<GrowthOutcome> {
    if replicas < thresholds::GROWTH_MIN_REPLICAS {
        return invalid(format!(
            "growth experiment needs at least {} replicas, got {replicas}",
            thresholds::GROWTH_MIN_REPLICAS
        ));
    }
    if m_list.len() < 2 || m_list.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("M list must be strictly increasing with at least two entries");
    }
    let per_m = m_list
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let single = SheetParams::new(
                params.n,
                params.y_a,
                params.y_b,
                Grid::new(m, params.sheet_dx(), 2)?,
                params.dx_env,
                params.rng,
            )?
            .with_environment(params.environment);
            let base = params.rng.child(mi as u64);
            let values = (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let p = single.clone().with_rng(base.child(r as u64));
                    difference_profile(&p).map(|d| d.values[0])
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Sample::new(values))
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<GrowthRow> = m_list
        .iter()
        .zip(&per_m)
        .map(|(&m, s)| GrowthRow {
            m,
            mean_d: s.mean(),
            stderr: s.stderr(),
        })
        .collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_d).collect();
    let fit = linear_fit(m_list, &means)?;
    let target = 2.0 * (params.y_b - params.y_a);
    let reference: Vec<f64> = m_list
        .iter()
        .map(|&m| finite_depth_mean_difference(params.n, params.y_a, params.y_b, m))
        .collect();
    let ref_fit = linear_fit(m_list, &reference)?;

    let mut report = ExperimentReport::new("growth", params.rng.master_seed);
    report
        .param("n", params.n)
        .param("y_a", params.y_a)
        .param("y_b", params.y_b)
        .param("dx_env", params.dx_env)
        .param("replicas", replicas)
        .param("m_list", m_list.to_vec());
    report
        .stat("slope", fit.slope)
        .stat("intercept", fit.intercept)
        .stat("r_squared", fit.r_squared)
        .stat("target", target)
        .stat("finite_depth_reference_slope", ref_fit.slope);
    let (lo, hi) = thresholds::GROWTH_SLOPE_BAND;
    report.pass = if target == 0.0 {
        fit.slope.abs() <= thresholds::IDENTITY_ABS_TOL
    } else {
        let ratio = fit.slope / target;
        report.stat("slope_ratio", ratio);
        ratio >= lo && ratio <= hi
    };
    Ok(GrowthOutcome { report, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_grid, Fixture};

    fn e2() -> LineEnsemble {
        Fixture::E2.build(0, make_grid(0.0, 0.5, 3).unwrap()).unwrap()
    }

    #[test]
    fn linear_environment_sheet_value() {
        let params = SheetParams::new(1, 0.0, 0.1, make_grid(0.3, 0.1, 4).unwrap(), 0.1, RngSpec::new(0, 0))
            .unwrap()
            .with_environment(EnvKind::Fixture(Fixture::Linear));
        let env = params.build_env().unwrap();
        for (y, x) in [(0.0, 0.3), (0.1, 0.5), (0.0, 0.6)] {
            let v = sheet_value(&env, &params, y, x).unwrap();
            assert!((v + 1.0).abs() < 1e-12, "S({y}, {x}) = {v}");
        }
    }

    #[test]
    fn sheet_value_is_deterministic() {
        let params = SheetParams::new(16, 0.0, 0.25, make_grid(-0.5, 0.25, 5).unwrap(), 0.05, RngSpec::new(11, 0)).unwrap();
        let a = sheet_value(&params.build_env().unwrap(), &params, 0.0, 0.0).unwrap();
        let b = sheet_value(&params.build_env().unwrap(), &params, 0.0, 0.0).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            sheet_value(&params.build_env().unwrap(), &params, 0.0, 50.0),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn difference_profile_degenerate_cases() {
        let g = make_grid(-0.5, 0.05, 21).unwrap();
        let same = SheetParams::new(8, 0.2, 0.2, g, 0.05, RngSpec::new(1, 1)).unwrap();
        assert!(difference_profile(&same).unwrap().values.iter().all(|&v| v == 0.0));

        let lin = SheetParams::new(8, 0.0, 0.3, g, 0.05, RngSpec::new(1, 1))
            .unwrap()
            .with_environment(EnvKind::Fixture(Fixture::Linear));
        let d = difference_profile(&lin).unwrap();
        assert!(d.values.iter().all(|v| v.abs() < 1e-12), "{:?}", d.values);
    }

    #[test]
    fn difference_profile_is_non_decreasing() {
        let p = SheetParams::native(32, 0.0, 0.5, -1.0, 1.0, 0.02, RngSpec::new(4, 0)).unwrap();
        let d = difference_profile(&p).unwrap();
        assert_eq!(d.len(), p.x_grid.n_points());
        for w in d.values.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn native_grid_lines_up_with_environment() {
        let p = SheetParams::native(64, 0.0, 0.5, -1.0, 1.0, 0.01, RngSpec::new(4, 0)).unwrap();
        let env = p.env_grid().unwrap();
        let first = env.nearest_index(p.end_coord(p.x_grid.x0())).unwrap();
        for j in (0..p.x_grid.n_points()).step_by(97) {
            let u = p.end_coord(p.x_grid.point(j));
            assert_eq!(env.nearest_index(u), Some(first + j));
            assert!((env.point(first + j) - u).abs() < 1e-6 * p.dx_env);
        }
    }

    #[test]
    fn e2_raw_difference() {
        // starts at 0 and 0.25 need the breakpoint at 0.25 on the grid
        let fine = e2().refine(2).unwrap();
        let d = raw_difference(&fine, 0, 1, 2).unwrap();
        assert_eq!(d.at(2), Some(-0.5));
        assert_eq!(d.at(4), Some(0.5));
        for w in d.values.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn boundary_data_examples() {
        let env = e2();
        let b = boundary_data(&env, LatticePoint::new(0, 2), 1, 2).unwrap();
        assert_eq!(b.values, vec![0.0, -2.0]);
        assert_eq!(b.column_index, 1);
        let b = boundary_data(&env, LatticePoint::new(0, 2), 2, 1).unwrap();
        assert_eq!(b.values, vec![0.0]);
        assert!(boundary_data(&env, LatticePoint::new(0, 2), 1, 3).is_err());
        assert!(boundary_data(&env, LatticePoint::new(2, 2), 1, 2).is_err());
    }

    #[test]
    fn z_process_examples() {
        let env = e2();
        let zs = z_processes(&env, &BoundaryData::new(0, vec![0.3, 0.0])).unwrap();
        assert_eq!(zs.len(), 2);
        assert_eq!(zs[0].values, vec![0.3, 0.3 + 1.0, 2.0]);
        assert_eq!(zs[1].values, vec![0.0, -1.0, 2.0]);
        for j in 0..3 {
            assert!(zs[0].values[j] >= zs[1].values[j]);
        }
        let single = LineEnsemble::from_rows(*env.grid(), vec![env.rows()[0].clone()], 0.0).unwrap();
        let zs = z_processes(&single, &BoundaryData::new(0, vec![0.0])).unwrap();
        assert_eq!(zs[0].values, env.rows()[0]);
    }

    #[test]
    fn maximizer_examples() {
        let env = e2();
        let b = BoundaryData::new(0, vec![0.3, 0.0]);
        assert_eq!(maximizer_index(&env, &b, 2).unwrap(), 2);
        assert_eq!(maximizer_index(&env, &b, 1).unwrap(), 1);
        assert_eq!(maximizer_index(&env, &BoundaryData::new(0, vec![0.0, 0.0]), 0).unwrap(), 1);
        assert!(maximizer_index(&env, &BoundaryData::new(1, vec![0.0, 0.0]), 0).is_err());
    }

    #[test]
    fn growth_degenerate_slopes() {
        let g = make_grid(0.0, 0.1, 2).unwrap();
        let same = SheetParams::new(8, 0.25, 0.25, g, 0.1, RngSpec::new(3, 0)).unwrap();
        let out = growth_experiment(&same, &[1.0, 2.0, 4.0], 30).unwrap();
        assert_eq!(out.report.get("slope"), Some(0.0));
        assert!(out.report.pass);

        let lin = SheetParams::new(8, 0.0, 0.5, g, 0.1, RngSpec::new(3, 0))
            .unwrap()
            .with_environment(EnvKind::Fixture(Fixture::Linear));
        let out = growth_experiment(&lin, &[1.0, 2.0, 4.0], 30).unwrap();
        assert!(out.report.get("slope").unwrap().abs() < 1e-12);

        assert!(growth_experiment(&same, &[1.0, 2.0], 29).is_err());
        assert!(growth_experiment(&same, &[2.0, 1.0], 30).is_err());
    }
}
