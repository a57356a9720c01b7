//! Running maxima, occupation-time local time, non-constant-point masks, box
//! counting, and the experiment kernels built on them.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::env::{Grid, RngSpec};
use crate::error::{invalid, Error, Result};
use crate::lpp::Profile;
use crate::report::ExperimentReport;
use crate::sheet::{difference_profile, SheetParams};
use crate::stats::{half_normal_cdf, ks_one_sample, ks_two_sample, linear_fit, Sample};
use crate::thresholds;

/// One flag per grid cell `[point(i), point(i + 1)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointMask {
    pub grid: Grid,
    pub mask: Vec<bool>,
}

impl PointMask {
    pub fn new(grid: Grid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.n_cells() {
            return invalid(format!("mask has {} cells, grid has {}", mask.len(), grid.n_cells()));
        }
        Ok(Self { grid, mask })
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn flagged_fraction(&self) -> f64 {
        self.count() as f64 / self.mask.len() as f64
    }
}

/// Box counts on a ladder of scales and the log-log fit through them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionFit {
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn running_max(p: &Profile) -> Profile {
    let mut run = f64::NEG_INFINITY;
    let values = p
        .values
        .iter()
        .map(|&v| {
            run = run.max(v);
            run
        })
        .collect();
    Profile {
        grid: p.grid,
        offset: p.offset,
        values,
    }
}

/// `L(t_j) = (dx / 2 eps) * #{i < j : |path(t_i)| < eps}`.
pub fn local_time_occupation(path: &Profile, epsilon: f64) -> Result<Profile> {
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    let w = path.grid.dx() / (2.0 * epsilon);
    let mut count = 0usize;
    let values = path
        .values
        .iter()
        .map(|&v| {
            let l = w * count as f64;
            if v.abs() < epsilon {
                count += 1;
            }
            l
        })
        .collect();
    Ok(Profile {
        grid: path.grid,
        offset: path.offset,
        values,
    })
}

fn cell_grid(p: &Profile) -> Result<Grid> {
    Grid::new(p.x(0), p.grid.dx(), p.len())
}

/// Cells where `D` increases by more than `tol`.
pub fn nc_mask(d: &Profile, tol: f64) -> Result<PointMask> {
    let grid = cell_grid(d)?;
    let mask = d.values.windows(2).map(|w| w[1] - w[0] > tol).collect();
    PointMask::new(grid, mask)
}

/// Cells on which the linear interpolant of `path` comes within `eps` of 0.
pub fn zero_set_mask(path: &Profile, eps: f64) -> Result<PointMask> {
    let grid = cell_grid(path)?;
    let mask = path
        .values
        .windows(2)
        .map(|w| (w[0] <= 0.0) != (w[1] <= 0.0) || w[0].abs() < eps || w[1].abs() < eps)
        .collect();
    PointMask::new(grid, mask)
}

/// Number of boxes at level `k` (`base^k` equal boxes across the domain)
/// that contain a flagged cell.
pub fn box_counts(mask: &PointMask, base: u64, levels: std::ops::RangeInclusive<u32>) -> Vec<usize> {
    let cells = mask.mask.len() as u128;
    let flagged: Vec<u128> = mask
        .mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| i as u128)
        .collect();
    levels
        .map(|k| {
            let boxes = (base as u128).pow(k);
            let mut count = 0;
            let mut last = None;
            for &i in &flagged {
                let b = i * boxes / cells;
                if last != Some(b) {
                    count += 1;
                    last = Some(b);
                }
            }
            count
        })
        .collect()
}

/// Box-counting fit with `base`-adic boxes over levels `k_min..=k_max`.
pub fn box_dimension_base(mask: &PointMask, base: u64, k_min: u32, k_max: u32) -> Result<DimensionFit> {
    if base < 2 {
        return invalid("box base must be at least 2");
    }
    if k_min >= k_max {
        return invalid(format!("need k_min < k_max, got {k_min} and {k_max}"));
    }
    match (base as u128).checked_pow(k_max) {
        Some(b) if b <= mask.mask.len() as u128 => {}
        _ => {
            return invalid(format!(
                "{base}^{k_max} boxes exceed the {} cells of the mask",
                mask.mask.len()
            ))
        }
    }
    if mask.count() == 0 {
        return Err(Error::EmptySet);
    }
    let counts = box_counts(mask, base, k_min..=k_max);
    let length = mask.grid.last() - mask.grid.x0();
    let scales: Vec<f64> = (k_min..=k_max).map(|k| length / (base as f64).powi(k as i32)).collect();
    fit_counts(&scales, &counts)
}

/// Dyadic box-counting dimension.
pub fn box_dimension(mask: &PointMask, k_min: u32, k_max: u32) -> Result<DimensionFit> {
    box_dimension_base(mask, 2, k_min, k_max)
}

/// Least-squares slope of `log N` against `log(1/δ)`.
fn fit_counts(scales: &[f64], counts: &[usize]) -> Result<DimensionFit> {
    let xs: Vec<f64> = scales.iter().map(|s| (1.0 / s).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(DimensionFit {
        scales: scales.to_vec(),
        counts: counts.to_vec(),
        slope: fit.slope,
        r_squared: fit.r_squared,
    })
}

/// Pools box counts from several masks on equal-length grids: counts are
/// summed per level and levels whose mean count is below
/// [`thresholds::BOX_MIN_COUNT`] are left out of the fit.
pub fn pooled_dimension(masks: &[PointMask], k_min: u32, k_max: u32) -> Result<DimensionFit> {
    if masks.is_empty() {
        return invalid("no masks to pool");
    }
    let mut totals = vec![0usize; (k_max - k_min + 1) as usize];
    for m in masks {
        for (t, c) in totals.iter_mut().zip(box_counts(m, 2, k_min..=k_max)) {
            *t += c;
        }
    }
    let length = masks[0].grid.last() - masks[0].grid.x0();
    let r = masks.len() as f64;
    let (scales, counts): (Vec<f64>, Vec<usize>) = (k_min..=k_max)
        .zip(&totals)
        .filter(|(_, &c)| c as f64 / r >= thresholds::BOX_MIN_COUNT)
        .map(|(k, &c)| (length / 2f64.powi(k as i32), c))
        .unzip();
    if scales.len() < 2 {
        return Err(Error::EmptySet);
    }
    fit_counts(&scales, &counts)
}

/// Middle-thirds Cantor prefix of the given depth on `3^depth` unit cells.
pub fn cantor_mask(depth: u32) -> Result<PointMask> {
    let cells = 3usize.pow(depth);
    let mask = (0..cells)
        .map(|mut i| {
            for _ in 0..depth {
                if i % 3 == 1 {
                    return false;
                }
                i /= 3;
            }
            true
        })
        .collect();
    PointMask::new(Grid::new(0.0, 1.0 / cells as f64, cells + 1)?, mask)
}

/// Rate-`rate` Brownian path on `steps` cells of width `dx`, started at 0.
pub fn brownian_path(rate: f64, dx: f64, steps: usize, rng: RngSpec) -> Result<Profile> {
    let grid = Grid::new(0.0, dx, steps + 1)?;
    let mut r = rng.rng();
    let sd = (rate * dx).sqrt();
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(steps + 1);
    values.push(0.0);
    for _ in 0..steps {
        let z: f64 = r.sample(StandardNormal);
        acc += sd * z;
        values.push(acc);
    }
    Profile::on_grid(grid, values)
}

/// Final running maximum of the same path as [`brownian_path`], computed
/// incrementally without storing the path.
pub fn brownian_final_max(rate: f64, dx: f64, steps: usize, rng: RngSpec) -> f64 {
    let mut r = rng.rng();
    let sd = (rate * dx).sqrt();
    let (mut acc, mut max) = (0.0f64, 0.0f64);
    for _ in 0..steps {
        let z: f64 = r.sample(StandardNormal);
        acc += sd * z;
        max = max.max(acc);
    }
    max
}

/// Occupation-time local time at the end of a fresh path, normalized by the
/// quadratic variation rate so that it matches the running maximum in law.
fn brownian_final_local_time(rate: f64, dx: f64, steps: usize, eps: f64, rng: RngSpec) -> f64 {
    let mut r = rng.rng();
    let sd = (rate * dx).sqrt();
    let mut acc = 0.0f64;
    let mut count = 0usize;
    for _ in 0..steps {
        if acc.abs() < eps {
            count += 1;
        }
        let z: f64 = r.sample(StandardNormal);
        acc += sd * z;
    }
    rate * dx / (2.0 * eps) * count as f64
}

#[derive(Debug, Clone)]
pub struct LevyOutcome {
    pub report: ExperimentReport,
    pub running_max: Vec<f64>,
    pub local_time: Vec<f64>,
}

/// Samples of `M(t_max)` and of the local time `L(t_max)` (from an
/// independent path), compared with each other and with the half-normal law
/// of scale `sqrt(rate * t_max)`.
///
/// The occupation estimator `(1/2 eps) |{s : |B(s)| < eps}|` is multiplied by
/// `rate`; without that factor it converges to `L / rate` for a rate-`rate`
/// motion and the identity with `M` holds only at rate one.
pub fn levy_experiment(rate: f64, t_max: f64, dx: f64, epsilon: f64, replicas: usize, rng: RngSpec) -> Result<LevyOutcome> {
    if replicas < thresholds::LEVY_MIN_REPLICAS {
        return invalid(format!(
            "Lévy experiment needs at least {} replicas, got {replicas}",
            thresholds::LEVY_MIN_REPLICAS
        ));
    }
    if !(rate > 0.0) || !(dx > 0.0) || !(epsilon > 0.0) || !(t_max >= 0.0) {
        return invalid("rate, dx and epsilon must be positive and t_max non-negative");
    }
    let steps = (t_max / dx).round() as usize;
    let pairs: Vec<(f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let own = rng.child(r as u64);
            (
                brownian_final_max(rate, dx, steps, own.child(0)),
                brownian_final_local_time(rate, dx, steps, epsilon, own.child(1)),
            )
        })
        .collect();
    let (m, l): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let ms = Sample::new(m.clone());
    let ls = Sample::new(l.clone());
    let sigma = (rate * t_max).sqrt();
    let ks_two = ks_two_sample(&ms, &ls)?;
    let ks_one = if steps == 0 {
        // both laws are the point mass at 0
        0.0
    } else {
        ks_one_sample(&ms, |x| half_normal_cdf(sigma, x))?
    };
    let target_mean = sigma * (2.0 / std::f64::consts::PI).sqrt();
    let mean = ms.mean();
    let se = ms.stderr();
    let z = if se > 0.0 { (mean - target_mean) / se } else { 0.0 };

    let mut report = ExperimentReport::new("levy", rng.master_seed);
    report
        .param("rate", rate)
        .param("t_max", t_max)
        .param("dx", dx)
        .param("epsilon", epsilon)
        .param("replicas", replicas);
    report
        .stat("ks_two_sample", ks_two)
        .stat("ks_one_sample", ks_one)
        .stat("mean_running_max", mean)
        .stat("stderr_running_max", se)
        .stat("target_mean", target_mean)
        .stat("mean_z_score", z)
        .stat("mean_local_time", ls.mean())
        .stat("threshold_ks_two_sample", thresholds::LEVY_KS_TWO_SAMPLE)
        .stat("threshold_ks_one_sample", thresholds::LEVY_KS_ONE_SAMPLE);
    report.pass = ks_two <= thresholds::LEVY_KS_TWO_SAMPLE
        && ks_one <= thresholds::LEVY_KS_ONE_SAMPLE
        && z.abs() <= thresholds::LEVY_MEAN_STDERRS;
    Ok(LevyOutcome {
        report,
        running_max: m,
        local_time: l,
    })
}

/// Ways of picking a random point of increase of `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StopRule {
    /// First point of increase after `lambda`.
    TauLambda { lambda: f64 },
    /// First time `D` reaches level `h`.
    Rho { h: f64 },
    /// First time after `c` that `D` reaches `D(c) + h`.
    RhoC { c: f64, h: f64 },
    /// Point sampled from the measure `dD` on `[c, d]`.
    Xi { c: f64, d: f64 },
}

impl StopRule {
    pub fn label(&self) -> &'static str {
        match self {
            StopRule::TauLambda { .. } => "tau_lambda",
            StopRule::Rho { .. } => "rho",
            StopRule::RhoC { .. } => "rho_c",
            StopRule::Xi { .. } => "xi",
        }
    }

    /// Left endpoint (index into `d.values`) of the cell that triggers the
    /// rule, or `None` if it does not trigger on this window. `u` in `[0, 1)`
    /// drives the `Xi` rule.
    pub fn locate(&self, d: &Profile, tol: f64, u: f64) -> Option<usize> {
        let v = &d.values;
        if v.len() < 2 {
            return None;
        }
        let index_at = |x: f64| -> Option<usize> {
            let r = ((x - d.x(0)) / d.grid.dx()).ceil();
            if r < 0.0 {
                Some(0)
            } else if r >= v.len() as f64 {
                None
            } else {
                Some(r as usize)
            }
        };
        let first_reaching = |from: usize, level: f64| (from..v.len() - 1).find(|&i| v[i + 1] >= level);
        match *self {
            StopRule::TauLambda { lambda } => {
                let from = index_at(lambda)?;
                (from..v.len() - 1).find(|&i| v[i + 1] - v[i] > tol)
            }
            StopRule::Rho { h } => {
                if v[0] >= h {
                    return None;
                }
                first_reaching(0, h)
            }
            StopRule::RhoC { c, h } => {
                let from = index_at(c)?;
                first_reaching(from, v[from] + h)
            }
            StopRule::Xi { c, d: right } => {
                let from = index_at(c)?;
                let to = index_at(right).unwrap_or(v.len() - 1);
                let mass = v[to] - v[from];
                if !(mass > tol) {
                    return None;
                }
                let level = v[from] + u.max(f64::MIN_POSITIVE) * mass;
                first_reaching(from, level).filter(|&i| i < to)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalLimitConfig {
    pub stop_rules: Vec<StopRule>,
    /// Decreasing list of zoom factors.
    pub eps_list: Vec<f64>,
    pub t_eval: f64,
    pub replicas: usize,
    /// NC tolerance for `TauLambda`/`Xi`; `None` means the default
    /// `NC_TOL_FACTOR * max(1, max |D|)` per replica.
    pub tol: Option<f64>,
}

impl LocalLimitConfig {
    fn validate(&self, min_replicas: usize) -> Result<()> {
        if !(self.t_eval > 0.0) {
            return invalid("t_eval must be positive");
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|&e| !(e > 0.0)) {
            return invalid("eps list must be non-empty and positive");
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return invalid("eps list must be strictly decreasing");
        }
        if self.replicas < min_replicas {
            return invalid(format!("need at least {min_replicas} replicas, got {}", self.replicas));
        }
        if self.stop_rules.is_empty() {
            return invalid("no stop rule given");
        }
        Ok(())
    }

    /// Grid offsets `round(eps * t_eval / h)`; refuses scales finer than
    /// [`thresholds::LOCAL_LIMIT_MIN_CELLS`] cells of width `h`.
    fn offsets(&self, h: f64) -> Result<Vec<usize>> {
        self.eps_list
            .iter()
            .map(|&e| {
                let cells = e * self.t_eval / h;
                if cells < thresholds::LOCAL_LIMIT_MIN_CELLS {
                    Err(Error::Resolution(format!(
                        "eps = {e} spans {cells:.1} grid cells at t_eval = {}; need at least {}",
                        self.t_eval,
                        thresholds::LOCAL_LIMIT_MIN_CELLS
                    )))
                } else {
                    Ok(cells.round() as usize)
                }
            })
            .collect()
    }
}

/// Per-rule result of a local-limit run.
#[derive(Debug, Clone)]
pub struct LocalLimitOutcome {
    pub rule: StopRule,
    pub report: ExperimentReport,
    /// Rescaled increments per eps, in the order of `eps_list`.
    pub samples: Vec<Vec<f64>>,
}

pub fn default_nc_tol(d: &Profile) -> f64 {
    let max_abs = d.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    thresholds::NC_TOL_FACTOR * max_abs.max(1.0)
}

struct ReplicaHits {
    /// Per rule: per eps: `Some(rescaled increment)` if usable.
    per_rule: Vec<Vec<Option<f64>>>,
}

fn evaluate_replica(d: &Profile, cfg: &LocalLimitConfig, offsets: &[usize], u: f64) -> ReplicaHits {
    let tol = cfg.tol.unwrap_or_else(|| default_nc_tol(d));
    let per_rule = cfg
        .stop_rules
        .iter()
        .map(|rule| {
            let tau = rule.locate(d, tol, u);
            cfg.eps_list
                .iter()
                .zip(offsets)
                .map(|(&eps, &k)| {
                    let t = tau?;
                    let later = d.values.get(t + k)?;
                    Some((later - d.values[t]) / eps.sqrt())
                })
                .collect()
        })
        .collect();
    ReplicaHits { per_rule }
}

fn summarize(
    name: &str,
    hits: &[ReplicaHits],
    cfg: &LocalLimitConfig,
    seed: u64,
    ks_gate: f64,
    min_effective: usize,
) -> Result<Vec<LocalLimitOutcome>> {
    let sigma = (thresholds::LOCAL_TIME_RATE * cfg.t_eval).sqrt();
    cfg.stop_rules
        .iter()
        .enumerate()
        .map(|(ri, rule)| {
            let mut report = ExperimentReport::new(name, seed);
            report
                .param("stop_rule", rule.label())
                .param("rule", serde_json::to_value(rule).expect("rule serializes"))
                .param("eps_list", cfg.eps_list.clone())
                .param("t_eval", cfg.t_eval)
                .param("replicas", cfg.replicas);
            let mut samples = Vec::with_capacity(cfg.eps_list.len());
            let mut last_ks = 1.0;
            let mut last_n = 0usize;
            for (ei, eps) in cfg.eps_list.iter().enumerate() {
                let vals: Vec<f64> = hits.iter().filter_map(|h| h.per_rule[ri][ei]).collect();
                last_n = vals.len();
                last_ks = if vals.is_empty() {
                    1.0
                } else {
                    ks_one_sample(&Sample::new(vals.clone()), |x| half_normal_cdf(sigma, x))?
                };
                report
                    .stat(&format!("ks.eps_{eps}"), last_ks)
                    .stat(&format!("n_effective.eps_{eps}"), last_n as f64);
                samples.push(vals);
            }
            let triggered = hits.iter().filter(|h| h.per_rule[ri][0].is_some()).count();
            report
                .stat("ks_smallest_eps", last_ks)
                .stat("n_effective", last_n as f64)
                .stat("trigger_fraction", triggered as f64 / hits.len() as f64)
                .stat("excluded", (hits.len() - last_n) as f64)
                .stat("reference_sigma", sigma)
                .stat("threshold_ks", ks_gate);
            report.pass = last_ks <= ks_gate && last_n >= min_effective;
            Ok(LocalLimitOutcome {
                rule: *rule,
                report,
                samples,
            })
        })
        .collect()
}

/// Rescaled increments `eps^{-1/2} (D(τ + eps t) - D(τ))` of simulated
/// difference profiles, tested against the half-normal law with variance
/// `4 t` (the law of rate-four local time at `t`). All stop rules share the
/// same replicas.
pub fn local_limit_experiment(params: &SheetParams, cfg: &LocalLimitConfig) -> Result<Vec<LocalLimitOutcome>> {
    cfg.validate(thresholds::LOCAL_LIMIT_MIN_REPLICAS)?;
    let offsets = cfg.offsets(params.x_grid.dx())?;
    let hits = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let own = params.rng.child(r as u64);
            let d = difference_profile(&params.clone().with_rng(own.child(0)))?;
            let u: f64 = own.child(1).rng().random();
            Ok(evaluate_replica(&d, cfg, &offsets, u))
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(
        "local-limit",
        &hits,
        cfg,
        params.rng.master_seed,
        thresholds::LOCAL_LIMIT_KS,
        thresholds::LOCAL_LIMIT_MIN_EFFECTIVE,
    )
}

/// Harness calibration: `D` is replaced by the running maximum of an exact
/// rate-four Brownian path on `[0, window]` with spacing `dx`, whose local
/// limit at any stopping point of increase is known exactly.
pub fn local_limit_oracle(cfg: &LocalLimitConfig, dx: f64, window: f64, rng: RngSpec) -> Result<Vec<LocalLimitOutcome>> {
    cfg.validate(1)?;
    let offsets = cfg.offsets(dx)?;
    let steps = (window / dx).round() as usize;
    let hits = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let own = rng.child(r as u64);
            let path = brownian_path(thresholds::LOCAL_TIME_RATE, dx, steps, own.child(0))?;
            let d = running_max(&path);
            let u: f64 = own.child(1).rng().random();
            Ok(evaluate_replica(&d, cfg, &offsets, u))
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(
        "local-limit-oracle",
        &hits,
        cfg,
        rng.master_seed,
        thresholds::LOCAL_LIMIT_ORACLE_KS,
        0,
    )
}

#[derive(Debug, Clone)]
pub struct DimensionOutcome {
    pub report: ExperimentReport,
    pub fit: DimensionFit,
    /// Pooled slopes at `tol / 10`, `tol`, `10 tol` (default tolerance).
    pub sensitivity: Vec<(f64, f64)>,
    pub flagged_fraction: f64,
}

/// Pooled box-counting dimension of `NC(D)` over independent replicas.
pub fn nc_dimension_experiment(params: &SheetParams, replicas: usize, k_min: u32) -> Result<DimensionOutcome> {
    if replicas == 0 {
        return invalid("need at least one replica");
    }
    let profiles = (0..replicas)
        .into_par_iter()
        .map(|r| difference_profile(&params.clone().with_rng(params.rng.child(r as u64))))
        .collect::<Result<Vec<_>>>()?;
    let cells = params.x_grid.n_cells();
    let k_max = (cells as f64).log2().floor() as u32;
    if k_max <= k_min {
        return invalid(format!("window has only {cells} cells"));
    }
    let factors = [0.1, 1.0, 10.0];
    let mut fits = Vec::new();
    let mut fraction = 0.0;
    for &f in &factors {
        let masks = profiles
            .iter()
            .map(|d| nc_mask(d, f * default_nc_tol(d)))
            .collect::<Result<Vec<_>>>()?;
        if f == 1.0 {
            fraction = masks.iter().map(|m| m.flagged_fraction()).sum::<f64>() / masks.len() as f64;
        }
        fits.push(pooled_dimension(&masks, k_min, k_max)?);
    }
    let fit = fits[1].clone();
    let mut report = ExperimentReport::new("dimension", params.rng.master_seed);
    report
        .param("n", params.n)
        .param("y_a", params.y_a)
        .param("y_b", params.y_b)
        .param("x_lo", params.x_grid.x0())
        .param("x_hi", params.x_grid.last())
        .param("dx_env", params.dx_env)
        .param("replicas", replicas)
        .param("k_min", k_min)
        .param("k_max", k_max);
    report
        .stat("slope", fit.slope)
        .stat("r_squared", fit.r_squared)
        .stat("levels_fitted", fit.scales.len() as f64)
        .stat("flagged_fraction", fraction)
        .stat("slope_tol_div_10", fits[0].slope)
        .stat("slope_tol_times_10", fits[2].slope);
    let (lo, hi) = thresholds::NC_SLOPE;
    report.pass = fit.slope >= lo && fit.slope <= hi && fit.r_squared >= thresholds::NC_MIN_R2;
    let sensitivity = factors.iter().zip(&fits).map(|(&f, fit)| (f, fit.slope)).collect();
    Ok(DimensionOutcome {
        report,
        fit,
        sensitivity,
        flagged_fraction: fraction,
    })
}

/// Calibration of the box-counting pipeline on the zero set of rate-`rate`
/// Brownian motion on `[0, 1]`, whose dimension is one half. Cells are
/// flagged when the path comes within `sqrt(rate dx) / 2` of zero.
pub fn zero_set_experiment(rate: f64, dx: f64, replicas: usize, k_min: u32, rng: RngSpec) -> Result<DimensionOutcome> {
    if replicas == 0 {
        return invalid("need at least one replica");
    }
    let steps = (1.0 / dx).round() as usize;
    let eps = 0.5 * (rate * dx).sqrt();
    let masks = (0..replicas)
        .into_par_iter()
        .map(|r| zero_set_mask(&brownian_path(rate, dx, steps, rng.child(r as u64))?, eps))
        .collect::<Result<Vec<_>>>()?;
    let k_max = (steps as f64).log2().floor() as u32;
    let fit = pooled_dimension(&masks, k_min, k_max)?;
    let fraction = masks.iter().map(|m| m.flagged_fraction()).sum::<f64>() / masks.len() as f64;
    let mut report = ExperimentReport::new("zero-set", rng.master_seed);
    report
        .param("rate", rate)
        .param("dx", dx)
        .param("replicas", replicas)
        .param("k_min", k_min)
        .param("k_max", k_max);
    report
        .stat("slope", fit.slope)
        .stat("r_squared", fit.r_squared)
        .stat("levels_fitted", fit.scales.len() as f64)
        .stat("flagged_fraction", fraction);
    let (lo, hi) = thresholds::ZERO_SET_SLOPE;
    report.pass = fit.slope >= lo && fit.slope <= hi && fit.r_squared >= thresholds::ZERO_SET_MIN_R2;
    Ok(DimensionOutcome {
        report,
        fit,
        sensitivity: Vec::new(),
        flagged_fraction: fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_grid;

    fn profile(values: Vec<f64>) -> Profile {
        let g = make_grid(0.0, 1.0, values.len().max(2)).unwrap();
        Profile::on_grid(g, values).unwrap()
    }

    #[test]
    fn running_max_examples() {
        assert_eq!(running_max(&profile(vec![0.0, -1.0, 2.0, 1.0])).values, vec![0.0, 0.0, 2.0, 2.0]);
        let up = profile(vec![-1.0, 0.0, 0.0, 3.0]);
        assert_eq!(running_max(&up), up);
        let c = profile(vec![1.5; 5]);
        assert_eq!(running_max(&c), c);
    }

    #[test]
    fn occupation_examples() {
        let g = make_grid(0.0, 0.01, 101).unwrap();
        let away = Profile::on_grid(g, g.points().map(|s| 1.0 + s).collect()).unwrap();
        assert!(local_time_occupation(&away, 0.1).unwrap().values.iter().all(|&v| v == 0.0));

        // exact values (i - 50) / 100 so that +-0.1 sit on the boundary
        let centered = Profile::on_grid(g, (0..101).map(|i| (i as f64 - 50.0) / 100.0).collect()).unwrap();
        let l = local_time_occupation(&centered, 0.1).unwrap();
        assert!((l.values[100] - 19.0 * 0.01 / 0.2).abs() < 1e-12);

        let l = local_time_occupation(&centered, 0.75).unwrap();
        for (j, v) in l.values.iter().enumerate() {
            assert!((v - g.point(j) / 1.5).abs() < 1e-12);
        }
        assert!(local_time_occupation(&centered, 0.0).is_err());
    }

    #[test]
    fn nc_mask_examples() {
        let m = nc_mask(&profile(vec![0.0, 0.0, 1.0, 1.0, 2.0]), 0.5).unwrap();
        assert_eq!(m.mask, vec![false, true, false, true]);
        assert_eq!(nc_mask(&profile(vec![3.0; 6]), 0.0).unwrap().count(), 0);
    }

    #[test]
    fn box_dimension_full_and_single() {
        let g = make_grid(0.0, 1.0 / 1024.0, 1025).unwrap();
        let full = PointMask::new(g, vec![true; 1024]).unwrap();
        let fit = box_dimension(&full, 1, 10).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);

        let mut one = vec![false; 1024];
        one[700] = true;
        let fit = box_dimension(&PointMask::new(g, one).unwrap(), 1, 8).unwrap();
        assert_eq!(fit.counts, vec![1; 8]);
        assert!(fit.slope.abs() < 1e-12);

        let empty = PointMask::new(g, vec![false; 1024]).unwrap();
        assert_eq!(box_dimension(&empty, 1, 8), Err(Error::EmptySet));
        assert!(box_dimension(&full, 1, 11).is_err());
        assert!(box_dimension(&full, 4, 4).is_err());
    }

    #[test]
    fn box_counts_follow_scales() {
        let g = make_grid(0.0, 1.0, 257).unwrap();
        let mask: Vec<bool> = (0..256).map(|i| i % 7 == 0).collect();
        let fit = box_dimension(&PointMask::new(g, mask).unwrap(), 1, 8).unwrap();
        assert!(fit.scales.windows(2).all(|w| w[1] < w[0]));
        assert!(fit.counts.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn cantor_oracle() {
        let m = cantor_mask(8).unwrap();
        let fit = box_dimension_base(&m, 3, 2, 7).unwrap();
        assert_eq!(fit.counts, vec![4, 8, 16, 32, 64, 128]);
        assert!((fit.slope - 2f64.ln() / 3f64.ln()).abs() < thresholds::CANTOR_SLOPE_TOL);
    }

    #[test]
    fn incremental_and_stored_maxima_agree() {
        for r in 0..5 {
            let rng = RngSpec::new(77, r);
            let path = brownian_path(4.0, 1e-3, 1000, rng).unwrap();
            let stored = *running_max(&path).values.last().unwrap();
            assert_eq!(stored.to_bits(), brownian_final_max(4.0, 1e-3, 1000, rng).to_bits());
        }
    }

    #[test]
    fn stop_rules_on_a_staircase() {
        // D = 0 on [0, 10], then rises by 1 per cell
        let values: Vec<f64> = (0..30).map(|i| (i as f64 - 10.0).max(0.0)).collect();
        let d = profile(values);
        assert_eq!(StopRule::TauLambda { lambda: 3.0 }.locate(&d, 1e-9, 0.0), Some(10));
        assert_eq!(StopRule::TauLambda { lambda: 12.5 }.locate(&d, 1e-9, 0.0), Some(13));
        assert_eq!(StopRule::Rho { h: 4.5 }.locate(&d, 1e-9, 0.0), Some(14));
        assert_eq!(StopRule::Rho { h: -1.0 }.locate(&d, 1e-9, 0.0), None);
        assert_eq!(StopRule::Rho { h: 100.0 }.locate(&d, 1e-9, 0.0), None);
        assert_eq!(StopRule::RhoC { c: 12.0, h: 2.0 }.locate(&d, 1e-9, 0.0), Some(13));
        assert_eq!(StopRule::Xi { c: 0.0, d: 20.0 }.locate(&d, 1e-9, 0.55), Some(15));
        assert_eq!(StopRule::Xi { c: 0.0, d: 5.0 }.locate(&d, 1e-9, 0.5), None);
    }

    #[test]
    fn resolution_is_enforced() {
        let cfg = LocalLimitConfig {
            stop_rules: vec![StopRule::TauLambda { lambda: 0.0 }],
            eps_list: vec![1e-3],
            t_eval: 1.0,
            replicas: 10,
            tol: None,
        };
        assert!(matches!(
            local_limit_oracle(&cfg, 1e-5, 0.1, RngSpec::new(1, 0)),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn levy_degenerate_horizon() {
        let out = levy_experiment(4.0, 0.0, 1e-3, 0.1, 100, RngSpec::new(5, 0)).unwrap();
        assert_eq!(out.report.get("ks_two_sample"), Some(0.0));
        assert_eq!(out.report.get("ks_one_sample"), Some(0.0));
        assert!(out.running_max.iter().all(|&m| m == 0.0));
        assert!(out.report.pass);
        assert!(levy_experiment(4.0, 1.0, 1e-3, 0.1, 99, RngSpec::new(5, 0)).is_err());
    }
}
