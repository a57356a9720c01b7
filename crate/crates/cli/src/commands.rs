//! Subcommand arguments and the experiments behind them.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use semilpp::fractal::{
    box_dimension_base, cantor_mask, levy_experiment, local_limit_experiment, local_limit_oracle,
    nc_dimension_experiment, zero_set_experiment, DimensionOutcome, LocalLimitConfig, LocalLimitOutcome, StopRule,
};
use semilpp::sheet::{difference_profile, finite_depth_mean_difference, growth_experiment, EnvKind};
use semilpp::stats::half_normal_cdf;
use semilpp::{thresholds, ExperimentReport, Fixture, RngSpec, SheetParams};

use crate::config;
use crate::identities::{cmd_e2_ledger, cmd_identities, IDENTITIES};
use crate::output::{provenance, write_all, Artifacts, CsvCell};
use crate::svg::{bar_chart, ecdf, Chart, Series, Style};

pub const DEFAULT_SEED: u64 = 1;

/// Comma-separated reals on the command line, a JSON array in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Reals(pub Vec<f64>);

impl FromStr for Reals {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Reals)
    }
}

#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Common {
    /// Master seed of every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of independent replicas.
    #[arg(long)]
    pub replicas: Option<u32>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub threads: Option<u32>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file whose keys mirror the long flags; flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Write `runtime_seconds = 0` so repeated runs give identical JSON.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub no_timing: Option<bool>,
}

impl Common {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn replicas(&self, default: usize) -> usize {
        self.replicas.map_or(default, |r| r as usize)
    }
}

/// Sheet prelimit parameters shared by the D-based commands.
#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SheetArgs {
    /// Prelimit depth (number of lines).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub y_a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub y_b: Option<f64>,
    /// Left end of the evaluation window.
    #[arg(long, allow_negative_numbers = true)]
    pub x_lo: Option<f64>,
    /// Right end of the evaluation window.
    #[arg(long, allow_negative_numbers = true)]
    pub x_hi: Option<f64>,
    /// Environment grid spacing in prelimit units.
    #[arg(long)]
    pub dx_env: Option<f64>,
    /// brownian, linear or constant.
    #[arg(long)]
    pub environment: Option<String>,
    /// Rate of the Brownian lines.
    #[arg(long)]
    pub rate: Option<f64>,
}

impl SheetArgs {
    fn params(&self, rng: RngSpec, dx_default: f64) -> Result<SheetParams> {
        let n = self.n.unwrap_or(thresholds::SHEET_DEFAULT_N);
        let p = SheetParams::native(
            n,
            self.y_a.unwrap_or(0.0),
            self.y_b.unwrap_or(0.5),
            self.x_lo.unwrap_or(-1.0),
            self.x_hi.unwrap_or(1.0),
            self.dx_env.unwrap_or(dx_default),
            rng,
        )?;
        let env = match self.environment.as_deref().unwrap_or("brownian") {
            "brownian" => EnvKind::Brownian {
                rate: self.rate.unwrap_or(1.0),
            },
            name => match name.parse::<Fixture>()? {
                Fixture::E2 => bail!("the E2 fixture has its own grid; use `identities --fixture E2`"),
                f => EnvKind::Fixture(f),
            },
        };
        Ok(p.with_environment(env))
    }
}

fn describe_sheet(report: &mut ExperimentReport, p: &SheetParams) {
    report
        .param("n", p.n)
        .param("y_a", p.y_a)
        .param("y_b", p.y_b)
        .param("x_lo", p.x_grid.x0())
        .param("x_hi", p.x_grid.last())
        .param("x_points", p.x_grid.n_points())
        .param("dx_env", p.dx_env)
        .param("environment", serde_json::to_value(p.environment).expect("environment serializes"));
}

#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct IdentitiesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Number of random environments.
    #[arg(long)]
    pub count: Option<u64>,
    /// Check the hand-computed ledger of a fixture (E2) instead.
    #[arg(long)]
    pub fixture: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct LevyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub rate: Option<f64>,
    /// Time at which M and L are compared.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Time step of the simulated paths.
    #[arg(long)]
    pub dx: Option<f64>,
    /// Occupation window; default 10 sqrt(rate dx).
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ProfileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub sheet: SheetArgs,
}

#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DimensionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub sheet: SheetArgs,
    /// nc, zero-set, cantor or all.
    #[arg(long)]
    pub target: Option<String>,
    /// Coarsest dyadic level entering the fits.
    #[arg(long)]
    pub k_min: Option<u32>,
    /// Time step of the zero-set calibration paths.
    #[arg(long)]
    pub zero_dx: Option<f64>,
    /// Replicas of the zero-set calibration.
    #[arg(long)]
    pub zero_replicas: Option<u32>,
    /// Depth of the Cantor oracle.
    #[arg(long)]
    pub cantor_depth: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct LocalLimitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub sheet: SheetArgs,
    /// sheet (simulated D) or oracle (running max of rate-four BM).
    #[arg(long)]
    pub mode: Option<String>,
    /// tau, rho, rho-c, xi or all (tau, rho and xi).
    #[arg(long)]
    pub stop_rule: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub d: Option<f64>,
    /// Decreasing zoom factors, comma separated.
    #[arg(long)]
    pub eps: Option<Reals>,
    #[arg(long)]
    pub t_eval: Option<f64>,
    /// Increment threshold for points of increase.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Oracle path step.
    #[arg(long)]
    pub oracle_dx: Option<f64>,
    /// Oracle path length.
    #[arg(long)]
    pub oracle_window: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GrowthArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub sheet: SheetArgs,
    /// Evaluation points M, comma separated.
    #[arg(long)]
    pub m_list: Option<Reals>,
}

#[derive(Debug, Clone, PartialEq, clap::Subcommand)]
pub enum Command {
    /// Exact identities on random environments (or a fixture ledger).
    Identities(IdentitiesArgs),
    /// Lévy's identity: running maximum against local time.
    Levy(LevyArgs),
    /// One difference profile D(x) of the sheet prelimit.
    Profile(ProfileArgs),
    /// Box-counting dimension of NC(D), with calibrations.
    Dimension(DimensionArgs),
    /// Local limit of D at random points of increase.
    LocalLimit(LocalLimitArgs),
    /// Growth of E D(M) in M.
    Growth(GrowthArgs),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Identities(a) => &a.common,
            Command::Levy(a) => &a.common,
            Command::Profile(a) => &a.common,
            Command::Dimension(a) => &a.common,
            Command::LocalLimit(a) => &a.common,
            Command::Growth(a) => &a.common,
        }
    }

    /// Folds in the `--config` file, if any.
    pub fn resolve(&self) -> Result<Command> {
        let path = self.common().config.clone();
        let path = path.as_deref();
        Ok(match self {
            Command::Identities(a) => Command::Identities(config::merge(a, path)?),
            Command::Levy(a) => Command::Levy(config::merge(a, path)?),
            Command::Profile(a) => Command::Profile(config::merge(a, path)?),
            Command::Dimension(a) => Command::Dimension(config::merge(a, path)?),
            Command::LocalLimit(a) => Command::LocalLimit(config::merge(a, path)?),
            Command::Growth(a) => Command::Growth(config::merge(a, path)?),
        })
    }
}

/// Resolves the configuration, runs the command on a pool of `--threads`
/// workers and returns what it produced (nothing is written).
pub fn execute(cmd: &Command) -> Result<Artifacts> {
    let cmd = cmd.resolve()?;
    let common = cmd.common().clone();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = common.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(t as usize);
    }
    let pool = builder.build().context("building the thread pool")?;
    let start = Instant::now();
    let mut artifacts = pool.install(|| match &cmd {
        Command::Identities(a) => identities(a),
        Command::Levy(a) => levy(a),
        Command::Profile(a) => profile(a),
        Command::Dimension(a) => dimension(a),
        Command::LocalLimit(a) => local_limit(a),
        Command::Growth(a) => growth(a),
    })?;
    artifacts.report.runtime_seconds = if common.no_timing.unwrap_or(false) {
        0.0
    } else {
        start.elapsed().as_secs_f64()
    };
    Ok(artifacts)
}

/// [`execute`] and write the outputs into `--out` (default `.`).
pub fn run(cmd: &Command) -> Result<(Artifacts, [PathBuf; 3])> {
    let artifacts = execute(cmd)?;
    let dir = cmd.resolve()?.common().out.clone().unwrap_or_else(|| PathBuf::from("."));
    let paths = write_all(&dir, &artifacts)?;
    Ok((artifacts, paths))
}

fn identities(a: &IdentitiesArgs) -> Result<Artifacts> {
    let seed = a.common.seed();
    let count = a.count.unwrap_or(1000);
    if let Some(name) = &a.fixture {
        if count == 0 {
            bail!("identities needs count >= 1");
        }
        if name.parse::<Fixture>()? != Fixture::E2 {
            bail!("only the E2 fixture has a hand-computed ledger");
        }
        let (report, entries) = cmd_e2_ledger(seed)?;
        let rows = entries
            .iter()
            .map(|e| vec![e.item.into(), e.expected.into(), e.got.into(), (e.exact() as usize).into()])
            .collect();
        let bars: Vec<(String, f64)> = entries.iter().map(|e| (e.item.to_string(), e.got.abs())).collect();
        let svg = bar_chart("E2 ledger: |value|", &provenance(&report), &bars);
        return Ok(Artifacts {
            csv_columns: ["item", "expected", "got", "exact"].map(String::from).to_vec(),
            csv_rows: rows,
            svg,
            report,
        });
    }
    let report = cmd_identities(count, seed)?;
    let rows = IDENTITIES
        .iter()
        .map(|name| {
            let g = |s: &str| report.get(&format!("{name}.{s}")).unwrap_or(f64::NAN);
            vec![(*name).into(), (g("checks") as usize).into(), (g("violations") as usize).into(), g("worst_relative").into()]
        })
        .collect();
    let bars: Vec<(String, f64)> = IDENTITIES
        .iter()
        .map(|name| (format!("{name} checks"), report.get(&format!("{name}.checks")).unwrap_or(0.0)))
        .collect();
    let title = format!("identity checks ({} violations)", report.get("total_violations").unwrap_or(f64::NAN));
    let svg = bar_chart(&title, &provenance(&report), &bars);
    Ok(Artifacts {
        csv_columns: ["identity", "checks", "violations", "worst_relative"].map(String::from).to_vec(),
        csv_rows: rows,
        svg,
        report,
    })
}

fn levy(a: &LevyArgs) -> Result<Artifacts> {
    let seed = a.common.seed();
    let rate = a.rate.unwrap_or(4.0);
    let dx = a.dx.unwrap_or(thresholds::LEVY_DEFAULT_DX);
    let eps = a.eps.unwrap_or(thresholds::LEVY_EPS_FACTOR * (rate * dx).sqrt());
    let t_max = a.t_max.unwrap_or(1.0);
    let out = levy_experiment(rate, t_max, dx, eps, a.common.replicas(5000), RngSpec::new(seed, 0))?;
    let rows = out
        .running_max
        .iter()
        .zip(&out.local_time)
        .enumerate()
        .map(|(i, (m, l))| vec![i.into(), (*m).into(), (*l).into()])
        .collect();
    let mut chart = Chart::new("Lévy: M(t) and L(t) against the half-normal law", "value", "CDF")
        .with_comment(provenance(&out.report));
    let (x, y) = ecdf(&out.running_max);
    chart.push(Series::new("running max M", x, y, Style::Step));
    let (x, y) = ecdf(&out.local_time);
    chart.push(Series::new("local time L", x, y, Style::Step));
    let sigma = (rate * t_max).sqrt();
    let top = out.running_max.iter().chain(&out.local_time).fold(0.0f64, |m, v| m.max(*v));
    let xs: Vec<f64> = (0..=200).map(|i| top * i as f64 / 200.0).collect();
    let ys = xs.iter().map(|&x| half_normal_cdf(sigma, x)).collect();
    chart.push(Series::new(format!("half-normal σ = {sigma}"), xs, ys, Style::Dashed));
    Ok(Artifacts {
        csv_columns: ["replica", "running_max", "local_time"].map(String::from).to_vec(),
        csv_rows: rows,
        svg: chart.render(),
        report: out.report,
    })
}

fn profile(a: &ProfileArgs) -> Result<Artifacts> {
    let seed = a.common.seed();
    let params = a.sheet.params(RngSpec::new(seed, 0), 5e-4)?;
    let d = difference_profile(&params)?;
    let max_abs = d.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = thresholds::IDENTITY_ABS_TOL.max(thresholds::IDENTITY_REL_TOL * max_abs);
    let violations = d.values.windows(2).filter(|w| w[1] < w[0] - tol).count();
    let max_drop = d.values.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max);
    let nc_tol = semilpp::fractal::default_nc_tol(&d);
    let flagged = d.values.windows(2).filter(|w| w[1] - w[0] > nc_tol).count();

    let mut report = ExperimentReport::new("profile", seed);
    describe_sheet(&mut report, &params);
    report
        .stat("d_start", d.values[0])
        .stat("d_end", *d.values.last().expect("non-empty"))
        .stat("total_increase", d.values.last().expect("non-empty") - d.values[0])
        .stat("monotonicity_violations", violations as f64)
        .stat("max_decrease", max_drop)
        .stat("nc_fraction", flagged as f64 / (d.len() - 1) as f64)
        .stat("sheet_dx", params.x_grid.dx());
    report.pass = violations == 0;

    let xs: Vec<f64> = (0..d.len()).map(|j| d.x(j)).collect();
    let rows = xs.iter().zip(&d.values).map(|(x, v)| vec![(*x).into(), (*v).into()]).collect();
    let mut chart = Chart::new("difference profile D(x)", "x", "D").with_comment(provenance(&report));
    chart.push(Series::new(format!("D, n = {}", params.n), xs, d.values.clone(), Style::Step));
    Ok(Artifacts {
        csv_columns: ["x", "D"].map(String::from).to_vec(),
        csv_rows: rows,
        svg: chart.render(),
        report,
    })
}

fn add_fit(label: &str, scales: &[f64], counts: &[usize], slope: f64, rows: &mut Vec<Vec<CsvCell>>, chart: &mut Chart) {
    let xs: Vec<f64> = scales.iter().map(|s| (1.0 / s).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    for (s, c) in scales.iter().zip(counts) {
        rows.push(vec![label.into(), (*s).into(), (*c).into()]);
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let fit: Vec<f64> = xs.iter().map(|x| my + slope * (x - mx)).collect();
    chart.push(Series::new(label, xs.clone(), ys, Style::Markers));
    chart.push(Series::new(format!("{label} fit, slope {slope:.4}"), xs, fit, Style::Dashed));
}

fn dimension(a: &DimensionArgs) -> Result<Artifacts> {
    let seed = a.common.seed();
    let target = a.target.as_deref().unwrap_or("all");
    let targets: Vec<&str> = match target {
        "all" => vec!["cantor", "zero-set", "nc"],
        "nc" | "zero-set" | "cantor" => vec![target],
        other => bail!("unknown target {other:?} (expected nc, zero-set, cantor or all)"),
    };
    let k_min = a.k_min.unwrap_or(4);
    let root = RngSpec::new(seed, 0);
    let mut report = ExperimentReport::new("dimension", seed);
    report.param("target", target).param("k_min", k_min);
    report.pass = true;
    let mut rows: Vec<Vec<CsvCell>> = Vec::new();
    let mut chart = Chart::new("box counting: log N against log(1/δ)", "log(1/δ)", "log N");

    for t in targets {
        match t {
            "cantor" => {
                let depth = a.cantor_depth.unwrap_or(12);
                let mask = cantor_mask(depth)?;
                let fit = box_dimension_base(&mask, 3, 1, depth)?;
                let exact = 2f64.ln() / 3f64.ln();
                let err = (fit.slope - exact).abs();
                let mut r = ExperimentReport::new("cantor", seed);
                r.stat("slope", fit.slope)
                    .stat("expected", exact)
                    .stat("abs_error", err)
                    .stat("r_squared", fit.r_squared);
                r.pass = err <= thresholds::CANTOR_SLOPE_TOL;
                report.param("cantor_depth", depth);
                report.absorb("cantor", &r);
                add_fit("cantor", &fit.scales, &fit.counts, fit.slope, &mut rows, &mut chart);
            }
            "zero-set" => {
                let dx = a.zero_dx.unwrap_or(thresholds::ZERO_SET_DEFAULT_DX);
                let reps = a.zero_replicas.map_or(thresholds::ZERO_SET_DEFAULT_REPLICAS, |r| r as usize);
                let rate = a.sheet.rate.unwrap_or(1.0);
                let out = zero_set_experiment(rate, dx, reps, k_min, root.child(1))?;
                report.param("zero_dx", dx).param("zero_replicas", reps).param("zero_rate", rate);
                report.absorb("zero_set", &out.report);
                add_fit("zero set", &out.fit.scales, &out.fit.counts, out.fit.slope, &mut rows, &mut chart);
            }
            _ => {
                let params = a.sheet.params(root.child(2), 5e-4)?;
                let reps = a.common.replicas(50);
                let DimensionOutcome { report: r, fit, sensitivity, .. } =
                    nc_dimension_experiment(&params, reps, k_min)?;
                describe_sheet(&mut report, &params);
                report.param("replicas", reps);
                report.absorb("nc", &r);
                for (f, s) in sensitivity {
                    rows.push(vec!["nc sensitivity".into(), f.into(), CsvCell::Real(s)]);
                }
                add_fit("NC(D)", &fit.scales, &fit.counts, fit.slope, &mut rows, &mut chart);
            }
        }
    }
    let chart = chart.with_comment(provenance(&report));
    Ok(Artifacts {
        csv_columns: ["target", "delta", "count"].map(String::from).to_vec(),
        csv_rows: rows,
        svg: chart.render(),
        report,
    })
}

/// Default zoom factors `2^-6, 2^-7, 2^-8`.
pub fn default_eps() -> Vec<f64> {
    vec![2f64.powi(-6), 2f64.powi(-7), 2f64.powi(-8)]
}

fn local_limit(a: &LocalLimitArgs) -> Result<Artifacts> {
    let seed = a.common.seed();
    let mode = a.mode.as_deref().unwrap_or("sheet");
    let oracle = match mode {
        "sheet" => false,
        "oracle" => true,
        other => bail!("unknown mode {other:?} (expected sheet or oracle)"),
    };
    let window = a.oracle_window.unwrap_or(1.0 / 16.0);
    let (lambda, h, c, d) = if oracle {
        (a.lambda.unwrap_or(0.0), a.h.unwrap_or(0.25), a.c.unwrap_or(0.0), a.d.unwrap_or(window / 2.0))
    } else {
        (a.lambda.unwrap_or(-0.75), a.h.unwrap_or(-0.25), a.c.unwrap_or(-0.75), a.d.unwrap_or(0.75))
    };
    let rules = match a.stop_rule.as_deref().unwrap_or("all") {
        "all" => vec![StopRule::TauLambda { lambda }, StopRule::Rho { h }, StopRule::Xi { c, d }],
        "tau" => vec![StopRule::TauLambda { lambda }],
        "rho" => vec![StopRule::Rho { h }],
        "rho-c" => vec![StopRule::RhoC { c, h }],
        "xi" => vec![StopRule::Xi { c, d }],
        other => bail!("unknown stop rule {other:?} (expected tau, rho, rho-c, xi or all)"),
    };
    let cfg = LocalLimitConfig {
        stop_rules: rules,
        eps_list: a.eps.clone().map_or_else(default_eps, |r| r.0),
        t_eval: a.t_eval.unwrap_or(1.0),
        replicas: a.common.replicas(if oracle { 2000 } else { 640 }),
        tol: a.tol,
    };
    let root = RngSpec::new(seed, 0);
    let mut report = ExperimentReport::new("local-limit", seed);
    report
        .param("mode", mode)
        .param("stop_rules", serde_json::to_value(&cfg.stop_rules).expect("rules serialize"))
        .param("eps_list", cfg.eps_list.clone())
        .param("t_eval", cfg.t_eval)
        .param("replicas", cfg.replicas);
    let outcomes: Vec<LocalLimitOutcome> = if oracle {
        let dx = a.oracle_dx.unwrap_or(2f64.powi(-20));
        report.param("oracle_dx", dx).param("oracle_window", window);
        local_limit_oracle(&cfg, dx, window, root)?
    } else {
        let params = a.sheet.params(root, 7.5e-4)?;
        describe_sheet(&mut report, &params);
        local_limit_experiment(&params, &cfg)?
    };
    report.pass = true;
    let sigma = (thresholds::LOCAL_TIME_RATE * cfg.t_eval).sqrt();
    let mut rows = Vec::new();
    let mut chart = Chart::new(
        "rescaled increments at the smallest ε against |N(0, 4t)|",
        "ε^{-1/2}(D(τ+εt) - D(τ))",
        "CDF",
    );
    let mut top = 0.0f64;
    for o in &outcomes {
        report.absorb(o.rule.label(), &o.report);
        for (eps, vals) in cfg.eps_list.iter().zip(&o.samples) {
            for v in vals {
                rows.push(vec![o.rule.label().into(), (*eps).into(), (*v).into()]);
            }
        }
        if let Some(last) = o.samples.last() {
            top = last.iter().fold(top, |m, v| m.max(*v));
            let (x, y) = ecdf(last);
            chart.push(Series::new(o.rule.label(), x, y, Style::Step));
        }
    }
    let xs: Vec<f64> = (0..=200).map(|i| top.max(1.0) * i as f64 / 200.0).collect();
    let ys = xs.iter().map(|&x| half_normal_cdf(sigma, x)).collect();
    chart.push(Series::new("half-normal", xs, ys, Style::Dashed));
    let chart = chart.with_comment(provenance(&report));
    Ok(Artifacts {
        csv_columns: ["rule", "eps", "increment"].map(String::from).to_vec(),
        csv_rows: rows,
        svg: chart.render(),
        report,
    })
}

fn growth(a: &GrowthArgs) -> Result<Artifacts> {
    let seed = a.common.seed();
    let m_list = a.m_list.clone().map_or_else(|| vec![1.0, 2.0, 4.0, 8.0], |r| r.0);
    let (lo, hi) = (
        m_list.first().copied().unwrap_or(0.0),
        m_list.last().copied().unwrap_or(0.0),
    );
    let mut sheet = a.sheet.clone();
    sheet.x_lo = Some(lo);
    sheet.x_hi = Some(if hi > lo { hi } else { lo + 1.0 });
    let params = sheet.params(RngSpec::new(seed, 0), 0.01)?;
    let replicas = a.common.replicas(200);
    let out = growth_experiment(&params, &m_list, replicas)?;
    let mut report = out.report;
    describe_sheet(&mut report, &params);
    report.params.remove("x_lo");
    report.params.remove("x_hi");
    report.params.remove("x_points");

    let rows = out
        .rows
        .iter()
        .map(|r| vec![r.m.into(), r.mean_d.into(), r.stderr.into()])
        .collect();
    let ms: Vec<f64> = out.rows.iter().map(|r| r.m).collect();
    let means: Vec<f64> = out.rows.iter().map(|r| r.mean_d).collect();
    let slope = report.get("slope").unwrap_or(f64::NAN);
    let intercept = report.get("intercept").unwrap_or(f64::NAN);
    let target = report.get("target").unwrap_or(f64::NAN);
    let mut chart = Chart::new("mean D(M) against M", "M", "mean D(M)").with_comment(provenance(&report));
    chart.push(Series::new("mean D(M)", ms.clone(), means.clone(), Style::Markers));
    chart.push(Series::new(
        format!("fit, slope {slope:.4}"),
        ms.clone(),
        ms.iter().map(|m| intercept + slope * m).collect(),
        Style::Line,
    ));
    let anchor = means.first().copied().unwrap_or(0.0) - target * lo;
    chart.push(Series::new(
        format!("target slope {target}"),
        ms.clone(),
        ms.iter().map(|m| anchor + target * m).collect(),
        Style::Dashed,
    ));
    chart.push(Series::new(
        "finite-depth reference",
        ms.clone(),
        ms.iter()
            .map(|&m| finite_depth_mean_difference(params.n, params.y_a, params.y_b, m))
            .collect(),
        Style::Dashed,
    ));
    Ok(Artifacts {
        csv_columns: ["M", "mean_D", "stderr"].map(String::from).to_vec(),
        csv_rows: rows,
        svg: chart.render(),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_parse() {
        assert_eq!("1, 2,4.5".parse::<Reals>().unwrap(), Reals(vec![1.0, 2.0, 4.5]));
        assert!("1,x".parse::<Reals>().is_err());
    }

    #[test]
    fn e2_is_not_a_sheet_environment() {
        let s = SheetArgs {
            environment: Some("E2".into()),
            ..SheetArgs::default()
        };
        assert!(s.params(RngSpec::new(1, 0), 0.01).is_err());
    }
}
