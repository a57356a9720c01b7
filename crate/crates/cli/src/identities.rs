//! Exact identities of the discrete model, checked on random environments,
//! and the hand-computed ledger for the two-line fixture.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use semilpp::env::sample_brownian_lines;
use semilpp::error::Result;
use semilpp::fractal::nc_mask;
use semilpp::lpp::{
    geodesic, lpp_column_values, lpp_profile, lpp_profile_with_boundary, lpp_value, pitman_transform,
};
use semilpp::sheet::{boundary_data, maximizer_index, maximizer_indices, raw_difference, z_processes};
use semilpp::thresholds::{GEODESIC_REL_TOL, IDENTITY_ABS_TOL, IDENTITY_REL_TOL};
use semilpp::{make_grid, BoundaryData, Error, ExperimentReport, Fixture, LatticePoint, LineEnsemble, Lines, Profile, RngSpec};

pub const IDENTITIES: [&str; 14] = [
    "crossing_lemma",
    "column_decomposition",
    "superadditivity",
    "pitman_shift",
    "pitman_max_distribution",
    "geodesic_weight",
    "geodesic_monotone",
    "z_recursion",
    "z_sheet_consistency",
    "boundary_monotonicity",
    "ab_monotonicity",
    "maximizer_monotonicity",
    "maximizer_start_ordering",
    "d_monotonicity",
];

/// Random picks per identity and environment.
const TRIALS: usize = 4;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tally {
    pub checks: u64,
    pub violations: u64,
    pub worst_relative: f64,
}

impl Tally {
    /// `lhs == rhs` up to the identity tolerance.
    fn equal(&mut self, lhs: f64, rhs: f64, rel: f64) {
        self.record((lhs - rhs).abs(), lhs.abs().max(rhs.abs()), rel);
    }

    /// `lhs >= rhs` up to the identity tolerance.
    fn at_least(&mut self, lhs: f64, rhs: f64) {
        self.at_least_at_scale(lhs, rhs, lhs.abs().max(rhs.abs()));
    }

    /// As [`Tally::at_least`] for sides that are differences of terms of
    /// size `scale`.
    fn at_least_at_scale(&mut self, lhs: f64, rhs: f64, scale: f64) {
        self.record((rhs - lhs).max(0.0), scale, IDENTITY_REL_TOL);
    }

    fn holds(&mut self, ok: bool) {
        self.checks += 1;
        if !ok {
            self.violations += 1;
            self.worst_relative = f64::INFINITY;
        }
    }

    fn record(&mut self, excess: f64, scale: f64, rel: f64) {
        self.checks += 1;
        if excess > IDENTITY_ABS_TOL.max(rel * scale) {
            self.violations += 1;
        }
        let r = excess / scale.max(IDENTITY_ABS_TOL);
        if r > self.worst_relative || r.is_nan() {
            self.worst_relative = r;
        }
    }
}

/// Per-identity tallies, keyed by the names in [`IDENTITIES`].
pub type Tallies = BTreeMap<&'static str, Tally>;

fn pick_sorted(rng: &mut ChaCha8Rng, count: usize, hi: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..count).map(|_| rng.random_range(0..hi)).collect();
    v.sort_unstable();
    v
}

fn random_environment(rng: &mut ChaCha8Rng, spec: RngSpec) -> Result<LineEnsemble> {
    let k = rng.random_range(2..=6);
    let n_points = rng.random_range(8..=64);
    let rate = rng.random_range(0.1..4.0);
    let x0 = rng.random_range(-2.0..2.0);
    let dx = rng.random_range(0.01..1.0);
    sample_brownian_lines(make_grid(x0, dx, n_points)?, k, rate, spec)
}

/// Runs every identity on one environment, adding to `t`.
pub fn check_environment(env: &LineEnsemble, rng: &mut ChaCha8Rng, t: &mut Tallies) -> Result<()> {
    let k = env.num_lines();
    let len = env.grid().n_points();
    let f = |y: usize, n: usize, x: usize, m: usize| lpp_value(env, LatticePoint::new(y, n), LatticePoint::new(x, m));

    for _ in 0..TRIALS {
        let p = pick_sorted(rng, 4, len);
        let l: Vec<usize> = pick_sorted(rng, 4, k).iter().map(|i| i + 1).collect();
        let (y1, y2, x1, x2) = (p[0], p[1], p[2], p[3]);
        let (m1, m2, n1, n2) = (l[0], l[1], l[2], l[3]);
        let lhs = f(y1, n1, x1, m1)? + f(y2, n2, x2, m2)?;
        let rhs = f(y1, n1, x2, m2)? + f(y2, n2, x1, m1)?;
        t.entry("crossing_lemma").or_default().at_least(lhs, rhs);

        let p = pick_sorted(rng, 3, len);
        let n = rng.random_range(1..=k);
        let direct = f(p[0], n, p[2], 1)?;
        let column = lpp_column_values(env, LatticePoint::new(p[0], n), p[1])?;
        let mut best = f64::NEG_INFINITY;
        for i in 1..=n {
            best = best.max(column[i - 1] + f(p[1], i, p[2], 1)?);
        }
        t.entry("column_decomposition").or_default().equal(direct, best, IDENTITY_REL_TOL);

        let l: Vec<usize> = pick_sorted(rng, 3, k).iter().map(|i| i + 1).collect();
        let whole = f(p[0], l[2], p[2], l[0])?;
        let parts = f(p[0], l[2], p[1], l[1])? + f(p[1], l[1], p[2], l[0])?;
        t.entry("superadditivity").or_default().at_least(whole, parts);

        let l: Vec<usize> = pick_sorted(rng, 2, k).iter().map(|i| i + 1).collect();
        let (a, b) = (LatticePoint::new(p[0], l[1]), LatticePoint::new(p[2], l[0]));
        let g = geodesic(env, a, b)?;
        t.entry("geodesic_weight").or_default().equal(g.weight(env), f(p[0], l[1], p[2], l[0])?, GEODESIC_REL_TOL);
        t.entry("geodesic_monotone")
            .or_default()
            .holds(g.is_monotone() && g.jump_indices.len() == l[1] - l[0]);
    }

    let g = *env.grid();
    let rows: Vec<Profile> = (1..=k).map(|i| Profile::on_grid(g, env.line(i).into_owned())).collect::<Result<_>>()?;
    let a = rng.random_range(-5.0..5.0);
    let f1 = &rows[0];
    let shifted = Profile::on_grid(g, rows[1].values.iter().map(|v| v + a).collect())?;
    let lhs = pitman_transform(f1, &shifted)?;
    let rhs = pitman_transform(f1, &rows[1])?;
    for (u, v) in lhs.values.iter().zip(&rhs.values) {
        t.entry("pitman_shift").or_default().equal(*u, v + a, IDENTITY_REL_TOL);
    }
    let upper: Vec<f64> = (0..len)
        .map(|j| rows[1..].iter().map(|r| r.values[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let of_max = pitman_transform(f1, &Profile::on_grid(g, upper)?)?;
    let each = rows[1..].iter().map(|r| pitman_transform(f1, r)).collect::<Result<Vec<_>>>()?;
    for j in 0..len {
        let m = each.iter().map(|p| p.values[j]).fold(f64::NEG_INFINITY, f64::max);
        t.entry("pitman_max_distribution").or_default().equal(of_max.values[j], m, IDENTITY_REL_TOL);
    }

    for _ in 0..TRIALS {
        let lam = rng.random_range(0..len);
        let target = rng.random_range(1..=k);
        let mut b: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        if rng.random_bool(0.5) {
            b.sort_by(|x, y| y.total_cmp(x));
        }
        let boundary = BoundaryData::new(lam, b);
        let z = lpp_profile_with_boundary(env, &boundary, target)?;
        let direct = (target..=k)
            .map(|j| lpp_profile(env, LatticePoint::new(lam, j), target))
            .collect::<Result<Vec<_>>>()?;
        for (x, zv) in z.values.iter().enumerate() {
            let sup = (target..=k)
                .map(|j| boundary.values[j - 1] + direct[j - target].values[x])
                .fold(f64::NEG_INFINITY, f64::max);
            t.entry("z_recursion").or_default().equal(*zv, sup, IDENTITY_REL_TOL);
        }
    }

    for _ in 0..TRIALS {
        let p = pick_sorted(rng, 3, len);
        let (y, y2, lam) = (p[0], p[1], p[2]);
        let b = boundary_data(env, LatticePoint::new(y, k), lam, k)?;
        let b2 = boundary_data(env, LatticePoint::new(y2, k), lam, k)?;
        for w in b.values.windows(2) {
            t.entry("boundary_monotonicity").or_default().at_least(w[0], w[1]);
        }
        for i in 0..k {
            for j in i..k {
                let scale = [b.values[i], b.values[j], b2.values[i], b2.values[j]]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                t.entry("ab_monotonicity").or_default().at_least_at_scale(
                    b2.values[j] - b.values[j],
                    b2.values[i] - b.values[i],
                    scale,
                );
            }
        }
        let zs = z_processes(env, &b)?;
        let from = (1..=k)
            .map(|j| lpp_profile(env, LatticePoint::new(lam, j), 1))
            .collect::<Result<Vec<_>>>()?;
        for (x, zv) in zs[0].values.iter().enumerate() {
            let sup = (1..=k)
                .map(|j| b.values[j - 1] + from[j - 1].values[x])
                .fold(f64::NEG_INFINITY, f64::max);
            t.entry("z_sheet_consistency").or_default().equal(*zv, sup, IDENTITY_REL_TOL);
        }
        let idx = maximizer_indices(env, &b)?;
        let idx2 = maximizer_indices(env, &b2)?;
        for w in idx.windows(2) {
            t.entry("maximizer_monotonicity").or_default().holds(w[0] <= w[1]);
        }
        for (i1, i2) in idx.iter().zip(&idx2) {
            t.entry("maximizer_start_ordering").or_default().holds(i1 <= i2);
        }

        let n = rng.random_range(1..=k);
        let d = raw_difference(env, y, y2, n)?;
        for w in d.values.windows(2) {
            t.entry("d_monotonicity").or_default().at_least(w[1], w[0]);
        }
    }
    Ok(())
}

/// The exact-identity suite over `count` random environments.
pub fn cmd_identities(count: u64, seed: u64) -> Result<ExperimentReport> {
    if count == 0 {
        return Err(Error::InvalidArgument("identities needs count >= 1".into()));
    }
    let root = RngSpec::new(seed, 0);
    let mut t: Tallies = IDENTITIES.iter().map(|&n| (n, Tally::default())).collect();
    for i in 0..count {
        let own = root.child(i);
        let mut rng = own.child(0).rng();
        let env = random_environment(&mut rng, own.child(1))?;
        check_environment(&env, &mut rng, &mut t)?;
    }
    let mut report = ExperimentReport::new("identities", seed);
    report.param("count", count).param("trials_per_environment", TRIALS);
    let mut total = 0u64;
    for (name, tally) in &t {
        report
            .stat(&format!("{name}.checks"), tally.checks as f64)
            .stat(&format!("{name}.violations"), tally.violations as f64)
            .stat(&format!("{name}.worst_relative"), tally.worst_relative);
        total += tally.violations;
    }
    report
        .stat("total_violations", total as f64)
        .stat("relative_tolerance", IDENTITY_REL_TOL)
        .stat("absolute_tolerance", IDENTITY_ABS_TOL);
    report.pass = total == 0;
    Ok(report)
}

/// One hand-computed number of the two-line fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub item: &'static str,
    pub expected: f64,
    pub got: f64,
}

impl LedgerEntry {
    pub fn exact(&self) -> bool {
        self.expected == self.got
    }
}

/// Every hand-computed value for the two-line fixture, with what the
/// implementation produces. Comparison is exact.
pub fn e2_ledger() -> Result<Vec<LedgerEntry>> {
    let env = Fixture::E2.build(2, make_grid(0.0, 0.5, 3)?)?;
    let mut out = Vec::new();
    let mut push = |item: &'static str, expected: f64, got: f64| out.push(LedgerEntry { item, expected, got });

    push("lpp(0,2->1.0,1)", 2.0, lpp_value(&env, LatticePoint::new(0, 2), LatticePoint::new(2, 1))?);
    push("lpp(0,2->0.5,1)", 1.0, lpp_value(&env, LatticePoint::new(0, 2), LatticePoint::new(1, 1))?);
    let prof = lpp_profile(&env, LatticePoint::new(0, 2), 1)?;
    for (j, e) in [0.0, 1.0, 2.0].into_iter().enumerate() {
        push(["profile(0)", "profile(0.5)", "profile(1.0)"][j], e, prof.values[j]);
    }
    let g = geodesic(&env, LatticePoint::new(0, 2), LatticePoint::new(2, 1))?;
    push("geodesic.jump_x", 1.0, env.grid().point(g.jump_indices[0]));
    push("geodesic.jumps", 1.0, g.jump_indices.len() as f64);

    let f1 = Profile::on_grid(*env.grid(), env.rows()[0].clone())?;
    let f2 = Profile::on_grid(*env.grid(), env.rows()[1].clone())?;
    let pt = pitman_transform(&f1, &f2)?;
    for (j, e) in [0.0, 1.0, 2.0].into_iter().enumerate() {
        push(["pt(0)", "pt(0.5)", "pt(1.0)"][j], e, pt.values[j]);
    }
    let shifted = pitman_transform(&f1, &Profile::on_grid(*env.grid(), f2.values.iter().map(|v| v + 0.3).collect())?)?;
    for (j, e) in pt.values.iter().enumerate() {
        push(["pt_shift(0)", "pt_shift(0.5)", "pt_shift(1.0)"][j], e + 0.3, shifted.values[j]);
    }

    let b = boundary_data(&env, LatticePoint::new(0, 2), 1, 2)?;
    push("boundary.b1", 0.0, b.values[0]);
    push("boundary.b2", -2.0, b.values[1]);

    let zb = BoundaryData::new(0, vec![0.3, 0.0]);
    let zs = z_processes(&env, &zb)?;
    for (j, e) in [0.3, 0.3 + 1.0, 2.0].into_iter().enumerate() {
        push(["z1(0)", "z1(0.5)", "z1(1.0)"][j], e, zs[0].values[j]);
    }
    for (j, e) in [0.0, -1.0, 2.0].into_iter().enumerate() {
        push(["z2(0)", "z2(0.5)", "z2(1.0)"][j], e, zs[1].values[j]);
    }
    push("maximizer(1.0)", 2.0, maximizer_index(&env, &zb, 2)? as f64);
    push("maximizer(0.5)", 1.0, maximizer_index(&env, &zb, 1)? as f64);

    // the second start 0.25 is a breakpoint of the refined grid
    let fine = env.refine(2)?;
    let d = raw_difference(&fine, 0, 1, 2)?;
    push("D(0.5)", -0.5, d.at(2).unwrap_or(f64::NAN));
    push("D(1.0)", 0.5, d.at(4).unwrap_or(f64::NAN));

    let coarse = Profile::new(*env.grid(), 1, vec![-0.5, 0.5])?;
    let mask = nc_mask(&coarse, 0.1)?;
    push("nc_mask(tol=0.1)", 1.0, mask.count() as f64);
    Ok(out)
}

/// The ledger as a report; passes iff every entry is reproduced exactly.
pub fn cmd_e2_ledger(seed: u64) -> Result<(ExperimentReport, Vec<LedgerEntry>)> {
    let entries = e2_ledger()?;
    let mut report = ExperimentReport::new("identities", seed);
    report.param("fixture", "E2").param("count", 1);
    let mismatches = entries.iter().filter(|e| !e.exact()).count();
    for e in &entries {
        report.stat(&format!("e2.{}", e.item), e.got);
    }
    report
        .stat("e2.entries", entries.len() as f64)
        .stat("e2.mismatches", mismatches as f64)
        .stat("total_violations", mismatches as f64);
    report.pass = mismatches == 0;
    Ok((report, entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_count_is_rejected() {
        assert!(matches!(cmd_identities(0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn small_run_is_clean_and_reproducible() {
        let a = cmd_identities(25, 7).unwrap();
        assert!(a.pass, "{:?}", a.statistics);
        for name in IDENTITIES {
            assert!(a.get(&format!("{name}.checks")).unwrap() > 0.0, "{name} never checked");
        }
        let b = cmd_identities(25, 7).unwrap();
        assert_eq!(a.statistics_json(), b.statistics_json());
    }

    #[test]
    fn ledger_is_exact() {
        let (report, entries) = cmd_e2_ledger(0).unwrap();
        for e in &entries {
            assert!(e.exact(), "{}: expected {}, got {}", e.item, e.expected, e.got);
        }
        assert!(report.pass);
        assert_eq!(report.get("e2.z1(0.5)"), Some(0.3 + 1.0));
    }

    #[test]
    fn tally_flags_real_violations() {
        let mut t = Tally::default();
        t.at_least(1.0, 1.0 + 1e-12);
        assert_eq!(t.violations, 0);
        t.at_least(1.0, 1.1);
        assert_eq!(t.violations, 1);
        t.equal(3.0, 3.0 + 1e-6, IDENTITY_REL_TOL);
        assert_eq!(t.violations, 2);
        assert_eq!(t.checks, 3);
    }
}
