//! Exact last passage percolation over piecewise-linear line ensembles.
//!
//! For a start `(y, n)` the passage values to line `j` satisfy
//! `L_n(x) = f_n(x) - f_n(y)` and
//! `L_j(x) = f_j(x) + max_{y <= s <= x} (L_{j+1}(s) - f_j(s))`.
//! Differences of piecewise-linear rows attain their maxima at breakpoints, so
//! restricting `s` to grid points loses nothing for the stored environment.

use std::fmt::Write as _;

use serde::Serialize;

use crate::env::{fmt17, Grid, Lines};
use crate::error::{invalid, Error, Result};
use crate::sheet::BoundaryData;

/// A point `(grid_index, line_index)`; line 1 is the top line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LatticePoint {
    pub grid_index: usize,
    pub line_index: usize,
}

impl LatticePoint {
    pub fn new(grid_index: usize, line_index: usize) -> Self {
        Self {
            grid_index,
            line_index,
        }
    }

    fn check<L: Lines + ?Sized>(&self, env: &L) -> Result<()> {
        if self.grid_index >= env.grid().n_points() {
            return Err(Error::OutOfRange(format!(
                "grid index {} outside 0..{}",
                self.grid_index,
                env.grid().n_points()
            )));
        }
        if self.line_index == 0 || self.line_index > env.num_lines() {
            return Err(Error::OutOfRange(format!(
                "line index {} outside 1..={}",
                self.line_index,
                env.num_lines()
            )));
        }
        Ok(())
    }
}

/// A real function sampled on `grid` at indices `offset..offset + values.len()`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub grid: Grid,
    pub offset: usize,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn new(grid: Grid, offset: usize, values: Vec<f64>) -> Result<Self> {
        if offset + values.len() > grid.n_points() {
            return invalid(format!(
                "profile of length {} at offset {offset} overruns a {}-point grid",
                values.len(),
                grid.n_points()
            ));
        }
        Ok(Self { grid, offset, values })
    }

    /// Profile covering the whole grid.
    pub fn on_grid(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, 0, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid coordinate of the `j`-th stored value.
    pub fn x(&self, j: usize) -> f64 {
        self.grid.point(self.offset + j)
    }

    /// Value at an absolute grid index.
    pub fn at(&self, grid_index: usize) -> Option<f64> {
        grid_index
            .checked_sub(self.offset)
            .and_then(|j| self.values.get(j).copied())
    }

    pub fn same_range(&self, other: &Profile) -> bool {
        self.grid == other.grid && self.offset == other.offset && self.values.len() == other.values.len()
    }

    pub fn to_csv(&self, value_name: &str) -> String {
        let mut out = format!("x,{value_name}\n");
        for (j, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", fmt17(self.x(j)), fmt17(*v));
        }
        out
    }
}

/// An up-right path recorded by its jump times. `jump_indices[k]` is the grid
/// index where the path leaves line `start.line_index - k` for the line above.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Geodesic {
    pub start: LatticePoint,
    pub end: LatticePoint,
    pub jump_indices: Vec<usize>,
}

impl Geodesic {
    pub fn weight<L: Lines + ?Sized>(&self, env: &L) -> f64 {
        let mut from = self.start.grid_index;
        let mut total = 0.0;
        for (k, &t) in self.jump_indices.iter().enumerate() {
            let f = env.line(self.start.line_index - k);
            total += f[t] - f[from];
            from = t;
        }
        let f = env.line(self.end.line_index);
        total + f[self.end.grid_index] - f[from]
    }

    pub fn is_monotone(&self) -> bool {
        let mut prev = self.start.grid_index;
        for &t in &self.jump_indices {
            if t < prev {
                return false;
            }
            prev = t;
        }
        prev <= self.end.grid_index
    }

    /// CSV `line_index,jump_x`: one row per jump, from line `line_index` to
    /// the line above it.
    pub fn to_csv(&self, grid: &Grid) -> String {
        let mut out = String::from("line_index,jump_x\n");
        for (k, &t) in self.jump_indices.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.start.line_index - k, fmt17(grid.point(t)));
        }
        out
    }
}

/// One relaxation step: turns `L_{j+1}` (stored from grid index `lo`) into
/// `L_j` in place, given the values of line `j`.
#[inline]
fn step_up(cur: &mut [f64], f: &[f64], lo: usize) {
    let mut run = f64::NEG_INFINITY;
    for (c, &fx) in cur.iter_mut().zip(&f[lo..]) {
        let d = *c - fx;
        if d > run {
            run = d;
        }
        *c = fx + run;
    }
}

/// Passage values from several starts on `start_line` to `target_line`,
/// sharing one pass over the environment. Entry `k` holds the values at grid
/// indices `starts[k]..n_points`.
pub fn multi_start_profiles<L: Lines + ?Sized>(
    env: &L,
    starts: &[usize],
    start_line: usize,
    target_line: usize,
) -> Result<Vec<Vec<f64>>> {
    let n_points = env.grid().n_points();
    if start_line == 0 || start_line > env.num_lines() {
        return Err(Error::OutOfRange(format!("start line {start_line} outside 1..={}", env.num_lines())));
    }
    if target_line == 0 || target_line > start_line {
        return invalid(format!(
            "target line {target_line} must lie in 1..={start_line} (paths only move up)"
        ));
    }
    if let Some(&s) = starts.iter().find(|&&s| s >= n_points) {
        return Err(Error::OutOfRange(format!("start index {s} outside 0..{n_points}")));
    }
    let f = env.line(start_line);
    let mut cur: Vec<Vec<f64>> = starts
        .iter()
        .map(|&s| f[s..].iter().map(|&v| v - f[s]).collect())
        .collect();
    drop(f);
    for j in (target_line..start_line).rev() {
        let f = env.line(j);
        for (c, &s) in cur.iter_mut().zip(starts) {
            step_up(c, &f, s);
        }
    }
    Ok(cur)
}

/// `x -> f[(y, n) -> (x, target_line)]` for every grid point `x >= y`.
pub fn lpp_profile<L: Lines + ?Sized>(env: &L, start: LatticePoint, target_line: usize) -> Result<Profile> {
    start.check(env)?;
    let mut rows = multi_start_profiles(env, &[start.grid_index], start.line_index, target_line)?;
    Profile::new(*env.grid(), start.grid_index, rows.pop().unwrap_or_default())
}

fn check_order<L: Lines + ?Sized>(env: &L, start: LatticePoint, end: LatticePoint) -> Result<()> {
    start.check(env)?;
    end.check(env)?;
    if end.grid_index < start.grid_index {
        return invalid(format!(
            "end index {} precedes start index {}",
            end.grid_index, start.grid_index
        ));
    }
    if end.line_index > start.line_index {
        return invalid(format!(
            "end line {} lies below start line {}",
            end.line_index, start.line_index
        ));
    }
    Ok(())
}

pub fn lpp_value<L: Lines + ?Sized>(env: &L, start: LatticePoint, end: LatticePoint) -> Result<f64> {
    check_order(env, start, end)?;
    let p = lpp_profile(env, start, end.line_index)?;
    Ok(p.values[end.grid_index - start.grid_index])
}

/// `f[start -> (column, j)]` for `j = 1..=start.line_index` (index `j - 1`).
pub fn lpp_column_values<L: Lines + ?Sized>(env: &L, start: LatticePoint, column: usize) -> Result<Vec<f64>> {
    start.check(env)?;
    if column < start.grid_index || column >= env.grid().n_points() {
        return invalid(format!(
            "column {column} must lie in {}..{}",
            start.grid_index,
            env.grid().n_points()
        ));
    }
    let n = start.line_index;
    let mut out = vec![0.0; n];
    let f = env.line(n);
    let mut cur: Vec<f64> = f[start.grid_index..=column].iter().map(|&v| v - f[start.grid_index]).collect();
    drop(f);
    out[n - 1] = cur[column - start.grid_index];
    for j in (1..n).rev() {
        let f = env.line(j);
        step_up(&mut cur, &f, start.grid_index);
        out[j - 1] = cur[column - start.grid_index];
    }
    Ok(out)
}

/// The leftmost geodesic: walking back from `end`, each jump time is the
/// smallest grid index attaining the maximum in the recursion.
pub fn geodesic<L: Lines + ?Sized>(env: &L, start: LatticePoint, end: LatticePoint) -> Result<Geodesic> {
    check_order(env, start, end)?;
    let (y, n, m) = (start.grid_index, start.line_index, end.line_index);
    let hi = end.grid_index;
    // layers[j] = L_j on [y, hi], for m <= j <= n
    let mut layers: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let f = env.line(n);
    layers[n] = f[y..=hi].iter().map(|&v| v - f[y]).collect();
    for j in (m..n).rev() {
        let f = env.line(j);
        let mut cur = layers[j + 1].clone();
        step_up(&mut cur, &f[..=hi], y);
        layers[j] = cur;
    }
    let mut jumps = Vec::with_capacity(n - m);
    let mut x = hi;
    for j in m..n {
        let f = env.line(j);
        let below = &layers[j + 1];
        let mut best = f64::NEG_INFINITY;
        let mut arg = y;
        for s in y..=x {
            let d = below[s - y] - f[s];
            if d > best {
                best = d;
                arg = s;
            }
        }
        jumps.push(arg);
        x = arg;
    }
    jumps.reverse();
    Ok(Geodesic {
        start,
        end,
        jump_indices: jumps,
    })
}

/// `PT(f1, f2)(x) = f1(x) + max_{s <= x} (f2(s) - f1(s))`, the running maximum
/// taken from the first stored point.
pub fn pitman_transform(f1: &Profile, f2: &Profile) -> Result<Profile> {
    if !f1.same_range(f2) {
        return invalid("Pitman transform needs both profiles on the same grid range");
    }
    let mut run = f64::NEG_INFINITY;
    let values = f1
        .values
        .iter()
        .zip(&f2.values)
        .map(|(&a, &b)| {
            run = run.max(b - a);
            a + run
        })
        .collect();
    Ok(Profile {
        grid: f1.grid,
        offset: f1.offset,
        values,
    })
}

/// Runs the reflection recursion `Z_K = b_K + f_K^λ`,
/// `Z_i = max(PT(f_i^λ, Z_{i+1}), b_i + f_i^λ)` down to `target_line`.
/// Returns `Z_target..=Z_K` (index 0 is `Z_target`).
pub(crate) fn boundary_recursion<L: Lines + ?Sized>(
    env: &L,
    boundary: &BoundaryData,
    target_line: usize,
) -> Result<Vec<Profile>> {
    let k = boundary.values.len();
    if k == 0 || k > env.num_lines() {
        return invalid(format!(
            "boundary has {k} values but the environment has {} lines",
            env.num_lines()
        ));
    }
    if target_line == 0 || target_line > k {
        return invalid(format!("target line {target_line} outside 1..={k}"));
    }
    let grid = *env.grid();
    let lam = boundary.column_index;
    if lam >= grid.n_points() {
        return Err(Error::OutOfRange(format!("boundary column {lam} outside the grid")));
    }
    let increment = |i: usize| -> Profile {
        let f = env.line(i);
        Profile {
            grid,
            offset: lam,
            values: f[lam..].iter().map(|&v| v - f[lam]).collect(),
        }
    };
    let mut out = Vec::with_capacity(k - target_line + 1);
    let mut z = increment(k);
    z.values.iter_mut().for_each(|v| *v += boundary.values[k - 1]);
    out.push(z);
    for i in (target_line..k).rev() {
        let inc = increment(i);
        let mut zi = pitman_transform(&inc, out.last().expect("non-empty"))?;
        let b = boundary.values[i - 1];
        for (v, &d) in zi.values.iter_mut().zip(&inc.values) {
            *v = v.max(b + d);
        }
        out.push(zi);
    }
    out.reverse();
    Ok(out)
}

/// `Z_i(x) = max_{j >= i} { b_j + f[(λ, j) -> (x, i)] }` for `x >= λ`, via the
/// reflection recursion in `O(k * n_points)`.
pub fn lpp_profile_with_boundary<L: Lines + ?Sized>(
    env: &L,
    boundary: &BoundaryData,
    target_line: usize,
) -> Result<Profile> {
    let mut zs = boundary_recursion(env, boundary, target_line)?;
    Ok(zs.swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_grid, Fixture, LineEnsemble};

    fn e2() -> LineEnsemble {
        Fixture::E2.build(0, make_grid(0.0, 0.5, 3).unwrap()).unwrap()
    }

    #[test]
    fn e2_profile_matches_brute_force() {
        let p = lpp_profile(&e2(), LatticePoint::new(0, 2), 1).unwrap();
        assert_eq!(p.values, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn single_line_is_an_increment() {
        let env = e2();
        let p = lpp_profile(&env, LatticePoint::new(1, 1), 1).unwrap();
        assert_eq!(p.offset, 1);
        assert_eq!(p.values, vec![0.0, 0.0]);
        let p = lpp_profile(&env, LatticePoint::new(0, 2), 2).unwrap();
        assert_eq!(p.values, vec![0.0, -1.0, 2.0]);
    }

    #[test]
    fn degenerate_interval_is_zero() {
        let env = crate::env::sample_brownian_lines(make_grid(0.0, 0.1, 20).unwrap(), 4, 1.0, crate::env::RngSpec::new(3, 0))
            .unwrap();
        for n in 1..=4 {
            for m in 1..=n {
                assert_eq!(lpp_value(&env, LatticePoint::new(7, n), LatticePoint::new(7, m)).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn directedness_is_enforced() {
        let env = e2();
        assert!(matches!(
            lpp_profile(&env, LatticePoint::new(0, 1), 2),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            lpp_value(&env, LatticePoint::new(2, 2), LatticePoint::new(1, 1)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            lpp_value(&env, LatticePoint::new(0, 3), LatticePoint::new(1, 1)),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn e2_values() {
        let env = e2();
        assert_eq!(lpp_value(&env, LatticePoint::new(0, 2), LatticePoint::new(2, 1)).unwrap(), 2.0);
        assert_eq!(lpp_value(&env, LatticePoint::new(0, 2), LatticePoint::new(1, 1)).unwrap(), 1.0);
    }

    #[test]
    fn linear_environment_telescopes() {
        let g = make_grid(0.0, 0.1, 31).unwrap();
        let env = Fixture::Linear.build(5, g).unwrap();
        for (y, x) in [(0, 30), (4, 17), (10, 10)] {
            let v = lpp_value(&env, LatticePoint::new(y, 5), LatticePoint::new(x, 1)).unwrap();
            assert!((v - (g.point(x) - g.point(y))).abs() < 1e-12);
        }
    }

    #[test]
    fn e2_geodesic() {
        let env = e2();
        let g = geodesic(&env, LatticePoint::new(0, 2), LatticePoint::new(2, 1)).unwrap();
        assert_eq!(g.jump_indices, vec![2]);
        assert_eq!(g.weight(&env), 2.0);
        assert_eq!(g.to_csv(env.grid()), "line_index,jump_x\n2,1.0000000000000000e0\n");
    }

    #[test]
    fn geodesic_on_one_line_has_no_jumps() {
        let env = e2();
        let g = geodesic(&env, LatticePoint::new(0, 1), LatticePoint::new(2, 1)).unwrap();
        assert!(g.jump_indices.is_empty());
        assert_eq!(g.weight(&env), 1.0);
    }

    #[test]
    fn geodesic_ties_go_left() {
        let env = Fixture::Constant.build(3, make_grid(0.0, 0.5, 3).unwrap()).unwrap();
        let g = geodesic(&env, LatticePoint::new(0, 2), LatticePoint::new(2, 1)).unwrap();
        assert_eq!(g.jump_indices, vec![0]);
        let g = geodesic(&env, LatticePoint::new(1, 3), LatticePoint::new(2, 1)).unwrap();
        assert_eq!(g.jump_indices, vec![1, 1]);
    }

    #[test]
    fn pitman_transform_examples() {
        let env = e2();
        let g = *env.grid();
        let f1 = Profile::on_grid(g, env.rows()[0].clone()).unwrap();
        let f2 = Profile::on_grid(g, env.rows()[1].clone()).unwrap();
        assert_eq!(pitman_transform(&f1, &f1).unwrap(), f1);
        assert_eq!(pitman_transform(&f1, &f2).unwrap().values, vec![0.0, 1.0, 2.0]);
        let shifted = Profile::on_grid(g, f2.values.iter().map(|v| v + 0.3).collect()).unwrap();
        let lhs = pitman_transform(&f1, &shifted).unwrap();
        let rhs = pitman_transform(&f1, &f2).unwrap();
        for (a, b) in lhs.values.iter().zip(&rhs.values) {
            assert!((a - (b + 0.3)).abs() < 1e-15);
        }
        let short = Profile::new(g, 1, vec![0.0, 0.0]).unwrap();
        assert!(pitman_transform(&f1, &short).is_err());
    }

    #[test]
    fn boundary_profile_examples() {
        let env = e2();
        let b = BoundaryData::new(0, vec![0.3, 0.0]);
        let z1 = lpp_profile_with_boundary(&env, &b, 1).unwrap();
        assert_eq!(z1.values, vec![0.3, 0.3 + 1.0, 2.0]);

        let zero = BoundaryData::new(0, vec![0.0, 0.0]);
        let z1 = lpp_profile_with_boundary(&env, &zero, 1).unwrap();
        let from2 = lpp_profile(&env, LatticePoint::new(0, 2), 1).unwrap();
        let on1 = lpp_profile(&env, LatticePoint::new(0, 1), 1).unwrap();
        for j in 0..3 {
            assert_eq!(z1.values[j], from2.values[j].max(on1.values[j]));
        }

        let single = LineEnsemble::from_rows(*env.grid(), vec![env.rows()[0].clone()], 0.0).unwrap();
        let z = lpp_profile_with_boundary(&single, &BoundaryData::new(1, vec![0.7]), 1).unwrap();
        assert_eq!(z.offset, 1);
        assert_eq!(z.values, vec![0.7, 0.7]);

        assert!(lpp_profile_with_boundary(&env, &BoundaryData::new(0, vec![0.0; 3]), 1).is_err());
        assert!(lpp_profile_with_boundary(&env, &BoundaryData::new(0, vec![]), 1).is_err());
    }

    #[test]
    fn column_values_match_profiles() {
        let env = e2();
        let v = lpp_column_values(&env, LatticePoint::new(0, 2), 1).unwrap();
        assert_eq!(v, vec![1.0, -1.0]);
    }
}
