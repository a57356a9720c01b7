//! Environments for semi-discrete LPP: grids, line ensembles and the random
//! streams they are sampled from.
//!
//! Every row of an ensemble is read as the continuous piecewise-linear
//! function through its grid values, with row 1 the top line.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Uniform grid `x0 + i * dx`, `0 <= i < n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    x0: f64,
    dx: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(x0: f64, dx: f64, n_points: usize) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return invalid(format!("grid spacing must be positive, got {dx}"));
        }
        if !x0.is_finite() {
            return invalid("grid origin must be finite");
        }
        if n_points < 2 {
            return invalid(format!("grid needs at least 2 points, got {n_points}"));
        }
        Ok(Self { x0, dx, n_points })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_cells(&self) -> usize {
        self.n_points - 1
    }

    /// Computed directly as `x0 + i * dx` so it is bit-reproducible.
    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn last(&self) -> f64 {
        self.point(self.n_points - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.point(i))
    }

    /// Index of the grid point nearest to `x`, or `None` when `x` lies more
    /// than half a cell outside the grid.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        let r = ((x - self.x0) / self.dx).round();
        if r < 0.0 || r > (self.n_points - 1) as f64 || !r.is_finite() {
            None
        } else {
            Some(r as usize)
        }
    }
}

/// Convenience wrapper matching the `make_grid` operation.
pub fn make_grid(x0: f64, dx: f64, n_points: usize) -> Result<Grid> {
    Grid::new(x0, dx, n_points)
}

/// SplitMix64 finalizer; the seed-mixing function for [`RngSpec`].
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one reproducible random stream.
///
/// The ChaCha8 key is four successive SplitMix64 outputs seeded by
/// `master_seed`; `stream_index` selects the ChaCha stream (nonce). Distinct
/// pairs therefore address disjoint keystreams, and the draws of one stream
/// never depend on how many other streams were consumed or in which order.
/// [`RngSpec::child`] derives a sub-stream family by hashing the pair into a
/// fresh master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.master_seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Stream `index` of the family owned by this stream.
    pub fn child(&self, index: u64) -> RngSpec {
        let mixed = splitmix64(self.master_seed ^ splitmix64(self.stream_index ^ 0xA076_1D64_78BD_642F));
        RngSpec::new(mixed, index)
    }
}

/// Read access to the lines of an environment. Lines are 1-based, 1 = top.
pub trait Lines: Sync {
    fn grid(&self) -> &Grid;
    fn num_lines(&self) -> usize;
    fn line(&self, i: usize) -> Cow<'_, [f64]>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineEnsemble {
    grid: Grid,
    lines: Vec<Vec<f64>>,
    rate: f64,
}

impl LineEnsemble {
    /// `rows[0]` is line 1 (top).
    pub fn from_rows(grid: Grid, rows: Vec<Vec<f64>>, rate: f64) -> Result<Self> {
        if rows.is_empty() {
            return invalid("an ensemble needs at least one line");
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != grid.n_points()) {
            return invalid(format!(
                "line {} has {} values, grid has {} points",
                bad + 1,
                rows[bad].len(),
                grid.n_points()
            ));
        }
        if !(rate >= 0.0) {
            return invalid("rate must be non-negative");
        }
        Ok(Self {
            grid,
            lines: rows,
            rate,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.lines
    }

    /// Same piecewise-linear functions sampled on a grid `factor` times finer.
    /// LPP values between points of the coarse grid are unchanged.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return invalid("refinement factor must be at least 1");
        }
        let n = self.grid.n_cells() * factor + 1;
        let grid = Grid::new(self.grid.x0(), self.grid.dx() / factor as f64, n)?;
        let lines = self
            .lines
            .iter()
            .map(|row| {
                (0..n)
                    .map(|j| {
                        let (cell, r) = (j / factor, j % factor);
                        if r == 0 {
                            row[cell]
                        } else {
                            let w = r as f64 / factor as f64;
                            row[cell] + w * (row[cell + 1] - row[cell])
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            grid,
            lines,
            rate: self.rate,
        })
    }

    /// CSV with header `x,f1,...,fk`, one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x");
        for i in 1..=self.lines.len() {
            let _ = write!(out, ",f{i}");
        }
        out.push('\n');
        for j in 0..self.grid.n_points() {
            out.push_str(&fmt17(self.grid.point(j)));
            for row in &self.lines {
                out.push(',');
                out.push_str(&fmt17(row[j]));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`LineEnsemble::to_csv`]. The grid is
    /// recovered from the first two `x` values and checked against the rest.
    pub fn from_csv(text: &str, rate: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
        let k = headers.len().saturating_sub(1);
        if headers.get(0) != Some("x") || k == 0 {
            return Err(Error::Csv("expected header x,f1,...,fk".into()));
        }
        let mut xs = Vec::new();
        let mut rows = vec![Vec::new(); k];
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Csv(format!("{s:?}: {e}")));
            xs.push(parse(&rec[0])?);
            for (i, row) in rows.iter_mut().enumerate() {
                row.push(parse(&rec[i + 1])?);
            }
        }
        if xs.len() < 2 {
            return Err(Error::Csv("need at least two grid rows".into()));
        }
        let grid = Grid::new(xs[0], xs[1] - xs[0], xs.len())?;
        for (j, &x) in xs.iter().enumerate() {
            if (x - grid.point(j)).abs() > 1e-9 * (1.0 + x.abs()) {
                return Err(Error::Csv(format!("row {j}: x = {x} is off the uniform grid")));
            }
        }
        Self::from_rows(grid, rows, rate)
    }
}

impl Lines for LineEnsemble {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn num_lines(&self) -> usize {
        self.lines.len()
    }

    fn line(&self, i: usize) -> Cow<'_, [f64]> {
        Cow::Borrowed(&self.lines[i - 1])
    }
}

/// Independent Brownian lines of a given rate (variance per unit length),
/// anchored at 0 on the left endpoint and generated lazily: line `i` is drawn
/// from stream `rng.child(i)` each time it is requested.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianLines {
    grid: Grid,
    k: usize,
    rate: f64,
    rng: RngSpec,
}

impl BrownianLines {
    pub fn new(grid: Grid, k: usize, rate: f64, rng: RngSpec) -> Result<Self> {
        if k == 0 {
            return invalid("need at least one line");
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return invalid(format!("rate must be positive, got {rate}"));
        }
        Ok(Self { grid, k, rate, rng })
    }

    pub fn fill_line(&self, i: usize, out: &mut [f64]) {
        let mut rng = self.rng.child(i as u64).rng();
        let sd = (self.rate * self.grid.dx()).sqrt();
        let mut acc = 0.0;
        out[0] = 0.0;
        for v in out[1..].iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            acc += sd * z;
            *v = acc;
        }
    }

    pub fn materialize(&self) -> LineEnsemble {
        let rows = (1..=self.k)
            .map(|i| {
                let mut row = vec![0.0; self.grid.n_points()];
                self.fill_line(i, &mut row);
                row
            })
            .collect();
        LineEnsemble {
            grid: self.grid,
            lines: rows,
            rate: self.rate,
        }
    }
}

impl Lines for BrownianLines {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn num_lines(&self) -> usize {
        self.k
    }

    fn line(&self, i: usize) -> Cow<'_, [f64]> {
        assert!((1..=self.k).contains(&i), "line index {i} out of 1..={}", self.k);
        let mut row = vec![0.0; self.grid.n_points()];
        self.fill_line(i, &mut row);
        Cow::Owned(row)
    }
}

pub fn sample_brownian_lines(grid: Grid, k: usize, rate: f64, rng: RngSpec) -> Result<LineEnsemble> {
    Ok(BrownianLines::new(grid, k, rate, rng)?.materialize())
}

/// Named deterministic environments used as test fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fixture {
    /// Two lines on `{0, 0.5, 1}`: `f1 = [0, 1, 1]`, `f2 = [0, -1, 2]`.
    E2,
    /// Every line equal to `t - x0`.
    Linear,
    /// Every line identically zero.
    Constant,
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E2" => Ok(Fixture::E2),
            "linear" => Ok(Fixture::Linear),
            "constant" => Ok(Fixture::Constant),
            other => invalid(format!("unknown fixture {other:?} (expected E2, linear or constant)")),
        }
    }
}

impl Fixture {
    /// `k` and `grid` apply to `linear` and `constant`; E2 has its own.
    pub fn build(self, k: usize, grid: Grid) -> Result<LineEnsemble> {
        match self {
            Fixture::E2 => LineEnsemble::from_rows(
                Grid::new(0.0, 0.5, 3)?,
                vec![vec![0.0, 1.0, 1.0], vec![0.0, -1.0, 2.0]],
                0.0,
            ),
            Fixture::Linear => {
                let row: Vec<f64> = (0..grid.n_points()).map(|j| grid.point(j) - grid.x0()).collect();
                LineEnsemble::from_rows(grid, vec![row; k], 0.0)
            }
            Fixture::Constant => LineEnsemble::from_rows(grid, vec![vec![0.0; grid.n_points()]; k], 0.0),
        }
    }
}

/// The `fixture_ensemble` operation: builds a fixture by name.
pub fn fixture_ensemble(name: &str, k: usize, grid: Grid) -> Result<LineEnsemble> {
    name.parse::<Fixture>()?.build(k, grid)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
