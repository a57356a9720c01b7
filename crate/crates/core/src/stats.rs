//! Empirical distribution tools: KS statistics, the half-normal reference law,
//! least squares and percentile bootstrap.

use rand::Rng;
use statrs::function::erf::erf;

use crate::env::RngSpec;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    sorted: bool,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, sorted: false }
    }

    pub fn sorted(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { values, sorted: true }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Standard error of the mean (sample standard deviation over sqrt n).
    pub fn stderr(&self) -> f64 {
        let n = self.values.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let m = self.mean();
        let var = self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    }

    fn sorted_values(&self) -> std::borrow::Cow<'_, [f64]> {
        if self.sorted {
            std::borrow::Cow::Borrowed(&self.values)
        } else {
            let mut v = self.values.clone();
            v.sort_by(f64::total_cmp);
            std::borrow::Cow::Owned(v)
        }
    }
}

/// One-sided KS statistics `(D+, D-)` against a reference CDF. Ties are
/// grouped, so a sample compared with its own ECDF has `D+ = 0`.
pub fn ks_one_sample_sided(s: &Sample, cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if s.is_empty() {
        return invalid("KS statistic of an empty sample");
    }
    let v = s.sorted_values();
    let n = v.len() as f64;
    let (mut d_plus, mut d_minus) = (0.0f64, 0.0f64);
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d_plus = d_plus.max((j + 1) as f64 / n - f);
        d_minus = d_minus.max(f - i as f64 / n);
        i = j + 1;
    }
    Ok((d_plus, d_minus))
}

/// `D_n = max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)`.
pub fn ks_one_sample(s: &Sample, cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let (p, m) = ks_one_sample_sided(s, cdf)?;
    Ok(p.max(m))
}

/// `sup_x |F1(x) - F2(x)|` over the merged sample points.
pub fn ks_two_sample(s1: &Sample, s2: &Sample) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return invalid("KS statistic of an empty sample");
    }
    let (a, b) = (s1.sorted_values(), s2.sorted_values());
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    Ok(d)
}

/// CDF of `|N(0, sigma^2)|`: `erf(x / (sigma sqrt 2))` for `x >= 0`.
pub fn half_normal_cdf(sigma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        erf(x / (sigma * std::f64::consts::SQRT_2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`. A perfect fit
/// (including constant `ys`) has `r_squared = 1`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return invalid("xs and ys differ in length");
    }
    if xs.len() < 2 {
        return invalid("need at least two points");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return invalid("xs are all equal");
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Percentile bootstrap interval for `statistic` at confidence `level`.
pub fn bootstrap_ci(
    s: &Sample,
    statistic: impl Fn(&[f64]) -> f64,
    level: f64,
    resamples: usize,
    rng: RngSpec,
) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("confidence level must lie in (0, 1), got {level}"));
    }
    if resamples < 200 {
        return invalid(format!("need at least 200 resamples, got {resamples}"));
    }
    if s.is_empty() {
        return invalid("bootstrap of an empty sample");
    }
    let data = s.values();
    let mut rng = rng.rng();
    let mut buf = vec![0.0; data.len()];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = data[rng.random_range(0..data.len())];
            }
            statistic(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let pick = |q: f64| {
        let idx = (q * (resamples - 1) as f64).round() as usize;
        stats[idx.min(resamples - 1)]
    };
    Ok((pick(alpha), pick(1.0 - alpha)))
}
