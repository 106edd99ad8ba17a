//! Evaluation metrics: alignment distance between change sequences, a
//! time-domain Hurst estimator, autocorrelation summaries and the
//! numerical-average baselines for direction and magnitude.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Direction;

/// Dynamic time warping distance between two index sequences with absolute
/// difference cost, boundary-matched and unconstrained.
///
/// Both sequences empty gives 0; exactly one empty gives the `+inf`
/// sentinel (there is nothing to align against).
pub fn dtw_distance(a: &[f64], b: &[f64]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let cols = b.len() + 1;
    let mut prev = vec![f64::INFINITY; cols];
    let mut curr = vec![f64::INFINITY; cols];
    prev[0] = 0.0;
    for &ai in a {
        curr[0] = f64::INFINITY;
        for (j, &bj) in b.iter().enumerate() {
            let cost = (ai - bj).abs();
            curr[j + 1] = cost + prev[j + 1].min(curr[j]).min(prev[j]);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[cols - 1]
}

/// Convenience wrapper over integer change indices.
pub fn dtw_distance_indices(a: &[usize], b: &[usize]) -> f64 {
    let af: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let bf: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    dtw_distance(&af, &bf)
}

/// Hurst exponent from discrete second-order differences in the time domain.
///
/// With `V(a)` the mean of `(x_{i+2a} - 2 x_{i+a} + x_i)^2` at scales
/// `a = 1, 2`, the estimate is `0.5 * log2(V(2) / V(1))`, clamped to
/// `[0, 1]`. Values at or below one half indicate short-range dependence.
pub fn hurst_second_derivative(xs: &[f64]) -> Result<f64> {
    if xs.len() < 20 {
        return Err(Error::Range(format!("need at least 20 observations, got {}", xs.len())));
    }
    let v = |a: usize| -> f64 {
        let count = xs.len() - 2 * a;
        let mut acc = 0.0;
        for i in 0..count {
            let d = xs[i + 2 * a] - 2.0 * xs[i + a] + xs[i];
            acc += d * d;
        }
        acc / count as f64
    };
    let v1 = v(1);
    let v2 = v(2);
    if v1 == 0.0 {
        return Err(Error::InvalidInput(
            "second differences vanish (constant series), estimate undefined".into(),
        ));
    }
    Ok((0.5 * (v2 / v1).log2()).clamp(0.0, 1.0))
}

/// Sample autocorrelation up to `max_lag` plus the largest lag whose
/// autocorrelation exceeds the white-noise band `1.96 / sqrt(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfSummary {
    /// `rho[k]` for `k = 0..=max_lag`; `rho[0]` is always 1.
    pub rho: Vec<f64>,
    /// Largest significant lag, 0 when none is significant.
    pub last_significant_lag: usize,
    /// The significance band used.
    pub band: f64,
}

pub fn acf_summary(xs: &[f64], max_lag: usize) -> Result<AcfSummary> {
    let n = xs.len();
    if max_lag >= n {
        return Err(Error::Range(format!("max_lag {max_lag} must be below series length {n}")));
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    if var == 0.0 {
        return Err(Error::InvalidInput("zero variance, autocorrelation undefined".into()));
    }
    let mut rho = Vec::with_capacity(max_lag + 1);
    rho.push(1.0);
    for k in 1..=max_lag {
        let cov: f64 = (0..n - k).map(|i| (xs[i] - mean) * (xs[i + k] - mean)).sum();
        rho.push(cov / var);
    }
    let band = 1.96 / (n as f64).sqrt();
    let last_significant_lag =
        (1..=max_lag).rev().find(|&k| rho[k].abs() > band).unwrap_or(0);
    Ok(AcfSummary { rho, last_significant_lag, band })
}

/// Inclusive mean of `xs[from-1..=to-1]` (1-based bounds).
fn segment_average(xs: &[f64], from: usize, to: usize) -> f64 {
    let slice = &xs[from - 1..to];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Direction baseline: for each change the numerical averages of the two
/// flanking segments (bounded by the neighbouring changes, with 1 and `n`
/// appended) are compared; ties break towards `Down`.
pub fn direction_baseline(xs: &[f64], cps: &[usize]) -> Result<Vec<Direction>> {
    check_sorted_cps(xs.len(), cps)?;
    let n = xs.len();
    let mut out = Vec::with_capacity(cps.len());
    for (i, &cp) in cps.iter().enumerate() {
        let left = if i == 0 { 1 } else { cps[i - 1] };
        let right = if i + 1 < cps.len() { cps[i + 1] } else { n };
        let before = segment_average(xs, left, cp);
        let after = segment_average(xs, cp, right);
        out.push(if before < after { Direction::Up } else { Direction::Down });
    }
    Ok(out)
}

fn check_sorted_cps(n: usize, cps: &[usize]) -> Result<()> {
    let mut prev = 0usize;
    for &cp in cps {
        if cp <= prev || cp > n {
            return Err(Error::InvalidInput(format!(
                "change indices must be sorted, unique and within 1..={n}"
            )));
        }
        prev = cp;
    }
    Ok(())
}

/// Relative magnitudes of the mean change at each change point and the
/// fraction exceeding each threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeReport {
    /// `|mean_after - mean_before| / |mean_before|` per change; infinite when
    /// the pre-change mean is zero.
    pub magnitudes: Vec<f64>,
    /// Fraction of changes whose magnitude exceeds each input threshold.
    pub exceed_fractions: Vec<f64>,
}

/// Magnitude percentiles over the flanking-segment averages, as in
/// [`direction_baseline`].
pub fn magnitude_percentiles(
    xs: &[f64],
    cps: &[usize],
    thresholds: &[f64],
) -> Result<MagnitudeReport> {
    check_sorted_cps(xs.len(), cps)?;
    let n = xs.len();
    let mut magnitudes = Vec::with_capacity(cps.len());
    for (i, &cp) in cps.iter().enumerate() {
        let left = if i == 0 { 1 } else { cps[i - 1] };
        let right = if i + 1 < cps.len() { cps[i + 1] } else { n };
        let before = segment_average(xs, left, cp);
        let after = segment_average(xs, cp, right);
        let magnitude = if before == 0.0 {
            f64::INFINITY
        } else {
            (after - before).abs() / before.abs()
        };
        magnitudes.push(magnitude);
    }
    let exceed_fractions = thresholds
        .iter()
        .map(|&thr| {
            if magnitudes.is_empty() {
                0.0
            } else {
                magnitudes.iter().filter(|&&m| m > thr).count() as f64 / magnitudes.len() as f64
            }
        })
        .collect();
    Ok(MagnitudeReport { magnitudes, exceed_fractions })
}

/// Gaps between consecutive changes and their empirical quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterimTimes {
    pub gaps: Vec<usize>,
    /// `(level, value)` pairs at 5%, 10%, 50%, 90% and 95%; empty when there
    /// are fewer than two changes.
    pub quantiles: Vec<(f64, f64)>,
}

pub fn interim_times(cps: &[usize]) -> Result<InterimTimes> {
    check_sorted_cps(usize::MAX, cps)?;
    let gaps: Vec<usize> = cps.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return Ok(InterimTimes { gaps, quantiles: Vec::new() });
    }
    let mut sorted: Vec<f64> = gaps.iter().map(|&g| g as f64).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let quantiles = [0.05, 0.1, 0.5, 0.9, 0.95]
        .iter()
        .map(|&q| {
            let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
            (q, sorted[k - 1])
        })
        .collect();
    Ok(InterimTimes { gaps, quantiles })
}
