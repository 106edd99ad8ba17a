//! Retrospective max-type CUSUM test for a single mean change.
//!
//! The detector path over a segment of length `n` is
//!
//! ```text
//! C_k = (1/sqrt(n)) * (sum_{i<=k} X_i - k * mean(X)),   k = 1..n,
//! ```
//!
//! and the statistic is `max_k C_k' * omega_hat^{-1} * C_k` with `omega_hat`
//! the Bartlett long-run covariance of the same segment. The maximiser
//! estimates the change location; the null of a constant mean is rejected
//! when the statistic exceeds the critical value of the supremum of a sum of
//! squared Brownian bridges.

use crate::covariance::{bartlett_long_run, CovMatrix};
use crate::critical_values::CvProvider;
use crate::error::{Error, Result};
use crate::series::{sample_mean, Segment, TimeSeries};

/// Segments shorter than this are reported untestable: the bandwidth of the
/// long-run estimator degenerates and the asymptotics carry no meaning.
pub const MIN_TESTABLE_LEN: usize = 10;

/// Why a segment could not be tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UntestableReason {
    /// Fewer than [`MIN_TESTABLE_LEN`] observations.
    TooShort,
    /// The long-run covariance is degenerate or not positive definite.
    DegenerateCovariance,
}

/// Statistic, maximiser and testability of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineStat {
    /// Maximum of the normalised quadratic form; 0 when untestable.
    pub statistic: f64,
    /// Absolute 1-based index attaining the maximum, ties broken towards the
    /// smallest index.
    pub argmax_index: usize,
    pub untestable: Option<UntestableReason>,
}

/// Outcome of comparing the statistic against a critical value.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineResult {
    pub statistic: f64,
    pub argmax_index: usize,
    /// Critical value the statistic was compared against.
    pub cv: f64,
    /// True iff the segment was testable and the statistic exceeds `cv`.
    pub rejected: bool,
    pub untestable: Option<UntestableReason>,
}

/// CUSUM detector path over a segment, one `r`-vector per position.
///
/// The last element telescopes to the zero vector.
pub fn cusum_path(series: &TimeSeries, seg: Segment) -> Result<Vec<Vec<f64>>> {
    seg.check_within(series.len())?;
    let n = seg.len();
    if n < 2 {
        return Err(Error::Range(format!("segment length {n} below 2")));
    }
    let dim = series.dim();
    let mean = sample_mean(series, seg)?;
    let scale = 1.0 / (n as f64).sqrt();
    let mut running = vec![0.0f64; dim];
    let mut path = Vec::with_capacity(n);
    for k in 1..=n {
        let x = series.row(seg.start - 1 + k);
        let mut c = vec![0.0f64; dim];
        for j in 0..dim {
            running[j] += x[j];
            c[j] = scale * (running[j] - k as f64 * mean[j]);
        }
        path.push(c);
    }
    Ok(path)
}

/// Compute the max-type statistic and its maximiser over a segment.
///
/// The statistic is still computed for short segments when the covariance
/// allows it (useful for diagnostics), but such segments are flagged
/// untestable and never rejected.
pub fn offline_statistic(series: &TimeSeries, seg: Segment) -> Result<OfflineStat> {
    seg.check_within(series.len())?;
    let n = seg.len();
    if n < 2 {
        return Ok(OfflineStat {
            statistic: 0.0,
            argmax_index: seg.start,
            untestable: Some(UntestableReason::TooShort),
        });
    }
    let long_run = bartlett_long_run(series, seg)?;
    if long_run.degenerate {
        return Ok(OfflineStat {
            statistic: 0.0,
            argmax_index: seg.start,
            untestable: Some(UntestableReason::DegenerateCovariance),
        });
    }
    let omega_inv = match long_run.cov.inverse() {
        Ok(inv) => inv,
        Err(Error::Singular { .. }) => {
            return Ok(OfflineStat {
                statistic: 0.0,
                argmax_index: seg.start,
                untestable: Some(UntestableReason::DegenerateCovariance),
            });
        }
        Err(e) => return Err(e),
    };
    let (statistic, argmax_rel) = max_quadratic_form(series, seg, &omega_inv);
    Ok(OfflineStat {
        statistic,
        argmax_index: seg.start - 1 + argmax_rel,
        untestable: (n < MIN_TESTABLE_LEN).then_some(UntestableReason::TooShort),
    })
}

fn max_quadratic_form(series: &TimeSeries, seg: Segment, omega_inv: &CovMatrix) -> (f64, usize) {
    let n = seg.len();
    let dim = series.dim();
    let mean = sample_mean(series, seg).expect("segment already checked");
    let scale = 1.0 / (n as f64).sqrt();
    let mut running = vec![0.0f64; dim];
    let mut c = vec![0.0f64; dim];
    let mut best = f64::NEG_INFINITY;
    let mut best_k = 1usize;
    for k in 1..=n {
        let x = series.row(seg.start - 1 + k);
        for j in 0..dim {
            running[j] += x[j];
            c[j] = scale * (running[j] - k as f64 * mean[j]);
        }
        let q = omega_inv.quadratic_form(&c);
        if q > best {
            best = q;
            best_k = k;
        }
    }
    (best, best_k)
}

/// Compare the statistic of a segment against an explicit critical value.
pub fn offline_test_with_cv(series: &TimeSeries, seg: Segment, cv: f64) -> Result<OfflineResult> {
    let stat = offline_statistic(series, seg)?;
    Ok(OfflineResult {
        statistic: stat.statistic,
        argmax_index: stat.argmax_index,
        cv,
        rejected: stat.untestable.is_none() && stat.statistic > cv,
        untestable: stat.untestable,
    })
}

/// Test a segment for a mean change at level `alpha`, fetching the critical
/// value from the provider.
pub fn offline_test(
    series: &TimeSeries,
    seg: Segment,
    cv_provider: &dyn CvProvider,
    alpha: f64,
) -> Result<OfflineResult> {
    let cv = cv_provider.offline_cv(series.dim(), alpha)?;
    offline_test_with_cv(series, seg, cv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn series(values: &[f64]) -> TimeSeries {
        TimeSeries::from_values(values.to_vec()).unwrap()
    }

    fn noise(seed: u64, n: usize) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        series(&(0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>())
    }

    #[test]
    fn cusum_path_constant_is_zero() {
        let s = series(&[4.0; 8]);
        let path = cusum_path(&s, s.full_segment()).unwrap();
        assert!(path.iter().all(|c| c[0].abs() < 1e-12));
    }

    #[test]
    fn cusum_path_hand_value() {
        let s = series(&[0.0, 0.0, 0.0, 3.0, 3.0, 3.0]);
        let path = cusum_path(&s, s.full_segment()).unwrap();
        let expected = (0.0 - 3.0 * 1.5) / 6.0f64.sqrt();
        assert!((path[2][0] - expected).abs() < 1e-12);
        assert!((path[2][0] - (-1.8371)).abs() < 1e-4);
    }

    #[test]
    fn cusum_path_telescopes_to_zero() {
        for seed in 0..20 {
            let s = noise(seed, 57);
            let path = cusum_path(&s, s.full_segment()).unwrap();
            assert!(path.last().unwrap()[0].abs() < 1e-12);
        }
    }

    #[test]
    fn constant_series_is_untestable() {
        let s = series(&[5.0; 40]);
        let stat = offline_statistic(&s, s.full_segment()).unwrap();
        assert_eq!(stat.untestable, Some(UntestableReason::DegenerateCovariance));
        let res = offline_test_with_cv(&s, s.full_segment(), 1.844).unwrap();
        assert!(!res.rejected);
    }

    #[test]
    fn argmax_at_the_break() {
        // Short segment: the statistic is computed but flagged untestable.
        let s = series(&[0.0, 0.0, 0.0, 3.0, 3.0, 3.0]);
        let stat = offline_statistic(&s, s.full_segment()).unwrap();
        assert_eq!(stat.argmax_index, 3);
        assert_eq!(stat.untestable, Some(UntestableReason::TooShort));
    }

    #[test]
    fn clear_step_rejected_with_argmax() {
        let mut values = vec![0.0; 30];
        values.extend(vec![3.0; 30]);
        // Mild noise so the covariance stays non-degenerate.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in &mut values {
            *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
        let s = series(&values);
        let res = offline_test_with_cv(&s, s.full_segment(), 1.844).unwrap();
        assert!(res.rejected);
        assert!((res.argmax_index as i64 - 30).unsigned_abs() <= 2);
    }

    #[test]
    fn location_shift_invariance_is_exact() {
        let s = noise(3, 120);
        let shifted = series(&s.column(0).iter().map(|v| v + 100.0).collect::<Vec<_>>());
        let a = offline_statistic(&s, s.full_segment()).unwrap();
        let b = offline_statistic(&shifted, shifted.full_segment()).unwrap();
        assert_eq!(a.argmax_index, b.argmax_index);
        assert!((a.statistic - b.statistic).abs() < 1e-6 * a.statistic.abs().max(1.0));
    }

    #[test]
    fn scale_equivariance_univariate() {
        let s = noise(4, 150);
        let scaled = series(&s.column(0).iter().map(|v| v * 37.5).collect::<Vec<_>>());
        let a = offline_statistic(&s, s.full_segment()).unwrap();
        let b = offline_statistic(&scaled, scaled.full_segment()).unwrap();
        assert_eq!(a.argmax_index, b.argmax_index);
        assert!((a.statistic - b.statistic).abs() < 1e-8 * a.statistic.max(1.0));
    }

    #[test]
    fn untestable_when_short_even_with_variation() {
        let s = series(&[1.0, 2.0, 1.5, 0.5, 1.0]);
        let res = offline_test_with_cv(&s, s.full_segment(), 0.01).unwrap();
        assert_eq!(res.untestable, Some(UntestableReason::TooShort));
        assert!(!res.rejected);
    }
}
