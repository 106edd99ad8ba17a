//! Direction-of-change indicators.
//!
//! Two indicators label a detected change:
//!
//! - the sign of the sequential detector `E(m, l)` at the stopping step
//!   ([`ti_ts`]), and
//! - a filter value ([`ti_f`]) built from exponential moving averages: the
//!   difference of a fast and a slow EMA of the series (the MACD line) minus
//!   an EMA of that difference. Summing the filter over `h` samples after the
//!   change turns the point estimate into an interval estimate that smooths
//!   out one-point errors.

use crate::error::{Error, Result};
use crate::series::Direction;

/// Direction from the sign of the detector's first component. Zero breaks
/// towards `Down`.
pub fn ti_ts(e_first: f64) -> Result<Direction> {
    if !e_first.is_finite() {
        return Err(Error::InvalidInput("non-finite detector value".into()));
    }
    Ok(if e_first > 0.0 { Direction::Up } else { Direction::Down })
}

/// Exponential moving average with lag `p`, initialised at the first value:
/// `ema(n) = (2/(p+1)) x_n + ((p-1)/(p+1)) ema(n-1)`.
pub fn ema(xs: &[f64], p: usize) -> Vec<f64> {
    assert!(p >= 1, "EMA lag must be >= 1");
    let mut out = Vec::with_capacity(xs.len());
    let weight = 2.0 / (p as f64 + 1.0);
    let decay = (p as f64 - 1.0) / (p as f64 + 1.0);
    let mut prev = match xs.first() {
        Some(&x) => x,
        None => return out,
    };
    out.push(prev);
    for &x in &xs[1..] {
        prev = weight * x + decay * prev;
        out.push(prev);
    }
    out
}

/// MACD line: fast EMA minus slow EMA.
pub fn macd_series(xs: &[f64], p2: usize, p3: usize) -> Vec<f64> {
    let fast = ema(xs, p2);
    let slow = ema(xs, p3);
    fast.iter().zip(&slow).map(|(f, s)| f - s).collect()
}

/// Filter indicator series: MACD minus its own `p1`-lag EMA.
pub fn ti_f_series(xs: &[f64], p1: usize, p2: usize, p3: usize) -> Vec<f64> {
    let macd = macd_series(xs, p2, p3);
    let signal = ema(&macd, p1);
    macd.iter().zip(&signal).map(|(m, s)| m - s).collect()
}

/// Direction at change index `k` (1-based) from the filter sum
/// `S = sum_{n=k..k+h} ti_f(n)`; `h = 0` is the point estimate.
///
/// Returns `None` on a zero sum — the caller falls back to [`ti_ts`]. The
/// window must fit the series; callers clip `h` at the stream end.
pub fn ti_f(
    xs: &[f64],
    k: usize,
    h: usize,
    p1: usize,
    p2: usize,
    p3: usize,
) -> Result<Option<Direction>> {
    if !(p1 < p2 && p2 < p3) || p1 < 1 {
        return Err(Error::InvalidInput(format!(
            "EMA lags must satisfy 1 <= p1 < p2 < p3, got {p1}, {p2}, {p3}"
        )));
    }
    if k < 1 || k + h > xs.len() {
        return Err(Error::Range(format!(
            "filter window [{k}, {}] outside series of length {}",
            k + h,
            xs.len()
        )));
    }
    let values = ti_f_series(xs, p1, p2, p3);
    let s: f64 = values[k - 1..k + h].iter().sum();
    Ok(if s > 0.0 {
        Some(Direction::Up)
    } else if s < 0.0 {
        Some(Direction::Down)
    } else {
        None
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ts_sign_cases() {
        assert_eq!(ti_ts(0.7).unwrap(), Direction::Up);
        assert_eq!(ti_ts(-0.3).unwrap(), Direction::Down);
        assert_eq!(ti_ts(0.0).unwrap(), Direction::Down);
        assert!(ti_ts(f64::NAN).is_err());
    }

    #[test]
    fn ema_constant_fixed_point() {
        let out = ema(&[3.5; 10], 7);
        assert!(out.iter().all(|v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn ema_lag_one_is_identity() {
        let xs = [1.0, -2.0, 3.0, 0.5];
        assert_eq!(ema(&xs, 1), xs.to_vec());
    }

    #[test]
    fn ema_hand_recursion() {
        assert_eq!(ema(&[0.0, 0.0, 4.0], 3), vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn ema_bounded_by_running_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let xs: Vec<f64> = (0..200).map(|_| rng.random_range(-5.0..5.0)).collect();
        for p in [2, 5, 12] {
            let out = ema(&xs, p);
            let mut lo = xs[0];
            let mut hi = xs[0];
            for (x, e) in xs.iter().zip(&out) {
                lo = lo.min(*x);
                hi = hi.max(*x);
                assert!(*e >= lo - 1e-12 && *e <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn constant_series_falls_back() {
        let xs = vec![2.0; 60];
        assert_eq!(ti_f(&xs, 40, 5, 9, 12, 26).unwrap(), None);
    }

    #[test]
    fn ramp_is_upward() {
        let xs: Vec<f64> = (1..=60).map(|n| n as f64).collect();
        for k in [30, 40, 50] {
            assert_eq!(ti_f(&xs, k, 5, 9, 12, 26).unwrap(), Some(Direction::Up));
        }
    }

    #[test]
    fn window_overrun_is_a_range_error() {
        let xs: Vec<f64> = (1..=40).map(|n| n as f64).collect();
        assert!(matches!(ti_f(&xs, 38, 5, 9, 12, 26), Err(Error::Range(_))));
    }

    #[test]
    fn shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let xs: Vec<f64> = (0..150).map(|_| rng.random_range(-3.0..3.0)).collect();
        let shifted: Vec<f64> = xs.iter().map(|v| v + 1000.0).collect();
        let a = ti_f_series(&xs, 9, 12, 26);
        let b = ti_f_series(&shifted, 9, 12, 26);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn odd_symmetry_flips_the_decision() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut xs: Vec<f64> = (0..150).map(|_| rng.random_range(-3.0..3.0)).collect();
        for v in xs.iter_mut().skip(90) {
            *v += 4.0;
        }
        let negated: Vec<f64> = xs.iter().map(|v| -v).collect();
        let a = ti_f_series(&xs, 9, 12, 26);
        let b = ti_f_series(&negated, 9, 12, 26);
        for (x, y) in a.iter().zip(&b) {
            assert!((x + y).abs() < 1e-9);
        }
        let da = ti_f(&xs, 91, 5, 9, 12, 26).unwrap().unwrap();
        let db = ti_f(&negated, 91, 5, 9, 12, 26).unwrap().unwrap();
        assert_eq!(da, db.flipped());
    }
}
