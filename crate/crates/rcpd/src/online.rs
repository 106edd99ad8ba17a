//! Sequential monitoring with standard and ratio-type CUSUM stopping rules.
//!
//! A monitor is trained once on a window of length `m` assumed change-free
//! and then fed one observation at a time. With `E(m,l)` the difference
//! between the running monitoring mean and the training mean, the rules are
//!
//! ```text
//! standard:  stop when || l * omega_hat^{-1/2} E ||_1 >= cv * g(m, l)
//! ratio:     stop when (l^2 / m) * E' D^{-1} E     >= cv * g(m, l)^2
//! ```
//!
//! where `g(m,l) = sqrt(m) (1 + l/m) (l/(l+m))^gamma` is the boundary weight
//! and `D` is the self-normaliser built from the training prefix means, so
//! the ratio rule needs no long-run covariance estimate. Both normalisers are
//! frozen at training time; each step costs `O(r)` (standard) or `O(r^2)`
//! (ratio) — the monitor keeps running sums and never re-scans history.

use nalgebra::DMatrix;

use crate::covariance::{bartlett_long_run, inverse_sqrt, CovMatrix};
use crate::critical_values::CvProvider;
use crate::error::{Error, Result};
use crate::series::{sample_mean, RcpdConfig, Segment, TimeSeries, Variant};

/// Training windows shorter than this are rejected, same floor as the
/// retrospective test.
pub const MIN_TRAINING_LEN: usize = 10;

/// Boundary weight `g(m, l)` of the stopping rules.
pub fn weight_g(m: usize, l: usize, gamma: f64) -> f64 {
    debug_assert!(m >= 1 && l >= 1);
    let m = m as f64;
    let l = l as f64;
    m.sqrt() * (1.0 + l / m) * (l / (l + m)).powf(gamma)
}

/// Self-normaliser of the ratio rule over a training segment:
/// `(1/m^2) * sum_j j^2 (mean_{1..j} - mean_{1..m})(mean_{1..j} - mean_{1..m})'`
/// with prefix means relative to the segment.
pub fn ratio_denominator(series: &TimeSeries, seg: Segment) -> Result<CovMatrix> {
    seg.check_within(series.len())?;
    let m = seg.len();
    let dim = series.dim();
    let full_mean = sample_mean(series, seg)?;
    let mut prefix = vec![0.0f64; dim];
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    let mut dev = vec![0.0f64; dim];
    for j in 1..=m {
        let x = series.row(seg.start - 1 + j);
        for i in 0..dim {
            prefix[i] += x[i];
            dev[i] = prefix[i] / j as f64 - full_mean[i];
        }
        let j2 = (j * j) as f64;
        for i in 0..dim {
            for k in 0..dim {
                acc[(i, k)] += j2 * dev[i] * dev[k];
            }
        }
    }
    acc /= (m * m) as f64;
    Ok(CovMatrix::from_matrix(acc))
}

#[derive(Debug, Clone)]
enum Normaliser {
    /// Inverse square root of the training long-run covariance.
    Standard(CovMatrix),
    /// Inverted self-normaliser of the ratio statistic.
    Ratio(CovMatrix),
}

/// Verdict of one monitoring step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Continue,
    /// The boundary was crossed at monitoring step `tau`; `e_first` is the
    /// first component of the detector `E(m, tau)` whose sign carries the
    /// change direction.
    Stop { tau: usize, e_first: f64 },
}

/// State of one trained sequential monitor.
///
/// A monitor is exclusively owned by the sequence feeding it; distinct
/// monitors run fully in parallel.
#[derive(Debug, Clone)]
pub struct MonitorState {
    variant: Variant,
    m: usize,
    training_start: usize,
    training_mean: Vec<f64>,
    normaliser: Normaliser,
    cv: f64,
    gamma: f64,
    steps: usize,
    running_sum: Vec<f64>,
    stopped_at: Option<usize>,
}

/// Train a monitor on `training_seg`, fetching the critical value for the
/// configured variant.
pub fn train(
    series: &TimeSeries,
    training_seg: Segment,
    config: &RcpdConfig,
    cv_provider: &dyn CvProvider,
) -> Result<MonitorState> {
    training_seg.check_within(series.len())?;
    let variant = config.variant;
    let m = training_seg.len();
    if m < MIN_TRAINING_LEN {
        return Err(Error::Untrainable {
            variant: variant_name(variant),
            msg: format!("training window of length {m} below {MIN_TRAINING_LEN}"),
        });
    }
    let training_mean = sample_mean(series, training_seg)?;
    let normaliser = match variant {
        Variant::Standard => {
            let long_run = bartlett_long_run(series, training_seg)?;
            if long_run.degenerate {
                return Err(Error::Untrainable {
                    variant: variant_name(variant),
                    msg: "degenerate long-run covariance on the training window".into(),
                });
            }
            let inv_sqrt = inverse_sqrt(&long_run.cov).map_err(|e| Error::Untrainable {
                variant: variant_name(variant),
                msg: e.to_string(),
            })?;
            Normaliser::Standard(inv_sqrt)
        }
        Variant::Ratio => {
            let denom = ratio_denominator(series, training_seg)?;
            let inv = denom.inverse().map_err(|e| Error::Untrainable {
                variant: variant_name(variant),
                msg: e.to_string(),
            })?;
            Normaliser::Ratio(inv)
        }
    };
    let cv = cv_provider.online_cv(variant, series.dim(), config.gamma, config.alpha)?;
    Ok(MonitorState {
        variant,
        m,
        training_start: training_seg.start,
        training_mean,
        normaliser,
        cv,
        gamma: config.gamma,
        steps: 0,
        running_sum: vec![0.0; series.dim()],
        stopped_at: None,
    })
}

fn variant_name(variant: Variant) -> &'static str {
    match variant {
        Variant::Standard => "standard",
        Variant::Ratio => "ratio",
    }
}

impl MonitorState {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Training window length `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Absolute index of the first training observation.
    pub fn training_start(&self) -> usize {
        self.training_start
    }

    pub fn training_mean(&self) -> &[f64] {
        &self.training_mean
    }

    /// Monitoring steps consumed so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn cv(&self) -> f64 {
        self.cv
    }

    /// Current detector value `E(m, l)`; zero vector before the first step.
    pub fn detector(&self) -> Vec<f64> {
        if self.steps == 0 {
            return vec![0.0; self.running_sum.len()];
        }
        let l = self.steps as f64;
        self.running_sum
            .iter()
            .zip(&self.training_mean)
            .map(|(s, t)| s / l - t)
            .collect()
    }

    /// Feed one observation; `O(r)` / `O(r^2)` per call.
    pub fn step(&mut self, observation: &[f64]) -> Result<Verdict> {
        if self.stopped_at.is_some() {
            return Err(Error::Logic("monitor already stopped".into()));
        }
        if observation.len() != self.running_sum.len() {
            return Err(Error::InvalidInput(format!(
                "observation has dimension {}, expected {}",
                observation.len(),
                self.running_sum.len()
            )));
        }
        if observation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite observation".into()));
        }
        self.steps += 1;
        for (s, &v) in self.running_sum.iter_mut().zip(observation) {
            *s += v;
        }
        let l = self.steps;
        let e = self.detector();
        let crossed = match &self.normaliser {
            Normaliser::Standard(inv_sqrt) => {
                let v = inv_sqrt.mul_vec(&e);
                let norm1: f64 = v.iter().map(|x| x.abs()).sum();
                l as f64 * norm1 >= self.cv * weight_g(self.m, l, self.gamma)
            }
            Normaliser::Ratio(denom_inv) => {
                let q = denom_inv.quadratic_form(&e);
                let g = weight_g(self.m, l, self.gamma);
                (l * l) as f64 / self.m as f64 * q >= self.cv * g * g
            }
        };
        if crossed {
            self.stopped_at = Some(l);
            Ok(Verdict::Stop { tau: l, e_first: e[0] })
        } else {
            Ok(Verdict::Continue)
        }
    }

    /// Stopping step, if the monitor has stopped.
    pub fn stopped_at(&self) -> Option<usize> {
        self.stopped_at
    }

    /// Absolute change index implied by the stop, see [`online_cp_index`].
    pub fn cp_index(&self) -> Result<usize> {
        let tau = self
            .stopped_at
            .ok_or_else(|| Error::Logic("change index requested before any stop".into()))?;
        online_cp_index(self, tau)
    }
}

/// Absolute index of the observation that triggered a stop at step `tau`:
/// `training_start + m + tau - 1`.
pub fn online_cp_index(state: &MonitorState, tau: usize) -> Result<usize> {
    if state.stopped_at != Some(tau) {
        return Err(Error::Logic(format!(
            "monitor did not stop at step {tau} (stopped at {:?})",
            state.stopped_at
        )));
    }
    Ok(state.training_start + state.m + tau - 1)
}
