//! ARMA(1,1) generator with planted mean shifts and the benchmark
//! experiments built on it.
//!
//! Four experiments measure the pipeline on series of length 600 over
//! replicated seeds:
//!
//! 1. segmentation accuracy (two and four planted changes, standard vs
//!    validated binary segmentation);
//! 2. direction indicator success on the detections of experiment 1's
//!    scenarios;
//! 3. full pipeline with a single change at 300, grid of shift magnitudes
//!    and monitoring window lengths, detection-count cells and median
//!    detection indices;
//! 4. the same with two changes at 200 and 400.
//!
//! Replications derive their own seeds from the base seed, and the direction
//! signs use a separate stream so rate estimates and direction scoring stay
//! decoupled. Reports are deterministic per `(seed, reps)`.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical_values::{CvProvider, FixedCv};
use crate::detector::replay;
use crate::error::{Error, Result};
use crate::segmentation::{binary_segmentation_with_cv, validate_candidates};
use crate::series::{Direction, RcpdConfig, TimeSeries, TrendIndicator, Variant};
use crate::trend;

/// Series length used by all experiments.
pub const EXPERIMENT_N: usize = 600;
/// Significance level of all experiments.
pub const EXPERIMENT_ALPHA: f64 = 0.05;
/// Boundary sensitivity of the monitoring experiments.
pub const EXPERIMENT_GAMMA: f64 = 0.25;
/// Quiet distance between successive detections.
pub const EXPERIMENT_D: usize = 50;

/// Samples discarded before the generated path starts.
pub const BURN_IN: usize = 100;

/// ARMA(1,1) path specification: `y_t = phi y_{t-1} + e_t + theta e_{t-1}`
/// with Gaussian innovations of standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmaSpec {
    pub phi: f64,
    pub theta: f64,
    pub sigma: f64,
    pub n: usize,
    pub seed: u64,
}

impl ArmaSpec {
    pub fn validate(&self) -> Result<()> {
        if self.phi.abs() >= 1.0 {
            return Err(Error::InvalidInput(format!("|phi| = {} must be < 1", self.phi.abs())));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidInput(format!("sigma {} must be > 0", self.sigma)));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("series length must be >= 1".into()));
        }
        Ok(())
    }

    /// Stationary variance `sigma^2 (1 + (phi+theta)^2 / (1-phi^2))`.
    pub fn stationary_variance(&self) -> f64 {
        let s = self.phi + self.theta;
        self.sigma * self.sigma * (1.0 + s * s / (1.0 - self.phi * self.phi))
    }
}

/// One planted mean shift: `delta` is added to the mean from `index` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeShift {
    pub index: usize,
    pub delta: Vec<f64>,
}

/// Ordered list of planted shifts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangePlan {
    pub shifts: Vec<ChangeShift>,
}

impl ChangePlan {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn univariate(shifts: &[(usize, f64)]) -> Self {
        Self {
            shifts: shifts
                .iter()
                .map(|&(index, delta)| ChangeShift { index, delta: vec![delta] })
                .collect(),
        }
    }

    /// Dimension implied by the deltas, when any.
    pub fn dim(&self) -> Option<usize> {
        self.shifts.first().map(|s| s.delta.len())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut prev = 1usize;
        for shift in &self.shifts {
            if shift.index <= prev || shift.index >= n {
                return Err(Error::InvalidInput(format!(
                    "shift indices must be strictly increasing inside (1, {n})"
                )));
            }
            if Some(shift.delta.len()) != self.dim() {
                return Err(Error::InvalidInput("inconsistent shift dimensions".into()));
            }
            prev = shift.index;
        }
        Ok(())
    }
}

/// Generate `x_t = mu(t) + y_t` with an ARMA(1,1) noise path per dimension
/// and the cumulative plan as the mean. Deterministic per seed.
pub fn generate(spec: &ArmaSpec, plan: &ChangePlan) -> Result<TimeSeries> {
    spec.validate()?;
    plan.validate(spec.n)?;
    let dim = plan.dim().unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut y = vec![0.0f64; dim];
    let mut eps_prev = vec![0.0f64; dim];
    let step = |y: &mut Vec<f64>, eps_prev: &mut Vec<f64>, rng: &mut ChaCha8Rng| {
        for j in 0..dim {
            let eps: f64 = spec.sigma * rng.sample::<f64, _>(StandardNormal);
            y[j] = spec.phi * y[j] + eps + spec.theta * eps_prev[j];
            eps_prev[j] = eps;
        }
    };
    for _ in 0..BURN_IN {
        step(&mut y, &mut eps_prev, &mut rng);
    }
    let mut mu = vec![0.0f64; dim];
    let mut next_shift = 0usize;
    let mut rows = Vec::with_capacity(spec.n);
    for t in 1..=spec.n {
        while next_shift < plan.shifts.len() && plan.shifts[next_shift].index == t {
            for (m, d) in mu.iter_mut().zip(&plan.shifts[next_shift].delta) {
                *m += d;
            }
            next_shift += 1;
        }
        step(&mut y, &mut eps_prev, &mut rng);
        rows.push(mu.iter().zip(&y).map(|(m, v)| m + v).collect::<Vec<f64>>());
    }
    TimeSeries::from_rows(&rows)
}

/// Noise parameters shared by every replication of an experiment.
///
/// Moderate positive dependence keeps the weak-dependence machinery honest
/// while the short Bartlett bandwidth still tracks the long-run variance
/// closely enough for calibrated test sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub phi: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { phi: 0.1, theta: 0.1, sigma: 1.0 }
    }
}

impl NoiseParams {
    fn spec(&self, n: usize, seed: u64) -> ArmaSpec {
        ArmaSpec { phi: self.phi, theta: self.theta, sigma: self.sigma, n, seed }
    }
}

/// SplitMix-style seed derivation for replication streams.
fn derive_seed(base: u64, stream: u64, rep: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(rep.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const NOISE_STREAM: u64 = 1;
const DIRECTION_STREAM: u64 = 2;

/// Random per-change signs from the direction stream.
fn planted_signs(base: u64, stream_tag: u64, rep: u64, count: usize) -> Vec<f64> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(base, DIRECTION_STREAM ^ (stream_tag << 8), rep));
    (0..count).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

/// Shared report metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub reps: usize,
    pub seed: u64,
    pub noise: NoiseParams,
    pub alpha: f64,
    pub gamma: f64,
}

/// One cell of the segmentation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationRow {
    pub test: u8,
    pub mu: f64,
    pub method: String,
    pub planted: usize,
    /// Counts of replications detecting fewer / exactly / more changes than
    /// planted.
    pub counts: [usize; 3],
    pub under_rate: f64,
    pub exact_rate: f64,
    pub over_rate: f64,
}

/// One cell of the direction experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub test: u8,
    pub mu: f64,
    pub indicator: TrendIndicator,
    pub scored: usize,
    pub correct: usize,
    pub success_rate: f64,
}

/// One cell of the monitoring experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub variant: Variant,
    pub mu: f64,
    pub l: usize,
    /// Detection-count histogram: below / exactly / above the planted count.
    pub counts: [usize; 3],
    pub under_rate: f64,
    pub exact_rate: f64,
    pub over_rate: f64,
    /// Median detection index per planted change, over the exact-count
    /// replications; `None` when no replication had the exact count.
    pub medians: Vec<Option<f64>>,
}

/// Report of one experiment, CSV- and JSON-renderable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentReport {
    Segmentation { params: ReportParams, rows: Vec<SegmentationRow> },
    Trend { params: ReportParams, rows: Vec<TrendRow> },
    SingleCp { params: ReportParams, rows: Vec<MonitorRow> },
    DoubleCp { params: ReportParams, rows: Vec<MonitorRow> },
}

impl ExperimentReport {
    /// Render as CSV, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            ExperimentReport::Segmentation { rows, .. } => {
                out.push_str("test,mu,method,planted,under_rate,exact_rate,over_rate\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{},{:.4},{:.4},{:.4}\n",
                        r.test, r.mu, r.method, r.planted, r.under_rate, r.exact_rate, r.over_rate
                    ));
                }
            }
            ExperimentReport::Trend { rows, .. } => {
                out.push_str("test,mu,indicator,scored,correct,success_rate\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{},{},{:.4}\n",
                        r.test, r.mu, r.indicator, r.scored, r.correct, r.success_rate
                    ));
                }
            }
            ExperimentReport::SingleCp { rows, .. } | ExperimentReport::DoubleCp { rows, .. } => {
                let max_medians = rows.iter().map(|r| r.medians.len()).max().unwrap_or(0);
                out.push_str("variant,mu,l,under_rate,exact_rate,over_rate");
                for i in 1..=max_medians {
                    out.push_str(&format!(",median_k{i}"));
                }
                out.push('\n');
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{:.4},{:.4},{:.4}",
                        r.variant, r.mu, r.l, r.under_rate, r.exact_rate, r.over_rate
                    ));
                    for i in 0..max_medians {
                        match r.medians.get(i).copied().flatten() {
                            Some(v) => out.push_str(&format!(",{v:.1}")),
                            None => out.push(','),
                        }
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn rows_single(&self) -> Option<&[MonitorRow]> {
        match self {
            ExperimentReport::SingleCp { rows, .. } | ExperimentReport::DoubleCp { rows, .. } => {
                Some(rows)
            }
            _ => None,
        }
    }
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn count_category(found: usize, planted: usize) -> usize {
    use std::cmp::Ordering::*;
    match found.cmp(&planted) {
        Less => 0,
        Equal => 1,
        Greater => 2,
    }
}

fn params(reps: usize, seed: u64, noise: NoiseParams) -> ReportParams {
    ReportParams { reps, seed, noise, alpha: EXPERIMENT_ALPHA, gamma: EXPERIMENT_GAMMA }
}

fn planted_positions(test: u8) -> Vec<usize> {
    match test {
        1 => (1..=2).map(|i| i * EXPERIMENT_N / 3).collect(),
        _ => (1..=4).map(|i| i * EXPERIMENT_N / 5).collect(),
    }
}

/// Snapshot the provider into fixed values so replications share no locks.
fn resolve_cv(cv: &dyn CvProvider, variant: Option<Variant>) -> Result<FixedCv> {
    let offline = cv.offline_cv(1, EXPERIMENT_ALPHA)?;
    let mut fixed = FixedCv { offline: Some(offline), online_ct: None, online_rt: None };
    match variant {
        Some(Variant::Standard) => {
            fixed.online_ct = Some(cv.online_cv(Variant::Standard, 1, EXPERIMENT_GAMMA, EXPERIMENT_ALPHA)?);
        }
        Some(Variant::Ratio) => {
            fixed.online_rt = Some(cv.online_cv(Variant::Ratio, 1, EXPERIMENT_GAMMA, EXPERIMENT_ALPHA)?);
        }
        None => {}
    }
    Ok(fixed)
}

/// Experiment 1: exact-recovery rates of the standard and validated
/// segmentation on two and four planted changes.
pub fn experiment_segmentation(
    reps: usize,
    mus: &[f64],
    seed: u64,
    noise: NoiseParams,
    cv: &dyn CvProvider,
) -> Result<ExperimentReport> {
    if reps < 100 {
        return Err(Error::InvalidInput("segmentation experiment needs reps >= 100".into()));
    }
    let offline_cv = resolve_cv(cv, None)?.offline.expect("offline value");
    let mut rows = Vec::new();
    for test in [1u8, 2u8] {
        let planted = planted_positions(test);
        for (mu_idx, &mu) in mus.iter().enumerate() {
            let stream_tag = (test as u64) << 32 | mu_idx as u64;
            let outcomes: Vec<Result<(usize, usize)>> = (0..reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let signs = planted_signs(seed, stream_tag, rep, planted.len());
                    let shifts: Vec<(usize, f64)> = planted
                        .iter()
                        .zip(&signs)
                        .map(|(&idx, &s)| (idx, s * mu))
                        .collect();
                    let plan = ChangePlan::univariate(&shifts);
                    let spec = noise.spec(
                        EXPERIMENT_N,
                        derive_seed(seed, NOISE_STREAM ^ (stream_tag << 8), rep),
                    );
                    let series = generate(&spec, &plan)?;
                    let seg = series.full_segment();
                    let bs = binary_segmentation_with_cv(&series, seg, offline_cv)?;
                    let mbs = validate_candidates(&series, seg, offline_cv, &bs)?;
                    Ok((bs.len(), mbs.len()))
                })
                .collect();
            let mut bs_counts = [0usize; 3];
            let mut mbs_counts = [0usize; 3];
            for outcome in outcomes {
                let (bs_len, mbs_len) = outcome?;
                bs_counts[count_category(bs_len, planted.len())] += 1;
                mbs_counts[count_category(mbs_len, planted.len())] += 1;
            }
            for (method, counts) in [("bs", bs_counts), ("mbs", mbs_counts)] {
                rows.push(SegmentationRow {
                    test,
                    mu,
                    method: method.to_string(),
                    planted: planted.len(),
                    counts,
                    under_rate: counts[0] as f64 / reps as f64,
                    exact_rate: counts[1] as f64 / reps as f64,
                    over_rate: counts[2] as f64 / reps as f64,
                });
            }
        }
    }
    Ok(ExperimentReport::Segmentation { params: params(reps, seed, noise), rows })
}

fn monitoring_config(variant: Variant, l: usize, ms0: usize) -> RcpdConfig {
    RcpdConfig {
        alpha: EXPERIMENT_ALPHA,
        gamma: EXPERIMENT_GAMMA,
        l,
        d: EXPERIMENT_D,
        ms0,
        u: 500,
        variant,
        trend: TrendIndicator::Ts,
        h: 0,
        p1: 9,
        p2: 12,
        p3: 26,
    }
}

/// Experiment 2: direction success of both indicators on the detections of
/// the experiment-1 scenarios, scored against the planted signs.
pub fn experiment_trend(
    reps: usize,
    mus: &[f64],
    seed: u64,
    noise: NoiseParams,
    cv: &dyn CvProvider,
) -> Result<ExperimentReport> {
    let fixed = resolve_cv(cv, Some(Variant::Standard))?;
    let config = monitoring_config(Variant::Standard, 50, 100);
    let mut rows = Vec::new();
    for test in [1u8, 2u8] {
        let planted = planted_positions(test);
        for (mu_idx, &mu) in mus.iter().enumerate() {
            let stream_tag = 0x2000 | (test as u64) << 32 | mu_idx as u64;
            let outcomes: Vec<Result<(usize, usize, usize)>> = (0..reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let signs = planted_signs(seed, stream_tag, rep, planted.len());
                    let shifts: Vec<(usize, f64)> = planted
                        .iter()
                        .zip(&signs)
                        .map(|(&idx, &s)| (idx, s * mu))
                        .collect();
                    let plan = ChangePlan::univariate(&shifts);
                    let spec = noise.spec(
                        EXPERIMENT_N,
                        derive_seed(seed, NOISE_STREAM ^ (stream_tag << 8), rep),
                    );
                    let series = generate(&spec, &plan)?;
                    let events = replay(&series, &config, &fixed)?;
                    let xs = series.column(0);
                    let mut scored = 0usize;
                    let mut ts_correct = 0usize;
                    let mut f_correct = 0usize;
                    for event in &events {
                        // Match the detection to the last planted change at
                        // or before it; earlier detections are false alarms
                        // with no ground truth.
                        let Some(pos) =
                            planted.iter().rposition(|&p| p <= event.cp.index)
                        else {
                            continue;
                        };
                        let expected =
                            if signs[pos] > 0.0 { Direction::Up } else { Direction::Down };
                        scored += 1;
                        if event.e_sign == expected {
                            ts_correct += 1;
                        }
                        let f_dir = trend::ti_f(&xs, event.cp.index, 0, 9, 12, 26)?
                            .unwrap_or(event.e_sign);
                        if f_dir == expected {
                            f_correct += 1;
                        }
                    }
                    Ok((scored, ts_correct, f_correct))
                })
                .collect();
            let mut scored = 0usize;
            let mut ts_correct = 0usize;
            let mut f_correct = 0usize;
            for outcome in outcomes {
                let (s, t, f) = outcome?;
                scored += s;
                ts_correct += t;
                f_correct += f;
            }
            for (indicator, correct) in
                [(TrendIndicator::Ts, ts_correct), (TrendIndicator::Macd, f_correct)]
            {
                rows.push(TrendRow {
                    test,
                    mu,
                    indicator,
                    scored,
                    correct,
                    success_rate: if scored == 0 { 0.0 } else { correct as f64 / scored as f64 },
                });
            }
        }
    }
    Ok(ExperimentReport::Trend { params: params(reps, seed, noise), rows })
}

fn monitoring_experiment(
    reps: usize,
    mus: &[f64],
    ls: &[usize],
    variant: Variant,
    seed: u64,
    noise: NoiseParams,
    cv: &dyn CvProvider,
    planted: &[usize],
    ms0: usize,
    stream_base: u64,
) -> Result<Vec<MonitorRow>> {
    let fixed = resolve_cv(cv, Some(variant))?;
    let mut rows = Vec::new();
    for (mu_idx, &mu) in mus.iter().enumerate() {
        for &l in ls {
            let config = monitoring_config(variant, l, ms0);
            let stream_tag = stream_base | (mu_idx as u64) << 16 | l as u64;
            let outcomes: Vec<Result<(usize, Vec<usize>)>> = (0..reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let plan = if mu == 0.0 {
                        ChangePlan::empty()
                    } else {
                        let signs = planted_signs(seed, stream_tag, rep, planted.len());
                        ChangePlan::univariate(
                            &planted
                                .iter()
                                .zip(&signs)
                                .map(|(&idx, &s)| (idx, s * mu))
                                .collect::<Vec<_>>(),
                        )
                    };
                    let spec = noise.spec(
                        EXPERIMENT_N,
                        derive_seed(seed, NOISE_STREAM ^ (stream_tag << 8), rep),
                    );
                    let series = generate(&spec, &plan)?;
                    let events = replay(&series, &config, &fixed)?;
                    Ok((events.len(), events.iter().map(|e| e.cp.index).collect()))
                })
                .collect();
            let mut counts = [0usize; 3];
            let mut indices: Vec<Vec<f64>> = vec![Vec::new(); planted.len().max(1)];
            for outcome in outcomes {
                let (found, idxs) = outcome?;
                counts[count_category(found, planted.len())] += 1;
                if found == planted.len() {
                    for (slot, idx) in indices.iter_mut().zip(&idxs) {
                        slot.push(*idx as f64);
                    }
                }
            }
            let medians = if planted.is_empty() {
                Vec::new()
            } else {
                indices.into_iter().map(median).collect()
            };
            rows.push(MonitorRow {
                variant,
                mu,
                l,
                counts,
                under_rate: counts[0] as f64 / reps as f64,
                exact_rate: counts[1] as f64 / reps as f64,
                over_rate: counts[2] as f64 / reps as f64,
                medians,
            });
        }
    }
    Ok(rows)
}

/// Experiment 3: full pipeline with one planted change at 300.
pub fn experiment_single_cp(
    reps: usize,
    mus: &[f64],
    ls: &[usize],
    variant: Variant,
    seed: u64,
    noise: NoiseParams,
    cv: &dyn CvProvider,
) -> Result<ExperimentReport> {
    let rows = monitoring_experiment(
        reps,
        mus,
        ls,
        variant,
        seed,
        noise,
        cv,
        &[EXPERIMENT_N / 2],
        200,
        0x3000_0000,
    )?;
    Ok(ExperimentReport::SingleCp { params: params(reps, seed, noise), rows })
}

/// Experiment 4: full pipeline with planted changes at 200 and 400.
pub fn experiment_double_cp(
    reps: usize,
    mus: &[f64],
    ls: &[usize],
    variant: Variant,
    seed: u64,
    noise: NoiseParams,
    cv: &dyn CvProvider,
) -> Result<ExperimentReport> {
    let rows = monitoring_experiment(
        reps,
        mus,
        ls,
        variant,
        seed,
        noise,
        cv,
        &[EXPERIMENT_N / 3, 2 * EXPERIMENT_N / 3],
        100,
        0x4000_0000,
    )?;
    Ok(ExperimentReport::DoubleCp { params: params(reps, seed, noise), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_variance_matches_sigma() {
        let spec = ArmaSpec { phi: 0.0, theta: 0.0, sigma: 1.5, n: 100_000, seed: 5 };
        let series = generate(&spec, &ChangePlan::empty()).unwrap();
        let xs = series.column(0);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((var - 2.25).abs() / 2.25 < 0.03, "variance {var}");
    }

    #[test]
    fn empty_plan_has_zero_mean() {
        let spec = ArmaSpec { phi: 0.3, theta: 0.3, sigma: 1.0, n: 20_000, seed: 6 };
        let series = generate(&spec, &ChangePlan::empty()).unwrap();
        let xs = series.column(0);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn same_seed_identical_path() {
        let spec = ArmaSpec { phi: 0.4, theta: -0.2, sigma: 2.0, n: 500, seed: 9 };
        let plan = ChangePlan::univariate(&[(200, 1.0)]);
        assert_eq!(generate(&spec, &plan).unwrap(), generate(&spec, &plan).unwrap());
    }

    #[test]
    fn stationary_variance_formula() {
        let spec = ArmaSpec { phi: 0.3, theta: 0.3, sigma: 1.0, n: 100_000, seed: 17 };
        let series = generate(&spec, &ChangePlan::empty()).unwrap();
        let xs = series.column(0);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        let expect = spec.stationary_variance();
        assert!((var - expect).abs() / expect < 0.05, "variance {var} vs {expect}");
    }

    #[test]
    fn shifts_move_the_mean() {
        let spec = ArmaSpec { phi: 0.0, theta: 0.0, sigma: 0.1, n: 400, seed: 11 };
        let plan = ChangePlan::univariate(&[(201, 5.0)]);
        let series = generate(&spec, &plan).unwrap();
        let xs = series.column(0);
        let first: f64 = xs[..200].iter().sum::<f64>() / 200.0;
        let second: f64 = xs[200..].iter().sum::<f64>() / 200.0;
        assert!(first.abs() < 0.1);
        assert!((second - 5.0).abs() < 0.1);
    }

    #[test]
    fn plan_validation() {
        let plan = ChangePlan::univariate(&[(10, 1.0), (10, 2.0)]);
        assert!(plan.validate(100).is_err());
        let plan = ChangePlan::univariate(&[(100, 1.0)]);
        assert!(plan.validate(100).is_err());
        let plan = ChangePlan::univariate(&[(2, 1.0), (50, -1.0)]);
        assert!(plan.validate(100).is_ok());
    }

    #[test]
    fn spec_validation() {
        assert!(ArmaSpec { phi: 1.0, theta: 0.0, sigma: 1.0, n: 10, seed: 0 }.validate().is_err());
        assert!(ArmaSpec { phi: 0.0, theta: 0.0, sigma: 0.0, n: 10, seed: 0 }.validate().is_err());
    }

    #[test]
    fn multivariate_generation() {
        let spec = ArmaSpec { phi: 0.2, theta: 0.1, sigma: 1.0, n: 50, seed: 3 };
        let plan = ChangePlan {
            shifts: vec![ChangeShift { index: 20, delta: vec![1.0, -1.0] }],
        };
        let series = generate(&spec, &plan).unwrap();
        assert_eq!(series.dim(), 2);
        assert_eq!(series.len(), 50);
    }

    #[test]
    fn reports_deterministic_per_seed() {
        let cv = FixedCv::new(1.844, 2.7, 11.0);
        let noise = NoiseParams::default();
        let a = experiment_segmentation(100, &[2.0], 7, noise, &cv).unwrap();
        let b = experiment_segmentation(100, &[2.0], 7, noise, &cv).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
