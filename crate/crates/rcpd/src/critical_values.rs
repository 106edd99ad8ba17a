//! Monte Carlo critical values for the Brownian-functional limit
//! distributions of the three tests, with a persistent JSON cache.
//!
//! Three functionals are simulated on a uniform grid:
//!
//! - retrospective test: `sup_{t in [0,1]} sum_j B_j(t)^2` over `r`
//!   independent standard Brownian bridges `B(t) = W(t) - t W(1)`;
//! - standard monitoring: `sup_{t in (0,1]} ||W(t)||_1 / t^gamma`;
//! - ratio monitoring: `sup_{t in (0,t_max]} Delta_gamma(t)` with
//!   `Delta_gamma(t) = B(1+t)' (int_0^1 B B' dv)^{-1} B(1+t) / eta(t)` and
//!   `eta(t) = (1+t) (t/(1+t))^gamma`, the bridge extended past 1 via
//!   `B(s) = W(s) - s W(1)`.
//!
//! Critical values are `(1 - alpha)` empirical quantiles over `n_paths`
//! replications. Simulation is deterministic for a fixed request: every path
//! derives its own generator from the base seed and the path index, so the
//! result does not depend on how work is spread over threads.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::CovMatrix;
use crate::error::{Error, Result};
use crate::series::Variant;

pub const DEFAULT_N_PATHS: usize = 20_000;
pub const DEFAULT_GRID: usize = 1_000;
pub const DEFAULT_T_MAX: f64 = 10.0;
pub const DEFAULT_SEED: u64 = 42;

/// Which limit distribution a request refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvKind {
    Offline,
    OnlineCt,
    OnlineRt,
}

impl fmt::Display for CvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvKind::Offline => write!(f, "offline"),
            CvKind::OnlineCt => write!(f, "online-ct"),
            CvKind::OnlineRt => write!(f, "online-rt"),
        }
    }
}

/// Fully specified simulation request; also the cache key.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRequest {
    pub kind: CvKind,
    /// Series dimension.
    pub r: usize,
    /// Boundary sensitivity, online kinds only.
    pub gamma: Option<f64>,
    pub alpha: f64,
    pub n_paths: usize,
    /// Grid points per unit of time.
    pub grid: usize,
    /// Supremum horizon of the ratio functional.
    pub t_max: Option<f64>,
    pub seed: u64,
}

impl CvRequest {
    pub fn offline(r: usize, alpha: f64) -> Self {
        Self {
            kind: CvKind::Offline,
            r,
            gamma: None,
            alpha,
            n_paths: DEFAULT_N_PATHS,
            grid: DEFAULT_GRID,
            t_max: None,
            seed: DEFAULT_SEED,
        }
    }

    pub fn online_ct(r: usize, gamma: f64, alpha: f64) -> Self {
        Self {
            kind: CvKind::OnlineCt,
            r,
            gamma: Some(gamma),
            alpha,
            n_paths: DEFAULT_N_PATHS,
            grid: DEFAULT_GRID,
            t_max: None,
            seed: DEFAULT_SEED,
        }
    }

    pub fn online_rt(r: usize, gamma: f64, alpha: f64) -> Self {
        Self {
            kind: CvKind::OnlineRt,
            r,
            gamma: Some(gamma),
            alpha,
            n_paths: DEFAULT_N_PATHS,
            grid: DEFAULT_GRID,
            t_max: Some(DEFAULT_T_MAX),
            seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::InvalidInput("dimension r must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if self.n_paths < 1_000 {
            return Err(Error::InvalidInput("n_paths must be >= 1000".into()));
        }
        if self.grid < 100 {
            return Err(Error::InvalidInput("grid must be >= 100".into()));
        }
        match self.kind {
            CvKind::Offline => {}
            CvKind::OnlineCt | CvKind::OnlineRt => {
                let gamma = self
                    .gamma
                    .ok_or_else(|| Error::InvalidInput("gamma required for online kinds".into()))?;
                if !(0.0..0.5).contains(&gamma) {
                    return Err(Error::InvalidInput(format!("gamma {gamma} not in [0, 0.5)")));
                }
                if self.kind == CvKind::OnlineRt {
                    let t_max = self
                        .t_max
                        .ok_or_else(|| Error::InvalidInput("t_max required for the ratio kind".into()))?;
                    if t_max <= 0.0 {
                        return Err(Error::InvalidInput(format!("t_max {t_max} must be > 0")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical cache key `kind|r|gamma|alpha|paths|grid|tmax`.
    pub fn cache_key(&self) -> String {
        let gamma = match self.gamma {
            Some(g) => format!("{g:.6}"),
            None => "-".to_string(),
        };
        let t_max = match self.t_max {
            Some(t) => format!("{t:.6}"),
            None => "-".to_string(),
        };
        format!(
            "{}|{}|{}|{:.6}|{}|{}|{}",
            self.kind, self.r, gamma, self.alpha, self.n_paths, self.grid, t_max
        )
    }
}

/// Simulation result: the quantile and how many paths had to be resampled
/// because their normalising integral was numerically singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOutcome {
    pub value: f64,
    pub resampled_paths: usize,
}

/// `(1 - alpha)` empirical quantile of a sorted sample.
fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Deterministic per-path generator derived from the base seed.
fn path_rng(seed: u64, path: u64, attempt: u64) -> ChaCha8Rng {
    let mut z = seed
        ^ path.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ attempt.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

fn quantile_of_sups(mut sups: Vec<f64>, alpha: f64) -> f64 {
    sups.sort_by(|a, b| a.total_cmp(b));
    empirical_quantile(&sups, 1.0 - alpha)
}

/// Critical value of the retrospective test: quantile of the supremum of a
/// sum of `r` squared Brownian bridges.
pub fn simulate_offline_cv(req: &CvRequest) -> Result<f64> {
    if req.kind != CvKind::Offline {
        return Err(Error::InvalidInput("request kind is not offline".into()));
    }
    req.validate()?;
    let grid = req.grid;
    let r = req.r;
    let dt_sqrt = (1.0 / grid as f64).sqrt();
    let sups: Vec<f64> = (0..req.n_paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; r * (grid + 1)],
            |w, path| {
                let mut rng = path_rng(req.seed, path, 0);
                for j in 0..r {
                    let row = &mut w[j * (grid + 1)..(j + 1) * (grid + 1)];
                    row[0] = 0.0;
                    for k in 1..=grid {
                        let z: f64 = rng.sample(StandardNormal);
                        row[k] = row[k - 1] + dt_sqrt * z;
                    }
                }
                let mut sup = 0.0f64;
                for k in 1..=grid {
                    let t = k as f64 / grid as f64;
                    let mut sum = 0.0;
                    for j in 0..r {
                        let row = &w[j * (grid + 1)..(j + 1) * (grid + 1)];
                        let b = row[k] - t * row[grid];
                        sum += b * b;
                    }
                    sup = sup.max(sum);
                }
                sup
            },
        )
        .collect();
    Ok(quantile_of_sups(sups, req.alpha))
}

/// Critical value of the standard monitoring rule: quantile of
/// `sup ||W(t)||_1 / t^gamma` over the unit interval, excluding `t = 0`.
pub fn simulate_online_ct_cv(req: &CvRequest) -> Result<f64> {
    if req.kind != CvKind::OnlineCt {
        return Err(Error::InvalidInput("request kind is not online-ct".into()));
    }
    req.validate()?;
    let grid = req.grid;
    let r = req.r;
    let gamma = req.gamma.expect("validated");
    let dt_sqrt = (1.0 / grid as f64).sqrt();
    let sups: Vec<f64> = (0..req.n_paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; r],
            |w, path| {
                let mut rng = path_rng(req.seed, path, 0);
                w.iter_mut().for_each(|v| *v = 0.0);
                let mut sup = 0.0f64;
                for k in 1..=grid {
                    let mut norm1 = 0.0;
                    for wj in w.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *wj += dt_sqrt * z;
                        norm1 += wj.abs();
                    }
                    let t = k as f64 / grid as f64;
                    sup = sup.max(norm1 / t.powf(gamma));
                }
                sup
            },
        )
        .collect();
    Ok(quantile_of_sups(sups, req.alpha))
}

const MAX_RESAMPLE_ATTEMPTS: u64 = 64;

/// Critical value of the ratio monitoring rule.
///
/// Per path the Brownian motion is simulated on `[0, 1 + t_max]`, the bridge
/// normaliser `int_0^1 B B' dv` is computed by the trapezoid rule and
/// inverted, and the supremum of the normalised quadratic form is taken over
/// `t in (0, t_max]`. Paths with a numerically singular normaliser are
/// resampled deterministically and counted.
pub fn simulate_online_rt_cv(req: &CvRequest) -> Result<CvOutcome> {
    if req.kind != CvKind::OnlineRt {
        return Err(Error::InvalidInput("request kind is not online-rt".into()));
    }
    req.validate()?;
    let grid = req.grid;
    let r = req.r;
    let gamma = req.gamma.expect("validated");
    let t_max = req.t_max.expect("validated");
    let m_points = (grid as f64 * (1.0 + t_max)).round() as usize;
    let dt = 1.0 / grid as f64;
    let dt_sqrt = dt.sqrt();

    let per_path: Vec<(f64, u64)> = (0..req.n_paths as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; r * (m_points + 1)],
            |w, path| {
                for attempt in 0..MAX_RESAMPLE_ATTEMPTS {
                    let mut rng = path_rng(req.seed, path, attempt);
                    for j in 0..r {
                        let row = &mut w[j * (m_points + 1)..(j + 1) * (m_points + 1)];
                        row[0] = 0.0;
                        for k in 1..=m_points {
                            let z: f64 = rng.sample(StandardNormal);
                            row[k] = row[k - 1] + dt_sqrt * z;
                        }
                    }
                    // Bridge extension B(s) = W(s) - s W(1), in place.
                    for j in 0..r {
                        let row = &mut w[j * (m_points + 1)..(j + 1) * (m_points + 1)];
                        let w1 = row[grid];
                        for (k, v) in row.iter_mut().enumerate() {
                            *v -= k as f64 * dt * w1;
                        }
                    }
                    // Trapezoid rule for the normaliser over [0, 1]; both end
                    // points of the bridge vanish there.
                    let mut g = nalgebra::DMatrix::<f64>::zeros(r, r);
                    for k in 1..grid {
                        for i in 0..r {
                            let bi = w[i * (m_points + 1) + k];
                            for j in 0..r {
                                g[(i, j)] += bi * w[j * (m_points + 1) + k];
                            }
                        }
                    }
                    g *= dt;
                    let g_inv = match CovMatrix::from_matrix(g).inverse() {
                        Ok(inv) => inv,
                        Err(_) => continue,
                    };
                    let mut sup = 0.0f64;
                    let mut b = vec![0.0f64; r];
                    for k in (grid + 1)..=m_points {
                        for (j, bj) in b.iter_mut().enumerate() {
                            *bj = w[j * (m_points + 1) + k];
                        }
                        let t = k as f64 * dt - 1.0;
                        let eta = (1.0 + t) * (t / (1.0 + t)).powf(gamma);
                        sup = sup.max(g_inv.quadratic_form(&b) / eta);
                    }
                    return (sup, attempt);
                }
                (f64::NAN, MAX_RESAMPLE_ATTEMPTS)
            },
        )
        .collect();

    let resampled: u64 = per_path.iter().map(|&(_, a)| a).sum();
    let sups: Vec<f64> = per_path.iter().map(|&(s, _)| s).collect();
    if sups.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput(
            "ratio critical value simulation kept producing singular normalisers".into(),
        ));
    }
    Ok(CvOutcome {
        value: quantile_of_sups(sups, req.alpha),
        resampled_paths: resampled as usize,
    })
}

/// Run the simulation matching the request kind.
pub fn simulate(req: &CvRequest) -> Result<CvOutcome> {
    match req.kind {
        CvKind::Offline => Ok(CvOutcome { value: simulate_offline_cv(req)?, resampled_paths: 0 }),
        CvKind::OnlineCt => {
            Ok(CvOutcome { value: simulate_online_ct_cv(req)?, resampled_paths: 0 })
        }
        CvKind::OnlineRt => simulate_online_rt_cv(req),
    }
}

/// One persisted cache entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub value: f64,
    pub seed: u64,
    /// Seconds since the Unix epoch at computation time.
    pub created: u64,
}

/// Value returned by [`CriticalValueTable::get_or_compute`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CachedValue {
    pub value: f64,
    /// Whether the value came from the cache rather than a fresh simulation.
    pub cached: bool,
}

/// Persisted map from canonical request keys to critical values.
///
/// Loading tolerates a missing or corrupt file (the cache is rebuilt); a
/// failed write is reported as a warning and the computed value is still
/// returned.
#[derive(Debug)]
pub struct CriticalValueTable {
    entries: BTreeMap<String, CvEntry>,
    path: Option<PathBuf>,
}

impl CriticalValueTable {
    /// Cache that never touches the filesystem.
    pub fn in_memory() -> Self {
        Self { entries: BTreeMap::new(), path: None }
    }

    /// Load from a JSON file; missing or unreadable content yields an empty
    /// table bound to the same path.
    pub fn load(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let entries = std::fs::read_to_string(&path)
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default();
        Self { entries, path: Some(path) }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cached value for a request, if present.
    pub fn get(&self, req: &CvRequest) -> Option<f64> {
        self.entries.get(&req.cache_key()).map(|e| e.value)
    }

    /// Return the cached value or simulate, store and persist it.
    pub fn get_or_compute(&mut self, req: &CvRequest) -> Result<CachedValue> {
        req.validate()?;
        let key = req.cache_key();
        if let Some(entry) = self.entries.get(&key) {
            return Ok(CachedValue { value: entry.value, cached: true });
        }
        let outcome = simulate(req)?;
        if outcome.resampled_paths > 0 {
            log::warn!(
                "critical value {key}: {} paths resampled due to singular normalisers",
                outcome.resampled_paths
            );
        }
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.entries.insert(key, CvEntry { value: outcome.value, seed: req.seed, created });
        self.persist();
        Ok(CachedValue { value: outcome.value, cached: false })
    }

    fn persist(&self) {
        let Some(path) = &self.path else { return };
        let write = || -> std::io::Result<()> {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            let text = serde_json::to_string_pretty(&self.entries)
                .map_err(|e| std::io::Error::other(e.to_string()))?;
            std::fs::write(path, text)
        };
        if let Err(e) = write() {
            log::warn!("could not persist critical value cache to {}: {e}", path.display());
        }
    }
}

/// Source of critical values for the detectors.
pub trait CvProvider: Sync {
    fn offline_cv(&self, r: usize, alpha: f64) -> Result<f64>;
    fn online_cv(&self, variant: Variant, r: usize, gamma: f64, alpha: f64) -> Result<f64>;
}

/// Monte Carlo provider backed by a [`CriticalValueTable`].
pub struct MonteCarloCv {
    table: Mutex<CriticalValueTable>,
    pub n_paths: usize,
    pub grid: usize,
    pub t_max: f64,
    pub seed: u64,
}

impl MonteCarloCv {
    pub fn new(table: CriticalValueTable) -> Self {
        Self {
            table: Mutex::new(table),
            n_paths: DEFAULT_N_PATHS,
            grid: DEFAULT_GRID,
            t_max: DEFAULT_T_MAX,
            seed: DEFAULT_SEED,
        }
    }

    pub fn in_memory() -> Self {
        Self::new(CriticalValueTable::in_memory())
    }

    fn request(&self, kind: CvKind, r: usize, gamma: Option<f64>, alpha: f64) -> CvRequest {
        CvRequest {
            kind,
            r,
            gamma,
            alpha,
            n_paths: self.n_paths,
            grid: self.grid,
            t_max: (kind == CvKind::OnlineRt).then_some(self.t_max),
            seed: self.seed,
        }
    }

    pub fn get_or_compute(&self, req: &CvRequest) -> Result<CachedValue> {
        self.table.lock().expect("cv table poisoned").get_or_compute(req)
    }
}

impl CvProvider for MonteCarloCv {
    fn offline_cv(&self, r: usize, alpha: f64) -> Result<f64> {
        Ok(self.get_or_compute(&self.request(CvKind::Offline, r, None, alpha))?.value)
    }

    fn online_cv(&self, variant: Variant, r: usize, gamma: f64, alpha: f64) -> Result<f64> {
        let kind = match variant {
            Variant::Standard => CvKind::OnlineCt,
            Variant::Ratio => CvKind::OnlineRt,
        };
        Ok(self.get_or_compute(&self.request(kind, r, Some(gamma), alpha))?.value)
    }
}

/// Fixed critical values, mainly for tests and examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedCv {
    pub offline: Option<f64>,
    pub online_ct: Option<f64>,
    pub online_rt: Option<f64>,
}

impl FixedCv {
    pub fn new(offline: f64, online_ct: f64, online_rt: f64) -> Self {
        Self { offline: Some(offline), online_ct: Some(online_ct), online_rt: Some(online_rt) }
    }

    pub fn offline_only(offline: f64) -> Self {
        Self { offline: Some(offline), online_ct: None, online_rt: None }
    }
}

impl CvProvider for FixedCv {
    fn offline_cv(&self, _r: usize, _alpha: f64) -> Result<f64> {
        self.offline.ok_or_else(|| Error::Logic("no fixed offline critical value set".into()))
    }

    fn online_cv(&self, variant: Variant, _r: usize, _gamma: f64, _alpha: f64) -> Result<f64> {
        match variant {
            Variant::Standard => self.online_ct,
            Variant::Ratio => self.online_rt,
        }
        .ok_or_else(|| Error::Logic(format!("no fixed {variant} critical value set")))
    }
}

/// Pre-populate the standard grid of critical values.
///
/// Covers `gamma in {0, 0.25, 0.45}`, `alpha in {0.01, 0.05, 0.1}` and
/// `r in {1, 2}` for both online kinds, plus the offline values per
/// `(r, alpha)`. Returns the computed `(key, value)` pairs.
pub fn warm_grid(table: &mut CriticalValueTable) -> Result<Vec<(String, f64)>> {
    let gammas = [0.0, 0.25, 0.45];
    let alphas = [0.01, 0.05, 0.1];
    let rs = [1, 2];
    let mut out = Vec::new();
    for &r in &rs {
        for &alpha in &alphas {
            let req = CvRequest::offline(r, alpha);
            let v = table.get_or_compute(&req)?;
            out.push((req.cache_key(), v.value));
            for &gamma in &gammas {
                for req in [CvRequest::online_ct(r, gamma, alpha), CvRequest::online_rt(r, gamma, alpha)] {
                    let v = table.get_or_compute(&req)?;
                    out.push((req.cache_key(), v.value));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: CvKind, r: usize, gamma: Option<f64>, alpha: f64) -> CvRequest {
        CvRequest {
            kind,
            r,
            gamma,
            alpha,
            n_paths: 2_000,
            grid: 200,
            t_max: (kind == CvKind::OnlineRt).then_some(2.0),
            seed: 7,
        }
    }

    #[test]
    fn quantile_indexing() {
        let sorted: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(empirical_quantile(&sorted, 0.95), 95.0);
        assert_eq!(empirical_quantile(&sorted, 0.5), 50.0);
        assert_eq!(empirical_quantile(&sorted, 1.0), 100.0);
    }

    #[test]
    fn offline_quantiles_monotone_in_alpha() {
        let hi = simulate_offline_cv(&small(CvKind::Offline, 1, None, 0.05)).unwrap();
        let lo = simulate_offline_cv(&small(CvKind::Offline, 1, None, 0.5)).unwrap();
        assert!(lo < hi, "alpha=0.5 quantile {lo} should be below alpha=0.05 quantile {hi}");
    }

    #[test]
    fn offline_quantile_grows_with_dimension() {
        let r1 = simulate_offline_cv(&small(CvKind::Offline, 1, None, 0.05)).unwrap();
        let r2 = simulate_offline_cv(&small(CvKind::Offline, 2, None, 0.05)).unwrap();
        assert!(r2 > r1);
    }

    #[test]
    fn ct_deterministic_and_gamma_monotone() {
        let req = small(CvKind::OnlineCt, 1, Some(0.0), 0.05);
        let a = simulate_online_ct_cv(&req).unwrap();
        let b = simulate_online_ct_cv(&req).unwrap();
        assert_eq!(a, b);
        let steep = simulate_online_ct_cv(&small(CvKind::OnlineCt, 1, Some(0.49), 0.05)).unwrap();
        assert!(steep > a, "gamma=0.49 quantile {steep} should exceed gamma=0 quantile {a}");
    }

    #[test]
    fn rt_deterministic_and_horizon_monotone() {
        let mut req = small(CvKind::OnlineRt, 1, Some(0.25), 0.05);
        let a = simulate_online_rt_cv(&req).unwrap();
        let b = simulate_online_rt_cv(&req).unwrap();
        assert_eq!(a, b);
        req.t_max = Some(4.0);
        let wider = simulate_online_rt_cv(&req).unwrap();
        assert!(wider.value >= a.value, "sup over a longer horizon cannot shrink");
    }

    #[test]
    fn request_validation_rules() {
        let mut req = small(CvKind::OnlineCt, 1, Some(0.6), 0.05);
        assert!(req.validate().is_err());
        req.gamma = Some(0.2);
        req.n_paths = 10;
        assert!(req.validate().is_err());
        req.n_paths = 2_000;
        assert!(req.validate().is_ok());
        let mut rt = small(CvKind::OnlineRt, 1, Some(0.2), 0.05);
        rt.t_max = Some(-1.0);
        assert!(rt.validate().is_err());
    }

    #[test]
    fn cache_miss_then_hit() {
        let mut table = CriticalValueTable::in_memory();
        let req = small(CvKind::Offline, 1, None, 0.05);
        let first = table.get_or_compute(&req).unwrap();
        assert!(!first.cached);
        let second = table.get_or_compute(&req).unwrap();
        assert!(second.cached);
        assert_eq!(first.value, second.value);
    }

    #[test]
    fn cache_separates_alphas() {
        let mut table = CriticalValueTable::in_memory();
        table.get_or_compute(&small(CvKind::Offline, 1, None, 0.05)).unwrap();
        table.get_or_compute(&small(CvKind::Offline, 1, None, 0.1)).unwrap();
        assert_eq!(table.len(), 2);
    }

    #[test]
    fn cache_recovers_from_corrupt_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cv.json");
        std::fs::write(&path, "{ not json").unwrap();
        let mut table = CriticalValueTable::load(&path);
        assert!(table.is_empty());
        let req = small(CvKind::Offline, 1, None, 0.05);
        let computed = table.get_or_compute(&req).unwrap();
        assert!(!computed.cached);
        // Rewritten cache round-trips.
        let mut again = CriticalValueTable::load(&path);
        let hit = again.get_or_compute(&req).unwrap();
        assert!(hit.cached);
        assert_eq!(hit.value, computed.value);
    }

    #[test]
    fn unwritable_cache_still_returns_value() {
        let mut table = CriticalValueTable {
            entries: BTreeMap::new(),
            path: Some(PathBuf::from("/nonexistent-root-dir/cv.json")),
        };
        let req = small(CvKind::Offline, 1, None, 0.05);
        assert!(table.get_or_compute(&req).is_ok());
    }

    #[test]
    fn cache_key_is_canonical() {
        let req = CvRequest::online_rt(2, 0.25, 0.05);
        assert_eq!(
            req.cache_key(),
            "online-rt|2|0.250000|0.050000|20000|1000|10.000000"
        );
        assert_eq!(
            CvRequest::offline(1, 0.05).cache_key(),
            "offline|1|-|0.050000|20000|1000|-"
        );
    }
}
