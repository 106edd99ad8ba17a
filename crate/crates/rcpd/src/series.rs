//! Time-series container, segment arithmetic and shared configuration types.
//!
//! All time indices in this crate are 1-based, matching the usual statistical
//! notation: observation `t` of a series of length `n` satisfies
//! `1 <= t <= n`. The conversion to 0-based storage happens in exactly one
//! place, [`TimeSeries::row`]. Dimension indices stay 0-based like any other
//! Rust slice index.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A length-`n` sequence of `dim`-dimensional observations.
///
/// The first dimension is the monitored quantity (e.g. visits per time unit);
/// further dimensions may carry auxiliary features. Values are validated to be
/// finite at construction and the container is immutable afterwards, so shared
/// concurrent reads are safe.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    data: Vec<f64>, // row-major, n * dim
    n: usize,
    dim: usize,
}

impl TimeSeries {
    /// Build a multivariate series from rows. Every row must have the same
    /// positive length and contain only finite values.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("series must have at least one row".into()));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("rows must have at least one column".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "row {} has {} columns, expected {}",
                    i + 1,
                    row.len(),
                    dim
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite value at row {}, column {}",
                        i + 1,
                        j + 1
                    )));
                }
                data.push(v);
            }
        }
        Ok(Self { data, n: rows.len(), dim })
    }

    /// Build a univariate series.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("series must have at least one row".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite value at row {}, column 1",
                    i + 1
                )));
            }
        }
        let n = values.len();
        Ok(Self { data: values, n, dim: 1 })
    }

    /// Empty growable series used by the streaming detector; not exposed.
    pub(crate) fn empty(dim: usize) -> Self {
        Self { data: Vec::new(), n: 0, dim }
    }

    /// Append one observation. Only the streaming detector uses this; the
    /// public container stays immutable.
    pub(crate) fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
        self.n += 1;
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of dimensions per observation.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Observation at 1-based time index `t`.
    ///
    /// This is the single 1-based -> 0-based conversion point of the crate.
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        debug_assert!(t >= 1 && t <= self.n, "time index {t} out of 1..={}", self.n);
        &self.data[(t - 1) * self.dim..t * self.dim]
    }

    /// Single dimension of the series as a fresh vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        assert!(j < self.dim, "dimension {j} out of 0..{}", self.dim);
        (1..=self.n).map(|t| self.row(t)[j]).collect()
    }

    /// Full series as a segment.
    pub fn full_segment(&self) -> Segment {
        Segment { start: 1, end: self.n }
    }

    /// Serialise as CSV, one row per observation, no header.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let mut line = String::new();
        for t in 1..=self.n {
            line.clear();
            for (j, v) in self.row(t).iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                let _ = write!(line, "{v}");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// Inclusive 1-based index range `[start, end]` delimiting a sub-search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start == 0 || start > end {
            return Err(Error::Range(format!("invalid segment [{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    /// Number of observations covered.
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false // start <= end is a construction invariant
    }

    /// Error unless the segment lies within a series of length `n`.
    pub fn check_within(&self, n: usize) -> Result<()> {
        if self.start == 0 || self.start > self.end || self.end > n {
            return Err(Error::Range(format!(
                "segment [{}, {}] out of bounds for series of length {n}",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

/// Direction of a detected mean change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

/// Which phase of the detector produced a change point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Offline,
    Online,
}

/// A detected change in the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// Absolute 1-based series index of the estimated change.
    pub index: usize,
    /// Estimated direction; `None` while a deferred indicator is pending.
    pub direction: Option<Direction>,
    /// Relative change of the first-dimension mean across the change point
    /// (`0.2` = +20%); infinite when the pre-change mean is zero.
    pub magnitude: f64,
    /// Stopping time of the sequential detector, in monitoring steps.
    pub detection_lag: Option<usize>,
    pub phase: Phase,
}

/// Sequential CUSUM flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Long-run-covariance normalised detector.
    Standard,
    /// Self-normalised (ratio) detector; no covariance estimation needed.
    Ratio,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Standard => write!(f, "standard"),
            Variant::Ratio => write!(f, "ratio"),
        }
    }
}

/// Which direction indicator labels a detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendIndicator {
    /// Sign of the sequential detector at the stopping step.
    Ts,
    /// Filter-based indicator built from EMA/MACD differences.
    Macd,
}

impl std::fmt::Display for TrendIndicator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrendIndicator::Ts => write!(f, "ts"),
            TrendIndicator::Macd => write!(f, "macd"),
        }
    }
}

/// Configuration of the full real-time detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcpdConfig {
    /// Significance level of both test phases.
    pub alpha: f64,
    /// Sensitivity of the monitoring boundary, in `[0, 0.5)`.
    pub gamma: f64,
    /// Monitoring window length before retraining.
    pub l: usize,
    /// Quiet distance after a detection before monitoring resumes.
    pub d: usize,
    /// First monitoring start index.
    pub ms0: usize,
    /// Cap on the training window when no historical change is found.
    pub u: usize,
    pub variant: Variant,
    pub trend: TrendIndicator,
    /// Number of post-detection samples the filter indicator sums over.
    pub h: usize,
    /// EMA lags of the filter indicator, `p1 < p2 < p3`.
    pub p1: usize,
    pub p2: usize,
    pub p3: usize,
}

impl Default for RcpdConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            gamma: 0.25,
            l: 50,
            d: 50,
            ms0: 200,
            u: 500,
            variant: Variant::Standard,
            trend: TrendIndicator::Ts,
            h: 5,
            p1: 9,
            p2: 12,
            p3: 26,
        }
    }
}

impl RcpdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if !(0.0..0.5).contains(&self.gamma) {
            return Err(Error::InvalidInput(format!("gamma {} not in [0, 0.5)", self.gamma)));
        }
        if self.l < 1 {
            return Err(Error::InvalidInput("monitoring window l must be >= 1".into()));
        }
        if self.u < 2 {
            return Err(Error::InvalidInput("training cap u must be >= 2".into()));
        }
        if self.ms0 < 1 {
            return Err(Error::InvalidInput("monitoring start ms must be >= 1".into()));
        }
        if !(self.p1 < self.p2 && self.p2 < self.p3) {
            return Err(Error::InvalidInput(format!(
                "EMA lags must satisfy p1 < p2 < p3, got {}, {}, {}",
                self.p1, self.p2, self.p3
            )));
        }
        if self.p1 < 1 {
            return Err(Error::InvalidInput("EMA lag p1 must be >= 1".into()));
        }
        Ok(())
    }
}

/// Arithmetic mean per dimension over a segment.
pub fn sample_mean(series: &TimeSeries, seg: Segment) -> Result<Vec<f64>> {
    seg.check_within(series.len())?;
    let dim = series.dim();
    let mut mean = vec![0.0; dim];
    for t in seg.start..=seg.end {
        for (m, &v) in mean.iter_mut().zip(series.row(t)) {
            *m += v;
        }
    }
    let len = seg.len() as f64;
    for m in &mut mean {
        *m /= len;
    }
    Ok(mean)
}

/// Parse CSV bytes into a series.
///
/// Comma-separated, UTF-8, decimal point `.`; one row per time instance. A
/// single header row is skipped when the first row fails to parse as numbers.
/// Blank lines are ignored. Any non-numeric or non-finite cell and any ragged
/// row is rejected with its 1-based position.
pub fn ingest_csv<R: Read>(reader: R) -> Result<TimeSeries> {
    let buf = BufReader::new(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim = 0usize;
    for (idx, line) in buf.lines().enumerate() {
        let line = line?;
        let row_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match parse_numeric_row(trimmed, row_no) {
            Ok(row) => {
                if rows.is_empty() {
                    dim = row.len();
                } else if row.len() != dim {
                    return Err(Error::Parse {
                        row: row_no,
                        col: row.len().min(dim) + 1,
                        msg: format!("expected {dim} columns, found {}", row.len()),
                    });
                }
                rows.push(row);
            }
            Err(e) => {
                // A non-numeric first row is treated as a header.
                if idx == 0 {
                    continue;
                }
                return Err(e);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("no data rows in input".into()));
    }
    TimeSeries::from_rows(&rows)
}

fn parse_numeric_row(line: &str, row_no: usize) -> Result<Vec<f64>> {
    let mut row = Vec::new();
    for (col_idx, cell) in line.split(',').enumerate() {
        let cell = cell.trim();
        let value: f64 = cell.parse().map_err(|_| Error::Parse {
            row: row_no,
            col: col_idx + 1,
            msg: format!("cannot parse {cell:?} as a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                row: row_no,
                col: col_idx + 1,
                msg: format!("non-finite value {cell:?}"),
            });
        }
        row.push(value);
    }
    Ok(row)
}
