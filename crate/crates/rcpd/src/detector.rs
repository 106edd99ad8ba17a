//! The full real-time detection pipeline over an observation stream.
//!
//! The state machine follows a fixed cycle. When the stream reaches the
//! monitoring start `m_s`, the validated segmentation runs over the whole
//! history `[1, m_s]` and the training window is set to begin at the last
//! historical change (or at most `u` observations back when none is found).
//! A sequential monitor trained on that window then watches up to `l`
//! incoming observations. On a stop it emits a detection event, labels its
//! direction with the configured indicator and moves `m_s` a quiet distance
//! `d` past the detection; on window exhaustion it retrains at `m_s + l`.
//! Every decision at stream position `k` depends only on observations
//! `1..=k`.
//!
//! The filter-based direction indicator needs up to `h` observations past
//! the change, so such events are emitted immediately with a pending
//! direction that is resolved (and pushed to the sink) once the data is
//! available, clipped at the stream end.

use crate::critical_values::CvProvider;
use crate::error::{Error, Result};
use crate::online::{self, MonitorState, Verdict};
use crate::segmentation::{binary_segmentation_with_cv, validate_candidates};
use crate::series::{
    ChangePoint, Direction, Phase, RcpdConfig, Segment, TimeSeries, TrendIndicator, Variant,
};
use crate::trend;

/// One detection emitted by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvent {
    pub cp: ChangePoint,
    /// Window the stopping monitor was trained on.
    pub training_window: Segment,
    pub variant: Variant,
    pub trend_used: TrendIndicator,
    /// Stream position at emission; always equals `cp.index`.
    pub at_step: usize,
    /// Sign of the sequential detector at the stop, regardless of the
    /// configured indicator.
    pub e_sign: Direction,
}

/// Consumer of detection events. Delivery is ordered and at most once per
/// change point; a deferred direction arrives through the second callback.
pub trait EventSink {
    fn on_event(&mut self, event: &DetectionEvent);
    fn on_direction_resolved(&mut self, _cp_index: usize, _direction: Direction) {}
}

/// Sink that drops everything; the detector keeps its own event list.
pub struct NullSink;

impl EventSink for NullSink {
    fn on_event(&mut self, _event: &DetectionEvent) {}
}

enum Mode {
    /// Waiting for the stream to reach the next training position.
    Waiting { train_at: usize },
    /// Monitoring until `window_end` (exclusive), then retraining.
    Monitoring { state: Box<MonitorState>, window_end: usize },
}

struct PendingDirection {
    event_idx: usize,
    cp_index: usize,
    resolve_at: usize,
    e_first: f64,
}

/// Streaming change-point detector; one instance per series.
pub struct Detector<'a> {
    config: RcpdConfig,
    cv_provider: &'a dyn CvProvider,
    offline_cv: f64,
    history: TimeSeries,
    mode: Mode,
    pending: Option<PendingDirection>,
    events: Vec<DetectionEvent>,
    skipped_windows: usize,
}

impl<'a> Detector<'a> {
    pub fn new(config: RcpdConfig, dim: usize, cv_provider: &'a dyn CvProvider) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        let offline_cv = cv_provider.offline_cv(dim, config.alpha)?;
        Ok(Self {
            mode: Mode::Waiting { train_at: config.ms0 },
            config,
            cv_provider,
            offline_cv,
            history: TimeSeries::empty(dim),
            pending: None,
            events: Vec::new(),
            skipped_windows: 0,
        })
    }

    /// Events emitted so far; directions may still be pending.
    pub fn events(&self) -> &[DetectionEvent] {
        &self.events
    }

    /// Training windows skipped because no monitor could be trained on them.
    pub fn skipped_windows(&self) -> usize {
        self.skipped_windows
    }

    /// Feed one observation and advance the state machine.
    pub fn push(&mut self, observation: &[f64], sink: &mut dyn EventSink) -> Result<()> {
        if observation.len() != self.history.dim() {
            return Err(Error::InvalidInput(format!(
                "observation {} has dimension {}, expected {}",
                self.history.len() + 1,
                observation.len(),
                self.history.dim()
            )));
        }
        if observation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite observation at stream position {}",
                self.history.len() + 1
            )));
        }
        self.history.push_row(observation);
        let n = self.history.len();

        if let Some(pending) = &self.pending {
            if n >= pending.resolve_at {
                self.resolve_pending(sink)?;
            }
        }

        // A window that closes at n immediately re-enters the training
        // branch at the same position, so loop over at most one transition.
        loop {
            match &mut self.mode {
                Mode::Waiting { train_at } => {
                    if n < *train_at {
                        return Ok(());
                    }
                    debug_assert_eq!(n, *train_at);
                    self.train_at(n)?;
                    return Ok(());
                }
                Mode::Monitoring { state, window_end } => {
                    if n < *window_end {
                        match state.step(observation)? {
                            Verdict::Continue => return Ok(()),
                            Verdict::Stop { tau, e_first } => {
                                self.emit(tau, e_first, sink)?;
                                return Ok(());
                            }
                        }
                    }
                    debug_assert_eq!(n, *window_end);
                    self.mode = Mode::Waiting { train_at: n };
                    // fall through to the training branch at this n
                }
            }
        }
    }

    /// Resolve any pending direction against the data seen so far. Call once
    /// the stream is exhausted; [`run`] and [`replay`] do this themselves.
    pub fn finish(&mut self, sink: &mut dyn EventSink) -> Result<()> {
        if self.pending.is_some() {
            self.resolve_pending(sink)?;
        }
        Ok(())
    }

    /// All events with final directions. Call after [`Detector::finish`].
    pub fn into_events(self) -> Vec<DetectionEvent> {
        self.events
    }

    fn train_at(&mut self, n: usize) -> Result<()> {
        let full = Segment::new(1, n)?;
        let candidates = binary_segmentation_with_cv(&self.history, full, self.offline_cv)?;
        let cps = validate_candidates(&self.history, full, self.offline_cv, &candidates)?;
        let start = match cps.last() {
            Some(&last) => last,
            None => n.saturating_sub(self.config.u - 1).max(1),
        };
        let window = Segment::new(start, n)?;
        match online::train(&self.history, window, &self.config, self.cv_provider) {
            Ok(state) => {
                self.mode = Mode::Monitoring {
                    state: Box::new(state),
                    window_end: n + self.config.l,
                };
            }
            Err(Error::Untrainable { variant, msg }) => {
                log::warn!(
                    "skipping monitoring window at {n}: untrainable {variant} monitor ({msg})"
                );
                self.skipped_windows += 1;
                self.mode = Mode::Waiting { train_at: n + self.config.l };
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }

    fn emit(&mut self, tau: usize, e_first: f64, sink: &mut dyn EventSink) -> Result<()> {
        let Mode::Monitoring { state, .. } = &self.mode else {
            return Err(Error::Logic("stop verdict outside monitoring mode".into()));
        };
        let cp_index = online::online_cp_index(state, tau)?;
        debug_assert_eq!(cp_index, self.history.len());
        let training_window = Segment::new(state.training_start(), state.training_start() + state.m() - 1)?;
        let e_sign = trend::ti_ts(e_first)?;
        let training_level = state.training_mean()[0];
        let magnitude = e_first / training_level.abs();

        let direction = match self.config.trend {
            TrendIndicator::Ts => Some(e_sign),
            TrendIndicator::Macd if self.config.h == 0 => Some(self.filter_direction(cp_index, 0, e_first)?),
            TrendIndicator::Macd => None,
        };
        let event = DetectionEvent {
            cp: ChangePoint {
                index: cp_index,
                direction,
                magnitude,
                detection_lag: Some(tau),
                phase: Phase::Online,
            },
            training_window,
            variant: self.config.variant,
            trend_used: self.config.trend,
            at_step: cp_index,
            e_sign,
        };
        sink.on_event(&event);
        if direction.is_none() {
            self.pending = Some(PendingDirection {
                event_idx: self.events.len(),
                cp_index,
                resolve_at: cp_index + self.config.h,
                e_first,
            });
        }
        self.events.push(event);
        self.mode = Mode::Waiting {
            train_at: cp_index + self.config.d.max(1),
        };
        Ok(())
    }

    fn filter_direction(&self, cp_index: usize, h: usize, e_first: f64) -> Result<Direction> {
        let xs = self.history.column(0);
        match trend::ti_f(&xs, cp_index, h, self.config.p1, self.config.p2, self.config.p3)? {
            Some(direction) => Ok(direction),
            // Zero filter sum: fall back to the detector sign.
            None => trend::ti_ts(e_first),
        }
    }

    fn resolve_pending(&mut self, sink: &mut dyn EventSink) -> Result<()> {
        let Some(pending) = self.pending.take() else { return Ok(()) };
        // Clip the window when the stream ended before cp_index + h.
        let h = self.history.len().saturating_sub(pending.cp_index).min(self.config.h);
        let direction = self.filter_direction(pending.cp_index, h, pending.e_first)?;
        self.events[pending.event_idx].cp.direction = Some(direction);
        sink.on_direction_resolved(pending.cp_index, direction);
        Ok(())
    }
}

/// Run the pipeline over a fallible observation stream, forwarding events to
/// the sink, and return the final event list.
pub fn run<I>(
    source: I,
    config: &RcpdConfig,
    cv_provider: &dyn CvProvider,
    sink: &mut dyn EventSink,
) -> Result<Vec<DetectionEvent>>
where
    I: IntoIterator<Item = Result<Vec<f64>>>,
{
    let mut detector: Option<Detector> = None;
    for item in source {
        let row = item?;
        let d = match &mut detector {
            Some(d) => d,
            None => detector.insert(Detector::new(config.clone(), row.len(), cv_provider)?),
        };
        d.push(&row, sink)?;
    }
    match detector {
        Some(mut d) => {
            d.finish(sink)?;
            Ok(d.into_events())
        }
        None => Ok(Vec::new()),
    }
}

/// Batch adapter: run the pipeline over a stored series.
pub fn replay(
    series: &TimeSeries,
    config: &RcpdConfig,
    cv_provider: &dyn CvProvider,
) -> Result<Vec<DetectionEvent>> {
    let mut detector = Detector::new(config.clone(), series.dim(), cv_provider)?;
    let mut sink = NullSink;
    for t in 1..=series.len() {
        detector.push(series.row(t), &mut sink)?;
    }
    detector.finish(&mut sink)?;
    Ok(detector.into_events())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical_values::FixedCv;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn fixed_cv() -> FixedCv {
        FixedCv::new(1.844, 2.7, 11.0)
    }

    fn step_stream(seed: u64, n: usize, cp: usize, delta: f64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (1..=n)
            .map(|t| {
                let mean = if t >= cp { delta } else { 0.0 };
                mean + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        TimeSeries::from_values(values).unwrap()
    }

    fn base_config() -> RcpdConfig {
        RcpdConfig { ms0: 100, l: 50, d: 50, ..RcpdConfig::default() }
    }

    #[test]
    fn detects_a_single_step() {
        let series = step_stream(1, 400, 200, 3.0);
        let events = replay(&series, &base_config(), &fixed_cv()).unwrap();
        assert_eq!(events.len(), 1, "events: {events:?}");
        let e = &events[0];
        assert!(e.cp.index >= 200 && e.cp.index <= 215, "index {}", e.cp.index);
        assert_eq!(e.cp.direction, Some(Direction::Up));
        assert_eq!(e.at_step, e.cp.index);
        assert!(e.cp.detection_lag.unwrap() >= 1);
        assert_eq!(e.variant, Variant::Standard);
    }

    #[test]
    fn no_change_usually_stays_quiet() {
        let mut total_events = 0;
        for seed in 0..40 {
            let series = step_stream(100 + seed, 400, usize::MAX, 0.0);
            total_events += replay(&series, &base_config(), &fixed_cv()).unwrap().len();
        }
        assert!(total_events <= 8, "too many false alarms: {total_events}");
    }

    #[test]
    fn replay_equals_run() {
        let series = step_stream(2, 500, 250, 2.0);
        let config = base_config();
        let cv = fixed_cv();
        let from_replay = replay(&series, &config, &cv).unwrap();
        let rows = (1..=series.len()).map(|t| Ok(series.row(t).to_vec()));
        let mut sink = NullSink;
        let from_run = run(rows, &config, &cv, &mut sink).unwrap();
        assert_eq!(from_replay, from_run);
    }

    #[test]
    fn empty_stream_no_events() {
        let mut sink = NullSink;
        let events = run(std::iter::empty(), &base_config(), &fixed_cv(), &mut sink).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn short_stream_before_ms_no_events() {
        let series = step_stream(3, 80, 40, 3.0);
        let events = replay(&series, &base_config(), &fixed_cv()).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn event_spacing_respects_quiet_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Alternating levels every 150 observations.
        let values: Vec<f64> = (0..900)
            .map(|t| {
                let level = if (t / 150) % 2 == 0 { 0.0 } else { 4.0 };
                level + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let series = TimeSeries::from_values(values).unwrap();
        let config = base_config();
        let events = replay(&series, &config, &fixed_cv()).unwrap();
        assert!(events.len() >= 2);
        for pair in events.windows(2) {
            assert!(pair[1].cp.index - pair[0].cp.index >= config.d);
        }
    }

    #[test]
    fn truncation_prefix_equivalence() {
        // Causality: running on a prefix yields exactly the events of the
        // full run whose index fits the prefix.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..800)
            .map(|t| {
                let level = match t {
                    0..=249 => 0.0,
                    250..=499 => 2.5,
                    _ => -1.0,
                };
                level + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let series = TimeSeries::from_values(values).unwrap();
        let config = base_config(); // trend = ts, directions immediate
        let cv = fixed_cv();
        let full = replay(&series, &config, &cv).unwrap();
        for prefix_len in [300, 450, 600] {
            let prefix =
                TimeSeries::from_values(series.column(0)[..prefix_len].to_vec()).unwrap();
            let partial = replay(&prefix, &config, &cv).unwrap();
            let expected: Vec<_> =
                full.iter().filter(|e| e.cp.index <= prefix_len).cloned().collect();
            assert_eq!(partial, expected, "prefix {prefix_len}");
        }
    }

    #[test]
    fn macd_trend_resolves_after_h_observations() {
        let series = step_stream(6, 400, 200, 3.0);
        let config = RcpdConfig {
            trend: TrendIndicator::Macd,
            h: 5,
            ..base_config()
        };

        struct Recorder {
            emitted: Vec<(usize, Option<Direction>)>,
            resolved: Vec<(usize, Direction)>,
        }
        impl EventSink for Recorder {
            fn on_event(&mut self, event: &DetectionEvent) {
                self.emitted.push((event.cp.index, event.cp.direction));
            }
            fn on_direction_resolved(&mut self, cp_index: usize, direction: Direction) {
                self.resolved.push((cp_index, direction));
            }
        }

        let rows = (1..=series.len()).map(|t| Ok(series.row(t).to_vec()));
        let mut sink = Recorder { emitted: Vec::new(), resolved: Vec::new() };
        let events = run(rows, &config, &fixed_cv(), &mut sink).unwrap();
        assert_eq!(events.len(), 1);
        // Emitted immediately with the direction pending, resolved later.
        assert_eq!(sink.emitted.len(), 1);
        assert_eq!(sink.emitted[0].1, None);
        assert_eq!(sink.resolved.len(), 1);
        assert_eq!(sink.resolved[0], (events[0].cp.index, Direction::Up));
        assert_eq!(events[0].cp.direction, Some(Direction::Up));
    }

    #[test]
    fn macd_trend_clips_at_stream_end() {
        // The change fires close to the end so fewer than h observations
        // remain; the direction must still resolve.
        let series = step_stream(7, 252, 245, 4.0);
        let config = RcpdConfig {
            ms0: 100,
            l: 50,
            d: 50,
            trend: TrendIndicator::Macd,
            h: 10,
            ..RcpdConfig::default()
        };
        let events = replay(&series, &config, &fixed_cv()).unwrap();
        for e in &events {
            assert!(e.cp.direction.is_some());
        }
    }

    #[test]
    fn aborts_on_invalid_observation_with_position() {
        let config = base_config();
        let cv = fixed_cv();
        let rows = vec![Ok(vec![1.0]), Ok(vec![2.0]), Ok(vec![f64::NAN])];
        let mut sink = NullSink;
        let err = run(rows, &config, &cv, &mut sink).unwrap_err();
        assert!(err.to_string().contains("position 3"), "{err}");
    }

    #[test]
    fn training_window_excludes_detected_history() {
        // A big historical change before ms forces the training window to
        // start at the detected change point.
        let mut values = vec![0.0; 150];
        values.extend(vec![5.0; 150]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for v in &mut values {
            *v += rng.sample::<f64, _>(StandardNormal) * 0.5;
        }
        let series = TimeSeries::from_values(values).unwrap();
        let config = RcpdConfig { ms0: 200, ..base_config() };
        let cv = fixed_cv();
        let mut detector = Detector::new(config, 1, &cv).unwrap();
        let mut sink = NullSink;
        for t in 1..=series.len() {
            detector.push(series.row(t), &mut sink).unwrap();
        }
        match &detector.mode {
            Mode::Monitoring { state, .. } => {
                assert!(
                    (state.training_start() as i64 - 150).unsigned_abs() <= 3,
                    "training starts at {}",
                    state.training_start()
                );
            }
            Mode::Waiting { .. } => panic!("expected an active monitor"),
        }
    }
}
